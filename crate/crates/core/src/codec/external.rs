//! File-based subprocess protocol.
//!
//! The command template receives `{input}` (float-32 mono WAV at the native
//! rate), `{output}` (path the command must create, same format and rate)
//! and `{mode}`. It runs under `sh -c` with the parent environment plus
//! `CODEC_PROBE_MODE`. Exit status 0 means success; stderr is captured.

use std::io::Read;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

use super::{Codec, CodecDescriptor, CodecError, CodecKind};
use crate::audio::{read_wav, write_wav, AudioError, WavEncoding};
use crate::Waveform;

/// Directory for WAV exchange files; the system temp dir when unset.
pub const TMPDIR_ENV: &str = "CODEC_PROBE_TMPDIR";
/// Set to the mode id for every external invocation.
pub const MODE_ENV: &str = "CODEC_PROBE_MODE";

const POLL_INTERVAL: Duration = Duration::from_millis(5);
const STDERR_LIMIT: usize = 64 * 1024;

/// Counting semaphore bounding concurrent subprocesses.
#[derive(Debug)]
pub struct ProcessLimiter {
    available: Mutex<usize>,
    freed: Condvar,
}

pub struct Permit<'a>(&'a ProcessLimiter);

impl ProcessLimiter {
    pub fn new(limit: usize) -> Self {
        Self {
            available: Mutex::new(limit.max(1)),
            freed: Condvar::new(),
        }
    }

    pub fn acquire(&self) -> Permit<'_> {
        let mut n = self.available.lock().unwrap_or_else(|e| e.into_inner());
        while *n == 0 {
            n = self.freed.wait(n).unwrap_or_else(|e| e.into_inner());
        }
        *n -= 1;
        Permit(self)
    }
}

impl Drop for Permit<'_> {
    fn drop(&mut self) {
        *self.0.available.lock().unwrap_or_else(|e| e.into_inner()) += 1;
        self.0.freed.notify_one();
    }
}

fn shell_quote(s: &str) -> String {
    format!("'{}'", s.replace('\'', r"'\''"))
}

fn render(template: &str, input: &Path, output: &Path, mode: &str) -> String {
    template
        .replace("{input}", &shell_quote(&input.to_string_lossy()))
        .replace("{output}", &shell_quote(&output.to_string_lossy()))
        .replace("{mode}", &shell_quote(mode))
}

fn exchange_dir() -> Result<tempfile::TempDir, CodecError> {
    let base = std::env::var_os(TMPDIR_ENV)
        .map(PathBuf::from)
        .unwrap_or_else(std::env::temp_dir);
    std::fs::create_dir_all(&base)?;
    let base = base.canonicalize()?;
    Ok(tempfile::Builder::new().prefix("codec-probe-").tempdir_in(base)?)
}

/// One round trip through an external command. Exchange files live in a
/// fresh temporary directory removed on every exit path.
pub fn invoke_external(desc: &CodecDescriptor, w: &Waveform, mode: &str) -> Result<Waveform, CodecError> {
    let template = desc
        .command_template
        .as_deref()
        .ok_or_else(|| CodecError::Config(format!("{}: no command_template", desc.name)))?;
    let dir = exchange_dir()?;
    let input = dir.path().join("input.wav");
    let output = dir.path().join("output.wav");
    write_wav(w, &input, WavEncoding::Float32).map_err(|e| match e {
        AudioError::Io(io) => CodecError::Io(io),
        other => CodecError::Io(std::io::Error::other(other.to_string())),
    })?;

    let mut child = Command::new("sh")
        .arg("-c")
        .arg(render(template, &input, &output, mode))
        .env(MODE_ENV, mode)
        .current_dir(dir.path())
        .stdin(Stdio::null())
        .stdout(Stdio::null())
        .stderr(Stdio::piped())
        .spawn()
        .map_err(|e| CodecError::SpawnFailure(e.to_string()))?;

    let mut pipe = child.stderr.take().expect("stderr piped");
    let reader = std::thread::spawn(move || {
        let mut buf = Vec::new();
        let _ = pipe.read_to_end(&mut buf);
        buf
    });

    let deadline = Instant::now() + Duration::from_secs_f64(desc.timeout);
    let status = loop {
        if let Some(status) = child.try_wait()? {
            break status;
        }
        if Instant::now() >= deadline {
            let _ = child.kill();
            let _ = child.wait();
            // Grandchildren may keep the pipe open; don't wait on the reader.
            return Err(CodecError::Timeout(desc.timeout));
        }
        std::thread::sleep(POLL_INTERVAL);
    };
    let mut stderr = reader.join().unwrap_or_default();
    stderr.truncate(STDERR_LIMIT);
    let stderr = String::from_utf8_lossy(&stderr).into_owned();
    if !stderr.is_empty() {
        log::debug!("{} stderr: {}", desc.name, stderr.trim_end());
    }
    if !status.success() {
        return Err(CodecError::CodecCrashed {
            status: status.to_string(),
            stderr,
        });
    }

    let out: Waveform = read_wav(&output).map_err(|e| match e {
        AudioError::NonFiniteSample(_) => CodecError::NonFiniteOutput,
        other => CodecError::MalformedOutput(other.to_string()),
    })?;
    if out.sample_rate() != desc.native_rate {
        return Err(CodecError::MalformedOutput(format!(
            "output at {} Hz, expected {} Hz",
            out.sample_rate(),
            desc.native_rate
        )));
    }
    Ok(out)
}

/// A codec backed by an external command.
pub struct ExternalCodec {
    desc: CodecDescriptor,
    limiter: Option<Arc<ProcessLimiter>>,
}

impl ExternalCodec {
    pub fn new(desc: CodecDescriptor, limiter: Option<Arc<ProcessLimiter>>) -> Result<Self, CodecError> {
        if desc.kind != CodecKind::External {
            return Err(CodecError::Config(format!("{} is not an external codec", desc.name)));
        }
        desc.validate()?;
        Ok(Self { desc, limiter })
    }
}

impl Codec for ExternalCodec {
    fn descriptor(&self) -> &CodecDescriptor {
        &self.desc
    }

    fn transform(&self, input: &Waveform, mode: &str) -> Result<Waveform, CodecError> {
        let _permit = self.limiter.as_ref().map(|l| l.acquire());
        invoke_external(&self.desc, input, mode)
    }
}
