use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};

use super::{AudioError, Signal};
use crate::Real;

/// On-disk sample encoding for [`write_wav`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WavEncoding {
    /// 16-bit PCM, round-half-away-from-zero with saturation at full scale.
    Pcm16,
    /// IEEE float-32, lossless for any value representable in `f32`.
    Float32,
}

/// Header-level description of a WAV file.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WavInfo {
    pub sample_rate: u32,
    pub channels: u16,
    pub bits_per_sample: u16,
    pub is_float: bool,
    pub frames: u32,
}

fn map_hound(path: &Path, err: hound::Error) -> AudioError {
    match err {
        hound::Error::IoError(e) if e.kind() == std::io::ErrorKind::NotFound => {
            AudioError::MissingFile(path.to_path_buf())
        }
        hound::Error::IoError(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => {
            AudioError::MalformedContainer(format!("{}: truncated file", path.display()))
        }
        hound::Error::IoError(e) => AudioError::Io(e),
        hound::Error::FormatError(msg) => {
            AudioError::MalformedContainer(format!("{}: {msg}", path.display()))
        }
        hound::Error::Unsupported => {
            AudioError::UnsupportedEncoding(format!("{}: unsupported format", path.display()))
        }
        other => AudioError::MalformedContainer(format!("{}: {other}", path.display())),
    }
}

fn open(path: &Path) -> Result<WavReader<BufReader<File>>, AudioError> {
    if !path.exists() {
        return Err(AudioError::MissingFile(path.to_path_buf()));
    }
    let reader = WavReader::open(path).map_err(|e| map_hound(path, e))?;
    let spec = reader.spec();
    match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16 | 24) | (SampleFormat::Float, 32) => {}
        (fmt, bits) => {
            return Err(AudioError::UnsupportedEncoding(format!(
                "{}: {bits}-bit {fmt:?}",
                path.display()
            )))
        }
    }
    if spec.channels != 1 {
        return Err(AudioError::MultichannelInput(spec.channels));
    }
    Ok(reader)
}

/// Reads the header only, applying the same format checks as [`read_wav`].
pub fn probe_wav(path: impl AsRef<Path>) -> Result<WavInfo, AudioError> {
    let path = path.as_ref();
    let reader = open(path)?;
    let spec = reader.spec();
    Ok(WavInfo {
        sample_rate: spec.sample_rate,
        channels: spec.channels,
        bits_per_sample: spec.bits_per_sample,
        is_float: spec.sample_format == SampleFormat::Float,
        frames: reader.duration(),
    })
}

/// Reads a mono PCM-16, PCM-24 or float-32 WAV file.
///
/// Integer samples are divided by `2^(bits-1)`; float samples pass through.
pub fn read_wav<T: Real>(path: impl AsRef<Path>) -> Result<Signal<T>, AudioError> {
    let path = path.as_ref();
    let mut reader = open(path)?;
    let spec = reader.spec();
    let samples: Vec<T> = match spec.sample_format {
        SampleFormat::Float => reader
            .samples::<f32>()
            .map(|s| s.map(|v| T::lit(f64::from(v))))
            .collect::<Result<_, _>>()
            .map_err(|e| map_hound(path, e))?,
        SampleFormat::Int => {
            let scale = f64::from(1u32 << (spec.bits_per_sample - 1));
            reader
                .samples::<i32>()
                .map(|s| s.map(|v| T::lit(f64::from(v) / scale)))
                .collect::<Result<_, _>>()
                .map_err(|e| map_hound(path, e))?
        }
    };
    Signal::new(samples, spec.sample_rate)
}

pub(crate) fn quantize_pcm16(x: f64) -> i16 {
    (x * 32768.0).round().clamp(-32768.0, 32767.0) as i16
}

pub fn write_wav<T: Real>(
    w: &Signal<T>,
    path: impl AsRef<Path>,
    encoding: WavEncoding,
) -> Result<(), AudioError> {
    let path = path.as_ref();
    let spec = match encoding {
        WavEncoding::Pcm16 => WavSpec {
            channels: 1,
            sample_rate: w.sample_rate(),
            bits_per_sample: 16,
            sample_format: SampleFormat::Int,
        },
        WavEncoding::Float32 => WavSpec {
            channels: 1,
            sample_rate: w.sample_rate(),
            bits_per_sample: 32,
            sample_format: SampleFormat::Float,
        },
    };
    let io = |e: hound::Error| match e {
        hound::Error::IoError(e) => AudioError::Io(e),
        other => AudioError::Io(std::io::Error::other(other.to_string())),
    };
    let mut writer = WavWriter::create(path, spec).map_err(io)?;
    match encoding {
        WavEncoding::Pcm16 => {
            let mut w16 = writer.get_i16_writer(w.len() as u32);
            for &s in w.samples() {
                w16.write_sample(quantize_pcm16(s.as_f64()));
            }
            w16.flush().map_err(io)?;
        }
        WavEncoding::Float32 => {
            for &s in w.samples() {
                writer.write_sample(s.as_f64() as f32).map_err(io)?;
            }
        }
    }
    writer.finalize().map_err(io)
}
