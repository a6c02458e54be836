//! Deterministic smoke corpus: speech-like utterances, an ambient noise
//! clip, a synthetic room impulse response and a config that exercises
//! every condition family.
//!
//! The utterances are harmonic sources with a wandering pitch, shaped by
//! moving formants, cut into syllables and occasionally preceded by a
//! fricative burst. They are not speech, but they have the spectral and
//! temporal structure that mel distances and codecs react to.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use super::HarnessError;
use crate::audio::{write_wav, WavEncoding};
use crate::perturb::rng::{derive_seed, CounterRng};
use crate::Waveform;

pub const SMOKE_RATE: u32 = 16000;
pub const SMOKE_UTTERANCES: usize = 10;
pub const SMOKE_CONFIG: &str = "smoke.toml";

// F1, F2, F3 in Hz for a handful of vowels.
const VOWELS: [[f64; 3]; 6] = [
    [730.0, 1090.0, 2440.0],
    [270.0, 2290.0, 3010.0],
    [530.0, 1840.0, 2480.0],
    [570.0, 840.0, 2410.0],
    [300.0, 870.0, 2240.0],
    [660.0, 1720.0, 2410.0],
];
const BANDWIDTHS: [f64; 3] = [90.0, 110.0, 170.0];

const WORDS: [&str; 16] = [
    "amber", "bell", "copper", "delta", "ember", "fable", "garden", "harbor", "island", "juniper",
    "kettle", "lantern", "meadow", "nickel", "orbit", "pepper",
];

struct Syllable {
    start: usize,
    len: usize,
    from: [f64; 3],
    to: [f64; 3],
    fricative: usize,
}

fn plan(rng: &mut CounterRng, total: usize, rate: u32) -> (Vec<Syllable>, Vec<usize>) {
    let ms = |x: f64| (x * f64::from(rate) / 1000.0) as usize;
    let mut out = Vec::new();
    let mut word_starts = Vec::new();
    let mut pos = ms(80.0);
    while pos + ms(200.0) < total {
        word_starts.push(out.len());
        let syllables = 1 + rng.below(3);
        for _ in 0..syllables {
            let fricative = if rng.next_f64() < 0.4 { ms(40.0 + 50.0 * rng.next_f64()) } else { 0 };
            let len = ms(140.0 + 160.0 * rng.next_f64());
            if pos + fricative + len >= total {
                break;
            }
            out.push(Syllable {
                start: pos,
                len: fricative + len,
                from: VOWELS[rng.below(VOWELS.len())],
                to: VOWELS[rng.below(VOWELS.len())],
                fricative,
            });
            pos += fricative + len + ms(10.0 + 30.0 * rng.next_f64());
        }
        pos += ms(60.0 + 140.0 * rng.next_f64());
    }
    word_starts.retain(|&w| w < out.len());
    (out, word_starts)
}

/// A speech-like utterance and a matching pseudo-transcript (one word per
/// word-sized syllable group). Peak amplitude is 0.5.
pub fn speech_like(seed: u64, duration: f64, rate: u32) -> (Waveform, String) {
    let n = (duration * f64::from(rate)).round() as usize;
    let mut rng = CounterRng::new(seed);
    let fs = f64::from(rate);
    let base_f0 = 95.0 + 120.0 * rng.next_f64();
    let drift_rate = 0.4 + 0.6 * rng.next_f64();
    let drift_phase = 2.0 * PI * rng.next_f64();
    let (syllables, words) = plan(&mut rng, n, rate);
    let mut noise = CounterRng::new(derive_seed(seed, 1));

    let mut out = vec![0.0; n];
    let mut phase = 0.0f64;
    let mut prev_noise = 0.0;
    let mut next = 0;
    for (i, y) in out.iter_mut().enumerate() {
        let t = i as f64 / fs;
        let f0 = base_f0 * (1.0 + 0.12 * (2.0 * PI * drift_rate * t + drift_phase).sin() + 0.03 * (2.0 * PI * 4.5 * t).sin());
        phase = (phase + 2.0 * PI * f0 / fs) % (2.0 * PI * 1024.0);
        while next < syllables.len() && syllables[next].start + syllables[next].len <= i {
            next += 1;
        }
        let Some(s) = syllables.get(next).filter(|s| s.start <= i) else {
            continue;
        };
        let local = i - s.start;
        if local < s.fricative {
            // First-differenced white noise: a crude high-pass hiss.
            let w = noise.next_gaussian();
            let env = (PI * local as f64 / s.fricative as f64).sin();
            *y = 0.15 * env * (w - prev_noise);
            prev_noise = w;
            continue;
        }
        let v = local - s.fricative;
        let vlen = s.len - s.fricative;
        let x = v as f64 / vlen as f64;
        let env = (PI * x).sin().powf(0.7);
        let formants: [f64; 3] = std::array::from_fn(|k| s.from[k] + (s.to[k] - s.from[k]) * x);
        let mut acc = 0.0;
        let mut h = 1;
        while (h as f64) * f0 < 0.45 * fs {
            let fh = h as f64 * f0;
            let shape: f64 = formants
                .iter()
                .zip(BANDWIDTHS)
                .enumerate()
                .map(|(k, (&f, b))| {
                    let d = (fh - f) / b;
                    0.6f64.powi(k as i32) / (1.0 + d * d)
                })
                .sum();
            acc += (shape + 0.01) / (h as f64).sqrt() * (h as f64 * phase).sin();
            h += 1;
        }
        *y = env * acc;
    }
    let peak = out.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        out.iter_mut().for_each(|v| *v *= 0.5 / peak);
    }
    let text = words
        .iter()
        .map(|&w| WORDS[(derive_seed(seed, 100 + w as u64) % WORDS.len() as u64) as usize])
        .collect::<Vec<_>>()
        .join(" ");
    (Waveform::new(out, rate).expect("positive rate"), text)
}

/// Pinkish background noise with mains hum, RMS about 0.05.
pub fn ambient_noise(duration: f64, rate: u32, seed: u64) -> Waveform {
    let n = (duration * f64::from(rate)).round() as usize;
    let fs = f64::from(rate);
    let mut rng = CounterRng::new(seed);
    // Sum of one-pole low-passes at octave-spaced corners approximates 1/f.
    let corners: Vec<f64> = (0..7).map(|k| 40.0 * 2f64.powi(k)).collect();
    let coefs: Vec<f64> = corners.iter().map(|&c| (-2.0 * PI * c / fs).exp()).collect();
    let mut state = vec![0.0; corners.len()];
    let mut out: Vec<f64> = (0..n)
        .map(|i| {
            let w = rng.next_gaussian();
            let mut pink = 0.0;
            for (s, &a) in state.iter_mut().zip(&coefs) {
                *s = a * *s + (1.0 - a) * w;
                pink += *s;
            }
            let t = i as f64 / fs;
            let hum = (2.0 * PI * 50.0 * t).sin() + 0.4 * (2.0 * PI * 150.0 * t).sin();
            pink + 0.05 * hum
        })
        .collect();
    let rms = (out.iter().map(|v| v * v).sum::<f64>() / n.max(1) as f64).sqrt();
    if rms > 0.0 {
        out.iter_mut().for_each(|v| *v *= 0.05 / rms);
    }
    Waveform::new(out, rate).expect("positive rate")
}

/// Exponentially decaying room response with a unit direct tap at 5 ms,
/// a few early reflections and a diffuse tail.
pub fn synthetic_rir(rate: u32, rt60: f64, seed: u64) -> Waveform {
    let fs = f64::from(rate);
    let n = (rt60 * fs).ceil() as usize;
    let direct = (0.005 * fs).round() as usize;
    let tail_start = direct + (0.004 * fs).round() as usize;
    let mut rng = CounterRng::new(seed);
    let mut taps = vec![0.0; n];
    taps[direct] = 1.0;
    for _ in 0..6 {
        let at = tail_start + rng.below(((0.03 * fs) as usize).max(1));
        if at < n {
            taps[at] += 0.5 * (rng.next_f64() - 0.5);
        }
    }
    for (i, t) in taps.iter_mut().enumerate().skip(tail_start) {
        let age = (i - direct) as f64 / fs;
        *t += 0.08 * rng.next_gaussian() * (-6.91 * age / rt60).exp();
    }
    Waveform::new(taps, rate).expect("positive rate")
}

/// Utterance `i` of a generated set; `set` separates independent corpora.
pub fn smoke_utterance(set: u64, i: usize) -> (Waveform, String) {
    let seed = derive_seed(set, i as u64);
    let duration = 1.5 + (seed % 1000) as f64 / 1000.0;
    speech_like(seed, duration, SMOKE_RATE)
}

fn config_text() -> String {
    let snr = "[-10, -5, 0, 5, 10, 20, 30]";
    let drr = "[-20, -15, -10, -5, 0, 5, 10]";
    format!(
        r#"dataset_manifest = "manifest.csv"
metric_rate = 16000
seed = 20240901

[[codecs]]
name = "identity"

[[codecs]]
name = "mulaw-8"

[[codecs]]
name = "hardclip-0.5"

[[codecs]]
name = "gain-0.5"

[[codecs]]
name = "rvq"

[[conditions]]
family = "ambient"
levels_db = {snr}
noise_source = "noise.wav"

[[conditions]]
family = "white"
levels_db = {snr}

[[conditions]]
family = "reverb"
levels_db = {drr}
noise_source = "rir.wav"

[rvq]
frame_size = 16
stages = 5
entries = 32
seed = 7

[linearity]
pairs = 5

[freqresp]
probe_count = 64
"#
    )
}

/// Writes the corpus, manifest, noise assets and `smoke.toml` into `dir`
/// and returns the config path.
pub fn write_smoke_corpus(dir: impl AsRef<Path>) -> Result<PathBuf, HarnessError> {
    let dir = dir.as_ref();
    let wav_dir = dir.join("wav");
    std::fs::create_dir_all(&wav_dir).map_err(|e| HarnessError::io(&wav_dir, e))?;
    let mut manifest = String::from("utterance_id,wav_path,transcript\n");
    for i in 0..SMOKE_UTTERANCES {
        let (w, text) = smoke_utterance(1, i);
        let id = format!("smoke-{:02}", i + 1);
        write_wav(&w, wav_dir.join(format!("{id}.wav")), WavEncoding::Pcm16)?;
        manifest.push_str(&format!("{id},wav/{id}.wav,{text}\n"));
    }
    let write = |name: &str, text: &str| {
        let p = dir.join(name);
        std::fs::write(&p, text).map_err(|e| HarnessError::io(&p, e))
    };
    write("manifest.csv", &manifest)?;
    write_wav(&ambient_noise(4.0, SMOKE_RATE, 11), dir.join("noise.wav"), WavEncoding::Float32)?;
    write_wav(&synthetic_rir(SMOKE_RATE, 0.4, 13), dir.join("rir.wav"), WavEncoding::Float32)?;
    write(SMOKE_CONFIG, &config_text())?;
    Ok(dir.join(SMOKE_CONFIG))
}
