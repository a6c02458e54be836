use std::fmt;

use serde::{Deserialize, Serialize};

use super::{gen_white_noise, mix_at_snr, reverberate, PerturbError, Rir};
use crate::audio::Signal;
use crate::Real;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NoiseFamily {
    Clean,
    Ambient,
    White,
    Reverb,
}

impl NoiseFamily {
    pub fn as_str(self) -> &'static str {
        match self {
            NoiseFamily::Clean => "clean",
            NoiseFamily::Ambient => "ambient",
            NoiseFamily::White => "white",
            NoiseFamily::Reverb => "reverb",
        }
    }
}

impl fmt::Display for NoiseFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One degradation setting. `level_db` is an SNR for ambient/white noise and
/// a DRR for reverb.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Condition {
    pub family: NoiseFamily,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub level_db: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_source: Option<String>,
    #[serde(default)]
    pub seed: u64,
}

impl Condition {
    pub fn clean() -> Self {
        Self {
            family: NoiseFamily::Clean,
            level_db: None,
            noise_source: None,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), PerturbError> {
        let bad = |m: &str| Err(PerturbError::InvalidCondition(format!("{self}: {m}")));
        match self.family {
            NoiseFamily::Clean if self.level_db.is_some() => bad("clean takes no level"),
            NoiseFamily::Clean => Ok(()),
            _ if !self.level_db.is_some_and(f64::is_finite) => bad("finite level_db required"),
            NoiseFamily::Ambient | NoiseFamily::Reverb if self.noise_source.is_none() => {
                bad("noise_source required")
            }
            _ => Ok(()),
        }
    }

    /// Short key such as `clean` or `white:-5`.
    pub fn label(&self) -> String {
        match self.level_db {
            Some(l) => format!("{}:{}", self.family, l),
            None => self.family.to_string(),
        }
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

/// External material a condition needs.
#[derive(Clone, Debug)]
pub enum NoiseAsset<T> {
    Noise(Signal<T>),
    Rir(Rir<T>),
}

/// Builds the degraded input for one utterance.
///
/// `seed` drives generated noise; callers derive it per utterance so that
/// each item gets an independent draw while staying reproducible.
pub fn degrade<T: Real>(
    speech: &Signal<T>,
    condition: &Condition,
    asset: Option<&NoiseAsset<T>>,
    direct_window: f64,
    seed: u64,
) -> Result<Signal<T>, PerturbError> {
    condition.validate()?;
    let level = condition.level_db.unwrap_or(0.0);
    match (condition.family, asset) {
        (NoiseFamily::Clean, _) => Ok(speech.clone()),
        (NoiseFamily::White, _) => {
            let duration = speech.len().max(1) as f64 / f64::from(speech.sample_rate());
            let noise = gen_white_noise(duration, speech.sample_rate(), seed);
            mix_at_snr(speech, &noise, level)
        }
        (NoiseFamily::Ambient, Some(NoiseAsset::Noise(noise))) => mix_at_snr(speech, noise, level),
        (NoiseFamily::Reverb, Some(NoiseAsset::Rir(rir))) => {
            reverberate(speech, rir, level, direct_window, true)
        }
        (family, _) => Err(PerturbError::InvalidCondition(format!(
            "{family} condition is missing its noise asset"
        ))),
    }
}
