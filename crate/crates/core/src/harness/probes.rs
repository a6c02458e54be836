use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::session::Session;
use super::HarnessError;
use crate::analysis::{
    additivity_probe, default_probe_freqs, frequency_response, homogeneity_probe, AnalysisError,
    FrequencyResponseCurve, GainLevel, LinearityReport,
};
use crate::audio::resample;
use crate::perturb::rng::{derive_seed, hash_str, CounterRng};
use crate::Waveform;

/// A (codec, mode) whose analysis could not complete.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunFailure {
    pub codec: String,
    pub mode: String,
    pub class: String,
    pub message: String,
}

impl RunFailure {
    fn new(codec: &str, mode: &str, err: &AnalysisError) -> Self {
        log::warn!("{codec} {mode}: {err}");
        Self {
            codec: codec.to_string(),
            mode: mode.to_string(),
            class: err.class().to_string(),
            message: err.to_string(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LinearityRun {
    pub reports: Vec<LinearityReport>,
    pub failures: Vec<RunFailure>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct FreqRespRun {
    pub curves: Vec<FrequencyResponseCurve>,
    pub failures: Vec<RunFailure>,
}

/// Seeded disjoint pairs: a shuffle of the utterance indices, taken two at
/// a time.
pub(crate) fn draw_pairs(n: usize, count: usize, seed: u64) -> Vec<(usize, usize)> {
    let mut idx: Vec<usize> = (0..n).collect();
    let mut rng = CounterRng::new(derive_seed(seed, hash_str("additivity-pairs")));
    for i in (1..n).rev() {
        idx.swap(i, rng.below(i + 1));
    }
    idx.chunks_exact(2).take(count).map(|p| (p[0], p[1])).collect()
}

/// Additivity and homogeneity for every configured (codec, mode).
pub fn run_linearity(session: &Session) -> Result<LinearityRun, HarnessError> {
    let cfg = &session.config;
    let audio = session.load_audio()?;
    let pairs = draw_pairs(audio.len(), cfg.linearity.pairs, cfg.seed);
    let gains = cfg
        .linearity
        .gains_db
        .iter()
        .map(|&g| GainLevel::from_db(g))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| HarnessError::ConfigInvalid(e.to_string()))?;
    let pool = cfg.thread_pool()?;
    let mut run = LinearityRun::default();
    pool.install(|| -> Result<(), HarnessError> {
        for c in &session.codecs {
            let rate = c.codec.native_rate();
            let native: Vec<Waveform> = audio
                .par_iter()
                .map(|w| resample(w, rate))
                .collect::<Result<_, _>>()?;
            let pair_audio: Vec<(Waveform, Waveform)> =
                pairs.iter().map(|&(a, b)| (native[a].clone(), native[b].clone())).collect();
            for mode in &c.modes {
                let result = additivity_probe(&c.codec, mode, &pair_audio, &cfg.mel).and_then(|add| {
                    let hom = homogeneity_probe(&c.codec, mode, &native, &gains, &cfg.mel)?;
                    Ok((add, hom))
                });
                match result {
                    Ok((add, hom)) => run.reports.push(LinearityReport {
                        codec: c.codec.name().to_string(),
                        mode: mode.clone(),
                        pair_count: add.distances.len(),
                        additivity: Some(add),
                        homogeneity: hom,
                        utterance_count: native.len(),
                    }),
                    Err(e) => run.failures.push(RunFailure::new(c.codec.name(), mode, &e)),
                }
            }
        }
        Ok(())
    })?;
    Ok(run)
}

/// Stepped-sine response for every (codec, mode, probe amplitude).
pub fn run_frequency_response(session: &Session) -> Result<FreqRespRun, HarnessError> {
    let cfg = &session.config;
    let pool = cfg.thread_pool()?;
    let mut run = FreqRespRun::default();
    pool.install(|| {
        for c in &session.codecs {
            let freqs = match &cfg.freqresp.freqs {
                Some(f) => f.clone(),
                None => default_probe_freqs(c.codec.native_rate(), cfg.freqresp.probe_count),
            };
            for mode in &c.modes {
                for &amplitude in &cfg.freqresp.amplitudes {
                    match frequency_response(&c.codec, mode, &freqs, &cfg.freqresp.probe(amplitude)) {
                        Ok(curve) => run.curves.push(curve),
                        Err(e) => run.failures.push(RunFailure::new(c.codec.name(), mode, &e)),
                    }
                }
            }
        }
    });
    Ok(run)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pairs_are_disjoint_and_seeded() {
        let p = draw_pairs(10, 20, 4);
        assert_eq!(p.len(), 5);
        let mut all: Vec<usize> = p.iter().flat_map(|&(a, b)| [a, b]).collect();
        all.sort_unstable();
        all.dedup();
        assert_eq!(all.len(), 10);
        assert_eq!(p, draw_pairs(10, 20, 4));
        assert_ne!(p, draw_pairs(10, 20, 5));
        assert_eq!(draw_pairs(10, 2, 4), p[..2].to_vec());
        assert!(draw_pairs(1, 3, 0).is_empty());
    }
}
