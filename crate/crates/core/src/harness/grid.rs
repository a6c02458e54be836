use std::collections::BTreeMap;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::scores::score_entry;
use super::session::Session;
use super::HarnessError;
use crate::audio::{align, read_wav, resample};
use crate::codec::CodecKind;
use crate::metrics::{mel_distance_with, MelAnalyzer};
use crate::perturb::rng::{derive_seed, hash_str};
use crate::perturb::{degrade, Condition, NoiseAsset, NoiseFamily, Rir};
use crate::Waveform;

/// Codec column of the unencoded topline rows.
pub const ORACLE_CODEC: &str = "oracle";
pub const ORACLE_MODE: &str = "-";
/// Utterance column of corpus-level rows (WER, EER, accuracy).
pub const CORPUS_ID: &str = "*";

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RowStatus {
    Ok,
    CodecError,
    Skipped,
}

impl RowStatus {
    pub fn as_str(self) -> &'static str {
        match self {
            RowStatus::Ok => "ok",
            RowStatus::CodecError => "codec_error",
            RowStatus::Skipped => "skipped",
        }
    }
}

/// One (utterance, codec, mode, condition) cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub utterance_id: String,
    pub codec: String,
    pub mode: String,
    pub family: NoiseFamily,
    pub level_db: Option<f64>,
    pub metrics: BTreeMap<String, f64>,
    pub status: RowStatus,
    /// Error class for non-ok rows.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
}

impl MetricReport {
    fn new(utterance_id: &str, codec: &str, mode: &str, cond: &Condition) -> Self {
        Self {
            utterance_id: utterance_id.to_string(),
            codec: codec.to_string(),
            mode: mode.to_string(),
            family: cond.family,
            level_db: cond.level_db,
            metrics: BTreeMap::new(),
            status: RowStatus::Ok,
            error: None,
            message: None,
        }
    }

    fn ok(mut self, metric: &str, value: f64) -> Self {
        self.metrics.insert(metric.to_string(), value);
        self
    }

    fn failed(mut self, status: RowStatus, class: &str, message: impl ToString) -> Self {
        self.status = status;
        self.error = Some(class.to_string());
        self.message = Some(message.to_string());
        self
    }

    pub fn condition_label(&self) -> String {
        match self.level_db {
            Some(l) => format!("{}:{}", self.family, l),
            None => self.family.to_string(),
        }
    }

    fn sort_key(&self) -> (&str, &str, &str, NoiseFamily, Option<i64>) {
        // Same ordering as f64::total_cmp; clean (no level) sorts first.
        let level = self.level_db.map(|l| {
            let b = l.to_bits() as i64;
            b ^ (((b >> 63) as u64) >> 1) as i64
        });
        (&self.utterance_id, &self.codec, &self.mode, self.family, level)
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct GridRun {
    /// Sorted by utterance, codec, mode, family, level.
    pub reports: Vec<MetricReport>,
    /// (codec, mode) pairs whose repeated runs disagreed.
    pub nondeterministic: Vec<(String, String)>,
}

impl GridRun {
    pub fn error_count(&self) -> usize {
        self.reports.iter().filter(|r| r.status != RowStatus::Ok).count()
    }
}

pub const MEL_METRIC: &str = "mel_distance";

fn load_assets(conditions: &[Condition]) -> Result<BTreeMap<String, NoiseAsset<f64>>, HarnessError> {
    let mut assets = BTreeMap::new();
    for c in conditions {
        let Some(src) = &c.noise_source else { continue };
        if assets.contains_key(src) {
            continue;
        }
        let w: Waveform = read_wav(PathBuf::from(src)).map_err(|e| HarnessError::ConfigInvalid(format!("{src}: {e}")))?;
        let asset = match c.family {
            NoiseFamily::Reverb => NoiseAsset::Rir(Rir::from_signal(&w)?),
            _ => NoiseAsset::Noise(w),
        };
        assets.insert(src.clone(), asset);
    }
    Ok(assets)
}

fn asset_at_rate(asset: &NoiseAsset<f64>, rate: u32) -> Result<NoiseAsset<f64>, HarnessError> {
    Ok(match asset {
        NoiseAsset::Noise(w) => NoiseAsset::Noise(resample(w, rate)?),
        NoiseAsset::Rir(r) => {
            let w = Waveform::new(r.taps().to_vec(), r.sample_rate())?;
            NoiseAsset::Rir(Rir::from_signal(&resample(&w, rate)?)?)
        }
    })
}

/// Per-utterance noise seed: independent across utterances and
/// conditions, fixed for a given configuration.
pub(crate) fn noise_seed(seed: u64, utterance_id: &str, cond: &Condition) -> u64 {
    derive_seed(derive_seed(seed, cond.seed), hash_str(&format!("{utterance_id}|{}", cond.label())))
}

/// Runs every (utterance, condition) through every (codec, mode), plus
/// the unencoded topline, scoring against the clean utterance.
pub fn run_grid(session: &Session) -> Result<GridRun, HarnessError> {
    let cfg = &session.config;
    let conditions = cfg.conditions();
    let assets = load_assets(&conditions)?;
    let analyzer = MelAnalyzer::<f64>::new(&cfg.mel, cfg.metric_rate)?;
    let audio = session.load_audio()?;
    let pool = cfg.thread_pool()?;

    let mut rates: Vec<u32> = audio.iter().map(Waveform::sample_rate).collect();
    rates.sort_unstable();
    rates.dedup();
    let mut rated_assets = BTreeMap::new();
    for (src, asset) in &assets {
        for &rate in &rates {
            rated_assets.insert((src.clone(), rate), asset_at_rate(asset, rate)?);
        }
    }

    let score = |reference: &Waveform, test: &Waveform| -> Result<f64, String> {
        let al = align(reference, test, cfg.align_max_lag).map_err(|e| e.to_string())?;
        mel_distance_with(&analyzer, &al.reference, &al.test).map_err(|e| e.to_string())
    };

    let jobs: Vec<(usize, usize)> = (0..audio.len())
        .flat_map(|u| (0..conditions.len()).map(move |c| (u, c)))
        .collect();
    let mut reports: Vec<MetricReport> = pool.install(|| {
        jobs.par_iter()
            .map(|&(ui, ci)| -> Result<Vec<MetricReport>, HarnessError> {
                let utt = &session.dataset.utterances[ui];
                let cond = &conditions[ci];
                let speech = &audio[ui];
                let clean = resample(speech, cfg.metric_rate)?;
                let asset = cond
                    .noise_source
                    .as_ref()
                    .map(|s| &rated_assets[&(s.clone(), speech.sample_rate())]);
                let seed = noise_seed(cfg.seed, &utt.id, cond);
                let mut rows = Vec::new();
                let degraded = match degrade(speech, cond, asset, cfg.direct_window, seed) {
                    Ok(d) => d,
                    Err(e) => {
                        let skip = |codec: &str, mode: &str| {
                            MetricReport::new(&utt.id, codec, mode, cond).failed(RowStatus::Skipped, "PerturbError", &e)
                        };
                        rows.push(skip(ORACLE_CODEC, ORACLE_MODE));
                        for c in &session.codecs {
                            for m in &c.modes {
                                rows.push(skip(c.codec.name(), m));
                            }
                        }
                        return Ok(rows);
                    }
                };

                let oracle = MetricReport::new(&utt.id, ORACLE_CODEC, ORACLE_MODE, cond);
                rows.push(match score(&clean, &resample(&degraded, cfg.metric_rate)?) {
                    Ok(v) => oracle.ok(MEL_METRIC, v),
                    Err(msg) => oracle.failed(RowStatus::Skipped, "MetricError", msg),
                });

                for c in &session.codecs {
                    let input = resample(&degraded, c.codec.native_rate())?;
                    for mode in &c.modes {
                        let row = MetricReport::new(&utt.id, c.codec.name(), mode, cond);
                        let output = match c.codec.process(&input, mode) {
                            Ok(o) => o,
                            Err(e) => {
                                log::warn!("{} {} {} {}: {e}", utt.id, c.codec.name(), mode, cond);
                                rows.push(row.failed(RowStatus::CodecError, e.class(), e));
                                continue;
                            }
                        };
                        rows.push(match score(&clean, &resample(&output, cfg.metric_rate)?) {
                            Ok(v) => row.ok(MEL_METRIC, v),
                            Err(msg) => row.failed(RowStatus::Skipped, "MetricError", msg),
                        });
                    }
                }
                Ok(rows)
            })
            .collect::<Result<Vec<_>, _>>()
    })?
    .into_iter()
    .flatten()
    .collect();

    for entry in &cfg.external_scores {
        let (codec, mode) = resolve_cell(session, entry)?;
        let cond = conditions
            .iter()
            .find(|c| c.label() == entry.condition)
            .ok_or_else(|| HarnessError::ConfigInvalid(format!("external scores: unknown condition {}", entry.condition)))?;
        for (metric, result) in score_entry(cfg, &session.dataset, entry) {
            let row = MetricReport::new(CORPUS_ID, &codec, &mode, cond);
            reports.push(match result {
                Ok(v) => row.ok(metric, v),
                Err(e) => row.failed(RowStatus::Skipped, "MetricError", e),
            });
        }
    }

    reports.sort_by(|a, b| a.sort_key().cmp(&b.sort_key()));
    let nondeterministic = pool.install(|| repeatability(session, &audio))?;
    Ok(GridRun {
        reports,
        nondeterministic,
    })
}

fn resolve_cell(session: &Session, entry: &super::config::ExternalScores) -> Result<(String, String), HarnessError> {
    if entry.codec == ORACLE_CODEC {
        return Ok((ORACLE_CODEC.into(), ORACLE_MODE.into()));
    }
    let c = session
        .codecs
        .iter()
        .find(|c| c.codec.name() == entry.codec)
        .ok_or_else(|| HarnessError::ConfigInvalid(format!("external scores: unknown codec {}", entry.codec)))?;
    match (&entry.mode, c.modes.as_slice()) {
        (Some(m), modes) if modes.contains(m) => Ok((entry.codec.clone(), m.clone())),
        (None, [only]) => Ok((entry.codec.clone(), only.clone())),
        _ => Err(HarnessError::ConfigInvalid(format!(
            "external scores for {}: mode missing or not selected",
            entry.codec
        ))),
    }
}

/// Runs each external (codec, mode) twice on the first utterance and
/// reports the pairs whose outputs differ.
fn repeatability(session: &Session, audio: &[Waveform]) -> Result<Vec<(String, String)>, HarnessError> {
    let Some(first) = audio.first() else {
        return Ok(Vec::new());
    };
    let mut flagged = Vec::new();
    for c in session.codecs.iter().filter(|c| c.codec.descriptor().kind == CodecKind::External) {
        let input = resample(first, c.codec.native_rate())?;
        for mode in &c.modes {
            match c.codec.is_repeatable(&input, mode) {
                Ok(true) => {}
                Ok(false) => {
                    log::warn!("{} mode {mode} is not deterministic", c.codec.name());
                    flagged.push((c.codec.name().to_string(), mode.clone()));
                }
                // Already reported per row.
                Err(_) => {}
            }
        }
    }
    Ok(flagged)
}
