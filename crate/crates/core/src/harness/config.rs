use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::analysis::{ProbeSettings, DEFAULT_GAINS_DB, DEFAULT_PROBE_AMPLITUDES, DEFAULT_PROBE_COUNT};
use crate::codec::{builtin_codec, BitrateMode, CodecDescriptor, CodecKind, CodecUnderTest, ExternalCodec, ProcessLimiter};
use crate::metrics::MelConfig;
use crate::perturb::{Condition, NoiseFamily, DEFAULT_DIRECT_WINDOW};
use crate::rvq::TrainConfig;
use crate::RvqModel;

pub const DEFAULT_METRIC_RATE: u32 = 16000;
pub const DEFAULT_ALIGN_MAX_LAG: f64 = 0.1;

fn default_metric_rate() -> u32 {
    DEFAULT_METRIC_RATE
}
fn default_align_max_lag() -> f64 {
    DEFAULT_ALIGN_MAX_LAG
}
fn default_direct_window() -> f64 {
    DEFAULT_DIRECT_WINDOW
}
fn default_max_processes() -> usize {
    4
}
fn default_timeout() -> f64 {
    600.0
}

/// A codec entry. Builtins need only a name; externals carry a full
/// descriptor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CodecSpec {
    pub name: String,
    #[serde(default = "builtin_kind")]
    pub kind: CodecKind,
    /// Builtins default to the metric rate.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub native_rate: Option<u32>,
    /// Subset of modes to run; all declared modes when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub modes: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub command_template: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub bitrate_modes: Vec<BitrateMode>,
    #[serde(default = "default_timeout")]
    pub timeout: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub frame_size: Option<usize>,
}

fn builtin_kind() -> CodecKind {
    CodecKind::Builtin
}

/// Condition family with one or more levels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionSpec {
    pub family: NoiseFamily,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub levels_db: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub noise_source: Option<PathBuf>,
    #[serde(default)]
    pub seed: u64,
}

impl ConditionSpec {
    pub fn expand(&self) -> Vec<Condition> {
        let source = self.noise_source.as_ref().map(|p| p.to_string_lossy().into_owned());
        if self.family == NoiseFamily::Clean {
            return vec![Condition::clean()];
        }
        self.levels_db
            .iter()
            .map(|&l| Condition {
                family: self.family,
                level_db: Some(l),
                noise_source: source.clone(),
                seed: self.seed,
            })
            .collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RvqSettings {
    pub frame_size: usize,
    pub stages: usize,
    pub entries: usize,
    #[serde(default)]
    pub seed: u64,
    /// Load a saved model instead of training.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<PathBuf>,
    /// Training manifest; the dataset manifest when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_manifest: Option<PathBuf>,
}

impl RvqSettings {
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            frame_size: self.frame_size,
            stages: self.stages,
            entries: self.entries,
            seed: self.seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LinearitySettings {
    /// Number of disjoint utterance pairs for additivity.
    pub pairs: usize,
    pub gains_db: Vec<f64>,
}

impl Default for LinearitySettings {
    fn default() -> Self {
        Self {
            pairs: 5,
            gains_db: DEFAULT_GAINS_DB.to_vec(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FreqRespSettings {
    pub probe_count: usize,
    /// Explicit probe frequencies; overrides `probe_count`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub freqs: Option<Vec<f64>>,
    pub amplitudes: Vec<f64>,
    pub duration: f64,
    pub fade: f64,
    pub discard: f64,
}

impl Default for FreqRespSettings {
    fn default() -> Self {
        let p = ProbeSettings::default();
        Self {
            probe_count: DEFAULT_PROBE_COUNT,
            freqs: None,
            amplitudes: DEFAULT_PROBE_AMPLITUDES.to_vec(),
            duration: p.duration,
            fade: p.fade,
            discard: p.discard,
        }
    }
}

impl FreqRespSettings {
    pub fn probe(&self, amplitude: f64) -> ProbeSettings {
        ProbeSettings {
            duration: self.duration,
            amplitude,
            fade: self.fade,
            discard: self.discard,
            phase: 0.0,
        }
    }
}

/// Downstream-system outputs for one (codec, mode, condition) cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExternalScores {
    pub codec: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<String>,
    /// Condition label such as `clean` or `white:-5`.
    pub condition: String,
    /// Hypothesis transcripts (`id<TAB>text`); references come from the manifest.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transcripts: Option<PathBuf>,
    /// Verification trials (`trial_id,score,label`).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores: Option<PathBuf>,
    /// Predicted labels (`id,label`), scored against `reference_labels`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub labels: Option<PathBuf>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub dataset_manifest: PathBuf,
    pub codecs: Vec<CodecSpec>,
    #[serde(default)]
    pub conditions: Vec<ConditionSpec>,
    #[serde(default = "default_metric_rate")]
    pub metric_rate: u32,
    #[serde(default)]
    pub mel: MelConfig,
    #[serde(default = "default_align_max_lag")]
    pub align_max_lag: f64,
    #[serde(default)]
    pub seed: u64,
    /// Worker threads; 0 uses every core.
    #[serde(default)]
    pub parallelism: usize,
    /// Concurrent external codec processes.
    #[serde(default = "default_max_processes")]
    pub max_processes: usize,
    /// Seeded subset size; the whole manifest when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub utterance_limit: Option<usize>,
    /// Half-width of the direct-path region for DRR, seconds.
    #[serde(default = "default_direct_window")]
    pub direct_window: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rvq: Option<RvqSettings>,
    #[serde(default)]
    pub linearity: LinearitySettings,
    #[serde(default)]
    pub freqresp: FreqRespSettings,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub external_scores: Vec<ExternalScores>,
    /// Reference labels (`id,label`) for accuracy.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_labels: Option<PathBuf>,
}

/// A codec ready to run with the modes selected for it.
#[derive(Clone, Debug)]
pub struct ResolvedCodec {
    pub codec: CodecUnderTest,
    pub modes: Vec<String>,
}

impl ExperimentConfig {
    /// Parses TOML or JSON by extension and resolves relative paths
    /// against the config file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self, HarnessError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| HarnessError::ConfigInvalid(format!("{}: {e}", path.display())))?;
        let mut cfg = match path.extension().and_then(|e| e.to_str()) {
            Some("json") => Self::from_json(&text)?,
            Some("toml") => Self::from_toml(&text)?,
            _ => {
                return Err(HarnessError::ConfigInvalid(format!(
                    "{}: expected a .toml or .json file",
                    path.display()
                )))
            }
        };
        let base = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        let base = base.canonicalize().unwrap_or_else(|_| base.to_path_buf());
        cfg.resolve_paths(&base);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_toml(text: &str) -> Result<Self, HarnessError> {
        toml::from_str(text).map_err(|e| HarnessError::ConfigInvalid(e.to_string()))
    }

    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        serde_json::from_str(text).map_err(|e| HarnessError::ConfigInvalid(e.to_string()))
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.dataset_manifest);
        for c in &mut self.conditions {
            if let Some(p) = c.noise_source.as_mut() {
                fix(p);
            }
        }
        if let Some(r) = self.rvq.as_mut() {
            r.model.as_mut().map(fix);
            r.train_manifest.as_mut().map(fix);
        }
        for s in &mut self.external_scores {
            s.transcripts.as_mut().map(fix);
            s.scores.as_mut().map(fix);
            s.labels.as_mut().map(fix);
        }
        self.reference_labels.as_mut().map(fix);
    }

    /// Fails fast on anything that would otherwise surface mid-run.
    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: String| Err(HarnessError::ConfigInvalid(m));
        if self.codecs.is_empty() {
            return bad("at least one codec required".into());
        }
        if self.metric_rate == 0 {
            return bad("metric_rate must be positive".into());
        }
        if !(self.align_max_lag >= 0.0 && self.align_max_lag.is_finite()) {
            return bad(format!("align_max_lag {}", self.align_max_lag));
        }
        if !(self.direct_window >= 0.0) {
            return bad(format!("direct_window {}", self.direct_window));
        }
        self.mel.validate().map_err(|e| HarnessError::ConfigInvalid(e.to_string()))?;
        let mut names = std::collections::BTreeSet::new();
        for c in &self.codecs {
            if !names.insert(c.name.as_str()) {
                return bad(format!("codec {} listed twice", c.name));
            }
            if c.name == super::ORACLE_CODEC {
                return bad(format!("codec name {} is reserved", c.name));
            }
        }
        for c in self.conditions() {
            c.validate().map_err(|e| HarnessError::ConfigInvalid(e.to_string()))?;
        }
        for spec in &self.conditions {
            if spec.family != NoiseFamily::Clean && spec.levels_db.is_empty() {
                return bad(format!("{} condition without levels_db", spec.family));
            }
        }
        if self.codecs.iter().any(|c| c.name == "rvq") && self.rvq.is_none() {
            return bad("codec rvq needs an [rvq] section".into());
        }
        if self.freqresp.amplitudes.iter().any(|&a| !(a > 0.0)) {
            return bad("probe amplitudes must be positive".into());
        }
        for g in &self.linearity.gains_db {
            if !g.is_finite() {
                return bad(format!("gain {g} dB"));
            }
        }
        Ok(())
    }

    /// Expanded condition list, always starting with `clean`.
    pub fn conditions(&self) -> Vec<Condition> {
        let mut out = vec![Condition::clean()];
        for spec in &self.conditions {
            for c in spec.expand() {
                if !out.contains(&c) {
                    out.push(c);
                }
            }
        }
        out
    }

    /// Instantiates every codec. `rvq` must be provided when the config
    /// lists the rvq codec.
    pub fn build_codecs(&self, rvq: Option<Arc<RvqModel>>) -> Result<Vec<ResolvedCodec>, HarnessError> {
        let limiter = Arc::new(ProcessLimiter::new(self.max_processes));
        self.codecs
            .iter()
            .map(|spec| {
                let codec = match spec.kind {
                    CodecKind::Builtin => {
                        builtin_codec(&spec.name, spec.native_rate.unwrap_or(self.metric_rate), rvq.clone())?
                    }
                    CodecKind::External => {
                        let desc = CodecDescriptor {
                            name: spec.name.clone(),
                            kind: CodecKind::External,
                            native_rate: spec.native_rate.ok_or_else(|| {
                                HarnessError::ConfigInvalid(format!("{}: native_rate required", spec.name))
                            })?,
                            bitrate_modes: if spec.bitrate_modes.is_empty() {
                                vec![BitrateMode {
                                    mode_id: "default".into(),
                                    bits_per_second: 0.0,
                                }]
                            } else {
                                spec.bitrate_modes.clone()
                            },
                            command_template: spec.command_template.clone(),
                            timeout: spec.timeout,
                            frame_size: spec.frame_size,
                        };
                        CodecUnderTest::new(ExternalCodec::new(desc, Some(limiter.clone()))?)
                    }
                };
                let declared: Vec<String> = codec.descriptor().mode_ids().map(str::to_owned).collect();
                let modes = match &spec.modes {
                    None => declared,
                    Some(m) => {
                        if let Some(bad) = m.iter().find(|m| !declared.contains(m)) {
                            return Err(HarnessError::ConfigInvalid(format!(
                                "{}: unknown mode {bad}",
                                spec.name
                            )));
                        }
                        m.clone()
                    }
                };
                Ok(ResolvedCodec { codec, modes })
            })
            .collect()
    }

    /// Mode bitrates for every configured codec, for plot files.
    pub fn bitrates(codecs: &[ResolvedCodec]) -> BTreeMap<(String, String), f64> {
        codecs
            .iter()
            .flat_map(|c| {
                c.codec
                    .descriptor()
                    .bitrate_modes
                    .iter()
                    .map(|m| ((c.codec.name().to_string(), m.mode_id.clone()), m.bits_per_second))
                    .collect::<Vec<_>>()
            })
            .collect()
    }

    /// Thread pool honouring `parallelism`.
    pub fn thread_pool(&self) -> Result<rayon::ThreadPool, HarnessError> {
        rayon::ThreadPoolBuilder::new()
            .num_threads(self.parallelism)
            .build()
            .map_err(|e| HarnessError::ConfigInvalid(format!("thread pool: {e}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const TOML: &str = r#"
dataset_manifest = "data/manifest.csv"
seed = 3

[[codecs]]
name = "identity"

[[codecs]]
name = "copy"
kind = "external"
native_rate = 24000
command_template = "cp {input} {output}"
bitrate_modes = [{ mode_id = "k1", bits_per_second = 750.0 }, { mode_id = "k2", bits_per_second = 1500.0 }]
modes = ["k2"]

[[conditions]]
family = "white"
levels_db = [-10, 0, 10]

[[conditions]]
family = "reverb"
noise_source = "rir.wav"
levels_db = [0]
"#;

    #[test]
    fn toml_and_json_agree() {
        let a = ExperimentConfig::from_toml(TOML).unwrap();
        let b = ExperimentConfig::from_json(&serde_json::to_string(&a).unwrap()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.metric_rate, 16000);
        assert_eq!(a.align_max_lag, 0.1);
        assert_eq!(a.linearity.gains_db, DEFAULT_GAINS_DB.to_vec());
    }

    #[test]
    fn conditions_expand_with_clean_first() {
        let cfg = ExperimentConfig::from_toml(TOML).unwrap();
        let labels: Vec<String> = cfg.conditions().iter().map(Condition::label).collect();
        assert_eq!(labels, ["clean", "white:-10", "white:0", "white:10", "reverb:0"]);
    }

    #[test]
    fn paths_resolve_against_config_dir() {
        let mut cfg = ExperimentConfig::from_toml(TOML).unwrap();
        cfg.resolve_paths(Path::new("/exp"));
        assert_eq!(cfg.dataset_manifest, PathBuf::from("/exp/data/manifest.csv"));
        assert_eq!(cfg.conditions[1].noise_source.as_deref(), Some(Path::new("/exp/rir.wav")));
    }

    #[test]
    fn builds_codecs_with_mode_selection() {
        let cfg = ExperimentConfig::from_toml(TOML).unwrap();
        let codecs = cfg.build_codecs(None).unwrap();
        assert_eq!(codecs[0].codec.native_rate(), 16000);
        assert_eq!(codecs[0].modes, ["default"]);
        assert_eq!(codecs[1].codec.native_rate(), 24000);
        assert_eq!(codecs[1].modes, ["k2"]);
    }

    #[test]
    fn validation_failures() {
        let mut cfg = ExperimentConfig::from_toml(TOML).unwrap();
        cfg.validate().unwrap();
        cfg.codecs.clear();
        assert!(cfg.validate().is_err());

        let mut cfg = ExperimentConfig::from_toml(TOML).unwrap();
        cfg.conditions[0].levels_db.clear();
        assert!(cfg.validate().is_err());

        let mut cfg = ExperimentConfig::from_toml(TOML).unwrap();
        cfg.conditions[1].noise_source = None;
        assert!(cfg.validate().is_err());

        let mut cfg = ExperimentConfig::from_toml(TOML).unwrap();
        cfg.codecs[1].modes = Some(vec!["k9".into()]);
        assert!(cfg.build_codecs(None).is_err());

        let mut cfg = ExperimentConfig::from_toml(TOML).unwrap();
        cfg.codecs.push(cfg.codecs[0].clone());
        assert!(cfg.validate().is_err());

        assert!(ExperimentConfig::from_toml("codecs = 3").is_err());
    }
}
