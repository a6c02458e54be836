use std::sync::Arc;

use super::config::{ExperimentConfig, ResolvedCodec};
use super::manifest::{load_manifest, Dataset};
use super::HarnessError;
use crate::audio::resample;
use crate::rvq::{train, Model};
use crate::{RvqModel, Waveform};

/// Everything a run needs, resolved once: the dataset subset, the trained
/// or loaded RVQ model and the instantiated codecs.
#[derive(Clone, Debug)]
pub struct Session {
    pub config: ExperimentConfig,
    pub dataset: Dataset,
    pub rvq: Option<Arc<RvqModel>>,
    pub codecs: Vec<ResolvedCodec>,
}

impl Session {
    pub fn new(config: ExperimentConfig) -> Result<Self, HarnessError> {
        config.validate()?;
        let full = load_manifest(&config.dataset_manifest)?;
        let dataset = match config.utterance_limit {
            Some(n) => full.subset(n, config.seed),
            None => full,
        };
        let rvq = prepare_rvq(&config)?.map(Arc::new);
        let codecs = config.build_codecs(rvq.clone())?;
        Ok(Self {
            config,
            dataset,
            rvq,
            codecs,
        })
    }

    /// Every utterance, loaded in manifest order.
    pub fn load_audio(&self) -> Result<Vec<Waveform>, HarnessError> {
        self.dataset.utterances.iter().map(|u| u.load()).collect()
    }
}

/// Loads the configured model, or trains one on the training manifest
/// (the dataset manifest when none is given) resampled to the metric rate.
pub fn prepare_rvq(config: &ExperimentConfig) -> Result<Option<RvqModel>, HarnessError> {
    let Some(settings) = &config.rvq else {
        return Ok(None);
    };
    if let Some(path) = &settings.model {
        return Ok(Some(Model::load(path)?));
    }
    let manifest = settings.train_manifest.as_ref().unwrap_or(&config.dataset_manifest);
    let corpus = load_manifest(manifest)?
        .utterances
        .iter()
        .map(|u| Ok(resample(&u.load()?, config.metric_rate)?))
        .collect::<Result<Vec<Waveform>, HarnessError>>()?;
    let model = train(&corpus, &settings.train_config())?;
    log::info!("trained rvq model {} on {} utterances", model.id(), corpus.len());
    Ok(Some(model))
}
