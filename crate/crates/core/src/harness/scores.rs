//! Joins externally produced transcripts, trial scores and labels onto the
//! grid as corpus-level rows.

use std::collections::BTreeMap;

use super::config::{ExperimentConfig, ExternalScores};
use super::manifest::Dataset;
use crate::metrics::files::{read_labels, read_scores, read_transcripts};
use crate::metrics::{accuracy, eer, wer, MetricError, TranscriptPair};

/// Lowercases, turns everything except letters, digits and apostrophes
/// into spaces, and splits on whitespace.
pub fn normalize_text(text: &str) -> Vec<String> {
    text.chars()
        .map(|c| if c.is_alphanumeric() || c == '\'' { c } else { ' ' })
        .collect::<String>()
        .to_lowercase()
        .split_whitespace()
        .map(str::to_owned)
        .collect()
}

/// Corpus WER for the hypotheses in `path`, against manifest transcripts.
/// Utterances missing from either side are left out, with a warning.
pub(crate) fn join_wer(dataset: &Dataset, path: &std::path::Path) -> Result<f64, MetricError> {
    let hyps: BTreeMap<String, String> = read_transcripts(path)?.into_iter().collect();
    let mut pairs = Vec::new();
    for u in &dataset.utterances {
        match (&u.transcript, hyps.get(&u.id)) {
            (Some(r), Some(h)) => pairs.push(TranscriptPair {
                utterance_id: u.id.clone(),
                reference: normalize_text(r),
                hypothesis: normalize_text(h),
            }),
            (Some(_), None) => log::warn!("{}: no hypothesis for {}", path.display(), u.id),
            _ => {}
        }
    }
    if pairs.is_empty() {
        return Err(MetricError::IdMismatch(format!(
            "{}: no utterance has both a reference and a hypothesis",
            path.display()
        )));
    }
    wer(&pairs)
}

/// `(metric, result)` for every file named by one external-scores entry.
pub(crate) fn score_entry(
    cfg: &ExperimentConfig,
    dataset: &Dataset,
    entry: &ExternalScores,
) -> Vec<(&'static str, Result<f64, MetricError>)> {
    let mut out = Vec::new();
    if let Some(p) = &entry.transcripts {
        out.push(("wer", join_wer(dataset, p)));
    }
    if let Some(p) = &entry.scores {
        out.push(("eer", read_scores(p).and_then(|s| eer(&s))));
    }
    if let Some(p) = &entry.labels {
        let result = match &cfg.reference_labels {
            None => Err(MetricError::InvalidConfig("reference_labels not configured".into())),
            Some(r) => read_labels(r).and_then(|r| read_labels(p).and_then(|h| accuracy(&r, &h))),
        };
        out.push(("acc", result));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalisation() {
        assert_eq!(normalize_text("Hello, World!  it's  OK."), ["hello", "world", "it's", "ok"]);
        assert!(normalize_text(" ... ").is_empty());
    }
}
