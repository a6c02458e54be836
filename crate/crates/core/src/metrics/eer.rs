use serde::{Deserialize, Serialize};

use super::MetricError;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TrialLabel {
    Genuine,
    Impostor,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub trial_id: String,
    pub score: f64,
    pub label: TrialLabel,
}

/// Equal error rate in percent.
///
/// Thresholds run over the sorted distinct scores. At threshold `t` an
/// impostor is falsely accepted when its score is `>= t` and a genuine
/// trial falsely rejected when its score is `< t`. The result is the rate
/// where the two curves meet, linearly interpolated between the adjacent
/// thresholds that bracket a sign change of `FAR - FRR`.
pub fn eer(scores: &[ScoreRecord]) -> Result<f64, MetricError> {
    if let Some(bad) = scores.iter().find(|s| !s.score.is_finite()) {
        return Err(MetricError::NonFiniteScore(bad.trial_id.clone()));
    }
    let mut genuine: Vec<f64> = Vec::new();
    let mut impostor: Vec<f64> = Vec::new();
    for s in scores {
        match s.label {
            TrialLabel::Genuine => genuine.push(s.score),
            TrialLabel::Impostor => impostor.push(s.score),
        }
    }
    if genuine.is_empty() || impostor.is_empty() {
        return Err(MetricError::MissingClass);
    }
    genuine.sort_by(f64::total_cmp);
    impostor.sort_by(f64::total_cmp);
    let mut thresholds: Vec<f64> = genuine.iter().chain(&impostor).copied().collect();
    thresholds.sort_by(f64::total_cmp);
    thresholds.dedup();

    let (ng, ni) = (genuine.len() as f64, impostor.len() as f64);
    // Sorted inputs: both counts are partition points.
    let rates = |t: f64| {
        let rejected = genuine.partition_point(|&g| g < t) as f64;
        let accepted = impostor.len() - impostor.partition_point(|&i| i < t);
        (accepted as f64 / ni, rejected / ng)
    };

    let mut prev = (1.0, 0.0);
    let points = thresholds.iter().map(|&t| rates(t)).chain(std::iter::once((0.0, 1.0)));
    for (far, frr) in points {
        let d = far - frr;
        if d == 0.0 {
            return Ok(100.0 * far);
        }
        if d < 0.0 {
            let dp = prev.0 - prev.1;
            let lambda = dp / (dp - d);
            return Ok(100.0 * (prev.0 + lambda * (far - prev.0)));
        }
        prev = (far, frr);
    }
    unreachable!("the +inf threshold always has FAR < FRR")
}
