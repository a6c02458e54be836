use serde::{Deserialize, Serialize};

use super::MetricError;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptPair {
    pub utterance_id: String,
    pub reference: Vec<String>,
    pub hypothesis: Vec<String>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EditCounts {
    pub hits: usize,
    pub substitutions: usize,
    pub deletions: usize,
    pub insertions: usize,
}

impl EditCounts {
    pub fn errors(&self) -> usize {
        self.substitutions + self.deletions + self.insertions
    }
}

/// Minimum edit alignment with unit costs. On equal-cost paths the
/// backtrace prefers substitution, then insertion, then deletion.
pub fn edit_counts<S: PartialEq>(reference: &[S], hypothesis: &[S]) -> EditCounts {
    let (n, m) = (reference.len(), hypothesis.len());
    let width = m + 1;
    let mut dp = vec![0usize; (n + 1) * width];
    for (j, d) in dp.iter_mut().take(width).enumerate() {
        *d = j;
    }
    for i in 1..=n {
        dp[i * width] = i;
        for j in 1..=m {
            let sub = dp[(i - 1) * width + j - 1] + usize::from(reference[i - 1] != hypothesis[j - 1]);
            let ins = dp[i * width + j - 1] + 1;
            let del = dp[(i - 1) * width + j] + 1;
            dp[i * width + j] = sub.min(ins).min(del);
        }
    }

    let mut counts = EditCounts::default();
    let (mut i, mut j) = (n, m);
    while i > 0 || j > 0 {
        let here = dp[i * width + j];
        if i > 0 && j > 0 {
            let same = reference[i - 1] == hypothesis[j - 1];
            if here == dp[(i - 1) * width + j - 1] + usize::from(!same) {
                if same {
                    counts.hits += 1;
                } else {
                    counts.substitutions += 1;
                }
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if j > 0 && here == dp[i * width + j - 1] + 1 {
            counts.insertions += 1;
            j -= 1;
        } else {
            counts.deletions += 1;
            i -= 1;
        }
    }
    counts
}

/// Corpus-level word error rate in percent.
pub fn wer(pairs: &[TranscriptPair]) -> Result<f64, MetricError> {
    let mut errors = 0usize;
    let mut words = 0usize;
    for p in pairs {
        if p.reference.is_empty() {
            return Err(MetricError::EmptyReference(p.utterance_id.clone()));
        }
        errors += edit_counts(&p.reference, &p.hypothesis).errors();
        words += p.reference.len();
    }
    if words == 0 {
        return Err(MetricError::EmptyReference("<corpus>".into()));
    }
    Ok(100.0 * errors as f64 / words as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(r: &str, h: &str) -> TranscriptPair {
        TranscriptPair {
            utterance_id: "u".into(),
            reference: r.split_whitespace().map(str::to_owned).collect(),
            hypothesis: h.split_whitespace().map(str::to_owned).collect(),
        }
    }

    #[test]
    fn examples() {
        assert_eq!(wer(&[pair("a b c", "a b c"), pair("d e", "d e")]).unwrap(), 0.0);
        let w = wer(&[pair("a b c", "a b")]).unwrap();
        assert!((w - 100.0 / 3.0).abs() < 1e-12);
        assert_eq!(edit_counts(&["a", "b", "c"], &["a", "b"]).deletions, 1);
        let c = edit_counts(&["a", "b", "c"], &["x", "y", "z", "a", "b", "c"]);
        assert_eq!((c.insertions, c.hits), (3, 3));
        assert_eq!(wer(&[pair("a b c", "x y z a b c")]).unwrap(), 100.0);
        assert_eq!(wer(&[pair("a", "x y z")]).unwrap(), 300.0);
    }

    #[test]
    fn corpus_level_weighting() {
        // 1 error in 1 word + 0 errors in 9 words -> 10%, not the 50% mean.
        let w = wer(&[pair("a", "b"), pair("a b c d e f g h i", "a b c d e f g h i")]).unwrap();
        assert!((w - 10.0).abs() < 1e-12);
    }

    #[test]
    fn tie_preference() {
        // "a b" -> "b": one deletion either way; no substitution possible at
        // equal cost, so the count must be a single deletion.
        let c = edit_counts(&["a", "b"], &["b"]);
        assert_eq!((c.substitutions, c.deletions, c.insertions), (0, 1, 0));
        // "a" -> "b c": substitution plus insertion beats two insertions and
        // a deletion.
        let c = edit_counts(&["a"], &["b", "c"]);
        assert_eq!((c.substitutions, c.deletions, c.insertions), (1, 0, 1));
    }

    #[test]
    fn empty_reference_rejected() {
        assert!(matches!(wer(&[pair("", "a")]), Err(MetricError::EmptyReference(_))));
    }
}
