use std::collections::BTreeMap;

use super::MetricError;

fn to_map<'a>(
    labels: &'a [(String, String)],
    side: &str,
) -> Result<BTreeMap<&'a str, &'a str>, MetricError> {
    let mut map = BTreeMap::new();
    for (id, label) in labels {
        if map.insert(id.as_str(), label.as_str()).is_some() {
            return Err(MetricError::IdMismatch(format!("duplicate id {id} in {side}")));
        }
    }
    Ok(map)
}

/// Percentage of ids whose hypothesis label equals the reference label.
/// Both lists must cover exactly the same ids.
pub fn accuracy(
    reference: &[(String, String)],
    hypothesis: &[(String, String)],
) -> Result<f64, MetricError> {
    let r = to_map(reference, "reference")?;
    let h = to_map(hypothesis, "hypothesis")?;
    if let Some(id) = r.keys().find(|k| !h.contains_key(*k)) {
        return Err(MetricError::IdMismatch(format!("{id} missing from hypothesis")));
    }
    if let Some(id) = h.keys().find(|k| !r.contains_key(*k)) {
        return Err(MetricError::IdMismatch(format!("{id} missing from reference")));
    }
    if r.is_empty() {
        return Err(MetricError::IdMismatch("no labels".into()));
    }
    let hits = r.iter().filter(|(id, label)| h[*id] == **label).count();
    Ok(100.0 * hits as f64 / r.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(v: &[(&str, &str)]) -> Vec<(String, String)> {
        v.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect()
    }

    #[test]
    fn examples() {
        let r = labels(&[("1", "happy"), ("2", "sad")]);
        assert_eq!(accuracy(&r, &r).unwrap(), 100.0);
        let h = labels(&[("2", "happy"), ("1", "sad")]);
        assert_eq!(accuracy(&r, &h).unwrap(), 0.0);

        let cats = ["neutral", "calm", "happy", "sad", "angry", "fearful", "disgust", "surprised"];
        let r: Vec<(String, String)> = cats.iter().enumerate().map(|(i, c)| (i.to_string(), c.to_string())).collect();
        let h: Vec<(String, String)> = cats
            .iter()
            .enumerate()
            .map(|(i, c)| (i.to_string(), if i < 3 { c.to_string() } else { "calm".to_string() }))
            .collect();
        // ids 0, 1, 2 match; id 1 is "calm" on both sides anyway.
        assert_eq!(accuracy(&r, &h).unwrap(), 37.5);
    }

    #[test]
    fn id_mismatch() {
        let r = labels(&[("1", "a")]);
        assert!(matches!(accuracy(&r, &labels(&[("2", "a")])), Err(MetricError::IdMismatch(_))));
        assert!(matches!(
            accuracy(&r, &labels(&[("1", "a"), ("1", "b")])),
            Err(MetricError::IdMismatch(_))
        ));
    }
}
