//! Readers for externally produced transcripts, trial scores and labels.
//!
//! * transcripts: UTF-8, one `id<TAB>text` per line
//! * scores: CSV `trial_id,score,label` with label `genuine` or `impostor`
//! * labels: CSV `id,label`
//!
//! A CSV first line whose first field is the column name is a header.

use std::path::Path;

use super::{MetricError, ScoreRecord, TrialLabel};

fn parse_err(path: &Path, line: usize, msg: impl Into<String>) -> MetricError {
    MetricError::Parse {
        path: path.to_path_buf(),
        line,
        msg: msg.into(),
    }
}

pub fn read_transcripts(path: impl AsRef<Path>) -> Result<Vec<(String, String)>, MetricError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let (id, body) = line
            .split_once('\t')
            .ok_or_else(|| parse_err(path, i + 1, "expected id<TAB>text"))?;
        out.push((id.to_string(), body.to_string()));
    }
    Ok(out)
}

fn csv_rows(path: &Path, header: &str, width: usize) -> Result<Vec<(usize, Vec<String>)>, MetricError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| parse_err(path, 0, e.to_string()))?;
    let mut rows = Vec::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| parse_err(path, i + 1, e.to_string()))?;
        if i == 0 && rec.get(0) == Some(header) {
            continue;
        }
        if rec.len() != width {
            return Err(parse_err(path, i + 1, format!("expected {width} fields, got {}", rec.len())));
        }
        rows.push((i + 1, rec.iter().map(str::to_owned).collect()));
    }
    Ok(rows)
}

pub fn read_scores(path: impl AsRef<Path>) -> Result<Vec<ScoreRecord>, MetricError> {
    let path = path.as_ref();
    csv_rows(path, "trial_id", 3)?
        .into_iter()
        .map(|(line, f)| {
            let score: f64 = f[1]
                .parse()
                .map_err(|_| parse_err(path, line, format!("bad score {:?}", f[1])))?;
            let label = match f[2].to_ascii_lowercase().as_str() {
                "genuine" | "target" => TrialLabel::Genuine,
                "impostor" | "nontarget" => TrialLabel::Impostor,
                other => return Err(parse_err(path, line, format!("bad label {other:?}"))),
            };
            Ok(ScoreRecord {
                trial_id: f[0].clone(),
                score,
                label,
            })
        })
        .collect()
}

pub fn read_labels(path: impl AsRef<Path>) -> Result<Vec<(String, String)>, MetricError> {
    let path = path.as_ref();
    Ok(csv_rows(path, "id", 2)?
        .into_iter()
        .map(|(_, mut f)| {
            let label = f.pop().unwrap_or_default();
            (f.pop().unwrap_or_default(), label)
        })
        .collect())
}
