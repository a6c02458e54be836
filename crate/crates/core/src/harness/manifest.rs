use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use super::HarnessError;
use crate::audio::{probe_wav, read_wav};
use crate::perturb::rng::CounterRng;
use crate::Waveform;

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Utterance {
    pub id: String,
    pub wav_path: PathBuf,
    pub transcript: Option<String>,
}

impl Utterance {
    pub fn load(&self) -> Result<Waveform, HarnessError> {
        read_wav(&self.wav_path).map_err(|e| HarnessError::MissingAudio {
            id: self.id.clone(),
            path: self.wav_path.display().to_string(),
            msg: e.to_string(),
        })
    }
}

/// Validated manifest contents, in file order.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Dataset {
    pub path: PathBuf,
    pub utterances: Vec<Utterance>,
}

impl Dataset {
    pub fn len(&self) -> usize {
        self.utterances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.utterances.is_empty()
    }

    /// Seeded subset of at most `limit` rows, kept in manifest order.
    pub fn subset(&self, limit: usize, seed: u64) -> Dataset {
        if limit >= self.len() {
            return self.clone();
        }
        let mut idx: Vec<usize> = (0..self.len()).collect();
        let mut rng = CounterRng::new(seed);
        for i in (1..idx.len()).rev() {
            idx.swap(i, rng.below(i + 1));
        }
        idx.truncate(limit);
        idx.sort_unstable();
        Dataset {
            path: self.path.clone(),
            utterances: idx.into_iter().map(|i| self.utterances[i].clone()).collect(),
        }
    }
}

/// Reads `utterance_id,wav_path[,transcript]` rows. A first row starting
/// with `utterance_id` is treated as a header. Relative paths resolve
/// against the manifest's directory. Every WAV is checked at header level.
pub fn load_manifest(path: impl AsRef<Path>) -> Result<Dataset, HarnessError> {
    let path = path.as_ref();
    let malformed = |line: usize, msg: String| HarnessError::MalformedManifest {
        path: path.display().to_string(),
        line,
        msg,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| malformed(0, e.to_string()))?;
    let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
    let mut seen = BTreeSet::new();
    let mut utterances = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let line = i + 1;
        let record = record.map_err(|e| malformed(line, e.to_string()))?;
        if record.iter().all(str::is_empty) {
            continue;
        }
        if line == 1 && record.get(0) == Some("utterance_id") {
            continue;
        }
        if !(2..=3).contains(&record.len()) {
            return Err(malformed(line, format!("expected 2 or 3 fields, found {}", record.len())));
        }
        let id = record[0].to_string();
        if id.is_empty() || record[1].is_empty() {
            return Err(malformed(line, "empty utterance_id or wav_path".into()));
        }
        if !seen.insert(id.clone()) {
            return Err(malformed(line, format!("duplicate utterance_id {id}")));
        }
        let wav = PathBuf::from(&record[1]);
        let wav_path = if wav.is_relative() { base.join(wav) } else { wav };
        probe_wav(&wav_path).map_err(|e| HarnessError::MissingAudio {
            id: id.clone(),
            path: wav_path.display().to_string(),
            msg: e.to_string(),
        })?;
        utterances.push(Utterance {
            id,
            wav_path,
            transcript: record.get(2).filter(|t| !t.is_empty()).map(str::to_owned),
        });
    }
    Ok(Dataset {
        path: path.to_path_buf(),
        utterances,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::audio::{write_wav, WavEncoding};
    use crate::perturb::gen_white_noise;

    fn fixture() -> tempfile::TempDir {
        let dir = tempfile::tempdir().unwrap();
        let w: Waveform = gen_white_noise(0.05, 16000, 1);
        write_wav(&w, dir.path().join("a.wav"), WavEncoding::Pcm16).unwrap();
        write_wav(&w, dir.path().join("b.wav"), WavEncoding::Float32).unwrap();
        dir
    }

    #[test]
    fn two_rows() {
        let dir = fixture();
        let m = dir.path().join("m.csv");
        std::fs::write(&m, "utterance_id,wav_path,transcript\nu1,a.wav,hello world\nu2,b.wav\n").unwrap();
        let d = load_manifest(&m).unwrap();
        assert_eq!(d.len(), 2);
        assert_eq!(d.utterances[0].transcript.as_deref(), Some("hello world"));
        assert_eq!(d.utterances[1].transcript, None);
        assert_eq!(d.utterances[1].load().unwrap().len(), 800);
    }

    #[test]
    fn missing_file_names_the_row() {
        let dir = fixture();
        let m = dir.path().join("m.csv");
        std::fs::write(&m, "u1,a.wav\nu7,nope.wav\n").unwrap();
        match load_manifest(&m) {
            Err(HarnessError::MissingAudio { id, .. }) => assert_eq!(id, "u7"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn malformed_rows() {
        let dir = fixture();
        let m = dir.path().join("m.csv");
        for text in ["u1\n", "u1,a.wav,x,y\n", "u1,a.wav\nu1,b.wav\n", ",a.wav\n"] {
            std::fs::write(&m, text).unwrap();
            assert!(matches!(load_manifest(&m), Err(HarnessError::MalformedManifest { .. })), "{text:?}");
        }
        assert!(load_manifest(dir.path().join("absent.csv")).is_err());
    }

    #[test]
    fn subset_is_seeded_and_ordered() {
        let d = Dataset {
            path: PathBuf::new(),
            utterances: (0..10)
                .map(|i| Utterance { id: format!("u{i}"), wav_path: PathBuf::new(), transcript: None })
                .collect(),
        };
        let a = d.subset(4, 9);
        assert_eq!(a, d.subset(4, 9));
        assert_eq!(a.len(), 4);
        assert!(a.utterances.windows(2).all(|w| w[0].id < w[1].id));
        assert_eq!(d.subset(20, 1), d);
    }
}
