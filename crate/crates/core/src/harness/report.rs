use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::grid::{GridRun, RowStatus};
use super::probes::{FreqRespRun, LinearityRun, RunFailure};
use super::HarnessError;
use crate::perturb::NoiseFamily;

pub const GRID_HEADER: [&str; 8] = [
    "utterance_id",
    "codec",
    "mode",
    "condition_family",
    "level_db",
    "metric",
    "value",
    "status",
];
const LINEARITY_HEADER: [&str; 8] = ["codec", "mode", "kind", "gain_db", "mean", "p05", "p95", "count"];
const FREQRESP_HEADER: [&str; 5] = ["codec", "mode", "probe_amplitude", "freq_hz", "gain_db"];
const NOISE_PLOT_HEADER: [&str; 6] = ["codec", "mode", "level_db", "metric", "mean", "count"];
const ADDITIVITY_PLOT_HEADER: [&str; 6] = ["codec", "mode", "bitrate_kbps", "mean", "p05", "p95"];
const HOMOGENEITY_PLOT_HEADER: [&str; 6] = ["codec", "mode", "gain_db", "mean", "p05", "p95"];

/// What a run produced; absent parts are written as header-only files.
#[derive(Clone, Debug, Default)]
pub struct Reports {
    pub config: Option<ExperimentConfig>,
    pub grid: Option<GridRun>,
    pub linearity: Option<LinearityRun>,
    pub freqresp: Option<FreqRespRun>,
    /// Bits per second per (codec, mode), for the bitrate axis.
    pub bitrates: BTreeMap<(String, String), f64>,
}

/// Mean of one metric over the ok rows of a (codec, mode, condition) cell.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub codec: String,
    pub mode: String,
    pub family: NoiseFamily,
    pub level_db: Option<f64>,
    pub metric: String,
    pub mean: f64,
    pub count: usize,
}

fn num(v: f64) -> String {
    format!("{v}")
}

fn opt(v: Option<f64>) -> String {
    v.map(num).unwrap_or_default()
}

/// grid.csv body lines, one per metric for ok rows and one per error row.
pub fn grid_csv_rows(grid: &GridRun) -> Vec<[String; 8]> {
    let mut out = Vec::new();
    for r in &grid.reports {
        let prefix = |metric: &str, value: String| {
            [
                r.utterance_id.clone(),
                r.codec.clone(),
                r.mode.clone(),
                r.family.to_string(),
                opt(r.level_db),
                metric.to_string(),
                value,
                r.status.as_str().to_string(),
            ]
        };
        if r.status == RowStatus::Ok {
            for (m, &v) in &r.metrics {
                out.push(prefix(m, num(v)));
            }
        } else {
            out.push(prefix(r.error.as_deref().unwrap_or("error"), String::new()));
        }
    }
    out
}

/// Aggregates in row order, so recomputing them from grid.csv gives the
/// same floating-point sums.
pub fn aggregate_grid(grid: &GridRun) -> Vec<Aggregate> {
    type Key = (String, String, NoiseFamily, Option<u64>, String);
    let mut cells: BTreeMap<Key, (Option<f64>, f64, usize)> = BTreeMap::new();
    for r in grid.reports.iter().filter(|r| r.status == RowStatus::Ok) {
        for (m, &v) in &r.metrics {
            let key = (r.codec.clone(), r.mode.clone(), r.family, r.level_db.map(f64::to_bits), m.clone());
            let cell = cells.entry(key).or_insert((r.level_db, 0.0, 0));
            cell.1 += v;
            cell.2 += 1;
        }
    }
    let mut out: Vec<Aggregate> = cells
        .into_iter()
        .map(|((codec, mode, family, _, metric), (level_db, sum, count))| Aggregate {
            codec,
            mode,
            family,
            level_db,
            metric,
            mean: sum / count as f64,
            count,
        })
        .collect();
    out.sort_by(|a, b| {
        (&a.codec, &a.mode, a.family, &a.metric)
            .cmp(&(&b.codec, &b.mode, b.family, &b.metric))
            .then(a.level_db.unwrap_or(f64::NEG_INFINITY).total_cmp(&b.level_db.unwrap_or(f64::NEG_INFINITY)))
    });
    out
}

fn write_csv<const N: usize>(path: &Path, header: [&str; N], rows: &[[String; N]]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| HarnessError::io(path, e))?;
    w.write_record(header).map_err(|e| HarnessError::io(path, e))?;
    for r in rows {
        w.write_record(r).map_err(|e| HarnessError::io(path, e))?;
    }
    w.flush().map_err(|e| HarnessError::io(path, e))
}

#[derive(Serialize)]
struct GridJson<'a> {
    row_count: usize,
    error_count: usize,
    aggregates: Vec<Aggregate>,
    nondeterministic: &'a [(String, String)],
}

#[derive(Serialize)]
struct ReportJson<'a> {
    config: Option<&'a ExperimentConfig>,
    grid: GridJson<'a>,
    linearity: &'a [crate::analysis::LinearityReport],
    frequency_response: &'a [crate::analysis::FrequencyResponseCurve],
    failures: Vec<&'a RunFailure>,
}

/// Writes grid.csv, linearity.csv, freqresp.csv, report.json and the
/// plot-data files into `out_dir`.
pub fn emit_reports(reports: &Reports, out_dir: impl AsRef<Path>) -> Result<(), HarnessError> {
    let out = out_dir.as_ref();
    std::fs::create_dir_all(out).map_err(|e| HarnessError::io(out, e))?;
    let empty_grid = GridRun::default();
    let grid = reports.grid.as_ref().unwrap_or(&empty_grid);
    let empty_lin = LinearityRun::default();
    let lin = reports.linearity.as_ref().unwrap_or(&empty_lin);
    let empty_fr = FreqRespRun::default();
    let fr = reports.freqresp.as_ref().unwrap_or(&empty_fr);

    write_csv(&out.join("grid.csv"), GRID_HEADER, &grid_csv_rows(grid))?;

    let mut lin_rows = Vec::new();
    let mut add_rows = Vec::new();
    let mut hom_rows = Vec::new();
    for r in &lin.reports {
        if let Some(a) = &r.additivity {
            let s = a.summary;
            lin_rows.push([
                r.codec.clone(),
                r.mode.clone(),
                "additivity".into(),
                String::new(),
                num(s.mean),
                num(s.p05),
                num(s.p95),
                s.count.to_string(),
            ]);
            let kbps = reports.bitrates.get(&(r.codec.clone(), r.mode.clone())).map(|b| b / 1000.0);
            add_rows.push([r.codec.clone(), r.mode.clone(), opt(kbps), num(s.mean), num(s.p05), num(s.p95)]);
        }
        for h in &r.homogeneity {
            let s = h.summary;
            lin_rows.push([
                r.codec.clone(),
                r.mode.clone(),
                "homogeneity".into(),
                num(h.gain.gain_db),
                num(s.mean),
                num(s.p05),
                num(s.p95),
                s.count.to_string(),
            ]);
            hom_rows.push([r.codec.clone(), r.mode.clone(), num(h.gain.gain_db), num(s.mean), num(s.p05), num(s.p95)]);
        }
    }
    write_csv(&out.join("linearity.csv"), LINEARITY_HEADER, &lin_rows)?;
    write_csv(&out.join("plot_additivity.csv"), ADDITIVITY_PLOT_HEADER, &add_rows)?;
    write_csv(&out.join("plot_homogeneity.csv"), HOMOGENEITY_PLOT_HEADER, &hom_rows)?;

    let fr_rows: Vec<[String; 5]> = fr
        .curves
        .iter()
        .flat_map(|c| {
            c.points.iter().map(move |p| {
                [c.codec.clone(), c.mode.clone(), num(c.probe_amplitude), num(p.freq), num(p.gain_db)]
            })
        })
        .collect();
    write_csv(&out.join("freqresp.csv"), FREQRESP_HEADER, &fr_rows)?;
    write_csv(&out.join("plot_freqresp.csv"), FREQRESP_HEADER, &fr_rows)?;

    let aggregates = aggregate_grid(grid);
    for family in [NoiseFamily::Clean, NoiseFamily::Ambient, NoiseFamily::White, NoiseFamily::Reverb] {
        let rows: Vec<[String; 6]> = aggregates
            .iter()
            .filter(|a| a.family == family)
            .map(|a| [a.codec.clone(), a.mode.clone(), opt(a.level_db), a.metric.clone(), num(a.mean), a.count.to_string()])
            .collect();
        write_csv(&out.join(format!("plot_noise_{family}.csv")), NOISE_PLOT_HEADER, &rows)?;
    }

    let doc = ReportJson {
        config: reports.config.as_ref(),
        grid: GridJson {
            row_count: grid.reports.len(),
            error_count: grid.error_count(),
            aggregates,
            nondeterministic: &grid.nondeterministic,
        },
        linearity: &lin.reports,
        frequency_response: &fr.curves,
        failures: lin.failures.iter().chain(&fr.failures).collect(),
    };
    let path = out.join("report.json");
    let text = serde_json::to_string_pretty(&doc).map_err(|e| HarnessError::io(&path, e))?;
    std::fs::write(&path, text + "\n").map_err(|e| HarnessError::io(&path, e))
}
