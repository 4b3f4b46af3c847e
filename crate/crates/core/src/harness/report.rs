use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::config::ExperimentConfig;

pub const CSV_HEADER: &str =
    "figure,n,snr_db,seed,rel_err_jp,rel_err_jb,rel_err_vb,rmse_mmse,rmse_map,rmse_bound,wall_time_s";

/// Relative errors of one estimate against the reference, in both norms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelErrors {
    pub jp: f64,
    pub jb: f64,
    pub vb: f64,
    pub jp_fro: f64,
    pub jb_fro: f64,
    pub vb_fro: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RmseTriple {
    pub mmse: f64,
    pub mmse_se: f64,
    pub map: f64,
    pub map_se: f64,
    pub bound: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub figure: String,
    pub n: usize,
    pub snr_db: f64,
    pub seed: u64,
    pub rel: Option<RelErrors>,
    pub rmse: Option<RmseTriple>,
    pub wall_time_s: Option<f64>,
    /// Whether `J_D` came out exactly as a multiple of the identity.
    pub jd_scalar_identity: Option<bool>,
    pub condition_number: Option<f64>,
    /// Training or estimation error, when the cell failed.
    pub failed: Option<String>,
    pub config_hash: String,
}

impl ReportRow {
    pub fn new(figure: &str, n: usize, snr_db: f64, seed: u64, config_hash: &str) -> Self {
        Self {
            figure: figure.to_string(),
            n,
            snr_db,
            seed,
            rel: None,
            rmse: None,
            wall_time_s: None,
            jd_scalar_identity: None,
            condition_number: None,
            failed: None,
            config_hash: config_hash.to_string(),
        }
    }

    fn sort_key(&self) -> (&str, usize, f64, u64) {
        (&self.figure, self.n, self.snr_db, self.seed)
    }

    fn csv_line(&self) -> String {
        let opt = |v: Option<f64>| v.map_or_else(String::new, |v| v.to_string());
        let rel = |f: fn(&RelErrors) -> f64| opt(self.rel.as_ref().map(f));
        let rmse = |f: fn(&RmseTriple) -> f64| opt(self.rmse.as_ref().map(f));
        format!(
            "{},{},{},{},{},{},{},{},{},{},{}",
            self.figure,
            self.n,
            self.snr_db,
            self.seed,
            rel(|r| r.jp),
            rel(|r| r.jb),
            rel(|r| r.vb),
            rmse(|r| r.mmse),
            rmse(|r| r.map),
            rmse(|r| r.bound),
            opt(self.wall_time_s),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    /// Short name used for output files, e.g. `denoise-n`.
    pub experiment: String,
    pub config_hash: String,
    pub config: ExperimentConfig,
    pub rows: Vec<ReportRow>,
}

impl ExperimentReport {
    pub fn new(experiment: &str, config: &ExperimentConfig, mut rows: Vec<ReportRow>) -> Self {
        rows.sort_by(|a, b| {
            let (fa, na, sa, ea) = a.sort_key();
            let (fb, nb, sb, eb) = b.sort_key();
            fa.cmp(fb).then(na.cmp(&nb)).then(sa.total_cmp(&sb)).then(ea.cmp(&eb))
        });
        Self {
            experiment: experiment.to_string(),
            config_hash: config.hash(),
            config: config.clone(),
            rows,
        }
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(64 * (self.rows.len() + 1));
        out.push_str(CSV_HEADER);
        out.push('\n');
        for row in &self.rows {
            out.push_str(&row.csv_line());
            out.push('\n');
        }
        out
    }

    pub fn failures(&self) -> Vec<&ReportRow> {
        self.rows.iter().filter(|r| r.failed.is_some()).collect()
    }

    /// Rows of one figure tag.
    pub fn figure<'a>(&'a self, tag: &'a str) -> impl Iterator<Item = &'a ReportRow> + 'a {
        self.rows.iter().filter(move |r| r.figure == tag)
    }

    /// Writes `<experiment>.csv` and `<experiment>.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(PathBuf, PathBuf)> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let csv = dir.join(format!("{}.csv", self.experiment));
        let json = dir.join(format!("{}.json", self.experiment));
        fs::write(&csv, self.to_csv()).map_err(|e| Error::io(&csv, e))?;
        let text = serde_json::to_string_pretty(self)?;
        fs::write(&json, text).map_err(|e| Error::io(&json, e))?;
        Ok((csv, json))
    }
}

/// Median of the finite values, `None` when there are none.
pub fn median(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let mut v: Vec<f64> = values.into_iter().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    Some(if v.len() % 2 == 1 { v[m] } else { 0.5 * (v[m - 1] + v[m]) })
}
