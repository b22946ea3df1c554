//! The experiment results table: comma-separated text with a fixed header.

use crate::{Error, Result};
use std::fmt::Write as _;
use std::path::Path;

pub const RESULTS_HEADER: &str =
    "experiment,architecture,loss,threshold,dice,skeleton_error_um,coverage,node_distance_um,status,config_hash,runtime_s";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowStatus {
    Ok,
    /// The network produced empty skeletons at every threshold.
    NotApplicable,
    Failed,
}

impl RowStatus {
    fn as_str(&self) -> &'static str {
        match self {
            RowStatus::Ok => "ok",
            RowStatus::NotApplicable => "n/a",
            RowStatus::Failed => "failed",
        }
    }
}

#[derive(Debug, Clone)]
pub struct ResultRow {
    pub experiment: String,
    pub architecture: String,
    pub loss: String,
    pub threshold: Option<f64>,
    pub dice: Option<f64>,
    pub skeleton_error_um: Option<f64>,
    pub coverage: Option<f64>,
    pub node_distance_um: Option<f64>,
    pub status: RowStatus,
    pub config_hash: String,
    pub runtime_s: f64,
}

fn cell(v: Option<f64>) -> String {
    match v {
        // Sentinel text, never a fake number.
        None => "n/a".to_string(),
        Some(v) => format!("{v}"),
    }
}

#[derive(Debug, Clone, Default)]
pub struct ResultsTable {
    pub rows: Vec<ResultRow>,
}

impl ResultsTable {
    pub fn push(&mut self, row: ResultRow) {
        self.rows.push(row);
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{RESULTS_HEADER}");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{},{},{}",
                r.experiment,
                r.architecture,
                r.loss,
                cell(r.threshold),
                cell(r.dice),
                cell(r.skeleton_error_um),
                cell(r.coverage),
                cell(r.node_distance_um),
                r.status.as_str(),
                r.config_hash,
                r.runtime_s
            );
        }
        out
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)
                .map_err(|e| Error::io(parent.display().to_string(), e))?;
        }
        std::fs::write(path, self.to_text())
            .map_err(|e| Error::io(path.display().to_string(), e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn table_has_header_and_na_sentinels() {
        let mut t = ResultsTable::default();
        t.push(ResultRow {
            experiment: "4".into(),
            architecture: "U2D_CLSTM_S".into(),
            loss: "dice".into(),
            threshold: None,
            dice: None,
            skeleton_error_um: None,
            coverage: None,
            node_distance_um: None,
            status: RowStatus::NotApplicable,
            config_hash: "beef".into(),
            runtime_s: 0.0,
        });
        let text = t.to_text();
        let mut lines = text.lines();
        assert_eq!(lines.next().unwrap(), RESULTS_HEADER);
        let row = lines.next().unwrap();
        assert!(row.contains(",n/a,"));
        assert!(row.contains("beef"));
    }
}
