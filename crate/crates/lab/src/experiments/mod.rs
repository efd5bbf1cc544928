//! The four benchmark experiments.

pub mod batch;
pub mod lorenz;
pub mod scalar;
pub mod ungm;

use std::path::Path;

use crate::config::{ExperimentConfig, ExperimentKind};
use crate::table::Table;
use crate::LabError;

/// Named CSV tables plus the lines of `summary.txt`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Artifacts {
    pub tables: Vec<(String, Table)>,
    pub summary: Vec<String>,
}

impl Artifacts {
    pub fn table(&self, name: &str) -> Option<&Table> {
        self.tables.iter().find(|(n, _)| n == name).map(|(_, t)| t)
    }

    pub fn add(&mut self, name: impl Into<String>, table: Table) {
        self.tables.push((name.into(), table));
    }

    pub fn extend(&mut self, other: Artifacts) {
        self.tables.extend(other.tables);
        self.summary.extend(other.summary);
    }

    /// Writes every table and `summary.txt` into `dir`, creating it.
    pub fn write(&self, dir: &Path) -> Result<(), LabError> {
        std::fs::create_dir_all(dir).map_err(|e| LabError::Io(format!("{}: {e}", dir.display())))?;
        for (name, table) in &self.tables {
            table.write(&dir.join(name))?;
        }
        let mut text = self.summary.join("\n");
        text.push('\n');
        let path = dir.join("summary.txt");
        std::fs::write(&path, text).map_err(|e| LabError::Io(format!("{}: {e}", path.display())))
    }
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Artifacts, LabError> {
    match cfg.experiment {
        ExperimentKind::Scalar => scalar::run_scalar_experiment(cfg).map(|r| r.artifacts),
        ExperimentKind::Ungm => ungm::run_ungm_experiment(cfg).map(|r| r.artifacts),
        ExperimentKind::Batch => batch::run_batch_experiment(cfg).map(|r| r.artifacts),
        ExperimentKind::Lorenz96 => lorenz::run_lorenz_experiment(cfg).map(|r| r.artifacts),
    }
}

pub(crate) fn require_kind(cfg: &ExperimentConfig, kind: ExperimentKind) -> Result<(), LabError> {
    if cfg.experiment != kind {
        return Err(LabError::Config(format!("expected a {kind} configuration, got {}", cfg.experiment)));
    }
    cfg.validate()
}

/// Counts of `values` in `bins` equal cells over `[lo, hi)`; values outside
/// are tallied separately as `(below, above)`.
pub fn histogram(values: &[f64], lo: f64, hi: f64, bins: usize) -> (Vec<usize>, usize, usize) {
    let mut counts = vec![0; bins];
    let (mut below, mut above) = (0, 0);
    let width = (hi - lo) / bins as f64;
    for &v in values {
        if v < lo {
            below += 1;
        } else if v >= hi {
            above += 1;
        } else {
            counts[(((v - lo) / width) as usize).min(bins - 1)] += 1;
        }
    }
    (counts, below, above)
}

pub fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

/// Standard error of the sample mean.
pub fn standard_error(values: &[f64]) -> f64 {
    let m = mean(values);
    let n = values.len() as f64;
    let var = values.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (n - 1.0);
    (var / n).sqrt()
}
