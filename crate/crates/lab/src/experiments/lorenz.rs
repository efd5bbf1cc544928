//! Lorenz-96 twin experiment: one long run per configuration, scored by the
//! time-averaged error.

use enkf::ensemble::{
    enkf_analysis, enkf_time_update, lorenz_taper, EnkfOptions, Ensemble, InflationFactor, Localization, TaperVariant,
};
use enkf::math::sample_wishart;
use enkf::models::{lorenz96_model, simulate, Lorenz96Config, Measurement, Transition};
use enkf::{Matrix, RngStream, Vector};

use super::{require_kind, Artifacts};
use crate::config::{gain_name, order_name, ExperimentConfig, ExperimentKind};
use crate::driver::mc_driver;
use crate::metrics::{rmse_metric, MetricSeries};
use crate::table::{cell, Table};
use crate::LabError;

pub const DIVERGENCE_LEVEL: f64 = 10.0;
pub const DIVERGENCE_STEPS: usize = 100;
/// Error of the estimate `x_hat = y`.
pub const USEFUL_LEVEL: f64 = 1.0;

const TRUTH_STREAM: u64 = 0;
const FILTER_STREAM: u64 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    Completed,
    /// `eps_k > 10` for 100 consecutive steps, ending at `step`.
    Diverged { step: usize },
    /// The filter failed numerically at `step`.
    Failed { step: usize, reason: String },
}

#[derive(Debug, Clone)]
pub struct LorenzRun {
    pub series: MetricSeries,
    pub outcome: Outcome,
    /// `eps_bar` over `k = 100..=L`; infinite unless the run completed.
    pub average: f64,
    pub final_truth: Vector,
    pub final_estimate: Vector,
    pub final_anomalies: Matrix,
}

impl LorenzRun {
    pub fn useful(&self) -> bool {
        self.average < USEFUL_LEVEL
    }
}

pub struct LorenzResult {
    pub runs: Vec<LorenzRun>,
    pub artifacts: Artifacts,
}

pub fn lorenz_options(cfg: &ExperimentConfig, dim: usize) -> Result<EnkfOptions, LabError> {
    let localization = if cfg.taper {
        Some(Localization {
            taper: lorenz_taper(dim, cfg.taper_length)?,
            variant: TaperVariant::Covariance,
        })
    } else {
        None
    };
    Ok(EnkfOptions {
        gain: cfg.gain,
        localization,
        inflation: InflationFactor::new(cfg.inflation)?,
        sequential: cfg.sequential,
        order: cfg.order,
        ..EnkfOptions::default()
    })
}

/// One run: `P0 ~ W(I, 40)`, truth `x0 ~ N(0, P0)`, filter ensemble drawn
/// from the same prior with an independent stream.
pub fn run_lorenz_once(cfg: &ExperimentConfig, rng: RngStream) -> Result<LorenzRun, LabError> {
    let lcfg = Lorenz96Config::default();
    let n = lcfg.dim;
    let mut truth_rng = rng.substream(TRUTH_STREAM);
    let mut filter_rng = rng.substream(FILTER_STREAM);
    let p0 = sample_wishart(n, n, &mut truth_rng)?;
    let model = lorenz96_model(&lcfg, p0)?;
    let traj = simulate(&model, cfg.steps, &mut truth_rng);
    let opts = lorenz_options(cfg, n)?;

    let mut x = Ensemble::sample(model.initial_state(), cfg.ensemble_size, &mut filter_rng)?;
    let mut series = MetricSeries::with_capacity(cfg.steps);
    let mut outcome = Outcome::Completed;
    for k in 1..=cfg.steps {
        let step = enkf_time_update(&x, &model, &mut filter_rng, k - 1)
            .and_then(|pred| enkf_analysis(&pred, traj.measurement(k), &model as &dyn Measurement, &opts, &mut filter_rng));
        match step {
            Ok(next) => x = next,
            Err(e) => {
                outcome = Outcome::Failed {
                    step: k,
                    reason: e.to_string(),
                };
                break;
            }
        }
        let eps = rmse_metric(&x.mean(), &traj.states[k])?;
        series.push(if eps.is_finite() { eps } else { f64::INFINITY });
        if series.trailing_run_above(DIVERGENCE_LEVEL) >= DIVERGENCE_STEPS {
            outcome = Outcome::Diverged { step: k };
            break;
        }
    }
    let average = match outcome {
        Outcome::Completed => series.average().unwrap_or(f64::NAN),
        _ => f64::INFINITY,
    };
    let last = series.steps();
    Ok(LorenzRun {
        average,
        outcome,
        final_truth: traj.states[last].clone(),
        final_estimate: x.mean(),
        final_anomalies: x.anomalies().matrix().clone(),
        series,
    })
}

fn taper_label(cfg: &ExperimentConfig) -> String {
    if cfg.taper {
        format!("yes({})", cell(cfg.taper_length))
    } else {
        "no".into()
    }
}

pub fn table1_header() -> Table {
    Table::new(["run", "N", "c", "taper", "gain", "sequential", "order", "steps", "eps_bar", "useful", "outcome"])
}

pub fn table1_row(cfg: &ExperimentConfig, run: usize, r: &LorenzRun) -> Vec<String> {
    let outcome = match &r.outcome {
        Outcome::Completed => "completed".to_string(),
        Outcome::Diverged { step } => format!("diverged@{step}"),
        Outcome::Failed { step, .. } => format!("failed@{step}"),
    };
    vec![
        run.to_string(),
        cfg.ensemble_size.to_string(),
        cell(cfg.inflation),
        taper_label(cfg),
        gain_name(cfg.gain).into(),
        cfg.sequential.to_string(),
        order_name(cfg.order).into(),
        cfg.steps.to_string(),
        cell(r.average),
        r.useful().to_string(),
        outcome,
    ]
}

pub fn summary_line(cfg: &ExperimentConfig, run: usize, r: &LorenzRun) -> String {
    let flag = if r.useful() { "" } else { "  [not useful: eps_bar >= 1]" };
    format!(
        "N={:<5} c={:<5} taper={:<8} eps_bar={:.4} run={run}{flag}",
        cfg.ensemble_size,
        cell(cfg.inflation),
        taper_label(cfg),
        r.average
    )
}

pub fn run_lorenz_experiment(cfg: &ExperimentConfig) -> Result<LorenzResult, LabError> {
    require_kind(cfg, ExperimentKind::Lorenz96)?;
    let runs = mc_driver(cfg.runs, cfg.seed, cfg.threads, |_, rng| run_lorenz_once(cfg, rng))?;

    let mut artifacts = Artifacts::default();
    let mut table1 = table1_header();
    let mut errors = Table::new(["run", "k", "eps"]);
    let mut last = Table::new(
        ["run", "component", "truth", "estimate", "error", "anomaly_min", "anomaly_max"],
    );
    artifacts.summary.push("N     c     taper    eps_bar".into());
    for (i, r) in runs.iter().enumerate() {
        table1.push(table1_row(cfg, i, r))?;
        artifacts.summary.push(summary_line(cfg, i, r));
        if let Outcome::Failed { step, reason } = &r.outcome {
            artifacts.summary.push(format!("  run {i} failed at step {step}: {reason}"));
        }
        for (k, e) in r.series.errors().iter().enumerate() {
            errors.push(vec![i.to_string(), (k + 1).to_string(), cell(*e)])?;
        }
        for j in 0..r.final_truth.len() {
            let row = r.final_anomalies.row(j);
            last.push(vec![
                i.to_string(),
                j.to_string(),
                cell(r.final_truth[j]),
                cell(r.final_estimate[j]),
                cell(r.final_estimate[j] - r.final_truth[j]),
                cell(row.min()),
                cell(row.max()),
            ])?;
        }
    }
    artifacts.add("table1.csv", table1);
    artifacts.add("lorenz_errors.csv", errors);
    artifacts.add("lorenz_final_step.csv", last);
    if cfg.taper {
        let rho = lorenz_taper(Lorenz96Config::default().dim, cfg.taper_length)?.dense_matrix();
        let mut t = Table::new(["i", "j", "rho"]);
        for i in 0..rho.nrows() {
            for j in 0..rho.ncols() {
                t.push(vec![i.to_string(), j.to_string(), cell(rho[(i, j)])])?;
            }
        }
        artifacts.add("lorenz_taper.csv", t);
    }
    Ok(LorenzResult { runs, artifacts })
}

/// A benchmark grid configuration and its reported value; `None` marks a row
/// reported only as divergent.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Table1Row {
    pub ensemble_size: usize,
    pub inflation: f64,
    pub taper: bool,
    pub reported: Option<f64>,
}

pub const TABLE1: [Table1Row; 8] = [
    Table1Row { ensemble_size: 1000, inflation: 1.0, taper: false, reported: Some(0.29) },
    Table1Row { ensemble_size: 40, inflation: 1.0, taper: false, reported: Some(0.44) },
    Table1Row { ensemble_size: 40, inflation: 1.05, taper: false, reported: Some(0.33) },
    Table1Row { ensemble_size: 40, inflation: 1.0, taper: true, reported: Some(0.29) },
    Table1Row { ensemble_size: 40, inflation: 1.02, taper: true, reported: Some(0.28) },
    Table1Row { ensemble_size: 20, inflation: 1.01, taper: true, reported: Some(0.30) },
    Table1Row { ensemble_size: 10, inflation: 1.05, taper: true, reported: Some(0.34) },
    Table1Row { ensemble_size: 20, inflation: 1.05, taper: false, reported: None },
];

impl Table1Row {
    pub fn config(&self, base: &ExperimentConfig) -> ExperimentConfig {
        ExperimentConfig {
            ensemble_size: self.ensemble_size,
            inflation: self.inflation,
            taper: self.taper,
            ..base.clone()
        }
    }
}
