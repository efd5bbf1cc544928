//! Spread of the ensemble variance on the scalar random walk. All runs share
//! one simulated trajectory and measurement sequence; only the filter's own
//! randomness differs between runs.

use enkf::ensemble::{enkf_analysis, enkf_time_update, output_ensemble, EnkfOptions, Ensemble, OutputEnsemble, OutputMode};
use enkf::kalman::{kalman_filter, stationary_gain};
use enkf::models::{scalar_model, simulate, LinearModel, Measurement, Transition, Trajectory};
use enkf::{Matrix, RngStream, Vector};

use super::{histogram, mean, median, require_kind, standard_error, Artifacts};
use crate::config::{ExperimentConfig, ExperimentKind};
use crate::driver::mc_driver;
use crate::table::{cell, Table};
use crate::LabError;

/// Reported stationary posterior variance.
pub const REPORTED_VARIANCE: f64 = 0.0092;
pub const HIST_BINS: usize = 60;
/// Steps of the exact filter used to fix the stationary gain.
pub const STATIONARY_STEPS: usize = 25;

const TRUTH_STREAM: u64 = 0;
const FILTER_STREAM: u64 = 1;

/// Sample statistics of one variance distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarianceSummary {
    pub mean: f64,
    pub median: f64,
    pub std_error: f64,
}

impl VarianceSummary {
    pub fn of(values: &[f64]) -> Self {
        Self {
            mean: mean(values),
            median: median(values),
            std_error: standard_error(values),
        }
    }
}

pub struct ScalarResult {
    /// Exact `P_{L|L}`.
    pub kf_variance: f64,
    /// Ensemble variance at step `L` per run, sampled gain.
    pub sampled_gain: Vec<f64>,
    /// Ensemble variance at step `L` per run, fixed stationary gain.
    pub fixed_gain: Vec<f64>,
    pub sampled_summary: VarianceSummary,
    pub fixed_summary: VarianceSummary,
    pub artifacts: Artifacts,
}

/// Exact posterior variances `P_{k|k}` for `k = 0..=steps`.
pub fn kf_variances(model: &LinearModel, steps: usize) -> Result<Vec<f64>, LabError> {
    let pass = kalman_filter(model, &vec![Some(Vector::zeros(model.h().nrows())); steps])?;
    Ok(pass.filtered.iter().map(|b| b.cov[(0, 0)]).collect())
}

fn fixed_gain_run(model: &LinearModel, traj: &Trajectory, gain: f64, cfg: &ExperimentConfig, rng: &mut RngStream) -> Result<f64, LabError> {
    let mut x = Ensemble::sample(model.initial_state(), cfg.ensemble_size, rng)?;
    let k_mat = Matrix::from_element(1, 1, gain);
    for k in 1..=cfg.steps {
        let pred = enkf_time_update(&x, model, rng, k - 1)?;
        let OutputEnsemble::Sampled(y_ens) = output_ensemble(&pred, model, rng, OutputMode::Sampled)? else {
            unreachable!("sampled output mode")
        };
        let innovations = y_ens.map(|v| traj.measurement(k)[0] - v);
        x = Ensemble::new(pred.members() + &k_mat * innovations)?;
    }
    Ok(x.cov()[(0, 0)])
}

fn sampled_gain_run(model: &LinearModel, traj: &Trajectory, cfg: &ExperimentConfig, rng: &mut RngStream) -> Result<f64, LabError> {
    let opts = EnkfOptions {
        gain: cfg.gain,
        ..EnkfOptions::default()
    };
    let mut x = Ensemble::sample(model.initial_state(), cfg.ensemble_size, rng)?;
    for k in 1..=cfg.steps {
        let pred = enkf_time_update(&x, model, rng, k - 1)?;
        x = enkf_analysis(&pred, traj.measurement(k), model as &dyn Measurement, &opts, rng)?;
    }
    Ok(x.cov()[(0, 0)])
}

fn hist_table(values: &[f64], hi: f64) -> Result<Table, LabError> {
    let (counts, _, above) = histogram(values, 0.0, hi, HIST_BINS);
    let width = hi / HIST_BINS as f64;
    let total = values.len() as f64;
    let mut t = Table::new(["bin_lo", "bin_hi", "count", "density"]);
    for (i, c) in counts.iter().enumerate() {
        t.push(vec![
            cell(i as f64 * width),
            cell((i + 1) as f64 * width),
            c.to_string(),
            cell(*c as f64 / (total * width)),
        ])?;
    }
    t.push(vec![cell(hi), cell(f64::INFINITY), above.to_string(), cell(0.0)])?;
    Ok(t)
}

pub fn run_scalar_experiment(cfg: &ExperimentConfig) -> Result<ScalarResult, LabError> {
    require_kind(cfg, ExperimentKind::Scalar)?;
    let model = scalar_model();
    let traj = simulate(&model, cfg.steps, &mut RngStream::new(cfg.seed, 0).substream(TRUTH_STREAM));
    let gain = stationary_gain(&model, STATIONARY_STEPS)?[(0, 0)];
    let kf_variance = kf_variances(&model, cfg.steps)?[cfg.steps];

    let pairs = mc_driver(cfg.runs, cfg.seed, cfg.threads, |_, rng| {
        let mut rng = rng.substream(FILTER_STREAM);
        let a = sampled_gain_run(&model, &traj, cfg, &mut rng)?;
        let b = fixed_gain_run(&model, &traj, gain, cfg, &mut rng)?;
        Ok((a, b))
    })?;
    let (sampled_gain, fixed_gain): (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    let sampled_summary = VarianceSummary::of(&sampled_gain);
    let fixed_summary = VarianceSummary::of(&fixed_gain);

    let hi = 3.0 * REPORTED_VARIANCE;
    let mut artifacts = Artifacts::default();
    artifacts.add("fig1_variance_hist.csv", hist_table(&sampled_gain, hi)?);
    artifacts.add("fig2_variance_hist.csv", hist_table(&fixed_gain, hi)?);
    let mut per_run = Table::new(["run", "sampled_gain", "fixed_gain"]);
    for (i, (a, b)) in sampled_gain.iter().zip(&fixed_gain).enumerate() {
        per_run.push(vec![i.to_string(), cell(*a), cell(*b)])?;
    }
    artifacts.add("scalar_variances.csv", per_run);
    let mut stats = Table::new(["gain", "runs", "mean", "median", "std_error", "kf_variance"]);
    for (name, s) in [("sampled", sampled_summary), ("fixed", fixed_summary)] {
        stats.push(vec![
            name.into(),
            cfg.runs.to_string(),
            cell(s.mean),
            cell(s.median),
            cell(s.std_error),
            cell(kf_variance),
        ])?;
    }
    artifacts.add("scalar_summary.csv", stats);
    artifacts.summary = vec![
        format!("KF P_{{{0}|{0}}} = {kf_variance:.4}", cfg.steps),
        format!("stationary gain K = {gain:.6}"),
        format!(
            "sampled gain: mean {:.6} median {:.6} se {:.2e} ({} runs, N={})",
            sampled_summary.mean, sampled_summary.median, sampled_summary.std_error, cfg.runs, cfg.ensemble_size
        ),
        format!(
            "fixed gain:   mean {:.6} median {:.6} se {:.2e}",
            fixed_summary.mean, fixed_summary.median, fixed_summary.std_error
        ),
    ];
    Ok(ScalarResult {
        kf_variance,
        sampled_gain,
        fixed_gain,
        sampled_summary,
        fixed_summary,
        artifacts,
    })
}
