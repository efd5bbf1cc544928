//! Growth-model comparison of the point-mass reference, a sampled-gain
//! EnKF and the Monte Carlo KF on common simulated trajectories.

use enkf::density::{is_bimodal, kde, pmf_predict, pmf_update, total_variation, uniform_grid, GridDensity};
use enkf::ensemble::{enkf_analysis, enkf_time_update, EnkfOptions, Ensemble};
use enkf::kalman::{mckf_predict, mckf_update, GaussianBelief};
use enkf::models::{simulate, ungm_model, Measurement, NonlinearModel, Transition};
use enkf::RngStream;

use super::{histogram, mean, require_kind, standard_error, Artifacts};
use crate::config::{ExperimentConfig, ExperimentKind};
use crate::driver::mc_driver;
use crate::table::{cell, Table};
use crate::LabError;

const TRUTH_STREAM: u64 = 0;
const ENKF_STREAM: u64 = 1;
const MCKF_STREAM: u64 = 2;

pub const ESTIMATORS: [&str; 3] = ["pmf", "enkf", "mckf"];

#[derive(Debug, Clone, PartialEq)]
pub struct UngmSettings {
    pub grid_lo: f64,
    pub grid_hi: f64,
    pub grid_points: usize,
    /// Steps whose prediction and filtering densities are exported from run 0.
    pub snapshots: Vec<usize>,
    /// Runs, counted from 0, that also record per-step density diagnostics.
    pub diagnostic_runs: usize,
    /// Measurements above this value count as informative.
    pub informative_y: f64,
}

impl Default for UngmSettings {
    fn default() -> Self {
        Self {
            grid_lo: -40.0,
            grid_hi: 40.0,
            grid_points: 2001,
            snapshots: vec![120, 121, 122, 123, 124, 125, 150],
            diagnostic_runs: 10,
            informative_y: 0.5,
        }
    }
}

/// Per-step comparison of the EnKF with the point-mass reference.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepDiagnostic {
    pub run: usize,
    pub k: usize,
    pub y_prev: Option<f64>,
    pub y: f64,
    pub pmf_prediction_bimodal: bool,
    pub pmf_filter_bimodal: bool,
    /// Total variation between the EnKF filtering KDE and the PMF posterior.
    pub filter_tv: f64,
}

#[derive(Debug, Clone)]
pub struct Snapshot {
    pub k: usize,
    pub prediction: [GridDensity; 3],
    pub filtering: [GridDensity; 3],
}

#[derive(Debug, Clone)]
pub struct UngmRun {
    /// `errors[e][k - 1]` is the mean error of estimator `e` at step `k`.
    pub errors: [Vec<f64>; 3],
    pub diagnostics: Vec<StepDiagnostic>,
    pub snapshots: Vec<Snapshot>,
}

pub struct UngmResult {
    pub runs: Vec<UngmRun>,
    /// Mean and standard error of the per-run mean error, per estimator.
    pub bias: [(f64, f64); 3],
    pub artifacts: Artifacts,
}

impl UngmResult {
    pub fn diagnostics(&self) -> impl Iterator<Item = &StepDiagnostic> {
        self.runs.iter().flat_map(|r| r.diagnostics.iter())
    }
}

fn gaussian_on(grid: &[f64], b: &GaussianBelief) -> Result<GridDensity, LabError> {
    let var = b.cov[(0, 0)].max(1e-12);
    Ok(GridDensity::gaussian(grid.to_vec(), b.mean[0], var)?)
}

fn ensemble_kde(x: &Ensemble, grid: &[f64]) -> Result<GridDensity, LabError> {
    Ok(kde(&x.members().row(0).iter().copied().collect::<Vec<f64>>(), grid)?)
}

fn run_once(
    cfg: &ExperimentConfig,
    settings: &UngmSettings,
    model: &NonlinearModel,
    grid: &[f64],
    run: usize,
    rng: RngStream,
) -> Result<UngmRun, LabError> {
    let traj = simulate(model, cfg.steps, &mut rng.substream(TRUTH_STREAM));
    let mut enkf_rng = rng.substream(ENKF_STREAM);
    let mut mckf_rng = rng.substream(MCKF_STREAM);
    let opts = EnkfOptions {
        gain: cfg.gain,
        ..EnkfOptions::default()
    };
    let prior = model.initial_state();
    let diagnose = run < settings.diagnostic_runs;
    let record = run == 0;

    let mut pmf = GridDensity::gaussian(grid.to_vec(), prior.mean()[0], prior.cov()[(0, 0)])?;
    let mut ens = Ensemble::sample(prior, cfg.ensemble_size, &mut enkf_rng)?;
    let mut mckf = GaussianBelief::new(prior.mean().clone(), prior.cov().clone())?;

    let mut errors = [Vec::with_capacity(cfg.steps), Vec::with_capacity(cfg.steps), Vec::with_capacity(cfg.steps)];
    let mut diagnostics = Vec::new();
    let mut snapshots = Vec::new();
    for k in 1..=cfg.steps {
        let y = traj.measurement(k);
        let pmf_pred = pmf_predict(&pmf, model, k - 1)?;
        pmf = pmf_update(&pmf_pred, y[0], model)?;
        let ens_pred = enkf_time_update(&ens, model, &mut enkf_rng, k - 1)?;
        ens = enkf_analysis(&ens_pred, y, model as &dyn Measurement, &opts, &mut enkf_rng)?;
        let mckf_pred = mckf_predict(&mckf, model, &mut mckf_rng, cfg.ensemble_size, k - 1)?;
        mckf = mckf_update(&mckf_pred, y, model, &mut mckf_rng)?;

        let truth = traj.states[k][0];
        errors[0].push(pmf.mean() - truth);
        errors[1].push(ens.mean()[0] - truth);
        errors[2].push(mckf.mean[0] - truth);

        let snap = record && settings.snapshots.contains(&k);
        if diagnose || snap {
            let enkf_filter = ensemble_kde(&ens, grid)?;
            if diagnose {
                diagnostics.push(StepDiagnostic {
                    run,
                    k,
                    y_prev: (k > 1).then(|| traj.measurement(k - 1)[0]),
                    y: y[0],
                    pmf_prediction_bimodal: is_bimodal(&pmf_pred),
                    pmf_filter_bimodal: is_bimodal(&pmf),
                    filter_tv: total_variation(&enkf_filter, &pmf)?,
                });
            }
            if snap {
                let mckf_pred_belief = GaussianBelief::new(mckf_pred.mean(), mckf_pred.cov())?;
                snapshots.push(Snapshot {
                    k,
                    prediction: [pmf_pred.clone(), ensemble_kde(&ens_pred, grid)?, gaussian_on(grid, &mckf_pred_belief)?],
                    filtering: [pmf.clone(), enkf_filter, gaussian_on(grid, &mckf)?],
                });
            }
        }
    }
    Ok(UngmRun {
        errors,
        diagnostics,
        snapshots,
    })
}

pub fn run_ungm_experiment(cfg: &ExperimentConfig) -> Result<UngmResult, LabError> {
    run_ungm_with(cfg, &UngmSettings::default())
}

pub fn run_ungm_with(cfg: &ExperimentConfig, settings: &UngmSettings) -> Result<UngmResult, LabError> {
    require_kind(cfg, ExperimentKind::Ungm)?;
    let model = ungm_model();
    let grid = uniform_grid(settings.grid_lo, settings.grid_hi, settings.grid_points)?;
    let runs = mc_driver(cfg.runs, cfg.seed, cfg.threads, |run, rng| run_once(cfg, settings, &model, &grid, run, rng))?;

    let mut bias = [(0.0, 0.0); 3];
    for (e, slot) in bias.iter_mut().enumerate() {
        let per_run: Vec<f64> = runs.iter().map(|r| mean(&r.errors[e])).collect();
        let se = if per_run.len() > 1 { standard_error(&per_run) } else { f64::NAN };
        *slot = (mean(&per_run), se);
    }

    let mut artifacts = Artifacts::default();
    let mut errors = Table::new(["run", "k", "pmf", "enkf", "mckf"]);
    let mut all: [Vec<f64>; 3] = Default::default();
    for (i, r) in runs.iter().enumerate() {
        for k in 0..cfg.steps {
            errors.push(vec![
                i.to_string(),
                (k + 1).to_string(),
                cell(r.errors[0][k]),
                cell(r.errors[1][k]),
                cell(r.errors[2][k]),
            ])?;
            for (dst, src) in all.iter_mut().zip(&r.errors) {
                dst.push(src[k]);
            }
        }
    }
    artifacts.add("ungm_errors.csv", errors);

    let (lo, hi, bins) = (-30.0, 30.0, 120);
    let width = (hi - lo) / bins as f64;
    let hists: Vec<_> = all.iter().map(|v| histogram(v, lo, hi, bins).0).collect();
    let mut density = Table::new(["bin_lo", "bin_hi", "pmf", "enkf", "mckf"]);
    for b in 0..bins {
        let mut row = vec![cell(lo + b as f64 * width), cell(lo + (b + 1) as f64 * width)];
        for (e, h) in hists.iter().enumerate() {
            row.push(cell(h[b] as f64 / (all[e].len() as f64 * width)));
        }
        density.push(row)?;
    }
    artifacts.add("ungm_error_density.csv", density);

    let mut snaps = Table::new(["k", "density", "x", "pmf", "enkf", "mckf"]);
    for s in &runs[0].snapshots {
        for (label, set) in [("prediction", &s.prediction), ("filtering", &s.filtering)] {
            let pdfs: Vec<Vec<f64>> = set.iter().map(GridDensity::pdf).collect();
            for (j, x) in grid.iter().enumerate() {
                snaps.push(vec![
                    s.k.to_string(),
                    label.into(),
                    cell(*x),
                    cell(pdfs[0][j]),
                    cell(pdfs[1][j]),
                    cell(pdfs[2][j]),
                ])?;
            }
        }
    }
    artifacts.add("ungm_densities.csv", snaps);

    let mut diag = Table::new(["run", "k", "y_prev", "y", "pmf_prediction_bimodal", "pmf_filter_bimodal", "filter_tv"]);
    for d in runs.iter().flat_map(|r| &r.diagnostics) {
        diag.push(vec![
            d.run.to_string(),
            d.k.to_string(),
            d.y_prev.map_or_else(String::new, cell),
            cell(d.y),
            d.pmf_prediction_bimodal.to_string(),
            d.pmf_filter_bimodal.to_string(),
            cell(d.filter_tv),
        ])?;
    }
    artifacts.add("ungm_diagnostics.csv", diag);

    artifacts.summary.push(format!("{} runs x {} steps, N={}", cfg.runs, cfg.steps, cfg.ensemble_size));
    for (name, (m, se)) in ESTIMATORS.iter().zip(bias) {
        artifacts.summary.push(format!("{name:<5} mean error {m:+.4} (se {se:.4})"));
    }
    Ok(UngmResult { runs, bias, artifacts })
}
