//! Trajectory smoothing as one large update of the stacked state
//! `xi = [x_0; ...; x_L]`, exact and with ensembles.

use enkf::ensemble::{enkf_analysis, EnkfOptions, Ensemble, MeasurementOrder};
use enkf::kalman::{batch_smoother, rts_smoother, GaussianBelief};
use enkf::math::relative_error;
use enkf::models::{build_trajectory_batch, cv_tracker_model, simulate, LinearModel, Measurement, TrajectoryBatch};
use enkf::{Matrix, RngStream, Vector};

use super::{require_kind, Artifacts};
use crate::config::{order_name, ExperimentConfig, ExperimentKind};
use crate::driver::{mc_driver, run_stream};
use crate::table::{cell, Table};
use crate::LabError;

const TRUTH_STREAM: u64 = 0;
const FILTER_STREAM: u64 = 1;

pub const DEFAULT_SIZES: [usize; 3] = [10, 20, 50];
pub const ORDERS: [MeasurementOrder; 3] = [MeasurementOrder::Natural, MeasurementOrder::Reverse, MeasurementOrder::Random];
/// Ensemble-vs-exact deviation counted as spurious, relative to the exact value.
pub const SPURIOUS_FACTOR: f64 = 3.0;

/// Positions `(p_x, p_y)` occupy the first two entries of each block.
const POSITION: [usize; 2] = [0, 1];

#[derive(Debug, Clone)]
pub struct EnsembleSmoothing {
    pub size: usize,
    pub order: MeasurementOrder,
    /// Processing sequence of the steps `1..=L`.
    pub sequence: Vec<usize>,
    /// Members after 0 updates, after the first update and after all.
    pub stages: [Ensemble; 3],
    /// `(L+1) x (L+1)` covariance of `p_x` over time from the final ensemble.
    pub position_cov: Matrix,
    /// Off-diagonal entries with `|ens - exact| > 3 |exact|`.
    pub spurious: usize,
}

pub struct BatchResult {
    pub batch: TrajectoryBatch,
    pub truth: Vector,
    pub exact: GaussianBelief,
    pub rts: Vec<GaussianBelief>,
    /// Largest relative difference over blocks of the batch and RTS means.
    pub rts_mean_error: f64,
    /// Largest relative difference over blocks of the batch and RTS covariances.
    pub rts_cov_error: f64,
    pub exact_position_cov: Matrix,
    pub ensembles: Vec<EnsembleSmoothing>,
    pub artifacts: Artifacts,
}

/// Covariance of component `c` of every block.
pub fn component_cov(cov: &Matrix, batch: &TrajectoryBatch, c: usize) -> Matrix {
    let l = batch.steps() + 1;
    Matrix::from_fn(l, l, |i, j| cov[(batch.block(i).start + c, batch.block(j).start + c)])
}

pub fn count_spurious(ens: &Matrix, exact: &Matrix) -> usize {
    let mut count = 0;
    for i in 0..exact.nrows() {
        for j in 0..exact.ncols() {
            if i != j && (ens[(i, j)] - exact[(i, j)]).abs() > SPURIOUS_FACTOR * exact[(i, j)].abs() {
                count += 1;
            }
        }
    }
    count
}

/// `size` simulated trajectories stacked as columns.
fn trajectory_ensemble(model: &LinearModel, batch: &TrajectoryBatch, size: usize, rng: &mut RngStream) -> Result<Ensemble, LabError> {
    let cols = (0..size)
        .map(|_| batch.stack(&simulate(model, batch.steps(), rng).states))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Ensemble::new(Matrix::from_columns(&cols))?)
}

fn sequence(order: MeasurementOrder, steps: usize, rng: &mut RngStream) -> Vec<usize> {
    match order {
        MeasurementOrder::Natural => (1..=steps).collect(),
        MeasurementOrder::Reverse => (1..=steps).rev().collect(),
        MeasurementOrder::Random => rng.permutation(steps).into_iter().map(|k| k + 1).collect(),
    }
}

#[allow(clippy::too_many_arguments)]
fn smooth_with_ensemble(
    cfg: &ExperimentConfig,
    model: &LinearModel,
    batch: &TrajectoryBatch,
    ys: &[Vector],
    exact_cov: &Matrix,
    size: usize,
    order: MeasurementOrder,
    rng: RngStream,
) -> Result<EnsembleSmoothing, LabError> {
    let mut rng = rng.substream(FILTER_STREAM);
    let opts = EnkfOptions {
        gain: cfg.gain,
        ..EnkfOptions::default()
    };
    let initial = trajectory_ensemble(model, batch, size, &mut rng)?;
    let sequence = sequence(order, batch.steps(), &mut rng);
    let mut x = initial.clone();
    let mut first = None;
    for &k in &sequence {
        x = enkf_analysis(&x, &ys[k - 1], batch.measurement(k) as &dyn Measurement, &opts, &mut rng)?;
        if first.is_none() {
            first = Some(x.clone());
        }
    }
    let position_cov = component_cov(&x.cov(), batch, POSITION[0]);
    let spurious = count_spurious(&position_cov, exact_cov);
    Ok(EnsembleSmoothing {
        size,
        order,
        sequence,
        stages: [initial, first.expect("at least one step"), x],
        position_cov,
        spurious,
    })
}

fn position_error(mean: &Vector, truth: &Vector, start: usize) -> f64 {
    POSITION
        .iter()
        .map(|&c| (mean[start + c] - truth[start + c]).powi(2))
        .sum::<f64>()
        .sqrt()
}

pub fn run_batch_experiment(cfg: &ExperimentConfig) -> Result<BatchResult, LabError> {
    let mut sizes = DEFAULT_SIZES.to_vec();
    sizes.push(cfg.ensemble_size);
    sizes.sort_unstable();
    sizes.dedup();
    run_batch_with(cfg, &sizes)
}

pub fn run_batch_with(cfg: &ExperimentConfig, sizes: &[usize]) -> Result<BatchResult, LabError> {
    require_kind(cfg, ExperimentKind::Batch)?;
    let model = cv_tracker_model();
    let batch = build_trajectory_batch(&model, cfg.steps)?;
    let traj = simulate(&model, cfg.steps, &mut run_stream(cfg.seed, 0).substream(TRUTH_STREAM));
    let truth = batch.stack(&traj.states)?;
    let ys = traj.measurements.clone();

    let exact = batch_smoother(&batch, &ys)?;
    let rts = rts_smoother(&model, &ys.iter().cloned().map(Some).collect::<Vec<_>>())?;
    let mut rts_mean_error: f64 = 0.0;
    let mut rts_cov_error: f64 = 0.0;
    for (k, r) in rts.iter().enumerate() {
        let m = exact.marginal(batch.block(k));
        rts_mean_error = rts_mean_error.max((&m.mean - &r.mean).norm() / m.mean.norm().max(f64::MIN_POSITIVE));
        rts_cov_error = rts_cov_error.max(relative_error(&r.cov, &m.cov));
    }
    let exact_position_cov = component_cov(&exact.cov, &batch, POSITION[0]);

    let jobs: Vec<(usize, MeasurementOrder)> = sizes.iter().flat_map(|&n| ORDERS.map(|o| (n, o))).collect();
    let ensembles = mc_driver(jobs.len(), cfg.seed, cfg.threads, |j, rng| {
        let (n, o) = jobs[j];
        smooth_with_ensemble(cfg, &model, &batch, &ys, &exact_position_cov, n, o, rng)
    })?;

    let mut artifacts = Artifacts::default();
    let l = cfg.steps + 1;
    let mut errors = Table::new(["N", "order", "k", "enkf_position_error", "smoother_position_error", "truth_px", "truth_py"]);
    let mut members = Table::new(["N", "order", "stage", "member", "k", "px", "py"]);
    let mut covs = Table::new(
        ["i", "j", "exact"]
            .into_iter()
            .map(String::from)
            .chain(ensembles.iter().map(|e| format!("N{}_{}", e.size, order_name(e.order)))),
    );
    let mut summary = Table::new(["N", "order", "augmented_dim", "position_rmse", "spurious_entries", "position_cov_rel_error"]);
    for e in &ensembles {
        let mean = e.stages[2].mean();
        let mut sq = 0.0;
        for k in 0..l {
            let start = batch.block(k).start;
            let err = position_error(&mean, &truth, start);
            sq += err * err;
            errors.push(vec![
                e.size.to_string(),
                order_name(e.order).into(),
                k.to_string(),
                cell(err),
                cell(position_error(&exact.mean, &truth, start)),
                cell(truth[start + POSITION[0]]),
                cell(truth[start + POSITION[1]]),
            ])?;
        }
        for (stage, ens) in ["prior", "first", "all"].iter().zip(&e.stages) {
            for (i, col) in ens.members().column_iter().enumerate() {
                for k in 0..l {
                    let start = batch.block(k).start;
                    members.push(vec![
                        e.size.to_string(),
                        order_name(e.order).into(),
                        stage.to_string(),
                        i.to_string(),
                        k.to_string(),
                        cell(col[start + POSITION[0]]),
                        cell(col[start + POSITION[1]]),
                    ])?;
                }
            }
        }
        summary.push(vec![
            e.size.to_string(),
            order_name(e.order).into(),
            batch.dim().to_string(),
            cell((sq / l as f64).sqrt()),
            e.spurious.to_string(),
            cell(relative_error(&e.position_cov, &exact_position_cov)),
        ])?;
    }
    for i in 0..l {
        for j in 0..l {
            let mut row = vec![i.to_string(), j.to_string(), cell(exact_position_cov[(i, j)])];
            row.extend(ensembles.iter().map(|e| cell(e.position_cov[(i, j)])));
            covs.push(row)?;
        }
    }
    artifacts.add("batch_position_errors.csv", errors);
    artifacts.add("batch_ensembles.csv", members);
    artifacts.add("batch_position_cov.csv", covs);
    artifacts.add("batch_summary.csv", summary);
    artifacts.summary = vec![
        format!("augmented dimension n = {}", batch.dim()),
        format!("batch vs RTS: mean rel. diff {rts_mean_error:.3e}, covariance rel. diff {rts_cov_error:.3e}"),
    ];
    for e in &ensembles {
        artifacts.summary.push(format!(
            "N={:<3} order={:<8} spurious position covariances: {}",
            e.size,
            order_name(e.order),
            e.spurious
        ));
    }
    Ok(BatchResult {
        batch,
        truth,
        exact,
        rts,
        rts_mean_error,
        rts_cov_error,
        exact_position_cov,
        ensembles,
        artifacts,
    })
}
