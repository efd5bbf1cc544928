//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero when any criterion fails.

use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use enkf::ensemble::{
    enkf_analysis, enkf_time_update, sqrt_enkf_update, tapered_gain, Anomalies, EnkfOptions, Ensemble, GainMode,
    TaperSpec, TaperVariant,
};
use enkf::kalman::{batch_smoother, kf_sequential_update, kf_update, rts_smoother, GaussianBelief};
use enkf::models::{build_trajectory_batch, cv_tracker_model, scalar_model, simulate, LinearMeasurement, Measurement, Transition};
use enkf::{Matrix, RngStream, Vector};
use enkf_lab::experiments::lorenz::{run_lorenz_experiment, TABLE1};
use enkf_lab::experiments::scalar::{kf_variances, run_scalar_experiment, REPORTED_VARIANCE};
use enkf_lab::experiments::ungm::{run_ungm_experiment, ESTIMATORS};
use enkf_lab::{mc_driver, run_experiment, ExperimentConfig, ExperimentKind};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

struct Criterion {
    id: u32,
    name: &'static str,
    budget: Option<Duration>,
    check: fn() -> Outcome,
}

fn rel(a: &Matrix, b: &Matrix) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

fn rel_vec(a: &Vector, b: &Vector) -> f64 {
    (a - b).norm() / b.norm().max(f64::MIN_POSITIVE)
}

fn random_spd(n: usize, rng: &mut RngStream) -> Matrix {
    let a = rng.normal_matrix(n, n);
    &a * a.transpose() + Matrix::identity(n, n) * 0.1
}

fn kf_fixed_point() -> Outcome {
    let p = kf_variances(&scalar_model(), 100).expect("kalman recursion");
    let bad: Vec<usize> = (4..=100).filter(|&k| format!("{:.4}", p[k]) != "0.0092").collect();
    outcome(bad.is_empty(), format!("P_k|k = {:.6} for k = 4..100, mismatched steps {bad:?}", p[100]))
}

fn scalar_bias_study() -> Outcome {
    let families = 20;
    let mut fixed_ok = 0;
    let mut sampled_ok = 0;
    let mut worst_z: f64 = 0.0;
    for f in 0..families {
        let cfg = ExperimentConfig {
            seed: 5000 + f,
            ..ExperimentConfig::defaults(ExperimentKind::Scalar)
        };
        let r = run_scalar_experiment(&cfg).expect("scalar experiment");
        let fx = r.fixed_summary;
        let z = (fx.mean - REPORTED_VARIANCE).abs() / fx.std_error;
        worst_z = worst_z.max(z);
        if z <= 3.0 && fx.median < fx.mean {
            fixed_ok += 1;
        }
        if r.sampled_summary.median < REPORTED_VARIANCE {
            sampled_ok += 1;
        }
    }
    let need = (0.95 * families as f64).ceil() as u64;
    outcome(
        fixed_ok >= need && sampled_ok == families,
        format!(
            "fixed gain unbiased with median < mean in {fixed_ok}/{families} families (need {need}, worst |z| {worst_z:.2}); sampled-gain median < 0.0092 in {sampled_ok}/{families}"
        ),
    )
}

fn log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    let mx = lx.iter().sum::<f64>() / lx.len() as f64;
    let my = ly.iter().sum::<f64>() / ly.len() as f64;
    let num: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let den: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    num / den
}

fn large_n_convergence() -> Outcome {
    let model = scalar_model();
    let steps = 10;
    let traj = simulate(&model, steps, &mut RngStream::new(77, 0));
    let p_exact = kf_variances(&model, steps).expect("kalman recursion")[steps];
    let opts = EnkfOptions {
        gain: GainMode::Sampled,
        ..EnkfOptions::default()
    };
    let sizes = [100usize, 1_000, 10_000, 100_000];
    let runs = 40;
    let mut rms = Vec::new();
    for (i, &n) in sizes.iter().enumerate() {
        let dev = mc_driver(runs, 900 + i as u64 * 1000, 0, |_, mut rng| {
            let mut x = Ensemble::sample(model.initial_state(), n, &mut rng)?;
            for k in 1..=steps {
                let pred = enkf_time_update(&x, &model, &mut rng, k - 1)?;
                x = enkf_analysis(&pred, traj.measurement(k), &model as &dyn Measurement, &opts, &mut rng)?;
            }
            Ok(x.cov()[(0, 0)] - p_exact)
        })
        .expect("ensemble runs");
        rms.push((dev.iter().map(|d| d * d).sum::<f64>() / runs as f64).sqrt());
    }
    let slope = log_slope(&sizes.map(|n| n as f64), &rms);
    outcome(
        (slope + 0.5).abs() <= 0.1,
        format!("slope {slope:.3}, rms |P_bar - P| = {:?}", rms.iter().map(|v| format!("{v:.2e}")).collect::<Vec<_>>()),
    )
}

fn batch_equals_rts() -> Outcome {
    let model = cv_tracker_model();
    let steps = 49;
    let traj = simulate(&model, steps, &mut RngStream::new(49, 0));
    let batch = build_trajectory_batch(&model, steps).expect("batch prior");
    let exact = batch_smoother(&batch, &traj.measurements).expect("batch smoother");
    let ys: Vec<_> = traj.measurements.iter().cloned().map(Some).collect();
    let rts = rts_smoother(&model, &ys).expect("rts");
    let mut worst_mean: f64 = 0.0;
    let mut worst_cov: f64 = 0.0;
    for (k, r) in rts.iter().enumerate() {
        let m = exact.marginal(batch.block(k));
        worst_mean = worst_mean.max(rel_vec(&r.mean, &m.mean));
        worst_cov = worst_cov.max(rel(&r.cov, &m.cov));
    }
    outcome(
        batch.dim() == 200 && worst_mean < 1e-8 && worst_cov < 1e-8,
        format!("n = {}, max rel. mean diff {worst_mean:.2e}, max rel. cov diff {worst_cov:.2e}", batch.dim()),
    )
}

fn sequential_equals_batch() -> Outcome {
    let mut rng = RngStream::new(505, 0);
    let mut worst: f64 = 0.0;
    for case in 0..100 {
        let n = 2 + case % 7;
        let m = 1 + (case * 3) % 6;
        let p = random_spd(n, &mut rng);
        let mean = rng.normal_matrix(n, 1).column(0).into_owned();
        let h = rng.normal_matrix(m, n);
        let r = Matrix::from_diagonal(&Vector::from_fn(m, |_, _| 0.05 + rng.uniform()));
        let y = rng.normal_matrix(m, 1).column(0).into_owned();
        let belief = GaussianBelief::new(mean, p).expect("belief");
        let obs = LinearMeasurement::new(h, r).expect("measurement");
        let a = kf_update(&belief, &y, &obs).expect("batch update");
        let b = kf_sequential_update(&belief, &y, &obs).expect("sequential update");
        worst = worst.max(rel_vec(&b.mean, &a.mean)).max(rel(&b.cov, &a.cov));
    }
    outcome(worst < 1e-9, format!("max relative difference {worst:.2e} over 100 models"))
}

fn square_root_identity() -> Outcome {
    let mut rng = RngStream::new(606, 0);
    let mut worst_gram: f64 = 0.0;
    let mut worst_sum: f64 = 0.0;
    for case in 0..50 {
        let n = 3 + case % 8;
        let size = 4 + (case * 7) % 27;
        let m = 1 + (case * 5) % 6;
        let x = Anomalies::center(&rng.normal_matrix(n, size));
        let h = rng.normal_matrix(m, n);
        let z = x.map(&h);
        let r = random_spd(m, &mut rng);
        let post = sqrt_enkf_update(&x, &z, &r).expect("square-root update");
        let scale = 1.0 / (size as f64 - 1.0);
        let s = z.matrix() * z.matrix().transpose() * scale + &r;
        let s_inv = s.try_inverse().expect("invertible S");
        let pi = Matrix::identity(size, size) - z.matrix().transpose() * s_inv * z.matrix() * scale;
        let expect = x.matrix() * pi * x.matrix().transpose();
        let gram = post.matrix() * post.matrix().transpose();
        worst_gram = worst_gram.max(rel(&gram, &expect));
        for row in post.matrix().row_iter() {
            worst_sum = worst_sum.max(row.sum().abs());
        }
    }
    outcome(
        worst_gram < 1e-9 && worst_sum < 1e-10,
        format!("max Gram rel. error {worst_gram:.2e}, max |row sum| {worst_sum:.2e}"),
    )
}

fn lorenz_table1() -> Outcome {
    let base = ExperimentConfig::defaults(ExperimentKind::Lorenz96);
    let mut passed = true;
    let mut parts = Vec::new();
    for row in TABLE1 {
        let cfg = row.config(&base);
        let r = run_lorenz_experiment(&cfg).expect("lorenz run");
        let eps = r.runs[0].average;
        let ok = match row.reported {
            Some(v) => (eps - v).abs() <= 0.05,
            None => eps > 1.0,
        };
        passed &= ok;
        let want = row.reported.map_or_else(|| ">1".to_string(), |v| format!("{v:.2}"));
        parts.push(format!(
            "N={} c={} taper={}: {eps:.3} (reported {want}){}",
            row.ensemble_size,
            row.inflation,
            if row.taper { "yes" } else { "no" },
            if ok { "" } else { " MISS" }
        ));
    }
    outcome(passed, parts.join("; "))
}

fn ungm_qualitative() -> Outcome {
    let cfg = ExperimentConfig::defaults(ExperimentKind::Ungm);
    let r = run_ungm_experiment(&cfg).expect("ungm experiment");
    let informative: Vec<_> = r.diagnostics().filter(|d| d.y_prev.is_some_and(|y| y > 0.5)).collect();
    let total = informative.len() as f64;
    let bimodal = informative.iter().filter(|d| d.pmf_prediction_bimodal).count() as f64 / total;
    let separated = informative.iter().filter(|d| d.filter_tv > 0.1).count() as f64 / total;
    let snapshot_bimodal = r.runs[0]
        .diagnostics
        .iter()
        .filter(|d| (120..=125).contains(&d.k))
        .any(|d| d.pmf_prediction_bimodal);
    let tv150 = r.runs[0].diagnostics.iter().find(|d| d.k == 150).map_or(f64::NAN, |d| d.filter_tv);
    let unbiased = r.bias.iter().all(|(m, se)| m.abs() <= 3.0 * se);
    let bias: Vec<String> = ESTIMATORS
        .iter()
        .zip(r.bias)
        .map(|(name, (m, se))| format!("{name} {m:+.3}/{se:.3}"))
        .collect();
    outcome(
        bimodal >= 0.5 && separated >= 0.5 && snapshot_bimodal && tv150 > 0.1 && unbiased,
        format!(
            "{} steps after y > 0.5: PMF prediction bimodal {:.0}%, EnKF-vs-PMF TV > 0.1 {:.0}%; TV at k=150 {tv150:.2}; bias/se {}",
            informative.len(),
            100.0 * bimodal,
            100.0 * separated,
            bias.join(", ")
        ),
    )
}

fn rank_one_structure() -> Outcome {
    let mut rng = RngStream::new(909, 0);
    let (d1, d2, d3) = (3, 4, 5);
    let n = d1 + d2 + d3;
    let mut worst_row: f64 = 0.0;
    let mut worst_diff: f64 = 0.0;
    for _ in 0..20 {
        let x = Anomalies::center(&rng.normal_matrix(n, 8));
        let mut h = Matrix::zeros(2, n);
        h.view_mut((0, 0), (2, d1)).copy_from(&rng.normal_matrix(2, d1));
        let meas = LinearMeasurement::new(h, random_spd(2, &mut rng)).expect("measurement");
        let r = Vector::from_fn(n, |i, _| if i < d1 + d2 { 1.0 } else { 0.0 });
        let taper = TaperSpec::rank_one(r).expect("rank-one taper");
        let via_rows = tapered_gain(&x, &taper, TaperVariant::Covariance, &meas).expect("rank-one gain").estimate.gain;
        let via_dense = tapered_gain(&x, &taper.to_dense(), TaperVariant::Covariance, &meas)
            .expect("dense gain")
            .estimate
            .gain;
        worst_row = worst_row.max(via_rows.rows(d1 + d2, d3).amax());
        worst_diff = worst_diff.max(rel(&via_dense, &via_rows));
    }
    outcome(
        worst_row == 0.0 && worst_diff < 1e-10,
        format!("max |K| on the uncorrelated block {worst_row:e}, dense vs diag(r) rel. diff {worst_diff:.2e}"),
    )
}

fn files_in(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = std::fs::read_dir(dir)
        .expect("output dir")
        .map(|e| {
            let e = e.expect("entry");
            (e.file_name().to_string_lossy().into_owned(), std::fs::read(e.path()).expect("read"))
        })
        .collect();
    out.sort();
    out
}

fn determinism() -> Outcome {
    let root = tempfile::tempdir().expect("temp dir");
    let configs = [
        ExperimentConfig {
            runs: 2000,
            ..ExperimentConfig::defaults(ExperimentKind::Scalar)
        },
        ExperimentConfig {
            runs: 4,
            steps: 40,
            ..ExperimentConfig::defaults(ExperimentKind::Ungm)
        },
        ExperimentConfig::defaults(ExperimentKind::Batch),
        ExperimentConfig {
            runs: 3,
            steps: 300,
            taper: true,
            ..ExperimentConfig::defaults(ExperimentKind::Lorenz96)
        },
    ];
    let mut compared = 0;
    let mut mismatched = Vec::new();
    for cfg in configs {
        let mut outputs = Vec::new();
        for threads in [1, 4] {
            let dir = root.path().join(format!("{}-{threads}", cfg.experiment));
            let run = ExperimentConfig {
                threads,
                out: dir.clone(),
                ..cfg.clone()
            };
            run_experiment(&run).expect("experiment").write(&dir).expect("write");
            outputs.push(files_in(&dir));
        }
        for ((name, a), (_, b)) in outputs[0].iter().zip(&outputs[1]) {
            compared += 1;
            if a != b {
                mismatched.push(format!("{}/{name}", cfg.experiment));
            }
        }
        if outputs[0].len() != outputs[1].len() {
            mismatched.push(format!("{}: file sets differ", cfg.experiment));
        }
    }
    outcome(mismatched.is_empty(), format!("{compared} files compared across 1 and 4 threads, mismatches {mismatched:?}"))
}

fn main() -> ExitCode {
    let criteria = [
        Criterion { id: 1, name: "scalar KF fixed point", budget: Some(Duration::from_secs(1)), check: kf_fixed_point },
        Criterion { id: 2, name: "scalar EnKF variance bias", budget: Some(Duration::from_secs(30)), check: scalar_bias_study },
        Criterion { id: 3, name: "large-N convergence", budget: Some(Duration::from_secs(120)), check: large_n_convergence },
        Criterion { id: 4, name: "batch smoother equals RTS", budget: Some(Duration::from_secs(1)), check: batch_equals_rts },
        Criterion { id: 5, name: "sequential equals batch KF", budget: Some(Duration::from_secs(5)), check: sequential_equals_batch },
        Criterion { id: 6, name: "square-root identity", budget: None, check: square_root_identity },
        Criterion { id: 7, name: "Lorenz-96 configuration grid", budget: None, check: lorenz_table1 },
        Criterion { id: 8, name: "UNGM non-convergence", budget: None, check: ungm_qualitative },
        Criterion { id: 9, name: "rank-one taper structure", budget: None, check: rank_one_structure },
        Criterion { id: 10, name: "thread-count determinism", budget: None, check: determinism },
    ];
    let mut failures = 0;
    for c in &criteria {
        let start = Instant::now();
        let out = (c.check)();
        let elapsed = start.elapsed();
        let in_time = c.budget.is_none_or(|b| elapsed <= b);
        let passed = out.passed && in_time;
        if !passed {
            failures += 1;
        }
        let budget = match (c.budget, in_time) {
            (Some(b), false) => format!(" over budget {b:?}"),
            _ => String::new(),
        };
        println!(
            "{} [{:>2}] {:<28} {:>8.2?}{budget}  {}",
            if passed { "PASS" } else { "FAIL" },
            c.id,
            c.name,
            elapsed,
            out.detail
        );
    }
    println!("{} of {} acceptance criteria passed", criteria.len() - failures, criteria.len());
    if failures == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
