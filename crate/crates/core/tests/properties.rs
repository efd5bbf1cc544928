use enkf::ensemble::{enkf_gain_ls, enkf_gain_model, ensemble_cov, lorenz_taper, sqrt_enkf_update, Anomalies};
use enkf::kalman::{kf_gain, kf_measurement_update, kf_sequential_update, kf_update, GaussianBelief};
use enkf::math::{cholesky, hadamard, numerical_rank, qr_triangular_sqrt, relative_error, solve_spd, symmetrize};
use enkf::models::LinearMeasurement;
use enkf::{Matrix, RngStream, Vector};
use proptest::prelude::*;

fn spd(n: usize, rng: &mut RngStream) -> Matrix {
    let g = rng.normal_matrix(n, n + 2);
    symmetrize(&(&g * g.transpose() + Matrix::identity(n, n) * 0.1))
}

fn diagonal_r(m: usize, rng: &mut RngStream) -> Matrix {
    Matrix::from_diagonal(&Vector::from_fn(m, |_, _| 0.1 + rng.uniform() * 2.0))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn joseph_form_stays_psd_for_any_gain(seed in any::<u64>(), n in 1usize..6, m in 1usize..4) {
        let mut rng = RngStream::new(seed, 0);
        let belief = GaussianBelief::new(rng.normal_matrix(n, 1).column(0).into_owned(), spd(n, &mut rng)).unwrap();
        let obs = LinearMeasurement::new(rng.normal_matrix(m, n), spd(m, &mut rng)).unwrap();
        let mut out = kf_gain(&belief, &obs).unwrap();
        out.k = rng.normal_matrix(n, m) * 3.0;
        let post = kf_measurement_update(&belief, &out, &Vector::zeros(m), &obs);
        let min_eig = post.cov.clone().symmetric_eigen().eigenvalues.min();
        prop_assert!(min_eig >= -1e-10 * post.cov.norm());
        prop_assert_eq!(&post.cov, &post.cov.transpose());
    }

    #[test]
    fn sequential_equals_batch_with_diagonal_noise(seed in any::<u64>(), n in 1usize..7, m in 1usize..6) {
        let mut rng = RngStream::new(seed, 1);
        let belief = GaussianBelief::new(rng.normal_matrix(n, 1).column(0).into_owned(), spd(n, &mut rng)).unwrap();
        let obs = LinearMeasurement::new(rng.normal_matrix(m, n), diagonal_r(m, &mut rng)).unwrap();
        let y = rng.normal_matrix(m, 1).column(0).into_owned();
        let a = kf_update(&belief, &y, &obs).unwrap();
        let b = kf_sequential_update(&belief, &y, &obs).unwrap();
        prop_assert!(relative_error(&b.cov, &a.cov) < 1e-9);
        prop_assert!((&b.mean - &a.mean).norm() <= 1e-9 * a.mean.norm().max(1.0));
    }

    #[test]
    fn qr_root_matches_cholesky_gram(seed in any::<u64>(), m in 1usize..6, extra in 0usize..6) {
        let mut rng = RngStream::new(seed, 2);
        let w = rng.normal_matrix(m, m + extra + 1);
        let t = qr_triangular_sqrt(&w).unwrap();
        let gram = symmetrize(&(&w * w.transpose()));
        prop_assert!(relative_error(&(&t * t.transpose()), &gram) < 1e-10);
        prop_assert!(relative_error(&t, cholesky(&gram).unwrap().lower()) < 1e-8);
    }

    #[test]
    fn spd_solve_residual(seed in any::<u64>(), n in 1usize..8) {
        let mut rng = RngStream::new(seed, 3);
        let a = spd(n, &mut rng);
        let b = rng.normal_matrix(n, 2);
        let x = solve_spd(&a, &b).unwrap();
        prop_assert!(relative_error(&(&a * x), &b) < 1e-9);
    }

    #[test]
    fn square_root_update_identity(seed in any::<u64>(), n in 1usize..7, m in 1usize..5, members in 3usize..25) {
        let mut rng = RngStream::new(seed, 4);
        let x = Anomalies::center(&rng.normal_matrix(n, members));
        let h = rng.normal_matrix(m, n);
        let z = x.map(&h);
        let r = spd(m, &mut rng);
        let out = sqrt_enkf_update(&x, &z, &r).unwrap();
        let scale = 1.0 / (members as f64 - 1.0);
        let s = symmetrize(&(z.matrix() * z.matrix().transpose() * scale + &r));
        let pi = Matrix::identity(members, members) - z.matrix().transpose() * solve_spd(&s, z.matrix()).unwrap() * scale;
        let expect = x.matrix() * pi * x.matrix().transpose();
        let gram = out.matrix() * out.matrix().transpose();
        prop_assert!(relative_error(&gram, &expect) < 1e-9);
        for row in out.matrix().row_iter() {
            prop_assert!(row.sum().abs() < 1e-10 * x.matrix().amax().max(1.0));
        }
        let g = enkf_gain_model(&x, &z, &r).unwrap();
        prop_assert!(relative_error(&(&g.gain * &g.innovation_cov), &g.cross_cov) < 1e-9);
    }

    #[test]
    fn least_squares_residual_is_orthogonal(seed in any::<u64>(), n in 1usize..6, m in 1usize..5, extra in 2usize..20) {
        let mut rng = RngStream::new(seed, 5);
        let members = m + extra;
        let x = Anomalies::center(&rng.normal_matrix(n, members));
        let y = Anomalies::center(&rng.normal_matrix(m, members));
        let g = enkf_gain_ls(&x, &y).unwrap();
        let residual = y.matrix().transpose() * g.gain.transpose() - x.matrix().transpose();
        let proj = y.matrix() * residual;
        prop_assert!(proj.amax() <= 1e-8 * x.matrix().amax().max(1.0) * members as f64);
    }

    #[test]
    fn tapering_raises_rank(seed in any::<u64>(), members in 2usize..10) {
        let mut rng = RngStream::new(seed, 6);
        let n = 24;
        let x = Anomalies::center(&rng.normal_matrix(n, members));
        let p = ensemble_cov(&x);
        let raw = numerical_rank(&p, 1e-10);
        prop_assert!(raw < members);
        let tapered = hadamard(&lorenz_taper(n, 3.0).unwrap().dense_matrix(), &p).unwrap();
        prop_assert!(numerical_rank(&tapered, 1e-10) > raw);
    }
}

#[test]
fn sample_covariance_converges() {
    let mut rng = RngStream::new(9, 9);
    let cov = spd(3, &mut rng);
    let factor = cholesky(&cov).unwrap().into_inner();
    let mean = Vector::from_vec(vec![1.0, -2.0, 0.5]);
    let mut errors = Vec::new();
    for &count in &[1_000usize, 100_000] {
        let s = enkf::math::sample_mvn(&mean, &factor, &mut rng, count).unwrap();
        let est = ensemble_cov(&Anomalies::center(&s));
        errors.push(relative_error(&est, &cov));
    }
    assert!(errors[1] < 0.02 && errors[1] < errors[0], "{errors:?}");
}
