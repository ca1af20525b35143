use gcp_core::analytic::{critical_alpha_zero, lambda1, lambda_k_beta0, ModelParams};
use gcp_core::model_a::{
    alignment_diagnostics, constrained_sphere_fourth_moment, cov_conditional_moment_check, cov_mean_factor,
    cov_var_coefficients, logvar_random_walk_check, run_trajectory, sample_constrained_sphere, sphere_limit_check,
    step_direct, step_direct_raw, step_matrix, OpinionState,
};
use gcp_core::rng::RngStream;
use gcp_core::stats::{mean_se, ols_slope, Estimate};
use nalgebra::{DMatrix, RowDVector};

fn params(n: usize, d: usize, alpha: f64, beta: f64) -> ModelParams<f64> {
    ModelParams::new(n, d, alpha, beta).unwrap()
}

fn fixed_state() -> OpinionState {
    OpinionState::new(DMatrix::from_row_slice(4, 2, &[1.0, 0.5, -0.3, 2.0, 0.8, -1.2, -1.5, 0.1])).unwrap()
}

/// Mean and second-moment estimates of the entries of row `row` over many one-step draws.
struct RowMoments {
    mean: Vec<Estimate>,
    /// `(a, b)` entry of the centered second-moment matrix, row-major over `d x d`.
    cov: Vec<Estimate>,
}

fn row_moments(draws: &[DMatrix<f64>], row: usize) -> RowMoments {
    let d = draws[0].ncols();
    let cols: Vec<Vec<f64>> = (0..d).map(|a| draws.iter().map(|x| x[(row, a)]).collect()).collect();
    let mean: Vec<Estimate> = cols.iter().map(|c| mean_se(c)).collect();
    let mut cov = Vec::new();
    for a in 0..d {
        for b in 0..d {
            let prods: Vec<f64> =
                cols[a].iter().zip(&cols[b]).map(|(x, y)| (x - mean[a].mean) * (y - mean[b].mean)).collect();
            cov.push(mean_se(&prods));
        }
    }
    RowMoments { mean, cov }
}

fn combined_z(a: &Estimate, b: &Estimate) -> f64 {
    (a.mean - b.mean) / (a.se * a.se + b.se * b.se).sqrt()
}

#[test]
fn direct_step_matches_conditional_moments() {
    let prm = params(4, 2, 1.3, 0.3);
    let state = fixed_state();
    let mu = state.mean();
    let cov = state.cov();
    let mut rng = RngStream::new(31, 0).rng();
    let draws: Vec<DMatrix<f64>> =
        (0..100_000).map(|_| step_direct(&state, &prm, &mut rng).unwrap().x().clone()).collect();
    for row in [0, 3] {
        let m = row_moments(&draws, row);
        for a in 0..2 {
            let target = 0.3 * state.x()[(row, a)] + 0.7 * mu[a];
            assert!(m.mean[a].z(target).abs() < 4.0, "row {row}, mean {a}");
            for b in 0..2 {
                let target = prm.rho() * cov[(a, b)];
                assert!(m.cov[a * 2 + b].z(target).abs() < 4.0, "row {row}, cov ({a}, {b})");
            }
        }
    }
}

#[test]
fn noiseless_limit_contracts_to_mean() {
    let state = fixed_state();
    let next = step_direct_raw(&state, 0.0, 0.6, &mut RngStream::new(32, 0).rng());
    let mu = state.mean();
    for i in 0..4 {
        let expect = state.x().row(i) * 0.6 + &mu * 0.4;
        assert!((next.x().row(i) - expect).amax() < 1e-15);
    }
}

#[test]
fn both_step_forms_have_same_one_step_law() {
    let prm = params(4, 2, 0.9, 0.4);
    let state = fixed_state();
    let mut a = RngStream::new(33, 0).rng();
    let mut b = RngStream::new(33, 1).rng();
    let direct: Vec<_> = (0..100_000).map(|_| step_direct(&state, &prm, &mut a).unwrap().x().clone()).collect();
    let matrix: Vec<_> = (0..100_000).map(|_| step_matrix(&state, &prm, &mut b).unwrap().x().clone()).collect();
    for row in 0..4 {
        let (u, v) = (row_moments(&direct, row), row_moments(&matrix, row));
        for k in 0..2 {
            assert!(combined_z(&u.mean[k], &v.mean[k]).abs() < 4.0, "row {row}, mean {k}");
        }
        for k in 0..4 {
            assert!(combined_z(&u.cov[k], &v.cov[k]).abs() < 4.0, "row {row}, cov {k}");
        }
    }
}

#[test]
fn mean_increment_is_centered_with_scaled_covariance() {
    let prm = params(4, 2, 1.0, 0.2);
    let state = fixed_state();
    let mu = state.mean();
    let cov = state.cov();
    let mut rng = RngStream::new(34, 0).rng();
    let incs: Vec<RowDVector<f64>> =
        (0..100_000).map(|_| step_matrix(&state, &prm, &mut rng).unwrap().mean() - &mu).collect();
    let scale = prm.rho() / prm.n as f64;
    for a in 0..2 {
        let xs: Vec<f64> = incs.iter().map(|v| v[a]).collect();
        assert!(mean_se(&xs).z(0.0).abs() < 4.0);
        for b in 0..2 {
            let prods: Vec<f64> = incs.iter().map(|v| v[a] * v[b]).collect();
            assert!(mean_se(&prods).z(scale * cov[(a, b)]).abs() < 4.0, "({a}, {b})");
        }
    }
}

#[test]
fn centered_columns_stay_centered() {
    let prm = params(6, 3, 2.0, 0.1);
    let mut rng = RngStream::new(35, 0).rng();
    let mut state = OpinionState::standard_normal(6, 3, &mut rng).unwrap();
    for _ in 0..200 {
        state = step_matrix(&state, &prm, &mut rng).unwrap();
        let c = state.centered();
        assert!(c.row_sum().amax() < 1e-10 * c.amax().max(1.0));
    }
}

#[test]
fn covariance_conditional_mean_and_derived_variance() {
    let prm = params(4, 2, 1.0, 0.3);
    let report = cov_conditional_moment_check(&fixed_state(), &prm, 100_000, &mut RngStream::new(36, 0).rng()).unwrap();
    assert_eq!(report.entries.len(), 3);
    assert!(report.max_abs_mean_z() < 4.0, "mean z = {}", report.max_abs_mean_z());
    assert!(report.max_abs_var_z_derived() < 4.0, "variance z = {}", report.max_abs_var_z_derived());
}

#[test]
fn variance_forms_coincide_at_half_self_confidence() {
    let prm = params(4, 2, 1.0, 0.5);
    let (printed, derived) = cov_var_coefficients(&prm);
    assert!((printed - derived).abs() < 1e-15);
    let report = cov_conditional_moment_check(&fixed_state(), &prm, 100_000, &mut RngStream::new(37, 0).rng()).unwrap();
    assert!(report.max_abs_mean_z() < 4.0);
    assert!(report.max_abs_var_z_printed() < 4.0, "variance z = {}", report.max_abs_var_z_printed());
}

#[test]
fn covariance_mean_factor_without_self_confidence() {
    for n in [3, 4, 10] {
        assert!((cov_mean_factor(&params(n, 1, 1.0, 0.0)) - (n as f64 - 1.0) / n as f64).abs() < 1e-15);
    }
}

#[test]
fn log_variance_walk_drift_and_independence() {
    let prm = params(5, 1, 1.0, 0.0);
    let mut rng = RngStream::new(38, 0).rng();
    let x0 = OpinionState::standard_normal(5, 1, &mut rng).unwrap();
    let rec = run_trajectory(&prm, &x0, 100_000, &mut rng, 1).unwrap();
    let report = logvar_random_walk_check(&rec, &prm).unwrap();
    assert!((report.expected - 2.0 * lambda1(&prm).unwrap()).abs() < 1e-15);
    assert!(report.z[0].abs() < 3.0, "drift z = {}", report.z[0]);
    assert!(report.lag1_z[0].abs() < 4.0, "lag-1 z = {}", report.lag1_z[0]);
}

#[test]
fn log_variance_walk_is_driftless_at_criticality() {
    let prm = params(5, 2, critical_alpha_zero::<f64>(5).unwrap(), 0.0);
    let mut rng = RngStream::new(39, 0).rng();
    let x0 = OpinionState::standard_normal(5, 2, &mut rng).unwrap();
    let rec = run_trajectory(&prm, &x0, 100_000, &mut rng, 1).unwrap();
    let report = logvar_random_walk_check(&rec, &prm).unwrap();
    assert!(report.expected.abs() < 1e-12);
    for j in 0..2 {
        assert!(report.increments[j].z(0.0).abs() < 3.0, "topic {j}: z = {}", report.increments[j].z(0.0));
    }
}

#[test]
fn subcritical_runs_reach_consensus() {
    let prm = params(5, 2, 0.5 * critical_alpha_zero::<f64>(5).unwrap(), 0.0);
    let mut rng = RngStream::new(40, 0).rng();
    let x0 = OpinionState::standard_normal(5, 2, &mut rng).unwrap();
    let rec = run_trajectory(&prm, &x0, 2000, &mut rng, 100).unwrap();
    assert_eq!(rec.len(), 21);
    assert!(rec.diameters[20] < 1e-6 * rec.diameters[0]);
    assert!(rec.truncated_at.is_none());
}

#[test]
fn supercritical_diameter_grows_at_top_exponent() {
    let prm = params(5, 2, 2.0 * critical_alpha_zero::<f64>(5).unwrap(), 0.0);
    let target = lambda1(&prm).unwrap();
    let mut rng = RngStream::new(41, 0).rng();
    let x0 = OpinionState::standard_normal(5, 2, &mut rng).unwrap();
    let rec = run_trajectory(&prm, &x0, 5000, &mut rng, 10).unwrap();
    let (t, y): (Vec<f64>, Vec<f64>) =
        rec.times.iter().zip(&rec.log_diameters).filter(|(t, _)| **t >= 200).map(|(t, y)| (*t as f64, *y)).unzip();
    let slope = ols_slope(&t, &y);
    assert!((slope - target).abs() < 0.15 * target, "slope {slope}, lambda1 {target}");
}

#[test]
fn alignment_rate_matches_spectral_gap() {
    let prm = params(10, 2, 1.0, 0.0);
    let gap = lambda_k_beta0(1.0, 10, 1).unwrap() - lambda_k_beta0(1.0, 10, 2).unwrap();
    let slopes: Vec<f64> = (0..8)
        .map(|r| {
            let mut rng = RngStream::new(42, r).rng();
            let x0 = OpinionState::standard_normal(10, 2, &mut rng).unwrap();
            let rec = run_trajectory(&prm, &x0, 2000, &mut rng, 10).unwrap();
            let (t, y): (Vec<f64>, Vec<f64>) = rec
                .times
                .iter()
                .zip(&rec.log_eig_ratios)
                .filter(|(t, _)| **t >= 200)
                .map(|(t, y)| (*t as f64, *y))
                .unzip();
            ols_slope(&t, &y)
        })
        .collect();
    let slope = slopes.iter().sum::<f64>() / slopes.len() as f64;
    assert!((slope + 2.0 * gap).abs() < 0.25 * 2.0 * gap, "slope {slope}, predicted {}", -2.0 * gap);
}

#[test]
fn long_runs_align_along_one_direction() {
    let prm = params(6, 3, 1.0, 0.2);
    let mut rng = RngStream::new(43, 0).rng();
    let x0 = OpinionState::standard_normal(6, 3, &mut rng).unwrap();
    let rec = run_trajectory(&prm, &x0, 2000, &mut rng, 2000).unwrap();
    let last = rec.len() - 1;
    assert!(rec.log_eig_ratios[last] < (1e-6f64).ln());
    assert!(rec.topic_correlations[last].iter().all(|c| c.abs() > 0.999));
}

#[test]
fn alignment_diagnostics_need_two_topics() {
    let x = DMatrix::from_column_slice(3, 1, &[1.0, 2.0, 4.0]);
    assert!(alignment_diagnostics(&OpinionState::new(x).unwrap()).is_err());
}

#[test]
fn constrained_sphere_sampler_matches_fourth_moment() {
    let n = 5;
    let mut rng = RngStream::new(44, 0).rng();
    let xs: Vec<f64> = (0..200_000).map(|_| sample_constrained_sphere(n, &mut rng).unwrap()[2].powi(4)).collect();
    assert!(mean_se(&xs).z(constrained_sphere_fourth_moment(n)).abs() < 4.0);
}

#[test]
fn normalized_positions_are_uniform_on_constrained_sphere() {
    let prm = params(5, 2, 1.0, 0.0);
    let report = sphere_limit_check(&prm, 2000, 500, RngStream::new(45, 0)).unwrap();
    assert_eq!(report.inconclusive, 0);
    assert!(report.max_abs_coordinate_sum < 1e-10);
    let q4 = constrained_sphere_fourth_moment(5);
    for i in 0..5 {
        assert!(report.second_moments[i].z(0.2).abs() < 4.0, "coordinate {i}");
        assert!(report.fourth_moments[i].z(q4).abs() < 4.0, "coordinate {i}");
    }
}

#[test]
fn one_step_law_is_affine_equivariant() {
    let prm = params(4, 2, 1.1, 0.35);
    let state = fixed_state();
    let u = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, -1.0, 1.5]);
    let shift = RowDVector::from_vec(vec![3.0, -7.0]);
    let mut moved = state.x() * &u;
    for mut row in moved.row_iter_mut() {
        row += &shift;
    }
    let moved = OpinionState::new(moved).unwrap();
    let mut a = RngStream::new(46, 0).rng();
    let mut b = RngStream::new(46, 1).rng();
    let transformed: Vec<DMatrix<f64>> = (0..100_000)
        .map(|_| {
            let mut y = step_direct(&state, &prm, &mut a).unwrap().x() * &u;
            for mut row in y.row_iter_mut() {
                row += &shift;
            }
            y
        })
        .collect();
    let direct: Vec<DMatrix<f64>> =
        (0..100_000).map(|_| step_direct(&moved, &prm, &mut b).unwrap().x().clone()).collect();
    for row in [0, 2] {
        let (p, q) = (row_moments(&transformed, row), row_moments(&direct, row));
        for k in 0..2 {
            assert!(combined_z(&p.mean[k], &q.mean[k]).abs() < 4.0, "row {row}, mean {k}");
        }
        for k in 0..4 {
            assert!(combined_z(&p.cov[k], &q.cov[k]).abs() < 4.0, "row {row}, cov {k}");
        }
    }
}

#[test]
fn trajectories_are_reproducible() {
    let prm = params(5, 2, 1.0, 0.3);
    let run = || {
        let mut rng = RngStream::new(47, 2).rng();
        let x0 = OpinionState::standard_normal(5, 2, &mut rng).unwrap();
        run_trajectory(&prm, &x0, 500, &mut rng, 7).unwrap()
    };
    assert_eq!(run(), run());
}
