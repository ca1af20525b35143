//! Cross-module invariant suite behind the `validate` command.

use nalgebra::DMatrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::analytic::{
    classify_model_b, critical_alpha_bisect, critical_alpha_zero, lambda1, lambda_k_beta0, model_b_critical_gamma,
    rho_critical, ModelParams, RegimeKind,
};
use crate::error::Result;
use crate::harness::config::ValidateLevel;
use crate::linalg::matrix_abs;
use crate::model_a::{build_projection, cov_conditional_moment_check, OpinionState};
use crate::model_b::{cov_drift_check, gl_characteristic_exponents, DiffusionState, ModelBParams};
use crate::random_matrix::{estimate_spectrum_qr_with, sample_gaussian_matrix, sample_m};
use crate::rng::{RngStream, StreamRng};
use crate::special::{phi_closed_odd, phi_integral, phi_ode_residual, phi_series};
use crate::stats;

/// Every invariant the suite runs, as `(module, invariant)`, in report order.
pub const INVARIANTS: &[(&str, &str)] = &[
    ("special_functions", "phi_path_agreement"),
    ("special_functions", "phi_ode_residual"),
    ("analytic_lyapunov", "critical_alpha_beta0"),
    ("analytic_lyapunov", "rho_cr_decreasing"),
    ("random_matrix_mc", "sampler_mean"),
    ("random_matrix_mc", "spectrum_beta0"),
    ("random_matrix_mc", "spectrum_top"),
    ("model_a", "projection_orthonormal"),
    ("model_a", "cov_conditional_mean"),
    ("model_a", "cov_conditional_variance"),
    ("model_b", "cov_drift"),
    ("model_b", "gl_top_exponent"),
    ("model_b", "critical_gamma"),
    ("linalg", "abs_lipschitz"),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub module: String,
    pub invariant: String,
    pub observed: f64,
    pub expected: f64,
    /// Standard error of `observed`, for statistical checks.
    pub se: Option<f64>,
    /// Allowed `|observed - expected|`.
    pub tolerance: f64,
    pub passed: bool,
    pub detail: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub level: ValidateLevel,
    pub seed: u64,
    pub checks: Vec<Check>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }
}

struct Outcome {
    observed: f64,
    expected: f64,
    se: Option<f64>,
    tolerance: f64,
    detail: Option<String>,
}

impl Outcome {
    fn exact(observed: f64, expected: f64, tolerance: f64) -> Self {
        Self { observed, expected, se: None, tolerance, detail: None }
    }

    fn statistical(observed: f64, expected: f64, se: f64, tolerance: f64) -> Self {
        Self { observed, expected, se: Some(se), tolerance, detail: None }
    }

    fn with_detail(mut self, detail: String) -> Self {
        self.detail = Some(detail);
        self
    }
}

struct Sizes {
    spectrum_steps: usize,
    sampler_draws: usize,
    moment_replicas: usize,
    gl_paths: usize,
    gl_time: f64,
    lipschitz_pairs: usize,
}

fn sizes(level: ValidateLevel) -> Sizes {
    match level {
        ValidateLevel::Quick => Sizes {
            spectrum_steps: 20_000,
            sampler_draws: 2_000,
            moment_replicas: 10_000,
            gl_paths: 10,
            gl_time: 10.0,
            lipschitz_pairs: 200,
        },
        ValidateLevel::Full => Sizes {
            spectrum_steps: 200_000,
            sampler_draws: 20_000,
            moment_replicas: 100_000,
            gl_paths: 100,
            gl_time: 30.0,
            lipschitz_pairs: 1_000,
        },
    }
}

fn phi_path_agreement() -> Result<Outcome> {
    let xs = [0.0, 0.1, 1.0, 5.0, 20.0, 50.0];
    let mut worst = 0.0_f64;
    for twice_m in 1..=12 {
        let m = twice_m as f64 / 2.0;
        for &x in &xs {
            let s = phi_series(m, x)?.value;
            worst = worst.max((s - phi_integral(m, x)?).abs());
            if twice_m % 2 == 0 {
                worst = worst.max((s - phi_closed_odd(m, x)?).abs());
            }
        }
    }
    Ok(Outcome::exact(worst, 0.0, 1e-9))
}

fn phi_ode() -> Result<Outcome> {
    let mut worst = 0.0_f64;
    for twice_m in 1..=12 {
        for x in [0.0, 0.1, 1.0, 5.0, 20.0, 50.0] {
            worst = worst.max(phi_ode_residual(twice_m as f64 / 2.0, x)?.abs());
        }
    }
    Ok(Outcome::exact(worst, 0.0, 1e-7))
}

fn critical_beta0() -> Result<Outcome> {
    let mut worst = 0.0_f64;
    for n in 3..=12 {
        let exact: f64 = critical_alpha_zero(n)?;
        worst = worst.max((critical_alpha_bisect(0.0, n, 1e-12)? - exact).abs());
    }
    Ok(Outcome::exact(worst, 0.0, 1e-8))
}

fn rho_cr_decreasing() -> Result<Outcome> {
    // largest step rho_cr(beta + 0.1) - rho_cr(beta); must be negative
    let mut worst = f64::NEG_INFINITY;
    for n in [3, 5, 9] {
        let rho: Vec<f64> = (0..10).map(|i| rho_critical(i as f64 / 10.0, n, 1e-12)).collect::<Result<_>>()?;
        for w in rho.windows(2) {
            worst = worst.max(w[1] - w[0]);
        }
    }
    let mut o = Outcome::exact(worst, 0.0, 0.0);
    if worst >= 0.0 {
        o = o.with_detail("rho_cr increases somewhere".into());
    }
    Ok(o)
}

fn sampler_mean<F>(draws: usize, rng: &mut StreamRng, sampler: &F) -> Result<Outcome>
where
    F: Fn(&ModelParams<f64>, &mut StreamRng) -> DMatrix<f64>,
{
    let p = ModelParams::new(5, 1, 1.0, 0.5)?;
    let diag: Vec<f64> =
        (0..draws).flat_map(|_| sampler(&p, rng).diagonal().iter().copied().collect::<Vec<_>>()).collect();
    let est = stats::mean_se(&diag);
    Ok(Outcome::statistical(est.mean, p.beta, est.se, 5.0 * est.se))
}

fn spectrum_beta0<F>(steps: usize, rng: &mut StreamRng, sampler: &F) -> Result<Outcome>
where
    F: Fn(&ModelParams<f64>, &mut StreamRng) -> DMatrix<f64>,
{
    let p = ModelParams::new(5, 1, 1.0, 0.0)?;
    let est = estimate_spectrum_qr_with(&p, steps, rng, |p, r| sampler(p, r))?;
    let mut worst: Option<Outcome> = None;
    for k in 1..p.n {
        let exact = lambda_k_beta0(1.0, p.n, k)?;
        let se = est.std_errors[k - 1];
        let o =
            Outcome::statistical(est.exponents[k - 1], exact, se, (4.0 * se).max(0.02)).with_detail(format!("k = {k}"));
        let excess = |o: &Outcome| (o.observed - o.expected).abs() / o.tolerance;
        if worst.as_ref().is_none_or(|w| excess(&o) > excess(w)) {
            worst = Some(o);
        }
    }
    Ok(worst.expect("at least one exponent"))
}

fn spectrum_top<F>(steps: usize, rng: &mut StreamRng, sampler: &F) -> Result<Outcome>
where
    F: Fn(&ModelParams<f64>, &mut StreamRng) -> DMatrix<f64>,
{
    let p = ModelParams::new(5, 1, 1.0, 0.5)?;
    let est = estimate_spectrum_qr_with(&p, steps, rng, |p, r| sampler(p, r))?;
    let se = est.std_errors[0];
    Ok(Outcome::statistical(est.exponents[0], lambda1(&p)?, se, (4.0 * se).max(0.02)))
}

fn projection_orthonormal() -> Result<Outcome> {
    let v = build_projection(10)?;
    let m = v.matrix();
    let gram = m * m.transpose() - DMatrix::identity(9, 9);
    let sums = m.column_sum();
    Ok(Outcome::exact(gram.amax().max(sums.amax()), 0.0, 1e-12))
}

fn cov_moments(replicas: usize, rng: &mut StreamRng) -> Result<(Outcome, Outcome)> {
    let p = ModelParams::new(4, 2, 1.0, 0.3)?;
    let x = OpinionState::standard_normal(4, 2, rng)?;
    let r = cov_conditional_moment_check(&x, &p, replicas, rng)?;
    let mean = Outcome::exact(r.max_abs_mean_z(), 0.0, 4.5).with_detail("max |z| over entries".into());
    let var = Outcome::exact(r.max_abs_var_z_derived(), 0.0, 4.5).with_detail("max |z| over entries".into());
    Ok((mean, var))
}

fn cov_drift(replicas: usize, rng: &mut StreamRng) -> Result<Outcome> {
    let p = ModelBParams::new(4, 2, 0.3, 1e-3)?;
    let z = DiffusionState::new(sample_gaussian_matrix(4, 2, rng))?;
    let r = cov_drift_check(&z, &p, replicas, rng)?;
    Ok(Outcome::exact(r.max_abs_z(), 0.0, 4.5).with_detail("max |z| over entries".into()))
}

fn gl_top(paths: usize, t_end: f64, rng: &mut StreamRng) -> Result<Outcome> {
    let top: Vec<f64> =
        (0..paths).map(|_| Ok(gl_characteristic_exponents(4, t_end, 1e-3, rng)?[0])).collect::<Result<_>>()?;
    let est = stats::mean_se(&top);
    Ok(Outcome::statistical(est.mean, 3.0, est.se, 0.45))
}

fn critical_gamma() -> Result<Outcome> {
    let g: f64 = model_b_critical_gamma(5)?;
    let at = classify_model_b(0.2, 5, 1e-12)?.kind;
    let o = Outcome::exact(g, 0.2, 1e-15);
    Ok(if at == RegimeKind::Critical { o } else { o.with_detail(format!("gamma = 0.2 classified {at}")) })
}

fn abs_lipschitz(pairs: usize, rng: &mut StreamRng) -> Result<Outcome> {
    let mut worst = 0.0_f64;
    let mut violations = 0usize;
    for _ in 0..pairs {
        let (r, c) = (rng.random_range(1..=6), rng.random_range(1..=6));
        let a = sample_gaussian_matrix(r, c, rng);
        let scale = 10f64.powi(rng.random_range(-6..=0));
        let b = &a + sample_gaussian_matrix(r, c, rng) * scale;
        let lhs = (matrix_abs(&a)? - matrix_abs(&b)?).norm();
        let bound = std::f64::consts::SQRT_2 * (&a - &b).norm();
        if lhs > abs_lipschitz_bound(&a, &b) {
            violations += 1;
        }
        worst = worst.max(lhs / bound);
    }
    Ok(Outcome::exact(violations as f64, 0.0, 0.0).with_detail(format!("largest ratio to the bound {worst:.6}")))
}

/// `sqrt(2) |A - B|_F` plus a rounding allowance proportional to `|A|_F + |B|_F`.
pub fn abs_lipschitz_bound(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let slack = 64.0 * f64::EPSILON * (a.norm() + b.norm());
    std::f64::consts::SQRT_2 * (a - b).norm() + slack
}

/// Runs the suite with the stock matrix sampler.
pub fn run_validate(level: ValidateLevel, seed: u64) -> ValidationReport {
    run_validate_with(level, seed, sample_m::<StreamRng>)
}

/// Runs the suite drawing update matrices from `sampler`.
pub fn run_validate_with<F>(level: ValidateLevel, seed: u64, sampler: F) -> ValidationReport
where
    F: Fn(&ModelParams<f64>, &mut StreamRng) -> DMatrix<f64>,
{
    let sz = sizes(level);
    let rng = |i: usize| RngStream::new(seed, i as u64).rng();
    let (mean, var) = match cov_moments(sz.moment_replicas, &mut rng(8)) {
        Ok((m, v)) => (Ok(m), Ok(v)),
        Err(e) => (Err(e.to_string()), Err(e.to_string())),
    };
    let as_str = |r: Result<Outcome>| r.map_err(|e| e.to_string());
    let outcomes: Vec<std::result::Result<Outcome, String>> = vec![
        as_str(phi_path_agreement()),
        as_str(phi_ode()),
        as_str(critical_beta0()),
        as_str(rho_cr_decreasing()),
        as_str(sampler_mean(sz.sampler_draws, &mut rng(4), &sampler)),
        as_str(spectrum_beta0(sz.spectrum_steps, &mut rng(5), &sampler)),
        as_str(spectrum_top(sz.spectrum_steps, &mut rng(6), &sampler)),
        as_str(projection_orthonormal()),
        mean,
        var,
        as_str(cov_drift(sz.moment_replicas, &mut rng(10))),
        as_str(gl_top(sz.gl_paths, sz.gl_time, &mut rng(11))),
        as_str(critical_gamma()),
        as_str(abs_lipschitz(sz.lipschitz_pairs, &mut rng(13))),
    ];
    debug_assert_eq!(outcomes.len(), INVARIANTS.len());
    let checks = INVARIANTS
        .iter()
        .zip(outcomes)
        .map(|(&(module, invariant), o)| match o {
            Ok(o) => {
                let passed = match invariant {
                    "rho_cr_decreasing" => o.observed < 0.0,
                    "critical_gamma" => o.detail.is_none() && (o.observed - o.expected).abs() <= o.tolerance,
                    _ => (o.observed - o.expected).abs() <= o.tolerance,
                };
                Check {
                    module: module.into(),
                    invariant: invariant.into(),
                    observed: o.observed,
                    expected: o.expected,
                    se: o.se,
                    tolerance: o.tolerance,
                    passed,
                    detail: o.detail,
                }
            }
            Err(e) => Check {
                module: module.into(),
                invariant: invariant.into(),
                observed: f64::NAN,
                expected: f64::NAN,
                se: None,
                tolerance: f64::NAN,
                passed: false,
                detail: Some(e),
            },
        })
        .collect();
    ValidationReport { level, seed, checks }
}
