//! Closed-form and semi-analytic Lyapunov exponents, critical parameters and regime
//! classification.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::special::{self, digamma, PhiEvalPath};

/// Default half-width of the critical band for analytic inputs.
pub const DEFAULT_REGIME_TOL: f64 = 1e-9;

/// Lower end of the bisection bracket for the critical crowd-aversion.
pub const CRITICAL_BRACKET_FLOOR: f64 = 1e-12;

const MAX_BISECTIONS: usize = 400;

/// Parameters of the discrete-time model: population size, opinion dimension,
/// crowd aversion and self-confidence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams<T> {
    pub n: usize,
    pub d: usize,
    pub alpha: T,
    pub beta: T,
}

impl<T: Real> ModelParams<T> {
    pub fn new(n: usize, d: usize, alpha: T, beta: T) -> Result<Self> {
        if n < 2 {
            return Err(Error::usage(format!("N must be at least 2, got {n}")));
        }
        if d < 1 {
            return Err(Error::usage("d must be at least 1"));
        }
        if n < d + 1 {
            return Err(Error::usage(format!("N must be at least d + 1 (N = {n}, d = {d})")));
        }
        if !(alpha > T::zero()) || !alpha.is_finite() {
            return Err(Error::usage(format!("alpha must be finite and positive, got {alpha}")));
        }
        if !(beta >= T::zero() && beta < T::one()) {
            return Err(Error::usage(format!("beta must lie in [0, 1), got {beta}")));
        }
        Ok(Self { n, d, alpha, beta })
    }

    /// Effective one-step noise scale `alpha (1 - beta)^2`.
    pub fn rho(&self) -> T {
        let c = T::one() - self.beta;
        self.alpha * c * c
    }

    /// `N beta^2 / (2 rho)`; zero when `beta = 0`.
    pub fn z(&self) -> T {
        T::from_count(self.n) * self.beta * self.beta / (T::lit(2.0) * self.rho())
    }

    /// Standard deviation of the Gaussian part of the update matrix, `sqrt(rho / N)`.
    pub fn noise_scale(&self) -> T {
        (self.rho() / T::from_count(self.n)).sqrt()
    }

    /// Half the number of centered degrees of freedom, `(N - 1)/2`.
    pub fn half_dof(&self) -> T {
        T::from_count(self.n - 1) * T::lit(0.5)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RegimeKind {
    Subcritical,
    Critical,
    Supercritical,
}

impl RegimeKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            RegimeKind::Subcritical => "subcritical",
            RegimeKind::Critical => "critical",
            RegimeKind::Supercritical => "supercritical",
        }
    }
}

impl std::fmt::Display for RegimeKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Classification of a growth exponent against a tolerance band.
///
/// For the discrete model `exponent` is the top Lyapunov exponent. For the continuous
/// model it is `gamma_cr - gamma`, which has the same sign convention.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Regime<T> {
    pub kind: RegimeKind,
    pub exponent: T,
    pub tolerance: T,
}

impl<T: Real> Regime<T> {
    pub fn from_exponent(exponent: T, tolerance: T) -> Self {
        let kind = if exponent > tolerance {
            RegimeKind::Supercritical
        } else if exponent < -tolerance {
            RegimeKind::Subcritical
        } else {
            RegimeKind::Critical
        };
        Self { kind, exponent, tolerance }
    }
}

/// Top Lyapunov exponent `1/2 [phi_{(N-1)/2}(z) + log(2 rho / N)]`.
///
/// Uses the digamma closed form at `beta = 0` and the exponential-integral closed form for
/// odd `N` once `z >= N - 1`, where it is free of cancellation.
pub fn lambda1<T: Real>(params: &ModelParams<T>) -> Result<T> {
    let nf = T::from_count(params.n);
    let m = params.half_dof();
    let half = T::lit(0.5);
    if params.beta == T::zero() {
        return Ok(half * ((T::lit(2.0) * params.alpha / nf).ln() + digamma(m)?));
    }
    let z = params.z();
    if params.n % 2 == 1 && z >= T::from_count(params.n - 1) {
        let excess = special::phi::closed_odd_excess((params.n - 1) / 2, z)?;
        return Ok(params.beta.ln() + half * excess);
    }
    lambda1_via(params, special::phi_auto(m, z)?)
}

/// `lambda1` with the mixture evaluated on a chosen path; for cross-checking.
pub fn lambda1_with_path<T: Real>(params: &ModelParams<T>, path: PhiEvalPath) -> Result<T> {
    lambda1_via(params, special::phi(params.half_dof(), params.z(), path)?)
}

fn lambda1_via<T: Real>(params: &ModelParams<T>, phi_value: T) -> Result<T> {
    let nf = T::from_count(params.n);
    Ok(T::lit(0.5) * (phi_value + (T::lit(2.0) * params.rho() / nf).ln()))
}

/// Infinite-population limit `1/2 log(alpha (1 - beta)^2 + beta^2)`.
pub fn lambda1_large_n<T: Real>(alpha: T, beta: T) -> T {
    let c = T::one() - beta;
    T::lit(0.5) * (alpha * c * c + beta * beta).ln()
}

/// `k`-th exponent without self-confidence: `1/2 [log(2 alpha / N) + psi((N - k)/2)]`.
pub fn lambda_k_beta0<T: Real>(alpha: T, n: usize, k: usize) -> Result<T> {
    if n < 2 || k < 1 || k > n - 1 {
        return Err(Error::usage(format!("k must lie in [1, N - 1], got k = {k} with N = {n}")));
    }
    if !(alpha > T::zero()) {
        return Err(Error::usage(format!("alpha must be positive, got {alpha}")));
    }
    let nf = T::from_count(n);
    Ok(T::lit(0.5) * ((T::lit(2.0) * alpha / nf).ln() + digamma(T::from_count(n - k) * T::lit(0.5))?))
}

/// Lower bound `0.15 / ((N - k)(N beta^2 / rho + N - k))` on the gap between consecutive exponents.
pub fn gap_lower_bound<T: Real>(params: &ModelParams<T>, k: usize) -> Result<T> {
    if params.n < 3 || k < 1 || k > params.n - 2 {
        return Err(Error::usage(format!("k must lie in [1, N - 2], got k = {k} with N = {}", params.n)));
    }
    let nf = T::from_count(params.n);
    let rest = T::from_count(params.n - k);
    let shift = nf * params.beta * params.beta / params.rho();
    Ok(T::lit(0.15) / (rest * (shift + rest)))
}

/// Large-population spectral gap `(1 - [beta^2/(rho + beta^2)]^2) / (2N)`.
pub fn gap12_large_n<T: Real>(params: &ModelParams<T>) -> T {
    let b2 = params.beta * params.beta;
    let r = b2 / (params.rho() + b2);
    (T::one() - r * r) / (T::lit(2.0) * T::from_count(params.n))
}

/// Same quantity as [`gap12_large_n`] in the factored form
/// `rho (rho + 2 beta^2) / (2N (rho + beta^2)^2)`.
pub fn gap12_large_n_factored<T: Real>(params: &ModelParams<T>) -> T {
    let b2 = params.beta * params.beta;
    let rho = params.rho();
    let s = rho + b2;
    rho * (rho + T::lit(2.0) * b2) / (T::lit(2.0) * T::from_count(params.n) * s * s)
}

/// Critical crowd aversion without self-confidence, `(N/2) exp(-psi((N - 1)/2))`.
pub fn critical_alpha_zero<T: Real>(n: usize) -> Result<T> {
    if n < 2 {
        return Err(Error::usage(format!("N must be at least 2, got {n}")));
    }
    let m = T::from_count(n - 1) * T::lit(0.5);
    Ok(T::from_count(n) * T::lit(0.5) * (-digamma(m)?).exp())
}

fn check_beta<T: Real>(beta: T) -> Result<()> {
    if !(beta >= T::zero() && beta < T::one()) {
        return Err(Error::usage(format!("beta must lie in [0, 1), got {beta}")));
    }
    Ok(())
}

/// Root of `alpha -> lambda1` at fixed `beta`, `N`. The closed form is used at `beta = 0`.
pub fn critical_alpha<T: Real>(beta: T, n: usize, tol: T) -> Result<T> {
    check_beta(beta)?;
    if beta == T::zero() {
        return critical_alpha_zero(n);
    }
    critical_alpha_bisect(beta, n, tol)
}

/// Bisection for the critical crowd aversion, also at `beta = 0`.
///
/// `lambda1` is strictly increasing in `alpha`. The bracket is
/// `[1e-12, alpha_cr(0) / (1 - beta)^2]`; the upper end is a strict upper bound on the root.
/// Stops once `|lambda1| <= tol` at the midpoint or the bracket can no longer shrink.
pub fn critical_alpha_bisect<T: Real>(beta: T, n: usize, tol: T) -> Result<T> {
    check_beta(beta)?;
    if !(tol > T::zero()) {
        return Err(Error::usage(format!("tolerance must be positive, got {tol}")));
    }
    let lam = |alpha: T| -> Result<T> { lambda1(&ModelParams::new(n, 1, alpha, beta)?) };
    let c = T::one() - beta;
    let mut lo = T::lit(CRITICAL_BRACKET_FLOOR);
    let mut hi = critical_alpha_zero::<T>(n)? / (c * c);
    // At beta = 0 the upper end is the root itself; widen so the bracket is strict.
    if beta == T::zero() {
        hi = hi * T::lit(2.0);
    }
    let f_lo = lam(lo)?;
    let f_hi = lam(hi)?;
    if !(f_lo < T::zero() && f_hi > T::zero()) {
        return Err(Error::numerical(
            "critical_alpha",
            format!("bracket [{lo}, {hi}] does not straddle the root: lambda1 = {f_lo}, {f_hi}"),
        ));
    }
    let mut best = (hi, f_hi.abs());
    for _ in 0..MAX_BISECTIONS {
        // geometric midpoint: the bracket spans many decades when beta is close to 1
        let mid = if hi / lo > T::lit(4.0) { (lo * hi).sqrt() } else { (lo + hi) * T::lit(0.5) };
        if !(mid > lo && mid < hi) {
            break;
        }
        let f = lam(mid)?;
        if f.abs() < best.1 {
            best = (mid, f.abs());
        }
        if f.abs() <= tol {
            return Ok(mid);
        }
        if f < T::zero() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    if best.1 <= tol.max(T::epsilon() * T::lit(64.0)) {
        return Ok(best.0);
    }
    Err(Error::Numerical {
        op: "critical_alpha",
        detail: format!("bisection stalled at alpha = {} with |lambda1| = {}", best.0, best.1),
        achieved: best.1.to_f64(),
    })
}

/// Strong-self-confidence asymptote `2N / ((N - 3)(1 - beta))`.
pub fn critical_alpha_asymptotic<T: Real>(beta: T, n: usize) -> Result<T> {
    if n < 4 {
        return Err(Error::usage(format!("asymptotic critical alpha needs N >= 4, got {n}")));
    }
    check_beta(beta)?;
    let nf = T::from_count(n);
    Ok(T::lit(2.0) * nf / (T::from_count(n - 3) * (T::one() - beta)))
}

/// Critical effective noise `(1 - beta)^2 alpha_cr(beta)`.
pub fn rho_critical<T: Real>(beta: T, n: usize, tol: T) -> Result<T> {
    let c = T::one() - beta;
    Ok(c * c * critical_alpha(beta, n, tol)?)
}

pub fn classify_regime<T: Real>(params: &ModelParams<T>, tol: T) -> Result<Regime<T>> {
    Ok(Regime::from_exponent(lambda1(params)?, tol))
}

/// Critical drift of the continuous model, `1/2 - 3/(2N)`.
pub fn model_b_critical_gamma<T: Real>(n: usize) -> Result<T> {
    if n < 2 {
        return Err(Error::usage(format!("N must be at least 2, got {n}")));
    }
    Ok(T::lit(0.5) - T::lit(1.5) / T::from_count(n))
}

/// Subcritical when `gamma > gamma_cr + tol`, supercritical when `gamma < gamma_cr - tol`.
pub fn classify_model_b<T: Real>(gamma: T, n: usize, tol: T) -> Result<Regime<T>> {
    let g_cr = model_b_critical_gamma::<T>(n)?;
    Ok(Regime::from_exponent(g_cr - gamma, tol))
}
