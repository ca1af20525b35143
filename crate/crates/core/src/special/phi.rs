//! Poisson mixture of digamma values,
//! `phi_m(x) = e^-x sum_j x^j / j! psi(j + m)`, and its derivative.

use serde::{Deserialize, Serialize};

use super::quadrature::integrate;
use super::{digamma_unchecked, exp_integral_e1};
use crate::error::{Error, Result};
use crate::scalar::Real;

/// Hard cap on the number of series terms before giving up.
pub const SERIES_TERM_CAP: usize = 1_000_000;

const SERIES_REL_TOL: f64 = 1e-13;
const INTEGRAL_REL_TOL: f64 = 1e-13;
const INTEGRAL_MAX_PANELS: usize = 20_000;
/// Above this argument `phi_auto` switches from the series to the integral form.
const SERIES_MAX_ARG: f64 = 1e6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PhiEvalPath {
    /// Truncated Poisson series with a certified tail bound.
    Series,
    /// `psi(m) + int_0^1 (1 - e^{-xs}) (1-s)^{m-1} / s ds`.
    Integral,
    /// Finite closed form, integer `m` only.
    ClosedOdd,
    /// `log x + (m - 1)/x`, large-`x` leading terms.
    Asymptotic,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesSum<T> {
    pub value: T,
    /// Upper bound on `|value - exact|` from the truncated tails.
    pub error_bound: T,
    pub terms: usize,
}

fn check_args<T: Real>(op: &'static str, m: T, x: T) -> Result<()> {
    if !(m > T::zero()) || !m.is_finite() {
        return Err(Error::domain(op, format!("shape m must be finite and positive, got {m}")));
    }
    if !(x >= T::zero()) || !x.is_finite() {
        return Err(Error::domain(op, format!("argument x must be finite and non-negative, got {x}")));
    }
    Ok(())
}

/// Tail-bound data for one summand family.
trait Summand<T: Real> {
    fn value(&self, j: usize) -> T;
    /// Bound on `sum_{i>=0} q^i |f(j0 + i)|`.
    fn upper_tail(&self, j0: usize, q: T) -> T;
    /// Bound on `max_{j<=j_top} |f(j)|`.
    fn lower_max(&self, j_top: usize) -> T;
}

struct DigammaShift<T>(T);

impl<T: Real> Summand<T> for DigammaShift<T> {
    fn value(&self, j: usize) -> T {
        digamma_unchecked(T::from_count(j) + self.0)
    }
    fn upper_tail(&self, j0: usize, q: T) -> T {
        // psi(y) lies in (ln y - 1/y, ln y), and ln is concave, so
        // |psi(y0 + i)| <= |ln y0| + 1/y0 + i/y0.
        let y0 = T::from_count(j0) + self.0;
        let one_q = T::one() - q;
        (y0.ln().abs() + y0.recip()) / one_q + q / (one_q * one_q * y0)
    }
    fn lower_max(&self, j_top: usize) -> T {
        self.value(0).abs().max(self.value(j_top).abs())
    }
}

struct ReciprocalShift<T>(T);

impl<T: Real> Summand<T> for ReciprocalShift<T> {
    fn value(&self, j: usize) -> T {
        (T::from_count(j) + self.0).recip()
    }
    fn upper_tail(&self, j0: usize, q: T) -> T {
        self.value(j0) / (T::one() - q)
    }
    fn lower_max(&self, _j_top: usize) -> T {
        self.0.recip()
    }
}

struct ReciprocalPairShift<T>(T);

impl<T: Real> Summand<T> for ReciprocalPairShift<T> {
    fn value(&self, j: usize) -> T {
        let y = T::from_count(j) + self.0;
        (y * (y + T::one())).recip()
    }
    fn upper_tail(&self, j0: usize, q: T) -> T {
        self.value(j0) / (T::one() - q)
    }
    fn lower_max(&self, _j_top: usize) -> T {
        self.value(0)
    }
}

/// `E f(J)` for `J ~ Poisson(x)`, summed outward from the mode with unnormalised weights
/// (mode weight 1) and divided by the summed weight at the end.
fn poisson_expectation<T: Real, S: Summand<T>>(op: &'static str, x: T, f: &S, rel_tol: T) -> Result<SeriesSum<T>> {
    let mode = x.floor().to_usize().ok_or_else(|| Error::domain(op, "argument too large for series"))?;
    let xf = x;
    let mut sum_w = T::one();
    let mut sum_wf = f.value(mode);
    let mut terms = 1usize;

    // next unsummed index above is `hi` with weight `w_hi`
    let mut hi = mode + 1;
    let mut w_hi = if x > T::zero() { xf / T::from_count(hi) } else { T::zero() };
    // next unsummed index below is `lo - 1` with weight `w_lo`; none left when lo == 0
    let mut lo = mode;
    let mut w_lo = if mode > 0 { T::from_count(mode) / xf } else { T::zero() };

    let abs_floor = rel_tol * T::lit(1e-12);
    loop {
        let q_up = xf / T::from_count(hi + 1);
        let up_w = w_hi / (T::one() - q_up);
        let up_wf = w_hi * f.upper_tail(hi, q_up);
        let (down_w, down_wf) = if lo == 0 {
            (T::zero(), T::zero())
        } else {
            let q_dn = T::from_count(lo - 1) / xf;
            let tw = w_lo / (T::one() - q_dn);
            (tw, tw * f.lower_max(lo - 1))
        };
        let estimate = sum_wf / sum_w;
        let bound = (up_wf + down_wf + estimate.abs() * (up_w + down_w)) / sum_w;
        if bound <= rel_tol * estimate.abs() || bound <= abs_floor {
            return Ok(SeriesSum { value: estimate, error_bound: bound, terms });
        }
        if terms >= SERIES_TERM_CAP {
            return Err(Error::Numerical {
                op,
                detail: format!("series not converged after {terms} terms at x = {x}"),
                achieved: bound.to_f64(),
            });
        }
        if up_wf + estimate.abs() * up_w >= down_wf + estimate.abs() * down_w {
            sum_w = sum_w + w_hi;
            sum_wf = sum_wf + w_hi * f.value(hi);
            hi += 1;
            w_hi = w_hi * xf / T::from_count(hi);
        } else {
            lo -= 1;
            sum_w = sum_w + w_lo;
            sum_wf = sum_wf + w_lo * f.value(lo);
            w_lo = w_lo * T::from_count(lo) / xf;
        }
        terms += 1;
    }
}

/// Series evaluation of `phi_m(x)` with its certified truncation bound.
pub fn phi_series<T: Real>(m: T, x: T) -> Result<SeriesSum<T>> {
    check_args("phi_series", m, x)?;
    poisson_expectation("phi_series", x, &DigammaShift(m), T::tol_floor(SERIES_REL_TOL))
}

/// `phi_m(x) = psi(m) + int_0^1 (1 - e^{-xs})(1-s)^{m-1}/s ds`.
///
/// For `m < 1` the substitution `u = (1-s)^m` removes the singularity at `s = 1`.
pub fn phi_integral<T: Real>(m: T, x: T) -> Result<T> {
    check_args("phi_integral", m, x)?;
    let base = digamma_unchecked(m);
    if x == T::zero() {
        return Ok(base);
    }
    // a node can round onto s = 0, where the integrand's limit is x
    let h = move |s: T| if s > T::zero() { -(-x * s).exp_m1() / s } else { x };
    let tol = T::tol_floor(INTEGRAL_REL_TOL);
    let abs_tol = tol * T::lit(1e-3);
    let e = m - T::one();
    let direct = move |s: T| h(s) * (T::one() - s).powf(e);
    let value = if m < T::one() {
        // s in [0, 1/2] directly; s in [1/2, 1] through u = (1-s)^m, where the
        // Jacobian cancels the singular factor
        let half = T::lit(0.5);
        let inv_m = m.recip();
        let near = integrate(direct, T::zero(), half, abs_tol, tol, INTEGRAL_MAX_PANELS)?;
        let far = integrate(
            move |u: T| h(T::one() - u.powf(inv_m)) * inv_m,
            T::zero(),
            half.powf(m),
            abs_tol,
            tol,
            INTEGRAL_MAX_PANELS,
        )?;
        near.value + far.value
    } else {
        integrate(direct, T::zero(), T::one(), abs_tol, tol, INTEGRAL_MAX_PANELS)?.value
    };
    Ok(base + value)
}

fn integer_shape<T: Real>(op: &'static str, m: T) -> Result<usize> {
    if m < T::one() || m != m.round() {
        return Err(Error::usage(format!("{op}: closed form needs a positive integer shape, got m = {m}")));
    }
    m.to_usize().ok_or_else(|| Error::domain(op, "shape too large"))
}

/// `phi_m(x) - log x` through the closed form; used where `log x` would cancel.
pub(crate) fn closed_odd_excess<T: Real>(m: usize, x: T) -> Result<T> {
    let e1 = exp_integral_e1(x)?;
    let ex = (-x).exp();
    let mut sum = T::zero();
    let mut fact_over_pow = x.recip(); // (i-1)! / x^i
    let mut binom = T::one(); // C(m-1, i)
    for i in 1..m {
        binom = binom * T::from_count(m - i) / T::from_count(i);
        let term = fact_over_pow * (ex - binom);
        sum = if i % 2 == 1 { sum - term } else { sum + term };
        fact_over_pow = fact_over_pow * T::from_count(i) / x;
    }
    Ok(e1 + sum)
}

/// Closed form for integer `m`:
/// `log x + E1(x) + sum_{i=1}^{m-1} (i-1)!/(-x)^i [e^-x - C(m-1, i)]`.
///
/// Suffers cancellation when `x` is small compared with `m`. At `x = 0` returns the limit
/// `psi(m) = -gamma + H_{m-1}`.
pub fn phi_closed_odd<T: Real>(m: T, x: T) -> Result<T> {
    check_args("phi_closed_odd", m, x)?;
    let k = integer_shape("phi_closed_odd", m)?;
    if x == T::zero() {
        let harmonic = (1..k).fold(T::zero(), |h, i| h + T::from_count(i).recip());
        return Ok(harmonic - T::euler_gamma());
    }
    Ok(x.ln() + closed_odd_excess(k, x)?)
}

/// Leading large-argument terms `log x + (m - 1)/x`.
pub fn phi_asymptotic<T: Real>(m: T, x: T) -> Result<T> {
    check_args("phi_asymptotic", m, x)?;
    if x == T::zero() {
        return Err(Error::domain("phi_asymptotic", "expansion requires x > 0"));
    }
    Ok(x.ln() + (m - T::one()) / x)
}

pub fn phi<T: Real>(m: T, x: T, path: PhiEvalPath) -> Result<T> {
    match path {
        PhiEvalPath::Series => phi_series(m, x).map(|s| s.value),
        PhiEvalPath::Integral => phi_integral(m, x),
        PhiEvalPath::ClosedOdd => phi_closed_odd(m, x),
        PhiEvalPath::Asymptotic => phi_asymptotic(m, x),
    }
}

/// Series for moderate arguments, integral beyond.
pub fn phi_auto<T: Real>(m: T, x: T) -> Result<T> {
    if x <= T::lit(SERIES_MAX_ARG) {
        phi(m, x, PhiEvalPath::Series)
    } else {
        phi(m, x, PhiEvalPath::Integral)
    }
}

/// `phi_m'(x) = e^-x sum_j x^j / (j! (m + j)) = int_0^1 e^{-xs} (1-s)^{m-1} ds`.
pub fn phi_prime<T: Real>(m: T, x: T) -> Result<T> {
    check_args("phi_prime", m, x)?;
    if x <= T::lit(SERIES_MAX_ARG) {
        return poisson_expectation("phi_prime", x, &ReciprocalShift(m), T::tol_floor(SERIES_REL_TOL)).map(|s| s.value);
    }
    let tol = T::tol_floor(INTEGRAL_REL_TOL);
    let q = if m < T::one() {
        let inv_m = m.recip();
        integrate(
            move |u: T| (x * (u.ln() * inv_m).exp_m1()).exp() * inv_m,
            T::zero(),
            T::one(),
            T::zero(),
            tol,
            INTEGRAL_MAX_PANELS,
        )?
    } else {
        let e = m - T::one();
        integrate(
            move |s: T| (-x * s).exp() * (T::one() - s).powf(e),
            T::zero(),
            T::one(),
            T::zero(),
            tol,
            INTEGRAL_MAX_PANELS,
        )?
    };
    Ok(q.value)
}

fn phi_second<T: Real>(m: T, x: T) -> Result<T> {
    // d/dx E[1/(m+J)] = -E[1/((m+J)(m+J+1))]
    poisson_expectation("phi_second", x, &ReciprocalPairShift(m), T::tol_floor(SERIES_REL_TOL)).map(|s| -s.value)
}

/// `x phi'' + (x + m) phi' - 1`, zero for the exact function.
pub fn phi_ode_residual<T: Real>(m: T, x: T) -> Result<T> {
    check_args("phi_ode_residual", m, x)?;
    let d1 = phi_prime(m, x)?;
    let d2 = phi_second(m, x)?;
    Ok(x * d2 + (x + m) * d1 - T::one())
}

/// `phi_m' - (1/m - (x/m) phi_{m+1}')`, zero for the exact function.
pub fn phi_prime_recurrence_residual<T: Real>(m: T, x: T) -> Result<T> {
    let lhs = phi_prime(m, x)?;
    let next = phi_prime(m + T::one(), x)?;
    Ok(lhs - (m.recip() - x / m * next))
}
