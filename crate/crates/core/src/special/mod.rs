//! Digamma, exponential integral and the Poisson-mixed digamma function.

pub(crate) mod phi;
pub mod quadrature;

pub use phi::{
    phi, phi_asymptotic, phi_auto, phi_closed_odd, phi_integral, phi_ode_residual, phi_prime,
    phi_prime_recurrence_residual, phi_series, PhiEvalPath, SeriesSum, SERIES_TERM_CAP,
};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Digamma function for real `x > 0`.
///
/// Shifts the argument up to 10 with the recurrence `psi(x) = psi(x + 1) - 1/x`, then
/// applies the asymptotic expansion through the `x^-14` term.
pub fn digamma<T: Real>(x: T) -> Result<T> {
    if !(x > T::zero()) || !x.is_finite() {
        return Err(Error::domain("digamma", format!("argument must be finite and positive, got {x}")));
    }
    Ok(digamma_unchecked(x))
}

pub(crate) fn digamma_unchecked<T: Real>(mut x: T) -> T {
    let ten = T::lit(10.0);
    let mut shift = T::zero();
    while x < ten {
        shift = shift - x.recip();
        x = x + T::one();
    }
    let r = (x * x).recip();
    let tail = r
        * (T::lit(1.0 / 12.0)
            - r * (T::lit(1.0 / 120.0)
                - r * (T::lit(1.0 / 252.0)
                    - r * (T::lit(1.0 / 240.0)
                        - r * (T::lit(1.0 / 132.0) - r * (T::lit(691.0 / 32760.0) - r * T::lit(1.0 / 12.0)))))));
    x.ln() - T::lit(0.5) / x - tail + shift
}

/// Exponential integral `E1(x) = int_x^inf e^-t / t dt` for `x > 0`.
///
/// Power series for `x <= 1`, modified Lentz continued fraction above.
pub fn exp_integral_e1<T: Real>(x: T) -> Result<T> {
    if !(x > T::zero()) || x.is_nan() {
        return Err(Error::domain("exp_integral_e1", format!("argument must be positive, got {x}")));
    }
    if x.is_infinite() {
        return Ok(T::zero());
    }
    let eps = T::epsilon();
    if x <= T::one() {
        // E1(x) = -gamma - ln x - sum_{k>=1} (-x)^k / (k k!)
        let mut term = T::one();
        let mut sum = T::zero();
        for k in 1..200usize {
            let kf = T::from_count(k);
            term = -term * x / kf;
            let add = term / kf;
            sum = sum + add;
            if add.abs() <= eps * sum.abs() {
                break;
            }
        }
        return Ok(-T::euler_gamma() - x.ln() - sum);
    }
    let tiny = T::min_positive_value() / eps;
    let mut b = x + T::one();
    let mut c = tiny.recip();
    let mut d = b.recip();
    let mut h = d;
    for i in 1..10_000usize {
        let a = -T::from_count(i * i);
        b = b + T::lit(2.0);
        d = (a * d + b).recip();
        c = b + a / c;
        let del = c * d;
        h = h * del;
        if (del - T::one()).abs() <= eps {
            return Ok(h * (-x).exp());
        }
    }
    Err(Error::numerical("exp_integral_e1", format!("continued fraction did not converge at x = {x}")))
}
