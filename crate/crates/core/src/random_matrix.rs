//! Sampling of the Ginibre-based update matrices and Monte Carlo estimators of the
//! Lyapunov spectrum.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::analytic::ModelParams;
use crate::error::{Error, Result};
use crate::linalg::{complement_projection_norm, qr_positive, GradedUpper};
use crate::rng::normal;
use crate::scalar::Real;
use crate::special::phi_series;
use crate::stats::{self, Estimate};

pub const SPECTRUM_BATCHES: usize = 50;

/// Matrix of i.i.d. standard normals, filled in column-major order.
pub fn sample_gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| normal(rng))
}

/// One draw of the reduced update matrix `beta I + sqrt(rho/N) G` of size `N - 1`.
pub fn sample_m<R: Rng + ?Sized>(params: &ModelParams<f64>, rng: &mut R) -> DMatrix<f64> {
    let n = params.n - 1;
    let mut m = sample_gaussian_matrix(n, n, rng) * params.noise_scale();
    for i in 0..n {
        m[(i, i)] += params.beta;
    }
    m
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovSpectrumEstimate {
    /// Descending.
    pub exponents: Vec<f64>,
    pub std_errors: Vec<f64>,
    pub steps: usize,
    pub params: ModelParams<f64>,
}

/// Benettin/QR estimate of all `N - 1` exponents of the product of update matrices.
///
/// Standard errors are batch means over [`SPECTRUM_BATCHES`] batches. The per-step
/// increments are exactly i.i.d. only for the top exponent; for the others the batch
/// errors are an approximation.
pub fn estimate_spectrum_qr<R: Rng + ?Sized>(
    params: &ModelParams<f64>,
    steps: usize,
    rng: &mut R,
) -> Result<LyapunovSpectrumEstimate> {
    estimate_spectrum_qr_with(params, steps, rng, sample_m)
}

/// [`estimate_spectrum_qr`] with a caller-supplied matrix sampler.
pub fn estimate_spectrum_qr_with<R, F>(
    params: &ModelParams<f64>,
    steps: usize,
    rng: &mut R,
    mut sampler: F,
) -> Result<LyapunovSpectrumEstimate>
where
    R: Rng + ?Sized,
    F: FnMut(&ModelParams<f64>, &mut R) -> DMatrix<f64>,
{
    if steps < 100 {
        return Err(Error::usage(format!("spectrum estimation needs at least 100 steps, got {steps}")));
    }
    let n = params.n - 1;
    let batch_len = steps / SPECTRUM_BATCHES;
    let mut batch_sums = vec![vec![0.0; n]; SPECTRUM_BATCHES];
    let mut q = DMatrix::<f64>::identity(n, n);
    for step in 0..steps {
        let m = sampler(params, rng);
        let (q_next, r) = qr_positive(&(m * &q));
        let batch = (step / batch_len).min(SPECTRUM_BATCHES - 1);
        for k in 0..n {
            let lr = r[(k, k)].ln();
            if !lr.is_finite() {
                return Err(Error::numerical("estimate_spectrum_qr", format!("degenerate R diagonal at step {step}")));
            }
            batch_sums[batch][k] += lr;
        }
        q = q_next;
    }
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|k| {
            let means: Vec<f64> = (0..SPECTRUM_BATCHES)
                .map(|b| {
                    let len = if b + 1 == SPECTRUM_BATCHES { steps - b * batch_len } else { batch_len };
                    batch_sums[b][k] / len as f64
                })
                .collect();
            let total: f64 = batch_sums.iter().map(|b| b[k]).sum();
            let se = (stats::variance(&means) / SPECTRUM_BATCHES as f64).sqrt();
            (total / steps as f64, se)
        })
        .collect();
    pairs.sort_by(|a, b| b.0.total_cmp(&a.0));
    Ok(LyapunovSpectrumEstimate {
        exponents: pairs.iter().map(|p| p.0).collect(),
        std_errors: pairs.iter().map(|p| p.1).collect(),
        steps,
        params: *params,
    })
}

/// Length of the component of `e_k` orthogonal to the first `k - 1` rows of an update matrix.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WkSample {
    pub k: usize,
    pub value: f64,
}

pub fn sample_wk<R: Rng + ?Sized>(params: &ModelParams<f64>, k: usize, rng: &mut R) -> Result<WkSample> {
    let n = params.n - 1;
    if k < 1 || k > n {
        return Err(Error::usage(format!("k must lie in [1, N - 1], got {k}")));
    }
    if k == 1 {
        return Ok(WkSample { k, value: 1.0 });
    }
    let m = sample_m(params, rng);
    let rows: Vec<DVector<f64>> = (0..k - 1).map(|i| m.row(i).transpose()).collect();
    let value = complement_projection_norm(&rows, k - 1)?;
    Ok(WkSample { k, value })
}

/// `W_2^2` from the explicit formula in terms of the first row of the update matrix:
/// `1 - s^2 x_2^2 / ((beta + s x_1)^2 + s^2 sum_{i>=2} x_i^2)` with `s = sqrt(rho/N)`.
pub fn sample_w2_squared_explicit<R: Rng + ?Sized>(params: &ModelParams<f64>, rng: &mut R) -> f64 {
    let n = params.n - 1;
    let s = params.noise_scale();
    let x: Vec<f64> = (0..n).map(|_| normal(rng)).collect();
    let head = params.beta + s * x[0];
    let tail: f64 = x[1..].iter().map(|v| v * v).sum::<f64>() * s * s;
    1.0 - s * s * x[1] * x[1] / (head * head + tail)
}

/// Monte Carlo mean of `1/2 log[(beta W_k + s X_1)^2 + s^2 sum_{i=2}^{N-k} X_i^2]`.
pub fn estimate_lambda_k_formula<R: Rng + ?Sized>(
    params: &ModelParams<f64>,
    k: usize,
    nsamples: usize,
    rng: &mut R,
) -> Result<Estimate> {
    if nsamples < 1000 {
        return Err(Error::usage(format!("need at least 1000 samples, got {nsamples}")));
    }
    let s = params.noise_scale();
    let mut values = Vec::with_capacity(nsamples);
    for _ in 0..nsamples {
        let w = sample_wk(params, k, rng)?.value;
        let head = params.beta * w + s * normal(rng);
        let mut tail = 0.0;
        for _ in 2..=(params.n - k) {
            let x = normal(rng);
            tail += x * x;
        }
        values.push(0.5 * (head * head + s * s * tail).ln());
    }
    Ok(stats::mean_se(&values))
}

/// `E log Y` for `Y ~ noncentral chi^2(nu, kappa)`:
/// `log 2 + e^{-kappa/2} sum_j (kappa/2)^j / j! psi(j + nu/2)`.
pub fn log_noncentral_chisq_mean<T: Real>(nu: T, kappa: T) -> Result<T> {
    if !(nu > T::zero()) || !(kappa >= T::zero()) {
        return Err(Error::domain(
            "log_noncentral_chisq_mean",
            format!("need nu > 0 and kappa >= 0, got {nu}, {kappa}"),
        ));
    }
    let half = T::lit(0.5);
    Ok(T::LN_2() + phi_series(nu * half, kappa * half)?.value)
}

/// Per-step angle between two directions pushed through the same matrix product.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContractionTrace {
    /// `log sin` of the angle after each step; resolved far below `f64` underflow.
    pub log_sin: Vec<f64>,
}

impl ContractionTrace {
    /// Sines of the angle, stopping at the first value that underflows to zero.
    pub fn sines(&self) -> Vec<f64> {
        self.log_sin.iter().map(|l| l.exp()).take_while(|s| *s > 0.0).collect()
    }

    /// Least-squares slope of `log sin` against the step index.
    pub fn log_slope(&self) -> f64 {
        let t: Vec<f64> = (1..=self.log_sin.len()).map(|i| i as f64).collect();
        stats::ols_slope(&t, &self.log_sin)
    }
}

/// Propagates two random unit vectors through the product of update matrices and records
/// the sine of the angle between their images.
///
/// The pair is carried as an orthonormal frame times a graded triangular factor, so the
/// angle stays resolvable after it drops below machine precision.
pub fn track_projective_contraction<R: Rng + ?Sized>(
    params: &ModelParams<f64>,
    steps: usize,
    rng: &mut R,
) -> Result<ContractionTrace> {
    let n = params.n - 1;
    if n < 2 {
        return Err(Error::usage("projective contraction needs N >= 3"));
    }
    if steps < 100 {
        return Err(Error::usage(format!("need at least 100 steps, got {steps}")));
    }
    let frame = sample_gaussian_matrix(n, 2, rng);
    let (mut q, r0) = qr_positive(&frame);
    let mut acc = GradedUpper::from_upper(&r0)?;
    let mut log_sin = Vec::with_capacity(steps);
    for _ in 0..steps {
        let m = sample_m(params, rng);
        let (q_next, r) = qr_positive(&(m * &q));
        acc.left_mul(&r);
        q = q_next;
        let l = acc.log_scale();
        let u12 = acc.unit()[(0, 1)];
        // sin = R22 / |(R12, R22)| with R12 = e^{l1} u12 and R22 = e^{l2}
        let a = l[0] + u12.abs().ln();
        let b = l[1];
        let hi = a.max(b);
        let norm = hi + 0.5 * ((2.0 * (a - hi)).exp() + (2.0 * (b - hi)).exp()).ln();
        log_sin.push((b - norm).min(0.0));
    }
    Ok(ContractionTrace { log_sin })
}
