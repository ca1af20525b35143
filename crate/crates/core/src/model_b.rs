//! Continuous-time consensus diffusion `dZ = -gamma Zc dt + dB T`, `T = Cov^{1/2}`.
//!
//! Two simulators: Euler–Maruyama on the SDE, and the exact representation through a
//! right-invariant Brownian motion on `GL(N-1)` run at time `t/N`.

use nalgebra::{DMatrix, RowDVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::analytic::{classify_model_b as classify, Regime};
use crate::error::{Error, Result};
use crate::linalg::{psd_sqrt_clamped, qr_positive, sym_eigen_desc, GradedUpper};
use crate::model_a::build_projection;
use crate::random_matrix::sample_gaussian_matrix;
use crate::rng::normal;
use crate::stats::{self, Estimate};

pub use crate::linalg::{matrix_abs, psd_sqrt};

pub const DEFAULT_DT: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelBParams {
    pub n: usize,
    pub d: usize,
    /// Drift towards the mean.
    pub gamma: f64,
    pub dt: f64,
}

impl ModelBParams {
    pub fn new(n: usize, d: usize, gamma: f64, dt: f64) -> Result<Self> {
        if n < 2 || d < 1 || n < d + 1 {
            return Err(Error::usage(format!("need N >= 2, d >= 1 and N >= d + 1, got N = {n}, d = {d}")));
        }
        if !gamma.is_finite() {
            return Err(Error::usage("gamma must be finite"));
        }
        if !(dt > 0.0) || !dt.is_finite() {
            return Err(Error::usage(format!("dt must be positive, got {dt}")));
        }
        Ok(Self { n, d, gamma, dt })
    }

    /// Drift shifted by the Ito correction, `gamma + 1/(2N)`.
    pub fn gamma_prime(&self) -> f64 {
        self.gamma + 0.5 / self.n as f64
    }

    /// Exponential rate of `tr Cov`, `1 - 3/N - 2 gamma`.
    pub fn trace_growth_rate(&self) -> f64 {
        1.0 - 3.0 / self.n as f64 - 2.0 * self.gamma
    }

    /// Number of `dt` steps covering `[0, t_end]`.
    pub fn steps_for(&self, t_end: f64) -> Result<usize> {
        if !(t_end >= 0.0) || !t_end.is_finite() {
            return Err(Error::usage(format!("end time must be non-negative, got {t_end}")));
        }
        Ok((t_end / self.dt).round() as usize)
    }
}

pub fn classify_model_b(gamma: f64, n: usize, tol: f64) -> Result<Regime<f64>> {
    classify(gamma, n, tol)
}

/// Right-invariant Brownian motion on `GL(n)`, stored as an orthogonal factor times a
/// graded upper-triangular factor.
#[derive(Debug, Clone)]
pub struct GlState {
    q: DMatrix<f64>,
    shape: GradedUpper,
    t: f64,
}

impl GlState {
    pub fn identity(n: usize) -> Self {
        Self { q: DMatrix::identity(n, n), shape: GradedUpper::identity(n), t: 0.0 }
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn dim(&self) -> usize {
        self.q.nrows()
    }

    /// `G` itself; overflows for long times.
    pub fn matrix(&self) -> DMatrix<f64> {
        &self.q * self.shape.materialize()
    }

    /// `Y = G^T G`.
    pub fn y_matrix(&self) -> DMatrix<f64> {
        let g = self.matrix();
        g.transpose() * g
    }

    /// Logarithms of the eigenvalues of `Y`, descending.
    pub fn log_eigenvalues_y(&self) -> Vec<f64> {
        self.shape.log_singular_values(self.dim()).into_iter().map(|s| 2.0 * s).collect()
    }

    pub fn log_abs_det(&self) -> f64 {
        self.shape.log_abs_det()
    }

    /// `G v` as `e^s w`, returned as `(s, w)`.
    pub fn apply_scaled(&self, v: &DMatrix<f64>) -> (f64, DMatrix<f64>) {
        let (s, r) = self.shape.scaled();
        (s, &self.q * (r * v))
    }

    /// In-place Euler–Maruyama step of `dG = dB G + G dt / 2`.
    pub fn advance<R: Rng + ?Sized>(&mut self, dt: f64, rng: &mut R) {
        let n = self.dim();
        let mut a = sample_gaussian_matrix(n, n, rng) * dt.sqrt();
        for i in 0..n {
            a[(i, i)] += 1.0 + 0.5 * dt;
        }
        let (q, r) = qr_positive(&(a * &self.q));
        self.q = q;
        self.shape.left_mul(&r);
        self.t += dt;
    }
}

pub fn gl_step<R: Rng + ?Sized>(g: &GlState, dt: f64, rng: &mut R) -> GlState {
    let mut next = g.clone();
    next.advance(dt, rng);
    next
}

/// `(1/t) log` of the eigenvalues of `G(t)^T G(t)` for one path on `GL(n)`, descending.
pub fn gl_characteristic_exponents<R: Rng + ?Sized>(n: usize, t_end: f64, dt: f64, rng: &mut R) -> Result<Vec<f64>> {
    if n < 1 || !(t_end > 0.0) || !(dt > 0.0) {
        return Err(Error::usage("need n >= 1, t_end > 0 and dt > 0"));
    }
    let steps = (t_end / dt).round() as usize;
    let mut g = GlState::identity(n);
    for _ in 0..steps {
        g.advance(dt, rng);
    }
    Ok(g.log_eigenvalues_y().into_iter().map(|l| l / g.t()).collect())
}

/// Opinions `Z` (`N x d`) at time `t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiffusionState {
    z: DMatrix<f64>,
    t: f64,
}

impl DiffusionState {
    /// Initial state; the centered opinions must have rank `d`.
    pub fn new(z: DMatrix<f64>) -> Result<Self> {
        let (n, d) = z.shape();
        if n < d + 1 {
            return Err(Error::usage(format!("need N >= d + 1, got {n} x {d}")));
        }
        let s = Self { z, t: 0.0 };
        let cov = s.cov();
        let (values, _) = sym_eigen_desc(&cov)?;
        if !(values[d - 1] > 1e-12 * cov.trace()) {
            return Err(Error::domain("DiffusionState::new", "centered initial opinions must have rank d"));
        }
        Ok(s)
    }

    pub fn from_parts_unchecked(z: DMatrix<f64>, t: f64) -> Self {
        Self { z, t }
    }

    pub fn z(&self) -> &DMatrix<f64> {
        &self.z
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn mean(&self) -> RowDVector<f64> {
        self.z.row_mean()
    }

    pub fn centered(&self) -> DMatrix<f64> {
        let mu = self.mean();
        let mut c = self.z.clone();
        for mut row in c.row_iter_mut() {
            row -= &mu;
        }
        c
    }

    pub fn cov(&self) -> DMatrix<f64> {
        let c = self.centered();
        let cov = c.transpose() * &c / self.z.nrows() as f64;
        (&cov + cov.transpose()) * 0.5
    }
}

/// One Euler–Maruyama step: `Z <- Z - gamma Zc dt + dB T`.
pub fn em_step<R: Rng + ?Sized>(state: &DiffusionState, params: &ModelBParams, rng: &mut R) -> DiffusionState {
    let (n, d) = state.z.shape();
    let (t, _) = psd_sqrt_clamped(&state.cov());
    let db = sample_gaussian_matrix(n, d, rng) * params.dt.sqrt();
    let z = &state.z - state.centered() * (params.gamma * params.dt) + db * t;
    DiffusionState { z, t: state.t + params.dt }
}

/// Euler–Maruyama path to `t_end`, keeping every `record_stride`-th state (and `t = 0`).
pub fn em_trajectory<R: Rng + ?Sized>(
    z0: &DiffusionState,
    params: &ModelBParams,
    t_end: f64,
    record_stride: usize,
    rng: &mut R,
) -> Result<Vec<DiffusionState>> {
    if record_stride < 1 {
        return Err(Error::usage("record stride must be positive"));
    }
    let steps = params.steps_for(t_end)?;
    let mut out = vec![z0.clone()];
    let mut s = z0.clone();
    for k in 1..=steps {
        s = em_step(&s, params, rng);
        s.t = z0.t + k as f64 * params.dt;
        if k % record_stride == 0 {
            out.push(s.clone());
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactSample {
    pub state: DiffusionState,
    /// The driving `GL(N-1)` motion at time `t / N`.
    pub g: DMatrix<f64>,
    /// `log tr Cov`, computed from the factored motion so it stays finite.
    pub log_tr_cov: f64,
}

/// Exact construction
/// `Zc(t) = e^{-gamma' t} V^T G(t/N) V Zc(0)` and
/// `Z(t) = Zc(t) + 1 mean(0) + N^{-1/2} 1 int dF T`,
/// with the mean integral taken as left-point sums on the `dt` grid.
pub fn exact_trajectory<R: Rng + ?Sized>(
    z0: &DiffusionState,
    params: &ModelBParams,
    t_end: f64,
    record_stride: usize,
    rng: &mut R,
) -> Result<Vec<ExactSample>> {
    let (n, d) = z0.z.shape();
    if n != params.n || d != params.d {
        return Err(Error::usage("initial state does not match N, d"));
    }
    if record_stride < 1 {
        return Err(Error::usage("record stride must be positive"));
    }
    let v = build_projection(n)?;
    let k0 = v.matrix() * z0.centered();
    let (values, _) = sym_eigen_desc(&(k0.transpose() * &k0))?;
    if !(values[d - 1] > 1e-12 * values[0]) {
        return Err(Error::domain("exact_trajectory", "V Z(0) must have rank d"));
    }
    let steps = params.steps_for(t_end)?;
    let nf = n as f64;
    let gp = params.gamma_prime();
    let mean0 = z0.mean();
    let mut mean_part = RowDVector::<f64>::zeros(d);
    let mut g = GlState::identity(n - 1);

    let snapshot = |g: &GlState, t: f64, mean_part: &RowDVector<f64>| -> ExactSample {
        let (s, w) = g.apply_scaled(&k0);
        let log_tr_cov = 2.0 * (s + w.norm().ln()) - 2.0 * gp * t - nf.ln();
        let kt = w * (s - gp * t).exp();
        let mut z = v.matrix().transpose() * kt;
        let mu = &mean0 + mean_part;
        for mut row in z.row_iter_mut() {
            row += &mu;
        }
        ExactSample { state: DiffusionState { z, t }, g: g.matrix(), log_tr_cov }
    };

    let mut out = Vec::with_capacity(steps / record_stride + 1);
    out.push(ExactSample { state: z0.clone(), g: g.matrix(), log_tr_cov: z0.cov().trace().ln() });
    let sqrt_dt = params.dt.sqrt();
    for k in 1..=steps {
        let t_prev = (k - 1) as f64 * params.dt;
        // Cov at the left endpoint
        let (s, w) = g.apply_scaled(&k0);
        let kt = w * (s - gp * t_prev).exp();
        let cov = kt.transpose() * &kt / nf;
        let (tm, _) = psd_sqrt_clamped(&cov);
        let df = RowDVector::from_fn(d, |_, _| normal(rng) * sqrt_dt);
        mean_part += df * tm / nf.sqrt();
        g.advance(params.dt / nf, rng);
        if k % record_stride == 0 {
            out.push(snapshot(&g, k as f64 * params.dt, &mean_part));
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovDriftReport {
    pub coefficient: f64,
    /// `(i, j, estimate of E dCov_ij / dt, z-score)` for `i <= j`.
    pub entries: Vec<(usize, usize, Estimate, f64)>,
    pub nsamples: usize,
}

impl CovDriftReport {
    pub fn max_abs_z(&self) -> f64 {
        self.entries.iter().map(|e| e.3.abs()).fold(0.0, f64::max)
    }
}

/// Expected drift coefficient `(N - 1 - 2 gamma N) / N` of the covariance.
pub fn cov_drift_coefficient(params: &ModelBParams) -> f64 {
    let nf = params.n as f64;
    (nf - 1.0 - 2.0 * params.gamma * nf) / nf
}

/// Replicates one Euler–Maruyama step and compares `E[dCov]/dt` entrywise with
/// `((N - 1 - 2 gamma N)/N) Cov`.
pub fn cov_drift_check<R: Rng + ?Sized>(
    state: &DiffusionState,
    params: &ModelBParams,
    nsamples: usize,
    rng: &mut R,
) -> Result<CovDriftReport> {
    if nsamples < 10_000 {
        return Err(Error::usage(format!("need at least 10^4 replicas, got {nsamples}")));
    }
    let d = state.z.ncols();
    let c0 = state.cov();
    let mut samples = vec![Vec::with_capacity(nsamples); d * (d + 1) / 2];
    for _ in 0..nsamples {
        let c = em_step(state, params, rng).cov();
        let mut k = 0;
        for i in 0..d {
            for j in i..d {
                samples[k].push((c[(i, j)] - c0[(i, j)]) / params.dt);
                k += 1;
            }
        }
    }
    let coefficient = cov_drift_coefficient(params);
    let mut entries = Vec::new();
    let mut k = 0;
    for i in 0..d {
        for j in i..d {
            let est = stats::mean_se(&samples[k]);
            entries.push((i, j, est, est.z(coefficient * c0[(i, j)])));
            k += 1;
        }
    }
    Ok(CovDriftReport { coefficient, entries, nsamples })
}
