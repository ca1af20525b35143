//! Discrete-time Gaussian consensus process.
//!
//! Each round every individual draws a fresh opinion from a Gaussian with the crowd's mean
//! and `alpha` times the crowd's covariance, then moves a fraction `1 - beta` towards it.
//! The same law is produced by a random matrix acting on the opinion matrix, which is what
//! the long-run tracker uses.

use nalgebra::{DMatrix, DVector, RowDVector};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::analytic::{lambda1, ModelParams};
use crate::error::{Error, Result};
use crate::linalg::{psd_sqrt_clamped, qr_positive, sym_eigen_desc, GradedUpper};
use crate::parallel::par_map;
use crate::random_matrix::sample_gaussian_matrix;
use crate::rng::{normal, RngStream};
use crate::stats::{self, Estimate};

/// Below this top-to-second eigenvalue ratio a run counts as aligned in the sphere check.
pub const DEFAULT_ALIGNMENT_THRESHOLD: f64 = 1e-6;

/// Opinion matrix (row `i` is individual `i`) at integer time `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct OpinionState {
    x: DMatrix<f64>,
    t: usize,
}

impl OpinionState {
    /// Initial state; its covariance must be positive definite.
    pub fn new(x: DMatrix<f64>) -> Result<Self> {
        let (n, d) = x.shape();
        if n < d + 1 {
            return Err(Error::usage(format!("need N >= d + 1, got {n} x {d} opinion matrix")));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::domain("OpinionState::new", "opinions must be finite"));
        }
        let s = Self { x, t: 0 };
        let cov = s.cov();
        let (values, _) = sym_eigen_desc(&cov)?;
        let low = values[d - 1];
        if !(low > 1e-12 * cov.trace()) {
            return Err(Error::domain("OpinionState::new", "initial covariance is not positive definite"));
        }
        Ok(s)
    }

    /// Any opinion matrix, including consensus states; no rank check.
    pub fn from_parts_unchecked(x: DMatrix<f64>, t: usize) -> Self {
        Self { x, t }
    }

    /// I.i.d. standard normal opinions.
    pub fn standard_normal<R: Rng + ?Sized>(n: usize, d: usize, rng: &mut R) -> Result<Self> {
        Self::new(sample_gaussian_matrix(n, d, rng))
    }

    pub fn x(&self) -> &DMatrix<f64> {
        &self.x
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn n(&self) -> usize {
        self.x.nrows()
    }

    pub fn d(&self) -> usize {
        self.x.ncols()
    }

    pub fn mean(&self) -> RowDVector<f64> {
        self.x.row_mean()
    }

    pub fn centered(&self) -> DMatrix<f64> {
        let mu = self.mean();
        let mut c = self.x.clone();
        for mut row in c.row_iter_mut() {
            row -= &mu;
        }
        c
    }

    /// `(1/N) Xc^T Xc` with `Xc` the centered opinions.
    pub fn cov(&self) -> DMatrix<f64> {
        let c = self.centered();
        let cov = c.transpose() * &c / self.n() as f64;
        (&cov + cov.transpose()) * 0.5
    }
}

/// Helmert basis of the sum-zero subspace, as an `(N-1) x N` matrix with orthonormal rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionMatrix {
    v: DMatrix<f64>,
}

impl ProjectionMatrix {
    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.v
    }
}

pub fn build_projection(n: usize) -> Result<ProjectionMatrix> {
    if n < 2 {
        return Err(Error::usage(format!("N must be at least 2, got {n}")));
    }
    let mut v = DMatrix::zeros(n - 1, n);
    for k in 1..n {
        let kf = k as f64;
        let c = (kf * (kf + 1.0)).sqrt();
        for j in 0..k {
            v[(k - 1, j)] = 1.0 / c;
        }
        v[(k - 1, k)] = -kf / c;
    }
    Ok(ProjectionMatrix { v })
}

fn check_dims(state: &OpinionState, params: &ModelParams<f64>) -> Result<()> {
    if state.n() != params.n || state.d() != params.d {
        return Err(Error::usage(format!(
            "state is {} x {} but parameters have N = {}, d = {}",
            state.n(),
            state.d(),
            params.n,
            params.d
        )));
    }
    Ok(())
}

/// One round of direct resampling: `X_i <- beta X_i + (1 - beta) Y_i` with
/// `Y_i ~ N(mean, alpha Cov)` independently.
pub fn step_direct<R: Rng + ?Sized>(
    state: &OpinionState,
    params: &ModelParams<f64>,
    rng: &mut R,
) -> Result<OpinionState> {
    check_dims(state, params)?;
    Ok(step_direct_raw(state, params.alpha, params.beta, rng))
}

/// [`step_direct`] without parameter validation; `alpha = 0` gives the noiseless contraction.
#[doc(hidden)]
pub fn step_direct_raw<R: Rng + ?Sized>(state: &OpinionState, alpha: f64, beta: f64, rng: &mut R) -> OpinionState {
    let (n, d) = state.x.shape();
    let mu = state.mean();
    let (factor, _) = psd_sqrt_clamped(&(state.cov() * alpha));
    let z = sample_gaussian_matrix(n, d, rng);
    let noise = z * factor;
    let mut x = DMatrix::zeros(n, d);
    for i in 0..n {
        let y = &mu + noise.row(i);
        x.set_row(i, &(state.x.row(i) * beta + y * (1.0 - beta)));
    }
    OpinionState { x, t: state.t + 1 }
}

/// One draw of the `N x N` update matrix
/// `S = (1/N) 11^T + (beta I + sqrt(rho/N) G)(I - (1/N) 11^T)`, which fixes the all-ones vector.
pub fn sample_update_matrix<R: Rng + ?Sized>(params: &ModelParams<f64>, rng: &mut R) -> DMatrix<f64> {
    let n = params.n;
    let nf = n as f64;
    let mut core = sample_gaussian_matrix(n, n, rng) * params.noise_scale();
    for i in 0..n {
        core[(i, i)] += params.beta;
    }
    // core * (I - 11^T/N) subtracts each row's mean from that row
    let row_means = core.column_mean();
    let mut s = core;
    for i in 0..n {
        for j in 0..n {
            s[(i, j)] += 1.0 / nf - row_means[i];
        }
    }
    s
}

/// One round through the update matrix.
///
/// Computed as `1 mean^T + S Xc`, equal to `S X` because `S 1 = 1`, but without mixing
/// the (possibly large) mean into the centered part.
pub fn step_matrix<R: Rng + ?Sized>(
    state: &OpinionState,
    params: &ModelParams<f64>,
    rng: &mut R,
) -> Result<OpinionState> {
    check_dims(state, params)?;
    let s = sample_update_matrix(params, rng);
    let mu = state.mean();
    let mut x = s * state.centered();
    for mut row in x.row_iter_mut() {
        row += &mu;
    }
    Ok(OpinionState { x, t: state.t + 1 })
}

/// Centered state scaled so the top covariance eigenvalue is one.
pub fn normalize_state(state: &OpinionState) -> Result<OpinionState> {
    let (values, _) = sym_eigen_desc(&state.cov())?;
    let top = values[0];
    if !(top > 0.0) || !top.is_finite() {
        return Err(Error::domain("normalize_state", "covariance is zero (consensus) or not finite"));
    }
    Ok(OpinionState { x: state.centered() / top.sqrt(), t: state.t })
}

/// Centered opinions as `basis * R`, with `basis` an `N x d` orthonormal frame and `R` a
/// graded upper-triangular factor, plus the mean. Scale-free quantities stay accurate
/// long after the opinions themselves overflow or underflow.
#[derive(Debug, Clone)]
pub struct FactoredOpinions {
    mean: RowDVector<f64>,
    basis: DMatrix<f64>,
    shape: GradedUpper,
    t: usize,
    mean_finite: bool,
}

impl FactoredOpinions {
    pub fn from_state(state: &OpinionState) -> Result<Self> {
        let (q, r) = qr_positive(&state.centered());
        Ok(Self { mean: state.mean(), basis: q, shape: GradedUpper::from_upper(&r)?, t: state.t, mean_finite: true })
    }

    pub fn t(&self) -> usize {
        self.t
    }

    pub fn n(&self) -> usize {
        self.basis.nrows()
    }

    pub fn d(&self) -> usize {
        self.basis.ncols()
    }

    pub fn mean(&self) -> &RowDVector<f64> {
        &self.mean
    }

    /// False once the mean has left the `f64` range.
    pub fn mean_finite(&self) -> bool {
        self.mean_finite
    }

    pub fn step<R: Rng + ?Sized>(&mut self, params: &ModelParams<f64>, rng: &mut R) {
        let s = sample_update_matrix(params, rng);
        let mut y = s * &self.basis;
        let m = y.row_mean();
        for mut row in y.row_iter_mut() {
            row -= &m;
        }
        if self.mean_finite {
            let (scale, r) = self.shape.scaled();
            let inc = (&m * r) * scale.exp();
            self.mean += inc;
            self.mean_finite = self.mean.iter().all(|v| v.is_finite());
        }
        let (q, r) = qr_positive(&y);
        self.basis = q;
        self.shape.left_mul(&r);
        self.t += 1;
    }

    /// Logarithms of the covariance eigenvalues, descending.
    pub fn log_cov_eigenvalues(&self) -> Vec<f64> {
        let ln_n = (self.n() as f64).ln();
        self.shape.log_singular_values(self.d()).into_iter().map(|s| 2.0 * s - ln_n).collect()
    }

    /// `log Cov_jj` for every topic `j`.
    pub fn log_var_topics(&self) -> Vec<f64> {
        let l = self.shape.log_scale();
        let u = self.shape.unit();
        let ln_n = (self.n() as f64).ln();
        (0..self.d())
            .map(|j| {
                let terms: Vec<f64> =
                    (0..=j).filter(|&i| u[(i, j)] != 0.0).map(|i| 2.0 * (l[i] + u[(i, j)].abs().ln())).collect();
                let hi = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                hi + terms.iter().map(|t| (t - hi).exp()).sum::<f64>().ln() - ln_n
            })
            .collect()
    }

    /// Topic correlation matrix.
    pub fn correlations(&self) -> DMatrix<f64> {
        let (_, r) = self.shape.scaled();
        correlation_from_cov(&(r.transpose() * &r))
    }

    /// `log max_i |X_i - mean|`.
    pub fn log_diameter(&self) -> f64 {
        let (s, r) = self.shape.scaled();
        let rows = &self.basis * r;
        let max = rows.row_iter().map(|row| row.norm()).fold(0.0, f64::max);
        s + max.ln()
    }

    /// Centered opinions scaled to unit top covariance eigenvalue.
    pub fn normalized_centered(&self) -> Result<DMatrix<f64>> {
        let (_, r) = self.shape.scaled();
        let c = &self.basis * r;
        let cov = c.transpose() * &c / self.n() as f64;
        let (values, _) = sym_eigen_desc(&cov)?;
        if !(values[0] > 0.0) {
            return Err(Error::domain("normalized_centered", "zero covariance"));
        }
        Ok(c / values[0].sqrt())
    }

    /// The opinion matrix itself; entries may be infinite once the scale overflows.
    pub fn to_state(&self) -> OpinionState {
        let mut x = &self.basis * self.shape.materialize();
        for mut row in x.row_iter_mut() {
            row += &self.mean;
        }
        OpinionState { x, t: self.t }
    }
}

fn correlation_from_cov(cov: &DMatrix<f64>) -> DMatrix<f64> {
    let d = cov.nrows();
    let scale = cov.diagonal().amax();
    DMatrix::from_fn(d, d, |i, j| {
        let (a, b) = (cov[(i, i)], cov[(j, j)]);
        if a <= 1e-300_f64.max(1e-15 * scale) || b <= 1e-300_f64.max(1e-15 * scale) {
            f64::NAN
        } else if i == j {
            1.0
        } else {
            (cov[(i, j)] / (a * b).sqrt()).clamp(-1.0, 1.0)
        }
    })
}

/// Diagnostics recorded every `stride` steps, starting at `t = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub stride: usize,
    pub times: Vec<usize>,
    /// Per-record mean opinion; non-finite after `truncated_at`.
    pub means: Vec<Vec<f64>>,
    /// Covariance eigenvalues, descending.
    pub cov_eigenvalues: Vec<Vec<f64>>,
    pub log_cov_eigenvalues: Vec<Vec<f64>>,
    /// Correlations of topic pairs `(0,1), (0,2), ..., (d-2,d-1)`.
    pub topic_correlations: Vec<Vec<f64>>,
    pub log_var_topic: Vec<Vec<f64>>,
    pub diameters: Vec<f64>,
    pub log_diameters: Vec<f64>,
    /// `log(e_2 / e_1)`; NaN when `d = 1`.
    pub log_eig_ratios: Vec<f64>,
    /// First recorded time at which the mean overflowed, if any. Scale-free diagnostics
    /// remain valid after it.
    pub truncated_at: Option<usize>,
}

impl TrajectoryRecord {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Runs `steps` rounds from `x0` through the update matrix, recording diagnostics every
/// `record_stride` steps.
pub fn run_trajectory<R: Rng + ?Sized>(
    params: &ModelParams<f64>,
    x0: &OpinionState,
    steps: usize,
    rng: &mut R,
    record_stride: usize,
) -> Result<TrajectoryRecord> {
    check_dims(x0, params)?;
    if steps < 1 || record_stride < 1 {
        return Err(Error::usage("steps and record stride must be positive"));
    }
    let cap = steps / record_stride + 1;
    let mut rec = TrajectoryRecord {
        stride: record_stride,
        times: Vec::with_capacity(cap),
        means: Vec::with_capacity(cap),
        cov_eigenvalues: Vec::with_capacity(cap),
        log_cov_eigenvalues: Vec::with_capacity(cap),
        topic_correlations: Vec::with_capacity(cap),
        log_var_topic: Vec::with_capacity(cap),
        diameters: Vec::with_capacity(cap),
        log_diameters: Vec::with_capacity(cap),
        log_eig_ratios: Vec::with_capacity(cap),
        truncated_at: None,
    };
    let mut tracker = FactoredOpinions::from_state(x0)?;
    let d = params.d;
    let t0 = x0.t;
    let record = |tr: &FactoredOpinions, rec: &mut TrajectoryRecord| {
        rec.times.push(tr.t());
        if !tr.mean_finite() && rec.truncated_at.is_none() {
            rec.truncated_at = Some(tr.t());
        }
        rec.means.push(if tr.mean_finite() { tr.mean().iter().copied().collect() } else { vec![f64::NAN; d] });
        let le = tr.log_cov_eigenvalues();
        rec.cov_eigenvalues.push(le.iter().map(|v| v.exp()).collect());
        rec.log_eig_ratios.push(if d >= 2 { le[1] - le[0] } else { f64::NAN });
        rec.log_cov_eigenvalues.push(le);
        let corr = tr.correlations();
        let mut pairs = Vec::with_capacity(d * (d - 1) / 2);
        for i in 0..d {
            for j in i + 1..d {
                pairs.push(corr[(i, j)]);
            }
        }
        rec.topic_correlations.push(pairs);
        rec.log_var_topic.push(tr.log_var_topics());
        let ld = tr.log_diameter();
        rec.log_diameters.push(ld);
        rec.diameters.push(ld.exp());
    };
    record(&tracker, &mut rec);
    for step in 1..=steps {
        tracker.step(params, rng);
        if step % record_stride == 0 {
            record(&tracker, &mut rec);
        }
    }
    debug_assert_eq!(rec.times.first().copied(), Some(t0));
    Ok(rec)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentDiagnostics {
    /// `e_2 / e_1` of the covariance.
    pub eig_ratio: f64,
    /// Pearson correlations of the topic columns; NaN where a topic has zero variance.
    pub correlations: DMatrix<f64>,
    pub undefined_topics: Vec<usize>,
}

pub fn alignment_diagnostics(state: &OpinionState) -> Result<AlignmentDiagnostics> {
    if state.d() < 2 {
        return Err(Error::usage("alignment diagnostics need d >= 2"));
    }
    let cov = state.cov();
    let (values, _) = sym_eigen_desc(&cov)?;
    if !(values[0] > 0.0) {
        return Err(Error::domain("alignment_diagnostics", "covariance has no positive eigenvalue"));
    }
    let correlations = correlation_from_cov(&cov);
    let undefined_topics = (0..state.d()).filter(|&i| correlations[(i, i)].is_nan()).collect();
    Ok(AlignmentDiagnostics { eig_ratio: (values[1] / values[0]).clamp(0.0, 1.0), correlations, undefined_topics })
}

/// Mean and variance checks of one covariance entry after one round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovEntryCheck {
    pub i: usize,
    pub j: usize,
    pub expected_mean: f64,
    pub mean: Estimate,
    pub mean_z: f64,
    /// Variance with self-confidence entering as `2 (beta - 1)^2 rho / N`.
    pub expected_var_printed: f64,
    /// Variance with self-confidence entering as `2 beta^2 rho / N`.
    pub expected_var_derived: f64,
    pub var: Estimate,
    pub var_z_printed: f64,
    pub var_z_derived: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CovMomentReport {
    pub mean_factor: f64,
    pub var_coefficient_printed: f64,
    pub var_coefficient_derived: f64,
    pub entries: Vec<CovEntryCheck>,
    pub nsamples: usize,
}

impl CovMomentReport {
    pub fn max_abs_mean_z(&self) -> f64 {
        self.entries.iter().map(|e| e.mean_z.abs()).fold(0.0, f64::max)
    }
    pub fn max_abs_var_z_printed(&self) -> f64 {
        self.entries.iter().map(|e| e.var_z_printed.abs()).fold(0.0, f64::max)
    }
    pub fn max_abs_var_z_derived(&self) -> f64 {
        self.entries.iter().map(|e| e.var_z_derived.abs()).fold(0.0, f64::max)
    }
}

/// Conditional mean factor `(N-1) rho / N + beta^2` of the covariance after one round.
pub fn cov_mean_factor(params: &ModelParams<f64>) -> f64 {
    let nf = params.n as f64;
    (nf - 1.0) * params.rho() / nf + params.beta * params.beta
}

/// Coefficient `c` in `Var Cov_ij = c (Cov_ii Cov_jj + Cov_ij^2)`, in the two candidate forms
/// `(printed, derived)`. They differ only in the self-confidence term and coincide at `beta = 1/2`.
pub fn cov_var_coefficients(params: &ModelParams<f64>) -> (f64, f64) {
    let nf = params.n as f64;
    let rho = params.rho();
    let base = rho * rho * (nf - 1.0) / (nf * nf);
    let b = params.beta;
    (base + 2.0 * (b - 1.0) * (b - 1.0) * rho / nf, base + 2.0 * b * b * rho / nf)
}

/// Replicates one round from `state` and compares every covariance entry's sample mean
/// and variance with the conditional moments.
pub fn cov_conditional_moment_check<R: Rng + ?Sized>(
    state: &OpinionState,
    params: &ModelParams<f64>,
    nsamples: usize,
    rng: &mut R,
) -> Result<CovMomentReport> {
    check_dims(state, params)?;
    if nsamples < 10_000 {
        return Err(Error::usage(format!("need at least 10^4 replicas, got {nsamples}")));
    }
    let d = params.d;
    let c0 = state.cov();
    let mut samples: Vec<Vec<f64>> = vec![Vec::with_capacity(nsamples); d * (d + 1) / 2];
    for _ in 0..nsamples {
        let c = step_matrix(state, params, rng)?.cov();
        let mut k = 0;
        for i in 0..d {
            for j in i..d {
                samples[k].push(c[(i, j)]);
                k += 1;
            }
        }
    }
    let factor = cov_mean_factor(params);
    let (coef_p, coef_d) = cov_var_coefficients(params);
    let mut entries = Vec::new();
    let mut k = 0;
    for i in 0..d {
        for j in i..d {
            let mean = stats::mean_se(&samples[k]);
            let var = stats::variance_se(&samples[k]);
            let shape = c0[(i, i)] * c0[(j, j)] + c0[(i, j)] * c0[(i, j)];
            let expected_mean = factor * c0[(i, j)];
            let (vp, vd) = (coef_p * shape, coef_d * shape);
            entries.push(CovEntryCheck {
                i,
                j,
                expected_mean,
                mean,
                mean_z: mean.z(expected_mean),
                expected_var_printed: vp,
                expected_var_derived: vd,
                var,
                var_z_printed: var.z(vp),
                var_z_derived: var.z(vd),
            });
            k += 1;
        }
    }
    Ok(CovMomentReport {
        mean_factor: factor,
        var_coefficient_printed: coef_p,
        var_coefficient_derived: coef_d,
        entries,
        nsamples,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogVarWalkReport {
    /// Mean per-step increment of `log Cov_jj` for each topic.
    pub increments: Vec<Estimate>,
    pub expected: f64,
    pub z: Vec<f64>,
    pub lag1_autocorrelation: Vec<f64>,
    /// `sqrt(n)` times the lag-one autocorrelation; approximately standard normal.
    pub lag1_z: Vec<f64>,
}

/// Checks that `log Cov_jj` moves as a random walk with mean increment `2 lambda1`
/// and uncorrelated increments. Needs a trajectory recorded at every step.
pub fn logvar_random_walk_check(record: &TrajectoryRecord, params: &ModelParams<f64>) -> Result<LogVarWalkReport> {
    if record.stride != 1 {
        return Err(Error::usage("log-variance walk check needs a trajectory recorded every step"));
    }
    if record.len() < 3 {
        return Err(Error::usage("trajectory too short"));
    }
    let expected = 2.0 * lambda1(params)?;
    let d = record.log_var_topic[0].len();
    let mut report =
        LogVarWalkReport { increments: vec![], expected, z: vec![], lag1_autocorrelation: vec![], lag1_z: vec![] };
    for j in 0..d {
        let inc: Vec<f64> = record.log_var_topic.windows(2).map(|w| w[1][j] - w[0][j]).collect();
        let est = stats::mean_se(&inc);
        let r = stats::lag1_autocorrelation(&inc);
        report.z.push(est.z(expected));
        report.increments.push(est);
        report.lag1_z.push(r * (inc.len() as f64).sqrt());
        report.lag1_autocorrelation.push(r);
    }
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphereLimitReport {
    pub n: usize,
    pub replicas: usize,
    /// Replicas whose eigenvalue ratio had not dropped below the alignment threshold.
    pub inconclusive: usize,
    /// `E x_i^2` per coordinate, target `1/N`.
    pub second_moments: Vec<Estimate>,
    /// `E x_i^4` per coordinate, target `3(N-1)/(N^2 (N+1))`.
    pub fourth_moments: Vec<Estimate>,
    pub max_abs_coordinate_sum: f64,
}

/// `E x_i^4` for `x` uniform on the unit sphere of the sum-zero hyperplane in `R^N`.
pub fn constrained_sphere_fourth_moment(n: usize) -> f64 {
    let nf = n as f64;
    3.0 * (nf - 1.0) / (nf * nf * (nf + 1.0))
}

/// Uniform draw from the unit sphere of the sum-zero hyperplane in `R^N`.
pub fn sample_constrained_sphere<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Result<DVector<f64>> {
    let v = build_projection(n)?;
    let y = DVector::from_fn(n - 1, |_, _| normal(rng));
    let x = v.matrix().transpose() * y;
    Ok(&x / x.norm())
}

/// Unit vector of individual positions along the dominant opinion direction, after `steps`
/// rounds from i.i.d. normal opinions, over independent replicas.
pub fn sphere_limit_check(
    params: &ModelParams<f64>,
    steps: usize,
    replicas: usize,
    stream: RngStream,
) -> Result<SphereLimitReport> {
    if replicas < 2 {
        return Err(Error::usage("need at least two replicas"));
    }
    let n = params.n;
    let runs: Vec<Result<Option<DVector<f64>>>> = par_map(replicas, |r| {
        let mut rng = stream.child(r as u64).rng();
        let x0 = OpinionState::standard_normal(n, params.d, &mut rng)?;
        let mut tr = FactoredOpinions::from_state(&x0)?;
        for _ in 0..steps {
            tr.step(params, &mut rng);
        }
        let le = tr.log_cov_eigenvalues();
        if params.d >= 2 && le[1] - le[0] > DEFAULT_ALIGNMENT_THRESHOLD.ln() {
            return Ok(None);
        }
        let xn = tr.normalized_centered()?;
        let cov = xn.transpose() * &xn / n as f64;
        let (_, vecs) = sym_eigen_desc(&cov)?;
        let x = &xn * vecs.column(0);
        Ok(Some(&x / x.norm()))
    });
    let mut sq = vec![Vec::new(); n];
    let mut quart = vec![Vec::new(); n];
    let mut inconclusive = 0;
    let mut max_sum: f64 = 0.0;
    for run in runs {
        match run? {
            None => inconclusive += 1,
            Some(x) => {
                max_sum = max_sum.max(x.sum().abs());
                for i in 0..n {
                    sq[i].push(x[i] * x[i]);
                    quart[i].push(x[i].powi(4));
                }
            }
        }
    }
    if replicas - inconclusive < 2 {
        return Err(Error::numerical("sphere_limit_check", "fewer than two replicas reached alignment"));
    }
    Ok(SphereLimitReport {
        n,
        replicas,
        inconclusive,
        second_moments: sq.iter().map(|v| stats::mean_se(v)).collect(),
        fourth_moments: quart.iter().map(|v| stats::mean_se(v)).collect(),
        max_abs_coordinate_sum: max_sum,
    })
}
