//! Dense linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Thin QR factorisation with the diagonal of `R` made non-negative, which makes it unique
/// for full-column-rank input.
pub fn qr_positive(a: &DMatrix<f64>) -> (DMatrix<f64>, DMatrix<f64>) {
    let qr = a.clone().qr();
    let mut q = qr.q();
    let mut r = qr.r();
    for i in 0..r.nrows() {
        if r[(i, i)] < 0.0 {
            r.row_mut(i).neg_mut();
            q.column_mut(i).neg_mut();
        }
    }
    (q, r)
}

/// Symmetric eigendecomposition with eigenvalues sorted in descending order; eigenvectors
/// are the matching columns.
pub fn sym_eigen_desc(a: &DMatrix<f64>) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let n = a.nrows();
    let eig = SymmetricEigen::try_new(a.clone(), f64::EPSILON, 10_000)
        .ok_or_else(|| Error::numerical("sym_eigen", "symmetric eigendecomposition did not converge"))?;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = DVector::from_iterator(n, order.iter().map(|&i| eig.eigenvalues[i]));
    let mut vectors = DMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok((values, vectors))
}

fn sqrt_from_eigen(values: &DVector<f64>, vectors: &DMatrix<f64>) -> (DMatrix<f64>, bool) {
    let mut clamped = false;
    let roots = values.map(|v| {
        if v < 0.0 {
            clamped = true;
            0.0
        } else {
            v.sqrt()
        }
    });
    let t = vectors * DMatrix::from_diagonal(&roots) * vectors.transpose();
    ((&t + t.transpose()) * 0.5, clamped)
}

/// Symmetric PSD square root of a symmetric PSD matrix.
///
/// Accepts asymmetry up to `1e-10` (relative to the largest entry) and negative eigenvalues
/// down to `-1e-12 * trace`, which are clamped to zero.
pub fn psd_sqrt(c: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if !c.is_square() {
        return Err(Error::domain("psd_sqrt", "matrix must be square"));
    }
    let scale = c.amax().max(f64::MIN_POSITIVE);
    if (c - c.transpose()).amax() > 1e-10 * scale {
        return Err(Error::domain("psd_sqrt", "matrix is not symmetric"));
    }
    let sym = (c + c.transpose()) * 0.5;
    let (values, vectors) = sym_eigen_desc(&sym)?;
    let floor = -1e-12 * sym.trace().abs().max(f64::MIN_POSITIVE);
    if let Some(&low) = values.iter().next_back() {
        if low < floor {
            return Err(Error::domain("psd_sqrt", format!("matrix is indefinite (eigenvalue {low:e})")));
        }
    }
    Ok(sqrt_from_eigen(&values, &vectors).0)
}

/// Square root of a covariance estimate; any negative eigenvalue is clamped and reported.
pub fn psd_sqrt_clamped(c: &DMatrix<f64>) -> (DMatrix<f64>, bool) {
    let sym = (c + c.transpose()) * 0.5;
    match sym_eigen_desc(&sym) {
        Ok((values, vectors)) => {
            let (t, clamped) = sqrt_from_eigen(&values, &vectors);
            if clamped && values[values.len() - 1] < -1e-12 * sym.trace().abs() {
                log::warn!("clamped materially negative covariance eigenvalue {:e}", values[values.len() - 1]);
            }
            (t, clamped)
        }
        Err(_) => {
            log::warn!("covariance eigendecomposition failed; using zero factor");
            (DMatrix::zeros(c.nrows(), c.ncols()), true)
        }
    }
}

/// `|A| = (A^T A)^{1/2}`, as `V diag(s) V^T` from the thin SVD so small singular values
/// are not squared away.
pub fn matrix_abs(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if a.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("matrix_abs", "non-finite entry"));
    }
    let svd = a
        .clone()
        .try_svd(false, true, f64::EPSILON, 0)
        .ok_or_else(|| Error::numerical("matrix_abs", "SVD did not converge"))?;
    let vt = svd.v_t.expect("requested right singular vectors");
    let scaled = DMatrix::from_fn(vt.nrows(), vt.ncols(), |i, j| svd.singular_values[i] * vt[(i, j)]);
    let abs = vt.transpose() * scaled;
    Ok((&abs + abs.transpose()) * 0.5)
}

/// Norm of `e_target` after removing its projection onto the span of `rows`.
///
/// The rows are orthonormalised by modified Gram–Schmidt with one re-orthogonalisation pass.
pub fn complement_projection_norm(rows: &[DVector<f64>], target: usize) -> Result<f64> {
    let mut basis: Vec<DVector<f64>> = Vec::with_capacity(rows.len());
    for row in rows {
        let norm0 = row.norm();
        let mut v = row.clone();
        for _ in 0..2 {
            for q in &basis {
                let c = q.dot(&v);
                v.axpy(-c, q, 1.0);
            }
        }
        let norm = v.norm();
        if !(norm > 1e-13 * norm0) {
            return Err(Error::numerical("complement_projection_norm", "row block is rank deficient"));
        }
        basis.push(v / norm);
    }
    let n = rows.first().map_or(target + 1, |r| r.len());
    let mut e = DVector::zeros(n);
    e[target] = 1.0;
    for _ in 0..2 {
        for q in &basis {
            let c = q.dot(&e);
            e.axpy(-c, q, 1.0);
        }
    }
    Ok(e.norm().min(1.0))
}

/// Upper-triangular matrix kept as `diag(exp(log_scale)) * unit`, where `unit` is upper
/// triangular with ones on the diagonal.
///
/// Products of many triangular factors from repeated QR steps have rows of wildly different
/// magnitude; this form stores the magnitudes in the log domain so singular values that
/// differ by hundreds of orders of magnitude stay resolvable.
#[derive(Debug, Clone, PartialEq)]
pub struct GradedUpper {
    log_scale: Vec<f64>,
    unit: DMatrix<f64>,
}

impl GradedUpper {
    pub fn identity(n: usize) -> Self {
        Self { log_scale: vec![0.0; n], unit: DMatrix::identity(n, n) }
    }

    /// From an upper-triangular matrix with positive diagonal.
    pub fn from_upper(r: &DMatrix<f64>) -> Result<Self> {
        let n = r.nrows();
        let mut g = Self::identity(n);
        for i in 0..n {
            let rii = r[(i, i)];
            if !(rii > 0.0) || !rii.is_finite() {
                return Err(Error::numerical("GradedUpper::from_upper", format!("diagonal entry {i} is {rii}")));
            }
            g.log_scale[i] = rii.ln();
            for j in i + 1..n {
                g.unit[(i, j)] = r[(i, j)] / rii;
            }
        }
        Ok(g)
    }

    pub fn dim(&self) -> usize {
        self.log_scale.len()
    }

    pub fn log_scale(&self) -> &[f64] {
        &self.log_scale
    }

    pub fn unit(&self) -> &DMatrix<f64> {
        &self.unit
    }

    /// Replaces `self` with `r * self` for upper-triangular `r` with positive diagonal.
    pub fn left_mul(&mut self, r: &DMatrix<f64>) {
        let n = self.dim();
        for i in 0..n {
            let rii = r[(i, i)];
            for k in i + 1..n {
                let coef = r[(i, k)] / rii * (self.log_scale[k] - self.log_scale[i]).exp();
                if coef != 0.0 {
                    for j in k..n {
                        let add = coef * self.unit[(k, j)];
                        self.unit[(i, j)] += add;
                    }
                }
            }
            self.log_scale[i] += rii.ln();
        }
    }

    pub fn max_log_scale(&self) -> f64 {
        self.log_scale.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// `(s, M)` with `self = e^s M` and the largest row scale of `M` equal to one.
    pub fn scaled(&self) -> (f64, DMatrix<f64>) {
        let s = self.max_log_scale();
        let mut m = self.unit.clone();
        for i in 0..self.dim() {
            let f = (self.log_scale[i] - s).exp();
            m.row_mut(i).scale_mut(f);
        }
        (s, m)
    }

    /// The matrix itself; entries overflow once the scales exceed the `f64` range.
    pub fn materialize(&self) -> DMatrix<f64> {
        let (s, m) = self.scaled();
        m * s.exp()
    }

    /// `log |det|`.
    pub fn log_abs_det(&self) -> f64 {
        self.log_scale.iter().sum()
    }

    /// Logarithms of the `count` largest singular values, descending.
    ///
    /// Uses `sum_{i<=k} log s_i = log s_max(C_k)` for the `k`-th compound matrix, which
    /// factors as a diagonal of subset scales times the compound of the unit factor. Cost is
    /// combinatorial in `count`; intended for small dimensions.
    pub fn log_singular_values(&self, count: usize) -> Vec<f64> {
        let n = self.dim();
        let count = count.min(n);
        let mut partial = Vec::with_capacity(count + 1);
        partial.push(0.0);
        for k in 1..=count {
            let subsets = combinations(n, k);
            let weights: Vec<f64> = subsets.iter().map(|s| s.iter().map(|&i| self.log_scale[i]).sum()).collect();
            let wmax = weights.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let size = subsets.len();
            let mut c = DMatrix::zeros(size, size);
            let mut sub = DMatrix::zeros(k, k);
            for (a, rows) in subsets.iter().enumerate() {
                let f = (weights[a] - wmax).exp();
                if f == 0.0 {
                    continue;
                }
                for (b, cols) in subsets.iter().enumerate() {
                    // minors of a unit upper-triangular matrix vanish unless rows[i] <= cols[i]
                    if rows.iter().zip(cols).any(|(r, c)| r > c) {
                        continue;
                    }
                    for (i, &r) in rows.iter().enumerate() {
                        for (j, &cc) in cols.iter().enumerate() {
                            sub[(i, j)] = self.unit[(r, cc)];
                        }
                    }
                    c[(a, b)] = f * sub.clone().determinant();
                }
            }
            let smax = if size == 1 { c[(0, 0)].abs() } else { c.singular_values().max() };
            partial.push(wmax + smax.ln());
        }
        partial.windows(2).map(|w| w[1] - w[0]).collect()
    }
}

/// All `k`-subsets of `0..n` in lexicographic order.
pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.clone());
        let mut i = k;
        loop {
            if i == 0 {
                return out;
            }
            i -= 1;
            if idx[i] < n - k + i {
                idx[i] += 1;
                for j in i + 1..k {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
        }
    }
}
