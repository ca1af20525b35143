//! Sweeps of the top exponent over an `(alpha, beta)` grid.

use serde::{Deserialize, Serialize};

use crate::analytic::{classify_regime, critical_alpha, lambda1, ModelParams, RegimeKind};
use crate::error::{Error, Result};
use crate::parallel::par_map;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseDiagramSpec {
    pub n: usize,
    /// Ascending, positive.
    pub alpha_values: Vec<f64>,
    /// Ascending, in `[0, 1)`.
    pub beta_values: Vec<f64>,
    pub tol: f64,
}

impl PhaseDiagramSpec {
    pub fn new(n: usize, alpha_values: Vec<f64>, beta_values: Vec<f64>, tol: f64) -> Result<Self> {
        if n < 2 {
            return Err(Error::usage(format!("N: must be at least 2, got {n}")));
        }
        if alpha_values.is_empty() || beta_values.is_empty() {
            return Err(Error::usage("grid: needs at least one alpha and one beta"));
        }
        if !alpha_values.iter().all(|a| *a > 0.0 && a.is_finite()) || !alpha_values.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::usage("alpha: grid values must be positive and strictly ascending"));
        }
        if !beta_values.iter().all(|b| (0.0..1.0).contains(b)) || !beta_values.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::usage("beta: grid values must lie in [0, 1) and be strictly ascending"));
        }
        if !(tol > 0.0) {
            return Err(Error::usage("tol: must be positive"));
        }
        Ok(Self { n, alpha_values, beta_values, tol })
    }

    /// Log-spaced alphas in `[alpha_min, alpha_max]` and betas `0, 1/k, ..., (k-1)/k`.
    pub fn log_grid(
        n: usize,
        alpha_min: f64,
        alpha_max: f64,
        alpha_count: usize,
        beta_count: usize,
        tol: f64,
    ) -> Result<Self> {
        if !(alpha_min > 0.0 && alpha_max > alpha_min) {
            return Err(Error::usage("alpha_min: need 0 < alpha_min < alpha_max"));
        }
        if alpha_count < 2 || beta_count < 1 {
            return Err(Error::usage("alpha_count: need alpha_count >= 2 and beta_count >= 1"));
        }
        let (lo, hi) = (alpha_min.ln(), alpha_max.ln());
        let step = (hi - lo) / (alpha_count - 1) as f64;
        let alphas = (0..alpha_count).map(|i| (lo + step * i as f64).exp()).collect();
        let betas = (0..beta_count).map(|j| j as f64 / beta_count as f64).collect();
        Self::new(n, alphas, betas, tol)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseCell {
    pub alpha: f64,
    pub beta: f64,
    /// NaN when evaluation failed.
    pub lambda1: f64,
    pub regime: Option<RegimeKind>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticalPoint {
    pub beta: f64,
    pub alpha_cr: f64,
    /// `(1 - beta)^2 alpha_cr`.
    pub rho_cr: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseDiagramGrid {
    pub n: usize,
    pub alpha_values: Vec<f64>,
    pub beta_values: Vec<f64>,
    /// Beta-major: all alphas for the first beta, then the next beta.
    pub cells: Vec<PhaseCell>,
    pub critical: Vec<CriticalPoint>,
}

impl PhaseDiagramGrid {
    pub fn cell(&self, alpha_index: usize, beta_index: usize) -> &PhaseCell {
        &self.cells[beta_index * self.alpha_values.len() + alpha_index]
    }

    pub fn column(&self, beta_index: usize) -> &[PhaseCell] {
        let na = self.alpha_values.len();
        &self.cells[beta_index * na..(beta_index + 1) * na]
    }
}

fn evaluate(n: usize, alpha: f64, beta: f64, tol: f64) -> PhaseCell {
    let res = ModelParams::new(n, 1, alpha, beta).and_then(|p| {
        let l = lambda1(&p)?;
        Ok((l, classify_regime(&p, tol)?.kind))
    });
    match res {
        Ok((l, kind)) => PhaseCell { alpha, beta, lambda1: l, regime: Some(kind), error: None },
        Err(e) => PhaseCell { alpha, beta, lambda1: f64::NAN, regime: None, error: Some(e.to_string()) },
    }
}

/// Fills every cell and the critical curve. Failures are recorded on the cell.
pub fn run_phase_diagram(spec: &PhaseDiagramSpec) -> PhaseDiagramGrid {
    let na = spec.alpha_values.len();
    let cells = par_map(na * spec.beta_values.len(), |i| {
        evaluate(spec.n, spec.alpha_values[i % na], spec.beta_values[i / na], spec.tol)
    });
    let critical = par_map(spec.beta_values.len(), |j| {
        let beta = spec.beta_values[j];
        match critical_alpha(beta, spec.n, spec.tol.min(1e-10)) {
            Ok(a) => CriticalPoint { beta, alpha_cr: a, rho_cr: a * (1.0 - beta) * (1.0 - beta), error: None },
            Err(e) => CriticalPoint { beta, alpha_cr: f64::NAN, rho_cr: f64::NAN, error: Some(e.to_string()) },
        }
    });
    PhaseDiagramGrid {
        n: spec.n,
        alpha_values: spec.alpha_values.clone(),
        beta_values: spec.beta_values.clone(),
        cells,
        critical,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn boundary_at_beta_zero() {
        let spec = PhaseDiagramSpec::new(3, vec![2.6, 2.7], vec![0.0], 1e-12).unwrap();
        let g = run_phase_diagram(&spec);
        assert_eq!(g.cell(0, 0).regime, Some(RegimeKind::Subcritical));
        assert_eq!(g.cell(1, 0).regime, Some(RegimeKind::Supercritical));
        let expected = 1.5 * 0.577_215_664_901_532_9_f64.exp();
        assert!((g.critical[0].alpha_cr - expected).abs() < 1e-8);
    }

    #[test]
    fn single_transition_per_column() {
        let g = run_phase_diagram(&PhaseDiagramSpec::log_grid(5, 0.05, 50.0, 40, 10, 1e-9).unwrap());
        for j in 0..g.beta_values.len() {
            let col = g.column(j);
            let flips = col.windows(2).filter(|w| w[0].regime != w[1].regime).count();
            assert!(flips <= 2, "beta = {}", g.beta_values[j]);
            assert!(col.windows(2).all(|w| w[0].lambda1 < w[1].lambda1));
        }
    }

    #[test]
    fn rejects_unsorted_grid() {
        assert!(PhaseDiagramSpec::new(3, vec![2.0, 1.0], vec![0.0], 1e-9).is_err());
        assert!(PhaseDiagramSpec::new(3, vec![1.0], vec![1.0], 1e-9).is_err());
    }
}
