//! One function per subcommand, each a pure function of the configuration.

use serde::Serialize;

use crate::analytic::{
    classify_regime, critical_alpha, gap12_large_n, lambda1, lambda_k_beta0, ModelParams, RegimeKind,
};
use crate::error::Result;
use crate::harness::config::{Command, ExperimentConfig, Scheme};
use crate::harness::emit::{Field, Output, Table};
use crate::harness::phase::run_phase_diagram;
use crate::harness::validate::run_validate;
use crate::model_a::{run_trajectory, OpinionState, TrajectoryRecord};
use crate::model_b::{em_trajectory, exact_trajectory, DiffusionState};
use crate::parallel::par_map;
use crate::random_matrix::{estimate_spectrum_qr, sample_gaussian_matrix};
use crate::rng::RngStream;
use crate::stats;

/// Output of a command plus whether it found a validation failure (exit status 1).
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub output: Output,
    pub failed: bool,
}

impl From<Output> for RunOutcome {
    fn from(output: Output) -> Self {
        Self { output, failed: false }
    }
}

pub fn run(config: &ExperimentConfig) -> Result<RunOutcome> {
    match config.command {
        Command::Analytic => analytic(config).map(Into::into),
        Command::PhaseDiagram => phase_diagram(config).map(Into::into),
        Command::McSpectrum => mc_spectrum(config).map(Into::into),
        Command::SimulateA => simulate_a(config).map(Into::into),
        Command::SimulateB => simulate_b(config).map(Into::into),
        Command::Align => align(config).map(Into::into),
        Command::Validate => validate(config),
    }
}

#[derive(Serialize)]
struct AnalyticSummary {
    params: ModelParams<f64>,
    rho: f64,
    z: f64,
    lambda1: f64,
    regime: RegimeKind,
    alpha_cr: f64,
    rho_cr: f64,
    gap12_large_n: f64,
    /// All exponents, available in closed form when `beta = 0`.
    spectrum_beta0: Option<Vec<f64>>,
}

fn analytic(c: &ExperimentConfig) -> Result<Output> {
    let p = *c.model_a()?;
    let alpha_cr = critical_alpha(p.beta, p.n, c.tol.min(1e-10))?;
    let s = AnalyticSummary {
        params: p,
        rho: p.rho(),
        z: p.z(),
        lambda1: lambda1(&p)?,
        regime: classify_regime(&p, c.tol)?.kind,
        alpha_cr,
        rho_cr: alpha_cr * (1.0 - p.beta).powi(2),
        gap12_large_n: gap12_large_n(&p),
        spectrum_beta0: if p.beta == 0.0 {
            Some((1..p.n).map(|k| lambda_k_beta0(p.alpha, p.n, k)).collect::<Result<_>>()?)
        } else {
            None
        },
    };
    let mut t = Table::new(&["N", "alpha", "beta", "rho", "z", "lambda1", "regime", "alpha_cr", "rho_cr"]);
    t.push(vec![
        p.n.into(),
        p.alpha.into(),
        p.beta.into(),
        s.rho.into(),
        s.z.into(),
        s.lambda1.into(),
        s.regime.as_str().into(),
        s.alpha_cr.into(),
        s.rho_cr.into(),
    ]);
    Output::new(t, &s)
}

fn phase_diagram(c: &ExperimentConfig) -> Result<Output> {
    let crate::harness::config::ParamRecord::Grid(spec) = &c.params else {
        unreachable!("phase-diagram config always carries a grid")
    };
    let g = run_phase_diagram(spec);
    let mut t = Table::new(&["alpha", "beta", "N", "lambda1", "regime"]);
    for cell in &g.cells {
        let regime = cell.regime.map_or("error", |r| r.as_str());
        t.push(vec![cell.alpha.into(), cell.beta.into(), g.n.into(), cell.lambda1.into(), regime.into()]);
    }
    let mut crit = Table::new(&["beta", "alpha_cr", "rho_cr"]);
    for cp in &g.critical {
        crit.push(vec![cp.beta.into(), cp.alpha_cr.into(), cp.rho_cr.into()]);
    }
    Ok(Output::new(t, &g)?.with_companion("critical", crit))
}

#[derive(Serialize)]
struct SpectrumSummary {
    estimate: crate::random_matrix::LyapunovSpectrumEstimate,
    seed: u64,
    lambda1: f64,
    spectrum_beta0: Option<Vec<f64>>,
}

fn mc_spectrum(c: &ExperimentConfig) -> Result<Output> {
    let p = *c.model_a()?;
    let seed = c.seed()?;
    let est = estimate_spectrum_qr(&p, c.steps, &mut RngStream::new(seed, 0).rng())?;
    let mut t = Table::new(&["k", "lambda_hat", "se", "steps"]);
    for (k, (l, se)) in est.exponents.iter().zip(&est.std_errors).enumerate() {
        t.push(vec![(k + 1).into(), (*l).into(), (*se).into(), est.steps.into()]);
    }
    let s = SpectrumSummary {
        lambda1: lambda1(&p)?,
        spectrum_beta0: if p.beta == 0.0 {
            Some((1..p.n).map(|k| lambda_k_beta0(p.alpha, p.n, k)).collect::<Result<_>>()?)
        } else {
            None
        },
        estimate: est,
        seed,
    };
    Output::new(t, &s)
}

fn trajectory(c: &ExperimentConfig, stream: RngStream) -> Result<TrajectoryRecord> {
    let p = c.model_a()?;
    let mut rng = stream.rng();
    let x0 = OpinionState::standard_normal(p.n, p.d, &mut rng)?;
    run_trajectory(p, &x0, c.steps, &mut rng, c.stride)
}

fn simulate_a(c: &ExperimentConfig) -> Result<Output> {
    let rec = trajectory(c, RngStream::new(c.seed()?, 0))?;
    let mut t = Table::new(&["t", "diameter", "log_var_1", "eig_ratio", "corr_12"]);
    for i in 0..rec.len() {
        t.push(vec![
            rec.times[i].into(),
            rec.diameters[i].into(),
            rec.log_var_topic[i][0].into(),
            rec.log_eig_ratios[i].exp().into(),
            rec.topic_correlations[i].first().copied().unwrap_or(f64::NAN).into(),
        ]);
    }
    Output::new(t, &rec)
}

#[derive(Serialize)]
struct TracePoint {
    t: f64,
    tr_cov: f64,
    log_tr_cov: f64,
}

fn simulate_b(c: &ExperimentConfig) -> Result<Output> {
    let p = *c.model_b()?;
    let mut rng = RngStream::new(c.seed()?, 0).rng();
    let z0 = DiffusionState::new(sample_gaussian_matrix(p.n, p.d, &mut rng))?;
    let points: Vec<TracePoint> = match c.scheme {
        Scheme::Exact => exact_trajectory(&z0, &p, c.t_end, c.stride, &mut rng)?
            .into_iter()
            .map(|s| TracePoint { t: s.state.t(), tr_cov: s.log_tr_cov.exp(), log_tr_cov: s.log_tr_cov })
            .collect(),
        Scheme::Em => em_trajectory(&z0, &p, c.t_end, c.stride, &mut rng)?
            .into_iter()
            .map(|s| {
                let tr = s.cov().trace();
                TracePoint { t: s.t(), tr_cov: tr, log_tr_cov: tr.ln() }
            })
            .collect(),
    };
    let mut t = Table::new(&["t", "tr_cov", "log_tr_cov"]);
    for pt in &points {
        t.push(vec![pt.t.into(), pt.tr_cov.into(), pt.log_tr_cov.into()]);
    }
    Output::new(t, &points)
}

#[derive(Serialize)]
struct AlignmentRun {
    replica: usize,
    t: usize,
    eig_ratio: f64,
    min_abs_corr: f64,
    /// Fitted slope of `log(e_2/e_1)` over the last 90% of the run.
    log_ratio_slope: f64,
    /// `-2 (lambda_1 - lambda_2)`, known in closed form when `beta = 0`.
    predicted_slope: Option<f64>,
}

fn align(c: &ExperimentConfig) -> Result<Output> {
    let p = *c.model_a()?;
    if p.d < 2 {
        return Err(crate::error::Error::Usage("d: alignment needs d >= 2".into()));
    }
    let stream = RngStream::new(c.seed()?, 0);
    let predicted = if p.beta == 0.0 {
        Some(-2.0 * (lambda_k_beta0(p.alpha, p.n, 1)? - lambda_k_beta0(p.alpha, p.n, 2)?))
    } else {
        None
    };
    let runs: Vec<Result<AlignmentRun>> = par_map(c.replicas, |r| {
        let rec = trajectory(c, stream.child(r as u64))?;
        let last = rec.len() - 1;
        let from = rec.times.iter().position(|&t| t >= c.steps / 10).unwrap_or(0).min(last.saturating_sub(1));
        let ts: Vec<f64> = rec.times[from..].iter().map(|&t| t as f64).collect();
        Ok(AlignmentRun {
            replica: r,
            t: rec.times[last],
            eig_ratio: rec.log_eig_ratios[last].exp(),
            min_abs_corr: rec.topic_correlations[last].iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min),
            log_ratio_slope: stats::ols_slope(&ts, &rec.log_eig_ratios[from..]),
            predicted_slope: predicted,
        })
    });
    let runs: Vec<AlignmentRun> = runs.into_iter().collect::<Result<_>>()?;
    let mut t = Table::new(&["replica", "t", "eig_ratio", "min_abs_corr", "log_ratio_slope", "predicted_slope"]);
    for a in &runs {
        t.push(vec![
            a.replica.into(),
            a.t.into(),
            a.eig_ratio.into(),
            a.min_abs_corr.into(),
            a.log_ratio_slope.into(),
            Field::Real(a.predicted_slope.unwrap_or(f64::NAN)),
        ]);
    }
    Output::new(t, &runs)
}

fn validate(c: &ExperimentConfig) -> Result<RunOutcome> {
    let report = run_validate(c.level, c.seed()?);
    for f in report.failures() {
        log::warn!(
            "{}/{}: observed {} expected {} (se {:?}, tolerance {}) {}",
            f.module,
            f.invariant,
            f.observed,
            f.expected,
            f.se,
            f.tolerance,
            f.detail.as_deref().unwrap_or("")
        );
    }
    let mut t = Table::new(&["module", "invariant", "observed", "expected", "se", "tolerance", "passed"]);
    for ch in &report.checks {
        t.push(vec![
            ch.module.clone().into(),
            ch.invariant.clone().into(),
            ch.observed.into(),
            ch.expected.into(),
            ch.se.unwrap_or(f64::NAN).into(),
            ch.tolerance.into(),
            if ch.passed { "true" } else { "false" }.into(),
        ]);
    }
    let failed = !report.passed();
    Ok(RunOutcome { output: Output::new(t, &report)?, failed })
}
