//! Small statistics helpers used by the Monte Carlo checks.

use serde::{Deserialize, Serialize};

/// Sample mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub mean: f64,
    pub se: f64,
    pub n: usize,
}

impl Estimate {
    /// `(self - target) / se`.
    pub fn z(&self, target: f64) -> f64 {
        (self.mean - target) / self.se
    }
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Unbiased sample variance.
pub fn variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Mean and `sd / sqrt(n)` for i.i.d. samples.
pub fn mean_se(xs: &[f64]) -> Estimate {
    let n = xs.len();
    Estimate { mean: mean(xs), se: (variance(xs) / n as f64).sqrt(), n }
}

/// Sample variance with the standard error `sqrt((m4 - s^4) / n)`.
pub fn variance_se(xs: &[f64]) -> Estimate {
    let n = xs.len() as f64;
    let m = mean(xs);
    let (mut m2, mut m4) = (0.0, 0.0);
    for x in xs {
        let d2 = (x - m) * (x - m);
        m2 += d2;
        m4 += d2 * d2;
    }
    m2 /= n;
    m4 /= n;
    Estimate { mean: m2 * n / (n - 1.0), se: ((m4 - m2 * m2) / n).sqrt(), n: xs.len() }
}

/// Mean with a batch-means standard error; the tail that does not fill a batch joins the last one.
pub fn batch_means(xs: &[f64], batches: usize) -> Estimate {
    let n = xs.len();
    let b = batches.min(n).max(2);
    let size = n / b;
    let means: Vec<f64> = (0..b)
        .map(|i| {
            let end = if i + 1 == b { n } else { (i + 1) * size };
            mean(&xs[i * size..end])
        })
        .collect();
    Estimate { mean: mean(xs), se: (variance(&means) / b as f64).sqrt(), n }
}

/// Least-squares slope of `y` on `x`.
pub fn ols_slope(x: &[f64], y: &[f64]) -> f64 {
    let mx = mean(x);
    let my = mean(y);
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
    }
    sxy / sxx
}

pub fn lag1_autocorrelation(xs: &[f64]) -> f64 {
    let m = mean(xs);
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..xs.len() {
        let d = xs[i] - m;
        den += d * d;
        if i + 1 < xs.len() {
            num += d * (xs[i + 1] - m);
        }
    }
    num / den
}

/// Two-sample Kolmogorov–Smirnov statistic `sup |F_a - F_b|`.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

/// Asymptotic 1% critical value of the two-sample KS statistic.
pub fn ks_critical_1pct(na: usize, nb: usize) -> f64 {
    let (a, b) = (na as f64, nb as f64);
    1.628 * ((a + b) / (a * b)).sqrt()
}
