//! Learning-curve post-processing and the two-sample t-test.

use serde::{Deserialize, Serialize};

use crate::eval::InterferenceSnapshot;
use crate::{Error, Result};

/// Metric series of one seeded run.
#[derive(Clone, Debug, PartialEq)]
pub struct RunRecord {
    pub run_seed: u64,
    /// Steps per episode (control) or end-of-episode value error
    /// (prediction).
    pub per_episode: Vec<f64>,
    pub diverged: bool,
    pub snapshots: Option<Vec<InterferenceSnapshot>>,
}

impl RunRecord {
    /// Mean snapshot interference, if any snapshots were taken.
    pub fn time_averaged_interference(&self) -> Option<f64> {
        let snaps = self.snapshots.as_ref()?;
        if snaps.is_empty() {
            return None;
        }
        Some(snaps.iter().map(|s| s.mean_pairwise_interference).sum::<f64>() / snaps.len() as f64)
    }
}

/// Trailing moving average; the first `window - 1` entries average over
/// what is available.
pub fn smooth(series: &[f64], window: usize) -> Result<Vec<f64>> {
    if series.is_empty() {
        return Err(Error::Empty("series"));
    }
    if window == 0 {
        return Err(Error::InvalidConfig("smoothing window must be positive".into()));
    }
    let out = (0..series.len())
        .map(|k| {
            let lo = (k + 1).saturating_sub(window);
            series[lo..=k].iter().sum::<f64>() / (k + 1 - lo) as f64
        })
        .collect();
    Ok(out)
}

/// Area under the learning curve, normalized by the episode count.
pub fn auc(series: &[f64]) -> Result<f64> {
    if series.is_empty() {
        return Err(Error::Empty("series"));
    }
    Ok(series.iter().sum::<f64>() / series.len() as f64)
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample standard deviation (n - 1 denominator); 0 for fewer than two
/// values.
pub fn sample_sd(xs: &[f64]) -> f64 {
    if xs.len() < 2 {
        return 0.0;
    }
    let m = mean(xs);
    (xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() - 1) as f64).sqrt()
}

pub fn standard_error(xs: &[f64]) -> f64 {
    sample_sd(xs) / (xs.len() as f64).sqrt()
}

/// Pointwise mean and standard error across runs. A single run has zero
/// standard error.
pub fn aggregate<S: AsRef<[f64]>>(runs: &[S]) -> Result<(Vec<f64>, Vec<f64>)> {
    let first = runs.first().ok_or(Error::Empty("runs"))?.as_ref().len();
    if let Some(bad) = runs.iter().find(|r| r.as_ref().len() != first) {
        return Err(Error::LengthMismatch(first, bad.as_ref().len()));
    }
    let mut means = Vec::with_capacity(first);
    let mut errs = Vec::with_capacity(first);
    let mut column = vec![0.0; runs.len()];
    for k in 0..first {
        for (c, r) in column.iter_mut().zip(runs) {
            *c = r.as_ref()[k];
        }
        means.push(mean(&column));
        errs.push(standard_error(&column));
    }
    Ok((means, errs))
}

const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

/// Natural log of the gamma function for `x > 0`.
pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut acc = LANCZOS[0];
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        acc += c / (x + i as f64);
    }
    let t = x + 7.5;
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + acc.ln()
}

/// Continued fraction for the incomplete beta function (modified Lentz).
fn beta_cf(x: f64, a: f64, b: f64) -> f64 {
    const TINY: f64 = 1e-300;
    const EPS: f64 = 1e-16;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..10_000 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < EPS {
            break;
        }
    }
    h
}

/// Regularized incomplete beta function `I_x(a, b)`.
pub fn regularized_incomplete_beta(x: f64, a: f64, b: f64) -> f64 {
    assert!(a > 0.0 && b > 0.0, "beta parameters must be positive");
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(x, a, b) / a
    } else {
        1.0 - front * beta_cf(1.0 - x, b, a) / b
    }
}

/// Two-sided tail probability `P(|T| >= |t|)` of Student's t with `df`
/// degrees of freedom.
pub fn student_t_two_sided_p(t: f64, df: f64) -> f64 {
    regularized_incomplete_beta(df / (df + t * t), 0.5 * df, 0.5).clamp(0.0, 1.0)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TTestKind {
    /// Equal-variance Student test, `df = n_a + n_b - 2`.
    #[default]
    Pooled,
    /// Welch's unequal-variance test with Satterthwaite degrees of freedom.
    Welch,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub t_statistic: f64,
    pub degrees_of_freedom: f64,
    pub p_value: f64,
    pub significant_at_5pct: bool,
}

pub const SIGNIFICANCE_LEVEL: f64 = 0.05;

pub fn two_sample_ttest(a: &[f64], b: &[f64]) -> Result<TTestResult> {
    two_sample_ttest_with(a, b, TTestKind::Pooled)
}

pub fn two_sample_ttest_with(a: &[f64], b: &[f64], kind: TTestKind) -> Result<TTestResult> {
    for s in [a, b] {
        if s.len() < 2 {
            return Err(Error::SampleTooSmall { need: 2, got: s.len() });
        }
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (ma, mb) = (mean(a), mean(b));
    let ss = |s: &[f64], m: f64| s.iter().map(|x| (x - m) * (x - m)).sum::<f64>();
    let (va, vb) = (ss(a, ma) / (na - 1.0), ss(b, mb) / (nb - 1.0));
    let (se, df) = match kind {
        TTestKind::Pooled => {
            let df = na + nb - 2.0;
            let pooled = (ss(a, ma) + ss(b, mb)) / df;
            ((pooled * (1.0 / na + 1.0 / nb)).sqrt(), df)
        }
        TTestKind::Welch => {
            let (qa, qb) = (va / na, vb / nb);
            let df = (qa + qb).powi(2) / (qa * qa / (na - 1.0) + qb * qb / (nb - 1.0));
            ((qa + qb).sqrt(), df)
        }
    };
    if !(se > 0.0) {
        return Err(Error::ZeroPooledVariance);
    }
    let t = (ma - mb) / se;
    let p = student_t_two_sided_p(t, df);
    Ok(TTestResult {
        t_statistic: t,
        degrees_of_freedom: df,
        p_value: p,
        significant_at_5pct: p < SIGNIFICANCE_LEVEL,
    })
}
