//! Goodness-of-fit tests and error bars used to compare runs with closed forms.

use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};

/// Asymptotic 1% critical value of the one-sample Kolmogorov–Smirnov statistic.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.6276 / (n as f64).sqrt()
}

/// One-sample KS statistic `sup |F_n − F|`. Sorts `sample` in place.
pub fn ks_statistic<F: Fn(f64) -> f64>(sample: &mut [f64], cdf: F) -> f64 {
    sample.sort_by(f64::total_cmp);
    let n = sample.len() as f64;
    sample
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).max((i + 1) as f64 / n - f)
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub degrees_of_freedom: usize,
    pub p_value: f64,
}

/// Pearson χ² test of observed counts against expected counts.
pub fn chi_square_test(observed: &[u64], expected: &[f64], constraints: usize) -> Result<ChiSquareTest> {
    if observed.len() != expected.len() || observed.len() <= constraints {
        return Err(Error::InvalidSize(format!(
            "{} observed bins, {} expected bins, {constraints} constraints",
            observed.len(),
            expected.len()
        )));
    }
    let statistic = observed
        .iter()
        .zip(expected)
        .map(|(&o, &e)| {
            let d = o as f64 - e;
            d * d / e
        })
        .sum::<f64>();
    let dof = observed.len() - constraints;
    let dist = ChiSquared::new(dof as f64).map_err(|e| Error::Domain(e.to_string()))?;
    Ok(ChiSquareTest {
        statistic,
        degrees_of_freedom: dof,
        p_value: dist.sf(statistic),
    })
}

pub fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample mean and its standard error.
pub fn mean_and_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = mean(xs);
    if xs.len() < 2 {
        return (m, f64::NAN);
    }
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0);
    (m, (var / n).sqrt())
}

/// `log(mean(exp(x)))` computed with a max shift.
pub fn log_mean_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    let s: f64 = xs.iter().map(|x| (x - max).exp()).sum();
    max + (s / xs.len() as f64).ln()
}

/// Delete-one jackknife standard error of `log_mean_exp(xs)`.
pub fn jackknife_log_mean_exp(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return f64::NAN;
    }
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = xs.iter().map(|x| (x - max).exp()).collect();
    let total: f64 = weights.iter().sum();
    let leave_out: Vec<f64> = weights
        .iter()
        .map(|w| max + ((total - w).max(f64::MIN_POSITIVE) / (n - 1) as f64).ln())
        .collect();
    let m = mean(&leave_out);
    let ss: f64 = leave_out.iter().map(|x| (x - m) * (x - m)).sum();
    ((n - 1) as f64 / n as f64 * ss).sqrt()
}

/// Largest share of `Σ exp(x)` carried by a single term.
pub fn max_weight_share(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let total: f64 = xs.iter().map(|x| (x - max).exp()).sum();
    1.0 / total
}
