//! Hypothesis tests used across the analysis: Welch's t-test, the Wilcoxon
//! signed-rank test (exact and normal approximation) and Pearson correlation.
//!
//! All p-values are two-sided.

mod special;

pub use special::{erf, erfc, incomplete_beta, ln_gamma, normal_sf, t_cdf, t_two_sided_p};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StatError {
    #[error("parameter out of domain: {0}")]
    Domain(String),
    #[error("degenerate input: {0}")]
    Degenerate(String),
    #[error("sample sizes differ: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("sample too small: need at least {need}, got {got}")]
    TooSmall { need: usize, got: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TestMethod {
    Welch,
    WilcoxonExact,
    WilcoxonNormal,
    Pearson,
}

impl TestMethod {
    pub fn tag(&self) -> &'static str {
        match self {
            TestMethod::Welch => "welch",
            TestMethod::WilcoxonExact => "wilcoxon_exact",
            TestMethod::WilcoxonNormal => "wilcoxon_normal",
            TestMethod::Pearson => "pearson",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatTestResult {
    /// t for Welch, W+ for Wilcoxon, r for Pearson.
    pub statistic: f64,
    /// Degrees of freedom; `None` for the Wilcoxon test.
    pub df: Option<f64>,
    pub p_value: f64,
    pub method: TestMethod,
}

/// Largest effective sample size for which Wilcoxon p-values are computed exactly.
pub const WILCOXON_EXACT_MAX_N: usize = 20;

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

/// Sample variance with the n - 1 denominator.
fn sample_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Welch's unequal-variance two-sample t-test.
pub fn welch_t(a: &[f64], b: &[f64]) -> Result<StatTestResult, StatError> {
    for s in [a, b] {
        if s.len() < 2 {
            return Err(StatError::TooSmall { need: 2, got: s.len() });
        }
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (va, vb) = (sample_variance(a), sample_variance(b));
    if va == 0.0 && vb == 0.0 {
        return Err(StatError::Degenerate("both samples have zero variance".into()));
    }
    let (sa, sb) = (va / na, vb / nb);
    let se2 = sa + sb;
    let t = (mean(a) - mean(b)) / se2.sqrt();
    let df = se2 * se2 / (sa * sa / (na - 1.0) + sb * sb / (nb - 1.0));
    let p = t_two_sided_p(t, df)?;
    Ok(StatTestResult { statistic: t, df: Some(df), p_value: p, method: TestMethod::Welch })
}

/// Student's pooled-variance two-sample t-test. Kept for cross-checking Welch.
pub fn student_t(a: &[f64], b: &[f64]) -> Result<StatTestResult, StatError> {
    for s in [a, b] {
        if s.len() < 2 {
            return Err(StatError::TooSmall { need: 2, got: s.len() });
        }
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let df = na + nb - 2.0;
    let pooled = ((na - 1.0) * sample_variance(a) + (nb - 1.0) * sample_variance(b)) / df;
    if pooled == 0.0 {
        return Err(StatError::Degenerate("pooled variance is zero".into()));
    }
    let t = (mean(a) - mean(b)) / (pooled * (1.0 / na + 1.0 / nb)).sqrt();
    let p = t_two_sided_p(t, df)?;
    Ok(StatTestResult { statistic: t, df: Some(df), p_value: p, method: TestMethod::Welch })
}

/// Average ranks (1-based) of `values`, ties sharing the mean of their positions.
pub fn average_ranks(values: &[f64]) -> Vec<f64> {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && values[order[end]] == values[order[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1..=end
        let avg = (start + 1 + end) as f64 / 2.0;
        for &idx in &order[start..end] {
            ranks[idx] = avg;
        }
        start = end;
    }
    ranks
}

/// Paired Wilcoxon signed-rank test on `a - b`.
///
/// Zero differences are dropped. With at most [`WILCOXON_EXACT_MAX_N`] non-zero
/// differences and no ties among their magnitudes the p-value is exact;
/// otherwise the normal approximation with tie and continuity corrections is
/// used.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<StatTestResult, StatError> {
    if a.len() != b.len() {
        return Err(StatError::LengthMismatch(a.len(), b.len()));
    }
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).filter(|d| *d != 0.0).collect();
    if diffs.is_empty() {
        return Err(StatError::Degenerate("all paired differences are zero".into()));
    }
    let magnitudes: Vec<f64> = diffs.iter().map(|d| d.abs()).collect();
    let ranks = average_ranks(&magnitudes);
    let w_plus: f64 = diffs.iter().zip(&ranks).filter(|(d, _)| **d > 0.0).fold(0.0, |acc, (_, r)| acc + r);
    let n = diffs.len();
    let tie_groups = tie_group_sizes(&magnitudes);

    if n <= WILCOXON_EXACT_MAX_N && tie_groups.is_empty() {
        let p = exact_signed_rank_p(n, w_plus.round() as usize);
        return Ok(StatTestResult {
            statistic: w_plus,
            df: None,
            p_value: p,
            method: TestMethod::WilcoxonExact,
        });
    }

    let tie_term: f64 = tie_groups
        .into_iter()
        .map(|t| {
            let t = t as f64;
            t * t * t - t
        })
        .sum();
    let p = normal_signed_rank_p(n, w_plus, tie_term)?;
    Ok(StatTestResult { statistic: w_plus, df: None, p_value: p, method: TestMethod::WilcoxonNormal })
}

/// Normal approximation with continuity correction. `tie_term` is the sum of
/// `t^3 - t` over groups of tied magnitudes.
fn normal_signed_rank_p(n: usize, w_plus: f64, tie_term: f64) -> Result<f64, StatError> {
    let nf = n as f64;
    let mu = nf * (nf + 1.0) / 4.0;
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_term / 48.0;
    if var <= 0.0 {
        return Err(StatError::Degenerate("zero variance in signed-rank statistic".into()));
    }
    let dev = ((w_plus - mu).abs() - 0.5).max(0.0);
    let z = dev / var.sqrt();
    Ok((2.0 * normal_sf(z)).min(1.0))
}

fn tie_group_sizes(values: &[f64]) -> Vec<usize> {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mut sizes = Vec::new();
    let mut i = 0;
    while i < v.len() {
        let mut j = i + 1;
        while j < v.len() && v[j] == v[i] {
            j += 1;
        }
        if j - i > 1 {
            sizes.push(j - i);
        }
        i = j;
    }
    sizes
}

/// Exact two-sided p for W+ = `w` with ranks 1..=n under the null.
///
/// Counts the sign assignments by subset-sum over ranks, which tallies the
/// same 2^n patterns as explicit enumeration.
fn exact_signed_rank_p(n: usize, w: usize) -> f64 {
    let max = n * (n + 1) / 2;
    let mut counts = vec![0u64; max + 1];
    counts[0] = 1;
    for rank in 1..=n {
        for s in (rank..=max).rev() {
            counts[s] += counts[s - rank];
        }
    }
    let total = (1u64 << n) as f64;
    let lower: u64 = counts[..=w.min(max)].iter().sum();
    let upper: u64 = counts[w.min(max)..].iter().sum();
    let tail = lower.min(upper) as f64 / total;
    (2.0 * tail).min(1.0)
}

/// Pearson correlation with a two-sided t-based p-value (df = n - 2).
pub fn pearson(x: &[f64], y: &[f64]) -> Result<StatTestResult, StatError> {
    if x.len() != y.len() {
        return Err(StatError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 3 {
        return Err(StatError::TooSmall { need: 3, got: x.len() });
    }
    let (mx, my) = (mean(x), mean(y));
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(StatError::Degenerate("constant input to pearson".into()));
    }
    let r = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    let df = x.len() as f64 - 2.0;
    let p = if r.abs() == 1.0 {
        0.0
    } else {
        let t = r * (df / (1.0 - r * r)).sqrt();
        t_two_sided_p(t, df)?
    };
    Ok(StatTestResult { statistic: r, df: Some(df), p_value: p, method: TestMethod::Pearson })
}
