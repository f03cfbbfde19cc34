//! Error metrics, convergence ratios and the statistical tests used to compare runs.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::optimizer::{RunRecord, StepRecord};

/// Loss of a run against the true optima.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricReport {
    /// Mean loss of the best-so-far value over every evaluation.
    pub eps_f: f64,
    /// Mean end-of-step loss.
    pub eps_t: f64,
    /// Best-so-far loss after each evaluation, per step.
    pub loss_trajectory: Vec<Vec<f64>>,
}

pub fn error_metrics(record: &RunRecord, optima: &[f64]) -> Result<MetricReport> {
    if record.steps.len() != optima.len() {
        return Err(Error::InvalidInput(alloc::format!(
            "record has {} steps but {} optima were given",
            record.steps.len(),
            optima.len()
        )));
    }
    if optima.is_empty() {
        return Err(Error::InvalidInput("record has no steps".into()));
    }
    let loss_trajectory: Vec<Vec<f64>> =
        record.steps.iter().zip(optima).map(|(s, f)| s.best_series().map(|b| f - b).collect()).collect();
    let fes: usize = loss_trajectory.iter().map(Vec::len).sum();
    if fes == 0 {
        return Err(Error::InvalidInput("record has no evaluations".into()));
    }
    let eps_f = loss_trajectory.iter().flatten().sum::<f64>() / fes as f64;
    let eps_t = record.steps.iter().zip(optima).map(|(s, f)| f - s.incumbent_y).sum::<f64>() / optima.len() as f64;
    Ok(MetricReport { eps_f, eps_t, loss_trajectory })
}

/// 1-based index of the first evaluation whose best-so-far reaches `target`.
pub fn fe_to_reach(step: &StepRecord, target: f64) -> Option<usize> {
    step.best_series().position(|b| b >= target).map(|i| i + 1)
}

/// The step's best value and the evaluation count at which it was first reached.
pub fn fe_to_best(step: &StepRecord) -> (f64, usize) {
    let best = step.incumbent_y;
    (best, fe_to_reach(step, best).unwrap_or(step.evaluations.len()))
}

/// Evaluations needed to reach `target`, or `cap · budget` if never reached.
fn matched(step: &StepRecord, target: f64, cap: f64) -> f64 {
    fe_to_reach(step, target).map_or(cap * step.evaluations.len() as f64, |n| n as f64)
}

/// Cap on unmatched evaluation counts, as a multiple of the step budget.
pub const RHO_CAP: f64 = 8.0;

fn check_steps(records: &[&RunRecord]) -> Result<usize> {
    let steps = records.first().map(|r| r.steps.len()).ok_or_else(|| Error::InvalidInput("no records".into()))?;
    if steps == 0 || records.iter().any(|r| r.steps.len() != steps) {
        return Err(Error::InvalidInput("records must cover the same, non-zero number of steps".into()));
    }
    Ok(steps)
}

/// Per record, the mean over steps of its evaluations to match the step's
/// best algorithm, relative to the best algorithm's own count. The best
/// algorithm of a step has the highest final value, ties broken by fewer
/// evaluations.
pub fn rho_c(records: &[&RunRecord]) -> Result<Vec<f64>> {
    let steps = check_steps(records)?;
    let mut out = vec![0.0; records.len()];
    for t in 0..steps {
        let (best, n_star) = records
            .iter()
            .map(|r| fe_to_best(&r.steps[t]))
            .fold((f64::NEG_INFINITY, usize::MAX), |acc, (v, n)| {
                if v > acc.0 || (v == acc.0 && n < acc.1) {
                    (v, n)
                } else {
                    acc
                }
            });
        for (o, r) in out.iter_mut().zip(records) {
            *o += matched(&r.steps[t], best, RHO_CAP) / n_star as f64;
        }
    }
    Ok(out.into_iter().map(|v| v / steps as f64).collect())
}

/// Mean over steps of the evaluations `record` needs to match the restart
/// baseline's best value, relative to the baseline's own count. Below 1 means
/// the transfer paid off.
pub fn rho_t(record: &RunRecord, baseline: &RunRecord) -> Result<f64> {
    let steps = check_steps(&[record, baseline])?;
    let mut sum = 0.0;
    for t in 0..steps {
        let (best, n_c) = fe_to_best(&baseline.steps[t]);
        sum += matched(&record.steps[t], best, RHO_CAP) / n_c as f64;
    }
    Ok(sum / steps as f64)
}

/// Largest number of non-zero pairs handled by exact enumeration.
pub const WILCOXON_EXACT_MAX: usize = 20;

fn paired_differences(a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), found: b.len() });
    }
    if a.is_empty() {
        return Err(Error::InvalidInput("paired samples must be non-empty".into()));
    }
    Ok(a.iter().zip(b).map(|(x, y)| x - y).filter(|d| *d != 0.0).collect())
}

/// Midranks of `values` (1-based), plus the tie groups' sizes.
fn midranks(values: &[f64]) -> (Vec<f64>, Vec<usize>) {
    let mut order: Vec<usize> = (0..values.len()).collect();
    order.sort_by(|&i, &j| values[i].total_cmp(&values[j]));
    let mut ranks = vec![0.0; values.len()];
    let mut ties = Vec::new();
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && values[order[j + 1]] == values[order[i]] {
            j += 1;
        }
        let r = (i + j + 2) as f64 / 2.0;
        for &k in &order[i..=j] {
            ranks[k] = r;
        }
        if j > i {
            ties.push(j - i + 1);
        }
        i = j + 1;
    }
    (ranks, ties)
}

/// Two-sided p-value of the Wilcoxon signed-rank test on paired samples.
/// Zero differences are dropped. Up to [`WILCOXON_EXACT_MAX`] remaining pairs
/// use the exact null distribution, larger samples the normal approximation
/// with tie and continuity corrections.
pub fn wilcoxon_signed_rank(a: &[f64], b: &[f64]) -> Result<f64> {
    let d = paired_differences(a, b)?;
    let n = d.len();
    if n == 0 {
        return Ok(1.0);
    }
    let abs: Vec<f64> = d.iter().map(|v| v.abs()).collect();
    let (ranks, ties) = midranks(&abs);
    let w_plus: f64 = d.iter().zip(&ranks).filter(|(v, _)| **v > 0.0).map(|(_, r)| r).sum();
    let p = if n <= WILCOXON_EXACT_MAX { wilcoxon_exact(&ranks, w_plus) } else { wilcoxon_normal(n, &ties, w_plus) };
    Ok(p.min(1.0))
}

/// Exact two-sided p-value by counting all sign assignments on the doubled
/// (integer) midranks.
fn wilcoxon_exact(ranks: &[f64], w_plus: f64) -> f64 {
    let doubled: Vec<usize> = ranks.iter().map(|r| libm::round(2.0 * r) as usize).collect();
    let total: usize = doubled.iter().sum();
    let mut counts = vec![0.0f64; total + 1];
    counts[0] = 1.0;
    for &r in &doubled {
        for s in (r..=total).rev() {
            counts[s] += counts[s - r];
        }
    }
    let w = libm::round(2.0 * w_plus) as usize;
    let all = libm::pow(2.0, ranks.len() as f64);
    let lower: f64 = counts[..=w].iter().sum::<f64>() / all;
    let upper: f64 = counts[w..].iter().sum::<f64>() / all;
    2.0 * lower.min(upper)
}

fn wilcoxon_normal(n: usize, ties: &[usize], w_plus: f64) -> f64 {
    let nf = n as f64;
    let mean = nf * (nf + 1.0) / 4.0;
    let tie_adj: f64 = ties.iter().map(|&t| (t * t * t - t) as f64).sum::<f64>() / 48.0;
    let var = nf * (nf + 1.0) * (2.0 * nf + 1.0) / 24.0 - tie_adj;
    if var <= 0.0 {
        return 1.0;
    }
    let z = ((w_plus - mean).abs() - 0.5).max(0.0) / libm::sqrt(var);
    libm::erfc(z / core::f64::consts::SQRT_2)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum EffectSize {
    Equal,
    Small,
    Medium,
    Large,
}

impl EffectSize {
    /// Category of an A12 value; symmetric around 0.5.
    pub fn from_a12(a12: f64) -> Self {
        let m = a12.max(1.0 - a12);
        if m < 0.56 {
            EffectSize::Equal
        } else if m < 0.64 {
            EffectSize::Small
        } else if m < 0.71 {
            EffectSize::Medium
        } else {
            EffectSize::Large
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            EffectSize::Equal => "equal",
            EffectSize::Small => "small",
            EffectSize::Medium => "medium",
            EffectSize::Large => "large",
        }
    }
}

/// Vargha–Delaney A12: the probability that a draw from `a` exceeds one from
/// `b`, counting ties as one half.
pub fn a12(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::InvalidInput("A12 needs two non-empty samples".into()));
    }
    let mut score = 0.0;
    for x in a {
        for y in b {
            if x > y {
                score += 1.0;
            } else if x == y {
                score += 0.5;
            }
        }
    }
    Ok(score / (a.len() * b.len()) as f64)
}

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StatResult {
    pub p_value: f64,
    pub a12: f64,
    pub effect: EffectSize,
}

/// Wilcoxon p-value and A12 of paired samples `a` against `b`.
pub fn compare(a: &[f64], b: &[f64]) -> Result<StatResult> {
    let p_value = wilcoxon_signed_rank(a, b)?;
    let a12 = a12(a, b)?;
    Ok(StatResult { p_value, a12, effect: EffectSize::from_a12(a12) })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignTest {
    /// Pairs with `a > b`.
    pub positive: usize,
    /// Pairs with `a < b`.
    pub negative: usize,
    pub p_value: f64,
}

/// Two-sided sign test on paired samples; ties are dropped.
pub fn sign_test(a: &[f64], b: &[f64]) -> Result<SignTest> {
    let d = paired_differences(a, b)?;
    let positive = d.iter().filter(|v| **v > 0.0).count();
    let negative = d.len() - positive;
    let n = d.len();
    let k = positive.min(negative);
    // P(X <= k) for X ~ Bin(n, 1/2), by the running binomial coefficient
    let mut coef = 1.0;
    let mut tail = 0.0;
    for i in 0..=k {
        if i > 0 {
            coef *= (n - i + 1) as f64 / i as f64;
        }
        tail += coef;
    }
    let p_value = if n == 0 { 1.0 } else { (2.0 * tail / libm::pow(2.0, n as f64)).min(1.0) };
    Ok(SignTest { positive, negative, p_value })
}
