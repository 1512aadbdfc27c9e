//! Disagreement metrics, the convergence conditions and verdicts on traces.
//!
//! The conditions are sufficient only. A report places "condition satisfied"
//! next to the observed behaviour and never infers one from the other.

use alloc::vec::Vec;
use core::fmt;

use serde::{Deserialize, Serialize};

use crate::agents::segment_bound;
use crate::formation::{shifted_state, FormationSpec};
use crate::math;
use crate::planar::{centroid, Vec2};
use crate::sim::{AgentFit, SimTrace};
use crate::stochastic::SigmaSchedule;
use crate::Result;

/// `Δ(x) = max_{i,j} ‖x_i − x_j‖`.
pub fn delta_seminorm(x: &[Vec2]) -> f64 {
    let mut worst = 0.0f64;
    for (i, a) in x.iter().enumerate() {
        for b in &x[i + 1..] {
            worst = worst.max((*a - *b).norm());
        }
    }
    worst
}

/// Mean squared deviation of points from their arithmetic mean.
pub fn mse(shifted: &[Vec2]) -> f64 {
    if shifted.is_empty() {
        return 0.0;
    }
    let mean = centroid(shifted);
    shifted.iter().map(|p| (*p - mean).norm_squared()).sum::<f64>() / shifted.len() as f64
}

/// Formation error of positions: [`mse`] of the displacement-shifted state.
pub fn formation_mse(positions: &[Vec2], spec: &FormationSpec) -> Result<f64> {
    Ok(mse(&shifted_state(positions, spec)?))
}

/// Shortest flow interval above which the communication-rate condition
/// guarantees convergence:
/// `Ť* = −(1/λ̌)·ln(((1 + μ)^{1/L} − 1)/(2Ĉ))`. Negative values mean any
/// positive interval suffices.
pub fn theorem1_threshold(c_hat: f64, lambda_min: f64, margin: f64, window: usize) -> f64 {
    let numerator = math::powf(1.0 + margin, 1.0 / window as f64) - 1.0;
    -math::ln(numerator / (2.0 * c_hat)) / lambda_min
}

/// `β* = ((1 + σ̌^L·μ)^{1/L} − 1)/(2σ̌)`.
pub fn beta_star(sigma_min: f64, margin: f64, window: usize) -> f64 {
    segment_bound(sigma_min, window, margin) / sigma_min
}

/// `R = β·σ·‖p − r‖`, radius of the ball around the segment point that
/// contains the end-of-interval position.
pub fn end_of_interval_radius(beta: f64, sigma: f64, position: Vec2, reference: Vec2) -> f64 {
    beta * sigma * (position - reference).norm()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Theorem2Check {
    pub sigma_min: f64,
    pub bound: f64,
    pub max_product: f64,
    pub satisfied: bool,
}

/// Checks `σ_{i,k}·β_i < ((1 + σ̌^L·μ)^{1/L} − 1)/2` for every agent and instant.
pub fn theorem2_check(sigmas: &SigmaSchedule, betas: &[f64], margin: f64, window: usize) -> Theorem2Check {
    let sigma_min = sigmas.sigma_min();
    let bound = segment_bound(sigma_min, window, margin);
    let mut max_product = 0.0f64;
    for k in 0..sigmas.instants() {
        for (sigma, beta) in sigmas.at(k).iter().zip(betas) {
            max_product = max_product.max(sigma * beta);
        }
    }
    Theorem2Check { sigma_min, bound, max_product, satisfied: max_product < bound }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Converged,
    Diverged,
    Undecided,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Converged => "converged",
            Verdict::Diverged => "diverged",
            Verdict::Undecided => "undecided",
        })
    }
}

/// Final MSE at most this fraction of the initial MSE counts as converged.
pub const CONVERGED_RATIO: f64 = 1e-3;
/// MSE (m²) at or below this is rounding noise and counts as consensus.
pub const CONSENSUS_MSE: f64 = 1e-24;
/// Fewer instants than this give no verdict.
pub const MIN_VERDICT_INSTANTS: usize = 10;

/// Empirical verdict on an MSE series sampled at `times`.
///
/// Converged when the final error is at most [`CONVERGED_RATIO`] of the
/// initial one; diverged when it ended at or above the initial error and the
/// least-squares slope over the last quarter is positive. A series that
/// starts at consensus (up to [`CONSENSUS_MSE`]) is converged.
pub fn verdict_from_series(times: &[f64], mse: &[f64]) -> Verdict {
    let n = mse.len().min(times.len());
    if n < MIN_VERDICT_INSTANTS {
        return Verdict::Undecided;
    }
    let (first, last) = (mse[0], mse[n - 1]);
    if first <= CONSENSUS_MSE || last <= CONVERGED_RATIO * first {
        return Verdict::Converged;
    }
    let tail = (3 * n) / 4;
    let slope = math::linear_fit(&times[tail..n], &mse[tail..n]).map_or(0.0, |(s, _)| s);
    if last >= first && slope > 0.0 {
        Verdict::Diverged
    } else {
        Verdict::Undecided
    }
}

pub fn verdict(trace: &SimTrace) -> Verdict {
    let m = metrics(trace);
    verdict_from_series(&m.times, &m.mse)
}

/// Disagreement and formation error at every communication instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsSeries {
    pub times: Vec<f64>,
    pub delta: Vec<f64>,
    pub mse: Vec<f64>,
}

pub fn metrics(trace: &SimTrace) -> MetricsSeries {
    MetricsSeries {
        times: trace.instants.iter().map(|r| r.t).collect(),
        delta: trace.instants.iter().map(|r| r.delta).collect(),
        mse: trace.instants.iter().map(|r| r.mse).collect(),
    }
}

/// Both convergence conditions evaluated on the certificates fitted along a
/// trace. Fields are `None` where an ingredient is unavailable (no mixing
/// certificate, or a failed fit), in which case the condition counts as not
/// satisfied.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremReport {
    /// Ť, seconds.
    pub interval_min: f64,
    pub window: Option<usize>,
    pub mixing_margin: Option<f64>,
    pub c_hat: Option<f64>,
    pub lambda_min: Option<f64>,
    pub beta_hat: Option<f64>,
    /// Ť*, seconds.
    pub t_star: Option<f64>,
    pub theorem1_satisfied: bool,
    /// β_i, the largest certified `C·e^{−λŤ}` of each agent.
    pub betas: Option<Vec<f64>>,
    /// `σ_{i,k}·β_i` per update (rows) and agent (columns); zero where the
    /// agent already sat on its reference.
    pub sigma_beta: Option<Vec<Vec<f64>>>,
    pub sigma_min: Option<f64>,
    pub theorem2_bound: Option<f64>,
    pub theorem2_satisfied: bool,
    pub beta_star: Option<f64>,
    pub failed_fits: usize,
}

pub fn theorem_report(trace: &SimTrace) -> TheoremReport {
    let interval = trace.interval_min;
    let n = trace.agent_count;
    let mixing = trace.mixing.filter(|m| m.is_certified());
    let (window, margin) = match mixing {
        Some(m) => (Some(m.window_length), Some(m.contraction_margin)),
        None => (None, None),
    };

    let failed_fits = trace
        .intervals
        .iter()
        .flat_map(|iv| &iv.agents)
        .filter(|a| a.fit == AgentFit::Failed)
        .count();

    // Assumption-1 constants from the σ = 1 envelopes.
    let mut unit = Some((0.0f64, f64::INFINITY, 0.0f64));
    for a in trace.intervals.iter().flat_map(|iv| &iv.agents) {
        if a.fit == AgentFit::AtReference {
            continue;
        }
        unit = match (unit, a.unit_fit) {
            (Some((c, l, b)), Some(u)) => Some((c.max(u.c), l.min(u.lambda), b.max(u.beta(interval)))),
            _ => None,
        };
    }
    let (c_hat, lambda_min, beta_hat) = match unit {
        Some((c, l, b)) if l.is_finite() => (Some(c), Some(l), Some(b)),
        _ => (None, None, None),
    };
    let t_star = match (c_hat, lambda_min, window, margin) {
        (Some(c), Some(l), Some(w), Some(m)) => Some(theorem1_threshold(c, l, m, w)),
        _ => None,
    };
    let theorem1_satisfied = t_star.is_some_and(|t| interval > t);

    let mut betas = Vec::new();
    let mut theorem2 = None;
    if failed_fits == 0 && !trace.intervals.is_empty() {
        betas = (0..n)
            .map(|i| {
                trace
                    .intervals
                    .iter()
                    .filter_map(|iv| iv.agents[i].fit.certificate())
                    .map(|c| c.beta(interval))
                    .fold(0.0, f64::max)
            })
            .collect();
        let sigmas: Vec<Vec<f64>> = trace
            .intervals
            .iter()
            .map(|iv| iv.agents.iter().map(|a| a.fit.certificate().map_or(1.0, |c| c.sigma)).collect())
            .collect();
        let products: Vec<Vec<f64>> = trace
            .intervals
            .iter()
            .map(|iv| {
                iv.agents
                    .iter()
                    .zip(&betas)
                    .map(|(a, b)| a.fit.certificate().map_or(0.0, |c| c.sigma * b))
                    .collect()
            })
            .collect();
        if let (Ok(schedule), Some(w), Some(m)) = (SigmaSchedule::new(n, sigmas), window, margin) {
            let sigma_min = schedule.sigma_min();
            let bound = segment_bound(sigma_min, w, m);
            let max_product = products.iter().flatten().fold(0.0f64, |a, b| a.max(*b));
            let check = Theorem2Check { sigma_min, bound, max_product, satisfied: max_product < bound };
            theorem2 = Some((check, products, beta_star(sigma_min, m, w)));
        }
    }

    let (sigma_beta, sigma_min, theorem2_bound, theorem2_satisfied, beta_star_value) = match theorem2 {
        Some((check, products, bs)) => {
            (Some(products), Some(check.sigma_min), Some(check.bound), check.satisfied, Some(bs))
        }
        None => (None, None, None, false, None),
    };

    TheoremReport {
        interval_min: interval,
        window,
        mixing_margin: margin,
        c_hat,
        lambda_min,
        beta_hat,
        t_star,
        theorem1_satisfied,
        betas: if betas.is_empty() { None } else { Some(betas) },
        sigma_beta,
        sigma_min,
        theorem2_bound,
        theorem2_satisfied,
        beta_star: beta_star_value,
        failed_fits,
    }
}
