//! Agent models, the unicycle tracking controller and tracking certificates.
//!
//! An agent is a dynamics/output pair driven by a controller that sees only
//! its own state and its held reference. Agents never read each other's
//! state; coupling happens exclusively through the reference update.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::math;
use crate::planar::Vec2;

/// Planar agent `ẋ = f(t, x, u)`, `p = g(t, x)` with a feedback law
/// `u = k(t, x, r)` for a constant reference `r`.
pub trait AgentModel {
    fn state_dim(&self) -> usize;
    fn input_dim(&self) -> usize;
    fn dynamics(&self, t: f64, state: &[f64], input: &[f64], deriv: &mut [f64]);
    fn output(&self, t: f64, state: &[f64]) -> Vec2;
    fn control(&self, t: f64, state: &[f64], reference: Vec2, input: &mut [f64]);

    /// Closed-loop vector field; `input` is scratch space of `input_dim()`.
    fn closed_loop(&self, t: f64, state: &[f64], reference: Vec2, input: &mut [f64], deriv: &mut [f64]) {
        self.control(t, state, reference, input);
        self.dynamics(t, state, input, deriv);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct UnicycleState {
    pub x: f64,
    pub y: f64,
    /// Unwrapped heading in radians.
    pub theta: f64,
}

impl UnicycleState {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self { x, y, theta }
    }

    pub fn from_slice(s: &[f64]) -> Self {
        Self::new(s[0], s[1], s[2])
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.x, self.y, self.theta]
    }

    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    /// Heading wrapped into `[0, 2π)`.
    pub fn heading(&self) -> f64 {
        math::wrap_angle(self.theta)
    }
}

/// Which angular-rate law the offset-point controller uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControllerVariant {
    /// `ω = eᵀF / ε`, as printed.
    PaperLiteral,
    /// `ω = (Je)ᵀF / ε`, the lateral component that makes the offset point
    /// follow `F` exactly.
    #[default]
    Perpendicular,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControllerParams {
    /// Contraction gain γ > 0, 1/s.
    pub gamma: f64,
    /// Rotation gain, 1/s; any sign.
    pub mu_rot: f64,
    /// Offset ratio κ_ε in (0, 1).
    pub kappa_eps: f64,
    /// Radius (m) inside which both inputs are zero.
    pub deadband: f64,
    pub variant: ControllerVariant,
}

/// Offset ratio used when none is configured.
pub const DEFAULT_KAPPA_EPS: f64 = 0.9;

impl ControllerParams {
    pub fn new(gamma: f64, mu_rot: f64) -> Self {
        Self { gamma, mu_rot, kappa_eps: DEFAULT_KAPPA_EPS, deadband: 1e-6, variant: ControllerVariant::Perpendicular }
    }

    pub fn is_valid(&self) -> bool {
        self.gamma > 0.0
            && self.gamma.is_finite()
            && self.mu_rot.is_finite()
            && self.kappa_eps > 0.0
            && self.kappa_eps < 1.0
            && self.deadband > 0.0
    }
}

/// Feedback-linearizing control of the offset point `q = p + κ_ε‖p − r‖·e`.
///
/// Returns `(v, ω)` in m/s and rad/s.
pub fn unicycle_control(state: &UnicycleState, reference: Vec2, params: &ControllerParams) -> (f64, f64) {
    let offset = state.position() - reference;
    let dist = offset.norm();
    if dist <= params.deadband {
        return (0.0, 0.0);
    }
    let e = Vec2::new(math::cos(state.theta), math::sin(state.theta));
    let eps = params.kappa_eps * dist;
    let z = state.position() + e * eps - reference;
    let field = z * -params.gamma + z.perp() * params.mu_rot;

    let denom = 1.0 + params.kappa_eps * e.dot(offset) / dist;
    assert!(
        denom >= 1.0 - params.kappa_eps - 1e-12 && denom <= 1.0 + params.kappa_eps + 1e-12 && denom > 0.0,
        "speed denominator {denom} outside [1 - κ, 1 + κ]"
    );
    let v = e.dot(field) / denom;
    let omega = match params.variant {
        ControllerVariant::PaperLiteral => e.dot(field) / eps,
        ControllerVariant::Perpendicular => e.perp().dot(field) / eps,
    };
    (v, omega)
}

pub fn unicycle_derivative(state: &UnicycleState, v: f64, omega: f64) -> [f64; 3] {
    [v * math::cos(state.theta), v * math::sin(state.theta), omega]
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UnicycleAgent {
    pub params: ControllerParams,
}

impl AgentModel for UnicycleAgent {
    fn state_dim(&self) -> usize {
        3
    }

    fn input_dim(&self) -> usize {
        2
    }

    fn dynamics(&self, _t: f64, state: &[f64], input: &[f64], deriv: &mut [f64]) {
        let d = unicycle_derivative(&UnicycleState::from_slice(state), input[0], input[1]);
        deriv.copy_from_slice(&d);
    }

    fn output(&self, _t: f64, state: &[f64]) -> Vec2 {
        Vec2::new(state[0], state[1])
    }

    fn control(&self, _t: f64, state: &[f64], reference: Vec2, input: &mut [f64]) {
        let (v, omega) = unicycle_control(&UnicycleState::from_slice(state), reference, &self.params);
        input[0] = v;
        input[1] = omega;
    }
}

/// Single integrator under proportional feedback, `ṗ = λ(r − p)`.
///
/// It moves along the segment towards its reference with
/// `p(t) = r + e^{−λ(t−τ)}(p(τ) − r)`, which makes it a closed-form oracle
/// for the integrator and the certificate fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FirstOrderAgent {
    pub lambda: f64,
}

pub fn first_order_agent(lambda: f64) -> FirstOrderAgent {
    assert!(lambda > 0.0, "decay rate must be positive");
    FirstOrderAgent { lambda }
}

impl FirstOrderAgent {
    pub fn closed_form(&self, start: Vec2, reference: Vec2, elapsed: f64) -> Vec2 {
        reference + (start - reference) * math::exp(-self.lambda * elapsed)
    }
}

impl AgentModel for FirstOrderAgent {
    fn state_dim(&self) -> usize {
        2
    }

    fn input_dim(&self) -> usize {
        2
    }

    fn dynamics(&self, _t: f64, _state: &[f64], input: &[f64], deriv: &mut [f64]) {
        deriv.copy_from_slice(&input[..2]);
    }

    fn output(&self, _t: f64, state: &[f64]) -> Vec2 {
        Vec2::new(state[0], state[1])
    }

    fn control(&self, _t: f64, state: &[f64], reference: Vec2, input: &mut [f64]) {
        input[0] = self.lambda * (reference.x - state[0]);
        input[1] = self.lambda * (reference.y - state[1]);
    }
}

/// Agents a scenario can instantiate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Agent {
    Unicycle(UnicycleAgent),
    FirstOrder(FirstOrderAgent),
}

impl Agent {
    fn inner(&self) -> &dyn AgentModel {
        match self {
            Agent::Unicycle(a) => a,
            Agent::FirstOrder(a) => a,
        }
    }
}

impl AgentModel for Agent {
    fn state_dim(&self) -> usize {
        self.inner().state_dim()
    }

    fn input_dim(&self) -> usize {
        self.inner().input_dim()
    }

    fn dynamics(&self, t: f64, state: &[f64], input: &[f64], deriv: &mut [f64]) {
        self.inner().dynamics(t, state, input, deriv)
    }

    fn output(&self, t: f64, state: &[f64]) -> Vec2 {
        self.inner().output(t, state)
    }

    fn control(&self, t: f64, state: &[f64], reference: Vec2, input: &mut [f64]) {
        self.inner().control(t, state, reference, input)
    }
}

/// Constants `(C, λ, σ)` witnessing
/// `‖p(t) − s‖ ≤ C·e^{−λ(t−τ)}·‖p(τ) − s‖` with `s = (1 − σ)p(τ) + σr`
/// at every sampled time of one flow interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrackingCertificate {
    pub c: f64,
    pub lambda: f64,
    pub sigma: f64,
}

impl TrackingCertificate {
    /// `β = C·e^{−λ·interval}`.
    pub fn beta(&self, interval: f64) -> f64 {
        self.c * math::exp(-self.lambda * interval)
    }

    /// Largest ratio of observed distance to the certified envelope; at most
    /// one when the certificate holds on `samples`.
    pub fn worst_ratio(&self, samples: &[PathSample], start: Vec2, reference: Vec2) -> f64 {
        let s = start.lerp(reference, self.sigma);
        let d0 = (start - s).norm();
        samples
            .iter()
            .map(|p| (p.position - s).norm() / (self.c * math::exp(-self.lambda * p.elapsed) * d0))
            .fold(0.0, f64::max)
    }
}

/// Position of an agent `elapsed` seconds into a flow interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathSample {
    pub elapsed: f64,
    pub position: Vec2,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Spacing of the σ grid `{step, 2·step, …, 1}`.
    pub sigma_step: f64,
    /// Shortest flow interval Ť used in `β = C·e^{−λŤ}`, seconds.
    pub interval: f64,
    /// Mixing window `L` and margin `μ` used to weigh σ against the bound
    /// it induces.
    pub window: usize,
    pub margin: f64,
    /// Start points closer than this to the reference are not fitted.
    pub min_distance: f64,
}

impl FitOptions {
    pub fn new(interval: f64) -> Self {
        Self { sigma_step: 0.05, interval, window: 2, margin: 1.0, min_distance: 1e-6 }
    }

    pub fn sigma_grid(&self) -> Vec<f64> {
        let steps = math::round(1.0 / self.sigma_step).max(1.0) as usize;
        (1..=steps).map(|m| if m == steps { 1.0 } else { m as f64 * self.sigma_step }).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum CertificateError {
    #[error("at least three samples are needed")]
    TooFewSamples,
    #[error("start point is already at the reference")]
    AtReference,
    #[error("no σ admits a decaying envelope")]
    NoCertificate,
}

/// Smallest log-linear envelope `(C, λ)` dominating every sample for a fixed
/// σ, or `None` when the fitted distance does not decay.
///
/// `λ` is the negated least-squares slope of `ln(‖p(t) − s‖/‖p(τ) − s‖)`;
/// `C ≥ 1` is then raised until the line lies above every sample.
pub fn fit_at_sigma(samples: &[PathSample], start: Vec2, reference: Vec2, sigma: f64) -> Option<(f64, f64)> {
    let s = start.lerp(reference, sigma);
    let d0 = (start - s).norm();
    if !(d0 > 0.0) {
        return None;
    }
    let (ts, ys): (Vec<f64>, Vec<f64>) = samples
        .iter()
        .filter(|p| p.elapsed > 0.0)
        .map(|p| (p.elapsed, math::ln(((p.position - s).norm() / d0).max(1e-12))))
        .unzip();
    let (slope, _) = math::linear_fit(&ts, &ys)?;
    let lambda = -slope;
    if !(lambda > 0.0) || !lambda.is_finite() {
        return None;
    }
    let log_c = ts.iter().zip(&ys).map(|(t, y)| y + lambda * t).fold(0.0, f64::max);
    Some((math::exp(log_c), lambda))
}

/// Theorem-2 style bound on `σβ` when `σ` is the smallest segment fraction:
/// `((1 + σ^L·μ)^{1/L} − 1) / 2`.
pub fn segment_bound(sigma: f64, window: usize, margin: f64) -> f64 {
    let l = window as f64;
    0.5 * (math::powf(1.0 + math::powf(sigma, l) * margin, 1.0 / l) - 1.0)
}

/// Grid search over σ for the certificate whose `σβ` sits furthest below
/// the bound it would induce as the smallest σ.
pub fn fit_certificate(
    samples: &[PathSample],
    start: Vec2,
    reference: Vec2,
    options: &FitOptions,
) -> Result<TrackingCertificate, CertificateError> {
    if samples.iter().filter(|p| p.elapsed > 0.0).count() < 3 {
        return Err(CertificateError::TooFewSamples);
    }
    if (start - reference).norm() <= options.min_distance {
        return Err(CertificateError::AtReference);
    }
    let mut best: Option<(f64, TrackingCertificate)> = None;
    for sigma in options.sigma_grid().into_iter().rev() {
        let Some((c, lambda)) = fit_at_sigma(samples, start, reference, sigma) else {
            continue;
        };
        let cert = TrackingCertificate { c, lambda, sigma };
        let score = sigma * cert.beta(options.interval) / segment_bound(sigma, options.window, options.margin);
        if best.is_none_or(|(b, _)| score < b) {
            best = Some((score, cert));
        }
    }
    best.map(|(_, c)| c).ok_or(CertificateError::NoCertificate)
}
