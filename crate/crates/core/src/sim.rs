//! Deterministic jump-flow execution.
//!
//! A run alternates reference jumps at the communication instants with
//! fixed-step RK4 integration of every agent's closed loop while its
//! reference is held. All randomness comes from [`crate::rng`] streams of the
//! scenario seed, so a configuration reproduces bit-for-bit on one platform.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::agents::{
    fit_at_sigma, fit_certificate, Agent, AgentModel, ControllerParams, ControllerVariant,
    FirstOrderAgent, FitOptions, PathSample, TrackingCertificate, UnicycleAgent,
};
use crate::analysis::{delta_seminorm, mse};
use crate::formation::{jump_update, shifted_state, FormationSpec};
use crate::math::{self, TAU};
use crate::planar::Vec2;
use crate::rng::{stream_rng, Stream};
use crate::stochastic::{certify_mixing, default_window, MixingCertificate, RowStochasticMatrix};
use crate::topology::{generate_topology_sequence, ChannelRealization, TopologyParams, TransmissionLedger};
use crate::{Error, Result};

/// Scalars broadcast per agent and instant: the planar position.
pub const PAYLOAD_DIM: usize = 2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    pub seed: u64,
    pub agents: usize,
    /// Simulated time, seconds.
    pub horizon: f64,
    /// Integrator step, seconds.
    #[serde(default = "default_step")]
    pub step: f64,
    #[serde(default = "default_samples")]
    pub samples_per_interval: usize,
    pub schedule: ScheduleConfig,
    pub agent: AgentConfig,
    pub formation: FormationConfig,
    #[serde(default)]
    pub topology: TopologyParams,
    #[serde(default)]
    pub init: InitConfig,
    #[serde(default)]
    pub certificate: CertificateConfig,
}

fn default_step() -> f64 {
    1e-3
}

fn default_samples() -> usize {
    20
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleMode {
    /// Period `t_min`; requires `t_min == t_max`.
    Fixed,
    /// Gaps drawn uniformly from `[t_min, t_max]`.
    Random,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleConfig {
    pub mode: ScheduleMode,
    pub t_min: f64,
    pub t_max: f64,
}

/// How per-agent gains are chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "snake_case", deny_unknown_fields)]
pub enum GainLaw {
    Fixed { value: f64 },
    /// `gain = −scale·ln a` with `a ~ U(a_min, a_max)` per agent.
    LogUniform { a_min: f64, a_max: f64, scale: f64 },
    PerAgent { values: Vec<f64> },
}

impl GainLaw {
    fn validate(&self, key: &str, n: usize) -> Result<()> {
        let ok = match self {
            GainLaw::Fixed { value } => *value > 0.0 && value.is_finite(),
            GainLaw::LogUniform { a_min, a_max, scale } => {
                *a_min > 0.0 && a_min < a_max && *a_max <= 1.0 && *scale > 0.0
            }
            GainLaw::PerAgent { values } => {
                if values.len() != n {
                    return Err(Error::config(key, "per-agent gain list length differs from agent count"));
                }
                values.iter().all(|v| *v > 0.0 && v.is_finite())
            }
        };
        if ok {
            Ok(())
        } else {
            Err(Error::config(key, "gains must be positive and finite"))
        }
    }

    fn sample<R: Rng>(&self, n: usize, rng: &mut R) -> Vec<f64> {
        match self {
            GainLaw::Fixed { value } => vec![*value; n],
            GainLaw::LogUniform { a_min, a_max, scale } => {
                (0..n).map(|_| -scale * math::ln(rng.gen_range(*a_min..*a_max))).collect()
            }
            GainLaw::PerAgent { values } => values.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case", deny_unknown_fields)]
pub enum AgentConfig {
    Unicycle {
        gamma: GainLaw,
        mu_rot: f64,
        #[serde(default = "default_kappa")]
        kappa_eps: f64,
        #[serde(default = "default_deadband")]
        deadband: f64,
        #[serde(default, rename = "controller_variant")]
        variant: ControllerVariant,
    },
    FirstOrder { lambda: GainLaw },
}

fn default_kappa() -> f64 {
    crate::agents::DEFAULT_KAPPA_EPS
}

fn default_deadband() -> f64 {
    1e-6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum FormationConfig {
    Polygon { radius: f64 },
    Explicit { displacements: Vec<[f64; 2]> },
}

impl FormationConfig {
    pub fn build(&self, n: usize) -> FormationSpec {
        match self {
            FormationConfig::Polygon { radius } => FormationSpec::regular_polygon(n, *radius),
            FormationConfig::Explicit { displacements } => {
                FormationSpec::new(displacements.iter().map(|d| Vec2::new(d[0], d[1])).collect())
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitConfig {
    /// Positions are uniform in `[position_min, position_max]²`.
    pub position_min: f64,
    pub position_max: f64,
    /// Headings are uniform in `[heading_min, heading_max)`.
    pub heading_min: f64,
    pub heading_max: f64,
    /// Start exactly in formation around a random center.
    pub in_formation: bool,
}

impl Default for InitConfig {
    fn default() -> Self {
        Self { position_min: -5.0, position_max: 5.0, heading_min: 0.0, heading_max: TAU, in_formation: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CertificateConfig {
    pub sigma_step: f64,
    /// Mixing window `L`; `n − 1` when absent.
    pub window: Option<usize>,
}

impl Default for CertificateConfig {
    fn default() -> Self {
        Self { sigma_step: 0.05, window: None }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let n = self.agents;
        if n < 2 {
            return Err(Error::config("agents", "at least two agents are required"));
        }
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(Error::config("horizon", "must be positive and finite"));
        }
        let s = &self.schedule;
        if !(s.t_min > 0.0 && s.t_min.is_finite()) {
            return Err(Error::config("schedule.t_min", "must be positive"));
        }
        if !(s.t_min <= s.t_max && s.t_max.is_finite()) {
            return Err(Error::config("schedule.t_max", "must not be smaller than t_min"));
        }
        if s.mode == ScheduleMode::Fixed && s.t_min != s.t_max {
            return Err(Error::config("schedule.mode", "fixed mode requires t_min == t_max"));
        }
        if !(self.step > 0.0 && self.step <= s.t_min / 10.0 + 1e-15) {
            return Err(Error::config("step", "must be positive and at most t_min / 10"));
        }
        if self.samples_per_interval < 3 {
            return Err(Error::config("samples_per_interval", "at least three samples are needed"));
        }
        match &self.agent {
            AgentConfig::Unicycle { gamma, mu_rot, kappa_eps, deadband, .. } => {
                gamma.validate("agent.gamma", n)?;
                if !mu_rot.is_finite() {
                    return Err(Error::config("agent.mu_rot", "must be finite"));
                }
                if !(*kappa_eps > 0.0 && *kappa_eps < 1.0) {
                    return Err(Error::config("agent.kappa_eps", "must lie in (0, 1)"));
                }
                if !(*deadband > 0.0) {
                    return Err(Error::config("agent.deadband", "must be positive"));
                }
            }
            AgentConfig::FirstOrder { lambda } => lambda.validate("agent.lambda", n)?,
        }
        match &self.formation {
            FormationConfig::Polygon { radius } if !radius.is_finite() => {
                return Err(Error::config("formation.radius", "must be finite"));
            }
            FormationConfig::Explicit { displacements } if displacements.len() != n => {
                return Err(Error::config("formation.displacements", "need one displacement per agent"));
            }
            _ => {}
        }
        self.topology.validate()?;
        let init = &self.init;
        if !(init.position_min < init.position_max) {
            return Err(Error::config("init.position_max", "must exceed position_min"));
        }
        if !(init.heading_min < init.heading_max) {
            return Err(Error::config("init.heading_max", "must exceed heading_min"));
        }
        let cert = &self.certificate;
        if !(cert.sigma_step > 0.0 && cert.sigma_step <= 1.0) {
            return Err(Error::config("certificate.sigma_step", "must lie in (0, 1]"));
        }
        if cert.window == Some(0) {
            return Err(Error::config("certificate.window", "must be at least 1"));
        }
        Ok(())
    }

    /// Instantiates the agents, sampling gains from the gain stream.
    pub fn build_agents(&self) -> Vec<Agent> {
        let n = self.agents;
        let mut rng = stream_rng(self.seed, Stream::Gains);
        match &self.agent {
            AgentConfig::Unicycle { gamma, mu_rot, kappa_eps, deadband, variant } => gamma
                .sample(n, &mut rng)
                .into_iter()
                .map(|g| {
                    Agent::Unicycle(UnicycleAgent {
                        params: ControllerParams {
                            gamma: g,
                            mu_rot: *mu_rot,
                            kappa_eps: *kappa_eps,
                            deadband: *deadband,
                            variant: *variant,
                        },
                    })
                })
                .collect(),
            AgentConfig::FirstOrder { lambda } => lambda
                .sample(n, &mut rng)
                .into_iter()
                .map(|l| Agent::FirstOrder(FirstOrderAgent { lambda: l }))
                .collect(),
        }
    }

    fn initial_states(&self, spec: &FormationSpec) -> Vec<Vec<f64>> {
        let init = &self.init;
        let mut pos_rng = stream_rng(self.seed, Stream::Positions);
        let mut head_rng = stream_rng(self.seed, Stream::Headings);
        let range = init.position_min..=init.position_max;
        let positions: Vec<Vec2> = if init.in_formation {
            let center = Vec2::new(pos_rng.gen_range(range.clone()), pos_rng.gen_range(range));
            spec.placed_at(center)
        } else {
            (0..self.agents)
                .map(|_| Vec2::new(pos_rng.gen_range(range.clone()), pos_rng.gen_range(range.clone())))
                .collect()
        };
        positions
            .into_iter()
            .map(|p| match self.agent {
                AgentConfig::Unicycle { .. } => {
                    vec![p.x, p.y, head_rng.gen_range(init.heading_min..init.heading_max)]
                }
                AgentConfig::FirstOrder { .. } => vec![p.x, p.y],
            })
            .collect()
    }

    fn min_distance(&self) -> f64 {
        match self.agent {
            AgentConfig::Unicycle { deadband, .. } => deadband,
            AgentConfig::FirstOrder { .. } => 1e-9,
        }
    }
}

/// Communication instants `t_0 = 0 < t_1 < …` within the horizon.
///
/// Fixed mode places `t_k = k·T` and snaps the last instant onto the horizon
/// when it lands within rounding of it, so 30 s at 0.1 s gives 301 instants
/// (300 updates) ending at exactly 30.0.
pub fn schedule_instants(config: &ScenarioConfig) -> Vec<f64> {
    let s = &config.schedule;
    let horizon = config.horizon;
    let tol = 1e-9 * horizon.max(1.0);
    let mut times = vec![0.0];
    if horizon < s.t_min {
        return times;
    }
    match s.mode {
        ScheduleMode::Fixed => {
            let count = math::floor(horizon / s.t_min + 1e-9) as usize;
            times.extend((1..=count).map(|k| k as f64 * s.t_min));
            if let Some(last) = times.last_mut() {
                if (*last - horizon).abs() <= tol {
                    *last = horizon;
                }
            }
        }
        ScheduleMode::Random => {
            let mut rng = stream_rng(config.seed, Stream::Schedule);
            let mut t = 0.0;
            loop {
                let gap = if s.t_min == s.t_max { s.t_min } else { rng.gen_range(s.t_min..=s.t_max) };
                if t + gap > horizon + tol {
                    break;
                }
                t += gap;
                times.push(t);
            }
        }
    }
    times
}

/// End state and evenly spaced position samples of one flow interval.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowSegment {
    pub end_state: Vec<f64>,
    /// `samples` positions at `elapsed = j·duration/samples`, `j = 1..=samples`.
    pub samples: Vec<PathSample>,
}

#[derive(Debug, Clone, Copy, PartialEq, thiserror::Error)]
#[error("state became non-finite {elapsed} s into the interval")]
pub struct NonFiniteState {
    pub elapsed: f64,
}

/// Classical RK4 over `[t0, t0 + duration]` with the reference held.
///
/// The step is shrunk so that a whole number of steps fits between samples;
/// it never exceeds `step`.
pub fn integrate_interval<M: AgentModel + ?Sized>(
    model: &M,
    state: &[f64],
    reference: Vec2,
    t0: f64,
    duration: f64,
    step: f64,
    samples: usize,
) -> core::result::Result<FlowSegment, NonFiniteState> {
    let samples = samples.max(1);
    let dim = model.state_dim();
    let per_sample = (math::ceil(duration / (step * samples as f64) - 1e-9) as usize).max(1);
    let h = duration / (per_sample * samples) as f64;

    let mut x = state.to_vec();
    let mut input = vec![0.0; model.input_dim()];
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; dim], vec![0.0; dim], vec![0.0; dim], vec![0.0; dim]);
    let mut tmp = vec![0.0; dim];
    let mut out = Vec::with_capacity(samples);
    let mut steps_done = 0usize;

    for j in 1..=samples {
        for _ in 0..per_sample {
            let t = t0 + steps_done as f64 * h;
            model.closed_loop(t, &x, reference, &mut input, &mut k1);
            for d in 0..dim {
                tmp[d] = x[d] + 0.5 * h * k1[d];
            }
            model.closed_loop(t + 0.5 * h, &tmp, reference, &mut input, &mut k2);
            for d in 0..dim {
                tmp[d] = x[d] + 0.5 * h * k2[d];
            }
            model.closed_loop(t + 0.5 * h, &tmp, reference, &mut input, &mut k3);
            for d in 0..dim {
                tmp[d] = x[d] + h * k3[d];
            }
            model.closed_loop(t + h, &tmp, reference, &mut input, &mut k4);
            for d in 0..dim {
                x[d] += h / 6.0 * (k1[d] + 2.0 * k2[d] + 2.0 * k3[d] + k4[d]);
            }
            steps_done += 1;
            if x.iter().any(|v| !v.is_finite()) {
                return Err(NonFiniteState { elapsed: steps_done as f64 * h });
            }
        }
        let elapsed = duration * j as f64 / samples as f64;
        out.push(PathSample { elapsed, position: model.output(t0 + elapsed, &x) });
    }
    Ok(FlowSegment { end_state: x, samples: out })
}

/// Outcome of fitting a tracking certificate to one agent on one interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum AgentFit {
    Certified(TrackingCertificate),
    /// The agent started at its reference; nothing to certify.
    AtReference,
    /// No σ on the grid admits a decaying envelope.
    Failed,
}

impl AgentFit {
    pub fn certificate(&self) -> Option<&TrackingCertificate> {
        match self {
            AgentFit::Certified(c) => Some(c),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentInterval {
    pub samples: Vec<PathSample>,
    pub fit: AgentFit,
    /// Envelope toward the reference itself (σ = 1).
    pub unit_fit: Option<TrackingCertificate>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntervalRecord {
    pub k: usize,
    pub start: f64,
    pub duration: f64,
    pub agents: Vec<AgentInterval>,
}

/// State at communication instant `t_k`, recorded just before the jump, with
/// the references and matrix produced by it.
#[derive(Debug, Clone, PartialEq)]
pub struct InstantRecord {
    pub k: usize,
    pub t: f64,
    pub positions: Vec<Vec2>,
    /// `r_{i,k+}`; on the terminal instant, the references still held.
    pub references: Vec<Vec2>,
    /// `H_k`; `None` on the terminal instant, where no update happens.
    pub matrix: Option<RowStochasticMatrix>,
    /// Cumulative counts including this instant's update.
    pub ledger: TransmissionLedger,
    pub mse: f64,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    pub name: String,
    pub seed: u64,
    pub agent_count: usize,
    pub displacements: Vec<Vec2>,
    /// Ť, the shortest admissible flow interval.
    pub interval_min: f64,
    pub instants: Vec<InstantRecord>,
    pub intervals: Vec<IntervalRecord>,
    pub ledger: TransmissionLedger,
    /// Mixing certificate of the realized `H_k` sequence.
    pub mixing: Option<MixingCertificate>,
    pub fit_options: FitOptions,
}

impl SimTrace {
    /// Number of reference updates (jumps).
    pub fn updates(&self) -> usize {
        self.intervals.len()
    }

    pub fn matrices(&self) -> Vec<RowStochasticMatrix> {
        self.instants.iter().filter_map(|r| r.matrix.clone()).collect()
    }

    pub fn formation(&self) -> FormationSpec {
        FormationSpec::new(self.displacements.clone())
    }
}

/// Runs a scenario to completion.
pub fn run_scenario(config: &ScenarioConfig) -> Result<SimTrace> {
    config.validate()?;
    let n = config.agents;
    let spec = config.formation.build(n);
    let times = schedule_instants(config);
    let updates = times.len() - 1;

    let realizations: Vec<ChannelRealization> = if updates > 0 {
        generate_topology_sequence(n, updates, &config.topology, config.seed)?
    } else {
        Vec::new()
    };
    let matrices: Vec<RowStochasticMatrix> =
        realizations.iter().map(ChannelRealization::effective_matrix).collect();
    let window = config.certificate.window.unwrap_or_else(|| default_window(n));
    let mixing = if updates >= window { Some(certify_mixing(&matrices, window)?) } else { None };

    let mut fit_options = FitOptions::new(config.schedule.t_min);
    fit_options.sigma_step = config.certificate.sigma_step;
    fit_options.min_distance = config.min_distance();
    if let Some(m) = mixing.filter(MixingCertificate::is_certified) {
        fit_options.window = m.window_length;
        fit_options.margin = m.contraction_margin;
    }

    let agents = config.build_agents();
    let mut states = config.initial_states(&spec);
    let mut positions: Vec<Vec2> = agents.iter().zip(&states).map(|(a, s)| a.output(0.0, s)).collect();
    let mut references = positions.clone();
    let mut ledger = TransmissionLedger::default();
    let mut instants = Vec::with_capacity(times.len());
    let mut intervals = Vec::with_capacity(updates);

    let record = |k: usize, positions: &[Vec2], references: &[Vec2], matrix, ledger| -> Result<InstantRecord> {
        let shifted = shifted_state(positions, &spec)?;
        Ok(InstantRecord {
            k,
            t: times[k],
            positions: positions.to_vec(),
            references: references.to_vec(),
            matrix,
            ledger,
            mse: mse(&shifted),
            delta: delta_seminorm(&shifted),
        })
    };

    for (k, real) in realizations.iter().enumerate() {
        references = jump_update(&positions, &spec, real)?.refs;
        ledger.record_instant(real, PAYLOAD_DIM);
        instants.push(record(k, &positions, &references, Some(matrices[k].clone()), ledger)?);

        let (start, duration) = (times[k], times[k + 1] - times[k]);
        let mut per_agent = Vec::with_capacity(n);
        for (i, agent) in agents.iter().enumerate() {
            let flow = integrate_interval(
                agent,
                &states[i],
                references[i],
                start,
                duration,
                config.step,
                config.samples_per_interval,
            )
            .map_err(|_| Error::NonFinite { agent: i, instant: k })?;
            let (p0, r) = (positions[i], references[i]);
            let fit = if (p0 - r).norm() <= fit_options.min_distance {
                AgentFit::AtReference
            } else {
                match fit_certificate(&flow.samples, p0, r, &fit_options) {
                    Ok(c) => AgentFit::Certified(c),
                    Err(_) => AgentFit::Failed,
                }
            };
            let unit_fit = match fit {
                AgentFit::AtReference => None,
                _ => fit_at_sigma(&flow.samples, p0, r, 1.0)
                    .map(|(c, lambda)| TrackingCertificate { c, lambda, sigma: 1.0 }),
            };
            states[i] = flow.end_state;
            per_agent.push(AgentInterval { samples: flow.samples, fit, unit_fit });
        }
        intervals.push(IntervalRecord { k, start, duration, agents: per_agent });
        positions = agents.iter().zip(&states).map(|(a, s)| a.output(times[k + 1], s)).collect();
    }
    instants.push(record(updates, &positions, &references, None, ledger)?);

    Ok(SimTrace {
        name: config.name.clone(),
        seed: config.seed,
        agent_count: n,
        displacements: spec.displacements().to_vec(),
        interval_min: config.schedule.t_min,
        instants,
        intervals,
        ledger,
        mixing,
        fit_options,
    })
}
