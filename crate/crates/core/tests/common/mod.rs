#![allow(dead_code)]

use otaform_core::agents::ControllerVariant;
use otaform_core::sim::*;
use otaform_core::topology::TopologyParams;

pub const PAPER_SEED: u64 = 13;

pub fn unicycle_scenario(seed: u64, mu_rot: f64, period: f64) -> ScenarioConfig {
    ScenarioConfig {
        name: String::from("scenario"),
        seed,
        agents: 6,
        horizon: 30.0,
        step: 1e-3,
        samples_per_interval: 20,
        schedule: ScheduleConfig { mode: ScheduleMode::Fixed, t_min: period, t_max: period },
        agent: AgentConfig::Unicycle {
            gamma: GainLaw::LogUniform { a_min: 0.4, a_max: 1.0, scale: 10.0 },
            mu_rot,
            kappa_eps: otaform_core::agents::DEFAULT_KAPPA_EPS,
            deadband: 1e-6,
            variant: ControllerVariant::Perpendicular,
        },
        formation: FormationConfig::Polygon { radius: 5.0 },
        topology: TopologyParams::default(),
        init: InitConfig::default(),
        certificate: CertificateConfig::default(),
    }
}

pub fn first_order_scenario(seed: u64, lambda: f64) -> ScenarioConfig {
    let mut config = unicycle_scenario(seed, 0.0, 0.1);
    config.horizon = 5.0;
    config.agent = AgentConfig::FirstOrder { lambda: GainLaw::Fixed { value: lambda } };
    config
}
