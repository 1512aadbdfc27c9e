mod common;

use common::{first_order_scenario, unicycle_scenario, PAPER_SEED};
use otaform_core::agents::segment_bound;
use otaform_core::analysis::{delta_seminorm, end_of_interval_radius, metrics, theorem_report, verdict, Verdict};
use otaform_core::formation::shifted_state;
use otaform_core::sim::{integrate_interval, run_scenario, AgentFit};
use otaform_core::stochastic::RowStochasticMatrix;
use otaform_core::Vec2;

const HALF_TURN_RATE: f64 = std::f64::consts::PI / 0.2;

fn shifted(trace: &otaform_core::sim::SimTrace, k: usize) -> Vec<Vec2> {
    shifted_state(&trace.instants[k].positions, &trace.formation()).unwrap()
}

#[test]
fn paper_runs_reach_their_verdicts() {
    let runs = [
        (0.0, 0.1, Verdict::Converged),
        (HALF_TURN_RATE, 0.1, Verdict::Diverged),
        (std::f64::consts::FRAC_PI_2, 1.0, Verdict::Converged),
    ];
    for (mu_rot, period, expected) in runs {
        let trace = run_scenario(&unicycle_scenario(PAPER_SEED, mu_rot, period)).unwrap();
        assert_eq!(verdict(&trace), expected, "mu_rot {mu_rot}, T {period}");
    }
}

#[test]
fn runs_are_deterministic() {
    let config = unicycle_scenario(5, 0.0, 0.1);
    assert_eq!(run_scenario(&config).unwrap(), run_scenario(&config).unwrap());
}

#[test]
fn in_formation_start_stays_in_formation() {
    let mut config = unicycle_scenario(2, 0.0, 0.1);
    config.horizon = 9.9;
    config.init.in_formation = true;
    let trace = run_scenario(&config).unwrap();
    assert_eq!(trace.instants.len(), 100);
    let series = metrics(&trace);
    assert!(series.mse.iter().all(|m| *m <= 1e-12), "{:?}", series.mse);
    assert_eq!(verdict(&trace), Verdict::Converged);
}

#[test]
fn positions_are_continuous_across_jumps() {
    let trace = run_scenario(&unicycle_scenario(3, 0.0, 0.1)).unwrap();
    for (iv, next) in trace.intervals.iter().zip(&trace.instants[1..]) {
        for (a, p) in iv.agents.iter().zip(&next.positions) {
            assert_eq!(a.samples.last().unwrap().position, *p);
        }
    }
    for (k, rec) in trace.instants.iter().enumerate() {
        assert_eq!(rec.k, k);
        assert_eq!(rec.matrix.is_none(), k + 1 == trace.instants.len());
    }
}

#[test]
fn references_are_the_mixed_shifted_positions() {
    let trace = run_scenario(&unicycle_scenario(4, 0.0, 0.1)).unwrap();
    let d = trace.displacements.clone();
    for (k, rec) in trace.instants.iter().take(trace.updates()).enumerate() {
        let h: &RowStochasticMatrix = rec.matrix.as_ref().unwrap();
        let mixed = h.apply_planar(&shifted(&trace, k)).unwrap();
        for i in 0..trace.agent_count {
            assert!((rec.references[i] - (mixed[i] + d[i])).norm() < 1e-12);
        }
    }
}

#[test]
fn agent_flows_depend_only_on_their_own_state() {
    // First-order agents carry no hidden state, so each interval can be
    // replayed from the trace for one agent in isolation.
    let mut config = first_order_scenario(6, 3.0);
    config.agent = otaform_core::sim::AgentConfig::FirstOrder {
        lambda: otaform_core::sim::GainLaw::PerAgent { values: vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0] },
    };
    let trace = run_scenario(&config).unwrap();
    let agents = config.build_agents();
    for (k, iv) in trace.intervals.iter().enumerate() {
        let rec = &trace.instants[k];
        for (i, agent) in agents.iter().enumerate() {
            let p = rec.positions[i];
            let alone = integrate_interval(
                agent,
                &[p.x, p.y],
                rec.references[i],
                iv.start,
                iv.duration,
                config.step,
                config.samples_per_interval,
            )
            .unwrap();
            assert_eq!(alone.samples, iv.agents[i].samples, "agent {i}, interval {k}");
        }
    }
}

#[test]
fn one_step_disagreement_growth_is_bounded() {
    for (seed, mu_rot) in [(PAPER_SEED, 0.0), (PAPER_SEED, HALF_TURN_RATE), (21, 0.0)] {
        let trace = run_scenario(&unicycle_scenario(seed, mu_rot, 0.1)).unwrap();
        let mut checked = 0;
        for (k, iv) in trace.intervals.iter().enumerate() {
            let units: Option<Vec<f64>> = iv
                .agents
                .iter()
                .map(|a| match a.fit {
                    AgentFit::AtReference => Some(0.0),
                    _ => a.unit_fit.map(|u| u.beta(trace.interval_min)),
                })
                .collect();
            let Some(units) = units else { continue };
            let beta_hat = units.iter().fold(0.0f64, |m, b| m.max(*b));
            let before = delta_seminorm(&shifted(&trace, k));
            let after = delta_seminorm(&shifted(&trace, k + 1));
            assert!(after <= (1.0 + 2.0 * beta_hat) * before * (1.0 + 1e-12) + 1e-9, "seed {seed}, k {k}");
            checked += 1;
        }
        assert!(checked > 0);
    }
}

#[test]
fn end_of_interval_positions_stay_in_their_balls() {
    for (seed, mu_rot, period) in [(PAPER_SEED, 0.0, 0.1), (PAPER_SEED, HALF_TURN_RATE, 0.1), (PAPER_SEED, 1.5, 1.0)] {
        let trace = run_scenario(&unicycle_scenario(seed, mu_rot, period)).unwrap();
        for (k, iv) in trace.intervals.iter().enumerate() {
            for (i, a) in iv.agents.iter().enumerate() {
                let Some(cert) = a.fit.certificate() else { continue };
                let (p, r) = (trace.instants[k].positions[i], trace.instants[k].references[i]);
                let s = p.lerp(r, cert.sigma);
                let radius = end_of_interval_radius(cert.beta(trace.interval_min), cert.sigma, p, r);
                let end = trace.instants[k + 1].positions[i];
                assert!((end - s).norm() <= radius * (1.0 + 1e-9), "k {k}, agent {i}");
            }
        }
    }
}

#[test]
fn fast_first_order_agents_satisfy_both_conditions_and_contract() {
    let trace = run_scenario(&first_order_scenario(PAPER_SEED, 50.0)).unwrap();
    let report = theorem_report(&trace);
    assert!(report.theorem1_satisfied, "{report:?}");
    assert!(report.theorem2_satisfied, "{report:?}");
    assert_eq!(verdict(&trace), Verdict::Converged);

    let window = report.window.unwrap();
    let margin = report.mixing_margin.unwrap();
    let sigma_min = report.sigma_min.unwrap();
    let max_sigma_beta = report.sigma_beta.unwrap().iter().flatten().fold(0.0f64, |m, v| m.max(*v));
    assert!(max_sigma_beta < segment_bound(sigma_min, window, margin));
    let rate = 1.0 - sigma_min.powi(window as i32) * margin + ((1.0 + 2.0 * max_sigma_beta).powi(window as i32) - 1.0);
    assert!(rate < 1.0);
    for k in 0..=trace.updates() - window {
        let before = delta_seminorm(&shifted(&trace, k));
        let after = delta_seminorm(&shifted(&trace, k + window));
        if before < 1e-9 {
            break;
        }
        assert!(after <= rate * before + 1e-9, "window at {k}: {after} > {rate} * {before}");
    }
}

#[test]
fn ledger_matches_an_independent_recount() {
    let trace = run_scenario(&unicycle_scenario(PAPER_SEED, 0.0, 0.1)).unwrap();
    assert_eq!(trace.updates(), 300);
    assert_eq!(trace.ledger.ota_count, 900);
    let arcs: u64 = trace
        .matrices()
        .iter()
        .map(|h| {
            let n = h.dim();
            (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).filter(|&(i, j)| i != j && h.get(i, j) > 0.0).count() as u64
        })
        .sum();
    assert_eq!(trace.ledger.n2n_count, 2 * arcs);
    assert!((3000..=18000).contains(&trace.ledger.n2n_count));
}
