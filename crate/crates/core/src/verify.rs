//! Seeded property suites over the stochastic, channel, metric and tracking
//! layers.
//!
//! Every suite draws its trials from one ChaCha stream, so a `(seed, trial)`
//! pair identifies a counterexample. On failure the report keeps the
//! smallest violating instance.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::agents::{
    first_order_agent, fit_certificate, AgentModel, ControllerParams, FitOptions, UnicycleAgent, UnicycleState,
};
use crate::analysis::delta_seminorm;
use crate::math;
use crate::planar::Vec2;
use crate::rng::{stream_rng, Stream};
use crate::sim::integrate_interval;
use crate::stochastic::{certify_mixing, sigma_modify, window_product, RowStochasticMatrix, SigmaSchedule};
use crate::topology::{generate_topology_sequence, TopologyParams};

/// Slack on inequalities between computed quantities.
pub const TOLERANCE: f64 = 1e-10;

/// Largest gap between a simulated first-order path and its closed form.
pub const FIRST_ORDER_TOLERANCE: f64 = 1e-6;

/// Smallest share of unicycle instances that must admit a certificate.
pub const MIN_CERTIFIED_SHARE: f64 = 0.95;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Suite {
    Tau1,
    Lemma1,
    Hull,
    Seminorm,
    Contraction,
    Tracking,
}

impl Suite {
    pub const ALL: [Suite; 6] =
        [Suite::Tau1, Suite::Lemma1, Suite::Hull, Suite::Seminorm, Suite::Contraction, Suite::Tracking];

    pub fn name(self) -> &'static str {
        match self {
            Suite::Tau1 => "tau1",
            Suite::Lemma1 => "lemma1",
            Suite::Hull => "hull",
            Suite::Seminorm => "seminorm",
            Suite::Contraction => "contraction",
            Suite::Tracking => "tracking",
        }
    }

    pub fn default_trials(self) -> usize {
        match self {
            Suite::Lemma1 => 500,
            Suite::Tracking => 100,
            _ => 1000,
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown suite `{0}` (expected one of tau1, lemma1, hull, seminorm, contraction, tracking)")]
pub struct UnknownSuite(pub String);

impl FromStr for Suite {
    type Err = UnknownSuite;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Suite::ALL.into_iter().find(|suite| suite.name() == s).ok_or_else(|| UnknownSuite(s.into()))
    }
}

/// Deliberate damage applied to every generated matrix, used to check that
/// the suites actually detect broken input.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Corruption {
    #[default]
    None,
    /// Doubles the first row, so it sums to two.
    InflateFirstRow,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuiteOptions {
    pub seed: u64,
    pub trials: usize,
    pub corruption: Corruption,
}

impl SuiteOptions {
    pub fn new(suite: Suite, seed: u64) -> Self {
        Self { seed, trials: suite.default_trials(), corruption: Corruption::None }
    }
}

/// One failed check with enough data to replay it.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub trial: usize,
    pub check: &'static str,
    /// Dimension of the instance; smaller counterexamples are preferred.
    pub size: usize,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "trial {} violates {} (n = {}):\n{}", self.trial, self.check, self.size, self.detail)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuiteReport {
    pub suite: Suite,
    pub seed: u64,
    pub trials: usize,
    pub checks: usize,
    pub violations: usize,
    /// Smallest violating instance, if any.
    pub counterexample: Option<Violation>,
    /// Free-form summary line, e.g. the certified share for `tracking`.
    pub note: Option<String>,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.violations == 0
    }
}

impl fmt::Display for SuiteReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "suite {} seed {}: {} trials, {} checks, {} violations",
            self.suite, self.seed, self.trials, self.checks, self.violations
        )?;
        if let Some(note) = &self.note {
            write!(f, "; {note}")?;
        }
        if let Some(v) = &self.counterexample {
            write!(f, "\n{v}")?;
        }
        Ok(())
    }
}

struct Recorder {
    checks: usize,
    violations: usize,
    smallest: Option<Violation>,
}

impl Recorder {
    fn new() -> Self {
        Self { checks: 0, violations: 0, smallest: None }
    }

    fn check(&mut self, ok: bool, trial: usize, check: &'static str, size: usize, detail: impl FnOnce() -> String) {
        self.checks += 1;
        if ok {
            return;
        }
        self.violations += 1;
        if self.smallest.as_ref().is_none_or(|v| size < v.size) {
            self.smallest = Some(Violation { trial, check, size, detail: detail() });
        }
    }

    fn finish(self, suite: Suite, opts: &SuiteOptions, note: Option<String>) -> SuiteReport {
        SuiteReport {
            suite,
            seed: opts.seed,
            trials: opts.trials,
            checks: self.checks,
            violations: self.violations,
            counterexample: self.smallest,
            note,
        }
    }
}

pub fn run_suite(suite: Suite, opts: &SuiteOptions) -> SuiteReport {
    let mut rng = stream_rng(opts.seed, Stream::Verify);
    let mut rec = Recorder::new();
    let note = match suite {
        Suite::Tau1 => tau1_suite(&mut rng, opts, &mut rec),
        Suite::Lemma1 => lemma1_suite(&mut rng, opts, &mut rec),
        Suite::Hull => hull_suite(&mut rng, opts, &mut rec),
        Suite::Seminorm => seminorm_suite(&mut rng, opts, &mut rec),
        Suite::Contraction => contraction_suite(&mut rng, opts, &mut rec),
        Suite::Tracking => tracking_suite(&mut rng, opts, &mut rec),
    };
    rec.finish(suite, opts, note)
}

fn corrupt(m: RowStochasticMatrix, corruption: Corruption) -> RowStochasticMatrix {
    match corruption {
        Corruption::None => m,
        Corruption::InflateFirstRow => {
            let n = m.dim();
            let mut entries = m.as_slice().to_vec();
            entries[..n].iter_mut().for_each(|v| *v *= 2.0);
            RowStochasticMatrix::from_raw_unchecked(n, entries)
        }
    }
}

/// Random row-stochastic matrix with a positive diagonal and a random
/// sparsity pattern; occasionally the identity or a rank-one matrix.
fn random_matrix(rng: &mut ChaCha8Rng, n: usize, corruption: Corruption) -> RowStochasticMatrix {
    let m = match rng.gen_range(0..20) {
        0 => RowStochasticMatrix::identity(n),
        1 => {
            let row = random_simplex(rng, n, 0.5);
            let entries = (0..n).flat_map(|_| row.iter().copied()).collect();
            RowStochasticMatrix::new(n, entries).expect("rank-one rows are stochastic")
        }
        _ => {
            let density = rng.gen_range(0.1..=1.0);
            let mut entries = Vec::with_capacity(n * n);
            for i in 0..n {
                let mut row = random_simplex(rng, n, density);
                if row[i] == 0.0 {
                    row[i] = rng.gen_range(0.05..1.0);
                    let s: f64 = row.iter().sum();
                    row.iter_mut().for_each(|v| *v /= s);
                }
                entries.extend(row);
            }
            RowStochasticMatrix::new(n, entries).expect("normalized rows are stochastic")
        }
    };
    corrupt(m, corruption)
}

fn random_simplex(rng: &mut ChaCha8Rng, n: usize, density: f64) -> Vec<f64> {
    let mut row: Vec<f64> =
        (0..n).map(|_| if rng.gen_bool(density) { rng.gen_range(0.0..1.0) } else { 0.0 }).collect();
    let s: f64 = row.iter().sum();
    if s > 0.0 {
        row.iter_mut().for_each(|v| *v /= s);
    } else {
        row[rng.gen_range(0..n)] = 1.0;
    }
    row
}

fn random_points(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<Vec2> {
    (0..n).map(|_| Vec2::new(rng.gen_range(-scale..scale), rng.gen_range(-scale..scale))).collect()
}

fn show_matrix(m: &RowStochasticMatrix) -> String {
    let n = m.dim();
    let mut out = String::new();
    for i in 0..n {
        let cells: Vec<String> = m.row(i).iter().map(|v| format!("{v:.17e}")).collect();
        out += &format!("  [{}]\n", cells.join(", "));
    }
    out
}

fn show_points(x: &[Vec2]) -> String {
    let cells: Vec<String> = x.iter().map(|p| format!("({:.17e}, {:.17e})", p.x, p.y)).collect();
    format!("  [{}]\n", cells.join(", "))
}

fn is_stochastic(m: &RowStochasticMatrix) -> bool {
    (0..m.dim()).all(|i| {
        let row = m.row(i);
        row.iter().all(|v| *v >= 0.0) && (row.iter().sum::<f64>() - 1.0).abs() <= 1e-12
    })
}

fn check_stochastic(rec: &mut Recorder, trial: usize, m: &RowStochasticMatrix) {
    rec.check(is_stochastic(m), trial, "row-stochastic input", m.dim(), || show_matrix(m));
}

fn tau1_suite(rng: &mut ChaCha8Rng, opts: &SuiteOptions, rec: &mut Recorder) -> Option<String> {
    for trial in 0..opts.trials {
        let n = rng.gen_range(2..=8);
        let a = random_matrix(rng, n, opts.corruption);
        let b = random_matrix(rng, n, opts.corruption);
        check_stochastic(rec, trial, &a);

        let ta = a.tau1();
        rec.check((0.0..=1.0).contains(&ta), trial, "tau1 in [0, 1]", n, || {
            format!("tau1 = {ta:.17e}\n{}", show_matrix(&a))
        });
        let to = a.tau1_overlap();
        rec.check((ta - to).abs() <= TOLERANCE, trial, "tau1 formula equivalence", n, || {
            format!("L1 form {ta:.17e}, overlap form {to:.17e}\n{}", show_matrix(&a))
        });
        let tb = b.tau1();
        let ab = unchecked_product(&a, &b);
        let tab = ab.tau1();
        rec.check(tab <= ta * tb + TOLERANCE, trial, "tau1 submultiplicativity", n, || {
            format!("tau1(AB) = {tab:.17e} > {ta:.17e} * {tb:.17e}\nA =\n{}B =\n{}", show_matrix(&a), show_matrix(&b))
        });
    }
    None
}

/// Plain product, kept outside [`RowStochasticMatrix::mul`] so corrupted
/// factors reach the checks instead of being rejected.
fn unchecked_product(a: &RowStochasticMatrix, b: &RowStochasticMatrix) -> RowStochasticMatrix {
    let n = a.dim();
    let mut entries = alloc::vec![0.0; n * n];
    for i in 0..n {
        for s in 0..n {
            for j in 0..n {
                entries[i * n + j] += a.get(i, s) * b.get(s, j);
            }
        }
    }
    RowStochasticMatrix::from_raw_unchecked(n, entries)
}

fn lemma1_suite(rng: &mut ChaCha8Rng, opts: &SuiteOptions, rec: &mut Recorder) -> Option<String> {
    let mut certified = 0usize;
    for trial in 0..opts.trials {
        let n = rng.gen_range(3..=8);
        let window = rng.gen_range(1..=4);
        let len = window + rng.gen_range(0..=4);
        let seq: Vec<RowStochasticMatrix> = if rng.gen_bool(0.5) {
            let params = TopologyParams { edge_probability: rng.gen_range(0.1..=0.9), ..TopologyParams::default() };
            generate_topology_sequence(n, len, &params, rng.gen())
                .expect("cycle-backed topologies always exist")
                .iter()
                .map(|r| corrupt(r.effective_matrix(), opts.corruption))
                .collect()
        } else {
            (0..len).map(|_| random_matrix(rng, n, opts.corruption)).collect()
        };
        for m in &seq {
            check_stochastic(rec, trial, m);
        }
        let Ok(cert) = certify_mixing(&seq, window) else {
            rec.check(false, trial, "mixing certificate computable", n, || {
                seq.iter().map(show_matrix).collect::<Vec<_>>().join("--\n")
            });
            continue;
        };
        if cert.is_certified() {
            certified += 1;
        }

        let floor = rng.gen_range(0.05..=1.0);
        let values: Vec<Vec<f64>> =
            (0..len).map(|_| (0..n).map(|_| rng.gen_range(floor..=1.0)).collect()).collect();
        let sigmas = SigmaSchedule::new(n, values).expect("values lie in (0, 1]");
        let sigma_min = sigmas.sigma_min();

        let modified: Vec<RowStochasticMatrix> = seq
            .iter()
            .enumerate()
            .map(|(k, h)| {
                let m = sigma_modify(h, sigmas.at(k)).unwrap_or_else(|_| raw_sigma_modify(h, sigmas.at(k)));
                for i in 0..n {
                    for j in 0..n {
                        let ok = m.get(i, j) + TOLERANCE >= sigma_min * h.get(i, j);
                        rec.check(ok, trial, "sigma_modify dominates sigma_min * H", n, || {
                            format!("entry ({i}, {j}) at instant {k}, sigma_min {sigma_min:.17e}\nH =\n{}", show_matrix(h))
                        });
                    }
                }
                m
            })
            .collect();

        let bound = 1.0 - math::powi(sigma_min, window as i32) * cert.contraction_margin + TOLERANCE;
        for start in 0..=len - window {
            let tau = window_product(&modified, start, window)
                .map(|p| p.tau1())
                .unwrap_or_else(|_| raw_window(&modified, start, window).tau1());
            rec.check(tau <= bound, trial, "Lemma 1 window bound", n, || {
                format!(
                    "window {start}..{} of L = {window}: tau1 = {tau:.17e} > {bound:.17e} (mu = {:.17e}, sigma_min = {sigma_min:.17e})\n{}",
                    start + window,
                    cert.contraction_margin,
                    seq[start..start + window].iter().map(show_matrix).collect::<Vec<_>>().join("--\n")
                )
            });
        }
    }
    Some(format!("{certified} of {} sequences certified mixing", opts.trials))
}

fn raw_sigma_modify(h: &RowStochasticMatrix, sigmas: &[f64]) -> RowStochasticMatrix {
    let n = h.dim();
    let mut entries = Vec::with_capacity(n * n);
    for (i, &s) in sigmas.iter().enumerate() {
        for j in 0..n {
            entries.push(if i == j { 1.0 - s } else { 0.0 } + s * h.get(i, j));
        }
    }
    RowStochasticMatrix::from_raw_unchecked(n, entries)
}

fn raw_window(seq: &[RowStochasticMatrix], start: usize, len: usize) -> RowStochasticMatrix {
    let mut acc = RowStochasticMatrix::identity(seq[start].dim());
    for m in &seq[start..start + len] {
        acc = unchecked_product(m, &acc);
    }
    acc
}

fn hull_suite(rng: &mut ChaCha8Rng, opts: &SuiteOptions, rec: &mut Recorder) -> Option<String> {
    for trial in 0..opts.trials {
        let n = rng.gen_range(2..=8);
        let params = TopologyParams {
            edge_probability: rng.gen_range(0.0..=1.0),
            xi_min: rng.gen_range(0.01..=1.0),
            hamiltonian_cycle: true,
        };
        let real = generate_topology_sequence(n, 1, &params, rng.gen())
            .expect("cycle-backed topologies always exist")
            .remove(0);
        let payload = random_points(rng, n, 100.0);
        for i in 0..n {
            let z = real.normalized_aggregate(i, &payload);
            let hood: Vec<Vec2> = real.graph().in_neighbors(i).map(|j| payload[j]).collect();
            let (lo_x, hi_x) = hood.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), p| (l.min(p.x), h.max(p.x)));
            let (lo_y, hi_y) = hood.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), p| (l.min(p.y), h.max(p.y)));
            let slack = 1e-12 * 100.0;
            let ok = z.x >= lo_x - slack && z.x <= hi_x + slack && z.y >= lo_y - slack && z.y <= hi_y + slack;
            rec.check(ok, trial, "aggregate within neighbour hull", n, || {
                format!("receiver {i} got ({:.17e}, {:.17e}) from neighbours\n{}", z.x, z.y, show_points(&hood))
            });
        }
        check_stochastic(rec, trial, &corrupt(real.effective_matrix(), opts.corruption));
    }
    None
}

fn seminorm_suite(rng: &mut ChaCha8Rng, opts: &SuiteOptions, rec: &mut Recorder) -> Option<String> {
    for trial in 0..opts.trials {
        let n = rng.gen_range(1..=10);
        let x = random_points(rng, n, 10.0);
        let y = random_points(rng, n, 10.0);
        let c: f64 = rng.gen_range(-5.0..5.0);
        let shift = Vec2::new(rng.gen_range(-50.0..50.0), rng.gen_range(-50.0..50.0));
        let dx = delta_seminorm(&x);
        let dy = delta_seminorm(&y);
        let scale = 1.0 + dx + dy;

        rec.check(dx >= 0.0, trial, "nonnegativity", n, || show_points(&x));
        let sum: Vec<Vec2> = x.iter().zip(&y).map(|(a, b)| *a + *b).collect();
        let ds = delta_seminorm(&sum);
        rec.check(ds <= dx + dy + TOLERANCE * scale, trial, "triangle inequality", n, || {
            format!("x =\n{}y =\n{}", show_points(&x), show_points(&y))
        });
        let scaled: Vec<Vec2> = x.iter().map(|p| *p * c).collect();
        let dc = delta_seminorm(&scaled);
        rec.check((dc - c.abs() * dx).abs() <= TOLERANCE * scale * (1.0 + c.abs()), trial, "absolute homogeneity", n, || {
            format!("c = {c:.17e}\n{}", show_points(&x))
        });
        let moved: Vec<Vec2> = x.iter().map(|p| *p + shift).collect();
        let dm = delta_seminorm(&moved);
        rec.check((dm - dx).abs() <= TOLERANCE * (scale + shift.norm()), trial, "translation invariance", n, || {
            format!("shift ({:.17e}, {:.17e})\n{}", shift.x, shift.y, show_points(&x))
        });
        let agreed = alloc::vec![shift; n];
        let da = delta_seminorm(&agreed);
        rec.check(da == 0.0, trial, "zero on consensus", n, || show_points(&agreed));
    }
    None
}

fn contraction_suite(rng: &mut ChaCha8Rng, opts: &SuiteOptions, rec: &mut Recorder) -> Option<String> {
    for trial in 0..opts.trials {
        let n = rng.gen_range(2..=8);
        let a = random_matrix(rng, n, opts.corruption);
        let x = random_points(rng, n, 10.0);
        check_stochastic(rec, trial, &a);
        let ax: Vec<Vec2> = (0..n)
            .map(|i| a.row(i).iter().zip(&x).fold(Vec2::ZERO, |acc, (h, p)| acc + *p * *h))
            .collect();
        let (lhs, tau, dx) = (delta_seminorm(&ax), a.tau1(), delta_seminorm(&x));
        rec.check(lhs <= tau * dx + TOLERANCE * (1.0 + dx), trial, "delta contraction by tau1", n, || {
            format!(
                "delta(Ax) = {lhs:.17e} > tau1 {tau:.17e} * delta(x) {dx:.17e}\nA =\n{}x =\n{}",
                show_matrix(&a),
                show_points(&x)
            )
        });
    }
    None
}

fn tracking_suite(rng: &mut ChaCha8Rng, opts: &SuiteOptions, rec: &mut Recorder) -> Option<String> {
    const PERIOD: f64 = 0.1;
    let mut certified = 0usize;
    for trial in 0..opts.trials {
        let lambda = rng.gen_range(0.5..5.0);
        let agent = first_order_agent(lambda);
        let start = Vec2::new(rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0));
        let reference = Vec2::new(rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0));
        let flow = integrate_interval(&agent, &[start.x, start.y], reference, 0.0, 1.0, 1e-3, 20)
            .expect("linear flow stays finite");
        let worst = flow
            .samples
            .iter()
            .map(|s| (s.position - agent.closed_form(start, reference, s.elapsed)).norm())
            .fold(0.0, f64::max);
        rec.check(worst <= FIRST_ORDER_TOLERANCE, trial, "first-order closed form", 2, || {
            format!("lambda {lambda:.17e}, start ({:.17e}, {:.17e}), reference ({:.17e}, {:.17e}), error {worst:.3e} m",
                start.x, start.y, reference.x, reference.y)
        });

        let gamma = -10.0 * math::ln(rng.gen_range(0.4..1.0));
        let agent = UnicycleAgent { params: ControllerParams::new(gamma.max(1e-3), 0.0) };
        let state = UnicycleState::new(rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0), rng.gen_range(0.0..math::TAU));
        let reference = Vec2::new(rng.gen_range(-10.0..10.0), rng.gen_range(-10.0..10.0));
        let p0 = agent.output(0.0, &state.to_array());
        let Ok(flow) = integrate_interval(&agent, &state.to_array(), reference, 0.0, PERIOD, 1e-3, 20) else {
            continue;
        };
        if let Ok(cert) = fit_certificate(&flow.samples, p0, reference, &FitOptions::new(PERIOD)) {
            let ratio = cert.worst_ratio(&flow.samples, p0, reference);
            rec.check(ratio <= 1.0 + TOLERANCE, trial, "certificate envelope holds", 3, || {
                format!("{cert:?} exceeded by factor {ratio:.17e}")
            });
            certified += 1;
        }
    }
    let share = certified as f64 / opts.trials.max(1) as f64;
    rec.check(share >= MIN_CERTIFIED_SHARE, opts.trials, "unicycle certificate share", 3, || {
        format!("{certified} of {} instances certified", opts.trials)
    });
    Some(format!("{certified} of {} unicycle instances certified", opts.trials))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_round_trip() {
        for suite in Suite::ALL {
            assert_eq!(suite.name().parse::<Suite>().unwrap(), suite);
        }
        assert!("tau2".parse::<Suite>().is_err());
    }

    #[test]
    fn matrix_and_metric_suites_pass_on_a_short_run() {
        for suite in [Suite::Tau1, Suite::Lemma1, Suite::Hull, Suite::Seminorm, Suite::Contraction] {
            let opts = SuiteOptions { seed: 3, trials: 40, corruption: Corruption::None };
            let report = run_suite(suite, &opts);
            assert!(report.passed(), "{report}");
            assert!(report.checks >= opts.trials);
        }
    }

    #[test]
    fn tracking_suite_only_misses_on_certificate_share() {
        let opts = SuiteOptions { seed: 3, trials: 40, corruption: Corruption::None };
        let report = run_suite(Suite::Tracking, &opts);
        assert!(report.violations <= 1, "{report}");
        if let Some(v) = report.counterexample {
            assert_eq!(v.check, "unicycle certificate share");
        }
    }

    #[test]
    fn corrupted_matrices_are_caught() {
        for suite in [Suite::Tau1, Suite::Lemma1, Suite::Contraction, Suite::Hull] {
            let opts = SuiteOptions { seed: 3, trials: 20, corruption: Corruption::InflateFirstRow };
            let report = run_suite(suite, &opts);
            assert!(!report.passed(), "{suite}");
            assert!(report.counterexample.is_some());
        }
    }

    #[test]
    fn counterexample_is_the_smallest() {
        let opts = SuiteOptions { seed: 9, trials: 50, corruption: Corruption::InflateFirstRow };
        let report = run_suite(Suite::Tau1, &opts);
        assert_eq!(report.counterexample.unwrap().size, 2);
    }
}
