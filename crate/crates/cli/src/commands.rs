use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::thread;

use otaform_core::analysis::Verdict;
use otaform_core::sim::{run_scenario, ScenarioConfig};
use otaform_core::verify::{run_suite, Corruption, Suite, SuiteOptions, SuiteReport};

use crate::config::{load_config, paper_configs, ConfigError};
use crate::output::{write_run, ReportBundle, N2N_FORMULA};

pub const SUMMARY_FILE: &str = "summary.csv";
pub const SENSITIVITY_FILE: &str = "seed_sensitivity.csv";

/// Seeds tried for the rotating fast-schedule run when reporting how much
/// its verdict depends on the random realization.
pub const SENSITIVITY_SEEDS: std::ops::Range<u64> = 0..20;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error("run {name} failed: {source}")]
    Run { name: String, source: otaform_core::Error },
    #[error("cannot write {path}: {source}")]
    Write { path: String, source: std::io::Error },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) | CliError::Usage(_) => 1,
            CliError::Run { .. } | CliError::Write { .. } => 2,
        }
    }
}

fn write_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Write { path: path.display().to_string(), source }
}

fn execute(config: &ScenarioConfig, out: &Path) -> Result<ReportBundle, CliError> {
    let trace = run_scenario(config).map_err(|source| CliError::Run { name: config.name.clone(), source })?;
    write_run(out, config, &trace).map_err(write_err(out))
}

/// Runs one scenario file. Nothing is written unless the configuration is
/// valid and the run completes.
pub fn cmd_run(config_path: &Path, out: &Path, seed: Option<u64>) -> Result<ReportBundle, CliError> {
    let mut config = load_config(config_path)?;
    if let Some(seed) = seed {
        config.seed = seed;
    }
    execute(&config, out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SensitivityRow {
    pub seed: u64,
    pub verdict: Verdict,
    pub mse_ratio: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PaperSummary {
    pub runs: Vec<ReportBundle>,
    pub sensitivity: Vec<SensitivityRow>,
}

impl PaperSummary {
    pub fn table(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{:<6} {:<10} {:>12} {:>8} {:>6} {:>6}", "run", "verdict", "mse ratio", "updates", "ota", "n2n");
        for r in &self.runs {
            let _ = writeln!(
                s,
                "{:<6} {:<10} {:>12.3e} {:>8} {:>6} {:>6}",
                r.scenario.name, r.verdict, r.mse_ratio, r.ledger.updates, r.ledger.ota_count, r.ledger.n2n_count
            );
        }
        let _ = writeln!(s, "({N2N_FORMULA})");
        let diverged = self.sensitivity.iter().filter(|r| r.verdict == Verdict::Diverged).count();
        let converged = self.sensitivity.iter().filter(|r| r.verdict == Verdict::Converged).count();
        let _ = writeln!(
            s,
            "run2 over seeds {}..{}: {diverged} diverged, {converged} converged, {} undecided",
            SENSITIVITY_SEEDS.start,
            SENSITIVITY_SEEDS.end,
            self.sensitivity.len() - diverged - converged
        );
        s
    }

    fn summary_csv(&self) -> String {
        let mut s = String::from("run,seed,verdict,mse_ratio,updates,ota_count,n2n_count,theorem1_satisfied,theorem2_satisfied\n");
        for r in &self.runs {
            let _ = writeln!(
                s,
                "{},{},{},{:.16e},{},{},{},{},{}",
                r.scenario.name,
                r.scenario.seed,
                r.verdict,
                r.mse_ratio,
                r.ledger.updates,
                r.ledger.ota_count,
                r.ledger.n2n_count,
                r.theorems.theorem1_satisfied,
                r.theorems.theorem2_satisfied
            );
        }
        s
    }

    fn sensitivity_csv(&self) -> String {
        let mut s = String::from("seed,verdict,mse_ratio\n");
        for r in &self.sensitivity {
            let _ = writeln!(s, "{},{},{:.16e}", r.seed, r.verdict, r.mse_ratio);
        }
        s
    }
}

/// Runs the three bundled experiments side by side, then the seed sweep of
/// the second one.
pub fn cmd_paper(out: &Path, seed: Option<u64>) -> Result<PaperSummary, CliError> {
    let mut configs = paper_configs();
    if let Some(seed) = seed {
        configs.iter_mut().for_each(|c| c.seed = seed);
    }
    let runs: Vec<Result<ReportBundle, CliError>> = thread::scope(|scope| {
        let handles: Vec<_> = configs
            .iter()
            .map(|config| scope.spawn(move || execute(config, &out.join(&config.name))))
            .collect();
        handles.into_iter().map(|h| h.join().expect("run thread panicked")).collect()
    });
    let runs = runs.into_iter().collect::<Result<Vec<_>, _>>()?;

    let probe = &configs[1];
    let seeds: Vec<u64> = SENSITIVITY_SEEDS.collect();
    let workers = thread::available_parallelism().map_or(4, |n| n.get()).min(seeds.len());
    let sensitivity: Vec<Result<SensitivityRow, CliError>> = thread::scope(|scope| {
        let handles: Vec<_> = seeds
            .chunks(seeds.len().div_ceil(workers))
            .map(|chunk| {
                scope.spawn(move || {
                    chunk
                        .iter()
                        .map(|&seed| {
                            let config = ScenarioConfig { seed, ..probe.clone() };
                            let trace = run_scenario(&config)
                                .map_err(|source| CliError::Run { name: config.name.clone(), source })?;
                            let report = ReportBundle::new(&config, &trace);
                            Ok(SensitivityRow { seed, verdict: report.verdict(), mse_ratio: report.mse_ratio })
                        })
                        .collect::<Vec<_>>()
                })
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("sweep thread panicked")).collect()
    });
    let sensitivity = sensitivity.into_iter().collect::<Result<Vec<_>, _>>()?;

    let summary = PaperSummary { runs, sensitivity };
    let path = out.join(SUMMARY_FILE);
    fs::write(&path, summary.summary_csv()).map_err(write_err(&path))?;
    let path = out.join(SENSITIVITY_FILE);
    fs::write(&path, summary.sensitivity_csv()).map_err(write_err(&path))?;
    Ok(summary)
}

pub fn cmd_verify(
    suite: &str,
    seed: u64,
    trials: Option<usize>,
    corruption: Corruption,
) -> Result<SuiteReport, CliError> {
    let suite: Suite = suite.parse().map_err(|e: otaform_core::verify::UnknownSuite| CliError::Usage(e.to_string()))?;
    let mut opts = SuiteOptions::new(suite, seed);
    if let Some(trials) = trials {
        opts.trials = trials;
    }
    opts.corruption = corruption;
    Ok(run_suite(suite, &opts))
}
