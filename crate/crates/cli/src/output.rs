//! Trace CSVs and the per-run report.

use std::fs;
use std::io::Write;
use std::path::Path;

use otaform_core::analysis::{metrics, theorem_report, verdict, MetricsSeries, TheoremReport, Verdict};
use otaform_core::sim::{ScenarioConfig, SimTrace};
use otaform_core::stochastic::MixingCertificate;
use serde::Serialize;

pub const TRACE_FILE: &str = "trace.csv";
pub const SAMPLES_FILE: &str = "samples.csv";
pub const REPORT_FILE: &str = "report.toml";

pub const N2N_FORMULA: &str = "n2n_count = 2 * sum over instants of the non-self arcs in the realized graph";

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn writer<W: Write>(w: W) -> csv::Writer<W> {
    csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(w)
}

/// One row per communication instant: metrics, ledger, positions and
/// references of every agent, then `H_k` row-major. The terminal instant has
/// no matrix and leaves those cells empty.
pub fn write_trace_csv<W: Write>(trace: &SimTrace, w: W) -> csv::Result<()> {
    let n = trace.agent_count;
    let mut out = writer(w);
    let mut header: Vec<String> = ["k", "t", "mse", "delta", "ota_count", "n2n_count"].map(String::from).to_vec();
    for i in 0..n {
        header.extend([format!("p{i}_x"), format!("p{i}_y"), format!("r{i}_x"), format!("r{i}_y")]);
    }
    for i in 0..n {
        header.extend((0..n).map(|j| format!("h{i}_{j}")));
    }
    out.write_record(&header)?;

    for rec in &trace.instants {
        let mut row = vec![
            rec.k.to_string(),
            num(rec.t),
            num(rec.mse),
            num(rec.delta),
            rec.ledger.ota_count.to_string(),
            rec.ledger.n2n_count.to_string(),
        ];
        for (p, r) in rec.positions.iter().zip(&rec.references) {
            row.extend([num(p.x), num(p.y), num(r.x), num(r.y)]);
        }
        match &rec.matrix {
            Some(h) => row.extend(h.as_slice().iter().map(|v| num(*v))),
            None => row.extend(std::iter::repeat_n(String::new(), n * n)),
        }
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

/// Sampled flow positions keyed by `(k, agent, sample)`.
pub fn write_samples_csv<W: Write>(trace: &SimTrace, w: W) -> csv::Result<()> {
    let mut out = writer(w);
    out.write_record(["k", "agent", "sample", "t", "x", "y"])?;
    for iv in &trace.intervals {
        for (i, a) in iv.agents.iter().enumerate() {
            for (j, s) in a.samples.iter().enumerate() {
                out.write_record([
                    iv.k.to_string(),
                    i.to_string(),
                    (j + 1).to_string(),
                    num(iv.start + s.elapsed),
                    num(s.position.x),
                    num(s.position.y),
                ])?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LedgerSummary {
    pub updates: usize,
    pub ota_count: u64,
    pub n2n_count: u64,
    pub n2n_formula: &'static str,
}

/// Everything derived from one trace, written as `report.toml`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReportBundle {
    pub verdict: String,
    /// `MSE(t_end) / MSE(t_0)`.
    pub mse_ratio: f64,
    pub ledger: LedgerSummary,
    pub mixing: Option<MixingCertificate>,
    pub theorems: TheoremReport,
    pub metrics: MetricsSeries,
    pub scenario: ScenarioConfig,
}

impl ReportBundle {
    pub fn new(config: &ScenarioConfig, trace: &SimTrace) -> Self {
        let series = metrics(trace);
        let (first, last) = (series.mse[0], *series.mse.last().expect("at least one instant"));
        Self {
            verdict: verdict(trace).to_string(),
            mse_ratio: if first > 0.0 { last / first } else { 0.0 },
            ledger: LedgerSummary {
                updates: trace.updates(),
                ota_count: trace.ledger.ota_count,
                n2n_count: trace.ledger.n2n_count,
                n2n_formula: N2N_FORMULA,
            },
            mixing: trace.mixing,
            theorems: theorem_report(trace),
            metrics: series,
            scenario: config.clone(),
        }
    }

    pub fn verdict(&self) -> Verdict {
        match self.verdict.as_str() {
            "converged" => Verdict::Converged,
            "diverged" => Verdict::Diverged,
            _ => Verdict::Undecided,
        }
    }
}

/// Writes trace, samples and report into `dir`, creating it if needed.
pub fn write_run(dir: &Path, config: &ScenarioConfig, trace: &SimTrace) -> std::io::Result<ReportBundle> {
    fs::create_dir_all(dir)?;
    let report = ReportBundle::new(config, trace);

    let mut buf = Vec::new();
    write_trace_csv(trace, &mut buf).map_err(std::io::Error::other)?;
    fs::write(dir.join(TRACE_FILE), buf)?;

    let mut buf = Vec::new();
    write_samples_csv(trace, &mut buf).map_err(std::io::Error::other)?;
    fs::write(dir.join(SAMPLES_FILE), buf)?;

    let text = toml::to_string(&report).map_err(std::io::Error::other)?;
    fs::write(dir.join(REPORT_FILE), text)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::paper_configs;
    use otaform_core::sim::run_scenario;

    fn short_run() -> (ScenarioConfig, SimTrace) {
        let mut config = paper_configs()[0].clone();
        config.horizon = 1.0;
        let trace = run_scenario(&config).unwrap();
        (config, trace)
    }

    #[test]
    fn trace_csv_layout() {
        let (_, trace) = short_run();
        let mut buf = Vec::new();
        write_trace_csv(&trace, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(!text.contains('\r'));
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), 1 + trace.instants.len());
        let header: Vec<&str> = lines[0].split(',').collect();
        assert_eq!(&header[..6], ["k", "t", "mse", "delta", "ota_count", "n2n_count"]);
        assert_eq!(header[6], "p0_x");
        assert_eq!(header.len(), 6 + 4 * 6 + 36);
        assert_eq!(*header.last().unwrap(), "h5_5");
        let last: Vec<&str> = lines.last().unwrap().split(',').collect();
        assert!(last[last.len() - 36..].iter().all(|c| c.is_empty()));
        let t: f64 = last[1].parse().unwrap();
        assert_eq!(t, 1.0);
        let first: Vec<&str> = lines[1].split(',').collect();
        let row_sum: f64 = first[30..36].iter().map(|c| c.parse::<f64>().unwrap()).sum();
        assert!((row_sum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn samples_csv_counts() {
        let (config, trace) = short_run();
        let mut buf = Vec::new();
        write_samples_csv(&trace, &mut buf).unwrap();
        let rows = String::from_utf8(buf).unwrap().lines().count();
        assert_eq!(rows, 1 + trace.updates() * 6 * config.samples_per_interval);
    }

    #[test]
    fn report_round_trips_through_toml() {
        let (config, trace) = short_run();
        let report = ReportBundle::new(&config, &trace);
        let text = toml::to_string(&report).unwrap();
        let back: toml::Table = toml::from_str(&text).unwrap();
        assert_eq!(back["verdict"].as_str(), Some(report.verdict.as_str()));
        assert_eq!(back["ledger"]["ota_count"].as_integer(), Some(30));
        let echoed: ScenarioConfig = back["scenario"].clone().try_into().unwrap();
        assert_eq!(echoed, config);
    }
}
