//! Configuration-driven experiment runner.

pub mod config;
pub mod io;
pub mod presets;
pub mod registry;

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use crate::diagnostics::{
    rhat, summarize, DiagnosticsSummary, Estimand, ScalarSeries, DEFAULT_LAGS,
};
use crate::error::{Error, Result};
use crate::kernel::{drive, ChainRecord, RunOptions};
use crate::parallel::Executor;

pub use config::{parse_config, ExperimentConfig};
pub use registry::{build_sampler, build_target, BuiltTarget};

/// Per-cloud timings ignore this many leading iterations.
pub const WARMUP_ITERATIONS: usize = 10;

#[derive(Debug, Clone, Serialize)]
pub struct ChainReport {
    pub chain: usize,
    pub summary: DiagnosticsSummary,
    pub median_iteration_seconds: f64,
    pub total_seconds: f64,
    /// Visit frequency of each mixture component, by nearest center.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mode_frequencies: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub chain_file: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub sampler: String,
    pub target: String,
    pub dim: usize,
    pub p: usize,
    pub n_jumps: Option<usize>,
    pub workers: usize,
    pub chains: Vec<ChainReport>,
    /// Split-R̂ of `‖q‖²` across chains, when there are at least two.
    pub rhat_norm2: Option<f64>,
    pub median_iteration_seconds: f64,
    pub total_seconds: f64,
    pub config: ExperimentConfig,
}

impl RunReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize to JSON")
    }
}

fn after_warmup(seconds: &[f64]) -> &[f64] {
    if seconds.len() > WARMUP_ITERATIONS {
        &seconds[WARMUP_ITERATIONS..]
    } else {
        seconds
    }
}

/// Median of per-cloud wall times after the warmup iterations.
pub fn median_iteration_time(seconds: &[f64]) -> f64 {
    median_of(&mut after_warmup(seconds).to_vec())
}

/// Fraction of recorded states (initial state excluded) nearest each center.
pub fn mode_frequencies(record: &ChainRecord, target: &BuiltTarget) -> Option<Vec<f64>> {
    let mixture = target.mixture.as_ref()?;
    let mut counts = vec![0usize; mixture.num_components()];
    for s in &record.samples[1..] {
        counts[mixture.nearest_component(s)] += 1;
    }
    let n = record.num_iterations().max(1) as f64;
    Some(counts.into_iter().map(|c| c as f64 / n).collect())
}

fn with_chain(chain: usize) -> impl Fn(Error) -> Error {
    move |e| Error::InChain {
        chain,
        source: Box::new(e),
    }
}

/// Runs every chain of `cfg`, writes chain files and `report.json` when
/// `out_dir` is set, and returns the report together with the records.
pub fn run_experiment(
    cfg: &ExperimentConfig,
    exec: &Executor,
) -> Result<(RunReport, Vec<ChainRecord>)> {
    cfg.validate()?;
    let target = build_target(&cfg.target)?;
    let sampler = build_sampler(&cfg.sampler, &target)?;
    let init = cfg
        .run
        .init
        .clone()
        .unwrap_or_else(|| target.default_init());
    if init.len() != target.dim() {
        return Err(Error::Dimension {
            expected: target.dim(),
            got: init.len(),
        });
    }
    let out_dir = cfg.run.out_dir.as_ref().map(PathBuf::from);
    if let Some(dir) = &out_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    }

    let started = Instant::now();
    let mut reports = Vec::with_capacity(cfg.run.n_chains);
    let mut records = Vec::with_capacity(cfg.run.n_chains);
    let mut all_times = Vec::new();
    for chain in 0..cfg.run.n_chains {
        let opts = RunOptions {
            chain: chain as u64,
            record_log_masses: false,
        };
        let chain_started = Instant::now();
        let run = drive(
            sampler.as_ref(),
            &init,
            cfg.run.n_iters,
            cfg.sampler.n_jumps(),
            cfg.run.seed,
            exec,
            opts,
        )
        .map_err(with_chain(chain))?;
        let total_seconds = chain_started.elapsed().as_secs_f64();
        let summary =
            summarize(&run.record, Estimand::Norm2, &DEFAULT_LAGS).map_err(with_chain(chain))?;
        let chain_file = match &out_dir {
            Some(dir) => {
                let path = dir.join(format!("chain_{chain}.csv"));
                io::write_chain_file(&path, &run.record, cfg.run.thin)?;
                Some(path.display().to_string())
            }
            None => None,
        };
        all_times.extend_from_slice(after_warmup(&run.iteration_seconds));
        reports.push(ChainReport {
            chain,
            summary,
            median_iteration_seconds: median_iteration_time(&run.iteration_seconds),
            total_seconds,
            mode_frequencies: mode_frequencies(&run.record, &target),
            chain_file,
        });
        records.push(run.record);
    }

    let rhat_norm2 = if records.len() >= 2 {
        let series: Vec<Vec<f64>> = records
            .iter()
            .map(|r| Ok(ScalarSeries::from_record(r, Estimand::Norm2)?.0[1..].to_vec()))
            .collect::<Result<_>>()?;
        rhat(&series).ok()
    } else {
        None
    };

    let report = RunReport {
        sampler: cfg.sampler.id().into(),
        target: cfg.target.id().into(),
        dim: target.dim(),
        p: cfg.sampler.p(),
        n_jumps: cfg.sampler.n_jumps(),
        workers: exec.workers(),
        chains: reports,
        rhat_norm2,
        median_iteration_seconds: median_of(&mut all_times),
        total_seconds: started.elapsed().as_secs_f64(),
        config: cfg.clone(),
    };
    if let Some(dir) = &out_dir {
        write_text(&dir.join("report.json"), &report.to_json())?;
    }
    Ok((report, records))
}

fn median_of(v: &mut [f64]) -> f64 {
    if v.is_empty() {
        return 0.0;
    }
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len().is_multiple_of(2) {
        0.5 * (v[mid - 1] + v[mid])
    } else {
        v[mid]
    }
}

pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(text: &str) -> ExperimentConfig {
        parse_config(text).unwrap()
    }

    const BASE: &str = r#"
[sampler]
id = "rw-multi"
p = 4
scale = 0.8

[target]
id = "gaussian"
dim = 3

[run]
n_iters = 200
n_chains = 2
seed = 5
"#;

    #[test]
    fn report_shape() {
        let (report, records) = run_experiment(&cfg(BASE), &Executor::serial()).unwrap();
        assert_eq!(records.len(), 2);
        assert_eq!(records[0].samples.len(), 201);
        assert_eq!(report.chains.len(), 2);
        assert!(report.rhat_norm2.is_some());
        assert!(report.total_seconds >= 0.0);
        assert!(report
            .chains
            .iter()
            .all(|c| c.median_iteration_seconds >= 0.0));
        assert_ne!(records[0], records[1]);
        let json: serde_json::Value = serde_json::from_str(&report.to_json()).unwrap();
        assert_eq!(json["config"]["sampler"]["id"], "rw-multi");
    }

    #[test]
    fn single_iteration_writes_two_rows() {
        let dir = tempfile::tempdir().unwrap();
        let text = BASE.replace("n_iters = 200", "n_iters = 1").replace(
            "seed = 5",
            &format!("seed = 5\nout_dir = {:?}", dir.path().display().to_string()),
        );
        run_experiment(&cfg(&text), &Executor::serial()).unwrap();
        let csv = std::fs::read_to_string(dir.path().join("chain_0.csv")).unwrap();
        assert_eq!(csv.lines().count(), 3); // header, init, one step
        assert!(dir.path().join("report.json").exists());
    }

    #[test]
    fn resampling_records_every_jump() {
        let text = r#"
[sampler]
id = "mpcn-resample"
p = 6
rho = 0.5
n_jumps = 3

[target]
id = "quartic"
dim = 3

[run]
n_iters = 50
"#;
        let (report, records) = run_experiment(&cfg(text), &Executor::serial()).unwrap();
        assert_eq!(records[0].num_iterations(), 150);
        assert_eq!(report.n_jumps, Some(3));
    }

    #[test]
    fn median_ignores_warmup() {
        let mut t = vec![100.0; WARMUP_ITERATIONS];
        t.extend([1.0, 2.0, 3.0]);
        assert_eq!(median_iteration_time(&t), 2.0);
        assert_eq!(median_iteration_time(&[4.0, 2.0]), 3.0);
    }
}
