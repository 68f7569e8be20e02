//! Parameter sweeps over the toy inverse problem and the mixture comparison.

use std::path::PathBuf;
use std::sync::Arc;

use serde::Serialize;

use crate::diagnostics::{ess, move_rate, rhat, Estimand, ScalarSeries};
use crate::error::{Error, Result};
use crate::kernel::{drive, ChainRun, MultiproposalSampler, RunOptions};
use crate::mpcn::{Mpcn, PotentialTarget};
use crate::parallel::Executor;
use crate::rw::{RwMulti, RwProposalDensity};
use crate::targets::{LogDensity, MixtureTarget};

use super::config::{TargetConfig, ToyInverseParams};
use super::{build_target, median_iteration_time, write_text};

pub const PRESETS: [&str; 3] = ["toy-sweep", "mixture-budget", "trend"];

pub const SWEEP_RHOS: [f64; 9] = [0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.99];
pub const SWEEP_PS: [usize; 4] = [10, 25, 50, 100];
pub const TREND_PS: [usize; 4] = [1, 8, 16, 64];
pub const TREND_RHO: f64 = 0.6;

#[derive(Debug, Clone, Default)]
pub struct PresetOptions {
    pub seed: u64,
    /// Overrides the preset's iteration count.
    pub iters: Option<usize>,
    pub out_dir: Option<PathBuf>,
}

/// The toy-problem posterior in pCN form.
pub fn toy_target() -> Result<PotentialTarget> {
    let built = build_target(&TargetConfig::ToyInverse(ToyInverseParams::default()))?;
    Ok(built
        .potential
        .expect("the toy problem has a Gaussian prior"))
}

fn run_single<S: MultiproposalSampler + ?Sized>(
    sampler: &S,
    init: &[f64],
    n_iters: usize,
    seed: u64,
    chain: u64,
    exec: &Executor,
) -> Result<ChainRun> {
    drive(
        sampler,
        init,
        n_iters,
        None,
        seed,
        exec,
        RunOptions {
            chain,
            record_log_masses: false,
        },
    )
}

/// Move rate and `‖q‖²` efficiency of one chain.
#[derive(Debug, Clone, Serialize)]
pub struct CellStats {
    pub rho: f64,
    pub p: usize,
    pub seed: u64,
    pub move_rate: f64,
    pub ess: Option<f64>,
    pub samples_per_effective_sample: Option<f64>,
    pub median_iteration_seconds: f64,
}

/// Runs single-selection mpCN on the toy problem from the prior mean.
pub fn toy_cell(
    rho: f64,
    p: usize,
    n_iters: usize,
    seed: u64,
    exec: &Executor,
) -> Result<CellStats> {
    let target = toy_target()?;
    let dim = target.basis.dim();
    let sampler = Mpcn::new(target, rho, p)?;
    let run = run_single(&sampler, &vec![0.0; dim], n_iters, seed, 0, exec)?;
    let series = ScalarSeries::from_record(&run.record, Estimand::Norm2)?;
    let ess = match ess(&series[1..]) {
        Ok(e) => Some(e),
        Err(Error::ZeroVariance) => None,
        Err(e) => return Err(e),
    };
    Ok(CellStats {
        rho,
        p,
        seed,
        move_rate: move_rate(&run.record)?,
        ess,
        samples_per_effective_sample: ess.map(|e| n_iters as f64 / e),
        median_iteration_seconds: median_iteration_time(&run.iteration_seconds),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ToySweepReport {
    pub n_iters: usize,
    pub cells: Vec<CellStats>,
}

/// The (ρ, p) grid on the toy problem.
pub fn toy_sweep(opts: &PresetOptions, exec: &Executor) -> Result<ToySweepReport> {
    let n_iters = opts.iters.unwrap_or(20_000);
    let mut cells = Vec::with_capacity(SWEEP_RHOS.len() * SWEEP_PS.len());
    for &p in &SWEEP_PS {
        for &rho in &SWEEP_RHOS {
            cells.push(toy_cell(rho, p, n_iters, opts.seed, exec)?);
        }
    }
    Ok(ToySweepReport { n_iters, cells })
}

#[derive(Debug, Clone, Serialize)]
pub struct TrendReport {
    pub n_iters: usize,
    pub rho: f64,
    /// Move rates at `rho` for every `(p, seed)`.
    pub move_rates: Vec<CellStats>,
    pub mean_move_rate: Vec<(usize, f64)>,
    /// Best samples-per-effective-sample over the ρ grid, per `p`.
    pub tuned: Vec<CellStats>,
}

/// Move rate versus `p` at fixed ρ, and efficiency at the best ρ per `p`.
pub fn trend(opts: &PresetOptions, exec: &Executor) -> Result<TrendReport> {
    let n_iters = opts.iters.unwrap_or(10_000);
    let mut move_rates = Vec::new();
    let mut mean_move_rate = Vec::new();
    for &p in &TREND_PS {
        let mut total = 0.0;
        for s in 0..3 {
            let cell = toy_cell(TREND_RHO, p, n_iters, opts.seed + s, exec)?;
            total += cell.move_rate;
            move_rates.push(cell);
        }
        mean_move_rate.push((p, total / 3.0));
    }
    let mut tuned = Vec::new();
    for &p in &TREND_PS {
        let mut best: Option<CellStats> = None;
        for &rho in &SWEEP_RHOS {
            let cell = toy_cell(rho, p, n_iters, opts.seed, exec)?;
            let better = match (&best, cell.samples_per_effective_sample) {
                (_, None) => false,
                (None, Some(_)) => true,
                (Some(b), Some(s)) => b.samples_per_effective_sample.is_none_or(|bs| s < bs),
            };
            if better {
                best = Some(cell);
            }
        }
        tuned.push(best.ok_or(Error::ZeroVariance)?);
    }
    Ok(TrendReport {
        n_iters,
        rho: TREND_RHO,
        move_rates,
        mean_move_rate,
        tuned,
    })
}

pub const MIXTURE_K: usize = 10;
pub const MIXTURE_SPACING: f64 = 10.0;
/// Proposal scale of the multiproposal chain, matched to the mode spacing.
pub const MIXTURE_SCALE: f64 = 10.0;
/// Proposal scale of the single-proposal chains: a few mode widths, so each
/// chain drifts through the grid on its own schedule.
pub const MIXTURE_SINGLE_SCALE: f64 = 4.0;
pub const MIXTURE_P: usize = 1000;
pub const MIXTURE_SINGLE_CHAINS: usize = 10;

#[derive(Debug, Clone, Serialize)]
pub struct MixtureBudgetReport {
    pub n_iters: usize,
    pub p: usize,
    pub proposal_scale: f64,
    pub single_proposal_scale: f64,
    pub multiproposal_mode_frequencies: Vec<f64>,
    pub multiproposal_modes_visited: usize,
    pub multiproposal_median_iteration_seconds: f64,
    /// Per-chain mode frequencies of the single-proposal chains.
    pub single_mode_frequencies: Vec<Vec<f64>>,
    /// Split-R̂ of coordinate 0 across the single-proposal chains.
    pub single_rhat_coord0: f64,
    pub single_median_iteration_seconds: f64,
}

fn frequencies(run: &ChainRun, mixture: &MixtureTarget) -> Vec<f64> {
    let mut counts = vec![0usize; mixture.num_components()];
    for s in &run.record.samples[1..] {
        counts[mixture.nearest_component(s)] += 1;
    }
    let n = run.record.num_iterations().max(1) as f64;
    counts.into_iter().map(|c| c as f64 / n).collect()
}

/// One large-`p` chain against independent single-proposal chains with the
/// same iteration count, all started in mode 0.
pub fn mixture_budget(opts: &PresetOptions, exec: &Executor) -> Result<MixtureBudgetReport> {
    let n_iters = opts.iters.unwrap_or(10_000);
    let mixture = Arc::new(MixtureTarget::grid(MIXTURE_K, 2, MIXTURE_SPACING)?);
    let density: Arc<dyn LogDensity> = mixture.clone();
    let r = RwProposalDensity::IsotropicGaussian {
        scale: MIXTURE_SCALE,
    };
    let init = mixture.centers[0].clone();

    let multi = RwMulti::barker(density.clone(), r.clone(), MIXTURE_P)?;
    let run = run_single(&multi, &init, n_iters, opts.seed, 0, exec)?;
    let freqs = frequencies(&run, &mixture);

    let r_single = RwProposalDensity::IsotropicGaussian {
        scale: MIXTURE_SINGLE_SCALE,
    };
    let single = RwMulti::barker(density, r_single, 1)?;
    let mut single_freqs = Vec::new();
    let mut coord0 = Vec::new();
    let mut times = Vec::new();
    for c in 0..MIXTURE_SINGLE_CHAINS {
        let run = run_single(&single, &init, n_iters, opts.seed, 1 + c as u64, exec)?;
        single_freqs.push(frequencies(&run, &mixture));
        coord0.push(run.record.coordinate(0)[1..].to_vec());
        times.push(median_iteration_time(&run.iteration_seconds));
    }
    Ok(MixtureBudgetReport {
        n_iters,
        p: MIXTURE_P,
        proposal_scale: MIXTURE_SCALE,
        single_proposal_scale: MIXTURE_SINGLE_SCALE,
        multiproposal_modes_visited: freqs.iter().filter(|f| **f > 0.0).count(),
        multiproposal_mode_frequencies: freqs,
        multiproposal_median_iteration_seconds: median_iteration_time(&run.iteration_seconds),
        single_mode_frequencies: single_freqs,
        single_rhat_coord0: rhat(&coord0)?,
        single_median_iteration_seconds: times.iter().sum::<f64>() / times.len() as f64,
    })
}

fn write_sweep_table(path: &std::path::Path, cells: &[CellStats]) -> Result<()> {
    let mut text = String::from(
        "rho,p,seed,move_rate,ess,samples_per_effective_sample,median_iteration_seconds\n",
    );
    for c in cells {
        let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
        text.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            c.rho,
            c.p,
            c.seed,
            c.move_rate,
            opt(c.ess),
            opt(c.samples_per_effective_sample),
            c.median_iteration_seconds
        ));
    }
    write_text(path, &text)
}

/// Runs a preset by name and returns its JSON report. With `out_dir` set the
/// report is also written there as `<name>.json`.
pub fn run_preset(name: &str, opts: &PresetOptions, exec: &Executor) -> Result<String> {
    if let Some(dir) = &opts.out_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::Io(format!("{}: {e}", dir.display())))?;
    }
    let json = match name {
        "toy-sweep" => {
            let report = toy_sweep(opts, exec)?;
            if let Some(dir) = &opts.out_dir {
                write_sweep_table(&dir.join("toy-sweep.csv"), &report.cells)?;
            }
            serde_json::to_string_pretty(&report)
        }
        "trend" => {
            let report = trend(opts, exec)?;
            if let Some(dir) = &opts.out_dir {
                write_sweep_table(&dir.join("trend.csv"), &report.move_rates)?;
            }
            serde_json::to_string_pretty(&report)
        }
        "mixture-budget" => serde_json::to_string_pretty(&mixture_budget(opts, exec)?),
        other => {
            return Err(Error::Config(format!(
                "unknown preset `{other}`; available: {}",
                PRESETS.join(", ")
            )))
        }
    }
    .expect("reports serialize to JSON");
    if let Some(dir) = &opts.out_dir {
        write_text(&dir.join(format!("{name}.json")), &json)?;
    }
    Ok(json)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sweep_covers_the_grid() {
        let opts = PresetOptions {
            iters: Some(30),
            ..Default::default()
        };
        let r = toy_sweep(&opts, &Executor::serial()).unwrap();
        assert_eq!(r.cells.len(), 36);
        assert!(r.cells.iter().all(|c| (0.0..=1.0).contains(&c.move_rate)));
    }

    #[test]
    fn unknown_preset() {
        let err = run_preset("nope", &PresetOptions::default(), &Executor::serial()).unwrap_err();
        assert!(err.is_config_error());
    }

    #[test]
    fn preset_writes_files() {
        let dir = tempfile::tempdir().unwrap();
        let opts = PresetOptions {
            iters: Some(20),
            out_dir: Some(dir.path().to_path_buf()),
            ..Default::default()
        };
        let json = run_preset("toy-sweep", &opts, &Executor::serial()).unwrap();
        assert!(json.contains("\"cells\""));
        assert!(dir.path().join("toy-sweep.json").exists());
        let table = std::fs::read_to_string(dir.path().join("toy-sweep.csv")).unwrap();
        assert_eq!(table.lines().count(), 37);
    }
}
