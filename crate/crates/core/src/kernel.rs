//! Generic multiproposal machinery: acceptance vectors, categorical selection
//! and the two chain drivers (single selection per cloud, and repeated index
//! jumps within one cloud).

use std::time::Instant;

use rand::Rng;

use crate::error::{Error, Result};
use crate::parallel::Executor;
use crate::rng::{ChainKey, IterationStreams};

pub type State = Vec<f64>;

/// The current state together with `p` proposals and the `p + 1` log selection masses.
///
/// Slot 0 is the current state for flip-type samplers. Trajectory-based
/// samplers may place the occupied point elsewhere; see [`ResamplingState`].
#[derive(Debug, Clone, PartialEq)]
pub struct ProposalCloud {
    pub current: State,
    pub proposals: Vec<State>,
    pub log_masses: Vec<f64>,
}

impl ProposalCloud {
    pub fn new(current: State, proposals: Vec<State>, log_masses: Vec<f64>) -> Result<Self> {
        if proposals.is_empty() {
            return Err(Error::Config(
                "a proposal cloud needs at least one proposal".into(),
            ));
        }
        if log_masses.len() != proposals.len() + 1 {
            return Err(Error::ShapeMismatch(format!(
                "{} proposals need {} log-masses, got {}",
                proposals.len(),
                proposals.len() + 1,
                log_masses.len()
            )));
        }
        let dim = current.len();
        if let Some(bad) = proposals.iter().find(|q| q.len() != dim) {
            return Err(Error::Dimension {
                expected: dim,
                got: bad.len(),
            });
        }
        Ok(ProposalCloud {
            current,
            proposals,
            log_masses,
        })
    }

    pub fn num_proposals(&self) -> usize {
        self.proposals.len()
    }

    pub fn num_slots(&self) -> usize {
        self.proposals.len() + 1
    }

    pub fn slot(&self, j: usize) -> &[f64] {
        if j == 0 {
            &self.current
        } else {
            &self.proposals[j - 1]
        }
    }
}

/// Selection probabilities over the `p + 1` slots of a cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct AcceptanceVector(Vec<f64>);

impl AcceptanceVector {
    /// Validates nonnegativity and unit sum (within 1e-12 relative to length).
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::EmptyChain);
        }
        if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::Config(format!("invalid probabilities {probs:?}")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > 1e-12 * probs.len() as f64 {
            return Err(Error::Config(format!("probabilities sum to {total}")));
        }
        Ok(AcceptanceVector(probs))
    }

    /// Point mass on slot `k`.
    pub fn indicator(len: usize, k: usize) -> Self {
        let mut probs = vec![0.0; len];
        probs[k] = 1.0;
        AcceptanceVector(probs)
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

fn sanitize(lm: f64) -> f64 {
    if lm.is_nan() {
        f64::NEG_INFINITY
    } else {
        lm
    }
}

/// Barker-type selection: `probs[j] ∝ exp(log_masses[j])`, normalized in log space.
///
/// NaN masses count as zero mass.
pub fn barker_weights(log_masses: &[f64]) -> Result<AcceptanceVector> {
    if log_masses.is_empty() {
        return Err(Error::EmptyChain);
    }
    let lm: Vec<f64> = log_masses.iter().copied().map(sanitize).collect();
    let max = lm.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return Err(Error::AllMassesZero);
    }
    if max == f64::INFINITY {
        let n_inf = lm.iter().filter(|x| **x == f64::INFINITY).count() as f64;
        let probs = lm
            .iter()
            .map(|x| {
                if *x == f64::INFINITY {
                    1.0 / n_inf
                } else {
                    0.0
                }
            })
            .collect();
        return Ok(AcceptanceVector(probs));
    }
    let unnorm: Vec<f64> = lm.iter().map(|x| (x - max).exp()).collect();
    let total: f64 = unnorm.iter().sum();
    Ok(AcceptanceVector(
        unnorm.into_iter().map(|w| w / total).collect(),
    ))
}

/// Metropolis–Hastings "wedge" selection relative to the occupied slot `k_cur`.
///
/// `bar_alpha` holds one weight per non-occupied slot, listed in increasing
/// slot order. The occupied slot absorbs the remaining probability.
pub fn mh_wedge_weights(
    log_masses: &[f64],
    k_cur: usize,
    bar_alpha: &[f64],
) -> Result<AcceptanceVector> {
    let n = log_masses.len();
    if k_cur >= n {
        return Err(Error::Config(format!(
            "slot {k_cur} out of range for {n} slots"
        )));
    }
    if bar_alpha.len() + 1 != n {
        return Err(Error::ShapeMismatch(format!(
            "{} slots need {} weights, got {}",
            n,
            n - 1,
            bar_alpha.len()
        )));
    }
    if bar_alpha.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
        return Err(Error::Config(format!(
            "weights must be nonnegative, got {bar_alpha:?}"
        )));
    }
    let budget: f64 = bar_alpha.iter().sum();
    if budget > 1.0 + 1e-12 {
        return Err(Error::WeightBudgetExceeded { sum: budget });
    }
    let base = sanitize(log_masses[k_cur]);
    let mut probs = vec![0.0; n];
    let mut others = bar_alpha.iter();
    let mut moved = 0.0;
    for (j, lm) in log_masses.iter().enumerate() {
        if j == k_cur {
            continue;
        }
        let weight = *others.next().expect("length checked above");
        let lm = sanitize(*lm);
        let ratio = if lm == f64::NEG_INFINITY {
            0.0
        } else if base == f64::NEG_INFINITY {
            1.0
        } else {
            (lm - base).exp().min(1.0)
        };
        probs[j] = weight * ratio;
        moved += probs[j];
    }
    probs[k_cur] = (1.0 - moved).max(0.0);
    Ok(AcceptanceVector(probs))
}

/// Inverse-CDF draw: the smallest slot whose cumulative probability exceeds `u`.
pub fn categorical_draw(probs: &AcceptanceVector, u: f64) -> usize {
    let mut cumulative = 0.0;
    let mut last_positive = 0;
    for (j, p) in probs.probs().iter().enumerate() {
        if *p > 0.0 {
            last_positive = j;
        }
        cumulative += p;
        if cumulative > u {
            return j;
        }
    }
    // rounding left the total just below u
    last_positive
}

/// Selection rule for a cloud.
#[derive(Debug, Clone, PartialEq)]
pub enum WeightMode {
    Barker,
    /// MH wedge with one weight per non-occupied slot.
    MhWedge {
        bar_alpha: Vec<f64>,
    },
}

impl WeightMode {
    /// The default wedge weights `1/p` for every proposal.
    pub fn uniform_wedge(p: usize) -> Self {
        WeightMode::MhWedge {
            bar_alpha: vec![1.0 / p as f64; p],
        }
    }

    pub fn validate(&self, p: usize) -> Result<()> {
        if let WeightMode::MhWedge { bar_alpha } = self {
            if bar_alpha.len() != p {
                return Err(Error::Config(format!(
                    "bar_alpha needs {p} entries, got {}",
                    bar_alpha.len()
                )));
            }
            if bar_alpha.iter().any(|a| !(a.is_finite() && *a >= 0.0)) {
                return Err(Error::Config(
                    "bar_alpha entries must be nonnegative".into(),
                ));
            }
            let sum: f64 = bar_alpha.iter().sum();
            if sum > 1.0 + 1e-12 {
                return Err(Error::WeightBudgetExceeded { sum });
            }
        }
        Ok(())
    }

    pub fn weights(&self, log_masses: &[f64], k_cur: usize) -> Result<AcceptanceVector> {
        match self {
            WeightMode::Barker => barker_weights(log_masses),
            WeightMode::MhWedge { bar_alpha } => mh_wedge_weights(log_masses, k_cur, bar_alpha),
        }
    }

    pub fn is_barker(&self) -> bool {
        matches!(self, WeightMode::Barker)
    }
}

/// A generated cloud plus the slot currently occupied by the chain.
#[derive(Debug, Clone, PartialEq)]
pub struct ResamplingState {
    pub cloud: ProposalCloud,
    pub k_cur: usize,
}

/// Contract between a sampler and the chain drivers.
///
/// `build_cloud` must draw all of its randomness from `streams` so that the
/// result does not depend on the executor. Target evaluations inside it may
/// run concurrently on `exec`.
pub trait MultiproposalSampler: Send + Sync {
    fn dim(&self) -> usize;

    fn num_proposals(&self) -> usize;

    /// Generates a cloud around `current`. `occupied` is the slot the chain
    /// occupied in the previous cloud; samplers whose weights do not depend
    /// on the occupied slot ignore it and place `current` in slot 0.
    fn build_cloud(
        &self,
        current: &[f64],
        occupied: usize,
        streams: &IterationStreams,
        exec: &Executor,
    ) -> Result<ResamplingState>;

    fn acceptance(&self, cloud: &ProposalCloud, k_cur: usize) -> Result<AcceptanceVector>;
}

impl<S: MultiproposalSampler + ?Sized> MultiproposalSampler for Box<S> {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn num_proposals(&self) -> usize {
        (**self).num_proposals()
    }
    fn build_cloud(
        &self,
        current: &[f64],
        occupied: usize,
        streams: &IterationStreams,
        exec: &Executor,
    ) -> Result<ResamplingState> {
        (**self).build_cloud(current, occupied, streams, exec)
    }
    fn acceptance(&self, cloud: &ProposalCloud, k_cur: usize) -> Result<AcceptanceVector> {
        (**self).acceptance(cloud, k_cur)
    }
}

/// Recorded output of a chain. `samples[0]` is the initial state.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ChainRecord {
    pub samples: Vec<State>,
    pub selected_indices: Vec<usize>,
    pub moved_flags: Vec<bool>,
    pub extras: Option<Vec<Vec<f64>>>,
}

impl ChainRecord {
    pub fn with_init(init: State) -> Self {
        ChainRecord {
            samples: vec![init],
            ..Default::default()
        }
    }

    pub fn num_iterations(&self) -> usize {
        self.selected_indices.len()
    }

    pub fn dim(&self) -> usize {
        self.samples.first().map_or(0, Vec::len)
    }

    pub fn push(&mut self, state: State, selected: usize, moved: bool) {
        self.samples.push(state);
        self.selected_indices.push(selected);
        self.moved_flags.push(moved);
    }

    /// Scalar series of coordinate `k` over all recorded samples.
    pub fn coordinate(&self, k: usize) -> Vec<f64> {
        self.samples.iter().map(|s| s[k]).collect()
    }

    /// Keeps the initial state and every `step`-th recorded state after it.
    pub fn thinned(&self, step: usize) -> ChainRecord {
        let step = step.max(1);
        let mut out = ChainRecord::with_init(self.samples[0].clone());
        for i in (step - 1..self.num_iterations()).step_by(step) {
            out.push(
                self.samples[i + 1].clone(),
                self.selected_indices[i],
                self.moved_flags[i],
            );
        }
        out
    }
}

/// Performs `n` index jumps within one cloud, starting from the occupied slot.
///
/// A cloud with no mass anywhere keeps the chain at the occupied slot.
pub fn jump_indices<S, R>(
    sampler: &S,
    state: &ResamplingState,
    n: usize,
    rng: &mut R,
) -> Result<Vec<usize>>
where
    S: MultiproposalSampler + ?Sized,
    R: Rng + ?Sized,
{
    let mut k = state.k_cur;
    let mut path = Vec::with_capacity(n);
    for _ in 0..n {
        let probs = match sampler.acceptance(&state.cloud, k) {
            Ok(p) => p,
            Err(Error::AllMassesZero) => AcceptanceVector::indicator(state.cloud.num_slots(), k),
            Err(e) => return Err(e),
        };
        k = categorical_draw(&probs, rng.random());
        path.push(k);
    }
    Ok(path)
}

/// Options shared by both chain drivers.
#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    /// Index of this chain within a multi-chain run; selects the RNG key.
    pub chain: u64,
    /// Store the cloud's log-masses alongside every recorded state.
    pub record_log_masses: bool,
}

/// A driven chain with per-cloud wall times in seconds.
#[derive(Debug, Clone)]
pub struct ChainRun {
    pub record: ChainRecord,
    pub iteration_seconds: Vec<f64>,
}

/// Single selection per cloud: at every iteration the chain occupies slot 0
/// of a freshly generated cloud.
pub fn run_chain<S: MultiproposalSampler + ?Sized>(
    sampler: &S,
    init: &[f64],
    n_iters: usize,
    seed: u64,
    exec: &Executor,
) -> Result<ChainRecord> {
    drive(
        sampler,
        init,
        n_iters,
        None,
        seed,
        exec,
        RunOptions::default(),
    )
    .map(|r| r.record)
}

/// Repeated index jumps: each cloud is generated around the occupied slot and
/// `n_jumps` categorical draws are recorded from it.
pub fn run_resampling_chain<S: MultiproposalSampler + ?Sized>(
    sampler: &S,
    init: &[f64],
    n_outer: usize,
    n_jumps: usize,
    seed: u64,
    exec: &Executor,
) -> Result<ChainRecord> {
    drive(
        sampler,
        init,
        n_outer,
        Some(n_jumps),
        seed,
        exec,
        RunOptions::default(),
    )
    .map(|r| r.record)
}

/// Shared driver. `n_jumps == None` runs the single-selection chain.
pub fn drive<S: MultiproposalSampler + ?Sized>(
    sampler: &S,
    init: &[f64],
    n_outer: usize,
    n_jumps: Option<usize>,
    seed: u64,
    exec: &Executor,
    opts: RunOptions,
) -> Result<ChainRun> {
    if init.len() != sampler.dim() {
        return Err(Error::Dimension {
            expected: sampler.dim(),
            got: init.len(),
        });
    }
    if init.iter().any(|x| !x.is_finite()) {
        return Err(Error::NonFiniteState { iteration: 0 });
    }
    let resampling = n_jumps.is_some();
    let jumps = n_jumps.unwrap_or(1);
    if jumps == 0 {
        return Err(Error::Config("n_jumps must be at least 1".into()));
    }

    let key = ChainKey::new(seed, opts.chain);
    let mut record = ChainRecord::with_init(init.to_vec());
    if opts.record_log_masses {
        record.extras = Some(Vec::with_capacity(n_outer * jumps));
    }
    record.samples.reserve(n_outer * jumps);
    let mut iteration_seconds = Vec::with_capacity(n_outer);
    let mut current = init.to_vec();
    let mut occupied = 0;

    for outer in 0..n_outer {
        let started = Instant::now();
        let streams = key.iteration(outer as u64);
        let hint = if resampling { occupied } else { 0 };
        let state = sampler.build_cloud(&current, hint, &streams, exec)?;
        let path = jump_indices(sampler, &state, jumps, &mut streams.selection())?;
        let ResamplingState { cloud, mut k_cur } = state;

        for next in path {
            let state = cloud.slot(next);
            if state.iter().any(|x| !x.is_finite()) {
                return Err(Error::NonFiniteState {
                    iteration: record.num_iterations() + 1,
                });
            }
            let moved = state != cloud.slot(k_cur);
            record.push(state.to_vec(), next, moved);
            if let Some(extras) = record.extras.as_mut() {
                extras.push(cloud.log_masses.clone());
            }
            k_cur = next;
        }

        current.clear();
        current.extend_from_slice(cloud.slot(k_cur));
        occupied = k_cur;
        iteration_seconds.push(started.elapsed().as_secs_f64());
    }

    Ok(ChainRun {
        record,
        iteration_seconds,
    })
}
