//! Conditionally independent multiproposal random walk on R^N, the naive
//! independent-proposal variant, and an exact discrete transition-matrix
//! oracle for detailed-balance checks.
//!
//! With an increment density `r`, proposals are built as
//! `q̄ = q₀ − ε̄` and `q_j = q̄ + ε_j` with `ε̄, ε_j ~ r` i.i.d., i.e.
//! `f̄(q, q̃) = r(q − q̃)` and `f(q, q̃) = r(q̃ − q)`. This pairing keeps the
//! Barker weights equal to `π(q_j) / Σ π(q_k)` even when `r` is asymmetric.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng;
use rand_distr::{Exp, StandardNormal};

use crate::error::{Error, Result};
use crate::kernel::{
    barker_weights, AcceptanceVector, MultiproposalSampler, ProposalCloud, ResamplingState, State,
    WeightMode,
};
use crate::parallel::Executor;
use crate::rng::IterationStreams;
use crate::targets::LogDensity;

/// Built-in increment densities `r` on R^N.
#[derive(Debug, Clone, PartialEq)]
pub enum RwProposalDensity {
    /// `N(0, σ² I)`.
    IsotropicGaussian { scale: f64 },
    /// `N(0, diag(σ_k²))`.
    DiagonalGaussian { scales: Vec<f64> },
    /// Uniform on `[-h, h]^N`.
    UniformBox { half_width: f64 },
    /// Product of `Exp(rate) − shift`; skewed, and centered when `shift = 1/rate`.
    ShiftedExponential { rate: f64, shift: f64 },
    /// Point mass at zero. Has no Lebesgue density.
    PointMass,
}

impl RwProposalDensity {
    pub fn validate(&self, dim: usize) -> Result<()> {
        let ok = match self {
            RwProposalDensity::IsotropicGaussian { scale } => *scale > 0.0,
            RwProposalDensity::DiagonalGaussian { scales } => {
                if scales.len() != dim {
                    return Err(Error::Dimension {
                        expected: dim,
                        got: scales.len(),
                    });
                }
                scales.iter().all(|s| *s > 0.0)
            }
            RwProposalDensity::UniformBox { half_width } => *half_width > 0.0,
            RwProposalDensity::ShiftedExponential { rate, shift } => {
                *rate > 0.0 && shift.is_finite()
            }
            RwProposalDensity::PointMass => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid proposal density {self:?}")))
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, dim: usize, rng: &mut R) -> State {
        match self {
            RwProposalDensity::IsotropicGaussian { scale } => (0..dim)
                .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
                .collect(),
            RwProposalDensity::DiagonalGaussian { scales } => scales
                .iter()
                .map(|s| s * rng.sample::<f64, _>(StandardNormal))
                .collect(),
            RwProposalDensity::UniformBox { half_width } => (0..dim)
                .map(|_| rng.random_range(-*half_width..*half_width))
                .collect(),
            RwProposalDensity::ShiftedExponential { rate, shift } => {
                let exp = Exp::new(*rate).expect("rate validated");
                (0..dim).map(|_| rng.sample(exp) - shift).collect()
            }
            RwProposalDensity::PointMass => vec![0.0; dim],
        }
    }

    /// `log r(ε)`, or `None` when `r` has no density.
    pub fn log_density(&self, eps: &[f64]) -> Option<f64> {
        match self {
            RwProposalDensity::IsotropicGaussian { scale } => Some(
                eps.iter()
                    .map(|e| -0.5 * (e / scale).powi(2) - scale.ln() - 0.5 * (2.0 * PI).ln())
                    .sum(),
            ),
            RwProposalDensity::DiagonalGaussian { scales } => Some(
                eps.iter()
                    .zip(scales)
                    .map(|(e, s)| -0.5 * (e / s).powi(2) - s.ln() - 0.5 * (2.0 * PI).ln())
                    .sum(),
            ),
            RwProposalDensity::UniformBox { half_width } => {
                Some(if eps.iter().all(|e| e.abs() <= *half_width) {
                    -(eps.len() as f64) * (2.0 * half_width).ln()
                } else {
                    f64::NEG_INFINITY
                })
            }
            RwProposalDensity::ShiftedExponential { rate, shift } => Some(
                eps.iter()
                    .map(|e| {
                        let t = e + shift;
                        if t >= 0.0 {
                            rate.ln() - rate * t
                        } else {
                            f64::NEG_INFINITY
                        }
                    })
                    .sum(),
            ),
            RwProposalDensity::PointMass => None,
        }
    }

    /// Per-coordinate mean and variance of the increment.
    pub fn moments(&self, dim: usize) -> (Vec<f64>, Vec<f64>) {
        match self {
            RwProposalDensity::IsotropicGaussian { scale } => {
                (vec![0.0; dim], vec![scale * scale; dim])
            }
            RwProposalDensity::DiagonalGaussian { scales } => {
                (vec![0.0; dim], scales.iter().map(|s| s * s).collect())
            }
            RwProposalDensity::UniformBox { half_width } => {
                (vec![0.0; dim], vec![half_width * half_width / 3.0; dim])
            }
            RwProposalDensity::ShiftedExponential { rate, shift } => (
                vec![1.0 / rate - shift; dim],
                vec![1.0 / (rate * rate); dim],
            ),
            RwProposalDensity::PointMass => (vec![0.0; dim], vec![0.0; dim]),
        }
    }
}

/// The flip `S_j` exchanging slot 0 and slot `j` of `(q₀, …, q_p)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FlipInvolution {
    pub j: usize,
}

impl FlipInvolution {
    pub fn apply<T>(&self, slots: &mut [T]) {
        slots.swap(0, self.j);
    }
}

/// How the proposal cloud is built and weighted.
#[derive(Debug, Clone, PartialEq)]
pub enum RwVariant {
    /// Proposals drawn around an intermediate point; weights use `π` only.
    ConditionallyIndependent(WeightMode),
    /// Proposals drawn directly around `q₀`; Barker weights carry the
    /// product of cross proposal densities and require `r` to have a density.
    NaiveIndependent,
}

/// Multiproposal random-walk sampler.
#[derive(Clone)]
pub struct RwMulti {
    target: Arc<dyn LogDensity>,
    proposal: RwProposalDensity,
    p: usize,
    variant: RwVariant,
}

impl RwMulti {
    pub fn new(
        target: Arc<dyn LogDensity>,
        proposal: RwProposalDensity,
        p: usize,
        variant: RwVariant,
    ) -> Result<Self> {
        if p == 0 {
            return Err(Error::Config("p must be at least 1".into()));
        }
        proposal.validate(target.dim())?;
        match &variant {
            RwVariant::ConditionallyIndependent(mode) => mode.validate(p)?,
            RwVariant::NaiveIndependent => {
                if proposal.log_density(&vec![0.0; target.dim()]).is_none() {
                    return Err(Error::MissingDensity);
                }
            }
        }
        Ok(RwMulti {
            target,
            proposal,
            p,
            variant,
        })
    }

    /// Barker selection over conditionally independent proposals.
    pub fn barker(
        target: Arc<dyn LogDensity>,
        proposal: RwProposalDensity,
        p: usize,
    ) -> Result<Self> {
        Self::new(
            target,
            proposal,
            p,
            RwVariant::ConditionallyIndependent(WeightMode::Barker),
        )
    }

    pub fn propose_cloud_rw(
        &self,
        q0: &[f64],
        streams: &IterationStreams,
        exec: &Executor,
    ) -> Result<ProposalCloud> {
        propose_cloud_rw(
            q0,
            self.p,
            &self.proposal,
            self.target.as_ref(),
            matches!(self.variant, RwVariant::NaiveIndependent),
            streams,
            exec,
        )
    }
}

impl std::fmt::Debug for RwMulti {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RwMulti")
            .field("proposal", &self.proposal)
            .field("p", &self.p)
            .field("variant", &self.variant)
            .finish_non_exhaustive()
    }
}

/// Builds a cloud around `q0`. The log-masses are `log π(q_j)`.
///
/// With `direct = true` the intermediate point is skipped (`q̄ = q₀`).
pub fn propose_cloud_rw(
    q0: &[f64],
    p: usize,
    r: &RwProposalDensity,
    target: &dyn LogDensity,
    direct: bool,
    streams: &IterationStreams,
    exec: &Executor,
) -> Result<ProposalCloud> {
    let dim = q0.len();
    let center: State = if direct {
        q0.to_vec()
    } else {
        let eps = r.sample(dim, &mut streams.aux());
        q0.iter().zip(&eps).map(|(q, e)| q - e).collect()
    };
    let proposals: Vec<State> = exec.map_range(p, |i| {
        let eps = r.sample(dim, &mut streams.slot(i + 1));
        center.iter().zip(&eps).map(|(c, e)| c + e).collect()
    });
    let log_masses = exec.map_range(p + 1, |j| {
        target.log_density(if j == 0 { q0 } else { &proposals[j - 1] })
    });
    ProposalCloud::new(q0.to_vec(), proposals, log_masses)
}

/// Barker weights `∝ π(q_j) Π_{i≠j} r(q_i − q_j)` for proposals drawn
/// directly around `q₀`.
pub fn naive_independent_weights(
    cloud: &ProposalCloud,
    r: &RwProposalDensity,
) -> Result<AcceptanceVector> {
    let n = cloud.num_slots();
    let mut lm = Vec::with_capacity(n);
    let mut diff = vec![0.0; cloud.current.len()];
    for j in 0..n {
        let qj = cloud.slot(j);
        let mut total = cloud.log_masses[j];
        for i in (0..n).filter(|i| *i != j) {
            for ((d, a), b) in diff.iter_mut().zip(cloud.slot(i)).zip(qj) {
                *d = a - b;
            }
            total += r.log_density(&diff).ok_or(Error::MissingDensity)?;
        }
        lm.push(total);
    }
    barker_weights(&lm)
}

impl MultiproposalSampler for RwMulti {
    fn dim(&self) -> usize {
        self.target.dim()
    }

    fn num_proposals(&self) -> usize {
        self.p
    }

    fn build_cloud(
        &self,
        current: &[f64],
        _occupied: usize,
        streams: &IterationStreams,
        exec: &Executor,
    ) -> Result<ResamplingState> {
        Ok(ResamplingState {
            cloud: self.propose_cloud_rw(current, streams, exec)?,
            k_cur: 0,
        })
    }

    fn acceptance(&self, cloud: &ProposalCloud, k_cur: usize) -> Result<AcceptanceVector> {
        match &self.variant {
            RwVariant::ConditionallyIndependent(mode) => mode.weights(&cloud.log_masses, k_cur),
            RwVariant::NaiveIndependent => naive_independent_weights(cloud, &self.proposal),
        }
    }
}

fn check_discrete(target: &[f64], proposal: &[Vec<f64>]) -> Result<()> {
    let m = target.len();
    if m == 0 {
        return Err(Error::EmptyChain);
    }
    if target.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
        return Err(Error::Config(
            "discrete target must be strictly positive".into(),
        ));
    }
    if proposal.len() != m || proposal.iter().any(|row| row.len() != m) {
        return Err(Error::ShapeMismatch(format!(
            "proposal must be {m}×{m} to match the target"
        )));
    }
    for i in 0..m {
        let row: f64 = proposal[i].iter().sum();
        let col: f64 = proposal.iter().map(|r| r[i]).sum();
        if proposal[i].iter().any(|x| *x < 0.0) || (row - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!("proposal row {i} is not stochastic")));
        }
        // the transpose kernel f̄ = fᵀ must itself be stochastic
        if (col - 1.0).abs() > 1e-12 {
            return Err(Error::Config(format!(
                "proposal column {i} sums to {col}; a doubly stochastic matrix is required"
            )));
        }
    }
    Ok(())
}

/// Exact transition matrix of the conditionally independent Barker sampler on
/// `m` discrete states, by enumeration of every intermediate point and cloud.
///
/// `proposal[a][b]` is `f(a, b)`; the intermediate point uses the transpose.
pub fn exact_transition_matrix_discrete(
    target: &[f64],
    proposal: &[Vec<f64>],
    p: usize,
) -> Result<Vec<Vec<f64>>> {
    let m = target.len();
    if m > 8 || p > 3 {
        return Err(Error::TooLarge {
            states: m,
            proposals: p,
        });
    }
    if p == 0 {
        return Err(Error::Config("p must be at least 1".into()));
    }
    check_discrete(target, proposal)?;

    let n_clouds = m.pow(p as u32);
    let mut cloud = vec![0usize; p];
    let mut masses = vec![0.0; p + 1];
    let mut matrix = vec![vec![0.0; m]; m];
    for (i, row) in matrix.iter_mut().enumerate() {
        for from_center in proposal {
            let to_center = from_center[i];
            if to_center == 0.0 {
                continue;
            }
            for code in 0..n_clouds {
                let mut c = code;
                let mut prob = to_center;
                for slot in cloud.iter_mut() {
                    *slot = c % m;
                    c /= m;
                    prob *= from_center[*slot];
                }
                if prob == 0.0 {
                    continue;
                }
                masses[0] = target[i];
                for (w, s) in masses[1..].iter_mut().zip(&cloud) {
                    *w = target[*s];
                }
                let total: f64 = masses.iter().sum();
                row[i] += prob * masses[0] / total;
                for (w, s) in masses[1..].iter().zip(&cloud) {
                    row[*s] += prob * w / total;
                }
            }
        }
    }
    Ok(matrix)
}

/// Largest violation `|μ_i P_ij − μ_j P_ji|` over all pairs, with `μ` normalized.
pub fn detailed_balance_residual(target: &[f64], matrix: &[Vec<f64>]) -> f64 {
    let z: f64 = target.iter().sum();
    let mut worst = 0.0f64;
    for i in 0..target.len() {
        for j in 0..target.len() {
            let lhs = target[i] / z * matrix[i][j];
            let rhs = target[j] / z * matrix[j][i];
            worst = worst.max((lhs - rhs).abs());
        }
    }
    worst
}

/// The same sampler on a finite state space, with states stored as a single
/// coordinate holding the state index.
#[derive(Debug, Clone)]
pub struct DiscreteRwMulti {
    log_target: Vec<f64>,
    proposal: Vec<Vec<f64>>,
    p: usize,
}

impl DiscreteRwMulti {
    pub fn new(target: &[f64], proposal: Vec<Vec<f64>>, p: usize) -> Result<Self> {
        check_discrete(target, &proposal)?;
        if p == 0 {
            return Err(Error::Config("p must be at least 1".into()));
        }
        Ok(DiscreteRwMulti {
            log_target: target.iter().map(|t| t.ln()).collect(),
            proposal,
            p,
        })
    }

    fn draw<R: Rng + ?Sized>(weights: impl Iterator<Item = f64>, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut last = 0;
        for (k, w) in weights.enumerate() {
            if w > 0.0 {
                last = k;
            }
            acc += w;
            if acc > u {
                return k;
            }
        }
        last
    }
}

impl MultiproposalSampler for DiscreteRwMulti {
    fn dim(&self) -> usize {
        1
    }

    fn num_proposals(&self) -> usize {
        self.p
    }

    fn build_cloud(
        &self,
        current: &[f64],
        _occupied: usize,
        streams: &IterationStreams,
        exec: &Executor,
    ) -> Result<ResamplingState> {
        let m = self.log_target.len();
        let i = current[0] as usize;
        if current[0] != i as f64 || i >= m {
            return Err(Error::Config(format!(
                "{} is not a state index",
                current[0]
            )));
        }
        let center = Self::draw((0..m).map(|c| self.proposal[c][i]), &mut streams.aux());
        let proposals: Vec<State> = exec.map_range(self.p, |k| {
            let s = Self::draw(
                self.proposal[center].iter().copied(),
                &mut streams.slot(k + 1),
            );
            vec![s as f64]
        });
        let log_masses = std::iter::once(i)
            .chain(proposals.iter().map(|q| q[0] as usize))
            .map(|s| self.log_target[s])
            .collect();
        Ok(ResamplingState {
            cloud: ProposalCloud::new(current.to_vec(), proposals, log_masses)?,
            k_cur: 0,
        })
    }

    fn acceptance(&self, cloud: &ProposalCloud, _k_cur: usize) -> Result<AcceptanceVector> {
        barker_weights(&cloud.log_masses)
    }
}

/// Ring proposal on `m` states: step `+1` with probability `up`, `−1` otherwise.
pub fn ring_proposal(m: usize, up: f64) -> Vec<Vec<f64>> {
    let mut f = vec![vec![0.0; m]; m];
    for (i, row) in f.iter_mut().enumerate() {
        row[(i + 1) % m] += up;
        row[(i + m - 1) % m] += 1.0 - up;
    }
    f
}
