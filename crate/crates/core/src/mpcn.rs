//! Multiproposal preconditioned Crank–Nicolson for targets of the form
//! `μ(dq) ∝ exp(-Φ(q)) μ₀(dq)` with a Gaussian base measure `μ₀`.
//!
//! States are stored in the eigenbasis of the prior covariance, so `μ₀` is a
//! product of one-dimensional Gaussians with variances given by the spectrum.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::kernel::{
    AcceptanceVector, MultiproposalSampler, ProposalCloud, ResamplingState, State, WeightMode,
};
use crate::parallel::Executor;
use crate::rng::IterationStreams;

/// Truncated Karhunen–Loève description of a Gaussian measure.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianBasis {
    pub eigenvalues: Vec<f64>,
    pub mean: Vec<f64>,
}

impl GaussianBasis {
    pub fn new(eigenvalues: Vec<f64>, mean: Vec<f64>) -> Result<Self> {
        if eigenvalues.is_empty() {
            return Err(Error::Config("basis needs at least one eigenvalue".into()));
        }
        if eigenvalues.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Config(format!(
                "eigenvalues must be strictly positive, got {eigenvalues:?}"
            )));
        }
        if mean.len() != eigenvalues.len() {
            return Err(Error::Dimension {
                expected: eigenvalues.len(),
                got: mean.len(),
            });
        }
        Ok(GaussianBasis { eigenvalues, mean })
    }

    pub fn centered(eigenvalues: Vec<f64>) -> Result<Self> {
        let k = eigenvalues.len();
        Self::new(eigenvalues, vec![0.0; k])
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Normalized log-density of the base measure.
    pub fn log_density(&self, x: &[f64]) -> f64 {
        self.eigenvalues
            .iter()
            .zip(&self.mean)
            .zip(x)
            .map(|((v, m), xi)| -0.5 * ((xi - m).powi(2) / v + (2.0 * PI * v).ln()))
            .sum()
    }
}

/// `mean_k + sqrt(μ_k) ξ_k` with `ξ_k` i.i.d. standard normal.
pub fn sample_gaussian_kl<R: Rng + ?Sized>(basis: &GaussianBasis, rng: &mut R) -> State {
    basis
        .eigenvalues
        .iter()
        .zip(&basis.mean)
        .map(|(v, m)| {
            let xi: f64 = rng.sample(StandardNormal);
            m + v.sqrt() * xi
        })
        .collect()
}

fn check_rho(rho: f64) -> Result<()> {
    if (0.0..=1.0).contains(&rho) {
        Ok(())
    } else {
        Err(Error::Config(format!("rho must lie in [0, 1], got {rho}")))
    }
}

/// pCN move `ρq + sqrt(1-ρ²) w`, `w ~ μ₀`, taken relative to the prior mean.
pub fn pcn_propose<R: Rng + ?Sized>(
    q: &[f64],
    rho: f64,
    basis: &GaussianBasis,
    rng: &mut R,
) -> Result<State> {
    check_rho(rho)?;
    if q.len() != basis.dim() {
        return Err(Error::Dimension {
            expected: basis.dim(),
            got: q.len(),
        });
    }
    let w = sample_gaussian_kl(basis, rng);
    let s = (1.0 - rho * rho).sqrt();
    Ok(q.iter()
        .zip(&w)
        .zip(&basis.mean)
        .map(|((qi, wi), m)| m + rho * (qi - m) + s * (wi - m))
        .collect())
}

pub type PotentialFn = dyn Fn(&[f64]) -> f64 + Send + Sync;

/// `Φ` together with the base measure it reweights. `Φ` may return `+∞`.
#[derive(Clone)]
pub struct PotentialTarget {
    pub phi: Arc<PotentialFn>,
    pub basis: GaussianBasis,
}

impl PotentialTarget {
    pub fn new(phi: Arc<PotentialFn>, basis: GaussianBasis) -> Self {
        PotentialTarget { phi, basis }
    }

    /// `Φ ≡ 0`: the target is the base measure itself.
    pub fn base_only(basis: GaussianBasis) -> Self {
        PotentialTarget {
            phi: Arc::new(|_| 0.0),
            basis,
        }
    }

    pub fn potential(&self, q: &[f64]) -> f64 {
        (self.phi)(q)
    }
}

impl std::fmt::Debug for PotentialTarget {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("PotentialTarget")
            .field("basis", &self.basis)
            .finish_non_exhaustive()
    }
}

/// Multiproposal pCN sampler.
#[derive(Debug, Clone)]
pub struct Mpcn {
    target: PotentialTarget,
    rho: f64,
    p: usize,
    mode: WeightMode,
    /// Whether the cloud is centred on an intermediate pCN point.
    intermediate: bool,
}

impl Mpcn {
    /// Barker selection, the only rule wired for general use.
    pub fn new(target: PotentialTarget, rho: f64, p: usize) -> Result<Self> {
        check_rho(rho)?;
        if p == 0 {
            return Err(Error::Config("p must be at least 1".into()));
        }
        Ok(Mpcn {
            target,
            rho,
            p,
            mode: WeightMode::Barker,
            intermediate: true,
        })
    }

    /// Traditional single-proposal pCN: one proposal drawn from the current
    /// state, accepted with probability `min(1, exp(Φ(q) − Φ(q̃)))`.
    pub fn classic(target: PotentialTarget, rho: f64) -> Result<Self> {
        Ok(Mpcn {
            mode: WeightMode::MhWedge {
                bar_alpha: vec![1.0],
            },
            intermediate: false,
            ..Mpcn::new(target, rho, 1)?
        })
    }

    /// MH-wedge selection. Not recommended for large `p`.
    pub fn with_experimental_wedge(mut self, bar_alpha: Vec<f64>) -> Result<Self> {
        let mode = WeightMode::MhWedge { bar_alpha };
        mode.validate(self.p)?;
        self.mode = mode;
        Ok(self)
    }

    pub fn target(&self) -> &PotentialTarget {
        &self.target
    }

    /// Selection weights from `Φ` alone: `exp(-Φ(q_j)) / Σ exp(-Φ(q_k))`.
    pub fn weights_from_potentials(phis: &[f64]) -> Result<AcceptanceVector> {
        let lm: Vec<f64> = phis.iter().map(|p| -p).collect();
        crate::kernel::barker_weights(&lm)
    }

    /// One iteration; returns the next state and the selected slot.
    pub fn mpcn_step(
        &self,
        q: &[f64],
        streams: &IterationStreams,
        exec: &Executor,
    ) -> Result<(State, usize)> {
        let state = self.build_cloud(q, 0, streams, exec)?;
        let idx = crate::kernel::jump_indices(self, &state, 1, &mut streams.selection())?[0];
        Ok((state.cloud.slot(idx).to_vec(), idx))
    }

    /// One cloud, `n` recorded categorical draws; the last is the next chain state.
    pub fn mpcn_resample_step(
        &self,
        q: &[f64],
        n: usize,
        streams: &IterationStreams,
        exec: &Executor,
    ) -> Result<Vec<State>> {
        let state = self.build_cloud(q, 0, streams, exec)?;
        let idx = crate::kernel::jump_indices(self, &state, n, &mut streams.selection())?;
        Ok(idx.iter().map(|&j| state.cloud.slot(j).to_vec()).collect())
    }
}

impl MultiproposalSampler for Mpcn {
    fn dim(&self) -> usize {
        self.target.basis.dim()
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
        let basis = &self.target.basis;
        let center = if self.intermediate {
            pcn_propose(current, self.rho, basis, &mut streams.aux())?
        } else {
            current.to_vec()
        };
        let proposals = exec
            .map_range(self.p, |i| {
                pcn_propose(&center, self.rho, basis, &mut streams.slot(i + 1))
            })
            .into_iter()
            .collect::<Result<Vec<_>>>()?;
        let log_masses = exec.map_range(self.p + 1, |j| {
            let q = if j == 0 { current } else { &proposals[j - 1] };
            -self.target.potential(q)
        });
        Ok(ResamplingState {
            cloud: ProposalCloud::new(current.to_vec(), proposals, log_masses)?,
            k_cur: 0,
        })
    }

    fn acceptance(&self, cloud: &ProposalCloud, k_cur: usize) -> Result<AcceptanceVector> {
        self.mode.weights(&cloud.log_masses, k_cur)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::ChainKey;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn rejects_bad_eigenvalues() {
        assert!(matches!(
            GaussianBasis::centered(vec![1.0, 0.0]),
            Err(Error::Config(_))
        ));
        assert!(GaussianBasis::centered(vec![1.0, -2.0]).is_err());
    }

    #[test]
    fn kl_moments() {
        let basis = GaussianBasis::centered(vec![1.0; 3]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 1_000_000;
        let mut sum = [0.0; 3];
        let mut sq = [0.0; 3];
        for _ in 0..n {
            let x = sample_gaussian_kl(&basis, &mut rng);
            for k in 0..3 {
                sum[k] += x[k];
                sq[k] += x[k] * x[k];
            }
        }
        for k in 0..3 {
            let mean = sum[k] / n as f64;
            let var = sq[k] / n as f64 - mean * mean;
            assert!((var - 1.0).abs() < 0.01, "var {var}");
        }

        let basis = GaussianBasis::new(vec![2.0], vec![3.0]).unwrap();
        let mean: f64 = (0..n)
            .map(|_| sample_gaussian_kl(&basis, &mut rng)[0])
            .sum::<f64>()
            / n as f64;
        assert!((mean - 3.0).abs() < 3.0 * (2.0 / n as f64).sqrt());
    }

    #[test]
    fn pcn_limits() {
        let basis = GaussianBasis::centered(vec![1.0, 0.5]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let q = vec![0.3, -1.2];
        assert_eq!(pcn_propose(&q, 1.0, &basis, &mut rng).unwrap(), q);
        assert!(pcn_propose(&q, 1.5, &basis, &mut rng).is_err());
        assert!(pcn_propose(&q, -0.1, &basis, &mut rng).is_err());

        // ρ = 0 ignores q
        let mut a = ChaCha8Rng::seed_from_u64(9);
        let mut b = ChaCha8Rng::seed_from_u64(9);
        assert_eq!(
            pcn_propose(&q, 0.0, &basis, &mut a).unwrap(),
            pcn_propose(&[100.0, 100.0], 0.0, &basis, &mut b).unwrap()
        );
    }

    #[test]
    fn pcn_variance_from_origin() {
        let basis = GaussianBasis::centered(vec![2.0, 0.5]).unwrap();
        let rho: f64 = 0.6;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let n = 400_000;
        let mut sq = [0.0; 2];
        for _ in 0..n {
            let x = pcn_propose(&[0.0, 0.0], rho, &basis, &mut rng).unwrap();
            sq[0] += x[0] * x[0];
            sq[1] += x[1] * x[1];
        }
        for k in 0..2 {
            let expected = (1.0 - rho * rho) * basis.eigenvalues[k];
            let var = sq[k] / n as f64;
            // standard error of a variance estimate is sqrt(2/n) σ²
            assert!((var - expected).abs() < 4.0 * (2.0 / n as f64).sqrt() * expected);
        }
    }

    #[test]
    fn flat_potential_gives_uniform_weights() {
        let target = PotentialTarget::base_only(GaussianBasis::centered(vec![1.0]).unwrap());
        let sampler = Mpcn::new(target, 0.5, 1).unwrap();
        let streams = ChainKey::new(0, 0).iteration(0);
        let state = sampler
            .build_cloud(&[0.2], 0, &streams, &Executor::serial())
            .unwrap();
        let w = sampler.acceptance(&state.cloud, 0).unwrap();
        assert_eq!(w.probs(), &[0.5, 0.5]);
    }

    #[test]
    fn rho_one_fixes_state() {
        let target = PotentialTarget::new(
            Arc::new(|q: &[f64]| q[0] * q[0]),
            GaussianBasis::centered(vec![1.0]).unwrap(),
        );
        let sampler = Mpcn::new(target, 1.0, 4).unwrap();
        let streams = ChainKey::new(1, 0).iteration(0);
        let (next, _) = sampler
            .mpcn_step(&[0.7], &streams, &Executor::serial())
            .unwrap();
        assert_eq!(next, vec![0.7]);
    }

    #[test]
    fn weights_depend_on_potentials_only() {
        let target = PotentialTarget::new(
            Arc::new(|q: &[f64]| q.iter().map(|x| x.powi(4)).sum()),
            GaussianBasis::centered(vec![1.0, 1.0]).unwrap(),
        );
        for rho in [0.1, 0.5, 0.9] {
            let sampler = Mpcn::new(target.clone(), rho, 5).unwrap();
            let streams = ChainKey::new(4, 0).iteration(7);
            let state = sampler
                .build_cloud(&[0.1, 0.2], 0, &streams, &Executor::serial())
                .unwrap();
            let phis: Vec<f64> = (0..6)
                .map(|j| target.potential(state.cloud.slot(j)))
                .collect();
            let direct = Mpcn::weights_from_potentials(&phis).unwrap();
            let via = sampler.acceptance(&state.cloud, 0).unwrap();
            for (a, b) in direct.probs().iter().zip(via.probs()) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-15);
            }
        }
    }

    #[test]
    fn resample_with_one_jump_matches_step() {
        let target = PotentialTarget::new(
            Arc::new(|q: &[f64]| q[0].powi(4)),
            GaussianBasis::centered(vec![1.0]).unwrap(),
        );
        let sampler = Mpcn::new(target, 0.4, 6).unwrap();
        let exec = Executor::serial();
        for it in 0..50 {
            let streams = ChainKey::new(8, 0).iteration(it);
            let (a, _) = sampler.mpcn_step(&[0.3], &streams, &exec).unwrap();
            let b = sampler
                .mpcn_resample_step(&[0.3], 1, &streams, &exec)
                .unwrap();
            assert_eq!(b, vec![a]);
        }
    }

    #[test]
    fn experimental_wedge_validates_budget() {
        let target = PotentialTarget::base_only(GaussianBasis::centered(vec![1.0]).unwrap());
        let sampler = Mpcn::new(target, 0.5, 2).unwrap();
        assert!(matches!(
            sampler.clone().with_experimental_wedge(vec![0.7, 0.7]),
            Err(Error::WeightBudgetExceeded { .. })
        ));
        assert!(sampler.with_experimental_wedge(vec![0.5, 0.5]).is_ok());
    }

    #[test]
    fn classic_is_one_step_metropolis() {
        let target = PotentialTarget::new(
            Arc::new(|q: &[f64]| q[0] * q[0]),
            GaussianBasis::centered(vec![2.0]).unwrap(),
        );
        let sampler = Mpcn::classic(target.clone(), 0.6).unwrap();
        let exec = Executor::serial();
        for it in 0..20 {
            let streams = ChainKey::new(9, 0).iteration(it);
            let state = sampler.build_cloud(&[0.8], 0, &streams, &exec).unwrap();
            // the proposal is a single pCN move from the current state
            let mut aux = streams.slot(1);
            let expected = pcn_propose(&[0.8], 0.6, &target.basis, &mut aux).unwrap();
            assert_eq!(state.cloud.slot(1), &expected[..]);
            let accept = (target.potential(&[0.8]) - target.potential(&expected))
                .exp()
                .min(1.0);
            let w = sampler.acceptance(&state.cloud, 0).unwrap();
            assert_abs_diff_eq!(w.probs()[1], accept, epsilon = 1e-14);
        }
    }

    #[test]
    fn classic_always_moves_without_potential() {
        let target = PotentialTarget::base_only(GaussianBasis::centered(vec![1.0, 3.0]).unwrap());
        let sampler = Mpcn::classic(target, 0.9).unwrap();
        let rec =
            crate::kernel::run_chain(&sampler, &[0.0, 0.0], 500, 2, &Executor::serial()).unwrap();
        assert!(rec.moved_flags.iter().all(|m| *m));
    }

    #[test]
    fn frozen_chain_never_moves() {
        let target = PotentialTarget::base_only(GaussianBasis::centered(vec![1.0, 2.0]).unwrap());
        let sampler = Mpcn::new(target, 1.0, 3).unwrap();
        let rec =
            crate::kernel::run_chain(&sampler, &[0.4, -0.2], 200, 1, &Executor::serial()).unwrap();
        assert!(rec.samples.iter().all(|s| s == &[0.4, -0.2]));
        assert_eq!(crate::diagnostics::move_rate(&rec).unwrap(), 0.0);
    }

    #[test]
    fn flat_resampling_jumps_are_iid_uniform() {
        let target = PotentialTarget::base_only(GaussianBasis::centered(vec![1.0]).unwrap());
        let sampler = Mpcn::new(target, 0.5, 2).unwrap();
        let exec = Executor::serial();
        // pairs of consecutive jumps within a cloud should be uniform over 3 × 3
        let mut pairs = [[0usize; 3]; 3];
        let n_clouds = 20_000;
        for it in 0..n_clouds {
            let streams = ChainKey::new(6, 0).iteration(it);
            let state = sampler.build_cloud(&[0.1], 0, &streams, &exec).unwrap();
            let idx =
                crate::kernel::jump_indices(&sampler, &state, 5, &mut streams.selection()).unwrap();
            assert_eq!(idx.len(), 5);
            for w in idx.windows(2) {
                pairs[w[0]][w[1]] += 1;
            }
        }
        let total = (n_clouds * 4) as f64;
        for row in pairs {
            for c in row {
                // binomial 4σ band around 1/9
                let f = c as f64 / total;
                let sd = (1.0 / 9.0 * 8.0 / 9.0 / total).sqrt();
                assert!((f - 1.0 / 9.0).abs() < 4.0 * sd, "pair frequency {f}");
            }
        }
    }
}
