//! Multiproposal Hamiltonian Monte Carlo.
//!
//! The proposal cloud is a leapfrog trajectory. [`Mhmc`] integrates forward
//! from the current point and selects with MH-wedge weights; [`MhmcResample`]
//! integrates both ways from the occupied slot and performs repeated index
//! jumps within the trajectory.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::kernel::{
    AcceptanceVector, MultiproposalSampler, ProposalCloud, ResamplingState, State, WeightMode,
};
use crate::parallel::Executor;
use crate::rng::IterationStreams;
use crate::targets::GradLogDensity;

/// Separable Hamiltonian `H(q, v) = Φ(q) + ½ vᵀM⁻¹v` with `Φ = −log π` and a
/// diagonal mass matrix.
#[derive(Clone)]
pub struct HamiltonianSystem {
    target: Arc<dyn GradLogDensity>,
    mass: Vec<f64>,
    delta: f64,
}

impl std::fmt::Debug for HamiltonianSystem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("HamiltonianSystem")
            .field("mass", &self.mass)
            .field("delta", &self.delta)
            .finish_non_exhaustive()
    }
}

impl HamiltonianSystem {
    pub fn new(target: Arc<dyn GradLogDensity>, mass: Vec<f64>, delta: f64) -> Result<Self> {
        if mass.len() != target.dim() {
            return Err(Error::Dimension {
                expected: target.dim(),
                got: mass.len(),
            });
        }
        if mass.iter().any(|m| !(m.is_finite() && *m > 0.0)) {
            return Err(Error::Config("mass matrix entries must be positive".into()));
        }
        if !(delta.is_finite() && delta >= 0.0) {
            return Err(Error::Config(format!(
                "step size {delta} must be nonnegative"
            )));
        }
        Ok(HamiltonianSystem {
            target,
            mass,
            delta,
        })
    }

    /// Unit mass matrix.
    pub fn unit_mass(target: Arc<dyn GradLogDensity>, delta: f64) -> Result<Self> {
        let dim = target.dim();
        Self::new(target, vec![1.0; dim], delta)
    }

    pub fn dim(&self) -> usize {
        self.mass.len()
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn mass(&self) -> &[f64] {
        &self.mass
    }

    pub fn with_delta(&self, delta: f64) -> Result<Self> {
        Self::new(self.target.clone(), self.mass.clone(), delta)
    }

    pub fn potential(&self, q: &[f64]) -> f64 {
        -self.target.log_density(q)
    }

    pub fn grad_potential(&self, q: &[f64], out: &mut [f64]) {
        self.target.grad_log_density(q, out);
        for g in out.iter_mut() {
            *g = -*g;
        }
    }

    pub fn kinetic(&self, v: &[f64]) -> f64 {
        v.iter().zip(&self.mass).map(|(v, m)| 0.5 * v * v / m).sum()
    }

    pub fn energy(&self, q: &[f64], v: &[f64]) -> f64 {
        self.potential(q) + self.kinetic(v)
    }

    /// Draws `v ~ N(0, M)`.
    pub fn sample_momentum<R: Rng + ?Sized>(&self, rng: &mut R) -> State {
        self.mass
            .iter()
            .map(|m| m.sqrt() * rng.sample::<f64, _>(StandardNormal))
            .collect()
    }

    // One kick-drift-kick with signed step `h`, reusing and refreshing `grad`
    // (which must hold ∇Φ(q) on entry).
    fn step_in_place(&self, q: &mut [f64], v: &mut [f64], grad: &mut [f64], h: f64) {
        for (v, g) in v.iter_mut().zip(grad.iter()) {
            *v -= 0.5 * h * g;
        }
        for ((q, v), m) in q.iter_mut().zip(v.iter()).zip(&self.mass) {
            *q += h * v / m;
        }
        self.grad_potential(q, grad);
        for (v, g) in v.iter_mut().zip(grad.iter()) {
            *v -= 0.5 * h * g;
        }
    }
}

fn finite(x: &[f64]) -> bool {
    x.iter().all(|v| v.is_finite())
}

/// One leapfrog step `Ξ_δ`.
pub fn leapfrog_step(q: &[f64], v: &[f64], sys: &HamiltonianSystem) -> Result<(State, State)> {
    signed_step(q, v, sys, sys.delta)
}

/// The inverse map `Ξ_δ⁻¹`, which is the leapfrog step with `−δ`.
pub fn leapfrog_inverse(q: &[f64], v: &[f64], sys: &HamiltonianSystem) -> Result<(State, State)> {
    signed_step(q, v, sys, -sys.delta)
}

fn signed_step(q: &[f64], v: &[f64], sys: &HamiltonianSystem, h: f64) -> Result<(State, State)> {
    let (mut q, mut v) = (q.to_vec(), v.to_vec());
    let mut grad = vec![0.0; q.len()];
    sys.grad_potential(&q, &mut grad);
    sys.step_in_place(&mut q, &mut v, &mut grad, h);
    if finite(&q) && finite(&v) {
        Ok((q, v))
    } else {
        Err(Error::NonFiniteState { iteration: 1 })
    }
}

/// Central-difference determinant of one leapfrog step at `(q, v)`; 1 for a
/// volume-preserving integrator.
pub fn jacobian_determinant(sys: &HamiltonianSystem, q: &[f64], v: &[f64]) -> Result<f64> {
    let n = q.len();
    let x: State = q.iter().chain(v).copied().collect();
    let map = |x: &[f64]| -> Result<State> {
        let (q, v) = leapfrog_step(&x[..n], &x[n..], sys)?;
        Ok(q.into_iter().chain(v).collect())
    };
    let h = 1e-5;
    let mut jac = DMatrix::zeros(2 * n, 2 * n);
    let mut probe = x.clone();
    for c in 0..2 * n {
        probe[c] = x[c] + h;
        let up = map(&probe)?;
        probe[c] = x[c] - h;
        let down = map(&probe)?;
        probe[c] = x[c];
        for r in 0..2 * n {
            jac[(r, c)] = (up[r] - down[r]) / (2.0 * h);
        }
    }
    Ok(jac.determinant())
}

/// Phase-space points at leapfrog times `0, δ, …, pδ` and their energies.
#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub states: Vec<(State, State)>,
    pub energies: Vec<f64>,
}

/// Integrates `p` forward steps from `(q, v)`. Fails on the first non-finite point.
pub fn trajectory(q: &[f64], v: &[f64], sys: &HamiltonianSystem, p: usize) -> Result<Trajectory> {
    let states = integrate(q, v, sys, p, sys.delta);
    if let Some(bad) = states.iter().position(|(q, v)| !(finite(q) && finite(v))) {
        return Err(Error::NonFiniteState { iteration: bad });
    }
    let energies = states.iter().map(|(q, v)| sys.energy(q, v)).collect();
    Ok(Trajectory { states, energies })
}

// `steps` leapfrog steps with signed step `h`, including the start point.
// Points after a divergence stay non-finite, so they receive zero weight.
fn integrate(
    q: &[f64],
    v: &[f64],
    sys: &HamiltonianSystem,
    steps: usize,
    h: f64,
) -> Vec<(State, State)> {
    let (mut q, mut v) = (q.to_vec(), v.to_vec());
    let mut grad = vec![0.0; q.len()];
    sys.grad_potential(&q, &mut grad);
    let mut out = Vec::with_capacity(steps + 1);
    out.push((q.clone(), v.clone()));
    for _ in 0..steps {
        sys.step_in_place(&mut q, &mut v, &mut grad, h);
        out.push((q.clone(), v.clone()));
    }
    out
}

fn log_mass(sys: &HamiltonianSystem, q: &[f64], v: &[f64]) -> f64 {
    let h = sys.energy(q, v);
    if h.is_nan() {
        f64::NEG_INFINITY
    } else {
        -h
    }
}

/// Compares the analytic gradient of `−log π` with central differences at `x`.
///
/// Each component must agree within `max(1e-5, 1e-5·|g|)`.
pub fn check_gradient(target: &dyn GradLogDensity, x: &[f64]) -> Result<()> {
    let mut g = vec![0.0; x.len()];
    target.grad_log_density(x, &mut g);
    let mut probe = x.to_vec();
    for k in 0..x.len() {
        let h = 1e-6 * x[k].abs().max(1.0);
        probe[k] = x[k] + h;
        let up = target.log_density(&probe);
        probe[k] = x[k] - h;
        let down = target.log_density(&probe);
        probe[k] = x[k];
        let fd = (up - down) / (2.0 * h);
        let tol = 1e-5f64.max(1e-5 * g[k].abs());
        let err = (fd - g[k]).abs();
        if err.is_nan() || err > tol {
            return Err(Error::Config(format!(
                "gradient component {k} is {} but finite differences give {fd}",
                g[k]
            )));
        }
    }
    Ok(())
}

/// Forward-trajectory multiproposal HMC with MH-wedge selection.
#[derive(Debug, Clone)]
pub struct Mhmc {
    sys: HamiltonianSystem,
    p: usize,
    mode: WeightMode,
}

impl Mhmc {
    /// `bar_alpha` holds one weight per trajectory step; `None` gives `1/p` each.
    pub fn new(sys: HamiltonianSystem, p: usize, bar_alpha: Option<Vec<f64>>) -> Result<Self> {
        if p == 0 {
            return Err(Error::Config("p must be at least 1".into()));
        }
        let mode = match bar_alpha {
            Some(bar_alpha) => WeightMode::MhWedge { bar_alpha },
            None => WeightMode::uniform_wedge(p),
        };
        mode.validate(p)?;
        Ok(Mhmc { sys, p, mode })
    }

    pub fn system(&self) -> &HamiltonianSystem {
        &self.sys
    }

    /// One iteration: returns the next state and the selected slot.
    pub fn mhmc_step(
        &self,
        q: &[f64],
        streams: &IterationStreams,
        exec: &Executor,
    ) -> Result<(State, usize)> {
        let state = self.build_cloud(q, 0, streams, exec)?;
        let k = crate::kernel::jump_indices(self, &state, 1, &mut streams.selection())?[0];
        Ok((state.cloud.slot(k).to_vec(), k))
    }
}

impl MultiproposalSampler for Mhmc {
    fn dim(&self) -> usize {
        self.sys.dim()
    }

    fn num_proposals(&self) -> usize {
        self.p
    }

    fn build_cloud(
        &self,
        current: &[f64],
        _occupied: usize,
        streams: &IterationStreams,
        _exec: &Executor,
    ) -> Result<ResamplingState> {
        let v = self.sys.sample_momentum(&mut streams.aux());
        let points = integrate(current, &v, &self.sys, self.p, self.sys.delta);
        // H is even in v, so H(S_j(q, v)) is the energy at step j
        let log_masses = points
            .iter()
            .map(|(q, v)| log_mass(&self.sys, q, v))
            .collect();
        let proposals = points.into_iter().skip(1).map(|(q, _)| q).collect();
        Ok(ResamplingState {
            cloud: ProposalCloud::new(current.to_vec(), proposals, log_masses)?,
            k_cur: 0,
        })
    }

    fn acceptance(&self, cloud: &ProposalCloud, k_cur: usize) -> Result<AcceptanceVector> {
        self.mode.weights(&cloud.log_masses, k_cur)
    }
}

/// Selection rule for index jumps inside a trajectory.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ResampleWeights {
    /// `α_{k,j} ∝ exp(−H_j)`, independent of the occupied slot.
    Barker,
    /// `α_{k,j} = ᾱ·min(1, exp(H_k − H_j))` for `j ≠ k`. The common weight
    /// `ᾱ ≤ 1/p` keeps the index chain reversible.
    Mh { bar_alpha: f64 },
}

/// Trajectory resampling HMC: a fresh momentum is drawn at the occupied slot
/// `k`, the trajectory is extended `k` steps backward and `p − k` forward,
/// and `n` index jumps are recorded per trajectory.
#[derive(Debug, Clone)]
pub struct MhmcResample {
    sys: HamiltonianSystem,
    p: usize,
    mode: WeightMode,
}

impl MhmcResample {
    pub fn new(sys: HamiltonianSystem, p: usize, weights: ResampleWeights) -> Result<Self> {
        if p == 0 {
            return Err(Error::Config("p must be at least 1".into()));
        }
        let mode = match weights {
            ResampleWeights::Barker => WeightMode::Barker,
            ResampleWeights::Mh { bar_alpha } => {
                if !(bar_alpha.is_finite() && bar_alpha >= 0.0) {
                    return Err(Error::Config(format!("invalid bar_alpha {bar_alpha}")));
                }
                WeightMode::MhWedge {
                    bar_alpha: vec![bar_alpha; p],
                }
            }
        };
        mode.validate(p)?;
        Ok(MhmcResample { sys, p, mode })
    }

    pub fn system(&self) -> &HamiltonianSystem {
        &self.sys
    }

    /// Builds the trajectory around the occupied slot and returns the `n`
    /// recorded states together with the final occupied slot.
    pub fn mhmc_resample_step(
        &self,
        q: &[f64],
        k_cur: usize,
        n: usize,
        streams: &IterationStreams,
        exec: &Executor,
    ) -> Result<(Vec<State>, usize)> {
        let state = self.build_cloud(q, k_cur, streams, exec)?;
        let path = crate::kernel::jump_indices(self, &state, n, &mut streams.selection())?;
        let last = *path.last().unwrap_or(&state.k_cur);
        let states = path.iter().map(|j| state.cloud.slot(*j).to_vec()).collect();
        Ok((states, last))
    }
}

impl MultiproposalSampler for MhmcResample {
    fn dim(&self) -> usize {
        self.sys.dim()
    }

    fn num_proposals(&self) -> usize {
        self.p
    }

    fn build_cloud(
        &self,
        current: &[f64],
        occupied: usize,
        streams: &IterationStreams,
        _exec: &Executor,
    ) -> Result<ResamplingState> {
        let k = occupied.min(self.p);
        let v = self.sys.sample_momentum(&mut streams.aux());
        let backward = integrate(current, &v, &self.sys, k, -self.sys.delta);
        let forward = integrate(current, &v, &self.sys, self.p - k, self.sys.delta);
        // slot m holds Ξ^{m−k}(q, v)
        let points: Vec<(State, State)> = backward
            .into_iter()
            .rev()
            .chain(forward.into_iter().skip(1))
            .collect();
        let log_masses = points
            .iter()
            .map(|(q, v)| log_mass(&self.sys, q, v))
            .collect();
        let mut qs = points.into_iter().map(|(q, _)| q);
        let first = qs.next().expect("trajectory has p + 1 points");
        Ok(ResamplingState {
            cloud: ProposalCloud::new(first, qs.collect(), log_masses)?,
            k_cur: k,
        })
    }

    fn acceptance(&self, cloud: &ProposalCloud, k_cur: usize) -> Result<AcceptanceVector> {
        self.mode.weights(&cloud.log_masses, k_cur)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::ks_distance;
    use crate::kernel::{run_chain, run_resampling_chain};
    use crate::rng::ChainKey;
    use crate::targets::{Gaussian, LogDensity};
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use statrs::distribution::{ContinuousCDF, Normal};

    struct Flat(usize);

    impl LogDensity for Flat {
        fn dim(&self) -> usize {
            self.0
        }
        fn log_density(&self, _x: &[f64]) -> f64 {
            0.0
        }
    }

    impl GradLogDensity for Flat {
        fn grad_log_density(&self, _x: &[f64], out: &mut [f64]) {
            out.fill(0.0);
        }
    }

    /// `Φ(q) = Σ a_k q_k² / 2 + b_k q_k⁴ / 4`.
    struct QuadQuartic {
        a: Vec<f64>,
        b: Vec<f64>,
    }

    impl LogDensity for QuadQuartic {
        fn dim(&self) -> usize {
            self.a.len()
        }
        fn log_density(&self, x: &[f64]) -> f64 {
            -x.iter()
                .zip(self.a.iter().zip(&self.b))
                .map(|(x, (a, b))| 0.5 * a * x * x + 0.25 * b * x.powi(4))
                .sum::<f64>()
        }
    }

    impl GradLogDensity for QuadQuartic {
        fn grad_log_density(&self, x: &[f64], out: &mut [f64]) {
            for (k, o) in out.iter_mut().enumerate() {
                *o = -(self.a[k] * x[k] + self.b[k] * x[k].powi(3));
            }
        }
    }

    fn harmonic(delta: f64) -> HamiltonianSystem {
        HamiltonianSystem::unit_mass(Arc::new(Gaussian::standard(1)), delta).unwrap()
    }

    fn random_system(dim: usize, rng: &mut ChaCha8Rng) -> (HamiltonianSystem, State, State) {
        let a = (0..dim).map(|_| rng.random_range(0.5..2.0)).collect();
        let b = (0..dim).map(|_| rng.random_range(0.0..0.5)).collect();
        let mass = (0..dim).map(|_| rng.random_range(0.5..2.0)).collect();
        let sys = HamiltonianSystem::new(Arc::new(QuadQuartic { a, b }), mass, 0.1).unwrap();
        let q = (0..dim).map(|_| rng.random_range(-1.5..1.5)).collect();
        let v = (0..dim).map(|_| rng.random_range(-1.5..1.5)).collect();
        (sys, q, v)
    }

    #[test]
    fn leapfrog_example() {
        let (q, v) = leapfrog_step(&[1.0], &[0.0], &harmonic(0.1)).unwrap();
        assert_abs_diff_eq!(q[0], 0.995, epsilon = 1e-15);
        assert_abs_diff_eq!(v[0], -0.09975, epsilon = 1e-15);
    }

    #[test]
    fn zero_gradient_drifts() {
        let sys = HamiltonianSystem::new(Arc::new(Flat(2)), vec![1.0, 1.0], 0.25).unwrap();
        let (q, v) = leapfrog_step(&[1.0, -2.0], &[0.4, 0.8], &sys).unwrap();
        assert_eq!(q, vec![1.1, -1.8]);
        assert_eq!(v, vec![0.4, 0.8]);
    }

    #[test]
    fn one_step_trajectory() {
        let sys = harmonic(0.3);
        let t = trajectory(&[0.7], &[0.2], &sys, 1).unwrap();
        assert_eq!(t.states.len(), 2);
        assert_eq!(t.states[0], (vec![0.7], vec![0.2]));
        assert_eq!(t.states[1], leapfrog_step(&[0.7], &[0.2], &sys).unwrap());
    }

    #[test]
    fn zero_step_size_freezes() {
        let t = trajectory(
            &[0.7, 1.0],
            &[0.2, -1.0],
            &HamiltonianSystem::unit_mass(Arc::new(Gaussian::standard(2)), 0.0).unwrap(),
            5,
        )
        .unwrap();
        assert!(t.states.iter().all(|s| s == &t.states[0]));
    }

    #[test]
    fn reversibility_and_inverse() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for dim in 1..=6 {
            let (sys, q, v) = random_system(dim, &mut rng);
            let (q1, v1) = leapfrog_step(&q, &v, &sys).unwrap();
            let neg: State = v1.iter().map(|x| -x).collect();
            let (q2, v2) = leapfrog_step(&q1, &neg, &sys).unwrap();
            for k in 0..dim {
                assert!((q2[k] - q[k]).abs() <= 1e-12);
                assert!((-v2[k] - v[k]).abs() <= 1e-12);
            }
            let (q3, v3) = leapfrog_inverse(&q1, &v1, &sys).unwrap();
            for k in 0..dim {
                assert!((q3[k] - q[k]).abs() <= 1e-12);
                assert!((v3[k] - v[k]).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn volume_preserving() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for dim in 2..=6 {
            for _ in 0..5 {
                let (sys, q, v) = random_system(dim, &mut rng);
                let det = jacobian_determinant(&sys, &q, &v).unwrap();
                assert!((det - 1.0).abs() <= 1e-6, "dim {dim}: det {det}");
            }
        }
    }

    #[test]
    fn harmonic_energy_drift() {
        let oscillator = QuadQuartic {
            a: vec![1.0],
            b: vec![0.0],
        };
        let sys = HamiltonianSystem::unit_mass(Arc::new(oscillator), 0.1).unwrap();
        let t = trajectory(&[1.0], &[0.0], &sys, 100).unwrap();
        let h0 = t.energies[0];
        let drift = t
            .energies
            .iter()
            .map(|h| (h - h0).abs())
            .fold(0.0, f64::max);
        assert!(drift <= 0.01 * h0, "drift {drift}");
        // exact flow is (cos t, −sin t); leapfrog phase error stays O(δ²·t)
        for (j, (q, v)) in t.states.iter().enumerate() {
            let time = j as f64 * 0.1;
            assert!((q[0] - time.cos()).abs() < 0.02);
            assert!((v[0] + time.sin()).abs() < 0.02);
        }
    }

    #[test]
    fn flip_involution_in_phase_space() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        for _ in 0..10 {
            let dim = rng.random_range(1..5);
            let (sys, q, v) = random_system(dim, &mut rng);
            for j in 1..=20 {
                let flip = |q: &[f64], v: &[f64]| {
                    let t = trajectory(q, v, &sys, j).unwrap();
                    let (q, v) = t.states[j].clone();
                    (q, v.iter().map(|x| -x).collect::<State>())
                };
                let (q1, v1) = flip(&q, &v);
                let (q2, v2) = flip(&q1, &v1);
                for k in 0..dim {
                    assert!((q2[k] - q[k]).abs() <= 1e-10);
                    assert!((v2[k] - v[k]).abs() <= 1e-10);
                }
            }
        }
    }

    #[test]
    fn gradient_check_detects_errors() {
        let g = QuadQuartic {
            a: vec![1.0, 2.0],
            b: vec![0.3, 0.1],
        };
        check_gradient(&g, &[0.5, -1.2]).unwrap();
        struct Wrong;
        impl LogDensity for Wrong {
            fn dim(&self) -> usize {
                1
            }
            fn log_density(&self, x: &[f64]) -> f64 {
                -x[0] * x[0]
            }
        }
        impl GradLogDensity for Wrong {
            fn grad_log_density(&self, x: &[f64], out: &mut [f64]) {
                out[0] = -x[0];
            }
        }
        assert!(check_gradient(&Wrong, &[1.0]).is_err());
    }

    #[test]
    fn saturated_wedge_with_tiny_step() {
        let sys = HamiltonianSystem::unit_mass(Arc::new(Gaussian::standard(2)), 1e-7).unwrap();
        let s = Mhmc::new(sys, 4, Some(vec![0.1, 0.2, 0.3, 0.2])).unwrap();
        let streams = ChainKey::new(2, 0).iteration(0);
        let st = s
            .build_cloud(&[0.3, -0.4], 0, &streams, &Executor::serial())
            .unwrap();
        let w = s.acceptance(&st.cloud, 0).unwrap();
        let expected = [0.2, 0.1, 0.2, 0.3, 0.2];
        for (a, b) in w.probs().iter().zip(expected) {
            assert_abs_diff_eq!(*a, b, epsilon = 1e-6);
        }
    }

    #[test]
    fn single_proposal_reduces_to_hmc() {
        let sys = harmonic(0.9);
        let s = Mhmc::new(sys.clone(), 1, Some(vec![1.0])).unwrap();
        let streams = ChainKey::new(9, 0).iteration(3);
        let st = s
            .build_cloud(&[1.4], 0, &streams, &Executor::serial())
            .unwrap();
        let v = sys.sample_momentum(&mut streams.aux());
        let (q1, v1) = leapfrog_step(&[1.4], &v, &sys).unwrap();
        let accept = (sys.energy(&[1.4], &v) - sys.energy(&q1, &v1))
            .exp()
            .min(1.0);
        let w = s.acceptance(&st.cloud, 0).unwrap();
        assert_eq!(st.cloud.proposals[0], q1);
        assert_abs_diff_eq!(w.probs()[1], accept, epsilon = 1e-14);
    }

    #[test]
    fn resample_barker_uniform_for_exact_energy() {
        let sys = HamiltonianSystem::unit_mass(Arc::new(Flat(3)), 0.5).unwrap();
        let s = MhmcResample::new(sys, 6, ResampleWeights::Barker).unwrap();
        let streams = ChainKey::new(4, 0).iteration(0);
        let st = s
            .build_cloud(&[0.0; 3], 2, &streams, &Executor::serial())
            .unwrap();
        assert_eq!(st.k_cur, 2);
        assert_eq!(st.cloud.slot(2), &[0.0; 3]);
        for p in s.acceptance(&st.cloud, 2).unwrap().probs() {
            assert_abs_diff_eq!(*p, 1.0 / 7.0, epsilon = 1e-14);
        }
    }

    #[test]
    fn resample_slot_labels_follow_the_flow() {
        let sys = harmonic(0.2);
        let s = MhmcResample::new(sys.clone(), 4, ResampleWeights::Barker).unwrap();
        let streams = ChainKey::new(8, 0).iteration(1);
        let q = [0.6];
        let st = s.build_cloud(&q, 3, &streams, &Executor::serial()).unwrap();
        let v = sys.sample_momentum(&mut streams.aux());
        let (mut q0, mut v0) = (q.to_vec(), v.clone());
        for _ in 0..3 {
            (q0, v0) = leapfrog_inverse(&q0, &v0, &sys).unwrap();
        }
        let t = trajectory(&q0, &v0, &sys, 4).unwrap();
        for m in 0..5 {
            assert!((st.cloud.slot(m)[0] - t.states[m].0[0]).abs() <= 1e-12);
        }
    }

    #[test]
    fn resample_mh_budget() {
        let sys = harmonic(0.2);
        assert!(matches!(
            MhmcResample::new(sys, 4, ResampleWeights::Mh { bar_alpha: 0.3 }),
            Err(Error::WeightBudgetExceeded { .. })
        ));
    }

    #[test]
    fn gaussian_moments_2d() {
        let sys = HamiltonianSystem::unit_mass(Arc::new(Gaussian::standard(2)), 0.2).unwrap();
        let s = Mhmc::new(sys, 10, None).unwrap();
        let n = 100_000;
        let rec = run_chain(&s, &[0.5, -0.5], n, 31, &Executor::serial()).unwrap();
        let xs = &rec.samples[1..];
        let mean: Vec<f64> = (0..2)
            .map(|k| xs.iter().map(|x| x[k]).sum::<f64>() / n as f64)
            .collect();
        for k in 0..2 {
            let series: Vec<f64> = xs.iter().map(|x| x[k]).collect();
            let ess = crate::diagnostics::ess(&series).unwrap();
            assert!(
                mean[k].abs() < 3.0 / ess.sqrt(),
                "mean {} ess {ess}",
                mean[k]
            );
        }
        for a in 0..2 {
            for b in 0..2 {
                let c = xs
                    .iter()
                    .map(|x| (x[a] - mean[a]) * (x[b] - mean[b]))
                    .sum::<f64>()
                    / n as f64;
                let target = if a == b { 1.0 } else { 0.0 };
                assert!((c - target).abs() < 0.05, "cov[{a}][{b}] = {c}");
            }
        }
    }

    #[test]
    fn resample_marginal_is_gaussian() {
        let sys = harmonic(0.3);
        let s = MhmcResample::new(sys, 5, ResampleWeights::Barker).unwrap();
        let n_outer = 100_000;
        let rec = run_resampling_chain(&s, &[0.0], n_outer, 4, 7, &Executor::serial()).unwrap();
        // one recorded state per 40 to make the sample effectively independent
        let xs: Vec<f64> = rec.samples[1..].iter().step_by(40).map(|x| x[0]).collect();
        let normal = Normal::standard();
        let d = ks_distance(&xs, |x| normal.cdf(x)).unwrap();
        assert!(
            d < 1.63 / (xs.len() as f64).sqrt(),
            "KS {d} over {}",
            xs.len()
        );
    }

    proptest! {
        #[test]
        fn inverse_composes_to_identity(
            q in prop::collection::vec(-2.0f64..2.0, 1..6),
            seed in 0u64..1000,
            delta in 0.01f64..0.5,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let dim = q.len();
            let (sys, _, v) = random_system(dim, &mut rng);
            let sys = sys.with_delta(delta).unwrap();
            let (q1, v1) = leapfrog_step(&q, &v, &sys).unwrap();
            let (q2, v2) = leapfrog_inverse(&q1, &v1, &sys).unwrap();
            for k in 0..dim {
                prop_assert!((q2[k] - q[k]).abs() <= 1e-12);
                prop_assert!((v2[k] - v[k]).abs() <= 1e-12);
            }
        }
    }
}
