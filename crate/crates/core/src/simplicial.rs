//! Simplicial sampler: proposals sit at the vertices of a regular simplex
//! with one vertex at the current state, randomly scaled and rotated.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::{Distribution, Gamma, LogNormal, StandardNormal};

use crate::error::{Error, Result};
use crate::kernel::{
    AcceptanceVector, MultiproposalSampler, ProposalCloud, ResamplingState, State, WeightMode,
};
use crate::parallel::Executor;
use crate::rng::IterationStreams;
use crate::targets::LogDensity;

/// Vertices `w_1 … w_p` in R^N of a unit regular simplex whose remaining vertex
/// is the origin. Only the first `p` coordinates of each vertex can be nonzero.
#[derive(Debug, Clone, PartialEq)]
pub struct SimplexBasis {
    vertices: Vec<State>,
    ambient: usize,
}

impl SimplexBasis {
    pub fn vertices(&self) -> &[State] {
        &self.vertices
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }

    pub fn ambient_dim(&self) -> usize {
        self.ambient
    }
}

/// Rows of the Cholesky factor of the Gram matrix with unit diagonal and
/// `1/2` off the diagonal, zero-padded to length `n`.
pub fn regular_simplex(p: usize, n: usize) -> Result<SimplexBasis> {
    if p == 0 {
        return Err(Error::Config(
            "a simplex needs at least one proposal vertex".into(),
        ));
    }
    if p > n {
        return Err(Error::Dimension {
            expected: n,
            got: p,
        });
    }
    let gram = DMatrix::from_fn(p, p, |i, j| if i == j { 1.0 } else { 0.5 });
    let l = gram
        .cholesky()
        .expect("the simplex Gram matrix is positive definite")
        .unpack();
    let vertices = (0..p)
        .map(|i| {
            let mut w = vec![0.0; n];
            for (k, slot) in w.iter_mut().enumerate().take(i + 1) {
                *slot = l[(i, k)];
            }
            w
        })
        .collect();
    Ok(SimplexBasis {
        vertices,
        ambient: n,
    })
}

/// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the signs
/// of `R`'s diagonal folded into the columns of `Q`.
pub fn haar_orthogonal<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    let qr = g.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
        }
    }
    q
}

/// Law of the edge length `λ`.
#[derive(Debug, Clone, PartialEq)]
pub enum EdgeLengthLaw {
    Constant(f64),
    /// `log λ ~ N(mu, sigma²)`.
    LogNormal {
        mu: f64,
        sigma: f64,
    },
    Gamma {
        shape: f64,
        scale: f64,
    },
}

impl EdgeLengthLaw {
    pub fn validate(&self) -> Result<()> {
        let ok = match self {
            // zero is allowed as a degenerate law that never moves
            EdgeLengthLaw::Constant(l) => l.is_finite() && *l >= 0.0,
            EdgeLengthLaw::LogNormal { mu, sigma } => mu.is_finite() && *sigma >= 0.0,
            EdgeLengthLaw::Gamma { shape, scale } => *shape > 0.0 && *scale > 0.0,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid edge length law {self:?}")))
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        match self {
            EdgeLengthLaw::Constant(l) => *l,
            EdgeLengthLaw::LogNormal { mu, sigma } => {
                LogNormal::new(*mu, *sigma).expect("validated").sample(rng)
            }
            EdgeLengthLaw::Gamma { shape, scale } => {
                Gamma::new(*shape, *scale).expect("validated").sample(rng)
            }
        }
    }
}

/// Simplicial multiproposal sampler.
#[derive(Clone)]
pub struct Simplicial {
    target: Arc<dyn LogDensity>,
    basis: SimplexBasis,
    law: EdgeLengthLaw,
    mode: WeightMode,
}

impl std::fmt::Debug for Simplicial {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Simplicial")
            .field("p", &self.basis.num_vertices())
            .field("law", &self.law)
            .field("mode", &self.mode)
            .finish_non_exhaustive()
    }
}

impl Simplicial {
    pub fn new(
        target: Arc<dyn LogDensity>,
        p: usize,
        law: EdgeLengthLaw,
        mode: WeightMode,
    ) -> Result<Self> {
        let basis = regular_simplex(p, target.dim())?;
        law.validate()?;
        mode.validate(p)?;
        Ok(Simplicial {
            target,
            basis,
            law,
            mode,
        })
    }

    pub fn basis(&self) -> &SimplexBasis {
        &self.basis
    }

    /// One iteration: returns the next state and the selected slot.
    pub fn simplicial_step(
        &self,
        q0: &[f64],
        streams: &IterationStreams,
        exec: &Executor,
    ) -> Result<(State, usize)> {
        let state = self.build_cloud(q0, 0, streams, exec)?;
        let k = crate::kernel::jump_indices(self, &state, 1, &mut streams.selection())?[0];
        Ok((state.cloud.slot(k).to_vec(), k))
    }
}

impl MultiproposalSampler for Simplicial {
    fn dim(&self) -> usize {
        self.target.dim()
    }

    fn num_proposals(&self) -> usize {
        self.basis.num_vertices()
    }

    fn build_cloud(
        &self,
        current: &[f64],
        _occupied: usize,
        streams: &IterationStreams,
        exec: &Executor,
    ) -> Result<ResamplingState> {
        let n = current.len();
        let p = self.basis.num_vertices();
        let mut aux = streams.aux();
        let lambda = self.law.sample(&mut aux);
        let rot = haar_orthogonal(n, &mut aux);
        let proposals: Vec<State> = exec.map(self.basis.vertices(), |_, w| {
            let mut q = current.to_vec();
            // w is supported on its first p coordinates
            for (k, wk) in w.iter().enumerate().take(p) {
                if *wk != 0.0 {
                    for (i, qi) in q.iter_mut().enumerate() {
                        *qi += lambda * rot[(i, k)] * wk;
                    }
                }
            }
            q
        });
        let log_masses = exec.map_range(p + 1, |j| {
            self.target
                .log_density(if j == 0 { current } else { &proposals[j - 1] })
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
