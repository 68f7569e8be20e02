//! Maps configuration ids to targets and samplers.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::hmc::{HamiltonianSystem, Mhmc, MhmcResample, ResampleWeights};
use crate::kernel::{MultiproposalSampler, State, WeightMode};
use crate::mpcn::{GaussianBasis, Mpcn, PotentialTarget};
use crate::rw::{RwMulti, RwProposalDensity, RwVariant};
use crate::simplicial::{EdgeLengthLaw, Simplicial};
use crate::targets::{
    toy_potential, toy_prior_basis, Gaussian, GradLogDensity, LogDensity, MixtureTarget, Quartic,
    ToyInverseProblem,
};

use super::config::{
    EdgeLawName, ProposalName, RwVariantName, SamplerConfig, TargetConfig, WeightModeName,
};

/// A target in every form a sampler may need.
#[derive(Clone)]
pub struct BuiltTarget {
    pub id: &'static str,
    pub density: Arc<dyn LogDensity>,
    /// Present for targets with an analytic gradient.
    pub grad: Option<Arc<dyn GradLogDensity>>,
    /// Potential relative to a Gaussian base measure, for pCN-type samplers.
    pub potential: Option<PotentialTarget>,
    /// Mixture targets keep their components for mode bookkeeping.
    pub mixture: Option<Arc<MixtureTarget>>,
}

impl BuiltTarget {
    pub fn dim(&self) -> usize {
        self.density.dim()
    }

    pub fn default_init(&self) -> State {
        match &self.mixture {
            Some(m) => m.centers[0].clone(),
            None => vec![0.0; self.dim()],
        }
    }
}

impl std::fmt::Debug for BuiltTarget {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BuiltTarget")
            .field("id", &self.id)
            .field("dim", &self.dim())
            .finish_non_exhaustive()
    }
}

fn decaying_variances(dim: usize, sigma_sq: f64, gamma: f64) -> Vec<f64> {
    (1..=dim)
        .map(|k| sigma_sq * (k as f64).powf(-gamma))
        .collect()
}

pub fn build_target(cfg: &TargetConfig) -> Result<BuiltTarget> {
    match cfg {
        TargetConfig::Gaussian(c) => {
            let mean = c.mean.clone().unwrap_or_else(|| vec![0.0; c.dim]);
            let variances = c.variances.clone().unwrap_or_else(|| vec![1.0; mean.len()]);
            if mean.len() != c.dim {
                return Err(Error::Dimension {
                    expected: c.dim,
                    got: mean.len(),
                });
            }
            let g = Arc::new(Gaussian::new(mean.clone(), variances.clone())?);
            Ok(BuiltTarget {
                id: "gaussian",
                density: g.clone(),
                grad: Some(g),
                potential: Some(PotentialTarget::base_only(GaussianBasis::new(
                    variances, mean,
                )?)),
                mixture: None,
            })
        }
        TargetConfig::MixtureGrid(c) => {
            let m = Arc::new(MixtureTarget::grid(c.k, c.dim, c.spacing)?);
            Ok(BuiltTarget {
                id: "mixture-grid",
                density: m.clone(),
                grad: Some(m.clone()),
                potential: None,
                mixture: Some(m),
            })
        }
        TargetConfig::ToyInverse(c) => {
            let prob = ToyInverseProblem {
                d: c.d,
                kappa: c.kappa,
                g: c.g.clone(),
                y: c.y,
                sigma_eta_sq: c.sigma_eta_sq,
                sigma_sq: c.sigma_sq,
                gamma: c.gamma,
            };
            prob.validate()?;
            let basis = toy_prior_basis(&prob);
            let shared = Arc::new(prob);
            let phi_prob = shared.clone();
            let phi =
                Arc::new(move |q: &[f64]| toy_potential(q, &phi_prob).unwrap_or(f64::INFINITY));
            Ok(BuiltTarget {
                id: "toy-inverse",
                density: shared,
                grad: None,
                potential: Some(PotentialTarget::new(phi, basis)),
                mixture: None,
            })
        }
        TargetConfig::Quartic(c) => {
            let basis = GaussianBasis::centered(decaying_variances(c.dim, c.sigma_sq, c.gamma))?;
            let q = Arc::new(Quartic {
                prior: basis.clone(),
            });
            let phi_q = q.clone();
            Ok(BuiltTarget {
                id: "quartic",
                density: q.clone(),
                grad: Some(q),
                potential: Some(PotentialTarget::new(
                    Arc::new(move |x: &[f64]| phi_q.potential(x)),
                    basis,
                )),
                mixture: None,
            })
        }
    }
}

fn wedge_or_barker(mode: WeightModeName, bar_alpha: &Option<Vec<f64>>, p: usize) -> WeightMode {
    match mode {
        WeightModeName::Barker => WeightMode::Barker,
        WeightModeName::Mh => match bar_alpha {
            Some(a) => WeightMode::MhWedge {
                bar_alpha: a.clone(),
            },
            None => WeightMode::uniform_wedge(p),
        },
    }
}

fn needs_potential(target: &BuiltTarget, sampler: &str) -> Result<PotentialTarget> {
    target.potential.clone().ok_or_else(|| {
        Error::Config(format!(
            "{sampler} needs a target with a Gaussian base measure; `{}` has none",
            target.id
        ))
    })
}

fn hamiltonian(
    target: &BuiltTarget,
    mass: &Option<Vec<f64>>,
    delta: f64,
) -> Result<HamiltonianSystem> {
    let grad = target.grad.clone().ok_or_else(|| {
        Error::Config(format!(
            "HMC needs a target with a gradient; `{}` has none",
            target.id
        ))
    })?;
    let mass = mass.clone().unwrap_or_else(|| vec![1.0; target.dim()]);
    HamiltonianSystem::new(grad, mass, delta)
}

pub fn build_sampler(
    cfg: &SamplerConfig,
    target: &BuiltTarget,
) -> Result<Box<dyn MultiproposalSampler>> {
    Ok(match cfg {
        SamplerConfig::RwMulti(c) => {
            let r = match (c.proposal, &c.scales) {
                (ProposalName::Gaussian, Some(scales)) => RwProposalDensity::DiagonalGaussian {
                    scales: scales.clone(),
                },
                (_, Some(_)) => {
                    return Err(Error::Config(
                        "per-coordinate scales need the gaussian proposal".into(),
                    ))
                }
                (ProposalName::Gaussian, None) => {
                    RwProposalDensity::IsotropicGaussian { scale: c.scale }
                }
                (ProposalName::Uniform, None) => RwProposalDensity::UniformBox {
                    half_width: c.scale,
                },
                (ProposalName::Exponential, None) => RwProposalDensity::ShiftedExponential {
                    rate: 1.0 / c.scale,
                    shift: c.scale,
                },
                (ProposalName::PointMass, None) => RwProposalDensity::PointMass,
            };
            let variant =
                match c.variant {
                    RwVariantName::Conditional => RwVariant::ConditionallyIndependent(
                        wedge_or_barker(c.weight_mode, &c.bar_alpha, c.p),
                    ),
                    RwVariantName::Naive => {
                        if c.weight_mode != WeightModeName::Barker {
                            return Err(Error::Config(
                                "the naive variant only supports barker weights".into(),
                            ));
                        }
                        RwVariant::NaiveIndependent
                    }
                };
            Box::new(RwMulti::new(target.density.clone(), r, c.p, variant)?)
        }
        SamplerConfig::Mpcn(c) if c.classic => {
            if c.p != 1 || c.weight_mode != WeightModeName::Barker || c.bar_alpha.is_some() {
                return Err(Error::Config(
                    "classic pCN takes p = 1 and no weight settings".into(),
                ));
            }
            Box::new(Mpcn::classic(needs_potential(target, "mpcn")?, c.rho)?)
        }
        SamplerConfig::Mpcn(c) => {
            let s = Mpcn::new(needs_potential(target, "mpcn")?, c.rho, c.p)?;
            match wedge_or_barker(c.weight_mode, &c.bar_alpha, c.p) {
                WeightMode::Barker => Box::new(s),
                WeightMode::MhWedge { bar_alpha } => {
                    Box::new(s.with_experimental_wedge(bar_alpha)?)
                }
            }
        }
        SamplerConfig::MpcnResample(c) => Box::new(Mpcn::new(
            needs_potential(target, "mpcn-resample")?,
            c.rho,
            c.p,
        )?),
        SamplerConfig::Mhmc(c) => Box::new(Mhmc::new(
            hamiltonian(target, &c.mass, c.delta)?,
            c.p,
            c.bar_alpha.clone(),
        )?),
        SamplerConfig::MhmcResample(c) => {
            let weights = match c.weight_mode {
                WeightModeName::Barker => ResampleWeights::Barker,
                WeightModeName::Mh => ResampleWeights::Mh {
                    bar_alpha: c.bar_alpha.unwrap_or(1.0 / c.p as f64),
                },
            };
            Box::new(MhmcResample::new(
                hamiltonian(target, &c.mass, c.delta)?,
                c.p,
                weights,
            )?)
        }
        SamplerConfig::Simplicial(c) => {
            let law = match c.lambda_law {
                EdgeLawName::Constant => EdgeLengthLaw::Constant(c.lambda),
                EdgeLawName::Lognormal => EdgeLengthLaw::LogNormal {
                    mu: c.lambda.ln(),
                    sigma: c.lambda_sigma.unwrap_or(0.5),
                },
                EdgeLawName::Gamma => {
                    let shape = c.gamma_shape.unwrap_or(4.0);
                    EdgeLengthLaw::Gamma {
                        shape,
                        scale: c.lambda / shape,
                    }
                }
            };
            Box::new(Simplicial::new(
                target.density.clone(),
                c.p,
                law,
                wedge_or_barker(c.weight_mode, &c.bar_alpha, c.p),
            )?)
        }
    })
}
