//! Benchmark targets: Gaussians, grid mixtures of standard Gaussians, a
//! quartic potential, and the antisymmetric-matrix toy inverse problem.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::mpcn::GaussianBasis;

/// Unnormalized log-density of a target on R^N. Must be callable concurrently.
pub trait LogDensity: Send + Sync {
    fn dim(&self) -> usize;
    fn log_density(&self, x: &[f64]) -> f64;
}

/// Targets with an analytic gradient of the log-density.
pub trait GradLogDensity: LogDensity {
    fn grad_log_density(&self, x: &[f64], out: &mut [f64]);
}

fn log_sum_exp(values: impl Iterator<Item = f64>) -> f64 {
    let values: Vec<f64> = values.collect();
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + values.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Gaussian with diagonal covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct Gaussian {
    pub mean: Vec<f64>,
    pub variances: Vec<f64>,
}

impl Gaussian {
    pub fn new(mean: Vec<f64>, variances: Vec<f64>) -> Result<Self> {
        if mean.len() != variances.len() {
            return Err(Error::Dimension {
                expected: mean.len(),
                got: variances.len(),
            });
        }
        if variances.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Config("Gaussian variances must be positive".into()));
        }
        Ok(Gaussian { mean, variances })
    }

    pub fn standard(dim: usize) -> Self {
        Gaussian {
            mean: vec![0.0; dim],
            variances: vec![1.0; dim],
        }
    }
}

impl LogDensity for Gaussian {
    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        self.mean
            .iter()
            .zip(&self.variances)
            .zip(x)
            .map(|((m, v), xi)| -0.5 * ((xi - m).powi(2) / v + (2.0 * PI * v).ln()))
            .sum()
    }
}

impl GradLogDensity for Gaussian {
    fn grad_log_density(&self, x: &[f64], out: &mut [f64]) {
        for (((o, m), v), xi) in out.iter_mut().zip(&self.mean).zip(&self.variances).zip(x) {
            *o = -(xi - m) / v;
        }
    }
}

/// Equal-weight mixture of standard Gaussians.
#[derive(Debug, Clone, PartialEq)]
pub struct MixtureTarget {
    pub centers: Vec<Vec<f64>>,
}

impl MixtureTarget {
    pub fn new(centers: Vec<Vec<f64>>) -> Result<Self> {
        let dim = centers
            .first()
            .map(Vec::len)
            .ok_or_else(|| Error::Config("mixture needs at least one component".into()))?;
        if let Some(c) = centers.iter().find(|c| c.len() != dim) {
            return Err(Error::Dimension {
                expected: dim,
                got: c.len(),
            });
        }
        Ok(MixtureTarget { centers })
    }

    /// Components centered at `(s·i, …, s·i)` for `i = 0..k`.
    pub fn grid(k: usize, dim: usize, spacing: f64) -> Result<Self> {
        if k == 0 || dim == 0 {
            return Err(Error::Config("grid mixture needs k ≥ 1 and dim ≥ 1".into()));
        }
        Self::new((0..k).map(|i| vec![spacing * i as f64; dim]).collect())
    }

    pub fn num_components(&self) -> usize {
        self.centers.len()
    }

    fn component_log_terms(&self, x: &[f64]) -> impl Iterator<Item = f64> + '_ {
        let d = x.len() as f64;
        let log_weight = -(self.centers.len() as f64).ln();
        let norm = -0.5 * d * (2.0 * PI).ln();
        let x = x.to_vec();
        self.centers.iter().map(move |c| {
            let sq: f64 = c.iter().zip(&x).map(|(ci, xi)| (xi - ci).powi(2)).sum();
            log_weight + norm - 0.5 * sq
        })
    }

    /// Index of the nearest component center.
    pub fn nearest_component(&self, x: &[f64]) -> usize {
        self.centers
            .iter()
            .map(|c| c.iter().zip(x).map(|(a, b)| (a - b).powi(2)).sum::<f64>())
            .enumerate()
            .min_by(|a, b| a.1.total_cmp(&b.1))
            .map(|(i, _)| i)
            .unwrap_or(0)
    }
}

/// `log Σ_i (1/K) N(x; c_i, I)`.
pub fn mixture_log_density(x: &[f64], target: &MixtureTarget) -> f64 {
    log_sum_exp(target.component_log_terms(x))
}

impl LogDensity for MixtureTarget {
    fn dim(&self) -> usize {
        self.centers[0].len()
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        mixture_log_density(x, self)
    }
}

impl GradLogDensity for MixtureTarget {
    fn grad_log_density(&self, x: &[f64], out: &mut [f64]) {
        let terms: Vec<f64> = self.component_log_terms(x).collect();
        let total = log_sum_exp(terms.iter().copied());
        out.iter_mut().for_each(|o| *o = 0.0);
        for (c, t) in self.centers.iter().zip(&terms) {
            let r = (t - total).exp();
            for ((o, ci), xi) in out.iter_mut().zip(c).zip(x) {
                *o += r * (ci - xi);
            }
        }
    }
}

/// `exp(-Σ q_k^4)` times a diagonal Gaussian prior.
#[derive(Debug, Clone, PartialEq)]
pub struct Quartic {
    pub prior: GaussianBasis,
}

impl Quartic {
    pub fn potential(&self, q: &[f64]) -> f64 {
        q.iter().map(|x| x.powi(4)).sum()
    }
}

impl LogDensity for Quartic {
    fn dim(&self) -> usize {
        self.prior.dim()
    }

    fn log_density(&self, x: &[f64]) -> f64 {
        -self.potential(x) + self.prior.log_density(x)
    }
}

impl GradLogDensity for Quartic {
    fn grad_log_density(&self, x: &[f64], out: &mut [f64]) {
        for (((o, xi), m), v) in out
            .iter_mut()
            .zip(x)
            .zip(&self.prior.mean)
            .zip(&self.prior.eigenvalues)
        {
            *o = -4.0 * xi.powi(3) - (xi - m) / v;
        }
    }
}

/// Antisymmetric `d × d` matrix from its strict upper triangle, filled row-major.
pub fn build_antisymmetric(q: &[f64], d: usize) -> Result<DMatrix<f64>> {
    let m = d * d.saturating_sub(1) / 2;
    if q.len() != m {
        return Err(Error::Dimension {
            expected: m,
            got: q.len(),
        });
    }
    let mut a = DMatrix::zeros(d, d);
    let mut entries = q.iter();
    for i in 0..d {
        for j in i + 1..d {
            let v = *entries.next().expect("length checked above");
            a[(i, j)] = v;
            a[(j, i)] = -v;
        }
    }
    Ok(a)
}

/// Inverse problem `(A_q + κI)x = g` observed on `x_1, x_2` with Gaussian noise.
#[derive(Debug, Clone, PartialEq)]
pub struct ToyInverseProblem {
    pub d: usize,
    pub kappa: f64,
    pub g: Vec<f64>,
    pub y: [f64; 2],
    pub sigma_eta_sq: f64,
    pub sigma_sq: f64,
    pub gamma: f64,
}

impl Default for ToyInverseProblem {
    fn default() -> Self {
        ToyInverseProblem {
            d: 4,
            kappa: 0.1,
            g: vec![0.0, 0.0, 5.0, 2.0],
            y: [4.601, 18.021],
            sigma_eta_sq: 2.0,
            sigma_sq: 5.0,
            gamma: 1.5,
        }
    }
}

impl ToyInverseProblem {
    pub fn validate(&self) -> Result<()> {
        if self.d < 2 {
            return Err(Error::Config("toy problem needs d ≥ 2".into()));
        }
        if self.g.len() != self.d {
            return Err(Error::Dimension {
                expected: self.d,
                got: self.g.len(),
            });
        }
        if !(self.kappa > 0.0 && self.sigma_eta_sq > 0.0 && self.sigma_sq > 0.0 && self.gamma > 0.0)
        {
            return Err(Error::Config(
                "kappa, sigma_eta_sq, sigma_sq and gamma must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Number of free parameters, `d(d-1)/2`.
    pub fn param_dim(&self) -> usize {
        self.d * (self.d - 1) / 2
    }

    /// Solution `x = (A_q + κI)^{-1} g`.
    pub fn forward(&self, q: &[f64]) -> Result<DVector<f64>> {
        if q.iter().any(|x| !x.is_finite()) {
            return Err(Error::SolveFailure("non-finite parameter".into()));
        }
        let mut a = build_antisymmetric(q, self.d)?;
        for i in 0..self.d {
            a[(i, i)] += self.kappa;
        }
        let rhs = DVector::from_column_slice(&self.g);
        a.lu()
            .solve(&rhs)
            .ok_or_else(|| Error::SolveFailure("singular system".into()))
    }
}

/// Data misfit `((y1 - x1)^2 + (y2 - x2)^2) / (2 σ_η²)`.
pub fn toy_potential(q: &[f64], prob: &ToyInverseProblem) -> Result<f64> {
    let x = prob.forward(q)?;
    Ok(((prob.y[0] - x[0]).powi(2) + (prob.y[1] - x[1]).powi(2)) / (2.0 * prob.sigma_eta_sq))
}

/// Prior eigenvalues `σ² k^{-γ}`, `k = 1..=m`.
pub fn toy_prior_basis(prob: &ToyInverseProblem) -> GaussianBasis {
    let eigenvalues = (1..=prob.param_dim())
        .map(|k| prob.sigma_sq * (k as f64).powf(-prob.gamma))
        .collect();
    GaussianBasis::centered(eigenvalues).expect("positive by construction")
}

impl LogDensity for ToyInverseProblem {
    fn dim(&self) -> usize {
        self.param_dim()
    }

    /// Posterior log-density up to a constant; non-finite parameters map to −∞.
    fn log_density(&self, x: &[f64]) -> f64 {
        match toy_potential(x, self) {
            Ok(phi) => -phi + toy_prior_basis(self).log_density(x),
            Err(_) => f64::NEG_INFINITY,
        }
    }
}
