//! Chain quality metrics: move rate, autocorrelation, effective sample size,
//! Kolmogorov–Smirnov distances and split-R̂.

use std::str::FromStr;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::ChainRecord;

/// A scalar functional of a chain, one value per recorded state.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ScalarSeries(pub Vec<f64>);

impl ScalarSeries {
    pub fn from_record(record: &ChainRecord, estimand: Estimand) -> Result<Self> {
        if let Estimand::Coord(k) = estimand {
            if k >= record.dim() {
                return Err(Error::Dimension {
                    expected: record.dim(),
                    got: k + 1,
                });
            }
        }
        Ok(ScalarSeries(
            record.samples.iter().map(|s| estimand.eval(s)).collect(),
        ))
    }

    pub fn values(&self) -> &[f64] {
        &self.0
    }
}

impl std::ops::Deref for ScalarSeries {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

/// Scalar observable of a state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Estimand {
    /// Squared Euclidean norm `‖q‖²`.
    #[default]
    Norm2,
    Coord(usize),
}

impl Estimand {
    pub fn eval(&self, q: &[f64]) -> f64 {
        match self {
            Estimand::Norm2 => q.iter().map(|x| x * x).sum(),
            Estimand::Coord(k) => q[*k],
        }
    }
}

impl FromStr for Estimand {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "norm2" {
            return Ok(Estimand::Norm2);
        }
        s.strip_prefix("coord:")
            .and_then(|k| k.parse().ok())
            .map(Estimand::Coord)
            .ok_or_else(|| Error::Parse(format!("unknown estimand {s:?}; use norm2 or coord:<k>")))
    }
}

impl std::fmt::Display for Estimand {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Estimand::Norm2 => write!(f, "norm2"),
            Estimand::Coord(k) => write!(f, "coord:{k}"),
        }
    }
}

/// Fraction of iterations whose selected state differs from the occupied one.
pub fn move_rate(record: &ChainRecord) -> Result<f64> {
    if record.moved_flags.is_empty() {
        return Err(Error::EmptyChain);
    }
    let moved = record.moved_flags.iter().filter(|m| **m).count();
    Ok(moved as f64 / record.moved_flags.len() as f64)
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Biased autocovariance at lags `0..n`, computed by zero-padded FFT.
fn autocovariance(series: &[f64]) -> Vec<f64> {
    let n = series.len();
    let m = mean(series);
    let size = (2 * n).next_power_of_two();
    let mut buf: Vec<Complex<f64>> = series
        .iter()
        .map(|x| Complex::new(x - m, 0.0))
        .chain(std::iter::repeat(Complex::new(0.0, 0.0)))
        .take(size)
        .collect();
    let mut planner = FftPlanner::new();
    planner.plan_fft_forward(size).process(&mut buf);
    for c in buf.iter_mut() {
        *c = Complex::new(c.norm_sqr(), 0.0);
    }
    planner.plan_fft_inverse(size).process(&mut buf);
    // rustfft leaves the inverse unnormalized
    let scale = 1.0 / (size as f64 * n as f64);
    buf.iter().take(n).map(|c| c.re * scale).collect()
}

/// Autocorrelation at lags `0..=max_lag`, relative to the lag-0 variance, so
/// lag 0 is exactly 1. Values are clamped to `[-1, 1]`.
pub fn autocorrelation(series: &[f64], max_lag: usize) -> Result<Vec<f64>> {
    if series.is_empty() {
        return Err(Error::EmptyChain);
    }
    if max_lag >= series.len() {
        return Err(Error::ShapeMismatch(format!(
            "lag {max_lag} needs more than {} values",
            series.len()
        )));
    }
    let acov = autocovariance(series);
    if acov[0].is_nan() || acov[0] <= 0.0 {
        return Err(Error::ZeroVariance);
    }
    let n = series.len() as f64;
    // each lag is averaged over its own number of pairs
    let mut rho: Vec<f64> = acov[..=max_lag]
        .iter()
        .enumerate()
        .map(|(k, c)| (c * n / (n - k as f64) / acov[0]).clamp(-1.0, 1.0))
        .collect();
    rho[0] = 1.0;
    Ok(rho)
}

/// Effective sample size `n / (1 + 2 Σ ρ_t)`.
///
/// The sum is truncated with Geyer's initial positive sequence: lag pairs
/// `ρ_{2t} + ρ_{2t+1}` are added while positive, and made monotone.
pub fn ess(series: &[f64]) -> Result<f64> {
    let n = series.len();
    if n < 2 {
        return Err(Error::EmptyChain);
    }
    let rho = autocorrelation(series, n - 1)?;
    let mut tau = -1.0;
    let mut prev = f64::INFINITY;
    let mut t = 0;
    while 2 * t + 1 < n {
        let pair = rho[2 * t] + rho[2 * t + 1];
        if pair <= 0.0 {
            break;
        }
        let pair = pair.min(prev);
        tau += 2.0 * pair;
        prev = pair;
        t += 1;
    }
    // guards the degenerate strongly anticorrelated case
    let tau = tau.max(1.0 / (n as f64).log10().max(1.0));
    Ok(n as f64 / tau)
}

/// Sup distance between the empirical CDF of `samples` and a continuous
/// reference CDF.
pub fn ks_distance<F: Fn(f64) -> f64>(samples: &[f64], cdf: F) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::EmptyChain);
    }
    if samples.iter().any(|x| x.is_nan()) {
        return Err(Error::Parse("NaN in KS sample".into()));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    let mut d = 0.0f64;
    let mut i = 0;
    while i < sorted.len() {
        let x = sorted[i];
        let mut j = i;
        while j < sorted.len() && sorted[j] == x {
            j += 1;
        }
        let f = cdf(x);
        d = d
            .max((j as f64 / n - f).abs())
            .max((f - i as f64 / n).abs());
        i = j;
    }
    Ok(d)
}

/// Two-sample Kolmogorov–Smirnov statistic.
pub fn ks_two_sample(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::EmptyChain);
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0f64;
    while i < a.len() || j < b.len() {
        let x = match (a.get(i), b.get(j)) {
            (Some(x), Some(y)) => x.min(*y),
            (Some(x), None) => *x,
            (None, Some(y)) => *y,
            (None, None) => unreachable!(),
        };
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(d)
}

/// 1% critical value of the one-sample KS statistic at sample size `n`.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.63 / (n as f64).sqrt()
}

/// Split-R̂ over at least two chains of equal length ≥ 4.
pub fn rhat(chains: &[Vec<f64>]) -> Result<f64> {
    if chains.len() < 2 {
        return Err(Error::ShapeMismatch(format!(
            "R-hat needs at least 2 chains, got {}",
            chains.len()
        )));
    }
    let len = chains[0].len();
    if len < 4 || chains.iter().any(|c| c.len() != len) {
        return Err(Error::ShapeMismatch(
            "R-hat needs chains of equal length of at least 4".into(),
        ));
    }
    let half = len / 2;
    let halves: Vec<&[f64]> = chains
        .iter()
        .flat_map(|c| [&c[..half], &c[len - half..]])
        .collect();
    let m = halves.len() as f64;
    let n = half as f64;
    let means: Vec<f64> = halves.iter().map(|h| mean(h)).collect();
    let grand = mean(&means);
    let b = n / (m - 1.0) * means.iter().map(|x| (x - grand).powi(2)).sum::<f64>();
    let w = halves
        .iter()
        .zip(&means)
        .map(|(h, mu)| h.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (n - 1.0))
        .sum::<f64>()
        / m;
    if w.is_nan() || w <= 0.0 {
        return Err(Error::ZeroVariance);
    }
    let var_plus = (n - 1.0) / n * w + b / n;
    Ok((var_plus / w).sqrt())
}

/// Cumulative averages `(x_1 + … + x_t) / t`.
pub fn running_mean(series: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    series
        .iter()
        .enumerate()
        .map(|(i, x)| {
            acc += x;
            acc / (i + 1) as f64
        })
        .collect()
}

/// Per-chain summary emitted in run reports.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiagnosticsSummary {
    pub estimand: String,
    pub iterations: usize,
    pub move_rate: f64,
    /// `None` when the estimand never changes.
    pub ess: Option<f64>,
    pub samples_per_effective_sample: Option<f64>,
    pub mean: f64,
    pub autocorr: Vec<(usize, f64)>,
    /// Running mean at up to 100 evenly spaced checkpoints, as `(index, value)`.
    pub running_mean: Vec<(usize, f64)>,
}

pub const DEFAULT_LAGS: [usize; 5] = [1, 5, 10, 50, 100];

/// Summarizes a chain for `estimand`. The initial state is excluded.
pub fn summarize(
    record: &ChainRecord,
    estimand: Estimand,
    lags: &[usize],
) -> Result<DiagnosticsSummary> {
    let rate = move_rate(record)?;
    let series = ScalarSeries::from_record(record, estimand)?;
    let values = &series[1..];
    let n = values.len();
    let ess = match ess(values) {
        Ok(e) => Some(e),
        Err(Error::ZeroVariance) if n >= 2 => None,
        Err(Error::EmptyChain) if n == 1 => None,
        Err(e) => return Err(e),
    };
    let autocorr = match ess {
        Some(_) => {
            let max = lags.iter().copied().filter(|l| *l < n).max().unwrap_or(0);
            let rho = autocorrelation(values, max)?;
            lags.iter()
                .filter(|l| **l < n)
                .map(|l| (*l, rho[*l]))
                .collect()
        }
        None => Vec::new(),
    };
    let trace = running_mean(values);
    let stride = n.div_ceil(100).max(1);
    let mut running: Vec<(usize, f64)> = (stride - 1..n)
        .step_by(stride)
        .map(|i| (i, trace[i]))
        .collect();
    if running.last().map(|(i, _)| *i) != Some(n - 1) {
        running.push((n - 1, trace[n - 1]));
    }
    Ok(DiagnosticsSummary {
        estimand: estimand.to_string(),
        iterations: n,
        move_rate: rate,
        ess,
        samples_per_effective_sample: ess.map(|e| n as f64 / e),
        mean: mean(values),
        autocorr,
        running_mean: running,
    })
}
