//! Experiment configuration: a TOML document with `[sampler]`, `[target]`
//! and `[run]` tables. Unknown keys are rejected.

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SAMPLER_IDS: [&str; 6] = [
    "rw-multi",
    "mpcn",
    "mpcn-resample",
    "mhmc",
    "mhmc-resample",
    "simplicial",
];

pub const TARGET_IDS: [&str; 4] = ["gaussian", "mixture-grid", "toy-inverse", "quartic"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightModeName {
    #[default]
    Barker,
    Mh,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProposalName {
    #[default]
    Gaussian,
    Uniform,
    Exponential,
    PointMass,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RwVariantName {
    #[default]
    Conditional,
    Naive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EdgeLawName {
    #[default]
    Constant,
    Lognormal,
    Gamma,
}

fn one() -> f64 {
    1.0
}

fn one_jump() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RwMultiParams {
    pub p: usize,
    /// Increment scale: standard deviation, box half-width, or exponential mean.
    #[serde(default = "one")]
    pub scale: f64,
    /// Per-coordinate standard deviations; selects a diagonal Gaussian.
    #[serde(default)]
    pub scales: Option<Vec<f64>>,
    #[serde(default)]
    pub proposal: ProposalName,
    #[serde(default)]
    pub variant: RwVariantName,
    #[serde(default)]
    pub weight_mode: WeightModeName,
    #[serde(default)]
    pub bar_alpha: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MpcnParams {
    pub p: usize,
    pub rho: f64,
    #[serde(default)]
    pub weight_mode: WeightModeName,
    #[serde(default)]
    pub bar_alpha: Option<Vec<f64>>,
    /// Traditional pCN with Metropolis acceptance; needs `p = 1`.
    #[serde(default)]
    pub classic: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MpcnResampleParams {
    pub p: usize,
    pub rho: f64,
    #[serde(default = "one_jump")]
    pub n_jumps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MhmcParams {
    pub p: usize,
    pub delta: f64,
    #[serde(default)]
    pub mass: Option<Vec<f64>>,
    #[serde(default)]
    pub bar_alpha: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MhmcResampleParams {
    pub p: usize,
    pub delta: f64,
    #[serde(default = "one_jump")]
    pub n_jumps: usize,
    #[serde(default)]
    pub mass: Option<Vec<f64>>,
    #[serde(default)]
    pub weight_mode: WeightModeName,
    /// Common MH weight; defaults to `1/p`.
    #[serde(default)]
    pub bar_alpha: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimplicialParams {
    pub p: usize,
    /// Edge length, or the median/mean of a random law.
    #[serde(default = "one")]
    pub lambda: f64,
    #[serde(default)]
    pub lambda_law: EdgeLawName,
    /// Log-scale spread of the log-normal law.
    #[serde(default)]
    pub lambda_sigma: Option<f64>,
    /// Shape of the gamma law; its mean is `lambda`.
    #[serde(default)]
    pub gamma_shape: Option<f64>,
    #[serde(default)]
    pub weight_mode: WeightModeName,
    #[serde(default)]
    pub bar_alpha: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "id", rename_all = "kebab-case")]
pub enum SamplerConfig {
    RwMulti(RwMultiParams),
    Mpcn(MpcnParams),
    MpcnResample(MpcnResampleParams),
    Mhmc(MhmcParams),
    MhmcResample(MhmcResampleParams),
    Simplicial(SimplicialParams),
}

impl SamplerConfig {
    pub fn id(&self) -> &'static str {
        match self {
            SamplerConfig::RwMulti(_) => "rw-multi",
            SamplerConfig::Mpcn(_) => "mpcn",
            SamplerConfig::MpcnResample(_) => "mpcn-resample",
            SamplerConfig::Mhmc(_) => "mhmc",
            SamplerConfig::MhmcResample(_) => "mhmc-resample",
            SamplerConfig::Simplicial(_) => "simplicial",
        }
    }

    /// Index jumps per cloud for resampling samplers.
    pub fn n_jumps(&self) -> Option<usize> {
        match self {
            SamplerConfig::MpcnResample(p) => Some(p.n_jumps),
            SamplerConfig::MhmcResample(p) => Some(p.n_jumps),
            _ => None,
        }
    }

    pub fn p(&self) -> usize {
        match self {
            SamplerConfig::RwMulti(c) => c.p,
            SamplerConfig::Mpcn(c) => c.p,
            SamplerConfig::MpcnResample(c) => c.p,
            SamplerConfig::Mhmc(c) => c.p,
            SamplerConfig::MhmcResample(c) => c.p,
            SamplerConfig::Simplicial(c) => c.p,
        }
    }
}

fn two() -> usize {
    2
}

fn ten() -> usize {
    10
}

fn spacing() -> f64 {
    10.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianParams {
    #[serde(default = "two")]
    pub dim: usize,
    #[serde(default)]
    pub mean: Option<Vec<f64>>,
    #[serde(default)]
    pub variances: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MixtureGridParams {
    #[serde(default = "ten")]
    pub k: usize,
    #[serde(default = "two")]
    pub dim: usize,
    #[serde(default = "spacing")]
    pub spacing: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ToyInverseParams {
    pub d: usize,
    pub kappa: f64,
    pub g: Vec<f64>,
    pub y: [f64; 2],
    pub sigma_eta_sq: f64,
    pub sigma_sq: f64,
    pub gamma: f64,
}

impl Default for ToyInverseParams {
    fn default() -> Self {
        let t = crate::targets::ToyInverseProblem::default();
        ToyInverseParams {
            d: t.d,
            kappa: t.kappa,
            g: t.g,
            y: t.y,
            sigma_eta_sq: t.sigma_eta_sq,
            sigma_sq: t.sigma_sq,
            gamma: t.gamma,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuarticParams {
    #[serde(default = "two")]
    pub dim: usize,
    /// Prior variances are `sigma_sq · k^(-gamma)`.
    #[serde(default = "one")]
    pub sigma_sq: f64,
    #[serde(default)]
    pub gamma: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "id", rename_all = "kebab-case")]
pub enum TargetConfig {
    Gaussian(GaussianParams),
    MixtureGrid(MixtureGridParams),
    ToyInverse(ToyInverseParams),
    Quartic(QuarticParams),
}

impl TargetConfig {
    pub fn id(&self) -> &'static str {
        match self {
            TargetConfig::Gaussian(_) => "gaussian",
            TargetConfig::MixtureGrid(_) => "mixture-grid",
            TargetConfig::ToyInverse(_) => "toy-inverse",
            TargetConfig::Quartic(_) => "quartic",
        }
    }
}

fn one_u() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Outer iterations (clouds) per chain.
    pub n_iters: usize,
    #[serde(default = "one_u")]
    pub n_chains: usize,
    #[serde(default)]
    pub seed: u64,
    /// Worker threads; 0 picks the number of cores.
    #[serde(default)]
    pub workers: usize,
    /// Keep every `thin`-th recorded state in chain files.
    #[serde(default = "one_u")]
    pub thin: usize,
    #[serde(default)]
    pub out_dir: Option<String>,
    /// Initial state; the origin (or the first mixture center) by default.
    #[serde(default)]
    pub init: Option<Vec<f64>>,
}

/// A validated experiment.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub sampler: SamplerConfig,
    pub target: TargetConfig,
    pub run: RunConfig,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    sampler: toml::Table,
    target: toml::Table,
    run: toml::Table,
}

fn take_id(table: &mut toml::Table, section: &str) -> Result<String> {
    match table.remove("id") {
        Some(toml::Value::String(s)) => Ok(s),
        Some(other) => Err(Error::Parse(format!(
            "[{section}] id must be a string, got {other}"
        ))),
        None => Err(Error::Parse(format!("[{section}] is missing `id`"))),
    }
}

fn typed<T: DeserializeOwned>(table: toml::Table, section: &str) -> Result<T> {
    T::deserialize(toml::Value::Table(table))
        .map_err(|e| Error::Parse(format!("[{section}] {}", e.message())))
}

/// Parses and validates a configuration document.
pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| {
        let at = e
            .span()
            .map(|s| {
                let line = text[..s.start].matches('\n').count() + 1;
                format!(" at line {line}")
            })
            .unwrap_or_default();
        Error::Parse(format!("{}{at}", e.message()))
    })?;
    let RawConfig {
        mut sampler,
        mut target,
        run,
    } = raw;

    let sampler_id = take_id(&mut sampler, "sampler")?;
    if !SAMPLER_IDS.contains(&sampler_id.as_str()) {
        return Err(Error::UnknownSampler(sampler_id));
    }
    let target_id = take_id(&mut target, "target")?;
    if !TARGET_IDS.contains(&target_id.as_str()) {
        return Err(Error::UnknownTarget(target_id));
    }

    let sampler = match sampler_id.as_str() {
        "rw-multi" => SamplerConfig::RwMulti(typed(sampler, "sampler")?),
        "mpcn" => SamplerConfig::Mpcn(typed(sampler, "sampler")?),
        "mpcn-resample" => SamplerConfig::MpcnResample(typed(sampler, "sampler")?),
        "mhmc" => SamplerConfig::Mhmc(typed(sampler, "sampler")?),
        "mhmc-resample" => SamplerConfig::MhmcResample(typed(sampler, "sampler")?),
        _ => SamplerConfig::Simplicial(typed(sampler, "sampler")?),
    };
    let target = match target_id.as_str() {
        "gaussian" => TargetConfig::Gaussian(typed(target, "target")?),
        "mixture-grid" => TargetConfig::MixtureGrid(typed(target, "target")?),
        "toy-inverse" => TargetConfig::ToyInverse(typed(target, "target")?),
        _ => TargetConfig::Quartic(typed(target, "target")?),
    };
    let run: RunConfig = typed(run, "run")?;
    let config = ExperimentConfig {
        sampler,
        target,
        run,
    };
    config.validate()?;
    Ok(config)
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.run.n_iters < 1 {
            return Err(Error::Config("n_iters must be at least 1".into()));
        }
        if self.run.n_chains < 1 {
            return Err(Error::Config("n_chains must be at least 1".into()));
        }
        if self.run.thin < 1 {
            return Err(Error::Config("thin must be at least 1".into()));
        }
        if self.sampler.p() < 1 {
            return Err(Error::Config("p must be at least 1".into()));
        }
        if self.sampler.n_jumps() == Some(0) {
            return Err(Error::Config("n_jumps must be at least 1".into()));
        }
        Ok(())
    }

    /// Serializes back to TOML.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configs serialize to TOML")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
[sampler]
id = "mpcn"
p = 8
rho = 0.5

[target]
id = "gaussian"

[run]
n_iters = 100
"#;

    #[test]
    fn minimal_config() {
        let c = parse_config(MINIMAL).unwrap();
        assert_eq!(c.sampler.id(), "mpcn");
        assert_eq!(c.target.id(), "gaussian");
        assert_eq!(c.run.n_iters, 100);
        assert_eq!(c.run.n_chains, 1);
        assert_eq!(c.run.thin, 1);
    }

    #[test]
    fn unknown_ids() {
        let bad = MINIMAL.replace("\"mpcn\"", "\"mpnc\"");
        assert_eq!(
            parse_config(&bad),
            Err(Error::UnknownSampler("mpnc".into()))
        );
        let bad = MINIMAL.replace("\"gaussian\"", "\"gauss\"");
        assert_eq!(
            parse_config(&bad),
            Err(Error::UnknownTarget("gauss".into()))
        );
    }

    #[test]
    fn negative_iterations() {
        let bad = MINIMAL.replace("n_iters = 100", "n_iters = -5");
        assert!(matches!(parse_config(&bad), Err(Error::Parse(_))));
    }

    #[test]
    fn unknown_keys_rejected() {
        let bad = MINIMAL.replace("rho = 0.5", "rho = 0.5\nrh0 = 0.1");
        let err = parse_config(&bad).unwrap_err();
        assert!(
            matches!(&err, Error::Parse(m) if m.contains("rh0")),
            "{err}"
        );
        let bad = format!("{MINIMAL}\n[extra]\nx = 1\n");
        assert!(matches!(parse_config(&bad), Err(Error::Parse(_))));
        let bad = MINIMAL.replace("n_iters = 100", "n_iters = 100\nworkerz = 2");
        assert!(matches!(parse_config(&bad), Err(Error::Parse(_))));
    }

    #[test]
    fn syntax_errors_carry_a_line() {
        let bad = MINIMAL.replace("p = 8", "p = = 8");
        let err = parse_config(&bad).unwrap_err();
        assert!(
            matches!(&err, Error::Parse(m) if m.contains("line 4")),
            "{err}"
        );
    }

    #[test]
    fn zero_iterations_rejected() {
        let bad = MINIMAL.replace("n_iters = 100", "n_iters = 0");
        assert!(parse_config(&bad).unwrap_err().is_config_error());
    }

    #[test]
    fn round_trips_through_toml() {
        let text = r#"
[sampler]
id = "mhmc-resample"
p = 5
delta = 0.2
n_jumps = 4
weight_mode = "mh"

[target]
id = "toy-inverse"

[run]
n_iters = 10
n_chains = 2
seed = 9
"#;
        let c = parse_config(text).unwrap();
        assert_eq!(c.sampler.n_jumps(), Some(4));
        match &c.target {
            TargetConfig::ToyInverse(t) => assert_eq!(t.kappa, 0.1),
            other => panic!("{other:?}"),
        }
        assert_eq!(parse_config(&c.to_toml()).unwrap(), c);
    }
}
