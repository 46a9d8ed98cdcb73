//! TOML configuration with one table per subcommand, plus the bundled presets.
//!
//! Unknown keys are rejected. `--set section.key=value` overrides are applied
//! to the parsed document before it is turned into typed sections.

use serde::{Deserialize, Serialize};
use smcprice_core::asian::{AsianProblem, AsianSmcConfig, AsianTemperSchedule, BirthDeathRatio};
use smcprice_core::barrier::{BarrierModel, BarrierSpec, PotentialConfig};
use smcprice_core::models::{BnsParams, GbmParams, Interval};
use smcprice_core::smc::ResampleConfig;

use crate::error::{config_err, CliError, CliResult};

pub const PRESETS: &[(&str, &str)] = &[
    ("table1", include_str!("../presets/table1.toml")),
    ("fig2a", include_str!("../presets/fig2a.toml")),
    ("fig2b", include_str!("../presets/fig2b.toml")),
    ("greeks", include_str!("../presets/greeks.toml")),
    ("asian", include_str!("../presets/asian.toml")),
];

pub fn preset(name: &str) -> CliResult<&'static str> {
    PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| *text)
        .ok_or_else(|| {
            let names: Vec<&str> = PRESETS.iter().map(|p| p.0).collect();
            CliError::Config(format!("unknown preset {name:?}; available: {}", names.join(", ")))
        })
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub barrier: Option<BarrierSection>,
    pub asian: Option<AsianSection>,
    pub greeks: Option<GreeksSection>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BarrierMethod {
    Sis,
    Sir,
    Tempered,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PriceModel {
    Gbm,
    Bns,
}

fn one() -> u64 {
    1
}

fn infinity() -> f64 {
    f64::INFINITY
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BarrierSection {
    pub method: BarrierMethod,
    #[serde(default = "one")]
    pub seed: u64,
    pub reps: usize,
    pub particles: usize,
    pub m: usize,
    pub dt: f64,
    pub s0: f64,
    pub strike: f64,
    pub rate: f64,
    pub barrier_lo: f64,
    #[serde(default = "infinity")]
    pub barrier_hi: f64,
    #[serde(default = "gbm")]
    pub model: PriceModel,
    /// Black–Scholes volatility.
    #[serde(default)]
    pub sigma: f64,
    /// BNS drift, intensity and mean variance.
    #[serde(default)]
    pub mu: f64,
    #[serde(default)]
    pub lambda: f64,
    #[serde(default)]
    pub nu: f64,
    /// Resample when the ESS falls below this fraction of the particle count.
    #[serde(default = "half")]
    pub ess_fraction: f64,
    pub potential: Option<PotentialConfig>,
}

fn gbm() -> PriceModel {
    PriceModel::Gbm
}

impl BarrierSection {
    pub fn spec(&self) -> CliResult<BarrierSpec> {
        let iv = Interval::new(self.barrier_lo, self.barrier_hi)?;
        Ok(BarrierSpec::uniform(
            self.s0,
            self.strike,
            self.rate,
            iv,
            self.m,
            self.dt,
        )?)
    }

    pub fn model(&self) -> CliResult<BarrierModel> {
        Ok(match self.model {
            PriceModel::Gbm => BarrierModel::Gbm(GbmParams::new(self.rate, self.sigma, self.s0)?),
            PriceModel::Bns => BarrierModel::Bns(BnsParams::new(self.mu, self.lambda, self.nu, self.s0)?),
        })
    }

    pub fn resample(&self) -> ResampleConfig {
        ResampleConfig::systematic(self.ess_fraction * self.particles as f64)
    }

    pub fn potential(&self) -> PotentialConfig {
        self.potential.unwrap_or_else(PotentialConfig::none)
    }

    pub fn validate(&self) -> CliResult<()> {
        check_run(self.reps, self.particles)?;
        self.spec()?;
        self.model()?;
        self.resample().validate(self.particles)?;
        self.potential().validate(self.m)?;
        if self.method == BarrierMethod::Tempered && self.potential.is_none() {
            return config_err("the tempered method needs a [barrier.potential] table");
        }
        Ok(())
    }
}

fn check_run(reps: usize, particles: usize) -> CliResult<()> {
    if reps == 0 {
        return config_err("reps must be at least 1");
    }
    if particles == 0 {
        return config_err("particles must be at least 1");
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AsianMethod {
    Smc,
    Is,
}

fn half() -> f64 {
    0.5
}

fn sweeps() -> usize {
    2
}

fn bisection() -> usize {
    300
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AsianSection {
    pub method: AsianMethod,
    #[serde(default = "one")]
    pub seed: u64,
    pub reps: usize,
    /// Particle count of the SMC method.
    pub particles: usize,
    /// Sample count of the importance-sampling baseline.
    pub is_particles: usize,
    pub m: usize,
    pub dt: f64,
    pub s0: f64,
    pub strike: f64,
    #[serde(default)]
    pub rate: f64,
    pub mu: f64,
    pub lambda: f64,
    pub nu: f64,
    /// Initial variance state; defaults to `nu`.
    pub v0: Option<f64>,
    pub intro_step: usize,
    pub kappa0: f64,
    pub kappa_step: f64,
    /// Number of sampler temperatures after the path stage.
    pub p: usize,
    #[serde(default = "sweeps")]
    pub sweeps: usize,
    #[serde(default = "half")]
    pub ess_fraction: f64,
    #[serde(default)]
    pub birth_death: BirthDeathRatio,
    #[serde(default = "bisection")]
    pub max_bisection: usize,
}

impl AsianSection {
    pub fn problem(&self) -> CliResult<AsianProblem> {
        let mut params = BnsParams::new(self.mu, self.lambda, self.nu, self.s0)?;
        if let Some(v0) = self.v0 {
            params = params.with_v0(v0)?;
        }
        let pb = AsianProblem {
            params,
            strike: self.strike,
            m: self.m,
            dt: self.dt,
            rate: self.rate,
        };
        pb.validate()?;
        Ok(pb)
    }

    pub fn smc_config(&self) -> AsianSmcConfig {
        let stage1 = PotentialConfig {
            intro_step: self.intro_step,
            kappa0: self.kappa0,
            kappa_step: self.kappa_step,
        };
        AsianSmcConfig {
            n_particles: self.particles,
            schedule: AsianTemperSchedule::linear(stage1, self.m, self.p),
            sweeps: self.sweeps,
            ess_fraction: self.ess_fraction,
            birth_death: self.birth_death,
        }
    }

    pub fn validate(&self) -> CliResult<()> {
        check_run(self.reps, self.particles)?;
        check_run(self.reps, self.is_particles)?;
        if self.p == 0 {
            return config_err("p must be at least 1");
        }
        let pb = self.problem()?;
        self.smc_config().validate(&pb)?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GreeksSection {
    #[serde(default = "one")]
    pub seed: u64,
    pub reps: usize,
    pub particles: usize,
    pub m: usize,
    pub dt: f64,
    pub s0: f64,
    pub strike: f64,
    pub rate: f64,
    pub sigma: f64,
    pub barrier_lo: f64,
    #[serde(default = "infinity")]
    pub barrier_hi: f64,
    /// Particles per finite-difference price; 0 disables the oracle column.
    #[serde(default)]
    pub fd_particles: usize,
    /// Finite-difference step relative to `s0`.
    #[serde(default = "fd_step")]
    pub fd_rel_step: f64,
}

fn fd_step() -> f64 {
    0.01
}

impl GreeksSection {
    pub fn spec(&self) -> CliResult<BarrierSpec> {
        let iv = Interval::new(self.barrier_lo, self.barrier_hi)?;
        Ok(BarrierSpec::uniform(
            self.s0,
            self.strike,
            self.rate,
            iv,
            self.m,
            self.dt,
        )?)
    }

    pub fn params(&self) -> CliResult<GbmParams> {
        Ok(GbmParams::new(self.rate, self.sigma, self.s0)?)
    }

    pub fn validate(&self) -> CliResult<()> {
        check_run(self.reps, self.particles)?;
        self.spec()?;
        self.params()?;
        if self.fd_particles > 0 && !(self.fd_rel_step > 0.0) {
            return config_err("fd_rel_step must be positive");
        }
        Ok(())
    }
}

/// Parses TOML text and applies `section.key=value` overrides.
pub fn load(text: &str, overrides: &[String]) -> CliResult<Config> {
    let mut doc: toml::Table = text.parse().map_err(|e| CliError::Config(format!("{e}")))?;
    for item in overrides {
        apply_override(&mut doc, item)?;
    }
    toml::Value::Table(doc)
        .try_into()
        .map_err(|e: toml::de::Error| CliError::Config(e.message().to_string()))
}

fn apply_override(doc: &mut toml::Table, item: &str) -> CliResult<()> {
    let Some((path, raw)) = item.split_once('=') else {
        return config_err(format!("override {item:?} is not of the form key=value"));
    };
    let value = parse_value(raw.trim());
    let keys: Vec<&str> = path.trim().split('.').collect();
    let (last, parents) = keys.split_last().unwrap();
    let mut table = doc;
    for k in parents {
        let entry = table
            .entry(k.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        table = entry
            .as_table_mut()
            .ok_or_else(|| CliError::Config(format!("{k} in {path:?} is not a table")))?;
    }
    table.insert(last.to_string(), value);
    Ok(())
}

/// TOML literal if it parses as one, otherwise a bare string.
fn parse_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

/// Canonical TOML text of a configuration, used for hashing and re-runs.
pub fn canonical(cfg: &Config) -> CliResult<String> {
    toml::to_string(cfg).map_err(|e| CliError::Config(e.to_string()))
}
