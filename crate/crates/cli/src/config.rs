//! Run configuration: TOML in, validated physical parameters out.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use ionramp::auxiliary_dynamics::EnergyCenter;
use ionramp::chain_model::{Chain, IonSpecies};
use ionramp::simplex::NelderMead;
use ionramp::sweep::{ProtocolFamily, SweepSettings};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("config {path} is not valid TOML: {message}")]
    Parse { path: PathBuf, message: String },
    #[error("{field}: {message}")]
    Invalid { field: &'static str, message: String },
}

fn invalid(field: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid {
        field,
        message: message.into(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub chain: ChainConfig,
    pub trap: TrapConfig,
    #[serde(default)]
    pub protocol: ProtocolConfig,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChainConfig {
    /// Species names in chain order, e.g. ["Be9", "Ca40"].
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub species: Option<Vec<String>>,
    /// Alternative to `species`: masses in atomic mass units.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub masses_amu: Option<Vec<f64>>,
    /// Common charge in units of e.
    #[serde(default = "one")]
    pub charge: u32,
}

fn one() -> u32 {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrapConfig {
    /// Initial axial frequency ω₀/2π in MHz.
    pub omega0_mhz: f64,
    /// γ² = ω₀/ω_f; above one expands, below one compresses.
    pub gamma_squared: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tf_us: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tf_list_us: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tf_sweep: Option<TfSweep>,
}

/// Evenly spaced final times, both ends included.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TfSweep {
    pub start_us: f64,
    pub stop_us: f64,
    pub points: usize,
}

impl TfSweep {
    pub fn values_us(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![self.start_us];
        }
        let step = (self.stop_us - self.start_us) / (self.points - 1) as f64;
        (0..self.points)
            .map(|k| {
                if k + 1 == self.points {
                    self.stop_us
                } else {
                    self.start_us + step * k as f64
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolKind {
    #[default]
    Shooting,
    Smoothstep,
    CosineAnsatz,
    Linear,
    Cosine,
    /// Frozen trap at ω₀ for the whole duration.
    Constant,
}

impl ProtocolKind {
    pub fn is_designed(self) -> bool {
        matches!(self, Self::Shooting | Self::Smoothstep | Self::CosineAnsatz)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum EnergyCenterConfig {
    #[default]
    Initial,
    Instantaneous,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProtocolConfig {
    #[serde(default)]
    pub kind: ProtocolKind,
    /// Polynomial order of the shooting ansatz (free parameters = order − 9).
    #[serde(default = "default_order")]
    pub order: usize,
    #[serde(default)]
    pub energy_center: EnergyCenterConfig,
}

fn default_order() -> usize {
    11
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        Self {
            kind: ProtocolKind::default(),
            order: default_order(),
            energy_center: EnergyCenterConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub initial_step: f64,
    pub xtol: f64,
    pub ftol: f64,
    pub max_iterations: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        let nm = NelderMead::default();
        Self {
            initial_step: nm.initial_step,
            xtol: nm.xtol,
            ftol: nm.ftol,
            max_iterations: nm.max_iterations,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub dir: PathBuf,
    /// Rows in protocol and trajectory CSVs.
    pub samples: usize,
    /// Grid size used by `reproduce` when the config has no final-time list.
    pub sweep_points: usize,
    /// Reserved; every stage of the pipeline is deterministic.
    pub seed: u64,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            dir: PathBuf::from("out"),
            samples: 400,
            sweep_points: 12,
            seed: 0,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text).map_err(|e| match e {
            ConfigError::Parse { message, .. } => ConfigError::Parse {
                path: path.to_path_buf(),
                message,
            },
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: PathBuf::from("<input>"),
            message: e.to_string(),
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    /// SHA-256 of the canonical serialization, hex encoded.
    pub fn hash(&self) -> String {
        hex::encode(Sha256::digest(self.to_toml().as_bytes()))
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.chain()?;
        let t = &self.trap;
        positive("trap.omega0_mhz", t.omega0_mhz)?;
        positive("trap.gamma_squared", t.gamma_squared)?;
        if t.gamma_squared == 1.0 {
            return Err(invalid("trap.gamma_squared", "must differ from 1 (no ramp to design)"));
        }
        let lists = [t.tf_list_us.is_some(), t.tf_sweep.is_some()];
        if lists.iter().filter(|x| **x).count() > 1 {
            return Err(invalid("trap", "give at most one of tf_list_us and tf_sweep"));
        }
        if let Some(tf) = t.tf_us {
            positive("trap.tf_us", tf)?;
        }
        if let Some(list) = &t.tf_list_us {
            check_tf_list("trap.tf_list_us", list)?;
        }
        if let Some(s) = &t.tf_sweep {
            if s.points == 0 {
                return Err(invalid("trap.tf_sweep.points", "must be at least 1"));
            }
            positive("trap.tf_sweep.start_us", s.start_us)?;
            positive("trap.tf_sweep.stop_us", s.stop_us)?;
            if s.points > 1 && s.stop_us <= s.start_us {
                return Err(invalid("trap.tf_sweep", "stop_us must exceed start_us"));
            }
        }
        if !(9..=24).contains(&self.protocol.order) {
            return Err(invalid(
                "protocol.order",
                format!("must be between 9 and 24, got {}", self.protocol.order),
            ));
        }
        let o = &self.optimizer;
        positive("optimizer.initial_step", o.initial_step)?;
        positive("optimizer.xtol", o.xtol)?;
        positive("optimizer.ftol", o.ftol)?;
        if o.max_iterations == 0 {
            return Err(invalid("optimizer.max_iterations", "must be at least 1"));
        }
        if self.output.samples < 2 {
            return Err(invalid("output.samples", "must be at least 2"));
        }
        if self.output.sweep_points == 0 {
            return Err(invalid("output.sweep_points", "must be at least 1"));
        }
        Ok(())
    }

    pub fn chain(&self) -> Result<Chain, ConfigError> {
        let c = &self.chain;
        if c.charge == 0 {
            return Err(invalid("chain.charge", "must be at least 1"));
        }
        let species: Vec<IonSpecies> = match (&c.species, &c.masses_amu) {
            (Some(_), Some(_)) => return Err(invalid("chain", "give either species or masses_amu, not both")),
            (None, None) => {
                return Err(invalid(
                    "chain",
                    "give species (e.g. [\"Ca40\", \"Ca40\"]) or masses_amu",
                ))
            }
            (Some(names), None) => names
                .iter()
                .map(|n| {
                    let s = IonSpecies::by_name(n).ok_or_else(|| {
                        invalid(
                            "chain.species",
                            format!("unknown species {n:?}; known: Ca40, Be9 (or use masses_amu)"),
                        )
                    })?;
                    IonSpecies::from_amu(s.name(), s.mass_amu(), c.charge)
                        .map_err(|e| invalid("chain.species", e.to_string()))
                })
                .collect::<Result<_, _>>()?,
            (None, Some(masses)) => masses
                .iter()
                .enumerate()
                .map(|(i, m)| {
                    positive("chain.masses_amu", *m)?;
                    IonSpecies::from_amu(format!("m{}", i + 1), *m, c.charge)
                        .map_err(|e| invalid("chain.masses_amu", e.to_string()))
                })
                .collect::<Result<_, _>>()?,
        };
        if species.is_empty() {
            return Err(invalid("chain", "needs at least one ion"));
        }
        if species.len() > 32 {
            return Err(invalid(
                "chain",
                format!("at most 32 ions supported, got {}", species.len()),
            ));
        }
        Chain::new(species).map_err(|e| invalid("chain", e.to_string()))
    }

    /// ω₀ in rad/s.
    pub fn omega0(&self) -> f64 {
        2.0 * PI * self.trap.omega0_mhz * 1e6
    }

    /// The single final time (s) needed by design and verify.
    pub fn single_tf(&self) -> Result<f64, ConfigError> {
        self.trap
            .tf_us
            .map(|t| t * 1e-6)
            .ok_or_else(|| invalid("trap.tf_us", "this command needs a single final time"))
    }

    /// Final-time list (s) for sweeps, falling back to `tf_us` alone.
    pub fn tf_list(&self) -> Option<Vec<f64>> {
        let t = &self.trap;
        let us = if let Some(list) = &t.tf_list_us {
            list.clone()
        } else if let Some(s) = &t.tf_sweep {
            s.values_us()
        } else {
            vec![t.tf_us?]
        };
        Some(us.into_iter().map(|x| x * 1e-6).collect())
    }

    pub fn has_tf_grid(&self) -> bool {
        self.trap.tf_list_us.is_some() || self.trap.tf_sweep.is_some()
    }

    pub fn family(&self) -> Option<ProtocolFamily> {
        Some(match self.protocol.kind {
            ProtocolKind::Shooting => ProtocolFamily::Shooting {
                order: self.protocol.order,
            },
            ProtocolKind::Smoothstep => ProtocolFamily::Smoothstep,
            ProtocolKind::CosineAnsatz => ProtocolFamily::CosineAnsatz,
            ProtocolKind::Linear => ProtocolFamily::Linear,
            ProtocolKind::Cosine => ProtocolFamily::Cosine,
            ProtocolKind::Constant => return None,
        })
    }

    pub fn optimizer(&self) -> NelderMead {
        let o = &self.optimizer;
        NelderMead {
            initial_step: o.initial_step,
            xtol: o.xtol,
            ftol: o.ftol,
            max_iterations: o.max_iterations,
        }
    }

    pub fn center(&self) -> EnergyCenter {
        match self.protocol.energy_center {
            EnergyCenterConfig::Initial => EnergyCenter::InitialFrequency,
            EnergyCenterConfig::Instantaneous => EnergyCenter::InstantaneousFrequency,
        }
    }

    pub fn sweep_settings(&self) -> SweepSettings {
        SweepSettings {
            optimizer: self.optimizer(),
            center: self.center(),
            ..SweepSettings::new(self.omega0(), self.trap.gamma_squared)
        }
    }
}

fn positive(field: &'static str, v: f64) -> Result<(), ConfigError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(invalid(field, format!("must be a positive finite number, got {v}")))
    }
}

fn check_tf_list(field: &'static str, list: &[f64]) -> Result<(), ConfigError> {
    if list.is_empty() {
        return Err(invalid(field, "must not be empty"));
    }
    for v in list {
        positive(field, *v)?;
    }
    if list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(invalid(field, "must be strictly ascending"));
    }
    Ok(())
}
