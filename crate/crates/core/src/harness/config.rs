use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::diagnostics::Mode;
use crate::error::{invalid, Error, Result};
use crate::layer::CutoffProfile;
use crate::solver::Perturbation;

/// `coefficient * eps^exponent`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PowerRule {
    pub coefficient: f64,
    pub exponent: f64,
}

impl PowerRule {
    pub fn new(coefficient: f64, exponent: f64) -> Self {
        Self {
            coefficient,
            exponent,
        }
    }

    pub fn sqrt() -> Self {
        Self::new(1.0, 0.5)
    }

    pub fn zero() -> Self {
        Self::new(0.0, 1.0)
    }

    pub fn eval(&self, eps: f64) -> f64 {
        self.coefficient * eps.powf(self.exponent)
    }

    /// True when the rule vanishes as `eps -> 0`.
    pub fn vanishes(&self) -> bool {
        self.coefficient == 0.0 || self.exponent > 0.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GasSection {
    #[serde(default = "default_gamma")]
    pub gamma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ViscositySection {
    #[serde(default = "one")]
    pub mu: f64,
    #[serde(default)]
    pub eta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    #[serde(default = "one")]
    pub length_x: f64,
    #[serde(default = "default_nx")]
    pub nx: usize,
    #[serde(default = "default_ny")]
    pub ny: usize,
    /// Fixed wall-normal stretch; when absent each `eps` gets the
    /// resolution rule.
    #[serde(default)]
    pub stretch: Option<f64>,
    /// Rows required inside the strip by the resolution rule.
    #[serde(default = "default_strip_cells")]
    pub strip_cells: usize,
    /// Strip constant `c`.
    #[serde(default = "default_c")]
    pub c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReferenceSection {
    #[serde(default = "default_reference")]
    pub name: String,
    #[serde(default)]
    pub cutoff: CutoffProfile,
    #[serde(default)]
    pub perturbation: Perturbation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub mode: Mode,
    #[serde(default = "default_eps_list")]
    pub eps_list: Vec<f64>,
    #[serde(default = "PowerRule::sqrt")]
    pub beta: PowerRule,
    #[serde(default = "PowerRule::sqrt")]
    pub delta: PowerRule,
    #[serde(default = "default_t_final")]
    pub t_final: f64,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    #[serde(default = "default_cfl")]
    pub cfl: f64,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default)]
    pub dir: Option<PathBuf>,
    /// Write a snapshot every this many recorded samples; 0 disables.
    #[serde(default)]
    pub snapshot_every: usize,
}

/// The TOML configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    #[serde(default = "GasSection::default")]
    pub gas: GasSection,
    #[serde(default = "ViscositySection::default")]
    pub viscosity: ViscositySection,
    #[serde(default = "GridSection::default")]
    pub grid: GridSection,
    #[serde(default = "ReferenceSection::default")]
    pub reference: ReferenceSection,
    pub sweep: SweepSection,
    #[serde(default)]
    pub output: OutputSection,
}

fn default_gamma() -> f64 {
    5.0 / 3.0
}
fn one() -> f64 {
    1.0
}
fn default_nx() -> usize {
    64
}
fn default_ny() -> usize {
    128
}
fn default_strip_cells() -> usize {
    8
}
fn default_c() -> f64 {
    8.0
}
fn default_reference() -> String {
    "sine".into()
}
fn default_eps_list() -> Vec<f64> {
    DEFAULT_EPS_LIST.to_vec()
}
fn default_t_final() -> f64 {
    0.5
}
fn default_record_every() -> usize {
    10
}
fn default_cfl() -> f64 {
    crate::solver::DEFAULT_CFL
}

pub const DEFAULT_EPS_LIST: [f64; 5] = [1e-2, 5e-3, 2.5e-3, 1.25e-3, 6.25e-4];

impl Default for GasSection {
    fn default() -> Self {
        Self {
            gamma: default_gamma(),
        }
    }
}

impl Default for ViscositySection {
    fn default() -> Self {
        Self { mu: 1.0, eta: 0.0 }
    }
}

impl Default for GridSection {
    fn default() -> Self {
        Self {
            length_x: 1.0,
            nx: default_nx(),
            ny: default_ny(),
            stretch: None,
            strip_cells: default_strip_cells(),
            c: default_c(),
        }
    }
}

impl Default for ReferenceSection {
    fn default() -> Self {
        Self {
            name: default_reference(),
            cutoff: CutoffProfile::default(),
            perturbation: Perturbation::default(),
        }
    }
}

impl SweepSection {
    pub fn new(mode: Mode) -> Self {
        Self {
            mode,
            eps_list: default_eps_list(),
            beta: PowerRule::sqrt(),
            delta: PowerRule::sqrt(),
            t_final: default_t_final(),
            record_every: default_record_every(),
            cfl: default_cfl(),
            seed: 0,
        }
    }
}

impl Config {
    pub fn new(mode: Mode) -> Self {
        Self {
            gas: GasSection::default(),
            viscosity: ViscositySection::default(),
            grid: GridSection::default(),
            reference: ReferenceSection::default(),
            sweep: SweepSection::new(mode),
            output: OutputSection::default(),
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let s = &self.sweep;
        if s.eps_list.is_empty() {
            return Err(invalid("eps_list", "is empty"));
        }
        if s.eps_list.iter().any(|e| !(*e > 0.0 && e.is_finite())) {
            return Err(invalid("eps_list", "entries must be positive"));
        }
        if s.eps_list.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(invalid("eps_list", "must be strictly decreasing"));
        }
        if s.eps_list.len() > 1 {
            if !s.delta.vanishes() {
                return Err(invalid("delta", "must vanish as eps -> 0"));
            }
            if s.mode == Mode::Navier && !s.beta.vanishes() {
                return Err(invalid("beta", "must vanish as eps -> 0"));
            }
        }
        if !(s.t_final > 0.0) {
            return Err(invalid("t_final", format!("{} must be > 0", s.t_final)));
        }
        if !(s.cfl > 0.0 && s.cfl <= 1.0) {
            return Err(invalid("cfl", format!("{} must be in (0, 1]", s.cfl)));
        }
        if !(self.grid.c > 0.0) {
            return Err(invalid("c", format!("{} must be > 0", self.grid.c)));
        }
        if self.grid.nx < 1 || self.grid.ny < 4 {
            return Err(invalid("grid", "need nx >= 1 and ny >= 4"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn minimal_toml_gets_defaults() {
        let c = Config::from_toml("[sweep]\nmode = \"navier\"\n").unwrap();
        assert_eq!(c.sweep.eps_list, DEFAULT_EPS_LIST.to_vec());
        assert_eq!(c.grid.c, 8.0);
        assert_eq!(c.reference.cutoff, CutoffProfile::Quintic);
        let back = Config::from_toml(&c.to_toml().unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn rejects_bad_sequences() {
        let bad = "[sweep]\nmode = \"noslip\"\neps_list = [1e-3, 1e-2]\n";
        assert!(Config::from_toml(bad).is_err());
        let bad = "[sweep]\nmode = \"navier\"\nbeta = { coefficient = 1.0, exponent = 0.0 }\n";
        assert!(Config::from_toml(bad).is_err());
        assert!(Config::from_toml("[sweep]\nmode = \"sideways\"\n").is_err());
        assert!(Config::from_toml("[sweep]\nmode = \"navier\"\n[grid]\nbogus = 1\n").is_err());
    }
}
