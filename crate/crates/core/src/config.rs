use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Numerical tolerances used by checks and reports, in fs unless noted.
/// Any subset can be overridden from a JSON file.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub fixed_point_fs: f64,
    pub involution_fs: f64,
    pub delta_min_fs: f64,
    /// Slack of the η bound check in the simulator.
    pub bound_fs: f64,
    /// Slack of the derivative lower bound (dimensionless).
    pub g_derivative: f64,
    /// Up-time slack for oscillation classification.
    pub oscillation_fs: f64,
    /// Duty cycle slack (dimensionless).
    pub duty_cycle: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            fixed_point_fs: 1e-6,
            involution_fs: 1e-3,
            delta_min_fs: 1e-6,
            bound_fs: 1e-9,
            g_derivative: 1e-3,
            oscillation_fs: 0.1,
            duty_cycle: 1e-3,
        }
    }
}

impl Tolerances {
    pub fn validate(&self) -> Result<()> {
        let all = [
            ("fixed_point_fs", self.fixed_point_fs),
            ("involution_fs", self.involution_fs),
            ("delta_min_fs", self.delta_min_fs),
            ("bound_fs", self.bound_fs),
            ("g_derivative", self.g_derivative),
            ("oscillation_fs", self.oscillation_fs),
            ("duty_cycle", self.duty_cycle),
        ];
        match all.iter().find(|(_, v)| !(v.is_finite() && *v > 0.0)) {
            Some((name, v)) => Err(Error::invalid(format!("tolerance {name} must be positive, got {v}"))),
            None => Ok(()),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let t: Tolerances = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        t.validate()?;
        Ok(t)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(std::io::Error::new(e.kind(), format!("{}: {e}", path.display()))))?;
        Self::from_json(&text)
    }
}

/// Files and settings shared by the command-line subcommands.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectConfig {
    pub channels: Vec<PathBuf>,
    pub eta: Option<PathBuf>,
    pub netlist: Option<PathBuf>,
    pub out_dir: PathBuf,
    pub tolerances: Tolerances,
    pub seed: u64,
}

impl ProjectConfig {
    pub fn new(out_dir: impl Into<PathBuf>, seed: u64) -> Self {
        ProjectConfig {
            channels: Vec::new(),
            eta: None,
            netlist: None,
            out_dir: out_dir.into(),
            tolerances: Tolerances::default(),
            seed,
        }
    }

    /// Every referenced input file must exist.
    pub fn validate(&self) -> Result<()> {
        self.tolerances.validate()?;
        for p in self.channels.iter().chain(&self.eta).chain(&self.netlist) {
            if !p.is_file() {
                return Err(Error::Io(std::io::Error::new(
                    std::io::ErrorKind::NotFound,
                    format!("{}: no such file", p.display()),
                )));
            }
        }
        Ok(())
    }

    /// `name` inside the output directory.
    pub fn output(&self, name: &str) -> PathBuf {
        self.out_dir.join(name)
    }
}
