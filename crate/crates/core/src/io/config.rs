//! JSON run configuration.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::diagnostics::InvariantTolerances;
use crate::error::{Error, Result};
use crate::params::{AreaGrid, ModelParams, OperatorMode};
use crate::selfsim::SelfSimInput;
use crate::stepper::StepperConfig;

use super::initial::InitialFamily;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub beta: f64,
    pub n0: usize,
    pub delta_a: f64,
    pub num_nodes: usize,
    #[serde(default)]
    pub mode: ModeName,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeName {
    #[default]
    Truncated,
    Full,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    /// Time between written snapshots; 0 writes only the first and last.
    pub snapshot_every: f64,
    pub time_series: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self {
            snapshot_every: 0.0,
            time_series: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DiagnosticsSection {
    pub invariants: bool,
    pub tightness: bool,
    pub bounds: bool,
    pub lewis: bool,
    /// Lattice size for the tightness envelopes.
    pub lattice: usize,
    /// Support radius of compactly supported data for the growth bound.
    pub support_radius: Option<f64>,
    pub tolerances: InvariantTolerances,
}

impl Default for DiagnosticsSection {
    fn default() -> Self {
        Self {
            invariants: true,
            tightness: false,
            bounds: false,
            lewis: false,
            lattice: 10,
            support_radius: None,
            tolerances: InvariantTolerances::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LadderSection {
    pub rungs: Vec<usize>,
    /// Classes compared in the hard convergence check.
    pub compare_up_to: usize,
}

impl Default for LadderSection {
    fn default() -> Self {
        Self {
            rungs: vec![10, 14, 18],
            compare_up_to: 8,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StabilitySection {
    pub deltas: Vec<f64>,
    /// Largest class carrying the random perturbation.
    pub max_class: usize,
    /// Area window for the perturbation bumps.
    pub a_lo: f64,
    pub a_hi: f64,
}

impl Default for StabilitySection {
    fn default() -> Self {
        Self {
            deltas: vec![1e-2, 1e-3],
            max_class: 10,
            a_lo: 0.5,
            a_hi: 3.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelSection,
    #[serde(default)]
    pub stepper: StepperConfig,
    pub t_final: f64,
    #[serde(default)]
    pub output: OutputSection,
    pub initial: InitialFamily,
    #[serde(default)]
    pub diagnostics: DiagnosticsSection,
    #[serde(default = "default_out_dir")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub ladder: LadderSection,
    #[serde(default)]
    pub selfsim: SelfSimInput,
    #[serde(default)]
    pub stability: StabilitySection,
}

fn default_out_dir() -> PathBuf {
    PathBuf::from("out")
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut cfg = Self::from_json(&text)?;
        // relative table paths are taken from the config's directory
        if let InitialFamily::CustomTable { path: table, .. } = &mut cfg.initial {
            if table.is_relative() {
                if let Some(dir) = path.parent() {
                    *table = dir.join(&*table);
                }
            }
        }
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    pub fn params(&self) -> Result<ModelParams> {
        let m = &self.model;
        let grid = AreaGrid::new(m.delta_a, m.num_nodes)?;
        let mut p = ModelParams::truncated(m.beta, m.n0, grid)?;
        if m.mode == ModeName::Full {
            p.mode = OperatorMode::Full;
        }
        Ok(p)
    }

    /// Check every section against its parameter invariants.
    pub fn validate(&self) -> Result<()> {
        let to_config = |e: Error| Error::Config(e.to_string());
        let params = self.params().map_err(to_config)?;
        self.stepper.validate(&params).map_err(to_config)?;
        if !(self.t_final >= 0.0) || !self.t_final.is_finite() {
            return Err(Error::Config(format!("t_final {} must be non-negative", self.t_final)));
        }
        let steps = self.t_final / self.stepper.dt;
        if (steps - steps.round()).abs() > 1e-9 * steps.max(1.0) {
            return Err(Error::Config(format!(
                "t_final {} is not a multiple of dt {}",
                self.t_final, self.stepper.dt
            )));
        }
        if self.output.snapshot_every < 0.0 {
            return Err(Error::Config("snapshot_every must be non-negative".into()));
        }
        if self.diagnostics.lattice == 0 {
            return Err(Error::Config("tightness lattice must have at least one point".into()));
        }
        let rungs = &self.ladder.rungs;
        if rungs.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("ladder rungs must be strictly increasing".into()));
        }
        for &r in rungs {
            params.with_n0(r).map_err(to_config)?;
        }
        self.selfsim.validate().map_err(to_config)?;
        let st = &self.stability;
        if st.deltas.iter().any(|&d| !(d > 0.0)) {
            return Err(Error::Config("stability deltas must be positive".into()));
        }
        if !(st.a_lo >= 0.0 && st.a_lo < st.a_hi) || st.max_class < 2 {
            return Err(Error::Config("stability perturbation window is empty".into()));
        }
        Ok(())
    }

    /// Stepper settings with sampling matched to the snapshot cadence and the
    /// tightness lattice.
    pub fn sampling_stepper(&self) -> StepperConfig {
        let mut s = self.stepper;
        let steps = (self.t_final / s.dt).round() as usize;
        let mut every = if self.output.snapshot_every > 0.0 {
            ((self.output.snapshot_every / s.dt).round() as usize).max(1)
        } else {
            steps.max(1)
        };
        if self.diagnostics.tightness && steps > 0 {
            let k = self.diagnostics.lattice;
            every = gcd(every, (steps / k.min(steps)).max(1));
        }
        s.sample_every = every;
        s
    }
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}
