//! Model parameters and the area discretisation.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Smallest topological class carried by the model (lenses).
pub const N_MIN: usize = 2;

/// Uniform node grid `a_i = i * delta_a`, `i = 0..num_nodes`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AreaGrid {
    pub delta_a: f64,
    pub num_nodes: usize,
}

impl AreaGrid {
    pub fn new(delta_a: f64, num_nodes: usize) -> Result<Self> {
        if !(delta_a > 0.0 && delta_a.is_finite()) {
            return Err(Error::InvalidParams(format!("delta_a must be positive, got {delta_a}")));
        }
        if num_nodes < 2 {
            return Err(Error::InvalidParams(format!("need at least two nodes, got {num_nodes}")));
        }
        Ok(Self { delta_a, num_nodes })
    }

    /// Grid covering `[0, a_max]` with spacing `delta_a` (a_max rounded to the nearest node).
    pub fn covering(delta_a: f64, a_max: f64) -> Result<Self> {
        let cells = (a_max / delta_a).round() as usize;
        Self::new(delta_a, cells + 1)
    }

    #[inline]
    pub fn node(&self, i: usize) -> f64 {
        i as f64 * self.delta_a
    }

    pub fn a_max(&self) -> f64 {
        self.node(self.num_nodes - 1)
    }

    /// Number of whole cells in `dt`, or a step-size error when `dt` is off-lattice.
    pub fn cells_in(&self, dt: f64) -> Result<usize> {
        let ratio = dt / self.delta_a;
        let k = ratio.round();
        if !(dt > 0.0) || k < 1.0 || (ratio - k).abs() > 1e-9 * ratio.max(1.0) {
            return Err(Error::StepSize {
                dt,
                delta_a: self.delta_a,
            });
        }
        Ok(k as usize)
    }
}

/// Which convention the collision operator uses for its top class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum OperatorMode {
    /// Approximate system: top class `n0` has its own gain/loss rows.
    #[default]
    Truncated,
    /// Interior rows for every class up to a hard cap; the flux out of the
    /// cap is dropped and must be negligible.
    Full,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    pub beta: f64,
    pub n0: usize,
    pub grid: AreaGrid,
    #[serde(default)]
    pub mode: OperatorMode,
}

impl ModelParams {
    pub fn truncated(beta: f64, n0: usize, grid: AreaGrid) -> Result<Self> {
        let p = Self {
            beta,
            n0,
            grid,
            mode: OperatorMode::Truncated,
        };
        p.validate()?;
        Ok(p)
    }

    /// Untruncated convention with the cap chosen so that `phi_cap <= 1e-14`.
    pub fn full(beta: f64, grid: AreaGrid) -> Result<Self> {
        check_beta(beta)?;
        let mut cap = 8;
        while crate::supersolution::phi(beta, cap) > 1e-14 {
            cap += 1;
        }
        let p = Self {
            beta,
            n0: cap,
            grid,
            mode: OperatorMode::Full,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        check_beta(self.beta)?;
        if self.n0 < 8 {
            return Err(Error::InvalidParams(format!(
                "truncation level n0 must be at least 8, got {}",
                self.n0
            )));
        }
        AreaGrid::new(self.grid.delta_a, self.grid.num_nodes)?;
        Ok(())
    }

    /// Number of classes `2..=n0`.
    #[inline]
    pub fn n_classes(&self) -> usize {
        self.n0 - N_MIN + 1
    }

    /// Array index of class `n`.
    #[inline]
    pub fn idx(&self, n: usize) -> usize {
        debug_assert!((N_MIN..=self.n0).contains(&n));
        n - N_MIN
    }

    pub fn classes(&self) -> std::ops::RangeInclusive<usize> {
        N_MIN..=self.n0
    }

    /// Same model with a different truncation level.
    pub fn with_n0(&self, n0: usize) -> Result<Self> {
        let p = Self { n0, ..*self };
        p.validate()?;
        Ok(p)
    }

    pub fn with_grid(&self, grid: AreaGrid) -> Self {
        Self { grid, ..*self }
    }
}

fn check_beta(beta: f64) -> Result<()> {
    if beta > 0.0 && beta < 2.0 {
        Ok(())
    } else {
        Err(Error::InvalidParams(format!("beta must lie in (0, 2), got {beta}")))
    }
}
