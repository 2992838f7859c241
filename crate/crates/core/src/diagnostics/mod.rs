//! Verification layer: invariant checks, quasi-complements and tightness
//! envelopes, lower bounds on the grain count, energy distance and per-class
//! mean areas.

mod bounds;
mod energy;
mod lewis;
mod quasi;

pub use bounds::{gamma_cap_constant, grain_count_bounds, positivity_bound, support_radius, GrainBoundReport, GrainBoundSample};
pub use energy::{energy_distance, stability_experiment, EnergyGrowth};
pub use lewis::{default_window, lewis_means, LewisFit};
pub use quasi::{
    fit_exponential_tail, quasi_complement_first, quasi_complement_second, tightness_envelope, QuasiTable,
    RunoffEnvelope, TailFit, TightnessLattice, TightnessRecord, TightnessSample,
};

use serde::{Deserialize, Serialize};

use crate::params::ModelParams;
use crate::stepper::TrajectoryRecord;

/// Aggregated invariant measurements of one trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantReport {
    /// `max |A(t) - A(0)| / A(0)`.
    pub area_drift: f64,
    /// `max |P(t)| / M(0)`.
    pub defect_drift: f64,
    /// Steps where `N` grew by more than the tolerance.
    pub count_violations: usize,
    pub min_value: f64,
    /// `max ‖f(t)‖♭ / ‖g‖♭`.
    pub flat_ratio: f64,
    /// `min Γ_D(t) / N(t)` over times with `N > 0`.
    pub min_gamma_d_ratio: f64,
    /// `‖g‖♭`, the scale for the non-negativity tolerance.
    pub initial_flat_norm: f64,
    /// Required lower bound `6 - 2(β + 1)` on the Γ_D ratio.
    pub gamma_d_floor: f64,
}

/// Thresholds applied by [`InvariantReport::verdicts`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct InvariantTolerances {
    pub area: f64,
    pub defect: f64,
    /// Relative to `N(0)`.
    pub count: f64,
    /// Relative to `‖g‖♭`.
    pub negativity: f64,
    pub flat: f64,
}

impl Default for InvariantTolerances {
    fn default() -> Self {
        Self {
            area: 1e-6,
            defect: 1e-6,
            count: 1e-12,
            negativity: 1e-14,
            flat: 1e-10,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub value: f64,
    pub limit: f64,
    pub pass: bool,
}

impl InvariantReport {
    pub fn from_trajectory(rec: &TrajectoryRecord, params: &ModelParams, tol: &InvariantTolerances) -> Self {
        let m0 = rec.moments.first().copied().unwrap_or_else(|| {
            crate::moments::evaluate_moments(&crate::state::SimState::zeros(params), params)
        });
        let rel = |x: f64, s: f64| if s > 0.0 { x / s } else { x };
        let area_drift = rec
            .moments
            .iter()
            .map(|m| rel((m.area - m0.area).abs(), m0.area))
            .fold(0.0, f64::max);
        let defect_drift = rec
            .moments
            .iter()
            .map(|m| rel(m.defect.abs(), m0.edge_moment))
            .fold(0.0, f64::max);
        let count_violations = rec
            .moments
            .windows(2)
            .filter(|w| w[1].count > w[0].count + tol.count * m0.count)
            .count();
        let initial_flat_norm = rec.flat_norm.first().copied().unwrap_or(0.0);
        let flat_ratio = rec
            .flat_norm
            .iter()
            .map(|&f| if initial_flat_norm > 0.0 { f / initial_flat_norm } else { 0.0 })
            .fold(0.0, f64::max);
        let min_gamma_d_ratio = rec
            .moments
            .iter()
            .filter(|m| m.count > 0.0)
            .map(|m| m.gamma_d / m.count)
            .fold(f64::INFINITY, f64::min);
        Self {
            area_drift,
            defect_drift,
            count_violations,
            min_value: rec.min_value.iter().copied().fold(f64::INFINITY, f64::min),
            flat_ratio,
            min_gamma_d_ratio,
            initial_flat_norm,
            gamma_d_floor: 6.0 - 2.0 * (params.beta + 1.0),
        }
    }

    pub fn verdicts(&self, tol: &InvariantTolerances) -> Vec<Verdict> {
        let v = |name: &str, value: f64, limit: f64, pass: bool| Verdict {
            name: name.to_string(),
            value,
            limit,
            pass,
        };
        let neg = -tol.negativity * self.initial_flat_norm;
        vec![
            v("area drift", self.area_drift, tol.area, self.area_drift <= tol.area),
            v("defect drift", self.defect_drift, tol.defect, self.defect_drift <= tol.defect),
            v(
                "count monotonicity violations",
                self.count_violations as f64,
                0.0,
                self.count_violations == 0,
            ),
            v("min node value", self.min_value, neg, self.min_value >= neg),
            v("flat-norm ratio", self.flat_ratio, 1.0 + tol.flat, self.flat_ratio <= 1.0 + tol.flat),
            v(
                "min gamma_d / N",
                self.min_gamma_d_ratio,
                self.gamma_d_floor,
                // an empty state has no ratio to check
                !self.min_gamma_d_ratio.is_finite() || self.min_gamma_d_ratio >= self.gamma_d_floor * (1.0 - 1e-12),
            ),
        ]
    }

    pub fn all_pass(&self, tol: &InvariantTolerances) -> bool {
        self.verdicts(tol).iter().all(|v| v.pass)
    }
}
