//! Moments of a state and the coupling weight.

use serde::{Deserialize, Serialize};

use crate::collision::collision_into;
use crate::error::{Error, Result};
use crate::params::{ModelParams, OperatorMode, N_MIN};
use crate::quadrature::weight;
use crate::state::SimState;
use crate::supersolution::loss_rates;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentSet {
    /// N: number of grains.
    pub count: f64,
    /// A: covered area.
    pub area: f64,
    /// P = sum (n - 6) ∫ f_n, the polyhedral defect.
    pub defect: f64,
    /// M = sum n ∫ f_n.
    pub edge_moment: f64,
    /// R = 2(b+1) ∫ f_2 - n0 b ∫ f_n0 (the second term only in truncated mode).
    pub remainder: f64,
    pub gamma_n: f64,
    pub gamma_d: f64,
    /// Γ = Γ_N / Γ_D, or `None` when Γ_D <= 0.
    pub gamma: Option<f64>,
    pub edges: f64,
    pub facets: f64,
}

impl MomentSet {
    /// Γ with an undefined weight treated as zero flow.
    pub fn gamma_or_zero(&self) -> f64 {
        self.gamma.unwrap_or(0.0)
    }
}

/// `∫ f_n da` for every class, summed in node order.
pub fn class_integrals(state: &SimState, params: &ModelParams) -> Vec<f64> {
    let nc = state.n_classes();
    let nn = state.num_nodes();
    let mut out = vec![0.0; nc];
    for i in 0..nn {
        let w = weight(i, nn, params.grid.delta_a);
        for (o, f) in out.iter_mut().zip(state.column(i)) {
            *o += w * f;
        }
    }
    out
}

/// `Γ_N = sum_{n=2}^{5} (n - 6)^2 f_n(0)`.
pub fn gamma_numerator(state: &SimState) -> f64 {
    (N_MIN..=5).map(|n| ((6 - n) * (6 - n)) as f64 * state.get(n, 0)).sum()
}

/// `Γ_D` from the class integrals.
pub fn gamma_denominator(integrals: &[f64], params: &ModelParams) -> f64 {
    match params.mode {
        OperatorMode::Truncated => {
            let mut j = vec![0.0; integrals.len()];
            collision_into(integrals, params.beta, &loss_rates(params), &mut j);
            -j.iter().enumerate().map(|(k, v)| (k + N_MIN) as f64 * v).sum::<f64>()
        }
        OperatorMode::Full => {
            let m: f64 = integrals.iter().enumerate().map(|(k, v)| (k + N_MIN) as f64 * v).sum();
            m - 2.0 * (params.beta + 1.0) * integrals[0]
        }
    }
}

/// All moments, with Γ flagged invalid rather than raised when Γ_D <= 0.
pub fn evaluate_moments(state: &SimState, params: &ModelParams) -> MomentSet {
    let integrals = class_integrals(state, params);
    let nn = state.num_nodes();
    let mut area = 0.0;
    for i in 0..nn {
        let wa = weight(i, nn, params.grid.delta_a) * params.grid.node(i);
        area += wa * state.column(i).iter().sum::<f64>();
    }
    let count: f64 = integrals.iter().sum();
    let edge_moment: f64 = integrals.iter().enumerate().map(|(k, v)| (k + N_MIN) as f64 * v).sum();
    let defect: f64 = integrals
        .iter()
        .enumerate()
        .map(|(k, v)| ((k + N_MIN) as f64 - 6.0) * v)
        .sum();
    let b = params.beta;
    let remainder = match params.mode {
        OperatorMode::Truncated => 2.0 * (b + 1.0) * integrals[0] - params.n0 as f64 * b * integrals[integrals.len() - 1],
        OperatorMode::Full => 2.0 * (b + 1.0) * integrals[0],
    };
    let gamma_n = gamma_numerator(state);
    let gamma_d = gamma_denominator(&integrals, params);
    let gamma = (gamma_d > 0.0).then(|| gamma_n / gamma_d);
    MomentSet {
        count,
        area,
        defect,
        edge_moment,
        remainder,
        gamma_n,
        gamma_d,
        gamma,
        edges: edge_moment / 2.0,
        facets: count,
    }
}

/// All moments; a nonzero state with Γ_D <= 0 is a degenerate-weight error.
pub fn compute_moments(state: &SimState, params: &ModelParams) -> Result<MomentSet> {
    state.check_shape(params)?;
    let m = evaluate_moments(state, params);
    if m.gamma.is_none() && !state.is_zero() {
        return Err(Error::DegenerateWeight { gamma_d: m.gamma_d });
    }
    Ok(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::AreaGrid;
    use approx::assert_relative_eq;

    fn hexagon(p: &ModelParams) -> SimState {
        SimState::from_fn(p, |n, a| if n == 6 && a <= 1.0 + 1e-12 { 1.0 } else { 0.0 })
    }

    #[test]
    fn hexagons_on_unit_interval() {
        let p = ModelParams::truncated(1.0, 10, AreaGrid::covering(0.01, 1.0).unwrap()).unwrap();
        let m = compute_moments(&hexagon(&p), &p).unwrap();
        assert_relative_eq!(m.count, 1.0, max_relative = 1e-12);
        assert_relative_eq!(m.area, 0.5, max_relative = 1e-12);
        assert_eq!(m.defect, 0.0);
        assert_eq!(m.gamma_n, 0.0);
        assert_eq!(m.gamma, Some(0.0));
    }

    #[test]
    fn zero_state_flags_gamma() {
        let p = ModelParams::truncated(1.0, 10, AreaGrid::new(0.1, 11).unwrap()).unwrap();
        let m = compute_moments(&SimState::zeros(&p), &p).unwrap();
        assert_eq!(m.count, 0.0);
        assert_eq!(m.area, 0.0);
        assert!(m.gamma.is_none());
    }

    #[test]
    fn identity_and_lower_bound_on_balanced_state() {
        let p = ModelParams::truncated(1.0, 12, AreaGrid::new(0.1, 31).unwrap()).unwrap();
        // classes 5 and 7 with equal mass give P = 0
        let s = SimState::from_fn(&p, |n, a| match n {
            5 | 7 => a * (3.0 - a),
            _ => 0.0,
        });
        let m = compute_moments(&s, &p).unwrap();
        assert!(m.defect.abs() < 1e-14);
        assert_relative_eq!(m.gamma_d, 6.0 * m.count - m.remainder, max_relative = 1e-13);
        assert!(m.gamma_d >= 2.0 * m.count);
        assert_relative_eq!(m.gamma_d, m.edge_moment - m.remainder, max_relative = 1e-13);
    }

    #[test]
    fn boundary_values_enter_numerator() {
        let p = ModelParams::truncated(1.0, 10, AreaGrid::new(0.5, 4).unwrap()).unwrap();
        let s = SimState::from_fn(&p, |n, a| if a == 0.0 && n <= 5 { 1.0 } else { 0.0 });
        assert_eq!(gamma_numerator(&s), 16.0 + 9.0 + 4.0 + 1.0);
    }

    #[test]
    fn degenerate_weight_raises() {
        let p = ModelParams::truncated(1.9, 8, AreaGrid::new(0.5, 4).unwrap()).unwrap();
        // only lenses: Γ_D = 2N - 2(b+1)N < 0
        let s = SimState::from_fn(&p, |n, a| if n == 2 && a > 0.0 { 1.0 } else { 0.0 });
        assert!(matches!(compute_moments(&s, &p), Err(Error::DegenerateWeight { .. })));
    }
}
