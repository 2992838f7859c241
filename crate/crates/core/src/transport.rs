//! Transport along characteristics: class `n` moves with speed `n - 6` in area.
//!
//! Time steps are whole multiples of the grid spacing, so the transport
//! semigroup acts as an exact index shift of `(n - 6) k` cells per class.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::params::{ModelParams, N_MIN};
use crate::state::SimState;
use crate::supersolution::loss_rates;

/// What crossed the domain ends during one transport step.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BoundaryOutflow {
    /// Per class: grains advected past `a = 0` (zero for `n >= 6`).
    pub outflow: Vec<f64>,
    /// Per class: `f_n(0)` before the step.
    pub boundary_values: Vec<f64>,
    /// Grains shifted past the last node (all classes).
    pub overflow: f64,
    /// Per class share of `overflow`.
    pub overflow_classes: Vec<f64>,
}

impl BoundaryOutflow {
    pub fn total_outflow(&self) -> f64 {
        self.outflow.iter().sum()
    }

    /// Accumulate another step into a running total.
    pub fn accumulate(&mut self, other: &BoundaryOutflow) {
        if self.outflow.len() < other.outflow.len() {
            self.outflow.resize(other.outflow.len(), 0.0);
        }
        for (a, b) in self.outflow.iter_mut().zip(&other.outflow) {
            *a += b;
        }
        if self.overflow_classes.len() < other.overflow_classes.len() {
            self.overflow_classes.resize(other.overflow_classes.len(), 0.0);
        }
        for (a, b) in self.overflow_classes.iter_mut().zip(&other.overflow_classes) {
            *a += b;
        }
        self.boundary_values = other.boundary_values.clone();
        self.overflow += other.overflow;
    }
}

/// Signed shift in cells for class `n` over `k` cells of time.
#[inline]
pub fn class_shift(n: usize, k: usize) -> isize {
    (n as isize - 6) * k as isize
}

/// Shift every class in place by `(n - 6) k` cells.
pub(crate) fn shift_cells(state: &mut SimState, k: usize, delta_a: f64, exec: Exec) -> BoundaryOutflow {
    let nc = state.n_classes();
    let nn = state.num_nodes();
    let last = nn - 1;
    let mut outflow = vec![0.0; nc];
    let boundary_values = state.column(0).to_vec();
    let mut over = vec![0.0; nc];

    for (c, out) in outflow.iter_mut().enumerate() {
        let s = class_shift(c + N_MIN, k);
        let m = s.unsigned_abs().min(last);
        if s == 0 || m == 0 {
            continue;
        }
        // trapezoid over the departed cells
        let (lo, hi) = if s < 0 { (0, m) } else { (last - m, last) };
        let mut acc = 0.5 * (state.get(c + N_MIN, lo) + state.get(c + N_MIN, hi));
        for i in lo + 1..hi {
            acc += state.get(c + N_MIN, i);
        }
        acc *= delta_a;
        if s.unsigned_abs() > last {
            // everything leaves
            acc = crate::quadrature::trapz_by(nn, delta_a, |i| state.get(c + N_MIN, i));
        }
        if s < 0 {
            *out = acc;
        } else {
            over[c] = acc;
        }
    }

    let src = state.clone();
    exec.for_each_chunk(state.as_mut_slice(), nc, |i, col| {
        for (c, v) in col.iter_mut().enumerate() {
            let s = class_shift(c + N_MIN, k);
            let j = i as isize - s;
            *v = if j >= 0 && (j as usize) < nn {
                src.column(j as usize)[c]
            } else {
                0.0
            };
        }
    });

    BoundaryOutflow {
        outflow,
        boundary_values,
        overflow: over.iter().sum(),
        overflow_classes: over,
    }
}

/// Exact transport over `dt`, which must be a whole number of cells.
pub fn shift_transport(state: &SimState, dt: f64, params: &ModelParams) -> Result<(SimState, BoundaryOutflow)> {
    state.check_shape(params)?;
    let k = params.grid.cells_in(dt)?;
    let mut out = state.clone();
    let flow = shift_cells(&mut out, k, params.grid.delta_a, Exec::Sequential);
    out.time = state.time + dt;
    Ok((out, flow))
}

/// Multiply class `n` by `exp(-u_n G)` in place.
pub(crate) fn relax(state: &mut SimState, u: &[f64], gamma_integral: f64, exec: Exec) {
    let decay: Vec<f64> = u.iter().map(|u| (-u * gamma_integral).exp()).collect();
    let nc = state.n_classes();
    exec.for_each_chunk(state.as_mut_slice(), nc, |_, col| {
        for (v, d) in col.iter_mut().zip(&decay) {
            *v *= d;
        }
    });
}

/// Relaxed transport from `s` to `t`: exponential loss along each
/// characteristic with exponent `u_n ∫_s^t Γ`, then the exact shift.
pub fn relaxed_transport(state: &SimState, s: f64, t: f64, gamma_integral: f64, params: &ModelParams) -> Result<SimState> {
    state.check_shape(params)?;
    if !(gamma_integral >= 0.0) {
        return Err(Error::Contract(format!("gamma integral must be non-negative, got {gamma_integral}")));
    }
    let k = params.grid.cells_in(t - s)?;
    let mut out = state.clone();
    relax(&mut out, &loss_rates(params), gamma_integral, Exec::Sequential);
    shift_cells(&mut out, k, params.grid.delta_a, Exec::Sequential);
    out.time = t;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::moments::evaluate_moments;
    use crate::params::AreaGrid;
    use crate::supersolution::SuperSolution;
    use proptest::prelude::*;

    fn params() -> ModelParams {
        ModelParams::truncated(1.0, 10, AreaGrid::new(0.1, 41).unwrap()).unwrap()
    }

    fn bumpy(p: &ModelParams) -> SimState {
        let mut s = SimState::from_fn(p, |n, a| {
            let x = (a - 1.5) / 1.2;
            if x.abs() < 1.0 {
                (1.0 - x * x) * (n as f64).recip()
            } else {
                0.0
            }
        });
        s.enforce_boundary();
        s
    }

    #[test]
    fn lens_moves_four_cells_left() {
        let p = params();
        let s = SimState::from_fn(&p, |n, a| if n == 2 { 1.0 + a } else { 0.0 });
        let (out, flow) = shift_transport(&s, 0.1, &p).unwrap();
        assert_eq!(out.get(2, 0), s.get(2, 4));
        assert_eq!(out.get(2, 36), s.get(2, 40));
        assert_eq!(out.get(2, 37), 0.0);
        // trapezoid of 1 + a over [0, 0.4]
        assert!((flow.outflow[0] - 0.48).abs() < 1e-14);
    }

    #[test]
    fn nonagon_moves_three_cells_right() {
        let p = params();
        let s = bumpy(&p);
        let (out, flow) = shift_transport(&s, 0.1, &p).unwrap();
        for i in 0..3 {
            assert_eq!(out.get(9, i), 0.0);
        }
        assert_eq!(out.get(9, 20), s.get(9, 17));
        assert_eq!(flow.outflow[p.idx(9)], 0.0);
        assert_eq!(out.class_values(6).collect::<Vec<_>>(), s.class_values(6).collect::<Vec<_>>());
    }

    #[test]
    fn off_lattice_step_rejected() {
        let p = params();
        assert!(matches!(shift_transport(&bumpy(&p), 0.15, &p), Err(Error::StepSize { .. })));
    }

    #[test]
    fn semigroup_is_bitwise() {
        let p = params();
        let s = bumpy(&p);
        let (a, _) = shift_transport(&s, 0.1, &p).unwrap();
        let (a, _) = shift_transport(&a, 0.1, &p).unwrap();
        let (b, _) = shift_transport(&s, 0.2, &p).unwrap();
        assert_eq!(a.as_slice(), b.as_slice());
    }

    #[test]
    fn relaxation_without_weight_is_plain_shift() {
        let p = params();
        let s = bumpy(&p);
        let (a, _) = shift_transport(&s, 0.2, &p).unwrap();
        let b = relaxed_transport(&s, 0.0, 0.2, 0.0, &p).unwrap();
        assert_eq!(a.as_slice(), b.as_slice());
    }

    #[test]
    fn relaxation_rate_for_interior_class() {
        let p = params();
        let s = SimState::from_fn(&p, |n, _| if n == 6 { 2.0 } else { 0.0 });
        let out = relaxed_transport(&s, 0.0, 0.1, 0.05, &p).unwrap();
        assert!((out.get(6, 7) - 2.0 * (-18.0f64 * 0.05).exp()).abs() < 1e-15);
        let ss = SuperSolution::new(&p);
        let phi_state = SimState::from_fn(&p, |n, _| crate::supersolution::phi(1.0, n));
        let r = relaxed_transport(&phi_state, 0.0, 0.1, 0.01, &p).unwrap();
        assert!(ss.flat_norm(&r) < ss.flat_norm(&phi_state));
    }

    #[test]
    fn parallel_shift_matches_sequential() {
        let p = params();
        let mut a = bumpy(&p);
        let mut b = a.clone();
        let fa = shift_cells(&mut a, 2, 0.1, Exec::Sequential);
        let fb = shift_cells(&mut b, 2, 0.1, Exec::Parallel);
        assert_eq!(a, b);
        assert_eq!(fa, fb);
    }

    proptest! {
        #[test]
        fn count_bookkeeping(vals in prop::collection::vec(0.0f64..1.0, 9 * 41), k in 1usize..4) {
            let p = params();
            let mut s = SimState::from_node_major(9, 41, vals).unwrap();
            // zero boundary above class 6 and an empty last node
            s.enforce_boundary();
            for n in 2..=10 { s.set(n, 40, 0.0); }
            let before = evaluate_moments(&s, &p).count;
            let mut out = s.clone();
            let flow = shift_cells(&mut out, k, 0.1, Exec::Sequential);
            let after = evaluate_moments(&out, &p).count;
            prop_assert!((after + flow.total_outflow() + flow.overflow - before).abs() <= 1e-12 * before);
            prop_assert!(out.min_value() >= 0.0);
            prop_assert!(flow.outflow.iter().all(|&o| o >= 0.0));
        }
    }
}
