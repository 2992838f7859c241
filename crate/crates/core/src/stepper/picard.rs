//! Fixed-point iteration on the mild formulation over one time window.
//!
//! Along each characteristic, `f_n` relaxes with rate `u_n Γ` and is fed by
//! `Γ (J+ f)_n`. With `G = ∫ Γ` as the clock, one lattice step reads
//!
//! `f_{j+1} = shift(e^{-z} f_j + w_a J+f_j) + w_b J+f_{j+1}`, `z = u_n ΔG`,
//!
//! where `w_a`, `w_b` integrate `exp(-u_n (ΔG - g))` against the linear
//! interpolant of the source in `g`. These weights sum to `(1 - e^{-z}) / u_n`,
//! so a source bounded by `u_n phi_n` can never push the iterate above `phi`.

use crate::collision::gain_into;
use crate::error::{Error, Result};
use crate::moments::evaluate_moments;
use crate::params::ModelParams;
use crate::state::SimState;
use crate::supersolution::SuperSolution;
use crate::transport::{shift_cells, BoundaryOutflow};

use super::StepperConfig;

#[derive(Debug, Clone)]
pub struct PicardWindow {
    /// States at the lattice times `0, dt, ..., tau`.
    pub states: Vec<SimState>,
    /// `ΔG_j / dt` for each step.
    pub gamma_step: Vec<f64>,
    pub outflow: Vec<BoundaryOutflow>,
    pub iterations: usize,
    /// `sup_j ||f^{k+1}_j - f^k_j||_flat` per iteration.
    pub updates: Vec<f64>,
    /// Flat norm of each iterate (sup over the window).
    pub iterate_norms: Vec<f64>,
    /// `1 - exp(-max u_n G(tau))` for the converged Γ.
    pub contraction_bound: f64,
}

/// `(w_a, w_b) / ΔG` as functions of `z = u ΔG`.
pub(crate) fn product_weights(z: f64) -> (f64, f64) {
    if z < 1.0 {
        let (mut wa, mut wb) = (0.0, 0.0);
        let mut pow = 1.0;
        let mut fact = 2.0;
        for k in 0..24 {
            wa += pow * (k + 1) as f64 / fact;
            wb += pow / fact;
            pow *= -z;
            fact *= (k + 3) as f64;
        }
        (wa, wb)
    } else {
        let e = (-z).exp();
        ((1.0 - e * (1.0 + z)) / (z * z), (z - 1.0 + e) / (z * z))
    }
}

fn gain_panel(f: &SimState, beta: f64, config: &StepperConfig) -> SimState {
    let mut h = f.clone();
    let nc = f.n_classes();
    config.exec.for_each_chunk(h.as_mut_slice(), nc, |i, col| {
        gain_into(f.column(i), beta, col);
    });
    h
}

/// Iterate to the fixed point on `[0, tau]` starting from `g` held constant.
pub fn picard_window(g: &SimState, tau: f64, config: &StepperConfig, params: &ModelParams) -> Result<PicardWindow> {
    g.check_shape(params)?;
    let cells = params.grid.cells_in(config.dt)?;
    let m = (tau / config.dt).round() as usize;
    if m == 0 || (m as f64 * config.dt - tau).abs() > 1e-9 * tau {
        return Err(Error::InvalidParams(format!("window {tau} is not a multiple of dt {}", config.dt)));
    }
    let ss = SuperSolution::new(params);
    let u = &ss.u;
    let nc = g.n_classes();
    let t0 = g.time;
    // the system is homogeneous, so convergence is measured against |g|
    let tol = config.picard_tol * ss.flat_norm(g).max(f64::MIN_POSITIVE);

    let mut prev: Vec<SimState> = (0..=m)
        .map(|j| {
            let mut s = g.clone();
            s.time = t0 + j as f64 * config.dt;
            s
        })
        .collect();
    let mut updates = Vec::new();
    let mut norms = Vec::new();

    for it in 1..=config.picard_max_iter {
        let gam: Vec<f64> = prev
            .iter()
            .map(|s| evaluate_moments(s, params).gamma_or_zero().abs())
            .collect();
        let gains: Vec<SimState> = prev.iter().map(|s| gain_panel(s, params.beta, config)).collect();

        let mut next = Vec::with_capacity(m + 1);
        next.push(prev[0].clone());
        let mut flows = Vec::with_capacity(m);
        let mut gamma_step = Vec::with_capacity(m);
        for j in 0..m {
            let dg = 0.5 * config.dt * (gam[j] + gam[j + 1]);
            let mut decay = vec![0.0; nc];
            let mut wa = vec![0.0; nc];
            let mut wb = vec![0.0; nc];
            for k in 0..nc {
                let z = u[k] * dg;
                let (a, b) = product_weights(z);
                decay[k] = (-z).exp();
                wa[k] = a * dg;
                wb[k] = b * dg;
            }
            let mut cur = next[j].clone();
            let (ha, hb) = (&gains[j], &gains[j + 1]);
            config.exec.for_each_chunk(cur.as_mut_slice(), nc, |i, col| {
                let h = ha.column(i);
                for k in 0..nc {
                    col[k] = decay[k] * col[k] + wa[k] * h[k];
                }
            });
            let flow = shift_cells(&mut cur, cells, params.grid.delta_a, config.exec);
            config.exec.for_each_chunk(cur.as_mut_slice(), nc, |i, col| {
                let h = hb.column(i);
                for k in 0..nc {
                    col[k] += wb[k] * h[k];
                }
            });
            cur.enforce_boundary();
            cur.time = prev[j + 1].time;
            next.push(cur);
            flows.push(flow);
            gamma_step.push(dg / config.dt);
        }

        let diff = next
            .iter()
            .zip(&prev)
            .map(|(a, b)| ss.flat_distance(a, b))
            .fold(0.0f64, f64::max);
        updates.push(diff);
        norms.push(next.iter().map(|s| ss.flat_norm(s)).fold(0.0f64, f64::max));
        prev = next;
        if !diff.is_finite() {
            break;
        }
        if diff < tol {
            let g_tau: f64 = gamma_step.iter().sum::<f64>() * config.dt;
            let umax = u.iter().copied().fold(0.0f64, f64::max);
            return Ok(PicardWindow {
                states: prev,
                gamma_step,
                outflow: flows,
                iterations: it,
                updates,
                iterate_norms: norms,
                contraction_bound: 1.0 - (-umax * g_tau).exp(),
            });
        }
    }
    Err(Error::NonContraction {
        iterations: updates.len(),
        last_update: updates.last().copied().unwrap_or(f64::NAN),
    })
}
