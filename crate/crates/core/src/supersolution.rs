//! Stationary comparison profile `phi` and the weighted sup-norm built on it.

use crate::params::{ModelParams, OperatorMode, N_MIN};
use crate::state::SimState;

/// `phi_n = (beta / (1 + beta))^n / (n beta)`.
pub fn phi(beta: f64, n: usize) -> f64 {
    (beta / (1.0 + beta)).powi(n as i32) / (n as f64 * beta)
}

/// Decay rate `gamma = ln(1 + 1/beta)`, so that `beta n phi_n = exp(-n gamma)`.
pub fn gamma_decay(beta: f64) -> f64 {
    (1.0 / beta).ln_1p()
}

/// Loss rates `u_n`: the diagonal of the loss operator.
pub fn loss_rates(params: &ModelParams) -> Vec<f64> {
    let b = params.beta;
    params
        .classes()
        .map(|n| {
            if n == N_MIN {
                2.0 * b
            } else if n == params.n0 && params.mode == OperatorMode::Truncated {
                (b + 1.0) * n as f64
            } else {
                (2.0 * b + 1.0) * n as f64
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct SuperSolution {
    pub phi: Vec<f64>,
    pub gamma_decay: f64,
    pub u: Vec<f64>,
}

impl SuperSolution {
    pub fn new(params: &ModelParams) -> Self {
        Self {
            phi: params.classes().map(|n| phi(params.beta, n)).collect(),
            gamma_decay: gamma_decay(params.beta),
            u: loss_rates(params),
        }
    }

    /// `sup_{n,i} |f_n(a_i)| / phi_n`.
    pub fn flat_norm(&self, state: &SimState) -> f64 {
        let nc = state.n_classes().min(self.phi.len());
        let mut m: f64 = 0.0;
        for i in 0..state.num_nodes() {
            let col = state.column(i);
            for k in 0..nc {
                m = m.max(col[k].abs() / self.phi[k]);
            }
        }
        m
    }

    /// Per-class `sup_i |f_n(a_i)| / phi_n`.
    pub fn flat_norm_classes(&self, state: &SimState) -> Vec<f64> {
        let nc = state.n_classes().min(self.phi.len());
        let mut m = vec![0.0f64; nc];
        for i in 0..state.num_nodes() {
            let col = state.column(i);
            for k in 0..nc {
                m[k] = m[k].max(col[k].abs() / self.phi[k]);
            }
        }
        m
    }

    /// `||f - g||_flat` without materialising the difference.
    pub fn flat_distance(&self, f: &SimState, g: &SimState) -> f64 {
        let nc = f.n_classes().min(g.n_classes()).min(self.phi.len());
        let mut m: f64 = 0.0;
        for i in 0..f.num_nodes().min(g.num_nodes()) {
            let (a, b) = (f.column(i), g.column(i));
            for k in 0..nc {
                m = m.max((a[k] - b[k]).abs() / self.phi[k]);
            }
        }
        m
    }
}
