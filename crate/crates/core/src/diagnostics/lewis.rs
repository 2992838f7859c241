//! Per-class mean areas and the linear fit `<a>_n ≈ b (n - 6) + c`.

use serde::{Deserialize, Serialize};

use crate::params::{ModelParams, N_MIN};
use crate::quadrature::weight;
use crate::state::SimState;

use super::quasi::least_squares;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LewisFit {
    /// `(n, <a>_n)` for every class whose mass exceeds the floor.
    pub means: Vec<(usize, f64)>,
    /// Least-squares slope and intercept over the class window, in `n - 6`.
    pub slope: Option<f64>,
    pub intercept: Option<f64>,
    pub window: (usize, usize),
}

/// Default fit window `[8, n0 - 2]`.
pub fn default_window(params: &ModelParams) -> (usize, usize) {
    (8, params.n0.saturating_sub(2))
}

pub fn lewis_means(state: &SimState, params: &ModelParams, window: (usize, usize), mass_floor: f64) -> LewisFit {
    let nn = state.num_nodes();
    let da = params.grid.delta_a;
    let nc = state.n_classes();
    let mut mass = vec![0.0; nc];
    let mut first = vec![0.0; nc];
    for i in 0..nn {
        let w = weight(i, nn, da);
        let a = params.grid.node(i);
        for (k, &f) in state.column(i).iter().enumerate() {
            mass[k] += w * f;
            first[k] += w * a * f;
        }
    }
    let means: Vec<(usize, f64)> = (0..nc)
        .filter(|&k| mass[k] > mass_floor)
        .map(|k| (k + N_MIN, first[k] / mass[k]))
        .collect();
    let pts: Vec<(f64, f64)> = means
        .iter()
        .filter(|(n, _)| (window.0..=window.1).contains(n))
        .map(|&(n, m)| (n as f64 - 6.0, m))
        .collect();
    let fit = least_squares(&pts);
    LewisFit {
        means,
        slope: fit.map(|f| f.0),
        intercept: fit.map(|f| f.1),
        window,
    }
}
