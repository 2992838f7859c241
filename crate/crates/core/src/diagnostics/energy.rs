//! Energy distance between two states and its growth along paired runs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::ModelParams;
use crate::quadrature::weight;
use crate::state::SimState;
use crate::stepper::{run_simulation, StepperConfig, TrajectoryRecord};

use super::quasi::least_squares;

/// `sum_n n ∫ e^{-a} (f_n - h_n)^2 da + (N(f) - N(h))^2`.
pub fn energy_distance(f: &SimState, h: &SimState, params: &ModelParams) -> Result<f64> {
    f.same_shape(h)?;
    let nn = f.num_nodes();
    let da = params.grid.delta_a;
    let mut quad = 0.0;
    let mut count = 0.0;
    for i in 0..nn {
        let w = weight(i, nn, da);
        let e = (-params.grid.node(i)).exp();
        let (cf, ch) = (f.column(i), h.column(i));
        let mut s = 0.0;
        let mut c = 0.0;
        for (k, (x, y)) in cf.iter().zip(ch).enumerate() {
            let d = x - y;
            s += (k + crate::params::N_MIN) as f64 * d * d;
            c += d;
        }
        quad += w * e * s;
        count += w * c;
    }
    Ok(quad + count * count)
}

/// Exponential growth of `E(t)` for one perturbation size.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EnergyGrowth {
    pub times: Vec<f64>,
    pub energy: Vec<f64>,
    /// Least-squares slope of `ln E(t)`.
    pub slope: f64,
    /// Smallest `C` with `E(t) <= e^{C t} E(0)` at every sample.
    pub envelope_rate: f64,
}

impl EnergyGrowth {
    pub fn from_series(times: Vec<f64>, energy: Vec<f64>) -> Option<Self> {
        let e0 = *energy.first()?;
        if e0 <= 0.0 {
            return None;
        }
        let pts: Vec<(f64, f64)> = times
            .iter()
            .zip(&energy)
            .filter(|(_, &e)| e > 0.0)
            .map(|(&t, &e)| (t, e.ln()))
            .collect();
        let (slope, _) = least_squares(&pts)?;
        let envelope_rate = times
            .iter()
            .zip(&energy)
            .filter(|(&t, _)| t > 0.0)
            .map(|(&t, &e)| (e / e0).ln() / t)
            .fold(f64::NEG_INFINITY, f64::max);
        Some(Self {
            times,
            energy,
            slope,
            envelope_rate,
        })
    }

    /// Whether `E(t) <= e^{c t} E(0)` holds at every sample.
    pub fn bounded_by(&self, c: f64) -> bool {
        let e0 = self.energy[0];
        self.times
            .iter()
            .zip(&self.energy)
            .all(|(&t, &e)| e <= (c * t).exp() * e0 * (1.0 + 1e-12))
    }
}

/// Energy distance between a base run from `g` and runs from
/// `g + delta * perturbation` for each `delta`, at the shared sample times.
pub fn stability_experiment(
    g: &SimState,
    perturbation: &SimState,
    deltas: &[f64],
    t_final: f64,
    config: &StepperConfig,
    params: &ModelParams,
) -> Result<Vec<EnergyGrowth>> {
    g.same_shape(perturbation)?;
    let mut starts = vec![g.clone()];
    for &d in deltas {
        let mut h = perturbation.clone();
        h.scale(d);
        for (x, y) in h.as_mut_slice().iter_mut().zip(g.as_slice()) {
            *x += y;
        }
        starts.push(h);
    }
    let runs: Vec<Result<TrajectoryRecord>> = config
        .exec
        .map(&starts, |s| run_simulation(s, t_final, config, params));
    let runs: Vec<TrajectoryRecord> = runs.into_iter().collect::<Result<_>>()?;
    let base = &runs[0];
    runs[1..]
        .iter()
        .map(|run| {
            let mut times = Vec::new();
            let mut energy = Vec::new();
            for a in &base.samples {
                if let Some(b) = run.sample_at(a.time) {
                    times.push(a.time);
                    energy.push(energy_distance(a, b, params)?);
                }
            }
            EnergyGrowth::from_series(times, energy)
                .ok_or_else(|| Error::Numerical("energy series too short or zero at t = 0".into()))
        })
        .collect()
}
