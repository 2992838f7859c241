//! Runs of the truncated system for increasing truncation levels.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::{ModelParams, N_MIN};
use crate::state::SimState;

use super::{run_simulation, StepperConfig, TrajectoryRecord};

/// Differences between two consecutive rungs over the common sampled times.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RungDifference {
    pub n0_low: usize,
    pub n0_high: usize,
    /// Per class `2..=n0_low`: `sup_{t, i} |f_low - f_high|`.
    pub class_sup: Vec<f64>,
    pub count_diff: f64,
    pub area_diff: f64,
    pub gamma_diff: f64,
}

impl RungDifference {
    /// Largest per-class difference over classes `2..=max_class`.
    pub fn sup_up_to(&self, max_class: usize) -> f64 {
        let k = (max_class + 1 - N_MIN).min(self.class_sup.len());
        self.class_sup[..k].iter().copied().fold(0.0, f64::max)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LadderReport {
    pub rungs: Vec<usize>,
    pub differences: Vec<RungDifference>,
    #[serde(skip)]
    pub trajectories: Vec<TrajectoryRecord>,
}

fn compare(lo: &TrajectoryRecord, hi: &TrajectoryRecord, n0_low: usize, n0_high: usize) -> RungDifference {
    let nc = n0_low + 1 - N_MIN;
    let mut class_sup = vec![0.0f64; nc];
    for a in &lo.samples {
        let Some(b) = hi.sample_at(a.time) else { continue };
        for i in 0..a.num_nodes() {
            let (ca, cb) = (a.column(i), b.column(i));
            for k in 0..nc {
                class_sup[k] = class_sup[k].max((ca[k] - cb[k]).abs());
            }
        }
    }
    let series = |f: &dyn Fn(&TrajectoryRecord, usize) -> f64| {
        (0..lo.len().min(hi.len()))
            .map(|j| (f(lo, j) - f(hi, j)).abs())
            .fold(0.0, f64::max)
    };
    RungDifference {
        n0_low,
        n0_high,
        class_sup,
        count_diff: series(&|r, j| r.moments[j].count),
        area_diff: series(&|r, j| r.moments[j].area),
        gamma_diff: series(&|r, j| r.gamma[j]),
    }
}

/// Run every rung from the zero-filled restriction of `g` and compare
/// consecutive rungs. Rungs run concurrently under a parallel policy.
pub fn truncation_ladder(
    g: &SimState,
    n0_list: &[usize],
    t_final: f64,
    config: &StepperConfig,
    params: &ModelParams,
) -> Result<LadderReport> {
    if n0_list.is_empty() || n0_list.windows(2).any(|w| w[0] > w[1]) {
        return Err(Error::InvalidParams("rungs must be a non-empty non-decreasing list".into()));
    }
    let rung_params: Vec<ModelParams> = n0_list.iter().map(|&n0| params.with_n0(n0)).collect::<Result<_>>()?;
    let runs = config.exec.map(&rung_params, |p| {
        let mut g0 = g.resized(p.n_classes());
        g0.time = 0.0;
        run_simulation(&g0, t_final, config, p)
    });
    let trajectories: Vec<TrajectoryRecord> = runs.into_iter().collect::<Result<_>>()?;
    let differences = trajectories
        .windows(2)
        .zip(n0_list.windows(2))
        .map(|(t, n)| compare(&t[0], &t[1], n[0], n[1]))
        .collect();
    Ok(LadderReport {
        rungs: n0_list.to_vec(),
        differences,
        trajectories,
    })
}
