//! Time integration: a conservative Strang splitting, a Picard fixed-point
//! stepper on the mild formulation, and the truncation ladder.

mod ladder;
mod picard;
mod strang;

pub use ladder::{truncation_ladder, LadderReport, RungDifference};
pub use picard::{picard_window, PicardWindow};
pub use strang::{strang_step, StepDiagnostics, StrangStepper};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::expm::Propagator;
use crate::moments::{evaluate_moments, MomentSet};
use crate::params::ModelParams;
use crate::state::SimState;
use crate::supersolution::SuperSolution;
use crate::transport::BoundaryOutflow;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    #[default]
    Strang,
    Picard,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct StepperConfig {
    pub dt: f64,
    pub scheme: Scheme,
    /// Picard stopping threshold on the flat-norm update, relative to the
    /// flat norm of the window's initial state.
    pub picard_tol: f64,
    pub picard_max_iter: usize,
    /// Picard window length, a multiple of `dt`.
    pub window: f64,
    /// How often a window may be halved before giving up.
    pub max_halvings: usize,
    /// Γ_D floor as a fraction of `(6 - 2(b+1)) N(0)`.
    pub gamma_d_floor: f64,
    /// Abort once the grains pushed past `a_max` exceed this fraction of `N(0)`.
    pub overflow_tol: f64,
    /// Keep every `sample_every`-th state in the record (the last one always).
    pub sample_every: usize,
    pub exec: Exec,
}

impl Default for StepperConfig {
    fn default() -> Self {
        Self {
            dt: 0.01,
            scheme: Scheme::Strang,
            picard_tol: 1e-12,
            picard_max_iter: 200,
            window: 0.1,
            max_halvings: 6,
            gamma_d_floor: 1e-8,
            overflow_tol: 1e-6,
            sample_every: 1,
            exec: Exec::default(),
        }
    }
}

impl StepperConfig {
    pub fn validate(&self, params: &ModelParams) -> Result<()> {
        params.grid.cells_in(self.dt)?;
        if !(self.picard_tol > 0.0) || self.picard_max_iter == 0 {
            return Err(Error::InvalidParams("picard tolerance and iteration cap must be positive".into()));
        }
        let r = self.window / self.dt;
        if !(r >= 1.0 - 1e-9) || (r - r.round()).abs() > 1e-9 * r {
            return Err(Error::InvalidParams(format!(
                "window {} is not a positive multiple of dt {}",
                self.window, self.dt
            )));
        }
        if self.sample_every == 0 {
            return Err(Error::InvalidParams("sample_every must be at least 1".into()));
        }
        Ok(())
    }
}

/// Time series of one run on the dt-lattice.
#[derive(Clone, Default, Serialize, Deserialize)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub moments: Vec<MomentSet>,
    /// Γ of the state at each recorded time (zero when undefined).
    pub gamma: Vec<f64>,
    /// Effective Γ used over the step ending at each time (first entry 0).
    pub gamma_step: Vec<f64>,
    /// Running maximum of both Γ series.
    pub gamma_bar: Vec<f64>,
    pub flat_norm: Vec<f64>,
    pub min_value: Vec<f64>,
    /// Cumulative grains lost past `a_max`.
    pub overflow: Vec<f64>,
    /// Cumulative outflow through `a = 0` per class.
    pub outflow: Vec<Vec<f64>>,
    #[serde(skip)]
    pub samples: Vec<SimState>,
}

impl std::fmt::Debug for TrajectoryRecord {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TrajectoryRecord")
            .field("len", &self.len())
            .field("end_time", &self.end_time())
            .field("samples", &self.samples.len())
            .finish()
    }
}

impl TrajectoryRecord {
    fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn end_time(&self) -> f64 {
        self.times.last().copied().unwrap_or(0.0)
    }

    pub fn final_state(&self) -> Option<&SimState> {
        self.samples.last()
    }

    /// Sampled state at time `t` (exact lattice match).
    pub fn sample_at(&self, t: f64) -> Option<&SimState> {
        self.samples.iter().find(|s| (s.time - t).abs() <= 1e-9 * t.abs().max(1.0))
    }

    fn push(
        &mut self,
        state: &SimState,
        moments: MomentSet,
        gamma_step: f64,
        flow: &BoundaryOutflow,
        ss: &SuperSolution,
        keep: bool,
    ) {
        let gamma = moments.gamma_or_zero();
        let prev_bar = self.gamma_bar.last().copied().unwrap_or(0.0);
        let prev_out = self.outflow.last().cloned().unwrap_or_else(|| vec![0.0; state.n_classes()]);
        let prev_over = self.overflow.last().copied().unwrap_or(0.0);
        self.times.push(state.time);
        self.moments.push(moments);
        self.gamma.push(gamma);
        self.gamma_step.push(gamma_step);
        self.gamma_bar.push(prev_bar.max(gamma).max(gamma_step));
        self.flat_norm.push(ss.flat_norm(state));
        self.min_value.push(state.min_value());
        let mut out = prev_out;
        for (o, f) in out.iter_mut().zip(&flow.outflow) {
            *o += f;
        }
        self.outflow.push(out);
        self.overflow.push(prev_over + flow.overflow);
        if keep {
            self.samples.push(state.clone());
        }
    }
}

/// Apply `exp(theta J)` at every area node.
pub fn collision_propagate(state: &SimState, theta: f64, params: &ModelParams, exec: Exec) -> Result<SimState> {
    state.check_shape(params)?;
    let e = Propagator::new(params, theta)?;
    let mut out = state.clone();
    e.apply_panel(&mut out, exec);
    Ok(out)
}

/// Checkable admissibility of an initial datum.
pub fn check_initial(g: &SimState, params: &ModelParams) -> Result<()> {
    g.check_shape(params)?;
    g.check_admissible(0.0)?;
    let m = evaluate_moments(g, params);
    if m.defect.abs() > 1e-10 * m.edge_moment.max(f64::MIN_POSITIVE) {
        return Err(Error::Inadmissible(format!(
            "polyhedral defect {:e} is not zero (M = {:e})",
            m.defect, m.edge_moment
        )));
    }
    if !SuperSolution::new(params).flat_norm(g).is_finite() {
        return Err(Error::Inadmissible("flat norm is not finite".into()));
    }
    Ok(())
}

struct Guards {
    floor: f64,
    overflow_limit: f64,
}

impl Guards {
    fn new(n0_count: f64, config: &StepperConfig, params: &ModelParams) -> Self {
        Self {
            floor: config.gamma_d_floor * (6.0 - 2.0 * (params.beta + 1.0)) * n0_count,
            overflow_limit: config.overflow_tol * n0_count,
        }
    }

    fn check(&self, state: &SimState, m: &MomentSet, overflow: f64) -> Result<()> {
        if m.count > 0.0 && m.gamma_d < self.floor {
            return Err(Error::AdmissibilityLoss {
                time: state.time,
                gamma_d: m.gamma_d,
                floor: self.floor,
            });
        }
        if overflow > self.overflow_limit {
            return Err(Error::OverflowLeak {
                time: state.time,
                leaked: overflow,
                threshold: self.overflow_limit,
            });
        }
        Ok(())
    }
}

fn abort(reason: Error, rec: TrajectoryRecord) -> Error {
    Error::Aborted {
        reason: Box::new(reason),
        partial: Box::new(rec),
    }
}

/// Integrate from `g` to `t_final` on the dt-lattice.
pub fn run_simulation(g: &SimState, t_final: f64, config: &StepperConfig, params: &ModelParams) -> Result<TrajectoryRecord> {
    params.validate()?;
    config.validate(params)?;
    check_initial(g, params)?;
    let steps = (t_final / config.dt).round() as usize;
    if (steps as f64 * config.dt - t_final).abs() > 1e-9 * t_final.max(1.0) {
        return Err(Error::InvalidParams(format!(
            "final time {t_final} is not a multiple of dt {}",
            config.dt
        )));
    }
    let ss = SuperSolution::new(params);
    let mut start = g.clone();
    start.time = 0.0;
    let m0 = evaluate_moments(&start, params);
    let guards = Guards::new(m0.count, config, params);
    let mut rec = TrajectoryRecord::new();
    let zero_flow = BoundaryOutflow {
        outflow: vec![0.0; g.n_classes()],
        ..Default::default()
    };
    rec.push(&start, m0, 0.0, &zero_flow, &ss, true);

    match config.scheme {
        Scheme::Strang => {
            let mut stepper = StrangStepper::new(params, config)?;
            let mut x = start;
            for step in 1..=steps {
                let (y, diag) = match stepper.step(&x) {
                    Ok(r) => r,
                    Err(e) => return Err(abort(e, rec)),
                };
                x = y;
                x.time = step as f64 * config.dt;
                let keep = step % config.sample_every == 0 || step == steps;
                rec.push(&x, diag.moments, diag.gamma_eff, &diag.outflow, &ss, keep);
                if let Err(e) = guards.check(&x, &diag.moments, rec.end_overflow()) {
                    return Err(abort(e, rec));
                }
            }
        }
        Scheme::Picard => {
            let cells = (config.window / config.dt).round() as usize;
            let mut x = start;
            let mut step = 0;
            while step < steps {
                let mut len = cells.min(steps - step);
                let mut halvings = 0;
                let win = loop {
                    match picard_window(&x, len as f64 * config.dt, config, params) {
                        Ok(w) => break w,
                        Err(Error::NonContraction { .. }) if halvings < config.max_halvings && len > 1 => {
                            len = len.div_ceil(2);
                            halvings += 1;
                        }
                        Err(e) => return Err(abort(e, rec)),
                    }
                };
                for (j, s) in win.states.iter().enumerate().skip(1) {
                    step += 1;
                    let mut s = s.clone();
                    s.time = step as f64 * config.dt;
                    let m = evaluate_moments(&s, params);
                    let keep = step % config.sample_every == 0 || step == steps;
                    rec.push(&s, m, win.gamma_step[j - 1], &win.outflow[j - 1], &ss, keep);
                    if let Err(e) = guards.check(&s, &m, rec.end_overflow()) {
                        return Err(abort(e, rec));
                    }
                    x = s;
                }
            }
        }
    }
    Ok(rec)
}

impl TrajectoryRecord {
    fn end_overflow(&self) -> f64 {
        self.overflow.last().copied().unwrap_or(0.0)
    }
}
