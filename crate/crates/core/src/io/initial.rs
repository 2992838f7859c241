//! Initial data families, admissible by construction.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::moments::class_integrals;
use crate::params::{ModelParams, N_MIN};
use crate::state::SimState;
use crate::supersolution::phi;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum BumpProfile {
    /// `sin^2` bump vanishing at both ends.
    #[default]
    Smooth,
    /// Indicator of `[a_lo, a_hi]`, half weight on interior endpoint nodes.
    Flat,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum InitialFamily {
    CompactBump {
        classes: Vec<usize>,
        a_lo: f64,
        a_hi: f64,
        #[serde(default = "one")]
        amplitude: f64,
        #[serde(default)]
        profile: BumpProfile,
        #[serde(default)]
        project: bool,
    },
    /// `c_n a exp(-lambda a)` with `c_n = scale phi_n`.
    Exponential {
        lambda: f64,
        #[serde(default = "one")]
        scale: f64,
        #[serde(default = "yes")]
        project: bool,
    },
    CustomTable {
        path: PathBuf,
        #[serde(default)]
        project: bool,
    },
}

fn one() -> f64 {
    1.0
}

fn yes() -> bool {
    true
}

impl InitialFamily {
    /// Hexagons only, density 1 on `[0, 1]`: the stationary state.
    pub fn hexagon() -> Self {
        InitialFamily::CompactBump {
            classes: vec![6],
            a_lo: 0.0,
            a_hi: 1.0,
            amplitude: 1.0,
            profile: BumpProfile::Flat,
            project: false,
        }
    }
}

fn bump_value(a: f64, a_lo: f64, a_hi: f64, profile: BumpProfile, half: f64) -> f64 {
    match profile {
        BumpProfile::Smooth => {
            if a <= a_lo || a >= a_hi {
                0.0
            } else {
                (std::f64::consts::PI * (a - a_lo) / (a_hi - a_lo)).sin().powi(2)
            }
        }
        BumpProfile::Flat => {
            if a < a_lo - half || a > a_hi + half {
                0.0
            } else if (a - a_lo).abs() <= half && a_lo > 0.0 || (a - a_hi).abs() <= half {
                0.5
            } else {
                1.0
            }
        }
    }
}

pub fn build_initial_state(family: &InitialFamily, params: &ModelParams) -> Result<SimState> {
    params.validate()?;
    let (mut g, project) = match family {
        InitialFamily::CompactBump {
            classes,
            a_lo,
            a_hi,
            amplitude,
            profile,
            project,
        } => {
            if !(*a_lo >= 0.0 && a_hi > a_lo && *amplitude >= 0.0) {
                return Err(Error::InvalidParams(format!(
                    "bump needs 0 <= a_lo < a_hi and amplitude >= 0, got [{a_lo}, {a_hi}], {amplitude}"
                )));
            }
            if let Some(n) = classes.iter().find(|&&n| n < N_MIN || n > params.n0) {
                return Err(Error::InvalidParams(format!("bump class {n} outside 2..={}", params.n0)));
            }
            let half = 1e-9 * params.grid.delta_a;
            let g = SimState::from_fn(params, |n, a| {
                if classes.contains(&n) {
                    amplitude * bump_value(a, *a_lo, *a_hi, *profile, half)
                } else {
                    0.0
                }
            });
            (g, *project)
        }
        InitialFamily::Exponential { lambda, scale, project } => {
            if !(*lambda > 0.0 && *scale > 0.0) {
                return Err(Error::InvalidParams(format!(
                    "exponential datum needs lambda > 0 and scale > 0, got {lambda}, {scale}"
                )));
            }
            let g = SimState::from_fn(params, |n, a| scale * phi(params.beta, n) * a * (-lambda * a).exp());
            (g, *project)
        }
        InitialFamily::CustomTable { path, project } => {
            let g = crate::io::snapshot::read_snapshot(path, params)?;
            (g, *project)
        }
    };
    g.enforce_boundary();
    g.check_admissible(0.0)?;
    if project {
        g = project_polyhedral(&g, params)?;
    }
    g.time = 0.0;
    Ok(g)
}

/// Scale the classes above 6 so that `P = 0`.
pub fn project_polyhedral(state: &SimState, params: &ModelParams) -> Result<SimState> {
    state.check_shape(params)?;
    let m = class_integrals(state, params);
    let below: f64 = (N_MIN..6).map(|n| (6 - n) as f64 * m[n - N_MIN]).sum();
    let above: f64 = (7..=params.n0).map(|n| (n - 6) as f64 * m[n - N_MIN]).sum();
    let total: f64 = m.iter().enumerate().map(|(k, v)| (k + N_MIN) as f64 * v).sum();
    if (above - below).abs() <= 1e-12 * total {
        return Ok(state.clone());
    }
    if !(below > 0.0) {
        return Err(Error::Unprojectable("no mass below class 6".into()));
    }
    if !(above > 0.0) {
        return Err(Error::Unprojectable("no mass above class 6".into()));
    }
    let s = below / above;
    let mut out = state.clone();
    for n in 7..=params.n0 {
        out.scale_class(n, s);
    }
    Ok(out)
}

/// Seeded non-negative perturbation with `P = 0` and `‖b‖♭ = ‖g‖♭`: smooth
/// bumps of random height and position in `[a_lo, a_hi]` on classes
/// `2..=max_class`, with the classes above 6 rescaled by the projection.
pub fn random_perturbation(
    g: &SimState,
    params: &ModelParams,
    seed: u64,
    max_class: usize,
    a_lo: f64,
    a_hi: f64,
) -> Result<SimState> {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let top = max_class.min(params.n0);
    let width = 0.5 * (a_hi - a_lo);
    let bumps: Vec<(f64, f64)> = (N_MIN..=top)
        .map(|_| {
            let height: f64 = rng.random_range(0.5..1.0);
            let start: f64 = rng.random_range(a_lo..a_lo + width);
            (height, start)
        })
        .collect();
    let mut b = SimState::from_fn(params, |n, a| {
        if n > top {
            return 0.0;
        }
        let (height, start) = bumps[n - N_MIN];
        height * phi(params.beta, n) * bump_value(a, start, start + width, BumpProfile::Smooth, 0.0)
    });
    b.enforce_boundary();
    let mut b = project_polyhedral(&b, params)?;
    let ss = crate::supersolution::SuperSolution::new(params);
    let (gn, bn) = (ss.flat_norm(g), ss.flat_norm(&b));
    if bn > 0.0 {
        b.scale(gn / bn);
    }
    Ok(b)
}
