//! Lower bounds on the number of grains along a trajectory.

use serde::{Deserialize, Serialize};

use crate::moments::evaluate_moments;
use crate::params::{ModelParams, N_MIN};
use crate::state::SimState;
use crate::stepper::TrajectoryRecord;
use crate::supersolution::phi;

use super::quasi::RunoffEnvelope;

/// Largest node area carrying nonzero density, or `None` for the zero state.
pub fn support_radius(state: &SimState, params: &ModelParams) -> Option<f64> {
    (0..state.num_nodes())
        .rev()
        .find(|&i| state.column(i).iter().any(|&v| v != 0.0))
        .map(|i| params.grid.node(i))
}

/// `c` in `Γ <= c |g| / N`: `Γ_N <= |g| sum_{n<6} (n-6)^2 phi_n` and
/// `Γ_D >= (6 - 2(β+1)) N`.
pub fn gamma_cap_constant(beta: f64) -> f64 {
    let num: f64 = (N_MIN..=5).map(|n| ((6 - n) * (6 - n)) as f64 * phi(beta, n)).sum();
    num / (6.0 - 2.0 * (beta + 1.0))
}

/// `C_t`: the smallest `x > 0` with `x >= h(x)`, where
/// `h(x) = sup_alpha (A(g) - M⊥_env(t, alpha; Γ̄ = c|g|/x)) / alpha`.
///
/// Area conservation gives `A(g) <= alpha N(t) + M⊥(t, alpha)` and
/// `Γ̄(t) <= c|g|/N(t)`, so `N(t)` itself satisfies `N >= h(N)`; since `h`
/// is increasing, every such `x` lies above `C_t`.
///
/// The supremum runs over a uniform grid up to the support of the initial
/// data and a geometric grid beyond it, where only the Γ̄ term survives.
pub fn positivity_bound(env: &RunoffEnvelope, t: f64, area0: f64, x_max: f64) -> f64 {
    let cap = gamma_cap_constant(env.beta()) * env.g_norm();
    let end = env.support_end();
    let mut alphas: Vec<f64> = (1..=400).map(|j| end * j as f64 / 400.0).collect();
    let far = 800.0 * t.exp() / env.gamma();
    let mut a = end;
    while a < far {
        a *= 1.05;
        alphas.push(a);
    }
    let parts: Vec<(f64, f64, f64)> = alphas
        .iter()
        .map(|&a| {
            let (base, slope) = env.second_parts(t, a);
            (a, base, slope)
        })
        .collect();
    let h = |x: f64| {
        parts
            .iter()
            .map(|&(a, base, slope)| (area0 - base - slope * cap / x) / a)
            .fold(f64::NEG_INFINITY, f64::max)
    };
    let excess = |x: f64| x - h(x);
    // log scan from x_max downwards for the first point violating x >= h(x)
    let mut hi = x_max;
    if excess(hi) < 0.0 {
        return 0.0;
    }
    let mut lo = hi;
    loop {
        lo *= 0.5;
        if lo < 1e-300 {
            return 0.0;
        }
        if excess(lo) < 0.0 {
            break;
        }
        hi = lo;
    }
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if excess(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-14 * hi {
            break;
        }
    }
    lo
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GrainBoundSample {
    pub time: f64,
    pub count: f64,
    /// `A(g) / (a0 + t (n0 - 6))` for compactly supported data.
    pub growth_bound: Option<f64>,
    pub positivity_bound: f64,
    pub gamma_bar: f64,
    /// `c |g| / N(t)`.
    pub gamma_cap: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GrainBoundReport {
    pub samples: Vec<GrainBoundSample>,
    /// Why the growth bound was not evaluated.
    pub growth_skipped: Option<String>,
}

impl GrainBoundReport {
    pub fn growth_holds(&self) -> bool {
        self.samples.iter().all(|s| s.growth_bound.is_none_or(|b| s.count >= b))
    }

    pub fn positivity_holds(&self) -> bool {
        self.samples.iter().all(|s| s.count >= s.positivity_bound)
    }

    pub fn gamma_cap_holds(&self) -> bool {
        self.samples.iter().all(|s| s.gamma_bar <= s.gamma_cap * (1.0 + 1e-12))
    }
}

/// Check both lower bounds on `N(t)` and the cap on `Γ̄` at every recorded
/// time. The growth bound needs the support radius `a0` of the data; pass
/// `None` to skip it.
pub fn grain_count_bounds(rec: &TrajectoryRecord, params: &ModelParams, a0: Option<f64>) -> GrainBoundReport {
    let g = rec.samples.first().expect("trajectory without samples");
    let m0 = evaluate_moments(g, params);
    let env = RunoffEnvelope::new(g, params);
    let cap = gamma_cap_constant(params.beta) * env.g_norm();
    let growth_skipped = match a0 {
        None => Some("initial data without declared compact support".to_string()),
        Some(a) if a <= 0.0 => Some(format!("support radius {a} is not positive")),
        Some(_) => None,
    };
    let speed = params.n0 as f64 - 6.0;
    let samples = rec
        .times
        .iter()
        .zip(&rec.moments)
        .zip(&rec.gamma_bar)
        .map(|((&t, m), &gbar)| GrainBoundSample {
            time: t,
            count: m.count,
            growth_bound: match (growth_skipped.is_none(), a0) {
                (true, Some(a)) => Some(m0.area / (a + t * speed)),
                _ => None,
            },
            positivity_bound: positivity_bound(&env, t, m0.area, m0.count),
            gamma_bar: gbar,
            gamma_cap: cap / m.count,
        })
        .collect();
    GrainBoundReport { samples, growth_skipped }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::AreaGrid;
    use approx::assert_relative_eq;

    #[test]
    fn cap_constant_beta_one() {
        // (16/8 + 9/24 + 4/64 + 1/160) / 2
        let want = (2.0 + 0.375 + 0.0625 + 0.00625) / 2.0;
        assert_relative_eq!(gamma_cap_constant(1.0), want, max_relative = 1e-15);
    }

    #[test]
    fn support_radius_of_bump() {
        let p = ModelParams::truncated(1.0, 8, AreaGrid::new(0.25, 17).unwrap()).unwrap();
        let s = SimState::from_fn(&p, |n, a| if n == 5 && (1.0..=2.5).contains(&a) { 1.0 } else { 0.0 });
        assert_eq!(support_radius(&s, &p), Some(2.5));
        assert_eq!(support_radius(&SimState::zeros(&p), &p), None);
    }

    #[test]
    fn positivity_bound_below_initial_count() {
        let p = ModelParams::truncated(1.0, 10, AreaGrid::new(0.05, 201).unwrap()).unwrap();
        let mut g = SimState::from_fn(&p, |n, a| phi(1.0, n) * a * (-2.0 * a).exp());
        g.enforce_boundary();
        let m = evaluate_moments(&g, &p);
        let env = RunoffEnvelope::new(&g, &p);
        let c0 = positivity_bound(&env, 0.0, m.area, m.count);
        let c1 = positivity_bound(&env, 1.0, m.area, m.count);
        assert!(c0 > 0.0 && c0 <= m.count, "{c0} vs {}", m.count);
        assert!(c1 > 0.0 && c1 <= c0, "{c1} vs {c0}");
    }
}
