//! Quasi-complements: mass outside a frame `[0, alpha] x [2, nu]`, and the
//! tightness envelopes that bound them along a trajectory.

use serde::{Deserialize, Serialize};

use crate::params::{ModelParams, N_MIN};
use crate::state::SimState;
use crate::supersolution::SuperSolution;

use crate::stepper::TrajectoryRecord;

/// Cumulative integrals of one state, so that every quasi-complement is an
/// O(classes) lookup.
#[derive(Debug, Clone)]
pub struct QuasiTable {
    delta_a: f64,
    num_nodes: usize,
    /// `cum[k][i] = ∫_0^{a_i} f_{k+2}` of the piecewise-linear interpolant.
    cum: Vec<Vec<f64>>,
    values: Vec<Vec<f64>>,
    /// `∫_0^{a_i} sum_n a f_n`.
    area_cum: Vec<f64>,
    area_values: Vec<f64>,
}

fn cumulative(values: &[f64], da: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut s = 0.0;
    out.push(0.0);
    for w in values.windows(2) {
        s += 0.5 * da * (w[0] + w[1]);
        out.push(s);
    }
    out
}

fn below(cum: &[f64], values: &[f64], da: f64, alpha: f64) -> f64 {
    if alpha <= 0.0 {
        return 0.0;
    }
    let last = values.len() - 1;
    let x = alpha / da;
    if x >= last as f64 {
        return cum[last];
    }
    let j = x.floor() as usize;
    let s = x - j as f64;
    cum[j] + da * s * (values[j] + 0.5 * s * (values[j + 1] - values[j]))
}

impl QuasiTable {
    pub fn new(state: &SimState, params: &ModelParams) -> Self {
        let da = params.grid.delta_a;
        let nn = state.num_nodes();
        let values: Vec<Vec<f64>> = (0..state.n_classes())
            .map(|k| state.class_values(k + N_MIN).collect())
            .collect();
        let cum = values.iter().map(|v| cumulative(v, da)).collect();
        let area_values: Vec<f64> = (0..nn)
            .map(|i| params.grid.node(i) * state.column(i).iter().sum::<f64>())
            .collect();
        let area_cum = cumulative(&area_values, da);
        Self {
            delta_a: da,
            num_nodes: nn,
            cum,
            values,
            area_cum,
            area_values,
        }
    }

    fn class_below(&self, k: usize, alpha: f64) -> f64 {
        below(&self.cum[k], &self.values[k], self.delta_a, alpha)
    }

    fn class_total(&self, k: usize) -> f64 {
        self.cum[k][self.num_nodes - 1]
    }

    /// `N⊥(alpha, nu) = N - sum_{n <= nu} ∫_0^alpha f_n`.
    pub fn first(&self, alpha: f64, nu: usize) -> f64 {
        let nc = self.cum.len();
        let total: f64 = (0..nc).map(|k| self.class_total(k)).sum();
        let inner: f64 = (0..nc)
            .filter(|&k| k + N_MIN <= nu)
            .map(|k| self.class_below(k, alpha))
            .sum();
        (total - inner).max(0.0)
    }

    /// `N⊥(alpha) = N⊥(alpha, floor(alpha))`.
    pub fn first_floor(&self, alpha: f64) -> f64 {
        self.first(alpha, alpha.max(0.0).floor() as usize)
    }

    /// `M⊥(alpha) = sum_{n > floor(alpha)} n ∫ f_n + ∫_alpha^∞ sum_n a f_n`.
    pub fn second(&self, alpha: f64) -> f64 {
        let nu = alpha.max(0.0).floor() as usize;
        let classes: f64 = (0..self.cum.len())
            .filter(|&k| k + N_MIN > nu)
            .map(|k| (k + N_MIN) as f64 * self.class_total(k))
            .sum();
        let last = self.num_nodes - 1;
        let tail = self.area_cum[last] - below(&self.area_cum, &self.area_values, self.delta_a, alpha);
        classes + tail.max(0.0)
    }

    /// `∫_alpha^∞ N⊥(b) db`. The integrand vanishes beyond
    /// `max(a_max, n_max + 1)`, jumps at integers and is quadratic between
    /// grid nodes, so Simpson's rule on each node/integer segment is exact.
    pub fn first_tail_integral(&self, alpha: f64) -> f64 {
        let h = self.delta_a;
        let end = self.tail_end();
        let alpha = alpha.max(0.0);
        if alpha >= end {
            return 0.0;
        }
        let m = (end / h).ceil() as usize;
        let j = ((alpha / h).floor() as usize).min(m - 1);
        let mut s = self.piece(alpha, ((j + 1) as f64 * h).min(end));
        for i in j + 1..m {
            s += self.piece(i as f64 * h, ((i + 1) as f64 * h).min(end));
        }
        s
    }

    pub(crate) fn tail_end(&self) -> f64 {
        let a_max = self.delta_a * (self.num_nodes - 1) as f64;
        let n_max = self.cum.len() + N_MIN - 1;
        a_max.max((n_max + 1) as f64)
    }

    /// `∫_lo^hi N⊥(s) ds` inside one grid cell, split at an interior integer.
    pub(crate) fn piece(&self, lo: f64, hi: f64) -> f64 {
        let simpson = |a: f64, b: f64| {
            let nu = a.floor() as usize;
            (b - a) / 6.0 * (self.first(a, nu) + 4.0 * self.first(0.5 * (a + b), nu) + self.first(b, nu))
        };
        let k = lo.floor() + 1.0;
        if k < hi - 1e-12 * hi.max(1.0) {
            simpson(lo, k) + simpson(k, hi)
        } else {
            simpson(lo, hi)
        }
    }

    /// `(alpha + 1) e^{-gamma alpha} + alpha N⊥(alpha) + ∫_alpha^∞ N⊥(s) ds`,
    /// the initial-data functional controlling the decay of `M⊥`.
    pub fn runoff_functional(&self, alpha: f64, gamma: f64) -> f64 {
        (alpha + 1.0) * (-gamma * alpha).exp() + alpha * self.first_floor(alpha) + self.first_tail_integral(alpha)
    }
}

/// First quasi-complement `sum_{n>nu} ∫_0^alpha f_n + sum_n ∫_alpha^∞ f_n`.
pub fn quasi_complement_first(state: &SimState, alpha: f64, nu: usize, params: &ModelParams) -> f64 {
    QuasiTable::new(state, params).first(alpha, nu)
}

/// Second quasi-complement `M⊥(alpha)`.
pub fn quasi_complement_second(state: &SimState, alpha: f64, params: &ModelParams) -> f64 {
    QuasiTable::new(state, params).second(alpha)
}

/// Least-squares fit `values ≈ D exp(-d alpha)` on the positive entries.
/// The prefactor is raised until the fit is an upper envelope of the data.
pub fn fit_exponential_tail(alphas: &[f64], values: &[f64]) -> Option<(f64, f64)> {
    let pts: Vec<(f64, f64)> = alphas
        .iter()
        .zip(values)
        .filter(|(_, &v)| v > 0.0 && v.is_finite())
        .map(|(&a, &v)| (a, v.ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let (slope, _) = least_squares(&pts)?;
    let rate = -slope;
    let log_pref = pts.iter().map(|&(a, l)| l + rate * a).fold(f64::NEG_INFINITY, f64::max);
    Some((rate, log_pref.exp()))
}

/// Ordinary least squares line `y = slope x + intercept`.
pub(crate) fn least_squares(pts: &[(f64, f64)]) -> Option<(f64, f64)> {
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return None;
    }
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

/// Sampling lattice for the envelopes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TightnessLattice {
    pub times: Vec<f64>,
    pub alphas: Vec<f64>,
}

impl TightnessLattice {
    /// `k` sampled times `t_final i / k` (snapped to recorded samples) and `k`
    /// cutoffs `a_max j / k` for `j = 0..k`.
    pub fn uniform(rec: &TrajectoryRecord, params: &ModelParams, k: usize) -> Self {
        let t_final = rec.end_time();
        let sample_times: Vec<f64> = rec.samples.iter().map(|s| s.time).collect();
        let times = (1..=k)
            .filter_map(|i| {
                let t = t_final * i as f64 / k as f64;
                sample_times
                    .iter()
                    .copied()
                    .min_by(|a, b| (a - t).abs().total_cmp(&(b - t).abs()))
            })
            .collect();
        let a_max = params.grid.a_max();
        let alphas = (0..k).map(|j| a_max * j as f64 / k as f64).collect();
        Self { times, alphas }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TightnessSample {
    pub time: f64,
    pub alpha: f64,
    pub n_perp: f64,
    pub m_perp: f64,
    pub n_bound: f64,
    pub m_bound: f64,
}

impl TightnessSample {
    pub fn n_margin(&self) -> f64 {
        self.n_bound - self.n_perp
    }

    pub fn m_margin(&self) -> f64 {
        self.m_bound - self.m_perp
    }
}

/// Fitted tail `M⊥(t, alpha) <= D_t exp(-d_t alpha)` at one time.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TailFit {
    pub time: f64,
    pub rate: f64,
    pub prefactor: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TightnessRecord {
    pub samples: Vec<TightnessSample>,
    pub tail_fits: Vec<TailFit>,
    pub overflow: f64,
    /// Constant of the N⊥ envelope, `e^gamma / gamma`.
    pub envelope_constant: f64,
}

impl TightnessRecord {
    pub fn min_n_margin(&self) -> f64 {
        self.samples.iter().map(TightnessSample::n_margin).fold(f64::INFINITY, f64::min)
    }

    pub fn min_m_margin(&self) -> f64 {
        self.samples.iter().map(TightnessSample::m_margin).fold(f64::INFINITY, f64::min)
    }

    /// Every sample satisfies `N⊥ <= M⊥`.
    pub fn ordered(&self) -> bool {
        self.samples.iter().all(|s| s.n_perp <= s.m_perp * (1.0 + 1e-12) + 1e-300)
    }

    pub fn holds(&self) -> bool {
        self.min_n_margin() >= 0.0 && self.min_m_margin() >= 0.0
    }
}

/// Tightness envelopes depending on the initial data only, with `Γ̄(t)`
/// supplied by the caller:
///
/// `N⊥(t, α) <= N⊥(0, α') + C |g| Γ̄ e^{-γ α'}`,
/// `M⊥(t, α) <= (|g|/β) sum_{n > ⌊α⌋} n e^{-γ n}
///     + 2 e^t [∫_{α'}^∞ N⊥(0, s) ds + α' N⊥(0, α') + C |g| Γ̄ (1/γ + α') e^{-γ α'}]`
///
/// with `α' = α e^{-t}` and `C = e^γ / γ`.
#[derive(Debug, Clone)]
pub struct RunoffEnvelope {
    init: QuasiTable,
    /// `∫_{b_i}^∞ N⊥(0, s) ds` at `b_i = i delta_a`.
    tail: Vec<f64>,
    beta: f64,
    gamma: f64,
    g_norm: f64,
    n_top: usize,
}

impl RunoffEnvelope {
    pub fn new(g: &SimState, params: &ModelParams) -> Self {
        let ss = SuperSolution::new(params);
        let init = QuasiTable::new(g, params);
        let h = params.grid.delta_a;
        let m = (init.tail_end() / h).ceil() as usize;
        let mut tail = vec![0.0; m + 1];
        for i in (0..m).rev() {
            tail[i] = tail[i + 1] + init.piece(i as f64 * h, (i + 1) as f64 * h);
        }
        Self {
            init,
            tail,
            beta: params.beta,
            gamma: ss.gamma_decay,
            g_norm: ss.flat_norm(g),
            n_top: g.n_max(),
        }
    }

    pub(crate) fn beta(&self) -> f64 {
        self.beta
    }

    pub(crate) fn g_norm(&self) -> f64 {
        self.g_norm
    }

    pub(crate) fn gamma(&self) -> f64 {
        self.gamma
    }

    /// Cutoff beyond which only the Γ̄ term of the `M⊥` envelope is nonzero.
    pub(crate) fn support_end(&self) -> f64 {
        self.init.tail_end()
    }

    pub fn constant(&self) -> f64 {
        self.gamma.exp() / self.gamma
    }

    /// `∫_b^∞ N⊥(0, s) ds` from the precomputed table.
    pub fn tail_integral(&self, b: f64) -> f64 {
        let h = self.init.delta_a;
        let b = b.max(0.0);
        let j = (b / h).floor() as usize;
        if j + 1 >= self.tail.len() {
            return 0.0;
        }
        self.tail[j + 1] + self.init.piece(b, (j + 1) as f64 * h)
    }

    pub fn first(&self, t: f64, alpha: f64, gamma_bar: f64) -> f64 {
        let ap = alpha * (-t).exp();
        self.init.first_floor(ap) + self.constant() * self.g_norm * gamma_bar * (-self.gamma * ap).exp()
    }

    /// `M⊥` envelope split as `base + slope * gamma_bar`.
    pub fn second_parts(&self, t: f64, alpha: f64) -> (f64, f64) {
        let (gamma, g_norm) = (self.gamma, self.g_norm);
        let ap = alpha * (-t).exp();
        let nu = alpha.floor() as usize;
        let class_part: f64 = ((nu + 1).max(N_MIN)..=self.n_top)
            .map(|n| n as f64 * (-gamma * n as f64).exp())
            .sum::<f64>()
            * g_norm
            / self.beta;
        let init = self.tail_integral(ap) + ap * self.init.first_floor(ap);
        let slope = 2.0 * t.exp() * self.constant() * g_norm * (1.0 / gamma + ap) * (-gamma * ap).exp();
        (class_part + 2.0 * t.exp() * init, slope)
    }

    pub fn second(&self, t: f64, alpha: f64, gamma_bar: f64) -> f64 {
        let (base, slope) = self.second_parts(t, alpha);
        base + slope * gamma_bar
    }
}

/// Measure `N⊥` and `M⊥` on the lattice and compare with the envelopes of
/// [`RunoffEnvelope`], using the recorded running maximum `Γ̄(t)`.
pub fn tightness_envelope(rec: &TrajectoryRecord, params: &ModelParams, lattice: &TightnessLattice) -> TightnessRecord {
    let g = rec.samples.first().expect("trajectory without samples");
    let env = RunoffEnvelope::new(g, params);
    let mut samples = Vec::new();
    let mut tail_fits = Vec::new();
    for &t in &lattice.times {
        let Some(state) = rec.sample_at(t) else { continue };
        let j = rec
            .times
            .iter()
            .position(|&s| (s - t).abs() <= 1e-9 * t.abs().max(1.0))
            .unwrap_or(rec.len() - 1);
        let gbar = rec.gamma_bar[j];
        let table = QuasiTable::new(state, params);
        let m_values: Vec<f64> = lattice.alphas.iter().map(|&a| table.second(a)).collect();
        for (&alpha, &m_perp) in lattice.alphas.iter().zip(&m_values) {
            samples.push(TightnessSample {
                time: t,
                alpha,
                n_perp: table.first_floor(alpha),
                m_perp,
                n_bound: env.first(t, alpha, gbar),
                m_bound: env.second(t, alpha, gbar),
            });
        }
        if let Some((rate, prefactor)) = fit_exponential_tail(&lattice.alphas, &m_values) {
            tail_fits.push(TailFit { time: t, rate, prefactor });
        }
    }
    TightnessRecord {
        samples,
        tail_fits,
        overflow: rec.overflow.last().copied().unwrap_or(0.0),
        envelope_constant: env.constant(),
    }
}
