//! Moment scheme for self-similar profiles.
//!
//! Integrating the stationary rescaled equation over `xi` gives, for the class
//! integrals `Phi_n` of a profile with boundary values `phi_n(0)`,
//!
//! `(I + Γ J) Phi = b`, `b_n = (6 - n) phi_n(0)`,
//!
//! with `Γ = Γ_N / Γ_D`, `Γ_N` built from the boundary values and `Γ_D` from
//! the moments. For frozen `Γ` this is a tri-diagonal solve; the
//! self-consistent `Γ` is the root of `Γ Γ_D(Phi(Γ)) - Γ_N` above the last
//! resonance `1 / |λ|` of `J`, where `λ` is its largest nonzero eigenvalue.

use serde::{Deserialize, Serialize};

use crate::collision::collision_into;
use crate::error::{Error, Result};
use crate::moments::gamma_denominator;
use crate::params::{AreaGrid, ModelParams, N_MIN};
use crate::supersolution::loss_rates;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SelfSimInput {
    /// `phi_2(0), ..., phi_5(0)`.
    pub boundary: [f64; 4],
    pub beta: f64,
    /// Largest class of the moment vector.
    pub cap: usize,
    /// Relative tolerance on Γ.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SelfSimInput {
    fn default() -> Self {
        Self {
            boundary: [1.0, 0.0, 0.0, 0.0],
            beta: 1.0,
            cap: 50,
            tol: 1e-15,
            max_iter: 200,
        }
    }
}

impl SelfSimInput {
    pub fn validate(&self) -> Result<()> {
        if self.boundary.iter().any(|&v| !(v >= 0.0) || !v.is_finite()) {
            return Err(Error::InvalidParams("boundary values must be finite and non-negative".into()));
        }
        if self.tol <= 0.0 || self.max_iter == 0 {
            return Err(Error::InvalidParams("tolerance and iteration cap must be positive".into()));
        }
        self.params().map(|_| ())
    }

    fn params(&self) -> Result<ModelParams> {
        ModelParams::truncated(self.beta, self.cap, AreaGrid::new(1.0, 2)?)
    }

    fn rhs(&self) -> Vec<f64> {
        let mut b = vec![0.0; self.cap + 1 - N_MIN];
        for (k, v) in self.boundary.iter().enumerate() {
            b[k] = (4 - k) as f64 * v;
        }
        b
    }

    /// `Γ_N = sum (n - 6)^2 phi_n(0)`.
    pub fn gamma_numerator(&self) -> f64 {
        self.boundary
            .iter()
            .enumerate()
            .map(|(k, v)| ((4 - k) * (4 - k)) as f64 * v)
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelfSimResult {
    /// `Phi_n` for `n = 2..=cap`.
    pub moments: Vec<f64>,
    /// Self-consistent Γ, `None` for the trivial solution.
    pub gamma: Option<f64>,
    pub gamma_n: f64,
    pub gamma_d: f64,
    /// Lower end of the search interval, `1 / |λ|`.
    pub resonance: f64,
    /// `max_n |(Phi + Γ J Phi - b)_n| / max_n |b_n|`.
    pub relation_residual: f64,
    /// `|sum Phi - sum b| / sum b`.
    pub consistency_residual: f64,
    /// `|Γ Γ_D - Γ_N| / Γ_N` after each root-finding step.
    pub history: Vec<f64>,
    /// All `Phi_n >= 0`: only then is the candidate an admissible profile.
    pub admissible: bool,
}

/// Largest nonzero eigenvalue of the truncated collision matrix, by Sturm
/// bisection on its symmetrisation (the top eigenvalue is 0 with eigenvector
/// `phi`).
pub fn spectral_gap(params: &ModelParams) -> f64 {
    let u = loss_rates(params);
    let m = u.len();
    let b = params.beta;
    let d: Vec<f64> = u.iter().map(|x| -x).collect();
    // J[k][k+1] = (b+1)(n+1), J[k+1][k] = b n with n = k + 2
    let e2: Vec<f64> = (0..m - 1)
        .map(|k| {
            let n = (k + N_MIN) as f64;
            (b + 1.0) * (n + 1.0) * b * n
        })
        .collect();
    let below = |x: f64| {
        let mut count = 0;
        let mut q = d[0] - x;
        if q < 0.0 {
            count += 1;
        }
        for k in 1..m {
            let prev = if q == 0.0 { f64::EPSILON } else { q };
            q = d[k] - x - e2[k - 1] / prev;
            if q < 0.0 {
                count += 1;
            }
        }
        count
    };
    let radius = u.iter().copied().fold(0.0, f64::max) * 3.0;
    let (mut lo, mut hi) = (-radius, 0.0);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if below(mid) >= m - 1 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Tri-diagonal solve of `(I + g J) x = rhs` by forward elimination.
fn solve_shifted(params: &ModelParams, g: f64, rhs: &[f64]) -> Vec<f64> {
    let u = loss_rates(params);
    let m = u.len();
    let b = params.beta;
    let diag: Vec<f64> = u.iter().map(|x| 1.0 - g * x).collect();
    let upper = |k: usize| g * (b + 1.0) * (k + N_MIN + 1) as f64;
    let lower = |k: usize| g * b * (k + N_MIN) as f64;
    let mut c = vec![0.0; m];
    let mut y = vec![0.0; m];
    let mut piv = diag[0];
    c[0] = upper(0) / piv;
    y[0] = rhs[0] / piv;
    for k in 1..m {
        piv = diag[k] - lower(k - 1) * c[k - 1];
        if k + 1 < m {
            c[k] = upper(k) / piv;
        }
        y[k] = (rhs[k] - lower(k - 1) * y[k - 1]) / piv;
    }
    for k in (0..m - 1).rev() {
        y[k] -= c[k] * y[k + 1];
    }
    y
}

/// Self-consistent moment vector and Γ for the given boundary values.
pub fn selfsim_moments(input: &SelfSimInput) -> Result<SelfSimResult> {
    input.validate()?;
    let params = input.params()?;
    let b = input.rhs();
    let m = b.len();
    let gamma_n = input.gamma_numerator();
    let lambda = spectral_gap(&params);
    let resonance = 1.0 / lambda.abs();
    if gamma_n == 0.0 {
        return Ok(SelfSimResult {
            moments: vec![0.0; m],
            gamma: None,
            gamma_n,
            gamma_d: 0.0,
            resonance,
            relation_residual: 0.0,
            consistency_residual: 0.0,
            history: Vec::new(),
            admissible: true,
        });
    }

    let excess = |g: f64| {
        let phi = solve_shifted(&params, g, &b);
        g * gamma_denominator(&phi, &params) - gamma_n
    };
    let mut lo = resonance * (1.0 + 1e-9);
    let f_lo = excess(lo);
    let mut hi = 2.0 * lo;
    let mut f_hi = excess(hi);
    let mut expansions = 0;
    while f_hi.signum() == f_lo.signum() {
        lo = hi;
        hi *= 2.0;
        f_hi = excess(hi);
        expansions += 1;
        if expansions > 60 {
            return Err(Error::Numerical(format!(
                "no self-consistent weight above the resonance {resonance}"
            )));
        }
    }
    let sign_lo = excess(lo).signum();
    let mut history = Vec::new();
    let mut converged = false;
    for _ in 0..input.max_iter {
        let mid = 0.5 * (lo + hi);
        let f = excess(mid);
        history.push(f.abs() / gamma_n);
        if f.signum() == sign_lo {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= input.tol * hi {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NonContraction {
            iterations: input.max_iter,
            last_update: (hi - lo) / hi,
        });
    }
    let gamma = 0.5 * (lo + hi);
    let moments = solve_shifted(&params, gamma, &b);
    let gamma_d = gamma_denominator(&moments, &params);
    if gamma_d <= 0.0 {
        return Err(Error::DegenerateWeight { gamma_d });
    }

    let mut jphi = vec![0.0; m];
    collision_into(&moments, params.beta, &loss_rates(&params), &mut jphi);
    let b_scale = b.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let relation_residual = (0..m)
        .map(|k| (moments[k] + gamma * jphi[k] - b[k]).abs())
        .fold(0.0, f64::max)
        / b_scale;
    let b_sum: f64 = b.iter().sum();
    let consistency_residual = (moments.iter().sum::<f64>() - b_sum).abs() / b_sum;
    let admissible = moments.iter().all(|&v| v >= 0.0);
    Ok(SelfSimResult {
        moments,
        gamma: Some(gamma),
        gamma_n,
        gamma_d,
        resonance,
        relation_residual,
        consistency_residual,
        history,
        admissible,
    })
}

/// Lewis-law asymptote `<xi>_n ≈ b (n - 6) + c` with `b = 1 / (Γ + 1)` and
/// `c = b ((2β + 1) - 6Γ)`.
pub fn lewis_asymptote(beta: f64, gamma: f64) -> (f64, f64) {
    let b = 1.0 / (gamma + 1.0);
    (b, b * ((2.0 * beta + 1.0) - 6.0 * gamma))
}
