//! Propagator `exp(theta J)` for the collision operator.
//!
//! Uniformisation: with `q >= max u_n`, `P = I + J/q` is entrywise
//! non-negative and `exp(theta J) = exp(-q theta) exp(q theta P)`. The series
//! for `exp(y (P - I))` with `y <= 1` has only non-negative terms, and the
//! result is squared back up. No cancellation occurs, so the propagator is
//! non-negative and keeps `phi` fixed to rounding.

use crate::collision::collision_matrix;
use crate::error::{Error, Result};
use crate::exec::Exec;
use crate::linalg::Mat;
use crate::params::ModelParams;
use crate::state::SimState;

const MAX_TERMS: usize = 60;

/// `exp(theta A)` for a tri-diagonal `A` with non-negative off-diagonals and
/// diagonal bounded below by `-q`.
pub fn expm_tridiag(a: &Mat, q: f64, theta: f64) -> Result<Mat> {
    let n = a.dim();
    if !(theta >= 0.0 && theta.is_finite()) {
        return Err(Error::Numerical(format!("propagator time must be finite and non-negative, got {theta}")));
    }
    if theta == 0.0 || q == 0.0 {
        return Ok(Mat::identity(n));
    }
    let x = q * theta;
    let mut s = 0u32;
    while x / 2f64.powi(s as i32) > 1.0 {
        s += 1;
    }
    let y = x / 2f64.powi(s as i32);

    // uniformised chain P = I + A/q, stored as three bands
    let sub: Vec<f64> = (0..n).map(|j| if j > 0 { a[(j - 1, j)] / q } else { 0.0 }).collect();
    let diag: Vec<f64> = (0..n).map(|j| 1.0 + a[(j, j)] / q).collect();
    let sup: Vec<f64> = (0..n).map(|j| if j + 1 < n { a[(j + 1, j)] / q } else { 0.0 }).collect();
    if diag.iter().any(|&d| d < -1e-15) {
        return Err(Error::Numerical("uniformisation rate below the largest loss rate".into()));
    }

    let mut sum = Mat::identity(n);
    let mut term = Mat::identity(n);
    let mut coef = 1.0;
    let mut k = 1;
    loop {
        // term <- term * P (right multiplication by a tri-diagonal)
        let prev = term.clone();
        for i in 0..n {
            for j in 0..n {
                let mut v = prev[(i, j)] * diag[j];
                if j > 0 {
                    v += prev[(i, j - 1)] * sub[j];
                }
                if j + 1 < n {
                    v += prev[(i, j + 1)] * sup[j];
                }
                term[(i, j)] = v;
            }
        }
        coef *= y / k as f64;
        let mut scaled = term.clone();
        scaled.scale(coef);
        sum.add_assign(&scaled);
        if coef < 1e-18 {
            break;
        }
        k += 1;
        if k > MAX_TERMS {
            return Err(Error::Numerical(format!("series did not converge for q theta = {x}")));
        }
    }
    sum.scale((-y).exp());
    for _ in 0..s {
        sum = sum.matmul(&sum);
    }
    Ok(sum)
}

/// `exp(theta J)` for one model, shared by every area node.
#[derive(Debug, Clone)]
pub struct Propagator {
    pub theta: f64,
    mat: Mat,
}

impl Propagator {
    pub fn new(params: &ModelParams, theta: f64) -> Result<Self> {
        let j = collision_matrix(params);
        Self::from_generator(&j, theta)
    }

    pub fn from_generator(j: &Mat, theta: f64) -> Result<Self> {
        let q = (0..j.dim()).fold(0.0f64, |m, k| m.max(-j[(k, k)]));
        Ok(Self {
            theta,
            mat: expm_tridiag(j, q, theta)?,
        })
    }

    pub fn matrix(&self) -> &Mat {
        &self.mat
    }

    /// Apply to every class column of `state`.
    pub fn apply_panel(&self, state: &mut SimState, exec: Exec) {
        let nc = state.n_classes();
        let m = &self.mat;
        exec.for_each_chunk(state.as_mut_slice(), nc, |_, col| {
            let mut buf = [0.0f64; 64];
            if nc <= buf.len() {
                m.matvec_into(col, &mut buf[..nc]);
                col.copy_from_slice(&buf[..nc]);
            } else {
                let out = m.matvec(col);
                col.copy_from_slice(&out);
            }
        });
    }
}
