//! Tri-diagonal collision operator `J = J+ - J-` acting on class vectors.

use crate::error::{Error, Result};
use crate::linalg::Mat;
use crate::params::{ModelParams, OperatorMode, N_MIN};
use crate::supersolution::loss_rates;

fn check_len(col: &[f64], params: &ModelParams) -> Result<()> {
    if col.len() != params.n_classes() {
        return Err(Error::Contract(format!(
            "class vector has length {}, expected n0 - 1 = {}",
            col.len(),
            params.n_classes()
        )));
    }
    Ok(())
}

/// Gain part: `(b+1)(n+1) f_{n+1} + b(n-1) f_{n-1}` with missing neighbours dropped.
pub(crate) fn gain_into(col: &[f64], beta: f64, out: &mut [f64]) {
    let nc = col.len();
    for k in 0..nc {
        let n = (k + N_MIN) as f64;
        let mut g = 0.0;
        if k + 1 < nc {
            g += (beta + 1.0) * (n + 1.0) * col[k + 1];
        }
        if k > 0 {
            g += beta * (n - 1.0) * col[k - 1];
        }
        out[k] = g;
    }
}

pub(crate) fn collision_into(col: &[f64], beta: f64, u: &[f64], out: &mut [f64]) {
    gain_into(col, beta, out);
    for k in 0..col.len() {
        out[k] -= u[k] * col[k];
    }
}

/// `(Jf)_n` for one area node.
pub fn apply_collision(col: &[f64], params: &ModelParams) -> Result<Vec<f64>> {
    check_len(col, params)?;
    let mut out = vec![0.0; col.len()];
    collision_into(col, params.beta, &loss_rates(params), &mut out);
    Ok(out)
}

pub fn apply_collision_gain(col: &[f64], params: &ModelParams) -> Result<Vec<f64>> {
    check_len(col, params)?;
    let mut out = vec![0.0; col.len()];
    gain_into(col, params.beta, &mut out);
    Ok(out)
}

pub fn apply_collision_loss(col: &[f64], params: &ModelParams) -> Result<Vec<f64>> {
    check_len(col, params)?;
    Ok(loss_rates(params).iter().zip(col).map(|(u, f)| u * f).collect())
}

/// Dense matrix of `J+`.
pub fn gain_matrix(params: &ModelParams) -> Mat {
    let nc = params.n_classes();
    let b = params.beta;
    let mut m = Mat::zeros(nc);
    for k in 0..nc {
        let n = (k + N_MIN) as f64;
        if k + 1 < nc {
            m[(k, k + 1)] = (b + 1.0) * (n + 1.0);
        }
        if k > 0 {
            m[(k, k - 1)] = b * (n - 1.0);
        }
    }
    m
}

/// Dense matrix of `J`.
pub fn collision_matrix(params: &ModelParams) -> Mat {
    let mut m = gain_matrix(params);
    for (k, u) in loss_rates(params).into_iter().enumerate() {
        m[(k, k)] = -u;
    }
    m
}

/// Right-hand side of the weighted first-moment identity
/// `sum n (Jf)_n = remainder - sum n f_n`.
pub fn first_moment_remainder(col: &[f64], params: &ModelParams) -> f64 {
    let b = params.beta;
    let top = match params.mode {
        OperatorMode::Truncated => params.n0 as f64 * b * col[col.len() - 1],
        OperatorMode::Full => 0.0,
    };
    2.0 * (b + 1.0) * col[0] - top
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::AreaGrid;
    use crate::supersolution::{phi, SuperSolution};
    use proptest::prelude::*;

    fn params(beta: f64, n0: usize) -> ModelParams {
        ModelParams::truncated(beta, n0, AreaGrid::new(0.1, 3).unwrap()).unwrap()
    }

    fn unit(p: &ModelParams, n: usize, v: f64) -> Vec<f64> {
        let mut c = vec![0.0; p.n_classes()];
        c[p.idx(n)] = v;
        c
    }

    #[test]
    fn lens_row_from_pentagon_neighbour() {
        let p = params(1.0, 10);
        let j = apply_collision(&unit(&p, 3, 2.5), &p).unwrap();
        assert_eq!(j[p.idx(2)], 15.0);
    }

    #[test]
    fn unit_square_column() {
        for &b in &[0.3, 1.0, 1.7] {
            let p = params(b, 10);
            let j = apply_collision(&unit(&p, 4, 1.0), &p).unwrap();
            assert!((j[p.idx(3)] - 4.0 * (b + 1.0)).abs() < 1e-14);
            assert!((j[p.idx(4)] + 4.0 * (2.0 * b + 1.0)).abs() < 1e-14);
            assert!((j[p.idx(5)] - 4.0 * b).abs() < 1e-14);
            assert!(j.iter().sum::<f64>().abs() < 1e-13);
        }
    }

    #[test]
    fn top_class_gain() {
        let p = params(0.8, 8);
        let j = apply_collision(&unit(&p, 7, 1.0), &p).unwrap();
        assert!((j[p.idx(8)] - 7.0 * 0.8).abs() < 1e-15);
        let loss = apply_collision_loss(&unit(&p, 8, 1.0), &p).unwrap();
        assert!((loss[p.idx(8)] - 1.8 * 8.0).abs() < 1e-15);
    }

    #[test]
    fn lens_loss_and_zero_gain() {
        let p = params(1.0, 9);
        assert_eq!(apply_collision_loss(&unit(&p, 2, 1.0), &p).unwrap()[0], 2.0);
        let z = apply_collision_gain(&vec![0.0; p.n_classes()], &p).unwrap();
        assert!(z.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn length_mismatch_is_contract_error() {
        let p = params(1.0, 9);
        assert!(matches!(apply_collision(&[1.0; 3], &p), Err(Error::Contract(_))));
    }

    #[test]
    fn supersolution_in_kernel() {
        let p = params(1.0, 20);
        let col: Vec<f64> = p.classes().map(|n| phi(1.0, n)).collect();
        let j = apply_collision(&col, &p).unwrap();
        let u = loss_rates(&p);
        for k in 0..j.len() {
            assert!(j[k].abs() <= 8.0 * f64::EPSILON * u[k] * col[k]);
        }
    }

    #[test]
    fn matrix_matches_matvec() {
        let p = params(1.3, 11);
        let col: Vec<f64> = (0..p.n_classes()).map(|k| (k as f64 * 0.7).sin().abs()).collect();
        let direct = apply_collision(&col, &p).unwrap();
        let dense = collision_matrix(&p).matvec(&col);
        for (a, b) in direct.iter().zip(&dense) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    proptest! {
        #[test]
        fn gain_minus_loss_is_collision(col in prop::collection::vec(0.0f64..10.0, 11), beta in 0.05f64..1.95) {
            let p = params(beta, 12);
            let j = apply_collision(&col, &p).unwrap();
            let g = apply_collision_gain(&col, &p).unwrap();
            let l = apply_collision_loss(&col, &p).unwrap();
            for k in 0..col.len() {
                prop_assert_eq!(j[k], g[k] - l[k]);
            }
        }

        #[test]
        fn gain_bounded_by_supersolution(raw in prop::collection::vec(0.0f64..1.0, 15), beta in 0.05f64..1.95) {
            let p = params(beta, 16);
            let ss = SuperSolution::new(&p);
            let scale = raw.iter().zip(&ss.phi).fold(0.0f64, |m, (f, ph)| m.max(f / ph));
            prop_assume!(scale > 0.0);
            let col: Vec<f64> = raw.iter().map(|f| f / scale).collect();
            let g = apply_collision_gain(&col, &p).unwrap();
            for k in 0..col.len() {
                prop_assert!(g[k] <= ss.u[k] * ss.phi[k] * (1.0 + 1e-14));
            }
        }
    }
}
