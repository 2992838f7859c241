//! Composite trapezoid quadrature on the node grid.
//!
//! The trapezoid sum is the exact integral of the piecewise-linear
//! interpolant, so partial integrals over `[0, alpha]` and `[alpha, a_max]`
//! interpolate linearly inside the cut cell.

/// Trapezoid weight of node `i` on a grid with `num_nodes` nodes.
#[inline]
pub fn weight(i: usize, num_nodes: usize, delta_a: f64) -> f64 {
    if i == 0 || i + 1 == num_nodes {
        0.5 * delta_a
    } else {
        delta_a
    }
}

/// `∫ v` over the whole grid, summed in node order.
pub fn trapz_by(num_nodes: usize, delta_a: f64, v: impl Fn(usize) -> f64) -> f64 {
    let mut s = 0.0;
    for i in 0..num_nodes {
        s += weight(i, num_nodes, delta_a) * v(i);
    }
    s
}

pub fn trapz(values: &[f64], delta_a: f64) -> f64 {
    trapz_by(values.len(), delta_a, |i| values[i])
}

/// `∫_alpha^{a_max} v` of the piecewise-linear interpolant.
pub fn integral_above_by(num_nodes: usize, delta_a: f64, alpha: f64, v: impl Fn(usize) -> f64) -> f64 {
    if alpha <= 0.0 {
        return trapz_by(num_nodes, delta_a, v);
    }
    let last = num_nodes - 1;
    let x = alpha / delta_a;
    if x >= last as f64 {
        return 0.0;
    }
    let j = x.floor() as usize;
    let frac = x - j as f64;
    let (v0, v1) = (v(j), v(j + 1));
    let va = v0 + frac * (v1 - v0);
    // remainder of cell j, from alpha to a_{j+1}
    let mut s = 0.5 * (1.0 - frac) * delta_a * (va + v1);
    for i in j + 1..last {
        s += 0.5 * delta_a * (v(i) + v(i + 1));
    }
    s
}

/// `∫_0^alpha v` of the piecewise-linear interpolant.
pub fn integral_below_by(num_nodes: usize, delta_a: f64, alpha: f64, v: impl Fn(usize) -> f64) -> f64 {
    if alpha <= 0.0 {
        return 0.0;
    }
    let last = num_nodes - 1;
    let x = alpha / delta_a;
    if x >= last as f64 {
        return trapz_by(num_nodes, delta_a, v);
    }
    let j = x.floor() as usize;
    let frac = x - j as f64;
    let mut s = 0.0;
    for i in 0..j {
        s += 0.5 * delta_a * (v(i) + v(i + 1));
    }
    let (v0, v1) = (v(j), v(j + 1));
    let va = v0 + frac * (v1 - v0);
    s + 0.5 * frac * delta_a * (v0 + va)
}
