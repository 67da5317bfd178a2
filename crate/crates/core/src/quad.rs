//! Panel quadrature on uniform grids.
//!
//! The law builder works on functions it can evaluate anywhere (drift and
//! diffusion descriptors) and on tabulated functions known at nodes and
//! panel midpoints. Per-panel Gauss–Legendre handles the former, composite
//! Simpson with exact midpoint values the latter; both keep cumulative
//! tables accurate enough that refinement changes stay below `QUAD_TOL`
//! even where integrands grow exponentially.

#![allow(unused_imports)]

use alloc::vec::Vec;

use crate::math::FloatExt;

// 4-point Gauss-Legendre abscissae/weights on [-1, 1].
const GL4_X: [f64; 4] = [
    -0.861_136_311_594_052_6,
    -0.339_981_043_584_856_26,
    0.339_981_043_584_856_26,
    0.861_136_311_594_052_6,
];
const GL4_W: [f64; 4] = [
    0.347_854_845_137_453_85,
    0.652_145_154_862_546_2,
    0.652_145_154_862_546_2,
    0.347_854_845_137_453_85,
];

/// 4-point Gauss-Legendre integral of `f` over `[a, b]`.
pub fn gl4<F: Fn(f64) -> f64>(f: F, a: f64, b: f64) -> f64 {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut acc = 0.0;
    for (x, w) in GL4_X.iter().zip(GL4_W.iter()) {
        acc += w * f(c + h * x);
    }
    acc * h
}

/// Cumulative integral of `f` along a uniform grid.
///
/// Returns `(at_nodes, at_midpoints)` where `at_nodes[i]` integrates from
/// the first node to node `i` (so `at_nodes[0] == 0`) and `at_midpoints[p]`
/// integrates from the first node to the midpoint of panel `p`. Each panel
/// uses Gauss-Legendre, so smooth integrands are resolved to far below the
/// panel-size-squared error of a trapezoid rule.
pub fn cumulative_gl4<F: Fn(f64) -> f64>(
    f: F,
    lower: f64,
    step: f64,
    len: usize,
) -> (Vec<f64>, Vec<f64>) {
    let mut nodes = Vec::with_capacity(len);
    let mut mids = Vec::with_capacity(len - 1);
    let mut acc = 0.0;
    nodes.push(0.0);
    for p in 0..len - 1 {
        let a = lower + step * p as f64;
        let m = a + 0.5 * step;
        let half = gl4(&f, a, m);
        mids.push(acc + half);
        acc += half + gl4(&f, m, a + step);
        nodes.push(acc);
    }
    (nodes, mids)
}

/// Trapezoid integral of tabulated values on a uniform grid.
pub fn trapz(values: &[f64], step: f64) -> f64 {
    if values.len() < 2 {
        return 0.0;
    }
    let inner: f64 = values[1..values.len() - 1].iter().sum();
    step * (0.5 * (values[0] + values[values.len() - 1]) + inner)
}

/// Running trapezoid integral; entry `i` integrates from node 0 to node `i`.
pub fn cumtrapz(values: &[f64], step: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    out.push(0.0);
    for w in values.windows(2) {
        acc += 0.5 * step * (w[0] + w[1]);
        out.push(acc);
    }
    out
}

/// Forward cumulative Simpson integral using node and midpoint values.
///
/// `out[i]` integrates from node 0 to node `i`; panel `p` contributes
/// `step/6 * (v[p] + 4 m[p] + v[p+1])`.
pub fn cumsimpson_forward(node_vals: &[f64], mid_vals: &[f64], step: f64) -> Vec<f64> {
    debug_assert_eq!(mid_vals.len() + 1, node_vals.len());
    let mut out = Vec::with_capacity(node_vals.len());
    let mut acc = 0.0;
    out.push(0.0);
    for p in 0..mid_vals.len() {
        acc += step / 6.0 * (node_vals[p] + 4.0 * mid_vals[p] + node_vals[p + 1]);
        out.push(acc);
    }
    out
}

/// Backward cumulative Simpson integral: `out[i]` integrates from node `i`
/// to the last node.
pub fn cumsimpson_backward(node_vals: &[f64], mid_vals: &[f64], step: f64) -> Vec<f64> {
    debug_assert_eq!(mid_vals.len() + 1, node_vals.len());
    let n = node_vals.len();
    let mut out = alloc::vec![0.0; n];
    let mut acc = 0.0;
    for p in (0..n - 1).rev() {
        acc += step / 6.0 * (node_vals[p] + 4.0 * mid_vals[p] + node_vals[p + 1]);
        out[p] = acc;
    }
    out
}

/// Checks that tabulated nonnegative integrand values decay towards the
/// given edge of the grid, i.e. that truncating the improper integral there
/// is sound. Looks at the outermost `window` values.
pub fn tail_decays(values: &[f64], right_edge: bool, window: usize) -> bool {
    let n = values.len();
    if n < 2 * window {
        return false;
    }
    let (outer, inner) = if right_edge {
        (&values[n - window..], &values[n - 2 * window..n - window])
    } else {
        (&values[..window], &values[window..2 * window])
    };
    let outer_max = outer.iter().cloned().fold(0.0, f64::max);
    let inner_max = inner.iter().cloned().fold(0.0, f64::max);
    // Decaying tails: the outermost band contributes less than the band
    // before it, or both are already negligible.
    outer_max <= inner_max || outer_max < 1e-300
}
