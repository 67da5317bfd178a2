//! Empirical distribution function and invariant-density estimators
//! computed from a discretised path.
//!
//! All estimators reduce to occupation sums of the form
//! `sum_k w_k 1_{X_k < x}` evaluated at every grid node. Bucketing the
//! samples into grid cells and prefix-summing makes each curve O(path +
//! grid) instead of O(path * grid). Stochastic integrals are left-point
//! Itô sums on the simulation grid throughout.

#![allow(unused_imports)]

use alloc::vec;
use alloc::vec::Vec;

use crate::error::Error;
use crate::grid::SpatialGrid;
use crate::law::InvariantLaw;
use crate::math::FloatExt;
use crate::model::DiffusionModel;
use crate::simulate::SamplePath;

/// Fraction of occupation time allowed outside the grid.
const OUTSIDE_LIMIT: f64 = 0.01;

/// Result of bucketed prefix accumulation: `at_node[i]` holds the sum of
/// weights over samples strictly below node `i`.
pub(crate) struct OccupationPrefix {
    pub at_node: Vec<f64>,
    pub outside_fraction: f64,
}

/// Accumulates `sum_k weight(k) 1_{X_k < node_i}` for all nodes at once.
/// Weights are indexed by the time index `k` over `0..n_steps` (the final
/// point is excluded: left-point Riemann convention).
pub(crate) fn occupation_prefix<W: Fn(usize) -> f64>(
    path: &SamplePath,
    grid: &SpatialGrid,
    weight: W,
) -> OccupationPrefix {
    let n = grid.len();
    let steps = path.steps();
    let lower = grid.lower();
    let step = grid.step();
    let mut cells = vec![0.0f64; n + 1]; // cell n-1 is the last panel; slot n catches >= upper
    let mut below = 0.0;
    let mut outside = 0usize;
    for k in 0..steps {
        let x = path.values[k];
        let w = weight(k);
        if x < lower {
            below += w;
            outside += 1;
        } else {
            let raw = ((x - lower) / step) as usize;
            if raw >= n - 1 {
                if x > grid.upper() {
                    outside += 1;
                }
                cells[n - 1] += w;
            } else {
                cells[raw] += w;
            }
        }
    }
    let mut at_node = Vec::with_capacity(n);
    let mut acc = below;
    at_node.push(acc);
    for c in 0..n - 1 {
        acc += cells[c];
        at_node.push(acc);
    }
    OccupationPrefix { at_node, outside_fraction: outside as f64 / steps as f64 }
}

fn guard_coverage(outside_fraction: f64) -> Result<(), Error> {
    if outside_fraction > OUTSIDE_LIMIT {
        return Err(Error::GridTooNarrow { outside_fraction: outside_fraction * 100.0 });
    }
    Ok(())
}

/// Empirical distribution function `(1/T) int_0^T 1_{X_t < x} dt` at every
/// grid node. Exactly nondecreasing with values in `[0, 1]`.
pub fn edf(path: &SamplePath, grid: &SpatialGrid) -> Result<Vec<f64>, Error> {
    path.validate()?;
    let steps = path.steps() as f64;
    let occ = occupation_prefix(path, grid, |_| 1.0);
    guard_coverage(occ.outside_fraction)?;
    Ok(occ.at_node.iter().map(|c| c / steps).collect())
}

/// Local-time estimator values and the mass removed by clipping negative
/// discretisation excursions.
#[derive(Debug, Clone, PartialEq)]
pub struct LteCurve {
    pub values: Vec<f64>,
    /// Integral of the clipped negative part.
    pub clipped_mass: f64,
}

/// Local time estimator of the invariant density,
/// `f_T(x) = (|X_T - x| - |X_0 - x| - int sgn(X_t - x) dX_t) / (T sigma(x)^2)`,
/// with the stochastic integral realised as the left-point Itô sum.
pub fn lte(path: &SamplePath, law: &InvariantLaw) -> Result<LteCurve, Error> {
    path.validate()?;
    let grid = law.grid();
    let horizon = path.horizon();
    let x0 = path.values[0];
    let xt = *path.values.last().unwrap();
    let total_increment = xt - x0;

    // sum_k sgn(X_k - x) dX_k = (X_T - X_0) - 2 sum_k dX_k 1_{X_k < x}
    let values_ref = &path.values;
    let occ = occupation_prefix(path, grid, |k| values_ref[k + 1] - values_ref[k]);
    guard_coverage(occ.outside_fraction)?;

    let n = grid.len();
    let mut values = Vec::with_capacity(n);
    let mut clipped = 0.0;
    for i in 0..n {
        let x = grid.node(i);
        let ito_sum = total_increment - 2.0 * occ.at_node[i];
        let raw = ((xt - x).abs() - (x0 - x).abs() - ito_sum) / (horizon * law.sigma_sq()[i]);
        if raw < 0.0 {
            clipped -= raw;
            values.push(0.0);
        } else {
            values.push(raw);
        }
    }
    Ok(LteCurve { values, clipped_mass: clipped * grid.step() })
}

/// Kernel density estimator `(1/sqrt(T)) int K(sqrt(T)(X_t - x)) dt` with a
/// standard Gaussian kernel, i.e. bandwidth `1/sqrt(T)`.
///
/// Samples are linearly binned onto the grid and the kernel applied as a
/// precomputed discrete convolution; the binning error is quadratic in the
/// ratio of grid step to bandwidth.
pub fn kernel_density(path: &SamplePath, grid: &SpatialGrid) -> Result<Vec<f64>, Error> {
    path.validate()?;
    let n = grid.len();
    let steps = path.steps();
    let lower = grid.lower();
    let step = grid.step();
    let horizon = path.horizon();
    let bandwidth = 1.0 / horizon.sqrt();

    let mut mass = vec![0.0f64; n];
    let mut outside = 0usize;
    for k in 0..steps {
        let x = path.values[k];
        if x < lower || x > grid.upper() {
            outside += 1;
            // assign to the nearest edge node; mass is conserved
            let i = if x < lower { 0 } else { n - 1 };
            mass[i] += 1.0;
            continue;
        }
        let raw = (x - lower) / step;
        let c = (raw as usize).min(n - 2);
        let t = raw - c as f64;
        mass[c] += 1.0 - t;
        mass[c + 1] += t;
    }
    guard_coverage(outside as f64 / steps as f64)?;

    // kernel lookup over node offsets out to 8 bandwidths
    let reach = ((8.0 * bandwidth / step) as usize).max(1).min(n - 1);
    let norm = 1.0 / (2.0 * core::f64::consts::PI).sqrt();
    let kernel: Vec<f64> = (0..=reach)
        .map(|o| {
            let u = o as f64 * step / bandwidth;
            norm * (-0.5 * u * u).exp() / bandwidth
        })
        .collect();

    let dt_over_t = path.dt / horizon;
    let mut out = vec![0.0f64; n];
    for i in 0..n {
        let mut acc = mass[i] * kernel[0];
        for o in 1..=reach {
            if i >= o {
                acc += mass[i - o] * kernel[o];
            }
            if i + o < n {
                acc += mass[i + o] * kernel[o];
            }
        }
        out[i] = acc * dt_over_t;
    }
    Ok(out)
}

/// Unbiased density estimator with a user weight `h` (continuously
/// differentiable, nonvanishing):
/// `(2/T) int 1_{X<=x} h(X)/(sigma(x)^2 h(x)) dX + (1/T) int 1_{X<=x} h'(X) sigma(X)^2/(sigma(x)^2 h(x)) dt`.
///
/// With `h = 1` this reduces to the increment form `(2/T) int 1_{X<=x} dX / sigma(x)^2`.
pub fn unbiased_density(
    path: &SamplePath,
    grid: &SpatialGrid,
    model0: &DiffusionModel,
    weight: Option<(&dyn Fn(f64) -> f64, &dyn Fn(f64) -> f64)>,
) -> Result<Vec<f64>, Error> {
    path.validate()?;
    let horizon = path.horizon();
    let values_ref = &path.values;

    let (occ_dx, occ_dt) = match weight {
        None => {
            let occ = occupation_prefix(path, grid, |k| values_ref[k + 1] - values_ref[k]);
            (occ, None)
        }
        Some((h, dh)) => {
            for i in 0..grid.len() {
                if h(grid.node(i)).abs() < 1e-8 {
                    return Err(Error::WeightVanishes(1e-8));
                }
            }
            let occ = occupation_prefix(path, grid, |k| {
                h(values_ref[k]) * (values_ref[k + 1] - values_ref[k])
            });
            let occ_t = occupation_prefix(path, grid, |k| {
                dh(values_ref[k]) * model0.sigma_sq(values_ref[k]) * path.dt
            });
            (occ, Some(occ_t))
        }
    };
    guard_coverage(occ_dx.outside_fraction)?;

    let n = grid.len();
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let x = grid.node(i);
        let s2 = model0.sigma_sq(x);
        let v = match (&occ_dt, weight) {
            (Some(occ_t), Some((h, _))) => {
                ((2.0 / horizon) * occ_dx.at_node[i] + (1.0 / horizon) * occ_t.at_node[i])
                    / (s2 * h(x))
            }
            _ => (2.0 / horizon) * occ_dx.at_node[i] / s2,
        };
        out.push(v);
    }
    Ok(out)
}

/// Increment-form unbiased estimator `(2/T) int 1_{X <= x} dX / sigma(x)^2`.
pub fn increment_density(
    path: &SamplePath,
    grid: &SpatialGrid,
    model0: &DiffusionModel,
) -> Result<Vec<f64>, Error> {
    unbiased_density(path, grid, model0, None)
}

/// Hypothesis-drift occupation form `(2/T) int 1_{X < x} S0(X) dt / sigma(x)^2`;
/// under the hypothesis this converges to `f0`. The `sigma(x)^2` scaling
/// targets the density for a general diffusion coefficient; with
/// `sigma = 1` it is the classical second half of the sup-statistic
/// decomposition.
pub fn drift_density(
    path: &SamplePath,
    grid: &SpatialGrid,
    model0: &DiffusionModel,
) -> Result<Vec<f64>, Error> {
    path.validate()?;
    let horizon = path.horizon();
    let values_ref = &path.values;
    let occ = occupation_prefix(path, grid, |k| model0.drift(values_ref[k]) * path.dt);
    guard_coverage(occ.outside_fraction)?;
    Ok(occ
        .at_node
        .iter()
        .enumerate()
        .map(|(i, v)| 2.0 * v / (horizon * model0.sigma_sq(grid.node(i))))
        .collect())
}

/// The standard estimator bundle used by the test statistics.
#[derive(Debug, Clone)]
pub struct EmpiricalCurves {
    pub grid: SpatialGrid,
    pub f_hat: Vec<f64>,
    pub f_lte: Vec<f64>,
    pub lte_clipped_mass: f64,
    pub horizon: f64,
}

impl EmpiricalCurves {
    /// EDF + LTE on the law grid.
    pub fn compute(path: &SamplePath, law: &InvariantLaw) -> Result<Self, Error> {
        let f_hat = edf(path, law.grid())?;
        let l = lte(path, law)?;
        Ok(Self {
            grid: law.grid().clone(),
            f_hat,
            f_lte: l.values,
            lte_clipped_mass: l.clipped_mass,
            horizon: path.horizon(),
        })
    }
}
