//! Invariant law of an ergodic diffusion and everything derived from it.
//!
//! For a model satisfying `ES`/`RP` the stationary density is
//! `f0(x) = sigma(x)^-2 exp{2 int_0^x S/sigma^2} / G(S)`. This module
//! tabulates `f0`, its distribution function `F0` (a running trapezoid of
//! `f0`, kept exactly self-consistent), the median, the variance clocks
//!
//! `Phi(x) = int (1_{y>x} - F0(y))^2 / (sigma^2 f0) dy`
//! `Psi(x) = int_-inf^x F0^2/(sigma^2 f0) + F0(x)^2 int_x^inf ((F0-1)/(F0(x)-1))^2 / (sigma^2 f0)`
//!
//! and the weight functions `h`, `H`, `g` that turn the weighted
//! Cramér–von Mises / Kolmogorov–Smirnov statistics into
//! asymptotically distribution-free tests with limits
//! `int_1^inf w(v)^2 e^-v dv` and `sup_{v>=1} |w(v)| e^-v`.
//!
//! Everything is computed on a uniform grid. Improper integrals are
//! truncated where the exponential weights fall below 1e-12 or the
//! invariant tail mass below 1e-10, whichever is wider; the weights decay
//! fast enough that this is far below the quadrature tolerance.

#![allow(unused_imports)]

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::Error;
use crate::grid::{GridPolicy, SpatialGrid, MASS_TOL, QUAD_TOL, ROOT_TOL};
use crate::math::FloatExt;
use crate::model::{check_conditions, DiffusionModel};
use crate::quad::{cumsimpson_backward, cumsimpson_forward, cumtrapz, cumulative_gl4, gl4, tail_decays, trapz};

/// Exponential-weight level below which the tails are truncated.
pub const WEIGHT_CUT: f64 = 1e-12;

/// Tabulated invariant law of a diffusion model together with the derived
/// clocks and test weights. Immutable once built.
#[derive(Debug, Clone)]
pub struct InvariantLaw {
    grid: SpatialGrid,
    label: String,
    f0: Vec<f64>,
    cdf: Vec<f64>,
    /// Upper tail mass `1 - F0`, accumulated from the right edge so it
    /// stays accurate where `1 - F0` underflows double precision.
    tail: Vec<f64>,
    sigma_sq: Vec<f64>,
    phi: Vec<f64>,
    psi: Vec<f64>,
    psi_prime: Vec<f64>,
    weight_h: Vec<f64>,
    weight_big_h: Vec<f64>,
    weight_g: Vec<f64>,
    /// Forward clock part `P(x) = int_{lo}^x F0^2/(sigma^2 f0)`.
    p_tab: Vec<f64>,
    /// Backward clock part `Q(x) = int_x^{hi} (1-F0)^2/(sigma^2 f0)`.
    q_tab: Vec<f64>,
    /// Cumulative `int F0 (1-F0) / (sigma^2 f0)` for covariances.
    m_tab: Vec<f64>,
    /// Cumulative `F0/(sigma^2 f0)` from the left edge.
    g1_tab: Vec<f64>,
    /// Cumulative `(1-F0)/(sigma^2 f0)` anchored at the median node.
    g2_tab: Vec<f64>,
    median: f64,
    mu_idx: usize,
    phi_mu: f64,
    psi_mu: f64,
    g_const: f64,
    /// Last node where `exp(-Phi/Phi(mu)) >= WEIGHT_CUT`.
    h_hi: usize,
    /// Last node where `exp(-Psi/Psi(mu)) >= WEIGHT_CUT`.
    big_h_hi: usize,
    tail_ok_left: bool,
    tail_ok_right: bool,
}

/// Values of the condition integrals that back the distribution-free
/// limits: `A1`, `A2` for the density-based statistic and the two
/// analogous integrals for the distribution-function statistic. Each comes
/// with a convergence flag; divergence is reported, never fatal.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConditionIntegrals {
    pub a1: f64,
    pub a1_converged: bool,
    pub a2: f64,
    pub a2_converged: bool,
    pub c9: f64,
    pub c9_converged: bool,
    pub c10: f64,
    pub c10_converged: bool,
}

impl ConditionIntegrals {
    pub fn all_finite(&self) -> bool {
        self.a1_converged && self.a2_converged && self.c9_converged && self.c10_converged
    }
}

/// Distances between an alternative law/model and a hypothesis law/model.
#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DistanceNorms {
    /// `(int (f_a - f_0)^2 dF_0)^(1/2)`.
    pub density_l2: f64,
    /// `(int (F_a - F_0)^2 dF_0)^(1/2)`.
    pub cdf_l2: f64,
    /// `(int ((S_a - S_0)/sigma)^2 f_a dx)^(1/2)`, the drift separation in
    /// the Kullback-Leibler-minimising norm.
    pub drift_kl: f64,
}

impl InvariantLaw {
    /// Builds the law with an automatically chosen grid: centred at the
    /// median and spanning `policy.span_sds` preliminary standard
    /// deviations each side, widened until the mass outside is below
    /// `policy.mass_tol`.
    pub fn build(model: &DiffusionModel, policy: &GridPolicy) -> Result<Self, Error> {
        policy.validate()?;
        let (c0, s0) = model.location_hint();

        // Provisional pass on a wide coarse window to locate the law.
        let mut window = 24.0 * s0;
        let mut moments = None;
        for _ in 0..5 {
            match provisional_moments(model, c0, window) {
                Ok(m) => {
                    if m.edges_negligible {
                        moments = Some(m);
                        break;
                    }
                    window *= 1.8;
                }
                Err(_) => window *= 1.8,
            }
        }
        let prov = moments.ok_or_else(|| {
            Error::NormalizationFailure(format!(
                "invariant mass does not localise within a window of half-width {window:.3e}"
            ))
        })?;

        check_conditions(model, prov.median, policy.span_sds.max(15.0) * prov.sd, 4096)?;

        let mut span = policy.span_sds * prov.sd;
        for _ in 0..4 {
            let (lo, hi) = align_to_breakpoints(
                model,
                prov.median - span,
                prov.median + span,
                policy.nodes,
            );
            let grid = SpatialGrid::new(lo, hi, policy.nodes)?;
            let law = Self::build_on_grid(model, grid)?;
            if law.outside_mass(model) <= policy.mass_tol {
                return Ok(law);
            }
            span *= 1.3;
        }
        Err(Error::NormalizationFailure(
            "tail mass does not fall below mass_tol under domain widening".into(),
        ))
    }

    /// Builds the law on a caller-supplied grid. Used when several models
    /// must share a grid (distances, composite-hypothesis derivatives).
    pub fn build_on_grid(model: &DiffusionModel, grid: SpatialGrid) -> Result<Self, Error> {
        let n = grid.len();
        let step = grid.step();
        let lower = grid.lower();

        // Log-scale integral I(x) = int S/sigma^2 from the left edge, at
        // nodes and panel midpoints.
        let (log_int, log_int_mid) =
            cumulative_gl4(|y| model.drift(y) / model.sigma_sq(y), lower, step, n);

        // Unnormalised density, shifted by the max exponent for stability.
        let mut shift = f64::NEG_INFINITY;
        for v in &log_int {
            shift = shift.max(2.0 * v);
        }
        if !shift.is_finite() {
            return Err(Error::NormalizationFailure("log-density is not finite".into()));
        }
        let udens = |x: f64, li: f64| (2.0 * li - shift).exp() / model.sigma_sq(x);
        let u: Vec<f64> = (0..n).map(|i| udens(grid.node(i), log_int[i])).collect();
        let u_mid: Vec<f64> = (0..n - 1).map(|p| udens(grid.midpoint(p), log_int_mid[p])).collect();

        // Trapezoid normalisation keeps F0 = cumtrapz(f0) ending at 1.
        let g_scaled = trapz(&u, step);
        if !(g_scaled.is_finite() && g_scaled > 0.0) {
            return Err(Error::NormalizationFailure(format!(
                "normalising integral = {g_scaled:.3e}"
            )));
        }
        let f0: Vec<f64> = u.iter().map(|v| v / g_scaled).collect();
        let f0_mid: Vec<f64> = u_mid.iter().map(|v| v / g_scaled).collect();
        let cdf = cumtrapz(&f0, step);
        let cdf_mid: Vec<f64> =
            (0..n - 1).map(|p| cdf[p] + 0.25 * step * (f0[p] + f0_mid[p])).collect();
        // Upper tail mass accumulated from the right edge: `1 - F0`
        // saturates at double precision long before the grid ends, while
        // the reverse sum stays accurate down to denormals. Every
        // tail-sensitive integrand below uses this vector.
        let tail = {
            let mut t = vec![0.0f64; n];
            let mut acc = 0.0;
            for i in (0..n - 1).rev() {
                acc += 0.5 * step * (f0[i] + f0[i + 1]);
                t[i] = acc;
            }
            t
        };
        let tail_mid: Vec<f64> =
            (0..n - 1).map(|p| tail[p + 1] + 0.25 * step * (f0_mid[p] + f0[p + 1])).collect();

        // G(S) as defined (inner integral anchored at 0) when 0 is in range.
        let g_const = if grid.contains(0.0) {
            let p = grid.panel_of(0.0);
            let i0 = log_int[p]
                + gl4(|y| model.drift(y) / model.sigma_sq(y), grid.node(p), 0.0);
            g_scaled * (shift - 2.0 * i0).exp()
        } else {
            g_scaled * shift.exp()
        };

        let sigma_sq: Vec<f64> = grid.nodes().map(|x| model.sigma_sq(x)).collect();

        // Median from the panel-exact quadratic interpolant of F0.
        let (median, mu_idx) = solve_median(&grid, &f0, &cdf)?;

        // Clock parts P and Q by panel Simpson with exact midpoint values.
        let p_int = |f: f64, c: f64, _t: f64, s: f64| c * c / (s * f);
        let q_int = |f: f64, _c: f64, t: f64, s: f64| t * t / (s * f);
        let m_int = |f: f64, c: f64, t: f64, s: f64| c * t / (s * f);
        let eval = |tab: &dyn Fn(f64, f64, f64, f64) -> f64, i: usize| {
            tab(f0[i], cdf[i], tail[i], sigma_sq[i])
        };
        let eval_mid = |tab: &dyn Fn(f64, f64, f64, f64) -> f64, p: usize| {
            tab(f0_mid[p], cdf_mid[p], tail_mid[p], model.sigma_sq(grid.midpoint(p)))
        };

        let p_nodes: Vec<f64> = (0..n).map(|i| eval(&p_int, i)).collect();
        let p_mids: Vec<f64> = (0..n - 1).map(|p| eval_mid(&p_int, p)).collect();
        let q_nodes: Vec<f64> = (0..n).map(|i| eval(&q_int, i)).collect();
        let q_mids: Vec<f64> = (0..n - 1).map(|p| eval_mid(&q_int, p)).collect();
        let m_nodes: Vec<f64> = (0..n).map(|i| eval(&m_int, i)).collect();
        let m_mids: Vec<f64> = (0..n - 1).map(|p| eval_mid(&m_int, p)).collect();

        let tail_ok_left = tail_decays(&p_nodes, false, (n / 64).max(4));
        let tail_ok_right = tail_decays(&q_nodes, true, (n / 64).max(4));

        let p_tab = cumsimpson_forward(&p_nodes, &p_mids, step);
        let q_tab = cumsimpson_backward(&q_nodes, &q_mids, step);
        let m_tab = cumsimpson_forward(&m_nodes, &m_mids, step);

        // Phi = P + Q; Psi = P + (F0/(1-F0))^2 Q with derivative
        // Psi' = 2 F0 f0 Q / (1-F0)^3, from differentiating under the
        // integral sign.
        let mut phi = Vec::with_capacity(n);
        let mut psi = Vec::with_capacity(n);
        let mut psi_prime = Vec::with_capacity(n);
        for i in 0..n {
            phi.push(p_tab[i] + q_tab[i]);
            if tail[i] > 0.0 {
                let ratio = cdf[i] / tail[i];
                psi.push(p_tab[i] + ratio * ratio * q_tab[i]);
                psi_prime.push(2.0 * cdf[i] * f0[i] * q_tab[i] / (tail[i] * tail[i] * tail[i]));
            } else {
                // last node: Q = tail = 0, the ratio form is 0/0
                psi.push(f64::INFINITY);
                psi_prime.push(0.0);
            }
        }

        // Clock values at the median itself (between nodes): correct the
        // node value with a short Gauss-Legendre panel of the integrands.
        let interp_f0 = |x: f64| grid.interp(&f0, x);
        let interp_cdf = |x: f64| {
            let p = grid.panel_of(x);
            let t = x - grid.node(p);
            cdf[p] + t * f0[p] + t * t * (f0[p + 1] - f0[p]) / (2.0 * step)
        };
        let x_mu_node = grid.node(mu_idx);
        let p_mu = p_tab[mu_idx]
            - gl4(
                |y| {
                    let c = interp_cdf(y);
                    c * c / (model.sigma_sq(y) * interp_f0(y))
                },
                median,
                x_mu_node,
            );
        let q_mu = q_tab[mu_idx]
            + gl4(
                |y| {
                    let c = 1.0 - interp_cdf(y);
                    c * c / (model.sigma_sq(y) * interp_f0(y))
                },
                median,
                x_mu_node,
            );
        let phi_mu = p_mu + q_mu;
        let cmu = interp_cdf(median);
        let ratio_mu = cmu / (1.0 - cmu);
        let psi_mu = p_mu + ratio_mu * ratio_mu * q_mu;
        if !(phi_mu.is_finite() && phi_mu > 0.0) {
            return Err(Error::NormalizationFailure(format!("Phi(mu) = {phi_mu:.3e}")));
        }

        // Weights on [mu, infinity), zero outside their exponential support.
        let mut weight_h = vec![0.0; n];
        let mut weight_big_h = vec![0.0; n];
        let mut weight_g = vec![0.0; n];
        let mut h_hi = mu_idx;
        let mut big_h_hi = mu_idx;
        let ln_cut = -(WEIGHT_CUT.ln().abs());
        for i in mu_idx..n {
            let e_phi = -phi[i] / phi_mu;
            if e_phi >= ln_cut {
                let w = e_phi.exp();
                let f4 = f0[i] * f0[i] * f0[i] * f0[i];
                weight_h[i] =
                    (2.0 * cdf[i] - 1.0) * w / (4.0 * phi_mu * phi_mu * sigma_sq[i] * f4);
                weight_g[i] = w / (2.0 * f0[i] * phi_mu.sqrt());
                h_hi = i;
            }
            let e_psi = -psi[i] / psi_mu;
            if e_psi >= ln_cut {
                let t = tail[i].max(1e-280);
                weight_big_h[i] =
                    2.0 * cdf[i] * q_tab[i] * e_psi.exp() / (psi_mu * psi_mu * t.powi(5));
                big_h_hi = i;
            }
        }

        // Cumulative helpers for the condition integrals.
        let g1_nodes: Vec<f64> = (0..n).map(|i| cdf[i] / (sigma_sq[i] * f0[i])).collect();
        let g2_nodes: Vec<f64> = (0..n).map(|i| tail[i] / (sigma_sq[i] * f0[i])).collect();
        let g1_tab = cumtrapz(&g1_nodes, step);
        let g2_tab = cumtrapz_anchored(&g2_nodes, step, mu_idx);

        Ok(Self {
            grid,
            label: model.label.clone(),
            f0,
            cdf,
            tail,
            sigma_sq,
            phi,
            psi,
            psi_prime,
            weight_h,
            weight_big_h,
            weight_g,
            p_tab,
            q_tab,
            m_tab,
            g1_tab,
            g2_tab,
            median,
            mu_idx,
            phi_mu,
            psi_mu,
            g_const,
            h_hi,
            big_h_hi,
            tail_ok_left,
            tail_ok_right,
        })
    }

    /// Invariant mass outside the grid, estimated by continuing the
    /// density integral outward.
    fn outside_mass(&self, model: &DiffusionModel) -> f64 {
        let step = self.grid.step();
        let panels = 512;
        let reach = 0.35 * (self.grid.upper() - self.grid.lower());
        let ext_step = reach / panels as f64;
        let mut mass = 0.0;
        // left
        let mut li = 0.0; // log density relative to edge value
        let f_edge_l = self.f0[0];
        for p in 0..panels {
            let b = self.grid.lower() - ext_step * p as f64;
            let a = b - ext_step;
            li -= gl4(|y| model.drift(y) / model.sigma_sq(y), a, b);
            mass += ext_step * f_edge_l * (2.0 * li).exp() * model.sigma_sq(self.grid.lower())
                / model.sigma_sq(a);
            if (2.0 * li).exp() < 1e-30 {
                break;
            }
        }
        let mut ri = 0.0;
        let f_edge_r = self.f0[self.grid.len() - 1];
        let _ = step;
        for p in 0..panels {
            let a = self.grid.upper() + ext_step * p as f64;
            let b = a + ext_step;
            ri += gl4(|y| model.drift(y) / model.sigma_sq(y), a, b);
            mass += ext_step * f_edge_r * (2.0 * ri).exp() * model.sigma_sq(self.grid.upper())
                / model.sigma_sq(b);
            if (2.0 * ri).exp() < 1e-30 {
                break;
            }
        }
        mass
    }

    #[inline]
    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    #[inline]
    pub fn label(&self) -> &str {
        &self.label
    }

    /// Tabulated density values.
    #[inline]
    pub fn f0(&self) -> &[f64] {
        &self.f0
    }

    /// Tabulated distribution function (running trapezoid of `f0`).
    #[inline]
    pub fn cdf(&self) -> &[f64] {
        &self.cdf
    }

    /// Upper tail mass `1 - F0`, accurate deep into the tail.
    #[inline]
    pub fn tail(&self) -> &[f64] {
        &self.tail
    }

    #[inline]
    pub fn sigma_sq(&self) -> &[f64] {
        &self.sigma_sq
    }

    #[inline]
    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    #[inline]
    pub fn psi(&self) -> &[f64] {
        &self.psi
    }

    #[inline]
    pub fn psi_prime(&self) -> &[f64] {
        &self.psi_prime
    }

    #[inline]
    pub fn weight_h(&self) -> &[f64] {
        &self.weight_h
    }

    #[inline]
    pub fn weight_big_h(&self) -> &[f64] {
        &self.weight_big_h
    }

    #[inline]
    pub fn weight_g(&self) -> &[f64] {
        &self.weight_g
    }

    #[inline]
    pub fn median(&self) -> f64 {
        self.median
    }

    /// Index of the first node at or above the median.
    #[inline]
    pub fn mu_index(&self) -> usize {
        self.mu_idx
    }

    #[inline]
    pub fn phi_mu(&self) -> f64 {
        self.phi_mu
    }

    #[inline]
    pub fn psi_mu(&self) -> f64 {
        self.psi_mu
    }

    /// Normalising constant `G(S)`.
    #[inline]
    pub fn g_const(&self) -> f64 {
        self.g_const
    }

    /// Last node index with non-zero `h`/`g` weight.
    #[inline]
    pub fn h_support_end(&self) -> usize {
        self.h_hi
    }

    /// Last node index with non-zero `H` weight.
    #[inline]
    pub fn big_h_support_end(&self) -> usize {
        self.big_h_hi
    }

    /// Density interpolated at `x` (0 outside the grid's reach is not
    /// meaningful; values are clamped to the edge nodes).
    #[inline]
    pub fn f0_at(&self, x: f64) -> f64 {
        self.grid.interp(&self.f0, x)
    }

    /// Distribution function at `x`, using the panel-exact quadratic
    /// interpolant consistent with the trapezoid construction.
    pub fn cdf_at(&self, x: f64) -> f64 {
        if x <= self.grid.lower() {
            return 0.0;
        }
        if x >= self.grid.upper() {
            return 1.0;
        }
        let p = self.grid.panel_of(x);
        let t = x - self.grid.node(p);
        let step = self.grid.step();
        self.cdf[p] + t * self.f0[p] + t * t * (self.f0[p + 1] - self.f0[p]) / (2.0 * step)
    }

    /// Inverse distribution function by monotone panel inversion.
    pub fn inverse_cdf(&self, u: f64) -> f64 {
        let n = self.grid.len();
        let u = u.clamp(0.0, 1.0);
        // binary search for the panel with cdf[i] <= u <= cdf[i+1]
        let mut lo = 0usize;
        let mut hi = n - 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.cdf[mid] <= u {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let mut a = self.grid.node(lo);
        let mut b = self.grid.node(hi);
        for _ in 0..60 {
            let m = 0.5 * (a + b);
            if self.cdf_at(m) <= u {
                a = m;
            } else {
                b = m;
            }
        }
        0.5 * (a + b)
    }

    /// Variance clock `Phi(x)`.
    pub fn phi_at(&self, x: f64) -> Result<f64, Error> {
        if !self.tail_ok_right {
            return Err(Error::TailDivergence { what: "Phi", side: "right" });
        }
        if !self.tail_ok_left {
            return Err(Error::TailDivergence { what: "Phi", side: "left" });
        }
        if !self.grid.contains(x) {
            return Err(Error::TailDivergence {
                what: "Phi",
                side: if x < self.grid.lower() { "left" } else { "right" },
            });
        }
        Ok(self.grid.interp(&self.phi, x))
    }

    /// Clock `Psi(x)` for `x >= median`.
    pub fn psi_at(&self, x: f64) -> Result<f64, Error> {
        if x < self.median {
            return Err(Error::DomainError { what: "Psi", x, median: self.median });
        }
        if !self.grid.contains(x) || !self.tail_ok_right {
            return Err(Error::TailDivergence { what: "Psi", side: "right" });
        }
        Ok(self.grid.interp(&self.psi, x))
    }

    fn require_at_or_above_median(&self, what: &'static str, x: f64) -> Result<(), Error> {
        if x < self.median {
            return Err(Error::DomainError { what, x, median: self.median });
        }
        Ok(())
    }

    /// Weight `h(x)` of the density-based Cramér–von Mises statistic.
    pub fn weight_h_at(&self, x: f64) -> Result<f64, Error> {
        self.require_at_or_above_median("h", x)?;
        Ok(self.weight_h_indicator(x))
    }

    /// Weight `H(x)` of the EDF-based statistic.
    pub fn weight_big_h_at(&self, x: f64) -> Result<f64, Error> {
        self.require_at_or_above_median("H", x)?;
        Ok(self.grid.interp(&self.weight_big_h, x).max(0.0))
    }

    /// Weight `g(x)` of the Kolmogorov–Smirnov-type statistic.
    pub fn weight_g_at(&self, x: f64) -> Result<f64, Error> {
        self.require_at_or_above_median("g", x)?;
        Ok(self.grid.interp(&self.weight_g, x).max(0.0))
    }

    /// `h(x) 1_{x >= mu}`: the weight with its indicator, as it enters
    /// time-integral (empirical) forms of the statistics.
    pub fn weight_h_indicator(&self, x: f64) -> f64 {
        if x < self.median || x > self.grid.node(self.h_hi) {
            return 0.0;
        }
        self.grid.interp(&self.weight_h, x).max(0.0)
    }

    /// `H(x) 1_{x >= mu}` for the empirical form of the EDF statistic.
    pub fn weight_big_h_indicator(&self, x: f64) -> f64 {
        if x < self.median || x > self.grid.node(self.big_h_hi) {
            return 0.0;
        }
        self.grid.interp(&self.weight_big_h, x).max(0.0)
    }

    /// Covariance `R(x, y)` of the limiting density error field;
    /// `R(x, x) = Phi(x)`.
    pub fn covariance(&self, x: f64, y: f64) -> Result<f64, Error> {
        let (a, b) = if x <= y { (x, y) } else { (y, x) };
        if !self.grid.contains(a) || !self.grid.contains(b) {
            return Err(Error::TailDivergence { what: "R", side: "edge" });
        }
        let p = self.grid.interp(&self.p_tab, a);
        let q = self.grid.interp(&self.q_tab, b);
        let m = self.grid.interp(&self.m_tab, b) - self.grid.interp(&self.m_tab, a);
        Ok(p + q - m)
    }

    /// Stationary expectation `E0 g(xi)` by trapezoid against `f0`.
    pub fn expect<F: Fn(f64) -> f64>(&self, g: F) -> f64 {
        let vals: Vec<f64> =
            (0..self.grid.len()).map(|i| g(self.grid.node(i)) * self.f0[i]).collect();
        trapz(&vals, self.grid.step())
    }

    /// `E0 sigma(xi)^2`, the normalising constant of the martingale
    /// statistics.
    pub fn expect_sigma_sq(&self) -> f64 {
        let vals: Vec<f64> =
            (0..self.grid.len()).map(|i| self.sigma_sq[i] * self.f0[i]).collect();
        trapz(&vals, self.grid.step())
    }

    /// Condition integrals `A1`, `A2` and the two EDF-side analogues.
    ///
    /// The inner expectations are quadratures against `f0` on a coarsened
    /// copy of the grid (the outer integrands carry the exponential
    /// weights, so modest inner resolution is ample for a report value).
    pub fn condition_integrals(&self) -> ConditionIntegrals {
        let n = self.grid.len();
        let step = self.grid.step();
        let stride = ((n - 1) / 1024).max(1);

        // A1 at full resolution: all ingredients are tabulated.
        let mut a1_vals = vec![0.0; n];
        for i in self.mu_idx..=self.h_hi {
            let e = (-self.phi[i] / self.phi_mu).exp();
            a1_vals[i] = (2.0 * self.cdf[i] - 1.0) * self.phi[i] * e
                / (self.phi_mu * self.phi_mu * self.sigma_sq[i] * self.f0[i] * self.f0[i]);
        }
        let a1 = trapz(&a1_vals[self.mu_idx..], step);
        let a1_converged = converged_at_cut(&a1_vals, self.h_hi, a1);

        // Coarse index set for the double integrals.
        let coarse: Vec<usize> = (0..n).step_by(stride).collect();
        let cstep = step * stride as f64;

        // J(s, x) = int_0^s (1_{v>x} - F0(v)) / (sigma^2 f0) dv, split so
        // that both halves stay numerically moderate.
        let zero_clamped = 0.0f64.clamp(self.grid.lower(), self.grid.upper());
        let g1_at = |x: f64| self.grid.interp(&self.g1_tab, x);
        let g2_at = |x: f64| self.grid.interp(&self.g2_tab, x);
        let j_fn = |s: f64, x: f64| {
            let z = zero_clamped;
            let ind = g2_at(s.max(x)) - g2_at(z.max(x));
            let body = g1_at(s.min(x)) - g1_at(z.min(x));
            ind - body
        };

        // A2
        let mut a2 = 0.0;
        let mut a2_last = 0.0;
        for (k, &ix) in coarse.iter().enumerate() {
            if ix < self.mu_idx || ix > self.h_hi {
                continue;
            }
            let x = self.grid.node(ix);
            let mut inner = vec![0.0; coarse.len()];
            for (m, &is) in coarse.iter().enumerate() {
                let s = self.grid.node(is);
                let j = j_fn(s, x);
                inner[m] = self.f0[is] * j * j;
            }
            let e0 = trapz(&inner, cstep);
            let outer = (2.0 * self.cdf[ix] - 1.0) * (-self.phi[ix] / self.phi_mu).exp()
                / (self.phi_mu * self.phi_mu * self.sigma_sq[ix] * self.f0[ix] * self.f0[ix]);
            let contrib = outer * e0 * cstep;
            a2 += contrib;
            if k + 1 == coarse.len() || ix + stride > self.h_hi {
                a2_last = contrib;
            }
        }
        let a2_converged = a2.is_finite() && a2_last.abs() <= 1e-6 * a2.abs().max(1e-30);

        // C9: inner expectation of ((F0(xi) F0(x) - F0(xi ^ x)) / (sigma f0(xi)))^2.
        let mut c9 = 0.0;
        let mut c9_last = 0.0;
        // C10: inner expectation of (int_mu^xi ... dy)^2 using the same
        // split cumulative tables.
        let mut c10 = 0.0;
        let mut c10_last = 0.0;
        let g1_mu = g1_at(self.median);
        for &ix in coarse.iter() {
            if ix < self.mu_idx || ix > self.big_h_hi {
                continue;
            }
            let x = self.grid.node(ix);
            let cx = self.cdf[ix];
            let mut inner9 = vec![0.0; coarse.len()];
            let mut inner10 = vec![0.0; coarse.len()];
            for (m, &is) in coarse.iter().enumerate() {
                let s = self.grid.node(is);
                let cs = self.cdf[is];
                let k = if s > x {
                    -cx * self.tail[is]
                } else {
                    cs * (cx - 1.0)
                };
                // f0 (k / (sigma f0))^2 = k^2 / (sigma^2 f0)
                inner9[m] = k * k / (self.sigma_sq[is] * self.f0[is]);
                let iy = -(1.0 - cx) * (g1_at(s.min(x)) - g1_mu)
                    - cx * (g2_at(s.max(x)) - g2_at(x));
                inner10[m] = self.f0[is] * iy * iy;
            }
            let hw = self.weight_big_h[ix] * self.f0[ix] * cstep;
            let contrib9 = hw * trapz(&inner9, cstep);
            let contrib10 = hw * trapz(&inner10, cstep);
            c9 += contrib9;
            c10 += contrib10;
            if ix + stride > self.big_h_hi {
                c9_last = contrib9;
                c10_last = contrib10;
            }
        }
        let c9_converged = c9.is_finite() && c9_last.abs() <= 1e-6 * c9.abs().max(1e-30);
        let c10_converged = c10.is_finite() && c10_last.abs() <= 1e-6 * c10.abs().max(1e-30);

        ConditionIntegrals {
            a1,
            a1_converged,
            a2,
            a2_converged,
            c9,
            c9_converged,
            c10,
            c10_converged,
        }
    }

    /// Distances of an alternative `(law_alt, model_alt)` from a
    /// hypothesis `(self, model_null)`; all three integrals use the shared
    /// grid, erroring when the laws were built on different grids.
    pub fn distance_norms(
        &self,
        law_alt: &InvariantLaw,
        model_alt: &DiffusionModel,
        model_null: &DiffusionModel,
    ) -> Result<DistanceNorms, Error> {
        if self.grid != law_alt.grid {
            return Err(Error::GridMismatch);
        }
        let n = self.grid.len();
        let step = self.grid.step();
        let mut d_f = vec![0.0; n];
        let mut d_cdf = vec![0.0; n];
        let mut d_drift = vec![0.0; n];
        for i in 0..n {
            let x = self.grid.node(i);
            let df = law_alt.f0[i] - self.f0[i];
            d_f[i] = df * df * self.f0[i];
            let dc = law_alt.cdf[i] - self.cdf[i];
            d_cdf[i] = dc * dc * self.f0[i];
            let ds = (model_alt.drift(x) - model_null.drift(x)) / model_null.sigma(x);
            d_drift[i] = ds * ds * law_alt.f0[i];
        }
        Ok(DistanceNorms {
            density_l2: trapz(&d_f, step).sqrt(),
            cdf_l2: trapz(&d_cdf, step).sqrt(),
            drift_kl: trapz(&d_drift, step).sqrt(),
        })
    }
}

fn converged_at_cut(vals: &[f64], hi: usize, total: f64) -> bool {
    total.is_finite() && vals[hi].abs() <= 1e-6 * total.abs().max(1e-30)
}

/// Running trapezoid anchored at `anchor` (value 0 there, negative to the
/// left), accumulated outward so that precision is best near the anchor.
fn cumtrapz_anchored(values: &[f64], step: f64, anchor: usize) -> Vec<f64> {
    let n = values.len();
    let mut out = vec![0.0; n];
    let mut acc = 0.0;
    for i in anchor + 1..n {
        acc += 0.5 * step * (values[i - 1] + values[i]);
        out[i] = acc;
    }
    acc = 0.0;
    for i in (0..anchor).rev() {
        acc -= 0.5 * step * (values[i] + values[i + 1]);
        out[i] = acc;
    }
    out
}

struct Provisional {
    median: f64,
    sd: f64,
    edges_negligible: bool,
}

fn provisional_moments(
    model: &DiffusionModel,
    center: f64,
    half_width: f64,
) -> Result<Provisional, Error> {
    let n = 4097usize;
    let lower = center - half_width;
    let step = 2.0 * half_width / (n - 1) as f64;
    let (log_int, _) =
        cumulative_gl4(|y| model.drift(y) / model.sigma_sq(y), lower, step, n);
    let mut shift = f64::NEG_INFINITY;
    for v in &log_int {
        shift = shift.max(2.0 * v);
    }
    if !shift.is_finite() {
        return Err(Error::NormalizationFailure("provisional log-density not finite".into()));
    }
    let u: Vec<f64> = (0..n)
        .map(|i| (2.0 * log_int[i] - shift).exp() / model.sigma_sq(lower + step * i as f64))
        .collect();
    let total = trapz(&u, step);
    if !(total.is_finite() && total > 0.0) {
        return Err(Error::NormalizationFailure("provisional normalisation failed".into()));
    }
    let umax = u.iter().cloned().fold(0.0, f64::max);
    let edges_negligible = u[0] <= 1e-14 * umax && u[n - 1] <= 1e-14 * umax;

    let mut mean = 0.0;
    for (i, v) in u.iter().enumerate() {
        mean += (lower + step * i as f64) * v;
    }
    mean = mean * step / total;
    let mut var = 0.0;
    for (i, v) in u.iter().enumerate() {
        let d = lower + step * i as f64 - mean;
        var += d * d * v;
    }
    var = var * step / total;

    let cdf = cumtrapz(&u, step);
    let half = 0.5 * total;
    let mut med = mean;
    for i in 1..n {
        if cdf[i] >= half {
            let t = (half - cdf[i - 1]) / (cdf[i] - cdf[i - 1]).max(1e-300);
            med = lower + step * ((i - 1) as f64 + t);
            break;
        }
    }
    Ok(Provisional { median: med, sd: var.sqrt().max(1e-6), edges_negligible })
}

/// Shifts the grid bounds slightly so that the first drift breakpoint (a
/// kink like the switching point) lands on a node; panel quadrature then
/// never straddles a discontinuity.
fn align_to_breakpoints(
    model: &DiffusionModel,
    lo: f64,
    hi: f64,
    nodes: usize,
) -> (f64, f64) {
    let mut bps = Vec::new();
    collect_breakpoints(&model.drift, &mut bps);
    let step = (hi - lo) / (nodes - 1) as f64;
    for bp in bps {
        if bp > lo + step && bp < hi - step {
            let k = ((bp - lo) / step).round();
            let new_lo = bp - k * step;
            return (new_lo, new_lo + step * (nodes - 1) as f64);
        }
    }
    (lo, hi)
}

fn collect_breakpoints(drift: &crate::model::DriftSpec, out: &mut Vec<f64>) {
    use crate::model::DriftSpec::*;
    match drift {
        LinearOu { .. } | PolyTrig { .. } => {}
        Switching { b, .. } => out.push(*b),
        OneSidedScaled { base, split, .. } => {
            out.push(*split);
            collect_breakpoints(base, out);
        }
        Oscillating { base, .. } => collect_breakpoints(base, out),
    }
}

fn solve_median(grid: &SpatialGrid, f0: &[f64], cdf: &[f64]) -> Result<(f64, usize), Error> {
    let n = grid.len();
    let mut idx = n;
    for i in 0..n {
        if cdf[i] >= 0.5 {
            idx = i;
            break;
        }
    }
    if idx == 0 || idx == n {
        return Err(Error::NormalizationFailure(
            "distribution function does not bracket 1/2 inside the grid".into(),
        ));
    }
    let step = grid.step();
    let p = idx - 1;
    let cdf_local = |t: f64| cdf[p] + t * f0[p] + t * t * (f0[p + 1] - f0[p]) / (2.0 * step);
    let mut a = 0.0;
    let mut b = step;
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if cdf_local(m) < 0.5 {
            a = m;
        } else {
            b = m;
        }
        if (cdf_local(0.5 * (a + b)) - 0.5).abs() <= ROOT_TOL {
            break;
        }
    }
    let median = grid.node(p) + 0.5 * (a + b);
    let mu_idx = if median <= grid.node(p) { p } else { idx };
    Ok((median, mu_idx))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::GridPolicy;

    fn ou_standard() -> (DiffusionModel, InvariantLaw) {
        let m = DiffusionModel::ornstein_uhlenbeck(1.0, 0.0, core::f64::consts::SQRT_2);
        let law = InvariantLaw::build(&m, &GridPolicy::default()).unwrap();
        (m, law)
    }

    fn switching_standard() -> (DiffusionModel, InvariantLaw) {
        let m = DiffusionModel::switching(1.0, 0.0, 1.0);
        let law = InvariantLaw::build(&m, &GridPolicy::default()).unwrap();
        (m, law)
    }

    #[test]
    fn ou_law_is_standard_normal() {
        let (_, law) = ou_standard();
        // sigma^2/2a = 1: N(0, 1)
        let norm = 1.0 / (2.0 * core::f64::consts::PI).sqrt();
        for x in [-3.0f64, -1.0, -0.3, 0.0, 0.4, 1.7, 3.1] {
            let expect = norm * (-0.5 * x * x).exp();
            assert!(
                (law.f0_at(x) - expect).abs() < 2e-7,
                "f0({x}) = {}, want {expect}",
                law.f0_at(x)
            );
        }
        assert!(law.median().abs() < 1e-8);
        assert!((law.cdf_at(law.median()) - 0.5).abs() <= 1e-10);
    }

    #[test]
    fn switching_law_is_laplace() {
        let (_, law) = switching_standard();
        for x in [-2.0f64, -0.5, 0.0, 0.5, 2.0] {
            let expect = (-2.0 * x.abs()).exp();
            assert!(
                (law.f0_at(x) - expect).abs() < 3e-6,
                "f0({x}) = {}, want {expect}",
                law.f0_at(x)
            );
        }
        assert!(law.median().abs() < 1e-7);
        // F0(-1) = e^{-2}/2 by the closed-form antiderivative
        let expect = 0.5 * (-2.0f64).exp();
        assert!((law.cdf_at(-1.0) - expect).abs() < 1e-6);
    }

    #[test]
    fn median_matches_location_parameter() {
        let m = DiffusionModel::ornstein_uhlenbeck(1.0, 5.0, core::f64::consts::SQRT_2);
        let law = InvariantLaw::build(&m, &GridPolicy::default()).unwrap();
        assert!((law.median() - 5.0).abs() < 1e-8);

        let m = DiffusionModel::switching(2.0, -1.0, 1.0);
        let law = InvariantLaw::build(&m, &GridPolicy::default()).unwrap();
        assert!((law.median() + 1.0).abs() < 1e-8);
    }

    #[test]
    fn cdf_is_running_trapezoid_of_density_and_monotone() {
        let (_, law) = ou_standard();
        let step = law.grid().step();
        let mut acc = 0.0;
        assert_eq!(law.cdf()[0], 0.0);
        for i in 1..law.grid().len() {
            acc += 0.5 * step * (law.f0()[i - 1] + law.f0()[i]);
            assert!((law.cdf()[i] - acc).abs() < 1e-12);
            assert!(law.cdf()[i] >= law.cdf()[i - 1]);
        }
        assert!(law.cdf()[law.grid().len() - 1] > 1.0 - MASS_TOL);
    }

    #[test]
    fn phi_has_minimum_at_median() {
        let (_, law) = ou_standard();
        let phimu = law.phi_mu();
        for d in [0.05f64, 0.2, 0.7] {
            assert!(law.phi_at(law.median() + d).unwrap() > phimu);
            assert!(law.phi_at(law.median() - d).unwrap() > phimu);
        }
        // Phi decreasing left of mu, increasing right of mu along nodes.
        let mu = law.mu_index();
        let phi = law.phi();
        for i in 1..mu {
            assert!(phi[i] <= phi[i - 1] * (1.0 + 1e-12), "left monotonicity at {i}");
        }
        for i in mu + 1..law.grid().len() {
            assert!(phi[i] >= phi[i - 1] * (1.0 - 1e-12), "right monotonicity at {i}");
        }
    }

    #[test]
    fn psi_is_strictly_increasing_above_median_and_equals_phi_at_mu() {
        let (_, law) = switching_standard();
        let psi = law.psi();
        for i in law.mu_index() + 1..law.grid().len() {
            assert!(psi[i] > psi[i - 1]);
        }
        assert!((law.psi_mu() - law.phi_mu()).abs() <= 1e-9 * law.phi_mu());
        let x1 = law.median() + 0.4;
        let x2 = law.median() + 1.1;
        assert!(law.psi_at(x2).unwrap() > law.psi_at(x1).unwrap());
    }

    #[test]
    fn weight_h_vanishes_at_median_and_g_matches_closed_form() {
        let (_, law) = ou_standard();
        let h_mu = law.weight_h_at(law.median()).unwrap();
        // numerator 2 F0(mu) - 1 = 0
        assert!(h_mu.abs() < 1e-6, "h(mu) = {h_mu}");
        let g_mu = law.weight_g_at(law.median()).unwrap();
        let expect = (-1.0f64).exp() / (2.0 * law.f0_at(law.median()) * law.phi_mu().sqrt());
        assert!((g_mu - expect).abs() < 1e-6 * expect);
        assert!(matches!(
            law.weight_h_at(law.median() - 0.1),
            Err(Error::DomainError { .. })
        ));
    }

    #[test]
    fn h_identity_holds_at_every_supported_node() {
        // 4 h sigma^2 f0^4 / (2 F0 - 1) = Phi(mu)^-2 exp(-Phi/Phi(mu)),
        // the algebra that makes the statistic distribution free.
        let (_, law) = ou_standard();
        let pm = law.phi_mu();
        for i in law.mu_index()..=law.h_support_end() {
            let c = law.cdf()[i];
            if 2.0 * c - 1.0 < 1e-14 {
                continue;
            }
            let f = law.f0()[i];
            let lhs = 4.0 * law.weight_h()[i] * law.sigma_sq()[i] * f * f * f * f
                / (2.0 * c - 1.0);
            let rhs = (-law.phi()[i] / pm).exp() / (pm * pm);
            assert!(
                (lhs - rhs).abs() <= 1e-12 * rhs.abs().max(1e-300),
                "node {i}: {lhs} vs {rhs}"
            );
        }
    }

    #[test]
    fn big_h_identity_holds_at_every_supported_node() {
        // H f0 (F0-1)^2 / Psi' = Psi(mu)^-2 exp(-Psi/Psi(mu))
        let (_, law) = switching_standard();
        let pm = law.psi_mu();
        for i in law.mu_index()..=law.big_h_support_end() {
            let t = 1.0 - law.cdf()[i];
            let psip = law.psi_prime()[i];
            if psip < 1e-280 || t < 1e-12 {
                continue;
            }
            let lhs = law.weight_big_h()[i] * law.f0()[i] * t * t / psip;
            let rhs = (-law.psi()[i] / pm).exp() / (pm * pm);
            assert!(
                (lhs - rhs).abs() <= 1e-10 * rhs.abs().max(1e-300),
                "node {i}: {lhs} vs {rhs}"
            );
        }
    }

    #[test]
    fn phi_prime_sign_relation() {
        // Phi'(x) (2 F0(x) - 1) > 0 away from the median: check via finite
        // differences of the tabulated Phi.
        let (_, law) = ou_standard();
        let phi = law.phi();
        let n = law.grid().len();
        for i in (1..n - 1).step_by(97) {
            let x = law.grid().node(i);
            if (x - law.median()).abs() < 0.05 {
                continue;
            }
            let slope = phi[i + 1] - phi[i - 1];
            let s = 2.0 * law.cdf()[i] - 1.0;
            if law.weight_h()[i] == 0.0 && x > law.median() {
                continue; // beyond truncation the exponent is dead anyway
            }
            assert!(slope * s > 0.0, "sign relation at node {i} (x = {x})");
        }
    }

    #[test]
    fn covariance_diagonal_and_symmetry_and_cauchy_schwarz() {
        let (_, law) = ou_standard();
        for (x, y) in [(0.0, 0.7), (-0.9, 1.3), (0.4, 0.4)] {
            let rxy = law.covariance(x, y).unwrap();
            let ryx = law.covariance(y, x).unwrap();
            assert_eq!(rxy, ryx);
            let px = law.phi_at(x).unwrap();
            let py = law.phi_at(y).unwrap();
            assert!(rxy * rxy <= px * py * (1.0 + 1e-9));
        }
        let x = 0.6;
        let r = law.covariance(x, x).unwrap();
        let p = law.phi_at(x).unwrap();
        assert!((r - p).abs() <= 1e-9 * p);
    }

    #[test]
    fn condition_integrals_finite_for_both_examples() {
        let (_, law) = ou_standard();
        let ci = law.condition_integrals();
        assert!(ci.all_finite(), "{ci:?}");
        assert!(ci.a1 >= 0.0);

        let (_, law) = switching_standard();
        let ci = law.condition_integrals();
        assert!(ci.all_finite(), "{ci:?}");
    }

    #[test]
    fn inverse_cdf_round_trip_and_median_at_half() {
        let (_, law) = ou_standard();
        assert!((law.inverse_cdf(0.5) - law.median()).abs() < 1e-9);
        for u in [0.01, 0.1, 0.37, 0.82, 0.99] {
            let x = law.inverse_cdf(u);
            assert!((law.cdf_at(x) - u).abs() < 1e-9, "u = {u}");
        }
    }

    #[test]
    fn identical_models_have_zero_distance() {
        let (m, law) = ou_standard();
        let law2 = InvariantLaw::build_on_grid(&m, law.grid().clone()).unwrap();
        let d = law.distance_norms(&law2, &m, &m).unwrap();
        assert_eq!(d.density_l2, 0.0);
        assert_eq!(d.cdf_l2, 0.0);
        assert_eq!(d.drift_kl, 0.0);
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let (m, law) = ou_standard();
        let other = SpatialGrid::new(-5.0, 5.0, 2049).unwrap();
        let law2 = InvariantLaw::build_on_grid(&m, other).unwrap();
        assert!(matches!(
            law.distance_norms(&law2, &m, &m),
            Err(Error::GridMismatch)
        ));
    }

    #[test]
    fn ou_phi_tail_growth_is_gaussian() {
        // log Phi(x) - a x^2 / sigma^2 + log x stays bounded as x grows.
        let (_, law) = ou_standard();
        let mut vals = Vec::new();
        for x in [2.0f64, 2.5, 3.0, 3.5, 4.0] {
            let phi = law.phi_at(x).unwrap();
            vals.push(phi.ln() - 0.5 * x * x + x.ln());
        }
        for w in vals.windows(2) {
            assert!((w[1] - w[0]).abs() < 0.35, "ratio drifts: {vals:?}");
        }
    }

    #[test]
    fn switching_psi_tail_growth_is_exponential() {
        // log Psi(x) -> (2a/sigma) x: the increments of log Psi per unit x
        // approach 2.
        let (_, law) = switching_standard();
        let l1 = law.psi_at(2.0).unwrap().ln();
        let l2 = law.psi_at(3.0).unwrap().ln();
        let l3 = law.psi_at(4.0).unwrap().ln();
        assert!((l2 - l1 - 2.0).abs() < 0.2, "{}", l2 - l1);
        assert!((l3 - l2 - 2.0).abs() < 0.1, "{}", l3 - l2);
    }

    #[test]
    fn grid_refinement_leaves_law_stable() {
        let m = DiffusionModel::ornstein_uhlenbeck(1.0, 0.0, core::f64::consts::SQRT_2);
        let policy = GridPolicy::default();
        let coarse = InvariantLaw::build(&m, &policy).unwrap();
        let fine = InvariantLaw::build(&m, &policy.refined()).unwrap();
        // Bounds agree (same provisional pass), fine grid contains coarse
        // nodes at even indices.
        assert!((coarse.grid().lower() - fine.grid().lower()).abs() < 1e-12);
        let f_max = coarse.f0().iter().cloned().fold(0.0, f64::max);
        let mut worst_f = 0.0f64;
        let mut worst_cdf = 0.0f64;
        let mut worst_phi = 0.0f64;
        let mut worst_psi = 0.0f64;
        for i in coarse.mu_index()..=coarse.h_support_end() {
            let j = 2 * i;
            worst_f = worst_f.max((coarse.f0()[i] - fine.f0()[j]).abs() / f_max);
            worst_cdf = worst_cdf.max((coarse.cdf()[i] - fine.cdf()[j]).abs());
            worst_phi = worst_phi
                .max((coarse.phi()[i] - fine.phi()[j]).abs() / fine.phi()[j].max(1e-300));
            worst_psi = worst_psi
                .max((coarse.psi()[i] - fine.psi()[j]).abs() / fine.psi()[j].max(1e-300));
        }
        assert!(worst_f < QUAD_TOL, "f0 moved {worst_f:.3e}");
        assert!(worst_cdf < QUAD_TOL, "F0 moved {worst_cdf:.3e}");
        assert!(worst_phi < QUAD_TOL, "Phi moved {worst_phi:.3e}");
        assert!(worst_psi < QUAD_TOL, "Psi moved {worst_psi:.3e}");
    }
}
