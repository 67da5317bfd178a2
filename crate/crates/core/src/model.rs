//! Drift and diffusion descriptors and numerical existence/ergodicity checks.
//!
//! Drifts are restricted to a closed set of parametric families so that a
//! model is fully described by data (serialisable, hashable, diffable in
//! experiment configs). Arbitrary code injection is deliberately not
//! supported.

#![allow(unused_imports)]

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::Error;
use crate::math::FloatExt;
use crate::quad::{gl4, tail_decays, trapz};

/// A cosine perturbation `amplitude * cos(frequency * x)` added to a
/// polynomial drift.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TrigTerm {
    pub amplitude: f64,
    pub frequency: f64,
}

/// Trend-coefficient families.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "family", rename_all = "kebab-case"))]
pub enum DriftSpec {
    /// `S(x) = -a (x - b)`, mean reversion towards `b` at rate `a > 0`.
    LinearOu { a: f64, b: f64 },
    /// `S(x) = -a sgn(x - b)`, constant pull towards `b`.
    Switching { a: f64, b: f64 },
    /// Base drift scaled by `factor` on `x >= split`; used for one-sided
    /// alternatives that leave the drift untouched below the median.
    OneSidedScaled { base: Box<DriftSpec>, factor: f64, split: f64 },
    /// `S(x) = base(x) + amplitude * sigma(x)^2 * cos(frequency * x)`;
    /// oscillating alternatives whose invariant density approaches the base
    /// one as the frequency grows.
    Oscillating { base: Box<DriftSpec>, amplitude: f64, frequency: f64 },
    /// `S(x) = sum_k poly[k] x^k + sum_j amp_j cos(freq_j x)`.
    PolyTrig { poly: Vec<f64>, trig: Vec<TrigTerm> },
}

impl DriftSpec {
    /// Drift value at `x`. The oscillating family reads the diffusion
    /// coefficient, so evaluation goes through the owning model.
    fn eval(&self, x: f64, diffusion: &DiffusionSpec) -> f64 {
        match self {
            DriftSpec::LinearOu { a, b } => -a * (x - b),
            DriftSpec::Switching { a, b } => {
                if x > *b {
                    -a
                } else if x < *b {
                    *a
                } else {
                    0.0
                }
            }
            DriftSpec::OneSidedScaled { base, factor, split } => {
                let s = base.eval(x, diffusion);
                if x >= *split {
                    factor * s
                } else {
                    s
                }
            }
            DriftSpec::Oscillating { base, amplitude, frequency } => {
                base.eval(x, diffusion)
                    + amplitude * diffusion.sigma_sq(x) * (frequency * x).cos()
            }
            DriftSpec::PolyTrig { poly, trig } => {
                let mut s = 0.0;
                for &c in poly.iter().rev() {
                    s = s * x + c;
                }
                for t in trig {
                    s += t.amplitude * (t.frequency * x).cos();
                }
                s
            }
        }
    }

    /// Rough centre of the invariant law, used to seed grid construction.
    fn center_hint(&self) -> f64 {
        match self {
            DriftSpec::LinearOu { b, .. } | DriftSpec::Switching { b, .. } => *b,
            DriftSpec::OneSidedScaled { base, .. } | DriftSpec::Oscillating { base, .. } => {
                base.center_hint()
            }
            DriftSpec::PolyTrig { .. } => 0.0,
        }
    }
}

/// Diffusion-coefficient families. The squared coefficient must be positive
/// and continuous; the derivative of `sigma` is carried for the
/// composite-hypothesis module.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "family", rename_all = "kebab-case"))]
pub enum DiffusionSpec {
    /// `sigma(x) = sigma`.
    Constant { sigma: f64 },
    /// `sigma(x) = base * sqrt(1 + (slope * x)^2)`, smooth and positive.
    SmoothGrowth { base: f64, slope: f64 },
}

impl DiffusionSpec {
    #[inline]
    pub fn sigma(&self, x: f64) -> f64 {
        match self {
            DiffusionSpec::Constant { sigma } => *sigma,
            DiffusionSpec::SmoothGrowth { base, slope } => {
                base * (1.0 + (slope * x) * (slope * x)).sqrt()
            }
        }
    }

    #[inline]
    pub fn sigma_sq(&self, x: f64) -> f64 {
        match self {
            DiffusionSpec::Constant { sigma } => sigma * sigma,
            DiffusionSpec::SmoothGrowth { base, slope } => {
                base * base * (1.0 + (slope * x) * (slope * x))
            }
        }
    }

    /// `d sigma / dx`.
    #[inline]
    pub fn sigma_prime(&self, x: f64) -> f64 {
        match self {
            DiffusionSpec::Constant { .. } => 0.0,
            DiffusionSpec::SmoothGrowth { base, slope } => {
                base * slope * slope * x / (1.0 + (slope * x) * (slope * x)).sqrt()
            }
        }
    }

    fn scale_hint(&self) -> f64 {
        match self {
            DiffusionSpec::Constant { sigma } => sigma.abs().max(1e-3),
            DiffusionSpec::SmoothGrowth { base, .. } => base.abs().max(1e-3),
        }
    }
}

/// A scalar ergodic diffusion model `dX = S(X) dt + sigma(X) dW`.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DiffusionModel {
    pub drift: DriftSpec,
    pub diffusion: DiffusionSpec,
    pub label: String,
}

impl DiffusionModel {
    pub fn new(drift: DriftSpec, diffusion: DiffusionSpec, label: impl Into<String>) -> Self {
        Self { drift, diffusion, label: label.into() }
    }

    /// Ornstein-Uhlenbeck model `dX = -a (X - b) dt + sigma dW`.
    pub fn ornstein_uhlenbeck(a: f64, b: f64, sigma: f64) -> Self {
        Self::new(
            DriftSpec::LinearOu { a, b },
            DiffusionSpec::Constant { sigma },
            format!("ou(a={a},b={b},sigma={sigma})"),
        )
    }

    /// Simple switching model `dX = -a sgn(X - b) dt + sigma dW`.
    pub fn switching(a: f64, b: f64, sigma: f64) -> Self {
        Self::new(
            DriftSpec::Switching { a, b },
            DiffusionSpec::Constant { sigma },
            format!("switching(a={a},b={b},sigma={sigma})"),
        )
    }

    /// Trend coefficient `S(x)`.
    #[inline]
    pub fn drift(&self, x: f64) -> f64 {
        self.drift.eval(x, &self.diffusion)
    }

    #[inline]
    pub fn sigma(&self, x: f64) -> f64 {
        self.diffusion.sigma(x)
    }

    #[inline]
    pub fn sigma_sq(&self, x: f64) -> f64 {
        self.diffusion.sigma_sq(x)
    }

    /// Seed values `(center, scale)` for grid construction.
    pub fn location_hint(&self) -> (f64, f64) {
        (self.drift.center_hint(), self.diffusion.scale_hint())
    }
}

/// Numerical evidence for the existence (`ES`) and positive recurrence
/// (`RP`) conditions, gathered on a finite check grid.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConditionsReport {
    /// Smallest `A` with `x S(x) + sigma(x)^2 <= A (1 + x^2)` on the grid.
    pub es_constant: f64,
    /// The ratio `(x S + sigma^2) / (1 + x^2)` does not grow towards the
    /// grid edges, so the inequality plausibly extends beyond them.
    pub es_pass: bool,
    /// `V(S, x)` grows monotonically towards both grid edges.
    pub v_diverges: bool,
    /// Normalising integral `G(S)` (inner integral anchored at 0).
    pub g_value: f64,
    /// `G(S)` stable under refinement and domain extension, with decaying
    /// tail integrand.
    pub g_converged: bool,
    /// Both RP clauses hold.
    pub rp_pass: bool,
}

/// Checks conditions `ES` and `RP` on `[center - span, center + span]`.
///
/// The check grid is the caller's choice of domain; the default used by the
/// law builder covers 15 preliminary standard deviations each side with
/// 4096 points. Divergence of `G(S)` under refinement is reported as
/// `QuadratureDivergence`, which signals a non-ergodic model.
pub fn check_conditions(
    model: &DiffusionModel,
    center: f64,
    span: f64,
    points: usize,
) -> Result<ConditionsReport, Error> {
    // odd node count: the centre (where switching drifts kink) is a node,
    // and Simpson panels pair up exactly under coarsening
    let n = points.max(513) | 1;
    let lower = center - span;
    let step = 2.0 * span / (n - 1) as f64;

    // log integral I(x) = int_anchor^x S / sigma^2, anchored at the grid
    // centre to keep exponents moderate.
    let (log_int, log_int_mid) =
        crate::quad::cumulative_gl4(|y| model.drift(y) / model.sigma_sq(y), lower, step, n);
    let anchor = log_int[(n - 1) / 2];

    // ES: ratio (x S + sigma^2) / (1 + x^2).
    let ratio = |i: usize| {
        let x = lower + step * i as f64;
        (x * model.drift(x) + model.sigma_sq(x)) / (1.0 + x * x)
    };
    let band = n / 10;
    let mut es_constant = f64::NEG_INFINITY;
    let mut inner_max = f64::NEG_INFINITY;
    let mut outer_max = f64::NEG_INFINITY;
    for i in 0..n {
        let r = ratio(i);
        es_constant = es_constant.max(r);
        if i < band || i >= n - band {
            outer_max = outer_max.max(r);
        } else {
            inner_max = inner_max.max(r);
        }
    }
    let es_pass = es_constant.is_finite() && outer_max <= inner_max.max(0.0) + 1e-9;

    // RP first clause: V(S, x) -> +/- infinity. The integrand of V is
    // exp(-2 I) > 0, so V is always monotone; it keeps growing beyond the
    // grid unless the integrand has already decayed to nothing at the
    // edges (which is exactly the anti-restoring case where V stays
    // bounded).
    let v_integrand: Vec<f64> = (0..n).map(|i| (-2.0 * (log_int[i] - anchor)).exp()).collect();
    let v_max = v_integrand.iter().cloned().fold(0.0, f64::max);
    let v_diverges =
        v_integrand[0] > 1e-6 * v_max && v_integrand[n - 1] > 1e-6 * v_max;

    // RP second clause: G(S) finite. Integrand exp(2 I) / sigma^2 must have
    // decaying tails and a refinement/extension-stable integral.
    let g_integrand = |x: f64, li: f64| (2.0 * (li - anchor)).exp() / model.sigma_sq(x);
    let g_vals: Vec<f64> =
        (0..n).map(|i| g_integrand(lower + step * i as f64, log_int[i])).collect();
    let g_mids: Vec<f64> = (0..n - 1)
        .map(|p| g_integrand(lower + step * (p as f64 + 0.5), log_int_mid[p]))
        .collect();
    let g_tails_ok = tail_decays(&g_vals, true, band) && tail_decays(&g_vals, false, band);

    // Simpson at two resolutions: fine panels use true midpoints, coarse
    // panels reuse the odd nodes as midpoints.
    let mut g_fine = 0.0;
    for p in 0..n - 1 {
        g_fine += step / 6.0 * (g_vals[p] + 4.0 * g_mids[p] + g_vals[p + 1]);
    }
    let mut g_coarse = 0.0;
    for p in (0..n - 2).step_by(2) {
        g_coarse += 2.0 * step / 6.0 * (g_vals[p] + 4.0 * g_vals[p + 1] + g_vals[p + 2]);
    }

    // Domain extension by 25% on each side.
    let ext = span * 0.25;
    let mut g_left_ext = 0.0;
    let mut g_right_ext = 0.0;
    let ext_panels = n / 8;
    let ext_step = ext / ext_panels as f64;
    let mut li = log_int[0] - anchor;
    for p in 0..ext_panels {
        let b = lower - ext_step * p as f64;
        let a = b - ext_step;
        li -= gl4(|y| model.drift(y) / model.sigma_sq(y), a, b);
        g_left_ext += ext_step * (2.0 * li).exp() / model.sigma_sq(a);
    }
    let mut ri = log_int[n - 1] - anchor;
    let upper = lower + step * (n - 1) as f64;
    for p in 0..ext_panels {
        let a = upper + ext_step * p as f64;
        let b = a + ext_step;
        ri += gl4(|y| model.drift(y) / model.sigma_sq(y), a, b);
        g_right_ext += ext_step * (2.0 * ri).exp() / model.sigma_sq(b);
    }

    let refine_ok = (g_fine - g_coarse).abs() <= 1e-6 * g_fine.abs().max(1e-300);
    let ext_ok = (g_left_ext + g_right_ext) <= 1e-8 * g_fine.abs().max(1e-300);
    let g_converged = g_tails_ok && refine_ok && ext_ok && g_fine.is_finite();

    if !g_converged {
        return Err(Error::QuadratureDivergence(format!(
            "tails_ok={g_tails_ok} refine_ok={refine_ok} extension_ok={ext_ok} on [{lower:.3}, {upper:.3}]",
        )));
    }

    // Report G anchored at 0 per its definition when 0 is inside the grid.
    let g_value = if lower < 0.0 && upper > 0.0 {
        let p = ((0.0 - lower) / step) as usize;
        let i0 = log_int[p]
            + gl4(
                |y| model.drift(y) / model.sigma_sq(y),
                lower + step * p as f64,
                0.0,
            );
        g_fine * (-2.0 * (i0 - anchor)).exp()
    } else {
        g_fine
    };

    Ok(ConditionsReport {
        es_constant,
        es_pass,
        v_diverges,
        g_value,
        g_converged,
        rp_pass: v_diverges && g_converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ou_standard() -> DiffusionModel {
        DiffusionModel::ornstein_uhlenbeck(1.0, 0.0, core::f64::consts::SQRT_2)
    }

    #[test]
    fn drift_values_match_hand_computation() {
        let ou = DiffusionModel::ornstein_uhlenbeck(1.0, 0.0, 1.0);
        assert_eq!(ou.drift(2.0), -2.0);

        let sw = DiffusionModel::switching(1.0, 0.0, 1.0);
        assert_eq!(sw.drift(-3.0), 1.0);
        assert_eq!(sw.drift(3.0), -1.0);
        assert_eq!(sw.drift(0.0), 0.0);

        // oscillating over OU(1, 0, sqrt(2)), alpha = 0.5, n = 4, at x = 0:
        // 0 + 0.5 * 2 * cos(0) = 1
        let osc = DiffusionModel::new(
            DriftSpec::Oscillating {
                base: Box::new(DriftSpec::LinearOu { a: 1.0, b: 0.0 }),
                amplitude: 0.5,
                frequency: 4.0,
            },
            DiffusionSpec::Constant { sigma: core::f64::consts::SQRT_2 },
            "osc",
        );
        assert!((osc.drift(0.0) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn one_sided_scaling_only_touches_upper_half() {
        let alt = DiffusionModel::new(
            DriftSpec::OneSidedScaled {
                base: Box::new(DriftSpec::LinearOu { a: 1.0, b: 0.0 }),
                factor: 2.0,
                split: 0.0,
            },
            DiffusionSpec::Constant { sigma: core::f64::consts::SQRT_2 },
            "one-sided",
        );
        assert_eq!(alt.drift(-1.5), 1.5);
        assert_eq!(alt.drift(1.5), -3.0);
    }

    #[test]
    fn polytrig_matches_symbolic_rederivation() {
        let m = DiffusionModel::new(
            DriftSpec::PolyTrig {
                poly: alloc::vec![0.5, -1.0, 0.0, -2.0],
                trig: alloc::vec![TrigTerm { amplitude: 0.3, frequency: 2.0 }],
            },
            DiffusionSpec::Constant { sigma: 1.0 },
            "polytrig",
        );
        let mut x = -4.0f64;
        while x <= 4.0 {
            let expect = 0.5 - x - 2.0 * x * x * x + 0.3 * (2.0 * x).cos();
            assert!((m.drift(x) - expect).abs() < 1e-12);
            x += 0.001;
        }
    }

    #[test]
    fn oscillating_with_zero_amplitude_equals_base() {
        let base = DriftSpec::LinearOu { a: 1.3, b: -0.7 };
        let m = DiffusionModel::new(
            DriftSpec::Oscillating { base: Box::new(base.clone()), amplitude: 0.0, frequency: 9.0 },
            DiffusionSpec::Constant { sigma: 2.0 },
            "osc0",
        );
        let plain =
            DiffusionModel::new(base, DiffusionSpec::Constant { sigma: 2.0 }, "base");
        let mut x = -20.0;
        while x <= 20.0 {
            assert_eq!(m.drift(x), plain.drift(x));
            x += 0.137;
        }
    }

    #[test]
    fn ou_conditions_pass_with_gaussian_normaliser() {
        let report = check_conditions(&ou_standard(), 0.0, 15.0, 4096).unwrap();
        assert!(report.es_pass);
        assert!(report.rp_pass);
        // sigma^2 = 2, a = 1: G = int exp(-y^2/2) / 2 * 2 dy ... with the
        // definition G = int sigma^-2 exp(2 int_0^y S/sigma^2) dy
        //            = int exp(-y^2/2)/2 dy = sqrt(2 pi) / 2.
        let expect = (2.0 * core::f64::consts::PI).sqrt() / 2.0;
        assert!(
            (report.g_value - expect).abs() < 1e-6 * expect,
            "G = {}, expected {expect}",
            report.g_value
        );
    }

    #[test]
    fn switching_conditions_pass_with_exponential_normaliser() {
        let m = DiffusionModel::switching(1.0, 0.0, 1.0);
        let report = check_conditions(&m, 0.0, 15.0, 4096).unwrap();
        assert!(report.es_pass && report.rp_pass);
        // G = int exp(-2|y|) dy = 1
        assert!((report.g_value - 1.0).abs() < 1e-6, "G = {}", report.g_value);
    }

    #[test]
    fn anti_restoring_drift_diverges() {
        let bad = DiffusionModel::new(
            DriftSpec::PolyTrig { poly: alloc::vec![0.0, 1.0], trig: alloc::vec![] },
            DiffusionSpec::Constant { sigma: 1.0 },
            "anti-restoring",
        );
        let res = check_conditions(&bad, 0.0, 15.0, 2048);
        assert!(matches!(res, Err(Error::QuadratureDivergence(_))), "{res:?}");
    }

    #[test]
    fn checks_are_deterministic() {
        let a = check_conditions(&ou_standard(), 0.0, 15.0, 4096).unwrap();
        let b = check_conditions(&ou_standard(), 0.0, 15.0, 4096).unwrap();
        assert_eq!(a, b);
    }
}
