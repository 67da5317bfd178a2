//! Composite-hypothesis machinery: maximum likelihood for a parametric
//! drift, the stochastic-integral-free score `R_T`, and the corrected
//! statistic that restores distribution-freeness under estimated
//! parameters.
//!
//! Plugging an estimator into the weighted Cramér–von Mises statistic
//! breaks its universal limit because the estimator error enters the
//! density difference. The correction adds back the first-order expansion
//! of that error, `f0_dot * I(theta)^-1 * R_T(theta)/T`, where `R_T` is
//! rewritten by the Itô formula so that it contains no stochastic
//! integral and can be evaluated on a discretised path.

#![allow(unused_imports)]

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::error::Error;
use crate::estimate::lte;
use crate::grid::GridPolicy;
use crate::law::InvariantLaw;
use crate::math::FloatExt;
use crate::model::{DiffusionModel, DiffusionSpec, DriftSpec};
use crate::quad::{gl4, trapz};
use crate::simulate::SamplePath;

/// Builtin one-parameter drift families.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "family", rename_all = "kebab-case"))]
pub enum ParamFamily {
    /// `S(theta, x) = -theta (x - b)` with known location `b`; the
    /// invariant median stays at `b` for every theta.
    MeanReversionRate { b: f64 },
    /// `S(theta, x) = -a sgn(x - theta)` with known rate `a`; theta is the
    /// shift, estimated at rate `T`, and the median moves with it.
    SwitchingShift { a: f64 },
}

/// A drift family `S(theta, .)` with its parameter range and diffusion
/// coefficient, plus the partial-derivative descriptors the correction
/// needs.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ParametricModel {
    pub family: ParamFamily,
    pub diffusion: DiffusionSpec,
    pub bounds: (f64, f64),
    pub label: String,
}

impl ParametricModel {
    pub fn mean_reversion_rate(b: f64, sigma: f64, bounds: (f64, f64)) -> Self {
        Self {
            family: ParamFamily::MeanReversionRate { b },
            diffusion: DiffusionSpec::Constant { sigma },
            bounds,
            label: format!("ou-rate(b={b},sigma={sigma})"),
        }
    }

    pub fn switching_shift(a: f64, sigma: f64, bounds: (f64, f64)) -> Self {
        Self {
            family: ParamFamily::SwitchingShift { a },
            diffusion: DiffusionSpec::Constant { sigma },
            bounds,
            label: format!("switching-shift(a={a},sigma={sigma})"),
        }
    }

    /// `S(theta, x)`.
    pub fn drift(&self, theta: f64, x: f64) -> f64 {
        match &self.family {
            ParamFamily::MeanReversionRate { b } => -theta * (x - b),
            ParamFamily::SwitchingShift { a } => {
                if x > theta {
                    -a
                } else if x < theta {
                    *a
                } else {
                    0.0
                }
            }
        }
    }

    /// `dS/dtheta`. For the shift family the derivative vanishes except on
    /// the null set `x = theta`.
    pub fn drift_dtheta(&self, _theta: f64, x: f64) -> f64 {
        match &self.family {
            ParamFamily::MeanReversionRate { b } => -(x - b),
            ParamFamily::SwitchingShift { .. } => 0.0,
        }
    }

    /// `d^2 S / dtheta dx`.
    pub fn drift_dtheta_dx(&self, _theta: f64, _x: f64) -> f64 {
        match &self.family {
            ParamFamily::MeanReversionRate { .. } => -1.0,
            ParamFamily::SwitchingShift { .. } => 0.0,
        }
    }

    /// The model at a fixed parameter value.
    pub fn model_at(&self, theta: f64) -> DiffusionModel {
        let drift = match &self.family {
            ParamFamily::MeanReversionRate { b } => DriftSpec::LinearOu { a: theta, b: *b },
            ParamFamily::SwitchingShift { a } => DriftSpec::Switching { a: *a, b: theta },
        };
        DiffusionModel::new(drift, self.diffusion.clone(), format!("{}@{theta}", self.label))
    }

    /// Whether the invariant median moves with the parameter; the
    /// corrected statistic is only valid when it does not.
    pub fn median_depends_on_theta(&self) -> bool {
        match &self.family {
            ParamFamily::MeanReversionRate { .. } => false,
            ParamFamily::SwitchingShift { .. } => true,
        }
    }

    /// Largest relative disagreement between the derivative descriptors
    /// and central finite differences over `n` deterministic sample
    /// points.
    pub fn derivative_consistency(&self, n: usize) -> f64 {
        let (lo, hi) = self.bounds;
        let mut worst = 0.0f64;
        let mut state = 0x243f_6a88_85a3_08d3u64;
        for _ in 0..n {
            // splitmix steps for reproducible quasi-random probe points
            state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
            let mut z = state;
            z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
            let u1 = ((z >> 11) as f64) / ((1u64 << 53) as f64);
            let u2 = (((z.wrapping_mul(0x2545_f491_4f6c_dd1d)) >> 11) as f64)
                / ((1u64 << 53) as f64);
            let theta = lo + (hi - lo) * (0.05 + 0.9 * u1);
            let x = -6.0 + 12.0 * u2;
            let e = 1e-5 * theta.abs().max(1.0);
            let fd = (self.drift(theta + e, x) - self.drift(theta - e, x)) / (2.0 * e);
            let an = self.drift_dtheta(theta, x);
            worst = worst.max((fd - an).abs() / an.abs().max(1.0));
        }
        worst
    }
}

/// Result of a maximum-likelihood fit.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CompositeFit {
    pub theta_hat: f64,
    /// Stationary Fisher information `int (dS/dtheta / sigma)^2 f_theta dx`.
    pub fisher_info: f64,
    /// `R_T(theta_hat) / T`.
    pub r_value: f64,
    /// Coarse log-likelihood profile (theta, log-likelihood).
    pub profile: Vec<(f64, f64)>,
    /// The maximiser hit the parameter bounds.
    pub boundary: bool,
}

const MLE_GRID: usize = 256;

fn golden_max<F: Fn(f64) -> f64>(f: F, mut a: f64, mut b: f64, iters: usize) -> f64 {
    let inv_phi = 0.618_033_988_749_894_9f64;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    for _ in 0..iters {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    0.5 * (a + b)
}

/// Discretised log-likelihood `int S/sigma^2 dX - 1/2 int S^2/sigma^2 dt`
/// with left-point Itô sums.
pub fn log_likelihood(path: &SamplePath, pmodel: &ParametricModel, theta: f64) -> f64 {
    let mut ito = 0.0;
    let mut comp = 0.0;
    for k in 0..path.steps() {
        let x = path.values[k];
        let s = pmodel.drift(theta, x);
        let s2 = pmodel.diffusion.sigma_sq(x);
        ito += s / s2 * (path.values[k + 1] - x);
        comp += s * s / s2;
    }
    ito - 0.5 * comp * path.dt
}

/// Maximum-likelihood fit by coarse grid search plus golden-section
/// refinement of the bracketing cells. Boundary maxima are flagged, not
/// rejected.
pub fn mle_fit(
    path: &SamplePath,
    pmodel: &ParametricModel,
    policy: &GridPolicy,
) -> Result<CompositeFit, Error> {
    path.validate()?;
    let (lo, hi) = pmodel.bounds;
    if !(hi > lo) {
        return Err(Error::InvalidCalibration(format!("bad parameter bounds ({lo}, {hi})")));
    }
    let step = (hi - lo) / MLE_GRID as f64;
    let mut profile = Vec::with_capacity(MLE_GRID);
    let mut best = 0usize;
    let mut best_ll = f64::NEG_INFINITY;
    for j in 0..MLE_GRID {
        let theta = lo + (j as f64 + 0.5) * step;
        let ll = log_likelihood(path, pmodel, theta);
        if ll > best_ll {
            best_ll = ll;
            best = j;
        }
        profile.push((theta, ll));
    }
    let bracket_lo = lo + (best as f64 - 0.5).max(0.0) * step;
    let bracket_hi = (lo + (best as f64 + 2.5) * step).min(hi);
    let theta_hat =
        golden_max(|t| log_likelihood(path, pmodel, t), bracket_lo, bracket_hi, 64);
    let boundary = best == 0 || best == MLE_GRID - 1;

    let law = InvariantLaw::build(&pmodel.model_at(theta_hat), policy)?;
    let fisher_info = fisher_information(pmodel, theta_hat, &law);
    let r_value = r_statistic(path, pmodel, theta_hat) / path.horizon();

    Ok(CompositeFit { theta_hat, fisher_info, r_value, profile, boundary })
}

/// Stationary Fisher information at `theta` against the law `f_theta`.
pub fn fisher_information(pmodel: &ParametricModel, theta: f64, law: &InvariantLaw) -> f64 {
    law.expect(|x| {
        let d = pmodel.drift_dtheta(theta, x);
        d * d / pmodel.diffusion.sigma_sq(x)
    })
}

/// The score functional rewritten without a stochastic integral:
///
/// `R_T = int_{X_0}^{X_T} Sdot/sigma^2 dy
///        - int_0^T (Sdot' sigma - 2 Sdot sigma') / (2 sigma) dt
///        - int_0^T Sdot S / sigma^2 dt`.
///
/// The lower limit of the space integral is pinned to `X_0`; any other
/// choice shifts `R_T` by a theta-dependent constant that cancels in the
/// pathwise identity against the direct Itô sum.
pub fn r_statistic(path: &SamplePath, pmodel: &ParametricModel, theta: f64) -> f64 {
    let x0 = path.values[0];
    let xt = *path.values.last().unwrap();

    // space integral on 128 Gauss-Legendre panels
    let panels = 128;
    let hp = (xt - x0) / panels as f64;
    let mut space = 0.0;
    if hp != 0.0 {
        for p in 0..panels {
            let a = x0 + hp * p as f64;
            space += gl4(
                |y| pmodel.drift_dtheta(theta, y) / pmodel.diffusion.sigma_sq(y),
                a,
                a + hp,
            );
        }
    }

    let mut ito_corr = 0.0;
    let mut score_comp = 0.0;
    for k in 0..path.steps() {
        let x = path.values[k];
        let sd = pmodel.drift_dtheta(theta, x);
        let sdp = pmodel.drift_dtheta_dx(theta, x);
        let sig = pmodel.diffusion.sigma(x);
        let sigp = pmodel.diffusion.sigma_prime(x);
        ito_corr += (sdp * sig - 2.0 * sd * sigp) / (2.0 * sig);
        score_comp += sd * pmodel.drift(theta, x) / pmodel.diffusion.sigma_sq(x);
    }
    space - ito_corr * path.dt - score_comp * path.dt
}

/// Direct Itô-sum form `sum (Sdot/sigma^2)(dX - S dt)` of the same score;
/// the pathwise oracle for `r_statistic`.
pub fn r_statistic_ito(path: &SamplePath, pmodel: &ParametricModel, theta: f64) -> f64 {
    let mut acc = 0.0;
    for k in 0..path.steps() {
        let x = path.values[k];
        let sd = pmodel.drift_dtheta(theta, x);
        let s2 = pmodel.diffusion.sigma_sq(x);
        acc += sd / s2 * (path.values[k + 1] - x - pmodel.drift(theta, x) * path.dt);
    }
    acc
}

/// Corrected statistic for families with a theta-independent median:
///
/// `T int_mu^inf h(th, x) (f_lte - f0(th, x) + f0_dot(th, x) I^-1 R_T/T)^2 dF0(th, x)`
///
/// evaluated at `th = theta_hat`. `f0_dot` comes from a centred finite
/// difference of the law builder (relative step 1e-4).
pub fn corrected_cvm(
    path: &SamplePath,
    pmodel: &ParametricModel,
    fit: &CompositeFit,
    law_hat: &InvariantLaw,
) -> Result<f64, Error> {
    if pmodel.median_depends_on_theta() {
        return Err(Error::MedianVariesWithTheta);
    }
    let dtheta = 1e-4 * fit.theta_hat.abs().max(1.0);
    let law_plus =
        InvariantLaw::build_on_grid(&pmodel.model_at(fit.theta_hat + dtheta), law_hat.grid().clone())?;
    let law_minus =
        InvariantLaw::build_on_grid(&pmodel.model_at(fit.theta_hat - dtheta), law_hat.grid().clone())?;

    let shift = fit.r_value / fit.fisher_info;
    let offset: Vec<f64> = law_plus
        .f0()
        .iter()
        .zip(law_minus.f0())
        .map(|(p, m)| (p - m) / (2.0 * dtheta) * shift)
        .collect();
    cvm_lte_with_offset(path, law_hat, &offset)
}

/// `T int_mu^inf h (f_lte - f0 + offset)^2 dF0`; with a zero offset this
/// is exactly the plug-in statistic.
pub fn cvm_lte_with_offset(
    path: &SamplePath,
    law: &InvariantLaw,
    offset: &[f64],
) -> Result<f64, Error> {
    let curve = lte(path, law)?;
    let step = law.grid().step();
    let mut acc = 0.0;
    for i in law.mu_index()..=law.h_support_end() {
        let d = curve.values[i] - law.f0()[i] + offset[i];
        acc += law.weight_h()[i] * d * d * law.f0()[i];
    }
    Ok(path.horizon() * acc * step)
}

/// Shift-family statistic: the plug-in weighted statistic at `theta_hat`
/// with integration starting at the estimated shift. The rate-`T`
/// estimator contributes nothing to the limit, so no correction term is
/// added.
pub fn shift_corrected_cvm(
    path: &SamplePath,
    pmodel: &ParametricModel,
    fit: &CompositeFit,
    policy: &GridPolicy,
) -> Result<f64, Error> {
    if !matches!(pmodel.family, ParamFamily::SwitchingShift { .. }) {
        return Err(Error::WrongFamily("switching-shift"));
    }
    let law_hat = InvariantLaw::build(&pmodel.model_at(fit.theta_hat), policy)?;
    crate::stats::cvm_lte(path, &law_hat)
}

/// Pseudo-true parameter under misspecification.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PseudoTrue {
    pub theta_star: f64,
    /// The minimised drift distance `||(S(theta*) - S_true)/sigma||_*`.
    pub distance: f64,
    /// `R(theta*)`: the stationary score at the minimiser; zero at an
    /// interior minimum.
    pub r_at_star: f64,
    pub boundary: bool,
}

/// Minimises `||(S(theta, .) - S_true)/sigma||_*` (weighted by the true
/// invariant density) over the parameter range: the value the MLE
/// converges to when the family is misspecified.
pub fn pseudo_true_theta(
    pmodel: &ParametricModel,
    true_model: &DiffusionModel,
    law_true: &InvariantLaw,
) -> PseudoTrue {
    let dist_sq = |theta: f64| {
        law_true.expect(|x| {
            let d = (pmodel.drift(theta, x) - true_model.drift(x)) / pmodel.diffusion.sigma(x);
            d * d
        })
    };
    let (lo, hi) = pmodel.bounds;
    let grid_n = 512usize;
    let step = (hi - lo) / grid_n as f64;
    let mut best = 0usize;
    let mut best_v = f64::INFINITY;
    for j in 0..grid_n {
        let theta = lo + (j as f64 + 0.5) * step;
        let v = dist_sq(theta);
        if v < best_v {
            best_v = v;
            best = j;
        }
    }
    let a = lo + (best as f64 - 0.5).max(0.0) * step;
    let b = (lo + (best as f64 + 2.5) * step).min(hi);
    let theta_star = golden_max(|t| -dist_sq(t), a, b, 80);
    let r_at_star = law_true.expect(|x| {
        pmodel.drift_dtheta(theta_star, x)
            * (true_model.drift(x) - pmodel.drift(theta_star, x))
            / pmodel.diffusion.sigma_sq(x)
    });
    PseudoTrue {
        theta_star,
        distance: dist_sq(theta_star).sqrt(),
        r_at_star,
        boundary: best == 0 || best == grid_n - 1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::{simulate_path, RngStream};

    fn ou_pmodel() -> ParametricModel {
        ParametricModel::mean_reversion_rate(0.0, core::f64::consts::SQRT_2, (0.2, 4.0))
    }

    fn ou_path(horizon: f64, stream: u64) -> SamplePath {
        let m = DiffusionModel::ornstein_uhlenbeck(1.0, 0.0, core::f64::consts::SQRT_2);
        let law = InvariantLaw::build(&m, &GridPolicy::default()).unwrap();
        simulate_path(&m, &law, horizon, 0.01, RngStream::new(1001, stream)).unwrap()
    }

    #[test]
    fn derivative_descriptors_match_finite_differences() {
        assert!(ou_pmodel().derivative_consistency(1000) < 1e-6);
        let sw = ParametricModel::switching_shift(1.0, 1.0, (-2.0, 2.0));
        assert!(sw.derivative_consistency(1000) < 1e-12);
    }

    #[test]
    fn mle_matches_closed_form_for_linear_drift() {
        // For S(theta, x) = -theta x the likelihood is quadratic in theta
        // and the maximiser has the closed form A / 2B.
        let p = ou_path(500.0, 0);
        let pm = ou_pmodel();
        let mut a = 0.0;
        let mut b = 0.0;
        for k in 0..p.steps() {
            let x = p.values[k];
            a += -x / 2.0 * (p.values[k + 1] - x);
            b += 0.5 * x * x / 2.0 * p.dt;
        }
        let closed = a / (2.0 * b);
        let fit = mle_fit(&p, &pm, &GridPolicy::default()).unwrap();
        assert!(!fit.boundary);
        assert!(
            (fit.theta_hat - closed).abs() < 1e-6,
            "golden {} vs closed form {closed}",
            fit.theta_hat
        );
        assert!((fit.theta_hat - 1.0).abs() < 0.2, "theta_hat = {}", fit.theta_hat);
        assert!(fit.fisher_info > 0.0);
    }

    #[test]
    fn r_statistic_is_zero_when_drift_has_no_parameter_sensitivity() {
        let sw = ParametricModel::switching_shift(1.0, 1.0, (-2.0, 2.0));
        let p = ou_path(200.0, 1);
        assert_eq!(r_statistic(&p, &sw, 0.3), 0.0);
    }

    #[test]
    fn ito_free_form_matches_direct_ito_sum() {
        // The module's central identity, checked pathwise at dt = 1e-3.
        let m = DiffusionModel::ornstein_uhlenbeck(1.0, 0.0, core::f64::consts::SQRT_2);
        let law = InvariantLaw::build(&m, &GridPolicy::default()).unwrap();
        let pm = ou_pmodel();
        for stream in 0..3u64 {
            let p = simulate_path(&m, &law, 100.0, 1e-3, RngStream::new(77, stream)).unwrap();
            for theta in [0.7, 1.0, 1.6] {
                let direct = r_statistic_ito(&p, &pm, theta);
                let clean = r_statistic(&p, &pm, theta);
                // residual scale: sigma^3 sqrt(T dt)
                let tol = 12.0 * 2.0f64.powf(1.5) * (100.0 * 1e-3_f64).sqrt();
                assert!(
                    (direct - clean).abs() < tol,
                    "stream {stream}, theta {theta}: {direct} vs {clean}"
                );
            }
        }
    }

    #[test]
    fn score_at_mle_shrinks_with_horizon() {
        let pm = ou_pmodel();
        let policy = GridPolicy::default();
        let short = mle_fit(&ou_path(250.0, 2), &pm, &policy).unwrap();
        let long = mle_fit(&ou_path(2000.0, 2), &pm, &policy).unwrap();
        assert!(
            long.r_value.abs() < short.r_value.abs().max(1e-3),
            "short {} long {}",
            short.r_value,
            long.r_value
        );
    }

    #[test]
    fn corrected_statistic_with_zero_correction_is_plug_in() {
        let pm = ou_pmodel();
        let p = ou_path(300.0, 3);
        let policy = GridPolicy::default();
        let mut fit = mle_fit(&p, &pm, &policy).unwrap();
        let law_hat = InvariantLaw::build(&pm.model_at(fit.theta_hat), &policy).unwrap();
        fit.r_value = 0.0;
        let corrected = corrected_cvm(&p, &pm, &fit, &law_hat).unwrap();
        let plug_in = crate::stats::cvm_lte(&p, &law_hat).unwrap();
        assert!(
            (corrected - plug_in).abs() <= 1e-12 * plug_in.max(1.0),
            "{corrected} vs {plug_in}"
        );
    }

    #[test]
    fn corrected_statistic_refused_when_median_moves() {
        let sw = ParametricModel::switching_shift(1.0, 1.0, (-2.0, 2.0));
        let m = DiffusionModel::switching(1.0, 0.0, 1.0);
        let law = InvariantLaw::build(&m, &GridPolicy::default()).unwrap();
        let p = simulate_path(&m, &law, 200.0, 0.01, RngStream::new(5, 0)).unwrap();
        let fit = CompositeFit {
            theta_hat: 0.0,
            fisher_info: 1.0,
            r_value: 0.0,
            profile: Vec::new(),
            boundary: false,
        };
        assert!(matches!(
            corrected_cvm(&p, &sw, &fit, &law),
            Err(Error::MedianVariesWithTheta)
        ));
        // and the shift variant refuses non-shift families
        let pm = ou_pmodel();
        assert!(matches!(
            shift_corrected_cvm(&p, &pm, &fit, &GridPolicy::default()),
            Err(Error::WrongFamily(_))
        ));
    }

    #[test]
    fn pseudo_true_recovers_member_of_family() {
        let pm = ou_pmodel();
        let truth = DiffusionModel::ornstein_uhlenbeck(1.7, 0.0, core::f64::consts::SQRT_2);
        let law = InvariantLaw::build(&truth, &GridPolicy::default()).unwrap();
        let pt = pseudo_true_theta(&pm, &truth, &law);
        assert!(!pt.boundary);
        assert!((pt.theta_star - 1.7).abs() < 1e-4, "theta* = {}", pt.theta_star);
        assert!(pt.distance < 1e-4);
        assert!(pt.r_at_star.abs() < 1e-6);
    }
}
