//! Monte Carlo calibration of the limiting Wiener functionals.
//!
//! Four limits cover the whole suite:
//!
//! - `int_exp`:  `int_1^inf w(v)^2 e^-v dv`
//! - `sup_exp`:  `sup_{v>=1} |w(v)| e^-v`
//! - `int_01`:   `int_0^1 w(v)^2 dv`
//! - `sup_01`:   `sup_{0<=v<=1} |w(v)|`
//!
//! Draws simulate a standard Wiener path by Gaussian increments and apply
//! a left-point Riemann sum or a running max. The exponentially weighted
//! functionals start at `v = 1` exactly, with `w(1)` drawn as `N(0, 1)`;
//! nothing below 1 enters the limit. Critical-value tables are empirical
//! quantiles with bootstrap standard errors and full reproducibility
//! metadata; no precomputed numbers ship in code.

#![allow(unused_imports)]

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::Error;
use crate::law::InvariantLaw;
use crate::math::FloatExt;
use crate::simulate::RngStream;

/// Generator version recorded in tables; bump on any change to the
/// sampling scheme so stale files are rejected at load time.
pub const GENERATOR_VERSION: &str = "wiener-mc-1";

/// Minimum number of draws for a quantile table.
pub const MIN_TABLE_SAMPLES: usize = 100_000;

/// Default calibration parameters: quantile MC error around 0.3%.
pub const DEFAULT_N_PATHS: usize = 500_000;
pub const DEFAULT_TIME_STEP: f64 = 5e-4;
pub const DEFAULT_TRUNCATION_V: f64 = 35.0;

/// The tabulated limit laws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum LimitFunctional {
    IntExp,
    SupExp,
    Int01,
    Sup01,
}

impl LimitFunctional {
    pub const ALL: [LimitFunctional; 4] = [
        LimitFunctional::IntExp,
        LimitFunctional::SupExp,
        LimitFunctional::Int01,
        LimitFunctional::Sup01,
    ];

    pub fn id(&self) -> &'static str {
        match self {
            LimitFunctional::IntExp => "int_exp",
            LimitFunctional::SupExp => "sup_exp",
            LimitFunctional::Int01 => "int_01",
            LimitFunctional::Sup01 => "sup_01",
        }
    }

    pub fn from_id(s: &str) -> Option<Self> {
        Self::ALL.iter().copied().find(|f| f.id() == s)
    }

    fn exp_weighted(&self) -> bool {
        matches!(self, LimitFunctional::IntExp | LimitFunctional::SupExp)
    }
}

impl core::fmt::Display for LimitFunctional {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.id())
    }
}

/// A prepared sampler: the time grid and weights are shared across draws,
/// each draw owns a stream index, so draws can run on any number of
/// workers and reproduce bit-identically.
#[derive(Debug, Clone)]
pub struct LimitSampler {
    pub functional: LimitFunctional,
    pub time_step: f64,
    pub truncation_v: f64,
    pub master_seed: u64,
    /// Per-node exponential weights (1.0 for the unweighted functionals).
    weights: Vec<f64>,
    steps: usize,
}

impl LimitSampler {
    pub fn new(
        functional: LimitFunctional,
        time_step: f64,
        truncation_v: f64,
        master_seed: u64,
    ) -> Result<Self, Error> {
        if !(time_step > 0.0 && time_step <= 1e-3) {
            return Err(Error::InvalidCalibration(format!(
                "time_step {time_step} must be in (0, 1e-3]"
            )));
        }
        if functional.exp_weighted() && truncation_v < 30.0 {
            return Err(Error::InvalidCalibration(format!(
                "truncation_v {truncation_v} must be >= 30 for exponentially weighted functionals"
            )));
        }
        let (v0, v1) = if functional.exp_weighted() { (1.0, truncation_v) } else { (0.0, 1.0) };
        let steps = ((v1 - v0) / time_step).round() as usize;
        let weights = match functional {
            LimitFunctional::IntExp => {
                (0..steps).map(|k| (-(v0 + k as f64 * time_step)).exp()).collect()
            }
            LimitFunctional::SupExp => {
                (0..=steps).map(|k| (-(v0 + k as f64 * time_step)).exp()).collect()
            }
            _ => Vec::new(),
        };
        Ok(Self { functional, time_step, truncation_v, master_seed, weights, steps })
    }

    /// One draw of the functional, on its own stream.
    pub fn draw(&self, stream: u64) -> f64 {
        let mut rng = RngStream::new(self.master_seed, stream).rng();
        let h = self.time_step;
        let sqrt_h = h.sqrt();
        match self.functional {
            LimitFunctional::IntExp => {
                // w(1) ~ N(0,1), then left-point sum of w^2 e^-v
                let mut w: f64 = rng.sample(StandardNormal);
                let mut acc = 0.0;
                for k in 0..self.steps {
                    acc += w * w * self.weights[k];
                    let z: f64 = rng.sample(StandardNormal);
                    w += sqrt_h * z;
                }
                acc * h
            }
            LimitFunctional::SupExp => {
                let mut w: f64 = rng.sample(StandardNormal);
                let mut sup = w.abs() * self.weights[0];
                for k in 1..=self.steps {
                    let z: f64 = rng.sample(StandardNormal);
                    w += sqrt_h * z;
                    sup = sup.max(w.abs() * self.weights[k]);
                }
                sup
            }
            LimitFunctional::Int01 => {
                let mut w = 0.0f64;
                let mut acc = 0.0;
                for _ in 0..self.steps {
                    acc += w * w;
                    let z: f64 = rng.sample(StandardNormal);
                    w += sqrt_h * z;
                }
                acc * h
            }
            LimitFunctional::Sup01 => {
                let mut w = 0.0f64;
                let mut sup = 0.0f64;
                for _ in 0..self.steps {
                    let z: f64 = rng.sample(StandardNormal);
                    w += sqrt_h * z;
                    sup = sup.max(w.abs());
                }
                sup
            }
        }
    }

    /// Sequential sample of `n` draws on streams `0..n`.
    pub fn sample(&self, n: usize) -> Vec<f64> {
        (0..n as u64).map(|s| self.draw(s)).collect()
    }
}

/// Convenience wrapper matching the table-generation entry point.
pub fn sample_limit(
    functional: LimitFunctional,
    n_paths: usize,
    time_step: f64,
    truncation_v: f64,
    master_seed: u64,
) -> Result<Vec<f64>, Error> {
    Ok(LimitSampler::new(functional, time_step, truncation_v, master_seed)?.sample(n_paths))
}

/// Reproducibility metadata stored with a table.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct TableProvenance {
    pub functional: LimitFunctional,
    pub n_paths: usize,
    pub time_step: f64,
    pub truncation_v: f64,
    pub master_seed: u64,
}

/// One tabulated level.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct QuantileEntry {
    pub epsilon: f64,
    pub value: f64,
    pub bootstrap_se: f64,
}

/// Monte Carlo quantiles of a limit functional with full reproducibility
/// metadata.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CriticalValueTable {
    pub functional: LimitFunctional,
    pub quantiles: Vec<QuantileEntry>,
    pub n_paths: usize,
    pub time_step: f64,
    pub truncation_v: f64,
    pub master_seed: u64,
    pub generator_version: String,
}

impl CriticalValueTable {
    /// `1 - epsilon` quantile for the requested level.
    pub fn critical_value(&self, epsilon: f64) -> Result<f64, Error> {
        self.quantiles
            .iter()
            .find(|q| (q.epsilon - epsilon).abs() < 1e-12)
            .map(|q| q.value)
            .ok_or(Error::LevelNotTabulated(epsilon))
    }

    pub fn epsilons(&self) -> Vec<f64> {
        self.quantiles.iter().map(|q| q.epsilon).collect()
    }

    /// Identifier used in filenames and result rows.
    pub fn id(&self) -> String {
        format!("{}-{}", self.functional.id(), self.generator_version)
    }
}

fn empirical_quantile(sorted: &[f64], p: f64) -> f64 {
    let n = sorted.len();
    let rank = (p * n as f64).ceil() as usize;
    sorted[rank.clamp(1, n) - 1]
}

/// Empirical `(1 - epsilon)` quantiles with bootstrap standard errors.
pub fn quantile_table(
    samples: &[f64],
    epsilons: &[f64],
    provenance: TableProvenance,
) -> Result<CriticalValueTable, Error> {
    if samples.len() < MIN_TABLE_SAMPLES {
        return Err(Error::InsufficientSamples {
            got: samples.len(),
            need: MIN_TABLE_SAMPLES,
        });
    }
    let mut sorted = samples.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);

    // Bootstrap over resampled ranks: the k-th order statistic of a
    // resample is an original order statistic with binomially distributed
    // rank, so resampling indices suffices.
    let n = sorted.len();
    let b = 64usize;
    let mut rng = RngStream::new(provenance.master_seed ^ 0x9e37_79b9_7f4a_7c15, u64::MAX).rng();
    let mut quantiles = Vec::with_capacity(epsilons.len());
    for &eps in epsilons {
        if !(0.0 < eps && eps < 1.0) {
            return Err(Error::InvalidCalibration(format!("epsilon {eps} out of (0,1)")));
        }
        let value = empirical_quantile(&sorted, 1.0 - eps);
        let mut boots = Vec::with_capacity(b);
        for _ in 0..b {
            let mut resample: Vec<f64> =
                (0..n).map(|_| sorted[rng.random_range(0..n)]).collect();
            let rank = ((1.0 - eps) * n as f64).ceil() as usize;
            let idx = rank.clamp(1, n) - 1;
            let (_, v, _) = resample.select_nth_unstable_by(idx, f64::total_cmp);
            boots.push(*v);
        }
        let mean = boots.iter().sum::<f64>() / b as f64;
        let var = boots.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (b - 1) as f64;
        quantiles.push(QuantileEntry { epsilon: eps, value, bootstrap_se: var.sqrt() });
    }

    Ok(CriticalValueTable {
        functional: provenance.functional,
        quantiles,
        n_paths: provenance.n_paths,
        time_step: provenance.time_step,
        truncation_v: provenance.truncation_v,
        master_seed: provenance.master_seed,
        generator_version: GENERATOR_VERSION.into(),
    })
}

/// Model-side forms of the limit functionals: a Wiener process composed
/// with the law's variance clock and weighted by the test weights. Under
/// the distribution-free reduction these must reproduce the corresponding
/// universal functionals exactly in law; sampling both routes and
/// comparing distributions is the strongest self-check of the weight
/// construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReductionFunctional {
    /// `4 int_mu^inf h f0^3 W(Phi(x))^2 dx`, matching `int_exp`.
    DensityCvm,
    /// `sup_{x>=mu} 2 g f0 |W(Phi(x))|`, matching `sup_exp`.
    DensityKs,
    /// `int_mu^inf H f0 (F0-1)^2 W(Psi(x))^2 dx`, matching `int_exp`.
    CdfCvm,
}

/// One draw of a reduction functional on the law's clock grid.
pub fn draw_reduction(law: &InvariantLaw, kind: ReductionFunctional, stream: RngStream) -> f64 {
    let mut rng = stream.rng();
    let grid = law.grid();
    let step = grid.step();
    let mu = law.mu_index();
    let (clock, hi): (&[f64], usize) = match kind {
        ReductionFunctional::DensityCvm | ReductionFunctional::DensityKs => {
            (law.phi(), law.h_support_end())
        }
        ReductionFunctional::CdfCvm => (law.psi(), law.big_h_support_end()),
    };
    let clock_mu = match kind {
        ReductionFunctional::CdfCvm => law.psi_mu(),
        _ => law.phi_mu(),
    };

    // Wiener value at the median's clock time, then increments along the
    // (increasing) clock.
    let z0: f64 = rng.sample(StandardNormal);
    let mut w = clock_mu.sqrt() * z0;
    let mut prev = clock_mu;

    match kind {
        ReductionFunctional::DensityCvm => {
            let mut acc = 0.0;
            for i in mu..=hi {
                let dv = (clock[i] - prev).max(0.0);
                if dv > 0.0 {
                    let z: f64 = rng.sample(StandardNormal);
                    w += dv.sqrt() * z;
                    prev = clock[i];
                }
                acc += 4.0 * law.weight_h()[i] * law.f0()[i].powi(3) * w * w * step;
            }
            acc
        }
        ReductionFunctional::CdfCvm => {
            let mut acc = 0.0;
            for i in mu..=hi {
                let dv = (clock[i] - prev).max(0.0);
                if dv > 0.0 {
                    let z: f64 = rng.sample(StandardNormal);
                    w += dv.sqrt() * z;
                    prev = clock[i];
                }
                let t = 1.0 - law.cdf()[i];
                acc += law.weight_big_h()[i] * law.f0()[i] * t * t * w * w * step;
            }
            acc
        }
        ReductionFunctional::DensityKs => {
            // include the point at the median itself (v = 1)
            let g_mu = (-1.0f64).exp() / (2.0 * law.f0_at(law.median()) * clock_mu.sqrt());
            let mut sup = 2.0 * g_mu * law.f0_at(law.median()) * w.abs();
            for i in mu..=hi {
                let dv = (clock[i] - prev).max(0.0);
                if dv > 0.0 {
                    let z: f64 = rng.sample(StandardNormal);
                    w += dv.sqrt() * z;
                    prev = clock[i];
                }
                sup = sup.max(2.0 * law.weight_g()[i] * law.f0()[i] * w.abs());
            }
            sup
        }
    }
}

/// Sequential sample of a reduction functional.
pub fn sample_reduction(
    law: &InvariantLaw,
    kind: ReductionFunctional,
    n: usize,
    master_seed: u64,
) -> Vec<f64> {
    (0..n as u64).map(|s| draw_reduction(law, kind, RngStream::new(master_seed, s))).collect()
}

/// Two-sample Kolmogorov–Smirnov distance, used to compare Monte Carlo
/// distributions of statistics against their calibrated limit samples.
pub fn two_sample_ks(a: &[f64], b: &[f64]) -> f64 {
    let mut xa = a.to_vec();
    let mut xb = b.to_vec();
    xa.sort_unstable_by(f64::total_cmp);
    xb.sort_unstable_by(f64::total_cmp);
    let (na, nb) = (xa.len() as f64, xb.len() as f64);
    let mut i = 0usize;
    let mut j = 0usize;
    let mut sup = 0.0f64;
    while i < xa.len() && j < xb.len() {
        let v = xa[i].min(xb[j]);
        while i < xa.len() && xa[i] <= v {
            i += 1;
        }
        while j < xb.len() && xb[j] <= v {
            j += 1;
        }
        sup = sup.max((i as f64 / na - j as f64 / nb).abs());
    }
    sup
}
