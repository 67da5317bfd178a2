//! Path simulation: reproducible parallel streams, exact stationary
//! initialisation and the Euler–Maruyama scheme.

#![allow(unused_imports)]

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;

use crate::error::Error;
use crate::law::InvariantLaw;
use crate::math::FloatExt;
use crate::model::DiffusionModel;

/// A reproducible random stream: a master seed plus a replication index.
///
/// Streams with the same master seed and different indices are
/// statistically independent (ChaCha stream separation), so replications
/// can run on any number of workers and still reproduce bit-identically.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RngStream {
    pub master_seed: u64,
    pub stream: u64,
}

impl RngStream {
    pub fn new(master_seed: u64, stream: u64) -> Self {
        Self { master_seed, stream }
    }

    /// Fresh generator positioned at the start of this stream.
    pub fn rng(&self) -> ChaCha12Rng {
        let mut rng = ChaCha12Rng::seed_from_u64(self.master_seed);
        rng.set_stream(self.stream);
        rng
    }
}

/// A uniformly time-discretised trajectory with its seed provenance.
#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SamplePath {
    pub dt: f64,
    pub values: Vec<f64>,
    pub master_seed: u64,
    pub stream: u64,
    pub model_label: String,
}

impl SamplePath {
    /// Validates the structural invariants (length, dt, finite values).
    pub fn validate(&self) -> Result<(), Error> {
        if self.values.len() < 2 {
            return Err(Error::InvalidPath(format!("{} samples", self.values.len())));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(Error::InvalidPath(format!("dt = {}", self.dt)));
        }
        if self.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidPath("non-finite value".into()));
        }
        Ok(())
    }

    /// Number of steps `N` (the path holds `N + 1` values).
    #[inline]
    pub fn steps(&self) -> usize {
        self.values.len() - 1
    }

    /// Total horizon `T = N dt`.
    #[inline]
    pub fn horizon(&self) -> f64 {
        self.dt * self.steps() as f64
    }
}

/// One draw from the invariant law by inverse-CDF on the tabulated grid.
pub fn stationary_draw(law: &InvariantLaw, rng: &mut ChaCha12Rng) -> f64 {
    let u: f64 = rng.random();
    law.inverse_cdf(u)
}

/// One draw using a dedicated stream (first uniform of the stream).
pub fn sample_stationary_init(law: &InvariantLaw, stream: RngStream) -> f64 {
    stationary_draw(law, &mut stream.rng())
}

/// Euler–Maruyama path of the model over `[0, T]`, started exactly
/// stationary via inverse-CDF. Deterministic given `(model, T, dt, stream)`.
///
/// Fails with [`Error::BlowupError`] when the path leaves ten times the
/// law's truncated range, which signals a too-coarse `dt` or a
/// non-ergodic model.
pub fn simulate_path(
    model: &DiffusionModel,
    law: &InvariantLaw,
    horizon: f64,
    dt: f64,
    stream: RngStream,
) -> Result<SamplePath, Error> {
    if !(dt > 0.0) || !(horizon >= 100.0 * dt) {
        return Err(Error::InvalidPath(format!(
            "horizon {horizon} must cover at least 100 steps of dt {dt}"
        )));
    }
    let n_steps = (horizon / dt).round() as usize;
    let mid = 0.5 * (law.grid().lower() + law.grid().upper());
    let limit = 10.0 * 0.5 * (law.grid().upper() - law.grid().lower());

    let mut rng = stream.rng();
    let mut values = Vec::with_capacity(n_steps + 1);
    let mut x = stationary_draw(law, &mut rng);
    values.push(x);
    let sqrt_dt = dt.sqrt();
    for k in 0..n_steps {
        let z: f64 = rng.sample(StandardNormal);
        x += model.drift(x) * dt + model.sigma(x) * sqrt_dt * z;
        if !(x - mid).abs().is_finite() || (x - mid).abs() > limit {
            return Err(Error::BlowupError { reached: x, limit, step: k + 1 });
        }
        values.push(x);
    }
    Ok(SamplePath {
        dt,
        values,
        master_seed: stream.master_seed,
        stream: stream.stream,
        model_label: model.label.clone(),
    })
}

/// Euler path driven by caller-provided standard-normal increments,
/// starting from `x0`. Used by coupling checks (same noise, refined dt).
pub fn simulate_with_increments(
    model: &DiffusionModel,
    x0: f64,
    dt: f64,
    increments: &[f64],
    label: &str,
) -> SamplePath {
    let mut values = Vec::with_capacity(increments.len() + 1);
    let mut x = x0;
    values.push(x);
    let sqrt_dt = dt.sqrt();
    for &z in increments {
        x += model.drift(x) * dt + model.sigma(x) * sqrt_dt * z;
        values.push(x);
    }
    SamplePath { dt, values, master_seed: 0, stream: 0, model_label: label.into() }
}
