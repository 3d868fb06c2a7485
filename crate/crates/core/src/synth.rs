//! Synthetic logits with a known temperature miscalibration.
//!
//! Each sample's logits are i.i.d. normal with standard deviation
//! `logit_scale`, and its label is drawn from `softmax(z / T)`. At `T = 1` the
//! logits are calibrated by construction; for any constant `T` the population
//! NLL minimizer of temperature scaling is exactly `T`.
//!
//! Random numbers come from xoshiro256++ seeded through SplitMix64
//! (`rand_xoshiro::Xoshiro256PlusPlus::seed_from_u64`). A uniform draw is the
//! top 53 bits of one 64-bit output times 2^-53. Normal draws use the
//! Box–Muller transform on uniform pairs `(u1, u2)`:
//! `sqrt(−2 ln(1 − u1)) · (cos 2πu2, sin 2πu2)`, both values consumed in order.
//! Per sample the stream is: `C` normals, then one uniform for the label.

use rand::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};

use crate::scaling::{argmax, predict_unchecked};
use crate::{CalibError, LogitDataset, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TemperatureProfile {
    Constant { temperature: f64 },
    /// `t_low` for samples whose raw confidence is below `cutoff`, `t_high` otherwise.
    Piecewise { cutoff: f64, t_low: f64, t_high: f64 },
}

impl TemperatureProfile {
    pub fn temperature_for(&self, raw_confidence: f64) -> f64 {
        match *self {
            TemperatureProfile::Constant { temperature } => temperature,
            TemperatureProfile::Piecewise { cutoff, t_low, t_high } => {
                if raw_confidence < cutoff {
                    t_low
                } else {
                    t_high
                }
            }
        }
    }
}

impl std::str::FromStr for TemperatureProfile {
    type Err = CalibError;

    /// `const:T` or `piecewise:cutoff,t_low,t_high`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || {
            CalibError::InvalidConfig(format!(
                "invalid profile {s:?}; expected const:T or piecewise:cutoff,t_low,t_high"
            ))
        };
        let (kind, args) = s.split_once(':').ok_or_else(bad)?;
        let nums = args
            .split(',')
            .map(|v| v.trim().parse::<f64>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| bad())?;
        let profile = match (kind, nums.as_slice()) {
            ("const", &[temperature]) => TemperatureProfile::Constant { temperature },
            ("piecewise", &[cutoff, t_low, t_high]) => TemperatureProfile::Piecewise { cutoff, t_low, t_high },
            _ => return Err(bad()),
        };
        profile.validate()?;
        Ok(profile)
    }
}

impl TemperatureProfile {
    pub fn validate(&self) -> Result<()> {
        let positive = |t: f64| t.is_finite() && t > 0.0;
        match *self {
            TemperatureProfile::Constant { temperature } if positive(temperature) => Ok(()),
            TemperatureProfile::Piecewise { cutoff, t_low, t_high }
                if positive(t_low) && positive(t_high) && cutoff > 0.0 && cutoff < 1.0 =>
            {
                Ok(())
            }
            p => Err(CalibError::InvalidConfig(format!(
                "temperatures must be positive and the cutoff in (0, 1): {p:?}"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub n_samples: usize,
    pub n_classes: usize,
    pub logit_scale: f64,
    pub profile: TemperatureProfile,
    pub seed: u64,
}

impl SynthConfig {
    pub const DEFAULT_LOGIT_SCALE: f64 = 4.0;

    pub fn new(n_samples: usize, n_classes: usize, profile: TemperatureProfile, seed: u64) -> Self {
        Self {
            n_samples,
            n_classes,
            logit_scale: Self::DEFAULT_LOGIT_SCALE,
            profile,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_samples < 1 {
            return Err(CalibError::InvalidConfig("n_samples must be at least 1".into()));
        }
        if self.n_classes < 2 {
            return Err(CalibError::InvalidConfig("n_classes must be at least 2".into()));
        }
        if !(self.logit_scale.is_finite() && self.logit_scale > 0.0) {
            return Err(CalibError::InvalidConfig(format!(
                "logit_scale must be positive, got {}",
                self.logit_scale
            )));
        }
        self.profile.validate()
    }
}

/// The documented random stream behind [`generate`].
#[derive(Debug, Clone)]
pub struct SynthRng {
    inner: Xoshiro256PlusPlus,
    spare_normal: Option<f64>,
}

impl SynthRng {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: Xoshiro256PlusPlus::seed_from_u64(seed),
            spare_normal: None,
        }
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn standard_normal(&mut self) -> f64 {
        if let Some(v) = self.spare_normal.take() {
            return v;
        }
        let u1 = self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * (1.0 - u1).ln()).sqrt();
        let theta = std::f64::consts::TAU * u2;
        self.spare_normal = Some(r * theta.sin());
        r * theta.cos()
    }

    /// Index drawn from the categorical distribution `probs` by inverse CDF.
    pub fn categorical(&mut self, probs: &[f64]) -> usize {
        let u = self.uniform();
        let mut cumulative = 0.0;
        for (k, &p) in probs.iter().enumerate() {
            cumulative += p;
            if u < cumulative {
                return k;
            }
        }
        // rounding left u above the final cumulative sum
        probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
    }
}

pub(crate) fn softmax_into(z: &[f64], t: f64, out: &mut Vec<f64>) {
    out.clear();
    let z_max = z[argmax(z)];
    out.extend(z.iter().map(|&v| ((v - z_max) / t).exp()));
    let total: f64 = out.iter().sum();
    for p in out.iter_mut() {
        *p /= total;
    }
}

/// Draws `n_samples` logit vectors with labels; IDs are `s000000`, `s000001`, …
pub fn generate(config: &SynthConfig) -> Result<LogitDataset> {
    config.validate()?;
    let c = config.n_classes;
    let mut rng = SynthRng::new(config.seed);
    let mut logits = Vec::with_capacity(config.n_samples * c);
    let mut labels = Vec::with_capacity(config.n_samples);
    let mut probs = Vec::with_capacity(c);
    for _ in 0..config.n_samples {
        let start = logits.len();
        for _ in 0..c {
            logits.push(config.logit_scale * rng.standard_normal());
        }
        let z = &logits[start..];
        let t = config
            .profile
            .temperature_for(predict_unchecked(z, 1.0).confidence);
        softmax_into(z, t, &mut probs);
        labels.push(rng.categorical(&probs));
    }
    let ids = (0..config.n_samples).map(|i| format!("s{i:06}")).collect();
    LogitDataset::new(c, logits, labels, Some(ids))
}
