//! Fitted calibration maps and their application to logits.

use serde::{Deserialize, Serialize};

use crate::binning::BinSpec;
use crate::scaling::{check_temperature, predict_unchecked, Prediction};
use crate::{CalibError, FitConfig, LogitDataset, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MethodTag {
    Ts,
    Bts,
    Abts,
}

impl std::fmt::Display for MethodTag {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            MethodTag::Ts => "ts",
            MethodTag::Bts => "bts",
            MethodTag::Abts => "abts",
        })
    }
}

/// A confidence partition with one temperature per bin.
///
/// `per_bin_counts[j]` is the number of validation samples that fell in bin
/// `j`; bins with fewer than `config.min_bin_samples` carry
/// `fallback_temperature` instead of a fitted value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationMap {
    pub method: MethodTag,
    pub spec: BinSpec,
    pub temperatures: Vec<f64>,
    pub fallback_temperature: f64,
    pub per_bin_counts: Vec<usize>,
    pub config: FitConfig,
}

impl CalibrationMap {
    /// Single bin `[0, 1]` scaled by `t`. No validation samples are recorded.
    pub fn identity_with_temperature(t: f64, config: FitConfig) -> Result<Self> {
        let map = Self {
            method: MethodTag::Ts,
            spec: crate::binning::bins_confidence_interval(1)?,
            temperatures: vec![t],
            fallback_temperature: t,
            per_bin_counts: vec![0],
            config,
        };
        map.validate()?;
        Ok(map)
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        self.config.validate()?;
        let k = self.spec.n_bins();
        if self.temperatures.len() != k || self.per_bin_counts.len() != k {
            return Err(CalibError::invalid(format!(
                "{} bins but {} temperatures and {} counts",
                k,
                self.temperatures.len(),
                self.per_bin_counts.len()
            )));
        }
        if self.method == MethodTag::Ts && k != 1 {
            return Err(CalibError::invalid("a ts map must have exactly one bin"));
        }
        for &t in self.temperatures.iter().chain([&self.fallback_temperature]) {
            check_temperature(t)?;
        }
        Ok(())
    }

    pub fn n_bins(&self) -> usize {
        self.spec.n_bins()
    }

    /// Whether bin `j` uses the fallback temperature.
    pub fn is_fallback(&self, j: usize) -> bool {
        self.per_bin_counts[j] < self.config.min_bin_samples
    }

    /// Bin index and temperature for logits whose uncalibrated confidence is `raw_confidence`.
    pub fn lookup(&self, raw_confidence: f64) -> Result<(usize, f64)> {
        let j = self.spec.assign(raw_confidence)?;
        Ok((j, self.temperatures[j]))
    }

    pub fn apply(&self, data: &LogitDataset) -> Vec<Prediction> {
        self.apply_detailed(data).into_iter().map(|a| a.calibrated).collect()
    }

    /// Raw and calibrated predictions plus the bin each sample was routed to.
    pub fn apply_detailed(&self, data: &LogitDataset) -> Vec<AppliedPrediction> {
        (0..data.len())
            .map(|i| {
                let z = data.logits(i);
                let raw = predict_unchecked(z, 1.0);
                let bin = self.spec.assign_unchecked(raw.confidence);
                let temperature = self.temperatures[bin];
                AppliedPrediction {
                    raw,
                    calibrated: predict_unchecked(z, temperature),
                    bin,
                    temperature,
                }
            })
            .collect()
    }

    /// Temperature each sample is scaled by.
    pub fn sample_temperatures(&self, data: &LogitDataset) -> Vec<f64> {
        self.apply_detailed(data).into_iter().map(|a| a.temperature).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AppliedPrediction {
    pub raw: Prediction,
    pub calibrated: Prediction,
    pub bin: usize,
    pub temperature: f64,
}

/// Scales each sample by the temperature of the bin its uncalibrated confidence falls in.
pub fn apply_map(data: &LogitDataset, map: &CalibrationMap) -> Vec<Prediction> {
    map.apply(data)
}
