//! Softmax, temperature-scaled softmax and max-probability prediction.

use serde::{Deserialize, Serialize};

use crate::{CalibError, Result};

/// Predicted class and the probability assigned to it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub predicted_class: usize,
    pub confidence: f64,
}

pub(crate) fn check_logits(z: &[f64]) -> Result<()> {
    if z.len() < 2 {
        return Err(CalibError::invalid(format!(
            "logit vector needs at least 2 entries, got {}",
            z.len()
        )));
    }
    if let Some(i) = z.iter().position(|v| !v.is_finite()) {
        return Err(CalibError::invalid(format!(
            "logit {i} is not finite ({})",
            z[i]
        )));
    }
    Ok(())
}

pub(crate) fn check_temperature(t: f64) -> Result<()> {
    if t.is_finite() && t > 0.0 {
        Ok(())
    } else {
        Err(CalibError::InvalidTemperature(t))
    }
}

/// Index of the largest entry; ties go to the lowest index.
pub(crate) fn argmax(z: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in z.iter().enumerate().skip(1) {
        if v > z[best] {
            best = i;
        }
    }
    best
}

/// `log Σ_k exp(s·(z_k − z_max))`, always in `[0, ln C]`.
///
/// The max term is pulled out and the rest go through `ln_1p`, so tiny
/// runner-up probabilities still register instead of rounding `1 + ε` to 1.
#[inline]
pub(crate) fn shifted_log_partition(z: &[f64], k_max: usize, inv_t: f64) -> f64 {
    let z_max = z[k_max];
    let rest: f64 = z
        .iter()
        .enumerate()
        .filter(|&(k, _)| k != k_max)
        .map(|(_, &v)| ((v - z_max) * inv_t).exp())
        .sum();
    rest.ln_1p()
}

/// Max-probability prediction without allocating the probability vector.
/// Inputs must already be validated.
#[inline]
pub(crate) fn predict_unchecked(z: &[f64], t: f64) -> Prediction {
    let k = argmax(z);
    let z_max = z[k];
    let inv_t = 1.0 / t;
    let partition: f64 = z.iter().map(|&v| ((v - z_max) * inv_t).exp()).sum();
    Prediction {
        predicted_class: k,
        confidence: 1.0 / partition,
    }
}

pub fn softmax(z: &[f64]) -> Result<Vec<f64>> {
    scaled_softmax(z, 1.0)
}

/// `softmax(z / t)`, stabilized by subtracting the maximum logit.
pub fn scaled_softmax(z: &[f64], t: f64) -> Result<Vec<f64>> {
    check_logits(z)?;
    check_temperature(t)?;
    let z_max = z[argmax(z)];
    let inv_t = 1.0 / t;
    let mut p: Vec<f64> = z.iter().map(|&v| ((v - z_max) * inv_t).exp()).collect();
    let total: f64 = p.iter().sum();
    for v in &mut p {
        *v /= total;
    }
    Ok(p)
}

/// Class with the largest logit and its probability under `softmax(z / t)`.
pub fn predict(z: &[f64], t: f64) -> Result<Prediction> {
    check_logits(z)?;
    check_temperature(t)?;
    Ok(predict_unchecked(z, t))
}
