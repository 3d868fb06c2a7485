//! Expected calibration error, reliability statistics and negative log likelihood.

use serde::{Deserialize, Serialize};

use crate::binning::bins_confidence_interval;
use crate::scaling::{argmax, check_temperature, shifted_log_partition};
use crate::sum::ExactSum;
use crate::{CalibError, LogitDataset, Result};

/// Evaluation bin count used when none is given.
pub const DEFAULT_ECE_BINS: usize = 15;

/// One equal-width confidence bin. Statistics are `None` when the bin is empty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityBin {
    pub lower: f64,
    pub upper: f64,
    pub count: usize,
    pub accuracy: Option<f64>,
    pub avg_confidence: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityReport {
    pub bins: Vec<ReliabilityBin>,
    pub total_samples: usize,
}

impl ReliabilityReport {
    pub fn ece(&self) -> Result<f64> {
        ece(self)
    }

    pub fn nonempty_bins(&self) -> impl Iterator<Item = &ReliabilityBin> {
        self.bins.iter().filter(|b| b.count > 0)
    }
}

/// Bins `(confidence, is_correct)` pairs into `n_bins` equal-width bins over
/// `[0, 1]` (bin 0 is `[0, 1/N]`, later bins are `(j/N, (j+1)/N]`).
pub fn reliability(predictions: &[(f64, bool)], n_bins: usize) -> Result<ReliabilityReport> {
    if predictions.is_empty() {
        return Err(CalibError::empty("no predictions to bin"));
    }
    let spec = bins_confidence_interval(n_bins)?;
    let k = spec.n_bins();
    let mut counts = vec![0usize; k];
    let mut correct = vec![0usize; k];
    let mut conf_sums = vec![ExactSum::new(); k];
    for &(conf, ok) in predictions {
        let j = spec.assign(conf)?;
        counts[j] += 1;
        correct[j] += ok as usize;
        conf_sums[j].add(conf);
    }
    let bins = (0..k)
        .map(|j| {
            let (lower, upper) = spec.bounds(j);
            let count = counts[j];
            let (accuracy, avg_confidence) = if count == 0 {
                (None, None)
            } else {
                (
                    Some(correct[j] as f64 / count as f64),
                    Some(conf_sums[j].value() / count as f64),
                )
            };
            ReliabilityBin {
                lower,
                upper,
                count,
                accuracy,
                avg_confidence,
            }
        })
        .collect();
    Ok(ReliabilityReport {
        bins,
        total_samples: predictions.len(),
    })
}

/// `(1/n) Σ_j |B_j| · |acc(B_j) − conf(B_j)|`; empty bins contribute nothing.
pub fn ece(report: &ReliabilityReport) -> Result<f64> {
    if report.total_samples == 0 {
        return Err(CalibError::empty("reliability report has no samples"));
    }
    let mut total = ExactSum::new();
    for bin in report.nonempty_bins() {
        let (Some(acc), Some(conf)) = (bin.accuracy, bin.avg_confidence) else {
            continue;
        };
        total.add(bin.count as f64 * (acc - conf).abs());
    }
    Ok(total.value() / report.total_samples as f64)
}

/// `−log softmax(z / t)[label]` evaluated as a log-sum-exp.
#[inline]
pub(crate) fn sample_nll(z: &[f64], label: usize, inv_t: f64) -> f64 {
    let k = argmax(z);
    shifted_log_partition(z, k, inv_t) - (z[label] - z[k]) * inv_t
}

/// Mean `−log softmax(z / t)[label]` over the selected samples (all samples
/// when `subset` is `None`).
pub fn nll(data: &LogitDataset, t: f64, subset: Option<&[usize]>) -> Result<f64> {
    check_temperature(t)?;
    let inv_t = 1.0 / t;
    match subset {
        Some(idx) => {
            check_subset(data, idx)?;
            Ok(mean_nll(data, idx.iter().copied(), idx.len(), inv_t))
        }
        None => {
            if data.is_empty() {
                return Err(CalibError::empty("dataset has no samples"));
            }
            Ok(mean_nll(data, 0..data.len(), data.len(), inv_t))
        }
    }
}

pub(crate) fn check_subset(data: &LogitDataset, idx: &[usize]) -> Result<()> {
    if idx.is_empty() {
        return Err(CalibError::empty("subset has no samples"));
    }
    if let Some(&i) = idx.iter().find(|&&i| i >= data.len()) {
        return Err(CalibError::invalid(format!(
            "subset index {i} out of range for {} samples",
            data.len()
        )));
    }
    Ok(())
}

pub(crate) fn mean_nll(
    data: &LogitDataset,
    idx: impl Iterator<Item = usize>,
    n: usize,
    inv_t: f64,
) -> f64 {
    let mut total = ExactSum::new();
    for i in idx {
        total.add(sample_nll(data.logits(i), data.label(i), inv_t));
    }
    total.value() / n as f64
}

/// NLL of a fixed sample set, laid out for repeated evaluation at many
/// temperatures: per sample, the gaps `z_max − z_k` of the non-max logits and
/// the gap `z_max − z_label`. Evaluates bit-identically to [`nll`].
pub(crate) struct PreparedNll {
    gaps: Vec<f64>,
    label_gaps: Vec<f64>,
    width: usize,
}

impl PreparedNll {
    pub(crate) fn new(data: &LogitDataset, idx: &[usize]) -> Self {
        let width = data.num_classes() - 1;
        let mut gaps = Vec::with_capacity(idx.len() * width);
        let mut label_gaps = Vec::with_capacity(idx.len());
        for &i in idx {
            let z = data.logits(i);
            let k = argmax(z);
            gaps.extend(
                z.iter()
                    .enumerate()
                    .filter(|&(j, _)| j != k)
                    .map(|(_, &v)| v - z[k]),
            );
            label_gaps.push(z[data.label(i)] - z[k]);
        }
        Self {
            gaps,
            label_gaps,
            width,
        }
    }

    pub(crate) fn mean(&self, inv_t: f64) -> f64 {
        let mut total = ExactSum::new();
        for (row, &label_gap) in self.gaps.chunks_exact(self.width).zip(&self.label_gaps) {
            let rest: f64 = row.iter().map(|&g| (g * inv_t).exp()).sum();
            total.add(rest.ln_1p() - label_gap * inv_t);
        }
        total.value() / self.label_gaps.len() as f64
    }
}

/// Mean NLL where sample `i` is scaled by `temperatures[i]`.
pub fn nll_per_sample_temperature(data: &LogitDataset, temperatures: &[f64]) -> Result<f64> {
    if data.is_empty() {
        return Err(CalibError::empty("dataset has no samples"));
    }
    if temperatures.len() != data.len() {
        return Err(CalibError::invalid(format!(
            "{} temperatures for {} samples",
            temperatures.len(),
            data.len()
        )));
    }
    let mut total = ExactSum::new();
    for (i, &t) in temperatures.iter().enumerate() {
        check_temperature(t)?;
        total.add(sample_nll(data.logits(i), data.label(i), 1.0 / t));
    }
    Ok(total.value() / data.len() as f64)
}

/// Fraction of samples whose argmax equals the label.
pub fn accuracy(data: &LogitDataset) -> Result<f64> {
    if data.is_empty() {
        return Err(CalibError::empty("dataset has no samples"));
    }
    let correct = data
        .iter()
        .filter(|r| argmax(r.logits) == r.label)
        .count();
    Ok(correct as f64 / data.len() as f64)
}
