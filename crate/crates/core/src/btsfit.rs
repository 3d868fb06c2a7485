//! Fitting TS, BTS and ABTS calibration maps from validation logits.

use std::collections::{HashMap, HashSet};
use std::thread;

use serde::{Deserialize, Serialize};

use crate::binning::{bins_by_count_with_threshold, bins_confidence_interval, BinMethod, BinSpec};
use crate::tempfit::fit_temperature;
use crate::{CalibError, CalibrationMap, FitConfig, LogitDataset, MethodTag, Result};

/// Separator between a source sample ID and the augmentation index, as in `s000042__aug1`.
pub const AUG_SEPARATOR: &str = "__aug";

/// Default confidence below which validation samples are augmented.
pub const DEFAULT_AUG_CUTOFF: f64 = 0.8;

pub fn augmented_id(source: &str, k: usize) -> String {
    format!("{source}{AUG_SEPARATOR}{k}")
}

/// Source ID of an augmented record, or `None` if `id` has no `__aug<k>` suffix.
pub fn source_id(id: &str) -> Option<&str> {
    let (source, k) = id.rsplit_once(AUG_SEPARATOR)?;
    (!source.is_empty() && !k.is_empty() && k.bytes().all(|b| b.is_ascii_digit())).then_some(source)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AugmentationSelection {
    pub cutoff: f64,
    pub selected_ids: Vec<String>,
}

/// One global temperature fitted on the whole validation set.
pub fn fit_ts(validation: &LogitDataset, config: &FitConfig) -> Result<CalibrationMap> {
    let map = fit_bts(validation, &bins_confidence_interval(1)?, config)?;
    Ok(CalibrationMap {
        method: MethodTag::Ts,
        ..map
    })
}

/// One temperature per bin of `spec`, each fitted only on the validation
/// samples whose uncalibrated confidence falls in that bin.
pub fn fit_bts(validation: &LogitDataset, spec: &BinSpec, config: &FitConfig) -> Result<CalibrationMap> {
    config.validate()?;
    spec.validate()?;
    if validation.is_empty() {
        return Err(CalibError::empty("validation set has no samples"));
    }
    let all: Vec<usize> = (0..validation.len()).collect();
    let global = fit_temperature(validation, &all, config)?.temperature;

    let mut members = vec![Vec::new(); spec.n_bins()];
    for (i, c) in validation.raw_confidences().into_iter().enumerate() {
        members[spec.assign_unchecked(c)].push(i);
    }
    let temperatures = fit_bins(validation, &members, global, config)?;
    Ok(CalibrationMap {
        method: MethodTag::Bts,
        spec: spec.clone(),
        temperatures,
        fallback_temperature: global,
        per_bin_counts: members.iter().map(Vec::len).collect(),
        config: *config,
    })
}

fn fit_bins(
    data: &LogitDataset,
    members: &[Vec<usize>],
    fallback: f64,
    config: &FitConfig,
) -> Result<Vec<f64>> {
    let fit_one = |idx: &Vec<usize>| -> Result<f64> {
        if idx.len() < config.min_bin_samples || idx.is_empty() {
            Ok(fallback)
        } else {
            Ok(fit_temperature(data, idx, config)?.temperature)
        }
    };
    let workers = thread::available_parallelism().map_or(1, |n| n.get()).min(members.len());
    if workers <= 1 {
        return members.iter().map(fit_one).collect();
    }
    let chunk = members.len().div_ceil(workers);
    thread::scope(|scope| {
        let handles: Vec<_> = members
            .chunks(chunk)
            .map(|bins| scope.spawn(move || bins.iter().map(fit_one).collect::<Result<Vec<f64>>>()))
            .collect();
        let mut out = Vec::with_capacity(members.len());
        for h in handles {
            out.extend(h.join().expect("bin fit thread panicked")?);
        }
        Ok(out)
    })
}

/// IDs of validation samples with uncalibrated confidence strictly below `cutoff`.
pub fn select_for_augmentation(validation: &LogitDataset, cutoff: f64) -> Result<AugmentationSelection> {
    if !(cutoff > 0.0 && cutoff <= 1.0) {
        return Err(CalibError::InvalidConfig(format!(
            "augmentation cutoff must lie in (0, 1], got {cutoff}"
        )));
    }
    let ids = validation
        .ids()
        .ok_or_else(|| CalibError::invalid("augmentation selection needs sample ids"))?;
    let selected_ids = validation
        .raw_confidences()
        .into_iter()
        .zip(ids)
        .filter(|(c, _)| *c < cutoff)
        .map(|(_, id)| id.clone())
        .collect();
    Ok(AugmentationSelection { cutoff, selected_ids })
}

/// BTS on the validation set joined with augmented copies of the selected samples.
///
/// Augmented records are binned by their own confidence. Equal-count bin
/// edges are rebuilt on the union since augmentation changes the counts.
pub fn fit_abts(
    validation: &LogitDataset,
    augmented: &LogitDataset,
    selection: &AugmentationSelection,
    spec: &BinSpec,
    config: &FitConfig,
) -> Result<CalibrationMap> {
    let union = if augmented.is_empty() {
        validation.clone()
    } else {
        check_augmented(validation, augmented, selection)?;
        validation.concat(augmented)?
    };
    let spec = match spec.method() {
        BinMethod::ConfidenceInterval => spec.clone(),
        BinMethod::ByCount {
            requested_bins,
            high_conf_threshold,
        } => bins_by_count_with_threshold(&union.raw_confidences(), requested_bins, high_conf_threshold)?,
    };
    let map = fit_bts(&union, &spec, config)?;
    Ok(CalibrationMap {
        method: MethodTag::Abts,
        ..map
    })
}

fn check_augmented(
    validation: &LogitDataset,
    augmented: &LogitDataset,
    selection: &AugmentationSelection,
) -> Result<()> {
    if validation.num_classes() != augmented.num_classes() {
        return Err(CalibError::Consistency(format!(
            "validation has {} classes, augmented set has {}",
            validation.num_classes(),
            augmented.num_classes()
        )));
    }
    let val_ids = validation
        .ids()
        .ok_or_else(|| CalibError::Consistency("validation set has no sample ids".into()))?;
    let aug_ids = augmented
        .ids()
        .ok_or_else(|| CalibError::Consistency("augmented set has no sample ids".into()))?;
    let labels: HashMap<&str, usize> = val_ids
        .iter()
        .map(String::as_str)
        .zip(validation.labels().iter().copied())
        .collect();
    let selected: HashSet<&str> = selection.selected_ids.iter().map(String::as_str).collect();

    for (i, id) in aug_ids.iter().enumerate() {
        let row = i + 1;
        let source = source_id(id).ok_or_else(|| {
            CalibError::Consistency(format!(
                "augmented record {row} ({id:?}) lacks a {AUG_SEPARATOR}<k> suffix"
            ))
        })?;
        let Some(&label) = labels.get(source) else {
            return Err(CalibError::Consistency(format!(
                "augmented record {row} ({id:?}) refers to unknown sample {source:?}"
            )));
        };
        if !selected.contains(source) {
            return Err(CalibError::Consistency(format!(
                "augmented record {row} ({id:?}) refers to sample {source:?}, which was not selected for augmentation"
            )));
        }
        if augmented.label(i) != label {
            return Err(CalibError::Consistency(format!(
                "augmented record {row} ({id:?}) has label {} but its source has label {label}",
                augmented.label(i)
            )));
        }
    }
    Ok(())
}
