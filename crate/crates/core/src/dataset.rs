//! Validated collections of logit vectors with labels.

use std::collections::HashSet;

use crate::scaling::{check_logits, predict_unchecked, Prediction};
use crate::{CalibError, Result};

/// Logit vectors for `len()` samples over `num_classes` classes, stored row-major.
///
/// Sample IDs are all-or-nothing: either every record carries a unique ID or
/// none does.
#[derive(Debug, Clone, PartialEq)]
pub struct LogitDataset {
    num_classes: usize,
    logits: Vec<f64>,
    labels: Vec<usize>,
    ids: Option<Vec<String>>,
}

/// Borrowed view of one sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Record<'a> {
    pub id: Option<&'a str>,
    pub label: usize,
    pub logits: &'a [f64],
}

impl LogitDataset {
    pub fn new(
        num_classes: usize,
        logits: Vec<f64>,
        labels: Vec<usize>,
        ids: Option<Vec<String>>,
    ) -> Result<Self> {
        if num_classes < 2 {
            return Err(CalibError::invalid(format!(
                "need at least 2 classes, got {num_classes}"
            )));
        }
        if logits.len() != labels.len() * num_classes {
            return Err(CalibError::invalid(format!(
                "{} logits do not form {} rows of {num_classes}",
                logits.len(),
                labels.len()
            )));
        }
        for (i, row) in logits.chunks_exact(num_classes).enumerate() {
            check_logits(row).map_err(|e| CalibError::invalid(format!("sample {i}: {e}")))?;
        }
        if let Some(i) = labels.iter().position(|&y| y >= num_classes) {
            return Err(CalibError::invalid(format!(
                "sample {i}: label {} is not below {num_classes}",
                labels[i]
            )));
        }
        if let Some(ids) = &ids {
            if ids.len() != labels.len() {
                return Err(CalibError::invalid(format!(
                    "{} ids for {} samples",
                    ids.len(),
                    labels.len()
                )));
            }
            let mut seen = HashSet::with_capacity(ids.len());
            for id in ids {
                if !seen.insert(id.as_str()) {
                    return Err(CalibError::invalid(format!("duplicate sample id {id:?}")));
                }
            }
        }
        Ok(Self {
            num_classes,
            logits,
            labels,
            ids,
        })
    }

    /// Builds a dataset from per-sample rows.
    pub fn from_rows(
        num_classes: usize,
        rows: impl IntoIterator<Item = (Option<String>, usize, Vec<f64>)>,
    ) -> Result<Self> {
        let mut logits = Vec::new();
        let mut labels = Vec::new();
        let mut ids = Vec::new();
        let mut with_id = 0usize;
        for (i, (id, label, z)) in rows.into_iter().enumerate() {
            if z.len() != num_classes {
                return Err(CalibError::invalid(format!(
                    "sample {i}: {} logits, expected {num_classes}",
                    z.len()
                )));
            }
            if id.is_some() {
                with_id += 1;
            }
            ids.push(id);
            labels.push(label);
            logits.extend(z);
        }
        let ids = match with_id {
            0 => None,
            n if n == labels.len() => Some(ids.into_iter().flatten().collect()),
            _ => return Err(CalibError::invalid("either all samples or none must carry an id")),
        };
        Self::new(num_classes, logits, labels, ids)
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn has_ids(&self) -> bool {
        self.ids.is_some()
    }

    pub fn logits(&self, i: usize) -> &[f64] {
        &self.logits[i * self.num_classes..(i + 1) * self.num_classes]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn id(&self, i: usize) -> Option<&str> {
        self.ids.as_ref().map(|ids| ids[i].as_str())
    }

    pub fn ids(&self) -> Option<&[String]> {
        self.ids.as_deref()
    }

    pub fn record(&self, i: usize) -> Record<'_> {
        Record {
            id: self.id(i),
            label: self.labels[i],
            logits: self.logits(i),
        }
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = Record<'_>> + '_ {
        (0..self.len()).map(move |i| self.record(i))
    }

    /// Uncalibrated (t = 1) prediction for every sample.
    pub fn raw_predictions(&self) -> Vec<Prediction> {
        self.logits
            .chunks_exact(self.num_classes)
            .map(|z| predict_unchecked(z, 1.0))
            .collect()
    }

    pub fn raw_confidences(&self) -> Vec<f64> {
        self.raw_predictions().into_iter().map(|p| p.confidence).collect()
    }

    /// Copies the given samples, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        if let Some(&i) = indices.iter().find(|&&i| i >= self.len()) {
            return Err(CalibError::invalid(format!(
                "index {i} out of range for {} samples",
                self.len()
            )));
        }
        let mut logits = Vec::with_capacity(indices.len() * self.num_classes);
        for &i in indices {
            logits.extend_from_slice(self.logits(i));
        }
        Self::new(
            self.num_classes,
            logits,
            indices.iter().map(|&i| self.labels[i]).collect(),
            self.ids
                .as_ref()
                .map(|ids| indices.iter().map(|&i| ids[i].clone()).collect()),
        )
    }

    /// `self` followed by `other`. Both must agree on class count and ID presence.
    pub fn concat(&self, other: &LogitDataset) -> Result<Self> {
        if self.num_classes != other.num_classes {
            return Err(CalibError::Consistency(format!(
                "class counts differ: {} vs {}",
                self.num_classes, other.num_classes
            )));
        }
        let ids = match (&self.ids, &other.ids) {
            (Some(a), Some(b)) => Some(a.iter().chain(b).cloned().collect()),
            (None, None) => None,
            _ => {
                return Err(CalibError::Consistency(
                    "cannot join a dataset with ids to one without".into(),
                ))
            }
        };
        let mut logits = self.logits.clone();
        logits.extend_from_slice(&other.logits);
        let mut labels = self.labels.clone();
        labels.extend_from_slice(&other.labels);
        Self::new(self.num_classes, logits, labels, ids)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validates_records() {
        assert!(LogitDataset::new(3, vec![0.0; 6], vec![0, 2], None).is_ok());
        assert!(LogitDataset::new(3, vec![0.0; 6], vec![0, 3], None).is_err());
        assert!(LogitDataset::new(3, vec![0.0; 5], vec![0, 1], None).is_err());
        assert!(LogitDataset::new(1, vec![0.0; 2], vec![0, 0], None).is_err());
        assert!(LogitDataset::new(2, vec![0.0, f64::NAN], vec![0], None).is_err());
        let dup = Some(vec!["a".to_string(), "a".to_string()]);
        assert!(LogitDataset::new(2, vec![0.0; 4], vec![0, 1], dup).is_err());
    }

    #[test]
    fn from_rows_requires_consistent_ids() {
        let rows = vec![
            (Some("a".to_string()), 0, vec![1.0, 0.0]),
            (None, 1, vec![0.0, 1.0]),
        ];
        assert!(LogitDataset::from_rows(2, rows).is_err());
        let rows = vec![(None, 0, vec![1.0, 0.0, 2.0])];
        assert!(LogitDataset::from_rows(2, rows).is_err());
    }

    #[test]
    fn subset_and_concat() {
        let d = LogitDataset::from_rows(
            2,
            vec![
                (Some("a".into()), 0, vec![1.0, 0.0]),
                (Some("b".into()), 1, vec![0.0, 2.0]),
            ],
        )
        .unwrap();
        let s = d.subset(&[1]).unwrap();
        assert_eq!(s.record(0).id, Some("b"));
        assert_eq!(s.logits(0), &[0.0, 2.0]);
        assert!(d.concat(&d).is_err(), "duplicate ids must be rejected");
        let other = LogitDataset::from_rows(2, vec![(Some("c".into()), 1, vec![0.0, 0.5])]).unwrap();
        let joined = d.concat(&other).unwrap();
        assert_eq!(joined.len(), 3);
        assert_eq!(joined.label(2), 1);
        assert!(d.subset(&[5]).is_err());
    }
}
