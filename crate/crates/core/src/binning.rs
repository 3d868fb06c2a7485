//! Confidence-range partitions: equal-width bins and equal-count bins with a
//! dedicated high-confidence bin.
//!
//! Bin 0 is `[e_0, e_1]` and bin `j ≥ 1` is `(e_j, e_{j+1}]`, so every
//! confidence in `[0, 1]` falls in exactly one bin.

use serde::{Deserialize, Serialize};

use crate::{CalibError, Result};

/// Confidences above this go to the top bin of an equal-count partition.
pub const DEFAULT_HIGH_CONF_THRESHOLD: f64 = 0.999;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum BinMethod {
    ConfidenceInterval,
    /// `requested_bins` is the bin count asked for; merged ties can leave fewer.
    ByCount {
        requested_bins: usize,
        high_conf_threshold: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinSpec {
    edges: Vec<f64>,
    method: BinMethod,
}

impl BinSpec {
    pub fn new(edges: Vec<f64>, method: BinMethod) -> Result<Self> {
        let spec = Self { edges, method };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let e = &self.edges;
        if e.len() < 2 {
            return Err(CalibError::invalid("a bin spec needs at least two edges"));
        }
        if e[0] != 0.0 || e[e.len() - 1] != 1.0 {
            return Err(CalibError::invalid(format!(
                "bin edges must start at 0 and end at 1, got {} .. {}",
                e[0],
                e[e.len() - 1]
            )));
        }
        if let Some(w) = e.windows(2).find(|w| w[0].partial_cmp(&w[1]) != Some(std::cmp::Ordering::Less)) {
            return Err(CalibError::invalid(format!(
                "bin edges must be strictly increasing, found {} then {}",
                w[0], w[1]
            )));
        }
        if let BinMethod::ByCount {
            high_conf_threshold,
            requested_bins,
        } = self.method
        {
            if !(high_conf_threshold > 0.0 && high_conf_threshold < 1.0) {
                return Err(CalibError::invalid(format!(
                    "high-confidence threshold must lie in (0, 1), got {high_conf_threshold}"
                )));
            }
            if requested_bins < 2 {
                return Err(CalibError::invalid("equal-count binning needs at least 2 bins"));
            }
            if !e.contains(&high_conf_threshold) {
                return Err(CalibError::invalid(
                    "equal-count bin edges must include the high-confidence threshold",
                ));
            }
        }
        Ok(())
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn method(&self) -> BinMethod {
        self.method
    }

    pub fn high_conf_threshold(&self) -> Option<f64> {
        match self.method {
            BinMethod::ByCount {
                high_conf_threshold,
                ..
            } => Some(high_conf_threshold),
            BinMethod::ConfidenceInterval => None,
        }
    }

    pub fn n_bins(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn bounds(&self, j: usize) -> (f64, f64) {
        (self.edges[j], self.edges[j + 1])
    }

    pub fn assign(&self, confidence: f64) -> Result<usize> {
        if !(0.0..=1.0).contains(&confidence) {
            return Err(CalibError::invalid(format!(
                "confidence {confidence} is outside [0, 1]"
            )));
        }
        Ok(self.assign_unchecked(confidence))
    }

    #[inline]
    pub(crate) fn assign_unchecked(&self, confidence: f64) -> usize {
        // number of upper edges strictly below the confidence
        self.edges[1..self.edges.len() - 1].partition_point(|&e| e < confidence)
    }
}

pub fn assign_bin(confidence: f64, spec: &BinSpec) -> Result<usize> {
    spec.assign(confidence)
}

/// `n_bins` equal-width bins with edges at `j / n_bins`.
pub fn bins_confidence_interval(n_bins: usize) -> Result<BinSpec> {
    if n_bins < 1 {
        return Err(CalibError::invalid("need at least one bin"));
    }
    let edges = (0..=n_bins).map(|j| j as f64 / n_bins as f64).collect();
    BinSpec::new(edges, BinMethod::ConfidenceInterval)
}

/// Equal-count bins over the validation confidences, with the default 0.999 threshold.
pub fn bins_by_count(confidences: &[f64], n_bins: usize) -> Result<BinSpec> {
    bins_by_count_with_threshold(confidences, n_bins, DEFAULT_HIGH_CONF_THRESHOLD)
}

/// Confidences above `threshold` form the top bin `(threshold, 1]` whatever
/// their number. The rest, sorted, are cut into `n_bins − 1` contiguous groups
/// whose sizes differ by at most one (larger groups first). Each interior edge
/// sits midway between the neighbouring confidences of adjacent groups; when
/// those confidences are equal the two groups are merged, so the result can
/// have fewer than `n_bins` bins.
pub fn bins_by_count_with_threshold(
    confidences: &[f64],
    n_bins: usize,
    threshold: f64,
) -> Result<BinSpec> {
    if n_bins < 2 {
        return Err(CalibError::invalid(format!(
            "equal-count binning needs at least 2 bins, got {n_bins}"
        )));
    }
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(CalibError::invalid(format!(
            "high-confidence threshold must lie in (0, 1), got {threshold}"
        )));
    }
    if let Some(c) = confidences.iter().find(|c| !(0.0..=1.0).contains(*c)) {
        return Err(CalibError::invalid(format!("confidence {c} is outside [0, 1]")));
    }
    let mut below: Vec<f64> = confidences.iter().copied().filter(|&c| c <= threshold).collect();
    if below.len() < n_bins {
        return Err(CalibError::InsufficientSamples {
            have: below.len(),
            need: n_bins,
            threshold,
        });
    }
    below.sort_by(f64::total_cmp);

    let groups = n_bins - 1;
    let base = below.len() / groups;
    let extra = below.len() % groups;
    let mut edges = vec![0.0];
    let mut end = 0;
    for g in 0..groups - 1 {
        end += base + usize::from(g < extra);
        let (left, right) = (below[end - 1], below[end]);
        if left == right {
            continue;
        }
        let mid = left + 0.5 * (right - left);
        let last = *edges.last().expect("edges start with 0");
        if mid > last && mid < threshold {
            edges.push(mid);
        }
    }
    edges.push(threshold);
    edges.push(1.0);
    BinSpec::new(
        edges,
        BinMethod::ByCount {
            requested_bins: n_bins,
            high_conf_threshold: threshold,
        },
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn confidence_interval_edges() {
        assert_eq!(bins_confidence_interval(1).unwrap().edges(), &[0.0, 1.0]);
        assert_eq!(
            bins_confidence_interval(4).unwrap().edges(),
            &[0.0, 0.25, 0.5, 0.75, 1.0]
        );
        let s = bins_confidence_interval(50).unwrap();
        assert_eq!(s.n_bins(), 50);
        assert!(s.high_conf_threshold().is_none());
        assert!(bins_confidence_interval(0).is_err());
    }

    #[test]
    fn by_count_hand_trace() {
        let c = [0.30, 0.40, 0.50, 0.60, 0.70, 0.80, 0.9995, 0.9996];
        let s = bins_by_count(&c, 3).unwrap();
        assert_eq!(s.edges(), &[0.0, 0.55, 0.999, 1.0]);
        assert_eq!(s.high_conf_threshold(), Some(0.999));
        let counts = c.iter().fold([0; 3], |mut acc, &x| {
            acc[s.assign(x).unwrap()] += 1;
            acc
        });
        assert_eq!(counts, [3, 3, 2]);
    }

    #[test]
    fn by_count_needs_samples_below_threshold() {
        let err = bins_by_count(&[0.9995, 0.99999, 1.0], 2).unwrap_err();
        assert!(matches!(err, CalibError::InsufficientSamples { have: 0, need: 2, .. }));
        assert!(err.to_string().contains("reduce the number of bins"));
        assert!(bins_by_count(&[0.5, 0.6], 1).is_err());
    }

    #[test]
    fn by_count_uniform_hundred() {
        let c: Vec<f64> = (0..100).map(|i| 0.9 * (i as f64 + 0.5) / 100.0).collect();
        let s = bins_by_count(&c, 5).unwrap();
        assert_eq!(s.n_bins(), 5);
        let mut counts = vec![0; 5];
        for &x in &c {
            counts[s.assign(x).unwrap()] += 1;
        }
        assert_eq!(counts, vec![25, 25, 25, 25, 0]);
    }

    #[test]
    fn by_count_two_bins_without_high_confidence() {
        let s = bins_by_count(&[0.2, 0.5, 0.7], 2).unwrap();
        assert_eq!(s.edges(), &[0.0, 0.999, 1.0]);
    }

    #[test]
    fn by_count_merges_ties() {
        let c = [0.4, 0.4, 0.4, 0.4, 0.6, 0.7];
        // groups {0.4,0.4} {0.4,0.4} {0.6,0.7}: the first boundary is a tie
        let s = bins_by_count(&c, 4).unwrap();
        assert_eq!(s.edges(), &[0.0, 0.5, 0.999, 1.0]);
        assert_eq!(s.method(), BinMethod::ByCount { requested_bins: 4, high_conf_threshold: 0.999 });
    }

    #[test]
    fn assign_examples() {
        let s = BinSpec::new(
            vec![0.0, 0.55, 0.999, 1.0],
            BinMethod::ByCount { requested_bins: 3, high_conf_threshold: 0.999 },
        )
        .unwrap();
        assert_eq!(assign_bin(0.55, &s).unwrap(), 0);
        assert_eq!(assign_bin(0.0, &s).unwrap(), 0);
        assert_eq!(assign_bin(1.0, &s).unwrap(), 2);
        assert_eq!(assign_bin(0.9991, &s).unwrap(), 2);
        assert!(assign_bin(1.01, &s).is_err());
        assert!(assign_bin(f64::NAN, &s).is_err());
    }

    #[test]
    fn rejects_malformed_specs() {
        let ci = BinMethod::ConfidenceInterval;
        assert!(BinSpec::new(vec![0.0], ci).is_err());
        assert!(BinSpec::new(vec![0.1, 1.0], ci).is_err());
        assert!(BinSpec::new(vec![0.0, 0.5, 0.5, 1.0], ci).is_err());
        let bc = BinMethod::ByCount { requested_bins: 3, high_conf_threshold: 0.999 };
        assert!(BinSpec::new(vec![0.0, 0.5, 1.0], bc).is_err());
    }

    fn confidences() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(
            prop_oneof![
                8 => 0.0f64..=1.0,
                1 => 0.999f64..=1.0,
                1 => (0u32..20).prop_map(|k| k as f64 / 20.0),
            ],
            2..400,
        )
    }

    proptest! {
        #[test]
        fn partition_totality_and_order(c in confidences(), n in 2usize..60, probes in prop::collection::vec(0.0f64..=1.0, 1..50)) {
            let below = c.iter().filter(|&&x| x <= DEFAULT_HIGH_CONF_THRESHOLD).count();
            prop_assume!(below >= n);
            let s = bins_by_count(&c, n).unwrap();
            prop_assert!(s.n_bins() <= n);
            let mut sorted = probes.clone();
            sorted.extend([0.0, 1.0]);
            sorted.sort_by(f64::total_cmp);
            let mut prev = 0;
            for &p in &sorted {
                let j = s.assign(p).unwrap();
                let (lo, hi) = s.bounds(j);
                prop_assert!(p <= hi && (p > lo || j == 0));
                // no other bin matches
                let matches = (0..s.n_bins()).filter(|&k| {
                    let (lo, hi) = s.bounds(k);
                    p <= hi && (p > lo || k == 0)
                }).count();
                prop_assert_eq!(matches, 1);
                prop_assert!(j >= prev);
                prev = j;
            }
        }
    }
}
