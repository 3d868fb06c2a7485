//! One-dimensional NLL minimization over the temperature.
//!
//! The search runs on the inverse temperature `s = 1/t`. Logits scaled by `s`
//! are linear in `s` and cross-entropy is convex in the logits, so the mean
//! NLL is convex in `s` and golden-section search finds the global minimum on
//! `[1/t_max, 1/t_min]`. NLL is not convex in `t` itself.

use serde::{Deserialize, Serialize};

use crate::metrics::{check_subset, mean_nll, PreparedNll};
use crate::scaling::check_temperature;
use crate::{CalibError, LogitDataset, Result};

/// Bins with fewer validation samples than this use the global temperature.
pub const DEFAULT_MIN_BIN_SAMPLES: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitConfig {
    pub t_min: f64,
    pub t_max: f64,
    /// Final bracket width on the inverse-temperature axis.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub min_bin_samples: usize,
}

impl Default for FitConfig {
    fn default() -> Self {
        Self {
            t_min: 0.05,
            t_max: 20.0,
            tolerance: 1e-6,
            max_iterations: 200,
            min_bin_samples: DEFAULT_MIN_BIN_SAMPLES,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.t_min.is_finite()
            && self.t_max.is_finite()
            && self.t_min > 0.0
            && self.t_min < self.t_max;
        if !ok {
            return Err(CalibError::InvalidConfig(format!(
                "temperature bounds must satisfy 0 < t_min < t_max, got [{}, {}]",
                self.t_min, self.t_max
            )));
        }
        if !(self.tolerance.is_finite() && self.tolerance > 0.0) {
            return Err(CalibError::InvalidConfig(format!(
                "tolerance must be positive, got {}",
                self.tolerance
            )));
        }
        if self.max_iterations == 0 {
            return Err(CalibError::InvalidConfig("max_iterations must be at least 1".into()));
        }
        Ok(())
    }

    pub fn contains(&self, t: f64) -> bool {
        (self.t_min..=self.t_max).contains(&t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub temperature: f64,
    pub final_nll: f64,
    pub iterations: usize,
    /// The optimum sits within `tolerance` of a bound (on the `s` axis).
    pub clamped: bool,
}

/// Temperature minimizing the mean NLL of `subset`.
pub fn fit_temperature(data: &LogitDataset, subset: &[usize], config: &FitConfig) -> Result<FitResult> {
    config.validate()?;
    check_subset(data, subset)?;
    let prepared = PreparedNll::new(data, subset);
    let objective = |s: f64| prepared.mean(s);

    let lo = 1.0 / config.t_max;
    let hi = 1.0 / config.t_min;
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;

    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = objective(c);
    let mut fd = objective(d);
    let mut iterations = 0;
    while b - a > config.tolerance && iterations < config.max_iterations {
        iterations += 1;
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = objective(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = objective(d);
        }
    }

    let mut best = 0.5 * (a + b);
    let mut best_f = objective(best);
    // Boundary optima: snap onto the bound itself when it is strictly better.
    for bound in [lo, hi] {
        let f = objective(bound);
        if f < best_f {
            best = bound;
            best_f = f;
        }
    }
    let clamped = (best - lo).abs() <= config.tolerance || (hi - best).abs() <= config.tolerance;
    let temperature = (1.0 / best).clamp(config.t_min, config.t_max);
    Ok(FitResult {
        temperature,
        final_nll: best_f,
        iterations,
        clamped,
    })
}

/// Brute-force minimizer: the grid temperature with the lowest NLL, ties to the smallest.
pub fn grid_oracle(data: &LogitDataset, subset: &[usize], grid: &[f64]) -> Result<f64> {
    check_subset(data, subset)?;
    if grid.is_empty() {
        return Err(CalibError::empty("temperature grid is empty"));
    }
    let mut best: Option<(f64, f64)> = None;
    for &t in grid {
        check_temperature(t)?;
        let f = mean_nll(data, subset.iter().copied(), subset.len(), 1.0 / t);
        best = match best {
            Some((bt, bf)) if bf < f || (bf == f && bt <= t) => Some((bt, bf)),
            _ => Some((t, f)),
        };
    }
    Ok(best.map(|(t, _)| t).expect("grid is non-empty"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::nll;

    fn all(d: &LogitDataset) -> Vec<usize> {
        (0..d.len()).collect()
    }

    #[test]
    fn conflicting_labels_push_to_t_max() {
        let d = LogitDataset::new(2, vec![4.0, 0.0, 4.0, 0.0], vec![0, 1], None).unwrap();
        let cfg = FitConfig::default();
        let r = fit_temperature(&d, &all(&d), &cfg).unwrap();
        assert!(r.clamped);
        assert_eq!(r.temperature, cfg.t_max);
    }

    #[test]
    fn confident_correct_sample_pushes_to_t_min() {
        let d = LogitDataset::new(2, vec![4.0, 0.0], vec![0], None).unwrap();
        let cfg = FitConfig::default();
        let r = fit_temperature(&d, &[0], &cfg).unwrap();
        assert!(r.clamped);
        assert_eq!(r.temperature, cfg.t_min);
        assert!(r.iterations <= cfg.max_iterations);
    }

    #[test]
    fn interior_optimum_is_not_clamped() {
        // p(label 0) = 3/4 is matched exactly by softmax([ln 3, 0] / t) at t = 1.
        let z = 3f64.ln();
        let d = LogitDataset::new(2, vec![z, 0.0, z, 0.0, z, 0.0, z, 0.0], vec![0, 0, 0, 1], None)
            .unwrap();
        let r = fit_temperature(&d, &all(&d), &FitConfig::default()).unwrap();
        assert!(!r.clamped);
        assert!((r.temperature - 1.0).abs() < 1e-5, "{}", r.temperature);
        assert!(r.final_nll <= nll(&d, 1.0, None).unwrap() + 1e-12);
    }

    #[test]
    fn empty_subset_is_an_error() {
        let d = LogitDataset::new(2, vec![4.0, 0.0], vec![0], None).unwrap();
        assert!(matches!(
            fit_temperature(&d, &[], &FitConfig::default()),
            Err(CalibError::EmptyInput(_))
        ));
    }

    #[test]
    fn config_validation() {
        let bad = [
            FitConfig { t_min: 0.0, ..Default::default() },
            FitConfig { t_min: 5.0, t_max: 2.0, ..Default::default() },
            FitConfig { tolerance: 0.0, ..Default::default() },
            FitConfig { max_iterations: 0, ..Default::default() },
        ];
        for cfg in bad {
            assert!(matches!(cfg.validate(), Err(CalibError::InvalidConfig(_))));
        }
        assert!(FitConfig::default().validate().is_ok());
    }

    #[test]
    fn grid_oracle_examples() {
        let d = LogitDataset::new(2, vec![4.0, 0.0, 4.0, 0.0], vec![0, 1], None).unwrap();
        assert_eq!(grid_oracle(&d, &[0, 1], &[1.0]).unwrap(), 1.0);
        let grid: Vec<f64> = (1..=500).map(|k| k as f64 * 0.1).collect();
        assert_eq!(grid_oracle(&d, &[0, 1], &grid).unwrap(), 50.0);
        assert!(grid_oracle(&d, &[0, 1], &[]).is_err());
        assert!(grid_oracle(&d, &[], &[1.0]).is_err());
    }

    #[test]
    fn grid_oracle_ties_go_to_smallest() {
        // Zero logits: every temperature gives ln 2.
        let d = LogitDataset::new(2, vec![0.0, 0.0], vec![0], None).unwrap();
        assert_eq!(grid_oracle(&d, &[0], &[3.0, 0.5, 2.0]).unwrap(), 0.5);
    }

    #[test]
    fn deterministic() {
        let z = [2.0, 0.1, -1.0, 0.3, 1.5, 1.4];
        let d = LogitDataset::new(3, z.to_vec(), vec![1, 1], None).unwrap();
        let a = fit_temperature(&d, &[0, 1], &FitConfig::default()).unwrap();
        let b = fit_temperature(&d, &[0, 1], &FitConfig::default()).unwrap();
        assert_eq!(a, b);
    }
}
