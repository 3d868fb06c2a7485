//! Post-hoc confidence calibration for classifier logits.
//!
//! Fits and applies a single global temperature (TS), one temperature per
//! confidence bin (BTS), and bin-wise temperatures fitted on a validation set
//! whose low-confidence part has been augmented (ABTS). Calibration quality is
//! measured with the expected calibration error and reliability diagrams.
//!
//! Logits are supplied externally; the crate never runs a model. The
//! [`synth`] module generates logits with a known miscalibration so every
//! fitting routine can be checked against ground truth, and [`augment`]
//! produces perturbed validation images for the ABTS workflow.

pub mod augment;
pub mod binning;
pub mod btsfit;
pub mod dataset;
pub mod diagram;
mod error;
pub mod io;
pub mod map;
pub mod metrics;
pub mod pnm;
pub mod scaling;
pub mod sum;
pub mod synth;
pub mod tempfit;

pub use binning::{assign_bin, bins_by_count, bins_confidence_interval, BinMethod, BinSpec};
pub use btsfit::{fit_abts, fit_bts, fit_ts, select_for_augmentation, AugmentationSelection};
pub use dataset::{LogitDataset, Record};
pub use error::{CalibError, Result};
pub use map::{apply_map, CalibrationMap, MethodTag};
pub use metrics::{ece, nll, reliability, ReliabilityBin, ReliabilityReport};
pub use scaling::{predict, scaled_softmax, softmax, Prediction};
pub use synth::{generate, SynthConfig, TemperatureProfile};
pub use tempfit::{fit_temperature, grid_oracle, FitConfig, FitResult};
