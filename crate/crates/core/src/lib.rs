//! Narrowband and wideband CSI quantizers for uniform-planar-array FD-MIMO.
//!
//! The crate covers the full desk-scale pipeline:
//!
//! * [`channel`] — multi-path UPA channel synthesis, single-tone and
//!   multi-tone, with configurable delay profiles and beam squint.
//! * [`codebooks`] — oversampled DFT codebooks, beam-refinement offset
//!   grids, the analytic effective-channel covariance, and combiner
//!   codebooks packed on an equal-gain phase grid.
//! * [`narrowband`] — sequential N-beam quantization with a generalized
//!   Rayleigh weight, the three-round hierarchical quantizer, the KP and
//!   enhanced-KP baselines, and the MIMO extension.
//! * [`wideband`] — the two-level quantizer over wideband/narrowband
//!   resource blocks.
//! * [`analysis`] — closed-form gain formulas, feedback-bit allocation,
//!   budget accounting, and cross-tone correlation diagnostics.
//! * [`harness`] — seeded, trial-parallel Monte Carlo campaigns with CSV /
//!   JSON-lines export.
//!
//! # Example
//!
//! Quantize one channel draw with the three-round quantizer and check the
//! feedback round trip:
//!
//! ```
//! use csiq::channel::{narrowband_channel, sample_paths, DelayProfile, UpaGeometry};
//! use csiq::codebooks::{analytic_covariance, combiner_codebook, default_phase_levels};
//! use csiq::narrowband::{FeedbackAllocation, NarrowbandQuantizer};
//!
//! let geom = UpaGeometry::new(4, 4, 0.5, 0.5)?;
//! let alloc = FeedbackAllocation::two_family(4, 3, 2)?; // B1, B2, Bc
//! let cov = analytic_covariance(&geom, 2, &[4, 3], 3);
//! let combiners = combiner_codebook(&cov, 2, 2, default_phase_levels(4))?;
//! let quantizer = NarrowbandQuantizer::new(geom, alloc, combiners)?;
//!
//! let paths = sample_paths(3, DelayProfile::Zero, 7);
//! let h = narrowband_channel(&geom, &paths)?;
//! let codeword = quantizer.quantize(&h)?;
//! assert_eq!(codeword.payload.len(), 2 * (4 + 3) + 2 + 1);
//! let rebuilt = quantizer.decode(&codeword.payload)?;
//! assert_eq!(rebuilt.vector, codeword.vector);
//! # Ok::<(), csiq::Error>(())
//! ```

pub mod analysis;
pub mod channel;
pub mod codebooks;
pub mod error;
pub mod feedback;
pub mod harness;
pub mod linalg;
pub mod narrowband;
pub mod search;
pub mod wideband;

pub use error::{Error, Result};

pub use num_complex::Complex64;
