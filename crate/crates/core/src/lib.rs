//! Spectral curve processing and evaluation toolkit.
//!
//! The crate covers the full lifecycle of a high-resolution spectral curve:
//!
//! * [`curve`] — domain types, canonicalization, axis normalization, JSON/CSV io
//! * [`smooth`] — Savitzky–Golay least-squares smoothing
//! * [`simplify`] — uniform baseline sampling plus RDP critical-feature sampling
//! * [`spline`] — natural cubic spline reconstruction of the dense curve
//! * [`svg`] — deterministic vector rendering of curves
//! * [`metrics`] — Chamfer / Hausdorff / paired-Wasserstein distances, normalized
//!   scores, and Hungarian multi-line matching
//! * [`wire`] — tolerant parser and canonical serializer for the
//!   `<subplot>`/`<line>` answer format
//! * [`synth`] — seeded synthetic spectrum generation with batch quality control
//! * [`judge`] — numeric and LLM-judged QA accuracy protocol
//! * [`pipeline`] — smooth → sample → reconstruct → score, single curve or batch
//!
//! All computational types are immutable value data and all operations are pure
//! functions, so batches parallelize freely. Enable the `parallel` feature
//! (default) for a rayon-backed batch executor; without it the same API runs
//! sequentially and produces identical results.

pub mod curve;
pub mod exec;
pub mod prompts;
pub mod judge;
pub mod metrics;
pub mod pipeline;
pub mod simplify;
pub mod smooth;
pub mod spline;
pub mod svg;
pub mod synth;
pub mod wire;

pub use curve::{AxisNormalization, Point, SpectralCurve, SpectrumType, SubplotAnswer};
pub use pipeline::{FidelityReport, PipelineConfig};
