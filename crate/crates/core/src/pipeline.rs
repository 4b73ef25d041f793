//! The end-to-end reconstruction pipeline: smooth, sample, spline-fit,
//! resample, score. One curve in, one fidelity report out; batches map the
//! same pure function over many curves.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curve::{canonicalize, CurveError, SpectralCurve, SpectrumType};
use crate::exec::{map_indexed, ExecMode};
use crate::metrics::{self, MetricError, ScoreOptions};
use crate::simplify::{sample_curve, SampleOutcome, SamplingConfig, SamplingError};
use crate::smooth::{sg_smooth, SgConfig, SmoothError};
use crate::spline::{resample_dense, spline_fit, uniform_grid, SplineError};
use crate::synth::GeneratedSample;

pub use crate::metrics::FidelityReport;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Curve(#[from] CurveError),
    #[error(transparent)]
    Smooth(#[from] SmoothError),
    #[error(transparent)]
    Sampling(#[from] SamplingError),
    #[error(transparent)]
    Spline(#[from] SplineError),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

/// Whether the Savitzky-Golay stage runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SmoothingMode {
    /// Smooth unless the spectrum type is stick-style (mass spectra), whose
    /// impulse peaks a least-squares filter would erode.
    Auto,
    On,
    Off,
}

/// How many points the sampler may keep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BudgetSpec {
    /// Autotune epsilon toward `fraction * N` merged points.
    Fraction(f64),
    /// Autotune epsilon toward a fixed merged size.
    Points(usize),
    /// Fixed RDP threshold in unit-square units.
    Epsilon(f64),
}

/// Resampling grid for the reconstruction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridSpec {
    /// The original curve's x values (reconstruction comparable point for
    /// point, as the paired distance requires).
    Original,
    /// K evenly spaced values across the sampled domain.
    Uniform(usize),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub sg: SgConfig,
    pub smoothing: SmoothingMode,
    pub baseline_fraction: f64,
    pub budget: BudgetSpec,
    pub grid: GridSpec,
    pub score: ScoreOptions,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            sg: SgConfig::default(),
            smoothing: SmoothingMode::Auto,
            baseline_fraction: 0.05,
            budget: BudgetSpec::Fraction(0.067),
            grid: GridSpec::Original,
            score: ScoreOptions::default(),
        }
    }
}

/// Everything produced for one curve.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CurveOutcome {
    pub name: String,
    pub n_points: usize,
    pub sample: SampleOutcome,
    pub sampled: SpectralCurve,
    pub reconstructed: SpectralCurve,
    pub report: FidelityReport,
    /// Stage notes: skipped smoothing, canonicalization drops, budget
    /// warnings.
    pub notes: Vec<String>,
}

/// Runs the full pipeline on one curve. `type_hint` lets `SmoothingMode::Auto`
/// bypass the filter for stick-style spectra.
pub fn run_curve(
    original: &SpectralCurve,
    type_hint: Option<SpectrumType>,
    cfg: &PipelineConfig,
) -> Result<CurveOutcome, PipelineError> {
    let mut notes = Vec::new();
    let (c_true, stats) = canonicalize(original)?;
    if stats.dropped_non_finite > 0 || stats.merged_duplicates > 0 {
        notes.push(format!(
            "canonicalized input: {} non-finite dropped, {} duplicate-x merged",
            stats.dropped_non_finite, stats.merged_duplicates
        ));
    }
    let n = c_true.len();

    let smooth_wanted = match cfg.smoothing {
        SmoothingMode::Off => false,
        SmoothingMode::On => true,
        SmoothingMode::Auto => !type_hint.map(|t| t.is_stick_style()).unwrap_or(false),
    };
    let smoothed = if smooth_wanted {
        if n >= cfg.sg.window {
            sg_smooth(&c_true, cfg.sg)?
        } else {
            notes.push(format!(
                "smoothing skipped: {} points < window {}",
                n, cfg.sg.window
            ));
            c_true.clone()
        }
    } else {
        if cfg.smoothing == SmoothingMode::Auto {
            notes.push("smoothing bypassed for stick-style spectrum".into());
        }
        c_true.clone()
    };

    let sampling = match cfg.budget {
        BudgetSpec::Epsilon(e) => SamplingConfig {
            baseline_fraction: cfg.baseline_fraction,
            epsilon: Some(e),
            target_points: None,
        },
        BudgetSpec::Points(k) => SamplingConfig {
            baseline_fraction: cfg.baseline_fraction,
            epsilon: None,
            target_points: Some(k.clamp(2, n)),
        },
        BudgetSpec::Fraction(f) => SamplingConfig {
            baseline_fraction: cfg.baseline_fraction,
            epsilon: None,
            target_points: Some((((f * n as f64).round() as usize).clamp(2, n)).max(2)),
        },
    };
    let mut sample = sample_curve(&smoothed, &sampling)?;
    if let Some(w) = &sample.warning {
        notes.push(w.clone());
    }
    // A C² spline cannot hold a knot spike without ringing into the
    // neighboring spans, so stick-style spectra keep a contiguous guard run
    // of grid points around every impulse. Ringing then decays inside the
    // guard and never lands on an unsampled grid point.
    if type_hint.map(|t| t.is_stick_style()).unwrap_or(false) {
        let guards = impulse_guard_indices(&c_true, 0.02, 8);
        merge_extra_indices(&mut sample, guards, n, "impulse guards", &mut notes);
    }
    // The point of critical-feature sampling is preserving peak summits, but
    // the split point of a segment can land on a flank and bracket a rounded
    // apex without keeping it. Snap every prominent summit of the smoothed
    // curve into the sample.
    let summits = summit_snap_indices(&smoothed, &sample.indices, 0.02);
    merge_extra_indices(&mut sample, summits, n, "summit snap", &mut notes);
    let mut sampled = smoothed.select(&sample.indices);
    sampled.name = format!("{} (sampled)", c_true.name);

    let spline = spline_fit(&sampled)?;
    let scoring_grid: Vec<f64> = c_true.xs().collect();
    let mut rec_for_score = resample_dense(&spline, &scoring_grid)?;
    rec_for_score.name = format!("{} (reconstructed)", c_true.name);
    rec_for_score.x_label = c_true.x_label.clone();
    rec_for_score.y_label = c_true.y_label.clone();

    let reconstructed = match cfg.grid {
        GridSpec::Original => rec_for_score.clone(),
        GridSpec::Uniform(k) => {
            let grid = uniform_grid(&spline, k);
            let mut r = resample_dense(&spline, &grid)?;
            r.name = rec_for_score.name.clone();
            r.x_label = c_true.x_label.clone();
            r.y_label = c_true.y_label.clone();
            r
        }
    };

    let report = metrics::fidelity(&c_true, &rec_for_score, sample.reduction_ratio, &cfg.score)?;
    Ok(CurveOutcome {
        name: c_true.name.clone(),
        n_points: n,
        sample,
        sampled,
        reconstructed,
        report,
        notes,
    })
}

fn merge_extra_indices(
    sample: &mut SampleOutcome,
    extra: Vec<usize>,
    n: usize,
    label: &str,
    notes: &mut Vec<String>,
) {
    if extra.is_empty() {
        return;
    }
    let before = sample.n_out;
    let mut merged: Vec<usize> = sample.indices.iter().chain(extra.iter()).copied().collect();
    merged.sort_unstable();
    merged.dedup();
    if merged.len() != before {
        notes.push(format!("{label} added: {before} -> {} sampled points", merged.len()));
    }
    sample.indices = merged;
    sample.n_out = sample.indices.len();
    sample.reduction_ratio = sample.n_out as f64 / n as f64;
}

/// Summit indices missing from the sample: strict local maxima of the
/// smoothed curve whose prominence inside a local window exceeds
/// `min_prominence` of the y span, with no sampled point within one grid
/// cell.
fn summit_snap_indices(
    smoothed: &SpectralCurve,
    sampled: &[usize],
    min_prominence: f64,
) -> Vec<usize> {
    let ys: Vec<f64> = smoothed.ys().collect();
    let n = ys.len();
    if n < 3 {
        return Vec::new();
    }
    let y_min = ys.iter().copied().fold(f64::INFINITY, f64::min);
    let y_max = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = y_max - y_min;
    if span <= 0.0 {
        return Vec::new();
    }
    let threshold = min_prominence * span;
    let window = (n / 50).max(10);
    let mut out = Vec::new();
    for i in 1..n - 1 {
        if !(ys[i] > ys[i - 1] && ys[i] >= ys[i + 1]) {
            continue;
        }
        let left_min = ys[i.saturating_sub(window)..i].iter().copied().fold(f64::INFINITY, f64::min);
        let right_min = ys[i..(i + window).min(n)].iter().copied().fold(f64::INFINITY, f64::min);
        if ys[i] - left_min.max(right_min) < threshold {
            continue;
        }
        // partition_point gives the insertion slot in the sorted sample.
        let slot = sampled.partition_point(|&s| s < i);
        let near_right = sampled.get(slot).map(|&s| s - i <= 1).unwrap_or(false);
        let near_left = slot > 0 && i - sampled[slot - 1] <= 1;
        if !near_left && !near_right {
            out.push(i);
        }
    }
    out
}

/// Indices within `guard` grid cells of every impulse: a point rising above
/// both neighbors by more than `jump_fraction` of the y span.
fn impulse_guard_indices(curve: &SpectralCurve, jump_fraction: f64, guard: usize) -> Vec<usize> {
    let ys: Vec<f64> = curve.ys().collect();
    let n = ys.len();
    if n < 3 {
        return Vec::new();
    }
    let y_min = ys.iter().copied().fold(f64::INFINITY, f64::min);
    let y_max = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = y_max - y_min;
    if span <= 0.0 {
        return Vec::new();
    }
    let mut keep = vec![false; n];
    for i in 0..n {
        let left = if i > 0 { ys[i - 1] } else { ys[i + 1] };
        let right = if i + 1 < n { ys[i + 1] } else { ys[i - 1] };
        if ys[i] - left.max(right) > jump_fraction * span {
            let lo = i.saturating_sub(guard);
            let hi = (i + guard).min(n - 1);
            for k in keep.iter_mut().take(hi + 1).skip(lo) {
                *k = true;
            }
        }
    }
    keep.iter()
        .enumerate()
        .filter_map(|(i, &k)| k.then_some(i))
        .collect()
}

/// Pipelines every line of a generated sample with its type hint.
pub fn run_generated(
    sample: &GeneratedSample,
    cfg: &PipelineConfig,
) -> Result<Vec<CurveOutcome>, PipelineError> {
    sample
        .curves
        .iter()
        .map(|c| run_curve(c, Some(sample.spec.spectrum_type), cfg))
        .collect()
}

/// Runs the pipeline across a suite, preserving input order.
pub fn run_suite(
    samples: &[GeneratedSample],
    cfg: &PipelineConfig,
    mode: ExecMode,
) -> Vec<Result<Vec<CurveOutcome>, PipelineError>> {
    map_indexed(mode, samples, |_, s| run_generated(s, cfg))
}

/// Suite-level score summary.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AggregateScores {
    pub count: usize,
    pub mean_cd: f64,
    pub mean_hd: f64,
    pub mean_wd: f64,
    pub min_cd: f64,
    pub min_hd: f64,
    pub min_wd: f64,
    pub mean_reduction: f64,
}

impl AggregateScores {
    pub fn from_reports<'a>(reports: impl Iterator<Item = &'a FidelityReport>) -> Option<Self> {
        let mut count = 0usize;
        let (mut sum_cd, mut sum_hd, mut sum_wd, mut sum_r) = (0.0, 0.0, 0.0, 0.0);
        let (mut min_cd, mut min_hd, mut min_wd) = (f64::INFINITY, f64::INFINITY, f64::INFINITY);
        for r in reports {
            count += 1;
            sum_cd += r.score_cd;
            sum_hd += r.score_hd;
            sum_wd += r.score_wd;
            sum_r += r.reduction_ratio;
            min_cd = min_cd.min(r.score_cd);
            min_hd = min_hd.min(r.score_hd);
            min_wd = min_wd.min(r.score_wd);
        }
        if count == 0 {
            return None;
        }
        let n = count as f64;
        Some(AggregateScores {
            count,
            mean_cd: sum_cd / n,
            mean_hd: sum_hd / n,
            mean_wd: sum_wd / n,
            min_cd,
            min_hd,
            min_wd,
            mean_reduction: sum_r / n,
        })
    }
}
