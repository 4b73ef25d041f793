//! Seeded synthetic spectrum generation.
//!
//! Each spectrum type has a versioned parameter profile (`profile_v1`)
//! describing how many peaks it draws, their shapes and widths, the axis
//! range, baseline style, and noise level. Generation is a pure function of
//! the spec: the same `SynthSpec` produces bit-identical curves, and batch
//! randomness derives from `(master seed, sample index)` so serial and
//! parallel runs agree.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curve::{SpectralCurve, SpectrumType, SubplotAnswer};
use crate::exec::{build_indexed, ExecMode};
use crate::wire;

/// Bump when any profile constant changes, so datasets stay citable.
pub const PROFILE_VERSION: &str = "profile_v1";

/// Seed used by the versioned acceptance suite and as the CLI default.
pub const DEFAULT_MASTER_SEED: u64 = 20260811;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("invalid synth spec: {0}")]
    InvalidSpec(String),
    #[error("no accepted batch after {attempts} attempts (last pass rate {last_pass_rate:.3})")]
    ExhaustedRetries { attempts: usize, last_pass_rate: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PeakShape {
    Gaussian,
    Lorentzian,
    PseudoVoigt,
    Stick,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeakSpec {
    pub center: f64,
    pub height: f64,
    /// Shape width parameter; ignored for sticks.
    pub width: f64,
    pub shape: PeakShape,
}

impl PeakSpec {
    fn eval(&self, x: f64) -> f64 {
        let t = x - self.center;
        match self.shape {
            PeakShape::Gaussian => self.height * (-0.5 * (t / self.width).powi(2)).exp(),
            PeakShape::Lorentzian => {
                let w2 = self.width * self.width;
                self.height * w2 / (t * t + w2)
            }
            // Fixed 50/50 Gaussian-Lorentzian mix.
            PeakShape::PseudoVoigt => {
                let w2 = self.width * self.width;
                let lorentz = w2 / (t * t + w2);
                let gauss = (-0.5 * (t / self.width).powi(2)).exp();
                self.height * 0.5 * (lorentz + gauss)
            }
            PeakShape::Stick => 0.0, // applied on-grid, not as a function
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Baseline {
    Flat { level: f64 },
    Linear { start: f64, end: f64 },
    BroadHump { level: f64, height: f64, center: f64, width: f64 },
}

impl Baseline {
    fn eval(&self, x: f64, x_lo: f64, x_hi: f64) -> f64 {
        match *self {
            Baseline::Flat { level } => level,
            Baseline::Linear { start, end } => {
                let t = (x - x_lo) / (x_hi - x_lo);
                start + (end - start) * t
            }
            Baseline::BroadHump { level, height, center, width } => {
                level + height * (-0.5 * ((x - center) / width).powi(2)).exp()
            }
        }
    }
}

/// Generator parameters for one synthetic spectrum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub spectrum_type: SpectrumType,
    pub seed: u64,
    pub n_points: usize,
    pub peaks: Vec<PeakSpec>,
    pub baseline: Baseline,
    pub noise_sigma: f64,
    pub x_range: (f64, f64),
    pub n_lines: usize,
}

impl SynthSpec {
    pub fn validate(&self) -> Result<(), SynthError> {
        if !(800..=3000).contains(&self.n_points) {
            return Err(SynthError::InvalidSpec(format!(
                "n_points {} outside [800, 3000]",
                self.n_points
            )));
        }
        if self.x_range.0 >= self.x_range.1 {
            return Err(SynthError::InvalidSpec("x_range must be increasing".into()));
        }
        if self.n_lines == 0 {
            return Err(SynthError::InvalidSpec("n_lines must be >= 1".into()));
        }
        if self.noise_sigma < 0.0 {
            return Err(SynthError::InvalidSpec("noise_sigma must be >= 0".into()));
        }
        for (i, p) in self.peaks.iter().enumerate() {
            if p.center < self.x_range.0 || p.center > self.x_range.1 {
                return Err(SynthError::InvalidSpec(format!(
                    "peak {i} center {} outside x_range",
                    p.center
                )));
            }
            if p.shape != PeakShape::Stick && p.width <= 0.0 {
                return Err(SynthError::InvalidSpec(format!("peak {i} width must be > 0")));
            }
        }
        Ok(())
    }
}

/// 64-bit mix for deriving independent substream seeds.
pub(crate) fn mix_seed(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Evaluates the spec on its uniform grid, one curve per line.
///
/// Lines share the deterministic signal (baseline plus peaks) and differ by
/// their noise realization, each drawn from a seed derived from
/// `(spec.seed, line index)`.
pub fn gen_spectrum(spec: &SynthSpec) -> Result<Vec<SpectralCurve>, SynthError> {
    spec.validate()?;
    let n = spec.n_points;
    let (lo, hi) = spec.x_range;
    let step = (hi - lo) / (n - 1) as f64;
    let xs: Vec<f64> = (0..n).map(|i| lo + step * i as f64).collect();

    let mut signal: Vec<f64> = xs
        .iter()
        .map(|&x| {
            let mut y = spec.baseline.eval(x, lo, hi);
            for p in &spec.peaks {
                y += p.eval(x);
            }
            y
        })
        .collect();
    for p in &spec.peaks {
        if p.shape == PeakShape::Stick {
            let idx = (((p.center - lo) / step).round() as usize).min(n - 1);
            signal[idx] += p.height;
        }
    }

    let curves = (0..spec.n_lines)
        .map(|line| {
            let ys: Vec<f64> = if spec.noise_sigma > 0.0 {
                let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(spec.seed, line as u64 + 1));
                let noise = Normal::new(0.0, spec.noise_sigma).expect("sigma validated");
                signal.iter().map(|&y| y + noise.sample(&mut rng)).collect()
            } else {
                signal.clone()
            };
            let mut c = SpectralCurve::from_xy(format!("line {}", line + 1), &xs, &ys);
            c.x_label = spec.spectrum_type.x_axis_label().to_string();
            c.y_label = spec.spectrum_type.y_axis_label().to_string();
            c
        })
        .collect();
    Ok(curves)
}

// ---------------------------------------------------------------------------
// Type profiles (profile_v1)
// ---------------------------------------------------------------------------

/// Draws a spec from the type's profile distribution.
pub fn sample_type_profile(spectrum_type: SpectrumType, seed: u64) -> SynthSpec {
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, spectrum_type as u64 + 101));
    let mut spec = match spectrum_type {
        SpectrumType::Ms => ms_profile(&mut rng),
        SpectrumType::UvVis => uvvis_profile(&mut rng),
        SpectrumType::Ir => ir_profile(&mut rng),
        SpectrumType::Raman => raman_profile(&mut rng),
        SpectrumType::Xrd => xrd_profile(&mut rng),
        SpectrumType::Nmr => nmr_profile(&mut rng),
        SpectrumType::Xps => xps_profile(&mut rng),
    };
    spec.seed = mix_seed(seed, 0x5EED);
    spec
}

/// Draws peak centers with a minimum separation so every summit stays a
/// distinct local maximum the sampler can be held to.
fn draw_centers(rng: &mut ChaCha8Rng, count: usize, lo: f64, hi: f64, min_gap: f64) -> Vec<f64> {
    let mut centers: Vec<f64> = Vec::with_capacity(count);
    for _ in 0..count {
        let mut candidate = rng.gen_range(lo..hi);
        for _ in 0..40 {
            if centers.iter().all(|&c| (c - candidate).abs() >= min_gap) {
                break;
            }
            candidate = rng.gen_range(lo..hi);
        }
        centers.push(candidate);
    }
    centers
}

fn ms_profile(rng: &mut ChaCha8Rng) -> SynthSpec {
    let n_sticks = rng.gen_range(5..=12);
    let (lo, hi) = (50.0, 800.0);
    let centers = draw_centers(rng, n_sticks, lo + 10.0, hi - 10.0, 12.0);
    let mut peaks: Vec<PeakSpec> = centers
        .into_iter()
        .map(|center| PeakSpec {
            center,
            height: rng.gen_range(0.05..1.0),
            width: 0.0,
            shape: PeakShape::Stick,
        })
        .collect();
    // Base-peak convention: tallest fragment is 1.0.
    let max_h = peaks.iter().map(|p| p.height).fold(f64::MIN, f64::max);
    for p in &mut peaks {
        p.height /= max_h;
    }
    SynthSpec {
        spectrum_type: SpectrumType::Ms,
        seed: 0,
        n_points: rng.gen_range(2400..=3000),
        peaks,
        baseline: Baseline::Flat { level: 0.0 },
        noise_sigma: 0.0,
        x_range: (lo, hi),
        n_lines: 1,
    }
}

fn uvvis_profile(rng: &mut ChaCha8Rng) -> SynthSpec {
    let n_peaks = rng.gen_range(1..=4);
    let (lo, hi) = (200.0, 800.0);
    let centers = draw_centers(rng, n_peaks, lo + 40.0, hi - 40.0, 70.0);
    let peaks = centers
        .into_iter()
        .map(|center| PeakSpec {
            center,
            height: rng.gen_range(0.2..1.0),
            width: rng.gen_range(15.0..60.0),
            shape: PeakShape::Gaussian,
        })
        .collect();
    let baseline = if rng.gen_bool(0.5) {
        Baseline::Flat { level: rng.gen_range(0.0..0.05) }
    } else {
        Baseline::Linear {
            start: rng.gen_range(0.0..0.08),
            end: rng.gen_range(0.0..0.04),
        }
    };
    SynthSpec {
        spectrum_type: SpectrumType::UvVis,
        seed: 0,
        n_points: rng.gen_range(800..=2000),
        peaks,
        baseline,
        noise_sigma: rng.gen_range(0.001..0.005),
        x_range: (lo, hi),
        n_lines: if rng.gen_bool(0.25) { 2 } else { 1 },
    }
}

fn ir_profile(rng: &mut ChaCha8Rng) -> SynthSpec {
    let n_peaks = rng.gen_range(5..=12);
    let (lo, hi) = (400.0, 4000.0);
    let centers = draw_centers(rng, n_peaks, lo + 80.0, hi - 80.0, 150.0);
    let transmittance = rng.gen_bool(0.5);
    let peaks: Vec<PeakSpec> = centers
        .into_iter()
        .map(|center| {
            let height = rng.gen_range(0.1..0.85);
            PeakSpec {
                center,
                height: if transmittance { -height } else { height },
                width: rng.gen_range(30.0..120.0),
                shape: PeakShape::Lorentzian,
            }
        })
        .collect();
    let baseline = if transmittance {
        Baseline::Flat { level: rng.gen_range(0.92..1.0) }
    } else {
        Baseline::Flat { level: rng.gen_range(0.0..0.05) }
    };
    SynthSpec {
        spectrum_type: SpectrumType::Ir,
        seed: 0,
        n_points: rng.gen_range(2000..=3000),
        peaks,
        baseline,
        noise_sigma: rng.gen_range(0.002..0.006),
        x_range: (lo, hi),
        n_lines: 1,
    }
}

fn raman_profile(rng: &mut ChaCha8Rng) -> SynthSpec {
    let n_peaks = rng.gen_range(3..=10);
    let (lo, hi) = (100.0, 3500.0);
    let centers = draw_centers(rng, n_peaks, lo + 60.0, hi - 60.0, 130.0);
    let peaks = centers
        .into_iter()
        .map(|center| PeakSpec {
            center,
            height: rng.gen_range(0.15..1.0),
            width: rng.gen_range(15.0..80.0),
            shape: PeakShape::Lorentzian,
        })
        .collect();
    // Broad fluorescence background is the Raman signature artifact.
    let baseline = Baseline::BroadHump {
        level: rng.gen_range(0.01..0.05),
        height: rng.gen_range(0.05..0.2),
        center: rng.gen_range(800.0..2800.0),
        width: rng.gen_range(800.0..2000.0),
    };
    SynthSpec {
        spectrum_type: SpectrumType::Raman,
        seed: 0,
        n_points: rng.gen_range(1500..=3000),
        peaks,
        baseline,
        noise_sigma: rng.gen_range(0.002..0.006),
        x_range: (lo, hi),
        n_lines: 1,
    }
}

fn xrd_profile(rng: &mut ChaCha8Rng) -> SynthSpec {
    let n_peaks = rng.gen_range(5..=8);
    let (lo, hi) = (10.0, 80.0);
    let centers = draw_centers(rng, n_peaks, lo + 2.0, hi - 2.0, 2.5);
    let peaks = centers
        .into_iter()
        .map(|center| PeakSpec {
            center,
            height: rng.gen_range(0.1..1.0),
            // Diffraction peaks are narrow; all widths stay below 0.5 degrees.
            width: rng.gen_range(0.18..0.45),
            shape: PeakShape::PseudoVoigt,
        })
        .collect();
    SynthSpec {
        spectrum_type: SpectrumType::Xrd,
        seed: 0,
        n_points: rng.gen_range(2500..=3000),
        peaks,
        baseline: Baseline::Flat { level: rng.gen_range(0.01..0.05) },
        noise_sigma: rng.gen_range(0.002..0.005),
        x_range: (lo, hi),
        n_lines: 1,
    }
}

fn nmr_profile(rng: &mut ChaCha8Rng) -> SynthSpec {
    let n_multiplets = rng.gen_range(2..=6);
    let (lo, hi) = (0.0, 12.0);
    let centers = draw_centers(rng, n_multiplets, lo + 0.5, hi - 0.5, 0.8);
    let mut peaks = Vec::new();
    for center in centers {
        let components = rng.gen_range(1..=3);
        let width = rng.gen_range(0.03..0.08);
        let split = width * rng.gen_range(2.5..4.0);
        let height = rng.gen_range(0.2..1.0);
        for k in 0..components {
            let offset = (k as f64 - (components - 1) as f64 / 2.0) * split;
            peaks.push(PeakSpec {
                center: (center + offset).clamp(lo, hi),
                height: height * (1.0 - 0.25 * (k as f64 - (components - 1) as f64 / 2.0).abs()),
                width,
                shape: PeakShape::Lorentzian,
            });
        }
    }
    SynthSpec {
        spectrum_type: SpectrumType::Nmr,
        seed: 0,
        n_points: rng.gen_range(2400..=3000),
        peaks,
        baseline: Baseline::Flat { level: rng.gen_range(0.0..0.02) },
        noise_sigma: rng.gen_range(0.002..0.005),
        x_range: (lo, hi),
        n_lines: 1,
    }
}

fn xps_profile(rng: &mut ChaCha8Rng) -> SynthSpec {
    let window = rng.gen_range(20.0..40.0);
    let lo = rng.gen_range(100.0..1000.0);
    let hi = lo + window;
    let n_peaks = rng.gen_range(1..=4);
    let centers = draw_centers(rng, n_peaks, lo + window * 0.15, hi - window * 0.15, 2.5);
    let peaks = centers
        .into_iter()
        .map(|center| PeakSpec {
            center,
            height: rng.gen_range(0.2..1.0),
            width: rng.gen_range(0.8..2.5),
            shape: PeakShape::PseudoVoigt,
        })
        .collect();
    SynthSpec {
        spectrum_type: SpectrumType::Xps,
        seed: 0,
        n_points: rng.gen_range(800..=1600),
        peaks,
        // Sloping secondary-electron background.
        baseline: Baseline::Linear {
            start: rng.gen_range(0.05..0.15),
            end: rng.gen_range(0.15..0.35),
        },
        noise_sigma: rng.gen_range(0.002..0.006),
        x_range: (lo, hi),
        n_lines: 1,
    }
}

// ---------------------------------------------------------------------------
// Batch generation with quality control
// ---------------------------------------------------------------------------

/// One generated dataset entry.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeneratedSample {
    pub index: usize,
    pub spec: SynthSpec,
    pub curves: Vec<SpectralCurve>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BatchQcReport {
    pub batch_size: usize,
    pub sampled_fraction: f64,
    pub pass_count: usize,
    pub fail_count: usize,
    pub pass_rate: f64,
    pub accepted: bool,
}

/// Which spectrum types a batch draws from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TypeSelector {
    Single(SpectrumType),
    /// Round-robin across all seven types by sample index.
    All,
}

impl TypeSelector {
    fn type_for(&self, index: usize) -> SpectrumType {
        match self {
            TypeSelector::Single(t) => *t,
            TypeSelector::All => SpectrumType::ALL[index % SpectrumType::ALL.len()],
        }
    }
}

/// Generates one sample of a batch; pure in `(master_seed, index)`.
pub fn generate_sample(master_seed: u64, selector: TypeSelector, index: usize) -> GeneratedSample {
    let spectrum_type = selector.type_for(index);
    let spec = sample_type_profile(spectrum_type, mix_seed(master_seed, index as u64));
    let curves = gen_spectrum(&spec).expect("profile specs are valid by construction");
    GeneratedSample { index, spec, curves }
}

/// Generates `count` samples, spot-checks a random `qc_fraction` subset with
/// the predicate, and accepts the batch only if the pass rate exceeds 95%.
/// Rejected batches are discarded and regenerated with a fresh derived seed,
/// up to `retry_cap` attempts.
pub fn run_batch<F>(
    master_seed: u64,
    selector: TypeSelector,
    count: usize,
    qc_fraction: f64,
    predicate: F,
    retry_cap: usize,
    mode: ExecMode,
) -> Result<(Vec<GeneratedSample>, BatchQcReport), SynthError>
where
    F: Fn(&GeneratedSample) -> bool + Sync,
{
    assert!(count >= 1, "count must be >= 1");
    assert!(qc_fraction > 0.0 && qc_fraction <= 1.0, "qc_fraction must be in (0, 1]");
    let mut last_pass_rate = 0.0;
    for attempt in 0..retry_cap.max(1) {
        let batch_seed = mix_seed(master_seed, 0xBA7C_0000 + attempt as u64);
        let samples = build_indexed(mode, count, |i| generate_sample(batch_seed, selector, i));

        // Deterministic random subset for inspection.
        let mut qc_rng = ChaCha8Rng::seed_from_u64(mix_seed(batch_seed, 0x9C));
        let sample_size = ((qc_fraction * count as f64).ceil() as usize).clamp(1, count);
        let mut indices: Vec<usize> = (0..count).collect();
        for i in 0..sample_size {
            let j = qc_rng.gen_range(i..count);
            indices.swap(i, j);
        }
        let inspected = &indices[..sample_size];

        let pass_count = inspected.iter().filter(|&&i| predicate(&samples[i])).count();
        let fail_count = sample_size - pass_count;
        let pass_rate = pass_count as f64 / sample_size as f64;
        last_pass_rate = pass_rate;
        let accepted = pass_rate > 0.95;
        let report = BatchQcReport {
            batch_size: count,
            sampled_fraction: qc_fraction,
            pass_count,
            fail_count,
            pass_rate,
            accepted,
        };
        if accepted {
            return Ok((samples, report));
        }
    }
    Err(SynthError::ExhaustedRetries {
        attempts: retry_cap.max(1),
        last_pass_rate,
    })
}

/// Default quality-control predicate: every value finite, every peak inside
/// the axis range, and the paired training answer survives a
/// serialize-parse round trip with no warnings.
pub fn default_qc_predicate(sample: &GeneratedSample) -> bool {
    for c in &sample.curves {
        if !c.is_canonical() {
            return false;
        }
    }
    for p in &sample.spec.peaks {
        if p.center < sample.spec.x_range.0 || p.center > sample.spec.x_range.1 {
            return false;
        }
    }
    let record = emit_training_sample(&sample.curves, "A", "img.svg");
    let Ok(record) = record else { return false };
    match wire::parse_answer(&record.conversations[1].value) {
        Ok((answers, diags)) => {
            !answers.is_empty() && answers[0].lines.len() == sample.curves.len() && diags.warnings.is_empty()
        }
        Err(_) => false,
    }
}

// ---------------------------------------------------------------------------
// Training-sample emission
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConversationTurn {
    pub from: String,
    pub value: String,
}

/// One supervised training record: a human turn referencing the figure, the
/// serialized answer as the model turn, and the figure path.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainingRecord {
    pub conversations: Vec<ConversationTurn>,
    pub images: Vec<String>,
}

/// Builds the training record for one subplot. The caller decides which arm
/// the curves represent (full-resolution or pipeline-sampled points).
pub fn emit_training_sample(
    curves: &[SpectralCurve],
    subplot_id: &str,
    image_path: &str,
) -> Result<TrainingRecord, SynthError> {
    let answer = SubplotAnswer::new(subplot_id, curves.to_vec());
    let serialized = wire::serialize_subplot(&answer)
        .map_err(|e| SynthError::InvalidSpec(format!("unserializable curves: {e}")))?;
    Ok(TrainingRecord {
        conversations: vec![
            ConversationTurn {
                from: "human".into(),
                value: format!("<image>Underlying data for subplot {subplot_id}:"),
            },
            ConversationTurn {
                from: "gpt".into(),
                value: serialized,
            },
        ],
        images: vec![image_path.to_string()],
    })
}

// ---------------------------------------------------------------------------
// The versioned fidelity suite
// ---------------------------------------------------------------------------

/// Builds the fixed evaluation suite: `per_type` single-line spectra for each
/// of the seven types, deterministic in the master seed.
pub fn fidelity_suite(master_seed: u64, per_type: usize) -> Vec<GeneratedSample> {
    let mut samples = Vec::with_capacity(per_type * SpectrumType::ALL.len());
    let mut index = 0usize;
    for &spectrum_type in &SpectrumType::ALL {
        for k in 0..per_type {
            let seed = mix_seed(master_seed, (spectrum_type as u64) << 32 | k as u64);
            let mut spec = sample_type_profile(spectrum_type, seed);
            spec.n_lines = 1;
            let curves = gen_spectrum(&spec).expect("profile specs are valid");
            samples.push(GeneratedSample { index, spec, curves });
            index += 1;
        }
    }
    samples
}
