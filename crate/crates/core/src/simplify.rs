//! Key-point sampling: a uniform baseline pass that guarantees coverage of
//! flat regions, plus Ramer–Douglas–Peucker critical-feature sampling that
//! keeps peak summits and slope changes. The union of both index sets is the
//! sampled curve.
//!
//! RDP runs on unit-square coordinates so the distance threshold has the
//! same meaning whether the x axis spans 70 degrees or 750 m/z.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curve::{fit_unit_square, Point, SpectralCurve};

/// Threshold used when neither epsilon nor a point budget is configured:
/// 0.5% of the unit square, empirically near the ~6.7% retention the
/// pipeline targets on smooth curves.
pub const DEFAULT_EPSILON: f64 = 0.005;

/// Epsilon search span for [`autotune_epsilon`].
const EPSILON_SEARCH_LO: f64 = 1e-6;
const EPSILON_SEARCH_HI: f64 = 1.0;
const EPSILON_SEARCH_ITERS: usize = 40;

#[derive(Debug, Error)]
pub enum SamplingError {
    #[error("invalid sampling config: {0}")]
    InvalidConfig(String),
}

/// Baseline fraction plus either a distance threshold or a point budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingConfig {
    /// Fraction of points kept by the uniform baseline pass.
    pub baseline_fraction: f64,
    /// RDP threshold in unit-square distance.
    pub epsilon: Option<f64>,
    /// Total merged-sample budget; mutually exclusive with `epsilon`.
    pub target_points: Option<usize>,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        SamplingConfig {
            baseline_fraction: 0.05,
            epsilon: None,
            target_points: None,
        }
    }
}

impl SamplingConfig {
    pub fn validate(&self) -> Result<(), SamplingError> {
        if self.baseline_fraction <= 0.0 || self.baseline_fraction > 1.0 {
            return Err(SamplingError::InvalidConfig(format!(
                "baseline_fraction must be in (0, 1], got {}",
                self.baseline_fraction
            )));
        }
        if self.epsilon.is_some() && self.target_points.is_some() {
            return Err(SamplingError::InvalidConfig(
                "epsilon and target_points are mutually exclusive".into(),
            ));
        }
        if let Some(e) = self.epsilon {
            if e <= 0.0 {
                return Err(SamplingError::InvalidConfig(format!("epsilon must be > 0, got {e}")));
            }
        }
        if let Some(t) = self.target_points {
            if t < 2 {
                return Err(SamplingError::InvalidConfig(format!(
                    "target_points must be >= 2, got {t}"
                )));
            }
        }
        Ok(())
    }
}

/// Evenly spaced indices over `[0, N-1]`, always including both endpoints.
///
/// Keeps `k = max(2, ceil(fraction * N))` indices at `round(i*(N-1)/(k-1))`.
pub fn uniform_sample(curve: &SpectralCurve, fraction: f64) -> Vec<usize> {
    let n = curve.len();
    if n <= 1 {
        return (0..n).collect();
    }
    let k = ((fraction * n as f64).ceil() as usize).max(2).min(n);
    let mut indices: Vec<usize> = (0..k)
        .map(|i| ((i as f64) * (n - 1) as f64 / (k - 1) as f64).round() as usize)
        .collect();
    indices.dedup();
    indices
}

/// Perpendicular distance from `p` to the line through `a` and `b`.
/// Falls back to point distance when the chord is degenerate.
pub fn perpendicular_distance(p: Point, a: Point, b: Point) -> f64 {
    let dx = b.x - a.x;
    let dy = b.y - a.y;
    let len = (dx * dx + dy * dy).sqrt();
    if len == 0.0 {
        return p.dist(&a);
    }
    (dx * (p.y - a.y) - dy * (p.x - a.x)).abs() / len
}

/// Indices of the RDP-retained points at threshold `epsilon`.
///
/// Endpoints are always retained. A segment's farthest point is kept when
/// its perpendicular distance to the chord exceeds `epsilon`, splitting the
/// segment; ties keep the lowest index, which makes the result
/// deterministic. The recursion runs on an explicit stack, so pathological
/// inputs (monotone staircases) cannot exhaust the call stack.
pub fn rdp_simplify(curve: &SpectralCurve, epsilon: f64) -> Vec<usize> {
    assert!(epsilon > 0.0, "epsilon must be positive");
    let pts = &curve.points;
    let n = pts.len();
    if n <= 2 {
        return (0..n).collect();
    }
    let mut keep = vec![false; n];
    keep[0] = true;
    keep[n - 1] = true;

    let mut stack = Vec::with_capacity(64);
    stack.push((0usize, n - 1));
    while let Some((lo, hi)) = stack.pop() {
        if hi <= lo + 1 {
            continue;
        }
        let a = pts[lo];
        let b = pts[hi];
        let mut best_idx = lo + 1;
        let mut best_dist = f64::NEG_INFINITY;
        for (i, p) in pts.iter().enumerate().take(hi).skip(lo + 1) {
            let d = perpendicular_distance(*p, a, b);
            if d > best_dist {
                best_dist = d;
                best_idx = i;
            }
        }
        if best_dist > epsilon {
            keep[best_idx] = true;
            stack.push((lo, best_idx));
            stack.push((best_idx, hi));
        }
    }
    keep.iter()
        .enumerate()
        .filter_map(|(i, &k)| k.then_some(i))
        .collect()
}

/// Result of the budgeted epsilon search.
#[derive(Debug, Clone)]
pub struct AutotuneResult {
    pub epsilon: f64,
    /// RDP critical indices at the chosen epsilon.
    pub critical: Vec<usize>,
    /// Size of `baseline ∪ critical` at the chosen epsilon.
    pub merged_len: usize,
    /// Set when even the coarsest epsilon cannot satisfy the budget.
    pub warning: Option<String>,
}

/// Binary-searches epsilon so the merged sample `baseline ∪ RDP(epsilon)` is
/// as large as possible without exceeding `target_points`.
///
/// Relies on `|RDP(epsilon)|` shrinking as epsilon grows. When even the
/// coarsest epsilon exceeds the budget (the baseline alone can be bigger
/// than the target), the critical set degrades to the endpoints and a
/// warning is attached instead of failing.
pub fn autotune_epsilon(
    curve: &SpectralCurve,
    target_points: usize,
    baseline: &[usize],
) -> AutotuneResult {
    let n = curve.len();
    assert!(target_points >= 2, "target_points must be >= 2");
    let merged_size = |critical: &[usize]| merged_indices(baseline, critical).len();

    let fine = rdp_simplify(curve, EPSILON_SEARCH_LO);
    if merged_size(&fine) <= target_points {
        let merged_len = merged_size(&fine);
        return AutotuneResult {
            epsilon: EPSILON_SEARCH_LO,
            critical: fine,
            merged_len,
            warning: None,
        };
    }

    let coarse = rdp_simplify(curve, EPSILON_SEARCH_HI);
    if merged_size(&coarse) > target_points {
        let endpoints = if n >= 2 { vec![0, n - 1] } else { vec![0] };
        let merged_len = merged_size(&endpoints);
        return AutotuneResult {
            epsilon: EPSILON_SEARCH_HI,
            critical: endpoints,
            merged_len,
            warning: Some(format!(
                "point budget {target_points} is below the mandatory sample size {merged_len}; \
                 keeping endpoints only"
            )),
        };
    }

    let mut lo = EPSILON_SEARCH_LO;
    let mut hi = EPSILON_SEARCH_HI;
    for _ in 0..EPSILON_SEARCH_ITERS {
        let mid = 0.5 * (lo + hi);
        let candidate = rdp_simplify(curve, mid);
        if merged_size(&candidate) <= target_points {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let critical = rdp_simplify(curve, hi);
    let merged_len = merged_size(&critical);
    AutotuneResult {
        epsilon: hi,
        critical,
        merged_len,
        warning: None,
    }
}

fn merged_indices(baseline: &[usize], critical: &[usize]) -> Vec<usize> {
    let mut merged: Vec<usize> = baseline.iter().chain(critical.iter()).copied().collect();
    merged.sort_unstable();
    merged.dedup();
    merged
}

/// The sampled curve (points at `baseline ∪ critical`) plus its reduction
/// ratio `R = |sampled| / N`.
pub fn merge_samples(
    curve: &SpectralCurve,
    baseline: &[usize],
    critical: &[usize],
) -> (SpectralCurve, f64) {
    let indices = merged_indices(baseline, critical);
    let ratio = indices.len() as f64 / curve.len() as f64;
    (curve.select(&indices), ratio)
}

/// Everything the batch pipeline needs to know about one sampling run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SampleOutcome {
    pub n_in: usize,
    pub n_out: usize,
    pub reduction_ratio: f64,
    pub epsilon_used: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub warning: Option<String>,
    #[serde(skip)]
    pub indices: Vec<usize>,
}

/// Runs the full sampling stage on a canonical curve in its original
/// coordinates: normalizes to the unit square, draws the uniform baseline,
/// picks the critical set (fixed epsilon or budget-tuned), and merges.
pub fn sample_curve(curve: &SpectralCurve, cfg: &SamplingConfig) -> Result<SampleOutcome, SamplingError> {
    cfg.validate()?;
    let norm = fit_unit_square(curve, curve)
        .map_err(|e| SamplingError::InvalidConfig(e.to_string()))?;
    let unit = norm.apply_curve(curve);

    let baseline = uniform_sample(curve, cfg.baseline_fraction);
    let (epsilon_used, critical, warning) = match (cfg.epsilon, cfg.target_points) {
        (Some(e), None) => (e, rdp_simplify(&unit, e), None),
        (None, Some(target)) => {
            let tuned = autotune_epsilon(&unit, target.min(curve.len()).max(2), &baseline);
            (tuned.epsilon, tuned.critical, tuned.warning)
        }
        (None, None) => (DEFAULT_EPSILON, rdp_simplify(&unit, DEFAULT_EPSILON), None),
        (Some(_), Some(_)) => unreachable!("validated above"),
    };
    let indices = merged_indices(&baseline, &critical);
    Ok(SampleOutcome {
        n_in: curve.len(),
        n_out: indices.len(),
        reduction_ratio: indices.len() as f64 / curve.len() as f64,
        epsilon_used,
        warning,
        indices,
    })
}

#[cfg(test)]
pub(crate) mod reference {
    //! Naive recursive RDP, kept deliberately independent of the
    //! stack-based implementation so it can serve as an oracle.

    use crate::curve::Point;

    fn chord_distance(p: Point, a: Point, b: Point) -> f64 {
        let ux = b.x - a.x;
        let uy = b.y - a.y;
        let norm = (ux * ux + uy * uy).sqrt();
        if norm == 0.0 {
            return ((p.x - a.x).powi(2) + (p.y - a.y).powi(2)).sqrt();
        }
        (ux * (p.y - a.y) - uy * (p.x - a.x)).abs() / norm
    }

    fn recurse(pts: &[Point], lo: usize, hi: usize, epsilon: f64, out: &mut Vec<usize>) {
        if hi <= lo + 1 {
            return;
        }
        let mut best = (lo + 1, f64::NEG_INFINITY);
        for i in lo + 1..hi {
            let d = chord_distance(pts[i], pts[lo], pts[hi]);
            if d > best.1 {
                best = (i, d);
            }
        }
        if best.1 > epsilon {
            recurse(pts, lo, best.0, epsilon, out);
            out.push(best.0);
            recurse(pts, best.0, hi, epsilon, out);
        }
    }

    pub fn rdp_recursive(pts: &[Point], epsilon: f64) -> Vec<usize> {
        if pts.len() <= 2 {
            return (0..pts.len()).collect();
        }
        let mut out = vec![0];
        recurse(pts, 0, pts.len() - 1, epsilon, &mut out);
        out.push(pts.len() - 1);
        out
    }
}
