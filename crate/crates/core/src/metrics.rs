//! Point-cloud fidelity metrics and multi-line matching.
//!
//! Three distances quantify how well a reconstructed curve tracks the
//! original: Chamfer (average squared nearest-neighbor distance, both
//! directions), Hausdorff (worst-case nearest-neighbor distance), and a
//! paired Wasserstein (mean distance between index-matched points of two
//! equal-length x-sorted sequences). Each distance maps to a normalized
//! score `1 - d / D` with a diameter-based denominator over the joint point
//! set.
//!
//! When a prediction has a different number of lines than the truth, an
//! optimal one-to-one matching (Hungarian algorithm) decides which lines are
//! compared.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curve::{canonicalize, fit_unit_square, Point, SpectralCurve, SubplotAnswer};
use crate::spline;

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("point set `{0}` is empty")]
    EmptySet(&'static str),
    #[error("paired distance needs equal lengths, got {0} and {1}")]
    LengthMismatch(usize, usize),
    #[error("cost matrix entry ({0}, {1}) is not finite")]
    NonFiniteCost(usize, usize),
    #[error("cost matrix must be non-empty and rectangular")]
    BadCostMatrix,
}

/// Which distance a score refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MetricKind {
    Chamfer,
    Hausdorff,
    Wasserstein,
}

impl MetricKind {
    pub const ALL: [MetricKind; 3] = [MetricKind::Chamfer, MetricKind::Hausdorff, MetricKind::Wasserstein];
}

// ---------------------------------------------------------------------------
// Nearest-neighbor kernels
// ---------------------------------------------------------------------------

/// Above this `|a| * |b|` product the grid-bucketed kernel takes over from
/// the exhaustive one.
const EXHAUSTIVE_PAIR_LIMIT: usize = 4000 * 4000;

/// Squared distance from every point of `from` to its nearest neighbor in
/// `to`. Exact for both kernels; the grid kernel is cross-checked against
/// the exhaustive one in tests.
fn nn_sq_dists(from: &[Point], to: &[Point]) -> Vec<f64> {
    if from.len().saturating_mul(to.len()) <= EXHAUSTIVE_PAIR_LIMIT {
        nn_sq_dists_sweep(from, to)
    } else {
        nn_sq_dists_grid(from, to)
    }
}

/// Exhaustive kernel with an x-sorted sweep: candidates are visited outward
/// from the query's x position and the scan stops once the x gap alone
/// exceeds the best distance, which cannot skip the true nearest neighbor.
fn nn_sq_dists_sweep(from: &[Point], to: &[Point]) -> Vec<f64> {
    let mut order: Vec<u32> = (0..to.len() as u32).collect();
    order.sort_by(|&i, &j| to[i as usize].x.total_cmp(&to[j as usize].x));
    let sorted: Vec<Point> = order.iter().map(|&i| to[i as usize]).collect();

    from.iter()
        .map(|p| {
            let start = sorted.partition_point(|q| q.x < p.x);
            let mut best = f64::INFINITY;
            // Walk right.
            for q in &sorted[start..] {
                let dx = q.x - p.x;
                if dx * dx >= best {
                    break;
                }
                best = best.min(p.dist_sq(q));
            }
            // Walk left.
            for q in sorted[..start].iter().rev() {
                let dx = p.x - q.x;
                if dx * dx >= best {
                    break;
                }
                best = best.min(p.dist_sq(q));
            }
            best
        })
        .collect()
}

/// Grid-bucketed kernel for very large sets: buckets `to` on a uniform
/// grid and searches cells ring by ring until no closer cell remains.
fn nn_sq_dists_grid(from: &[Point], to: &[Point]) -> Vec<f64> {
    let mut x_min = f64::INFINITY;
    let mut x_max = f64::NEG_INFINITY;
    let mut y_min = f64::INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    for p in to {
        x_min = x_min.min(p.x);
        x_max = x_max.max(p.x);
        y_min = y_min.min(p.y);
        y_max = y_max.max(p.y);
    }
    let side = ((to.len() as f64).sqrt().ceil() as usize).max(1);
    let w = (x_max - x_min).max(f64::MIN_POSITIVE);
    let h = (y_max - y_min).max(f64::MIN_POSITIVE);
    let cell_w = w / side as f64;
    let cell_h = h / side as f64;
    let cell_of = |p: &Point| -> (usize, usize) {
        let cx = (((p.x - x_min) / cell_w) as usize).min(side - 1);
        let cy = (((p.y - y_min) / cell_h) as usize).min(side - 1);
        (cx, cy)
    };
    let mut buckets: Vec<Vec<u32>> = vec![Vec::new(); side * side];
    for (i, p) in to.iter().enumerate() {
        let (cx, cy) = cell_of(p);
        buckets[cy * side + cx].push(i as u32);
    }
    let min_cell = cell_w.min(cell_h);

    from.iter()
        .map(|p| {
            let cx = (((p.x - x_min) / cell_w) as i64).clamp(0, side as i64 - 1);
            let cy = (((p.y - y_min) / cell_h) as i64).clamp(0, side as i64 - 1);
            let mut best = f64::INFINITY;
            let mut ring = 0i64;
            loop {
                // Any cell in ring r is at least (r-1) * min_cell away from
                // a query inside (or clamped next to) the center cell.
                if ring > 1 {
                    let lower = (ring - 1) as f64 * min_cell;
                    if lower * lower > best && best.is_finite() {
                        break;
                    }
                }
                let mut any_cell = false;
                for dy in -ring..=ring {
                    for dx in -ring..=ring {
                        if dx.abs() != ring && dy.abs() != ring {
                            continue; // interior already visited
                        }
                        let gx = cx + dx;
                        let gy = cy + dy;
                        if gx < 0 || gy < 0 || gx >= side as i64 || gy >= side as i64 {
                            continue;
                        }
                        any_cell = true;
                        for &idx in &buckets[gy as usize * side + gx as usize] {
                            best = best.min(p.dist_sq(&to[idx as usize]));
                        }
                    }
                }
                if !any_cell && ring as usize > 2 * side {
                    break; // grid exhausted
                }
                ring += 1;
            }
            best
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Distances
// ---------------------------------------------------------------------------

/// Symmetric average squared nearest-neighbor distance:
/// `(1/|a|) Σ min ‖p-q‖² + (1/|b|) Σ min ‖q-p‖²`.
pub fn chamfer(a: &[Point], b: &[Point]) -> Result<f64, MetricError> {
    if a.is_empty() {
        return Err(MetricError::EmptySet("a"));
    }
    if b.is_empty() {
        return Err(MetricError::EmptySet("b"));
    }
    let ab: f64 = nn_sq_dists(a, b).iter().sum();
    let ba: f64 = nn_sq_dists(b, a).iter().sum();
    Ok(ab / a.len() as f64 + ba / b.len() as f64)
}

/// Symmetrized worst-case nearest-neighbor distance (unsquared).
pub fn hausdorff(a: &[Point], b: &[Point]) -> Result<f64, MetricError> {
    if a.is_empty() {
        return Err(MetricError::EmptySet("a"));
    }
    if b.is_empty() {
        return Err(MetricError::EmptySet("b"));
    }
    let worst_ab = nn_sq_dists(a, b).into_iter().fold(0.0f64, f64::max);
    let worst_ba = nn_sq_dists(b, a).into_iter().fold(0.0f64, f64::max);
    Ok(worst_ab.max(worst_ba).sqrt())
}

/// Mean Euclidean distance between index-paired points of two equal-length,
/// x-sorted sequences. Equal length is the caller's job: resample the
/// reconstruction on the truth grid first.
pub fn wasserstein_paired(a: &SpectralCurve, b: &SpectralCurve) -> Result<f64, MetricError> {
    if a.is_empty() || b.is_empty() {
        return Err(MetricError::EmptySet(if a.is_empty() { "a" } else { "b" }));
    }
    if a.len() != b.len() {
        return Err(MetricError::LengthMismatch(a.len(), b.len()));
    }
    let total: f64 = a
        .points
        .iter()
        .zip(&b.points)
        .map(|(p, q)| p.dist(q))
        .sum();
    Ok(total / a.len() as f64)
}

// ---------------------------------------------------------------------------
// Normalized scores
// ---------------------------------------------------------------------------

/// Result of normalizing a distance against the joint diameter.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scored {
    pub score: f64,
    /// True when the joint point set had zero diameter (identical
    /// singletons); the score defaults to 1 in that case.
    pub degenerate: bool,
}

/// `1 - d / D` where `D` is the squared diameter of the joint point set for
/// the squared Chamfer distance and the plain diameter for the unsquared
/// Hausdorff and Wasserstein distances. `strict_squared` keeps the squared
/// denominator for all three.
pub fn normalized_score(
    d: f64,
    union: &[Point],
    kind: MetricKind,
    strict_squared: bool,
) -> Result<Scored, MetricError> {
    if union.is_empty() {
        return Err(MetricError::EmptySet("union"));
    }
    let diam_sq = diameter_sq(union);
    if diam_sq == 0.0 {
        return Ok(Scored { score: 1.0, degenerate: true });
    }
    let denom = if strict_squared {
        diam_sq
    } else {
        match kind {
            MetricKind::Chamfer => diam_sq,
            MetricKind::Hausdorff | MetricKind::Wasserstein => diam_sq.sqrt(),
        }
    };
    Ok(Scored { score: 1.0 - d / denom, degenerate: false })
}

/// Max pairwise squared distance. The maximizing pair lies on the convex
/// hull, so only hull vertices are compared.
pub fn diameter_sq(points: &[Point]) -> f64 {
    let hull = convex_hull(points);
    let mut best = 0.0f64;
    for i in 0..hull.len() {
        for j in i + 1..hull.len() {
            best = best.max(hull[i].dist_sq(&hull[j]));
        }
    }
    best
}

/// Andrew monotone chain; collinear points are dropped from the hull, which
/// does not affect the diameter.
fn convex_hull(points: &[Point]) -> Vec<Point> {
    let mut pts: Vec<Point> = points.to_vec();
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup_by(|a, b| a.x == b.x && a.y == b.y);
    if pts.len() <= 2 {
        return pts;
    }
    let cross = |o: Point, a: Point, b: Point| (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x);

    let mut lower: Vec<Point> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<Point> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

// ---------------------------------------------------------------------------
// Hungarian assignment
// ---------------------------------------------------------------------------

/// One-to-one partial matching between predicted and truth lines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LineAssignment {
    /// `(predicted index, truth index, cost)`, sorted by predicted index.
    pub pairs: Vec<(usize, usize, f64)>,
    pub unmatched_pred: Vec<usize>,
    pub unmatched_truth: Vec<usize>,
}

/// Minimum-cost one-to-one matching of size `min(n, m)`.
///
/// Rectangular inputs are padded to a square with a cost exceeding any real
/// entry; padded pairs are discarded from the result. O(n³) shortest
/// augmenting path with potentials.
pub fn hungarian_assign(cost: &[Vec<f64>]) -> Result<LineAssignment, MetricError> {
    let n = cost.len();
    if n == 0 {
        return Err(MetricError::BadCostMatrix);
    }
    let m = cost[0].len();
    if m == 0 || cost.iter().any(|row| row.len() != m) {
        return Err(MetricError::BadCostMatrix);
    }
    let mut max_entry = f64::NEG_INFINITY;
    for (i, row) in cost.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            if !c.is_finite() {
                return Err(MetricError::NonFiniteCost(i, j));
            }
            max_entry = max_entry.max(c);
        }
    }
    let dim = n.max(m);
    let pad = max_entry + 1.0;
    let padded: Vec<Vec<f64>> = (0..dim)
        .map(|i| {
            (0..dim)
                .map(|j| if i < n && j < m { cost[i][j] } else { pad })
                .collect()
        })
        .collect();

    let row_of_col = solve_square(&padded);

    let mut pairs = Vec::new();
    for (col, &row) in row_of_col.iter().enumerate() {
        if row < n && col < m {
            pairs.push((row, col, cost[row][col]));
        }
    }
    pairs.sort_by_key(|&(r, _, _)| r);
    let matched_rows: Vec<usize> = pairs.iter().map(|&(r, _, _)| r).collect();
    let matched_cols: Vec<usize> = pairs.iter().map(|&(_, c, _)| c).collect();
    Ok(LineAssignment {
        unmatched_pred: (0..n).filter(|r| !matched_rows.contains(r)).collect(),
        unmatched_truth: (0..m).filter(|c| !matched_cols.contains(c)).collect(),
        pairs,
    })
}

/// Square assignment via potentials; returns the row matched to each
/// column.
fn solve_square(cost: &[Vec<f64>]) -> Vec<usize> {
    let n = cost.len();
    // 1-based arrays with a virtual column 0.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut matched = vec![0usize; n + 1]; // matched[j] = row (1-based) in column j
    let mut way = vec![0usize; n + 1];

    for i in 1..=n {
        matched[0] = i;
        let mut j0 = 0usize;
        let mut min_slack = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = matched[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if used[j] {
                    continue;
                }
                let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                if cur < min_slack[j] {
                    min_slack[j] = cur;
                    way[j] = j0;
                }
                if min_slack[j] < delta {
                    delta = min_slack[j];
                    j1 = j;
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[matched[j]] += delta;
                    v[j] -= delta;
                } else {
                    min_slack[j] -= delta;
                }
            }
            j0 = j1;
            if matched[j0] == 0 {
                break;
            }
        }
        // Augment along the found path.
        loop {
            let j1 = way[j0];
            matched[j0] = matched[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    (1..=n).map(|j| matched[j] - 1).collect()
}

// ---------------------------------------------------------------------------
// Subplot scoring
// ---------------------------------------------------------------------------

/// Knobs for [`score_subplot`] and the fidelity report.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct ScoreOptions {
    /// Normalize the joint point set to the unit square before measuring.
    pub unit_square: bool,
    /// Keep the squared denominator for all metrics (literal score formula)
    /// instead of the dimension-consistent one.
    pub strict_squared: bool,
    /// Count unmatched truth lines as zero scores instead of excluding them.
    pub penalize_unmatched: bool,
    /// Distance used to build the line-matching cost matrix.
    pub match_metric: MetricKind,
}

impl Default for ScoreOptions {
    fn default() -> Self {
        ScoreOptions {
            unit_square: true,
            strict_squared: false,
            penalize_unmatched: false,
            match_metric: MetricKind::Chamfer,
        }
    }
}

/// Per-pair outcome inside a subplot score.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LineScore {
    pub pred_index: usize,
    pub truth_index: usize,
    pub distance: f64,
    pub score: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubplotScore {
    pub score: f64,
    pub kind: MetricKind,
    pub assignment: LineAssignment,
    pub per_line: Vec<LineScore>,
    pub diagnostics: Vec<String>,
}

fn zero_score(kind: MetricKind, why: &str) -> SubplotScore {
    SubplotScore {
        score: 0.0,
        kind,
        assignment: LineAssignment {
            pairs: vec![],
            unmatched_pred: vec![],
            unmatched_truth: vec![],
        },
        per_line: vec![],
        diagnostics: vec![why.to_string()],
    }
}

/// Scores a predicted subplot against the truth: Hungarian-matches lines on
/// a raw-distance cost matrix in jointly normalized coordinates, scores each
/// matched pair, and averages. Unmatched lines are excluded from the mean
/// (unless `penalize_unmatched`) but reported in the assignment. A
/// prediction with zero usable lines scores 0.
pub fn score_subplot(
    pred: &SubplotAnswer,
    truth: &SubplotAnswer,
    kind: MetricKind,
    opts: &ScoreOptions,
) -> SubplotScore {
    let mut diagnostics = Vec::new();
    let truth_lines: Vec<SpectralCurve> = truth
        .lines
        .iter()
        .filter_map(|l| canonicalize(l).ok().map(|(c, _)| c))
        .collect();
    if truth_lines.is_empty() {
        return zero_score(kind, "truth subplot has no usable lines");
    }
    let mut pred_lines: Vec<SpectralCurve> = Vec::new();
    for (i, l) in pred.lines.iter().enumerate() {
        match canonicalize(l) {
            Ok((c, _)) => pred_lines.push(c),
            Err(_) => diagnostics.push(format!("predicted line {} dropped: no finite points", i + 1)),
        }
    }
    if pred_lines.is_empty() {
        let mut out = zero_score(kind, "prediction has no usable lines");
        out.diagnostics.extend(diagnostics);
        out.assignment.unmatched_truth = (0..truth_lines.len()).collect();
        return out;
    }

    // Joint normalization over every point of both subplots.
    let norm = if opts.unit_square {
        let all_pred = concat_curve(&pred_lines);
        let all_truth = concat_curve(&truth_lines);
        fit_unit_square(&all_pred, &all_truth).expect("non-empty by construction")
    } else {
        crate::curve::AxisNormalization::identity()
    };
    let pred_norm: Vec<Vec<Point>> = pred_lines.iter().map(|c| norm.apply_points(&c.points)).collect();
    let truth_norm: Vec<Vec<Point>> = truth_lines.iter().map(|c| norm.apply_points(&c.points)).collect();

    let cost: Vec<Vec<f64>> = pred_norm
        .iter()
        .map(|p| {
            truth_norm
                .iter()
                .map(|t| match opts.match_metric {
                    MetricKind::Chamfer => chamfer(p, t).unwrap_or(f64::MAX),
                    MetricKind::Hausdorff => hausdorff(p, t).unwrap_or(f64::MAX),
                    // Paired form needs equal lengths; chamfer stands in for
                    // matching purposes.
                    MetricKind::Wasserstein => chamfer(p, t).unwrap_or(f64::MAX),
                })
                .collect()
        })
        .collect();
    let assignment = match hungarian_assign(&cost) {
        Ok(a) => a,
        Err(e) => {
            let mut out = zero_score(kind, &format!("assignment failed: {e}"));
            out.diagnostics.extend(diagnostics);
            return out;
        }
    };

    let mut per_line = Vec::new();
    for &(pi, ti, _) in &assignment.pairs {
        match score_pair(&pred_norm[pi], &truth_norm[ti], kind, opts.strict_squared) {
            Ok((d, s)) => per_line.push(LineScore {
                pred_index: pi,
                truth_index: ti,
                distance: d,
                score: s.score,
            }),
            Err(e) => diagnostics.push(format!("pair ({pi}, {ti}) not scorable: {e}")),
        }
    }
    if per_line.is_empty() {
        let mut out = zero_score(kind, "no matched pair was scorable");
        out.diagnostics.extend(diagnostics);
        out.assignment = assignment;
        return out;
    }
    let total: f64 = per_line.iter().map(|l| l.score).sum();
    let mut count = per_line.len();
    if opts.penalize_unmatched {
        // Unmatched truth lines enter the mean as zero scores.
        count += assignment.unmatched_truth.len();
    }
    SubplotScore {
        score: total / count as f64,
        kind,
        assignment,
        per_line,
        diagnostics,
    }
}

/// Distance and normalized score for one matched line pair in already
/// normalized coordinates.
fn score_pair(
    pred: &[Point],
    truth: &[Point],
    kind: MetricKind,
    strict_squared: bool,
) -> Result<(f64, Scored), MetricError> {
    match kind {
        MetricKind::Chamfer => {
            let d = chamfer(pred, truth)?;
            let union = union_points(pred, truth);
            Ok((d, normalized_score(d, &union, kind, strict_squared)?))
        }
        MetricKind::Hausdorff => {
            let d = hausdorff(pred, truth)?;
            let union = union_points(pred, truth);
            Ok((d, normalized_score(d, &union, kind, strict_squared)?))
        }
        MetricKind::Wasserstein => {
            // Resample the prediction on the truth grid so the index-paired
            // form applies; a short prediction extends with its edge value.
            let truth_curve = SpectralCurve::new("truth", truth.to_vec());
            let resampled = resample_on(pred, truth);
            let pred_curve = SpectralCurve::new("pred", resampled.clone());
            let d = wasserstein_paired(&pred_curve, &truth_curve)?;
            let union = union_points(&resampled, truth);
            Ok((d, normalized_score(d, &union, kind, strict_squared)?))
        }
    }
}

fn resample_on(pred: &[Point], truth: &[Point]) -> Vec<Point> {
    if pred.len() >= 2 {
        let curve = SpectralCurve::new("p", pred.to_vec());
        if let Ok(s) = spline::spline_fit(&curve) {
            return truth
                .iter()
                .map(|t| Point::new(t.x, s.evaluate_clamped(t.x)))
                .collect();
        }
    }
    // Single point or unfittable: constant extension.
    let y = pred.first().map(|p| p.y).unwrap_or(0.0);
    truth.iter().map(|t| Point::new(t.x, y)).collect()
}

fn union_points(a: &[Point], b: &[Point]) -> Vec<Point> {
    a.iter().chain(b.iter()).copied().collect()
}

fn concat_curve(lines: &[SpectralCurve]) -> SpectralCurve {
    SpectralCurve::new(
        "joint",
        lines.iter().flat_map(|l| l.points.iter().copied()).collect(),
    )
}

// ---------------------------------------------------------------------------
// Fidelity report
// ---------------------------------------------------------------------------

/// All three distances and scores for one reconstruction, plus the
/// reduction ratio that produced it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FidelityReport {
    pub d_cd: f64,
    pub d_hd: f64,
    pub d_wd: f64,
    pub score_cd: f64,
    pub score_hd: f64,
    pub score_wd: f64,
    pub reduction_ratio: f64,
    pub diameter_sq: f64,
}

/// Measures a reconstruction against the original curve. Coordinates are
/// jointly normalized to the unit square unless `opts.unit_square` is off;
/// the Wasserstein term requires both curves on the same x grid.
pub fn fidelity(
    original: &SpectralCurve,
    reconstructed: &SpectralCurve,
    reduction_ratio: f64,
    opts: &ScoreOptions,
) -> Result<FidelityReport, MetricError> {
    let norm = if opts.unit_square {
        fit_unit_square(original, reconstructed).map_err(|_| MetricError::EmptySet("original"))?
    } else {
        crate::curve::AxisNormalization::identity()
    };
    let c_true = norm.apply_points(&original.points);
    let c_rec = norm.apply_points(&reconstructed.points);

    let d_cd = chamfer(&c_true, &c_rec)?;
    let d_hd = hausdorff(&c_true, &c_rec)?;
    let d_wd = wasserstein_paired(
        &SpectralCurve::new("t", c_true.clone()),
        &SpectralCurve::new("r", c_rec.clone()),
    )?;

    let union = union_points(&c_true, &c_rec);
    let diameter = diameter_sq(&union);
    let score_cd = normalized_score(d_cd, &union, MetricKind::Chamfer, opts.strict_squared)?.score;
    let score_hd = normalized_score(d_hd, &union, MetricKind::Hausdorff, opts.strict_squared)?.score;
    let score_wd = normalized_score(d_wd, &union, MetricKind::Wasserstein, opts.strict_squared)?.score;

    Ok(FidelityReport {
        d_cd,
        d_hd,
        d_wd,
        score_cd,
        score_hd,
        score_wd,
        reduction_ratio,
        diameter_sq: diameter,
    })
}


#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_points(rng: &mut ChaCha8Rng, n: usize) -> Vec<Point> {
        (0..n)
            .map(|_| Point::new(rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0)))
            .collect()
    }

    #[test]
    fn chamfer_identity_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_points(&mut rng, 30);
        assert_eq!(chamfer(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn chamfer_single_pair_arithmetic() {
        let a = [Point::new(0.0, 0.0)];
        let b = [Point::new(1.0, 0.0)];
        assert!((chamfer(&a, &b).unwrap() - 2.0).abs() < 1e-15);
    }

    #[test]
    fn chamfer_matches_double_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        for _ in 0..50 {
            let (na, nb) = (rng.gen_range(1..=60), rng.gen_range(1..=60));
            let a = random_points(&mut rng, na);
            let b = random_points(&mut rng, nb);
            let got = chamfer(&a, &b).unwrap();
            let want = oracle::chamfer_double_loop(&a, &b);
            assert!((got - want).abs() < 1e-12, "{got} vs {want}");
        }
    }

    #[test]
    fn hausdorff_directed_max() {
        let a = [Point::new(0.0, 0.0), Point::new(1.0, 0.0)];
        let b = [Point::new(0.0, 0.0)];
        assert!((hausdorff(&a, &b).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn hausdorff_matches_double_loop_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let (na, nb) = (rng.gen_range(1..=60), rng.gen_range(1..=60));
            let a = random_points(&mut rng, na);
            let b = random_points(&mut rng, nb);
            let got = hausdorff(&a, &b).unwrap();
            let want = oracle::hausdorff_double_loop(&a, &b);
            assert_eq!(got, want);
        }
    }

    #[test]
    fn distances_are_symmetric_and_zero_iff_equal_sets() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let a = random_points(&mut rng, 25);
        let mut shuffled = a.clone();
        shuffled.reverse();
        shuffled.push(a[0]); // duplicates do not change the set
        assert_eq!(chamfer(&a, &shuffled).unwrap(), 0.0);
        assert_eq!(hausdorff(&a, &shuffled).unwrap(), 0.0);

        let b = random_points(&mut rng, 25);
        assert_eq!(chamfer(&a, &b).unwrap(), chamfer(&b, &a).unwrap());
        assert_eq!(hausdorff(&a, &b).unwrap(), hausdorff(&b, &a).unwrap());
        assert!(chamfer(&a, &b).unwrap() > 0.0);
        assert!(hausdorff(&a, &b).unwrap() > 0.0);
    }

    #[test]
    fn hausdorff_triangle_inequality() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..40 {
            let (na, nb, nc) = (rng.gen_range(1..=60), rng.gen_range(1..=60), rng.gen_range(1..=60));
            let a = random_points(&mut rng, na);
            let b = random_points(&mut rng, nb);
            let c = random_points(&mut rng, nc);
            let ab = hausdorff(&a, &b).unwrap();
            let bc = hausdorff(&b, &c).unwrap();
            let ac = hausdorff(&a, &c).unwrap();
            assert!(ac <= ab + bc + 1e-12);
        }
    }

    #[test]
    fn grid_kernel_agrees_with_sweep() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..10 {
            let (na, nb) = (rng.gen_range(50..400), rng.gen_range(50..400));
            let a = random_points(&mut rng, na);
            let b = random_points(&mut rng, nb);
            let sweep = nn_sq_dists_sweep(&a, &b);
            let grid = nn_sq_dists_grid(&a, &b);
            for (s, g) in sweep.iter().zip(&grid) {
                assert!((s - g).abs() <= 1e-9, "{s} vs {g}");
            }
        }
    }

    #[test]
    fn wasserstein_shift_is_exact() {
        let xs: Vec<f64> = (0..40).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| (x * 0.3).sin()).collect();
        let a = SpectralCurve::from_xy("a", &xs, &ys);
        let shifted: Vec<f64> = ys.iter().map(|y| y + 0.25).collect();
        let b = SpectralCurve::from_xy("b", &xs, &shifted);
        assert!((wasserstein_paired(&a, &b).unwrap() - 0.25).abs() < 1e-12);
        assert_eq!(wasserstein_paired(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn wasserstein_matches_literal_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let n = 7;
        let xs: Vec<f64> = (0..n).map(|i| i as f64).collect();
        let ya: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let yb: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let a = SpectralCurve::from_xy("a", &xs, &ya);
        let b = SpectralCurve::from_xy("b", &xs, &yb);
        let direct: f64 = (0..n).map(|i| (ya[i] - yb[i]).abs()).sum::<f64>() / n as f64;
        assert!((wasserstein_paired(&a, &b).unwrap() - direct).abs() < 1e-12);
    }

    #[test]
    fn wasserstein_length_mismatch_rejected() {
        let a = SpectralCurve::from_xy("a", &[0.0, 1.0], &[0.0, 0.0]);
        let b = SpectralCurve::from_xy("b", &[0.0, 1.0, 2.0], &[0.0, 0.0, 0.0]);
        assert!(matches!(
            wasserstein_paired(&a, &b),
            Err(MetricError::LengthMismatch(2, 3))
        ));
    }

    #[test]
    fn score_endpoints() {
        let union = [Point::new(0.0, 0.0), Point::new(1.0, 0.0)];
        let zero = normalized_score(0.0, &union, MetricKind::Chamfer, false).unwrap();
        assert_eq!(zero.score, 1.0);
        let full = normalized_score(1.0, &union, MetricKind::Chamfer, false).unwrap();
        assert_eq!(full.score, 0.0);
    }

    #[test]
    fn score_denominator_dimension_rule() {
        // Diameter 2 -> squared 4. Chamfer divides by 4, the unsquared
        // metrics divide by 2; strict mode divides everything by 4.
        let union = [Point::new(0.0, 0.0), Point::new(2.0, 0.0)];
        let cd = normalized_score(1.0, &union, MetricKind::Chamfer, false).unwrap();
        assert!((cd.score - 0.75).abs() < 1e-15);
        let hd = normalized_score(1.0, &union, MetricKind::Hausdorff, false).unwrap();
        assert!((hd.score - 0.5).abs() < 1e-15);
        let hd_strict = normalized_score(1.0, &union, MetricKind::Hausdorff, true).unwrap();
        assert!((hd_strict.score - 0.75).abs() < 1e-15);
    }

    #[test]
    fn degenerate_union_scores_one() {
        let union = [Point::new(3.0, 3.0), Point::new(3.0, 3.0)];
        let s = normalized_score(0.0, &union, MetricKind::Hausdorff, false).unwrap();
        assert!(s.degenerate);
        assert_eq!(s.score, 1.0);
    }

    #[test]
    fn diameter_matches_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..40 {
            let n = rng.gen_range(1..=120);
            let pts = random_points(&mut rng, n);
            assert_eq!(diameter_sq(&pts), oracle::diameter_sq_double_loop(&pts));
        }
    }

    #[test]
    fn diameter_collinear() {
        let pts: Vec<Point> = (0..10).map(|i| Point::new(i as f64, 2.0 * i as f64)).collect();
        assert_eq!(diameter_sq(&pts), oracle::diameter_sq_double_loop(&pts));
    }

    #[test]
    fn translation_and_scale_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = random_points(&mut rng, 40);
        let b = random_points(&mut rng, 35);
        let shift = |pts: &[Point]| -> Vec<Point> {
            pts.iter().map(|p| Point::new(p.x + 11.5, p.y - 3.25)).collect()
        };
        let d1 = chamfer(&a, &b).unwrap();
        let d2 = chamfer(&shift(&a), &shift(&b)).unwrap();
        assert!((d1 - d2).abs() < 1e-9);
        let h1 = hausdorff(&a, &b).unwrap();
        let h2 = hausdorff(&shift(&a), &shift(&b)).unwrap();
        assert!((h1 - h2).abs() < 1e-9);

        // Uniform scaling leaves the normalized score unchanged: the
        // diameter scales in lockstep with the distance.
        let scale = |pts: &[Point], k: f64| -> Vec<Point> {
            pts.iter().map(|p| Point::new(p.x * k, p.y * k)).collect()
        };
        let union1 = [a.clone(), b.clone()].concat();
        let s1 = normalized_score(hausdorff(&a, &b).unwrap(), &union1, MetricKind::Hausdorff, false)
            .unwrap()
            .score;
        let (a3, b3) = (scale(&a, 7.0), scale(&b, 7.0));
        let union3 = [a3.clone(), b3.clone()].concat();
        let s3 = normalized_score(hausdorff(&a3, &b3).unwrap(), &union3, MetricKind::Hausdorff, false)
            .unwrap()
            .score;
        assert!((s1 - s3).abs() < 1e-9);
    }

    #[test]
    fn hungarian_two_by_two() {
        let a = hungarian_assign(&[vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        assert_eq!(a.pairs, vec![(0, 0, 1.0), (1, 1, 1.0)]);
        assert!(a.unmatched_pred.is_empty());
        assert!(a.unmatched_truth.is_empty());
    }

    #[test]
    fn hungarian_rectangular_row_minimum() {
        let a = hungarian_assign(&[vec![5.0, 1.0, 3.0]]).unwrap();
        assert_eq!(a.pairs, vec![(0, 1, 1.0)]);
        assert_eq!(a.unmatched_truth, vec![0, 2]);
    }

    #[test]
    fn hungarian_matches_permutation_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        for _ in 0..60 {
            let n = 6;
            let cost: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..n).map(|_| rng.gen_range(0.0..10.0)).collect())
                .collect();
            let got: f64 = hungarian_assign(&cost)
                .unwrap()
                .pairs
                .iter()
                .map(|&(_, _, c)| c)
                .sum();
            let want = oracle::min_cost_by_permutations(&cost);
            assert!((got - want).abs() < 1e-9, "{got} vs {want}");
        }
    }

    #[test]
    fn hungarian_beats_random_matchings() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let n = rng.gen_range(2..8);
            let m = rng.gen_range(2..8);
            let cost: Vec<Vec<f64>> = (0..n)
                .map(|_| (0..m).map(|_| rng.gen_range(-3.0..10.0)).collect())
                .collect();
            let optimal: f64 = hungarian_assign(&cost)
                .unwrap()
                .pairs
                .iter()
                .map(|&(_, _, c)| c)
                .sum();
            for _ in 0..30 {
                // Random one-to-one matching of size min(n, m).
                let mut cols: Vec<usize> = (0..m).collect();
                for i in (1..cols.len()).rev() {
                    cols.swap(i, rng.gen_range(0..=i));
                }
                let total: f64 = (0..n.min(m)).map(|r| cost[r][cols[r]]).sum();
                assert!(optimal <= total + 1e-9);
            }
        }
    }

    #[test]
    fn hungarian_rejects_non_finite() {
        let err = hungarian_assign(&[vec![1.0, f64::NAN]]).unwrap_err();
        assert!(matches!(err, MetricError::NonFiniteCost(0, 1)));
    }

    fn flat_line(name: &str, y: f64, n: usize) -> SpectralCurve {
        let xs: Vec<f64> = (0..n).map(|i| i as f64).collect();
        SpectralCurve::from_xy(name, &xs, &vec![y; n])
    }

    #[test]
    fn subplot_identity_scores_one() {
        let truth = SubplotAnswer::new("A", vec![flat_line("l1", 0.0, 11), flat_line("l2", 4.0, 11)]);
        let s = score_subplot(&truth, &truth, MetricKind::Chamfer, &ScoreOptions::default());
        assert!((s.score - 1.0).abs() < 1e-12);
        assert_eq!(
            s.assignment.pairs.iter().map(|&(p, t, _)| (p, t)).collect::<Vec<_>>(),
            vec![(0, 0), (1, 1)]
        );
    }

    #[test]
    fn subplot_hand_computed_shift() {
        // Truth: y=0 and y=4 over x in 0..=10. Prediction shifts line 2 up
        // by 2 (half the truth y range). In joint-normalized coordinates the
        // shift is 1/3 of the y span, so the pair's chamfer is 2*(1/3)^2 and
        // the pair diameter² is 1 + (1/3)^2 -> pair score 0.8, mean 0.9.
        let truth = SubplotAnswer::new("A", vec![flat_line("l1", 0.0, 11), flat_line("l2", 4.0, 11)]);
        let pred = SubplotAnswer::new("A", vec![flat_line("l1", 0.0, 11), flat_line("l2", 6.0, 11)]);
        let s = score_subplot(&pred, &truth, MetricKind::Chamfer, &ScoreOptions::default());
        assert!((s.score - 0.9).abs() < 1e-12, "score {}", s.score);
        assert!(s.score > 0.0 && s.score < 1.0);
    }

    #[test]
    fn subplot_decoy_lines_are_left_unmatched() {
        // Nine predicted lines: two equal the truth, seven flat decoys far
        // away. The matcher must pick the two true ones.
        let xs: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let t1 = SpectralCurve::from_xy("t1", &xs, &xs.iter().map(|x| (x * 0.7).sin() + 2.0).collect::<Vec<_>>());
        let t2 = SpectralCurve::from_xy("t2", &xs, &xs.iter().map(|x| (x * 0.4).cos() + 4.0).collect::<Vec<_>>());
        let truth = SubplotAnswer::new("A", vec![t1.clone(), t2.clone()]);
        let mut pred_lines = vec![flat_line("z", 0.0, 20); 7];
        pred_lines.insert(3, t1.clone());
        pred_lines.push(t2.clone());
        let pred = SubplotAnswer::new("A", pred_lines);
        let s = score_subplot(&pred, &truth, MetricKind::Chamfer, &ScoreOptions::default());
        assert!((s.score - 1.0).abs() < 1e-9, "score {}", s.score);
        let matched: Vec<(usize, usize)> = s.assignment.pairs.iter().map(|&(p, t, _)| (p, t)).collect();
        assert_eq!(matched, vec![(3, 0), (8, 1)]);
        assert_eq!(s.assignment.unmatched_pred.len(), 7);
    }

    #[test]
    fn subplot_empty_prediction_scores_zero() {
        let truth = SubplotAnswer::new("A", vec![flat_line("l1", 0.0, 5)]);
        let pred = SubplotAnswer::new("A", vec![]);
        let s = score_subplot(&pred, &truth, MetricKind::Chamfer, &ScoreOptions::default());
        assert_eq!(s.score, 0.0);
        assert!(!s.diagnostics.is_empty());
    }

    #[test]
    fn subplot_permutation_invariant() {
        let xs: Vec<f64> = (0..15).map(|i| i as f64).collect();
        let mk = |f: f64| {
            SpectralCurve::from_xy(
                "l",
                &xs,
                &xs.iter().map(|x| (x * f).sin() + f).collect::<Vec<_>>(),
            )
        };
        let truth = SubplotAnswer::new("A", vec![mk(0.3), mk(0.7), mk(1.1)]);
        let pred1 = SubplotAnswer::new("A", vec![mk(0.31), mk(0.69), mk(1.12)]);
        let pred2 = SubplotAnswer::new("A", vec![mk(1.12), mk(0.31), mk(0.69)]);
        let s1 = score_subplot(&pred1, &truth, MetricKind::Hausdorff, &ScoreOptions::default());
        let s2 = score_subplot(&pred2, &truth, MetricKind::Hausdorff, &ScoreOptions::default());
        assert!((s1.score - s2.score).abs() < 1e-12);
    }

    #[test]
    fn subplot_penalize_unmatched_lowers_score() {
        let truth = SubplotAnswer::new(
            "A",
            vec![flat_line("l1", 0.0, 8), flat_line("l2", 2.0, 8), flat_line("l3", 4.0, 8)],
        );
        let pred = SubplotAnswer::new("A", vec![flat_line("l1", 0.0, 8)]);
        let default = score_subplot(&pred, &truth, MetricKind::Chamfer, &ScoreOptions::default());
        let penalized = score_subplot(
            &pred,
            &truth,
            MetricKind::Chamfer,
            &ScoreOptions { penalize_unmatched: true, ..ScoreOptions::default() },
        );
        assert!(penalized.score < default.score);
        assert!((penalized.score - default.score / 3.0).abs() < 1e-12);
    }

    #[test]
    fn fidelity_zero_for_identical_curves() {
        let xs: Vec<f64> = (0..50).map(|i| i as f64 * 0.1).collect();
        let ys: Vec<f64> = xs.iter().map(|x| x.sin()).collect();
        let c = SpectralCurve::from_xy("c", &xs, &ys);
        let r = fidelity(&c, &c, 1.0, &ScoreOptions::default()).unwrap();
        assert_eq!(r.d_cd, 0.0);
        assert_eq!(r.d_hd, 0.0);
        assert_eq!(r.d_wd, 0.0);
        assert_eq!(r.score_cd, 1.0);
        assert_eq!(r.score_hd, 1.0);
        assert_eq!(r.score_wd, 1.0);
    }
}
