//! Natural cubic spline reconstruction.
//!
//! The sampled point set becomes the knots of a C²-continuous piecewise
//! cubic; resampling it on a dense grid recovers a smooth stand-in for the
//! original curve. Natural boundary conditions (zero second derivative at
//! both ends) avoid inventing end slopes.

use thiserror::Error;

use crate::curve::{Point, SpectralCurve};

#[derive(Debug, Error)]
pub enum SplineError {
    #[error("spline needs at least 2 points, got {0}")]
    TooFewPoints(usize),
    #[error("knot x values must be strictly increasing (offending index {0})")]
    NonMonotonicX(usize),
    #[error("{count} grid values outside the spline domain [{lo}, {hi}], first: {first}")]
    OutOfDomain { count: usize, lo: f64, hi: f64, first: f64 },
}

/// Piecewise cubic `y = a + bΔ + cΔ² + dΔ³` with `Δ = x - x_left` per
/// interval between consecutive knots.
#[derive(Debug, Clone)]
pub struct CubicSpline {
    knots_x: Vec<f64>,
    knots_y: Vec<f64>,
    /// `[a, b, c, d]` per interval; `coeffs.len() == knots_x.len() - 1`.
    coeffs: Vec<[f64; 4]>,
}

impl CubicSpline {
    pub fn domain(&self) -> (f64, f64) {
        (self.knots_x[0], *self.knots_x.last().unwrap())
    }

    pub fn knot_count(&self) -> usize {
        self.knots_x.len()
    }

    pub fn knots(&self) -> impl Iterator<Item = Point> + '_ {
        self.knots_x
            .iter()
            .zip(&self.knots_y)
            .map(|(&x, &y)| Point::new(x, y))
    }

    pub fn interval_coeffs(&self, i: usize) -> [f64; 4] {
        self.coeffs[i]
    }

    /// Evaluates the spline; x outside the domain uses the nearest boundary
    /// polynomial (callers wanting strict domains go through
    /// [`resample_dense`]).
    pub fn evaluate(&self, x: f64) -> f64 {
        let i = self.interval_of(x);
        let dx = x - self.knots_x[i];
        let [a, b, c, d] = self.coeffs[i];
        a + dx * (b + dx * (c + dx * d))
    }

    /// Evaluates with constant extension beyond the domain, for comparing a
    /// short prediction against a wider truth grid.
    pub fn evaluate_clamped(&self, x: f64) -> f64 {
        let (lo, hi) = self.domain();
        self.evaluate(x.clamp(lo, hi))
    }

    fn interval_of(&self, x: f64) -> usize {
        let n = self.knots_x.len();
        if x <= self.knots_x[0] {
            return 0;
        }
        if x >= self.knots_x[n - 1] {
            return n - 2;
        }
        // Last knot index <= x.
        match self.knots_x.binary_search_by(|k| k.total_cmp(&x)) {
            Ok(i) => i.min(n - 2),
            Err(i) => i - 1,
        }
    }
}

/// Fits the natural cubic spline through the sampled points. Two points
/// degenerate to the connecting line.
pub fn spline_fit(sampled: &SpectralCurve) -> Result<CubicSpline, SplineError> {
    let n = sampled.len();
    if n < 2 {
        return Err(SplineError::TooFewPoints(n));
    }
    for (i, w) in sampled.points.windows(2).enumerate() {
        if w[0].x >= w[1].x {
            return Err(SplineError::NonMonotonicX(i + 1));
        }
    }
    let xs: Vec<f64> = sampled.xs().collect();
    let ys: Vec<f64> = sampled.ys().collect();

    if n == 2 {
        let h = xs[1] - xs[0];
        let b = (ys[1] - ys[0]) / h;
        return Ok(CubicSpline {
            coeffs: vec![[ys[0], b, 0.0, 0.0]],
            knots_x: xs,
            knots_y: ys,
        });
    }

    let second = natural_second_derivatives(&xs, &ys);
    let coeffs = (0..n - 1)
        .map(|i| {
            let h = xs[i + 1] - xs[i];
            let a = ys[i];
            let b = (ys[i + 1] - ys[i]) / h - h * (2.0 * second[i] + second[i + 1]) / 6.0;
            let c = second[i] / 2.0;
            let d = (second[i + 1] - second[i]) / (6.0 * h);
            [a, b, c, d]
        })
        .collect();
    Ok(CubicSpline {
        coeffs,
        knots_x: xs,
        knots_y: ys,
    })
}

/// Thomas solve of the natural-spline tridiagonal system for the knot
/// second derivatives. The system is strictly diagonally dominant for
/// strictly increasing knots, so the pivot-free sweep is always well-posed.
fn natural_second_derivatives(xs: &[f64], ys: &[f64]) -> Vec<f64> {
    let n = xs.len();
    let m = n - 2; // interior unknowns
    let mut diag = vec![0.0; m];
    let mut upper = vec![0.0; m];
    let mut rhs = vec![0.0; m];
    for i in 0..m {
        let h_lo = xs[i + 1] - xs[i];
        let h_hi = xs[i + 2] - xs[i + 1];
        diag[i] = 2.0 * (h_lo + h_hi);
        upper[i] = h_hi;
        rhs[i] = 6.0 * ((ys[i + 2] - ys[i + 1]) / h_hi - (ys[i + 1] - ys[i]) / h_lo);
    }
    // Forward sweep; the sub-diagonal entry of row i is h between knots
    // i and i+1, equal to row i-1's upper entry h_hi of the previous row.
    for i in 1..m {
        let lower = xs[i + 1] - xs[i];
        let w = lower / diag[i - 1];
        diag[i] -= w * upper[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    let mut interior = vec![0.0; m];
    interior[m - 1] = rhs[m - 1] / diag[m - 1];
    for i in (0..m - 1).rev() {
        interior[i] = (rhs[i] - upper[i] * interior[i + 1]) / diag[i];
    }

    let mut second = vec![0.0; n];
    second[1..=m].copy_from_slice(&interior);
    second
}

/// Evaluates the spline at each grid x. Each grid value must lie within the
/// knot span; the default grid is the original curve's x values, which makes
/// the reconstruction directly comparable to the original point for point.
pub fn resample_dense(spline: &CubicSpline, x_grid: &[f64]) -> Result<SpectralCurve, SplineError> {
    let (lo, hi) = spline.domain();
    let mut first_bad = None;
    let mut bad = 0usize;
    for &x in x_grid {
        if x < lo || x > hi || !x.is_finite() {
            bad += 1;
            first_bad.get_or_insert(x);
        }
    }
    if bad > 0 {
        return Err(SplineError::OutOfDomain {
            count: bad,
            lo,
            hi,
            first: first_bad.unwrap(),
        });
    }
    let mut points: Vec<Point> = x_grid
        .iter()
        .map(|&x| Point::new(x, spline.evaluate(x)))
        .collect();
    points.sort_by(|a, b| a.x.total_cmp(&b.x));
    points.dedup_by(|a, b| a.x == b.x);
    Ok(SpectralCurve::new("reconstructed", points))
}

/// Uniform grid of `k` values across the spline domain.
pub fn uniform_grid(spline: &CubicSpline, k: usize) -> Vec<f64> {
    let (lo, hi) = spline.domain();
    let k = k.max(2);
    (0..k)
        .map(|i| lo + (hi - lo) * i as f64 / (k - 1) as f64)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn curve_from(xs: &[f64], ys: &[f64]) -> SpectralCurve {
        SpectralCurve::from_xy("t", xs, ys)
    }

    #[test]
    fn two_points_is_a_line() {
        let s = spline_fit(&curve_from(&[0.0, 1.0], &[0.0, 2.0])).unwrap();
        for x in [0.0, 0.25, 0.5, 0.77, 1.0] {
            assert!((s.evaluate(x) - 2.0 * x).abs() < 1e-15);
        }
    }

    #[test]
    fn interpolates_knots_exactly() {
        let xs = [0.0, 1.0, 2.0, 3.0];
        let ys: Vec<f64> = xs.iter().map(|x| x * x * x).collect();
        let s = spline_fit(&curve_from(&xs, &ys)).unwrap();
        for (&x, &y) in xs.iter().zip(&ys) {
            assert!((s.evaluate(x) - y).abs() < 1e-12);
        }
        // Natural end conditions disagree with x^3 away from the knots
        // (its second derivative is nonzero at x = 3).
        assert!((s.evaluate(2.5) - 2.5f64.powi(3)).abs() > 1e-3);
    }

    #[test]
    fn sine_reconstruction_error_below_1e4() {
        let n = 20;
        let xs: Vec<f64> = (0..n)
            .map(|i| std::f64::consts::PI * i as f64 / (n - 1) as f64)
            .collect();
        let ys: Vec<f64> = xs.iter().map(|x| x.sin()).collect();
        let s = spline_fit(&curve_from(&xs, &ys)).unwrap();
        let grid = uniform_grid(&s, 1000);
        let dense = resample_dense(&s, &grid).unwrap();
        let max_err = dense
            .points
            .iter()
            .map(|p| (p.y - p.x.sin()).abs())
            .fold(0.0f64, f64::max);
        assert!(max_err < 1e-4, "max error {max_err}");
    }

    #[test]
    fn c2_continuity_at_interior_knots() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..50 {
            let n = rng.gen_range(3..40);
            let mut x = 0.0;
            let mut xs = Vec::with_capacity(n);
            for _ in 0..n {
                xs.push(x);
                x += rng.gen_range(0.05..1.0);
            }
            let ys: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let s = spline_fit(&curve_from(&xs, &ys)).unwrap();
            assert!(max_c2_discontinuity(&s) < 1e-9);
        }
    }

    /// Largest mismatch of value, slope, or curvature across interior knots,
    /// evaluated from the polynomial on each side.
    pub(crate) fn max_c2_discontinuity(s: &CubicSpline) -> f64 {
        let mut worst = 0.0f64;
        let xs: Vec<f64> = s.knots().map(|p| p.x).collect();
        for i in 1..xs.len() - 1 {
            let h = xs[i] - xs[i - 1];
            let [al, bl, cl, dl] = s.interval_coeffs(i - 1);
            let [ar, br, cr, _] = s.interval_coeffs(i);
            let val_l = al + h * (bl + h * (cl + h * dl));
            let d1_l = bl + h * (2.0 * cl + h * 3.0 * dl);
            let d2_l = 2.0 * cl + 6.0 * dl * h;
            let d1_r = br;
            let d2_r = 2.0 * cr;
            worst = worst
                .max((val_l - ar).abs())
                .max((d1_l - d1_r).abs())
                .max((d2_l - d2_r).abs());
        }
        worst
    }

    #[test]
    fn resample_on_knots_round_trips() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let n = 30;
        let xs: Vec<f64> = (0..n).map(|i| i as f64 * 0.37).collect();
        let ys: Vec<f64> = (0..n).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let s = spline_fit(&curve_from(&xs, &ys)).unwrap();
        let back = resample_dense(&s, &xs).unwrap();
        for (p, &y) in back.points.iter().zip(&ys) {
            assert!((p.y - y).abs() < 1e-12);
        }
    }

    #[test]
    fn constant_knots_give_constant_output() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let s = spline_fit(&curve_from(&xs, &[4.5; 10])).unwrap();
        let grid = uniform_grid(&s, 101);
        let dense = resample_dense(&s, &grid).unwrap();
        for p in &dense.points {
            assert!((p.y - 4.5).abs() < 1e-12);
        }
    }

    #[test]
    fn out_of_domain_is_reported() {
        let s = spline_fit(&curve_from(&[0.0, 1.0, 2.0], &[0.0, 1.0, 0.0])).unwrap();
        let err = resample_dense(&s, &[0.5, 2.5, -0.1]).unwrap_err();
        match err {
            SplineError::OutOfDomain { count, .. } => assert_eq!(count, 2),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn too_few_points_rejected() {
        assert!(matches!(
            spline_fit(&SpectralCurve::new("e", vec![Point::new(0.0, 0.0)])),
            Err(SplineError::TooFewPoints(1))
        ));
    }

    #[test]
    fn non_monotonic_rejected() {
        let c = SpectralCurve::new(
            "bad",
            vec![Point::new(0.0, 0.0), Point::new(1.0, 1.0), Point::new(1.0, 2.0)],
        );
        assert!(matches!(spline_fit(&c), Err(SplineError::NonMonotonicX(2))));
    }
}
