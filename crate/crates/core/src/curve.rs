//! Domain types shared by every stage: curves, subplot answers, spectrum
//! types, and the affine axis normalization used for scale-free scoring.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CurveError {
    #[error("curve `{0}` has no finite points")]
    EmptyCurve(String),
    #[error("curve `{0}` is not canonical: x must be strictly increasing and finite")]
    NotCanonical(String),
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("failed to parse {path}: {message}")]
    Format { path: String, message: String },
}

/// A single (x, y) sample in axis units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }

    pub fn dist_sq(&self, other: &Point) -> f64 {
        let dx = self.x - other.x;
        let dy = self.y - other.y;
        dx * dx + dy * dy
    }

    pub fn dist(&self, other: &Point) -> f64 {
        self.dist_sq(other).sqrt()
    }
}

// Wire shape is `[x, y]`, matching the JSON curve schema.
impl Serialize for Point {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        [self.x, self.y].serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Point {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let raw = <[f64; 2]>::deserialize(deserializer)?;
        Ok(Point { x: raw[0], y: raw[1] })
    }
}

/// An ordered sequence of (x, y) samples with axis metadata.
///
/// A curve is *canonical* when its points are finite and sorted by strictly
/// increasing x. Most operations require canonical input; use
/// [`canonicalize`] on anything that arrived from the outside world.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralCurve {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub x_label: String,
    #[serde(default)]
    pub y_label: String,
    pub points: Vec<Point>,
}

impl SpectralCurve {
    pub fn new(name: impl Into<String>, points: Vec<Point>) -> Self {
        SpectralCurve {
            name: name.into(),
            x_label: String::new(),
            y_label: String::new(),
            points,
        }
    }

    pub fn from_xy(name: impl Into<String>, xs: &[f64], ys: &[f64]) -> Self {
        assert_eq!(xs.len(), ys.len(), "x/y length mismatch");
        SpectralCurve::new(
            name,
            xs.iter().zip(ys).map(|(&x, &y)| Point::new(x, y)).collect(),
        )
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn xs(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|p| p.x)
    }

    pub fn ys(&self) -> impl Iterator<Item = f64> + '_ {
        self.points.iter().map(|p| p.y)
    }

    /// True when points are finite and x strictly increasing.
    pub fn is_canonical(&self) -> bool {
        !self.points.is_empty()
            && self.points.iter().all(Point::is_finite)
            && self.points.windows(2).all(|w| w[0].x < w[1].x)
    }

    /// Replaces the y values, keeping x and metadata.
    pub fn with_ys(&self, ys: Vec<f64>) -> Self {
        assert_eq!(ys.len(), self.points.len());
        let points = self
            .points
            .iter()
            .zip(ys)
            .map(|(p, y)| Point::new(p.x, y))
            .collect();
        SpectralCurve {
            name: self.name.clone(),
            x_label: self.x_label.clone(),
            y_label: self.y_label.clone(),
            points,
        }
    }

    /// Sub-curve at the given sorted indices.
    pub fn select(&self, indices: &[usize]) -> Self {
        SpectralCurve {
            name: self.name.clone(),
            x_label: self.x_label.clone(),
            y_label: self.y_label.clone(),
            points: indices.iter().map(|&i| self.points[i]).collect(),
        }
    }
}

/// Counters reported by [`canonicalize`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct CanonicalizeStats {
    /// Points dropped because x or y was NaN or infinite.
    pub dropped_non_finite: usize,
    /// Points merged into a neighbor because they shared the same x.
    pub merged_duplicates: usize,
}

/// Sorts by x, averages duplicate-x points, and drops non-finite samples.
///
/// Idempotent: canonical input comes back unchanged.
pub fn canonicalize(curve: &SpectralCurve) -> Result<(SpectralCurve, CanonicalizeStats), CurveError> {
    let mut stats = CanonicalizeStats::default();
    let mut pts: Vec<Point> = Vec::with_capacity(curve.points.len());
    for p in &curve.points {
        if p.is_finite() {
            pts.push(*p);
        } else {
            stats.dropped_non_finite += 1;
        }
    }
    if pts.is_empty() {
        return Err(CurveError::EmptyCurve(curve.name.clone()));
    }
    pts.sort_by(|a, b| a.x.total_cmp(&b.x));

    let mut out: Vec<Point> = Vec::with_capacity(pts.len());
    let mut i = 0;
    while i < pts.len() {
        let x = pts[i].x;
        let mut sum = 0.0;
        let mut n = 0usize;
        while i < pts.len() && pts[i].x == x {
            sum += pts[i].y;
            n += 1;
            i += 1;
        }
        if n > 1 {
            stats.merged_duplicates += n - 1;
        }
        out.push(Point::new(x, sum / n as f64));
    }

    let mut canonical = curve.clone();
    canonical.points = out;
    Ok((canonical, stats))
}

/// A named subplot holding one or more extracted curves; the unit scored by
/// the multi-line evaluator and carried by the `<subplot>` wire format.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SubplotAnswer {
    pub subplot_id: String,
    pub lines: Vec<SpectralCurve>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub diagnostics: Vec<String>,
}

impl SubplotAnswer {
    pub fn new(subplot_id: impl Into<String>, lines: Vec<SpectralCurve>) -> Self {
        SubplotAnswer {
            subplot_id: subplot_id.into(),
            lines,
            diagnostics: Vec::new(),
        }
    }
}

/// The seven spectrum classes covered by the generator and renderer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SpectrumType {
    Nmr,
    Ir,
    Xrd,
    Raman,
    Ms,
    UvVis,
    Xps,
}

impl SpectrumType {
    pub const ALL: [SpectrumType; 7] = [
        SpectrumType::Nmr,
        SpectrumType::Ir,
        SpectrumType::Xrd,
        SpectrumType::Raman,
        SpectrumType::Ms,
        SpectrumType::UvVis,
        SpectrumType::Xps,
    ];

    /// Stick-style spectra are drawn as impulses and skip smoothing: a
    /// least-squares filter would erode isolated peaks to nothing.
    pub fn is_stick_style(&self) -> bool {
        matches!(self, SpectrumType::Ms)
    }

    pub fn x_axis_label(&self) -> &'static str {
        match self {
            SpectrumType::Nmr => "Chemical shift (ppm)",
            SpectrumType::Ir => "Wavenumber (cm-1)",
            SpectrumType::Xrd => "2theta (degree)",
            SpectrumType::Raman => "Raman shift (cm-1)",
            SpectrumType::Ms => "m/z",
            SpectrumType::UvVis => "Wavelength (nm)",
            SpectrumType::Xps => "Binding energy (eV)",
        }
    }

    pub fn y_axis_label(&self) -> &'static str {
        match self {
            SpectrumType::Ir => "Transmittance",
            SpectrumType::UvVis => "Absorbance",
            _ => "Intensity (a.u.)",
        }
    }
}

impl fmt::Display for SpectrumType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            SpectrumType::Nmr => "NMR",
            SpectrumType::Ir => "IR",
            SpectrumType::Xrd => "XRD",
            SpectrumType::Raman => "Raman",
            SpectrumType::Ms => "MS",
            SpectrumType::UvVis => "UV-Vis",
            SpectrumType::Xps => "XPS",
        };
        f.write_str(s)
    }
}

impl FromStr for SpectrumType {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "nmr" => Ok(SpectrumType::Nmr),
            "ir" => Ok(SpectrumType::Ir),
            "xrd" => Ok(SpectrumType::Xrd),
            "raman" => Ok(SpectrumType::Raman),
            "ms" => Ok(SpectrumType::Ms),
            "uvvis" | "uv-vis" | "uv_vis" => Ok(SpectrumType::UvVis),
            "xps" => Ok(SpectrumType::Xps),
            other => Err(format!("unknown spectrum type `{other}`")),
        }
    }
}

/// Affine map `(v - offset) * scale` per axis, sending raw coordinates into
/// the unit square.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisNormalization {
    pub x_offset: f64,
    pub x_scale: f64,
    pub y_offset: f64,
    pub y_scale: f64,
}

impl AxisNormalization {
    pub fn identity() -> Self {
        AxisNormalization {
            x_offset: 0.0,
            x_scale: 1.0,
            y_offset: 0.0,
            y_scale: 1.0,
        }
    }

    pub fn apply(&self, p: Point) -> Point {
        Point::new((p.x - self.x_offset) * self.x_scale, (p.y - self.y_offset) * self.y_scale)
    }

    pub fn invert(&self, p: Point) -> Point {
        Point::new(p.x / self.x_scale + self.x_offset, p.y / self.y_scale + self.y_offset)
    }

    pub fn apply_curve(&self, curve: &SpectralCurve) -> SpectralCurve {
        let mut out = curve.clone();
        for p in &mut out.points {
            *p = self.apply(*p);
        }
        out
    }

    pub fn apply_points(&self, points: &[Point]) -> Vec<Point> {
        points.iter().map(|&p| self.apply(p)).collect()
    }
}

/// Affine map sending the joint bounding box of `a ∪ b` onto [0,1]×[0,1].
///
/// The bounding box is joint by design: normalizing each curve separately
/// would rescale a prediction with the wrong axis range into false
/// agreement. A degenerate axis (max = min) keeps scale 1 and centers the
/// shared value at 0.5.
pub fn fit_unit_square(a: &SpectralCurve, b: &SpectralCurve) -> Result<AxisNormalization, CurveError> {
    if a.is_empty() {
        return Err(CurveError::EmptyCurve(a.name.clone()));
    }
    if b.is_empty() {
        return Err(CurveError::EmptyCurve(b.name.clone()));
    }
    let mut x_min = f64::INFINITY;
    let mut x_max = f64::NEG_INFINITY;
    let mut y_min = f64::INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    for p in a.points.iter().chain(b.points.iter()) {
        x_min = x_min.min(p.x);
        x_max = x_max.max(p.x);
        y_min = y_min.min(p.y);
        y_max = y_max.max(p.y);
    }
    let (x_offset, x_scale) = axis_map(x_min, x_max);
    let (y_offset, y_scale) = axis_map(y_min, y_max);
    Ok(AxisNormalization {
        x_offset,
        x_scale,
        y_offset,
        y_scale,
    })
}

fn axis_map(min: f64, max: f64) -> (f64, f64) {
    if max > min {
        (min, 1.0 / (max - min))
    } else {
        // Degenerate extent: scale 1, center at 0.5.
        (min - 0.5, 1.0)
    }
}

// ---------------------------------------------------------------------------
// File ingestion: the JSON curve schema and two-column CSV.
// ---------------------------------------------------------------------------

/// Reads a curve from the JSON schema
/// `{"name": .., "x_label": .., "y_label": .., "points": [[x,y],..]}`.
pub fn load_curve_json(path: &Path) -> Result<SpectralCurve, CurveError> {
    let text = std::fs::read_to_string(path).map_err(|source| CurveError::Io {
        path: path.display().to_string(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| CurveError::Format {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

/// Reads a two-column numeric CSV; a non-numeric first row is treated as a
/// header. The curve name defaults to the file stem.
pub fn load_curve_csv(path: &Path) -> Result<SpectralCurve, CurveError> {
    let text = std::fs::read_to_string(path).map_err(|source| CurveError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut points = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        match parse_csv_row(line) {
            Some(p) => points.push(p),
            None if lineno == 0 => continue, // header
            None => {
                return Err(CurveError::Format {
                    path: path.display().to_string(),
                    message: format!("line {}: expected two numeric columns", lineno + 1),
                })
            }
        }
    }
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    if points.is_empty() {
        return Err(CurveError::EmptyCurve(name));
    }
    Ok(SpectralCurve::new(name, points))
}

fn parse_csv_row(line: &str) -> Option<Point> {
    let mut cols = line.split(',').map(str::trim);
    let x = cols.next()?.parse::<f64>().ok()?;
    let y = cols.next()?.parse::<f64>().ok()?;
    Some(Point::new(x, y))
}

pub fn save_curve_json(path: &Path, curve: &SpectralCurve) -> Result<(), CurveError> {
    let text = serde_json::to_string_pretty(curve).expect("curve serialization cannot fail");
    std::fs::write(path, text).map_err(|source| CurveError::Io {
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn curve(points: &[(f64, f64)]) -> SpectralCurve {
        SpectralCurve::new(
            "t",
            points.iter().map(|&(x, y)| Point::new(x, y)).collect(),
        )
    }

    #[test]
    fn canonicalize_sorts_and_averages_duplicates() {
        let (c, stats) = canonicalize(&curve(&[(2.0, 1.0), (1.0, 0.0), (1.0, 2.0)])).unwrap();
        assert_eq!(c.points, vec![Point::new(1.0, 1.0), Point::new(2.0, 1.0)]);
        assert_eq!(stats.merged_duplicates, 1);
        assert_eq!(stats.dropped_non_finite, 0);
    }

    #[test]
    fn canonicalize_drops_non_finite() {
        let (c, stats) =
            canonicalize(&curve(&[(0.0, 0.0), (1.0, f64::NAN), (2.0, 4.0)])).unwrap();
        assert_eq!(c.points, vec![Point::new(0.0, 0.0), Point::new(2.0, 4.0)]);
        assert_eq!(stats.dropped_non_finite, 1);
    }

    #[test]
    fn canonicalize_is_idempotent() {
        let input = curve(&[(3.0, 1.0), (1.0, 5.0), (1.0, 7.0), (2.0, f64::INFINITY)]);
        let (once, _) = canonicalize(&input).unwrap();
        let (twice, stats) = canonicalize(&once).unwrap();
        assert_eq!(once, twice);
        assert_eq!(stats, CanonicalizeStats::default());
    }

    #[test]
    fn canonicalize_rejects_all_non_finite() {
        assert!(canonicalize(&curve(&[(f64::NAN, 0.0)])).is_err());
    }

    #[test]
    fn unit_square_from_bounding_box() {
        let a = curve(&[(0.0, 0.0), (10.0, 5.0)]);
        let n = fit_unit_square(&a, &a).unwrap();
        assert_eq!(n.x_scale, 1.0 / 10.0);
        assert_eq!(n.y_scale, 1.0 / 5.0);
        assert_eq!(n.x_offset, 0.0);
        assert_eq!(n.y_offset, 0.0);
    }

    #[test]
    fn unit_square_degenerate_axis_centers() {
        let a = curve(&[(0.0, 3.0), (4.0, 3.0)]);
        let b = curve(&[(2.0, 3.0)]);
        let n = fit_unit_square(&a, &b).unwrap();
        for p in a.points.iter().chain(b.points.iter()) {
            let q = n.apply(*p);
            assert!((q.y - 0.5).abs() < 1e-15);
        }
    }

    #[test]
    fn unit_square_offset_scale() {
        let a = curve(&[(2.0, -1.0), (4.0, 1.0)]);
        let n = fit_unit_square(&a, &a).unwrap();
        assert_eq!(n.x_offset, 2.0);
        assert_eq!(n.x_scale, 0.5);
        assert_eq!(n.y_offset, -1.0);
        assert_eq!(n.y_scale, 0.5);
    }

    #[test]
    fn normalization_round_trips() {
        let a = curve(&[(2.0, -1.0), (3.0, 0.5), (4.0, 1.0)]);
        let n = fit_unit_square(&a, &a).unwrap();
        for p in &a.points {
            let back = n.invert(n.apply(*p));
            assert!((back.x - p.x).abs() <= 1e-12 * p.x.abs().max(1.0));
            assert!((back.y - p.y).abs() <= 1e-12 * p.y.abs().max(1.0));
        }
    }

    #[test]
    fn unit_square_maps_into_range() {
        let a = curve(&[(-3.0, 7.0), (2.0, 9.5), (11.0, 8.0)]);
        let b = curve(&[(0.0, 2.0), (5.0, 14.0)]);
        let n = fit_unit_square(&a, &b).unwrap();
        for p in a.points.iter().chain(b.points.iter()) {
            let q = n.apply(*p);
            assert!((-1e-12..=1.0 + 1e-12).contains(&q.x));
            assert!((-1e-12..=1.0 + 1e-12).contains(&q.y));
        }
    }

    #[test]
    fn json_schema_round_trip() {
        let mut c = curve(&[(0.0, 1.25), (1.0, 2.5)]);
        c.x_label = "m/z".into();
        let text = serde_json::to_string(&c).unwrap();
        assert!(text.contains("\"points\":[[0.0,1.25],[1.0,2.5]]"));
        let back: SpectralCurve = serde_json::from_str(&text).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn csv_with_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        std::fs::write(&path, "wavelength,intensity\n1.0,2.0\n2.0,3.5\n").unwrap();
        let c = load_curve_csv(&path).unwrap();
        assert_eq!(c.points, vec![Point::new(1.0, 2.0), Point::new(2.0, 3.5)]);
    }

    #[test]
    fn csv_bad_row_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.csv");
        std::fs::write(&path, "1.0,2.0\nnot,numeric\n").unwrap();
        assert!(load_curve_csv(&path).is_err());
    }
}
