//! Deterministic vector rendering of spectral curves.
//!
//! The output is plain SVG text on a fixed 800x600 canvas: identical input
//! produces identical bytes, so rendered figures can be golden-file tested.
//! Mass spectra draw one stick per point; every other type draws a polyline.

use std::fmt::Write as _;

use thiserror::Error;

use crate::curve::{SpectralCurve, SpectrumType};

#[derive(Debug, Error)]
pub enum RenderError {
    #[error("no curves to render")]
    NoCurves,
    #[error("curve `{0}` has no points")]
    EmptyCurve(String),
}

const CANVAS_W: f64 = 800.0;
const CANVAS_H: f64 = 600.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 20.0;
const MARGIN_B: f64 = 50.0;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f",
];

/// Renders the curves as an SVG document string.
pub fn render_svg(curves: &[SpectralCurve], style: SpectrumType) -> Result<String, RenderError> {
    if curves.is_empty() {
        return Err(RenderError::NoCurves);
    }
    for c in curves {
        if c.is_empty() {
            return Err(RenderError::EmptyCurve(c.name.clone()));
        }
    }

    let (x_min, x_max, y_min, y_max) = joint_bounds(curves);
    let plot_w = CANVAS_W - MARGIN_L - MARGIN_R;
    let plot_h = CANVAS_H - MARGIN_T - MARGIN_B;
    let sx = |x: f64| MARGIN_L + span_fraction(x, x_min, x_max) * plot_w;
    let sy = |y: f64| MARGIN_T + (1.0 - span_fraction(y, y_min, y_max)) * plot_h;

    let mut out = String::with_capacity(4096);
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{CANVAS_W}\" height=\"{CANVAS_H}\" viewBox=\"0 0 {CANVAS_W} {CANVAS_H}\">"
    );
    out.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");
    let _ = writeln!(
        out,
        "<rect x=\"{:.2}\" y=\"{:.2}\" width=\"{:.2}\" height=\"{:.2}\" fill=\"none\" stroke=\"black\" stroke-width=\"1\"/>",
        MARGIN_L, MARGIN_T, plot_w, plot_h
    );

    // Axis labels: curve metadata wins, style defaults otherwise.
    let x_label = curves
        .iter()
        .find(|c| !c.x_label.is_empty())
        .map(|c| c.x_label.as_str())
        .unwrap_or_else(|| style.x_axis_label());
    let y_label = curves
        .iter()
        .find(|c| !c.y_label.is_empty())
        .map(|c| c.y_label.as_str())
        .unwrap_or_else(|| style.y_axis_label());
    let _ = writeln!(
        out,
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\" font-size=\"16\">{}</text>",
        MARGIN_L + plot_w / 2.0,
        CANVAS_H - 12.0,
        escape_xml(x_label)
    );
    let _ = writeln!(
        out,
        "<text x=\"16\" y=\"{:.2}\" text-anchor=\"middle\" font-size=\"16\" transform=\"rotate(-90 16 {:.2})\">{}</text>",
        MARGIN_T + plot_h / 2.0,
        MARGIN_T + plot_h / 2.0,
        escape_xml(y_label)
    );

    // Tick labels at the plot corners keep the figure readable without a
    // full tick generator.
    let _ = writeln!(
        out,
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"start\" font-size=\"12\">{:.2}</text>",
        MARGIN_L,
        CANVAS_H - MARGIN_B + 18.0,
        x_min
    );
    let _ = writeln!(
        out,
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\" font-size=\"12\">{:.2}</text>",
        CANVAS_W - MARGIN_R,
        CANVAS_H - MARGIN_B + 18.0,
        x_max
    );
    let _ = writeln!(
        out,
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\" font-size=\"12\">{:.2}</text>",
        MARGIN_L - 6.0,
        CANVAS_H - MARGIN_B,
        y_min
    );
    let _ = writeln!(
        out,
        "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\" font-size=\"12\">{:.2}</text>",
        MARGIN_L - 6.0,
        MARGIN_T + 10.0,
        y_max
    );

    let floor = sy(y_min);
    for (ci, curve) in curves.iter().enumerate() {
        let color = PALETTE[ci % PALETTE.len()];
        if style.is_stick_style() {
            for p in &curve.points {
                let _ = writeln!(
                    out,
                    "<line class=\"stick\" x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"{}\" stroke-width=\"1.5\"/>",
                    sx(p.x),
                    floor,
                    sx(p.x),
                    sy(p.y),
                    color
                );
            }
        } else {
            let mut points_attr = String::with_capacity(curve.len() * 12);
            for (i, p) in curve.points.iter().enumerate() {
                if i > 0 {
                    points_attr.push(' ');
                }
                let _ = write!(points_attr, "{:.2},{:.2}", sx(p.x), sy(p.y));
            }
            let _ = writeln!(
                out,
                "<polyline class=\"trace\" fill=\"none\" stroke=\"{}\" stroke-width=\"1.5\" points=\"{}\"/>",
                color, points_attr
            );
        }
    }
    out.push_str("</svg>\n");
    Ok(out)
}

fn joint_bounds(curves: &[SpectralCurve]) -> (f64, f64, f64, f64) {
    let mut x_min = f64::INFINITY;
    let mut x_max = f64::NEG_INFINITY;
    let mut y_min = f64::INFINITY;
    let mut y_max = f64::NEG_INFINITY;
    for c in curves {
        for p in &c.points {
            x_min = x_min.min(p.x);
            x_max = x_max.max(p.x);
            y_min = y_min.min(p.y);
            y_max = y_max.max(p.y);
        }
    }
    (x_min, x_max, y_min, y_max)
}

fn span_fraction(v: f64, min: f64, max: f64) -> f64 {
    if max > min {
        (v - min) / (max - min)
    } else {
        0.5
    }
}

fn escape_xml(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curve::Point;

    #[test]
    fn empty_inputs_rejected() {
        assert!(matches!(render_svg(&[], SpectrumType::Ir), Err(RenderError::NoCurves)));
        let empty = SpectralCurve::new("e", vec![]);
        assert!(matches!(
            render_svg(&[empty], SpectrumType::Ir),
            Err(RenderError::EmptyCurve(_))
        ));
    }

    #[test]
    fn line_style_emits_one_polyline_with_all_points() {
        let c = SpectralCurve::new(
            "c",
            vec![Point::new(0.0, 0.0), Point::new(1.0, 2.0), Point::new(2.0, 1.0)],
        );
        let doc = render_svg(&[c], SpectrumType::UvVis).unwrap();
        assert_eq!(doc.matches("<polyline class=\"trace\"").count(), 1);
        let points_attr = doc
            .split("points=\"")
            .nth(1)
            .and_then(|s| s.split('"').next())
            .unwrap();
        assert_eq!(points_attr.split(' ').count(), 3);
    }

    #[test]
    fn ms_style_emits_one_stick_per_point() {
        let c = SpectralCurve::new(
            "peaks",
            vec![
                Point::new(100.0, 5.0),
                Point::new(230.0, 9.0),
                Point::new(410.0, 2.0),
                Point::new(555.0, 7.5),
            ],
        );
        let doc = render_svg(&[c], SpectrumType::Ms).unwrap();
        assert_eq!(doc.matches("<line class=\"stick\"").count(), 4);
        assert_eq!(doc.matches("<polyline").count(), 0);
    }

    #[test]
    fn output_is_byte_stable() {
        let c = SpectralCurve::from_xy("c", &[0.0, 0.5, 1.0], &[0.1, 0.9, 0.2]);
        let a = render_svg(std::slice::from_ref(&c), SpectrumType::Raman).unwrap();
        let b = render_svg(std::slice::from_ref(&c), SpectrumType::Raman).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn labels_are_escaped() {
        let mut c = SpectralCurve::from_xy("c", &[0.0, 1.0], &[0.0, 1.0]);
        c.x_label = "a < b & c".into();
        let doc = render_svg(&[c], SpectrumType::Ir).unwrap();
        assert!(doc.contains("a &lt; b &amp; c"));
    }
}
