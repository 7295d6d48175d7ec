//! Precision and success plots as a standalone SVG document.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::eval::{Curve, CurvePoint, PRECISION_CURVE_MAX, PRECISION_THRESHOLD};

const PANEL_W: f64 = 420.0;
const PANEL_H: f64 = 320.0;
const MARGIN_L: f64 = 50.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 30.0;
const MARGIN_B: f64 = 40.0;
const LEGEND_ROW: f64 = 16.0;

const PALETTE: [&str; 8] = [
    "#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#e377c2", "#17becf",
];

/// Curves of one run, labelled in the legend.
#[derive(Debug, Clone, PartialEq)]
pub struct Series {
    pub label: String,
    pub points: Vec<CurvePoint>,
}

impl Series {
    fn curve(&self, which: Curve) -> Vec<(f64, f64)> {
        let mut out: Vec<(f64, f64)> = self
            .points
            .iter()
            .filter(|p| p.curve == which)
            .map(|p| (p.threshold, p.value))
            .collect();
        out.sort_by(|a, b| a.0.total_cmp(&b.0));
        out
    }

    /// Precision at the reference threshold, if the curve contains it.
    fn precision_score(&self) -> Option<f64> {
        self.curve(Curve::Precision)
            .into_iter()
            .find(|&(t, _)| t == PRECISION_THRESHOLD)
            .map(|(_, v)| v)
    }

    /// Mean success rate over the sampled thresholds.
    fn success_score(&self) -> Option<f64> {
        let c = self.curve(Curve::Success);
        (!c.is_empty()).then(|| c.iter().map(|p| p.1).sum::<f64>() / c.len() as f64)
    }
}

fn escape(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for c in text.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            _ => out.push(c),
        }
    }
    out
}

struct Panel {
    x0: f64,
    title: &'static str,
    x_label: &'static str,
    x_max: f64,
    x_ticks: Vec<f64>,
    curve: Curve,
}

impl Panel {
    fn map(&self, x: f64, y: f64) -> (f64, f64) {
        let w = PANEL_W - MARGIN_L - MARGIN_R;
        let h = PANEL_H - MARGIN_T - MARGIN_B;
        (
            self.x0 + MARGIN_L + w * (x / self.x_max).clamp(0.0, 1.0),
            MARGIN_T + h * (1.0 - y.clamp(0.0, 1.0)),
        )
    }

    fn render(&self, series: &[Series], svg: &mut String) {
        let (left, bottom) = self.map(0.0, 0.0);
        let (right, top) = self.map(self.x_max, 1.0);
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="18" text-anchor="middle" font-size="14">{}</text>"#,
            (left + right) / 2.0,
            self.title
        );
        let _ = writeln!(
            svg,
            r#"<rect x="{left:.2}" y="{top:.2}" width="{:.2}" height="{:.2}" fill="none" stroke="black"/>"#,
            right - left,
            bottom - top
        );
        for &t in &self.x_ticks {
            let (x, _) = self.map(t, 0.0);
            let _ = writeln!(
                svg,
                r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle" font-size="10">{t}</text>"#,
                bottom + 14.0
            );
        }
        for step in 0..=5 {
            let v = f64::from(step) / 5.0;
            let (_, y) = self.map(0.0, v);
            let _ = writeln!(
                svg,
                r#"<text x="{:.2}" y="{:.2}" text-anchor="end" font-size="10">{v}</text>"#,
                left - 6.0,
                y + 3.0
            );
        }
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="middle" font-size="11">{}</text>"#,
            (left + right) / 2.0,
            bottom + 32.0,
            self.x_label
        );

        for (k, s) in series.iter().enumerate() {
            let color = PALETTE[k % PALETTE.len()];
            let points: Vec<String> = s
                .curve(self.curve)
                .into_iter()
                .map(|(t, v)| {
                    let (x, y) = self.map(t, v);
                    format!("{x:.2},{y:.2}")
                })
                .collect();
            let _ = writeln!(
                svg,
                r#"<polyline fill="none" stroke="{color}" stroke-width="2" points="{}"/>"#,
                points.join(" ")
            );

            let score = match self.curve {
                Curve::Precision => s.precision_score(),
                Curve::Success => s.success_score(),
            };
            let label = match score {
                Some(v) => format!("{} [{v:.3}]", s.label),
                None => s.label.clone(),
            };
            let y = top + 14.0 + LEGEND_ROW * k as f64;
            let _ = writeln!(
                svg,
                r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="{color}" stroke-width="2"/>"#,
                left + 8.0,
                y - 4.0,
                left + 26.0,
                y - 4.0
            );
            let _ = writeln!(
                svg,
                r#"<text x="{:.2}" y="{y:.2}" font-size="11">{}</text>"#,
                left + 30.0,
                escape(&label)
            );
        }
    }
}

/// Renders a precision panel and a success panel, one polyline per series.
pub fn render_svg(series: &[Series]) -> Result<String> {
    if series.is_empty() {
        return Err(Error::Plot("no series to draw".into()));
    }
    let panels = [
        Panel {
            x0: 0.0,
            title: "Precision plot",
            x_label: "Location error threshold (px)",
            x_max: f64::from(PRECISION_CURVE_MAX),
            x_ticks: (0..=5).map(|t| f64::from(t * 10)).collect(),
            curve: Curve::Precision,
        },
        Panel {
            x0: PANEL_W,
            title: "Success plot",
            x_label: "Overlap threshold",
            x_max: 1.0,
            x_ticks: (0..=5).map(|t| f64::from(t) / 5.0).collect(),
            curve: Curve::Success,
        },
    ];
    let height = PANEL_H + (series.len().saturating_sub(8) as f64) * LEGEND_ROW;
    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{}" height="{height}" viewBox="0 0 {} {height}" font-family="sans-serif">"#,
        2.0 * PANEL_W,
        2.0 * PANEL_W
    );
    let _ = writeln!(
        svg,
        r#"<rect width="{}" height="{height}" fill="white"/>"#,
        2.0 * PANEL_W
    );
    for panel in &panels {
        panel.render(series, &mut svg);
    }
    svg.push_str("</svg>\n");
    Ok(svg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat(label: &str, value: f64) -> Series {
        let mut points: Vec<CurvePoint> = (0..=PRECISION_CURVE_MAX)
            .map(|t| CurvePoint {
                curve: Curve::Precision,
                threshold: f64::from(t),
                value,
            })
            .collect();
        points.extend((0..=20).map(|s| CurvePoint {
            curve: Curve::Success,
            threshold: f64::from(s) / 20.0,
            value,
        }));
        Series {
            label: label.into(),
            points,
        }
    }

    #[test]
    fn empty_input_is_rejected() {
        assert!(render_svg(&[]).is_err());
    }

    #[test]
    fn perfect_run_is_flat_at_top() {
        let svg = render_svg(&[flat("a.csv", 1.0)]).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 2);
        let (_, top) = Panel {
            x0: 0.0,
            title: "",
            x_label: "",
            x_max: 1.0,
            x_ticks: vec![],
            curve: Curve::Success,
        }
        .map(0.0, 1.0);
        for line in svg.lines().filter(|l| l.starts_with("<polyline")) {
            let pts = line.split("points=\"").nth(1).unwrap().trim_end_matches("\"/>");
            for p in pts.split(' ') {
                let y: f64 = p.split(',').nth(1).unwrap().parse().unwrap();
                assert_eq!(y, (top * 100.0).round() / 100.0);
            }
        }
        assert!(svg.contains("a.csv [1.000]"));
    }

    #[test]
    fn one_legend_entry_per_series() {
        let svg = render_svg(&[flat("a.csv", 1.0), flat("b<&>.csv", 0.5)]).unwrap();
        assert_eq!(svg.matches("<polyline").count(), 4);
        assert_eq!(svg.matches("a.csv [").count(), 2);
        assert_eq!(svg.matches("b&lt;&amp;&gt;.csv [").count(), 2);
    }

    #[test]
    fn rendering_is_deterministic() {
        let s = [flat("a", 0.3), flat("b", 0.7)];
        assert_eq!(render_svg(&s).unwrap(), render_svg(&s).unwrap());
    }
}
