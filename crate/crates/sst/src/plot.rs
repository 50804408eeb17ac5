//! Minimal SVG report plots: line charts (monitor curves, singular-value
//! spectra, mode-shape overlays) and bar charts (per-channel MMSC). No
//! interactivity — these are batch artifacts.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Result, SstError};

const WIDTH: f64 = 720.0;
const HEIGHT: f64 = 420.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 40.0;
const MARGIN_B: f64 = 55.0;
const PALETTE: [&str; 6] = [
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#17becf",
];

/// One named line on a chart.
#[derive(Debug, Clone)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

impl Series {
    pub fn new(label: impl Into<String>, points: Vec<(f64, f64)>) -> Self {
        Series {
            label: label.into(),
            points,
        }
    }

    pub fn from_values(label: impl Into<String>, values: &[f64]) -> Self {
        Series {
            label: label.into(),
            points: values
                .iter()
                .enumerate()
                .map(|(i, &v)| (i as f64, v))
                .collect(),
        }
    }
}

fn esc(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn finite_bounds(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for v in values.filter(|v| v.is_finite()) {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    if lo == hi {
        // flat data still needs a nonzero span
        return (lo - 0.5, hi + 0.5);
    }
    (lo, hi)
}

fn tick_values(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    (0..=count)
        .map(|i| lo + (hi - lo) * i as f64 / count as f64)
        .collect()
}

fn fmt_tick(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    let a = v.abs();
    if a >= 1000.0 || a < 0.01 {
        format!("{v:.2e}")
    } else if a < 1.0 {
        format!("{v:.3}")
    } else {
        format!("{v:.2}")
    }
}

struct Frame {
    x_lo: f64,
    x_hi: f64,
    y_lo: f64,
    y_hi: f64,
}

impl Frame {
    fn x(&self, v: f64) -> f64 {
        MARGIN_L + (v - self.x_lo) / (self.x_hi - self.x_lo) * (WIDTH - MARGIN_L - MARGIN_R)
    }

    fn y(&self, v: f64) -> f64 {
        HEIGHT - MARGIN_B - (v - self.y_lo) / (self.y_hi - self.y_lo) * (HEIGHT - MARGIN_T - MARGIN_B)
    }
}

fn svg_open(title: &str, x_label: &str, y_label: &str, frame: &Frame) -> String {
    let mut s = String::new();
    let _ = write!(
        s,
        concat!(
            "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{w}\" height=\"{h}\" ",
            "viewBox=\"0 0 {w} {h}\" font-family=\"sans-serif\" font-size=\"12\">\n",
            "<rect width=\"{w}\" height=\"{h}\" fill=\"white\"/>\n",
            "<text x=\"{tx}\" y=\"22\" text-anchor=\"middle\" font-size=\"15\">{title}</text>\n",
        ),
        w = WIDTH,
        h = HEIGHT,
        tx = WIDTH / 2.0,
        title = esc(title),
    );
    // axes
    let _ = write!(
        s,
        "<line x1=\"{l}\" y1=\"{t}\" x2=\"{l}\" y2=\"{b}\" stroke=\"black\"/>\n\
         <line x1=\"{l}\" y1=\"{b}\" x2=\"{r}\" y2=\"{b}\" stroke=\"black\"/>\n",
        l = MARGIN_L,
        r = WIDTH - MARGIN_R,
        t = MARGIN_T,
        b = HEIGHT - MARGIN_B,
    );
    for v in tick_values(frame.x_lo, frame.x_hi, 6) {
        let x = frame.x(v);
        let _ = write!(
            s,
            "<line x1=\"{x}\" y1=\"{b}\" x2=\"{x}\" y2=\"{b2}\" stroke=\"black\"/>\n\
             <text x=\"{x}\" y=\"{ty}\" text-anchor=\"middle\">{t}</text>\n",
            b = HEIGHT - MARGIN_B,
            b2 = HEIGHT - MARGIN_B + 5.0,
            ty = HEIGHT - MARGIN_B + 20.0,
            t = fmt_tick(v),
        );
    }
    for v in tick_values(frame.y_lo, frame.y_hi, 5) {
        let y = frame.y(v);
        let _ = write!(
            s,
            "<line x1=\"{l2}\" y1=\"{y}\" x2=\"{l}\" y2=\"{y}\" stroke=\"black\"/>\n\
             <text x=\"{tx}\" y=\"{ty}\" text-anchor=\"end\">{t}</text>\n",
            l = MARGIN_L,
            l2 = MARGIN_L - 5.0,
            tx = MARGIN_L - 8.0,
            ty = y + 4.0,
            t = fmt_tick(v),
        );
    }
    let _ = write!(
        s,
        "<text x=\"{cx}\" y=\"{cy}\" text-anchor=\"middle\">{xl}</text>\n\
         <text x=\"16\" y=\"{my}\" text-anchor=\"middle\" transform=\"rotate(-90 16 {my})\">{yl}</text>\n",
        cx = (MARGIN_L + WIDTH - MARGIN_R) / 2.0,
        cy = HEIGHT - 12.0,
        my = (MARGIN_T + HEIGHT - MARGIN_B) / 2.0,
        xl = esc(x_label),
        yl = esc(y_label),
    );
    s
}

fn write_svg(path: &Path, body: String) -> Result<()> {
    std::fs::write(path, body).map_err(|e| SstError::io(path.display().to_string(), e))
}

/// Multi-series line chart with an inline legend.
pub fn line_chart(
    path: &Path,
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[Series],
) -> Result<()> {
    if series.iter().all(|s| s.points.is_empty()) {
        return Err(SstError::InvalidConfig("nothing to plot".into()));
    }
    let (x_lo, x_hi) = finite_bounds(series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
    let (y_lo, y_hi) = finite_bounds(series.iter().flat_map(|s| s.points.iter().map(|p| p.1)));
    let frame = Frame { x_lo, x_hi, y_lo, y_hi };
    let mut s = svg_open(title, x_label, y_label, &frame);
    for (i, ser) in series.iter().enumerate() {
        let color = PALETTE[i % PALETTE.len()];
        let mut d = String::new();
        for (j, &(x, y)) in ser.points.iter().enumerate() {
            if !x.is_finite() || !y.is_finite() {
                continue;
            }
            let _ = write!(d, "{}{:.2},{:.2} ", if j == 0 { "M" } else { "L" }, frame.x(x), frame.y(y));
        }
        let _ = write!(
            s,
            "<path d=\"{d}\" fill=\"none\" stroke=\"{color}\" stroke-width=\"1.5\"/>\n"
        );
        let ly = MARGIN_T + 14.0 * i as f64 + 4.0;
        let _ = write!(
            s,
            "<line x1=\"{x1}\" y1=\"{ly}\" x2=\"{x2}\" y2=\"{ly}\" stroke=\"{color}\" stroke-width=\"2\"/>\n\
             <text x=\"{tx}\" y=\"{ty}\">{label}</text>\n",
            x1 = WIDTH - MARGIN_R - 150.0,
            x2 = WIDTH - MARGIN_R - 130.0,
            tx = WIDTH - MARGIN_R - 124.0,
            ty = ly + 4.0,
            label = esc(&ser.label),
        );
    }
    s.push_str("</svg>\n");
    write_svg(path, s)
}

/// Line chart with vertical markers (e.g. picked modal peaks).
pub fn line_chart_with_markers(
    path: &Path,
    title: &str,
    x_label: &str,
    y_label: &str,
    series: &[Series],
    markers_x: &[f64],
) -> Result<()> {
    line_chart(path, title, x_label, y_label, series)?;
    if markers_x.is_empty() {
        return Ok(());
    }
    // re-open the written file and inject marker lines before </svg>
    let text = std::fs::read_to_string(path)
        .map_err(|e| SstError::io(path.display().to_string(), e))?;
    let (x_lo, x_hi) = finite_bounds(series.iter().flat_map(|s| s.points.iter().map(|p| p.0)));
    let frame = Frame { x_lo, x_hi, y_lo: 0.0, y_hi: 1.0 };
    let mut inject = String::new();
    for &m in markers_x {
        if !m.is_finite() || m < x_lo || m > x_hi {
            continue;
        }
        let x = frame.x(m);
        let _ = write!(
            inject,
            "<line x1=\"{x}\" y1=\"{t}\" x2=\"{x}\" y2=\"{b}\" stroke=\"#888888\" stroke-dasharray=\"4 3\"/>\n",
            t = MARGIN_T,
            b = HEIGHT - MARGIN_B,
        );
    }
    let body = text.replace("</svg>", &format!("{inject}</svg>"));
    write_svg(path, body)
}

/// Labeled vertical bar chart (e.g. MMSC per channel).
pub fn bar_chart(
    path: &Path,
    title: &str,
    y_label: &str,
    labels: &[String],
    values: &[f64],
) -> Result<()> {
    if labels.len() != values.len() || labels.is_empty() {
        return Err(SstError::InvalidConfig(
            "bar chart needs equal, nonempty labels and values".into(),
        ));
    }
    let (_, hi) = finite_bounds(values.iter().copied().chain(std::iter::once(0.0)));
    let frame = Frame {
        x_lo: 0.0,
        x_hi: labels.len() as f64,
        y_lo: 0.0,
        y_hi: hi.max(1e-12),
    };
    let mut s = svg_open(title, "", y_label, &frame);
    let slot = (WIDTH - MARGIN_L - MARGIN_R) / labels.len() as f64;
    for (i, (&v, label)) in values.iter().zip(labels).enumerate() {
        let x = MARGIN_L + slot * (i as f64 + 0.15);
        let y = frame.y(v.max(0.0));
        let h = (HEIGHT - MARGIN_B) - y;
        let _ = write!(
            s,
            "<rect x=\"{x:.2}\" y=\"{y:.2}\" width=\"{w:.2}\" height=\"{h:.2}\" fill=\"{c}\"/>\n\
             <text x=\"{tx:.2}\" y=\"{ty}\" text-anchor=\"middle\">{label}</text>\n",
            w = slot * 0.7,
            c = PALETTE[0],
            tx = x + slot * 0.35,
            ty = HEIGHT - MARGIN_B + 20.0,
            label = esc(label),
        );
    }
    s.push_str("</svg>\n");
    write_svg(path, s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn line_chart_is_valid_svg() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("lines.svg");
        let series = vec![
            Series::from_values("a", &[1.0, 2.0, 1.5, 3.0]),
            Series::from_values("b < c", &[0.5, 0.25, 0.75, 0.125]),
        ];
        line_chart(&path, "title & more", "x", "y", &series).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("<svg"));
        assert!(text.trim_end().ends_with("</svg>"));
        assert!(text.contains("title &amp; more"));
        assert!(text.contains("b &lt; c"));
        assert_eq!(text.matches("<path").count(), 2);
    }

    #[test]
    fn markers_injected() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("peaks.svg");
        let series = vec![Series::from_values("sv1", &[0.1, 0.9, 0.2, 0.1])];
        line_chart_with_markers(&path, "spectrum", "Hz", "sv", &series, &[1.0]).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("stroke-dasharray"));
        assert!(text.trim_end().ends_with("</svg>"));
    }

    #[test]
    fn bar_chart_counts_bars() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("bars.svg");
        bar_chart(
            &path,
            "mmsc",
            "MMSC",
            &["ch0".into(), "ch1".into(), "ch2".into()],
            &[0.9, 0.95, 0.85],
        )
        .unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.matches("<rect").count(), 4); // background + 3 bars
    }

    #[test]
    fn degenerate_inputs() {
        let dir = tempdir().unwrap();
        let path = dir.path().join("flat.svg");
        // flat series must not divide by zero
        line_chart(
            &path,
            "flat",
            "x",
            "y",
            &[Series::from_values("c", &[2.0, 2.0, 2.0])],
        )
        .unwrap();
        assert!(std::fs::read_to_string(&path).unwrap().contains("<path"));
        assert!(line_chart(&path, "empty", "x", "y", &[]).is_err());
        assert!(bar_chart(&path, "bad", "y", &["a".into()], &[]).is_err());
    }
}
