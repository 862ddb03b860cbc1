//! SVG renderings of a wave field: a heatmap surface, a spatial profile at
//! one time and a time series at one position.

use anyhow::{bail, Result};
use clap::ValueEnum;
use svg::node::element::{Line, Polyline, Rectangle, Text};
use svg::Document;

use crate::io::FieldTable;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlotKind {
    Surface,
    Profile,
    Timeseries,
}

const W: f64 = 640.0;
const H: f64 = 400.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 30.0;
const BOTTOM: f64 = 50.0;

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
}

impl Frame {
    fn new(x: &[f64], y: impl Iterator<Item = f64>) -> Frame {
        let (x0, x1) = bounds(x.iter().copied());
        let (y0, y1) = bounds(y);
        Frame { x0, x1, y0, y1 }
    }

    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x0) / (self.x1 - self.x0) * (W - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        H - BOTTOM - (y - self.y0) / (self.y1 - self.y0) * (H - TOP - BOTTOM)
    }
}

fn bounds(v: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = v.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
    if !lo.is_finite() || !hi.is_finite() {
        return (0.0, 1.0);
    }
    if hi - lo < 1e-300 {
        let pad = if lo == 0.0 { 1.0 } else { lo.abs() * 0.1 };
        return (lo - pad, hi + pad);
    }
    (lo, hi)
}

fn text(x: f64, y: f64, anchor: &str, s: String) -> Text {
    Text::new(s)
        .set("x", x)
        .set("y", y)
        .set("font-family", "sans-serif")
        .set("font-size", 12)
        .set("text-anchor", anchor)
}

fn axes(doc: Document, f: &Frame, title: &str, xlabel: &str, ylabel: &str) -> Document {
    let stroke = |l: Line| l.set("stroke", "black").set("stroke-width", 1);
    let bottom = H - BOTTOM;
    let mut doc = doc
        .add(stroke(
            Line::new()
                .set("x1", LEFT)
                .set("y1", bottom)
                .set("x2", W - RIGHT)
                .set("y2", bottom),
        ))
        .add(stroke(
            Line::new()
                .set("x1", LEFT)
                .set("y1", TOP)
                .set("x2", LEFT)
                .set("y2", bottom),
        ))
        .add(text(W / 2.0, 18.0, "middle", title.to_string()))
        .add(text(W / 2.0, H - 10.0, "middle", xlabel.to_string()))
        .add(text(16.0, H / 2.0, "middle", ylabel.to_string()).set("transform", format!("rotate(-90 16 {})", H / 2.0)));
    for k in 0..=4 {
        let a = k as f64 / 4.0;
        let x = f.x0 + a * (f.x1 - f.x0);
        let y = f.y0 + a * (f.y1 - f.y0);
        doc = doc
            .add(text(f.px(x), bottom + 16.0, "middle", format!("{x:.3}")))
            .add(text(LEFT - 4.0, f.py(y) + 4.0, "end", format!("{y:.3e}")));
    }
    doc
}

fn line_plot(x: &[f64], y: &[f64], title: &str, xlabel: &str, ylabel: &str) -> String {
    let f = Frame::new(x, y.iter().copied());
    let points: Vec<String> = x
        .iter()
        .zip(y)
        .map(|(a, b)| format!("{:.2},{:.2}", f.px(*a), f.py(*b)))
        .collect();
    let doc = Document::new()
        .set("viewBox", (0, 0, W, H))
        .set("width", W)
        .set("height", H);
    let doc = axes(doc, &f, title, xlabel, ylabel).add(
        Polyline::new()
            .set("points", points.join(" "))
            .set("fill", "none")
            .set("stroke", "#1f4e9c")
            .set("stroke-width", 1.5),
    );
    doc.to_string()
}

/// Diverging blue-white-red colour for `v` in `[-1, 1]`.
fn colour(v: f64) -> String {
    let v = v.clamp(-1.0, 1.0);
    let (r, g, b) = if v >= 0.0 {
        (255.0, 255.0 * (1.0 - v), 255.0 * (1.0 - v))
    } else {
        (255.0 * (1.0 + v), 255.0 * (1.0 + v), 255.0)
    };
    format!("rgb({},{},{})", r.round() as u8, g.round() as u8, b.round() as u8)
}

fn surface(table: &FieldTable) -> String {
    let f = Frame::new(&table.xi, table.times.iter().copied());
    let scale = table.delta_theta.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs()));
    let scale = if scale > 0.0 { scale } else { 1.0 };
    // keep the document small on long runs
    let t_stride = table.times.len().div_ceil(200).max(1);
    let x_stride = table.xi.len().div_ceil(200).max(1);
    let cell_w = (f.px(table.xi[x_stride.min(table.xi.len() - 1)]) - f.px(table.xi[0]))
        .abs()
        .max(0.5);
    let cell_h = if table.times.len() > t_stride {
        (f.py(table.times[0]) - f.py(table.times[t_stride])).abs().max(0.5)
    } else {
        H - TOP - BOTTOM
    };
    let mut doc = Document::new()
        .set("viewBox", (0, 0, W, H))
        .set("width", W)
        .set("height", H);
    for k in (0..table.times.len()).step_by(t_stride) {
        let y = f.py(table.times[k]) - cell_h;
        for i in (0..table.xi.len()).step_by(x_stride) {
            doc = doc.add(
                Rectangle::new()
                    .set("x", format!("{:.2}", f.px(table.xi[i])))
                    .set("y", format!("{:.2}", y.max(TOP)))
                    .set("width", format!("{cell_w:.2}"))
                    .set("height", format!("{cell_h:.2}"))
                    .set("fill", colour(table.delta_theta[k][i] / scale)),
            );
        }
    }
    let title = format!("delta theta (rad), colour scale +/-{scale:.3e}");
    axes(doc, &f, &title, "xi (miles)", "t (s)").to_string()
}

fn nearest(values: &[f64], at: f64) -> usize {
    values
        .iter()
        .enumerate()
        .min_by(|a, b| (a.1 - at).abs().total_cmp(&(b.1 - at).abs()))
        .map(|(i, _)| i)
        .unwrap_or(0)
}

fn check_range(what: &str, values: &[f64], at: f64) -> Result<()> {
    let (lo, hi) = (values[0], values[values.len() - 1]);
    let slack = 1e-9 * (hi - lo).abs().max(1.0);
    if !(at >= lo - slack && at <= hi + slack) {
        bail!("{what} = {at} is outside the recorded range [{lo}, {hi}]");
    }
    Ok(())
}

/// Renders `kind`; `at` is a time (profile) or a position (time series).
pub fn render(table: &FieldTable, kind: PlotKind, at: Option<f64>) -> Result<String> {
    match kind {
        PlotKind::Surface => Ok(surface(table)),
        PlotKind::Profile => {
            let t = at.unwrap_or(table.times[table.times.len() - 1]);
            check_range("t", &table.times, t)?;
            let k = nearest(&table.times, t);
            let title = format!("delta theta at t = {:.4} s", table.times[k]);
            Ok(line_plot(
                &table.xi,
                &table.delta_theta[k],
                &title,
                "xi (miles)",
                "delta theta (rad)",
            ))
        }
        PlotKind::Timeseries => {
            let x = at.unwrap_or(table.xi[0]);
            check_range("xi", &table.xi, x)?;
            let i = nearest(&table.xi, x);
            let chi: Vec<f64> = table.chi.iter().map(|c| c[i]).collect();
            let title = format!("chi at xi = {:.3} miles", table.xi[i]);
            Ok(line_plot(&table.times, &chi, &title, "t (s)", "chi (rad/s)"))
        }
    }
}
