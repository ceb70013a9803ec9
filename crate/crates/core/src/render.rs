//! Deterministic SVG output: stable element ordering (canvas order, plan
//! order, then row order), fixed decimal precision, and one axis or legend
//! per (canvas, scaled non-constant channel) pair.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::Serialize;

use crate::compile::{
    ChannelOut, CompilationPlan, CompileError, Materialized, Scene,
};
use crate::scale::{self, ScaleOutput, TrainedDomain, TrainedRange, TrainedScale};
use crate::spec::{Channel, ChannelValue, ScaleKind, SpecDocument};
use crate::value::Value;

/// One axis or legend the renderer draws: the clause-3 sub-check for
/// attribute-domain preservation.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxisEntry {
    pub canvas: usize,
    pub channel: &'static str,
    pub kind: &'static str,
    pub view: String,
    pub scale: String,
}

/// Axes and legends for every (canvas, scaled non-constant channel) pair.
/// Identity scales pass data through untouched and get no axis; the first
/// view (in declaration order) contributing to a pair names its scale.
pub fn axis_plan(doc: &SpecDocument, m: &Materialized) -> Vec<AxisEntry> {
    let mut plan: BTreeMap<(usize, Channel), AxisEntry> = BTreeMap::new();
    for (vi, view) in doc.views.iter().enumerate() {
        let table = &m.scene.marks[vi];
        let mut canvases: Vec<usize> = table.canvas_ids.clone();
        canvases.sort_unstable();
        canvases.dedup();
        for (&channel, cv) in &view.channels {
            let ChannelValue::Map { scale, .. } = cv else {
                continue;
            };
            let key = match scale {
                Some(s) => s.clone(),
                None => crate::compile::anon_scale_key(&view.name, channel),
            };
            let Some(trained) = m.scales.get(&key) else {
                continue;
            };
            if trained.kind == ScaleKind::Identity {
                continue;
            }
            let kind = match channel.axis() {
                Some(crate::spec::Axis::X) => "axis-x",
                Some(crate::spec::Axis::Y) => "axis-y",
                None => "legend",
            };
            for &canvas in &canvases {
                plan.entry((canvas, channel)).or_insert_with(|| AxisEntry {
                    canvas,
                    channel: channel.name(),
                    kind,
                    view: view.name.clone(),
                    scale: key.clone(),
                });
            }
        }
    }
    plan.into_values().collect()
}

fn fmt(v: f64) -> String {
    format!("{v:.3}")
}

fn fmt_tick(v: f64) -> String {
    let s = format!("{v:.3}");
    let trimmed = s.trim_end_matches('0').trim_end_matches('.');
    if trimmed.is_empty() {
        "0".to_string()
    } else {
        trimmed.to_string()
    }
}

fn escape(text: &str) -> String {
    text.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}

fn color_of(row: &BTreeMap<Channel, ChannelOut>, fallback: &str) -> String {
    match row.get(&Channel::Color) {
        Some(ChannelOut::Str(s)) => s.clone(),
        Some(ChannelOut::Px(v)) => fmt(*v),
        None => fallback.to_string(),
    }
}

fn opacity_attr(row: &BTreeMap<Channel, ChannelOut>) -> String {
    match row.get(&Channel::Opacity) {
        Some(ChannelOut::Px(v)) => format!(" opacity=\"{}\"", fmt(*v)),
        _ => String::new(),
    }
}

fn px(row: &BTreeMap<Channel, ChannelOut>, c: Channel) -> f64 {
    match row.get(&c) {
        Some(ChannelOut::Px(v)) => *v,
        _ => 0.0,
    }
}

/// Ticks for an axis: five evenly spaced values for linear scales, one per
/// category for ordinal scales. Each tick is (pixel position, label).
fn ticks(scale: &TrainedScale) -> Vec<(f64, String)> {
    match (&scale.domain, &scale.range) {
        (TrainedDomain::Interval(lo, hi), TrainedRange::Interval(..)) => (0..5)
            .map(|i| {
                let v = lo + (hi - lo) * i as f64 / 4.0;
                let pos = match scale::apply(scale, &Value::Real(v)) {
                    Ok(ScaleOutput::Px(p)) => p,
                    _ => 0.0,
                };
                (pos, fmt_tick(v))
            })
            .collect(),
        (TrainedDomain::Categories(cats), TrainedRange::Interval(..)) => cats
            .iter()
            .map(|c| {
                let pos = match scale::apply(scale, c) {
                    Ok(ScaleOutput::Px(p)) => p,
                    _ => 0.0,
                };
                (pos, c.to_string())
            })
            .collect(),
        _ => Vec::new(),
    }
}

fn render_axis(out: &mut String, entry: &AxisEntry, scale: &TrainedScale, w: f64, h: f64) {
    match entry.kind {
        "axis-x" => {
            let _ = writeln!(
                out,
                "  <line x1=\"0\" y1=\"{0}\" x2=\"{1}\" y2=\"{0}\" stroke=\"black\" stroke-width=\"1\"/>",
                fmt(h),
                fmt(w)
            );
            for (pos, label) in ticks(scale) {
                let _ = writeln!(
                    out,
                    "  <line x1=\"{0}\" y1=\"{1}\" x2=\"{0}\" y2=\"{2}\" stroke=\"black\" stroke-width=\"1\"/>",
                    fmt(pos),
                    fmt(h),
                    fmt(h + 4.0)
                );
                let _ = writeln!(
                    out,
                    "  <text x=\"{}\" y=\"{}\" font-size=\"10\" text-anchor=\"middle\" fill=\"black\">{}</text>",
                    fmt(pos),
                    fmt(h + 14.0),
                    escape(&label)
                );
            }
        }
        "axis-y" => {
            let _ = writeln!(
                out,
                "  <line x1=\"0\" y1=\"0\" x2=\"0\" y2=\"{}\" stroke=\"black\" stroke-width=\"1\"/>",
                fmt(h)
            );
            for (pos, label) in ticks(scale) {
                let _ = writeln!(
                    out,
                    "  <line x1=\"-4\" y1=\"{0}\" x2=\"0\" y2=\"{0}\" stroke=\"black\" stroke-width=\"1\"/>",
                    fmt(pos)
                );
                let _ = writeln!(
                    out,
                    "  <text x=\"-6\" y=\"{}\" font-size=\"10\" text-anchor=\"end\" fill=\"black\">{}</text>",
                    fmt(pos + 3.0),
                    escape(&label)
                );
            }
        }
        _ => {
            // Legend: palette swatches for categorical color, otherwise the
            // trained domain as text.
            let x = w + 6.0;
            let _ = writeln!(
                out,
                "  <text x=\"{}\" y=\"10\" font-size=\"10\" fill=\"black\">{}</text>",
                fmt(x),
                escape(&entry.scale)
            );
            match (&scale.domain, &scale.range) {
                (TrainedDomain::Categories(cats), TrainedRange::Palette(palette)) => {
                    for (i, cat) in cats.iter().enumerate() {
                        let y = 18.0 + 14.0 * i as f64;
                        let _ = writeln!(
                            out,
                            "  <rect x=\"{}\" y=\"{}\" width=\"10\" height=\"10\" fill=\"{}\"/>",
                            fmt(x),
                            fmt(y),
                            escape(&palette[i % palette.len()])
                        );
                        let _ = writeln!(
                            out,
                            "  <text x=\"{}\" y=\"{}\" font-size=\"10\" fill=\"black\">{}</text>",
                            fmt(x + 14.0),
                            fmt(y + 9.0),
                            escape(&cat.to_string())
                        );
                    }
                }
                (TrainedDomain::Interval(lo, hi), _) => {
                    let _ = writeln!(
                        out,
                        "  <text x=\"{}\" y=\"24\" font-size=\"10\" fill=\"black\">{} – {}</text>",
                        fmt(x),
                        fmt_tick(*lo),
                        fmt_tick(*hi)
                    );
                }
                (TrainedDomain::Categories(cats), _) => {
                    for (i, cat) in cats.iter().enumerate() {
                        let _ = writeln!(
                            out,
                            "  <text x=\"{}\" y=\"{}\" font-size=\"10\" fill=\"black\">{}</text>",
                            fmt(x),
                            fmt(24.0 + 14.0 * i as f64),
                            escape(&cat.to_string())
                        );
                    }
                }
                _ => {}
            }
        }
    }
}

fn render_mark(out: &mut String, scene: &Scene, view_idx: usize, row: usize) {
    let table = &scene.marks[view_idx];
    let cells = &table.rows[row];
    let x = px(cells, Channel::X);
    let y = px(cells, Channel::Y);
    let opacity = opacity_attr(cells);
    use crate::spec::MarkType::*;
    match table.mark {
        Point | Circle => {
            let _ = writeln!(
                out,
                "  <circle cx=\"{}\" cy=\"{}\" r=\"3\" fill=\"{}\"{}/>",
                fmt(x),
                fmt(y),
                escape(&color_of(cells, "black")),
                opacity
            );
        }
        Square | Rect | Bbox | Bar => {
            let w = px(cells, Channel::W);
            let h = px(cells, Channel::H);
            let fill = if table.mark == Bbox {
                "none".to_string()
            } else {
                color_of(cells, "#cccccc")
            };
            let _ = writeln!(
                out,
                "  <rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"{}\" stroke=\"black\" stroke-width=\"1\"{}/>",
                fmt(x - w / 2.0),
                fmt(y - h / 2.0),
                fmt(w),
                fmt(h),
                escape(&fill),
                opacity
            );
        }
        Line | Link => {
            let x2 = px(cells, Channel::X2);
            let y2 = px(cells, Channel::Y2);
            let _ = writeln!(
                out,
                "  <line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"{}\" stroke-width=\"1\"{}/>",
                fmt(x),
                fmt(y),
                fmt(x2),
                fmt(y2),
                escape(&color_of(cells, "black")),
                opacity
            );
        }
        Label | Text => {
            let dx = px(cells, Channel::Dx);
            let dy = px(cells, Channel::Dy);
            let text = match cells.get(&Channel::Text) {
                Some(ChannelOut::Str(s)) => s.clone(),
                Some(ChannelOut::Px(v)) => fmt_tick(*v),
                None => String::new(),
            };
            let _ = writeln!(
                out,
                "  <text x=\"{}\" y=\"{}\" font-size=\"10\" fill=\"{}\"{}>{}</text>",
                fmt(x + dx),
                fmt(y + dy),
                escape(&color_of(cells, "black")),
                opacity,
                escape(&text)
            );
        }
    }
}

/// Emit the compiled scene as SVG 1.1. Rendering a scene with unresolved
/// auto() channels is an error.
pub fn render(
    doc: &SpecDocument,
    m: &Materialized,
    plan: &CompilationPlan,
) -> Result<Vec<u8>, CompileError> {
    for table in &m.scene.marks {
        if !table.unresolved_auto.is_empty() {
            return Err(CompileError::UnresolvedAuto(table.view.clone()));
        }
    }

    let axes = axis_plan(doc, m);
    let scene = &m.scene;
    let mut out = String::new();
    let _ = writeln!(out, "<?xml version=\"1.0\" encoding=\"UTF-8\"?>");
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" viewBox=\"0 0 {} {}\" font-family=\"sans-serif\">",
        fmt_tick(doc.canvas.width),
        fmt_tick(doc.canvas.height),
        fmt_tick(doc.canvas.width),
        fmt_tick(doc.canvas.height)
    );

    for (canvas_id, canvas) in scene.canvases.iter().enumerate() {
        let (ox, oy) = scene.canvas_origin(canvas_id);
        if ox == 0.0 && oy == 0.0 {
            let _ = writeln!(out, "<g>");
        } else {
            let _ = writeln!(out, "<g transform=\"translate({},{})\">", fmt(ox), fmt(oy));
        }
        for entry in axes.iter().filter(|a| a.canvas == canvas_id) {
            if let Some(scale) = m.scales.get(&entry.scale) {
                render_axis(&mut out, entry, scale, canvas.extent.w, canvas.extent.h);
            }
        }
        for &vi in &plan.order {
            let table = &scene.marks[vi];
            for row in 0..table.len() {
                if table.canvas_ids[row] == canvas_id {
                    render_mark(&mut out, scene, vi, row);
                }
            }
        }
        let _ = writeln!(out, "</g>");
    }
    let _ = writeln!(out, "</svg>");
    Ok(out.into_bytes())
}
