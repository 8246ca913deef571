use std::collections::BTreeMap;
use std::fmt::Write;

use serde::{Deserialize, Serialize};

use super::smooth_path;
use crate::ingest::VehicleId;
use crate::plg::Plg;
use crate::sim::{Episode, Termination};
use crate::Point;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RenderStyle {
    pub width: f64,
    pub height: f64,
    pub margin: f64,
    pub node_radius: f64,
    pub edge_width: f64,
    /// Opacity given to an edge of probability 1; lower probabilities scale linearly.
    pub max_opacity: f64,
    pub vehicle_colours: Vec<String>,
    /// Ticks between time labels on scenario paths.
    pub label_stride: usize,
    /// Moving-average window for scenario paths, ticks.
    pub window: usize,
}

impl Default for RenderStyle {
    fn default() -> Self {
        Self {
            width: 1000.0,
            height: 400.0,
            margin: 20.0,
            node_radius: 1.5,
            edge_width: 1.0,
            max_opacity: 1.0,
            vehicle_colours: ["#d62728", "#1f77b4", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"]
                .iter()
                .map(|s| s.to_string())
                .collect(),
            label_stride: 5,
            window: 5,
        }
    }
}

/// Maps world metres onto the canvas with a uniform scale and y pointing up.
struct Frame {
    min: Point,
    scale: f64,
    height: f64,
    margin: f64,
}

impl Frame {
    fn fit(plg: &Plg, style: &RenderStyle) -> Self {
        let mut min = Point::new(f64::INFINITY, f64::INFINITY);
        let mut max = Point::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for n in plg.nodes() {
            min = Point::new(min.x.min(n.position.x), min.y.min(n.position.y));
            max = Point::new(max.x.max(n.position.x), max.y.max(n.position.y));
        }
        if plg.node_count() == 0 {
            min = Point::new(0.0, 0.0);
            max = Point::new(1.0, 1.0);
        }
        let span_x = (max.x - min.x).max(1e-9);
        let span_y = (max.y - min.y).max(1e-9);
        let scale = ((style.width - 2.0 * style.margin) / span_x)
            .min((style.height - 2.0 * style.margin) / span_y);
        Self {
            min,
            scale,
            height: style.height,
            margin: style.margin,
        }
    }

    fn map(&self, p: Point) -> (f64, f64) {
        (
            self.margin + (p.x - self.min.x) * self.scale,
            self.height - self.margin - (p.y - self.min.y) * self.scale,
        )
    }
}

fn header(out: &mut String, style: &RenderStyle) {
    let _ = writeln!(
        out,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{:.3}" height="{:.3}" viewBox="0 0 {:.3} {:.3}">"#,
        style.width, style.height, style.width, style.height
    );
    let _ = writeln!(
        out,
        r#"<rect x="0" y="0" width="{:.3}" height="{:.3}" fill="white"/>"#,
        style.width, style.height
    );
}

fn edges(out: &mut String, plg: &Plg, frame: &Frame, style: &RenderStyle, scale_opacity: f64) {
    for (from, to, _) in plg.edges() {
        let (x1, y1) = frame.map(plg.position(from));
        let (x2, y2) = frame.map(plg.position(to));
        let opacity = (plg.prob(from, to) * style.max_opacity * scale_opacity).clamp(0.0, 1.0);
        let _ = writeln!(
            out,
            r#"<line x1="{x1:.3}" y1="{y1:.3}" x2="{x2:.3}" y2="{y2:.3}" stroke="black" stroke-width="{:.3}" stroke-opacity="{opacity:.3}"/>"#,
            style.edge_width
        );
    }
}

/// Nodes as dots and edges shaded by transition probability.
pub fn render_plg(plg: &Plg, style: &RenderStyle) -> String {
    let frame = Frame::fit(plg, style);
    let mut out = String::new();
    header(&mut out, style);
    edges(&mut out, plg, &frame, style, 1.0);
    for n in plg.nodes() {
        let (x, y) = frame.map(n.position);
        let _ = writeln!(
            out,
            r##"<circle cx="{x:.3}" cy="{y:.3}" r="{:.3}" fill="#444444"/>"##,
            style.node_radius
        );
    }
    out.push_str("</svg>\n");
    out
}

/// Smoothed vehicle paths over a faint graph, with tick labels and the collision
/// node marked.
pub fn render_scenario(episode: &Episode, plg: &Plg, style: &RenderStyle) -> String {
    let frame = Frame::fit(plg, style);
    let mut out = String::new();
    header(&mut out, style);
    edges(&mut out, plg, &frame, style, 0.25);
    let mut tracks: BTreeMap<VehicleId, Vec<(usize, Point)>> = BTreeMap::new();
    for r in &episode.records {
        tracks
            .entry(r.vehicle_id)
            .or_default()
            .push((r.tick, Point::new(r.x, r.y)));
    }
    let stride = style.label_stride.max(1);
    for (k, (id, track)) in tracks.iter().enumerate() {
        let colour = style
            .vehicle_colours
            .get(k % style.vehicle_colours.len().max(1))
            .map_or("black", String::as_str);
        let raw: Vec<Point> = track.iter().map(|(_, p)| *p).collect();
        let smooth = smooth_path(&raw, style.window);
        let pts: Vec<String> = smooth
            .iter()
            .map(|p| {
                let (x, y) = frame.map(*p);
                format!("{x:.3},{y:.3}")
            })
            .collect();
        let _ = writeln!(
            out,
            r#"<polyline points="{}" fill="none" stroke="{colour}" stroke-width="2.000" data-vehicle="{id}"/>"#,
            pts.join(" ")
        );
        for ((tick, _), p) in track.iter().zip(&smooth) {
            if tick % stride == 0 {
                let (x, y) = frame.map(*p);
                let _ = writeln!(
                    out,
                    r#"<text x="{x:.3}" y="{:.3}" font-size="8" fill="{colour}">t={tick}</text>"#,
                    y - 4.0
                );
            }
        }
    }
    if let Termination::Collision { node, .. } = episode.termination {
        let (x, y) = frame.map(plg.position(node));
        let _ = writeln!(
            out,
            r#"<circle class="collision" cx="{x:.3}" cy="{y:.3}" r="{:.3}" fill="none" stroke="red" stroke-width="2.000"/>"#,
            4.0 * style.node_radius
        );
    }
    out.push_str("</svg>\n");
    out
}
