//! SVG rendering of runs: full-run track plots and final-state snapshots.
//!
//! The viewBox spans the world bounds (y flipped, since SVG y grows
//! downward). Track polylines break wherever a step crosses the torus seam,
//! so no drawn segment ever jumps across the world.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::engine::TickTrace;
use crate::error::{Error, Result};
use crate::model::{BoidId, Position, WorldBounds};
use crate::sensing::SensorNode;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlotStyle {
    /// One polyline group per boid covering the whole run.
    Tracks,
    /// Final-tick boid markers plus sensor circles, dark when detecting.
    Snapshot,
}

/// Renders a trace as an SVG document.
pub fn plot_tracks(
    traces: &[TickTrace],
    sensors: &[SensorNode],
    bounds: &WorldBounds,
    style: PlotStyle,
) -> Result<String> {
    if traces.is_empty() {
        return Err(Error::EmptyInput("traces"));
    }
    let mut svg = String::new();
    let (w, h) = (bounds.width(), bounds.height());
    writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" viewBox="{} {} {} {}" width="700" height="700">"#,
        fmt(bounds.min_x),
        fmt(bounds.min_y),
        fmt(w),
        fmt(h)
    )
    .expect("string write");
    writeln!(
        svg,
        r##"<rect x="{}" y="{}" width="{}" height="{}" fill="#fbfbf8"/>"##,
        fmt(bounds.min_x),
        fmt(bounds.min_y),
        fmt(w),
        fmt(h)
    )
    .expect("string write");

    match style {
        PlotStyle::Tracks => render_tracks(&mut svg, traces, bounds),
        PlotStyle::Snapshot => render_snapshot(&mut svg, traces, sensors, bounds),
    }

    writeln!(svg, "</svg>").expect("string write");
    Ok(svg)
}

fn render_tracks(svg: &mut String, traces: &[TickTrace], bounds: &WorldBounds) {
    let mut ids: Vec<BoidId> = traces[0].boids.iter().map(|b| b.id).collect();
    ids.sort();

    for id in ids {
        let points: Vec<Position> = traces
            .iter()
            .flat_map(|row| row.boids.iter().filter(|b| b.id == id).map(|b| b.pos))
            .collect();
        let hue = (u64::from(id.0) * 137) % 360;
        writeln!(
            svg,
            r##"<g class="boid-track" data-boid="{id}" fill="none" stroke="hsl({hue},65%,40%)" stroke-width="0.18">"##
        )
        .expect("string write");
        for segment in split_at_wraps(&points, bounds) {
            let coords: Vec<String> = segment
                .iter()
                .map(|p| format!("{},{}", fmt(p.x), fmt(flip_y(p.y, bounds))))
                .collect();
            writeln!(svg, r#"<polyline points="{}"/>"#, coords.join(" ")).expect("string write");
        }
        writeln!(svg, "</g>").expect("string write");
    }
}

fn render_snapshot(
    svg: &mut String,
    traces: &[TickTrace],
    sensors: &[SensorNode],
    bounds: &WorldBounds,
) {
    let last = traces.last().expect("nonempty traces");
    let counts: BTreeMap<_, _> = last
        .detections
        .iter()
        .map(|d| (d.sensor_id, d.count))
        .collect();

    for sensor in sensors {
        let count = counts.get(&sensor.id).copied().unwrap_or(0);
        let (class, fill) = if count > 0 {
            ("sensor detecting", "#1c1c1c")
        } else {
            ("sensor", "#cccccc")
        };
        writeln!(
            svg,
            r##"<circle class="{class}" data-sensor="{}" cx="{}" cy="{}" r="{}" fill="{fill}" fill-opacity="0.45" stroke="#666666" stroke-width="0.08"/>"##,
            sensor.id,
            fmt(sensor.pos.x),
            fmt(flip_y(sensor.pos.y, bounds)),
            fmt(sensor.radius),
        )
        .expect("string write");
    }

    for boid in &last.boids {
        let (ux, uy) = boid.heading.unit_vector();
        let tip = Position::new(boid.pos.x + ux, boid.pos.y + uy);
        writeln!(
            svg,
            r##"<g class="boid" data-boid="{}"><circle cx="{}" cy="{}" r="0.35" fill="#24527a"/><line x1="{}" y1="{}" x2="{}" y2="{}" stroke="#24527a" stroke-width="0.12"/></g>"##,
            boid.id,
            fmt(boid.pos.x),
            fmt(flip_y(boid.pos.y, bounds)),
            fmt(boid.pos.x),
            fmt(flip_y(boid.pos.y, bounds)),
            fmt(tip.x),
            fmt(flip_y(tip.y, bounds)),
        )
        .expect("string write");
    }
}

/// Splits a point series into runs with no seam crossing: a step larger than
/// half the world on either axis starts a new segment.
fn split_at_wraps(points: &[Position], bounds: &WorldBounds) -> Vec<Vec<Position>> {
    let (half_w, half_h) = (bounds.width() / 2.0, bounds.height() / 2.0);
    let mut segments = Vec::new();
    let mut current: Vec<Position> = Vec::new();
    for p in points {
        if let Some(prev) = current.last() {
            if (p.x - prev.x).abs() > half_w || (p.y - prev.y).abs() > half_h {
                segments.push(std::mem::take(&mut current));
            }
        }
        current.push(*p);
    }
    if !current.is_empty() {
        segments.push(current);
    }
    segments
}

fn flip_y(y: f64, bounds: &WorldBounds) -> f64 {
    bounds.min_y + bounds.max_y - y
}

fn fmt(v: f64) -> String {
    format!("{v:.6}")
}
