//! Quantitative flocking indices computed from traces.
//!
//! Flock detection by eyeballing a screen does not make a test suite, so
//! this module measures it instead: the heading order parameter, the mean
//! flockmate count, and the connected components of the vision graph (the
//! operational definition of "a flock"), plus their per-component alignment.

use serde::{Deserialize, Serialize};

use crate::engine::TickTrace;
use crate::error::{Error, Result};
use crate::model::{distance, BoidId, BoidState, FlockParams, WorldBounds};
use crate::sensing::SensorId;

/// The emergence indices for one tick.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TickMetrics {
    pub tick: u64,
    /// Magnitude of the mean unit-heading vector, in [0, 1].
    pub polarization: f64,
    /// Mean number of flockmates (vision-graph degree) per boid.
    pub mean_flockmates: f64,
    /// Number of connected components of the vision graph.
    pub n_components: usize,
    /// Size-weighted mean of per-component polarization, in [0, 1].
    pub mean_component_polarization: f64,
}

/// Per-sensor detection totals over a whole run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SensorSummary {
    pub sensor_id: SensorId,
    /// Number of ticks with at least one boid in range.
    pub detection_ticks: u64,
    /// Sum of per-tick counts.
    pub total_count: u64,
}

/// Order parameter: magnitude of the mean unit-heading vector. 1 when all
/// headings agree, near 0 when they cancel.
pub fn polarization(boids: &[BoidState]) -> Result<f64> {
    if boids.is_empty() {
        return Err(Error::EmptyInput("boids"));
    }
    let (sum_x, sum_y) = boids.iter().fold((0.0, 0.0), |(sx, sy), b| {
        let (x, y) = b.heading.unit_vector();
        (sx + x, sy + y)
    });
    Ok(sum_x.hypot(sum_y) / boids.len() as f64)
}

/// Connected components of the graph with an edge between every pair of
/// boids at distance <= vision. Components are sorted by their smallest
/// member id, members sorted ascending; every boid lands in exactly one.
pub fn vision_components(
    boids: &[BoidState],
    params: &FlockParams,
    bounds: &WorldBounds,
) -> Vec<Vec<BoidId>> {
    let n = boids.len();
    let mut parent: Vec<usize> = (0..n).collect();

    fn find(parent: &mut [usize], i: usize) -> usize {
        let mut root = i;
        while parent[root] != root {
            root = parent[root];
        }
        let mut cur = i;
        while parent[cur] != root {
            let next = parent[cur];
            parent[cur] = root;
            cur = next;
        }
        root
    }

    for i in 0..n {
        for j in (i + 1)..n {
            if distance(boids[i].pos, boids[j].pos, bounds) <= params.vision {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri] = rj;
                }
            }
        }
    }

    let mut groups: std::collections::BTreeMap<usize, Vec<BoidId>> =
        std::collections::BTreeMap::new();
    for (i, boid) in boids.iter().enumerate() {
        let root = find(&mut parent, i);
        groups.entry(root).or_default().push(boid.id);
    }
    let mut components: Vec<Vec<BoidId>> = groups.into_values().collect();
    for component in &mut components {
        component.sort();
    }
    components.sort_by_key(|c| c[0]);
    components
}

/// Computes every index for one trace row. The row must be well-formed
/// (nonempty boid list with unique ids).
pub fn compute_tick_metrics(
    row: &TickTrace,
    params: &FlockParams,
    bounds: &WorldBounds,
) -> TickMetrics {
    assert!(!row.boids.is_empty(), "trace row has no boids");
    let boids = &row.boids;
    let n = boids.len();

    // Degree counting is independent of the flocking module's search; the
    // two are cross-checked in tests.
    let mut degree_sum = 0usize;
    for i in 0..n {
        for j in (i + 1)..n {
            if distance(boids[i].pos, boids[j].pos, bounds) <= params.vision {
                degree_sum += 2;
            }
        }
    }

    let components = vision_components(boids, params, bounds);
    let by_id: std::collections::BTreeMap<BoidId, &BoidState> =
        boids.iter().map(|b| (b.id, b)).collect();
    let mut weighted = 0.0;
    for component in &components {
        let members: Vec<BoidState> = component.iter().map(|id| *by_id[id]).collect();
        let p = polarization(&members).expect("components are nonempty");
        weighted += p * members.len() as f64;
    }

    TickMetrics {
        tick: row.tick,
        polarization: polarization(boids).expect("nonempty by assertion"),
        mean_flockmates: degree_sum as f64 / n as f64,
        n_components: components.len(),
        mean_component_polarization: weighted / n as f64,
    }
}

/// Aggregates detection activity per sensor over a whole trace.
pub fn detection_summary(traces: &[TickTrace]) -> Result<Vec<SensorSummary>> {
    if traces.is_empty() {
        return Err(Error::EmptyInput("traces"));
    }
    let mut totals: std::collections::BTreeMap<SensorId, SensorSummary> =
        std::collections::BTreeMap::new();
    for row in traces {
        for d in &row.detections {
            let entry = totals.entry(d.sensor_id).or_insert(SensorSummary {
                sensor_id: d.sensor_id,
                detection_ticks: 0,
                total_count: 0,
            });
            if d.detecting {
                entry.detection_ticks += 1;
            }
            entry.total_count += u64::from(d.count);
        }
    }
    Ok(totals.into_values().collect())
}
