//! The proximity-sensor network: random deployment, per-tick boid counting,
//! and detection reporting.
//!
//! Sensors are sensing-only. They never move, never communicate, and carry
//! no energy model; each one just counts the boids inside its radius.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{distance, BoidState, Position, WorldBounds};

/// Sub-stream of the root seed reserved for sensor deployment, so changing
/// the sensor count never perturbs boid initialization.
pub const SENSOR_STREAM: u64 = 1;

/// Identifier for one sensor node.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct SensorId(pub u32);

impl std::fmt::Display for SensorId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// A fixed proximity sensor with its most recent per-tick boid count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SensorNode {
    pub id: SensorId,
    pub pos: Position,
    pub radius: f64,
    pub count_nearby_boids: u32,
}

/// One sensor's reading for one tick.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionRecord {
    pub tick: u64,
    pub sensor_id: SensorId,
    pub count: u32,
    pub detecting: bool,
}

/// Deploys `n` sensors uniformly at random over the world rectangle.
///
/// Positions come from the sensor sub-stream of the given seed, so the same
/// (seed, n, bounds) always yields the same deployment. Ids run 0..n-1.
pub fn deploy_sensors(
    n: u32,
    radius: f64,
    bounds: &WorldBounds,
    seed: u64,
) -> Result<Vec<SensorNode>> {
    if !radius.is_finite() || radius <= 0.0 {
        return Err(Error::invalid_config("sensor_radius", "must be > 0"));
    }
    bounds.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(SENSOR_STREAM);
    let mut sensors = Vec::with_capacity(n as usize);
    for i in 0..n {
        let x = rng.random_range(bounds.min_x..bounds.max_x);
        let y = rng.random_range(bounds.min_y..bounds.max_y);
        sensors.push(SensorNode {
            id: SensorId(i),
            pos: Position::new(x, y),
            radius,
            count_nearby_boids: 0,
        });
    }
    Ok(sensors)
}

/// Number of boids at or inside the sensor's radius. The boundary is
/// inclusive, mirroring the flockmate search.
pub fn count_nearby_boids(sensor: &SensorNode, boids: &[BoidState], bounds: &WorldBounds) -> u32 {
    boids
        .iter()
        .filter(|b| distance(sensor.pos, b.pos, bounds) <= sensor.radius)
        .count() as u32
}

/// Reads every sensor against the current boid positions, updating each
/// sensor's stored count and returning one record per sensor.
///
/// Mutates sensor counts; call it from exactly one writer per tick.
pub fn sense_all(
    sensors: &mut [SensorNode],
    boids: &[BoidState],
    tick: u64,
    bounds: &WorldBounds,
) -> Vec<DetectionRecord> {
    sensors
        .iter_mut()
        .map(|sensor| {
            let count = count_nearby_boids(sensor, boids, bounds);
            sensor.count_nearby_boids = count;
            DetectionRecord {
                tick,
                sensor_id: sensor.id,
                count,
                detecting: count > 0,
            }
        })
        .collect()
}
