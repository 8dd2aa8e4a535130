//! Simulation lifecycle: seeded initialization, the synchronous tick loop,
//! runtime invariant checking, and trace accumulation.
//!
//! The update is two-phase and synchronous: every boid's turn decision is
//! computed against the immutable start-of-tick snapshot, then all headings
//! are applied and all boids advance. Together with id-sorted iteration this
//! makes a run a pure function of its config, independent of in-memory boid
//! ordering.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flocking::{advance, flock_step, TurnDecision};
use crate::model::{
    BoidId, BoidState, FlockParams, Heading, Position, WorldBounds,
};
use crate::sensing::{deploy_sensors, sense_all, DetectionRecord, SensorId, SensorNode};

/// Identifier for the generator embedded in trace metadata. ChaCha output is
/// stable across platforms, which is what the determinism contract needs.
pub const RNG_ID: &str = "chacha8";

/// Sub-stream of the root seed used for boid initialization.
pub const BOID_STREAM: u64 = 0;

/// What to do with the schema predicates each tick.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum InvariantMode {
    /// Fail the run on the first violated predicate.
    Enforce,
    /// Keep running, collect violations.
    Record,
    /// Skip the checks.
    Off,
}

impl std::fmt::Display for InvariantMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            InvariantMode::Enforce => write!(f, "enforce"),
            InvariantMode::Record => write!(f, "record"),
            InvariantMode::Off => write!(f, "off"),
        }
    }
}

/// Everything a run depends on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub bounds: WorldBounds,
    pub flock: FlockParams,
    pub n_boids: u32,
    pub n_sensors: u32,
    pub sensor_radius: f64,
    pub seed: u64,
    pub ticks: u64,
    pub invariant_mode: InvariantMode,
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        self.bounds.validate()?;
        self.flock.validate()?;
        if self.ticks >= 1 && self.n_boids < 1 {
            return Err(Error::invalid_config(
                "n_boids",
                "must be >= 1 when ticks >= 1",
            ));
        }
        if !self.sensor_radius.is_finite() || self.sensor_radius <= 0.0 {
            return Err(Error::invalid_config("sensor_radius", "must be > 0"));
        }
        Ok(())
    }
}

/// Full record of one tick: every boid, every sensor reading, and the rule
/// each boid applied to get here. `decisions[i]` belongs to `boids[i]`;
/// both lists are sorted by id. The tick-0 entry carries the initial state
/// with all decisions set to `none`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TickTrace {
    pub tick: u64,
    pub boids: Vec<BoidState>,
    pub detections: Vec<DetectionRecord>,
    pub decisions: Vec<TurnDecision>,
}

/// Live simulation state. Fields are public for inspection and for
/// deliberately constructing broken states in tests; `check_invariants` is
/// the judge of validity, not the type system.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulationState {
    pub config: SimConfig,
    pub tick: u64,
    pub boids: Vec<BoidState>,
    pub sensors: Vec<SensorNode>,
    /// Deployment positions, kept to check sensor immobility.
    pub sensor_home: Vec<Position>,
    /// Violations collected in `Record` mode.
    pub recorded_violations: Vec<Violation>,
}

/// The entity a violated predicate points at.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum Entity {
    Boid(BoidId),
    Sensor(SensorId),
    World,
}

impl std::fmt::Display for Entity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Entity::Boid(id) => write!(f, "boid {id}"),
            Entity::Sensor(id) => write!(f, "sensor {id}"),
            Entity::World => write!(f, "world"),
        }
    }
}

/// One failed schema predicate: where, which, and the offending values.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub tick: u64,
    pub entity: Entity,
    pub predicate: &'static str,
    pub detail: String,
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "tick {}: {} violates `{}` ({})",
            self.tick, self.entity, self.predicate, self.detail
        )
    }
}

/// Result of a full run: one trace entry per tick (initial state included),
/// the sensor deployment (constant across the run), and whatever violations
/// `Record` mode collected.
#[derive(Debug, Clone, PartialEq)]
pub struct RunOutput {
    pub traces: Vec<TickTrace>,
    pub sensors: Vec<SensorNode>,
    pub violations: Vec<Violation>,
}

/// Builds the initial state: boid positions uniform over the world, headings
/// uniform over [0, 360), sensors deployed from their own sub-stream of the
/// same seed. Identical configs give identical states.
pub fn init_simulation(config: &SimConfig) -> Result<SimulationState> {
    config.validate()?;
    let bounds = config.bounds;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(BOID_STREAM);
    let boids: Vec<BoidState> = (0..config.n_boids)
        .map(|i| {
            let x = rng.random_range(bounds.min_x..bounds.max_x);
            let y = rng.random_range(bounds.min_y..bounds.max_y);
            let heading = rng.random_range(0.0..360.0);
            BoidState {
                id: BoidId(i),
                pos: Position::new(x, y),
                heading: Heading::new(heading).expect("uniform draw is finite"),
            }
        })
        .collect();

    let mut sensors = deploy_sensors(config.n_sensors, config.sensor_radius, &bounds, config.seed)?;
    // Prime the counts so the initial state already satisfies the sensing
    // predicate relative to the initial positions.
    sense_all(&mut sensors, &boids, 0, &bounds);
    let sensor_home = sensors.iter().map(|s| s.pos).collect();

    Ok(SimulationState {
        config: *config,
        tick: 0,
        boids,
        sensors,
        sensor_home,
        recorded_violations: Vec::new(),
    })
}

impl SimulationState {
    /// Snapshot of the current state as a trace entry, rows sorted by id.
    /// `decisions` must be aligned with the id-sorted boid order.
    pub fn capture(&self, decisions: Vec<TurnDecision>) -> TickTrace {
        let mut boids = self.boids.clone();
        boids.sort_by_key(|b| b.id);
        let mut detections: Vec<DetectionRecord> = self
            .sensors
            .iter()
            .map(|s| DetectionRecord {
                tick: self.tick,
                sensor_id: s.id,
                count: s.count_nearby_boids,
                detecting: s.count_nearby_boids > 0,
            })
            .collect();
        detections.sort_by_key(|d| d.sensor_id);
        TickTrace {
            tick: self.tick,
            boids,
            detections,
            decisions,
        }
    }
}

/// Advances the state by one tick and returns the new tick's trace entry.
///
/// Order of phases: (1) per-boid turn decisions against the start-of-tick
/// snapshot, (2) apply headings and advance every boid, (3) sense on the
/// post-move positions, (4) evaluate the schema predicates per the
/// configured mode.
pub fn tick(state: &mut SimulationState) -> Result<TickTrace> {
    let config = state.config;
    let bounds = config.bounds;
    let params = config.flock;

    // Phase 1: decisions against an immutable, id-sorted snapshot.
    let mut snapshot = state.boids.clone();
    snapshot.sort_by_key(|b| b.id);
    let steps: Vec<(Heading, TurnDecision)> = snapshot
        .iter()
        .map(|b| flock_step(b, &snapshot, &params, &bounds))
        .collect();

    // Phase 2: apply headings, then move everyone forward.
    let mut moved = Vec::with_capacity(snapshot.len());
    let mut decisions = Vec::with_capacity(snapshot.len());
    for (boid, (heading, decision)) in snapshot.iter().zip(steps) {
        let turned = BoidState { heading, ..*boid };
        moved.push(BoidState {
            pos: advance(&turned, &params, &bounds),
            ..turned
        });
        decisions.push(decision);
    }
    state.boids = moved;
    state.tick += 1;

    // Phase 3: detection reflects end-of-tick positions.
    sense_all(&mut state.sensors, &state.boids, state.tick, &bounds);

    // Phase 4: the schema predicates, per mode.
    enforce_or_record(state)?;

    Ok(state.capture(decisions))
}

fn enforce_or_record(state: &mut SimulationState) -> Result<()> {
    match state.config.invariant_mode {
        InvariantMode::Off => Ok(()),
        InvariantMode::Record => {
            let mut violations = check_invariants(state);
            state.recorded_violations.append(&mut violations);
            Ok(())
        }
        InvariantMode::Enforce => {
            let violations = check_invariants(state);
            if violations.is_empty() {
                Ok(())
            } else {
                Err(Error::InvariantViolations {
                    tick: state.tick,
                    violations,
                })
            }
        }
    }
}

/// Runs a full scenario: init, `ticks` update steps, one trace entry per
/// state including the initial one.
pub fn run(config: &SimConfig) -> Result<RunOutput> {
    let mut state = init_simulation(config)?;
    enforce_or_record(&mut state)?;

    let mut traces = Vec::with_capacity(config.ticks as usize + 1);
    let initial_decisions = vec![TurnDecision::none(); state.boids.len()];
    traces.push(state.capture(initial_decisions));

    for _ in 0..config.ticks {
        traces.push(tick(&mut state)?);
    }

    Ok(RunOutput {
        traces,
        sensors: state.sensors,
        violations: state.recorded_violations,
    })
}

/// Evaluates every schema predicate against the current state and reports
/// each failure. An empty result means the state conforms.
///
/// Checked predicates: heading in [0, 360); position inside the world
/// bounds; 0 <= sensor count <= boid population; boid id uniqueness; sensor
/// immobility since deployment.
pub fn check_invariants(state: &SimulationState) -> Vec<Violation> {
    let mut violations = Vec::new();
    let bounds = state.config.bounds;
    let tick = state.tick;

    for boid in &state.boids {
        let h = boid.heading.degrees();
        if !(0.0..360.0).contains(&h) {
            violations.push(Violation {
                tick,
                entity: Entity::Boid(boid.id),
                predicate: "heading-range",
                detail: format!("heading {h} outside [0, 360)"),
            });
        }
        if !bounds.contains(boid.pos) {
            violations.push(Violation {
                tick,
                entity: Entity::Boid(boid.id),
                predicate: "position-bounds",
                detail: format!("position ({}, {}) outside world", boid.pos.x, boid.pos.y),
            });
        }
    }

    let mut ids: Vec<BoidId> = state.boids.iter().map(|b| b.id).collect();
    ids.sort();
    for pair in ids.windows(2) {
        if pair[0] == pair[1] {
            violations.push(Violation {
                tick,
                entity: Entity::Boid(pair[0]),
                predicate: "boid-id-unique",
                detail: format!("id {} appears more than once", pair[0]),
            });
        }
    }

    let population = state.boids.len() as u32;
    for sensor in &state.sensors {
        if sensor.count_nearby_boids > population {
            violations.push(Violation {
                tick,
                entity: Entity::Sensor(sensor.id),
                predicate: "count-range",
                detail: format!(
                    "count {} exceeds population {population}",
                    sensor.count_nearby_boids
                ),
            });
        }
        if !bounds.contains(sensor.pos) {
            violations.push(Violation {
                tick,
                entity: Entity::Sensor(sensor.id),
                predicate: "position-bounds",
                detail: format!(
                    "position ({}, {}) outside world",
                    sensor.pos.x, sensor.pos.y
                ),
            });
        }
    }

    if state.sensors.len() != state.sensor_home.len() {
        violations.push(Violation {
            tick,
            entity: Entity::World,
            predicate: "sensor-immobile",
            detail: format!(
                "sensor population changed: {} deployed, {} present",
                state.sensor_home.len(),
                state.sensors.len()
            ),
        });
    } else {
        for (sensor, home) in state.sensors.iter().zip(&state.sensor_home) {
            if sensor.pos != *home {
                violations.push(Violation {
                    tick,
                    entity: Entity::Sensor(sensor.id),
                    predicate: "sensor-immobile",
                    detail: format!(
                        "moved from ({}, {}) to ({}, {})",
                        home.x, home.y, sensor.pos.x, sensor.pos.y
                    ),
                });
            }
        }
    }

    violations
}
