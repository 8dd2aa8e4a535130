//! Trace serialization and stored-trace validation.
//!
//! Two formats carry the same run:
//!
//! * CSV: the canonical, diffable format. Metadata (generator id plus the
//!   full resolved config) rides in `#` comment lines, then the fixed header
//!   `tick,entity_kind,entity_id,x,y,heading,count,rule`, then one row per
//!   boid and per sensor per tick. Reals are fixed-point with 6 decimals.
//! * JSONL: one metadata object on the first line, then one tick object per
//!   line mirroring `TickTrace`, at full float precision.
//!
//! Parsing is deliberately permissive about values (a heading of 400 parses
//! fine); `check_trace` is where stored traces get judged against the schema
//! predicates.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::config::{parse_config, render_config};
use crate::engine::{Entity, SimConfig, TickTrace, Violation};
use crate::error::{Error, Result};
use crate::flocking::{FlockRule, TurnDecision};
use crate::model::{distance, BoidId, BoidState, Heading, Position};
use crate::sensing::{DetectionRecord, SensorId, SensorNode};

pub const CSV_HEADER: &str = "tick,entity_kind,entity_id,x,y,heading,count,rule";

/// Slack used when recounting detections from serialized coordinates: CSV
/// stores 6 decimals, so a boid can sit up to ~1.5e-6 away from where the
/// count was taken.
const RECOUNT_EPSILON: f64 = 2e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TraceFormat {
    Csv,
    Jsonl,
}

/// What every trace embeds besides the rows: the generator identifier and
/// the full resolved config of the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceMeta {
    pub rng: String,
    pub config: SimConfig,
}

#[derive(Serialize, Deserialize)]
struct JsonlHeader {
    rng: String,
    config: SimConfig,
    sensors: Vec<SensorNode>,
}

/// One sensor's state as stored in a trace row.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SensorRow {
    pub id: SensorId,
    pub pos: Position,
    pub count: u32,
    pub detecting: bool,
}

/// One tick as read back from a trace file.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedTick {
    pub tick: u64,
    pub boids: Vec<BoidState>,
    pub sensors: Vec<SensorRow>,
    pub decisions: Vec<TurnDecision>,
}

/// A whole stored trace: metadata, the sensor deployment, and all rows.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedTrace {
    pub meta: TraceMeta,
    pub deployment: Vec<SensorNode>,
    pub ticks: Vec<ParsedTick>,
}

impl ParsedTrace {
    /// Rebuilds engine-shaped trace entries, e.g. for recomputing metrics.
    pub fn to_tick_traces(&self) -> Vec<TickTrace> {
        self.ticks
            .iter()
            .map(|row| TickTrace {
                tick: row.tick,
                boids: row.boids.clone(),
                detections: row
                    .sensors
                    .iter()
                    .map(|s| DetectionRecord {
                        tick: row.tick,
                        sensor_id: s.id,
                        count: s.count,
                        detecting: s.detecting,
                    })
                    .collect(),
                decisions: row.decisions.clone(),
            })
            .collect()
    }
}

/// Serializes a run into the requested format.
pub fn export_trace(
    meta: &TraceMeta,
    sensors: &[SensorNode],
    traces: &[TickTrace],
    format: TraceFormat,
) -> Result<String> {
    if traces.is_empty() {
        return Err(Error::EmptyInput("traces"));
    }
    match format {
        TraceFormat::Csv => export_csv(meta, sensors, traces),
        TraceFormat::Jsonl => export_jsonl(meta, sensors, traces),
    }
}

fn export_csv(meta: &TraceMeta, sensors: &[SensorNode], traces: &[TickTrace]) -> Result<String> {
    let positions: BTreeMap<SensorId, Position> =
        sensors.iter().map(|s| (s.id, s.pos)).collect();
    let mut out = String::new();
    writeln!(out, "# rng = {}", meta.rng).expect("string write");
    for line in render_config(&meta.config).lines() {
        writeln!(out, "# {line}").expect("string write");
    }
    writeln!(out, "{CSV_HEADER}").expect("string write");
    for row in traces {
        for (boid, decision) in row.boids.iter().zip(&row.decisions) {
            writeln!(
                out,
                "{},boid,{},{},{},{},,{}",
                row.tick,
                boid.id,
                fmt6(boid.pos.x),
                fmt6(boid.pos.y),
                fmt_heading(boid.heading.degrees()),
                decision.rule_applied,
            )
            .expect("string write");
        }
        for d in &row.detections {
            let pos = positions.get(&d.sensor_id).ok_or_else(|| {
                Error::Trace(format!("detection references unknown sensor {}", d.sensor_id))
            })?;
            writeln!(
                out,
                "{},sensor,{},{},{},,{},",
                row.tick,
                d.sensor_id,
                fmt6(pos.x),
                fmt6(pos.y),
                d.count,
            )
            .expect("string write");
        }
    }
    Ok(out)
}

fn export_jsonl(meta: &TraceMeta, sensors: &[SensorNode], traces: &[TickTrace]) -> Result<String> {
    let mut out = String::new();
    let header = JsonlHeader {
        rng: meta.rng.clone(),
        config: meta.config,
        sensors: sensors.to_vec(),
    };
    writeln!(out, "{}", serde_json::to_string(&header)?).expect("string write");
    for row in traces {
        writeln!(out, "{}", serde_json::to_string(row)?).expect("string write");
    }
    Ok(out)
}

/// Fixed-point with 6 decimals; what makes CSV traces byte-diffable.
fn fmt6(v: f64) -> String {
    format!("{v:.6}")
}

/// Headings round at 6 decimals too, but a value that rounds up to exactly
/// 360 wraps to 0 so the serialized angle stays inside [0, 360).
fn fmt_heading(h: f64) -> String {
    let mut rounded = (h * 1e6).round() / 1e6;
    if rounded >= 360.0 && (0.0..360.0).contains(&h) {
        rounded -= 360.0;
    }
    format!("{rounded:.6}")
}

/// Parses either format, sniffing JSONL by a leading `{`.
pub fn parse_trace(text: &str) -> Result<ParsedTrace> {
    let first = text
        .lines()
        .map(str::trim)
        .find(|l| !l.is_empty())
        .ok_or(Error::EmptyInput("trace document"))?;
    if first.starts_with('{') {
        parse_jsonl(text)
    } else {
        parse_csv(text)
    }
}

fn parse_jsonl(text: &str) -> Result<ParsedTrace> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (line_no, header_line) = lines.next().ok_or(Error::EmptyInput("trace document"))?;
    let header: JsonlHeader =
        serde_json::from_str(header_line.trim()).map_err(|e| Error::Parse {
            line: line_no + 1,
            message: format!("bad metadata line: {e}"),
        })?;
    header.config.validate()?;
    let positions: BTreeMap<SensorId, Position> =
        header.sensors.iter().map(|s| (s.id, s.pos)).collect();

    let mut ticks = Vec::new();
    for (idx, line) in lines {
        let row: TickTrace = serde_json::from_str(line.trim()).map_err(|e| Error::Parse {
            line: idx + 1,
            message: format!("bad tick line: {e}"),
        })?;
        let sensors = row
            .detections
            .iter()
            .map(|d| {
                let pos = positions.get(&d.sensor_id).ok_or_else(|| {
                    Error::Trace(format!(
                        "detection references unknown sensor {}",
                        d.sensor_id
                    ))
                })?;
                Ok(SensorRow {
                    id: d.sensor_id,
                    pos: *pos,
                    count: d.count,
                    detecting: d.detecting,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        ticks.push(ParsedTick {
            tick: row.tick,
            boids: row.boids,
            sensors,
            decisions: row.decisions,
        });
    }

    Ok(ParsedTrace {
        meta: TraceMeta {
            rng: header.rng,
            config: header.config,
        },
        deployment: header.sensors,
        ticks,
    })
}

fn parse_csv(text: &str) -> Result<ParsedTrace> {
    let mut rng = None;
    let mut config_lines: Vec<String> = Vec::new();
    let mut header_seen = false;
    let mut ticks: Vec<ParsedTick> = Vec::new();

    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(comment) = line.strip_prefix('#') {
            let comment = comment.trim();
            if let Some(value) = comment.strip_prefix("rng =") {
                rng = Some(value.trim().to_string());
            } else {
                config_lines.push(comment.to_string());
            }
            continue;
        }
        if !header_seen {
            if line != CSV_HEADER {
                return Err(Error::Parse {
                    line: line_no,
                    message: format!("expected header `{CSV_HEADER}`, got `{line}`"),
                });
            }
            header_seen = true;
            continue;
        }
        parse_csv_row(line, line_no, &mut ticks)?;
    }

    if !header_seen {
        return Err(Error::Parse {
            line: 1,
            message: format!("missing header `{CSV_HEADER}`"),
        });
    }
    let config = parse_config(&config_lines.join("\n")).map_err(|e| match e {
        Error::InvalidConfig { field, reason } => Error::Parse {
            line: 1,
            message: format!("trace metadata: field `{field}`: {reason}"),
        },
        other => other,
    })?;
    let rng = rng.ok_or(Error::Parse {
        line: 1,
        message: "trace metadata: missing `# rng = ...` line".to_string(),
    })?;

    // The deployment is the first row's sensor set; radius comes from config.
    let deployment: Vec<SensorNode> = ticks
        .first()
        .map(|row| {
            row.sensors
                .iter()
                .map(|s| SensorNode {
                    id: s.id,
                    pos: s.pos,
                    radius: config.sensor_radius,
                    count_nearby_boids: s.count,
                })
                .collect()
        })
        .unwrap_or_default();

    Ok(ParsedTrace {
        meta: TraceMeta { rng, config },
        deployment,
        ticks,
    })
}

fn parse_csv_row(line: &str, line_no: usize, ticks: &mut Vec<ParsedTick>) -> Result<()> {
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() != 8 {
        return Err(Error::Parse {
            line: line_no,
            message: format!("expected 8 fields, got {}", fields.len()),
        });
    }
    let tick: u64 = parse_field(fields[0], line_no, "tick")?;
    let kind = fields[1];
    let id: u32 = parse_field(fields[2], line_no, "entity_id")?;
    let x: f64 = parse_field(fields[3], line_no, "x")?;
    let y: f64 = parse_field(fields[4], line_no, "y")?;

    if ticks.last().map(|t| t.tick) != Some(tick) {
        ticks.push(ParsedTick {
            tick,
            boids: Vec::new(),
            sensors: Vec::new(),
            decisions: Vec::new(),
        });
    }
    let row = ticks.last_mut().expect("just pushed");

    match kind {
        "boid" => {
            let heading: f64 = parse_field(fields[5], line_no, "heading")?;
            let rule = match fields[7] {
                "separate" => FlockRule::Separate,
                "align_cohere" => FlockRule::AlignCohere,
                "none" => FlockRule::None,
                other => {
                    return Err(Error::Parse {
                        line: line_no,
                        message: format!("unknown rule `{other}`"),
                    })
                }
            };
            row.boids.push(BoidState {
                id: BoidId(id),
                pos: Position::new(x, y),
                heading: Heading::from_raw(heading),
            });
            // CSV does not store the turn magnitude, only the rule.
            row.decisions.push(TurnDecision {
                rule_applied: rule,
                turn: 0.0,
            });
        }
        "sensor" => {
            let count: u32 = parse_field(fields[6], line_no, "count")?;
            row.sensors.push(SensorRow {
                id: SensorId(id),
                pos: Position::new(x, y),
                count,
                detecting: count > 0,
            });
        }
        other => {
            return Err(Error::Parse {
                line: line_no,
                message: format!("unknown entity_kind `{other}`"),
            });
        }
    }
    Ok(())
}

fn parse_field<T: std::str::FromStr>(value: &str, line: usize, name: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Parse {
        line,
        message: format!("field `{name}`: cannot parse `{value}`"),
    })
}

/// Re-validates a stored trace against every schema predicate: heading and
/// position ranges, id uniqueness, count bounds, detecting flags, sensor
/// immobility, population conservation, tick monotonicity, and a recount of
/// every detection from the stored positions.
pub fn check_trace(parsed: &ParsedTrace) -> Vec<Violation> {
    let mut violations = Vec::new();
    let config = &parsed.meta.config;
    let bounds = config.bounds;
    let population = config.n_boids;

    let home: BTreeMap<SensorId, Position> =
        parsed.deployment.iter().map(|s| (s.id, s.pos)).collect();

    for (idx, row) in parsed.ticks.iter().enumerate() {
        let tick = row.tick;
        if tick != idx as u64 {
            violations.push(Violation {
                tick,
                entity: Entity::World,
                predicate: "tick-monotonic",
                detail: format!("expected tick {idx}, found {tick}"),
            });
        }
        if row.boids.len() as u32 != population {
            violations.push(Violation {
                tick,
                entity: Entity::World,
                predicate: "population-constant",
                detail: format!("{} boids present, config says {population}", row.boids.len()),
            });
        }
        if row.decisions.len() != row.boids.len() {
            violations.push(Violation {
                tick,
                entity: Entity::World,
                predicate: "population-constant",
                detail: format!(
                    "{} decisions for {} boids",
                    row.decisions.len(),
                    row.boids.len()
                ),
            });
        }
        if row.sensors.len() != parsed.deployment.len() {
            violations.push(Violation {
                tick,
                entity: Entity::World,
                predicate: "sensor-immobile",
                detail: format!(
                    "{} sensors present, {} deployed",
                    row.sensors.len(),
                    parsed.deployment.len()
                ),
            });
        }

        for boid in &row.boids {
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
        let mut ids: Vec<BoidId> = row.boids.iter().map(|b| b.id).collect();
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

        for sensor in &row.sensors {
            if sensor.count > population {
                violations.push(Violation {
                    tick,
                    entity: Entity::Sensor(sensor.id),
                    predicate: "count-range",
                    detail: format!("count {} exceeds population {population}", sensor.count),
                });
            }
            if sensor.detecting != (sensor.count > 0) {
                violations.push(Violation {
                    tick,
                    entity: Entity::Sensor(sensor.id),
                    predicate: "detecting-flag",
                    detail: format!(
                        "detecting = {} with count {}",
                        sensor.detecting, sensor.count
                    ),
                });
            }
            match home.get(&sensor.id) {
                None => violations.push(Violation {
                    tick,
                    entity: Entity::Sensor(sensor.id),
                    predicate: "sensor-immobile",
                    detail: "sensor not in the deployment".to_string(),
                }),
                Some(pos) if *pos != sensor.pos => violations.push(Violation {
                    tick,
                    entity: Entity::Sensor(sensor.id),
                    predicate: "sensor-immobile",
                    detail: format!(
                        "moved from ({}, {}) to ({}, {})",
                        pos.x, pos.y, sensor.pos.x, sensor.pos.y
                    ),
                }),
                Some(_) => {}
            }

            // Recount from the stored positions. Boids within the rounding
            // slack of the boundary may legitimately count either way.
            let mut certain = 0u32;
            let mut possible = 0u32;
            for boid in &row.boids {
                let d = distance(sensor.pos, boid.pos, &bounds);
                if d <= config.sensor_radius - RECOUNT_EPSILON {
                    certain += 1;
                }
                if d <= config.sensor_radius + RECOUNT_EPSILON {
                    possible += 1;
                }
            }
            if sensor.count < certain || sensor.count > possible {
                violations.push(Violation {
                    tick,
                    entity: Entity::Sensor(sensor.id),
                    predicate: "detection-consistent",
                    detail: format!(
                        "stored count {} but recount gives {certain}..={possible}",
                        sensor.count
                    ),
                });
            }
        }
    }

    violations
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::{run, InvariantMode, RNG_ID};
    use crate::model::{FlockParams, WorldBounds};

    fn small_config(seed: u64, ticks: u64) -> SimConfig {
        SimConfig {
            bounds: WorldBounds::default(),
            flock: FlockParams::default(),
            n_boids: 4,
            n_sensors: 2,
            sensor_radius: 5.0,
            seed,
            ticks,
            invariant_mode: InvariantMode::Enforce,
        }
    }

    fn meta(config: &SimConfig) -> TraceMeta {
        TraceMeta {
            rng: RNG_ID.to_string(),
            config: *config,
        }
    }

    #[test]
    fn csv_row_count_for_zero_tick_run() {
        let mut config = small_config(1, 0);
        config.n_boids = 1;
        config.n_sensors = 1;
        let output = run(&config).unwrap();
        let text =
            export_trace(&meta(&config), &output.sensors, &output.traces, TraceFormat::Csv)
                .unwrap();
        let data_lines: Vec<&str> = text
            .lines()
            .filter(|l| !l.starts_with('#') && !l.is_empty())
            .collect();
        assert_eq!(data_lines[0], CSV_HEADER);
        assert_eq!(data_lines.len(), 1 + 2); // header + 1 boid + 1 sensor
    }

    #[test]
    fn csv_round_trip_reproduces_fields_to_6_decimals() {
        let config = small_config(5, 12);
        let output = run(&config).unwrap();
        let text =
            export_trace(&meta(&config), &output.sensors, &output.traces, TraceFormat::Csv)
                .unwrap();
        let parsed = parse_trace(&text).unwrap();
        assert_eq!(parsed.meta.config, config);
        assert_eq!(parsed.meta.rng, RNG_ID);
        assert_eq!(parsed.ticks.len(), output.traces.len());
        for (orig, back) in output.traces.iter().zip(&parsed.ticks) {
            assert_eq!(orig.tick, back.tick);
            for (a, b) in orig.boids.iter().zip(&back.boids) {
                assert_eq!(a.id, b.id);
                assert!((a.pos.x - b.pos.x).abs() <= 5e-7);
                assert!((a.pos.y - b.pos.y).abs() <= 5e-7);
                assert!((a.heading.degrees() - b.heading.degrees()).abs() <= 5e-7);
            }
            for (a, b) in orig.decisions.iter().zip(&back.decisions) {
                assert_eq!(a.rule_applied, b.rule_applied);
            }
            for (a, b) in orig.detections.iter().zip(&back.sensors) {
                assert_eq!(a.sensor_id, b.id);
                assert_eq!(a.count, b.count);
                assert_eq!(a.detecting, b.detecting);
            }
        }
    }

    #[test]
    fn jsonl_round_trip_is_exact() {
        let config = small_config(9, 8);
        let output = run(&config).unwrap();
        let text = export_trace(
            &meta(&config),
            &output.sensors,
            &output.traces,
            TraceFormat::Jsonl,
        )
        .unwrap();
        let parsed = parse_trace(&text).unwrap();
        assert_eq!(parsed.meta.config, config);
        assert_eq!(parsed.to_tick_traces(), output.traces);
        assert_eq!(parsed.deployment, output.sensors);
    }

    #[test]
    fn csv_rule_column_domain() {
        let config = small_config(2, 6);
        let output = run(&config).unwrap();
        let text =
            export_trace(&meta(&config), &output.sensors, &output.traces, TraceFormat::Csv)
                .unwrap();
        for line in text.lines().filter(|l| !l.starts_with('#')).skip(1) {
            let rule = line.split(',').nth(7).unwrap();
            assert!(
                ["separate", "align_cohere", "none", ""].contains(&rule),
                "bad rule `{rule}`"
            );
            if line.split(',').nth(1).unwrap() == "sensor" {
                assert_eq!(rule, "");
            }
        }
    }

    #[test]
    fn export_rejects_empty_traces() {
        let config = small_config(1, 0);
        assert!(matches!(
            export_trace(&meta(&config), &[], &[], TraceFormat::Csv),
            Err(Error::EmptyInput(_))
        ));
    }

    #[test]
    fn fmt_heading_wraps_the_rounding_edge() {
        assert_eq!(fmt_heading(359.99999995), "0.000000");
        assert_eq!(fmt_heading(359.999999), "359.999999");
        assert_eq!(fmt_heading(0.0), "0.000000");
    }

    #[test]
    fn check_trace_accepts_own_output() {
        let config = small_config(7, 25);
        let output = run(&config).unwrap();
        for format in [TraceFormat::Csv, TraceFormat::Jsonl] {
            let text =
                export_trace(&meta(&config), &output.sensors, &output.traces, format).unwrap();
            let parsed = parse_trace(&text).unwrap();
            let violations = check_trace(&parsed);
            assert!(violations.is_empty(), "{format:?}: {violations:?}");
        }
    }

    #[test]
    fn check_trace_flags_corrupted_heading() {
        let config = small_config(7, 3);
        let output = run(&config).unwrap();
        let text =
            export_trace(&meta(&config), &output.sensors, &output.traces, TraceFormat::Csv)
                .unwrap();
        // Corrupt the first boid row's heading to 400.
        let corrupted: String = text
            .lines()
            .map(|line| {
                if line.starts_with("0,boid,0,") {
                    let mut fields: Vec<&str> = line.split(',').collect();
                    fields[5] = "400.000000";
                    fields.join(",")
                } else {
                    line.to_string()
                }
            })
            .collect::<Vec<_>>()
            .join("\n");
        let parsed = parse_trace(&corrupted).unwrap();
        let violations = check_trace(&parsed);
        assert!(violations
            .iter()
            .any(|v| v.predicate == "heading-range" && v.tick == 0));
    }

    #[test]
    fn check_trace_flags_moved_sensor_and_bad_count() {
        let config = small_config(3, 2);
        let output = run(&config).unwrap();
        let text =
            export_trace(&meta(&config), &output.sensors, &output.traces, TraceFormat::Csv)
                .unwrap();
        let mut parsed = parse_trace(&text).unwrap();
        parsed.ticks[1].sensors[0].pos.x += 1.0;
        parsed.ticks[2].sensors[1].count = 99;
        parsed.ticks[2].sensors[1].detecting = true;
        let predicates: Vec<&str> = check_trace(&parsed).iter().map(|v| v.predicate).collect();
        assert!(predicates.contains(&"sensor-immobile"));
        assert!(predicates.contains(&"count-range"));
    }

    #[test]
    fn parse_rejects_malformed_documents() {
        assert!(matches!(parse_trace(""), Err(Error::EmptyInput(_))));
        assert!(matches!(
            parse_trace("tick,bogus,header\n"),
            Err(Error::Parse { .. })
        ));
        assert!(matches!(
            parse_trace("{not json}\n"),
            Err(Error::Parse { .. })
        ));
        // Valid header but a truncated row.
        let text = format!("# rng = chacha8\n# n_boids = 1\n# seed = 1\n{CSV_HEADER}\n0,boid,0\n");
        assert!(matches!(parse_trace(&text), Err(Error::Parse { line: 5, .. })));
    }
}
