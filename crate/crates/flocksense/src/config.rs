//! Scenario documents: a flat `key = value` format with `#` comments.
//!
//! `n_boids` and `seed` are required; everything else has a documented
//! default. Unknown and duplicate keys are rejected. Resolution is total:
//! parsing yields a fully populated `SimConfig` that `render_config` can
//! echo back out, and re-parsing that echo changes nothing.

use std::fmt::Write as _;
use std::path::PathBuf;

use crate::engine::{InvariantMode, SimConfig};
use crate::error::{Error, Result};
use crate::model::{FlockParams, Topology, WorldBounds};
use crate::plot::PlotStyle;

pub const DEFAULT_TICKS: u64 = 500;
pub const DEFAULT_N_SENSORS: u32 = 25;
pub const DEFAULT_SENSOR_RADIUS: f64 = 5.0;

/// Optional output destinations named inside a scenario file. Command-line
/// flags take precedence over these.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct OutputSpec {
    pub trace: Option<PathBuf>,
    pub metrics: Option<PathBuf>,
    pub plot: Option<PathBuf>,
    pub plot_style: Option<PlotStyle>,
}

/// A parsed scenario: the simulation config plus output routing.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub sim: SimConfig,
    pub out: OutputSpec,
}

const SIM_KEYS: &[&str] = &[
    "n_boids",
    "seed",
    "ticks",
    "n_sensors",
    "sensor_radius",
    "topology",
    "min_x",
    "max_x",
    "min_y",
    "max_y",
    "vision",
    "min_separation",
    "max_align_turn",
    "max_cohere_turn",
    "max_separate_turn",
    "speed",
    "invariant_mode",
];

const OUTPUT_KEYS: &[&str] = &["trace", "metrics", "plot", "plot_style"];

/// Parses a scenario document into a fully resolved config.
pub fn parse_scenario(text: &str) -> Result<Scenario> {
    let mut seen: Vec<(String, String, usize)> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(Error::Parse {
                line: line_no,
                message: format!("expected `key = value`, got `{line}`"),
            });
        };
        let key = key.trim().to_string();
        let value = value.trim().to_string();
        if key.is_empty() {
            return Err(Error::Parse {
                line: line_no,
                message: "empty key".to_string(),
            });
        }
        if !SIM_KEYS.contains(&key.as_str()) && !OUTPUT_KEYS.contains(&key.as_str()) {
            return Err(Error::Parse {
                line: line_no,
                message: format!("unknown key `{key}`"),
            });
        }
        if seen.iter().any(|(k, _, _)| *k == key) {
            return Err(Error::Parse {
                line: line_no,
                message: format!("duplicate key `{key}`"),
            });
        }
        seen.push((key, value, line_no));
    }

    let get = |key: &str| seen.iter().find(|(k, _, _)| k == key).map(|(_, v, l)| (v, *l));

    let n_boids = required_u32(get("n_boids"), "n_boids")?;
    let seed = required_u64(get("seed"), "seed")?;

    let defaults = WorldBounds::default();
    let flock_defaults = FlockParams::default();

    let sim = SimConfig {
        bounds: WorldBounds {
            min_x: opt_f64(get("min_x"), "min_x", defaults.min_x)?,
            max_x: opt_f64(get("max_x"), "max_x", defaults.max_x)?,
            min_y: opt_f64(get("min_y"), "min_y", defaults.min_y)?,
            max_y: opt_f64(get("max_y"), "max_y", defaults.max_y)?,
            topology: opt_topology(get("topology"), defaults.topology)?,
        },
        flock: FlockParams {
            vision: opt_f64(get("vision"), "vision", flock_defaults.vision)?,
            min_separation: opt_f64(
                get("min_separation"),
                "min_separation",
                flock_defaults.min_separation,
            )?,
            max_align_turn: opt_f64(
                get("max_align_turn"),
                "max_align_turn",
                flock_defaults.max_align_turn,
            )?,
            max_cohere_turn: opt_f64(
                get("max_cohere_turn"),
                "max_cohere_turn",
                flock_defaults.max_cohere_turn,
            )?,
            max_separate_turn: opt_f64(
                get("max_separate_turn"),
                "max_separate_turn",
                flock_defaults.max_separate_turn,
            )?,
            speed: opt_f64(get("speed"), "speed", flock_defaults.speed)?,
        },
        n_boids,
        n_sensors: opt_u32(get("n_sensors"), "n_sensors", DEFAULT_N_SENSORS)?,
        sensor_radius: opt_f64(get("sensor_radius"), "sensor_radius", DEFAULT_SENSOR_RADIUS)?,
        seed,
        ticks: opt_u64(get("ticks"), "ticks", DEFAULT_TICKS)?,
        invariant_mode: opt_mode(get("invariant_mode"), InvariantMode::Enforce)?,
    };
    sim.validate()?;

    let out = OutputSpec {
        trace: get("trace").map(|(v, _)| PathBuf::from(v)),
        metrics: get("metrics").map(|(v, _)| PathBuf::from(v)),
        plot: get("plot").map(|(v, _)| PathBuf::from(v)),
        plot_style: match get("plot_style") {
            None => None,
            Some((v, line)) => Some(match v.as_str() {
                "tracks" => PlotStyle::Tracks,
                "snapshot" => PlotStyle::Snapshot,
                other => {
                    return Err(Error::Parse {
                        line,
                        message: format!(
                            "key `plot_style`: expected `tracks` or `snapshot`, got `{other}`"
                        ),
                    })
                }
            }),
        },
    };

    Ok(Scenario { sim, out })
}

/// Parses just the simulation config out of a scenario document.
pub fn parse_config(text: &str) -> Result<SimConfig> {
    parse_scenario(text).map(|s| s.sim)
}

/// Renders a resolved config back into scenario syntax, one key per line in
/// a fixed order. `parse_config(render_config(c)) == c` for every valid `c`.
pub fn render_config(config: &SimConfig) -> String {
    let mut out = String::new();
    let mut kv = |k: &str, v: String| writeln!(out, "{k} = {v}").expect("string write");
    kv("n_boids", config.n_boids.to_string());
    kv("seed", config.seed.to_string());
    kv("ticks", config.ticks.to_string());
    kv("n_sensors", config.n_sensors.to_string());
    kv("sensor_radius", config.sensor_radius.to_string());
    kv("topology", config.bounds.topology.to_string());
    kv("min_x", config.bounds.min_x.to_string());
    kv("max_x", config.bounds.max_x.to_string());
    kv("min_y", config.bounds.min_y.to_string());
    kv("max_y", config.bounds.max_y.to_string());
    kv("vision", config.flock.vision.to_string());
    kv("min_separation", config.flock.min_separation.to_string());
    kv("max_align_turn", config.flock.max_align_turn.to_string());
    kv("max_cohere_turn", config.flock.max_cohere_turn.to_string());
    kv("max_separate_turn", config.flock.max_separate_turn.to_string());
    kv("speed", config.flock.speed.to_string());
    kv("invariant_mode", config.invariant_mode.to_string());
    out
}

fn parse_value<T: std::str::FromStr>(value: &str, line: usize, key: &str, kind: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Parse {
        line,
        message: format!("key `{key}`: expected {kind}, got `{value}`"),
    })
}

fn required_u32(entry: Option<(&String, usize)>, key: &str) -> Result<u32> {
    match entry {
        Some((v, line)) => parse_value(v, line, key, "a non-negative integer"),
        None => Err(Error::invalid_config(key, "required key is missing")),
    }
}

fn required_u64(entry: Option<(&String, usize)>, key: &str) -> Result<u64> {
    match entry {
        Some((v, line)) => parse_value(v, line, key, "a non-negative integer"),
        None => Err(Error::invalid_config(key, "required key is missing")),
    }
}

fn opt_u32(entry: Option<(&String, usize)>, key: &str, default: u32) -> Result<u32> {
    match entry {
        Some((v, line)) => parse_value(v, line, key, "a non-negative integer"),
        None => Ok(default),
    }
}

fn opt_u64(entry: Option<(&String, usize)>, key: &str, default: u64) -> Result<u64> {
    match entry {
        Some((v, line)) => parse_value(v, line, key, "a non-negative integer"),
        None => Ok(default),
    }
}

fn opt_f64(entry: Option<(&String, usize)>, key: &str, default: f64) -> Result<f64> {
    match entry {
        Some((v, line)) => parse_value(v, line, key, "a number"),
        None => Ok(default),
    }
}

fn opt_topology(entry: Option<(&String, usize)>, default: Topology) -> Result<Topology> {
    match entry {
        Some((v, line)) => match v.as_str() {
            "torus" => Ok(Topology::Torus),
            "bounded" => Ok(Topology::Bounded),
            other => Err(Error::Parse {
                line,
                message: format!("key `topology`: expected `torus` or `bounded`, got `{other}`"),
            }),
        },
        None => Ok(default),
    }
}

fn opt_mode(entry: Option<(&String, usize)>, default: InvariantMode) -> Result<InvariantMode> {
    match entry {
        Some((v, line)) => match v.as_str() {
            "enforce" => Ok(InvariantMode::Enforce),
            "record" => Ok(InvariantMode::Record),
            "off" => Ok(InvariantMode::Off),
            other => Err(Error::Parse {
                line,
                message: format!(
                    "key `invariant_mode`: expected `enforce`, `record` or `off`, got `{other}`"
                ),
            }),
        },
        None => Ok(default),
    }
}
