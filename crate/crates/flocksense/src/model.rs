//! Shared domain types and the geometric/angular primitives everything else
//! builds on.
//!
//! Heading convention is compass style: 0 degrees points north (+y) and
//! angles grow clockwise, so east (+x) is 90 degrees. Every normalized
//! heading lives in the half-open interval `[0, 360)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// World topology: wrap at the edges or clamp to them.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Topology {
    Torus,
    Bounded,
}

impl std::fmt::Display for Topology {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Topology::Torus => write!(f, "torus"),
            Topology::Bounded => write!(f, "bounded"),
        }
    }
}

/// The bounded 2-D coordinate space all positions live in.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorldBounds {
    pub min_x: f64,
    pub max_x: f64,
    pub min_y: f64,
    pub max_y: f64,
    pub topology: Topology,
}

impl Default for WorldBounds {
    fn default() -> Self {
        WorldBounds {
            min_x: -35.0,
            max_x: 35.0,
            min_y: -35.0,
            max_y: 35.0,
            topology: Topology::Torus,
        }
    }
}

impl WorldBounds {
    pub fn new(min_x: f64, max_x: f64, min_y: f64, max_y: f64, topology: Topology) -> Result<Self> {
        let bounds = WorldBounds {
            min_x,
            max_x,
            min_y,
            max_y,
            topology,
        };
        bounds.validate()?;
        Ok(bounds)
    }

    pub fn validate(&self) -> Result<()> {
        for (field, v) in [
            ("min_x", self.min_x),
            ("max_x", self.max_x),
            ("min_y", self.min_y),
            ("max_y", self.max_y),
        ] {
            if !v.is_finite() {
                return Err(Error::invalid_config(field, "must be finite"));
            }
        }
        if self.min_x >= self.max_x {
            return Err(Error::invalid_config("max_x", "requires min_x < max_x"));
        }
        if self.min_y >= self.max_y {
            return Err(Error::invalid_config("max_y", "requires min_y < max_y"));
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        self.max_x - self.min_x
    }

    pub fn height(&self) -> f64 {
        self.max_y - self.min_y
    }

    /// The Location predicate: min <= coordinate <= max on both axes.
    pub fn contains(&self, p: Position) -> bool {
        p.x >= self.min_x && p.x <= self.max_x && p.y >= self.min_y && p.y <= self.max_y
    }

    /// Signed displacement from `from` to `to`, per-axis minimal under torus
    /// wrapping, plain difference otherwise.
    pub fn displacement(&self, from: Position, to: Position) -> (f64, f64) {
        let mut dx = to.x - from.x;
        let mut dy = to.y - from.y;
        if self.topology == Topology::Torus {
            let (w, h) = (self.width(), self.height());
            if dx > w / 2.0 {
                dx -= w;
            } else if dx < -w / 2.0 {
                dx += w;
            }
            if dy > h / 2.0 {
                dy -= h;
            } else if dy < -h / 2.0 {
                dy += h;
            }
        }
        (dx, dy)
    }
}

/// A point in the world. Carries no validity of its own; `wrap_position`
/// is what puts candidates back inside a `WorldBounds`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub fn new(x: f64, y: f64) -> Self {
        Position { x, y }
    }
}

/// A direction of motion in compass degrees, normalized to `[0, 360)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Heading {
    degrees: f64,
}

impl Heading {
    /// Wraps a raw angle into `[0, 360)`. Errors on non-finite input.
    pub fn new(raw: f64) -> Result<Self> {
        if !raw.is_finite() {
            return Err(Error::NonFiniteAngle(raw));
        }
        Ok(Heading {
            degrees: wrap_degrees(raw),
        })
    }

    /// Builds a heading without normalizing. Intended for trace decoding and
    /// for constructing deliberately invalid states in invariant tests; the
    /// runtime checks are what catch out-of-range values.
    pub fn from_raw(degrees: f64) -> Self {
        Heading { degrees }
    }

    pub fn degrees(self) -> f64 {
        self.degrees
    }

    /// Heading after turning by `delta` degrees (clockwise positive),
    /// renormalized into `[0, 360)`.
    pub fn rotated(self, delta: f64) -> Heading {
        debug_assert!(delta.is_finite());
        Heading {
            degrees: wrap_degrees(self.degrees + delta),
        }
    }

    /// Unit vector (x, y) for this heading under the compass convention.
    pub fn unit_vector(self) -> (f64, f64) {
        let rad = self.degrees.to_radians();
        (rad.sin(), rad.cos())
    }

    pub fn is_normalized(self) -> bool {
        self.degrees >= 0.0 && self.degrees < 360.0
    }
}

impl std::fmt::Display for Heading {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.degrees)
    }
}

/// Identifier for one boid; unique within a simulation.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct BoidId(pub u32);

impl std::fmt::Display for BoidId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One boid: identity, position, heading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoidState {
    pub id: BoidId,
    pub pos: Position,
    pub heading: Heading,
}

/// The flocking constants: per-rule turn caps, the perception radius, the
/// separation threshold, and the constant forward speed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlockParams {
    pub min_separation: f64,
    pub max_align_turn: f64,
    pub max_cohere_turn: f64,
    pub max_separate_turn: f64,
    pub vision: f64,
    pub speed: f64,
}

impl Default for FlockParams {
    /// Calibration defaults for a 70x70 world; none of these are physical
    /// constants, they are the documented defaults of the reference flocking
    /// model this simulation follows.
    fn default() -> Self {
        FlockParams {
            min_separation: 1.0,
            max_align_turn: 5.0,
            max_cohere_turn: 3.0,
            max_separate_turn: 1.5,
            vision: 3.0,
            speed: 1.0,
        }
    }
}

impl FlockParams {
    pub fn validate(&self) -> Result<()> {
        for (field, v) in [
            ("min_separation", self.min_separation),
            ("max_align_turn", self.max_align_turn),
            ("max_cohere_turn", self.max_cohere_turn),
            ("max_separate_turn", self.max_separate_turn),
            ("vision", self.vision),
            ("speed", self.speed),
        ] {
            if !v.is_finite() {
                return Err(Error::invalid_config(field, "must be finite"));
            }
        }
        if self.vision < 0.0 {
            return Err(Error::invalid_config("vision", "must be >= 0"));
        }
        // Carried over verbatim from the source model's validity rule even
        // though vision is a radius; kept as a config check.
        if self.vision > 360.0 {
            return Err(Error::invalid_config("vision", "must be <= 360"));
        }
        for (field, v) in [
            ("max_align_turn", self.max_align_turn),
            ("max_cohere_turn", self.max_cohere_turn),
            ("max_separate_turn", self.max_separate_turn),
        ] {
            if v < 0.0 {
                return Err(Error::invalid_config(field, "must be >= 0"));
            }
        }
        if self.min_separation < 0.0 {
            return Err(Error::invalid_config("min_separation", "must be >= 0"));
        }
        if self.min_separation >= self.vision {
            return Err(Error::invalid_config(
                "min_separation",
                "must be < vision",
            ));
        }
        if self.speed <= 0.0 {
            return Err(Error::invalid_config("speed", "must be > 0"));
        }
        Ok(())
    }
}

/// Wraps into `[0, 360)`. The post-adjustment guards against the float
/// rounding case where `rem_euclid` lands exactly on the modulus.
fn wrap_degrees(raw: f64) -> f64 {
    let mut d = raw.rem_euclid(360.0);
    if d >= 360.0 {
        d -= 360.0;
    }
    d
}

/// Wraps a raw angle into a normalized `Heading` in `[0, 360)`.
pub fn normalize_heading(raw: f64) -> Result<Heading> {
    Heading::new(raw)
}

/// Minimal signed angular difference `a - b`, in `(-180, 180]`.
///
/// `a == b.rotated(subtract_heading(a, b))` up to float rounding.
pub fn subtract_heading(a: Heading, b: Heading) -> f64 {
    let mut d = (a.degrees() - b.degrees()).rem_euclid(360.0);
    if d >= 360.0 {
        d -= 360.0;
    }
    if d > 180.0 {
        d -= 360.0;
    }
    d
}

/// Puts a candidate point back inside the world: wrapped modulo the world
/// size into `[min, max)` on a torus, clamped to `[min, max]` otherwise.
pub fn wrap_position(p: Position, bounds: &WorldBounds) -> Position {
    match bounds.topology {
        Topology::Torus => {
            let wrap = |v: f64, min: f64, len: f64| {
                let mut off = (v - min).rem_euclid(len);
                if off >= len {
                    off -= len;
                }
                min + off
            };
            Position {
                x: wrap(p.x, bounds.min_x, bounds.width()),
                y: wrap(p.y, bounds.min_y, bounds.height()),
            }
        }
        Topology::Bounded => Position {
            x: p.x.clamp(bounds.min_x, bounds.max_x),
            y: p.y.clamp(bounds.min_y, bounds.max_y),
        },
    }
}

/// Euclidean distance between two points, computed on the per-axis minimal
/// wrapped displacement when the world is a torus.
pub fn distance(a: Position, b: Position, bounds: &WorldBounds) -> f64 {
    let (dx, dy) = bounds.displacement(a, b);
    dx.hypot(dy)
}

/// Compass bearing from `from` towards `to`, topology-aware. Co-located
/// points get bearing 0 (the atan2(0, 0) convention).
pub fn bearing(from: Position, to: Position, bounds: &WorldBounds) -> Heading {
    let (dx, dy) = bounds.displacement(from, to);
    Heading {
        degrees: wrap_degrees(dx.atan2(dy).to_degrees()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn torus() -> WorldBounds {
        WorldBounds::default()
    }

    fn bounded() -> WorldBounds {
        WorldBounds {
            topology: Topology::Bounded,
            ..WorldBounds::default()
        }
    }

    #[test]
    fn normalize_heading_examples() {
        assert_eq!(normalize_heading(360.0).unwrap().degrees(), 0.0);
        assert_eq!(normalize_heading(-90.0).unwrap().degrees(), 270.0);
        assert_eq!(normalize_heading(725.0).unwrap().degrees(), 5.0);
    }

    #[test]
    fn normalize_heading_rejects_non_finite() {
        assert!(normalize_heading(f64::NAN).is_err());
        assert!(normalize_heading(f64::INFINITY).is_err());
        assert!(normalize_heading(f64::NEG_INFINITY).is_err());
    }

    #[test]
    fn normalize_heading_near_zero_negative_stays_in_range() {
        // rem_euclid(-1e-16, 360) rounds to 360.0; the wrap guard must fold it.
        let h = normalize_heading(-1e-16).unwrap();
        assert!(h.is_normalized(), "got {}", h.degrees());
    }

    #[test]
    fn subtract_heading_examples() {
        let h = |d: f64| Heading::new(d).unwrap();
        assert_eq!(subtract_heading(h(90.0), h(90.0)), 0.0);
        assert_eq!(subtract_heading(h(10.0), h(350.0)), 20.0);
        assert_eq!(subtract_heading(h(350.0), h(10.0)), -20.0);
        assert_eq!(subtract_heading(h(180.0), h(0.0)), 180.0);
        assert_eq!(subtract_heading(h(0.0), h(180.0)), 180.0);
    }

    #[test]
    fn wrap_position_examples() {
        let p = wrap_position(Position::new(36.0, 0.0), &torus());
        assert_eq!((p.x, p.y), (-34.0, 0.0));

        let p = wrap_position(Position::new(36.0, 0.0), &bounded());
        assert_eq!((p.x, p.y), (35.0, 0.0));

        for b in [torus(), bounded()] {
            let p = wrap_position(Position::new(0.0, 0.0), &b);
            assert_eq!((p.x, p.y), (0.0, 0.0));
        }
    }

    #[test]
    fn distance_examples() {
        assert_eq!(
            distance(Position::new(0.0, 0.0), Position::new(3.0, 4.0), &bounded()),
            5.0
        );
        assert_eq!(
            distance(Position::new(1.0, 1.0), Position::new(1.0, 1.0), &torus()),
            0.0
        );
        assert_eq!(
            distance(Position::new(-34.0, 0.0), Position::new(34.0, 0.0), &torus()),
            2.0
        );
    }

    #[test]
    fn bearing_compass_convention() {
        let b = torus();
        let origin = Position::new(0.0, 0.0);
        assert_eq!(bearing(origin, Position::new(0.0, 5.0), &b).degrees(), 0.0);
        assert_eq!(bearing(origin, Position::new(5.0, 0.0), &b).degrees(), 90.0);
        assert_eq!(bearing(origin, Position::new(0.0, -5.0), &b).degrees(), 180.0);
        assert_eq!(bearing(origin, Position::new(-5.0, 0.0), &b).degrees(), 270.0);
    }

    #[test]
    fn bearing_wraps_across_seam() {
        // Nearest image of (34, 0) seen from (-34, 0) is 2 units to the west.
        let b = bearing(Position::new(-34.0, 0.0), Position::new(34.0, 0.0), &torus());
        assert_eq!(b.degrees(), 270.0);
    }

    #[test]
    fn flock_params_validation() {
        assert!(FlockParams::default().validate().is_ok());

        let mut p = FlockParams::default();
        p.vision = 400.0;
        assert!(matches!(
            p.validate(),
            Err(Error::InvalidConfig { field, .. }) if field == "vision"
        ));

        let mut p = FlockParams::default();
        p.min_separation = 5.0; // >= vision 3.0
        assert!(p.validate().is_err());

        let mut p = FlockParams::default();
        p.speed = 0.0;
        assert!(p.validate().is_err());

        let mut p = FlockParams::default();
        p.max_align_turn = -1.0;
        assert!(p.validate().is_err());
    }

    #[test]
    fn world_bounds_validation() {
        assert!(WorldBounds::new(0.0, 0.0, -1.0, 1.0, Topology::Torus).is_err());
        assert!(WorldBounds::new(-1.0, 1.0, 3.0, 2.0, Topology::Torus).is_err());
        assert!(WorldBounds::new(-1.0, 1.0, -2.0, 2.0, Topology::Bounded).is_ok());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn normalize_heading_is_idempotent(raw in -1e6f64..1e6) {
            let once = normalize_heading(raw).unwrap();
            let twice = normalize_heading(once.degrees()).unwrap();
            prop_assert!(once.is_normalized());
            prop_assert_eq!(once.degrees(), twice.degrees());
            // result is congruent to the input mod 360
            let k = ((raw - once.degrees()) / 360.0).round();
            prop_assert!((raw - once.degrees() - 360.0 * k).abs() < 1e-6);
        }

        #[test]
        fn subtract_heading_range_and_antisymmetry(a in 0f64..360.0, b in 0f64..360.0) {
            let (ha, hb) = (Heading::new(a).unwrap(), Heading::new(b).unwrap());
            let d = subtract_heading(ha, hb);
            prop_assert!(d > -180.0 && d <= 180.0);
            // a == b + d (mod 360)
            let back = hb.rotated(d);
            prop_assert!(subtract_heading(ha, back).abs() < 1e-9);
            if d != 180.0 {
                prop_assert!((subtract_heading(hb, ha) + d).abs() < 1e-9);
            }
        }

        #[test]
        fn wrap_position_lands_in_bounds(x in -500f64..500.0, y in -500f64..500.0) {
            let t = wrap_position(Position::new(x, y), &torus());
            prop_assert!(t.x >= -35.0 && t.x < 35.0 && t.y >= -35.0 && t.y < 35.0);
            let c = wrap_position(Position::new(x, y), &bounded());
            prop_assert!(bounded().contains(c));
        }

        #[test]
        fn distance_symmetric_nonnegative_torus_shorter(
            ax in -35f64..35.0, ay in -35f64..35.0,
            bx in -35f64..35.0, by in -35f64..35.0,
        ) {
            let (a, b) = (Position::new(ax, ay), Position::new(bx, by));
            let dt = distance(a, b, &torus());
            let db = distance(a, b, &bounded());
            prop_assert!(dt >= 0.0 && db >= 0.0);
            prop_assert_eq!(dt, distance(b, a, &torus()));
            prop_assert_eq!(db, distance(b, a, &bounded()));
            prop_assert!(dt <= db + 1e-12);
        }
    }
}
