//! Per-boid flocking behavior: flockmate search, nearest-neighbor selection,
//! the separate/align/cohere turns with clamping, the dispatch rule that ties
//! them together, and forward motion.
//!
//! All functions are pure. `flock_step` computations for one tick may run in
//! parallel as long as every call reads the same start-of-tick snapshot.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    bearing, distance, subtract_heading, wrap_position, BoidId, BoidState, FlockParams, Heading,
    Position, WorldBounds,
};

/// Which branch of the dispatch rule fired for a boid on one tick.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlockRule {
    Separate,
    AlignCohere,
    None,
}

impl std::fmt::Display for FlockRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            FlockRule::Separate => write!(f, "separate"),
            FlockRule::AlignCohere => write!(f, "align_cohere"),
            FlockRule::None => write!(f, "none"),
        }
    }
}

/// The rule that fired and the signed turn it applied.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TurnDecision {
    pub rule_applied: FlockRule,
    pub turn: f64,
}

impl TurnDecision {
    pub fn none() -> Self {
        TurnDecision {
            rule_applied: FlockRule::None,
            turn: 0.0,
        }
    }
}

/// All other boids within `vision` of `me`, sorted by id.
///
/// The boundary is inclusive: a boid at distance exactly `vision` is a
/// flockmate. Sorting fixes the float summation order downstream, which is
/// what makes runs independent of in-memory boid ordering.
pub fn find_flockmates(
    me: &BoidState,
    all: &[BoidState],
    params: &FlockParams,
    bounds: &WorldBounds,
) -> Vec<BoidState> {
    let mut mates: Vec<BoidState> = all
        .iter()
        .filter(|b| b.id != me.id && distance(me.pos, b.pos, bounds) <= params.vision)
        .copied()
        .collect();
    mates.sort_by_key(|b| b.id);
    mates
}

/// The flockmate closest to `me`; ties broken by smallest id so the choice
/// is deterministic. `None` when there are no flockmates.
pub fn find_nearest_neighbor(
    me: &BoidState,
    flockmates: &[BoidState],
    bounds: &WorldBounds,
) -> Option<BoidState> {
    let mut best: Option<(f64, BoidState)> = None;
    for mate in flockmates {
        let d = distance(me.pos, mate.pos, bounds);
        let closer = match &best {
            None => true,
            Some((bd, bb)) => d < *bd || (d == *bd && mate.id < bb.id),
        };
        if closer {
            best = Some((d, *mate));
        }
    }
    best.map(|(_, b)| b)
}

/// Clamps a desired turn to `[-max_turn, max_turn]`, preserving its sign.
pub fn clamp_turn(desired: f64, max_turn: f64) -> f64 {
    debug_assert!(max_turn >= 0.0);
    desired.clamp(-max_turn, max_turn)
}

/// Signed turn that would rotate `me` onto `target_heading`.
pub fn towards_turn(me: &BoidState, target_heading: Heading) -> f64 {
    subtract_heading(target_heading, me.heading)
}

/// Signed turn that rotates `me` away from `other_heading`; the negation of
/// the towards turn.
pub fn away_turn(me: &BoidState, other_heading: Heading) -> f64 {
    subtract_heading(me.heading, other_heading)
}

/// New heading after turning away from the nearest boid's heading, at most
/// `max_separate_turn` degrees.
pub fn separate(me: &BoidState, nearest: &BoidState, params: &FlockParams) -> Heading {
    let turn = clamp_turn(away_turn(me, nearest.heading), params.max_separate_turn);
    me.heading.rotated(turn)
}

/// Circular mean of the flockmates' headings: the direction of the vector
/// sum of their unit heading vectors. When that sum cancels to (near) zero
/// the mean is undefined; the heading of the smallest-id flockmate stands in.
pub fn average_flockmate_heading(flockmates: &[BoidState]) -> Result<Heading> {
    circular_mean(flockmates.iter().map(|b| (b.id, b.heading)))
        .ok_or(Error::EmptyInput("flockmates"))
}

/// New heading after turning towards `avg_heading`, at most `max_align_turn`
/// degrees.
pub fn align(me: &BoidState, avg_heading: Heading, params: &FlockParams) -> Heading {
    let turn = clamp_turn(towards_turn(me, avg_heading), params.max_align_turn);
    me.heading.rotated(turn)
}

/// New heading after turning towards the circular-mean bearing of the
/// flockmates' positions, at most `max_cohere_turn` degrees. Cancellation of
/// opposite bearings falls back to the smallest-id flockmate's bearing, same
/// as the heading average.
pub fn cohere(
    me: &BoidState,
    flockmates: &[BoidState],
    params: &FlockParams,
    bounds: &WorldBounds,
) -> Result<Heading> {
    let mean_bearing = circular_mean(
        flockmates
            .iter()
            .map(|b| (b.id, bearing(me.pos, b.pos, bounds))),
    )
    .ok_or(Error::EmptyInput("flockmates"))?;
    let turn = clamp_turn(towards_turn(me, mean_bearing), params.max_cohere_turn);
    Ok(me.heading.rotated(turn))
}

/// One boid's heading update for a tick.
///
/// Separation has priority: when the nearest flockmate is at or inside
/// `min_separation`, only the separate turn is applied and align/cohere stay
/// off. Otherwise align runs first and cohere runs on align's output. With
/// no flockmates in sight the heading is left unchanged.
pub fn flock_step(
    me: &BoidState,
    all: &[BoidState],
    params: &FlockParams,
    bounds: &WorldBounds,
) -> (Heading, TurnDecision) {
    let flockmates = find_flockmates(me, all, params, bounds);
    if flockmates.is_empty() {
        return (me.heading, TurnDecision::none());
    }

    let nearest =
        find_nearest_neighbor(me, &flockmates, bounds).expect("nonempty flockmates have a nearest");

    if distance(me.pos, nearest.pos, bounds) <= params.min_separation {
        let turn = clamp_turn(away_turn(me, nearest.heading), params.max_separate_turn);
        (
            me.heading.rotated(turn),
            TurnDecision {
                rule_applied: FlockRule::Separate,
                turn,
            },
        )
    } else {
        let avg = average_flockmate_heading(&flockmates)
            .expect("nonempty flockmates have an average heading");
        let align_turn = clamp_turn(towards_turn(me, avg), params.max_align_turn);
        let aligned = BoidState {
            heading: me.heading.rotated(align_turn),
            ..*me
        };
        let cohered =
            cohere(&aligned, &flockmates, params, bounds).expect("nonempty flockmates cohere");
        let cohere_turn = subtract_heading(cohered, aligned.heading);
        (
            cohered,
            TurnDecision {
                rule_applied: FlockRule::AlignCohere,
                turn: align_turn + cohere_turn,
            },
        )
    }
}

/// Position after moving `speed` world units along the heading, wrapped or
/// clamped back into the world.
pub fn advance(me: &BoidState, params: &FlockParams, bounds: &WorldBounds) -> Position {
    let (ux, uy) = me.heading.unit_vector();
    wrap_position(
        Position::new(me.pos.x + params.speed * ux, me.pos.y + params.speed * uy),
        bounds,
    )
}

/// Direction of the vector sum of unit vectors for the given angles, or the
/// smallest-id entry's angle when the sum's magnitude falls below 1e-9.
/// `None` on an empty iterator.
fn circular_mean(items: impl Iterator<Item = (BoidId, Heading)>) -> Option<Heading> {
    let mut sum_x = 0.0;
    let mut sum_y = 0.0;
    let mut fallback: Option<(BoidId, Heading)> = None;
    for (id, heading) in items {
        let (x, y) = heading.unit_vector();
        sum_x += x;
        sum_y += y;
        match fallback {
            Some((fid, _)) if fid <= id => {}
            _ => fallback = Some((id, heading)),
        }
    }
    let (_, fallback_heading) = fallback?;
    if sum_x.hypot(sum_y) < 1e-9 {
        return Some(fallback_heading);
    }
    Some(Heading::new(sum_x.atan2(sum_y).to_degrees()).expect("atan2 of finite sums is finite"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Topology;
    use proptest::prelude::*;

    fn torus() -> WorldBounds {
        WorldBounds::default()
    }

    fn boid(id: u32, x: f64, y: f64, heading: f64) -> BoidState {
        BoidState {
            id: BoidId(id),
            pos: Position::new(x, y),
            heading: Heading::new(heading).unwrap(),
        }
    }

    fn params() -> FlockParams {
        FlockParams::default()
    }

    #[test]
    fn find_flockmates_applies_vision_predicate() {
        let me = boid(0, 0.0, 0.0, 0.0);
        let all = vec![me, boid(1, 2.0, 0.0, 0.0), boid(2, 20.0, 0.0, 0.0)];
        let got = find_flockmates(&me, &all, &params(), &torus());
        assert_eq!(got.len(), 1);
        assert_eq!(got[0].id, BoidId(1));
    }

    #[test]
    fn find_flockmates_alone_is_empty() {
        let me = boid(0, 0.0, 0.0, 0.0);
        let got = find_flockmates(&me, &[me], &params(), &torus());
        assert!(got.is_empty());
    }

    #[test]
    fn find_flockmates_boundary_is_inclusive() {
        let me = boid(0, 0.0, 0.0, 0.0);
        let all = vec![me, boid(1, 3.0, 0.0, 0.0)]; // exactly vision away
        let got = find_flockmates(&me, &all, &params(), &torus());
        assert_eq!(got.len(), 1);
    }

    #[test]
    fn nearest_neighbor_picks_strict_minimum() {
        let me = boid(0, 0.0, 0.0, 0.0);
        let mates = vec![boid(1, 0.0, 3.0, 0.0), boid(2, 2.0, 0.0, 0.0)];
        let got = find_nearest_neighbor(&me, &mates, &torus()).unwrap();
        assert_eq!(got.id, BoidId(2));
    }

    #[test]
    fn nearest_neighbor_empty_is_none() {
        let me = boid(0, 0.0, 0.0, 0.0);
        assert!(find_nearest_neighbor(&me, &[], &torus()).is_none());
    }

    #[test]
    fn nearest_neighbor_tie_breaks_by_smallest_id() {
        let me = boid(0, 0.0, 0.0, 0.0);
        let a = boid(4, 2.0, 0.0, 0.0);
        let b = boid(7, -2.0, 0.0, 0.0);
        // Exhaustive over input orders: the pick must be deterministic and
        // distance-minimal either way.
        for mates in [vec![a, b], vec![b, a]] {
            let got = find_nearest_neighbor(&me, &mates, &torus()).unwrap();
            assert_eq!(got.id, BoidId(4));
            let dmin = mates
                .iter()
                .map(|m| distance(me.pos, m.pos, &torus()))
                .fold(f64::INFINITY, f64::min);
            assert_eq!(distance(me.pos, got.pos, &torus()), dmin);
        }
    }

    #[test]
    fn clamp_turn_examples() {
        assert_eq!(clamp_turn(50.0, 1.5), 1.5);
        assert_eq!(clamp_turn(1.0, 1.5), 1.0);
        assert_eq!(clamp_turn(-50.0, 1.5), -1.5);
    }

    #[test]
    fn clamped_turn_reaches_closest_heading_to_desired() {
        // Brute force over the reachable turn range: no reachable heading is
        // closer to the desired one than the clamped turn's result.
        let me = boid(0, 0.0, 0.0, 0.0);
        let desired = Heading::new(310.0).unwrap(); // -50 from north
        let max_turn = 1.5;
        let chosen = clamp_turn(towards_turn(&me, desired), max_turn);
        let chosen_gap = subtract_heading(desired, me.heading.rotated(chosen)).abs();
        let mut best_gap = f64::INFINITY;
        for i in -1500..=1500 {
            let t = i as f64 * 0.001;
            best_gap = best_gap.min(subtract_heading(desired, me.heading.rotated(t)).abs());
        }
        assert!(chosen_gap <= best_gap + 1e-9);
        assert_eq!(chosen, -1.5);
    }

    #[test]
    fn towards_turn_examples() {
        assert_eq!(towards_turn(&boid(0, 0.0, 0.0, 0.0), Heading::new(30.0).unwrap()), 30.0);
        assert_eq!(towards_turn(&boid(0, 0.0, 0.0, 30.0), Heading::new(0.0).unwrap()), -30.0);
        assert_eq!(towards_turn(&boid(0, 0.0, 0.0, 10.0), Heading::new(350.0).unwrap()), -20.0);
    }

    #[test]
    fn away_turn_examples() {
        assert_eq!(away_turn(&boid(0, 0.0, 0.0, 0.0), Heading::new(30.0).unwrap()), -30.0);
        assert_eq!(away_turn(&boid(0, 0.0, 0.0, 0.0), Heading::new(0.0).unwrap()), 0.0);
        assert_eq!(away_turn(&boid(0, 0.0, 0.0, 350.0), Heading::new(10.0).unwrap()), -20.0);
    }

    #[test]
    fn separate_examples() {
        let p = params();
        // away_turn = -30, clamped to -1.5, normalized
        let h = separate(&boid(0, 0.0, 0.0, 0.0), &boid(1, 0.5, 0.0, 30.0), &p);
        assert_eq!(h.degrees(), 358.5);

        let h = separate(&boid(0, 0.0, 0.0, 0.0), &boid(1, 0.5, 0.0, 0.0), &p);
        assert_eq!(h.degrees(), 0.0);

        let mut p5 = p;
        p5.max_separate_turn = 5.0;
        let h = separate(&boid(0, 0.0, 0.0, 0.0), &boid(1, 0.5, 0.0, 1.0), &p5);
        assert_eq!(h.degrees(), 359.0);
    }

    #[test]
    fn separate_composes_the_primitives() {
        let p = params();
        let me = boid(0, 0.0, 0.0, 0.0);
        let other = boid(1, 0.5, 0.0, 30.0);
        let composed = me
            .heading
            .rotated(clamp_turn(away_turn(&me, other.heading), p.max_separate_turn));
        assert_eq!(separate(&me, &other, &p).degrees(), composed.degrees());
    }

    #[test]
    fn average_heading_examples() {
        let avg = average_flockmate_heading(&[boid(1, 0.0, 0.0, 90.0), boid(2, 1.0, 0.0, 90.0)])
            .unwrap();
        assert!((avg.degrees() - 90.0).abs() < 1e-9);

        let avg = average_flockmate_heading(&[boid(1, 0.0, 0.0, 0.0), boid(2, 1.0, 0.0, 90.0)])
            .unwrap();
        assert!((avg.degrees() - 45.0).abs() < 1e-9);

        assert!(average_flockmate_heading(&[]).is_err());
    }

    #[test]
    fn average_heading_degenerate_cancellation() {
        let mates = [boid(5, 0.0, 0.0, 0.0), boid(3, 1.0, 0.0, 180.0)];
        // Vector sum really does cancel.
        let (sx, sy) = mates.iter().fold((0.0, 0.0), |(sx, sy), b| {
            let (x, y) = b.heading.unit_vector();
            (sx + x, sy + y)
        });
        assert!(f64::hypot(sx, sy) < 1e-9);
        // Fallback is the smallest-id flockmate's heading.
        let avg = average_flockmate_heading(&mates).unwrap();
        assert_eq!(avg.degrees(), 180.0);
    }

    #[test]
    fn align_examples() {
        let p = params();
        let h = align(&boid(0, 0.0, 0.0, 0.0), Heading::new(3.0).unwrap(), &p);
        assert_eq!(h.degrees(), 3.0);

        let h = align(&boid(0, 0.0, 0.0, 0.0), Heading::new(90.0).unwrap(), &p);
        assert_eq!(h.degrees(), 5.0);

        let h = align(&boid(0, 0.0, 0.0, 0.0), Heading::new(0.0).unwrap(), &p);
        assert_eq!(h.degrees(), 0.0);
    }

    #[test]
    fn cohere_examples() {
        let mut p = params();
        p.max_cohere_turn = 90.0;
        let me = boid(0, 0.0, 0.0, 0.0);
        let h = cohere(&me, &[boid(1, 5.0, 0.0, 0.0)], &p, &torus()).unwrap();
        assert_eq!(h.degrees(), 90.0);

        let me = boid(0, 0.0, 0.0, 90.0);
        let h = cohere(&me, &[boid(1, 5.0, 0.0, 0.0)], &p, &torus()).unwrap();
        assert_eq!(h.degrees(), 90.0);

        assert!(cohere(&me, &[], &p, &torus()).is_err());
    }

    #[test]
    fn cohere_degenerate_cancellation() {
        let mut p = params();
        p.max_cohere_turn = 3.0;
        p.vision = 10.0;
        let me = boid(0, 0.0, 0.0, 0.0);
        // Bearings 90 and 270 cancel; fallback is the bearing to the
        // smallest-id flockmate, which is id 1 at +x (bearing 90), so the
        // turn is +3 clamped.
        let mates = [boid(1, 5.0, 0.0, 0.0), boid(2, -5.0, 0.0, 0.0)];
        let h = cohere(&me, &mates, &p, &torus()).unwrap();
        assert_eq!(h.degrees(), 3.0);
    }

    #[test]
    fn flock_step_separation_overrides() {
        let p = params();
        // Nearest at distance 0.5 <= min_separation 1.0; a far-but-visible
        // mate exists too, and must not be consulted.
        let me = boid(0, 0.0, 0.0, 0.0);
        let all = vec![me, boid(1, 0.5, 0.0, 30.0), boid(2, 0.0, 2.5, 180.0)];
        let (h, d) = flock_step(&me, &all, &p, &torus());
        assert_eq!(d.rule_applied, FlockRule::Separate);
        assert_eq!(h.degrees(), 358.5);
        assert!(d.turn.abs() <= p.max_separate_turn);
    }

    #[test]
    fn flock_step_no_flockmates_is_a_no_op() {
        let p = params();
        let me = boid(0, 0.0, 0.0, 123.0);
        let all = vec![me, boid(1, 30.0, 0.0, 0.0)];
        let (h, d) = flock_step(&me, &all, &p, &torus());
        assert_eq!(h.degrees(), 123.0);
        assert_eq!(d.rule_applied, FlockRule::None);
        assert_eq!(d.turn, 0.0);
    }

    #[test]
    fn flock_step_beyond_separation_runs_align_then_cohere() {
        let p = params();
        let me = boid(0, 0.0, 0.0, 0.0);
        let mate = boid(1, 2.0, 0.0, 40.0);
        let all = vec![me, mate];
        let (h, d) = flock_step(&me, &all, &p, &torus());
        assert_eq!(d.rule_applied, FlockRule::AlignCohere);
        // align: towards 40 clamped to +5; cohere: towards bearing 90 from
        // heading 5, clamped to +3.
        assert!((h.degrees() - 8.0).abs() < 1e-9);
        assert!((d.turn - 8.0).abs() < 1e-9);
    }

    #[test]
    fn advance_examples() {
        let p = params();
        let pos = advance(&boid(0, 0.0, 0.0, 0.0), &p, &torus());
        assert!((pos.x - 0.0).abs() < 1e-12 && (pos.y - 1.0).abs() < 1e-12);

        let pos = advance(&boid(0, 0.0, 0.0, 90.0), &p, &torus());
        assert!((pos.x - 1.0).abs() < 1e-12 && (pos.y - 0.0).abs() < 1e-12);

        let pos = advance(&boid(0, 0.0, 34.5, 0.0), &p, &torus());
        assert!((pos.x - 0.0).abs() < 1e-12 && (pos.y - -34.5).abs() < 1e-12);
    }

    #[test]
    fn alignment_contracts_heading_difference() {
        // Two boids within vision, beyond min_separation, cohere disabled:
        // a synchronous align step never widens their heading difference.
        let mut p = params();
        p.max_cohere_turn = 0.0;
        let b = torus();
        for (h1, h2) in [(0.0, 40.0), (10.0, 350.0), (0.0, 180.0), (90.0, 91.0), (5.0, 9.0)] {
            let b1 = boid(0, 0.0, 0.0, h1);
            let b2 = boid(1, 2.0, 0.0, h2);
            let all = vec![b1, b2];
            let (n1, _) = flock_step(&b1, &all, &p, &b);
            let (n2, _) = flock_step(&b2, &all, &p, &b);
            let before = subtract_heading(b1.heading, b2.heading).abs();
            let after = subtract_heading(n1, n2).abs();
            assert!(
                after <= before + 1e-9,
                "h1={h1} h2={h2}: {after} > {before}"
            );
        }
    }

    proptest! {
        #[test]
        fn find_flockmates_never_contains_self(
            seed_x in -35f64..35.0, seed_y in -35f64..35.0,
            xs in proptest::collection::vec((-35f64..35.0, -35f64..35.0), 0..20),
        ) {
            let me = boid(0, seed_x, seed_y, 0.0);
            let mut all = vec![me];
            for (i, (x, y)) in xs.iter().enumerate() {
                all.push(boid(i as u32 + 1, *x, *y, 0.0));
            }
            let got = find_flockmates(&me, &all, &params(), &torus());
            prop_assert!(got.iter().all(|b| b.id != me.id));
            for b in &got {
                prop_assert!(distance(me.pos, b.pos, &torus()) <= params().vision);
            }
        }

        #[test]
        fn clamp_turn_bounds_magnitude_preserves_sign(
            desired in -720f64..720.0, max_turn in 0f64..180.0,
        ) {
            let t = clamp_turn(desired, max_turn);
            prop_assert!((t.abs() - desired.abs().min(max_turn)).abs() < 1e-12);
            if t != 0.0 {
                prop_assert_eq!(t.signum(), desired.signum());
            }
        }

        #[test]
        fn single_rule_turns_are_bounded(
            h_me in 0f64..360.0, h_other in 0f64..360.0,
            x in -3f64..3.0, y in -3f64..3.0,
        ) {
            let p = params();
            let me = boid(0, 0.0, 0.0, h_me);
            let other = boid(1, x, y, h_other);
            let sep = separate(&me, &other, &p);
            prop_assert!(subtract_heading(sep, me.heading).abs() <= p.max_separate_turn + 1e-9);
            let ali = align(&me, other.heading, &p);
            prop_assert!(subtract_heading(ali, me.heading).abs() <= p.max_align_turn + 1e-9);
            if !(x == 0.0 && y == 0.0) {
                let coh = cohere(&me, &[other], &p, &torus()).unwrap();
                prop_assert!(subtract_heading(coh, me.heading).abs() <= p.max_cohere_turn + 1e-9);
            }
        }

        #[test]
        fn advance_stays_in_bounds_under_both_topologies(
            x in -35f64..35.0, y in -35f64..35.0, h in 0f64..360.0,
        ) {
            let p = params();
            for topology in [Topology::Torus, Topology::Bounded] {
                let b = WorldBounds { topology, ..WorldBounds::default() };
                let me = boid(0, x, y, h);
                let pos = advance(&me, &p, &b);
                prop_assert!(b.contains(pos));
                if topology == Topology::Torus {
                    prop_assert!(pos.x < b.max_x && pos.y < b.max_y);
                }
            }
        }
    }
}
