//! Randomized invariants of the deviation-gain constraint stacks.

mod common;

use common::{arb_game, arb_game_and_dist};
use eqrate_core::{
    build_constraints, epsilon_min, epsilon_uniform, Concept, JointDistribution, NormalFormGame,
};
use proptest::prelude::*;

fn uniform(game: &NormalFormGame) -> JointDistribution {
    let joints = game.joint_count();
    JointDistribution::new(game.shape().to_vec(), vec![1.0 / joints as f64; joints]).unwrap()
}

fn scaled(game: &NormalFormGame, c: f64, d: f64) -> NormalFormGame {
    let joints = game.joint_count();
    let mut payoffs = Vec::with_capacity(game.num_players() * joints);
    for p in 0..game.num_players() {
        for flat in 0..joints {
            payoffs.push(c * game.payoff(p, flat) + d);
        }
    }
    NormalFormGame::from_payoffs(game.shape(), payoffs).unwrap()
}

proptest! {
    /// Each aggregate-deviation row is the sum of the per-recommendation
    /// rows that deviate to the same strategy.
    #[test]
    fn cce_row_is_the_sum_of_ce_rows(game in arb_game(3, 4)) {
        let ce = build_constraints(&game, Concept::Ce);
        let cce = build_constraints(&game, Concept::Cce);
        let joints = game.joint_count();
        for p in 0..game.num_players() {
            for dev_to in 0..game.shape()[p] {
                let r = cce.row_index(p, dev_to, None).unwrap();
                let mut summed = vec![0.0; joints];
                for dev_from in 0..game.shape()[p] {
                    let s = ce.row_index(p, dev_to, Some(dev_from)).unwrap();
                    for (acc, v) in summed.iter_mut().zip(ce.row(s)) {
                        *acc += v;
                    }
                }
                for (a, (got, want)) in cce.row(r).iter().zip(&summed).enumerate() {
                    prop_assert!(
                        (got - want).abs() <= 1e-12,
                        "player {p} dev {dev_to} joint {a}: {got} vs {want}"
                    );
                }
            }
        }
    }

    /// Per-recommendation feasibility caps aggregate feasibility: the
    /// row-sum identity bounds each aggregate gain by the strategy count
    /// times the worst per-recommendation gain.
    #[test]
    fn swap_feasibility_bounds_aggregate_feasibility((game, dist) in arb_game_and_dist(3, 4)) {
        let ce = build_constraints(&game, Concept::Ce).max_violation(&dist);
        let cce = build_constraints(&game, Concept::Cce).max_violation(&dist);
        for p in 0..game.num_players() {
            let bound = game.shape()[p] as f64 * ce[p].max(0.0) + 1e-12;
            prop_assert!(
                cce[p] <= bound,
                "player {p}: aggregate gain {} above {}",
                cce[p],
                bound
            );
        }
    }

    /// The closed-form uniform bound is exactly the uniform distribution's
    /// worst deviation gain.
    #[test]
    fn uniform_bound_is_tight(game in arb_game(3, 4)) {
        let dist = uniform(&game);
        for concept in [Concept::Ce, Concept::Cce] {
            let bound = epsilon_uniform(&game, concept);
            let violation = build_constraints(&game, concept).max_violation(&dist);
            for p in 0..game.num_players() {
                prop_assert!(
                    (bound[p] - violation[p]).abs() <= 1e-9,
                    "{concept:?} player {p}: {} vs {}",
                    bound[p],
                    violation[p]
                );
            }
        }
    }

    #[test]
    fn feasibility_minimum_never_exceeds_the_uniform_bound(game in arb_game(3, 3)) {
        for concept in [Concept::Ce, Concept::Cce] {
            let uni = epsilon_uniform(&game, concept);
            let min = epsilon_min(&game, concept).unwrap().epsilon;
            for p in 0..game.num_players() {
                prop_assert!(
                    min[p] <= uni[p] + 1e-9,
                    "{concept:?} player {p}: {} above {}",
                    min[p],
                    uni[p]
                );
            }
        }
    }

    /// Positive affine payoff changes scale gains by the multiplier; the
    /// shift cancels out of every payoff difference.
    #[test]
    fn constraints_scale_affinely(
        game in arb_game(3, 3),
        c in 0.1..5.0f64,
        d in -3.0..3.0f64,
    ) {
        let shifted = scaled(&game, c, d);
        for concept in [Concept::Ce, Concept::Cce] {
            let base = build_constraints(&game, concept);
            let moved = build_constraints(&shifted, concept);
            prop_assert_eq!(base.num_rows(), moved.num_rows());
            let tol = 1e-12 * (1.0 + c * (1.0 + d.abs()));
            for r in 0..base.num_rows() {
                for (x, y) in base.row(r).iter().zip(moved.row(r)) {
                    prop_assert!((c * x - y).abs() <= tol, "row {r}: {} vs {}", c * x, y);
                }
            }

            let uni_base = epsilon_uniform(&game, concept);
            let uni_moved = epsilon_uniform(&shifted, concept);
            for p in 0..game.num_players() {
                prop_assert!(
                    (c * uni_base[p] - uni_moved[p]).abs() <= tol,
                    "{concept:?} uniform bound, player {p}"
                );
            }

            // ε^min comes from a simplex solve; its optimality tolerance sets
            // an absolute noise floor proportional to the scaled payoff
            // magnitude, on top of the 1e-12 relative agreement
            let payoff_scale: f64 = (0..game.num_players())
                .map(|p| {
                    let (lo, hi) = shifted.payoff_bounds(p);
                    hi - lo
                })
                .fold(0.0, f64::max);
            let min_base = epsilon_min(&game, concept).unwrap().epsilon;
            let min_moved = epsilon_min(&shifted, concept).unwrap().epsilon;
            for p in 0..game.num_players() {
                prop_assert!(
                    (c * min_base[p] - min_moved[p]).abs()
                        <= 1e-12 * (1.0 + payoff_scale + (c * min_base[p]).abs()),
                    "{concept:?} feasibility minimum, player {p}: {} vs {}",
                    c * min_base[p],
                    min_moved[p]
                );
            }
        }
    }

    /// With two strategies per player the per-recommendation and aggregate
    /// concepts describe the same feasible set.
    #[test]
    fn two_strategy_games_collapse_the_concepts((game, dist) in arb_game_and_dist(3, 2)) {
        let ce = build_constraints(&game, Concept::Ce).max_violation(&dist);
        let cce = build_constraints(&game, Concept::Cce).max_violation(&dist);
        for p in 0..game.num_players() {
            prop_assert!((ce[p] - cce[p]).abs() <= 1e-10, "player {p}: {} vs {}", ce[p], cce[p]);
        }
    }

    /// Self-deviation rows are stored but all-zero, and excluded from the
    /// effective iteration.
    #[test]
    fn self_deviation_rows_are_zero_and_skipped(game in arb_game(3, 3)) {
        let cons = build_constraints(&game, Concept::Ce);
        let mut self_rows = 0;
        for r in 0..cons.num_rows() {
            if cons.meta(r).is_self_deviation() {
                self_rows += 1;
                prop_assert!(cons.row(r).iter().all(|&v| v == 0.0));
            }
        }
        let total: usize = game.shape().iter().sum();
        prop_assert_eq!(self_rows, total);
        prop_assert_eq!(cons.effective_rows().count(), cons.num_rows() - self_rows);
    }
}
