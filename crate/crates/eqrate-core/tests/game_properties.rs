//! Randomized invariants of distributions and payoff arithmetic.

mod common;

use common::{arb_dist, arb_game_and_dist, arb_marginals, coords_of, strides};
use eqrate_core::game::expected_payoff;
use eqrate_core::{outer_product, JointDistribution};
use proptest::prelude::*;

proptest! {
    #[test]
    fn marginals_sum_to_one(dist in arb_dist(3, 4)) {
        for p in 0..dist.shape().len() {
            let total: f64 = dist.marginal(p).iter().sum();
            prop_assert!((total - 1.0).abs() <= 1e-9, "player {p}: marginal sums to {total}");
        }
    }

    #[test]
    fn conditional_times_marginal_reconstructs_slice(dist in arb_dist(3, 4)) {
        let shape = dist.shape().to_vec();
        let st = strides(&shape);
        for p in 0..shape.len() {
            let marginal = dist.marginal(p);
            for a in 0..shape[p] {
                let cond = dist.conditional(p, a, 0.0);
                prop_assert!(cond.is_some(), "full-support marginal treated as zero");
                let cond = cond.unwrap();
                let mut idx = 0;
                for (flat, &prob) in dist.probs().iter().enumerate() {
                    if (flat / st[p]) % shape[p] == a {
                        let recon = cond[idx] * marginal[a];
                        prop_assert!(
                            (recon - prob).abs() <= 1e-12,
                            "joint {flat}: {recon} vs {prob}"
                        );
                        idx += 1;
                    }
                }
                prop_assert_eq!(idx, cond.len());
            }
        }
    }

    #[test]
    fn conditional_is_undefined_below_threshold(dist in arb_dist(3, 4)) {
        // a threshold above the largest marginal makes every conditional undefined
        for p in 0..dist.shape().len() {
            let top = dist.marginal(p).iter().cloned().fold(0.0f64, f64::max);
            for a in 0..dist.shape()[p] {
                prop_assert!(dist.conditional(p, a, top).is_none());
            }
        }
    }

    #[test]
    fn expected_payoff_is_linear_in_the_distribution(
        (game, dist_a) in arb_game_and_dist(3, 4),
        raw in prop::collection::vec(0.0..1.0f64, 256),
        alpha in 0.0..1.0f64,
    ) {
        let joints = dist_a.joint_count();
        prop_assume!(raw.len() >= joints);
        let mut probs: Vec<f64> = raw[..joints].iter().map(|&u| -(1.0 - u).ln() + 1e-12).collect();
        let total: f64 = probs.iter().sum();
        for v in probs.iter_mut() {
            *v /= total;
        }
        let dist_b = JointDistribution::new(game.shape().to_vec(), probs).unwrap();

        let blended: Vec<f64> = dist_a
            .probs()
            .iter()
            .zip(dist_b.probs())
            .map(|(x, y)| alpha * x + (1.0 - alpha) * y)
            .collect();
        let blend = JointDistribution::new(game.shape().to_vec(), blended).unwrap();

        for p in 0..game.num_players() {
            let ea = expected_payoff(&game, &dist_a, p).unwrap();
            let eb = expected_payoff(&game, &dist_b, p).unwrap();
            let eblend = expected_payoff(&game, &blend, p).unwrap();
            let predicted = alpha * ea + (1.0 - alpha) * eb;
            prop_assert!(
                (eblend - predicted).abs() <= 1e-9,
                "player {p}: {eblend} vs {predicted}"
            );
        }
    }

    #[test]
    fn outer_product_recovers_its_marginals(marginals in arb_marginals(3, 4)) {
        let joint = outer_product(&marginals);
        for (p, expect) in marginals.iter().enumerate() {
            let got = joint.marginal(p);
            for (a, (g, e)) in got.iter().zip(expect).enumerate() {
                prop_assert!(
                    (g - e).abs() <= 1e-12,
                    "player {p} strategy {a}: {g} vs {e}"
                );
            }
        }
    }

    #[test]
    fn outer_product_factorizes_pointwise(marginals in arb_marginals(3, 4)) {
        let joint = outer_product(&marginals);
        let shape: Vec<usize> = marginals.iter().map(|m| m.len()).collect();
        for (flat, &prob) in joint.probs().iter().enumerate() {
            let coords = coords_of(flat, &shape);
            let product: f64 = coords.iter().zip(&marginals).map(|(&a, m)| m[a]).product();
            prop_assert!((prob - product).abs() <= 1e-15);
        }
    }

    #[test]
    fn entropy_is_nonnegative_and_at_most_log_count(dist in arb_dist(3, 4)) {
        let h = dist.entropy();
        let cap = (dist.joint_count() as f64).ln();
        prop_assert!(h >= -1e-12, "entropy {h} negative");
        prop_assert!(h <= cap + 1e-9, "entropy {h} above uniform cap {cap}");
    }
}
