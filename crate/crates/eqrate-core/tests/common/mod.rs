//! Seeded random generators shared by the integration tests.

#![allow(dead_code)]

use eqrate_core::{JointDistribution, NormalFormGame};
use proptest::prelude::*;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Independent uniform payoffs in [-1, 1].
pub fn random_game(rng: &mut ChaCha8Rng, shape: &[usize]) -> NormalFormGame {
    let joints: usize = shape.iter().product();
    let payoffs = (0..shape.len() * joints)
        .map(|_| rng.random_range(-1.0..1.0))
        .collect();
    NormalFormGame::from_payoffs(shape, payoffs).expect("random payoffs are finite")
}

/// Two-player game with G₂ = −G₁.
pub fn random_zero_sum(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> NormalFormGame {
    let g1: Vec<f64> = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut payoffs = g1.clone();
    payoffs.extend(g1.iter().map(|v| -v));
    NormalFormGame::from_payoffs(&[rows, cols], payoffs).expect("random payoffs are finite")
}

/// Two-player symmetric game: G₂(i,j) = G₁(j,i), shared labels.
pub fn random_symmetric(rng: &mut ChaCha8Rng, k: usize) -> NormalFormGame {
    let g1: Vec<f64> = (0..k * k).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut payoffs = g1.clone();
    for i in 0..k {
        for j in 0..k {
            payoffs.push(g1[j * k + i]);
        }
    }
    NormalFormGame::from_payoffs(&[k, k], payoffs).expect("random payoffs are finite")
}

/// Random full-support joint distribution (normalized exponentials).
pub fn random_dist(rng: &mut ChaCha8Rng, shape: &[usize]) -> JointDistribution {
    let joints: usize = shape.iter().product();
    let mut probs: Vec<f64> = (0..joints)
        .map(|_| -(1.0 - rng.random::<f64>()).ln())
        .collect();
    let total: f64 = probs.iter().sum();
    for p in probs.iter_mut() {
        *p /= total;
    }
    JointDistribution::new(shape.to_vec(), probs).expect("normalized by construction")
}

/// Row-major strides for a shape, mirroring the tensor layout.
pub fn strides(shape: &[usize]) -> Vec<usize> {
    let mut s = vec![1; shape.len()];
    for p in (0..shape.len().saturating_sub(1)).rev() {
        s[p] = s[p + 1] * shape[p + 1];
    }
    s
}

/// Coordinates of a flat joint index.
pub fn coords_of(flat: usize, shape: &[usize]) -> Vec<usize> {
    let s = strides(shape);
    shape
        .iter()
        .zip(&s)
        .map(|(&dim, &st)| (flat / st) % dim)
        .collect()
}

/// Append a bitwise copy of `strategy` to `player`'s strategy set, every
/// payoff tensor extended accordingly.
pub fn duplicate_strategy(
    game: &NormalFormGame,
    player: usize,
    strategy: usize,
) -> NormalFormGame {
    let mut shape = game.shape().to_vec();
    shape[player] += 1;
    let joints: usize = shape.iter().product();
    let mut payoffs = Vec::with_capacity(game.num_players() * joints);
    for p in 0..game.num_players() {
        for flat in 0..joints {
            let mut coords = coords_of(flat, &shape);
            if coords[player] == shape[player] - 1 {
                coords[player] = strategy;
            }
            payoffs.push(game.payoff_at(p, &coords));
        }
    }
    NormalFormGame::from_payoffs(&shape, payoffs).expect("copied payoffs are finite")
}

fn normalize_raw(raw: &[f64]) -> Vec<f64> {
    // -(ln of the complement) keeps every entry strictly positive even at
    // proptest's favored 0.0 edge case
    let mut probs: Vec<f64> = raw.iter().map(|&u| -(1.0 - u).ln() + 1e-12).collect();
    let total: f64 = probs.iter().sum();
    for p in probs.iter_mut() {
        *p /= total;
    }
    probs
}

/// Proptest shapes: 2..=max_players players with 2..=max_strategies each.
pub fn arb_shape(
    max_players: usize,
    max_strategies: usize,
) -> impl Strategy<Value = Vec<usize>> {
    prop::collection::vec(2..=max_strategies, 2..=max_players)
}

/// Proptest games over `arb_shape`, payoffs uniform in [-1, 1].
pub fn arb_game(
    max_players: usize,
    max_strategies: usize,
) -> impl Strategy<Value = NormalFormGame> {
    arb_shape(max_players, max_strategies).prop_flat_map(|shape| {
        let joints: usize = shape.iter().product();
        prop::collection::vec(-1.0..1.0f64, shape.len() * joints).prop_map(move |payoffs| {
            NormalFormGame::from_payoffs(&shape, payoffs).expect("random payoffs are finite")
        })
    })
}

/// Proptest game plus an independent full-support joint distribution.
pub fn arb_game_and_dist(
    max_players: usize,
    max_strategies: usize,
) -> impl Strategy<Value = (NormalFormGame, JointDistribution)> {
    arb_shape(max_players, max_strategies).prop_flat_map(|shape| {
        let joints: usize = shape.iter().product();
        (
            prop::collection::vec(-1.0..1.0f64, shape.len() * joints),
            prop::collection::vec(0.0..1.0f64, joints),
        )
            .prop_map(move |(payoffs, raw)| {
                let game = NormalFormGame::from_payoffs(&shape, payoffs)
                    .expect("random payoffs are finite");
                let dist = JointDistribution::new(shape.clone(), normalize_raw(&raw))
                    .expect("normalized by construction");
                (game, dist)
            })
    })
}

/// Proptest full-support joint distribution alone.
pub fn arb_dist(
    max_players: usize,
    max_strategies: usize,
) -> impl Strategy<Value = JointDistribution> {
    arb_game_and_dist(max_players, max_strategies).prop_map(|(_, dist)| dist)
}

/// Proptest per-player full-support mixtures for a random shape.
pub fn arb_marginals(
    max_players: usize,
    max_strategies: usize,
) -> impl Strategy<Value = Vec<Vec<f64>>> {
    arb_shape(max_players, max_strategies).prop_flat_map(|shape| {
        let total: usize = shape.iter().sum();
        prop::collection::vec(0.0..1.0f64, total).prop_map(move |raw| {
            let mut out = Vec::with_capacity(shape.len());
            let mut off = 0;
            for &k in &shape {
                out.push(normalize_raw(&raw[off..off + k]));
                off += k;
            }
            out
        })
    })
}

/// Proptest game and a product (factorized) distribution over it.
pub fn arb_game_and_product(
    max_players: usize,
    max_strategies: usize,
) -> impl Strategy<Value = (NormalFormGame, Vec<Vec<f64>>)> {
    arb_shape(max_players, max_strategies).prop_flat_map(|shape| {
        let joints: usize = shape.iter().product();
        let total: usize = shape.iter().sum();
        (
            prop::collection::vec(-1.0..1.0f64, shape.len() * joints),
            prop::collection::vec(0.0..1.0f64, total),
        )
            .prop_map(move |(payoffs, raw)| {
                let game = NormalFormGame::from_payoffs(&shape, payoffs)
                    .expect("random payoffs are finite");
                let mut marginals = Vec::with_capacity(shape.len());
                let mut off = 0;
                for &k in &shape {
                    marginals.push(normalize_raw(&raw[off..off + k]));
                    off += k;
                }
                (game, marginals)
            })
    })
}

/// Proptest two-player zero-sum game (G₂ = −G₁), payoffs in [-1, 1].
pub fn arb_zero_sum(max_strategies: usize) -> impl Strategy<Value = NormalFormGame> {
    (2..=max_strategies, 2..=max_strategies).prop_flat_map(|(rows, cols)| {
        prop::collection::vec(-1.0..1.0f64, rows * cols).prop_map(move |g1| {
            let mut payoffs = g1.clone();
            payoffs.extend(g1.iter().map(|v| -v));
            NormalFormGame::from_payoffs(&[rows, cols], payoffs)
                .expect("random payoffs are finite")
        })
    })
}
