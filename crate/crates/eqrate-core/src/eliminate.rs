//! Repeated-strategy handling: detect payoff-identical strategies, merge
//! them, and push solved mass back onto the full game.
//!
//! Ratings under a correlated joint are not automatically invariant when a
//! strategy appears several times, because the solver is free to split mass
//! unevenly across the copies. The pipeline here restores invariance:
//! merge duplicates ([`eliminate_exact_duplicates`]), solve the reduced
//! game, then spread each reduced joint's mass equally over its copies
//! ([`redistribute_mass`]). Soft similarity ([`similarity_matrix`],
//! [`repeat_weights`]) instead reweights the solver's objective so that a
//! cluster of near-identical strategies counts roughly once; it never
//! merges anything, since a fractional merge has no defined payoff.

use crate::game::{coords_of, strides, GameError, JointDistribution, NormalFormGame};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum EliminateError {
    #[error("similarity kernel returned {0}, outside [0, 1]")]
    KernelOutOfRange(f64),
    #[error("distribution shape {0:?} does not match the mapping's reduced shape {1:?}")]
    ShapeMismatch(Vec<usize>, Vec<usize>),
    #[error(transparent)]
    Game(#[from] GameError),
}

/// Per-player square similarity matrix with unit diagonal, entries in [0,1].
#[derive(Debug, Clone, Serialize)]
pub struct SimilarityMatrix {
    pub size: usize,
    /// Row-major `size`×`size`.
    pub matrix: Vec<f64>,
}

impl SimilarityMatrix {
    pub fn identity(size: usize) -> Self {
        let mut matrix = vec![0.0; size * size];
        for a in 0..size {
            matrix[a * size + a] = 1.0;
        }
        SimilarityMatrix { size, matrix }
    }

    pub fn get(&self, a: usize, b: usize) -> f64 {
        self.matrix[a * self.size + b]
    }

    /// Row sums s_p(a) = Σ_{a'} S_p(a, a'); at least 1 everywhere.
    pub fn strategy_weights(&self) -> Vec<f64> {
        (0..self.size)
            .map(|a| self.matrix[a * self.size..(a + 1) * self.size].iter().sum())
            .collect()
    }
}

/// How each original strategy maps onto the reduced game.
///
/// `to_reduced[p][a]` is the reduced index of original strategy `a`,
/// `representatives[p][r]` the original index the reduced strategy `r` kept
/// (always the first occurrence), and `counts[p][r]` how many originals
/// merged into it. Counts sum to the original strategy count.
#[derive(Debug, Clone, Serialize)]
pub struct EliminationMapping {
    pub to_reduced: Vec<Vec<usize>>,
    pub representatives: Vec<Vec<usize>>,
    pub counts: Vec<Vec<usize>>,
}

impl EliminationMapping {
    pub fn identity(shape: &[usize]) -> Self {
        EliminationMapping {
            to_reduced: shape.iter().map(|&s| (0..s).collect()).collect(),
            representatives: shape.iter().map(|&s| (0..s).collect()).collect(),
            counts: shape.iter().map(|&s| vec![1; s]).collect(),
        }
    }

    pub fn original_shape(&self) -> Vec<usize> {
        self.to_reduced.iter().map(|m| m.len()).collect()
    }

    pub fn reduced_shape(&self) -> Vec<usize> {
        self.representatives.iter().map(|r| r.len()).collect()
    }

    pub fn is_identity(&self) -> bool {
        self.original_shape() == self.reduced_shape()
    }
}

/// All payoffs involving strategy `a` of `player`, every player's tensor
/// concatenated in flat joint order. Two strategies with matching slices
/// are interchangeable for everyone.
fn payoff_slice(game: &NormalFormGame, player: usize, a: usize) -> Vec<f64> {
    let stride = strides(game.shape())[player];
    let dim = game.shape()[player];
    let mut slice = Vec::with_capacity(game.num_players() * game.joint_count() / dim);
    for q in 0..game.num_players() {
        for flat in 0..game.joint_count() {
            if (flat / stride) % dim == a {
                slice.push(game.payoff(q, flat));
            }
        }
    }
    slice
}

fn slices_match(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

/// Merge strategies whose payoff slices match within `tol` into their first
/// occurrence, repeating until the game has no duplicates left. Returns the
/// reduced game and the composed mapping.
pub fn eliminate_exact_duplicates(
    game: &NormalFormGame,
    tol: f64,
) -> (NormalFormGame, EliminationMapping) {
    assert!(tol >= 0.0 && tol.is_finite(), "duplicate tolerance must be finite and nonnegative");
    let mut current = game.clone();
    let mut to_reduced: Vec<Vec<usize>> = game
        .shape()
        .iter()
        .map(|&s| (0..s).collect())
        .collect();
    loop {
        let mut changed = false;
        // per-player local merge on the current game
        let mut keep: Vec<Vec<usize>> = Vec::with_capacity(current.num_players());
        let mut local: Vec<Vec<usize>> = Vec::with_capacity(current.num_players());
        for p in 0..current.num_players() {
            let slices: Vec<Vec<f64>> = (0..current.shape()[p])
                .map(|a| payoff_slice(&current, p, a))
                .collect();
            let mut reps: Vec<usize> = Vec::new();
            let mut map = vec![0usize; current.shape()[p]];
            for a in 0..current.shape()[p] {
                match reps
                    .iter()
                    .position(|&r| slices_match(&slices[r], &slices[a], tol))
                {
                    Some(idx) => {
                        map[a] = idx;
                        changed = true;
                    }
                    None => {
                        map[a] = reps.len();
                        reps.push(a);
                    }
                }
            }
            keep.push(reps);
            local.push(map);
        }
        if !changed {
            break;
        }
        current = current.restrict(&keep);
        for (p, m) in to_reduced.iter_mut().enumerate() {
            for r in m.iter_mut() {
                *r = local[p][*r];
            }
        }
    }
    let mut representatives: Vec<Vec<usize>> = current
        .shape()
        .iter()
        .map(|&s| vec![usize::MAX; s])
        .collect();
    let mut counts: Vec<Vec<usize>> = current.shape().iter().map(|&s| vec![0; s]).collect();
    for (p, m) in to_reduced.iter().enumerate() {
        for (orig, &red) in m.iter().enumerate() {
            counts[p][red] += 1;
            if representatives[p][red] == usize::MAX {
                representatives[p][red] = orig;
            }
        }
    }
    (
        current,
        EliminationMapping {
            to_reduced,
            representatives,
            counts,
        },
    )
}

/// Build a similarity matrix from a kernel over payoff-slice pairs.
///
/// The kernel must return values in [0,1]; the diagonal is forced to 1.
pub fn similarity_matrix(
    game: &NormalFormGame,
    player: usize,
    kernel: &dyn Fn(&[f64], &[f64]) -> f64,
) -> Result<SimilarityMatrix, EliminateError> {
    let size = game.shape()[player];
    let slices: Vec<Vec<f64>> = (0..size).map(|a| payoff_slice(game, player, a)).collect();
    let mut matrix = vec![0.0; size * size];
    for a in 0..size {
        for b in 0..size {
            let v = if a == b {
                1.0
            } else {
                let v = kernel(&slices[a], &slices[b]);
                if !(0.0..=1.0).contains(&v) {
                    return Err(EliminateError::KernelOutOfRange(v));
                }
                v
            };
            matrix[a * size + b] = v;
        }
    }
    Ok(SimilarityMatrix { size, matrix })
}

/// Kernel that scores 1 when slices agree within `tol` in max norm, else 0.
pub fn threshold_kernel(tol: f64) -> impl Fn(&[f64], &[f64]) -> f64 {
    move |a, b| {
        if slices_match(a, b, tol) {
            1.0
        } else {
            0.0
        }
    }
}

/// Kernel exp(−‖a−b‖² / (2·bandwidth²)) on the slice difference.
pub fn gaussian_kernel(bandwidth: f64) -> impl Fn(&[f64], &[f64]) -> f64 {
    move |a: &[f64], b: &[f64]| {
        let sq: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
        (-sq / (2.0 * bandwidth * bandwidth)).exp()
    }
}

/// Default threshold for near-exact payoffs: 1e-9 of the payoff range.
pub fn default_similarity_tol(game: &NormalFormGame) -> f64 {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for p in 0..game.num_players() {
        let (l, h) = game.payoff_bounds(p);
        lo = lo.min(l);
        hi = hi.max(h);
    }
    1e-9 * (hi - lo).max(0.0)
}

/// Joint repeat weights s(a) = Π_p s_p(a_p) from per-player row sums,
/// flattened in joint order; 1 everywhere under identity similarity. Feed
/// the result to the solver's `weights` so that a cluster of similar
/// strategies contributes to the entropy objective roughly once.
pub fn repeat_weights(similarity: &[SimilarityMatrix]) -> Vec<f64> {
    let per_player: Vec<Vec<f64>> = similarity.iter().map(|s| s.strategy_weights()).collect();
    let shape: Vec<usize> = similarity.iter().map(|s| s.size).collect();
    let joints: usize = shape.iter().product();
    let mut weights = Vec::with_capacity(joints);
    for flat in 0..joints {
        let coords = coords_of(flat, &shape);
        weights.push(
            coords
                .iter()
                .zip(&per_player)
                .map(|(&a, s)| s[a])
                .product(),
        );
    }
    weights
}

/// Lift a distribution over the reduced game back to the original game,
/// splitting every reduced joint's mass equally over the original joints
/// that merged into it.
pub fn redistribute_mass(
    reduced: &JointDistribution,
    mapping: &EliminationMapping,
) -> Result<JointDistribution, EliminateError> {
    if reduced.shape() != mapping.reduced_shape() {
        return Err(EliminateError::ShapeMismatch(
            reduced.shape().to_vec(),
            mapping.reduced_shape(),
        ));
    }
    let shape = mapping.original_shape();
    let joints: usize = shape.iter().product();
    let mut probs = Vec::with_capacity(joints);
    for flat in 0..joints {
        let coords = coords_of(flat, &shape);
        let mut copies = 1.0;
        let reduced_coords: Vec<usize> = coords
            .iter()
            .enumerate()
            .map(|(p, &a)| {
                let r = mapping.to_reduced[p][a];
                copies *= mapping.counts[p][r] as f64;
                r
            })
            .collect();
        probs.push(reduced.prob_at(&reduced_coords) / copies);
    }
    Ok(JointDistribution::new(shape, probs)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::Concept;
    use crate::game::outer_product;
    use crate::games;
    use crate::rating::{payoff_rating, UndefinedPolicy};
    use crate::solver::{solve_max_entropy, SolveConfig};

    /// RPS with the rock strategy appended again as "D" for both players.
    fn rps_with_duplicate() -> NormalFormGame {
        let order = ["R", "P", "S", "D"];
        let beats = |x: &str, y: &str| -> f64 {
            let win = [("R", "S"), ("P", "R"), ("S", "P"), ("P", "D"), ("D", "S")];
            let x = if x == "D" { "R" } else { x };
            let y = if y == "D" { "R" } else { y };
            if x == y {
                0.0
            } else if win.contains(&(x, y)) {
                1.0
            } else {
                -1.0
            }
        };
        let mut payoffs = Vec::new();
        for x in order {
            for y in order {
                payoffs.push(beats(x, y));
            }
        }
        for x in order {
            for y in order {
                payoffs.push(beats(y, x));
            }
        }
        let labels = order.iter().map(|s| vec![s.to_string()]).collect::<Vec<_>>();
        NormalFormGame::new(
            vec![
                order.iter().map(|s| s.to_string()).collect(),
                order.iter().map(|s| s.to_string()).collect(),
            ],
            payoffs,
        )
        .unwrap_or_else(|_| panic!("{labels:?}"))
    }

    #[test]
    fn duplicate_rock_merges_into_first_occurrence() {
        let game = rps_with_duplicate();
        let (reduced, mapping) = eliminate_exact_duplicates(&game, 0.0);
        assert_eq!(reduced.shape(), &[3, 3]);
        assert_eq!(reduced.labels()[0], vec!["R", "P", "S"]);
        assert_eq!(mapping.to_reduced[0], vec![0, 1, 2, 0]);
        assert_eq!(mapping.representatives[0], vec![0, 1, 2]);
        assert_eq!(mapping.counts[0], vec![2, 1, 1]);
        assert_eq!(mapping.counts[0].iter().sum::<usize>(), 4);
        // the kept slices are the original RPS payoffs, bit for bit
        for q in 0..2 {
            for i in 0..3 {
                for j in 0..3 {
                    assert_eq!(
                        reduced.payoff_at(q, &[i, j]),
                        game.payoff_at(q, &[i, j])
                    );
                }
            }
        }
    }

    #[test]
    fn game_without_duplicates_keeps_identity_mapping() {
        let game = games::biased_rock_paper_scissors();
        let (reduced, mapping) = eliminate_exact_duplicates(&game, 1e-9);
        assert_eq!(reduced.shape(), game.shape());
        assert!(mapping.is_identity());
        assert_eq!(mapping.to_reduced[0], vec![0, 1, 2]);
        assert_eq!(mapping.counts[1], vec![1, 1, 1]);
    }

    #[test]
    fn triple_copy_counts_three() {
        // coordination game with the first strategy tripled on both sides
        let g = games::coordination();
        let mut labels = Vec::new();
        let mut payoffs = Vec::new();
        let idx = [0usize, 0, 0, 1];
        for _ in 0..2 {
            labels.push(vec![
                "P".to_string(),
                "P2".to_string(),
                "P3".to_string(),
                "L".to_string(),
            ]);
        }
        for q in 0..2 {
            for &i in &idx {
                for &j in &idx {
                    payoffs.push(g.payoff_at(q, &[i, j]));
                }
            }
        }
        let game = NormalFormGame::new(labels, payoffs).unwrap();
        let (reduced, mapping) = eliminate_exact_duplicates(&game, 0.0);
        assert_eq!(reduced.shape(), &[2, 2]);
        assert_eq!(mapping.counts[0], vec![3, 1]);
        assert_eq!(mapping.to_reduced[0], vec![0, 0, 0, 1]);
    }

    #[test]
    fn exact_kernel_similarity_flags_the_duplicate_pair() {
        let game = rps_with_duplicate();
        let kernel = threshold_kernel(0.0);
        let s = similarity_matrix(&game, 0, &kernel).unwrap();
        assert_eq!(s.get(0, 3), 1.0, "R and D slices coincide");
        assert_eq!(s.get(3, 0), 1.0);
        assert_eq!(s.get(0, 1), 0.0);
        assert_eq!(s.strategy_weights(), vec![2.0, 1.0, 1.0, 2.0]);

        let rps = games::biased_rock_paper_scissors();
        let s = similarity_matrix(&rps, 0, &kernel).unwrap();
        for a in 0..3 {
            for b in 0..3 {
                assert_eq!(s.get(a, b), if a == b { 1.0 } else { 0.0 });
            }
        }

        let ones = similarity_matrix(&rps, 1, &|_: &[f64], _: &[f64]| 1.0).unwrap();
        assert!(ones.matrix.iter().all(|&v| v == 1.0));
        assert_eq!(ones.strategy_weights(), vec![3.0, 3.0, 3.0]);
    }

    #[test]
    fn out_of_range_kernel_is_rejected() {
        let game = games::coordination();
        let err = similarity_matrix(&game, 0, &|_: &[f64], _: &[f64]| 2.0);
        assert!(matches!(err, Err(EliminateError::KernelOutOfRange(v)) if v == 2.0));
        let err = similarity_matrix(&game, 0, &|_: &[f64], _: &[f64]| -0.1);
        assert!(matches!(err, Err(EliminateError::KernelOutOfRange(_))));
    }

    #[test]
    fn gaussian_kernel_decays_with_slice_distance() {
        let game = games::biased_rock_paper_scissors();
        let kernel = gaussian_kernel(1.0);
        let s = similarity_matrix(&game, 0, &kernel).unwrap();
        for a in 0..3 {
            assert_eq!(s.get(a, a), 1.0);
            for b in 0..3 {
                if a != b {
                    assert!(s.get(a, b) > 0.0 && s.get(a, b) < 1.0);
                }
            }
        }
    }

    #[test]
    fn repeat_weights_from_row_sums() {
        let id = vec![SimilarityMatrix::identity(2), SimilarityMatrix::identity(3)];
        assert!(repeat_weights(&id).iter().all(|&w| w == 1.0));

        let game = rps_with_duplicate();
        let kernel = threshold_kernel(0.0);
        let s: Vec<SimilarityMatrix> = (0..2)
            .map(|p| similarity_matrix(&game, p, &kernel).unwrap())
            .collect();
        let w = repeat_weights(&s);
        assert_eq!(w.len(), 16);
        // (R, R) joint: both row sums are 2
        assert_eq!(w[0], 4.0);
        // (P, S) joint: both singletons
        assert_eq!(w[1 * 4 + 2], 1.0);
        // (D, P): 2 * 1
        assert_eq!(w[3 * 4 + 1], 2.0);
        assert!(w.iter().all(|&v| v >= 1.0));
    }

    #[test]
    fn identity_repeat_weights_leave_the_solve_unchanged() {
        let game = games::biased_rock_paper_scissors();
        let id: Vec<SimilarityMatrix> =
            game.shape().iter().map(|&s| SimilarityMatrix::identity(s)).collect();
        let weights = repeat_weights(&id);
        let eps = crate::constraints::epsilon_uniform(&game, Concept::Cce)
            .iter()
            .map(|e| 0.5 * e)
            .collect::<Vec<_>>();
        let plain =
            solve_max_entropy(&game, Concept::Cce, &eps, &SolveConfig::default()).unwrap();
        let weighted = solve_max_entropy(
            &game,
            Concept::Cce,
            &eps,
            &SolveConfig {
                weights: Some(weights),
                ..SolveConfig::default()
            },
        )
        .unwrap();
        for (a, b) in plain.dist.probs().iter().zip(weighted.dist.probs()) {
            assert!((a - b).abs() <= 1e-8, "{a} vs {b}");
        }
    }

    #[test]
    fn redistribution_splits_mass_equally_over_copies() {
        let game = rps_with_duplicate();
        let (_, mapping) = eliminate_exact_duplicates(&game, 0.0);
        let third = 1.0 / 3.0;
        let ne = outer_product(&[vec![third; 3], vec![third; 3]]);
        let lifted = redistribute_mass(&ne, &mapping).unwrap();
        let marginal = lifted.marginal(0);
        assert!((marginal[0] - 1.0 / 6.0).abs() <= 1e-12, "R keeps half its mass");
        assert!((marginal[3] - 1.0 / 6.0).abs() <= 1e-12, "D gets the other half");
        assert!((marginal[1] - third).abs() <= 1e-12);
        assert!((lifted.probs().iter().sum::<f64>() - 1.0).abs() <= 1e-12);

        let identity = EliminationMapping::identity(&[3, 3]);
        let unchanged = redistribute_mass(&ne, &identity).unwrap();
        for (a, b) in unchanged.probs().iter().zip(ne.probs()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }

        let point = JointDistribution::point_mass(&[1, 1], &[0, 0]);
        let mapping = EliminationMapping {
            to_reduced: vec![vec![0, 0], vec![0, 0]],
            representatives: vec![vec![0], vec![0]],
            counts: vec![vec![2], vec![2]],
        };
        let spread = redistribute_mass(&point, &mapping).unwrap();
        assert!(spread.probs().iter().all(|&v| v == 0.25));
    }

    #[test]
    fn redistribution_rejects_mismatched_shapes() {
        let game = rps_with_duplicate();
        let (_, mapping) = eliminate_exact_duplicates(&game, 0.0);
        let wrong = JointDistribution::uniform(&[4, 4]);
        assert!(matches!(
            redistribute_mass(&wrong, &mapping),
            Err(EliminateError::ShapeMismatch(..))
        ));
    }

    #[test]
    fn redistribution_preserves_expected_payoffs() {
        let game = rps_with_duplicate();
        let (reduced, mapping) = eliminate_exact_duplicates(&game, 0.0);
        let eps = crate::constraints::epsilon_uniform(&reduced, Concept::Cce)
            .iter()
            .map(|e| 0.3 * e)
            .collect::<Vec<_>>();
        let sol =
            solve_max_entropy(&reduced, Concept::Cce, &eps, &SolveConfig::default()).unwrap();
        let lifted = redistribute_mass(&sol.dist, &mapping).unwrap();
        for p in 0..2 {
            let full = crate::game::expected_payoff(&game, &lifted, p).unwrap();
            let red = crate::game::expected_payoff(&reduced, &sol.dist, p).unwrap();
            assert!((full - red).abs() <= 1e-12, "{full} vs {red}");
        }
    }

    #[test]
    fn duplicate_ratings_match_each_other_and_the_unduplicated_game() {
        let game = rps_with_duplicate();
        let (reduced, mapping) = eliminate_exact_duplicates(&game, 0.0);
        let eps = crate::constraints::epsilon_uniform(&reduced, Concept::Cce)
            .iter()
            .map(|e| 0.5 * e)
            .collect::<Vec<_>>();
        let config = SolveConfig::default();
        let sol = solve_max_entropy(&reduced, Concept::Cce, &eps, &config).unwrap();
        let lifted = redistribute_mass(&sol.dist, &mapping).unwrap();
        let full_report =
            payoff_rating(&game, &lifted, UndefinedPolicy::MarkUndefined, 1e-9, None).unwrap();
        let reduced_report =
            payoff_rating(&reduced, &sol.dist, UndefinedPolicy::MarkUndefined, 1e-9, None)
                .unwrap();
        for p in 0..2 {
            let r_copy = full_report.players[p][3].rating.unwrap();
            let r_orig = full_report.players[p][0].rating.unwrap();
            let r_reduced = reduced_report.players[p][0].rating.unwrap();
            assert!((r_copy - r_orig).abs() <= 1e-6, "{r_copy} vs {r_orig}");
            assert!((r_orig - r_reduced).abs() <= 1e-6, "{r_orig} vs {r_reduced}");
        }
    }

    #[test]
    fn default_similarity_tol_tracks_payoff_range() {
        let game = games::chicken();
        // payoffs span [-10, 1]
        assert!((default_similarity_tol(&game) - 1.1e-8).abs() <= 1e-20);
    }
}
