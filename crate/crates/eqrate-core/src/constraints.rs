//! Deviation-gain constraint matrices and feasibility bounds.
//!
//! A joint distribution σ is an ε-equilibrium when every player's maximum
//! deviation gain is at most their ε. Gains are linear in σ, so each
//! equilibrium concept is a stacked constraint matrix `A` with the test
//! `Aσ ≤ ε`:
//!
//! - swap deviations ("after seeing the recommendation"): one row per
//!   (player, deviate-to, deviate-from) triple, nonzero only on joints
//!   whose player coordinate equals deviate-from;
//! - coarse deviations ("before seeing the recommendation"): one row per
//!   (player, deviate-to) pair.
//!
//! Swap rows with deviate-to = deviate-from are stored as explicit zero
//! rows so row indexing stays a pure function of the triple, but they are
//! excluded from violations and feasibility bounds: gaining nothing by
//! staying put says nothing about the distribution, and keeping the zero
//! rows in would clamp every violation measure at zero.

use crate::game::{coord_of, GameError, JointDistribution, NormalFormGame};
use crate::simplex::{self, LinearProgram, LpError, Relation};
use serde::{Deserialize, Serialize};

/// Equilibrium concept selecting which deviation family constrains σ.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Concept {
    /// Correlated equilibrium: swap deviations conditioned on the
    /// recommended strategy.
    Ce,
    /// Coarse correlated equilibrium: unconditional deviations.
    Cce,
}

impl std::fmt::Display for Concept {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Concept::Ce => "ce",
            Concept::Cce => "cce",
        })
    }
}

/// Identifies one constraint row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RowMeta {
    pub player: usize,
    pub deviate_to: usize,
    /// `Some` for swap rows, `None` for coarse rows.
    pub deviate_from: Option<usize>,
}

impl RowMeta {
    pub fn is_self_deviation(&self) -> bool {
        self.deviate_from == Some(self.deviate_to)
    }
}

/// Stacked deviation-gain matrix for one game and concept.
///
/// Rows are ordered player-major: all of player 0's rows first. Within a
/// player, swap rows are ordered (deviate-to, deviate-from) row-major and
/// coarse rows by deviate-to.
#[derive(Debug, Clone)]
pub struct DeviationConstraints {
    concept: Concept,
    num_players: usize,
    cols: usize,
    matrix: Vec<f64>,
    row_meta: Vec<RowMeta>,
}

impl DeviationConstraints {
    pub fn concept(&self) -> Concept {
        self.concept
    }

    pub fn num_players(&self) -> usize {
        self.num_players
    }

    pub fn num_rows(&self) -> usize {
        self.row_meta.len()
    }

    pub fn num_cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.matrix[r * self.cols..(r + 1) * self.cols]
    }

    pub fn meta(&self, r: usize) -> RowMeta {
        self.row_meta[r]
    }

    pub fn row_metas(&self) -> &[RowMeta] {
        &self.row_meta
    }

    /// Row index for a deviation. Swap rows take `deviate_from = Some(..)`,
    /// coarse rows `None`; the choice must match the concept.
    pub fn row_index(
        &self,
        player: usize,
        deviate_to: usize,
        deviate_from: Option<usize>,
    ) -> Option<usize> {
        let meta = RowMeta { player, deviate_to, deviate_from };
        // rows are generated in deterministic order, scan is fine at this scale
        self.row_meta.iter().position(|m| *m == meta)
    }

    /// Per-constraint deviation gains `Aσ` for flattened probabilities.
    pub fn gains(&self, probs: &[f64]) -> Vec<f64> {
        self.row_meta
            .iter()
            .enumerate()
            .map(|(r, _)| {
                self.row(r)
                    .iter()
                    .zip(probs)
                    .map(|(a, p)| a * p)
                    .sum()
            })
            .collect()
    }

    /// Indices of rows that actually constrain distributions (excludes
    /// stored self-deviation swap rows).
    pub fn effective_rows(&self) -> impl Iterator<Item = usize> + '_ {
        self.row_meta
            .iter()
            .enumerate()
            .filter(|(_, m)| !m.is_self_deviation())
            .map(|(r, _)| r)
    }

    /// Per-player maximum deviation gain under `dist`. A distribution is an
    /// ε-equilibrium for this concept iff the result is ≤ ε component-wise.
    /// Players with no effective rows (single-strategy players under the
    /// swap concept) report `f64::NEG_INFINITY`: no deviation exists, so no
    /// tolerance can be violated.
    pub fn max_violation(&self, dist: &JointDistribution) -> Vec<f64> {
        let probs = dist.probs();
        let mut out = vec![f64::NEG_INFINITY; self.num_players];
        for r in self.effective_rows() {
            let gain: f64 = self.row(r).iter().zip(probs).map(|(a, p)| a * p).sum();
            let p = self.row_meta[r].player;
            if gain > out[p] {
                out[p] = gain;
            }
        }
        out
    }
}

/// Build the stacked deviation-gain matrix for a game and concept.
pub fn build_constraints(game: &NormalFormGame, concept: Concept) -> DeviationConstraints {
    let shape = game.shape();
    let k = game.joint_count();
    let n = game.num_players();
    let num_rows: usize = match concept {
        Concept::Ce => shape.iter().map(|s| s * s).sum(),
        Concept::Cce => shape.iter().sum(),
    };
    let mut matrix = vec![0.0; num_rows * k];
    let mut row_meta = Vec::with_capacity(num_rows);
    let mut r = 0;
    for p in 0..n {
        let stride = game.strides()[p];
        let dim = shape[p];
        for deviate_to in 0..dim {
            match concept {
                Concept::Cce => {
                    let row = &mut matrix[r * k..(r + 1) * k];
                    for (flat, slot) in row.iter_mut().enumerate() {
                        let ap = coord_of(flat, stride, dim);
                        let swapped = flat - ap * stride + deviate_to * stride;
                        *slot = game.payoff(p, swapped) - game.payoff(p, flat);
                    }
                    row_meta.push(RowMeta { player: p, deviate_to, deviate_from: None });
                    r += 1;
                }
                Concept::Ce => {
                    for deviate_from in 0..dim {
                        if deviate_from != deviate_to {
                            let row = &mut matrix[r * k..(r + 1) * k];
                            for (flat, slot) in row.iter_mut().enumerate() {
                                if coord_of(flat, stride, dim) == deviate_from {
                                    let swapped =
                                        flat - deviate_from * stride + deviate_to * stride;
                                    *slot = game.payoff(p, swapped) - game.payoff(p, flat);
                                }
                            }
                        }
                        row_meta.push(RowMeta {
                            player: p,
                            deviate_to,
                            deviate_from: Some(deviate_from),
                        });
                        r += 1;
                    }
                }
            }
        }
    }
    DeviationConstraints { concept, num_players: n, cols: k, matrix, row_meta }
}

/// Per-player maximum deviation gain of `dist` in `game`.
pub fn max_violation(
    game: &NormalFormGame,
    dist: &JointDistribution,
    concept: Concept,
) -> Result<Vec<f64>, GameError> {
    if game.shape() != dist.shape() {
        return Err(GameError::ShapeMismatch(format!(
            "game shape {:?} vs distribution shape {:?}",
            game.shape(),
            dist.shape()
        )));
    }
    Ok(build_constraints(game, concept).max_violation(dist))
}

/// Smallest per-player ε making the uniform distribution feasible, in
/// closed form. Always nonnegative.
pub fn epsilon_uniform(game: &NormalFormGame, concept: Concept) -> Vec<f64> {
    let shape = game.shape();
    let k = game.joint_count() as f64;
    let mut out = Vec::with_capacity(game.num_players());
    for p in 0..game.num_players() {
        let stride = game.strides()[p];
        let dim = shape[p];
        let mut strategy_totals = vec![0.0; dim];
        let mut total = 0.0;
        for flat in 0..game.joint_count() {
            let v = game.payoff(p, flat);
            strategy_totals[coord_of(flat, stride, dim)] += v;
            total += v;
        }
        let max = strategy_totals.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let min = strategy_totals.iter().cloned().fold(f64::INFINITY, f64::min);
        out.push(match concept {
            Concept::Ce => (max - min) / k,
            Concept::Cce => (dim as f64 * max - total) / k,
        });
    }
    out
}

/// Result of a minimum-feasibility solve: the smallest ε (shared scalar, or
/// lexicographic per player) together with a distribution attaining it.
#[derive(Debug, Clone)]
pub struct EpsilonMin {
    pub epsilon: Vec<f64>,
    pub witness: JointDistribution,
}

fn witness_from_lp(shape: &[usize], x: &[f64]) -> JointDistribution {
    let mut probs: Vec<f64> = x.iter().map(|&v| v.max(0.0)).collect();
    let sum: f64 = probs.iter().sum();
    for v in probs.iter_mut() {
        *v /= sum;
    }
    JointDistribution::new(shape.to_vec(), probs)
        .expect("simplex-constrained LP solution is a distribution")
}

/// Minimum shared ε for which the concept's polytope is nonempty, via the
/// LP `min t : Aσ ≤ t·1, σ ∈ simplex`. The optimum can be negative. When no
/// player has an effective deviation row the bound is −∞ and the uniform
/// distribution is returned as witness.
pub fn epsilon_min(game: &NormalFormGame, concept: Concept) -> Result<EpsilonMin, LpError> {
    let cons = build_constraints(game, concept);
    let k = game.joint_count();
    let n = game.num_players();
    let effective: Vec<usize> = cons.effective_rows().collect();
    if effective.is_empty() {
        return Ok(EpsilonMin {
            epsilon: vec![f64::NEG_INFINITY; n],
            witness: JointDistribution::uniform(game.shape()),
        });
    }
    // variables: sigma (k entries), then t
    let mut objective = vec![0.0; k + 1];
    objective[k] = 1.0;
    let mut lp = LinearProgram::new(objective);
    lp.mark_free(k);
    for &r in &effective {
        let mut coeffs = cons.row(r).to_vec();
        coeffs.push(-1.0);
        lp.constrain(coeffs, Relation::Le, 0.0);
    }
    let mut simplex_row = vec![1.0; k];
    simplex_row.push(0.0);
    lp.constrain(simplex_row, Relation::Eq, 1.0);
    let sol = simplex::solve(&lp)?;
    Ok(EpsilonMin {
        epsilon: vec![sol.objective; n],
        witness: witness_from_lp(game.shape(), &sol.x[..k]),
    })
}

/// Lexicographic per-player variant: minimize player 0's ε, fix it, then
/// player 1's, and so on in player order. Each stage adds a small slack
/// (1e-11 · scale) to the fixed values so rounding in earlier stages cannot
/// make later stages infeasible. Players without effective rows get −∞.
pub fn epsilon_min_per_player(
    game: &NormalFormGame,
    concept: Concept,
) -> Result<EpsilonMin, LpError> {
    let cons = build_constraints(game, concept);
    let k = game.joint_count();
    let n = game.num_players();
    let mut has_rows = vec![false; n];
    for r in cons.effective_rows() {
        has_rows[cons.meta(r).player] = true;
    }
    // variables: sigma, then one t per player that has rows
    let mut t_var = vec![usize::MAX; n];
    let mut nvars = k;
    for p in 0..n {
        if has_rows[p] {
            t_var[p] = nvars;
            nvars += 1;
        }
    }
    if nvars == k {
        return Ok(EpsilonMin {
            epsilon: vec![f64::NEG_INFINITY; n],
            witness: JointDistribution::uniform(game.shape()),
        });
    }

    let mut base = LinearProgram::new(vec![0.0; nvars]);
    for p in 0..n {
        if has_rows[p] {
            base.mark_free(t_var[p]);
        }
    }
    for r in cons.effective_rows() {
        let mut coeffs = vec![0.0; nvars];
        coeffs[..k].copy_from_slice(cons.row(r));
        coeffs[t_var[cons.meta(r).player]] = -1.0;
        base.constrain(coeffs, Relation::Le, 0.0);
    }
    let mut simplex_row = vec![0.0; nvars];
    simplex_row[..k].fill(1.0);
    base.constrain(simplex_row, Relation::Eq, 1.0);

    let mut epsilon = vec![f64::NEG_INFINITY; n];
    let mut witness = JointDistribution::uniform(game.shape());
    for p in 0..n {
        if !has_rows[p] {
            continue;
        }
        let mut lp = base.clone();
        lp.minimize[t_var[p]] = 1.0;
        let sol = simplex::solve(&lp)?;
        epsilon[p] = sol.objective;
        witness = witness_from_lp(game.shape(), &sol.x[..k]);
        let mut bound = vec![0.0; nvars];
        bound[t_var[p]] = 1.0;
        base.constrain(bound, Relation::Le, sol.objective + 1e-11 * (1.0 + sol.objective.abs()));
    }
    Ok(EpsilonMin { epsilon, witness })
}
