//! Payoff ratings: each strategy's expected payoff under a joint
//! distribution, conditioned on the strategy actually being played.
//!
//! The rating of strategy a_p is Σ_{a_{-p}} G_p(a_p, a_{-p}) σ(a_{-p}|a_p).
//! It is undefined when a_p carries (numerically) no mass; the three
//! handling policies mirror the usual choices: report the hole, assign the
//! worst payoff, or re-solve a sub-game over the unplayed strategies and
//! rate them there, ranked below everything that was played.

use crate::constraints::Concept;
use crate::game::{
    expected_payoff, GameError, JointDistribution, NormalFormGame, DEFAULT_ZERO_THRESHOLD,
};
use crate::solver::{
    self, Selection, SolveConcept, SolveConfig, SolverError,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// What to do with strategies whose marginal mass is at or below the
/// zero-mass threshold, where the conditional payoff is undefined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum UndefinedPolicy {
    /// Report the rating as missing.
    MarkUndefined,
    /// Assign the player's minimum payoff, making every rating comparable.
    AssignMinPayoff,
    /// Re-solve the sub-game restricted to each player's unplayed
    /// strategies and rate them there, flagged as ranking below all played
    /// strategies.
    PruneAndRerate,
}

impl std::fmt::Display for UndefinedPolicy {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            UndefinedPolicy::MarkUndefined => "mark",
            UndefinedPolicy::AssignMinPayoff => "min-payoff",
            UndefinedPolicy::PruneAndRerate => "prune",
        })
    }
}

#[derive(Debug, Error)]
pub enum RatingError {
    #[error("game shape {0:?} does not match distribution shape {1:?}")]
    ShapeMismatch(Vec<usize>, Vec<usize>),
    #[error("zero-mass threshold must be finite and nonnegative, got {0}")]
    BadThreshold(f64),
    #[error("prune-and-rerate requires a sub-game solver")]
    MissingSubgameSolver,
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Game(#[from] GameError),
}

/// One strategy's rating line.
#[derive(Debug, Clone, Serialize)]
pub struct RatingEntry {
    pub label: String,
    /// Payoff-units rating; `None` when undefined under the policy.
    pub rating: Option<f64>,
    /// Whether the rating came from a conditional that actually exists
    /// (or was assigned by the min-payoff policy).
    pub defined: bool,
    /// Set when the value came from a pruned sub-game solve; such
    /// strategies rank below every directly rated one.
    pub pruned: bool,
    /// Marginal probability of the strategy under the joint used.
    pub mass: f64,
}

/// Where the joint distribution being rated came from.
#[derive(Debug, Clone, Default, Serialize)]
pub struct ReportMeta {
    pub concept: Option<String>,
    pub selection: Option<String>,
    pub epsilon: Option<Vec<f64>>,
    pub policy: Option<String>,
    pub zero_mass_threshold: f64,
}

/// Ratings for every player's strategies under one joint distribution.
#[derive(Debug, Clone, Serialize)]
pub struct RatingReport {
    pub players: Vec<Vec<RatingEntry>>,
    pub joint_used: JointDistribution,
    /// Per-player expected payoff Σ_a G_p(a) σ(a).
    pub expected_payoff: Vec<f64>,
    pub metadata: ReportMeta,
}

/// Produces the joint distribution used to rate a pruned sub-game.
pub trait SubgameSolver {
    fn solve(&self, game: &NormalFormGame) -> Result<JointDistribution, SolverError>;
}

impl<F> SubgameSolver for F
where
    F: Fn(&NormalFormGame) -> Result<JointDistribution, SolverError>,
{
    fn solve(&self, game: &NormalFormGame) -> Result<JointDistribution, SolverError> {
        self(game)
    }
}

/// Sub-game solver that runs the configured equilibrium selection.
#[derive(Debug, Clone)]
pub struct SelectionSolver {
    pub config: SolveConfig,
}

impl SubgameSolver for SelectionSolver {
    fn solve(&self, game: &NormalFormGame) -> Result<JointDistribution, SolverError> {
        solver::solve(game, &self.config).map(|s| s.dist)
    }
}

/// Rate every strategy of every player under `dist`.
///
/// `zero_mass_threshold` (τ) decides when a marginal counts as zero;
/// `subgame_solver` is only consulted by the prune-and-rerate policy, which
/// restricts the game to each player's unplayed strategies (players with
/// none keep their full strategy set), solves that sub-game, and rates the
/// pruned strategies inside it. Strategies still unplayed in the sub-game
/// stay undefined; the re-rating does not recurse.
pub fn payoff_rating(
    game: &NormalFormGame,
    dist: &JointDistribution,
    policy: UndefinedPolicy,
    zero_mass_threshold: f64,
    subgame_solver: Option<&dyn SubgameSolver>,
) -> Result<RatingReport, RatingError> {
    if game.shape() != dist.shape() {
        return Err(RatingError::ShapeMismatch(
            game.shape().to_vec(),
            dist.shape().to_vec(),
        ));
    }
    if !zero_mass_threshold.is_finite() || zero_mass_threshold < 0.0 {
        return Err(RatingError::BadThreshold(zero_mass_threshold));
    }
    let n = game.num_players();
    let mut players = Vec::with_capacity(n);
    for p in 0..n {
        let marginal = dist.marginal(p);
        let (lo, hi) = game.payoff_bounds(p);
        let mut entries = Vec::with_capacity(game.shape()[p]);
        for a in 0..game.shape()[p] {
            let entry = match dist.conditional(p, a, zero_mass_threshold) {
                Some(cond) => {
                    let mut r = 0.0;
                    let mut idx = 0;
                    let stride = crate::game::strides(game.shape())[p];
                    let dim = game.shape()[p];
                    for flat in 0..game.joint_count() {
                        if (flat / stride) % dim == a {
                            r += game.payoff(p, flat) * cond[idx];
                            idx += 1;
                        }
                    }
                    RatingEntry {
                        label: game.labels()[p][a].clone(),
                        rating: Some(r.clamp(lo, hi)),
                        defined: true,
                        pruned: false,
                        mass: marginal[a],
                    }
                }
                None => RatingEntry {
                    label: game.labels()[p][a].clone(),
                    rating: match policy {
                        UndefinedPolicy::AssignMinPayoff => Some(lo),
                        _ => None,
                    },
                    defined: matches!(policy, UndefinedPolicy::AssignMinPayoff),
                    pruned: false,
                    mass: marginal[a],
                },
            };
            entries.push(entry);
        }
        players.push(entries);
    }

    if matches!(policy, UndefinedPolicy::PruneAndRerate) {
        rerate_pruned(game, &mut players, zero_mass_threshold, subgame_solver)?;
    }

    let expected = (0..n)
        .map(|p| expected_payoff(game, dist, p))
        .collect::<Result<Vec<f64>, GameError>>()?;
    Ok(RatingReport {
        players,
        joint_used: dist.clone(),
        expected_payoff: expected,
        metadata: ReportMeta {
            policy: Some(policy.to_string()),
            zero_mass_threshold,
            ..ReportMeta::default()
        },
    })
}

fn rerate_pruned(
    game: &NormalFormGame,
    players: &mut [Vec<RatingEntry>],
    zero_mass_threshold: f64,
    subgame_solver: Option<&dyn SubgameSolver>,
) -> Result<(), RatingError> {
    let pruned: Vec<Vec<usize>> = players
        .iter()
        .map(|entries| {
            entries
                .iter()
                .enumerate()
                .filter(|(_, e)| !e.defined)
                .map(|(a, _)| a)
                .collect()
        })
        .collect();
    // keep the unplayed strategies; a player with all strategies played (or,
    // degenerately, none) participates with their full set
    let keep: Vec<Vec<usize>> = pruned
        .iter()
        .enumerate()
        .map(|(p, set)| {
            if set.is_empty() || set.len() == game.shape()[p] {
                (0..game.shape()[p]).collect()
            } else {
                set.clone()
            }
        })
        .collect();
    let reduced = keep.iter().zip(game.shape()).any(|(k, &s)| k.len() < s);
    if !reduced {
        return Ok(());
    }
    let solver = subgame_solver.ok_or(RatingError::MissingSubgameSolver)?;
    let sub = game.restrict(&keep);
    let sub_dist = solver.solve(&sub)?;
    let sub_report = payoff_rating(
        &sub,
        &sub_dist,
        UndefinedPolicy::MarkUndefined,
        zero_mass_threshold,
        None,
    )?;
    for (p, set) in pruned.iter().enumerate() {
        if set.is_empty() || set.len() == game.shape()[p] {
            continue;
        }
        for (sub_idx, &orig) in keep[p].iter().enumerate() {
            let sub_entry = &sub_report.players[p][sub_idx];
            let entry = &mut players[p][orig];
            entry.rating = sub_entry.rating;
            entry.defined = sub_entry.defined;
            entry.pruned = true;
        }
    }
    Ok(())
}

/// Mean payoff of each strategy against a uniform opponent profile:
/// exactly `payoff_rating` under the uniform joint distribution.
pub fn uniform_rating(game: &NormalFormGame) -> RatingReport {
    let uniform = JointDistribution::uniform(game.shape());
    payoff_rating(game, &uniform, UndefinedPolicy::MarkUndefined, 0.0, None)
        .expect("uniform joint matches the game shape")
}

/// Marginal probabilities as ratings.
pub fn mass_rating(dist: &JointDistribution) -> Vec<Vec<f64>> {
    (0..dist.shape().len()).map(|p| dist.marginal(p)).collect()
}

/// Per-player grouping tolerance: 1e-4 of the player's payoff range.
pub fn default_group_tols(game: &NormalFormGame) -> Vec<f64> {
    (0..game.num_players())
        .map(|p| {
            let (lo, hi) = game.payoff_bounds(p);
            1e-4 * (hi - lo)
        })
        .collect()
}

/// Rank strategies into ordered groups, one tolerance for all players.
///
/// Strategies are sorted by descending rating; a strategy joins the current
/// group while the gap to the previous rating is at most `group_tol`.
/// Pruned strategies come after all directly rated ones (grouped among
/// themselves), and undefined strategies form the final group.
pub fn rank_from_ratings(report: &RatingReport, group_tol: f64) -> Vec<Vec<Vec<String>>> {
    let tols = vec![group_tol; report.players.len()];
    rank_from_ratings_per_player(report, &tols)
}

/// As [`rank_from_ratings`] with one tolerance per player.
pub fn rank_from_ratings_per_player(
    report: &RatingReport,
    group_tols: &[f64],
) -> Vec<Vec<Vec<String>>> {
    report
        .players
        .iter()
        .zip(group_tols)
        .map(|(entries, &tol)| {
            let mut groups = group_tier(entries.iter().filter(|e| !e.pruned), tol);
            groups.extend(group_tier(entries.iter().filter(|e| e.pruned), tol));
            let undefined: Vec<String> = entries
                .iter()
                .filter(|e| e.rating.is_none())
                .map(|e| e.label.clone())
                .collect();
            if !undefined.is_empty() {
                groups.push(undefined);
            }
            groups
        })
        .collect()
}

fn group_tier<'a>(
    entries: impl Iterator<Item = &'a RatingEntry>,
    tol: f64,
) -> Vec<Vec<String>> {
    let mut rated: Vec<(&str, f64)> = entries
        .filter_map(|e| e.rating.map(|r| (e.label.as_str(), r)))
        .collect();
    rated.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(std::cmp::Ordering::Equal));
    let mut groups: Vec<Vec<String>> = Vec::new();
    let mut prev: Option<f64> = None;
    for (label, r) in rated {
        match prev {
            Some(p) if p - r <= tol => groups.last_mut().unwrap().push(label.to_string()),
            _ => groups.push(vec![label.to_string()]),
        }
        prev = Some(r);
    }
    groups
}

/// One strategy's line at one sweep point.
#[derive(Debug, Clone, Serialize)]
pub struct SweepEntry {
    pub label: String,
    pub mass: f64,
    pub rating: Option<f64>,
    pub defined: bool,
}

/// One normalized-ε grid point of a sweep.
#[derive(Debug, Clone, Serialize)]
pub struct SweepPoint {
    pub rho: f64,
    /// The per-player ε actually solved (after clamping).
    pub epsilon: Vec<f64>,
    /// True when ρ·ε^uni fell at or below ε^min and was lifted just above it.
    pub clamped: bool,
    pub converged: bool,
    pub entropy: Option<f64>,
    pub error: Option<String>,
    pub players: Vec<Vec<SweepEntry>>,
}

/// Solve and rate across a grid of normalized ε values ρ (ε_p = ρ·ε^uni_p).
///
/// Grid points whose ε would leave the feasible polytope empty are clamped
/// to just above ε^min and flagged. Per-point solver failures are recorded
/// on the point rather than aborting the sweep. Points run in parallel;
/// the output is sorted by ρ.
pub fn epsilon_sweep(
    game: &NormalFormGame,
    concept: Concept,
    selection: Selection,
    grid: &[f64],
    policy: UndefinedPolicy,
    config: &SolveConfig,
) -> Result<Vec<SweepPoint>, SolverError> {
    if grid.iter().any(|r| !r.is_finite()) {
        return Err(SolverError::BadEpsilon("grid values must be finite".into()));
    }
    let eps_uni = crate::constraints::epsilon_uniform(game, concept);
    let eps_min = crate::constraints::epsilon_min(game, concept)?.epsilon[0];
    let clamp_delta = solver::DEFAULT_DELTA_ABS.max(solver::DEFAULT_DELTA_REL * eps_min.abs());
    // the feasibility minimum is an LP value and carries noise; anything
    // within that noise of the boundary cannot support an interior solve
    let clamp_guard = 1e-12 * (1.0 + eps_min.abs());

    let prune_solver = SelectionSolver {
        config: SolveConfig {
            concept: match concept {
                Concept::Ce => SolveConcept::Ce,
                Concept::Cce => SolveConcept::Cce,
            },
            selection,
            ..config.clone()
        },
    };

    let mut points: Vec<SweepPoint> = grid
        .par_iter()
        .map(|&rho| {
            let mut clamped = false;
            let epsilon: Vec<f64> = eps_uni
                .iter()
                .map(|u| {
                    let e = rho * u;
                    if eps_min.is_finite() && e <= eps_min + clamp_guard {
                        clamped = true;
                        eps_min + clamp_delta
                    } else {
                        e
                    }
                })
                .collect();
            let solved = match selection {
                Selection::MaxEntropy => solver::solve_max_entropy(game, concept, &epsilon, config),
                Selection::MaxGini => solver::solve_max_gini(game, concept, &epsilon, config),
                Selection::MaxWelfare => solver::solve_max_welfare(game, concept, &epsilon, config),
            };
            match solved.and_then(|sol| {
                let report = payoff_rating(
                    game,
                    &sol.dist,
                    policy,
                    DEFAULT_ZERO_THRESHOLD,
                    Some(&prune_solver),
                )
                .map_err(|e| match e {
                    RatingError::Solver(s) => s,
                    other => SolverError::BadEpsilon(other.to_string()),
                })?;
                Ok((sol, report))
            }) {
                Ok((sol, report)) => SweepPoint {
                    rho,
                    epsilon,
                    clamped,
                    converged: sol.converged,
                    entropy: Some(sol.dist.entropy()),
                    error: None,
                    players: report
                        .players
                        .iter()
                        .map(|entries| {
                            entries
                                .iter()
                                .map(|e| SweepEntry {
                                    label: e.label.clone(),
                                    mass: e.mass,
                                    rating: e.rating,
                                    defined: e.defined,
                                })
                                .collect()
                        })
                        .collect(),
                },
                Err(err) => {
                    log::warn!("sweep point rho={rho} failed: {err}");
                    SweepPoint {
                        rho,
                        epsilon,
                        clamped,
                        converged: false,
                        entropy: None,
                        error: Some(err.to_string()),
                        players: Vec::new(),
                    }
                }
            }
        })
        .collect();
    points.sort_by(|a, b| a.rho.partial_cmp(&b.rho).unwrap_or(std::cmp::Ordering::Equal));
    Ok(points)
}
