//! Rating strategies in N-player general-sum games by their expected payoff
//! against equilibrium play.
//!
//! The pipeline: describe a finite normal-form game ([`game`]), pick an
//! equilibrium concept and build its deviation-gain constraints
//! ([`constraints`]), select one joint distribution from the feasible set by
//! maximizing entropy, a Gini-style concentration index, or welfare
//! ([`solver`]), then read off each strategy's rating as its conditional
//! expected payoff under that distribution ([`rating`]). Games can be built
//! from match records ([`ingest`]) and compressed by removing duplicate
//! strategies ([`eliminate`]).

pub mod constraints;
pub mod eliminate;
pub mod game;
pub mod games;
pub mod ingest;
pub mod rating;
pub mod simplex;
pub mod solver;

pub use constraints::{
    build_constraints, epsilon_min, epsilon_min_per_player, epsilon_uniform, max_violation,
    Concept, DeviationConstraints, EpsilonMin,
};
pub use eliminate::{
    default_similarity_tol, eliminate_exact_duplicates, gaussian_kernel, redistribute_mass,
    repeat_weights, similarity_matrix, threshold_kernel, EliminateError, EliminationMapping,
    SimilarityMatrix,
};
pub use game::{
    expected_payoff, is_symmetric, load_game, outer_product, JointDistribution, NormalFormGame,
};
pub use ingest::{
    build_location_game, build_points_game, build_winprob_game, parse_match_csv,
    parse_match_records, DrawRule, IngestError, MatchRecord, Outcome, ScoringRule,
};
pub use rating::{
    default_group_tols, epsilon_sweep, mass_rating, payoff_rating, rank_from_ratings,
    rank_from_ratings_per_player, uniform_rating, RatingEntry, RatingError, RatingReport,
    ReportMeta, SelectionSolver, SubgameSolver, SweepEntry, SweepPoint, UndefinedPolicy,
};
pub use solver::{
    resolve_epsilon, solve, solve_max_entropy, solve_max_gini, solve_max_welfare,
    solve_mene_2p0s, EpsilonMode, EquilibriumSolution, Selection, SolveConcept, SolveConfig,
    SolverError,
};
