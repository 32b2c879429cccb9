//! Payoff tensors, joint distributions, and the JSON game document format.
//!
//! Payoffs are stored flat, player-major then row-major over joint
//! strategies, so `payoffs[p * joint_count + flat(a)]` is player `p`'s
//! payoff at the joint strategy `a`. One canonical layout keeps the
//! constraint-matrix indexing in [`crate::constraints`] unambiguous.

use serde::{Deserialize, Serialize};
use std::path::Path;
use thiserror::Error;

/// Joint probabilities must sum to one within this tolerance.
pub const DIST_SUM_TOL: f64 = 1e-9;

/// Marginals below this threshold leave the conditional distribution
/// undefined, unless a caller overrides the threshold.
pub const DEFAULT_ZERO_THRESHOLD: f64 = 1e-9;

/// Payoff tensors are expected to be exact, so the symmetry check defaults
/// to an essentially exact comparison.
pub const DEFAULT_SYMMETRY_TOL: f64 = 1e-12;

#[derive(Debug, Error)]
pub enum GameError {
    #[error("failed to parse game document: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("game must have at least one player")]
    NoPlayers,
    #[error("player {0} has an empty strategy list")]
    EmptyStrategyList(usize),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("payoff {index} for player {player} is not finite")]
    NonFinitePayoff { player: usize, index: usize },
    #[error("invalid distribution: {0}")]
    BadDistribution(String),
}

/// Row-major strides for a tensor shape.
pub(crate) fn strides(shape: &[usize]) -> Vec<usize> {
    let mut out = vec![1; shape.len()];
    for i in (0..shape.len().saturating_sub(1)).rev() {
        out[i] = out[i + 1] * shape[i + 1];
    }
    out
}

/// Decode one coordinate of a flat row-major index.
pub(crate) fn coord_of(flat: usize, stride: usize, dim: usize) -> usize {
    (flat / stride) % dim
}

/// Decode a full coordinate tuple from a flat row-major index.
pub(crate) fn coords_of(flat: usize, shape: &[usize]) -> Vec<usize> {
    let mut out = vec![0; shape.len()];
    let mut rem = flat;
    for i in (0..shape.len()).rev() {
        out[i] = rem % shape[i];
        rem /= shape[i];
    }
    out
}

pub(crate) fn flat_of(coords: &[usize], strides: &[usize]) -> usize {
    coords.iter().zip(strides).map(|(c, s)| c * s).sum()
}

/// An N-player normal-form game: per-player strategy labels plus one payoff
/// tensor per player over the joint strategy space.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalFormGame {
    labels: Vec<Vec<String>>,
    shape: Vec<usize>,
    strides: Vec<usize>,
    payoffs: Vec<f64>,
}

impl NormalFormGame {
    /// Build a game from per-player strategy labels and a flat payoff
    /// vector (player-major, row-major joints within each player block).
    pub fn new(labels: Vec<Vec<String>>, payoffs: Vec<f64>) -> Result<Self, GameError> {
        if labels.is_empty() {
            return Err(GameError::NoPlayers);
        }
        for (p, l) in labels.iter().enumerate() {
            if l.is_empty() {
                return Err(GameError::EmptyStrategyList(p));
            }
        }
        let shape: Vec<usize> = labels.iter().map(|l| l.len()).collect();
        let joints: usize = shape.iter().product();
        let expected = labels.len() * joints;
        if payoffs.len() != expected {
            return Err(GameError::ShapeMismatch(format!(
                "expected {} payoffs for shape {:?} and {} players, got {}",
                expected,
                shape,
                labels.len(),
                payoffs.len()
            )));
        }
        for (i, v) in payoffs.iter().enumerate() {
            if !v.is_finite() {
                return Err(GameError::NonFinitePayoff {
                    player: i / joints,
                    index: i % joints,
                });
            }
        }
        let strides = strides(&shape);
        Ok(Self { labels, shape, strides, payoffs })
    }

    /// Convenience constructor with generated labels `s0, s1, …` per player.
    pub fn from_payoffs(shape: &[usize], payoffs: Vec<f64>) -> Result<Self, GameError> {
        let labels = shape
            .iter()
            .map(|&s| (0..s).map(|i| format!("s{i}")).collect())
            .collect();
        Self::new(labels, payoffs)
    }

    pub fn num_players(&self) -> usize {
        self.labels.len()
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn labels(&self) -> &[Vec<String>] {
        &self.labels
    }

    pub fn joint_count(&self) -> usize {
        self.payoffs.len() / self.labels.len()
    }

    pub(crate) fn strides(&self) -> &[usize] {
        &self.strides
    }

    /// Player `p`'s payoff at the flat joint index.
    #[inline]
    pub fn payoff(&self, player: usize, joint: usize) -> f64 {
        self.payoffs[player * self.joint_count() + joint]
    }

    /// Player `p`'s payoff at a joint strategy given by coordinates.
    pub fn payoff_at(&self, player: usize, coords: &[usize]) -> f64 {
        self.payoff(player, flat_of(coords, &self.strides))
    }

    /// Player `p`'s full payoff block, indexed by flat joint.
    pub fn payoff_block(&self, player: usize) -> &[f64] {
        let k = self.joint_count();
        &self.payoffs[player * k..(player + 1) * k]
    }

    /// Sub-game over a subset of each player's strategies, given by
    /// original strategy indices (each list nonempty and in range).
    pub(crate) fn restrict(&self, keep: &[Vec<usize>]) -> NormalFormGame {
        let labels: Vec<Vec<String>> = keep
            .iter()
            .enumerate()
            .map(|(p, ks)| ks.iter().map(|&i| self.labels[p][i].clone()).collect())
            .collect();
        let sub_shape: Vec<usize> = keep.iter().map(|k| k.len()).collect();
        let sub_strides = strides(&sub_shape);
        let sub_joints: usize = sub_shape.iter().product();
        let mut payoffs = Vec::with_capacity(self.labels.len() * sub_joints);
        for p in 0..self.labels.len() {
            for flat in 0..sub_joints {
                let orig: usize = (0..keep.len())
                    .map(|q| {
                        keep[q][coord_of(flat, sub_strides[q], sub_shape[q])] * self.strides[q]
                    })
                    .sum();
                payoffs.push(self.payoff(p, orig));
            }
        }
        NormalFormGame::new(labels, payoffs).expect("restriction of a valid game is valid")
    }

    /// Minimum and maximum payoff for one player.
    pub fn payoff_bounds(&self, player: usize) -> (f64, f64) {
        let block = self.payoff_block(player);
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &v in block {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        (lo, hi)
    }
}

/// A probability distribution over joint strategies.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDistribution {
    shape: Vec<usize>,
    strides: Vec<usize>,
    probs: Vec<f64>,
}

impl JointDistribution {
    /// Validate and wrap joint probabilities (row-major over the shape).
    /// Entries must be nonnegative and sum to one within [`DIST_SUM_TOL`].
    pub fn new(shape: Vec<usize>, probs: Vec<f64>) -> Result<Self, GameError> {
        let joints: usize = shape.iter().product();
        if shape.is_empty() || joints == 0 {
            return Err(GameError::BadDistribution("empty shape".into()));
        }
        if probs.len() != joints {
            return Err(GameError::BadDistribution(format!(
                "expected {} probabilities for shape {:?}, got {}",
                joints,
                shape,
                probs.len()
            )));
        }
        let mut sum = 0.0;
        for &v in &probs {
            if !(v >= 0.0) {
                return Err(GameError::BadDistribution(format!(
                    "negative or non-finite probability {v}"
                )));
            }
            sum += v;
        }
        if (sum - 1.0).abs() > DIST_SUM_TOL {
            return Err(GameError::BadDistribution(format!(
                "probabilities sum to {sum}, expected 1"
            )));
        }
        let strides = strides(&shape);
        Ok(Self { shape, strides, probs })
    }

    /// The uniform joint distribution over a shape.
    pub fn uniform(shape: &[usize]) -> Self {
        let joints: usize = shape.iter().product();
        let strides = strides(shape);
        Self {
            shape: shape.to_vec(),
            strides,
            probs: vec![1.0 / joints as f64; joints],
        }
    }

    /// All mass on a single joint strategy.
    pub fn point_mass(shape: &[usize], coords: &[usize]) -> Self {
        let joints: usize = shape.iter().product();
        let strides = strides(shape);
        let mut probs = vec![0.0; joints];
        probs[flat_of(coords, &strides)] = 1.0;
        Self { shape: shape.to_vec(), strides, probs }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn joint_count(&self) -> usize {
        self.probs.len()
    }

    #[inline]
    pub fn prob(&self, joint: usize) -> f64 {
        self.probs[joint]
    }

    pub fn prob_at(&self, coords: &[usize]) -> f64 {
        self.probs[flat_of(coords, &self.strides)]
    }

    /// Marginal distribution of one player's strategy.
    pub fn marginal(&self, player: usize) -> Vec<f64> {
        let stride = self.strides[player];
        let dim = self.shape[player];
        let mut out = vec![0.0; dim];
        for (flat, &v) in self.probs.iter().enumerate() {
            out[coord_of(flat, stride, dim)] += v;
        }
        out
    }

    /// Conditional distribution over the other players' joint strategies
    /// given that `player` plays `strategy`. Returns `None` when the
    /// strategy's marginal probability is at or below `zero_threshold`:
    /// conditioning on an unplayed strategy is undefined, and that is a
    /// value of this operation, not an error.
    ///
    /// The result is flat row-major over the shape with `player`'s axis
    /// removed.
    pub fn conditional(
        &self,
        player: usize,
        strategy: usize,
        zero_threshold: f64,
    ) -> Option<Vec<f64>> {
        let marginal = self.marginal(player)[strategy];
        if !(marginal > zero_threshold) {
            return None;
        }
        let stride = self.strides[player];
        let dim = self.shape[player];
        let mut out = Vec::with_capacity(self.probs.len() / dim);
        for (flat, &v) in self.probs.iter().enumerate() {
            if coord_of(flat, stride, dim) == strategy {
                out.push(v / marginal);
            }
        }
        Some(out)
    }

    /// Shannon entropy −Σ σ(a) ln σ(a), with 0 ln 0 = 0.
    pub fn entropy(&self) -> f64 {
        self.probs
            .iter()
            .filter(|&&p| p > 0.0)
            .map(|&p| -p * p.ln())
            .sum()
    }
}

impl Serialize for JointDistribution {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut s = serializer.serialize_struct("JointDistribution", 2)?;
        s.serialize_field("shape", &self.shape)?;
        s.serialize_field("probs", &self.probs)?;
        s.end()
    }
}

/// Expected payoff Σ_a G_p(a) σ(a) for one player.
pub fn expected_payoff(
    game: &NormalFormGame,
    dist: &JointDistribution,
    player: usize,
) -> Result<f64, GameError> {
    if game.shape() != dist.shape() {
        return Err(GameError::ShapeMismatch(format!(
            "game shape {:?} vs distribution shape {:?}",
            game.shape(),
            dist.shape()
        )));
    }
    let block = game.payoff_block(player);
    Ok(block.iter().zip(dist.probs()).map(|(g, p)| g * p).sum())
}

/// Product distribution of per-player marginals.
pub fn outer_product(marginals: &[Vec<f64>]) -> JointDistribution {
    let shape: Vec<usize> = marginals.iter().map(|m| m.len()).collect();
    let joints: usize = shape.iter().product();
    let st = strides(&shape);
    let mut probs = Vec::with_capacity(joints);
    for flat in 0..joints {
        let mut v = 1.0;
        for (p, m) in marginals.iter().enumerate() {
            v *= m[coord_of(flat, st[p], shape[p])];
        }
        probs.push(v);
    }
    JointDistribution { shape, strides: st, probs }
}

/// True when all players have identical strategy sets and payoffs are
/// invariant under exchanging any two player roles, within `tol`.
pub fn is_symmetric(game: &NormalFormGame, tol: f64) -> bool {
    let n = game.num_players();
    let shape = game.shape();
    if shape.iter().any(|&s| s != shape[0]) {
        return false;
    }
    let mut coords = vec![0usize; n];
    let mut swapped = vec![0usize; n];
    for p in 0..n {
        for q in (p + 1)..n {
            for flat in 0..game.joint_count() {
                let mut rem = flat;
                for i in (0..n).rev() {
                    coords[i] = rem % shape[i];
                    rem /= shape[i];
                }
                swapped.copy_from_slice(&coords);
                swapped.swap(p, q);
                let diff = game.payoff_at(q, &swapped) - game.payoff_at(p, &coords);
                if diff.abs() > tol {
                    return false;
                }
            }
        }
    }
    true
}

/// On-disk game document.
///
/// `payoffs` is the flat player-major layout described at module level;
/// `shape` is redundant with the label lists and is validated against them.
#[derive(Debug, Serialize, Deserialize)]
pub struct GameDocument {
    pub players: usize,
    pub strategies: Vec<Vec<String>>,
    pub shape: Vec<usize>,
    pub payoffs: Vec<f64>,
}

/// Parse and validate a game document.
pub fn load_game_str(text: &str) -> Result<NormalFormGame, GameError> {
    let doc: GameDocument = serde_json::from_str(text)?;
    if doc.players != doc.strategies.len() {
        return Err(GameError::ShapeMismatch(format!(
            "document claims {} players but lists {} strategy sets",
            doc.players,
            doc.strategies.len()
        )));
    }
    let label_shape: Vec<usize> = doc.strategies.iter().map(|l| l.len()).collect();
    if doc.shape != label_shape {
        return Err(GameError::ShapeMismatch(format!(
            "document shape {:?} does not match strategy lists {:?}",
            doc.shape, label_shape
        )));
    }
    NormalFormGame::new(doc.strategies, doc.payoffs)
}

/// Load a game document from a file.
pub fn load_game(path: &Path) -> Result<NormalFormGame, GameError> {
    let text = std::fs::read_to_string(path).map_err(|source| GameError::Io {
        path: path.display().to_string(),
        source,
    })?;
    load_game_str(&text)
}

/// Serialize a game to its document form. Floats round-trip exactly.
pub fn game_to_json(game: &NormalFormGame) -> String {
    let doc = GameDocument {
        players: game.num_players(),
        strategies: game.labels().to_vec(),
        shape: game.shape().to_vec(),
        payoffs: (0..game.num_players())
            .flat_map(|p| game.payoff_block(p).iter().copied())
            .collect(),
    };
    serde_json::to_string_pretty(&doc).expect("game document serialization cannot fail")
}

pub fn save_game(game: &NormalFormGame, path: &Path) -> Result<(), GameError> {
    std::fs::write(path, game_to_json(game)).map_err(|source| GameError::Io {
        path: path.display().to_string(),
        source,
    })
}
