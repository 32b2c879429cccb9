//! Empirical game construction from match records.
//!
//! Three builders share one fixture pool: a symmetric constant-sum
//! win-probability game, a general-sum points game under a scoring rule,
//! and a three-player game where a location player picks Home or Away and
//! scores when the club at that venue wins.
//!
//! Conventions the source data cannot decide, chosen here and documented:
//! draws count as half a win in win-probability payoffs (configurable to
//! discarding drawn fixtures), a club paired with itself scores ½ (points
//! games: the draw score; the location game: 0 for everyone), and the
//! location player scores 0 on a draw since neither venue's club won.
//! Empirical payoffs come with sampling noise; solve such games with a
//! generously large ε rather than at the feasibility minimum.

use crate::game::{GameError, NormalFormGame};
use std::collections::BTreeSet;
use std::io::Read;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    HomeWin,
    AwayWin,
    Draw,
}

/// One fixture: `home` hosted `away` and the match ended in `outcome`.
#[derive(Debug, Clone, PartialEq)]
pub struct MatchRecord {
    pub home: String,
    pub away: String,
    pub outcome: Outcome,
    /// Raw score line when the source provides one (e.g. sets won).
    pub scores: Option<(u32, u32)>,
}

impl MatchRecord {
    pub fn new(home: &str, away: &str, outcome: Outcome) -> Self {
        MatchRecord {
            home: home.to_string(),
            away: away.to_string(),
            outcome,
            scores: None,
        }
    }
}

/// Points awarded per fixture; must satisfy win ≥ draw ≥ loss.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoringRule {
    pub win_points: f64,
    pub draw_points: f64,
    pub loss_points: f64,
}

impl ScoringRule {
    pub fn new(win: f64, draw: f64, loss: f64) -> Result<Self, IngestError> {
        if !(win.is_finite() && draw.is_finite() && loss.is_finite())
            || win < draw
            || draw < loss
        {
            return Err(IngestError::BadScoringRule { win, draw, loss });
        }
        Ok(ScoringRule {
            win_points: win,
            draw_points: draw,
            loss_points: loss,
        })
    }

    /// The common 3 / 1 / 0 football rule.
    pub fn football() -> Self {
        ScoringRule {
            win_points: 3.0,
            draw_points: 1.0,
            loss_points: 0.0,
        }
    }
}

/// How drawn fixtures enter win-probability estimates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DrawRule {
    /// A draw counts as half a win for each side.
    #[default]
    HalfWin,
    /// Drawn fixtures are dropped; a pairing left with no decisive
    /// fixture is an error.
    Discard,
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("failed to read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("line {line}: {msg}")]
    BadRecord { line: u64, msg: String },
    #[error("record {index}: {club:?} cannot play itself")]
    SelfPair { index: usize, club: String },
    #[error("need at least two distinct clubs, found {0}")]
    TooFewClubs(usize),
    #[error("no fixture for ordered pairs: {}", format_pairs(.0))]
    MissingPairs(Vec<(String, String)>),
    #[error("no decisive fixture between {0:?} and {1:?} after discarding draws")]
    NoDecisiveFixtures(String, String),
    #[error("scoring rule must satisfy win ≥ draw ≥ loss with finite values, got ({win}, {draw}, {loss})")]
    BadScoringRule { win: f64, draw: f64, loss: f64 },
    #[error(transparent)]
    Game(#[from] GameError),
}

fn format_pairs(pairs: &[(String, String)]) -> String {
    let shown: Vec<String> = pairs
        .iter()
        .take(8)
        .map(|(h, a)| format!("{h} vs {a}"))
        .collect();
    let suffix = if pairs.len() > 8 {
        format!(" and {} more", pairs.len() - 8)
    } else {
        String::new()
    };
    format!("{}{}", shown.join(", "), suffix)
}

/// Parse fixtures from CSV with header `home,away,result` where result is
/// H, A or D. Optional `home_sets,away_sets` columns carry raw scores.
pub fn parse_match_records<R: Read>(reader: R) -> Result<Vec<MatchRecord>, IngestError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h.trim() == name);
    let (home_col, away_col, result_col) = match (col("home"), col("away"), col("result")) {
        (Some(h), Some(a), Some(r)) => (h, a, r),
        _ => {
            return Err(IngestError::BadRecord {
                line: 1,
                msg: format!("header must contain home, away and result, got {headers:?}"),
            })
        }
    };
    let sets_cols = col("home_sets").zip(col("away_sets"));

    let mut records = Vec::new();
    for row in rdr.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let field = |idx: usize| -> Result<&str, IngestError> {
            row.get(idx).map(str::trim).ok_or(IngestError::BadRecord {
                line,
                msg: "short row".to_string(),
            })
        };
        let home = field(home_col)?.to_string();
        let away = field(away_col)?.to_string();
        if home.is_empty() || away.is_empty() {
            return Err(IngestError::BadRecord {
                line,
                msg: "empty club name".to_string(),
            });
        }
        if home == away {
            return Err(IngestError::BadRecord {
                line,
                msg: format!("{home:?} cannot play itself"),
            });
        }
        let outcome = match field(result_col)? {
            "H" => Outcome::HomeWin,
            "A" => Outcome::AwayWin,
            "D" => Outcome::Draw,
            other => {
                return Err(IngestError::BadRecord {
                    line,
                    msg: format!("result must be H, A or D, got {other:?}"),
                })
            }
        };
        let scores = match sets_cols {
            Some((hc, ac)) => {
                let parse = |idx: usize| -> Result<u32, IngestError> {
                    field(idx)?.parse().map_err(|_| IngestError::BadRecord {
                        line,
                        msg: format!("bad score {:?}", row.get(idx).unwrap_or("")),
                    })
                };
                Some((parse(hc)?, parse(ac)?))
            }
            None => None,
        };
        records.push(MatchRecord {
            home,
            away,
            outcome,
            scores,
        });
    }
    Ok(records)
}

/// [`parse_match_records`] over a file.
pub fn parse_match_csv(path: &Path) -> Result<Vec<MatchRecord>, IngestError> {
    let file = std::fs::File::open(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_match_records(file)
}

/// Alphabetical club index, plus validation that every ordered pair has a
/// fixture and nobody plays themselves.
fn club_index(records: &[MatchRecord]) -> Result<Vec<String>, IngestError> {
    let mut clubs = BTreeSet::new();
    for (index, r) in records.iter().enumerate() {
        if r.home == r.away {
            return Err(IngestError::SelfPair {
                index,
                club: r.home.clone(),
            });
        }
        clubs.insert(r.home.clone());
        clubs.insert(r.away.clone());
    }
    if clubs.len() < 2 {
        return Err(IngestError::TooFewClubs(clubs.len()));
    }
    Ok(clubs.into_iter().collect())
}

fn require_all_ordered_pairs(
    clubs: &[String],
    seen: &[bool],
) -> Result<(), IngestError> {
    let c = clubs.len();
    let missing: Vec<(String, String)> = (0..c)
        .flat_map(|i| (0..c).map(move |j| (i, j)))
        .filter(|&(i, j)| i != j && !seen[i * c + j])
        .map(|(i, j)| (clubs[i].clone(), clubs[j].clone()))
        .collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(IngestError::MissingPairs(missing))
    }
}

/// Pool fixtures per club pair (both venues together) and average a
/// per-fixture score. Returns the alphabetically indexed payoff matrix
/// with `self_payoff` on the diagonal.
fn pooled_average(
    records: &[MatchRecord],
    clubs: &[String],
    score: impl Fn(Outcome) -> Option<(f64, f64)>,
    self_payoff: f64,
) -> Result<Vec<f64>, IngestError> {
    let c = clubs.len();
    let idx = |name: &str| clubs.binary_search_by(|x| x.as_str().cmp(name)).unwrap();
    let mut sums = vec![0.0; c * c];
    let mut counts = vec![0usize; c * c];
    let mut seen = vec![false; c * c];
    for r in records {
        let (h, a) = (idx(&r.home), idx(&r.away));
        seen[h * c + a] = true;
        if let Some((sh, sa)) = score(r.outcome) {
            sums[h * c + a] += sh;
            sums[a * c + h] += sa;
            counts[h * c + a] += 1;
            counts[a * c + h] += 1;
        }
    }
    require_all_ordered_pairs(clubs, &seen)?;
    let mut matrix = vec![0.0; c * c];
    for i in 0..c {
        for j in 0..c {
            matrix[i * c + j] = if i == j {
                self_payoff
            } else if counts[i * c + j] == 0 {
                return Err(IngestError::NoDecisiveFixtures(
                    clubs[i.min(j)].clone(),
                    clubs[i.max(j)].clone(),
                ));
            } else {
                sums[i * c + j] / counts[i * c + j] as f64
            };
        }
    }
    Ok(matrix)
}

/// Sort clubs by mean payoff against the field, best first, ties broken
/// alphabetically, and permute the matrix to match.
fn order_by_row_mean(clubs: Vec<String>, matrix: Vec<f64>) -> (Vec<String>, Vec<f64>) {
    let c = clubs.len();
    let mean = |i: usize| -> f64 {
        let total: f64 = (0..c).filter(|&j| j != i).map(|j| matrix[i * c + j]).sum();
        total / (c - 1) as f64
    };
    let mut order: Vec<usize> = (0..c).collect();
    order.sort_by(|&a, &b| {
        mean(b)
            .partial_cmp(&mean(a))
            .unwrap_or(std::cmp::Ordering::Equal)
            .then_with(|| clubs[a].cmp(&clubs[b]))
    });
    let permuted_labels = order.iter().map(|&i| clubs[i].clone()).collect();
    let mut permuted = vec![0.0; c * c];
    for (new_i, &old_i) in order.iter().enumerate() {
        for (new_j, &old_j) in order.iter().enumerate() {
            permuted[new_i * c + new_j] = matrix[old_i * c + old_j];
        }
    }
    (permuted_labels, permuted)
}

fn symmetric_two_player(labels: Vec<String>, g1: Vec<f64>) -> NormalFormGame {
    let c = labels.len();
    let mut payoffs = g1.clone();
    for i in 0..c {
        for j in 0..c {
            payoffs.push(g1[j * c + i]);
        }
    }
    NormalFormGame::new(vec![labels.clone(), labels], payoffs)
        .expect("pooled payoff matrices are finite and well-shaped")
}

/// Symmetric constant-sum game of empirical win probabilities, draws
/// counting half. Both venues pool into a single estimate per pairing;
/// the second player's payoff is the first's transposed, so G₁ + G₂ = 1.
/// Clubs are ordered by average win probability.
pub fn build_winprob_game(records: &[MatchRecord]) -> Result<NormalFormGame, IngestError> {
    build_winprob_game_with(records, DrawRule::HalfWin)
}

/// [`build_winprob_game`] with an explicit draw rule.
pub fn build_winprob_game_with(
    records: &[MatchRecord],
    rule: DrawRule,
) -> Result<NormalFormGame, IngestError> {
    let clubs = club_index(records)?;
    let score = move |o: Outcome| match (o, rule) {
        (Outcome::HomeWin, _) => Some((1.0, 0.0)),
        (Outcome::AwayWin, _) => Some((0.0, 1.0)),
        (Outcome::Draw, DrawRule::HalfWin) => Some((0.5, 0.5)),
        (Outcome::Draw, DrawRule::Discard) => None,
    };
    let matrix = pooled_average(records, &clubs, score, 0.5)?;
    let (labels, matrix) = order_by_row_mean(clubs, matrix);
    Ok(symmetric_two_player(labels, matrix))
}

/// General-sum game of average points per fixture under `rule`; a club
/// against itself scores the draw points. With rule (1, ½, 0) the payoffs
/// equal [`build_winprob_game`] exactly. Clubs are ordered by average
/// points against the field.
pub fn build_points_game(
    records: &[MatchRecord],
    rule: &ScoringRule,
) -> Result<NormalFormGame, IngestError> {
    ScoringRule::new(rule.win_points, rule.draw_points, rule.loss_points)?;
    let clubs = club_index(records)?;
    let rule = *rule;
    let score = move |o: Outcome| match o {
        Outcome::HomeWin => Some((rule.win_points, rule.loss_points)),
        Outcome::AwayWin => Some((rule.loss_points, rule.win_points)),
        Outcome::Draw => Some((rule.draw_points, rule.draw_points)),
    };
    let matrix = pooled_average(records, &clubs, score, rule.draw_points)?;
    let (labels, matrix) = order_by_row_mean(clubs, matrix);
    Ok(symmetric_two_player(labels, matrix))
}

/// Three-player game: a location player picking Home or Away, the home
/// club, and the away club. The location player's payoff is the
/// probability that the club at the chosen venue wins the fixture (0 on a
/// draw); each club's payoff is its venue-specific win probability,
/// independent of the location choice. Club-vs-self joints pay 0 to
/// everyone. Clubs are ordered alphabetically.
pub fn build_location_game(records: &[MatchRecord]) -> Result<NormalFormGame, IngestError> {
    build_location_game_with(records, DrawRule::HalfWin)
}

/// [`build_location_game`] with an explicit draw rule for the club payoffs
/// (discarding also removes drawn fixtures from the location estimates).
pub fn build_location_game_with(
    records: &[MatchRecord],
    rule: DrawRule,
) -> Result<NormalFormGame, IngestError> {
    let clubs = club_index(records)?;
    let c = clubs.len();
    let idx = |name: &str| clubs.binary_search_by(|x| x.as_str().cmp(name)).unwrap();
    let mut home_wins = vec![0.0; c * c];
    let mut away_wins = vec![0.0; c * c];
    let mut draws = vec![0.0; c * c];
    let mut seen = vec![false; c * c];
    for r in records {
        let cell = idx(&r.home) * c + idx(&r.away);
        seen[cell] = true;
        match (r.outcome, rule) {
            (Outcome::HomeWin, _) => home_wins[cell] += 1.0,
            (Outcome::AwayWin, _) => away_wins[cell] += 1.0,
            (Outcome::Draw, DrawRule::HalfWin) => draws[cell] += 1.0,
            (Outcome::Draw, DrawRule::Discard) => {}
        }
    }
    require_all_ordered_pairs(&clubs, &seen)?;

    let joints = 2 * c * c;
    let mut payoffs = vec![0.0; 3 * joints];
    for i in 0..c {
        for j in 0..c {
            if i == j {
                continue;
            }
            let cell = i * c + j;
            let n = home_wins[cell] + away_wins[cell] + draws[cell];
            if n == 0.0 {
                return Err(IngestError::NoDecisiveFixtures(
                    clubs[i.min(j)].clone(),
                    clubs[i.max(j)].clone(),
                ));
            }
            let p_home = home_wins[cell] / n;
            let p_away = away_wins[cell] / n;
            let half_draw = 0.5 * draws[cell] / n;
            // joint (location, home club, away club), location-major
            payoffs[cell] = p_home;
            payoffs[c * c + cell] = p_away;
            for venue in 0..2 {
                payoffs[joints + venue * c * c + cell] = p_home + half_draw;
                payoffs[2 * joints + venue * c * c + cell] = p_away + half_draw;
            }
        }
    }
    let labels = vec![
        vec!["Home".to_string(), "Away".to_string()],
        clubs.clone(),
        clubs,
    ];
    Ok(NormalFormGame::new(labels, payoffs)?)
}
