//! Small classic games used in documentation and tests.

use crate::game::NormalFormGame;

/// Rock-paper-scissors with uneven win probabilities. Zero-sum in the
/// win-probability sense: `G_2 = 1 - G_1 = G_1^T`. Its unique mixed
/// equilibrium plays (0.2, 0.5, 0.3).
pub fn biased_rock_paper_scissors() -> NormalFormGame {
    let g1 = [
        [0.5, 0.2, 1.0],
        [0.8, 0.5, 0.3],
        [0.0, 0.7, 0.5],
    ];
    bimatrix(&["R", "P", "S"], &["R", "P", "S"], &g1, &transpose(&g1))
}

/// Two copies of the biased cycle: strategies 3–5 replay strategies 0–2
/// at half payoff against each other and score zero across blocks, so the
/// second cycle is weakly dominated.
pub fn dominated_rock_paper_scissors() -> NormalFormGame {
    let b = [
        [0.5, 0.2, 1.0],
        [0.8, 0.5, 0.3],
        [0.0, 0.7, 0.5],
    ];
    let mut g1 = [[0.0; 6]; 6];
    for i in 0..3 {
        for j in 0..3 {
            g1[i][j] = b[i][j];
            g1[i + 3][j + 3] = 0.5 * b[i][j];
        }
    }
    let labels = ["R", "P", "S", "r", "p", "s"];
    bimatrix(&labels, &labels, &g1, &transpose(&g1))
}

/// Prisoner's dilemma with payoffs −1/−3/0/−2.
pub fn prisoners_dilemma() -> NormalFormGame {
    let g1 = [[-1.0, -3.0], [0.0, -2.0]];
    bimatrix(&["C", "D"], &["C", "D"], &g1, &transpose(&g1))
}

/// Battle of the sexes: coordination preferred, each player favoring a
/// different meeting point (3 vs 2).
pub fn battle_of_sexes() -> NormalFormGame {
    let g1 = [[3.0, 0.0], [0.0, 2.0]];
    let g2 = [[2.0, 0.0], [0.0, 3.0]];
    bimatrix(&["B", "S"], &["B", "S"], &g1, &g2)
}

/// Pure coordination with unequal stakes: both players get 1 on the first
/// joint action and 1/2 on the second.
pub fn coordination() -> NormalFormGame {
    let g1 = [[1.0, 0.0], [0.0, 0.5]];
    bimatrix(&["P", "L"], &["P", "L"], &g1, &transpose(&g1))
}

/// Chicken: mutual defiance is catastrophic (−10), swerving alone costs 1.
pub fn chicken() -> NormalFormGame {
    let g1 = [[-10.0, 1.0], [-1.0, 0.0]];
    bimatrix(&["C", "S"], &["C", "S"], &g1, &transpose(&g1))
}

/// Matching pennies with payoffs ±1.
pub fn matching_pennies() -> NormalFormGame {
    let g1 = [[1.0, -1.0], [-1.0, 1.0]];
    let g2 = [[-1.0, 1.0], [1.0, -1.0]];
    bimatrix(&["H", "T"], &["H", "T"], &g1, &g2)
}

fn transpose<const N: usize>(m: &[[f64; N]; N]) -> [[f64; N]; N] {
    let mut out = [[0.0; N]; N];
    for i in 0..N {
        for j in 0..N {
            out[i][j] = m[j][i];
        }
    }
    out
}

fn bimatrix<const N: usize>(
    row_labels: &[&str; N],
    col_labels: &[&str; N],
    g1: &[[f64; N]; N],
    g2: &[[f64; N]; N],
) -> NormalFormGame {
    let labels = vec![
        row_labels.iter().map(|s| s.to_string()).collect(),
        col_labels.iter().map(|s| s.to_string()).collect(),
    ];
    let mut payoffs = Vec::with_capacity(2 * N * N);
    for m in [g1, g2] {
        for row in m {
            payoffs.extend_from_slice(row);
        }
    }
    NormalFormGame::new(labels, payoffs).expect("static game tables are well formed")
}
