//! Equilibrium selection: pick one joint distribution out of the ε-feasible
//! polytope `{σ ∈ simplex : Aσ ≤ ε}`.
//!
//! Three selection objectives are supported. Maximum entropy and maximum
//! Gini both run on a low-dimensional convex dual: the polytope has one
//! variable per joint strategy but only one constraint per deviation, so we
//! optimize the dual multipliers λ ≥ 0 by projected gradient steps with
//! Barzilai-Borwein step sizes and a backtracking line search, recovering
//! the primal in closed form from λ at every iterate:
//!
//! - entropy: σ(a) ∝ exp(−w(a)·((Aᵀλ)(a) + μ)), the Gibbs form, which is
//!   full-support by construction; μ normalizes.
//! - Gini (minimize Σ σ(a)²/w(a)): σ(a) = max(0, −w(a)·((Aᵀλ)(a) + μ)/2),
//!   with μ found by exact waterfilling.
//!
//! Maximum welfare first solves an LP for the optimal welfare, then breaks
//! ties by a max-entropy solve restricted to a thin slab around the optimal
//! face. Two-player constant-sum games additionally get an exact
//! max-entropy Nash solve built from each player's security-value polytope.

use crate::constraints::{build_constraints, Concept, DeviationConstraints};
use crate::game::{GameError, JointDistribution, NormalFormGame};
use crate::simplex::{self, LinearProgram, LpError, Relation};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Default absolute offset added to ε^min in eps-min-plus mode.
pub const DEFAULT_DELTA_ABS: f64 = 1e-6;
/// Default relative offset (scaled by |ε^min|) in eps-min-plus mode.
pub const DEFAULT_DELTA_REL: f64 = 1e-4;

const DEFAULT_CONSTRAINT_TOL: f64 = 1e-8;
const DEFAULT_DUALITY_GAP_TOL: f64 = 1e-8;
const DEFAULT_MAX_ITERATIONS: usize = 100_000;
/// History length for the nonmonotone line-search acceptance test.
const NONMONOTONE_WINDOW: usize = 10;
const POLISH_INTERVAL: usize = 250;

/// Equilibrium family a solve targets, including the two-player
/// constant-sum Nash special case that has no ε parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveConcept {
    Ce,
    Cce,
    Mene2p0s,
}

impl SolveConcept {
    /// The deviation-constraint concept, when one applies.
    pub fn deviation_concept(&self) -> Option<Concept> {
        match self {
            SolveConcept::Ce => Some(Concept::Ce),
            SolveConcept::Cce => Some(Concept::Cce),
            SolveConcept::Mene2p0s => None,
        }
    }
}

/// Objective used to select one distribution from the feasible polytope.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Selection {
    MaxEntropy,
    MaxGini,
    MaxWelfare,
}

/// How the per-player ε vector is specified.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum EpsilonMode {
    /// Explicit values: one per player, or a single value broadcast.
    Absolute(Vec<f64>),
    /// ρ scaling the per-player uniform-feasibility bound: ε_p = ρ·ε^uni_p.
    Normalized(f64),
    /// Just above the feasibility minimum: ε_p = ε^min + max(δ_abs, δ_rel·|ε^min|).
    EpsMinPlus { delta_abs: f64, delta_rel: f64 },
}

impl Default for EpsilonMode {
    fn default() -> Self {
        EpsilonMode::EpsMinPlus {
            delta_abs: DEFAULT_DELTA_ABS,
            delta_rel: DEFAULT_DELTA_REL,
        }
    }
}

/// Full solve parameterization. The `solve` dispatcher reads every field;
/// the per-objective entry points take concept and ε explicitly and use
/// only the weights and tolerance fields.
#[derive(Debug, Clone)]
pub struct SolveConfig {
    pub concept: SolveConcept,
    pub selection: Selection,
    pub epsilon_mode: EpsilonMode,
    /// Optional positive per-joint reweighting of the objective (for
    /// duplicate-strategy corrections): entropy becomes Σ −σln(σ)/w and the
    /// Gini norm Σ σ²/w.
    pub weights: Option<Vec<f64>>,
    /// Allowed constraint excess at convergence.
    pub constraint_tol: f64,
    /// Allowed complementary-slackness residual |λ_c·(ε_c − (Aσ)_c)|,
    /// measured relative to 1 + λ_c·(|ε_c| + |(Aσ)_c|).
    pub duality_gap_tol: f64,
    pub max_iterations: usize,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            concept: SolveConcept::Cce,
            selection: Selection::MaxEntropy,
            epsilon_mode: EpsilonMode::default(),
            weights: None,
            constraint_tol: DEFAULT_CONSTRAINT_TOL,
            duality_gap_tol: DEFAULT_DUALITY_GAP_TOL,
            max_iterations: DEFAULT_MAX_ITERATIONS,
        }
    }
}

/// A selected equilibrium distribution with solve diagnostics.
#[derive(Debug, Clone)]
pub struct EquilibriumSolution {
    pub dist: JointDistribution,
    /// The resolved per-player ε this solve targeted (zeros for the exact
    /// Nash solver).
    pub epsilon: Vec<f64>,
    /// Per-player maximum deviation gain of `dist`; −∞ for a player with no
    /// possible deviation.
    pub achieved_violation: Vec<f64>,
    /// Value of the selection objective at `dist`: weighted entropy,
    /// 1 − Σσ²/w, or total welfare.
    pub objective_value: f64,
    /// Nonnegative dual multipliers, one per deviation constraint in
    /// stacking order; self-deviation rows carry an exact zero. Max-welfare
    /// appends the welfare-slab multiplier after the stack, and the Nash
    /// solver concatenates both players' security-constraint duals instead.
    pub dual_variables: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("epsilon {requested:?} is infeasible: every component must grow by {shortfall:.3e}")]
    Infeasible { requested: Vec<f64>, shortfall: f64 },
    #[error("no convergence after {iterations} iterations (constraint excess {violation:.3e})")]
    NotConverged { iterations: usize, violation: f64 },
    #[error("bad epsilon: {0}")]
    BadEpsilon(String),
    #[error("bad weights: {0}")]
    BadWeights(String),
    #[error("game has {0} players, this solver needs exactly 2")]
    NotTwoPlayer(usize),
    #[error("payoff sums vary by {0:.3e}, game is not constant-sum")]
    NotConstantSum(f64),
    #[error(transparent)]
    Distribution(#[from] GameError),
    #[error("linear program failed: {0}")]
    Lp(#[from] LpError),
}

/// Turn an ε specification into the per-player vector it denotes.
///
/// A game with no effective deviation rows has ε^min = −∞; eps-min-plus
/// resolves to zeros there, since every distribution is feasible anyway.
pub fn resolve_epsilon(
    game: &NormalFormGame,
    concept: Concept,
    mode: &EpsilonMode,
) -> Result<Vec<f64>, SolverError> {
    let n = game.num_players();
    match mode {
        EpsilonMode::Absolute(values) => {
            if values.iter().any(|v| !v.is_finite()) {
                return Err(SolverError::BadEpsilon("values must be finite".into()));
            }
            broadcast_epsilon(values, n)
        }
        EpsilonMode::Normalized(rho) => {
            if !rho.is_finite() {
                return Err(SolverError::BadEpsilon("rho must be finite".into()));
            }
            Ok(crate::constraints::epsilon_uniform(game, concept)
                .into_iter()
                .map(|u| rho * u)
                .collect())
        }
        EpsilonMode::EpsMinPlus { delta_abs, delta_rel } => {
            let delta_floor = delta_abs.max(0.0).max(delta_rel.max(0.0));
            if !(delta_floor > 0.0) {
                return Err(SolverError::BadEpsilon(
                    "eps-min-plus offset must be positive".into(),
                ));
            }
            let eps_min = crate::constraints::epsilon_min(game, concept)?.epsilon;
            Ok(eps_min
                .into_iter()
                .map(|e| {
                    if e == f64::NEG_INFINITY {
                        0.0
                    } else {
                        e + delta_abs.max(delta_rel * e.abs())
                    }
                })
                .collect())
        }
    }
}

fn broadcast_epsilon(eps: &[f64], n: usize) -> Result<Vec<f64>, SolverError> {
    match eps.len() {
        l if l == n => Ok(eps.to_vec()),
        1 => Ok(vec![eps[0]; n]),
        l => Err(SolverError::BadEpsilon(format!(
            "expected 1 or {n} epsilon values, got {l}"
        ))),
    }
}

fn validated_weights<'a>(
    weights: Option<&'a [f64]>,
    k: usize,
) -> Result<Option<&'a [f64]>, SolverError> {
    if let Some(w) = weights {
        if w.len() != k {
            return Err(SolverError::BadWeights(format!(
                "expected {k} weights, got {}",
                w.len()
            )));
        }
        if w.iter().any(|v| !v.is_finite() || *v <= 0.0) {
            return Err(SolverError::BadWeights(
                "weights must be finite and positive".into(),
            ));
        }
    }
    Ok(weights)
}

/// Effective (non-self) constraint rows as a dense matrix plus the player
/// owning each row.
struct EffectiveRows {
    matrix: Vec<f64>,
    players: Vec<usize>,
    rows: usize,
    cols: usize,
}

fn effective_rows(cons: &DeviationConstraints) -> EffectiveRows {
    let cols = cons.num_cols();
    let idx: Vec<usize> = cons.effective_rows().collect();
    let mut matrix = Vec::with_capacity(idx.len() * cols);
    let mut players = Vec::with_capacity(idx.len());
    for &r in &idx {
        matrix.extend_from_slice(cons.row(r));
        players.push(cons.meta(r).player);
    }
    EffectiveRows { matrix, players, rows: idx.len(), cols }
}

/// `min t : Aσ ≤ ε + t·1, σ ∈ simplex`; positive means ε is infeasible.
fn feasibility_shortfall(
    matrix: &[f64],
    rows: usize,
    cols: usize,
    row_eps: &[f64],
) -> Result<f64, LpError> {
    if rows == 0 {
        return Ok(f64::NEG_INFINITY);
    }
    let mut objective = vec![0.0; cols + 1];
    objective[cols] = 1.0;
    let mut lp = LinearProgram::new(objective);
    lp.mark_free(cols);
    for r in 0..rows {
        let mut coeffs = matrix[r * cols..(r + 1) * cols].to_vec();
        coeffs.push(-1.0);
        lp.constrain(coeffs, Relation::Le, row_eps[r]);
    }
    let mut simplex_row = vec![1.0; cols];
    simplex_row.push(0.0);
    lp.constrain(simplex_row, Relation::Eq, 1.0);
    Ok(simplex::solve(&lp)?.objective)
}

struct DualOutcome {
    sigma: Vec<f64>,
    lambda: Vec<f64>,
    iterations: usize,
    converged: bool,
    max_excess: f64,
}

/// Row values Aσ, worst feasibility excess, and the complementarity
/// residual of a dual pair. The residual is measured relative to the size
/// of its factors: an absolute product bound is unreachable once the
/// cancellation in λ_c(ε_c − v_c) drops below the noise floor of λ_c ε_c.
fn kkt_residuals(
    matrix: &[f64],
    rows: usize,
    cols: usize,
    row_eps: &[f64],
    lambda: &[f64],
    sigma: &[f64],
) -> (Vec<f64>, f64, f64) {
    let v = matvec(matrix, rows, cols, sigma);
    let excess = v.iter().zip(row_eps).map(|(vi, e)| vi - e).fold(f64::NEG_INFINITY, f64::max);
    let cs = lambda
        .iter()
        .zip(v.iter().zip(row_eps))
        .map(|(l, (vi, e))| (l * (e - vi)).abs() / (1.0 + l * (e.abs() + vi.abs())))
        .fold(0.0, f64::max);
    (v, excess, cs)
}

/// In-place Gaussian elimination with partial pivoting for a small dense
/// system; `a` is n×n row major. Returns false when a pivot vanishes.
fn solve_linear(n: usize, a: &mut [f64], b: &mut [f64]) -> bool {
    for k in 0..n {
        let mut piv = k;
        for r in k + 1..n {
            if a[r * n + k].abs() > a[piv * n + k].abs() {
                piv = r;
            }
        }
        if a[piv * n + k].abs() < 1e-300 {
            return false;
        }
        if piv != k {
            for c in 0..n {
                a.swap(k * n + c, piv * n + c);
            }
            b.swap(k, piv);
        }
        for r in k + 1..n {
            let f = a[r * n + k] / a[k * n + k];
            if f != 0.0 {
                for c in k..n {
                    a[r * n + c] -= f * a[k * n + c];
                }
                b[r] -= f * b[k];
            }
        }
    }
    for k in (0..n).rev() {
        let mut s = b[k];
        for c in k + 1..n {
            s -= a[k * n + c] * b[c];
        }
        b[k] = s / a[k * n + k];
    }
    true
}

/// Newton refinement of the entropy dual on the active set implied by the
/// current multipliers. Rows with positive multipliers are pinned to
/// equality, which lifts their sign constraint and removes the dual blow-up
/// that chokes first-order steps on thin feasible sets; the normalization
/// multiplier stays free. Sign flips and newly violated rows revise the
/// active set, so a wrong initial guess costs extra rounds, not a wrong
/// answer. Returns a pair meeting both tolerances, or None.
fn entropy_dual_polish(
    matrix: &[f64],
    rows: usize,
    cols: usize,
    row_eps: &[f64],
    weights: Option<&[f64]>,
    constraint_tol: f64,
    gap_tol: f64,
    lambda0: &[f64],
) -> Option<(Vec<f64>, Vec<f64>, f64)> {
    let w = |a: usize| weights.map_or(1.0, |wv: &[f64]| wv[a]);
    let scale = 1.0 + row_eps.iter().fold(0.0f64, |m, e| m.max(e.abs()));
    let target = 0.01 * constraint_tol * scale;
    let mut lambda = lambda0.to_vec();
    let (_, mut mu) = gibbs_sigma(&matvec_t(matrix, rows, cols, &lambda), weights);
    let mut active: Vec<usize> = (0..rows).filter(|&r| lambda[r] > 0.0).collect();

    for _round in 0..rows + 3 {
        let m = active.len();
        let n = m + 1;
        let residual = |lam: &[f64], mu: f64| -> Option<(Vec<f64>, Vec<f64>, f64)> {
            let q = matvec_t(matrix, rows, cols, lam);
            let sigma: Vec<f64> =
                (0..cols).map(|a| ((-w(a) * (q[a] + mu) - 1.0).min(40.0)).exp()).collect();
            let v = matvec(matrix, rows, cols, &sigma);
            let mass: f64 = sigma.iter().sum();
            let mut g: Vec<f64> = active.iter().map(|&r| row_eps[r] - v[r]).collect();
            g.push(1.0 - mass);
            let norm = g.iter().fold(0.0f64, |acc, x| acc.max(x.abs()));
            if norm.is_finite() {
                Some((sigma, g, norm))
            } else {
                None
            }
        };

        let (mut sigma, mut g, mut norm) = residual(&lambda, mu)?;
        let mut solved = norm <= target;
        for _step in 0..60 {
            if solved {
                break;
            }
            // H = B diag(w σ) Bᵀ with B the active rows plus the all-ones
            // normalization row
            let mut h = vec![0.0; n * n];
            for a in 0..cols {
                let ws = w(a) * sigma[a];
                if ws == 0.0 {
                    continue;
                }
                for i in 0..n {
                    let bi = if i < m { matrix[active[i] * cols + a] } else { 1.0 };
                    if bi == 0.0 {
                        continue;
                    }
                    for j in i..n {
                        let bj = if j < m { matrix[active[j] * cols + a] } else { 1.0 };
                        h[i * n + j] += ws * bi * bj;
                    }
                }
            }
            for i in 0..n {
                for j in 0..i {
                    h[i * n + j] = h[j * n + i];
                }
            }
            let damp = 1e-14
                * (0..n).map(|i| h[i * n + i]).fold(0.0f64, f64::max).max(1e-300);
            for i in 0..n {
                h[i * n + i] += damp;
            }
            let mut delta = g.clone();
            for d in delta.iter_mut() {
                *d = -*d;
            }
            if !solve_linear(n, &mut h, &mut delta) {
                return None;
            }
            // backtrack on the residual norm; convexity makes full steps
            // safe near the solution but wild far from it
            let mut t = 1.0;
            let mut advanced = false;
            for _ in 0..30 {
                let mut lam_try = lambda.clone();
                for (i, &r) in active.iter().enumerate() {
                    lam_try[r] += t * delta[i];
                }
                let mu_try = mu + t * delta[m];
                if let Some((s_try, g_try, n_try)) = residual(&lam_try, mu_try) {
                    if n_try < norm || n_try <= target {
                        lambda = lam_try;
                        mu = mu_try;
                        sigma = s_try;
                        g = g_try;
                        norm = n_try;
                        advanced = true;
                        break;
                    }
                }
                t *= 0.5;
            }
            if !advanced {
                return None;
            }
            solved = norm <= target;
        }
        if !solved {
            return None;
        }

        // active rows whose multiplier went negative are not binding after
        // all: release them and resolve
        let negatives: Vec<usize> =
            active.iter().copied().filter(|&r| lambda[r] < 0.0).collect();
        if !negatives.is_empty() {
            for &r in &negatives {
                lambda[r] = 0.0;
            }
            active.retain(|r| !negatives.contains(r));
            continue;
        }

        // exact renormalization, then judge with the same criteria the
        // iteration uses
        let (sigma, _) = gibbs_sigma(&matvec_t(matrix, rows, cols, &lambda), weights);
        let (v, excess, cs) = kkt_residuals(matrix, rows, cols, row_eps, &lambda, &sigma);
        if excess <= constraint_tol && cs <= gap_tol {
            return Some((lambda, sigma, excess));
        }
        let mut worst = None;
        for r in 0..rows {
            if active.contains(&r) {
                continue;
            }
            let e = v[r] - row_eps[r];
            if e > 0.5 * constraint_tol && worst.map_or(true, |(_, we)| e > we) {
                worst = Some((r, e));
            }
        }
        match worst {
            Some((r, _)) => active.push(r),
            None => return None,
        }
    }
    None
}

/// σ(λ) for the entropy objective: σ_a = exp(−w_a((Aᵀλ)_a + μ) − 1),
/// normalized exactly by solving for μ. Returns (σ, μ). The unweighted path
/// is a plain softmax, which at λ = 0 yields the uniform distribution with
/// every entry computed as 1/k. The Gibbs form is strictly positive, and
/// flooring the exponent keeps that true in floating point even when large
/// multipliers would otherwise underflow suppressed entries to exact zero (the floor keeps every entry above 1e-300 at any tensor size).
fn gibbs_sigma(q: &[f64], weights: Option<&[f64]>) -> (Vec<f64>, f64) {
    let k = q.len();
    match weights {
        None => {
            let m = q.iter().fold(f64::INFINITY, |acc, &v| acc.min(v));
            let e: Vec<f64> = q.iter().map(|&v| (m - v).max(-650.0).exp()).collect();
            let z: f64 = e.iter().sum();
            let sigma: Vec<f64> = e.iter().map(|&v| v / z).collect();
            // ln σ_a = −q_a − μ − 1 with σ_a = exp(m − q_a)/z
            let mu = z.ln() - m - 1.0;
            (sigma, mu)
        }
        Some(w) => {
            // solve ln Σ_a exp(z_a − w_a μ) = 0 for μ, z_a = −w_a q_a − 1
            let z: Vec<f64> = q.iter().zip(w).map(|(&qa, &wa)| -wa * qa - 1.0).collect();
            let f = |mu: f64| -> (f64, f64) {
                let m = z
                    .iter()
                    .zip(w)
                    .map(|(&za, &wa)| za - wa * mu)
                    .fold(f64::NEG_INFINITY, f64::max);
                let mut s = 0.0;
                let mut sw = 0.0;
                for (&za, &wa) in z.iter().zip(w) {
                    let e = (za - wa * mu - m).exp();
                    s += e;
                    sw += wa * e;
                }
                (m + s.ln(), sw / s)
            };
            let mut lo = z
                .iter()
                .zip(w)
                .map(|(&za, &wa)| (za - (k as f64).ln()) / wa)
                .fold(f64::INFINITY, f64::min);
            let mut hi = z.iter().zip(w).map(|(&za, &wa)| za / wa).fold(f64::NEG_INFINITY, f64::max);
            while f(lo).0 < 0.0 {
                lo -= 1.0 + (hi - lo);
            }
            while f(hi).0 > 0.0 {
                hi += 1.0 + (hi - lo);
            }
            let mut mu = 0.5 * (lo + hi);
            for _ in 0..200 {
                let (val, mean_w) = f(mu);
                if val.abs() <= 1e-15 {
                    break;
                }
                if val > 0.0 {
                    lo = mu;
                } else {
                    hi = mu;
                }
                let newton = mu + val / mean_w;
                mu = if newton > lo && newton < hi { newton } else { 0.5 * (lo + hi) };
            }
            let sigma: Vec<f64> =
                z.iter().zip(w).map(|(&za, &wa)| (za - wa * mu).max(-650.0).exp()).collect();
            (sigma, mu)
        }
    }
}

fn matvec(matrix: &[f64], rows: usize, cols: usize, x: &[f64]) -> Vec<f64> {
    (0..rows)
        .map(|r| matrix[r * cols..(r + 1) * cols].iter().zip(x).map(|(a, b)| a * b).sum())
        .collect()
}

fn matvec_t(matrix: &[f64], rows: usize, cols: usize, y: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; cols];
    for r in 0..rows {
        let yr = y[r];
        if yr != 0.0 {
            for (o, a) in out.iter_mut().zip(&matrix[r * cols..(r + 1) * cols]) {
                *o += yr * a;
            }
        }
    }
    out
}

/// Initial step size chosen so the whole trajectory scales like 1/c² when
/// the constraint matrix scales by c, keeping solves equivariant under
/// affine payoff transforms.
fn initial_step(matrix: &[f64], rows: usize, cols: usize) -> f64 {
    let mut worst: f64 = 0.0;
    for r in 0..rows {
        let sq: f64 = matrix[r * cols..(r + 1) * cols].iter().map(|a| a * a).sum();
        worst = worst.max(sq / cols as f64);
    }
    1.0 / (1.0 + worst)
}

/// Minimize the entropy dual h(λ) = Σσ/w + λᵀε + μ(λ) over λ ≥ 0.
fn max_entropy_dual(
    matrix: &[f64],
    rows: usize,
    cols: usize,
    row_eps: &[f64],
    weights: Option<&[f64]>,
    constraint_tol: f64,
    gap_tol: f64,
    max_iterations: usize,
) -> DualOutcome {
    let eval = |lambda: &[f64]| -> (Vec<f64>, f64) {
        let q = matvec_t(matrix, rows, cols, lambda);
        gibbs_sigma(&q, weights)
    };
    let dual_value = |lambda: &[f64], sigma: &[f64], mu: f64| -> f64 {
        let mass: f64 = match weights {
            None => sigma.iter().sum(),
            Some(w) => sigma.iter().zip(w).map(|(s, w)| s / w).sum(),
        };
        let le: f64 = lambda.iter().zip(row_eps).map(|(l, e)| l * e).sum();
        mass + le + mu
    };

    let mut lambda = vec![0.0; rows];
    let mut eta = initial_step(matrix, rows, cols);
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut iterations = 0;
    let (mut sigma, mut mu) = eval(&lambda);
    // nonmonotone acceptance reference: spectral steps need room to
    // overshoot, so compare against the worst of the recent values
    let mut recent = std::collections::VecDeque::with_capacity(NONMONOTONE_WINDOW);
    loop {
        let (v, excess, cs) = kkt_residuals(matrix, rows, cols, row_eps, &lambda, &sigma);
        if excess <= constraint_tol && cs <= gap_tol {
            return DualOutcome { sigma, lambda, iterations, converged: true, max_excess: excess };
        }
        // spectral steps localize the active set quickly but crawl to high
        // precision on thin feasible sets; hand the endgame to Newton
        let exhausted = iterations >= max_iterations;
        if exhausted || (iterations > 0 && iterations % POLISH_INTERVAL == 0) {
            if let Some((pl, ps, pe)) = entropy_dual_polish(
                matrix,
                rows,
                cols,
                row_eps,
                weights,
                constraint_tol,
                gap_tol,
                &lambda,
            ) {
                return DualOutcome {
                    sigma: ps,
                    lambda: pl,
                    iterations,
                    converged: true,
                    max_excess: pe,
                };
            }
            if exhausted {
                return DualOutcome {
                    sigma,
                    lambda,
                    iterations,
                    converged: false,
                    max_excess: excess,
                };
            }
        }

        let grad: Vec<f64> = row_eps.iter().zip(&v).map(|(e, vi)| e - vi).collect();
        if let Some((prev_lambda, prev_grad)) = &prev {
            let mut ss = 0.0;
            let mut sy = 0.0;
            for r in 0..rows {
                let s = lambda[r] - prev_lambda[r];
                ss += s * s;
                sy += s * (grad[r] - prev_grad[r]);
            }
            if sy > 1e-300 && ss > 0.0 {
                eta = (ss / sy).clamp(1e-18, 1e18);
            } else {
                eta *= 2.0;
            }
        }

        let h0 = dual_value(&lambda, &sigma, mu);
        if recent.len() == NONMONOTONE_WINDOW {
            recent.pop_front();
        }
        recent.push_back(h0);
        let h_ref = recent.iter().fold(h0, |m: f64, &v| m.max(v));
        let mut accepted = false;
        for _ in 0..80 {
            let cand: Vec<f64> =
                lambda.iter().zip(&grad).map(|(l, g)| (l - eta * g).max(0.0)).collect();
            let (cand_sigma, cand_mu) = eval(&cand);
            let h1 = dual_value(&cand, &cand_sigma, cand_mu);
            let decrease: f64 =
                grad.iter().zip(cand.iter().zip(&lambda)).map(|(g, (c, l))| g * (c - l)).sum();
            if h1 <= h_ref + 1e-4 * decrease {
                prev = Some((std::mem::replace(&mut lambda, cand), grad));
                sigma = cand_sigma;
                mu = cand_mu;
                accepted = true;
                break;
            }
            eta *= 0.5;
        }
        if !accepted {
            // step size underflowed: no first-order progress is possible,
            // so a Newton finish is the only remaining option
            if let Some((pl, ps, pe)) = entropy_dual_polish(
                matrix,
                rows,
                cols,
                row_eps,
                weights,
                constraint_tol,
                gap_tol,
                &lambda,
            ) {
                return DualOutcome {
                    sigma: ps,
                    lambda: pl,
                    iterations,
                    converged: true,
                    max_excess: pe,
                };
            }
            let excess = matvec(matrix, rows, cols, &sigma)
                .iter()
                .zip(row_eps)
                .map(|(vi, e)| vi - e)
                .fold(f64::NEG_INFINITY, f64::max);
            return DualOutcome {
                sigma,
                lambda,
                iterations,
                converged: false,
                max_excess: excess,
            };
        }
        iterations += 1;
        if iterations % 5000 == 0 {
            log::debug!("entropy dual iteration {iterations}: excess {:.3e}", {
                let v = matvec(matrix, rows, cols, &sigma);
                v.iter().zip(row_eps).map(|(vi, e)| vi - e).fold(f64::NEG_INFINITY, f64::max)
            });
        }
    }
}

/// σ(λ) for the Gini objective by exact waterfilling: find μ with
/// Σ_a max(0, −w_a(c_a + μ)/2) = 1.
fn waterfill_sigma(c: &[f64], weights: Option<&[f64]>) -> (Vec<f64>, f64) {
    let k = c.len();
    let w = |a: usize| weights.map_or(1.0, |w| w[a]);
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| c[a].partial_cmp(&c[b]).unwrap_or(std::cmp::Ordering::Equal));
    let mut wsum = 0.0;
    let mut wcsum = 0.0;
    let mut mu = 0.0;
    for (m, &a) in order.iter().enumerate() {
        wsum += w(a);
        wcsum += w(a) * c[a];
        let cand = -(2.0 + wcsum) / wsum;
        let upper_ok = m + 1 == k || c[order[m + 1]] + cand >= 0.0;
        if c[a] + cand <= 0.0 && upper_ok {
            mu = cand;
            break;
        }
        mu = cand;
    }
    let sigma: Vec<f64> =
        (0..k).map(|a| (-w(a) * (c[a] + mu) / 2.0).max(0.0)).collect();
    (sigma, mu)
}

/// Maximize the Gini dual g(λ) = −Σ_active w(c+μ)²/4 − λᵀε − μ over λ ≥ 0.
fn max_gini_dual(
    matrix: &[f64],
    rows: usize,
    cols: usize,
    row_eps: &[f64],
    weights: Option<&[f64]>,
    constraint_tol: f64,
    gap_tol: f64,
    max_iterations: usize,
) -> DualOutcome {
    let eval = |lambda: &[f64]| -> (Vec<f64>, Vec<f64>, f64) {
        let c = matvec_t(matrix, rows, cols, lambda);
        let (sigma, mu) = waterfill_sigma(&c, weights);
        (sigma, c, mu)
    };
    let dual_value = |lambda: &[f64], c: &[f64], mu: f64| -> f64 {
        let mut quad = 0.0;
        for a in 0..cols {
            let t = c[a] + mu;
            if t < 0.0 {
                quad += weights.map_or(1.0, |w| w[a]) * t * t / 4.0;
            }
        }
        let le: f64 = lambda.iter().zip(row_eps).map(|(l, e)| l * e).sum();
        -quad - le - mu
    };

    let mut lambda = vec![0.0; rows];
    let mut eta = {
        let mut worst: f64 = 0.0;
        for r in 0..rows {
            let sq: f64 = matrix[r * cols..(r + 1) * cols]
                .iter()
                .enumerate()
                .map(|(a, v)| weights.map_or(1.0, |w| w[a]) * v * v)
                .sum();
            worst = worst.max(sq);
        }
        2.0 / (1.0 + worst)
    };
    let mut prev: Option<(Vec<f64>, Vec<f64>)> = None;
    let mut iterations = 0;
    let (mut sigma, mut cvec, mut mu) = eval(&lambda);
    loop {
        let (v, excess, cs) = kkt_residuals(matrix, rows, cols, row_eps, &lambda, &sigma);
        if excess <= constraint_tol && cs <= gap_tol {
            return DualOutcome { sigma, lambda, iterations, converged: true, max_excess: excess };
        }
        if iterations >= max_iterations {
            return DualOutcome { sigma, lambda, iterations, converged: false, max_excess: excess };
        }

        // ascent direction for the concave dual
        let grad: Vec<f64> = v.iter().zip(row_eps).map(|(vi, e)| vi - e).collect();
        if let Some((prev_lambda, prev_grad)) = &prev {
            let mut ss = 0.0;
            let mut sy = 0.0;
            for r in 0..rows {
                let s = lambda[r] - prev_lambda[r];
                ss += s * s;
                sy += s * (prev_grad[r] - grad[r]);
            }
            if sy > 1e-300 && ss > 0.0 {
                eta = (ss / sy).clamp(1e-18, 1e18);
            } else {
                eta *= 2.0;
            }
        }

        let g0 = dual_value(&lambda, &cvec, mu);
        let mut accepted = false;
        for _ in 0..80 {
            let cand: Vec<f64> =
                lambda.iter().zip(&grad).map(|(l, g)| (l + eta * g).max(0.0)).collect();
            let (cand_sigma, cand_c, cand_mu) = eval(&cand);
            let g1 = dual_value(&cand, &cand_c, cand_mu);
            let increase: f64 =
                grad.iter().zip(cand.iter().zip(&lambda)).map(|(g, (c, l))| g * (c - l)).sum();
            if g1 >= g0 + 1e-4 * increase {
                prev = Some((std::mem::replace(&mut lambda, cand), grad));
                sigma = cand_sigma;
                cvec = cand_c;
                mu = cand_mu;
                accepted = true;
                break;
            }
            eta *= 0.5;
        }
        if !accepted {
            let excess = matvec(matrix, rows, cols, &sigma)
                .iter()
                .zip(row_eps)
                .map(|(vi, e)| vi - e)
                .fold(f64::NEG_INFINITY, f64::max);
            return DualOutcome {
                sigma,
                lambda,
                iterations,
                converged: false,
                max_excess: excess,
            };
        }
        iterations += 1;
    }
}

struct SolveParts {
    cons: DeviationConstraints,
    eff: EffectiveRows,
    row_eps: Vec<f64>,
    epsilon: Vec<f64>,
}

fn prepare(
    game: &NormalFormGame,
    concept: Concept,
    epsilon: &[f64],
    config: &SolveConfig,
) -> Result<SolveParts, SolverError> {
    let epsilon = broadcast_epsilon(epsilon, game.num_players())?;
    if epsilon.iter().any(|e| !e.is_finite()) {
        return Err(SolverError::BadEpsilon("values must be finite".into()));
    }
    validated_weights(config.weights.as_deref(), game.joint_count())?;
    let cons = build_constraints(game, concept);
    let eff = effective_rows(&cons);
    let row_eps: Vec<f64> = eff.players.iter().map(|&p| epsilon[p]).collect();
    let shortfall = feasibility_shortfall(&eff.matrix, eff.rows, eff.cols, &row_eps)?;
    let scale = 1.0 + epsilon.iter().fold(0.0f64, |m, e| m.max(e.abs()));
    if shortfall > 1e-9 * scale {
        return Err(SolverError::Infeasible { requested: epsilon, shortfall });
    }
    Ok(SolveParts { cons, eff, row_eps, epsilon })
}

fn weighted_entropy(sigma: &[f64], weights: Option<&[f64]>) -> f64 {
    sigma
        .iter()
        .enumerate()
        .map(|(a, &s)| {
            if s > 0.0 {
                -s * s.ln() / weights.map_or(1.0, |w| w[a])
            } else {
                0.0
            }
        })
        .sum()
}

fn finish(
    game: &NormalFormGame,
    parts: &SolveParts,
    outcome: DualOutcome,
    objective_value: f64,
) -> Result<EquilibriumSolution, SolverError> {
    if !outcome.converged {
        return Err(SolverError::NotConverged {
            iterations: outcome.iterations,
            violation: outcome.max_excess,
        });
    }
    let dist = JointDistribution::new(game.shape().to_vec(), outcome.sigma)?;
    let achieved_violation = parts.cons.max_violation(&dist);
    // expand the solved multipliers back over the full constraint stack;
    // self-deviation rows never bind, so their multipliers are exactly zero,
    // and any trailing extra rows (the welfare slab) keep their place
    let effective: Vec<usize> = parts.cons.effective_rows().collect();
    let mut dual_variables = vec![0.0; parts.cons.num_rows()];
    for (slot, &r) in effective.iter().enumerate() {
        dual_variables[r] = outcome.lambda[slot];
    }
    dual_variables.extend_from_slice(&outcome.lambda[effective.len()..]);
    Ok(EquilibriumSolution {
        dist,
        epsilon: parts.epsilon.clone(),
        achieved_violation,
        objective_value,
        dual_variables,
        iterations: outcome.iterations,
        converged: true,
    })
}

/// Maximize (weighted) Shannon entropy over the ε-feasible polytope. The
/// result has full support.
pub fn solve_max_entropy(
    game: &NormalFormGame,
    concept: Concept,
    epsilon: &[f64],
    config: &SolveConfig,
) -> Result<EquilibriumSolution, SolverError> {
    let parts = prepare(game, concept, epsilon, config)?;
    let outcome = max_entropy_dual(
        &parts.eff.matrix,
        parts.eff.rows,
        parts.eff.cols,
        &parts.row_eps,
        config.weights.as_deref(),
        config.constraint_tol,
        config.duality_gap_tol,
        config.max_iterations,
    );
    let objective = weighted_entropy(&outcome.sigma, config.weights.as_deref());
    finish(game, &parts, outcome, objective)
}

/// Minimize the (weighted) concentration Σσ²/w over the ε-feasible
/// polytope; reported objective is the Gini-style impurity 1 − Σσ²/w.
/// Unique by strict convexity, but not necessarily full-support.
pub fn solve_max_gini(
    game: &NormalFormGame,
    concept: Concept,
    epsilon: &[f64],
    config: &SolveConfig,
) -> Result<EquilibriumSolution, SolverError> {
    let parts = prepare(game, concept, epsilon, config)?;
    let outcome = max_gini_dual(
        &parts.eff.matrix,
        parts.eff.rows,
        parts.eff.cols,
        &parts.row_eps,
        config.weights.as_deref(),
        config.constraint_tol,
        config.duality_gap_tol,
        config.max_iterations,
    );
    let objective = 1.0
        - outcome
            .sigma
            .iter()
            .enumerate()
            .map(|(a, s)| s * s / config.weights.as_ref().map_or(1.0, |w| w[a]))
            .sum::<f64>();
    finish(game, &parts, outcome, objective)
}

/// Maximize total welfare Σ_p Σ_a σ(a)G_p(a) by LP, then break ties toward
/// maximum entropy on a thin slab around the welfare-optimal face.
pub fn solve_max_welfare(
    game: &NormalFormGame,
    concept: Concept,
    epsilon: &[f64],
    config: &SolveConfig,
) -> Result<EquilibriumSolution, SolverError> {
    let parts = prepare(game, concept, epsilon, config)?;
    let k = game.joint_count();
    let welfare: Vec<f64> =
        (0..k).map(|a| (0..game.num_players()).map(|p| game.payoff(p, a)).sum()).collect();

    let mut lp = LinearProgram::new(welfare.iter().map(|w| -w).collect());
    for r in 0..parts.eff.rows {
        lp.constrain(
            parts.eff.matrix[r * k..(r + 1) * k].to_vec(),
            Relation::Le,
            parts.row_eps[r],
        );
    }
    lp.constrain(vec![1.0; k], Relation::Eq, 1.0);
    let best = -simplex::solve(&lp)?.objective;
    let slack = 1e-9 * (1.0 + best.abs());

    let rows = parts.eff.rows + 1;
    let mut matrix = parts.eff.matrix.clone();
    matrix.extend(welfare.iter().map(|w| -w));
    let mut row_eps = parts.row_eps.clone();
    row_eps.push(-(best - slack));
    let outcome = max_entropy_dual(
        &matrix,
        rows,
        k,
        &row_eps,
        config.weights.as_deref(),
        config.constraint_tol,
        config.duality_gap_tol,
        config.max_iterations,
    );
    let achieved: f64 = welfare.iter().zip(&outcome.sigma).map(|(w, s)| w * s).sum();
    finish(game, &parts, outcome, achieved)
}

/// Exact max-entropy Nash equilibrium for two-player constant-sum games.
///
/// Computes each player's security value by LP, then the max-entropy point
/// of their optimal-strategy polytope (relaxed by a hair to absorb LP
/// rounding), and returns the product distribution. This is the unique
/// entropy-maximal exact equilibrium; its swap-deviation violation is
/// bounded by the relaxation and solver tolerances (≤ ~1e-8).
pub fn solve_mene_2p0s(game: &NormalFormGame) -> Result<EquilibriumSolution, SolverError> {
    if game.num_players() != 2 {
        return Err(SolverError::NotTwoPlayer(game.num_players()));
    }
    let (rows, cols) = (game.shape()[0], game.shape()[1]);
    let mut smin = f64::INFINITY;
    let mut smax = f64::NEG_INFINITY;
    for a in 0..game.joint_count() {
        let s = game.payoff(0, a) + game.payoff(1, a);
        smin = smin.min(s);
        smax = smax.max(s);
    }
    if smax - smin > 1e-9 {
        return Err(SolverError::NotConstantSum(smax - smin));
    }

    // security value and max-entropy optimal mixture, one player at a time
    let solve_side = |own: &dyn Fn(usize, usize) -> f64, dim: usize, opp: usize| -> Result<(f64, Vec<f64>, Vec<f64>, usize, bool), SolverError> {
        // LP: maximize v subject to Σ_i x_i own(i, j) ≥ v for all j
        let mut objective = vec![0.0; dim + 1];
        objective[dim] = -1.0;
        let mut lp = LinearProgram::new(objective);
        lp.mark_free(dim);
        for j in 0..opp {
            let mut coeffs: Vec<f64> = (0..dim).map(|i| -own(i, j)).collect();
            coeffs.push(1.0);
            lp.constrain(coeffs, Relation::Le, 0.0);
        }
        let mut simplex_row = vec![1.0; dim];
        simplex_row.push(0.0);
        lp.constrain(simplex_row, Relation::Eq, 1.0);
        let value = -simplex::solve(&lp)?.objective;

        let mut range = 0.0f64;
        for j in 0..opp {
            for i in 0..dim {
                range = range.max(own(i, j).abs());
            }
        }
        // the security polytope at the exact value has an empty interior,
        // so it is relaxed to restore a Slater point. The relaxation leaks
        // mass ≈ relax/gap onto strategies a payoff gap below the value, so
        // it must stay at 1e-12 for a 1e-6 mass cutoff to exclude every
        // strategy whose gap is visible at 1e-6; the Newton finish inside
        // the dual iteration handles the resulting thin feasible set
        let relax = 1e-12 * (1.0 + value.abs() + range);
        let mut matrix = Vec::with_capacity(opp * dim);
        for j in 0..opp {
            for i in 0..dim {
                matrix.push(-own(i, j));
            }
        }
        let row_eps = vec![relax - value; opp];
        let outcome =
            max_entropy_dual(&matrix, opp, dim, &row_eps, None, 1e-12, 1e-9, 200_000);
        if !outcome.converged {
            return Err(SolverError::NotConverged {
                iterations: outcome.iterations,
                violation: outcome.max_excess,
            });
        }
        Ok((value, outcome.sigma, outcome.lambda, outcome.iterations, outcome.converged))
    };

    let g1 = |i: usize, j: usize| game.payoff(0, i * cols + j);
    let g2 = |j: usize, i: usize| game.payoff(1, i * cols + j);
    let (_v1, x, lam1, it1, _) = solve_side(&g1, rows, cols)?;
    let (_v2, y, lam2, it2, _) = solve_side(&g2, cols, rows)?;

    let dist = crate::game::outer_product(&[x, y]);
    let achieved = crate::constraints::max_violation(game, &dist, Concept::Ce)
        .expect("outer product matches game shape");
    let entropy = dist.entropy();
    let mut duals = lam1;
    duals.extend(lam2);
    Ok(EquilibriumSolution {
        dist,
        epsilon: vec![0.0; 2],
        achieved_violation: achieved,
        objective_value: entropy,
        dual_variables: duals,
        iterations: it1 + it2,
        converged: true,
    })
}

/// Dispatch a solve described entirely by a config: resolve ε, then run the
/// selected objective. The Nash concept ignores selection and ε.
pub fn solve(game: &NormalFormGame, config: &SolveConfig) -> Result<EquilibriumSolution, SolverError> {
    match config.concept.deviation_concept() {
        None => solve_mene_2p0s(game),
        Some(concept) => {
            let epsilon = resolve_epsilon(game, concept, &config.epsilon_mode)?;
            match config.selection {
                Selection::MaxEntropy => solve_max_entropy(game, concept, &epsilon, config),
                Selection::MaxGini => solve_max_gini(game, concept, &epsilon, config),
                Selection::MaxWelfare => solve_max_welfare(game, concept, &epsilon, config),
            }
        }
    }
}
