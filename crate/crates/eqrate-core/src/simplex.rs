//! Dense two-phase simplex for small linear programs.
//!
//! Problems are stated as `minimize c·x` over constraints `coeffs·x {<=,>=,=} rhs`
//! with `x >= 0` except for variables marked free. Free variables are split
//! into positive and negative parts internally. Entering columns follow
//! Bland's rule; leaving rows break near-ties toward decisively larger
//! pivots for numerical stability, then toward the smallest basis index.
//! The feasibility problems this crate produces are highly degenerate (many
//! zero right-hand sides), so the iteration cap backstops the weakened
//! anti-cycling guarantee; reduced costs are rebuilt from scratch before
//! optimality is accepted.

use thiserror::Error;

const PIVOT_TOL: f64 = 1e-10;
const COST_TOL: f64 = 1e-9;
/// Optimality threshold for the final polish pass over phase-2 vertices.
const COST_TOL_TIGHT: f64 = 5e-13;
const FEAS_TOL: f64 = 1e-7;
/// Per-pivot right-hand-side relaxation in the two-pass ratio test; bounds
/// how far one exchange may push a basic variable negative.
const RATIO_STEP: f64 = 1e-9;
/// A reduced cost milder than this on a column without an admissible pivot
/// row counts as dependent-direction noise, not an unbounded-ray witness.
const RAY_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Relation {
    Le,
    Ge,
    Eq,
}

#[derive(Debug, Clone)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub relation: Relation,
    pub rhs: f64,
}

#[derive(Debug, Clone)]
pub struct LinearProgram {
    /// Objective coefficients, minimized.
    pub minimize: Vec<f64>,
    pub constraints: Vec<Constraint>,
    /// Marks variables allowed to take negative values.
    pub free: Vec<bool>,
}

impl LinearProgram {
    pub fn new(minimize: Vec<f64>) -> Self {
        let n = minimize.len();
        Self { minimize, constraints: Vec::new(), free: vec![false; n] }
    }

    pub fn constrain(&mut self, coeffs: Vec<f64>, relation: Relation, rhs: f64) -> &mut Self {
        self.constraints.push(Constraint { coeffs, relation, rhs });
        self
    }

    pub fn mark_free(&mut self, var: usize) -> &mut Self {
        self.free[var] = true;
        self
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LpError {
    #[error("linear program is infeasible")]
    Infeasible,
    #[error("linear program is unbounded")]
    Unbounded,
    #[error("simplex iteration limit reached")]
    IterationLimit,
    #[error("malformed linear program: {0}")]
    BadProblem(String),
}

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: Vec<f64>,
    pub objective: f64,
}

struct Tableau {
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    basis: Vec<usize>,
    ncols: usize,
    /// Original constraint index behind each surviving row.
    rowid: Vec<usize>,
}

/// Standard-form problem data retained for refactorization.
struct StdForm {
    rows: Vec<Vec<f64>>,
    rhs: Vec<f64>,
    /// Width without artificial columns.
    nstd: usize,
    /// Original row of each artificial column, indexed by `col - nstd`.
    art_row: Vec<usize>,
}

impl StdForm {
    fn entry(&self, orig_row: usize, col: usize) -> f64 {
        if col < self.nstd {
            self.rows[orig_row][col]
        } else if self.art_row[col - self.nstd] == orig_row {
            1.0
        } else {
            0.0
        }
    }
}

/// LU factorization with partial pivoting, in place. Returns the row
/// permutation, or None when a pivot falls below `tiny`.
fn lu_factor(a: &mut [f64], n: usize, tiny: f64) -> Option<Vec<usize>> {
    let mut perm: Vec<usize> = (0..n).collect();
    for k in 0..n {
        let mut p = k;
        for r in (k + 1)..n {
            if a[r * n + k].abs() > a[p * n + k].abs() {
                p = r;
            }
        }
        if a[p * n + k].abs() <= tiny {
            return None;
        }
        if p != k {
            for c in 0..n {
                a.swap(k * n + c, p * n + c);
            }
            perm.swap(k, p);
        }
        let piv = a[k * n + k];
        for r in (k + 1)..n {
            let f = a[r * n + k] / piv;
            a[r * n + k] = f;
            for c in (k + 1)..n {
                a[r * n + c] -= f * a[k * n + c];
            }
        }
    }
    Some(perm)
}

fn lu_solve(a: &[f64], perm: &[usize], n: usize, b: &[f64], out: &mut [f64]) {
    for i in 0..n {
        let mut v = b[perm[i]];
        for j in 0..i {
            v -= a[i * n + j] * out[j];
        }
        out[i] = v;
    }
    for i in (0..n).rev() {
        let mut v = out[i];
        for j in (i + 1)..n {
            v -= a[i * n + j] * out[j];
        }
        out[i] = v / a[i * n + i];
    }
}

impl Tableau {
    fn pivot(&mut self, row: usize, col: usize) {
        let piv = self.rows[row][col];
        for v in self.rows[row].iter_mut() {
            *v /= piv;
        }
        self.rhs[row] /= piv;
        for r in 0..self.rows.len() {
            if r == row {
                continue;
            }
            let factor = self.rows[r][col];
            if factor == 0.0 {
                continue;
            }
            for c in 0..self.ncols {
                let delta = factor * self.rows[row][c];
                self.rows[r][c] -= delta;
            }
            // keep the pivot column numerically exact
            self.rows[r][col] = 0.0;
            self.rhs[r] -= factor * self.rhs[row];
        }
        self.basis[row] = col;
    }

    /// Rebuild every row and the right-hand side by a fresh elimination of
    /// the original constraint data at the current basis. Pivot-by-pivot
    /// updates accumulate error in the tableau itself, which no optimality
    /// threshold below that drift can see through; refreshing from source
    /// data restores full precision at the current vertex. Returns false,
    /// leaving the state untouched, when the basis matrix is numerically
    /// singular.
    fn refactorize(&mut self, std: &StdForm) -> bool {
        let m = self.rows.len();
        let mut bmat = vec![0.0; m * m];
        for i in 0..m {
            for j in 0..m {
                bmat[i * m + j] = std.entry(self.rowid[i], self.basis[j]);
            }
        }
        let scale = bmat.iter().fold(0.0f64, |acc, v| acc.max(v.abs()));
        let perm = match lu_factor(&mut bmat, m, 1e-12 * scale.max(1e-30)) {
            Some(p) => p,
            None => return false,
        };
        let mut is_basic = vec![usize::MAX; self.ncols];
        for (j, &b) in self.basis.iter().enumerate() {
            is_basic[b] = j;
        }
        let mut fresh = vec![vec![0.0; self.ncols]; m];
        let mut col = vec![0.0; m];
        let mut sol = vec![0.0; m];
        for c in 0..self.ncols {
            if is_basic[c] != usize::MAX {
                // basic columns are exact unit vectors by definition
                fresh[is_basic[c]][c] = 1.0;
                continue;
            }
            for i in 0..m {
                col[i] = std.entry(self.rowid[i], c);
            }
            lu_solve(&bmat, &perm, m, &col, &mut sol);
            for i in 0..m {
                fresh[i][c] = sol[i];
            }
        }
        for i in 0..m {
            col[i] = std.rhs[self.rowid[i]];
        }
        lu_solve(&bmat, &perm, m, &col, &mut sol);
        for v in sol.iter_mut() {
            if *v < 0.0 && *v > -FEAS_TOL {
                *v = 0.0;
            }
        }
        self.rows = fresh;
        self.rhs = sol;
        true
    }

    /// Reduced costs and objective computed from scratch for the current
    /// basis (basic columns of the tableau are exact unit vectors, so the
    /// result is as accurate as the tableau itself).
    fn reduced_costs(&self, cost: &[f64]) -> (Vec<f64>, f64) {
        let mut reduced: Vec<f64> = cost.to_vec();
        reduced.resize(self.ncols, 0.0);
        let mut objective = 0.0;
        for (r, &b) in self.basis.iter().enumerate() {
            let cb = if b < cost.len() { cost[b] } else { 0.0 };
            if cb == 0.0 {
                continue;
            }
            for c in 0..self.ncols {
                reduced[c] -= cb * self.rows[r][c];
            }
            objective += cb * self.rhs[r];
        }
        (reduced, objective)
    }

    /// Run simplex for the given cost vector over the allowed columns.
    /// Returns the objective value at optimum.
    fn optimize(
        &mut self,
        cost: &[f64],
        allowed: usize,
        max_iter: usize,
        tol: f64,
        std: Option<&StdForm>,
    ) -> Result<f64, LpError> {
        let (mut reduced, mut objective) = self.reduced_costs(cost);
        // columns judged to be dependent noise since the last pivot; the
        // optimality rebuild must not resurrect them or the loop stalls
        let mut banned = vec![false; self.ncols];
        // whether the rows are freshly refactorized with no pivots since
        let mut fresh = false;
        // after this many consecutive degenerate exchanges, drop from the
        // stability-first ratio test to Bland's rule until the objective
        // strictly moves again; Bland cannot cycle
        let stall_limit = 16 + self.rows.len() + self.ncols;
        let mut stalled = 0usize;
        for _ in 0..max_iter {
            // entering column: first improving (Bland), but the reduced
            // costs are maintained incrementally and drift, so rebuild them
            // exactly before accepting optimality
            let pick =
                |red: &[f64], ban: &[bool]| (0..allowed).find(|&c| !ban[c] && red[c] < -tol);
            let enter = match pick(&reduced, &banned) {
                Some(c) => c,
                None => {
                    let (exact, exact_obj) = self.reduced_costs(cost);
                    reduced = exact;
                    objective = exact_obj;
                    match pick(&reduced, &banned) {
                        Some(c) => c,
                        None => return Ok(objective),
                    }
                }
            };
            // leaving row by a Harris-style two-pass ratio test. Pass 1
            // finds the tightest ratio after relaxing each right-hand side
            // by a feasibility step; pass 2 takes the largest pivot among
            // rows whose true ratio stays within that bound. A tiny pivot
            // amplifies its whole row and wrecks the tableau, so stability
            // beats the textbook minimum here; negative basic values are
            // feasibility drift and their ratios floor at zero.
            let mut relaxed = f64::INFINITY;
            for r in 0..self.rows.len() {
                let a = self.rows[r][enter];
                if a > PIVOT_TOL {
                    relaxed = relaxed.min(((self.rhs[r] + RATIO_STEP) / a).max(0.0));
                }
            }
            if relaxed == f64::INFINITY {
                // an unbounded ray needs a decisively improving direction;
                // a noise-level reduced cost on a column with no admissible
                // pivot is a dependent direction, not a certificate
                if reduced[enter] > -RAY_TOL {
                    banned[enter] = true;
                    continue;
                }
                return Err(LpError::Unbounded);
            }
            banned.fill(false);
            let mut leave = usize::MAX;
            if stalled <= stall_limit {
                let mut leave_piv = 0.0;
                for r in 0..self.rows.len() {
                    let a = self.rows[r][enter];
                    if a > PIVOT_TOL && (self.rhs[r] / a).max(0.0) <= relaxed && a > leave_piv {
                        leave = r;
                        leave_piv = a;
                    }
                }
            } else {
                // Bland: smallest basis index among the tightest true ratios
                let mut best = f64::INFINITY;
                for r in 0..self.rows.len() {
                    let a = self.rows[r][enter];
                    if a > PIVOT_TOL {
                        best = best.min((self.rhs[r] / a).max(0.0));
                    }
                }
                for r in 0..self.rows.len() {
                    let a = self.rows[r][enter];
                    if a > PIVOT_TOL
                        && (self.rhs[r] / a).max(0.0) <= best + PIVOT_TOL
                        && (leave == usize::MAX || self.basis[r] < self.basis[leave])
                    {
                        leave = r;
                    }
                }
            }
            if leave == usize::MAX {
                // every admissible row only fit under the relaxation; take
                // the tightest of them
                let mut best = f64::INFINITY;
                for r in 0..self.rows.len() {
                    let a = self.rows[r][enter];
                    if a > PIVOT_TOL {
                        let ratio = (self.rhs[r] / a).max(0.0);
                        if ratio < best {
                            best = ratio;
                            leave = r;
                        }
                    }
                }
            }
            self.pivot(leave, enter);
            let factor = reduced[enter];
            for c in 0..self.ncols {
                reduced[c] -= factor * self.rows[leave][c];
            }
            reduced[enter] = 0.0;
            let moved = factor * self.rhs[leave];
            objective += moved;
            if moved < -1e-15 * (1.0 + objective.abs()) {
                stalled = 0;
            } else {
                stalled += 1;
            }
        }
        Err(LpError::IterationLimit)
    }
}

/// Solve a linear program with the two-phase simplex method.
pub fn solve(lp: &LinearProgram) -> Result<LpSolution, LpError> {
    let n = lp.minimize.len();
    if lp.free.len() != n {
        return Err(LpError::BadProblem("free-variable mask length mismatch".into()));
    }
    for (i, c) in lp.constraints.iter().enumerate() {
        if c.coeffs.len() != n {
            return Err(LpError::BadProblem(format!("constraint {i} has wrong arity")));
        }
        if !c.rhs.is_finite() || c.coeffs.iter().any(|v| !v.is_finite()) {
            return Err(LpError::BadProblem(format!("constraint {i} has non-finite entries")));
        }
    }

    // column layout: original vars, negative parts of free vars, slacks
    let mut neg_col = vec![usize::MAX; n];
    let mut next = n;
    for j in 0..n {
        if lp.free[j] {
            neg_col[j] = next;
            next += 1;
        }
    }
    let nslack = lp
        .constraints
        .iter()
        .filter(|c| c.relation != Relation::Eq)
        .count();
    let nstd = next + nslack;

    let m = lp.constraints.len();
    let mut rows = Vec::with_capacity(m);
    let mut rhs = Vec::with_capacity(m);
    let mut slack_col_of = vec![usize::MAX; m];
    let mut slack_idx = next;
    for c in lp.constraints.iter() {
        let mut row = vec![0.0; nstd];
        for (j, &a) in c.coeffs.iter().enumerate() {
            row[j] = a;
            if lp.free[j] {
                row[neg_col[j]] = -a;
            }
        }
        let mut b = c.rhs;
        match c.relation {
            Relation::Le => {
                row[slack_idx] = 1.0;
                slack_col_of[rows.len()] = slack_idx;
                slack_idx += 1;
            }
            Relation::Ge => {
                row[slack_idx] = -1.0;
                slack_col_of[rows.len()] = slack_idx;
                slack_idx += 1;
            }
            Relation::Eq => {}
        }
        if b < 0.0 {
            for v in row.iter_mut() {
                *v = -*v;
            }
            b = -b;
        }
        rows.push(row);
        rhs.push(b);
    }

    let std_rows = rows.clone();
    let std_rhs = rhs.clone();

    // rows whose slack survives with +1 start basic on it; others need an
    // artificial variable
    let mut basis = vec![usize::MAX; m];
    let mut artificial_cols = Vec::new();
    let mut art_row = Vec::new();
    for r in 0..m {
        let sc = slack_col_of[r];
        if sc != usize::MAX && rows[r][sc] > 0.5 {
            basis[r] = sc;
        }
    }
    let mut ncols = nstd;
    for r in 0..m {
        if basis[r] == usize::MAX {
            artificial_cols.push(ncols);
            art_row.push(r);
            basis[r] = ncols;
            ncols += 1;
        }
    }
    for row in rows.iter_mut() {
        row.resize(ncols, 0.0);
    }
    for (r, &b) in basis.iter().enumerate() {
        if b >= nstd {
            rows[r][b] = 1.0;
        }
    }

    let std_form = StdForm { rows: std_rows, rhs: std_rhs, nstd, art_row };
    let mut tab = Tableau { rows, rhs, basis, ncols, rowid: (0..m).collect() };
    let max_iter = 2000 + 200 * (m + ncols);

    if !artificial_cols.is_empty() {
        let mut phase1 = vec![0.0; ncols];
        for &c in &artificial_cols {
            phase1[c] = 1.0;
        }
        let z1 = tab.optimize(&phase1, ncols, max_iter, COST_TOL)?;
        if z1 > FEAS_TOL {
            return Err(LpError::Infeasible);
        }
        // drive remaining artificials out of the basis, pivoting on the
        // largest entry available to keep the exchange stable
        let mut r = 0;
        while r < tab.rows.len() {
            if tab.basis[r] >= nstd {
                let col = (0..nstd)
                    .filter(|&c| tab.rows[r][c].abs() > PIVOT_TOL)
                    .max_by(|&a, &b| {
                        tab.rows[r][a].abs().total_cmp(&tab.rows[r][b].abs())
                    });
                if let Some(c) = col {
                    tab.pivot(r, c);
                } else {
                    // redundant constraint row
                    tab.rows.swap_remove(r);
                    tab.rhs.swap_remove(r);
                    tab.basis.swap_remove(r);
                    tab.rowid.swap_remove(r);
                    continue;
                }
            }
            r += 1;
        }
        for row in tab.rows.iter_mut() {
            row.truncate(nstd);
        }
        tab.ncols = nstd;
        // phase 1 ends within feasibility tolerance; snap drift below zero
        for b in tab.rhs.iter_mut() {
            if *b < 0.0 && *b > -FEAS_TOL {
                *b = 0.0;
            }
        }
        // start phase 2 from clean rows rather than phase 1 leftovers
        tab.refactorize(&std_form);
    }

    let mut cost = vec![0.0; nstd];
    for j in 0..n {
        cost[j] = lp.minimize[j];
        if lp.free[j] {
            cost[neg_col[j]] = -lp.minimize[j];
        }
    }
    let mut objective = tab.optimize(&cost, nstd, max_iter, COST_TOL)?;
    // polish at a tighter optimality threshold, alternating with
    // refactorization: drift hides shallow improving directions from the
    // running tableau, and refreshed rows expose them. Every exchange keeps
    // feasibility and never raises the objective, so bailing out early at
    // any point still leaves the best certified vertex reached so far.
    for _ in 0..4 {
        if !tab.refactorize(&std_form) {
            break;
        }
        let before = tab.basis.clone();
        match tab.optimize(&cost, nstd, 500, COST_TOL_TIGHT) {
            Ok(obj) => {
                objective = obj;
                if tab.basis == before {
                    break;
                }
            }
            Err(_) => {
                objective = tab.reduced_costs(&cost).1.min(objective);
                break;
            }
        }
    }

    let mut std_x = vec![0.0; nstd];
    for (r, &b) in tab.basis.iter().enumerate() {
        std_x[b] = tab.rhs[r];
    }
    let mut x = vec![0.0; n];
    for j in 0..n {
        x[j] = std_x[j];
        if lp.free[j] {
            x[j] -= std_x[neg_col[j]];
        }
    }
    Ok(LpSolution { x, objective })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn maximizes_over_a_box_corner() {
        // max x + 2y st x <= 3, y <= 4  ->  (3, 4)
        let mut lp = LinearProgram::new(vec![-1.0, -2.0]);
        lp.constrain(vec![1.0, 0.0], Relation::Le, 3.0);
        lp.constrain(vec![0.0, 1.0], Relation::Le, 4.0);
        let sol = solve(&lp).unwrap();
        assert!((sol.objective + 11.0).abs() < 1e-9);
        assert!((sol.x[0] - 3.0).abs() < 1e-9);
        assert!((sol.x[1] - 4.0).abs() < 1e-9);
    }

    #[test]
    fn textbook_production_problem() {
        // max 3x + 5y st x <= 4, 2y <= 12, 3x + 2y <= 18 -> obj 36 at (2, 6)
        let mut lp = LinearProgram::new(vec![-3.0, -5.0]);
        lp.constrain(vec![1.0, 0.0], Relation::Le, 4.0);
        lp.constrain(vec![0.0, 2.0], Relation::Le, 12.0);
        lp.constrain(vec![3.0, 2.0], Relation::Le, 18.0);
        let sol = solve(&lp).unwrap();
        assert!((sol.objective + 36.0).abs() < 1e-9);
        assert!((sol.x[0] - 2.0).abs() < 1e-9);
        assert!((sol.x[1] - 6.0).abs() < 1e-9);
    }

    #[test]
    fn equality_and_free_variable() {
        // min t st t >= x - 0.6, t >= 0.6 - x, x = 0.25, t free -> t = 0.35
        let mut lp = LinearProgram::new(vec![0.0, 1.0]);
        lp.mark_free(1);
        lp.constrain(vec![-1.0, 1.0], Relation::Ge, -0.6);
        lp.constrain(vec![1.0, 1.0], Relation::Ge, 0.6);
        lp.constrain(vec![1.0, 0.0], Relation::Eq, 0.25);
        let sol = solve(&lp).unwrap();
        assert!((sol.objective - 0.35).abs() < 1e-9);
        assert!((sol.x[1] - 0.35).abs() < 1e-9);
    }

    #[test]
    fn free_objective_can_go_negative() {
        // min t st x + t >= 0, x <= 2, x = 2 forces nothing on t except t >= -x
        let mut lp = LinearProgram::new(vec![0.0, 1.0]);
        lp.mark_free(1);
        lp.constrain(vec![1.0, 1.0], Relation::Ge, 0.0);
        lp.constrain(vec![1.0, 0.0], Relation::Eq, 2.0);
        let sol = solve(&lp).unwrap();
        assert!((sol.objective + 2.0).abs() < 1e-9, "objective {}", sol.objective);
    }

    #[test]
    fn detects_infeasible() {
        let mut lp = LinearProgram::new(vec![1.0]);
        lp.constrain(vec![1.0], Relation::Le, -1.0);
        assert_eq!(solve(&lp).unwrap_err(), LpError::Infeasible);
    }

    #[test]
    fn detects_unbounded() {
        let mut lp = LinearProgram::new(vec![-1.0]);
        lp.constrain(vec![-1.0], Relation::Le, 0.0);
        assert_eq!(solve(&lp).unwrap_err(), LpError::Unbounded);
    }

    #[test]
    fn degenerate_zero_rhs_terminates() {
        // min -x st x - y <= 0, y - x <= 0, x + y <= 1: forces x = y = 1/2
        let mut lp = LinearProgram::new(vec![-1.0, 0.0]);
        lp.constrain(vec![1.0, -1.0], Relation::Le, 0.0);
        lp.constrain(vec![-1.0, 1.0], Relation::Le, 0.0);
        lp.constrain(vec![1.0, 1.0], Relation::Le, 1.0);
        let sol = solve(&lp).unwrap();
        assert!((sol.x[0] - 0.5).abs() < 1e-9);
        assert!((sol.x[1] - 0.5).abs() < 1e-9);
    }

    #[test]
    fn simplex_vertex_with_equality_row() {
        // min c.x over the probability simplex picks the smallest cost
        let mut lp = LinearProgram::new(vec![3.0, 1.0, 2.0]);
        lp.constrain(vec![1.0, 1.0, 1.0], Relation::Eq, 1.0);
        let sol = solve(&lp).unwrap();
        assert!((sol.objective - 1.0).abs() < 1e-9);
        assert!((sol.x[1] - 1.0).abs() < 1e-9);
    }
}
