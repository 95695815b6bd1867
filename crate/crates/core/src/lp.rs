//! Dense two-phase simplex for the tiny linear programs that arise in cone
//! geometry (facet redundancy, face containment, bounding boxes).
//!
//! Problems here have at most a few dozen variables, so a plain tableau with
//! Bland's anti-cycling rule is adequate and keeps the crate free of external
//! solver dependencies.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

const PIVOT_TOL: f64 = 1e-11;
const OPT_TOL: f64 = 1e-9;
const MAX_PIVOTS: usize = 20_000;

#[derive(Debug, Clone)]
pub struct LpSolution {
    pub x: DVector<f64>,
    pub value: f64,
}

#[derive(Debug, Clone)]
pub enum LpOutcome {
    Optimal(LpSolution),
    Infeasible,
    Unbounded,
}

impl LpOutcome {
    /// Unwrap an optimal solution, mapping the degenerate outcomes to a
    /// geometry error carrying `context`.
    pub fn optimal(self, context: &str) -> Result<LpSolution> {
        match self {
            LpOutcome::Optimal(s) => Ok(s),
            LpOutcome::Infeasible => {
                Err(Error::Geometry(format!("LP infeasible while {context}")))
            }
            LpOutcome::Unbounded => Err(Error::Geometry(format!("LP unbounded while {context}"))),
        }
    }
}

/// Minimize `cᵀx` over free `x` subject to `a_ub x ≤ b_ub` and
/// `a_eq x = b_eq`. Either constraint block may be empty (0 rows).
pub fn solve_lp(
    c: &DVector<f64>,
    a_ub: &DMatrix<f64>,
    b_ub: &DVector<f64>,
    a_eq: &DMatrix<f64>,
    b_eq: &DVector<f64>,
) -> Result<LpOutcome> {
    let nv = c.len();
    let mu = a_ub.nrows();
    let me = a_eq.nrows();
    let m = mu + me;
    // Standard-form variables: x = p − q (2 nv), then mu slacks.
    let n = 2 * nv + mu;

    let mut a = DMatrix::zeros(m, n);
    let mut b = DVector::zeros(m);
    let mut cost = DVector::zeros(n);
    for j in 0..nv {
        cost[j] = c[j];
        cost[nv + j] = -c[j];
    }
    for i in 0..mu {
        for j in 0..nv {
            a[(i, j)] = a_ub[(i, j)];
            a[(i, nv + j)] = -a_ub[(i, j)];
        }
        a[(i, 2 * nv + i)] = 1.0;
        b[i] = b_ub[i];
    }
    for i in 0..me {
        for j in 0..nv {
            a[(mu + i, j)] = a_eq[(i, j)];
            a[(mu + i, nv + j)] = -a_eq[(i, j)];
        }
        b[mu + i] = b_eq[i];
    }

    match simplex_two_phase(a, b, cost)? {
        StandardOutcome::Optimal(x) => {
            let mut orig = DVector::zeros(nv);
            for j in 0..nv {
                orig[j] = x[j] - x[nv + j];
            }
            let value = c.dot(&orig);
            Ok(LpOutcome::Optimal(LpSolution { x: orig, value }))
        }
        StandardOutcome::Infeasible => Ok(LpOutcome::Infeasible),
        StandardOutcome::Unbounded => Ok(LpOutcome::Unbounded),
    }
}

enum StandardOutcome {
    Optimal(DVector<f64>),
    Infeasible,
    Unbounded,
}

/// min cᵀx s.t. Ax = b, x ≥ 0.
fn simplex_two_phase(
    mut a: DMatrix<f64>,
    mut b: DVector<f64>,
    cost: DVector<f64>,
) -> Result<StandardOutcome> {
    let m = a.nrows();
    let n = a.ncols();
    for i in 0..m {
        if b[i] < 0.0 {
            b[i] = -b[i];
            for j in 0..n {
                a[(i, j)] = -a[(i, j)];
            }
        }
    }

    // Phase 1 tableau with one artificial per row.
    let nt = n + m;
    let mut t = DMatrix::zeros(m + 1, nt + 1);
    for i in 0..m {
        for j in 0..n {
            t[(i, j)] = a[(i, j)];
        }
        t[(i, n + i)] = 1.0;
        t[(i, nt)] = b[i];
    }
    // Phase-1 cost row: minimize sum of artificials, canonicalized.
    for j in 0..=nt {
        let mut s = 0.0;
        for i in 0..m {
            s += t[(i, j)];
        }
        t[(m, j)] = if (n..nt).contains(&j) { 0.0 } else { -s };
    }
    let mut basis: Vec<usize> = (n..nt).collect();
    run_simplex(&mut t, &mut basis, nt)?;
    let phase1 = -t[(m, nt)];
    if phase1 > 1e-7 {
        return Ok(StandardOutcome::Infeasible);
    }
    // Drive remaining artificials out of the basis.
    for i in 0..m {
        if basis[i] >= n {
            let mut pivot_col = None;
            for j in 0..n {
                if t[(i, j)].abs() > PIVOT_TOL {
                    pivot_col = Some(j);
                    break;
                }
            }
            if let Some(j) = pivot_col {
                pivot(&mut t, i, j);
                basis[i] = j;
            }
            // A fully zero row is redundant; its artificial stays basic at 0.
        }
    }

    // Phase 2: replace the cost row, canonicalize against the basis.
    for j in 0..n {
        t[(m, j)] = cost[j];
    }
    for j in n..=nt {
        t[(m, j)] = 0.0;
    }
    for (i, &bj) in basis.iter().enumerate() {
        if bj < n {
            let cb = t[(m, bj)];
            if cb != 0.0 {
                for j in 0..=nt {
                    t[(m, j)] -= cb * t[(i, j)];
                }
            }
        }
    }
    // Forbid artificial columns from re-entering.
    if !run_simplex_restricted(&mut t, &mut basis, nt, n)? {
        return Ok(StandardOutcome::Unbounded);
    }

    let mut x = DVector::zeros(n);
    for (i, &bj) in basis.iter().enumerate() {
        if bj < n {
            x[bj] = t[(i, nt)];
        }
    }
    Ok(StandardOutcome::Optimal(x))
}

fn run_simplex(t: &mut DMatrix<f64>, basis: &mut [usize], nt: usize) -> Result<()> {
    if !run_simplex_restricted(t, basis, nt, nt)? {
        // Phase 1 objective is bounded below by 0, so this cannot happen.
        return Err(Error::Geometry("phase-1 simplex reported unbounded".into()));
    }
    Ok(())
}

/// Bland-rule simplex over columns `0..allowed`. Returns false on unbounded.
fn run_simplex_restricted(
    t: &mut DMatrix<f64>,
    basis: &mut [usize],
    nt: usize,
    allowed: usize,
) -> Result<bool> {
    let m = t.nrows() - 1;
    for _ in 0..MAX_PIVOTS {
        // Bland: lowest-index column with negative reduced cost.
        let mut enter = None;
        for j in 0..allowed {
            if t[(m, j)] < -OPT_TOL {
                enter = Some(j);
                break;
            }
        }
        let Some(col) = enter else { return Ok(true) };
        // Ratio test, ties broken by lowest basis index.
        let mut leave: Option<(usize, f64)> = None;
        for i in 0..m {
            let aij = t[(i, col)];
            if aij > PIVOT_TOL {
                let ratio = t[(i, nt)] / aij;
                match leave {
                    None => leave = Some((i, ratio)),
                    Some((li, lr)) => {
                        if ratio < lr - PIVOT_TOL
                            || (ratio < lr + PIVOT_TOL && basis[i] < basis[li])
                        {
                            leave = Some((i, ratio));
                        }
                    }
                }
            }
        }
        let Some((row, _)) = leave else {
            return Ok(false);
        };
        pivot(t, row, col);
        basis[row] = col;
    }
    Err(Error::Geometry("simplex iteration budget exceeded".into()))
}

fn pivot(t: &mut DMatrix<f64>, row: usize, col: usize) {
    let cols = t.ncols();
    let rows = t.nrows();
    let p = t[(row, col)];
    for j in 0..cols {
        t[(row, j)] /= p;
    }
    for i in 0..rows {
        if i != row {
            let f = t[(i, col)];
            if f != 0.0 {
                for j in 0..cols {
                    t[(i, j)] -= f * t[(row, j)];
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn empty(rows: usize, cols: usize) -> (DMatrix<f64>, DVector<f64>) {
        (DMatrix::zeros(rows, cols), DVector::zeros(rows))
    }

    #[test]
    fn bounded_box_lp() {
        // min -x1 - 2 x2  s.t. x1 ≤ 1, x2 ≤ 2, x1 + x2 ≤ 2.5 → x = (0.5, 2).
        let c = DVector::from_vec(vec![-1.0, -2.0]);
        let a_ub = DMatrix::from_row_slice(3, 2, &[1.0, 0.0, 0.0, 1.0, 1.0, 1.0]);
        let b_ub = DVector::from_vec(vec![1.0, 2.0, 2.5]);
        let (a_eq, b_eq) = empty(0, 2);
        let sol = solve_lp(&c, &a_ub, &b_ub, &a_eq, &b_eq)
            .unwrap()
            .optimal("test")
            .unwrap();
        assert!((sol.value + 4.5).abs() < 1e-9);
        assert!((sol.x[0] - 0.5).abs() < 1e-9);
        assert!((sol.x[1] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn equality_constrained_lp() {
        // min x1 + x2 s.t. x1 + 2 x2 = 1, x ≥ implicit free → mins along line.
        // With free variables the optimum is unbounded; add bounds via ub.
        let c = DVector::from_vec(vec![1.0, 1.0]);
        let a_eq = DMatrix::from_row_slice(1, 2, &[1.0, 2.0]);
        let b_eq = DVector::from_vec(vec![1.0]);
        // |x_i| ≤ 10 as four inequalities.
        let a_ub =
            DMatrix::from_row_slice(4, 2, &[1.0, 0.0, -1.0, 0.0, 0.0, 1.0, 0.0, -1.0]);
        let b_ub = DVector::from_vec(vec![10.0, 10.0, 10.0, 10.0]);
        let sol = solve_lp(&c, &a_ub, &b_ub, &a_eq, &b_eq)
            .unwrap()
            .optimal("test")
            .unwrap();
        // Optimum at x1 = -10, x2 = 5.5, value -4.5.
        assert!((sol.value + 4.5).abs() < 1e-8);
        assert!((sol.x[0] + 10.0).abs() < 1e-8);
    }

    #[test]
    fn detects_infeasible() {
        let c = DVector::from_vec(vec![0.0]);
        let a_ub = DMatrix::from_row_slice(2, 1, &[1.0, -1.0]);
        let b_ub = DVector::from_vec(vec![-1.0, -1.0]); // x ≤ -1 and x ≥ 1
        let (a_eq, b_eq) = empty(0, 1);
        match solve_lp(&c, &a_ub, &b_ub, &a_eq, &b_eq).unwrap() {
            LpOutcome::Infeasible => {}
            other => panic!("expected infeasible, got {other:?}"),
        }
    }

    #[test]
    fn detects_unbounded() {
        let c = DVector::from_vec(vec![1.0]);
        let (a_ub, b_ub) = empty(0, 1);
        let (a_eq, b_eq) = empty(0, 1);
        match solve_lp(&c, &a_ub, &b_ub, &a_eq, &b_eq).unwrap() {
            LpOutcome::Unbounded => {}
            other => panic!("expected unbounded, got {other:?}"),
        }
    }

    #[test]
    fn degenerate_duplicate_rows() {
        // Duplicated constraints should not cycle or fail.
        let c = DVector::from_vec(vec![-1.0, 0.0]);
        let a_ub = DMatrix::from_row_slice(4, 2, &[1.0, 0.0, 1.0, 0.0, 1.0, 1.0, 1.0, 1.0]);
        let b_ub = DVector::from_vec(vec![1.0, 1.0, 2.0, 2.0]);
        let (a_eq, b_eq) = empty(0, 2);
        let sol = solve_lp(&c, &a_ub, &b_ub, &a_eq, &b_eq)
            .unwrap()
            .optimal("test")
            .unwrap();
        assert!((sol.value + 1.0).abs() < 1e-9);
    }
}
