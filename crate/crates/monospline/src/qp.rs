//! Dense dual active-set solver for strictly convex quadratic programs
//!
//! ```text
//! minimize   1/2 z' H z + g' z    subject to   G z >= h
//! ```
//!
//! using the Goldfarb-Idnani method: start at the unconstrained minimum,
//! repeatedly add the most violated constraint, and take primal-dual steps
//! that keep the working set optimal, dropping constraints whose multipliers
//! would cross zero. The factorization `J = L^{-T} Q` (with `H = L L'` and
//! `Q R` the decomposition of `L^{-1} N` for the active normals `N`) is
//! maintained incrementally with Givens rotations, so each working-set
//! change costs O(n^2).
//!
//! Problems here are small and dense (a few hundred variables), which is
//! exactly the regime this method is good at.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum QpError {
    #[error("quadratic term is not positive definite")]
    NotPositiveDefinite,
    #[error("constraints admit no feasible point (detected adding constraint {0})")]
    Infeasible(usize),
    #[error("active-set iteration limit {0} reached")]
    IterationLimit(usize),
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub z: DVector<f64>,
    /// Indices of constraints active at the solution.
    pub active: Vec<usize>,
    /// Multipliers aligned with `active`; all nonnegative.
    #[cfg_attr(not(test), allow(dead_code))]
    pub duals: Vec<f64>,
    pub iterations: usize,
    /// Number of constraint drops along the way (working-set corrections).
    #[cfg_attr(not(test), allow(dead_code))]
    pub drops: usize,
}

/// Full solve with a general positive definite `H`.
pub fn solve_qp(
    h: &DMatrix<f64>,
    g: &DVector<f64>,
    gmat: &DMatrix<f64>,
    rhs: &DVector<f64>,
    tol: f64,
) -> Result<QpSolution, QpError> {
    let n = h.nrows();
    let chol = nalgebra::Cholesky::new(h.clone()).ok_or(QpError::NotPositiveDefinite)?;
    let z = -chol.solve(g);
    let j = chol
        .l()
        .transpose()
        .solve_upper_triangular(&DMatrix::identity(n, n))
        .ok_or(QpError::NotPositiveDefinite)?;
    run(z, j, gmat, rhs, tol)
}

/// Euclidean projection of `y` onto `{ z : G z >= h }` (`H = I`, `g = -y`),
/// skipping the factorization.
pub fn solve_projection(
    y: &DVector<f64>,
    gmat: &DMatrix<f64>,
    rhs: &DVector<f64>,
    tol: f64,
) -> Result<QpSolution, QpError> {
    let n = y.len();
    run(y.clone(), DMatrix::identity(n, n), gmat, rhs, tol)
}

/// Projection of `y` onto the subspace `{ z : rows z = 0 }`, returning the
/// point and the multipliers `mu` with `z = y + rows' mu`. `None` if the
/// rows are (numerically) dependent. Used to warm-start projections from a
/// previously optimal active set: if all `mu >= 0` and the remaining
/// constraints hold, the subspace projection is already the cone projection.
#[cfg_attr(not(test), allow(dead_code))]
pub fn equality_projection(
    y: &DVector<f64>,
    rows: &DMatrix<f64>,
) -> Option<(DVector<f64>, DVector<f64>)> {
    let gram = rows * rows.transpose();
    let chol = nalgebra::Cholesky::new(gram)?;
    let mu = -chol.solve(&(rows * y));
    let z = y + rows.transpose() * &mu;
    Some((z, mu))
}

fn run(
    mut z: DVector<f64>,
    mut j: DMatrix<f64>,
    gmat: &DMatrix<f64>,
    rhs: &DVector<f64>,
    tol: f64,
) -> Result<QpSolution, QpError> {
    let n = z.len();
    let m = gmat.nrows();
    let mut r = DMatrix::<f64>::zeros(n, n);
    let mut active: Vec<usize> = Vec::new();
    let mut duals: Vec<f64> = Vec::new();
    let mut iterations = 0usize;
    let mut drops = 0usize;
    let max_iter = 50 * (n + m) + 100;

    'outer: loop {
        iterations += 1;
        if iterations > max_iter {
            return Err(QpError::IterationLimit(max_iter));
        }

        let slacks = gmat * &z - rhs;
        let mut pick: Option<(usize, f64)> = None;
        for i in 0..m {
            if active.contains(&i) {
                continue;
            }
            let viol = slacks[i];
            if viol < -tol * (1.0 + rhs[i].abs()) && pick.is_none_or(|(_, best)| viol < best) {
                pick = Some((i, viol));
            }
        }
        let Some((inew, mut s_plus)) = pick else {
            return Ok(QpSolution {
                z,
                active,
                duals,
                iterations,
                drops,
            });
        };
        let nplus = gmat.row(inew).transpose();
        let mut u_plus = 0.0f64;

        loop {
            iterations += 1;
            if iterations > max_iter {
                return Err(QpError::IterationLimit(max_iter));
            }
            let q = active.len();
            let d = j.transpose() * &nplus;

            // Dual step direction: r = R^{-1} d1 by back substitution.
            let mut rvec = vec![0.0f64; q];
            for k in (0..q).rev() {
                let mut acc = d[k];
                for col in k + 1..q {
                    acc -= r[(k, col)] * rvec[col];
                }
                rvec[k] = acc / r[(k, k)];
            }

            // Primal step direction: w = J2 d2; note n+' w = |d2|^2 >= 0.
            let mut w = DVector::<f64>::zeros(n);
            for row in 0..n {
                let mut acc = 0.0;
                for col in q..n {
                    acc += j[(row, col)] * d[col];
                }
                w[row] = acc;
            }
            let denom = nplus.dot(&w);

            // Largest dual-feasible step before an active multiplier hits 0.
            let mut t1 = f64::INFINITY;
            let mut blocking = None;
            for (pos, (&ui, &ri)) in duals.iter().zip(rvec.iter()).enumerate() {
                if ri > 1e-13 {
                    let t = ui / ri;
                    if t < t1 {
                        t1 = t;
                        blocking = Some(pos);
                    }
                }
            }

            if denom <= 1e-20 * d.norm_squared() {
                // n+ is dependent on the active normals: no primal progress.
                let Some(pos) = blocking else {
                    return Err(QpError::Infeasible(inew));
                };
                for (ui, ri) in duals.iter_mut().zip(rvec.iter()) {
                    *ui -= t1 * ri;
                }
                u_plus += t1;
                drop_constraint(&mut r, &mut j, &mut active, &mut duals, pos);
                drops += 1;
                continue;
            }

            let t2 = -s_plus / denom;
            let t = t1.min(t2);
            z.axpy(t, &w, 1.0);
            for (ui, ri) in duals.iter_mut().zip(rvec.iter()) {
                *ui -= t * ri;
            }
            u_plus += t;

            if t2 <= t1 {
                add_constraint(&mut r, &mut j, &d, q);
                active.push(inew);
                duals.push(u_plus);
                continue 'outer;
            }
            let pos = blocking.expect("t1 finite implies a blocking constraint");
            drop_constraint(&mut r, &mut j, &mut active, &mut duals, pos);
            drops += 1;
            s_plus = (gmat.row(inew) * &z)[(0, 0)] - rhs[inew];
        }
    }
}

/// Rotates `d[q+1..]` into `d[q]` and installs `d[0..=q]` as column `q` of
/// `R`, postmultiplying `J` by the same rotations.
fn add_constraint(r: &mut DMatrix<f64>, j: &mut DMatrix<f64>, d: &DVector<f64>, q: usize) {
    let n = d.len();
    let mut d = d.clone();
    for k in (q + 1..n).rev() {
        let (c, s, rad) = givens(d[k - 1], d[k]);
        d[k - 1] = rad;
        d[k] = 0.0;
        if s == 0.0 {
            continue;
        }
        for row in 0..n {
            let a = j[(row, k - 1)];
            let b = j[(row, k)];
            j[(row, k - 1)] = c * a + s * b;
            j[(row, k)] = -s * a + c * b;
        }
    }
    for k in 0..=q.min(n - 1) {
        r[(k, q)] = d[k];
    }
}

/// Removes the active constraint at working-set position `pos`, shifting the
/// later columns of `R` left and re-triangularizing.
fn drop_constraint(
    r: &mut DMatrix<f64>,
    j: &mut DMatrix<f64>,
    active: &mut Vec<usize>,
    duals: &mut Vec<f64>,
    pos: usize,
) {
    let n = j.nrows();
    let q = active.len();
    active.remove(pos);
    duals.remove(pos);
    for col in pos..q - 1 {
        for row in 0..=(col + 1).min(n - 1) {
            r[(row, col)] = r[(row, col + 1)];
        }
    }
    for k in pos..q - 1 {
        let (c, s, rad) = givens(r[(k, k)], r[(k + 1, k)]);
        r[(k, k)] = rad;
        r[(k + 1, k)] = 0.0;
        if s == 0.0 {
            continue;
        }
        for col in k + 1..q - 1 {
            let a = r[(k, col)];
            let b = r[(k + 1, col)];
            r[(k, col)] = c * a + s * b;
            r[(k + 1, col)] = -s * a + c * b;
        }
        for row in 0..n {
            let a = j[(row, k)];
            let b = j[(row, k + 1)];
            j[(row, k)] = c * a + s * b;
            j[(row, k + 1)] = -s * a + c * b;
        }
    }
    for row in 0..q.min(n) {
        r[(row, q - 1)] = 0.0;
    }
}

/// `(c, s, r)` with `c*a + s*b = r`, `-s*a + c*b = 0`.
fn givens(a: f64, b: f64) -> (f64, f64, f64) {
    if b == 0.0 {
        return (1.0, 0.0, a);
    }
    let rad = a.hypot(b);
    (a / rad, b / rad, rad)
}
