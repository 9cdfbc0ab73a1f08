//! Dense two-phase primal simplex over inequality constraints.
//!
//! Solves `maximize c·x subject to A x <= b` with free variables via the
//! split `x = u - w`, `u, w >= 0`. Bland's rule keeps pivoting deterministic
//! and cycle-free; problems here are tiny (tens of rows), so a dense tableau
//! beats anything sparse.

use crate::error::{Error, Result};

/// Feasibility tolerance: a point is accepted if every row is violated by at
/// most this much.
pub const FEAS_TOL: f64 = 1e-9;

/// Pivot elements smaller than this are treated as zero.
const PIVOT_TOL: f64 = 1e-9;

/// Phase-1 objective above this value means the constraints are infeasible.
const INFEAS_TOL: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Outcome of an LP solve. `objective` and `point` are meaningful only when
/// `status == Optimal`.
#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub objective: f64,
    pub point: Vec<f64>,
}

impl LpSolution {
    fn of_status(status: LpStatus, dim: usize) -> Self {
        LpSolution {
            status,
            objective: f64::NAN,
            point: vec![0.0; dim],
        }
    }
}

/// Row-major dense tableau with the objective row kept separately.
struct Tableau {
    ncols: usize, // structural + slack + artificial columns (rhs excluded)
    rows: Vec<Vec<f64>>,
    obj: Vec<f64>, // length ncols + 1; last entry is minus the objective value
    basis: Vec<usize>,
    blocked: usize, // columns >= blocked may never enter (artificials in phase 2)
}

impl Tableau {
    fn rhs(&self, r: usize) -> f64 {
        self.rows[r][self.ncols]
    }

    fn pivot(&mut self, row: usize, col: usize) {
        let piv = self.rows[row][col];
        let inv = 1.0 / piv;
        for v in self.rows[row].iter_mut() {
            *v *= inv;
        }
        // Exact unit column keeps later reads clean.
        self.rows[row][col] = 1.0;
        let piv_row = self.rows[row].clone();
        for (r, current) in self.rows.iter_mut().enumerate() {
            if r == row {
                continue;
            }
            let factor = current[col];
            if factor != 0.0 {
                for (v, p) in current.iter_mut().zip(piv_row.iter()) {
                    *v -= factor * p;
                }
                current[col] = 0.0;
            }
        }
        let factor = self.obj[col];
        if factor != 0.0 {
            for (v, p) in self.obj.iter_mut().zip(piv_row.iter()) {
                *v -= factor * p;
            }
            self.obj[col] = 0.0;
        }
        self.basis[row] = col;
    }

    /// Runs simplex iterations to optimality (Bland's rule). Returns
    /// `Ok(true)` on optimal, `Ok(false)` on unbounded.
    fn optimize(&mut self) -> Result<bool> {
        // Bland's rule terminates, but a hard cap guards against numerical
        // stalls where reduced costs hover around the tolerance.
        let max_iters = 200 * (self.ncols + self.rows.len() + 16);
        for _ in 0..max_iters {
            let entering = (0..self.blocked).find(|&j| self.obj[j] < -FEAS_TOL);
            let Some(col) = entering else {
                return Ok(true);
            };
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.rows.len() {
                let a = self.rows[r][col];
                if a > PIVOT_TOL {
                    let ratio = self.rhs(r) / a;
                    match leave {
                        None => leave = Some((r, ratio)),
                        Some((br, best)) => {
                            // Tie-break on the smallest basic variable index.
                            if ratio < best - FEAS_TOL
                                || (ratio < best + FEAS_TOL && self.basis[r] < self.basis[br])
                            {
                                leave = Some((r, ratio));
                            }
                        }
                    }
                }
            }
            match leave {
                Some((row, _)) => self.pivot(row, col),
                None => return Ok(false),
            }
        }
        Err(Error::SolverFailure(
            "simplex iteration limit exceeded".into(),
        ))
    }
}

/// Maximizes `objective . x` over `{x | rows[i].0 . x <= rows[i].1}`.
///
/// `rows` is a list of `(coefficients, bound)` pairs sharing the dimension of
/// `objective`. Variables are unrestricted in sign.
pub fn lp_solve_rows(objective: &[f64], rows: &[(&[f64], f64)]) -> Result<LpSolution> {
    let n = objective.len();
    if n == 0 || rows.is_empty() {
        return Err(Error::InvalidInput(
            "lp_solve requires at least one variable and one constraint".into(),
        ));
    }
    for (a, _) in rows {
        if a.len() != n {
            return Err(Error::DimensionMismatch {
                context: "lp_solve constraint row",
                expected: n,
                got: a.len(),
            });
        }
    }
    let m = rows.len();

    // Columns: u (n), w (n), slacks (m), then one artificial per negated row.
    let negated: Vec<bool> = rows.iter().map(|&(_, b)| b < 0.0).collect();
    let n_art = negated.iter().filter(|&&x| x).count();
    let ncols = 2 * n + m + n_art;

    let mut t = Tableau {
        ncols,
        rows: Vec::with_capacity(m),
        obj: vec![0.0; ncols + 1],
        basis: vec![0; m],
        blocked: ncols,
    };

    let mut art_idx = 2 * n + m;
    for (i, &(a, b)) in rows.iter().enumerate() {
        let sign = if negated[i] { -1.0 } else { 1.0 };
        let mut row = vec![0.0; ncols + 1];
        for j in 0..n {
            row[j] = sign * a[j];
            row[n + j] = -sign * a[j];
        }
        row[2 * n + i] = sign;
        row[ncols] = sign * b;
        if negated[i] {
            row[art_idx] = 1.0;
            t.basis[i] = art_idx;
            art_idx += 1;
        } else {
            t.basis[i] = 2 * n + i;
        }
        t.rows.push(row);
    }

    // Phase 1: minimize the sum of artificials.
    if n_art > 0 {
        for r in 0..m {
            if t.basis[r] >= 2 * n + m {
                for j in 0..=ncols {
                    t.obj[j] -= t.rows[r][j];
                }
            }
        }
        for j in 2 * n + m..ncols {
            t.obj[j] += 1.0;
        }
        if !t.optimize()? {
            return Err(Error::SolverFailure(
                "phase-1 objective unbounded below".into(),
            ));
        }
        let phase1 = -t.obj[ncols];
        if phase1 > INFEAS_TOL {
            return Ok(LpSolution::of_status(LpStatus::Infeasible, n));
        }
        // Drive any artificial still basic (at level ~0) out of the basis.
        for r in 0..m {
            if t.basis[r] >= 2 * n + m {
                if let Some(col) = (0..2 * n + m).find(|&j| t.rows[r][j].abs() > PIVOT_TOL) {
                    t.pivot(r, col);
                }
                // If the row is zero on all structural columns it is
                // redundant; the artificial stays basic at zero and its
                // column is blocked below.
            }
        }
    }

    // Phase 2: minimize -c·u + c·w with artificials blocked.
    t.blocked = 2 * n + m;
    let mut cost = vec![0.0; ncols];
    for j in 0..n {
        cost[j] = -objective[j];
        cost[n + j] = objective[j];
    }
    for v in t.obj.iter_mut() {
        *v = 0.0;
    }
    t.obj[..ncols].copy_from_slice(&cost);
    for r in 0..m {
        let cb = if t.basis[r] < ncols {
            cost.get(t.basis[r]).copied().unwrap_or(0.0)
        } else {
            0.0
        };
        if cb != 0.0 {
            for j in 0..=ncols {
                t.obj[j] -= cb * t.rows[r][j];
            }
        }
    }

    if !t.optimize()? {
        return Ok(LpSolution::of_status(LpStatus::Unbounded, n));
    }

    let mut values = vec![0.0; ncols];
    for r in 0..m {
        if t.basis[r] < ncols {
            values[t.basis[r]] = t.rhs(r);
        }
    }
    let point: Vec<f64> = (0..n).map(|j| values[j] - values[n + j]).collect();
    let objective_value: f64 = objective.iter().zip(point.iter()).map(|(c, x)| c * x).sum();
    Ok(LpSolution {
        status: LpStatus::Optimal,
        objective: objective_value,
        point,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_dimensional_bound() {
        let rows: Vec<(&[f64], f64)> = vec![(&[1.0], 3.0), (&[-1.0], 0.0)];
        let sol = lp_solve_rows(&[1.0], &rows).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective - 3.0).abs() < 1e-9);
        assert!((sol.point[0] - 3.0).abs() < 1e-9);
    }

    #[test]
    fn box_corner() {
        let rows: Vec<(&[f64], f64)> = vec![
            (&[1.0, 0.0], 1.0),
            (&[0.0, 1.0], 1.0),
            (&[-1.0, 0.0], 0.0),
            (&[0.0, -1.0], 0.0),
        ];
        let sol = lp_solve_rows(&[1.0, 1.0], &rows).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective - 2.0).abs() < 1e-9);
        assert!((sol.point[0] - 1.0).abs() < 1e-9);
        assert!((sol.point[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn contradictory_bounds_infeasible() {
        let rows: Vec<(&[f64], f64)> = vec![(&[1.0], 0.0), (&[-1.0], -1.0)];
        let sol = lp_solve_rows(&[1.0], &rows).unwrap();
        assert_eq!(sol.status, LpStatus::Infeasible);
    }

    #[test]
    fn unbounded_direction() {
        let rows: Vec<(&[f64], f64)> = vec![(&[-1.0], 0.0)];
        let sol = lp_solve_rows(&[1.0], &rows).unwrap();
        assert_eq!(sol.status, LpStatus::Unbounded);
    }

    #[test]
    fn negative_rhs_needs_phase_one() {
        // {x >= 1, x <= 2}: maximize -x should land on x = 1.
        let rows: Vec<(&[f64], f64)> = vec![(&[-1.0], -1.0), (&[1.0], 2.0)];
        let sol = lp_solve_rows(&[-1.0], &rows).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.point[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let rows: Vec<(&[f64], f64)> = vec![(&[1.0, 2.0], 3.0)];
        assert!(lp_solve_rows(&[1.0], &rows).is_err());
    }

    #[test]
    fn simplex_constraint_corner() {
        // maximize x + 2y over the simplex {x + y <= 1, x, y >= 0}.
        let rows: Vec<(&[f64], f64)> = vec![
            (&[1.0, 1.0], 1.0),
            (&[-1.0, 0.0], 0.0),
            (&[0.0, -1.0], 0.0),
        ];
        let sol = lp_solve_rows(&[1.0, 2.0], &rows).unwrap();
        assert_eq!(sol.status, LpStatus::Optimal);
        assert!((sol.objective - 2.0).abs() < 1e-9);
        assert!((sol.point[1] - 1.0).abs() < 1e-9);
    }
}
