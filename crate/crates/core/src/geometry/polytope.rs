use serde::{Deserialize, Serialize};

use super::interval::IntervalBox;
use super::lp::{lp_solve_rows, LpSolution, LpStatus, FEAS_TOL};
use crate::error::{Error, Result};

/// Absolute slack added on top of a caller-supplied tolerance so that
/// comparisons sitting exactly on the tolerance boundary do not flip on the
/// last bit of rounding.
const TOL_SLACK: f64 = 1e-14;

/// One linear constraint `coeffs . x <= bound`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub coeffs: Vec<f64>,
    pub bound: f64,
}

impl Constraint {
    pub fn new(coeffs: Vec<f64>, bound: f64) -> Self {
        Constraint { coeffs, bound }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.coeffs.iter().zip(x.iter()).map(|(a, v)| a * v).sum()
    }

    /// `Some((dim, positive))` when the row involves exactly one variable.
    fn axis_form(&self) -> Option<(usize, bool)> {
        let mut hit = None;
        for (d, &a) in self.coeffs.iter().enumerate() {
            if a != 0.0 {
                if hit.is_some() {
                    return None;
                }
                hit = Some((d, a > 0.0));
            }
        }
        hit
    }
}

/// Convex polytope `{x | A x <= b}` with its constraint rows partitioned into
/// *base* rows (the problem's own input-set constraints, which may change
/// over time) and *split* rows (added by branching and rewritten only by the
/// splitter).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polytope {
    dim: usize,
    base_rows: Vec<Constraint>,
    split_rows: Vec<Constraint>,
}

/// Result of a polytope containment test.
#[derive(Debug, Clone, Copy)]
pub struct Containment {
    /// `true` iff every reference row is satisfied over the whole candidate.
    pub holds: bool,
    /// Set when the candidate was discovered to be infeasible, in which case
    /// `holds` is vacuously `true` and callers may want to drop the set.
    pub candidate_empty: bool,
}

impl Polytope {
    pub fn new(dim: usize, base_rows: Vec<Constraint>) -> Result<Self> {
        if dim == 0 || base_rows.is_empty() {
            return Err(Error::InvalidInput(
                "polytope needs a positive dimension and at least one row".into(),
            ));
        }
        for row in &base_rows {
            if row.coeffs.len() != dim {
                return Err(Error::DimensionMismatch {
                    context: "polytope row",
                    expected: dim,
                    got: row.coeffs.len(),
                });
            }
        }
        Ok(Polytope {
            dim,
            base_rows,
            split_rows: Vec::new(),
        })
    }

    /// `2 dim` rows `x_d <= hi_d`, `-x_d <= -lo_d`.
    pub fn from_box(b: &IntervalBox) -> Self {
        let dim = b.dim();
        let mut rows = Vec::with_capacity(2 * dim);
        for d in 0..dim {
            let mut up = vec![0.0; dim];
            up[d] = 1.0;
            rows.push(Constraint::new(up, b.hi()[d]));
            let mut down = vec![0.0; dim];
            down[d] = -1.0;
            rows.push(Constraint::new(down, -b.lo()[d]));
        }
        Polytope {
            dim,
            base_rows: rows,
            split_rows: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn base_rows(&self) -> &[Constraint] {
        &self.base_rows
    }

    pub fn split_rows(&self) -> &[Constraint] {
        &self.split_rows
    }

    pub fn rows(&self) -> impl Iterator<Item = &Constraint> {
        self.base_rows.iter().chain(self.split_rows.iter())
    }

    pub fn n_rows(&self) -> usize {
        self.base_rows.len() + self.split_rows.len()
    }

    /// Appends a split row; base rows are untouched.
    pub fn push_split(&mut self, row: Constraint) -> Result<()> {
        if row.coeffs.len() != self.dim {
            return Err(Error::DimensionMismatch {
                context: "split row",
                expected: self.dim,
                got: row.coeffs.len(),
            });
        }
        self.split_rows.push(row);
        Ok(())
    }

    /// Swaps in a new set of base rows, keeping split rows verbatim.
    pub fn replace_base_rows(&mut self, base_rows: Vec<Constraint>) -> Result<()> {
        for row in &base_rows {
            if row.coeffs.len() != self.dim {
                return Err(Error::DimensionMismatch {
                    context: "base row",
                    expected: self.dim,
                    got: row.coeffs.len(),
                });
            }
        }
        self.base_rows = base_rows;
        Ok(())
    }

    /// Same rows with `offset` added to every constant term.
    pub fn relaxed(&self, offset: f64) -> Polytope {
        let bump = |rows: &[Constraint]| {
            rows.iter()
                .map(|r| Constraint::new(r.coeffs.clone(), r.bound + offset))
                .collect()
        };
        Polytope {
            dim: self.dim,
            base_rows: bump(&self.base_rows),
            split_rows: bump(&self.split_rows),
        }
    }

    pub fn contains_point(&self, x: &[f64], tol: f64) -> Result<bool> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                context: "contains_point",
                expected: self.dim,
                got: x.len(),
            });
        }
        Ok(self
            .rows()
            .all(|row| row.eval(x) - row.bound <= tol + TOL_SLACK))
    }

    /// Maximizes `objective . x` over this polytope.
    pub fn lp_solve(&self, objective: &[f64]) -> Result<LpSolution> {
        if objective.len() != self.dim {
            return Err(Error::DimensionMismatch {
                context: "lp objective",
                expected: self.dim,
                got: objective.len(),
            });
        }
        let rows: Vec<(&[f64], f64)> = self
            .rows()
            .map(|r| (r.coeffs.as_slice(), r.bound))
            .collect();
        lp_solve_rows(objective, &rows)
    }

    /// Tightest axis-aligned enclosure, via `2 dim` LP solves.
    pub fn bounding_box(&self) -> Result<IntervalBox> {
        let mut lo = vec![0.0; self.dim];
        let mut hi = vec![0.0; self.dim];
        let mut c = vec![0.0; self.dim];
        for d in 0..self.dim {
            c[d] = 1.0;
            let up = self.lp_solve(&c)?;
            match up.status {
                LpStatus::Optimal => hi[d] = up.objective,
                LpStatus::Infeasible => return Err(Error::EmptySet("bounding_box")),
                LpStatus::Unbounded => return Err(Error::Unbounded("bounding_box")),
            }
            c[d] = -1.0;
            let down = self.lp_solve(&c)?;
            match down.status {
                LpStatus::Optimal => lo[d] = -down.objective,
                LpStatus::Infeasible => return Err(Error::EmptySet("bounding_box")),
                LpStatus::Unbounded => return Err(Error::Unbounded("bounding_box")),
            }
            c[d] = 0.0;
            // Round-off on nearly flat dimensions can invert the pair by a
            // hair; collapse to the midpoint.
            if lo[d] > hi[d] {
                if lo[d] - hi[d] > 1e-7 {
                    return Err(Error::SolverFailure(format!(
                        "inconsistent bounds [{}, {}] in dimension {d}",
                        lo[d], hi[d]
                    )));
                }
                let mid = 0.5 * (lo[d] + hi[d]);
                lo[d] = mid;
                hi[d] = mid;
            }
        }
        IntervalBox::new(lo, hi)
    }

    /// Recovers `[lo, hi]` per dimension when every row involves a single
    /// variable and all dimensions are bounded both ways. Returns `None` for
    /// general polytopes or when the implied box is empty.
    pub fn as_box(&self) -> Option<IntervalBox> {
        let mut lo = vec![f64::NEG_INFINITY; self.dim];
        let mut hi = vec![f64::INFINITY; self.dim];
        for row in self.rows() {
            let (d, positive) = row.axis_form()?;
            let a = row.coeffs[d];
            let v = row.bound / a;
            if positive {
                hi[d] = hi[d].min(v);
            } else {
                lo[d] = lo[d].max(v);
            }
        }
        IntervalBox::new(lo, hi).ok()
    }

    /// Checks `self ⊆ reference` by maximizing every reference row over
    /// `self`.
    ///
    /// A reference row is skipped without an LP when `self` carries a row
    /// with identical coefficients and a bound at most as large — the row can
    /// then never be violated over a feasible `self`. An infeasible `self` is
    /// vacuously contained and flagged via [`Containment::candidate_empty`].
    pub fn subset_of(&self, reference: &Polytope) -> Result<Containment> {
        if self.dim != reference.dim {
            return Err(Error::DimensionMismatch {
                context: "subset_check",
                expected: reference.dim,
                got: self.dim,
            });
        }
        let mut ran_lp = false;
        for row in reference.rows() {
            let dominated = self
                .rows()
                .any(|own| own.bound <= row.bound && own.coeffs == row.coeffs);
            if dominated {
                continue;
            }
            let sol = self.lp_solve(&row.coeffs)?;
            match sol.status {
                LpStatus::Infeasible => {
                    return Ok(Containment {
                        holds: true,
                        candidate_empty: true,
                    })
                }
                LpStatus::Unbounded => {
                    return Ok(Containment {
                        holds: false,
                        candidate_empty: false,
                    })
                }
                LpStatus::Optimal => {
                    ran_lp = true;
                    if sol.objective - row.bound > FEAS_TOL {
                        return Ok(Containment {
                            holds: false,
                            candidate_empty: false,
                        });
                    }
                }
            }
        }
        // Every row was discharged by domination, which proves containment
        // only over nonempty candidates; one LP settles emptiness.
        let candidate_empty = if ran_lp {
            false
        } else {
            let probe = self.lp_solve(&self.base_rows[0].coeffs)?;
            probe.status == LpStatus::Infeasible
        };
        Ok(Containment {
            holds: true,
            candidate_empty,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn unit_box(dim: usize) -> Polytope {
        Polytope::from_box(&IntervalBox::new(vec![0.0; dim], vec![1.0; dim]).unwrap())
    }

    #[test]
    fn contains_point_boundary_tolerance() {
        let b = unit_box(1);
        assert!(b.contains_point(&[0.5], 1e-9).unwrap());
        assert!(b.contains_point(&[1.000000001], 1e-9).unwrap());
        assert!(!b.contains_point(&[2.0], 1e-9).unwrap());
    }

    #[test]
    fn bounding_box_of_simplex() {
        let p = Polytope::new(
            2,
            vec![
                Constraint::new(vec![1.0, 1.0], 1.0),
                Constraint::new(vec![-1.0, 0.0], 0.0),
                Constraint::new(vec![0.0, -1.0], 0.0),
            ],
        )
        .unwrap();
        let b = p.bounding_box().unwrap();
        assert!((b.lo()[0]).abs() < 1e-9 && (b.hi()[0] - 1.0).abs() < 1e-9);
        assert!((b.lo()[1]).abs() < 1e-9 && (b.hi()[1] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn bounding_box_idempotent_on_boxes() {
        let p = Polytope::from_box(&IntervalBox::new(vec![-5.0], vec![3.0]).unwrap());
        let b = p.bounding_box().unwrap();
        assert!((b.lo()[0] + 5.0).abs() < 1e-9);
        assert!((b.hi()[0] - 3.0).abs() < 1e-9);
    }

    #[test]
    fn bounding_box_interval_constraints() {
        let p = Polytope::new(
            1,
            vec![
                Constraint::new(vec![1.0], 2.0),
                Constraint::new(vec![-1.0], -1.0),
            ],
        )
        .unwrap();
        let b = p.bounding_box().unwrap();
        assert!((b.lo()[0] - 1.0).abs() < 1e-9);
        assert!((b.hi()[0] - 2.0).abs() < 1e-9);
    }

    #[test]
    fn bounding_box_empty_set_errors() {
        let p = Polytope::new(
            1,
            vec![
                Constraint::new(vec![1.0], 0.0),
                Constraint::new(vec![-1.0], -1.0),
            ],
        )
        .unwrap();
        assert!(matches!(p.bounding_box(), Err(Error::EmptySet(_))));
    }

    #[test]
    fn subset_check_box_cases() {
        let inner = Polytope::from_box(&IntervalBox::new(vec![-6.0], vec![-1.0]).unwrap());
        let outer = Polytope::from_box(&IntervalBox::new(vec![-6.0], vec![0.0]).unwrap());
        assert!(inner.subset_of(&outer).unwrap().holds);

        let a = Polytope::from_box(&IntervalBox::new(vec![1.0], vec![2.0]).unwrap());
        let b = Polytope::from_box(&IntervalBox::new(vec![0.0], vec![1.5]).unwrap());
        assert!(!a.subset_of(&b).unwrap().holds);

        // Reflexivity, exercising the row-domination fast path.
        assert!(outer.subset_of(&outer).unwrap().holds);
    }

    #[test]
    fn subset_check_empty_candidate_flags() {
        let empty = Polytope::new(
            1,
            vec![
                Constraint::new(vec![1.0], 0.0),
                Constraint::new(vec![-1.0], -1.0),
            ],
        )
        .unwrap();
        let reference = unit_box(1);
        let c = empty.subset_of(&reference).unwrap();
        assert!(c.holds && c.candidate_empty);
    }

    #[test]
    fn as_box_roundtrip_and_rejection() {
        let b = IntervalBox::new(vec![-1.0, 2.0], vec![0.5, 4.0]).unwrap();
        let p = Polytope::from_box(&b);
        assert_eq!(p.as_box().unwrap(), b);

        let coupled = Polytope::new(
            2,
            vec![
                Constraint::new(vec![1.0, 1.0], 1.0),
                Constraint::new(vec![-1.0, 0.0], 0.0),
                Constraint::new(vec![0.0, -1.0], 0.0),
            ],
        )
        .unwrap();
        assert!(coupled.as_box().is_none());
    }

    #[test]
    fn relaxed_adds_offset_to_all_rows() {
        let p = Polytope::from_box(&IntervalBox::new(vec![-5.0], vec![-1.0]).unwrap());
        let r = p.relaxed(1.0);
        let rb = r.as_box().unwrap();
        assert!((rb.lo()[0] + 6.0).abs() < 1e-12);
        assert!((rb.hi()[0]).abs() < 1e-12);
    }
}
