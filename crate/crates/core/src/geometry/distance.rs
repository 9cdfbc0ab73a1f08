//! Upper bounds on the one-sided set distance
//! `Δ(S1, S2) = max_{x' in S2} min_{x in S1} ||x' - x||_inf`.
//!
//! The bound is exact for pairs of axis-aligned boxes. For general polytopes
//! it enumerates the corners of the bounding box of `S2` (a superset, so the
//! maximum can only grow) and solves one epigraph LP per corner, which is
//! sound but exponential in the dimension — hence the corner cap.

use super::interval::IntervalBox;
use super::lp::{lp_solve_rows, LpStatus};
use super::polytope::Polytope;
use crate::error::{Error, Result};

/// Default limit on the corner-enumeration dimension (`2^20` LP solves).
pub const DEFAULT_VERTEX_CAP: usize = 20;

/// Exact `Δ` between two boxes: the largest per-dimension one-sided excess of
/// `s2` beyond `s1`.
pub fn box_distance(s1: &IntervalBox, s2: &IntervalBox) -> Result<f64> {
    if s1.dim() != s2.dim() {
        return Err(Error::DimensionMismatch {
            context: "box_distance",
            expected: s1.dim(),
            got: s2.dim(),
        });
    }
    let mut worst = 0.0f64;
    for d in 0..s1.dim() {
        let above = s2.hi()[d] - s1.hi()[d];
        let below = s1.lo()[d] - s2.lo()[d];
        worst = worst.max(above).max(below);
    }
    Ok(worst)
}

/// `min_{x in s1} ||x - v||_inf` via the epigraph LP
/// `max -t  s.t.  x in s1,  x_d - t <= v_d,  -x_d - t <= -v_d`.
pub fn point_distance(s1: &Polytope, v: &[f64]) -> Result<f64> {
    let n = s1.dim();
    if v.len() != n {
        return Err(Error::DimensionMismatch {
            context: "point_distance",
            expected: n,
            got: v.len(),
        });
    }
    let mut rows: Vec<(Vec<f64>, f64)> = Vec::with_capacity(s1.n_rows() + 2 * n);
    for row in s1.rows() {
        let mut a = row.coeffs.clone();
        a.push(0.0);
        rows.push((a, row.bound));
    }
    for d in 0..n {
        let mut up = vec![0.0; n + 1];
        up[d] = 1.0;
        up[n] = -1.0;
        rows.push((up, v[d]));
        let mut down = vec![0.0; n + 1];
        down[d] = -1.0;
        down[n] = -1.0;
        rows.push((down, -v[d]));
    }
    let mut objective = vec![0.0; n + 1];
    objective[n] = -1.0;
    let row_refs: Vec<(&[f64], f64)> = rows.iter().map(|(a, b)| (a.as_slice(), *b)).collect();
    let sol = lp_solve_rows(&objective, &row_refs)?;
    match sol.status {
        LpStatus::Optimal => Ok((-sol.objective).max(0.0)),
        LpStatus::Infeasible => Err(Error::EmptySet("point_distance target set")),
        LpStatus::Unbounded => Err(Error::Unbounded("point_distance")),
    }
}

/// Sound upper bound on `Δ(s1, s2)` with an explicit corner cap.
pub fn set_distance_upper_capped(s1: &Polytope, s2: &Polytope, cap: usize) -> Result<f64> {
    if s1.dim() != s2.dim() {
        return Err(Error::DimensionMismatch {
            context: "set_distance_upper",
            expected: s1.dim(),
            got: s2.dim(),
        });
    }
    if let (Some(b1), Some(b2)) = (s1.as_box(), s2.as_box()) {
        return box_distance(&b1, &b2);
    }
    // Containment gives distance zero without any corner work; this also
    // resolves an empty s2 (vacuously contained).
    if s2.subset_of(s1)?.holds {
        return Ok(0.0);
    }
    let dim = s1.dim();
    if dim > cap {
        return Err(Error::VertexCapExceeded { dim, cap });
    }
    let bbox2 = s2.bounding_box()?;
    let mut worst = 0.0f64;
    for k in 0..(1u64 << dim) {
        let corner = bbox2.corner(k);
        worst = worst.max(point_distance(s1, &corner)?);
    }
    Ok(worst)
}

/// Sound upper bound on `Δ(s1, s2)` with the default corner cap.
pub fn set_distance_upper(s1: &Polytope, s2: &Polytope) -> Result<f64> {
    set_distance_upper_capped(s1, s2, DEFAULT_VERTEX_CAP)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn boxp(lo: Vec<f64>, hi: Vec<f64>) -> Polytope {
        Polytope::from_box(&IntervalBox::new(lo, hi).unwrap())
    }

    #[test]
    fn one_sided_growth() {
        let s1 = boxp(vec![0.0], vec![1.0]);
        let s2 = boxp(vec![0.0], vec![2.0]);
        assert!((set_distance_upper(&s1, &s2).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn subset_has_zero_distance() {
        let s1 = boxp(vec![-2.0, -2.0], vec![2.0, 2.0]);
        let s2 = boxp(vec![-1.0, 0.0], vec![1.0, 2.0]);
        assert_eq!(set_distance_upper(&s1, &s2).unwrap(), 0.0);
        assert_eq!(set_distance_upper(&s1, &s1).unwrap(), 0.0);
    }

    #[test]
    fn shifted_square() {
        let s1 = boxp(vec![0.0, 0.0], vec![1.0, 1.0]);
        let s2 = boxp(vec![1.0, 0.0], vec![2.0, 1.0]);
        assert!((set_distance_upper(&s1, &s2).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn point_distance_inside_and_outside() {
        let s1 = boxp(vec![0.0, 0.0], vec![1.0, 1.0]);
        assert!(point_distance(&s1, &[0.5, 0.5]).unwrap().abs() < 1e-9);
        assert!((point_distance(&s1, &[2.0, 0.5]).unwrap() - 1.0).abs() < 1e-9);
        assert!((point_distance(&s1, &[2.0, 3.0]).unwrap() - 2.0).abs() < 1e-9);
    }

    #[test]
    fn cap_is_enforced() {
        use crate::geometry::Constraint;
        // Non-box polytopes in 3 dimensions with a cap of 2 must refuse.
        let mut rows = Vec::new();
        for d in 0..3 {
            let mut up = vec![0.0; 3];
            up[d] = 1.0;
            rows.push(Constraint::new(up.clone(), 1.0));
            let mut down = vec![0.0; 3];
            down[d] = -1.0;
            rows.push(Constraint::new(down, 1.0));
        }
        rows.push(Constraint::new(vec![1.0, 1.0, 1.0], 2.5));
        let p = Polytope::new(3, rows).unwrap();
        let shifted = p.relaxed(0.5);
        match set_distance_upper_capped(&p, &shifted, 2) {
            Err(Error::VertexCapExceeded { dim: 3, cap: 2 }) => {}
            other => panic!("expected cap error, got {other:?}"),
        }
    }
}
