use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned box `[lo, hi]` with `lo[i] <= hi[i]` in every dimension.
///
/// Boxes are always non-empty; emptiness is signalled by callers with
/// `Option` / dedicated errors rather than by inverted bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalBox {
    lo: Vec<f64>,
    hi: Vec<f64>,
}

impl IntervalBox {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.is_empty() || lo.len() != hi.len() {
            return Err(Error::DimensionMismatch {
                context: "IntervalBox bounds",
                expected: lo.len().max(1),
                got: hi.len(),
            });
        }
        for (i, (&l, &h)) in lo.iter().zip(hi.iter()).enumerate() {
            if !(l.is_finite() && h.is_finite()) || l > h {
                return Err(Error::InvalidInput(format!(
                    "invalid interval [{l}, {h}] in dimension {i}"
                )));
            }
        }
        Ok(IntervalBox { lo, hi })
    }

    /// Box `[c - r, c + r]` in every dimension.
    pub fn centered(center: &[f64], radius: f64) -> Result<Self> {
        let lo = center.iter().map(|c| c - radius).collect();
        let hi = center.iter().map(|c| c + radius).collect();
        IntervalBox::new(lo, hi)
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn width(&self, d: usize) -> f64 {
        self.hi[d] - self.lo[d]
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo
            .iter()
            .zip(self.hi.iter())
            .map(|(l, h)| 0.5 * (l + h))
            .collect()
    }

    /// Index and width of the widest dimension; ties go to the lowest index.
    pub fn widest_dim(&self) -> (usize, f64) {
        let mut best = (0, self.width(0));
        for d in 1..self.dim() {
            let w = self.width(d);
            if w > best.1 {
                best = (d, w);
            }
        }
        best
    }

    pub fn contains(&self, x: &[f64], tol: f64) -> bool {
        x.len() == self.dim()
            && x.iter()
                .zip(self.lo.iter().zip(self.hi.iter()))
                .all(|(&v, (&l, &h))| v >= l - tol && v <= h + tol)
    }

    /// True if `self` lies inside `other` in every dimension (within `tol`).
    pub fn subset_of(&self, other: &IntervalBox, tol: f64) -> bool {
        self.dim() == other.dim()
            && (0..self.dim())
                .all(|d| self.lo[d] >= other.lo[d] - tol && self.hi[d] <= other.hi[d] + tol)
    }

    /// The `k`-th of the `2^dim` corner points, bit `d` of `k` selecting
    /// `hi[d]` over `lo[d]`.
    pub fn corner(&self, k: u64) -> Vec<f64> {
        (0..self.dim())
            .map(|d| {
                if (k >> d) & 1 == 1 {
                    self.hi[d]
                } else {
                    self.lo[d]
                }
            })
            .collect()
    }

    /// Uniform sample using one `f64` draw per dimension.
    pub fn sample<R: rand::Rng>(&self, rng: &mut R) -> Vec<f64> {
        self.lo
            .iter()
            .zip(self.hi.iter())
            .map(|(&l, &h)| {
                if h > l {
                    rng.gen_range(l..=h)
                } else {
                    l
                }
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_inverted_bounds() {
        assert!(IntervalBox::new(vec![1.0], vec![0.0]).is_err());
        assert!(IntervalBox::new(vec![0.0], vec![f64::NAN]).is_err());
    }

    #[test]
    fn widest_dim_tie_breaks_low() {
        let b = IntervalBox::new(vec![0.0, 0.0], vec![1.0, 1.0]).unwrap();
        assert_eq!(b.widest_dim().0, 0);
        let b = IntervalBox::new(vec![0.0, 0.0], vec![1.0, 4.0]).unwrap();
        assert_eq!(b.widest_dim().0, 1);
    }

    #[test]
    fn corners_cover_all_patterns() {
        let b = IntervalBox::new(vec![0.0, -1.0], vec![1.0, 2.0]).unwrap();
        assert_eq!(b.corner(0), vec![0.0, -1.0]);
        assert_eq!(b.corner(3), vec![1.0, 2.0]);
        assert_eq!(b.corner(2), vec![0.0, 2.0]);
    }
}
