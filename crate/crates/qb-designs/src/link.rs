//! Linkage algebra between baseline and centered parameterizations.
//!
//! Everything in this module is exact integer arithmetic: the association
//! matrix A_m and the full-factorial design matrices X_b(m), X_c(m) all have
//! integer entries, and the linkage identity X_b(m) * A_m = X_c(m) is
//! checked bit-exactly.
//!
//! Effects are indexed in Yates' order: effect index e (0 <= e < 2^m) is the
//! product of the factors whose bits are set in e, so the order of an effect
//! is the popcount of its index.

use crate::{Error, Result};
use nalgebra::DMatrix;

/// Dense square integer matrix indexed by Yates-ordered effects.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntMatrix {
    dim: usize,
    data: Vec<i64>, // row-major
}

impl IntMatrix {
    fn zeros(dim: usize) -> IntMatrix {
        IntMatrix { dim, data: vec![0; dim * dim] }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, r: usize, c: usize) -> i64 {
        self.data[r * self.dim + c]
    }

    fn set(&mut self, r: usize, c: usize, v: i64) {
        self.data[r * self.dim + c] = v;
    }

    pub fn row(&self, r: usize) -> &[i64] {
        &self.data[r * self.dim..(r + 1) * self.dim]
    }

    pub fn mul(&self, other: &IntMatrix) -> IntMatrix {
        assert_eq!(self.dim, other.dim);
        let d = self.dim;
        let mut out = IntMatrix::zeros(d);
        for i in 0..d {
            for k in 0..d {
                let a = self.get(i, k);
                if a == 0 {
                    continue;
                }
                for j in 0..d {
                    out.data[i * d + j] += a * other.get(k, j);
                }
            }
        }
        out
    }

    pub fn to_f64(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim, self.dim, |r, c| self.get(r, c) as f64)
    }
}

/// The association matrix A_m with theta_hat = A_m beta_hat, effects in
/// Yates' order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AssociationMatrix {
    m: usize,
    entries: IntMatrix,
}

impl AssociationMatrix {
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn matrix(&self) -> &IntMatrix {
        &self.entries
    }
}

const MAX_M: usize = 10;

/// A_0 = [1]; A_m = [[A_{m-1}, -A_{m-1}], [0, 2 A_{m-1}]].
pub fn association_matrix(m: usize) -> Result<AssociationMatrix> {
    if m > MAX_M {
        return Err(Error::FactorCountOutOfRange { m, min: 0, max: MAX_M });
    }
    let mut a = IntMatrix { dim: 1, data: vec![1] };
    for _ in 0..m {
        let d = a.dim;
        let mut next = IntMatrix::zeros(2 * d);
        for r in 0..d {
            for c in 0..d {
                let v = a.get(r, c);
                next.set(r, c, v);
                next.set(r, c + d, -v);
                next.set(r + d, c + d, 2 * v);
            }
        }
        a = next;
    }
    Ok(AssociationMatrix { m, entries: a })
}

/// Full-factorial design matrices (X_b(m), X_c(m)) with rows in reverse
/// Yates order and columns in Yates effect order.
pub fn full_design_matrices(m: usize) -> Result<(IntMatrix, IntMatrix)> {
    if m > MAX_M {
        return Err(Error::FactorCountOutOfRange { m, min: 0, max: MAX_M });
    }
    let mut xb = IntMatrix { dim: 1, data: vec![1] };
    let mut xc = IntMatrix { dim: 1, data: vec![1] };
    for _ in 0..m {
        let d = xb.dim;
        let mut nb = IntMatrix::zeros(2 * d);
        let mut nc = IntMatrix::zeros(2 * d);
        for r in 0..d {
            for c in 0..d {
                let b = xb.get(r, c);
                let cc = xc.get(r, c);
                nb.set(r, c, b);
                nb.set(r, c + d, b);
                nb.set(r + d, c, b);
                nc.set(r, c, cc);
                nc.set(r, c + d, cc);
                nc.set(r + d, c, cc);
                nc.set(r + d, c + d, -cc);
            }
        }
        xb = nb;
        xc = nc;
    }
    Ok((xb, xc))
}

/// True iff X_b(m) * A_m = X_c(m) in exact integer arithmetic.
pub fn verify_link(m: usize) -> Result<bool> {
    if m == 0 || m > 8 {
        return Err(Error::FactorCountOutOfRange { m, min: 1, max: 8 });
    }
    let (xb, xc) = full_design_matrices(m)?;
    let a = association_matrix(m)?;
    Ok(xb.mul(a.matrix()) == xc)
}

/// Indices of effects of order <= max_order, in Yates order.
pub fn effects_up_to_order(m: usize, max_order: usize) -> Vec<usize> {
    (0..1usize << m).filter(|e| (e.count_ones() as usize) <= max_order).collect()
}

/// Submatrix of A_m restricted to effects of order <= max_order.
pub fn truncate_association(a: &AssociationMatrix, max_order: usize) -> IntMatrix {
    let keep = effects_up_to_order(a.m(), max_order);
    let mut out = IntMatrix::zeros(keep.len());
    for (i, &r) in keep.iter().enumerate() {
        for (j, &c) in keep.iter().enumerate() {
            out.set(i, j, a.matrix().get(r, c));
        }
    }
    out
}

/// True iff the least-squares linkage computed from the r-fold replicated
/// full factorial equals A_m (to floating-point accuracy).
pub fn replication_invariance_check(m: usize, r: usize) -> Result<bool> {
    if m == 0 || m > 5 {
        return Err(Error::FactorCountOutOfRange { m, min: 1, max: 5 });
    }
    if r == 0 || r > 5 {
        return Err(Error::Invalid(format!("replicate count {r} out of range 1..=5")));
    }
    let (xb, xc) = full_design_matrices(m)?;
    let dim = xb.dim();
    let stack = |x: &IntMatrix| {
        let mut s = DMatrix::zeros(r * dim, dim);
        for rep in 0..r {
            for i in 0..dim {
                for j in 0..dim {
                    s[(rep * dim + i, j)] = x.get(i, j) as f64;
                }
            }
        }
        s
    };
    let xb_r = stack(&xb);
    let xc_r = stack(&xc);
    // Linkage from the normal equations: A' = (Xb'Xb)^{-1} Xb'Xc.
    let xtx = xb_r.transpose() * &xb_r;
    let xtc = xb_r.transpose() * &xc_r;
    let a_prime = xtx
        .lu()
        .solve(&xtc)
        .ok_or_else(|| Error::Invalid("replicated normal equations are singular".into()))?;
    let a = association_matrix(m)?;
    let mut max_diff: f64 = 0.0;
    for i in 0..dim {
        for j in 0..dim {
            max_diff = max_diff.max((a_prime[(i, j)] - a.matrix().get(i, j) as f64).abs());
        }
    }
    Ok(max_diff < 1e-8)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn association_small_cases() {
        assert_eq!(association_matrix(0).unwrap().matrix().data, vec![1]);
        assert_eq!(association_matrix(1).unwrap().matrix().data, vec![1, -1, 0, 2]);
        let a2 = association_matrix(2).unwrap();
        let expected = [
            [1, -1, -1, 1],
            [0, 2, 0, -2],
            [0, 0, 2, -2],
            [0, 0, 0, 4],
        ];
        for r in 0..4 {
            for c in 0..4 {
                assert_eq!(a2.matrix().get(r, c), expected[r][c]);
            }
        }
    }

    #[test]
    fn association_diagonal_and_block_structure() {
        for m in 1..=5 {
            let a = association_matrix(m).unwrap();
            let prev = association_matrix(m - 1).unwrap();
            let half = prev.matrix().dim();
            for e in 0..a.matrix().dim() {
                assert_eq!(a.matrix().get(e, e), 1i64 << e.count_ones());
            }
            for r in 0..half {
                for c in 0..half {
                    assert_eq!(a.matrix().get(r, c), prev.matrix().get(r, c));
                }
            }
        }
    }

    #[test]
    fn association_upper_triangular_and_determinant() {
        for m in 1..=5u32 {
            let a = association_matrix(m as usize).unwrap();
            let dim = a.matrix().dim();
            for r in 0..dim {
                for c in 0..r {
                    assert_eq!(a.matrix().get(r, c), 0);
                }
            }
            // det = prod over effects of 2^order = 2^(m * 2^(m-1))
            let log2_det: u32 = (0..dim).map(|e| e.count_ones()).sum();
            assert_eq!(log2_det, m * (1 << (m - 1)));
        }
    }

    #[test]
    fn xb2_matches_display() {
        let (xb, _) = full_design_matrices(2).unwrap();
        let expected = [
            [1, 1, 1, 1],
            [1, 0, 1, 0],
            [1, 1, 0, 0],
            [1, 0, 0, 0],
        ];
        for r in 0..4 {
            for c in 0..4 {
                assert_eq!(xb.get(r, c), expected[r][c]);
            }
        }
    }

    #[test]
    fn m0_design_matrices() {
        let (xb, xc) = full_design_matrices(0).unwrap();
        assert_eq!(xb.data, vec![1]);
        assert_eq!(xc.data, vec![1]);
    }

    #[test]
    fn xc_orthogonality() {
        for m in 1..=6 {
            let (_, xc) = full_design_matrices(m).unwrap();
            let dim = xc.dim();
            for i in 0..dim {
                for j in 0..dim {
                    let dot: i64 = (0..dim).map(|h| xc.get(h, i) * xc.get(h, j)).sum();
                    assert_eq!(dot, if i == j { dim as i64 } else { 0 });
                }
            }
        }
    }

    #[test]
    fn xc3_first_column_ones() {
        let (_, xc) = full_design_matrices(3).unwrap();
        for r in 0..8 {
            assert_eq!(xc.get(r, 0), 1);
        }
    }

    #[test]
    fn verify_link_all_m() {
        for m in 1..=8 {
            assert!(verify_link(m).unwrap(), "link identity failed at m={m}");
        }
    }

    #[test]
    fn truncate_m2_full_is_identity_op() {
        let a = association_matrix(2).unwrap();
        let t = truncate_association(&a, 2);
        assert_eq!(&t, a.matrix());
    }

    #[test]
    fn truncate_m2_first_order() {
        let a = association_matrix(2).unwrap();
        let t = truncate_association(&a, 1);
        assert_eq!(t.dim(), 3);
        let expected = [[1, -1, -1], [0, 2, 0], [0, 0, 2]];
        for r in 0..3 {
            for c in 0..3 {
                assert_eq!(t.get(r, c), expected[r][c]);
            }
        }
    }

    #[test]
    fn truncate_m3_second_order_block_triangular() {
        let a = association_matrix(3).unwrap();
        let t = truncate_association(&a, 2);
        assert_eq!(t.dim(), 7);
        // Corollary 2: in the row of an order-i effect, all columns for
        // effects of order < i are zero.
        let keep = effects_up_to_order(3, 2);
        for (ri, &re) in keep.iter().enumerate() {
            for (ci, &ce) in keep.iter().enumerate() {
                if ce.count_ones() < re.count_ones() {
                    assert_eq!(t.get(ri, ci), 0);
                }
            }
        }
    }

    #[test]
    fn order_lower_triangle_zero_full_matrix() {
        for m in 1..=6 {
            let a = association_matrix(m).unwrap();
            let dim = a.matrix().dim();
            for r in 0..dim {
                for c in 0..dim {
                    if c.count_ones() < r.count_ones() {
                        assert_eq!(a.matrix().get(r, c), 0, "m={m} r={r} c={c}");
                    }
                }
            }
        }
    }

    #[test]
    fn replication_invariance() {
        for m in 1..=3 {
            for r in 1..=3 {
                assert!(replication_invariance_check(m, r).unwrap(), "m={m} r={r}");
            }
        }
        assert!(replication_invariance_check(2, 3).unwrap());
        assert!(replication_invariance_check(3, 2).unwrap());
    }
}
