//! Smith normal form with transformation matrices, and the integer linear
//! algebra built on it: kernels, saturation, integral solving and basis
//! extension.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Signed, Zero};

use crate::matrix::{Mat, Vector};

/// Smith normal form `U · M · V = D` together with `U⁻¹` and `V⁻¹`.
#[derive(Clone, Debug)]
pub struct Smith {
    /// Unimodular row transform.
    pub u: Mat,
    /// Inverse of `u`.
    pub u_inv: Mat,
    /// Diagonal matrix with nonnegative entries in divisibility order.
    pub d: Mat,
    /// Unimodular column transform.
    pub v: Mat,
    /// Inverse of `v`.
    pub v_inv: Mat,
    /// Number of nonzero diagonal entries.
    pub rank: usize,
}

impl Smith {
    /// Nonzero diagonal entries of `D`.
    pub fn invariant_factors(&self) -> Vec<BigInt> {
        (0..self.rank).map(|i| self.d.get(i, i).clone()).collect()
    }
}

/// Computes `(U, D, V)` with `U·M·V = D` diagonal, `d₁ | d₂ | …`, and `U`, `V` unimodular.
pub fn smith_normal_form(m: &Mat) -> (Mat, Mat, Mat) {
    let s = smith(m);
    (s.u, s.d, s.v)
}

/// Full Smith decomposition including inverses of the transforms.
pub fn smith(m: &Mat) -> Smith {
    let (rows, cols) = (m.rows(), m.cols());
    let mut a = m.clone();
    let mut u = Mat::identity(rows);
    let mut u_inv = Mat::identity(rows);
    let mut v = Mat::identity(cols);
    let mut v_inv = Mat::identity(cols);
    let mut t = 0;
    while t < rows.min(cols) {
        // Pivot: entry of least absolute value in the remaining block.
        let mut best: Option<(usize, usize)> = None;
        for i in t..rows {
            for j in t..cols {
                let x = a.get(i, j);
                if !x.is_zero() && best.map_or(true, |(bi, bj)| x.abs() < a.get(bi, bj).abs()) {
                    best = Some((i, j));
                }
            }
        }
        let Some((pi, pj)) = best else { break };
        row_swap(&mut a, &mut u, &mut u_inv, t, pi);
        col_swap(&mut a, &mut v, &mut v_inv, t, pj);
        loop {
            let mut dirty = false;
            for i in t + 1..rows {
                if a.get(i, t).is_zero() {
                    continue;
                }
                let q = a.get(i, t).div_floor(a.get(t, t));
                row_add(&mut a, &mut u, &mut u_inv, i, t, &-q);
                if !a.get(i, t).is_zero() {
                    row_swap(&mut a, &mut u, &mut u_inv, t, i);
                    dirty = true;
                }
            }
            for j in t + 1..cols {
                if a.get(t, j).is_zero() {
                    continue;
                }
                let q = a.get(t, j).div_floor(a.get(t, t));
                col_add(&mut a, &mut v, &mut v_inv, j, t, &-q);
                if !a.get(t, j).is_zero() {
                    col_swap(&mut a, &mut v, &mut v_inv, t, j);
                    dirty = true;
                }
            }
            if dirty {
                continue;
            }
            // Divisibility: fold any offending row into the pivot row.
            let piv = a.get(t, t).clone();
            let bad = (t + 1..rows).find(|&i| (t + 1..cols).any(|j| !(a.get(i, j) % &piv).is_zero()));
            match bad {
                Some(i) => row_add(&mut a, &mut u, &mut u_inv, t, i, &BigInt::one()),
                None => break,
            }
        }
        if a.get(t, t).is_negative() {
            a.negate_row(t);
            u.negate_row(t);
            u_inv.negate_col(t);
        }
        t += 1;
    }
    let rank = (0..rows.min(cols)).take_while(|&i| !a.get(i, i).is_zero()).count();
    Smith { u, u_inv, d: a, v, v_inv, rank }
}

fn row_swap(a: &mut Mat, u: &mut Mat, u_inv: &mut Mat, i: usize, j: usize) {
    a.swap_rows(i, j);
    u.swap_rows(i, j);
    u_inv.swap_cols(i, j);
}

fn col_swap(a: &mut Mat, v: &mut Mat, v_inv: &mut Mat, i: usize, j: usize) {
    a.swap_cols(i, j);
    v.swap_cols(i, j);
    v_inv.swap_rows(i, j);
}

/// `row[i] += k · row[j]`, mirrored on the transform and its inverse.
fn row_add(a: &mut Mat, u: &mut Mat, u_inv: &mut Mat, i: usize, j: usize, k: &BigInt) {
    a.add_row_multiple(i, j, k);
    u.add_row_multiple(i, j, k);
    u_inv.add_col_multiple(j, i, &-k);
}

/// `col[i] += k · col[j]`, mirrored on the transform and its inverse.
fn col_add(a: &mut Mat, v: &mut Mat, v_inv: &mut Mat, i: usize, j: usize, k: &BigInt) {
    a.add_col_multiple(i, j, k);
    v.add_col_multiple(i, j, k);
    v_inv.add_row_multiple(j, i, &-k);
}

/// Saturated integer basis (as columns) of `{x : A x = 0}`.
pub fn kernel(a: &Mat) -> Mat {
    if a.rows() == 0 {
        return Mat::identity(a.cols());
    }
    crate::lll::relations_and_span(a).0
}

/// Basis (as columns) of the saturation of the column span of `b`.
pub fn saturate_cols(b: &Mat) -> Mat {
    // The saturation is the set of integral vectors orthogonal to everything
    // orthogonal to the columns.
    let perp = kernel(&b.transpose());
    if perp.cols() == 0 {
        return Mat::identity(b.rows());
    }
    kernel(&perp.transpose())
}

/// Rank over the rationals computed from the Smith form.
pub fn int_rank(a: &Mat) -> usize {
    smith(a).rank
}

/// True when the columns of `b` are independent and span a saturated sublattice.
pub fn cols_primitive(b: &Mat) -> bool {
    let s = smith(b);
    s.rank == b.cols() && (0..s.rank).all(|i| s.d.get(i, i).is_one())
}

/// Integral solution of `A x = b`, if one exists.
pub fn solve_int(a: &Mat, b: &[BigInt]) -> Option<Vector> {
    let s = smith(a);
    let ub = s.u.apply(b);
    let mut y = vec![BigInt::zero(); a.cols()];
    for (i, c) in ub.iter().enumerate() {
        if i < s.rank {
            let d = s.d.get(i, i);
            if !(c % d).is_zero() {
                return None;
            }
            y[i] = c / d;
        } else if !c.is_zero() {
            return None;
        }
    }
    Some(s.v.apply(&y))
}

/// Extends the columns of `b` (a saturated, independent family) to a unimodular
/// matrix whose leading columns are exactly `b`. Returns `None` otherwise.
pub fn extend_to_basis(b: &Mat) -> Option<Mat> {
    let s = smith(b);
    if s.rank != b.cols() || (0..s.rank).any(|i| !s.d.get(i, i).is_one()) {
        return None;
    }
    let rest: Vec<usize> = (b.cols()..b.rows()).collect();
    Some(b.hstack(&s.u_inv.select_cols(&rest)))
}

/// Left inverse `L` (with `L·B = I`) of a matrix whose columns form a
/// saturated independent family; `None` otherwise. For `u` in the span of the
/// columns, `L·u` gives its coordinates.
pub fn left_inverse(b: &Mat) -> Option<Mat> {
    let s = smith(b);
    if s.rank != b.cols() || (0..s.rank).any(|i| !s.d.get(i, i).is_one()) {
        return None;
    }
    let k = b.cols();
    Some(&s.v * &s.u.block(0..k, 0..b.rows()))
}

/// Coordinates of the columns of `target` in the basis given by the columns of
/// `basis`, when they all lie in its integral span.
pub fn coords_in(basis: &Mat, target: &Mat) -> Option<Mat> {
    let cols: Option<Vec<Vector>> = target.col_vecs().iter().map(|t| solve_int(basis, t)).collect();
    cols.map(|c| Mat::from_cols(basis.cols(), &c))
}

/// Basis (columns) of the intersection of two column spans, each saturated or not.
pub fn intersect_spans(a: &Mat, b: &Mat) -> Mat {
    let stacked = a.hstack(&-b);
    let k = kernel(&stacked);
    let top = k.block(0..a.cols(), 0..k.cols());
    let vecs = &*a * &top;
    lattice_basis(&vecs)
}

/// Basis (columns) of the integral span of the columns of `m`, dropping dependencies.
pub fn lattice_basis(m: &Mat) -> Mat {
    crate::lll::relations_and_span(m).1
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::ivec;

    fn check(m: &Mat) {
        let s = smith(m);
        assert_eq!(&(&s.u * m) * &s.v, s.d);
        assert_eq!(&s.u * &s.u_inv, Mat::identity(m.rows()));
        assert_eq!(&s.v * &s.v_inv, Mat::identity(m.cols()));
        for i in 0..m.rows() {
            for j in 0..m.cols() {
                if i != j {
                    assert!(s.d.get(i, j).is_zero());
                }
            }
        }
        for i in 1..s.rank {
            assert!((s.d.get(i, i) % s.d.get(i - 1, i - 1)).is_zero());
        }
    }

    #[test]
    fn identity_has_unit_factors() {
        let (_, d, _) = smith_normal_form(&Mat::identity(3));
        assert_eq!(d, Mat::identity(3));
    }

    #[test]
    fn hyperbolic_plane_is_unimodular() {
        let (_, d, _) = smith_normal_form(&Mat::from_i64(&[vec![0, 1], vec![1, 0]]));
        assert_eq!(d, Mat::identity(2));
    }

    #[test]
    fn scaled_diagonal_factors() {
        let m = Mat::from_i64(&[vec![-2, 0], vec![0, -4]]);
        let (_, d, _) = smith_normal_form(&m);
        assert_eq!(d, Mat::from_i64(&[vec![2, 0], vec![0, 4]]));
        check(&m);
    }

    #[test]
    fn divisibility_fix_up() {
        let m = Mat::from_i64(&[vec![2, 0], vec![0, 3]]);
        let (_, d, _) = smith_normal_form(&m);
        assert_eq!(d, Mat::from_i64(&[vec![1, 0], vec![0, 6]]));
        check(&Mat::from_i64(&[vec![6, 4, 2], vec![3, 9, -3], vec![0, 5, 7]]));
        check(&Mat::from_i64(&[vec![0, 0], vec![0, 0], vec![1, 0]]));
    }

    #[test]
    fn kernel_and_solve() {
        let a = Mat::from_i64(&[vec![2, 4, 6]]);
        let k = kernel(&a);
        assert_eq!(k.cols(), 2);
        assert!((&a * &k).is_zero());
        assert!(cols_primitive(&k));
        assert_eq!(solve_int(&a, &ivec(&[3])), None);
        let x = solve_int(&a, &ivec(&[8])).unwrap();
        assert_eq!(a.apply(&x), ivec(&[8]));
    }

    #[test]
    fn saturation_and_extension() {
        let b = Mat::column(&ivec(&[2, 0]));
        let s = saturate_cols(&b);
        assert_eq!(s.cols(), 1);
        assert!(cols_primitive(&s));
        assert!(extend_to_basis(&b).is_none());
        let e = extend_to_basis(&Mat::column(&ivec(&[3, 5]))).unwrap();
        assert_eq!(e.col(0), ivec(&[3, 5]));
        assert_eq!(num_traits::Signed::abs(&e.det()), BigInt::one());
    }
}
