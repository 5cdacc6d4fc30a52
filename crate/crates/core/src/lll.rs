//! Exact integral LLL reduction, used to keep kernel and span bases small.
//!
//! The reduction works with integral Gram–Schmidt data (`dᵢ` and `λᵢⱼ`) so
//! that no rational arithmetic is needed. Vectors are reduced for the standard
//! dot product with parameter 3/4.

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, Zero};

use crate::matrix::{dot, Mat, Vector};

/// Nearest integer to `a / b` for `b > 0`, rounding halves up.
fn round_div(a: &BigInt, b: &BigInt) -> BigInt {
    let two = BigInt::from(2);
    (a * &two + b).div_floor(&(b * &two))
}

/// LLL-reduces a family of linearly independent vectors in place.
///
/// Returns `false` (leaving the family untouched) if the vectors are dependent.
pub fn lll_reduce(b: &mut Vec<Vector>) -> bool {
    let n = b.len();
    if n <= 1 {
        return n == 0 || b[0].iter().any(|x| !x.is_zero());
    }
    let orig = b.clone();
    // d[0] = 1, d[i + 1] = Gram determinant of the first i + 1 vectors.
    let mut d = vec![BigInt::zero(); n + 1];
    let mut lam = vec![vec![BigInt::zero(); n]; n];
    d[0] = BigInt::from(1);
    d[1] = dot(&b[0], &b[0]);
    if d[1].is_zero() {
        return false;
    }
    let mut k = 1usize;
    let mut kmax = 0usize;
    while k < n {
        if k > kmax {
            kmax = k;
            for j in 0..=k {
                let mut u = dot(&b[k], &b[j]);
                for i in 0..j {
                    u = (&d[i + 1] * &u - &lam[k][i] * &lam[j][i]) / &d[i];
                }
                if j < k {
                    lam[k][j] = u;
                } else {
                    if u.is_zero() {
                        *b = orig;
                        return false;
                    }
                    d[k + 1] = u;
                }
            }
        }
        reduce(b, &mut lam, &d, k, k - 1);
        let lhs = BigInt::from(4) * &d[k + 1] * &d[k - 1];
        let rhs = BigInt::from(3) * &d[k] * &d[k] - BigInt::from(4) * &lam[k][k - 1] * &lam[k][k - 1];
        if lhs < rhs {
            swap(b, &mut lam, &mut d, k, kmax);
            k = k.saturating_sub(1).max(1);
        } else {
            for l in (0..k.saturating_sub(1)).rev() {
                reduce(b, &mut lam, &d, k, l);
            }
            k += 1;
        }
    }
    true
}

fn reduce(b: &mut [Vector], lam: &mut [Vec<BigInt>], d: &[BigInt], k: usize, l: usize) {
    let two = BigInt::from(2);
    if (&lam[k][l] * &two).abs() <= d[l + 1] {
        return;
    }
    let q = round_div(&lam[k][l], &d[l + 1]);
    let bl = b[l].clone();
    for (x, y) in b[k].iter_mut().zip(bl.iter()) {
        *x -= &q * y;
    }
    lam[k][l] -= &q * &d[l + 1];
    for i in 0..l {
        let t = &q * &lam[l][i];
        lam[k][i] -= t;
    }
}

fn swap(b: &mut [Vector], lam: &mut [Vec<BigInt>], d: &mut [BigInt], k: usize, kmax: usize) {
    b.swap(k, k - 1);
    for j in 0..k - 1 {
        let t = lam[k][j].clone();
        lam[k][j] = std::mem::replace(&mut lam[k - 1][j], t);
    }
    let l = lam[k][k - 1].clone();
    let bb = (&d[k - 1] * &d[k + 1] + &l * &l) / &d[k];
    for i in k + 1..=kmax {
        let t = lam[i][k].clone();
        lam[i][k] = (&d[k + 1] * &lam[i][k - 1] - &l * &t) / &d[k];
        lam[i][k - 1] = (&bb * &t + &l * &lam[i][k]) / &d[k + 1];
    }
    d[k] = bb;
}

/// Splits the integral relations among the columns of `m` from a basis of
/// their span. Returns `(kernel, span)`, both as column matrices, where the
/// kernel columns generate `{x : m x = 0}` and the span columns generate the
/// integral column span of `m`. Both are LLL-reduced.
pub fn relations_and_span(m: &Mat) -> (Mat, Mat) {
    let (rows, cols) = (m.rows(), m.cols());
    if cols == 0 {
        return (Mat::zeros(0, 0), Mat::zeros(rows, 0));
    }
    let rank = m.rank();
    let mut weight = BigInt::from(1) << (cols + 4);
    weight *= m.max_abs().max(BigInt::from(1));
    loop {
        // Columns of [w·M ; I] are independent; short vectors with a zero top
        // block are relations.
        let mut fam: Vec<Vector> = (0..cols)
            .map(|j| {
                let mut v: Vector = (0..rows).map(|i| m.get(i, j) * &weight).collect();
                v.extend((0..cols).map(|i| BigInt::from((i == j) as i64)));
                v
            })
            .collect();
        let ok = lll_reduce(&mut fam);
        debug_assert!(ok);
        let (zero, rest): (Vec<Vector>, Vec<Vector>) = fam.into_iter().partition(|v| v[..rows].iter().all(|x| x.is_zero()));
        if zero.len() == cols - rank {
            let mut ker: Vec<Vector> = zero.into_iter().map(|v| v[rows..].to_vec()).collect();
            lll_reduce(&mut ker);
            let mut span: Vec<Vector> = rest.into_iter().map(|v| v[rows..].to_vec()).map(|x| m.apply(&x)).collect();
            lll_reduce(&mut span);
            return (Mat::from_cols(cols, &ker), Mat::from_cols(rows, &span));
        }
        weight <<= cols + 4;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::ivec;

    #[test]
    fn reduces_a_skewed_basis() {
        let mut b = vec![ivec(&[1, 0, 0]), ivec(&[1000, 1, 0]), ivec(&[313, 517, 1])];
        assert!(lll_reduce(&mut b));
        let m = Mat::from_cols(3, &b);
        assert_eq!(m.det().abs(), BigInt::from(1));
        assert!(m.max_abs() <= BigInt::from(1));
    }

    #[test]
    fn detects_dependence() {
        let mut b = vec![ivec(&[1, 2]), ivec(&[2, 4])];
        assert!(!lll_reduce(&mut b));
    }

    #[test]
    fn relations_of_dependent_columns() {
        let m = Mat::from_i64(&[vec![2, 4, 1], vec![0, 0, 3]]);
        let (ker, span) = relations_and_span(&m);
        assert_eq!(ker.cols(), 1);
        assert!((&m * &ker).is_zero());
        assert_eq!(ker.col(0).iter().map(|x| x.abs()).collect::<Vec<_>>(), ivec(&[2, 1, 0]));
        assert_eq!(span.cols(), 2);
        assert_eq!(span.det().abs(), BigInt::from(6));
    }
}
