//! Dense matrices over arbitrary-precision integers, plus the exact rational
//! elimination used for solving, inverting and computing ranks.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::de::{self, Deserializer};
use serde::ser::Serializer;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Column vector of integers.
pub type Vector = Vec<BigInt>;

/// Column vector of rationals.
pub type QVector = Vec<BigRational>;

/// Converts a slice of machine integers into a [`Vector`].
pub fn ivec(v: &[i64]) -> Vector {
    v.iter().map(|&x| BigInt::from(x)).collect()
}

/// Integer dot product.
pub fn dot(u: &[BigInt], v: &[BigInt]) -> BigInt {
    u.iter().zip(v).map(|(a, b)| a * b).sum()
}

/// Greatest common divisor of the entries (0 for the zero vector).
pub fn content(v: &[BigInt]) -> BigInt {
    v.iter()
        .fold(BigInt::zero(), |g, x| num_integer::Integer::gcd(&g, x))
}

/// True when the vector is nonzero and its entries have gcd 1.
pub fn is_primitive_vector(v: &[BigInt]) -> bool {
    content(v).is_one()
}

/// Entrywise sum of two vectors.
pub fn vadd(u: &[BigInt], v: &[BigInt]) -> Vector {
    u.iter().zip(v).map(|(a, b)| a + b).collect()
}

/// Entrywise difference of two vectors.
pub fn vsub(u: &[BigInt], v: &[BigInt]) -> Vector {
    u.iter().zip(v).map(|(a, b)| a - b).collect()
}

/// Scalar multiple of a vector.
pub fn vscale(k: &BigInt, v: &[BigInt]) -> Vector {
    v.iter().map(|x| k * x).collect()
}

/// Dense integer matrix stored row-major.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<BigInt>,
}

impl Mat {
    /// Zero matrix of the given shape.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![BigInt::zero(); rows * cols] }
    }

    /// Identity matrix.
    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m.set(i, i, BigInt::one());
        }
        m
    }

    /// Builds a matrix from machine-integer rows. Panics on ragged input.
    pub fn from_i64(rows: &[Vec<i64>]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        assert!(rows.iter().all(|x| x.len() == c), "ragged matrix literal");
        Mat { rows: r, cols: c, data: rows.iter().flatten().map(|&x| BigInt::from(x)).collect() }
    }

    /// Builds a matrix from integer rows, rejecting ragged input.
    pub fn from_rows(rows: Vec<Vector>) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |x| x.len());
        if rows.iter().any(|x| x.len() != c) {
            return Err(Error::Dimension("ragged rows".into()));
        }
        Ok(Mat { rows: r, cols: c, data: rows.into_iter().flatten().collect() })
    }

    /// Builds a matrix whose columns are the given vectors, with `n` rows.
    pub fn from_cols(n: usize, cols: &[Vector]) -> Self {
        let mut m = Mat::zeros(n, cols.len());
        for (j, c) in cols.iter().enumerate() {
            assert_eq!(c.len(), n, "column length mismatch");
            for (i, x) in c.iter().enumerate() {
                m.set(i, j, x.clone());
            }
        }
        m
    }

    /// Single-column matrix.
    pub fn column(v: &[BigInt]) -> Self {
        Mat::from_cols(v.len(), &[v.to_vec()])
    }

    /// Diagonal matrix.
    pub fn diag(d: &[BigInt]) -> Self {
        let mut m = Mat::zeros(d.len(), d.len());
        for (i, x) in d.iter().enumerate() {
            m.set(i, i, x.clone());
        }
        m
    }

    /// Number of rows.
    pub fn rows(&self) -> usize {
        self.rows
    }

    /// Number of columns.
    pub fn cols(&self) -> usize {
        self.cols
    }

    /// True for square matrices.
    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    /// Entry at `(i, j)`.
    pub fn get(&self, i: usize, j: usize) -> &BigInt {
        &self.data[i * self.cols + j]
    }

    /// Overwrites entry `(i, j)`.
    pub fn set(&mut self, i: usize, j: usize, v: BigInt) {
        self.data[i * self.cols + j] = v;
    }

    /// Row `i` as a vector.
    pub fn row(&self, i: usize) -> Vector {
        self.data[i * self.cols..(i + 1) * self.cols].to_vec()
    }

    /// Column `j` as a vector.
    pub fn col(&self, j: usize) -> Vector {
        (0..self.rows).map(|i| self.get(i, j).clone()).collect()
    }

    /// All columns.
    pub fn col_vecs(&self) -> Vec<Vector> {
        (0..self.cols).map(|j| self.col(j)).collect()
    }

    /// All rows.
    pub fn row_vecs(&self) -> Vec<Vector> {
        (0..self.rows).map(|i| self.row(i)).collect()
    }

    /// Transpose.
    pub fn transpose(&self) -> Mat {
        let mut t = Mat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.set(j, i, self.get(i, j).clone());
            }
        }
        t
    }

    /// Matrix times vector.
    pub fn apply(&self, v: &[BigInt]) -> Vector {
        assert_eq!(v.len(), self.cols, "apply: dimension mismatch");
        (0..self.rows)
            .map(|i| {
                let r = &self.data[i * self.cols..(i + 1) * self.cols];
                dot(r, v)
            })
            .collect()
    }

    /// Bilinear value `uᵀ · self · v`.
    pub fn bilinear(&self, u: &[BigInt], v: &[BigInt]) -> BigInt {
        dot(u, &self.apply(v))
    }

    /// Horizontal concatenation.
    pub fn hstack(&self, other: &Mat) -> Mat {
        assert_eq!(self.rows, other.rows, "hstack: row mismatch");
        let mut m = Mat::zeros(self.rows, self.cols + other.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                m.set(i, j, self.get(i, j).clone());
            }
            for j in 0..other.cols {
                m.set(i, self.cols + j, other.get(i, j).clone());
            }
        }
        m
    }

    /// Vertical concatenation.
    pub fn vstack(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.cols, "vstack: column mismatch");
        let mut data = self.data.clone();
        data.extend(other.data.iter().cloned());
        Mat { rows: self.rows + other.rows, cols: self.cols, data }
    }

    /// Block diagonal sum.
    pub fn block_diag(&self, other: &Mat) -> Mat {
        let mut m = Mat::zeros(self.rows + other.rows, self.cols + other.cols);
        m.paste(0, 0, self);
        m.paste(self.rows, self.cols, other);
        m
    }

    /// Copies `block` into `self` with its top-left corner at `(r, c)`.
    pub fn paste(&mut self, r: usize, c: usize, block: &Mat) {
        for i in 0..block.rows {
            for j in 0..block.cols {
                self.set(r + i, c + j, block.get(i, j).clone());
            }
        }
    }

    /// Sub-block with the given row and column ranges.
    pub fn block(&self, rows: std::ops::Range<usize>, cols: std::ops::Range<usize>) -> Mat {
        let mut m = Mat::zeros(rows.len(), cols.len());
        for (a, i) in rows.clone().enumerate() {
            for (b, j) in cols.clone().enumerate() {
                m.set(a, b, self.get(i, j).clone());
            }
        }
        m
    }

    /// Columns with the given indices, in order.
    pub fn select_cols(&self, idx: &[usize]) -> Mat {
        let cols: Vec<Vector> = idx.iter().map(|&j| self.col(j)).collect();
        Mat::from_cols(self.rows, &cols)
    }

    /// Scalar multiple.
    pub fn scale(&self, k: &BigInt) -> Mat {
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|x| x * k).collect() }
    }

    /// True when every entry is zero.
    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|x| x.is_zero())
    }

    /// True for square symmetric matrices.
    pub fn is_symmetric(&self) -> bool {
        self.is_square() && (0..self.rows).all(|i| (0..i).all(|j| self.get(i, j) == self.get(j, i)))
    }

    /// Congruence transform `Bᵀ · self · B`.
    pub fn congruence(&self, b: &Mat) -> Mat {
        &(&b.transpose() * self) * b
    }

    /// Determinant by fraction-free Bareiss elimination.
    pub fn det(&self) -> BigInt {
        assert!(self.is_square(), "det of non-square matrix");
        let n = self.rows;
        if n == 0 {
            return BigInt::one();
        }
        let mut a = self.clone();
        let mut sign = BigInt::one();
        let mut prev = BigInt::one();
        for k in 0..n - 1 {
            if a.get(k, k).is_zero() {
                let Some(p) = (k + 1..n).find(|&i| !a.get(i, k).is_zero()) else {
                    return BigInt::zero();
                };
                a.swap_rows(k, p);
                sign = -sign;
            }
            for i in k + 1..n {
                for j in k + 1..n {
                    let v = (a.get(i, j) * a.get(k, k) - a.get(i, k) * a.get(k, j)) / &prev;
                    a.set(i, j, v);
                }
            }
            prev = a.get(k, k).clone();
        }
        sign * a.get(n - 1, n - 1)
    }

    /// Swaps two rows in place.
    pub fn swap_rows(&mut self, i: usize, j: usize) {
        if i == j {
            return;
        }
        for c in 0..self.cols {
            self.data.swap(i * self.cols + c, j * self.cols + c);
        }
    }

    /// Swaps two columns in place.
    pub fn swap_cols(&mut self, i: usize, j: usize) {
        if i == j {
            return;
        }
        for r in 0..self.rows {
            self.data.swap(r * self.cols + i, r * self.cols + j);
        }
    }

    /// Row operation `row[i] += k · row[j]`.
    pub fn add_row_multiple(&mut self, i: usize, j: usize, k: &BigInt) {
        if k.is_zero() {
            return;
        }
        for c in 0..self.cols {
            let v = self.get(j, c) * k;
            self.data[i * self.cols + c] += v;
        }
    }

    /// Column operation `col[i] += k · col[j]`.
    pub fn add_col_multiple(&mut self, i: usize, j: usize, k: &BigInt) {
        if k.is_zero() {
            return;
        }
        for r in 0..self.rows {
            let v = self.get(r, j) * k;
            self.data[r * self.cols + i] += v;
        }
    }

    /// Negates row `i` in place.
    pub fn negate_row(&mut self, i: usize) {
        for c in 0..self.cols {
            let v = -self.get(i, c);
            self.set(i, c, v);
        }
    }

    /// Negates column `j` in place.
    pub fn negate_col(&mut self, j: usize) {
        for r in 0..self.rows {
            let v = -self.get(r, j);
            self.set(r, j, v);
        }
    }

    /// Integer inverse of a unimodular matrix.
    pub fn inverse_unimodular(&self) -> Result<Mat> {
        if !self.is_square() {
            return Err(Error::Dimension("inverse of non-square matrix".into()));
        }
        let inv = rational_inverse(self).ok_or_else(|| Error::Degenerate("singular matrix".into()))?;
        let mut out = Mat::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                let q = &inv[i][j];
                if !q.is_integer() {
                    return Err(Error::NotUnimodular("inverse is not integral".into()));
                }
                out.set(i, j, q.to_integer());
            }
        }
        Ok(out)
    }

    /// Rank over the rationals.
    pub fn rank(&self) -> usize {
        let (_, pivots) = rref(&to_rational(self));
        pivots.len()
    }

    /// Largest absolute entry, or 0 for the empty matrix.
    pub fn max_abs(&self) -> BigInt {
        self.data.iter().map(|x| x.abs()).max().unwrap_or_default()
    }

    /// Rows converted to machine integers, when every entry fits.
    pub fn to_i64_rows(&self) -> Option<Vec<Vec<i64>>> {
        (0..self.rows)
            .map(|i| (0..self.cols).map(|j| self.get(i, j).to_i64()).collect())
            .collect()
    }
}

impl fmt::Debug for Mat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for i in 0..self.rows {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "[")?;
            for j in 0..self.cols {
                if j > 0 {
                    write!(f, ",")?;
                }
                write!(f, "{}", self.get(i, j))?;
            }
            write!(f, "]")?;
        }
        write!(f, "]")
    }
}

impl fmt::Display for Mat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

impl<'a> Mul<&'a Mat> for &'a Mat {
    type Output = Mat;
    fn mul(self, rhs: &'a Mat) -> Mat {
        assert_eq!(self.cols, rhs.rows, "matrix product: dimension mismatch");
        let mut out = Mat::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                if a.is_zero() {
                    continue;
                }
                for j in 0..rhs.cols {
                    let b = rhs.get(k, j);
                    if !b.is_zero() {
                        out.data[i * rhs.cols + j] += a * b;
                    }
                }
            }
        }
        out
    }
}

impl<'a> Add<&'a Mat> for &'a Mat {
    type Output = Mat;
    fn add(self, rhs: &'a Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "matrix sum: shape mismatch");
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect() }
    }
}

impl<'a> Sub<&'a Mat> for &'a Mat {
    type Output = Mat;
    fn sub(self, rhs: &'a Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "matrix difference: shape mismatch");
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect() }
    }
}

impl Neg for &Mat {
    type Output = Mat;
    fn neg(self) -> Mat {
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|x| -x).collect() }
    }
}

/// JSON entry: machine integer when it fits, decimal string otherwise.
#[derive(Serialize, Deserialize)]
#[serde(untagged)]
enum JsonInt {
    Small(i64),
    Big(String),
}

fn to_json_int(x: &BigInt) -> JsonInt {
    match x.to_i64() {
        Some(v) => JsonInt::Small(v),
        None => JsonInt::Big(x.to_string()),
    }
}

fn from_json_int<E: de::Error>(x: JsonInt) -> std::result::Result<BigInt, E> {
    match x {
        JsonInt::Small(v) => Ok(BigInt::from(v)),
        JsonInt::Big(s) => s.parse().map_err(|_| E::custom(format!("bad integer `{s}`"))),
    }
}

impl Serialize for Mat {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let rows: Vec<Vec<JsonInt>> =
            (0..self.rows).map(|i| (0..self.cols).map(|j| to_json_int(self.get(i, j))).collect()).collect();
        rows.serialize(s)
    }
}

impl<'de> Deserialize<'de> for Mat {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let rows: Vec<Vec<JsonInt>> = Vec::deserialize(d)?;
        let rows: Vec<Vector> = rows
            .into_iter()
            .map(|r| r.into_iter().map(from_json_int).collect::<std::result::Result<Vec<_>, _>>())
            .collect::<std::result::Result<_, _>>()?;
        Mat::from_rows(rows).map_err(de::Error::custom)
    }
}

/// Serde adapter for integer vectors (`#[serde(with = "crate::matrix::vec_serde")]`).
pub mod vec_serde {
    use super::*;

    /// Serializes an integer vector as a JSON array.
    pub fn serialize<S: Serializer>(v: &[BigInt], s: S) -> std::result::Result<S::Ok, S::Error> {
        v.iter().map(to_json_int).collect::<Vec<_>>().serialize(s)
    }

    /// Deserializes an integer vector from a JSON array.
    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vector, D::Error> {
        let raw: Vec<JsonInt> = Vec::deserialize(d)?;
        raw.into_iter().map(from_json_int).collect()
    }
}

/// Integer vector rendered as JSON numbers.
pub fn vec_to_json(v: &[BigInt]) -> serde_json::Value {
    serde_json::to_value(v.iter().map(to_json_int).collect::<Vec<_>>()).expect("integers serialize")
}

/// Rational vector rendered as strings such as `"-3/2"`.
pub fn qvec_to_json(v: &[BigRational]) -> serde_json::Value {
    serde_json::Value::Array(v.iter().map(|q| serde_json::Value::String(q.to_string())).collect())
}

/// Converts an integer matrix to rational rows.
pub fn to_rational(m: &Mat) -> Vec<QVector> {
    (0..m.rows()).map(|i| (0..m.cols()).map(|j| BigRational::from_integer(m.get(i, j).clone())).collect()).collect()
}

/// Reduced row echelon form over the rationals; returns the matrix and its pivot columns.
pub fn rref(a: &[QVector]) -> (Vec<QVector>, Vec<usize>) {
    let mut m = a.to_vec();
    let rows = m.len();
    let cols = m.first().map_or(0, |r| r.len());
    let mut pivots = Vec::new();
    let mut r = 0;
    for c in 0..cols {
        if r == rows {
            break;
        }
        let Some(p) = (r..rows).find(|&i| !m[i][c].is_zero()) else { continue };
        m.swap(r, p);
        let inv = m[r][c].recip();
        for x in m[r].iter_mut() {
            *x *= &inv;
        }
        for i in 0..rows {
            if i != r && !m[i][c].is_zero() {
                let f = m[i][c].clone();
                for j in 0..cols {
                    let v = &m[r][j] * &f;
                    m[i][j] -= v;
                }
            }
        }
        pivots.push(c);
        r += 1;
    }
    (m, pivots)
}

/// One rational solution of `A x = b`, if the system is consistent.
pub fn solve_rational(a: &[QVector], b: &[BigRational]) -> Option<QVector> {
    let cols = a.first().map_or(0, |r| r.len());
    let aug: Vec<QVector> = a
        .iter()
        .zip(b)
        .map(|(r, x)| {
            let mut r = r.clone();
            r.push(x.clone());
            r
        })
        .collect();
    let (m, pivots) = rref(&aug);
    if pivots.last() == Some(&cols) {
        return None;
    }
    let mut x = vec![BigRational::zero(); cols];
    for (i, &p) in pivots.iter().enumerate() {
        x[p] = m[i][cols].clone();
    }
    Some(x)
}

/// Rational inverse of a square integer matrix.
pub fn rational_inverse(a: &Mat) -> Option<Vec<QVector>> {
    let n = a.rows();
    let mut aug = to_rational(a);
    for (i, row) in aug.iter_mut().enumerate() {
        for j in 0..n {
            row.push(if i == j { BigRational::one() } else { BigRational::zero() });
        }
    }
    let (m, pivots) = rref(&aug);
    if pivots.len() < n || pivots[n - 1] != n - 1 {
        return None;
    }
    Some(m.into_iter().map(|r| r[n..].to_vec()).collect())
}

/// Rational matrix times rational vector.
pub fn qapply(m: &[QVector], v: &[BigRational]) -> QVector {
    m.iter().map(|r| r.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

/// Integer vector viewed as a rational vector.
pub fn to_qvec(v: &[BigInt]) -> QVector {
    v.iter().map(|x| BigRational::from_integer(x.clone())).collect()
}

/// Rational vector converted back to integers, when every entry is integral.
pub fn from_qvec(v: &[BigRational]) -> Option<Vector> {
    v.iter().map(|q| q.is_integer().then(|| q.to_integer())).collect()
}

/// Rational bilinear value `uᵀ G v`.
pub fn qbilinear(g: &Mat, u: &[BigRational], v: &[BigRational]) -> BigRational {
    let mut s = BigRational::zero();
    for i in 0..g.rows() {
        if u[i].is_zero() {
            continue;
        }
        let mut t = BigRational::zero();
        for j in 0..g.cols() {
            if !v[j].is_zero() && !g.get(i, j).is_zero() {
                t += &v[j] * BigRational::from_integer(g.get(i, j).clone());
            }
        }
        s += &u[i] * t;
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn product_and_transpose() {
        let a = Mat::from_i64(&[vec![1, 2], vec![3, 4]]);
        let b = Mat::from_i64(&[vec![0, 1], vec![1, 0]]);
        assert_eq!(&a * &b, Mat::from_i64(&[vec![2, 1], vec![4, 3]]));
        assert_eq!(a.transpose(), Mat::from_i64(&[vec![1, 3], vec![2, 4]]));
    }

    #[test]
    fn bareiss_determinant() {
        let a = Mat::from_i64(&[vec![2, -1, 0], vec![-1, 2, -1], vec![0, -1, 2]]);
        assert_eq!(a.det(), BigInt::from(4));
        let z = Mat::from_i64(&[vec![0, 1], vec![0, 2]]);
        assert_eq!(z.det(), BigInt::zero());
        let p = Mat::from_i64(&[vec![0, 1], vec![1, 0]]);
        assert_eq!(p.det(), BigInt::from(-1));
    }

    #[test]
    fn unimodular_inverse_round_trip() {
        let a = Mat::from_i64(&[vec![2, 3], vec![1, 2]]);
        let inv = a.inverse_unimodular().unwrap();
        assert_eq!(&a * &inv, Mat::identity(2));
        assert!(Mat::from_i64(&[vec![2, 0], vec![0, 1]]).inverse_unimodular().is_err());
    }

    #[test]
    fn rational_solve_detects_inconsistency() {
        let a = to_rational(&Mat::from_i64(&[vec![1, 1], vec![2, 2]]));
        let ok = solve_rational(&a, &to_qvec(&ivec(&[1, 2]))).unwrap();
        assert_eq!(&ok[0] + &ok[1], BigRational::one());
        assert!(solve_rational(&a, &to_qvec(&ivec(&[1, 3]))).is_none());
    }

    #[test]
    fn json_round_trip() {
        let a = Mat::from_i64(&[vec![1, -2], vec![3, 4]]);
        let s = serde_json::to_string(&a).unwrap();
        assert_eq!(s, "[[1,-2],[3,4]]");
        let b: Mat = serde_json::from_str(&s).unwrap();
        assert_eq!(a, b);
    }
}
