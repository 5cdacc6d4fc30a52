//! Symmetric integral lattices: standard lattices, inertia, discriminant
//! forms, complements, saturation, quotients, short vectors, roots and the
//! definite isometry search.

use std::collections::HashMap;
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{self, ivec, Mat, QVector, Vector};
use crate::snf;

/// Free abelian group of finite rank with an integral symmetric bilinear form.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntLattice {
    gram: Mat,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    labels: Option<Vec<String>>,
}

impl fmt::Debug for IntLattice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "IntLattice{:?}", self.gram)
    }
}

/// Counts of positive, negative and null directions of a symmetric form.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Signature {
    /// Positive directions.
    pub pos: usize,
    /// Negative directions.
    pub neg: usize,
    /// Dimension of the radical.
    pub null: usize,
}

impl IntLattice {
    /// Lattice with the given symmetric Gram matrix.
    pub fn new(gram: Mat) -> Result<Self> {
        if !gram.is_symmetric() {
            return Err(Error::NotSymmetric);
        }
        Ok(IntLattice { gram, labels: None })
    }

    /// Lattice from machine-integer Gram rows. Panics if not symmetric.
    pub fn from_i64(rows: &[Vec<i64>]) -> Self {
        IntLattice::new(Mat::from_i64(rows)).expect("symmetric Gram literal")
    }

    /// Attaches per-basis-vector names.
    pub fn with_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.rank() {
            return Err(Error::Dimension("label count differs from rank".into()));
        }
        self.labels = Some(labels);
        Ok(self)
    }

    /// Optional basis names.
    pub fn labels(&self) -> Option<&[String]> {
        self.labels.as_deref()
    }

    /// The zero-rank lattice.
    pub fn zero() -> Self {
        IntLattice { gram: Mat::zeros(0, 0), labels: None }
    }

    /// Gram matrix.
    pub fn gram(&self) -> &Mat {
        &self.gram
    }

    /// Rank.
    pub fn rank(&self) -> usize {
        self.gram.rows()
    }

    /// Determinant of the Gram matrix.
    pub fn det(&self) -> BigInt {
        self.gram.det()
    }

    /// True when the radical is nonzero.
    pub fn is_degenerate(&self) -> bool {
        self.det().is_zero()
    }

    /// True when the Gram determinant is ±1.
    pub fn is_unimodular(&self) -> bool {
        self.det().abs().is_one()
    }

    /// True when every vector has even square.
    pub fn is_even(&self) -> bool {
        (0..self.rank()).all(|i| self.gram.get(i, i).is_even())
    }

    /// Bilinear pairing of two coordinate vectors.
    pub fn pair(&self, u: &[BigInt], v: &[BigInt]) -> BigInt {
        self.gram.bilinear(u, v)
    }

    /// Square of a coordinate vector.
    pub fn norm(&self, v: &[BigInt]) -> BigInt {
        self.pair(v, v)
    }

    /// Inertia of the form.
    pub fn signature(&self) -> Signature {
        signature(self)
    }

    /// Orthogonal direct sum.
    pub fn direct_sum(&self, other: &IntLattice) -> IntLattice {
        let labels = match (&self.labels, &other.labels) {
            (Some(a), Some(b)) => Some(a.iter().chain(b).cloned().collect()),
            _ => None,
        };
        IntLattice { gram: self.gram.block_diag(&other.gram), labels }
    }

    /// Same group with the form multiplied by `k`.
    pub fn scaled(&self, k: i64) -> IntLattice {
        IntLattice { gram: self.gram.scale(&BigInt::from(k)), labels: self.labels.clone() }
    }

    /// Same lattice expressed in a new basis (columns of `b`).
    pub fn rebased(&self, b: &Mat) -> IntLattice {
        IntLattice { gram: self.gram.congruence(b), labels: None }
    }

    /// Sublattice spanned by the given columns.
    pub fn sub(&self, basis: Mat) -> Result<Sublattice> {
        Sublattice::new(self.clone(), basis)
    }

    /// The lattice viewed as a sublattice of itself.
    pub fn full(&self) -> Sublattice {
        Sublattice { ambient: self.clone(), basis: Mat::identity(self.rank()) }
    }

    /// Divisibility of a nonzero vector: positive generator of `⟨v, L⟩`.
    pub fn divisibility(&self, v: &[BigInt]) -> Result<BigInt> {
        if v.iter().all(|x| x.is_zero()) {
            return Err(Error::Precondition("divisibility of the zero vector".into()));
        }
        let row = self.gram.apply(v);
        let g = matrix::content(&row);
        if g.is_zero() {
            return Err(Error::Degenerate("vector lies in the radical".into()));
        }
        Ok(g)
    }
}

/// Sublattice of an ambient lattice, given by generator columns.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Sublattice {
    /// Ambient lattice.
    pub ambient: IntLattice,
    /// Generators as columns in ambient coordinates.
    pub basis: Mat,
}

impl Sublattice {
    /// Sublattice with independent generators.
    pub fn new(ambient: IntLattice, basis: Mat) -> Result<Self> {
        if basis.rows() != ambient.rank() {
            return Err(Error::Dimension("generator length differs from ambient rank".into()));
        }
        if snf::int_rank(&basis) != basis.cols() {
            return Err(Error::Dimension("generators are linearly dependent".into()));
        }
        Ok(Sublattice { ambient, basis })
    }

    /// Sublattice spanned by arbitrary (possibly dependent) vectors.
    pub fn spanned_by(ambient: IntLattice, vectors: &[Vector]) -> Self {
        let m = Mat::from_cols(ambient.rank(), vectors);
        let basis = if vectors.is_empty() { m } else { snf::lattice_basis(&m) };
        Sublattice { ambient, basis }
    }

    /// Rank of the sublattice.
    pub fn rank(&self) -> usize {
        self.basis.cols()
    }

    /// Restricted form in the generator basis.
    pub fn lattice(&self) -> IntLattice {
        self.ambient.rebased(&self.basis)
    }

    /// Saturation `(S ⊗ Q) ∩ ambient`.
    pub fn saturate(&self) -> Sublattice {
        if self.rank() == 0 {
            return self.clone();
        }
        Sublattice { ambient: self.ambient.clone(), basis: snf::saturate_cols(&self.basis) }
    }

    /// True when the sublattice equals its saturation.
    pub fn is_primitive(&self) -> bool {
        self.rank() == 0 || snf::cols_primitive(&self.basis)
    }

    /// Index of the sublattice in its saturation.
    pub fn saturation_index(&self) -> BigInt {
        if self.rank() == 0 {
            return BigInt::one();
        }
        snf::smith(&self.basis).invariant_factors().iter().product()
    }

    /// Orthogonal complement in the ambient lattice (always saturated).
    pub fn orthogonal_complement(&self) -> Sublattice {
        orthogonal_complement(self)
    }

    /// Coordinates of an ambient vector in the generator basis, if it lies in the span.
    pub fn coords(&self, v: &[BigInt]) -> Option<Vector> {
        snf::solve_int(&self.basis, v)
    }

    /// True when the ambient vector lies in the sublattice.
    pub fn contains(&self, v: &[BigInt]) -> bool {
        self.coords(v).is_some()
    }

    /// True when every generator of `other` lies in `self`.
    pub fn contains_sub(&self, other: &Sublattice) -> bool {
        other.basis.col_vecs().iter().all(|v| self.contains(v))
    }

    /// Equality as subgroups of the ambient lattice.
    pub fn same_span(&self, other: &Sublattice) -> bool {
        self.rank() == other.rank() && self.contains_sub(other) && other.contains_sub(self)
    }

    /// Generators as vectors.
    pub fn generators(&self) -> Vec<Vector> {
        self.basis.col_vecs()
    }
}

/// Finite quadratic form on the discriminant group `L*/L`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DiscGroup {
    /// Invariant factors greater than one, in divisibility order.
    #[serde(with = "crate::matrix::vec_serde")]
    pub invariant_factors: Vec<BigInt>,
    /// `q(xᵢ)` of the generators, reduced into `[0, 2)`.
    #[serde(with = "qvec_serde")]
    pub qvalues: Vec<BigRational>,
    /// `b(xᵢ, xⱼ)` reduced into `[0, 1)`.
    #[serde(skip)]
    pub bilinear: Vec<Vec<BigRational>>,
    /// True when the source lattice is odd; then `q` is only meaningful modulo 1.
    pub odd: bool,
    /// Generators as rational vectors in lattice coordinates.
    #[serde(skip)]
    pub generators: Vec<QVector>,
}

mod qvec_serde {
    use num_rational::BigRational;
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &[BigRational], s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(v.iter().map(|q| q.to_string()))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<BigRational>, D::Error> {
        let raw: Vec<String> = Vec::deserialize(d)?;
        raw.iter().map(|s| s.parse().map_err(serde::de::Error::custom)).collect()
    }
}

fn reduce_mod(q: &BigRational, m: i64) -> BigRational {
    let m = BigRational::from_integer(BigInt::from(m));
    let k = (q / &m).floor();
    q - k * m
}

impl DiscGroup {
    /// Order of the group.
    pub fn order(&self) -> BigInt {
        self.invariant_factors.iter().product()
    }

    /// True for the trivial group.
    pub fn is_trivial(&self) -> bool {
        self.invariant_factors.is_empty()
    }

    /// Quadratic value of a coefficient combination of the generators.
    fn q_of(&self, c: &[i64]) -> BigRational {
        let mut s = BigRational::zero();
        for i in 0..c.len() {
            for j in 0..c.len() {
                let cij = BigRational::from_integer(BigInt::from(c[i] * c[j]));
                if i == j {
                    s += cij * &self.qvalues[i];
                } else {
                    s += cij * &self.bilinear[i][j];
                }
            }
        }
        reduce_mod(&s, if self.odd { 1 } else { 2 })
    }

    fn b_of(&self, c: &[i64], d: &[i64]) -> BigRational {
        let mut s = BigRational::zero();
        for i in 0..c.len() {
            for j in 0..d.len() {
                let v = if i == j { self.qvalues[i].clone() } else { self.bilinear[i][j].clone() };
                s += BigRational::from_integer(BigInt::from(c[i] * d[j])) * v;
            }
        }
        reduce_mod(&s, 1)
    }

    /// Decides whether two discriminant forms are isomorphic by searching
    /// generator images. Groups of order above `limit` are refused.
    pub fn is_isomorphic(&self, other: &DiscGroup, limit: u64) -> Result<bool> {
        if self.invariant_factors != other.invariant_factors || self.odd != other.odd {
            return Ok(false);
        }
        let order = self.order().to_u64().unwrap_or(u64::MAX);
        if order > limit {
            return Err(Error::Budget(format!("discriminant group of order {order} exceeds {limit}")));
        }
        let factors: Vec<i64> = self.invariant_factors.iter().map(|x| x.to_i64().unwrap()).collect();
        let elements = enumerate_group(&factors);
        let modulus = if self.odd { 1 } else { 2 };
        let my_q: Vec<BigRational> = self.qvalues.iter().map(|q| reduce_mod(q, modulus)).collect();
        let mut candidates: Vec<Vec<&Vec<i64>>> = Vec::new();
        for (i, &d) in factors.iter().enumerate() {
            let c: Vec<&Vec<i64>> = elements
                .iter()
                .filter(|e| element_order(e, &factors) == d && other.q_of(e) == my_q[i])
                .collect();
            candidates.push(c);
        }
        let mut chosen: Vec<&Vec<i64>> = Vec::new();
        Ok(self.assign_images(other, &factors, &candidates, &mut chosen))
    }

    fn assign_images<'a>(
        &self,
        other: &DiscGroup,
        factors: &[i64],
        candidates: &[Vec<&'a Vec<i64>>],
        chosen: &mut Vec<&'a Vec<i64>>,
    ) -> bool {
        let i = chosen.len();
        if i == factors.len() {
            return images_generate(chosen, factors);
        }
        for &c in &candidates[i] {
            let ok = (0..i).all(|j| other.b_of(chosen[j], c) == reduce_mod(&self.bilinear[j][i], 1));
            if ok {
                chosen.push(c);
                if self.assign_images(other, factors, candidates, chosen) {
                    return true;
                }
                chosen.pop();
            }
        }
        false
    }
}

fn enumerate_group(factors: &[i64]) -> Vec<Vec<i64>> {
    let mut out = vec![vec![]];
    for &d in factors {
        let mut next = Vec::new();
        for e in &out {
            for k in 0..d {
                let mut e2 = e.clone();
                e2.push(k);
                next.push(e2);
            }
        }
        out = next;
    }
    out
}

fn element_order(e: &[i64], factors: &[i64]) -> i64 {
    e.iter().zip(factors).fold(1, |acc, (&x, &d)| acc.lcm(&(d / d.gcd(&x))))
}

fn images_generate(images: &[&Vec<i64>], factors: &[i64]) -> bool {
    // A homomorphism between groups of equal order is bijective iff injective.
    let elements = enumerate_group(factors);
    let mut seen = std::collections::HashSet::new();
    for e in &elements {
        let mut img = vec![0i64; factors.len()];
        for (i, &c) in e.iter().enumerate() {
            for (k, &d) in factors.iter().enumerate() {
                img[k] = (img[k] + c * images[i][k]).rem_euclid(d);
            }
        }
        if !seen.insert(img) {
            return false;
        }
    }
    true
}

/// Inertia of a symmetric integral form, by exact symmetric elimination.
pub fn signature(l: &IntLattice) -> Signature {
    let n = l.rank();
    let mut a: Vec<QVector> = matrix::to_rational(l.gram());
    let mut active: Vec<usize> = (0..n).collect();
    let (mut pos, mut neg) = (0, 0);
    while !active.is_empty() {
        let piv = active.iter().copied().find(|&i| !a[i][i].is_zero());
        let p = match piv {
            Some(p) => p,
            None => {
                // All diagonal entries vanish: combine two coupled directions.
                let pair = active
                    .iter()
                    .flat_map(|&i| active.iter().map(move |&j| (i, j)))
                    .find(|&(i, j)| i != j && !a[i][j].is_zero());
                let Some((i, j)) = pair else { break };
                // Basis change x_i ← x_i + x_j.
                for k in 0..n {
                    let v = a[j][k].clone();
                    a[i][k] += v;
                }
                for k in 0..n {
                    let v = a[k][j].clone();
                    a[k][i] += v;
                }
                i
            }
        };
        let d = a[p][p].clone();
        if d.is_positive() {
            pos += 1;
        } else {
            neg += 1;
        }
        active.retain(|&i| i != p);
        for &i in &active {
            if a[i][p].is_zero() {
                continue;
            }
            let f = &a[i][p] / &d;
            for &j in &active {
                let v = &f * &a[p][j];
                a[i][j] -= v;
            }
        }
        for &i in &active {
            a[i][p] = BigRational::zero();
            a[p][i] = BigRational::zero();
        }
    }
    Signature { pos, neg, null: n - pos - neg }
}

/// Discriminant group `L*/L` with its quadratic form.
pub fn disc_group(l: &IntLattice) -> Result<DiscGroup> {
    if l.is_degenerate() {
        return Err(Error::Degenerate("discriminant group of a degenerate lattice".into()));
    }
    let s = snf::smith(l.gram());
    let mut generators = Vec::new();
    let mut factors = Vec::new();
    for i in 0..l.rank() {
        let d = s.d.get(i, i).clone();
        if d.is_one() {
            continue;
        }
        let col = s.v.col(i);
        let g: QVector = col.iter().map(|x| BigRational::new(x.clone(), d.clone())).collect();
        generators.push(g);
        factors.push(d);
    }
    let odd = !l.is_even();
    let qvalues = generators.iter().map(|g| reduce_mod(&matrix::qbilinear(l.gram(), g, g), 2)).collect();
    let bilinear = generators
        .iter()
        .map(|g| generators.iter().map(|h| reduce_mod(&matrix::qbilinear(l.gram(), g, h), 1)).collect())
        .collect();
    Ok(DiscGroup { invariant_factors: factors, qvalues, bilinear, odd, generators })
}

/// Saturated sublattice of ambient vectors orthogonal to every generator.
pub fn orthogonal_complement(s: &Sublattice) -> Sublattice {
    let amb = &s.ambient;
    if s.rank() == 0 {
        return amb.full();
    }
    let rows = &s.basis.transpose() * amb.gram();
    Sublattice { ambient: amb.clone(), basis: snf::kernel(&rows) }
}

/// Saturation of a sublattice.
pub fn saturate(s: &Sublattice) -> Sublattice {
    s.saturate()
}

/// Primitivity test.
pub fn is_primitive(s: &Sublattice) -> bool {
    s.is_primitive()
}

/// Quotient `L / S` of a lattice by a primitive totally degenerate sublattice,
/// with fixed representatives and the projection map.
#[derive(Clone, Debug)]
pub struct Quotient {
    /// Induced lattice on `L / S`.
    pub lattice: IntLattice,
    /// Representatives (ambient columns) of the quotient basis.
    pub reps: Mat,
    /// Inverse of the basis `[S | reps]`.
    pub inverse: Mat,
    /// Rank of `S`.
    pub killed: usize,
}

impl Quotient {
    /// Image of an ambient vector in quotient coordinates.
    pub fn project(&self, v: &[BigInt]) -> Vector {
        self.inverse.apply(v)[self.killed..].to_vec()
    }

    /// Coordinates with respect to `[S | reps]`.
    pub fn full_coords(&self, v: &[BigInt]) -> Vector {
        self.inverse.apply(v)
    }

    /// Projection matrix (quotient rank × ambient rank).
    pub fn projection_matrix(&self) -> Mat {
        let n = self.inverse.rows();
        self.inverse.block(self.killed..n, 0..n)
    }
}

/// Induced form on `L / S` when `S` pairs to zero with all of `L`.
pub fn quotient_by_radical_part(l: &IntLattice, s: &Sublattice) -> Result<Quotient> {
    if !(l.gram() * &s.basis).is_zero() {
        return Err(Error::Precondition("sublattice is not totally degenerate".into()));
    }
    quotient_with_reps(l, s)
}

/// Quotient by a primitive sublattice using SNF-canonical representatives.
/// The induced Gram matrix is only meaningful when `S` is radical for the
/// pairings being used; callers enforce that.
pub fn quotient_with_reps(l: &IntLattice, s: &Sublattice) -> Result<Quotient> {
    if !s.is_primitive() {
        return Err(Error::NotPrimitive("quotient sublattice".into()));
    }
    let full = if s.rank() == 0 {
        Mat::identity(l.rank())
    } else {
        snf::extend_to_basis(&s.basis).ok_or_else(|| Error::NotPrimitive("quotient sublattice".into()))?
    };
    let k = s.rank();
    let n = l.rank();
    let reps = full.block(0..n, k..n);
    let inverse = full.inverse_unimodular()?;
    let lattice = l.rebased(&reps);
    Ok(Quotient { lattice, reps, inverse, killed: k })
}

// ---------------------------------------------------------------------------
// Standard lattices

/// Negated Cartan matrix of type A_n.
pub fn root_a(n: usize) -> IntLattice {
    let mut g = Mat::zeros(n, n);
    for i in 0..n {
        g.set(i, i, BigInt::from(-2));
        if i + 1 < n {
            g.set(i, i + 1, BigInt::one());
            g.set(i + 1, i, BigInt::one());
        }
    }
    IntLattice { gram: g, labels: None }
}

/// Negated Cartan matrix of type D_n (chain 1..n−1, node n attached to n−2).
pub fn root_d(n: usize) -> IntLattice {
    assert!(n >= 2, "D_n needs n >= 2");
    let mut g = Mat::zeros(n, n);
    for i in 0..n {
        g.set(i, i, BigInt::from(-2));
    }
    let mut link = |i: usize, j: usize| {
        g.set(i, j, BigInt::one());
        g.set(j, i, BigInt::one());
    };
    for i in 0..n.saturating_sub(2) {
        link(i, i + 1);
    }
    if n >= 3 {
        link(n - 3, n - 1);
    }
    IntLattice { gram: g, labels: None }
}

/// Negated Cartan matrix of the T-shaped diagram E_n (n ≥ 3): chain
/// 1–3–4–…–n with node 2 attached to node 4.
pub fn root_e(n: usize) -> IntLattice {
    assert!(n >= 4, "E_n needs n >= 4");
    let mut g = Mat::zeros(n, n);
    for i in 0..n {
        g.set(i, i, BigInt::from(-2));
    }
    let mut link = |i: usize, j: usize| {
        g.set(i - 1, j - 1, BigInt::one());
        g.set(j - 1, i - 1, BigInt::one());
    };
    link(1, 3);
    link(2, 4);
    for i in 3..n {
        link(i, i + 1);
    }
    IntLattice { gram: g, labels: None }
}

/// Hyperbolic plane scaled by `m`.
pub fn hyperbolic(m: i64) -> IntLattice {
    IntLattice::from_i64(&[vec![0, m], vec![m, 0]])
}

/// Diagonal lattice with `p` entries +1 and `q` entries −1.
pub fn odd_unimodular(p: usize, q: usize) -> IntLattice {
    let d: Vec<BigInt> = std::iter::repeat(BigInt::one())
        .take(p)
        .chain(std::iter::repeat(-BigInt::one()).take(q))
        .collect();
    IntLattice { gram: Mat::diag(&d), labels: None }
}

/// Standard lattice by name: `A17`, `D16`, `E8`, `E10`, `H`, `U`, `H(2)`,
/// `I(1,9)`, `II(1,1)`, `<2>`, `0`, a JSON Gram literal such as
/// `[[-2,1],[1,-4]]`, or `+`-joined direct sums of these.
pub fn standard_lattice(name: &str) -> Result<IntLattice> {
    let parts = split_sum(name);
    let mut out = IntLattice::zero();
    for p in parts {
        out = out.direct_sum(&standard_summand(p.trim(), name)?);
    }
    Ok(out)
}

fn split_sum(name: &str) -> Vec<&str> {
    // Split on '+' outside brackets.
    let mut parts = Vec::new();
    let mut depth = 0i32;
    let mut start = 0;
    for (i, ch) in name.char_indices() {
        match ch {
            '[' | '(' | '<' => depth += 1,
            ']' | ')' | '>' => depth -= 1,
            '+' if depth == 0 => {
                parts.push(&name[start..i]);
                start = i + 1;
            }
            _ => {}
        }
    }
    parts.push(&name[start..]);
    parts
}

fn standard_summand(tok: &str, whole: &str) -> Result<IntLattice> {
    let bad = || Error::UnknownLattice(whole.to_string());
    if tok == "H" || tok == "U" || tok == "II(1,1)" {
        return Ok(hyperbolic(1));
    }
    if tok == "0" {
        return Ok(IntLattice::zero());
    }
    if let Some(rest) = tok.strip_prefix("H(").and_then(|r| r.strip_suffix(')')) {
        let m: i64 = rest.trim().parse().map_err(|_| bad())?;
        return Ok(hyperbolic(m));
    }
    if let Some(rest) = tok.strip_prefix("I(").and_then(|r| r.strip_suffix(')')) {
        let (p, q) = rest.split_once(',').ok_or_else(bad)?;
        let p: usize = p.trim().parse().map_err(|_| bad())?;
        let q: usize = q.trim().parse().map_err(|_| bad())?;
        return Ok(odd_unimodular(p, q));
    }
    if let Some(rest) = tok.strip_prefix('<').and_then(|r| r.strip_suffix('>')) {
        let k: i64 = rest.trim().parse().map_err(|_| bad())?;
        return Ok(IntLattice::from_i64(&[vec![k]]));
    }
    if tok.starts_with('[') {
        let rows: Vec<Vec<i64>> = serde_json::from_str(tok).map_err(|_| bad())?;
        let m = Mat::from_rows(rows.iter().map(|r| ivec(r)).collect()).map_err(|_| bad())?;
        if !m.is_square() {
            return Err(bad());
        }
        return IntLattice::new(m);
    }
    let (letter, num) = tok.split_at(1);
    let n: usize = num.parse().map_err(|_| bad())?;
    match letter {
        "A" if n >= 1 => Ok(root_a(n)),
        "D" if n >= 2 => Ok(root_d(n)),
        "E" if n >= 4 => Ok(root_e(n)),
        _ => Err(bad()),
    }
}

/// The K3 lattice `H ⊕ H ⊕ H ⊕ E8 ⊕ E8` in this block order.
pub fn k3_lattice() -> IntLattice {
    standard_lattice("H+H+H+E8+E8").expect("standard name")
}

// ---------------------------------------------------------------------------
// Short vectors, roots and isometries

fn rat(x: &BigInt) -> BigRational {
    BigRational::from_integer(x.clone())
}

/// Greedy pairwise size reduction of a positive definite Gram matrix.
/// Returns a unimodular `T` such that `Tᵀ G T` has small diagonal.
pub fn pairwise_reduce(g: &Mat) -> Mat {
    let n = g.rows();
    let mut t = Mat::identity(n);
    let mut cur = g.clone();
    loop {
        let mut changed = false;
        for i in 0..n {
            for j in 0..n {
                if i == j || cur.get(j, j).is_zero() {
                    continue;
                }
                // Nearest integer to G_ij / G_jj.
                let num: BigInt = cur.get(i, j) * 2 + cur.get(j, j);
                let r: BigInt = num.div_floor(&(cur.get(j, j) * 2));
                if r.is_zero() {
                    continue;
                }
                let new_norm = cur.get(i, i) - cur.get(i, j) * &r * 2 + &r * &r * cur.get(j, j);
                if new_norm < *cur.get(i, i) {
                    // b_i ← b_i − r b_j
                    let mut step = Mat::identity(n);
                    step.set(j, i, -r.clone());
                    t = &t * &step;
                    cur = g.congruence(&t);
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    // Sort by increasing norm.
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&a, &b| cur.get(a, a).cmp(cur.get(b, b)));
    t.select_cols(&idx)
}

/// All nonzero vectors `x` with `xᵀ G x ≤ bound` for a positive definite `G`,
/// by exact Fincke–Pohst enumeration. Both `x` and `−x` are returned.
pub fn short_vectors(g: &Mat, bound: &BigInt) -> Result<Vec<Vector>> {
    let n = g.rows();
    if n == 0 {
        return Ok(vec![]);
    }
    let sig = signature(&IntLattice::new(g.clone())?);
    if sig.pos != n {
        return Err(Error::Indefinite("short vectors need a positive definite form".into()));
    }
    let t = pairwise_reduce(g);
    let h = g.congruence(&t);
    // Quadratic-form completion: q(x) = Σ d_i (x_i + Σ_{j>i} mu_ij x_j)^2.
    let mut a: Vec<QVector> = matrix::to_rational(&h);
    let mut d = vec![BigRational::zero(); n];
    let mut mu = vec![vec![BigRational::zero(); n]; n];
    for i in 0..n {
        d[i] = a[i][i].clone();
        for j in i + 1..n {
            mu[i][j] = &a[i][j] / &d[i];
        }
        for j in i + 1..n {
            for k in i + 1..n {
                let v = &mu[i][j] * &a[i][k];
                a[j][k] -= v;
            }
        }
    }
    let mut out = Vec::new();
    let mut x = vec![BigInt::zero(); n];
    let bound = rat(bound);
    enumerate_level(n - 1, &bound, &d, &mu, &mut x, &mut out);
    Ok(out.into_iter().map(|v| t.apply(&v)).collect())
}

fn enumerate_level(
    i: usize,
    remaining: &BigRational,
    d: &[BigRational],
    mu: &[QVector],
    x: &mut Vector,
    out: &mut Vec<Vector>,
) {
    let n = x.len();
    let mut c = BigRational::zero();
    for j in i + 1..n {
        if !x[j].is_zero() {
            c -= &mu[i][j] * rat(&x[j]);
        }
    }
    let limit = remaining / &d[i];
    let fits = |v: &BigInt| {
        let diff = rat(v) - &c;
        &diff * &diff <= limit
    };
    let start = c.floor().to_integer();
    let mut vals = Vec::new();
    let mut v = start.clone();
    while fits(&v) {
        vals.push(v.clone());
        v -= 1;
    }
    let mut v = start + 1;
    while fits(&v) {
        vals.push(v.clone());
        v += 1;
    }
    for v in vals {
        let diff = rat(&v) - &c;
        let rem = remaining - &d[i] * &diff * &diff;
        x[i] = v;
        if i == 0 {
            if x.iter().any(|e| !e.is_zero()) {
                out.push(x.clone());
            }
        } else {
            enumerate_level(i - 1, &rem, d, mu, x, out);
        }
    }
    x[i] = BigInt::zero();
}

/// Default very irrational vector `(1, N, N², …)` with `N = 10⁶`.
pub fn default_generic_vector(n: usize) -> QVector {
    let big = BigInt::from(1_000_000);
    let mut p = BigInt::one();
    (0..n)
        .map(|_| {
            let v = rat(&p);
            p *= &big;
            v
        })
        .collect()
}

/// Roots (vectors of square −2) of a negative definite lattice having positive
/// pairing with `h`; one of each pair `±δ`.
pub fn positive_roots(l: &IntLattice, h: Option<&[BigRational]>) -> Result<Vec<Vector>> {
    let sig = l.signature();
    if sig.neg != l.rank() {
        return Err(Error::Indefinite("root enumeration needs a negative definite lattice".into()));
    }
    let default;
    let h = match h {
        Some(h) => h,
        None => {
            default = default_generic_vector(l.rank());
            &default
        }
    };
    let neg = -l.gram();
    let two = BigInt::from(2);
    let mut out = Vec::new();
    for v in short_vectors(&neg, &two)? {
        if neg.bilinear(&v, &v) != two {
            continue;
        }
        let pairing = matrix::qbilinear(l.gram(), &matrix::to_qvec(&v), h);
        if pairing.is_zero() {
            return Err(Error::Precondition("chosen vector is orthogonal to a root".into()));
        }
        if pairing.is_positive() {
            out.push(v);
        }
    }
    out.sort();
    Ok(out)
}

/// Simple roots: positive roots that are not a sum of two positive roots.
pub fn simple_roots(l: &IntLattice, h: Option<&[BigRational]>) -> Result<Vec<Vector>> {
    let pos = positive_roots(l, h)?;
    let set: std::collections::HashSet<&Vector> = pos.iter().collect();
    let simple = pos
        .iter()
        .filter(|r| !pos.iter().any(|a| a != *r && set.contains(&matrix::vsub(r, a))))
        .cloned()
        .collect();
    Ok(simple)
}

/// Names the root system spanned by the roots of a negative definite lattice,
/// e.g. `"A17"` or `"D16+A1"`, or `"0"` when there are no roots.
pub fn root_system_name(l: &IntLattice) -> Result<String> {
    let simple = simple_roots(l, None)?;
    Ok(dynkin_name(l, &simple))
}

/// Dynkin type of a set of simple roots.
pub fn dynkin_name(l: &IntLattice, simple: &[Vector]) -> String {
    let n = simple.len();
    let adj: Vec<Vec<usize>> = (0..n)
        .map(|i| (0..n).filter(|&j| j != i && !l.pair(&simple[i], &simple[j]).is_zero()).collect())
        .collect();
    let mut seen = vec![false; n];
    let mut parts: Vec<(char, usize)> = Vec::new();
    for s in 0..n {
        if seen[s] {
            continue;
        }
        let mut comp = vec![s];
        seen[s] = true;
        let mut k = 0;
        while k < comp.len() {
            for &j in &adj[comp[k]] {
                if !seen[j] {
                    seen[j] = true;
                    comp.push(j);
                }
            }
            k += 1;
        }
        let size = comp.len();
        let branch: Vec<usize> = comp.iter().copied().filter(|&v| adj[v].len() >= 3).collect();
        if branch.is_empty() {
            parts.push(('A', size));
        } else {
            let b = branch[0];
            let mut arms: Vec<usize> = adj[b]
                .iter()
                .map(|&start| {
                    let (mut prev, mut cur, mut len) = (b, start, 1);
                    loop {
                        let next: Vec<usize> = adj[cur].iter().copied().filter(|&x| x != prev).collect();
                        if next.len() != 1 {
                            break len;
                        }
                        prev = cur;
                        cur = next[0];
                        len += 1;
                    }
                })
                .collect();
            arms.sort();
            if arms[0] == 1 && arms[1] == 1 {
                parts.push(('D', size));
            } else {
                parts.push(('E', size));
            }
        }
    }
    if parts.is_empty() {
        return "0".into();
    }
    parts.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    parts.iter().map(|(c, k)| format!("{c}{k}")).collect::<Vec<_>>().join("+")
}

/// Searches for an isometry `P: L1 → L2` (so `Pᵀ G2 P = G1`) of definite
/// lattices with `P vₖ = wₖ` for each fixed pair. `Ok(None)` certifies that
/// no such isometry exists.
pub fn definite_isometry(l1: &IntLattice, l2: &IntLattice, fixed: &[(Vector, Vector)]) -> Result<Option<Mat>> {
    let n = l1.rank();
    if n != l2.rank() {
        return Ok(None);
    }
    if n == 0 {
        return Ok(Some(Mat::zeros(0, 0)));
    }
    let s1 = l1.signature();
    let s2 = l2.signature();
    let sign = if s1.pos == n {
        1
    } else if s1.neg == n {
        -1
    } else {
        return Err(Error::Indefinite("isometry search needs definite lattices".into()));
    };
    if s2 != s1 {
        return Ok(None);
    }
    if l1.det() != l2.det() || l1.is_even() != l2.is_even() {
        return Ok(None);
    }
    for (v, w) in fixed {
        if l1.norm(v) != l2.norm(w) {
            return Ok(None);
        }
    }
    let sgn = BigInt::from(sign);
    let g1 = l1.gram().scale(&sgn);
    let g2 = l2.gram().scale(&sgn);
    let t1 = pairwise_reduce(&g1);
    let h1 = g1.congruence(&t1);
    let max_norm = (0..n).map(|i| h1.get(i, i).clone()).max().unwrap();
    let mut by_norm: HashMap<i64, Vec<Vec<i64>>> = HashMap::new();
    for v in short_vectors(&g2, &max_norm)? {
        let nv = g2.bilinear(&v, &v).to_i64().ok_or_else(|| Error::Budget("norm overflow".into()))?;
        let vi: Option<Vec<i64>> = v.iter().map(|x| x.to_i64()).collect();
        by_norm.entry(nv).or_default().push(vi.ok_or_else(|| Error::Budget("entry overflow".into()))?);
    }
    let small = |m: &Mat| m.to_i64_rows().ok_or_else(|| Error::Budget("Gram entries overflow".into()));
    let g2s = small(&g2)?;
    let h1s = small(&h1)?;
    // Fixed-pair constraints: ⟨w, x_i⟩₂ must equal ⟨v, b_i⟩₁ for the reduced basis b_i.
    let basis1 = t1.col_vecs();
    let mut constraints: Vec<(Vec<i64>, Vec<i64>)> = Vec::new();
    for (v, w) in fixed {
        let g2w: Option<Vec<i64>> = g2.apply(w).iter().map(|x| x.to_i64()).collect();
        let targets: Option<Vec<i64>> = basis1.iter().map(|b| g1.bilinear(v, b).to_i64()).collect();
        match (g2w, targets) {
            (Some(a), Some(b)) => constraints.push((a, b)),
            _ => return Err(Error::Budget("fixed vector overflow".into())),
        }
    }
    let mut cands: Vec<Vec<(Vec<i64>, Vec<i64>)>> = Vec::new();
    for i in 0..n {
        let norm = h1s[i][i];
        let list = by_norm.get(&norm).cloned().unwrap_or_default();
        let filtered: Vec<(Vec<i64>, Vec<i64>)> = list
            .into_iter()
            .filter(|x| constraints.iter().all(|(g2w, t)| dot64(g2w, x) == t[i]))
            .map(|x| {
                let gx = (0..n).map(|r| dot64(&g2s[r], &x)).collect();
                (x, gx)
            })
            .collect();
        if filtered.is_empty() {
            return Ok(None);
        }
        cands.push(filtered);
    }
    let mut chosen: Vec<usize> = Vec::new();
    if !backtrack(&h1s, &cands, &mut chosen) {
        return Ok(None);
    }
    let images: Vec<Vector> = chosen.iter().enumerate().map(|(i, &k)| ivec(&cands[i][k].0)).collect();
    let x = Mat::from_cols(n, &images);
    let p = &x * &t1.inverse_unimodular()?;
    if l2.gram().congruence(&p) != *l1.gram() {
        return Err(Error::Precondition("isometry post-verification failed".into()));
    }
    for (v, w) in fixed {
        if p.apply(v) != *w {
            return Err(Error::Precondition("fixed-pair post-verification failed".into()));
        }
    }
    Ok(Some(p))
}

fn dot64(a: &[i64], b: &[i64]) -> i64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn backtrack(h1: &[Vec<i64>], cands: &[Vec<(Vec<i64>, Vec<i64>)>], chosen: &mut Vec<usize>) -> bool {
    let i = chosen.len();
    if i == cands.len() {
        return true;
    }
    for (k, (x, _)) in cands[i].iter().enumerate() {
        let ok = (0..i).all(|j| dot64(x, &cands[j][chosen[j]].1) == h1[i][j]);
        if ok {
            chosen.push(k);
            if backtrack(h1, cands, chosen) {
                return true;
            }
            chosen.pop();
        }
    }
    false
}

/// Descriptive summary of a lattice, used by reports.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq, Eq)]
pub struct LatticeInfo {
    /// Rank.
    pub rank: usize,
    /// Inertia.
    pub signature: Signature,
    /// Determinant as a decimal string.
    pub det: String,
    /// Parity.
    pub even: bool,
    /// Unimodularity.
    pub unimodular: bool,
    /// Invariant factors of the discriminant group (empty when degenerate or unimodular).
    pub discriminant: Vec<String>,
}

/// Computes the [`LatticeInfo`] summary.
pub fn info(l: &IntLattice) -> LatticeInfo {
    let discriminant = match disc_group(l) {
        Ok(d) => d.invariant_factors.iter().map(|x| x.to_string()).collect(),
        Err(_) => vec![],
    };
    LatticeInfo {
        rank: l.rank(),
        signature: l.signature(),
        det: l.det().to_string(),
        even: l.is_even(),
        unimodular: l.is_unimodular(),
        discriminant,
    }
}

/// Decides isometry of two lattices using exact search when both are definite,
/// and rank, inertia, parity and discriminant forms otherwise. For even
/// indefinite lattices with rank at least the discriminant length plus two,
/// these invariants determine the isometry class; `None` is returned when that
/// criterion does not apply and no definite search is possible.
pub fn same_isometry_class(l1: &IntLattice, l2: &IntLattice) -> Result<Option<bool>> {
    if l1.rank() != l2.rank() || l1.signature() != l2.signature() || l1.is_even() != l2.is_even() {
        return Ok(Some(false));
    }
    let sig = l1.signature();
    if sig.null > 0 {
        return Ok(None);
    }
    if sig.pos == 0 || sig.neg == 0 {
        return Ok(Some(definite_isometry(l1, l2, &[])?.is_some()));
    }
    let d1 = disc_group(l1)?;
    let d2 = disc_group(l2)?;
    if !d1.is_isomorphic(&d2, 1 << 16)? {
        return Ok(Some(false));
    }
    if l1.is_even() && l1.rank() >= d1.invariant_factors.len() + 2 {
        return Ok(Some(true));
    }
    if !l1.is_even() && d1.is_trivial() {
        // Odd indefinite unimodular lattices are diagonal.
        return Ok(Some(true));
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn named_lattices() {
        assert_eq!(standard_lattice("A1").unwrap().gram(), &Mat::from_i64(&[vec![-2]]));
        let h = standard_lattice("H").unwrap();
        assert_eq!(h.signature(), Signature { pos: 1, neg: 1, null: 0 });
        assert!(h.is_even() && h.is_unimodular());
        let e8 = standard_lattice("E8").unwrap();
        assert_eq!(e8.rank(), 8);
        assert_eq!(e8.det(), BigInt::one());
        assert!(e8.is_even());
        assert_eq!(e8.signature(), Signature { pos: 0, neg: 8, null: 0 });
        let s = standard_lattice("H+E8+E8").unwrap();
        assert_eq!(s.signature(), Signature { pos: 1, neg: 17, null: 0 });
        assert!(standard_lattice("Q7").is_err());
        let t2 = standard_lattice("[[-2,1],[1,-4]]").unwrap();
        assert_eq!(t2.det(), BigInt::from(7));
        assert_eq!(standard_lattice("I(1,9)").unwrap().signature(), Signature { pos: 1, neg: 9, null: 0 });
        assert_eq!(standard_lattice("H(2)").unwrap().gram(), &Mat::from_i64(&[vec![0, 2], vec![2, 0]]));
    }

    #[test]
    fn extended_e_series_determinants() {
        // det of the negated Cartan matrix of E_n is (−1)^n (9 − n).
        for n in 6..=18usize {
            let sign = if n % 2 == 0 { 1 } else { -1 };
            assert_eq!(root_e(n).det(), BigInt::from(sign * (9 - n as i64)), "E{n}");
        }
        assert_eq!(root_e(10).signature(), Signature { pos: 1, neg: 9, null: 0 });
        assert_eq!(root_e(9).signature().null, 1);
    }

    #[test]
    fn zero_form_signature() {
        let z = IntLattice::from_i64(&[vec![0, 0], vec![0, 0]]);
        assert_eq!(z.signature(), Signature { pos: 0, neg: 0, null: 2 });
    }

    #[test]
    fn discriminant_groups() {
        let a1 = disc_group(&root_a(1)).unwrap();
        assert_eq!(a1.invariant_factors, vec![BigInt::from(2)]);
        assert_eq!(a1.qvalues[0], BigRational::new(BigInt::from(3), BigInt::from(2)));
        assert!(disc_group(&root_e(8)).unwrap().is_trivial());
        assert_eq!(disc_group(&root_a(17)).unwrap().invariant_factors, vec![BigInt::from(18)]);
    }

    #[test]
    fn complements() {
        let h = standard_lattice("H").unwrap();
        let e = h.sub(Mat::column(&ivec(&[1, 0]))).unwrap();
        let c = e.orthogonal_complement();
        assert_eq!(c.rank(), 1);
        assert!(c.same_span(&e));
        let ha = standard_lattice("H+A1").unwrap();
        let f = ha.sub(Mat::column(&ivec(&[0, 1, 0]))).unwrap();
        let c = f.orthogonal_complement();
        assert_eq!(c.rank(), 2);
        assert!(c.contains(&ivec(&[0, 1, 0])) && c.contains(&ivec(&[0, 0, 1])));
        assert_eq!(ha.full().orthogonal_complement().rank(), 0);
    }

    #[test]
    fn saturation_of_doubled_vector() {
        let h = standard_lattice("H").unwrap();
        let s = h.sub(Mat::column(&ivec(&[2, 0]))).unwrap();
        assert!(!s.is_primitive());
        assert_eq!(s.saturate().generators(), vec![ivec(&[1, 0])]);
    }

    #[test]
    fn quotient_by_zero_summand() {
        let l = IntLattice::from_i64(&[vec![0, 1, 0], vec![1, 0, 0], vec![0, 0, 0]]);
        let s = l.sub(Mat::column(&ivec(&[0, 0, 1]))).unwrap();
        let q = quotient_by_radical_part(&l, &s).unwrap();
        assert_eq!(q.lattice.det(), BigInt::from(-1));
        assert!(q.lattice.is_even());
        let bad = l.sub(Mat::column(&ivec(&[1, 0, 0]))).unwrap();
        assert!(quotient_by_radical_part(&l, &bad).is_err());
    }

    #[test]
    fn root_counts() {
        assert_eq!(positive_roots(&root_a(1), None).unwrap().len(), 1);
        assert_eq!(positive_roots(&root_a(2), None).unwrap().len(), 3);
        assert_eq!(positive_roots(&root_e(8), None).unwrap().len(), 120);
        assert_eq!(simple_roots(&root_e(8), None).unwrap().len(), 8);
        assert_eq!(root_system_name(&standard_lattice("D16+A1").unwrap()).unwrap(), "D16+A1");
        assert_eq!(root_system_name(&standard_lattice("E7").unwrap()).unwrap(), "E7");
    }

    #[test]
    fn isometry_search_examples() {
        let a2 = root_a(2);
        assert!(definite_isometry(&a2, &a2, &[]).unwrap().is_some());
        let a1a1 = standard_lattice("A1+A1").unwrap();
        let m22 = standard_lattice("<-2>+<-2>").unwrap();
        assert!(definite_isometry(&a1a1, &m22, &[]).unwrap().is_some());
        assert!(definite_isometry(&root_a(4), &root_d(4), &[]).unwrap().is_none());
        let e8 = root_e(8);
        let p = definite_isometry(&e8, &e8, &[]).unwrap().unwrap();
        assert_eq!(e8.gram().congruence(&p), *e8.gram());
    }
}
