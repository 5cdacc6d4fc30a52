//! Pseudolattices (free groups with a nondegenerate, possibly asymmetric
//! integral form), spherical homomorphisms into the elliptic pseudolattice,
//! surface-like structure, canonical classes, and detection, classification
//! and explicit isomorphisms of quasi del Pezzo homomorphisms.

use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{self, IntLattice, Signature, Sublattice};
use crate::matrix::{self, ivec, Mat, QVector, Vector};
use crate::snf;

/// Free abelian group with a nondegenerate integral bilinear form `⟨u,v⟩ = uᵀχv`.
#[derive(Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pseudolattice {
    gram: Mat,
}

impl fmt::Debug for Pseudolattice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Pseudolattice{:?}", self.gram)
    }
}

impl Pseudolattice {
    /// Pseudolattice with the given (square, nonsingular) Gram matrix.
    pub fn new(gram: Mat) -> Result<Self> {
        if !gram.is_square() {
            return Err(Error::Dimension("Gram matrix must be square".into()));
        }
        if gram.rows() > 0 && gram.det().is_zero() {
            return Err(Error::Degenerate("pseudolattice form must be nondegenerate".into()));
        }
        Ok(Pseudolattice { gram })
    }

    /// Gram matrix.
    pub fn gram(&self) -> &Mat {
        &self.gram
    }

    /// Rank.
    pub fn rank(&self) -> usize {
        self.gram.rows()
    }

    /// True when `|det χ| = 1`.
    pub fn is_unimodular(&self) -> bool {
        self.gram.det().abs().is_one()
    }

    /// Pairing `⟨u, v⟩`.
    pub fn pair(&self, u: &[BigInt], v: &[BigInt]) -> BigInt {
        self.gram.bilinear(u, v)
    }

    /// Serre operator `S = χ⁻¹χᵀ`, the unique map with `⟨u,v⟩ = ⟨v,Su⟩`.
    pub fn serre_operator(&self) -> Result<Mat> {
        let inv = self.gram.inverse_unimodular().map_err(|_| Error::NotUnimodular("Serre operator".into()))?;
        let s = &inv * &self.gram.transpose();
        debug_assert_eq!(self.gram, &s.transpose() * &self.gram.transpose());
        Ok(s)
    }
}

/// Gram matrix of the elliptic pseudolattice in the basis `(a, b)`.
pub fn elliptic_gram() -> Mat {
    Mat::from_i64(&[vec![0, -1], vec![1, 0]])
}

/// Basis `(a, b)` of the elliptic pseudolattice with `⟨a,b⟩ = −1`, `⟨b,a⟩ = 1`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EBasis {
    /// First basis vector, in standard coordinates.
    #[serde(with = "matrix::vec_serde")]
    pub a: Vector,
    /// Second basis vector, in standard coordinates.
    #[serde(with = "matrix::vec_serde")]
    pub b: Vector,
}

impl EBasis {
    /// The standard basis.
    pub fn standard() -> Self {
        EBasis { a: ivec(&[1, 0]), b: ivec(&[0, 1]) }
    }

    /// Basis from two vectors; they must satisfy `⟨a,b⟩ = −1`.
    pub fn new(a: Vector, b: Vector) -> Result<Self> {
        let e = elliptic_gram();
        if a.len() != 2 || b.len() != 2 || e.bilinear(&a, &b) != BigInt::from(-1) {
            return Err(Error::Precondition("(a, b) is not an elliptic basis".into()));
        }
        Ok(EBasis { a, b })
    }

    /// Matrix with columns `a`, `b`.
    pub fn matrix(&self) -> Mat {
        Mat::from_cols(2, &[self.a.clone(), self.b.clone()])
    }

    /// Completes a primitive vector `a` to a basis `(a, b)`.
    pub fn complete(a: &[BigInt]) -> Option<Self> {
        let g = num_integer::Integer::extended_gcd(&a[0], &a[1]);
        if !g.gcd.is_one() {
            return None;
        }
        // det[a b] = a0 b1 − a1 b0 = 1 with b = (−y, x) where x a0 + y a1 = 1.
        let b = vec![-g.y, g.x];
        EBasis::new(a.to_vec(), b).ok()
    }
}

/// The elliptic pseudolattice and its standard basis.
pub fn elliptic_e() -> (Pseudolattice, EBasis) {
    (Pseudolattice { gram: elliptic_gram() }, EBasis::standard())
}

/// Homomorphism of pseudolattices given by an integer matrix (target rank × source rank).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PseudoHom {
    /// Source pseudolattice.
    pub source: Pseudolattice,
    /// Target pseudolattice.
    pub target: Pseudolattice,
    /// Matrix of the map.
    pub matrix: Mat,
}

impl PseudoHom {
    /// Homomorphism with shape checks.
    pub fn new(source: Pseudolattice, target: Pseudolattice, matrix: Mat) -> Result<Self> {
        if matrix.rows() != target.rank() || matrix.cols() != source.rank() {
            return Err(Error::Dimension("hom matrix shape does not match source/target".into()));
        }
        Ok(PseudoHom { source, target, matrix })
    }

    /// Right adjoint `r = χ_G⁻¹ Fᵀ χ_H`, so that `⟨f(u), v⟩ = ⟨u, r(v)⟩`.
    pub fn right_adjoint(&self) -> Result<Mat> {
        let inv = self.source.gram.inverse_unimodular().map_err(|_| Error::NotUnimodular("adjoint needs a unimodular source".into()))?;
        Ok(&(&inv * &self.matrix.transpose()) * &self.target.gram)
    }

    /// Twist `T = id − f r` on the target.
    pub fn twist(&self) -> Result<Mat> {
        let r = self.right_adjoint()?;
        Ok(&Mat::identity(self.target.rank()) - &(&self.matrix * &r))
    }

    /// Cotwist `C = id − r f` on the source.
    pub fn cotwist(&self) -> Result<Mat> {
        let r = self.right_adjoint()?;
        Ok(&Mat::identity(self.source.rank()) - &(&r * &self.matrix))
    }

    /// True when twist and cotwist are invertible over the integers.
    pub fn is_spherical(&self) -> Result<bool> {
        Ok(self.twist()?.det().abs().is_one() && self.cotwist()?.det().abs().is_one())
    }

    /// True when the cotwist equals the Serre operator of the source.
    pub fn is_relative_cy(&self) -> Result<bool> {
        Ok(self.cotwist()? == self.source.serre_operator()?)
    }

    /// The negated homomorphism `−f`.
    pub fn negated(&self) -> PseudoHom {
        PseudoHom { source: self.source.clone(), target: self.target.clone(), matrix: -&self.matrix }
    }

    /// Re-expresses a hom into the elliptic pseudolattice in the coordinates of `basis`.
    pub fn in_basis(&self, basis: &EBasis) -> Result<PseudoHom> {
        let inv = basis.matrix().inverse_unimodular()?;
        Ok(PseudoHom { source: self.source.clone(), target: self.target.clone(), matrix: &inv * &self.matrix })
    }

    /// Image of a source vector.
    pub fn apply(&self, u: &[BigInt]) -> Vector {
        self.matrix.apply(u)
    }
}

/// Dehn twist `T_v(w) = w − ⟨v,w⟩ v` on the elliptic pseudolattice.
pub fn dehn_twist(v: &[BigInt]) -> Mat {
    let e = elliptic_gram();
    let col = Mat::column(v);
    &Mat::identity(2) - &(&(&col * &col.transpose()) * &e)
}

/// The chain `Z(v₁,…,vₙ)` with its map `zᵢ ↦ vᵢ` into the elliptic pseudolattice.
pub fn z_chain(vs: &[Vector]) -> Result<PseudoHom> {
    let e = elliptic_gram();
    for v in vs {
        if v.len() != 2 || !matrix::is_primitive_vector(v) {
            return Err(Error::NotPrimitive(format!("chain vector {v:?}")));
        }
    }
    let n = vs.len();
    let mut g = Mat::identity(n);
    for i in 0..n {
        for j in i + 1..n {
            g.set(i, j, e.bilinear(&vs[i], &vs[j]));
        }
    }
    let f = Mat::from_cols(2, vs);
    PseudoHom::new(Pseudolattice::new(g)?, Pseudolattice::new(e)?, f)
}

/// Chain from machine-integer pairs, e.g. `[[0,1],[3,1],[6,1]]`.
pub fn z_chain_i64(vs: &[[i64; 2]]) -> Result<PseudoHom> {
    z_chain(&vs.iter().map(|v| ivec(v)).collect::<Vec<_>>())
}

/// Glues `f₁` and `sign·f₂` along their common target: block Gram
/// `[[χ₁, F₁ᵀχ_H(sign F₂)], [0, χ₂]]` and hom `[F₁, sign F₂]`.
pub fn glue(f1: &PseudoHom, f2: &PseudoHom, sign2: i64) -> Result<PseudoHom> {
    if f1.target != f2.target {
        return Err(Error::Precondition("glued homs must share their target".into()));
    }
    if sign2 != 1 && sign2 != -1 {
        return Err(Error::Input("gluing sign must be ±1".into()));
    }
    let s = BigInt::from(sign2);
    let f2m = f2.matrix.scale(&s);
    let off = &(&f1.matrix.transpose() * f1.target.gram()) * &f2m;
    let (n1, n2) = (f1.source.rank(), f2.source.rank());
    let mut g = Mat::zeros(n1 + n2, n1 + n2);
    g.paste(0, 0, f1.source.gram());
    g.paste(0, n1, &off);
    g.paste(n1, n1, f2.source.gram());
    let f = f1.matrix.hstack(&f2m);
    PseudoHom::new(Pseudolattice::new(g)?, f1.target.clone(), f)
}

// ---------------------------------------------------------------------------
// Surface-like structure

/// Point-like vector, Néron–Severi lattice and canonical class of a
/// surface-like pseudolattice, in fixed SNF-derived coordinates.
#[derive(Clone, Debug)]
pub struct SurfaceLikeData {
    /// Elliptic basis used.
    pub basis: EBasis,
    /// Hom expressed in the coordinates of `basis`.
    pub hom: PseudoHom,
    /// Point-like vector `p = r(a)`.
    pub pointlike: Vector,
    /// Néron–Severi lattice `p^⊥/p` with the negated form.
    pub ns: IntLattice,
    /// Canonical class in NS coordinates.
    pub canonical: Vector,
    /// Class of `r(b)` in NS coordinates.
    pub rb_class: Vector,
    /// `q(K, K)`.
    pub degree: BigInt,
    /// Representatives in the source of the NS basis.
    pub ns_reps: Mat,
    /// Left inverse of `[p | reps]` (rows: `p`-coefficient, then NS coordinates).
    coords: Mat,
    /// Adjoint matrix in the coordinates of `basis`.
    pub adjoint: Mat,
}

impl SurfaceLikeData {
    /// Rank function `u ↦ ⟨u, p⟩`.
    pub fn rank_of(&self, u: &[BigInt]) -> BigInt {
        self.hom.source.pair(u, &self.pointlike)
    }

    /// NS class of a vector in `p^⊥`.
    pub fn ns_class(&self, u: &[BigInt]) -> Result<Vector> {
        if !self.rank_of(u).is_zero() {
            return Err(Error::Precondition("vector is not orthogonal to the point-like vector".into()));
        }
        let c = self.coords.apply(u);
        let back = self.rep_combination(&c);
        if back != u {
            return Err(Error::Precondition("vector outside p^⊥".into()));
        }
        Ok(c[1..].to_vec())
    }

    fn rep_combination(&self, c: &[BigInt]) -> Vector {
        let mut v = matrix::vscale(&c[0], &self.pointlike);
        for (j, x) in c[1..].iter().enumerate() {
            v = matrix::vadd(&v, &matrix::vscale(x, &self.ns_reps.col(j)));
        }
        v
    }

    /// NS projection as a matrix (NS rank × source rank), valid on `p^⊥`.
    pub fn ns_projection(&self) -> Mat {
        let n = self.coords.rows();
        self.coords.block(1..n, 0..self.coords.cols())
    }

    /// `q(u, v)` on NS.
    pub fn q(&self, u: &[BigInt], v: &[BigInt]) -> BigInt {
        self.ns.pair(u, v)
    }
}

/// Computes the surface-like data of `f` in the basis `(a, b)`, or explains why
/// `f` is not surface-like with point-like vector `r(a)`.
pub fn surface_like(f: &PseudoHom, basis: &EBasis) -> Result<SurfaceLikeData> {
    let h = f.in_basis(basis)?;
    let r = h.right_adjoint()?;
    let t = h.twist()?;
    let a = ivec(&[1, 0]);
    if t.apply(&a) != a {
        return Err(Error::Precondition("twist does not fix a".into()));
    }
    let p = r.apply(&a);
    if !matrix::is_primitive_vector(&p) {
        return Err(Error::Precondition("r(a) is not primitive".into()));
    }
    let chi = h.source.gram();
    let chi_p = chi.apply(&p);
    if chi_p != chi.transpose().apply(&p) {
        return Err(Error::Precondition("r(a) does not pair symmetrically".into()));
    }
    if !matrix::dot(&p, &chi_p).is_zero() {
        return Err(Error::Precondition("r(a) is not isotropic".into()));
    }
    let n = h.source.rank();
    let perp = snf::kernel(&Mat::from_rows(vec![chi_p.clone()])?);
    let p_in_perp = snf::solve_int(&perp, &p).ok_or_else(|| Error::Precondition("p outside p^⊥".into()))?;
    let ext = snf::extend_to_basis(&Mat::column(&p_in_perp)).ok_or_else(|| Error::NotPrimitive("p in p^⊥".into()))?;
    let full = &perp * &ext;
    let reps = full.block(0..n, 1..n - 1);
    let coords = snf::left_inverse(&full).ok_or_else(|| Error::NotPrimitive("p^⊥ basis".into()))?;
    let ns_gram = -&chi.congruence(&reps);
    let ns_sym = ns_gram.clone();
    if !ns_sym.is_symmetric() {
        return Err(Error::Precondition("form on p^⊥ is not symmetric".into()));
    }
    let ns = IntLattice::new(ns_gram)?;
    let mut data = SurfaceLikeData {
        basis: basis.clone(),
        hom: h.clone(),
        pointlike: p.clone(),
        ns,
        canonical: vec![],
        rb_class: vec![],
        degree: BigInt::zero(),
        ns_reps: reps,
        coords,
        adjoint: r.clone(),
    };
    // Canonical class from ⟨eᵢ,eⱼ⟩ − ⟨eⱼ,eᵢ⟩ = −q(K, λ(eᵢ ∧ eⱼ)).
    let m = data.ns.rank();
    let ranks: Vec<BigInt> = (0..n).map(|i| chi_p[i].clone()).collect();
    let mut rows: Vec<QVector> = Vec::new();
    let mut rhs: QVector = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            let mut lam = vec![BigInt::zero(); n];
            lam[j] += &ranks[i];
            lam[i] -= &ranks[j];
            let x = data.ns_class(&lam)?;
            let qx = data.ns.gram().apply(&x);
            rows.push(matrix::to_qvec(&qx));
            rhs.push(BigRational::from_integer(-(chi.get(i, j) - chi.get(j, i))));
        }
    }
    let k = if m == 0 {
        vec![]
    } else {
        let sol = matrix::solve_rational(&rows, &rhs).ok_or_else(|| Error::Precondition("no canonical class solves the defining equations".into()))?;
        matrix::from_qvec(&sol).ok_or_else(|| Error::Precondition("canonical class is not integral".into()))?
    };
    data.canonical = k;
    data.degree = data.ns.norm(&data.canonical);
    let rb = r.apply(&ivec(&[0, 1]));
    data.rb_class = data.ns_class(&rb)?;
    if data.rb_class != data.canonical.iter().map(|x| -x).collect::<Vector>() {
        return Err(Error::Precondition("[r(b)] differs from −K".into()));
    }
    let expected = Mat::from_rows(vec![vec![BigInt::one(), -&data.degree], vec![BigInt::zero(), BigInt::one()]])?;
    if t != expected {
        return Err(Error::Precondition("twist is not (1 −d; 0 1) in this basis".into()));
    }
    Ok(data)
}

/// Checks the canonical-class equation on a pair of source vectors.
pub fn canonical_equation_holds(data: &SurfaceLikeData, u1: &[BigInt], u2: &[BigInt]) -> Result<bool> {
    let g = &data.hom.source;
    let lhs = g.pair(u1, u2) - g.pair(u2, u1);
    let lam = matrix::vsub(&matrix::vscale(&data.rank_of(u1), u2), &matrix::vscale(&data.rank_of(u2), u1));
    let x = data.ns_class(&lam)?;
    Ok(lhs == -data.q(&data.canonical, &x))
}

/// Candidate elliptic bases: `a` is the primitive fixed vector of the twist
/// (both signs, the one with positive leading entry first) when the twist is not `±id`; when the twist is the identity,
/// all primitive vectors of height at most `height_bound`, `(1,0)` first.
pub fn ebasis_candidates(twist: &Mat, height_bound: i64) -> Vec<EBasis> {
    let id = Mat::identity(2);
    if *twist == id {
        let mut vs: Vec<(i64, i64, i64)> = Vec::new();
        for x in -height_bound..=height_bound {
            for y in -height_bound..=height_bound {
                if num_integer::Integer::gcd(&x, &y) == 1 {
                    vs.push((x.abs().max(y.abs()), x, y));
                }
            }
        }
        vs.sort_by_key(|&(h, x, y)| (h, (x, y) != (1, 0), -x, -y));
        return vs.into_iter().filter_map(|(_, x, y)| EBasis::complete(&ivec(&[x, y]))).collect();
    }
    if *twist == -&id {
        return vec![];
    }
    let k = snf::kernel(&(twist - &id));
    if k.cols() != 1 {
        return vec![];
    }
    let mut a = k.col(0);
    if a.iter().find(|x| !x.is_zero()).is_some_and(|x| x.is_negative()) {
        a = a.iter().map(|x| -x).collect();
    }
    let neg: Vector = a.iter().map(|x| -x).collect();
    [a, neg].iter().filter_map(|v| EBasis::complete(v)).collect()
}

// ---------------------------------------------------------------------------
// Canonical models and frames

/// Canonical forms of quasi del Pezzo homomorphisms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "model")]
pub enum QdpModel {
    /// `Z(b, 3a+b, 6a+b, a, …, a)` of rank `n`.
    Chain {
        /// Rank.
        n: usize,
    },
    /// `Z(b, 2a+b, 2a+b, 4a+b)`.
    Quadric,
}

/// Degree `q(K,K)` with the quadric distinguished as `8′`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Degree {
    /// `q(K, K)`.
    pub value: i64,
    /// True for the quadric model.
    pub prime: bool,
}

impl fmt::Display for Degree {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.prime {
            write!(f, "{}′", self.value)
        } else {
            write!(f, "{}", self.value)
        }
    }
}

impl Serialize for Degree {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        if self.prime {
            s.serialize_str(&self.to_string())
        } else {
            s.serialize_i64(self.value)
        }
    }
}

impl QdpModel {
    /// Rank of the model.
    pub fn rank(&self) -> usize {
        match self {
            QdpModel::Chain { n } => *n,
            QdpModel::Quadric => 4,
        }
    }

    /// Degree of the model.
    pub fn degree(&self) -> Degree {
        match self {
            QdpModel::Chain { n } => Degree { value: 12 - *n as i64, prime: false },
            QdpModel::Quadric => Degree { value: 8, prime: true },
        }
    }

    /// Standard anticanonical pair `(NS, K)` of the model.
    pub fn standard_pair(&self) -> (IntLattice, Vector) {
        match self {
            QdpModel::Chain { n } => {
                let m = n - 3;
                let ns = lattice::odd_unimodular(1, m);
                let mut k = vec![BigInt::from(-3)];
                k.extend(std::iter::repeat(BigInt::one()).take(m));
                (ns, k)
            }
            QdpModel::Quadric => (lattice::hyperbolic(1), ivec(&[-2, -2])),
        }
    }

    /// Canonical chain realizing the model.
    pub fn canonical_hom(&self) -> PseudoHom {
        let words: Vec<[i64; 2]> = match self {
            QdpModel::Chain { n } => {
                let mut w = vec![[0, 1], [3, 1], [6, 1]];
                w.extend(std::iter::repeat([1, 0]).take(n - 3));
                w
            }
            QdpModel::Quadric => vec![[0, 1], [2, 1], [2, 1], [4, 1]],
        };
        z_chain_i64(&words).expect("canonical words are primitive")
    }
}

/// Pseudolattice on `Z ⊕ NS ⊕ Z` (coordinates rank, class, Euler value) with
/// Gram `[[−1,0,1],[QK,−Q,0],[1,0,0]]` and map `(0, −KᵀQ, 0; 1, 0, 0)` to the
/// elliptic pseudolattice.
pub fn from_anticanonical_pair(q: &IntLattice, k: &[BigInt]) -> Result<PseudoHom> {
    let m = q.rank();
    if k.len() != m {
        return Err(Error::Dimension("canonical class length differs from NS rank".into()));
    }
    let qk = q.gram().apply(k);
    let n = m + 2;
    let mut g = Mat::zeros(n, n);
    g.set(0, 0, BigInt::from(-1));
    g.set(0, n - 1, BigInt::one());
    g.set(n - 1, 0, BigInt::one());
    for i in 0..m {
        g.set(1 + i, 0, qk[i].clone());
        for j in 0..m {
            g.set(1 + i, 1 + j, -q.gram().get(i, j));
        }
    }
    let mut f = Mat::zeros(2, n);
    for j in 0..m {
        f.set(0, 1 + j, -&qk[j]);
    }
    f.set(1, 0, BigInt::one());
    PseudoHom::new(Pseudolattice::new(g)?, elliptic_e().0, f)
}

/// Isometry from a standard anticanonical pair onto an NS lattice: columns
/// are the images of the standard basis, and the standard canonical class
/// maps to the given one.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Frame {
    /// Model whose standard pair is the source.
    pub model: QdpModel,
    /// Columns: images of the standard basis in NS coordinates.
    pub matrix: Mat,
}

/// Exceptional classes (`c² = −1`, `K·c = −1`) among the NS basis vectors.
pub fn basis_exceptional_classes(ns: &IntLattice, k: &[BigInt]) -> Vec<Vector> {
    let m = ns.rank();
    let mut out = Vec::new();
    for i in 0..m {
        let mut e = vec![BigInt::zero(); m];
        e[i] = BigInt::one();
        for sgn in [1i64, -1] {
            let v: Vector = e.iter().map(|x| x * sgn).collect();
            if ns.norm(&v) == BigInt::from(-1) && ns.pair(k, &v) == BigInt::from(-1) {
                out.push(v);
            }
        }
    }
    out
}

/// Finds a standard frame for `(NS, K)`, blowing down the supplied (and
/// basis) exceptional classes until `K²` is positive and then matching the
/// positive definite form `d·(−q) + 2q(K,·)²` with `K` held fixed.
/// `Ok(None)` means no frame was found by these methods.
pub fn find_frame(ns: &IntLattice, k: &[BigInt], extra_exceptional: &[Vector]) -> Result<Option<Frame>> {
    let m = ns.rank();
    // Literal standard forms.
    for model in [QdpModel::Quadric, QdpModel::Chain { n: m + 2 }] {
        if model.rank() != m + 2 {
            continue;
        }
        let (sq, sk) = model.standard_pair();
        if sq == *ns && sk == k {
            return Ok(Some(Frame { model, matrix: Mat::identity(m) }));
        }
    }
    // Greedy family of mutually orthogonal exceptional classes.
    let mut pool: Vec<Vector> = extra_exceptional.to_vec();
    pool.extend(basis_exceptional_classes(ns, k));
    let mut chosen: Vec<Vector> = Vec::new();
    for c in pool {
        if ns.norm(&c) != BigInt::from(-1) || ns.pair(k, &c) != BigInt::from(-1) {
            continue;
        }
        if chosen.iter().all(|e| ns.pair(e, &c).is_zero() && *e != c) {
            chosen.push(c);
        }
    }
    let d = ns.norm(k);
    let needed = if d.is_positive() { 0 } else { (-&d).to_usize().unwrap_or(usize::MAX).saturating_add(1) };
    if chosen.len() < needed {
        return Ok(None);
    }
    // Blow down only as many classes as needed so that the residual K² > 0.
    let blown: Vec<Vector> = chosen.into_iter().take(needed).collect();
    let rest = if blown.is_empty() {
        ns.full()
    } else {
        Sublattice::new(ns.clone(), Mat::from_cols(m, &blown))?.orthogonal_complement()
    };
    let mut k_res: Vector = k.to_vec();
    for e in &blown {
        k_res = matrix::vsub(&k_res, e);
    }
    let k_coords = rest.coords(&k_res).ok_or_else(|| Error::Precondition("residual canonical class outside complement".into()))?;
    let res = rest.lattice();
    let r = res.rank();
    let dres = res.norm(&k_coords);
    let model = if r == 2 && dres == BigInt::from(8) && res.is_even() {
        QdpModel::Quadric
    } else if dres == BigInt::from(10 - r as i64) {
        QdpModel::Chain { n: r + 2 }
    } else {
        return Ok(None);
    };
    let (sq, sk) = model.standard_pair();
    let pform = |l: &IntLattice, kk: &[BigInt]| -> IntLattice {
        let g = l.gram();
        let gk = g.apply(kk);
        let dd = l.norm(kk);
        let mut out = Mat::zeros(g.rows(), g.cols());
        for i in 0..g.rows() {
            for j in 0..g.cols() {
                out.set(i, j, -(&dd * g.get(i, j)) + &gk[i] * &gk[j] * 2);
            }
        }
        IntLattice::new(out).expect("symmetric")
    };
    let p_std = pform(&sq, &sk);
    let p_res = pform(&res, &k_coords);
    let Some(iso) = lattice::definite_isometry(&p_std, &p_res, &[(sk.clone(), k_coords.clone())])? else {
        return Ok(None);
    };
    if res.gram().congruence(&iso) != *sq.gram() {
        return Err(Error::Precondition("frame search returned a non-isometry".into()));
    }
    let mut cols: Vec<Vector> = iso.col_vecs().iter().map(|c| rest.basis.apply(c)).collect();
    let mut model = model;
    if !blown.is_empty() {
        if model == QdpModel::Quadric {
            // (e, f, x₁) ↦ (h, e₁, e₂) = (e+f−x₁, f−x₁, e−x₁).
            let (e, f, x) = (cols[0].clone(), cols[1].clone(), blown[0].clone());
            let h = matrix::vsub(&matrix::vadd(&e, &f), &x);
            cols = vec![h, matrix::vsub(&f, &x), matrix::vsub(&e, &x)];
            cols.extend(blown[1..].iter().cloned());
        } else {
            cols.extend(blown.iter().cloned());
        }
        model = QdpModel::Chain { n: m + 2 };
    }
    let frame = Frame { model, matrix: Mat::from_cols(m, &cols) };
    verify_frame(ns, k, &frame)?;
    Ok(Some(frame))
}

/// Orders a family of roots along an `A`-type Dynkin path, from one end.
/// Returns `None` unless the pairing graph is a single path.
pub fn order_root_chain(ns: &IntLattice, roots: &[Vector]) -> Option<Vec<Vector>> {
    let r = roots.len();
    if r == 0 {
        return Some(vec![]);
    }
    let adj: Vec<Vec<usize>> = (0..r).map(|i| (0..r).filter(|&j| j != i && !ns.pair(&roots[i], &roots[j]).is_zero()).collect()).collect();
    let edges: usize = adj.iter().map(|a| a.len()).sum::<usize>() / 2;
    if edges + 1 != r || adj.iter().any(|a| a.len() > 2) {
        return None;
    }
    let mut cur = (0..r).find(|&i| adj[i].len() <= 1)?;
    let mut prev = usize::MAX;
    let mut out = Vec::with_capacity(r);
    loop {
        out.push(roots[cur].clone());
        match adj[cur].iter().find(|&&j| j != prev) {
            Some(&next) => {
                prev = cur;
                cur = next;
            }
            None => break,
        }
    }
    (out.len() == r).then_some(out)
}

/// Chain frames `(ℓ, e₁, …, e_m)` of `(NS, K)` in which a given `A_{m−1}`
/// chain of roots becomes `eᵢ − eᵢ₊₁`. Both orientations of the chain are
/// tried, and every admissible `e₁` is returned.
pub fn frames_from_root_chain(ns: &IntLattice, k: &[BigInt], roots: &[Vector]) -> Result<Vec<Frame>> {
    let rank = ns.rank();
    if rank < 3 || roots.len() + 2 != rank {
        return Ok(vec![]);
    }
    let Some(chain) = order_root_chain(ns, roots) else { return Ok(vec![]) };
    let model = QdpModel::Chain { n: rank + 2 };
    let g = ns.gram();
    let mut out = Vec::new();
    for flip in [false, true] {
        let alphas: Vec<Vector> = if flip { chain.iter().rev().cloned().collect() } else { chain.clone() };
        // e₁·K = −1, e₁·α₁ = −1, e₁·αⱼ = 0 for j > 1.
        let mut rows = vec![g.apply(k)];
        let mut rhs = vec![BigInt::from(-1), BigInt::from(-1)];
        rows.extend(alphas.iter().map(|a| g.apply(a)));
        rhs.extend(std::iter::repeat(BigInt::zero()).take(alphas.len() - 1));
        let a = Mat::from_rows(rows)?;
        let Some(x0) = snf::solve_int(&a, &rhs) else { continue };
        let ker = snf::kernel(&a);
        let candidates: Vec<Vector> = match ker.cols() {
            0 => vec![x0],
            1 => {
                // (x₀ + t·n)² = −1.
                let nv = ker.col(0);
                let (qa, qb, qc) = (ns.norm(&nv), ns.pair(&x0, &nv) * 2, ns.norm(&x0) + 1);
                integer_roots(&qa, &qb, &qc).into_iter().map(|t| matrix::vadd(&x0, &matrix::vscale(&t, &nv))).collect()
            }
            _ => continue,
        };
        for e1 in candidates {
            let mut es = vec![e1];
            for al in &alphas {
                let next = matrix::vsub(es.last().expect("nonempty"), al);
                es.push(next);
            }
            let sum = es.iter().fold(vec![BigInt::zero(); rank], |acc, e| matrix::vadd(&acc, e));
            let three_l = matrix::vsub(&sum, k);
            if three_l.iter().any(|x| !x.is_multiple_of(&BigInt::from(3))) {
                continue;
            }
            let l: Vector = three_l.iter().map(|x| x / 3).collect();
            let mut cols = vec![l];
            cols.extend(es);
            let frame = Frame { model, matrix: Mat::from_cols(rank, &cols) };
            if verify_frame(ns, k, &frame).is_ok() {
                out.push(frame);
            }
        }
    }
    Ok(out)
}

/// Integer solutions of `a t² + b t + c = 0`.
fn integer_roots(a: &BigInt, b: &BigInt, c: &BigInt) -> Vec<BigInt> {
    if a.is_zero() {
        if b.is_zero() {
            return vec![];
        }
        let (q, r) = (-c).div_rem(b);
        return if r.is_zero() { vec![q] } else { vec![] };
    }
    let disc = b * b - BigInt::from(4) * a * c;
    if disc.is_negative() {
        return vec![];
    }
    let s = disc.sqrt();
    if &s * &s != disc {
        return vec![];
    }
    let mut out = Vec::new();
    for num in [-b + &s, -b - &s] {
        let den = a * 2;
        if num.is_multiple_of(&den) {
            let t = num / den;
            if !out.contains(&t) {
                out.push(t);
            }
        }
    }
    out
}

/// Checks that a frame is an isometry from the standard pair onto `(NS, K)`.
pub fn verify_frame(ns: &IntLattice, k: &[BigInt], frame: &Frame) -> Result<()> {
    let (sq, sk) = frame.model.standard_pair();
    if ns.gram().congruence(&frame.matrix) != *sq.gram() {
        return Err(Error::Precondition("frame is not an isometry".into()));
    }
    if frame.matrix.apply(&sk) != k {
        return Err(Error::Precondition("frame does not carry K to K".into()));
    }
    if !frame.matrix.det().abs().is_one() {
        return Err(Error::Precondition("frame is not unimodular".into()));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Quasi del Pezzo detection

/// How the exceptional basis with primitive images was certified.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub enum ExceptionalCertificate {
    /// The given basis is exceptional (upper unitriangular Gram) with primitive images.
    GivenBasis,
    /// An explicit isomorphism to a canonical model was constructed.
    ModelIsomorphism,
}

/// Outcome of the quasi del Pezzo test.
#[derive(Clone, Debug)]
pub struct QdpVerdict {
    /// `Some(true)` verified, `Some(false)` refuted, `None` undecided.
    pub verdict: Option<bool>,
    /// Explanation of a refutation or of an undecided outcome.
    pub reason: String,
    /// Surface-like data in the certifying basis.
    pub data: Option<SurfaceLikeData>,
    /// Certificate for the exceptional-basis condition.
    pub exceptional: Option<ExceptionalCertificate>,
    /// Standard frame of `(NS, K)` when one was found.
    pub frame: Option<Frame>,
    /// Canonical form when verified.
    pub model: Option<QdpModel>,
}

impl QdpVerdict {
    fn refuted(reason: impl Into<String>) -> Self {
        QdpVerdict { verdict: Some(false), reason: reason.into(), data: None, exceptional: None, frame: None, model: None }
    }

    /// True when verified.
    pub fn holds(&self) -> bool {
        self.verdict == Some(true)
    }
}

/// Exceptional classes coming from source basis vectors mapping to `±a`.
fn letter_exceptional_classes(data: &SurfaceLikeData) -> Vec<Vector> {
    let n = data.hom.source.rank();
    let mut out = Vec::new();
    for i in 0..n {
        let col = data.hom.matrix.col(i);
        let sign = if col == ivec(&[1, 0]) {
            1
        } else if col == ivec(&[-1, 0]) {
            -1
        } else {
            continue;
        };
        let mut z = vec![BigInt::zero(); n];
        z[i] = BigInt::from(sign);
        if data.hom.source.pair(&z, &z).is_one() {
            if let Ok(c) = data.ns_class(&z) {
                out.push(c);
            }
        }
    }
    out
}

/// Tests the four quasi del Pezzo conditions, searching elliptic bases as
/// described in [`ebasis_candidates`].
pub fn is_quasi_del_pezzo(f: &PseudoHom) -> Result<QdpVerdict> {
    let n = f.source.rank();
    if f.target.gram() != &elliptic_gram() {
        return Err(Error::Precondition("target must be the elliptic pseudolattice".into()));
    }
    if n < 3 {
        return Ok(QdpVerdict::refuted("rank below 3"));
    }
    if !f.source.is_unimodular() {
        return Ok(QdpVerdict::refuted("source is not unimodular"));
    }
    if !f.is_spherical()? {
        return Ok(QdpVerdict::refuted("not spherical"));
    }
    if !f.is_relative_cy()? {
        return Ok(QdpVerdict::refuted("cotwist differs from the Serre operator"));
    }
    let t = f.twist()?;
    let mut data = None;
    let mut last_reason = String::from("no elliptic basis makes the hom surface-like");
    for basis in ebasis_candidates(&t, 12) {
        match surface_like(f, &basis) {
            Ok(d) => {
                let sig = d.ns.signature();
                if sig == (Signature { pos: 1, neg: n - 3, null: 0 }) {
                    data = Some(d);
                    break;
                }
                last_reason = format!("NS signature is ({}, {}, {})", sig.pos, sig.neg, sig.null);
            }
            Err(e) => last_reason = e.to_string(),
        }
    }
    let Some(data) = data else {
        return Ok(QdpVerdict::refuted(last_reason));
    };
    let gram = f.source.gram();
    let unitriangular = (0..n).all(|i| gram.get(i, i).is_one() && (0..i).all(|j| gram.get(i, j).is_zero()));
    let images_primitive = (0..n).all(|i| matrix::is_primitive_vector(&f.matrix.col(i)));
    let frame = find_frame(&data.ns, &data.canonical, &letter_exceptional_classes(&data))?;
    let model = classify_from_data(&data);
    if let Some(fr) = &frame {
        if fr.model.degree() != model.degree() {
            return Err(Error::Precondition("frame and invariants disagree on the degree".into()));
        }
    }
    let exceptional = if unitriangular && images_primitive {
        Some(ExceptionalCertificate::GivenBasis)
    } else if frame.is_some() {
        Some(ExceptionalCertificate::ModelIsomorphism)
    } else {
        None
    };
    let (verdict, reason) = match exceptional {
        Some(_) => (Some(true), String::new()),
        None => (None, "no exceptional basis certificate found".to_string()),
    };
    Ok(QdpVerdict { verdict, reason, data: Some(data), exceptional, frame, model: verdict.map(|_| model) })
}

fn classify_from_data(data: &SurfaceLikeData) -> QdpModel {
    let n = data.hom.source.rank();
    if n == 4 && data.ns.is_even() {
        QdpModel::Quadric
    } else {
        QdpModel::Chain { n }
    }
}

/// Canonical form and degree of a quasi del Pezzo homomorphism.
pub fn classify_qdp(f: &PseudoHom) -> Result<QdpModel> {
    let v = is_quasi_del_pezzo(f)?;
    match v.verdict {
        Some(true) => Ok(v.model.expect("model set when verified")),
        Some(false) => Err(Error::Precondition(format!("not quasi del Pezzo: {}", v.reason))),
        None => Err(Error::Budget(v.reason)),
    }
}

/// Matrix of the isomorphism from the source of `data.hom` onto the model
/// `Z ⊕ NS ⊕ Z` built from `(NS, K)`.
pub fn model_isomorphism(data: &SurfaceLikeData) -> Result<Mat> {
    let g = &data.hom.source;
    let chi = g.gram();
    let n = g.rank();
    let chi_p = chi.apply(&data.pointlike);
    let fm = &data.hom.matrix;
    // o with ⟨o,p⟩ = 1 and f(o) = b.
    let sys = Mat::from_rows(vec![chi_p.clone(), fm.row(0), fm.row(1)])?;
    let rhs = ivec(&[1, 0, 1]);
    let mut o = snf::solve_int(&sys, &rhs).ok_or_else(|| Error::Precondition("no structure-sheaf class".into()))?;
    if g.pair(&o, &o).is_even() {
        let ker = snf::kernel(&sys);
        let fix = ker.col_vecs().into_iter().find(|x| {
            let o2 = matrix::vadd(&o, x);
            !g.pair(&o2, &o2).is_even()
        });
        match fix {
            Some(x) => o = matrix::vadd(&o, &x),
            None => return Err(Error::Precondition("no structure-sheaf class of Euler value 1".into())),
        }
    }
    let k = (BigInt::one() - g.pair(&o, &o)) / 2;
    o = matrix::vadd(&o, &matrix::vscale(&k, &data.pointlike));
    let proj = data.ns_projection();
    let m = data.ns.rank();
    let mut phi = Mat::zeros(m + 2, n);
    let o_chi = chi.transpose().apply(&o);
    for j in 0..n {
        phi.set(0, j, chi_p[j].clone());
        phi.set(m + 1, j, o_chi[j].clone());
    }
    // Middle block: proj ∘ (id − o ⊗ rank).
    let correction = &Mat::column(&o) * &Mat::from_rows(vec![chi_p.clone()])?;
    let mid = &proj * &(&Mat::identity(n) - &correction);
    phi.paste(1, 0, &mid);
    let model = from_anticanonical_pair(&data.ns, &data.canonical)?;
    if model.source.gram().congruence(&phi) != *chi {
        return Err(Error::Precondition("model map does not preserve the form".into()));
    }
    if &model.matrix * &phi != *fm {
        return Err(Error::Precondition("model map does not commute with the homs".into()));
    }
    if !phi.det().abs().is_one() {
        return Err(Error::Precondition("model map is not invertible".into()));
    }
    Ok(phi)
}

/// Isomorphism `(ψ, φ)` between two quasi del Pezzo homs (`φ·F₁ = F₂·ψ`,
/// `ψ` an isometry of pseudolattices). `Ok(None)` certifies non-isomorphism.
pub fn qdp_isomorphism(f1: &PseudoHom, f2: &PseudoHom) -> Result<Option<(Mat, Mat)>> {
    let v1 = is_quasi_del_pezzo(f1)?;
    let v2 = is_quasi_del_pezzo(f2)?;
    if !v1.holds() || !v2.holds() {
        return Err(Error::Precondition("both homs must be quasi del Pezzo".into()));
    }
    if v1.model != v2.model {
        return Ok(None);
    }
    let (d1, d2) = (v1.data.unwrap(), v2.data.unwrap());
    let (Some(fr1), Some(fr2)) = (v1.frame, v2.frame) else {
        return Err(Error::Budget("no standard frame found for one of the factors".into()));
    };
    let psi_hat = &fr2.matrix * &fr1.matrix.inverse_unimodular()?;
    let phi1 = model_isomorphism(&d1)?;
    let phi2 = model_isomorphism(&d2)?;
    let mid = Mat::identity(1).block_diag(&psi_hat).block_diag(&Mat::identity(1));
    let psi = &(&phi2.inverse_unimodular()? * &mid) * &phi1;
    let phi = &d2.basis.matrix() * &d1.basis.matrix().inverse_unimodular()?;
    if f2.source.gram().congruence(&psi) != *f1.source.gram() {
        return Err(Error::Precondition("constructed map is not an isometry".into()));
    }
    if &phi * &f1.matrix != &f2.matrix * &psi {
        return Err(Error::Precondition("constructed maps do not commute".into()));
    }
    Ok(Some((psi, phi)))
}

/// Braid move on a chain word at position `i`: `(u, v) ↦ (T_u v, u)`.
pub fn braid_move(word: &[Vector], i: usize) -> Vec<Vector> {
    let mut w = word.to_vec();
    let u = word[i].clone();
    let v = word[i + 1].clone();
    w[i] = dehn_twist(&u).apply(&v);
    w[i + 1] = u;
    w
}
