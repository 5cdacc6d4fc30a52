//! Admissible isotropic vectors, hyperbolic-summand splittings, cusp
//! transport inside `H ⊕ H`, mirror lattices, and the verifier for mirror
//! pairs between a Tyurin degeneration and a split elliptic K3 fibration,
//! together with the four degree-two instances.

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fibration::{self, FibreConfig, FramedFibre, KodairaType, LoopSplit, SplitModel};
use crate::lattice::{self, IntLattice, LatticeInfo, Sublattice};
use crate::matrix::{self, Mat, Vector};
use crate::pseudo::{self, QdpModel};
use crate::snf;
use crate::tyurin::{self, CouplingGroup, GluedModel};

fn to_strings(v: &[BigInt]) -> Vec<String> {
    v.iter().map(|x| x.to_string()).collect()
}

fn unit(n: usize, i: usize) -> Vector {
    let mut v = vec![BigInt::zero(); n];
    v[i] = BigInt::one();
    v
}

// ---------------------------------------------------------------------------
// Divisibility and admissibility

/// Divisibility of `e` in `l`: the positive generator of `⟨e, l⟩ ⊂ Z`.
pub fn div(l: &IntLattice, e: &[BigInt]) -> Result<BigInt> {
    l.divisibility(e)
}

/// Certificate that `e` is `m`-admissible: `g` isotropic, `div(g) = m`, `⟨e, g⟩ = m`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct AdmissibilityCertificate {
    /// The isotropic vector.
    #[serde(serialize_with = "ser_vec")]
    pub e: Vector,
    /// Required divisibility.
    #[serde(serialize_with = "ser_int")]
    pub m: BigInt,
    /// Isotropic partner.
    #[serde(serialize_with = "ser_vec")]
    pub g: Vector,
    /// `div(e)`.
    #[serde(serialize_with = "ser_int")]
    pub div_e: BigInt,
}

fn ser_vec<S: serde::Serializer>(v: &[BigInt], s: S) -> std::result::Result<S::Ok, S::Error> {
    to_strings(v).serialize(s)
}

fn ser_int<S: serde::Serializer>(v: &BigInt, s: S) -> std::result::Result<S::Ok, S::Error> {
    v.to_string().serialize(s)
}

impl AdmissibilityCertificate {
    /// Re-checks every defining equation in `l`.
    pub fn verify(&self, l: &IntLattice) -> bool {
        l.norm(&self.e).is_zero()
            && l.norm(&self.g).is_zero()
            && l.pair(&self.e, &self.g) == self.m
            && l.divisibility(&self.g).ok().as_ref() == Some(&self.m)
            && l.divisibility(&self.e).ok().as_ref() == Some(&self.m)
            && self.div_e == self.m
    }
}

/// Outcome of an admissibility query.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum Admissibility {
    /// A verified certificate.
    Certified(AdmissibilityCertificate),
    /// A structural reason why no certificate exists.
    Obstructed {
        /// Explanation of the obstruction.
        reason: String,
    },
    /// Nothing found within the search bound.
    Unknown {
        /// Bound that was exhausted.
        bound: i64,
    },
}

impl Admissibility {
    /// `Some(true)` when certified, `Some(false)` when obstructed, `None` otherwise.
    pub fn verdict(&self) -> Option<bool> {
        match self {
            Admissibility::Certified(_) => Some(true),
            Admissibility::Obstructed { .. } => Some(false),
            Admissibility::Unknown { .. } => None,
        }
    }

    /// The certificate, if any.
    pub fn certificate(&self) -> Option<&AdmissibilityCertificate> {
        match self {
            Admissibility::Certified(c) => Some(c),
            _ => None,
        }
    }
}

/// Default coefficient bound for the `m > 1` search.
pub const DEFAULT_ADMISSIBILITY_BOUND: i64 = 50;

/// Decides whether a primitive isotropic `e ∈ l` is `m`-admissible. For
/// `m = 1` in an even lattice the partner is `g = f − (f²/2)e` for any `f`
/// with `⟨e,f⟩ = 1`. Otherwise candidates `g = x₀ + y + t·e` are searched
/// with `⟨e,x₀⟩ = m`, `y ⊥ e` bounded by `bound`, and `t` solving `g² = 0`.
pub fn is_m_admissible(l: &IntLattice, e: &[BigInt], m: i64, bound: i64) -> Result<Admissibility> {
    if m < 1 {
        return Err(Error::Input("m must be positive".into()));
    }
    if !matrix::is_primitive_vector(e) {
        return Err(Error::NotPrimitive("admissibility needs a primitive vector".into()));
    }
    if !l.norm(e).is_zero() {
        return Err(Error::Precondition("admissibility needs an isotropic vector".into()));
    }
    let mb = BigInt::from(m);
    let div_e = l.divisibility(e)?;
    if div_e != mb {
        return Ok(Admissibility::Obstructed { reason: format!("div(e) = {div_e} differs from m = {m}") });
    }
    let row = Mat::from_rows(vec![l.gram().apply(e)])?;
    let x0 = snf::solve_int(&row, &[mb.clone()]).ok_or_else(|| Error::Precondition("⟨e, ·⟩ does not reach m".into()))?;
    let certify = |x: &Vector| -> Option<AdmissibilityCertificate> {
        let n2 = l.norm(x);
        let two_m = BigInt::from(2 * m);
        if !(&n2 % &two_m).is_zero() {
            return None;
        }
        let t = -(&n2 / &two_m);
        let g = matrix::vadd(x, &matrix::vscale(&t, e));
        let cert = AdmissibilityCertificate { e: e.to_vec(), m: mb.clone(), g, div_e: div_e.clone() };
        cert.verify(l).then_some(cert)
    };
    if m == 1 && l.is_even() {
        return certify(&x0).map(Admissibility::Certified).ok_or_else(|| Error::Precondition("constructed partner failed verification".into()));
    }
    if let Some(c) = certify(&x0) {
        return Ok(Admissibility::Certified(c));
    }
    let ker = snf::kernel(&row).col_vecs();
    let mut budget: u64 = 500_000;
    for radius in 1..=bound {
        let mut coeffs = vec![0i64; ker.len()];
        if let Some(c) = search_shell(&ker, &x0, &mut coeffs, 0, radius, false, &certify, &mut budget) {
            return Ok(Admissibility::Certified(c));
        }
        if budget == 0 {
            return Ok(Admissibility::Unknown { bound: radius });
        }
    }
    Ok(Admissibility::Unknown { bound })
}

/// Enumerates coefficient vectors with sup-norm exactly `radius`.
#[allow(clippy::too_many_arguments)]
fn search_shell(
    ker: &[Vector],
    x0: &Vector,
    coeffs: &mut Vec<i64>,
    i: usize,
    radius: i64,
    hit: bool,
    certify: &dyn Fn(&Vector) -> Option<AdmissibilityCertificate>,
    budget: &mut u64,
) -> Option<AdmissibilityCertificate> {
    if *budget == 0 {
        return None;
    }
    if i == ker.len() {
        if !hit {
            return None;
        }
        *budget -= 1;
        let mut x = x0.clone();
        for (c, k) in coeffs.iter().zip(ker) {
            if *c != 0 {
                x = matrix::vadd(&x, &matrix::vscale(&BigInt::from(*c), k));
            }
        }
        return certify(&x);
    }
    for c in -radius..=radius {
        coeffs[i] = c;
        if let Some(r) = search_shell(ker, x0, coeffs, i + 1, radius, hit || c.abs() == radius, certify, budget) {
            return Some(r);
        }
    }
    coeffs[i] = 0;
    None
}

/// Certificate that a rank-two isotropic `I = ⟨e₁, e₂⟩` is doubly admissible,
/// with the resulting splitting `l = ⟨e₁,g₁⟩ ⊕ ⟨e₂,g₂⟩ ⊕ Γ'`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DoubleCertificate {
    /// First isotropic generator.
    pub e1: Vector,
    /// Second isotropic generator.
    pub e2: Vector,
    /// Partner of `e₁`.
    pub g1: Vector,
    /// Partner of `e₂`.
    pub g2: Vector,
    /// `{e₁, g₁, e₂, g₂}^⊥`.
    pub gamma: Sublattice,
    /// Unimodular change of basis `[e₁ g₁ e₂ g₂ | Γ']`.
    pub frame: Mat,
}

impl DoubleCertificate {
    /// Re-checks all pairings and that the frame is a unimodular basis
    /// realising `H ⊕ H ⊕ Γ'`.
    pub fn verify(&self, l: &IntLattice) -> bool {
        let v = [&self.e1, &self.g1, &self.e2, &self.g2];
        let expect = [[0, 1, 0, 0], [1, 0, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]];
        for i in 0..4 {
            for j in 0..4 {
                if l.pair(v[i], v[j]) != BigInt::from(expect[i][j]) {
                    return false;
                }
            }
        }
        let g = l.gram().congruence(&self.frame);
        let hh = lattice::hyperbolic(1).direct_sum(&lattice::hyperbolic(1)).direct_sum(&self.gamma.lattice());
        self.frame.det().abs().is_one() && g == *hh.gram()
    }

    /// `Γ'` as a lattice.
    pub fn complement(&self) -> IntLattice {
        self.gamma.lattice()
    }
}

/// Outcome of the double admissibility test.
#[derive(Clone, Debug)]
pub enum DoubleAdmissibility {
    /// Certified splitting.
    Certified(DoubleCertificate),
    /// Certified obstruction.
    Obstructed(String),
}

impl DoubleAdmissibility {
    /// The certificate, if any.
    pub fn certificate(&self) -> Option<&DoubleCertificate> {
        match self {
            DoubleAdmissibility::Certified(c) => Some(c),
            DoubleAdmissibility::Obstructed(_) => None,
        }
    }
}

/// Partner of `e` with prescribed pairings against `others` and zero norm.
fn partner(l: &IntLattice, e: &[BigInt], others: &[&Vector]) -> Option<Vector> {
    let mut rows = vec![l.gram().apply(e)];
    let mut rhs = vec![BigInt::one()];
    for o in others {
        rows.push(l.gram().apply(o));
        rhs.push(BigInt::zero());
    }
    let sys = Mat::from_rows(rows).ok()?;
    let f = snf::solve_int(&sys, &rhs)?;
    let half = l.norm(&f) / 2;
    Some(matrix::vsub(&f, &matrix::vscale(&half, e)))
}

/// Decides double admissibility of a primitive totally isotropic rank-two
/// sublattice `i` of an even lattice, starting from the generator order
/// given. The pairing map `l → Hom(I, Z)` must be onto; when it is, the
/// partners are constructed one hyperbolic plane at a time.
pub fn is_doubly_admissible(l: &IntLattice, e1: &[BigInt], e2: &[BigInt]) -> Result<DoubleAdmissibility> {
    if !l.is_even() {
        return Err(Error::Precondition("double admissibility is defined for even lattices".into()));
    }
    let i = Sublattice::new(l.clone(), Mat::from_cols(l.rank(), &[e1.to_vec(), e2.to_vec()]))?;
    if !i.is_primitive() {
        return Err(Error::NotPrimitive("isotropic plane".into()));
    }
    if !i.lattice().gram().is_zero() {
        return Err(Error::Precondition("plane is not totally isotropic".into()));
    }
    let pairing = Mat::from_rows(vec![l.gram().apply(e1), l.gram().apply(e2)])?;
    let s = snf::smith(&pairing);
    if s.rank < 2 || !s.invariant_factors().iter().all(|d| d.is_one()) {
        let inv: Vec<String> = s.invariant_factors().iter().map(|d| d.to_string()).collect();
        return Ok(DoubleAdmissibility::Obstructed(format!(
            "pairing with the plane has image of invariant factors {inv:?}, so div(e) > 1 for some primitive e in it"
        )));
    }
    let (e1, e2) = (e1.to_vec(), e2.to_vec());
    let g1 = partner(l, &e1, &[&e2]).ok_or_else(|| Error::Precondition("no partner for e₁".into()))?;
    let g2 = partner(l, &e2, &[&e1, &g1]).ok_or_else(|| Error::Precondition("no partner for e₂".into()))?;
    let hh = Sublattice::new(l.clone(), Mat::from_cols(l.rank(), &[e1.clone(), g1.clone(), e2.clone(), g2.clone()]))?;
    let gamma = hh.orthogonal_complement();
    let frame = hh.basis.hstack(&gamma.basis);
    let cert = DoubleCertificate { e1, e2, g1, g2, gamma, frame };
    if !cert.verify(l) {
        return Err(Error::Precondition("constructed splitting failed verification".into()));
    }
    Ok(DoubleAdmissibility::Certified(cert))
}

/// Completes a primitive `e ∈ I` to a basis `(e, e')` of `I`.
fn complete_in_plane(i: &Sublattice, e: &[BigInt]) -> Result<Vector> {
    let c = i.coords(e).ok_or_else(|| Error::Precondition("vector is not in the plane".into()))?;
    let ext = snf::extend_to_basis(&Mat::column(&c)).ok_or_else(|| Error::NotPrimitive("vector in the plane".into()))?;
    let mut other = ext.col(1);
    // Keep the orientation of the plane.
    if ext.det().is_negative() {
        other = other.iter().map(|x| -x).collect();
    }
    Ok(i.basis.apply(&other))
}

/// Isometry `g` of `l` with `g(I) = I'` and `g(e) = e'`, for doubly
/// admissible planes. When `I ≠ I'` the planes must fill `l` (as in
/// `H ⊕ H`); when `I = I'` the complements are identified through `I^⊥/I`.
pub fn hh_transport(l: &IntLattice, i: &Sublattice, i2: &Sublattice, e: &[BigInt], e2: &[BigInt]) -> Result<Mat> {
    let f = complete_in_plane(i, e)?;
    let f2 = complete_in_plane(i2, e2)?;
    let c1 = is_doubly_admissible(l, e, &f)?;
    let c2 = is_doubly_admissible(l, e2, &f2)?;
    let (Some(c1), Some(c2)) = (c1.certificate(), c2.certificate()) else {
        return Err(Error::Precondition("planes are not doubly admissible".into()));
    };
    let src = c1.frame.clone();
    let dst = if c1.gamma.rank() == 0 {
        c2.frame.clone()
    } else if i.same_span(i2) {
        // Γ'₁ → I^⊥/I → Γ'₂: subtract the I-component in I^⊥ = I ⊕ Γ'₂.
        let perp = i.orthogonal_complement();
        let split = i.basis.hstack(&c2.gamma.basis);
        let mut cols = Vec::new();
        for v in c1.gamma.generators() {
            if !perp.contains(&v) {
                return Err(Error::Precondition("complement is not orthogonal to the plane".into()));
            }
            let c = snf::solve_int(&split, &v).ok_or_else(|| Error::Precondition("I^⊥ ≠ I ⊕ Γ'".into()))?;
            cols.push(c2.gamma.basis.apply(&c[2..].to_vec()));
        }
        let head = c2.frame.block(0..l.rank(), 0..4);
        head.hstack(&Mat::from_cols(l.rank(), &cols))
    } else {
        return Err(Error::Precondition("distinct planes with a nonzero complement need a complement isometry".into()));
    };
    let g = &dst * &src.inverse_unimodular()?;
    if l.gram().congruence(&g) != *l.gram() || g.apply(e) != e2 {
        return Err(Error::Precondition("transport failed verification".into()));
    }
    let moved = Sublattice::new(l.clone(), &g * &i.basis)?;
    if !moved.same_span(i2) {
        return Err(Error::Precondition("transport does not carry the plane".into()));
    }
    Ok(g)
}

// ---------------------------------------------------------------------------
// Mirror lattices

/// Mirror lattice `{e, g}^⊥` inside `L^⊥` for an admissible `e ∈ L^⊥` with
/// certified partner `g`, as a sublattice of the ambient K3 lattice. The
/// certificate coordinates are ambient coordinates. For `m > 1` the plane
/// `⟨e, g⟩` must split off `L^⊥` as an orthogonal summand.
pub fn mirror_lattice(l: &Sublattice, cert: &AdmissibilityCertificate) -> Result<Sublattice> {
    let lam = &l.ambient;
    if !lam.is_even() || !lam.is_unimodular() || lam.signature() != (lattice::Signature { pos: 3, neg: 19, null: 0 }) {
        return Err(Error::Precondition("ambient must be even unimodular of signature (3,19)".into()));
    }
    let perp = l.orthogonal_complement();
    let (ce, cg) = match (perp.coords(&cert.e), perp.coords(&cert.g)) {
        (Some(a), Some(b)) => (a, b),
        _ => return Err(Error::Precondition("certificate does not lie in L^⊥".into())),
    };
    let pl = perp.lattice();
    let local = AdmissibilityCertificate { e: ce.clone(), g: cg.clone(), m: cert.m.clone(), div_e: cert.div_e.clone() };
    if !local.verify(&pl) {
        return Err(Error::Precondition("certificate fails in L^⊥".into()));
    }
    let plane = Sublattice::new(pl.clone(), Mat::from_cols(pl.rank(), &[ce, cg]))?;
    let comp = plane.orthogonal_complement();
    let split = plane.basis.hstack(&comp.basis);
    if !split.det().abs().is_one() {
        return Err(Error::Precondition("⟨e, g⟩ does not split off L^⊥".into()));
    }
    let basis = &perp.basis * &comp.basis;
    Sublattice::new(lam.clone(), basis)
}

// ---------------------------------------------------------------------------
// Mirror pairs

/// Degeneration side of a candidate mirror pair.
#[derive(Clone, Debug)]
pub struct DegenerationSide {
    /// Glued model of the Tyurin degeneration.
    pub model: GluedModel,
    /// Lattice polarisation `L ⊂ NS(M)`.
    pub l: Sublattice,
}

/// Fibration side of a candidate mirror pair.
#[derive(Clone, Debug)]
pub struct FibrationSide {
    /// Loop split of the fibration.
    pub split: LoopSplit,
    /// Polarisation `Γ ⊂ NS(M)`; computed from the fibre components when absent.
    pub gamma: Option<Sublattice>,
}

/// Explicit witnesses for the existence clauses.
#[derive(Clone, Debug)]
pub struct MirrorWitness {
    /// `ψ₁ : NS(fibration side 1) → NS(degeneration side 1)`.
    pub psi1: Mat,
    /// `ψ₂ : NS(fibration side 2) → NS(degeneration side 2)`.
    pub psi2: Mat,
    /// Ambient isometry `Λ_fib → Λ_deg`; `id ⊕ id ⊕ ψ` when absent.
    pub psihat: Option<Mat>,
    /// Admissibility level of `τ` and `F`.
    pub m: i64,
    /// Direction of the splitting clause.
    pub direction: SplitDirection,
}

/// Direction of the hyperbolic splitting clause.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitDirection {
    /// The mirror of `L` along `τ` is the image of `Ľ`.
    FromDegeneration,
    /// The mirror of `Ľ` along `τ` is the preimage of `L`.
    FromFibration,
}

/// How the existence clauses are decided.
#[derive(Clone, Debug)]
pub enum WitnessMode {
    /// Construct everything from standard frames and the doubly admissible plane `⟨τ, F⟩`.
    Auto,
    /// Verify the supplied witnesses.
    Supplied(MirrorWitness),
}

/// Primitivity of the two polarisations.
#[derive(Clone, Debug, Serialize, PartialEq, Eq)]
pub struct PrimitivityClause {
    /// `L` is primitive in `NS(M_deg)`.
    pub l_primitive: bool,
    /// Index of `L` in its saturation.
    pub l_index: String,
    /// `Γ` is primitive in `NS(M_fib)`.
    pub gamma_primitive: bool,
    /// Index of `Γ` in its saturation.
    pub gamma_index: String,
}

/// Isometries of the factors fixing canonical data.
#[derive(Clone, Debug, Serialize, PartialEq, Eq)]
pub struct FactorClause {
    /// Degree of the degeneration side.
    pub degeneration_degree: String,
    /// Degree `12 − e(side 1)` of the fibration side.
    pub fibration_degree: String,
    /// Degrees agree (the models then agree as well).
    pub degrees_match: bool,
    /// The two models are isomorphic factor by factor.
    pub models_match: Option<bool>,
    /// `ψ₁`, `ψ₂` are isometries carrying canonical class to canonical class.
    pub isometries: Option<bool>,
    /// `ψ` carries `φᵢ(K_i^⊥)` onto `φᵢ(K_i^⊥)` (checked for nonzero degree).
    pub images_preserved: Option<bool>,
}

/// The ambient lift and the admissible vectors `τ`, `F`.
#[derive(Clone, Debug, Serialize, PartialEq, Eq)]
pub struct LiftClause {
    /// `ψ̂` is an isometry extending `ψ` on `NS(M)`.
    pub lift_isometry: Option<bool>,
    /// `⟨τ, F⟩` is doubly admissible in `L^⊥`.
    pub doubly_admissible: Option<bool>,
    /// `F` is 1-admissible in `Ľ`.
    pub f_admissible: Option<bool>,
    /// `τ` is 1-admissible in `Ľ^⊥`.
    pub tau_admissible: Option<bool>,
}

/// The hyperbolic splitting condition.
#[derive(Clone, Debug, Serialize, PartialEq, Eq)]
pub struct SplittingClause {
    /// `ψ(Γ) = L^⊥` inside `NS(M_deg)`.
    pub psi_gamma_is_l_perp: Option<bool>,
    /// The mirror lattice of `L` along `τ` equals `ψ̂(Ľ)`.
    pub mirror_matches: Option<bool>,
    /// `Ľ ≅ H ⊕ Γ` through the constructed frame.
    pub lcheck_is_h_plus_gamma: Option<bool>,
}

/// Full report of the mirror-pair check.
#[derive(Clone, Debug, Serialize)]
pub struct MirrorReport {
    /// Primitivity of the polarisations.
    pub primitivity: PrimitivityClause,
    /// Factor isometries.
    pub factors: FactorClause,
    /// Ambient lift.
    pub lift: Option<LiftClause>,
    /// Hyperbolic splitting.
    pub splitting: Option<SplittingClause>,
    /// Invariants of the mirror lattice `Ľ`.
    pub mirror_lattice: Option<LatticeInfo>,
    /// `Some(true)`: mirror pair; `Some(false)`: refuted; `None`: needs a witness.
    pub verdict: Option<bool>,
    /// Explanation of a refutation or of a missing witness.
    pub reason: String,
}

/// Ambient `Λ = H ⊕ H ⊕ NS(M)` with `τ = e` of the first and `F = e` of the second plane.
pub fn k3_ambient(m: &GluedModel) -> IntLattice {
    let hh = lattice::hyperbolic(1).direct_sum(&lattice::hyperbolic(1));
    hh.direct_sum(m.ns_m_lattice())
}

/// Embeds an `NS(M)` vector into [`k3_ambient`].
pub fn embed_ns(v: &[BigInt]) -> Vector {
    let mut out = vec![BigInt::zero(); 4];
    out.extend_from_slice(v);
    out
}

/// Isometry `NS(fib side i) → NS(deg side i)` through the standard frames of both factors.
pub fn frame_isometry(deg: &GluedModel, fib: &GluedModel, i: usize) -> Result<Option<Mat>> {
    let (a, b) = (&deg.factors[i], &fib.factors[i]);
    if a.model != b.model {
        return Ok(None);
    }
    let (Some(fa), Some(fb)) = (&a.frame, &b.frame) else {
        return Err(Error::Budget(format!("no standard frame for factor {}", i + 1)));
    };
    Ok(Some(&fa.matrix * &fb.matrix.inverse_unimodular()?))
}

fn psi_gamma_matches(dm: &GluedModel, fm: &GluedModel, l: &Sublattice, gamma: &Sublattice, psi1: &Mat, psi2: &Mat) -> Result<bool> {
    if !(check_factor_isometry(dm, fm, 0, psi1) && check_factor_isometry(dm, fm, 1, psi2)) {
        return Ok(false);
    }
    let psi = tyurin::descend_isometries(fm, dm, psi1, psi2)?;
    let img = Sublattice::spanned_by(dm.ns_m_lattice().clone(), &gamma.generators().iter().map(|v| psi.apply(v)).collect::<Vec<_>>());
    Ok(img.same_span(&l.orthogonal_complement()))
}

/// Frames of factor `i` adapted to an `A`-chain: on the degeneration side the
/// roots of `L̂^⊥ ∩ NS(Gᵢ)`, on the fibration side the fibre components.
fn chain_frames(dm: &GluedModel, sm: &SplitModel, l: &Sublattice, i: usize) -> Result<(Vec<pseudo::Frame>, Vec<pseudo::Frame>)> {
    let lhat = tyurin::lift_polarisation(dm, l)?;
    let perp_i = tyurin::intersection_polarisation(dm, &lhat.orthogonal_complement(), i)?;
    let pl = perp_i.lattice();
    let deg_roots: Vec<Vector> = if pl.rank() > 0 && pl.signature().neg == pl.rank() {
        lattice::simple_roots(&pl, None)?.iter().map(|c| perp_i.basis.apply(c)).collect()
    } else {
        vec![]
    };
    let fib_roots: Vec<Vector> = fibration::component_classes(sm, i)?.into_iter().flat_map(|fc| fc.classes).collect();
    let (a, b) = (&dm.factors[i], &sm.glued.factors[i]);
    Ok((
        pseudo::frames_from_root_chain(a.ns(), a.canonical(), &deg_roots)?,
        pseudo::frames_from_root_chain(b.ns(), b.canonical(), &fib_roots)?,
    ))
}

/// Picks factor isometries for the automatic check. The standard frames are
/// used when they already carry `Γ` onto `L^⊥`; otherwise frames adapted to
/// matching root chains on both sides are tried.
fn choose_factor_isometries(dm: &GluedModel, sm: &SplitModel, l: &Sublattice, gamma: &Sublattice, a: Mat, b: Mat) -> Result<(Mat, Mat)> {
    let fm = &sm.glued;
    if psi_gamma_matches(dm, fm, l, gamma, &a, &b)? {
        return Ok((a, b));
    }
    let mut options: [Vec<Mat>; 2] = [vec![a.clone()], vec![b.clone()]];
    for (i, opts) in options.iter_mut().enumerate() {
        let (fd, ff) = chain_frames(dm, sm, l, i)?;
        for x in &fd {
            for y in &ff {
                opts.push(&x.matrix * &y.matrix.inverse_unimodular()?);
            }
        }
    }
    for p1 in &options[0] {
        for p2 in &options[1] {
            if psi_gamma_matches(dm, fm, l, gamma, p1, p2)? {
                return Ok((p1.clone(), p2.clone()));
            }
        }
    }
    Ok((a, b))
}

/// Factor isometries the automatic mode would use for this pair, when the
/// standard frames exist and the factor models agree.
pub fn auto_factor_isometries(deg: &DegenerationSide, fib: &FibrationSide) -> Result<Option<(Mat, Mat)>> {
    let sm = fibration::build_k3_split_model(&fib.split)?;
    let gamma = match &fib.gamma {
        Some(g) => g.clone(),
        None => fibration::fibration_gamma(&sm)?,
    };
    let (Some(a), Some(b)) = (frame_isometry(&deg.model, &sm.glued, 0)?, frame_isometry(&deg.model, &sm.glued, 1)?) else {
        return Ok(None);
    };
    choose_factor_isometries(&deg.model, &sm, &deg.l, &gamma, a, b).map(Some)
}

fn check_factor_isometry(deg: &GluedModel, fib: &GluedModel, i: usize, p: &Mat) -> bool {
    let (a, b) = (&deg.factors[i], &fib.factors[i]);
    p.rows() == a.ns().rank()
        && p.cols() == b.ns().rank()
        && a.ns().gram().congruence(p) == *b.ns().gram()
        && p.det().abs().is_one()
        && p.apply(b.canonical()) == *a.canonical()
}

/// The primitivity condition on its own.
pub fn primitivity_clause(l: &Sublattice, gamma: &Sublattice) -> PrimitivityClause {
    PrimitivityClause {
        l_primitive: l.is_primitive(),
        l_index: l.saturation_index().to_string(),
        gamma_primitive: gamma.is_primitive(),
        gamma_index: gamma.saturation_index().to_string(),
    }
}

/// Checks that a degeneration and a split fibration form a mirror pair.
/// The degrees are compared before the fibration model is built.
pub fn check_mirror_pair(deg: &DegenerationSide, fib: &FibrationSide, mode: &WitnessMode) -> Result<MirrorReport> {
    let dm = &deg.model;
    let e1 = fib.split.side1.euler() as i64;
    let fib_degree = 12 - e1;
    let mut factors = FactorClause {
        degeneration_degree: dm.degree.to_string(),
        fibration_degree: fib_degree.to_string(),
        degrees_match: dm.degree.value == fib_degree,
        models_match: None,
        isometries: None,
        images_preserved: None,
    };
    let placeholder = PrimitivityClause {
        l_primitive: deg.l.is_primitive(),
        l_index: deg.l.saturation_index().to_string(),
        gamma_primitive: false,
        gamma_index: "?".into(),
    };
    let refute = |primitivity, factors, reason: String| MirrorReport {
        primitivity,
        factors,
        lift: None,
        splitting: None,
        mirror_lattice: None,
        verdict: Some(false),
        reason,
    };
    if !factors.degrees_match {
        return Ok(refute(placeholder, factors, format!("degree {} differs from 12 − e = {fib_degree}", dm.degree)));
    }
    let sm: SplitModel = fibration::build_k3_split_model(&fib.split)?;
    let fm = &sm.glued;
    let gamma = match &fib.gamma {
        Some(g) => g.clone(),
        None => fibration::fibration_gamma(&sm)?,
    };
    if gamma.ambient != *fm.ns_m_lattice() || deg.l.ambient != *dm.ns_m_lattice() {
        return Err(Error::Dimension("polarisations must be sublattices of the respective NS(M)".into()));
    }
    let primitivity = primitivity_clause(&deg.l, &gamma);
    if !primitivity.l_primitive || !primitivity.gamma_primitive {
        return Ok(refute(primitivity, factors, "a polarisation is not primitive".into()));
    }
    factors.models_match = Some((0..2).all(|i| dm.factors[i].model == fm.factors[i].model));
    if factors.models_match == Some(false) {
        return Ok(refute(primitivity, factors, "factor models differ".into()));
    }

    // Factor isometries.
    let (psi1, psi2, witness) = match mode {
        WitnessMode::Supplied(w) => (w.psi1.clone(), w.psi2.clone(), Some(w)),
        WitnessMode::Auto => match (frame_isometry(dm, fm, 0), frame_isometry(dm, fm, 1)) {
            (Ok(Some(a)), Ok(Some(b))) => {
                let (a, b) = choose_factor_isometries(dm, &sm, &deg.l, &gamma, a, b)?;
                (a, b, None)
            }
            (Err(Error::Budget(r)), _) | (_, Err(Error::Budget(r))) => {
                return Ok(MirrorReport {
                    primitivity,
                    factors,
                    lift: None,
                    splitting: None,
                    mirror_lattice: None,
                    verdict: None,
                    reason: format!("needs witness: {r}"),
                });
            }
            (Err(e), _) | (_, Err(e)) => return Err(e),
            _ => return Ok(refute(primitivity, factors, "factor models differ".into())),
        },
    };
    let iso_ok = check_factor_isometry(dm, fm, 0, &psi1) && check_factor_isometry(dm, fm, 1, &psi2);
    factors.isometries = Some(iso_ok);
    if !iso_ok {
        return Ok(refute(primitivity, factors, "ψ₁ or ψ₂ is not a canonical-class preserving isometry".into()));
    }
    let psi = tyurin::descend_isometries(fm, dm, &psi1, &psi2)?;
    if dm.degree.value != 0 {
        let mut ok = true;
        for i in 0..2 {
            let img = Sublattice::spanned_by(dm.ns_m_lattice().clone(), &(&psi * &fm.phi(i)?).col_vecs());
            let target = Sublattice::spanned_by(dm.ns_m_lattice().clone(), &dm.phi(i)?.col_vecs());
            ok &= img.same_span(&target);
        }
        factors.images_preserved = Some(ok);
        if !ok {
            return Ok(refute(primitivity, factors, "ψ does not preserve the factor images".into()));
        }
    }

    // Ambient data.
    let lam_deg = k3_ambient(dm);
    let lam_fib = k3_ambient(fm);
    let n = lam_deg.rank();
    let (tau, f) = (unit(n, 0), unit(n, 2));
    let l_amb = Sublattice::new(lam_deg.clone(), Mat::from_cols(n, &deg.l.generators().iter().map(|v| embed_ns(v)).collect::<Vec<_>>()))?;
    let mut gens_fib = vec![unit(n, 2), unit(n, 3)];
    gens_fib.extend(gamma.generators().iter().map(|v| embed_ns(v)));
    let lcheck_fib = Sublattice::new(lam_fib.clone(), Mat::from_cols(n, &gens_fib))?;
    let default_hat = Mat::identity(4).block_diag(&psi);
    let psihat = witness.and_then(|w| w.psihat.clone()).unwrap_or(default_hat);
    let lift_ok = psihat.rows() == n
        && psihat.cols() == n
        && lam_deg.gram().congruence(&psihat) == *lam_fib.gram()
        && (0..dm.ns_m_lattice().rank()).all(|j| {
            let v = unit(dm.ns_m_lattice().rank(), j);
            psihat.apply(&embed_ns(&v)) == embed_ns(&psi.apply(&v))
        });
    let m = witness.map_or(1, |w| w.m);

    let l_perp = l_amb.orthogonal_complement();
    let lp = l_perp.lattice();
    let (tc, fc) = (l_perp.coords(&tau), l_perp.coords(&psihat.apply(&f)));
    let doubly = match (&tc, &fc, m) {
        (Some(a), Some(b), 1) => Some(is_doubly_admissible(&lp, a, b)?.certificate().is_some()),
        (Some(_), Some(_), _) => None,
        _ => Some(false),
    };
    let f_in = lcheck_fib.coords(&f).ok_or_else(|| Error::Precondition("F ∉ Ľ".into()))?;
    let f_adm = is_m_admissible(&lcheck_fib.lattice(), &f_in, m, DEFAULT_ADMISSIBILITY_BOUND)?.verdict();
    let lperp_fib = lcheck_fib.orthogonal_complement();
    let t_in = lperp_fib.coords(&tau).ok_or_else(|| Error::Precondition("τ ∉ Ľ^⊥".into()))?;
    let t_adm = is_m_admissible(&lperp_fib.lattice(), &t_in, m, DEFAULT_ADMISSIBILITY_BOUND)?.verdict();
    let lift = LiftClause { lift_isometry: Some(lift_ok), doubly_admissible: doubly, f_admissible: f_adm, tau_admissible: t_adm };

    // Splitting.
    let psi_gamma = Sublattice::spanned_by(dm.ns_m_lattice().clone(), &gamma.generators().iter().map(|v| psi.apply(v)).collect::<Vec<_>>());
    let l_perp_ns = deg.l.orthogonal_complement();
    let psi_gamma_is_l_perp = Some(psi_gamma.same_span(&l_perp_ns));
    let tau_cert = match is_m_admissible(&lam_deg, &tau, m, DEFAULT_ADMISSIBILITY_BOUND)? {
        Admissibility::Certified(_) => {
            // Partner inside L^⊥: the dual isotropic of the first plane.
            AdmissibilityCertificate { e: tau.clone(), g: unit(n, 1), m: BigInt::from(m), div_e: BigInt::from(m) }
        }
        _ => return Err(Error::Precondition("τ is not admissible in Λ".into())),
    };
    let direction = witness.map_or(SplitDirection::FromDegeneration, |w| w.direction);
    let image = Sublattice::new(lam_deg.clone(), &psihat * &lcheck_fib.basis)?;
    let mirror_matches = match direction {
        SplitDirection::FromDegeneration => match mirror_lattice(&l_amb, &tau_cert) {
            Ok(lc) => Some(lc.same_span(&image)),
            Err(Error::Precondition(_)) => None,
            Err(e) => return Err(e),
        },
        SplitDirection::FromFibration => {
            match mirror_lattice(&lcheck_fib, &tau_cert) {
                Ok(back) => {
                    let pre = Sublattice::new(lam_deg.clone(), &psihat * &back.basis)?;
                    Some(pre.same_span(&l_amb))
                }
                Err(Error::Precondition(_)) => None,
                Err(e) => return Err(e),
            }
        }
    };
    let hg = lattice::hyperbolic(1).direct_sum(&gamma.lattice());
    let lcheck_is_h_plus_gamma = Some(lcheck_fib.lattice() == hg);
    let splitting = SplittingClause { psi_gamma_is_l_perp, mirror_matches, lcheck_is_h_plus_gamma };
    let mirror_info = Some(lattice::info(&lcheck_fib.lattice()));

    let checks = [
        lift.lift_isometry,
        lift.doubly_admissible,
        lift.f_admissible,
        lift.tau_admissible,
        splitting.psi_gamma_is_l_perp,
        splitting.mirror_matches,
        splitting.lcheck_is_h_plus_gamma,
    ];
    let (verdict, reason) = if checks.iter().any(|c| *c == Some(false)) {
        (Some(false), "a lift or splitting clause fails".to_string())
    } else if checks.iter().any(|c| c.is_none()) {
        (None, "needs witness: a clause could not be decided".to_string())
    } else {
        (Some(true), String::new())
    };
    Ok(MirrorReport { primitivity, factors, lift: Some(lift), splitting: Some(splitting), mirror_lattice: mirror_info, verdict, reason })
}

// ---------------------------------------------------------------------------
// Weak del Pezzo compatibility

/// Report of the weak del Pezzo mirror check on the first factors.
#[derive(Clone, Debug, Serialize)]
pub struct WdpMirrorReport {
    /// Degree of the first factors.
    pub degree: String,
    /// The first factors are isomorphic quasi del Pezzo homs.
    pub factors_isomorphic: bool,
    /// Coupling group of `L` on the degeneration side.
    pub coupling_l: CouplingGroup,
    /// Coupling group of `Γ` on the fibration side.
    pub coupling_gamma: CouplingGroup,
    /// Rank of `N = L̂ ∩ NS₁`.
    pub n_rank: usize,
    /// Rank of `Ň = Γ̂ ∩ NS₁`.
    pub ncheck_rank: usize,
    /// `ψ₁(Ň)` equals the orthogonal complement of `N` in `K^⊥` (`None`: out of scope).
    pub complement_matches: Option<bool>,
    /// Verdict (`None` when a coupling group is not torsion).
    pub verdict: Option<bool>,
    /// Explanation.
    pub reason: String,
}

/// Checks the weak del Pezzo mirror conditions for the first factors:
/// isomorphic quasi del Pezzo homs, and `Ň = N^⊥` in `K^⊥` when both
/// coupling groups are finite.
pub fn check_wdp_mirror(deg: &GluedModel, l: &Sublattice, fib: &GluedModel, gamma: &Sublattice) -> Result<WdpMirrorReport> {
    if deg.degree.value <= 0 {
        return Err(Error::Precondition("weak del Pezzo check needs positive degree".into()));
    }
    let factors_isomorphic = pseudo::qdp_isomorphism(&deg.factors[0].hom, &fib.factors[0].hom)?.is_some();
    let coupling_l = tyurin::coupling_group(deg, l)?;
    let coupling_gamma = tyurin::coupling_group(fib, gamma)?;
    let lhat = tyurin::lift_polarisation(deg, l)?;
    let ghat = tyurin::lift_polarisation(fib, gamma)?;
    let n = tyurin::intersection_polarisation(deg, &lhat, 0)?;
    let ncheck = tyurin::intersection_polarisation(fib, &ghat, 0)?;
    let mut report = WdpMirrorReport {
        degree: deg.degree.to_string(),
        factors_isomorphic,
        coupling_l: coupling_l.clone(),
        coupling_gamma: coupling_gamma.clone(),
        n_rank: n.rank(),
        ncheck_rank: ncheck.rank(),
        complement_matches: None,
        verdict: None,
        reason: String::new(),
    };
    if !factors_isomorphic {
        report.verdict = Some(false);
        report.reason = "first factors are not isomorphic".into();
        return Ok(report);
    }
    if !coupling_l.is_torsion() || !coupling_gamma.is_torsion() {
        report.reason = "a coupling group has positive rank; outside the scope of the compatibility statement".into();
        return Ok(report);
    }
    let psi1 = frame_isometry(deg, fib, 0)?.ok_or_else(|| Error::Precondition("first factors differ".into()))?;
    let kp = deg.factors[0].k_perp();
    let n_perp = complement_in(&kp, &n)?;
    let image = Sublattice::spanned_by(deg.factors[0].ns().clone(), &ncheck.generators().iter().map(|v| psi1.apply(v)).collect::<Vec<_>>());
    let ok = image.same_span(&n_perp);
    report.complement_matches = Some(ok);
    report.verdict = Some(ok);
    if !ok {
        report.reason = "ψ₁(Ň) differs from N^⊥ in K^⊥".into();
    }
    Ok(report)
}

/// Orthogonal complement of `n` inside `host`, both sublattices of the same ambient.
pub fn complement_in(host: &Sublattice, n: &Sublattice) -> Result<Sublattice> {
    let hl = host.lattice();
    let coords: Vec<Vector> = n.generators().iter().map(|v| host.coords(v).ok_or_else(|| Error::Precondition("sublattice is not inside the host".into()))).collect::<Result<_>>()?;
    let inner = if coords.is_empty() { hl.full() } else { Sublattice::new(hl.clone(), Mat::from_cols(hl.rank(), &coords))?.orthogonal_complement() };
    Ok(Sublattice::spanned_by(host.ambient.clone(), &inner.generators().iter().map(|c| host.basis.apply(c)).collect::<Vec<_>>()))
}

// ---------------------------------------------------------------------------
// The four degree-two instances

/// One of the four degree-two mirror instances.
#[derive(Clone, Debug)]
pub struct DhtInstance {
    /// Short label.
    pub name: &'static str,
    /// Reducible-fibre root type expected on both sides.
    pub root_type: &'static str,
    /// Models of the two degeneration factors.
    pub degeneration: [QdpModel; 2],
    /// Loop split of the fibration with explicit framings.
    pub split: LoopSplit,
}

fn framed(kind: KodairaType, rows: [[i64; 2]; 2]) -> FramedFibre {
    FramedFibre::framed_i64(kind, rows).expect("frozen framing has determinant one")
}

fn plain(kind: KodairaType) -> FramedFibre {
    FramedFibre::plain(kind)
}

/// Three `I₁` fibres with vanishing cycles `b`, `3a+b`, `6a+b`.
pub fn projective_plane_side() -> Vec<FramedFibre> {
    vec![
        framed(KodairaType::I(1), [[0, -1], [1, 0]]),
        framed(KodairaType::I(1), [[3, -1], [1, 0]]),
        framed(KodairaType::I(1), [[6, -1], [1, 0]]),
    ]
}

/// The four instances with frozen framings.
pub fn dht_instances() -> Vec<DhtInstance> {
    use KodairaType::*;
    let split = |a: Vec<FramedFibre>, b: Vec<FramedFibre>| LoopSplit::new(FibreConfig::new(a), FibreConfig::new(b)).expect("frozen split");
    let i1a = || framed(I(1), [[-3, -5], [-1, -2]]);
    let i1b = || framed(I(1), [[-5, -9], [-1, -2]]);
    let mut side2 = projective_plane_side();
    side2.push(plain(I(18)));
    vec![
        DhtInstance {
            name: "I18",
            root_type: "A17",
            degeneration: [QdpModel::Chain { n: 3 }, QdpModel::Chain { n: 21 }],
            split: split(projective_plane_side(), side2),
        },
        DhtInstance {
            name: "I*12 I2",
            root_type: "D16+A1",
            degeneration: [QdpModel::Quadric, QdpModel::Chain { n: 20 }],
            split: split(
                vec![framed(I(1), [[0, -1], [1, 0]]), framed(I(2), [[2, -1], [1, 0]]), framed(I(1), [[4, -1], [1, 0]])],
                vec![plain(IStar(12)), i1a(), i1b()],
            ),
        },
        DhtInstance {
            name: "II* II* I2",
            root_type: "E8+E8+A1",
            degeneration: [QdpModel::Chain { n: 11 }, QdpModel::Chain { n: 13 }],
            split: split(vec![plain(IIStar), i1a()], vec![plain(IIStar), plain(I(2)), framed(I(1), [[-1, -2], [-1, -3]])]),
        },
        DhtInstance {
            name: "III* I*6",
            root_type: "E7+D10",
            degeneration: [QdpModel::Chain { n: 10 }, QdpModel::Chain { n: 14 }],
            split: split(vec![plain(IIIStar), i1a()], vec![plain(IStar(6)), i1a(), i1b()]),
        },
    ]
}

/// Glued model of a degeneration from the standard pairs of two models.
pub fn degeneration_model(models: &[QdpModel; 2]) -> Result<GluedModel> {
    let h = |m: &QdpModel| {
        let (q, k) = m.standard_pair();
        pseudo::from_anticanonical_pair(&q, &k)
    };
    tyurin::build_glued(&h(&models[0])?, &h(&models[1])?)
}

/// The degree-two polarisation `⟨h, H⟩` of `(P², Bl₁₈P²)`, projected to `NS(M)`.
pub fn hyperplane_polarisation(m: &GluedModel) -> Result<Sublattice> {
    let mut h1 = vec![BigInt::zero(); m.factors[0].ns().rank()];
    let mut h2 = vec![BigInt::zero(); m.factors[1].ns().rank()];
    h1[0] = BigInt::one();
    h2[0] = BigInt::one();
    let v1 = m.factors[0].from_standard(&h1)?;
    let v2 = m.factors[1].from_standard(&h2)?;
    let mut x = v1;
    x.extend(v2);
    let img = m.project_ns(&x)?;
    Sublattice::new(m.ns_m_lattice().clone(), Mat::column(&img))
}

/// Root type of `L̂^⊥ ∩ (K₁^⊥ ⊕ K₂^⊥)` inside `NS₁ ⊕ NS₂`.
pub fn lifted_complement_root_type(m: &GluedModel, l: &Sublattice) -> Result<String> {
    let lhat = tyurin::lift_polarisation(m, l)?;
    let amb = m.ns_sum();
    let lhat_amb = Sublattice::new(amb.clone(), &m.w_basis * &lhat.basis)?;
    let perp = lhat_amb.orthogonal_complement();
    let kk = Sublattice::new(amb.clone(), m.factors[0].k_perp().basis.block_diag(&m.factors[1].k_perp().basis))?;
    let meet = snf::intersect_spans(&perp.basis, &kk.basis);
    let s = Sublattice::new(amb, meet)?;
    let sl = s.lattice();
    if sl.rank() == 0 {
        return Ok("0".into());
    }
    if sl.signature().neg != sl.rank() {
        return Err(Error::Indefinite("lifted complement is not negative definite".into()));
    }
    lattice::root_system_name(&sl)
}

/// Result of one degree-two instance.
#[derive(Clone, Debug, Serialize)]
pub struct DhtResult {
    /// Instance label.
    pub name: String,
    /// Expected root type.
    pub expected_root_type: String,
    /// Root type of the fibre components.
    pub component_root_type: String,
    /// Root type of `L̂^⊥ ∩ (K₁^⊥ ⊕ K₂^⊥)`.
    pub degeneration_root_type: String,
    /// Euler numbers of the split.
    pub euler: [usize; 2],
    /// Degree of the degeneration.
    pub degree: String,
    /// `L²`.
    pub l_norm: String,
    /// Mordell–Weil torsion invariants of `Γ/R`.
    pub mw_torsion: Vec<String>,
    /// Mirror-pair report.
    pub report: MirrorReport,
    /// Overall pass.
    pub verified: bool,
}

/// Builds both sides of an instance. The polarisation of the first instance
/// is the hyperplane pair; for the others it is `ψ(Γ)^⊥`.
pub fn dht_sides(inst: &DhtInstance) -> Result<(DegenerationSide, FibrationSide, SplitModel)> {
    let deg = degeneration_model(&inst.degeneration)?;
    let sm = fibration::build_k3_split_model(&inst.split)?;
    let l = if inst.degeneration[0] == (QdpModel::Chain { n: 3 }) {
        hyperplane_polarisation(&deg)?
    } else {
        let gamma = fibration::fibration_gamma(&sm)?;
        let psi1 = frame_isometry(&deg, &sm.glued, 0)?.ok_or_else(|| Error::Precondition("models differ".into()))?;
        let psi2 = frame_isometry(&deg, &sm.glued, 1)?.ok_or_else(|| Error::Precondition("models differ".into()))?;
        let psi = tyurin::descend_isometries(&sm.glued, &deg, &psi1, &psi2)?;
        let img = Sublattice::spanned_by(deg.ns_m_lattice().clone(), &gamma.generators().iter().map(|v| psi.apply(v)).collect::<Vec<_>>());
        img.orthogonal_complement()
    };
    let fib = FibrationSide { split: inst.split.clone(), gamma: None };
    Ok((DegenerationSide { model: deg, l }, fib, sm))
}

/// Equality of root-type names up to the order of the summands.
pub fn same_root_type(a: &str, b: &str) -> bool {
    let parts = |s: &str| {
        let mut v: Vec<String> = s.split('+').map(|x| x.trim().to_string()).collect();
        v.sort();
        v
    };
    parts(a) == parts(b)
}

/// Runs one instance end to end.
pub fn run_dht_instance(inst: &DhtInstance) -> Result<DhtResult> {
    let (deg, fib, sm) = dht_sides(inst)?;
    let report = check_mirror_pair(&deg, &fib, &WitnessMode::Auto)?;
    let component_root_type = fibration::component_root_type(&sm)?;
    let degeneration_root_type = lifted_complement_root_type(&deg.model, &deg.l)?;
    let gamma = fibration::fibration_gamma(&sm)?;
    let mw = fibration::mw_coupling_data(&sm, Some(&gamma))?;
    let l_norm = if deg.l.rank() == 1 { deg.l.lattice().gram().get(0, 0).to_string() } else { format!("rank {}", deg.l.rank()) };
    let verified = report.verdict == Some(true)
        && same_root_type(&component_root_type, inst.root_type)
        && same_root_type(&degeneration_root_type, inst.root_type)
        && l_norm == "2";
    Ok(DhtResult {
        name: inst.name.to_string(),
        expected_root_type: inst.root_type.to_string(),
        component_root_type,
        degeneration_root_type,
        euler: inst.split.eulers(),
        degree: deg.model.degree.to_string(),
        l_norm,
        mw_torsion: mw.mw_torsion,
        report,
        verified,
    })
}

/// Runs all four instances.
pub fn dht_suite() -> Result<Vec<DhtResult>> {
    dht_instances().iter().map(run_dht_instance).collect()
}

/// `D₁₆⁺ ⊃ D₁₆`: the even unimodular overlattice of `D₁₆` (negative definite)
/// and the coordinates of a `D₁₆` root basis inside it.
pub fn d16_plus() -> Result<(IntLattice, Mat)> {
    let n = 16;
    // Work in Z¹⁶ scaled by 2 so that the glue vector (½,…,½) is integral.
    let mut roots = Vec::new();
    for i in 0..n - 1 {
        let mut v = vec![BigInt::zero(); n];
        v[i] = BigInt::from(2);
        v[i + 1] = BigInt::from(-2);
        roots.push(v);
    }
    let mut last = vec![BigInt::zero(); n];
    last[n - 2] = BigInt::from(2);
    last[n - 1] = BigInt::from(2);
    roots.push(last);
    let glue = vec![BigInt::one(); n];
    let mut gens = roots.clone();
    gens.push(glue);
    let basis = snf::lattice_basis(&Mat::from_cols(n, &gens));
    let g = &basis.transpose() * &basis;
    let mut gram = Mat::zeros(n, n);
    for i in 0..n {
        for j in 0..n {
            let x = g.get(i, j);
            if !(x % BigInt::from(4)).is_zero() {
                return Err(Error::Precondition("D16+ Gram is not integral".into()));
            }
            gram.set(i, j, -(x / BigInt::from(4)));
        }
    }
    let lat = IntLattice::new(gram)?;
    let coords: Vec<Vector> = roots.iter().map(|r| snf::solve_int(&basis, r).ok_or_else(|| Error::Precondition("root outside D16+".into()))).collect::<Result<_>>()?;
    Ok((lat, Mat::from_cols(n, &coords)))
}

/// `H ⊕ D₁₆` inside `H ⊕ D₁₆⁺ ≅ H ⊕ E₈ ⊕ E₈`.
pub fn h_plus_d16_control() -> Result<Sublattice> {
    let (dp, d16) = d16_plus()?;
    let amb = lattice::hyperbolic(1).direct_sum(&dp);
    let basis = Mat::identity(2).block_diag(&d16);
    Sublattice::new(amb, basis)
}

/// Even-lattice test for a gcd-style obstruction: `true` when some primitive
/// vector of the plane has divisibility greater than one.
pub fn plane_divisibility_obstructed(l: &IntLattice, e1: &[BigInt], e2: &[BigInt]) -> Result<bool> {
    Ok(matches!(is_doubly_admissible(l, e1, e2)?, DoubleAdmissibility::Obstructed(_)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::ivec;

    #[test]
    fn divisibility_examples() {
        let h = lattice::hyperbolic(1);
        assert_eq!(div(&h, &ivec(&[1, 0])).unwrap(), BigInt::one());
        assert_eq!(div(&h, &ivec(&[2, 0])).unwrap(), BigInt::from(2));
        assert_eq!(div(&lattice::hyperbolic(2), &ivec(&[1, 0])).unwrap(), BigInt::from(2));
        assert!(div(&h, &ivec(&[0, 0])).is_err());
    }

    #[test]
    fn admissibility_examples() {
        let l = lattice::standard_lattice("H+E8").unwrap();
        let e = unit(10, 0);
        let a = is_m_admissible(&l, &e, 1, 10).unwrap();
        let c = a.certificate().unwrap();
        assert!(c.verify(&l));
        assert_eq!(c.g, unit(10, 1));
        let h2 = lattice::hyperbolic(2);
        let a2 = is_m_admissible(&h2, &ivec(&[1, 0]), 2, 10).unwrap();
        assert_eq!(a2.certificate().unwrap().g, ivec(&[0, 1]));
        let bad = is_m_admissible(&h2, &ivec(&[1, 0]), 1, 10).unwrap();
        assert!(matches!(bad, Admissibility::Obstructed { .. }));
        assert!(is_m_admissible(&l, &matrix::vscale(&BigInt::from(2), &e), 1, 10).is_err());
        assert!(is_m_admissible(&l, &unit(10, 4), 1, 10).is_err());
    }

    #[test]
    fn double_admissibility_examples() {
        let l = lattice::standard_lattice("H+H+E8").unwrap();
        let c = is_doubly_admissible(&l, &unit(12, 0), &unit(12, 2)).unwrap();
        let c = c.certificate().unwrap();
        assert!(lattice::same_isometry_class(&c.complement(), &lattice::root_e(8)).unwrap().unwrap());
        // Sheared generators e₁, e₁ + e₃.
        let e2 = matrix::vadd(&unit(12, 0), &unit(12, 2));
        assert!(is_doubly_admissible(&l, &unit(12, 0), &e2).unwrap().certificate().unwrap().verify(&l));
        let l2 = lattice::standard_lattice("H(2)+H").unwrap();
        assert!(plane_divisibility_obstructed(&l2, &unit(4, 0), &unit(4, 2)).unwrap());
    }

    #[test]
    fn transports_in_hh() {
        let l = lattice::standard_lattice("H+H").unwrap();
        let i = Sublattice::new(l.clone(), Mat::from_cols(4, &[unit(4, 0), unit(4, 2)])).unwrap();
        let g = hh_transport(&l, &i, &i, &unit(4, 0), &unit(4, 0)).unwrap();
        assert_eq!(g.apply(&unit(4, 0)), unit(4, 0));
        // Swap of the two planes.
        let s = hh_transport(&l, &i, &i, &unit(4, 0), &unit(4, 2)).unwrap();
        assert_eq!(s.apply(&unit(4, 0)), unit(4, 2));
        // Normalising a sheared isotropic vector of another plane.
        let e = ivec(&[1, 0, 1, 0]);
        let i2 = Sublattice::new(l.clone(), Mat::from_cols(4, &[e.clone(), ivec(&[0, 0, 1, 0])])).unwrap();
        let t = hh_transport(&l, &i2, &i, &e, &unit(4, 0)).unwrap();
        assert_eq!(t.apply(&e), unit(4, 0));
    }

    #[test]
    fn mirror_lattice_of_degree_two() {
        let lam = lattice::k3_lattice();
        let mut v = vec![BigInt::zero(); 22];
        v[4] = BigInt::one();
        v[5] = BigInt::one();
        let l = Sublattice::new(lam.clone(), Mat::column(&v)).unwrap();
        let cert = AdmissibilityCertificate { e: unit(22, 0), g: unit(22, 1), m: BigInt::one(), div_e: BigInt::one() };
        let lc = mirror_lattice(&l, &cert).unwrap();
        let target = lattice::standard_lattice("H+E8+E8+A1").unwrap();
        assert_eq!(lattice::same_isometry_class(&lc.lattice(), &target).unwrap(), Some(true));
        // Duality.
        let back = mirror_lattice(&lc, &cert).unwrap();
        assert!(back.same_span(&l));
    }

    #[test]
    fn mirror_lattice_of_rank_eighteen() {
        let lam = lattice::k3_lattice();
        let basis = Mat::zeros(4, 18).vstack(&Mat::identity(18));
        let l = Sublattice::new(lam, basis).unwrap();
        let cert = AdmissibilityCertificate { e: unit(22, 0), g: unit(22, 1), m: BigInt::one(), div_e: BigInt::one() };
        let lc = mirror_lattice(&l, &cert).unwrap();
        assert_eq!(lc.lattice(), lattice::hyperbolic(1));
    }

    #[test]
    fn h_plus_d16_is_index_two() {
        let (dp, _) = d16_plus().unwrap();
        assert!(dp.is_even() && dp.is_unimodular());
        let s = h_plus_d16_control().unwrap();
        assert_eq!(s.saturation_index(), BigInt::from(2));
        assert!(!s.is_primitive());
        let e8e8 = lattice::standard_lattice("H+E8+E8").unwrap();
        assert_eq!(lattice::same_isometry_class(&s.ambient, &e8e8).unwrap(), Some(true));
    }

    #[test]
    fn degree_two_instances_verify() {
        for inst in dht_instances() {
            let r = run_dht_instance(&inst).unwrap();
            assert!(r.verified, "{}: {}", inst.name, serde_json::to_string(&r).unwrap());
            assert!(same_root_type(&r.component_root_type, inst.root_type));
        }
    }

    #[test]
    fn degree_mismatch_is_refuted_before_building() {
        let inst = &dht_instances()[0];
        let (deg, _, _) = dht_sides(inst).unwrap();
        let i1 = || FramedFibre::plain(KodairaType::I(1));
        let split = LoopSplit::new(FibreConfig::new(vec![i1(), i1()]), FibreConfig::new(vec![FramedFibre::plain(KodairaType::I(22))])).unwrap();
        let fib = FibrationSide { split, gamma: None };
        let r = check_mirror_pair(&deg, &fib, &WitnessMode::Auto).unwrap();
        assert_eq!(r.verdict, Some(false));
        assert!(!r.factors.degrees_match);
    }

    #[test]
    fn non_primitive_gamma_is_refuted() {
        let inst = &dht_instances()[1];
        let (deg, mut fib, sm) = dht_sides(inst).unwrap();
        let r = fibration::component_lattice(&sm).unwrap();
        assert_eq!(r.saturation_index(), BigInt::from(2));
        fib.gamma = Some(r);
        let rep = check_mirror_pair(&deg, &fib, &WitnessMode::Auto).unwrap();
        assert_eq!(rep.verdict, Some(false));
        assert!(!rep.primitivity.gamma_primitive);
        assert_eq!(rep.primitivity.gamma_index, "2");
    }

    #[test]
    fn supplied_witness_is_verified() {
        let inst = &dht_instances()[0];
        let (deg, fib, _) = dht_sides(inst).unwrap();
        let (psi1, psi2) = auto_factor_isometries(&deg, &fib).unwrap().unwrap();
        for direction in [SplitDirection::FromDegeneration, SplitDirection::FromFibration] {
            let w = MirrorWitness { psi1: psi1.clone(), psi2: psi2.clone(), psihat: None, m: 1, direction };
            let r = check_mirror_pair(&deg, &fib, &WitnessMode::Supplied(w)).unwrap();
            assert_eq!(r.verdict, Some(true), "{}", r.reason);
        }
        let bad = MirrorWitness { psi1: psi1.scale(&BigInt::from(-1)), psi2, psihat: None, m: 1, direction: SplitDirection::FromDegeneration };
        let r = check_mirror_pair(&deg, &fib, &WitnessMode::Supplied(bad)).unwrap();
        assert_eq!(r.verdict, Some(false));
        assert_eq!(r.factors.isometries, Some(false));
    }

    #[test]
    fn weak_del_pezzo_compatibility() {
        for inst in dht_instances() {
            let (deg, _, sm) = dht_sides(&inst).unwrap();
            let gamma = fibration::fibration_gamma(&sm).unwrap();
            let r = check_wdp_mirror(&deg.model, &deg.l, &sm.glued, &gamma).unwrap();
            assert_eq!(r.verdict, Some(true), "{}: {}", inst.name, serde_json::to_string(&r).unwrap());
        }
    }
}
