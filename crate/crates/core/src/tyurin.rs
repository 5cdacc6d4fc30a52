//! Gluing two quasi del Pezzo homomorphisms along the elliptic
//! pseudolattice and extracting the lattices of the resulting degeneration:
//! the kernel `K`, the saturated adjoint image `Ē`, the quotient `M = K/Ē`,
//! the isotropic plane `Ψ`, the class `ζ` and the Néron–Severi lattice of
//! `M`. Also handles lattice, lifted and intersection polarisations,
//! coupling groups, stability checks and isometries between factors.

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::lattice::{self, IntLattice, Quotient, Signature, Sublattice};
use crate::matrix::{self, ivec, Mat, Vector};
use crate::pseudo::{self, Degree, EBasis, Frame, PseudoHom, QdpModel, SurfaceLikeData};
use crate::snf;

/// Default coefficient cap for effectivity searches.
pub const DEFAULT_EFFECTIVE_CAP: u32 = 30;

/// One side of a gluing, expressed in its certifying elliptic basis.
#[derive(Clone, Debug)]
pub struct Factor {
    /// The quasi del Pezzo hom in the glued coordinates.
    pub hom: PseudoHom,
    /// Surface-like data (point-like vector, NS, canonical class).
    pub data: SurfaceLikeData,
    /// Canonical model.
    pub model: QdpModel,
    /// Frame from the model's standard pair, when one was found.
    pub frame: Option<Frame>,
    /// Elliptic basis (in the caller's coordinates) in which the side was expressed.
    pub basis: EBasis,
}

impl Factor {
    fn certify(f: &PseudoHom, basis: &EBasis) -> Result<Factor> {
        let hom = f.in_basis(basis)?;
        let verdict = pseudo::is_quasi_del_pezzo(&hom)?;
        match verdict.verdict {
            Some(true) => {}
            Some(false) => return Err(Error::Precondition(format!("factor is not quasi del Pezzo: {}", verdict.reason))),
            None => return Err(Error::Budget(format!("factor undecided: {}", verdict.reason))),
        }
        let data = verdict.data.expect("data present when verified");
        if data.basis != EBasis::standard() {
            return Err(Error::Precondition("factor is not surface-like in the shared elliptic basis".into()));
        }
        Ok(Factor { hom, data, model: verdict.model.expect("model"), frame: verdict.frame, basis: basis.clone() })
    }

    /// NS lattice of the factor.
    pub fn ns(&self) -> &IntLattice {
        &self.data.ns
    }

    /// Canonical class in NS coordinates.
    pub fn canonical(&self) -> &Vector {
        &self.data.canonical
    }

    /// `K^⊥` inside NS.
    pub fn k_perp(&self) -> Sublattice {
        Sublattice::new(self.ns().clone(), Mat::column(self.canonical())).expect("K is nonzero").orthogonal_complement()
    }

    /// Converts a vector in standard-pair coordinates of the model to NS coordinates.
    pub fn from_standard(&self, v: &[BigInt]) -> Result<Vector> {
        let fr = self.frame.as_ref().ok_or_else(|| Error::Budget("no frame for this factor".into()))?;
        Ok(fr.matrix.apply(v))
    }
}

/// Clause-by-clause structural checks on a glued model.
#[derive(Clone, Debug, Serialize, PartialEq, Eq)]
pub struct GlueChecks {
    /// Twist of the glued hom is the identity.
    pub twist_identity: bool,
    /// The form restricted to `K` is symmetric.
    pub k_symmetric: bool,
    /// `Ē` has rank 2 and zero form, and pairs to zero with `K` on both sides.
    pub ebar_isotrivial: bool,
    /// `Ψ` is primitive in `G`.
    pub psi_primitive: bool,
    /// `⟨ψ, u⟩ = ⟨u, ψ⟩` for `ψ ∈ Ψ` and all `u`.
    pub psi_symmetric: bool,
    /// `Ψ ⊂ K`.
    pub psi_in_k: bool,
    /// The form vanishes on `Ψ`.
    pub psi_isotropic: bool,
    /// `Ψ ∩ Ē` is generated by `r(a)`.
    pub psi_meets_ebar: bool,
    /// `Ψ^⊥_G/Ψ` is isometric to `NS₁ ⊕ NS₂` via the NS projections.
    pub psi_perp_is_ns_sum: bool,
    /// `rank Ē + rank M = rank K` and the form on `M` is induced from `K`.
    pub exact_sequence: bool,
    /// A positive multiple of `ζ` is `(−K₁, K₂)` and `ζ` spans the radical of `Ψ^⊥_K/Ψ`.
    pub zeta_line: bool,
}

impl GlueChecks {
    /// True when every clause holds.
    pub fn all(&self) -> bool {
        self.twist_identity
            && self.k_symmetric
            && self.ebar_isotrivial
            && self.psi_primitive
            && self.psi_symmetric
            && self.psi_in_k
            && self.psi_isotropic
            && self.psi_meets_ebar
            && self.psi_perp_is_ns_sum
            && self.exact_sequence
            && self.zeta_line
    }
}

/// Full output of gluing two quasi del Pezzo homs along `(f₁, −f₂)`.
#[derive(Clone, Debug)]
pub struct GluedModel {
    /// The two sides; `q(K₁,K₁) ≥ 0`.
    pub factors: [Factor; 2],
    /// True when the inputs were swapped to make the first degree nonnegative.
    pub swapped: bool,
    /// Glued hom `G → E`.
    pub f: PseudoHom,
    /// Right adjoint of `f`.
    pub r: Mat,
    /// Basis (columns in `G`) of `K = ker f`.
    pub k_basis: Mat,
    /// `K` with the restricted (symmetric) form.
    pub k_lattice: IntLattice,
    /// Basis (columns in `G`) of `Ē`.
    pub ebar: Mat,
    /// `M = K/Ē` with representatives in `K` coordinates.
    pub m: Quotient,
    /// Basis (columns in `G`) of `Ψ = ⟨(p₁,0), (0,p₂)⟩`.
    pub psi: Mat,
    /// Basis of `Ψ^⊥_K/Ψ` as columns in `NS₁ ⊕ NS₂` coordinates.
    pub w_basis: Mat,
    /// `Ψ^⊥_K/Ψ` with its (degenerate) form.
    pub w: IntLattice,
    /// `ζ` in `w_basis` coordinates.
    pub zeta: Vector,
    /// `NS(M) = (Ψ^⊥_K/Ψ)/Zζ`.
    pub ns_m: Quotient,
    /// Degree `q(K₁,K₁)` with the quadric flag.
    pub degree: Degree,
    /// Structural verification results.
    pub checks: GlueChecks,
}

fn common_basis(f1: &PseudoHom, f2: &PseudoHom) -> Result<(EBasis, EBasis)> {
    let t1 = f1.twist()?;
    for b in pseudo::ebasis_candidates(&t1, 12) {
        if pseudo::surface_like(f1, &b).is_ok() && pseudo::surface_like(f2, &b).is_ok() {
            return Ok((b.clone(), b));
        }
    }
    // The factors of an abstract gluing may be re-based independently.
    let pick = |f: &PseudoHom| -> Result<EBasis> {
        let t = f.twist()?;
        pseudo::ebasis_candidates(&t, 12)
            .into_iter()
            .find(|b| pseudo::surface_like(f, b).is_ok())
            .ok_or_else(|| Error::Precondition("factor is not surface-like in any candidate basis".into()))
    };
    Ok((pick(f1)?, pick(f2)?))
}

/// Builds the glued model of two quasi del Pezzo homs with opposite degrees.
/// The factors are re-expressed in a shared elliptic basis when one exists.
pub fn build_glued(f1: &PseudoHom, f2: &PseudoHom) -> Result<GluedModel> {
    let (b1, b2) = common_basis(f1, f2)?;
    let mut fa = Factor::certify(f1, &b1)?;
    let mut fb = Factor::certify(f2, &b2)?;
    let (d1, d2) = (fa.data.degree.clone(), fb.data.degree.clone());
    if d1 != -&d2 {
        return Err(Error::Precondition(format!("degrees {d1} and {d2} are not opposite")));
    }
    let swapped = d1.is_negative();
    if swapped {
        std::mem::swap(&mut fa, &mut fb);
    }
    assemble([fa, fb], swapped)
}

/// Builds the glued model of two homs that are already expressed in a common
/// elliptic basis in which both are surface-like.
pub fn build_glued_in_basis(f1: &PseudoHom, f2: &PseudoHom, basis: &EBasis) -> Result<GluedModel> {
    let fa = Factor::certify(f1, basis)?;
    let fb = Factor::certify(f2, basis)?;
    if fa.data.degree != -&fb.data.degree {
        return Err(Error::Precondition("degrees are not opposite".into()));
    }
    if fa.data.degree.is_negative() {
        return Err(Error::Precondition("first side must have nonnegative degree".into()));
    }
    assemble([fa, fb], false)
}

/// Glued model of two anticanonical pairs `(NS, K)`.
pub fn build_glued_from_pairs(p1: (&IntLattice, &[BigInt]), p2: (&IntLattice, &[BigInt])) -> Result<GluedModel> {
    let f1 = pseudo::from_anticanonical_pair(p1.0, p1.1)?;
    let f2 = pseudo::from_anticanonical_pair(p2.0, p2.1)?;
    build_glued(&f1, &f2)
}

fn block_vec(a: &[BigInt], b: &[BigInt]) -> Vector {
    let mut v = a.to_vec();
    v.extend_from_slice(b);
    v
}

fn assemble(factors: [Factor; 2], swapped: bool) -> Result<GluedModel> {
    let f = pseudo::glue(&factors[0].hom, &factors[1].hom, -1)?;
    let g = &f.source;
    let chi = g.gram();
    let n1 = factors[0].hom.source.rank();
    let n2 = factors[1].hom.source.rank();
    let n = n1 + n2;
    let r = f.right_adjoint()?;
    let twist_identity = f.twist()? == Mat::identity(2);

    // K and its form.
    let k_basis = snf::kernel(&f.matrix);
    let k_gram = chi.congruence(&k_basis);
    let k_symmetric = k_gram.is_symmetric();
    if !k_symmetric {
        return Err(Error::Precondition("form on K is not symmetric".into()));
    }
    let k_lattice = IntLattice::new(k_gram)?;

    // Ē.
    let ebar = snf::saturate_cols(&r);
    let ebar_in_k = snf::coords_in(&k_basis, &ebar).ok_or_else(|| Error::Precondition("Ē is not contained in K".into()))?;
    let ebar_isotrivial = ebar.cols() == 2
        && chi.congruence(&ebar).is_zero()
        && (&(&ebar.transpose() * chi) * &k_basis).is_zero()
        && (&(&k_basis.transpose() * chi) * &ebar).is_zero();
    let ebar_sub = Sublattice::new(k_lattice.clone(), ebar_in_k)?;
    let m = lattice::quotient_by_radical_part(&k_lattice, &ebar_sub)?;
    let exact_sequence = ebar.cols() + m.lattice.rank() == k_basis.cols()
        && k_lattice.gram().congruence(&m.reps) == *m.lattice.gram();

    // Ψ.
    let zeros1 = vec![BigInt::zero(); n1];
    let zeros2 = vec![BigInt::zero(); n2];
    let psi1 = block_vec(&factors[0].data.pointlike, &zeros2);
    let psi2 = block_vec(&zeros1, &factors[1].data.pointlike);
    let psi = Mat::from_cols(n, &[psi1.clone(), psi2.clone()]);
    let psi_primitive = snf::cols_primitive(&psi);
    let psi_symmetric = (&chi.transpose() * &psi) == (chi * &psi);
    let psi_in_k = (&f.matrix * &psi).is_zero();
    let psi_isotropic = chi.congruence(&psi).is_zero();
    let ra = r.apply(&ivec(&[1, 0]));
    let meet = snf::intersect_spans(&psi, &ebar);
    let psi_meets_ebar = meet.cols() == 1 && snf::solve_int(&meet, &ra).is_some() && snf::solve_int(&Mat::column(&ra), &meet.col(0)).is_some();

    // NS projection of Ψ^⊥_G onto NS₁ ⊕ NS₂.
    let ns_sum = factors[0].ns().direct_sum(factors[1].ns());
    let (m1, m2) = (factors[0].ns().rank(), factors[1].ns().rank());
    let to_ns = |u: &[BigInt]| -> Result<Vector> {
        let a = factors[0].data.ns_class(&u[..n1])?;
        let b = factors[1].data.ns_class(&u[n1..])?;
        Ok(block_vec(&a, &b))
    };
    let psi_rows = (chi * &psi).transpose();
    let psi_perp_g = snf::kernel(&psi_rows);
    let images: Vec<Vector> = psi_perp_g.col_vecs().iter().map(|u| to_ns(u)).collect::<Result<_>>()?;
    let proj_g = Mat::from_cols(m1 + m2, &images);
    let psi_perp_is_ns_sum = {
        let s = snf::smith(&proj_g);
        s.rank == m1 + m2
            && (0..s.rank).all(|i| s.d.get(i, i).is_one())
            && ns_sum.gram().congruence(&proj_g) == -&chi.congruence(&psi_perp_g)
    };

    // Ψ^⊥_K/Ψ inside NS₁ ⊕ NS₂.
    let psi_perp_k = snf::kernel(&f.matrix.vstack(&psi_rows));
    let w_images: Vec<Vector> = psi_perp_k.col_vecs().iter().map(|u| to_ns(u)).collect::<Result<_>>()?;
    let w_basis = snf::lattice_basis(&Mat::from_cols(m1 + m2, &w_images));
    let w = ns_sum.rebased(&w_basis);
    let k1 = factors[0].canonical();
    let k2 = factors[1].canonical();
    let q1k1 = factors[0].ns().gram().apply(k1);
    let q2k2 = factors[1].ns().gram().apply(k2);
    let form_row = Mat::from_rows(vec![block_vec(&q1k1, &q2k2.iter().map(|x| -x).collect::<Vector>())])?;
    let w_expected = snf::kernel(&form_row);
    let same_w = Sublattice::spanned_by(ns_sum.clone(), &w_basis.col_vecs()).same_span(&Sublattice::spanned_by(ns_sum.clone(), &w_expected.col_vecs()));
    if !same_w {
        return Err(Error::Precondition("Ψ^⊥_K/Ψ differs from the kernel of the canonical pairing".into()));
    }

    // ζ.
    let neg_k1: Vector = k1.iter().map(|x| -x).collect();
    let zeta_ns = block_vec(&neg_k1, k2);
    let zc = snf::solve_int(&w_basis, &zeta_ns).ok_or_else(|| Error::Precondition("(−K₁, K₂) is not in Ψ^⊥_K/Ψ".into()))?;
    let c = matrix::content(&zc);
    let zeta: Vector = zc.iter().map(|x| x / &c).collect();
    let radical = snf::kernel(w.gram());
    let zeta_line = radical.cols() == 1 && Sublattice::spanned_by(w.clone(), &[zeta.clone()]).same_span(&Sublattice::spanned_by(w.clone(), &radical.col_vecs()));
    let zeta_sub = Sublattice::new(w.clone(), Mat::column(&zeta))?;
    let ns_m = lattice::quotient_by_radical_part(&w, &zeta_sub)?;

    let dval = factors[0].data.degree.to_i64().ok_or_else(|| Error::Input("degree out of range".into()))?;
    let degree = Degree { value: dval, prime: factors[0].model == QdpModel::Quadric };
    let checks = GlueChecks {
        twist_identity,
        k_symmetric,
        ebar_isotrivial,
        psi_primitive,
        psi_symmetric,
        psi_in_k,
        psi_isotropic,
        psi_meets_ebar,
        psi_perp_is_ns_sum,
        exact_sequence,
        zeta_line,
    };
    Ok(GluedModel {
        factors,
        swapped,
        f,
        r,
        k_basis,
        k_lattice,
        ebar,
        m,
        psi,
        w_basis,
        w,
        zeta,
        ns_m,
        degree,
        checks,
    })
}

/// Summary of a glued model for reports.
#[derive(Clone, Debug, Serialize)]
pub struct GluedSummary {
    /// Degree tag.
    pub degree: String,
    /// Ranks of the factors.
    pub factor_ranks: [usize; 2],
    /// Whether the inputs were swapped.
    pub swapped: bool,
    /// Invariants of `M`.
    pub m: lattice::LatticeInfo,
    /// Invariants of `NS(M)`.
    pub ns_m: lattice::LatticeInfo,
    /// Structural checks.
    pub checks: GlueChecks,
    /// `ζ` in `NS₁ ⊕ NS₂` coordinates.
    pub zeta: serde_json::Value,
}

impl GluedModel {
    /// The lattice `NS(M)`.
    pub fn ns_m_lattice(&self) -> &IntLattice {
        &self.ns_m.lattice
    }

    /// `NS₁ ⊕ NS₂`.
    pub fn ns_sum(&self) -> IntLattice {
        self.factors[0].ns().direct_sum(self.factors[1].ns())
    }

    /// `ζ` in `NS₁ ⊕ NS₂` coordinates.
    pub fn zeta_ns(&self) -> Vector {
        self.w_basis.apply(&self.zeta)
    }

    /// Coordinates in `Ψ^⊥_K/Ψ` of a vector of `NS₁ ⊕ NS₂`, if it lies there.
    pub fn w_coords(&self, x: &[BigInt]) -> Option<Vector> {
        snf::solve_int(&self.w_basis, x)
    }

    /// Image in `NS(M)` of a vector of `Ψ^⊥_K/Ψ` (in `w` coordinates).
    pub fn project(&self, x: &[BigInt]) -> Vector {
        self.ns_m.project(x)
    }

    /// Image in `NS(M)` of a vector of `NS₁ ⊕ NS₂` lying in `Ψ^⊥_K/Ψ`.
    pub fn project_ns(&self, x: &[BigInt]) -> Result<Vector> {
        let c = self.w_coords(x).ok_or_else(|| Error::Precondition("class is not in Ψ^⊥_K/Ψ".into()))?;
        Ok(self.project(&c))
    }

    /// Embeds a vector of factor `i`'s NS into `NS₁ ⊕ NS₂`.
    pub fn embed_factor(&self, i: usize, x: &[BigInt]) -> Vector {
        let (m1, m2) = (self.factors[0].ns().rank(), self.factors[1].ns().rank());
        if i == 0 {
            block_vec(x, &vec![BigInt::zero(); m2])
        } else {
            block_vec(&vec![BigInt::zero(); m1], x)
        }
    }

    /// Matrix of `φᵢ : K_i^⊥ → NS(M)` on the basis of [`Factor::k_perp`].
    pub fn phi(&self, i: usize) -> Result<Mat> {
        let kp = self.factors[i].k_perp();
        let cols: Vec<Vector> = kp.basis.col_vecs().iter().map(|v| self.project_ns(&self.embed_factor(i, v))).collect::<Result<_>>()?;
        Ok(Mat::from_cols(self.ns_m_lattice().rank(), &cols))
    }

    /// Report summary.
    pub fn summary(&self) -> GluedSummary {
        GluedSummary {
            degree: self.degree.to_string(),
            factor_ranks: [self.factors[0].hom.source.rank(), self.factors[1].hom.source.rank()],
            swapped: self.swapped,
            m: lattice::info(&self.m.lattice),
            ns_m: lattice::info(self.ns_m_lattice()),
            checks: self.checks.clone(),
            zeta: matrix::vec_to_json(&self.zeta_ns()),
        }
    }
}

// ---------------------------------------------------------------------------
// Polarisations

/// Preimage in `Ψ^⊥_K/Ψ` (as a sublattice of [`GluedModel::w`]) of a primitive
/// sublattice of `NS(M)`.
pub fn lift_polarisation(m: &GluedModel, l: &Sublattice) -> Result<Sublattice> {
    if !l.is_primitive() {
        return Err(Error::NotPrimitive("lattice polarisation".into()));
    }
    let mut gens: Vec<Vector> = l.basis.col_vecs().iter().map(|v| m.ns_m.reps.apply(v)).collect();
    gens.push(m.zeta.clone());
    let lhat = Sublattice::new(m.w.clone(), Mat::from_cols(m.w.rank(), &gens))?;
    if !lhat.is_primitive() {
        return Err(Error::Precondition("lifted polarisation is not primitive".into()));
    }
    Ok(lhat)
}

/// Image in `NS(M)` of a lifted polarisation; it must contain `ζ` and be primitive.
pub fn project_polarisation(m: &GluedModel, lhat: &Sublattice) -> Result<Sublattice> {
    if !lhat.is_primitive() {
        return Err(Error::NotPrimitive("lifted polarisation".into()));
    }
    if !lhat.contains(&m.zeta) {
        return Err(Error::Precondition("lifted polarisation does not contain ζ".into()));
    }
    let imgs: Vec<Vector> = lhat.basis.col_vecs().iter().map(|v| m.project(v)).collect();
    let l = Sublattice::spanned_by(m.ns_m_lattice().clone(), &imgs);
    if !l.is_primitive() {
        return Err(Error::Precondition("projected polarisation is not primitive".into()));
    }
    Ok(l)
}

/// Intersection polarisation `L̂ ∩ NS(Gᵢ)` as a sublattice of factor `i`'s NS.
pub fn intersection_polarisation(m: &GluedModel, lhat: &Sublattice, i: usize) -> Result<Sublattice> {
    let (m1, m2) = (m.factors[0].ns().rank(), m.factors[1].ns().rank());
    let amb = &m.w_basis * &lhat.basis;
    let factor_block = if i == 0 {
        Mat::identity(m1).vstack(&Mat::zeros(m2, m1))
    } else {
        Mat::zeros(m1, m2).vstack(&Mat::identity(m2))
    };
    let meet = if amb.cols() == 0 { Mat::zeros(m1 + m2, 0) } else { snf::intersect_spans(&amb, &factor_block) };
    let (lo, hi) = if i == 0 { (0, m1) } else { (m1, m1 + m2) };
    let basis = meet.block(lo..hi, 0..meet.cols());
    Sublattice::new(m.factors[i].ns().clone(), basis)
}

/// Quotient `L / φ(L₁ ⊕ L₂)`.
#[derive(Clone, Debug, Serialize, PartialEq, Eq)]
pub struct CouplingGroup {
    /// Invariant factors greater than one of the torsion part.
    pub invariant_factors: Vec<String>,
    /// Free rank of the quotient.
    pub free_rank: usize,
    /// Order of the quotient when it is finite.
    pub order: Option<String>,
}

impl CouplingGroup {
    /// True when the coupling group is finite.
    pub fn is_torsion(&self) -> bool {
        self.free_rank == 0
    }
}

/// Coupling quotient of a lattice polarisation, for any degree.
pub fn coupling_quotient(m: &GluedModel, l: &Sublattice) -> Result<CouplingGroup> {
    let lhat = lift_polarisation(m, l)?;
    let mut imgs = Vec::new();
    for i in 0..2 {
        let li = intersection_polarisation(m, &lhat, i)?;
        for v in li.basis.col_vecs() {
            imgs.push(m.project_ns(&m.embed_factor(i, &v))?);
        }
    }
    let coords: Vec<Vector> = imgs.iter().map(|v| l.coords(v).ok_or_else(|| Error::Precondition("φ(L₁ ⊕ L₂) not inside L".into()))).collect::<Result<_>>()?;
    let r = l.rank();
    if r == 0 {
        return Ok(CouplingGroup { invariant_factors: vec![], free_rank: 0, order: Some("1".into()) });
    }
    let mat = Mat::from_cols(r, &coords);
    let s = snf::smith(&mat);
    let inv: Vec<BigInt> = s.invariant_factors().into_iter().filter(|d| !d.is_one()).collect();
    let free_rank = r - s.rank;
    let order = (free_rank == 0).then(|| inv.iter().product::<BigInt>().to_string());
    Ok(CouplingGroup { invariant_factors: inv.iter().map(|d| d.to_string()).collect(), free_rank, order })
}

/// Coupling group of a lattice polarisation (degree must be nonzero).
pub fn coupling_group(m: &GluedModel, l: &Sublattice) -> Result<CouplingGroup> {
    if m.degree.value == 0 {
        return Err(Error::Precondition("coupling group needs a nonzero degree".into()));
    }
    coupling_quotient(m, l)
}

/// Torsion criterion: for each factor, whether `(Lᵢ)^⊥` in `K_i^⊥` equals `L̂^⊥ ∩ NS(Gᵢ)`.
pub fn torsion_criterion(m: &GluedModel, l: &Sublattice) -> Result<[bool; 2]> {
    let lhat = lift_polarisation(m, l)?;
    let lhat_perp = lhat.orthogonal_complement();
    let mut out = [false; 2];
    for (i, slot) in out.iter_mut().enumerate() {
        let li = intersection_polarisation(m, &lhat, i)?;
        let kp = m.factors[i].k_perp();
        // (Lᵢ)^⊥ inside K_i^⊥, as a sublattice of NS(Gᵢ).
        let li_in_kp: Vec<Vector> = li.basis.col_vecs().iter().map(|v| kp.coords(v).ok_or_else(|| Error::Precondition("Lᵢ ⊄ K_i^⊥".into()))).collect::<Result<_>>()?;
        let kp_l = kp.lattice();
        let perp_in_kp = if li_in_kp.is_empty() {
            kp_l.full()
        } else {
            Sublattice::new(kp_l.clone(), Mat::from_cols(kp_l.rank(), &li_in_kp))?.orthogonal_complement()
        };
        let lhs = Sublattice::spanned_by(m.factors[i].ns().clone(), &perp_in_kp.basis.col_vecs().iter().map(|c| kp.basis.apply(c)).collect::<Vec<_>>());
        let rhs = intersection_polarisation(m, &lhat_perp, i)?;
        *slot = lhs.same_span(&rhs);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Effectivity

/// Outcome of a bounded nonnegative-combination search.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Feasibility {
    /// Coefficients found.
    Found(Vec<u32>),
    /// Certified impossible within the coefficient cap.
    Infeasible,
    /// Search budget exhausted.
    Unknown,
}

/// Searches for `target = Σ cⱼ gⱼ` with integers `0 ≤ cⱼ ≤ cap`.
pub fn nonneg_combination(gens: &[Vector], target: &[BigInt], cap: u32) -> Feasibility {
    let dim = target.len();
    if gens.is_empty() {
        return if target.iter().all(|x| x.is_zero()) { Feasibility::Found(vec![]) } else { Feasibility::Infeasible };
    }
    let gm = Mat::from_cols(dim, gens);
    if snf::int_rank(&gm) == gens.len() {
        let rows = matrix::to_rational(&gm);
        let rhs: Vec<BigRational> = matrix::to_qvec(target);
        let Some(sol) = matrix::solve_rational(&rows, &rhs) else { return Feasibility::Infeasible };
        let Some(int) = matrix::from_qvec(&sol) else { return Feasibility::Infeasible };
        if int.iter().any(|c| c.is_negative() || *c > BigInt::from(cap)) {
            return Feasibility::Infeasible;
        }
        return Feasibility::Found(int.iter().map(|c| c.to_u32().unwrap_or(0)).collect());
    }
    let mut coeffs = vec![0u32; gens.len()];
    let mut budget: u64 = 2_000_000;
    fn rec(i: usize, gens: &[Vector], rest: &Vector, cap: u32, coeffs: &mut Vec<u32>, budget: &mut u64) -> Option<bool> {
        if *budget == 0 {
            return None;
        }
        *budget -= 1;
        if i == gens.len() {
            return Some(rest.iter().all(|x| x.is_zero()));
        }
        let mut cur = rest.clone();
        for c in 0..=cap {
            coeffs[i] = c;
            match rec(i + 1, gens, &cur, cap, coeffs, budget) {
                Some(true) => return Some(true),
                None => return None,
                Some(false) => {}
            }
            cur = matrix::vsub(&cur, &gens[i]);
        }
        coeffs[i] = 0;
        Some(false)
    }
    match rec(0, gens, &target.to_vec(), cap, &mut coeffs, &mut budget) {
        Some(true) => Feasibility::Found(coeffs),
        Some(false) => Feasibility::Infeasible,
        None => Feasibility::Unknown,
    }
}

/// Checks `±root` against the effective cone; `Some(true)` if one sign is a combination.
pub fn root_effective(gens: &[Vector], root: &[BigInt], cap: u32) -> Option<bool> {
    let neg: Vector = root.iter().map(|x| -x).collect();
    let mut unknown = false;
    for t in [root.to_vec(), neg] {
        match nonneg_combination(gens, &t, cap) {
            Feasibility::Found(_) => return Some(true),
            Feasibility::Unknown => unknown = true,
            Feasibility::Infeasible => {}
        }
    }
    if unknown {
        None
    } else {
        Some(false)
    }
}

/// Per-clause report of the stable polarisation check.
#[derive(Clone, Debug, Serialize, PartialEq, Eq)]
pub struct StableReport {
    /// `ζ ∈ L̂`.
    pub contains_zeta: bool,
    /// `L̂` has a class of positive square.
    pub positive_square: bool,
    /// Number of `−2`-classes examined (up to sign).
    pub roots_checked: usize,
    /// Every examined root is congruent to an effective combination (`None`: undecided).
    pub roots_effective: Option<bool>,
    /// A root that failed, in `NS(M)` coordinates.
    pub failing_root: Option<Vec<String>>,
    /// Coefficient cap used.
    pub cap: u32,
    /// Overall verdict.
    pub verdict: Option<bool>,
}

/// Checks the lattice-level conditions of a stable polarisation. `effective`
/// holds classes of `NS₁ ⊕ NS₂` lying in `Ψ^⊥_K/Ψ`; `roots` (in `NS(M)`
/// coordinates) must be supplied when `L̂/ζ` is not negative definite.
pub fn check_stable_polarisation(m: &GluedModel, lhat: &Sublattice, effective: &[Vector], roots: Option<&[Vector]>, cap: u32) -> Result<StableReport> {
    let contains_zeta = lhat.contains(&m.zeta);
    let sig = lhat.lattice().signature();
    let positive_square = sig.pos > 0;
    let eff_ns: Vec<Vector> = effective.iter().map(|e| m.project_ns(e)).collect::<Result<_>>()?;
    let l_imgs: Vec<Vector> = lhat.basis.col_vecs().iter().map(|v| m.project(v)).collect();
    let l = Sublattice::spanned_by(m.ns_m_lattice().clone(), &l_imgs);
    // Without supplied roots the `−2`-classes are enumerated when `L̂/ζ` is
    // definite; an indefinite `L̂/ζ` leaves the root clause undecided.
    let mut roots_effective = Some(true);
    let root_list: Vec<Vector> = match roots {
        Some(r) => r.to_vec(),
        None => {
            let ll = l.lattice();
            let s = ll.signature();
            if ll.rank() == 0 || (s.pos == ll.rank()) {
                vec![]
            } else if s.neg == ll.rank() {
                lattice::positive_roots(&ll, None)?.iter().map(|c| l.basis.apply(c)).collect()
            } else {
                roots_effective = None;
                vec![]
            }
        }
    };
    let mut failing_root = None;
    for r in &root_list {
        match root_effective(&eff_ns, r, cap) {
            Some(true) => {}
            Some(false) => {
                roots_effective = Some(false);
                failing_root = Some(r.iter().map(|x| x.to_string()).collect());
                break;
            }
            None => roots_effective = None,
        }
    }
    let verdict = match roots_effective {
        Some(true) => Some(contains_zeta && positive_square),
        Some(false) => Some(false),
        None => if contains_zeta && positive_square { None } else { Some(false) },
    };
    Ok(StableReport { contains_zeta, positive_square, roots_checked: root_list.len(), roots_effective, failing_root, cap, verdict })
}

/// Report of the weak del Pezzo polarisation check.
#[derive(Clone, Debug, Serialize, PartialEq, Eq)]
pub struct WdpReport {
    /// `N` is negative definite.
    pub negative_definite: bool,
    /// `N` is primitive.
    pub primitive: bool,
    /// `N ⊥ K`.
    pub orthogonal_to_k: bool,
    /// Positive roots of `N` are effective combinations (`None`: undecided).
    pub roots_effective: Option<bool>,
    /// Overall verdict.
    pub verdict: Option<bool>,
}

/// Checks a polarisation `N ⊂ K^⊥` of a weak del Pezzo pair `(Q, K)` with `K² > 0`.
pub fn check_wdp_polarisation(q: &IntLattice, k: &[BigInt], n: &Sublattice, effective: &[Vector], cap: u32) -> Result<WdpReport> {
    if !q.norm(k).is_positive() {
        return Err(Error::Precondition("weak del Pezzo check needs K² > 0".into()));
    }
    let nl = n.lattice();
    let negative_definite = nl.rank() == 0 || nl.signature().neg == nl.rank();
    let primitive = n.is_primitive();
    let orthogonal_to_k = n.basis.col_vecs().iter().all(|v| q.pair(k, v).is_zero());
    let roots_effective = if !negative_definite {
        Some(false)
    } else if nl.rank() == 0 {
        Some(true)
    } else {
        let mut res = Some(true);
        for c in lattice::positive_roots(&nl, None)? {
            let v = n.basis.apply(&c);
            match root_effective(effective, &v, cap) {
                Some(true) => {}
                Some(false) => {
                    res = Some(false);
                    break;
                }
                None => res = None,
            }
        }
        res
    };
    let verdict = if !(negative_definite && primitive && orthogonal_to_k) { Some(false) } else { roots_effective };
    Ok(WdpReport { negative_definite, primitive, orthogonal_to_k, roots_effective, verdict })
}

// ---------------------------------------------------------------------------
// Isometries

/// Induced map `NS(M_from) → NS(M_to)` of NS isometries `ψᵢ: NS(Gᵢ_from) → NS(Gᵢ_to)`
/// carrying canonical classes to canonical classes.
pub fn descend_isometries(from: &GluedModel, to: &GluedModel, psi1: &Mat, psi2: &Mat) -> Result<Mat> {
    for (i, p) in [psi1, psi2].iter().enumerate() {
        let (a, b) = (&from.factors[i], &to.factors[i]);
        if b.ns().gram().congruence(p) != *a.ns().gram() {
            return Err(Error::Precondition(format!("ψ{} is not an isometry", i + 1)));
        }
        if p.apply(a.canonical()) != *b.canonical() {
            return Err(Error::Precondition(format!("ψ{} does not preserve the canonical class", i + 1)));
        }
    }
    let big = psi1.block_diag(psi2);
    let r = from.ns_m_lattice().rank();
    let mut cols = Vec::with_capacity(r);
    for j in 0..r {
        let mut e = vec![BigInt::zero(); r];
        e[j] = BigInt::one();
        let w = from.ns_m.reps.apply(&e);
        let x = from.w_basis.apply(&w);
        cols.push(to.project_ns(&big.apply(&x))?);
    }
    let psi = Mat::from_cols(to.ns_m_lattice().rank(), &cols);
    if to.ns_m_lattice().gram().congruence(&psi) != *from.ns_m_lattice().gram() || !psi.det().abs().is_one() {
        return Err(Error::Precondition("descended map is not an isometry".into()));
    }
    Ok(psi)
}

/// Splits an isometry of `NS(M)` preserving both `φᵢ(K_i^⊥)` into NS isometries
/// fixing the canonical classes, after possibly negating it. Returns the sign used.
pub fn decompose_isometry(m: &GluedModel, psi: &Mat) -> Result<(i64, Mat, Mat)> {
    if m.degree.value == 0 {
        return Err(Error::Precondition("decomposition needs a nonzero degree".into()));
    }
    let ns = m.ns_m_lattice();
    if ns.gram().congruence(psi) != *ns.gram() {
        return Err(Error::Precondition("map is not an isometry of NS(M)".into()));
    }
    'sign: for sign in [1i64, -1] {
        let p = psi.scale(&BigInt::from(sign));
        let mut parts = Vec::new();
        for i in 0..2 {
            let fac = &m.factors[i];
            let kp = fac.k_perp();
            let phi = m.phi(i)?;
            let moved = &p * &phi;
            let Some(c) = snf::coords_in(&phi, &moved) else { return Err(Error::Precondition(format!("ψ does not preserve K_{}^⊥", i + 1))) };
            // ψᵢ on NS ⊗ Q = K^⊥ ⊕ QK: B ↦ B·C, K ↦ K.
            let src = kp.basis.hstack(&Mat::column(fac.canonical()));
            let dst = (&kp.basis * &c).hstack(&Mat::column(fac.canonical()));
            let inv = matrix::rational_inverse(&src).ok_or_else(|| Error::Degenerate("K^⊥ ⊕ K is not of full rank".into()))?;
            let dq = matrix::to_rational(&dst);
            let mut out = Mat::zeros(src.rows(), src.rows());
            for a in 0..src.rows() {
                for b in 0..src.rows() {
                    let mut acc = BigRational::zero();
                    for t in 0..src.rows() {
                        acc += &dq[a][t] * &inv[t][b];
                    }
                    if !acc.is_integer() {
                        continue 'sign;
                    }
                    out.set(a, b, acc.to_integer());
                }
            }
            if fac.ns().gram().congruence(&out) != *fac.ns().gram() {
                continue 'sign;
            }
            parts.push(out);
        }
        let p2 = parts.pop().unwrap();
        let p1 = parts.pop().unwrap();
        return Ok((sign, p1, p2));
    }
    Err(Error::Precondition("isometry does not split over the factors".into()))
}

/// Signature expected of `NS(M)` for K3 gluings.
pub fn k3_ns_signature() -> Signature {
    Signature { pos: 1, neg: 17, null: 0 }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn chain(n: usize) -> PseudoHom {
        QdpModel::Chain { n }.canonical_hom()
    }

    #[test]
    fn degree_nine_gluing() {
        let m = build_glued(&chain(3), &chain(21)).unwrap();
        assert!(m.checks.all(), "{:?}", m.checks);
        assert_eq!(m.degree, Degree { value: 9, prime: false });
        let ns = m.ns_m_lattice();
        assert_eq!(ns.rank(), 18);
        assert!(ns.is_even() && ns.is_unimodular());
        assert_eq!(ns.signature(), k3_ns_signature());
        assert_eq!(m.m.lattice.rank(), 20);
        let full = ns.full();
        let q = coupling_group(&m, &full).unwrap();
        assert_eq!(q.order.as_deref(), Some("3"));
    }

    #[test]
    fn swapped_inputs() {
        let a = build_glued(&chain(3), &chain(21)).unwrap();
        let b = build_glued(&chain(21), &chain(3)).unwrap();
        assert!(b.swapped && !a.swapped);
        assert_eq!(a.k_lattice.gram(), b.k_lattice.gram());
    }

    #[test]
    fn lift_and_project() {
        let m = build_glued(&chain(3), &chain(21)).unwrap();
        let zero = Sublattice::new(m.ns_m_lattice().clone(), Mat::zeros(18, 0)).unwrap();
        let lh = lift_polarisation(&m, &zero).unwrap();
        assert_eq!(lh.rank(), 1);
        assert!(lh.contains(&m.zeta));
        for i in 0..2 {
            assert_eq!(intersection_polarisation(&m, &lh, i).unwrap().rank(), 0);
        }
        let full = lift_polarisation(&m, &m.ns_m_lattice().full()).unwrap();
        assert_eq!(full.rank(), 19);
        assert_eq!(intersection_polarisation(&m, &full, 0).unwrap().rank(), 0);
        assert_eq!(intersection_polarisation(&m, &full, 1).unwrap().rank(), 18);
        let back = project_polarisation(&m, &full).unwrap();
        assert_eq!(back.rank(), 18);
    }

    #[test]
    fn identity_descends_to_identity() {
        let m = build_glued(&chain(3), &chain(21)).unwrap();
        let id1 = Mat::identity(1);
        let id2 = Mat::identity(19);
        let psi = descend_isometries(&m, &m, &id1, &id2).unwrap();
        assert_eq!(psi, Mat::identity(18));
        let (s, a, b) = decompose_isometry(&m, &psi).unwrap();
        assert_eq!((s, a, b), (1, id1, id2));
    }

    #[test]
    fn feasibility_search() {
        let gens = vec![ivec(&[1, 0]), ivec(&[0, 1]), ivec(&[1, 1])];
        assert!(matches!(nonneg_combination(&gens, &ivec(&[2, 3]), 5), Feasibility::Found(_)));
        assert_eq!(nonneg_combination(&gens, &ivec(&[-1, 0]), 5), Feasibility::Infeasible);
        let indep = vec![ivec(&[1, -1]), ivec(&[0, 1])];
        assert_eq!(nonneg_combination(&indep, &ivec(&[2, -1]), 5), Feasibility::Found(vec![2, 1]));
    }
}
