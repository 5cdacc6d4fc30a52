//! Elliptic fibrations over discs and their splittings: Kodaira fibre
//! pseudolattice models, disc fibrations assembled from framed fibres,
//! allowable loops on a K3 fibration, fibre component classes,
//! Γ-polarisations, Mordell–Weil coupling data, and the transfer of
//! polarisations to rational elliptic surfaces.

use std::collections::HashMap;
use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use num_bigint::BigInt;
use num_traits::{One, Signed, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::lattice::{self, IntLattice, Quotient, Sublattice};
use crate::matrix::{self, ivec, Mat, Vector};
use crate::pseudo::{self, EBasis, PseudoHom};
use crate::snf;
use crate::tyurin::{self, CouplingGroup, GluedModel};

// ---------------------------------------------------------------------------
// Kodaira fibres

/// Kodaira type of a singular fibre without multiplicity.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum KodairaType {
    /// `I_n`, `n ≥ 1`.
    I(u32),
    /// `I*_n`, `n ≥ 0`.
    IStar(u32),
    /// `II`.
    II,
    /// `III`.
    III,
    /// `IV`.
    IV,
    /// `IV*`.
    IVStar,
    /// `III*`.
    IIIStar,
    /// `II*`.
    IIStar,
}

impl fmt::Display for KodairaType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            KodairaType::I(n) => write!(f, "I{n}"),
            KodairaType::IStar(n) => write!(f, "I*{n}"),
            KodairaType::II => write!(f, "II"),
            KodairaType::III => write!(f, "III"),
            KodairaType::IV => write!(f, "IV"),
            KodairaType::IVStar => write!(f, "IV*"),
            KodairaType::IIIStar => write!(f, "III*"),
            KodairaType::IIStar => write!(f, "II*"),
        }
    }
}

impl FromStr for KodairaType {
    type Err = Error;

    /// Accepts `I18`, `I(18)`, `I*12`, `Istar12`, `Istar(12)`, `II`, `III`,
    /// `IV`, `IV*`, `IVstar`, `III*`, `IIIstar`, `II*`, `IIstar`.
    fn from_str(tag: &str) -> Result<Self> {
        let t = tag.trim();
        if t.starts_with(|c: char| c.is_ascii_digit() || c == 'm' || c == '_') {
            return Err(Error::Input(format!("multiple fibre `{t}` is not supported")));
        }
        let norm: String = t.replace("star", "*").chars().filter(|c| !matches!(c, '(' | ')' | ' ' | '_')).collect();
        let fixed = match norm.as_str() {
            "II" => Some(KodairaType::II),
            "III" => Some(KodairaType::III),
            "IV" => Some(KodairaType::IV),
            "IV*" => Some(KodairaType::IVStar),
            "III*" => Some(KodairaType::IIIStar),
            "II*" => Some(KodairaType::IIStar),
            _ => None,
        };
        if let Some(k) = fixed {
            return Ok(k);
        }
        let bad = || Error::UnknownFibre(t.to_string());
        if let Some(rest) = norm.strip_prefix("I*") {
            let n: u32 = rest.parse().map_err(|_| bad())?;
            return Ok(KodairaType::IStar(n));
        }
        if let Some(rest) = norm.strip_prefix('I') {
            let n: u32 = rest.parse().map_err(|_| bad())?;
            if n == 0 {
                return Err(Error::Input("I0 is a smooth fibre".into()));
            }
            return Ok(KodairaType::I(n));
        }
        Err(bad())
    }
}

impl Serialize for KodairaType {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}

impl<'de> Deserialize<'de> for KodairaType {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

impl KodairaType {
    /// Euler number of the fibre, equal to the length of its word.
    pub fn euler(&self) -> usize {
        match self {
            KodairaType::I(n) => *n as usize,
            KodairaType::IStar(n) => *n as usize + 6,
            KodairaType::II => 2,
            KodairaType::III => 3,
            KodairaType::IV => 4,
            KodairaType::IVStar => 8,
            KodairaType::IIIStar => 9,
            KodairaType::IIStar => 10,
        }
    }

    /// Vanishing-cycle word in the local basis `(a, b)`.
    pub fn word(&self) -> Vec<Vector> {
        let a = ivec(&[1, 0]);
        let bpa = ivec(&[1, 1]);
        let bma = ivec(&[-1, 1]);
        let rep = |k: usize| std::iter::repeat(a.clone()).take(k);
        match self {
            KodairaType::I(n) => rep(*n as usize).collect(),
            KodairaType::IStar(n) => rep(*n as usize + 4).chain([bma, bpa]).collect(),
            KodairaType::II => vec![a, bpa],
            KodairaType::III => rep(2).chain([bpa]).collect(),
            KodairaType::IV => rep(3).chain([bpa]).collect(),
            KodairaType::IVStar => rep(5).chain([bma, bpa.clone(), bpa]).collect(),
            KodairaType::IIIStar => rep(6).chain([bma, bpa.clone(), bpa]).collect(),
            KodairaType::IIStar => rep(7).chain([bma, bpa.clone(), bpa]).collect(),
        }
    }

    /// Trace of the local monodromy.
    pub fn expected_trace(&self) -> i64 {
        match self {
            KodairaType::I(_) => 2,
            KodairaType::IStar(_) => -2,
            KodairaType::II | KodairaType::IIStar => 1,
            KodairaType::III | KodairaType::IIIStar => 0,
            KodairaType::IV | KodairaType::IVStar => -1,
        }
    }

    /// Order of the local monodromy, `None` when infinite.
    pub fn expected_order(&self) -> Option<u32> {
        match self {
            KodairaType::I(_) => None,
            KodairaType::IStar(0) => Some(2),
            KodairaType::IStar(_) => None,
            KodairaType::II | KodairaType::IIStar => Some(6),
            KodairaType::III | KodairaType::IIIStar => Some(4),
            KodairaType::IV | KodairaType::IVStar => Some(3),
        }
    }

    /// Root type of the non-identity components.
    pub fn component_root_type(&self) -> String {
        match self {
            KodairaType::I(1) | KodairaType::II => "0".into(),
            KodairaType::I(n) => format!("A{}", n - 1),
            KodairaType::IStar(n) => format!("D{}", n + 4),
            KodairaType::III => "A1".into(),
            KodairaType::IV => "A2".into(),
            KodairaType::IVStar => "E6".into(),
            KodairaType::IIIStar => "E7".into(),
            KodairaType::IIStar => "E8".into(),
        }
    }
}

/// Order of an integer matrix up to 12, `None` if larger or infinite.
pub fn matrix_order(m: &Mat) -> Option<u32> {
    let id = Mat::identity(m.rows());
    let mut p = m.clone();
    for k in 1..=12 {
        if p == id {
            return Some(k);
        }
        p = &p * m;
    }
    None
}

/// Pseudolattice model of a single Kodaira fibre.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct KodairaFibre {
    /// Type of the fibre.
    pub kind: KodairaType,
    /// Vanishing-cycle word.
    pub word: Vec<Vector>,
    /// Euler number.
    pub euler: usize,
    /// Twist of the chain of the word.
    pub monodromy: Mat,
}

/// Builds the chain model of a fibre type and checks its monodromy against
/// the trace and order of Kodaira's table.
pub fn fibre_model(tag: &str) -> Result<KodairaFibre> {
    let kind: KodairaType = tag.parse()?;
    fibre_model_of(kind)
}

/// [`fibre_model`] for an already parsed type.
pub fn fibre_model_of(kind: KodairaType) -> Result<KodairaFibre> {
    let word = kind.word();
    let hom = pseudo::z_chain(&word)?;
    let monodromy = hom.twist()?;
    if !monodromy.det().is_one() {
        return Err(Error::Precondition(format!("monodromy of {kind} has determinant ≠ 1")));
    }
    let trace = monodromy.get(0, 0) + monodromy.get(1, 1);
    if trace != BigInt::from(kind.expected_trace()) || matrix_order(&monodromy) != kind.expected_order() {
        return Err(Error::Precondition(format!("monodromy of {kind} does not match its conjugacy class")));
    }
    Ok(KodairaFibre { kind, euler: word.len(), word, monodromy })
}

// ---------------------------------------------------------------------------
// Configurations

/// A fibre together with an `SL₂(Z)` framing applied to its word.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawFibre", into = "RawFibre")]
pub struct FramedFibre {
    /// Fibre type.
    pub kind: KodairaType,
    /// Framing matrix acting on `E`.
    pub framing: Mat,
}

#[derive(Serialize, Deserialize)]
struct RawFibre {
    #[serde(rename = "type")]
    kind: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    framing: Option<Mat>,
}

impl TryFrom<RawFibre> for FramedFibre {
    type Error = Error;
    fn try_from(r: RawFibre) -> Result<Self> {
        let kind = r.kind.parse()?;
        match r.framing {
            Some(g) => FramedFibre::framed(kind, g),
            None => Ok(FramedFibre::plain(kind)),
        }
    }
}

impl From<FramedFibre> for RawFibre {
    fn from(f: FramedFibre) -> Self {
        let framing = (f.framing != Mat::identity(2)).then_some(f.framing);
        RawFibre { kind: f.kind.to_string(), framing }
    }
}

impl FramedFibre {
    /// Fibre with the identity framing.
    pub fn plain(kind: KodairaType) -> Self {
        FramedFibre { kind, framing: Mat::identity(2) }
    }

    /// Fibre with an explicit framing, which must lie in `SL₂(Z)`.
    pub fn framed(kind: KodairaType, framing: Mat) -> Result<Self> {
        if framing.rows() != 2 || framing.cols() != 2 || !framing.det().is_one() {
            return Err(Error::Input("framing must be a 2×2 integer matrix of determinant 1".into()));
        }
        Ok(FramedFibre { kind, framing })
    }

    /// Framing from machine-integer rows.
    pub fn framed_i64(kind: KodairaType, rows: [[i64; 2]; 2]) -> Result<Self> {
        FramedFibre::framed(kind, Mat::from_i64(&[rows[0].to_vec(), rows[1].to_vec()]))
    }

    /// Framed word.
    pub fn word(&self) -> Vec<Vector> {
        self.kind.word().iter().map(|v| self.framing.apply(v)).collect()
    }

    /// Framed monodromy `g M g⁻¹`.
    pub fn monodromy(&self) -> Result<Mat> {
        let m = fibre_model_of(self.kind)?.monodromy;
        Ok(&(&self.framing * &m) * &self.framing.inverse_unimodular()?)
    }
}

/// Ordered list of framed fibres.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FibreConfig {
    /// Fibres in order.
    pub fibres: Vec<FramedFibre>,
}

impl FibreConfig {
    /// Configuration from fibres.
    pub fn new(fibres: Vec<FramedFibre>) -> Self {
        FibreConfig { fibres }
    }

    /// Total Euler number.
    pub fn euler(&self) -> usize {
        self.fibres.iter().map(|f| f.kind.euler()).sum()
    }

    /// Positions of each fibre's word inside the concatenated word.
    pub fn blocks(&self) -> Vec<Range<usize>> {
        let mut start = 0;
        self.fibres
            .iter()
            .map(|f| {
                let r = start..start + f.kind.euler();
                start = r.end;
                r
            })
            .collect()
    }

    /// Concatenated framed word.
    pub fn word(&self) -> Vec<Vector> {
        self.fibres.iter().flat_map(|f| f.word()).collect()
    }

    /// Product of the framed monodromies in order.
    pub fn monodromy_product(&self) -> Result<Mat> {
        let mut m = Mat::identity(2);
        for f in &self.fibres {
            m = &m * &f.monodromy()?;
        }
        Ok(m)
    }
}

/// Iterated gluing of the framed fibre chains; the twist equals the product
/// of the fibre monodromies in order.
pub fn build_disc_fibration(c: &FibreConfig) -> Result<PseudoHom> {
    let mut it = c.fibres.iter();
    let first = it.next().ok_or_else(|| Error::Input("empty fibre configuration".into()))?;
    let mut acc = pseudo::z_chain(&first.word())?;
    for f in it {
        acc = pseudo::glue(&acc, &pseudo::z_chain(&f.word())?, 1)?;
    }
    Ok(acc)
}

/// A loop splitting the base of a K3 fibration into two discs.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LoopSplit {
    /// Disc with Euler number at most 12.
    pub side1: FibreConfig,
    /// Complementary disc.
    pub side2: FibreConfig,
}

impl LoopSplit {
    /// Validated split: Euler numbers add to 24 and the first is at most 12.
    pub fn new(side1: FibreConfig, side2: FibreConfig) -> Result<Self> {
        let (e1, e2) = (side1.euler(), side2.euler());
        if e1 + e2 != 24 {
            return Err(Error::Input(format!("Euler numbers {e1} + {e2} do not add to 24")));
        }
        if e1 > 12 {
            return Err(Error::Input(format!("first side has Euler number {e1} > 12")));
        }
        Ok(LoopSplit { side1, side2 })
    }

    /// Split of a full configuration by fibre indices.
    pub fn from_indices(full: &FibreConfig, side1: &[usize], side2: &[usize]) -> Result<Self> {
        let mut seen = vec![false; full.fibres.len()];
        for &i in side1.iter().chain(side2) {
            if i >= seen.len() || seen[i] {
                return Err(Error::Input(format!("fibre index {i} is out of range or repeated")));
            }
            seen[i] = true;
        }
        if seen.iter().any(|s| !s) {
            return Err(Error::Input("split does not use every fibre".into()));
        }
        let pick = |idx: &[usize]| FibreConfig::new(idx.iter().map(|&i| full.fibres[i].clone()).collect());
        LoopSplit::new(pick(side1), pick(side2))
    }

    /// Euler numbers of both sides.
    pub fn eulers(&self) -> [usize; 2] {
        [self.side1.euler(), self.side2.euler()]
    }

    /// The two sides.
    pub fn sides(&self) -> [&FibreConfig; 2] {
        [&self.side1, &self.side2]
    }
}

/// Unipotent `[[1, e − 12], [0, 1]]` expected on a side of Euler number `e`.
pub fn boundary_unipotent(euler: usize) -> Mat {
    Mat::from_i64(&[vec![1, euler as i64 - 12], vec![0, 1]])
}

/// Outcome of the allowable-loop test.
#[derive(Clone, Debug, Serialize)]
pub struct AllowableReport {
    /// Verdict.
    pub allowable: bool,
    /// Euler numbers of the sides.
    pub euler: [usize; 2],
    /// Side twists in the configuration's coordinates.
    pub twists: [Mat; 2],
    /// Certifying elliptic basis (columns `a`, `b`).
    pub basis: Option<Mat>,
    /// Number of certifying bases among the candidates.
    pub certifying_bases: usize,
    /// False when more than one candidate basis certifies.
    pub unique: bool,
    /// Explanation when not allowable.
    pub reason: String,
}

impl AllowableReport {
    /// Certifying basis as an [`EBasis`].
    pub fn ebasis(&self) -> Option<EBasis> {
        self.basis.as_ref().map(|m| EBasis { a: m.col(0), b: m.col(1) })
    }
}

fn certifies(homs: &[PseudoHom; 2], eulers: [usize; 2], basis: &EBasis) -> Result<bool> {
    for (h, e) in homs.iter().zip(eulers) {
        let hb = h.in_basis(basis)?;
        if hb.twist()? != boundary_unipotent(e) {
            return Ok(false);
        }
        let ra = hb.right_adjoint()?.apply(&ivec(&[1, 0]));
        if !matrix::is_primitive_vector(&ra) {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Searches the candidate elliptic bases (the fixed vector of the first
/// side's twist, or a bounded enumeration when that twist is trivial) for
/// one in which both sides have the boundary unipotent of their Euler
/// number and primitive `r(a)`. The first certifying basis in candidate
/// order is returned.
pub fn allowable_check(s: &LoopSplit) -> Result<AllowableReport> {
    let eulers = s.eulers();
    let homs = [build_disc_fibration(&s.side1)?, build_disc_fibration(&s.side2)?];
    let twists = [homs[0].twist()?, homs[1].twist()?];
    let mut report = AllowableReport {
        allowable: false,
        euler: eulers,
        twists: twists.clone(),
        basis: None,
        certifying_bases: 0,
        unique: true,
        reason: String::new(),
    };
    if &twists[0] * &twists[1] != Mat::identity(2) {
        report.reason = "side monodromies are not mutually inverse".into();
        return Ok(report);
    }
    let mut found: Vec<EBasis> = Vec::new();
    for b in pseudo::ebasis_candidates(&twists[0], 12) {
        if certifies(&homs, eulers, &b)? {
            found.push(b);
        }
    }
    report.certifying_bases = found.len();
    report.unique = found.len() <= 1;
    match found.first() {
        Some(b) => {
            report.allowable = true;
            report.basis = Some(b.matrix());
        }
        None => report.reason = "no candidate basis puts both twists in boundary form with primitive r(a)".into(),
    }
    Ok(report)
}

/// Glued model of an allowable split.
#[derive(Clone, Debug)]
pub struct SplitModel {
    /// The split.
    pub split: LoopSplit,
    /// Allowable-loop certificate.
    pub allowable: AllowableReport,
    /// Disc fibration homs in the configuration's coordinates.
    pub homs: [PseudoHom; 2],
    /// Tyurin-style glued model along `(φ₁, −φ₂)`.
    pub glued: GluedModel,
}

/// Builds the K3 model of an allowable split by gluing the two sides.
pub fn build_k3_split_model(s: &LoopSplit) -> Result<SplitModel> {
    let report = allowable_check(s)?;
    let basis = report.ebasis().ok_or_else(|| Error::Precondition(format!("split is not allowable: {}", report.reason)))?;
    let homs = [build_disc_fibration(&s.side1)?, build_disc_fibration(&s.side2)?];
    let glued = tyurin::build_glued_in_basis(&homs[0], &homs[1], &basis)?;
    let expected = 12 - s.side1.euler() as i64;
    if glued.degree.value != expected {
        return Err(Error::Precondition(format!("glued degree {} differs from 12 − e = {expected}", glued.degree.value)));
    }
    Ok(SplitModel { split: s.clone(), allowable: report, homs, glued })
}

// ---------------------------------------------------------------------------
// Component classes and Γ-polarisations

/// Simple roots of the non-identity components of one fibre.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct FibreComponents {
    /// Index of the fibre on its side.
    pub fibre: usize,
    /// Type of the fibre.
    pub kind: KodairaType,
    /// Component classes in the side's NS coordinates.
    pub classes: Vec<Vector>,
}

/// Component classes of every fibre on one side: the NS images of the kernel
/// of the fibre's block of the hom, presented by a simple root system.
pub fn component_classes(m: &SplitModel, side: usize) -> Result<Vec<FibreComponents>> {
    let factor = &m.glued.factors[side];
    let ns = factor.ns();
    let n = factor.hom.source.rank();
    let config = m.split.sides()[side];
    let mut out = Vec::new();
    for (j, (range, fib)) in config.blocks().into_iter().zip(&config.fibres).enumerate() {
        let block = factor.hom.matrix.block(0..2, range.clone());
        let ker = snf::kernel(&block);
        let mut imgs = Vec::new();
        for k in ker.col_vecs() {
            let mut u = vec![BigInt::zero(); n];
            for (t, x) in range.clone().zip(k) {
                u[t] = x;
            }
            imgs.push(factor.data.ns_class(&u)?);
        }
        let classes = if imgs.is_empty() {
            vec![]
        } else {
            let sub = Sublattice::spanned_by(ns.clone(), &imgs);
            let l = sub.lattice();
            if l.signature().neg != l.rank() {
                return Err(Error::Precondition(format!("components of fibre {j} are not negative definite")));
            }
            lattice::simple_roots(&l, None)?.iter().map(|c| sub.basis.apply(c)).collect()
        };
        out.push(FibreComponents { fibre: j, kind: fib.kind, classes });
    }
    Ok(out)
}

/// All component classes of both sides, mapped into `NS(M)`.
pub fn component_classes_in_ns_m(m: &SplitModel) -> Result<Vec<Vector>> {
    let mut out = Vec::new();
    for side in 0..2 {
        for fc in component_classes(m, side)? {
            for c in fc.classes {
                out.push(m.glued.project_ns(&m.glued.embed_factor(side, &c))?);
            }
        }
    }
    Ok(out)
}

/// Sublattice `R ⊂ NS(M)` spanned by all component classes.
pub fn component_lattice(m: &SplitModel) -> Result<Sublattice> {
    let v = component_classes_in_ns_m(m)?;
    Ok(Sublattice::spanned_by(m.glued.ns_m_lattice().clone(), &v))
}

/// Root type of the component lattice, e.g. `"A17"` or `"D16+A1"`.
pub fn component_root_type(m: &SplitModel) -> Result<String> {
    let r = component_lattice(m)?;
    if r.rank() == 0 {
        return Ok("0".into());
    }
    lattice::root_system_name(&r.lattice())
}

/// The fibration polarisation `Γ`: saturation of the component lattice in `NS(M)`.
pub fn fibration_gamma(m: &SplitModel) -> Result<Sublattice> {
    Ok(component_lattice(m)?.saturate())
}

/// Report of the Γ-polarisation check on one side.
#[derive(Clone, Debug, Serialize, PartialEq, Eq)]
pub struct GammaReport {
    /// Side checked (0 or 1).
    pub side: usize,
    /// `Γ` is primitive in NS.
    pub primitive: bool,
    /// `q(γ, [r(b)]) = 0` for all `γ ∈ Γ`.
    pub orthogonal_to_rb: bool,
    /// `Γ` is negative definite.
    pub negative_definite: bool,
    /// Positive roots are nonnegative combinations of component classes (`None`: undecided).
    pub roots_effective: Option<bool>,
    /// Overall verdict.
    pub verdict: Option<bool>,
}

/// Checks that `Γ ⊂ NS` of a side of Euler number below 12 is a polarisation
/// generated in its positive roots by the supplied component classes.
pub fn check_gamma_polarisation(m: &SplitModel, gamma: &Sublattice, side: usize, components: &[Vector], cap: u32) -> Result<GammaReport> {
    let e = m.split.sides()[side].euler();
    if e >= 12 {
        return Err(Error::Precondition(format!("side has Euler number {e} ≥ 12")));
    }
    let data = &m.glued.factors[side].data;
    if gamma.ambient != data.ns {
        return Err(Error::Dimension("Γ must be given in the side's NS lattice".into()));
    }
    let primitive = gamma.is_primitive();
    let orthogonal_to_rb = gamma.generators().iter().all(|g| data.ns.pair(g, &data.rb_class).is_zero());
    let gl = gamma.lattice();
    let negative_definite = gl.rank() == 0 || gl.signature().neg == gl.rank();
    let roots_effective = if !negative_definite {
        Some(false)
    } else if gl.rank() == 0 {
        Some(true)
    } else {
        let mut res = Some(true);
        for c in lattice::positive_roots(&gl, None)? {
            match tyurin::root_effective(components, &gamma.basis.apply(&c), cap) {
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
    let verdict = if primitive && orthogonal_to_rb && negative_definite { roots_effective } else { Some(false) };
    Ok(GammaReport { side, primitive, orthogonal_to_rb, negative_definite, roots_effective, verdict })
}

/// Exact-sequence data `0 → R → Γ → MW → 0` together with the coupling group of `Γ`.
#[derive(Clone, Debug, Serialize)]
pub struct MwReport {
    /// Rank of the component lattice `R`.
    pub r_rank: usize,
    /// Root type of `R`.
    pub r_type: String,
    /// Rank of `Γ`.
    pub gamma_rank: usize,
    /// `R ⊂ Γ`.
    pub r_in_gamma: bool,
    /// Invariant factors (greater than one) of `Γ/R`.
    pub mw_torsion: Vec<String>,
    /// Free rank of `Γ/R`.
    pub mw_free_rank: usize,
    /// Coupling quotient of `Γ`.
    pub coupling: CouplingGroup,
    /// The surjection `Γ/R → Q(Γ)` is consistent: free ranks and finite orders are compatible.
    pub surjection_consistent: bool,
}

/// Mordell–Weil coupling data for a polarisation `Γ ⊂ NS(M)` of a split model.
pub fn mw_coupling_data(m: &SplitModel, gamma: Option<&Sublattice>) -> Result<MwReport> {
    let gamma = gamma.ok_or_else(|| Error::Precondition("a section split Ľ = H ⊕ Γ must be supplied".into()))?;
    let r = component_lattice(m)?;
    let r_type = if r.rank() == 0 { "0".to_string() } else { lattice::root_system_name(&r.lattice())? };
    let coords: Option<Vec<Vector>> = r.generators().iter().map(|v| gamma.coords(v)).collect();
    let r_in_gamma = coords.is_some();
    let coords = coords.ok_or_else(|| Error::Precondition("component lattice is not contained in Γ".into()))?;
    let (mw_torsion, mw_free_rank, mw_order) = if gamma.rank() == 0 {
        (vec![], 0, Some(BigInt::one()))
    } else {
        let s = snf::smith(&Mat::from_cols(gamma.rank(), &coords));
        let inv: Vec<BigInt> = s.invariant_factors().into_iter().filter(|d| !d.is_one()).collect();
        let free = gamma.rank() - s.rank;
        let order = (free == 0).then(|| inv.iter().product::<BigInt>());
        (inv, free, order)
    };
    let coupling = tyurin::coupling_quotient(&m.glued, gamma)?;
    let mut surjection_consistent = coupling.free_rank <= mw_free_rank;
    if let (Some(mw), Some(q)) = (&mw_order, &coupling.order) {
        let q: BigInt = q.parse().map_err(|_| Error::Input("coupling order".into()))?;
        surjection_consistent &= (mw % q).is_zero();
    }
    Ok(MwReport {
        r_rank: r.rank(),
        r_type,
        gamma_rank: gamma.rank(),
        r_in_gamma,
        mw_torsion: mw_torsion.iter().map(|d| d.to_string()).collect(),
        mw_free_rank,
        coupling,
        surjection_consistent,
    })
}

// ---------------------------------------------------------------------------
// Rational elliptic surfaces

/// Lattice data of a rational elliptic surface with an `I_d` fibre at infinity:
/// `Pic = I(1,9)`, fibre class `F = −K`, and the `I_d` components
/// `e₁ − e₂, …, e_{d−1} − e_d, F − (e₁ − e_d)`.
#[derive(Clone, Debug)]
pub struct RationalEllipticModel {
    /// Number of components of the boundary fibre.
    pub d: usize,
    /// `Pic(Y)`.
    pub pic: IntLattice,
    /// Fibre class.
    pub fibre: Vector,
    /// Boundary fibre components in `Pic` coordinates.
    pub boundary: Vec<Vector>,
    /// `F^⊥` basis (columns in `Pic`).
    pub fibre_perp: Mat,
    /// `F^⊥/ZF`.
    pub quotient: Quotient,
    /// `{β ∈ F^⊥/ZF : β·Dᵢ = 0}` as a sublattice of `F^⊥/ZF`.
    pub admissible: Sublattice,
}

/// Builds [`RationalEllipticModel`] for `1 ≤ d ≤ 9`.
pub fn rational_elliptic_model(d: usize) -> Result<RationalEllipticModel> {
    if !(1..=9).contains(&d) {
        return Err(Error::Precondition(format!("boundary fibre I{d} needs 1 ≤ d ≤ 9")));
    }
    let pic = lattice::odd_unimodular(1, 9);
    let mut fibre = vec![BigInt::from(3)];
    fibre.extend(std::iter::repeat(BigInt::from(-1)).take(9));
    let unit = |i: usize| {
        let mut v = vec![BigInt::zero(); 10];
        v[i] = BigInt::one();
        v
    };
    let mut boundary: Vec<Vector> = (1..d).map(|i| matrix::vsub(&unit(i), &unit(i + 1))).collect();
    if d == 1 {
        boundary.push(fibre.clone());
    } else {
        boundary.push(matrix::vsub(&fibre, &matrix::vsub(&unit(1), &unit(d))));
    }
    let fperp = Sublattice::new(pic.clone(), Mat::column(&fibre))?.orthogonal_complement();
    let fperp_l = fperp.lattice();
    let f_in = fperp.coords(&fibre).ok_or_else(|| Error::Precondition("F ∉ F^⊥".into()))?;
    let quotient = lattice::quotient_by_radical_part(&fperp_l, &Sublattice::new(fperp_l.clone(), Mat::column(&f_in))?)?;
    let q = &quotient.lattice;
    let mut rows = Vec::new();
    for dcls in &boundary {
        let c = fperp.coords(dcls).ok_or_else(|| Error::Precondition("boundary component not orthogonal to F".into()))?;
        rows.push(q.gram().apply(&quotient.project(&c)));
    }
    let cons = Mat::from_rows(rows)?;
    let admissible = Sublattice::new(q.clone(), snf::kernel(&cons))?;
    Ok(RationalEllipticModel { d, pic, fibre, boundary, fibre_perp: fperp.basis, quotient, admissible })
}

/// Direction of a rational-elliptic transfer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransferDirection {
    /// From `NS = r(a)^⊥/r(a)` to `[F]^⊥/Z[F]`.
    ToSurface,
    /// From `[F]^⊥/Z[F]` to `NS`.
    FromSurface,
}

/// Result of a rational-elliptic transfer.
#[derive(Clone, Debug)]
pub struct TransferReport {
    /// Number of components of the boundary fibre.
    pub d: usize,
    /// `{v ∈ NS : q(v, [r(b)]) = 0}`.
    pub ns_subspace: Sublattice,
    /// Surface model.
    pub surface: RationalEllipticModel,
    /// Isometry from `ns_subspace` coordinates to `surface.admissible` coordinates.
    pub isometry: Mat,
    /// Image of the input.
    pub image: Sublattice,
    /// Input was primitive in its ambient lattice.
    pub primitive_before: bool,
    /// Image is primitive in its ambient lattice.
    pub primitive_after: bool,
}

/// Transfers a primitive sublattice between the NS lattice of a quasi del
/// Pezzo hom with twist `[[1,−d],[0,1]]` and `[F]^⊥/Z[F]` of a rational
/// elliptic surface with an `I_d` boundary fibre, through the common lattice
/// `{q(v,[r(b)]) = 0} ≅ {β·Dᵢ = 0}`.
pub fn ratell_transfer(f: &PseudoHom, n: &Sublattice, direction: TransferDirection) -> Result<TransferReport> {
    let t = f.twist()?;
    let d = -t.get(0, 1);
    if t.get(0, 0) != &BigInt::one() || !t.get(1, 0).is_zero() || t.get(1, 1) != &BigInt::one() || d < BigInt::one() || d > BigInt::from(9) {
        return Err(Error::Precondition("boundary monodromy must be [[1,−d],[0,1]] with 1 ≤ d ≤ 9".into()));
    }
    let d: usize = d.to_string().parse().map_err(|_| Error::Input("boundary size".into()))?;
    let data = pseudo::surface_like(f, &EBasis::standard())?;
    let ns_subspace = Sublattice::new(data.ns.clone(), Mat::column(&data.rb_class))?.orthogonal_complement();
    let surface = rational_elliptic_model(d)?;
    let (vl, xl) = (ns_subspace.lattice(), surface.admissible.lattice());
    let isometry = lattice::definite_isometry(&vl, &xl, &[])?
        .ok_or_else(|| Error::Precondition("transfer lattices are not isometric".into()))?;
    let primitive_before = n.is_primitive();
    if !primitive_before {
        return Err(Error::NotPrimitive("transferred lattice".into()));
    }
    let image = match direction {
        TransferDirection::ToSurface => {
            if n.ambient != data.ns {
                return Err(Error::Dimension("input must be a sublattice of NS".into()));
            }
            let mut out = Vec::new();
            for g in n.generators() {
                let c = ns_subspace.coords(&g).ok_or_else(|| Error::Precondition("class is not orthogonal to [r(b)]".into()))?;
                out.push(surface.admissible.basis.apply(&isometry.apply(&c)));
            }
            Sublattice::new(surface.quotient.lattice.clone(), Mat::from_cols(surface.quotient.lattice.rank(), &out))?
        }
        TransferDirection::FromSurface => {
            if n.ambient != surface.quotient.lattice {
                return Err(Error::Dimension("input must be a sublattice of [F]^⊥/Z[F]".into()));
            }
            let inv = isometry.inverse_unimodular()?;
            let mut out = Vec::new();
            for g in n.generators() {
                let c = surface.admissible.coords(&g).ok_or_else(|| Error::Precondition("class meets a boundary component".into()))?;
                out.push(ns_subspace.basis.apply(&inv.apply(&c)));
            }
            Sublattice::new(data.ns.clone(), Mat::from_cols(data.ns.rank(), &out))?
        }
    };
    let primitive_after = image.is_primitive();
    Ok(TransferReport { d, ns_subspace, surface, isometry, image, primitive_before, primitive_after })
}

// ---------------------------------------------------------------------------
// Framing search

type M2 = [[i64; 2]; 2];

fn mul2(a: &M2, b: &M2) -> M2 {
    [
        [a[0][0] * b[0][0] + a[0][1] * b[1][0], a[0][0] * b[0][1] + a[0][1] * b[1][1]],
        [a[1][0] * b[0][0] + a[1][1] * b[1][0], a[1][0] * b[0][1] + a[1][1] * b[1][1]],
    ]
}

fn inv2(a: &M2) -> M2 {
    [[a[1][1], -a[0][1]], [-a[1][0], a[0][0]]]
}

fn to_m2(m: &Mat) -> Option<M2> {
    let r = m.to_i64_rows()?;
    (r.len() == 2 && r[0].len() == 2).then(|| [[r[0][0], r[0][1]], [r[1][0], r[1][1]]])
}

fn from_m2(m: &M2) -> Mat {
    Mat::from_i64(&[m[0].to_vec(), m[1].to_vec()])
}

/// Elements of `SL₂(Z)` given by words of length at most `max_len` in
/// `S = [[0,−1],[1,0]]`, `T = [[1,1],[0,1]]` and their inverses, in
/// breadth-first order starting from the identity.
pub fn sl2_words(max_len: usize) -> Vec<M2> {
    let gens: [M2; 4] = [[[0, -1], [1, 0]], [[1, 1], [0, 1]], [[0, 1], [-1, 0]], [[1, -1], [0, 1]]];
    let id: M2 = [[1, 0], [0, 1]];
    let mut seen = std::collections::HashSet::from([id]);
    let mut out = vec![id];
    let mut frontier = vec![id];
    for _ in 0..max_len {
        let mut next = Vec::new();
        for g in &frontier {
            for h in &gens {
                let x = mul2(g, h);
                if seen.insert(x) {
                    out.push(x);
                    next.push(x);
                }
            }
        }
        frontier = next;
    }
    out
}

/// Bounds for [`search_framings`].
#[derive(Clone, Debug)]
pub struct FramingSearch {
    /// Maximal word length of framings in the standard generators.
    pub max_word_len: usize,
    /// Stop after this many verified solutions.
    pub max_solutions: usize,
    /// Maximal number of partial products examined.
    pub budget: u64,
}

impl Default for FramingSearch {
    fn default() -> Self {
        FramingSearch { max_word_len: 8, max_solutions: 1, budget: 20_000_000 }
    }
}

/// Framings found by [`search_framings`].
#[derive(Clone, Debug)]
pub struct FramingOutcome {
    /// Verified configurations.
    pub solutions: Vec<FibreConfig>,
    /// True when the budget ran out before the search space was exhausted.
    pub budget_exhausted: bool,
}

struct FramingOption {
    framing: M2,
    monodromy: M2,
}

fn framing_options(kind: KodairaType, elements: &[M2]) -> Result<Vec<FramingOption>> {
    let base = to_m2(&fibre_model_of(kind)?.monodromy).ok_or_else(|| Error::Input("monodromy overflow".into()))?;
    let word: Vec<[i64; 2]> = kind.word().iter().map(|v| [v[0].to_string().parse().unwrap_or(0), v[1].to_string().parse().unwrap_or(0)]).collect();
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::new();
    for g in elements {
        let framed: Vec<[i64; 2]> = word.iter().map(|v| [g[0][0] * v[0] + g[0][1] * v[1], g[1][0] * v[0] + g[1][1] * v[1]]).collect();
        if seen.insert(framed) {
            out.push(FramingOption { framing: *g, monodromy: mul2(&mul2(g, &base), &inv2(g)) });
        }
    }
    Ok(out)
}

/// Searches framings (words of bounded length in the standard generators of
/// `SL₂(Z)`, identity first) making the disc fibration of `kinds` have the
/// given twist and a primitive `r(a)`. The last fibre is matched through a
/// table of its framed monodromies.
pub fn search_framings(kinds: &[KodairaType], target: &Mat, opts: &FramingSearch) -> Result<FramingOutcome> {
    if kinds.is_empty() {
        return Err(Error::Input("empty fibre list".into()));
    }
    let target2 = to_m2(target).ok_or_else(|| Error::Input("target must be a 2×2 integer matrix".into()))?;
    let elements = sl2_words(opts.max_word_len);
    let options: Vec<Vec<FramingOption>> = kinds.iter().map(|k| framing_options(*k, &elements)).collect::<Result<_>>()?;
    let last = options.len() - 1;
    let mut table: HashMap<M2, Vec<usize>> = HashMap::new();
    for (i, o) in options[last].iter().enumerate() {
        table.entry(o.monodromy).or_default().push(i);
    }
    let mut state = SearchState { solutions: Vec::new(), budget: opts.budget, exhausted: false };
    let mut chosen = Vec::with_capacity(kinds.len());
    framing_rec(kinds, &options, &table, &target2, 0, [[1, 0], [0, 1]], &mut chosen, opts, &mut state)?;
    Ok(FramingOutcome { solutions: state.solutions, budget_exhausted: state.exhausted })
}

struct SearchState {
    solutions: Vec<FibreConfig>,
    budget: u64,
    exhausted: bool,
}

#[allow(clippy::too_many_arguments)]
fn framing_rec(
    kinds: &[KodairaType],
    options: &[Vec<FramingOption>],
    table: &HashMap<M2, Vec<usize>>,
    target: &M2,
    i: usize,
    acc: M2,
    chosen: &mut Vec<M2>,
    opts: &FramingSearch,
    state: &mut SearchState,
) -> Result<()> {
    if state.solutions.len() >= opts.max_solutions || state.exhausted {
        return Ok(());
    }
    if state.budget == 0 {
        state.exhausted = true;
        return Ok(());
    }
    state.budget -= 1;
    let last = options.len() - 1;
    if i == last {
        let need = mul2(&inv2(&acc), target);
        if let Some(list) = table.get(&need) {
            for &j in list {
                chosen.push(options[last][j].framing);
                let config = FibreConfig::new(
                    kinds.iter().zip(chosen.iter()).map(|(k, g)| FramedFibre { kind: *k, framing: from_m2(g) }).collect(),
                );
                chosen.pop();
                let hom = build_disc_fibration(&config)?;
                let ra = hom.right_adjoint()?.apply(&ivec(&[1, 0]));
                if matrix::is_primitive_vector(&ra) {
                    state.solutions.push(config);
                    if state.solutions.len() >= opts.max_solutions {
                        return Ok(());
                    }
                }
            }
        }
        return Ok(());
    }
    for o in &options[i] {
        chosen.push(o.framing);
        framing_rec(kinds, options, table, target, i + 1, mul2(&acc, &o.monodromy), chosen, opts, state)?;
        chosen.pop();
        if state.solutions.len() >= opts.max_solutions || state.exhausted {
            break;
        }
    }
    Ok(())
}

/// Absolute values of the entries of a framing are bounded by this in reports.
pub fn framing_height(m: &Mat) -> BigInt {
    m.max_abs().abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pseudo::QdpModel;

    fn i1(rows: [[i64; 2]; 2]) -> FramedFibre {
        FramedFibre::framed_i64(KodairaType::I(1), rows).unwrap()
    }

    /// Three `I₁` fibres with vanishing cycles `b`, `3a+b`, `6a+b`.
    fn p2_side() -> Vec<FramedFibre> {
        vec![i1([[0, -1], [1, 0]]), i1([[3, -1], [1, 0]]), i1([[6, -1], [1, 0]])]
    }

    #[test]
    fn parses_tags() {
        assert_eq!("I18".parse::<KodairaType>().unwrap(), KodairaType::I(18));
        assert_eq!("I(18)".parse::<KodairaType>().unwrap(), KodairaType::I(18));
        assert_eq!("Istar(12)".parse::<KodairaType>().unwrap(), KodairaType::IStar(12));
        assert_eq!("I*0".parse::<KodairaType>().unwrap(), KodairaType::IStar(0));
        assert_eq!("IIIstar".parse::<KodairaType>().unwrap(), KodairaType::IIIStar);
        assert_eq!("II*".parse::<KodairaType>().unwrap(), KodairaType::IIStar);
        assert!(matches!("2I1".parse::<KodairaType>(), Err(Error::Input(_))));
        assert!(matches!("mI3".parse::<KodairaType>(), Err(Error::Input(_))));
        assert!("I0".parse::<KodairaType>().is_err());
        assert!(matches!("V".parse::<KodairaType>(), Err(Error::UnknownFibre(_))));
    }

    #[test]
    fn local_monodromies() {
        for n in 1..=6u32 {
            let f = fibre_model(&format!("I{n}")).unwrap();
            assert_eq!(f.monodromy, Mat::from_i64(&[vec![1, n as i64], vec![0, 1]]));
        }
        assert_eq!(fibre_model("I*0").unwrap().monodromy, -&Mat::identity(2));
        let m = fibre_model("III*").unwrap().monodromy;
        // Conjugate to [[0,−1],[1,0]] by an explicit SL₂(Z) element.
        let s = Mat::from_i64(&[vec![0, -1], vec![1, 0]]);
        let found = sl2_words(4).iter().map(from_m2).any(|g| &(&g * &s) * &g.inverse_unimodular().unwrap() == m);
        assert!(found);
        for tag in ["II", "III", "IV", "IV*", "II*", "I*3"] {
            let f = fibre_model(tag).unwrap();
            assert_eq!(f.euler, f.kind.euler());
        }
    }

    #[test]
    fn disc_fibrations() {
        let c = FibreConfig::new(p2_side());
        let h = build_disc_fibration(&c).unwrap();
        assert_eq!(h, QdpModel::Chain { n: 3 }.canonical_hom());
        assert_eq!(h.twist().unwrap(), Mat::from_i64(&[vec![1, -9], vec![0, 1]]));
        assert_eq!(c.monodromy_product().unwrap(), h.twist().unwrap());
        let i18 = build_disc_fibration(&FibreConfig::new(vec![FramedFibre::plain(KodairaType::I(18))])).unwrap();
        assert_eq!(i18.source.rank(), 18);
        assert_eq!(i18.twist().unwrap(), Mat::from_i64(&[vec![1, 18], vec![0, 1]]));
        assert!(build_disc_fibration(&FibreConfig::new(vec![])).is_err());
    }

    #[test]
    fn config_json_round_trip() {
        let json = r#"{"fibres":[{"type":"I18"},{"type":"I1","framing":[[1,0],[3,1]]}]}"#;
        let c: FibreConfig = serde_json::from_str(json).unwrap();
        assert_eq!(c.euler(), 19);
        assert_eq!(c.fibres[1].word(), vec![ivec(&[1, 3])]);
        let back: FibreConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
        let bad = r#"{"fibres":[{"type":"I1","framing":[[2,0],[0,1]]}]}"#;
        assert!(serde_json::from_str::<FibreConfig>(bad).is_err());
    }

    fn degree_two_split() -> LoopSplit {
        let mut side2 = p2_side();
        side2.push(FramedFibre::plain(KodairaType::I(18)));
        LoopSplit::new(FibreConfig::new(p2_side()), FibreConfig::new(side2)).unwrap()
    }

    #[test]
    fn degree_two_split_is_allowable() {
        let s = degree_two_split();
        let rep = allowable_check(&s).unwrap();
        assert!(rep.allowable, "{}", rep.reason);
        assert_eq!(rep.twists[0], Mat::from_i64(&[vec![1, -9], vec![0, 1]]));
        assert_eq!(rep.twists[1], Mat::from_i64(&[vec![1, 9], vec![0, 1]]));
        let m = build_k3_split_model(&s).unwrap();
        assert_eq!(m.glued.degree.value, 9);
        assert!(m.glued.checks.all());
        let ns = m.glued.ns_m_lattice();
        assert!(ns.is_even() && ns.is_unimodular());
        assert_eq!(ns.signature(), tyurin::k3_ns_signature());
        assert_eq!(component_root_type(&m).unwrap(), "A17");
        let gamma = fibration_gamma(&m).unwrap();
        assert_eq!(gamma.rank(), 17);
        assert_eq!(gamma.lattice().det().abs(), BigInt::from(2));
        let mw = mw_coupling_data(&m, Some(&gamma)).unwrap();
        assert_eq!(mw.mw_torsion, vec!["3".to_string()]);
        assert!(mw.surjection_consistent);
        assert!(mw_coupling_data(&m, None).is_err());
    }

    #[test]
    fn mismatched_split_is_not_allowable() {
        let side1 = FibreConfig::new(p2_side());
        let side2 = FibreConfig::new(vec![FramedFibre::plain(KodairaType::I(18)), FramedFibre::plain(KodairaType::I(3))]);
        let rep = allowable_check(&LoopSplit::new(side1, side2).unwrap()).unwrap();
        assert!(!rep.allowable);
        assert!(LoopSplit::new(FibreConfig::new(p2_side()), FibreConfig::new(p2_side())).is_err());
    }

    #[test]
    fn gamma_polarisation_on_quadric_side() {
        // b, 2a+b, 2a+b, 4a+b as I₁ + I₂ + I₁.
        let side1 = FibreConfig::new(vec![
            i1([[0, -1], [1, 0]]),
            FramedFibre::framed_i64(KodairaType::I(2), [[2, -1], [1, 0]]).unwrap(),
            i1([[4, -1], [1, 0]]),
        ]);
        let side2 = FibreConfig::new(vec![
            FramedFibre::plain(KodairaType::IStar(12)),
            i1([[-3, -5], [-1, -2]]),
            i1([[-5, -9], [-1, -2]]),
        ]);
        let s = LoopSplit::new(side1, side2).unwrap();
        let m = build_k3_split_model(&s).unwrap();
        assert_eq!(m.glued.degree.to_string(), "8′");
        let comps = component_classes(&m, 0).unwrap();
        let all: Vec<Vector> = comps.iter().flat_map(|c| c.classes.clone()).collect();
        assert_eq!(all.len(), 1);
        let ns = m.glued.factors[0].ns().clone();
        let gamma = Sublattice::new(ns.clone(), Mat::column(&all[0])).unwrap();
        let rep = check_gamma_polarisation(&m, &gamma, 0, &all, 10).unwrap();
        assert_eq!(rep.verdict, Some(true));
        let zero = Sublattice::new(ns, Mat::zeros(2, 0)).unwrap();
        assert_eq!(check_gamma_polarisation(&m, &zero, 0, &all, 10).unwrap().verdict, Some(true));
        let ns2 = m.glued.factors[1].ns().clone();
        let z2 = Sublattice::new(ns2.clone(), Mat::zeros(ns2.rank(), 0)).unwrap();
        assert!(check_gamma_polarisation(&m, &z2, 1, &[], 10).is_err());
        assert_eq!(component_root_type(&m).unwrap(), "D16+A1");
    }

    #[test]
    fn framing_search_finds_known_solutions() {
        let target = Mat::from_i64(&[vec![1, -1], vec![0, 1]]);
        let out = search_framings(&[KodairaType::IIStar, KodairaType::I(1)], &target, &FramingSearch::default()).unwrap();
        let c = &out.solutions[0];
        assert_eq!(c.fibres[0].framing, Mat::identity(2));
        assert_eq!(build_disc_fibration(c).unwrap().twist().unwrap(), target);
        let none = search_framings(&[KodairaType::I(2), KodairaType::I(1)], &boundary_unipotent(3), &FramingSearch::default()).unwrap();
        assert!(none.solutions.is_empty());
    }

    #[test]
    fn transfer_through_rational_elliptic_surface() {
        let p2 = QdpModel::Chain { n: 3 }.canonical_hom();
        let data = pseudo::surface_like(&p2, &EBasis::standard()).unwrap();
        let zero = Sublattice::new(data.ns.clone(), Mat::zeros(1, 0)).unwrap();
        let rep = ratell_transfer(&p2, &zero, TransferDirection::ToSurface).unwrap();
        assert_eq!(rep.ns_subspace.rank(), 0);
        assert_eq!(rep.image.rank(), 0);
        // e = 11 with an I₂ fibre: b, 3a+b, 6a+b, a, a | a × 6.
        let mut fibres = p2_side();
        fibres.push(FramedFibre::plain(KodairaType::I(2)));
        fibres.extend(std::iter::repeat(FramedFibre::plain(KodairaType::I(1))).take(6));
        let hom = build_disc_fibration(&FibreConfig::new(fibres)).unwrap();
        let data = pseudo::surface_like(&hom, &EBasis::standard()).unwrap();
        let mut u = vec![BigInt::zero(); 11];
        u[3] = BigInt::one();
        u[4] = BigInt::from(-1);
        let cls = data.ns_class(&u).unwrap();
        let n = Sublattice::new(data.ns.clone(), Mat::column(&cls)).unwrap();
        let there = ratell_transfer(&hom, &n, TransferDirection::ToSurface).unwrap();
        assert_eq!(there.d, 1);
        assert_eq!(there.image.lattice().gram(), &Mat::from_i64(&[vec![-2]]));
        assert!(there.primitive_after);
        let back = ratell_transfer(&hom, &there.image, TransferDirection::FromSurface).unwrap();
        assert!(back.image.same_span(&n));
        let wrong = QdpModel::Chain { n: 13 }.canonical_hom();
        let wd = pseudo::surface_like(&wrong, &EBasis::standard()).unwrap();
        let wz = Sublattice::new(wd.ns.clone(), Mat::zeros(wd.ns.rank(), 0)).unwrap();
        assert!(ratell_transfer(&wrong, &wz, TransferDirection::ToSurface).is_err());
    }

    #[test]
    fn rational_elliptic_models_match_table() {
        for d in 1..=9 {
            let m = rational_elliptic_model(d).unwrap();
            assert_eq!(m.quotient.lattice.rank(), 8);
            assert!(m.quotient.lattice.is_unimodular() && m.quotient.lattice.is_even());
            assert_eq!(m.admissible.rank(), 9 - d);
            let b = &m.boundary;
            let sum = b.iter().fold(vec![BigInt::zero(); 10], |acc, v| matrix::vadd(&acc, v));
            assert_eq!(sum, m.fibre);
        }
    }
}
