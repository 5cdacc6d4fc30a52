//! Seeded randomized property suites shared by the test harness and the
//! `selftest` subcommand: adjunction, twist multiplicativity under gluing,
//! the canonical-class equation, Smith form round trips, complement and
//! saturation idempotence, lift/project round trips of polarisations, and
//! the torsion criterion for coupling groups.

use std::sync::OnceLock;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{One, Zero};
use proptest::prelude::*;
use proptest::test_runner::{Config, RngAlgorithm, TestCaseError, TestError, TestRng, TestRunner};
use serde::Serialize;

use crate::lattice::{self, IntLattice, Sublattice};
use crate::matrix::{ivec, Mat, Vector};
use crate::pseudo::{self, PseudoHom, QdpModel};
use crate::snf;
use crate::tyurin::{self, GluedModel};

/// Number of cases each property runs by default.
pub const DEFAULT_CASES: u32 = 200;

/// Names of all properties, in execution order.
pub const PROPERTY_NAMES: [&str; 7] = [
    "adjunction",
    "twist_multiplicativity",
    "canonical_equation",
    "snf_round_trip",
    "complement_saturation",
    "lift_project",
    "torsion_criterion",
];

/// Result of one property run.
#[derive(Clone, Debug, Serialize, PartialEq, Eq)]
pub struct PropertyOutcome {
    /// Property name.
    pub name: String,
    /// Cases requested.
    pub cases: u32,
    /// Whether every case passed.
    pub passed: bool,
    /// Failure message with the minimal counterexample, if any.
    pub failure: Option<String>,
}

/// Deterministic runner seeded from a 64-bit seed.
pub fn seeded_runner(seed: u64, cases: u32) -> TestRunner {
    let mut bytes = [0u8; 32];
    for (i, chunk) in bytes.chunks_mut(8).enumerate() {
        let v = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(i as u64);
        chunk.copy_from_slice(&v.to_le_bytes());
    }
    let config = Config { cases, failure_persistence: None, max_shrink_iters: 256, ..Config::default() };
    TestRunner::new_with_rng(config, TestRng::from_seed(RngAlgorithm::ChaCha, &bytes))
}

fn outcome<T: std::fmt::Debug>(name: &str, cases: u32, r: std::result::Result<(), TestError<T>>) -> PropertyOutcome {
    PropertyOutcome { name: name.to_string(), cases, passed: r.is_ok(), failure: r.err().map(|e| e.to_string()) }
}

fn fail<E: std::fmt::Display>(e: E) -> TestCaseError {
    TestCaseError::fail(e.to_string())
}

// ---------------------------------------------------------------------------
// Strategies

/// Primitive vectors of `Z²` with entries in `[-bound, bound]`.
pub fn primitive_pair(bound: i64) -> impl Strategy<Value = [i64; 2]> {
    (-bound..=bound, -bound..=bound).prop_filter("primitive", |(x, y)| x.gcd(y) == 1).prop_map(|(x, y)| [x, y])
}

/// Words of primitive vectors.
pub fn word(max_len: usize, bound: i64) -> impl Strategy<Value = Vec<[i64; 2]>> {
    prop::collection::vec(primitive_pair(bound), 1..=max_len)
}

/// Integer matrices with up to `max` rows and columns.
pub fn int_matrix(max: usize, bound: i64) -> impl Strategy<Value = Vec<Vec<i64>>> {
    (1..=max, 1..=max).prop_flat_map(move |(r, c)| prop::collection::vec(prop::collection::vec(-bound..=bound, c), r))
}

fn vectors(dim: usize, count: std::ops::RangeInclusive<usize>, bound: i64) -> impl Strategy<Value = Vec<Vec<i64>>> {
    prop::collection::vec(prop::collection::vec(-bound..=bound, dim), count)
}

fn hom(w: &[[i64; 2]]) -> std::result::Result<PseudoHom, TestCaseError> {
    pseudo::z_chain_i64(w).map_err(fail)
}

// ---------------------------------------------------------------------------
// Properties

/// `⟨f u, w⟩_E = ⟨u, r w⟩_G` for every basis vector `u` and random `w`.
pub fn check_adjunction(w: &[[i64; 2]], target: [i64; 2]) -> std::result::Result<(), TestCaseError> {
    let f = hom(w)?;
    let r = f.right_adjoint().map_err(fail)?;
    let t = ivec(&target);
    let rw = r.apply(&t);
    for i in 0..f.source.rank() {
        let mut u = vec![BigInt::zero(); f.source.rank()];
        u[i] = BigInt::one();
        let lhs = f.target.pair(&f.apply(&u), &t);
        let rhs = f.source.pair(&u, &rw);
        prop_assert_eq!(lhs, rhs);
    }
    Ok(())
}

/// `T(f₁ ⋊ f₂) = T(f₁)·T(f₂)`.
pub fn check_twist_multiplicativity(w1: &[[i64; 2]], w2: &[[i64; 2]]) -> std::result::Result<(), TestCaseError> {
    let (f1, f2) = (hom(w1)?, hom(w2)?);
    let g = pseudo::glue(&f1, &f2, 1).map_err(fail)?;
    prop_assert_eq!(g.twist().map_err(fail)?, &f1.twist().map_err(fail)? * &f2.twist().map_err(fail)?);
    prop_assert!(g.source.is_unimodular());
    Ok(())
}

fn models() -> Vec<QdpModel> {
    let mut v: Vec<QdpModel> = (3..=12).map(|n| QdpModel::Chain { n }).collect();
    v.push(QdpModel::Quadric);
    v
}

/// The canonical-class equation on random classes of a braid-scrambled model.
pub fn check_canonical_equation(model: usize, moves: &[usize], u1: &[i64], u2: &[i64]) -> std::result::Result<(), TestCaseError> {
    let m = models()[model % models().len()];
    let mut w: Vec<Vector> = m.canonical_hom().matrix.col_vecs();
    for &i in moves {
        let k = i % (w.len() - 1);
        w = pseudo::braid_move(&w, k);
    }
    let f = pseudo::z_chain(&w).map_err(fail)?;
    prop_assert_eq!(f.twist().map_err(fail)?, m.canonical_hom().twist().map_err(fail)?);
    let v = pseudo::is_quasi_del_pezzo(&f).map_err(fail)?;
    prop_assert!(v.holds(), "braid-equivalent chain is not quasi del Pezzo");
    let data = v.data.expect("data");
    let n = f.source.rank();
    let a: Vec<BigInt> = (0..n).map(|i| BigInt::from(u1[i % u1.len()])).collect();
    let b: Vec<BigInt> = (0..n).map(|i| BigInt::from(u2[i % u2.len()])).collect();
    prop_assert!(pseudo::canonical_equation_holds(&data, &a, &b).map_err(fail)?);
    Ok(())
}

/// `U·M·V = D`, unimodular transforms with inverses, divisibility chain, kernel and solve.
pub fn check_snf_round_trip(rows: &[Vec<i64>]) -> std::result::Result<(), TestCaseError> {
    let m = Mat::from_i64(rows);
    let s = snf::smith(&m);
    prop_assert_eq!(&(&s.u * &m) * &s.v, s.d.clone());
    prop_assert_eq!(&s.u * &s.u_inv, Mat::identity(m.rows()));
    prop_assert_eq!(&s.v * &s.v_inv, Mat::identity(m.cols()));
    for i in 0..m.rows() {
        for j in 0..m.cols() {
            if i != j {
                prop_assert!(s.d.get(i, j).is_zero());
            }
        }
    }
    for i in 1..s.rank {
        prop_assert!((s.d.get(i, i) % s.d.get(i - 1, i - 1)).is_zero());
    }
    let k = snf::kernel(&m);
    prop_assert!((&m * &k).is_zero());
    prop_assert_eq!(k.cols(), m.cols() - s.rank);
    let x: Vector = (0..m.cols()).map(|i| BigInt::from(i as i64 - 1)).collect();
    let b = m.apply(&x);
    let y = snf::solve_int(&m, &b);
    prop_assert!(y.is_some());
    prop_assert_eq!(m.apply(&y.unwrap()), b);
    Ok(())
}

/// Ambient lattices for the complement/saturation property.
pub const COMPLEMENT_AMBIENTS: [&str; 5] = ["H+E8", "H+H+A2", "I(1,9)", "A3+<4>", "[[2,1],[1,-4]]+H"];

/// `sat(sat S) = sat S`, `S^⊥⊥⊥ = S^⊥`, and `S^⊥⊥ = sat S` on nondegenerate ambients.
pub fn check_complement_saturation(ambient: usize, gens: &[Vec<i64>]) -> std::result::Result<(), TestCaseError> {
    let l = lattice::standard_lattice(COMPLEMENT_AMBIENTS[ambient % COMPLEMENT_AMBIENTS.len()]).map_err(fail)?;
    let vs: Vec<Vector> = gens.iter().map(|g| ivec(&g[..l.rank()])).filter(|v| v.iter().any(|x| !x.is_zero())).collect();
    let s = Sublattice::spanned_by(l.clone(), &vs);
    let sat = s.saturate();
    prop_assert!(sat.saturate().same_span(&sat));
    prop_assert!(sat.contains_sub(&s));
    prop_assert!(sat.is_primitive());
    let p = s.orthogonal_complement();
    let pp = p.orthogonal_complement();
    prop_assert!(pp.orthogonal_complement().same_span(&p));
    prop_assert!(pp.same_span(&sat));
    Ok(())
}

/// Glued models shared by the polarisation properties.
pub fn glued_models() -> &'static Vec<GluedModel> {
    static CELL: OnceLock<Vec<GluedModel>> = OnceLock::new();
    CELL.get_or_init(|| {
        let pairs = [
            (QdpModel::Chain { n: 3 }, QdpModel::Chain { n: 21 }),
            (QdpModel::Quadric, QdpModel::Chain { n: 20 }),
            (QdpModel::Chain { n: 10 }, QdpModel::Chain { n: 14 }),
            (QdpModel::Chain { n: 11 }, QdpModel::Chain { n: 13 }),
            (QdpModel::Chain { n: 6 }, QdpModel::Chain { n: 18 }),
        ];
        pairs
            .iter()
            .map(|(a, b)| {
                let h = |m: &QdpModel| {
                    let (q, k) = m.standard_pair();
                    pseudo::from_anticanonical_pair(&q, &k).expect("standard pair")
                };
                tyurin::build_glued(&h(a), &h(b)).expect("standard gluing")
            })
            .collect()
    })
}

fn random_polarisation(m: &GluedModel, gens: &[Vec<i64>]) -> Sublattice {
    let ns: &IntLattice = m.ns_m_lattice();
    let vs: Vec<Vector> = gens.iter().map(|g| ivec(&g[..ns.rank()])).filter(|v| v.iter().any(|x| !x.is_zero())).collect();
    Sublattice::spanned_by(ns.clone(), &vs).saturate()
}

/// `project(lift(L)) = L`, and the lift contains `ζ` with rank one more.
pub fn check_lift_project(model: usize, gens: &[Vec<i64>]) -> std::result::Result<(), TestCaseError> {
    let m = &glued_models()[model % glued_models().len()];
    let l = random_polarisation(m, gens);
    let lhat = tyurin::lift_polarisation(m, &l).map_err(fail)?;
    prop_assert_eq!(lhat.rank(), l.rank() + 1);
    prop_assert!(lhat.contains(&m.zeta));
    let back = tyurin::project_polarisation(m, &lhat).map_err(fail)?;
    prop_assert!(back.same_span(&l));
    Ok(())
}

/// The coupling group is finite exactly when both complement conditions hold.
pub fn check_torsion_criterion(model: usize, gens: &[Vec<i64>]) -> std::result::Result<(), TestCaseError> {
    let m = &glued_models()[model % glued_models().len()];
    let l = random_polarisation(m, gens);
    let q = tyurin::coupling_group(m, &l).map_err(fail)?;
    let t = tyurin::torsion_criterion(m, &l).map_err(fail)?;
    prop_assert_eq!(q.is_torsion(), t[0] && t[1], "coupling {:?} vs criterion {:?}", q, t);
    Ok(())
}

// ---------------------------------------------------------------------------
// Runner

/// Runs one named property with a seeded runner.
pub fn run_property(name: &str, seed: u64, cases: u32) -> Option<PropertyOutcome> {
    let mut r = seeded_runner(seed, cases);
    let res = match name {
        "adjunction" => outcome(name, cases, r.run(&(word(6, 6), primitive_pair(9)), |(w, t)| check_adjunction(&w, t))),
        "twist_multiplicativity" => outcome(name, cases, r.run(&(word(5, 5), word(5, 5)), |(a, b)| check_twist_multiplicativity(&a, &b))),
        "canonical_equation" => outcome(
            name,
            cases,
            r.run(
                &(0..11usize, prop::collection::vec(0..20usize, 0..6), prop::collection::vec(-3i64..=3, 1..6), prop::collection::vec(-3i64..=3, 1..6)),
                |(m, mv, a, b)| check_canonical_equation(m, &mv, &a, &b),
            ),
        ),
        "snf_round_trip" => outcome(name, cases, r.run(&int_matrix(5, 9), |m| check_snf_round_trip(&m))),
        "complement_saturation" => outcome(
            name,
            cases,
            r.run(&(0..COMPLEMENT_AMBIENTS.len(), vectors(10, 0..=3, 3)), |(a, g)| check_complement_saturation(a, &g)),
        ),
        "lift_project" => outcome(name, cases, r.run(&(0..5usize, vectors(18, 0..=3, 2)), |(m, g)| check_lift_project(m, &g))),
        "torsion_criterion" => outcome(name, cases, r.run(&(0..5usize, vectors(18, 0..=3, 2)), |(m, g)| check_torsion_criterion(m, &g))),
        _ => return None,
    };
    Some(res)
}

/// Runs every property.
pub fn run_all(seed: u64, cases: u32) -> Vec<PropertyOutcome> {
    PROPERTY_NAMES.iter().filter_map(|n| run_property(n, seed, cases)).collect()
}

/// Parses a property list, accepting `all`.
pub fn select(names: &str) -> Vec<String> {
    if names == "all" {
        return PROPERTY_NAMES.iter().map(|s| s.to_string()).collect();
    }
    names.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect()
}


#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_property_passes_a_short_run() {
        for o in run_all(7, 8) {
            assert!(o.passed, "{}: {:?}", o.name, o.failure);
        }
        assert!(run_property("nonexistent", 1, 1).is_none());
        assert_eq!(select("all").len(), 7);
    }
}
