//! Acceptance checks, one per criterion, each printing a single PASS/FAIL line.
//!
//! This target runs without the libtest harness so that the verdict lines are
//! always visible in the test log. The process exits nonzero if any criterion
//! fails.

use std::time::Instant;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};

use k3mirror::fibration::{self, fibre_model_of, KodairaType, LoopSplit};
use k3mirror::lattice::{self, disc_group, IntLattice, Signature, Sublattice};
use k3mirror::matrix::{self, ivec, qbilinear, Mat, Vector};
use k3mirror::mirror::{self, AdmissibilityCertificate, Admissibility, FibrationSide, WitnessMode};
use k3mirror::properties;
use k3mirror::pseudo::{self, QdpModel};
use k3mirror::tyurin::{self, GluedModel};

type Check = std::result::Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn ok<T, E: std::fmt::Debug>(r: std::result::Result<T, E>, what: &str) -> std::result::Result<T, String> {
    r.map_err(|e| format!("{what}: {e:?}"))
}

fn unit(n: usize, i: usize) -> Vector {
    let mut v = vec![BigInt::zero(); n];
    v[i] = BigInt::one();
    v
}

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(BigInt::from(n), BigInt::from(d))
}

fn reduce_mod(q: &BigRational, m: i64) -> BigRational {
    let m = BigRational::from_integer(BigInt::from(m));
    q - (q / &m).floor() * m
}

/// `K^⊥ ⊂ NS` of a model, computed from its canonical chain through the
/// surface-like construction (not from the standard pair).
fn k_perp_of(model: QdpModel) -> std::result::Result<IntLattice, String> {
    let v = ok(pseudo::is_quasi_del_pezzo(&model.canonical_hom()), "quasi del Pezzo test")?;
    ensure!(v.holds(), "canonical chain of {model:?} not verified: {}", v.reason);
    let data = v.data.ok_or("no surface-like data")?;
    let k = ok(Sublattice::new(data.ns.clone(), Mat::column(&data.canonical)), "K line")?;
    Ok(k.orthogonal_complement().lattice())
}

/// Checks that the discriminant group is cyclic of order `order` and that
/// some generator has norm `value` modulo `modulus`.
fn cyclic_disc_with_generator(l: &IntLattice, order: i64, value: &BigRational, modulus: i64) -> std::result::Result<(), String> {
    let d = ok(disc_group(l), "discriminant group")?;
    if order == 1 {
        ensure!(d.is_trivial(), "discriminant {:?}, expected trivial", d.invariant_factors);
        return Ok(());
    }
    ensure!(d.invariant_factors == vec![BigInt::from(order)], "discriminant {:?}, expected Z/{order}", d.invariant_factors);
    let g = &d.generators[0];
    let q = qbilinear(l.gram(), g, g);
    let target = reduce_mod(value, modulus);
    let hit = (1..order).filter(|k| num_integer::gcd(*k, order) == 1).any(|k| {
        let kk = BigRational::from_integer(BigInt::from(k * k));
        reduce_mod(&(kk * &q), modulus) == target
    });
    ensure!(hit, "no generator of norm {target} mod {modulus} (generator norm {q})");
    Ok(())
}

// ---------------------------------------------------------------------------
// 1. Néron–Severi table

fn chain_k_perp_table() -> Check {
    let small: Vec<(usize, IntLattice)> = vec![
        (4, IntLattice::from_i64(&[vec![-8]])),
        (5, IntLattice::from_i64(&[vec![-2, 1], vec![1, -4]])),
        (6, lattice::root_a(2).direct_sum(&lattice::root_a(1))),
        (7, lattice::root_a(4)),
        (8, lattice::root_d(5)),
        (9, lattice::root_e(6)),
        (10, lattice::root_e(7)),
        (11, lattice::root_e(8)),
    ];
    let zero = k_perp_of(QdpModel::Chain { n: 3 })?;
    ensure!(zero.rank() == 0, "n = 3: K^⊥ has rank {}", zero.rank());
    for (n, target) in &small {
        let kp = k_perp_of(QdpModel::Chain { n: *n })?;
        ensure!(target.signature().neg == target.rank(), "reference for n = {n} is not negative definite");
        let iso = ok(lattice::definite_isometry(&kp, target, &[]), "isometry search")?;
        let p = iso.ok_or_else(|| format!("n = {n}: K^⊥ not isometric to the reference"))?;
        ensure!(&p.transpose() * &(target.gram() * &p) == *kp.gram(), "n = {n}: returned map is not an isometry");
    }
    for n in 4..=21usize {
        let kp = k_perp_of(QdpModel::Chain { n })?;
        ensure!(kp.rank() == n - 3, "n = {n}: rank {}", kp.rank());
        let sig = kp.signature();
        let expected = match n.cmp(&12) {
            std::cmp::Ordering::Less => Signature { pos: 0, neg: n - 3, null: 0 },
            std::cmp::Ordering::Equal => Signature { pos: 0, neg: 8, null: 1 },
            std::cmp::Ordering::Greater => Signature { pos: 1, neg: n - 4, null: 0 },
        };
        ensure!(sig == expected, "n = {n}: signature {sig:?}, expected {expected:?}");
        if n == 12 {
            ensure!(kp.is_degenerate(), "n = 12 must be degenerate");
            continue;
        }
        ensure!(kp.is_even(), "n = {n}: K^⊥ is odd");
        let order = (12 - n as i64).abs();
        cyclic_disc_with_generator(&kp, order, &rat(1, n as i64 - 12), 1).map_err(|e| format!("n = {n}: {e}"))?;
        if n % 2 == 0 {
            // K is characteristic, so a vector x with x·K = 1 has odd norm and
            // the class of x − K/(12 − n) has norm 1 + 1/(n − 12) modulo 2.
            let value = rat(1, 1) + rat(1, n as i64 - 12);
            cyclic_disc_with_generator(&kp, order, &value, 2).map_err(|e| format!("n = {n}: {e}"))?;
        }
        if n >= 13 {
            let same = ok(lattice::same_isometry_class(&kp, &lattice::root_e(n - 3)), "isometry class")?;
            ensure!(same == Some(true), "n = {n}: K^⊥ not in the class of E{}", n - 3);
        }
    }
    let q = k_perp_of(QdpModel::Quadric)?;
    let iso = ok(lattice::definite_isometry(&q, &lattice::root_a(1), &[]), "isometry search")?;
    ensure!(iso.is_some(), "quadric K^⊥ is not A1");
    cyclic_disc_with_generator(&q, 2, &rat(-1, 2), 2).map_err(|e| format!("quadric: {e}"))?;
    Ok("K^⊥ matches for n = 3..21 and the quadric".into())
}

// ---------------------------------------------------------------------------
// 2. Kodaira fibre table

fn conjugate_in_sl2(a: &Mat, b: &Mat, bound: i64) -> bool {
    for p in -bound..=bound {
        for q in -bound..=bound {
            for r in -bound..=bound {
                for s in -bound..=bound {
                    if p * s - q * r != 1 {
                        continue;
                    }
                    let m = Mat::from_i64(&[vec![p, q], vec![r, s]]);
                    if &m * a == b * &m {
                        return true;
                    }
                }
            }
        }
    }
    false
}

fn m2(rows: [[i64; 2]; 2]) -> Mat {
    Mat::from_i64(&[rows[0].to_vec(), rows[1].to_vec()])
}

fn kodaira_table() -> Check {
    let mut kinds: Vec<(KodairaType, Mat, bool)> = Vec::new();
    for n in 1..=18u32 {
        kinds.push((KodairaType::I(n), m2([[1, n as i64], [0, 1]]), true));
    }
    for n in 0..=14u32 {
        kinds.push((KodairaType::IStar(n), m2([[-1, -(n as i64)], [0, -1]]), false));
    }
    kinds.push((KodairaType::II, m2([[1, 1], [-1, 0]]), false));
    kinds.push((KodairaType::III, m2([[0, 1], [-1, 0]]), false));
    kinds.push((KodairaType::IV, m2([[0, 1], [-1, -1]]), false));
    kinds.push((KodairaType::IVStar, m2([[-1, -1], [1, 0]]), false));
    kinds.push((KodairaType::IIIStar, m2([[0, -1], [1, 0]]), false));
    kinds.push((KodairaType::IIStar, m2([[0, -1], [1, 1]]), false));
    for (kind, expected, verbatim) in &kinds {
        let f = ok(fibre_model_of(*kind), "fibre model")?;
        let hom = ok(pseudo::z_chain(&f.word), "chain")?;
        ensure!(hom.source.is_unimodular(), "{kind}: pseudolattice is not unimodular");
        ensure!(hom.source.rank() == kind.euler() && f.euler == kind.euler(), "{kind}: rank differs from the Euler number");
        let twist = ok(hom.twist(), "twist")?;
        ensure!(twist == f.monodromy, "{kind}: reported monodromy differs from the twist");
        if *verbatim {
            ensure!(twist == *expected, "{kind}: twist {twist:?}");
        } else {
            ensure!(conjugate_in_sl2(&twist, expected, 8), "{kind}: twist {twist:?} not conjugate to {expected:?}");
        }
    }
    // The three matrices quoted for I_n, I*_0 and III*.
    let i5 = ok(fibre_model_of(KodairaType::I(5)), "I5")?.monodromy;
    ensure!(i5 == m2([[1, 5], [0, 1]]), "I5 twist");
    let i0s = ok(fibre_model_of(KodairaType::IStar(0)), "I*0")?.monodromy;
    ensure!(i0s == m2([[-1, 0], [0, -1]]), "I*0 twist");
    let iii = ok(fibre_model_of(KodairaType::IIIStar), "III*")?.monodromy;
    ensure!(conjugate_in_sl2(&iii, &m2([[0, -1], [1, 0]]), 8), "III* twist");
    Ok(format!("{} fibre types across 8 families", kinds.len()))
}

// ---------------------------------------------------------------------------
// 3. Glued-model structure

fn glue_pairs(a: QdpModel, b: QdpModel) -> std::result::Result<GluedModel, String> {
    let (q1, k1) = a.standard_pair();
    let (q2, k2) = b.standard_pair();
    ok(tyurin::build_glued_from_pairs((&q1, &k1), (&q2, &k2)), "gluing")
}

fn gluing_list() -> Vec<(QdpModel, QdpModel)> {
    let c = |n| QdpModel::Chain { n };
    vec![(c(3), c(21)), (c(4), c(20)), (QdpModel::Quadric, c(20)), (c(6), c(18)), (c(9), c(15)), (c(11), c(13)), (c(12), c(12)), (c(19), c(5))]
}

fn glued_structure() -> Check {
    let h_e8_e8 = ok(lattice::standard_lattice("H+E8+E8"), "H+E8+E8")?;
    let list = gluing_list();
    for (a, b) in &list {
        let m = glue_pairs(*a, *b)?;
        let tag = format!("{a:?} ⋊ {b:?}");
        ensure!(m.checks.all(), "{tag}: {:?}", m.checks);
        let t = ok(m.f.twist(), "twist")?;
        ensure!(t == Mat::identity(t.rows()), "{tag}: T_f ≠ id");
        let ns = m.ns_m_lattice();
        ensure!(ns.rank() == 18 && ns.is_even() && ns.is_unimodular(), "{tag}: NS(M) not even unimodular of rank 18");
        ensure!(ns.signature() == Signature { pos: 1, neg: 17, null: 0 }, "{tag}: signature {:?}", ns.signature());
        ensure!(ok(lattice::same_isometry_class(ns, &h_e8_e8), "class")? == Some(true), "{tag}: NS(M) ≇ H+E8+E8");
        let mut target: Vector = m.factors[0].canonical().iter().map(|x| -x).collect();
        target.extend(m.factors[1].canonical().iter().cloned());
        let c = m.w_coords(&target).ok_or_else(|| format!("{tag}: (−K1, K2) not in Ψ^⊥/Ψ"))?;
        let i = m.zeta.iter().position(|x| !x.is_zero()).ok_or("ζ = 0")?;
        let k = &c[i] / &m.zeta[i];
        ensure!(k.is_positive() && matrix::vscale(&k, &m.zeta) == c, "{tag}: (−K1, K2) is not a positive multiple of ζ");
    }
    Ok(format!("{} gluings", list.len()))
}

// ---------------------------------------------------------------------------
// 4. Coupling index of the full NS

fn coupling_indices() -> Check {
    let mut seen = Vec::new();
    let mut cases: Vec<(QdpModel, QdpModel, i64)> = (1..=8).map(|d| (QdpModel::Chain { n: 12 - d }, QdpModel::Chain { n: 12 + d }, d as i64)).collect();
    cases.push((QdpModel::Chain { n: 3 }, QdpModel::Chain { n: 21 }, 3));
    cases.push((QdpModel::Quadric, QdpModel::Chain { n: 20 }, 4));
    for (a, b, index) in cases {
        let m = glue_pairs(a, b)?;
        let q = ok(tyurin::coupling_group(&m, &m.ns_m_lattice().full()), "coupling group")?;
        ensure!(q.order.as_deref() == Some(index.to_string().as_str()), "degree {}: coupling group {q:?}, expected order {index}", m.degree);
        seen.push(format!("{}→{index}", m.degree));
    }
    let m0 = glue_pairs(QdpModel::Chain { n: 12 }, QdpModel::Chain { n: 12 })?;
    ensure!(tyurin::coupling_group(&m0, &m0.ns_m_lattice().full()).is_err(), "degree 0 coupling group must be refused");
    let q0 = ok(tyurin::coupling_quotient(&m0, &m0.ns_m_lattice().full()), "degree-0 quotient")?;
    ensure!(q0.free_rank == 1, "degree 0: free rank {}", q0.free_rank);
    Ok(format!("{}; degree 0 free rank 1", seen.join(" ")))
}

// ---------------------------------------------------------------------------
// 5. Degree-two instance end to end

fn degree_two_end_to_end() -> Check {
    let start = Instant::now();
    let inst = &mirror::dht_instances()[0];
    ensure!(inst.degeneration == [QdpModel::Chain { n: 3 }, QdpModel::Chain { n: 21 }], "first instance is not (P², Bl18 P²)");
    let split: &LoopSplit = &inst.split;
    let kinds: Vec<Vec<KodairaType>> = split.sides().iter().map(|s| s.fibres.iter().map(|f| f.kind).collect()).collect();
    ensure!(kinds[0] == vec![KodairaType::I(1); 3], "side 1 is {:?}", kinds[0]);
    let mut side2 = vec![KodairaType::I(1); 3];
    side2.push(KodairaType::I(18));
    ensure!(kinds[1] == side2, "side 2 is {:?}", kinds[1]);

    let allow = ok(fibration::allowable_check(split), "allowable check")?;
    ensure!(allow.allowable, "split not allowable: {}", allow.reason);
    let basis = allow.ebasis().ok_or("no certifying basis")?;
    let side1 = ok(fibration::build_disc_fibration(&split.side1), "side 1 hom")?;
    let t1 = ok(ok(side1.in_basis(&basis), "rebase")?.twist(), "twist")?;
    ensure!(t1 == m2([[1, -9], [0, 1]]), "side-1 monodromy {t1:?}");

    let sm = ok(fibration::build_k3_split_model(split), "split model")?;
    ensure!(sm.glued.degree.value == 9 && !sm.glued.degree.prime, "side-1 degree {}", sm.glued.degree);
    ensure!(ok(fibration::component_root_type(&sm), "components")? == "A17", "fibre components are not A17");

    let (deg, fib, _) = ok(mirror::dht_sides(inst), "sides")?;
    ensure!(deg.l.rank() == 1 && deg.l.lattice().gram().get(0, 0) == &BigInt::from(2), "L is not ⟨2⟩");

    // Mirror lattice of L along τ inside H ⊕ H ⊕ NS(M).
    let lam = mirror::k3_ambient(&deg.model);
    let gens: Vec<Vector> = deg.l.generators().iter().map(|v| mirror::embed_ns(v)).collect();
    let l_amb = Sublattice::spanned_by(lam.clone(), &gens);
    let cert = AdmissibilityCertificate { e: unit(22, 0), g: unit(22, 1), m: BigInt::one(), div_e: BigInt::one() };
    ensure!(cert.verify(&lam), "τ certificate does not verify");
    let lc = ok(mirror::mirror_lattice(&l_amb, &cert), "mirror lattice")?;
    let target = ok(lattice::standard_lattice("H+E8+E8+A1"), "H+E8+E8+A1")?;
    ensure!(ok(lattice::same_isometry_class(&lc.lattice(), &target), "class")? == Some(true), "mirror lattice ≇ H+E8+E8+A1");

    // A17 spanned by e_i − e_{i+1} of the blown-up plane inside the lifted complement.
    let m = &deg.model;
    let lhat = ok(tyurin::lift_polarisation(m, &deg.l), "lift")?;
    let amb = m.ns_sum();
    let lhat_amb = ok(Sublattice::new(amb.clone(), &m.w_basis * &lhat.basis), "lifted L")?;
    let perp = lhat_amb.orthogonal_complement();
    let kk = ok(Sublattice::new(amb.clone(), m.factors[0].k_perp().basis.block_diag(&m.factors[1].k_perp().basis)), "K^⊥ sum")?;
    let meet = ok(Sublattice::new(amb.clone(), k3mirror::snf::intersect_spans(&perp.basis, &kk.basis)), "meet")?;
    let r1 = m.factors[0].ns().rank();
    let mut diffs = Vec::new();
    for i in 1..18 {
        let mut v = vec![BigInt::zero(); 19];
        v[i] = BigInt::one();
        v[i + 1] = BigInt::from(-1);
        let ns_v = ok(m.factors[1].from_standard(&v), "standard coordinates")?;
        let mut x = vec![BigInt::zero(); r1];
        x.extend(ns_v);
        ensure!(amb.norm(&x) == BigInt::from(-2), "e_{i} − e_{} is not a root", i + 1);
        diffs.push(x);
    }
    let span = Sublattice::spanned_by(amb, &diffs);
    ensure!(span.rank() == 17 && span.same_span(&meet), "span of e_i − e_(i+1) differs from the lifted complement");
    ensure!(lattice::root_system_name(&span.lattice()).map_err(|e| e.to_string())? == "A17", "span is not A17");

    let report = ok(mirror::check_mirror_pair(&deg, &fib, &WitnessMode::Auto), "mirror check")?;
    ensure!(report.verdict == Some(true), "auto check: {}", report.reason);
    let secs = start.elapsed().as_secs_f64();
    ensure!(secs < 60.0, "took {secs:.1} s");
    Ok(format!("verified in {secs:.1} s"))
}

// ---------------------------------------------------------------------------
// 6. Negative controls

fn negative_controls() -> Check {
    // H ⊕ D16 inside H ⊕ E8 ⊕ E8.
    let s = ok(mirror::h_plus_d16_control(), "H+D16")?;
    let h_e8_e8 = ok(lattice::standard_lattice("H+E8+E8"), "H+E8+E8")?;
    ensure!(ok(lattice::same_isometry_class(&s.ambient, &h_e8_e8), "class")? == Some(true), "ambient ≇ H+E8+E8");
    let clause = mirror::primitivity_clause(&s, &s.ambient.full());
    ensure!(!clause.l_primitive && clause.l_index == "2", "H+D16 clause: {clause:?}");

    // The same defect on a mirror pair: the I*12 components as Γ.
    let inst = &mirror::dht_instances()[1];
    let (deg, mut fib, sm) = ok(mirror::dht_sides(inst), "sides")?;
    fib.gamma = Some(ok(fibration::component_lattice(&sm), "components")?);
    let r = ok(mirror::check_mirror_pair(&deg, &fib, &WitnessMode::Auto), "mirror check")?;
    ensure!(r.verdict == Some(false) && !r.primitivity.gamma_primitive && r.primitivity.gamma_index == "2", "component Γ: {}", r.reason);
    ensure!(r.lift.is_none(), "refutation went past the primitivity check");

    // Degree-mismatched split.
    let (deg, _, _) = ok(mirror::dht_sides(&mirror::dht_instances()[0]), "sides")?;
    let i1 = || fibration::FramedFibre::plain(KodairaType::I(1));
    let split = ok(LoopSplit::new(fibration::FibreConfig::new(vec![i1(), i1()]), fibration::FibreConfig::new(vec![fibration::FramedFibre::plain(KodairaType::I(22))])), "split")?;
    let r = ok(mirror::check_mirror_pair(&deg, &FibrationSide { split, gamma: None }, &WitnessMode::Auto), "mirror check")?;
    ensure!(r.verdict == Some(false) && !r.factors.degrees_match, "mismatch not refuted: {}", r.reason);
    ensure!(r.factors.isometries.is_none() && r.lift.is_none(), "mismatch refuted too late");

    // Divisibility obstruction: e = (1, 0) in H(2) has div 2.
    let h2 = lattice::hyperbolic(2);
    let e = ivec(&[1, 0]);
    ensure!(ok(mirror::div(&h2, &e), "div")? == BigInt::from(2), "div(e) ≠ 2");
    match ok(mirror::is_m_admissible(&h2, &e, 1, mirror::DEFAULT_ADMISSIBILITY_BOUND), "admissibility")? {
        Admissibility::Obstructed { reason } => ensure!(!reason.is_empty(), "empty obstruction"),
        other => return Err(format!("expected an obstruction, got {other:?}")),
    }
    let l2 = ok(lattice::standard_lattice("H(2)+H"), "H(2)+H")?;
    ensure!(ok(mirror::plane_divisibility_obstructed(&l2, &unit(4, 0), &unit(4, 2)), "plane")?, "plane obstruction missed");
    Ok("index-2 Γ, degree mismatch and divisibility obstruction all refuted".into())
}

// ---------------------------------------------------------------------------
// 7. Property suites

fn property_suites() -> Check {
    let outcomes = properties::run_all(0x5eed, properties::DEFAULT_CASES);
    ensure!(outcomes.len() == properties::PROPERTY_NAMES.len(), "{} properties ran", outcomes.len());
    for o in &outcomes {
        ensure!(o.cases >= 200, "{}: only {} cases", o.name, o.cases);
        ensure!(o.passed, "{}: {}", o.name, o.failure.clone().unwrap_or_default());
    }
    Ok(format!("{} properties × {} cases", outcomes.len(), properties::DEFAULT_CASES))
}

fn main() {
    let criteria: [(&str, fn() -> Check); 7] = [
        ("chain and quadric K^⊥ table", chain_k_perp_table),
        ("Kodaira fibre pseudolattices", kodaira_table),
        ("glued-model structure", glued_structure),
        ("coupling indices", coupling_indices),
        ("degree-two instance end to end", degree_two_end_to_end),
        ("negative controls", negative_controls),
        ("property suites", property_suites),
    ];
    let results: Vec<Check> = std::thread::scope(|s| {
        let handles: Vec<_> = criteria
            .iter()
            .map(|(_, f)| {
                let f = *f;
                std::thread::Builder::new()
                    .stack_size(64 << 20)
                    .spawn_scoped(s, move || std::panic::catch_unwind(f).unwrap_or_else(|_| Err("panicked".into())))
                    .expect("spawn")
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap_or_else(|_| Err("panicked".into()))).collect()
    });
    let mut failed = 0;
    for (i, ((name, _), r)) in criteria.iter().zip(&results).enumerate() {
        match r {
            Ok(msg) => println!("PASS criterion {}: {name} ({msg})", i + 1),
            Err(msg) => {
                failed += 1;
                println!("FAIL criterion {}: {name}: {msg}", i + 1);
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
