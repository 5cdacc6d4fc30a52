//! Cross-module checks on the four degree-two instances and on mirror
//! lattices of the K3 lattice.

use k3mirror::fibration::{self, boundary_unipotent, FibreConfig};
use k3mirror::lattice::{self, Sublattice};
use k3mirror::matrix::{ivec, Mat};
use k3mirror::mirror::{self, AdmissibilityCertificate};
use num_bigint::BigInt;
use num_traits::{One, Zero};

fn unit(n: usize, i: usize) -> Vec<BigInt> {
    let mut v = vec![BigInt::zero(); n];
    v[i] = BigInt::one();
    v
}

#[test]
fn instance_splits_close_up_to_a_k3_fibration() {
    for inst in mirror::dht_instances() {
        let [s1, s2] = inst.split.sides();
        assert_eq!(s1.euler() + s2.euler(), 24, "{}", inst.name);
        let mut all = s1.fibres.clone();
        all.extend(s2.fibres.clone());
        let full = FibreConfig::new(all);
        assert_eq!(full.monodromy_product().unwrap(), Mat::identity(2), "{}", inst.name);
        let rep = fibration::allowable_check(&inst.split).unwrap();
        assert!(rep.allowable, "{}: {}", inst.name, rep.reason);
        // In the certifying basis each side twists by the boundary unipotent of its Euler number.
        let basis = rep.basis.clone().unwrap();
        let inv = basis.inverse_unimodular().unwrap();
        for (t, e) in rep.twists.iter().zip(rep.euler) {
            assert_eq!(&(&inv * t) * &basis, boundary_unipotent(e), "{} side with e = {e}", inst.name);
        }
    }
}

#[test]
fn instance_component_types_match_on_both_sides() {
    for inst in mirror::dht_instances() {
        let (deg, _, sm) = mirror::dht_sides(&inst).unwrap();
        let fib_type = fibration::component_root_type(&sm).unwrap();
        assert!(mirror::same_root_type(&fib_type, inst.root_type), "{}: fibration side {fib_type}", inst.name);
        let deg_type = mirror::lifted_complement_root_type(&deg.model, &deg.l).unwrap();
        assert!(mirror::same_root_type(&deg_type, inst.root_type), "{}: degeneration side {deg_type}", inst.name);
        assert_eq!(deg.l.rank(), 1);
        assert_eq!(deg.l.lattice().gram().get(0, 0), &BigInt::from(2), "{}", inst.name);
    }
}

#[test]
fn mirror_lattice_is_an_involution_in_every_degree() {
    let lam = lattice::k3_lattice();
    let cert = AdmissibilityCertificate { e: unit(22, 0), g: unit(22, 1), m: BigInt::one(), div_e: BigInt::one() };
    for k in 1..=6i64 {
        // Polarisation e' + k f' of square 2k in the second hyperbolic plane.
        let mut v = vec![BigInt::zero(); 22];
        v[2] = BigInt::one();
        v[3] = BigInt::from(k);
        let l = Sublattice::new(lam.clone(), Mat::column(&v)).unwrap();
        let lc = mirror::mirror_lattice(&l, &cert).unwrap();
        let mut name = "H+E8+E8+".to_string();
        name.push_str(&format!("<{}>", -2 * k));
        let target = lattice::standard_lattice(&name).unwrap();
        assert_eq!(lattice::same_isometry_class(&lc.lattice(), &target).unwrap(), Some(true), "degree {}", 2 * k);
        let back = mirror::mirror_lattice(&lc, &cert).unwrap();
        assert!(back.same_span(&l), "degree {}", 2 * k);
    }
}

#[test]
fn sheared_isotropic_vectors_transport_to_the_standard_one() {
    let l = lattice::standard_lattice("H+H").unwrap();
    let std_plane = Sublattice::new(l.clone(), Mat::from_cols(4, &[unit(4, 0), unit(4, 2)])).unwrap();
    for a in -3..=3i64 {
        let e = ivec(&[1, 0, a, 0]);
        let plane = Sublattice::new(l.clone(), Mat::from_cols(4, &[e.clone(), unit(4, 2)])).unwrap();
        let g = mirror::hh_transport(&l, &plane, &std_plane, &e, &unit(4, 0)).unwrap();
        assert_eq!(g.apply(&e), unit(4, 0));
        assert_eq!(l.gram().congruence(&g), *l.gram());
    }
}
