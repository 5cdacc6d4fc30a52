//! Seeded property suites, one test per property, 200 cases each.

use k3mirror::properties::{run_property, DEFAULT_CASES, PROPERTY_NAMES};

fn check(name: &str, seed: u64) {
    assert!(DEFAULT_CASES >= 200);
    let out = run_property(name, seed, DEFAULT_CASES).unwrap_or_else(|| panic!("unknown property {name}"));
    assert_eq!(out.cases, DEFAULT_CASES);
    assert!(out.passed, "{name} failed: {}", out.failure.unwrap_or_default());
}

#[test]
fn every_property_has_a_test() {
    let here = ["adjunction", "twist_multiplicativity", "canonical_equation", "snf_round_trip", "complement_saturation", "lift_project", "torsion_criterion"];
    assert_eq!(PROPERTY_NAMES.as_slice(), here.as_slice());
}

#[test]
fn adjunction() {
    check("adjunction", 0xA0D1);
}

#[test]
fn twist_multiplicativity() {
    check("twist_multiplicativity", 0x7E15);
}

#[test]
fn canonical_equation() {
    check("canonical_equation", 0xCA11);
}

#[test]
fn snf_round_trip() {
    check("snf_round_trip", 0x5AF0);
}

#[test]
fn complement_saturation() {
    check("complement_saturation", 0xC0DE);
}

#[test]
fn lift_project() {
    check("lift_project", 0x11F7);
}

#[test]
fn torsion_criterion() {
    check("torsion_criterion", 0x7025);
}
