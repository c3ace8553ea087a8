#![allow(clippy::excessive_precision)]

mod common;

use std::f64::consts::PI;

use cliffbif::flow::{self, FlowConfig};
use cliffbif::shooting::{self, find_root};
use cliffbif::EllipsoidGeometry;

const LENGTHS: [(f64, f64, f64); 4] = [
    (0.3, 3.6969846439173916736, 2.0992335541320565153),
    (0.5, 4.3359413516725258134, 2.6918688936852030226),
    (2.0, 10.739217663941868401, 8.294003551021935133),
    (5.0, 25.096255091568415621, 20.280201613158949855),
];

#[test]
fn frozen_lengths_match_closed_antiderivative() {
    for (a, len, rho0) in LENGTHS {
        assert!((common::rho_closed(a, PI / 2.0) - len).abs() < 1e-13);
        assert!((common::rho_closed(a, PI / 4.0) - rho0).abs() < 1e-13);
    }
}

#[test]
fn profile_lengths() {
    for (a, len, rho0) in LENGTHS {
        let g = EllipsoidGeometry::new(a).unwrap();
        assert!((g.length() - len).abs() < 1e-11 * len, "a = {a}");
        assert!((g.rho_clifford() - rho0).abs() < 1e-11 * rho0, "a = {a}");
    }
}

#[test]
fn rho_matches_simpson_and_closed_form() {
    for a in [0.2, 0.7, 1.0, 1.9, 4.0] {
        let g = EllipsoidGeometry::new(a).unwrap();
        for i in 0..=40 {
            let phi = PI / 2.0 * i as f64 / 40.0;
            let exact = common::rho_closed(a, phi);
            let simpson = common::rho_simpson(a, phi, 1e-13);
            assert!(
                (simpson - exact).abs() < 1e-11,
                "oracles disagree at a = {a}, phi = {phi}"
            );
            assert!(
                (g.rho_of_phi(phi) - exact).abs() < 1e-11,
                "a = {a}, phi = {phi}"
            );
        }
    }
}

#[test]
fn varphi_and_slope_match_closed_form() {
    for a in [0.3, 1.0, 2.5] {
        let g = EllipsoidGeometry::new(a).unwrap();
        for i in 1..40 {
            let rho = g.length() * i as f64 / 40.0;
            let (v, dv) = common::varphi_closed(a, rho);
            let p = g.profile(rho).unwrap();
            assert!((p.varphi - v).abs() < 1e-10, "a = {a}, rho = {rho}");
            assert!((p.dvarphi - dv).abs() < 1e-9, "a = {a}, rho = {rho}");
        }
    }
}

#[test]
fn reference_shot() {
    // 30-digit Taylor integration in θ
    let (ell_ref, f_ref) = (3.56283721696697215, -0.133843356857471392);
    let g = EllipsoidGeometry::new(0.5).unwrap();
    let r = shooting::f_k(&g, 0.3, 1, &FlowConfig::default()).unwrap();
    assert!((r.ell_k - ell_ref).abs() < 1e-10);
    assert!((r.f_value - f_ref).abs() < 1e-10);
    let (ell_rk, f_rk) = common::shoot_rk4(0.5, 0.3, 1, 2000);
    assert!((ell_rk - ell_ref).abs() < 1e-10 && (f_rk - f_ref).abs() < 1e-10);
}

#[test]
fn reference_shot_three_crossings() {
    let (ell_ref, f_ref) = (11.7045757454022784, -2.94983724183483344);
    let g = EllipsoidGeometry::new(2.0).unwrap();
    let r = shooting::f_k(&g, -0.4, 3, &FlowConfig::default()).unwrap();
    assert!((r.ell_k - ell_ref).abs() < 1e-9);
    assert!((r.f_value - f_ref).abs() < 1e-9);
}

#[test]
fn reference_root_below_first_instant() {
    let s_ref = 0.505457152532071248;
    let g = EllipsoidGeometry::new(0.5).unwrap();
    let r = find_root(&g, 1, (0.45, 0.55), &FlowConfig::default()).unwrap();
    assert!(r.converged);
    assert!((r.s - s_ref).abs() < 1e-9);
}

#[test]
fn trivial_geodesic_closes_at_k_pi() {
    let cfg = FlowConfig::default();
    for a in [0.25, 1.0, 3.0] {
        let g = EllipsoidGeometry::new(a).unwrap();
        let traj = flow::integrate(&g, 0.0, 4, &cfg).unwrap();
        for m in 1..=4 {
            assert!((traj.ell(m).unwrap() - m as f64 * PI).abs() < 1e-10);
        }
    }
}
