mod common;

use std::f64::consts::PI;

use proptest::prelude::*;

use cliffbif::bifurcation::iota_k;
use cliffbif::flow::{self, clairaut, energy, FlowConfig};
use cliffbif::lift::{self, embed, project};
use cliffbif::ode::OdeConfig;
use cliffbif::shooting::{self, find_root, scan_roots, RootOptions};
use cliffbif::EllipsoidGeometry;

fn cfg() -> FlowConfig {
    FlowConfig::default()
}

fn root_at(a: f64) -> f64 {
    let g = EllipsoidGeometry::new(a).unwrap();
    let roots = scan_roots(&g, 1, (0.02, 0.98), 60, &cfg(), &RootOptions::default()).unwrap();
    roots
        .first()
        .expect("a nontrivial root below the first instant")
        .s
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn rho_is_increasing_and_inverts(a in 0.1f64..8.0, x in 0.0f64..1.0, dx in 1e-6f64..1e-2) {
        let g = EllipsoidGeometry::new(a).unwrap();
        let phi = x * PI / 2.0 * (1.0 - 1e-3);
        prop_assert!(g.rho_of_phi(phi + dx) > g.rho_of_phi(phi));
        let back = g.phi_of_rho(g.rho_of_phi(phi)).unwrap();
        prop_assert!((back - phi).abs() < 1e-11);
    }

    #[test]
    fn varphi_is_the_warped_sine(a in 0.1f64..8.0, x in 0.0f64..0.99) {
        let g = EllipsoidGeometry::new(a).unwrap();
        let phi = x * PI / 2.0;
        let v = g.varphi(g.rho_of_phi(phi)).unwrap();
        prop_assert!((v - PI * a * (2.0 * phi).sin()).abs() < 1e-10 * (1.0 + a));
    }

    #[test]
    fn varphi_derivatives_match_differences(a in 0.2f64..5.0, x in 0.02f64..0.95) {
        let g = EllipsoidGeometry::new(a).unwrap();
        let rho = x * g.length();
        let h = 1e-4 * g.length();
        let p = g.profile(rho).unwrap();
        let (vm, vp) = (g.varphi(rho - h).unwrap(), g.varphi(rho + h).unwrap());
        let d1 = (vp - vm) / (2.0 * h);
        let d2 = (vp - 2.0 * p.varphi + vm) / (h * h);
        prop_assert!((p.dvarphi - d1).abs() < 1e-6 * (1.0 + d1.abs()));
        prop_assert!((p.ddvarphi - d2).abs() < 1e-4 * (1.0 + d2.abs()));
    }

    #[test]
    fn first_integrals_are_conserved(a in 0.2f64..5.0, s in -0.8f64..0.8, k in 1u32..=4) {
        let g = EllipsoidGeometry::new(a).unwrap();
        let traj = flow::integrate(&g, s, k, &cfg()).unwrap();
        let ell = traj.ell(k as i64).unwrap();
        for st in traj.sample(0.0, ell, 50) {
            prop_assert!(((clairaut(&g, &st) - traj.clairaut0) / traj.clairaut0).abs() < 1e-9);
            prop_assert!(((energy(&g, &st) - traj.energy0) / traj.energy0).abs() < 1e-9);
            prop_assert!(st.theta_dot > 0.0);
        }
    }

    #[test]
    fn backward_integration_is_the_reflection(a in 0.3f64..3.0, s in -0.7f64..0.7, t in 0.5f64..6.0) {
        let g = EllipsoidGeometry::new(a).unwrap();
        let initial = flow::shooting_state(&g, s).unwrap();
        let fwd = flow::integrate_span(&g, initial, t, &cfg()).unwrap();
        let bwd = flow::integrate_span(&g, initial, -t, &cfg()).unwrap();
        let (p, q) = (fwd.state_at(t), bwd.state_at(-t).reflected());
        prop_assert!((p.rho - q.rho).abs() < 1e-8);
        prop_assert!((p.theta - q.theta).abs() < 1e-8);
        prop_assert!((p.rho_dot - q.rho_dot).abs() < 1e-8);
        prop_assert!((p.theta_dot - q.theta_dot).abs() < 1e-8);
    }

    #[test]
    fn embedding_projects_back(a in 0.2f64..5.0, x in 0.01f64..0.99, theta in -3.1f64..3.1, psi in 0.0f64..std::f64::consts::TAU) {
        let g = EllipsoidGeometry::new(a).unwrap();
        let rho = x * g.length();
        let p = embed(&g, rho, theta, psi).unwrap();
        let resid = (p[0] * p[0] + p[1] * p[1]) / (a * a) + p[2] * p[2] + p[3] * p[3] - 1.0;
        prop_assert!(resid.abs() < 1e-14);
        let (r, th) = project(&g, &p).unwrap();
        prop_assert!((r - rho).abs() < 1e-10 * g.length());
        prop_assert!((th - theta).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn closed_geodesics_stay_closed_under_iteration(a in 0.2f64..0.55) {
        let g = EllipsoidGeometry::new(a).unwrap();
        let s = root_at(a);
        for m in 2..=3u32 {
            let f = shooting::f_k(&g, s, m, &cfg()).unwrap().f_value;
            prop_assert!(f.abs() < 1e-8, "f_{} = {}", m, f);
        }
    }

    #[test]
    fn reflection_is_an_involution_swapping_sides(a in 0.2f64..0.55) {
        let g = EllipsoidGeometry::new(a).unwrap();
        let s = root_at(a);
        let once = iota_k(&g, s, 1, &cfg()).unwrap();
        let twice = iota_k(&g, once.s_reflected, 1, &cfg()).unwrap();
        prop_assert!(!once.preserves_side());
        prop_assert!(once.f_reflected.abs() < 1e-8);
        prop_assert!((twice.s_reflected - s).abs() < 1e-8);
    }
}

#[test]
fn tolerance_controls_the_error() {
    let g = EllipsoidGeometry::new(0.5).unwrap();
    let ell_ref = 3.562_837_216_966_972;
    let mut errors = Vec::new();
    for rtol in [1e-5, 1e-7, 1e-9, 1e-11] {
        let cfg = FlowConfig {
            ode: OdeConfig {
                rtol,
                atol: rtol * 1e-2,
                max_step: 10.0,
                ..OdeConfig::default()
            },
            ..FlowConfig::default()
        };
        let ell = shooting::f_k(&g, 0.3, 1, &cfg).unwrap().ell_k;
        errors.push((rtol, (ell - ell_ref).abs()));
    }
    for (rtol, err) in &errors {
        assert!(*err < 100.0 * rtol, "rtol {rtol}: error {err}");
    }
    assert!(errors[3].1 < errors[0].1);
}

#[test]
fn rk4_oracle_reaches_the_reference() {
    let ell_ref = 3.562_837_216_966_972;
    let run = |n: usize| (common::shoot_rk4(0.5, 0.3, 1, n).0 - ell_ref).abs();
    assert!(run(200) < 1e-9);
    assert!(run(800) < 1e-12);
}

#[test]
fn clifford_torus_is_the_product_of_circles() {
    let g = EllipsoidGeometry::new(1.5).unwrap();
    let traj = flow::integrate(&g, 0.0, 1, &cfg()).unwrap();
    let mesh = lift::lift(&g, &traj, 1, 64, 32, None).unwrap();
    for v in &mesh.vertices {
        let z2 = (v[0] * v[0] + v[1] * v[1]) / 2.25;
        let w2 = v[2] * v[2] + v[3] * v[3];
        assert!((z2 - 0.5).abs() < 1e-12 && (w2 - 0.5).abs() < 1e-12);
    }
    assert!(mesh.closure_gap < 1e-10);
}

#[test]
fn mesh_area_converges_quadratically() {
    let a = 0.45;
    let g = EllipsoidGeometry::new(a).unwrap();
    let s = root_at(a);
    let traj = flow::integrate(&g, s, 1, &cfg()).unwrap();
    let exact = lift::torus_area(&g, &traj, 1).unwrap();
    let err = |n: usize| {
        let mesh = lift::lift(&g, &traj, 1, n, n / 2, None).unwrap();
        (mesh.area() - exact).abs() / exact
    };
    let (e1, e2, e3) = (err(32), err(64), err(128));
    assert!(e2 < e1 && e3 < e2);
    let order = (e2 / e3).log2();
    assert!((1.8..2.2).contains(&order), "observed order {order}");
}

#[test]
fn mesh_is_invariant_under_the_circle_action() {
    let g = EllipsoidGeometry::new(0.4).unwrap();
    let s = root_at(0.4);
    let traj = flow::integrate(&g, s, 1, &cfg()).unwrap();
    let n_psi = 24;
    let mesh = lift::lift(&g, &traj, 1, 40, n_psi, None).unwrap();
    let shift = 5;
    let alpha = 2.0 * PI * shift as f64 / n_psi as f64;
    let (sa, ca) = alpha.sin_cos();
    for i in 0..mesh.n_t {
        for j in 0..n_psi {
            let v = mesh.vertex(i, j);
            let rotated = [v[0], v[1], ca * v[2] - sa * v[3], sa * v[2] + ca * v[3]];
            let target = mesh.vertex(i, j + shift);
            for c in 0..4 {
                assert!((rotated[c] - target[c]).abs() < 1e-13);
            }
        }
    }
}

#[test]
fn mesh_rows_lie_over_the_geodesic() {
    let g = EllipsoidGeometry::new(0.5).unwrap();
    let s = find_root(&g, 1, (0.45, 0.55), &cfg()).unwrap().s;
    let traj = flow::integrate(&g, s, 1, &cfg()).unwrap();
    let mesh = lift::lift(&g, &traj, 1, 50, 16, Some(1)).unwrap();
    for i in 0..mesh.n_t {
        let st = traj.state_at(mesh.times[i]);
        for j in 0..mesh.n_psi {
            let (rho, theta) = project(&g, &mesh.vertex(i, j)).unwrap();
            assert!((rho - st.rho).abs() < 1e-10);
            let dtheta = (theta - st.theta).rem_euclid(2.0 * PI);
            assert!(dtheta.min(2.0 * PI - dtheta) < 1e-10);
        }
    }
}
