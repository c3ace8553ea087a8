//! Browser bindings: one geodesic in the orbit disk, a scan of the shooting
//! function, and the bifurcation instants with the linearized slope.
//!
//! Results are returned as flat `Float64Array`s to keep the JavaScript side small.

use wasm_bindgen::prelude::*;

use cliffbif::bifurcation;
use cliffbif::flow::{self, FlowConfig};
use cliffbif::shooting;
use cliffbif::EllipsoidGeometry;

fn err(e: cliffbif::Error) -> JsValue {
    JsValue::from_str(&e.to_string())
}

/// `[f_k, ℓ_k, L_a, ρ_{a,0}, x_0, y_0, x_1, y_1, …]` with the closed curve over
/// `[−ℓ_k, ℓ_k]` drawn in polar coordinates `(ρ cos θ, ρ sin θ)`.
pub fn geodesic_polyline(a: f64, s: f64, k: u32, samples: usize) -> cliffbif::Result<Vec<f64>> {
    let g = EllipsoidGeometry::new(a)?;
    let (res, traj) = shooting::shoot(&g, s, k.max(1), &FlowConfig::default())?;
    let mut out = vec![res.f_value, res.ell_k, g.length(), g.rho_clifford()];
    for st in traj.sample(-res.ell_k, res.ell_k, samples.max(2)) {
        out.push(st.rho * st.theta.cos());
        out.push(st.rho * st.theta.sin());
    }
    Ok(out)
}

/// `[s_0, f_0, s_1, f_1, …]` on `n` uniform points of `(−0.95, 0.95)`;
/// points where the integration fails are skipped.
pub fn shooting_scan(a: f64, k: u32, n: usize) -> cliffbif::Result<Vec<f64>> {
    let g = EllipsoidGeometry::new(a)?;
    let cfg = FlowConfig::default();
    let n = n.max(2);
    let mut out = Vec::with_capacity(2 * n);
    for i in 0..n {
        let s = -0.95 + 1.9 * i as f64 / (n - 1) as f64;
        if let Ok(r) = shooting::f_k(&g, s, k.max(1), &cfg) {
            out.push(s);
            out.push(r.f_value);
        }
    }
    Ok(out)
}

/// `[j, k, a_jk, …]` sorted by `a_jk`.
pub fn instant_table(k_max: u32) -> Vec<f64> {
    bifurcation::instants(k_max.clamp(1, 12))
        .iter()
        .flat_map(|i| [i.j as f64, i.k as f64, i.a_jk])
        .collect()
}

/// `[a_0, d_0, …]`: the slope `∂f_k/∂s(a, 0)` normalized by `β_a'(0)`, on `n`
/// points of `[a_lo, a_hi]`. Its zeros are the instants `a_jk`.
pub fn linear_slope(k: u32, a_lo: f64, a_hi: f64, n: usize) -> Vec<f64> {
    let n = n.max(2);
    (0..n)
        .flat_map(|i| {
            let a = a_lo + (a_hi - a_lo) * i as f64 / (n - 1) as f64;
            let w = shooting::jacobi_frequency(a);
            [a, -w * (w * k as f64 * std::f64::consts::PI).sin()]
        })
        .collect()
}

#[wasm_bindgen]
pub fn geodesic(a: f64, s: f64, k: u32, samples: usize) -> Result<Vec<f64>, JsValue> {
    geodesic_polyline(a, s, k, samples).map_err(err)
}

#[wasm_bindgen]
pub fn scan(a: f64, k: u32, n: usize) -> Result<Vec<f64>, JsValue> {
    shooting_scan(a, k, n).map_err(err)
}

#[wasm_bindgen]
pub fn instants(k_max: u32) -> Vec<f64> {
    instant_table(k_max)
}

#[wasm_bindgen]
pub fn slope(k: u32, a_lo: f64, a_hi: f64, n: usize) -> Vec<f64> {
    linear_slope(k, a_lo, a_hi, n)
}

/// Nontrivial closed geodesic with `k` crossings nearest to `s`, or `NaN`.
#[wasm_bindgen]
pub fn nearest_root(a: f64, k: u32, s: f64) -> f64 {
    let Ok(g) = EllipsoidGeometry::new(a) else {
        return f64::NAN;
    };
    let cfg = FlowConfig::default();
    let opts = shooting::RootOptions::default();
    let lo = (s - 0.1).max(-0.95);
    let hi = (s + 0.1).min(0.95);
    shooting::scan_roots(&g, k.max(1), (lo, hi), 21, &cfg, &opts)
        .ok()
        .and_then(|roots| {
            roots
                .into_iter()
                .filter(|r| r.s.abs() > 1e-6 && flow::S_LIMIT > r.s.abs())
                .min_by(|x, y| (x.s - s).abs().total_cmp(&(y.s - s).abs()))
        })
        .map_or(f64::NAN, |r| r.s)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trivial_geodesic_is_a_circle() {
        let out = geodesic_polyline(0.8, 0.0, 1, 64).unwrap();
        let rho0 = out[3];
        for p in out[4..].chunks(2) {
            assert!((p[0].hypot(p[1]) - rho0).abs() < 1e-9);
        }
    }

    #[test]
    fn instants_come_in_triples() {
        let t = instant_table(2);
        assert_eq!(t.len(), 9);
        assert_eq!(&t[3..5], &[1.0, 1.0]);
    }

    #[test]
    fn slope_vanishes_at_the_first_instant() {
        let a11 = 1.0 / 3f64.sqrt();
        let d = linear_slope(1, a11, a11 + 1.0, 2);
        assert!(d[1].abs() < 1e-12);
    }

    #[test]
    fn scan_changes_sign_below_the_first_instant() {
        let v = shooting_scan(0.5, 1, 40).unwrap();
        let f: Vec<f64> = v.chunks(2).filter(|p| p[0] > 0.05).map(|p| p[1]).collect();
        assert!(f.windows(2).any(|w| (w[0] > 0.0) != (w[1] > 0.0)));
    }
}
