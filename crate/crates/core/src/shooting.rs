//! Shooting function `f_k(a, s) = ρ̇_{a,s}(ℓ_k(a, s))` and classification of
//! the closed geodesics it detects.
//!
//! `γ_{a,s}` is symmetric under the reflection across the diameter `θ ∈ {0, π}`,
//! so it closes up exactly when it meets that diameter orthogonally, i.e. when
//! `f_k` vanishes for some `k`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{self, FlowConfig, Trajectory};
use crate::profile::EllipsoidGeometry;

pub const ROOT_F_TOL: f64 = 1e-10;
pub const ROOT_X_TOL: f64 = 1e-12;
/// `|f_{k'}|` below this marks a shorter period (non-primitive geodesic).
pub const PRIMITIVE_THRESHOLD: f64 = 1e-6;
/// Residual accepted as "closed" when classifying.
pub const CLOSED_TOL: f64 = 1e-8;
pub const DEAD_BAND: f64 = 1e-10;
pub const H_S: f64 = 1e-6;
pub const H_A: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShootingResult {
    pub a: f64,
    pub s: f64,
    pub k: u32,
    pub f_value: f64,
    pub ell_k: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeodesicClassification {
    pub is_closed: bool,
    pub is_simple: bool,
    pub is_primitive: bool,
    pub winding: u32,
    pub clifford_intersections: u32,
    pub self_intersections_on_diameter: u32,
    /// Some `f_{k'}`, `k' < k`, vanishes: the curve touches the diameter
    /// orthogonally before closing.
    pub degenerate: bool,
    /// `f_{k'}` for `k' = 1..=k`.
    pub f_values: Vec<f64>,
}

impl GeodesicClassification {
    /// `(winding, Clifford intersections, self-intersections)`.
    pub fn invariants(&self) -> (u32, u32, u32) {
        (
            self.winding,
            self.clifford_intersections,
            self.self_intersections_on_diameter,
        )
    }
}

/// Integrates `γ_{a,s}` to its `k`-th crossing and evaluates `f_k`.
pub fn shoot(
    g: &EllipsoidGeometry,
    s: f64,
    k: u32,
    cfg: &FlowConfig,
) -> Result<(ShootingResult, Trajectory)> {
    let traj = flow::integrate(g, s, k, cfg)?;
    let ell = traj
        .ell(k as i64)
        .expect("integration stops at the target crossing");
    let f_value = traj.state_at(ell).rho_dot;
    let res = ShootingResult {
        a: g.a(),
        s,
        k,
        f_value,
        ell_k: ell,
        converged: f_value.abs() <= ROOT_F_TOL,
    };
    Ok((res, traj))
}

pub fn f_k(g: &EllipsoidGeometry, s: f64, k: u32, cfg: &FlowConfig) -> Result<ShootingResult> {
    shoot(g, s, k, cfg).map(|(r, _)| r)
}

/// Angular frequency `2a/√(a²+1)` of the linearized radial motion about the Clifford geodesic.
pub fn jacobi_frequency(a: f64) -> f64 {
    2.0 * a / (a * a + 1.0).sqrt()
}

/// `∂f_k/∂s(a, 0) = Ṙ_a(kπ)` with `R_a(t) = β_a'(0) cos(ωt)`.
pub fn dfds_closed_form(g: &EllipsoidGeometry, k: u32) -> f64 {
    let w = jacobi_frequency(g.a());
    -g.beta_prime(0.0) * w * (w * k as f64 * PI).sin()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlopeAtTrivial {
    pub numeric: f64,
    pub closed_form: f64,
}

/// Centered difference of `f_k` in `s` at the trivial solution, next to its closed form.
pub fn dfds_at_zero(g: &EllipsoidGeometry, k: u32, cfg: &FlowConfig) -> Result<SlopeAtTrivial> {
    dfds_at_zero_with_step(g, k, H_S, cfg)
}

pub fn dfds_at_zero_with_step(
    g: &EllipsoidGeometry,
    k: u32,
    h: f64,
    cfg: &FlowConfig,
) -> Result<SlopeAtTrivial> {
    let fp = f_k(g, h, k, cfg)?.f_value;
    let fm = f_k(g, -h, k, cfg)?.f_value;
    Ok(SlopeAtTrivial {
        numeric: (fp - fm) / (2.0 * h),
        closed_form: dfds_closed_form(g, k),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MixedPartial {
    pub a_jk: f64,
    pub numeric: f64,
    pub target: f64,
}

impl MixedPartial {
    pub fn relative_error(&self) -> f64 {
        (self.numeric - self.target).abs() / self.target.abs()
    }
}

fn check_label(j: u32, k: u32) -> Result<()> {
    if k == 0 || j == 0 || j >= 2 * k || gcd(j, k) != 1 {
        return Err(Error::InvalidParameter {
            name: "j/k",
            value: j as f64 / k.max(1) as f64,
            reason: "need coprime 0 < j < 2k",
        });
    }
    Ok(())
}

pub(crate) fn gcd(mut a: u32, mut b: u32) -> u32 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Bifurcation instant `a^j_k = (j/k) / √(4 − (j/k)²)`.
pub fn instant_value(j: u32, k: u32) -> f64 {
    let q = j as f64 / k as f64;
    q / (4.0 - q * q).sqrt()
}

/// `β'(0) (−1)^{j+1} (4k² − j²)^{3/2} π j / (4k³)` at `a = a^j_k`.
pub fn mixed_partial_target(j: u32, k: u32, quad_tol: f64) -> Result<f64> {
    check_label(j, k)?;
    let g = EllipsoidGeometry::build(instant_value(j, k), quad_tol)?;
    let (jf, kf) = (j as f64, k as f64);
    let sign = if j % 2 == 1 { 1.0 } else { -1.0 };
    Ok(
        g.beta_prime(0.0) * sign * (4.0 * kf * kf - jf * jf).powf(1.5) * PI * jf
            / (4.0 * kf.powi(3)),
    )
}

/// Centered difference in `a` of the numeric `∂f_k/∂s(a, 0)` across `a^j_k`.
pub fn mixed_partial(j: u32, k: u32, quad_tol: f64, cfg: &FlowConfig) -> Result<MixedPartial> {
    mixed_partial_with_steps(j, k, H_A, H_S, quad_tol, cfg)
}

pub fn mixed_partial_with_steps(
    j: u32,
    k: u32,
    h_a: f64,
    h_s: f64,
    quad_tol: f64,
    cfg: &FlowConfig,
) -> Result<MixedPartial> {
    check_label(j, k)?;
    let a_jk = instant_value(j, k);
    let gp = EllipsoidGeometry::build(a_jk + h_a, quad_tol)?;
    let gm = EllipsoidGeometry::build(a_jk - h_a, quad_tol)?;
    let dp = dfds_at_zero_with_step(&gp, k, h_s, cfg)?.numeric;
    let dm = dfds_at_zero_with_step(&gm, k, h_s, cfg)?.numeric;
    Ok(MixedPartial {
        a_jk,
        numeric: (dp - dm) / (2.0 * h_a),
        target: mixed_partial_target(j, k, quad_tol)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RootOptions {
    pub f_tol: f64,
    pub x_tol: f64,
    pub max_iter: usize,
}

impl Default for RootOptions {
    fn default() -> Self {
        Self {
            f_tol: ROOT_F_TOL,
            x_tol: ROOT_X_TOL,
            max_iter: 200,
        }
    }
}

/// Brent's method on a sign-changing bracket.
pub fn brent(
    mut f: impl FnMut(f64) -> Result<f64>,
    lo: f64,
    hi: f64,
    opts: &RootOptions,
) -> Result<(f64, f64)> {
    let (mut a, mut b) = (lo, hi);
    let (mut fa, mut fb) = (f(a)?, f(b)?);
    if fa == 0.0 {
        return Ok((a, fa));
    }
    if fb == 0.0 {
        return Ok((b, fb));
    }
    if (fa > 0.0) == (fb > 0.0) {
        return Err(Error::NoSignChange {
            lo,
            hi,
            f_lo: fa,
            f_hi: fb,
        });
    }
    let (mut c, mut fc) = (a, fa);
    let mut d = b - a;
    let mut e = d;
    for _ in 0..opts.max_iter {
        if (fb > 0.0) == (fc > 0.0) {
            c = a;
            fc = fa;
            d = b - a;
            e = d;
        }
        if fc.abs() < fb.abs() {
            a = b;
            b = c;
            c = a;
            fa = fb;
            fb = fc;
            fc = fa;
        }
        let tol = 2.0 * f64::EPSILON * b.abs() + 0.5 * opts.x_tol;
        let m = 0.5 * (c - b);
        if fb == 0.0 || (m.abs() <= tol && fb.abs() <= opts.f_tol) {
            return Ok((b, fb));
        }
        if m.abs() <= tol {
            // bracket collapsed on a point that is not a root to f_tol
            return Err(Error::NoConvergence("brent (residual above tolerance)"));
        }
        if e.abs() >= tol && fa.abs() > fb.abs() {
            let s = fb / fa;
            let (mut p, mut q);
            if a == c {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                let qa = fa / fc;
                let r = fb / fc;
                p = s * (2.0 * m * qa * (qa - r) - (b - a) * (r - 1.0));
                q = (qa - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if p > 0.0 {
                q = -q;
            } else {
                p = -p;
            }
            if 2.0 * p < (3.0 * m * q - (tol * q).abs()).min((e * q).abs()) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = m;
            }
        } else {
            d = m;
            e = m;
        }
        a = b;
        fa = fb;
        b += if d.abs() > tol { d } else { tol.copysign(m) };
        fb = f(b)?;
    }
    Err(Error::NoConvergence("brent"))
}

/// Closed geodesic from a sign-changing bracket of `f_k`.
pub fn find_root(
    g: &EllipsoidGeometry,
    k: u32,
    bracket: (f64, f64),
    cfg: &FlowConfig,
) -> Result<ShootingResult> {
    find_root_with(g, k, bracket, cfg, &RootOptions::default())
}

pub fn find_root_with(
    g: &EllipsoidGeometry,
    k: u32,
    bracket: (f64, f64),
    cfg: &FlowConfig,
    opts: &RootOptions,
) -> Result<ShootingResult> {
    let (s, _) = brent(
        |s| Ok(f_k(g, s, k, cfg)?.f_value),
        bracket.0,
        bracket.1,
        opts,
    )?;
    let mut res = f_k(g, s, k, cfg)?;
    res.converged = res.f_value.abs() <= opts.f_tol;
    Ok(res)
}

/// Every sign change of `f_k` on a uniform grid of `n` points in `[lo, hi]`,
/// refined to a root. Grid points that are exact zeros are reported as such.
pub fn scan_roots(
    g: &EllipsoidGeometry,
    k: u32,
    (lo, hi): (f64, f64),
    n: usize,
    cfg: &FlowConfig,
    opts: &RootOptions,
) -> Result<Vec<ShootingResult>> {
    let n = n.max(2);
    let grid: Vec<f64> = (0..n)
        .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
        .collect();
    let values = grid
        .iter()
        .map(|&s| Ok(f_k(g, s, k, cfg)?.f_value))
        .collect::<Result<Vec<f64>>>()?;
    let mut roots = Vec::new();
    for i in 0..n {
        if values[i] == 0.0 {
            roots.push(f_k(g, grid[i], k, cfg)?);
        } else if i + 1 < n && values[i + 1] != 0.0 && (values[i] > 0.0) != (values[i + 1] > 0.0) {
            roots.push(find_root_with(g, k, (grid[i], grid[i + 1]), cfg, opts)?);
        }
    }
    Ok(roots)
}

/// Discrete invariants of the closed geodesic `γ_{a,s}` viewed as a `k`-fold crossing curve.
pub fn classify(
    g: &EllipsoidGeometry,
    s_root: f64,
    k: u32,
    cfg: &FlowConfig,
) -> Result<GeodesicClassification> {
    let traj = flow::integrate(g, s_root, k, cfg)?;
    Ok(classify_trajectory(g, &traj, k))
}

pub fn classify_trajectory(
    g: &EllipsoidGeometry,
    traj: &Trajectory,
    k: u32,
) -> GeodesicClassification {
    let f_values: Vec<f64> = (1..=k as i64)
        .map(|m| {
            traj.state_at(traj.ell(m).expect("trajectory reaches crossing k"))
                .rho_dot
        })
        .collect();
    let f_last = *f_values.last().expect("k >= 1");
    let is_closed = f_last.abs() <= CLOSED_TOL;
    let shorter = &f_values[..f_values.len() - 1];
    let degenerate = shorter.iter().any(|f| f.abs() <= PRIMITIVE_THRESHOLD);
    let ell = traj.ell(k as i64).expect("trajectory reaches crossing k");
    let winding =
        ((traj.state_at(ell).theta - traj.state_at(-ell).theta) / (2.0 * PI)).round() as u32;
    let half = sign_changes(traj, g.rho_clifford(), ell);
    GeodesicClassification {
        is_closed,
        is_simple: is_closed && f_values[0].abs() <= CLOSED_TOL,
        is_primitive: is_closed && !degenerate,
        winding,
        clifford_intersections: 2 * half,
        self_intersections_on_diameter: shorter
            .iter()
            .filter(|f| f.abs() > PRIMITIVE_THRESHOLD)
            .count() as u32,
        degenerate,
        f_values,
    }
}

/// Sign changes of `ρ(t) − ρ_{a,0}` on `(0, ell)`; the reflected half contributes the same count.
fn sign_changes(traj: &Trajectory, rho0: f64, ell: f64) -> u32 {
    let per_segment = 16;
    let mut times = Vec::new();
    for seg in traj.segments() {
        if seg.t_old >= ell {
            break;
        }
        let t1 = seg.t_new.min(ell);
        for i in 0..per_segment {
            times.push(seg.t_old + (t1 - seg.t_old) * i as f64 / per_segment as f64);
        }
    }
    times.push(ell);
    let mut count = 0;
    let mut last: Option<bool> = None;
    for t in times {
        let d = traj.state_at(t).rho - rho0;
        if d.abs() <= DEAD_BAND {
            continue;
        }
        let sign = d > 0.0;
        if let Some(prev) = last {
            if prev != sign {
                count += 1;
            }
        }
        last = Some(sign);
    }
    count
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trivial_solution_is_a_root() {
        for &a in &[0.3, 1.0, 2.5] {
            let g = EllipsoidGeometry::new(a).unwrap();
            for k in 1..=3 {
                let r = f_k(&g, 0.0, k, &FlowConfig::default()).unwrap();
                assert!(r.f_value.abs() < 1e-12);
                assert!((r.ell_k - k as f64 * PI).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn trivial_classification() {
        let g = EllipsoidGeometry::new(0.9).unwrap();
        let c = classify(&g, 0.0, 1, &FlowConfig::default()).unwrap();
        assert!(c.is_closed && c.is_simple && c.is_primitive);
        assert_eq!(c.invariants(), (1, 0, 0));
        let c2 = classify(&g, 0.0, 2, &FlowConfig::default()).unwrap();
        assert!(c2.is_closed && !c2.is_primitive && c2.degenerate);
        assert_eq!(c2.self_intersections_on_diameter, 0);
    }

    #[test]
    fn brent_on_polynomial() {
        let (x, fx) = brent(|x| Ok(x * x * x - 2.0), 0.0, 3.0, &RootOptions::default()).unwrap();
        assert!((x - 2f64.cbrt()).abs() < 1e-12 && fx.abs() < 1e-10);
        assert!(matches!(
            brent(|x| Ok(x * x + 1.0), -1.0, 1.0, &RootOptions::default()),
            Err(Error::NoSignChange { .. })
        ));
    }

    #[test]
    fn labels() {
        assert!(mixed_partial_target(2, 4, 1e-12).is_err());
        assert!(mixed_partial_target(2, 1, 1e-12).is_err());
        assert!((instant_value(1, 1) - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        assert!(mixed_partial_target(2, 3, 1e-12).unwrap() < 0.0);
        assert!(mixed_partial_target(1, 1, 1e-12).unwrap() > 0.0);
    }

    #[test]
    fn closed_form_slope_vanishes_at_first_instant() {
        let g = EllipsoidGeometry::new(1.0 / 3f64.sqrt()).unwrap();
        assert!(dfds_closed_form(&g, 1).abs() < 1e-12);
        let g1 = EllipsoidGeometry::new(1.0).unwrap();
        for k in 1..=6 {
            assert!(dfds_closed_form(&g1, k).abs() > 1e-3);
        }
    }
}
