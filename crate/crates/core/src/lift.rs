//! Lifting closed geodesics of the orbit disk to S¹-invariant tori in the
//! ellipsoid `|z|²/a² + |w|² = 1 ⊂ ℂ² ≅ ℝ⁴`.
//!
//! A point `(ρ, θ)` of the disk is the orbit of `(z, w)` with
//! `z = a sin ϕ(ρ) e^{iθ}` and `|w| = cos ϕ(ρ)`; the torus sweeps `w` around
//! that circle.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::Trajectory;
use crate::profile::EllipsoidGeometry;
use crate::quadrature::GaussRule;
use crate::shooting::CLOSED_TOL;

pub const DEFAULT_NT_PER_WINDING: usize = 512;
pub const DEFAULT_NPSI: usize = 128;
const INTERSECTION_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeshLabel {
    pub j: Option<u32>,
    pub k: u32,
    pub a: f64,
    pub s: f64,
}

/// Quad mesh on the `(t, ψ)` torus, periodic in both directions.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TorusMesh {
    pub label: MeshLabel,
    pub n_t: usize,
    pub n_psi: usize,
    /// Row-major: vertex `(i, j)` is at `i * n_psi + j`.
    pub vertices: Vec<[f64; 4]>,
    /// `|z|²/a² + |w|² − 1` per vertex.
    pub residuals: Vec<f64>,
    pub times: Vec<f64>,
    /// Largest distance between the rings at `t = −ℓ_k` and `t = ℓ_k`.
    pub closure_gap: f64,
}

impl TorusMesh {
    pub fn vertex(&self, i: usize, j: usize) -> [f64; 4] {
        self.vertices[(i % self.n_t) * self.n_psi + (j % self.n_psi)]
    }

    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().fold(0.0, |m, r| m.max(r.abs()))
    }

    /// Sum of the areas of the two triangles of each quad.
    pub fn area(&self) -> f64 {
        let mut total = 0.0;
        for i in 0..self.n_t {
            for j in 0..self.n_psi {
                let p00 = self.vertex(i, j);
                let p10 = self.vertex(i + 1, j);
                let p01 = self.vertex(i, j + 1);
                let p11 = self.vertex(i + 1, j + 1);
                total += triangle_area(&p00, &p10, &p11) + triangle_area(&p00, &p11, &p01);
            }
        }
        total
    }

    /// Quad faces as vertex indices, counter-clockwise in `(t, ψ)`.
    pub fn quads(&self) -> impl Iterator<Item = [usize; 4]> + '_ {
        let (nt, np) = (self.n_t, self.n_psi);
        (0..nt).flat_map(move |i| {
            (0..np).map(move |j| {
                let idx = |a: usize, b: usize| (a % nt) * np + (b % np);
                [idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1)]
            })
        })
    }
}

fn triangle_area(a: &[f64; 4], b: &[f64; 4], c: &[f64; 4]) -> f64 {
    let u: Vec<f64> = (0..4).map(|i| b[i] - a[i]).collect();
    let v: Vec<f64> = (0..4).map(|i| c[i] - a[i]).collect();
    let uu: f64 = u.iter().map(|x| x * x).sum();
    let vv: f64 = v.iter().map(|x| x * x).sum();
    let uv: f64 = u.iter().zip(&v).map(|(x, y)| x * y).sum();
    0.5 * (uu * vv - uv * uv).max(0.0).sqrt()
}

/// Point of the ellipsoid over `(ρ, θ)` at fiber angle `ψ`.
pub fn embed(g: &EllipsoidGeometry, rho: f64, theta: f64, psi: f64) -> Result<[f64; 4]> {
    let phi = g.phi_of_rho(rho)?;
    let (sp, cp) = phi.sin_cos();
    let r = g.a() * sp;
    Ok([
        r * theta.cos(),
        r * theta.sin(),
        cp * psi.cos(),
        cp * psi.sin(),
    ])
}

/// Recovers `(ρ, θ)` from a point of the ellipsoid by forgetting the fiber angle.
pub fn project(g: &EllipsoidGeometry, p: &[f64; 4]) -> Result<(f64, f64)> {
    let zr = (p[0] * p[0] + p[1] * p[1]).sqrt() / g.a();
    let wr = (p[2] * p[2] + p[3] * p[3]).sqrt();
    let phi = zr.atan2(wr);
    Ok((g.rho_of_phi(phi), p[1].atan2(p[0])))
}

fn closing_time(traj: &Trajectory, k: u32) -> Result<f64> {
    let ell = traj.ell(k as i64).ok_or(Error::InvalidParameter {
        name: "k",
        value: k as f64,
        reason: "trajectory does not reach this crossing",
    })?;
    let f = traj.state_at(ell).rho_dot;
    if f.abs() > CLOSED_TOL || traj.s.is_none() {
        return Err(Error::NotClosed(f));
    }
    Ok(ell)
}

/// Samples the torus over the closed geodesic `traj` (`k` windings), uniformly in `t` and `ψ`.
pub fn lift(
    g: &EllipsoidGeometry,
    traj: &Trajectory,
    k: u32,
    n_t_per_winding: usize,
    n_psi: usize,
    j: Option<u32>,
) -> Result<TorusMesh> {
    let ell = closing_time(traj, k)?;
    let n_t = n_t_per_winding.max(3) * k as usize;
    let n_psi = n_psi.max(3);
    let a = g.a();
    let mut vertices = Vec::with_capacity(n_t * n_psi);
    let mut residuals = Vec::with_capacity(n_t * n_psi);
    let mut times = Vec::with_capacity(n_t);
    let psis: Vec<f64> = (0..n_psi)
        .map(|j| std::f64::consts::TAU * j as f64 / n_psi as f64)
        .collect();
    let ring = |t: f64| -> Result<Vec<[f64; 4]>> {
        let st = traj.state_at(t);
        psis.iter()
            .map(|&psi| embed(g, st.rho, st.theta, psi))
            .collect()
    };
    for i in 0..n_t {
        let t = -ell + 2.0 * ell * i as f64 / n_t as f64;
        times.push(t);
        for p in ring(t)? {
            let r = (p[0] * p[0] + p[1] * p[1]) / (a * a) + p[2] * p[2] + p[3] * p[3] - 1.0;
            vertices.push(p);
            residuals.push(r);
        }
    }
    let closure_gap = ring(-ell)?
        .iter()
        .zip(ring(ell)?)
        .map(|(p, q)| (0..4).map(|i| (p[i] - q[i]).powi(2)).sum::<f64>().sqrt())
        .fold(0.0, f64::max);
    Ok(TorusMesh {
        label: MeshLabel {
            j,
            k,
            a,
            s: traj.s.unwrap_or(0.0),
        },
        n_t,
        n_psi,
        vertices,
        residuals,
        times,
        closure_gap,
    })
}

/// Length of the closed geodesic over `[−ℓ_k, ℓ_k]` in the orbit-disk metric,
/// which is the area of the lifted torus.
pub fn torus_area(g: &EllipsoidGeometry, traj: &Trajectory, k: u32) -> Result<f64> {
    let ell = closing_time(traj, k)?;
    let rule = GaussRule::new(8);
    let speed = |t: f64| {
        let st = traj.state_at(t);
        let v = g.varphi(st.rho.clamp(0.0, g.length())).unwrap_or(0.0);
        (st.rho_dot * st.rho_dot + v * v * st.theta_dot * st.theta_dot).sqrt()
    };
    let mut half = 0.0;
    for seg in traj.segments() {
        if seg.t_old >= ell {
            break;
        }
        half += rule.integrate(&speed, seg.t_old, seg.t_new.min(ell));
    }
    Ok(2.0 * half)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingReport {
    pub embedded: bool,
    /// Self-intersection points of the planar curve `(ρ cos θ, ρ sin θ)`,
    /// refined on the dense trajectory.
    pub crossing_points: Vec<[f64; 2]>,
    /// The two parameter values in `[−ℓ_k, ℓ_k)` meeting at each crossing.
    pub crossing_times: Vec<[f64; 2]>,
}

fn planar(traj: &Trajectory, t: f64) -> ([f64; 2], [f64; 2]) {
    let st = traj.state_at(t);
    let (sn, cs) = st.theta.sin_cos();
    let p = [st.rho * cs, st.rho * sn];
    let v = [
        st.rho_dot * cs - st.rho * st.theta_dot * sn,
        st.rho_dot * sn + st.rho * st.theta_dot * cs,
    ];
    (p, v)
}

/// Newton on `γ(t₁) = γ(t₂)` from a polyline crossing.
fn refine_crossing(traj: &Trajectory, mut t1: f64, mut t2: f64) -> ([f64; 2], [f64; 2]) {
    for _ in 0..20 {
        let (p1, v1) = planar(traj, t1);
        let (p2, v2) = planar(traj, t2);
        let r = [p1[0] - p2[0], p1[1] - p2[1]];
        let det = -v1[0] * v2[1] + v1[1] * v2[0];
        if det.abs() < 1e-300 {
            break;
        }
        let d1 = (-r[0] * v2[1] + r[1] * v2[0]) / det;
        let d2 = (v1[0] * r[1] - v1[1] * r[0]) / det;
        t1 -= d1;
        t2 -= d2;
        if d1.abs().max(d2.abs()) < 1e-15 * (1.0 + t1.abs().max(t2.abs())) {
            break;
        }
    }
    (planar(traj, t1).0, [t1, t2])
}

/// Self-intersections of the closed geodesic drawn in the plane, by a sweep
/// over polyline segments sorted by their left end.
pub fn embedding_check(
    traj: &Trajectory,
    k: u32,
    samples_per_winding: usize,
) -> Result<EmbeddingReport> {
    let ell = closing_time(traj, k)?;
    let n = samples_per_winding.max(16) * k as usize * 2;
    let dt = 2.0 * ell / n as f64;
    let pts: Vec<[f64; 2]> = (0..n)
        .map(|i| planar(traj, -ell + dt * i as f64).0)
        .collect();
    let mut crossing_points: Vec<[f64; 2]> = Vec::new();
    let mut crossing_times = Vec::new();
    for c in polygon_crossings(&pts) {
        let t1 = -ell + dt * (c.i as f64 + c.u);
        let t2 = -ell + dt * (c.j as f64 + c.v);
        let (x, times) = refine_crossing(traj, t1, t2);
        let wrap = |t: f64| -ell + (t + ell).rem_euclid(2.0 * ell);
        if !crossing_points
            .iter()
            .any(|f| (f[0] - x[0]).hypot(f[1] - x[1]) < 1e-6)
        {
            crossing_points.push(x);
            crossing_times.push([wrap(times[0]), wrap(times[1])]);
        }
    }
    Ok(EmbeddingReport {
        embedded: crossing_points.is_empty(),
        crossing_points,
        crossing_times,
    })
}

struct PolygonCrossing {
    i: usize,
    j: usize,
    u: f64,
    v: f64,
    x: [f64; 2],
}

/// Crossings of a closed polygon with itself, merged within `1e-6`.
pub fn polygon_self_intersections(pts: &[[f64; 2]]) -> Vec<[f64; 2]> {
    let mut found: Vec<[f64; 2]> = Vec::new();
    for c in polygon_crossings(pts) {
        if !found
            .iter()
            .any(|f| (f[0] - c.x[0]).hypot(f[1] - c.x[1]) < 1e-6)
        {
            found.push(c.x);
        }
    }
    found
}

fn polygon_crossings(pts: &[[f64; 2]]) -> Vec<PolygonCrossing> {
    let n = pts.len();
    let seg = |i: usize| (pts[i], pts[(i + 1) % n]);
    let mut order: Vec<usize> = (0..n).collect();
    let xmin = |i: usize| seg(i).0[0].min(seg(i).1[0]);
    let xmax = |i: usize| seg(i).0[0].max(seg(i).1[0]);
    order.sort_by(|&i, &j| xmin(i).total_cmp(&xmin(j)));

    let mut active: Vec<usize> = Vec::new();
    let mut found = Vec::new();
    for &i in &order {
        let x0 = xmin(i);
        active.retain(|&j| xmax(j) >= x0 - INTERSECTION_SLACK);
        for &j in &active {
            let adjacent = (i + 1) % n == j || (j + 1) % n == i;
            if adjacent {
                continue;
            }
            let (p1, p2) = seg(i);
            let (q1, q2) = seg(j);
            if let Some((u, v)) = segment_intersection(p1, p2, q1, q2) {
                let x = [p1[0] + u * (p2[0] - p1[0]), p1[1] + u * (p2[1] - p1[1])];
                found.push(PolygonCrossing { i, j, u, v, x });
            }
        }
        active.push(i);
    }
    found
}

fn segment_intersection(
    p1: [f64; 2],
    p2: [f64; 2],
    q1: [f64; 2],
    q2: [f64; 2],
) -> Option<(f64, f64)> {
    let r = [p2[0] - p1[0], p2[1] - p1[1]];
    let s = [q2[0] - q1[0], q2[1] - q1[1]];
    let denom = r[0] * s[1] - r[1] * s[0];
    if denom.abs()
        <= INTERSECTION_SLACK * (r[0].hypot(r[1]) * s[0].hypot(s[1])).max(f64::MIN_POSITIVE)
    {
        return None;
    }
    let qp = [q1[0] - p1[0], q1[1] - p1[1]];
    let t = (qp[0] * s[1] - qp[1] * s[0]) / denom;
    let u = (qp[0] * r[1] - qp[1] * r[0]) / denom;
    let lo = -INTERSECTION_SLACK;
    let hi = 1.0 + INTERSECTION_SLACK;
    if t >= lo && t <= hi && u >= lo && u <= hi {
        Some((t, u))
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_and_figure_eight() {
        let square = [[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]];
        assert!(polygon_self_intersections(&square).is_empty());
        let bowtie = [[0.0, 0.0], [1.0, 1.0], [1.0, 0.0], [0.0, 1.0]];
        let x = polygon_self_intersections(&bowtie);
        assert_eq!(x.len(), 1);
        assert!((x[0][0] - 0.5).abs() < 1e-15 && (x[0][1] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn triangle_area_in_r4() {
        let a = [0.0, 0.0, 0.0, 0.0];
        let b = [0.0, 0.0, 2.0, 0.0];
        let c = [0.0, 0.0, 0.0, 3.0];
        assert!((triangle_area(&a, &b, &c) - 3.0).abs() < 1e-15);
    }

    #[test]
    fn embed_and_project_round_trip() {
        let g = EllipsoidGeometry::new(1.7).unwrap();
        let p = embed(&g, 2.3, 0.4, 1.1).unwrap();
        let (rho, theta) = project(&g, &p).unwrap();
        assert!((rho - 2.3).abs() < 1e-12 && (theta - 0.4).abs() < 1e-14);
    }
}
