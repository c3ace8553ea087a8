//! Geodesic flow of `dρ² + φ(ρ)² dθ²` with crossing detection.
//!
//! The state is `(ρ, θ, ρ̇, θ̇)` with `θ` unwrapped. Along any geodesic the
//! Clairaut quantity `θ̇ φ(ρ)²` and the energy `ρ̇² + φ(ρ)² θ̇²` are conserved;
//! both are monitored while integrating.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ode::{self, Control, DenseSegment, OdeConfig, Stats};
use crate::profile::{check_shooting_parameter, EllipsoidGeometry};

/// Shooting parameters this close to ±1 start next to the metric singularity.
pub const S_LIMIT: f64 = 1.0 - 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeodesicState {
    pub t: f64,
    pub rho: f64,
    pub theta: f64,
    pub rho_dot: f64,
    pub theta_dot: f64,
}

impl GeodesicState {
    pub fn from_array(t: f64, y: [f64; 4]) -> Self {
        Self {
            t,
            rho: y[0],
            theta: y[1],
            rho_dot: y[2],
            theta_dot: y[3],
        }
    }

    pub fn to_array(&self) -> [f64; 4] {
        [self.rho, self.theta, self.rho_dot, self.theta_dot]
    }

    /// Image under the reflection across the diameter `θ ∈ {0, π}` combined with time reversal.
    pub fn reflected(&self) -> Self {
        Self {
            t: -self.t,
            rho: self.rho,
            theta: -self.theta,
            rho_dot: -self.rho_dot,
            theta_dot: self.theta_dot,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowConfig {
    pub ode: OdeConfig,
    /// Target accuracy of `|θ(t_m) − mπ|` at located crossings.
    pub event_tol: f64,
    /// Relative drift of either first integral that aborts the integration.
    pub drift_limit: f64,
}

impl Default for FlowConfig {
    fn default() -> Self {
        Self {
            ode: OdeConfig::default(),
            event_tol: 1e-12,
            drift_limit: 1e-6,
        }
    }
}

/// Time at which `θ` passes `mπ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Crossing {
    pub m: i64,
    pub t: f64,
}

/// Right-hand side of the geodesic equations:
/// `ρ̈ = φ φ' θ̇²`, `θ̈ = −2 (φ'/φ) ρ̇ θ̇`.
pub fn geodesic_rhs(g: &EllipsoidGeometry, state: &GeodesicState) -> Result<[f64; 4]> {
    rhs(g, &state.to_array())
}

fn rhs(g: &EllipsoidGeometry, y: &[f64; 4]) -> Result<[f64; 4]> {
    let [rho, _, rho_dot, theta_dot] = *y;
    if theta_dot == 0.0 {
        // radial geodesics are straight lines in (ρ, θ)
        return Ok([rho_dot, 0.0, 0.0, 0.0]);
    }
    let p = g.profile(rho)?;
    Ok([
        rho_dot,
        theta_dot,
        p.varphi * p.dvarphi * theta_dot * theta_dot,
        -2.0 * p.dvarphi / p.varphi * rho_dot * theta_dot,
    ])
}

fn varphi_clamped(g: &EllipsoidGeometry, rho: f64) -> f64 {
    g.varphi(rho.clamp(0.0, g.length())).unwrap_or(0.0)
}

/// Clairaut constant `θ̇ φ(ρ)²`.
pub fn clairaut(g: &EllipsoidGeometry, state: &GeodesicState) -> f64 {
    let v = varphi_clamped(g, state.rho);
    state.theta_dot * v * v
}

/// Kinetic energy `ρ̇² + φ(ρ)² θ̇²`.
pub fn energy(g: &EllipsoidGeometry, state: &GeodesicState) -> f64 {
    let v = varphi_clamped(g, state.rho);
    state.rho_dot * state.rho_dot + v * v * state.theta_dot * state.theta_dot
}

/// Initial data of the geodesic leaving the radial segment at `β_a(s)` orthogonally.
pub fn shooting_state(g: &EllipsoidGeometry, s: f64) -> Result<GeodesicState> {
    check_shooting_parameter(s)?;
    if s.abs() >= S_LIMIT {
        return Err(Error::OutOfDomain {
            what: "s",
            value: s,
            lo: -S_LIMIT,
            hi: S_LIMIT,
        });
    }
    Ok(GeodesicState {
        t: 0.0,
        rho: g.beta(s)?,
        theta: 0.0,
        rho_dot: 0.0,
        theta_dot: 1.0,
    })
}

/// Dense solution of one geodesic together with its diameter crossings.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub a: f64,
    /// Shooting parameter, `None` for trajectories started from arbitrary data.
    pub s: Option<f64>,
    pub initial: GeodesicState,
    segments: Vec<DenseSegment<4>>,
    forward: bool,
    pub crossings: Vec<Crossing>,
    pub clairaut0: f64,
    pub energy0: f64,
    pub max_clairaut_drift: f64,
    pub max_energy_drift: f64,
    pub stats: Stats,
}

impl Trajectory {
    pub fn segments(&self) -> &[DenseSegment<4>] {
        &self.segments
    }

    /// Final time reached by the integration.
    pub fn t_end(&self) -> f64 {
        self.segments.last().map_or(self.initial.t, |s| s.t_new)
    }

    /// Time of the `m`-th crossing `θ = mπ`.
    pub fn ell(&self, m: i64) -> Option<f64> {
        self.crossings.iter().find(|c| c.m == m).map(|c| c.t)
    }

    /// Dense evaluation on the integrated range. For shooting trajectories,
    /// negative times are answered through the reflection symmetry
    /// `γ(−t) = τ₀ γ(t)`.
    pub fn state_at(&self, t: f64) -> GeodesicState {
        if self.s.is_some() && self.forward && t < self.initial.t {
            return self.state_at(2.0 * self.initial.t - t).reflected();
        }
        let seg = self.segment_for(t);
        GeodesicState::from_array(t, seg.eval(t))
    }

    fn segment_for(&self, t: f64) -> &DenseSegment<4> {
        let idx = if self.forward {
            self.segments.partition_point(|s| s.t_new < t)
        } else {
            self.segments.partition_point(|s| s.t_new > t)
        };
        &self.segments[idx.min(self.segments.len() - 1)]
    }

    pub fn sample(&self, t0: f64, t1: f64, n: usize) -> Vec<GeodesicState> {
        let n = n.max(1);
        (0..=n)
            .map(|i| self.state_at(t0 + (t1 - t0) * i as f64 / n as f64))
            .collect()
    }
}

/// Integrates the geodesic `γ_{a,s}` until the `k_target`-th crossing of the diameter.
pub fn integrate(
    g: &EllipsoidGeometry,
    s: f64,
    k_target: u32,
    cfg: &FlowConfig,
) -> Result<Trajectory> {
    if k_target == 0 {
        return Err(Error::InvalidParameter {
            name: "k",
            value: 0.0,
            reason: "must be a positive integer",
        });
    }
    let initial = shooting_state(g, s)?;
    let target = k_target as i64;
    let mut traj = run(g, initial, 1.0, cfg, |crossings, _| {
        crossings.iter().any(|c| c.m >= target)
    })?;
    traj.s = Some(s);
    Ok(traj)
}

/// Integrates arbitrary initial data until `t_end` (either sign).
pub fn integrate_span(
    g: &EllipsoidGeometry,
    initial: GeodesicState,
    t_end: f64,
    cfg: &FlowConfig,
) -> Result<Trajectory> {
    let direction = if t_end >= initial.t { 1.0 } else { -1.0 };
    run(g, initial, direction, cfg, |_, seg| seg.contains(t_end))
}

/// Time of the `k`-th crossing for `γ_{a,s}`.
pub fn ell_k(g: &EllipsoidGeometry, s: f64, k: u32, cfg: &FlowConfig) -> Result<f64> {
    let traj = integrate(g, s, k, cfg)?;
    Ok(traj
        .ell(k as i64)
        .expect("integration stops at the target crossing"))
}

fn run(
    g: &EllipsoidGeometry,
    initial: GeodesicState,
    direction: f64,
    cfg: &FlowConfig,
    mut done: impl FnMut(&[Crossing], &DenseSegment<4>) -> bool,
) -> Result<Trajectory> {
    let clairaut0 = clairaut(g, &initial);
    let energy0 = energy(g, &initial);
    let mut segments = Vec::new();
    let mut crossings = Vec::new();
    let mut max_c: f64 = 0.0;
    let mut max_e: f64 = 0.0;
    let c_scale = clairaut0.abs().max(f64::MIN_POSITIVE);
    let e_scale = energy0.abs().max(f64::MIN_POSITIVE);

    let stats = ode::integrate(
        |_t, y| rhs(g, y),
        initial.t,
        initial.to_array(),
        direction,
        &cfg.ode,
        |seg| {
            let end = GeodesicState::from_array(seg.t_new, seg.eval(seg.t_new));
            let dc = (clairaut(g, &end) - clairaut0).abs() / c_scale;
            let de = (energy(g, &end) - energy0).abs() / e_scale;
            max_c = max_c.max(dc);
            max_e = max_e.max(de);
            if dc > cfg.drift_limit {
                return Err(Error::ConservationDrift {
                    quantity: "clairaut",
                    drift: dc,
                    limit: cfg.drift_limit,
                    t: seg.t_new,
                });
            }
            if de > cfg.drift_limit {
                return Err(Error::ConservationDrift {
                    quantity: "energy",
                    drift: de,
                    limit: cfg.drift_limit,
                    t: seg.t_new,
                });
            }
            locate_crossings(seg, cfg.event_tol, &mut crossings);
            segments.push(seg.clone());
            Ok(if done(&crossings, seg) {
                Control::Stop
            } else {
                Control::Continue
            })
        },
    )?;

    Ok(Trajectory {
        a: g.a(),
        s: None,
        initial,
        segments,
        forward: direction > 0.0,
        crossings,
        clairaut0,
        energy0,
        max_clairaut_drift: max_c,
        max_energy_drift: max_e,
        stats,
    })
}

/// Appends every `θ = mπ` crossing inside the step, `m ≠ 0`.
fn locate_crossings(seg: &DenseSegment<4>, tol: f64, out: &mut Vec<Crossing>) {
    let th0 = seg.y_old()[1];
    let th1 = seg.eval(seg.t_new)[1];
    if th0 == th1 {
        return;
    }
    let (lo, hi) = if th0 < th1 { (th0, th1) } else { (th1, th0) };
    // multiples of π in (lo, hi], excluding the start point
    let first = (lo / PI).floor() as i64 + 1;
    let last = (hi / PI).floor() as i64;
    let ms: Vec<i64> = if th1 > th0 {
        (first..=last).collect()
    } else {
        let first = (lo / PI).ceil() as i64;
        let last = (hi / PI).ceil() as i64 - 1;
        (first..=last).rev().collect()
    };
    for m in ms {
        if m == 0 {
            continue;
        }
        if out.iter().any(|c| c.m == m) {
            continue;
        }
        out.push(Crossing {
            m,
            t: refine_crossing(seg, m as f64 * PI, tol),
        });
    }
}

fn refine_crossing(seg: &DenseSegment<4>, target: f64, tol: f64) -> f64 {
    let g = |t: f64| seg.eval(t)[1] - target;
    let (mut a, mut b) = (seg.t_old, seg.t_new);
    let (mut ga, gb) = (g(a), g(b));
    if gb == 0.0 {
        return b;
    }
    let mut t = a + (b - a) * ga / (ga - gb);
    for _ in 0..100 {
        let y = seg.eval(t);
        let gt = y[1] - target;
        if gt.abs() <= tol * 1e-2 {
            return t;
        }
        if (gt > 0.0) == (ga > 0.0) {
            a = t;
            ga = gt;
        } else {
            b = t;
        }
        let newton = t - gt / y[3];
        let inside = (newton - a) * (newton - b) < 0.0;
        let next = if inside { newton } else { 0.5 * (a + b) };
        if next == t || (b - a).abs() <= 4.0 * f64::EPSILON * t.abs() {
            return next;
        }
        t = next;
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clifford_data_is_an_equilibrium_of_the_radial_equation() {
        for &a in &[0.4, 1.0, 3.0] {
            let g = EllipsoidGeometry::new(a).unwrap();
            let st = GeodesicState {
                t: 0.0,
                rho: g.rho_clifford(),
                theta: 0.0,
                rho_dot: 0.0,
                theta_dot: 1.0,
            };
            let d = geodesic_rhs(&g, &st).unwrap();
            assert!(d[2].abs() < 1e-10 && d[3].abs() < 1e-14);
            assert!((clairaut(&g, &st) - (PI * a).powi(2)).abs() < 1e-9);
            assert!((energy(&g, &st) - (PI * a).powi(2)).abs() < 1e-9);
        }
    }

    #[test]
    fn radial_data() {
        let g = EllipsoidGeometry::new(0.8).unwrap();
        let st = GeodesicState {
            t: 0.0,
            rho: 1.3,
            theta: 0.2,
            rho_dot: 1.0,
            theta_dot: 0.0,
        };
        let d = geodesic_rhs(&g, &st).unwrap();
        assert_eq!(&d[2..], &[0.0, 0.0]);
        assert_eq!(clairaut(&g, &st), 0.0);
        assert_eq!(energy(&g, &st), 1.0);
    }

    #[test]
    fn clifford_geodesic_crosses_at_multiples_of_pi() {
        let g = EllipsoidGeometry::new(0.7).unwrap();
        let traj = integrate(&g, 0.0, 4, &FlowConfig::default()).unwrap();
        for m in 1..=4 {
            assert!((traj.ell(m).unwrap() - m as f64 * PI).abs() < 1e-10);
        }
        let st = traj.state_at(2.5);
        assert!((st.rho - g.rho_clifford()).abs() < 1e-12);
        assert!((st.theta - 2.5).abs() < 1e-12);
    }

    #[test]
    fn rejects_boundary_shooting_parameters() {
        let g = EllipsoidGeometry::new(0.7).unwrap();
        let cfg = FlowConfig::default();
        assert!(integrate(&g, 1.0, 1, &cfg).is_err());
        assert!(integrate(&g, -1.5, 1, &cfg).is_err());
        assert!(integrate(&g, 1.0 - 1e-10, 1, &cfg).is_err());
        assert!(integrate(&g, 0.2, 0, &cfg).is_err());
    }

    #[test]
    fn crossings_are_increasing() {
        let g = EllipsoidGeometry::new(0.45).unwrap();
        let traj = integrate(&g, 0.35, 6, &FlowConfig::default()).unwrap();
        let ts: Vec<f64> = traj.crossings.iter().map(|c| c.t).collect();
        assert_eq!(traj.crossings.len(), 6);
        assert!(ts.windows(2).all(|w| w[0] < w[1]));
        for c in &traj.crossings {
            let th = traj.state_at(c.t).theta;
            assert!((th - c.m as f64 * PI).abs() <= 1e-12, "m = {}", c.m);
        }
    }
}
