//! Reduced geometry of the ellipsoid orbit disk.
//!
//! The orbit space of `|z|²/a² + |w|² = 1` under rotation of `w` carries the
//! rotationally symmetric metric `dρ² + φ(ρ)² dθ²`. Here `ρ` is arclength along
//! a radial geodesic, parametrized by the latitude angle `ϕ ∈ [0, π/2]` through
//!
//! ```text
//! ρ(ϕ) = 2π ∫₀^ϕ cos ξ √(a² cos² ξ + sin² ξ) dξ,     φ(ρ) = π a sin(2 ϕ(ρ)).
//! ```
//!
//! The map `ϕ ↦ ρ` is tabulated once on Chebyshev-spaced nodes and evaluated
//! with quintic Hermite interpolation, using the exact first and second
//! derivatives of the integrand at the nodes.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use crate::error::{check_positive, Error, Result};
use crate::quadrature::GaussRule;

pub const DEFAULT_QUAD_TOL: f64 = 1e-12;
pub const TABLE_INTERVALS: usize = 2048;
/// Relative width of the band below `L_a` where `φ'` is not evaluated.
pub const GUARD_BAND: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct EllipsoidGeometry {
    a: f64,
    length: f64,
    rho_clifford: f64,
    quad_tol: f64,
    phi_nodes: Vec<f64>,
    rho_nodes: Vec<f64>,
}

/// Profile quantities at one radius.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProfilePoint {
    pub phi: f64,
    pub varphi: f64,
    pub dvarphi: f64,
    pub ddvarphi: f64,
}

impl EllipsoidGeometry {
    pub fn new(a: f64) -> Result<Self> {
        Self::build(a, DEFAULT_QUAD_TOL)
    }

    pub fn build(a: f64, quad_tol: f64) -> Result<Self> {
        check_positive("a", a)?;
        check_positive("quad_tol", quad_tol)?;

        let n = TABLE_INTERVALS;
        let phi_nodes: Vec<f64> = (0..=n)
            .map(|i| {
                if i == n {
                    FRAC_PI_2
                } else {
                    FRAC_PI_4 * (1.0 - (PI * i as f64 / n as f64).cos())
                }
            })
            .collect();

        let rule = GaussRule::new(8);
        let integrand = |xi: f64| drho_dphi(a, xi);
        let panel_tol = quad_tol / n as f64;
        let mut rho_nodes = Vec::with_capacity(n + 1);
        let mut acc = 0.0;
        rho_nodes.push(0.0);
        for w in phi_nodes.windows(2) {
            acc += rule.adaptive(&integrand, w[0], w[1], panel_tol);
            rho_nodes.push(acc);
        }

        let mut geometry = Self {
            a,
            length: acc,
            rho_clifford: 0.0,
            quad_tol,
            phi_nodes,
            rho_nodes,
        };
        geometry.rho_clifford = geometry.rho_of_phi(FRAC_PI_4);
        Ok(geometry)
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    /// Length `L_a` of a radial geodesic from the center to the boundary.
    pub fn length(&self) -> f64 {
        self.length
    }

    /// Radius `ρ_{a,0}` of the Clifford geodesic, where `ϕ = π/4`.
    pub fn rho_clifford(&self) -> f64 {
        self.rho_clifford
    }

    pub fn quad_tol(&self) -> f64 {
        self.quad_tol
    }

    /// Upper radius where the guard band begins.
    pub fn guard_limit(&self) -> f64 {
        self.length * (1.0 - GUARD_BAND)
    }

    /// Arclength `ρ(ϕ)` from the table.
    pub fn rho_of_phi(&self, phi: f64) -> f64 {
        let phi = phi.clamp(0.0, FRAC_PI_2);
        let i = self.phi_interval(phi);
        self.hermite(i, phi)
    }

    /// Inverse of the arclength map.
    pub fn phi_of_rho(&self, rho: f64) -> Result<f64> {
        let slack = 10.0 * self.quad_tol.max(f64::EPSILON * self.length);
        if !(rho >= -slack && rho <= self.length + slack) {
            return Err(Error::OutOfDomain {
                what: "rho",
                value: rho,
                lo: 0.0,
                hi: self.length,
            });
        }
        Ok(self.invert(rho.clamp(0.0, self.length)))
    }

    /// `φ(ρ) = π a sin(2ϕ(ρ))`.
    pub fn varphi(&self, rho: f64) -> Result<f64> {
        let phi = self.phi_of_rho(rho)?;
        Ok(PI * self.a * (2.0 * phi).sin())
    }

    /// First and second `ρ`-derivatives of the profile.
    pub fn varphi_derivs(&self, rho: f64) -> Result<(f64, f64)> {
        let p = self.profile(rho)?;
        Ok((p.dvarphi, p.ddvarphi))
    }

    /// All profile data at `rho`, refusing radii inside the guard band.
    pub fn profile(&self, rho: f64) -> Result<ProfilePoint> {
        let limit = self.guard_limit();
        if rho > limit {
            return Err(Error::SingularBoundary { rho, limit });
        }
        let phi = self.phi_of_rho(rho)?;
        Ok(self.profile_at_phi(phi))
    }

    pub(crate) fn profile_at_phi(&self, phi: f64) -> ProfilePoint {
        let a = self.a;
        let (s2, c2) = (2.0 * phi).sin_cos();
        let rp = drho_dphi(a, phi);
        let rpp = d2rho_dphi2(a, phi);
        let phi_r = 1.0 / rp;
        let phi_rr = -rpp * phi_r * phi_r * phi_r;
        ProfilePoint {
            phi,
            varphi: PI * a * s2,
            dvarphi: 2.0 * PI * a * c2 * phi_r,
            ddvarphi: 2.0 * PI * a * (-2.0 * s2 * phi_r * phi_r + c2 * phi_rr),
        }
    }

    /// Shooting parametrization `β_a(s) = ρ((1+s)π/4)` of the radial segment at `θ = 0`.
    pub fn beta(&self, s: f64) -> Result<f64> {
        check_shooting_parameter(s)?;
        Ok(self.rho_of_phi((1.0 + s) * FRAC_PI_4))
    }

    /// `β_a'(s) = ρ'((1+s)π/4) · π/4`.
    pub fn beta_prime(&self, s: f64) -> f64 {
        drho_dphi(self.a, (1.0 + s) * FRAC_PI_4) * FRAC_PI_4
    }

    /// Shooting parameter of the radial point at `rho`.
    pub fn beta_inverse(&self, rho: f64) -> Result<f64> {
        let phi = self.phi_of_rho(rho)?;
        Ok(phi / FRAC_PI_4 - 1.0)
    }

    fn phi_interval(&self, phi: f64) -> usize {
        let n = TABLE_INTERVALS;
        let guess = ((1.0 - phi / FRAC_PI_4).clamp(-1.0, 1.0).acos() * n as f64 / PI) as usize;
        let mut i = guess.min(n - 1);
        while i > 0 && self.phi_nodes[i] > phi {
            i -= 1;
        }
        while i + 1 < n && self.phi_nodes[i + 1] < phi {
            i += 1;
        }
        i
    }

    fn hermite(&self, i: usize, phi: f64) -> f64 {
        let (x0, x1) = (self.phi_nodes[i], self.phi_nodes[i + 1]);
        let h = x1 - x0;
        let t = (phi - x0) / h;
        let (t2, t3) = (t * t, t * t * t);
        let (t4, t5) = (t3 * t, t3 * t2);
        let h0 = 1.0 - 10.0 * t3 + 15.0 * t4 - 6.0 * t5;
        let h1 = t - 6.0 * t3 + 8.0 * t4 - 3.0 * t5;
        let h2 = 0.5 * (t2 - 3.0 * t3 + 3.0 * t4 - t5);
        let h3 = 10.0 * t3 - 15.0 * t4 + 6.0 * t5;
        let h4 = -4.0 * t3 + 7.0 * t4 - 3.0 * t5;
        let h5 = 0.5 * (t3 - 2.0 * t4 + t5);
        let a = self.a;
        self.rho_nodes[i] * h0
            + h * drho_dphi(a, x0) * h1
            + h * h * d2rho_dphi2(a, x0) * h2
            + self.rho_nodes[i + 1] * h3
            + h * drho_dphi(a, x1) * h4
            + h * h * d2rho_dphi2(a, x1) * h5
    }

    fn invert(&self, rho: f64) -> f64 {
        if rho <= 0.0 {
            return 0.0;
        }
        if rho >= self.length {
            return FRAC_PI_2;
        }
        let i = self
            .rho_nodes
            .partition_point(|&r| r <= rho)
            .saturating_sub(1)
            .min(TABLE_INTERVALS - 1);
        let (mut lo, mut hi) = (self.phi_nodes[i], self.phi_nodes[i + 1]);
        let (r0, r1) = (self.rho_nodes[i], self.rho_nodes[i + 1]);
        // linear start inside the bracket
        let mut phi = lo + (hi - lo) * (rho - r0) / (r1 - r0);
        for _ in 0..60 {
            let g = self.hermite(i, phi) - rho;
            if g == 0.0 {
                return phi;
            }
            if g > 0.0 {
                hi = phi;
            } else {
                lo = phi;
            }
            let d = drho_dphi(self.a, phi);
            let newton = phi - g / d;
            let next = if d > 0.0 && newton > lo && newton < hi {
                newton
            } else {
                0.5 * (lo + hi)
            };
            if (next - phi).abs() <= 2.0 * f64::EPSILON * next.abs().max(1e-300) {
                return next;
            }
            phi = next;
            if hi - lo <= 2.0 * f64::EPSILON * hi {
                break;
            }
        }
        phi
    }
}

/// Integrand of the arclength map, `2π cos ϕ √(a² cos² ϕ + sin² ϕ)`.
pub fn drho_dphi(a: f64, phi: f64) -> f64 {
    let (s, c) = phi.sin_cos();
    2.0 * PI * c * (a * a * c * c + s * s).sqrt()
}

pub fn d2rho_dphi2(a: f64, phi: f64) -> f64 {
    let (s, c) = phi.sin_cos();
    let w = (a * a * c * c + s * s).sqrt();
    let dw = s * c * (1.0 - a * a) / w;
    2.0 * PI * (-s * w + c * dw)
}

pub(crate) fn check_shooting_parameter(s: f64) -> Result<()> {
    if s.is_finite() && s.abs() < 1.0 {
        Ok(())
    } else {
        Err(Error::OutOfDomain {
            what: "s",
            value: s,
            lo: -1.0,
            hi: 1.0,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_parameters() {
        assert!(EllipsoidGeometry::build(0.0, 1e-12).is_err());
        assert!(EllipsoidGeometry::build(-1.0, 1e-12).is_err());
        assert!(EllipsoidGeometry::build(1.0, 0.0).is_err());
        assert!(EllipsoidGeometry::build(f64::NAN, 1e-12).is_err());
    }

    #[test]
    fn round_sphere_closed_forms() {
        let g = EllipsoidGeometry::new(1.0).unwrap();
        assert!((g.length() - 2.0 * PI).abs() < 1e-12);
        assert!((g.rho_clifford() - PI * 2f64.sqrt()).abs() < 1e-12);
        assert!((g.phi_of_rho(PI * 2f64.sqrt()).unwrap() - FRAC_PI_4).abs() < 1e-12);
        assert_eq!(g.phi_of_rho(0.0).unwrap(), 0.0);
        assert!((g.phi_of_rho(2.0 * PI).unwrap() - FRAC_PI_2).abs() < 1e-12);
        for &rho in &[0.3, 1.0, 2.5, 4.0, 6.0] {
            let want = rho * (1.0 - rho * rho / (4.0 * PI * PI)).sqrt();
            assert!((g.varphi(rho).unwrap() - want).abs() < 1e-11, "rho = {rho}");
        }
    }

    #[test]
    fn out_of_domain_radius() {
        let g = EllipsoidGeometry::new(0.7).unwrap();
        assert!(g.phi_of_rho(-0.1).is_err());
        assert!(g.phi_of_rho(g.length() + 0.1).is_err());
        assert!(matches!(
            g.varphi_derivs(g.length()),
            Err(Error::SingularBoundary { .. })
        ));
    }

    #[test]
    fn clifford_values() {
        for &a in &[0.3, 0.5, 1.0, 2.0, 5.0] {
            let g = EllipsoidGeometry::new(a).unwrap();
            let rho0 = g.rho_clifford();
            assert!(rho0 > 0.0 && rho0 < g.length());
            assert!((g.varphi(rho0).unwrap() - PI * a).abs() < 1e-10);
            let (d1, d2) = g.varphi_derivs(rho0).unwrap();
            assert!(d1.abs() < 1e-10, "a = {a}: varphi' = {d1}");
            assert!((d2 + 4.0 * a / (PI * (a * a + 1.0))).abs() < 1e-10);
            let (d1, _) = g.varphi_derivs(0.0).unwrap();
            assert!((d1 - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn beta_endpoints() {
        let g = EllipsoidGeometry::new(2.0).unwrap();
        assert_eq!(g.beta(0.0).unwrap(), g.rho_clifford());
        assert!(g.beta(1.0).is_err());
        assert!(g.beta(-1.0).is_err());
        assert!(g.beta(-0.999999).unwrap() < 1e-4);
        assert!(g.beta(0.999999).unwrap() > g.length() - 1e-4);
        let s = g.beta_inverse(g.beta(0.37).unwrap()).unwrap();
        assert!((s - 0.37).abs() < 1e-13);
        let g1 = EllipsoidGeometry::new(1.0).unwrap();
        let want = 2.0 * PI * (3.0 * PI / 8.0).sin();
        assert!((g1.beta(0.5).unwrap() - want).abs() < 1e-12);
    }
}
