//! Reference computations that share no code with the library.

#![allow(dead_code)]

use std::f64::consts::PI;

/// `ρ(ϕ)` from the antiderivative of `√(a² − (a²−1)u²)` with `u = sin ξ`.
pub fn rho_closed(a: f64, phi: f64) -> f64 {
    let u = phi.sin();
    let f = if (a - 1.0).abs() < 1e-15 {
        u
    } else if a > 1.0 {
        let c = (a * a - 1.0).sqrt();
        0.5 * u * (a * a - c * c * u * u).sqrt() + a * a / (2.0 * c) * (c * u / a).asin()
    } else {
        let c = (1.0 - a * a).sqrt();
        0.5 * u * (a * a + c * c * u * u).sqrt() + a * a / (2.0 * c) * (c * u / a).asinh()
    };
    2.0 * PI * f
}

/// `ρ(ϕ)` by adaptive Simpson on the defining integral.
pub fn rho_simpson(a: f64, phi: f64, tol: f64) -> f64 {
    let f = |x: f64| x.cos() * (a * a * x.cos().powi(2) + x.sin().powi(2)).sqrt();
    #[allow(clippy::too_many_arguments)]
    fn rec(
        f: &dyn Fn(f64) -> f64,
        lo: f64,
        hi: f64,
        flo: f64,
        fmid: f64,
        fhi: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let mid = 0.5 * (lo + hi);
        let (lm, rm) = (0.5 * (lo + mid), 0.5 * (mid + hi));
        let (flm, frm) = (f(lm), f(rm));
        let left = (mid - lo) / 6.0 * (flo + 4.0 * flm + fmid);
        let right = (hi - mid) / 6.0 * (fmid + 4.0 * frm + fhi);
        if depth == 0 || (left + right - whole).abs() <= 15.0 * tol {
            return left + right + (left + right - whole) / 15.0;
        }
        rec(f, lo, mid, flo, flm, fmid, left, tol / 2.0, depth - 1)
            + rec(f, mid, hi, fmid, frm, fhi, right, tol / 2.0, depth - 1)
    }
    let (flo, fmid, fhi) = (f(0.0), f(phi / 2.0), f(phi));
    let whole = phi / 6.0 * (flo + 4.0 * fmid + fhi);
    2.0 * PI * rec(&f, 0.0, phi, flo, fmid, fhi, whole, tol, 40)
}

/// Inverse of [`rho_closed`] by bisection followed by Newton.
pub fn phi_closed(a: f64, rho: f64) -> f64 {
    let (mut lo, mut hi) = (0.0, PI / 2.0);
    for _ in 0..40 {
        let mid = 0.5 * (lo + hi);
        if rho_closed(a, mid) < rho {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let mut p = 0.5 * (lo + hi);
    for _ in 0..4 {
        let d = 2.0 * PI * p.cos() * (a * a * p.cos().powi(2) + p.sin().powi(2)).sqrt();
        p -= (rho_closed(a, p) - rho) / d;
    }
    p
}

/// `(φ, φ')` at `ρ`.
pub fn varphi_closed(a: f64, rho: f64) -> (f64, f64) {
    let p = phi_closed(a, rho);
    let v = PI * a * (2.0 * p).sin();
    let dv = a * (2.0 * p).cos() / (p.cos() * (a * a * p.cos().powi(2) + p.sin().powi(2)).sqrt());
    (v, dv)
}

/// `(ℓ_k, f_k)` by classical RK4 with `θ` as the independent variable and
/// one Richardson extrapolation.
pub fn shoot_rk4(a: f64, s: f64, k: u32, n: usize) -> (f64, f64) {
    let run = |n: usize| {
        let rhs = |y: [f64; 4]| {
            let (r, rd, td) = (y[0], y[1], y[2]);
            let (v, dv) = varphi_closed(a, r);
            [rd / td, v * dv * td, -2.0 * dv / v * rd, 1.0 / td]
        };
        let mut y = [rho_closed(a, (1.0 + s) * PI / 4.0), 0.0, 1.0, 0.0];
        let h = k as f64 * PI / n as f64;
        for _ in 0..n {
            let add = |y: [f64; 4], d: [f64; 4], c: f64| {
                [
                    y[0] + c * d[0],
                    y[1] + c * d[1],
                    y[2] + c * d[2],
                    y[3] + c * d[3],
                ]
            };
            let k1 = rhs(y);
            let k2 = rhs(add(y, k1, h / 2.0));
            let k3 = rhs(add(y, k2, h / 2.0));
            let k4 = rhs(add(y, k3, h));
            for i in 0..4 {
                y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        (y[3], y[1])
    };
    let (t1, f1) = run(n);
    let (t2, f2) = run(2 * n);
    (t2 + (t2 - t1) / 15.0, f2 + (f2 - f1) / 15.0)
}
