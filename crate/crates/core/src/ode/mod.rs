//! Explicit Runge-Kutta 8(5,3) integrator with 7th-order dense output.
//!
//! Step control follows the Hairer DOP853 scheme: the 5th and 3rd order
//! embedded estimates are blended into one error norm, and a PI controller
//! picks the next step. Every accepted step is handed to a callback as a
//! [`DenseSegment`], which can be evaluated anywhere inside the step.

mod tableau;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use tableau::{A, B, C, D, E3, E5, STAGES, STAGES_EXT};

const SAFETY: f64 = 0.9;
const MIN_FACTOR: f64 = 0.2;
const MAX_FACTOR: f64 = 10.0;
const PI_BETA: f64 = 0.04;
const ERROR_ORDER: f64 = 7.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OdeConfig {
    pub rtol: f64,
    pub atol: f64,
    /// Upper bound on `|h|`.
    pub max_step: f64,
    pub max_steps: usize,
}

impl Default for OdeConfig {
    fn default() -> Self {
        Self {
            rtol: 1e-10,
            atol: 1e-12,
            max_step: 0.1,
            max_steps: 1_000_000,
        }
    }
}

/// Polynomial interpolant of one accepted step.
#[derive(Debug, Clone)]
pub struct DenseSegment<const N: usize> {
    pub t_old: f64,
    pub t_new: f64,
    y_old: [f64; N],
    coeffs: [[f64; N]; 7],
}

impl<const N: usize> DenseSegment<N> {
    pub fn h(&self) -> f64 {
        self.t_new - self.t_old
    }

    pub fn y_old(&self) -> &[f64; N] {
        &self.y_old
    }

    pub fn contains(&self, t: f64) -> bool {
        let (lo, hi) = if self.t_new >= self.t_old {
            (self.t_old, self.t_new)
        } else {
            (self.t_new, self.t_old)
        };
        t >= lo && t <= hi
    }

    pub fn eval(&self, t: f64) -> [f64; N] {
        let x = (t - self.t_old) / self.h();
        let mut y = [0.0; N];
        for (i, f) in self.coeffs.iter().rev().enumerate() {
            let w = if i % 2 == 0 { x } else { 1.0 - x };
            for (yk, fk) in y.iter_mut().zip(f) {
                *yk = (*yk + fk) * w;
            }
        }
        for (yk, y0) in y.iter_mut().zip(&self.y_old) {
            *yk += y0;
        }
        y
    }
}

pub enum Control {
    Continue,
    Stop,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
    pub evaluations: usize,
}

/// Integrates `y' = f(t, y)` from `t0` in the direction of `direction`
/// (sign only) until `on_step` returns [`Control::Stop`].
pub fn integrate<const N: usize, F, S>(
    mut f: F,
    t0: f64,
    y0: [f64; N],
    direction: f64,
    cfg: &OdeConfig,
    mut on_step: S,
) -> Result<Stats>
where
    F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
    S: FnMut(&DenseSegment<N>) -> Result<Control>,
{
    let dir = if direction < 0.0 { -1.0 } else { 1.0 };
    let mut stats = Stats::default();
    let mut t = t0;
    let mut y = y0;
    let mut fy = f(t, &y)?;
    stats.evaluations += 1;
    let mut h_abs = initial_step(&mut f, t, &y, &fy, dir, cfg)?.min(cfg.max_step);
    stats.evaluations += 1;
    let mut err_old: f64 = 1e-4;
    let mut k = [[0.0; N]; STAGES_EXT];

    loop {
        if stats.accepted >= cfg.max_steps {
            return Err(Error::MaxSteps(cfg.max_steps));
        }
        let min_step = 10.0 * f64::EPSILON * t.abs().max(1.0);
        let mut rejected = false;
        let (y_new, f_new, h) = loop {
            if h_abs < min_step {
                return Err(Error::StepSizeUnderflow { t, h: h_abs });
            }
            let h = dir * h_abs;
            k[0] = fy;
            for s in 1..STAGES {
                let ys = combine(&y, &k, &A[s], s, h);
                k[s] = f(t + C[s] * h, &ys)?;
            }
            let y_new = combine(&y, &k, &B, STAGES, h);
            let f_new = f(t + h, &y_new)?;
            k[STAGES] = f_new;
            stats.evaluations += STAGES;

            let err = error_norm(&k, &y, &y_new, h, cfg);
            if err <= 1.0 {
                let fac11 = err.powf(1.0 / (ERROR_ORDER + 1.0) - 0.75 * PI_BETA);
                let mut factor = if err == 0.0 {
                    MAX_FACTOR
                } else {
                    (SAFETY * err_old.powf(PI_BETA) / fac11).clamp(MIN_FACTOR, MAX_FACTOR)
                };
                if rejected {
                    factor = factor.min(1.0);
                }
                err_old = err.max(1e-4);
                let next = (h_abs * factor).min(cfg.max_step);
                h_abs = next;
                break (y_new, f_new, h);
            }
            rejected = true;
            stats.rejected += 1;
            let factor = (SAFETY * err.powf(-1.0 / (ERROR_ORDER + 1.0))).max(MIN_FACTOR);
            h_abs *= factor;
        };

        // extra stages for the interpolant
        for s in STAGES + 1..STAGES_EXT {
            let ys = combine(&y, &k, &A[s], s, h);
            k[s] = f(t + C[s] * h, &ys)?;
        }
        stats.evaluations += STAGES_EXT - STAGES - 1;
        let mut coeffs = [[0.0; N]; 7];
        for i in 0..N {
            let dy = y_new[i] - y[i];
            coeffs[0][i] = dy;
            coeffs[1][i] = h * fy[i] - dy;
            coeffs[2][i] = 2.0 * dy - h * (f_new[i] + fy[i]);
        }
        for (row, d) in D.iter().enumerate() {
            for i in 0..N {
                coeffs[3 + row][i] = h * (0..STAGES_EXT).map(|s| d[s] * k[s][i]).sum::<f64>();
            }
        }
        let segment = DenseSegment {
            t_old: t,
            t_new: t + h,
            y_old: y,
            coeffs,
        };
        stats.accepted += 1;
        t += h;
        y = y_new;
        fy = f_new;
        if let Control::Stop = on_step(&segment)? {
            return Ok(stats);
        }
    }
}

fn combine<const N: usize>(
    y: &[f64; N],
    k: &[[f64; N]; STAGES_EXT],
    coef: &[f64],
    upto: usize,
    h: f64,
) -> [f64; N] {
    let mut out = *y;
    for i in 0..N {
        let mut acc = 0.0;
        for s in 0..upto {
            acc += coef[s] * k[s][i];
        }
        out[i] += h * acc;
    }
    out
}

fn error_norm<const N: usize>(
    k: &[[f64; N]; STAGES_EXT],
    y: &[f64; N],
    y_new: &[f64; N],
    h: f64,
    cfg: &OdeConfig,
) -> f64 {
    let mut e5 = 0.0;
    let mut e3 = 0.0;
    for i in 0..N {
        let scale = cfg.atol + cfg.rtol * y[i].abs().max(y_new[i].abs());
        let mut a5 = 0.0;
        let mut a3 = 0.0;
        for s in 0..=STAGES {
            a5 += E5[s] * k[s][i];
            a3 += E3[s] * k[s][i];
        }
        e5 += (a5 / scale).powi(2);
        e3 += (a3 / scale).powi(2);
    }
    if e5 == 0.0 && e3 == 0.0 {
        return 0.0;
    }
    h.abs() * e5 / ((e5 + 0.01 * e3) * N as f64).sqrt()
}

fn initial_step<const N: usize, F>(
    f: &mut F,
    t: f64,
    y: &[f64; N],
    fy: &[f64; N],
    dir: f64,
    cfg: &OdeConfig,
) -> Result<f64>
where
    F: FnMut(f64, &[f64; N]) -> Result<[f64; N]>,
{
    let scale: Vec<f64> = y.iter().map(|v| cfg.atol + cfg.rtol * v.abs()).collect();
    let norm = |v: &[f64; N]| {
        (v.iter()
            .zip(&scale)
            .map(|(x, s)| (x / s).powi(2))
            .sum::<f64>()
            / N as f64)
            .sqrt()
    };
    let d0 = norm(y);
    let d1 = norm(fy);
    let h0 = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    let mut y1 = *y;
    for i in 0..N {
        y1[i] += dir * h0 * fy[i];
    }
    let f1 = f(t + dir * h0, &y1)?;
    let mut diff = [0.0; N];
    for i in 0..N {
        diff[i] = f1[i] - fy[i];
    }
    let d2 = norm(&diff) / h0;
    let h1 = if d1 <= 1e-15 && d2 <= 1e-15 {
        (h0 * 1e-3).max(1e-6)
    } else {
        (0.01 / d1.max(d2)).powf(1.0 / (ERROR_ORDER + 2.0))
    };
    Ok((100.0 * h0).min(h1))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn harmonic(_t: f64, y: &[f64; 2]) -> Result<[f64; 2]> {
        Ok([y[1], -y[0]])
    }

    fn solve_to(t_end: f64, cfg: &OdeConfig) -> ([f64; 2], Vec<DenseSegment<2>>) {
        let mut segs = Vec::new();
        let dir = t_end.signum();
        integrate(harmonic, 0.0, [1.0, 0.0], dir, cfg, |seg| {
            segs.push(seg.clone());
            Ok(if seg.contains(t_end) {
                Control::Stop
            } else {
                Control::Continue
            })
        })
        .unwrap();
        let last = segs.last().unwrap();
        (last.eval(t_end), segs)
    }

    #[test]
    fn harmonic_oscillator_accuracy() {
        let cfg = OdeConfig {
            max_step: f64::INFINITY,
            ..OdeConfig::default()
        };
        let (y, _) = solve_to(10.0, &cfg);
        assert!((y[0] - 10f64.cos()).abs() < 1e-9);
        assert!((y[1] + 10f64.sin()).abs() < 1e-9);
        let (y, _) = solve_to(-7.0, &cfg);
        assert!((y[0] - 7f64.cos()).abs() < 1e-9);
        assert!((y[1] - 7f64.sin()).abs() < 1e-9);
    }

    #[test]
    fn dense_output_between_nodes() {
        let cfg = OdeConfig {
            max_step: f64::INFINITY,
            ..OdeConfig::default()
        };
        let (_, segs) = solve_to(6.0, &cfg);
        for seg in &segs {
            for i in 0..=10 {
                let t = seg.t_old + seg.h() * i as f64 / 10.0;
                let y = seg.eval(t);
                assert!((y[0] - t.cos()).abs() < 1e-9, "t = {t}");
            }
            assert_eq!(seg.eval(seg.t_old), *seg.y_old());
        }
    }

    #[test]
    fn max_step_is_respected() {
        let cfg = OdeConfig {
            max_step: 0.05,
            ..OdeConfig::default()
        };
        let (_, segs) = solve_to(1.0, &cfg);
        assert!(segs.iter().all(|s| s.h().abs() <= 0.05 + 1e-15));
    }

    #[test]
    fn step_limit_reports_error() {
        let cfg = OdeConfig {
            max_steps: 3,
            max_step: 0.01,
            ..OdeConfig::default()
        };
        let r = integrate(harmonic, 0.0, [1.0, 0.0], 1.0, &cfg, |_| {
            Ok(Control::Continue)
        });
        assert!(matches!(r, Err(Error::MaxSteps(3))));
    }
}
