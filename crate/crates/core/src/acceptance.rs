//! End-to-end checks of the solver against closed forms, independent oracles
//! and the qualitative structure of the bifurcation diagram.

use std::f64::consts::PI;
use std::path::PathBuf;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::bifurcation::{
    continue_branch, instants, iota_k, properness_violations, BifurcationInstant, Branch,
    BranchPoint, ContinuationConfig, Direction, Termination,
};
use crate::error::Result;
use crate::export::{read_branch_points, to_json, write_text, BranchFile};
use crate::flow::{self, clairaut, energy, FlowConfig};
use crate::lift::{embedding_check, lift, torus_area, DEFAULT_NPSI, DEFAULT_NT_PER_WINDING};
use crate::profile::{EllipsoidGeometry, DEFAULT_QUAD_TOL};
use crate::shooting::{self, brent, classify, dfds_at_zero, find_root, RootOptions};

pub const CRITERIA: [u32; 11] = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11];

#[derive(Debug, Clone, Serialize)]
pub struct CriterionReport {
    pub id: u32,
    pub name: &'static str,
    pub passed: bool,
    pub seconds: f64,
    pub budget_seconds: f64,
    pub detail: String,
}

impl std::fmt::Display for CriterionReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "[{}] {:>2} {:<24} {:>8.2}s  {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.seconds,
            self.detail
        )
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteConfig {
    pub quad_tol: f64,
    pub flow: FlowConfig,
    pub threads: usize,
    pub seed: u64,
    /// Branch files are written here and rescanned by the properness check.
    pub out_dir: Option<PathBuf>,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            quad_tol: DEFAULT_QUAD_TOL,
            flow: FlowConfig::default(),
            threads: 2,
            seed: 20_240_601,
            out_dir: None,
        }
    }
}

/// Shared state between criteria: branches computed once are reused.
pub struct Suite {
    pub cfg: SuiteConfig,
    b11: Option<(Branch, Branch)>,
    b12: Option<(Branch, Branch)>,
    b23: Option<(Branch, Branch)>,
    visited: Vec<BranchPoint>,
}

struct Check {
    ok: bool,
    notes: Vec<String>,
}

impl Check {
    fn new() -> Self {
        Self {
            ok: true,
            notes: Vec::new(),
        }
    }

    fn require(&mut self, cond: bool, note: impl Into<String>) {
        let note = note.into();
        if cond {
            self.notes.push(note);
        } else {
            self.ok = false;
            self.notes.push(format!("FAILED {note}"));
        }
    }
}

fn rel(x: f64, y: f64) -> f64 {
    (x - y).abs() / y.abs()
}

impl Suite {
    pub fn new(cfg: SuiteConfig) -> Self {
        Self {
            cfg,
            b11: None,
            b12: None,
            b23: None,
            visited: Vec::new(),
        }
    }

    pub fn run_all(&mut self) -> Vec<CriterionReport> {
        CRITERIA.iter().map(|&id| self.run(id)).collect()
    }

    pub fn run(&mut self, id: u32) -> CriterionReport {
        let (name, budget): (&'static str, f64) = match id {
            1 => ("closed-form instants", 1.0),
            2 => ("profile oracles", 5.0),
            3 => ("conservation", 60.0),
            4 => ("jacobi consistency", 120.0),
            5 => ("transversality", 60.0),
            6 => ("nontrivial roots", 30.0),
            7 => ("branch (1,1)", 300.0),
            8 => ("branch (1,2)", 300.0),
            9 => ("involution parity", 60.0),
            10 => ("lift fidelity", 60.0),
            11 => ("properness guard", 60.0),
            _ => ("unknown", 0.0),
        };
        let start = Instant::now();
        let outcome = match id {
            1 => self.instants_check(),
            2 => self.profile_check(),
            3 => self.conservation_check(),
            4 => self.jacobi_check(),
            5 => self.transversality_check(),
            6 => self.nontrivial_root_check(),
            7 => self.branch11_check(),
            8 => self.branch12_check(),
            9 => self.involution_check(),
            10 => self.lift_check(),
            11 => self.properness_check(),
            _ => Ok(Check {
                ok: false,
                notes: vec![format!("no criterion {id}")],
            }),
        };
        let seconds = start.elapsed().as_secs_f64();
        let (mut passed, mut detail) = match outcome {
            Ok(c) => (c.ok, c.notes.join("; ")),
            Err(e) => (false, format!("error: {e}")),
        };
        if seconds > budget {
            passed = false;
            detail.push_str(&format!("; FAILED runtime above {budget} s"));
        }
        CriterionReport {
            id,
            name,
            passed,
            seconds,
            budget_seconds: budget,
            detail,
        }
    }

    fn geometry(&self, a: f64) -> Result<EllipsoidGeometry> {
        EllipsoidGeometry::build(a, self.cfg.quad_tol)
    }

    fn continuation(&self, a_min: f64, ds_max: f64) -> ContinuationConfig {
        ContinuationConfig {
            a_min,
            ds_max,
            quad_tol: self.cfg.quad_tol,
            flow: self.cfg.flow,
            ..ContinuationConfig::default()
        }
    }

    fn run_branch(&mut self, j: u32, k: u32, cc: &ContinuationConfig) -> Result<(Branch, Branch)> {
        let inst = BifurcationInstant::new(j, k)?;
        let (pos, neg) = if self.cfg.threads > 1 {
            std::thread::scope(|scope| {
                let p = scope.spawn(|| continue_branch(&inst, Direction::Positive, cc));
                let n = continue_branch(&inst, Direction::Negative, cc);
                (p.join().expect("continuation thread"), n)
            })
        } else {
            (
                continue_branch(&inst, Direction::Positive, cc),
                continue_branch(&inst, Direction::Negative, cc),
            )
        };
        for b in [&pos, &neg] {
            self.visited.extend(b.points.iter().copied());
            if let Some(dir) = &self.cfg.out_dir {
                let tag = match b.direction {
                    Direction::Positive => "pos",
                    Direction::Negative => "neg",
                };
                let path = dir.join(format!("branch_{j}_{k}_{tag}.json"));
                write_text(&path, &to_json(&BranchFile::new(b, cc))?)?;
            }
        }
        Ok((pos, neg))
    }

    fn instants_check(&mut self) -> Result<Check> {
        let mut c = Check::new();
        let list = instants(6);
        let a11 = list
            .iter()
            .find(|i| i.j == 1 && i.k == 1)
            .map(|i| i.a_jk)
            .unwrap_or(f64::NAN);
        let err = (a11 - 1.0 / 3f64.sqrt()).abs();
        c.require(err <= 1e-14, format!("|a11 - 1/sqrt3| = {err:.1e}"));
        let nearest_one = list
            .iter()
            .map(|i| (i.a_jk - 1.0).abs())
            .fold(f64::INFINITY, f64::min);
        c.require(
            nearest_one > 0.0,
            format!("min |a - 1| = {nearest_one:.3e}"),
        );
        let min_gap = list
            .windows(2)
            .map(|w| w[1].a_jk - w[0].a_jk)
            .fold(f64::INFINITY, f64::min);
        c.require(
            min_gap > 0.0,
            format!("{} values, min gap {min_gap:.3e}", list.len()),
        );
        Ok(c)
    }

    fn profile_check(&mut self) -> Result<Check> {
        let mut c = Check::new();
        let g = self.geometry(1.0)?;
        let two_pi = 2.0 * PI;
        let mut e_rho: f64 = 0.0;
        let mut e_varphi: f64 = 0.0;
        for i in 0..=200 {
            let phi = PI / 2.0 * i as f64 / 200.0;
            e_rho = e_rho.max((g.rho_of_phi(phi) - two_pi * phi.sin()).abs());
            let rho = two_pi * 0.999 * i as f64 / 200.0;
            let want = rho * (1.0 - rho * rho / (two_pi * two_pi)).sqrt();
            e_varphi = e_varphi.max((g.varphi(rho)? - want).abs());
        }
        let e_len = (g.length() - two_pi).abs();
        c.require(e_rho <= 1e-10, format!("a=1 rho err {e_rho:.1e}"));
        c.require(e_varphi <= 1e-10, format!("varphi err {e_varphi:.1e}"));
        c.require(e_len <= 1e-10, format!("L err {e_len:.1e}"));
        let mut worst: f64 = 0.0;
        for a in [0.3, 0.5, 1.0, 2.0, 5.0] {
            let g = self.geometry(a)?;
            let p = g.profile(g.rho_clifford())?;
            let want2 = -4.0 * a / (PI * (a * a + 1.0));
            worst = worst
                .max((p.varphi - PI * a).abs())
                .max((p.ddvarphi - want2).abs());
        }
        c.require(worst <= 1e-9, format!("Clifford values err {worst:.1e}"));
        Ok(c)
    }

    fn conservation_check(&mut self) -> Result<Check> {
        let mut c = Check::new();
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        let (mut worst_c, mut worst_e): (f64, f64) = (0.0, 0.0);
        for _ in 0..50 {
            let a = rng.gen_range(0.2..=5.0);
            let s = rng.gen_range(-0.8..=0.8);
            let k = rng.gen_range(1..=4u32);
            let g = self.geometry(a)?;
            let traj = flow::integrate(&g, s, k, &self.cfg.flow)?;
            let ell = traj.ell(k as i64).expect("integration reaches crossing k");
            let n = 64 * k as usize;
            for st in traj.sample(0.0, ell, n) {
                worst_c = worst_c.max(rel(clairaut(&g, &st), traj.clairaut0));
                worst_e = worst_e.max(rel(energy(&g, &st), traj.energy0));
            }
        }
        c.require(worst_c <= 1e-9, format!("Clairaut drift {worst_c:.1e}"));
        c.require(worst_e <= 1e-9, format!("energy drift {worst_e:.1e}"));
        let mut worst_ell: f64 = 0.0;
        for a in [0.2, 0.5, 1.0, 2.0, 5.0] {
            let g = self.geometry(a)?;
            for k in 1..=4u32 {
                let ell = flow::ell_k(&g, 0.0, k, &self.cfg.flow)?;
                worst_ell = worst_ell.max((ell - k as f64 * PI).abs());
            }
        }
        c.require(
            worst_ell <= 1e-10,
            format!("|l_k(a,0) - k pi| {worst_ell:.1e}"),
        );
        Ok(c)
    }

    fn jacobi_check(&mut self) -> Result<Check> {
        let mut c = Check::new();
        let flow = self.cfg.flow;
        let n = 200;
        let (lo, hi) = (0.2, 3.0);
        let grid: Vec<f64> = (0..n)
            .map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
            .collect();
        let mut worst: f64 = 0.0;
        let mut zeros: Vec<(u32, f64)> = Vec::new();
        for k in 1..=4u32 {
            let mut prev: Option<(f64, f64)> = None;
            for &a in &grid {
                let g = self.geometry(a)?;
                let d = dfds_at_zero(&g, k, &flow)?;
                worst = worst.max(rel(d.numeric, d.closed_form));
                if let Some((a0, d0)) = prev {
                    if (d0 > 0.0) != (d.numeric > 0.0) {
                        let opts = RootOptions {
                            f_tol: f64::INFINITY,
                            x_tol: 1e-12,
                            max_iter: 200,
                        };
                        let slope = |a: f64| -> Result<f64> {
                            let g = self.geometry(a)?;
                            Ok(dfds_at_zero(&g, k, &flow)?.numeric)
                        };
                        let (root, _) = brent(slope, a0, a, &opts)?;
                        zeros.push((k, root));
                    }
                }
                prev = Some((a, d.numeric));
            }
        }
        c.require(
            worst <= 1e-5,
            format!("max rel err {worst:.2e} on {} points", 4 * n),
        );
        let expected: Vec<BifurcationInstant> = instants(4)
            .into_iter()
            .filter(|i| i.a_jk > lo && i.a_jk < hi)
            .collect();
        let mut worst_zero: f64 = 0.0;
        let mut matched = true;
        for &(k, z) in &zeros {
            let best = expected
                .iter()
                .filter(|i| k % i.k == 0)
                .map(|i| (i.a_jk - z).abs())
                .fold(f64::INFINITY, f64::min);
            worst_zero = worst_zero.max(best);
        }
        for inst in &expected {
            let found = zeros
                .iter()
                .any(|&(k, z)| k == inst.k && (z - inst.a_jk).abs() <= 1e-6);
            matched &= found;
        }
        c.require(
            worst_zero <= 1e-6 && matched,
            format!(
                "{} zero crossings, {} instants in range, max offset {worst_zero:.1e}",
                zeros.len(),
                expected.len()
            ),
        );
        Ok(c)
    }

    fn transversality_check(&mut self) -> Result<Check> {
        let mut c = Check::new();
        for (j, k) in [(1, 1), (1, 2), (3, 2), (1, 3), (2, 3)] {
            let m = shooting::mixed_partial(j, k, self.cfg.quad_tol, &self.cfg.flow)?;
            let e = m.relative_error();
            c.require(e <= 1e-3, format!("({j},{k}) {e:.1e}"));
        }
        Ok(c)
    }

    fn nontrivial_root_check(&mut self) -> Result<Check> {
        let mut c = Check::new();
        let flow = self.cfg.flow;
        let g = self.geometry(0.5)?;
        let f1 = |s: f64| -> Result<f64> { Ok(shooting::f_k(&g, s, 1, &flow)?.f_value) };
        let n = 2000;
        let grid: Vec<f64> = (1..=n).map(|i| 0.95 * i as f64 / (n + 1) as f64).collect();
        let mut bracket = None;
        let mut prev = (grid[0], f1(grid[0])?);
        for &s in &grid[1..] {
            let v = f1(s)?;
            if (prev.1 > 0.0) != (v > 0.0) {
                bracket = Some((prev.0, s));
                break;
            }
            prev = (s, v);
        }
        let Some((lo, hi)) = bracket else {
            c.require(false, "grid scan found no sign change");
            return Ok(c);
        };
        let (mut l, mut h) = (lo, hi);
        let fl = f1(l)?;
        for _ in 0..60 {
            let m = 0.5 * (l + h);
            if (f1(m)? > 0.0) == (fl > 0.0) {
                l = m;
            } else {
                h = m;
            }
        }
        let oracle = 0.5 * (l + h);
        let root = find_root(&g, 1, (lo, hi), &flow)?;
        let diff = (root.s - oracle).abs();
        c.require(
            diff <= 1e-8,
            format!("s* = {:.12}, oracle diff {diff:.1e}", root.s),
        );
        c.require(
            root.f_value.abs() <= 1e-10,
            format!("|f1| = {:.1e}", root.f_value.abs()),
        );
        let class = classify(&g, root.s, 1, &flow)?;
        c.require(
            class.is_simple && class.invariants() == (1, 2, 0),
            format!(
                "simple {} invariants {:?}",
                class.is_simple,
                class.invariants()
            ),
        );
        let traj = flow::integrate(&g, root.s, 1, &flow)?;
        let emb = embedding_check(&traj, 1, 2048)?;
        c.require(emb.embedded, format!("embedded {}", emb.embedded));
        Ok(c)
    }

    fn branch11(&mut self) -> Result<(Branch, Branch)> {
        if self.b11.is_none() {
            let cc = self.continuation(0.25, 0.01);
            self.b11 = Some(self.run_branch(1, 1, &cc)?);
        }
        Ok(self.b11.clone().expect("computed above"))
    }

    fn branch11_check(&mut self) -> Result<Check> {
        let mut c = Check::new();
        let (pos, neg) = self.branch11()?;
        let expected = BifurcationInstant::new(1, 1)?.expected_invariants();
        for b in [&pos, &neg] {
            let last_a = b.points.last().map_or(f64::NAN, |p| p.a);
            let tag = format!("{:?}", b.direction).to_lowercase();
            c.require(
                b.termination == Termination::ReachedAMin && last_a <= 0.25,
                format!("{tag}: {} points, end a = {last_a:.4}", b.points.len()),
            );
            c.require(b.points.len() >= 100, format!("{tag}: >= 100 points"));
            let worst_f = b
                .points
                .iter()
                .map(|p| p.f_residual.abs())
                .fold(0.0, f64::max);
            c.require(worst_f <= 1e-8, format!("{tag}: max |f1| {worst_f:.1e}"));
            let inv_ok = b.points.iter().all(|p| p.invariants() == expected);
            c.require(inv_ok, format!("{tag}: invariants {expected:?}"));
            let max_a = b.points.iter().map(|p| p.a).fold(0.0, f64::max);
            c.require(max_a <= 1.0, format!("{tag}: max a {max_a:.4}"));
        }
        Ok(c)
    }

    fn branch12_check(&mut self) -> Result<Check> {
        let mut c = Check::new();
        if self.b12.is_none() {
            let cc = self.continuation(0.1, 0.02);
            self.b12 = Some(self.run_branch(1, 2, &cc)?);
        }
        let (pos, neg) = self.b12.clone().expect("computed above");
        let flow = self.cfg.flow;
        let mut n = 0;
        let mut class_ok = true;
        let mut single = true;
        let mut worst_angle: f64 = 0.0;
        for b in [&pos, &neg] {
            c.require(
                !matches!(b.termination, Termination::Failure(_)),
                format!("{:?}: {:?}", b.direction, b.termination),
            );
            for p in &b.points {
                let g = self.geometry(p.a)?;
                let traj = flow::integrate(&g, p.s, 2, &flow)?;
                let class = shooting::classify_trajectory(&g, &traj, 2);
                class_ok &=
                    class.is_closed && class.is_primitive && class.invariants() == (2, 2, 1);
                let emb = embedding_check(&traj, 2, 2048)?;
                single &= emb.crossing_points.len() == 1;
                for x in &emb.crossing_points {
                    worst_angle = worst_angle.max((x[1] / x[0].hypot(x[1])).abs());
                }
                n += 1;
            }
        }
        c.require(
            n > 0 && class_ok,
            format!("{n} points primitive with invariants (2, 2, 1)"),
        );
        c.require(single, "one planar self-intersection per point");
        c.require(
            worst_angle <= 1e-8,
            format!("max |sin theta| at crossing {worst_angle:.1e}"),
        );
        Ok(c)
    }

    fn involution_check(&mut self) -> Result<Check> {
        let mut c = Check::new();
        let (p11, n11) = self.branch11()?;
        if self.b23.is_none() {
            let cc = ContinuationConfig {
                max_points: 25,
                ..self.continuation(0.1, 0.02)
            };
            self.b23 = Some(self.run_branch(2, 3, &cc)?);
        }
        let (p23, n23) = self.b23.clone().expect("computed above");
        let flow = self.cfg.flow;
        for (j, k, pos, neg) in [(1u32, 1u32, &p11, &n11), (2, 3, &p23, &n23)] {
            let mut worst: f64 = 0.0;
            let mut parity_ok = true;
            let mut count = 0;
            for b in [pos, neg] {
                let stride = (b.points.len() / 8).max(1);
                for p in b.points.iter().step_by(stride) {
                    let g = self.geometry(p.a)?;
                    let once = iota_k(&g, p.s, k, &flow)?;
                    let twice = iota_k(&g, once.s_reflected, k, &flow)?;
                    worst = worst.max((twice.s_reflected - p.s).abs());
                    parity_ok &= once.preserves_side() == (j % 2 == 0);
                    count += 1;
                }
            }
            let side = if j % 2 == 0 { "preserves" } else { "swaps" };
            c.require(
                worst <= 1e-8,
                format!("({j},{k}) {count} roots, |iota^2 s - s| {worst:.1e}"),
            );
            c.require(parity_ok, format!("({j},{k}) {side} sides"));
        }
        Ok(c)
    }

    fn lift_check(&mut self) -> Result<Check> {
        let mut c = Check::new();
        let flow = self.cfg.flow;
        let mut worst_res: f64 = 0.0;
        let mut worst_area: f64 = 0.0;
        for a in [0.5, 1.0, 2.0] {
            let g = self.geometry(a)?;
            let traj = flow::integrate(&g, 0.0, 1, &flow)?;
            let mesh = lift(&g, &traj, 1, DEFAULT_NT_PER_WINDING, DEFAULT_NPSI, None)?;
            for v in &mesh.vertices {
                let z2 = (v[0] * v[0] + v[1] * v[1]) / (a * a);
                let w2 = v[2] * v[2] + v[3] * v[3];
                worst_res = worst_res.max((z2 - 0.5).abs()).max((w2 - 0.5).abs());
            }
            let area = torus_area(&g, &traj, 1)?;
            worst_area = worst_area.max(rel(area, 2.0 * PI * PI * a));
        }
        c.require(
            worst_res <= 1e-10,
            format!("Clifford |z|^2/a^2, |w|^2 err {worst_res:.1e}"),
        );
        c.require(
            worst_area <= 1e-9,
            format!("Clifford area rel err {worst_area:.1e}"),
        );
        let g = self.geometry(0.5)?;
        let f1 = |s: f64| Ok(shooting::f_k(&g, s, 1, &flow)?.f_value);
        let bracket = scan_bracket(f1, 0.01, 0.95, 200)?;
        let root = find_root(&g, 1, bracket, &flow)?;
        let traj = flow::integrate(&g, root.s, 1, &flow)?;
        let mesh = lift(&g, &traj, 1, DEFAULT_NT_PER_WINDING, DEFAULT_NPSI, Some(1))?;
        let exact = torus_area(&g, &traj, 1)?;
        let d = rel(mesh.area(), exact);
        c.require(d <= 5e-3, format!("(1,1) root mesh vs exact area {d:.1e}"));
        Ok(c)
    }

    fn properness_check(&mut self) -> Result<Check> {
        let mut c = Check::new();
        let s_limit = ContinuationConfig::default().s_limit;
        let mut points = self.visited.clone();
        let mut from_files = 0;
        if let Some(dir) = &self.cfg.out_dir {
            if dir.is_dir() {
                let read = read_branch_points(dir)?;
                from_files = read.len();
                points.extend(read);
            }
        }
        let bad = properness_violations(&points, s_limit);
        c.require(
            bad.is_empty(),
            format!(
                "{} points scanned ({from_files} from files), {} with |s| > {s_limit} in a in [0.1, 10]",
                points.len(),
                bad.len()
            ),
        );
        Ok(c)
    }
}

/// First sign change of `f` on a uniform grid of `n` points in `[lo, hi]`.
pub fn scan_bracket(
    mut f: impl FnMut(f64) -> Result<f64>,
    lo: f64,
    hi: f64,
    n: usize,
) -> Result<(f64, f64)> {
    let mut prev = (lo, f(lo)?);
    for i in 1..n {
        let s = lo + (hi - lo) * i as f64 / (n - 1) as f64;
        let v = f(s)?;
        if (prev.1 > 0.0) != (v > 0.0) {
            return Ok((prev.0, s));
        }
        prev = (s, v);
    }
    Err(crate::Error::NoSignChange {
        lo,
        hi,
        f_lo: prev.1,
        f_hi: prev.1,
    })
}
