//! Bifurcation instants of the Clifford geodesic and continuation of the
//! branches of nontrivial closed geodesics issuing from them.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{self, FlowConfig};
use crate::profile::{EllipsoidGeometry, DEFAULT_QUAD_TOL};
use crate::shooting::{self, gcd, GeodesicClassification};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BifurcationInstant {
    pub j: u32,
    pub k: u32,
    pub a_jk: f64,
}

impl BifurcationInstant {
    pub fn new(j: u32, k: u32) -> Result<Self> {
        if k == 0 || j == 0 || j >= 2 * k || gcd(j, k) != 1 {
            return Err(Error::InvalidParameter {
                name: "j/k",
                value: j as f64 / k.max(1) as f64,
                reason: "need coprime 0 < j < 2k",
            });
        }
        Ok(Self {
            j,
            k,
            a_jk: shooting::instant_value(j, k),
        })
    }

    /// Invariants `(winding, Clifford intersections, self-intersections)` of the branch.
    pub fn expected_invariants(&self) -> (u32, u32, u32) {
        (self.k, 2 * self.j, self.k - 1)
    }
}

/// All instants with `k ≤ k_max`, sorted by eccentricity.
pub fn instants(k_max: u32) -> Vec<BifurcationInstant> {
    let mut out: Vec<BifurcationInstant> = (1..=k_max)
        .flat_map(|k| (1..2 * k).filter_map(move |j| BifurcationInstant::new(j, k).ok()))
        .collect();
    out.sort_by(|x, y| x.a_jk.total_cmp(&y.a_jk));
    out
}

/// Eigenvalue `λ^{k,l}(j, m) = 2(j²/(k²a²) + m²/l²) − 8/(a²+1)` of the Jacobi
/// operator on the `(k, l)`-fold cover of the Clifford torus.
pub fn jacobi_eigenvalue(a: f64, k: u32, l: u32, j: i32, m: i32) -> f64 {
    let (kf, lf, jf, mf) = (k as f64, l as f64, j as f64, m as f64);
    2.0 * (jf * jf / (kf * kf * a * a) + mf * mf / (lf * lf)) - 8.0 / (a * a + 1.0)
}

/// Linearization of the geodesic family at the Clifford geodesic.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JacobiData {
    pub a: f64,
    /// `R_a(0) = β_a'(0)`.
    pub amplitude: f64,
    /// `R_a(t) = amplitude · cos(frequency · t)`.
    pub frequency: f64,
    pub k: u32,
    pub l: u32,
    /// `((j, m), λ^{k,l}(j, m))`.
    pub eigenvalues: Vec<((i32, i32), f64)>,
}

impl JacobiData {
    pub fn new(g: &EllipsoidGeometry, k: u32, l: u32, j_max: i32, m_max: i32) -> Self {
        let a = g.a();
        let eigenvalues = (-j_max..=j_max)
            .flat_map(|j| (-m_max..=m_max).map(move |m| (j, m)))
            .map(|(j, m)| ((j, m), jacobi_eigenvalue(a, k, l, j, m)))
            .collect();
        Self {
            a,
            amplitude: g.beta_prime(0.0),
            frequency: shooting::jacobi_frequency(a),
            k,
            l,
            eigenvalues,
        }
    }

    pub fn radial(&self, t: f64) -> f64 {
        self.amplitude * (self.frequency * t).cos()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Positive,
    Negative,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::Positive => 1.0,
            Direction::Negative => -1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ContinuationConfig {
    pub ds0: f64,
    pub ds_max: f64,
    pub ds_min: f64,
    pub a_min: f64,
    pub a_max: f64,
    pub max_points: usize,
    /// Corrector stops once `|f_k| ≤ f_tol`.
    pub f_tol: f64,
    pub max_newton: usize,
    pub h_a: f64,
    pub h_s: f64,
    /// Points with `|s|` above this inside `[0.1, 10]` are refused.
    pub s_limit: f64,
    pub quad_tol: f64,
    pub flow: FlowConfig,
}

impl Default for ContinuationConfig {
    fn default() -> Self {
        Self {
            ds0: 1e-3,
            ds_max: 0.05,
            ds_min: 1e-7,
            a_min: 0.05,
            a_max: 20.0,
            max_points: 5000,
            f_tol: 1e-10,
            max_newton: 10,
            h_a: 1e-5,
            h_s: 1e-6,
            s_limit: 0.999,
            quad_tol: DEFAULT_QUAD_TOL,
            flow: FlowConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "reason", content = "detail")]
pub enum Termination {
    ReachedAMin,
    ReachedAMax,
    StepLimit,
    Failure(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BranchPoint {
    pub a: f64,
    pub s: f64,
    pub ell_k: f64,
    pub f_residual: f64,
    pub winding: u32,
    pub clifford_intersections: u32,
    pub self_intersections: u32,
}

impl BranchPoint {
    pub fn invariants(&self) -> (u32, u32, u32) {
        (
            self.winding,
            self.clifford_intersections,
            self.self_intersections,
        )
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Branch {
    pub j: u32,
    pub k: u32,
    pub a_jk: f64,
    pub direction: Direction,
    /// Nontrivial points in continuation order; the instant `(a_jk, 0)` is not included.
    pub points: Vec<BranchPoint>,
    pub termination: Termination,
}

/// Desingularized shooting function `f_k(a, s) / s`; its zeros off `s = 0` are
/// exactly the nontrivial zeros of `f_k`.
struct Reduced<'c> {
    k: u32,
    cfg: &'c ContinuationConfig,
}

struct Eval {
    f: f64,
    g: f64,
    ga: f64,
    gs: f64,
}

impl Reduced<'_> {
    fn f(&self, a: f64, s: f64) -> Result<f64> {
        let geom = EllipsoidGeometry::build(a, self.cfg.quad_tol)?;
        Ok(shooting::f_k(&geom, s, self.k, &self.cfg.flow)?.f_value)
    }

    fn eval(&self, a: f64, s: f64) -> Result<Eval> {
        let f = self.f(a, s)?;
        let g = f / s;
        let (ha, hs) = (self.cfg.h_a, self.cfg.h_s.copysign(s));
        let ga = (self.f(a + ha, s)? / s - g) / ha;
        let gs = (self.f(a, s + hs)? / (s + hs) - g) / hs;
        Ok(Eval { f, g, ga, gs })
    }
}

/// Pseudo-arclength continuation of `B_{(j,k)}` away from `(a^j_k, 0)` on one side of `s = 0`.
pub fn continue_branch(
    instant: &BifurcationInstant,
    direction: Direction,
    cfg: &ContinuationConfig,
) -> Branch {
    let mut branch = Branch {
        j: instant.j,
        k: instant.k,
        a_jk: instant.a_jk,
        direction,
        points: Vec::new(),
        termination: Termination::StepLimit,
    };
    let problem = Reduced { k: instant.k, cfg };
    let expected = instant.expected_invariants();

    // First point: fixed s = ±ds0, Newton in a.
    let s1 = direction.sign() * cfg.ds0;
    let mut a1 = instant.a_jk;
    let mut first = None;
    for _ in 0..cfg.max_newton {
        let ev = match problem.eval(a1, s1) {
            Ok(ev) => ev,
            Err(e) => {
                branch.termination = Termination::Failure(format!("start: {e}"));
                return branch;
            }
        };
        if ev.f.abs() <= cfg.f_tol {
            first = Some(ev);
            break;
        }
        a1 -= ev.g / ev.ga;
    }
    let Some(ev) = first else {
        branch.termination = Termination::Failure("start: corrector in a did not converge".into());
        return branch;
    };
    let mut x = [a1, s1];
    match accept(&problem, x, expected, cfg) {
        Ok(p) => branch.points.push(p),
        Err(e) => {
            branch.termination = Termination::Failure(format!("start: {e}"));
            return branch;
        }
    }
    let mut tangent = unit_tangent(&ev, None, direction.sign());
    let mut ds = cfg.ds0;

    while branch.points.len() < cfg.max_points {
        let predicted = [x[0] + ds * tangent[0], x[1] + ds * tangent[1]];
        match correct(&problem, predicted, tangent, cfg) {
            Ok((xn, evn, iters)) if dist(xn, x) <= 1.5 * ds && (xn[1] > 0.0) == (x[1] > 0.0) => {
                let in_window = (0.1..=10.0).contains(&xn[0]);
                if in_window && xn[1].abs() > cfg.s_limit {
                    branch.termination = Termination::Failure(format!(
                        "approached |s| = 1 at a = {:.6} (s = {:.6})",
                        xn[0], xn[1]
                    ));
                    return branch;
                }
                match accept(&problem, xn, expected, cfg) {
                    Ok(p) => {
                        branch.points.push(p);
                        tangent = unit_tangent(&evn, Some(tangent), direction.sign());
                        x = xn;
                        if iters <= 3 {
                            ds = (ds * 1.3).min(cfg.ds_max);
                        } else if iters >= 6 {
                            ds *= 0.7;
                        }
                        if x[0] < cfg.a_min {
                            branch.termination = Termination::ReachedAMin;
                            return branch;
                        }
                        if x[0] > cfg.a_max {
                            branch.termination = Termination::ReachedAMax;
                            return branch;
                        }
                        continue;
                    }
                    Err(e) if ds * 0.5 < cfg.ds_min => {
                        branch.termination = Termination::Failure(e.to_string());
                        return branch;
                    }
                    Err(_) => {}
                }
            }
            Err(e) if ds * 0.5 < cfg.ds_min => {
                branch.termination = Termination::Failure(format!("corrector: {e}"));
                return branch;
            }
            _ => {}
        }
        ds *= 0.5;
        if ds < cfg.ds_min {
            branch.termination = Termination::Failure("step size below ds_min".into());
            return branch;
        }
    }
    branch
}

fn dist(x: [f64; 2], y: [f64; 2]) -> f64 {
    ((x[0] - y[0]).powi(2) + (x[1] - y[1]).powi(2)).sqrt()
}

/// Kernel direction of `∇G`, oriented along the previous tangent, or away from `s = 0` at the start.
fn unit_tangent(ev: &Eval, previous: Option<[f64; 2]>, side: f64) -> [f64; 2] {
    let mut t = [-ev.gs, ev.ga];
    let n = (t[0] * t[0] + t[1] * t[1]).sqrt();
    t = [t[0] / n, t[1] / n];
    let flip = match previous {
        Some(p) => t[0] * p[0] + t[1] * p[1] < 0.0,
        None => t[1] * side < 0.0,
    };
    if flip {
        [-t[0], -t[1]]
    } else {
        t
    }
}

fn correct(
    problem: &Reduced,
    predicted: [f64; 2],
    tangent: [f64; 2],
    cfg: &ContinuationConfig,
) -> Result<([f64; 2], Eval, usize)> {
    let mut x = predicted;
    for iter in 1..=cfg.max_newton {
        let ev = problem.eval(x[0], x[1])?;
        if ev.f.abs() <= cfg.f_tol {
            return Ok((x, ev, iter));
        }
        // [ga gs; ta ts] δ = −[G; t·(x − x_p)]
        let r1 = -ev.g;
        let r2 = -(tangent[0] * (x[0] - predicted[0]) + tangent[1] * (x[1] - predicted[1]));
        let det = ev.ga * tangent[1] - ev.gs * tangent[0];
        if det == 0.0 || !det.is_finite() {
            return Err(Error::NoConvergence("singular corrector system"));
        }
        let da = (r1 * tangent[1] - ev.gs * r2) / det;
        let dsv = (ev.ga * r2 - tangent[0] * r1) / det;
        x = [x[0] + da, x[1] + dsv];
        if x[0].is_nan() || x[0] <= 0.0 || x[1].abs() >= flow::S_LIMIT || x[1] == 0.0 {
            return Err(Error::NoConvergence("corrector left the strip"));
        }
        if ev.f.abs() <= cfg.f_tol && (da.abs() + dsv.abs()) < 1e-9 {
            let ev = problem.eval(x[0], x[1])?;
            return Ok((x, ev, iter));
        }
    }
    Err(Error::NoConvergence("pseudo-arclength corrector"))
}

fn accept(
    problem: &Reduced,
    x: [f64; 2],
    expected: (u32, u32, u32),
    cfg: &ContinuationConfig,
) -> Result<BranchPoint> {
    let geom = EllipsoidGeometry::build(x[0], cfg.quad_tol)?;
    let (res, traj) = shooting::shoot(&geom, x[1], problem.k, &cfg.flow)?;
    let class = shooting::classify_trajectory(&geom, &traj, problem.k);
    let point = point_from(&res, &class);
    if res.f_value.abs() > 100.0 * cfg.f_tol {
        return Err(Error::NotClosed(res.f_value));
    }
    if point.invariants() != expected || !class.is_primitive {
        return Err(Error::BranchJump(format!(
            "at (a, s) = ({:.8}, {:.8}) found {:?}, expected {:?}",
            x[0],
            x[1],
            point.invariants(),
            expected
        )));
    }
    Ok(point)
}

fn point_from(res: &shooting::ShootingResult, class: &GeodesicClassification) -> BranchPoint {
    BranchPoint {
        a: res.a,
        s: res.s,
        ell_k: res.ell_k,
        f_residual: res.f_value,
        winding: class.winding,
        clifford_intersections: class.clifford_intersections,
        self_intersections: class.self_intersections_on_diameter,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Reflection {
    pub s: f64,
    pub s_reflected: f64,
    pub f_reflected: f64,
    pub ell: f64,
    pub ell_reflected: f64,
}

impl Reflection {
    /// Whether the reflected root stays on the same side of the trivial branch.
    pub fn preserves_side(&self) -> bool {
        (self.s > 0.0) == (self.s_reflected > 0.0)
    }
}

/// The involution `ι_k`: the root whose geodesic starts where `γ_{a,s}` meets the
/// diameter at its `k`-th crossing.
pub fn iota_k(g: &EllipsoidGeometry, s_root: f64, k: u32, cfg: &FlowConfig) -> Result<Reflection> {
    let traj = flow::integrate(g, s_root, k, cfg)?;
    let ell = traj
        .ell(k as i64)
        .expect("integration stops at the target crossing");
    let rho_far = traj.state_at(ell).rho;
    let s_reflected = g.beta_inverse(rho_far)?;
    if s_reflected.abs() >= flow::S_LIMIT {
        return Err(Error::OutOfDomain {
            what: "reflected s",
            value: s_reflected,
            lo: -flow::S_LIMIT,
            hi: flow::S_LIMIT,
        });
    }
    let back = shooting::f_k(g, s_reflected, k, cfg)?;
    Ok(Reflection {
        s: s_root,
        s_reflected,
        f_reflected: back.f_value,
        ell,
        ell_reflected: back.ell_k,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LabeledBranch {
    pub instant: BifurcationInstant,
    pub positive: Branch,
    pub negative: Branch,
}

impl LabeledBranch {
    pub fn all_points(&self) -> impl Iterator<Item = &BranchPoint> {
        self.positive.points.iter().chain(&self.negative.points)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Diagram {
    pub branches: Vec<LabeledBranch>,
    /// Samples `(a, 0)` of the trivial branch across the configured window.
    pub trivial: Vec<(f64, f64)>,
    /// Smallest distance between points of different labels (infinite with < 2 labels).
    pub min_distance: f64,
    pub disjoint: bool,
}

/// Continues every label in both directions, in parallel over `threads` workers.
pub fn diagram(labels: &[(u32, u32)], cfg: &ContinuationConfig, threads: usize) -> Result<Diagram> {
    let instants = labels
        .iter()
        .map(|&(j, k)| BifurcationInstant::new(j, k))
        .collect::<Result<Vec<_>>>()?;
    let jobs: Vec<(usize, Direction)> = (0..instants.len())
        .flat_map(|i| [(i, Direction::Positive), (i, Direction::Negative)])
        .collect();
    let threads = threads.max(1).min(jobs.len().max(1));
    let mut results: Vec<Option<Branch>> = vec![None; jobs.len()];
    if threads <= 1 {
        for (slot, &(i, dir)) in results.iter_mut().zip(&jobs) {
            *slot = Some(continue_branch(&instants[i], dir, cfg));
        }
    } else {
        let chunk = jobs.len().div_ceil(threads);
        std::thread::scope(|scope| {
            for (slots, work) in results.chunks_mut(chunk).zip(jobs.chunks(chunk)) {
                let instants = &instants;
                scope.spawn(move || {
                    for (slot, &(i, dir)) in slots.iter_mut().zip(work) {
                        *slot = Some(continue_branch(&instants[i], dir, cfg));
                    }
                });
            }
        });
    }
    let mut iter = results.into_iter().map(|b| b.expect("every job ran"));
    let branches: Vec<LabeledBranch> = instants
        .iter()
        .map(|inst| LabeledBranch {
            instant: *inst,
            positive: iter.next().unwrap(),
            negative: iter.next().unwrap(),
        })
        .collect();

    let mut min_distance = f64::INFINITY;
    for (i, bi) in branches.iter().enumerate() {
        for bj in &branches[i + 1..] {
            for p in bi.all_points() {
                for q in bj.all_points() {
                    min_distance = min_distance.min(dist([p.a, p.s], [q.a, q.s]));
                }
            }
        }
    }
    let n_triv = 200;
    let (lo, hi) = (cfg.a_min.max(1e-3), cfg.a_max);
    let trivial = (0..=n_triv)
        .map(|i| (lo * (hi / lo).powf(i as f64 / n_triv as f64), 0.0))
        .collect();
    Ok(Diagram {
        branches,
        trivial,
        min_distance,
        disjoint: min_distance > cfg.ds0,
    })
}

/// Points violating the properness expectation: `|s| > s_limit` while `a ∈ [0.1, 10]`.
pub fn properness_violations<'b>(
    points: impl IntoIterator<Item = &'b BranchPoint>,
    s_limit: f64,
) -> Vec<BranchPoint> {
    points
        .into_iter()
        .filter(|p| (0.1..=10.0).contains(&p.a) && p.s.abs() > s_limit)
        .copied()
        .collect()
}

/// Period of the Clifford geodesic's linearized radial oscillation, `π √(a²+1) / a`.
pub fn jacobi_period(a: f64) -> f64 {
    2.0 * PI / shooting::jacobi_frequency(a)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_instants() {
        let one = instants(1);
        assert_eq!(one.len(), 1);
        assert!((one[0].a_jk - 1.0 / 3f64.sqrt()).abs() < 1e-15);
        let two = instants(2);
        let values: Vec<f64> = two.iter().map(|i| i.a_jk).collect();
        let want = [
            0.5 / 3.75f64.sqrt(),
            1.0 / 3f64.sqrt(),
            1.5 / 1.75f64.sqrt(),
        ];
        for (v, w) in values.iter().zip(&want) {
            assert!((v - w).abs() < 1e-15);
        }
        assert_eq!(instants(3).len(), 7);
        assert!(instants(12).iter().all(|i| (i.a_jk - 1.0).abs() > 1e-3));
    }

    #[test]
    fn rejects_non_coprime_labels() {
        assert!(BifurcationInstant::new(2, 4).is_err());
        assert!(BifurcationInstant::new(4, 2).is_err());
        assert!(BifurcationInstant::new(0, 1).is_err());
    }

    #[test]
    fn eigenvalue_zeros() {
        assert!(jacobi_eigenvalue(1.0 / 3f64.sqrt(), 1, 1, 1, 0).abs() < 1e-14);
        assert!(jacobi_eigenvalue(3f64.sqrt(), 1, 1, 0, 1).abs() < 1e-14);
        assert!(jacobi_eigenvalue(3f64.sqrt(), 1, 1, 0, -1).abs() < 1e-14);
        assert!(jacobi_eigenvalue(1.0, 1, 1, 1, 1).abs() < 1e-14);
        assert!(jacobi_eigenvalue(1.0, 1, 1, -1, 1).abs() < 1e-14);
        for inst in instants(5) {
            let lam = jacobi_eigenvalue(inst.a_jk, inst.k, 1, inst.j as i32, 0);
            assert!(lam.abs() < 1e-12, "{inst:?}");
        }
    }

    #[test]
    fn jacobi_data_table() {
        let g = EllipsoidGeometry::new(0.5).unwrap();
        let data = JacobiData::new(&g, 2, 1, 2, 1);
        assert_eq!(data.eigenvalues.len(), 15);
        assert!((data.radial(0.0) - g.beta_prime(0.0)).abs() < 1e-15);
        assert!((jacobi_period(0.5) - PI * 1.25f64.sqrt() / 0.5).abs() < 1e-12);
    }

    #[test]
    fn reflection_fixes_trivial_root() {
        let g = EllipsoidGeometry::new(0.8).unwrap();
        let r = iota_k(&g, 0.0, 2, &FlowConfig::default()).unwrap();
        assert!(r.s_reflected.abs() < 1e-12);
    }
}
