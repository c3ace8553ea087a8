mod config;

use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde::Serialize;

use cliffbif::acceptance::{Suite, SuiteConfig, CRITERIA};
use cliffbif::bifurcation::{
    self, continue_branch, iota_k, BifurcationInstant, Branch, Direction, LabeledBranch,
    Termination,
};
use cliffbif::export::{self, write_text, BranchFile};
use cliffbif::flow::{self, S_LIMIT};
use cliffbif::lift::{self, embedding_check, torus_area};
use cliffbif::shooting::{
    self, classify_trajectory, GeodesicClassification, ShootingResult, CLOSED_TOL,
};
use cliffbif::EllipsoidGeometry;

use config::{usage, Format, RunConfig, Settings, UsageError};

#[derive(Parser)]
#[command(
    name = "cliffbif",
    version,
    about = "Closed geodesics and minimal tori in ellipsoids of revolution"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    settings: Settings,
}

#[derive(Subcommand)]
enum Command {
    /// Bifurcation instants a_jk for k <= kmax
    Instants,
    /// Integrate one geodesic to its k-th diameter crossing
    Shoot,
    /// Find closed geodesics at fixed a (all roots of f_k, or those on branch j)
    Solve,
    /// Continue the branch (j, k) in both directions from its instant
    Branch,
    /// Continue every branch with k <= kmax
    Diagram,
    /// Lift a closed geodesic to a torus mesh
    Lift,
    /// Run the acceptance suite
    Selftest {
        /// Criteria to run (all by default)
        ids: Vec<u32>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    let name = match &cli.command {
        Command::Instants => "instants",
        Command::Shoot => "shoot",
        Command::Solve => "solve",
        Command::Branch => "branch",
        Command::Diagram => "diagram",
        Command::Lift => "lift",
        Command::Selftest { .. } => "selftest",
    };
    let cfg = RunConfig::resolve(name, cli.settings)?;
    match cli.command {
        Command::Instants => cmd_instants(&cfg),
        Command::Shoot => cmd_shoot(&cfg),
        Command::Solve => cmd_solve(&cfg),
        Command::Branch => cmd_branch(&cfg),
        Command::Diagram => cmd_diagram(&cfg),
        Command::Lift => cmd_lift(&cfg),
        Command::Selftest { ids } => cmd_selftest(&cfg, &ids),
    }
}

fn geometry(cfg: &RunConfig, a: f64) -> Result<EllipsoidGeometry> {
    EllipsoidGeometry::build(a, cfg.quad_tol).context("building the reduced metric")
}

fn write(cfg: &RunConfig, file: &str, text: &str) -> Result<()> {
    let path = cfg.out.join(file);
    write_text(&path, text).with_context(|| format!("writing {}", path.display()))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn write_csv(cfg: &RunConfig, file: &str, body: &str) -> Result<()> {
    write(cfg, file, &(cfg.header() + body))
}

fn write_json<T: Serialize>(cfg: &RunConfig, file: &str, value: &T) -> Result<()> {
    write(cfg, file, &export::to_json(value)?)
}

#[derive(Serialize)]
struct WithConfig<'c, T> {
    config: &'c RunConfig,
    #[serde(flatten)]
    data: T,
}

fn cmd_instants(cfg: &RunConfig) -> Result<ExitCode> {
    let list = bifurcation::instants(cfg.kmax);
    for i in &list {
        println!("{:>3} {:>3}  {:.16}", i.j, i.k, i.a_jk);
    }
    if cfg.wants(Format::Csv) {
        write_csv(cfg, "instants.csv", &export::instants_csv(&list))?;
    }
    if cfg.wants(Format::Json) {
        #[derive(Serialize)]
        struct Data<'l> {
            instants: &'l [BifurcationInstant],
        }
        write_json(
            cfg,
            "instants.json",
            &WithConfig {
                config: cfg,
                data: Data { instants: &list },
            },
        )?;
    }
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct ShootReport {
    result: ShootingResult,
    clairaut0: f64,
    energy0: f64,
    max_clairaut_drift: f64,
    max_energy_drift: f64,
    crossings: Vec<flow::Crossing>,
    accepted_steps: usize,
    rejected_steps: usize,
}

fn cmd_shoot(cfg: &RunConfig) -> Result<ExitCode> {
    let a = cfg.require_a()?;
    let s = cfg.s.unwrap_or(0.0);
    let k = cfg.k.unwrap_or(1);
    let g = geometry(cfg, a)?;
    let (result, traj) =
        shooting::shoot(&g, s, k, &cfg.flow()).context("integrating the geodesic")?;
    println!("f_{k}(a={a}, s={s}) = {:.16e}", result.f_value);
    println!("ell_{k} = {:.16e}", result.ell_k);
    println!(
        "relative drift: clairaut {:.3e}, energy {:.3e}",
        traj.max_clairaut_drift, traj.max_energy_drift
    );
    if cfg.wants(Format::Csv) {
        let body = export::trajectory_csv(&g, &traj, 0.0, result.ell_k, cfg.samples);
        write_csv(cfg, "trajectory.csv", &body)?;
    }
    let report = ShootReport {
        result,
        clairaut0: traj.clairaut0,
        energy0: traj.energy0,
        max_clairaut_drift: traj.max_clairaut_drift,
        max_energy_drift: traj.max_energy_drift,
        crossings: traj.crossings.clone(),
        accepted_steps: traj.stats.accepted,
        rejected_steps: traj.stats.rejected,
    };
    write_json(
        cfg,
        "shoot.json",
        &WithConfig {
            config: cfg,
            data: report,
        },
    )?;
    Ok(ExitCode::SUCCESS)
}

#[derive(Serialize)]
struct SolvedRoot {
    result: ShootingResult,
    classification: GeodesicClassification,
    on_branch: Option<u32>,
}

fn label_of(class: &GeodesicClassification, k: u32) -> Option<u32> {
    let (w, c, x) = class.invariants();
    (class.is_closed && class.is_primitive && w == k && x + 1 == k && c % 2 == 0).then_some(c / 2)
}

fn solve_roots(cfg: &RunConfig, g: &EllipsoidGeometry, k: u32) -> Result<Vec<SolvedRoot>> {
    let flow = cfg.flow();
    let opts = cfg.root_options();
    let range = match cfg.s {
        Some(s) => {
            let h = 0.05;
            ((s - h).max(-0.95), (s + h).min(0.95))
        }
        None => (-0.95, 0.95),
    };
    let mut roots = Vec::new();
    for r in shooting::scan_roots(g, k, range, cfg.scan, &flow, &opts)? {
        if r.s.abs() < 1e-6 {
            continue;
        }
        let traj = flow::integrate(g, r.s, k, &flow)?;
        let class = classify_trajectory(g, &traj, k);
        let on_branch = label_of(&class, k);
        if cfg.j.is_none_or(|j| on_branch == Some(j)) {
            roots.push(SolvedRoot {
                result: r,
                classification: class,
                on_branch,
            });
        }
    }
    Ok(roots)
}

fn cmd_solve(cfg: &RunConfig) -> Result<ExitCode> {
    let a = cfg.require_a()?;
    let k = cfg.require_k()?;
    let g = geometry(cfg, a)?;
    let roots = solve_roots(cfg, &g, k)?;
    for r in &roots {
        println!(
            "s = {:+.16e}  f_{k} = {:+.3e}  ell = {:.10}  invariants {:?}  branch j = {}",
            r.result.s,
            r.result.f_value,
            r.result.ell_k,
            r.classification.invariants(),
            r.on_branch.map_or("-".to_string(), |j| j.to_string())
        );
    }
    #[derive(Serialize)]
    struct Data<'r> {
        roots: &'r [SolvedRoot],
    }
    write_json(
        cfg,
        "solve.json",
        &WithConfig {
            config: cfg,
            data: Data { roots: &roots },
        },
    )?;
    let Some(first) = roots.first() else {
        bail!("no nontrivial closed geodesic with k = {k} found at a = {a}");
    };
    if cfg.wants(Format::Csv) {
        let traj = flow::integrate(&g, first.result.s, k, &cfg.flow())?;
        let ell = first.result.ell_k;
        write_csv(
            cfg,
            "trajectory.csv",
            &export::trajectory_csv(&g, &traj, -ell, ell, cfg.samples),
        )?;
    }
    Ok(ExitCode::SUCCESS)
}

fn instant(cfg: &RunConfig) -> Result<BifurcationInstant> {
    let (j, k) = (cfg.require_j()?, cfg.require_k()?);
    BifurcationInstant::new(j, k).map_err(|e| usage!("label ({j}, {k}): {e}"))
}

fn tag(d: Direction) -> &'static str {
    match d {
        Direction::Positive => "pos",
        Direction::Negative => "neg",
    }
}

#[derive(Serialize)]
struct DirectionSummary {
    direction: Direction,
    points: usize,
    termination: Termination,
    a_end: Option<f64>,
    s_end: Option<f64>,
}

impl DirectionSummary {
    fn new(b: &Branch) -> Self {
        Self {
            direction: b.direction,
            points: b.points.len(),
            termination: b.termination.clone(),
            a_end: b.points.last().map(|p| p.a),
            s_end: b.points.last().map(|p| p.s),
        }
    }
}

#[derive(Serialize)]
struct ParityCheck {
    a: f64,
    s: f64,
    s_reflected: f64,
    f_reflected: f64,
    preserved: bool,
    expected_preserved: bool,
}

fn parity(cfg: &RunConfig, lb: &LabeledBranch) -> Result<Option<ParityCheck>> {
    let pts = &lb.positive.points;
    let Some(p) = pts.get(pts.len() / 2) else {
        return Ok(None);
    };
    let g = geometry(cfg, p.a)?;
    let r = iota_k(&g, p.s, lb.instant.k, &cfg.flow())?;
    Ok(Some(ParityCheck {
        a: p.a,
        s: p.s,
        s_reflected: r.s_reflected,
        f_reflected: r.f_reflected,
        preserved: r.preserves_side(),
        expected_preserved: lb.instant.j.is_multiple_of(2),
    }))
}

fn write_branch_files(cfg: &RunConfig, lb: &LabeledBranch) -> Result<()> {
    let (j, k) = (lb.instant.j, lb.instant.k);
    for b in [&lb.positive, &lb.negative] {
        let stem = format!("branch_{j}_{k}_{}", tag(b.direction));
        if cfg.wants(Format::Json) {
            write_json(cfg, &format!("{stem}.json"), &BranchFile::new(b, cfg))?;
        }
        if cfg.wants(Format::Csv) {
            write_csv(cfg, &format!("{stem}.csv"), &export::branch_csv(b))?;
        }
    }
    if cfg.wants(Format::Csv) {
        write_csv(
            cfg,
            &format!("branch_{j}_{k}.csv"),
            &export::labeled_branch_csv(lb),
        )?;
    }
    Ok(())
}

fn report_directions(lb: &LabeledBranch) -> bool {
    let mut failed = false;
    for b in [&lb.positive, &lb.negative] {
        let end = b.points.last().map_or("no points".to_string(), |p| {
            format!("ends at a = {:.6}, s = {:+.6}", p.a, p.s)
        });
        println!(
            "({},{}) {:?}: {} points, {:?}, {end}",
            lb.instant.j,
            lb.instant.k,
            b.direction,
            b.points.len(),
            b.termination
        );
        failed |= matches!(b.termination, Termination::Failure(_));
    }
    failed
}

fn cmd_branch(cfg: &RunConfig) -> Result<ExitCode> {
    let inst = instant(cfg)?;
    let cc = cfg.continuation(inst.a_jk);
    let (positive, negative) = if cfg.threads > 1 {
        std::thread::scope(|scope| {
            let p = scope.spawn(|| continue_branch(&inst, Direction::Positive, &cc));
            let n = continue_branch(&inst, Direction::Negative, &cc);
            (p.join().expect("continuation thread"), n)
        })
    } else {
        (
            continue_branch(&inst, Direction::Positive, &cc),
            continue_branch(&inst, Direction::Negative, &cc),
        )
    };
    let lb = LabeledBranch {
        instant: inst,
        positive,
        negative,
    };
    let failed = report_directions(&lb);
    write_branch_files(cfg, &lb)?;
    let parity = parity(cfg, &lb)?;
    if let Some(p) = &parity {
        println!(
            "iota_{}: s = {:+.6} -> {:+.6}, side {} (expected {})",
            inst.k,
            p.s,
            p.s_reflected,
            if p.preserved { "preserved" } else { "swapped" },
            if p.expected_preserved {
                "preserved"
            } else {
                "swapped"
            }
        );
    }
    #[derive(Serialize)]
    struct Data {
        j: u32,
        k: u32,
        a_jk: f64,
        expected_invariants: (u32, u32, u32),
        directions: [DirectionSummary; 2],
        parity: Option<ParityCheck>,
    }
    let data = Data {
        j: inst.j,
        k: inst.k,
        a_jk: inst.a_jk,
        expected_invariants: inst.expected_invariants(),
        directions: [
            DirectionSummary::new(&lb.positive),
            DirectionSummary::new(&lb.negative),
        ],
        parity,
    };
    write_json(
        cfg,
        &format!("branch_{}_{}_summary.json", inst.j, inst.k),
        &WithConfig { config: cfg, data },
    )?;
    Ok(if failed {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    })
}

fn cmd_diagram(cfg: &RunConfig) -> Result<ExitCode> {
    let list = bifurcation::instants(cfg.kmax);
    let labels: Vec<(u32, u32)> = list.iter().map(|i| (i.j, i.k)).collect();
    let lowest = list.first().map_or(0.5, |i| i.a_jk);
    let cc = cfg.continuation(lowest);
    let diagram = bifurcation::diagram(&labels, &cc, cfg.threads)?;
    let mut failed = false;
    for lb in &diagram.branches {
        failed |= report_directions(lb);
        write_branch_files(cfg, lb)?;
    }
    if cfg.wants(Format::Csv) {
        let mut trivial = String::from("a,s,j,k\n");
        for &(a, s) in &diagram.trivial {
            trivial.push_str(&format!(
                "{},{},0,0\n",
                export::fmt_f64(a),
                export::fmt_f64(s)
            ));
        }
        write_csv(cfg, "trivial.csv", &trivial)?;
        write_csv(cfg, "diagram.csv", &export::diagram_csv(&diagram))?;
    }
    println!(
        "minimum distance between branches {:.3e} ({})",
        diagram.min_distance,
        if diagram.disjoint {
            "disjoint"
        } else {
            "NOT disjoint"
        }
    );
    #[derive(Serialize)]
    struct Entry {
        j: u32,
        k: u32,
        a_jk: f64,
        directions: [DirectionSummary; 2],
    }
    #[derive(Serialize)]
    struct Data {
        branches: Vec<Entry>,
        min_distance: Option<f64>,
        disjoint: bool,
    }
    let data = Data {
        branches: diagram
            .branches
            .iter()
            .map(|lb| Entry {
                j: lb.instant.j,
                k: lb.instant.k,
                a_jk: lb.instant.a_jk,
                directions: [
                    DirectionSummary::new(&lb.positive),
                    DirectionSummary::new(&lb.negative),
                ],
            })
            .collect(),
        min_distance: diagram
            .min_distance
            .is_finite()
            .then_some(diagram.min_distance),
        disjoint: diagram.disjoint,
    };
    write_json(cfg, "diagram.json", &WithConfig { config: cfg, data })?;
    Ok(if failed {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    })
}

/// A root of `f_k` near `s`, widening the search bracket geometrically.
fn polish(cfg: &RunConfig, g: &EllipsoidGeometry, s: f64, k: u32) -> Result<f64> {
    let flow = cfg.flow();
    let f = |s: f64| -> Result<f64> { Ok(shooting::f_k(g, s, k, &flow)?.f_value) };
    let f0 = f(s)?;
    if f0.abs() <= CLOSED_TOL {
        return Ok(s);
    }
    let mut h = 1e-4;
    while h < 0.5 {
        for other in [s - h, s + h] {
            if other.abs() < S_LIMIT && (f(other)? > 0.0) != (f0 > 0.0) {
                let bracket = if other < s { (other, s) } else { (s, other) };
                return Ok(shooting::find_root_with(g, k, bracket, &flow, &cfg.root_options())?.s);
            }
        }
        h *= 2.0;
    }
    bail!("no closed geodesic with k = {k} near s = {s}")
}

fn cmd_lift(cfg: &RunConfig) -> Result<ExitCode> {
    let a = cfg.require_a()?;
    let k = cfg.k.unwrap_or(1);
    let g = geometry(cfg, a)?;
    let s = match (cfg.s, cfg.j) {
        (Some(s), _) => polish(cfg, &g, s, k)?,
        (None, Some(j)) => {
            let roots = solve_roots(cfg, &g, k)?;
            let best = roots
                .iter()
                .filter(|r| r.on_branch == Some(j))
                .max_by(|x, y| x.result.s.total_cmp(&y.result.s));
            match best {
                Some(r) => r.result.s,
                None => bail!("no root on the branch ({j}, {k}) at a = {a}"),
            }
        }
        (None, None) => 0.0,
    };
    let flow = cfg.flow();
    let traj = flow::integrate(&g, s, k, &flow)?;
    let class = classify_trajectory(&g, &traj, k);
    let mesh = lift::lift(&g, &traj, k, cfg.n_t, cfg.n_psi, cfg.j)?;
    let area = torus_area(&g, &traj, k)?;
    let mesh_area = mesh.area();
    let emb = embedding_check(&traj, k, 2048)?;
    println!(
        "a = {a}, s = {s:+.16e}, k = {k}, invariants {:?}",
        class.invariants()
    );
    println!(
        "area = {area:.16e} (mesh {mesh_area:.10e}, relative gap {:.2e})",
        (mesh_area - area).abs() / area
    );
    println!(
        "embedded = {}, {} crossing(s), max residual {:.2e}",
        emb.embedded,
        emb.crossing_points.len(),
        mesh.max_residual()
    );
    if cfg.wants(Format::Obj) {
        write(
            cfg,
            "torus.obj",
            &(cfg.header() + &export::mesh_obj(&mesh, cfg.drop_axis)),
        )?;
    }
    if cfg.wants(Format::Json) {
        write(cfg, "torus.json", &export::mesh_json(&mesh)?)?;
    }
    #[derive(Serialize)]
    struct Data {
        a: f64,
        s: f64,
        k: u32,
        classification: GeodesicClassification,
        area: f64,
        mesh_area: f64,
        max_residual: f64,
        closure_gap: f64,
        embedded: bool,
        crossing_points: Vec<[f64; 2]>,
    }
    let data = Data {
        a,
        s,
        k,
        classification: class,
        area,
        mesh_area,
        max_residual: mesh.max_residual(),
        closure_gap: mesh.closure_gap,
        embedded: emb.embedded,
        crossing_points: emb.crossing_points,
    };
    write_json(cfg, "lift.json", &WithConfig { config: cfg, data })?;
    Ok(ExitCode::SUCCESS)
}

fn cmd_selftest(cfg: &RunConfig, ids: &[u32]) -> Result<ExitCode> {
    if let Some(bad) = ids.iter().find(|i| !CRITERIA.contains(i)) {
        return Err(usage!("no acceptance criterion {bad}"));
    }
    let ids: Vec<u32> = if ids.is_empty() {
        CRITERIA.to_vec()
    } else {
        ids.to_vec()
    };
    let dir = cfg.out.join("selftest");
    std::fs::create_dir_all(&dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut suite = Suite::new(SuiteConfig {
        quad_tol: cfg.quad_tol,
        flow: cfg.flow(),
        threads: cfg.threads,
        seed: cfg.seed,
        out_dir: Some(dir),
    });
    let mut failed = 0;
    for id in &ids {
        let report = suite.run(*id);
        println!("{report}");
        failed += usize::from(!report.passed);
    }
    println!("{} passed, {failed} failed", ids.len() - failed);
    Ok(if failed > 0 {
        ExitCode::from(1)
    } else {
        ExitCode::SUCCESS
    })
}
