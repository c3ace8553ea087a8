//! Text output: CSV tables, JSON documents and OBJ meshes.
//!
//! Floats in CSV and OBJ are written with 17 significant digits so reruns
//! can be diffed byte for byte.

use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::bifurcation::{BifurcationInstant, Branch, BranchPoint, Diagram};
use crate::error::Result;
use crate::flow::{clairaut, energy, Trajectory};
use crate::lift::TorusMesh;
use crate::profile::EllipsoidGeometry;

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

fn csv_row(out: &mut String, values: &[f64]) {
    let row: Vec<String> = values.iter().map(|v| fmt_f64(*v)).collect();
    out.push_str(&row.join(","));
    out.push('\n');
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(text.as_bytes())?;
    Ok(())
}

pub fn instants_csv(instants: &[BifurcationInstant]) -> String {
    let mut out = String::from("j,k,a_jk\n");
    for i in instants {
        let _ = writeln!(out, "{},{},{}", i.j, i.k, fmt_f64(i.a_jk));
    }
    out
}

/// Rows `(t, rho, theta, rho_dot, theta_dot, clairaut_drift, energy_drift)` at
/// `n + 1` uniform times on `[t0, t1]`.
pub fn trajectory_csv(
    g: &EllipsoidGeometry,
    traj: &Trajectory,
    t0: f64,
    t1: f64,
    n: usize,
) -> String {
    let mut out = String::from("t,rho,theta,rho_dot,theta_dot,clairaut_drift,energy_drift\n");
    let c_scale = traj.clairaut0.abs().max(f64::MIN_POSITIVE);
    let e_scale = traj.energy0.abs().max(f64::MIN_POSITIVE);
    for st in traj.sample(t0, t1, n) {
        csv_row(
            &mut out,
            &[
                st.t,
                st.rho,
                st.theta,
                st.rho_dot,
                st.theta_dot,
                (clairaut(g, &st) - traj.clairaut0) / c_scale,
                (energy(g, &st) - traj.energy0) / e_scale,
            ],
        );
    }
    out
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BranchFile<C> {
    pub j: u32,
    pub k: u32,
    pub a_jk: f64,
    pub direction: crate::bifurcation::Direction,
    pub termination: crate::bifurcation::Termination,
    pub config: C,
    pub points: Vec<BranchPoint>,
}

impl<C: Clone> BranchFile<C> {
    pub fn new(branch: &Branch, config: &C) -> Self {
        Self {
            j: branch.j,
            k: branch.k,
            a_jk: branch.a_jk,
            direction: branch.direction,
            termination: branch.termination.clone(),
            config: config.clone(),
            points: branch.points.clone(),
        }
    }
}

pub fn to_json<T: Serialize>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn branch_csv(branch: &Branch) -> String {
    let mut out =
        String::from("a,s,ell_k,f_residual,winding,clifford_intersections,self_intersections\n");
    for p in &branch.points {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            fmt_f64(p.a),
            fmt_f64(p.s),
            fmt_f64(p.ell_k),
            fmt_f64(p.f_residual),
            p.winding,
            p.clifford_intersections,
            p.self_intersections
        );
    }
    out
}

/// Merged `(a, s, j, k)` table. The trivial branch is written with `j = k = 0`;
/// each labeled branch runs from its `s < 0` end through the instant to its `s > 0` end.
pub fn diagram_csv(diagram: &Diagram) -> String {
    let mut out = String::from("a,s,j,k\n");
    for &(a, s) in &diagram.trivial {
        let _ = writeln!(out, "{},{},0,0", fmt_f64(a), fmt_f64(s));
    }
    for lb in &diagram.branches {
        out.push_str(&labeled_rows(lb));
    }
    out
}

pub fn labeled_branch_csv(lb: &crate::bifurcation::LabeledBranch) -> String {
    let mut out = String::from("a,s,j,k\n");
    out.push_str(&labeled_rows(lb));
    out
}

fn labeled_rows(lb: &crate::bifurcation::LabeledBranch) -> String {
    let (j, k) = (lb.instant.j, lb.instant.k);
    let mut out = String::new();
    let rows = lb
        .negative
        .points
        .iter()
        .rev()
        .map(|p| (p.a, p.s))
        .chain(std::iter::once((lb.instant.a_jk, 0.0)))
        .chain(lb.positive.points.iter().map(|p| (p.a, p.s)));
    for (a, s) in rows {
        let _ = writeln!(out, "{},{},{j},{k}", fmt_f64(a), fmt_f64(s));
    }
    out
}

/// OBJ of the mesh projected to ℝ³ by dropping coordinate `drop_axis`
/// (0 = Re z, 1 = Im z, 2 = Re w, 3 = Im w).
pub fn mesh_obj(mesh: &TorusMesh, drop_axis: usize) -> String {
    let mut out = String::new();
    let l = &mesh.label;
    let _ = writeln!(
        out,
        "# S1-invariant torus: a = {}, s = {}, k = {}, dropped axis {}",
        fmt_f64(l.a),
        fmt_f64(l.s),
        l.k,
        drop_axis
    );
    for v in &mesh.vertices {
        let kept: Vec<String> = (0..4)
            .filter(|&i| i != drop_axis)
            .map(|i| fmt_f64(v[i]))
            .collect();
        let _ = writeln!(out, "v {}", kept.join(" "));
    }
    for q in mesh.quads() {
        let _ = writeln!(out, "f {} {} {} {}", q[0] + 1, q[1] + 1, q[2] + 1, q[3] + 1);
    }
    out
}

#[derive(Serialize)]
struct MeshJson<'m> {
    label: &'m crate::lift::MeshLabel,
    n_t: usize,
    n_psi: usize,
    max_residual: f64,
    closure_gap: f64,
    vertices: &'m [[f64; 4]],
}

pub fn mesh_json(mesh: &TorusMesh) -> Result<String> {
    to_json(&MeshJson {
        label: &mesh.label,
        n_t: mesh.n_t,
        n_psi: mesh.n_psi,
        max_residual: mesh.max_residual(),
        closure_gap: mesh.closure_gap,
        vertices: &mesh.vertices,
    })
}

/// Reads every `*.json` branch file in `dir`, ignoring files that do not parse as one.
pub fn read_branch_points(dir: &Path) -> Result<Vec<BranchPoint>> {
    #[derive(Deserialize)]
    struct Points {
        points: Vec<BranchPoint>,
    }
    let mut out = Vec::new();
    let mut entries: Vec<_> = std::fs::read_dir(dir)?.filter_map(|e| e.ok()).collect();
    entries.sort_by_key(|e| e.path());
    for entry in entries {
        let path = entry.path();
        if path.extension().and_then(|e| e.to_str()) != Some("json") {
            continue;
        }
        let text = std::fs::read_to_string(&path)?;
        if let Ok(p) = serde_json::from_str::<Points>(&text) {
            out.extend(p.points);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seventeen_significant_digits() {
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
        assert_eq!(fmt_f64(-2.0), "-2.0000000000000000e0");
        let x = 1.0 / 3.0;
        assert_eq!(fmt_f64(x).parse::<f64>().unwrap(), x);
    }

    #[test]
    fn instants_table() {
        let csv = instants_csv(&crate::bifurcation::instants(3));
        assert_eq!(csv.lines().count(), 8);
        assert!(csv.starts_with("j,k,a_jk\n"));
    }
}
