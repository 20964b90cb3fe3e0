//! Probe: k = 1 continuation rates on per-level jittered (non-nested) disc
//! meshes, emulating independent remeshing instead of nested refinement.

use std::collections::BTreeSet;
use std::sync::Arc;

use ucfem::analytic::Field;
use ucfem::continuation::{beta_schedule, solve_uc, UcProblem};
use ucfem::fem::{error_norms, CoefficientField, MixedSpaces};
use ucfem::mesh::{
    mesh_size, tag_triangles, unit_disc_mesh, RegionSpec, TriMesh, REGION_OMIN,
};
use ucfem::solver::SaddleSolver;

fn mixed(seed: u64) -> impl FnMut() -> f64 {
    let mut state = seed.wrapping_mul(0x9E3779B97F4A7C15).wrapping_add(1);
    move || {
        state ^= state << 13;
        state ^= state >> 7;
        state ^= state << 17;
        (state >> 11) as f64 / (1u64 << 53) as f64
    }
}

fn jitter(mesh: &TriMesh, amp: f64, seed: u64) -> TriMesh {
    let mut boundary = BTreeSet::new();
    for &e in &mesh.boundary_edges {
        let [a, b] = mesh.edges[e];
        boundary.insert(a);
        boundary.insert(b);
    }
    let mut min_edge = vec![f64::INFINITY; mesh.vertices.len()];
    for &[a, b] in &mesh.edges {
        let (pa, pb) = (mesh.vertices[a], mesh.vertices[b]);
        let len = ((pa[0] - pb[0]).powi(2) + (pa[1] - pb[1]).powi(2)).sqrt();
        min_edge[a] = min_edge[a].min(len);
        min_edge[b] = min_edge[b].min(len);
    }
    let mut rng = mixed(seed);
    let vertices: Vec<[f64; 2]> = mesh
        .vertices
        .iter()
        .enumerate()
        .map(|(i, &p)| {
            if boundary.contains(&i) {
                return p;
            }
            let phi = 2.0 * std::f64::consts::PI * rng();
            let r = amp * min_edge[i] * rng();
            [p[0] + r * phi.cos(), p[1] + r * phi.sin()]
        })
        .collect();
    TriMesh::from_raw(vertices, mesh.triangles.clone(), mesh.on_disc)
}

fn main() {
    let exact = Field::Harmonic { m: 3, odd: true };
    let amp: f64 = std::env::args()
        .nth(1)
        .and_then(|s| s.parse().ok())
        .unwrap_or(0.25);
    let levels: usize = std::env::args()
        .nth(2)
        .and_then(|s| s.parse().ok())
        .unwrap_or(4);
    println!("jitter amplitude {amp}, {levels} levels");
    let mut errs = Vec::new();
    let mut hs = Vec::new();
    for level in 0..levels {
        let h_target = 0.17 / (1 << level) as f64;
        let base = unit_disc_mesh(h_target).expect("disc mesh");
        let mut mesh = jitter(&base, amp, 1000 + level as u64);
        let bad = mesh.validate();
        assert!(bad.is_empty(), "level {level}: {bad:?}");
        mesh = tag_triangles(mesh, RegionSpec::omega_disc());
        mesh = tag_triangles(mesh, RegionSpec::omega_minus());
        let mesh = Arc::new(mesh);
        let h = mesh_size(&mesh);
        let spaces = MixedSpaces::build(&mesh, 1).expect("spaces");
        let gamma = CoefficientField::constant(spaces.v.clone(), 1.0);
        let problem = UcProblem {
            spaces: &spaces,
            gamma: &gamma,
            q: &exact,
            f: &Field::Constant(0.0),
            neumann: None,
            alpha: 1000.0,
            beta: beta_schedule(1e-3, h, 0.0, 1),
        };
        let mut solver = SaddleSolver::new();
        let (triple, report) = solve_uc(&problem, &mut solver).expect("solve");
        let err = error_norms(&triple.u, &exact, Some(REGION_OMIN)).l2;
        println!(
            "level {level}: h = {h:.5}, err = {err:.6e}, residual = {:.1e}",
            report.rel_residual
        );
        hs.push(h);
        errs.push(err);
    }
    for i in 1..errs.len() {
        let rate = (errs[i - 1] / errs[i]).ln() / (hs[i - 1] / hs[i]).ln();
        println!("pairwise rate {}->{}: {rate:.3}", i - 1, i);
    }
}
