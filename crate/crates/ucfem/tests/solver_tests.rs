//! Direct solver correctness against dense factorizations and exact solves.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ucfem::fem::{
    build_dofmap, CoefficientField, DatasetData, ExactScalar, FeFunction, MixedSpaces,
    SpaceDescriptor,
};
use ucfem::mesh::{
    tag_triangles, unit_disc_mesh, unit_square_mesh, RegionPred, RegionSpec, REGION_OMEGA,
};
use ucfem::solver::{forward_dirichlet, SaddleSolver, TARGET_REL_RESIDUAL};
use ucfem::sparse::CsrMatrix;

struct Const(f64);
impl ExactScalar for Const {
    fn value(&self, _p: [f64; 2]) -> f64 {
        self.0
    }
    fn grad(&self, _p: [f64; 2]) -> [f64; 2] {
        [0.0, 0.0]
    }
}

struct Linear;
impl ExactScalar for Linear {
    fn value(&self, p: [f64; 2]) -> f64 {
        p[0]
    }
    fn grad(&self, _p: [f64; 2]) -> [f64; 2] {
        [1.0, 0.0]
    }
}

struct Sin3;
impl ExactScalar for Sin3 {
    // r³ sin(3θ) = 3x²y - y³, a harmonic polynomial.
    fn value(&self, p: [f64; 2]) -> f64 {
        3.0 * p[0] * p[0] * p[1] - p[1].powi(3)
    }
    fn grad(&self, p: [f64; 2]) -> [f64; 2] {
        [6.0 * p[0] * p[1], 3.0 * p[0] * p[0] - 3.0 * p[1] * p[1]]
    }
}

#[test]
fn solves_identity() {
    let mut t = vec![(0usize, 0usize, 1.0), (1, 1, 1.0), (2, 2, 1.0)];
    let m = CsrMatrix::from_triplets(3, 3, &mut t);
    let (x, report) = SaddleSolver::new()
        .solve_symmetric(&m, &[3.0, -1.0, 0.5], &[1, 1, 1])
        .unwrap();
    assert!((x[0] - 3.0).abs() <= 1e-14);
    assert!((x[1] + 1.0).abs() <= 1e-14);
    assert!((x[2] - 0.5).abs() <= 1e-14);
    assert!(report.rel_residual <= TARGET_REL_RESIDUAL);
}

#[test]
fn solves_indefinite_swap_matrix() {
    // [[0,1],[1,0]] x = (1,2) has the solution (2,1); a zero diagonal forces
    // the sign-aware regularization/pivoting path.
    let mut t = vec![(0usize, 1usize, 1.0), (1, 0, 1.0)];
    let m = CsrMatrix::from_triplets(2, 2, &mut t);
    let (x, report) = SaddleSolver::new().solve_symmetric(&m, &[1.0, 2.0], &[1, -1]).unwrap();
    assert!((x[0] - 2.0).abs() <= 1e-9, "x = {x:?}, report = {report:?}");
    assert!((x[1] - 1.0).abs() <= 1e-9);
}

/// Random nodal fields for γ, q, f; the data region keeps u pinned, so the
/// saddle matrix must stay nonsingular for every such draw.
fn random_p1(dm: &Arc<ucfem::fem::DofMap>, rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> FeFunction {
    let coeffs: Vec<f64> = (0..dm.ndofs).map(|_| rng.random_range(lo..hi)).collect();
    FeFunction::new(dm.clone(), coeffs)
}

#[test]
fn random_saddle_systems_match_dense_lu() {
    // Data region = the whole square, so the system is small enough for a
    // trustworthy dense LU oracle yet zero-measure ω pitfalls cannot occur.
    let mesh = Arc::new(tag_triangles(
        unit_square_mesh(2).unwrap(),
        RegionSpec { id: REGION_OMEGA, pred: RegionPred::All },
    ));
    let spaces = MixedSpaces::build(&mesh, 1).unwrap();
    let v1 = build_dofmap(&mesh, SpaceDescriptor::lagrange(1)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let mut solver = SaddleSolver::new();
    for trial in 0..5 {
        let coeffs: Vec<f64> = (0..v1.ndofs).map(|_| rng.random_range(0.5..2.0)).collect();
        let gamma = CoefficientField::new(v1.clone(), coeffs, 1e-6);
        let q = random_p1(&v1, &mut rng, -1.0, 1.0);
        let f = random_p1(&v1, &mut rng, -1.0, 1.0);
        let data = DatasetData { q_tilde: &q, f_tilde: &f, neumann: None };
        let sys = ucfem::fem::assemble_saddle(&spaces, &gamma, 1.0, 0.0, &data).unwrap();
        let (x, report) = solver.solve(&sys).unwrap();
        assert!(report.rel_residual <= TARGET_REL_RESIDUAL, "trial {trial}: {report:?}");
        if trial > 0 {
            assert!(report.reused_symbolic, "trial {trial} should reuse the symbolic analysis");
        }

        let n = sys.matrix.n_rows;
        let a = nalgebra::DMatrix::from_fn(n, n, |i, j| {
            let row = &sys.matrix.col_idx[sys.matrix.row_ptr[i]..sys.matrix.row_ptr[i + 1]];
            match row.binary_search(&j) {
                Ok(k) => sys.matrix.values[sys.matrix.row_ptr[i] + k],
                Err(_) => 0.0,
            }
        });
        let b = nalgebra::DVector::from_column_slice(&sys.rhs);
        let x_dense = a.lu().solve(&b).expect("dense LU");
        let num: f64 = x.iter().zip(x_dense.iter()).map(|(p, q)| (p - q) * (p - q)).sum();
        let den: f64 = x_dense.iter().map(|q| q * q).sum();
        assert!(
            (num / den).sqrt() <= 1e-8,
            "trial {trial}: deviation from dense solution {:.3e}",
            (num / den).sqrt()
        );
    }
}

#[test]
fn random_saddle_systems_on_disc_certify_residuals() {
    // Coarse disc with the annular data region; the α mass on ω is the only
    // term pinning u, so this exercises genuine unique-continuation systems.
    let mesh = Arc::new(tag_triangles(
        unit_disc_mesh(0.5).unwrap(),
        RegionSpec::omega_disc(),
    ));
    assert!(mesh.region_area(REGION_OMEGA) > 0.0);
    let spaces = MixedSpaces::build(&mesh, 1).unwrap();
    let v1 = build_dofmap(&mesh, SpaceDescriptor::lagrange(1)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let mut solver = SaddleSolver::new();
    for trial in 0..5 {
        let coeffs: Vec<f64> = (0..v1.ndofs).map(|_| rng.random_range(0.5..2.0)).collect();
        let gamma = CoefficientField::new(v1.clone(), coeffs, 1e-6);
        let q = random_p1(&v1, &mut rng, -1.0, 1.0);
        let f = random_p1(&v1, &mut rng, -1.0, 1.0);
        let data = DatasetData { q_tilde: &q, f_tilde: &f, neumann: None };
        let sys = ucfem::fem::assemble_saddle(&spaces, &gamma, 1.0, 0.0, &data).unwrap();
        let (x, report) = solver.solve(&sys).unwrap();
        assert!(report.rel_residual <= TARGET_REL_RESIDUAL, "trial {trial}: {report:?}");
        assert!(x.iter().all(|v| v.is_finite()), "trial {trial}: non-finite solution entries");
    }
}

#[test]
fn symbolic_cache_resets_on_new_pattern() {
    let mut solver = SaddleSolver::new();
    let mut t1 = vec![(0usize, 0usize, 2.0), (1, 1, 3.0)];
    let m1 = CsrMatrix::from_triplets(2, 2, &mut t1);
    let (_, r1) = solver.solve_symmetric(&m1, &[1.0, 1.0], &[1, 1]).unwrap();
    assert!(!r1.reused_symbolic);
    let (_, r2) = solver.solve_symmetric(&m1, &[2.0, 2.0], &[1, 1]).unwrap();
    assert!(r2.reused_symbolic);
    let mut t3 = vec![(0usize, 0usize, 2.0), (0, 1, 1.0), (1, 0, 1.0), (1, 1, 3.0)];
    let m3 = CsrMatrix::from_triplets(2, 2, &mut t3);
    let (_, r3) = solver.solve_symmetric(&m3, &[1.0, 1.0], &[1, 1]).unwrap();
    assert!(!r3.reused_symbolic);
}

#[test]
fn forward_dirichlet_reproduces_linear_solution() {
    // With γ = 1 + x and u = x: -∇·(γ∇u) = -∂x(1 + x) = -1.
    let mesh = Arc::new(unit_square_mesh(4).unwrap());
    let dm = build_dofmap(&mesh, SpaceDescriptor::lagrange(1)).unwrap();
    let coeffs: Vec<f64> = mesh.vertices.iter().map(|p| 1.0 + p[0]).collect();
    let gamma = CoefficientField::new(dm.clone(), coeffs, 1e-6);
    let u = forward_dirichlet(&dm, &gamma, &Const(-1.0), &Linear).unwrap();
    let nodes = dm.lagrange_nodes();
    for (i, &p) in nodes.iter().enumerate() {
        assert!(
            (u.coeffs[i] - p[0]).abs() <= 1e-10,
            "node {i} at {p:?}: {} vs {}",
            u.coeffs[i],
            p[0]
        );
    }
}

#[test]
fn forward_dirichlet_converges_quadratically() {
    // Harmonic exact solution, γ = 1, f = 0; P1 converges at O(h²) in L².
    let coarse = Arc::new(unit_disc_mesh(0.4).unwrap());
    let fine = Arc::new(ucfem::mesh::refine_uniform(&coarse));
    let mut errs = Vec::new();
    for mesh in [coarse, fine] {
        let dm = build_dofmap(&mesh, SpaceDescriptor::lagrange(1)).unwrap();
        let gamma = CoefficientField::constant(dm.clone(), 1.0);
        let u = forward_dirichlet(&dm, &gamma, &Const(0.0), &Sin3).unwrap();
        let e = ucfem::fem::error_norms(&u, &Sin3, None);
        errs.push(e.l2);
    }
    let ratio = errs[0] / errs[1];
    assert!(
        ratio >= 3.0,
        "expected near-quadratic decay, got errors {errs:?} (ratio {ratio:.2})"
    );
}
