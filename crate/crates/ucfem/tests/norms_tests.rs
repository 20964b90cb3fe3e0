//! Triple-norm components and error norms against analytic values.

use std::sync::Arc;

use ucfem::fem::{
    build_dofmap, error_norms, l2_norm, lagrange_interpolate, rt_interpolate, triple_norm,
    CoefficientField, ExactScalar, ExactVector, MixedSpaces, SpaceDescriptor,
};
use ucfem::mesh::{
    mesh_size, tag_triangles, unit_disc_mesh, unit_square_mesh, RegionPred, RegionSpec, TriMesh,
    REGION_OMEGA,
};

struct X;
impl ExactScalar for X {
    fn value(&self, p: [f64; 2]) -> f64 {
        p[0]
    }
    fn grad(&self, _p: [f64; 2]) -> [f64; 2] {
        [1.0, 0.0]
    }
}

struct Zero;
impl ExactScalar for Zero {
    fn value(&self, _p: [f64; 2]) -> f64 {
        0.0
    }
    fn grad(&self, _p: [f64; 2]) -> [f64; 2] {
        [0.0, 0.0]
    }
}

struct Ex;
impl ExactVector for Ex {
    fn value(&self, _p: [f64; 2]) -> [f64; 2] {
        [1.0, 0.0]
    }
}

fn tagged_square(n: usize) -> Arc<TriMesh> {
    Arc::new(tag_triangles(unit_square_mesh(n).unwrap(), RegionSpec {
        id: REGION_OMEGA,
        pred: RegionPred::All,
    }))
}

/// With z ≡ 1, interior jumps vanish and only the boundary facets contribute:
/// ‖z‖²_{1,h} = Σ_{e ⊂ ∂Ω} |e| / diam(T_e).
#[test]
fn multiplier_norm_of_constant_is_boundary_sum() {
    for mesh in [
        Arc::new(unit_square_mesh(2).unwrap()),
        Arc::new(unit_disc_mesh(0.6).unwrap()),
    ] {
        let spaces = MixedSpaces::build(&mesh, 1).unwrap();
        let gamma = CoefficientField::constant(
            build_dofmap(&mesh, SpaceDescriptor::lagrange(1)).unwrap(),
            1.0,
        );
        let off = spaces.offsets();
        let mut sol = vec![0.0; off[3]];
        for s in sol[off[2]..].iter_mut() {
            *s = 1.0;
        }
        let tn = triple_norm(&spaces, &gamma, 5.0, 0.25, &sol);
        let expected: f64 = mesh
            .boundary_edges
            .iter()
            .map(|&e| {
                let (t, _) = mesh.edge_tris[e][0].unwrap();
                mesh.edge_length(e) / mesh.tri_diameter(t)
            })
            .sum();
        assert!(
            (tn.z1h * tn.z1h - expected).abs() <= 1e-12 * expected,
            "z1h² = {} vs {expected}",
            tn.z1h * tn.z1h
        );
        assert!(tn.h1 == 0.0 && tn.omega == 0.0 && tn.mismatch == 0.0);
        assert!(tn.fluxbc == 0.0 && tn.div == 0.0);
        assert!((tn.total - tn.z1h).abs() <= 1e-15);
    }
}

/// u = x and σ = (1, 0) with γ = 1 on the tagged unit square: the mismatch
/// vanishes and every other component has a closed form.
#[test]
fn triple_norm_components_match_closed_forms() {
    let mesh = tagged_square(2);
    let spaces = MixedSpaces::build(&mesh, 1).unwrap();
    let gamma = CoefficientField::constant(
        build_dofmap(&mesh, SpaceDescriptor::lagrange(1)).unwrap(),
        1.0,
    );
    let (alpha, beta) = (3.0, 0.1);
    let u = lagrange_interpolate(&spaces.v, &X);
    let s = rt_interpolate(&spaces.rt, &Ex);
    let off = spaces.offsets();
    let mut sol = vec![0.0; off[3]];
    sol[..off[1]].copy_from_slice(&u.coeffs);
    sol[off[1]..off[2]].copy_from_slice(&s.coeffs);
    let tn = triple_norm(&spaces, &gamma, alpha, beta, &sol);

    // ‖x‖²_{H¹} = 1/3 + 1, ‖x‖²_ω = 1/3, ∮(σ·n)² = 2 (left and right sides).
    assert!((tn.h1.powi(2) - beta * (1.0 / 3.0 + 1.0)).abs() <= 1e-13);
    assert!((tn.omega.powi(2) - alpha / 3.0).abs() <= 1e-13);
    assert!(tn.mismatch <= 1e-13, "mismatch {}", tn.mismatch);
    assert!((tn.fluxbc.powi(2) - beta * 2.0).abs() <= 1e-13);
    assert!(tn.div.abs() <= 1e-13);
    assert!(tn.z1h == 0.0);
    let total_sq = tn.h1.powi(2) + tn.omega.powi(2) + tn.fluxbc.powi(2);
    assert!((tn.total.powi(2) - total_sq).abs() <= 1e-12);
}

/// The divergence component uses the global mesh size: σ = (x, y) has
/// ∇·σ = 2, so the component is 4 h² |Ω|.
#[test]
fn divergence_component_uses_global_mesh_size() {
    struct Radial;
    impl ExactVector for Radial {
        fn value(&self, p: [f64; 2]) -> [f64; 2] {
            p
        }
    }
    let mesh = tagged_square(3);
    let spaces = MixedSpaces::build(&mesh, 1).unwrap();
    let gamma = CoefficientField::constant(
        build_dofmap(&mesh, SpaceDescriptor::lagrange(1)).unwrap(),
        1.0,
    );
    let s = rt_interpolate(&spaces.rt, &Radial);
    let off = spaces.offsets();
    let mut sol = vec![0.0; off[3]];
    sol[off[1]..off[2]].copy_from_slice(&s.coeffs);
    let tn = triple_norm(&spaces, &gamma, 1.0, 0.0, &sol);
    let h = mesh_size(&mesh);
    assert!((tn.div.powi(2) - 4.0 * h * h).abs() <= 1e-13, "div² = {}", tn.div.powi(2));
}

#[test]
fn error_norms_against_analytic_fields() {
    let mesh = tagged_square(2);
    let dm = build_dofmap(&mesh, SpaceDescriptor::lagrange(1)).unwrap();
    let u = lagrange_interpolate(&dm, &X);
    let against_self = error_norms(&u, &X, None);
    assert!(against_self.l2 <= 1e-14 && against_self.h1_semi <= 1e-14);
    let against_zero = error_norms(&u, &Zero, None);
    assert!((against_zero.l2 - (1.0f64 / 3.0).sqrt()).abs() <= 1e-13);
    assert!((against_zero.h1_semi - 1.0).abs() <= 1e-13);
    assert!((l2_norm(&u, None) - (1.0f64 / 3.0).sqrt()).abs() <= 1e-13);
}

#[test]
fn error_norms_respect_region_restriction() {
    // Tag the left half x <= 0.5 of the unit square.
    let mesh = Arc::new(tag_triangles(unit_square_mesh(2).unwrap(), RegionSpec {
        id: 9,
        pred: RegionPred::AnnulusSectorX {
            r2_min: f64::NEG_INFINITY,
            r2_max: f64::INFINITY,
            x_max: 0.5,
        },
    }));
    let dm = build_dofmap(&mesh, SpaceDescriptor::lagrange(1)).unwrap();
    let ones = ucfem::fem::FeFunction::new(dm, vec![1.0; mesh.vertices.len()]);
    // ∫_{left half} 1 = 1/2.
    let e = error_norms(&ones, &Zero, Some(9));
    assert!((e.l2 - 0.5f64.sqrt()).abs() <= 1e-13, "restricted l2 {}", e.l2);
    assert!((l2_norm(&ones, Some(9)) - 0.5f64.sqrt()).abs() <= 1e-13);
    // An empty tag integrates to zero.
    assert_eq!(l2_norm(&ones, Some(77)), 0.0);
}

#[test]
fn triple_norm_is_deterministic_across_parallel_modes() {
    let mesh = Arc::new(tag_triangles(
        unit_disc_mesh(0.5).unwrap(),
        RegionSpec::omega_disc(),
    ));
    let spaces = MixedSpaces::build(&mesh, 2).unwrap();
    let gamma = CoefficientField::constant(
        build_dofmap(&mesh, SpaceDescriptor::lagrange(1)).unwrap(),
        1.3,
    );
    let off = spaces.offsets();
    let sol: Vec<f64> = (0..off[3]).map(|i| ((i * 13 + 5) % 17) as f64 / 17.0 - 0.4).collect();
    ucfem::par::set_parallel(true);
    let a = triple_norm(&spaces, &gamma, 11.0, 2e-3, &sol);
    ucfem::par::set_parallel(false);
    let b = triple_norm(&spaces, &gamma, 11.0, 2e-3, &sol);
    ucfem::par::set_parallel(true);
    assert_eq!(a.total, b.total);
    assert_eq!(a.z1h, b.z1h);
    assert_eq!(a.mismatch, b.mismatch);
}
