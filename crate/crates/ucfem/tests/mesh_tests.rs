use proptest::prelude::*;
use ucfem::mesh::{
    mesh_size, read_ascii, refine_uniform, tag_boundary_edges, tag_triangles, unit_disc_mesh,
    unit_square_mesh, write_ascii, MeshError, RegionPred, RegionSpec, TriMesh, BDRY_NEUMANN,
    REGION_OMEGA,
};

// Exact area of ω = {0.75 < x²+y² < 1, x < 0.5}: the annulus area π/4 minus
// the cap {x ≥ 1/2}, whose polar-coordinate area is
// ∫_{√3/2}^{1} 2 acos(1/(2r)) r dr = π/3 + √2/4 - √3/4 - (3/4) acos(√3/3).
const OMEGA_AREA: f64 = 0.5341473870931781;

#[test]
fn square_counts() {
    let m1 = unit_square_mesh(1).unwrap();
    assert_eq!(m1.triangles.len(), 2);
    assert_eq!(m1.vertices.len(), 4);
    assert_eq!(m1.edges.len(), 5);
    let m2 = unit_square_mesh(2).unwrap();
    assert_eq!(m2.triangles.len(), 8);
    assert_eq!(m2.vertices.len(), 9);
    assert!(m2.validate().is_empty());
}

#[test]
fn square_rejects_zero() {
    assert!(matches!(unit_square_mesh(0), Err(MeshError::InvalidParam(_))));
}

#[test]
fn square_mesh_size_is_cell_diagonal() {
    let m = unit_square_mesh(4).unwrap();
    assert!((mesh_size(&m) - 2f64.sqrt() / 4.0).abs() < 1e-15);
    let m = unit_square_mesh(8).unwrap();
    assert!((mesh_size(&m) - 2f64.sqrt() / 8.0).abs() < 1e-15);
}

#[test]
fn mesh_size_invariant_under_renumbering() {
    let m = unit_square_mesh(2).unwrap();
    // Reverse the vertex numbering.
    let nv = m.vertices.len();
    let vertices: Vec<[f64; 2]> = (0..nv).map(|v| m.vertices[nv - 1 - v]).collect();
    let triangles: Vec<[usize; 3]> =
        m.triangles.iter().map(|t| [nv - 1 - t[0], nv - 1 - t[1], nv - 1 - t[2]]).collect();
    let renumbered = TriMesh::from_raw(vertices, triangles, false);
    assert_eq!(mesh_size(&m), mesh_size(&renumbered));
}

#[test]
fn square_area_sums_to_one() {
    let m = unit_square_mesh(5).unwrap();
    let total: f64 = (0..m.triangles.len()).map(|t| m.tri_area(t)).sum();
    assert!((total - 1.0).abs() < 1e-12);
}

#[test]
fn disc_area_approaches_pi_from_below() {
    let m = unit_disc_mesh(0.1).unwrap();
    let total: f64 = (0..m.triangles.len()).map(|t| m.tri_area(t)).sum();
    let h = mesh_size(&m);
    let deficit = std::f64::consts::PI - total;
    // Inscribed polygon: the missing circular segments total at most ~πh²/6.
    assert!(deficit > 0.0 && deficit < h * h, "deficit {deficit:.3e} at h {h:.3}");
}

#[test]
fn disc_first_level_matches_study_band() {
    let m = unit_disc_mesh(0.168).unwrap();
    let h = mesh_size(&m);
    assert!((0.08..=0.21).contains(&h), "h = {h}");
    assert!(m.validate().is_empty());
}

#[test]
fn disc_degenerate_coarse_is_valid() {
    let m = unit_disc_mesh(1.9).unwrap();
    assert!(m.triangles.len() >= 4);
    assert!(m.validate().is_empty());
}

#[test]
fn disc_boundary_vertices_on_circle() {
    let m = unit_disc_mesh(0.05).unwrap();
    for &e in &m.boundary_edges {
        for &v in &m.edges[e] {
            let p = m.vertices[v];
            assert!((p[0] * p[0] + p[1] * p[1] - 1.0).abs() <= 1e-12);
        }
    }
    assert!(m.validate().is_empty());
}

#[test]
fn disc_rejects_bad_target() {
    assert!(unit_disc_mesh(0.0).is_err());
    assert!(unit_disc_mesh(2.5).is_err());
}

#[test]
fn refine_quadruples_and_halves() {
    let m = unit_square_mesh(1).unwrap();
    let f = refine_uniform(&m);
    assert_eq!(f.triangles.len(), 8);
    assert!(f.validate().is_empty());
    assert!(mesh_size(&f) <= 0.51 * mesh_size(&m));

    let d = unit_disc_mesh(0.5).unwrap();
    let fd = refine_uniform(&d);
    assert_eq!(fd.triangles.len(), 4 * d.triangles.len());
    assert!(fd.validate().is_empty());
    for &e in &fd.boundary_edges {
        for &v in &fd.edges[e] {
            let p = fd.vertices[v];
            assert!((p[0] * p[0] + p[1] * p[1] - 1.0).abs() <= 1e-12);
        }
    }
}

#[test]
fn refine_retags_from_specs() {
    let d = tag_triangles(unit_disc_mesh(0.3).unwrap(), RegionSpec::omega_disc());
    let refined = refine_uniform(&d);
    let fresh = tag_triangles(refined.clone(), RegionSpec::omega_disc());
    assert_eq!(
        refined.tri_region_tags.get(&REGION_OMEGA),
        fresh.tri_region_tags.get(&REGION_OMEGA)
    );
}

#[test]
fn refine_inherits_tags_without_specs() {
    let mut m = unit_square_mesh(2).unwrap();
    m.tri_region_tags.insert(7, [0usize, 3].into_iter().collect());
    let f = refine_uniform(&m);
    let set = f.tri_region_tags.get(&7).unwrap();
    let expect: std::collections::BTreeSet<usize> =
        [0, 1, 2, 3, 12, 13, 14, 15].into_iter().collect();
    assert_eq!(set, &expect);
}

#[test]
fn tag_all_and_none() {
    let m = unit_square_mesh(3).unwrap();
    let m = tag_triangles(m, RegionSpec { id: 9, pred: RegionPred::All });
    assert_eq!(m.tri_region_tags[&9].len(), m.triangles.len());
    let m = tag_triangles(m, RegionSpec { id: 9, pred: RegionPred::None });
    assert!(m.tri_region_tags[&9].is_empty());
}

#[test]
fn tag_halfplane_on_shifted_square() {
    // [-1,1]² variant: exactly half the triangles sit left of x = 0.
    let base = unit_square_mesh(2).unwrap();
    let vertices: Vec<[f64; 2]> =
        base.vertices.iter().map(|p| [2.0 * p[0] - 1.0, 2.0 * p[1] - 1.0]).collect();
    let shifted = TriMesh::from_raw(vertices, base.triangles.clone(), false);
    let spec = RegionSpec {
        id: 5,
        pred: RegionPred::AnnulusSectorX {
            r2_min: f64::NEG_INFINITY,
            r2_max: f64::INFINITY,
            x_max: 0.0,
        },
    };
    let tagged = tag_triangles(shifted, spec);
    assert_eq!(tagged.tri_region_tags[&5].len(), tagged.triangles.len() / 2);
}

#[test]
fn tag_omega_area_near_exact() {
    let m = tag_triangles(unit_disc_mesh(0.1).unwrap(), RegionSpec::omega_disc());
    let area = m.region_area(REGION_OMEGA);
    assert!(
        (area - OMEGA_AREA).abs() <= 0.15 * OMEGA_AREA,
        "tagged area {area:.4} vs exact {OMEGA_AREA:.4}"
    );
}

#[test]
fn tag_boundary_sector_fraction() {
    let m = unit_disc_mesh(0.1).unwrap();
    let m = tag_boundary_edges(m, RegionSpec { id: 2, pred: RegionPred::All });
    assert_eq!(m.edge_boundary_tags[&2].len(), m.boundary_edges.len());
    let m = tag_boundary_edges(m, RegionSpec::neumann_sector());
    let frac = m.edge_boundary_tags[&BDRY_NEUMANN].len() as f64 / m.boundary_edges.len() as f64;
    assert!((0.70..=0.80).contains(&frac), "frac = {frac}");
    let m = tag_boundary_edges(m, RegionSpec { id: 3, pred: RegionPred::None });
    assert!(m.edge_boundary_tags[&3].is_empty());
}

#[test]
fn tagging_is_idempotent_and_deterministic() {
    let m = tag_triangles(unit_disc_mesh(0.3).unwrap(), RegionSpec::omega_disc());
    let twice = tag_triangles(m.clone(), RegionSpec::omega_disc());
    assert_eq!(m.tri_region_tags, twice.tri_region_tags);
    let again = tag_triangles(unit_disc_mesh(0.3).unwrap(), RegionSpec::omega_disc());
    assert_eq!(write_ascii(&m), write_ascii(&again));
}

#[test]
fn validate_reports_flipped_triangle() {
    let mut m = unit_square_mesh(2).unwrap();
    m.triangles[3].swap(0, 1);
    let problems = m.validate();
    assert!(problems.iter().any(|p| p.contains("non-positive signed area")), "{problems:?}");
}

#[test]
fn validate_reports_duplicated_triangle() {
    let m = unit_square_mesh(1).unwrap();
    let mut triangles = m.triangles.clone();
    triangles.push(triangles[0]);
    let dup = TriMesh::from_raw(m.vertices.clone(), triangles, false);
    let problems = dup.validate();
    assert!(!problems.is_empty(), "duplicate triangle must be reported");
}

#[test]
fn validate_reports_hanging_vertex() {
    // Split only one of the two triangles of the unit square: vertex 4 hangs
    // on the diagonal edge of triangle (0,1,2).
    let vertices = vec![[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.5, 0.5]];
    let triangles = vec![[0, 1, 2], [0, 4, 3], [4, 2, 3]];
    let m = TriMesh::from_raw(vertices, triangles, false);
    let problems = m.validate();
    assert!(!problems.is_empty(), "hanging vertex must be reported");
}

#[test]
fn euler_relation_holds() {
    for m in [
        unit_square_mesh(3).unwrap(),
        unit_disc_mesh(0.3).unwrap(),
        refine_uniform(&unit_disc_mesh(0.3).unwrap()),
    ] {
        let euler =
            m.vertices.len() as i64 - m.edges.len() as i64 + m.triangles.len() as i64;
        assert_eq!(euler, 1);
    }
}

#[test]
fn edge_orientation_signs_consistent() {
    let m = unit_disc_mesh(0.3).unwrap();
    // Interior edges are walked once in each direction; outward normals from
    // the two sides are opposite.
    for (e, slots) in m.edge_tris.iter().enumerate() {
        if let [Some((t1, k1)), Some((t2, k2))] = slots {
            let s1 = m.tri_edges[*t1][*k1 as usize].1;
            let s2 = m.tri_edges[*t2][*k2 as usize].1;
            assert_eq!(s1 * s2, -1, "edge {e}");
        }
    }
    // Boundary outward normals on the disc point away from the origin.
    for &e in &m.boundary_edges {
        let n = m.boundary_outward_normal(e);
        let mid = m.edge_midpoint(e);
        assert!(n[0] * mid[0] + n[1] * mid[1] > 0.0);
    }
}

#[test]
fn ascii_round_trip() {
    let m = tag_triangles(unit_disc_mesh(0.4).unwrap(), RegionSpec::omega_disc());
    let text = write_ascii(&m);
    let back = read_ascii(&text).unwrap();
    assert_eq!(m.vertices, back.vertices);
    assert_eq!(m.triangles, back.triangles);
    assert_eq!(m.tri_region_tags, back.tri_region_tags);
    assert!(back.on_disc, "disc flag inferred from boundary radii");
    assert_eq!(text, write_ascii(&back));

    let s = unit_square_mesh(2).unwrap();
    let back = read_ascii(&write_ascii(&s)).unwrap();
    assert!(!back.on_disc);
}

#[test]
fn ascii_rejects_malformed_input() {
    assert!(matches!(read_ascii("vertices 3 1"), Err(MeshError::Parse { line: 1, .. })));
    let truncated = "trimesh 3 1\n0 0\n1 0\n0 1\n";
    assert!(matches!(read_ascii(truncated), Err(MeshError::Parse { .. })));
    let bad_region = "trimesh 3 1\n0 0\n1 0\n0 1\n0 1 2\nregion 1 1\n9\n";
    assert!(matches!(read_ascii(bad_region), Err(MeshError::Parse { .. })));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn square_invariants_hold(n in 1usize..10, refines in 0usize..3) {
        let mut m = unit_square_mesh(n).unwrap();
        for _ in 0..refines {
            m = refine_uniform(&m);
        }
        prop_assert!(m.validate().is_empty());
        let total: f64 = (0..m.triangles.len()).map(|t| m.tri_area(t)).sum();
        prop_assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn disc_invariants_hold(h in 0.12f64..1.9) {
        let m = unit_disc_mesh(h).unwrap();
        prop_assert!(m.validate().is_empty());
        prop_assert!(mesh_size(&m) <= 1.2 * h);
    }
}
