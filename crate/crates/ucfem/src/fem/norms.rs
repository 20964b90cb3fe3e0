//! The residual triple norm and region-restricted error norms.
//!
//! The triple norm measures a saddle-point solution (u, σ, z) by
//!
//!   |||(u,σ,z)|||² = β‖u‖²_{H¹(Ω)} + α‖u‖²_ω + ‖γ^{-1/2}(γ∇u − σ)‖²_Ω
//!                  + ‖z‖²_{1,h} + β‖σ·n‖²_{∂Ω} + ‖h∇·σ‖²_Ω,
//!
//! where ‖z‖²_{1,h} = Σ_T (‖∇z‖²_T + h_T⁻¹‖[z]‖²_{∂T}) sums the jump terms
//! from both sides of interior facets (boundary facets take [z] = z), and the
//! divergence term is weighted by the global mesh size.

use super::function::{CoefficientField, ExactScalar, FeFunction};
use super::quadrature::{bary_to_xy, EDGE_GAUSS, TRI_QUAD};
use super::space::{ElemGeom, Family, MixedSpaces};
use crate::mesh::mesh_size;
use crate::par;

/// Components of the triple norm (each already square-rooted).
#[derive(Clone, Copy, Debug, Default)]
pub struct TripleNorm {
    pub total: f64,
    /// β^{1/2} ‖u‖_{H¹(Ω)}.
    pub h1: f64,
    /// α^{1/2} ‖u‖_ω.
    pub omega: f64,
    /// ‖γ^{-1/2}(γ∇u − σ)‖_Ω.
    pub mismatch: f64,
    /// ‖z‖_{1,h}.
    pub z1h: f64,
    /// β^{1/2} ‖σ·n‖_{∂Ω}.
    pub fluxbc: f64,
    /// ‖h ∇·σ‖_Ω.
    pub div: f64,
}

/// Evaluates the triple norm of a concatenated solution vector.
pub fn triple_norm(
    spaces: &MixedSpaces,
    gamma: &CoefficientField,
    alpha: f64,
    beta: f64,
    sol: &[f64],
) -> TripleNorm {
    let off = spaces.offsets();
    assert_eq!(sol.len(), off[3], "solution length mismatch");
    let mesh = spaces.mesh();
    let nt = mesh.triangles.len();
    let omega = mesh.region_mask(crate::mesh::REGION_OMEGA);
    let h_global = mesh_size(mesh);

    let u = FeFunction::new(spaces.v.clone(), sol[..off[1]].to_vec());
    let s = FeFunction::new(spaces.rt.clone(), sol[off[1]..off[2]].to_vec());
    let z = FeFunction::new(spaces.x.clone(), sol[off[2]..].to_vec());

    // Volume terms, one partial sum vector per component for ordered reduction.
    let parts = par::map_indexed(nt, |t| {
        let geom = ElemGeom::new(mesh, t);
        let mut h1 = 0.0;
        let mut om = 0.0;
        let mut mis = 0.0;
        let mut zgrad = 0.0;
        let mut div = 0.0;
        for qp in TRI_QUAD {
            let w = qp.weight * geom.area;
            let p = bary_to_xy(geom.verts[0], geom.verts[1], geom.verts[2], qp.bary);
            let uv = u.value_bary(t, &geom, qp.bary);
            let ug = u.grad_bary(t, &geom, qp.bary);
            let sv = s.vec_value_xy(t, &geom, p);
            let sd = s.div_xy(t, &geom, p);
            let zg = z.grad_bary(t, &geom, qp.bary);
            let g = gamma.value_bary(t, &geom, qp.bary);
            h1 += w * (uv * uv + ug[0] * ug[0] + ug[1] * ug[1]);
            if omega[t] {
                om += w * uv * uv;
            }
            let mx = g * ug[0] - sv[0];
            let my = g * ug[1] - sv[1];
            mis += w * (mx * mx + my * my) / g;
            zgrad += w * (zg[0] * zg[0] + zg[1] * zg[1]);
            div += w * sd * sd;
        }
        [h1, om, mis, zgrad, div]
    });
    let mut h1_sq = 0.0;
    let mut omega_sq = 0.0;
    let mut mis_sq = 0.0;
    let mut z_sq = 0.0;
    let mut div_sq = 0.0;
    for p in &parts {
        h1_sq += p[0];
        omega_sq += p[1];
        mis_sq += p[2];
        z_sq += p[3];
        div_sq += p[4];
    }
    h1_sq *= beta;
    omega_sq *= alpha;
    div_sq *= h_global * h_global;

    // Facet terms: multiplier jumps (both sides of interior facets) and the
    // boundary flux penalty.
    let ne = mesh.edges.len();
    let facet = par::map_indexed(ne, |e| {
        let [lo, hi] = mesh.edges[e];
        let (plo, phi) = (mesh.vertices[lo], mesh.vertices[hi]);
        let len = mesh.edge_length(e);
        let mut jump_sq = 0.0;
        let mut flux_sq = 0.0;
        let incident = mesh.edge_tris[e];
        for gp in EDGE_GAUSS {
            let p = [
                plo[0] + gp.t * (phi[0] - plo[0]),
                plo[1] + gp.t * (phi[1] - plo[1]),
            ];
            let jump = match incident {
                [Some((t1, _)), Some((t2, _))] => {
                    let g1 = ElemGeom::new(mesh, t1);
                    let g2 = ElemGeom::new(mesh, t2);
                    z.value_xy(t1, &g1, p) - z.value_xy(t2, &g2, p)
                }
                [Some((t1, _)), None] => {
                    let g1 = ElemGeom::new(mesh, t1);
                    z.value_xy(t1, &g1, p)
                }
                _ => unreachable!("edge without incident triangle"),
            };
            jump_sq += gp.weight * len * jump * jump;
            if mesh.is_boundary_edge(e) {
                let (t1, _) = incident[0].expect("boundary edge triangle");
                let g1 = ElemGeom::new(mesh, t1);
                let n_out = mesh.boundary_outward_normal(e);
                let sv = s.vec_value_xy(t1, &g1, p);
                let tr = sv[0] * n_out[0] + sv[1] * n_out[1];
                flux_sq += gp.weight * len * tr * tr;
            }
        }
        // Each incident element scales the jump by its own inverse diameter.
        let inv_h: f64 = incident
            .iter()
            .flatten()
            .map(|&(t, _)| 1.0 / ElemGeom::new(mesh, t).diam)
            .sum();
        [inv_h * jump_sq, flux_sq]
    });
    let mut flux_sq = 0.0;
    for f in &facet {
        z_sq += f[0];
        flux_sq += f[1];
    }
    flux_sq *= beta;

    let total = (h1_sq + omega_sq + mis_sq + z_sq + flux_sq + div_sq).sqrt();
    TripleNorm {
        total,
        h1: h1_sq.sqrt(),
        omega: omega_sq.sqrt(),
        mismatch: mis_sq.sqrt(),
        z1h: z_sq.sqrt(),
        fluxbc: flux_sq.sqrt(),
        div: div_sq.sqrt(),
    }
}

/// L² and H¹-seminorm errors of a scalar FE function against an exact field.
#[derive(Clone, Copy, Debug, Default)]
pub struct ErrorNorms {
    pub l2: f64,
    pub h1_semi: f64,
}

/// Errors restricted to the triangles tagged `region` (or the whole mesh when
/// `region` is `None`).
pub fn error_norms(u: &FeFunction, exact: &dyn ExactScalar, region: Option<u32>) -> ErrorNorms {
    let mesh = &u.dofmap.mesh;
    assert!(matches!(u.dofmap.space.family, Family::Lagrange | Family::DG));
    let mask = match region {
        Some(id) => mesh.region_mask(id),
        None => vec![true; mesh.triangles.len()],
    };
    let parts = par::map_indexed(mesh.triangles.len(), |t| {
        if !mask[t] {
            return [0.0, 0.0];
        }
        let geom = ElemGeom::new(mesh, t);
        let mut l2 = 0.0;
        let mut h1 = 0.0;
        for qp in TRI_QUAD {
            let w = qp.weight * geom.area;
            let p = bary_to_xy(geom.verts[0], geom.verts[1], geom.verts[2], qp.bary);
            let dv = u.value_bary(t, &geom, qp.bary) - exact.value(p);
            let ug = u.grad_bary(t, &geom, qp.bary);
            let eg = exact.grad(p);
            let dx = ug[0] - eg[0];
            let dy = ug[1] - eg[1];
            l2 += w * dv * dv;
            h1 += w * (dx * dx + dy * dy);
        }
        [l2, h1]
    });
    let mut l2 = 0.0;
    let mut h1 = 0.0;
    for p in &parts {
        l2 += p[0];
        h1 += p[1];
    }
    ErrorNorms { l2: l2.sqrt(), h1_semi: h1.sqrt() }
}

/// L² norm of a scalar FE function over an optional tagged region.
pub fn l2_norm(u: &FeFunction, region: Option<u32>) -> f64 {
    struct Zero;
    impl ExactScalar for Zero {
        fn value(&self, _p: [f64; 2]) -> f64 {
            0.0
        }
        fn grad(&self, _p: [f64; 2]) -> [f64; 2] {
            [0.0, 0.0]
        }
    }
    error_norms(u, &Zero, region).l2
}
