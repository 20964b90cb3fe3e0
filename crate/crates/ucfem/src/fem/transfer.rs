//! Interpolation, projection, and mesh-to-mesh transfer operators.

use std::sync::Arc;

use super::function::{ExactScalar, ExactVector, FeFunction, ScalarData};
use super::quadrature::{bary_to_xy, EDGE_GAUSS, TRI_QUAD};
use super::space::{DofMap, ElemGeom, Family};
use crate::par;

/// Nodal interpolation onto a Lagrange space.
pub fn lagrange_interpolate(dofmap: &Arc<DofMap>, f: &dyn ExactScalar) -> FeFunction {
    assert_eq!(dofmap.space.family, Family::Lagrange);
    let coeffs = dofmap.lagrange_nodes().iter().map(|&p| f.value(p)).collect();
    FeFunction::new(dofmap.clone(), coeffs)
}

/// Canonical-moment interpolation onto a Raviart-Thomas space. The global
/// dofs are moments against canonical edge weights (plus elementwise means
/// for RT₁), so the coefficients are computed directly by quadrature.
pub fn rt_interpolate(dofmap: &Arc<DofMap>, f: &dyn ExactVector) -> FeFunction {
    assert_eq!(dofmap.space.family, Family::RaviartThomas);
    let mesh = &dofmap.mesh;
    let order = dofmap.space.order;
    let ne = mesh.edges.len();
    let mut coeffs = vec![0.0f64; dofmap.ndofs];
    let edge_moments = par::map_indexed(ne, |e| {
        let [lo, hi] = mesh.edges[e];
        let (plo, phi) = (mesh.vertices[lo], mesh.vertices[hi]);
        let len = mesh.edge_length(e);
        let nc = mesh.edge_canonical_normal(e);
        let mut g0 = 0.0;
        let mut g1 = 0.0;
        for gp in EDGE_GAUSS {
            let p = [
                plo[0] + gp.t * (phi[0] - plo[0]),
                plo[1] + gp.t * (phi[1] - plo[1]),
            ];
            let v = f.value(p);
            let flux = v[0] * nc[0] + v[1] * nc[1];
            g0 += gp.weight * len * flux;
            g1 += gp.weight * len * flux * (gp.t - 0.5);
        }
        (g0, g1)
    });
    for (e, (g0, g1)) in edge_moments.into_iter().enumerate() {
        if order == 0 {
            coeffs[e] = g0;
        } else {
            coeffs[2 * e] = g0;
            coeffs[2 * e + 1] = g1;
        }
    }
    if order == 1 {
        let nt = mesh.triangles.len();
        let interior = par::map_indexed(nt, |t| {
            let geom = ElemGeom::new(mesh, t);
            let mut mx = 0.0;
            let mut my = 0.0;
            for qp in TRI_QUAD {
                let w = qp.weight * geom.area;
                let p = bary_to_xy(geom.verts[0], geom.verts[1], geom.verts[2], qp.bary);
                let v = f.value(p);
                mx += w * v[0];
                my += w * v[1];
            }
            (mx, my)
        });
        for (t, (mx, my)) in interior.into_iter().enumerate() {
            coeffs[2 * ne + 2 * t] = mx;
            coeffs[2 * ne + 2 * t + 1] = my;
        }
    }
    FeFunction::new(dofmap.clone(), coeffs)
}

/// Elementwise L² projection onto a discontinuous space.
pub fn l2_project_dg(dofmap: &Arc<DofMap>, f: &dyn ScalarData) -> FeFunction {
    assert_eq!(dofmap.space.family, Family::DG);
    let mesh = &dofmap.mesh;
    let nt = mesh.triangles.len();
    let nl = dofmap.space.local_ndofs();
    let blocks = par::map_indexed(nt, |t| {
        let geom = ElemGeom::new(mesh, t);
        let mut mass = [[0.0f64; 3]; 3];
        let mut load = [0.0f64; 3];
        for qp in TRI_QUAD {
            let w = qp.weight * geom.area;
            let p = bary_to_xy(geom.verts[0], geom.verts[1], geom.verts[2], qp.bary);
            let b = dofmap.eval_scalar_bary(&geom, qp.bary);
            let fv = f.eval(t, p);
            for i in 0..nl {
                load[i] += w * fv * b.val[i];
                for j in 0..nl {
                    mass[i][j] += w * b.val[i] * b.val[j];
                }
            }
        }
        // Solve the local mass system by Gauss elimination.
        let mut a = mass;
        let mut x = load;
        for col in 0..nl {
            let piv = (col..nl)
                .max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs()))
                .unwrap();
            a.swap(col, piv);
            x.swap(col, piv);
            let d = a[col][col];
            for j in col..nl {
                a[col][j] /= d;
            }
            x[col] /= d;
            for r in 0..nl {
                if r != col && a[r][col] != 0.0 {
                    let fac = a[r][col];
                    for j in col..nl {
                        a[r][j] -= fac * a[col][j];
                    }
                    x[r] -= fac * x[col];
                }
            }
        }
        x
    });
    let mut coeffs = vec![0.0; dofmap.ndofs];
    for (t, x) in blocks.iter().enumerate() {
        for (i, &d) in dofmap.cell_dofs(t).iter().enumerate() {
            coeffs[d] = x[i];
        }
    }
    FeFunction::new(dofmap.clone(), coeffs)
}

/// Transfers a Lagrange function to the uniform refinement of its mesh by
/// evaluating at the fine nodes inside the parent element (children of
/// triangle t are 4t..4t+4, so the parent is found by index). Boundary nodes
/// that were projected outward during refinement use the parent's polynomial
/// extension.
pub fn prolong_lagrange(coarse: &FeFunction, fine: &Arc<DofMap>) -> FeFunction {
    assert_eq!(coarse.dofmap.space.family, Family::Lagrange);
    assert_eq!(fine.space.family, Family::Lagrange);
    assert_eq!(
        fine.mesh.triangles.len(),
        4 * coarse.dofmap.mesh.triangles.len(),
        "fine mesh is not the uniform refinement of the coarse mesh"
    );
    let nodes = fine.lagrange_nodes();
    let node_tri = fine.lagrange_node_tri();
    let coarse_mesh = &coarse.dofmap.mesh;
    let coeffs = par::map_indexed(fine.ndofs, |d| {
        let parent = node_tri[d] / 4;
        let geom = ElemGeom::new(coarse_mesh, parent);
        coarse.value_xy(parent, &geom, nodes[d])
    });
    FeFunction::new(fine.clone(), coeffs)
}
