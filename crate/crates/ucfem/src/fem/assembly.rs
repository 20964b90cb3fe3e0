//! Assembly of the stabilized saddle-point system and scalar auxiliary forms.
//!
//! The mixed system couples u ∈ V_k, σ ∈ RT_{k-1}, and the multiplier
//! z ∈ X_{k-1}. With test functions (v, τ, y) the bilinear form is
//!
//!   (γ∇u − σ, ∇v − γ⁻¹τ) + α(u, v)_ω + β(σ·n, τ·n)_{∂Ω}
//!     − (∇·τ, z) − (∇·σ, y),
//!
//! which expands into the symmetric block matrix
//!
//!   [ (γ∇u,∇v) + α(u,v)_ω    −(∇v,σ)                 0      ]
//!   [ −(∇u,τ)                (γ⁻¹σ,τ) + β(σ·nτ·n)∂Ω  −(∇·τ,z)]
//!   [ 0                      −(∇·σ,y)                0      ]
//!
//! with right-hand side (α q̃, v)_ω / 0 / (f̃, y). Flux boundary data on
//! tagged edges is imposed strongly by eliminating the corresponding RT dofs.
//!
//! Assembly is elementwise and runs on the parallel element loop; triplets
//! are reduced in element order, so serial and parallel assembly produce
//! bitwise-identical matrices. Both halves of each symmetric off-diagonal
//! pair are emitted from one computed value, so the matrix is exactly
//! symmetric.

use std::sync::Arc;

use super::function::{CoefficientField, FluxData, ScalarData};
use super::quadrature::{bary_to_xy, EDGE_GAUSS, TRI_QUAD};
use super::space::{ElemGeom, MixedSpaces};
use super::space::{DofMap, Family};
use super::FemError;
use crate::mesh::{BDRY_NEUMANN, REGION_OMEGA};
use crate::par;
use crate::sparse::CsrMatrix;

/// Per-dataset right-hand-side data: interior measurement q̃ on ω and the
/// volume source f̃, plus optional strong flux data on tagged boundary edges.
pub struct DatasetData<'a> {
    pub q_tilde: &'a dyn ScalarData,
    pub f_tilde: &'a dyn ScalarData,
    /// Normal flux imposed strongly on edges tagged [`BDRY_NEUMANN`].
    pub neumann: Option<&'a dyn FluxData>,
}

/// One assembled saddle-point system. Systems assembled together share the
/// matrix; only right-hand sides differ between datasets.
#[derive(Clone, Debug)]
pub struct SaddleSystem {
    pub matrix: Arc<CsrMatrix>,
    pub rhs: Vec<f64>,
    /// Block offsets [0, n_u, n_u + n_σ, n_total].
    pub offsets: [usize; 4],
    /// Strongly eliminated dofs (global index, prescribed value).
    pub eliminated: Vec<(usize, f64)>,
}

const MU: usize = 6;
const MS: usize = 8;
const MX: usize = 3;

struct ElemOut {
    triplets: Vec<(usize, usize, f64)>,
    /// Per dataset: (global dof, rhs contribution).
    rhs: Vec<Vec<(usize, f64)>>,
}

/// Assembles one system per dataset; all share the same matrix.
pub fn assemble_saddle_systems(
    spaces: &MixedSpaces,
    gamma: &CoefficientField,
    alpha: f64,
    beta: f64,
    datasets: &[DatasetData],
) -> Result<Vec<SaddleSystem>, FemError> {
    if alpha < 0.0 || beta < 0.0 {
        return Err(FemError::InvalidInput(format!(
            "penalty parameters must be nonnegative (alpha = {alpha}, beta = {beta})"
        )));
    }
    if !Arc::ptr_eq(&gamma.fe.dofmap.mesh, spaces.mesh()) {
        return Err(FemError::InvalidInput(
            "coefficient and spaces live on different meshes".into(),
        ));
    }
    let mesh = spaces.mesh().clone();
    let nt = mesh.triangles.len();
    let off = spaces.offsets();
    let n_total = off[3];
    let omega = mesh.region_mask(REGION_OMEGA);
    let nd = datasets.len();

    // Elementwise volume terms, computed in parallel and reduced in order.
    let elems = par::map_indexed(nt, |t| {
        element_contribution(spaces, gamma, alpha, &omega, datasets, t, &off)
    });
    let mut triplets: Vec<(usize, usize, f64)> = Vec::new();
    let mut rhs_raw = vec![vec![0.0f64; n_total]; nd];
    for out in elems {
        triplets.extend_from_slice(&out.triplets);
        for (d, entries) in out.rhs.iter().enumerate() {
            for &(g, v) in entries {
                rhs_raw[d][g] += v;
            }
        }
    }

    // Boundary flux penalty β(σ·n, τ·n) on ∂Ω, supported on each edge's own
    // RT dofs (all other basis functions have vanishing normal trace there).
    if beta > 0.0 {
        for &e in &mesh.boundary_edges {
            let (t, _) = mesh.edge_tris[e][0].expect("boundary edge without triangle");
            let geom = ElemGeom::new(&mesh, t);
            let n_out = mesh.boundary_outward_normal(e);
            let [lo, hi] = mesh.edges[e];
            let (plo, phi) = (mesh.vertices[lo], mesh.vertices[hi]);
            let len = mesh.edge_length(e);
            let dofs = spaces.rt.rt_edge_dofs(e);
            let cell = spaces.rt.cell_dofs(t);
            // Local positions of this edge's dofs within the cell.
            let local: Vec<usize> = dofs
                .iter()
                .map(|g| cell.iter().position(|c| c == g).expect("edge dof not in cell"))
                .collect();
            let m = dofs.len();
            let mut loc = [[0.0f64; 2]; 2];
            for gp in EDGE_GAUSS {
                let p = [
                    plo[0] + gp.t * (phi[0] - plo[0]),
                    plo[1] + gp.t * (phi[1] - plo[1]),
                ];
                let basis = spaces.rt.eval_vector_xy(t, &geom, p);
                let mut tr = [0.0f64; 2];
                for (i, &li) in local.iter().enumerate() {
                    tr[i] = basis.val[li][0] * n_out[0] + basis.val[li][1] * n_out[1];
                }
                for i in 0..m {
                    for j in i..m {
                        loc[i][j] += gp.weight * len * tr[i] * tr[j];
                    }
                }
            }
            for i in 0..m {
                for j in i..m {
                    let v = beta * loc[i][j];
                    triplets.push((off[1] + dofs[i], off[1] + dofs[j], v));
                    if j > i {
                        triplets.push((off[1] + dofs[j], off[1] + dofs[i], v));
                    }
                }
            }
        }
    }

    // Strong flux data: eliminate the RT dofs of tagged boundary edges.
    let mut is_elim = vec![false; n_total];
    let mut elim_dofs: Vec<usize> = Vec::new();
    if let Some(tagged) = mesh.edge_boundary_tags.get(&BDRY_NEUMANN) {
        for &e in tagged {
            for g in spaces.rt.rt_edge_dofs(e) {
                is_elim[off[1] + g] = true;
                elim_dofs.push(off[1] + g);
            }
        }
    }
    elim_dofs.sort_unstable();
    let mut elim_vals = vec![vec![0.0f64; elim_dofs.len()]; nd];
    if !elim_dofs.is_empty() {
        let index_of = |g: usize| elim_dofs.binary_search(&g).expect("eliminated dof");
        let tagged = mesh.edge_boundary_tags.get(&BDRY_NEUMANN).unwrap();
        for &e in tagged {
            let [lo, hi] = mesh.edges[e];
            let (plo, phi) = (mesh.vertices[lo], mesh.vertices[hi]);
            let len = mesh.edge_length(e);
            let nc = mesh.edge_canonical_normal(e);
            let dofs = spaces.rt.rt_edge_dofs(e);
            for (d, data) in datasets.iter().enumerate() {
                let flux = match data.neumann {
                    Some(f) => f,
                    None => {
                        return Err(FemError::InvalidInput(
                            "mesh has tagged flux edges but a dataset provides no flux data".into(),
                        ))
                    }
                };
                // Canonical moments of the data: these are the RT dof values.
                let mut g0 = 0.0;
                let mut g1 = 0.0;
                for gp in EDGE_GAUSS {
                    let p = [
                        plo[0] + gp.t * (phi[0] - plo[0]),
                        plo[1] + gp.t * (phi[1] - plo[1]),
                    ];
                    let val = flux.eval(p, nc);
                    g0 += gp.weight * len * val;
                    g1 += gp.weight * len * val * (gp.t - 0.5);
                }
                elim_vals[d][index_of(off[1] + dofs[0])] = g0;
                if dofs.len() > 1 {
                    elim_vals[d][index_of(off[1] + dofs[1])] = g1;
                }
            }
        }
    }

    // Filter triplets: drop eliminated rows, move eliminated columns to the
    // right-hand side, then pin the eliminated dofs with identity rows.
    let mut kept: Vec<(usize, usize, f64)> = Vec::with_capacity(triplets.len());
    let mut coupling: Vec<(usize, usize, f64)> = Vec::new();
    for &(r, c, v) in &triplets {
        match (is_elim[r], is_elim[c]) {
            (false, false) => kept.push((r, c, v)),
            (false, true) => coupling.push((r, c, v)),
            (true, _) => {}
        }
    }
    for &d in &elim_dofs {
        kept.push((d, d, 1.0));
    }
    let matrix = Arc::new(CsrMatrix::from_triplets(n_total, n_total, &mut kept));

    let index_of = |g: usize| elim_dofs.binary_search(&g).expect("eliminated dof");
    let systems = (0..nd)
        .map(|d| {
            let mut rhs = std::mem::take(&mut rhs_raw[d]);
            for &(r, c, v) in &coupling {
                rhs[r] -= v * elim_vals[d][index_of(c)];
            }
            for (i, &g) in elim_dofs.iter().enumerate() {
                rhs[g] = elim_vals[d][i];
            }
            SaddleSystem {
                matrix: matrix.clone(),
                rhs,
                offsets: off,
                eliminated: elim_dofs.iter().map(|&g| (g, elim_vals[d][index_of(g)])).collect(),
            }
        })
        .collect();
    Ok(systems)
}

/// Single-dataset convenience wrapper around [`assemble_saddle_systems`].
pub fn assemble_saddle(
    spaces: &MixedSpaces,
    gamma: &CoefficientField,
    alpha: f64,
    beta: f64,
    data: &DatasetData,
) -> Result<SaddleSystem, FemError> {
    Ok(assemble_saddle_systems(spaces, gamma, alpha, beta, std::slice::from_ref(data))?
        .pop()
        .expect("one system per dataset"))
}

fn element_contribution(
    spaces: &MixedSpaces,
    gamma: &CoefficientField,
    alpha: f64,
    omega: &[bool],
    datasets: &[DatasetData],
    t: usize,
    off: &[usize; 4],
) -> ElemOut {
    let mesh = spaces.mesh();
    let geom = ElemGeom::new(mesh, t);
    let nu = spaces.v.space.local_ndofs();
    let ns = spaces.rt.space.local_ndofs();
    let nx = spaces.x.space.local_ndofs();
    let in_omega = omega[t];

    let mut a_uu = [[0.0f64; MU]; MU];
    let mut a_us = [[0.0f64; MS]; MU];
    let mut a_ss = [[0.0f64; MS]; MS];
    let mut a_xs = [[0.0f64; MS]; MX];
    let mut r_u = vec![[0.0f64; MU]; datasets.len()];
    let mut r_x = vec![[0.0f64; MX]; datasets.len()];

    for qp in TRI_QUAD {
        let w = qp.weight * geom.area;
        let p = bary_to_xy(geom.verts[0], geom.verts[1], geom.verts[2], qp.bary);
        let bu = spaces.v.eval_scalar_bary(&geom, qp.bary);
        let bs = spaces.rt.eval_vector_xy(t, &geom, p);
        let bx = spaces.x.eval_scalar_bary(&geom, qp.bary);
        let g = gamma.value_bary(t, &geom, qp.bary);
        let g_inv = 1.0 / g;

        for i in 0..nu {
            for j in i..nu {
                let mut v = g * (bu.grad[i][0] * bu.grad[j][0] + bu.grad[i][1] * bu.grad[j][1]);
                if in_omega {
                    v += alpha * bu.val[i] * bu.val[j];
                }
                a_uu[i][j] += w * v;
            }
            for j in 0..ns {
                a_us[i][j] -= w * (bu.grad[i][0] * bs.val[j][0] + bu.grad[i][1] * bs.val[j][1]);
            }
        }
        for i in 0..ns {
            for j in i..ns {
                a_ss[i][j] += w * g_inv * (bs.val[i][0] * bs.val[j][0] + bs.val[i][1] * bs.val[j][1]);
            }
        }
        for i in 0..nx {
            for j in 0..ns {
                a_xs[i][j] -= w * bx.val[i] * bs.div[j];
            }
        }
        for (d, data) in datasets.iter().enumerate() {
            if in_omega {
                let q = data.q_tilde.eval(t, p);
                for i in 0..nu {
                    r_u[d][i] += w * alpha * q * bu.val[i];
                }
            }
            let f = data.f_tilde.eval(t, p);
            for i in 0..nx {
                r_x[d][i] += w * f * bx.val[i];
            }
        }
    }

    let du = spaces.v.cell_dofs(t);
    let ds = spaces.rt.cell_dofs(t);
    let dx = spaces.x.cell_dofs(t);
    let mut triplets = Vec::with_capacity(nu * nu + 2 * nu * ns + ns * ns + 2 * nx * ns);
    for i in 0..nu {
        for j in i..nu {
            triplets.push((du[i], du[j], a_uu[i][j]));
            if j > i {
                triplets.push((du[j], du[i], a_uu[i][j]));
            }
        }
        for j in 0..ns {
            triplets.push((du[i], off[1] + ds[j], a_us[i][j]));
            triplets.push((off[1] + ds[j], du[i], a_us[i][j]));
        }
    }
    for i in 0..ns {
        for j in i..ns {
            triplets.push((off[1] + ds[i], off[1] + ds[j], a_ss[i][j]));
            if j > i {
                triplets.push((off[1] + ds[j], off[1] + ds[i], a_ss[i][j]));
            }
        }
    }
    for i in 0..nx {
        for j in 0..ns {
            triplets.push((off[2] + dx[i], off[1] + ds[j], a_xs[i][j]));
            triplets.push((off[1] + ds[j], off[2] + dx[i], a_xs[i][j]));
        }
    }
    let rhs = (0..datasets.len())
        .map(|d| {
            let mut v: Vec<(usize, f64)> = Vec::with_capacity(nu + nx);
            for i in 0..nu {
                if r_u[d][i] != 0.0 {
                    v.push((du[i], r_u[d][i]));
                }
            }
            for i in 0..nx {
                if r_x[d][i] != 0.0 {
                    v.push((off[2] + dx[i], r_x[d][i]));
                }
            }
            v
        })
        .collect();
    ElemOut { triplets, rhs }
}

/// Triplets of the weighted stiffness form (γ∇u, ∇v) on a Lagrange space.
pub fn diffusion_triplets(dofmap: &DofMap, gamma: &CoefficientField) -> Vec<(usize, usize, f64)> {
    assert_eq!(dofmap.space.family, Family::Lagrange);
    let mesh = &dofmap.mesh;
    let nt = mesh.triangles.len();
    let nl = dofmap.space.local_ndofs();
    let blocks = par::map_indexed(nt, |t| {
        let geom = ElemGeom::new(mesh, t);
        let mut loc = [[0.0f64; MU]; MU];
        for qp in TRI_QUAD {
            let w = qp.weight * geom.area;
            let b = dofmap.eval_scalar_bary(&geom, qp.bary);
            let g = gamma.value_bary(t, &geom, qp.bary);
            for i in 0..nl {
                for j in i..nl {
                    loc[i][j] +=
                        w * g * (b.grad[i][0] * b.grad[j][0] + b.grad[i][1] * b.grad[j][1]);
                }
            }
        }
        loc
    });
    let mut triplets = Vec::with_capacity(nt * nl * nl);
    for (t, loc) in blocks.iter().enumerate() {
        let dofs = dofmap.cell_dofs(t);
        for i in 0..nl {
            for j in i..nl {
                triplets.push((dofs[i], dofs[j], loc[i][j]));
                if j > i {
                    triplets.push((dofs[j], dofs[i], loc[i][j]));
                }
            }
        }
    }
    triplets
}

/// Assembles c_m (u, v) + c_s (∇u, ∇v) over a Lagrange space.
pub fn assemble_lagrange_matrix(dofmap: &DofMap, mass_coeff: f64, stiff_coeff: f64) -> CsrMatrix {
    assert_eq!(dofmap.space.family, Family::Lagrange);
    let mesh = &dofmap.mesh;
    let nt = mesh.triangles.len();
    let nl = dofmap.space.local_ndofs();
    let blocks = par::map_indexed(nt, |t| {
        let geom = ElemGeom::new(mesh, t);
        let mut loc = [[0.0f64; MU]; MU];
        for qp in TRI_QUAD {
            let w = qp.weight * geom.area;
            let b = dofmap.eval_scalar_bary(&geom, qp.bary);
            for i in 0..nl {
                for j in i..nl {
                    loc[i][j] += w
                        * (mass_coeff * b.val[i] * b.val[j]
                            + stiff_coeff
                                * (b.grad[i][0] * b.grad[j][0] + b.grad[i][1] * b.grad[j][1]));
                }
            }
        }
        loc
    });
    let mut triplets = Vec::with_capacity(nt * nl * nl);
    for (t, loc) in blocks.iter().enumerate() {
        let dofs = dofmap.cell_dofs(t);
        for i in 0..nl {
            for j in i..nl {
                triplets.push((dofs[i], dofs[j], loc[i][j]));
                if j > i {
                    triplets.push((dofs[j], dofs[i], loc[i][j]));
                }
            }
        }
    }
    CsrMatrix::from_triplets(dofmap.ndofs, dofmap.ndofs, &mut triplets)
}

/// The gradient-smoothing operator (u, v) + scale (∇u, ∇v).
pub fn assemble_gradient_smoother(dofmap: &DofMap, scale: f64) -> CsrMatrix {
    assemble_lagrange_matrix(dofmap, 1.0, scale)
}

/// Load vector ∫ data·φ_i over a Lagrange space.
pub fn assemble_scalar_load(dofmap: &DofMap, data: &dyn ScalarData) -> Vec<f64> {
    assert_eq!(dofmap.space.family, Family::Lagrange);
    let mesh = &dofmap.mesh;
    let nt = mesh.triangles.len();
    let nl = dofmap.space.local_ndofs();
    let blocks = par::map_indexed(nt, |t| {
        let geom = ElemGeom::new(mesh, t);
        let mut loc = [0.0f64; MU];
        for qp in TRI_QUAD {
            let w = qp.weight * geom.area;
            let p = bary_to_xy(geom.verts[0], geom.verts[1], geom.verts[2], qp.bary);
            let b = dofmap.eval_scalar_bary(&geom, qp.bary);
            let f = data.eval(t, p);
            for i in 0..nl {
                loc[i] += w * f * b.val[i];
            }
        }
        loc
    });
    let mut out = vec![0.0; dofmap.ndofs];
    for (t, loc) in blocks.iter().enumerate() {
        for (i, &d) in dofmap.cell_dofs(t).iter().enumerate() {
            out[d] += loc[i];
        }
    }
    out
}
