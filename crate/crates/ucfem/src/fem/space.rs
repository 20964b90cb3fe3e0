//! Finite element spaces and degree-of-freedom maps.
//!
//! Supported families: continuous Lagrange V_k (k ∈ {1, 2}), Raviart-Thomas
//! RT_p (p ∈ {0, 1}), discontinuous Lagrange X_p (p ∈ {0, 1}); the mixed
//! system always pairs V_k × RT_{k-1} × X_{k-1}.
//!
//! Raviart-Thomas degrees of freedom are moments of the normal trace against
//! Legendre weights on the canonical edge parameterization (lower vertex
//! index → higher), plus elementwise mean values of each Cartesian component
//! for RT₁. Because the moment weights are canonical, two elements sharing an
//! edge see the same global functional and normal traces are continuous by
//! construction; the per-element orientation enters only as the ±1 sign
//! relating the outward normal to the canonical edge normal. Local bases are
//! built in physical coordinates by inverting the functional/monomial
//! Vandermonde matrix on each element (monomials are centered and scaled, so
//! the matrix stays well conditioned on shape-regular elements).

use std::sync::Arc;

use super::quadrature::{EDGE_GAUSS, TRI_QUAD};
use super::FemError;
use crate::mesh::TriMesh;
use crate::par;

/// Element family.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    /// Continuous Lagrange, order k ∈ {1, 2}.
    Lagrange,
    /// H(div)-conforming Raviart-Thomas, order p ∈ {0, 1}.
    RaviartThomas,
    /// Discontinuous elementwise Lagrange, order p ∈ {0, 1}.
    DG,
}

/// A (family, order) pair.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SpaceDescriptor {
    pub family: Family,
    pub order: usize,
}

impl SpaceDescriptor {
    pub fn lagrange(k: usize) -> Self {
        SpaceDescriptor { family: Family::Lagrange, order: k }
    }

    pub fn raviart_thomas(p: usize) -> Self {
        SpaceDescriptor { family: Family::RaviartThomas, order: p }
    }

    pub fn dg(p: usize) -> Self {
        SpaceDescriptor { family: Family::DG, order: p }
    }

    fn supported(&self) -> bool {
        match self.family {
            Family::Lagrange => self.order == 1 || self.order == 2,
            Family::RaviartThomas | Family::DG => self.order <= 1,
        }
    }

    /// Local dofs per triangle.
    pub fn local_ndofs(&self) -> usize {
        match (self.family, self.order) {
            (Family::Lagrange, 1) => 3,
            (Family::Lagrange, 2) => 6,
            (Family::RaviartThomas, 0) => 3,
            (Family::RaviartThomas, 1) => 8,
            (Family::DG, 0) => 1,
            (Family::DG, 1) => 3,
            _ => unreachable!("unsupported descriptor"),
        }
    }
}

/// Affine geometry of one triangle.
#[derive(Clone, Copy, Debug)]
pub struct ElemGeom {
    pub verts: [[f64; 2]; 3],
    pub area: f64,
    /// Physical gradients of the barycentric coordinates.
    pub grad_lambda: [[f64; 2]; 3],
    pub centroid: [f64; 2],
    pub diam: f64,
}

impl ElemGeom {
    pub fn new(mesh: &TriMesh, t: usize) -> Self {
        let [ia, ib, ic] = mesh.triangles[t];
        let (a, b, c) = (mesh.vertices[ia], mesh.vertices[ib], mesh.vertices[ic]);
        let two_area = (b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]);
        // ∇λ_i is the inward-rotated opposite edge over 2|T|.
        let grad_lambda = [
            [(b[1] - c[1]) / two_area, (c[0] - b[0]) / two_area],
            [(c[1] - a[1]) / two_area, (a[0] - c[0]) / two_area],
            [(a[1] - b[1]) / two_area, (b[0] - a[0]) / two_area],
        ];
        let d2 = |u: [f64; 2], v: [f64; 2]| (u[0] - v[0]).powi(2) + (u[1] - v[1]).powi(2);
        ElemGeom {
            verts: [a, b, c],
            area: 0.5 * two_area,
            grad_lambda,
            centroid: [(a[0] + b[0] + c[0]) / 3.0, (a[1] + b[1] + c[1]) / 3.0],
            diam: d2(a, b).max(d2(b, c)).max(d2(c, a)).sqrt(),
        }
    }

    /// Barycentric coordinates of a physical point (may lie outside [0,1]).
    pub fn barycentric(&self, p: [f64; 2]) -> [f64; 3] {
        let l1 = 1.0
            + self.grad_lambda[1][0] * (p[0] - self.verts[1][0])
            + self.grad_lambda[1][1] * (p[1] - self.verts[1][1]);
        let l2 = 1.0
            + self.grad_lambda[2][0] * (p[0] - self.verts[2][0])
            + self.grad_lambda[2][1] * (p[1] - self.verts[2][1]);
        [1.0 - l1 - l2, l1, l2]
    }
}

/// Scalar basis values at one point (up to 6 local dofs).
#[derive(Clone, Copy, Debug)]
pub struct ScalarBasis {
    pub n: usize,
    pub val: [f64; 6],
    pub grad: [[f64; 2]; 6],
}

/// Vector (RT) basis values at one point (up to 8 local dofs), in the global
/// orientation: edge signs are already applied.
#[derive(Clone, Copy, Debug)]
pub struct VectorBasis {
    pub n: usize,
    pub val: [[f64; 2]; 8],
    pub div: [f64; 8],
}

const MAX_RT: usize = 8;

/// Local → global dof table with RT orientation signs and cached RT bases.
#[derive(Clone, Debug)]
pub struct DofMap {
    pub mesh: Arc<TriMesh>,
    pub space: SpaceDescriptor,
    pub ndofs: usize,
    /// Flat per-triangle global indices, stride = `space.local_ndofs()`.
    cell_dofs: Vec<usize>,
    /// Flat per-triangle orientation signs (±1; +1 for non-RT spaces).
    cell_signs: Vec<i8>,
    /// Flat per-triangle monomial coefficients of the RT basis
    /// (row i = local basis i), stride = local_ndofs².
    rt_coeff: Vec<f64>,
}

/// Builds the dof map of `space` over `mesh`.
pub fn build_dofmap(mesh: &Arc<TriMesh>, space: SpaceDescriptor) -> Result<Arc<DofMap>, FemError> {
    if !space.supported() {
        return Err(FemError::UnsupportedSpace(format!(
            "{:?} of order {} (supported: Lagrange 1-2, RT 0-1, DG 0-1)",
            space.family, space.order
        )));
    }
    let nt = mesh.triangles.len();
    let ne = mesh.edges.len();
    let nv = mesh.vertices.len();
    let nl = space.local_ndofs();
    let mut cell_dofs = vec![0usize; nt * nl];
    let mut cell_signs = vec![1i8; nt * nl];
    let ndofs;
    match (space.family, space.order) {
        (Family::Lagrange, 1) => {
            ndofs = nv;
            for t in 0..nt {
                cell_dofs[3 * t..3 * t + 3].copy_from_slice(&mesh.triangles[t]);
            }
        }
        (Family::Lagrange, 2) => {
            ndofs = nv + ne;
            for t in 0..nt {
                let tri = mesh.triangles[t];
                let te = mesh.tri_edges[t];
                let d = &mut cell_dofs[6 * t..6 * t + 6];
                d[..3].copy_from_slice(&tri);
                // Local dof 3+k sits at the midpoint of the edge opposite vertex k.
                for k in 0..3 {
                    d[3 + k] = nv + te[k].0;
                }
            }
        }
        (Family::RaviartThomas, 0) => {
            ndofs = ne;
            for t in 0..nt {
                for k in 0..3 {
                    let (e, s) = mesh.tri_edges[t][k];
                    cell_dofs[3 * t + k] = e;
                    cell_signs[3 * t + k] = s;
                }
            }
        }
        (Family::RaviartThomas, 1) => {
            ndofs = 2 * ne + 2 * nt;
            for t in 0..nt {
                let d = &mut cell_dofs[8 * t..8 * t + 8];
                let s = &mut cell_signs[8 * t..8 * t + 8];
                for k in 0..3 {
                    let (e, sign) = mesh.tri_edges[t][k];
                    d[2 * k] = 2 * e;
                    d[2 * k + 1] = 2 * e + 1;
                    s[2 * k] = sign;
                    s[2 * k + 1] = sign;
                }
                d[6] = 2 * ne + 2 * t;
                d[7] = 2 * ne + 2 * t + 1;
            }
        }
        (Family::DG, 0) => {
            ndofs = nt;
            for (t, d) in cell_dofs.iter_mut().enumerate() {
                *d = t;
            }
        }
        (Family::DG, 1) => {
            ndofs = 3 * nt;
            for t in 0..nt {
                for k in 0..3 {
                    cell_dofs[3 * t + k] = 3 * t + k;
                }
            }
        }
        _ => unreachable!(),
    }
    let rt_coeff = if space.family == Family::RaviartThomas {
        let blocks = par::map_indexed(nt, |t| rt_local_coefficients(mesh, t, space.order));
        let mut flat = vec![0.0; nt * nl * nl];
        for (t, block) in blocks.into_iter().enumerate() {
            flat[t * nl * nl..(t + 1) * nl * nl].copy_from_slice(&block[..nl * nl]);
        }
        flat
    } else {
        Vec::new()
    };
    Ok(Arc::new(DofMap {
        mesh: mesh.clone(),
        space,
        ndofs,
        cell_dofs,
        cell_signs,
        rt_coeff,
    }))
}

impl DofMap {
    /// Global dofs of triangle `t`.
    pub fn cell_dofs(&self, t: usize) -> &[usize] {
        let nl = self.space.local_ndofs();
        &self.cell_dofs[t * nl..(t + 1) * nl]
    }

    /// Orientation signs of triangle `t` (all +1 for scalar spaces).
    pub fn cell_signs(&self, t: usize) -> &[i8] {
        let nl = self.space.local_ndofs();
        &self.cell_signs[t * nl..(t + 1) * nl]
    }

    /// Scalar basis at a barycentric point of triangle `t`.
    pub fn eval_scalar_bary(&self, geom: &ElemGeom, bary: [f64; 3]) -> ScalarBasis {
        let mut out = ScalarBasis { n: self.space.local_ndofs(), val: [0.0; 6], grad: [[0.0; 2]; 6] };
        let gl = &geom.grad_lambda;
        match (self.space.family, self.space.order) {
            (Family::Lagrange, 1) | (Family::DG, 1) => {
                for i in 0..3 {
                    out.val[i] = bary[i];
                    out.grad[i] = gl[i];
                }
            }
            (Family::DG, 0) => {
                out.val[0] = 1.0;
            }
            (Family::Lagrange, 2) => {
                for i in 0..3 {
                    out.val[i] = bary[i] * (2.0 * bary[i] - 1.0);
                    out.grad[i] = [gl[i][0] * (4.0 * bary[i] - 1.0), gl[i][1] * (4.0 * bary[i] - 1.0)];
                }
                for k in 0..3 {
                    let (i, j) = ((k + 1) % 3, (k + 2) % 3);
                    out.val[3 + k] = 4.0 * bary[i] * bary[j];
                    out.grad[3 + k] = [
                        4.0 * (gl[i][0] * bary[j] + gl[j][0] * bary[i]),
                        4.0 * (gl[i][1] * bary[j] + gl[j][1] * bary[i]),
                    ];
                }
            }
            _ => panic!("eval_scalar on a vector space"),
        }
        out
    }

    /// Scalar basis at a physical point of triangle `t` (the affine polynomial
    /// extension is used for points outside the element).
    pub fn eval_scalar_xy(&self, geom: &ElemGeom, p: [f64; 2]) -> ScalarBasis {
        self.eval_scalar_bary(geom, geom.barycentric(p))
    }

    /// RT basis at a physical point of triangle `t`, global orientation.
    pub fn eval_vector_xy(&self, t: usize, geom: &ElemGeom, p: [f64; 2]) -> VectorBasis {
        let n = self.space.local_ndofs();
        let (mval, mdiv) = rt_monomials(geom, p, self.space.order);
        let coeff = &self.rt_coeff[t * n * n..(t + 1) * n * n];
        let signs = self.cell_signs(t);
        let mut out = VectorBasis { n, val: [[0.0; 2]; 8], div: [0.0; 8] };
        for i in 0..n {
            let row = &coeff[i * n..(i + 1) * n];
            let mut vx = 0.0;
            let mut vy = 0.0;
            let mut dv = 0.0;
            for j in 0..n {
                vx += row[j] * mval[j][0];
                vy += row[j] * mval[j][1];
                dv += row[j] * mdiv[j];
            }
            let s = signs[i] as f64;
            out.val[i] = [s * vx, s * vy];
            out.div[i] = s * dv;
        }
        out
    }

    /// Coordinates of every Lagrange node (vertices, then edge midpoints for k=2).
    pub fn lagrange_nodes(&self) -> Vec<[f64; 2]> {
        assert_eq!(self.space.family, Family::Lagrange);
        let mut nodes = self.mesh.vertices.clone();
        if self.space.order == 2 {
            nodes.extend((0..self.mesh.edges.len()).map(|e| self.mesh.edge_midpoint(e)));
        }
        nodes
    }

    /// Lagrange dofs on the domain boundary (vertices of boundary edges, plus
    /// boundary edge midpoints for k=2).
    pub fn boundary_lagrange_dofs(&self) -> Vec<usize> {
        assert_eq!(self.space.family, Family::Lagrange);
        let nv = self.mesh.vertices.len();
        let mut on_boundary = vec![false; self.ndofs];
        for &e in &self.mesh.boundary_edges {
            for &v in &self.mesh.edges[e] {
                on_boundary[v] = true;
            }
            if self.space.order == 2 {
                on_boundary[nv + e] = true;
            }
        }
        (0..self.ndofs).filter(|&d| on_boundary[d]).collect()
    }

    /// For each Lagrange node, one triangle containing it (used to evaluate
    /// element-bound data at nodes).
    pub fn lagrange_node_tri(&self) -> Vec<usize> {
        assert_eq!(self.space.family, Family::Lagrange);
        let mut tri = vec![usize::MAX; self.ndofs];
        for t in 0..self.mesh.triangles.len() {
            for &d in self.cell_dofs(t) {
                if tri[d] == usize::MAX {
                    tri[d] = t;
                }
            }
        }
        tri
    }

    /// RT dofs attached to a given edge.
    pub fn rt_edge_dofs(&self, e: usize) -> Vec<usize> {
        assert_eq!(self.space.family, Family::RaviartThomas);
        match self.space.order {
            0 => vec![e],
            _ => vec![2 * e, 2 * e + 1],
        }
    }
}

/// RT monomial values and divergences at a physical point, in coordinates
/// centered at the element centroid and scaled by its diameter.
fn rt_monomials(geom: &ElemGeom, p: [f64; 2], order: usize) -> ([[f64; 2]; MAX_RT], [f64; MAX_RT]) {
    let h = geom.diam;
    let x = (p[0] - geom.centroid[0]) / h;
    let y = (p[1] - geom.centroid[1]) / h;
    let mut val = [[0.0; 2]; MAX_RT];
    let mut div = [0.0; MAX_RT];
    val[0] = [1.0, 0.0];
    val[1] = [0.0, 1.0];
    if order == 0 {
        val[2] = [x, y];
        div[2] = 2.0 / h;
    } else {
        val[2] = [x, 0.0];
        div[2] = 1.0 / h;
        val[3] = [y, 0.0];
        val[4] = [0.0, x];
        val[5] = [0.0, y];
        div[5] = 1.0 / h;
        val[6] = [x * x, x * y];
        div[6] = 3.0 * x / h;
        val[7] = [x * y, y * y];
        div[7] = 3.0 * y / h;
    }
    (val, div)
}

/// Monomial coefficients of the local RT basis dual to the element's
/// functionals (outward-normal edge moments and interior means), obtained by
/// inverting the functional/monomial Vandermonde matrix.
fn rt_local_coefficients(mesh: &TriMesh, t: usize, order: usize) -> [f64; MAX_RT * MAX_RT] {
    let geom = ElemGeom::new(mesh, t);
    let n = if order == 0 { 3 } else { 8 };
    let mut v = [[0.0f64; MAX_RT]; MAX_RT];
    let moments_per_edge = order + 1;
    for k in 0..3 {
        let (e, sign) = mesh.tri_edges[t][k];
        let [lo, hi] = mesh.edges[e];
        let (plo, phi) = (mesh.vertices[lo], mesh.vertices[hi]);
        let len = ((phi[0] - plo[0]).powi(2) + (phi[1] - plo[1]).powi(2)).sqrt();
        let nc = mesh.edge_canonical_normal(e);
        let n_out = [sign as f64 * nc[0], sign as f64 * nc[1]];
        for gp in EDGE_GAUSS {
            let p = [
                plo[0] + gp.t * (phi[0] - plo[0]),
                plo[1] + gp.t * (phi[1] - plo[1]),
            ];
            let (mval, _) = rt_monomials(&geom, p, order);
            for j in 0..n {
                let flux = mval[j][0] * n_out[0] + mval[j][1] * n_out[1];
                v[moments_per_edge * k][j] += gp.weight * len * flux;
                if order == 1 {
                    // First Legendre moment in the canonical arclength parameter.
                    v[2 * k + 1][j] += gp.weight * len * flux * (gp.t - 0.5);
                }
            }
        }
    }
    if order == 1 {
        for qp in TRI_QUAD {
            let p = super::quadrature::bary_to_xy(geom.verts[0], geom.verts[1], geom.verts[2], qp.bary);
            let (mval, _) = rt_monomials(&geom, p, order);
            for j in 0..n {
                v[6][j] += qp.weight * geom.area * mval[j][0];
                v[7][j] += qp.weight * geom.area * mval[j][1];
            }
        }
    }
    // Invert by Gauss-Jordan with partial pivoting; coefficients are the
    // transpose of the inverse.
    let mut aug = [[0.0f64; 2 * MAX_RT]; MAX_RT];
    for i in 0..n {
        aug[i][..n].copy_from_slice(&v[i][..n]);
        aug[i][n + i] = 1.0;
    }
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&a, &b| aug[a][col].abs().total_cmp(&aug[b][col].abs()))
            .unwrap();
        assert!(aug[piv][col].abs() > 1e-14, "degenerate RT element {t}");
        aug.swap(col, piv);
        let d = aug[col][col];
        for x in aug[col].iter_mut() {
            *x /= d;
        }
        for row in 0..n {
            if row != col && aug[row][col] != 0.0 {
                let f = aug[row][col];
                for j in 0..2 * n {
                    aug[row][j] -= f * aug[col][j];
                }
            }
        }
    }
    let mut coeff = [0.0f64; MAX_RT * MAX_RT];
    for i in 0..n {
        for j in 0..n {
            // Basis i, monomial j: row i of V^{-T}, i.e. column i of V^{-1}.
            coeff[i * n + j] = aug[j][n + i];
        }
    }
    coeff
}

/// The paired mixed spaces V_k × RT_{k-1} × X_{k-1}.
#[derive(Clone, Debug)]
pub struct MixedSpaces {
    pub k: usize,
    pub v: Arc<DofMap>,
    pub rt: Arc<DofMap>,
    pub x: Arc<DofMap>,
}

impl MixedSpaces {
    pub fn build(mesh: &Arc<TriMesh>, k: usize) -> Result<Self, FemError> {
        if k != 1 && k != 2 {
            return Err(FemError::UnsupportedSpace(format!("mixed order k = {k}, supported: 1, 2")));
        }
        Ok(MixedSpaces {
            k,
            v: build_dofmap(mesh, SpaceDescriptor::lagrange(k))?,
            rt: build_dofmap(mesh, SpaceDescriptor::raviart_thomas(k - 1))?,
            x: build_dofmap(mesh, SpaceDescriptor::dg(k - 1))?,
        })
    }

    pub fn mesh(&self) -> &Arc<TriMesh> {
        &self.v.mesh
    }

    /// Total dof count of the concatenated system.
    pub fn total_ndofs(&self) -> usize {
        self.v.ndofs + self.rt.ndofs + self.x.ndofs
    }

    /// Block offsets [0, n_u, n_u + n_σ, total].
    pub fn offsets(&self) -> [usize; 4] {
        [
            0,
            self.v.ndofs,
            self.v.ndofs + self.rt.ndofs,
            self.total_ndofs(),
        ]
    }
}
