//! Finite element functions, data traits, and point evaluation.

use std::sync::Arc;

use super::space::{DofMap, ElemGeom, Family};

/// Scalar data bound to mesh elements: evaluated at a physical point of a
/// given triangle, so discontinuous (elementwise) data is well defined.
pub trait ScalarData: Sync {
    fn eval(&self, tri: usize, p: [f64; 2]) -> f64;
}

/// Normal flux data on boundary edges: σ·n at a point for a given unit
/// normal. Implementations must be linear in `n`.
pub trait FluxData: Sync {
    fn eval(&self, p: [f64; 2], n: [f64; 2]) -> f64;
}

/// A globally defined scalar with gradient (analytic reference solutions).
pub trait ExactScalar: Sync {
    fn value(&self, p: [f64; 2]) -> f64;
    fn grad(&self, p: [f64; 2]) -> [f64; 2];
}

/// A globally defined vector field (analytic reference fluxes).
pub trait ExactVector: Sync {
    fn value(&self, p: [f64; 2]) -> [f64; 2];
}

impl<T: ExactScalar> ScalarData for T {
    fn eval(&self, _tri: usize, p: [f64; 2]) -> f64 {
        self.value(p)
    }
}

impl<T: ExactVector> FluxData for T {
    fn eval(&self, p: [f64; 2], n: [f64; 2]) -> f64 {
        let v = self.value(p);
        v[0] * n[0] + v[1] * n[1]
    }
}

/// A finite element function: a dof map plus one coefficient per global dof.
#[derive(Clone, Debug)]
pub struct FeFunction {
    pub dofmap: Arc<DofMap>,
    pub coeffs: Vec<f64>,
}

impl FeFunction {
    pub fn new(dofmap: Arc<DofMap>, coeffs: Vec<f64>) -> Self {
        assert_eq!(coeffs.len(), dofmap.ndofs, "coefficient/dof count mismatch");
        FeFunction { dofmap, coeffs }
    }

    pub fn zeros(dofmap: Arc<DofMap>) -> Self {
        let n = dofmap.ndofs;
        FeFunction { dofmap, coeffs: vec![0.0; n] }
    }

    /// Scalar value on triangle `t` at barycentric coordinates `bary`.
    pub fn value_bary(&self, t: usize, geom: &ElemGeom, bary: [f64; 3]) -> f64 {
        let basis = self.dofmap.eval_scalar_bary(geom, bary);
        let dofs = self.dofmap.cell_dofs(t);
        (0..basis.n).map(|i| self.coeffs[dofs[i]] * basis.val[i]).sum()
    }

    /// Scalar gradient on triangle `t` at barycentric coordinates `bary`.
    pub fn grad_bary(&self, t: usize, geom: &ElemGeom, bary: [f64; 3]) -> [f64; 2] {
        let basis = self.dofmap.eval_scalar_bary(geom, bary);
        let dofs = self.dofmap.cell_dofs(t);
        let mut g = [0.0, 0.0];
        for i in 0..basis.n {
            g[0] += self.coeffs[dofs[i]] * basis.grad[i][0];
            g[1] += self.coeffs[dofs[i]] * basis.grad[i][1];
        }
        g
    }

    /// Scalar value on triangle `t` at a physical point.
    pub fn value_xy(&self, t: usize, geom: &ElemGeom, p: [f64; 2]) -> f64 {
        self.value_bary(t, geom, geom.barycentric(p))
    }

    /// Vector (RT) value on triangle `t` at a physical point.
    pub fn vec_value_xy(&self, t: usize, geom: &ElemGeom, p: [f64; 2]) -> [f64; 2] {
        let basis = self.dofmap.eval_vector_xy(t, geom, p);
        let dofs = self.dofmap.cell_dofs(t);
        let mut v = [0.0, 0.0];
        for i in 0..basis.n {
            v[0] += self.coeffs[dofs[i]] * basis.val[i][0];
            v[1] += self.coeffs[dofs[i]] * basis.val[i][1];
        }
        v
    }

    /// Divergence of an RT function on triangle `t` at a physical point.
    pub fn div_xy(&self, t: usize, geom: &ElemGeom, p: [f64; 2]) -> f64 {
        let basis = self.dofmap.eval_vector_xy(t, geom, p);
        let dofs = self.dofmap.cell_dofs(t);
        (0..basis.n).map(|i| self.coeffs[dofs[i]] * basis.div[i]).sum()
    }
}

impl ScalarData for FeFunction {
    /// Element-bound evaluation on the function's own mesh.
    fn eval(&self, tri: usize, p: [f64; 2]) -> f64 {
        let geom = ElemGeom::new(&self.dofmap.mesh, tri);
        self.value_xy(tri, &geom, p)
    }
}

/// A strictly positive scalar coefficient (the diffusion field), stored as a
/// Lagrange function with values clamped away from zero.
#[derive(Clone, Debug)]
pub struct CoefficientField {
    pub fe: FeFunction,
    pub floor: f64,
    /// Nodes whose raw value fell below the floor during construction.
    pub clamped: usize,
}

impl CoefficientField {
    pub fn new(dofmap: Arc<DofMap>, mut coeffs: Vec<f64>, floor: f64) -> Self {
        assert!(floor > 0.0, "coefficient floor must be positive");
        assert_eq!(dofmap.space.family, Family::Lagrange);
        let mut clamped = 0;
        for c in &mut coeffs {
            if !(*c >= floor) {
                *c = floor;
                clamped += 1;
            }
        }
        CoefficientField { fe: FeFunction::new(dofmap, coeffs), floor, clamped }
    }

    pub fn constant(dofmap: Arc<DofMap>, value: f64) -> Self {
        let n = dofmap.ndofs;
        Self::new(dofmap, vec![value; n], value.min(1e-6))
    }

    /// Value at a barycentric point; nodal clamping keeps P1 fields positive
    /// everywhere, and the floor is enforced pointwise as a safety net.
    pub fn value_bary(&self, t: usize, geom: &ElemGeom, bary: [f64; 3]) -> f64 {
        self.fe.value_bary(t, geom, bary).max(self.floor)
    }

    pub fn grad_bary(&self, t: usize, geom: &ElemGeom, bary: [f64; 3]) -> [f64; 2] {
        self.fe.grad_bary(t, geom, bary)
    }
}

/// Locates points in a mesh via a uniform background grid. Points slightly
/// outside the mesh (within roundoff or polygonal-boundary gaps) are assigned
/// the nearby triangle maximizing the minimum barycentric coordinate.
#[derive(Clone, Debug)]
pub struct PointLocator {
    lo: [f64; 2],
    inv_cell: f64,
    nx: usize,
    ny: usize,
    /// Triangles whose bounding box overlaps each grid cell.
    bins: Vec<Vec<usize>>,
}

impl PointLocator {
    pub fn new(mesh: &crate::mesh::TriMesh) -> Self {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for v in &mesh.vertices {
            for d in 0..2 {
                lo[d] = lo[d].min(v[d]);
                hi[d] = hi[d].max(v[d]);
            }
        }
        let nt = mesh.triangles.len();
        // Aim for O(1) triangles per cell.
        let target = (nt as f64).sqrt().ceil().max(1.0) as usize;
        let extent = (hi[0] - lo[0]).max(hi[1] - lo[1]).max(1e-300);
        let cell = extent / target as f64;
        let nx = (((hi[0] - lo[0]) / cell).ceil() as usize).max(1);
        let ny = (((hi[1] - lo[1]) / cell).ceil() as usize).max(1);
        let mut bins = vec![Vec::new(); nx * ny];
        let clamp = |i: isize, n: usize| i.clamp(0, n as isize - 1) as usize;
        for (t, tri) in mesh.triangles.iter().enumerate() {
            let mut tlo = [f64::INFINITY; 2];
            let mut thi = [f64::NEG_INFINITY; 2];
            for &v in tri {
                for d in 0..2 {
                    tlo[d] = tlo[d].min(mesh.vertices[v][d]);
                    thi[d] = thi[d].max(mesh.vertices[v][d]);
                }
            }
            let i0 = clamp(((tlo[0] - lo[0]) / cell).floor() as isize, nx);
            let i1 = clamp(((thi[0] - lo[0]) / cell).floor() as isize, nx);
            let j0 = clamp(((tlo[1] - lo[1]) / cell).floor() as isize, ny);
            let j1 = clamp(((thi[1] - lo[1]) / cell).floor() as isize, ny);
            for j in j0..=j1 {
                for i in i0..=i1 {
                    bins[j * nx + i].push(t);
                }
            }
        }
        PointLocator { lo, inv_cell: 1.0 / cell, nx, ny, bins }
    }

    /// Triangle containing `p`, or the best nearby triangle if `p` lies just
    /// outside the mesh. Returns the triangle index and barycentric
    /// coordinates; `None` only when the point is far from every candidate.
    pub fn locate(&self, mesh: &crate::mesh::TriMesh, p: [f64; 2]) -> Option<(usize, [f64; 3])> {
        let ci = (((p[0] - self.lo[0]) * self.inv_cell).floor() as isize).clamp(0, self.nx as isize - 1);
        let cj = (((p[1] - self.lo[1]) * self.inv_cell).floor() as isize).clamp(0, self.ny as isize - 1);
        let mut best: Option<(usize, [f64; 3], f64)> = None;
        // Search the home cell first, then a growing ring of neighbors.
        for ring in 0..3isize {
            for dj in -ring..=ring {
                for di in -ring..=ring {
                    if di.abs() != ring && dj.abs() != ring {
                        continue;
                    }
                    let (i, j) = (ci + di, cj + dj);
                    if i < 0 || j < 0 || i >= self.nx as isize || j >= self.ny as isize {
                        continue;
                    }
                    for &t in &self.bins[j as usize * self.nx + i as usize] {
                        let geom = ElemGeom::new(mesh, t);
                        let bary = geom.barycentric(p);
                        let min_b = bary[0].min(bary[1]).min(bary[2]);
                        if best.map_or(true, |(_, _, mb)| min_b > mb) {
                            best = Some((t, bary, min_b));
                        }
                    }
                }
            }
            // A strictly interior hit cannot be beaten; stop expanding.
            if best.map_or(false, |(_, _, mb)| mb >= 0.0) {
                break;
            }
        }
        match best {
            Some((t, bary, min_b)) if min_b > -1e-6 => Some((t, bary)),
            _ => None,
        }
    }
}
