//! Conforming triangle meshes of the unit square and the unit disc.
//!
//! Meshes are plain data: vertices, counter-clockwise triangles, and derived
//! edge connectivity. Edges are stored in canonical order (lower vertex index
//! first); the canonical direction fixes the global sign convention for
//! Raviart-Thomas degrees of freedom. Regions (the data zone ω, the
//! observation zones) are tagged element-wise by barycenter membership, and
//! boundary sectors edge-wise by midpoint membership, so no cut cells arise.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

/// Region id of the interior data zone ω.
pub const REGION_OMEGA: u32 = 1;
/// Region id of the observation half Ω₋ = {x ≤ 0}.
pub const REGION_OMIN: u32 = 2;
/// Region id of the compactly contained target set B.
pub const REGION_B: u32 = 3;
/// Boundary tag of the Neumann sector Γ_N.
pub const BDRY_NEUMANN: u32 = 1;

/// Errors from mesh construction and serialization.
#[derive(Debug)]
pub enum MeshError {
    /// A constructor precondition was violated.
    InvalidParam(String),
    /// ASCII mesh text could not be parsed; carries the 1-based line number.
    Parse { line: usize, msg: String },
    /// Underlying I/O failure.
    Io(std::io::Error),
}

impl fmt::Display for MeshError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MeshError::InvalidParam(msg) => write!(f, "invalid parameter: {msg}"),
            MeshError::Parse { line, msg } => write!(f, "mesh parse error at line {line}: {msg}"),
            MeshError::Io(e) => write!(f, "mesh i/o error: {e}"),
        }
    }
}

impl std::error::Error for MeshError {}

impl From<std::io::Error> for MeshError {
    fn from(e: std::io::Error) -> Self {
        MeshError::Io(e)
    }
}

/// Closed-form membership predicate on (x, y). The catalogue covers every
/// region used by the experiments; predicates are total on Ω̄.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum RegionPred {
    /// Entire domain.
    All,
    /// Empty region.
    None,
    /// Annular sector with a vertical cut: `r2_min < x² + y² < r2_max` and `x ≤ x_max`.
    AnnulusSectorX { r2_min: f64, r2_max: f64, x_max: f64 },
    /// Polar-angle sector `theta_min ≤ θ ≤ theta_max`, θ = atan2(y, x) normalized to [0, 2π).
    PolarSector { theta_min: f64, theta_max: f64 },
}

impl RegionPred {
    /// Evaluates the predicate at a point.
    pub fn contains(&self, p: [f64; 2]) -> bool {
        match *self {
            RegionPred::All => true,
            RegionPred::None => false,
            RegionPred::AnnulusSectorX { r2_min, r2_max, x_max } => {
                let r2 = p[0] * p[0] + p[1] * p[1];
                r2_min < r2 && r2 < r2_max && p[0] <= x_max
            }
            RegionPred::PolarSector { theta_min, theta_max } => {
                let mut theta = p[1].atan2(p[0]);
                if theta < 0.0 {
                    theta += 2.0 * std::f64::consts::PI;
                }
                theta_min <= theta && theta <= theta_max
            }
        }
    }
}

/// A tagged region: id plus membership predicate.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RegionSpec {
    pub id: u32,
    pub pred: RegionPred,
}

impl RegionSpec {
    /// The data zone ω = {0.75 < x² + y² < 1, x < 0.5} of the disc experiments.
    pub fn omega_disc() -> Self {
        RegionSpec {
            id: REGION_OMEGA,
            pred: RegionPred::AnnulusSectorX { r2_min: 0.75, r2_max: 1.0, x_max: 0.5 },
        }
    }

    /// The observation half Ω₋ = {x ≤ 0}.
    pub fn omega_minus() -> Self {
        RegionSpec {
            id: REGION_OMIN,
            pred: RegionPred::AnnulusSectorX {
                r2_min: f64::NEG_INFINITY,
                r2_max: f64::INFINITY,
                x_max: 0.0,
            },
        }
    }

    /// A compactly contained target set B = {x² + y² < 0.81, x ≤ 0},
    /// the interior half-disc used for the supplementary error columns.
    pub fn target_b() -> Self {
        RegionSpec {
            id: REGION_B,
            pred: RegionPred::AnnulusSectorX { r2_min: f64::NEG_INFINITY, r2_max: 0.81, x_max: 0.0 },
        }
    }

    /// The Neumann sector θ ∈ [0, 3π/2] of the reconstruction experiment.
    pub fn neumann_sector() -> Self {
        RegionSpec {
            id: BDRY_NEUMANN,
            pred: RegionPred::PolarSector { theta_min: 0.0, theta_max: 1.5 * std::f64::consts::PI },
        }
    }
}

/// Conforming triangulation with oriented edges and region tags.
///
/// `tri_edges[t][k]` is the edge opposite local vertex `k` of triangle `t`,
/// together with its orientation sign: `+1` when the counter-clockwise
/// traversal of the triangle walks the edge from its lower to its higher
/// vertex index (so the triangle's outward normal on that edge equals the
/// canonical edge normal), `-1` otherwise.
#[derive(Clone, Debug)]
pub struct TriMesh {
    /// Vertex coordinates.
    pub vertices: Vec<[f64; 2]>,
    /// Vertex-index triples, counter-clockwise.
    pub triangles: Vec<[usize; 3]>,
    /// Vertex-index pairs in canonical order (lower index first).
    pub edges: Vec<[usize; 2]>,
    /// Per triangle: (edge index, orientation sign) for the edge opposite each local vertex.
    pub tri_edges: Vec<[(usize, i8); 3]>,
    /// Per edge: the one or two incident triangles as (triangle, local edge slot).
    pub edge_tris: Vec<[Option<(usize, u8)>; 2]>,
    /// Edge indices lying on ∂Ω.
    pub boundary_edges: Vec<usize>,
    /// Region id → tagged triangle set.
    pub tri_region_tags: BTreeMap<u32, BTreeSet<usize>>,
    /// Boundary tag id → tagged boundary edge set.
    pub edge_boundary_tags: BTreeMap<u32, BTreeSet<usize>>,
    /// Region specs retained so refinement can re-evaluate the tags.
    pub tri_region_specs: Vec<RegionSpec>,
    /// Boundary specs retained so refinement can re-evaluate the tags.
    pub edge_boundary_specs: Vec<RegionSpec>,
    /// Boundary vertices are constrained to the unit circle.
    pub on_disc: bool,
}

impl TriMesh {
    /// Builds a mesh from vertices and triangles, deriving all connectivity.
    /// No invariants are checked; see [`TriMesh::validate`].
    pub fn from_raw(vertices: Vec<[f64; 2]>, triangles: Vec<[usize; 3]>, on_disc: bool) -> Self {
        let mut edge_index: HashMap<[usize; 2], usize> = HashMap::new();
        let mut edges: Vec<[usize; 2]> = Vec::new();
        let mut tri_edges = vec![[(0usize, 0i8); 3]; triangles.len()];
        let mut edge_tris: Vec<[Option<(usize, u8)>; 2]> = Vec::new();
        for (t, tri) in triangles.iter().enumerate() {
            for k in 0..3 {
                // Edge opposite local vertex k, walked CCW as (v_{k+1}, v_{k+2}).
                let a = tri[(k + 1) % 3];
                let b = tri[(k + 2) % 3];
                let key = [a.min(b), a.max(b)];
                let e = *edge_index.entry(key).or_insert_with(|| {
                    edges.push(key);
                    edge_tris.push([None, None]);
                    edges.len() - 1
                });
                let sign = if a < b { 1 } else { -1 };
                tri_edges[t][k] = (e, sign);
                let slot = &mut edge_tris[e];
                if slot[0].is_none() {
                    slot[0] = Some((t, k as u8));
                } else if slot[1].is_none() {
                    slot[1] = Some((t, k as u8));
                }
                // More than two incident triangles is reported by validate().
            }
        }
        let boundary_edges: Vec<usize> =
            (0..edges.len()).filter(|&e| edge_tris[e][1].is_none()).collect();
        TriMesh {
            vertices,
            triangles,
            edges,
            tri_edges,
            edge_tris,
            boundary_edges,
            tri_region_tags: BTreeMap::new(),
            edge_boundary_tags: BTreeMap::new(),
            tri_region_specs: Vec::new(),
            edge_boundary_specs: Vec::new(),
            on_disc,
        }
    }

    /// Signed area of triangle `t` (positive for CCW).
    pub fn tri_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        let p = &self.vertices;
        0.5 * ((p[b][0] - p[a][0]) * (p[c][1] - p[a][1])
            - (p[c][0] - p[a][0]) * (p[b][1] - p[a][1]))
    }

    /// Barycenter of triangle `t`.
    pub fn barycenter(&self, t: usize) -> [f64; 2] {
        let [a, b, c] = self.triangles[t];
        let p = &self.vertices;
        [
            (p[a][0] + p[b][0] + p[c][0]) / 3.0,
            (p[a][1] + p[b][1] + p[c][1]) / 3.0,
        ]
    }

    /// Diameter of triangle `t` (its longest edge).
    pub fn tri_diameter(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        let p = &self.vertices;
        let d2 = |u: [f64; 2], v: [f64; 2]| (u[0] - v[0]).powi(2) + (u[1] - v[1]).powi(2);
        d2(p[a], p[b]).max(d2(p[b], p[c])).max(d2(p[c], p[a])).sqrt()
    }

    /// Edge length.
    pub fn edge_length(&self, e: usize) -> f64 {
        let [a, b] = self.edges[e];
        let p = &self.vertices;
        ((p[a][0] - p[b][0]).powi(2) + (p[a][1] - p[b][1]).powi(2)).sqrt()
    }

    /// Edge midpoint.
    pub fn edge_midpoint(&self, e: usize) -> [f64; 2] {
        let [a, b] = self.edges[e];
        let p = &self.vertices;
        [(p[a][0] + p[b][0]) / 2.0, (p[a][1] + p[b][1]) / 2.0]
    }

    /// Unit normal of the canonical edge direction (lower → higher vertex
    /// index), rotated clockwise, i.e. `(t_y, -t_x)`. For a triangle walking
    /// the edge with orientation sign `s`, the outward normal is `s` times this.
    pub fn edge_canonical_normal(&self, e: usize) -> [f64; 2] {
        let [a, b] = self.edges[e];
        let p = &self.vertices;
        let tx = p[b][0] - p[a][0];
        let ty = p[b][1] - p[a][1];
        let len = (tx * tx + ty * ty).sqrt();
        [ty / len, -tx / len]
    }

    /// Outward unit normal of a boundary edge.
    pub fn boundary_outward_normal(&self, e: usize) -> [f64; 2] {
        let (t, k) = self.edge_tris[e][0].expect("edge has an incident triangle");
        let sign = self.tri_edges[t][k as usize].1 as f64;
        let n = self.edge_canonical_normal(e);
        [sign * n[0], sign * n[1]]
    }

    /// Whether edge `e` lies on the boundary.
    pub fn is_boundary_edge(&self, e: usize) -> bool {
        self.edge_tris[e][1].is_none()
    }

    /// Membership mask of a tagged triangle region (all-false for unknown ids).
    pub fn region_mask(&self, id: u32) -> Vec<bool> {
        let mut mask = vec![false; self.triangles.len()];
        if let Some(set) = self.tri_region_tags.get(&id) {
            for &t in set {
                mask[t] = true;
            }
        }
        mask
    }

    /// Total area of a tagged triangle region.
    pub fn region_area(&self, id: u32) -> f64 {
        self.tri_region_tags
            .get(&id)
            .map(|set| set.iter().map(|&t| self.tri_area(t)).sum())
            .unwrap_or(0.0)
    }

    /// Checks every structural invariant and returns the list of violations
    /// (empty means valid).
    pub fn validate(&self) -> Vec<String> {
        let mut problems = Vec::new();
        let nv = self.vertices.len();
        for (i, v) in self.vertices.iter().enumerate() {
            if !v[0].is_finite() || !v[1].is_finite() {
                problems.push(format!("vertex {i} has non-finite coordinates"));
            }
        }
        for (t, tri) in self.triangles.iter().enumerate() {
            if tri.iter().any(|&v| v >= nv) {
                problems.push(format!("triangle {t} references a vertex out of range"));
                continue;
            }
            if tri[0] == tri[1] || tri[1] == tri[2] || tri[0] == tri[2] {
                problems.push(format!("triangle {t} repeats a vertex"));
                continue;
            }
            if self.tri_area(t) <= 0.0 {
                problems.push(format!(
                    "triangle {t} has non-positive signed area {:.3e}",
                    self.tri_area(t)
                ));
            }
        }
        // Edge incidence and cross-edge orientation. A conforming CCW mesh
        // walks every interior edge once in each direction.
        let mut incidence = vec![0usize; self.edges.len()];
        for te in &self.tri_edges {
            for &(e, _) in te {
                incidence[e] += 1;
            }
        }
        for (e, &count) in incidence.iter().enumerate() {
            if count > 2 {
                problems.push(format!("edge {e} is shared by {count} triangles (non-conforming)"));
            }
        }
        for (e, slots) in self.edge_tris.iter().enumerate() {
            if let [Some((t1, k1)), Some((t2, k2))] = slots {
                let s1 = self.tri_edges[*t1][*k1 as usize].1;
                let s2 = self.tri_edges[*t2][*k2 as usize].1;
                if s1 == s2 {
                    problems.push(format!(
                        "edge {e} is walked in the same direction by triangles {t1} and {t2}"
                    ));
                }
            }
        }
        // Hanging vertices: a vertex in the strict interior of a boundary edge
        // means a neighbor was refined without matching this side.
        for &e in &self.boundary_edges {
            let [a, b] = self.edges[e];
            let (pa, pb) = (self.vertices[a], self.vertices[b]);
            let len2 = (pb[0] - pa[0]).powi(2) + (pb[1] - pa[1]).powi(2);
            for (v, p) in self.vertices.iter().enumerate() {
                if v == a || v == b {
                    continue;
                }
                let s = ((p[0] - pa[0]) * (pb[0] - pa[0]) + (p[1] - pa[1]) * (pb[1] - pa[1])) / len2;
                if s <= 1e-12 || s >= 1.0 - 1e-12 {
                    continue;
                }
                let qx = pa[0] + s * (pb[0] - pa[0]);
                let qy = pa[1] + s * (pb[1] - pa[1]);
                if ((p[0] - qx).powi(2) + (p[1] - qy).powi(2)).sqrt() <= 1e-12 * len2.sqrt() {
                    problems.push(format!("vertex {v} hangs on boundary edge {e}"));
                }
            }
        }
        // Euler relation for disc topology.
        let euler = self.vertices.len() as i64 - self.edges.len() as i64
            + self.triangles.len() as i64;
        if euler != 1 {
            problems.push(format!("Euler characteristic V-E+T = {euler}, expected 1"));
        }
        if self.on_disc {
            for &e in &self.boundary_edges {
                for &v in &self.edges[e] {
                    let p = self.vertices[v];
                    let r2 = p[0] * p[0] + p[1] * p[1];
                    if (r2 - 1.0).abs() > 1e-12 {
                        problems.push(format!(
                            "boundary vertex {v} off the unit circle by |r²-1| = {:.3e}",
                            (r2 - 1.0).abs()
                        ));
                    }
                }
            }
        }
        problems
    }
}

/// Largest triangle diameter, h = max_T diam(T).
pub fn mesh_size(mesh: &TriMesh) -> f64 {
    (0..mesh.triangles.len())
        .map(|t| mesh.tri_diameter(t))
        .fold(0.0, f64::max)
}

/// Structured mesh of the unit square [0,1]² with `n` subdivisions per side
/// and cell diagonals oriented lower-left to upper-right.
pub fn unit_square_mesh(n: usize) -> Result<TriMesh, MeshError> {
    if n == 0 {
        return Err(MeshError::InvalidParam("unit_square_mesh: n must be ≥ 1".into()));
    }
    let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            vertices.push([i as f64 / n as f64, j as f64 / n as f64]);
        }
    }
    let idx = |i: usize, j: usize| j * (n + 1) + i;
    let mut triangles = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            let (a, b, c, d) = (idx(i, j), idx(i + 1, j), idx(i + 1, j + 1), idx(i, j + 1));
            triangles.push([a, b, c]);
            triangles.push([a, c, d]);
        }
    }
    Ok(TriMesh::from_raw(vertices, triangles, false))
}

/// Unstructured-quality mesh of the unit disc: a regular hexagon fan refined
/// uniformly, with new boundary vertices projected radially to the unit
/// circle, until `mesh_size ≤ 1.2 · h_target`. The boundary stays polygonal.
pub fn unit_disc_mesh(h_target: f64) -> Result<TriMesh, MeshError> {
    if !(h_target > 0.0 && h_target < 2.0) {
        return Err(MeshError::InvalidParam(format!(
            "unit_disc_mesh: h_target must lie in (0, 2), got {h_target}"
        )));
    }
    let mut vertices = vec![[0.0, 0.0]];
    for i in 0..6 {
        let theta = std::f64::consts::PI / 3.0 * i as f64;
        vertices.push([theta.cos(), theta.sin()]);
    }
    let triangles = (0..6).map(|i| [0, 1 + i, 1 + (i + 1) % 6]).collect();
    let mut mesh = TriMesh::from_raw(vertices, triangles, true);
    while mesh_size(&mesh) > 1.2 * h_target {
        mesh = refine_uniform(&mesh);
    }
    Ok(mesh)
}

/// Uniform red refinement: each triangle splits into four via its edge
/// midpoints. New vertices are appended as `[old vertices..., midpoint of
/// edge 0, midpoint of edge 1, ...]` and the four children of parent `t` are
/// triangles `4t..4t+4`, so nodal fields transfer by construction. On disc
/// meshes, boundary midpoints are projected radially to the unit circle.
/// Region tags are re-derived from the stored specs (tags without a spec,
/// e.g. from a file, are inherited from the parent).
pub fn refine_uniform(mesh: &TriMesh) -> TriMesh {
    let nv = mesh.vertices.len();
    let mut vertices = mesh.vertices.clone();
    for e in 0..mesh.edges.len() {
        let mut m = mesh.edge_midpoint(e);
        if mesh.on_disc && mesh.is_boundary_edge(e) {
            let r = (m[0] * m[0] + m[1] * m[1]).sqrt();
            m = [m[0] / r, m[1] / r];
        }
        vertices.push(m);
    }
    let mut triangles = Vec::with_capacity(4 * mesh.triangles.len());
    for (t, tri) in mesh.triangles.iter().enumerate() {
        let [v0, v1, v2] = *tri;
        // Midpoint opposite local vertex k.
        let m = [
            nv + mesh.tri_edges[t][0].0,
            nv + mesh.tri_edges[t][1].0,
            nv + mesh.tri_edges[t][2].0,
        ];
        triangles.push([v0, m[2], m[1]]);
        triangles.push([v1, m[0], m[2]]);
        triangles.push([v2, m[1], m[0]]);
        triangles.push([m[0], m[1], m[2]]);
    }
    let mut fine = TriMesh::from_raw(vertices, triangles, mesh.on_disc);
    // Re-derive tags: prefer predicate re-evaluation, fall back to inheritance.
    let specs = mesh.tri_region_specs.clone();
    let spec_ids: BTreeSet<u32> = specs.iter().map(|s| s.id).collect();
    for spec in specs {
        fine = tag_triangles(fine, spec);
    }
    for (&id, parents) in &mesh.tri_region_tags {
        if spec_ids.contains(&id) {
            continue;
        }
        let mut set = BTreeSet::new();
        for &p in parents {
            set.extend(4 * p..4 * p + 4);
        }
        fine.tri_region_tags.insert(id, set);
    }
    let especs = mesh.edge_boundary_specs.clone();
    for spec in especs {
        fine = tag_boundary_edges(fine, spec);
    }
    fine
}

/// Tags the triangles whose barycenter satisfies the predicate. Re-tagging
/// with the same id replaces the previous tag set; the spec is stored so
/// refinement can re-evaluate it.
pub fn tag_triangles(mut mesh: TriMesh, spec: RegionSpec) -> TriMesh {
    let set: BTreeSet<usize> = (0..mesh.triangles.len())
        .filter(|&t| spec.pred.contains(mesh.barycenter(t)))
        .collect();
    mesh.tri_region_tags.insert(spec.id, set);
    mesh.tri_region_specs.retain(|s| s.id != spec.id);
    mesh.tri_region_specs.push(spec);
    mesh
}

/// Tags the boundary edges whose midpoint satisfies the predicate.
pub fn tag_boundary_edges(mut mesh: TriMesh, spec: RegionSpec) -> TriMesh {
    let set: BTreeSet<usize> = mesh
        .boundary_edges
        .iter()
        .copied()
        .filter(|&e| spec.pred.contains(mesh.edge_midpoint(e)))
        .collect();
    mesh.edge_boundary_tags.insert(spec.id, set);
    mesh.edge_boundary_specs.retain(|s| s.id != spec.id);
    mesh.edge_boundary_specs.push(spec);
    mesh
}

/// Serializes the mesh in the ASCII interchange format:
/// a header `trimesh <nv> <nt>`, one `x y` line per vertex, one `v0 v1 v2`
/// line per triangle, then one `region <id> <count>` block per tagged region
/// followed by the sorted triangle indices. Coordinates are written with 17
/// significant digits so the round trip is exact.
pub fn write_ascii(mesh: &TriMesh) -> String {
    let mut out = String::new();
    out.push_str(&format!("trimesh {} {}\n", mesh.vertices.len(), mesh.triangles.len()));
    for v in &mesh.vertices {
        out.push_str(&format!("{:.17e} {:.17e}\n", v[0], v[1]));
    }
    for t in &mesh.triangles {
        out.push_str(&format!("{} {} {}\n", t[0], t[1], t[2]));
    }
    for (&id, set) in &mesh.tri_region_tags {
        out.push_str(&format!("region {} {}\n", id, set.len()));
        for &t in set {
            out.push_str(&format!("{t}\n"));
        }
    }
    out
}

/// Parses the ASCII interchange format written by [`write_ascii`].
/// Connectivity is re-derived; the disc flag is inferred from the boundary
/// vertices all lying on the unit circle.
pub fn read_ascii(text: &str) -> Result<TriMesh, MeshError> {
    let mut tokens: Vec<(usize, &str)> = Vec::new();
    for (ln, line) in text.lines().enumerate() {
        for tok in line.split_whitespace() {
            tokens.push((ln + 1, tok));
        }
    }
    fn next<'a>(
        tokens: &[(usize, &'a str)],
        pos: &mut usize,
        what: &str,
    ) -> Result<(usize, &'a str), MeshError> {
        let t = tokens.get(*pos).copied().ok_or_else(|| MeshError::Parse {
            line: tokens.last().map(|&(l, _)| l).unwrap_or(0),
            msg: format!("unexpected end of input, expected {what}"),
        })?;
        *pos += 1;
        Ok(t)
    }
    let mut pos = 0usize;
    let (line, magic) = next(&tokens, &mut pos, "header")?;
    if magic != "trimesh" {
        return Err(MeshError::Parse { line, msg: format!("expected 'trimesh', got '{magic}'") });
    }
    let parse_usize = |(line, tok): (usize, &str)| -> Result<usize, MeshError> {
        tok.parse().map_err(|_| MeshError::Parse { line, msg: format!("expected integer, got '{tok}'") })
    };
    let parse_f64 = |(line, tok): (usize, &str)| -> Result<f64, MeshError> {
        tok.parse().map_err(|_| MeshError::Parse { line, msg: format!("expected number, got '{tok}'") })
    };
    let nv = parse_usize(next(&tokens, &mut pos, "vertex count")?)?;
    let nt = parse_usize(next(&tokens, &mut pos, "triangle count")?)?;
    let mut vertices = Vec::with_capacity(nv);
    for _ in 0..nv {
        let x = parse_f64(next(&tokens, &mut pos, "x coordinate")?)?;
        let y = parse_f64(next(&tokens, &mut pos, "y coordinate")?)?;
        vertices.push([x, y]);
    }
    let mut triangles = Vec::with_capacity(nt);
    for _ in 0..nt {
        let a = parse_usize(next(&tokens, &mut pos, "vertex index")?)?;
        let b = parse_usize(next(&tokens, &mut pos, "vertex index")?)?;
        let c = parse_usize(next(&tokens, &mut pos, "vertex index")?)?;
        triangles.push([a, b, c]);
    }
    let mut tags: BTreeMap<u32, BTreeSet<usize>> = BTreeMap::new();
    while pos < tokens.len() {
        let (line, kw) = next(&tokens, &mut pos, "'region'")?;
        if kw != "region" {
            return Err(MeshError::Parse { line, msg: format!("expected 'region', got '{kw}'") });
        }
        let id = parse_usize(next(&tokens, &mut pos, "region id")?)? as u32;
        let count = parse_usize(next(&tokens, &mut pos, "region count")?)?;
        let mut set = BTreeSet::new();
        for _ in 0..count {
            let t = parse_usize(next(&tokens, &mut pos, "triangle index")?)?;
            if t >= nt {
                return Err(MeshError::Parse {
                    line,
                    msg: format!("region {id} references triangle {t} out of range"),
                });
            }
            set.insert(t);
        }
        tags.insert(id, set);
    }
    let mut mesh = TriMesh::from_raw(vertices, triangles, false);
    let on_circle = mesh.boundary_edges.iter().all(|&e| {
        mesh.edges[e].iter().all(|&v| {
            let p = mesh.vertices[v];
            (p[0] * p[0] + p[1] * p[1] - 1.0).abs() <= 1e-12
        })
    });
    mesh.on_disc = on_circle && !mesh.boundary_edges.is_empty();
    mesh.tri_region_tags = tags;
    Ok(mesh)
}
