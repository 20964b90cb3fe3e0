//! Closed-form field catalogue: harmonic polar modes, low-order polynomials
//! and Gaussian bumps, plus wrappers that turn finite element functions on a
//! fine data mesh into evaluable data on coarser study meshes and inject
//! deterministic elementwise noise.

use std::sync::Arc;

use crate::fem::{
    CoefficientField, ElemGeom, ExactScalar, ExactVector, FeFunction, PointLocator, ScalarData,
};
use crate::mesh::TriMesh;

/// Named analytic scalar fields. The catalogue covers every closed-form
/// solution, boundary datum and target coefficient the experiments need; no
/// expression parser exists on purpose.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Field {
    /// Constant value.
    Constant(f64),
    /// The coordinate x.
    X,
    /// The coordinate y.
    Y,
    /// x + y, the linear consistency solution.
    XPlusY,
    /// x² − y², a harmonic quadratic.
    X2MinusY2,
    /// r^m sin(mθ) for `odd = true`, r^m cos(mθ) otherwise; both harmonic.
    Harmonic { m: u32, odd: bool },
    /// r^{k1} cos(k1 θ) + r^{k2} sin(k2 θ): the harmonic extension of the
    /// boundary datum cos(k1 θ) + sin(k2 θ) on the unit circle.
    HarmonicPair { k1: u32, k2: u32 },
    /// base + amp · exp(−(x−x0)² − (y−y0)²).
    GaussianBump { base: f64, amp: f64, x0: f64, y0: f64 },
}

/// Re and Im of (x + iy)^m by the real multiplication recurrence.
fn complex_pow(p: [f64; 2], m: u32) -> [f64; 2] {
    let mut re = 1.0;
    let mut im = 0.0;
    for _ in 0..m {
        let r = re * p[0] - im * p[1];
        im = re * p[1] + im * p[0];
        re = r;
    }
    [re, im]
}

/// Value and gradient of Re z^m (cos branch) or Im z^m (sin branch).
fn harmonic_mode(p: [f64; 2], m: u32, odd: bool) -> (f64, [f64; 2]) {
    let z = complex_pow(p, m);
    if m == 0 {
        return (if odd { 0.0 } else { 1.0 }, [0.0, 0.0]);
    }
    // d/dz z^m = m z^{m−1}; for f = Re z^m the gradient is m(Re w, −Im w)
    // with w = z^{m−1}, for f = Im z^m it is m(Im w, Re w).
    let w = complex_pow(p, m - 1);
    let mf = f64::from(m);
    if odd {
        (z[1], [mf * w[1], mf * w[0]])
    } else {
        (z[0], [mf * w[0], -mf * w[1]])
    }
}

impl Field {
    /// Parses a catalogue name. Forms: `zero`, `one`, `x`, `y`, `x+y`,
    /// `x2-y2`, `const:V`, `rm_sin:M`, `rm_cos:M`, `harmonic_pair:K1:K2`,
    /// `bump:BASE:AMP:X0:Y0`, and `gaussian_bump` for the reconstruction
    /// target 1 + exp(−(x+0.3)² − (y−0.3)²).
    pub fn parse(name: &str) -> Option<Field> {
        let parts: Vec<&str> = name.split(':').collect();
        match parts.as_slice() {
            ["zero"] => Some(Field::Constant(0.0)),
            ["one"] => Some(Field::Constant(1.0)),
            ["x"] => Some(Field::X),
            ["y"] => Some(Field::Y),
            ["x+y"] => Some(Field::XPlusY),
            ["x2-y2"] => Some(Field::X2MinusY2),
            ["gaussian_bump"] => {
                Some(Field::GaussianBump { base: 1.0, amp: 1.0, x0: -0.3, y0: 0.3 })
            }
            ["const", v] => v.parse().ok().map(Field::Constant),
            ["rm_sin", m] => m.parse().ok().map(|m| Field::Harmonic { m, odd: true }),
            ["rm_cos", m] => m.parse().ok().map(|m| Field::Harmonic { m, odd: false }),
            ["harmonic_pair", k1, k2] => match (k1.parse(), k2.parse()) {
                (Ok(k1), Ok(k2)) => Some(Field::HarmonicPair { k1, k2 }),
                _ => None,
            },
            ["bump", base, amp, x0, y0] => {
                match (base.parse(), amp.parse(), x0.parse(), y0.parse()) {
                    (Ok(base), Ok(amp), Ok(x0), Ok(y0)) => {
                        Some(Field::GaussianBump { base, amp, x0, y0 })
                    }
                    _ => None,
                }
            }
            _ => None,
        }
    }

    /// The catalogue name that [`Field::parse`] maps back to this field.
    pub fn name(&self) -> String {
        match *self {
            Field::Constant(v) => format!("const:{v}"),
            Field::X => "x".into(),
            Field::Y => "y".into(),
            Field::XPlusY => "x+y".into(),
            Field::X2MinusY2 => "x2-y2".into(),
            Field::Harmonic { m, odd: true } => format!("rm_sin:{m}"),
            Field::Harmonic { m, odd: false } => format!("rm_cos:{m}"),
            Field::HarmonicPair { k1, k2 } => format!("harmonic_pair:{k1}:{k2}"),
            Field::GaussianBump { base, amp, x0, y0 } => format!("bump:{base}:{amp}:{x0}:{y0}"),
        }
    }
}

impl ExactScalar for Field {
    fn value(&self, p: [f64; 2]) -> f64 {
        match *self {
            Field::Constant(v) => v,
            Field::X => p[0],
            Field::Y => p[1],
            Field::XPlusY => p[0] + p[1],
            Field::X2MinusY2 => p[0] * p[0] - p[1] * p[1],
            Field::Harmonic { m, odd } => harmonic_mode(p, m, odd).0,
            Field::HarmonicPair { k1, k2 } => {
                harmonic_mode(p, k1, false).0 + harmonic_mode(p, k2, true).0
            }
            Field::GaussianBump { base, amp, x0, y0 } => {
                let dx = p[0] - x0;
                let dy = p[1] - y0;
                base + amp * (-dx * dx - dy * dy).exp()
            }
        }
    }

    fn grad(&self, p: [f64; 2]) -> [f64; 2] {
        match *self {
            Field::Constant(_) => [0.0, 0.0],
            Field::X => [1.0, 0.0],
            Field::Y => [0.0, 1.0],
            Field::XPlusY => [1.0, 1.0],
            Field::X2MinusY2 => [2.0 * p[0], -2.0 * p[1]],
            Field::Harmonic { m, odd } => harmonic_mode(p, m, odd).1,
            Field::HarmonicPair { k1, k2 } => {
                let gc = harmonic_mode(p, k1, false).1;
                let gs = harmonic_mode(p, k2, true).1;
                [gc[0] + gs[0], gc[1] + gs[1]]
            }
            Field::GaussianBump { amp, x0, y0, .. } => {
                let dx = p[0] - x0;
                let dy = p[1] - y0;
                let e = amp * (-dx * dx - dy * dy).exp();
                [-2.0 * dx * e, -2.0 * dy * e]
            }
        }
    }
}

/// The flux scale · ∇u of a catalogue field, usable directly as Neumann data
/// for constant-γ problems.
#[derive(Clone, Copy, Debug)]
pub struct FluxField {
    pub field: Field,
    pub scale: f64,
}

impl ExactVector for FluxField {
    fn value(&self, p: [f64; 2]) -> [f64; 2] {
        let g = self.field.grad(p);
        [self.scale * g[0], self.scale * g[1]]
    }
}

/// A finite element function frozen on its own (typically finer) mesh and
/// re-evaluated anywhere through point location, so it can serve as data or
/// reference on a different study mesh.
pub struct SampledField {
    fe: FeFunction,
    mesh: Arc<TriMesh>,
    locator: PointLocator,
}

impl SampledField {
    pub fn new(fe: FeFunction) -> Self {
        let mesh = fe.dofmap.mesh.clone();
        let locator = PointLocator::new(&mesh);
        SampledField { fe, mesh, locator }
    }

    fn locate(&self, p: [f64; 2]) -> (usize, [f64; 3]) {
        self.locator
            .locate(&self.mesh, p)
            .unwrap_or_else(|| panic!("point {p:?} lies outside the sampled mesh"))
    }
}

// ScalarData comes for free through the blanket ExactScalar impl; the
// caller's element index is meaningless on a foreign mesh anyway.
impl ExactScalar for SampledField {
    fn value(&self, p: [f64; 2]) -> f64 {
        let (t, b) = self.locate(p);
        self.fe.value_bary(t, &ElemGeom::new(&self.mesh, t), b)
    }

    fn grad(&self, p: [f64; 2]) -> [f64; 2] {
        let (t, b) = self.locate(p);
        self.fe.grad_bary(t, &ElemGeom::new(&self.mesh, t), b)
    }
}

/// The conormal field γ∇u of a finite element solution under its own
/// coefficient, evaluated through point location; serves both as sampled
/// Neumann data (through the blanket [`FluxData`] impl) and as the reference
/// flux for interpolation-based error measures.
pub struct SampledFlux {
    u: FeFunction,
    gamma: CoefficientField,
    mesh: Arc<TriMesh>,
    locator: PointLocator,
}

impl SampledFlux {
    pub fn new(u: FeFunction, gamma: CoefficientField) -> Self {
        let mesh = u.dofmap.mesh.clone();
        assert!(Arc::ptr_eq(&mesh, &gamma.fe.dofmap.mesh), "flux fields must share a mesh");
        let locator = PointLocator::new(&mesh);
        SampledFlux { u, gamma, mesh, locator }
    }
}

impl ExactVector for SampledFlux {
    fn value(&self, p: [f64; 2]) -> [f64; 2] {
        let (t, b) = self
            .locator
            .locate(&self.mesh, p)
            .unwrap_or_else(|| panic!("point {p:?} lies outside the sampled mesh"));
        let geom = ElemGeom::new(&self.mesh, t);
        let g = self.u.grad_bary(t, &geom, b);
        let gamma = self.gamma.value_bary(t, &geom, b);
        [gamma * g[0], gamma * g[1]]
    }
}

/// A scalar datum plus one constant offset per element of the study mesh:
/// the elementwise-uniform noise model of the perturbation experiments.
pub struct NoisyScalar<'a> {
    pub base: &'a dyn ScalarData,
    pub offsets: Vec<f64>,
}

impl ScalarData for NoisyScalar<'_> {
    fn eval(&self, tri: usize, p: [f64; 2]) -> f64 {
        self.base.eval(tri, p) + self.offsets[tri]
    }
}

impl NoisyScalar<'_> {
    /// L² norm of the offset part over a tagged region (`None` = whole mesh);
    /// exact because the offsets are elementwise constant.
    pub fn offset_norm(&self, mesh: &TriMesh, region: Option<u32>) -> f64 {
        let mask = match region {
            Some(id) => mesh.region_mask(id),
            None => vec![true; mesh.triangles.len()],
        };
        let mut sum = 0.0;
        for (t, &keep) in mask.iter().enumerate() {
            if keep {
                sum += mesh.tri_area(t) * self.offsets[t] * self.offsets[t];
            }
        }
        sum.sqrt()
    }
}
