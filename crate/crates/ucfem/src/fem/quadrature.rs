//! Fixed quadrature rules: a 12-point degree-6 triangle rule and a 5-point
//! Gauss-Legendre edge rule (exact through degree 9).
//!
//! Triangle points are barycentric; the physical integral of `f` over a
//! triangle `T` is `|T| · Σ w_i f(x_i)` (the weights sum to one). All terms of
//! the saddle forms with k ≤ 2 are integrated exactly except those involving
//! a non-polynomial coefficient, which is the usual variational crime.

/// One triangle quadrature node: barycentric coordinates and weight.
#[derive(Clone, Copy, Debug)]
pub struct TriPoint {
    pub bary: [f64; 3],
    pub weight: f64,
}

/// Degree-6 symmetric triangle rule (12 points, weights sum to 1).
pub const TRI_QUAD: [TriPoint; 12] = {
    // Three symmetry orbits: two 3-point orbits (a, b, b) and one 6-point
    // orbit (a, b, c) over all permutations.
    const A1: f64 = 0.873821971016996;
    const B1: f64 = 0.063089014491502;
    const W1: f64 = 0.050844906370207;
    const A2: f64 = 0.501426509658179;
    const B2: f64 = 0.249286745170910;
    const W2: f64 = 0.116786275726379;
    const A3: f64 = 0.636502499121399;
    const B3: f64 = 0.310352451033785;
    const C3: f64 = 0.053145049844816;
    const W3: f64 = 0.082851075618374;
    [
        TriPoint { bary: [A1, B1, B1], weight: W1 },
        TriPoint { bary: [B1, A1, B1], weight: W1 },
        TriPoint { bary: [B1, B1, A1], weight: W1 },
        TriPoint { bary: [A2, B2, B2], weight: W2 },
        TriPoint { bary: [B2, A2, B2], weight: W2 },
        TriPoint { bary: [B2, B2, A2], weight: W2 },
        TriPoint { bary: [A3, B3, C3], weight: W3 },
        TriPoint { bary: [A3, C3, B3], weight: W3 },
        TriPoint { bary: [B3, A3, C3], weight: W3 },
        TriPoint { bary: [B3, C3, A3], weight: W3 },
        TriPoint { bary: [C3, A3, B3], weight: W3 },
        TriPoint { bary: [C3, B3, A3], weight: W3 },
    ]
};

/// One edge quadrature node on [0, 1]: parameter and weight.
#[derive(Clone, Copy, Debug)]
pub struct EdgePoint {
    pub t: f64,
    pub weight: f64,
}

/// 5-point Gauss-Legendre rule on [0, 1] (weights sum to 1, exact through
/// degree 9).
pub const EDGE_GAUSS: [EdgePoint; 5] = {
    const X1: f64 = 0.906179845938664;
    const X2: f64 = 0.538469310105683;
    const W0: f64 = 0.568888888888889 / 2.0;
    const W1: f64 = 0.478628670499366 / 2.0;
    const W2: f64 = 0.236926885056189 / 2.0;
    [
        EdgePoint { t: (1.0 - X1) / 2.0, weight: W2 },
        EdgePoint { t: (1.0 - X2) / 2.0, weight: W1 },
        EdgePoint { t: 0.5, weight: W0 },
        EdgePoint { t: (1.0 + X2) / 2.0, weight: W1 },
        EdgePoint { t: (1.0 + X1) / 2.0, weight: W2 },
    ]
};

/// Physical coordinates of a barycentric point in the triangle (a, b, c).
pub fn bary_to_xy(a: [f64; 2], b: [f64; 2], c: [f64; 2], bary: [f64; 3]) -> [f64; 2] {
    [
        bary[0] * a[0] + bary[1] * b[0] + bary[2] * c[0],
        bary[0] * a[1] + bary[1] * b[1] + bary[2] * c[1],
    ]
}
