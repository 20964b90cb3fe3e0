//! Unique continuation from interior data: the stabilized saddle solve with
//! penalty scheduling, deterministic data perturbation, reference solutions,
//! region-restricted error reports and convergence studies with rate fitting.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::analytic::{Field, FluxField, NoisyScalar, SampledField, SampledFlux};
use crate::fem::{
    assemble_saddle, build_dofmap, error_norms, lagrange_interpolate, rt_interpolate, triple_norm,
    CoefficientField, DatasetData, ExactScalar, ExactVector, FemError, FluxData, MixedSpaces,
    ScalarData, SpaceDescriptor, TripleNorm,
};
use crate::mesh::{
    mesh_size, refine_uniform, tag_triangles, unit_disc_mesh, MeshError, RegionPred, RegionSpec,
    TriMesh, REGION_B, REGION_OMEGA, REGION_OMIN,
};
use crate::solver::{FieldTriple, SaddleSolver, SolveReport, SolverError};

#[derive(Debug)]
pub enum UcError {
    Mesh(MeshError),
    Fem(FemError),
    Solver(SolverError),
    Config(String),
    /// A run aborted mid-iteration, e.g. on a non-finite objective.
    Algorithm(String),
}

impl fmt::Display for UcError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            UcError::Mesh(e) => write!(f, "mesh error: {e}"),
            UcError::Fem(e) => write!(f, "fem error: {e}"),
            UcError::Solver(e) => write!(f, "solver error: {e}"),
            UcError::Config(msg) => write!(f, "invalid configuration: {msg}"),
            UcError::Algorithm(msg) => write!(f, "iteration aborted: {msg}"),
        }
    }
}

impl std::error::Error for UcError {}

impl From<MeshError> for UcError {
    fn from(e: MeshError) -> Self {
        UcError::Mesh(e)
    }
}

impl From<FemError> for UcError {
    fn from(e: FemError) -> Self {
        UcError::Fem(e)
    }
}

impl From<SolverError> for UcError {
    fn from(e: SolverError) -> Self {
        UcError::Solver(e)
    }
}

/// The flux penalty β = β₀ · max(h, h₀)^{2k}. The floor h₀ keeps β from
/// shrinking below the noise scale once the data is perturbed.
pub fn beta_schedule(beta0: f64, h: f64, h0: f64, k: usize) -> f64 {
    beta0 * h.max(h0).powi(2 * k as i32)
}

/// One continuation instance: data restricted to ω, a source, an optional
/// Neumann trace on tagged boundary edges, and the two penalty parameters.
pub struct UcProblem<'a> {
    pub spaces: &'a MixedSpaces,
    pub gamma: &'a CoefficientField,
    pub q: &'a dyn ScalarData,
    pub f: &'a dyn ScalarData,
    pub neumann: Option<&'a dyn FluxData>,
    pub alpha: f64,
    pub beta: f64,
}

/// Assembles and solves one continuation problem, certifying the residual.
pub fn solve_uc(
    problem: &UcProblem,
    solver: &mut SaddleSolver,
) -> Result<(FieldTriple, SolveReport), UcError> {
    if !(problem.alpha > 0.0) {
        return Err(UcError::Config(format!("alpha must be positive, got {}", problem.alpha)));
    }
    let data =
        DatasetData { q_tilde: problem.q, f_tilde: problem.f, neumann: problem.neumann };
    let system =
        assemble_saddle(problem.spaces, problem.gamma, problem.alpha, problem.beta, &data)?;
    let (x, report) = solver.solve(&system)?;
    Ok((FieldTriple::from_vector(problem.spaces, &x), report))
}

/// Noise amplitudes for the three data channels plus the seed that makes a
/// perturbation reproducible.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PerturbationSpec {
    /// Amplitude of the elementwise-uniform offset added to q on ω.
    pub dq: f64,
    /// Amplitude of the elementwise-uniform offset added to f on Ω.
    pub df: f64,
    /// Relative nodal amplitude of the multiplicative γ perturbation.
    pub dgamma: f64,
    pub seed: u64,
}

impl PerturbationSpec {
    pub fn none(seed: u64) -> Self {
        PerturbationSpec { dq: 0.0, df: 0.0, dgamma: 0.0, seed }
    }

    pub fn is_zero(&self) -> bool {
        self.dq == 0.0 && self.df == 0.0 && self.dgamma == 0.0
    }
}

/// A realized perturbation on one mesh: the perturbed coefficient, the data
/// offsets, and the measured noise magnitudes entering the δ aggregate.
pub struct Perturbation {
    pub gamma: CoefficientField,
    pub q_offsets: Vec<f64>,
    pub f_offsets: Vec<f64>,
    /// ‖δq‖ over the tagged ω region.
    pub dq_norm: f64,
    /// ‖δf‖ over the whole mesh.
    pub df_norm: f64,
    /// max |γ̃ − γ| / γ̃ over the nodes, after clamping.
    pub dgamma_rel: f64,
}

impl Perturbation {
    /// The aggregate data error δ = α^{1/2}‖δq‖_ω + ‖δf‖_Ω + δγ_rel.
    pub fn delta(&self, alpha: f64) -> f64 {
        alpha.sqrt() * self.dq_norm + self.df_norm + self.dgamma_rel
    }
}

fn uniform_offsets(rng: &mut ChaCha8Rng, n: usize, amp: f64) -> Vec<f64> {
    if amp == 0.0 {
        vec![0.0; n]
    } else {
        (0..n).map(|_| rng.random_range(-amp..amp)).collect()
    }
}

/// Draws the elementwise data offsets and the nodal γ factors for `spec`,
/// deterministically in the seed. Draw order: q offsets, f offsets, γ
/// factors, so equal seeds give bitwise-equal noise.
pub fn perturb_data(
    mesh: &Arc<TriMesh>,
    gamma: &CoefficientField,
    spec: &PerturbationSpec,
) -> Result<Perturbation, UcError> {
    if spec.dq < 0.0 || spec.df < 0.0 || spec.dgamma < 0.0 {
        return Err(UcError::Config("noise amplitudes must be nonnegative".into()));
    }
    let nt = mesh.triangles.len();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let q_offsets = uniform_offsets(&mut rng, nt, spec.dq);
    let f_offsets = uniform_offsets(&mut rng, nt, spec.df);
    let factors = uniform_offsets(&mut rng, gamma.fe.coeffs.len(), spec.dgamma);
    let coeffs: Vec<f64> =
        gamma.fe.coeffs.iter().zip(&factors).map(|(&g, &r)| g * (1.0 + r)).collect();
    let perturbed = CoefficientField::new(gamma.fe.dofmap.clone(), coeffs, gamma.floor);
    let mut dgamma_rel = 0.0f64;
    for (&g, &gt) in gamma.fe.coeffs.iter().zip(&perturbed.fe.coeffs) {
        dgamma_rel = dgamma_rel.max((gt - g).abs() / gt);
    }
    let zero = Field::Constant(0.0);
    let dq_norm = NoisyScalar { base: &zero, offsets: q_offsets.clone() }
        .offset_norm(mesh, Some(REGION_OMEGA));
    let df_norm =
        NoisyScalar { base: &zero, offsets: f_offsets.clone() }.offset_norm(mesh, None);
    Ok(Perturbation { gamma: perturbed, q_offsets, f_offsets, dq_norm, df_norm, dgamma_rel })
}

/// How the reference solution of a study is produced.
pub enum ReferenceSpec {
    /// A closed-form solution (γ = 1 experiments).
    Analytic(Field),
    /// Dirichlet datum `g` and source `f` solved under coefficient `gamma`
    /// by order-2 conforming elements on a twice-refined mesh.
    Forward { g: Field, f: Field, gamma: Field },
}

/// The reference fields errors are measured against.
pub struct Reference {
    pub u: Box<dyn ExactScalar>,
    pub sigma: Box<dyn ExactVector>,
}

/// Builds the reference for a study whose finest mesh is `finest`.
pub fn make_reference(spec: &ReferenceSpec, finest: &Arc<TriMesh>) -> Result<Reference, UcError> {
    match spec {
        ReferenceSpec::Analytic(field) => Ok(Reference {
            u: Box::new(*field),
            sigma: Box::new(FluxField { field: *field, scale: 1.0 }),
        }),
        ReferenceSpec::Forward { g, f, gamma } => {
            let mid = Arc::new(refine_uniform(finest));
            let fine = Arc::new(refine_uniform(&mid));
            let v2 = build_dofmap(&fine, SpaceDescriptor::lagrange(2))?;
            let v1 = build_dofmap(&fine, SpaceDescriptor::lagrange(1))?;
            let coeffs = lagrange_interpolate(&v1, gamma).coeffs;
            let gam = CoefficientField::new(v1, coeffs, 1e-6);
            let u = crate::solver::forward_dirichlet(&v2, &gam, f, g)?;
            Ok(Reference {
                u: Box::new(SampledField::new(u.clone())),
                sigma: Box::new(SampledFlux::new(u, gam)),
            })
        }
    }
}

/// One level of a convergence study.
#[derive(Clone, Debug)]
pub struct StudyRow {
    pub level: usize,
    pub h: f64,
    pub ndof_u: usize,
    pub ndof_sigma: usize,
    pub ndof_z: usize,
    pub err_l2_omin: f64,
    pub err_l2_b: f64,
    pub err_h1_b: f64,
    /// Triple norm of the discrete error (u_h − I_h u, σ_h − r_h σ, z_h).
    pub tn: TripleNorm,
    pub beta: f64,
    pub delta: f64,
}

/// Study results, one row per refinement level, h strictly decreasing.
#[derive(Clone, Debug, Default)]
pub struct ConvergenceTable {
    pub rows: Vec<StudyRow>,
}

impl ConvergenceTable {
    pub const CSV_HEADER: &'static str = "level,h,ndof_u,ndof_sigma,ndof_z,err_l2_Omin,\
        err_l2_B,err_h1_B,tn_total,tn_h1,tn_omega,tn_mismatch,tn_z1h,tn_fluxbc,tn_div,beta,delta";

    pub fn new() -> Self {
        ConvergenceTable { rows: Vec::new() }
    }

    pub fn push(&mut self, row: StudyRow) -> Result<(), UcError> {
        if let Some(last) = self.rows.last() {
            if row.h >= last.h {
                return Err(UcError::Config(format!(
                    "mesh size must decrease strictly across levels: {} after {}",
                    row.h, last.h
                )));
            }
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                r.level,
                r.h,
                r.ndof_u,
                r.ndof_sigma,
                r.ndof_z,
                r.err_l2_omin,
                r.err_l2_b,
                r.err_h1_b,
                r.tn.total,
                r.tn.h1,
                r.tn.omega,
                r.tn.mismatch,
                r.tn.z1h,
                r.tn.fluxbc,
                r.tn.div,
                r.beta,
                r.delta
            ));
        }
        out
    }

    /// A named numeric column, using the CSV header names.
    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let get: fn(&StudyRow) -> f64 = match name {
            "h" => |r| r.h,
            "err_l2_Omin" => |r| r.err_l2_omin,
            "err_l2_B" => |r| r.err_l2_b,
            "err_h1_B" => |r| r.err_h1_b,
            "tn_total" => |r| r.tn.total,
            "tn_h1" => |r| r.tn.h1,
            "tn_omega" => |r| r.tn.omega,
            "tn_mismatch" => |r| r.tn.mismatch,
            "tn_z1h" => |r| r.tn.z1h,
            "tn_fluxbc" => |r| r.tn.fluxbc,
            "tn_div" => |r| r.tn.div,
            "beta" => |r| r.beta,
            "delta" => |r| r.delta,
            _ => return None,
        };
        Some(self.rows.iter().map(get).collect())
    }
}

/// Configuration of a disc convergence study with γ = 1 and an analytic
/// harmonic solution, the setting of the first experiment.
#[derive(Clone, Debug)]
pub struct StudyConfig {
    pub k: usize,
    pub levels: usize,
    /// Target mesh size of the coarsest level.
    pub h_coarse: f64,
    pub alpha: f64,
    pub beta0: f64,
    /// The exact solution; must be harmonic so f = 0.
    pub exact: Field,
    /// Data on the whole domain instead of the annular ω (the well-posed
    /// sanity configuration).
    pub omega_all: bool,
    pub perturbation: Option<PerturbationSpec>,
}

impl StudyConfig {
    pub fn validate(&self) -> Result<(), UcError> {
        if self.k != 1 && self.k != 2 {
            return Err(UcError::Config(format!("order k must be 1 or 2, got {}", self.k)));
        }
        if self.levels < 3 {
            return Err(UcError::Config(format!("need at least 3 levels, got {}", self.levels)));
        }
        if !(self.alpha > 0.0) {
            return Err(UcError::Config(format!("alpha must be positive, got {}", self.alpha)));
        }
        if !(self.beta0 >= 0.0) {
            return Err(UcError::Config(format!(
                "beta0 must be nonnegative, got {}",
                self.beta0
            )));
        }
        if !(self.h_coarse > 0.0 && self.h_coarse < 1.0) {
            return Err(UcError::Config(format!(
                "coarse mesh size must lie in (0, 1), got {}",
                self.h_coarse
            )));
        }
        Ok(())
    }
}

/// Runs the study: per level, perturb, schedule β, solve, measure errors
/// against the analytic reference over the tagged regions.
pub fn run_convergence_study(cfg: &StudyConfig) -> Result<ConvergenceTable, UcError> {
    cfg.validate()?;
    let omega = if cfg.omega_all {
        RegionSpec { id: REGION_OMEGA, pred: RegionPred::All }
    } else {
        RegionSpec::omega_disc()
    };
    let mut mesh = tag_triangles(unit_disc_mesh(cfg.h_coarse)?, omega);
    mesh = tag_triangles(mesh, RegionSpec::omega_minus());
    mesh = tag_triangles(mesh, RegionSpec::target_b());
    let mut current = Arc::new(mesh);
    let reference = make_reference(&ReferenceSpec::Analytic(cfg.exact), &current)?;

    let mut table = ConvergenceTable::new();
    let mut solver = SaddleSolver::new();
    for level in 0..cfg.levels {
        if level > 0 {
            current = Arc::new(refine_uniform(&current));
        }
        let row = run_study_level(cfg, level, &current, &reference, &mut solver)?;
        table.push(row)?;
    }
    Ok(table)
}

fn run_study_level(
    cfg: &StudyConfig,
    level: usize,
    mesh: &Arc<TriMesh>,
    reference: &Reference,
    solver: &mut SaddleSolver,
) -> Result<StudyRow, UcError> {
    let spaces = MixedSpaces::build(mesh, cfg.k)?;
    let h = mesh_size(mesh);
    let v1 = build_dofmap(mesh, SpaceDescriptor::lagrange(1))?;
    let unperturbed = CoefficientField::constant(v1, 1.0);

    let nt = mesh.triangles.len();
    let (gamma, q_offsets, f_offsets, delta) = match &cfg.perturbation {
        Some(spec) if !spec.is_zero() => {
            let p = perturb_data(mesh, &unperturbed, spec)?;
            let delta = p.delta(cfg.alpha);
            (p.gamma, p.q_offsets, p.f_offsets, delta)
        }
        _ => (unperturbed, vec![0.0; nt], vec![0.0; nt], 0.0),
    };
    let h0 = if delta > 0.0 { delta.powf(1.0 / cfg.k as f64) } else { 0.0 };
    let beta = beta_schedule(cfg.beta0, h, h0, cfg.k);

    let zero = Field::Constant(0.0);
    let q = NoisyScalar { base: &cfg.exact, offsets: q_offsets };
    let f = NoisyScalar { base: &zero, offsets: f_offsets };
    let problem = UcProblem {
        spaces: &spaces,
        gamma: &gamma,
        q: &q,
        f: &f,
        neumann: None,
        alpha: cfg.alpha,
        beta,
    };
    let (triple, _report) = solve_uc(&problem, solver)?;

    let e_omin = error_norms(&triple.u, reference.u.as_ref(), Some(REGION_OMIN));
    let e_b = error_norms(&triple.u, reference.u.as_ref(), Some(REGION_B));

    // Triple norm of the error against the interpolated reference; the exact
    // multiplier vanishes, so the z block is the error as-is.
    let iu = lagrange_interpolate(&spaces.v, reference.u.as_ref());
    let isig = rt_interpolate(&spaces.rt, reference.sigma.as_ref());
    let mut evec = triple.to_vector();
    let o = spaces.offsets();
    for (i, c) in iu.coeffs.iter().enumerate() {
        evec[i] -= c;
    }
    for (i, c) in isig.coeffs.iter().enumerate() {
        evec[o[1] + i] -= c;
    }
    let tn = triple_norm(&spaces, &gamma, cfg.alpha, beta, &evec);

    Ok(StudyRow {
        level,
        h,
        ndof_u: o[1],
        ndof_sigma: o[2] - o[1],
        ndof_z: o[3] - o[2],
        err_l2_omin: e_omin.l2,
        err_l2_b: e_b.l2,
        err_h1_b: e_b.h1_semi,
        tn,
        beta,
        delta,
    })
}

/// Least-squares fit of err ≈ c · h^rate in log-log coordinates.
#[derive(Clone, Copy, Debug)]
pub struct PowerFit {
    pub rate: f64,
    pub c: f64,
    /// RMS residual of the fit in natural-log coordinates.
    pub log_residual: f64,
}

pub fn fit_power_rate(h: &[f64], err: &[f64]) -> Result<PowerFit, UcError> {
    if h.len() != err.len() || h.len() < 2 {
        return Err(UcError::Config("power fit needs at least two matched samples".into()));
    }
    if err.iter().any(|&e| !(e > 0.0)) || h.iter().any(|&x| !(x > 0.0)) {
        return Err(UcError::Config("power fit requires positive mesh sizes and errors".into()));
    }
    let xs: Vec<f64> = h.iter().map(|&x| x.ln()).collect();
    let ys: Vec<f64> = err.iter().map(|&e| e.ln()).collect();
    let n = xs.len() as f64;
    let xbar = xs.iter().sum::<f64>() / n;
    let ybar = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - xbar) * (x - xbar)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xbar) * (y - ybar)).sum();
    if sxx == 0.0 {
        return Err(UcError::Config("power fit requires at least two distinct mesh sizes".into()));
    }
    let rate = sxy / sxx;
    let intercept = ybar - rate * xbar;
    let res2: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let d = y - (intercept + rate * x);
            d * d
        })
        .sum();
    Ok(PowerFit { rate, c: intercept.exp(), log_residual: (res2 / n).sqrt() })
}

/// Fit of err ≈ c · |ln h|^{−1/2} (fixed exponent), plus the best-fit free
/// exponent p in err ≈ c′ · |ln h|^{−p} as a diagnostic.
#[derive(Clone, Copy, Debug)]
pub struct LogFit {
    pub c: f64,
    pub free_exponent: f64,
}

pub fn fit_log_rate(h: &[f64], err: &[f64]) -> Result<LogFit, UcError> {
    if h.len() != err.len() || h.len() < 2 {
        return Err(UcError::Config("log fit needs at least two matched samples".into()));
    }
    if err.iter().any(|&e| !(e > 0.0)) || h.iter().any(|&x| !(x > 0.0 && x != 1.0)) {
        return Err(UcError::Config(
            "log fit requires positive errors and mesh sizes with |ln h| > 0".into(),
        ));
    }
    // c minimizes Σ (e_i − c w_i)² with w_i = |ln h_i|^{−1/2}.
    let ws: Vec<f64> = h.iter().map(|&x| x.ln().abs().powf(-0.5)).collect();
    let num: f64 = ws.iter().zip(err).map(|(w, e)| w * e).sum();
    let den: f64 = ws.iter().map(|w| w * w).sum();
    let c = num / den;
    // Free exponent: regress ln e on ln|ln h|.
    let xs: Vec<f64> = h.iter().map(|&x| x.ln().abs().ln()).collect();
    let ys: Vec<f64> = err.iter().map(|&e| e.ln()).collect();
    let n = xs.len() as f64;
    let xbar = xs.iter().sum::<f64>() / n;
    let ybar = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - xbar) * (x - xbar)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xbar) * (y - ybar)).sum();
    if sxx == 0.0 {
        return Err(UcError::Config("log fit requires at least two distinct mesh sizes".into()));
    }
    Ok(LogFit { c, free_exponent: -sxy / sxx })
}
