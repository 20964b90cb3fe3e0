//! Coefficient identification: the regularized objective, its reduced
//! gradient, the elliptic gradient smoother, and the multi-level smoothed
//! steepest-descent loop over one or more measurement datasets.
//!
//! The reduced objective treats the saddle solve as an implicit function of
//! the coefficient. Because the solve makes the underlying Lagrangian
//! stationary in (u, σ, z), the γ-gradient needs no separate adjoint solve:
//! only the explicit γ-dependence of the flux-mismatch term contributes, and
//! the strongly imposed flux dofs are data, independent of γ.

use std::fmt::Write as _;
use std::sync::Arc;

use crate::analytic::{Field, SampledField, SampledFlux};
use crate::continuation::{beta_schedule, UcError};
use crate::fem::quadrature::bary_to_xy;
use crate::fem::{
    assemble_gradient_smoother, assemble_saddle_systems, build_dofmap, error_norms, l2_norm,
    lagrange_interpolate, prolong_lagrange, CoefficientField, DatasetData, DofMap, ElemGeom,
    FeFunction, FluxData, MixedSpaces, ScalarData, SpaceDescriptor, EDGE_GAUSS, TRI_QUAD,
};
use crate::mesh::{
    mesh_size, refine_uniform, tag_boundary_edges, tag_triangles, unit_disc_mesh, RegionSpec,
    TriMesh, BDRY_NEUMANN, REGION_OMEGA,
};
use crate::par;
use crate::solver::{forward_dirichlet, FieldTriple, SaddleSolver};

/// Candidate step lengths per iteration: the base step plus this many
/// halvings before the step is rejected.
const MAX_HALVINGS: usize = 8;

/// One measurement record: interior data on ω, an optional strong normal
/// flux on the tagged boundary sector, and the volume source. Fields must
/// evaluate by point (the element index is a hint), so they remain valid on
/// every level of a mesh ladder.
pub struct Dataset {
    pub q: Box<dyn ScalarData>,
    pub neumann: Option<Box<dyn FluxData>>,
    pub f: Box<dyn ScalarData>,
}

/// Integrand driving the coefficient update.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum GradientMode {
    /// ½(|∇u|² − γ⁻²|σ|²), the pointwise γ-derivative of the flux mismatch
    /// ½γ⁻¹|γ∇u − σ|². Default; validated by the finite-difference check.
    ExactDerivative,
    /// |∇u|² − γ⁻¹|σ|², the difference of primal and dual energy densities.
    /// Kept for comparison with the classical smoothed iteration; not a
    /// derivative of the objective.
    EnergyDifference,
}

impl GradientMode {
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "exact" => Some(GradientMode::ExactDerivative),
            "energy-difference" => Some(GradientMode::EnergyDifference),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            GradientMode::ExactDerivative => "exact",
            GradientMode::EnergyDifference => "energy-difference",
        }
    }
}

/// Coefficient update rule.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum UpdateMode {
    /// Step along −g with backtracking until the objective strictly
    /// decreases; after [`MAX_HALVINGS`] halvings the step is rejected.
    SafeguardedDescent,
    /// γ ← γ + s·g with a fixed step and no monitoring, reproducing the
    /// classical smoothed-iteration update verbatim.
    FixedStep,
}

impl UpdateMode {
    pub fn parse(name: &str) -> Option<Self> {
        match name {
            "safeguarded" => Some(UpdateMode::SafeguardedDescent),
            "fixed-step" => Some(UpdateMode::FixedStep),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            UpdateMode::SafeguardedDescent => "safeguarded",
            UpdateMode::FixedStep => "fixed-step",
        }
    }
}

/// Knobs of the reconstruction loop. Mesh levels are supplied separately as
/// a ladder of uniformly refined meshes.
#[derive(Clone, Copy, Debug)]
pub struct ReconConfig {
    /// State space order: V_k × RT_{k−1} × X_{k−1}.
    pub k: usize,
    /// Coefficient order: γ_h ∈ V_l, l ≤ k.
    pub l: usize,
    pub alpha: f64,
    pub beta0: f64,
    /// Base step length.
    pub s: f64,
    pub max_iters: usize,
    /// A level stops once ‖g‖_Ω drops below this.
    pub tol: f64,
    pub gradient_mode: GradientMode,
    pub update_mode: UpdateMode,
    /// Nodal positivity clamp applied after every update.
    pub gamma_min: f64,
    /// Adds the explicit h(∇γ, ∇v) regularization load to the gradient and
    /// switches the descent monitor to the full objective. Off by default:
    /// the smoother realizes the regularization implicitly and the monitor
    /// tracks the data part. The finite-difference check needs the explicit
    /// form to match the full objective.
    pub explicit_tikhonov: bool,
}

impl Default for ReconConfig {
    fn default() -> Self {
        ReconConfig {
            k: 2,
            l: 1,
            alpha: 1000.0,
            beta0: 1e-3,
            s: 0.8,
            max_iters: 300,
            tol: 1e-8,
            gradient_mode: GradientMode::ExactDerivative,
            update_mode: UpdateMode::SafeguardedDescent,
            gamma_min: 0.1,
            explicit_tikhonov: false,
        }
    }
}

impl ReconConfig {
    pub fn validate(&self) -> Result<(), UcError> {
        let bad = |msg: String| Err(UcError::Config(msg));
        if self.k != 1 && self.k != 2 {
            return bad(format!("k must be 1 or 2, got {}", self.k));
        }
        if self.l != 1 && self.l != 2 {
            return bad(format!("l must be 1 or 2, got {}", self.l));
        }
        if self.l > self.k {
            return bad(format!("l must not exceed k, got l = {} > k = {}", self.l, self.k));
        }
        if !(self.alpha > 0.0) {
            return bad(format!("alpha must be positive, got {}", self.alpha));
        }
        if !(self.beta0 >= 0.0) {
            return bad(format!("beta0 must be nonnegative, got {}", self.beta0));
        }
        if !(self.s > 0.0) {
            return bad(format!("s must be positive, got {}", self.s));
        }
        if self.max_iters == 0 {
            return bad("max_iters must be at least 1".into());
        }
        if !(self.tol > 0.0) {
            return bad(format!("tol must be positive, got {}", self.tol));
        }
        if !(self.gamma_min > 0.0) {
            return bad(format!("gamma_min must be positive, got {}", self.gamma_min));
        }
        Ok(())
    }
}

/// Pointwise update integrand for one dataset; datasets are summed by the
/// caller.
pub fn gradient_integrand(grad_u: [f64; 2], sigma: [f64; 2], gamma: f64, mode: GradientMode) -> f64 {
    let gu2 = grad_u[0] * grad_u[0] + grad_u[1] * grad_u[1];
    let s2 = sigma[0] * sigma[0] + sigma[1] * sigma[1];
    match mode {
        GradientMode::ExactDerivative => 0.5 * (gu2 - s2 / (gamma * gamma)),
        GradientMode::EnergyDifference => gu2 - s2 / gamma,
    }
}

/// Objective value with its component breakdown.
#[derive(Clone, Copy, Debug, Default)]
pub struct ObjectiveParts {
    /// Σ_d ½‖γ^{-1/2}(γ∇u_d − σ_d)‖²_Ω.
    pub mismatch: f64,
    /// Σ_d ½α‖u_d − q_d‖²_ω.
    pub data: f64,
    /// Σ_d ½β‖σ_d·n‖²_{∂Ω}.
    pub flux: f64,
    /// ½‖h^{1/2}∇γ‖²_Ω with the global mesh size h.
    pub tikhonov: f64,
    pub total: f64,
    /// Σ_d |(∇·σ_d, z_d)_Ω + (f_d, z_d)_Ω|: the multiplier term of the
    /// Lagrangian, zero at any exact solve. Diagnostic, not part of `total`.
    pub multiplier_residual: f64,
}

struct ObjElem {
    mismatch: f64,
    data: f64,
    tikhonov: f64,
    mult: Vec<f64>,
}

/// Evaluates the regularized objective at `gamma` given the solved states.
pub fn eval_objective(
    spaces: &MixedSpaces,
    gamma: &CoefficientField,
    datasets: &[Dataset],
    triples: &[FieldTriple],
    alpha: f64,
    beta: f64,
) -> ObjectiveParts {
    assert_eq!(datasets.len(), triples.len(), "one solved state per dataset");
    let mesh = spaces.mesh().clone();
    let nt = mesh.triangles.len();
    let nd = datasets.len();
    let omega = mesh.region_mask(REGION_OMEGA);
    let h = mesh_size(&mesh);

    let elems = par::map_indexed(nt, |t| {
        let geom = ElemGeom::new(&mesh, t);
        let mut out =
            ObjElem { mismatch: 0.0, data: 0.0, tikhonov: 0.0, mult: vec![0.0; nd] };
        for qp in TRI_QUAD {
            let w = qp.weight * geom.area;
            let p = bary_to_xy(geom.verts[0], geom.verts[1], geom.verts[2], qp.bary);
            let g = gamma.value_bary(t, &geom, qp.bary);
            let gg = gamma.grad_bary(t, &geom, qp.bary);
            out.tikhonov += w * (gg[0] * gg[0] + gg[1] * gg[1]);
            for (d, (ds, tr)) in datasets.iter().zip(triples).enumerate() {
                let gu = tr.u.grad_bary(t, &geom, qp.bary);
                let sv = tr.sigma.vec_value_xy(t, &geom, p);
                let r = [g * gu[0] - sv[0], g * gu[1] - sv[1]];
                out.mismatch += w * (r[0] * r[0] + r[1] * r[1]) / g;
                if omega[t] {
                    let uv = tr.u.value_bary(t, &geom, qp.bary);
                    let qv = ds.q.eval(t, p);
                    out.data += w * (uv - qv) * (uv - qv);
                }
                let div = tr.sigma.div_xy(t, &geom, p);
                let zv = tr.z.value_xy(t, &geom, p);
                let fv = ds.f.eval(t, p);
                out.mult[d] += w * (div + fv) * zv;
            }
        }
        out
    });
    let mut parts = ObjectiveParts::default();
    let mut mult = vec![0.0f64; nd];
    for e in &elems {
        parts.mismatch += e.mismatch;
        parts.data += e.data;
        parts.tikhonov += e.tikhonov;
        for (m, v) in mult.iter_mut().zip(&e.mult) {
            *m += v;
        }
    }
    parts.mismatch *= 0.5;
    parts.data *= 0.5 * alpha;
    parts.tikhonov *= 0.5 * h;
    parts.multiplier_residual = mult.iter().map(|m| m.abs()).sum();

    // Boundary flux penalty, including the strongly set dofs (their
    // contribution is data, constant in γ).
    if beta > 0.0 {
        let mut acc = 0.0;
        for &e in &mesh.boundary_edges {
            let (t, _) = mesh.edge_tris[e][0].expect("boundary edge without triangle");
            let geom = ElemGeom::new(&mesh, t);
            let n_out = mesh.boundary_outward_normal(e);
            let [lo, hi] = mesh.edges[e];
            let (plo, phi) = (mesh.vertices[lo], mesh.vertices[hi]);
            let len = mesh.edge_length(e);
            for gp in EDGE_GAUSS {
                let p = [
                    plo[0] + gp.t * (phi[0] - plo[0]),
                    plo[1] + gp.t * (phi[1] - plo[1]),
                ];
                for tr in triples {
                    let sv = tr.sigma.vec_value_xy(t, &geom, p);
                    let sn = sv[0] * n_out[0] + sv[1] * n_out[1];
                    acc += gp.weight * len * sn * sn;
                }
            }
        }
        parts.flux = 0.5 * beta * acc;
    }
    parts.total = parts.mismatch + parts.data + parts.flux + parts.tikhonov;
    parts
}

/// Load vector of the smoothing solve: b_i = Σ_d (G_d, φ_i)_Ω, plus the
/// explicit regularization h(∇γ, ∇φ_i) when requested.
pub fn gradient_load(
    vl: &Arc<DofMap>,
    spaces: &MixedSpaces,
    gamma: &CoefficientField,
    triples: &[FieldTriple],
    mode: GradientMode,
    explicit_tikhonov: bool,
) -> Vec<f64> {
    assert!(Arc::ptr_eq(&vl.mesh, spaces.mesh()), "coefficient space on a different mesh");
    let mesh = vl.mesh.clone();
    let nt = mesh.triangles.len();
    let nl = vl.space.local_ndofs();
    let h = mesh_size(&mesh);
    let blocks = par::map_indexed(nt, |t| {
        let geom = ElemGeom::new(&mesh, t);
        let mut loc = [0.0f64; 6];
        for qp in TRI_QUAD {
            let w = qp.weight * geom.area;
            let p = bary_to_xy(geom.verts[0], geom.verts[1], geom.verts[2], qp.bary);
            let g = gamma.value_bary(t, &geom, qp.bary);
            let mut big_g = 0.0;
            for tr in triples {
                let gu = tr.u.grad_bary(t, &geom, qp.bary);
                let sv = tr.sigma.vec_value_xy(t, &geom, p);
                big_g += gradient_integrand(gu, sv, g, mode);
            }
            let b = vl.eval_scalar_bary(&geom, qp.bary);
            for i in 0..nl {
                loc[i] += w * big_g * b.val[i];
            }
            if explicit_tikhonov {
                let gg = gamma.grad_bary(t, &geom, qp.bary);
                for i in 0..nl {
                    loc[i] += w * h * (gg[0] * b.grad[i][0] + gg[1] * b.grad[i][1]);
                }
            }
        }
        loc
    });
    let mut out = vec![0.0f64; vl.ndofs];
    for (t, loc) in blocks.iter().enumerate() {
        for (i, &d) in vl.cell_dofs(t).iter().enumerate() {
            out[d] += loc[i];
        }
    }
    out
}

/// Maps the raw gradient load through the elliptic smoother
/// (g, v) + h(∇g, ∇v) = (load, v) on the coefficient space.
pub fn smoothed_gradient(
    vl: &Arc<DofMap>,
    h: f64,
    load: &[f64],
    solver: &mut SaddleSolver,
) -> Result<FeFunction, UcError> {
    let matrix = assemble_gradient_smoother(vl, h);
    let signs = vec![1i8; vl.ndofs];
    let (x, _report) = solver.solve_symmetric(&matrix, load, &signs)?;
    Ok(FeFunction::new(vl.clone(), x))
}

/// Solves the state systems of all datasets under one coefficient, sharing
/// the matrix and its factorization.
pub fn solve_states(
    spaces: &MixedSpaces,
    gamma: &CoefficientField,
    datasets: &[Dataset],
    alpha: f64,
    beta: f64,
    solver: &mut SaddleSolver,
) -> Result<Vec<FieldTriple>, UcError> {
    let data: Vec<DatasetData> = datasets
        .iter()
        .map(|d| DatasetData {
            q_tilde: d.q.as_ref(),
            f_tilde: d.f.as_ref(),
            neumann: d.neumann.as_deref(),
        })
        .collect();
    let systems = assemble_saddle_systems(spaces, gamma, alpha, beta, &data)?;
    let solved = solver.solve_shared(&systems)?;
    Ok(solved.into_iter().map(|(x, _)| FieldTriple::from_vector(spaces, &x)).collect())
}

/// One line of the iteration log.
#[derive(Clone, Copy, Debug)]
pub struct IterationRecord {
    pub level: usize,
    pub iter: usize,
    /// Monitored objective after the update of this iteration: the full
    /// regularized value with the explicit regularization load, otherwise
    /// the data part (mismatch + data + flux) that the direction descends.
    pub objective: f64,
    /// ‖g‖_Ω of the smoothed gradient before the update.
    pub grad_norm: f64,
    /// Accepted step length; 0 when the step was rejected or ‖g‖ ≤ tol.
    pub step: f64,
    /// ‖γ* − γ_h‖_Ω when the target is known, 0 otherwise.
    pub gamma_err_l2: f64,
}

/// Result of a multi-level run.
#[derive(Debug)]
pub struct ReconReport {
    pub log: Vec<IterationRecord>,
    /// Final coefficient of each level.
    pub gammas: Vec<CoefficientField>,
    /// Mesh size of each level.
    pub level_h: Vec<f64>,
    /// ‖γ* − γ_h‖_Ω after each level; present when the target is known.
    pub errors: Option<Vec<f64>>,
}

impl ReconReport {
    pub const CSV_HEADER: &'static str = "level,iter,objective,grad_norm,step,gamma_err_l2";

    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.log {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{}",
                r.level, r.iter, r.objective, r.grad_norm, r.step, r.gamma_err_l2
            );
        }
        out
    }
}

/// Nodal value dump: a `gamma <ndof>` header line, then one value per line
/// in dof order.
pub fn dump_gamma(gamma: &FeFunction) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "gamma {}", gamma.coeffs.len());
    for c in &gamma.coeffs {
        let _ = writeln!(out, "{c}");
    }
    out
}

/// Runs the smoothed steepest-descent loop over a ladder of uniformly
/// refined meshes, carrying the coefficient to each finer level by nodal
/// interpolation.
pub fn reconstruct(
    cfg: &ReconConfig,
    meshes: &[Arc<TriMesh>],
    datasets: &[Dataset],
    gamma0: &Field,
    target: Option<&Field>,
) -> Result<ReconReport, UcError> {
    cfg.validate()?;
    if meshes.is_empty() {
        return Err(UcError::Config("at least one mesh level is required".into()));
    }
    if datasets.is_empty() {
        return Err(UcError::Config("at least one dataset is required".into()));
    }
    let with_flux = datasets[0].neumann.is_some();
    if datasets.iter().any(|d| d.neumann.is_some() != with_flux) {
        return Err(UcError::Config(
            "datasets must either all carry flux data or none".into(),
        ));
    }
    if with_flux && meshes[0].edge_boundary_tags.get(&BDRY_NEUMANN).is_none() {
        return Err(UcError::Config(
            "datasets carry flux data but the mesh has no tagged flux edges".into(),
        ));
    }

    let mut report = ReconReport {
        log: Vec::new(),
        gammas: Vec::with_capacity(meshes.len()),
        level_h: Vec::with_capacity(meshes.len()),
        errors: target.map(|_| Vec::with_capacity(meshes.len())),
    };
    let mut carried: Option<FeFunction> = None;
    for (level, mesh) in meshes.iter().enumerate() {
        let spaces = MixedSpaces::build(mesh, cfg.k)?;
        let vl = build_dofmap(mesh, SpaceDescriptor::lagrange(cfg.l))?;
        let fe = match &carried {
            None => lagrange_interpolate(&vl, gamma0),
            Some(coarse) => prolong_lagrange(coarse, &vl),
        };
        let mut gamma = CoefficientField::new(vl.clone(), fe.coeffs, cfg.gamma_min);
        let h = mesh_size(mesh);
        let beta = beta_schedule(cfg.beta0, h, 0.0, cfg.k);
        run_level(cfg, &spaces, &vl, &mut gamma, datasets, level, h, beta, target, &mut report.log)?;
        if let (Some(errs), Some(t)) = (report.errors.as_mut(), target) {
            errs.push(error_norms(&gamma.fe, t, None).l2);
        }
        report.level_h.push(h);
        carried = Some(gamma.fe.clone());
        report.gammas.push(gamma);
    }
    Ok(report)
}

#[allow(clippy::too_many_arguments)]
fn run_level(
    cfg: &ReconConfig,
    spaces: &MixedSpaces,
    vl: &Arc<DofMap>,
    gamma: &mut CoefficientField,
    datasets: &[Dataset],
    level: usize,
    h: f64,
    beta: f64,
    target: Option<&Field>,
    log: &mut Vec<IterationRecord>,
) -> Result<(), UcError> {
    let mut state_solver = SaddleSolver::new();
    let mut smoother_solver = SaddleSolver::new();
    let gamma_err = |gamma: &CoefficientField| match target {
        Some(t) => error_norms(&gamma.fe, t, None).l2,
        None => 0.0,
    };
    // The backtracking monitor must be the potential of the step direction:
    // with the explicit regularization load the direction descends the full
    // objective, without it only the data part (the regularizer then acts
    // through the smoother alone, and penalizing it here would stall the
    // iteration at coarse h where ½h‖∇γ‖² dominates).
    let monitored = |parts: &ObjectiveParts| {
        if cfg.explicit_tikhonov { parts.total } else { parts.total - parts.tikhonov }
    };
    let mut triples = solve_states(spaces, gamma, datasets, cfg.alpha, beta, &mut state_solver)?;
    let mut objective =
        monitored(&eval_objective(spaces, gamma, datasets, &triples, cfg.alpha, beta));
    if !objective.is_finite() {
        return Err(UcError::Algorithm(format!(
            "non-finite objective at level {level} before the first iteration"
        )));
    }
    for iter in 0..cfg.max_iters {
        let load = gradient_load(vl, spaces, gamma, &triples, cfg.gradient_mode, cfg.explicit_tikhonov);
        let g = smoothed_gradient(vl, h, &load, &mut smoother_solver)?;
        let grad_norm = l2_norm(&g, None);
        if grad_norm <= cfg.tol {
            log.push(IterationRecord {
                level,
                iter,
                objective,
                grad_norm,
                step: 0.0,
                gamma_err_l2: gamma_err(gamma),
            });
            break;
        }
        let mut accepted = 0.0;
        match cfg.update_mode {
            UpdateMode::FixedStep => {
                let coeffs = gamma
                    .fe
                    .coeffs
                    .iter()
                    .zip(&g.coeffs)
                    .map(|(c, gi)| c + cfg.s * gi)
                    .collect();
                *gamma = CoefficientField::new(vl.clone(), coeffs, cfg.gamma_min);
                triples =
                    solve_states(spaces, gamma, datasets, cfg.alpha, beta, &mut state_solver)?;
                objective =
                    monitored(&eval_objective(spaces, gamma, datasets, &triples, cfg.alpha, beta));
                if !objective.is_finite() {
                    return Err(UcError::Algorithm(format!(
                        "non-finite objective at level {level}, iteration {iter}"
                    )));
                }
                accepted = cfg.s;
            }
            UpdateMode::SafeguardedDescent => {
                let mut s_try = cfg.s;
                for _ in 0..=MAX_HALVINGS {
                    let coeffs = gamma
                        .fe
                        .coeffs
                        .iter()
                        .zip(&g.coeffs)
                        .map(|(c, gi)| c - s_try * gi)
                        .collect();
                    let cand = CoefficientField::new(vl.clone(), coeffs, cfg.gamma_min);
                    let cand_triples =
                        solve_states(spaces, &cand, datasets, cfg.alpha, beta, &mut state_solver)?;
                    let cand_obj = monitored(&eval_objective(
                        spaces,
                        &cand,
                        datasets,
                        &cand_triples,
                        cfg.alpha,
                        beta,
                    ));
                    if !cand_obj.is_finite() {
                        return Err(UcError::Algorithm(format!(
                            "non-finite objective at level {level}, iteration {iter}"
                        )));
                    }
                    if cand_obj < objective {
                        *gamma = cand;
                        triples = cand_triples;
                        objective = cand_obj;
                        accepted = s_try;
                        break;
                    }
                    s_try *= 0.5;
                }
            }
        }
        log.push(IterationRecord {
            level,
            iter,
            objective,
            grad_norm,
            step: accepted,
            gamma_err_l2: gamma_err(gamma),
        });
        if accepted == 0.0 {
            // Line search exhausted: the iterate is stationary at the step
            // resolution, so further iterations would repeat verbatim.
            break;
        }
    }
    Ok(())
}

/// Result of the directional finite-difference probe.
#[derive(Clone, Copy, Debug)]
pub struct FdCheck {
    /// ⟨∇ℒ, v⟩ from [`gradient_load`] in exact-derivative mode with the
    /// explicit regularization term.
    pub analytic: f64,
    /// Central difference at the best step.
    pub best_fd: f64,
    pub best_eps: f64,
    pub rel_error: f64,
}

/// Central-difference validation of the reduced gradient in direction `v`,
/// re-solving the states at each probe and sweeping the difference step.
pub fn fd_gradient_check(
    spaces: &MixedSpaces,
    vl: &Arc<DofMap>,
    gamma: &CoefficientField,
    datasets: &[Dataset],
    alpha: f64,
    beta: f64,
    direction: &FeFunction,
) -> Result<FdCheck, UcError> {
    if !Arc::ptr_eq(&direction.dofmap, vl) {
        return Err(UcError::Config("direction must live on the coefficient space".into()));
    }
    let mut solver = SaddleSolver::new();
    let triples = solve_states(spaces, gamma, datasets, alpha, beta, &mut solver)?;
    let load =
        gradient_load(vl, spaces, gamma, &triples, GradientMode::ExactDerivative, true);
    let analytic: f64 = load.iter().zip(&direction.coeffs).map(|(b, v)| b * v).sum();

    let mut objective_at = |shift: f64| -> Result<f64, UcError> {
        let coeffs: Vec<f64> = gamma
            .fe
            .coeffs
            .iter()
            .zip(&direction.coeffs)
            .map(|(c, v)| c + shift * v)
            .collect();
        let shifted = CoefficientField::new(vl.clone(), coeffs, gamma.floor);
        if shifted.clamped > 0 {
            return Err(UcError::Config(
                "finite-difference probe hit the positivity floor; scale the direction down"
                    .into(),
            ));
        }
        let triples = solve_states(spaces, &shifted, datasets, alpha, beta, &mut solver)?;
        Ok(eval_objective(spaces, &shifted, datasets, &triples, alpha, beta).total)
    };

    let mut best = FdCheck { analytic, best_fd: 0.0, best_eps: 0.0, rel_error: f64::INFINITY };
    for &eps in &[1e-3, 1e-4, 1e-5, 1e-6] {
        let fd = (objective_at(eps)? - objective_at(-eps)?) / (2.0 * eps);
        let denom = analytic.abs().max(fd.abs());
        let rel = if denom <= f64::EPSILON { 0.0 } else { (fd - analytic).abs() / denom };
        if rel < best.rel_error {
            best.best_fd = fd;
            best.best_eps = eps;
            best.rel_error = rel;
        }
    }
    Ok(best)
}

/// Builds the tagged disc ladder used by the identification experiments:
/// data region, continuation target regions, and optionally the flux sector
/// on the boundary.
pub fn study_ladder(
    h_coarse: f64,
    levels: usize,
    with_flux: bool,
) -> Result<Vec<Arc<TriMesh>>, UcError> {
    if levels == 0 {
        return Err(UcError::Config("at least one mesh level is required".into()));
    }
    if !(h_coarse > 0.0 && h_coarse < 1.0) {
        return Err(UcError::Config(format!("h_coarse must lie in (0, 1), got {h_coarse}")));
    }
    let mut mesh = tag_triangles(unit_disc_mesh(h_coarse)?, RegionSpec::omega_disc());
    mesh = tag_triangles(mesh, RegionSpec::omega_minus());
    mesh = tag_triangles(mesh, RegionSpec::target_b());
    if with_flux {
        mesh = tag_boundary_edges(mesh, RegionSpec::neumann_sector());
    }
    let mut out = Vec::with_capacity(levels);
    let mut current = Arc::new(mesh);
    out.push(current.clone());
    for _ in 1..levels {
        current = Arc::new(refine_uniform(&current));
        out.push(current.clone());
    }
    Ok(out)
}

/// Manufactures measurement datasets from a target coefficient: solves the
/// forward Dirichlet problem with each boundary field on a once-extra
/// refined mesh with quadratic elements, then samples interior values and,
/// optionally, conormal fluxes. The generation mesh and order differ from
/// the reconstruction's, so the data is not committed to the inverse solver's
/// own discretization.
pub fn manufacture_datasets(
    finest: &Arc<TriMesh>,
    boundary_data: &[Field],
    gamma_target: Field,
    with_flux: bool,
) -> Result<Vec<Dataset>, UcError> {
    if boundary_data.is_empty() {
        return Err(UcError::Config("at least one boundary field is required".into()));
    }
    let fine = Arc::new(refine_uniform(finest));
    let v2 = build_dofmap(&fine, SpaceDescriptor::lagrange(2))?;
    let v1 = build_dofmap(&fine, SpaceDescriptor::lagrange(1))?;
    let gam = CoefficientField::new(
        v1.clone(),
        lagrange_interpolate(&v1, &gamma_target).coeffs,
        1e-6,
    );
    let zero = Field::Constant(0.0);
    boundary_data
        .iter()
        .map(|g| {
            let u = forward_dirichlet(&v2, &gam, &zero, g)?;
            let neumann: Option<Box<dyn FluxData>> = if with_flux {
                Some(Box::new(SampledFlux::new(u.clone(), gam.clone())))
            } else {
                None
            };
            Ok(Dataset {
                q: Box::new(SampledField::new(u)),
                neumann,
                f: Box::new(Field::Constant(0.0)),
            })
        })
        .collect()
}
