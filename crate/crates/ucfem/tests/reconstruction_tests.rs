//! Oracle tests for the objective, reduced gradient, smoother, and the
//! steepest-descent loop.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ucfem::analytic::{Field, SampledField};
use ucfem::continuation::{beta_schedule, UcError};
use ucfem::fem::quadrature::bary_to_xy;
use ucfem::fem::{
    assemble_scalar_load, build_dofmap, l2_norm, lagrange_interpolate, CoefficientField,
    ElemGeom, FeFunction, MixedSpaces, ScalarData, SpaceDescriptor, EDGE_GAUSS, TRI_QUAD,
};
use ucfem::mesh::{mesh_size, unit_square_mesh, TriMesh, REGION_OMEGA};
use ucfem::reconstruction::{
    dump_gamma, eval_objective, fd_gradient_check, gradient_integrand, gradient_load,
    manufacture_datasets, reconstruct, smoothed_gradient, solve_states, study_ladder, Dataset,
    GradientMode, ReconConfig, UpdateMode,
};
use ucfem::solver::{forward_dirichlet, FieldTriple, SaddleSolver};

fn bump() -> Field {
    Field::GaussianBump { base: 1.0, amp: 1.0, x0: -0.3, y0: 0.3 }
}

fn random_p1(
    dm: &Arc<ucfem::fem::DofMap>,
    rng: &mut ChaCha8Rng,
    lo: f64,
    hi: f64,
) -> FeFunction {
    let coeffs = (0..dm.ndofs).map(|_| rng.random_range(lo..hi)).collect();
    FeFunction::new(dm.clone(), coeffs)
}

#[test]
fn gradient_integrand_has_pointwise_closed_forms() {
    // Exact flux: sigma = gamma * grad(u) zeroes the exact derivative.
    let gu = [0.7, -1.3];
    let gamma = 1.8;
    let sigma = [gamma * gu[0], gamma * gu[1]];
    let exact = gradient_integrand(gu, sigma, gamma, GradientMode::ExactDerivative);
    assert!(exact.abs() <= 1e-15, "exact mode at compatible flux: {exact}");

    // u = x, sigma = 0, gamma = 1 gives one half.
    let half = gradient_integrand([1.0, 0.0], [0.0, 0.0], 1.0, GradientMode::ExactDerivative);
    assert!((half - 0.5).abs() <= 1e-15);

    // Energy-difference branch: |grad u|^2 - |sigma|^2 / gamma.
    let lit = gradient_integrand([1.0, 0.0], [2.0, 0.0], 2.0, GradientMode::EnergyDifference);
    assert!((lit - (1.0 - 4.0 / 2.0)).abs() <= 1e-15);
    // At compatible flux the energy difference is (1 - gamma)|grad u|^2.
    let lit2 = gradient_integrand(gu, sigma, gamma, GradientMode::EnergyDifference);
    let gu2 = gu[0] * gu[0] + gu[1] * gu[1];
    assert!((lit2 - (1.0 - gamma) * gu2).abs() <= 1e-12);
}

#[test]
fn mode_names_round_trip() {
    for mode in [GradientMode::ExactDerivative, GradientMode::EnergyDifference] {
        assert_eq!(GradientMode::parse(mode.name()), Some(mode));
    }
    for mode in [UpdateMode::SafeguardedDescent, UpdateMode::FixedStep] {
        assert_eq!(UpdateMode::parse(mode.name()), Some(mode));
    }
    assert_eq!(GradientMode::parse("ascent"), None);
    assert_eq!(UpdateMode::parse(""), None);
}

#[test]
fn objective_vanishes_for_exact_compatible_data() {
    let mesh = study_ladder(0.5, 1, false).unwrap().remove(0);
    let spaces = MixedSpaces::build(&mesh, 1).unwrap();
    let v1 = build_dofmap(&mesh, SpaceDescriptor::lagrange(1)).unwrap();
    let gamma = CoefficientField::constant(v1, 1.0);
    let datasets = [Dataset {
        q: Box::new(Field::XPlusY),
        neumann: None,
        f: Box::new(Field::Constant(0.0)),
    }];
    let mut solver = SaddleSolver::new();
    let triples = solve_states(&spaces, &gamma, &datasets, 1.0, 0.0, &mut solver).unwrap();
    let parts = eval_objective(&spaces, &gamma, &datasets, &triples, 1.0, 0.0);
    assert!(parts.total <= 1e-12, "objective at compatible data: {:e}", parts.total);
    assert!(parts.multiplier_residual <= 1e-9, "constraint residual: {:e}", parts.multiplier_residual);
    assert!(parts.tikhonov <= 1e-30, "constant coefficient has no regularization energy");
}

#[test]
fn objective_of_zero_fields_is_half_alpha_omega() {
    let mesh = study_ladder(0.5, 1, false).unwrap().remove(0);
    let spaces = MixedSpaces::build(&mesh, 1).unwrap();
    let v1 = build_dofmap(&mesh, SpaceDescriptor::lagrange(1)).unwrap();
    let gamma = CoefficientField::constant(v1, 1.0);
    let datasets = [Dataset {
        q: Box::new(Field::Constant(1.0)),
        neumann: None,
        f: Box::new(Field::Constant(0.0)),
    }];
    let zero = FieldTriple::from_vector(&spaces, &vec![0.0; spaces.offsets()[3]]);
    let alpha = 3.0;
    let parts = eval_objective(&spaces, &gamma, &datasets, &[zero], alpha, 0.5);
    let omega_area = mesh.region_area(REGION_OMEGA);
    assert!(omega_area > 0.0);
    let expected = 0.5 * alpha * omega_area;
    assert!(
        (parts.total - expected).abs() <= 1e-12 * expected,
        "zero-field objective {} vs {}",
        parts.total,
        expected
    );
    assert_eq!(parts.mismatch, 0.0);
    assert_eq!(parts.flux, 0.0, "zero flux has no boundary penalty");
}

/// Independent re-evaluation: dataset-major loops, reversed element order,
/// explicit normal-trace quadrature.
fn objective_by_hand(
    spaces: &MixedSpaces,
    gamma: &CoefficientField,
    datasets: &[Dataset],
    triples: &[ucfem::solver::FieldTriple],
    alpha: f64,
    beta: f64,
) -> f64 {
    let mesh: &Arc<TriMesh> = spaces.mesh();
    let nt = mesh.triangles.len();
    let omega = mesh.region_mask(REGION_OMEGA);
    let h = mesh_size(mesh);
    let mut total = 0.0;
    for (ds, tr) in datasets.iter().zip(triples) {
        let mut mism = 0.0;
        let mut data = 0.0;
        for t in (0..nt).rev() {
            let geom = ElemGeom::new(mesh, t);
            for qp in TRI_QUAD {
                let w = qp.weight * geom.area;
                let p = bary_to_xy(geom.verts[0], geom.verts[1], geom.verts[2], qp.bary);
                let g = gamma.value_bary(t, &geom, qp.bary);
                let gu = tr.u.grad_bary(t, &geom, qp.bary);
                let sv = tr.sigma.vec_value_xy(t, &geom, p);
                let rx = g * gu[0] - sv[0];
                let ry = g * gu[1] - sv[1];
                mism += w * (rx * rx + ry * ry) / g;
                if omega[t] {
                    let diff = tr.u.value_bary(t, &geom, qp.bary) - ds.q.eval(t, p);
                    data += w * diff * diff;
                }
            }
        }
        let mut fx = 0.0;
        for &e in mesh.boundary_edges.iter().rev() {
            let (t, _) = mesh.edge_tris[e][0].unwrap();
            let geom = ElemGeom::new(mesh, t);
            let n = mesh.boundary_outward_normal(e);
            let [lo, hi] = mesh.edges[e];
            let (plo, phi) = (mesh.vertices[lo], mesh.vertices[hi]);
            let len = mesh.edge_length(e);
            for gp in EDGE_GAUSS {
                let p = [plo[0] + gp.t * (phi[0] - plo[0]), plo[1] + gp.t * (phi[1] - plo[1])];
                let sv = tr.sigma.vec_value_xy(t, &geom, p);
                let sn = sv[0] * n[0] + sv[1] * n[1];
                fx += gp.weight * len * sn * sn;
            }
        }
        total += 0.5 * mism + 0.5 * alpha * data + 0.5 * beta * fx;
    }
    let mut tik = 0.0;
    for t in (0..nt).rev() {
        let geom = ElemGeom::new(mesh, t);
        for qp in TRI_QUAD {
            let gg = gamma.grad_bary(t, &geom, qp.bary);
            tik += qp.weight * geom.area * (gg[0] * gg[0] + gg[1] * gg[1]);
        }
    }
    total + 0.5 * h * tik
}

#[test]
fn objective_matches_independent_reevaluation() {
    let mesh = study_ladder(0.5, 1, false).unwrap().remove(0);
    let spaces = MixedSpaces::build(&mesh, 1).unwrap();
    let v1 = build_dofmap(&mesh, SpaceDescriptor::lagrange(1)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let gamma =
        CoefficientField::new(v1.clone(), random_p1(&v1, &mut rng, 0.5, 2.0).coeffs, 0.1);
    let datasets: Vec<Dataset> = (0..2)
        .map(|_| Dataset {
            q: Box::new(SampledField::new(random_p1(&v1, &mut rng, -1.0, 1.0))),
            neumann: None,
            f: Box::new(Field::Constant(0.7)),
        })
        .collect();
    let (alpha, beta) = (2.5, 0.01);
    let mut solver = SaddleSolver::new();
    let triples = solve_states(&spaces, &gamma, &datasets, alpha, beta, &mut solver).unwrap();
    let parts = eval_objective(&spaces, &gamma, &datasets, &triples, alpha, beta);
    let by_hand = objective_by_hand(&spaces, &gamma, &datasets, &triples, alpha, beta);
    let scale = parts.total.abs().max(1.0);
    assert!(
        (parts.total - by_hand).abs() <= 1e-12 * scale,
        "objective {} vs re-evaluation {}",
        parts.total,
        by_hand
    );
    assert!(parts.total.is_finite() && parts.total > 0.0);
}

#[test]
fn smoother_reproduces_constants_and_damps_oscillation() {
    let mesh = Arc::new(unit_square_mesh(4).unwrap());
    let v1 = build_dofmap(&mesh, SpaceDescriptor::lagrange(1)).unwrap();
    let h = mesh_size(&mesh);
    let mut solver = SaddleSolver::new();

    let load = assemble_scalar_load(&v1, &Field::Constant(1.0));
    let g = smoothed_gradient(&v1, h, &load, &mut solver).unwrap();
    for &c in &g.coeffs {
        assert!((c - 1.0).abs() <= 1e-10, "constant not reproduced: {c}");
    }

    // A checkerboard integrand must come out strictly smaller in L2.
    struct AltSign;
    impl ScalarData for AltSign {
        fn eval(&self, tri: usize, _p: [f64; 2]) -> f64 {
            if tri % 2 == 0 {
                1.0
            } else {
                -1.0
            }
        }
    }
    let load = assemble_scalar_load(&v1, &AltSign);
    let g = smoothed_gradient(&v1, h, &load, &mut solver).unwrap();
    let area: f64 = (0..mesh.triangles.len()).map(|t| mesh.tri_area(t)).sum();
    let raw_norm = area.sqrt();
    let smooth_norm = l2_norm(&g, None);
    assert!(
        smooth_norm < 0.5 * raw_norm,
        "no damping: |g| = {smooth_norm} vs |G| = {raw_norm}"
    );
}

#[test]
fn constant_target_terminates_within_two_iterations() {
    // The flux penalty shifts the optimum away from the interpolant by
    // O(beta), so the stationarity check needs beta = 0 here.
    let meshes = study_ladder(0.4, 1, false).unwrap();
    let cfg = ReconConfig { k: 2, l: 1, tol: 1e-6, beta0: 0.0, ..ReconConfig::default() };
    let datasets = [Dataset {
        q: Box::new(Field::X2MinusY2),
        neumann: None,
        f: Box::new(Field::Constant(0.0)),
    }];
    let report = reconstruct(
        &cfg,
        &meshes,
        &datasets,
        &Field::Constant(2.0),
        Some(&Field::Constant(2.0)),
    )
    .unwrap();
    assert!(report.log.len() <= 2, "took {} iterations", report.log.len());
    let last = report.log.last().unwrap();
    assert!(last.grad_norm <= 1e-6, "gradient at optimum: {:e}", last.grad_norm);
    assert_eq!(last.step, 0.0);
    let errs = report.errors.as_ref().unwrap();
    assert!(errs[0] <= 1e-12, "recovered coefficient error {:e}", errs[0]);
}

#[test]
fn gradient_vanishes_at_generating_coefficient() {
    // Inverse-crime probe: data manufactured with the same mesh and order the
    // states use, so the smoothed gradient at the generating coefficient is
    // dominated by discretization residuals and must be relatively small.
    let meshes = study_ladder(0.4, 3, false).unwrap();
    let mut ratios = Vec::new();
    {
        for mesh in &meshes {
            let spaces = MixedSpaces::build(mesh, 2).unwrap();
            let v1 = build_dofmap(mesh, SpaceDescriptor::lagrange(1)).unwrap();
            let v2 = build_dofmap(mesh, SpaceDescriptor::lagrange(2)).unwrap();
            let gamma = CoefficientField::new(
                v1.clone(),
                lagrange_interpolate(&v1, &bump()).coeffs,
                0.1,
            );
            let u = forward_dirichlet(&v2, &gamma, &Field::Constant(0.0), &Field::HarmonicPair { k1: 2, k2: 1 })
                .unwrap();
            let datasets = [Dataset {
                q: Box::new(SampledField::new(u)),
                neumann: None,
                f: Box::new(Field::Constant(0.0)),
            }];
            let h = mesh_size(mesh);
            let beta = beta_schedule(1e-3, h, 0.0, 2);
            let mut solver = SaddleSolver::new();
            let triples =
                solve_states(&spaces, &gamma, &datasets, 1000.0, beta, &mut solver).unwrap();
            let load = gradient_load(
                &v1,
                &spaces,
                &gamma,
                &triples,
                GradientMode::ExactDerivative,
                false,
            );
            let g = smoothed_gradient(&v1, h, &load, &mut solver).unwrap();
            let ratio = l2_norm(&g, None) / l2_norm(&gamma.fe, None);
            assert!(ratio <= 1e-3, "h = {h:.4}: |g|/|gamma| = {ratio:.3e}");
            ratios.push(ratio);
        }
    }
    // The residual gradient shrinks under refinement.
    for pair in ratios.windows(2) {
        assert!(pair[1] < pair[0], "gradient ratio did not shrink: {ratios:?}");
    }
}

#[test]
fn fd_check_validates_reduced_gradient() {
    let meshes = study_ladder(0.4, 1, false).unwrap();
    let mesh = &meshes[0];
    let spaces = MixedSpaces::build(mesh, 1).unwrap();
    let v1 = build_dofmap(mesh, SpaceDescriptor::lagrange(1)).unwrap();
    let gamma = CoefficientField::constant(v1.clone(), 1.0);
    let datasets = manufacture_datasets(
        mesh,
        &[Field::HarmonicPair { k1: 2, k2: 1 }, Field::HarmonicPair { k1: 3, k2: 2 }],
        bump(),
        false,
    )
    .unwrap();
    let h = mesh_size(mesh);
    let beta = beta_schedule(1e-3, h, 0.0, 1);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for trial in 0..3 {
        let dir = random_p1(&v1, &mut rng, -1.0, 1.0);
        let check =
            fd_gradient_check(&spaces, &v1, &gamma, &datasets, 1000.0, beta, &dir).unwrap();
        assert!(
            check.rel_error <= 1e-4,
            "trial {trial}: analytic {} vs fd {} at eps {} (rel {:e})",
            check.analytic,
            check.best_fd,
            check.best_eps,
            check.rel_error
        );
        assert!(check.analytic.abs() > 0.0, "probe must not sit at a critical point");
    }

    // Zero direction: both sides vanish identically.
    let zero = FeFunction::zeros(v1.clone());
    let check = fd_gradient_check(&spaces, &v1, &gamma, &datasets, 1000.0, beta, &zero).unwrap();
    assert_eq!(check.analytic, 0.0);
    assert_eq!(check.rel_error, 0.0);
}

#[test]
fn one_safeguarded_step_decreases_objective() {
    let meshes = study_ladder(0.4, 1, false).unwrap();
    let mesh = &meshes[0];
    let spaces = MixedSpaces::build(mesh, 1).unwrap();
    let v1 = build_dofmap(mesh, SpaceDescriptor::lagrange(1)).unwrap();
    let datasets = manufacture_datasets(
        mesh,
        &[Field::HarmonicPair { k1: 2, k2: 1 }, Field::HarmonicPair { k1: 3, k2: 2 }],
        bump(),
        false,
    )
    .unwrap();
    let cfg = ReconConfig { k: 1, l: 1, max_iters: 1, ..ReconConfig::default() };
    let h = mesh_size(mesh);
    let beta = beta_schedule(cfg.beta0, h, 0.0, cfg.k);

    // Objective at the flat initial guess, computed outside the loop.
    let gamma0 = CoefficientField::constant(v1.clone(), 1.0);
    let mut solver = SaddleSolver::new();
    let triples =
        solve_states(&spaces, &gamma0, &datasets, cfg.alpha, beta, &mut solver).unwrap();
    let j0 = eval_objective(&spaces, &gamma0, &datasets, &triples, cfg.alpha, beta).total;

    let report =
        reconstruct(&cfg, &meshes, &datasets, &Field::Constant(1.0), Some(&bump())).unwrap();
    assert_eq!(report.log.len(), 1);
    let rec = &report.log[0];
    assert!(rec.step > 0.0, "step rejected");
    assert!(rec.objective < j0, "no decrease: {} vs {}", rec.objective, j0);
    assert!(rec.gamma_err_l2 > 0.0);
}

#[test]
fn safeguarded_run_is_monotone_deterministic_and_clamped() {
    let meshes = study_ladder(0.4, 2, false).unwrap();
    let datasets = manufacture_datasets(
        &meshes[1],
        &[Field::HarmonicPair { k1: 2, k2: 1 }, Field::HarmonicPair { k1: 3, k2: 2 }],
        bump(),
        false,
    )
    .unwrap();
    let cfg = ReconConfig { k: 1, l: 1, max_iters: 5, ..ReconConfig::default() };
    let run = || reconstruct(&cfg, &meshes, &datasets, &Field::Constant(1.0), Some(&bump()));
    let report = run().unwrap();

    for level in 0..meshes.len() {
        let objs: Vec<f64> = report
            .log
            .iter()
            .filter(|r| r.level == level)
            .map(|r| r.objective)
            .collect();
        assert!(!objs.is_empty());
        for pair in objs.windows(2) {
            assert!(pair[1] <= pair[0], "objective increased: {} -> {}", pair[0], pair[1]);
        }
    }
    for gamma in &report.gammas {
        for &c in &gamma.fe.coeffs {
            assert!(c >= cfg.gamma_min - 1e-15, "clamp violated: {c}");
        }
    }
    for r in &report.log {
        let mut ok = r.step == 0.0;
        let mut s = cfg.s;
        for _ in 0..=8 {
            ok |= r.step == s;
            s *= 0.5;
        }
        assert!(ok, "step {} is not a halving of {}", r.step, cfg.s);
    }
    let errs = report.errors.as_ref().unwrap();
    assert_eq!(errs.len(), 2);
    assert!(errs.iter().all(|e| e.is_finite() && *e > 0.0));

    // Bitwise determinism of the serialized log.
    let again = run().unwrap();
    assert_eq!(report.to_csv(), again.to_csv());

    // CSV shape: header plus one line per record, six columns each.
    let csv = report.to_csv();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "level,iter,objective,grad_norm,step,gamma_err_l2");
    let mut n = 0;
    for line in lines {
        assert_eq!(line.split(',').count(), 6);
        n += 1;
    }
    assert_eq!(n, report.log.len());
}

#[test]
fn fixed_step_mode_applies_the_verbatim_update() {
    let meshes = study_ladder(0.4, 1, false).unwrap();
    let datasets = manufacture_datasets(
        &meshes[0],
        &[Field::HarmonicPair { k1: 2, k2: 1 }],
        bump(),
        false,
    )
    .unwrap();
    let cfg = ReconConfig {
        k: 1,
        l: 1,
        max_iters: 2,
        update_mode: UpdateMode::FixedStep,
        ..ReconConfig::default()
    };
    let report =
        reconstruct(&cfg, &meshes, &datasets, &Field::Constant(1.0), None).unwrap();
    assert_eq!(report.log.len(), 2);
    for r in &report.log {
        assert_eq!(r.step, cfg.s);
        assert!(r.objective.is_finite());
        assert_eq!(r.gamma_err_l2, 0.0, "unknown target logs zero error");
    }
    assert!(report.errors.is_none());
}

#[test]
fn reconstruct_rejects_bad_inputs_before_solving() {
    let meshes = study_ladder(0.5, 1, false).unwrap();
    let cfg = ReconConfig { k: 1, l: 1, ..ReconConfig::default() };

    let err = reconstruct(&cfg, &meshes, &[], &Field::Constant(1.0), None).unwrap_err();
    assert!(matches!(err, UcError::Config(_)), "empty datasets: {err}");

    let mixed = [
        Dataset {
            q: Box::new(Field::Constant(0.0)),
            neumann: None,
            f: Box::new(Field::Constant(0.0)),
        },
        Dataset {
            q: Box::new(Field::Constant(0.0)),
            neumann: Some(Box::new(ucfem::analytic::FluxField {
                field: Field::X,
                scale: 1.0,
            })),
            f: Box::new(Field::Constant(0.0)),
        },
    ];
    let err = reconstruct(&cfg, &meshes, &mixed, &Field::Constant(1.0), None).unwrap_err();
    assert!(matches!(err, UcError::Config(_)), "mixed flux presence: {err}");

    // Flux data without tagged edges is a configuration error, not a silent drop.
    let flux_only = [Dataset {
        q: Box::new(Field::Constant(0.0)),
        neumann: Some(Box::new(ucfem::analytic::FluxField { field: Field::X, scale: 1.0 })),
        f: Box::new(Field::Constant(0.0)),
    }];
    let err = reconstruct(&cfg, &meshes, &flux_only, &Field::Constant(1.0), None).unwrap_err();
    assert!(matches!(err, UcError::Config(_)), "untagged flux mesh: {err}");

    let bad = ReconConfig { k: 1, l: 2, ..ReconConfig::default() };
    assert!(matches!(bad.validate(), Err(UcError::Config(_))));
    let bad = ReconConfig { s: 0.0, ..ReconConfig::default() };
    assert!(matches!(bad.validate(), Err(UcError::Config(_))));
    let bad = ReconConfig { tol: 0.0, ..ReconConfig::default() };
    assert!(matches!(bad.validate(), Err(UcError::Config(_))));
    let bad = ReconConfig { gamma_min: -1.0, ..ReconConfig::default() };
    assert!(matches!(bad.validate(), Err(UcError::Config(_))));
}

#[test]
fn single_dataset_run_completes() {
    let meshes = study_ladder(0.5, 1, false).unwrap();
    let datasets = manufacture_datasets(
        &meshes[0],
        &[Field::HarmonicPair { k1: 2, k2: 1 }],
        bump(),
        false,
    )
    .unwrap();
    let cfg = ReconConfig { k: 1, l: 1, max_iters: 3, ..ReconConfig::default() };
    let report = reconstruct(&cfg, &meshes, &datasets, &Field::Constant(1.0), Some(&bump()))
        .unwrap();
    let errs = report.errors.as_ref().unwrap();
    assert_eq!(errs.len(), 1);
    assert!(errs[0].is_finite());
}

#[test]
fn gamma_dump_has_header_and_one_value_per_line() {
    let meshes = study_ladder(0.5, 1, false).unwrap();
    let v1 = build_dofmap(&meshes[0], SpaceDescriptor::lagrange(1)).unwrap();
    let fe = lagrange_interpolate(&v1, &Field::XPlusY);
    let dump = dump_gamma(&fe);
    let mut lines = dump.lines();
    assert_eq!(lines.next().unwrap(), format!("gamma {}", v1.ndofs));
    let values: Vec<f64> = lines.map(|l| l.parse().unwrap()).collect();
    assert_eq!(values.len(), v1.ndofs);
    for (a, b) in values.iter().zip(&fe.coeffs) {
        assert_eq!(a, b, "dump must round-trip exactly");
    }
}
