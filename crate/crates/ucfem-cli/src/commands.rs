//! Subcommand implementations. Each command builds its experiment from the
//! resolved configuration, runs the library, prints a short summary to
//! stdout, and writes CSV tables, nodal dumps and gnuplot scripts into the
//! output directory. All orchestration here is single threaded; parallelism
//! lives inside the library's assembly and norm kernels.

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ucfem::analytic::Field;
use ucfem::continuation::{
    beta_schedule, fit_log_rate, fit_power_rate, run_convergence_study, ConvergenceTable,
    PerturbationSpec, StudyConfig, UcError,
};
use ucfem::fem::{
    build_dofmap, error_norms, lagrange_interpolate, CoefficientField, FeFunction, MixedSpaces,
    SpaceDescriptor,
};
use ucfem::mesh::{
    mesh_size, tag_triangles, unit_disc_mesh, unit_square_mesh, write_ascii, RegionSpec, TriMesh,
    REGION_B, REGION_OMEGA, REGION_OMIN,
};
use ucfem::reconstruction::{
    dump_gamma, fd_gradient_check, manufacture_datasets, reconstruct, study_ladder, GradientMode,
    ReconConfig, ReconReport, UpdateMode,
};
use ucfem::solver::forward_dirichlet;

use crate::config::{help_table, Kind, KeySpec, Range, Resolved};

/// Driver error. `Usage` and `Config` map to exit code 2, `Run` to 1.
#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Config(String),
    Run(String),
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(msg) => write!(f, "usage error: {msg}"),
            CliError::Config(msg) => write!(f, "config error: {msg}"),
            CliError::Run(msg) => write!(f, "error: {msg}"),
        }
    }
}

impl From<crate::config::ConfigError> for CliError {
    fn from(e: crate::config::ConfigError) -> Self {
        CliError::Config(e.0)
    }
}

impl From<UcError> for CliError {
    fn from(e: UcError) -> Self {
        match e {
            UcError::Config(msg) => CliError::Config(msg),
            other => CliError::Run(other.to_string()),
        }
    }
}

/// Output directory handle that remembers what was written, so a failing run
/// can report which artifacts are partial.
pub struct Outputs {
    dir: PathBuf,
    pub written: Vec<String>,
}

impl Outputs {
    pub fn new(dir: PathBuf) -> Self {
        Outputs { dir, written: Vec::new() }
    }

    pub fn dir(&self) -> &PathBuf {
        &self.dir
    }

    pub fn write(&mut self, name: &str, contents: &str) -> Result<(), CliError> {
        let path = self.dir.join(name);
        fs::write(&path, contents)
            .map_err(|e| CliError::Run(format!("cannot write {}: {e}", path.display())))?;
        self.written.push(name.to_string());
        Ok(())
    }
}

/// One dispatchable subcommand: its name, one-line description, key table,
/// and entry point.
#[derive(Debug)]
pub struct Command {
    pub name: &'static str,
    pub about: &'static str,
    pub keys: &'static [KeySpec],
    pub run: fn(&Resolved, &mut Outputs) -> Result<(), CliError>,
}

pub const COMMANDS: &[Command] = &[
    Command {
        name: "uc-convergence",
        about: "unique continuation convergence study over a refinement ladder",
        keys: UC_CONVERGENCE_KEYS,
        run: run_uc_convergence,
    },
    Command {
        name: "reconstruct",
        about: "multi-level coefficient reconstruction from manufactured data",
        keys: RECONSTRUCT_KEYS,
        run: run_reconstruct,
    },
    Command {
        name: "forward",
        about: "single forward Dirichlet solve with a nodal coefficient",
        keys: FORWARD_KEYS,
        run: run_forward,
    },
    Command {
        name: "mesh-info",
        about: "mesh statistics, Euler check, and tagged region areas",
        keys: MESH_INFO_KEYS,
        run: run_mesh_info,
    },
    Command {
        name: "gradient-check",
        about: "finite-difference validation of the reduced coefficient gradient",
        keys: GRADIENT_CHECK_KEYS,
        run: run_gradient_check,
    },
];

pub fn find_command(name: &str) -> Option<&'static Command> {
    COMMANDS.iter().find(|c| c.name == name)
}

/// Renders the per-command help page.
pub fn command_help(cmd: &Command) -> String {
    format!(
        "ucfem {} - {}\n\nusage: ucfem {} [--config FILE] [--key VALUE ...] --out DIR\n\nkeys:\n{}",
        cmd.name,
        cmd.about,
        cmd.name,
        help_table(cmd.keys)
    )
}

fn parse_field(cfg: &Resolved, key: &str) -> Result<Field, CliError> {
    let name = cfg.text(key);
    Field::parse(name)
        .ok_or_else(|| CliError::Config(format!("key '{key}': unknown field '{name}'")))
}

/// Parses a comma-separated list of boundary field names; empty lists are a
/// config error so a run with no datasets fails before any mesh is built.
fn parse_dataset_fields(cfg: &Resolved, key: &str) -> Result<Vec<Field>, CliError> {
    let text = cfg.text(key).trim();
    if text.is_empty() {
        return Err(CliError::Config(format!("key '{key}': at least one dataset is required")));
    }
    text.split(',')
        .map(|part| {
            let part = part.trim();
            Field::parse(part)
                .ok_or_else(|| CliError::Config(format!("key '{key}': unknown field '{part}'")))
        })
        .collect()
}

fn parse_gradient_mode(cfg: &Resolved, key: &str) -> Result<GradientMode, CliError> {
    let name = cfg.text(key);
    GradientMode::parse(name).ok_or_else(|| {
        CliError::Config(format!(
            "key '{key}': unknown gradient mode '{name}' (exact, energy-difference)"
        ))
    })
}

fn parse_update_mode(cfg: &Resolved, key: &str) -> Result<UpdateMode, CliError> {
    let name = cfg.text(key);
    UpdateMode::parse(name).ok_or_else(|| {
        CliError::Config(format!(
            "key '{key}': unknown update mode '{name}' (safeguarded, fixed-step)"
        ))
    })
}

/// Nodal value dump in the same shape as [`dump_gamma`]: a `label <n>`
/// header, then one coefficient per line.
fn dump_nodal(label: &str, fe: &FeFunction) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{label} {}", fe.coeffs.len());
    for c in &fe.coeffs {
        let _ = writeln!(out, "{c}");
    }
    out
}

const UC_CONVERGENCE_KEYS: &[KeySpec] = &[
    KeySpec {
        name: "k",
        kind: Kind::Usize,
        default: "1",
        range: Range::AtLeastOne,
        help: "polynomial order of the mixed triple V_k x RT_{k-1} x X_{k-1} (1 or 2)",
    },
    KeySpec {
        name: "levels",
        kind: Kind::Usize,
        default: "4",
        range: Range::AtLeastOne,
        help: "number of uniform refinement levels (at least 3)",
    },
    KeySpec {
        name: "h_coarse",
        kind: Kind::F64,
        default: "0.17",
        range: Range::UnitOpen,
        help: "target mesh size of the coarsest disc mesh",
    },
    KeySpec {
        name: "alpha",
        kind: Kind::F64,
        default: "1000",
        range: Range::Positive,
        help: "data fidelity weight on the interior region omega",
    },
    KeySpec {
        name: "beta0",
        kind: Kind::F64,
        default: "1e-3",
        range: Range::NonNegative,
        help: "flux penalty base; the level penalty is beta0 * max(h, h0)^(2k)",
    },
    KeySpec {
        name: "exact",
        kind: Kind::Text,
        default: "rm_sin:3",
        range: Range::Any,
        help: "harmonic reference solution (catalogue field name)",
    },
    KeySpec {
        name: "omega_all",
        kind: Kind::Bool,
        default: "false",
        range: Range::Any,
        help: "take data on the whole domain instead of the annulus omega",
    },
    KeySpec {
        name: "noise_dq",
        kind: Kind::F64,
        default: "0",
        range: Range::NonNegative,
        help: "amplitude of the elementwise-uniform offset added to the data q",
    },
    KeySpec {
        name: "noise_df",
        kind: Kind::F64,
        default: "0",
        range: Range::NonNegative,
        help: "amplitude of the elementwise-uniform offset added to the source f",
    },
    KeySpec {
        name: "noise_dgamma",
        kind: Kind::F64,
        default: "0",
        range: Range::NonNegative,
        help: "relative nodal amplitude of the multiplicative coefficient perturbation",
    },
    KeySpec {
        name: "seed",
        kind: Kind::Usize,
        default: "0",
        range: Range::NonNegative,
        help: "seed of the deterministic noise generator",
    },
];

/// Gnuplot script for the convergence study: log-log error against h with
/// reference slopes 0.45, 0.9 and 1.35 anchored at the coarsest data point.
fn convergence_plot_script(table: &ConvergenceTable) -> String {
    let h0 = table.rows[0].h;
    let e0 = table.rows[0].err_l2_omin;
    let anchor = |rate: f64| 2.0 * e0 / h0.powf(rate);
    let mut s = String::new();
    s.push_str("# Error under uniform refinement, log-log, with reference slopes.\n");
    s.push_str("set datafile separator ','\n");
    s.push_str("set logscale xy\n");
    s.push_str("set xlabel 'h'\n");
    s.push_str("set ylabel 'error'\n");
    s.push_str("set key bottom right\n");
    let _ = writeln!(
        s,
        "plot 'uc_convergence.csv' using 2:6 with linespoints title 'L2(Omega-) error', \\\n\
         \x20    'uc_convergence.csv' using 2:9 with linespoints title 'triple norm', \\\n\
         \x20    {:.6e}*x**0.45 with lines dashtype 2 title 'h^{{0.45}}', \\\n\
         \x20    {:.6e}*x**0.9 with lines dashtype 2 title 'h^{{0.9}}', \\\n\
         \x20    {:.6e}*x**1.35 with lines dashtype 2 title 'h^{{1.35}}'",
        anchor(0.45),
        anchor(0.9),
        anchor(1.35)
    );
    s
}

fn run_uc_convergence(cfg: &Resolved, out: &mut Outputs) -> Result<(), CliError> {
    let exact = parse_field(cfg, "exact")?;
    let study = StudyConfig {
        k: cfg.usize("k"),
        levels: cfg.usize("levels"),
        h_coarse: cfg.f64("h_coarse"),
        alpha: cfg.f64("alpha"),
        beta0: cfg.f64("beta0"),
        exact,
        omega_all: cfg.bool("omega_all"),
        perturbation: Some(PerturbationSpec {
            dq: cfg.f64("noise_dq"),
            df: cfg.f64("noise_df"),
            dgamma: cfg.f64("noise_dgamma"),
            seed: cfg.usize("seed") as u64,
        }),
    };
    let table = run_convergence_study(&study)?;
    out.write("uc_convergence.csv", &table.to_csv())?;

    let h = table.column("h").expect("h is a table column");
    let mut rates = String::from("column,rate,c,log_residual\n");
    for name in ["err_l2_Omin", "err_l2_B", "err_h1_B", "tn_total"] {
        let err = table.column(name).expect("known column");
        let fit = fit_power_rate(&h, &err)?;
        let _ = writeln!(rates, "{name},{},{},{}", fit.rate, fit.c, fit.log_residual);
        println!("fitted rate for {name}: {:.4} (c = {:.4})", fit.rate, fit.c);
    }
    out.write("rates.csv", &rates)?;
    out.write("plot_convergence.gp", &convergence_plot_script(&table))?;

    for row in &table.rows {
        println!(
            "level {}: h = {:.5}, L2(Omega-) error = {:.6e}, triple norm = {:.6e}",
            row.level, row.h, row.err_l2_omin, row.tn.total
        );
    }
    Ok(())
}

const RECONSTRUCT_KEYS: &[KeySpec] = &[
    KeySpec {
        name: "k",
        kind: Kind::Usize,
        default: "2",
        range: Range::AtLeastOne,
        help: "state space order: V_k x RT_{k-1} x X_{k-1} (1 or 2)",
    },
    KeySpec {
        name: "l",
        kind: Kind::Usize,
        default: "1",
        range: Range::AtLeastOne,
        help: "coefficient space order: gamma_h in V_l, l <= k",
    },
    KeySpec {
        name: "levels",
        kind: Kind::Usize,
        default: "4",
        range: Range::AtLeastOne,
        help: "number of uniform refinement levels",
    },
    KeySpec {
        name: "h_coarse",
        kind: Kind::F64,
        default: "0.168",
        range: Range::UnitOpen,
        help: "target mesh size of the coarsest disc mesh",
    },
    KeySpec {
        name: "alpha",
        kind: Kind::F64,
        default: "1000",
        range: Range::Positive,
        help: "data fidelity weight on the interior region omega",
    },
    KeySpec {
        name: "beta0",
        kind: Kind::F64,
        default: "1e-3",
        range: Range::NonNegative,
        help: "flux penalty base; the level penalty is beta0 * h^(2k)",
    },
    KeySpec {
        name: "s",
        kind: Kind::F64,
        default: "0.8",
        range: Range::Positive,
        help: "base step length of the descent update",
    },
    KeySpec {
        name: "max_iters",
        kind: Kind::Usize,
        default: "300",
        range: Range::AtLeastOne,
        help: "iteration budget per level",
    },
    KeySpec {
        name: "tol",
        kind: Kind::F64,
        default: "1e-8",
        range: Range::Positive,
        help: "smoothed gradient norm below which a level stops",
    },
    KeySpec {
        name: "gradient_mode",
        kind: Kind::Text,
        default: "exact",
        range: Range::Any,
        help: "update integrand: 'exact' derivative or 'energy-difference'",
    },
    KeySpec {
        name: "update_mode",
        kind: Kind::Text,
        default: "safeguarded",
        range: Range::Any,
        help: "'safeguarded' backtracking descent or the verbatim 'fixed-step' update",
    },
    KeySpec {
        name: "gamma_min",
        kind: Kind::F64,
        default: "0.1",
        range: Range::Positive,
        help: "nodal positivity clamp applied to the coefficient after every update",
    },
    KeySpec {
        name: "explicit_tikhonov",
        kind: Kind::Bool,
        default: "false",
        range: Range::Any,
        help: "add the explicit h(grad gamma, grad v) regularization load to the gradient",
    },
    KeySpec {
        name: "datasets",
        kind: Kind::Text,
        default: "harmonic_pair:2:1,harmonic_pair:3:2",
        range: Range::Any,
        help: "comma-separated boundary fields; one forward dataset is manufactured per entry",
    },
    KeySpec {
        name: "with_flux",
        kind: Kind::Bool,
        default: "true",
        range: Range::Any,
        help: "tag the boundary sector and attach conormal flux data to every dataset",
    },
    KeySpec {
        name: "gamma0",
        kind: Kind::Text,
        default: "one",
        range: Range::Any,
        help: "initial coefficient guess (catalogue field name)",
    },
    KeySpec {
        name: "target",
        kind: Kind::Text,
        default: "gaussian_bump",
        range: Range::Any,
        help: "target coefficient generating the data and measuring the error",
    },
];

/// Gnuplot script for the reconstruction study: coefficient error against
/// 1/|log h| with the fitted and reference c |log h|^{-1/2} curves.
fn reconstruction_plot_script(fitted_c: Option<f64>) -> String {
    let mut s = String::new();
    s.push_str("# Coefficient error versus 1/|log h|; expected decay c |log h|^{-1/2}.\n");
    s.push_str("set datafile separator ','\n");
    s.push_str("set xlabel '1/|log h|'\n");
    s.push_str("set ylabel 'L2 coefficient error'\n");
    s.push_str("set key top left\n");
    s.push_str(
        "plot 'errors.csv' using (1/abs(log($2))):3 with linespoints title 'gamma error', \\\n",
    );
    if let Some(c) = fitted_c {
        let _ = writeln!(
            s,
            "     {c:.6e}*x**0.5 with lines dashtype 2 title 'fitted c |log h|^{{-1/2}}', \\"
        );
    }
    s.push_str("     0.1625*x**0.5 with lines dashtype 3 title '0.1625 |log h|^{-1/2}'\n");
    s
}

fn write_recon_outputs(
    out: &mut Outputs,
    report: &ReconReport,
) -> Result<(), CliError> {
    out.write("reconstruct_log.csv", &report.to_csv())?;
    for (level, gamma) in report.gammas.iter().enumerate() {
        out.write(&format!("gamma_level{level}.txt"), &dump_gamma(&gamma.fe))?;
    }
    let errors = report.errors.as_ref().expect("target is always known here");
    let mut err_csv = String::from("level,h,gamma_err_l2\n");
    for (level, (h, err)) in report.level_h.iter().zip(errors).enumerate() {
        let _ = writeln!(err_csv, "{level},{h},{err}");
    }
    out.write("errors.csv", &err_csv)?;

    let fit = if report.level_h.len() >= 2 {
        Some(fit_log_rate(&report.level_h, errors)?)
    } else {
        None
    };
    out.write("plot_reconstruction.gp", &reconstruction_plot_script(fit.map(|f| f.c)))?;

    for (level, (h, err)) in report.level_h.iter().zip(errors).enumerate() {
        println!("level {level}: h = {h:.5}, gamma error = {err:.6e}");
    }
    if let Some(fit) = fit {
        println!(
            "fitted c = {:.4} in c |log h|^(-1/2) (free exponent {:.3})",
            fit.c, fit.free_exponent
        );
    }
    Ok(())
}

fn run_reconstruct(cfg: &Resolved, out: &mut Outputs) -> Result<(), CliError> {
    let gamma0 = parse_field(cfg, "gamma0")?;
    let target = parse_field(cfg, "target")?;
    let boundary = parse_dataset_fields(cfg, "datasets")?;
    let recon = ReconConfig {
        k: cfg.usize("k"),
        l: cfg.usize("l"),
        alpha: cfg.f64("alpha"),
        beta0: cfg.f64("beta0"),
        s: cfg.f64("s"),
        max_iters: cfg.usize("max_iters"),
        tol: cfg.f64("tol"),
        gradient_mode: parse_gradient_mode(cfg, "gradient_mode")?,
        update_mode: parse_update_mode(cfg, "update_mode")?,
        gamma_min: cfg.f64("gamma_min"),
        explicit_tikhonov: cfg.bool("explicit_tikhonov"),
    };
    recon.validate()?;
    let with_flux = cfg.bool("with_flux");

    let meshes = study_ladder(cfg.f64("h_coarse"), cfg.usize("levels"), with_flux)?;
    let finest = meshes.last().expect("ladder is nonempty");
    let datasets = manufacture_datasets(finest, &boundary, target, with_flux)?;
    println!(
        "reconstructing over {} levels with {} datasets (k = {}, l = {})",
        meshes.len(),
        datasets.len(),
        recon.k,
        recon.l
    );
    let report = reconstruct(&recon, &meshes, &datasets, &gamma0, Some(&target))?;
    write_recon_outputs(out, &report)
}

const FORWARD_KEYS: &[KeySpec] = &[
    KeySpec {
        name: "geometry",
        kind: Kind::Text,
        default: "disc",
        range: Range::Any,
        help: "mesh geometry: 'disc' (uses h_coarse) or 'square' (uses n)",
    },
    KeySpec {
        name: "h_coarse",
        kind: Kind::F64,
        default: "0.17",
        range: Range::UnitOpen,
        help: "target mesh size of the disc mesh",
    },
    KeySpec {
        name: "n",
        kind: Kind::Usize,
        default: "8",
        range: Range::AtLeastOne,
        help: "subdivisions per side of the square mesh",
    },
    KeySpec {
        name: "k",
        kind: Kind::Usize,
        default: "2",
        range: Range::AtLeastOne,
        help: "Lagrange order of the solution space (1 or 2)",
    },
    KeySpec {
        name: "gamma",
        kind: Kind::Text,
        default: "one",
        range: Range::Any,
        help: "diffusion coefficient, interpolated onto nodal P1",
    },
    KeySpec {
        name: "f",
        kind: Kind::Text,
        default: "zero",
        range: Range::Any,
        help: "volume source term",
    },
    KeySpec {
        name: "g",
        kind: Kind::Text,
        default: "x+y",
        range: Range::Any,
        help: "Dirichlet boundary datum",
    },
    KeySpec {
        name: "exact",
        kind: Kind::Text,
        default: "none",
        range: Range::Any,
        help: "exact solution for error reporting, or 'none'",
    },
];

fn build_geometry(cfg: &Resolved) -> Result<TriMesh, CliError> {
    match cfg.text("geometry") {
        "disc" => Ok(unit_disc_mesh(cfg.f64("h_coarse")).map_err(UcError::from)?),
        "square" => Ok(unit_square_mesh(cfg.usize("n")).map_err(UcError::from)?),
        other => Err(CliError::Config(format!(
            "key 'geometry': expected 'disc' or 'square', got '{other}'"
        ))),
    }
}

fn run_forward(cfg: &Resolved, out: &mut Outputs) -> Result<(), CliError> {
    let gamma_field = parse_field(cfg, "gamma")?;
    let f = parse_field(cfg, "f")?;
    let g = parse_field(cfg, "g")?;
    let mesh = Arc::new(build_geometry(cfg)?);
    let vk = build_dofmap(&mesh, SpaceDescriptor::lagrange(cfg.usize("k")))
        .map_err(UcError::from)?;
    let v1 = build_dofmap(&mesh, SpaceDescriptor::lagrange(1)).map_err(UcError::from)?;
    let gamma = CoefficientField::new(
        v1.clone(),
        lagrange_interpolate(&v1, &gamma_field).coeffs,
        1e-6,
    );
    let u = forward_dirichlet(&vk, &gamma, &f, &g).map_err(UcError::from)?;
    out.write("u.txt", &dump_nodal("u", &u))?;

    let mut summary = String::new();
    let _ = writeln!(
        summary,
        "geometry: {}, {} triangles, {} vertices, h = {}",
        cfg.text("geometry"),
        mesh.triangles.len(),
        mesh.vertices.len(),
        mesh_size(&mesh)
    );
    let _ = writeln!(summary, "solution dofs: {}", u.coeffs.len());
    println!(
        "solved forward problem on {} triangles, {} dofs",
        mesh.triangles.len(),
        u.coeffs.len()
    );
    if cfg.text("exact") != "none" {
        let exact = parse_field(cfg, "exact")?;
        let norms = error_norms(&u, &exact, None);
        let _ = writeln!(summary, "error vs {}: l2 = {}, h1_semi = {}", exact.name(), norms.l2, norms.h1_semi);
        println!("error vs {}: l2 = {:.6e}, h1_semi = {:.6e}", exact.name(), norms.l2, norms.h1_semi);
    }
    out.write("forward_summary.txt", &summary)?;
    Ok(())
}

const MESH_INFO_KEYS: &[KeySpec] = &[
    KeySpec {
        name: "geometry",
        kind: Kind::Text,
        default: "square",
        range: Range::Any,
        help: "mesh geometry: 'disc' (uses h_coarse) or 'square' (uses n)",
    },
    KeySpec {
        name: "h_coarse",
        kind: Kind::F64,
        default: "0.17",
        range: Range::UnitOpen,
        help: "target mesh size of the disc mesh",
    },
    KeySpec {
        name: "n",
        kind: Kind::Usize,
        default: "2",
        range: Range::AtLeastOne,
        help: "subdivisions per side of the square mesh",
    },
    KeySpec {
        name: "tag_regions",
        kind: Kind::Bool,
        default: "false",
        range: Range::Any,
        help: "tag the study regions (omega, omega-minus, B) and report their areas",
    },
    KeySpec {
        name: "dump_mesh",
        kind: Kind::Bool,
        default: "false",
        range: Range::Any,
        help: "also write the full mesh in the ascii interchange format",
    },
];

fn run_mesh_info(cfg: &Resolved, out: &mut Outputs) -> Result<(), CliError> {
    let mut mesh = build_geometry(cfg)?;
    if cfg.bool("tag_regions") {
        mesh = tag_triangles(mesh, RegionSpec::omega_disc());
        mesh = tag_triangles(mesh, RegionSpec::omega_minus());
        mesh = tag_triangles(mesh, RegionSpec::target_b());
    }
    let v = mesh.vertices.len();
    let e = mesh.edges.len();
    let t = mesh.triangles.len();
    let euler = v as i64 - e as i64 + t as i64;

    let mut info = String::new();
    let _ = writeln!(
        info,
        "{t} triangles, {v} vertices, {e} edges, {} boundary edges",
        mesh.boundary_edges.len()
    );
    let _ = writeln!(info, "mesh size h = {}", mesh_size(&mesh));
    // A triangulated disc or square has Euler characteristic V - E + T = 1.
    if euler == 1 {
        let _ = writeln!(info, "Euler check: pass");
    } else {
        let _ = writeln!(info, "Euler check: fail (V - E + T = {euler})");
    }
    let problems = mesh.validate();
    if problems.is_empty() {
        let _ = writeln!(info, "invariant check: pass");
    } else {
        let _ = writeln!(info, "invariant check: fail ({})", problems.join("; "));
    }
    if cfg.bool("tag_regions") {
        for (name, id) in
            [("omega", REGION_OMEGA), ("omega_minus", REGION_OMIN), ("B", REGION_B)]
        {
            let _ = writeln!(info, "area({name}) = {}", mesh.region_area(id));
        }
    }
    print!("{info}");
    out.write("mesh_info.txt", &info)?;
    if cfg.bool("dump_mesh") {
        out.write("mesh.txt", &write_ascii(&mesh))?;
    }
    if euler != 1 || !problems.is_empty() {
        return Err(CliError::Run("mesh invariants violated; see mesh_info.txt".into()));
    }
    Ok(())
}

const GRADIENT_CHECK_KEYS: &[KeySpec] = &[
    KeySpec {
        name: "k",
        kind: Kind::Usize,
        default: "1",
        range: Range::AtLeastOne,
        help: "state space order: V_k x RT_{k-1} x X_{k-1} (1 or 2)",
    },
    KeySpec {
        name: "l",
        kind: Kind::Usize,
        default: "1",
        range: Range::AtLeastOne,
        help: "coefficient space order: gamma_h in V_l, l <= k",
    },
    KeySpec {
        name: "h_coarse",
        kind: Kind::F64,
        default: "0.4",
        range: Range::UnitOpen,
        help: "target mesh size of the single probe mesh",
    },
    KeySpec {
        name: "alpha",
        kind: Kind::F64,
        default: "1000",
        range: Range::Positive,
        help: "data fidelity weight on the interior region omega",
    },
    KeySpec {
        name: "beta0",
        kind: Kind::F64,
        default: "1e-3",
        range: Range::NonNegative,
        help: "flux penalty base; the probe penalty is beta0 * h^(2k)",
    },
    KeySpec {
        name: "gamma",
        kind: Kind::Text,
        default: "one",
        range: Range::Any,
        help: "coefficient at which the gradient is probed",
    },
    KeySpec {
        name: "gamma_min",
        kind: Kind::F64,
        default: "0.1",
        range: Range::Positive,
        help: "nodal positivity clamp of the probed coefficient",
    },
    KeySpec {
        name: "target",
        kind: Kind::Text,
        default: "gaussian_bump",
        range: Range::Any,
        help: "target coefficient generating the manufactured data",
    },
    KeySpec {
        name: "datasets",
        kind: Kind::Text,
        default: "harmonic_pair:2:1,harmonic_pair:3:2",
        range: Range::Any,
        help: "comma-separated boundary fields; one forward dataset per entry",
    },
    KeySpec {
        name: "with_flux",
        kind: Kind::Bool,
        default: "false",
        range: Range::Any,
        help: "tag the boundary sector and attach conormal flux data",
    },
    KeySpec {
        name: "directions",
        kind: Kind::Usize,
        default: "3",
        range: Range::AtLeastOne,
        help: "number of random probe directions",
    },
    KeySpec {
        name: "seed",
        kind: Kind::Usize,
        default: "7",
        range: Range::NonNegative,
        help: "seed of the deterministic direction generator",
    },
];

fn run_gradient_check(cfg: &Resolved, out: &mut Outputs) -> Result<(), CliError> {
    let gamma_field = parse_field(cfg, "gamma")?;
    let target = parse_field(cfg, "target")?;
    let boundary = parse_dataset_fields(cfg, "datasets")?;
    let k = cfg.usize("k");
    let l = cfg.usize("l");
    let with_flux = cfg.bool("with_flux");

    let meshes = study_ladder(cfg.f64("h_coarse"), 1, with_flux)?;
    let mesh = &meshes[0];
    let datasets = manufacture_datasets(mesh, &boundary, target, with_flux)?;
    let spaces = MixedSpaces::build(mesh, k).map_err(UcError::from)?;
    let vl = build_dofmap(mesh, SpaceDescriptor::lagrange(l)).map_err(UcError::from)?;
    let gamma = CoefficientField::new(
        vl.clone(),
        lagrange_interpolate(&vl, &gamma_field).coeffs,
        cfg.f64("gamma_min"),
    );
    let h = mesh_size(mesh);
    let beta = beta_schedule(cfg.f64("beta0"), h, 0.0, k);
    let alpha = cfg.f64("alpha");

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.usize("seed") as u64);
    let mut csv = String::from("direction,analytic,best_fd,best_eps,rel_error\n");
    let mut worst: f64 = 0.0;
    for d in 0..cfg.usize("directions") {
        let coeffs: Vec<f64> = (0..vl.ndofs).map(|_| rng.random_range(-1.0..1.0)).collect();
        let direction = FeFunction::new(vl.clone(), coeffs);
        let check = fd_gradient_check(&spaces, &vl, &gamma, &datasets, alpha, beta, &direction)?;
        let _ = writeln!(
            csv,
            "{d},{},{},{},{}",
            check.analytic, check.best_fd, check.best_eps, check.rel_error
        );
        println!(
            "direction {d}: analytic = {:.8e}, fd = {:.8e} (eps = {:.0e}), rel error = {:.3e}",
            check.analytic, check.best_fd, check.best_eps, check.rel_error
        );
        worst = worst.max(check.rel_error);
    }
    out.write("fd_check.csv", &csv)?;
    println!("worst relative error over {} directions: {worst:.3e}", cfg.usize("directions"));
    Ok(())
}
