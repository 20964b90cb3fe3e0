//! Primal-dual mixed finite elements for unique continuation from interior
//! data, and steepest-descent reconstruction of a diffusion coefficient from
//! partial measurements.
//!
//! The library is organized bottom-up:
//!
//! * [`mesh`] — conforming triangulations of the unit square and unit disc,
//!   uniform red refinement, region tagging, ASCII serialization.
//! * [`fem`] — reference bases (continuous Lagrange, Raviart-Thomas, DG),
//!   quadrature, dof maps, assembly of the saddle-point forms, interpolation
//!   and projection operators, error and stability norms.
//! * [`sparse`] — minimal CSR storage shared by assembly and the solvers.
//! * [`solver`] — direct factorization of the symmetric indefinite saddle
//!   systems with residual certification, and the well-posed forward
//!   Dirichlet solver used to manufacture data.
//! * [`analytic`] — the closed-form field catalogue (harmonic modes,
//!   polynomials, Gaussian bumps) used for data, references and tests.
//! * [`continuation`] — the unique-continuation driver: β-scheduling,
//!   perturbation injection, convergence studies and rate fitting.
//! * [`reconstruction`] — the regularized-Lagrangian descent loop recovering
//!   the diffusion coefficient γ from several datasets.
//! * [`par`] — the runtime switch between the serial and the data-parallel
//!   element loops (identical results either way, bit for bit).

pub mod analytic;
pub mod continuation;
pub mod fem;
pub mod mesh;
pub mod par;
pub mod reconstruction;
pub mod solver;
pub mod sparse;
