//! Discrete breathers of the focusing DNLS lattice, built by Newton
//! continuation from the continuum NLS ground state with P1 finite elements
//! as the bridge between lattice sequences and continuum functions.

pub mod error;
mod grid;
pub mod continuum;
pub mod fem;
pub mod lattice;
mod krylov;
mod ode;
pub mod dynamics;
pub mod solver;
mod spectral;

pub use error::{BreatherError, Result};
pub use lattice::{
    dirichlet_form, discrete_laplacian, grad_hamiltonian_d, grad_norm_d, hamiltonian_d, norm_d,
    qmu_norm, symmetrize, symmetry_defect, validate_exponent, Dim, LatticeField, ModeLabel,
    ModeSpec,
};
pub use continuum::{
    continuum_functionals, explicit_ground_state_1d, rescale_to_unit_mass,
    shoot_radial_ground_state, unit_mass_ground_state, ContinuumProfile,
};
pub use fem::{project, project_profile, FemFunction, IdentityReport};
pub use solver::{
    auto_radius, coercivity_check, convergence_study, convergence_study_with, fit_slope,
    hessian_lowest_eigenvalue, initial_guess, rescale_to_mu_free, solve_breather,
    solve_breather_with, solve_from_profile, stationarity_residual, sup_bound_check,
    BreatherResult, BreatherSummary, ConvergenceReport, ConvergenceRow, SolverOptions,
};
pub use dynamics::{
    breather_period_check, breather_period_check_with, conserved_drift, evolve,
    ComplexLatticeState, PeriodSummary, Propagator, Splitting,
};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
