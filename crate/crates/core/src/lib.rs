//! Rotational periodic orbits of the forced planar N-pendulum.
//!
//! The crate discretizes loops with prescribed winding as a torus mean plus
//! a truncated Fourier series, minimizes the action functional over that
//! space from a structured multistart plan, certifies every candidate by
//! independent integration of the equations of motion, and evaluates all
//! the closed-form constants (kinetic floor, level ladder, feasible period
//! window, subtorus certificates) that the multiplicity lower bounds rest
//! on, so a census of found solutions can be checked against those bounds
//! at desk scale.

pub mod action;
pub mod bounds;
pub mod config;
pub mod error;
pub mod loopspace;
pub mod model;
pub mod report;
pub mod solver;
pub mod torus;
pub mod verify;

pub use action::{ActionBreakdown, ActionModel, MorseData};
pub use bounds::{
    a_lower_bound, constants_report, estimate_oracles, f_moment, gamma1, gamma2, gamma_gap,
    gamma_set, lambda_min, levels, parameter_search, period_window, ConstantsReport, GammaSet,
    LambdaEstimate, Levels, PeriodWindow, SearchOutcome,
};
pub use config::{ConfigFile, Problem};
pub use error::{Error, Result};
pub use loopspace::{distance_mod_symmetries, validate_winding, LoopNorms, LoopPath, WindingVector};
pub use model::{derive_coefficients, euler_lagrange_residual, Forcing, Harmonic, PendulumParams};
pub use solver::{
    census, dedupe, minimize, seed_plan, CensusReport, CountingMode, MinimizeOutcome,
    MinimizeResult, Seed, SolutionRecord, SolverOptions,
};
pub use torus::{potential_bounds_certificate, tau, z_point, CertificateReport, ConstraintSet};
pub use verify::{certify, energy, integrate, Certification, Trajectory};
