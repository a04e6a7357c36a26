//! Simulation and control toolkit for a flexible spacecraft: a rigid hub
//! with a flexible cantilever appendage, modeled by finite elements, driven
//! either by a data-driven predictive controller built from recorded
//! input/output trajectories or by an energy-based boundary-feedback
//! benchmark controller.
//!
//! Modules:
//! - [`beam`] — finite-element hub-beam plant with Generalized-α stepping.
//! - [`trajectory`] — I/O records, Hankel matrices, excitation checks, and
//!   SVD dimension reduction.
//! - [`deepc`] — the data-driven predictive controller and its
//!   receding-horizon loop.
//! - [`lyapunov`] — the boundary-feedback benchmark law, its parameter
//!   feasibility system, and the parameter constructor.
//! - [`scenario`] — data collection, experiment scenarios, metrics, and
//!   CSV export.
//! - [`config`] — flat key = value run configuration.

pub mod beam;
pub mod config;
pub mod deepc;
pub mod error;
pub mod lyapunov;
pub mod scenario;
#[doc(hidden)]
pub mod testing;
pub mod trajectory;

pub use beam::{
    assemble, boundary_curvature, element_matrices, modal_frequencies, step, tip_output,
    total_energy, AssembledSystem, BeamModel, GeneralizedAlpha, IntegratorConfig, PlantState,
    SpacecraftPlant,
};
pub use config::RunConfig;
pub use deepc::{
    diagnostics_csv, run_closed_loop, solve, stage_cost, ControllerState, DeePCConfig, DeePCData,
    DeePCSolution, DeePCSolver, Plant, StepDiagnostic,
};
pub use error::{Error, Result};
pub use lyapunov::{
    check_constraints, construct_params, control_torque, BoundarySignals, ConstraintReport,
    LyapunovParams,
};
pub use scenario::{
    collect_data, compare, export_result, result_csv, run_scenario, settling_time, summary_csv,
    CollectSpec, ControllerKind, PdGains, ScenarioKind, ScenarioResult, ScenarioSpec,
    SettlingBand, SummaryRow,
};
pub use trajectory::{
    build_hankel, choose_rank, is_persistently_exciting, persistency_report, split_past_future,
    svd_reduce, HankelSystem, PeFailure, PeReport, RankRule, ReducedHankel, Trajectory,
};
