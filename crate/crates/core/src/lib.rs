//! Pseudo-spectral phase-field / membrane-height model on a sphere.
//!
//! A two-phase membrane on the sphere of radius `R` is described by a
//! composition `φ` and a normal height `u`. This crate provides the spectral
//! machinery ([`sphere`]), the projection and Green operators
//! ([`operators`]), the diffuse and sharp-interface energies ([`energy`]),
//! the conserved Allen–Cahn flow ([`flow`]) and an axisymmetric
//! sharp-interface model for cross-checks ([`axisym`]).

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod axisym;
pub mod energy;
pub mod error;
pub mod flow;
pub mod legendre;
pub mod operators;
pub mod sphere;

pub use axisym::{
    cap_alpha, cap_perimeter, chi_legendre, fit_tanh_profile, geodesic_curvature, interface_colatitudes,
    interface_forces, interface_velocities, jump_extract, sharp_energy_series, two_cap_flow, AxisymField, Cap, CapSet,
    JumpOptions, Jumps, Pole, ProfileFit, SeriesEnergy, TwoCapOptions, TwoCapSample, TwoCapStatus, TwoCapTrajectory,
};
pub use energy::{
    energy_diffuse, energy_em, energy_j, energy_k, energy_k_indicator, energy_k_reformulated, energy_reduced,
    energy_reduced_expanded, energy_sharp, energy_sharp_reduced, gamma_limit_value, EnergyReport,
};
pub use error::{Error, Result};
pub use flow::{
    el_residuals, flow_rhs, perturb, run_flow, run_flow_observed, state_from_phi, step_imex, tanh_caps, DiagnosticsRow,
    FlowDiagnostics, FlowOutcome, FlowParams, FlowState, FlowStatus, StepOutcome,
};
pub use operators::{green, green_of_projection, height_residual, project_s, reformulation_residual, ModelParams, C_W};
pub use sphere::{
    analyze, build_grid, gradient_sq_integral, integrate, laplace_beltrami, synthesize, GridField, GridSpec,
    SpectralField, SphereGrid,
};
