//! Conserved Allen–Cahn gradient flow of the reduced diffuse energy.
//!
//! The height `u = G(Pφ)` is slaved to `φ`. Each step is first-order IMEX in
//! spectral space: `bεΔφ` and `κΛ²φ` implicit, `W'(φ)` and the height
//! coupling explicit, with a linear stabilization `S(φⁿ⁺¹ − φⁿ)` that leaves
//! fixed points unchanged. The `l = 0` coefficient is pinned, so the mean of
//! `φ` never moves, and the multiplier `λ` is recovered afterwards.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::axisym::{CapSet, Pole};
use crate::energy::{double_well_deriv, energy_k, potential_integral};
use crate::error::{Error, Result};
use crate::operators::{green_of_projection, height_residual, shifted_laplacian, ModelParams};
use crate::sphere::{laplace_beltrami, GridField, SpectralField, SphereGrid};

/// Pointwise bound on `|φ|` beyond which a run is declared divergent.
pub const DIVERGENCE_BOUND: f64 = 10.0;

/// Time-stepping controls.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FlowParams {
    pub dt: f64,
    pub t_end: f64,
    pub dt_min: f64,
    pub dt_max: f64,
    /// Largest accepted per-step increase of the reduced energy.
    pub energy_tol: f64,
    /// Observer cadence in accepted steps; 0 disables snapshots.
    pub snapshot_every: usize,
    /// Stop once `‖rhs‖_∞` falls below this value.
    pub stop_tol: f64,
    pub max_steps: usize,
    /// Stabilization constant `S`; `None` uses `b/ε`.
    pub stabilization: Option<f64>,
}

impl Default for FlowParams {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            t_end: 100.0,
            dt_min: 1e-12,
            dt_max: 1.0,
            energy_tol: 0.0,
            snapshot_every: 0,
            stop_tol: 1e-7,
            max_steps: 1_000_000,
            stabilization: None,
        }
    }
}

impl FlowParams {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidFlowParams(msg));
        if !(self.dt_min > 0.0 && self.dt_min <= self.dt && self.dt <= self.dt_max) {
            return bad(format!(
                "need 0 < dt_min <= dt <= dt_max, got {} / {} / {}",
                self.dt_min, self.dt, self.dt_max
            ));
        }
        if !(self.t_end >= 0.0) || !(self.energy_tol >= 0.0) || !(self.stop_tol >= 0.0) {
            return bad("t_end, energy_tol and stop_tol must be non-negative".into());
        }
        if let Some(s) = self.stabilization {
            if !(s >= 0.0) || !s.is_finite() {
                return bad(format!("stabilization = {s} must be non-negative"));
            }
        }
        Ok(())
    }

    pub fn stabilization_for(&self, params: &ModelParams) -> f64 {
        self.stabilization.unwrap_or(params.line_tension / params.epsilon)
    }
}

/// One point of a trajectory.
#[derive(Debug, Clone)]
pub struct FlowState {
    pub phi: SpectralField,
    /// Always `G(Pφ)`.
    pub u: SpectralField,
    pub lambda: f64,
    pub t: f64,
    pub step_count: u64,
}

/// Right-hand side of the flow at a state.
#[derive(Debug, Clone)]
pub struct RhsEval {
    pub rhs: SpectralField,
    pub lambda: f64,
    pub u: SpectralField,
}

/// One diagnostics row, logged after every accepted step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsRow {
    pub t: f64,
    pub energy: f64,
    pub j_eps: f64,
    pub k: f64,
    pub mass: f64,
    pub lambda: f64,
    pub max_abs: f64,
    pub rhs_norm: f64,
    /// Step size that produced this row (0 for the initial row).
    pub dt: f64,
    /// Accurately evaluated energy change of the step (0 for the initial row).
    pub energy_change: f64,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct FlowDiagnostics {
    pub rows: Vec<DiagnosticsRow>,
    pub rejected_steps: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FlowStatus {
    Converged,
    ReachedEnd,
    MaxSteps,
    StepUnderflow,
    Diverged,
}

impl FlowStatus {
    pub fn is_failure(self) -> bool {
        matches!(self, FlowStatus::StepUnderflow | FlowStatus::Diverged)
    }
}

#[derive(Debug, Clone)]
pub struct FlowOutcome {
    pub state: FlowState,
    pub diagnostics: FlowDiagnostics,
    pub status: FlowStatus,
    pub residuals: (f64, f64),
}

/// Everything a step needs to know about a state, computed once.
#[derive(Clone)]
struct Evaluated {
    state: FlowState,
    grid_phi: GridField,
    /// Spectral `W'(φ)`.
    well: SpectralField,
    rhs_norm: f64,
}

fn check_mass(phi: &SpectralField, params: &ModelParams) -> Result<()> {
    let mean = phi.mean();
    if (mean - params.alpha).abs() > 1e-12 * params.alpha.abs().max(1.0) {
        return Err(Error::ConstraintViolation { mean, alpha: params.alpha });
    }
    Ok(())
}

fn rhs_from_parts(
    phi: &SpectralField,
    well: &SpectralField,
    u: &SpectralField,
    params: &ModelParams,
) -> (SpectralField, f64) {
    let ModelParams { kappa, coupling, line_tension: b, epsilon: eps, beta, .. } = *params;
    let kl = kappa * coupling;
    let mut bracket = laplace_beltrami(phi)
        .scale(b * eps)
        .axpy(-b / eps, well)
        .and_then(|x| x.axpy(-kl, &shifted_laplacian(u)))
        .and_then(|x| x.axpy(-kl * coupling, phi))
        .expect("fields share a grid");
    let lambda = -bracket.mean();
    bracket.coeffs_mut()[0] = 0.0;
    (bracket.scale(1.0 / (beta * eps)), lambda)
}

/// `rhs = [bεΔφ − (b/ε)W'(φ) − κΛ(Δ + 2/R²)u − κΛ²φ + λ]/(βε)` with `u = G(Pφ)`
/// and `λ` the spatial mean that makes `∫ rhs = 0`.
pub fn flow_rhs(phi: &SpectralField, params: &ModelParams) -> Result<RhsEval> {
    check_mass(phi, params)?;
    let u = green_of_projection(phi, params);
    let well = phi.synthesize().map(double_well_deriv).analyze()?;
    let (rhs, lambda) = rhs_from_parts(phi, &well, &u, params);
    Ok(RhsEval { rhs, lambda, u })
}

fn evaluate(phi: SpectralField, t: f64, step_count: u64, params: &ModelParams) -> Result<Evaluated> {
    let grid_phi = phi.synthesize();
    let well = grid_phi.map(double_well_deriv).analyze()?;
    let u = green_of_projection(&phi, params);
    let (rhs, lambda) = rhs_from_parts(&phi, &well, &u, params);
    let rhs_norm = rhs.synthesize().max_abs();
    Ok(Evaluated { state: FlowState { phi, u, lambda, t, step_count }, grid_phi, well, rhs_norm })
}

/// Per-mode weight `q_l` with `Ẽ = Σ q_l φ̂² + (b/ε)∫W(φ)`.
fn quadratic_weight(l: usize, params: &ModelParams) -> f64 {
    let ModelParams { kappa, sigma, coupling, line_tension: b, epsilon: eps, radius, .. } = *params;
    let r2 = radius * radius;
    let lam = (l * (l + 1)) as f64;
    let nonlocal =
        if l >= 2 { 0.5 * kappa * coupling * (2.0 - lam) * kappa * coupling / (sigma + kappa * lam / r2) } else { 0.0 };
    0.5 * b * eps * lam + nonlocal + 0.5 * kappa * coupling * coupling * r2
}

/// `Ẽ(new) − Ẽ(old)` evaluated from differences, with a bound on its
/// floating-point error.
fn energy_change(old: &Evaluated, new: &Evaluated, params: &ModelParams) -> (f64, f64) {
    let degrees = old.state.phi.grid().degrees();
    let mut change = 0.0;
    let mut magnitude = 0.0;
    for ((a, b), &l) in new.state.phi.coeffs().iter().zip(old.state.phi.coeffs()).zip(degrees) {
        let term = quadratic_weight(l, params) * (a - b) * (a + b);
        change += term;
        magnitude += term.abs();
    }
    // increment synthesized directly so that small steps are not lost to rounding
    let delta = (&new.state.phi - &old.state.phi).synthesize();
    let dw = delta
        .zip_map(&old.grid_phi, |d, b| 0.25 * d * (2.0 * b + d) * ((b + d) * (b + d) + b * b - 2.0))
        .expect("same grid");
    let dw_abs = dw.map(f64::abs).integrate();
    let scale = params.line_tension / params.epsilon;
    change += scale * dw.integrate();
    magnitude += scale * dw_abs;
    (change, 16.0 * f64::EPSILON * magnitude)
}

/// Semi-implicit update of `φ` by `dt` without any acceptance test.
pub fn imex_update(phi: &SpectralField, params: &ModelParams, dt: f64, stabilization: f64) -> Result<SpectralField> {
    check_mass(phi, params)?;
    let well = phi.synthesize().map(double_well_deriv).analyze()?;
    let u = green_of_projection(phi, params);
    Ok(imex_from_parts(phi, &well, &u, params, dt, stabilization))
}

fn imex_from_parts(
    phi: &SpectralField,
    well: &SpectralField,
    u: &SpectralField,
    params: &ModelParams,
    dt: f64,
    stabilization: f64,
) -> SpectralField {
    let ModelParams { kappa, coupling, line_tension: b, epsilon: eps, beta, radius, alpha, .. } = *params;
    let r2 = radius * radius;
    let kl = kappa * coupling;
    let shifted = shifted_laplacian(u);
    let inertia = beta * eps / dt + stabilization;
    let degrees = phi.grid().degrees();
    let coeffs: Vec<f64> = phi
        .coeffs()
        .iter()
        .zip(well.coeffs())
        .zip(shifted.coeffs())
        .zip(degrees)
        .map(|(((&p, &w), &s), &l)| {
            let lam = (l * (l + 1)) as f64;
            let explicit = -(b / eps) * w - kl * s;
            (inertia * p + explicit) / (inertia + b * eps * lam / r2 + kl * coupling)
        })
        .collect();
    let mut next = SpectralField::from_coeffs(phi.grid(), coeffs).expect("same layout");
    next.coeffs_mut()[0] = alpha * (4.0 * PI).sqrt();
    next
}

/// Result of one accepted step.
#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub state: FlowState,
    pub dt_used: f64,
    pub energy_change: f64,
    pub rejected: u64,
}

/// One energy-checked IMEX step from `state`, trying `dt` first and halving
/// on rejection.
pub fn step_imex(state: &FlowState, params: &ModelParams, flow: &FlowParams, dt: f64) -> Result<StepOutcome> {
    let old = evaluate(state.phi.clone(), state.t, state.step_count, params)?;
    let (new, dt_used, change, rejected) = step_evaluated(&old, params, flow, dt)?;
    Ok(StepOutcome { state: new.state, dt_used, energy_change: change, rejected })
}

fn step_evaluated(
    old: &Evaluated,
    params: &ModelParams,
    flow: &FlowParams,
    mut dt: f64,
) -> Result<(Evaluated, f64, f64, u64)> {
    let stab = flow.stabilization_for(params);
    let mut rejected = 0;
    loop {
        if dt < flow.dt_min {
            return Err(Error::StepUnderflow { t: old.state.t, dt_min: flow.dt_min });
        }
        let phi = imex_from_parts(&old.state.phi, &old.well, &old.state.u, params, dt, stab);
        let new = evaluate(phi, old.state.t + dt, old.state.step_count + 1, params)?;
        let max_abs = new.grid_phi.max_abs();
        if !(max_abs <= DIVERGENCE_BOUND) {
            return Err(Error::Divergence { t: new.state.t, max_abs });
        }
        let (change, rounding) = energy_change(old, &new, params);
        if change <= flow.energy_tol + rounding {
            return Ok((new, dt, change, rejected));
        }
        rejected += 1;
        dt *= 0.5;
    }
}

/// EL residuals `(r1, r2)`: `r1 = βε‖rhs‖_∞`, the band-limited max-norm of
/// `(b/ε)(W' − ⨍W') − bεΔφ + κΛ(Δ + 2/R²)u + κΛ²(φ − α)`, and
/// `r2 = ‖(Δ + 2/R²)(κΔu − σu + κΛ(φ − α))‖_∞`.
pub fn el_residuals(state: &FlowState, params: &ModelParams) -> Result<(f64, f64)> {
    let well = state.phi.synthesize().map(double_well_deriv).analyze()?;
    let (rhs, _) = rhs_from_parts(&state.phi, &well, &state.u, params);
    let r1 = params.beta * params.epsilon * rhs.synthesize().max_abs();
    let r2 = height_residual(&state.u, &state.phi, params)?;
    Ok((r1, r2))
}

fn row(ev: &Evaluated, params: &ModelParams, dt: f64, energy_change: f64) -> DiagnosticsRow {
    let phi = &ev.state.phi;
    let b = params.line_tension;
    let eps = params.epsilon;
    let j_eps = 0.5 * b * eps * crate::sphere::gradient_sq_integral(phi) + b / eps * potential_integral(&ev.grid_phi);
    let k = energy_k(phi, params);
    DiagnosticsRow {
        t: ev.state.t,
        energy: j_eps + k,
        j_eps,
        k,
        mass: phi.mean(),
        lambda: ev.state.lambda,
        max_abs: ev.grid_phi.max_abs(),
        rhs_norm: ev.rhs_norm,
        dt,
        energy_change,
    }
}

/// Brings `φ₀` to mean `α` if it is within `1e-6`.
pub fn pin_mean(phi: &SpectralField, params: &ModelParams) -> Result<SpectralField> {
    let mean = phi.mean();
    if (mean - params.alpha).abs() > 1e-6 {
        return Err(Error::ConstraintViolation { mean, alpha: params.alpha });
    }
    let mut out = phi.clone();
    out.coeffs_mut()[0] = params.alpha * (4.0 * PI).sqrt();
    Ok(out)
}

/// Integrates the flow from `phi0`.
pub fn run_flow(phi0: &SpectralField, params: &ModelParams, flow: &FlowParams) -> Result<FlowOutcome> {
    run_flow_observed(phi0, params, flow, 0.0, 0, |_| {})
}

/// Integrates the flow from `phi0` at time `t0`, calling `observer` every
/// `snapshot_every` accepted steps.
pub fn run_flow_observed(
    phi0: &SpectralField,
    params: &ModelParams,
    flow: &FlowParams,
    t0: f64,
    step0: u64,
    mut observer: impl FnMut(&FlowState),
) -> Result<FlowOutcome> {
    params.validate_allow_uncoupled()?;
    flow.validate()?;
    let phi = pin_mean(phi0, params)?;
    let mut current = evaluate(phi, t0, step0, params)?;
    let mut diagnostics = FlowDiagnostics::default();
    diagnostics.rows.push(row(&current, params, 0.0, 0.0));
    let mut dt = flow.dt;
    let mut steps = 0usize;
    let status = loop {
        if current.rhs_norm < flow.stop_tol {
            break FlowStatus::Converged;
        }
        let remaining = t0 + flow.t_end - current.state.t;
        if remaining <= 1e-14 * (1.0 + current.state.t.abs()) {
            break FlowStatus::ReachedEnd;
        }
        if steps >= flow.max_steps {
            break FlowStatus::MaxSteps;
        }
        let trial = dt.min(remaining);
        match step_evaluated(&current, params, flow, trial) {
            Ok((next, used, change, rejected)) => {
                diagnostics.rejected_steps += rejected;
                current = next;
                steps += 1;
                diagnostics.rows.push(row(&current, params, used, change));
                if rejected == 0 {
                    dt = (dt * 1.2).min(flow.dt_max);
                } else {
                    dt = used;
                }
                if flow.snapshot_every > 0 && steps.is_multiple_of(flow.snapshot_every) {
                    observer(&current.state);
                }
            }
            Err(Error::StepUnderflow { .. }) => break FlowStatus::StepUnderflow,
            Err(Error::Divergence { .. }) => break FlowStatus::Diverged,
            Err(e) => return Err(e),
        }
    };
    let residuals = el_residuals(&current.state, params)?;
    Ok(FlowOutcome { state: current.state, diagnostics, status, residuals })
}

/// State for `φ` with its slaved height and multiplier.
pub fn state_from_phi(phi: SpectralField, params: &ModelParams, t: f64, step_count: u64) -> Result<FlowState> {
    Ok(evaluate(phi, t, step_count, params)?.state)
}

/// Signed geodesic distance to the nearest cap boundary, positive inside.
fn cap_distance(caps: &CapSet, radius: f64, theta: f64) -> f64 {
    caps.caps()
        .iter()
        .map(|c| {
            let from_pole = match c.pole {
                Pole::North => theta,
                Pole::South => PI - theta,
            };
            radius * (c.theta0 - from_pole)
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// `tanh(d/(√2 ε))` around the given caps, shifted to mean `α`.
pub fn tanh_caps(grid: &Arc<SphereGrid>, caps: &CapSet, params: &ModelParams) -> Result<SpectralField> {
    let width = std::f64::consts::SQRT_2 * params.epsilon;
    let g = GridField::from_fn(grid, |t, _| (cap_distance(caps, params.radius, t) / width).tanh());
    let mut phi = g.analyze()?;
    phi.coeffs_mut()[0] = params.alpha * (4.0 * PI).sqrt();
    Ok(phi)
}

/// Adds a random perturbation of degrees `1..=max_degree` whose grid
/// max-norm equals `amplitude`. The mean is unchanged.
pub fn perturb(base: &SpectralField, amplitude: f64, seed: u64, max_degree: usize) -> SpectralField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut noise = SpectralField::zeros(base.grid());
    let degrees = base.grid().degrees().to_vec();
    for (c, l) in noise.coeffs_mut().iter_mut().zip(degrees) {
        let draw: f64 = rng.random_range(-1.0..1.0);
        if (1..=max_degree).contains(&l) {
            *c = draw;
        }
    }
    let size = noise.synthesize().max_abs();
    if size == 0.0 || amplitude == 0.0 {
        return base.clone();
    }
    base.axpy(amplitude / size, &noise).expect("same grid")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::axisym::Cap;
    use crate::energy::energy_reduced;
    use crate::sphere::{build_grid, GridSpec};

    fn params() -> ModelParams {
        ModelParams { epsilon: 0.2, alpha: 0.1, sigma: 0.3, ..Default::default() }
    }

    fn band(grid: &Arc<SphereGrid>, p: &ModelParams) -> SpectralField {
        let caps = CapSet::two(1.2, 1.4).unwrap();
        tanh_caps(grid, &caps, p).unwrap()
    }

    #[test]
    fn flow_params_validation() {
        assert!(FlowParams::default().validate().is_ok());
        let bad = FlowParams { dt: 2.0, dt_max: 1.0, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = FlowParams { dt_min: 0.0, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn constant_state_is_stationary() {
        let p = params();
        let g = build_grid(1.0, 12, 2.0).unwrap();
        let phi = SpectralField::constant(&g, p.alpha);
        let r = flow_rhs(&phi, &p).unwrap();
        assert!(r.rhs.max_abs_coeff() < 1e-13);
        let expected = p.line_tension / p.epsilon * double_well_deriv(p.alpha) + p.kappa * p.coupling.powi(2) * p.alpha;
        assert!((r.lambda - expected).abs() < 1e-14);
        for dt in [1e-3, 1.0, 1e3] {
            let next = imex_update(&phi, &p, dt, 1.0).unwrap();
            assert!((&next - &phi).max_abs_coeff() < 1e-15);
        }
        let out = run_flow(&phi, &p, &FlowParams::default()).unwrap();
        assert_eq!(out.status, FlowStatus::Converged);
        assert_eq!(out.diagnostics.rows.len(), 1);
        let (r1, r2) = el_residuals(&out.state, &p).unwrap();
        assert!(r1 < 1e-13 && r2 < 1e-13);
    }

    #[test]
    fn rhs_requires_mass_constraint() {
        let p = params();
        let g = build_grid(1.0, 8, 2.0).unwrap();
        let phi = SpectralField::constant(&g, p.alpha + 0.01);
        assert!(matches!(flow_rhs(&phi, &p), Err(Error::ConstraintViolation { .. })));
        assert!(run_flow(&phi, &p, &FlowParams::default()).is_err());
    }

    #[test]
    fn step_pins_mass_and_keeps_height_in_s() {
        let p = params();
        let g = build_grid(1.0, 24, 2.0).unwrap();
        let phi = perturb(&band(&g, &p), 0.2, 4, 6);
        let state = state_from_phi(phi, &p, 0.0, 0).unwrap();
        let out = step_imex(&state, &p, &FlowParams::default(), 0.05).unwrap();
        assert!((out.state.phi.mean() - p.alpha).abs() < 1e-14);
        assert_eq!(out.state.u.max_abs_coeff_up_to(1), 0.0);
        assert!(out.energy_change <= 0.0);
        let (_, r2) = el_residuals(&out.state, &p).unwrap();
        assert!(r2 < 1e-9);
    }

    #[test]
    fn step_is_first_order_consistent() {
        let p = params();
        let g = build_grid(1.0, 16, 2.0).unwrap();
        let phi = perturb(&band(&g, &p), 0.3, 9, 5);
        let rhs = flow_rhs(&phi, &p).unwrap().rhs;
        let errs: Vec<f64> = [1e-5, 5e-6, 2.5e-6]
            .iter()
            .map(|&dt| {
                let next = imex_update(&phi, &p, dt, 5.0).unwrap();
                (&(&next - &phi).scale(1.0 / dt) - &rhs).max_abs_coeff()
            })
            .collect();
        for w in errs.windows(2) {
            let order = (w[0] / w[1]).log2();
            assert!((order - 1.0).abs() < 0.1, "{errs:?}");
        }
    }

    #[test]
    fn rhs_preserves_antipodal_symmetry() {
        let p = ModelParams { alpha: -(1.2f64.cos()), ..params() };
        let g = build_grid(1.0, 20, 2.0).unwrap();
        // equal caps give a field even under x -> -x
        let caps = CapSet::two(1.2, 1.2).unwrap();
        let phi = tanh_caps(&g, &caps, &p).unwrap();
        let rhs = flow_rhs(&phi, &p).unwrap().rhs;
        let odd = rhs.map_degree(|l| (l % 2) as f64);
        assert!(odd.max_abs_coeff() < 1e-13 * rhs.max_abs_coeff());
    }

    #[test]
    fn step_commutes_with_polar_rotation() {
        let p = params();
        let g = build_grid(1.0, 16, 2.0).unwrap();
        let phi = perturb(&band(&g, &p), 0.3, 2, 5);
        let angle = g.longitude(3);
        let a = imex_update(&phi.rotate_z(angle), &p, 0.01, 5.0).unwrap();
        let b = imex_update(&phi, &p, 0.01, 5.0).unwrap().rotate_z(angle);
        assert!((&a - &b).synthesize().max_abs() < 1e-10);
    }

    #[test]
    fn relaxation_is_monotone_and_conservative() {
        let p = params();
        let g = build_grid(1.0, 32, 2.0).unwrap();
        let phi = perturb(&band(&g, &p), 0.1, 1, 8);
        let flow = FlowParams { dt: 1e-2, dt_max: 0.5, t_end: 1e4, stop_tol: 1e-6, ..Default::default() };
        let out = run_flow(&phi, &p, &flow).unwrap();
        assert_eq!(out.status, FlowStatus::Converged);
        for w in out.diagnostics.rows.windows(2) {
            assert!(w[1].t > w[0].t);
            assert!(w[1].energy_change <= 0.0);
            assert!((w[1].mass - p.alpha).abs() < 1e-13);
        }
        let (r1, r2) = out.residuals;
        assert!(r1 <= p.beta * p.epsilon * 1e-6 * 1.0000001);
        assert!(r2 < 1e-9);
        let last = out.diagnostics.rows.last().unwrap();
        assert!((last.energy - energy_reduced(&out.state.phi, &p)).abs() < 1e-10 * last.energy.abs());
        let expected = p.line_tension / p.epsilon * out.state.phi.synthesize().map(double_well_deriv).integrate()
            / (4.0 * PI)
            + p.kappa * p.coupling.powi(2) * p.alpha;
        assert!((out.state.lambda - expected).abs() < 1e-6);
    }

    #[test]
    fn tanh_caps_profile() {
        let p = ModelParams { alpha: 0.0, epsilon: 0.1, ..Default::default() };
        let g = GridSpec::zonal(1.0, 128, 2.0).build().unwrap();
        let phi = tanh_caps(&g, &CapSet::single(Cap::north(PI / 2.0)).unwrap(), &p).unwrap();
        assert!(phi.mean().abs() < 1e-15);
        let (v, _) = phi.eval_zonal(PI / 2.0 - 0.05);
        let exact = (0.05 / (std::f64::consts::SQRT_2 * 0.1)).tanh();
        assert!((v - exact).abs() < 1e-8);
    }

    #[test]
    fn perturbation_is_band_limited_and_reproducible() {
        let g = build_grid(1.0, 16, 2.0).unwrap();
        let base = SpectralField::constant(&g, 0.2);
        let a = perturb(&base, 0.05, 7, 4);
        let b = perturb(&base, 0.05, 7, 4);
        assert_eq!(a.coeffs(), b.coeffs());
        assert!(((&a - &base).synthesize().max_abs() - 0.05).abs() < 1e-14);
        assert_eq!(a.mean(), base.mean());
        assert_eq!((&a - &base).map_degree(|l| (l > 4) as u8 as f64).max_abs_coeff(), 0.0);
    }
}
