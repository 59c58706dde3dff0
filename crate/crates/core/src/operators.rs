//! Model parameters, the projection onto `S = span{1, ν₁, ν₂, ν₃}⊥` and the
//! Green operator of `(σ − κΔ)`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sphere::{laplace_beltrami, SpectralField};

/// `∫_{-1}^{1} √(2W(s)) ds` for `W(s) = (s² − 1)²/4`.
pub const C_W: f64 = 2.0 * std::f64::consts::SQRT_2 / 3.0;

/// Relative size of `l <= 1` content tolerated by [`green`].
pub const IN_S_TOL: f64 = 1e-12;

/// Physical constants of the coupled model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ModelParams {
    /// Bending rigidity κ.
    pub kappa: f64,
    /// Surface tension σ.
    pub sigma: f64,
    /// Curvature coupling Λ (spontaneous curvature `Λφ`).
    pub coupling: f64,
    /// Line-energy scale b.
    pub line_tension: f64,
    /// Interface width ε.
    pub epsilon: f64,
    /// Kinetic coefficient β.
    pub beta: f64,
    /// Prescribed mean composition α.
    pub alpha: f64,
    /// Sphere radius R.
    pub radius: f64,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            kappa: 1.0,
            sigma: 0.0,
            coupling: 1.0,
            line_tension: 1.0,
            epsilon: 0.1,
            beta: 1.0,
            alpha: 0.0,
            radius: 1.0,
        }
    }
}

impl ModelParams {
    pub fn validate(&self) -> Result<()> {
        let checks: [(&str, f64, bool); 8] = [
            ("kappa", self.kappa, self.kappa > 0.0),
            ("sigma", self.sigma, self.sigma >= 0.0),
            ("coupling", self.coupling, self.coupling > 0.0),
            ("line_tension", self.line_tension, self.line_tension > 0.0),
            ("epsilon", self.epsilon, self.epsilon > 0.0),
            ("beta", self.beta, self.beta > 0.0),
            ("alpha", self.alpha, self.alpha.abs() < 1.0),
            ("radius", self.radius, self.radius > 0.0),
        ];
        for (name, value, ok) in checks {
            if !ok || !value.is_finite() {
                return Err(Error::InvalidParams(format!("{name} = {value} out of range")));
            }
        }
        Ok(())
    }

    /// Like [`validate`](Self::validate) but admits `coupling = 0`, the
    /// uncoupled limit used in convergence studies.
    pub fn validate_allow_uncoupled(&self) -> Result<()> {
        let mut probe = *self;
        if probe.coupling == 0.0 {
            probe.coupling = 1.0;
        }
        probe.validate()
    }

    /// `b̂ = c_W b`, the sharp-interface line tension.
    pub fn line_tension_sharp(&self) -> f64 {
        C_W * self.line_tension
    }

    /// `β̂ = c_W β`, the sharp-interface kinetic coefficient.
    pub fn beta_sharp(&self) -> f64 {
        C_W * self.beta
    }
}

/// Orthogonal projection onto S: zeroes every `l <= 1` coefficient.
pub fn project_s(a: &SpectralField) -> SpectralField {
    a.map_degree(|l| if l <= 1 { 0.0 } else { 1.0 })
}

/// The complementary `l <= 1` part, `a − P a`.
pub fn low_mode_part(a: &SpectralField) -> SpectralField {
    a.map_degree(|l| if l <= 1 { 1.0 } else { 0.0 })
}

/// `(Δ + 2/R²) a`
pub fn shifted_laplacian(a: &SpectralField) -> SpectralField {
    let r2 = a.grid().radius() * a.grid().radius();
    a.map_degree(|l| (2.0 - (l * (l + 1)) as f64) / r2)
}

/// Solves `(σ − κΔ) G = κΛ η` on S. Rejects `η` with `l <= 1` content above
/// [`IN_S_TOL`] relative to its largest coefficient.
pub fn green(eta: &SpectralField, params: &ModelParams) -> Result<SpectralField> {
    let max_low = eta.max_abs_coeff_up_to(1);
    let tol = IN_S_TOL * eta.max_abs_coeff();
    if max_low > tol {
        return Err(Error::NotInS { max_low, tol });
    }
    Ok(green_unchecked(eta, params))
}

fn green_unchecked(eta: &SpectralField, params: &ModelParams) -> SpectralField {
    let r2 = eta.grid().radius() * eta.grid().radius();
    let ModelParams { kappa, sigma, coupling, .. } = *params;
    eta.map_degree(|l| if l <= 1 { 0.0 } else { kappa * coupling / (sigma + kappa * (l * (l + 1)) as f64 / r2) })
}

/// Equilibrium membrane height `u = G(P φ)`.
pub fn green_of_projection(phi: &SpectralField, params: &ModelParams) -> SpectralField {
    green_unchecked(phi, params)
}

/// `‖(σ − κΔ) G(η) − κΛ η‖_∞` on the grid.
pub fn green_residual(g: &SpectralField, eta: &SpectralField, params: &ModelParams) -> Result<f64> {
    let lhs = g.scale(params.sigma).axpy(-params.kappa, &laplace_beltrami(g))?;
    let diff = lhs.axpy(-params.kappa * params.coupling, eta)?;
    Ok(diff.synthesize().max_abs())
}

/// `‖(Δ + 2/R²)(κΔu − σu + κΛ(φ − α))‖_∞` on the grid.
pub fn height_residual(u: &SpectralField, phi: &SpectralField, params: &ModelParams) -> Result<f64> {
    let inner = laplace_beltrami(u)
        .scale(params.kappa)
        .axpy(-params.sigma, u)?
        .axpy(params.kappa * params.coupling, phi)?
        .axpy(1.0, &SpectralField::constant(u.grid(), -params.kappa * params.coupling * params.alpha))?;
    Ok(shifted_laplacian(&inner).synthesize().max_abs())
}

/// Max-norm gap between `(Δ + 2/R²) G(Pφ)` and `(σ/κ + 2/R²) G(Pφ) − Λ Pφ`.
pub fn reformulation_residual(phi: &SpectralField, params: &ModelParams) -> f64 {
    let r2 = params.radius * params.radius;
    let p = project_s(phi);
    let g = green_of_projection(phi, params);
    let lhs = shifted_laplacian(&g);
    let rhs = g.scale(params.sigma / params.kappa + 2.0 / r2).axpy(-params.coupling, &p).expect("fields share a grid");
    (&lhs - &rhs).synthesize().max_abs()
}
