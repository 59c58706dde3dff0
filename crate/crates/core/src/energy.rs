//! Diffuse, reduced and sharp-interface energies.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::axisym::{cap_perimeter, CapSet};
use crate::error::Result;
use crate::operators::{green_of_projection, shifted_laplacian, ModelParams};
use crate::sphere::{gradient_sq_integral, GridField, SpectralField, SphereGrid};

/// Parts of an energy evaluation. `total` is the sum of `bending`,
/// `dirichlet`, `potential` and `line`; `coupling_k` is the nonlocal part
/// `K` of the reduced energy, reported alongside.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct EnergyReport {
    pub total: f64,
    pub bending: f64,
    pub dirichlet: f64,
    pub potential: f64,
    pub coupling_k: f64,
    pub line: f64,
}

/// `W(s) = (s² − 1)²/4`
pub fn double_well(s: f64) -> f64 {
    let t = s * s - 1.0;
    0.25 * t * t
}

/// `W'(s) = s³ − s`
pub fn double_well_deriv(s: f64) -> f64 {
    s * (s * s - 1.0)
}

/// `∫ W(φ)` by grid quadrature.
pub fn potential_integral(phi: &GridField) -> f64 {
    phi.map(double_well).integrate()
}

/// Membrane energy `∫ κ/2 (A + Λφ)² − (κ/R² + σ/2) u A` with `A = Δu + 2u/R²`.
pub fn energy_em(u: &SpectralField, phi: &GridField, params: &ModelParams) -> Result<f64> {
    phi.same_grid(u.grid())?;
    let r2 = params.radius * params.radius;
    let a = shifted_laplacian(u).synthesize();
    let ug = u.synthesize();
    let ModelParams { kappa, sigma, coupling, .. } = *params;
    let w = kappa / r2 + 0.5 * sigma;
    let mut density = GridField::zeros(u.grid());
    for (((d, &av), &uv), &pv) in density.values_mut().iter_mut().zip(a.values()).zip(ug.values()).zip(phi.values()) {
        let s = av + coupling * pv;
        *d = 0.5 * kappa * s * s - w * uv * av;
    }
    Ok(density.integrate())
}

/// `E_DI(u, φ)`: membrane energy plus the Modica–Mortola terms.
pub fn energy_diffuse(u: &SpectralField, phi: &SpectralField, params: &ModelParams) -> Result<EnergyReport> {
    let phi_g = phi.synthesize();
    let bending = energy_em(u, &phi_g, params)?;
    let dirichlet = 0.5 * params.line_tension * params.epsilon * gradient_sq_integral(phi);
    let potential = params.line_tension / params.epsilon * potential_integral(&phi_g);
    Ok(EnergyReport {
        total: bending + dirichlet + potential,
        bending,
        dirichlet,
        potential,
        coupling_k: energy_k(phi, params),
        line: 0.0,
    })
}

fn degree_sum(a: &SpectralField, f: impl Fn(usize) -> f64) -> f64 {
    a.coeffs().iter().zip(a.grid().degrees()).map(|(c, &l)| f(l) * c * c).sum()
}

/// Green multiplier `κΛ/(σ + κ l(l+1)/R²)` for `l >= 2`.
fn green_factor(l: usize, params: &ModelParams) -> f64 {
    if l <= 1 {
        return 0.0;
    }
    let r2 = params.radius * params.radius;
    params.kappa * params.coupling / (params.sigma + params.kappa * (l * (l + 1)) as f64 / r2)
}

/// `∫ κΛ/2 Pφ (Δ + 2/R²) G(Pφ)`, evaluated per mode.
pub fn nonlocal_term(phi: &SpectralField, params: &ModelParams) -> f64 {
    let kl = params.kappa * params.coupling;
    degree_sum(phi, |l| 0.5 * kl * (2.0 - (l * (l + 1)) as f64) * green_factor(l, params))
}

/// `∫ κΛ/2 Pφ (σ/κ + 2/R²) G(Pφ)`, evaluated per mode.
pub fn nonlocal_term_reformulated(phi: &SpectralField, params: &ModelParams) -> f64 {
    let r2 = params.radius * params.radius;
    let kl = params.kappa * params.coupling;
    let shift = params.sigma / params.kappa + 2.0 / r2;
    r2 * degree_sum(phi, |l| 0.5 * kl * shift * green_factor(l, params))
}

/// Reduced diffuse energy `Ẽ_DI(φ)` in simplified form.
pub fn energy_reduced(phi: &SpectralField, params: &ModelParams) -> f64 {
    energy_j(phi, params) + energy_k(phi, params)
}

/// `Ẽ_DI(φ)` from its defining expansion in `G = G(Pφ)`:
/// `∫ κ/2 (Δ − σ/κ)G (Δ + 2/R²)G + κΛ²φ²/2 + κΛ φ (Δ + 2/R²)G + J_ε` integrand.
pub fn energy_reduced_expanded(phi: &SpectralField, params: &ModelParams) -> Result<f64> {
    let g = green_of_projection(phi, params);
    let r2 = params.radius * params.radius;
    let ModelParams { kappa, sigma, coupling, .. } = *params;
    let shifted = shifted_laplacian(&g).synthesize();
    let damped = g.map_degree(|l| -((l * (l + 1)) as f64) / r2 - sigma / kappa).synthesize();
    let phi_g = phi.synthesize();
    let mut density = GridField::zeros(phi.grid());
    for (((d, &s), &h), &p) in
        density.values_mut().iter_mut().zip(shifted.values()).zip(damped.values()).zip(phi_g.values())
    {
        *d = 0.5 * kappa * h * s + 0.5 * kappa * coupling * coupling * p * p + kappa * coupling * p * s;
    }
    Ok(density.integrate() + energy_j(phi, params))
}

/// Local part `J_ε(φ) = ∫ bε/2 |∇φ|² + b/ε W(φ)`.
pub fn energy_j(phi: &SpectralField, params: &ModelParams) -> f64 {
    let b = params.line_tension;
    let eps = params.epsilon;
    0.5 * b * eps * gradient_sq_integral(phi) + b / eps * potential_integral(&phi.synthesize())
}

/// Nonlocal part `K(φ) = ∫ κΛ/2 Pφ (Δ + 2/R²) G(Pφ) + κΛ²φ²/2`.
pub fn energy_k(phi: &SpectralField, params: &ModelParams) -> f64 {
    let r2 = params.radius * params.radius;
    let l2 = params.coupling * params.coupling;
    nonlocal_term(phi, params) + 0.5 * params.kappa * l2 * r2 * degree_sum(phi, |_| 1.0)
}

/// `K(φ)` in the form `∫ κΛ/2 Pφ (σ/κ + 2/R²) G(Pφ) + κΛ²/2 (φ² − (Pφ)²)`.
pub fn energy_k_reformulated(phi: &SpectralField, params: &ModelParams) -> f64 {
    let r2 = params.radius * params.radius;
    let l2 = params.coupling * params.coupling;
    let low = degree_sum(phi, |l| if l <= 1 { 1.0 } else { 0.0 });
    nonlocal_term_reformulated(phi, params) + 0.5 * params.kappa * l2 * r2 * low
}

/// `K(χ)` for a sampled indicator. Uses the reformulated expression with the
/// pointwise projection `Pχ = χ − (l <= 1 part)`, so `∫ χ² − (Pχ)²` reduces to
/// the `l <= 1` coefficients without any truncation tail.
pub fn energy_k_indicator(chi: &GridField, params: &ModelParams) -> Result<f64> {
    let a = chi.analyze()?;
    Ok(energy_k_reformulated(&a, params))
}

/// `J₀ + K` at a sharp configuration: `b̂|γ| + K(χ_γ)` with `χ_γ` sampled on `grid`.
pub fn gamma_limit_value(caps: &CapSet, grid: &Arc<SphereGrid>, params: &ModelParams) -> Result<f64> {
    let line = params.line_tension_sharp() * cap_perimeter(caps, params.radius);
    Ok(line + energy_k_indicator(&caps.sample(grid), params)?)
}

/// Sharp energy `E_SI(u, γ) = ∫ e_m(u, χ_γ) + b̂|γ|`.
pub fn energy_sharp(u: &SpectralField, caps: &CapSet, params: &ModelParams) -> Result<EnergyReport> {
    let chi = caps.sample(u.grid());
    let bending = energy_em(u, &chi, params)?;
    let line = params.line_tension_sharp() * cap_perimeter(caps, params.radius);
    Ok(EnergyReport {
        total: bending + line,
        bending,
        dirichlet: 0.0,
        potential: 0.0,
        coupling_k: energy_k_indicator(&chi, params)?,
        line,
    })
}

/// Reduced sharp energy `Ẽ_SI(γ)` on the 2-D grid.
pub fn energy_sharp_reduced(caps: &CapSet, grid: &Arc<SphereGrid>, params: &ModelParams) -> Result<f64> {
    gamma_limit_value(caps, grid, params)
}

/// Truncation remainder `κΛ²/2 (|Γ| − Σ ĉ² R²)` of a sampled indicator: the
/// gap `E_SI(G(Pχ), γ) − Ẽ_SI(γ)` on a finite grid.
pub fn indicator_truncation_remainder(chi: &GridField, params: &ModelParams) -> Result<f64> {
    let a = chi.analyze()?;
    let sq = chi.map(|v| v * v).integrate();
    Ok(0.5 * params.kappa * params.coupling * params.coupling * (sq - a.norm_sq()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::axisym::Cap;
    use crate::operators::{project_s, C_W};
    use crate::sphere::build_grid;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn params() -> ModelParams {
        ModelParams { sigma: 0.4, coupling: 1.3, line_tension: 0.8, epsilon: 0.2, radius: 1.2, ..Default::default() }
    }

    fn random_phi(grid: &Arc<SphereGrid>, seed: u64, decay: f64) -> SpectralField {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = SpectralField::zeros(grid);
        let degrees = grid.degrees().to_vec();
        for (c, l) in a.coeffs_mut().iter_mut().zip(degrees) {
            *c = rng.random_range(-1.0..1.0) / (1.0 + l as f64).powf(decay);
        }
        a
    }

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(1e-300)
    }

    #[test]
    fn membrane_energy_of_constants() {
        let p = params();
        let g = build_grid(p.radius, 8, 2.0).unwrap();
        let zero = SpectralField::zeros(&g);
        let one = GridField::from_fn(&g, |_, _| 1.0);
        let e = energy_em(&zero, &one, &p).unwrap();
        let area = 4.0 * PI * p.radius * p.radius;
        assert!(rel(e, 0.5 * p.kappa * p.coupling * p.coupling * area) < 1e-13);
        assert_eq!(energy_em(&zero, &GridField::zeros(&g), &p).unwrap(), 0.0);
    }

    #[test]
    fn membrane_energy_of_unit_degree_two_mode() {
        let p = ModelParams { sigma: 0.0, ..Default::default() };
        let g = build_grid(1.0, 6, 2.0).unwrap();
        let mut u = SpectralField::zeros(&g);
        u.set(2, 0, 1.0);
        let e = energy_em(&u, &GridField::zeros(&g), &p).unwrap();
        // oracle: dense midpoint rule with a finite-difference Laplacian of Y20
        let y = |t: f64| (5.0 / (4.0 * PI)).sqrt() * 0.5 * (3.0 * t.cos().powi(2) - 1.0);
        let h = 1e-4;
        let n = 20_000;
        let dt = PI / n as f64;
        let oracle: f64 = (0..n)
            .map(|i| {
                let t = (i as f64 + 0.5) * dt;
                let lap = (y(t + h) - 2.0 * y(t) + y(t - h)) / (h * h)
                    + t.cos() / t.sin() * (y(t + h) - y(t - h)) / (2.0 * h);
                let a = lap + 2.0 * y(t);
                (0.5 * a * a - y(t) * a) * 2.0 * PI * t.sin() * dt
            })
            .sum();
        assert!((oracle - 12.0).abs() < 1e-5, "oracle {oracle}");
        assert!((e - 12.0).abs() < 1e-12, "{e}");
    }

    #[test]
    fn diffuse_energy_of_constant_states() {
        let p = params();
        let g = build_grid(p.radius, 8, 2.0).unwrap();
        let zero = SpectralField::zeros(&g);
        let area = 4.0 * PI * p.radius * p.radius;
        for alpha in [-0.3, 0.0, 0.55] {
            let e = energy_diffuse(&zero, &SpectralField::constant(&g, alpha), &p).unwrap();
            let exact = area
                * (0.5 * p.kappa * p.coupling * p.coupling * alpha * alpha
                    + p.line_tension * double_well(alpha) / p.epsilon);
            assert!(rel(e.total, exact) < 1e-13);
        }
        let e = energy_diffuse(&zero, &SpectralField::constant(&g, -1.0), &p).unwrap();
        assert!(rel(e.total, 2.0 * PI * p.kappa * p.coupling * p.coupling * p.radius * p.radius) < 1e-13);
        assert!(
            rel(energy_reduced(&SpectralField::constant(&g, 0.3), &p), {
                area * (p.line_tension * double_well(0.3) / p.epsilon + 0.5 * p.kappa * p.coupling.powi(2) * 0.09)
            }) < 1e-13
        );
    }

    #[test]
    fn full_phase_splits_into_zero_j_and_area_k() {
        let p = params();
        let g = build_grid(p.radius, 8, 2.0).unwrap();
        let one = SpectralField::constant(&g, 1.0);
        assert!(energy_j(&one, &p).abs() < 1e-14);
        let k = 2.0 * PI * p.kappa * p.coupling.powi(2) * p.radius.powi(2);
        assert!(rel(energy_k(&one, &p), k) < 1e-13);
        assert!(rel(energy_k_reformulated(&one, &p), k) < 1e-13);
    }

    #[test]
    fn report_total_is_sum_of_parts() {
        let p = params();
        let g = build_grid(p.radius, 16, 2.0).unwrap();
        let phi = random_phi(&g, 1, 1.0);
        let r = energy_diffuse(&green_of_projection(&phi, &p), &phi, &p).unwrap();
        assert!(rel(r.bending + r.dirichlet + r.potential + r.line, r.total) < 1e-12);
    }

    #[test]
    fn equatorial_cap_energies() {
        let p = params();
        let g = build_grid(p.radius, 32, 2.0).unwrap();
        let caps = CapSet::single(Cap::north(PI / 2.0)).unwrap();
        let zero = SpectralField::zeros(&g);
        let rep = energy_sharp(&zero, &caps, &p).unwrap();
        let line = C_W * p.line_tension * 2.0 * PI * p.radius;
        assert!(rel(rep.line, line) < 1e-14);
        let exact = 2.0 * PI * p.kappa * p.coupling.powi(2) * p.radius.powi(2) + line;
        assert!(rel(rep.total, exact) < 1e-13);
        let tiny = CapSet::single(Cap::north(1e-9)).unwrap();
        assert!(energy_sharp(&zero, &tiny, &p).unwrap().line < 1e-8);
    }

    #[test]
    fn sharp_energy_gap_equals_truncation_remainder() {
        let p = params();
        let caps = CapSet::two(0.7, 1.1).unwrap();
        for l in [32, 64] {
            let g = build_grid(p.radius, l, 2.0).unwrap();
            let chi = caps.sample(&g);
            let u = green_of_projection(&chi.analyze().unwrap(), &p);
            let esi = energy_sharp(&u, &caps, &p).unwrap().total;
            let reduced = energy_sharp_reduced(&caps, &g, &p).unwrap();
            let rem = indicator_truncation_remainder(&chi, &p).unwrap();
            assert!(((esi - reduced) - rem).abs() < 1e-10 * esi.abs(), "L={l}");
            assert!(rem > 0.0);
        }
    }

    #[test]
    fn k_is_lipschitz_with_resolution_independent_constant() {
        let p = params();
        let f1 = |t: f64, ph: f64| (2.0 * t).cos() + 0.3 * (t.sin() * ph.sin()).powi(3);
        let f2 = |t: f64, ph: f64| f1(t, ph) + 0.1 * (3.0 * t).sin() * ph.cos();
        let mut ratios = Vec::new();
        for l in [24, 48, 96] {
            let g = build_grid(p.radius, l, 2.0).unwrap();
            let a = GridField::from_fn(&g, f1).analyze().unwrap();
            let b = GridField::from_fn(&g, f2).analyze().unwrap();
            let dk = (energy_k(&a, &p) - energy_k(&b, &p)).abs();
            ratios.push(dk / (&a - &b).norm_sq().sqrt());
        }
        assert!(rel(ratios[1], ratios[2]) < 1e-6 && rel(ratios[0], ratios[2]) < 1e-3, "{ratios:?}");
    }

    #[test]
    fn modica_mortola_energy_of_band_converges_in_resolution() {
        let p = ModelParams { epsilon: 0.1, coupling: 0.0, ..Default::default() };
        let line = C_W * p.line_tension * 2.0 * PI;
        let mut js = Vec::new();
        for l in [32, 64, 128, 256] {
            let g = crate::sphere::GridSpec::zonal(1.0, l, 2.0).build().unwrap();
            let phi = GridField::from_fn(&g, |t, _| ((PI / 2.0 - t) / (2f64.sqrt() * p.epsilon)).tanh());
            js.push(energy_j(&phi.analyze().unwrap(), &p));
        }
        let diffs: Vec<f64> = js.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
        assert!(diffs.windows(2).all(|d| d[1] < d[0]), "{js:?}");
        assert!(rel(*js.last().unwrap(), line) < 0.01, "{js:?}");
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(16))]

        #[test]
        fn identity_chain(seed in any::<u64>(), sigma in 0.0f64..2.0, radius in 0.5f64..2.0) {
            let p = ModelParams { sigma, radius, ..params() };
            let g = build_grid(radius, 20, 2.0).unwrap();
            let phi = random_phi(&g, seed, 0.5);
            let u = green_of_projection(&phi, &p);
            let e_di = energy_diffuse(&u, &phi, &p).unwrap().total;
            let reduced = energy_reduced(&phi, &p);
            prop_assert!(rel(e_di, reduced) < 1e-9);
            prop_assert!(rel(energy_reduced_expanded(&phi, &p).unwrap(), reduced) < 1e-9);
            let jk = energy_j(&phi, &p) + energy_k(&phi, &p);
            prop_assert!(rel(jk, reduced) < 1e-10);
            prop_assert!(rel(energy_k(&phi, &p), energy_k_reformulated(&phi, &p)) < 1e-10);
        }

        #[test]
        fn equilibrium_height_minimizes(seed in any::<u64>(), sigma in 0.0f64..2.0, amp in 1e-3f64..1.0) {
            let p = ModelParams { sigma, ..params() };
            let g = build_grid(p.radius, 16, 2.0).unwrap();
            let phi = random_phi(&g, seed, 0.5);
            let u = green_of_projection(&phi, &p);
            let v = project_s(&random_phi(&g, seed ^ 0x5a5a, 1.0));
            let reduced = energy_reduced(&phi, &p);
            let perturbed = energy_diffuse(&u.axpy(amp, &v).unwrap(), &phi, &p).unwrap().total;
            prop_assert!(perturbed >= reduced - 1e-10);
        }
    }
}
