//! Axisymmetric sharp-interface configurations: polar caps, their Legendre
//! expansions, the series form of the reduced sharp energy and the two-cap
//! interface flow.

use std::f64::consts::PI;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::legendre::{legendre_values, zonal_values};
use crate::operators::ModelParams;
use crate::sphere::{laplace_beltrami, GridField, SpectralField, SphereGrid};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pole {
    North,
    South,
}

/// A polar cap of geodesic half-angle `theta0` around `pole`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cap {
    pub pole: Pole,
    pub theta0: f64,
}

impl Cap {
    pub fn north(theta0: f64) -> Self {
        Self { pole: Pole::North, theta0 }
    }
    pub fn south(theta0: f64) -> Self {
        Self { pole: Pole::South, theta0 }
    }

    /// Whether colatitude `theta` lies in the closed cap.
    pub fn contains(&self, theta: f64) -> bool {
        match self.pole {
            Pole::North => theta <= self.theta0,
            Pole::South => theta >= PI - self.theta0,
        }
    }

    /// Colatitude of the boundary circle.
    pub fn boundary_colatitude(&self) -> f64 {
        match self.pole {
            Pole::North => self.theta0,
            Pole::South => PI - self.theta0,
        }
    }

    pub fn area(&self, radius: f64) -> f64 {
        2.0 * PI * radius * radius * (1.0 - self.theta0.cos())
    }

    pub fn perimeter(&self, radius: f64) -> f64 {
        2.0 * PI * radius * self.theta0.sin()
    }
}

/// Disjoint polar caps. The union of the caps is the `χ = +1` phase.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CapSet {
    caps: Vec<Cap>,
}

impl CapSet {
    pub fn new(caps: Vec<Cap>) -> Result<Self> {
        if caps.is_empty() {
            return Err(Error::InvalidCapSet("at least one cap is required".into()));
        }
        for c in &caps {
            if !(c.theta0 > 0.0 && c.theta0 <= PI / 2.0) {
                return Err(Error::InvalidCapSet(format!("theta0 = {} outside (0, pi/2]", c.theta0)));
            }
        }
        let north: Vec<_> = caps.iter().filter(|c| c.pole == Pole::North).collect();
        let south: Vec<_> = caps.iter().filter(|c| c.pole == Pole::South).collect();
        if north.len() > 1 || south.len() > 1 {
            return Err(Error::InvalidCapSet("at most one cap per pole".into()));
        }
        if let (Some(n), Some(s)) = (north.first(), south.first()) {
            if n.theta0 + s.theta0 >= PI {
                return Err(Error::InvalidCapSet("caps overlap".into()));
            }
        }
        Ok(Self { caps })
    }

    pub fn single(cap: Cap) -> Result<Self> {
        Self::new(vec![cap])
    }

    /// North cap `theta_north` and south cap `theta_south`.
    pub fn two(theta_north: f64, theta_south: f64) -> Result<Self> {
        Self::new(vec![Cap::north(theta_north), Cap::south(theta_south)])
    }

    pub fn caps(&self) -> &[Cap] {
        &self.caps
    }

    pub fn indicator(&self, theta: f64) -> f64 {
        if self.caps.iter().any(|c| c.contains(theta)) {
            1.0
        } else {
            -1.0
        }
    }

    /// `χ` sampled at the grid nodes; a node on a boundary circle gets `+1`.
    pub fn sample(&self, grid: &Arc<SphereGrid>) -> GridField {
        GridField::from_fn(grid, |t, _| self.indicator(t))
    }
}

/// Mean composition `(|Γ⁽²⁾| − |Γ⁽¹⁾|)/|Γ|` of the cap indicator.
pub fn cap_alpha(caps: &CapSet) -> f64 {
    // area fractions are radius-independent
    let inside: f64 = caps.caps.iter().map(|c| c.area(1.0)).sum::<f64>() / (4.0 * PI);
    2.0 * inside - 1.0
}

/// Total length of the interface circles.
pub fn cap_perimeter(caps: &CapSet, radius: f64) -> f64 {
    caps.caps.iter().map(|c| c.perimeter(radius)).sum()
}

/// Geodesic curvature `cot(θ₀)/R` of a cap boundary, measured with the
/// conormal pointing into the cap.
pub fn geodesic_curvature(cap: &Cap, radius: f64) -> f64 {
    cap.theta0.cos() / cap.theta0.sin() / radius
}

/// Zonal field `f(θ) = Σ c_l Y_l0(cos θ)` in the orthonormal zonal basis, so
/// `c_l` is the `(l, 0)` coefficient of the matching [`SpectralField`].
#[derive(Debug, Clone, PartialEq)]
pub struct AxisymField {
    pub coeffs: Vec<f64>,
}

impl AxisymField {
    pub fn l_max(&self) -> usize {
        self.coeffs.len() - 1
    }

    pub fn from_spectral(field: &SpectralField) -> Self {
        let l_max = field.grid().l_max();
        Self { coeffs: (0..=l_max).map(|l| field.get(l, 0)).collect() }
    }

    /// Embeds the coefficients up to the grid truncation.
    pub fn to_spectral(&self, grid: &Arc<SphereGrid>) -> SpectralField {
        let mut out = SpectralField::zeros(grid);
        for l in 0..=grid.l_max().min(self.l_max()) {
            out.set(l, 0, self.coeffs[l]);
        }
        out
    }

    pub fn eval(&self, theta: f64) -> f64 {
        zonal_values(self.l_max(), theta.cos()).iter().zip(&self.coeffs).map(|(y, c)| y * c).sum()
    }

    /// Applies a degree-dependent multiplier.
    pub fn map_degree(&self, f: impl Fn(usize) -> f64) -> Self {
        Self { coeffs: self.coeffs.iter().enumerate().map(|(l, c)| c * f(l)).collect() }
    }
}

/// `∫_{x0}^{1} P_l(x) dx` for `l = 0 ..= lmax`.
fn legendre_tail_integrals(lmax: usize, x0: f64) -> Vec<f64> {
    let p = legendre_values(lmax + 1, x0);
    (0..=lmax).map(|l| if l == 0 { 1.0 - x0 } else { (p[l - 1] - p[l + 1]) / (2 * l + 1) as f64 }).collect()
}

/// Exact zonal Legendre coefficients of the cap indicator `χ`.
pub fn chi_legendre(caps: &CapSet, l_max: usize) -> AxisymField {
    let mut inside = vec![0.0; l_max + 1];
    for cap in &caps.caps {
        let tail = legendre_tail_integrals(l_max, cap.theta0.cos());
        for (l, (acc, t)) in inside.iter_mut().zip(tail).enumerate() {
            let parity = if cap.pole == Pole::South && l % 2 == 1 { -1.0 } else { 1.0 };
            *acc += parity * t;
        }
    }
    let coeffs = inside
        .iter()
        .enumerate()
        .map(|(l, &t)| {
            let whole = if l == 0 { 2.0 } else { 0.0 };
            let norm = ((2 * l + 1) as f64 / (4.0 * PI)).sqrt();
            2.0 * PI * norm * (2.0 * t - whole)
        })
        .collect();
    AxisymField { coeffs }
}

/// Green multiplier `κΛ/(σ + κ l(l+1)/R²)` for `l >= 2`, zero below.
fn green_factor(l: usize, params: &ModelParams) -> f64 {
    if l <= 1 {
        return 0.0;
    }
    let r2 = params.radius * params.radius;
    params.kappa * params.coupling / (params.sigma + params.kappa * (l * (l + 1)) as f64 / r2)
}

/// Reduced sharp energy from the Legendre series of `χ`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SeriesEnergy {
    pub total: f64,
    pub line: f64,
    /// `K(χ)`
    pub coupling_k: f64,
    /// Estimated remainder of the truncated series.
    pub tail_estimate: f64,
}

/// `Ẽ_SI = b̂|γ| + Σ_{l>=2} R² κΛ/2 (σ/κ + 2/R²) g_l c_l² + κΛ²/2 (|Γ| − ∫(Pχ)²)`,
/// where `g_l` is the Green multiplier and `|Γ| − ∫(Pχ)² = R²(c₀² + c₁²)` by
/// completeness. Only the first sum is truncated; its terms decay like `l⁻⁴`,
/// which gives the tail estimate `(Σ over (L/2, L]) / 7`.
pub fn sharp_energy_series(caps: &CapSet, params: &ModelParams, l_max: usize) -> SeriesEnergy {
    let chi = chi_legendre(caps, l_max);
    let r2 = params.radius * params.radius;
    let kl = params.kappa * params.coupling;
    let shift = params.sigma / params.kappa + 2.0 / r2;
    let terms: Vec<f64> =
        (0..=l_max).map(|l| r2 * 0.5 * kl * shift * green_factor(l, params) * chi.coeffs[l].powi(2)).collect();
    let nonlocal: f64 = terms.iter().sum();
    let low = r2 * (chi.coeffs[0].powi(2) + chi.coeffs[1].powi(2));
    let coupling_k = nonlocal + 0.5 * kl * params.coupling * low;
    let line = params.line_tension_sharp() * cap_perimeter(caps, params.radius);
    let upper: f64 = terms[l_max / 2 + 1..].iter().sum();
    SeriesEnergy { total: line + coupling_k, line, coupling_k, tail_estimate: upper / 7.0 }
}

/// Height `u = G(Pχ)` as a zonal series.
pub fn height_series(caps: &CapSet, params: &ModelParams, l_max: usize) -> AxisymField {
    chi_legendre(caps, l_max).map_degree(|l| green_factor(l, params))
}

/// Closed-form interface data of the sharp configuration at one boundary
/// circle: the height, the `l <= 1` part `Q` of `χ`, and the sum of the two
/// one-sided traces of `Δu`, `Δu⁽¹⁾ + Δu⁽²⁾ = 2σu/κ + 2ΛQ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterfaceTrace {
    pub height: f64,
    pub low_modes: f64,
    pub laplacian_sum: f64,
}

fn interface_traces(caps: &CapSet, params: &ModelParams, l_max: usize) -> Vec<InterfaceTrace> {
    let chi = chi_legendre(caps, l_max);
    let u = chi.map_degree(|l| green_factor(l, params));
    caps.caps
        .iter()
        .map(|cap| {
            let x = cap.boundary_colatitude().cos();
            let y = zonal_values(l_max, x);
            let height: f64 = y.iter().zip(&u.coeffs).map(|(a, b)| a * b).sum();
            let low_modes = chi.coeffs[0] * y[0] + chi.coeffs[1] * y[1];
            InterfaceTrace {
                height,
                low_modes,
                laplacian_sum: 2.0 * params.sigma * height / params.kappa + 2.0 * params.coupling * low_modes,
            }
        })
        .collect()
}

/// Interface driving force `F_i = b̂ H_i + κΛ(Δu⁽¹⁾ + Δu⁽²⁾ + 4u/R²)` on each
/// circle; `F_i · ℓ_i · R` is the derivative of `Ẽ_SI` in the cap angle.
pub fn interface_forces(caps: &CapSet, params: &ModelParams, l_max: usize) -> Vec<f64> {
    let r2 = params.radius * params.radius;
    interface_traces(caps, params, l_max)
        .iter()
        .zip(&caps.caps)
        .map(|(tr, cap)| {
            params.line_tension_sharp() * geodesic_curvature(cap, params.radius)
                + params.kappa * params.coupling * (tr.laplacian_sum + 4.0 * tr.height / r2)
        })
        .collect()
}

/// Normal velocities `𝒱_i` (positive grows the cap) with
/// `β̂ 𝒱_i = −(F_i − ⟨F⟩_γ)` and `⟨·⟩_γ` the length-weighted mean.
pub fn interface_velocities(caps: &CapSet, params: &ModelParams, l_max: usize) -> Vec<f64> {
    let forces = interface_forces(caps, params, l_max);
    let lengths: Vec<f64> = caps.caps.iter().map(|c| c.perimeter(params.radius)).collect();
    let mean = forces.iter().zip(&lengths).map(|(f, l)| f * l).sum::<f64>() / lengths.iter().sum::<f64>();
    forces.iter().map(|f| -(f - mean) / params.beta_sharp()).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TwoCapStatus {
    Completed,
    Vanished,
    Collided,
    StepUnderflow,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TwoCapSample {
    pub t: f64,
    /// Cap angles in the order of the initial cap set.
    pub theta: Vec<f64>,
    pub energy: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TwoCapTrajectory {
    pub samples: Vec<TwoCapSample>,
    pub status: TwoCapStatus,
    pub rejected_steps: u64,
}

/// Options of [`two_cap_flow`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoCapOptions {
    /// Truncation of the Legendre series.
    pub l_max: usize,
    /// Caps smaller than this angle count as vanished.
    pub theta_min: f64,
    /// Smallest step before giving up after energy rejections.
    pub dt_min: f64,
}

impl Default for TwoCapOptions {
    fn default() -> Self {
        Self { l_max: 16_384, theta_min: 1e-3, dt_min: 1e-12 }
    }
}

fn with_angles(caps: &CapSet, theta: &[f64]) -> Option<CapSet> {
    let moved = caps.caps.iter().zip(theta).map(|(c, &t)| Cap { pole: c.pole, theta0: t }).collect();
    CapSet::new(moved).ok()
}

/// Sharp-interface flow of axisymmetric caps, `dθ_i/dt = 𝒱_i / R`, by
/// classical RK4 with step `dt`, halved when the series energy increases.
pub fn two_cap_flow(
    caps0: &CapSet,
    params: &ModelParams,
    dt: f64,
    t_end: f64,
    options: &TwoCapOptions,
) -> Result<TwoCapTrajectory> {
    params.validate_allow_uncoupled()?;
    if !(dt > 0.0) {
        return Err(Error::InvalidFlowParams(format!("dt = {dt} must be positive")));
    }
    let radius = params.radius;
    let rate = |theta: &[f64]| -> Option<Vec<f64>> {
        let caps = with_angles(caps0, theta)?;
        Some(interface_velocities(&caps, params, options.l_max).iter().map(|v| v / radius).collect())
    };
    let energy = |theta: &[f64]| -> Option<f64> {
        Some(sharp_energy_series(&with_angles(caps0, theta)?, params, options.l_max).total)
    };
    let mut theta: Vec<f64> = caps0.caps.iter().map(|c| c.theta0).collect();
    let mut t = 0.0;
    let mut e = energy(&theta).expect("initial caps are valid");
    let mut samples = vec![TwoCapSample { t, theta: theta.clone(), energy: e }];
    let mut rejected = 0;
    let mut h = dt;
    let status = loop {
        if t >= t_end - 1e-14 * t_end.max(1.0) {
            break TwoCapStatus::Completed;
        }
        let step = h.min(t_end - t);
        let trial = rk4(&theta, step, &rate);
        let outcome = trial.as_ref().map(|next| {
            let valid = with_angles(caps0, next).is_some();
            (next, valid)
        });
        match outcome {
            Some((next, true)) if next.iter().all(|&x| x >= options.theta_min) => {
                let e_next = energy(next).expect("valid caps");
                if e_next > e + 1e-13 * e.abs() {
                    rejected += 1;
                    h *= 0.5;
                    if h < options.dt_min {
                        break TwoCapStatus::StepUnderflow;
                    }
                    continue;
                }
                theta = next.clone();
                t += step;
                e = e_next;
                samples.push(TwoCapSample { t, theta: theta.clone(), energy: e });
                h = dt;
            }
            Some((next, true)) => {
                let _ = next;
                break TwoCapStatus::Vanished;
            }
            _ => {
                // the step left the admissible set; refine until it is
                // resolved or the step becomes negligible
                h *= 0.5;
                if h < options.dt_min {
                    let vanished = theta.iter().any(|&x| x < 10.0 * options.theta_min);
                    break if vanished { TwoCapStatus::Vanished } else { TwoCapStatus::Collided };
                }
            }
        }
    };
    Ok(TwoCapTrajectory { samples, status, rejected_steps: rejected })
}

fn rk4(y: &[f64], h: f64, f: &impl Fn(&[f64]) -> Option<Vec<f64>>) -> Option<Vec<f64>> {
    let add = |a: &[f64], k: &[f64], s: f64| a.iter().zip(k).map(|(x, d)| x + s * d).collect::<Vec<_>>();
    let k1 = f(y)?;
    let k2 = f(&add(y, &k1, 0.5 * h))?;
    let k3 = f(&add(y, &k2, 0.5 * h))?;
    let k4 = f(&add(y, &k3, h))?;
    Some((0..y.len()).map(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])).collect())
}

/// Zero crossings of the zonal profile of `phi`, ascending in colatitude.
pub fn interface_colatitudes(phi: &SpectralField) -> Vec<f64> {
    let n = 8 * phi.grid().l_max().max(64);
    let h = PI / n as f64;
    let f = |t: f64| phi.eval_zonal(t).0;
    let mut out = Vec::new();
    let mut prev = f(0.5 * h);
    for i in 1..n {
        let t = (i as f64 + 0.5) * h;
        let v = f(t);
        if prev == 0.0 || prev.signum() != v.signum() {
            let (mut a, mut b) = (t - h, t);
            let mut fa = prev;
            for _ in 0..60 {
                let m = 0.5 * (a + b);
                let fm = f(m);
                if fm == 0.0 {
                    a = m;
                    b = m;
                    break;
                }
                if fm.signum() == fa.signum() {
                    a = m;
                    fa = fm;
                } else {
                    b = m;
                }
            }
            out.push(0.5 * (a + b));
        }
        prev = v;
    }
    out
}

/// Jumps across the interface, `[f] = f⁽²⁾ − f⁽¹⁾` with side (2) the
/// `φ > 0` phase.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Jumps {
    pub theta: f64,
    pub jump_lap: f64,
    pub jump_grad: f64,
    pub jump_u: f64,
    /// `‖u‖_∞` along the meridian, the scale for `jump_u`.
    pub u_scale: f64,
}

/// Sampling layout of the one-sided extrapolation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpOptions {
    /// Distance of the nearest sample from the interface, in units of ε.
    pub offset: f64,
    /// Arc length covered by the samples, in units of R.
    pub window: f64,
    pub samples: usize,
    pub degree: usize,
}

impl Default for JumpOptions {
    fn default() -> Self {
        Self { offset: 5.0, window: 0.25, samples: 12, degree: 3 }
    }
}

/// One-sided limits of `u`, `∇u·μ` and `Δu` at the first zonal interface of
/// an axisymmetric state, by least-squares polynomial extrapolation.
pub fn jump_extract(
    phi: &SpectralField,
    u: &SpectralField,
    params: &ModelParams,
    options: &JumpOptions,
) -> Result<Jumps> {
    let theta = *interface_colatitudes(phi).first().ok_or(Error::InterfaceNotFound)?;
    let radius = params.radius;
    let lap = laplace_beltrami(u);
    // the φ > 0 phase lies on the side where the profile is positive
    let north_positive = phi.eval_zonal(0.5 * theta).0 > 0.0;
    let d = options.offset * params.epsilon / radius;
    let step = options.window / (options.samples - 1).max(1) as f64;
    let reach = d + options.window;
    if [theta - reach, theta + reach].iter().any(|&t| t <= 0.0 || t >= PI) {
        return Err(Error::InterfaceNotFound);
    }
    let limits = |dir: f64| -> Result<[f64; 3]> {
        let xs: Vec<f64> = (0..options.samples).map(|k| dir * (d + k as f64 * step)).collect();
        let mut out = [0.0; 3];
        let values: Vec<[f64; 3]> = xs
            .iter()
            .map(|&s| {
                let t = theta + s;
                let (uv, du) = u.eval_zonal(t);
                // μ points into the φ > 0 phase
                let mu = if north_positive { -1.0 } else { 1.0 };
                [uv, mu * du / radius, lap.eval_zonal(t).0]
            })
            .collect();
        for (q, o) in out.iter_mut().enumerate() {
            let ys: Vec<f64> = values.iter().map(|v| v[q]).collect();
            *o = polyfit_at_zero(&xs, &ys, options.degree, step)?;
        }
        Ok(out)
    };
    let (inside_dir, outside_dir) = if north_positive { (-1.0, 1.0) } else { (1.0, -1.0) };
    let inside = limits(inside_dir)?;
    let outside = limits(outside_dir)?;
    let u_scale = u.synthesize().max_abs();
    Ok(Jumps {
        theta,
        jump_u: inside[0] - outside[0],
        jump_grad: inside[1] - outside[1],
        jump_lap: inside[2] - outside[2],
        u_scale,
    })
}

/// Value at 0 of the least-squares polynomial of `degree` through `(xs, ys)`;
/// `scale` normalizes the abscissae.
fn polyfit_at_zero(xs: &[f64], ys: &[f64], degree: usize, scale: f64) -> Result<f64> {
    let n = degree + 1;
    let mut a = vec![vec![0.0; n + 1]; n];
    for (&x, &y) in xs.iter().zip(ys) {
        let s = x / scale;
        let powers: Vec<f64> = (0..n).map(|k| s.powi(k as i32)).collect();
        for i in 0..n {
            for j in 0..n {
                a[i][j] += powers[i] * powers[j];
            }
            a[i][n] += powers[i] * y;
        }
    }
    let sol = solve_dense(a).ok_or_else(|| Error::InvalidParams("singular extrapolation system".into()))?;
    Ok(sol[0])
}

/// Gaussian elimination with partial pivoting on an augmented matrix.
fn solve_dense(mut a: Vec<Vec<f64>>) -> Option<Vec<f64>> {
    let n = a.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col] == 0.0 {
            return None;
        }
        a.swap(col, pivot);
        let (top, rest) = a.split_at_mut(col + 1);
        let pivot_row = &top[col];
        for row in rest {
            let f = row[col] / pivot_row[col];
            for (x, p) in row[col..].iter_mut().zip(&pivot_row[col..]) {
                *x -= f * p;
            }
        }
    }
    let mut x = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|k| a[i][k] * x[k]).sum();
        x[i] = (a[i][n] - s) / a[i][i];
    }
    Some(x)
}

/// Fitted meridional interface profile `tanh(±(r − r₀)/(√2 ε̂))`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileFit {
    /// Arc length from the north pole of the fitted interface.
    pub r0: f64,
    pub eps_hat: f64,
    /// Root-mean-square misfit over the window.
    pub rms: f64,
}

/// Gauss–Newton fit of the zonal profile of `phi` around its first interface,
/// over arc lengths within `window` of it.
pub fn fit_tanh_profile(phi: &SpectralField, epsilon: f64, window: f64) -> Result<ProfileFit> {
    let radius = phi.grid().radius();
    let theta = *interface_colatitudes(phi).first().ok_or(Error::InterfaceNotFound)?;
    let sign = if phi.eval_zonal(0.5 * theta).0 > 0.0 { -1.0 } else { 1.0 };
    let n = 200;
    let rs: Vec<f64> = (0..=n).map(|i| radius * theta - window + 2.0 * window * i as f64 / n as f64).collect();
    let ys: Vec<f64> = rs.iter().map(|&r| phi.eval_zonal(r / radius).0).collect();
    let mut r0 = radius * theta;
    let mut w = std::f64::consts::SQRT_2 * epsilon;
    let mut misfit = f64::INFINITY;
    for _ in 0..100 {
        let (mut jtj, mut jtr, mut ss) = ([[0.0; 2]; 2], [0.0; 2], 0.0);
        for (&r, &y) in rs.iter().zip(&ys) {
            let z = sign * (r - r0) / w;
            let th = z.tanh();
            let sech2 = 1.0 - th * th;
            let res = y - th;
            let g = [-sign * sech2 / w, -z * sech2 / w];
            for i in 0..2 {
                for j in 0..2 {
                    jtj[i][j] += g[i] * g[j];
                }
                jtr[i] += g[i] * res;
            }
            ss += res * res;
        }
        misfit = (ss / rs.len() as f64).sqrt();
        let det = jtj[0][0] * jtj[1][1] - jtj[0][1] * jtj[1][0];
        if det == 0.0 {
            break;
        }
        let d0 = (jtj[1][1] * jtr[0] - jtj[0][1] * jtr[1]) / det;
        let d1 = (jtj[0][0] * jtr[1] - jtj[1][0] * jtr[0]) / det;
        r0 += d0;
        w = (w + d1).max(1e-3 * w);
        if d0.abs() < 1e-14 * radius && d1.abs() < 1e-14 * w {
            break;
        }
    }
    Ok(ProfileFit { r0, eps_hat: w / std::f64::consts::SQRT_2, rms: misfit })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::energy::energy_sharp_reduced;
    use crate::flow::tanh_caps;
    use crate::operators::{green_of_projection, C_W};
    use crate::sphere::{build_grid, GridSpec};

    fn params() -> ModelParams {
        ModelParams { sigma: 0.5, coupling: 0.8, radius: 1.3, ..Default::default() }
    }

    #[test]
    fn capset_validation() {
        assert!(CapSet::new(vec![]).is_err());
        assert!(CapSet::single(Cap::north(0.0)).is_err());
        assert!(CapSet::single(Cap::north(1.6)).is_err());
        assert!(CapSet::new(vec![Cap::north(0.3), Cap::north(0.5)]).is_err());
        assert!(CapSet::two(PI / 2.0, PI / 2.0).is_err());
        assert!(CapSet::two(1.0, 1.5).is_ok());
    }

    #[test]
    fn alpha_of_caps() {
        assert!(cap_alpha(&CapSet::single(Cap::north(PI / 2.0)).unwrap()).abs() < 1e-15);
        for t in [0.3, 0.9, 1.4] {
            let a = cap_alpha(&CapSet::single(Cap::north(t)).unwrap());
            assert!((a + t.cos()).abs() < 1e-15);
        }
        let caps = CapSet::two(0.6, 1.1).unwrap();
        let a = cap_alpha(&caps);
        assert!((a - (1.0 - 0.6f64.cos() - 1.1f64.cos())).abs() < 1e-14);
        // quadrature oracle on a fine zonal grid
        let g = GridSpec::zonal(2.0, 2000, 2.0).build().unwrap();
        let q = caps.sample(&g).integrate() / g.area();
        assert!((q - a).abs() < 2e-3);
    }

    #[test]
    fn perimeter_and_curvature() {
        let eq = CapSet::single(Cap::north(PI / 2.0)).unwrap();
        assert!((cap_perimeter(&eq, 1.0) - 2.0 * PI).abs() < 1e-15);
        assert!(geodesic_curvature(&Cap::north(PI / 2.0), 1.0).abs() < 1e-15);
        let q = Cap::north(PI / 4.0);
        assert!((q.perimeter(1.0) - PI * 2f64.sqrt()).abs() < 1e-14);
        assert!((geodesic_curvature(&q, 1.0) - 1.0).abs() < 1e-15);
        assert!(geodesic_curvature(&Cap::north(1e-6), 1.0) > 1e5);
    }

    #[test]
    fn curvature_sign_matches_discrete_curvature_vector() {
        for (cap, r) in [(Cap::north(0.7), 1.0), (Cap::south(0.4), 2.0)] {
            let t = cap.boundary_colatitude();
            let point = |p: f64| [r * t.sin() * p.cos(), r * t.sin() * p.sin(), r * t.cos()];
            let h = 1e-4;
            let ds = r * t.sin() * h;
            let (a, b, c) = (point(-h), point(0.0), point(h));
            let k: Vec<f64> = (0..3).map(|i| (a[i] - 2.0 * b[i] + c[i]) / (ds * ds)).collect();
            let normal: Vec<f64> = b.iter().map(|x| x / r).collect();
            let radial: f64 = k.iter().zip(&normal).map(|(x, y)| x * y).sum();
            let tangential: Vec<f64> = k.iter().zip(&normal).map(|(x, y)| x - radial * y).collect();
            // μ points into the cap: −e_θ for a north cap, +e_θ for a south cap
            let e_theta = [t.cos(), 0.0, -t.sin()];
            let mu = if cap.pole == Pole::North { -1.0 } else { 1.0 };
            let hg: f64 = mu * tangential.iter().zip(e_theta).map(|(x, y)| x * y).sum::<f64>();
            assert!((hg - geodesic_curvature(&cap, r)).abs() < 1e-5, "{hg}");
        }
    }

    #[test]
    fn indicator_coefficients() {
        let eq = chi_legendre(&CapSet::single(Cap::north(PI / 2.0)).unwrap(), 40);
        for l in (2..=40).step_by(2) {
            assert!(eq.coeffs[l].abs() < 1e-15);
        }
        for caps in [CapSet::single(Cap::north(0.8)).unwrap(), CapSet::two(0.5, 1.2).unwrap()] {
            let c = chi_legendre(&caps, 10);
            assert!((c.coeffs[0] / (4.0 * PI).sqrt() - cap_alpha(&caps)).abs() < 1e-15);
        }
        let t0 = 0.8f64;
        let c = chi_legendre(&CapSet::single(Cap::north(t0)).unwrap(), 4);
        let y10 = (3.0 / (4.0 * PI)).sqrt();
        assert!((c.coeffs[1] / y10 - 2.0 * PI * t0.sin().powi(2)).abs() < 1e-14);
        // south cap mirrors the north cap
        let s = chi_legendre(&CapSet::single(Cap::south(t0)).unwrap(), 9);
        let n = chi_legendre(&CapSet::single(Cap::north(t0)).unwrap(), 9);
        for l in 0..=9 {
            let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
            assert!((s.coeffs[l] - sign * n.coeffs[l]).abs() < 1e-15);
        }
    }

    #[test]
    fn indicator_coefficients_match_dense_quadrature() {
        // oracle: midpoint rule in θ with the cell straddling γ split exactly
        let caps = CapSet::two(0.7, 1.0).unwrap();
        let c = chi_legendre(&caps, 12);
        for l in [0usize, 1, 2, 5, 12] {
            let n = 400_000;
            let h = PI / n as f64;
            let norm = ((2 * l + 1) as f64 / (4.0 * PI)).sqrt();
            let q: f64 = (0..n)
                .map(|i| {
                    let t = (i as f64 + 0.5) * h;
                    let p = legendre_values(l, t.cos())[l];
                    2.0 * PI * caps.indicator(t) * norm * p * t.sin() * h
                })
                .sum();
            assert!((q - c.coeffs[l]).abs() < 1e-5, "l={l}");
        }
    }

    #[test]
    fn indicator_coefficients_match_grid_analysis_at_low_degree() {
        let caps = CapSet::single(Cap::north(PI / 2.0)).unwrap();
        let g = GridSpec::zonal(1.0, 1024, 2.0).build().unwrap();
        let grid = AxisymField::from_spectral(&caps.sample(&g).analyze().unwrap());
        let exact = chi_legendre(&caps, 1024);
        for l in 0..=16 {
            assert!((grid.coeffs[l] - exact.coeffs[l]).abs() < 1e-5, "l={l}");
        }
    }

    #[test]
    fn series_energy_limits() {
        let p = ModelParams { coupling: 1e-9, ..params() };
        let caps = CapSet::two(0.5, 1.0).unwrap();
        let e = sharp_energy_series(&caps, &p, 256);
        assert!((e.total - C_W * p.line_tension * cap_perimeter(&caps, p.radius)).abs() < 1e-12);
        let p = params();
        let values: Vec<f64> =
            [64, 128, 256, 512, 1024].iter().map(|&l| sharp_energy_series(&caps, &p, l).total).collect();
        let diffs: Vec<f64> = values.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
        assert!(diffs.windows(2).all(|d| d[1] < d[0]), "{diffs:?}");
        let e = sharp_energy_series(&caps, &p, 512);
        let reference = sharp_energy_series(&caps, &p, 1 << 15).total;
        assert!((e.total - reference).abs() < 3.0 * e.tail_estimate);
        assert!((e.total - reference).abs() > 0.3 * e.tail_estimate);
    }

    #[test]
    fn series_and_grid_energies_agree_within_sampling_error() {
        let p = params();
        let caps = CapSet::two(0.6, 0.9).unwrap();
        let series = sharp_energy_series(&caps, &p, 1 << 14).total;
        let errs: Vec<f64> = [128, 512]
            .iter()
            .map(|&l| {
                let g = GridSpec::zonal(p.radius, l, 2.0).build().unwrap();
                (energy_sharp_reduced(&caps, &g, &p).unwrap() - series).abs() / series
            })
            .collect();
        // sampling χ at the nodes shifts each interface by up to half a cell
        assert!(errs[0] < 1.0 / 258.0 && errs[1] < 1.0 / 1026.0, "{errs:?}");
    }

    #[test]
    fn forces_are_energy_derivatives() {
        let p = params();
        let l = 1 << 14;
        for caps in [CapSet::two(0.6, 1.1).unwrap(), CapSet::single(Cap::south(0.9)).unwrap()] {
            let f = interface_forces(&caps, &p, l);
            for (i, cap) in caps.caps().iter().enumerate() {
                let h = 1e-5;
                let shifted = |d: f64| {
                    let mut moved = caps.caps().to_vec();
                    moved[i].theta0 = cap.theta0 + d;
                    sharp_energy_series(&CapSet::new(moved).unwrap(), &p, l).total
                };
                let fd = (shifted(h) - shifted(-h)) / (2.0 * h);
                let analytic = f[i] * cap.perimeter(p.radius) * p.radius;
                assert!((fd - analytic).abs() < 1e-5 * analytic.abs().max(1.0), "{fd} vs {analytic}");
            }
        }
    }

    #[test]
    fn laplacian_trace_sum_matches_one_sided_series_values() {
        let p = params();
        let caps = CapSet::single(Cap::north(0.9)).unwrap();
        let l = 16_384;
        let u = height_series(&caps, &p, l);
        // an exponential filter suppresses the Gibbs oscillation at the jump
        let lap = u.map_degree(|k| {
            let s = k as f64 / l as f64;
            -((k * (k + 1)) as f64) / (p.radius * p.radius) * (-36.0 * s.powi(16)).exp()
        });
        let traces = interface_traces(&caps, &p, l);
        // one-sided values a fixed distance away, linearly extrapolated
        let side = |dir: f64| {
            let v = |d: f64| lap.eval(0.9 + dir * d);
            3.0 * v(0.01) - 3.0 * v(0.02) + v(0.03)
        };
        let sum = side(-1.0) + side(1.0);
        assert!((sum - traces[0].laplacian_sum).abs() < 1e-4, "{sum} vs {:?}", traces[0]);
        let jump = side(-1.0) - side(1.0);
        assert!((jump + 2.0 * p.coupling).abs() < 1e-4, "{jump}");
    }

    #[test]
    fn symmetric_and_single_caps_are_stationary() {
        let p = params();
        let v = interface_velocities(&CapSet::two(0.8, 0.8).unwrap(), &p, 4096);
        assert!(v.iter().all(|x| x.abs() < 1e-8), "{v:?}");
        let v = interface_velocities(&CapSet::single(Cap::north(0.8)).unwrap(), &p, 4096);
        assert!(v[0].abs() < 1e-15);
        let traj = two_cap_flow(&CapSet::two(0.8, 0.8).unwrap(), &p, 0.01, 0.5, &TwoCapOptions::default()).unwrap();
        let last = traj.samples.last().unwrap();
        assert!((last.theta[0] - 0.8).abs() < 1e-8 && (last.theta[1] - 0.8).abs() < 1e-8);
    }

    #[test]
    fn unequal_caps_ripen_with_energy_decrease_and_area_conservation() {
        let p = ModelParams { coupling: 1e-3, ..params() };
        let caps = CapSet::two(0.5, 0.9).unwrap();
        let opts = TwoCapOptions { l_max: 4096, ..Default::default() };
        let traj = two_cap_flow(&caps, &p, 0.01, 0.1, &opts).unwrap();
        assert_eq!(traj.status, TwoCapStatus::Completed);
        let first = &traj.samples[0];
        let last = traj.samples.last().unwrap();
        assert!(last.theta[0] < first.theta[0] && last.theta[1] > first.theta[1]);
        let area = |th: &[f64]| (1.0 - th[0].cos()) + (1.0 - th[1].cos());
        assert!((area(&last.theta) - area(&first.theta)).abs() < 1e-6 * last.t);
        for w in traj.samples.windows(2) {
            assert!(w[1].energy <= w[0].energy + 1e-13 * w[0].energy.abs());
        }
    }

    #[test]
    fn small_caps_vanish() {
        let p = ModelParams { coupling: 1e-3, ..params() };
        let caps = CapSet::two(0.05, 1.2).unwrap();
        let opts = TwoCapOptions { l_max: 2048, ..Default::default() };
        let traj = two_cap_flow(&caps, &p, 1e-4, 10.0, &opts).unwrap();
        assert_eq!(traj.status, TwoCapStatus::Vanished);
    }

    #[test]
    fn jumps_of_tanh_states() {
        let caps = CapSet::single(Cap::north(1.0)).unwrap();
        let g = GridSpec::zonal(1.0, 2048, 2.0).build().unwrap();
        let mut previous: Option<Jumps> = None;
        for eps in [0.02, 0.01, 0.005] {
            let p = ModelParams { epsilon: eps, alpha: -(1.0f64.cos()), ..Default::default() };
            let phi = tanh_caps(&g, &caps, &p).unwrap();
            let u = green_of_projection(&phi, &p);
            let j = jump_extract(&phi, &u, &p, &JumpOptions::default()).unwrap();
            assert!((j.theta - 1.0).abs() < 1e-3);
            assert!((j.jump_lap / (-2.0 * p.coupling) - 1.0).abs() < 0.02, "{j:?}");
            if let Some(prev) = previous {
                // the outer height jump is O(ε²)
                assert!(j.jump_u.abs() < 0.35 * prev.jump_u.abs(), "{prev:?} {j:?}");
            }
            previous = Some(j);
        }
        let j = previous.unwrap();
        assert!(j.jump_u.abs() < 1e-3 * j.u_scale, "{j:?}");
        assert!(j.jump_grad.abs() < 1e-3, "{j:?}");
        let p = ModelParams::default();
        let flat = SpectralField::constant(&g, 0.3);
        assert!(matches!(jump_extract(&flat, &flat, &p, &JumpOptions::default()), Err(Error::InterfaceNotFound)));
    }

    #[test]
    fn tanh_fit_recovers_width() {
        let p = ModelParams { epsilon: 0.05, alpha: -(0.9f64.cos()), ..Default::default() };
        let g = GridSpec::zonal(1.0, 512, 2.0).build().unwrap();
        let phi = tanh_caps(&g, &CapSet::single(Cap::north(0.9)).unwrap(), &p).unwrap();
        let fit = fit_tanh_profile(&phi, p.epsilon, 3.0 * p.epsilon).unwrap();
        assert!((fit.eps_hat / p.epsilon - 1.0).abs() < 0.02, "{fit:?}");
        assert!((fit.r0 - 0.9).abs() < 1e-2);
    }

    #[test]
    fn axisym_field_round_trip() {
        let g = build_grid(1.0, 16, 2.0).unwrap();
        let c = chi_legendre(&CapSet::single(Cap::north(1.0)).unwrap(), 16);
        let s = c.to_spectral(&g);
        assert_eq!(AxisymField::from_spectral(&s), c);
        assert!((s.eval(0.4, 1.0) - c.eval(0.4)).abs() < 1e-13);
    }
}
