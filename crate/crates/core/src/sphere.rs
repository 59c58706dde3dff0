//! Sphere grids, real spherical-harmonic transforms and the Laplace–Beltrami
//! operator on a sphere of radius `R`.
//!
//! Harmonics are real and orthonormal over the *unit* sphere; every surface
//! integral carries an explicit `R²`. Coefficients of a [`SpectralField`] are
//! stored order-major: the zonal block `(l, 0)` for `l = 0..=L`, then for each
//! `m = 1..=M` a cosine block `(l, m)` followed by a sine block `(l, -m)`, both
//! for `l = m..=L`. `M` is the grid's order truncation (normally `M = L`).
//!
//! Transforms are deterministic for any thread count: each output value is
//! accumulated by exactly one task in a fixed order (rings ascending in the
//! Legendre sums, degrees ascending in the syntheses).

use std::f64::consts::PI;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::legendre::{assoc_column, gauss_legendre, zonal_values_and_dtheta};

/// Parameters that fully determine a [`SphereGrid`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub radius: f64,
    pub l_max: usize,
    #[serde(default = "default_oversample")]
    pub oversample: f64,
    /// Largest longitudinal order kept; `None` means `l_max`.
    #[serde(default)]
    pub max_order: Option<usize>,
}

fn default_oversample() -> f64 {
    2.0
}

impl GridSpec {
    pub fn new(radius: f64, l_max: usize, oversample: f64) -> Self {
        Self { radius, l_max, oversample, max_order: None }
    }

    /// Grid restricted to axisymmetric (`m = 0`) fields.
    pub fn zonal(radius: f64, l_max: usize, oversample: f64) -> Self {
        Self { radius, l_max, oversample, max_order: Some(0) }
    }

    pub fn build(&self) -> Result<Arc<SphereGrid>> {
        SphereGrid::build(*self)
    }
}

/// Gauss–Legendre (colatitude) × equispaced (longitude) grid with cached
/// Legendre tables and FFT plans. Immutable after construction.
pub struct SphereGrid {
    spec: GridSpec,
    max_order: usize,
    n_theta: usize,
    n_phi: usize,
    cos_theta: Vec<f64>,
    theta: Vec<f64>,
    weights: Vec<f64>,
    /// `block_start[m]` is the storage offset of the cosine block of order `m`.
    block_start: Vec<usize>,
    n_coeffs: usize,
    degree: Vec<usize>,
    /// `table[m][j * (L - m + 1) + (l - m)] = leg(l, m, cos θ_j)` for the
    /// northern rings `j < ceil(n_theta / 2)`; southern rows follow from parity.
    table: Vec<Vec<f64>>,
    fft_forward: Arc<dyn Fft<f64>>,
    fft_inverse: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for SphereGrid {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SphereGrid")
            .field("spec", &self.spec)
            .field("n_theta", &self.n_theta)
            .field("n_phi", &self.n_phi)
            .finish()
    }
}

/// Builds a grid for radius `R`, truncation `L` and oversampling factor.
pub fn build_grid(radius: f64, l_max: usize, oversample: f64) -> Result<Arc<SphereGrid>> {
    SphereGrid::build(GridSpec::new(radius, l_max, oversample))
}

impl SphereGrid {
    pub fn build(spec: GridSpec) -> Result<Arc<SphereGrid>> {
        let l_max = spec.l_max;
        if l_max < 2 {
            return Err(Error::InvalidGrid(format!(
                "l_max = {l_max}: need l_max >= 2 to represent any field orthogonal to span{{1, nu_i}}"
            )));
        }
        if !(spec.oversample >= 1.0) || !spec.oversample.is_finite() {
            return Err(Error::InvalidGrid(format!("oversample = {} must be >= 1", spec.oversample)));
        }
        if !(spec.radius > 0.0) || !spec.radius.is_finite() {
            return Err(Error::InvalidGrid(format!("radius = {} must be positive", spec.radius)));
        }
        let max_order = spec.max_order.unwrap_or(l_max);
        if max_order > l_max {
            return Err(Error::InvalidGrid(format!("max_order = {max_order} exceeds l_max = {l_max}")));
        }
        let n_theta = (spec.oversample * (l_max + 1) as f64 - 1e-9).ceil() as usize;
        // truncated grids only need to resolve orders up to max_order in longitude
        let min_phi = (spec.oversample * (2 * max_order + 1) as f64 - 1e-9).ceil() as usize;
        let n_phi = min_phi + (min_phi % 2);

        let (cos_theta, weights) = gauss_legendre(n_theta);
        let theta: Vec<f64> = cos_theta.iter().map(|x| x.acos()).collect();

        let mut block_start = Vec::with_capacity(max_order + 1);
        let mut degree = Vec::new();
        let mut off = 0;
        for m in 0..=max_order {
            block_start.push(off);
            let reps = if m == 0 { 1 } else { 2 };
            for _ in 0..reps {
                degree.extend(m..=l_max);
            }
            off += reps * (l_max - m + 1);
        }

        let table: Vec<Vec<f64>> = (0..=max_order)
            .into_par_iter()
            .map(|m| {
                let len = l_max - m + 1;
                let mut t = vec![0.0; n_theta.div_ceil(2) * len];
                for (j, chunk) in t.chunks_mut(len).enumerate() {
                    assoc_column(l_max, m, cos_theta[j], chunk);
                }
                t
            })
            .collect();

        let mut planner = FftPlanner::new();
        let fft_forward = planner.plan_fft_forward(n_phi);
        let fft_inverse = planner.plan_fft_inverse(n_phi);

        Ok(Arc::new(SphereGrid {
            spec,
            max_order,
            n_theta,
            n_phi,
            cos_theta,
            theta,
            weights,
            block_start,
            n_coeffs: off,
            degree,
            table,
            fft_forward,
            fft_inverse,
        }))
    }

    pub fn spec(&self) -> GridSpec {
        self.spec
    }
    pub fn radius(&self) -> f64 {
        self.spec.radius
    }
    pub fn l_max(&self) -> usize {
        self.spec.l_max
    }
    pub fn max_order(&self) -> usize {
        self.max_order
    }
    pub fn n_theta(&self) -> usize {
        self.n_theta
    }
    pub fn n_phi(&self) -> usize {
        self.n_phi
    }
    /// Colatitudes of the rings, strictly increasing in `(0, π)`.
    pub fn colatitudes(&self) -> &[f64] {
        &self.theta
    }
    pub fn cos_colatitudes(&self) -> &[f64] {
        &self.cos_theta
    }
    /// Gauss weights in `cos θ`.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
    pub fn longitude(&self, k: usize) -> f64 {
        2.0 * PI * k as f64 / self.n_phi as f64
    }
    pub fn n_coeffs(&self) -> usize {
        self.n_coeffs
    }
    /// Degree `l` of every storage slot.
    pub fn degrees(&self) -> &[usize] {
        &self.degree
    }
    pub fn area(&self) -> f64 {
        4.0 * PI * self.spec.radius * self.spec.radius
    }

    /// Storage index of `(l, m)`, `None` outside the truncation.
    pub fn index(&self, l: usize, m: i64) -> Option<usize> {
        let am = m.unsigned_abs() as usize;
        if l > self.spec.l_max || am > l || am > self.max_order {
            return None;
        }
        let start = self.block_start[am];
        Some(if m >= 0 { start + (l - am) } else { start + (self.spec.l_max - am + 1) + (l - am) })
    }

    fn same(&self, other: &SphereGrid) -> bool {
        std::ptr::eq(self, other) || self.spec == other.spec
    }

    fn check(&self, other: &SphereGrid) -> Result<()> {
        if self.same(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch)
        }
    }
}

/// Real spherical-harmonic coefficients on a grid.
#[derive(Clone)]
pub struct SpectralField {
    grid: Arc<SphereGrid>,
    coeffs: Vec<f64>,
}

impl fmt::Debug for SpectralField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SpectralField").field("grid", &self.grid.spec).finish()
    }
}

impl SpectralField {
    pub fn zeros(grid: &Arc<SphereGrid>) -> Self {
        Self { grid: grid.clone(), coeffs: vec![0.0; grid.n_coeffs] }
    }

    pub fn from_coeffs(grid: &Arc<SphereGrid>, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != grid.n_coeffs {
            return Err(Error::InvalidGrid(format!("expected {} coefficients, got {}", grid.n_coeffs, coeffs.len())));
        }
        Ok(Self { grid: grid.clone(), coeffs })
    }

    /// The constant function `c`.
    pub fn constant(grid: &Arc<SphereGrid>, c: f64) -> Self {
        let mut f = Self::zeros(grid);
        f.coeffs[0] = c * (4.0 * PI).sqrt();
        f
    }

    pub fn grid(&self) -> &Arc<SphereGrid> {
        &self.grid
    }
    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }
    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }
    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn get(&self, l: usize, m: i64) -> f64 {
        self.grid.index(l, m).map_or(0.0, |i| self.coeffs[i])
    }

    /// Sets `(l, m)`; panics if the mode is outside the truncation.
    pub fn set(&mut self, l: usize, m: i64, v: f64) {
        let i = self.grid.index(l, m).unwrap_or_else(|| panic!("mode ({l}, {m}) outside truncation"));
        self.coeffs[i] = v;
    }

    /// Mean value over the sphere.
    pub fn mean(&self) -> f64 {
        self.coeffs[0] / (4.0 * PI).sqrt()
    }

    /// Applies a degree-dependent multiplier `f(l)` to every coefficient.
    pub fn map_degree(&self, f: impl Fn(usize) -> f64) -> Self {
        let coeffs = self.coeffs.iter().zip(&self.grid.degree).map(|(c, &l)| c * f(l)).collect();
        Self { grid: self.grid.clone(), coeffs }
    }

    pub fn scale(&self, c: f64) -> Self {
        self.map_degree(|_| c)
    }

    /// `self + a * other`
    pub fn axpy(&self, a: f64, other: &SpectralField) -> Result<Self> {
        self.grid.check(&other.grid)?;
        let coeffs = self.coeffs.iter().zip(&other.coeffs).map(|(x, y)| x + a * y).collect();
        Ok(Self { grid: self.grid.clone(), coeffs })
    }

    /// `∫_Γ self · other dΓ`
    pub fn inner(&self, other: &SpectralField) -> Result<f64> {
        self.grid.check(&other.grid)?;
        let r2 = self.grid.radius() * self.grid.radius();
        Ok(r2 * self.coeffs.iter().zip(&other.coeffs).map(|(x, y)| x * y).sum::<f64>())
    }

    pub fn norm_sq(&self) -> f64 {
        let r2 = self.grid.radius() * self.grid.radius();
        r2 * self.coeffs.iter().map(|c| c * c).sum::<f64>()
    }

    pub fn max_abs_coeff(&self) -> f64 {
        self.coeffs.iter().fold(0.0f64, |a, c| a.max(c.abs()))
    }

    /// Largest absolute coefficient of degree `<= lmax`.
    pub fn max_abs_coeff_up_to(&self, lmax: usize) -> f64 {
        self.coeffs.iter().zip(&self.grid.degree).filter(|(_, &l)| l <= lmax).fold(0.0f64, |a, (c, _)| a.max(c.abs()))
    }

    pub fn synthesize(&self) -> GridField {
        synthesize(self)
    }

    /// Point value at colatitude `theta`, longitude `phi`.
    pub fn eval(&self, theta: f64, phi: f64) -> f64 {
        let g = &self.grid;
        let lmax = g.l_max();
        let x = theta.cos();
        let mut col = vec![0.0; lmax + 1];
        let mut sum = 0.0;
        for m in 0..=g.max_order {
            let len = lmax - m + 1;
            assoc_column(lmax, m, x, &mut col[..len]);
            let start = g.block_start[m];
            let c: f64 = (0..len).map(|i| self.coeffs[start + i] * col[i]).sum();
            if m == 0 {
                sum += c;
            } else {
                let s: f64 = (0..len).map(|i| self.coeffs[start + len + i] * col[i]).sum();
                let mf = m as f64;
                sum += c * (mf * phi).cos() + s * (mf * phi).sin();
            }
        }
        sum
    }

    /// Longitudinal mean `f̄(θ)` and its colatitude derivative.
    pub fn eval_zonal(&self, theta: f64) -> (f64, f64) {
        let lmax = self.grid.l_max();
        let (y, dy) = zonal_values_and_dtheta(lmax, theta);
        let mut f = 0.0;
        let mut df = 0.0;
        for l in 0..=lmax {
            f += self.coeffs[l] * y[l];
            df += self.coeffs[l] * dy[l];
        }
        (f, df)
    }

    /// Rotation about the polar axis by `angle`: `g(θ, φ) = f(θ, φ - angle)`.
    pub fn rotate_z(&self, angle: f64) -> Self {
        let g = &self.grid;
        let lmax = g.l_max();
        let mut out = self.clone();
        for m in 1..=g.max_order {
            let len = lmax - m + 1;
            let start = g.block_start[m];
            let (s, c) = (m as f64 * angle).sin_cos();
            for i in 0..len {
                let a = self.coeffs[start + i];
                let b = self.coeffs[start + len + i];
                out.coeffs[start + i] = a * c - b * s;
                out.coeffs[start + len + i] = a * s + b * c;
            }
        }
        out
    }
}

impl Add for &SpectralField {
    type Output = SpectralField;
    fn add(self, rhs: &SpectralField) -> SpectralField {
        self.axpy(1.0, rhs).expect("grid mismatch in addition")
    }
}

impl Sub for &SpectralField {
    type Output = SpectralField;
    fn sub(self, rhs: &SpectralField) -> SpectralField {
        self.axpy(-1.0, rhs).expect("grid mismatch in subtraction")
    }
}

impl Mul<f64> for &SpectralField {
    type Output = SpectralField;
    fn mul(self, rhs: f64) -> SpectralField {
        self.scale(rhs)
    }
}

impl Neg for &SpectralField {
    type Output = SpectralField;
    fn neg(self) -> SpectralField {
        self.scale(-1.0)
    }
}

/// Point values on the grid, ring-major (`values[j * n_phi + k]`).
#[derive(Clone)]
pub struct GridField {
    grid: Arc<SphereGrid>,
    values: Vec<f64>,
}

impl fmt::Debug for GridField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("GridField").field("grid", &self.grid.spec).finish()
    }
}

impl GridField {
    pub fn zeros(grid: &Arc<SphereGrid>) -> Self {
        Self { grid: grid.clone(), values: vec![0.0; grid.n_theta * grid.n_phi] }
    }

    pub fn from_values(grid: &Arc<SphereGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_theta * grid.n_phi {
            return Err(Error::InvalidGrid(format!(
                "expected {} grid values, got {}",
                grid.n_theta * grid.n_phi,
                values.len()
            )));
        }
        Ok(Self { grid: grid.clone(), values })
    }

    /// Samples `f(θ, φ)` at every node.
    pub fn from_fn(grid: &Arc<SphereGrid>, f: impl Fn(f64, f64) -> f64) -> Self {
        let n_phi = grid.n_phi;
        let mut values = vec![0.0; grid.n_theta * n_phi];
        for (j, ring) in values.chunks_mut(n_phi).enumerate() {
            let th = grid.theta[j];
            for (k, v) in ring.iter_mut().enumerate() {
                *v = f(th, grid.longitude(k));
            }
        }
        Self { grid: grid.clone(), values }
    }

    pub fn grid(&self) -> &Arc<SphereGrid> {
        &self.grid
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn map(&self, f: impl Fn(f64) -> f64 + Sync) -> Self {
        Self { grid: self.grid.clone(), values: self.values.iter().map(|&v| f(v)).collect() }
    }

    /// Pointwise combination of two fields on the same grid.
    pub fn zip_map(&self, other: &GridField, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.grid.check(&other.grid)?;
        let values = self.values.iter().zip(&other.values).map(|(&a, &b)| f(a, b)).collect();
        Ok(Self { grid: self.grid.clone(), values })
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |a, v| a.max(v.abs()))
    }

    pub fn integrate(&self) -> f64 {
        integrate(self)
    }

    pub fn analyze(&self) -> Result<SpectralField> {
        analyze(self)
    }

    /// Rotation about the polar axis by whole grid columns.
    pub fn rotate_columns(&self, shift: usize) -> Self {
        let n = self.grid.n_phi;
        let mut values = vec![0.0; self.values.len()];
        for (src, dst) in self.values.chunks(n).zip(values.chunks_mut(n)) {
            for k in 0..n {
                dst[(k + shift) % n] = src[k];
            }
        }
        Self { grid: self.grid.clone(), values }
    }

    pub(crate) fn same_grid(&self, other: &Arc<SphereGrid>) -> Result<()> {
        self.grid.check(other)
    }
}

/// `∫_Γ f dΓ` by Gauss–Legendre × trapezoid quadrature scaled by `R²`.
pub fn integrate(f: &GridField) -> f64 {
    let g = &f.grid;
    let dphi = 2.0 * PI / g.n_phi as f64;
    let r2 = g.radius() * g.radius();
    let total: f64 = f.values.chunks(g.n_phi).zip(&g.weights).map(|(ring, w)| w * ring.iter().sum::<f64>()).sum();
    total * dphi * r2
}

/// L²(Γ) projection of grid values onto the harmonic basis.
pub fn analyze(f: &GridField) -> Result<SpectralField> {
    let g = f.grid.clone();
    if let Some(pos) = f.values.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { ring: pos / g.n_phi, col: pos % g.n_phi });
    }
    let n_phi = g.n_phi;
    let n_theta = g.n_theta;
    let mo = g.max_order;
    let lmax = g.l_max();
    let dphi = 2.0 * PI / n_phi as f64;

    // fourier[j * (mo + 1) + m] = (Σ f cos(mφ) dφ, Σ f sin(mφ) dφ) on ring j
    let mut fourier = vec![(0.0, 0.0); n_theta * (mo + 1)];
    if mo == 0 {
        fourier.par_iter_mut().zip(f.values.par_chunks(n_phi)).for_each(|(out, ring)| {
            *out = (ring.iter().sum::<f64>() * dphi, 0.0);
        });
    } else {
        let fft = g.fft_forward.clone();
        fourier.par_chunks_mut(mo + 1).zip(f.values.par_chunks(n_phi)).for_each_init(
            || (vec![Complex::new(0.0, 0.0); n_phi], vec![Complex::new(0.0, 0.0); fft.get_inplace_scratch_len()]),
            |(buf, scratch), (out, ring)| {
                for (b, &v) in buf.iter_mut().zip(ring) {
                    *b = Complex::new(v, 0.0);
                }
                fft.process_with_scratch(buf, scratch);
                for (m, o) in out.iter_mut().enumerate() {
                    *o = (buf[m].re * dphi, -buf[m].im * dphi);
                }
            },
        );
    }

    let half = n_theta.div_ceil(2);
    let blocks: Vec<Vec<f64>> = (0..=mo)
        .into_par_iter()
        .map(|m| {
            let len = lmax - m + 1;
            let table = &g.table[m];
            let mut cos_part = vec![0.0; len];
            let mut sin_part = if m == 0 { Vec::new() } else { vec![0.0; len] };
            for j in 0..half {
                let mirror = n_theta - 1 - j;
                let (nc, ns) = fourier[j * (mo + 1) + m];
                let (sc, ss) = if mirror == j { (0.0, 0.0) } else { fourier[mirror * (mo + 1) + m] };
                let w = g.weights[j];
                let row = &table[j * len..(j + 1) * len];
                // parity: leg(l, m, -x) = (-1)^(l-m) leg(l, m, x)
                let pair = [w * (nc + sc), w * (nc - sc)];
                for (k, (c, p)) in cos_part.iter_mut().zip(row).enumerate() {
                    *c += pair[k & 1] * p;
                }
                if m > 0 {
                    let pair = [w * (ns + ss), w * (ns - ss)];
                    for (k, (c, p)) in sin_part.iter_mut().zip(row).enumerate() {
                        *c += pair[k & 1] * p;
                    }
                }
            }
            cos_part.extend(sin_part);
            cos_part
        })
        .collect();
    Ok(SpectralField { grid: g, coeffs: blocks.concat() })
}

/// Grid values of a band-limited field.
pub fn synthesize(a: &SpectralField) -> GridField {
    let g = a.grid.clone();
    let n_phi = g.n_phi;
    let mo = g.max_order;
    let lmax = g.l_max();
    let mut values = vec![0.0; g.n_theta * n_phi];

    let n_theta = g.n_theta;
    let half = n_theta.div_ceil(2);

    // per-ring Fourier amplitudes (a_m, b_m); northern ring and its mirror together
    let mut amps = vec![(0.0, 0.0); n_theta * (mo + 1)];
    type Amps = Vec<(f64, f64)>;
    let pairs: Vec<(Amps, Amps)> = (0..half)
        .into_par_iter()
        .map(|j| {
            let mut north = vec![(0.0, 0.0); mo + 1];
            let mut south = vec![(0.0, 0.0); mo + 1];
            for m in 0..=mo {
                let len = lmax - m + 1;
                let row = &g.table[m][j * len..(j + 1) * len];
                let start = g.block_start[m];
                let split = |c: &[f64]| {
                    let mut e = [0.0; 2];
                    for (k, (x, p)) in c.iter().zip(row).enumerate() {
                        e[k & 1] += x * p;
                    }
                    e
                };
                let ca = split(&a.coeffs[start..start + len]);
                let sa = if m == 0 { [0.0; 2] } else { split(&a.coeffs[start + len..start + 2 * len]) };
                north[m] = (ca[0] + ca[1], sa[0] + sa[1]);
                south[m] = (ca[0] - ca[1], sa[0] - sa[1]);
            }
            (north, south)
        })
        .collect();
    for (j, (north, south)) in pairs.into_iter().enumerate() {
        amps[j * (mo + 1)..(j + 1) * (mo + 1)].copy_from_slice(&north);
        let mirror = n_theta - 1 - j;
        if mirror != j {
            amps[mirror * (mo + 1)..(mirror + 1) * (mo + 1)].copy_from_slice(&south);
        }
    }

    if mo == 0 {
        values.par_chunks_mut(n_phi).zip(amps.par_iter()).for_each(|(ring, &(a0, _))| {
            ring.fill(a0);
        });
    } else {
        let fft = g.fft_inverse.clone();
        values.par_chunks_mut(n_phi).zip(amps.par_chunks(mo + 1)).for_each_init(
            || (vec![Complex::new(0.0, 0.0); n_phi], vec![Complex::new(0.0, 0.0); fft.get_inplace_scratch_len()]),
            |(buf, scratch), (ring, ab)| {
                buf.fill(Complex::new(0.0, 0.0));
                for (m, &(am, bm)) in ab.iter().enumerate() {
                    if m == 0 {
                        buf[0] = Complex::new(am, 0.0);
                    } else {
                        let z = Complex::new(0.5 * am, -0.5 * bm);
                        buf[m] = z;
                        buf[n_phi - m] = z.conj();
                    }
                }
                fft.process_with_scratch(buf, scratch);
                for (v, b) in ring.iter_mut().zip(buf.iter()) {
                    *v = b.re;
                }
            },
        );
    }
    GridField { grid: g, values }
}

/// Coefficient-wise multiplication by `-l(l+1)/R²`.
pub fn laplace_beltrami(a: &SpectralField) -> SpectralField {
    let r2 = a.grid.radius() * a.grid.radius();
    a.map_degree(|l| -((l * (l + 1)) as f64) / r2)
}

/// `∫_Γ |∇_Γ a|² dΓ = Σ l(l+1) â²` (Green's identity on a closed surface).
pub fn gradient_sq_integral(a: &SpectralField) -> f64 {
    a.coeffs.iter().zip(&a.grid.degree).map(|(c, &l)| (l * (l + 1)) as f64 * c * c).sum()
}
