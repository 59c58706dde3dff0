//! Gauss–Legendre quadrature and normalized associated Legendre functions.
//!
//! Associated Legendre functions are used without the Condon–Shortley phase
//! and are normalized so that `Y_lm = leg(l, m, cos θ) · T_m(φ)` is orthonormal
//! on the unit sphere, where `T_0 = 1`, `T_m = cos(mφ)` and `T_{-m} = sin(mφ)`.

use std::f64::consts::PI;

/// Gauss–Legendre nodes `x_i` (descending, so that `acos(x_i)` ascends) and
/// weights on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1);
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let half = n.div_ceil(2);
    for i in 0..half {
        let mut x = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_and_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-15 {
                let (_, d) = legendre_and_derivative(n, x);
                dp = d;
                break;
            }
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[i] = x;
        weights[i] = w;
        nodes[n - 1 - i] = -x;
        weights[n - 1 - i] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// `P_n(x)` and `P_n'(x)` by the three-term recurrence (|x| < 1).
pub fn legendre_and_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if n == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Unnormalized Legendre polynomials `P_0(x) ..= P_{lmax}(x)`.
pub fn legendre_values(lmax: usize, x: f64) -> Vec<f64> {
    let mut p = vec![0.0; lmax + 1];
    p[0] = 1.0;
    if lmax >= 1 {
        p[1] = x;
    }
    for l in 2..=lmax {
        let lf = l as f64;
        p[l] = ((2.0 * lf - 1.0) * x * p[l - 1] - (lf - 1.0) * p[l - 2]) / lf;
    }
    p
}

/// Sphere normalization factor for order `m` applied to functions that are
/// orthonormal on `[-1, 1]`.
fn order_factor(m: usize) -> f64 {
    if m == 0 {
        1.0 / (2.0 * PI).sqrt()
    } else {
        1.0 / PI.sqrt()
    }
}

/// Writes `leg(l, m, x)` for `l = m ..= lmax` into `out[l - m]`.
///
/// Seeds `q_mm` are built from `q_00 = 1/√2` by `q_mm = √((2m+1)/(2m)) sinθ q_{m-1,m-1}`
/// and the degree is raised with the standard normalized three-term recurrence.
pub fn assoc_column(lmax: usize, m: usize, x: f64, out: &mut [f64]) {
    debug_assert!(out.len() > lmax - m);
    let s = (1.0 - x * x).max(0.0).sqrt();
    let mut qmm = std::f64::consts::FRAC_1_SQRT_2;
    for k in 1..=m {
        let kf = k as f64;
        qmm *= ((2.0 * kf + 1.0) / (2.0 * kf)).sqrt() * s;
    }
    let f = order_factor(m);
    out[0] = qmm * f;
    if lmax == m {
        return;
    }
    let mf = m as f64;
    let mut q_prev = qmm;
    let mut q = (2.0 * mf + 3.0).sqrt() * x * qmm;
    out[1] = q * f;
    for l in (m + 2)..=lmax {
        let lf = l as f64;
        let a = ((4.0 * lf * lf - 1.0) / (lf * lf - mf * mf)).sqrt();
        let lm1 = lf - 1.0;
        let b = ((lm1 * lm1 - mf * mf) / (4.0 * lm1 * lm1 - 1.0)).sqrt();
        let next = a * (x * q - b * q_prev);
        q_prev = q;
        q = next;
        out[l - m] = q * f;
    }
}

/// Zonal orthonormal harmonics `Y_l0(x) = √((2l+1)/4π) P_l(x)` for `l ..= lmax`.
pub fn zonal_values(lmax: usize, x: f64) -> Vec<f64> {
    let mut out = vec![0.0; lmax + 1];
    assoc_column(lmax, 0, x, &mut out);
    out
}

/// Zonal harmonics and their colatitude derivatives `dY_l0/dθ` at `θ`.
pub fn zonal_values_and_dtheta(lmax: usize, theta: f64) -> (Vec<f64>, Vec<f64>) {
    let x = theta.cos();
    let s = theta.sin();
    let p = legendre_values(lmax, x);
    let mut y = vec![0.0; lmax + 1];
    let mut dy = vec![0.0; lmax + 1];
    for l in 0..=lmax {
        let norm = ((2.0 * l as f64 + 1.0) / (4.0 * PI)).sqrt();
        y[l] = norm * p[l];
        if l > 0 {
            // (x² - 1) P_l' = l (x P_l - P_{l-1}); dP/dθ = -sinθ P_l'
            let dpdx = l as f64 * (x * p[l] - p[l - 1]) / (x * x - 1.0);
            dy[l] = -s * dpdx * norm;
        }
    }
    (y, dy)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_point_rule_has_closed_form_nodes() {
        let (x, w) = gauss_legendre(2);
        let r = 1.0 / 3f64.sqrt();
        assert!((x[0] - r).abs() < 1e-15);
        assert!((x[1] + r).abs() < 1e-15);
        assert!((w[0] - 1.0).abs() < 1e-14 && (w[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn nodes_are_roots_and_weights_sum_to_two() {
        for n in [5, 17, 64, 257, 1026] {
            let (x, w) = gauss_legendre(n);
            let sum: f64 = w.iter().sum();
            assert!((sum - 2.0).abs() < 1e-13, "n={n} sum={sum}");
            for (i, &xi) in x.iter().enumerate() {
                // Newton correction at the returned node
                let (p, d) = legendre_and_derivative(n, xi);
                assert!((p / d).abs() < 1e-14, "n={n} i={i}");
                assert!(w[i] > 0.0);
                if i > 0 {
                    assert!(xi < x[i - 1]);
                }
            }
        }
    }

    #[test]
    fn quadrature_integrates_legendre_orthogonality() {
        let n = 20;
        let (x, w) = gauss_legendre(n);
        for l in 0..n {
            for k in 0..n {
                let s: f64 = x
                    .iter()
                    .zip(&w)
                    .map(|(&xi, &wi)| {
                        let p = legendre_values(n, xi);
                        wi * p[l] * p[k]
                    })
                    .sum();
                let exact = if l == k { 2.0 / (2.0 * l as f64 + 1.0) } else { 0.0 };
                assert!((s - exact).abs() < 1e-13);
            }
        }
    }

    #[test]
    fn low_degree_closed_forms() {
        let theta: f64 = 0.7;
        let x = theta.cos();
        let s = theta.sin();
        let mut col = vec![0.0; 3];
        assoc_column(2, 0, x, &mut col);
        assert!((col[0] - 0.5 / PI.sqrt()).abs() < 1e-15);
        assert!((col[1] - (3.0 / (4.0 * PI)).sqrt() * x).abs() < 1e-15);
        assert!((col[2] - (5.0 / (16.0 * PI)).sqrt() * (3.0 * x * x - 1.0)).abs() < 1e-15);
        let mut c1 = vec![0.0; 2];
        assoc_column(2, 1, x, &mut c1);
        // real Y_11 = √(3/4π) sinθ cosφ, no Condon–Shortley phase
        assert!((c1[0] - (3.0 / (4.0 * PI)).sqrt() * s).abs() < 1e-15);
        let mut c2 = vec![0.0; 1];
        assoc_column(2, 2, x, &mut c2);
        assert!((c2[0] - (15.0 / (16.0 * PI)).sqrt() * s * s).abs() < 1e-15);
    }

    #[test]
    fn zonal_derivative_matches_finite_difference() {
        let th = 1.1;
        let h = 1e-6;
        let (_, dy) = zonal_values_and_dtheta(12, th);
        let yp = zonal_values(12, (th + h).cos());
        let ym = zonal_values(12, (th - h).cos());
        for l in 0..=12 {
            let fd = (yp[l] - ym[l]) / (2.0 * h);
            assert!((fd - dy[l]).abs() < 1e-7, "l={l}");
        }
    }
}
