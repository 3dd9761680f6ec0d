//! Special functions for the modal sound-field machinery: spherical Bessel
//! and Hankel (second kind) functions, cylindrical Bessel functions,
//! associated Legendre functions, and spherical-harmonic normalization.
//!
//! Associated Legendre functions use the Condon–Shortley phase convention
//! throughout. In-plane modal sums only ever consume squared products
//! `P_n^{|m|}(0)^2`, so the phase cancels there; the convention still has to
//! be consistent and is documented here once.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Order/degree pair of a spherical-harmonic mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ModeIndex {
    pub n: u32,
    pub m: i32,
}

impl ModeIndex {
    /// Requires `|m| <= n`, as needed by any harmonic expansion.
    pub fn new(n: u32, m: i32) -> Result<Self> {
        if m.unsigned_abs() > n {
            return Err(Error::domain(format!(
                "mode index |m| = {} exceeds order n = {}",
                m.unsigned_abs(),
                n
            )));
        }
        Ok(ModeIndex { n, m })
    }
}

/// Spherical Bessel function of the first kind, `j_n(x)`, for `x >= 0`.
pub fn spherical_bessel_j(n: u32, x: f64) -> f64 {
    debug_assert!(x >= 0.0, "spherical_bessel_j requires x >= 0");
    spherical_bessel_j_seq(n, x)[n as usize]
}

/// All of `j_0(x) .. j_nmax(x)` in one pass.
///
/// Uses the closed forms for n = 0, 1 and a downward (Miller) recurrence
/// with rescaling for higher orders, which stays stable for n > x where the
/// upward recurrence blows up. Values that underflow the rescaled range are
/// flushed to zero; they are below 1e-250 relative to the anchor.
pub fn spherical_bessel_j_seq(nmax: u32, x: f64) -> Vec<f64> {
    let nmax = nmax as usize;
    let mut out = vec![0.0; nmax + 1];
    if x == 0.0 {
        out[0] = 1.0;
        return out;
    }
    let j0 = x.sin() / x;
    out[0] = j0;
    if nmax == 0 {
        return out;
    }
    let j1 = x.sin() / (x * x) - x.cos() / x;
    out[1] = j1;
    if nmax == 1 {
        return out;
    }

    if x > 1.5 * nmax as f64 {
        // Upward recurrence is stable while n stays well below x.
        for n in 1..nmax {
            out[n + 1] = (2 * n + 1) as f64 / x * out[n] - out[n - 1];
        }
        return out;
    }

    // Miller's downward recurrence from a padded start order.
    let start = nmax + 16 + (1.5 * x) as usize;
    let mut raw = vec![0.0; nmax + 1];
    let mut fp1 = 0.0_f64; // f_{k+1}, unnormalized
    let mut f = 1e-30_f64; // f_k
    for k in (0..=start).rev() {
        let fm1 = (2 * k + 3) as f64 / x * f - fp1;
        fp1 = f;
        f = fm1;
        if k <= nmax {
            raw[k] = f;
        }
        if f.abs() > 1e250 {
            fp1 *= 1e-250;
            f *= 1e-250;
            for v in raw.iter_mut() {
                *v *= 1e-250;
            }
        }
    }
    // Anchor on whichever of j0/j1 is better conditioned.
    let scale = if raw[0].abs() >= raw[1].abs() {
        j0 / raw[0]
    } else {
        j1 / raw[1]
    };
    for n in 2..=nmax {
        out[n] = raw[n] * scale;
    }
    out
}

/// Spherical Bessel function of the second kind (Neumann), `y_n(x)`, `x > 0`.
pub fn spherical_bessel_y(n: u32, x: f64) -> f64 {
    spherical_bessel_y_seq(n, x)[n as usize]
}

/// All of `y_0(x) .. y_nmax(x)`; the upward recurrence is stable for `y_n`.
pub fn spherical_bessel_y_seq(nmax: u32, x: f64) -> Vec<f64> {
    debug_assert!(x > 0.0, "spherical_bessel_y requires x > 0");
    let nmax = nmax as usize;
    let mut out = vec![0.0; nmax + 1];
    let (sin_x, cos_x) = x.sin_cos();
    out[0] = -cos_x / x;
    if nmax == 0 {
        return out;
    }
    out[1] = -cos_x / (x * x) - sin_x / x;
    for n in 1..nmax {
        out[n + 1] = (2 * n + 1) as f64 / x * out[n] - out[n - 1];
    }
    out
}

/// Spherical Hankel function of the second kind,
/// `h_n^{(2)}(x) = j_n(x) - i y_n(x)`.
///
/// Rejects `x = 0` (singular).
pub fn spherical_hankel2(n: u32, x: f64) -> Result<Complex64> {
    if x <= 0.0 {
        return Err(Error::domain(format!(
            "spherical_hankel2 requires x > 0, got {x}"
        )));
    }
    let j = spherical_bessel_j(n, x);
    let y = spherical_bessel_y(n, x);
    Ok(Complex64::new(j, -y))
}

/// `h_0^{(2)} .. h_nmax^{(2)}` at `x > 0`.
pub fn spherical_hankel2_seq(nmax: u32, x: f64) -> Result<Vec<Complex64>> {
    if x <= 0.0 {
        return Err(Error::domain(format!(
            "spherical_hankel2 requires x > 0, got {x}"
        )));
    }
    let j = spherical_bessel_j_seq(nmax, x);
    let y = spherical_bessel_y_seq(nmax, x);
    Ok(j.iter()
        .zip(y.iter())
        .map(|(&j, &y)| Complex64::new(j, -y))
        .collect())
}

/// Associated Legendre function `P_n^m(x)` with the Condon–Shortley phase,
/// for `0 <= m <= n` and `|x| <= 1`.
pub fn assoc_legendre(n: u32, m: u32, x: f64) -> Result<f64> {
    if m > n {
        return Err(Error::domain(format!(
            "assoc_legendre requires m <= n, got m = {m}, n = {n}"
        )));
    }
    if !(-1.0..=1.0).contains(&x) {
        return Err(Error::domain(format!(
            "assoc_legendre requires |x| <= 1, got {x}"
        )));
    }
    Ok(assoc_legendre_seq(m, n, x)[(n - m) as usize])
}

/// `P_m^m(x) .. P_nmax^m(x)` (index k holds `P_{m+k}^m`), Condon–Shortley.
///
/// Standard stable recurrence: seed `P_m^m`, lift to `P_{m+1}^m`, then walk
/// up in n.
pub fn assoc_legendre_seq(m: u32, nmax: u32, x: f64) -> Vec<f64> {
    debug_assert!(m <= nmax);
    let len = (nmax - m + 1) as usize;
    let mut out = Vec::with_capacity(len);
    // P_m^m = (-1)^m (2m-1)!! (1-x^2)^{m/2}
    let somx2 = ((1.0 - x) * (1.0 + x)).max(0.0).sqrt();
    let mut pmm = 1.0_f64;
    for k in 1..=m {
        pmm *= -((2 * k - 1) as f64) * somx2;
    }
    out.push(pmm);
    if nmax == m {
        return out;
    }
    let mut pm1 = pmm; // P_{n-1}^m
    let mut p = x * (2 * m + 1) as f64 * pmm; // P_{m+1}^m
    out.push(p);
    for n in (m + 2)..=nmax {
        let next = ((2 * n - 1) as f64 * x * p - (n + m - 1) as f64 * pm1) / (n - m) as f64;
        pm1 = p;
        p = next;
        out.push(p);
    }
    out
}

/// Spherical-harmonic normalization constant
/// `b_mn = sqrt((2n+1)/(4 pi) * (n-|m|)!/(n+|m|)!)`, for `|m| <= n`.
pub fn sh_norm(m: i32, n: u32) -> Result<f64> {
    let ma = m.unsigned_abs();
    if ma > n {
        return Err(Error::domain(format!(
            "sh_norm requires |m| <= n, got m = {m}, n = {n}"
        )));
    }
    // (n-|m|)!/(n+|m|)! = prod_{k=n-|m|+1}^{n+|m|} 1/k, evaluated without
    // forming either factorial.
    let mut ratio = 1.0_f64;
    for k in (n - ma + 1)..=(n + ma) {
        ratio /= k as f64;
    }
    Ok(((2 * n + 1) as f64 / (4.0 * std::f64::consts::PI) * ratio).sqrt())
}

/// Cylindrical Bessel function of the first kind, `J_n(x)`, `x >= 0`.
///
/// Power series for moderate arguments, Hankel asymptotic expansion beyond.
/// Used for envelope comparisons against the modal coefficients only.
pub fn cylindrical_bessel_j(n: u32, x: f64) -> f64 {
    debug_assert!(x >= 0.0, "cylindrical_bessel_j requires x >= 0");
    if x <= 16.0 {
        let half = 0.5 * x;
        // leading term (x/2)^n / n!
        let mut term = 1.0_f64;
        for k in 1..=n {
            term *= half / k as f64;
        }
        let mut sum = term;
        let q = -half * half;
        for k in 1..200 {
            term *= q / (k as f64 * (k + n) as f64);
            sum += term;
            if term.abs() < 1e-17 * sum.abs().max(1e-280) {
                break;
            }
        }
        sum
    } else {
        // Asymptotic form sqrt(2/(pi x)) (P cos(chi) - Q sin(chi)).
        let mu = 4.0 * (n as f64) * (n as f64);
        let w = 8.0 * x;
        let p = 1.0 - (mu - 1.0) * (mu - 9.0) / (2.0 * w * w)
            + (mu - 1.0) * (mu - 9.0) * (mu - 25.0) * (mu - 49.0) / (24.0 * w.powi(4));
        let q = (mu - 1.0) / w - (mu - 1.0) * (mu - 9.0) * (mu - 25.0) / (6.0 * w.powi(3));
        let chi = x - (0.5 * n as f64 + 0.25) * std::f64::consts::PI;
        (2.0 / (std::f64::consts::PI * x)).sqrt() * (p * chi.cos() - q * chi.sin())
    }
}
