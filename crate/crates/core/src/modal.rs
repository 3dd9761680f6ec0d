//! Circular-harmonic (modal) analysis of the quantities evoked on zone
//! contours by an in-plane point source: Fourier coefficients of the sound
//! pressure, of the radial pressure difference between two concentric
//! circles, and of the tangential pressure difference along one circle.
//!
//! The magnitude of such a coefficient measures how well the weighted sum
//! of all spherical-harmonic modes of one degree can be observed in that
//! contour quantity; local minima over frequency predict reproduction-error
//! peaks of control approaches built on the quantity.
//!
//! A note on the in-plane Legendre argument: for source and contour in the
//! z = 0 plane the colatitudes are pi/2, so every mode weight carries
//! `P_n^{|m|}(cos(pi/2)) = P_n^{|m|}(0)`. All sums below evaluate the
//! associated Legendre functions at zero.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::Medium;
use crate::special::{
    assoc_legendre_seq, sh_norm, spherical_bessel_j_seq, spherical_hankel2, spherical_hankel2_seq,
    ModeIndex,
};

/// Relative tolerance of the adaptive modal truncation.
const TRUNC_REL_TOL: f64 = 1e-12;
/// Number of consecutive below-tolerance terms required to stop.
const TRUNC_RUN: usize = 8;

/// In-plane point source at radius `r0` and azimuth `phi0`, relative to the
/// contour center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModalSource {
    pub r0: f64,
    pub phi0: f64,
}

/// A truncated modal sum: value plus the highest order actually used.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModalSum {
    pub value: Complex64,
    pub n_max_used: u32,
}

/// Which contour quantity a [`ModalSpectrum`] describes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CoeffKind {
    Pressure { radius: f64 },
    RadialDiff { r_in: f64, r_out: f64 },
    TangentialDiff { r_out: f64, delta_phi: f64 },
}

impl CoeffKind {
    pub fn label(&self) -> &'static str {
        match self {
            CoeffKind::Pressure { .. } => "pressure",
            CoeffKind::RadialDiff { .. } => "radial_diff",
            CoeffKind::TangentialDiff { .. } => "tangential_diff",
        }
    }
}

/// Fourier coefficients of one contour quantity over a frequency grid.
#[derive(Debug, Clone)]
pub struct ModalSpectrum {
    pub m: i32,
    pub kind: CoeffKind,
    pub source: ModalSource,
    pub freqs_hz: Vec<f64>,
    pub values: Vec<Complex64>,
    pub truncation: Vec<u32>,
}

impl ModalSpectrum {
    pub fn compute(
        m: i32,
        kind: CoeffKind,
        source: ModalSource,
        freqs_hz: &[f64],
        medium: &Medium,
    ) -> Result<Self> {
        let mut values = Vec::with_capacity(freqs_hz.len());
        let mut truncation = Vec::with_capacity(freqs_hz.len());
        for &f in freqs_hz {
            let omega = 2.0 * std::f64::consts::PI * f;
            let sum = match kind {
                CoeffKind::Pressure { radius } => {
                    fourier_coeff_pressure(m, radius, &source, omega, medium)?
                }
                CoeffKind::RadialDiff { r_in, r_out } => {
                    fourier_coeff_radial_diff(m, r_in, r_out, &source, omega, medium)?
                }
                CoeffKind::TangentialDiff { r_out, delta_phi } => {
                    fourier_coeff_tangential_diff(m, r_out, delta_phi, &source, omega, medium)?
                }
            };
            values.push(sum.value);
            truncation.push(sum.n_max_used);
        }
        Ok(ModalSpectrum {
            m,
            kind,
            source,
            freqs_hz: freqs_hz.to_vec(),
            values,
            truncation,
        })
    }
}

/// Hard cap of the modal truncation for wavenumber `k` and the largest
/// radius in play. Spherical Bessel terms decay super-exponentially past
/// n ~ e k r / 2, so the cap generously covers the oscillatory region.
fn truncation_cap(m: i32, k: f64, r_max: f64) -> u32 {
    let geometric = (std::f64::consts::E * k * r_max / 2.0).ceil() as u32 + 30;
    geometric.max(m.unsigned_abs() + 30)
}

/// Modal weight of an in-plane point source (unit frequency response):
/// `alpha_mn = -i k h_n^(2)(k r0) b_mn P_n^{|m|}(0) exp(-i m phi0)`.
pub fn modal_weight_point_source(
    mode: ModeIndex,
    r0: f64,
    phi0: f64,
    omega: f64,
    medium: &Medium,
) -> Result<Complex64> {
    if r0 <= 0.0 || omega <= 0.0 {
        return Err(Error::domain(
            "modal_weight_point_source requires r0 > 0 and omega > 0",
        ));
    }
    let k = medium.wavenumber(omega);
    let ma = mode.m.unsigned_abs();
    let h = spherical_hankel2(mode.n, k * r0)?;
    let b = sh_norm(mode.m, mode.n)?;
    let p = assoc_legendre_seq(ma, mode.n, 0.0)[(mode.n - ma) as usize];
    let rot = Complex64::from_polar(1.0, -(mode.m as f64) * phi0);
    Ok(-Complex64::i() * k * h * b * p * rot)
}

/// Shared driver for the pressure / radial-difference coefficient sums.
///
/// `gamma_j` supplies the radius-dependent spherical-Bessel factor per
/// order; everything else of the summand is the point-source modal weight.
fn fourier_sum(
    m: i32,
    source: &ModalSource,
    omega: f64,
    medium: &Medium,
    r_max: f64,
    gamma_j: impl Fn(usize) -> f64,
) -> Result<ModalSum> {
    if omega <= 0.0 {
        return Err(Error::domain("modal sums require omega > 0"));
    }
    let k = medium.wavenumber(omega);
    let ma = m.unsigned_abs();
    let cap = truncation_cap(m, k, source.r0.max(r_max));
    let h = spherical_hankel2_seq(cap, k * source.r0)?;
    let p_seq = assoc_legendre_seq(ma, cap, 0.0);
    let rot = Complex64::from_polar(1.0, -(m as f64) * source.phi0);

    // b_mn^2 for n = |m|, advanced by recurrence in the loop:
    // b_{m,n+1}^2 / b_{m,n}^2 = (2n+3)/(2n+1) * (n+1-|m|)/(n+1+|m|)
    let mut b2 = sh_norm(m, ma)?.powi(2);

    let mut sum = Complex64::ZERO;
    let mut small_run = 0usize;
    for n in ma..=cap {
        let idx = (n - ma) as usize;
        let bp2 = b2 * p_seq[idx] * p_seq[idx];
        let term = -Complex64::i() * k * h[n as usize] * gamma_j(n as usize) * bp2 * rot;
        sum += term;
        if term.norm() <= TRUNC_REL_TOL * sum.norm() {
            small_run += 1;
            if small_run >= TRUNC_RUN {
                return Ok(ModalSum {
                    value: sum,
                    n_max_used: n,
                });
            }
        } else {
            small_run = 0;
        }
        b2 *= (2 * n + 3) as f64 / (2 * n + 1) as f64 * (n + 1 - ma) as f64 / (n + 1 + ma) as f64;
    }
    Err(Error::ModalTruncation {
        m: m as i64,
        cap: cap as usize,
        omega,
    })
}

/// Fourier coefficient `a_m(R, omega)` of the sound pressure on a circle of
/// radius `R` evoked by the point source. Requires `R < r0`.
pub fn fourier_coeff_pressure(
    m: i32,
    radius: f64,
    source: &ModalSource,
    omega: f64,
    medium: &Medium,
) -> Result<ModalSum> {
    if !(radius > 0.0 && radius < source.r0) {
        return Err(Error::domain(format!(
            "pressure coefficient requires 0 < R < r0, got R = {radius}, r0 = {}",
            source.r0
        )));
    }
    let k = medium.wavenumber(omega.max(f64::MIN_POSITIVE));
    let cap = truncation_cap(m, k, source.r0.max(radius));
    let j = spherical_bessel_j_seq(cap, k * radius);
    fourier_sum(m, source, omega, medium, radius, |n| j[n])
}

/// Fourier coefficient of the radial pressure difference
/// `P(R_in) - P(R_out)` between two concentric circles. Requires
/// `R_in < R_out < r0`.
pub fn fourier_coeff_radial_diff(
    m: i32,
    r_in: f64,
    r_out: f64,
    source: &ModalSource,
    omega: f64,
    medium: &Medium,
) -> Result<ModalSum> {
    if !(r_in > 0.0 && r_in <= r_out && r_out < source.r0) {
        return Err(Error::domain(format!(
            "radial difference requires 0 < R_in <= R_out < r0, got {r_in}, {r_out}, {}",
            source.r0
        )));
    }
    let k = medium.wavenumber(omega.max(f64::MIN_POSITIVE));
    let cap = truncation_cap(m, k, source.r0.max(r_out));
    let j_in = spherical_bessel_j_seq(cap, k * r_in);
    let j_out = spherical_bessel_j_seq(cap, k * r_out);
    fourier_sum(m, source, omega, medium, r_out, |n| j_in[n] - j_out[n])
}

/// Fourier coefficient of the tangential pressure difference
/// `P(R_out, phi + delta_phi) - P(R_out, phi)`, which factors exactly as
/// `a_m(R_out) * (exp(i m delta_phi) - 1)`.
pub fn fourier_coeff_tangential_diff(
    m: i32,
    r_out: f64,
    delta_phi: f64,
    source: &ModalSource,
    omega: f64,
    medium: &Medium,
) -> Result<ModalSum> {
    if delta_phi <= 0.0 {
        return Err(Error::domain(
            "tangential difference requires delta_phi > 0",
        ));
    }
    let a = fourier_coeff_pressure(m, r_out, source, omega, medium)?;
    let factor = Complex64::from_polar(1.0, m as f64 * delta_phi) - Complex64::ONE;
    Ok(ModalSum {
        value: a.value * factor,
        n_max_used: a.n_max_used,
    })
}

/// In-plane spherical-harmonics expansion of the point-source pressure at
/// polar coordinates `(r, phi)` relative to the contour center. Converges
/// to the free-field Green's function for `r < r0`.
pub fn point_source_pressure_modal(
    r: f64,
    phi: f64,
    source: &ModalSource,
    omega: f64,
    medium: &Medium,
) -> Result<ModalSum> {
    if !(r >= 0.0 && r < source.r0) {
        return Err(Error::domain(format!(
            "interior expansion requires 0 <= r < r0, got r = {r}, r0 = {}",
            source.r0
        )));
    }
    if omega <= 0.0 {
        return Err(Error::domain("modal sums require omega > 0"));
    }
    let k = medium.wavenumber(omega);
    let cap = truncation_cap(0, k, source.r0.max(r));
    let h = spherical_hankel2_seq(cap, k * source.r0)?;
    let j = spherical_bessel_j_seq(cap, k * r);

    // P_n^m(0) for the full triangle m <= n <= cap.
    let p_table: Vec<Vec<f64>> = (0..=cap).map(|m| assoc_legendre_seq(m, cap, 0.0)).collect();

    let dphi = phi - source.phi0;
    let mut sum = Complex64::ZERO;
    let mut small_run = 0usize;
    for n in 0..=cap {
        // inner sum over degrees: b_mn^2 P_n^|m|(0)^2 exp(i m (phi - phi0)),
        // collapsed to a real cosine series by the +/-m symmetry
        let mut b2 = (2 * n + 1) as f64 / (4.0 * std::f64::consts::PI);
        let p0 = p_table[0][n as usize];
        let mut inner = b2 * p0 * p0;
        for m in 1..=n {
            b2 /= ((n + m) * (n - m + 1)) as f64;
            let p = p_table[m as usize][(n - m) as usize];
            inner += 2.0 * b2 * p * p * (m as f64 * dphi).cos();
        }
        let term = -Complex64::i() * k * h[n as usize] * j[n as usize] * inner;
        sum += term;
        if term.norm() <= TRUNC_REL_TOL * sum.norm() {
            small_run += 1;
            if small_run >= TRUNC_RUN {
                return Ok(ModalSum {
                    value: sum,
                    n_max_used: n,
                });
            }
        } else {
            small_run = 0;
        }
    }
    Err(Error::ModalTruncation {
        m: 0,
        cap: cap as usize,
        omega,
    })
}

/// A grid local minimum only counts when it dips at least this far below
/// the lower of its bracketing maxima. Filters out the sub-percent wiggles
/// the max-of-two-radii objective produces where the curves cross near
/// their broad maxima.
const MIN_PROMINENCE_RATIO: f64 = 0.8;

/// Scans `|a_m(f)|` (one radius) or `max{|a_m(R_in, f)|, |a_m(R_out, f)|}`
/// (two radii) over `[f_start, f_stop]` and returns the located local
/// minima, each refined by golden-section search to 0.1 Hz.
pub fn scan_observability(
    m: i32,
    radii: &[f64],
    f_start: f64,
    f_stop: f64,
    step: f64,
    source: &ModalSource,
    medium: &Medium,
) -> Result<Vec<f64>> {
    if step <= 0.0 || step.is_nan() {
        return Err(Error::domain("scan step must be positive"));
    }
    if radii.is_empty() || radii.len() > 2 {
        return Err(Error::domain("scan expects one or two radii"));
    }
    if f_start <= 0.0 || f_stop <= f_start {
        return Err(Error::domain(
            "scan range must satisfy 0 < f_start < f_stop",
        ));
    }
    let n_steps = ((f_stop - f_start) / step).floor() as usize;
    if n_steps < 2 {
        return Err(Error::domain(format!(
            "scan step {step} too large for range [{f_start}, {f_stop}]"
        )));
    }

    let objective = |f: f64| -> Result<f64> {
        let omega = 2.0 * std::f64::consts::PI * f;
        let mut mag = 0.0f64;
        for &r in radii {
            mag = mag.max(
                fourier_coeff_pressure(m, r, source, omega, medium)?
                    .value
                    .norm(),
            );
        }
        Ok(mag)
    };

    let mut grid = Vec::with_capacity(n_steps + 1);
    for i in 0..=n_steps {
        let f = f_start + i as f64 * step;
        grid.push((f, objective(f)?));
    }

    let candidates: Vec<usize> = (1..grid.len() - 1)
        .filter(|&i| grid[i].1 < grid[i - 1].1 && grid[i].1 < grid[i + 1].1)
        .collect();

    // prominence: compare each candidate against the largest values in the
    // segments separating it from its neighbor candidates (or range ends)
    let mut minima = Vec::new();
    for (c, &i) in candidates.iter().enumerate() {
        let lo = if c == 0 { 0 } else { candidates[c - 1] };
        let hi = if c + 1 == candidates.len() {
            grid.len() - 1
        } else {
            candidates[c + 1]
        };
        let left_peak = grid[lo..=i].iter().map(|g| g.1).fold(0.0, f64::max);
        let right_peak = grid[i..=hi].iter().map(|g| g.1).fold(0.0, f64::max);
        if grid[i].1 <= MIN_PROMINENCE_RATIO * left_peak.min(right_peak) {
            minima.push(golden_section_min(
                grid[i - 1].0,
                grid[i + 1].0,
                0.1,
                &objective,
            )?);
        }
    }
    Ok(minima)
}

/// Golden-section minimization of `f` on `[a, b]` down to interval `tol`.
fn golden_section_min(
    mut a: f64,
    mut b: f64,
    tol: f64,
    f: &impl Fn(f64) -> Result<f64>,
) -> Result<f64> {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let mut fc = f(c)?;
    let mut fd = f(d)?;
    while (b - a) > tol {
        if fc < fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d)?;
        }
    }
    Ok(0.5 * (a + b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{greens_function_3d, Point2};
    use crate::special::{assoc_legendre, spherical_bessel_j, spherical_hankel2};

    const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

    fn paper_source() -> ModalSource {
        ModalSource {
            r0: 2.5,
            phi0: std::f64::consts::PI,
        }
    }

    fn rel(a: Complex64, b: Complex64) -> f64 {
        (a - b).norm() / a.norm().max(b.norm()).max(1e-300)
    }

    /// Angular quadrature oracle: (1/2pi) \oint q(phi) e^{-i m phi} dphi by
    /// the trapezoidal rule (spectrally accurate for periodic integrands).
    fn quadrature_coeff(m: i32, q: impl Fn(f64) -> Complex64) -> Complex64 {
        const N: usize = 2048;
        let mut acc = Complex64::ZERO;
        for i in 0..N {
            let phi = TWO_PI * i as f64 / N as f64;
            acc += q(phi) * Complex64::from_polar(1.0, -(m as f64) * phi);
        }
        acc / N as f64
    }

    fn greens_on_circle(src: &ModalSource, radius: f64, phi: f64, omega: f64) -> Complex64 {
        let medium = Medium::default();
        let y = Point2::new(src.r0 * src.phi0.cos(), src.r0 * src.phi0.sin());
        let x = Point2::new(radius * phi.cos(), radius * phi.sin());
        greens_function_3d(y, x, omega, &medium).unwrap()
    }

    #[test]
    fn modal_weight_odd_legendre_vanishes() {
        let medium = Medium::default();
        let w = modal_weight_point_source(
            ModeIndex::new(1, 0).unwrap(),
            2.5,
            0.0,
            TWO_PI * 500.0,
            &medium,
        )
        .unwrap();
        assert_eq!(w, Complex64::ZERO);
    }

    #[test]
    fn modal_weight_composed_from_special_functions() {
        let medium = Medium::default();
        let omega = TWO_PI * 700.0;
        let k = medium.wavenumber(omega);
        let w = modal_weight_point_source(ModeIndex::new(1, 1).unwrap(), 2.5, 0.0, omega, &medium)
            .unwrap();
        let expect = -Complex64::i()
            * k
            * spherical_hankel2(1, k * 2.5).unwrap()
            * sh_norm(1, 1).unwrap()
            * assoc_legendre(1, 1, 0.0).unwrap();
        assert!(rel(w, expect) < 1e-14);

        // conjugate symmetry for phi0 = 0
        let wm =
            modal_weight_point_source(ModeIndex::new(3, -2).unwrap(), 2.5, 0.0, omega, &medium)
                .unwrap();
        let wp = modal_weight_point_source(ModeIndex::new(3, 2).unwrap(), 2.5, 0.0, omega, &medium)
            .unwrap();
        assert!(rel(wm, wp.conj()) < 1e-14);
    }

    #[test]
    fn pressure_coeff_matches_quadrature_oracle() {
        let medium = Medium::default();
        let src = paper_source();
        for &f in &[150.0, 437.0, 728.0, 1500.0, 4000.0] {
            let omega = TWO_PI * f;
            for m in [0i32, 1, 2, -3, 7] {
                let modal = fourier_coeff_pressure(m, 0.3, &src, omega, &medium).unwrap();
                let quad = quadrature_coeff(m, |phi| greens_on_circle(&src, 0.3, phi, omega));
                assert!(
                    rel(modal.value, quad) < 1e-6,
                    "a_{m} at {f} Hz: modal {:?} vs quadrature {:?}",
                    modal.value,
                    quad
                );
            }
        }
    }

    #[test]
    fn pressure_coeff_static_limit() {
        let medium = Medium::default();
        let src = paper_source();
        let omega = TWO_PI * 0.5; // quasi-static
        let a0 = fourier_coeff_pressure(0, 0.3, &src, omega, &medium).unwrap();
        // static-field quadrature of 1/(4 pi d); the dynamic coefficient
        // still carries a retardation phase, so compare magnitudes
        let quad = quadrature_coeff(0, |phi| {
            let d =
                (0.3f64.powi(2) + 2.5f64.powi(2) - 2.0 * 0.3 * 2.5 * (phi - src.phi0).cos()).sqrt();
            Complex64::new(1.0 / (4.0 * std::f64::consts::PI * d), 0.0)
        });
        assert!((a0.value.norm() - quad.re).abs() / quad.re < 1e-4);
        // approaches 1/(4 pi r0), within the small geometric correction
        let far = 1.0 / (4.0 * std::f64::consts::PI * 2.5);
        assert!((a0.value.norm() - far).abs() / far < 5e-3);
        let a1 = fourier_coeff_pressure(1, 0.3, &src, omega, &medium).unwrap();
        assert!(a1.value.norm() < 0.1 * a0.value.norm());
    }

    #[test]
    fn radial_diff_linearity_and_degeneracy() {
        let medium = Medium::default();
        let src = paper_source();
        let omega = TWO_PI * 728.0;
        for m in [0i32, 1, 4] {
            let zero = fourier_coeff_radial_diff(m, 0.3, 0.3, &src, omega, &medium).unwrap();
            assert_eq!(zero.value, Complex64::ZERO);

            let diff = fourier_coeff_radial_diff(m, 0.275, 0.3, &src, omega, &medium).unwrap();
            let a_in = fourier_coeff_pressure(m, 0.275, &src, omega, &medium).unwrap();
            let a_out = fourier_coeff_pressure(m, 0.3, &src, omega, &medium).unwrap();
            assert!(rel(diff.value, a_in.value - a_out.value) < 1e-10);

            let quad = quadrature_coeff(m, |phi| {
                greens_on_circle(&src, 0.275, phi, omega) - greens_on_circle(&src, 0.3, phi, omega)
            });
            assert!(rel(diff.value, quad) < 1e-6);
        }
    }

    #[test]
    fn radial_diff_dominates_at_first_pressure_minimum() {
        let medium = Medium::default();
        let src = paper_source();
        let omega = TWO_PI * 728.0;
        let diff = fourier_coeff_radial_diff(1, 0.275, 0.3, &src, omega, &medium).unwrap();
        let a_in = fourier_coeff_pressure(1, 0.275, &src, omega, &medium).unwrap();
        let a_out = fourier_coeff_pressure(1, 0.3, &src, omega, &medium).unwrap();
        assert!(diff.value.norm() > a_in.value.norm());
        assert!(diff.value.norm() > a_out.value.norm());
    }

    #[test]
    fn tangential_diff_identity_and_ratio() {
        let medium = Medium::default();
        let src = paper_source();
        let delta_phi = 0.025 / 0.3;
        for &f in &[300.0, 728.0, 2000.0, 4000.0] {
            let omega = TWO_PI * f;
            for m in 0..=10i32 {
                let tan =
                    fourier_coeff_tangential_diff(m, 0.3, delta_phi, &src, omega, &medium).unwrap();
                let a = fourier_coeff_pressure(m, 0.3, &src, omega, &medium).unwrap();
                if m == 0 {
                    assert_eq!(tan.value, Complex64::ZERO);
                    continue;
                }
                // |da_tan| = 2 |sin(m dphi / 2)| |a_m|
                let expect = 2.0 * (m as f64 * delta_phi / 2.0).sin().abs() * a.value.norm();
                assert!(
                    (tan.value.norm() - expect).abs() <= 1e-12 * expect,
                    "tangential magnitude identity failed at m={m}, f={f}"
                );
            }
        }
        // paper geometry, m = 1: ratio 2 sin(dphi/2) ~ 0.0833 << 1
        let omega = TWO_PI * 728.0;
        let tan = fourier_coeff_tangential_diff(1, 0.3, delta_phi, &src, omega, &medium).unwrap();
        let a = fourier_coeff_pressure(1, 0.3, &src, omega, &medium).unwrap();
        let ratio = tan.value.norm() / a.value.norm();
        assert!((ratio - 0.0833).abs() < 5e-4, "ratio = {ratio}");
    }

    /// The factored tangential coefficient equals the explicit modal sum
    /// with per-order gamma factors j_n b P (e^{i m dphi} - 1).
    #[test]
    fn tangential_diff_matches_term_by_term_sum() {
        let medium = Medium::default();
        let src = paper_source();
        let delta_phi = 0.025 / 0.3;
        let omega = TWO_PI * 1234.0;
        let k = medium.wavenumber(omega);
        for m in [1i32, 3, 10] {
            let factored =
                fourier_coeff_tangential_diff(m, 0.3, delta_phi, &src, omega, &medium).unwrap();
            let rot = Complex64::from_polar(1.0, -(m as f64) * src.phi0);
            let factor = Complex64::from_polar(1.0, m as f64 * delta_phi) - Complex64::ONE;
            let mut sum = Complex64::ZERO;
            for n in (m as u32)..(m as u32 + 80) {
                let b = sh_norm(m, n).unwrap();
                let p = assoc_legendre(n, m as u32, 0.0).unwrap();
                let alpha =
                    -Complex64::i() * k * spherical_hankel2(n, k * src.r0).unwrap() * b * p * rot;
                sum += alpha * spherical_bessel_j(n, k * 0.3) * b * p * factor;
            }
            assert!(
                rel(factored.value, sum) < 1e-12,
                "tangential factorization off at m={m}"
            );
        }
    }

    /// With the source at phi0 = 0 no summand depends on the sign of m, so
    /// a_{-m} = a_m exactly; the general rotation law ties a_{-m} at phi0 to
    /// a_m at -phi0.
    #[test]
    fn degree_symmetry() {
        let medium = Medium::default();
        let omega = TWO_PI * 911.0;
        let src0 = ModalSource { r0: 2.5, phi0: 0.0 };
        for m in 1..=4i32 {
            let plus = fourier_coeff_pressure(m, 0.28, &src0, omega, &medium).unwrap();
            let minus = fourier_coeff_pressure(-m, 0.28, &src0, omega, &medium).unwrap();
            assert_eq!(plus.value, minus.value);
        }
        let srcp = ModalSource { r0: 2.5, phi0: 0.7 };
        let srcm = ModalSource {
            r0: 2.5,
            phi0: -0.7,
        };
        for m in 1..=4i32 {
            let a = fourier_coeff_pressure(-m, 0.28, &srcp, omega, &medium).unwrap();
            let b = fourier_coeff_pressure(m, 0.28, &srcm, omega, &medium).unwrap();
            assert!(rel(a.value, b.value) < 1e-13);
        }
    }

    #[test]
    fn truncation_extension_changes_nothing() {
        let medium = Medium::default();
        let src = paper_source();
        let omega = TWO_PI * 2000.0;
        let k = medium.wavenumber(omega);
        let a = fourier_coeff_pressure(1, 0.3, &src, omega, &medium).unwrap();
        // direct sum with twice the used order
        let n_hi = 2 * a.n_max_used;
        let rot = Complex64::from_polar(1.0, -src.phi0);
        let mut sum = Complex64::ZERO;
        for n in 1..=n_hi {
            let b = sh_norm(1, n).unwrap();
            let p = assoc_legendre(n, 1, 0.0).unwrap();
            sum += -Complex64::i()
                * k
                * spherical_hankel2(n, k * src.r0).unwrap()
                * b
                * p
                * rot
                * spherical_bessel_j(n, k * 0.3)
                * b
                * p;
        }
        assert!(rel(a.value, sum) < 1e-9);
    }

    #[test]
    fn interior_expansion_matches_greens_function() {
        let medium = Medium::default();
        let src = paper_source();
        for &f in &[100.0, 728.0, 2200.0, 4000.0] {
            let omega = TWO_PI * f;
            for &(r, phi) in &[(0.05, 0.3), (0.15, 2.0), (0.3, 0.0), (0.3, 4.4)] {
                let modal = point_source_pressure_modal(r, phi, &src, omega, &medium).unwrap();
                let exact = greens_on_circle(&src, r, phi, omega);
                assert!(
                    rel(modal.value, exact) < 1e-6,
                    "expansion off at f={f}, r={r}, phi={phi}: rel={}",
                    rel(modal.value, exact)
                );
            }
        }
    }

    #[test]
    fn scan_finds_first_observability_minima() {
        let medium = Medium::default();
        let src = paper_source();
        // two radii, m = 1: paired-pressure minimum near 728 Hz
        let minima =
            scan_observability(1, &[0.275, 0.3], 100.0, 2000.0, 2.0, &src, &medium).unwrap();
        assert!(!minima.is_empty());
        let f1 = minima[0];
        assert!(
            (f1 - 728.0).abs() / 728.0 < 0.02,
            "first m=1 minimum at {f1} Hz"
        );

        // single radius, m = 0: J_0-envelope zero near 437 Hz
        let minima = scan_observability(0, &[0.3], 100.0, 2000.0, 2.0, &src, &medium).unwrap();
        assert!(!minima.is_empty());
        let f0 = minima[0];
        assert!(
            (f0 - 437.0).abs() / 437.0 < 0.03,
            "first m=0 minimum at {f0} Hz"
        );

        // below the first minimum the magnitude is monotone: no minima
        let none = scan_observability(0, &[0.3], 50.0, 300.0, 2.0, &src, &medium).unwrap();
        assert!(none.is_empty());

        // step larger than the range
        assert!(scan_observability(0, &[0.3], 100.0, 200.0, 150.0, &src, &medium).is_err());
    }
}
