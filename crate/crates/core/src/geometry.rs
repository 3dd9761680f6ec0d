//! Reproduction-setup geometry: loudspeaker arrays, zones, control-point
//! layouts on concentric circles, evaluation grids, and the free-field
//! source models (Green's function, desired target fields).
//!
//! Everything lives in the z = 0 plane; loudspeakers are ideal point
//! sources whose 3D positions carry z = 0.

use num_complex::Complex64;
use serde::Deserialize;

use crate::error::{Error, Result};

/// Propagation medium. Defaults: air at roughly 20 C.
#[derive(Debug, Clone, Copy, PartialEq, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Medium {
    /// Speed of sound in m/s.
    pub c: f64,
    /// Density in kg/m^3.
    pub rho: f64,
}

impl Default for Medium {
    fn default() -> Self {
        Medium { c: 343.0, rho: 1.2 }
    }
}

impl Medium {
    pub fn wavenumber(&self, omega: f64) -> f64 {
        omega / self.c
    }

    /// Characteristic impedance rho * c.
    pub fn impedance(&self) -> f64 {
        self.rho * self.c
    }
}

/// 2D point in the reproduction plane (meters).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point2 {
    pub x: f64,
    pub y: f64,
}

impl Point2 {
    pub fn new(x: f64, y: f64) -> Self {
        Point2 { x, y }
    }

    pub fn dist(&self, other: Point2) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Loudspeaker modeled as an ideal point source at z = 0.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Loudspeaker {
    pub position: Point2,
}

/// Whether a zone carries the target scene or is kept quiet.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ZoneKind {
    Bright,
    Dark,
}

/// Circular listening zone with two concentric control radii.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Zone {
    pub center: Point2,
    pub r_in: f64,
    pub r_out: f64,
    pub kind: ZoneKind,
}

impl Zone {
    pub fn new(center: Point2, r_in: f64, r_out: f64, kind: ZoneKind) -> Result<Self> {
        if !(r_in > 0.0 && r_in < r_out) {
            return Err(Error::geometry(format!(
                "zone radii must satisfy 0 < r_in < r_out, got r_in = {r_in}, r_out = {r_out}"
            )));
        }
        Ok(Zone {
            center,
            r_in,
            r_out,
            kind,
        })
    }

    /// Radial control-point spacing `r_out - r_in`.
    pub fn delta_r(&self) -> f64 {
        self.r_out - self.r_in
    }
}

/// Control-point arrangement style on the zone contour.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LayoutStyle {
    /// Pairs sharing an azimuth on the inner and outer circle.
    Pairs,
    /// L-shaped triples: inner, outer, and a tangential neighbor on the
    /// outer circle.
    LShape,
}

/// Control points of one zone, grouped as radial pairs or L-shaped triples.
#[derive(Debug, Clone)]
pub struct ControlLayout {
    pub zone: Zone,
    pub style: LayoutStyle,
    /// Points on the outer circle, one per group, azimuth-ordered.
    pub points_outer: Vec<Point2>,
    /// Points on the inner circle, same azimuths as `points_outer`.
    pub points_inner: Vec<Point2>,
    /// Tangential neighbors on the outer circle (L-shape style only).
    pub points_outer_add: Vec<Point2>,
    /// Angular spacing between a point and its tangential neighbor (rad).
    pub delta_phi: f64,
}

impl ControlLayout {
    pub fn group_count(&self) -> usize {
        self.points_outer.len()
    }

    /// Total number of control points carried by this layout.
    pub fn point_count(&self) -> usize {
        self.points_outer.len() + self.points_inner.len() + self.points_outer_add.len()
    }

    /// All control points in row order: outer, inner, then (L-shape only)
    /// tangential neighbors. Transfer-matrix rows follow this order.
    pub fn points(&self) -> impl Iterator<Item = Point2> + '_ {
        self.points_outer
            .iter()
            .chain(self.points_inner.iter())
            .chain(self.points_outer_add.iter())
            .copied()
    }
}

/// Evaluation grid inside a zone.
#[derive(Debug, Clone)]
pub struct EvalGrid {
    pub points: Vec<Point2>,
    pub spacing: f64,
}

/// Virtual source whose field the bright zone should carry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum VirtualSource {
    /// Plane wave arriving from azimuth `azimuth` (the direction the wave
    /// originates from, as seen from `phase_center`). The amplitude follows
    /// the point-source scaling rule of [`plane_wave_scaled`]; the phase is
    /// referenced to `phase_center`.
    ///
    /// [`plane_wave_scaled`]: VirtualSource::plane_wave_scaled
    PlaneWave {
        azimuth: f64,
        amplitude: f64,
        phase_center: Point2,
    },
    /// Point source radiating the free-field Green's function.
    PointSource { position: Point2 },
    /// All-zero target.
    Silence,
}

impl VirtualSource {
    /// Plane wave scaled to the magnitude a point source at the mean
    /// loudspeaker distance `r_bar` would produce, i.e. 1/(4 pi r_bar).
    /// Keeps the prefilters from having to make up the spherical spreading
    /// loss of the real loudspeakers.
    pub fn plane_wave_scaled(azimuth: f64, array: &[Loudspeaker], bright_center: Point2) -> Self {
        let r_bar = mean_array_distance(array, bright_center);
        VirtualSource::PlaneWave {
            azimuth,
            amplitude: 1.0 / (4.0 * std::f64::consts::PI * r_bar),
            phase_center: bright_center,
        }
    }
}

/// Arithmetic mean of the loudspeaker distances to `point`.
pub fn mean_array_distance(array: &[Loudspeaker], point: Point2) -> f64 {
    array.iter().map(|l| l.position.dist(point)).sum::<f64>() / array.len() as f64
}

/// Places `count` loudspeakers on the perimeter of a `width` x `height`
/// rectangle centered at `center`, spaced by equal arc length starting at
/// the bottom-left corner and walking counterclockwise. Corners are hit
/// exactly when the arc spacing divides the side lengths.
pub fn build_rectangular_array(
    width: f64,
    height: f64,
    count: usize,
    center: Point2,
) -> Result<Vec<Loudspeaker>> {
    if count < 4 {
        return Err(Error::geometry(format!(
            "rectangular array needs at least 4 loudspeakers, got {count}"
        )));
    }
    if width <= 0.0 || height <= 0.0 {
        return Err(Error::geometry(format!(
            "rectangle dimensions must be positive, got {width} x {height}"
        )));
    }
    let perimeter = 2.0 * (width + height);
    let step = perimeter / count as f64;
    let hw = width / 2.0;
    let hh = height / 2.0;
    let speakers = (0..count)
        .map(|i| {
            // walk: bottom edge (left to right), right edge (up), top edge
            // (right to left), left edge (down)
            let mut s = i as f64 * step;
            let p = if s < width {
                Point2::new(-hw + s, -hh)
            } else if s < width + height {
                s -= width;
                Point2::new(hw, -hh + s)
            } else if s < 2.0 * width + height {
                s -= width + height;
                Point2::new(hw - s, hh)
            } else {
                s -= 2.0 * width + height;
                Point2::new(-hw, hh - s)
            };
            Loudspeaker {
                position: Point2::new(p.x + center.x, p.y + center.y),
            }
        })
        .collect();
    Ok(speakers)
}

/// Places `count` loudspeakers uniformly on a circle. Used by the
/// white-noise-gain validation setup.
pub fn build_circular_array(radius: f64, count: usize, center: Point2) -> Result<Vec<Loudspeaker>> {
    if count < 4 {
        return Err(Error::geometry(format!(
            "circular array needs at least 4 loudspeakers, got {count}"
        )));
    }
    if radius <= 0.0 {
        return Err(Error::geometry("circular array radius must be positive"));
    }
    Ok((0..count)
        .map(|i| {
            let phi = 2.0 * std::f64::consts::PI * i as f64 / count as f64;
            Loudspeaker {
                position: Point2::new(center.x + radius * phi.cos(), center.y + radius * phi.sin()),
            }
        })
        .collect())
}

/// Builds the control-point layout for a zone.
///
/// `pairs` places `group_count` azimuth-sharing pairs on the two circles
/// (2 per group). `l_shape` adds a tangential neighbor on the outer circle
/// (3 per group), with the angular offset chosen so that the tangential arc
/// length `r_out * delta_phi` equals the radial gap `delta_r`.
pub fn build_control_layout(
    zone: Zone,
    style: LayoutStyle,
    group_count: usize,
) -> Result<ControlLayout> {
    if group_count < 3 {
        return Err(Error::geometry(format!(
            "control layout needs at least 3 groups, got {group_count}"
        )));
    }
    let delta_phi = zone.delta_r() / zone.r_out;
    let mut outer = Vec::with_capacity(group_count);
    let mut inner = Vec::with_capacity(group_count);
    let mut outer_add = Vec::new();
    for g in 0..group_count {
        let phi = 2.0 * std::f64::consts::PI * g as f64 / group_count as f64;
        outer.push(on_circle(zone.center, zone.r_out, phi));
        inner.push(on_circle(zone.center, zone.r_in, phi));
        if style == LayoutStyle::LShape {
            outer_add.push(on_circle(zone.center, zone.r_out, phi + delta_phi));
        }
    }
    Ok(ControlLayout {
        zone,
        style,
        points_outer: outer,
        points_inner: inner,
        points_outer_add: outer_add,
        delta_phi,
    })
}

fn on_circle(center: Point2, radius: f64, phi: f64) -> Point2 {
    Point2::new(center.x + radius * phi.cos(), center.y + radius * phi.sin())
}

/// Square `side_count` x `side_count` grid with `spacing` between points,
/// centered on the zone center. Rejects grids whose corners would leave the
/// zone's outer contour.
pub fn build_eval_grid(zone: &Zone, spacing: f64, side_count: usize) -> Result<EvalGrid> {
    if spacing <= 0.0 {
        return Err(Error::geometry("grid spacing must be positive"));
    }
    if side_count == 0 {
        return Err(Error::geometry("grid side count must be positive"));
    }
    let half_extent = spacing * (side_count - 1) as f64 / 2.0;
    let corner_radius = half_extent * std::f64::consts::SQRT_2;
    if corner_radius > zone.r_out {
        return Err(Error::geometry(format!(
            "evaluation grid extends to radius {corner_radius:.4} beyond r_out = {}",
            zone.r_out
        )));
    }
    let mut points = Vec::with_capacity(side_count * side_count);
    for iy in 0..side_count {
        for ix in 0..side_count {
            points.push(Point2::new(
                zone.center.x - half_extent + ix as f64 * spacing,
                zone.center.y - half_extent + iy as f64 * spacing,
            ));
        }
    }
    Ok(EvalGrid { points, spacing })
}

/// Free-field 3D Green's function between a source at `y` and a field point
/// at `x` (both in the z = 0 plane):
/// `G = exp(-i k ||y - x||) / (4 pi ||y - x||)`.
pub fn greens_function_3d(y: Point2, x: Point2, omega: f64, medium: &Medium) -> Result<Complex64> {
    let r = y.dist(x);
    if r == 0.0 {
        return Err(Error::geometry(
            "Green's function is singular for coincident source and field points",
        ));
    }
    let k = medium.wavenumber(omega);
    Ok(Complex64::from_polar(
        1.0 / (4.0 * std::f64::consts::PI * r),
        -k * r,
    ))
}

/// Desired transfer function of the virtual source at position `x`.
///
/// Dark-zone points are always zero. The plane wave propagates along the
/// unit vector pointing away from its source azimuth, with the phase
/// referenced to the bright-zone center.
pub fn desired_field(
    source: &VirtualSource,
    x: Point2,
    omega: f64,
    zone_kind: ZoneKind,
    medium: &Medium,
) -> Complex64 {
    if zone_kind == ZoneKind::Dark {
        return Complex64::ZERO;
    }
    match source {
        VirtualSource::Silence => Complex64::ZERO,
        VirtualSource::PlaneWave {
            azimuth,
            amplitude,
            phase_center,
        } => {
            let k = medium.wavenumber(omega);
            // propagation direction: away from the source azimuth
            let dir = (-azimuth.cos(), -azimuth.sin());
            let phase = -k * (dir.0 * (x.x - phase_center.x) + dir.1 * (x.y - phase_center.y));
            Complex64::from_polar(*amplitude, phase)
        }
        VirtualSource::PointSource { position } => greens_function_3d(*position, x, omega, medium)
            .expect("virtual point source must not coincide with a field point"),
    }
}
