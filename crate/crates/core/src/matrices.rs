//! Per-frequency system assembly: the loudspeaker-to-control-point transfer
//! matrix `G`, the finite-difference operator `D` that maps control-point
//! pressures to particle-velocity quantities, and the desired pressure and
//! velocity target vectors.
//!
//! Row conventions, fixed across the crate:
//! - `G` rows walk the layouts in the given order (bright zone first); per
//!   layout the points come as outer circle, inner circle, then (L-shape
//!   only) the tangential neighbors.
//! - `D` rows walk the layouts in order; per layout the radial rows come
//!   first, then the tangential rows, one per control group.
//!
//! The radial velocity row implements
//! `-(P(x_in) - P(x_out)) / (i omega rho dR)` and the tangential row
//! `-(P(x_out_add) - P(x_out)) / (i omega rho R_out dphi)`, both attributed
//! to the outer point of the group. The tangential denominator uses the arc
//! length `R_out dphi`; at the layouts in use the chord differs from the
//! arc by under 0.03%.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::geometry::{
    desired_field, greens_function_3d, ControlLayout, LayoutStyle, Loudspeaker, Medium,
    VirtualSource,
};

/// Which particle-velocity components the difference operator produces.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QuantitySet {
    pub radial: bool,
    pub tangential: bool,
}

impl QuantitySet {
    pub const PRESSURE_ONLY: QuantitySet = QuantitySet {
        radial: false,
        tangential: false,
    };
    pub const RADIAL: QuantitySet = QuantitySet {
        radial: true,
        tangential: false,
    };
    pub const RADIAL_AND_TANGENTIAL: QuantitySet = QuantitySet {
        radial: true,
        tangential: true,
    };
    pub const TANGENTIAL: QuantitySet = QuantitySet {
        radial: false,
        tangential: true,
    };

    pub fn any(&self) -> bool {
        self.radial || self.tangential
    }
}

/// Everything the per-frequency solver consumes.
#[derive(Debug, Clone)]
pub struct TransferMatrixSet {
    pub omega: f64,
    /// Control-point pressures per unit loudspeaker drive.
    pub g: DMatrix<Complex64>,
    /// Velocity quantities per control-point pressure.
    pub d: DMatrix<Complex64>,
    /// Desired pressures at the control points.
    pub h_p: DVector<Complex64>,
    /// Desired velocity quantities (the difference operator applied to the
    /// desired pressures).
    pub h_vel: DVector<Complex64>,
    pub quantities: QuantitySet,
}

impl TransferMatrixSet {
    pub fn assemble(
        array: &[Loudspeaker],
        layouts: &[ControlLayout],
        quantities: QuantitySet,
        source: &VirtualSource,
        omega: f64,
        medium: &Medium,
    ) -> Result<Self> {
        let g = assemble_transfer_matrix(array, layouts, omega, medium)?;
        let d = build_difference_matrix(layouts, quantities, omega, medium)?;
        let (h_p, h_vel) = desired_vectors(source, layouts, quantities, omega, medium)?;
        Ok(TransferMatrixSet {
            omega,
            g,
            d,
            h_p,
            h_vel,
            quantities,
        })
    }

    /// `D G`, the velocity transfer matrix of the overall system.
    pub fn velocity_transfer(&self) -> DMatrix<Complex64> {
        &self.d * &self.g
    }
}

/// Builds `G`: entry (row for point x, column l) is the free-field Green's
/// function from loudspeaker l to control point x.
pub fn assemble_transfer_matrix(
    array: &[Loudspeaker],
    layouts: &[ControlLayout],
    omega: f64,
    medium: &Medium,
) -> Result<DMatrix<Complex64>> {
    if omega <= 0.0 {
        return Err(Error::domain("transfer matrix requires omega > 0"));
    }
    let points: Vec<_> = layouts.iter().flat_map(|l| l.points()).collect();
    let mut g = DMatrix::zeros(points.len(), array.len());
    for (r, &x) in points.iter().enumerate() {
        for (c, speaker) in array.iter().enumerate() {
            g[(r, c)] = greens_function_3d(speaker.position, x, omega, medium)?;
        }
    }
    Ok(g)
}

/// Builds the difference operator `D` over the stacked control-point
/// pressures. With no active quantity the matrix has zero rows; tangential
/// rows require L-shape layouts.
pub fn build_difference_matrix(
    layouts: &[ControlLayout],
    quantities: QuantitySet,
    omega: f64,
    medium: &Medium,
) -> Result<DMatrix<Complex64>> {
    if omega <= 0.0 {
        return Err(Error::domain(
            "difference operator is singular at omega = 0",
        ));
    }
    if quantities.tangential {
        if let Some(bad) = layouts.iter().find(|l| l.style != LayoutStyle::LShape) {
            return Err(Error::geometry(format!(
                "tangential velocity rows need an l_shape layout, zone at ({:.3}, {:.3}) uses pairs",
                bad.zone.center.x, bad.zone.center.y
            )));
        }
    }

    let total_points: usize = layouts.iter().map(|l| l.point_count()).sum();
    let total_rows: usize = layouts
        .iter()
        .map(|l| {
            l.group_count() * (usize::from(quantities.radial) + usize::from(quantities.tangential))
        })
        .sum();
    let mut d = DMatrix::zeros(total_rows, total_points);

    let mut row = 0;
    let mut col_base = 0;
    for layout in layouts {
        let m = layout.group_count();
        let outer0 = col_base;
        let inner0 = col_base + m;
        let add0 = col_base + 2 * m;
        if quantities.radial {
            // -(p_in - p_out) / (i w rho dR)
            let c = Complex64::new(0.0, -1.0) / (omega * medium.rho * layout.zone.delta_r());
            for mu in 0..m {
                d[(row, outer0 + mu)] = c;
                d[(row, inner0 + mu)] = -c;
                row += 1;
            }
        }
        if quantities.tangential {
            // -(p_add - p_out) / (i w rho R_out dphi)
            let c = Complex64::new(0.0, -1.0)
                / (omega * medium.rho * layout.zone.r_out * layout.delta_phi);
            for mu in 0..m {
                d[(row, outer0 + mu)] = c;
                d[(row, add0 + mu)] = -c;
                row += 1;
            }
        }
        col_base += layout.point_count();
    }
    Ok(d)
}

/// Samples the desired field at every control point (`h_p`) and applies the
/// difference operator to those samples (`h_vel`).
///
/// Targeting the operator output rather than the analytic velocity keeps
/// the optimization aimed at exactly the quantity the system controls.
pub fn desired_vectors(
    source: &VirtualSource,
    layouts: &[ControlLayout],
    quantities: QuantitySet,
    omega: f64,
    medium: &Medium,
) -> Result<(DVector<Complex64>, DVector<Complex64>)> {
    let h_p: Vec<Complex64> = layouts
        .iter()
        .flat_map(|l| {
            l.points()
                .map(|p| desired_field(source, p, omega, l.zone.kind, medium))
                .collect::<Vec<_>>()
        })
        .collect();
    let h_p = DVector::from_vec(h_p);
    let d = build_difference_matrix(layouts, quantities, omega, medium)?;
    let h_vel = &d * &h_p;
    Ok((h_p, h_vel))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{build_control_layout, build_rectangular_array, Point2, Zone, ZoneKind};

    const TWO_PI: f64 = 2.0 * std::f64::consts::PI;

    /// Hand-built single-pair layout; the public constructor requires at
    /// least 3 groups.
    fn one_pair_layout(center: Point2, kind: ZoneKind) -> ControlLayout {
        let zone = Zone::new(center, 0.275, 0.3, kind).unwrap();
        ControlLayout {
            zone,
            style: LayoutStyle::Pairs,
            points_outer: vec![Point2::new(center.x + 0.3, center.y)],
            points_inner: vec![Point2::new(center.x + 0.275, center.y)],
            points_outer_add: vec![],
            delta_phi: 0.025 / 0.3,
        }
    }

    fn pairs_layout(center: Point2, kind: ZoneKind, groups: usize) -> ControlLayout {
        let zone = Zone::new(center, 0.275, 0.3, kind).unwrap();
        build_control_layout(zone, LayoutStyle::Pairs, groups).unwrap()
    }

    #[test]
    fn transfer_matrix_entries_are_greens_values() {
        let medium = Medium::default();
        let array = vec![Loudspeaker {
            position: Point2::new(2.0, 0.0),
        }];
        let layouts = vec![
            one_pair_layout(Point2::new(0.0, 0.5), ZoneKind::Bright),
            one_pair_layout(Point2::new(0.0, -0.5), ZoneKind::Dark),
        ];
        let omega = TWO_PI * 800.0;
        let g = assemble_transfer_matrix(&array, &layouts, omega, &medium).unwrap();
        assert_eq!(g.shape(), (4, 1));
        let points: Vec<Point2> = layouts.iter().flat_map(|l| l.points()).collect();
        for (r, &p) in points.iter().enumerate() {
            let expect = greens_function_3d(array[0].position, p, omega, &medium).unwrap();
            assert_eq!(g[(r, 0)], expect);
        }
    }

    #[test]
    fn transfer_matrix_paper_scenario_shape() {
        let medium = Medium::default();
        let array = build_rectangular_array(3.95, 3.0, 70, Point2::new(0.0, 0.0)).unwrap();
        let layouts = vec![
            pairs_layout(Point2::new(0.0, 0.5), ZoneKind::Bright, 24),
            pairs_layout(Point2::new(0.0, -0.5), ZoneKind::Dark, 24),
        ];
        let g = assemble_transfer_matrix(&array, &layouts, TWO_PI * 1000.0, &medium).unwrap();
        assert_eq!(g.shape(), (96, 70));
    }

    #[test]
    fn transfer_matrix_column_permutation_equivariance() {
        let medium = Medium::default();
        let mut array = build_rectangular_array(3.0, 2.0, 6, Point2::new(0.0, 0.0)).unwrap();
        let layouts = vec![pairs_layout(Point2::new(0.0, 0.3), ZoneKind::Bright, 4)];
        let omega = TWO_PI * 500.0;
        let g = assemble_transfer_matrix(&array, &layouts, omega, &medium).unwrap();
        array.swap(1, 4);
        let g_swapped = assemble_transfer_matrix(&array, &layouts, omega, &medium).unwrap();
        for r in 0..g.nrows() {
            assert_eq!(g[(r, 1)], g_swapped[(r, 4)]);
            assert_eq!(g[(r, 4)], g_swapped[(r, 1)]);
            assert_eq!(g[(r, 0)], g_swapped[(r, 0)]);
        }
    }

    #[test]
    fn difference_matrix_block_structure() {
        let medium = Medium::default();
        let omega = TWO_PI * 700.0;
        // M = 2 per zone, hand-built
        let mk = |center: Point2, kind| {
            let zone = Zone::new(center, 0.275, 0.3, kind).unwrap();
            ControlLayout {
                zone,
                style: LayoutStyle::Pairs,
                points_outer: vec![
                    Point2::new(center.x + 0.3, center.y),
                    Point2::new(center.x - 0.3, center.y),
                ],
                points_inner: vec![
                    Point2::new(center.x + 0.275, center.y),
                    Point2::new(center.x - 0.275, center.y),
                ],
                points_outer_add: vec![],
                delta_phi: 0.025 / 0.3,
            }
        };
        let layouts = vec![
            mk(Point2::new(0.0, 0.5), ZoneKind::Bright),
            mk(Point2::new(0.0, -0.5), ZoneKind::Dark),
        ];
        let d = build_difference_matrix(&layouts, QuantitySet::RADIAL, omega, &medium).unwrap();
        assert_eq!(d.shape(), (4, 8));
        // prefactor -1/(i w rho dR), blocks [[-I, I, 0, 0], [0, 0, -I, I]]
        let pref = -Complex64::ONE / (Complex64::i() * omega * medium.rho * 0.025);
        for mu in 0..2 {
            for col in 0..8 {
                let expect_b = match col {
                    c if c == mu => -pref,    // outer, bright
                    c if c == 2 + mu => pref, // inner, bright
                    _ => Complex64::ZERO,
                };
                let expect_d = match col {
                    c if c == 4 + mu => -pref, // outer, dark
                    c if c == 6 + mu => pref,  // inner, dark
                    _ => Complex64::ZERO,
                };
                assert!((d[(mu, col)] - expect_b).norm() < 1e-14 * pref.norm());
                assert!((d[(2 + mu, col)] - expect_d).norm() < 1e-14 * pref.norm());
            }
        }
        // row magnitudes: 1/(w rho dR) on exactly two entries
        let mag = 1.0 / (omega * medium.rho * layouts[0].zone.delta_r());
        for r in 0..4 {
            let nonzero: Vec<f64> = d
                .row(r)
                .iter()
                .map(|v| v.norm())
                .filter(|&v| v > 0.0)
                .collect();
            assert_eq!(nonzero.len(), 2);
            for v in nonzero {
                assert!((v - mag).abs() < 1e-15 * mag);
            }
        }

        let empty =
            build_difference_matrix(&layouts, QuantitySet::PRESSURE_ONLY, omega, &medium).unwrap();
        assert_eq!(empty.nrows(), 0);
        assert!(build_difference_matrix(
            &layouts,
            QuantitySet::RADIAL_AND_TANGENTIAL,
            omega,
            &medium
        )
        .is_err());
    }

    #[test]
    fn velocity_rows_match_direct_finite_difference() {
        let medium = Medium::default();
        let omega = TWO_PI * 650.0;
        let array = vec![Loudspeaker {
            position: Point2::new(1.8, -0.4),
        }];
        let zone = Zone::new(Point2::new(0.0, 0.4), 0.275, 0.3, ZoneKind::Bright).unwrap();
        let layout = build_control_layout(zone, LayoutStyle::LShape, 5).unwrap();
        let layouts = vec![layout.clone()];
        let g = assemble_transfer_matrix(&array, &layouts, omega, &medium).unwrap();
        let d =
            build_difference_matrix(&layouts, QuantitySet::RADIAL_AND_TANGENTIAL, omega, &medium)
                .unwrap();
        let dg = &d * &g;
        let iwr = Complex64::i() * omega * medium.rho;
        for mu in 0..5 {
            let p_out =
                greens_function_3d(array[0].position, layout.points_outer[mu], omega, &medium)
                    .unwrap();
            let p_in =
                greens_function_3d(array[0].position, layout.points_inner[mu], omega, &medium)
                    .unwrap();
            let p_add = greens_function_3d(
                array[0].position,
                layout.points_outer_add[mu],
                omega,
                &medium,
            )
            .unwrap();
            let v_rad = -(p_in - p_out) / (iwr * zone.delta_r());
            let v_tan = -(p_add - p_out) / (iwr * zone.r_out * layout.delta_phi);
            assert!((dg[(mu, 0)] - v_rad).norm() < 1e-14 * v_rad.norm());
            assert!((dg[(5 + mu, 0)] - v_tan).norm() < 1e-14 * v_tan.norm());
        }
    }

    /// Group-order permutation permutes G rows and D rows/columns together,
    /// so D G acts on weights identically (rows just follow the groups).
    #[test]
    fn row_order_contract_under_group_permutation() {
        let medium = Medium::default();
        let omega = TWO_PI * 450.0;
        let array = build_rectangular_array(3.0, 2.0, 8, Point2::new(0.0, 0.0)).unwrap();
        let layout = pairs_layout(Point2::new(0.0, 0.25), ZoneKind::Bright, 6);
        let mut reversed = layout.clone();
        reversed.points_outer.reverse();
        reversed.points_inner.reverse();

        let dg = |l: &ControlLayout| {
            let ls = vec![l.clone()];
            let g = assemble_transfer_matrix(&array, &ls, omega, &medium).unwrap();
            let d = build_difference_matrix(&ls, QuantitySet::RADIAL, omega, &medium).unwrap();
            &d * &g
        };
        let a = dg(&layout);
        let b = dg(&reversed);
        for mu in 0..6 {
            for c in 0..array.len() {
                assert_eq!(a[(mu, c)], b[(5 - mu, c)]);
            }
        }
    }

    /// Velocity of the reproduced field via (D G) w equals applying the
    /// difference operator to the pressures G w.
    #[test]
    fn reproduced_velocity_associativity() {
        let medium = Medium::default();
        let omega = TWO_PI * 950.0;
        let array = build_rectangular_array(3.95, 3.0, 20, Point2::new(0.0, 0.0)).unwrap();
        let layouts = vec![
            pairs_layout(Point2::new(0.0, 0.5), ZoneKind::Bright, 8),
            pairs_layout(Point2::new(0.0, -0.5), ZoneKind::Dark, 8),
        ];
        let g = assemble_transfer_matrix(&array, &layouts, omega, &medium).unwrap();
        let d = build_difference_matrix(&layouts, QuantitySet::RADIAL, omega, &medium).unwrap();
        let w = DVector::from_fn(20, |i, _| {
            Complex64::new(0.1 + 0.03 * i as f64, -0.02 * (i as f64).sin())
        });
        let via_operator = (&d * &g) * &w;
        let via_pressures = &d * (&g * &w);
        for r in 0..via_operator.len() {
            assert!(
                (via_operator[r] - via_pressures[r]).norm() < 1e-12 * via_pressures[r].norm(),
                "associativity residual too large at row {r}"
            );
        }
    }

    #[test]
    fn desired_vectors_silence_and_colocated_source() {
        let medium = Medium::default();
        let omega = TWO_PI * 777.0;
        let array = build_rectangular_array(3.0, 2.0, 8, Point2::new(0.0, 0.0)).unwrap();
        let layouts = vec![
            pairs_layout(Point2::new(0.0, 0.4), ZoneKind::Bright, 5),
            pairs_layout(Point2::new(0.0, -0.4), ZoneKind::Dark, 5),
        ];
        let (h_p, h_vel) = desired_vectors(
            &VirtualSource::Silence,
            &layouts,
            QuantitySet::RADIAL,
            omega,
            &medium,
        )
        .unwrap();
        assert!(h_p.iter().all(|v| *v == Complex64::ZERO));
        assert!(h_vel.iter().all(|v| *v == Complex64::ZERO));

        // a point-source target sitting on a loudspeaker reproduces its column
        let src = VirtualSource::PointSource {
            position: array[3].position,
        };
        let (h_p, _) =
            desired_vectors(&src, &layouts, QuantitySet::RADIAL, omega, &medium).unwrap();
        let g = assemble_transfer_matrix(&array, &layouts, omega, &medium).unwrap();
        // bright rows match the column, dark rows are zero by definition
        for r in 0..10 {
            assert_eq!(h_p[r], g[(r, 3)]);
        }
        for r in 10..20 {
            assert_eq!(h_p[r], Complex64::ZERO);
        }
    }

    /// Low-frequency plane-wave impedance oracle: the desired radial
    /// velocity magnitude approaches (A/(rho c)) |cos(angle between the
    /// pair's radial direction and the propagation direction)|.
    #[test]
    fn desired_velocity_plane_wave_impedance() {
        let medium = Medium::default();
        let f = 50.0;
        let omega = TWO_PI * f;
        let center = Point2::new(0.0, 0.0);
        let layout = pairs_layout(center, ZoneKind::Bright, 4); // azimuths 0, 90, 180, 270 deg
        let amplitude = 0.04;
        let src = VirtualSource::PlaneWave {
            azimuth: std::f64::consts::PI, // propagates along +x
            amplitude,
            phase_center: center,
        };
        let (_, h_vel) =
            desired_vectors(&src, &[layout], QuantitySet::RADIAL, omega, &medium).unwrap();
        let v_scale = amplitude / medium.impedance();
        let k_dr = medium.wavenumber(omega) * 0.025;
        let tol = v_scale * k_dr * k_dr; // O((k dR)^2) discretization
                                         // group 0: radius +x, aligned with propagation
        assert!((h_vel[0].norm() - v_scale).abs() < tol);
        // group 1: radius +y, perpendicular: both points share the phase
        assert!(h_vel[1].norm() < 1e-18);
        // group 2: radius -x, anti-aligned
        assert!((h_vel[2].norm() - v_scale).abs() < tol);
    }

    /// Halving the pair spacing around a fixed midpoint quarters the error
    /// of the difference operator against the analytic Euler velocity.
    #[test]
    fn finite_difference_second_order_convergence() {
        let medium = Medium::default();
        let f = 500.0;
        let omega = TWO_PI * f;
        let source_pos = Point2::new(2.0, 1.1);
        let center = Point2::new(0.0, 0.0);
        let r_mid = 0.2875;

        let error_at = |delta_r: f64| -> f64 {
            let zone = Zone::new(
                center,
                r_mid - delta_r / 2.0,
                r_mid + delta_r / 2.0,
                ZoneKind::Bright,
            )
            .unwrap();
            let layout = build_control_layout(zone, LayoutStyle::Pairs, 8).unwrap();
            let layouts = vec![layout.clone()];
            let d = build_difference_matrix(&layouts, QuantitySet::RADIAL, omega, &medium).unwrap();
            let p = DVector::from_vec(
                layouts[0]
                    .points()
                    .map(|x| greens_function_3d(source_pos, x, omega, &medium).unwrap())
                    .collect::<Vec<_>>(),
            );
            let v_fd = &d * &p;
            let mut worst = 0.0f64;
            for mu in 0..8 {
                let phi = TWO_PI * mu as f64 / 8.0;
                let x_mid = Point2::new(r_mid * phi.cos(), r_mid * phi.sin());
                // analytic gradient of the Green's function, projected on the
                // inward radial direction of the pair
                let g = greens_function_3d(source_pos, x_mid, omega, &medium).unwrap();
                let dist = source_pos.dist(x_mid);
                let grad_scale = g
                    * (Complex64::new(0.0, -medium.wavenumber(omega))
                        - Complex64::from(1.0 / dist));
                let radial = (
                    (x_mid.x - source_pos.x) / dist,
                    (x_mid.y - source_pos.y) / dist,
                );
                let inward = (-phi.cos(), -phi.sin());
                let dp_inward = grad_scale * (radial.0 * inward.0 + radial.1 * inward.1);
                let v_exact = -dp_inward / (Complex64::i() * omega * medium.rho);
                worst = worst.max((v_fd[mu] - v_exact).norm() / v_exact.norm());
            }
            worst
        };

        let e1 = error_at(0.025);
        let e2 = error_at(0.0125);
        let ratio = e1 / e2;
        assert!(
            (3.6..=4.4).contains(&ratio),
            "expected ~4x error reduction, got {ratio} (e1={e1:.3e}, e2={e2:.3e})"
        );
    }
}
