//! Exponential-atlas charts on SO(3), reduced geodesic dynamics in chart
//! coordinates, and Euclidean export of G_Q metric balls.
//!
//! The four charts parameterize R = Lambda_k exp(hat(r)) with Lambda_k the
//! sign matrices diag(1,1,1), diag(1,-1,-1), diag(-1,1,-1), diag(-1,-1,1);
//! each chart covers rotations with trace(Lambda_k R) > -1 and the four
//! traces sum to zero, so every rotation lies well inside at least one
//! chart. Chart-side geodesics integrate the coupled system
//! dr/dt = f(r) w, dw/dt = -Q^{-1}(w x Qw) by plain RK4 on R^6; the
//! velocity factor f switches to its series below |r|^2 = 1e-4, where the
//! closed form and the series agree to ~1e-12. Ball export flows boundary
//! velocities on the group side and maps endpoints through one chart,
//! refusing balls whose endpoints leave it.

use crate::integrate::dexpinv_beta;
use crate::metrics::{geodesic_flow, SpdMatrix};
use crate::so3::{exp_so3, hat, log_so3, Mat3, Rotation, Vec3};
use std::f64::consts::{FRAC_PI_2, PI};
use thiserror::Error;

/// Margin of the single-chart domain test trace(Lambda R) > -1 + margin;
/// matches the logarithm's angle-pi guard.
pub const CHART_DOMAIN_MARGIN: f64 = 1e-9;
/// Wider margin used when listing covering charts.
pub const COVERAGE_MARGIN: f64 = 1e-6;
/// Chart-side integration refuses coordinates beyond pi minus this.
pub const CHART_SAFETY: f64 = 0.05;

#[derive(Debug, Error, Clone, Copy, PartialEq)]
pub enum ChartError {
    #[error("rotation outside chart domain: trace(lambda r) = {trace}")]
    OutsideChartDomain { trace: f64 },
    #[error("chart coordinates out of range: |r| = {norm} >= pi")]
    OutOfRange { norm: f64 },
    #[error("chart {chart} boundary approached: |r| = {norm}")]
    ChartBoundaryHit { chart: usize, norm: f64 },
    #[error("ball does not fit inside chart {chart}")]
    BallStraddlesCharts { chart: usize },
}

/// One chart of the atlas: R = lambda * exp(hat(r)).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExpChart {
    index: usize,
}

const CHART_SIGNS: [[f64; 3]; 4] = [
    [1.0, 1.0, 1.0],
    [1.0, -1.0, -1.0],
    [-1.0, 1.0, -1.0],
    [-1.0, -1.0, 1.0],
];

impl ExpChart {
    pub fn new(index: usize) -> Self {
        assert!(index < 4, "chart index must be 0..4");
        ExpChart { index }
    }

    pub fn all() -> [ExpChart; 4] {
        [0, 1, 2, 3].map(ExpChart::new)
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn signs(&self) -> Vec3 {
        let s = CHART_SIGNS[self.index];
        Vec3::new(s[0], s[1], s[2])
    }

    /// The sign matrix diag(s); each is its own inverse and lies in SO(3).
    pub fn lambda(&self) -> Rotation {
        Rotation::from_matrix_unchecked(Mat3::from_diagonal(&self.signs()))
    }

    fn domain_trace(&self, r: &Rotation) -> f64 {
        (self.lambda().matrix() * r.matrix()).trace()
    }
}

/// Chart coordinates of one exported sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChartPoint {
    pub chart: usize,
    pub r: Vec3,
}

/// Chart-side reduced geodesic state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeodesicState {
    pub r: Vec3,
    pub w: Vec3,
}

/// r = vee(log(lambda * R)); defined where trace(lambda R) > -1.
pub fn chart_map(chart: &ExpChart, r: &Rotation) -> Result<Vec3, ChartError> {
    let trace = chart.domain_trace(r);
    if trace <= -1.0 + CHART_DOMAIN_MARGIN {
        return Err(ChartError::OutsideChartDomain { trace });
    }
    let shifted = &chart.lambda() * r;
    Ok(log_so3(&shifted).expect("log is defined on the chart domain"))
}

/// R = lambda * exp(hat(r)) for |r| < pi.
pub fn chart_inverse(chart: &ExpChart, r: &Vec3) -> Result<Rotation, ChartError> {
    let norm = r.norm();
    if norm >= PI {
        return Err(ChartError::OutOfRange { norm });
    }
    Ok(&chart.lambda() * &exp_so3(r))
}

/// Charts whose domain contains r with margin COVERAGE_MARGIN, in index
/// order. Never empty: the four domain traces sum to zero, so the largest
/// is at least 0.
pub fn chart_coverage(r: &Rotation) -> Vec<ExpChart> {
    ExpChart::all()
        .into_iter()
        .filter(|c| c.domain_trace(r) > -1.0 + COVERAGE_MARGIN)
        .collect()
}

/// Reduced geodesic velocity dynamics dw/dt = -Q^{-1}(w x Qw); conserves
/// w^T Q w.
pub fn reduced_geodesic_rhs(q: &SpdMatrix, w: &Vec3) -> Vec3 {
    -(q.inverse() * w.cross(&(q.matrix() * w)))
}

/// f(r) = I + hat(r)/2 + beta(|r|) hat(r)^2 with dr/dt = f(r) w along
/// R = lambda exp(hat(r)), dR/dt = R hat(w).
pub fn chart_velocity_factor(r: &Vec3) -> Result<Mat3, ChartError> {
    let norm = r.norm();
    if norm >= PI {
        return Err(ChartError::OutOfRange { norm });
    }
    Ok(velocity_factor_unchecked(r))
}

fn velocity_factor_unchecked(r: &Vec3) -> Mat3 {
    let h = hat(r);
    Mat3::identity() + 0.5 * h + dexpinv_beta(r.norm_squared()) * h * h
}

/// The right inverse of f: f(r) * chart_velocity_factor_inverse(r) = I.
pub fn chart_velocity_factor_inverse(r: &Vec3) -> Result<Mat3, ChartError> {
    let norm = r.norm();
    if norm >= PI {
        return Err(ChartError::OutOfRange { norm });
    }
    let t2 = r.norm_squared();
    let (a, b) = if t2 < 1e-4 {
        (
            -0.5 + t2 / 24.0 - t2 * t2 / 720.0,
            1.0 / 6.0 - t2 / 120.0 + t2 * t2 / 5040.0,
        )
    } else {
        let t = t2.sqrt();
        ((t.cos() - 1.0) / t2, (t - t.sin()) / (t2 * t))
    };
    let h = hat(r);
    Ok(Mat3::identity() + a * h + b * h * h)
}

/// One classical RK4 step of the coupled chart-side geodesic system. The
/// dynamics are identical in every chart; the chart argument fixes the
/// interpretation of r and labels boundary reports. Coordinates are
/// monitored at every stage against the safety bound pi - CHART_SAFETY.
pub fn chart_geodesic_step(
    chart: &ExpChart,
    q: &SpdMatrix,
    gs: &GeodesicState,
    h: f64,
) -> Result<GeodesicState, ChartError> {
    assert!(h > 0.0 && h.is_finite(), "step size must be positive");
    let guard = |r: &Vec3| -> Result<(), ChartError> {
        let norm = r.norm();
        if norm >= PI - CHART_SAFETY {
            return Err(ChartError::ChartBoundaryHit {
                chart: chart.index(),
                norm,
            });
        }
        Ok(())
    };
    let rate = |s: &GeodesicState| GeodesicState {
        r: velocity_factor_unchecked(&s.r) * s.w,
        w: reduced_geodesic_rhs(q, &s.w),
    };
    let add = |s: &GeodesicState, k: &GeodesicState, dt: f64| GeodesicState {
        r: s.r + dt * k.r,
        w: s.w + dt * k.w,
    };

    guard(&gs.r)?;
    let k1 = rate(gs);
    let s2 = add(gs, &k1, 0.5 * h);
    guard(&s2.r)?;
    let k2 = rate(&s2);
    let s3 = add(gs, &k2, 0.5 * h);
    guard(&s3.r)?;
    let k3 = rate(&s3);
    let s4 = add(gs, &k3, h);
    guard(&s4.r)?;
    let k4 = rate(&s4);
    let out = GeodesicState {
        r: gs.r + (h / 6.0) * (k1.r + 2.0 * k2.r + 2.0 * k3.r + k4.r),
        w: gs.w + (h / 6.0) * (k1.w + 2.0 * k2.w + 2.0 * k3.w + k4.w),
    };
    guard(&out.r)?;
    Ok(out)
}

/// Deterministic golden-spiral direction set on the unit sphere.
pub fn fibonacci_directions(n: usize) -> Vec<Vec3> {
    let golden = PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let rho = (1.0 - z * z).max(0.0).sqrt();
            let a = golden * i as f64;
            Vec3::new(rho * a.cos(), rho * a.sin(), z)
        })
        .collect()
}

fn export_chart(center: &Rotation) -> ExpChart {
    *chart_coverage(center)
        .first()
        .expect("chart coverage is never empty")
}

fn flow_and_map(
    q: &SpdMatrix,
    center: &Rotation,
    chart: &ExpChart,
    velocities: &[Vec3],
) -> Result<Vec<ChartPoint>, ChartError> {
    velocities
        .iter()
        .map(|w0| {
            let end = geodesic_flow(q, center, w0, 1.0).rotation;
            let r = chart_map(chart, &end).map_err(|_| ChartError::BallStraddlesCharts {
                chart: chart.index(),
            })?;
            Ok(ChartPoint {
                chart: chart.index(),
                r,
            })
        })
        .collect()
}

/// Chart coordinates of n points on the boundary of the G_Q ball: initial
/// velocities on {w0^T Q w0 = radius^2} (Fibonacci directions scaled by
/// Q^{-1/2}), flowed to t = 1 on the group side, mapped through the first
/// chart covering the center.
pub fn ball_boundary(
    q: &SpdMatrix,
    center: &Rotation,
    radius: f64,
    n: usize,
) -> Result<Vec<ChartPoint>, ChartError> {
    assert!(
        radius > 0.0 && radius < FRAC_PI_2,
        "radius must lie in (0, pi/2)"
    );
    let chart = export_chart(center);
    let q_inv_sqrt = q.inv_sqrt();
    let velocities: Vec<Vec3> = fibonacci_directions(n)
        .iter()
        .map(|d| radius * (q_inv_sqrt * d))
        .collect();
    flow_and_map(q, center, &chart, &velocities)
}

/// Interior fill of the ball by the same construction with radially
/// scaled velocities (cube-root spacing for near-uniform volume density).
pub fn ball_interior_samples(
    q: &SpdMatrix,
    center: &Rotation,
    radius: f64,
    n: usize,
) -> Result<Vec<ChartPoint>, ChartError> {
    assert!(
        radius > 0.0 && radius < FRAC_PI_2,
        "radius must lie in (0, pi/2)"
    );
    let chart = export_chart(center);
    let q_inv_sqrt = q.inv_sqrt();
    let velocities: Vec<Vec3> = fibonacci_directions(n)
        .iter()
        .enumerate()
        .map(|(i, d)| {
            let s = ((i as f64 + 0.5) / n as f64).cbrt();
            s * radius * (q_inv_sqrt * d)
        })
        .collect();
    flow_and_map(q, center, &chart, &velocities)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::geodesic_distance_q;
    use crate::so3::bi_invariant_distance;
    use rand::Rng;
    use rand_chacha::rand_core::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_rotation(rng: &mut ChaCha8Rng, max_angle: f64) -> Rotation {
        let axis = Vec3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        )
        .normalize();
        exp_so3(&(rng.gen_range(0.0..max_angle) * axis))
    }

    fn random_spd(rng: &mut ChaCha8Rng, cond: f64) -> SpdMatrix {
        let r = random_rotation(rng, 3.0);
        let evals = Vec3::new(
            1.0 / cond.sqrt(),
            rng.gen_range(1.0 / cond.sqrt()..cond.sqrt()),
            cond.sqrt(),
        );
        let d = Mat3::from_diagonal(&evals);
        SpdMatrix::new(r.matrix() * d * r.matrix().transpose()).unwrap()
    }

    #[test]
    fn atlas_matrices_are_involutive_rotations() {
        for chart in ExpChart::all() {
            let l = chart.lambda();
            let m = l.matrix();
            assert!((m * m - Mat3::identity()).amax() < 1e-15);
            assert!((m.determinant() - 1.0).abs() < 1e-15);
        }
        assert_eq!(ExpChart::new(0).lambda().matrix(), &Mat3::identity());
    }

    #[test]
    fn chart_map_identity_and_origin_pins() {
        let r0 = chart_map(&ExpChart::new(0), &Rotation::identity()).unwrap();
        assert_eq!(r0, Vec3::zeros());
        let base1 = chart_inverse(&ExpChart::new(1), &Vec3::zeros()).unwrap();
        assert_eq!(
            base1.matrix(),
            &Mat3::from_diagonal(&Vec3::new(1.0, -1.0, -1.0))
        );
    }

    #[test]
    fn pi_rotation_escapes_chart_zero_but_not_the_atlas() {
        let half_turn = exp_so3(&Vec3::new(0.0, 0.0, PI));
        let err = chart_map(&ExpChart::new(0), &half_turn).unwrap_err();
        assert!(matches!(err, ChartError::OutsideChartDomain { .. }));
        let cover = chart_coverage(&half_turn);
        assert!(!cover.is_empty());
        assert!(cover.iter().all(|c| c.index() != 0));
    }

    #[test]
    fn round_trips_agree_across_covering_charts() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..300 {
            let r = random_rotation(&mut rng, 3.0);
            let cover = chart_coverage(&r);
            assert!(!cover.is_empty());
            for chart in &cover {
                let coords = chart_map(chart, &r).unwrap();
                assert!(coords.norm() < PI);
                let back = chart_inverse(chart, &coords).unwrap();
                assert!(bi_invariant_distance(&back, &r) <= 1e-10);
            }
        }
    }

    #[test]
    fn coverage_sweep_never_empty() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..100_000 {
            let r = random_rotation(&mut rng, PI - 1e-12);
            assert!(!chart_coverage(&r).is_empty());
        }
    }

    #[test]
    fn inverse_rejects_closed_ball_edge() {
        let err = chart_inverse(&ExpChart::new(0), &Vec3::new(PI, 0.0, 0.0)).unwrap_err();
        assert!(matches!(err, ChartError::OutOfRange { .. }));
    }

    #[test]
    fn reduced_rhs_pins() {
        let q = SpdMatrix::identity();
        assert_eq!(
            reduced_geodesic_rhs(&q, &Vec3::new(0.3, -0.2, 0.9)),
            Vec3::zeros()
        );
        let q = SpdMatrix::new(Mat3::from_diagonal(&Vec3::new(1.0, 2.0, 3.0))).unwrap();
        // Eigenvector of Q: w x Qw = 0.
        assert_eq!(
            reduced_geodesic_rhs(&q, &Vec3::new(0.0, 2.0, 0.0)),
            Vec3::zeros()
        );
        let rhs = reduced_geodesic_rhs(&q, &Vec3::new(1.0, 1.0, 0.0));
        assert!((rhs - Vec3::new(0.0, 0.0, -1.0 / 3.0)).norm() < 1e-15);
    }

    #[test]
    fn velocity_factor_is_identity_at_zero() {
        assert_eq!(
            chart_velocity_factor(&Vec3::zeros()).unwrap(),
            Mat3::identity()
        );
        assert_eq!(
            chart_velocity_factor_inverse(&Vec3::zeros()).unwrap(),
            Mat3::identity()
        );
    }

    #[test]
    fn velocity_factor_inverse_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..500 {
            let dir = random_rotation(&mut rng, 3.0).matrix() * Vec3::x();
            let r = rng.gen_range(1e-3..3.0) * dir;
            let f = chart_velocity_factor(&r).unwrap();
            let g = chart_velocity_factor_inverse(&r).unwrap();
            assert!(
                (f * g - Mat3::identity()).amax() <= 1e-9,
                "residual {:e} at |r| = {}",
                (f * g - Mat3::identity()).amax(),
                r.norm()
            );
        }
    }

    #[test]
    fn velocity_factor_branches_agree_at_the_switch() {
        // The switch sits at |r|^2 = 1e-4. Evaluate both formulas there.
        let t2: f64 = 1e-4;
        let t = t2.sqrt();
        let series = 1.0 / 12.0 + t2 / 720.0 + t2 * t2 / 30240.0;
        let closed = 1.0 / t2 - (1.0 + t.cos()) / (2.0 * t * t.sin());
        assert!(
            (series - closed).abs() <= 1e-11,
            "branch mismatch {:e}",
            (series - closed).abs()
        );
    }

    #[test]
    fn axis_aligned_chart_geodesic_is_linear() {
        let chart = ExpChart::new(0);
        let q = SpdMatrix::identity();
        let mut gs = GeodesicState {
            r: Vec3::zeros(),
            w: Vec3::new(0.0, 0.0, 0.7),
        };
        for _ in 0..100 {
            gs = chart_geodesic_step(&chart, &q, &gs, 0.01).unwrap();
        }
        assert!((gs.r - Vec3::new(0.0, 0.0, 0.7)).norm() < 1e-13);
        assert!((gs.w - Vec3::new(0.0, 0.0, 0.7)).norm() < 1e-13);
    }

    #[test]
    fn chart_step_is_fourth_order() {
        let chart = ExpChart::new(0);
        let q = SpdMatrix::new(Mat3::from_diagonal(&Vec3::new(1.0, 2.0, 4.0))).unwrap();
        let s0 = GeodesicState {
            r: Vec3::new(0.2, -0.1, 0.3),
            w: Vec3::new(0.9, 0.5, -0.7),
        };
        let integrate = |h: f64, steps: usize| {
            let mut s = s0;
            for _ in 0..steps {
                s = chart_geodesic_step(&chart, &q, &s, h).unwrap();
            }
            s
        };
        let reference = integrate(1e-3, 1000);
        let coarse = (integrate(0.1, 10).r - reference.r).norm();
        let fine = (integrate(0.05, 20).r - reference.r).norm();
        let ratio = coarse / fine;
        assert!(
            (8.0..40.0).contains(&ratio),
            "order ratio {ratio:.1} (coarse {coarse:e}, fine {fine:e})"
        );
    }

    #[test]
    fn chart_flow_matches_group_flow() {
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        let chart = ExpChart::new(0);
        for _ in 0..20 {
            let q = random_spd(&mut rng, 9.0);
            let r0 = Vec3::new(
                rng.gen_range(-0.4..0.4),
                rng.gen_range(-0.4..0.4),
                rng.gen_range(-0.4..0.4),
            );
            let w0 = Vec3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            let mut s = GeodesicState { r: r0, w: w0 };
            let steps = 1000;
            for _ in 0..steps {
                s = chart_geodesic_step(&chart, &q, &s, 1.0 / steps as f64).unwrap();
            }
            let start = chart_inverse(&chart, &r0).unwrap();
            let group_end = geodesic_flow(&q, &start, &w0, 1.0).rotation;
            let mapped = chart_map(&chart, &group_end).unwrap();
            assert!(
                (mapped - s.r).norm() <= 1e-7,
                "representations diverged by {:e}",
                (mapped - s.r).norm()
            );
        }
    }

    #[test]
    fn chart_flow_conserves_quadratic_form() {
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let chart = ExpChart::new(0);
        for _ in 0..30 {
            let q = random_spd(&mut rng, 50.0);
            let w0 = Vec3::new(
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            );
            let e0 = w0.dot(&(q.matrix() * w0));
            let mut s = GeodesicState {
                r: Vec3::zeros(),
                w: w0,
            };
            for _ in 0..500 {
                s = chart_geodesic_step(&chart, &q, &s, 2e-3).unwrap();
            }
            let e1 = s.w.dot(&(q.matrix() * s.w));
            assert!(((e1 - e0) / e0).abs() <= 1e-9, "drift {:e}", (e1 - e0) / e0);
        }
    }

    #[test]
    fn boundary_monitor_reports_the_chart() {
        let chart = ExpChart::new(2);
        let q = SpdMatrix::identity();
        let gs = GeodesicState {
            r: Vec3::new(PI - 0.051, 0.0, 0.0),
            w: Vec3::new(1.0, 0.0, 0.0),
        };
        match chart_geodesic_step(&chart, &q, &gs, 0.01) {
            Err(ChartError::ChartBoundaryHit { chart: idx, .. }) => assert_eq!(idx, 2),
            other => panic!("expected a boundary hit, got {other:?}"),
        }
    }

    #[test]
    fn identity_metric_boundary_is_a_chart_sphere() {
        let points = ball_boundary(&SpdMatrix::identity(), &Rotation::identity(), 0.4, 64).unwrap();
        assert_eq!(points.len(), 64);
        for p in &points {
            assert_eq!(p.chart, 0);
            assert!((p.r.norm() - 0.4).abs() <= 1e-9);
        }
        assert!(ball_boundary(&SpdMatrix::identity(), &Rotation::identity(), 0.4, 0)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn boundary_points_sit_at_the_stated_distance() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        for _ in 0..5 {
            let q = random_spd(&mut rng, 16.0);
            let center = random_rotation(&mut rng, 1.0);
            let points = ball_boundary(&q, &center, 0.3, 24).unwrap();
            for p in &points {
                let r = chart_inverse(&ExpChart::new(p.chart), &p.r).unwrap();
                let d = geodesic_distance_q(&q, &center, &r).unwrap();
                assert!((d - 0.3).abs() <= 1e-6, "boundary distance {d}");
            }
        }
    }

    #[test]
    fn interior_points_stay_inside_and_scale() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let q = random_spd(&mut rng, 9.0);
        let center = random_rotation(&mut rng, 0.8);
        let radius = 0.35;
        let points = ball_interior_samples(&q, &center, radius, 40).unwrap();
        assert_eq!(points.len(), 40);
        for p in &points {
            let r = chart_inverse(&ExpChart::new(p.chart), &p.r).unwrap();
            let d = geodesic_distance_q(&q, &center, &r).unwrap();
            assert!(d < radius + 1e-6, "interior point at distance {d}");
        }

        // Velocity-scaling mechanism behind the fill.
        let w_boundary = radius * (q.inv_sqrt() * Vec3::x());
        let half = geodesic_flow(&q, &center, &(0.5 * w_boundary), 1.0).rotation;
        let d_half = geodesic_distance_q(&q, &center, &half).unwrap();
        assert!((d_half - radius / 2.0).abs() <= 1e-6);
        let stay = geodesic_flow(&q, &center, &Vec3::zeros(), 1.0).rotation;
        assert!(bi_invariant_distance(&stay, &center) <= 1e-12);
    }

    #[test]
    fn identity_metric_interior_fills_the_chart_ball() {
        let points =
            ball_interior_samples(&SpdMatrix::identity(), &Rotation::identity(), 0.25, 50).unwrap();
        for p in &points {
            assert_eq!(p.chart, 0);
            assert!(p.r.norm() < 0.25);
        }
    }

    #[test]
    fn straddling_ball_is_refused() {
        // Center placed so the first fibonacci direction flows onto the
        // cut locus of chart 0 while chart 0 still covers the center.
        let d0 = fibonacci_directions(16)[0];
        let radius = 0.3;
        let center = exp_so3(&((PI - 1e-7 - radius) * d0));
        assert_eq!(export_chart(&center).index(), 0);
        let err = ball_boundary(&SpdMatrix::identity(), &center, radius, 16).unwrap_err();
        assert!(matches!(err, ChartError::BallStraddlesCharts { chart: 0 }));
    }

    #[test]
    fn membership_representations_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(18);
        for _ in 0..200 {
            let q = random_spd(&mut rng, 9.0);
            let center = random_rotation(&mut rng, 0.9);
            let radius = rng.gen_range(0.05..0.5);
            let boundary = ball_boundary(&q, &center, radius, 4).unwrap();
            let interior = ball_interior_samples(&q, &center, radius, 4).unwrap();
            for (p, inside) in boundary
                .iter()
                .map(|p| (p, false))
                .chain(interior.iter().map(|p| (p, true)))
            {
                let r = chart_inverse(&ExpChart::new(p.chart), &p.r).unwrap();
                let d = geodesic_distance_q(&q, &center, &r).unwrap();
                if inside {
                    assert!(d < radius + 1e-6);
                } else {
                    assert!((d - radius).abs() <= 1e-6);
                }
            }
        }
    }
}
