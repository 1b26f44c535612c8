//! The parametrized metric family: G_Q (left-invariant on SO(3)), the
//! P-norm metric on R3, and their product on SO(3) x R3.
//!
//! Geodesics of G_Q satisfy the reduced (Euler-Poincare) equation
//! Q dw/dt = -w x Qw together with dR/dt = R hat(w); the quadratic form
//! w^T Q w is a first integral, which every integration here tracks. The
//! geodesic distance has no closed form for general Q, so [`geodesic_distance_q`]
//! solves the two-point boundary problem by shooting: quasi-Newton on the
//! endpoint residual, initialized at the one-parameter-subgroup velocity
//! log(R1^T R2). Beyond the configured shooting radius (default pi/2 in
//! bi-invariant angle) the solve is refused. Within it the solver returns
//! the geodesic its initialization converges to; that is the minimizer
//! except near the cut locus of strongly anisotropic Q, where branches of
//! nearly equal length coexist. The contractual guarantee is the upper
//! bound by the one-parameter-subgroup path length.

use crate::integrate::{rk4_step_body, substep_count};
use crate::so3::{bi_invariant_distance, log_so3, polish, Mat3, Rotation, So3Error, Vec3};
use thiserror::Error;

/// Symmetry tolerance for [`SpdMatrix`] construction.
pub const SPD_SYMMETRY_TOL: f64 = 1e-10;
/// Minimum admissible eigenvalue for [`SpdMatrix`] construction.
pub const SPD_MIN_EIG: f64 = 1e-12;
/// Eigenvalue slack for semidefinite-order comparisons (X >= Y means
/// min_eig(X - Y) >= -PSD_ORDER_TOL).
pub const PSD_ORDER_TOL: f64 = 1e-10;
/// Membership slack of [`ball_contains`].
pub const CONTAINMENT_SLACK: f64 = 1e-7;
/// Default integrator step for [`geodesic_endpoint`] / [`geodesic_flow`].
pub const GEODESIC_STEP: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricError {
    #[error("matrix is not symmetric (defect {defect:.3e})")]
    NotSymmetric { defect: f64 },
    #[error("matrix is not positive definite (min eigenvalue {min_eig:.3e})")]
    NotPositiveDefinite { min_eig: f64 },
    #[error(
        "rotations are {distance:.4} apart in bi-invariant angle, beyond the shooting radius {radius:.4}"
    )]
    BeyondShootingRadius { distance: f64, radius: f64 },
    #[error("geodesic shooting failed to converge (residual {residual:.3e} after {iterations} iterations)")]
    ShootingDiverged { residual: f64, iterations: usize },
    #[error(transparent)]
    So3(#[from] So3Error),
}

/// Symmetric positive-definite 3x3 matrix (a metric parameter Q or P).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpdMatrix {
    m: Mat3,
}

impl SpdMatrix {
    pub fn new(m: Mat3) -> Result<Self, MetricError> {
        let defect = (m - m.transpose()).norm();
        if defect > SPD_SYMMETRY_TOL {
            return Err(MetricError::NotSymmetric { defect });
        }
        let sym = 0.5 * (m + m.transpose());
        let min_eig = sym.symmetric_eigenvalues().min();
        if min_eig <= SPD_MIN_EIG {
            return Err(MetricError::NotPositiveDefinite { min_eig });
        }
        Ok(SpdMatrix { m: sym })
    }

    pub fn identity() -> Self {
        SpdMatrix { m: Mat3::identity() }
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.m
    }

    pub fn inverse(&self) -> Mat3 {
        self.m.try_inverse().expect("SPD matrices are invertible")
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.m.symmetric_eigenvalues().min()
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.m.symmetric_eigenvalues().max()
    }

    /// Principal square root.
    pub fn sqrt(&self) -> Mat3 {
        self.eig_map(f64::sqrt)
    }

    /// Inverse of the principal square root.
    pub fn inv_sqrt(&self) -> Mat3 {
        self.eig_map(|l| 1.0 / l.sqrt())
    }

    fn eig_map(&self, f: impl Fn(f64) -> f64) -> Mat3 {
        let eig = self.m.symmetric_eigen();
        let d = Mat3::from_diagonal(&eig.eigenvalues.map(f));
        eig.eigenvectors * d * eig.eigenvectors.transpose()
    }
}

/// Product metric parameters (Q for the rotation factor, P for velocity).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricPair {
    pub q: SpdMatrix,
    pub p: SpdMatrix,
}

impl MetricPair {
    pub fn new(q: SpdMatrix, p: SpdMatrix) -> Self {
        MetricPair { q, p }
    }

    pub fn identity() -> Self {
        MetricPair {
            q: SpdMatrix::identity(),
            p: SpdMatrix::identity(),
        }
    }
}

/// A point of SO(3) x R3.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct State {
    pub r: Rotation,
    pub omega: Vec3,
}

impl State {
    pub fn new(r: Rotation, omega: Vec3) -> Self {
        State { r, omega }
    }
}

/// Product-metric ball: the reachability over-approximation primitive.
#[derive(Debug, Clone, Copy)]
pub struct MetricBall {
    pub center: State,
    pub radius: f64,
    pub metric: MetricPair,
}

impl MetricBall {
    pub fn new(center: State, radius: f64, metric: MetricPair) -> Self {
        assert!(radius >= 0.0, "ball radius must be nonnegative");
        MetricBall {
            center,
            radius,
            metric,
        }
    }
}

/// G_Q metric ball on the rotation factor alone.
#[derive(Debug, Clone, Copy)]
pub struct RotationBall {
    pub center: Rotation,
    pub radius: f64,
    pub q: SpdMatrix,
}

/// d_P(x, y) = |x - y|_P = sqrt((x-y)^T P (x-y)).
pub fn p_distance(p: &SpdMatrix, x: &Vec3, y: &Vec3) -> f64 {
    let d = x - y;
    (d.dot(&(p.matrix() * d))).max(0.0).sqrt()
}

/// Endpoint of a G_Q geodesic integration, with the conserved-quantity drift
/// observed along the way.
#[derive(Debug, Clone, Copy)]
pub struct GeodesicEndpoint {
    pub rotation: Rotation,
    pub velocity: Vec3,
    /// max_t |w(t)^T Q w(t) - w(0)^T Q w(0)| / w(0)^T Q w(0), over all
    /// integration steps.
    pub energy_drift: f64,
}

/// Integrates dR/dt = R hat(w), Q dw/dt = -w x Qw from (r0, w0) to time t,
/// returning the full endpoint. Step size 1e-3.
pub fn geodesic_flow(q: &SpdMatrix, r0: &Rotation, w0: &Vec3, t: f64) -> GeodesicEndpoint {
    geodesic_flow_with_step(q, r0, w0, t, GEODESIC_STEP)
}

/// Position part of [`geodesic_flow`].
pub fn geodesic_endpoint(q: &SpdMatrix, r0: &Rotation, w0: &Vec3, t: f64) -> Rotation {
    geodesic_flow(q, r0, w0, t).rotation
}

pub(crate) fn geodesic_flow_with_step(
    q: &SpdMatrix,
    r0: &Rotation,
    w0: &Vec3,
    t: f64,
    h_max: f64,
) -> GeodesicEndpoint {
    assert!((0.0..=1.0).contains(&t), "geodesic time must lie in [0, 1]");
    if t == 0.0 {
        return GeodesicEndpoint {
            rotation: *r0,
            velocity: *w0,
            energy_drift: 0.0,
        };
    }
    let qm = *q.matrix();
    let qinv = q.inverse();
    let rhs = move |w: &Vec3| -(qinv * w.cross(&(qm * w)));

    let n = substep_count(t, h_max);
    let h = t / n as f64;
    let e0 = w0.dot(&(qm * w0));
    let mut base = *r0;
    let mut u = Vec3::zeros();
    let mut w = *w0;
    let mut drift: f64 = 0.0;
    for _ in 0..n {
        let (nu, nw) = rk4_step_body(u, w, h, &rhs);
        u = nu;
        w = nw;
        drift = drift.max((w.dot(&(qm * w)) - e0).abs());
        if u.norm_squared() > 1.0 {
            base = polish(&(&base * &crate::so3::exp_so3(&u)));
            u = Vec3::zeros();
        }
    }
    GeodesicEndpoint {
        rotation: polish(&(&base * &crate::so3::exp_so3(&u))),
        velocity: w,
        energy_drift: if e0 > 0.0 { drift / e0 } else { drift },
    }
}

/// Shooting-solver knobs. The internal step is coarser than
/// [`GEODESIC_STEP`]: RK4 global error at 5e-3 is ~1e-10 on the radii the
/// radius cap admits, well under the residual tolerance.
#[derive(Debug, Clone, Copy)]
pub struct ShootingConfig {
    pub max_iterations: usize,
    pub residual_tol: f64,
    /// Bi-invariant angle beyond which the solve is refused.
    pub radius: f64,
    pub step: f64,
}

impl Default for ShootingConfig {
    fn default() -> Self {
        ShootingConfig {
            max_iterations: 50,
            residual_tol: 1e-10,
            radius: std::f64::consts::FRAC_PI_2,
            step: 5e-3,
        }
    }
}

/// Geodesic distance on (SO(3), G_Q) by boundary-value shooting, default
/// configuration.
pub fn geodesic_distance_q(q: &SpdMatrix, r1: &Rotation, r2: &Rotation) -> Result<f64, MetricError> {
    geodesic_distance_q_with(&ShootingConfig::default(), q, r1, r2)
}

/// Geodesic distance with explicit solver configuration. Returns
/// sqrt(w0^T Q w0) for the shooting solution w0 with
/// geodesic_endpoint(q, r1, w0, 1) = r2.
pub fn geodesic_distance_q_with(
    cfg: &ShootingConfig,
    q: &SpdMatrix,
    r1: &Rotation,
    r2: &Rotation,
) -> Result<f64, MetricError> {
    let w = shoot_velocity(cfg, q, r1, r2)?;
    Ok(w.dot(&(q.matrix() * w)).max(0.0).sqrt())
}

/// The shooting solution itself: initial reduced velocity w0 whose
/// geodesic reaches r2 at t = 1.
pub fn shoot_velocity(
    cfg: &ShootingConfig,
    q: &SpdMatrix,
    r1: &Rotation,
    r2: &Rotation,
) -> Result<Vec3, MetricError> {
    let d_bi = bi_invariant_distance(r1, r2);
    if d_bi > cfg.radius {
        return Err(MetricError::BeyondShootingRadius {
            distance: d_bi,
            radius: cfg.radius,
        });
    }
    if d_bi == 0.0 {
        return Ok(Vec3::zeros());
    }

    let residual_of = |w: &Vec3| -> Result<Vec3, MetricError> {
        let end = geodesic_flow_with_step(q, r1, w, 1.0, cfg.step).rotation;
        log_so3(&r2.between(&end)).map_err(|_| MetricError::ShootingDiverged {
            residual: f64::INFINITY,
            iterations: 0,
        })
    };

    // One-parameter-subgroup initialization; exact for Q = I.
    let mut w = log_so3(&r1.between(r2))?;
    let mut res = residual_of(&w)?;
    let mut res_norm = res.norm();
    // Near-identity endpoint map: start the quasi-Newton from J = I and
    // Broyden-update; fall back to finite differences on stagnation.
    let mut jac = Mat3::identity();
    let mut since_fd = 0usize;
    for iteration in 0..cfg.max_iterations {
        if res_norm <= cfg.residual_tol {
            return Ok(w);
        }
        let full_step = jac
            .lu()
            .solve(&res)
            .unwrap_or(res);
        let mut accepted = false;
        let mut scale = 1.0;
        for _ in 0..8 {
            let w_try = w - scale * full_step;
            if let Ok(res_try) = residual_of(&w_try) {
                let n_try = res_try.norm();
                if n_try < res_norm {
                    let dw = w_try - w;
                    let dres = res_try - res;
                    // Broyden rank-1 update
                    jac += (dres - jac * dw) * dw.transpose() / dw.norm_squared();
                    w = w_try;
                    res = res_try;
                    res_norm = n_try;
                    accepted = true;
                    break;
                }
            }
            scale *= 0.5;
        }
        if !accepted || since_fd > 6 {
            // Forward-difference Jacobian refresh
            let eps = 1e-6;
            let mut cols = [Vec3::zeros(); 3];
            for (k, col) in cols.iter_mut().enumerate() {
                let mut wp = w;
                wp[k] += eps;
                *col = (residual_of(&wp)? - res) / eps;
            }
            jac = Mat3::from_columns(&cols);
            since_fd = 0;
            if !accepted {
                let step = jac.lu().solve(&res).unwrap_or(res);
                let w_try = w - step;
                if let Ok(res_try) = residual_of(&w_try) {
                    let n_try = res_try.norm();
                    if n_try < res_norm {
                        w = w_try;
                        res = res_try;
                        res_norm = n_try;
                    } else {
                        return Err(MetricError::ShootingDiverged {
                            residual: res_norm,
                            iterations: iteration,
                        });
                    }
                } else {
                    return Err(MetricError::ShootingDiverged {
                        residual: res_norm,
                        iterations: iteration,
                    });
                }
            }
        } else {
            since_fd += 1;
        }
    }
    if res_norm <= cfg.residual_tol {
        return Ok(w);
    }
    Err(MetricError::ShootingDiverged {
        residual: res_norm,
        iterations: cfg.max_iterations,
    })
}

/// Product distance sqrt(d_Q^2 + d_P^2) on SO(3) x R3.
pub fn product_distance(m: &MetricPair, s1: &State, s2: &State) -> Result<f64, MetricError> {
    product_distance_with(&ShootingConfig::default(), m, s1, s2)
}

pub fn product_distance_with(
    cfg: &ShootingConfig,
    m: &MetricPair,
    s1: &State,
    s2: &State,
) -> Result<f64, MetricError> {
    let dq = geodesic_distance_q_with(cfg, &m.q, &s1.r, &s2.r)?;
    let dp = p_distance(&m.p, &s1.omega, &s2.omega);
    Ok((dq * dq + dp * dp).sqrt())
}

/// Ball-inclusion hypothesis: true iff Q1 >= Q2 and P1 >= P2 in the
/// semidefinite order, whence every (Q1, P1)-ball is contained in the
/// (Q2, P2)-ball of the same center and radius.
pub fn ball_inclusion(m1: &MetricPair, m2: &MetricPair) -> bool {
    psd_geq(m1.q.matrix(), m2.q.matrix()) && psd_geq(m1.p.matrix(), m2.p.matrix())
}

/// a >= b in the semidefinite order, with eigenvalue slack PSD_ORDER_TOL.
pub(crate) fn psd_geq(a: &Mat3, b: &Mat3) -> bool {
    let d = a - b;
    let sym = 0.5 * (d + d.transpose());
    sym.symmetric_eigenvalues().min() >= -PSD_ORDER_TOL
}

/// Membership with slack: product_distance <= radius + CONTAINMENT_SLACK.
pub fn ball_contains(ball: &MetricBall, s: &State) -> Result<bool, MetricError> {
    let d = product_distance(&ball.metric, &ball.center, s)?;
    Ok(d <= ball.radius + CONTAINMENT_SLACK)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::so3::exp_so3;

    #[test]
    fn p_distance_euclidean_case() {
        let p = SpdMatrix::identity();
        let d = p_distance(&p, &Vec3::new(3.0, 4.0, 0.0), &Vec3::zeros());
        assert!((d - 5.0).abs() < 1e-15);
    }

    #[test]
    fn p_distance_anisotropic() {
        let p = SpdMatrix::new(Mat3::from_diagonal(&Vec3::new(4.0, 1.0, 1.0))).unwrap();
        let d = p_distance(&p, &Vec3::new(1.0, 0.0, 0.0), &Vec3::zeros());
        assert!((d - 2.0).abs() < 1e-15);
    }

    #[test]
    fn spd_rejects_asymmetric_and_indefinite() {
        let mut m = Mat3::identity();
        m[(0, 1)] = 1e-3;
        assert!(matches!(
            SpdMatrix::new(m),
            Err(MetricError::NotSymmetric { .. })
        ));
        let neg = Mat3::from_diagonal(&Vec3::new(1.0, -0.5, 1.0));
        assert!(matches!(
            SpdMatrix::new(neg),
            Err(MetricError::NotPositiveDefinite { .. })
        ));
    }

    #[test]
    fn geodesic_bi_invariant_case_is_subgroup() {
        let q = SpdMatrix::identity();
        let r0 = exp_so3(&Vec3::new(0.3, -0.1, 0.2));
        let w0 = Vec3::new(0.4, 0.5, -0.2);
        for t in [0.0, 0.37, 1.0] {
            let end = geodesic_endpoint(&q, &r0, &w0, t);
            let exact = &r0 * &exp_so3(&(t * w0));
            assert!((end.matrix() - exact.matrix()).norm() < 1e-9);
        }
    }

    #[test]
    fn geodesic_eigenvector_velocity_is_stationary() {
        let q = SpdMatrix::new(Mat3::from_diagonal(&Vec3::new(2.0, 1.0, 0.5))).unwrap();
        let r0 = Rotation::identity();
        let w0 = Vec3::new(0.0, 0.7, 0.0);
        let end = geodesic_endpoint(&q, &r0, &w0, 1.0);
        let exact = exp_so3(&w0);
        assert!((end.matrix() - exact.matrix()).norm() < 1e-9);
    }

    #[test]
    fn distance_trivial_cases() {
        let q = SpdMatrix::identity();
        let r = exp_so3(&Vec3::new(0.2, 0.1, -0.3));
        assert_eq!(geodesic_distance_q(&q, &r, &r).unwrap(), 0.0);
        let r2 = exp_so3(&Vec3::new(0.2, 0.1, 0.4));
        let d = geodesic_distance_q(&q, &r, &r2).unwrap();
        assert!((d - bi_invariant_distance(&r, &r2)).abs() < 1e-8);
    }

    #[test]
    fn distance_refuses_beyond_radius() {
        let q = SpdMatrix::identity();
        let r2 = exp_so3(&Vec3::new(0.0, 0.0, 2.0));
        assert!(matches!(
            geodesic_distance_q(&q, &Rotation::identity(), &r2),
            Err(MetricError::BeyondShootingRadius { .. })
        ));
    }

    #[test]
    fn ball_inclusion_order() {
        let two = SpdMatrix::new(2.0 * Mat3::identity()).unwrap();
        let one = SpdMatrix::identity();
        let m_fine = MetricPair::new(two, one);
        let m_coarse = MetricPair::new(one, one);
        assert!(ball_inclusion(&m_fine, &m_coarse));
        assert!(!ball_inclusion(&m_coarse, &m_fine));
    }

    #[test]
    fn product_distance_degenerate_factors() {
        let m = MetricPair::identity();
        let r = exp_so3(&Vec3::new(0.1, 0.0, 0.2));
        let s1 = State::new(r, Vec3::new(1.0, 2.0, 3.0));
        let s2 = State::new(r, Vec3::new(1.0, 2.5, 3.0));
        let d = product_distance(&m, &s1, &s2).unwrap();
        assert!((d - 0.5).abs() < 1e-12);

        let s3 = State::new(exp_so3(&Vec3::new(0.1, 0.0, 0.5)), s1.omega);
        let d2 = product_distance(&m, &s1, &s3).unwrap();
        assert!((d2 - bi_invariant_distance(&s1.r, &s3.r)).abs() < 1e-8);
    }
}
