//! Contraction certificates for the attitude system: the state-dependent
//! Jacobian factors A (rotation direction) and B (velocity direction), the
//! 6x6 block LMI whose negative semidefiniteness certifies a contraction
//! rate c on a region, and the connection-coefficient identities behind
//! the LMI's rotation block.
//!
//! The LMI is entrywise affine in (A, B, hat(omega)) for fixed (Q, P, c),
//! so checking it at every vertex of an interval region is sufficient for
//! the whole region. Only entries of nonzero interval width are
//! enumerated; hat(omega) vertices come from omega-box corners so skewness
//! is preserved, never from an independent 3x3 entrywise box.

use crate::dynamics::AttitudeSystem;
use crate::interval::IntervalVec3;
use crate::metrics::{MetricPair, SpdMatrix, State};
use crate::so3::{exp_so3, hat, Mat3, Vec3};
use thiserror::Error;

pub type Mat6 = nalgebra::Matrix6<f64>;

/// Central-difference step of [`jacobian_a`] and [`jacobian_b`].
pub const FD_STEP: f64 = 1e-6;
/// Eigenvalue tolerance of [`check_certificate`].
pub const LMI_TOL: f64 = 1e-8;
/// Default vertex-enumeration cap.
pub const VERTEX_CAP: usize = 1 << 15;
/// Asymmetry budget for rounding noise in [`build_lmi`].
const LMI_ASYMMETRY_TOL: f64 = 1e-13;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ContractionError {
    #[error("interval LMI check needs {count} vertices, above the cap {cap}")]
    TooManyVertices { count: usize, cap: usize },
}

/// Entrywise matrix interval.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IntervalMatrix {
    lower: Mat3,
    upper: Mat3,
}

impl IntervalMatrix {
    pub fn new(lower: Mat3, upper: Mat3) -> Self {
        assert!(
            lower.iter().zip(upper.iter()).all(|(l, u)| l <= u),
            "interval matrix bounds out of order"
        );
        IntervalMatrix { lower, upper }
    }

    pub fn point(m: Mat3) -> Self {
        IntervalMatrix { lower: m, upper: m }
    }

    /// Tight entrywise enclosure of a nonempty sample set.
    pub fn enclosing<'a>(samples: impl IntoIterator<Item = &'a Mat3>) -> Self {
        let mut it = samples.into_iter();
        let first = *it.next().expect("enclosing needs at least one sample");
        let mut lower = first;
        let mut upper = first;
        for m in it {
            lower.zip_apply(m, |l, v| *l = l.min(v));
            upper.zip_apply(m, |u, v| *u = u.max(v));
        }
        IntervalMatrix { lower, upper }
    }

    pub fn lower(&self) -> &Mat3 {
        &self.lower
    }

    pub fn upper(&self) -> &Mat3 {
        &self.upper
    }

    pub fn center(&self) -> Mat3 {
        0.5 * (self.lower + self.upper)
    }

    pub fn inflate(&self, margin: f64) -> Self {
        assert!(margin >= 0.0);
        IntervalMatrix {
            lower: self.lower.add_scalar(-margin),
            upper: self.upper.add_scalar(margin),
        }
    }

    pub fn contains(&self, m: &Mat3) -> bool {
        self.lower
            .iter()
            .zip(self.upper.iter())
            .zip(m.iter())
            .all(|((l, u), v)| *l <= *v && *v <= *u)
    }

    pub fn max_width(&self) -> f64 {
        (self.upper - self.lower).amax()
    }

    /// Positions (row, col) whose interval has nonzero width.
    fn varying_positions(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..3 {
            for j in 0..3 {
                if self.lower[(i, j)] < self.upper[(i, j)] {
                    out.push((i, j));
                }
            }
        }
        out
    }

    fn vertex(&self, positions: &[(usize, usize)], mask: usize) -> Mat3 {
        let mut m = self.lower;
        for (bit, &(i, j)) in positions.iter().enumerate() {
            if mask & (1 << bit) != 0 {
                m[(i, j)] = self.upper[(i, j)];
            }
        }
        m
    }
}

/// Interval region the certificate must hold on: an omega-box plus
/// entrywise enclosures of A and B over the tube.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SearchRegion {
    pub omega_box: IntervalVec3,
    pub a_interval: IntervalMatrix,
    pub b_interval: IntervalMatrix,
}

impl SearchRegion {
    pub fn new(omega_box: IntervalVec3, a_interval: IntervalMatrix, b_interval: IntervalMatrix) -> Self {
        SearchRegion {
            omega_box,
            a_interval,
            b_interval,
        }
    }

    /// Zero-width region at a single (omega, A, B) point.
    pub fn point(omega: &Vec3, a: Mat3, b: Mat3) -> Self {
        SearchRegion {
            omega_box: IntervalVec3::point(omega),
            a_interval: IntervalMatrix::point(a),
            b_interval: IntervalMatrix::point(b),
        }
    }
}

/// A contraction certificate: metric pair, rate, and the region it is
/// claimed on.
#[derive(Debug, Clone, Copy)]
pub struct Certificate {
    pub metric: MetricPair,
    pub c: f64,
    pub region: SearchRegion,
}

/// Directional derivative of the closed-loop acceleration along rotation
/// directions: column k is d/dt X_omega(R exp(t hat(e_k)), omega) at t=0,
/// by central differences with algebra step FD_STEP.
pub fn jacobian_a(sys: &AttitudeSystem, s: &State) -> Mat3 {
    let mut cols = [Vec3::zeros(); 3];
    for (k, col) in cols.iter_mut().enumerate() {
        let mut e = Vec3::zeros();
        e[k] = FD_STEP;
        let rp = &s.r * &exp_so3(&e);
        let rm = &s.r * &exp_so3(&(-e));
        *col = (sys.omega_dot(&rp, &s.omega) - sys.omega_dot(&rm, &s.omega)) / (2.0 * FD_STEP);
    }
    Mat3::from_columns(&cols)
}

/// Partial derivatives of the closed-loop acceleration in omega, central
/// differences with step FD_STEP.
pub fn jacobian_b(sys: &AttitudeSystem, s: &State) -> Mat3 {
    let mut cols = [Vec3::zeros(); 3];
    for (k, col) in cols.iter_mut().enumerate() {
        let mut e = Vec3::zeros();
        e[k] = FD_STEP;
        *col = (sys.omega_dot(&s.r, &(s.omega + e)) - sys.omega_dot(&s.r, &(s.omega - e)))
            / (2.0 * FD_STEP);
    }
    Mat3::from_columns(&cols)
}

/// The 6x6 certificate matrix
/// [[hat(w)Q - Q hat(w) - 2cQ, Q + A^T P], [Q + PA, B^T P + PB - 2cP]].
/// Negative semidefiniteness at a point certifies rate c there.
pub fn build_lmi(m: &MetricPair, c: f64, a: &Mat3, b: &Mat3, omega: &Vec3) -> Mat6 {
    let q = m.q.matrix();
    let p = m.p.matrix();
    let w = hat(omega);
    let tl = w * q - q * w - 2.0 * c * q;
    let tr = q + a.transpose() * p;
    let bl = q + p * a;
    let br = b.transpose() * p + p * b - 2.0 * c * p;

    let mut out = Mat6::zeros();
    out.fixed_view_mut::<3, 3>(0, 0).copy_from(&tl);
    out.fixed_view_mut::<3, 3>(0, 3).copy_from(&tr);
    out.fixed_view_mut::<3, 3>(3, 0).copy_from(&bl);
    out.fixed_view_mut::<3, 3>(3, 3).copy_from(&br);

    let asym = (out - out.transpose()).amax();
    assert!(
        asym <= LMI_ASYMMETRY_TOL,
        "certificate matrix asymmetry {asym:e} above rounding budget"
    );
    0.5 * (out + out.transpose())
}

/// Checks the certificate over its whole region by vertex enumeration,
/// default tolerance and cap.
pub fn check_certificate(cert: &Certificate) -> Result<bool, ContractionError> {
    check_certificate_with(cert, LMI_TOL, VERTEX_CAP)
}

/// Vertex-enumeration check with explicit eigenvalue tolerance and vertex
/// cap. True iff the LMI has max eigenvalue <= tol at every vertex of
/// a_interval x b_interval x omega-box corners.
pub fn check_certificate_with(
    cert: &Certificate,
    tol: f64,
    cap: usize,
) -> Result<bool, ContractionError> {
    Ok(worst_vertex_eigenvalue(cert, cap)? <= tol)
}

/// Max over vertices of the max LMI eigenvalue; the margin the certificate
/// holds (or fails) by.
pub fn worst_vertex_eigenvalue(cert: &Certificate, cap: usize) -> Result<f64, ContractionError> {
    let mut worst = f64::NEG_INFINITY;
    for (a, b, omega) in region_vertices(&cert.region, cap)? {
        let lmi = build_lmi(&cert.metric, cert.c, &a, &b, &omega);
        worst = worst.max(lmi.symmetric_eigenvalues().max());
    }
    Ok(worst)
}

/// All (A, B, omega) vertices of a region: A-interval vertices crossed
/// with B-interval vertices crossed with omega-box corners. Only entries
/// of nonzero width are enumerated.
pub fn region_vertices(
    region: &SearchRegion,
    cap: usize,
) -> Result<Vec<(Mat3, Mat3, Vec3)>, ContractionError> {
    let a_pos = region.a_interval.varying_positions();
    let b_pos = region.b_interval.varying_positions();
    let o_pos: Vec<usize> = (0..3)
        .filter(|&k| region.omega_box.component(k).width() > 0.0)
        .collect();
    let bits = a_pos.len() + b_pos.len() + o_pos.len();
    let count = 1usize << bits;
    if count > cap {
        return Err(ContractionError::TooManyVertices { count, cap });
    }

    let omega_vertex = |mask: usize| {
        let mut w = region.omega_box.midpoint();
        for (bit, &k) in o_pos.iter().enumerate() {
            let iv = region.omega_box.component(k);
            w[k] = if mask & (1 << bit) != 0 { iv.hi } else { iv.lo };
        }
        w
    };

    let mut out = Vec::with_capacity(count);
    for a_mask in 0..1usize << a_pos.len() {
        let a = region.a_interval.vertex(&a_pos, a_mask);
        for b_mask in 0..1usize << b_pos.len() {
            let b = region.b_interval.vertex(&b_pos, b_mask);
            for o_mask in 0..1usize << o_pos.len() {
                out.push((a, b, omega_vertex(o_mask)));
            }
        }
    }
    Ok(out)
}

/// Connection coefficients eta_{i,j} of the left-invariant metric G_Q in
/// the left-invariant frame, i, j in {1,2,3} (one-based). Nine closed
/// forms in the entries of Q.
pub fn eta_coefficients(q: &SpdMatrix, i: usize, j: usize) -> Vec3 {
    assert!(
        (1..=3).contains(&i) && (1..=3).contains(&j),
        "frame indices are one-based in 1..=3"
    );
    let m = q.matrix();
    let (q11, q12, q13) = (m[(0, 0)], m[(0, 1)], m[(0, 2)]);
    let (q22, q23, q33) = (m[(1, 1)], m[(1, 2)], m[(2, 2)]);
    match (i, j) {
        (1, 1) => Vec3::new(0.0, -q13, q12),
        (1, 2) => Vec3::new(q13, 0.0, 0.5 * (-q11 + q22 + q33)),
        (1, 3) => Vec3::new(-q12, 0.5 * (q11 - q22 - q33), 0.0),
        (2, 1) => Vec3::new(0.0, -q23, 0.5 * (-q11 + q22 - q33)),
        (2, 2) => Vec3::new(q23, 0.0, -q12),
        (2, 3) => Vec3::new(0.5 * (q11 - q22 + q33), q12, 0.0),
        (3, 1) => Vec3::new(0.0, 0.5 * (q11 + q22 - q33), q23),
        (3, 2) => Vec3::new(0.5 * (-q11 - q22 + q33), 0.0, -q13),
        (3, 3) => Vec3::new(-q23, q13, 0.0),
        _ => unreachable!(),
    }
}

/// Residual of the closed-form contraction of the connection coefficients:
/// sum_{i,j} alpha_i omega_j Q^{-1} eta_{i,j} against
/// Q^{-1} hat(omega) Q alpha - (tr(Q)/2) Q^{-1} hat(omega) alpha.
pub fn covariant_identity_residual(q: &SpdMatrix, alpha: &Vec3, omega: &Vec3) -> f64 {
    let qinv = q.inverse();
    let mut lhs = Vec3::zeros();
    for i in 1..=3 {
        for j in 1..=3 {
            lhs += alpha[i - 1] * omega[j - 1] * (qinv * eta_coefficients(q, i, j));
        }
    }
    let w = hat(omega);
    let rhs =
        qinv * (w * (q.matrix() * alpha)) - 0.5 * q.matrix().trace() * (qinv * (w * alpha));
    (lhs - rhs).norm()
}
