//! Internal Runge-Kutta-Munthe-Kaas stepping.
//!
//! Group states are carried as R(t) = base * exp(hat(u(t))) and the step is
//! classical RK4 on the Euclidean pair (u, w), where w is the body angular
//! velocity. The transformation is exact: d/dt exp(hat(u)) = exp(hat(u))
//! hat(w) holds iff du/dt = coord_rate(u, w) with the closed-form so(3)
//! inverse differential below, so the only errors are the RK4 truncation and
//! the final exponential. Callers keep |u| <= ~1 by resetting the frame
//! (base <- base * exp(u), u <- 0); coord_rate is singular at |u| = 2 pi.

use crate::so3::{exp_so3, Rotation, Vec3};

/// Second-order coefficient of the inverse differential of exp at squared
/// angle t2: beta(t) = 1/t^2 - (1 + cos t)/(2 t sin t), with the series
/// 1/12 + t^2/720 + t^4/30240 below t^2 = 1e-4. The (1 + cos) form stays
/// cancellation-free down to the switch, where the branches agree to ~1e-12.
pub(crate) fn dexpinv_beta(t2: f64) -> f64 {
    if t2 < 1e-4 {
        1.0 / 12.0 + t2 / 720.0 + t2 * t2 / 30240.0
    } else {
        let t = t2.sqrt();
        1.0 / t2 - (1.0 + t.cos()) / (2.0 * t * t.sin())
    }
}

/// Coordinate velocity of the exponential chart at u for body velocity w:
/// w + u x w / 2 + beta(|u|) u x (u x w).
pub(crate) fn coord_rate(u: &Vec3, w: &Vec3) -> Vec3 {
    let uxw = u.cross(w);
    w + 0.5 * uxw + dexpinv_beta(u.norm_squared()) * u.cross(&uxw)
}

/// One RK4 step of u' = coord_rate(u, w), w' = f(w), for right-hand sides
/// that do not depend on attitude (geodesics, attitude-independent torque).
pub(crate) fn rk4_step_body(u: Vec3, w: Vec3, h: f64, f: &impl Fn(&Vec3) -> Vec3) -> (Vec3, Vec3) {
    let k1u = coord_rate(&u, &w);
    let k1w = f(&w);
    let (u2, w2) = (u + 0.5 * h * k1u, w + 0.5 * h * k1w);
    let k2u = coord_rate(&u2, &w2);
    let k2w = f(&w2);
    let (u3, w3) = (u + 0.5 * h * k2u, w + 0.5 * h * k2w);
    let k3u = coord_rate(&u3, &w3);
    let k3w = f(&w3);
    let (u4, w4) = (u + h * k3u, w + h * k3w);
    let k4u = coord_rate(&u4, &w4);
    let k4w = f(&w4);
    (
        u + (h / 6.0) * (k1u + 2.0 * k2u + 2.0 * k3u + k4u),
        w + (h / 6.0) * (k1w + 2.0 * k2w + 2.0 * k3w + k4w),
    )
}

/// One RK4 step with attitude-dependent right-hand side; stage attitudes are
/// reconstructed as base * exp(u_stage).
pub(crate) fn rk4_step_full(
    base: &Rotation,
    u: Vec3,
    w: Vec3,
    h: f64,
    f: &impl Fn(&Rotation, &Vec3) -> Vec3,
) -> (Vec3, Vec3) {
    let at = |u_stage: &Vec3| base * &exp_so3(u_stage);
    let k1u = coord_rate(&u, &w);
    let k1w = f(&at(&u), &w);
    let (u2, w2) = (u + 0.5 * h * k1u, w + 0.5 * h * k1w);
    let k2u = coord_rate(&u2, &w2);
    let k2w = f(&at(&u2), &w2);
    let (u3, w3) = (u + 0.5 * h * k2u, w + 0.5 * h * k2w);
    let k3u = coord_rate(&u3, &w3);
    let k3w = f(&at(&u3), &w3);
    let (u4, w4) = (u + h * k3u, w + h * k3w);
    let k4u = coord_rate(&u4, &w4);
    let k4w = f(&at(&u4), &w4);
    (
        u + (h / 6.0) * (k1u + 2.0 * k2u + 2.0 * k3u + k4u),
        w + (h / 6.0) * (k1w + 2.0 * k2w + 2.0 * k3w + k4w),
    )
}

/// Number of equal substeps covering `span` with step size at most h_max.
pub(crate) fn substep_count(span: f64, h_max: f64) -> usize {
    ((span / h_max).ceil() as usize).max(1)
}
