//! Rigid-body attitude dynamics dR/dt = R hat(omega),
//! J domega/dt = -omega x (J omega) + tau, with a pluggable torque law, and
//! a Lie-group integrator for it.
//!
//! The integrator is a Runge-Kutta-Munthe-Kaas scheme: each step advances
//! algebra coordinates u with u' = dexpinv(-u, omega) by classical RK4 and
//! recombines through the exponential, so iterates stay on SO(3) up to
//! roundoff; a cheap polar correction absorbs that roundoff each step.
//! J is only required to be invertible. Feedback laws may make the closed
//! loop non-physical on purpose, as with the built-in J-squared law whose
//! closed loop is the linear system domega/dt = J omega.

use crate::integrate::{rk4_step_full, substep_count};
use crate::interval::IntervalVec3;
use crate::metrics::State;
use crate::so3::{exp_so3, reorthonormalize, Mat3, Rotation, Vec3};
use std::fmt;
use std::sync::Arc;
use thiserror::Error;

/// Inertia determinant threshold of [`AttitudeSystem::new`].
pub const INERTIA_DET_TOL: f64 = 1e-9;
/// Largest single-step size accepted by [`step`].
pub const MAX_STEP: f64 = 0.05;
/// Default substep bound of [`simulate`].
pub const DEFAULT_H_MAX: f64 = 1e-3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("inertia matrix is numerically singular (det {det:.3e})")]
    SingularInertia { det: f64 },
}

type TorqueFn = dyn Fn(&Rotation, &Vec3) -> Vec3 + Send + Sync;
type HullFn = dyn Fn(&IntervalVec3) -> IntervalVec3 + Send + Sync;

/// User-supplied feedback law.
#[derive(Clone)]
pub struct CustomLaw {
    pub name: String,
    pub torque: Arc<TorqueFn>,
    /// Interval extension of the closed-loop omega derivative over an
    /// omega-box, valid for every rotation. Required for guaranteed tube
    /// bounding; without it reach-set routines refuse the law.
    pub omega_dot_hull: Option<Arc<HullFn>>,
}

#[derive(Clone)]
pub enum ControlLaw {
    /// tau = 0: free rigid body.
    Zero,
    /// tau = J^2 omega + hat(omega) J omega, closing the loop to
    /// domega/dt = J omega.
    JSquaredFeedback,
    Custom(CustomLaw),
}

impl fmt::Debug for ControlLaw {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ControlLaw::Zero => f.write_str("Zero"),
            ControlLaw::JSquaredFeedback => f.write_str("JSquaredFeedback"),
            ControlLaw::Custom(law) => f
                .debug_struct("Custom")
                .field("name", &law.name)
                .finish_non_exhaustive(),
        }
    }
}

/// The controlled rigid body: inertia plus feedback law. Immutable.
#[derive(Debug, Clone)]
pub struct AttitudeSystem {
    inertia: Mat3,
    inertia_inv: Mat3,
    law: ControlLaw,
}

impl AttitudeSystem {
    pub fn new(inertia: Mat3, law: ControlLaw) -> Result<Self, DynamicsError> {
        let det = inertia.determinant();
        if det.abs() <= INERTIA_DET_TOL {
            return Err(DynamicsError::SingularInertia { det });
        }
        let inertia_inv = inertia
            .try_inverse()
            .ok_or(DynamicsError::SingularInertia { det })?;
        Ok(AttitudeSystem {
            inertia,
            inertia_inv,
            law,
        })
    }

    pub fn inertia(&self) -> &Mat3 {
        &self.inertia
    }

    pub fn inertia_inverse(&self) -> &Mat3 {
        &self.inertia_inv
    }

    pub fn law(&self) -> &ControlLaw {
        &self.law
    }

    pub fn torque(&self, r: &Rotation, omega: &Vec3) -> Vec3 {
        match &self.law {
            ControlLaw::Zero => Vec3::zeros(),
            ControlLaw::JSquaredFeedback => {
                let j_omega = self.inertia * omega;
                self.inertia * j_omega + omega.cross(&j_omega)
            }
            ControlLaw::Custom(law) => (law.torque)(r, omega),
        }
    }

    /// Closed-loop angular acceleration J^{-1}(-omega x (J omega) + tau).
    pub fn omega_dot(&self, r: &Rotation, omega: &Vec3) -> Vec3 {
        let j_omega = self.inertia * omega;
        self.inertia_inv * (self.torque(r, omega) - omega.cross(&j_omega))
    }

    /// Interval enclosure of [`Self::omega_dot`] over an omega-box, valid
    /// for every rotation. None when a custom law supplies no extension.
    pub fn omega_dot_hull(&self, omega_box: &IntervalVec3) -> Option<IntervalVec3> {
        match &self.law {
            ControlLaw::Zero => {
                let j_box = omega_box.matrix_image(&self.inertia);
                Some((-omega_box.cross(&j_box)).matrix_image(&self.inertia_inv))
            }
            // Closed loop is exactly domega/dt = J omega.
            ControlLaw::JSquaredFeedback => Some(omega_box.matrix_image(&self.inertia)),
            ControlLaw::Custom(law) => law.omega_dot_hull.as_ref().map(|h| h(omega_box)),
        }
    }
}

/// The full vector field at a state: tangent R hat(omega) on the group
/// factor, closed-loop acceleration on the velocity factor.
pub fn vector_field(sys: &AttitudeSystem, s: &State) -> (Mat3, Vec3) {
    let tangent = s.r.matrix() * crate::so3::hat(&s.omega);
    (tangent, sys.omega_dot(&s.r, &s.omega))
}

/// One integrator step of size h, 0 < h <= MAX_STEP. Local error O(h^5).
pub fn step(sys: &AttitudeSystem, s: &State, h: f64) -> State {
    assert!(
        h > 0.0 && h <= MAX_STEP,
        "step size must lie in (0, {MAX_STEP}]"
    );
    let f = |r: &Rotation, w: &Vec3| sys.omega_dot(r, w);
    let (u, w) = rk4_step_full(&s.r, Vec3::zeros(), s.omega, h, &f);
    let advanced = &s.r * &exp_so3(&u);
    let r = reorthonormalize(advanced.matrix())
        .expect("one-step drift stays within repair range");
    State { r, omega: w }
}

/// Time-stamped states along a simulation.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<State>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

/// Simulation sampled exactly at t_grid, internal substeps <= DEFAULT_H_MAX.
pub fn simulate(sys: &AttitudeSystem, s0: &State, t_grid: &[f64]) -> Trajectory {
    simulate_with(sys, s0, t_grid, DEFAULT_H_MAX)
}

pub fn simulate_with(sys: &AttitudeSystem, s0: &State, t_grid: &[f64], h_max: f64) -> Trajectory {
    assert!(!t_grid.is_empty(), "time grid must be nonempty");
    assert!(t_grid[0] == 0.0, "time grid must start at 0");
    assert!(
        t_grid.windows(2).all(|w| w[0] < w[1]),
        "time grid must be strictly increasing"
    );
    assert!(h_max > 0.0);

    let mut states = Vec::with_capacity(t_grid.len());
    let mut current = *s0;
    states.push(current);
    for pair in t_grid.windows(2) {
        let span = pair[1] - pair[0];
        let n = substep_count(span, h_max);
        let h = span / n as f64;
        for _ in 0..n {
            current = step(sys, &current, h);
        }
        states.push(current);
    }
    Trajectory {
        times: t_grid.to_vec(),
        states,
    }
}
