//! Over-approximation of reachable sets for rigid-body attitude control
//! systems on SO(3) x R3.
//!
//! The pipeline: simulate a nominal trajectory, enclose the angular-velocity
//! tube over each step in an interval box, synthesize a per-step contraction
//! certificate (Q, P, c) by semidefinite feasibility over the box vertices,
//! and propagate a product-metric ball whose radius grows by exp(c dt) per
//! step. Metric balls on SO(3) are exported to Euclidean coordinates through
//! the four-chart exp atlas by integrating the reduced geodesic equations.
//!
//! Module layering, bottom up:
//!
//! - [`so3`]: hat/vee, exponential/logarithm, bi-invariant distance,
//!   re-orthonormalization.
//! - [`metrics`]: the left-invariant metric family G_Q on SO(3), the P-metric
//!   on R3, their product, geodesic integration and a shooting distance
//!   oracle.
//! - [`dynamics`]: the attitude vector field, a Lie-group integrator,
//!   trajectory simulation.
//! - [`contraction`]: the 6x6 certificate LMI, interval enclosures, vertex
//!   checking, and the covariant-derivative coefficient identities.
//! - [`sdp`]: the per-step metric-synthesis semidefinite program and the
//!   contraction-rate line search.
//! - [`reach`]: the step loop, tube bounding, ball covering, Monte-Carlo
//!   verification, avoid-set checking.
//! - [`charts`]: the exp atlas, reduced geodesic dynamics in chart
//!   coordinates, Euclidean export of metric balls.

pub mod charts;
pub mod contraction;
pub mod dynamics;
mod integrate;
mod interval;
pub mod metrics;
pub mod reach;
pub mod sdp;
pub mod so3;

pub use interval::{Interval, IntervalVec3};
