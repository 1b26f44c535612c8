//! Reach-set over-approximation: per-step search-region tube bounding
//! (Picard-style interval inflation), certificate synthesis along a
//! nominal trajectory with the exponential radius update, covering of
//! rotation balls by identity-metric balls, Monte-Carlo containment
//! audits, and ball-avoidance verdicts.
//!
//! Soundness shape: a step's region must contain every (A, B, omega)
//! the true flow can realize on that step. The tube box is validated by
//! the inclusion box0 + [0, dt] hull(f(box)) inside box, which certifies
//! enclosure of the omega-flow; A comes from rotation-independence
//! probing (or a declared bound), B from sampled-corner hulls, exact for
//! the built-in laws whose B is entrywise affine in omega.

use crate::contraction::{
    worst_vertex_eigenvalue, Certificate, IntervalMatrix, SearchRegion, LMI_TOL,
};
use crate::dynamics::{simulate_with, AttitudeSystem, Trajectory};
use crate::interval::{Interval, IntervalVec3};
use crate::metrics::{product_distance, MetricBall, MetricError, MetricPair, SpdMatrix, State};
use crate::sdp::{line_search, SdpError};
use crate::so3::{bi_invariant_distance, exp_so3, Mat3, Rotation, Vec3};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::f64::consts::FRAC_PI_2;
use thiserror::Error;

/// Inflation rounds before tube bounding gives up.
pub const TUBE_ROUNDS: usize = 20;
/// Longest single tube-bounding span.
pub const MAX_TUBE_SPAN: f64 = 0.5;
/// Threshold on probed rotation-derivatives below which a law counts as
/// rotation-independent.
pub const R_INDEPENDENCE_TOL: f64 = 1e-8;
/// Chart-distortion margin of [`cover_rotation_ball`] cell radii.
pub const COVER_MARGIN: f64 = 1.1;
/// Sampled-hull widths at or below finite-difference noise collapse to
/// the midpoint so they do not enter vertex enumeration; the worst-case
/// eigenvalue effect of a snapped width is below the certification
/// margins.
pub const B_WIDTH_SNAP: f64 = 1e-8;
/// Default Monte-Carlo seed (overridable via the seeded variants).
pub const DEFAULT_MC_SEED: u64 = 0x5EED_AB1E;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TubeError {
    #[error("no self-consistent tube box within {rounds} inflation rounds")]
    TubeBoundDiverged { rounds: usize },
    #[error("control law varies with rotation and no enclosure of the rotation-direction Jacobian was declared")]
    RotationDependentLaw,
    #[error("custom control law supplies no interval extension for tube bounding")]
    MissingHull,
}

#[derive(Debug, Error)]
pub enum ReachError {
    #[error("step {step}: {source}")]
    Tube {
        step: usize,
        source: TubeError,
        partial: Box<ReachResult>,
    },
    #[error("step {step}: no feasible contraction rate on the line-search grid")]
    NoFeasibleRate {
        step: usize,
        partial: Box<ReachResult>,
    },
    #[error("step {step}: {source}")]
    Solver {
        step: usize,
        source: SdpError,
        partial: Box<ReachResult>,
    },
}

impl ReachError {
    /// The steps completed before the abort.
    pub fn partial(&self) -> &ReachResult {
        match self {
            ReachError::Tube { partial, .. }
            | ReachError::NoFeasibleRate { partial, .. }
            | ReachError::Solver { partial, .. } => partial,
        }
    }

    pub fn step(&self) -> usize {
        match self {
            ReachError::Tube { step, .. }
            | ReachError::NoFeasibleRate { step, .. }
            | ReachError::Solver { step, .. } => *step,
        }
    }
}

/// One accepted step of the over-approximation.
#[derive(Debug, Clone, Copy)]
pub struct ReachStep {
    pub t: f64,
    pub center: State,
    pub metric: MetricPair,
    pub radius: f64,
    /// Rate certified on the step ending here; 0 for the initial step.
    pub c: f64,
}

/// Full run configuration.
#[derive(Debug, Clone)]
pub struct ReachConfig {
    pub system: AttitudeSystem,
    pub initial: MetricBall,
    pub horizon: f64,
    pub steps: usize,
    pub c_min: f64,
    pub c_max: f64,
    pub line_search_steps: usize,
    pub h_max: f64,
    pub vertex_cap: usize,
    pub tube_rounds: usize,
    /// Required when the control law varies with rotation: an interval
    /// bound on the rotation-direction Jacobian valid over the whole run.
    pub a_enclosure: Option<IntervalMatrix>,
}

impl ReachConfig {
    pub fn new(system: AttitudeSystem, initial: MetricBall, horizon: f64, steps: usize) -> Self {
        assert!(horizon > 0.0, "horizon must be positive");
        assert!(steps >= 1, "at least one step");
        ReachConfig {
            system,
            initial,
            horizon,
            steps,
            c_min: 0.0,
            c_max: 1.0,
            line_search_steps: 3,
            h_max: crate::dynamics::DEFAULT_H_MAX,
            vertex_cap: crate::contraction::VERTEX_CAP,
            tube_rounds: TUBE_ROUNDS,
            a_enclosure: None,
        }
    }
}

/// Over-approximation output: per-step balls, the nominal trajectory, and
/// the per-step regions the certificates were synthesized on.
#[derive(Debug, Clone)]
pub struct ReachResult {
    pub steps: Vec<ReachStep>,
    pub nominal: Trajectory,
    pub regions: Vec<SearchRegion>,
}

impl ReachResult {
    /// The certificate stored with step i (covering [t_i, t_{i+1}]).
    pub fn certificate(&self, i: usize) -> Certificate {
        Certificate {
            metric: self.steps[i + 1].metric,
            c: self.steps[i + 1].c,
            region: self.regions[i],
        }
    }

    pub fn ball(&self, i: usize) -> MetricBall {
        let s = &self.steps[i];
        MetricBall::new(s.center, s.radius, s.metric)
    }
}

/// Tight axis-aligned box around the omega-ellipsoid of a ball:
/// center_k plus/minus radius sqrt((P^{-1})_kk).
pub fn omega_box_of_ball(ball: &MetricBall) -> IntervalVec3 {
    let p_inv = ball.metric.p.inverse();
    let half = Vec3::new(
        (ball.radius * ball.radius * p_inv[(0, 0)]).max(0.0).sqrt(),
        (ball.radius * ball.radius * p_inv[(1, 1)]).max(0.0).sqrt(),
        (ball.radius * ball.radius * p_inv[(2, 2)]).max(0.0).sqrt(),
    );
    IntervalVec3::centered(&ball.center.omega, &half)
}

/// Search region containing every (A, B, omega) along the tube of the
/// ball over [t0, t1]. Default rounds and no declared A-enclosure.
pub fn reach_tube(
    sys: &AttitudeSystem,
    ball: &MetricBall,
    t0: f64,
    t1: f64,
) -> Result<SearchRegion, TubeError> {
    reach_tube_with(sys, ball, t0, t1, None, TUBE_ROUNDS)
}

pub fn reach_tube_with(
    sys: &AttitudeSystem,
    ball: &MetricBall,
    t0: f64,
    t1: f64,
    a_enclosure: Option<&IntervalMatrix>,
    rounds: usize,
) -> Result<SearchRegion, TubeError> {
    assert!(t1 > t0, "tube span must be positive");
    assert!(t1 - t0 <= MAX_TUBE_SPAN, "tube span above {MAX_TUBE_SPAN}");
    let dt = Interval::new(0.0, t1 - t0);
    let box0 = omega_box_of_ball(ball);

    let picard = |cand: &IntervalVec3| -> Result<IntervalVec3, TubeError> {
        let f = sys.omega_dot_hull(cand).ok_or(TubeError::MissingHull)?;
        Ok(box0
            + IntervalVec3::new(dt * f.x, dt * f.y, dt * f.z))
    };

    let mut cand = box0;
    let mut validated = None;
    for _ in 0..rounds {
        let trial = picard(&cand)?;
        if cand.contains_box(&trial) {
            // One more application of the verified operator tightens.
            validated = Some(trial);
            break;
        }
        cand = trial.hull(&cand).inflate(1e-9 + 0.05 * trial.max_width());
    }
    let omega_box = validated.ok_or(TubeError::TubeBoundDiverged { rounds })?;

    let a_interval = match rotation_independent(sys, &omega_box) {
        true => IntervalMatrix::point(Mat3::zeros()),
        false => *a_enclosure.ok_or(TubeError::RotationDependentLaw)?,
    };
    let b_interval = sampled_b_interval(sys, ball, &omega_box);
    Ok(SearchRegion::new(omega_box, a_interval, b_interval))
}

/// Deterministic probe states for rotation-independence checks.
fn probe_rotations() -> Vec<Rotation> {
    let mut rng = ChaCha8Rng::seed_from_u64(0xA77);
    (0..8)
        .map(|_| {
            let v = Vec3::new(
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
                rng.gen_range(-2.0..2.0),
            );
            exp_so3(&v)
        })
        .collect()
}

fn rotation_independent(sys: &AttitudeSystem, omega_box: &IntervalVec3) -> bool {
    let omega = omega_box.midpoint();
    probe_rotations().iter().all(|r| {
        let a = crate::contraction::jacobian_a(sys, &State::new(*r, omega));
        a.amax() <= R_INDEPENDENCE_TOL
    })
}

/// Entrywise hull of the velocity-direction Jacobian over box corners,
/// the box center, and a spread of rotations, with widths at FD-noise
/// scale snapped to the midpoint. Exact for laws whose B is entrywise
/// affine in omega and rotation-independent (both built-ins).
fn sampled_b_interval(
    sys: &AttitudeSystem,
    ball: &MetricBall,
    omega_box: &IntervalVec3,
) -> IntervalMatrix {
    let mut rotations = probe_rotations();
    rotations.push(ball.center.r);
    let mut omegas: Vec<Vec3> = omega_box.corners().to_vec();
    omegas.push(omega_box.midpoint());
    let samples: Vec<Mat3> = rotations
        .iter()
        .flat_map(|r| {
            omegas
                .iter()
                .map(|w| crate::contraction::jacobian_b(sys, &State::new(*r, *w)))
                .collect::<Vec<_>>()
        })
        .collect();
    let hull = IntervalMatrix::enclosing(samples.iter());
    let mut lo = *hull.lower();
    let mut hi = *hull.upper();
    for r in 0..3 {
        for c in 0..3 {
            if hi[(r, c)] - lo[(r, c)] <= B_WIDTH_SNAP {
                let mid = 0.5 * (lo[(r, c)] + hi[(r, c)]);
                lo[(r, c)] = mid;
                hi[(r, c)] = mid;
            } else {
                lo[(r, c)] -= 1e-9;
                hi[(r, c)] += 1e-9;
            }
        }
    }
    IntervalMatrix::new(lo, hi)
}

/// The full per-step loop: tube bound, rate line search, radius update.
/// Aborts carry the partial result.
pub fn conreach(cfg: &ReachConfig) -> Result<ReachResult, ReachError> {
    let q0 = cfg.initial.metric.q.matrix();
    assert!(
        (q0 - Mat3::identity()).amax() <= 1e-12,
        "initial rotation metric must be the identity"
    );
    assert!(
        cfg.initial.radius < FRAC_PI_2,
        "initial radius must stay below the shooting radius"
    );

    let t_grid: Vec<f64> = (0..=cfg.steps)
        .map(|i| i as f64 * cfg.horizon / cfg.steps as f64)
        .collect();
    let nominal = simulate_with(&cfg.system, &cfg.initial.center, &t_grid, cfg.h_max);

    let mut steps = vec![ReachStep {
        t: 0.0,
        center: cfg.initial.center,
        metric: cfg.initial.metric,
        radius: cfg.initial.radius,
        c: 0.0,
    }];
    let mut regions = Vec::with_capacity(cfg.steps);

    for i in 0..cfg.steps {
        let partial = |steps: &[ReachStep], regions: &[SearchRegion]| {
            Box::new(ReachResult {
                steps: steps.to_vec(),
                nominal: nominal.clone(),
                regions: regions.to_vec(),
            })
        };

        let prev = steps[i];
        let ball = MetricBall::new(prev.center, prev.radius, prev.metric);
        let region = reach_tube_with(
            &cfg.system,
            &ball,
            t_grid[i],
            t_grid[i + 1],
            cfg.a_enclosure.as_ref(),
            cfg.tube_rounds,
        )
        .map_err(|source| ReachError::Tube {
            step: i,
            source,
            partial: partial(&steps, &regions),
        })?;

        let searched = line_search(
            &prev.metric.q,
            &prev.metric.p,
            &region,
            cfg.c_min,
            cfg.c_max,
            cfg.line_search_steps,
        );
        let (c, metric) = match searched {
            Ok(found) => found,
            Err(SdpError::NoFeasibleRate { .. }) => {
                return Err(ReachError::NoFeasibleRate {
                    step: i,
                    partial: partial(&steps, &regions),
                });
            }
            Err(source) => {
                return Err(ReachError::Solver {
                    step: i,
                    source,
                    partial: partial(&steps, &regions),
                });
            }
        };

        // Stored certificates must re-pass the default-tolerance check, not
        // just the looser residual bound line_search works to. A marginal
        // one is repairable: the rate enters every vertex LMI through
        // -2c blkdiag(Q, P), so lifting c by violation / lambda_min(Q, P)
        // turns a +v worst eigenvalue into at most -v.
        let mut cert = Certificate { metric, c, region };
        let mut worst = worst_vertex_eigenvalue(&cert, cfg.vertex_cap).map_err(|source| {
            ReachError::Solver {
                step: i,
                source: source.into(),
                partial: partial(&steps, &regions),
            }
        })?;
        if worst > LMI_TOL {
            let lifted =
                c + worst / metric.q.min_eigenvalue().min(metric.p.min_eigenvalue());
            if lifted <= cfg.c_max {
                cert.c = lifted;
                worst = worst_vertex_eigenvalue(&cert, cfg.vertex_cap).map_err(|source| {
                    ReachError::Solver {
                        step: i,
                        source: source.into(),
                        partial: partial(&steps, &regions),
                    }
                })?;
            }
        }
        if worst > LMI_TOL {
            return Err(ReachError::Solver {
                step: i,
                source: SdpError::SolverFailure {
                    status: "MarginalCertificate".to_string(),
                    violation: worst,
                },
                partial: partial(&steps, &regions),
            });
        }

        let dt = t_grid[i + 1] - t_grid[i];
        let radius = prev.radius * (cert.c * dt).exp();
        steps.push(ReachStep {
            t: t_grid[i + 1],
            center: nominal.states[i + 1],
            metric,
            radius,
            c: cert.c,
        });
        regions.push(region);
    }

    Ok(ReachResult {
        steps,
        nominal,
        regions,
    })
}

/// Identity-metric covering of a rotation ball by cells of pitch `cell`
/// in the exponential chart of the center.
pub fn cover_rotation_ball(
    center: &Rotation,
    radius: f64,
    cell: f64,
) -> Vec<crate::metrics::RotationBall> {
    assert!(radius > 0.0 && radius < FRAC_PI_2, "radius must lie in (0, pi/2)");
    assert!(cell > 0.0 && cell <= radius, "cell must lie in (0, radius]");
    let cell_radius = cell * 3f64.sqrt() / 2.0 * COVER_MARGIN;
    let reach = radius + cell * 3f64.sqrt() / 2.0 + 1e-12;
    let k_max = (reach / cell).floor() as i64;

    let mut out = Vec::new();
    for kx in -k_max..=k_max {
        for ky in -k_max..=k_max {
            for kz in -k_max..=k_max {
                let v = cell * Vec3::new(kx as f64, ky as f64, kz as f64);
                if v.norm() <= reach {
                    out.push(crate::metrics::RotationBall {
                        center: center * &exp_so3(&v),
                        radius: cell_radius,
                        q: SpdMatrix::identity(),
                    });
                }
            }
        }
    }
    out
}

/// Number of deterministic samples of the input ball left uncovered.
/// Zero is the covering guarantee the construction targets.
pub fn cover_misses(
    center: &Rotation,
    radius: f64,
    cover: &[crate::metrics::RotationBall],
    n_samples: usize,
    seed: u64,
) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut misses = 0;
    for _ in 0..n_samples {
        let v = radius * ball_sample(&mut rng);
        let sample = center * &exp_so3(&v);
        let covered = cover
            .iter()
            .any(|b| bi_invariant_distance(&b.center, &sample) <= b.radius);
        if !covered {
            misses += 1;
        }
    }
    misses
}

/// Uniform sample of the closed unit ball.
fn ball_sample(rng: &mut ChaCha8Rng) -> Vec3 {
    loop {
        let v = Vec3::new(
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
            rng.gen_range(-1.0..1.0),
        );
        if v.norm_squared() <= 1.0 {
            return v;
        }
    }
}

/// Containment margins of one audited step.
#[derive(Debug, Clone, Copy)]
pub struct StepAudit {
    pub t: f64,
    pub violations: usize,
    /// Max over samples of distance minus radius; negative means the
    /// step held with that much slack.
    pub worst_margin: f64,
}

/// Monte-Carlo containment report.
#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub samples: usize,
    pub violations: usize,
    pub worst_margin: f64,
    /// Samples abandoned because a distance solve failed; reported, not
    /// counted as violations.
    pub shooting_failures: usize,
    pub per_step: Vec<StepAudit>,
}

/// Samples the initial ball, simulates each sample over the result's
/// time grid, and checks containment in every step ball. Deterministic
/// for a fixed seed; samples run in parallel.
pub fn monte_carlo_verify(cfg: &ReachConfig, result: &ReachResult, n: usize) -> VerifyReport {
    monte_carlo_verify_seeded(cfg, result, n, DEFAULT_MC_SEED)
}

pub fn monte_carlo_verify_seeded(
    cfg: &ReachConfig,
    result: &ReachResult,
    n: usize,
    seed: u64,
) -> VerifyReport {
    let times = &result.nominal.times;
    let slack = crate::metrics::CONTAINMENT_SLACK;

    #[derive(Clone)]
    enum SampleOutcome {
        Margins(Vec<f64>),
        ShootingFailed,
    }

    let outcomes: Vec<SampleOutcome> = (0..n as u64)
        .into_par_iter()
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed ^ k.wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let s0 = sample_initial_state(&cfg.initial, &mut rng);
            let traj = simulate_with(&cfg.system, &s0, times, cfg.h_max);
            let mut margins = Vec::with_capacity(times.len());
            for (i, s) in traj.states.iter().enumerate() {
                let step = &result.steps[i];
                match product_distance(&step.metric, &step.center, s) {
                    Ok(d) => margins.push(d - step.radius),
                    Err(MetricError::ShootingDiverged { .. })
                    | Err(MetricError::BeyondShootingRadius { .. }) => {
                        return SampleOutcome::ShootingFailed
                    }
                    Err(e) => panic!("distance solve failed structurally: {e}"),
                }
            }
            SampleOutcome::Margins(margins)
        })
        .collect();

    let mut per_step: Vec<StepAudit> = times
        .iter()
        .map(|&t| StepAudit {
            t,
            violations: 0,
            worst_margin: f64::NEG_INFINITY,
        })
        .collect();
    let mut shooting_failures = 0;
    for outcome in &outcomes {
        match outcome {
            SampleOutcome::ShootingFailed => shooting_failures += 1,
            SampleOutcome::Margins(margins) => {
                for (audit, &m) in per_step.iter_mut().zip(margins) {
                    audit.worst_margin = audit.worst_margin.max(m);
                    if m > slack {
                        audit.violations += 1;
                    }
                }
            }
        }
    }
    let violations = per_step.iter().map(|a| a.violations).sum();
    let worst_margin = per_step
        .iter()
        .map(|a| a.worst_margin)
        .fold(f64::NEG_INFINITY, f64::max);
    VerifyReport {
        samples: n,
        violations,
        worst_margin,
        shooting_failures,
        per_step,
    }
}

/// Rejection sampler for the product-metric ball: uniform proposals on
/// the chart ball times the P-ellipsoid, accepted by product distance.
fn sample_initial_state(ball: &MetricBall, rng: &mut ChaCha8Rng) -> State {
    let p_inv_sqrt = ball.metric.p.inv_sqrt();
    for _ in 0..100_000 {
        let v = ball.radius * ball_sample(rng);
        let dw = ball.radius * (p_inv_sqrt * ball_sample(rng));
        let s = State::new(
            &ball.center.r * &exp_so3(&v),
            ball.center.omega + dw,
        );
        let d = product_distance(&ball.metric, &ball.center, &s)
            .expect("initial-ball proposals stay within the shooting radius");
        if d <= ball.radius {
            return s;
        }
    }
    panic!("initial-ball rejection sampling failed to accept");
}

/// Per-step avoidance verdict. Over-approximations can prove absence of
/// intersection, never its presence.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AvoidVerdict {
    Safe,
    Unknown,
}

/// Checks each step ball against an unsafe product set (rotation ball
/// times omega box) by metric separation; conservative in the Unknown
/// direction.
pub fn check_avoid(
    result: &ReachResult,
    omega_unsafe: &IntervalVec3,
    rotation_unsafe: &crate::metrics::RotationBall,
) -> Vec<AvoidVerdict> {
    result
        .steps
        .iter()
        .map(|step| {
            let rot_reach = step.radius / step.metric.q.min_eigenvalue().sqrt();
            let unsafe_rot_reach =
                rotation_unsafe.radius / rotation_unsafe.q.min_eigenvalue().sqrt();
            let rot_gap = bi_invariant_distance(&step.center.r, &rotation_unsafe.center)
                - rot_reach
                - unsafe_rot_reach;

            let omega_reach = step.radius / step.metric.p.min_eigenvalue().sqrt();
            let omega_gap = euclidean_distance_to_box(&step.center.omega, omega_unsafe)
                - omega_reach;

            if rot_gap > 0.0 || omega_gap > 0.0 {
                AvoidVerdict::Safe
            } else {
                AvoidVerdict::Unknown
            }
        })
        .collect()
}

fn euclidean_distance_to_box(x: &Vec3, b: &IntervalVec3) -> f64 {
    let d = Vec3::new(
        clamp_gap(x.x, b.x),
        clamp_gap(x.y, b.y),
        clamp_gap(x.z, b.z),
    );
    d.norm()
}

fn clamp_gap(x: f64, iv: Interval) -> f64 {
    if x < iv.lo {
        iv.lo - x
    } else if x > iv.hi {
        x - iv.hi
    } else {
        0.0
    }
}
