//! Per-step metric synthesis: maximize tr(Q) over symmetric (Q, P)
//! subject to eps I <= Q <= Q_prev, eps I <= P <= P_prev, and the
//! contraction LMI at every region vertex, for a fixed rate c; plus the
//! descending line search over c that keeps the last feasible rate.
//!
//! The backend is a primal-dual interior-point conic solver over
//! semidefinite cones (scaled-triangle vectorization, off-diagonals times
//! sqrt(2)). The formulation tightens each cap by 1e-8 and each vertex
//! LMI by 1e-6 so that solutions hold strictly under the coarser
//! tolerances used everywhere downstream. Solver output is never trusted
//! directly: every claimed-feasible answer is re-verified here by dense
//! eigenvalue checks, and verification failure is a SolverFailure, not a
//! feasible result.

use crate::contraction::{build_lmi, region_vertices, ContractionError, SearchRegion, VERTEX_CAP};
use crate::metrics::{MetricPair, SpdMatrix};
use crate::so3::{hat, vee, Mat3};
use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};
use std::f64::consts::SQRT_2;
use thiserror::Error;

/// Lower-bound shift: Q >= EPS_PD I, P >= EPS_PD I.
pub const EPS_PD: f64 = 1e-9;
/// Cap tightening: Q <= Q_prev - CAP_MARGIN I.
pub const CAP_MARGIN: f64 = 1e-8;
/// Vertex-LMI tightening: LMI <= -LMI_MARGIN I.
pub const LMI_MARGIN: f64 = 1e-6;
/// Residual bound for independent re-verification of solutions.
pub const RESIDUAL_TOL: f64 = 1e-7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SdpError {
    #[error(transparent)]
    Region(#[from] ContractionError),
    #[error("solver breakdown (status {status}, re-verified violation {violation:.3e})")]
    SolverFailure { status: String, violation: f64 },
    #[error("no feasible contraction rate on the grid (largest tried {c_max})")]
    NoFeasibleRate { c_max: f64 },
}

/// One step's synthesis problem: caps, rate, and materialized LMI
/// vertices (A, B, hat(omega)).
#[derive(Debug, Clone)]
pub struct StepProblem {
    pub q_prev: SpdMatrix,
    pub p_prev: SpdMatrix,
    pub c: f64,
    pub vertices: Vec<(Mat3, Mat3, Mat3)>,
}

/// Why a problem was declared infeasible.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Infeasibility {
    /// The solver produced an infeasibility certificate.
    Proven,
    /// The solver stagnated while the iterate still violated constraints.
    Stagnation { violation: f64 },
}

#[derive(Debug, Clone)]
pub struct StepSolution {
    pub feasible: bool,
    /// Present exactly when feasible.
    pub metric: Option<MetricPair>,
    /// tr(Q) of the returned metric (NaN when infeasible).
    pub objective: f64,
    /// Present exactly when infeasible.
    pub infeasibility: Option<Infeasibility>,
}

/// Builds the step problem for a region by materializing its vertices.
pub fn formulate(
    q_prev: &SpdMatrix,
    p_prev: &SpdMatrix,
    c: f64,
    region: &SearchRegion,
) -> Result<StepProblem, SdpError> {
    let vertices = region_vertices(region, VERTEX_CAP)?
        .into_iter()
        .map(|(a, b, omega)| (a, b, hat(&omega)))
        .collect();
    Ok(StepProblem {
        q_prev: *q_prev,
        p_prev: *p_prev,
        c,
        vertices,
    })
}

/// Signed worst constraint violation of a candidate metric on a problem:
/// positive values measure infeasibility, negative values slack. The
/// formulation margins are not included; this measures the contract
/// constraints themselves.
pub fn constraint_violation(p: &StepProblem, m: &MetricPair) -> f64 {
    let q = m.q.matrix();
    let pm = m.p.matrix();
    let min_eig = |x: &Mat3| x.symmetric_eigenvalues().min();
    let mut worst = EPS_PD - min_eig(q);
    worst = worst.max(EPS_PD - min_eig(pm));
    worst = worst.max(-min_eig(&(p.q_prev.matrix() - q)));
    worst = worst.max(-min_eig(&(p.p_prev.matrix() - pm)));
    for (a, b, what) in &p.vertices {
        let omega = vee(what).expect("vertex matrices are exactly skew");
        let lmi = build_lmi(m, p.c, a, b, &omega);
        worst = worst.max(lmi.symmetric_eigenvalues().max());
    }
    worst
}

/// Solves one step problem. Feasible answers are re-verified by
/// eigenvalue checks before being reported; infeasible answers carry the
/// reason. Numerical breakdown that neither certifies a feasible point
/// nor proves infeasibility is an error.
pub fn solve(p: &StepProblem) -> Result<StepSolution, SdpError> {
    assert!(!p.vertices.is_empty(), "step problem needs vertices");
    let (a_mat, b_vec, cones, cost) = assemble(p);
    let settings = DefaultSettingsBuilder::default()
        .verbose(false)
        .build()
        .expect("default solver settings are valid");
    let p_cost = CscMatrix::zeros((N_VARS, N_VARS));
    let mut solver = DefaultSolver::new(&p_cost, &cost, &a_mat, &b_vec, &cones, settings);
    solver.solve();

    let status = solver.solution.status;
    let candidate = unpack(&solver.solution.x);

    match status {
        SolverStatus::Solved | SolverStatus::AlmostSolved => {
            let (metric, objective) = certify(p, &candidate, status, solver.solution.obj_val)?;
            Ok(StepSolution {
                feasible: true,
                metric: Some(metric),
                objective,
                infeasibility: None,
            })
        }
        SolverStatus::PrimalInfeasible => Ok(StepSolution {
            feasible: false,
            metric: None,
            objective: f64::NAN,
            infeasibility: Some(Infeasibility::Proven),
        }),
        SolverStatus::AlmostPrimalInfeasible
        | SolverStatus::MaxIterations
        | SolverStatus::InsufficientProgress
        | SolverStatus::NumericalError => {
            // Stagnation: accept the iterate only if it certifies, else
            // report infeasible. The conservative direction is safe here;
            // a missed feasible point can only enlarge the chosen rate.
            let violation = candidate_violation(p, &candidate);
            if violation <= RESIDUAL_TOL {
                let (metric, objective) = certify(p, &candidate, status, solver.solution.obj_val)?;
                return Ok(StepSolution {
                    feasible: true,
                    metric: Some(metric),
                    objective,
                    infeasibility: None,
                });
            }
            Ok(StepSolution {
                feasible: false,
                metric: None,
                objective: f64::NAN,
                infeasibility: Some(Infeasibility::Stagnation { violation }),
            })
        }
        other => Err(SdpError::SolverFailure {
            status: format!("{other:?}"),
            violation: candidate_violation(p, &candidate),
        }),
    }
}

/// Algorithm: try rates descending from c_max on an inclusive grid of
/// n_steps+1 points, keep the last feasible solution, stop at the first
/// infeasible rate.
pub fn line_search(
    q_prev: &SpdMatrix,
    p_prev: &SpdMatrix,
    region: &SearchRegion,
    c_min: f64,
    c_max: f64,
    n_steps: usize,
) -> Result<(f64, MetricPair), SdpError> {
    assert!(c_min <= c_max, "rate bounds out of order");
    assert!(n_steps >= 1);
    let mut best: Option<(f64, MetricPair)> = None;
    for j in 0..=n_steps {
        let c = c_max - j as f64 * (c_max - c_min) / n_steps as f64;
        let problem = formulate(q_prev, p_prev, c, region)?;
        let solution = solve(&problem)?;
        if solution.feasible {
            best = Some((c, solution.metric.expect("feasible solutions carry a metric")));
        } else {
            break;
        }
    }
    best.ok_or(SdpError::NoFeasibleRate { c_max })
}

const N_VARS: usize = 12;
const SVEC3: usize = 6;
const SVEC6: usize = 21;
/// Column-stacked upper-triangle positions of a symmetric 3x3 matrix; the
/// decision-variable order for Q and P entries.
const SYM3_POS: [(usize, usize); 6] = [(0, 0), (0, 1), (1, 1), (0, 2), (1, 2), (2, 2)];

fn sym_basis3(k: usize) -> Mat3 {
    let (i, j) = SYM3_POS[k];
    let mut m = Mat3::zeros();
    m[(i, j)] = 1.0;
    m[(j, i)] = 1.0;
    m
}

fn svec3(m: &Mat3) -> [f64; SVEC3] {
    [
        m[(0, 0)],
        SQRT_2 * m[(0, 1)],
        m[(1, 1)],
        SQRT_2 * m[(0, 2)],
        SQRT_2 * m[(1, 2)],
        m[(2, 2)],
    ]
}

fn svec6(m: &crate::contraction::Mat6) -> [f64; SVEC6] {
    let mut out = [0.0; SVEC6];
    let mut k = 0;
    for j in 0..6 {
        for i in 0..=j {
            out[k] = if i == j { m[(i, j)] } else { SQRT_2 * m[(i, j)] };
            k += 1;
        }
    }
    out
}

fn unpack(x: &[f64]) -> MetricCandidate {
    let mut q = Mat3::zeros();
    let mut p = Mat3::zeros();
    for k in 0..SVEC3 {
        q += x[k] * sym_basis3(k);
        p += x[SVEC3 + k] * sym_basis3(k);
    }
    MetricCandidate { q, p }
}

/// Raw symmetric candidate, prior to SPD validation.
struct MetricCandidate {
    q: Mat3,
    p: Mat3,
}

fn candidate_violation(p: &StepProblem, cand: &MetricCandidate) -> f64 {
    match (SpdMatrix::new(cand.q), SpdMatrix::new(cand.p)) {
        (Ok(q), Ok(pm)) => constraint_violation(p, &MetricPair::new(q, pm)),
        _ => f64::INFINITY,
    }
}

/// Re-verification firewall: SPD-validate the candidate, check every
/// constraint by eigenvalues, and cross-check the reported objective.
fn certify(
    p: &StepProblem,
    cand: &MetricCandidate,
    status: SolverStatus,
    reported_obj: f64,
) -> Result<(MetricPair, f64), SdpError> {
    let fail = |violation: f64| SdpError::SolverFailure {
        status: format!("{status:?}"),
        violation,
    };
    let q = SpdMatrix::new(cand.q).map_err(|_| fail(f64::INFINITY))?;
    let pm = SpdMatrix::new(cand.p).map_err(|_| fail(f64::INFINITY))?;
    let metric = MetricPair::new(q, pm);
    let violation = constraint_violation(p, &metric);
    if violation > RESIDUAL_TOL {
        return Err(fail(violation));
    }
    let objective = cand.q.trace();
    // Cost vector is -tr(Q), so the solver reports -objective.
    if (objective + reported_obj).abs() > 1e-3 * objective.abs().max(1.0) {
        return Err(fail(violation));
    }
    Ok((metric, objective))
}

/// Builds the conic data: rows are the cones [Q - eps I, P - eps I,
/// Q_prev - margin I - Q, P_prev - margin I - P, then -LMI - margin I per
/// vertex], all in scaled-triangle vectorization, as A x + s = b with s
/// in a product of semidefinite cones.
#[allow(clippy::type_complexity)]
fn assemble(p: &StepProblem) -> (CscMatrix<f64>, Vec<f64>, Vec<SupportedConeT<f64>>, Vec<f64>) {
    let n_rows = 4 * SVEC3 + SVEC6 * p.vertices.len();
    let mut cols: Vec<Vec<(usize, f64)>> = vec![Vec::new(); N_VARS];

    let push_block = |col: &mut Vec<(usize, f64)>, base: usize, vals: &[f64]| {
        for (i, &v) in vals.iter().enumerate() {
            if v != 0.0 {
                col.push((base + i, v));
            }
        }
    };

    for k in 0..SVEC3 {
        let e = sym_basis3(k);
        // Q variables.
        {
            let col = &mut cols[k];
            let sv = svec3(&e);
            push_block(col, 0, &sv.map(|v| -v));
            push_block(col, 2 * SVEC3, &sv);
            for (vi, (_, _, what)) in p.vertices.iter().enumerate() {
                let tl = what * e - e * what - 2.0 * p.c * e;
                let mut lmi = crate::contraction::Mat6::zeros();
                lmi.fixed_view_mut::<3, 3>(0, 0).copy_from(&tl);
                lmi.fixed_view_mut::<3, 3>(0, 3).copy_from(&e);
                lmi.fixed_view_mut::<3, 3>(3, 0).copy_from(&e);
                push_block(col, 4 * SVEC3 + SVEC6 * vi, &svec6(&lmi));
            }
        }
        // P variables.
        {
            let col = &mut cols[SVEC3 + k];
            let sv = svec3(&e);
            push_block(col, SVEC3, &sv.map(|v| -v));
            push_block(col, 3 * SVEC3, &sv);
            for (vi, (a, b, _)) in p.vertices.iter().enumerate() {
                let tr = a.transpose() * e;
                let bl = e * a;
                let br = b.transpose() * e + e * b - 2.0 * p.c * e;
                let mut lmi = crate::contraction::Mat6::zeros();
                lmi.fixed_view_mut::<3, 3>(0, 3).copy_from(&tr);
                lmi.fixed_view_mut::<3, 3>(3, 0).copy_from(&bl);
                lmi.fixed_view_mut::<3, 3>(3, 3).copy_from(&br);
                push_block(col, 4 * SVEC3 + SVEC6 * vi, &svec6(&lmi));
            }
        }
    }

    let mut colptr = Vec::with_capacity(N_VARS + 1);
    let mut rowval = Vec::new();
    let mut nzval = Vec::new();
    colptr.push(0);
    for col in &mut cols {
        col.sort_unstable_by_key(|&(r, _)| r);
        for &(r, v) in col.iter() {
            rowval.push(r);
            nzval.push(v);
        }
        colptr.push(rowval.len());
    }
    let a_mat = CscMatrix::new(n_rows, N_VARS, colptr, rowval, nzval);

    let mut b = Vec::with_capacity(n_rows);
    let neg_eps = Mat3::from_diagonal_element(-EPS_PD);
    b.extend_from_slice(&svec3(&neg_eps));
    b.extend_from_slice(&svec3(&neg_eps));
    let q_cap = p.q_prev.matrix() - Mat3::from_diagonal_element(CAP_MARGIN);
    let p_cap = p.p_prev.matrix() - Mat3::from_diagonal_element(CAP_MARGIN);
    b.extend_from_slice(&svec3(&q_cap));
    b.extend_from_slice(&svec3(&p_cap));
    let lmi_shift = crate::contraction::Mat6::from_diagonal_element(-LMI_MARGIN);
    let shift = svec6(&lmi_shift);
    for _ in 0..p.vertices.len() {
        b.extend_from_slice(&shift);
    }

    let mut cones = vec![SupportedConeT::PSDTriangleConeT(3); 4];
    cones.extend(std::iter::repeat(SupportedConeT::PSDTriangleConeT(6)).take(p.vertices.len()));

    let mut cost = vec![0.0; N_VARS];
    cost[0] = -1.0;
    cost[2] = -1.0;
    cost[5] = -1.0;

    (a_mat, b, cones, cost)
}
