//! Vertex local search for the convex maximization.
//!
//! Because `Φ` is convex, `Φ(z) ≥ Φ(x) + 2⟨Hx + p, z − x⟩` for all `x, z`;
//! maximizing the linearization `⟨Hx + p, z⟩` over the region therefore never
//! decreases `Φ`, and a vertex that maximizes its own linearization is a
//! local maximizer over the polytope (a KKT point). The search iterates that
//! linear step from vertex to vertex until the objective stalls.
//!
//! [`minimal_program`] then converts the stalled vertex into a reduction
//! whose linear term `d` is entirely nonpositive. The vertex maximizes its
//! gradient LP, so a simplex started on a basis through the vertex's support
//! can reach an optimal basis using only degenerate pivots; the reduced
//! costs of that basis are exactly `−d ≥ 0`. A nondegenerate improving pivot
//! during that polish would contradict the vertex's optimality, so it is
//! reported as [`ClimbError::BasisSelectionFailure`] — the caller restarts
//! the search rather than trusting the point.

use nalgebra::DVector;
use thiserror::Error;

use crate::lp::{
    crash_basis_from_support, LpError, LpProblem, LpStatus, LpWorkspace, PolishOutcome, Sense,
};
use crate::model::{reduce_at_vertex, ModelError, QpInstance, ReducedProgram};

/// Relative stall tolerance on the objective increase per step.
pub const STALL_TOL: f64 = 1e-8;
/// Relative tolerance on the reduced linear term at a minimal program.
pub const KKT_D_TOL: f64 = 1e-9;

#[derive(Debug, Error)]
pub enum ClimbError {
    #[error("feasible region is empty")]
    Infeasible,
    #[error("linearized objective is unbounded over the region")]
    Unbounded,
    #[error("local search exceeded its iteration cap")]
    IterationCap,
    #[error(
        "no optimal basis reachable by degenerate pivots at the vertex; restart the search"
    )]
    BasisSelectionFailure,
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// A stalled (KKT) vertex of the search.
#[derive(Debug, Clone)]
pub struct ClimbOutcome {
    pub x: DVector<f64>,
    /// LP basis at the vertex as returned by the final step (row order;
    /// entries ≥ n mark artificials of redundant rows).
    pub basis: Vec<usize>,
    pub phi: f64,
    /// Objective value at each visited vertex, in order (nondecreasing).
    pub phis: Vec<f64>,
    pub iterations: usize,
}

/// Iterate the linearized maximization from `x0` (any point — feasibility is
/// not required, only its gradient is used) until the objective stalls.
/// Without `x0`, the search starts from a phase-1 vertex of the region.
pub fn search_kkt_point(
    inst: &QpInstance,
    ws: &mut LpWorkspace,
    x0: Option<&DVector<f64>>,
) -> Result<ClimbOutcome, ClimbError> {
    let cap = 10 * inst.n + 100;
    let mut phis = Vec::new();
    let mut current: Option<(DVector<f64>, Vec<usize>, f64)> = None;
    let mut gradient_at = match x0 {
        Some(x) => inst.half_gradient(x),
        None => {
            // A phase-1 vertex: zero objective returns the first basic
            // feasible solution found.
            let probe = LpProblem::equality_form(
                Sense::Max,
                DVector::zeros(inst.n),
                inst.a.clone(),
                inst.b.clone(),
            );
            let sol = ws.solve(&probe)?;
            match sol.status {
                LpStatus::Infeasible => return Err(ClimbError::Infeasible),
                LpStatus::Unbounded => unreachable!("zero objective cannot be unbounded"),
                LpStatus::Optimal => {}
            }
            let phi = inst.phi(&sol.x);
            phis.push(phi);
            current = Some((sol.x.clone(), sol.basis.clone(), phi));
            inst.half_gradient(&sol.x)
        }
    };

    for iteration in 1..=cap {
        let lpp = LpProblem::equality_form(
            Sense::Max,
            gradient_at.clone(),
            inst.a.clone(),
            inst.b.clone(),
        );
        let sol = ws.solve(&lpp)?;
        match sol.status {
            LpStatus::Infeasible => return Err(ClimbError::Infeasible),
            LpStatus::Unbounded => return Err(ClimbError::Unbounded),
            LpStatus::Optimal => {}
        }
        let phi_new = inst.phi(&sol.x);
        if let Some((x_prev, basis_prev, phi_prev)) = &current {
            if phi_new - phi_prev <= STALL_TOL * phi_new.abs().max(1.0) {
                // The previous vertex already maximizes its own gradient LP.
                return Ok(ClimbOutcome {
                    x: x_prev.clone(),
                    basis: basis_prev.clone(),
                    phi: *phi_prev,
                    phis,
                    iterations: iteration,
                });
            }
        }
        phis.push(phi_new);
        gradient_at = inst.half_gradient(&sol.x);
        current = Some((sol.x, sol.basis, phi_new));
    }
    Err(ClimbError::IterationCap)
}

/// Reduce the instance at a KKT vertex so that the linear term satisfies
/// `d ≤ 0` (within tolerance): crash a basis through the vertex's support,
/// polish it to gradient-LP optimality using only degenerate pivots, and
/// reduce there. Any nondegenerate improving pivot means the vertex was not
/// a KKT point after all.
pub fn minimal_program(
    inst: &QpInstance,
    ws: &mut LpWorkspace,
    x_bar: &DVector<f64>,
) -> Result<ReducedProgram, ClimbError> {
    let scale = x_bar.amax().max(1.0);
    let support: Vec<usize> = (0..inst.n)
        .filter(|&j| x_bar[j] > 1e-9 * scale)
        .collect();
    let basis = crash_basis_from_support(&inst.a, &support)
        .map_err(|_| ClimbError::BasisSelectionFailure)?;
    let gradient = inst.half_gradient(x_bar);
    let polished = match ws.polish_optimal_basis(&inst.a, &inst.b, &gradient, &basis)? {
        PolishOutcome::Optimal { basis } => basis,
        PolishOutcome::Moved => return Err(ClimbError::BasisSelectionFailure),
    };
    let red = reduce_at_vertex(inst, x_bar, &polished)?;
    let d_tol = KKT_D_TOL * gradient.amax().max(1.0);
    if red.d.max() > d_tol {
        return Err(ClimbError::BasisSelectionFailure);
    }
    Ok(red)
}
