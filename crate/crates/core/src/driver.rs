//! The cutting-plane solver: local search, certified bounds, and valid cuts
//! composed into the two top-level queries.
//!
//! * [`solve_reference`] answers "is the optimum at least `v_R`?" — either a
//!   feasible witness with `Φ ≥ v_R` (yes) or a certified upper bound below
//!   `v_R` (no).
//! * [`solve_global`] drives the same machinery with a moving level until
//!   the certified upper bound meets the best witness to relative accuracy.
//!
//! Every iteration climbs to a stalled vertex, bounds the remaining region
//! through the semidefinite relaxation, and — when neither answer is settled
//! — slices the vertex's neighborhood off with a cut certified to contain no
//! point above the current level. Soundness invariant maintained throughout:
//! `lower` is the value of a feasible point of the original program and
//! `upper ≥ sup Φ` over the original region, so the true optimum always lies
//! in `[lower, upper]`.

use std::time::{Duration, Instant};

use nalgebra::DVector;
use thiserror::Error;

use crate::climb::{self, ClimbError};
use crate::cuts::{self, CutCertificate, CutError, DnnCutParams};
use crate::dnn::{self, SdpParams, ShorProblem};
use crate::gen::SplitMix64;
use crate::lp::{self, LpError, LpProblem, LpStatus, LpWorkspace, Sense};
use crate::model::{lift_cut, ModelError, QpInstance, ReducedProgram};
use crate::numlin::LuFactors;

#[derive(Debug, Error)]
pub enum DriverError {
    #[error("local search failed: {0}")]
    Climb(#[from] ClimbError),
    #[error("cut construction failed: {0}")]
    Cut(#[from] CutError),
    #[error("linear programming failed: {0}")]
    Lp(#[from] LpError),
    #[error("instance error: {0}")]
    Model(#[from] ModelError),
    #[error("vertex basis selection failed twice at iteration {iteration}")]
    DegenerateVertex { iteration: usize },
}

/// Which cut family the driver lifts each iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CutMode {
    /// The verified deepened cut only.
    Konno,
    /// Propose relaxation-certified deeper cuts, falling back per iteration.
    Dnn,
}

#[derive(Debug, Clone)]
pub struct SolverParams {
    /// Level margin `δ` for the reference query; `None` derives
    /// `0.01·max(1, |v_R|)`.
    pub delta: Option<f64>,
    /// Deepening factor for relaxation-certified cut candidates.
    pub eta: f64,
    pub cut_mode: CutMode,
    /// Relaxation solve parameters (tolerance, iteration cap).
    pub sdp: SdpParams,
    /// Hard cap on lifted cuts before giving up with honest bounds.
    pub max_cuts: usize,
    pub time_limit: Option<Duration>,
    /// Relative gap at which the global query closes (also the floor of its
    /// gap denominator).
    pub eps_gap: f64,
    /// Record per-iteration reductions, vertices, and cuts in the report.
    pub record_trace: bool,
}

impl Default for SolverParams {
    fn default() -> Self {
        SolverParams {
            delta: None,
            eta: 0.9,
            cut_mode: CutMode::Dnn,
            sdp: SdpParams::default(),
            max_cuts: 200,
            time_limit: None,
            eps_gap: 1e-4,
            record_trace: false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SolveStatus {
    /// A feasible witness reaches the reference value.
    AnsweredGe,
    /// A certificate places the whole optimum below the reference value.
    AnsweredLt,
    /// Global mode: bounds met to the requested relative accuracy.
    GapClosed,
    TimeLimit,
    CutLimit,
}

impl SolveStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveStatus::AnsweredGe => "answered_ge",
            SolveStatus::AnsweredLt => "answered_lt",
            SolveStatus::GapClosed => "gap_closed",
            SolveStatus::TimeLimit => "time_limit",
            SolveStatus::CutLimit => "cut_limit",
        }
    }
}

impl std::fmt::Display for SolveStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One cut-loop iteration, as much of it as ran. Heavy fields are only
/// populated under [`SolverParams::record_trace`].
#[derive(Debug, Clone)]
pub struct IterationRecord {
    pub iteration: usize,
    /// `Φ` at the stalled vertex.
    pub vertex_value: f64,
    /// Best witnessed value after this iteration's improvement step.
    pub lower_after: f64,
    /// Valid upper bound after this iteration's relaxation solve.
    pub upper_after: f64,
    /// Level the iteration's cuts certify against.
    pub target: f64,
    /// Certified bound on `φ` over the pre-cut region, when the solve ran.
    pub certified: Option<f64>,
    pub sdp_nu: Option<f64>,
    pub sdp_epsilon: Option<f64>,
    pub tstar: Option<f64>,
    /// How the lifted cut was certified (`None` when no cut was lifted).
    pub certificate: Option<CutCertificate>,
    /// Dimension of the instance this iteration reduced (grows by one per
    /// lifted cut).
    pub instance_n: usize,
    pub reduced: Option<ReducedProgram>,
    /// The stalled vertex in that instance's coordinates.
    pub vertex: Option<DVector<f64>>,
    pub tau: Option<DVector<f64>>,
    /// The verified deepened cut, before any relaxation-certified deepening.
    pub theta_konno: Option<DVector<f64>>,
    /// The lifted cut's coefficients over `reduced.nonbasic`.
    pub theta: Option<DVector<f64>>,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub status: SolveStatus,
    /// Value of the best feasible witness found (`−∞` when none).
    pub lower: f64,
    /// Certified upper bound on the optimum (`+∞` until one is computed).
    pub upper: f64,
    /// `(upper − lower) / max(eps_gap, |lower|)`.
    pub relgap: f64,
    /// Cut-loop iterations completed or partially completed.
    pub iterations: usize,
    pub cuts_konno: usize,
    pub cuts_dnn: usize,
    pub lp_calls: u64,
    pub sdp_calls: u64,
    pub wall: Duration,
    /// Best witness in the original variables.
    pub best_x: Option<DVector<f64>>,
    pub trace: Vec<IterationRecord>,
}

/// Shared mutable state of one solve.
struct Loop<'a> {
    original: &'a QpInstance,
    current: QpInstance,
    ws: LpWorkspace,
    params: &'a SolverParams,
    start: Instant,
    deadline: Option<Instant>,
    lower: f64,
    upper: f64,
    best_x: Option<DVector<f64>>,
    warm: Option<DVector<f64>>,
    iterations: usize,
    cuts_konno: usize,
    cuts_dnn: usize,
    sdp_calls: u64,
    trace: Vec<IterationRecord>,
}

impl<'a> Loop<'a> {
    fn new(inst: &'a QpInstance, params: &'a SolverParams) -> Self {
        let start = Instant::now();
        Loop {
            original: inst,
            current: inst.clone(),
            ws: LpWorkspace::new(),
            params,
            start,
            deadline: params.time_limit.map(|lim| start + lim),
            lower: f64::NEG_INFINITY,
            upper: f64::INFINITY,
            best_x: None,
            warm: None,
            iterations: 0,
            cuts_konno: 0,
            cuts_dnn: 0,
            sdp_calls: 0,
            trace: Vec::new(),
        }
    }

    fn out_of_time(&self) -> bool {
        self.deadline.is_some_and(|d| Instant::now() >= d)
    }

    /// Relaxation parameters with the loop's deadline threaded through.
    fn sdp_params(&self) -> SdpParams {
        let mut p = self.params.sdp.clone();
        p.deadline = self.deadline;
        p
    }

    /// Fold a feasible point of the current instance into the incumbent
    /// (original variables are its leading coordinates by construction).
    fn offer_witness(&mut self, value: f64, x_current: &DVector<f64>) {
        if value > self.lower {
            self.lower = value;
            self.best_x = Some(DVector::from_fn(self.original.n, |i, _| x_current[i]));
        }
    }

    /// Climb to a stalled vertex of the current instance, falling back to a
    /// cold start when the warm start errors.
    fn climb(&mut self) -> Result<climb::ClimbOutcome, ClimbError> {
        if let Some(seed) = self.warm.take() {
            match climb::search_kkt_point(&self.current, &mut self.ws, Some(&seed)) {
                Ok(out) => return Ok(out),
                Err(_) => log::debug!("warm-started climb failed; retrying cold"),
            }
        }
        climb::search_kkt_point(&self.current, &mut self.ws, None)
    }

    /// Reduce at the vertex; on a degenerate basis, perturb the point and
    /// re-climb once before giving up.
    fn reduce(
        &mut self,
        outcome: &climb::ClimbOutcome,
    ) -> Result<(DVector<f64>, ReducedProgram), DriverError> {
        match climb::minimal_program(&self.current, &mut self.ws, &outcome.x) {
            Ok(red) => Ok((outcome.x.clone(), red)),
            Err(ClimbError::BasisSelectionFailure) => {
                log::debug!(
                    "degenerate basis at iteration {}; perturbing and re-climbing",
                    self.iterations
                );
                let mut rng = SplitMix64::new(0x7e57 ^ self.iterations as u64);
                let scale = outcome.x.amax().max(1.0);
                let seed = DVector::from_fn(self.current.n, |i, _| {
                    outcome.x[i] + rng.uniform(0.0, 1e-3 * scale)
                });
                let retry = climb::search_kkt_point(&self.current, &mut self.ws, Some(&seed))?;
                let red = climb::minimal_program(&self.current, &mut self.ws, &retry.x).map_err(
                    |e| match e {
                        ClimbError::BasisSelectionFailure => DriverError::DegenerateVertex {
                            iteration: self.iterations,
                        },
                        other => DriverError::from(other),
                    },
                )?;
                Ok((retry.x, red))
            }
            Err(other) => Err(DriverError::from(other)),
        }
    }

    /// Certified upper bound on `φ` over the current region via the
    /// semidefinite relaxation. `None` when the solve failed (no bound —
    /// never a guess).
    fn certified_bound(&mut self, red: &ReducedProgram) -> Option<(f64, f64, f64, f64)> {
        let tstar = match lp::compute_tstar(&mut self.ws, &red.f, &red.w) {
            Ok(t) => t,
            Err(e) => {
                log::debug!("t* computation failed: {e}");
                return None;
            }
        };
        let shor = match ShorProblem::from_reduced(red) {
            Ok(s) => s,
            Err(e) => {
                log::debug!("relaxation assembly failed: {e}");
                return None;
            }
        };
        self.sdp_calls += 1;
        match dnn::solve_dnn(&shor, &self.sdp_params()) {
            Ok(sol) => {
                let bound = dnn::certify_upper_bound(&sol, tstar);
                Some((bound, sol.nu, sol.epsilon, tstar))
            }
            Err(e) => {
                log::debug!("relaxation solve failed: {e}");
                None
            }
        }
    }

    /// True when the applied cut leaves nothing of the current region:
    /// `max θᵀy ≤ 1` means the cut's certificate covers all of it.
    fn cut_consumes_region(&mut self, red: &ReducedProgram, theta: &DVector<f64>) -> bool {
        if theta.amax() == 0.0 {
            return true; // Δ(θ) is the whole orthant
        }
        let p = LpProblem::inequality_form(
            Sense::Max,
            theta.clone(),
            red.f.transpose(),
            red.w.clone(),
        );
        match self.ws.solve(&p) {
            Ok(sol) if sol.status == LpStatus::Optimal => sol.objective <= 1.0 + 1e-9,
            _ => false,
        }
    }

    /// Build, certify, and lift one cut at `target`; improves the incumbent
    /// from the cut's witnesses along the way. Returns `true` when the cut
    /// consumed the entire remaining region (no lift performed).
    fn cut_and_lift(
        &mut self,
        x_bar: &DVector<f64>,
        red: &ReducedProgram,
        target: f64,
        record: &mut IterationRecord,
    ) -> Result<bool, DriverError> {
        let tau = cuts::tuy_cut(red, target)?;
        // Witnesses from beyond the intercept cut are feasible points.
        for (phi, y) in cuts::improve_lower_bound(&mut self.ws, red, &tau)? {
            let x = red.x_of_y(&y);
            self.offer_witness(phi, &x);
        }
        record.lower_after = self.lower;
        let theta_k = cuts::konno_cut(&mut self.ws, red, &tau, target)?;
        if self.params.record_trace {
            record.theta_konno = Some(theta_k.clone());
        }
        let (theta, certificate) = match self.params.cut_mode {
            CutMode::Konno => (theta_k, CutCertificate::Fallback),
            CutMode::Dnn => {
                let dparams = DnnCutParams {
                    eta: self.params.eta,
                    sdp: self.sdp_params(),
                    ..DnnCutParams::default()
                };
                let outcome =
                    cuts::dnn_cut(&mut self.ws, red, &tau, &theta_k, target, &dparams);
                self.sdp_calls += outcome.sdp_solves as u64;
                (outcome.theta, outcome.certificate)
            }
        };
        match (self.params.cut_mode, certificate) {
            (CutMode::Konno, _) | (_, CutCertificate::Fallback) => self.cuts_konno += 1,
            _ => self.cuts_dnn += 1,
        }
        if self.params.record_trace {
            record.reduced = Some(red.clone());
            record.vertex = Some(x_bar.clone());
            record.tau = Some(tau.clone());
            record.theta = Some(theta.clone());
        }
        record.certificate = Some(certificate);
        if self.cut_consumes_region(red, &theta) {
            return Ok(true);
        }
        // Seed the next climb from the incumbent, zero-padded through every
        // lift (the seed only contributes its gradient).
        self.current = lift_cut(&self.current, &red.nonbasic, &theta);
        self.warm = self.best_x.as_ref().map(|x| {
            DVector::from_fn(self.current.n, |i, _| if i < x.len() { x[i] } else { 0.0 })
        });
        Ok(false)
    }

    fn finish(self, status: SolveStatus) -> SolveReport {
        let relgap = (self.upper - self.lower) / self.params.eps_gap.max(self.lower.abs());
        SolveReport {
            status,
            lower: self.lower,
            upper: self.upper,
            relgap,
            iterations: self.iterations,
            cuts_konno: self.cuts_konno,
            cuts_dnn: self.cuts_dnn,
            lp_calls: self.ws.solves,
            sdp_calls: self.sdp_calls,
            wall: self.start.elapsed(),
            best_x: self.best_x,
            trace: self.trace,
        }
    }
}

/// Decide whether the optimum of `inst` reaches `v_r`. The returned report
/// satisfies `status = answered_ge ⇒ lower ≥ v_r` (with `best_x` the
/// witness) and `status = answered_lt ⇒ upper < v_r`; resource-limit
/// statuses carry whatever honest bounds were established.
pub fn solve_reference(
    inst: &QpInstance,
    v_r: f64,
    params: &SolverParams,
) -> Result<SolveReport, DriverError> {
    inst.validate()?;
    let mut lp = Loop::new(inst, params);
    let mut delta = params
        .delta
        .unwrap_or_else(|| 0.01 * v_r.abs().max(1.0))
        .max(f64::EPSILON * v_r.abs().max(1.0));
    loop {
        let climbed = match lp.climb() {
            Ok(c) => c,
            Err(ClimbError::Infeasible) => {
                // Remaining region empty: everything excluded was certified
                // at or below its cut target (all ≤ v_r − δ).
                if lp.iterations == 0 {
                    lp.lower = f64::NEG_INFINITY;
                    lp.upper = f64::NEG_INFINITY;
                } else {
                    lp.upper = lp.upper.min(v_r - delta);
                }
                return Ok(lp.finish(SolveStatus::AnsweredLt));
            }
            Err(e) => return Err(e.into()),
        };
        lp.offer_witness(climbed.phi, &climbed.x);
        if lp.lower >= v_r {
            return Ok(lp.finish(SolveStatus::AnsweredGe));
        }
        let (x_bar, red) = lp.reduce(&climbed)?;
        let mut record = IterationRecord {
            iteration: lp.iterations,
            vertex_value: red.v,
            lower_after: lp.lower,
            upper_after: lp.upper,
            target: f64::NAN,
            certified: None,
            sdp_nu: None,
            sdp_epsilon: None,
            tstar: None,
            certificate: None,
            instance_n: lp.current.n,
            reduced: None,
            vertex: None,
            tau: None,
            theta_konno: None,
            theta: None,
        };
        if let Some((bound, nu, eps, tstar)) = lp.certified_bound(&red) {
            record.certified = Some(bound);
            record.sdp_nu = Some(nu);
            record.sdp_epsilon = Some(eps);
            record.tstar = Some(tstar);
            // The optimum is ≤ max(level certified on all excised parts,
            // bound on what remains).
            lp.upper = lp.upper.min((v_r - delta).max(bound));
            record.upper_after = lp.upper;
            if lp.upper < v_r {
                lp.trace.push(record);
                lp.iterations += 1;
                return Ok(lp.finish(SolveStatus::AnsweredLt));
            }
        }
        // Keep the cut level reachable from the incumbent: δ ≤ (v_r − v̲)/2
        // guarantees target ≥ the vertex value of any feasible vertex at or
        // below the incumbent.
        delta = delta.min(0.5 * (v_r - lp.lower));
        let target = v_r - delta;
        record.target = target;
        let consumed = lp.cut_and_lift(&x_bar, &red, target, &mut record)?;
        record.upper_after = lp.upper;
        lp.trace.push(record);
        lp.iterations += 1;
        if lp.lower >= v_r {
            return Ok(lp.finish(SolveStatus::AnsweredGe));
        }
        if consumed {
            lp.upper = lp.upper.min(target);
            return Ok(lp.finish(SolveStatus::AnsweredLt));
        }
        if lp.out_of_time() {
            return Ok(lp.finish(SolveStatus::TimeLimit));
        }
        if lp.iterations >= params.max_cuts {
            return Ok(lp.finish(SolveStatus::CutLimit));
        }
    }
}

/// Maximize `Φ` globally to relative accuracy `eps_gap`: cut at a level a
/// small fraction of the allowed gap above the incumbent, so every excised
/// region is certified within the final tolerance and progress never stalls
/// at the incumbent's own vertex.
pub fn solve_global(inst: &QpInstance, params: &SolverParams) -> Result<SolveReport, DriverError> {
    inst.validate()?;
    let mut lp = Loop::new(inst, params);
    // Highest level any cut has certified against so far.
    let mut max_target = f64::NEG_INFINITY;
    let gap_scale = |lower: f64| params.eps_gap.max(lower.abs());
    loop {
        let climbed = match lp.climb() {
            Ok(c) => c,
            Err(ClimbError::Infeasible) => {
                if lp.iterations == 0 {
                    lp.lower = f64::NEG_INFINITY;
                    lp.upper = f64::NEG_INFINITY;
                } else {
                    lp.upper = lp.upper.min(max_target).max(lp.lower);
                }
                return Ok(lp.finish(SolveStatus::GapClosed));
            }
            Err(e) => return Err(e.into()),
        };
        lp.offer_witness(climbed.phi, &climbed.x);
        let (x_bar, red) = lp.reduce(&climbed)?;
        let mut record = IterationRecord {
            iteration: lp.iterations,
            vertex_value: red.v,
            lower_after: lp.lower,
            upper_after: lp.upper,
            target: f64::NAN,
            certified: None,
            sdp_nu: None,
            sdp_epsilon: None,
            tstar: None,
            certificate: None,
            instance_n: lp.current.n,
            reduced: None,
            vertex: None,
            tau: None,
            theta_konno: None,
            theta: None,
        };
        if let Some((bound, nu, eps, tstar)) = lp.certified_bound(&red) {
            record.certified = Some(bound);
            record.sdp_nu = Some(nu);
            record.sdp_epsilon = Some(eps);
            record.tstar = Some(tstar);
            lp.upper = lp.upper.min(max_target.max(bound)).max(lp.lower);
            record.upper_after = lp.upper;
            if lp.upper - lp.lower <= params.eps_gap * gap_scale(lp.lower) {
                lp.trace.push(record);
                lp.iterations += 1;
                return Ok(lp.finish(SolveStatus::GapClosed));
            }
        }
        // Cut a quarter of the allowed gap above the incumbent: sound for
        // eps-accuracy and bounded away from the vertex value.
        let target = lp.lower + 0.25 * params.eps_gap * gap_scale(lp.lower);
        max_target = max_target.max(target);
        record.target = target;
        let consumed = lp.cut_and_lift(&x_bar, &red, target, &mut record)?;
        record.upper_after = lp.upper;
        lp.trace.push(record);
        lp.iterations += 1;
        if consumed {
            lp.upper = lp.upper.min(max_target).max(lp.lower);
            return Ok(lp.finish(SolveStatus::GapClosed));
        }
        if lp.upper - lp.lower <= params.eps_gap * gap_scale(lp.lower) {
            lp.upper = lp.upper.max(lp.lower);
            return Ok(lp.finish(SolveStatus::GapClosed));
        }
        if lp.out_of_time() {
            return Ok(lp.finish(SolveStatus::TimeLimit));
        }
        if lp.iterations >= params.max_cuts {
            return Ok(lp.finish(SolveStatus::CutLimit));
        }
    }
}

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("instance too large for exhaustive enumeration (n = {n}, bases = {bases:.3e})")]
    TooLarge { n: usize, bases: f64 },
    #[error("no feasible vertex")]
    Infeasible,
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone)]
pub struct OracleOptimum {
    pub value: f64,
    pub x: DVector<f64>,
    /// Feasible vertices enumerated.
    pub vertices: usize,
}

/// Exhaustive reference optimum: a convex objective over a bounded
/// polyhedron peaks at a vertex, so enumerate every basis `A_B x_B = b`,
/// keep the feasible ones, and take the best `Φ`. Guarded to tiny instances.
pub fn oracle_optimum(inst: &QpInstance) -> Result<OracleOptimum, OracleError> {
    inst.validate()?;
    let n = inst.n;
    let m = inst.m;
    let bases = binomial(n, m);
    if n > 16 || bases > 1e6 {
        return Err(OracleError::TooLarge { n, bases });
    }
    let mut best: Option<(f64, DVector<f64>)> = None;
    let mut feasible = 0usize;
    let mut subset: Vec<usize> = (0..m).collect();
    loop {
        if let Some(x) = vertex_of_basis(inst, &subset) {
            feasible += 1;
            let value = inst.phi(&x);
            if best.as_ref().is_none_or(|(b, _)| value > *b) {
                best = Some((value, x));
            }
        }
        if !next_combination(&mut subset, n) {
            break;
        }
    }
    match best {
        Some((value, x)) => Ok(OracleOptimum {
            value,
            x,
            vertices: feasible,
        }),
        None => Err(OracleError::Infeasible),
    }
}

fn binomial(n: usize, k: usize) -> f64 {
    let k = k.min(n - k);
    let mut acc = 1.0f64;
    for i in 0..k {
        acc = acc * (n - i) as f64 / (i + 1) as f64;
    }
    acc
}

/// Advance `subset` (strictly increasing indices into `0..n`) to the next
/// combination in lexicographic order; false when exhausted.
fn next_combination(subset: &mut [usize], n: usize) -> bool {
    let k = subset.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if subset[i] < n - k + i {
            subset[i] += 1;
            for j in i + 1..k {
                subset[j] = subset[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// The basic solution of a column subset, when it is a feasible vertex.
fn vertex_of_basis(inst: &QpInstance, basis: &[usize]) -> Option<DVector<f64>> {
    let m = inst.m;
    let mut ab = nalgebra::DMatrix::zeros(m, m);
    for (k, &j) in basis.iter().enumerate() {
        ab.set_column(k, &inst.a.column(j));
    }
    let lu = LuFactors::new(&ab).ok()?;
    let xb = lu.solve(&inst.b);
    if xb.iter().any(|&v| v < -1e-9) {
        return None;
    }
    let mut x = DVector::zeros(inst.n);
    for (k, &j) in basis.iter().enumerate() {
        x[j] = xb[k].max(0.0);
    }
    Some(x)
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;

    /// `max x₀² + x₁²` over `x₀ + x₁ = 1, x ≥ 0`: optimum 1 at either unit
    /// vertex.
    fn toy() -> QpInstance {
        QpInstance {
            name: "toy".into(),
            n: 2,
            m: 1,
            a: DMatrix::from_row_slice(1, 2, &[1.0, 1.0]),
            b: DVector::from_vec(vec![1.0]),
            h: DMatrix::identity(2, 2),
            p: DVector::zeros(2),
            vr: None,
        }
    }

    /// Random bounded instance: positive rows keep the region compact, a
    /// Gram matrix keeps the objective convex.
    fn random_instance(rng: &mut SplitMix64, n: usize, m: usize) -> QpInstance {
        let a = DMatrix::from_fn(m, n, |_, _| rng.uniform(0.2, 1.5));
        let x0 = DVector::from_fn(n, |_, _| rng.uniform(0.1, 1.0));
        let b = &a * x0;
        let g = DMatrix::from_fn(n, n, |_, _| rng.uniform(-1.0, 1.0));
        let h = &g * g.transpose();
        let p = DVector::from_fn(n, |_, _| rng.uniform(-1.0, 1.0));
        QpInstance {
            name: "random".into(),
            n,
            m,
            a,
            b,
            h,
            p,
            vr: None,
        }
    }

    #[test]
    fn reference_query_answers_both_ways() {
        let inst = toy();
        let params = SolverParams::default();
        let report = solve_reference(&inst, 0.5, &params).unwrap();
        assert_eq!(report.status, SolveStatus::AnsweredGe);
        assert!(report.lower >= 0.5);
        let x = report.best_x.unwrap();
        assert!((inst.phi(&x) - report.lower).abs() <= 1e-9);

        let report = solve_reference(&inst, 1.5, &params).unwrap();
        assert_eq!(report.status, SolveStatus::AnsweredLt);
        assert!(report.upper < 1.5, "upper = {}", report.upper);
        assert!(report.lower <= report.upper + 1e-9);
    }

    #[test]
    fn reference_answer_never_brackets_the_level() {
        // The report's interval must not leave v_r strictly inside
        // (lower, upper] with an answered status.
        let mut rng = SplitMix64::new(0xd61f);
        for k in 0..10 {
            let inst = random_instance(&mut rng, 5, 2);
            if inst.validate().is_err() {
                continue;
            }
            let oracle = oracle_optimum(&inst).unwrap();
            let v_r = oracle.value * if k % 2 == 0 { 0.9 } else { 1.1 };
            let report = solve_reference(&inst, v_r, &SolverParams::default()).unwrap();
            match report.status {
                SolveStatus::AnsweredGe => {
                    assert!(report.lower >= v_r);
                    assert!(
                        oracle.value >= v_r - 1e-7 * v_r.abs().max(1.0),
                        "claimed ≥ {v_r} but the true optimum is {}",
                        oracle.value
                    );
                }
                SolveStatus::AnsweredLt => {
                    assert!(report.upper < v_r);
                    assert!(
                        oracle.value < v_r + 1e-7 * v_r.abs().max(1.0),
                        "claimed < {v_r} but the true optimum is {}",
                        oracle.value
                    );
                }
                other => panic!("unexpected status {other} on a tiny instance"),
            }
        }
    }

    #[test]
    fn global_query_closes_on_the_toy() {
        let inst = toy();
        let params = SolverParams {
            eps_gap: 1e-6,
            ..SolverParams::default()
        };
        let report = solve_global(&inst, &params).unwrap();
        assert_eq!(report.status, SolveStatus::GapClosed);
        assert!((report.lower - 1.0).abs() <= 1e-6, "lower = {}", report.lower);
        assert!(report.upper - report.lower <= 1e-6 * report.lower.abs().max(1e-6));
        assert!(report.upper >= report.lower);
    }

    #[test]
    fn global_query_matches_enumeration() {
        let mut rng = SplitMix64::new(0x91a7);
        let mut done = 0;
        while done < 8 {
            let inst = random_instance(&mut rng, 5, 2);
            if inst.validate().is_err() {
                continue;
            }
            let oracle = oracle_optimum(&inst).unwrap();
            let params = SolverParams {
                eps_gap: 1e-6,
                ..SolverParams::default()
            };
            let report = solve_global(&inst, &params).unwrap();
            assert_eq!(report.status, SolveStatus::GapClosed, "{report:?}");
            let scale = oracle.value.abs().max(1.0);
            assert!(
                (report.lower - oracle.value).abs() <= 1e-5 * scale,
                "incumbent {} vs enumerated optimum {}",
                report.lower,
                oracle.value
            );
            assert!(report.upper >= oracle.value - 1e-5 * scale);
            assert!(report.lower <= oracle.value + 1e-9 * scale);
            done += 1;
        }
    }

    #[test]
    fn oracle_agrees_with_hand_maximum_and_guards_size() {
        let oracle = oracle_optimum(&toy()).unwrap();
        assert!((oracle.value - 1.0).abs() < 1e-12);
        assert_eq!(oracle.vertices, 2);

        let mut rng = SplitMix64::new(1);
        let big = random_instance(&mut rng, 20, 4);
        assert!(matches!(
            oracle_optimum(&big),
            Err(OracleError::TooLarge { .. })
        ));
    }

    #[test]
    fn trace_records_cuts_when_requested() {
        let inst = toy();
        let params = SolverParams {
            record_trace: true,
            ..SolverParams::default()
        };
        let report = solve_reference(&inst, 1.5, &params).unwrap();
        assert_eq!(report.status, SolveStatus::AnsweredLt);
        // At least one iteration ran and recorded its relaxation bound.
        assert!(!report.trace.is_empty());
        let rec = &report.trace[0];
        assert!(rec.certified.is_some());
        assert!(rec.certified.unwrap() < 1.5);
    }
}
