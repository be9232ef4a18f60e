//! Deterministic dense two-phase primal simplex.
//!
//! Every LP in the solver pipeline funnels through this module: local-search
//! steps, cut-depth subproblems, region feasibility probes, and the
//! boundedness/interior certificates. Determinism is a hard requirement (the
//! same instance must produce the same pivot sequence on every run), so
//! pricing and ratio-test ties break by lowest index, and degeneracy switches
//! the pricing rule to Bland's after a fixed budget of degenerate pivots.
//!
//! The engine is a revised simplex with an explicitly maintained basis
//! inverse, eta-updated each pivot and rebuilt from a fresh LU factorization
//! every [`REFACTOR_INTERVAL`] pivots to keep roundoff in check.

use nalgebra::{DMatrix, DVector, RowDVector};
use thiserror::Error;

use crate::numlin::LuFactors;

/// Ratio-test tolerance: a direction entry must exceed this to block.
pub const RATIO_TOL: f64 = 1e-9;
/// Rebuild the basis inverse from scratch this often.
pub const REFACTOR_INTERVAL: usize = 50;
/// A pivot with step length at most this counts as degenerate.
const DEGENERATE_STEP_TOL: f64 = 1e-10;
/// Phase-1 objective above this (scaled) declares infeasibility.
const FEAS_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Max,
    Min,
}

/// Per-variable lower bound: all variables are either nonnegative or free.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LowerBound {
    Zero,
    Free,
}

/// `sense c·x` subject to `a_eq x = b_eq`, `a_ub x ≤ b_ub`, and `x ≥ 0`
/// except for variables marked [`LowerBound::Free`].
#[derive(Debug, Clone)]
pub struct LpProblem {
    pub sense: Sense,
    pub c: DVector<f64>,
    pub a_eq: DMatrix<f64>,
    pub b_eq: DVector<f64>,
    pub a_ub: DMatrix<f64>,
    pub b_ub: DVector<f64>,
    pub lower: Vec<LowerBound>,
}

impl LpProblem {
    /// Equality-constrained problem over nonnegative variables.
    pub fn equality_form(sense: Sense, c: DVector<f64>, a: DMatrix<f64>, b: DVector<f64>) -> Self {
        let n = c.len();
        Self {
            sense,
            c,
            a_eq: a,
            b_eq: b,
            a_ub: DMatrix::zeros(0, n),
            b_ub: DVector::zeros(0),
            lower: vec![LowerBound::Zero; n],
        }
    }

    /// Inequality-constrained problem over nonnegative variables.
    pub fn inequality_form(
        sense: Sense,
        c: DVector<f64>,
        a_ub: DMatrix<f64>,
        b_ub: DVector<f64>,
    ) -> Self {
        let n = c.len();
        Self {
            sense,
            c,
            a_eq: DMatrix::zeros(0, n),
            b_eq: DVector::zeros(0),
            a_ub,
            b_ub,
            lower: vec![LowerBound::Zero; n],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Solution report. `basis` lists the standardized column basic in each row;
/// for equality-form problems without free variables, standardized indices
/// coincide with the caller's variable indices (slacks of `a_ub` rows follow
/// at `n..n+ub_rows`).
#[derive(Debug, Clone)]
pub struct LpSolution {
    pub status: LpStatus,
    pub x: DVector<f64>,
    pub objective: f64,
    pub basis: Vec<usize>,
    /// One multiplier per row, equality rows first; at optimality
    /// `objective = duals · (b_eq, b_ub)`.
    pub duals: DVector<f64>,
    /// True when the solve stopped at the caller's early-stop threshold
    /// before proving optimality (objective is then a valid bound in the
    /// minimizing direction but not necessarily optimal).
    pub early_stopped: bool,
}

#[derive(Debug, Error)]
pub enum LpError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("simplex numerical breakdown: {0}")]
    NumericalBreakdown(String),
    #[error("supplied basis is singular")]
    SingularBasis,
    #[error("supplied basis is infeasible for the right-hand side")]
    InfeasibleBasis,
    #[error("region is unbounded in the objective direction")]
    Unbounded,
    #[error("region is infeasible")]
    Infeasible,
}

/// Outcome of basis polishing at a fixed vertex.
#[derive(Debug, Clone)]
pub enum PolishOutcome {
    /// Optimality certified at the vertex; the basis has all reduced costs
    /// nonnegative for the given (maximization) objective.
    Optimal { basis: Vec<usize> },
    /// An improving nondegenerate step exists: the vertex is not optimal.
    Moved,
}

/// Reusable solver object. One solve at a time; concurrent solves need
/// distinct workspaces. Tracks how many LPs it has run for reporting.
#[derive(Debug, Default)]
pub struct LpWorkspace {
    pub solves: u64,
}

/// Standardized column: a signed original variable or a slack.
#[derive(Debug, Clone, Copy)]
enum StdCol {
    Var { index: usize, sign: f64 },
    Slack { row: usize },
}

struct Standardized {
    cols: Vec<StdCol>,
    a: DMatrix<f64>,    // rows × std cols, after row-sign normalization
    b: DVector<f64>,    // ≥ 0
    row_sign: Vec<f64>, // +1 / −1 applied to each user row
    c_min: DVector<f64>, // internal minimization costs per std col
    sense_sign: f64,    // −1 when user sense is Max
    n_user: usize,
}

fn standardize(p: &LpProblem) -> Result<Standardized, LpError> {
    let n = p.c.len();
    if p.a_eq.ncols() != n && p.a_eq.nrows() > 0 {
        return Err(LpError::DimensionMismatch(format!(
            "a_eq has {} cols, c has {}",
            p.a_eq.ncols(),
            n
        )));
    }
    if p.a_ub.ncols() != n && p.a_ub.nrows() > 0 {
        return Err(LpError::DimensionMismatch(format!(
            "a_ub has {} cols, c has {}",
            p.a_ub.ncols(),
            n
        )));
    }
    if p.a_eq.nrows() != p.b_eq.len() || p.a_ub.nrows() != p.b_ub.len() || p.lower.len() != n {
        return Err(LpError::DimensionMismatch(
            "row counts or bound list inconsistent".into(),
        ));
    }
    let m_eq = p.a_eq.nrows();
    let m_ub = p.a_ub.nrows();
    let rows = m_eq + m_ub;

    let mut cols = Vec::new();
    for (i, lb) in p.lower.iter().enumerate() {
        cols.push(StdCol::Var { index: i, sign: 1.0 });
        if matches!(lb, LowerBound::Free) {
            cols.push(StdCol::Var {
                index: i,
                sign: -1.0,
            });
        }
    }
    for r in 0..m_ub {
        cols.push(StdCol::Slack { row: r });
    }

    let sense_sign = match p.sense {
        Sense::Max => -1.0,
        Sense::Min => 1.0,
    };

    let mut a = DMatrix::zeros(rows, cols.len());
    let mut b = DVector::zeros(rows);
    let mut row_sign = vec![1.0; rows];
    for r in 0..m_eq {
        b[r] = p.b_eq[r];
    }
    for r in 0..m_ub {
        b[m_eq + r] = p.b_ub[r];
    }
    for (j, col) in cols.iter().enumerate() {
        match *col {
            StdCol::Var { index, sign } => {
                for r in 0..m_eq {
                    a[(r, j)] = sign * p.a_eq[(r, index)];
                }
                for r in 0..m_ub {
                    a[(m_eq + r, j)] = sign * p.a_ub[(r, index)];
                }
            }
            StdCol::Slack { row } => {
                a[(m_eq + row, j)] = 1.0;
            }
        }
    }
    // Normalize rows so the artificial starting basis is feasible.
    for r in 0..rows {
        if b[r] < 0.0 {
            b[r] = -b[r];
            row_sign[r] = -1.0;
            for j in 0..cols.len() {
                a[(r, j)] = -a[(r, j)];
            }
        }
    }
    let mut c_min = DVector::zeros(cols.len());
    for (j, col) in cols.iter().enumerate() {
        if let StdCol::Var { index, sign } = *col {
            c_min[j] = sense_sign * sign * p.c[index];
        }
    }
    Ok(Standardized {
        cols,
        a,
        b,
        row_sign,
        c_min,
        sense_sign,
        n_user: n,
    })
}

/// Encodes "artificial for row r" as a column id past the structural range.
fn art_col(ncols: usize, row: usize) -> usize {
    ncols + row
}

struct Engine<'a> {
    a: &'a DMatrix<f64>,
    b: &'a DVector<f64>,
    rows: usize,
    ncols: usize,
    basis: Vec<usize>,
    binv: DMatrix<f64>,
    xb: DVector<f64>,
    pivots_since_refactor: usize,
    degenerate_streak: usize,
    bland: bool,
}

enum Phase2Result {
    Optimal,
    Unbounded,
    EarlyStopped,
}

impl<'a> Engine<'a> {
    fn new_artificial(a: &'a DMatrix<f64>, b: &'a DVector<f64>) -> Self {
        let rows = a.nrows();
        let ncols = a.ncols();
        Engine {
            a,
            b,
            rows,
            ncols,
            basis: (0..rows).map(|r| art_col(ncols, r)).collect(),
            binv: DMatrix::identity(rows, rows),
            xb: b.clone(),
            pivots_since_refactor: 0,
            degenerate_streak: 0,
            bland: false,
        }
    }

    fn from_basis(
        a: &'a DMatrix<f64>,
        b: &'a DVector<f64>,
        basis: Vec<usize>,
    ) -> Result<Self, LpError> {
        let rows = a.nrows();
        let ncols = a.ncols();
        if basis.len() != rows {
            return Err(LpError::DimensionMismatch(format!(
                "basis has {} entries for {} rows",
                basis.len(),
                rows
            )));
        }
        let mut bmat = DMatrix::zeros(rows, rows);
        for (k, &j) in basis.iter().enumerate() {
            bmat.set_column(k, &a.column(j));
        }
        let binv = LuFactors::new(&bmat)
            .map_err(|_| LpError::SingularBasis)?
            .inverse();
        let xb = &binv * b;
        let scale = b.amax().max(1.0);
        if xb.min() < -FEAS_TOL * scale {
            return Err(LpError::InfeasibleBasis);
        }
        Ok(Engine {
            a,
            b,
            rows,
            ncols,
            basis,
            binv,
            xb,
            pivots_since_refactor: 0,
            degenerate_streak: 0,
            bland: false,
        })
    }

    fn column(&self, j: usize) -> DVector<f64> {
        if j < self.ncols {
            self.a.column(j).into_owned()
        } else {
            // Artificial: unit column for its row.
            let mut e = DVector::zeros(self.rows);
            e[j - self.ncols] = 1.0;
            e
        }
    }

    fn cost_of(&self, costs: &DVector<f64>, j: usize, phase1: bool) -> f64 {
        if j < self.ncols {
            costs[j]
        } else if phase1 {
            // Artificials carry cost 1 in phase 1. In phase 2 a still-basic
            // artificial marks a redundant row pinned at zero and must price
            // at cost 0 or it would pollute the duals.
            1.0
        } else {
            0.0
        }
    }

    fn refactor(&mut self) -> Result<(), LpError> {
        let mut bmat = DMatrix::zeros(self.rows, self.rows);
        for (k, &j) in self.basis.iter().enumerate() {
            bmat.set_column(k, &self.column(j));
        }
        self.binv = LuFactors::new(&bmat)
            .map_err(|_| LpError::NumericalBreakdown("singular basis at refactorization".into()))?
            .inverse();
        self.xb = &self.binv * self.b;
        self.pivots_since_refactor = 0;
        Ok(())
    }

    fn duals(&self, costs: &DVector<f64>, phase1: bool) -> RowDVector<f64> {
        let mut cb = RowDVector::zeros(self.rows);
        for (k, &j) in self.basis.iter().enumerate() {
            cb[k] = if phase1 {
                if j >= self.ncols {
                    1.0
                } else {
                    0.0
                }
            } else {
                self.cost_of(costs, j, false)
            };
        }
        cb * &self.binv
    }

    /// One simplex phase over the structural columns.
    ///
    /// `allow_enter[j]` gates entering columns. `phase1` prices artificials
    /// at cost one. `step_cap` refuses nondegenerate pivots (basis polishing
    /// at a fixed vertex). `stop_below` ends phase 2 early once the running
    /// objective (internal minimization) is at or below the threshold.
    #[allow(clippy::too_many_arguments)]
    fn run_phase(
        &mut self,
        costs: &DVector<f64>,
        phase1: bool,
        allow_enter: &[bool],
        refuse_nondegenerate: bool,
        stop_below: Option<f64>,
        price_tol: f64,
    ) -> Result<Phase2Result, LpError> {
        let max_pivots = 200 * (self.rows + self.ncols) + 10_000;
        let bland_budget = 3 * (self.rows + self.ncols);
        for _pivot in 0..max_pivots {
            if let Some(threshold) = stop_below {
                let obj: f64 = self
                    .basis
                    .iter()
                    .enumerate()
                    .map(|(k, &j)| self.cost_of(costs, j, phase1) * self.xb[k])
                    .sum();
                if obj <= threshold {
                    return Ok(Phase2Result::EarlyStopped);
                }
            }
            let y = self.duals(costs, phase1);
            // Basic-column membership for pricing exclusion.
            let mut in_basis = vec![false; self.ncols + self.rows];
            for &j in &self.basis {
                in_basis[j] = true;
            }
            // Entering choice: Dantzig (most negative reduced cost) with
            // lowest-index ties, or Bland (lowest index negative) once the
            // degenerate streak exceeds its budget.
            let mut enter: Option<(usize, f64)> = None;
            for j in 0..self.ncols {
                if in_basis[j] || !allow_enter[j] {
                    continue;
                }
                let rc = self.cost_of(costs, j, phase1) - (y.transpose().dot(&self.a.column(j)));
                if rc < -price_tol {
                    if self.bland {
                        enter = Some((j, rc));
                        break;
                    }
                    match enter {
                        Some((_, best)) if rc >= best => {}
                        _ => enter = Some((j, rc)),
                    }
                }
            }
            let Some((j_enter, _)) = enter else {
                return Ok(Phase2Result::Optimal);
            };
            let dcol = &self.binv * self.column(j_enter);
            // Ratio test. Rows holding a basic artificial at zero block on
            // any significant coefficient (either sign) so artificials can
            // never re-grow; other rows block on positive coefficients.
            let scale = self.xb.amax().max(1.0);
            let mut leave: Option<(usize, f64)> = None;
            for r in 0..self.rows {
                let basic_art = self.basis[r] >= self.ncols;
                let d = dcol[r];
                let blocks = if basic_art && self.xb[r] <= DEGENERATE_STEP_TOL * scale {
                    d.abs() > RATIO_TOL
                } else {
                    d > RATIO_TOL
                };
                if !blocks {
                    continue;
                }
                // A zero-artificial row with d < 0 admits step exactly zero.
                let ratio = if d > 0.0 { self.xb[r].max(0.0) / d } else { 0.0 };
                match leave {
                    None => leave = Some((r, ratio)),
                    Some((r_best, best)) => {
                        let better = ratio < best - 1e-15
                            || (ratio <= best + 1e-15 && {
                                if self.bland {
                                    self.basis[r] < self.basis[r_best]
                                } else {
                                    r < r_best
                                }
                            });
                        if better {
                            leave = Some((r, ratio));
                        }
                    }
                }
            }
            let Some((r_leave, step)) = leave else {
                return Ok(Phase2Result::Unbounded);
            };
            if refuse_nondegenerate && step > DEGENERATE_STEP_TOL * scale {
                return Ok(Phase2Result::Unbounded); // caller interprets as "moved"
            }
            // Eta update of the explicit inverse and the basic solution.
            let piv = dcol[r_leave];
            if piv.abs() <= 1e-12 {
                return Err(LpError::NumericalBreakdown("vanishing pivot".into()));
            }
            let pivot_row = self.binv.row(r_leave) / piv;
            for r in 0..self.rows {
                if r == r_leave {
                    continue;
                }
                let factor = dcol[r];
                if factor != 0.0 {
                    let update = &pivot_row * factor;
                    let mut row = self.binv.row_mut(r);
                    row -= update;
                }
            }
            self.binv.set_row(r_leave, &pivot_row);
            let theta = step;
            for r in 0..self.rows {
                if r == r_leave {
                    continue;
                }
                self.xb[r] -= dcol[r] * theta;
                if self.xb[r] < 0.0 && self.xb[r] > -1e-12 {
                    self.xb[r] = 0.0;
                }
            }
            self.xb[r_leave] = theta;
            self.basis[r_leave] = j_enter;

            if step <= DEGENERATE_STEP_TOL * scale {
                self.degenerate_streak += 1;
                if self.degenerate_streak > bland_budget {
                    self.bland = true;
                }
            } else {
                self.degenerate_streak = 0;
                self.bland = false;
            }
            self.pivots_since_refactor += 1;
            if self.pivots_since_refactor >= REFACTOR_INTERVAL {
                self.refactor()?;
            }
        }
        Err(LpError::NumericalBreakdown(
            "pivot limit exceeded (cycling?)".into(),
        ))
    }

    /// After phase 1: pivot basic artificials onto structural columns where
    /// possible. Remaining artificial rows are redundant and stay pinned at
    /// zero (the ratio-test guard keeps them there).
    fn drive_out_artificials(&mut self, allow_enter: &[bool]) {
        for r in 0..self.rows {
            if self.basis[r] < self.ncols {
                continue;
            }
            let brow = self.binv.row(r).into_owned();
            let mut best: Option<(usize, f64)> = None;
            for (j, &enter_ok) in allow_enter.iter().enumerate().take(self.ncols) {
                if !enter_ok {
                    continue;
                }
                let piv = brow.transpose().dot(&self.a.column(j));
                if piv.abs() > 1e-7 {
                    let in_basis = self.basis.contains(&j);
                    if !in_basis {
                        match best {
                            Some((_, b)) if piv.abs() <= b => {}
                            _ => best = Some((j, piv.abs())),
                        }
                    }
                }
            }
            if let Some((j, _)) = best {
                let dcol = &self.binv * self.column(j);
                let piv = dcol[r];
                if piv.abs() <= 1e-9 {
                    continue;
                }
                let pivot_row = self.binv.row(r) / piv;
                for rr in 0..self.rows {
                    if rr == r {
                        continue;
                    }
                    let factor = dcol[rr];
                    if factor != 0.0 {
                        let update = &pivot_row * factor;
                        let mut row = self.binv.row_mut(rr);
                        row -= update;
                    }
                }
                self.binv.set_row(r, &pivot_row);
                self.basis[r] = j;
                // Degenerate pivot: xb[r] is zero and stays zero.
            }
        }
        self.xb = &self.binv * self.b;
        for v in self.xb.iter_mut() {
            if *v < 0.0 && *v > -1e-10 {
                *v = 0.0;
            }
        }
    }
}

impl LpWorkspace {
    pub fn new() -> Self {
        Self::default()
    }

    /// Solve an LP from a cold start (two phases).
    pub fn solve(&mut self, p: &LpProblem) -> Result<LpSolution, LpError> {
        self.solve_with_stop(p, None)
    }

    /// Solve with an optional early stop: once the running objective (in the
    /// problem's own sense, where Min stops when ≤ threshold and Max when ≥)
    /// reaches the threshold, return the current feasible iterate.
    pub fn solve_with_stop(
        &mut self,
        p: &LpProblem,
        stop_at: Option<f64>,
    ) -> Result<LpSolution, LpError> {
        self.solves += 1;
        let std = standardize(p)?;
        let mut eng = Engine::new_artificial(&std.a, &std.b);
        let allow_all = vec![true; std.cols.len()];
        let zero_costs = DVector::zeros(std.cols.len());
        // Phase 1: minimize the artificial sum.
        match eng.run_phase(&zero_costs, true, &allow_all, false, None, 1e-9)? {
            Phase2Result::Optimal => {}
            Phase2Result::Unbounded => {
                return Err(LpError::NumericalBreakdown(
                    "phase 1 reported unbounded".into(),
                ))
            }
            Phase2Result::EarlyStopped => unreachable!("no stop threshold in phase 1"),
        }
        let phase1_obj: f64 = eng
            .basis
            .iter()
            .enumerate()
            .filter(|(_, &j)| j >= std.cols.len())
            .map(|(k, _)| eng.xb[k])
            .sum();
        let feas_scale = std.b.amax().max(1.0);
        if phase1_obj > FEAS_TOL * feas_scale {
            let objective = match p.sense {
                Sense::Max => f64::NEG_INFINITY,
                Sense::Min => f64::INFINITY,
            };
            return Ok(LpSolution {
                status: LpStatus::Infeasible,
                x: DVector::zeros(std.n_user),
                objective,
                basis: Vec::new(),
                duals: DVector::zeros(eng.rows),
                early_stopped: false,
            });
        }
        eng.drive_out_artificials(&allow_all);

        // Phase 2 on the user objective (internal minimization).
        let stop_internal = stop_at.map(|s| std.sense_sign * s);
        let price_tol = 1e-9 * std.c_min.amax().max(1.0);
        let result = eng.run_phase(
            &std.c_min,
            false,
            &allow_all,
            false,
            stop_internal,
            price_tol,
        )?;
        self.extract(p, &std, eng, result)
    }

    /// Solve an equality-form problem warm-started from a caller basis
    /// (standardized indices = variable indices).
    pub fn solve_from_basis(
        &mut self,
        p: &LpProblem,
        basis: &[usize],
    ) -> Result<LpSolution, LpError> {
        self.solves += 1;
        let std = standardize(p)?;
        if std.cols.len() != std.n_user {
            return Err(LpError::DimensionMismatch(
                "warm start requires equality form without free variables".into(),
            ));
        }
        let mut eng = Engine::from_basis(&std.a, &std.b, basis.to_vec())?;
        let allow_all = vec![true; std.cols.len()];
        let price_tol = 1e-9 * std.c_min.amax().max(1.0);
        let result = eng.run_phase(&std.c_min, false, &allow_all, false, None, price_tol)?;
        self.extract(p, &std, eng, result)
    }

    /// Certify (or repair) LP optimality of a basis at a fixed vertex for a
    /// maximization objective, pivoting only degenerately. Returns
    /// [`PolishOutcome::Moved`] when the vertex itself is not optimal.
    pub fn polish_optimal_basis(
        &mut self,
        a: &DMatrix<f64>,
        b: &DVector<f64>,
        c_max: &DVector<f64>,
        start_basis: &[usize],
    ) -> Result<PolishOutcome, LpError> {
        self.solves += 1;
        let p = LpProblem::equality_form(Sense::Max, c_max.clone(), a.clone(), b.clone());
        let std = standardize(&p)?;
        let mut eng = Engine::from_basis(&std.a, &std.b, start_basis.to_vec())?;
        eng.bland = true; // degenerate pivoting needs anti-cycling from the start
        let allow_all = vec![true; std.cols.len()];
        let price_tol = 1e-9 * std.c_min.amax().max(1.0);
        match eng.run_phase(&std.c_min, false, &allow_all, true, None, price_tol)? {
            Phase2Result::Optimal => Ok(PolishOutcome::Optimal { basis: eng.basis }),
            Phase2Result::Unbounded => Ok(PolishOutcome::Moved),
            Phase2Result::EarlyStopped => unreachable!("no stop threshold in polish"),
        }
    }

    fn extract(
        &self,
        p: &LpProblem,
        std: &Standardized,
        eng: Engine<'_>,
        result: Phase2Result,
    ) -> Result<LpSolution, LpError> {
        match result {
            Phase2Result::Unbounded => {
                let objective = match p.sense {
                    Sense::Max => f64::INFINITY,
                    Sense::Min => f64::NEG_INFINITY,
                };
                return Ok(LpSolution {
                    status: LpStatus::Unbounded,
                    x: DVector::zeros(std.n_user),
                    objective,
                    basis: eng.basis,
                    duals: DVector::zeros(eng.rows),
                    early_stopped: false,
                });
            }
            Phase2Result::Optimal | Phase2Result::EarlyStopped => {}
        }
        let early_stopped = matches!(result, Phase2Result::EarlyStopped);
        let mut x = DVector::zeros(std.n_user);
        for (k, &j) in eng.basis.iter().enumerate() {
            if j < std.cols.len() {
                if let StdCol::Var { index, sign } = std.cols[j] {
                    x[index] += sign * eng.xb[k].max(0.0);
                }
            }
        }
        let objective = p.c.dot(&x);
        let y = eng.duals(&std.c_min, false);
        let mut duals = DVector::zeros(eng.rows);
        for r in 0..eng.rows {
            duals[r] = std.sense_sign * std.row_sign[r] * y[r];
        }
        Ok(LpSolution {
            status: LpStatus::Optimal,
            x,
            objective,
            basis: eng.basis,
            duals,
            early_stopped,
        })
    }
}

/// Build a nonsingular basis for `a` (m×n, rank m) whose columns include the
/// given support. Deterministic: support columns in index order, then the
/// remaining columns scanned in index order for rank growth.
pub fn crash_basis_from_support(
    a: &DMatrix<f64>,
    support: &[usize],
) -> Result<Vec<usize>, LpError> {
    let m = a.nrows();
    let n = a.ncols();
    let mut basis: Vec<usize> = Vec::with_capacity(m);
    // Columns get eliminated against previously accepted pivots; each
    // accepted column claims a pivot row.
    let mut pivots: Vec<(usize, DVector<f64>)> = Vec::new(); // (pivot row, eliminated column)
    let mut row_used = vec![false; m];
    let try_accept = |j: usize,
                          basis: &mut Vec<usize>,
                          pivots: &mut Vec<(usize, DVector<f64>)>,
                          row_used: &mut Vec<bool>|
     -> bool {
        let mut v = a.column(j).into_owned();
        let orig_scale = v.amax().max(1e-300);
        for (prow, pvec) in pivots.iter() {
            let factor = v[*prow] / pvec[*prow];
            if factor != 0.0 {
                v -= pvec * factor;
            }
        }
        let mut best_row = None;
        let mut best_abs = 1e-10 * orig_scale;
        for r in 0..m {
            if !row_used[r] && v[r].abs() > best_abs {
                best_abs = v[r].abs();
                best_row = Some(r);
            }
        }
        match best_row {
            Some(r) => {
                row_used[r] = true;
                pivots.push((r, v));
                basis.push(j);
                true
            }
            None => false,
        }
    };
    let mut sorted_support = support.to_vec();
    sorted_support.sort_unstable();
    sorted_support.dedup();
    for &j in &sorted_support {
        if j >= n {
            return Err(LpError::DimensionMismatch(format!(
                "support index {j} out of range"
            )));
        }
        if !try_accept(j, &mut basis, &mut pivots, &mut row_used) {
            return Err(LpError::SingularBasis);
        }
    }
    for j in 0..n {
        if basis.len() == m {
            break;
        }
        if sorted_support.binary_search(&j).is_ok() {
            continue;
        }
        try_accept(j, &mut basis, &mut pivots, &mut row_used);
    }
    if basis.len() != m {
        return Err(LpError::SingularBasis);
    }
    basis.sort_unstable();
    Ok(basis)
}

/// Longest total coordinate sum over `{y : fᵀy ≤ w, y ≥ 0}`; certifies
/// boundedness of the region. Errors with [`LpError::Unbounded`] when the
/// region is unbounded and [`LpError::Infeasible`] when it is empty.
pub fn compute_tstar(
    ws: &mut LpWorkspace,
    f: &DMatrix<f64>,
    w: &DVector<f64>,
) -> Result<f64, LpError> {
    let q = f.nrows();
    let p = LpProblem::inequality_form(
        Sense::Max,
        DVector::from_element(q, 1.0),
        f.transpose(),
        w.clone(),
    );
    let sol = ws.solve(&p)?;
    match sol.status {
        LpStatus::Optimal => Ok(sol.objective),
        LpStatus::Unbounded => Err(LpError::Unbounded),
        LpStatus::Infeasible => Err(LpError::Infeasible),
    }
}

/// Radius of the largest coordinate-aligned interior box of
/// `{y : fᵀy ≤ w, y ≥ 0}`, capped at 1: the largest ρ with
/// `{y ≥ ρ·1, fᵀy ≤ w − ρ·1}` nonempty. Returns 0 when the region has no
/// interior (including when it is empty).
pub fn compute_rho_star(ws: &mut LpWorkspace, f: &DMatrix<f64>, w: &DVector<f64>) -> f64 {
    let q = f.nrows();
    let mm = f.ncols();
    // Variables (ỹ, ρ) with y = ỹ + ρ·1: maximize ρ subject to
    // fᵀỹ + ρ(fᵀ1 + 1) ≤ w.
    let mut a = DMatrix::zeros(mm, q + 1);
    for r in 0..mm {
        for j in 0..q {
            a[(r, j)] = f[(j, r)];
        }
        let col_sum: f64 = (0..q).map(|j| f[(j, r)]).sum();
        a[(r, q)] = col_sum + 1.0;
    }
    let mut c = DVector::zeros(q + 1);
    c[q] = 1.0;
    let p = LpProblem::inequality_form(Sense::Max, c, a, w.clone());
    match ws.solve(&p) {
        Ok(sol) if sol.status == LpStatus::Optimal => sol.objective.clamp(0.0, 1.0),
        Ok(sol) if sol.status == LpStatus::Unbounded => 1.0,
        _ => 0.0,
    }
}

/// Enumerate every vertex of `{y : fᵀy ≤ w, y ≥ 0}` by brute force over
/// active sets, deduplicated. Exponential in the dimension — this is a test
/// oracle for small regions, not a production path; it shares no code with
/// the simplex engine beyond the dense linear solver.
pub fn enumerate_region_vertices(f: &DMatrix<f64>, w: &DVector<f64>) -> Vec<DVector<f64>> {
    let q = f.nrows();
    let mm = f.ncols();
    let total = mm + q; // region rows, then nonnegativity facets
    let mut verts: Vec<DVector<f64>> = Vec::new();
    let mut active = vec![0usize; q];
    fn rec(start: usize, depth: usize, q: usize, total: usize, active: &mut [usize], f: &mut impl FnMut(&[usize])) {
        if depth == q {
            f(&active[..depth]);
            return;
        }
        for j in start..total {
            active[depth] = j;
            rec(j + 1, depth + 1, q, total, active, f);
        }
    }
    let w_scale = w.amax().max(1.0);
    let mut visit = |set: &[usize]| {
        let mut m = DMatrix::zeros(q, q);
        let mut rhs = DVector::zeros(q);
        for (row, &idx) in set.iter().enumerate() {
            if idx < mm {
                for j in 0..q {
                    m[(row, j)] = f[(j, idx)];
                }
                rhs[row] = w[idx];
            } else {
                m[(row, idx - mm)] = 1.0;
            }
        }
        let Ok(y) = crate::numlin::solve_linear(&m, &rhs) else {
            return;
        };
        if y.min() < -1e-9 {
            return;
        }
        let fy = f.transpose() * &y;
        for r in 0..mm {
            if fy[r] > w[r] + 1e-9 * w_scale {
                return;
            }
        }
        let y_scale = y.amax().max(1.0);
        if verts.iter().all(|v| (v - &y).amax() > 1e-9 * y_scale) {
            verts.push(y);
        }
    };
    rec(0, 0, q, total, &mut active, &mut visit);
    verts
}

/// Phase-1 probe: a feasible point of `{y : fᵀy ≤ w, y ≥ 0}`, or `None`
/// when the region is empty.
pub fn feasible_point(
    ws: &mut LpWorkspace,
    f: &DMatrix<f64>,
    w: &DVector<f64>,
) -> Option<DVector<f64>> {
    let q = f.nrows();
    let p = LpProblem::inequality_form(Sense::Max, DVector::zeros(q), f.transpose(), w.clone());
    match ws.solve(&p) {
        Ok(sol) if sol.status == LpStatus::Optimal => Some(sol.x),
        _ => None,
    }
}
