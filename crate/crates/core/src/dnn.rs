//! Doubly-nonnegative (semidefinite) upper bounds for the reduced program.
//!
//! Over a corner region `{y : Fᵀy ≤ w, y ≥ 0}` the quadratic
//! `φ(y) = yᵀQy + 2dᵀy + v` is lifted to the matrix variable
//! `Ŷ = [[Y, y],[yᵀ, 1]] ⪰ 0` with one valid inequality `⟨W, Ŷ⟩ ≤ 0` for
//! every unordered pair drawn from the region's defining inequalities
//! (coordinate bounds and rows, plus the constant row indexed 0). Products of
//! two nonnegative affine forms stay nonnegative on the region, and the `W`
//! matrices encode exactly those products, so every feasible `y` lifts to a
//! feasible rank-one `Ŷ` and the SDP value bounds `max φ` from above.
//!
//! The solver is a primal–dual first-order splitting: a PSD projection on the
//! matrix iterate, scaled multiplier updates on the constraints (each `W`
//! normalized to unit Frobenius scale), over-relaxation 1.6, and a step-size
//! rebalance every 100 iterations when the primal/dual residual ratio drifts
//! past 10. Constraint matrices are never materialized — they act through
//! closed-form block operators so the per-iteration cost past the projection
//! is `O(q²·mm)` — and the returned bound never trusts the iteration: the
//! inexactness `ε` is recomputed from scratch on the returned iterate, and
//! the final bound is `ν + ε(1 + t*²)`, valid for any stopping point.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::lp::{self, LpWorkspace};
use crate::model::ReducedProgram;
use crate::numlin::{self, psd_project};

/// Over-relaxation factor for the splitting iteration.
const RELAXATION: f64 = 1.6;
/// Product of primal and dual step lengths times the squared operator norm.
const STEP_PRODUCT: f64 = 0.95;
/// Residual-ratio threshold that triggers a step rebalance.
const BALANCE_RATIO: f64 = 10.0;
/// Multiplicative step adjustment per rebalance.
const BALANCE_FACTOR: f64 = 1.5;
/// Bounds on the accumulated balance factor.
const BALANCE_MIN: f64 = 1e-4;
const BALANCE_MAX: f64 = 1e4;
/// The corner entry must exceed this for normalization to be meaningful.
const CORNER_MIN: f64 = 1e-10;
/// Power-iteration rounds used to estimate the operator norm.
const POWER_ITERS: usize = 40;

#[derive(Debug, Error)]
pub enum DnnError {
    #[error("iterate cannot be normalized: corner entry below {CORNER_MIN:e}")]
    NormalizationFailure,
    #[error("eigendecomposition failed during the splitting iteration")]
    EigFailure,
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("region subproblem is unbounded")]
    UnboundedRegion,
}

/// Stopping parameters for [`solve_dnn`].
#[derive(Debug, Clone)]
pub struct SdpParams {
    /// Target inexactness `ε` (see [`SdpSolution::epsilon`]).
    pub tol: f64,
    /// Hard iteration cap; hitting it returns the best certificate so far
    /// rather than an error.
    pub max_iters: usize,
    /// Convergence checks, rebalances, and deadline checks happen at this
    /// cadence.
    pub check_every: usize,
    /// Optional wall-clock deadline.
    pub deadline: Option<std::time::Instant>,
}

impl Default for SdpParams {
    fn default() -> Self {
        SdpParams {
            tol: 1e-6,
            max_iters: 20_000,
            check_every: 100,
            deadline: None,
        }
    }
}

/// Outcome of a relaxation solve. Validity of the upper bound rests only on
/// `nu`, `epsilon`, and the trace bound of the region — not on convergence:
/// `max φ ≤ nu + epsilon·(1 + t*²)` for any iterate (see
/// [`certify_upper_bound`]).
#[derive(Debug, Clone)]
pub struct SdpSolution {
    /// Multiplier value `ν` of the normalization row (the bound candidate).
    pub nu: f64,
    /// Verified inexactness at the returned iterate: the largest of the
    /// primal constraint violation, the positive part of the top dual-slack
    /// eigenvalue, and the primal–dual gap.
    pub epsilon: f64,
    /// Objective value `⟨Q̂, Ŷ⟩` of the returned primal iterate.
    pub primal_value: f64,
    /// Returned primal iterate: PSD, corner normalized to one.
    pub y_hat: DMatrix<f64>,
    /// Pair multipliers `λ ≤ 0` in enumeration order.
    pub lambda: DVector<f64>,
    pub iterations: usize,
    /// Whether `epsilon ≤ tol` was reached before the caps.
    pub converged: bool,
}

/// The lifted relaxation data for one corner region.
#[derive(Debug, Clone)]
pub struct ShorProblem {
    /// Dimension of `y`.
    pub q: usize,
    /// Number of region rows (columns of `f`).
    pub mm: usize,
    /// Region: `fᵀy ≤ w, y ≥ 0` with `f` of shape `q×mm`.
    pub f: DMatrix<f64>,
    pub w: DVector<f64>,
    /// Lifted objective `[[Q, d],[dᵀ, v]]`.
    pub qhat: DMatrix<f64>,
    norms: Vec<f64>,
}

impl ShorProblem {
    pub fn new(
        qmat: &DMatrix<f64>,
        d: &DVector<f64>,
        v: f64,
        f: &DMatrix<f64>,
        w: &DVector<f64>,
    ) -> Result<Self, DnnError> {
        let q = f.nrows();
        let mm = f.ncols();
        if qmat.nrows() != q || qmat.ncols() != q || d.len() != q || w.len() != mm {
            return Err(DnnError::InvalidInput(format!(
                "inconsistent dimensions: Q {}×{}, d {}, f {}×{}, w {}",
                qmat.nrows(),
                qmat.ncols(),
                d.len(),
                q,
                mm,
                w.len()
            )));
        }
        let mut qhat = DMatrix::zeros(q + 1, q + 1);
        qhat.view_mut((0, 0), (q, q)).copy_from(qmat);
        for i in 0..q {
            qhat[(i, q)] = d[i];
            qhat[(q, i)] = d[i];
        }
        qhat[(q, q)] = v;
        let mut shor = ShorProblem {
            q,
            mm,
            f: f.clone(),
            w: w.clone(),
            qhat,
            norms: Vec::new(),
        };
        shor.norms = shor.compute_norms();
        Ok(shor)
    }

    pub fn from_reduced(red: &ReducedProgram) -> Result<Self, DnnError> {
        Self::new(&red.qmat, &red.d, red.v, &red.f, &red.w)
    }

    /// Inequality indices: 0 is the constant row, `1..=q` the coordinate
    /// bounds, `q+1..=q+mm` the region rows.
    fn n_indices(&self) -> usize {
        self.q + self.mm
    }

    /// Number of unordered index pairs, hence of lifted inequalities.
    pub fn n_pairs(&self) -> usize {
        let t = self.n_indices();
        t * (t + 1) / 2
    }

    /// Pair at enumeration position `k` (lexicographic over `i < j`).
    pub fn pair(&self, k: usize) -> (usize, usize) {
        let t = self.n_indices();
        let mut k = k;
        for i in 0..=t {
            let run = t - i;
            if k < run {
                return (i, i + 1 + k);
            }
            k -= run;
        }
        panic!("pair index out of range");
    }

    /// `‖W‖_F` per pair, in enumeration order (closed form per pair class).
    fn compute_norms(&self) -> Vec<f64> {
        let q = self.q;
        let t = self.n_indices();
        let mut out = Vec::with_capacity(self.n_pairs());
        let col_norm2: Vec<f64> = (0..self.mm).map(|j| self.f.column(j).norm_squared()).collect();
        for i in 0..t {
            for j in (i + 1)..=t {
                let n2 = if i == 0 {
                    if j <= q {
                        2.0
                    } else {
                        let jr = j - q - 1;
                        2.0 * col_norm2[jr] + 4.0 * self.w[jr] * self.w[jr]
                    }
                } else if j <= q {
                    2.0
                } else if i <= q {
                    let jr = j - q - 1;
                    let fij = self.f[(i - 1, jr)];
                    2.0 * col_norm2[jr] + 2.0 * fij * fij + 2.0 * self.w[jr] * self.w[jr]
                } else {
                    let ir = i - q - 1;
                    let jr = j - q - 1;
                    let fi = self.f.column(ir);
                    let fj = self.f.column(jr);
                    let cross = fi.dot(&fj);
                    let mixed = (fj * self.w[ir] + fi * self.w[jr]).norm_squared();
                    2.0 * col_norm2[ir] * col_norm2[jr]
                        + 2.0 * cross * cross
                        + 2.0 * mixed
                        + 4.0 * self.w[ir] * self.w[ir] * self.w[jr] * self.w[jr]
                };
                out.push(n2.sqrt().max(1e-30));
            }
        }
        out
    }

    /// Materialize one `W` matrix — test and diagnostic path only; the
    /// solver uses the block operators.
    pub fn materialize_pair(&self, i: usize, j: usize) -> DMatrix<f64> {
        let q = self.q;
        let k1 = q + 1;
        let mut wmat = DMatrix::zeros(k1, k1);
        assert!(i < j && j <= self.n_indices());
        if i == 0 {
            if j <= q {
                wmat[(j - 1, q)] = -1.0;
                wmat[(q, j - 1)] = -1.0;
            } else {
                let jr = j - q - 1;
                for a in 0..q {
                    wmat[(a, q)] = self.f[(a, jr)];
                    wmat[(q, a)] = self.f[(a, jr)];
                }
                wmat[(q, q)] = -2.0 * self.w[jr];
            }
        } else if j <= q {
            wmat[(i - 1, j - 1)] = -1.0;
            wmat[(j - 1, i - 1)] = -1.0;
        } else if i <= q {
            let jr = j - q - 1;
            for a in 0..q {
                wmat[(a, i - 1)] += self.f[(a, jr)];
                wmat[(i - 1, a)] += self.f[(a, jr)];
            }
            wmat[(i - 1, q)] = -self.w[jr];
            wmat[(q, i - 1)] = -self.w[jr];
        } else {
            let ir = i - q - 1;
            let jr = j - q - 1;
            for a in 0..q {
                for b in 0..q {
                    wmat[(a, b)] = -self.f[(a, jr)] * self.f[(b, ir)]
                        - self.f[(a, ir)] * self.f[(b, jr)];
                }
            }
            for a in 0..q {
                let mix = self.w[ir] * self.f[(a, jr)] + self.w[jr] * self.f[(a, ir)];
                wmat[(a, q)] = mix;
                wmat[(q, a)] = mix;
            }
            wmat[(q, q)] = -2.0 * self.w[ir] * self.w[jr];
        }
        wmat
    }

    /// All pair values `⟨W_k, Ŷ⟩` (unnormalized), in enumeration order.
    pub fn apply_raw(&self, yhat: &DMatrix<f64>) -> DVector<f64> {
        let q = self.q;
        let t = self.n_indices();
        let yblock = yhat.view((0, 0), (q, q));
        let yvec = yhat.view((0, q), (q, 1));
        let corner = yhat[(q, q)];
        let yf = yblock * &self.f; // q×mm
        let g = self.f.transpose() * &yf; // mm×mm
        let u = self.f.transpose() * yvec; // mm
        let mut out = DVector::zeros(self.n_pairs());
        let mut k = 0;
        for i in 0..t {
            for j in (i + 1)..=t {
                out[k] = if i == 0 {
                    if j <= q {
                        -2.0 * yvec[(j - 1, 0)]
                    } else {
                        let jr = j - q - 1;
                        2.0 * (u[(jr, 0)] - self.w[jr] * corner)
                    }
                } else if j <= q {
                    -2.0 * yblock[(i - 1, j - 1)]
                } else if i <= q {
                    let jr = j - q - 1;
                    2.0 * (yf[(i - 1, jr)] - self.w[jr] * yvec[(i - 1, 0)])
                } else {
                    let ir = i - q - 1;
                    let jr = j - q - 1;
                    -2.0 * g[(ir, jr)]
                        + 2.0 * (self.w[ir] * u[(jr, 0)] + self.w[jr] * u[(ir, 0)])
                        - 2.0 * self.w[ir] * self.w[jr] * corner
                };
                k += 1;
            }
        }
        out
    }

    /// Adjoint of the scaled constraint map:
    /// `z0·W⁰ + Σ_k (z_k / ‖W_k‖)·W_k`, assembled blockwise.
    pub fn adjoint_scaled(&self, z0: f64, z: &DVector<f64>) -> DMatrix<f64> {
        let q = self.q;
        let mm = self.mm;
        let t = self.n_indices();
        debug_assert_eq!(z.len(), self.n_pairs());
        let mut avec = DVector::zeros(q); // (0, coordinate)
        let mut cvec = DVector::zeros(mm); // (0, row)
        let mut msym = DMatrix::zeros(q, q); // (coordinate, coordinate)
        let mut xi = DMatrix::zeros(q, mm); // (coordinate, row)
        let mut gamma = DMatrix::zeros(mm, mm); // (row, row)
        let mut k = 0;
        for i in 0..t {
            for j in (i + 1)..=t {
                let zt = z[k] / self.norms[k];
                k += 1;
                if zt == 0.0 {
                    continue;
                }
                if i == 0 {
                    if j <= q {
                        avec[j - 1] += zt;
                    } else {
                        cvec[j - q - 1] += zt;
                    }
                } else if j <= q {
                    msym[(i - 1, j - 1)] += zt;
                    msym[(j - 1, i - 1)] += zt;
                } else if i <= q {
                    xi[(i - 1, j - q - 1)] += zt;
                } else {
                    gamma[(i - q - 1, j - q - 1)] += zt;
                    gamma[(j - q - 1, i - q - 1)] += zt;
                }
            }
        }
        let mut out = DMatrix::zeros(q + 1, q + 1);
        // Top-left block.
        let fxi = &self.f * xi.transpose(); // q×q
        let fgamma = &self.f * &gamma; // q×mm
        let tl = -&msym + &fxi + fxi.transpose() - &fgamma * self.f.transpose();
        out.view_mut((0, 0), (q, q)).copy_from(&tl);
        // Border.
        let r = -avec + &self.f * &cvec - &xi * &self.w + &fgamma * &self.w;
        for a in 0..q {
            out[(a, q)] = r[a];
            out[(q, a)] = r[a];
        }
        // Corner: the normalization row plus the row-pair scalars.
        out[(q, q)] = z0
            - 2.0 * cvec.dot(&self.w)
            - (self.w.transpose() * &gamma * &self.w)[(0, 0)];
        out
    }

    /// Scaled forward map `[⟨W⁰,Ŷ⟩; ⟨W_k,Ŷ⟩/‖W_k‖]`.
    fn apply_scaled(&self, yhat: &DMatrix<f64>) -> DVector<f64> {
        let raw = self.apply_raw(yhat);
        let mut out = DVector::zeros(self.n_pairs() + 1);
        out[0] = yhat[(self.q, self.q)];
        for k in 0..self.n_pairs() {
            out[k + 1] = raw[k] / self.norms[k];
        }
        out
    }

    /// Operator-norm estimate of the scaled constraint map by power
    /// iteration on its self-adjoint square (deterministic seed).
    fn operator_norm(&self) -> f64 {
        let kk = self.n_pairs() + 1;
        let mut rng = crate::gen::SplitMix64::new(0x505d_5eed);
        let mut z = DVector::from_fn(kk, |_, _| if rng.next_f64() < 0.5 { -1.0 } else { 1.0 });
        let mut lambda: f64 = 1.0;
        for _ in 0..POWER_ITERS {
            let norm = z.norm();
            if norm <= 1e-300 {
                break;
            }
            z /= norm;
            let s = self.adjoint_scaled(z[0], &z.rows(1, kk - 1).into_owned());
            let zn = self.apply_scaled(&s);
            lambda = zn.norm();
            z = zn;
        }
        lambda.sqrt().max(1e-10) * 1.01
    }
}

struct Extracted {
    nu: f64,
    epsilon: f64,
    primal_value: f64,
    y_hat: DMatrix<f64>,
    lambda: DVector<f64>,
}

/// Recompute the certificate quantities from scratch at the current iterate:
/// project, renormalize, and measure every condition directly.
fn extract(shor: &ShorProblem, yhat: &DMatrix<f64>, z: &DVector<f64>) -> Option<Extracted> {
    let q = shor.q;
    let kk = shor.n_pairs();
    let proj = psd_project(yhat).ok()?;
    let corner = proj[(q, q)];
    if corner.is_nan() || corner <= CORNER_MIN {
        return None;
    }
    let ynorm = proj / corner;
    let raw = shor.apply_raw(&ynorm);
    let mut pviol: f64 = 0.0;
    for k in 0..kk {
        pviol = pviol.max(raw[k]);
    }
    let nu = z[0];
    let zpairs = z.rows(1, kk).into_owned();
    let lambda = DVector::from_fn(kk, |k, _| -zpairs[k] / shor.norms[k]);
    // Dual slack Q̂ + Σλ_k W_k − ν W⁰ = Q̂ − B̄*(z); feasibility asks ⪯ 0.
    let slack = &shor.qhat - shor.adjoint_scaled(z[0], &zpairs);
    let dviol = match numlin::eig_sym(&slack) {
        Ok(eig) => eig.lambda_max().max(0.0),
        Err(_) => return None,
    };
    let primal_value = (ynorm.transpose() * &shor.qhat).trace();
    let gap = (primal_value - nu).abs();
    Some(Extracted {
        nu,
        epsilon: pviol.max(dviol).max(gap),
        primal_value,
        y_hat: ynorm,
        lambda,
    })
}

/// Solve the lifted relaxation to tolerance (or caps) and return a
/// certificate-carrying solution. Hitting the iteration cap or deadline is
/// not an error: the certificate is recomputed at whatever iterate is
/// current, and the bound stays valid with the larger `ε`.
pub fn solve_dnn(shor: &ShorProblem, params: &SdpParams) -> Result<SdpSolution, DnnError> {
    let q = shor.q;
    let kk = shor.n_pairs();
    let lnorm = shor.operator_norm();
    let step0 = STEP_PRODUCT.sqrt() / lnorm;
    let mut balance: f64 = 1.0;

    let mut yhat = DMatrix::zeros(q + 1, q + 1);
    yhat[(q, q)] = 1.0;
    let mut z = DVector::zeros(kk + 1);
    // Start the normalization multiplier at the constant term: the corner
    // component of the first gradient, `z0 − Q̂[q,q]`, then vanishes, which
    // removes a violent initial transient that can crush the corner entry
    // for hundreds of iterations on larger regions.
    z[0] = shor.qhat[(q, q)];
    let mut yhat_mark = yhat.clone();
    let mut z_mark = z.clone();
    let mut iterations = 0;
    // Best certificate over all checkpoints. Each extraction is recomputed
    // from scratch at its iterate, so any of them is a valid return; keeping
    // the sharpest protects against an unlucky final snapshot (the corner
    // oscillates through zero early in the iteration).
    let mut best: Option<Extracted> = None;

    while iterations < params.max_iters {
        let step_primal = step0 / balance;
        let step_dual = step0 * balance;
        let budget = params.check_every.min(params.max_iters - iterations);
        for _ in 0..budget {
            let zpairs = z.rows(1, kk).into_owned();
            let grad = shor.adjoint_scaled(z[0], &zpairs) - &shor.qhat;
            let ynew =
                psd_project(&(&yhat - grad * step_primal)).map_err(|_| DnnError::EigFailure)?;
            let ybar = &ynew * 2.0 - &yhat;
            let vals = shor.apply_scaled(&ybar);
            let mut znew = DVector::zeros(kk + 1);
            znew[0] = z[0] + step_dual * (vals[0] - 1.0);
            for k in 1..=kk {
                znew[k] = (z[k] + step_dual * vals[k]).max(0.0);
            }
            // Over-relaxation of both coordinates.
            yhat = &yhat + (ynew - &yhat) * RELAXATION;
            z = &z + (znew - &z) * RELAXATION;
            iterations += 1;
        }
        // Rebalance steps when the residuals drift apart.
        let pres = (&yhat - &yhat_mark).norm() / step_primal / yhat.norm().max(1.0);
        let dres = (&z - &z_mark).norm() / step_dual / z.norm().max(1.0);
        if pres > BALANCE_RATIO * dres && dres > 0.0 {
            balance = (balance * BALANCE_FACTOR).min(BALANCE_MAX);
        } else if dres > BALANCE_RATIO * pres && pres > 0.0 {
            balance = (balance / BALANCE_FACTOR).max(BALANCE_MIN);
        }
        yhat_mark = yhat.clone();
        z_mark = z.clone();

        if let Some(ex) = extract(shor, &yhat, &z) {
            if ex.epsilon <= params.tol {
                return Ok(SdpSolution {
                    nu: ex.nu,
                    epsilon: ex.epsilon,
                    primal_value: ex.primal_value,
                    y_hat: ex.y_hat,
                    lambda: ex.lambda,
                    iterations,
                    converged: true,
                });
            }
            if best.as_ref().is_none_or(|b| ex.epsilon < b.epsilon) {
                best = Some(ex);
            }
        }
        if let Some(deadline) = params.deadline {
            if std::time::Instant::now() >= deadline {
                break;
            }
        }
    }
    let ex = match (extract(shor, &yhat, &z), best) {
        (Some(fin), Some(b)) => {
            if fin.epsilon <= b.epsilon {
                fin
            } else {
                b
            }
        }
        (Some(fin), None) => fin,
        (None, Some(b)) => b,
        (None, None) => return Err(DnnError::NormalizationFailure),
    };
    Ok(SdpSolution {
        nu: ex.nu,
        epsilon: ex.epsilon,
        primal_value: ex.primal_value,
        y_hat: ex.y_hat,
        lambda: ex.lambda,
        iterations,
        converged: false,
    })
}

/// The certified upper bound `ν + ε(1 + t*²)`: any lifted feasible point has
/// trace at most `1 + t*²` where `t*` is the longest coordinate sum over the
/// region, so the dual slack's `ε`-infeasibility costs at most `ε(1 + t*²)`.
pub fn certify_upper_bound(sol: &SdpSolution, tstar: f64) -> f64 {
    sol.nu + sol.epsilon * (1.0 + tstar * tstar)
}

/// Certified bound for `φ` over the region between a candidate cut and an
/// established one: `{y : Fᵀy ≤ w, θᵀy ≤ 1, τᵀy ≥ 1, y ≥ 0}`.
#[derive(Debug, Clone)]
pub struct RegionBound {
    /// Certified upper bound on `φ` over the strip; `−∞` when it is empty.
    pub bound: f64,
    /// Whether the strip is nonempty.
    pub feasible: bool,
    /// Longest coordinate sum over the strip (when nonempty).
    pub tstar: Option<f64>,
    /// The relaxation solve (when one ran).
    pub sdp: Option<SdpSolution>,
}

/// Bound `φ` over the strip cut off by `θ` but not by `τ`. An empty strip
/// yields `−∞` (the candidate excludes nothing new beyond `τ`'s certificate).
#[allow(clippy::too_many_arguments)]
pub fn dnn_bound_region(
    ws: &mut LpWorkspace,
    qmat: &DMatrix<f64>,
    d: &DVector<f64>,
    v: f64,
    f: &DMatrix<f64>,
    w: &DVector<f64>,
    theta: &DVector<f64>,
    tau: &DVector<f64>,
    params: &SdpParams,
) -> Result<RegionBound, DnnError> {
    let q = f.nrows();
    let mm = f.ncols();
    if theta.len() != q || tau.len() != q {
        return Err(DnnError::InvalidInput(
            "cut vectors must match the region dimension".into(),
        ));
    }
    let mut f_aug = DMatrix::zeros(q, mm + 2);
    f_aug.view_mut((0, 0), (q, mm)).copy_from(f);
    for a in 0..q {
        f_aug[(a, mm)] = theta[a];
        f_aug[(a, mm + 1)] = -tau[a];
    }
    let mut w_aug = DVector::zeros(mm + 2);
    w_aug.view_mut((0, 0), (mm, 1)).copy_from(w);
    w_aug[mm] = 1.0;
    w_aug[mm + 1] = -1.0;

    if lp::feasible_point(ws, &f_aug, &w_aug).is_none() {
        return Ok(RegionBound {
            bound: f64::NEG_INFINITY,
            feasible: false,
            tstar: None,
            sdp: None,
        });
    }
    let tstar = match lp::compute_tstar(ws, &f_aug, &w_aug) {
        Ok(t) => t,
        Err(crate::lp::LpError::Infeasible) => {
            return Ok(RegionBound {
                bound: f64::NEG_INFINITY,
                feasible: false,
                tstar: None,
                sdp: None,
            })
        }
        Err(crate::lp::LpError::Unbounded) => return Err(DnnError::UnboundedRegion),
        Err(e) => return Err(DnnError::InvalidInput(e.to_string())),
    };
    let shor = ShorProblem::new(qmat, d, v, &f_aug, &w_aug)?;
    let sdp = solve_dnn(&shor, params)?;
    let bound = certify_upper_bound(&sdp, tstar);
    Ok(RegionBound {
        bound,
        feasible: true,
        tstar: Some(tstar),
        sdp: Some(sdp),
    })
}

/// Lift a reduced-moment pair `(Y, y)` to the full coordinate order
/// `(nonbasic block, basic block, constant)`: the basic variables are affine
/// in `y` (`x_B = w − Fᵀy`), so their second moments follow from `(Y, y)`
/// exactly. The result inherits PSD-ness and nonnegativity from the lifted
/// inequalities of `(Y, y)`.
pub fn lemma1_lift(
    f: &DMatrix<f64>,
    w: &DVector<f64>,
    y: &DVector<f64>,
    ymat: &DMatrix<f64>,
) -> DMatrix<f64> {
    let q = f.nrows();
    let mm = f.ncols();
    assert_eq!(y.len(), q);
    assert_eq!(ymat.nrows(), q);
    let dim = q + mm + 1;
    let u = f.transpose() * y; // mm
    let yf = ymat * f; // q×mm
    let g = f.transpose() * &yf; // mm×mm
    let mut x = DMatrix::zeros(dim, dim);
    x.view_mut((0, 0), (q, q)).copy_from(ymat);
    // Nonbasic × basic: y(w − u)ᵀ shifted by the second moments.
    let nb = y * w.transpose() - &yf;
    x.view_mut((0, q), (q, mm)).copy_from(&nb);
    x.view_mut((q, 0), (mm, q)).copy_from(&nb.transpose());
    let bb = w * w.transpose() - &u * w.transpose() - w * u.transpose() + &g;
    x.view_mut((q, q), (mm, mm)).copy_from(&bb);
    let xb = w - &u;
    for a in 0..q {
        x[(a, dim - 1)] = y[a];
        x[(dim - 1, a)] = y[a];
    }
    for a in 0..mm {
        x[(q + a, dim - 1)] = xb[a];
        x[(dim - 1, q + a)] = xb[a];
    }
    x[(dim - 1, dim - 1)] = 1.0;
    x
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::SplitMix64;
    use crate::lp::enumerate_region_vertices;

    fn unit_interval_shor(qval: f64, dval: f64, v: f64) -> ShorProblem {
        ShorProblem::new(
            &DMatrix::from_row_slice(1, 1, &[qval]),
            &DVector::from_vec(vec![dval]),
            v,
            &DMatrix::from_row_slice(1, 1, &[1.0]),
            &DVector::from_vec(vec![1.0]),
        )
        .unwrap()
    }

    #[test]
    fn pair_table_matches_frozen_example() {
        let shor = unit_interval_shor(1.0, 0.0, 0.0);
        assert_eq!(shor.n_pairs(), 3);
        assert_eq!(shor.pair(0), (0, 1));
        assert_eq!(shor.pair(1), (0, 2));
        assert_eq!(shor.pair(2), (1, 2));
        let w01 = shor.materialize_pair(0, 1);
        assert_eq!(w01, DMatrix::from_row_slice(2, 2, &[0.0, -1.0, -1.0, 0.0]));
        let w02 = shor.materialize_pair(0, 2);
        assert_eq!(w02, DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, -2.0]));
        let w12 = shor.materialize_pair(1, 2);
        assert_eq!(w12, DMatrix::from_row_slice(2, 2, &[2.0, -1.0, -1.0, 0.0]));
    }

    #[test]
    fn blockwise_operators_match_materialized() {
        let mut rng = SplitMix64::new(0xb10c);
        for _ in 0..20 {
            let q = 2 + rng.uniform_int(0, 2) as usize;
            let mm = 1 + rng.uniform_int(0, 2) as usize;
            let f = DMatrix::from_fn(q, mm, |_, _| rng.uniform(-2.0, 2.0));
            let w = DVector::from_fn(mm, |_, _| rng.uniform(-1.0, 2.0));
            let qmat = DMatrix::from_fn(q, q, |_, _| rng.uniform(-1.0, 1.0));
            let qmat = (&qmat + qmat.transpose()) * 0.5;
            let d = DVector::from_fn(q, |_, _| rng.uniform(-1.0, 1.0));
            let shor = ShorProblem::new(&qmat, &d, 0.3, &f, &w).unwrap();
            let kk = shor.n_pairs();
            // Random symmetric iterate.
            let s = DMatrix::from_fn(q + 1, q + 1, |_, _| rng.uniform(-1.0, 1.0));
            let yhat = (&s + s.transpose()) * 0.5;
            let raw = shor.apply_raw(&yhat);
            for k in 0..kk {
                let (i, j) = shor.pair(k);
                let wmat = shor.materialize_pair(i, j);
                let direct = (wmat.transpose() * &yhat).trace();
                assert!(
                    (raw[k] - direct).abs() <= 1e-10 * direct.abs().max(1.0),
                    "pair ({i},{j}): blockwise {} vs materialized {}",
                    raw[k],
                    direct
                );
                let norm = wmat.norm();
                assert!(
                    (shor.norms[k] - norm).abs() <= 1e-10 * norm.max(1.0),
                    "pair ({i},{j}): norm {} vs {}",
                    shor.norms[k],
                    norm
                );
            }
            // Adjoint against the materialized sum, and adjointness itself.
            let z0 = rng.uniform(-1.0, 1.0);
            let z = DVector::from_fn(kk, |_, _| rng.uniform(-1.0, 1.0));
            let adj = shor.adjoint_scaled(z0, &z);
            let mut direct = DMatrix::zeros(q + 1, q + 1);
            direct[(q, q)] = z0;
            for k in 0..kk {
                let (i, j) = shor.pair(k);
                direct += shor.materialize_pair(i, j) * (z[k] / shor.norms[k]);
            }
            assert!((&adj - &direct).amax() <= 1e-10 * direct.amax().max(1.0));
            // ⟨B(Ŷ), z⟩ = ⟨Ŷ, B*(z)⟩ with the normalization row included.
            let vals = shor.apply_scaled(&yhat);
            let mut zfull = DVector::zeros(kk + 1);
            zfull[0] = z0;
            for k in 0..kk {
                zfull[k + 1] = z[k];
            }
            let lhs = vals.dot(&zfull);
            let rhs = (adj.transpose() * &yhat).trace();
            assert!(
                (lhs - rhs).abs() <= 1e-9 * lhs.abs().max(1.0),
                "adjointness: {lhs} vs {rhs}"
            );
        }
    }

    #[test]
    fn rank_one_lifts_satisfy_pairs() {
        // Lifting any feasible y gives ⟨W, Ŷ⟩ ≤ 0 for all pairs: the pair
        // table is sound exactly when this holds.
        let mut rng = SplitMix64::new(0x50fa);
        let mut checked = 0;
        for _ in 0..1000 {
            let q = 1 + rng.uniform_int(0, 3) as usize;
            let mm = 1 + rng.uniform_int(0, 2) as usize;
            let f = DMatrix::from_fn(q, mm, |_, _| rng.uniform(-2.0, 2.0));
            let y = DVector::from_fn(q, |_, _| rng.uniform(0.0, 2.0));
            // Make y strictly feasible by padding the rhs.
            let slack = DVector::from_fn(mm, |_, _| rng.uniform(0.0, 1.0));
            let w = f.transpose() * &y + slack;
            let shor = ShorProblem::new(
                &DMatrix::zeros(q, q),
                &DVector::zeros(q),
                0.0,
                &f,
                &w,
            )
            .unwrap();
            let mut lifted = DVector::zeros(q + 1);
            lifted.view_mut((0, 0), (q, 1)).copy_from(&y);
            lifted[q] = 1.0;
            let yhat = &lifted * lifted.transpose();
            let raw = shor.apply_raw(&yhat);
            let scale = yhat.amax().max(1.0) * w.amax().max(1.0);
            for k in 0..shor.n_pairs() {
                assert!(
                    raw[k] <= 1e-9 * scale,
                    "pair {:?} violated: {} (scale {scale})",
                    shor.pair(k),
                    raw[k]
                );
            }
            checked += 1;
        }
        assert_eq!(checked, 1000);
    }

    #[test]
    fn one_dim_toy_solves_to_one() {
        // max y² over y ∈ [0, 1]: the lifted problem attains exactly 1.
        let shor = unit_interval_shor(1.0, 0.0, 0.0);
        let sol = solve_dnn(&shor, &SdpParams::default()).unwrap();
        assert!(sol.converged, "ε = {}", sol.epsilon);
        assert!(
            (sol.nu - 1.0).abs() <= 5e-5,
            "relaxation value {} should be 1",
            sol.nu
        );
        assert!(sol.lambda.iter().all(|&l| l <= 0.0));
        assert!((sol.y_hat[(1, 1)] - 1.0).abs() < 1e-12);
        // Trace bound from the region: t* = 1 here.
        assert!(sol.y_hat.trace() <= 1.0 + 1.0 + 1e-4);
        let certified = certify_upper_bound(&sol, 1.0);
        assert!(certified >= 1.0 - 1e-9);
        assert!(certified <= 1.0 + 1e-3);
    }

    /// Random small reduced programs with a convex objective: the certified
    /// relaxation bound must dominate exhaustive vertex enumeration.
    fn random_bounded_region(
        rng: &mut SplitMix64,
        q: usize,
        mm: usize,
    ) -> Option<(DMatrix<f64>, DVector<f64>)> {
        let f = DMatrix::from_fn(q, mm, |_, _| rng.uniform(-1.0, 2.0));
        let w = DVector::from_fn(mm, |_, _| rng.uniform(0.5, 2.0));
        let mut ws = LpWorkspace::new();
        match lp::compute_tstar(&mut ws, &f, &w) {
            Ok(_) => Some((f, w)),
            Err(_) => None,
        }
    }

    #[test]
    fn certified_bound_dominates_enumeration() {
        let mut rng = SplitMix64::new(0xd0d0);
        let mut ws = LpWorkspace::new();
        let mut done = 0;
        while done < 25 {
            let q = 2;
            let mm = 1 + rng.uniform_int(0, 1) as usize;
            let Some((f, w)) = random_bounded_region(&mut rng, q, mm) else {
                continue;
            };
            let mmat = DMatrix::from_fn(q, q, |_, _| rng.uniform(-1.0, 1.0));
            let qmat = &mmat * mmat.transpose();
            let d = DVector::from_fn(q, |_, _| rng.uniform(-1.0, 1.0));
            let v = rng.uniform(-1.0, 1.0);
            let shor = ShorProblem::new(&qmat, &d, v, &f, &w).unwrap();
            let sol = solve_dnn(&shor, &SdpParams::default()).unwrap();
            let tstar = lp::compute_tstar(&mut ws, &f, &w).unwrap();
            let certified = certify_upper_bound(&sol, tstar);
            let verts = enumerate_region_vertices(&f, &w);
            assert!(!verts.is_empty());
            let best = verts
                .iter()
                .map(|y| (y.transpose() * &qmat * y)[(0, 0)] + 2.0 * d.dot(y) + v)
                .fold(f64::NEG_INFINITY, f64::max);
            assert!(
                certified >= best - 1e-6 * best.abs().max(1.0),
                "certified {certified} below exact {best}"
            );
            done += 1;
        }
    }

    #[test]
    fn certificate_valid_without_convergence() {
        // Starve the solver: the bound must stay valid with the honest ε.
        let mut rng = SplitMix64::new(0xcafe_0001);
        let mut ws = LpWorkspace::new();
        let params = SdpParams {
            max_iters: 300,
            ..SdpParams::default()
        };
        let mut done = 0;
        while done < 10 {
            let Some((f, w)) = random_bounded_region(&mut rng, 2, 2) else {
                continue;
            };
            let mmat = DMatrix::from_fn(2, 2, |_, _| rng.uniform(-1.0, 1.0));
            let qmat = &mmat * mmat.transpose();
            let d = DVector::from_fn(2, |_, _| rng.uniform(-1.0, 1.0));
            let shor = ShorProblem::new(&qmat, &d, 0.0, &f, &w).unwrap();
            let sol = solve_dnn(&shor, &params).unwrap();
            let tstar = lp::compute_tstar(&mut ws, &f, &w).unwrap();
            let certified = certify_upper_bound(&sol, tstar);
            let best = enumerate_region_vertices(&f, &w)
                .iter()
                .map(|y| (y.transpose() * &qmat * y)[(0, 0)] + 2.0 * d.dot(y))
                .fold(f64::NEG_INFINITY, f64::max);
            assert!(
                certified >= best - 1e-9 * best.abs().max(1.0),
                "starved certificate {certified} below exact {best} (ε = {})",
                sol.epsilon
            );
            done += 1;
        }
    }

    #[test]
    fn strip_bound_empty_and_exact() {
        let mut ws = LpWorkspace::new();
        let qmat = DMatrix::from_row_slice(1, 1, &[1.0]);
        let d = DVector::zeros(1);
        let f = DMatrix::from_row_slice(1, 1, &[1.0]);
        let w = DVector::from_vec(vec![1.0]);
        // θ = 3, τ = 2 over y ∈ [0,1]: needs 3y ≤ 1 and 2y ≥ 1 — empty.
        let empty = dnn_bound_region(
            &mut ws,
            &qmat,
            &d,
            0.0,
            &f,
            &w,
            &DVector::from_vec(vec![3.0]),
            &DVector::from_vec(vec![2.0]),
            &SdpParams::default(),
        )
        .unwrap();
        assert!(!empty.feasible);
        assert_eq!(empty.bound, f64::NEG_INFINITY);
        // θ = 1.5, τ = 2: strip y ∈ [1/2, 2/3], max y² = 4/9 and the
        // interval relaxation is tight there.
        let strip = dnn_bound_region(
            &mut ws,
            &qmat,
            &d,
            0.0,
            &f,
            &w,
            &DVector::from_vec(vec![1.5]),
            &DVector::from_vec(vec![2.0]),
            &SdpParams::default(),
        )
        .unwrap();
        assert!(strip.feasible);
        let target = 4.0 / 9.0;
        assert!(
            strip.bound >= target - 1e-9,
            "strip bound {} below exact {target}",
            strip.bound
        );
        assert!(
            strip.bound <= target + 1e-3,
            "strip bound {} too loose (exact {target})",
            strip.bound
        );
    }

    #[test]
    fn moment_lift_frozen_example_and_properties() {
        // Unit interval, rank-one moments of y = 1.
        let f = DMatrix::from_row_slice(1, 1, &[1.0]);
        let w = DVector::from_vec(vec![1.0]);
        let y = DVector::from_vec(vec![1.0]);
        let ymat = DMatrix::from_row_slice(1, 1, &[1.0]);
        let x = lemma1_lift(&f, &w, &y, &ymat);
        let expect =
            DMatrix::from_row_slice(3, 3, &[1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 1.0]);
        assert!((&x - &expect).amax() < 1e-12);

        // A converged relaxation iterate lifts to a valid full-space moment
        // matrix: nonnegative, PSD, consistent with the region rows.
        let shor = unit_interval_shor(1.0, 0.0, 0.0);
        let sol = solve_dnn(&shor, &SdpParams::default()).unwrap();
        let yvec = DVector::from_vec(vec![sol.y_hat[(0, 1)]]);
        let ymat = DMatrix::from_row_slice(1, 1, &[sol.y_hat[(0, 0)]]);
        let x = lemma1_lift(&f, &w, &yvec, &ymat);
        let scale = x.amax().max(1.0);
        assert!(x.min() >= -1e-7 * scale);
        let eig = numlin::eig_sym(&x).unwrap();
        assert!(eig.lambda_min() >= -1e-7 * scale);
        assert!((x[(2, 2)] - 1.0).abs() < 1e-12);
        // Region rows: [fᵀ, I, 0]·(last column) = w and the diagonal of the
        // congruence equals w∘w.
        let mut rowmap = DMatrix::zeros(1, 3);
        rowmap[(0, 0)] = f[(0, 0)];
        rowmap[(0, 1)] = 1.0;
        let last = x.column(2).into_owned();
        let lhs = &rowmap * &last;
        assert!((lhs[0] - w[0]).abs() <= 1e-7 * scale);
        let quad = &rowmap * &x * rowmap.transpose();
        assert!((quad[(0, 0)] - w[0] * w[0]).abs() <= 1e-7 * scale);
    }

    #[test]
    fn skewed_objective_with_linear_term() {
        // max y² − y/4 over [0,1]: vertex max at y = 1 gives 3/4; the
        // relaxation is exact on intervals.
        let shor = unit_interval_shor(1.0, -0.125, 0.0);
        let sol = solve_dnn(&shor, &SdpParams::default()).unwrap();
        assert!(sol.converged);
        assert!((sol.nu - 0.75).abs() <= 1e-4, "nu = {}", sol.nu);
    }
}
