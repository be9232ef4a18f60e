//! Valid cuts at a KKT vertex and their deepening.
//!
//! Working in the vertex's reduced coordinates with `d ≤ 0 ≤ target − v`,
//! every cut here certifies the same statement: the region sliced off,
//! `R ∩ {θᵀy ≤ 1}`, contains no point with `φ` above `target`. Keeping only
//! `θᵀy ≥ 1` therefore loses no candidate better than `target`.
//!
//! Three generators of increasing depth (smaller `θ` excludes more):
//! * [`tuy_cut`] — per-coordinate intercepts of `φ` with the level `target`
//!   along the edges out of the vertex; valid by convexity of `φ`.
//! * [`konno_cut`] — deepens each intercept to the largest `λ_i` with
//!   `g(λ_i e_i) ≤ target`, where `g` maximizes a linearization over the
//!   region beyond the intercept cut; solved by an LP whose answer is always
//!   re-verified against `g` directly, with a bisection fallback so an LP
//!   hiccup can only yield a shallower (still valid) cut.
//! * [`dnn_cut`] — proposes yet deeper candidates and accepts one only when
//!   a certified bound (multiplier LP or semidefinite relaxation) proves the
//!   newly excluded strip stays at or below `target`. The strip argument
//!   needs no bound on `R ∩ {τᵀy ≤ 1}`: that part is already covered by the
//!   intercept cut's certificate.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::dnn::{self, DnnError, RegionBound, SdpParams};
use crate::lp::{LpError, LpProblem, LpStatus, LpWorkspace, Sense};
use crate::model::ReducedProgram;

/// Cap on intercept coefficients when the level sits exactly at the vertex
/// value along a flat direction; a huge `τ_i` is a shallower, still-valid
/// cut.
pub const TAU_CAP: f64 = 1e10;
/// Relative tolerance for re-verifying the deepened coefficients against
/// the true `g`.
pub const G_VERIFY_TOL: f64 = 1e-6;
/// Bisection iterations when the LP's deepening answer fails verification.
const BISECT_STEPS: usize = 100;
/// Largest deepening multiplier before a direction counts as unbounded
/// (its cut coefficient becomes 0: the direction needs no cut).
const LAMBDA_CAP: f64 = 1e12;

#[derive(Debug, Error)]
pub enum CutError {
    #[error("cut target {target} lies below the vertex value {v}")]
    TargetBelowVertex { target: f64, v: f64 },
    #[error("region subproblem was unbounded")]
    UnboundedSubproblem,
    #[error(transparent)]
    Lp(#[from] LpError),
    #[error(transparent)]
    Dnn(#[from] DnnError),
}

/// Intercept cut: `τ_i` is the reciprocal of the step along edge `i` at
/// which `φ` reaches `target`. Directions where `φ` never reaches the level
/// (`Q_ii ≤ 0`, as `d ≤ 0`) get `τ_i = 0` and stay unconstrained.
pub fn tuy_cut(red: &ReducedProgram, target: f64) -> Result<DVector<f64>, CutError> {
    let gap = target - red.v;
    if gap < -1e-9 * target.abs().max(1.0) {
        return Err(CutError::TargetBelowVertex {
            target,
            v: red.v,
        });
    }
    let gap = gap.max(0.0);
    let mut tau = DVector::zeros(red.q);
    for i in 0..red.q {
        let qii = red.qmat[(i, i)];
        if qii <= 0.0 {
            continue; // φ stays at or below v along this edge
        }
        let di = red.d[i];
        let denom = -di + (di * di + qii * gap).sqrt();
        tau[i] = if denom > 0.0 {
            (qii / denom).min(TAU_CAP)
        } else {
            TAU_CAP
        };
    }
    Ok(tau)
}

/// The region beyond an established cut: `{y : Fᵀy ≤ w, τᵀy ≥ 1, y ≥ 0}`.
fn region_beyond(red: &ReducedProgram, tau: &DVector<f64>) -> (DMatrix<f64>, DVector<f64>) {
    let q = red.q;
    let mm = red.f.ncols();
    let mut f = DMatrix::zeros(q, mm + 1);
    f.view_mut((0, 0), (q, mm)).copy_from(&red.f);
    for a in 0..q {
        f[(a, mm)] = -tau[a];
    }
    let mut w = DVector::zeros(mm + 1);
    w.view_mut((0, 0), (mm, 1)).copy_from(&red.w);
    w[mm] = -1.0;
    (f, w)
}

/// The deepening functional: `g(λ) = max{(Qλ + d)ᵀy : y ∈ R_τ} + dᵀλ + v`,
/// a convex function of `λ`. Returns `−∞` when the region beyond the cut is
/// empty.
pub fn g_value(
    ws: &mut LpWorkspace,
    red: &ReducedProgram,
    tau: &DVector<f64>,
    lambda: &DVector<f64>,
) -> Result<f64, CutError> {
    let (f, w) = region_beyond(red, tau);
    let c = &red.qmat * lambda + &red.d;
    let p = LpProblem::inequality_form(Sense::Max, c, f.transpose(), w);
    let sol = ws.solve(&p)?;
    match sol.status {
        LpStatus::Optimal => Ok(sol.objective + red.d.dot(lambda) + red.v),
        LpStatus::Infeasible => Ok(f64::NEG_INFINITY),
        LpStatus::Unbounded => Err(CutError::UnboundedSubproblem),
    }
}

/// Largest `λ` with `g(λ e_i) ≤ target` by bisection on the convex `g`,
/// used when the direct LP answer fails verification. Starts from `λ = 0`,
/// where `g(0) = max dᵀy + v ≤ v ≤ target` holds because `d ≤ 0`. `None`
/// means the direction tolerates unlimited deepening.
fn deepen_by_bisection(
    ws: &mut LpWorkspace,
    red: &ReducedProgram,
    tau: &DVector<f64>,
    target: f64,
    i: usize,
) -> Result<Option<f64>, CutError> {
    let unit = |lam: f64| {
        let mut e = DVector::zeros(red.q);
        e[i] = lam;
        e
    };
    let mut lo = 0.0;
    let mut hi = (1.0 / tau[i]).max(1e-9);
    while g_value(ws, red, tau, &unit(hi))? < target {
        lo = hi;
        hi *= 2.0;
        if hi >= LAMBDA_CAP {
            return Ok(None);
        }
    }
    for _ in 0..BISECT_STEPS {
        let mid = 0.5 * (lo + hi);
        if g_value(ws, red, tau, &unit(mid))? <= target {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-12 * hi.abs().max(1.0) {
            break;
        }
    }
    Ok(Some(lo))
}

/// Deepened cut: `θ_i = 1/λ_i` where `λ_i` solves the per-coordinate LP
/// `min −dᵀz + (target − v)z₀` over `{fᵀz ≤ w z₀, τᵀz ≥ z₀, Q_iᵀz + d_i z₀ = 1,
/// z ≥ 0, z₀ ≥ 0}`. Every `λ_i` is re-verified against `g` directly; any
/// mismatch falls back to bisection, so the returned cut never relies on the
/// LP being right. Coordinates with `τ_i = 0` stay uncut. The cut is valid
/// on its own certificate (typically, not provably, deeper than the
/// intercepts): the part of `Δ(θ)` before the intercept cut is covered by
/// that cut's argument, and the part beyond decomposes as
/// `y = Σ (θ_i y_i)·(λ_i e_i)` with each `λ_i e_i` at level `g ≤ target`.
pub fn konno_cut(
    ws: &mut LpWorkspace,
    red: &ReducedProgram,
    tau: &DVector<f64>,
    target: f64,
) -> Result<DVector<f64>, CutError> {
    let q = red.q;
    let mm = red.f.ncols();
    let mut theta = DVector::zeros(q);
    let verify_tol = G_VERIFY_TOL * target.abs().max(1.0);
    for i in 0..q {
        if tau[i] <= 0.0 {
            continue;
        }
        // Variables (z, z₀) ≥ 0.
        let mut c = DVector::zeros(q + 1);
        for a in 0..q {
            c[a] = -red.d[a];
        }
        c[q] = target - red.v;
        // fᵀz − w z₀ ≤ 0 (mm rows); −τᵀz + z₀ ≤ 0 (1 row).
        let mut a_ub = DMatrix::zeros(mm + 1, q + 1);
        for r in 0..mm {
            for a in 0..q {
                a_ub[(r, a)] = red.f[(a, r)];
            }
            a_ub[(r, q)] = -red.w[r];
        }
        for a in 0..q {
            a_ub[(mm, a)] = -tau[a];
        }
        a_ub[(mm, q)] = 1.0;
        let b_ub = DVector::zeros(mm + 1);
        // Q_iᵀ z + d_i z₀ = 1.
        let mut a_eq = DMatrix::zeros(1, q + 1);
        for a in 0..q {
            a_eq[(0, a)] = red.qmat[(a, i)];
        }
        a_eq[(0, q)] = red.d[i];
        let b_eq = DVector::from_vec(vec![1.0]);
        let p = LpProblem {
            sense: Sense::Min,
            c,
            a_eq,
            b_eq,
            a_ub,
            b_ub,
            lower: vec![crate::lp::LowerBound::Zero; q + 1],
        };
        let lp_lambda = match ws.solve(&p) {
            Ok(sol) if sol.status == LpStatus::Optimal => Some(sol.objective),
            _ => None,
        };
        let verified = match lp_lambda {
            Some(lam) if lam > 1e-12 => {
                let mut e = DVector::zeros(q);
                e[i] = lam;
                let g = g_value(ws, red, tau, &e)?;
                if g.is_finite() && (g - target).abs() <= verify_tol {
                    Some(lam)
                } else {
                    None
                }
            }
            _ => None,
        };
        let lam = match verified {
            Some(lam) => Some(lam),
            None => deepen_by_bisection(ws, red, tau, target, i)?,
        };
        theta[i] = match lam {
            Some(lam) if lam > 1.0 / TAU_CAP => 1.0 / lam,
            Some(_) => TAU_CAP, // barely-excluding coordinate, still valid
            None => 0.0,        // no binding along this direction
        };
    }
    Ok(theta)
}

/// Candidate lower-bound witnesses from the region beyond the cut: for each
/// cut coordinate, maximize the linearization `(τ_i⁻¹ Q_i + d)ᵀy` over
/// `R_τ` and evaluate `φ` at the optimizing vertex. Every returned `y` lies
/// in the current region, so its assembled point is feasible and its value
/// is a valid global lower bound.
pub fn improve_lower_bound(
    ws: &mut LpWorkspace,
    red: &ReducedProgram,
    tau: &DVector<f64>,
) -> Result<Vec<(f64, DVector<f64>)>, CutError> {
    let (f, w) = region_beyond(red, tau);
    let mut out = Vec::new();
    for i in 0..red.q {
        if tau[i] <= 0.0 {
            continue;
        }
        let c = red.qmat.column(i) / tau[i] + &red.d;
        let p = LpProblem::inequality_form(Sense::Max, c, f.transpose(), w.clone());
        let sol = ws.solve(&p)?;
        if sol.status == LpStatus::Optimal {
            out.push((red.phi(&sol.x), sol.x));
        }
    }
    Ok(out)
}

/// Multiplier-LP upper bound for `φ` over the strip
/// `{y ∈ R : θᵀy ≤ 1, τᵀy ≥ 1}`: nonnegative multipliers pair the strip's
/// affine inequalities into quadratic and linear majorants of `φ`, and the
/// LP minimizes the resulting constant bound. Returns `+∞` when no
/// certificate exists at this level and `−∞` when the bound improves without
/// limit (an empty strip). `early_stop` ends the minimization as soon as the
/// bound is at or below the threshold — any feasible multiplier set already
/// certifies its own value.
pub fn phi_l(
    ws: &mut LpWorkspace,
    red: &ReducedProgram,
    tau: &DVector<f64>,
    theta: &DVector<f64>,
    early_stop: Option<f64>,
) -> Result<f64, CutError> {
    let q = red.q;
    let mm = red.f.ncols();
    // Guard exact zeros in θ so the pairing terms keep full support; the
    // perturbation is far inside every acceptance tolerance.
    let theta_max = theta.amax();
    let theta = DVector::from_fn(q, |i, _| {
        if theta[i] == 0.0 && theta_max > 0.0 {
            1e-12 * theta_max
        } else {
            theta[i]
        }
    });
    // Variable layout, all nonnegative:
    //   Λ0 (q) pairs y_i with (τᵀy − 1) ≥ 0
    //   Λ  (q×mm, row-major) pairs y_i with (w_r − f_rᵀy) ≥ 0
    //   Λ1 (q) pairs y_i with (1 − θᵀy) ≥ 0
    //   α0 (1) multiplies (τᵀy − 1);  α (mm) multiplies (w − fᵀy);
    //   β (1) multiplies (1 − θᵀy)
    let nv = q * (mm + 2) + mm + 2;
    let il0 = 0;
    let il = il0 + q;
    let il1 = il + q * mm;
    let ia0 = il1 + q;
    let ia = ia0 + 1;
    let ib = ia + mm;

    let rows_mat = q * (q + 1) / 2;
    let rows = rows_mat + q;
    let mut a_ub = DMatrix::zeros(rows, nv);
    let mut b_ub = DVector::zeros(rows);
    // Entrywise matrix majorization, upper triangle: for i ≤ j,
    //   [Λ0τᵀ + τΛ0ᵀ − (Λfᵀ + fΛᵀ) − (Λ1θᵀ + θΛ1ᵀ)]_{ij} ≤ −Q_{ij}.
    let mut row = 0;
    for i in 0..q {
        for j in i..q {
            a_ub[(row, il0 + i)] += tau[j];
            a_ub[(row, il0 + j)] += tau[i];
            for r in 0..mm {
                a_ub[(row, il + i * mm + r)] -= red.f[(j, r)];
                a_ub[(row, il + j * mm + r)] -= red.f[(i, r)];
            }
            a_ub[(row, il1 + i)] -= theta[j];
            a_ub[(row, il1 + j)] -= theta[i];
            b_ub[row] = -red.qmat[(i, j)];
            row += 1;
        }
    }
    // Linear majorization, one row per coordinate:
    //   −2Λ0_i + 2(Λw)_i + 2Λ1_i + α0τ_i − (fα)_i − βθ_i ≤ −2d_i.
    for i in 0..q {
        a_ub[(row, il0 + i)] -= 2.0;
        for r in 0..mm {
            a_ub[(row, il + i * mm + r)] += 2.0 * red.w[r];
        }
        a_ub[(row, il1 + i)] += 2.0;
        a_ub[(row, ia0)] += tau[i];
        for r in 0..mm {
            a_ub[(row, ia + r)] -= red.f[(i, r)];
        }
        a_ub[(row, ib)] -= theta[i];
        b_ub[row] = -2.0 * red.d[i];
        row += 1;
    }
    // Objective: min −α0 + αᵀw + β (+ v reported outside the LP).
    let mut c = DVector::zeros(nv);
    c[ia0] = -1.0;
    for r in 0..mm {
        c[ia + r] = red.w[r];
    }
    c[ib] = 1.0;
    let p = LpProblem::inequality_form(Sense::Min, c, a_ub, b_ub);
    let sol = ws.solve_with_stop(&p, early_stop.map(|s| s - red.v))?;
    match sol.status {
        LpStatus::Optimal => Ok(sol.objective + red.v),
        LpStatus::Unbounded => Ok(f64::NEG_INFINITY),
        LpStatus::Infeasible => Ok(f64::INFINITY),
    }
}

/// How a deepened cut candidate was certified.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CutCertificate {
    /// Multiplier LP proved the strip stays at or below the target.
    MultiplierLp,
    /// Semidefinite relaxation proved it (or the strip was empty).
    Relaxation,
    /// No candidate certified; the verified deepened cut is used as-is.
    Fallback,
}

#[derive(Debug, Clone)]
pub struct DnnCutParams {
    /// Deepening factor applied to the verified cut (`< 1` cuts deeper).
    pub eta: f64,
    /// Back-off rounds toward the verified cut when a candidate fails.
    pub bisection_rounds: usize,
    /// Relaxation solve parameters for the strip bounds.
    pub sdp: SdpParams,
    /// Largest reduced dimension at which the multiplier LP is attempted.
    /// Its tableau has `q(q+1)/2 + q` rows and `q(mm+2) + mm + 2` columns,
    /// so past a few dozen dimensions a dense solve dwarfs the relaxation;
    /// beyond the cap candidates are certified by the relaxation alone.
    pub multiplier_lp_max_dim: usize,
}

impl Default for DnnCutParams {
    fn default() -> Self {
        DnnCutParams {
            eta: 0.9,
            bisection_rounds: 5,
            sdp: SdpParams::default(),
            multiplier_lp_max_dim: 40,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DnnCutOutcome {
    /// The accepted cut (defaults to the verified deepened cut).
    pub theta: DVector<f64>,
    pub certificate: CutCertificate,
    /// Multiplier-LP value at the accepted candidate, when one was computed.
    pub phi_l_value: Option<f64>,
    /// Relaxation strip bound at the accepted candidate, when one ran.
    pub region: Option<RegionBound>,
    /// Candidates tried before acceptance.
    pub rounds: usize,
    /// Relaxation solves spent across all candidates.
    pub sdp_solves: usize,
}

/// Propose a deeper cut `η·θ` and accept it only under a certificate that
/// the extra strip excluded beyond `θ` keeps `φ ≤ target`; failed candidates
/// back off halfway toward `θ` and the verified `θ` itself is the final
/// fallback. This function never fails: certificate machinery errors only
/// downgrade the outcome.
pub fn dnn_cut(
    ws: &mut LpWorkspace,
    red: &ReducedProgram,
    tau: &DVector<f64>,
    theta_k: &DVector<f64>,
    target: f64,
    params: &DnnCutParams,
) -> DnnCutOutcome {
    let mut candidate = theta_k * params.eta;
    let mut sdp_solves = 0;
    let try_multiplier = red.d.len() <= params.multiplier_lp_max_dim;
    for round in 0..=params.bisection_rounds {
        let lp_bound = if try_multiplier {
            phi_l(ws, red, tau, &candidate, Some(target)).ok()
        } else {
            None
        };
        match lp_bound {
            Some(bound) if bound <= target => {
                return DnnCutOutcome {
                    theta: candidate,
                    certificate: CutCertificate::MultiplierLp,
                    phi_l_value: Some(bound),
                    region: None,
                    rounds: round + 1,
                    sdp_solves,
                };
            }
            _ => {
                sdp_solves += 1;
                match dnn::dnn_bound_region(
                    ws,
                    &red.qmat,
                    &red.d,
                    red.v,
                    &red.f,
                    &red.w,
                    &candidate,
                    tau,
                    &params.sdp,
                ) {
                    Ok(region) if region.bound <= target => {
                        return DnnCutOutcome {
                            theta: candidate,
                            certificate: CutCertificate::Relaxation,
                            phi_l_value: lp_bound,
                            region: Some(region),
                            rounds: round + 1,
                            sdp_solves,
                        };
                    }
                    Ok(_) | Err(_) => {}
                }
            }
        }
        // Back off halfway toward the verified cut.
        candidate = (&candidate + theta_k) * 0.5;
    }
    DnnCutOutcome {
        theta: theta_k.clone(),
        certificate: CutCertificate::Fallback,
        phi_l_value: None,
        region: None,
        rounds: params.bisection_rounds + 1,
        sdp_solves,
    }
}

/// Relative improvement of a deeper bound over a reference bound
/// (both bounding the same quantity from above; positive when `improved`
/// is tighter).
pub fn relative_improvement(reference: f64, improved: f64) -> f64 {
    (reference - improved) / reference.abs().max(1e-12)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::SplitMix64;
    use crate::lp::enumerate_region_vertices;

    /// Unit-interval reduction: max `q y² + 2 d y + v` over `y ∈ [0, 1]`.
    fn interval_red(qval: f64, dval: f64, v: f64) -> ReducedProgram {
        ReducedProgram {
            q: 1,
            f: DMatrix::from_row_slice(1, 1, &[1.0]),
            w: DVector::from_vec(vec![1.0]),
            qmat: DMatrix::from_row_slice(1, 1, &[qval]),
            d: DVector::from_vec(vec![dval]),
            v,
            basis: vec![1],
            nonbasic: vec![0],
        }
    }

    #[test]
    fn tuy_intercepts_match_hand_values() {
        // q = 1, d = 0, v = 0, target 4: φ(y) = y² = 4 at y = 2, τ = 1/2.
        let red = interval_red(1.0, 0.0, 0.0);
        let tau = tuy_cut(&red, 4.0).unwrap();
        assert!((tau[0] - 0.5).abs() < 1e-12);
        // d = −1, target 3: y² − 2y = 3 at y = 3, τ = 1/3.
        let red = interval_red(1.0, -1.0, 0.0);
        let tau = tuy_cut(&red, 3.0).unwrap();
        assert!((tau[0] - 1.0 / 3.0).abs() < 1e-12);
        // Concave direction: no intercept.
        let red = interval_red(-1.0, -1.0, 0.0);
        let tau = tuy_cut(&red, 1.0).unwrap();
        assert_eq!(tau[0], 0.0);
        // Level at the vertex value along a flat curved edge: capped.
        let red = interval_red(1.0, 0.0, 0.0);
        let tau = tuy_cut(&red, 0.0).unwrap();
        assert_eq!(tau[0], TAU_CAP);
    }

    #[test]
    fn g_is_the_linearized_maximum() {
        // Region beyond τ = 2 on [0, 1] is [1/2, 1];
        // g(λ) = max λy over it + 0 = λ (then +0 +0).
        let red = interval_red(1.0, 0.0, 0.0);
        let tau = DVector::from_vec(vec![2.0]);
        let lam = DVector::from_vec(vec![0.25]);
        let g = g_value(&mut LpWorkspace::new(), &red, &tau, &lam).unwrap();
        assert!((g - 0.25).abs() < 1e-9);
        // Empty region beyond the cut.
        let tau_far = DVector::from_vec(vec![0.5]);
        let g = g_value(&mut LpWorkspace::new(), &red, &tau_far, &lam).unwrap();
        assert_eq!(g, f64::NEG_INFINITY);
    }

    #[test]
    fn konno_depths_match_hand_values() {
        let mut ws = LpWorkspace::new();
        let tau = DVector::from_vec(vec![2.0]);
        // Q = 1, d = 0, target 1/4: λ = 1/4, θ = 4.
        let red = interval_red(1.0, 0.0, 0.0);
        let theta = konno_cut(&mut ws, &red, &tau, 0.25).unwrap();
        assert!((theta[0] - 4.0).abs() < 1e-6, "θ = {}", theta[0]);
        // Q = 4: g(λ) = 4λ, λ = 1/16, θ = 16.
        let red = interval_red(4.0, 0.0, 0.0);
        let theta = konno_cut(&mut ws, &red, &tau, 0.25).unwrap();
        assert!((theta[0] - 16.0).abs() < 1e-5, "θ = {}", theta[0]);
        // Q = 1, d = −1/8, target 1/4: λ = 3/7, θ = 7/3.
        let red = interval_red(1.0, -0.125, 0.0);
        let theta = konno_cut(&mut ws, &red, &tau, 0.25).unwrap();
        assert!((theta[0] - 7.0 / 3.0).abs() < 1e-6, "θ = {}", theta[0]);
    }

    #[test]
    fn konno_coordinates_are_always_verified() {
        // Random reductions: every returned coordinate satisfies the level
        // check g(θ_i⁻¹e_i) ≤ target that its validity argument rests on.
        // (θ may be shallower than τ in individual coordinates — the two
        // cuts certify through different arguments.)
        let mut rng = SplitMix64::new(0xc0ffee);
        let mut ws = LpWorkspace::new();
        let mut done = 0;
        while done < 40 {
            let q = 1 + rng.uniform_int(0, 2) as usize;
            let mm = 1 + rng.uniform_int(0, 1) as usize;
            let f = DMatrix::from_fn(q, mm, |_, _| rng.uniform(0.2, 2.0));
            let w = DVector::from_fn(mm, |_, _| rng.uniform(0.5, 2.0));
            let mmat = DMatrix::from_fn(q, q, |_, _| rng.uniform(-1.0, 1.0));
            let qmat = &mmat * mmat.transpose();
            let d = DVector::from_fn(q, |_, _| rng.uniform(-1.0, 0.0));
            let red = ReducedProgram {
                q,
                f,
                w,
                qmat,
                d,
                v: 0.0,
                basis: vec![],
                nonbasic: vec![],
            };
            let target = rng.uniform(0.1, 2.0);
            let tau = tuy_cut(&red, target).unwrap();
            if tau.amax() == 0.0 || tau.amax() >= TAU_CAP {
                continue;
            }
            let theta = konno_cut(&mut ws, &red, &tau, target).unwrap();
            for i in 0..q {
                assert!(theta[i] >= 0.0);
                if theta[i] > 0.0 && theta[i] < TAU_CAP {
                    let mut e = DVector::zeros(q);
                    e[i] = 1.0 / theta[i];
                    let g = g_value(&mut ws, &red, &tau, &e).unwrap();
                    assert!(
                        g <= target + 1e-5 * target.abs().max(1.0),
                        "coordinate {i}: g = {g} above target {target}"
                    );
                }
            }
            done += 1;
        }
    }

    #[test]
    fn excluded_region_stays_below_target() {
        // The decisive soundness property: enumerate the region excluded by
        // each cut and check φ never exceeds the target there.
        let mut rng = SplitMix64::new(0x5afe);
        let mut ws = LpWorkspace::new();
        let mut done = 0;
        while done < 50 {
            let q = 1 + rng.uniform_int(0, 1) as usize;
            let mm = 1 + rng.uniform_int(0, 1) as usize;
            let f = DMatrix::from_fn(q, mm, |_, _| rng.uniform(0.2, 2.0));
            let w = DVector::from_fn(mm, |_, _| rng.uniform(0.5, 2.0));
            let mmat = DMatrix::from_fn(q, q, |_, _| rng.uniform(-1.0, 1.0));
            let qmat = &mmat * mmat.transpose();
            let d = DVector::from_fn(q, |_, _| rng.uniform(-1.0, 0.0));
            let red = ReducedProgram {
                q,
                f,
                w,
                qmat,
                d,
                v: rng.uniform(-0.5, 0.5),
                basis: vec![],
                nonbasic: vec![],
            };
            let target = red.v + rng.uniform(0.05, 1.0);
            let tau = tuy_cut(&red, target).unwrap();
            if tau.amax() == 0.0 || tau.amax() >= TAU_CAP {
                continue;
            }
            let theta = konno_cut(&mut ws, &red, &tau, target).unwrap();
            let outcome = dnn_cut(
                &mut ws,
                &red,
                &tau,
                &theta,
                target,
                &DnnCutParams::default(),
            );
            let scale = target.abs().max(1.0);
            for cut in [&tau, &theta, &outcome.theta] {
                if cut.amax() == 0.0 {
                    continue;
                }
                // Excluded region: R ∩ {cutᵀy ≤ 1}.
                let mut f_ex = DMatrix::zeros(q, mm + 1);
                f_ex.view_mut((0, 0), (q, mm)).copy_from(&red.f);
                for a in 0..q {
                    f_ex[(a, mm)] = cut[a];
                }
                let mut w_ex = DVector::zeros(mm + 1);
                w_ex.view_mut((0, 0), (mm, 1)).copy_from(&red.w);
                w_ex[mm] = 1.0;
                for vtx in enumerate_region_vertices(&f_ex, &w_ex) {
                    let val = red.phi(&vtx);
                    assert!(
                        val <= target + 1e-7 * scale,
                        "φ = {val} above target {target} inside an excluded region"
                    );
                }
            }
            done += 1;
        }
    }

    #[test]
    fn lower_bound_witnesses_are_feasible_and_tight_on_interval() {
        // τ = 2 on [0, 1] with φ = y²: the linearization from the cut
        // maximizes at y = 1 and recovers the global optimum.
        let red = interval_red(1.0, 0.0, 0.0);
        let tau = DVector::from_vec(vec![2.0]);
        let mut ws = LpWorkspace::new();
        let cands = improve_lower_bound(&mut ws, &red, &tau).unwrap();
        assert_eq!(cands.len(), 1);
        let (phi, y) = &cands[0];
        assert!((phi - 1.0).abs() < 1e-9);
        assert!((y[0] - 1.0).abs() < 1e-9);
    }

    #[test]
    fn multiplier_bound_is_exact_on_the_interval_strip() {
        // Strip [1/2, 2/3] of φ = y²: the multiplier LP reaches exactly 4/9.
        let red = interval_red(1.0, 0.0, 0.0);
        let tau = DVector::from_vec(vec![2.0]);
        let theta = DVector::from_vec(vec![1.5]);
        let mut ws = LpWorkspace::new();
        let bound = phi_l(&mut ws, &red, &tau, &theta, None).unwrap();
        let exact = 4.0 / 9.0;
        assert!(
            (bound - exact).abs() <= 1e-6,
            "multiplier bound {bound} vs exact {exact}"
        );
        // Empty strip: bound improves without limit.
        let theta_far = DVector::from_vec(vec![3.0]);
        let bound = phi_l(&mut ws, &red, &tau, &theta_far, None).unwrap();
        assert_eq!(bound, f64::NEG_INFINITY);
        // Early stop returns once the threshold is certified.
        let bound = phi_l(&mut ws, &red, &tau, &theta, Some(1.0)).unwrap();
        assert!(bound <= 1.0 + 1e-9);
        assert!(bound >= exact - 1e-9);
    }

    #[test]
    fn deepened_cut_accepted_with_certificate() {
        // target 1/4 on φ = y² over [0,1]: verified θ = 4; the candidate
        // 0.9·4 = 3.6 excludes [0, 1/3.6] whose strip beyond τ = 2 is empty,
        // so the multiplier LP certifies it instantly.
        let red = interval_red(1.0, 0.0, 0.0);
        let tau = DVector::from_vec(vec![2.0]);
        let mut ws = LpWorkspace::new();
        let theta_k = konno_cut(&mut ws, &red, &tau, 0.25).unwrap();
        let outcome = dnn_cut(
            &mut ws,
            &red,
            &tau,
            &theta_k,
            0.25,
            &DnnCutParams::default(),
        );
        assert!(
            outcome.certificate != CutCertificate::Fallback,
            "deepening fell back on a certifiable candidate"
        );
        assert!(outcome.theta[0] < theta_k[0]);
        assert!((outcome.theta[0] - 3.6).abs() < 1e-9);
    }

    #[test]
    fn relative_improvement_signs() {
        assert!((relative_improvement(2.0, 1.0) - 0.5).abs() < 1e-12);
        assert!(relative_improvement(2.0, 2.5) < 0.0);
    }
}
