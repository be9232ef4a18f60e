//! Problem data and vertex reductions.
//!
//! An instance asks to maximize the convex quadratic
//! `Φ(x) = xᵀHx + 2pᵀx` over the polyhedron `{x : Ax = b, x ≥ 0}`.
//! Fixing a vertex with basic index set `B` and eliminating the basic
//! variables `x_B = w − Fᵀy` (where `y` are the nonbasic coordinates)
//! rewrites the program over the corner region `{y : Fᵀy ≤ w, y ≥ 0}` as
//! `φ(y) = yᵀQy + 2dᵀy + v` — the form every bound and cut in the solver
//! works with. Cuts return to the original space by appending a slack row,
//! which keeps the feasible set exact rather than approximating it.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::Deserialize;
use thiserror::Error;

use crate::numlin::{self, LuFactors};

/// Relative feasibility tolerance for `Ax = b` at a claimed vertex.
pub const VERTEX_FEAS_TOL: f64 = 1e-8;
/// Absolute tolerance below zero allowed for vertex coordinates.
pub const VERTEX_NONNEG_TOL: f64 = 1e-9;
/// Relative tolerance for nonbasic coordinates of a claimed vertex.
pub const VERTEX_NONBASIC_TOL: f64 = 1e-8;

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("matrix H is not symmetric (relative asymmetry {0:.3e})")]
    NotSymmetric(f64),
    #[error("matrix H is not positive semidefinite (λ_min = {0:.3e})")]
    NotPsd(f64),
    #[error("constraint matrix is rank deficient")]
    RankDeficient,
    #[error("feasible region is unbounded")]
    UnboundedRegion,
    #[error("feasible region is empty")]
    EmptyRegion,
    #[error("basis matrix is singular")]
    SingularBasis,
    #[error("point is not a vertex of the region: {0}")]
    InfeasibleVertex(String),
    #[error("non-finite entry in {0}")]
    NonFinite(&'static str),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
}

/// A concave-minimization instance in equality form.
#[derive(Debug, Clone, PartialEq)]
pub struct QpInstance {
    pub name: String,
    pub n: usize,
    pub m: usize,
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub h: DMatrix<f64>,
    pub p: DVector<f64>,
    /// Reference value for the decision question "is the optimum ≥ vR?";
    /// absent for instances meant for global solves only.
    pub vr: Option<f64>,
}

impl QpInstance {
    /// Objective `Φ(x) = xᵀHx + 2pᵀx`.
    pub fn phi(&self, x: &DVector<f64>) -> f64 {
        (x.transpose() * &self.h * x)[(0, 0)] + 2.0 * self.p.dot(x)
    }

    /// Symmetric bilinear extension `Ψ(x, z) = xᵀHz + pᵀx + pᵀz`
    /// (so `Ψ(x, x) = Φ(x)`).
    pub fn psi(&self, x: &DVector<f64>, z: &DVector<f64>) -> f64 {
        (x.transpose() * &self.h * z)[(0, 0)] + self.p.dot(x) + self.p.dot(z)
    }

    /// Gradient of `Φ` up to the factor 2: `Hx + p`. Maximizing
    /// `⟨Hx + p, z⟩` over the region is the local-search step.
    pub fn half_gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.h * x + &self.p
    }

    /// Cheap structural checks: dimensions agree and all entries are finite.
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.a.nrows() != self.m || self.a.ncols() != self.n {
            return Err(ModelError::DimensionMismatch(format!(
                "A is {}×{}, expected {}×{}",
                self.a.nrows(),
                self.a.ncols(),
                self.m,
                self.n
            )));
        }
        if self.b.len() != self.m {
            return Err(ModelError::DimensionMismatch(format!(
                "b has {} entries, expected {}",
                self.b.len(),
                self.m
            )));
        }
        if self.h.nrows() != self.n || self.h.ncols() != self.n {
            return Err(ModelError::DimensionMismatch(format!(
                "H is {}×{}, expected {}×{}",
                self.h.nrows(),
                self.h.ncols(),
                self.n,
                self.n
            )));
        }
        if self.p.len() != self.n {
            return Err(ModelError::DimensionMismatch(format!(
                "p has {} entries, expected {}",
                self.p.len(),
                self.n
            )));
        }
        if self.m >= self.n {
            return Err(ModelError::DimensionMismatch(format!(
                "need m < n, got m = {}, n = {}",
                self.m, self.n
            )));
        }
        for (label, ok) in [
            ("A", self.a.iter().all(|v| v.is_finite())),
            ("b", self.b.iter().all(|v| v.is_finite())),
            ("H", self.h.iter().all(|v| v.is_finite())),
            ("p", self.p.iter().all(|v| v.is_finite())),
        ] {
            if !ok {
                return Err(ModelError::NonFinite(label));
            }
        }
        if let Some(vr) = self.vr {
            if !vr.is_finite() {
                return Err(ModelError::NonFinite("vR"));
            }
        }
        Ok(())
    }

    /// Full semantic validation: H symmetric and positive semidefinite,
    /// A of full row rank, region nonempty and bounded.
    pub fn validate_full(&self, ws: &mut crate::lp::LpWorkspace) -> Result<(), ModelError> {
        self.validate()?;
        let scale = self.h.amax().max(1e-300);
        let mut asym: f64 = 0.0;
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                asym = asym.max((self.h[(i, j)] - self.h[(j, i)]).abs());
            }
        }
        if asym > 1e-8 * scale {
            return Err(ModelError::NotSymmetric(asym / scale));
        }
        let eig = numlin::eig_sym(&self.h).map_err(|_| ModelError::NotSymmetric(asym / scale))?;
        let lam_min = eig.lambda_min();
        if lam_min < -1e-8 * scale.max(1.0) {
            return Err(ModelError::NotPsd(lam_min));
        }
        if crate::lp::crash_basis_from_support(&self.a, &[]).is_err() {
            return Err(ModelError::RankDeficient);
        }
        // Boundedness and nonemptiness via the longest coordinate sum over
        // the region in equality form.
        let p = crate::lp::LpProblem::equality_form(
            crate::lp::Sense::Max,
            DVector::from_element(self.n, 1.0),
            self.a.clone(),
            self.b.clone(),
        );
        match ws.solve(&p) {
            Ok(sol) => match sol.status {
                crate::lp::LpStatus::Optimal => Ok(()),
                crate::lp::LpStatus::Unbounded => Err(ModelError::UnboundedRegion),
                crate::lp::LpStatus::Infeasible => Err(ModelError::EmptyRegion),
            },
            Err(_) => Err(ModelError::RankDeficient),
        }
    }
}

/// The program rewritten in the nonbasic coordinates of a vertex:
/// maximize `φ(y) = yᵀQy + 2dᵀy + v` over `{y : Fᵀy ≤ w, y ≥ 0}`.
#[derive(Debug, Clone)]
pub struct ReducedProgram {
    /// Number of nonbasic coordinates, `n − m`.
    pub q: usize,
    /// `(n−m)×m`: row `k` describes how nonbasic coordinate `k` moves the
    /// basic variables (`x_B = w − Fᵀy`).
    pub f: DMatrix<f64>,
    /// Basic values at the vertex, `≥ 0`.
    pub w: DVector<f64>,
    /// Quadratic term of `φ`.
    pub qmat: DMatrix<f64>,
    /// Linear term of `φ`.
    pub d: DVector<f64>,
    /// Objective value at the vertex, `φ(0) = Φ(x̄)`.
    pub v: f64,
    /// Basic variable indices (ascending).
    pub basis: Vec<usize>,
    /// Nonbasic variable indices (ascending); `y[k]` is `x[nonbasic[k]]`.
    pub nonbasic: Vec<usize>,
}

impl ReducedProgram {
    /// `φ(y) = yᵀQy + 2dᵀy + v`.
    pub fn phi(&self, y: &DVector<f64>) -> f64 {
        (y.transpose() * &self.qmat * y)[(0, 0)] + 2.0 * self.d.dot(y) + self.v
    }

    /// Reassemble the original-space point for nonbasic coordinates `y`
    /// (feasible iff `y ≥ 0` and `Fᵀy ≤ w`).
    pub fn x_of_y(&self, y: &DVector<f64>) -> DVector<f64> {
        let n = self.basis.len() + self.nonbasic.len();
        let xb = &self.w - self.f.transpose() * y;
        let mut x = DVector::zeros(n);
        for (i, &idx) in self.basis.iter().enumerate() {
            x[idx] = xb[i];
        }
        for (k, &idx) in self.nonbasic.iter().enumerate() {
            x[idx] = y[k];
        }
        x
    }
}

/// Rewrite the instance in the nonbasic coordinates of the vertex `x̄` whose
/// basic set is `basis` (m distinct variable indices). The vertex is checked
/// against the instance before any factorization:
/// `‖Ax̄ − b‖∞ ≤ 1e-8·max(1, ‖b‖∞)`, `x̄ ≥ −1e-9`, and nonbasic coordinates
/// zero to within `1e-8·max(1, ‖x̄‖∞)`.
pub fn reduce_at_vertex(
    inst: &QpInstance,
    x_bar: &DVector<f64>,
    basis: &[usize],
) -> Result<ReducedProgram, ModelError> {
    inst.validate()?;
    let n = inst.n;
    let m = inst.m;
    if x_bar.len() != n {
        return Err(ModelError::DimensionMismatch(format!(
            "vertex has {} entries, expected {}",
            x_bar.len(),
            n
        )));
    }
    let mut basis: Vec<usize> = basis.to_vec();
    basis.sort_unstable();
    basis.dedup();
    if basis.len() != m || basis.iter().any(|&j| j >= n) {
        return Err(ModelError::DimensionMismatch(format!(
            "basis must hold {} distinct indices below {}",
            m, n
        )));
    }
    let residual = (&inst.a * x_bar - &inst.b).amax();
    let b_scale = inst.b.amax().max(1.0);
    if residual > VERTEX_FEAS_TOL * b_scale {
        return Err(ModelError::InfeasibleVertex(format!(
            "‖Ax − b‖∞ = {residual:.3e}"
        )));
    }
    if x_bar.min() < -VERTEX_NONNEG_TOL {
        return Err(ModelError::InfeasibleVertex(format!(
            "negative coordinate {:.3e}",
            x_bar.min()
        )));
    }
    let in_basis = {
        let mut flags = vec![false; n];
        for &j in &basis {
            flags[j] = true;
        }
        flags
    };
    let nonbasic: Vec<usize> = (0..n).filter(|&j| !in_basis[j]).collect();
    let x_scale = x_bar.amax().max(1.0);
    for &j in &nonbasic {
        if x_bar[j].abs() > VERTEX_NONBASIC_TOL * x_scale {
            return Err(ModelError::InfeasibleVertex(format!(
                "nonbasic coordinate {} is {:.3e}, not zero",
                j, x_bar[j]
            )));
        }
    }
    let q = n - m;

    let mut bmat = DMatrix::zeros(m, m);
    for (col, &j) in basis.iter().enumerate() {
        bmat.set_column(col, &inst.a.column(j));
    }
    let lu = LuFactors::new(&bmat).map_err(|_| ModelError::SingularBasis)?;
    let w = lu.solve(&inst.b);
    // F = (B⁻¹N)ᵀ, one solve per nonbasic column.
    let mut f = DMatrix::zeros(q, m);
    for (k, &j) in nonbasic.iter().enumerate() {
        let col = lu.solve(&inst.a.column(j).into_owned());
        for i in 0..m {
            f[(k, i)] = col[i];
        }
    }

    // Blocks of H and p in the basic/nonbasic split.
    let mut h_bb = DMatrix::zeros(m, m);
    let mut h_nn = DMatrix::zeros(q, q);
    let mut h_bn = DMatrix::zeros(m, q);
    for (i, &bi) in basis.iter().enumerate() {
        for (j, &bj) in basis.iter().enumerate() {
            h_bb[(i, j)] = inst.h[(bi, bj)];
        }
        for (k, &nk) in nonbasic.iter().enumerate() {
            h_bn[(i, k)] = inst.h[(bi, nk)];
        }
    }
    for (k, &nk) in nonbasic.iter().enumerate() {
        for (l, &nl) in nonbasic.iter().enumerate() {
            h_nn[(k, l)] = inst.h[(nk, nl)];
        }
    }
    let p_b = DVector::from_fn(m, |i, _| inst.p[basis[i]]);
    let p_n = DVector::from_fn(q, |k, _| inst.p[nonbasic[k]]);

    // Substituting x_B = w − Fᵀy into Φ:
    //   Q = H_NN + F H_BB Fᵀ − F H_BN − (F H_BN)ᵀ
    //   d = p_N + H_BNᵀ w − F p_B − F H_BB w
    //   v = wᵀ H_BB w + 2 p_Bᵀ w
    let fh = &f * &h_bn; // q×q
    let mut qmat = &h_nn + &f * &h_bb * f.transpose() - &fh - fh.transpose();
    // Exact symmetry for downstream eigensolves.
    for i in 0..q {
        for j in (i + 1)..q {
            let s = 0.5 * (qmat[(i, j)] + qmat[(j, i)]);
            qmat[(i, j)] = s;
            qmat[(j, i)] = s;
        }
    }
    let d = &p_n + h_bn.transpose() * &w - &f * &p_b - &f * (&h_bb * &w);
    let v = (w.transpose() * &h_bb * &w)[(0, 0)] + 2.0 * p_b.dot(&w);

    Ok(ReducedProgram {
        q,
        f,
        w,
        qmat,
        d,
        v,
        basis,
        nonbasic,
    })
}

/// Append the cut `θᵀy ≥ 1` (in the vertex's nonbasic coordinates) to the
/// instance as an equality row with a fresh slack: `θᵀx_N − s = 1, s ≥ 0`.
/// The slack column makes the new row independent of the old ones, so no
/// rank check is needed. The objective ignores the slack, and every old
/// feasible point satisfying the cut extends uniquely.
pub fn lift_cut(inst: &QpInstance, nonbasic: &[usize], theta: &DVector<f64>) -> QpInstance {
    let n = inst.n;
    let m = inst.m;
    debug_assert_eq!(theta.len(), nonbasic.len());
    let mut a = DMatrix::zeros(m + 1, n + 1);
    a.view_mut((0, 0), (m, n)).copy_from(&inst.a);
    for (k, &j) in nonbasic.iter().enumerate() {
        a[(m, j)] = theta[k];
    }
    a[(m, n)] = -1.0;
    let mut b = DVector::zeros(m + 1);
    b.view_mut((0, 0), (m, 1)).copy_from(&inst.b);
    b[m] = 1.0;
    let mut h = DMatrix::zeros(n + 1, n + 1);
    h.view_mut((0, 0), (n, n)).copy_from(&inst.h);
    let mut p = DVector::zeros(n + 1);
    p.view_mut((0, 0), (n, 1)).copy_from(&inst.p);
    QpInstance {
        name: inst.name.clone(),
        n: n + 1,
        m: m + 1,
        a,
        b,
        h,
        p,
        vr: inst.vr,
    }
}

#[derive(Deserialize)]
struct InstanceJson {
    name: String,
    n: usize,
    m: usize,
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    b: Vec<f64>,
    #[serde(rename = "H")]
    h: Vec<Vec<f64>>,
    p: Vec<f64>,
    #[serde(rename = "vR", default)]
    vr: Option<f64>,
}

/// Parse an instance from its JSON text.
pub fn instance_from_json(text: &str) -> Result<QpInstance, ModelError> {
    let raw: InstanceJson = serde_json::from_str(text).map_err(|e| ModelError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let check_rows = |rows: &Vec<Vec<f64>>, nr: usize, nc: usize, label: &str| {
        if rows.len() != nr || rows.iter().any(|r| r.len() != nc) {
            Err(ModelError::DimensionMismatch(format!(
                "{label} must be {nr}×{nc}"
            )))
        } else {
            Ok(())
        }
    };
    check_rows(&raw.a, raw.m, raw.n, "A")?;
    check_rows(&raw.h, raw.n, raw.n, "H")?;
    if raw.b.len() != raw.m {
        return Err(ModelError::DimensionMismatch(format!(
            "b must have {} entries",
            raw.m
        )));
    }
    if raw.p.len() != raw.n {
        return Err(ModelError::DimensionMismatch(format!(
            "p must have {} entries",
            raw.n
        )));
    }
    let inst = QpInstance {
        name: raw.name,
        n: raw.n,
        m: raw.m,
        a: DMatrix::from_fn(raw.m, raw.n, |i, j| raw.a[i][j]),
        b: DVector::from_vec(raw.b),
        h: DMatrix::from_fn(raw.n, raw.n, |i, j| raw.h[i][j]),
        p: DVector::from_vec(raw.p),
        vr: raw.vr,
    };
    inst.validate()?;
    Ok(inst)
}

fn push_f64(out: &mut String, v: f64) {
    // 17 significant digits: exact round-trip for every finite f64, and a
    // stable byte representation for regeneration checks.
    let _ = write!(out, "{v:.16e}");
}

fn push_vec(out: &mut String, v: &DVector<f64>) {
    out.push('[');
    for (i, x) in v.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        push_f64(out, *x);
    }
    out.push(']');
}

/// Serialize an instance to JSON with a fixed layout and 17-significant-digit
/// floats (bitwise round-trip).
pub fn instance_to_json(inst: &QpInstance) -> String {
    let mut out = String::new();
    out.push_str("{\n");
    let _ = writeln!(out, "  \"name\": {},", serde_json::json!(inst.name));
    let _ = writeln!(out, "  \"n\": {},", inst.n);
    let _ = writeln!(out, "  \"m\": {},", inst.m);
    out.push_str("  \"A\": [\n");
    for i in 0..inst.m {
        out.push_str("    ");
        push_vec(&mut out, &inst.a.row(i).transpose());
        out.push_str(if i + 1 < inst.m { ",\n" } else { "\n" });
    }
    out.push_str("  ],\n  \"b\": ");
    push_vec(&mut out, &inst.b);
    out.push_str(",\n  \"H\": [\n");
    for i in 0..inst.n {
        out.push_str("    ");
        push_vec(&mut out, &inst.h.row(i).transpose());
        out.push_str(if i + 1 < inst.n { ",\n" } else { "\n" });
    }
    out.push_str("  ],\n  \"p\": ");
    push_vec(&mut out, &inst.p);
    if let Some(vr) = inst.vr {
        out.push_str(",\n  \"vR\": ");
        push_f64(&mut out, vr);
    }
    out.push_str("\n}\n");
    out
}

/// Read an instance file.
pub fn read_instance(path: &Path) -> Result<QpInstance, ModelError> {
    let text = std::fs::read_to_string(path)?;
    instance_from_json(&text)
}

/// Write an instance file (see [`instance_to_json`] for the format).
pub fn write_instance(path: &Path, inst: &QpInstance) -> Result<(), ModelError> {
    std::fs::write(path, instance_to_json(inst))?;
    Ok(())
}
