//! Global solver for concave quadratic programs
//!
//! Maximizes a convex quadratic `Φ(x) = xᵀHx + 2pᵀx` (`H` symmetric positive
//! semidefinite) over a bounded polyhedron `{x : Ax = b, x ≥ 0}`. Because the
//! objective is convex, the maximum is attained at a vertex and the problem is
//! NP-hard in general. The solver combines:
//!
//! * a mountain-climbing local search that returns KKT vertices ([`climb`]),
//! * concavity cuts (Tuy cuts) deepened coordinate-wise by LP subproblems
//!   (Konno cuts) and optionally by a certified semidefinite bound ([`cuts`]),
//! * a first-order doubly-nonnegative (DNN) relaxation solver whose output is
//!   post-processed into a rigorous upper-bound certificate ([`dnn`]),
//! * a cutting-plane driver answering either a reference-value query
//!   ("is the optimum ≥ v_R?") or solving to a relative gap ([`driver`]).
//!
//! Supporting modules: dense numerical kernels ([`numlin`]), a deterministic
//! two-phase primal simplex ([`lp`]), problem types and vertex reductions
//! ([`model`]), and a seeded instance generator ([`gen`]).

pub mod climb;
pub mod cuts;
pub mod dnn;
pub mod driver;
pub mod gen;
pub mod lp;
pub mod model;
pub mod numlin;

pub use numlin::{eig_sym, psd_project, solve_linear, NumlinError, SymEig};
