//! Criterion benchmarks over the solver's hot paths: the dense simplex, the
//! PSD projection, one relaxation solve, and a full global solve on a small
//! instance. Instances come from the seeded generator so runs are
//! comparable across machines and revisions.

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use nalgebra::{DMatrix, DVector};
use qpcd_core::climb::search_kkt_point;
use qpcd_core::dnn::{solve_dnn, SdpParams, ShorProblem};
use qpcd_core::driver::{solve_global, SolverParams};
use qpcd_core::gen::{generate, Family, GenSpec, SplitMix64};
use qpcd_core::lp::{LpProblem, LpWorkspace, Sense};
use qpcd_core::model::reduce_at_vertex;
use qpcd_core::numlin::psd_project;

fn instance(family: Family, n: usize, seed: u64) -> qpcd_core::model::QpInstance {
    generate(&GenSpec {
        family,
        n,
        count: 1,
        seed,
    })
    .expect("generation")
    .pop()
    .expect("one instance")
}

fn bench_simplex(c: &mut Criterion) {
    // A dense random inequality-form LP of moderate size.
    let mut rng = SplitMix64::new(7);
    let rows = 60;
    let cols = 90;
    let a = DMatrix::from_fn(rows, cols, |_, _| rng.uniform(-1.0, 1.0));
    let b = DVector::from_fn(rows, |_, _| rng.uniform(1.0, 2.0));
    let obj = DVector::from_fn(cols, |_, _| rng.uniform(-1.0, 1.0));
    c.bench_function("simplex_60x90", |bench| {
        bench.iter_batched(
            LpWorkspace::new,
            |mut ws| {
                let p = LpProblem::inequality_form(Sense::Max, obj.clone(), a.clone(), b.clone());
                ws.solve(&p).expect("solve")
            },
            BatchSize::SmallInput,
        )
    });
}

fn bench_psd_project(c: &mut Criterion) {
    let mut rng = SplitMix64::new(11);
    let dim = 80;
    let m = DMatrix::from_fn(dim, dim, |_, _| rng.uniform(-1.0, 1.0));
    let sym = (&m + m.transpose()) * 0.5;
    c.bench_function("psd_project_80", |bench| {
        bench.iter(|| psd_project(&sym).expect("projection"))
    });
}

fn bench_relaxation(c: &mut Criterion) {
    // Root relaxation of a mid-size nonnegative instance, solved to the
    // driver's default tolerance.
    let inst = instance(Family::PcqMax, 30, 5);
    let mut ws = LpWorkspace::new();
    let out = search_kkt_point(&inst, &mut ws, None).expect("climb");
    let red = reduce_at_vertex(&inst, &out.x, &out.basis).expect("reduce");
    let shor = ShorProblem::from_reduced(&red).expect("lift");
    let params = SdpParams {
        tol: 1e-6,
        max_iters: 5_000,
        ..SdpParams::default()
    };
    c.bench_function("relaxation_root_n30", |bench| {
        bench.iter(|| solve_dnn(&shor, &params).expect("solve"))
    });
}

fn bench_global_solve(c: &mut Criterion) {
    let inst = instance(Family::CqMax, 10, 3);
    let params = SolverParams {
        eps_gap: 1e-4,
        ..SolverParams::default()
    };
    c.bench_function("solve_global_n10", |bench| {
        bench.iter(|| solve_global(&inst, &params).expect("solve"))
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = bench_simplex, bench_psd_project, bench_relaxation, bench_global_solve
}
criterion_main!(benches);
