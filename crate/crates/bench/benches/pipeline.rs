use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};

use gpcert::certify::{eta, residual_indicators, solve_dual};
use gpcert::fem::{assemble_p1, assemble_rt_system, default_rule, P1Form, RtOrder, RtSpace};
use gpcert::gpe::scf_solve;
use gpcert::mesh::refine_red;
use gpcert_bench::{bench_mesh, bench_problem, bench_scf_options, solved_state};

fn bench_assembly(c: &mut Criterion) {
    let mesh = bench_mesh(32);
    c.bench_function("assemble_p1_stiffness_n32", |b| {
        b.iter(|| black_box(assemble_p1(&mesh, P1Form::Stiffness, default_rule()).unwrap()))
    });
    let rt = RtSpace::new(mesh.clone(), RtOrder::Rt1).unwrap();
    c.bench_function("assemble_rt1_system_n32", |b| {
        b.iter(|| black_box(assemble_rt_system(&rt, gpcert::fem::quadrature(5).unwrap())))
    });
}

fn bench_refinement(c: &mut Criterion) {
    let mesh = bench_mesh(32);
    c.bench_function("refine_red_n32", |b| b.iter(|| black_box(refine_red(&mesh))));
}

fn bench_solve_and_certify(c: &mut Criterion) {
    let mesh = bench_mesh(16);
    let problem = bench_problem();
    let opts = bench_scf_options();
    c.bench_function("scf_solve_n16", |b| {
        b.iter(|| black_box(scf_solve(&problem, &mesh, &opts).unwrap()))
    });

    let state = solved_state(16);
    c.bench_function("solve_dual_rt1_n16", |b| {
        b.iter(|| black_box(solve_dual(&state, RtOrder::Rt1).unwrap()))
    });
    let flux = solve_dual(&state, RtOrder::Rt1).unwrap();
    c.bench_function("eta_n16", |b| b.iter(|| black_box(eta(&state, &flux).unwrap())));
    c.bench_function("residual_indicators_n16", |b| {
        b.iter(|| black_box(residual_indicators(&state)))
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(10);
    targets = bench_assembly, bench_refinement, bench_solve_and_certify
}
criterion_main!(benches);
