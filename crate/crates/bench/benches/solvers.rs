use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use susphom::fem::{solve_saddle, SolveOptions, SolverKind};
use susphom::{build_cell_mesh, build_perforated_mesh, effective_tensor, solve_micro, BoxDomain, InclusionShape};
use susphom::{AmplitudeLaw, BodyForce, MicroProblem, PicardOptions, Profile, RandomCellField, SurfaceForceModel, Weight};
use susphom_bench::cavity;

fn saddle(c: &mut Criterion) {
    let mut g = c.benchmark_group("saddle");
    g.sample_size(10);
    for n in [16, 32] {
        let (_, sys) = cavity(n);
        for kind in [SolverKind::Direct, SolverKind::Uzawa] {
            let opts = SolveOptions { kind, ..Default::default() };
            g.bench_with_input(BenchmarkId::new(format!("{kind:?}"), n), &sys, |b, sys| {
                b.iter(|| solve_saddle(black_box(sys), &opts).unwrap())
            });
        }
    }
    g.finish();
}

fn cell_tensor(c: &mut Criterion) {
    let mut g = c.benchmark_group("cell_tensor");
    g.sample_size(10);
    for h in [1.0 / 16.0, 1.0 / 32.0] {
        let cell = build_cell_mesh(&InclusionShape::disk(0.1), h).unwrap();
        g.bench_with_input(BenchmarkId::from_parameter(1.0 / h), &cell, |b, cell| {
            b.iter(|| effective_tensor(black_box(cell), 1.0, 1e-10).unwrap())
        });
    }
    g.finish();
}

fn micro(c: &mut Criterion) {
    let mut g = c.benchmark_group("micro");
    g.sample_size(10);
    let model = SurfaceForceModel::new(Profile::Sqrt1p, Weight::default(), AmplitudeLaw::default());
    let problem = MicroProblem {
        mesh: build_perforated_mesh(&BoxDomain::unit_square(), &InclusionShape::disk(0.1), 0.25, 0.125).unwrap(),
        mu: 1.0,
        field: RandomCellField::new(1, model.law),
        model,
        force: BodyForce::Swirl { amplitude: 4.0 },
        picard: PicardOptions { theta: 1.0, ..Default::default() },
        solver: SolveOptions::default(),
    };
    g.bench_function("eps_1/4", |b| b.iter(|| solve_micro(black_box(&problem)).unwrap()));
    g.finish();
}

criterion_group!(benches, saddle, cell_tensor, micro);
criterion_main!(benches);
