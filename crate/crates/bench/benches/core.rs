use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use liouville::action_angle::{action_variable, frequency_matrix};
use liouville::algebra::{
    algebra_rank, cartan_basis_at, fit_structure_constants, search_polynomial_completion, CompletionOptions,
    RegularElement,
};
use liouville::expr::Var;
use liouville::flows::{integrate, IntegratorConfig};
use liouville::SeedStream;
use liouville_bench::{system, vortices};
use std::hint::black_box;

fn expressions(c: &mut Criterion) {
    let sys = system("vortices3");
    let h = sys.hamiltonian.clone();
    let u = sys.probes[0].clone();
    c.bench_function("expr/evaluate vortex H", |b| b.iter(|| black_box(&h).evaluate(black_box(&u))));
    c.bench_function("expr/differentiate vortex H", |b| {
        b.iter(|| black_box(&h).differentiate(Var::q(1)).simplify())
    });
    let s = sys.structure().clone();
    let p = sys.invariants.member("P").unwrap().clone();
    c.bench_function("expr/poisson bracket {P, H}", |b| b.iter(|| s.poisson_bracket(black_box(&p), black_box(&h))));
}

fn algebra(c: &mut Criterion) {
    let seeds = SeedStream::default();
    let mut group = c.benchmark_group("algebra/rank");
    for n in [3, 5, 8] {
        let sys = vortices(n);
        let probes = sys.invariants.sample_points(&seeds, "bench", 12).unwrap();
        group.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            b.iter(|| algebra_rank(&sys.invariants, &probes).unwrap())
        });
    }
    group.finish();

    let sys = system("vortices3");
    c.bench_function("algebra/fit structure constants", |b| {
        b.iter(|| fit_structure_constants(&sys.invariants, 24, false, &seeds).unwrap())
    });
    let h = RegularElement::at_point(&sys.invariants, &sys.probes[0]).unwrap();
    let cartan = cartan_basis_at(&sys.invariants, &h, &seeds).unwrap();
    let options = CompletionOptions::new(2).with_generators(vec![0, 1, 2]);
    c.bench_function("algebra/degree-2 completion", |b| {
        b.iter(|| search_polynomial_completion(&sys.invariants, &cartan, &options, &seeds).unwrap())
    });
}

fn flows(c: &mut Criterion) {
    let sys = system("vortices3");
    let cfg = IntegratorConfig::adaptive(1e-9);
    c.bench_function("flows/adaptive vortices T=10", |b| {
        b.iter(|| integrate(&sys.hamiltonian, sys.structure(), &sys.probes[0], 10.0, &cfg).unwrap())
    });
    let osc = system("central_field");
    let fixed = IntegratorConfig::fixed(0.01);
    c.bench_function("flows/fixed-step central field T=10", |b| {
        b.iter(|| integrate(&osc.hamiltonian, osc.structure(), &osc.probes[0], 10.0, &fixed).unwrap())
    });
}

fn actions(c: &mut Criterion) {
    let quartic = system("quartic");
    let chart = quartic.chart.clone().unwrap();
    c.bench_function("actions/quartic gamma", |b| b.iter(|| action_variable(&chart, 1, black_box(&[1.0])).unwrap()));
    let pair = system("uncoupled_oscillators");
    let chart = pair.chart.clone().unwrap();
    c.bench_function("actions/frequency matrix 2x2", |b| {
        b.iter(|| frequency_matrix(&chart, black_box(&[0.5, 0.8])).unwrap())
    });
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = expressions, algebra, flows, actions
}
criterion_main!(benches);
