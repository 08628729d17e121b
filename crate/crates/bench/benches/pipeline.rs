use betamm_bench::{cubic, ma};
use betamm_core::bethe::leading_data;
use betamm_core::yangyang::build_frame;
use betamm_core::{solve_bethe, CorrelatorStore, KernelTable};
use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

fn bethe(c: &mut Criterion) {
    let mut group = c.benchmark_group("solve_bethe");
    for n in 1..=3 {
        let m = cubic(n);
        group.bench_with_input(BenchmarkId::new("cubic", n), &m, |b, m| b.iter(|| solve_bethe(black_box(m)).unwrap()));
    }
    group.finish();
}

fn frame(c: &mut Criterion) {
    let mut group = c.benchmark_group("hessian_frame");
    for n in 1..=3 {
        let m = ma(n);
        let sol = solve_bethe(&m).unwrap();
        group.bench_with_input(BenchmarkId::new("ma", n), &sol, |b, sol| b.iter(|| build_frame(black_box(sol), &m).unwrap()));
    }
    group.finish();
}

fn recursion(c: &mut Criterion) {
    let mut group = c.benchmark_group("recursion");
    for n in 1..=3 {
        let m = cubic(n);
        let sol = solve_bethe(&m).unwrap();
        let ld = leading_data(&sol, &m);
        group.bench_with_input(BenchmarkId::new("kernel_depth3", n), &sol, |b, sol| {
            b.iter(|| KernelTable::build(black_box(sol), &m, &ld, 3).unwrap())
        });
        let kt = KernelTable::build(&sol, &m, &ld, 3).unwrap();
        for (nn, g) in [(0, 1), (2, 0), (1, 1)] {
            let id = BenchmarkId::new(format!("W{}^({g})", nn + 1), n);
            group.bench_with_input(id, &kt, |b, kt| {
                b.iter(|| {
                    let mut st = CorrelatorStore::new(&m, &ld, kt.clone());
                    st.w(nn, g).unwrap().len()
                })
            });
        }
    }
    group.finish();
}

criterion_group!(benches, bethe, frame, recursion);
criterion_main!(benches);
