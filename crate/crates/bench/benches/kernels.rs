use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use threshold_bench::{cubic, cubic_with_spectrum};
use threshold_core::approx::build_vk;
use threshold_core::band::{Band, BandLu};
use threshold_core::evolution::{Evolver, EvolverConfig};
use threshold_core::linearized::{assemble, compute_spectrum};
use threshold_core::{make_grid, solve_ground};

fn pentadiagonal(n: usize) -> Band {
    let mut m = Band::zeros(n, 2, 2);
    for i in 0..n {
        m.set(i, i, 6.0);
        if i + 1 < n {
            m.set(i, i + 1, -1.5);
            m.set(i + 1, i, -1.0);
        }
        if i + 2 < n {
            m.set(i, i + 2, 0.25);
            m.set(i + 2, i, 0.5);
        }
    }
    m
}

fn band_lu(c: &mut Criterion) {
    let mut g = c.benchmark_group("band_lu");
    for n in [1000, 4000] {
        let m = pentadiagonal(n);
        let rhs: Vec<f64> = (0..n).map(|i| (i as f64 * 0.01).sin()).collect();
        g.bench_with_input(BenchmarkId::new("factor", n), &m, |b, m| b.iter(|| BandLu::factor(black_box(m)).unwrap()));
        let lu = BandLu::factor(&m).unwrap();
        g.bench_with_input(BenchmarkId::new("solve", n), &rhs, |b, r| b.iter(|| lu.solve(black_box(r))));
    }
    g.finish();
}

fn ground(c: &mut Criterion) {
    let mut g = c.benchmark_group("ground");
    g.sample_size(10);
    for n in [1000, 2000] {
        let grid = make_grid(3, 20.0, n).unwrap();
        g.bench_with_input(BenchmarkId::new("solve_cubic_3d", n), &grid, |b, grid| {
            b.iter(|| solve_ground(black_box(grid), 3.0).unwrap())
        });
    }
    g.finish();
}

fn spectrum(c: &mut Criterion) {
    let mut g = c.benchmark_group("spectrum");
    g.sample_size(10);
    let gp = cubic(1000);
    let ops = assemble(&gp);
    g.bench_function("assemble_1000", |b| b.iter(|| assemble(black_box(&gp))));
    g.bench_function("compute_1000", |b| b.iter(|| compute_spectrum(black_box(&ops)).unwrap()));
    g.finish();
}

fn expansion(c: &mut Criterion) {
    let mut g = c.benchmark_group("expansion");
    g.sample_size(10);
    let (_, ops, spec) = cubic_with_spectrum(1000);
    for k in [1, 3] {
        g.bench_with_input(BenchmarkId::new("build_vk", k), &k, |b, &k| {
            b.iter(|| build_vk(1.0, k, black_box(&spec), &ops).unwrap())
        });
    }
    g.finish();
}

fn evolution(c: &mut Criterion) {
    let mut g = c.benchmark_group("evolution");
    for n in [1000, 3000] {
        let gp = cubic(n);
        let mut ev = Evolver::new(&gp.grid, &EvolverConfig::new(3.0, 1e-3, 1.0), Some(&gp)).unwrap();
        let u = gp.q.scale_real(1.01);
        g.bench_function(BenchmarkId::new("step", n), |b| b.iter(|| ev.step(black_box(&u), 1e-3).unwrap()));
        g.bench_function(BenchmarkId::new("diagnostics", n), |b| b.iter(|| ev.diagnostics(black_box(&u), 0.0)));
    }
    g.finish();
}

criterion_group!(benches, band_lu, ground, spectrum, expansion, evolution);
criterion_main!(benches);
