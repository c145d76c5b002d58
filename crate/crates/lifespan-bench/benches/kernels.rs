//! Microbenchmarks for the numerical kernels that dominate experiment
//! runtime: Bessel evaluation, the Laplace–Beltrami stencil, the
//! eigenfunction ODE solve, the Kato comparison ODE, wave propagator steps,
//! and power-law fitting.

use criterion::{black_box, criterion_group, criterion_main, BatchSize, Criterion};
use lifespan_core::exponents::ProblemParams;
use lifespan_core::geometry::{LaplaceStencil, RadialMetric};
use lifespan_core::kato_ode::{integrate_blowup, KatoParams};
use lifespan_core::special_functions::{bessel_k, solve_eigenfunction};
use lifespan_core::wave_solver::Propagator;
use lifespan_core::fit_power_law;

fn bench_bessel(c: &mut Criterion) {
    let orders = [0.5, 1.0, 1.3, 2.7];
    let args = [0.1, 1.0, 5.0, 20.0, 60.0];
    c.bench_function("bessel_k/grid_4x5", |b| {
        b.iter(|| {
            let mut acc = 0.0;
            for &nu in &orders {
                for &t in &args {
                    acc += bessel_k(black_box(nu), black_box(t)).unwrap();
                }
            }
            acc
        })
    });
}

fn bench_laplacian(c: &mut Criterion) {
    let len = 4096;
    let dr = 0.01;
    let phi: Vec<f64> = (0..len)
        .map(|j| {
            let r = j as f64 * dr;
            (-r * r).exp()
        })
        .collect();
    let mut out = vec![0.0; len];

    let flat = RadialMetric::flat(3);
    let flat_stencil = LaplaceStencil::new(&flat, dr, len);
    c.bench_function("laplacian/flat_4096", |b| {
        b.iter(|| {
            flat_stencil.apply(black_box(&phi), &mut out);
            out[len / 2]
        })
    });

    let lr = RadialMetric::long_range(3, 0.1, 1.0).unwrap();
    let lr_stencil = LaplaceStencil::new(&lr, dr, len);
    c.bench_function("laplacian/long_range_4096", |b| {
        b.iter(|| {
            lr_stencil.apply(black_box(&phi), &mut out);
            out[len / 2]
        })
    });
}

fn bench_eigenfunction(c: &mut Criterion) {
    let metric = RadialMetric::long_range(3, 0.1, 1.0).unwrap();
    c.bench_function("eigenfunction/solve_r25_dr0.01", |b| {
        b.iter(|| solve_eigenfunction(black_box(&metric), 0.5, 25.0, 0.01).unwrap().fitted_c0)
    });
}

fn bench_kato(c: &mut Criterion) {
    let params = KatoParams {
        beta: 2.0,
        a: 1.0,
        kato_alpha: 1.0,
        k: 1.0,
        delta_small: 1e-3,
        f0: 1e-3,
        f0p: 1e-3,
    };
    c.bench_function("kato/integrate_delta_1e-3", |b| {
        b.iter(|| integrate_blowup(black_box(&params), 1e7).unwrap().t_num)
    });
}

fn bench_wave_steps(c: &mut Criterion) {
    let metric = RadialMetric::flat(3);
    let params = ProblemParams::power_only(3, 0.0, 0.0, 2.0);
    let len = 2048;
    let dr = 0.01;
    let mut prop = Propagator::new(&metric, &params, dr, len);
    let dt = prop.dt_linear(0.35);
    let u0: Vec<f64> = (0..len)
        .map(|j| {
            let r = j as f64 * dr;
            (-r * r).exp()
        })
        .collect();
    let v0 = vec![0.0; len];

    c.bench_function("wave/100_steps_2048", |b| {
        b.iter_batched(
            || (u0.clone(), v0.clone()),
            |(mut u, mut v)| {
                let mut t = 0.0;
                for _ in 0..100 {
                    prop.step_in_place(t, &mut u, &mut v, dt, len);
                    t += dt;
                }
                u[0]
            },
            BatchSize::SmallInput,
        )
    });
}

fn bench_fit(c: &mut Criterion) {
    let points: Vec<(f64, f64)> = (1..=200)
        .map(|i| {
            let x = i as f64 * 0.05;
            (x, 3.0 * x.powf(-1.7))
        })
        .collect();
    c.bench_function("fit_power_law/200_points", |b| {
        b.iter(|| fit_power_law(black_box(&points)).unwrap().slope)
    });
}

criterion_group!(
    kernels,
    bench_bessel,
    bench_laplacian,
    bench_eigenfunction,
    bench_kato,
    bench_wave_steps,
    bench_fit
);
criterion_main!(kernels);
