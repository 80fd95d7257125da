//! Benchmarks for the numeric kernels: hypergeometric evaluation, adaptive
//! quadrature of the singular integral, and stencil assembly.

use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use fraclap::quadrature::{fields, frac_lap_numeric};
use fraclap::specfun::{annulus_factors, FracParams};
use fraclap::{Ball, ReactionSpec, StarDomain};

fn bench_annulus_factors(c: &mut Criterion) {
    let params = FracParams::new(2, 0.5).unwrap();
    c.bench_function("annulus_factors_2d_half", |b| {
        b.iter(|| {
            let mut acc = 0.0;
            for k in 1..200 {
                let tau = k as f64 / 200.0;
                let f = annulus_factors(black_box(&params), black_box(tau)).unwrap();
                acc += f.f + f.g;
            }
            acc
        })
    });
}

fn bench_quadrature(c: &mut Criterion) {
    let params = FracParams::new(1, 0.5).unwrap();
    let ball = Ball::new(vec![0.0], 1.0).unwrap();
    let field = fields::torsion_field(&ball, &params).unwrap();
    c.bench_function("frac_lap_numeric_interior_1d", |b| {
        b.iter(|| frac_lap_numeric(black_box(&field), &params, &[0.37], 1e-6).unwrap())
    });
}

fn bench_solver(c: &mut Criterion) {
    let params = FracParams::new(1, 0.5).unwrap();
    let domain = StarDomain::interval(-1.0, 1.0).unwrap();
    c.bench_function("dirichlet_solve_1d_128", |b| {
        b.iter(|| {
            fraclap::solver::solve_dirichlet(
                black_box(&domain),
                &ReactionSpec::constant(1.0),
                &params,
                128,
            )
            .unwrap()
        })
    });
}

criterion_group!(benches, bench_annulus_factors, bench_quadrature, bench_solver);
criterion_main!(benches);
