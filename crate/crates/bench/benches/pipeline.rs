use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use std::hint::black_box;

use subnyq_bench::scenario;
use subnyq_core::estimator::{fit_fourth_moment, fit_second_moment, moment_curve};
use subnyq_core::rng::derive_seed;
use subnyq_core::sampler::gate_pair;
use subnyq_core::separator::{apply_demix, mix};
use subnyq_core::{run_pipeline, run_pipeline_with_artifacts, AngleGrid, MomentOrder};

fn stages(c: &mut Criterion) {
    let cfg = scenario("1m", 1e-2);
    let (report, art) = run_pipeline_with_artifacts(&cfg).unwrap();
    let (x1, x2) = &art.mixed;

    c.bench_function("generate+mix 2M samples", |b| {
        b.iter(|| {
            let fs = cfg.sample_rate_hz;
            let n = cfg.n_samples();
            let s = cfg.soi.realize(fs, n, derive_seed(1, &[0])).unwrap();
            let i = cfg
                .interference
                .realize(fs, n, derive_seed(1, &[1]))
                .unwrap();
            black_box(mix(&cfg.mixing, &s, &i).unwrap())
        })
    });
    c.bench_function("gate_pair", |b| {
        b.iter(|| black_box(gate_pair(x1, x2, &cfg.pulse, 0).unwrap()))
    });

    let theta = AngleGrid::default_theta();
    let phi = AngleGrid::default_phi();
    c.bench_function("second-moment curve + fit", |b| {
        b.iter(|| {
            let curve = moment_curve(&art.gated, &theta, MomentOrder::Second).unwrap();
            black_box(fit_second_moment(&curve).unwrap())
        })
    });
    let white = art.whitened.as_ref().unwrap();
    c.bench_function("fourth-moment curve + fit", |b| {
        b.iter(|| {
            let curve = moment_curve(white, &phi, MomentOrder::Fourth).unwrap();
            black_box(fit_fourth_moment(&curve).unwrap())
        })
    });
    c.bench_function("apply_demix full rate", |b| {
        b.iter_batched(
            || report.demix,
            |w| black_box(apply_demix(&w, x1, x2).unwrap()),
            BatchSize::SmallInput,
        )
    });
}

fn end_to_end(c: &mut Criterion) {
    let mut group = c.benchmark_group("run_pipeline");
    group.sample_size(10);
    for ratio in [1e-2, 1e-3] {
        let cfg = scenario("1m", ratio);
        group.bench_function(format!("ratio {ratio:e}"), |b| {
            b.iter(|| black_box(run_pipeline(&cfg).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(benches, stages, end_to_end);
criterion_main!(benches);
