use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;
use warnsim_core::netsim::{simulate, RunOptions};
use warnsim_core::scenario::{preset, Protocol};
use warnsim_core::sim::{EventKind, Scheduler, Target};

fn scheduler(c: &mut Criterion) {
    c.bench_function("scheduler_10k", |b| {
        b.iter(|| {
            let mut s: Scheduler<u32> = Scheduler::new();
            for i in 0..10_000u32 {
                s.schedule((i * 7919 % 10_007) as f64 * 1e-3, Target::Engine, EventKind::TimerExpiry, i).unwrap();
            }
            let mut n = 0u64;
            s.run_until(20.0, |_, ev| {
                n += ev.payload as u64;
                Ok::<(), std::convert::Infallible>(())
            })
            .unwrap();
            black_box(n)
        })
    });
}

fn full_runs(c: &mut Criterion) {
    let mut group = c.benchmark_group("simulate");
    group.sample_size(10);
    let mut add = preset("leganes-add").unwrap();
    add.duration = 10.0;
    add.warning.frames = 25;
    group.bench_function("add_vod_40", |b| b.iter(|| simulate(&add, Protocol::AddVod, 40.0, 1, &RunOptions::default())));
    let routing = preset("routing-3mrp").unwrap();
    group.bench_function("3mrp_dsw_100", |b| {
        b.iter(|| simulate(&routing, Protocol::MrpDsw, 100.0, 1, &RunOptions::default()))
    });
    let ctd = preset("ctd-1000").unwrap();
    group.bench_function("ctd_query_1000", |b| {
        b.iter(|| simulate(&ctd, Protocol::CtdQuery, 0.0, 1, &RunOptions::default()))
    });
    group.finish();
}

criterion_group!(benches, scheduler, full_runs);
criterion_main!(benches);
