use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use dp4d::metrics::GmiEvaluator;
use dp4d::ssfm::{receive, transmit, FftPair, SplitStep};
use dp4d::{optimal_launch_power, Complex64, LinkConfig, NliCoefficients, PowerSearch, SsfmConfig};
use dp4d_bench::{launched, pm16};

fn bench_fft(c: &mut Criterion) {
    let mut g = c.benchmark_group("fft_filter");
    for n in [1 << 13, 1 << 15] {
        let (_, w) = launched(n / 4, 4);
        let h = vec![Complex64::new(1.0, 0.0); n];
        let mut fft = FftPair::new(n);
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| {
            let mut buf = w.samples_x.clone();
            b.iter(|| fft.filter(black_box(&mut buf), &h));
        });
    }
    g.finish();
}

fn bench_span(c: &mut Criterion) {
    let mut g = c.benchmark_group("split_step_span");
    g.sample_size(10);
    for step in [0.1, 1.0] {
        let (link, w) = launched(1 << 13, 4);
        let cfg = SsfmConfig { step_km: step, ..Default::default() };
        let mut prop = SplitStep::new(&link.fiber, &cfg, w.len(), w.sample_rate_hz).unwrap();
        g.bench_with_input(BenchmarkId::new("step_km", step), &step, |b, _| {
            b.iter_batched(
                || w.clone(),
                |mut x| prop.propagate(&mut x, 1).unwrap(),
                criterion::BatchSize::LargeInput,
            );
        });
    }
    g.finish();
}

fn bench_receiver(c: &mut Criterion) {
    let link = LinkConfig::default();
    let fmt = pm16();
    let tx = transmit(&fmt, &link.signal, 1 << 13, 4, 1);
    c.bench_function("receiver_8192", |b| {
        b.iter(|| receive(black_box(&tx.waveform), &link, 20, &fmt, &tx.symbols, 32));
    });
}

fn bench_gmi(c: &mut Criterion) {
    let fmt = pm16();
    let ev = GmiEvaluator::new(fmt.points().to_vec(), fmt.labels().to_vec(), 10_000, 1).unwrap();
    c.bench_function("gmi_pm16qam_10k", |b| b.iter(|| ev.evaluate(black_box(10.0))));
}

fn bench_optimum(c: &mut Criterion) {
    let link = LinkConfig::default().with_spans(100);
    let k = NliCoefficients::user(73.0, 0.1).unwrap();
    c.bench_function("optimal_launch_power", |b| {
        b.iter(|| optimal_launch_power(black_box(&link), &k, true, &PowerSearch::default()));
    });
}

criterion_group!(benches, bench_fft, bench_span, bench_receiver, bench_gmi, bench_optimum);
criterion_main!(benches);
