//! Non-gating classify throughput per core, for trend inspection only.
//! Line-rate hardware numbers are out of reach here by design; the
//! constant-work stage-count property in the acceptance suite is the
//! binding check.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion, Throughput};

use ctgossip_core::codec::{
    build_background_udp, build_sth_411, build_tiny_fragment_64,
};
use ctgossip_core::merkle::{Log, LogPolicy, SignedTreeHead, TestSigner, MAIN_BRANCH};
use ctgossip_core::pipeline::{classify, Pipeline, PipelineConfig};

fn sample_sth() -> SignedTreeHead {
    let mut log = Log::new(
        "pilot",
        LogPolicy::default(),
        Box::new(TestSigner::from_label("pilot")),
        0,
    )
    .unwrap();
    for i in 0..8u8 {
        log.append(MAIN_BRANCH, &[i]).unwrap();
    }
    log.issue_sth(MAIN_BRANCH, 1000).unwrap()
}

fn bench_classify(c: &mut Criterion) {
    let config = PipelineConfig::new(["pilot".to_string()]);
    let sth = sample_sth();
    let cases: Vec<(&str, Vec<u8>)> = vec![
        ("sth_411", build_sth_411("pilot", &sth).unwrap()),
        ("tiny_fragment_64", build_tiny_fragment_64()),
        ("background_udp_411", build_background_udp(411 - 42)),
    ];

    let mut group = c.benchmark_group("classify");
    for (name, frame) in &cases {
        group.throughput(Throughput::Bytes(frame.len() as u64));
        group.bench_with_input(BenchmarkId::from_parameter(name), frame, |b, frame| {
            b.iter(|| classify(std::hint::black_box(frame), &config))
        });
    }
    group.finish();

    // Full process path at a representative STH-related rate.
    let mut group = c.benchmark_group("process_mixed");
    let sth_frame = &cases[0].1;
    let background = &cases[2].1;
    for sth_percent in [0u64, 50, 100] {
        let stream: Vec<&[u8]> = (0..100)
            .map(|i| {
                if i % 100 < sth_percent {
                    sth_frame.as_slice()
                } else {
                    background.as_slice()
                }
            })
            .collect();
        let bytes: u64 = stream.iter().map(|f| f.len() as u64).sum();
        group.throughput(Throughput::Bytes(bytes));
        group.bench_with_input(
            BenchmarkId::from_parameter(format!("sth_{sth_percent}pct")),
            &stream,
            |b, stream| {
                let mut pipeline = Pipeline::new(config.clone(), "bench");
                b.iter(|| {
                    for frame in stream {
                        std::hint::black_box(pipeline.process(frame, 0).verdict);
                    }
                })
            },
        );
    }
    group.finish();
}

criterion_group!(benches, bench_classify);
criterion_main!(benches);
