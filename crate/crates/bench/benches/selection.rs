use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use gensel::cluster::{fit_gmm, CovarianceKind, GmmConfig};
use gensel::embed::fallback_featurize;
use gensel::select::{
    exclusion_pool, rand_size, sample_target, select_rand, select_sent, target_mean,
};
use gensel::{Genre, TargetSpec};

fn target() -> TargetSpec {
    TargetSpec::new("goal", "UD_Goal-T", Genre::Spoken, ["Goal".to_string()])
}

fn featurize(c: &mut Criterion) {
    let corpus = gensel_bench::corpus(500);
    let mut g = c.benchmark_group("fallback_featurize");
    for dim in [64, 256] {
        g.bench_with_input(BenchmarkId::from_parameter(dim), &dim, |b, &dim| {
            b.iter(|| {
                fallback_featurize(
                    corpus.entries().flat_map(|e| e.treebank.sentences()),
                    dim,
                    41,
                )
                .unwrap()
            })
        });
    }
    g.finish();
}

fn sent(c: &mut Criterion) {
    let corpus = gensel_bench::corpus(2000);
    let emb = fallback_featurize(
        corpus.entries().flat_map(|e| e.treebank.sentences()),
        128,
        41,
    )
    .unwrap();
    let target = target();
    let pool = exclusion_pool(&corpus, &target).unwrap();
    let sample = sample_target(&corpus.get("UD_Goal-T").unwrap().treebank, 100, 41);
    let mean = target_mean(&emb, &sample).unwrap();
    let mut g = c.benchmark_group("select_sent");
    for k in [100, 4000] {
        g.bench_with_input(BenchmarkId::from_parameter(k), &k, |b, &k| {
            b.iter(|| select_sent(&pool, &emb, black_box(&mean), k, &target, 41).unwrap())
        });
    }
    g.finish();
}

fn rand(c: &mut Criterion) {
    let corpus = gensel_bench::corpus(2000);
    let target = target();
    let pool = exclusion_pool(&corpus, &target).unwrap();
    c.bench_function("select_rand", |b| {
        b.iter(|| select_rand(&pool, 3000, 4000, 3500, &target, black_box(41)).unwrap())
    });
    c.bench_function("rand_size", |b| {
        b.iter(|| rand_size(black_box(&[3000, 4000, 3500])))
    });
}

fn gmm(c: &mut Criterion) {
    let points = gensel_bench::blobs(2000, 16, 4, 41);
    let rows: Vec<&[f32]> = points.iter().map(Vec::as_slice).collect();
    let mut g = c.benchmark_group("fit_gmm");
    g.sample_size(10);
    for (name, covariance) in [
        ("full", CovarianceKind::Full),
        ("diagonal", CovarianceKind::Diagonal),
    ] {
        let cfg = GmmConfig {
            covariance,
            ..GmmConfig::default()
        };
        g.bench_function(name, |b| b.iter(|| fit_gmm(&rows, 4, 41, &cfg).unwrap()));
    }
    g.finish();
}

criterion_group!(benches, featurize, sent, rand, gmm);
criterion_main!(benches);
