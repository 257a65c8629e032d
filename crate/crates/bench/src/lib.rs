//! Shared fixtures for the benchmarks.

use rand::Rng;

use gensel::synth::{synth_corpus, SynthTreebank};
use gensel::{rng, Corpus, Genre};

/// A pool of four treebanks (`per` sentences each) plus a spoken target.
pub fn corpus(per: usize) -> Corpus {
    let half = per / 2;
    synth_corpus(
        &[
            SynthTreebank::new("UD_P1-A", "P1", &[(Genre::News, per)]),
            SynthTreebank::new(
                "UD_P2-B",
                "P2",
                &[(Genre::Spoken, half), (Genre::Wiki, per - half)],
            ),
            SynthTreebank::new("UD_P3-C", "P3", &[(Genre::Fiction, per)]),
            SynthTreebank::new(
                "UD_P4-D",
                "P4",
                &[(Genre::Spoken, half), (Genre::Legal, per - half)],
            ),
            SynthTreebank::new("UD_Goal-T", "Goal", &[(Genre::Spoken, 120)]),
        ],
        41,
    )
    .expect("synthetic corpus")
    .0
}

/// `n` points in `dim` dimensions around `k` well separated centres.
pub fn blobs(n: usize, dim: usize, k: usize, seed: u64) -> Vec<Vec<f32>> {
    let mut r = rng::stream(seed, "bench-blobs");
    (0..n)
        .map(|i| {
            (0..dim)
                .map(|d| (if d == i % k { 8.0 } else { 0.0 }) + r.random_range(-1.0f32..1.0))
                .collect()
        })
        .collect()
}
