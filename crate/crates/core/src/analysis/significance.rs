use rand::Rng;
use rayon::prelude::*;

use super::scoring::{sentence_scores, AttachmentScore, DeprelMatch};
use crate::corpus::Sentence;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SignificanceResult {
    pub p_value: f64,
    pub resamples: usize,
    pub adjusted_alpha: f64,
    pub significant: bool,
}

/// One-sided test that B scores higher than A, resampling per-sentence LAS
/// differences `B − A` with replacement. `p` is the fraction of resamples
/// whose mean difference is not positive.
pub fn sign_test_from_differences(
    diffs: &[f64],
    resamples: usize,
    seed: u64,
) -> Result<SignificanceResult> {
    if diffs.is_empty() {
        return Err(Error::invalid("significance test over zero sentences"));
    }
    if resamples == 0 {
        return Err(Error::invalid("at least one resample is needed"));
    }
    let n = diffs.len();
    // Per-sentence LAS values are rounded ratios, so exact ties can land a hair off zero.
    let tie = 1e-9 * n as f64;
    let not_better: usize = (0..resamples)
        .into_par_iter()
        .map(|r| {
            let mut g = rng::indexed_stream(seed, "sign-test", r as u64);
            let sum: f64 = (0..n).map(|_| diffs[g.random_range(0..n)]).sum();
            usize::from(sum <= tie)
        })
        .sum();
    let p_value = not_better as f64 / resamples as f64;
    Ok(SignificanceResult {
        p_value,
        resamples,
        adjusted_alpha: 0.05,
        significant: p_value < 0.05,
    })
}

pub fn paired_sign_test(
    gold: &[Sentence],
    pred_a: &[Sentence],
    pred_b: &[Sentence],
    resamples: usize,
    seed: u64,
    mode: DeprelMatch,
) -> Result<SignificanceResult> {
    let a = sentence_scores(gold, pred_a, mode)?;
    let b = sentence_scores(gold, pred_b, mode)?;
    let diffs: Vec<f64> = a.iter().zip(&b).map(|(a, b)| b.las() - a.las()).collect();
    sign_test_from_differences(&diffs, resamples, seed)
}

pub fn bonferroni(p_value: f64, comparisons: usize, alpha: f64) -> SignificanceResult {
    assert!(comparisons >= 1, "Bonferroni needs at least one comparison");
    let adjusted_alpha = alpha / comparisons as f64;
    SignificanceResult {
        p_value,
        resamples: 0,
        adjusted_alpha,
        significant: p_value < adjusted_alpha,
    }
}

/// Arithmetic mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    assert!(!values.is_empty(), "mean of no values");
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeedSummary {
    pub las_mean: f64,
    pub las_std: f64,
    pub uas_mean: f64,
    pub uas_std: f64,
}

pub fn aggregate_seeds(scores: &[AttachmentScore]) -> SeedSummary {
    let (las_mean, las_std) = mean_std(&scores.iter().map(|s| s.las).collect::<Vec<_>>());
    let (uas_mean, uas_std) = mean_std(&scores.iter().map(|s| s.uas).collect::<Vec<_>>());
    SeedSummary {
        las_mean,
        las_std,
        uas_mean,
        uas_std,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// P(Σ of n draws ≤ 0) by convolving the empirical distribution of
    /// integer differences with itself n times.
    fn exhaustive(diffs: &[i64]) -> f64 {
        let n = diffs.len();
        let lo = *diffs.iter().min().unwrap();
        let hi = *diffs.iter().max().unwrap();
        let width = (hi - lo) as usize;
        let mut step = vec![0.0; width + 1];
        for &d in diffs {
            step[(d - lo) as usize] += 1.0 / n as f64;
        }
        let mut dist = vec![1.0];
        for _ in 0..n {
            let mut next = vec![0.0; dist.len() + width];
            for (i, &p) in dist.iter().enumerate() {
                for (j, &q) in step.iter().enumerate() {
                    next[i + j] += p * q;
                }
            }
            dist = next;
        }
        // Index i corresponds to sum = i + n·lo.
        dist.iter()
            .enumerate()
            .filter(|(i, _)| *i as i64 + n as i64 * lo <= 0)
            .map(|(_, p)| p)
            .sum()
    }

    #[test]
    fn boundaries() {
        assert_eq!(
            sign_test_from_differences(&[0.0; 12], 500, 41)
                .unwrap()
                .p_value,
            1.0
        );
        assert_eq!(
            sign_test_from_differences(&[10.0, 20.0, 5.0], 500, 41)
                .unwrap()
                .p_value,
            0.0
        );
        assert!(sign_test_from_differences(&[], 10, 41).is_err());
    }

    #[test]
    fn matches_exhaustive_oracle() {
        // Differences of 10-token sentences are multiples of 10 LAS points.
        let units: [i64; 20] = [
            1, 0, 2, -1, 0, 1, -2, 1, 0, 3, -1, 0, 1, 0, -1, 2, 0, -3, 1, 0,
        ];
        let exact = exhaustive(&units);
        let diffs: Vec<f64> = units.iter().map(|&u| 10.0 * u as f64).collect();
        let got = sign_test_from_differences(&diffs, 10_000, 41).unwrap();
        assert!(
            (got.p_value - exact).abs() <= 0.02,
            "{} vs {exact}",
            got.p_value
        );
        assert_eq!(got, sign_test_from_differences(&diffs, 10_000, 41).unwrap());
    }

    #[test]
    fn monotone_in_wins() {
        let mut prev = 1.0;
        for wins in 0..8 {
            let mut d = vec![-10.0; 4];
            d.extend(std::iter::repeat_n(10.0, wins));
            d.extend(std::iter::repeat_n(0.0, 8 - wins));
            let p = sign_test_from_differences(&d, 4000, 41).unwrap().p_value;
            assert!(p <= prev + 1e-12, "wins {wins}: {p} > {prev}");
            prev = p;
        }
    }

    #[test]
    fn bonferroni_arithmetic() {
        let r = bonferroni(0.01, 4, 0.05);
        assert_eq!(r.adjusted_alpha, 0.0125);
        assert!(r.significant);
        assert!(bonferroni(0.04, 1, 0.05).significant);
        let r = bonferroni(0.02, 3, 0.05);
        assert!((r.adjusted_alpha - 0.016_666_666_666_666_67).abs() < 1e-15);
        assert!(!r.significant);
    }

    #[test]
    fn seed_aggregation() {
        let (m, s) = mean_std(&[10.0, 20.0, 30.0]);
        assert_eq!(m, 20.0);
        assert!((s - 8.164_965_809_277_26).abs() < 1e-12);
        assert_eq!(mean_std(&[42.0]), (42.0, 0.0));
        let (m2, s2) = mean_std(&[30.0, 10.0, 20.0]);
        assert_eq!((m2, s2), (m, s));
    }
}
