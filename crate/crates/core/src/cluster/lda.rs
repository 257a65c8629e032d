//! Latent Dirichlet allocation by collapsed Gibbs sampling.

use rand::Rng;

use crate::error::{Error, Result};
use crate::ngrams::SparseCounts;
use crate::rng::{self, SeededRng};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LdaConfig {
    /// Document–topic prior; `None` means `1/k`.
    pub alpha: Option<f64>,
    /// Topic–word prior; `None` means `1/k`.
    pub beta: Option<f64>,
    pub sweeps: usize,
}

impl Default for LdaConfig {
    fn default() -> Self {
        LdaConfig {
            alpha: None,
            beta: None,
            sweeps: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LdaModel {
    pub k: usize,
    pub vocab_size: usize,
    pub alpha: f64,
    pub beta: f64,
    /// Row-major `k × vocab_size`.
    pub topic_word: Vec<u64>,
    pub sweeps: usize,
}

impl LdaModel {
    pub fn total_count(&self) -> u64 {
        self.topic_word.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LdaFit {
    pub model: LdaModel,
    /// Argmax topic per document under the final counts.
    pub labels: Vec<usize>,
    /// Documents with no in-vocabulary tokens; their label is a seeded
    /// uniform draw.
    pub empty_docs: Vec<usize>,
}

/// Sampler state. Exposed so callers can inspect counts between sweeps.
pub struct LdaSampler {
    k: usize,
    vocab_size: usize,
    alpha: f64,
    beta: f64,
    docs: Vec<Vec<u32>>,
    assignments: Vec<Vec<u32>>,
    doc_topic: Vec<u64>,
    topic_word: Vec<u64>,
    topic_totals: Vec<u64>,
    rng: SeededRng,
    sweeps_done: usize,
    weights: Vec<f64>,
}

impl LdaSampler {
    pub fn new(
        docs: &[SparseCounts],
        vocab_size: usize,
        k: usize,
        seed: u64,
        cfg: &LdaConfig,
    ) -> Result<Self> {
        if k == 0 {
            return Err(Error::invalid("LDA needs at least one topic"));
        }
        if vocab_size == 0 {
            return Err(Error::DegenerateVocabulary("empty vocabulary".into()));
        }
        let alpha = cfg.alpha.unwrap_or(1.0 / k as f64);
        let beta = cfg.beta.unwrap_or(1.0 / k as f64);
        if !(alpha > 0.0 && beta > 0.0) {
            return Err(Error::invalid("LDA priors must be positive"));
        }
        let mut tokens = Vec::with_capacity(docs.len());
        for d in docs {
            let mut t = Vec::with_capacity(d.total() as usize);
            for &(col, count) in &d.entries {
                if col as usize >= vocab_size {
                    return Err(Error::invalid(format!(
                        "column {col} outside vocabulary of {vocab_size}"
                    )));
                }
                t.extend(std::iter::repeat_n(col, count as usize));
            }
            tokens.push(t);
        }

        let mut rng = rng::stream(seed, "lda");
        let mut doc_topic = vec![0u64; docs.len() * k];
        let mut topic_word = vec![0u64; k * vocab_size];
        let mut topic_totals = vec![0u64; k];
        let mut assignments = Vec::with_capacity(tokens.len());
        for (d, words) in tokens.iter().enumerate() {
            let z: Vec<u32> = words
                .iter()
                .map(|_| rng.random_range(0..k as u32))
                .collect();
            for (&w, &t) in words.iter().zip(&z) {
                doc_topic[d * k + t as usize] += 1;
                topic_word[t as usize * vocab_size + w as usize] += 1;
                topic_totals[t as usize] += 1;
            }
            assignments.push(z);
        }
        Ok(LdaSampler {
            k,
            vocab_size,
            alpha,
            beta,
            docs: tokens,
            assignments,
            doc_topic,
            topic_word,
            topic_totals,
            rng,
            sweeps_done: 0,
            weights: vec![0.0; k],
        })
    }

    /// One full pass resampling every token's topic from its collapsed
    /// conditional `(n_dk + α)(n_kw + β) / (n_k + Vβ)`.
    pub fn sweep(&mut self) {
        let (k, v) = (self.k, self.vocab_size);
        let v_beta = v as f64 * self.beta;
        for d in 0..self.docs.len() {
            for i in 0..self.docs[d].len() {
                let w = self.docs[d][i] as usize;
                let old = self.assignments[d][i] as usize;
                self.doc_topic[d * k + old] -= 1;
                self.topic_word[old * v + w] -= 1;
                self.topic_totals[old] -= 1;

                let mut total = 0.0;
                for t in 0..k {
                    let p = (self.doc_topic[d * k + t] as f64 + self.alpha)
                        * (self.topic_word[t * v + w] as f64 + self.beta)
                        / (self.topic_totals[t] as f64 + v_beta);
                    total += p;
                    self.weights[t] = total;
                }
                let u = self.rng.random::<f64>() * total;
                let new = self.weights.iter().position(|&c| u < c).unwrap_or(k - 1);

                self.assignments[d][i] = new as u32;
                self.doc_topic[d * k + new] += 1;
                self.topic_word[new * v + w] += 1;
                self.topic_totals[new] += 1;
            }
        }
        self.sweeps_done += 1;
    }

    pub fn token_count(&self) -> u64 {
        self.docs.iter().map(|d| d.len() as u64).sum()
    }

    pub fn topic_word_total(&self) -> u64 {
        self.topic_word.iter().sum()
    }

    pub fn doc_topic_total(&self) -> u64 {
        self.doc_topic.iter().sum()
    }

    pub fn sweeps_done(&self) -> usize {
        self.sweeps_done
    }

    /// Argmax topic per document; ties go to the lowest topic index. Empty
    /// documents draw a uniform topic from a dedicated stream.
    pub fn labels(&self, seed: u64) -> (Vec<usize>, Vec<usize>) {
        let k = self.k;
        let mut fill = rng::stream(seed, "lda-empty-docs");
        let mut empty = Vec::new();
        let labels = (0..self.docs.len())
            .map(|d| {
                if self.docs[d].is_empty() {
                    empty.push(d);
                    return fill.random_range(0..k);
                }
                let row = &self.doc_topic[d * k..(d + 1) * k];
                let mut best = 0;
                for (t, &c) in row.iter().enumerate() {
                    if c > row[best] {
                        best = t;
                    }
                }
                best
            })
            .collect();
        (labels, empty)
    }

    pub fn model(&self) -> LdaModel {
        LdaModel {
            k: self.k,
            vocab_size: self.vocab_size,
            alpha: self.alpha,
            beta: self.beta,
            topic_word: self.topic_word.clone(),
            sweeps: self.sweeps_done,
        }
    }
}

pub fn fit_lda(
    docs: &[SparseCounts],
    vocab_size: usize,
    k: usize,
    seed: u64,
    cfg: &LdaConfig,
) -> Result<LdaFit> {
    let mut sampler = LdaSampler::new(docs, vocab_size, k, seed, cfg)?;
    for _ in 0..cfg.sweeps {
        sampler.sweep();
    }
    let (labels, empty_docs) = sampler.labels(seed);
    if !empty_docs.is_empty() {
        log::warn!(
            "{} documents without in-vocabulary n-grams labelled at random",
            empty_docs.len()
        );
    }
    Ok(LdaFit {
        model: sampler.model(),
        labels,
        empty_docs,
    })
}
