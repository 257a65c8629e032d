//! Per-treebank clustering into as many clusters as the treebank's metadata
//! lists genres, by Gaussian mixtures over embeddings or LDA over
//! character n-grams. Either way cluster means live in embedding space.

pub mod gmm;
pub mod lda;

pub use gmm::{fit_gmm, gmm_assign, CovarianceKind, GmmConfig, GmmModel};
pub use lda::{fit_lda, LdaConfig, LdaFit, LdaModel, LdaSampler};

use std::collections::HashMap;
use std::fmt::{self, Write as _};
use std::str::FromStr;

use crate::corpus::{Treebank, TreebankMeta};
use crate::embed::{mean_embedding, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::ngrams::{NgramVocab, VocabConfig};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    Gmm,
    Lda,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Gmm => "gmm",
            Method::Lda => "lda",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gmm" => Ok(Method::Gmm),
            "lda" => Ok(Method::Lda),
            other => Err(Error::invalid(format!(
                "unknown clustering method `{other}`"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ClusterConfig {
    pub gmm: GmmConfig,
    pub lda: LdaConfig,
    pub vocab: VocabConfig,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterAssignment {
    pub treebank: String,
    pub method: Method,
    pub k: usize,
    /// `(global_id, cluster)` in treebank order.
    pub labels: Vec<(String, usize)>,
    /// Mean embedding of each cluster's members; `None` for empty clusters.
    pub cluster_means: Vec<Option<Vec<f32>>>,
    /// Sentences labelled without a signal (LDA documents with no
    /// in-vocabulary n-grams).
    pub flagged: Vec<String>,
}

impl ClusterAssignment {
    /// Computes cluster means from `embeddings` for the given labels.
    pub fn from_labels(
        treebank: &str,
        method: Method,
        k: usize,
        labels: Vec<(String, usize)>,
        embeddings: &EmbeddingMatrix,
    ) -> Result<Self> {
        let mut members: Vec<Vec<&str>> = vec![Vec::new(); k];
        for (id, c) in &labels {
            if *c >= k {
                return Err(Error::invalid(format!(
                    "cluster {c} outside 0..{k} for {id}"
                )));
            }
            members[*c].push(id);
        }
        let cluster_means = members
            .iter()
            .map(|m| {
                if m.is_empty() {
                    Ok(None)
                } else {
                    mean_embedding(embeddings, m).map(Some)
                }
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(ClusterAssignment {
            treebank: treebank.to_string(),
            method,
            k,
            labels,
            cluster_means,
            flagged: Vec::new(),
        })
    }

    pub fn members(&self, cluster: usize) -> Vec<&str> {
        self.labels
            .iter()
            .filter(|(_, c)| *c == cluster)
            .map(|(id, _)| id.as_str())
            .collect()
    }

    pub fn cluster_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.k];
        for (_, c) in &self.labels {
            sizes[*c] += 1;
        }
        sizes
    }

    /// `global_id \t method \t cluster` rows after `#treebank` and `#k`
    /// header lines.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "#treebank\t{}", self.treebank);
        let _ = writeln!(out, "#k\t{}", self.k);
        for (id, c) in &self.labels {
            let _ = writeln!(out, "{id}\t{}\t{c}", self.method);
        }
        out
    }

    /// Non-empty cluster means as an embedding matrix with ids `cluster-<i>`.
    pub fn means_matrix(&self, dim: usize) -> Result<EmbeddingMatrix> {
        let rows = self
            .cluster_means
            .iter()
            .enumerate()
            .filter_map(|(i, m)| m.as_ref().map(|m| (format!("cluster-{i}"), m.clone())))
            .collect();
        EmbeddingMatrix::from_rows(dim, rows)
    }

    /// Parses a dump written by [`to_tsv`](Self::to_tsv) plus its means sidecar.
    pub fn from_dump(tsv: &str, means: &EmbeddingMatrix) -> Result<Self> {
        let mut treebank = None;
        let mut k = None;
        let mut method = None;
        let mut labels = Vec::new();
        for (i, raw) in tsv.lines().enumerate() {
            let line = i + 1;
            if let Some(rest) = raw.strip_prefix('#') {
                match rest.split_once('\t') {
                    Some(("treebank", v)) => treebank = Some(v.to_string()),
                    Some(("k", v)) => {
                        k = Some(
                            v.parse::<usize>()
                                .map_err(|_| Error::parse(line, "bad #k"))?,
                        )
                    }
                    _ => {}
                }
                continue;
            }
            if raw.is_empty() {
                continue;
            }
            let cols: Vec<&str> = raw.split('\t').collect();
            if cols.len() != 3 {
                return Err(Error::parse(line, "expected global_id, method, cluster"));
            }
            let m: Method = cols[1]
                .parse()
                .map_err(|e: Error| Error::parse(line, e.to_string()))?;
            if method.is_some_and(|prev| prev != m) {
                return Err(Error::parse(line, "mixed methods in one dump"));
            }
            method = Some(m);
            let c: usize = cols[2]
                .parse()
                .map_err(|_| Error::parse(line, "bad cluster index"))?;
            labels.push((cols[0].to_string(), c));
        }
        let treebank = treebank.ok_or_else(|| Error::format("dump lacks #treebank"))?;
        let k = k.ok_or_else(|| Error::format("dump lacks #k"))?;
        let method = method.unwrap_or(Method::Gmm);
        let mut cluster_means = vec![None; k];
        for (id, row) in means.rows() {
            let c: usize = id
                .strip_prefix("cluster-")
                .and_then(|c| c.parse().ok())
                .filter(|&c| c < k)
                .ok_or_else(|| Error::format(format!("bad cluster mean id {id}")))?;
            cluster_means[c] = Some(row.to_vec());
        }
        if labels.iter().any(|(_, c)| *c >= k) {
            return Err(Error::format("cluster label exceeds #k"));
        }
        Ok(ClusterAssignment {
            treebank,
            method,
            k,
            labels,
            cluster_means,
            flagged: Vec::new(),
        })
    }
}

/// Clusters one treebank into `|meta.genres|` clusters.
///
/// A treebank with fewer sentences than genres puts each sentence in its own
/// cluster and leaves the rest empty. GMM sees the sentence embeddings; LDA
/// sees character n-gram bags from a vocabulary fitted on this treebank alone.
pub fn cluster_treebank(
    tb: &Treebank,
    meta: &TreebankMeta,
    method: Method,
    embeddings: &EmbeddingMatrix,
    seed: u64,
    cfg: &ClusterConfig,
) -> Result<ClusterAssignment> {
    let k = meta.genres.len();
    let ids: Vec<&str> = tb.sentences().map(|s| s.global_id.as_str()).collect();
    let tb_seed = rng::derive_seed(seed, &tb.code);
    let mut flagged = Vec::new();

    let labels: Vec<usize> = if ids.len() < k {
        log::warn!(
            "{}: {} sentences for {k} genres, one sentence per cluster",
            tb.code,
            ids.len()
        );
        (0..ids.len()).collect()
    } else if k == 1 {
        vec![0; ids.len()]
    } else {
        match method {
            Method::Gmm => {
                let rows = ids
                    .iter()
                    .map(|id| embeddings.require(id))
                    .collect::<Result<Vec<_>>>()?;
                let model = fit_gmm(&rows, k, tb_seed, &cfg.gmm)?;
                gmm_assign(&model, &rows)?.0
            }
            Method::Lda => {
                let texts: Vec<&str> = tb.sentences().map(|s| s.text.as_str()).collect();
                let vocab = NgramVocab::build(&texts, cfg.vocab)?;
                let docs: Vec<_> = tb
                    .sentences()
                    .map(|s| vocab.vectorize(&s.global_id, &s.text))
                    .collect();
                let fit = fit_lda(&docs, vocab.len(), k, tb_seed, &cfg.lda)?;
                flagged = fit.empty_docs.iter().map(|&d| ids[d].to_string()).collect();
                fit.labels
            }
        }
    };

    let labels = ids.iter().map(|id| id.to_string()).zip(labels).collect();
    let mut assignment =
        ClusterAssignment::from_labels(&tb.code, method, k.max(1), labels, embeddings)
            .map_err(|e| e.context(tb.code.clone()))?;
    assignment.flagged = flagged;
    Ok(assignment)
}

/// Adjusted Rand index between two labelings of the same items.
pub fn adjusted_rand_index(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len(), "labelings must have equal length");
    let n = a.len() as f64;
    let comb2 = |x: f64| x * (x - 1.0) / 2.0;
    let mut table: HashMap<(usize, usize), f64> = HashMap::new();
    let mut rows: HashMap<usize, f64> = HashMap::new();
    let mut cols: HashMap<usize, f64> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *table.entry((x, y)).or_default() += 1.0;
        *rows.entry(x).or_default() += 1.0;
        *cols.entry(y).or_default() += 1.0;
    }
    let index: f64 = table.values().map(|&v| comb2(v)).sum();
    let sum_a: f64 = rows.values().map(|&v| comb2(v)).sum();
    let sum_b: f64 = cols.values().map(|&v| comb2(v)).sum();
    let expected = sum_a * sum_b / comb2(n);
    let max = (sum_a + sum_b) / 2.0;
    if max == expected {
        return 1.0;
    }
    (index - expected) / (max - expected)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{Sentence, Token};
    use crate::embed::fallback_featurize;
    use crate::genre::{Genre, GenreSet};
    use rand::Rng;
    use std::collections::BTreeMap;

    #[test]
    fn ari_reference_values() {
        assert_eq!(adjusted_rand_index(&[0, 0, 1, 1], &[1, 1, 0, 0]), 1.0);
        // Hand-computed: contingency [[2,1],[0,1]]... index 1, sums 4/2... see below.
        let ari = adjusted_rand_index(&[0, 0, 0, 1, 1, 1], &[0, 0, 1, 1, 2, 2]);
        // index = 1+0+1 = 2 (pairs), sum_a = 3+3 = 6, sum_b = 1+1+1 = 3, C(6,2) = 15
        // expected = 18/15 = 1.2, max = 4.5 → (2-1.2)/(4.5-1.2)
        assert!((ari - 0.8 / 3.3).abs() < 1e-12);
    }

    fn sentence(code: &str, i: usize, text: &str) -> Sentence {
        let tokens: Vec<Token> = text
            .split(' ')
            .enumerate()
            .map(|(j, w)| {
                Token::new(
                    j as u32 + 1,
                    w,
                    j as u32,
                    if j == 0 { "root" } else { "dep" },
                )
            })
            .collect();
        Sentence {
            global_id: format!("{code}/test/{i}"),
            sent_id: i.to_string(),
            comments: vec![],
            tokens,
            extra: vec![],
            text: text.to_string(),
        }
    }

    fn words(lexicon: &[&str], r: &mut impl Rng, n: usize) -> String {
        (0..n)
            .map(|_| lexicon[r.random_range(0..lexicon.len())])
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Two planted genres with disjoint lexicons, so embeddings and n-grams agree.
    fn two_genre_treebank() -> (Treebank, TreebankMeta, Vec<usize>) {
        let code = "UD_Synth-Two";
        let a = ["market", "shares", "profit", "bank", "trade", "stocks"];
        let b = ["ZEBRA", "KOALA", "OTTER", "LLAMA", "BISON", "HYENA"];
        let mut r = rng::stream(11, "two-genre");
        let mut sents = Vec::new();
        let mut truth = Vec::new();
        for i in 0..60 {
            let (alpha, g) = if i % 3 == 0 { (&b[..], 1) } else { (&a[..], 0) };
            sents.push(sentence(code, i, &words(alpha, &mut r, 6)));
            truth.push(g);
        }
        let tb = Treebank {
            code: code.into(),
            splits: BTreeMap::from([("test".to_string(), sents)]),
        };
        let meta = TreebankMeta {
            code: code.into(),
            language: "Synth".into(),
            genres: [Genre::News, Genre::Wiki].into_iter().collect::<GenreSet>(),
            splits: BTreeMap::new(),
        };
        (tb, meta, truth)
    }

    #[test]
    fn gmm_and_lda_recover_the_plant() {
        let (tb, meta, truth) = two_genre_treebank();
        let emb = fallback_featurize(tb.sentences(), 32, 41).unwrap();
        let cfg = ClusterConfig {
            gmm: GmmConfig {
                covariance: CovarianceKind::Diagonal,
                ..GmmConfig::default()
            },
            ..ClusterConfig::default()
        };
        let g = cluster_treebank(&tb, &meta, Method::Gmm, &emb, 41, &cfg).unwrap();
        let l = cluster_treebank(&tb, &meta, Method::Lda, &emb, 41, &cfg).unwrap();
        let gl: Vec<usize> = g.labels.iter().map(|(_, c)| *c).collect();
        let ll: Vec<usize> = l.labels.iter().map(|(_, c)| *c).collect();
        assert_eq!(adjusted_rand_index(&gl, &truth), 1.0);
        assert_eq!(adjusted_rand_index(&ll, &gl), 1.0);
        for a in [&g, &l] {
            for c in 0..2 {
                let members = a.members(c);
                assert_eq!(
                    a.cluster_means[c].as_ref().unwrap(),
                    &mean_embedding(&emb, &members).unwrap()
                );
            }
        }
    }

    #[test]
    fn single_genre_and_tiny_treebanks() {
        let (tb, mut meta, _) = two_genre_treebank();
        let emb = fallback_featurize(tb.sentences(), 16, 41).unwrap();
        meta.genres = GenreSet::single(Genre::News);
        let a =
            cluster_treebank(&tb, &meta, Method::Lda, &emb, 41, &ClusterConfig::default()).unwrap();
        assert_eq!(a.k, 1);
        assert_eq!(a.cluster_sizes(), vec![60]);

        let mut tiny = tb.clone();
        tiny.splits.get_mut("test").unwrap().truncate(2);
        meta.genres = [Genre::News, Genre::Wiki, Genre::Web].into_iter().collect();
        let a = cluster_treebank(
            &tiny,
            &meta,
            Method::Gmm,
            &emb,
            41,
            &ClusterConfig::default(),
        )
        .unwrap();
        assert_eq!(a.cluster_sizes(), vec![1, 1, 0]);
        assert!(a.cluster_means[2].is_none());
    }

    #[test]
    fn dump_round_trip() {
        let (tb, meta, _) = two_genre_treebank();
        let emb = fallback_featurize(tb.sentences(), 16, 41).unwrap();
        let a =
            cluster_treebank(&tb, &meta, Method::Lda, &emb, 41, &ClusterConfig::default()).unwrap();
        let means = a.means_matrix(16).unwrap();
        let back = ClusterAssignment::from_dump(&a.to_tsv(), &means).unwrap();
        assert_eq!(back.labels, a.labels);
        assert_eq!(back.cluster_means, a.cluster_means);
        assert_eq!(back.method, Method::Lda);
        assert!(ClusterAssignment::from_dump("x\tgmm\t0\n", &means).is_err());
    }
}
