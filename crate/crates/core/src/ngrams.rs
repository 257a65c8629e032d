//! Character n-gram bags with document-frequency filtering, for LDA.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use crate::error::{Error, Result};

pub const DEFAULT_N_MIN: usize = 3;
pub const DEFAULT_N_MAX: usize = 6;
pub const DEFAULT_MIN_DF: usize = 2;
pub const DEFAULT_MAX_DF_RATIO: f64 = 0.30;

/// Every contiguous substring of `n_min..=n_max` Unicode scalar values, with
/// multiplicities. Case and whitespace are kept as-is.
pub fn extract_ngrams(text: &str, n_min: usize, n_max: usize) -> BTreeMap<String, u32> {
    let chars: Vec<char> = text.chars().collect();
    let mut bag = BTreeMap::new();
    for n in n_min.max(1)..=n_max {
        for w in chars.windows(n) {
            *bag.entry(w.iter().collect::<String>()).or_insert(0) += 1;
        }
    }
    bag
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VocabConfig {
    pub n_min: usize,
    pub n_max: usize,
    pub min_df: usize,
    pub max_df_ratio: f64,
}

impl Default for VocabConfig {
    fn default() -> Self {
        VocabConfig {
            n_min: DEFAULT_N_MIN,
            n_max: DEFAULT_N_MAX,
            min_df: DEFAULT_MIN_DF,
            max_df_ratio: DEFAULT_MAX_DF_RATIO,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NgramVocab {
    grams: BTreeMap<String, u32>,
    df: Vec<usize>,
    pub config: VocabConfig,
    pub corpus_doc_count: usize,
}

/// Sparse bag of in-vocabulary n-grams for one document.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct SparseCounts {
    pub doc: String,
    /// `(column, count)`, columns strictly increasing, counts ≥ 1.
    pub entries: Vec<(u32, u32)>,
}

impl SparseCounts {
    pub fn total(&self) -> u64 {
        self.entries.iter().map(|&(_, c)| u64::from(c)).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

impl NgramVocab {
    /// Fits a vocabulary over `texts`. Document frequency is per-text presence;
    /// a gram survives if `min_df ≤ df ≤ ⌊max_df_ratio · n_docs⌋`. Columns are
    /// assigned in lexicographic gram order.
    pub fn build<S: AsRef<str>>(texts: &[S], config: VocabConfig) -> Result<Self> {
        if texts.is_empty() {
            return Err(Error::invalid(
                "cannot build a vocabulary from zero sentences",
            ));
        }
        let mut df: BTreeMap<String, usize> = BTreeMap::new();
        for text in texts {
            let present: BTreeSet<String> =
                extract_ngrams(text.as_ref(), config.n_min, config.n_max)
                    .into_keys()
                    .collect();
            for gram in present {
                *df.entry(gram).or_insert(0) += 1;
            }
        }
        let max_df = (config.max_df_ratio * texts.len() as f64).floor() as usize;
        let kept: Vec<(String, usize)> = df
            .into_iter()
            .filter(|&(_, d)| d >= config.min_df && d <= max_df)
            .collect();
        if kept.is_empty() {
            return Err(Error::DegenerateVocabulary(format!(
                "no n-gram occurs in between {} and {max_df} of {} sentences",
                config.min_df,
                texts.len()
            )));
        }
        let mut grams = BTreeMap::new();
        let mut dfs = Vec::with_capacity(kept.len());
        for (i, (gram, d)) in kept.into_iter().enumerate() {
            grams.insert(gram, i as u32);
            dfs.push(d);
        }
        Ok(NgramVocab {
            grams,
            df: dfs,
            config,
            corpus_doc_count: texts.len(),
        })
    }

    pub fn len(&self) -> usize {
        self.grams.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grams.is_empty()
    }

    pub fn column(&self, gram: &str) -> Option<u32> {
        self.grams.get(gram).copied()
    }

    pub fn df(&self, column: u32) -> usize {
        self.df[column as usize]
    }

    /// Grams in column order.
    pub fn grams(&self) -> impl Iterator<Item = &str> {
        self.grams.keys().map(String::as_str)
    }

    /// Counts of in-vocabulary grams; everything else is dropped.
    pub fn vectorize(&self, doc: &str, text: &str) -> SparseCounts {
        let bag = extract_ngrams(text, self.config.n_min, self.config.n_max);
        let mut entries: Vec<(u32, u32)> = bag
            .into_iter()
            .filter_map(|(g, c)| self.column(&g).map(|col| (col, c)))
            .collect();
        entries.sort_unstable();
        SparseCounts {
            doc: doc.to_string(),
            entries,
        }
    }

    /// Debug dump: `gram \t df \t column`, with tabs, newlines and
    /// backslashes in grams escaped.
    pub fn to_tsv(&self) -> String {
        let mut out = String::from("gram\tdf\tcolumn\n");
        for (gram, &col) in &self.grams {
            let escaped = gram
                .replace('\\', "\\\\")
                .replace('\t', "\\t")
                .replace('\n', "\\n");
            let _ = writeln!(out, "{escaped}\t{}\t{col}", self.df[col as usize]);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Brute-force substring enumeration over byte-free char indices.
    fn oracle_bag(text: &str, n_min: usize, n_max: usize) -> BTreeMap<String, u32> {
        let chars: Vec<char> = text.chars().collect();
        let mut bag = BTreeMap::new();
        for start in 0..chars.len() {
            for end in start + 1..=chars.len() {
                let len = end - start;
                if len >= n_min && len <= n_max {
                    let s: String = chars[start..end].iter().collect();
                    *bag.entry(s).or_insert(0) += 1;
                }
            }
        }
        bag
    }

    #[test]
    fn extraction_cases() {
        assert!(extract_ngrams("ab", 3, 6).is_empty());
        let abcd = extract_ngrams("abcd", 3, 6);
        assert_eq!(abcd.keys().collect::<Vec<_>>(), ["abc", "abcd", "bcd"]);
        let banana = extract_ngrams("banana", 3, 6);
        assert_eq!(banana.values().sum::<u32>(), 10);
        assert_eq!(banana["ana"], 2);
        assert_eq!(banana, oracle_bag("banana", 3, 6));
        let mixed = "Ünï cödé, ok";
        assert_eq!(extract_ngrams(mixed, 3, 6), oracle_bag(mixed, 3, 6));
    }

    fn ten_docs() -> Vec<String> {
        // "qqq" in 1 doc, "zzz" in 4 docs, "ppp" in 3 docs.
        let mut docs: Vec<String> = (0..10).map(|i| format!("d{i}")).collect();
        docs[0].push_str(" qqq");
        for d in docs.iter_mut().take(4) {
            d.push_str(" zzz");
        }
        for d in docs.iter_mut().skip(5).take(3) {
            d.push_str(" ppp");
        }
        docs
    }

    #[test]
    fn df_filters() {
        let vocab = NgramVocab::build(&ten_docs(), VocabConfig::default()).unwrap();
        assert!(vocab.column("qqq").is_none(), "min_df");
        assert!(vocab.column("zzz").is_none(), "4 > floor(0.3 * 10)");
        let ppp = vocab.column("ppp").unwrap();
        assert_eq!(vocab.df(ppp), 3);
    }

    #[test]
    fn degenerate_vocab() {
        let r = NgramVocab::build(&["abc", "xyz"], VocabConfig::default());
        assert!(matches!(r, Err(Error::DegenerateVocabulary(_))));
        assert!(NgramVocab::build::<&str>(&[], VocabConfig::default()).is_err());
    }

    #[test]
    fn vectorize_drops_oov() {
        let vocab = NgramVocab::build(&ten_docs(), VocabConfig::default()).unwrap();
        assert!(vocab.vectorize("x", "ab").is_empty());
        let v = vocab.vectorize("x", "ppp ppp");
        // Hand enumeration over 3..6-grams of "ppp ppp" restricted to the vocab.
        let want: Vec<(u32, u32)> = [("ppp", 2), (" pp", 1), (" ppp", 1)]
            .iter()
            .filter_map(|&(g, c)| vocab.column(g).map(|col| (col, c)))
            .collect::<BTreeMap<_, _>>()
            .into_iter()
            .collect();
        assert_eq!(v.entries, want);
        assert!(v.entries.windows(2).all(|w| w[0].0 < w[1].0));
    }

    #[test]
    fn tsv_escapes() {
        let vocab = NgramVocab::build(
            &["a\tb c", "a\tb d", "x", "y", "z", "w", "v"],
            VocabConfig::default(),
        )
        .unwrap();
        let tsv = vocab.to_tsv();
        assert!(tsv.contains("a\\tb\t2\t"));
    }
}
