//! Synthetic treebanks with planted genres. Each genre owns a small random
//! lexicon, so sentences of one genre share character n-grams and separate
//! cleanly under the fallback featurizer. Used by tests and benchmarks.

use std::collections::BTreeMap;

use rand::Rng;

use crate::corpus::{Corpus, Sentence, Token, Treebank, TreebankMeta};
use crate::error::Result;
use crate::genre::{Genre, GenreSet};
use crate::rng;

const LEXICON_SIZE: usize = 24;
const WORDS_PER_SENTENCE: usize = 8;

/// The planted lexicon of `genre` under `seed`.
pub fn lexicon(genre: Genre, seed: u64) -> Vec<String> {
    let mut r = rng::stream(seed, &format!("synth-lexicon/{genre}"));
    (0..LEXICON_SIZE)
        .map(|_| {
            let len = r.random_range(5..=8);
            (0..len)
                .map(|_| char::from(b'a' + r.random_range(0..26u8)))
                .collect()
        })
        .collect()
}

/// A sentence with a linear dependency chain over whitespace tokens.
pub fn sentence(code: &str, split: &str, index: usize, text: &str) -> Sentence {
    let tokens = text
        .split(' ')
        .enumerate()
        .map(|(j, w)| {
            let (head, rel) = if j == 0 {
                (0, "root")
            } else {
                (j as u32, "dep")
            };
            Token::new(j as u32 + 1, w, head, rel)
        })
        .collect();
    Sentence {
        global_id: format!("{code}/{split}/{index}"),
        sent_id: index.to_string(),
        comments: vec![format!("# sent_id = {index}"), format!("# text = {text}")],
        tokens,
        extra: vec![],
        text: text.to_string(),
    }
}

/// Blueprint of one synthetic treebank.
#[derive(Debug, Clone)]
pub struct SynthTreebank {
    pub code: String,
    pub language: String,
    /// Planted genres with their sentence counts.
    pub genres: Vec<(Genre, usize)>,
}

impl SynthTreebank {
    pub fn new(code: &str, language: &str, genres: &[(Genre, usize)]) -> Self {
        SynthTreebank {
            code: code.to_string(),
            language: language.to_string(),
            genres: genres.to_vec(),
        }
    }

    /// Builds the treebank as a single `train` split with genres interleaved
    /// in seeded order. Returns the planted genre of every global ID.
    pub fn build(&self, seed: u64) -> (Treebank, TreebankMeta, BTreeMap<String, Genre>) {
        let mut plan: Vec<Genre> = self
            .genres
            .iter()
            .flat_map(|&(g, n)| std::iter::repeat_n(g, n))
            .collect();
        let mut r = rng::stream(seed, &format!("synth-order/{}", self.code));
        let order = rng::permutation(plan.len(), &mut r);
        plan = order.into_iter().map(|i| plan[i]).collect();

        let lexicons: BTreeMap<Genre, Vec<String>> = self
            .genres
            .iter()
            .map(|&(g, _)| (g, lexicon(g, seed)))
            .collect();
        let mut words = rng::stream(seed, &format!("synth-words/{}", self.code));
        let mut truth = BTreeMap::new();
        let sentences: Vec<Sentence> = plan
            .iter()
            .enumerate()
            .map(|(i, g)| {
                let lex = &lexicons[g];
                let text = (0..WORDS_PER_SENTENCE)
                    .map(|_| lex[words.random_range(0..lex.len())].as_str())
                    .collect::<Vec<_>>()
                    .join(" ");
                let s = sentence(&self.code, "train", i, &text);
                truth.insert(s.global_id.clone(), *g);
                s
            })
            .collect();
        let meta = TreebankMeta {
            code: self.code.clone(),
            language: self.language.clone(),
            genres: self.genres.iter().map(|&(g, _)| g).collect::<GenreSet>(),
            splits: BTreeMap::from([("train".to_string(), sentences.len())]),
        };
        let tb = Treebank {
            code: self.code.clone(),
            splits: BTreeMap::from([("train".to_string(), sentences)]),
        };
        (tb, meta, truth)
    }
}

/// Builds a corpus from blueprints, returning the planted genre of every sentence.
pub fn synth_corpus(
    specs: &[SynthTreebank],
    seed: u64,
) -> Result<(Corpus, BTreeMap<String, Genre>)> {
    let mut truth = BTreeMap::new();
    let mut parts = Vec::new();
    for spec in specs {
        let (tb, meta, t) = spec.build(seed);
        truth.extend(t);
        parts.push((tb, meta));
    }
    Ok((Corpus::new(parts, Vec::new())?, truth))
}
