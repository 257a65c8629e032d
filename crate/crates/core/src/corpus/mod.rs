//! In-memory corpus model: treebanks of parsed sentences keyed by code,
//! each paired with its registry metadata.

mod conllu;
mod registry;

pub use conllu::{parse_conllu, write_conllu, ExtraKind, ExtraRow, Sentence, Token};
pub use registry::{
    language_of_code, Registry, TreebankMeta, DEFAULT_EXCLUSIONS, SPLITS, UD27_REGISTRY,
};

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq)]
pub struct Treebank {
    pub code: String,
    /// Split name → sentences in file order.
    pub splits: BTreeMap<String, Vec<Sentence>>,
}

impl Treebank {
    pub fn new(code: impl Into<String>) -> Self {
        Treebank {
            code: code.into(),
            splits: BTreeMap::new(),
        }
    }

    /// Adds a split, qualifying every sentence's global ID.
    pub fn with_split(mut self, split: &str, mut sentences: Vec<Sentence>) -> Self {
        for s in &mut sentences {
            s.qualify(&self.code, split);
        }
        self.splits.insert(split.to_string(), sentences);
        self
    }

    pub fn len(&self) -> usize {
        self.splits.values().map(Vec::len).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All sentences, split by split in name order.
    pub fn sentences(&self) -> impl Iterator<Item = &Sentence> {
        self.splits.values().flatten()
    }

    pub fn split_counts(&self) -> BTreeMap<String, usize> {
        self.splits
            .iter()
            .map(|(k, v)| (k.clone(), v.len()))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CorpusEntry {
    pub treebank: Treebank,
    pub meta: TreebankMeta,
}

/// Treebanks plus metadata. Immutable once built.
#[derive(Debug, Clone, Default)]
pub struct Corpus {
    entries: BTreeMap<String, CorpusEntry>,
    exclusions: BTreeSet<String>,
    index: HashMap<String, (String, String, usize)>,
}

impl Corpus {
    /// Builds a corpus, dropping excluded codes and checking that global IDs
    /// are unique. Split counts in the metadata are replaced by the loaded ones.
    pub fn new(
        treebanks: impl IntoIterator<Item = (Treebank, TreebankMeta)>,
        exclusions: impl IntoIterator<Item = String>,
    ) -> Result<Self> {
        let exclusions: BTreeSet<String> = exclusions.into_iter().collect();
        let mut entries = BTreeMap::new();
        let mut index = HashMap::new();
        for (treebank, mut meta) in treebanks {
            if exclusions.contains(&treebank.code) {
                continue;
            }
            if treebank.code != meta.code {
                return Err(Error::config(format!(
                    "treebank {} paired with metadata for {}",
                    treebank.code, meta.code
                )));
            }
            for (split, sentences) in &treebank.splits {
                for (i, s) in sentences.iter().enumerate() {
                    let prev = index.insert(
                        s.global_id.clone(),
                        (treebank.code.clone(), split.clone(), i),
                    );
                    if prev.is_some() {
                        return Err(Error::invalid(format!(
                            "duplicate global id {}",
                            s.global_id
                        )));
                    }
                }
            }
            meta.splits = treebank.split_counts();
            entries.insert(treebank.code.clone(), CorpusEntry { treebank, meta });
        }
        Ok(Corpus {
            entries,
            exclusions,
            index,
        })
    }

    pub fn get(&self, code: &str) -> Option<&CorpusEntry> {
        self.entries.get(code)
    }

    pub fn entries(&self) -> impl Iterator<Item = &CorpusEntry> {
        self.entries.values()
    }

    pub fn codes(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    pub fn exclusions(&self) -> &BTreeSet<String> {
        &self.exclusions
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn sentence_count(&self) -> usize {
        self.entries.values().map(|e| e.treebank.len()).sum()
    }

    pub fn sentence(&self, global_id: &str) -> Option<&Sentence> {
        let (code, split, i) = self.index.get(global_id)?;
        self.entries.get(code)?.treebank.splits.get(split)?.get(*i)
    }

    /// Treebank code owning a global ID.
    pub fn treebank_of(&self, global_id: &str) -> Option<&str> {
        self.index.get(global_id).map(|(code, _, _)| code.as_str())
    }

    /// Metadata for every treebank in the corpus.
    pub fn registry(&self) -> Registry {
        Registry::from_entries(self.entries.values().map(|e| e.meta.clone()))
    }

    /// Every treebank reduced by [`subsample_treebank`].
    pub fn subsample(&self, cap: usize, seed: u64) -> Result<Corpus> {
        let treebanks = self
            .entries
            .values()
            .map(|e| Ok((subsample_treebank(&e.treebank, cap, seed)?, e.meta.clone())))
            .collect::<Result<Vec<_>>>()?;
        Corpus::new(treebanks, self.exclusions.iter().cloned())
    }
}

fn split_of_file(name: &str) -> Option<&'static str> {
    let stem = name.strip_suffix(".conllu")?;
    let last = stem.rsplit('-').next()?;
    SPLITS.iter().copied().find(|s| *s == last)
}

fn load_treebank(dir: &Path, code: &str) -> Result<Treebank> {
    let mut files: Vec<_> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.extension().is_some_and(|x| x == "conllu"))
        .collect();
    files.sort();
    let mut treebank = Treebank::new(code);
    for path in files {
        let name = path
            .file_name()
            .and_then(|n| n.to_str())
            .unwrap_or_default();
        let split = split_of_file(name)
            .ok_or_else(|| Error::config(format!("cannot tell the split of {}", path.display())))?;
        if treebank.splits.contains_key(split) {
            return Err(Error::config(format!("{code} has two {split} files")));
        }
        let bytes = std::fs::read(&path)?;
        let sentences = parse_conllu(&bytes).map_err(|e| e.context(path.display().to_string()))?;
        treebank = treebank.with_split(split, sentences);
    }
    Ok(treebank)
}

/// Loads every treebank directory under `root`. Each directory must have a
/// registry entry; excluded codes are skipped without being read.
pub fn load_corpus(
    root: &Path,
    registry: &Registry,
    exclusions: &BTreeSet<String>,
) -> Result<Corpus> {
    let mut dirs: Vec<_> = std::fs::read_dir(root)
        .map_err(|e| Error::config(format!("cannot read corpus root {}: {e}", root.display())))?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.is_dir())
        .collect();
    dirs.sort();

    let mut jobs = Vec::new();
    for dir in dirs {
        let code = dir
            .file_name()
            .and_then(|n| n.to_str())
            .ok_or_else(|| Error::config(format!("non-UTF-8 directory name {}", dir.display())))?
            .to_string();
        if exclusions.contains(&code) {
            continue;
        }
        let meta = registry
            .get(&code)
            .ok_or_else(|| {
                Error::config(format!("treebank directory {code} has no registry entry"))
            })?
            .clone();
        jobs.push((dir, code, meta));
    }

    let loaded = jobs
        .into_par_iter()
        .map(|(dir, code, meta)| Ok((load_treebank(&dir, &code)?, meta)))
        .collect::<Result<Vec<_>>>()?;
    Corpus::new(loaded, exclusions.iter().cloned())
}

/// Writes a treebank as `<dir>/<code>/<code>-ud-<split>.conllu` files.
pub fn write_treebank(dir: &Path, treebank: &Treebank) -> Result<()> {
    let tb_dir = dir.join(&treebank.code);
    std::fs::create_dir_all(&tb_dir)?;
    for (split, sentences) in &treebank.splits {
        let path = tb_dir.join(format!("{}-ud-{split}.conllu", treebank.code));
        std::fs::write(path, write_conllu(sentences))?;
    }
    Ok(())
}

/// Reduces each split to at most `cap` sentences.
///
/// One seeded permutation is drawn per split and its first `cap` entries are
/// kept, in their original order. Smaller caps therefore select subsets of
/// larger ones under the same seed.
pub fn subsample_treebank(tb: &Treebank, cap: usize, seed: u64) -> Result<Treebank> {
    if cap == 0 {
        return Err(Error::invalid("subsample cap must be at least 1"));
    }
    let mut out = Treebank::new(tb.code.clone());
    for (split, sentences) in &tb.splits {
        let kept = if sentences.len() <= cap {
            sentences.clone()
        } else {
            let mut rng = rng::stream(seed, &format!("subsample/{}/{split}", tb.code));
            rng::sample_indices(sentences.len(), cap, &mut rng)
                .into_iter()
                .map(|i| sentences[i].clone())
                .collect()
        };
        out.splits.insert(split.clone(), kept);
    }
    Ok(out)
}

/// Seeded disjoint train/dev partition with `|train| = round(ratio · n)`.
/// Both parts keep the input order.
pub fn split_train_dev(
    ids: &[String],
    ratio: f64,
    seed: u64,
) -> Result<(Vec<String>, Vec<String>)> {
    if ids.is_empty() {
        return Err(Error::invalid("cannot split an empty ID list"));
    }
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::invalid(format!(
            "split ratio {ratio} outside (0, 1)"
        )));
    }
    let n_train = (ratio * ids.len() as f64).round() as usize;
    let mut rng = rng::stream(seed, "train-dev");
    let train_idx = rng::sample_indices(ids.len(), n_train, &mut rng);
    let mut is_train = vec![false; ids.len()];
    for i in train_idx {
        is_train[i] = true;
    }
    let (train, dev): (Vec<_>, Vec<_>) = ids.iter().zip(is_train).partition(|(_, t)| *t);
    Ok((
        train.into_iter().map(|(id, _)| id.clone()).collect(),
        dev.into_iter().map(|(id, _)| id.clone()).collect(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::genre::{Genre, GenreSet};

    pub(crate) fn sentence(id: &str, words: &[&str]) -> Sentence {
        let tokens: Vec<Token> = words
            .iter()
            .enumerate()
            .map(|(i, w)| {
                Token::new(
                    i as u32 + 1,
                    w,
                    if i == 0 { 0 } else { 1 },
                    if i == 0 { "root" } else { "dep" },
                )
            })
            .collect();
        Sentence {
            global_id: id.to_string(),
            sent_id: id.to_string(),
            comments: vec![format!("# sent_id = {id}")],
            text: Sentence::reconstruct_text(&tokens),
            tokens,
            extra: Vec::new(),
        }
    }

    fn treebank(code: &str, n: usize) -> Treebank {
        let sents = (0..n)
            .map(|i| sentence(&format!("s{i}"), &["a", "b"]))
            .collect();
        Treebank::new(code).with_split("test", sents)
    }

    fn meta(code: &str, genres: &[Genre]) -> TreebankMeta {
        TreebankMeta {
            code: code.to_string(),
            language: language_of_code(code).unwrap().to_string(),
            genres: genres.iter().copied().collect::<GenreSet>(),
            splits: BTreeMap::new(),
        }
    }

    #[test]
    fn subsample_identity_and_determinism() {
        let tb = treebank("UD_X-A", 5);
        assert_eq!(subsample_treebank(&tb, 20_000, 41).unwrap(), tb);

        let big = treebank("UD_X-B", 300);
        let a = subsample_treebank(&big, 200, 41).unwrap();
        let b = subsample_treebank(&big, 200, 41).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.len(), 200);
        let c = subsample_treebank(&big, 200, 42).unwrap();
        assert_ne!(a, c);
        assert!(subsample_treebank(&big, 0, 41).is_err());
    }

    #[test]
    fn subsample_keeps_file_order_and_nests() {
        let big = treebank("UD_X-B", 100);
        let small = subsample_treebank(&big, 10, 7).unwrap();
        let large = subsample_treebank(&big, 40, 7).unwrap();
        let pos = |s: &Sentence| s.sent_id[1..].parse::<usize>().unwrap();
        let small_pos: Vec<usize> = small.sentences().map(pos).collect();
        assert!(small_pos.windows(2).all(|w| w[0] < w[1]));
        let large_ids: BTreeSet<&str> = large.sentences().map(|s| s.global_id.as_str()).collect();
        assert!(small
            .sentences()
            .all(|s| large_ids.contains(s.global_id.as_str())));
    }

    #[test]
    fn train_dev_sizes() {
        let ids = |n: usize| (0..n).map(|i| format!("id{i}")).collect::<Vec<_>>();
        let (t, d) = split_train_dev(&ids(10), 0.8, 41).unwrap();
        assert_eq!((t.len(), d.len()), (8, 2));
        let (t, d) = split_train_dev(&ids(5), 0.8, 41).unwrap();
        assert_eq!((t.len(), d.len()), (4, 1));
        let all = ids(72_000);
        let (t, d) = split_train_dev(&all, 0.8, 41).unwrap();
        assert_eq!((t.len(), d.len()), (57_600, 14_400));
        let mut merged: Vec<String> = t.into_iter().chain(d).collect();
        merged.sort();
        let mut sorted = all.clone();
        sorted.sort();
        assert_eq!(merged, sorted);
        assert!(split_train_dev(&[], 0.8, 41).is_err());
        assert!(split_train_dev(&ids(3), 1.0, 41).is_err());
    }

    #[test]
    fn corpus_rejects_duplicate_ids_and_drops_exclusions() {
        let a = treebank("UD_X-A", 3);
        let b = treebank("UD_Y-B", 2);
        let c = treebank("UD_Z-C", 2);
        let corpus = Corpus::new(
            vec![
                (a.clone(), meta("UD_X-A", &[Genre::News])),
                (b, meta("UD_Y-B", &[Genre::Wiki])),
                (c, meta("UD_Z-C", &[Genre::Spoken])),
            ],
            vec!["UD_Z-C".to_string()],
        )
        .unwrap();
        assert_eq!(corpus.len(), 2);
        assert_eq!(corpus.sentence_count(), 5);
        assert!(corpus.get("UD_Z-C").is_none());
        assert_eq!(corpus.get("UD_X-A").unwrap().meta.splits["test"], 3);
        assert_eq!(corpus.treebank_of("UD_Y-B/test/s1"), Some("UD_Y-B"));

        let mut dup = a.clone();
        dup.code = "UD_X-A".into();
        let dup_split = dup.splits["test"].clone();
        dup.splits.insert("dev".into(), dup_split);
        assert!(Corpus::new(vec![(dup, meta("UD_X-A", &[Genre::News]))], vec![]).is_err());
    }

    #[test]
    fn split_names_from_files() {
        assert_eq!(split_of_file("ta_ttb-ud-train.conllu"), Some("train"));
        assert_eq!(split_of_file("yue_hk-ud-test.conllu"), Some("test"));
        assert_eq!(split_of_file("notes.conllu"), None);
    }
}
