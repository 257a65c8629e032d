//! Training-data selection for a target treebank.
//!
//! Every strategy works on a pool: the corpus minus all treebanks in the
//! target's language(s). Manifests list the selected global IDs in corpus
//! order together with the strategy, target, seed and a config hash.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};
use std::str::FromStr;

use rayon::prelude::*;

use crate::bootstrap::BootLabel;
use crate::cluster::ClusterAssignment;
use crate::corpus::{Corpus, CorpusEntry, Registry, Treebank};
use crate::embed::{cosine_distance, mean_embedding, CosineQuery, EmbeddingMatrix};
use crate::error::{Error, Result};
use crate::genre::Genre;
use crate::rng;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TargetSpec {
    /// Short lowercase name, e.g. `ta`.
    pub name: String,
    pub code: String,
    pub genre: Genre,
    /// The target language plus, for code-switched targets, its constituents.
    pub languages: BTreeSet<String>,
    /// In-language treebank standing in when the target has no train split.
    pub proxy: Option<String>,
}

const BUILTIN_TARGETS: [(&str, &str, Genre, &[&str], Option<&str>); 12] = [
    (
        "swl",
        "UD_Swedish_Sign_Language-SSLC",
        Genre::Spoken,
        &[],
        None,
    ),
    (
        "sa",
        "UD_Sanskrit-UFAL",
        Genre::Fiction,
        &[],
        Some("UD_Sanskrit-Vedic"),
    ),
    (
        "kpv",
        "UD_Komi_Zyrian-Lattice",
        Genre::Fiction,
        &[],
        Some("UD_Komi_Zyrian-IKDP"),
    ),
    ("ta", "UD_Tamil-TTB", Genre::News, &[], None),
    ("gl", "UD_Galician-TreeGal", Genre::News, &[], None),
    ("yue", "UD_Cantonese-HK", Genre::Spoken, &[], None),
    ("ckt", "UD_Chukchi-HSE", Genre::Spoken, &[], None),
    (
        "fo",
        "UD_Faroese-OFT",
        Genre::Wiki,
        &[],
        Some("UD_Faroese-FarPaHC"),
    ),
    ("te", "UD_Telugu-MTG", Genre::GrammarExamples, &[], None),
    ("myv", "UD_Erzya-JR", Genre::Fiction, &[], None),
    (
        "qhe",
        "UD_Hindi_English-HIENCS",
        Genre::Social,
        &["Hindi", "English"],
        None,
    ),
    (
        "qtd",
        "UD_Turkish_German-SAGT",
        Genre::Spoken,
        &["Turkish", "German"],
        None,
    ),
];

impl TargetSpec {
    pub fn new(
        name: &str,
        code: &str,
        genre: Genre,
        languages: impl IntoIterator<Item = String>,
    ) -> Self {
        TargetSpec {
            name: name.to_string(),
            code: code.to_string(),
            genre,
            languages: languages.into_iter().collect(),
            proxy: None,
        }
    }

    /// The twelve evaluation targets.
    pub fn builtin() -> Vec<TargetSpec> {
        BUILTIN_TARGETS
            .iter()
            .map(|&(name, code, genre, constituents, proxy)| {
                let own =
                    crate::corpus::language_of_code(code).expect("builtin codes are UD_ codes");
                let languages = std::iter::once(own)
                    .chain(constituents.iter().copied())
                    .map(String::from);
                TargetSpec {
                    proxy: proxy.map(String::from),
                    ..TargetSpec::new(name, code, genre, languages)
                }
            })
            .collect()
    }

    /// Looks a builtin target up by short name or treebank code.
    pub fn find_builtin(key: &str) -> Option<TargetSpec> {
        let lower = key.to_ascii_lowercase();
        TargetSpec::builtin()
            .into_iter()
            .find(|t| t.name == lower || t.code == key)
    }

    /// Checks the target against registry metadata.
    pub fn validate(&self, registry: &Registry) -> Result<()> {
        if self.languages.is_empty() {
            return Err(Error::config(format!(
                "target {} has no exclusion language",
                self.code
            )));
        }
        let meta = registry
            .get(&self.code)
            .ok_or_else(|| Error::config(format!("target {} is not in the registry", self.code)))?;
        if !meta.has_genre(self.genre) {
            return Err(Error::config(format!(
                "target {} does not list genre {}",
                self.code, self.genre
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Strategy {
    Rand,
    Sent,
    Meta,
    Boot,
    Gmm,
    Lda,
    Target,
}

impl Strategy {
    /// The six selection methods, without the in-language upper bound.
    pub const SELECTION: [Strategy; 6] = [
        Strategy::Rand,
        Strategy::Sent,
        Strategy::Meta,
        Strategy::Boot,
        Strategy::Gmm,
        Strategy::Lda,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Strategy::Rand => "rand",
            Strategy::Sent => "sent",
            Strategy::Meta => "meta",
            Strategy::Boot => "boot",
            Strategy::Gmm => "gmm",
            Strategy::Lda => "lda",
            Strategy::Target => "target",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Strategy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s.to_ascii_lowercase().as_str() {
            "rand" => Strategy::Rand,
            "sent" => Strategy::Sent,
            "meta" => Strategy::Meta,
            "boot" => Strategy::Boot,
            "gmm" => Strategy::Gmm,
            "lda" => Strategy::Lda,
            "target" => Strategy::Target,
            other => return Err(Error::invalid(format!("unknown strategy `{other}`"))),
        })
    }
}

/// Treebank code of a global ID (`code/split/sent_id`).
pub fn treebank_of_id(id: &str) -> &str {
    id.split_once('/').map_or(id, |(code, _)| code)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectionManifest {
    pub strategy: Strategy,
    pub target: String,
    pub seed: u64,
    pub ids: Vec<String>,
    pub config_hash: String,
}

impl SelectionManifest {
    pub fn new(strategy: Strategy, target: &str, seed: u64, ids: Vec<String>) -> Result<Self> {
        let mut seen = BTreeSet::new();
        for id in &ids {
            if !seen.insert(id.as_str()) {
                return Err(Error::invalid(format!("duplicate id {id} in manifest")));
            }
        }
        Ok(SelectionManifest {
            strategy,
            target: target.to_string(),
            seed,
            ids,
            config_hash: String::new(),
        })
    }

    pub fn with_hash(mut self, hash: impl Into<String>) -> Self {
        self.config_hash = hash.into();
        self
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Selected sentences per treebank.
    pub fn counts(&self) -> BTreeMap<String, usize> {
        let mut counts = BTreeMap::new();
        for id in &self.ids {
            *counts.entry(treebank_of_id(id).to_string()).or_insert(0) += 1;
        }
        counts
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "#strategy\t{}", self.strategy);
        let _ = writeln!(out, "#target\t{}", self.target);
        let _ = writeln!(out, "#seed\t{}", self.seed);
        let _ = writeln!(out, "#config-hash\t{}", self.config_hash);
        for id in &self.ids {
            out.push_str(id);
            out.push('\n');
        }
        out
    }

    pub fn parse(text: &str) -> Result<Self> {
        let (mut strategy, mut target, mut seed, mut hash) = (None, None, None, None);
        let mut ids = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if let Some(rest) = line.strip_prefix('#') {
                let (key, value) = rest
                    .split_once('\t')
                    .ok_or_else(|| Error::parse(i + 1, "header line without a tab"))?;
                match key {
                    "strategy" => {
                        strategy = Some(
                            value
                                .parse()
                                .map_err(|e: Error| Error::parse(i + 1, e.to_string()))?,
                        )
                    }
                    "target" => target = Some(value.to_string()),
                    "seed" => {
                        seed = Some(value.parse().map_err(|_| Error::parse(i + 1, "bad seed"))?)
                    }
                    "config-hash" => hash = Some(value.to_string()),
                    _ => {}
                }
            } else if !line.is_empty() {
                ids.push(line.to_string());
            }
        }
        let missing = |k: &str| Error::format(format!("manifest lacks #{k}"));
        Ok(SelectionManifest::new(
            strategy.ok_or_else(|| missing("strategy"))?,
            &target.ok_or_else(|| missing("target"))?,
            seed.ok_or_else(|| missing("seed"))?,
            ids,
        )?
        .with_hash(hash.ok_or_else(|| missing("config-hash"))?))
    }

    /// Fails if any id belongs to a treebank of the target's languages.
    pub fn check_exclusion(&self, corpus: &Corpus, target: &TargetSpec) -> Result<()> {
        for id in &self.ids {
            let code = corpus
                .treebank_of(id)
                .ok_or_else(|| Error::invalid(format!("unknown id {id}")))?;
            let lang = &corpus.get(code).expect("indexed treebank").meta.language;
            if target.languages.contains(lang) {
                return Err(Error::invalid(format!(
                    "{id} is in excluded language {lang}"
                )));
            }
        }
        Ok(())
    }
}

/// The corpus minus the target's languages.
#[derive(Debug, Clone, Copy)]
pub struct Pool<'a> {
    corpus: &'a Corpus,
    excluded: &'a BTreeSet<String>,
}

impl<'a> Pool<'a> {
    pub fn entries(&self) -> impl Iterator<Item = &'a CorpusEntry> + '_ {
        let excluded = self.excluded;
        self.corpus
            .entries()
            .filter(move |e| !excluded.contains(&e.meta.language))
    }

    pub fn contains(&self, code: &str) -> bool {
        self.corpus
            .get(code)
            .is_some_and(|e| !self.excluded.contains(&e.meta.language))
    }

    pub fn ids(&self) -> impl Iterator<Item = &'a str> + '_ {
        self.entries()
            .flat_map(|e| e.treebank.sentences().map(|s| s.global_id.as_str()))
    }

    pub fn len(&self) -> usize {
        self.entries().map(|e| e.treebank.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn corpus(&self) -> &'a Corpus {
        self.corpus
    }
}

pub fn exclusion_pool<'a>(corpus: &'a Corpus, target: &'a TargetSpec) -> Result<Pool<'a>> {
    let pool = Pool {
        corpus,
        excluded: &target.languages,
    };
    if pool.is_empty() {
        return Err(Error::invalid(format!(
            "empty pool after excluding {:?}",
            target.languages
        )));
    }
    Ok(pool)
}

/// `min(n, |treebank|)` sentences drawn uniformly without replacement,
/// returned in treebank order.
pub fn sample_target(target: &Treebank, n: usize, seed: u64) -> Vec<String> {
    let all: Vec<&str> = target.sentences().map(|s| s.global_id.as_str()).collect();
    let mut r = rng::stream(seed, &format!("target-sample/{}", target.code));
    rng::sample_indices(all.len(), n.min(all.len()), &mut r)
        .into_iter()
        .map(|i| all[i].to_string())
        .collect()
}

/// Mean embedding of a target sample.
pub fn target_mean(embeddings: &EmbeddingMatrix, sample: &[String]) -> Result<Vec<f32>> {
    mean_embedding(embeddings, sample)
}

pub fn select_meta(pool: &Pool, target: &TargetSpec, seed: u64) -> Result<SelectionManifest> {
    let mut ids = Vec::new();
    let mut matched = 0;
    for entry in pool.entries().filter(|e| e.meta.has_genre(target.genre)) {
        matched += 1;
        ids.extend(entry.treebank.sentences().map(|s| s.global_id.clone()));
    }
    if matched == 0 {
        return Err(Error::invalid(format!(
            "no pool treebank lists genre {}",
            target.genre
        )));
    }
    SelectionManifest::new(Strategy::Meta, &target.code, seed, ids)
}

/// The `k` pool sentences closest to `target_mean`, ties by global ID.
pub fn select_sent(
    pool: &Pool,
    embeddings: &EmbeddingMatrix,
    target_mean: &[f32],
    k: usize,
    target: &TargetSpec,
    seed: u64,
) -> Result<SelectionManifest> {
    let ids: Vec<&str> = pool.ids().collect();
    if k == 0 || k > ids.len() {
        return Err(Error::invalid(format!("k = {k} outside 1..={}", ids.len())));
    }
    let query = CosineQuery::new(target_mean)?;
    let mut scored = ids
        .par_iter()
        .map(|id| Ok((query.distance(embeddings.require(id)?)?, *id)))
        .collect::<Result<Vec<(f64, &str)>>>()?;
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(b.1)));
    let chosen: BTreeSet<&str> = scored[..k].iter().map(|(_, id)| *id).collect();
    let ids = ids
        .into_iter()
        .filter(|id| chosen.contains(id))
        .map(String::from)
        .collect();
    SelectionManifest::new(Strategy::Sent, &target.code, seed, ids)
}

pub fn select_boot(
    labels: &BTreeMap<String, BootLabel>,
    pool: &Pool,
    target: &TargetSpec,
    seed: u64,
) -> Result<SelectionManifest> {
    let ids: Vec<String> = pool
        .ids()
        .filter(|id| labels.get(*id).is_some_and(|l| l.genre == target.genre))
        .map(String::from)
        .collect();
    if ids.is_empty() {
        return Err(Error::invalid(format!(
            "no pool sentence labelled {}",
            target.genre
        )));
    }
    SelectionManifest::new(Strategy::Boot, &target.code, seed, ids)
}

/// From every pool treebank listing the target genre, the cluster whose mean
/// is nearest to `target_mean` (empty clusters skipped, ties to the lowest index).
pub fn select_cluster(
    assignments: &[ClusterAssignment],
    pool: &Pool,
    target_mean: &[f32],
    target: &TargetSpec,
    seed: u64,
) -> Result<SelectionManifest> {
    let by_code: BTreeMap<&str, &ClusterAssignment> = assignments
        .iter()
        .map(|a| (a.treebank.as_str(), a))
        .collect();
    let strategy = match assignments.first().map(|a| a.method) {
        Some(crate::cluster::Method::Lda) => Strategy::Lda,
        _ => Strategy::Gmm,
    };
    let mut chosen: BTreeSet<&str> = BTreeSet::new();
    let mut matched = 0;
    for entry in pool.entries().filter(|e| e.meta.has_genre(target.genre)) {
        let code = entry.treebank.code.as_str();
        let a = by_code
            .get(code)
            .ok_or_else(|| Error::invalid(format!("no cluster assignment for {code}")))?;
        let mut best: Option<(usize, f64)> = None;
        for (c, mean) in a.cluster_means.iter().enumerate() {
            let Some(mean) = mean else { continue };
            let d = cosine_distance(mean, target_mean).map_err(|e| e.context(code.to_string()))?;
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((c, d));
            }
        }
        match best {
            Some((c, _)) => {
                matched += 1;
                chosen.extend(
                    a.labels
                        .iter()
                        .filter(|(_, l)| *l == c)
                        .map(|(id, _)| id.as_str()),
                );
            }
            None => log::warn!("{code}: every cluster is empty, skipped"),
        }
    }
    if matched == 0 {
        return Err(Error::invalid(format!(
            "no clusterable pool treebank lists genre {}",
            target.genre
        )));
    }
    let ids = pool
        .ids()
        .filter(|id| chosen.contains(id))
        .map(String::from)
        .collect();
    SelectionManifest::new(strategy, &target.code, seed, ids)
}

/// Round-half-to-even mean of the given selection sizes.
pub fn rand_size(counts: &[usize]) -> usize {
    assert!(!counts.is_empty(), "rand_size needs at least one count");
    let sum: u128 = counts.iter().map(|&c| c as u128).sum();
    let n = counts.len() as u128;
    let (q, r) = (sum / n, sum % n);
    let q = match (2 * r).cmp(&n) {
        std::cmp::Ordering::Less => q,
        std::cmp::Ordering::Greater => q + 1,
        std::cmp::Ordering::Equal => q + (q % 2),
    };
    q as usize
}

/// A uniform sample from the whole pool, as large as the mean of the
/// Boot, GMM and LDA selections.
pub fn select_rand(
    pool: &Pool,
    boot_n: usize,
    gmm_n: usize,
    lda_n: usize,
    target: &TargetSpec,
    seed: u64,
) -> Result<SelectionManifest> {
    let ids: Vec<&str> = pool.ids().collect();
    let mut n = rand_size(&[boot_n, gmm_n, lda_n]);
    if n > ids.len() {
        log::warn!("n_rand {n} exceeds the pool of {}, clamped", ids.len());
        n = ids.len();
    }
    let mut r = rng::stream(seed, &format!("rand/{}", target.code));
    let picked = rng::sample_indices(ids.len(), n, &mut r);
    let ids = picked.into_iter().map(|i| ids[i].to_string()).collect();
    SelectionManifest::new(Strategy::Rand, &target.code, seed, ids)
}

/// The in-language training split, from the target itself or its proxy.
pub fn select_target(corpus: &Corpus, target: &TargetSpec, seed: u64) -> Result<SelectionManifest> {
    let own = corpus
        .get(&target.code)
        .filter(|e| e.treebank.splits.contains_key("train"));
    let ids: Vec<String> = match (own, &target.proxy) {
        (Some(e), _) => e.treebank.splits["train"]
            .iter()
            .map(|s| s.global_id.clone())
            .collect(),
        (None, Some(proxy)) => {
            let e = corpus
                .get(proxy)
                .ok_or_else(|| Error::invalid(format!("proxy treebank {proxy} not loaded")))?;
            match e.treebank.splits.get("train") {
                Some(train) => train.iter().map(|s| s.global_id.clone()).collect(),
                None => e
                    .treebank
                    .sentences()
                    .map(|s| s.global_id.clone())
                    .collect(),
            }
        }
        (None, None) => {
            return Err(Error::invalid(format!(
                "no in-language upper bound for {}",
                target.code
            )))
        }
    };
    SelectionManifest::new(Strategy::Target, &target.code, seed, ids)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bootstrap::LabelSource;
    use crate::cluster::Method;
    use crate::synth::{synth_corpus, SynthTreebank};

    fn langs(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    fn mixed_corpus() -> Corpus {
        synth_corpus(
            &[
                SynthTreebank::new("UD_Turkish-A", "Turkish", &[(Genre::News, 4)]),
                SynthTreebank::new(
                    "UD_German-B",
                    "German",
                    &[(Genre::Spoken, 3), (Genre::News, 3)],
                ),
                SynthTreebank::new(
                    "UD_Turkish_German-SAGT",
                    "Turkish_German",
                    &[(Genre::Spoken, 5)],
                ),
                SynthTreebank::new("UD_Tamil-TTB", "Tamil", &[(Genre::News, 6)]),
                SynthTreebank::new(
                    "UD_Italian-C",
                    "Italian",
                    &[(Genre::Spoken, 2), (Genre::Wiki, 2)],
                ),
            ],
            41,
        )
        .unwrap()
        .0
    }

    #[test]
    fn builtin_targets() {
        let all = TargetSpec::builtin();
        assert_eq!(all.len(), 12);
        let qtd = TargetSpec::find_builtin("QTD").unwrap();
        assert_eq!(
            qtd.languages,
            langs(&["German", "Turkish", "Turkish_German"])
                .into_iter()
                .collect()
        );
        assert_eq!(
            TargetSpec::find_builtin("UD_Tamil-TTB")
                .unwrap()
                .languages
                .len(),
            1
        );
        assert_eq!(
            TargetSpec::find_builtin("fo").unwrap().proxy.as_deref(),
            Some("UD_Faroese-FarPaHC")
        );
    }

    #[test]
    fn pools_exclude_target_languages() {
        let corpus = mixed_corpus();
        let qtd = TargetSpec::new(
            "qtd",
            "UD_Turkish_German-SAGT",
            Genre::Spoken,
            langs(&["Turkish_German", "Turkish", "German"]),
        );
        let pool = exclusion_pool(&corpus, &qtd).unwrap();
        let codes: Vec<&str> = pool.entries().map(|e| e.treebank.code.as_str()).collect();
        assert_eq!(codes, ["UD_Italian-C", "UD_Tamil-TTB"]);

        let ta = TargetSpec::new("ta", "UD_Tamil-TTB", Genre::News, langs(&["Tamil"]));
        assert_eq!(exclusion_pool(&corpus, &ta).unwrap().entries().count(), 4);

        let (mono, _) = synth_corpus(
            &[SynthTreebank::new(
                "UD_Tamil-TTB",
                "Tamil",
                &[(Genre::News, 3)],
            )],
            41,
        )
        .unwrap();
        assert!(exclusion_pool(&mono, &ta).is_err());
    }

    #[test]
    fn target_samples() {
        let (c, _) = synth_corpus(
            &[
                SynthTreebank::new("UD_X-Small", "X", &[(Genre::News, 50)]),
                SynthTreebank::new("UD_X-Big", "X", &[(Genre::News, 203)]),
            ],
            41,
        )
        .unwrap();
        let small = &c.get("UD_X-Small").unwrap().treebank;
        let big = &c.get("UD_X-Big").unwrap().treebank;
        assert_eq!(sample_target(small, 100, 41).len(), 50);
        let a = sample_target(big, 100, 41);
        assert_eq!(a.len(), 100);
        assert_eq!(a, sample_target(big, 100, 41));
        assert_ne!(a, sample_target(big, 100, 42));
    }

    #[test]
    fn meta_selection() {
        let corpus = mixed_corpus();
        let ta = TargetSpec::new("ta", "UD_Tamil-TTB", Genre::News, langs(&["Tamil"]));
        let pool = exclusion_pool(&corpus, &ta).unwrap();
        let m = select_meta(&pool, &ta, 41).unwrap();
        assert_eq!(
            m.counts(),
            BTreeMap::from([
                ("UD_German-B".to_string(), 6),
                ("UD_Turkish-A".to_string(), 4)
            ])
        );
        let poetry = TargetSpec {
            genre: Genre::Poetry,
            ..ta.clone()
        };
        assert!(select_meta(&pool, &poetry, 41).is_err());
        m.check_exclusion(&corpus, &ta).unwrap();
    }

    fn vector_corpus() -> (Corpus, EmbeddingMatrix, TargetSpec) {
        let (c, _) = synth_corpus(
            &[
                SynthTreebank::new("UD_A-X", "A", &[(Genre::News, 3)]),
                SynthTreebank::new("UD_B-X", "B", &[(Genre::News, 2)]),
                SynthTreebank::new("UD_T-X", "T", &[(Genre::News, 1)]),
            ],
            41,
        )
        .unwrap();
        let vecs = [
            [1.0, 0.0],
            [0.0, 1.0],
            [1.0, 1.0],
            [-1.0, 0.2],
            [0.9, 0.1],
            [1.0, 0.0],
        ];
        let ids: Vec<String> = c
            .entries()
            .flat_map(|e| e.treebank.sentences())
            .map(|s| s.global_id.clone())
            .collect();
        let emb = EmbeddingMatrix::from_rows(
            2,
            ids.into_iter()
                .zip(vecs.iter().map(|v| v.to_vec()))
                .collect(),
        )
        .unwrap();
        (
            c,
            emb,
            TargetSpec::new("t", "UD_T-X", Genre::News, langs(&["T"])),
        )
    }

    #[test]
    fn sent_matches_full_sort_and_is_scale_invariant() {
        let (c, emb, t) = vector_corpus();
        let pool = exclusion_pool(&c, &t).unwrap();
        let mean = [1.0f32, 0.0];
        let mut oracle: Vec<(f64, String)> = pool
            .ids()
            .map(|id| {
                (
                    cosine_distance(emb.get(id).unwrap(), &mean).unwrap(),
                    id.to_string(),
                )
            })
            .collect();
        oracle.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap().then(a.1.cmp(&b.1)));
        let want: BTreeSet<String> = oracle[..2].iter().map(|(_, id)| id.clone()).collect();
        let got = select_sent(&pool, &emb, &mean, 2, &t, 41).unwrap();
        assert_eq!(got.ids.iter().cloned().collect::<BTreeSet<_>>(), want);
        let scaled = select_sent(&pool, &emb.scaled(3.0).unwrap(), &mean, 2, &t, 41).unwrap();
        assert_eq!(scaled.ids, got.ids);
        assert_eq!(select_sent(&pool, &emb, &mean, 5, &t, 41).unwrap().len(), 5);
        assert!(select_sent(&pool, &emb, &mean, 6, &t, 41).is_err());
        assert!(select_sent(&pool, &emb, &[0.0, 0.0], 1, &t, 41).is_err());
    }

    #[test]
    fn boot_selection_is_metadata_bounded() {
        let corpus = mixed_corpus();
        let qtd = TargetSpec::new(
            "qtd",
            "UD_Turkish_German-SAGT",
            Genre::Spoken,
            langs(&["Turkish_German", "Turkish", "German"]),
        );
        let pool = exclusion_pool(&corpus, &qtd).unwrap();
        let labels: BTreeMap<String, BootLabel> = pool
            .ids()
            .enumerate()
            .map(|(i, id)| {
                let genre = if id.starts_with("UD_Italian-C/") && i % 2 == 0 {
                    Genre::Spoken
                } else {
                    Genre::Wiki
                };
                (
                    id.to_string(),
                    BootLabel {
                        genre,
                        source: LabelSource::Threshold,
                        confidence: 1.0,
                    },
                )
            })
            .collect();
        let m = select_boot(&labels, &pool, &qtd, 41).unwrap();
        assert_eq!(m.len(), 2);
        let meta: BTreeSet<_> = select_meta(&pool, &qtd, 41)
            .unwrap()
            .ids
            .into_iter()
            .collect();
        assert!(m.ids.iter().all(|id| meta.contains(id)));
        let poetry = TargetSpec {
            genre: Genre::Poetry,
            ..qtd.clone()
        };
        assert!(select_boot(&labels, &pool, &poetry, 41).is_err());
    }

    #[test]
    fn cluster_selection_picks_nearest_mean() {
        let (c, emb, t) = vector_corpus();
        let pool = exclusion_pool(&c, &t).unwrap();
        let ids = |code: &str| -> Vec<String> {
            c.get(code)
                .unwrap()
                .treebank
                .sentences()
                .map(|s| s.global_id.clone())
                .collect()
        };
        let a_ids = ids("UD_A-X");
        let a = ClusterAssignment::from_labels(
            "UD_A-X",
            Method::Gmm,
            2,
            vec![
                (a_ids[0].clone(), 0),
                (a_ids[1].clone(), 1),
                (a_ids[2].clone(), 1),
            ],
            &emb,
        )
        .unwrap();
        let b_ids = ids("UD_B-X");
        let b = ClusterAssignment::from_labels(
            "UD_B-X",
            Method::Gmm,
            1,
            b_ids.iter().map(|id| (id.clone(), 0)).collect(),
            &emb,
        )
        .unwrap();
        let mean = a.cluster_means[0].clone().unwrap();
        let m = select_cluster(&[a.clone(), b.clone()], &pool, &mean, &t, 41).unwrap();
        let mut want = vec![a_ids[0].clone()];
        want.extend(b_ids.clone());
        assert_eq!(m.ids, want);
        assert_eq!(m.strategy, Strategy::Gmm);
        assert!(select_cluster(&[a], &pool, &mean, &t, 41).is_err());
    }

    #[test]
    fn rand_sizes_and_determinism() {
        assert_eq!(rand_size(&[29_000, 33_000, 32_000]), 31_333);
        assert_eq!(rand_size(&[10, 10, 10]), 10);
        assert_eq!(rand_size(&[1, 2]), 2);
        assert_eq!(rand_size(&[2, 3]), 2);
        let corpus = mixed_corpus();
        let ta = TargetSpec::new("ta", "UD_Tamil-TTB", Genre::News, langs(&["Tamil"]));
        let pool = exclusion_pool(&corpus, &ta).unwrap();
        let a = select_rand(&pool, 4, 5, 6, &ta, 41).unwrap();
        assert_eq!(a.len(), 5);
        assert_eq!(a, select_rand(&pool, 4, 5, 6, &ta, 41).unwrap());
        assert_eq!(
            select_rand(&pool, 100, 100, 100, &ta, 41).unwrap().len(),
            pool.len()
        );
    }

    #[test]
    fn target_uses_train_or_proxy() {
        let (c, _) = synth_corpus(
            &[
                SynthTreebank::new("UD_Galician-TreeGal", "Galician", &[(Genre::News, 6)]),
                SynthTreebank::new("UD_Faroese-FarPaHC", "Faroese", &[(Genre::Wiki, 3)]),
            ],
            41,
        )
        .unwrap();
        let gl = TargetSpec::find_builtin("gl").unwrap();
        assert_eq!(select_target(&c, &gl, 41).unwrap().len(), 6);
        let fo = TargetSpec::find_builtin("fo").unwrap();
        let m = select_target(&c, &fo, 41).unwrap();
        assert!(m
            .ids
            .iter()
            .all(|id| id.starts_with("UD_Faroese-FarPaHC/train/")));
        let myv = TargetSpec::find_builtin("myv").unwrap();
        assert!(select_target(&c, &myv, 41)
            .unwrap_err()
            .to_string()
            .contains("no in-language upper bound"));
    }

    #[test]
    fn manifest_text_round_trip() {
        let m = SelectionManifest::new(
            Strategy::Lda,
            "UD_X-Y",
            42,
            vec!["UD_A/train/1".into(), "UD_B/dev/2".into()],
        )
        .unwrap()
        .with_hash("abc123");
        let text = m.to_text();
        assert!(
            text.starts_with("#strategy\tlda\n#target\tUD_X-Y\n#seed\t42\n#config-hash\tabc123\n")
        );
        assert_eq!(SelectionManifest::parse(&text).unwrap(), m);
        assert!(
            SelectionManifest::new(Strategy::Meta, "t", 1, vec!["a".into(), "a".into()]).is_err()
        );
    }
}
