//! Weakly supervised sentence-level genre labelling.
//!
//! Sentences of single-genre treebanks seed the labelled set. Each round a
//! softmax head over fixed sentence embeddings is trained on (a sample of)
//! the labelled set and labels the confidently predicted sentences of
//! multi-genre treebanks. A treebank left with exactly one unrepresented
//! metadata genre gets its remaining sentences labelled with that genre.
//! Whatever survives the last round is labelled by the classifier's argmax
//! over the treebank's metadata genres and reported as a fallback.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::{self, Write as _};
use std::io::{Read, Write};
use std::path::Path;
use std::str::FromStr;

use rayon::prelude::*;

use crate::corpus::Corpus;
use crate::embed::EmbeddingMatrix;
use crate::error::{Error, Result};
use crate::genre::{Genre, GenreSet};
use crate::rng;

const NUM_GENRES: usize = Genre::COUNT;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum LabelSource {
    Seed,
    Threshold,
    LastRemaining,
    Fallback,
}

impl LabelSource {
    pub fn as_str(self) -> &'static str {
        match self {
            LabelSource::Seed => "seed",
            LabelSource::Threshold => "threshold",
            LabelSource::LastRemaining => "last-remaining",
            LabelSource::Fallback => "fallback",
        }
    }
}

impl fmt::Display for LabelSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LabelSource {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "seed" => Ok(LabelSource::Seed),
            "threshold" => Ok(LabelSource::Threshold),
            "last-remaining" => Ok(LabelSource::LastRemaining),
            "fallback" => Ok(LabelSource::Fallback),
            other => Err(Error::invalid(format!("unknown label source `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootLabel {
    pub genre: Genre,
    pub source: LabelSource,
    /// Classifier probability of `genre` when it was assigned; 1 for seeds.
    pub confidence: f64,
}

/// What one round did.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RoundStats {
    pub round: usize,
    pub trained_on: usize,
    pub threshold: usize,
    pub last_remaining: usize,
    pub remaining: usize,
}

#[derive(Debug, Clone)]
struct TreebankSlot {
    code: String,
    genres: GenreSet,
    ids: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct BootState {
    pub round: usize,
    labeled: BTreeMap<String, BootLabel>,
    unlabeled: BTreeSet<String>,
    treebanks: Vec<TreebankSlot>,
    pub history: Vec<RoundStats>,
}

impl BootState {
    pub fn labeled(&self) -> &BTreeMap<String, BootLabel> {
        &self.labeled
    }

    pub fn unlabeled(&self) -> &BTreeSet<String> {
        &self.unlabeled
    }

    pub fn label_of(&self, id: &str) -> Option<&BootLabel> {
        self.labeled.get(id)
    }

    pub fn count_by_source(&self, source: LabelSource) -> usize {
        self.labeled.values().filter(|l| l.source == source).count()
    }

    pub fn fallback_count(&self) -> usize {
        self.count_by_source(LabelSource::Fallback)
    }

    /// Genres with at least one labelled sentence.
    pub fn seeded_genres(&self) -> GenreSet {
        self.labeled.values().map(|l| l.genre).collect()
    }

    /// Codes of the treebanks taking part, in corpus order.
    pub fn treebank_codes(&self) -> impl Iterator<Item = &str> {
        self.treebanks.iter().map(|t| t.code.as_str())
    }

    fn assign(&mut self, id: &str, label: BootLabel) {
        if self.unlabeled.remove(id) {
            self.labeled.insert(id.to_string(), label);
        }
    }

    /// `global_id \t genre \t source \t confidence`, sorted by id.
    pub fn labels_tsv(&self) -> String {
        labels_to_tsv(&self.labeled)
    }
}

pub fn labels_to_tsv(labels: &BTreeMap<String, BootLabel>) -> String {
    let mut out = String::new();
    for (id, l) in labels {
        let _ = writeln!(out, "{id}\t{}\t{}\t{:.6}", l.genre, l.source, l.confidence);
    }
    out
}

/// Parses a labels dump. `#` lines are ignored.
pub fn parse_labels_tsv(text: &str) -> Result<BTreeMap<String, BootLabel>> {
    let mut labels = BTreeMap::new();
    for (i, raw) in text.lines().enumerate() {
        if raw.is_empty() || raw.starts_with('#') {
            continue;
        }
        let line = i + 1;
        let cols: Vec<&str> = raw.split('\t').collect();
        if cols.len() != 4 {
            return Err(Error::parse(
                line,
                "expected global_id, genre, source, confidence",
            ));
        }
        let genre: Genre = cols[1]
            .parse()
            .map_err(|e: Error| Error::parse(line, e.to_string()))?;
        let source: LabelSource = cols[2]
            .parse()
            .map_err(|e: Error| Error::parse(line, e.to_string()))?;
        let confidence: f64 = cols[3]
            .parse()
            .map_err(|_| Error::parse(line, "bad confidence"))?;
        if labels
            .insert(
                cols[0].to_string(),
                BootLabel {
                    genre,
                    source,
                    confidence,
                },
            )
            .is_some()
        {
            return Err(Error::parse(line, format!("duplicate id {}", cols[0])));
        }
    }
    Ok(labels)
}

/// Seeds the labelled set from single-genre treebanks. Treebanks whose
/// language is in `excluded_langs` take no part at all.
pub fn init_seed_set(corpus: &Corpus, excluded_langs: &BTreeSet<String>) -> Result<BootState> {
    let mut state = BootState {
        round: 0,
        labeled: BTreeMap::new(),
        unlabeled: BTreeSet::new(),
        treebanks: Vec::new(),
        history: Vec::new(),
    };
    let mut seeds = 0;
    for entry in corpus.entries() {
        if excluded_langs.contains(&entry.meta.language) || entry.meta.genres.is_empty() {
            continue;
        }
        let ids: Vec<String> = entry
            .treebank
            .sentences()
            .map(|s| s.global_id.clone())
            .collect();
        if let Some(genre) = entry.meta.genres.only() {
            seeds += 1;
            for id in &ids {
                state.labeled.insert(
                    id.clone(),
                    BootLabel {
                        genre,
                        source: LabelSource::Seed,
                        confidence: 1.0,
                    },
                );
            }
        } else {
            state.unlabeled.extend(ids.iter().cloned());
        }
        state.treebanks.push(TreebankSlot {
            code: entry.treebank.code.clone(),
            genres: entry.meta.genres,
            ids,
        });
    }
    if seeds == 0 {
        return Err(Error::invalid(
            "no supervision seed: no single-genre treebank in the corpus",
        ));
    }
    Ok(state)
}

/// Linear layer over sentence embeddings followed by a softmax over the 18 genres.
#[derive(Debug, Clone, PartialEq)]
pub struct GenreClassifier {
    dim: usize,
    /// Row-major `dim × 18`.
    weights: Vec<f32>,
    biases: Vec<f32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub probs: [f64; NUM_GENRES],
    pub genre: Genre,
    pub prob: f64,
}

impl Prediction {
    /// Most probable genre among `allowed`, ties to the lower genre index.
    pub fn best_within(&self, allowed: GenreSet) -> Option<(Genre, f64)> {
        let mut best: Option<(Genre, f64)> = None;
        for g in allowed.iter() {
            let p = self.probs[g.index()];
            if best.is_none_or(|(_, bp)| p > bp) {
                best = Some((g, p));
            }
        }
        best
    }
}

impl GenreClassifier {
    pub fn zeros(dim: usize) -> Self {
        GenreClassifier {
            dim,
            weights: vec![0.0; dim * NUM_GENRES],
            biases: vec![0.0; NUM_GENRES],
        }
    }

    pub fn from_parameters(dim: usize, weights: Vec<f32>, biases: Vec<f32>) -> Result<Self> {
        if weights.len() != dim * NUM_GENRES || biases.len() != NUM_GENRES {
            return Err(Error::invalid(
                "classifier parameter shapes do not match dim × 18",
            ));
        }
        if weights.iter().chain(&biases).any(|x| !x.is_finite()) {
            return Err(Error::invalid("non-finite classifier parameter"));
        }
        Ok(GenreClassifier {
            dim,
            weights,
            biases,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn weights(&self) -> &[f32] {
        &self.weights
    }

    pub fn biases(&self) -> &[f32] {
        &self.biases
    }

    /// Checkpoint: `u32 dim | u32 18 | f32 weights | f32 biases`, little-endian.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(&(self.dim as u32).to_le_bytes())?;
        w.write_all(&(NUM_GENRES as u32).to_le_bytes())?;
        for x in self.weights.iter().chain(&self.biases) {
            w.write_all(&x.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        if bytes.len() < 8 {
            return Err(Error::format("classifier checkpoint truncated"));
        }
        let dim = u32::from_le_bytes(bytes[0..4].try_into().unwrap()) as usize;
        let classes = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
        if classes != NUM_GENRES {
            return Err(Error::format(format!(
                "checkpoint has {classes} classes, expected 18"
            )));
        }
        let floats = (dim + 1) * NUM_GENRES;
        if bytes.len() != 8 + 4 * floats {
            return Err(Error::format("classifier checkpoint has the wrong length"));
        }
        let values: Vec<f32> = bytes[8..]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let (w, b) = values.split_at(dim * NUM_GENRES);
        GenreClassifier::from_parameters(dim, w.to_vec(), b.to_vec())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write_to(&mut buf)?;
        std::fs::write(path, buf)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        GenreClassifier::read_from(std::fs::File::open(path)?)
    }
}

fn softmax_logits(weights: &[f64], biases: &[f64], x: &[f32], out: &mut [f64; NUM_GENRES]) {
    out.copy_from_slice(biases);
    for (d, &xd) in x.iter().enumerate() {
        if xd == 0.0 {
            continue;
        }
        let row = &weights[d * NUM_GENRES..(d + 1) * NUM_GENRES];
        let xd = f64::from(xd);
        for (o, &w) in out.iter_mut().zip(row) {
            *o += w * xd;
        }
    }
    let max = out.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut z = 0.0;
    for o in out.iter_mut() {
        *o = (*o - max).exp();
        z += *o;
    }
    for o in out.iter_mut() {
        *o /= z;
    }
}

fn argmax(probs: &[f64; NUM_GENRES]) -> usize {
    let mut best = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p > probs[best] {
            best = i;
        }
    }
    best
}

pub fn predict_genre(classifier: &GenreClassifier, embedding: &[f32]) -> Result<Prediction> {
    if embedding.len() != classifier.dim {
        return Err(Error::invalid(format!(
            "embedding dim {} does not match classifier dim {}",
            embedding.len(),
            classifier.dim
        )));
    }
    if embedding.iter().any(|x| x.is_nan()) {
        return Err(Error::invalid("NaN in embedding"));
    }
    let w: Vec<f64> = classifier.weights.iter().map(|&x| f64::from(x)).collect();
    let b: Vec<f64> = classifier.biases.iter().map(|&x| f64::from(x)).collect();
    Ok(predict_with(&w, &b, embedding))
}

fn predict_with(w: &[f64], b: &[f64], x: &[f32]) -> Prediction {
    let mut probs = [0.0; NUM_GENRES];
    softmax_logits(w, b, x, &mut probs);
    let best = argmax(&probs);
    Prediction {
        probs,
        genre: Genre::from_index(best).expect("index below 18"),
        prob: probs[best],
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub batch: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub weight_decay: f64,
    /// Fraction of the labelled data held out for early stopping.
    pub holdout: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 1e-2,
            batch: 16,
            max_epochs: 100,
            patience: 3,
            weight_decay: 0.01,
            holdout: 0.1,
            seed: 41,
        }
    }
}

/// Trains on every labelled sentence of `state`.
pub fn train_classifier(
    state: &BootState,
    embeddings: &EmbeddingMatrix,
    cfg: &TrainConfig,
) -> Result<GenreClassifier> {
    let examples = state
        .labeled
        .iter()
        .map(|(id, l)| Ok((embeddings.require(id)?, l.genre)))
        .collect::<Result<Vec<_>>>()?;
    fit_classifier(&examples, embeddings.dim(), cfg)
}

/// Mini-batch AdamW on cross-entropy from zero-initialised parameters, with
/// early stopping on held-out loss. Biases are not decayed.
pub fn fit_classifier(
    examples: &[(&[f32], Genre)],
    dim: usize,
    cfg: &TrainConfig,
) -> Result<GenreClassifier> {
    let genres: GenreSet = examples.iter().map(|(_, g)| *g).collect();
    if genres.len() < 2 {
        return Err(Error::invalid(
            "classifier needs labelled sentences from at least two genres",
        ));
    }
    if cfg.batch == 0 || cfg.lr <= 0.0 {
        return Err(Error::invalid(
            "batch size and learning rate must be positive",
        ));
    }
    for (x, _) in examples {
        if x.len() != dim {
            return Err(Error::invalid("embedding dim mismatch in training data"));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite value in training embeddings"));
        }
    }

    let n = examples.len();
    let order = rng::permutation(n, &mut rng::stream(cfg.seed, "holdout"));
    let n_hold = if n >= 10 {
        ((n as f64) * cfg.holdout).round() as usize
    } else {
        0
    };
    let (held, train) = order.split_at(n_hold);
    let monitor: &[usize] = if held.is_empty() { train } else { held };

    let nw = dim * NUM_GENRES;
    let mut w = vec![0.0f64; nw];
    let mut b = vec![0.0f64; NUM_GENRES];
    let (mut mw, mut vw) = (vec![0.0; nw], vec![0.0; nw]);
    let (mut mb, mut vb) = (vec![0.0; NUM_GENRES], vec![0.0; NUM_GENRES]);
    let (mut gw, mut gb) = (vec![0.0; nw], vec![0.0; NUM_GENRES]);
    let (beta1, beta2, eps) = (0.9f64, 0.999f64, 1e-8);
    let mut step = 0i32;
    let mut probs = [0.0; NUM_GENRES];

    let loss = |w: &[f64], b: &[f64], idx: &[usize]| -> f64 {
        let mut p = [0.0; NUM_GENRES];
        let mut total = 0.0;
        for &i in idx {
            let (x, g) = examples[i];
            softmax_logits(w, b, x, &mut p);
            total -= p[g.index()].max(1e-300).ln();
        }
        total / idx.len() as f64
    };

    let mut best = (loss(&w, &b, monitor), w.clone(), b.clone());
    let mut stale = 0;
    for epoch in 0..cfg.max_epochs {
        let mut shuffle = rng::indexed_stream(cfg.seed, "epoch", epoch as u64);
        let perm = rng::permutation(train.len(), &mut shuffle);
        for chunk in perm.chunks(cfg.batch) {
            gw.iter_mut().for_each(|g| *g = 0.0);
            gb.iter_mut().for_each(|g| *g = 0.0);
            for &p in chunk {
                let (x, g) = examples[train[p]];
                softmax_logits(&w, &b, x, &mut probs);
                probs[g.index()] -= 1.0;
                for (d, &xd) in x.iter().enumerate() {
                    if xd == 0.0 {
                        continue;
                    }
                    let xd = f64::from(xd);
                    let row = &mut gw[d * NUM_GENRES..(d + 1) * NUM_GENRES];
                    for (r, &q) in row.iter_mut().zip(&probs) {
                        *r += xd * q;
                    }
                }
                for (r, &q) in gb.iter_mut().zip(&probs) {
                    *r += q;
                }
            }
            let scale = 1.0 / chunk.len() as f64;
            step += 1;
            let c1 = 1.0 - beta1.powi(step);
            let c2 = 1.0 - beta2.powi(step);
            let update = |p: &mut [f64], m: &mut [f64], v: &mut [f64], g: &[f64], decay: f64| {
                for i in 0..p.len() {
                    let gi = g[i] * scale;
                    m[i] = beta1 * m[i] + (1.0 - beta1) * gi;
                    v[i] = beta2 * v[i] + (1.0 - beta2) * gi * gi;
                    p[i] *= 1.0 - cfg.lr * decay;
                    p[i] -= cfg.lr * (m[i] / c1) / ((v[i] / c2).sqrt() + eps);
                }
            };
            update(&mut w, &mut mw, &mut vw, &gw, cfg.weight_decay);
            update(&mut b, &mut mb, &mut vb, &gb, 0.0);
        }
        let l = loss(&w, &b, monitor);
        if !l.is_finite() {
            return Err(Error::Numerical(format!(
                "training loss diverged at epoch {epoch}"
            )));
        }
        if l < best.0 {
            best = (l, w.clone(), b.clone());
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                log::debug!(
                    "early stop after epoch {epoch}, held-out loss {:.6}",
                    best.0
                );
                break;
            }
        }
    }
    let (_, w, b) = best;
    GenreClassifier::from_parameters(
        dim,
        w.iter().map(|&x| x as f32).collect(),
        b.iter().map(|&x| x as f32).collect(),
    )
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BootConfig {
    pub threshold: f64,
    pub max_rounds: usize,
    pub train_cap: usize,
    pub seed: u64,
    pub train: TrainConfig,
}

impl Default for BootConfig {
    fn default() -> Self {
        BootConfig {
            threshold: 0.99,
            max_rounds: 3,
            train_cap: 40_000,
            seed: 41,
            train: TrainConfig::default(),
        }
    }
}

fn train_round(
    state: &BootState,
    embeddings: &EmbeddingMatrix,
    cfg: &BootConfig,
    round: usize,
) -> Result<(GenreClassifier, usize)> {
    let ids: Vec<&String> = state.labeled.keys().collect();
    let mut r = rng::indexed_stream(cfg.seed, "boot-train-sample", round as u64);
    let chosen = rng::sample_indices(ids.len(), cfg.train_cap.min(ids.len()), &mut r);
    let examples = chosen
        .iter()
        .map(|&i| Ok((embeddings.require(ids[i])?, state.labeled[ids[i]].genre)))
        .collect::<Result<Vec<_>>>()?;
    let train_cfg = TrainConfig {
        seed: rng::derive_seed(cfg.seed, &format!("boot-round-{round}")),
        ..cfg.train
    };
    Ok((
        fit_classifier(&examples, embeddings.dim(), &train_cfg)?,
        examples.len(),
    ))
}

fn predict_unlabeled(
    state: &BootState,
    slot: &TreebankSlot,
    classifier: &GenreClassifier,
    embeddings: &EmbeddingMatrix,
) -> Result<Vec<(String, Prediction)>> {
    let w: Vec<f64> = classifier.weights.iter().map(|&x| f64::from(x)).collect();
    let b: Vec<f64> = classifier.biases.iter().map(|&x| f64::from(x)).collect();
    slot.ids
        .par_iter()
        .filter(|id| state.unlabeled.contains(*id))
        .map(|id| {
            let x = embeddings.require(id)?;
            if x.len() != classifier.dim {
                return Err(Error::invalid(
                    "embedding dim does not match the classifier",
                ));
            }
            Ok((id.clone(), predict_with(&w, &b, x)))
        })
        .collect()
}

/// Runs the full labelling procedure from a seeded state.
pub fn bootstrap_from(
    mut state: BootState,
    embeddings: &EmbeddingMatrix,
    cfg: &BootConfig,
) -> Result<BootState> {
    let mut classifier = None;
    while !state.unlabeled.is_empty() && state.round < cfg.max_rounds {
        state.round += 1;
        let round = state.round;
        let (clf, trained_on) = train_round(&state, embeddings, cfg, round)?;
        let seeded = state.seeded_genres();
        let mut stats = RoundStats {
            round,
            trained_on,
            ..RoundStats::default()
        };

        let slots = state.treebanks.clone();
        for slot in &slots {
            if !slot.genres.intersects(&seeded) {
                continue;
            }
            for (id, pred) in predict_unlabeled(&state, slot, &clf, embeddings)? {
                if pred.prob > cfg.threshold && slot.genres.contains(pred.genre) {
                    state.assign(
                        &id,
                        BootLabel {
                            genre: pred.genre,
                            source: LabelSource::Threshold,
                            confidence: pred.prob,
                        },
                    );
                    stats.threshold += 1;
                }
            }
        }

        for slot in &slots {
            let pending: Vec<&String> = slot
                .ids
                .iter()
                .filter(|id| state.unlabeled.contains(*id))
                .collect();
            if pending.is_empty() {
                continue;
            }
            let present: GenreSet = slot
                .ids
                .iter()
                .filter_map(|id| state.labeled.get(id).map(|l| l.genre))
                .collect();
            let missing: Vec<Genre> = slot
                .genres
                .iter()
                .filter(|g| !present.contains(*g))
                .collect();
            if let [genre] = missing[..] {
                let preds = predict_unlabeled(&state, slot, &clf, embeddings)?;
                for (id, pred) in preds {
                    state.assign(
                        &id,
                        BootLabel {
                            genre,
                            source: LabelSource::LastRemaining,
                            confidence: pred.probs[genre.index()],
                        },
                    );
                    stats.last_remaining += 1;
                }
            }
        }
        stats.remaining = state.unlabeled.len();
        log::info!(
            "boot round {round}: trained on {trained_on}, {} by threshold, {} by last-remaining, {} left",
            stats.threshold,
            stats.last_remaining,
            stats.remaining
        );
        state.history.push(stats);
        classifier = Some(clf);
    }

    if !state.unlabeled.is_empty() {
        let clf = match classifier {
            Some(c) => c,
            None => train_round(&state, embeddings, cfg, cfg.max_rounds + 1)?.0,
        };
        let slots = state.treebanks.clone();
        let mut fallback = 0;
        for slot in &slots {
            for (id, pred) in predict_unlabeled(&state, slot, &clf, embeddings)? {
                let (genre, p) = pred.best_within(slot.genres).expect("multi-genre treebank");
                state.assign(
                    &id,
                    BootLabel {
                        genre,
                        source: LabelSource::Fallback,
                        confidence: p,
                    },
                );
                fallback += 1;
            }
        }
        log::warn!(
            "boot: {fallback} sentences labelled by fallback after {} rounds",
            state.round
        );
    }
    Ok(state)
}

/// Seeds from `corpus` minus `excluded_langs` and runs the labelling rounds.
pub fn bootstrap_labels(
    corpus: &Corpus,
    embeddings: &EmbeddingMatrix,
    excluded_langs: &BTreeSet<String>,
    cfg: &BootConfig,
) -> Result<BootState> {
    bootstrap_from(init_seed_set(corpus, excluded_langs)?, embeddings, cfg)
}
