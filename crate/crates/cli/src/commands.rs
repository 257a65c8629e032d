use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context as _, Result};
use rayon::prelude::*;

use gensel::analysis::{
    aggregate_seeds, bonferroni, genre_bounds, las_uas, paired_sign_test, DeprelMatch,
};
use gensel::bootstrap::{bootstrap_labels, parse_labels_tsv, LabelSource};
use gensel::cluster::{cluster_treebank, ClusterAssignment, Method};
use gensel::corpus::{
    load_corpus, parse_conllu, split_train_dev, write_conllu, Registry, Sentence,
};
use gensel::embed::fallback_featurize;
use gensel::select::{
    exclusion_pool, sample_target, select_boot, select_cluster, select_meta, select_rand,
    select_sent, select_target, target_mean, Pool,
};
use gensel::{Corpus, EmbeddingMatrix, SelectionManifest, Strategy, TargetSpec};

use crate::config::{config_error, prerequisite, RunConfig};

pub fn cluster_dir(out: &Path, method: Method, seed: u64) -> PathBuf {
    out.join("clusters")
        .join(method.as_str())
        .join(format!("seed-{seed}"))
}

pub fn labels_path(out: &Path, seed: u64) -> PathBuf {
    out.join("boot")
        .join(format!("seed-{seed}"))
        .join("labels.tsv")
}

pub fn manifest_path(out: &Path, target: &str, strategy: Strategy, seed: u64) -> PathBuf {
    out.join("manifests")
        .join(target)
        .join(format!("{strategy}-seed{seed}.tsv"))
}

pub fn selection_dir(out: &Path, target: &str, strategy: Strategy, seed: u64) -> PathBuf {
    out.join("corpora")
        .join(target)
        .join(format!("{strategy}-seed{seed}"))
}

pub fn default_fallback_path(out: &Path) -> PathBuf {
    out.join("embeddings").join("fallback.gsem")
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)
            .with_context(|| format!("creating {}", parent.display()))?;
    }
    std::fs::write(path, contents).with_context(|| format!("writing {}", path.display()))
}

fn read_conllu(path: &Path) -> Result<Vec<Sentence>> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    parse_conllu(&bytes).with_context(|| format!("parsing {}", path.display()))
}

/// A validated configuration with its provenance hash.
pub struct Run {
    pub cfg: RunConfig,
    pub hash: String,
}

impl Run {
    pub fn new(cfg: RunConfig) -> Result<Self> {
        cfg.validate()?;
        let hash = cfg.hash()?;
        Ok(Run { cfg, hash })
    }

    fn out(&self) -> &Path {
        &self.cfg.output
    }

    fn provenance(&self) -> String {
        format!("#config-hash\t{}\n", self.hash)
    }

    fn corpus(&self) -> Result<Corpus> {
        let root = self.cfg.corpus_root()?;
        if !root.is_dir() {
            return Err(config_error(format!(
                "corpus root {} is not a directory",
                root.display()
            )));
        }
        let registry = self.cfg.load_registry()?;
        load_corpus(&root, &registry, &self.cfg.exclusion_set())
            .with_context(|| format!("loading corpus from {}", root.display()))
    }

    fn embeddings(&self, corpus: &Corpus) -> Result<Option<EmbeddingMatrix>> {
        match self.cfg.embeddings.as_deref() {
            None => Ok(None),
            Some("fallback") => {
                let sentences = corpus.entries().flat_map(|e| e.treebank.sentences());
                Ok(Some(fallback_featurize(
                    sentences,
                    self.cfg.fallback.dim,
                    self.cfg.fallback.seed,
                )?))
            }
            Some(path) => {
                let path = Path::new(path);
                if !path.is_file() {
                    return Err(prerequisite(format!("embeddings file {}", path.display())));
                }
                let m = EmbeddingMatrix::load(path)
                    .with_context(|| format!("loading {}", path.display()))?;
                Ok(Some(m))
            }
        }
    }

    fn require_embeddings(&self, corpus: &Corpus, purpose: &str) -> Result<EmbeddingMatrix> {
        self.embeddings(corpus)?.ok_or_else(|| {
            prerequisite(format!(
                "embeddings for {purpose} (set `embeddings` to a GSEM file or `fallback`)"
            ))
        })
    }

    fn seed_corpus(&self, full: &Corpus, seed: u64) -> Result<Corpus> {
        Ok(full.subsample(self.cfg.subsample_cap, seed)?)
    }

    fn targets(&self, registry: &Registry, filter: Option<&str>) -> Result<Vec<TargetSpec>> {
        let mut targets = self.cfg.target_list()?;
        if let Some(key) = filter {
            let lower = key.to_ascii_lowercase();
            targets.retain(|t| t.name == lower || t.code == key);
            if targets.is_empty() {
                let t = TargetSpec::find_builtin(key)
                    .ok_or_else(|| config_error(format!("unknown target `{key}`")))?;
                targets.push(t);
            }
        }
        for t in &targets {
            t.validate(registry)
                .map_err(|e| config_error(e.to_string()))?;
        }
        Ok(targets)
    }
}

pub fn analyze_genres(run: &Run, out: Option<&Path>) -> Result<String> {
    let registry = run.cfg.load_registry()?;
    let text = run.provenance() + &genre_bounds(&registry).to_tsv();
    if let Some(path) = out {
        write_file(path, &text)?;
    }
    Ok(text)
}

pub fn featurize_fallback(
    run: &Run,
    out: Option<&Path>,
    dim: Option<usize>,
    seed: Option<u64>,
) -> Result<String> {
    let corpus = run.corpus()?;
    let dim = dim.unwrap_or(run.cfg.fallback.dim);
    let seed = seed.unwrap_or(run.cfg.fallback.seed);
    let m = fallback_featurize(
        corpus.entries().flat_map(|e| e.treebank.sentences()),
        dim,
        seed,
    )?;
    let path = out.map_or_else(|| default_fallback_path(run.out()), Path::to_path_buf);
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    m.save(&path)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(format!(
        "{} sentences x {dim} dims -> {}\n",
        m.len(),
        path.display()
    ))
}

pub fn cluster(run: &Run, method: Method) -> Result<String> {
    let full = run.corpus()?;
    let emb = run.require_embeddings(&full, "clustering")?;
    let ccfg = run.cfg.cluster.to_config()?;
    let mut report = String::new();
    for &seed in &run.cfg.seeds {
        let corpus = run.seed_corpus(&full, seed)?;
        let dir = cluster_dir(run.out(), method, seed);
        let entries: Vec<_> = corpus.entries().collect();
        let flagged: usize = entries
            .par_iter()
            .map(|e| -> Result<usize> {
                let code = &e.treebank.code;
                let a = cluster_treebank(&e.treebank, &e.meta, method, &emb, seed, &ccfg)
                    .map_err(|err| err.context(code.clone()))?;
                write_file(
                    &dir.join(format!("{code}.tsv")),
                    run.provenance() + &a.to_tsv(),
                )?;
                let means = a.means_matrix(emb.dim())?;
                write_file(&dir.join(format!("{code}.means.gsem")), means.to_bytes())?;
                Ok(a.flagged.len())
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .sum();
        let _ = writeln!(
            report,
            "{method}\tseed {seed}\t{} treebanks\t{flagged} flagged\t{}",
            entries.len(),
            dir.display()
        );
    }
    Ok(report)
}

/// Languages kept out of the bootstrap pool: every configured target's.
fn bootstrap_exclusions(run: &Run) -> Result<BTreeSet<String>> {
    Ok(run
        .cfg
        .target_list()?
        .into_iter()
        .flat_map(|t| t.languages)
        .collect())
}

pub fn bootstrap(run: &Run) -> Result<String> {
    let full = run.corpus()?;
    let emb = run.require_embeddings(&full, "bootstrapping")?;
    let excluded = bootstrap_exclusions(run)?;
    let mut report = String::new();
    for &seed in &run.cfg.seeds {
        let corpus = run.seed_corpus(&full, seed)?;
        let state = bootstrap_labels(&corpus, &emb, &excluded, &run.cfg.bootstrap.to_config(seed))?;
        let path = labels_path(run.out(), seed);
        write_file(&path, run.provenance() + &state.labels_tsv())?;

        let mut rounds = run.provenance();
        rounds.push_str("round\ttrained_on\tthreshold\tlast_remaining\tremaining\n");
        for r in &state.history {
            let _ = writeln!(
                rounds,
                "{}\t{}\t{}\t{}\t{}",
                r.round, r.trained_on, r.threshold, r.last_remaining, r.remaining
            );
        }
        let _ = writeln!(rounds, "#fallback\t{}", state.fallback_count());
        write_file(&path.with_file_name("rounds.tsv"), rounds)?;

        let _ = writeln!(
            report,
            "boot\tseed {seed}\t{} labelled\t{} seed\t{} threshold\t{} last-remaining\t{} fallback\t{} rounds",
            state.labeled().len(),
            state.count_by_source(LabelSource::Seed),
            state.count_by_source(LabelSource::Threshold),
            state.count_by_source(LabelSource::LastRemaining),
            state.fallback_count(),
            state.round
        );
    }
    Ok(report)
}

fn read_manifest(path: &Path, what: &str) -> Result<SelectionManifest> {
    if !path.is_file() {
        return Err(prerequisite(format!("{what} {}", path.display())));
    }
    let text = std::fs::read_to_string(path)?;
    SelectionManifest::parse(&text).with_context(|| format!("parsing {}", path.display()))
}

fn load_assignments(
    run: &Run,
    pool: &Pool,
    target: &TargetSpec,
    method: Method,
    seed: u64,
) -> Result<Vec<ClusterAssignment>> {
    let dir = cluster_dir(run.out(), method, seed);
    pool.entries()
        .filter(|e| e.meta.has_genre(target.genre))
        .map(|e| {
            let code = &e.treebank.code;
            let tsv = dir.join(format!("{code}.tsv"));
            let means = dir.join(format!("{code}.means.gsem"));
            if !tsv.is_file() || !means.is_file() {
                return Err(prerequisite(format!(
                    "{method} cluster dump {} (run `gensel cluster --method {method}`)",
                    tsv.display()
                )));
            }
            let text = std::fs::read_to_string(&tsv)?;
            let means = EmbeddingMatrix::load(&means)?;
            ClusterAssignment::from_dump(&text, &means)
                .with_context(|| format!("parsing {}", tsv.display()))
        })
        .collect()
}

struct TargetJob<'a> {
    run: &'a Run,
    corpus: &'a Corpus,
    embeddings: Option<&'a EmbeddingMatrix>,
    target: &'a TargetSpec,
    seed: u64,
    mean: Option<Vec<f32>>,
}

impl TargetJob<'_> {
    fn embeddings(&self, strategy: Strategy) -> Result<&EmbeddingMatrix> {
        self.embeddings
            .ok_or_else(|| prerequisite(format!("embeddings for strategy {strategy}")))
    }

    fn mean(&mut self, strategy: Strategy) -> Result<Vec<f32>> {
        if let Some(m) = &self.mean {
            return Ok(m.clone());
        }
        let emb = self.embeddings(strategy)?;
        let tb = &self
            .corpus
            .get(&self.target.code)
            .ok_or_else(|| anyhow!("target treebank {} is not in the corpus", self.target.code))?
            .treebank;
        let sample = sample_target(tb, self.run.cfg.select.target_sample, self.seed);
        let m = target_mean(emb, &sample)
            .with_context(|| format!("target sample of {}", self.target.code))?;
        self.mean = Some(m.clone());
        Ok(m)
    }

    fn prior_len(&self, strategy: Strategy) -> Result<usize> {
        let path = manifest_path(self.run.out(), &self.target.name, strategy, self.seed);
        Ok(read_manifest(&path, &format!("{strategy} manifest"))?.len())
    }

    fn select(&mut self, strategy: Strategy) -> Result<SelectionManifest> {
        let (target, seed) = (self.target, self.seed);
        let pool = exclusion_pool(self.corpus, target)?;
        let m = match strategy {
            Strategy::Meta => select_meta(&pool, target, seed)?,
            Strategy::Boot => {
                let path = labels_path(self.run.out(), seed);
                if !path.is_file() {
                    return Err(prerequisite(format!(
                        "boot labels {} (run `gensel bootstrap`)",
                        path.display()
                    )));
                }
                let labels = parse_labels_tsv(&std::fs::read_to_string(&path)?)?;
                select_boot(&labels, &pool, target, seed)?
            }
            Strategy::Gmm | Strategy::Lda => {
                let method = if strategy == Strategy::Gmm {
                    Method::Gmm
                } else {
                    Method::Lda
                };
                let mean = self.mean(strategy)?;
                let assignments = load_assignments(self.run, &pool, target, method, seed)?;
                select_cluster(&assignments, &pool, &mean, target, seed)?
            }
            Strategy::Sent => {
                let k = self.prior_len(Strategy::Gmm)?;
                let mean = self.mean(strategy)?;
                select_sent(&pool, self.embeddings(strategy)?, &mean, k, target, seed)?
            }
            Strategy::Rand => {
                let boot = self.prior_len(Strategy::Boot)?;
                let gmm = self.prior_len(Strategy::Gmm)?;
                let lda = self.prior_len(Strategy::Lda)?;
                select_rand(&pool, boot, gmm, lda, target, seed)?
            }
            Strategy::Target => select_target(self.corpus, target, seed)?,
        };
        let m = m.with_hash(self.run.hash.clone());
        if strategy != Strategy::Target {
            m.check_exclusion(self.corpus, target)?;
        }
        Ok(m)
    }

    fn write(&self, strategy: Strategy, m: &SelectionManifest) -> Result<()> {
        let out = self.run.out();
        write_file(
            &manifest_path(out, &self.target.name, strategy, self.seed),
            m.to_text(),
        )?;
        let (train, dev) = split_train_dev(&m.ids, self.run.cfg.select.train_ratio, self.seed)?;
        let dir = selection_dir(out, &self.target.name, strategy, self.seed);
        for (name, ids) in [("train", train), ("dev", dev)] {
            let sentences = ids
                .iter()
                .map(|id| {
                    self.corpus
                        .sentence(id)
                        .cloned()
                        .ok_or_else(|| anyhow!("unknown id {id}"))
                })
                .collect::<Result<Vec<Sentence>>>()?;
            let text = format!("# config-hash = {}\n", self.run.hash) + &write_conllu(&sentences);
            write_file(&dir.join(format!("{name}.conllu")), text)?;
        }
        Ok(())
    }
}

pub fn select(run: &Run, strategy: Option<Strategy>, target: Option<&str>) -> Result<String> {
    let strategies = match strategy {
        Some(s) => vec![s],
        None => run.cfg.strategy_list()?,
    };
    let registry = run.cfg.load_registry()?;
    let targets = run.targets(&registry, target)?;
    let full = run.corpus()?;
    let needs_embeddings = strategies
        .iter()
        .any(|s| matches!(s, Strategy::Sent | Strategy::Gmm | Strategy::Lda));
    let embeddings = if needs_embeddings {
        let s = strategies
            .iter()
            .find(|s| matches!(s, Strategy::Sent | Strategy::Gmm | Strategy::Lda))
            .expect("checked above");
        Some(run.require_embeddings(&full, &format!("strategy {s}"))?)
    } else {
        None
    };

    let mut report = String::new();
    for &seed in &run.cfg.seeds {
        let corpus = run.seed_corpus(&full, seed)?;
        let lines = targets
            .par_iter()
            .map(|target| -> Result<String> {
                let mut job = TargetJob {
                    run,
                    corpus: &corpus,
                    embeddings: embeddings.as_ref(),
                    target,
                    seed,
                    mean: None,
                };
                let mut lines = String::new();
                for &s in &strategies {
                    let m = job
                        .select(s)
                        .with_context(|| format!("{s} for {} (seed {seed})", target.name))?;
                    job.write(s, &m)?;
                    let _ = writeln!(
                        lines,
                        "{}\t{s}\tseed {seed}\t{} sentences",
                        target.name,
                        m.len()
                    );
                }
                Ok(lines)
            })
            .collect::<Result<Vec<_>>>()?;
        report.extend(lines);
    }
    Ok(report)
}

/// `NAME=VALUE` command-line pairs.
pub fn parse_pair(s: &str) -> Result<(String, PathBuf)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| config_error(format!("expected NAME=PATH, got `{s}`")))?;
    Ok((k.to_string(), PathBuf::from(v)))
}

/// `<dir>/<target>/seed-<s>.conllu` predictions by seed.
fn read_predictions(dir: &Path, target: &str) -> Result<BTreeMap<u64, Vec<Sentence>>> {
    let tdir = dir.join(target);
    let listing = std::fs::read_dir(&tdir)
        .map_err(|e| prerequisite(format!("predictions {}: {e}", tdir.display())))?;
    let mut out = BTreeMap::new();
    for entry in listing {
        let path = entry?.path();
        let name = path
            .file_name()
            .and_then(|n| n.to_str())
            .unwrap_or_default();
        let Some(seed) = name
            .strip_prefix("seed-")
            .and_then(|r| r.strip_suffix(".conllu"))
        else {
            continue;
        };
        let seed: u64 = seed
            .parse()
            .with_context(|| format!("bad seed in {}", path.display()))?;
        out.insert(seed, read_conllu(&path)?);
    }
    if out.is_empty() {
        return Err(prerequisite(format!(
            "no seed-<n>.conllu files in {}",
            tdir.display()
        )));
    }
    Ok(out)
}

pub fn eval(
    run: &Run,
    golds: &[(String, PathBuf)],
    systems: &[(String, PathBuf)],
    baselines: &[String],
    out: Option<&Path>,
) -> Result<String> {
    if golds.is_empty() || systems.is_empty() {
        return Err(config_error(
            "eval needs at least one --gold and one --system",
        ));
    }
    let mode: DeprelMatch = run.cfg.deprel_mode()?;
    let baselines: Vec<&String> = if baselines.is_empty() {
        run.cfg.eval.baselines.iter().collect()
    } else {
        baselines.iter().collect()
    };
    for b in &baselines {
        if !systems.iter().any(|(name, _)| name == *b) {
            return Err(config_error(format!(
                "baseline `{b}` is not among the systems"
            )));
        }
    }
    let comparisons = systems.len() * baselines.len()
        - systems
            .iter()
            .filter(|(n, _)| baselines.contains(&n))
            .count();

    let mut table = run.provenance();
    table.push_str("target\tsystem\tseeds\tlas_mean\tlas_std\tuas_mean\tuas_std\tbetter_than\n");
    let mut detail =
        String::from("target\tsystem\tbaseline\tseed\tp_value\tadjusted_alpha\tsignificant\n");
    for (target, gold_path) in golds {
        let gold = read_conllu(gold_path)?;
        let preds: Vec<(&str, BTreeMap<u64, Vec<Sentence>>)> = systems
            .iter()
            .map(|(name, dir)| Ok((name.as_str(), read_predictions(dir, target)?)))
            .collect::<Result<_>>()?;
        let seeds: Vec<u64> = preds[0].1.keys().copied().collect();
        for (name, p) in &preds {
            if !p.keys().copied().eq(seeds.iter().copied()) {
                bail!(
                    "seed-count mismatch for {target}: {} has seeds {:?}, {} has {seeds:?}",
                    name,
                    p.keys().collect::<Vec<_>>(),
                    preds[0].0
                );
            }
        }
        let by_name: BTreeMap<&str, &BTreeMap<u64, Vec<Sentence>>> =
            preds.iter().map(|(n, p)| (*n, p)).collect();

        for (name, p) in &preds {
            let scores = p
                .values()
                .map(|pred| las_uas(&gold, pred, mode))
                .collect::<gensel::Result<Vec<_>>>()
                .with_context(|| format!("scoring {name} on {target}"))?;
            let summary = aggregate_seeds(&scores);
            let mut better = Vec::new();
            for b in baselines.iter().filter(|b| b.as_str() != *name) {
                let base = by_name[b.as_str()];
                let mut all = true;
                for &seed in &seeds {
                    let r = paired_sign_test(
                        &gold,
                        &base[&seed],
                        &p[&seed],
                        run.cfg.eval.resamples,
                        seed,
                        mode,
                    )?;
                    let adj = bonferroni(r.p_value, comparisons.max(1), run.cfg.eval.alpha);
                    all &= adj.significant;
                    let _ = writeln!(
                        detail,
                        "{target}\t{name}\t{b}\t{seed}\t{:.4}\t{:.6}\t{}",
                        adj.p_value, adj.adjusted_alpha, adj.significant
                    );
                }
                if all {
                    better.push(b.as_str());
                }
            }
            let _ = writeln!(
                table,
                "{target}\t{name}\t{}\t{:.2}\t{:.2}\t{:.2}\t{:.2}\t{}",
                seeds.len(),
                summary.las_mean,
                summary.las_std,
                summary.uas_mean,
                summary.uas_std,
                if better.is_empty() {
                    "-".to_string()
                } else {
                    better.join(",")
                }
            );
        }
    }
    if !baselines.is_empty() {
        table.push('\n');
        table.push_str(&detail);
    }
    if let Some(path) = out {
        write_file(path, &table)?;
    }
    Ok(table)
}

#[derive(Debug, Clone)]
pub struct SignificanceArgs {
    pub gold: PathBuf,
    pub a: PathBuf,
    pub b: PathBuf,
    pub resamples: Option<usize>,
    pub seed: Option<u64>,
    pub comparisons: usize,
    pub alpha: Option<f64>,
}

pub fn significance(run: &Run, args: &SignificanceArgs) -> Result<String> {
    if args.comparisons == 0 {
        return Err(config_error("--comparisons must be at least 1"));
    }
    let gold = read_conllu(&args.gold)?;
    let a = read_conllu(&args.a)?;
    let b = read_conllu(&args.b)?;
    let resamples = args.resamples.unwrap_or(run.cfg.eval.resamples);
    let seed = args.seed.unwrap_or(run.cfg.seeds[0]);
    let r = paired_sign_test(&gold, &a, &b, resamples, seed, run.cfg.deprel_mode()?)?;
    let adj = bonferroni(
        r.p_value,
        args.comparisons,
        args.alpha.unwrap_or(run.cfg.eval.alpha),
    );
    Ok(format!(
        "p_value\tresamples\tadjusted_alpha\tsignificant\n{}\t{}\t{}\t{}\n",
        adj.p_value, r.resamples, adj.adjusted_alpha, adj.significant
    ))
}

pub fn manifest_diff(a: &Path, b: &Path) -> Result<String> {
    let read = |p: &Path| -> Result<SelectionManifest> {
        let text =
            std::fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
        SelectionManifest::parse(&text).with_context(|| format!("parsing {}", p.display()))
    };
    let (ma, mb) = (read(a)?, read(b)?);
    let sa: BTreeSet<&str> = ma.ids.iter().map(String::as_str).collect();
    let sb: BTreeSet<&str> = mb.ids.iter().map(String::as_str).collect();
    let mut out = String::new();
    let _ = writeln!(out, "#a\t{}\t{}\tseed {}", ma.strategy, ma.target, ma.seed);
    let _ = writeln!(out, "#b\t{}\t{}\tseed {}", mb.strategy, mb.target, mb.seed);
    let _ = writeln!(out, "shared\t{}", sa.intersection(&sb).count());
    let _ = writeln!(out, "only_a\t{}", sa.difference(&sb).count());
    let _ = writeln!(out, "only_b\t{}", sb.difference(&sa).count());
    out.push_str("treebank\ta\tb\n");
    let (ca, cb) = (ma.counts(), mb.counts());
    let codes: BTreeSet<&String> = ca.keys().chain(cb.keys()).collect();
    for code in codes {
        let _ = writeln!(
            out,
            "{code}\t{}\t{}",
            ca.get(code).copied().unwrap_or(0),
            cb.get(code).copied().unwrap_or(0)
        );
    }
    Ok(out)
}
