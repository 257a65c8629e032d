use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use anyhow::{Context as _, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use gensel::bootstrap::{BootConfig, TrainConfig};
use gensel::cluster::{ClusterConfig, CovarianceKind, GmmConfig, LdaConfig};
use gensel::corpus::{Registry, DEFAULT_EXCLUSIONS};
use gensel::ngrams::VocabConfig;
use gensel::{Genre, Strategy, TargetSpec};

pub const CORPUS_ROOT_ENV: &str = "GENSEL_CORPUS_ROOT";

/// A configuration problem: exit code 2.
#[derive(Debug)]
pub struct ConfigError(pub String);

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for ConfigError {}

/// A missing upstream artifact: exit code 3.
#[derive(Debug)]
pub struct Prerequisite(pub String);

impl fmt::Display for Prerequisite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "missing prerequisite: {}", self.0)
    }
}

impl std::error::Error for Prerequisite {}

pub fn config_error(msg: impl Into<String>) -> anyhow::Error {
    ConfigError(msg.into()).into()
}

pub fn prerequisite(msg: impl Into<String>) -> anyhow::Error {
    Prerequisite(msg.into()).into()
}

/// A target given by builtin name or spelled out.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum TargetEntry {
    Builtin(String),
    Custom {
        name: String,
        code: String,
        genre: String,
        /// Exclusion languages; the target's own language is added.
        #[serde(default)]
        languages: Vec<String>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        proxy: Option<String>,
    },
}

impl TargetEntry {
    pub fn resolve(&self) -> Result<TargetSpec> {
        match self {
            TargetEntry::Builtin(key) => TargetSpec::find_builtin(key)
                .ok_or_else(|| config_error(format!("unknown target `{key}`"))),
            TargetEntry::Custom {
                name,
                code,
                genre,
                languages,
                proxy,
            } => {
                let genre: Genre = genre
                    .parse()
                    .map_err(|e| config_error(format!("target {name}: {e}")))?;
                let own = gensel::corpus::language_of_code(code).ok_or_else(|| {
                    config_error(format!("target {name}: `{code}` is not a UD_ code"))
                })?;
                let langs: BTreeSet<String> = std::iter::once(own.to_string())
                    .chain(languages.iter().cloned())
                    .collect();
                let mut t = TargetSpec::new(name, code, genre, langs);
                t.proxy = proxy.clone();
                Ok(t)
            }
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct FallbackSection {
    pub dim: usize,
    pub seed: u64,
}

impl Default for FallbackSection {
    fn default() -> Self {
        FallbackSection { dim: 256, seed: 41 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct BootSection {
    pub threshold: f64,
    pub max_rounds: usize,
    pub train_cap: usize,
    pub lr: f64,
    pub batch: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub weight_decay: f64,
    pub holdout: f64,
}

impl Default for BootSection {
    fn default() -> Self {
        let b = BootConfig::default();
        BootSection {
            threshold: b.threshold,
            max_rounds: b.max_rounds,
            train_cap: b.train_cap,
            lr: b.train.lr,
            batch: b.train.batch,
            max_epochs: b.train.max_epochs,
            patience: b.train.patience,
            weight_decay: b.train.weight_decay,
            holdout: b.train.holdout,
        }
    }
}

impl BootSection {
    pub fn to_config(&self, seed: u64) -> BootConfig {
        BootConfig {
            threshold: self.threshold,
            max_rounds: self.max_rounds,
            train_cap: self.train_cap,
            seed,
            train: TrainConfig {
                lr: self.lr,
                batch: self.batch,
                max_epochs: self.max_epochs,
                patience: self.patience,
                weight_decay: self.weight_decay,
                holdout: self.holdout,
                seed,
            },
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ClusterSection {
    /// `full` or `diagonal`.
    pub covariance: String,
    pub reg_covar: f64,
    pub max_iter: usize,
    pub tol: f64,
    pub n_init: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lda_alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lda_beta: Option<f64>,
    pub lda_sweeps: usize,
    pub ngram_min: usize,
    pub ngram_max: usize,
    pub min_df: usize,
    pub max_df_ratio: f64,
}

impl Default for ClusterSection {
    fn default() -> Self {
        let g = GmmConfig::default();
        let l = LdaConfig::default();
        let v = VocabConfig::default();
        ClusterSection {
            covariance: match g.covariance {
                CovarianceKind::Full => "full".into(),
                CovarianceKind::Diagonal => "diagonal".into(),
            },
            reg_covar: g.reg_covar,
            max_iter: g.max_iter,
            tol: g.tol,
            n_init: g.n_init,
            lda_alpha: l.alpha,
            lda_beta: l.beta,
            lda_sweeps: l.sweeps,
            ngram_min: v.n_min,
            ngram_max: v.n_max,
            min_df: v.min_df,
            max_df_ratio: v.max_df_ratio,
        }
    }
}

impl ClusterSection {
    pub fn to_config(&self) -> Result<ClusterConfig> {
        let covariance = match self.covariance.as_str() {
            "full" => CovarianceKind::Full,
            "diagonal" => CovarianceKind::Diagonal,
            other => return Err(config_error(format!("unknown covariance `{other}`"))),
        };
        Ok(ClusterConfig {
            gmm: GmmConfig {
                reg_covar: self.reg_covar,
                max_iter: self.max_iter,
                tol: self.tol,
                n_init: self.n_init,
                covariance,
            },
            lda: LdaConfig {
                alpha: self.lda_alpha,
                beta: self.lda_beta,
                sweeps: self.lda_sweeps,
            },
            vocab: VocabConfig {
                n_min: self.ngram_min,
                n_max: self.ngram_max,
                min_df: self.min_df,
                max_df_ratio: self.max_df_ratio,
            },
        })
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct SelectSection {
    /// Target sentences averaged into the query embedding.
    pub target_sample: usize,
    /// Share of each selection written to the proxy train file.
    pub train_ratio: f64,
}

impl Default for SelectSection {
    fn default() -> Self {
        SelectSection {
            target_sample: 100,
            train_ratio: 0.8,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct EvalSection {
    pub resamples: usize,
    pub alpha: f64,
    /// `universal` compares relations without subtypes, `full` compares them whole.
    pub deprel: String,
    pub baselines: Vec<String>,
}

impl Default for EvalSection {
    fn default() -> Self {
        EvalSection {
            resamples: 10_000,
            alpha: 0.05,
            deprel: "universal".into(),
            baselines: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub corpus_root: Option<PathBuf>,
    /// Registry TSV; the bundled UD v2.7 registry when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub registry: Option<PathBuf>,
    /// A GSEM file, or `fallback` for the hashed n-gram featurizer.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub embeddings: Option<String>,
    pub output: PathBuf,
    pub seeds: Vec<u64>,
    pub strategies: Vec<String>,
    pub subsample_cap: usize,
    pub exclusions: Vec<String>,
    pub targets: Vec<TargetEntry>,
    pub fallback: FallbackSection,
    pub bootstrap: BootSection,
    pub cluster: ClusterSection,
    pub select: SelectSection,
    pub eval: EvalSection,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            corpus_root: None,
            registry: None,
            embeddings: None,
            output: PathBuf::from("gensel-out"),
            seeds: vec![41, 42, 43],
            strategies: Strategy::SELECTION.iter().map(|s| s.to_string()).collect(),
            subsample_cap: 20_000,
            exclusions: DEFAULT_EXCLUSIONS.iter().map(|s| s.to_string()).collect(),
            targets: TargetSpec::builtin()
                .into_iter()
                .map(|t| TargetEntry::Builtin(t.name))
                .collect(),
            fallback: FallbackSection::default(),
            bootstrap: BootSection::default(),
            cluster: ClusterSection::default(),
            select: SelectSection::default(),
            eval: EvalSection::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_error(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| config_error(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(config_error("seeds must not be empty"));
        }
        if self.strategies.is_empty() {
            return Err(config_error("strategies must not be empty"));
        }
        self.strategy_list()?;
        if self.subsample_cap == 0 {
            return Err(config_error("subsample_cap must be at least 1"));
        }
        if !(self.select.train_ratio > 0.0 && self.select.train_ratio < 1.0) {
            return Err(config_error("select.train_ratio must lie in (0, 1)"));
        }
        self.cluster.to_config()?;
        self.deprel_mode()?;
        Ok(())
    }

    pub fn strategy_list(&self) -> Result<Vec<Strategy>> {
        let mut out: Vec<Strategy> = self
            .strategies
            .iter()
            .map(|s| {
                s.parse::<Strategy>()
                    .map_err(|e| config_error(e.to_string()))
            })
            .collect::<Result<_>>()?;
        out.sort_by_key(|s| dependency_rank(*s));
        out.dedup();
        Ok(out)
    }

    pub fn target_list(&self) -> Result<Vec<TargetSpec>> {
        self.targets.iter().map(TargetEntry::resolve).collect()
    }

    pub fn deprel_mode(&self) -> Result<gensel::analysis::DeprelMatch> {
        use gensel::analysis::DeprelMatch;
        match self.eval.deprel.as_str() {
            "universal" => Ok(DeprelMatch::Universal),
            "full" => Ok(DeprelMatch::Full),
            other => Err(config_error(format!("unknown deprel mode `{other}`"))),
        }
    }

    /// Flag, then config file, then environment.
    pub fn corpus_root(&self) -> Result<PathBuf> {
        if let Some(root) = &self.corpus_root {
            return Ok(root.clone());
        }
        match std::env::var_os(CORPUS_ROOT_ENV) {
            Some(v) if !v.is_empty() => Ok(PathBuf::from(v)),
            _ => Err(config_error(format!(
                "no corpus root: set corpus_root, --corpus-root or {CORPUS_ROOT_ENV}"
            ))),
        }
    }

    pub fn load_registry(&self) -> Result<Registry> {
        let full = match &self.registry {
            Some(path) => {
                if !path.is_file() {
                    return Err(config_error(format!(
                        "registry {} does not exist",
                        path.display()
                    )));
                }
                Registry::load(path)
                    .with_context(|| format!("loading registry {}", path.display()))?
            }
            None => Registry::ud27(),
        };
        Ok(full.without(self.exclusions.iter().map(String::as_str)))
    }

    pub fn exclusion_set(&self) -> BTreeSet<String> {
        self.exclusions.iter().cloned().collect()
    }

    /// SHA-256 over the serialised settings. The output directory is left
    /// out so that reruns into a fresh directory carry the same hash.
    pub fn hash(&self) -> Result<String> {
        let mut canonical = self.clone();
        canonical.output = PathBuf::new();
        let text = toml::to_string(&canonical).context("serialising config")?;
        Ok(hex::encode(Sha256::digest(text.as_bytes())))
    }
}

/// Strategies run in an order where every strategy's inputs already exist.
fn dependency_rank(s: Strategy) -> usize {
    match s {
        Strategy::Meta => 0,
        Strategy::Boot => 1,
        Strategy::Gmm => 2,
        Strategy::Lda => 3,
        Strategy::Sent => 4,
        Strategy::Rand => 5,
        Strategy::Target => 6,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_and_hash_ignores_output() {
        let cfg = RunConfig::default();
        let text = toml::to_string(&cfg).unwrap();
        let back: RunConfig = toml::from_str(&text).unwrap();
        assert_eq!(back, cfg);
        let mut moved = cfg.clone();
        moved.output = PathBuf::from("/elsewhere");
        assert_eq!(moved.hash().unwrap(), cfg.hash().unwrap());
        moved.seeds = vec![7];
        assert_ne!(moved.hash().unwrap(), cfg.hash().unwrap());
    }

    #[test]
    fn custom_target_adds_own_language() {
        let t = TargetEntry::Custom {
            name: "x".into(),
            code: "UD_Hindi_English-HIENCS".into(),
            genre: "social".into(),
            languages: vec!["Hindi".into()],
            proxy: None,
        }
        .resolve()
        .unwrap();
        assert_eq!(t.languages.len(), 2);
        assert!(t.languages.contains("Hindi_English"));
    }

    #[test]
    fn strategies_sorted_by_dependency() {
        let cfg = RunConfig::default();
        let order = cfg.strategy_list().unwrap();
        assert_eq!(order.first(), Some(&Strategy::Meta));
        assert_eq!(order.last(), Some(&Strategy::Rand));
    }
}
