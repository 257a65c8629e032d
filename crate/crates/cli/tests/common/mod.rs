#![allow(dead_code)]

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gensel::corpus::write_treebank;
use gensel::synth::SynthTreebank;
use gensel::Genre;

pub const BIN: &str = env!("CARGO_BIN_EXE_gensel");

/// Five small treebanks: two single-genre seeds, two mixtures and a spoken target.
pub fn fixture_specs() -> Vec<SynthTreebank> {
    vec![
        SynthTreebank::new("UD_Alpha-NW", "Alpha", &[(Genre::News, 60)]),
        SynthTreebank::new("UD_Beta-SP", "Beta", &[(Genre::Spoken, 60)]),
        SynthTreebank::new(
            "UD_Gamma-MX",
            "Gamma",
            &[(Genre::News, 40), (Genre::Spoken, 40)],
        ),
        SynthTreebank::new(
            "UD_Delta-MX",
            "Delta",
            &[(Genre::News, 30), (Genre::Wiki, 30)],
        ),
        SynthTreebank::new("UD_Target-T", "Target", &[(Genre::Spoken, 40)]),
    ]
}

pub struct Fixture {
    pub dir: tempfile::TempDir,
}

impl Fixture {
    pub fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        let corpus = dir.path().join("corpus");
        let mut registry = String::from("code\tlanguage\tgenres\ttrain\tdev\ttest\n");
        for spec in fixture_specs() {
            let (tb, meta, _) = spec.build(41);
            write_treebank(&corpus, &tb).unwrap();
            registry.push_str(&format!(
                "{}\t{}\t{}\t{}\t-\t-\n",
                meta.code,
                meta.language,
                meta.genres
                    .iter()
                    .map(|g| g.as_str())
                    .collect::<Vec<_>>()
                    .join(","),
                meta.size()
            ));
        }
        std::fs::write(dir.path().join("registry.tsv"), registry).unwrap();
        let f = Fixture { dir };
        f.write_config("run.toml", "out", "embeddings = \"fallback\"\n");
        f
    }

    pub fn path(&self) -> &Path {
        self.dir.path()
    }

    pub fn corpus(&self) -> PathBuf {
        self.path().join("corpus")
    }

    pub fn registry(&self) -> PathBuf {
        self.path().join("registry.tsv")
    }

    /// Writes a config with the given output directory; `extra` is spliced
    /// in among the top-level keys.
    pub fn write_config(&self, name: &str, out: &str, extra: &str) -> PathBuf {
        let text = format!(
            r#"corpus_root = "{corpus}"
registry = "{registry}"
output = "{out}"
seeds = [41, 42, 43]
exclusions = []
{extra}
targets = [{{ name = "tgt", code = "UD_Target-T", genre = "spoken" }}]

[fallback]
dim = 64

[cluster]
covariance = "diagonal"

[eval]
resamples = 1000
"#,
            corpus = self.corpus().display(),
            registry = self.registry().display(),
            out = self.path().join(out).display(),
        );
        let path = self.path().join(name);
        std::fs::write(&path, text).unwrap();
        path
    }

    pub fn out(&self) -> PathBuf {
        self.path().join("out")
    }

    pub fn gensel(&self, config: &Path, args: &[&str]) -> Output {
        Command::new(BIN)
            .arg("--config")
            .arg(config)
            .args(args)
            .env_remove("GENSEL_CORPUS_ROOT")
            .output()
            .unwrap()
    }

    /// Clusters with both methods, bootstraps and selects every strategy.
    pub fn pipeline(&self, config: &Path) {
        for args in [
            &["cluster", "--method", "gmm"][..],
            &["cluster", "--method", "lda"],
            &["bootstrap"],
            &["select"],
        ] {
            let o = self.gensel(config, args);
            assert_ok(&o, args);
        }
    }
}

pub fn assert_ok(o: &Output, what: &[&str]) {
    assert!(
        o.status.success(),
        "{what:?} failed with {:?}\nstdout:\n{}\nstderr:\n{}",
        o.status.code(),
        String::from_utf8_lossy(&o.stdout),
        String::from_utf8_lossy(&o.stderr)
    );
}

pub fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// Every file under `dir`, relative path → bytes.
pub fn snapshot(dir: &Path) -> std::collections::BTreeMap<PathBuf, Vec<u8>> {
    let mut out = std::collections::BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(
                    p.strip_prefix(dir).unwrap().to_path_buf(),
                    std::fs::read(&p).unwrap(),
                );
            }
        }
    }
    out
}
