//! The treebank genre registry: a TSV mapping each treebank code to its
//! language, metadata genres and per-split sentence counts.
//!
//! ```text
//! code            language   genres        train  dev  test
//! UD_Tamil-TTB    Tamil      news          400    80   120
//! ```
//!
//! Lines starting with `#` are comments; the header row is optional. A `-`
//! or empty count means the split does not exist.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::genre::{Genre, GenreSet};

pub const SPLITS: [&str; 3] = ["train", "dev", "test"];

/// The registry shipped with the crate: UD v2.7 treebanks with sizes and
/// metadata genre sets, no text.
pub const UD27_REGISTRY: &str = include_str!("../../data/ud27_registry.tsv");

/// Treebanks left out for licensing reasons.
pub const DEFAULT_EXCLUSIONS: [&str; 6] = [
    "UD_Arabic-NYUAD",
    "UD_English-ESL",
    "UD_English-GUMReddit",
    "UD_French-FTB",
    "UD_Japanese-BCCWJ",
    "UD_Mbya_Guarani-Dooley",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TreebankMeta {
    pub code: String,
    pub language: String,
    pub genres: GenreSet,
    pub splits: BTreeMap<String, usize>,
}

impl TreebankMeta {
    pub fn size(&self) -> usize {
        self.splits.values().sum()
    }

    pub fn is_single_genre(&self) -> bool {
        self.genres.len() == 1
    }

    pub fn has_genre(&self, genre: Genre) -> bool {
        self.genres.contains(genre)
    }
}

/// Language part of a `UD_<Language>-<Name>` code, if it has that shape.
pub fn language_of_code(code: &str) -> Option<&str> {
    code.strip_prefix("UD_")?
        .split_once('-')
        .map(|(lang, _)| lang)
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Registry {
    entries: BTreeMap<String, TreebankMeta>,
}

impl Registry {
    pub fn ud27() -> Self {
        Registry::parse(UD27_REGISTRY).expect("bundled registry is well-formed")
    }

    pub fn from_entries(entries: impl IntoIterator<Item = TreebankMeta>) -> Self {
        Registry {
            entries: entries.into_iter().map(|m| (m.code.clone(), m)).collect(),
        }
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::config(format!("cannot read registry {}: {e}", path.display())))?;
        Registry::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut entries = BTreeMap::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let row = raw.trim_end_matches('\r');
            if row.trim().is_empty() || row.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = row.split('\t').collect();
            if cols[0] == "code" {
                continue;
            }
            if cols.len() != 3 + SPLITS.len() {
                return Err(Error::parse(
                    line,
                    format!(
                        "registry rows need {} columns, found {}",
                        3 + SPLITS.len(),
                        cols.len()
                    ),
                ));
            }
            let genres: GenreSet = cols[2]
                .parse()
                .map_err(|e: Error| Error::parse(line, e.to_string()))?;
            if genres.is_empty() {
                return Err(Error::parse(
                    line,
                    format!("treebank {} lists no genre", cols[0]),
                ));
            }
            let mut splits = BTreeMap::new();
            for (name, field) in SPLITS.iter().zip(&cols[3..]) {
                let field = field.trim();
                if field.is_empty() || field == "-" {
                    continue;
                }
                let count: usize = field
                    .parse()
                    .map_err(|_| Error::parse(line, format!("bad {name} count `{field}`")))?;
                splits.insert(name.to_string(), count);
            }
            let meta = TreebankMeta {
                code: cols[0].to_string(),
                language: cols[1].to_string(),
                genres,
                splits,
            };
            if entries.insert(meta.code.clone(), meta).is_some() {
                return Err(Error::parse(
                    line,
                    format!("duplicate registry entry {}", cols[0]),
                ));
            }
        }
        Ok(Registry { entries })
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from("code\tlanguage\tgenres\ttrain\tdev\ttest\n");
        for meta in self.entries.values() {
            let _ = write!(out, "{}\t{}\t{}", meta.code, meta.language, meta.genres);
            for split in SPLITS {
                match meta.splits.get(split) {
                    Some(n) => {
                        let _ = write!(out, "\t{n}");
                    }
                    None => out.push_str("\t-"),
                }
            }
            out.push('\n');
        }
        out
    }

    pub fn get(&self, code: &str) -> Option<&TreebankMeta> {
        self.entries.get(code)
    }

    pub fn insert(&mut self, meta: TreebankMeta) {
        self.entries.insert(meta.code.clone(), meta);
    }

    /// Entries in code order.
    pub fn iter(&self) -> impl Iterator<Item = &TreebankMeta> {
        self.entries.values()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// A copy without the given codes.
    pub fn without<'a>(&self, exclusions: impl IntoIterator<Item = &'a str>) -> Registry {
        let mut out = self.clone();
        for code in exclusions {
            out.entries.remove(code);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_and_write() {
        let text = "# comment\ncode\tlanguage\tgenres\ttrain\tdev\ttest\n\
                    UD_Tamil-TTB\tTamil\tnews\t400\t80\t120\n\
                    UD_Cantonese-HK\tCantonese\tspoken\t-\t-\t1004\n";
        let reg = Registry::parse(text).unwrap();
        assert_eq!(reg.len(), 2);
        let hk = reg.get("UD_Cantonese-HK").unwrap();
        assert_eq!(hk.size(), 1004);
        assert!(hk.splits.get("train").is_none());
        assert!(hk.is_single_genre());
        assert_eq!(Registry::parse(&reg.to_tsv()).unwrap(), reg);
    }

    #[test]
    fn rejects_bad_rows() {
        assert!(Registry::parse("UD_X-Y\tX\tnews\t1\t2\n").is_err());
        assert!(Registry::parse("UD_X-Y\tX\tsports\t1\t2\t3\n").is_err());
        assert!(Registry::parse("UD_X-Y\tX\t\t1\t2\t3\n").is_err());
        assert!(Registry::parse("UD_X-Y\tX\tnews\tmany\t2\t3\n").is_err());
    }

    #[test]
    fn language_from_code() {
        assert_eq!(
            language_of_code("UD_Turkish_German-SAGT"),
            Some("Turkish_German")
        );
        assert_eq!(language_of_code("TA-TTB"), None);
    }

    #[test]
    fn bundled_registry_loads() {
        let reg = Registry::ud27();
        assert!(reg.len() >= 177);
        for code in DEFAULT_EXCLUSIONS {
            assert!(
                reg.get(code).is_some(),
                "{code} missing from bundled registry"
            );
        }
        assert_eq!(
            reg.get("UD_Swedish_Sign_Language-SSLC").unwrap().size(),
            203
        );
    }
}
