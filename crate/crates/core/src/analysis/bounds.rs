use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::corpus::{Corpus, Registry};
use crate::error::{Error, Result};
use crate::genre::Genre;
use crate::select::SelectionManifest;

/// Size range of one genre implied by treebank-level metadata.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenreBound {
    pub genre: Genre,
    /// Sentences in treebanks listing only this genre.
    pub lower: usize,
    /// Sentences in all treebanks listing this genre.
    pub upper: usize,
    /// Each treebank's size split evenly over its genres.
    pub uniform: f64,
    pub treebank_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenreBounds {
    pub total: usize,
    pub rows: Vec<GenreBound>,
}

impl GenreBounds {
    pub fn get(&self, genre: Genre) -> &GenreBound {
        &self.rows[genre.index()]
    }

    fn pct(&self, x: f64) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            100.0 * x / self.total as f64
        }
    }

    /// `(lower, upper, uniform)` as percentages of all sentences.
    pub fn percentages(&self, genre: Genre) -> (f64, f64, f64) {
        let b = self.get(genre);
        (
            self.pct(b.lower as f64),
            self.pct(b.upper as f64),
            self.pct(b.uniform),
        )
    }

    pub fn to_tsv(&self) -> String {
        let mut out = String::from(
            "genre\ttreebanks\tlower\tupper\tuniform\tlower_pct\tupper_pct\tuniform_pct\n",
        );
        for b in &self.rows {
            let (lo, hi, un) = self.percentages(b.genre);
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{:.1}\t{lo:.2}\t{hi:.2}\t{un:.2}",
                b.genre, b.treebank_count, b.lower, b.upper, b.uniform
            );
        }
        out
    }
}

pub fn genre_bounds(registry: &Registry) -> GenreBounds {
    let mut rows: Vec<GenreBound> = Genre::ALL
        .iter()
        .map(|&genre| GenreBound {
            genre,
            lower: 0,
            upper: 0,
            uniform: 0.0,
            treebank_count: 0,
        })
        .collect();
    let mut total = 0;
    for meta in registry.iter() {
        let size = meta.size();
        total += size;
        let k = meta.genres.len();
        for g in meta.genres.iter() {
            let row = &mut rows[g.index()];
            row.treebank_count += 1;
            row.upper += size;
            row.uniform += size as f64 / k as f64;
            if k == 1 {
                row.lower += size;
            }
        }
    }
    GenreBounds { total, rows }
}

/// Share of a manifest drawn from each corpus treebank, divided by the
/// largest share. Treebanks contributing nothing appear with 0.
pub fn selection_matrix(
    manifest: &SelectionManifest,
    corpus: &Corpus,
) -> Result<Vec<(String, f64)>> {
    let mut counts: BTreeMap<&str, usize> = corpus.codes().map(|c| (c, 0)).collect();
    for id in &manifest.ids {
        let code = corpus
            .treebank_of(id)
            .ok_or_else(|| Error::invalid(format!("manifest id {id} is not in the corpus")))?;
        *counts.get_mut(code).expect("corpus code") += 1;
    }
    let max = counts.values().copied().max().unwrap_or(0);
    Ok(counts
        .into_iter()
        .map(|(code, n)| {
            let p = if max == 0 { 0.0 } else { n as f64 / max as f64 };
            (code.to_string(), p)
        })
        .collect())
}

/// Treebanks as rows and labelled selections as columns.
pub fn selection_table(columns: &[(String, Vec<(String, f64)>)]) -> String {
    let mut out = String::from("treebank");
    for (label, _) in columns {
        out.push('\t');
        out.push_str(label);
    }
    out.push('\n');
    let Some((_, first)) = columns.first() else {
        return out;
    };
    for (i, (code, _)) in first.iter().enumerate() {
        out.push_str(code);
        for (_, col) in columns {
            let _ = write!(out, "\t{:.4}", col[i].1);
        }
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::TreebankMeta;
    use crate::genre::GenreSet;
    use crate::select::Strategy;
    use crate::synth::{synth_corpus, SynthTreebank};

    fn meta(code: &str, genres: &[Genre], size: usize) -> TreebankMeta {
        TreebankMeta {
            code: code.into(),
            language: "X".into(),
            genres: genres.iter().copied().collect::<GenreSet>(),
            splits: BTreeMap::from([("test".to_string(), size)]),
        }
    }

    #[test]
    fn formula_example() {
        let reg = Registry::from_entries([
            meta("A", &[Genre::News], 100),
            meta("B", &[Genre::News, Genre::Wiki], 50),
        ]);
        let b = genre_bounds(&reg);
        let news = b.get(Genre::News);
        assert_eq!(
            (news.lower, news.upper, news.uniform, news.treebank_count),
            (100, 150, 125.0, 2)
        );
        let wiki = b.get(Genre::Wiki);
        assert_eq!((wiki.lower, wiki.upper, wiki.uniform), (0, 50, 25.0));
        let poetry = b.get(Genre::Poetry);
        assert_eq!(
            (
                poetry.lower,
                poetry.upper,
                poetry.uniform,
                poetry.treebank_count
            ),
            (0, 0, 0.0, 0)
        );
        let uniform_sum: f64 = b.rows.iter().map(|r| r.uniform).sum();
        assert_eq!(uniform_sum, 150.0);
        assert_eq!(b.to_tsv().lines().count(), 19);
    }

    #[test]
    fn selection_proportions() {
        let (c, _) = synth_corpus(
            &[
                SynthTreebank::new("UD_A-X", "A", &[(Genre::News, 4)]),
                SynthTreebank::new("UD_B-X", "B", &[(Genre::News, 4)]),
                SynthTreebank::new("UD_C-X", "C", &[(Genre::News, 4)]),
            ],
            41,
        )
        .unwrap();
        let ids = |code: &str, n: usize| -> Vec<String> {
            c.get(code)
                .unwrap()
                .treebank
                .sentences()
                .take(n)
                .map(|s| s.global_id.clone())
                .collect()
        };
        let one = SelectionManifest::new(Strategy::Meta, "t", 41, ids("UD_A-X", 3)).unwrap();
        let rows = selection_matrix(&one, &c).unwrap();
        assert_eq!(
            rows.iter().map(|r| r.1).collect::<Vec<_>>(),
            vec![1.0, 0.0, 0.0]
        );

        let mut both = ids("UD_A-X", 2);
        both.extend(ids("UD_C-X", 2));
        let two = SelectionManifest::new(Strategy::Meta, "t", 41, both).unwrap();
        let rows = selection_matrix(&two, &c).unwrap();
        assert_eq!(
            rows.iter().map(|r| r.1).collect::<Vec<_>>(),
            vec![1.0, 0.0, 1.0]
        );

        let mut skew = ids("UD_A-X", 4);
        skew.extend(ids("UD_B-X", 1));
        let m = SelectionManifest::new(Strategy::Meta, "t", 41, skew).unwrap();
        let rows = selection_matrix(&m, &c).unwrap();
        assert_eq!(
            rows.iter().map(|r| r.1).collect::<Vec<_>>(),
            vec![1.0, 0.25, 0.0]
        );

        let bad = SelectionManifest::new(Strategy::Meta, "t", 41, vec!["UD_Z/x/1".into()]).unwrap();
        assert!(selection_matrix(&bad, &c).is_err());
        let table = selection_table(&[("meta".into(), rows)]);
        assert!(table.starts_with("treebank\tmeta\nUD_A-X\t1.0000\n"));
    }
}
