//! Sentence-aligned embedding matrices and cosine geometry.
//!
//! On-disk format, little-endian:
//!
//! ```text
//! "GSEM" | version: u32 = 1 | dim: u32 | count: u64
//! count × dim f32, row-major
//! count × (len: u32, UTF-8 bytes)   -- ids, in row order
//! ```

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;

use crate::corpus::Sentence;
use crate::error::{Error, Result};
use crate::rng;

pub const MAGIC: &[u8; 4] = b"GSEM";
pub const FORMAT_VERSION: u32 = 1;
pub const DEFAULT_DIM: usize = 768;

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    dim: usize,
    data: Vec<f32>,
    ids: Vec<String>,
    index: HashMap<String, usize>,
}

impl EmbeddingMatrix {
    pub fn new(dim: usize, ids: Vec<String>, data: Vec<f32>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::format("embedding dimension must be positive"));
        }
        if data.len() != ids.len() * dim {
            return Err(Error::format(format!(
                "{} ids but {} values for dimension {dim}",
                ids.len(),
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::format(format!(
                "non-finite value in row {}",
                pos / dim
            )));
        }
        let mut index = HashMap::with_capacity(ids.len());
        for (i, id) in ids.iter().enumerate() {
            if index.insert(id.clone(), i).is_some() {
                return Err(Error::format(format!("duplicate id {id}")));
            }
        }
        Ok(EmbeddingMatrix {
            dim,
            data,
            ids,
            index,
        })
    }

    pub fn from_rows(dim: usize, rows: Vec<(String, Vec<f32>)>) -> Result<Self> {
        let mut ids = Vec::with_capacity(rows.len());
        let mut data = Vec::with_capacity(rows.len() * dim);
        for (id, row) in rows {
            if row.len() != dim {
                return Err(Error::format(format!(
                    "row {id} has {} values, expected {dim}",
                    row.len()
                )));
            }
            ids.push(id);
            data.extend(row);
        }
        EmbeddingMatrix::new(dim, ids, data)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn ids(&self) -> &[String] {
        &self.ids
    }

    pub fn row(&self, i: usize) -> &[f32] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn get(&self, id: &str) -> Option<&[f32]> {
        self.index.get(id).map(|&i| self.row(i))
    }

    pub fn position(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    /// Like [`get`](Self::get) but an unknown id is an error.
    pub fn require(&self, id: &str) -> Result<&[f32]> {
        self.get(id)
            .ok_or_else(|| Error::invalid(format!("no embedding for {id}")))
    }

    pub fn rows(&self) -> impl Iterator<Item = (&str, &[f32])> {
        self.ids
            .iter()
            .map(String::as_str)
            .zip(self.data.chunks_exact(self.dim))
    }

    /// Every value multiplied by `factor`.
    pub fn scaled(&self, factor: f32) -> Result<Self> {
        let data = self.data.iter().map(|v| v * factor).collect();
        EmbeddingMatrix::new(self.dim, self.ids.clone(), data)
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&(self.dim as u32).to_le_bytes())?;
        w.write_all(&(self.ids.len() as u64).to_le_bytes())?;
        let mut buf = Vec::with_capacity(self.data.len() * 4);
        for v in &self.data {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        w.write_all(&buf)?;
        for id in &self.ids {
            w.write_all(&(id.len() as u32).to_le_bytes())?;
            w.write_all(id.as_bytes())?;
        }
        Ok(())
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_to(&mut out)
            .expect("writing to a Vec cannot fail");
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::format("bad magic, not a GSEM file"));
        }
        let version = r.u32()?;
        if version != FORMAT_VERSION {
            return Err(Error::format(format!(
                "unsupported format version {version}"
            )));
        }
        let dim = r.u32()? as usize;
        let count = usize::try_from(r.u64()?).map_err(|_| Error::format("row count overflows"))?;
        let n_values = count
            .checked_mul(dim)
            .filter(|n| n.checked_mul(4).is_some_and(|b| b <= bytes.len()))
            .ok_or_else(|| Error::format("truncated payload"))?;
        let payload = r.take(n_values * 4)?;
        let data = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        let mut ids = Vec::with_capacity(count);
        for i in 0..count {
            let len = r
                .u32()
                .map_err(|_| Error::format(format!("id table ends after {i} of {count} ids")))?
                as usize;
            let raw = r.take(len)?;
            let id = std::str::from_utf8(raw)
                .map_err(|_| Error::format(format!("id {i} is not UTF-8")))?;
            ids.push(id.to_string());
        }
        if r.pos != bytes.len() {
            return Err(Error::format(format!(
                "{} trailing bytes after id table",
                bytes.len() - r.pos
            )));
        }
        EmbeddingMatrix::new(dim, ids, data)
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        EmbeddingMatrix::from_bytes(&bytes)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path)?;
        EmbeddingMatrix::from_bytes(&bytes).map_err(|e| e.context(path.display().to_string()))
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::format("truncated payload"))?;
        let slice = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(slice)
    }

    fn u32(&mut self) -> Result<u32> {
        let b = self.take(4)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    }

    fn u64(&mut self) -> Result<u64> {
        let b = self.take(8)?;
        let mut arr = [0u8; 8];
        arr.copy_from_slice(b);
        Ok(u64::from_le_bytes(arr))
    }
}

/// Per-dimension arithmetic mean of the rows for `ids`.
pub fn mean_embedding<S: AsRef<str>>(m: &EmbeddingMatrix, ids: &[S]) -> Result<Vec<f32>> {
    if ids.is_empty() {
        return Err(Error::invalid("mean of an empty id set"));
    }
    let mut acc = vec![0f64; m.dim()];
    for id in ids {
        let row = m.require(id.as_ref())?;
        for (a, &v) in acc.iter_mut().zip(row) {
            *a += f64::from(v);
        }
    }
    let n = ids.len() as f64;
    Ok(acc.into_iter().map(|a| (a / n) as f32).collect())
}

fn norm(v: &[f32]) -> f64 {
    v.iter()
        .map(|&x| f64::from(x) * f64::from(x))
        .sum::<f64>()
        .sqrt()
}

/// `1 − a·b / (‖a‖‖b‖)`, computed in f64. Zero vectors are rejected.
pub fn cosine_distance(a: &[f32], b: &[f32]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::invalid(format!(
            "dimension mismatch: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let (na, nb) = (norm(a), norm(b));
    if na == 0.0 || nb == 0.0 {
        return Err(Error::invalid("cosine distance with a zero-norm vector"));
    }
    if a == b {
        return Ok(0.0);
    }
    let dot: f64 = a
        .iter()
        .zip(b)
        .map(|(&x, &y)| f64::from(x) * f64::from(y))
        .sum();
    Ok((1.0 - dot / (na * nb)).clamp(0.0, 2.0))
}

/// Precomputed query side of repeated cosine distances. Gives the same
/// values as [`cosine_distance`] bit for bit.
#[derive(Debug, Clone)]
pub struct CosineQuery {
    query: Vec<f32>,
    norm: f64,
}

impl CosineQuery {
    pub fn new(query: &[f32]) -> Result<Self> {
        let norm = norm(query);
        if norm == 0.0 {
            return Err(Error::invalid("cosine query has zero norm"));
        }
        Ok(CosineQuery {
            query: query.to_vec(),
            norm,
        })
    }

    pub fn distance(&self, row: &[f32]) -> Result<f64> {
        if row.len() != self.query.len() {
            return Err(Error::invalid("dimension mismatch"));
        }
        let n = norm(row);
        if n == 0.0 {
            return Err(Error::invalid("cosine distance with a zero-norm vector"));
        }
        if row == self.query.as_slice() {
            return Ok(0.0);
        }
        let dot: f64 = self
            .query
            .iter()
            .zip(row)
            .map(|(&x, &y)| f64::from(x) * f64::from(y))
            .sum();
        Ok((1.0 - dot / (self.norm * n)).clamp(0.0, 2.0))
    }
}

/// Character n-gram sizes hashed by the fallback featurizer.
pub const FALLBACK_NGRAMS: std::ops::RangeInclusive<usize> = 3..=5;
const FALLBACK_BUCKETS: u64 = 1 << 20;

fn hashed_gram_counts(text: &str) -> HashMap<u64, f64> {
    let chars: Vec<char> = text.chars().collect();
    let mut counts = HashMap::new();
    let mut buf = String::new();
    for n in FALLBACK_NGRAMS {
        for w in chars.windows(n) {
            buf.clear();
            buf.extend(w);
            *counts
                .entry(rng::fnv1a(buf.as_bytes()) % FALLBACK_BUCKETS)
                .or_insert(0.0) += 1.0;
        }
    }
    counts
}

/// Deterministic stand-in for model embeddings: hashed character 3–5-gram
/// counts of each sentence's text, L2-normalised, then projected to `dim`
/// dimensions by a seeded ±1 matrix scaled by `1/√dim`. Projection rows are
/// generated per hash bucket, so the matrix is never materialised.
pub fn fallback_featurize<'a, I>(sentences: I, dim: usize, seed: u64) -> Result<EmbeddingMatrix>
where
    I: IntoIterator<Item = &'a Sentence>,
{
    if dim < 2 {
        return Err(Error::invalid("fallback dimension must be at least 2"));
    }
    let scale = 1.0 / (dim as f64).sqrt();
    let mut ids = Vec::new();
    let mut data = Vec::new();
    let mut row = vec![0f64; dim];
    for s in sentences {
        let counts = hashed_gram_counts(&s.text);
        if counts.is_empty() {
            return Err(Error::Unembeddable(s.global_id.clone()));
        }
        let l2 = counts.values().map(|c| c * c).sum::<f64>().sqrt();
        row.iter_mut().for_each(|v| *v = 0.0);
        let mut buckets: Vec<(&u64, &f64)> = counts.iter().collect();
        buckets.sort_unstable_by_key(|(b, _)| **b);
        for (&bucket, &count) in buckets {
            let weight = count / l2 * scale;
            let mut signs = rng::indexed_stream(seed, "fallback-projection", bucket);
            let mut bits = 0u64;
            for (j, v) in row.iter_mut().enumerate() {
                if j % 64 == 0 {
                    bits = signs.random();
                }
                if bits >> (j % 64) & 1 == 1 {
                    *v += weight;
                } else {
                    *v -= weight;
                }
            }
        }
        ids.push(s.global_id.clone());
        data.extend(row.iter().map(|&v| v as f32));
    }
    EmbeddingMatrix::new(dim, ids, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Token;

    fn sent(id: &str, text: &str) -> Sentence {
        Sentence {
            global_id: id.into(),
            sent_id: id.into(),
            comments: vec![],
            tokens: vec![Token::new(1, text, 0, "root")],
            extra: vec![],
            text: text.into(),
        }
    }

    fn fixture() -> EmbeddingMatrix {
        EmbeddingMatrix::from_rows(
            4,
            vec![
                ("a".into(), vec![1.0, -2.5, 0.125, 3.0e-8]),
                ("b".into(), vec![0.0, 1.0, f32::MAX, -0.0]),
                ("c".into(), vec![7.0, 7.0, 7.0, 7.0]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn exact_round_trip() {
        let m = fixture();
        let bytes = m.to_bytes();
        let back = EmbeddingMatrix::from_bytes(&bytes).unwrap();
        assert_eq!(back.row(0), &[1.0, -2.5, 0.125, 3.0e-8]);
        assert_eq!(back.get("b").unwrap()[2], f32::MAX);
        assert!(back.get("b").unwrap()[3].is_sign_negative());
        assert_eq!(back.ids(), ["a", "b", "c"]);
        assert_eq!(back.to_bytes(), bytes);
    }

    #[test]
    fn empty_matrix_keeps_dim() {
        let m = EmbeddingMatrix::new(768, vec![], vec![]).unwrap();
        let back = EmbeddingMatrix::from_bytes(&m.to_bytes()).unwrap();
        assert_eq!(back.dim(), 768);
        assert!(back.is_empty());
        assert_eq!(m.to_bytes().len(), 20);
    }

    #[test]
    fn format_errors() {
        let bytes = fixture().to_bytes();
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(
            EmbeddingMatrix::from_bytes(&bad),
            Err(Error::Format(_))
        ));
        assert!(matches!(
            EmbeddingMatrix::from_bytes(&bytes[..30]),
            Err(Error::Format(_))
        ));
        assert!(matches!(
            EmbeddingMatrix::from_bytes(&bytes[..bytes.len() - 1]),
            Err(Error::Format(_))
        ));
        let mut extra = bytes.clone();
        extra.push(0);
        assert!(EmbeddingMatrix::from_bytes(&extra).is_err());
        let mut huge = bytes;
        huge[12..20].copy_from_slice(&u64::MAX.to_le_bytes());
        assert!(EmbeddingMatrix::from_bytes(&huge).is_err());
        assert!(EmbeddingMatrix::new(2, vec!["a".into()], vec![f32::NAN, 1.0]).is_err());
    }

    #[test]
    fn means() {
        let m = EmbeddingMatrix::from_rows(
            2,
            vec![("x".into(), vec![1.0, 0.0]), ("y".into(), vec![0.0, 1.0])],
        )
        .unwrap();
        assert_eq!(mean_embedding(&m, &["x"]).unwrap(), vec![1.0, 0.0]);
        assert_eq!(mean_embedding(&m, &["x", "y"]).unwrap(), vec![0.5, 0.5]);
        assert!(mean_embedding(&m, &["z"]).is_err());
        assert!(mean_embedding::<&str>(&m, &[]).is_err());
    }

    #[test]
    fn cosine_values() {
        assert_eq!(cosine_distance(&[0.3, 0.4], &[0.3, 0.4]).unwrap(), 0.0);
        assert!((cosine_distance(&[1.0, 0.0], &[0.0, 1.0]).unwrap() - 1.0).abs() < 1e-15);
        assert!((cosine_distance(&[1.0, 0.0], &[-1.0, 0.0]).unwrap() - 2.0).abs() < 1e-15);
        let expected = 1.0 - 32.0 / (14f64.sqrt() * 77f64.sqrt());
        let got = cosine_distance(&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]).unwrap();
        assert!((got - expected).abs() < 1e-12);
        assert!((got - 0.02537).abs() < 1e-5);
        assert!(cosine_distance(&[0.0, 0.0], &[1.0, 0.0]).is_err());
        let q = CosineQuery::new(&[4.0, 5.0, 6.0]).unwrap();
        assert!((q.distance(&[1.0, 2.0, 3.0]).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn fallback_is_deterministic_and_aligned() {
        let sents = vec![
            sent("a", "the cat sat"),
            sent("b", "the cat sat"),
            sent("c", "a dog ran off"),
        ];
        let m1 = fallback_featurize(&sents, 64, 41).unwrap();
        let m2 = fallback_featurize(&sents, 64, 41).unwrap();
        assert_eq!(m1, m2);
        assert_eq!(m1.get("a"), m1.get("b"));
        let reversed: Vec<Sentence> = sents.iter().rev().cloned().collect();
        let m3 = fallback_featurize(&reversed, 64, 41).unwrap();
        for id in ["a", "b", "c"] {
            assert_eq!(m1.get(id), m3.get(id));
        }
        assert_ne!(
            fallback_featurize(&sents, 64, 42).unwrap().get("a"),
            m1.get("a")
        );
    }

    #[test]
    fn fallback_rejects_ungrammable_text() {
        let sents = vec![sent("a", "")];
        assert!(matches!(
            fallback_featurize(&sents, 16, 41),
            Err(Error::Unembeddable(_))
        ));
        assert!(fallback_featurize(&[sent("a", "abc")], 1, 41).is_err());
    }

    #[test]
    fn fallback_disjoint_grams_are_far_apart() {
        // No shared character 3–5-grams between the two texts.
        let sents = vec![
            sent("a", "abcdefg hijklmn opqrst"),
            sent("b", "ZYXWVUT SRQPONM LKJIHG"),
        ];
        let m = fallback_featurize(&sents, 256, 41).unwrap();
        let d = cosine_distance(m.row(0), m.row(1)).unwrap();
        assert!(d >= 0.9, "distance {d}");
    }
}
