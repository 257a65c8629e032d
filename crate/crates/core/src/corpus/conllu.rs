//! Reading and writing CoNLL-U.

use std::fmt::Write as _;

use crate::error::{Error, Result};

/// A syntactic word: one integer-ID row of a CoNLL-U sentence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token {
    pub index: u32,
    pub form: String,
    pub lemma: String,
    pub upos: Option<String>,
    pub xpos: String,
    pub feats: String,
    /// Head index; `0` is the root.
    pub head: u32,
    pub deprel: String,
    pub deps: String,
    pub misc: String,
}

impl Token {
    /// Minimal token with `_` in all unused columns.
    pub fn new(index: u32, form: &str, head: u32, deprel: &str) -> Self {
        Token {
            index,
            form: form.to_string(),
            lemma: "_".to_string(),
            upos: None,
            xpos: "_".to_string(),
            feats: "_".to_string(),
            head,
            deprel: deprel.to_string(),
            deps: "_".to_string(),
            misc: "_".to_string(),
        }
    }

    fn space_after(&self) -> bool {
        !self.misc.split('|').any(|m| m == "SpaceAfter=No")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtraKind {
    /// Multiword token range `a-b`.
    Range,
    /// Empty node `a.b`.
    Empty,
}

/// A row that is kept for round-tripping but never scored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExtraRow {
    pub kind: ExtraKind,
    /// Number of syntactic words preceding this row.
    pub position: usize,
    /// The raw tab-separated line.
    pub raw: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence {
    /// `treebank/split/sent_id` once loaded into a corpus; the bare sentence
    /// ID straight after parsing.
    pub global_id: String,
    pub sent_id: String,
    pub comments: Vec<String>,
    pub tokens: Vec<Token>,
    pub extra: Vec<ExtraRow>,
    pub text: String,
}

impl Sentence {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Assigns the corpus-wide ID.
    pub fn qualify(&mut self, treebank: &str, split: &str) {
        self.global_id = format!("{treebank}/{split}/{}", self.sent_id);
    }

    /// Appends this sentence in CoNLL-U form (including the blank separator line).
    pub fn write_to(&self, out: &mut String) {
        for c in &self.comments {
            out.push_str(c);
            out.push('\n');
        }
        let mut extras = self.extra.iter().peekable();
        for (i, tok) in self.tokens.iter().enumerate() {
            while let Some(extra) = extras.next_if(|e| e.position <= i) {
                out.push_str(&extra.raw);
                out.push('\n');
            }
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                tok.index,
                tok.form,
                tok.lemma,
                tok.upos.as_deref().unwrap_or("_"),
                tok.xpos,
                tok.feats,
                tok.head,
                tok.deprel,
                tok.deps,
                tok.misc
            );
        }
        for extra in extras {
            out.push_str(&extra.raw);
            out.push('\n');
        }
        out.push('\n');
    }

    /// Reconstructs surface text from forms and `SpaceAfter=No`.
    pub fn reconstruct_text(tokens: &[Token]) -> String {
        let mut text = String::new();
        for (i, tok) in tokens.iter().enumerate() {
            text.push_str(&tok.form);
            if i + 1 < tokens.len() && tok.space_after() {
                text.push(' ');
            }
        }
        text
    }
}

/// Serialises sentences as a CoNLL-U document.
pub fn write_conllu(sentences: &[Sentence]) -> String {
    let mut out = String::new();
    for s in sentences {
        s.write_to(&mut out);
    }
    out
}

enum RowId {
    Word(u32),
    Range,
    Empty,
}

fn parse_id(field: &str, line: usize) -> Result<RowId> {
    let bad = || Error::parse(line, format!("malformed ID column `{field}`"));
    if let Some((a, b)) = field.split_once('-') {
        let a: u32 = a.parse().map_err(|_| bad())?;
        let b: u32 = b.parse().map_err(|_| bad())?;
        if a == 0 || b < a {
            return Err(bad());
        }
        Ok(RowId::Range)
    } else if let Some((a, b)) = field.split_once('.') {
        a.parse::<u32>().map_err(|_| bad())?;
        let minor: u32 = b.parse().map_err(|_| bad())?;
        if minor == 0 {
            return Err(bad());
        }
        Ok(RowId::Empty)
    } else {
        let index: u32 = field.parse().map_err(|_| bad())?;
        if index == 0 {
            return Err(bad());
        }
        Ok(RowId::Word(index))
    }
}

#[derive(Default)]
struct Pending {
    first_line: usize,
    comments: Vec<String>,
    sent_id: Option<String>,
    text: Option<String>,
    tokens: Vec<Token>,
    head_lines: Vec<usize>,
    extra: Vec<ExtraRow>,
}

impl Pending {
    fn is_blank(&self) -> bool {
        self.comments.is_empty() && self.tokens.is_empty() && self.extra.is_empty()
    }

    fn finish(self, ordinal: usize) -> Result<Sentence> {
        if self.tokens.is_empty() {
            return Err(Error::parse(self.first_line, "sentence has no word rows"));
        }
        let n = self.tokens.len() as u32;
        for (tok, &line) in self.tokens.iter().zip(&self.head_lines) {
            if tok.head > n {
                return Err(Error::parse(
                    line,
                    format!("head {} out of range for sentence of length {n}", tok.head),
                ));
            }
        }
        let text = self
            .text
            .unwrap_or_else(|| Sentence::reconstruct_text(&self.tokens));
        let sent_id = self.sent_id.unwrap_or_else(|| ordinal.to_string());
        Ok(Sentence {
            global_id: sent_id.clone(),
            sent_id,
            comments: self.comments,
            tokens: self.tokens,
            extra: self.extra,
            text,
        })
    }
}

fn comment_value<'a>(comment: &'a str, key: &str) -> Option<&'a str> {
    let rest = comment.strip_prefix('#')?.trim_start();
    let rest = rest.strip_prefix(key)?.trim_start();
    rest.strip_prefix('=').map(str::trim)
}

/// Parses a CoNLL-U byte stream.
///
/// Sentences without a `# sent_id` comment get their 1-based ordinal
/// position in the file as ID. Multiword ranges and empty nodes are kept in
/// [`Sentence::extra`] and never counted as tokens.
pub fn parse_conllu(bytes: &[u8]) -> Result<Vec<Sentence>> {
    let text = match std::str::from_utf8(bytes) {
        Ok(t) => t,
        Err(e) => {
            let line = bytes[..e.valid_up_to()]
                .iter()
                .filter(|&&b| b == b'\n')
                .count()
                + 1;
            return Err(Error::parse(line, "input is not valid UTF-8"));
        }
    };

    let mut sentences = Vec::new();
    let mut pending = Pending::default();

    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let row = raw.strip_suffix('\r').unwrap_or(raw);
        if row.trim().is_empty() {
            if !pending.is_blank() {
                let done = std::mem::take(&mut pending);
                sentences.push(done.finish(sentences.len() + 1)?);
            }
            continue;
        }
        if pending.is_blank() {
            pending.first_line = line;
        }
        if row.starts_with('#') {
            if !pending.tokens.is_empty() || !pending.extra.is_empty() {
                return Err(Error::parse(line, "comment after token rows"));
            }
            if let Some(id) = comment_value(row, "sent_id") {
                pending.sent_id = Some(id.to_string());
            } else if let Some(t) = comment_value(row, "text") {
                pending.text = Some(t.to_string());
            }
            pending.comments.push(row.to_string());
            continue;
        }

        let cols: Vec<&str> = row.split('\t').collect();
        if cols.len() != 10 {
            return Err(Error::parse(
                line,
                format!("expected 10 tab-separated columns, found {}", cols.len()),
            ));
        }
        match parse_id(cols[0], line)? {
            RowId::Word(index) => {
                let expected = pending.tokens.len() as u32 + 1;
                if index != expected {
                    return Err(Error::parse(
                        line,
                        format!("token index {index} where {expected} was expected"),
                    ));
                }
                let head: u32 = cols[6]
                    .parse()
                    .map_err(|_| Error::parse(line, format!("malformed HEAD `{}`", cols[6])))?;
                pending.tokens.push(Token {
                    index,
                    form: cols[1].to_string(),
                    lemma: cols[2].to_string(),
                    upos: (cols[3] != "_").then(|| cols[3].to_string()),
                    xpos: cols[4].to_string(),
                    feats: cols[5].to_string(),
                    head,
                    deprel: cols[7].to_string(),
                    deps: cols[8].to_string(),
                    misc: cols[9].to_string(),
                });
                pending.head_lines.push(line);
            }
            kind @ (RowId::Range | RowId::Empty) => {
                pending.extra.push(ExtraRow {
                    kind: if matches!(kind, RowId::Range) {
                        ExtraKind::Range
                    } else {
                        ExtraKind::Empty
                    },
                    position: pending.tokens.len(),
                    raw: row.to_string(),
                });
            }
        }
    }
    if !pending.is_blank() {
        sentences.push(pending.finish(sentences.len() + 1)?);
    }
    Ok(sentences)
}
