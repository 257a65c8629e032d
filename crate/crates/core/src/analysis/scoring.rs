use crate::corpus::Sentence;
use crate::error::{Error, Result};

/// How dependency relations are compared for LAS.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum DeprelMatch {
    /// Compare up to the first `:`, so `nmod:poss` matches `nmod`.
    #[default]
    Universal,
    Full,
}

impl DeprelMatch {
    fn same(self, a: &str, b: &str) -> bool {
        match self {
            DeprelMatch::Full => a == b,
            DeprelMatch::Universal => universal(a) == universal(b),
        }
    }
}

fn universal(rel: &str) -> &str {
    rel.split_once(':').map_or(rel, |(u, _)| u)
}

/// Per-sentence counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct SentenceScore {
    pub tokens: usize,
    pub heads: usize,
    pub labels: usize,
}

impl SentenceScore {
    pub fn las(&self) -> f64 {
        if self.tokens == 0 {
            0.0
        } else {
            100.0 * self.labels as f64 / self.tokens as f64
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AttachmentScore {
    pub las: f64,
    pub uas: f64,
    pub scored_tokens: usize,
}

/// Scores aligned sentences. Sentences are matched by position and must have
/// the same sentence ID and word count; multiword ranges and empty nodes are
/// not scored.
pub fn sentence_scores(
    gold: &[Sentence],
    pred: &[Sentence],
    mode: DeprelMatch,
) -> Result<Vec<SentenceScore>> {
    if gold.len() != pred.len() {
        return Err(Error::invalid(format!(
            "{} gold sentences but {} predicted",
            gold.len(),
            pred.len()
        )));
    }
    gold.iter()
        .zip(pred)
        .map(|(g, p)| {
            if g.sent_id != p.sent_id {
                return Err(Error::invalid(format!(
                    "sentence {} aligned with prediction {}",
                    g.sent_id, p.sent_id
                )));
            }
            if g.tokens.len() != p.tokens.len() {
                return Err(Error::invalid(format!(
                    "sentence {}: {} gold words but {} predicted",
                    g.sent_id,
                    g.tokens.len(),
                    p.tokens.len()
                )));
            }
            let mut s = SentenceScore {
                tokens: g.tokens.len(),
                ..SentenceScore::default()
            };
            for (gt, pt) in g.tokens.iter().zip(&p.tokens) {
                if gt.head == pt.head {
                    s.heads += 1;
                    if mode.same(&gt.deprel, &pt.deprel) {
                        s.labels += 1;
                    }
                }
            }
            Ok(s)
        })
        .collect()
}

pub fn las_uas(gold: &[Sentence], pred: &[Sentence], mode: DeprelMatch) -> Result<AttachmentScore> {
    let scores = sentence_scores(gold, pred, mode)?;
    let tokens: usize = scores.iter().map(|s| s.tokens).sum();
    if tokens == 0 {
        return Err(Error::invalid("no tokens to score"));
    }
    let heads: usize = scores.iter().map(|s| s.heads).sum();
    let labels: usize = scores.iter().map(|s| s.labels).sum();
    Ok(AttachmentScore {
        las: 100.0 * labels as f64 / tokens as f64,
        uas: 100.0 * heads as f64 / tokens as f64,
        scored_tokens: tokens,
    })
}
