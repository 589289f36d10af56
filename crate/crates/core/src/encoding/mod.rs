//! Encoder contract, span enumeration and mention-candidate pruning.

mod toy;

use std::collections::HashSet;

use candle_core::Tensor;
use serde::{Deserialize, Serialize};

use crate::corpus::{Document, Span};
use crate::error::Result;
use crate::nn::{index_tensor, FeedForward, ParamStore};

pub use toy::{ToyEncoder, Vocabulary};

/// Produces one contextual vector per token.
///
/// Implementations must return `min(doc.len(), max_input_length())` rows of
/// width `dim()`, and be deterministic outside training.
pub trait Encoder: Send + Sync {
    fn dim(&self) -> usize;
    fn max_input_length(&self) -> usize;
    fn encode(&self, doc: &Document) -> Result<Tensor>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CandidateOptions {
    pub max_span_width: usize,
    /// Allow spans that cross a sentence boundary.
    pub cross_sentence: bool,
    /// Fraction of the token count kept after pruning.
    pub ratio: f64,
    pub cap: usize,
    /// Append gold mentions that pruning dropped, during training only.
    pub force_gold: bool,
}

impl Default for CandidateOptions {
    fn default() -> Self {
        CandidateOptions {
            max_span_width: 10,
            cross_sentence: false,
            ratio: 0.4,
            cap: 512,
            force_gold: true,
        }
    }
}

impl CandidateOptions {
    pub fn budget(&self, num_tokens: usize) -> usize {
        ((self.ratio * num_tokens as f64).ceil() as usize).min(self.cap)
    }
}

/// All spans of width `1..=max_span_width`, ordered by `(start, end)`.
pub fn enumerate_spans(doc: &Document, max_span_width: usize, cross_sentence: bool) -> Vec<Span> {
    enumerate_spans_upto(doc, doc.len(), max_span_width, cross_sentence)
}

/// Like [`enumerate_spans`] but only over the first `limit` tokens.
pub fn enumerate_spans_upto(
    doc: &Document,
    limit: usize,
    max_span_width: usize,
    cross_sentence: bool,
) -> Vec<Span> {
    let len = limit.min(doc.len());
    let mut spans = Vec::new();
    for start in 0..len {
        for end in start..len.min(start + max_span_width) {
            if !cross_sentence && doc.tokens[end].sentence_index != doc.tokens[start].sentence_index {
                break;
            }
            spans.push(Span::new(start, end));
        }
    }
    spans
}

/// Indices of the spans kept by top-k pruning, in span order.
///
/// `k = min(⌈ratio · num_tokens⌉, cap)`; ties in score are broken by span
/// position. Indices listed in `forced` are kept regardless of score.
pub fn prune_indices(
    spans: &[Span],
    scores: &[f64],
    num_tokens: usize,
    opts: &CandidateOptions,
    forced: &[usize],
) -> Vec<usize> {
    debug_assert_eq!(spans.len(), scores.len());
    let k = opts.budget(num_tokens);
    let mut order: Vec<usize> = (0..spans.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .total_cmp(&scores[a])
            .then_with(|| spans[a].cmp(&spans[b]))
    });
    let mut keep: HashSet<usize> = order.into_iter().take(k).collect();
    keep.extend(forced.iter().copied());
    let mut kept: Vec<usize> = keep.into_iter().collect();
    kept.sort_by_key(|&i| (spans[i], i));
    kept
}

/// Concatenated start- and end-token vectors for each span: `n × 2d`.
pub fn span_embeddings(token_vectors: &Tensor, spans: &[Span]) -> Result<Tensor> {
    let dev = token_vectors.device();
    let starts: Vec<usize> = spans.iter().map(|s| s.start).collect();
    let ends: Vec<usize> = spans.iter().map(|s| s.end).collect();
    let s = token_vectors.index_select(&index_tensor(&starts, dev)?, 0)?;
    let e = token_vectors.index_select(&index_tensor(&ends, dev)?, 0)?;
    Ok(Tensor::cat(&[&s, &e], 1)?)
}

/// Feed-forward mention scorer `s^m(g)`.
#[derive(Debug, Clone)]
pub struct MentionScorer {
    ffn: FeedForward,
}

impl MentionScorer {
    pub fn new(store: &mut ParamStore, prefix: &str, span_dim: usize, hidden: usize) -> Result<Self> {
        Ok(MentionScorer {
            ffn: FeedForward::new(store, prefix, span_dim, hidden, 1)?,
        })
    }

    /// Scores for `n × span_dim` embeddings, shape `n`.
    pub fn forward(&self, embeddings: &Tensor) -> Result<Tensor> {
        Ok(self.ffn.forward(embeddings)?.squeeze(1)?)
    }
}

/// Mention candidates of one document, sorted by position.
#[derive(Debug, Clone)]
pub struct CandidateSet {
    pub spans: Vec<Span>,
    /// `n × 2d` boundary embeddings.
    pub embeddings: Tensor,
    /// `n` raw mention scores.
    pub mention_scores: Tensor,
}

impl CandidateSet {
    pub fn len(&self) -> usize {
        self.spans.len()
    }

    pub fn is_empty(&self) -> bool {
        self.spans.is_empty()
    }

    /// Gold cluster index of each candidate under exact span match.
    pub fn gold_alignment(&self, doc: &Document) -> Vec<Option<usize>> {
        align_to_gold(&self.spans, doc)
    }
}

pub fn align_to_gold(spans: &[Span], doc: &Document) -> Vec<Option<usize>> {
    let owner = doc.mention_clusters();
    spans.iter().map(|s| owner.get(s).copied()).collect()
}

/// Enumerates, scores and prunes spans of `doc`. Returns `None` when the
/// document yields no candidate.
pub fn generate_candidates(
    doc: &Document,
    token_vectors: &Tensor,
    scorer: &MentionScorer,
    opts: &CandidateOptions,
    training: bool,
) -> Result<Option<CandidateSet>> {
    let len = token_vectors.dim(0)?;
    let mut spans = enumerate_spans_upto(doc, len, opts.max_span_width, opts.cross_sentence);
    let mut forced = Vec::new();
    if training && opts.force_gold {
        let index: std::collections::HashMap<Span, usize> =
            spans.iter().enumerate().map(|(i, s)| (*s, i)).collect();
        for gold in doc.gold_spans() {
            if gold.end >= len {
                continue;
            }
            match index.get(&gold) {
                Some(&i) => forced.push(i),
                None => {
                    forced.push(spans.len());
                    spans.push(gold);
                }
            }
        }
    }
    if spans.is_empty() {
        return Ok(None);
    }
    let all_emb = span_embeddings(token_vectors, &spans)?;
    let all_scores = scorer.forward(&all_emb)?;
    let score_values = all_scores.to_vec1::<f64>()?;
    let kept = prune_indices(&spans, &score_values, len, opts, &forced);
    if kept.is_empty() {
        return Ok(None);
    }
    let idx = index_tensor(&kept, token_vectors.device())?;
    Ok(Some(CandidateSet {
        spans: kept.iter().map(|&i| spans[i]).collect(),
        embeddings: all_emb.index_select(&idx, 0)?,
        mention_scores: all_scores.index_select(&idx, 0)?,
    }))
}
