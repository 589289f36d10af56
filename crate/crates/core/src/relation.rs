//! Biaffine relation scoring with an adaptive-threshold pseudo-type, label
//! transfer from entities to mentions, MEAN aggregation back to entities,
//! and thresholded decoding.
//!
//! Score tensors are laid out `T × n × n` with `T = |R| + 1`; the last type
//! index is the threshold type `TH`.

use candle_core::{Tensor, Var};

use crate::corpus::{Document, RelationTriple};
use crate::error::{Error, Result};
use crate::nn::{additive_mask, index_tensor, log_softmax, logsumexp, FeedForward, Init, Matrix, ParamStore};

/// `s^{r_i}(h, t) = g_h W_i g_tᵀ + s^{h_i}(g_h) + s^{t_i}(g_t)` for every
/// real type and the threshold type.
#[derive(Debug, Clone)]
pub struct RelationScorer {
    /// `T × D × D`.
    pub weight: Var,
    pub head_prior: FeedForward,
    pub tail_prior: FeedForward,
    num_relations: usize,
}

impl RelationScorer {
    pub fn new(
        store: &mut ParamStore,
        prefix: &str,
        span_dim: usize,
        hidden: usize,
        num_relations: usize,
    ) -> Result<Self> {
        let types = num_relations + 1;
        Ok(RelationScorer {
            weight: store.var(
                &format!("{prefix}.bilinear"),
                &[types, span_dim, span_dim],
                Init::Xavier(span_dim, span_dim),
            )?,
            head_prior: FeedForward::new(store, &format!("{prefix}.head_prior"), span_dim, hidden, types)?,
            tail_prior: FeedForward::new(store, &format!("{prefix}.tail_prior"), span_dim, hidden, types)?,
            num_relations,
        })
    }

    pub fn num_relations(&self) -> usize {
        self.num_relations
    }

    /// Index of the threshold type.
    pub fn threshold_index(&self) -> usize {
        self.num_relations
    }

    /// All pairwise scores for `n × D` embeddings: `T × n × n`.
    pub fn score_tensor(&self, g: &Tensor) -> Result<Tensor> {
        let (n, d) = g.dims2()?;
        let types = self.num_relations + 1;
        let g3 = g.unsqueeze(0)?.broadcast_as((types, n, d))?.contiguous()?;
        let gt3 = g.t()?.unsqueeze(0)?.broadcast_as((types, d, n))?.contiguous()?;
        let bilinear = g3.matmul(self.weight.as_tensor())?.matmul(&gt3)?;
        let head = self.head_prior.forward(g)?.t()?.unsqueeze(2)?; // T × n × 1
        let tail = self.tail_prior.forward(g)?.t()?.unsqueeze(1)?; // T × 1 × n
        Ok(bilinear.broadcast_add(&head)?.broadcast_add(&tail)?)
    }

    /// Score of one pair for one type (`TH` allowed).
    pub fn pair_score(&self, g_h: &[f64], g_t: &[f64], relation: usize) -> Result<f64> {
        let types = self.num_relations + 1;
        if relation >= types {
            return Err(Error::InvalidRelationType {
                index: relation,
                size: types,
            });
        }
        let d = self.weight.dim(1)?;
        for g in [g_h, g_t] {
            if g.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: g.len(),
                });
            }
        }
        let dev = self.weight.device();
        let pair = Tensor::from_vec([g_h, g_t].concat(), (2, d), dev)?;
        let scores = self.score_tensor(&pair)?;
        Ok(scores.get(relation)?.get(0)?.get(1)?.to_scalar::<f64>()?)
    }
}

/// Entity embeddings by elementwise log-sum-exp over each cluster's mention
/// embeddings. `g` is `m × D`, the result `clusters.len() × D`.
pub fn pool_entities(g: &Tensor, clusters: &[Vec<usize>]) -> Result<Tensor> {
    let dev = g.device();
    let pooled = clusters
        .iter()
        .enumerate()
        .map(|(i, members)| {
            if members.is_empty() {
                return Err(Error::InvalidArgument(format!("entity {i} has no mentions")));
            }
            Ok(logsumexp(&g.index_select(&index_tensor(members, dev)?, 0)?, 0)?.unsqueeze(0)?)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Tensor::cat(&pooled, 0)?)
}

/// Relation labels for every ordered pair of `n` nodes (mentions or
/// entities). Self pairs never carry labels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PairLabels {
    n: usize,
    num_relations: usize,
    data: Vec<bool>,
}

pub type MentionLevelLabels = PairLabels;

impl PairLabels {
    pub fn empty(n: usize, num_relations: usize) -> Self {
        PairLabels {
            n,
            num_relations,
            data: vec![false; n * n * num_relations],
        }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn num_relations(&self) -> usize {
        self.num_relations
    }

    pub fn set(&mut self, h: usize, t: usize, r: usize) {
        if h != t {
            self.data[(h * self.n + t) * self.num_relations + r] = true;
        }
    }

    pub fn has(&self, h: usize, t: usize, r: usize) -> bool {
        self.data[(h * self.n + t) * self.num_relations + r]
    }

    pub fn labels(&self, h: usize, t: usize) -> Vec<usize> {
        (0..self.num_relations).filter(|&r| self.has(h, t, r)).collect()
    }

    /// Entity-level labels straight from gold triples.
    pub fn from_triples(n: usize, num_relations: usize, triples: &[RelationTriple]) -> Self {
        let mut labels = PairLabels::empty(n, num_relations);
        for t in triples {
            labels.set(t.head, t.tail, t.relation);
        }
        labels
    }
}

/// Mention pair `(h, t)` expresses relation `r` iff the gold entities of `h`
/// and `t` do. Candidates without a gold cluster get no labels.
pub fn transfer_labels(
    doc: &Document,
    gold_alignment: &[Option<usize>],
    num_relations: usize,
) -> MentionLevelLabels {
    let n = gold_alignment.len();
    let entity = PairLabels::from_triples(doc.clusters.len(), num_relations, &doc.relations);
    let mut labels = PairLabels::empty(n, num_relations);
    for (h, gh) in gold_alignment.iter().enumerate() {
        let Some(eh) = gh else { continue };
        for (t, gt) in gold_alignment.iter().enumerate() {
            let Some(et) = gt else { continue };
            if h == t || eh == et {
                continue;
            }
            for r in 0..num_relations {
                if entity.has(*eh, *et, r) {
                    labels.set(h, t, r);
                }
            }
        }
    }
    labels
}

/// Relation scores between predicted entities: `T` matrices of `E × E`.
#[derive(Debug, Clone, PartialEq)]
pub struct EntityScoreTable {
    pub scores: Vec<Matrix>,
}

impl EntityScoreTable {
    pub fn num_entities(&self) -> usize {
        self.scores.first().map_or(0, Matrix::rows)
    }

    pub fn get(&self, h: usize, t: usize, relation: usize) -> f64 {
        self.scores[relation].get(h, t)
    }
}

/// Splits a `T × n × n` tensor into one plain matrix per type.
pub fn score_matrices(scores: &Tensor) -> Result<Vec<Matrix>> {
    let types = scores.dim(0)?;
    (0..types).map(|i| Matrix::from_tensor(&scores.get(i)?)).collect()
}

/// Entity scores as the mean of mention-pair scores over `e_h × e_t`.
/// For `e_h = e_t` the self pairs `(m, m)` are left out.
pub fn aggregate_entity_scores(mention_scores: &[Matrix], clusters: &[Vec<usize>]) -> EntityScoreTable {
    let e = clusters.len();
    let scores = mention_scores
        .iter()
        .map(|s| {
            Matrix::from_fn(e, e, |h, t| {
                let mut total = 0.0;
                let mut count = 0usize;
                for &mh in &clusters[h] {
                    for &mt in &clusters[t] {
                        if mh != mt {
                            total += s.get(mh, mt);
                            count += 1;
                        }
                    }
                }
                if count == 0 {
                    0.0
                } else {
                    total / count as f64
                }
            })
        })
        .collect();
    EntityScoreTable { scores }
}

/// A decoded entity-level triple with its relation score.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScoredTriple {
    pub head: usize,
    pub tail: usize,
    pub relation: usize,
    pub score: f64,
}

/// Emits `(h, t, r)` iff `s^r(h, t) > s^TH(h, t)`, strictly, for `h ≠ t`.
/// The last table entry is the threshold type.
pub fn decode_relations(table: &EntityScoreTable) -> Vec<ScoredTriple> {
    let th = table.scores.len() - 1;
    let e = table.num_entities();
    let mut out = Vec::new();
    for h in 0..e {
        for t in 0..e {
            if h == t {
                continue;
            }
            let threshold = table.get(h, t, th);
            for r in 0..th {
                let s = table.get(h, t, r);
                if s > threshold {
                    out.push(ScoredTriple {
                        head: h,
                        tail: t,
                        relation: r,
                        score: s,
                    });
                }
            }
        }
    }
    out
}

/// Adaptive-threshold loss averaged over ordered non-self pairs.
///
/// Per pair with positive set `P`: `-Σ_{r∈P} log softmax_{P∪TH}(s)_r` pushes
/// positives above `TH`, and `-log softmax_{N∪TH}(s)_TH` pushes `TH` above
/// the negatives `N`. `scores` is `T × n × n`.
pub fn relation_loss(scores: &Tensor, labels: &PairLabels) -> Result<Tensor> {
    let (types, n, _) = scores.dims3()?;
    let dev = scores.device();
    let r = types - 1;
    if labels.num_relations() != r || labels.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n * r,
            got: labels.len() * labels.num_relations(),
        });
    }
    let pairs: Vec<usize> = (0..n * n).filter(|k| k / n != k % n).collect();
    if pairs.is_empty() {
        return Ok(Tensor::zeros((), scores.dtype(), dev)?);
    }
    let p = pairs.len();
    let logits = scores
        .reshape((types, n * n))?
        .t()?
        .contiguous()?
        .index_select(&index_tensor(&pairs, dev)?, 0)?; // p × T

    let mut positive = vec![0.0; p * types];
    let mut keep_pos = vec![false; p * types];
    let mut keep_neg = vec![false; p * types];
    let mut th_onehot = vec![0.0; p * types];
    for (row, &k) in pairs.iter().enumerate() {
        let (h, t) = (k / n, k % n);
        for rel in 0..r {
            let pos = labels.has(h, t, rel);
            positive[row * types + rel] = if pos { 1.0 } else { 0.0 };
            keep_pos[row * types + rel] = pos;
            keep_neg[row * types + rel] = !pos;
        }
        keep_pos[row * types + r] = true;
        keep_neg[row * types + r] = true;
        th_onehot[row * types + r] = 1.0;
    }
    let shape = [p, types];
    let positive = Tensor::from_vec(positive, &shape, dev)?;
    let th_onehot = Tensor::from_vec(th_onehot, &shape, dev)?;
    let pos_logits = logits.broadcast_add(&additive_mask(&keep_pos, &shape, dev)?)?;
    let neg_logits = logits.broadcast_add(&additive_mask(&keep_neg, &shape, dev)?)?;
    let pos_term = (log_softmax(&pos_logits, 1)? * positive)?.sum_all()?;
    let neg_term = (log_softmax(&neg_logits, 1)? * th_onehot)?.sum_all()?;
    Ok(((pos_term + neg_term)?.neg()? / p as f64)?)
}
