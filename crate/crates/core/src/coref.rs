//! Mention-pair coreference: bilinear scoring, best-antecedent decoding and
//! the antecedent + mention-detection loss.

use candle_core::Tensor;

use crate::error::{Error, Result};
use crate::nn::{additive_mask, bce_with_logits_sum, logsumexp, Init, Matrix, ParamStore, DTYPE};

/// Bilinear coreference scorer `s^c(x, y) = g_x W g_yᵀ + s^m(x) + s^m(y)`.
#[derive(Debug, Clone)]
pub struct CorefScorer {
    pub weight: candle_core::Var,
}

impl CorefScorer {
    pub fn new(store: &mut ParamStore, prefix: &str, span_dim: usize) -> Result<Self> {
        Ok(CorefScorer {
            weight: store.var(
                &format!("{prefix}.bilinear"),
                &[span_dim, span_dim],
                Init::Xavier(span_dim, span_dim),
            )?,
        })
    }

    /// Scores every ordered pair: `g` is `n × D`, `mention_scores` is `n`.
    /// Entry `(x, y)` scores `x` as the antecedent of `y`.
    pub fn score_matrix(&self, g: &Tensor, mention_scores: &Tensor) -> Result<Tensor> {
        let n = g.dim(0)?;
        let bilinear = g.matmul(self.weight.as_tensor())?.matmul(&g.t()?)?;
        let rows = mention_scores.reshape((n, 1))?;
        let cols = mention_scores.reshape((1, n))?;
        Ok(bilinear.broadcast_add(&rows)?.broadcast_add(&cols)?)
    }

    /// Score of a single pair of span embeddings.
    pub fn pair_score(&self, g_x: &[f64], g_y: &[f64], sm_x: f64, sm_y: f64) -> Result<f64> {
        let d = self.weight.dim(0)?;
        for g in [g_x, g_y] {
            if g.len() != d {
                return Err(Error::DimensionMismatch {
                    expected: d,
                    got: g.len(),
                });
            }
        }
        let w = Matrix::from_tensor(self.weight.as_tensor())?;
        Ok(bilinear(g_x, &w, g_y) + sm_x + sm_y)
    }
}

pub(crate) fn bilinear(a: &[f64], w: &Matrix, b: &[f64]) -> f64 {
    let mut total = 0.0;
    for (i, ai) in a.iter().enumerate() {
        let row = w.row(i);
        total += ai * row.iter().zip(b).map(|(wij, bj)| wij * bj).sum::<f64>();
    }
    total
}

struct UnionFind {
    parent: Vec<usize>,
}

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
        }
    }

    fn find(&mut self, x: usize) -> usize {
        let mut root = x;
        while self.parent[root] != root {
            root = self.parent[root];
        }
        let mut cur = x;
        while self.parent[cur] != root {
            let next = self.parent[cur];
            self.parent[cur] = root;
            cur = next;
        }
        root
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            // smaller index stays root, so cluster order is by first mention
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.parent[hi] = lo;
        }
    }
}

/// Decodes clusters of candidate indices from pairwise scores.
///
/// Candidate `j` links to its highest-scoring earlier candidate when that
/// score is positive. Linked components form clusters; an unlinked candidate
/// survives as a singleton only if its mention score is positive. Clusters
/// are ordered by their first candidate, members ascending.
pub fn decode_clusters(scores: &Matrix, mention_scores: &[f64]) -> Vec<Vec<usize>> {
    let n = mention_scores.len();
    debug_assert_eq!(scores.rows(), n);
    let mut uf = UnionFind::new(n);
    let mut linked = vec![false; n];
    for j in 1..n {
        let mut best: Option<(usize, f64)> = None;
        for i in 0..j {
            let s = scores.get(i, j);
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((i, s));
            }
        }
        if let Some((i, s)) = best {
            if s > 0.0 {
                uf.union(i, j);
                linked[i] = true;
                linked[j] = true;
            }
        }
    }
    let mut clusters: Vec<Vec<usize>> = Vec::new();
    let mut slot: Vec<Option<usize>> = vec![None; n];
    for x in 0..n {
        if !linked[x] && mention_scores[x] <= 0.0 {
            continue;
        }
        let root = uf.find(x);
        match slot[root] {
            Some(c) => clusters[c].push(x),
            None => {
                slot[root] = Some(clusters.len());
                clusters.push(vec![x]);
            }
        }
    }
    clusters
}

/// The two coreference loss terms.
#[derive(Debug, Clone)]
pub struct CorefLoss {
    /// Negative marginal log-likelihood of gold antecedents, summed over
    /// candidates.
    pub antecedent: Tensor,
    /// Binary cross-entropy of the mention scores, summed over candidates.
    pub mention: Tensor,
}

impl CorefLoss {
    pub fn total(&self, mention_weight: f64) -> Result<Tensor> {
        Ok((&self.antecedent + self.mention.affine(mention_weight, 0.0)?)?)
    }
}

/// Antecedent and mention losses for one candidate set.
///
/// `scores` is `n × n` with `(i, j)` = antecedent `i`, anaphor `j`; `gold[x]`
/// is the gold cluster of candidate `x` under exact span match. The dummy
/// antecedent (score 0) is correct iff a candidate has no earlier candidate
/// in its gold cluster.
pub fn coref_loss(scores: &Tensor, mention_scores: &Tensor, gold: &[Option<usize>]) -> Result<CorefLoss> {
    let n = gold.len();
    let dev = scores.device();
    // row j: [dummy, s(0, j), ..., s(n-1, j)]
    let dummy = Tensor::zeros((n, 1), DTYPE, dev)?;
    let all = Tensor::cat(&[&dummy, &scores.t()?], 1)?;
    let mut valid = vec![false; n * (n + 1)];
    let mut correct = vec![false; n * (n + 1)];
    for j in 0..n {
        valid[j * (n + 1)] = true;
        let mut any = false;
        for i in 0..j {
            valid[j * (n + 1) + i + 1] = true;
            if gold[j].is_some() && gold[i] == gold[j] {
                correct[j * (n + 1) + i + 1] = true;
                any = true;
            }
        }
        if !any {
            correct[j * (n + 1)] = true;
        }
    }
    let shape = [n, n + 1];
    let all_masked = all.broadcast_add(&additive_mask(&valid, &shape, dev)?)?;
    let gold_masked = all.broadcast_add(&additive_mask(&correct, &shape, dev)?)?;
    let antecedent = (logsumexp(&all_masked, 1)? - logsumexp(&gold_masked, 1)?)?.sum_all()?;

    let targets: Vec<f64> = gold.iter().map(|g| if g.is_some() { 1.0 } else { 0.0 }).collect();
    let targets = Tensor::from_vec(targets, n, dev)?;
    let mention = bce_with_logits_sum(mention_scores, &targets)?;
    Ok(CorefLoss { antecedent, mention })
}
