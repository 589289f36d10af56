//! Interactions between the relation scores and coreference.
//!
//! Graph propagation treats each real relation type as a weighted directed
//! graph over candidates and folds attention-pooled neighbour messages back
//! into the mention embeddings before coreference scoring.
//!
//! Graph compatibility compares two candidates' rows of relation scores
//! (their local graphs) over a pruned neighbour set. The weighted L1
//! distance is subtracted from the coreference score and trained with a
//! margin contrastive loss.

use candle_core::{Tensor, Var};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{additive_mask, index_tensor, softmax_last, Init, Matrix, ParamStore, DTYPE};

/// Per-type node transformations for one propagation round.
#[derive(Debug, Clone)]
pub struct PropagationLayer {
    /// `|R| × D × D`.
    pub weight: Var,
    num_relations: usize,
}

impl PropagationLayer {
    pub fn new(
        store: &mut ParamStore,
        prefix: &str,
        span_dim: usize,
        num_relations: usize,
        zero_init: bool,
    ) -> Result<Self> {
        let init = if zero_init {
            Init::Zeros
        } else {
            Init::Xavier(span_dim, span_dim)
        };
        Ok(PropagationLayer {
            weight: store.var(
                &format!("{prefix}.transform"),
                &[num_relations, span_dim, span_dim],
                init,
            )?,
            num_relations,
        })
    }

    /// Updated embeddings `ĝ_v = g_v + Σ_i tanh(Σ_t α^i_{vt} g_t W_i) / |R|`.
    ///
    /// `g` is `n × D`; `scores` is the `T × n × n` relation tensor whose
    /// first `|R|` types are used. A single candidate has no neighbours and
    /// is returned unchanged.
    pub fn propagate(&self, g: &Tensor, scores: &Tensor) -> Result<Tensor> {
        let (n, d) = g.dims2()?;
        if n < 2 {
            return Ok(g.clone());
        }
        let r = self.num_relations;
        let attention = attention_weights(&scores.narrow(0, 0, r)?)?; // R × n × n
        let g3 = g.unsqueeze(0)?.broadcast_as((r, n, d))?.contiguous()?;
        let transformed = g3.matmul(self.weight.as_tensor())?; // R × n × D
        let messages = attention.matmul(&transformed)?.tanh()?; // R × n × D
        Ok((g + (messages.sum(0)? / r as f64)?)?)
    }
}

/// Softmax over neighbours `k ≠ h` of `ReLU(s^i(h, k))`: `R × n × n` in,
/// `R × n × n` out with a zero diagonal and rows summing to one.
pub fn attention_weights(real_scores: &Tensor) -> Result<Tensor> {
    let (r, n, _) = real_scores.dims3()?;
    if n < 2 {
        return Err(Error::InvalidArgument(
            "attention needs at least two candidates".into(),
        ));
    }
    let keep: Vec<bool> = (0..n * n).map(|k| k / n != k % n).collect();
    let mask = additive_mask(&keep, &[1, n, n], real_scores.device())?;
    let logits = real_scores.relu()?.broadcast_add(&mask)?;
    debug_assert_eq!(logits.dims(), &[r, n, n]);
    softmax_last(&logits)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum PruningStrategy {
    /// Top-k nodes by summed relation scores.
    #[default]
    Saliency,
    /// k nodes sampled uniformly; ablation only.
    Random,
}

/// Node saliency: the sum of a node's head-role and tail-role scores over
/// all real types and all other nodes.
pub fn node_saliency(real_scores: &[Matrix]) -> Vec<f64> {
    let n = real_scores.first().map_or(0, Matrix::rows);
    (0..n)
        .map(|v| {
            real_scores
                .iter()
                .map(|s| {
                    (0..n)
                        .filter(|&u| u != v)
                        .map(|u| s.get(v, u) + s.get(u, v))
                        .sum::<f64>()
                })
                .sum()
        })
        .collect()
}

/// Document-wide neighbour set: the `min(k, n)` most salient nodes, ties
/// broken by lower index, returned in ascending index order.
pub fn prune_neighbors(real_scores: &[Matrix], k: usize) -> Vec<usize> {
    let saliency = node_saliency(real_scores);
    let mut order: Vec<usize> = (0..saliency.len()).collect();
    order.sort_by(|&a, &b| saliency[b].total_cmp(&saliency[a]).then(a.cmp(&b)));
    order.truncate(k.max(1));
    order.sort_unstable();
    order
}

/// `min(k, n)` nodes chosen uniformly at random.
pub fn random_neighbors(n: usize, k: usize, seed: u64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    order.truncate(k.max(1));
    order.sort_unstable();
    order
}

/// Learned per-type importance weights plus the fixed hyperparameters of
/// graph compatibility.
#[derive(Debug, Clone)]
pub struct CompatibilityHead {
    /// `|R|`.
    pub beta: Var,
    pub lambda: f64,
    pub margin: f64,
    pub prune_k: usize,
}

/// Per-type distances and their weighted sum.
#[derive(Debug, Clone)]
pub struct Compatibility {
    /// `|R| × n × n`.
    pub per_type: Tensor,
    /// `n × n`; larger means more divergent local graphs.
    pub distance: Tensor,
}

impl CompatibilityHead {
    pub fn new(
        store: &mut ParamStore,
        prefix: &str,
        num_relations: usize,
        beta_init: Option<f64>,
        lambda: f64,
        margin: f64,
        prune_k: usize,
    ) -> Result<Self> {
        if lambda < 0.0 || margin <= 0.0 || prune_k == 0 {
            return Err(Error::Config(format!(
                "need lambda >= 0, margin > 0, k >= 1 (got {lambda}, {margin}, {prune_k})"
            )));
        }
        let init = beta_init.unwrap_or(1.0 / num_relations as f64);
        Ok(CompatibilityHead {
            beta: store.var(&format!("{prefix}.beta"), &[num_relations], Init::Constant(init))?,
            lambda,
            margin,
            prune_k,
        })
    }

    /// `d^i_{x,y} = Σ_{k∈N∖{x,y}} |s^i(x, k) − s^i(y, k)|` and
    /// `ŝ^c = Σ_i β_i d^i`. `real_scores` is `|R| × n × n`.
    pub fn distances(&self, real_scores: &Tensor, neighbors: &[usize]) -> Result<Compatibility> {
        compatibility_distance(real_scores, neighbors, self.beta.as_tensor())
    }
}

pub fn compatibility_distance(
    real_scores: &Tensor,
    neighbors: &[usize],
    beta: &Tensor,
) -> Result<Compatibility> {
    let (r, n, _) = real_scores.dims3()?;
    let dev = real_scores.device();
    let k = neighbors.len();
    if k == 0 || n == 0 {
        let zeros = Tensor::zeros((r, n, n), DTYPE, dev)?;
        return Ok(Compatibility {
            distance: Tensor::zeros((n, n), DTYPE, dev)?,
            per_type: zeros,
        });
    }
    let rows = real_scores
        .contiguous()?
        .index_select(&index_tensor(neighbors, dev)?, 2)?; // R × n × k
    let diff = rows.unsqueeze(2)?.broadcast_sub(&rows.unsqueeze(1)?)?.abs()?; // R × n × n × k
    let mut mask = vec![0.0; n * n * k];
    for x in 0..n {
        for y in 0..n {
            for (j, &nb) in neighbors.iter().enumerate() {
                if nb != x && nb != y {
                    mask[(x * n + y) * k + j] = 1.0;
                }
            }
        }
    }
    let mask = Tensor::from_vec(mask, (1, n, n, k), dev)?;
    let per_type = diff.broadcast_mul(&mask)?.sum(3)?; // R × n × n
    let distance = per_type.broadcast_mul(&beta.reshape((r, 1, 1))?)?.sum(0)?;
    Ok(Compatibility { per_type, distance })
}

/// `s̃^c = s^c − λ ŝ^c`.
pub fn interpolate_coref(coref: &Tensor, distance: &Tensor, lambda: f64) -> Result<Tensor> {
    if lambda < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "lambda must be >= 0, got {lambda}"
        )));
    }
    Ok((coref - distance.affine(lambda, 0.0)?)?)
}

/// Pairs `x < y` of gold-aligned candidates with `Y = 1` iff they share a
/// gold cluster.
pub fn contrastive_pairs(gold: &[Option<usize>]) -> Vec<(usize, usize, bool)> {
    let mut pairs = Vec::new();
    for x in 0..gold.len() {
        let Some(gx) = gold[x] else { continue };
        for (y, gy) in gold.iter().enumerate().skip(x + 1) {
            if let Some(gy) = gy {
                pairs.push((x, y, gx == *gy));
            }
        }
    }
    pairs
}

/// Mean over the given pairs of `Y D² + (1 − Y) max(0, m − D)²`, with the
/// distance clamped at zero from below. Zero when there are no pairs.
pub fn contrastive_loss(distance: &Tensor, pairs: &[(usize, usize, bool)], margin: f64) -> Result<Tensor> {
    let dev = distance.device();
    if pairs.is_empty() {
        return Ok(Tensor::zeros((), DTYPE, dev)?);
    }
    let n = distance.dim(0)?;
    let flat: Vec<usize> = pairs.iter().map(|&(x, y, _)| x * n + y).collect();
    let d = distance
        .flatten_all()?
        .index_select(&index_tensor(&flat, dev)?, 0)?
        .relu()?;
    let y: Vec<f64> = pairs.iter().map(|p| if p.2 { 1.0 } else { 0.0 }).collect();
    let y = Tensor::from_vec(y, pairs.len(), dev)?;
    let not_y = y.affine(-1.0, 1.0)?;
    let pull = (&y * d.sqr()?)?;
    let push = (not_y * d.affine(-1.0, margin)?.relu()?.sqr()?)?;
    Ok((pull + push)?.mean_all()?)
}
