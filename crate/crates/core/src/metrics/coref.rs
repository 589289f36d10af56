use std::collections::HashMap;
use std::hash::Hash;

use super::assignment::max_weight_assignment;
use super::{ratio, Prf};

/// Corpus-level numerators and denominators for MUC, B³ and CEAF-φ4.
///
/// MUC counts links, so documents without gold or predicted links add
/// nothing to its totals. Mentions present on only one side count against
/// B³ precision or recall with an empty overlap.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct CorefCounts {
    pub muc_recall: (f64, f64),
    pub muc_precision: (f64, f64),
    pub b3_recall: (f64, f64),
    pub b3_precision: (f64, f64),
    /// Total φ4 similarity of the optimal alignment.
    pub ceaf_similarity: f64,
    pub ceaf_predicted: f64,
    pub ceaf_gold: f64,
}

fn add(a: (f64, f64), b: (f64, f64)) -> (f64, f64) {
    (a.0 + b.0, a.1 + b.1)
}

/// Σ_k (|k| − |partition of k by `other`|) and Σ_k (|k| − 1).
fn muc_side<M: Eq + Hash>(keys: &[Vec<M>], other: &[Vec<M>]) -> (f64, f64) {
    let owner: HashMap<&M, usize> = other
        .iter()
        .enumerate()
        .flat_map(|(i, c)| c.iter().map(move |m| (m, i)))
        .collect();
    let mut num = 0.0;
    let mut den = 0.0;
    for k in keys {
        if k.is_empty() {
            continue;
        }
        let mut parts: Vec<Option<usize>> = Vec::new();
        let mut unaligned = 0usize;
        for m in k {
            match owner.get(m) {
                Some(&c) => {
                    if !parts.contains(&Some(c)) {
                        parts.push(Some(c));
                    }
                }
                None => unaligned += 1,
            }
        }
        let partitions = parts.len() + unaligned;
        num += (k.len() - partitions) as f64;
        den += (k.len() - 1) as f64;
    }
    (num, den)
}

fn overlap<M: Eq + Hash>(a: &[M], b: &[M]) -> usize {
    a.iter().filter(|m| b.contains(m)).count()
}

/// Σ_k Σ_o |k ∩ o|² / |k| and Σ_k |k|.
fn b3_side<M: Eq + Hash>(keys: &[Vec<M>], other: &[Vec<M>]) -> (f64, f64) {
    let owner: HashMap<&M, usize> = other
        .iter()
        .enumerate()
        .flat_map(|(i, c)| c.iter().map(move |m| (m, i)))
        .collect();
    let mut num = 0.0;
    let mut den = 0.0;
    for k in keys {
        if k.is_empty() {
            continue;
        }
        let mut counts: HashMap<usize, usize> = HashMap::new();
        for m in k {
            if let Some(&c) = owner.get(m) {
                *counts.entry(c).or_default() += 1;
            }
        }
        num += counts.values().map(|&c| (c * c) as f64).sum::<f64>() / k.len() as f64;
        den += k.len() as f64;
    }
    (num, den)
}

fn phi4<M: Eq + Hash>(gold: &[M], pred: &[M]) -> f64 {
    2.0 * overlap(gold, pred) as f64 / (gold.len() + pred.len()) as f64
}

impl CorefCounts {
    pub fn add<M: Eq + Hash>(&mut self, predicted: &[Vec<M>], gold: &[Vec<M>]) {
        let predicted: Vec<&Vec<M>> = predicted.iter().filter(|c| !c.is_empty()).collect();
        let gold: Vec<&Vec<M>> = gold.iter().filter(|c| !c.is_empty()).collect();
        let predicted: Vec<Vec<&M>> = predicted.iter().map(|c| c.iter().collect()).collect();
        let gold: Vec<Vec<&M>> = gold.iter().map(|c| c.iter().collect()).collect();

        self.muc_recall = add(self.muc_recall, muc_side(&gold, &predicted));
        self.muc_precision = add(self.muc_precision, muc_side(&predicted, &gold));
        self.b3_recall = add(self.b3_recall, b3_side(&gold, &predicted));
        self.b3_precision = add(self.b3_precision, b3_side(&predicted, &gold));

        let weights: Vec<Vec<f64>> = gold
            .iter()
            .map(|g| predicted.iter().map(|p| phi4(g, p)).collect())
            .collect();
        self.ceaf_similarity += max_weight_assignment(&weights).1;
        self.ceaf_predicted += predicted.len() as f64;
        self.ceaf_gold += gold.len() as f64;
    }

    pub fn muc(&self) -> Prf {
        Prf::new(
            ratio(self.muc_precision.0, self.muc_precision.1),
            ratio(self.muc_recall.0, self.muc_recall.1),
        )
    }

    pub fn b_cubed(&self) -> Prf {
        Prf::new(
            ratio(self.b3_precision.0, self.b3_precision.1),
            ratio(self.b3_recall.0, self.b3_recall.1),
        )
    }

    pub fn ceaf_phi4(&self) -> Prf {
        Prf::new(
            ratio(self.ceaf_similarity, self.ceaf_predicted),
            ratio(self.ceaf_similarity, self.ceaf_gold),
        )
    }

    /// Unweighted mean of the MUC, B³ and CEAF-φ4 F1 scores.
    pub fn avg_f1(&self) -> f64 {
        (self.muc().f1 + self.b_cubed().f1 + self.ceaf_phi4().f1) / 3.0
    }
}

fn single<M: Eq + Hash>(predicted: &[Vec<M>], gold: &[Vec<M>]) -> CorefCounts {
    let mut c = CorefCounts::default();
    c.add(predicted, gold);
    c
}

pub fn muc<M: Eq + Hash>(predicted: &[Vec<M>], gold: &[Vec<M>]) -> Prf {
    single(predicted, gold).muc()
}

pub fn b_cubed<M: Eq + Hash>(predicted: &[Vec<M>], gold: &[Vec<M>]) -> Prf {
    single(predicted, gold).b_cubed()
}

pub fn ceaf_phi4<M: Eq + Hash>(predicted: &[Vec<M>], gold: &[Vec<M>]) -> Prf {
    single(predicted, gold).ceaf_phi4()
}

pub fn coref_avg_f1<M: Eq + Hash>(predicted: &[Vec<M>], gold: &[Vec<M>]) -> f64 {
    single(predicted, gold).avg_f1()
}
