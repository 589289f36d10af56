//! Entity-centric evaluation: mention extraction F1, coreference F1 (MUC,
//! B³, CEAF-φ4 and their mean) and entity-level relation F1 with the
//! predicted-to-gold entity ID mapping. Corpus-level scores are micro
//! averages over document counts.

mod assignment;
mod coref;
mod relation;

use std::collections::HashSet;
use std::hash::Hash;

use serde::{Deserialize, Serialize};

pub use assignment::max_weight_assignment;
pub use coref::{b_cubed, ceaf_phi4, coref_avg_f1, muc, CorefCounts};
pub use relation::{map_entity_ids, relation_f1, EntityRef, FactIndex, RelationCounts, RelationScores};

use crate::corpus::{Document, RelationSchema, Span};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

pub(crate) fn ratio(num: f64, den: f64) -> f64 {
    if den == 0.0 {
        0.0
    } else {
        num / den
    }
}

impl Prf {
    pub fn new(precision: f64, recall: f64) -> Self {
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        Prf {
            precision,
            recall,
            f1,
        }
    }

    pub fn from_counts(correct: usize, predicted: usize, gold: usize) -> Self {
        Prf::new(
            ratio(correct as f64, predicted as f64),
            ratio(correct as f64, gold as f64),
        )
    }
}

/// Exact-boundary mention matching counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MentionCounts {
    pub correct: usize,
    pub predicted: usize,
    pub gold: usize,
}

impl MentionCounts {
    pub fn add<M: Eq + Hash>(&mut self, predicted: &[M], gold: &[M]) {
        let pred: HashSet<&M> = predicted.iter().collect();
        let gold: HashSet<&M> = gold.iter().collect();
        self.correct += pred.intersection(&gold).count();
        self.predicted += pred.len();
        self.gold += gold.len();
    }

    pub fn prf(&self) -> Prf {
        Prf::from_counts(self.correct, self.predicted, self.gold)
    }
}

/// Micro-averaged mention F1 over `(predicted, gold)` span lists per document.
pub fn mention_f1<'a, M, I>(documents: I) -> Prf
where
    M: Eq + Hash + 'a,
    I: IntoIterator<Item = (&'a [M], &'a [M])>,
{
    let mut counts = MentionCounts::default();
    for (pred, gold) in documents {
        counts.add(pred, gold);
    }
    counts.prf()
}

/// What a system predicted for one document, in gold-independent terms.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SystemOutput {
    pub clusters: Vec<Vec<Span>>,
    /// `(head cluster, tail cluster, relation index)`.
    pub triples: Vec<(usize, usize, usize)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub documents: usize,
    pub mention: Prf,
    pub muc: Prf,
    pub b_cubed: Prf,
    pub ceaf_phi4: Prf,
    pub coref_avg_f1: f64,
    pub relation: Prf,
    pub relation_ign: Prf,
}

/// Accumulates every metric over a corpus.
#[derive(Debug, Clone, Default)]
pub struct Evaluator<'a> {
    documents: usize,
    mentions: MentionCounts,
    coref: CorefCounts,
    relations: RelationCounts,
    fact_index: Option<&'a FactIndex>,
    schema: Option<&'a RelationSchema>,
}

impl<'a> Evaluator<'a> {
    pub fn new() -> Self {
        Evaluator::default()
    }

    /// Enables the RE-Ign score; facts are compared by relation name.
    pub fn with_fact_index(mut self, index: &'a FactIndex, schema: &'a RelationSchema) -> Self {
        self.fact_index = Some(index);
        self.schema = Some(schema);
        self
    }

    pub fn add(&mut self, gold: &Document, output: &SystemOutput) {
        self.documents += 1;
        let pred_spans: Vec<Span> = output.clusters.iter().flatten().copied().collect();
        self.mentions.add(&pred_spans, &gold.gold_spans());
        let gold_clusters = gold.gold_span_clusters();
        self.coref.add(&output.clusters, &gold_clusters);
        let ids = map_entity_ids(&output.clusters, &gold_clusters);
        let ign = self.fact_index.zip(self.schema);
        self.relations.add(gold, &ids, &output.triples, ign);
    }

    pub fn report(&self) -> EvaluationReport {
        let relation = self.relations.scores();
        EvaluationReport {
            documents: self.documents,
            mention: self.mentions.prf(),
            muc: self.coref.muc(),
            b_cubed: self.coref.b_cubed(),
            ceaf_phi4: self.coref.ceaf_phi4(),
            coref_avg_f1: self.coref.avg_f1(),
            relation: relation.relation,
            relation_ign: relation.ignore_train,
        }
    }
}
