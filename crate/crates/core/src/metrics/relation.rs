use std::collections::HashSet;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ratio, Prf};
use crate::corpus::{Document, RelationSchema, Span};
use crate::error::{Error, Result};

/// Identity of a predicted entity after alignment with the gold clusters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntityRef {
    /// Exactly equal to the gold cluster with this index.
    Gold(usize),
    /// No exact gold match; never equal to any gold ID.
    Dummy(usize),
}

/// Maps each predicted cluster to the gold cluster with the identical span
/// set, or to a fresh dummy ID.
pub fn map_entity_ids(predicted: &[Vec<Span>], gold: &[Vec<Span>]) -> Vec<EntityRef> {
    let key = |c: &[Span]| {
        let mut v = c.to_vec();
        v.sort();
        v.dedup();
        v
    };
    let gold_keys: Vec<Vec<Span>> = gold.iter().map(|g| key(g)).collect();
    predicted
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let k = key(p);
            match gold_keys.iter().position(|g| *g == k) {
                Some(j) => EntityRef::Gold(j),
                None => EntityRef::Dummy(i),
            }
        })
        .collect()
}

/// Relational facts of a training split, keyed by mention surface strings
/// and relation name.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FactIndex {
    facts: HashSet<(String, String, String)>,
}

impl FactIndex {
    pub fn from_documents<'a>(docs: impl IntoIterator<Item = &'a Document>, schema: &RelationSchema) -> Self {
        let mut facts = HashSet::new();
        for doc in docs {
            for r in &doc.relations {
                let rel = schema.name(r.relation).unwrap_or_default().to_string();
                for &h in &doc.clusters[r.head].mentions {
                    for &t in &doc.clusters[r.tail].mentions {
                        facts.insert((doc.span_text(h), doc.span_text(t), rel.clone()));
                    }
                }
            }
        }
        FactIndex { facts }
    }

    pub fn len(&self) -> usize {
        self.facts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.facts.is_empty()
    }

    pub fn insert(&mut self, head: &str, tail: &str, relation: &str) {
        self.facts
            .insert((head.to_string(), tail.to_string(), relation.to_string()));
    }

    /// Whether any mention-name pair of the two gold clusters of `doc` forms
    /// a known fact with `relation`.
    pub fn contains_fact(&self, doc: &Document, head: usize, tail: usize, relation: &str) -> bool {
        doc.clusters[head].mentions.iter().any(|&h| {
            let hn = doc.span_text(h);
            doc.clusters[tail].mentions.iter().any(|&t| {
                self.facts
                    .contains(&(hn.clone(), doc.span_text(t), relation.to_string()))
            })
        })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let facts: Vec<(String, String, String)> =
            serde_json::from_str(&text).map_err(|source| Error::Parse {
                what: path.display().to_string(),
                source,
            })?;
        Ok(FactIndex {
            facts: facts.into_iter().collect(),
        })
    }

    /// Writes the facts as a sorted JSON array of `[head, tail, relation]`.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut facts: Vec<_> = self.facts.iter().collect();
        facts.sort();
        let text = serde_json::to_string(&facts).map_err(|source| Error::Parse {
            what: path.display().to_string(),
            source,
        })?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelationScores {
    pub relation: Prf,
    /// Ignoring correct predictions whose fact also occurs in training.
    pub ignore_train: Prf,
}

/// Corpus-level triple counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct RelationCounts {
    pub correct: usize,
    pub predicted: usize,
    pub gold: usize,
    pub correct_in_train: usize,
}

impl RelationCounts {
    /// Adds one document. `ids` maps predicted clusters to gold identities;
    /// `triples` index predicted clusters.
    pub fn add(
        &mut self,
        doc: &Document,
        ids: &[EntityRef],
        triples: &[(usize, usize, usize)],
        ignore: Option<(&FactIndex, &RelationSchema)>,
    ) {
        let gold: HashSet<(EntityRef, EntityRef, usize)> = doc
            .relations
            .iter()
            .map(|r| (EntityRef::Gold(r.head), EntityRef::Gold(r.tail), r.relation))
            .collect();
        let predicted: HashSet<(EntityRef, EntityRef, usize)> =
            triples.iter().map(|&(h, t, r)| (ids[h], ids[t], r)).collect();
        self.gold += gold.len();
        self.predicted += predicted.len();
        for fact in predicted.intersection(&gold) {
            self.correct += 1;
            if let (Some((index, schema)), (EntityRef::Gold(h), EntityRef::Gold(t), r)) = (ignore, fact) {
                let name = schema.name(*r).unwrap_or_default();
                if index.contains_fact(doc, *h, *t, name) {
                    self.correct_in_train += 1;
                }
            }
        }
    }

    /// Micro P/R/F, and the Ign variant that drops correct in-train facts
    /// from the correct and predicted counts while keeping recall.
    pub fn scores(&self) -> RelationScores {
        let relation = Prf::from_counts(self.correct, self.predicted, self.gold);
        let ign_precision = ratio(
            (self.correct - self.correct_in_train) as f64,
            (self.predicted - self.correct_in_train) as f64,
        );
        RelationScores {
            relation,
            ignore_train: Prf::new(ign_precision, relation.recall),
        }
    }
}

/// Relation F1 for documents given as `(gold document, entity ids,
/// predicted triples)`.
pub fn relation_f1<'a, I>(documents: I, ignore: Option<(&FactIndex, &RelationSchema)>) -> RelationScores
where
    I: IntoIterator<Item = (&'a Document, &'a [EntityRef], &'a [(usize, usize, usize)])>,
{
    let mut counts = RelationCounts::default();
    for (doc, ids, triples) in documents {
        counts.add(doc, ids, triples, ignore);
    }
    counts.scores()
}
