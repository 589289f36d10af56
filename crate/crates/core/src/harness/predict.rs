use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::JointModel;
use crate::corpus::{Document, RelationSchema, Span};
use crate::error::{Error, Result};
use crate::metrics::{EvaluationReport, Evaluator, FactIndex, SystemOutput};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictedTriple {
    pub head_cluster_idx: usize,
    pub tail_cluster_idx: usize,
    pub relation_name: String,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocumentPrediction {
    pub doc_id: String,
    pub clusters: Vec<Vec<Span>>,
    pub triples: Vec<PredictedTriple>,
}

impl DocumentPrediction {
    pub fn empty(doc_id: &str) -> Self {
        DocumentPrediction {
            doc_id: doc_id.to_string(),
            clusters: Vec::new(),
            triples: Vec::new(),
        }
    }

    /// Resolves relation names against `schema`.
    pub fn to_system_output(&self, schema: &RelationSchema) -> Result<SystemOutput> {
        let bad = |reason: String| Error::validation(format!("prediction {}", self.doc_id), reason);
        let mut triples = Vec::with_capacity(self.triples.len());
        for t in &self.triples {
            let r = schema
                .index_of(&t.relation_name)
                .ok_or_else(|| bad(format!("unknown relation {:?}", t.relation_name)))?;
            let n = self.clusters.len();
            if t.head_cluster_idx >= n || t.tail_cluster_idx >= n {
                return Err(bad(format!(
                    "triple references cluster {} / {} of {n}",
                    t.head_cluster_idx, t.tail_cluster_idx
                )));
            }
            triples.push((t.head_cluster_idx, t.tail_cluster_idx, r));
        }
        Ok(SystemOutput {
            clusters: self.clusters.clone(),
            triples,
        })
    }
}

/// The prediction file format: `{"documents": [...]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct PredictionSet {
    pub documents: Vec<DocumentPrediction>,
}

impl PredictionSet {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|source| Error::Parse {
            what: path.display().to_string(),
            source,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).map_err(|source| Error::Parse {
            what: path.display().to_string(),
            source,
        })?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

pub fn predict(model: &JointModel, docs: &[Document]) -> Result<PredictionSet> {
    Ok(PredictionSet {
        documents: docs
            .iter()
            .map(|d| model.predict_document(d))
            .collect::<Result<_>>()?,
    })
}

/// Scores predictions against gold documents. Gold documents without a
/// prediction count as empty predictions; predictions for unknown
/// documents are an error.
pub fn score_predictions(
    predictions: &PredictionSet,
    gold: &[Document],
    schema: &RelationSchema,
    fact_index: Option<&FactIndex>,
) -> Result<EvaluationReport> {
    let by_id: HashMap<&str, &DocumentPrediction> = predictions
        .documents
        .iter()
        .map(|p| (p.doc_id.as_str(), p))
        .collect();
    if let Some(p) = predictions
        .documents
        .iter()
        .find(|p| !gold.iter().any(|g| g.id == p.doc_id))
    {
        return Err(Error::InvalidArgument(format!(
            "prediction for unknown document {:?}",
            p.doc_id
        )));
    }
    let mut evaluator = Evaluator::new();
    if let Some(index) = fact_index {
        evaluator = evaluator.with_fact_index(index, schema);
    }
    for doc in gold {
        let output = match by_id.get(doc.id.as_str()) {
            Some(p) => p.to_system_output(schema)?,
            None => {
                log::warn!("no prediction for document {}", doc.id);
                SystemOutput::default()
            }
        };
        evaluator.add(doc, &output);
    }
    Ok(evaluator.report())
}

/// Predicts and scores in one pass.
pub fn evaluate(
    model: &JointModel,
    docs: &[Document],
    fact_index: Option<&FactIndex>,
) -> Result<EvaluationReport> {
    let schema = model.schema();
    let mut evaluator = Evaluator::new();
    if let Some(index) = fact_index {
        evaluator = evaluator.with_fact_index(index, schema);
    }
    for doc in docs {
        let output = model.predict_document(doc)?.to_system_output(schema)?;
        evaluator.add(doc, &output);
    }
    Ok(evaluator.report())
}
