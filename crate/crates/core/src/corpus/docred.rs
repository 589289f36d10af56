use std::collections::BTreeSet;
use std::fs;
use std::path::Path;

use serde::Deserialize;
use serde_json::Value;

use super::{Document, EntityCluster, RelationSchema, RelationTriple, Span};
use crate::error::{Error, Result};

#[derive(Deserialize)]
struct RawDocument {
    title: String,
    sents: Vec<Vec<String>>,
    #[serde(rename = "vertexSet")]
    vertex_set: Vec<Vec<RawMention>>,
    #[serde(default)]
    labels: Vec<RawLabel>,
}

#[derive(Deserialize)]
struct RawMention {
    sent_id: usize,
    /// Sentence-relative, end-exclusive.
    pos: [usize; 2],
}

#[derive(Deserialize)]
struct RawLabel {
    h: usize,
    t: usize,
    r: String,
    #[serde(default)]
    evidence: Option<Value>,
}

/// Loads a DocRED-format JSON file.
///
/// With no `schema`, the relation inventory is the sorted set of relation
/// codes found in the file.
pub fn load_docred(
    path: impl AsRef<Path>,
    schema: Option<&RelationSchema>,
) -> Result<(Vec<Document>, RelationSchema)> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_docred(&text, schema).map_err(|e| match e {
        Error::Parse { what, source } => Error::Parse {
            what: format!("{} ({what})", path.display()),
            source,
        },
        other => other,
    })
}

pub fn parse_docred(text: &str, schema: Option<&RelationSchema>) -> Result<(Vec<Document>, RelationSchema)> {
    let values: Vec<Value> = serde_json::from_str(text).map_err(|source| Error::Parse {
        what: "document list".into(),
        source,
    })?;
    let mut raws = Vec::with_capacity(values.len());
    for (i, value) in values.into_iter().enumerate() {
        let name = value
            .get("title")
            .and_then(Value::as_str)
            .map(str::to_string)
            .unwrap_or_else(|| format!("document #{i}"));
        let raw: RawDocument = serde_json::from_value(value).map_err(|source| Error::Parse {
            what: format!("document {name:?}"),
            source,
        })?;
        raws.push(raw);
    }

    let schema = match schema {
        Some(s) => s.clone(),
        None => {
            let names: BTreeSet<&str> = raws
                .iter()
                .flat_map(|d| d.labels.iter().map(|l| l.r.as_str()))
                .collect();
            RelationSchema::new(names.into_iter().map(str::to_string).collect())?
        }
    };

    let docs = raws
        .into_iter()
        .map(|raw| convert(raw, &schema))
        .collect::<Result<Vec<_>>>()?;
    Ok((docs, schema))
}

fn convert(raw: RawDocument, schema: &RelationSchema) -> Result<Document> {
    let tokens = Document::tokens_from_sentences(&raw.sents);
    let mut sentence_starts = Vec::with_capacity(raw.sents.len());
    let mut offset = 0;
    for sent in &raw.sents {
        sentence_starts.push(offset);
        offset += sent.len();
    }

    let mut clusters = Vec::with_capacity(raw.vertex_set.len());
    for (ci, vertex) in raw.vertex_set.iter().enumerate() {
        let mut mentions = Vec::with_capacity(vertex.len());
        for m in vertex {
            let sent_len = raw.sents.get(m.sent_id).map(Vec::len).ok_or_else(|| {
                Error::validation(&raw.title, format!("entity {ci}: sentence {} missing", m.sent_id))
            })?;
            let [start, end] = m.pos;
            if start >= end || end > sent_len {
                return Err(Error::validation(
                    &raw.title,
                    format!(
                        "entity {ci}: mention pos [{start}, {end}) out of range for sentence {} of length {sent_len}",
                        m.sent_id
                    ),
                ));
            }
            let base = sentence_starts[m.sent_id];
            mentions.push(Span::new(base + start, base + end - 1));
        }
        clusters.push(EntityCluster::new(ci.to_string(), mentions));
    }

    let mut relations = Vec::with_capacity(raw.labels.len());
    for label in raw.labels {
        let relation = schema
            .index_of(&label.r)
            .ok_or_else(|| Error::validation(&raw.title, format!("unknown relation {:?}", label.r)))?;
        relations.push(RelationTriple {
            head: label.h,
            tail: label.t,
            relation,
            evidence: label.evidence,
        });
    }

    let mut doc = Document {
        id: raw.title,
        tokens,
        clusters,
        relations,
        tags: Vec::new(),
    };
    doc.normalize();
    doc.validate(schema.len())?;
    Ok(doc)
}
