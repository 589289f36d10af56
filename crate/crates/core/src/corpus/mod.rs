//! Documents, gold annotations and corpus ingestion.
//!
//! Mention spans are inclusive token ranges. Relation triples point at
//! clusters by their position in [`Document::clusters`].

mod docred;
mod dwie;
mod stats;

use std::collections::{HashMap, HashSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use docred::{load_docred, parse_docred};
pub use dwie::{load_dwie, parse_dwie_document, remove_empty_entities, tokenize};
pub use stats::{corpus_statistics, holdout_split, CorpusStatistics};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Token {
    pub text: String,
    pub sentence_index: usize,
    pub document_offset: usize,
}

/// Inclusive token range `[start, end]`. Serialized as a two-element array.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "[usize; 2]", into = "[usize; 2]")]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

impl Span {
    pub fn new(start: usize, end: usize) -> Self {
        debug_assert!(start <= end, "span start {start} > end {end}");
        Span { start, end }
    }

    pub fn width(&self) -> usize {
        self.end - self.start + 1
    }
}

impl From<[usize; 2]> for Span {
    fn from([start, end]: [usize; 2]) -> Self {
        Span { start, end }
    }
}

impl From<Span> for [usize; 2] {
    fn from(span: Span) -> Self {
        [span.start, span.end]
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntityCluster {
    pub id: String,
    pub mentions: Vec<Span>,
}

impl EntityCluster {
    pub fn new(id: impl Into<String>, mentions: Vec<Span>) -> Self {
        EntityCluster {
            id: id.into(),
            mentions,
        }
    }

    pub fn is_singleton(&self) -> bool {
        self.mentions.len() == 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationTriple {
    pub head: usize,
    pub tail: usize,
    pub relation: usize,
    /// Evidence annotations carried through untouched.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evidence: Option<serde_json::Value>,
}

impl RelationTriple {
    pub fn new(head: usize, tail: usize, relation: usize) -> Self {
        RelationTriple {
            head,
            tail,
            relation,
            evidence: None,
        }
    }

    pub fn key(&self) -> (usize, usize, usize) {
        (self.head, self.tail, self.relation)
    }
}

/// Ordered list of relation type names.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct RelationSchema {
    types: Vec<String>,
    #[serde(skip)]
    index: HashMap<String, usize>,
}

impl RelationSchema {
    pub fn new(types: Vec<String>) -> Result<Self> {
        if types.is_empty() {
            return Err(Error::InvalidArgument(
                "relation schema needs at least one type".into(),
            ));
        }
        let mut index = HashMap::with_capacity(types.len());
        for (i, name) in types.iter().enumerate() {
            if index.insert(name.clone(), i).is_some() {
                return Err(Error::InvalidArgument(format!(
                    "duplicate relation type {name:?}"
                )));
            }
        }
        Ok(RelationSchema { types, index })
    }

    pub fn len(&self) -> usize {
        self.types.len()
    }

    pub fn is_empty(&self) -> bool {
        self.types.is_empty()
    }

    pub fn name(&self, index: usize) -> Option<&str> {
        self.types.get(index).map(String::as_str)
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.index.get(name).copied()
    }

    pub fn names(&self) -> &[String] {
        &self.types
    }
}

impl TryFrom<Vec<String>> for RelationSchema {
    type Error = Error;

    fn try_from(types: Vec<String>) -> Result<Self> {
        RelationSchema::new(types)
    }
}

impl From<RelationSchema> for Vec<String> {
    fn from(schema: RelationSchema) -> Self {
        schema.types
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub tokens: Vec<Token>,
    pub clusters: Vec<EntityCluster>,
    pub relations: Vec<RelationTriple>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tags: Vec<String>,
}

impl Document {
    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    /// Builds tokens from pre-split sentences, offsets counted as if tokens
    /// were joined by single spaces.
    pub fn tokens_from_sentences<S: AsRef<str>>(sentences: &[Vec<S>]) -> Vec<Token> {
        let mut tokens = Vec::new();
        let mut offset = 0;
        for (sentence_index, sentence) in sentences.iter().enumerate() {
            for text in sentence {
                let text = text.as_ref().to_string();
                let len = text.chars().count();
                tokens.push(Token {
                    text,
                    sentence_index,
                    document_offset: offset,
                });
                offset += len + 1;
            }
        }
        tokens
    }

    /// Token index ranges `[start, end)` of each sentence, in order.
    pub fn sentence_ranges(&self) -> Vec<(usize, usize)> {
        let mut ranges = Vec::new();
        let mut start = 0;
        for i in 1..=self.tokens.len() {
            if i == self.tokens.len() || self.tokens[i].sentence_index != self.tokens[start].sentence_index {
                ranges.push((start, i));
                start = i;
            }
        }
        ranges
    }

    pub fn span_text(&self, span: Span) -> String {
        self.tokens[span.start..=span.end]
            .iter()
            .map(|t| t.text.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }

    /// Gold mention span to gold cluster index.
    pub fn mention_clusters(&self) -> HashMap<Span, usize> {
        let mut map = HashMap::new();
        for (i, cluster) in self.clusters.iter().enumerate() {
            for &m in &cluster.mentions {
                map.insert(m, i);
            }
        }
        map
    }

    pub fn gold_spans(&self) -> Vec<Span> {
        let mut spans: Vec<Span> = self
            .clusters
            .iter()
            .flat_map(|c| c.mentions.iter().copied())
            .collect();
        spans.sort();
        spans
    }

    pub fn gold_span_clusters(&self) -> Vec<Vec<Span>> {
        self.clusters.iter().map(|c| c.mentions.clone()).collect()
    }

    /// Sorts and deduplicates mentions within each cluster and drops
    /// duplicate (head, tail, relation) triples, keeping the first.
    pub fn normalize(&mut self) {
        for cluster in &mut self.clusters {
            cluster.mentions.sort();
            cluster.mentions.dedup();
        }
        let mut seen = HashSet::new();
        self.relations.retain(|r| seen.insert(r.key()));
    }

    pub fn validate(&self, num_relations: usize) -> Result<()> {
        let err = |reason: String| Err(Error::validation(&self.id, reason));
        for pair in self.tokens.windows(2) {
            if pair[1].document_offset <= pair[0].document_offset {
                return err(format!("token offsets not increasing at {:?}", pair[1].text));
            }
            if pair[1].sentence_index < pair[0].sentence_index {
                return err("sentence indices decrease".into());
            }
        }
        let mut owner: HashMap<Span, usize> = HashMap::new();
        for (ci, cluster) in self.clusters.iter().enumerate() {
            if cluster.mentions.is_empty() {
                return err(format!("cluster {} has no mentions", cluster.id));
            }
            for &m in &cluster.mentions {
                if m.start > m.end || m.end >= self.tokens.len() {
                    return err(format!(
                        "mention [{}, {}] out of range for {} tokens",
                        m.start,
                        m.end,
                        self.tokens.len()
                    ));
                }
                if let Some(prev) = owner.insert(m, ci) {
                    return err(format!(
                        "mention [{}, {}] appears in clusters {} and {}",
                        m.start, m.end, prev, ci
                    ));
                }
            }
        }
        for r in &self.relations {
            if r.head >= self.clusters.len() || r.tail >= self.clusters.len() {
                return err(format!(
                    "relation ({}, {}) references a missing cluster",
                    r.head, r.tail
                ));
            }
            if r.head == r.tail {
                return err(format!("self relation on cluster {}", r.head));
            }
            if r.relation >= num_relations {
                return err(format!("relation type {} out of schema", r.relation));
            }
        }
        Ok(())
    }
}

/// A schema plus its documents; this is also the canonical on-disk format.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub schema: RelationSchema,
    pub documents: Vec<Document>,
}

impl Corpus {
    pub fn new(schema: RelationSchema, documents: Vec<Document>) -> Result<Self> {
        for doc in &documents {
            doc.validate(schema.len())?;
        }
        Ok(Corpus { schema, documents })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let corpus: Corpus = serde_json::from_str(&text).map_err(|source| Error::Parse {
            what: path.display().to_string(),
            source,
        })?;
        for doc in &corpus.documents {
            doc.validate(corpus.schema.len())?;
        }
        Ok(corpus)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string(self).map_err(|source| Error::Parse {
            what: path.display().to_string(),
            source,
        })?;
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// On-disk dataset layouts understood by [`load_dataset_dir`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DatasetFormat {
    #[default]
    Auto,
    Docred,
    Dwie,
    Canonical,
}

/// Train/dev/test documents sharing one schema. Missing splits are empty.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub schema: RelationSchema,
    pub train: Vec<Document>,
    pub dev: Vec<Document>,
    pub test: Vec<Document>,
}

impl Dataset {
    pub fn split(&self, name: &str) -> Option<&[Document]> {
        match name {
            "train" => Some(&self.train),
            "dev" => Some(&self.dev),
            "test" => Some(&self.test),
            _ => None,
        }
    }

    pub fn all_documents(&self) -> impl Iterator<Item = &Document> {
        self.train.iter().chain(&self.dev).chain(&self.test)
    }
}

const DOCRED_FILES: [&str; 3] = ["train_annotated.json", "dev.json", "test.json"];
const CANONICAL_FILES: [&str; 3] = ["train.json", "dev.json", "test.json"];

fn detect_format(dir: &Path) -> DatasetFormat {
    if dir.join(DOCRED_FILES[0]).exists() {
        DatasetFormat::Docred
    } else if CANONICAL_FILES.iter().any(|f| dir.join(f).exists()) {
        DatasetFormat::Canonical
    } else {
        DatasetFormat::Dwie
    }
}

/// Loads a dataset directory.
///
/// - DocRED: `train_annotated.json`, `dev.json`, `test.json`, and optionally
///   `rel_info.json` fixing the relation inventory.
/// - DWIE: per-document annotation files anywhere below `dir`, split by their
///   `train`/`test` tags. DWIE has no dev split.
/// - Canonical: `train.json`, `dev.json`, `test.json` in [`Corpus`] format.
pub fn load_dataset_dir(dir: impl AsRef<Path>, format: DatasetFormat) -> Result<Dataset> {
    let dir = dir.as_ref();
    let format = match format {
        DatasetFormat::Auto => detect_format(dir),
        f => f,
    };
    match format {
        DatasetFormat::Docred => {
            let rel_info = dir.join("rel_info.json");
            let schema = if rel_info.exists() {
                let text = fs::read_to_string(&rel_info).map_err(|e| Error::io(&rel_info, e))?;
                let map: std::collections::BTreeMap<String, String> =
                    serde_json::from_str(&text).map_err(|source| Error::Parse {
                        what: rel_info.display().to_string(),
                        source,
                    })?;
                Some(RelationSchema::new(map.into_keys().collect())?)
            } else {
                None
            };
            let schema = match schema {
                Some(s) => s,
                None => {
                    // Union of the relation codes over the labelled splits.
                    let mut names = std::collections::BTreeSet::new();
                    for file in &DOCRED_FILES[..2] {
                        let path = dir.join(file);
                        if path.exists() {
                            let (_, s) = load_docred(&path, None)?;
                            names.extend(s.names().iter().cloned());
                        }
                    }
                    RelationSchema::new(names.into_iter().collect())?
                }
            };
            let load = |file: &str| -> Result<Vec<Document>> {
                let path = dir.join(file);
                if path.exists() {
                    Ok(load_docred(&path, Some(&schema))?.0)
                } else {
                    Ok(Vec::new())
                }
            };
            Ok(Dataset {
                train: load(DOCRED_FILES[0])?,
                dev: load(DOCRED_FILES[1])?,
                test: load(DOCRED_FILES[2])?,
                schema,
            })
        }
        DatasetFormat::Dwie => {
            let (docs, schema) = load_dwie(dir)?;
            let (mut train, mut test) = (Vec::new(), Vec::new());
            for doc in docs {
                if doc.tags.iter().any(|t| t == "test") {
                    test.push(doc);
                } else {
                    train.push(doc);
                }
            }
            Ok(Dataset {
                schema,
                train,
                dev: Vec::new(),
                test,
            })
        }
        DatasetFormat::Canonical => {
            let mut schema: Option<RelationSchema> = None;
            let mut splits = Vec::new();
            for file in CANONICAL_FILES {
                let path = dir.join(file);
                if !path.exists() {
                    splits.push(Vec::new());
                    continue;
                }
                let corpus = Corpus::load(&path)?;
                match &schema {
                    Some(s) if *s != corpus.schema => {
                        return Err(Error::validation(
                            path.display().to_string(),
                            "relation schema differs from the other splits",
                        ))
                    }
                    Some(_) => {}
                    None => schema = Some(corpus.schema),
                }
                splits.push(corpus.documents);
            }
            let schema = schema.ok_or_else(|| {
                Error::InvalidArgument(format!("no corpus files found in {}", dir.display()))
            })?;
            let mut splits = splits.into_iter();
            Ok(Dataset {
                schema,
                train: splits.next().unwrap_or_default(),
                dev: splits.next().unwrap_or_default(),
                test: splits.next().unwrap_or_default(),
            })
        }
        DatasetFormat::Auto => unreachable!(),
    }
}
