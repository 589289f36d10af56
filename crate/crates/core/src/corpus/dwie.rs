use std::collections::{BTreeSet, HashMap};
use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;

use super::{Document, EntityCluster, RelationSchema, RelationTriple, Span, Token};
use crate::error::{Error, Result};

#[derive(Deserialize)]
struct RawDocument {
    id: String,
    content: String,
    #[serde(default)]
    tags: Vec<String>,
    #[serde(default)]
    mentions: Vec<RawMention>,
    #[serde(default)]
    concepts: Vec<RawConcept>,
    #[serde(default)]
    relations: Vec<RawRelation>,
}

#[derive(Deserialize)]
struct RawMention {
    /// Character offsets, end-exclusive.
    begin: usize,
    end: usize,
    concept: usize,
}

#[derive(Deserialize)]
struct RawConcept {
    concept: usize,
}

#[derive(Deserialize)]
struct RawRelation {
    s: usize,
    p: String,
    o: usize,
}

/// A token with its character range `[begin, end)` in the source text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RawToken {
    pub text: String,
    pub begin: usize,
    pub end: usize,
}

/// Splits text into alphanumeric runs and single punctuation characters.
/// Offsets are in characters, not bytes.
pub fn tokenize(text: &str) -> Vec<RawToken> {
    let mut tokens = Vec::new();
    let mut current: Option<(usize, String)> = None;
    for (i, ch) in text.chars().enumerate() {
        if ch.is_alphanumeric() {
            match &mut current {
                Some((_, s)) => s.push(ch),
                None => current = Some((i, ch.to_string())),
            }
            continue;
        }
        if let Some((begin, s)) = current.take() {
            let end = begin + s.chars().count();
            tokens.push(RawToken { text: s, begin, end });
        }
        if !ch.is_whitespace() {
            tokens.push(RawToken {
                text: ch.to_string(),
                begin: i,
                end: i + 1,
            });
        }
    }
    if let Some((begin, s)) = current {
        let end = begin + s.chars().count();
        tokens.push(RawToken { text: s, begin, end });
    }
    tokens
}

/// Sentence boundaries: after `.`, `!` or `?` when the next token starts with
/// an uppercase letter, and at line breaks. Returns the index of the first
/// token of every sentence after the first.
fn sentence_breaks(text: &str, tokens: &[RawToken]) -> Vec<usize> {
    let chars: Vec<char> = text.chars().collect();
    let mut breaks = Vec::new();
    for i in 1..tokens.len() {
        let prev = &tokens[i - 1];
        let next = &tokens[i];
        let newline = chars[prev.end..next.begin].contains(&'\n');
        let terminal = matches!(prev.text.as_str(), "." | "!" | "?")
            && next.text.chars().next().is_some_and(char::is_uppercase)
            && next.begin > prev.end;
        if newline || terminal {
            breaks.push(i);
        }
    }
    breaks
}

/// Parses one DWIE annotation file into a document. Concepts without any
/// mention are kept; see [`remove_empty_entities`].
pub fn parse_dwie_document(text: &str, schema: &RelationSchema) -> Result<Document> {
    let raw: RawDocument = serde_json::from_str(text).map_err(|source| Error::Parse {
        what: "DWIE document".into(),
        source,
    })?;
    let raw_tokens = tokenize(&raw.content);

    let mut mention_spans = Vec::with_capacity(raw.mentions.len());
    for m in &raw.mentions {
        let covered: Vec<usize> = raw_tokens
            .iter()
            .enumerate()
            .filter(|(_, t)| t.end > m.begin && t.begin < m.end)
            .map(|(i, _)| i)
            .collect();
        match (covered.first(), covered.last()) {
            (Some(&s), Some(&e)) => mention_spans.push((Span::new(s, e), m.concept)),
            _ => {
                return Err(Error::validation(
                    &raw.id,
                    format!("mention [{}, {}) covers no token", m.begin, m.end),
                ))
            }
        }
    }

    // A gold mention never straddles a sentence boundary.
    let mut breaks = sentence_breaks(&raw.content, &raw_tokens);
    breaks.retain(|&b| !mention_spans.iter().any(|(s, _)| s.start < b && b <= s.end));
    let mut tokens = Vec::with_capacity(raw_tokens.len());
    let mut sentence_index = 0;
    let mut next_break = breaks.iter().peekable();
    for (i, t) in raw_tokens.into_iter().enumerate() {
        if next_break.peek() == Some(&&i) {
            sentence_index += 1;
            next_break.next();
        }
        tokens.push(Token {
            text: t.text,
            sentence_index,
            document_offset: t.begin,
        });
    }

    let mut cluster_of: HashMap<usize, usize> = HashMap::new();
    let mut clusters = Vec::with_capacity(raw.concepts.len());
    for c in &raw.concepts {
        if cluster_of.insert(c.concept, clusters.len()).is_some() {
            return Err(Error::validation(
                &raw.id,
                format!("duplicate concept {}", c.concept),
            ));
        }
        clusters.push(EntityCluster::new(c.concept.to_string(), Vec::new()));
    }
    for (span, concept) in mention_spans {
        let ci = *cluster_of.get(&concept).ok_or_else(|| {
            Error::validation(&raw.id, format!("mention refers to unknown concept {concept}"))
        })?;
        clusters[ci].mentions.push(span);
    }

    let mut relations = Vec::with_capacity(raw.relations.len());
    for r in &raw.relations {
        let relation = schema
            .index_of(&r.p)
            .ok_or_else(|| Error::validation(&raw.id, format!("unknown relation {:?}", r.p)))?;
        let lookup = |c: usize| {
            cluster_of
                .get(&c)
                .copied()
                .ok_or_else(|| Error::validation(&raw.id, format!("relation refers to unknown concept {c}")))
        };
        relations.push(RelationTriple::new(lookup(r.s)?, lookup(r.o)?, relation));
    }

    let mut doc = Document {
        id: raw.id,
        tokens,
        clusters,
        relations,
        tags: raw.tags,
    };
    doc.normalize();
    Ok(doc)
}

/// Drops clusters with zero mentions and every triple that touches one,
/// re-indexing the remaining triples.
pub fn remove_empty_entities(doc: &mut Document) {
    let mut remap = Vec::with_capacity(doc.clusters.len());
    let mut kept = 0;
    for c in &doc.clusters {
        if c.mentions.is_empty() {
            remap.push(None);
        } else {
            remap.push(Some(kept));
            kept += 1;
        }
    }
    doc.clusters.retain(|c| !c.mentions.is_empty());
    doc.relations
        .retain_mut(|r| match (remap[r.head], remap[r.tail]) {
            (Some(h), Some(t)) => {
                r.head = h;
                r.tail = t;
                true
            }
            _ => false,
        });
}

fn collect_files(path: &Path, out: &mut Vec<PathBuf>) -> Result<()> {
    if path.is_file() {
        out.push(path.to_path_buf());
        return Ok(());
    }
    let entries = fs::read_dir(path).map_err(|e| Error::io(path, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(path, e))?;
        let p = entry.path();
        if p.is_dir() {
            collect_files(&p, out)?;
        } else if p.extension().is_some_and(|e| e == "json") {
            out.push(p);
        }
    }
    Ok(())
}

/// Loads a DWIE annotation file or a directory of them. The schema is the
/// sorted set of predicates over all loaded files.
pub fn load_dwie(path: impl AsRef<Path>) -> Result<(Vec<Document>, RelationSchema)> {
    let mut files = Vec::new();
    collect_files(path.as_ref(), &mut files)?;
    files.sort();

    let mut texts = Vec::with_capacity(files.len());
    let mut predicates = BTreeSet::new();
    for file in &files {
        let text = fs::read_to_string(file).map_err(|e| Error::io(file, e))?;
        #[derive(Deserialize)]
        struct Predicates {
            #[serde(default)]
            relations: Vec<RawRelation>,
        }
        let p: Predicates = serde_json::from_str(&text).map_err(|source| Error::Parse {
            what: file.display().to_string(),
            source,
        })?;
        predicates.extend(p.relations.into_iter().map(|r| r.p));
        texts.push(text);
    }
    let schema = RelationSchema::new(predicates.into_iter().collect())?;

    let mut docs = Vec::with_capacity(texts.len());
    for (file, text) in files.iter().zip(&texts) {
        let mut doc = parse_dwie_document(text, &schema).map_err(|e| match e {
            Error::Parse { source, .. } => Error::Parse {
                what: file.display().to_string(),
                source,
            },
            other => other,
        })?;
        remove_empty_entities(&mut doc);
        doc.validate(schema.len())?;
        docs.push(doc);
    }
    Ok((docs, schema))
}
