use std::collections::hash_map::DefaultHasher;
use std::hash::{Hash, Hasher};

use candle_core::Tensor;
use serde::{Deserialize, Serialize};

use super::config::{Setting, SettingConfig};
use super::predict::{DocumentPrediction, PredictedTriple};
use crate::coref::{coref_loss, decode_clusters, CorefScorer};
use crate::corpus::{Document, RelationSchema, Span};
use crate::encoding::{
    align_to_gold, generate_candidates, span_embeddings, Encoder, MentionScorer, ToyEncoder, Vocabulary,
};
use crate::error::{Error, Result};
use crate::interaction::{
    contrastive_loss, contrastive_pairs, interpolate_coref, prune_neighbors, random_neighbors,
    CompatibilityHead, PropagationLayer, PruningStrategy,
};
use crate::nn::{scalar, to_scalar, Matrix, ParamStore};
use crate::relation::{
    aggregate_entity_scores, decode_relations, pool_entities, relation_loss, score_matrices, transfer_labels,
    EntityScoreTable, PairLabels, RelationScorer, ScoredTriple,
};

/// Weighted loss terms of one forward pass. `total` is their sum.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub antecedent: f64,
    pub mention: f64,
    pub relation: f64,
    pub contrastive: f64,
    pub total: f64,
}

impl LossBreakdown {
    pub fn component_sum(&self) -> f64 {
        self.antecedent + self.mention + self.relation + self.contrastive
    }

    pub fn accumulate(&mut self, other: &LossBreakdown) {
        self.antecedent += other.antecedent;
        self.mention += other.mention;
        self.relation += other.relation;
        self.contrastive += other.contrastive;
        self.total += other.total;
    }

    pub fn is_finite(&self) -> bool {
        [
            self.antecedent,
            self.mention,
            self.relation,
            self.contrastive,
            self.total,
        ]
        .iter()
        .all(|x| x.is_finite())
    }
}

/// Scores over the pruned mention candidates of one document.
#[derive(Debug, Clone)]
pub struct CandidateScores {
    pub spans: Vec<Span>,
    /// `n`.
    pub mention_scores: Tensor,
    /// `n × n` coreference scores used for loss and decoding (`s̃^c` under
    /// graph compatibility).
    pub coref_scores: Tensor,
    /// `T × n × n`, mention-level settings only.
    pub relation_scores: Option<Tensor>,
    /// `n × n` compatibility distances, `gc` only.
    pub distance: Option<Tensor>,
}

#[derive(Debug, Clone)]
pub struct Forward {
    /// Token vectors of the coreference encoder.
    pub token_vectors: Tensor,
    /// `None` when no candidate survives.
    pub candidates: Option<CandidateScores>,
}

#[derive(Debug, Clone)]
struct Prefixes {
    coref_encoder: &'static str,
    relation_encoder: &'static str,
    mention: &'static str,
    coref: &'static str,
    relation: &'static str,
}

impl Prefixes {
    fn for_setting(setting: Setting) -> Self {
        if setting == Setting::Pipeline {
            Prefixes {
                coref_encoder: "coref_model.encoder",
                relation_encoder: "relation_model.encoder",
                mention: "coref_model.mention",
                coref: "coref_model.coref",
                relation: "relation_model.relation",
            }
        } else {
            Prefixes {
                coref_encoder: "encoder",
                relation_encoder: "encoder",
                mention: "mention",
                coref: "coref",
                relation: "relation",
            }
        }
    }
}

const PROPAGATION: &str = "propagation";
const COMPATIBILITY: &str = "compatibility";

/// A model for one of the five settings.
#[derive(Debug, Clone)]
pub struct JointModel {
    config: SettingConfig,
    schema: RelationSchema,
    store: ParamStore,
    prefixes: Prefixes,
    coref_encoder: ToyEncoder,
    relation_encoder: Option<ToyEncoder>,
    mention: MentionScorer,
    coref: CorefScorer,
    relation: RelationScorer,
    propagation: Option<PropagationLayer>,
    compatibility: Option<CompatibilityHead>,
}

/// Builds the model for `config.setting`. Parameters are initialised from
/// `seed` and their names, so components shared between settings start
/// from identical values.
pub fn build_model(
    config: &SettingConfig,
    schema: &RelationSchema,
    vocab: &Vocabulary,
    seed: u64,
) -> Result<JointModel> {
    config.validate()?;
    let setting = config.setting;
    let prefixes = Prefixes::for_setting(setting);
    let mut store = ParamStore::new(seed);
    let dim = config.encoder.dim;
    let span_dim = 2 * dim;
    let hidden = config.model.ffn_hidden;
    let max_len = config.encoder.max_input_length;
    let num_relations = schema.len();

    let coref_encoder = ToyEncoder::new(&mut store, prefixes.coref_encoder, vocab.clone(), dim, max_len)?;
    let relation_encoder = if setting == Setting::Pipeline {
        Some(ToyEncoder::new(
            &mut store,
            prefixes.relation_encoder,
            vocab.clone(),
            dim,
            max_len,
        )?)
    } else {
        None
    };
    let mention = MentionScorer::new(&mut store, prefixes.mention, span_dim, hidden)?;
    let coref = CorefScorer::new(&mut store, prefixes.coref, span_dim)?;
    let relation = RelationScorer::new(&mut store, prefixes.relation, span_dim, hidden, num_relations)?;
    let propagation = match (setting, &config.gp) {
        (Setting::Gp, gp) => Some(PropagationLayer::new(
            &mut store,
            PROPAGATION,
            span_dim,
            num_relations,
            gp.as_ref().is_some_and(|g| g.zero_init),
        )?),
        _ => None,
    };
    let compatibility = match (setting, &config.gc) {
        (Setting::Gc, Some(gc)) => {
            let head = CompatibilityHead::new(
                &mut store,
                COMPATIBILITY,
                num_relations,
                gc.beta_init,
                gc.lambda,
                gc.margin,
                gc.prune_k,
            )?;
            if gc.freeze_beta {
                store.freeze(&format!("{COMPATIBILITY}.beta"));
            }
            Some(head)
        }
        (Setting::Gc, None) => return Err(Error::Config("setting gc needs a [gc] section".into())),
        _ => None,
    };
    Ok(JointModel {
        config: config.clone(),
        schema: schema.clone(),
        store,
        prefixes,
        coref_encoder,
        relation_encoder,
        mention,
        coref,
        relation,
        propagation,
        compatibility,
    })
}

impl JointModel {
    pub fn config(&self) -> &SettingConfig {
        &self.config
    }

    pub fn setting(&self) -> Setting {
        self.config.setting
    }

    pub fn schema(&self) -> &RelationSchema {
        &self.schema
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        self.coref_encoder.vocabulary()
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn compatibility(&self) -> Option<&CompatibilityHead> {
        self.compatibility.as_ref()
    }

    pub fn propagation(&self) -> Option<&PropagationLayer> {
        self.propagation.as_ref()
    }

    fn names_with_prefixes(&self, prefixes: &[&str]) -> Vec<String> {
        self.store
            .iter()
            .map(|(name, _)| name)
            .filter(|name| {
                prefixes
                    .iter()
                    .any(|p| name.strip_prefix(p).is_some_and(|rest| rest.starts_with('.')))
            })
            .map(str::to_string)
            .collect()
    }

    /// Parameters that the coreference decisions depend on.
    pub fn coref_parameters(&self) -> Vec<String> {
        let p = &self.prefixes;
        let mut prefixes = vec![p.coref_encoder, p.mention, p.coref];
        if self.setting().mention_level() {
            prefixes.push(p.relation);
        }
        prefixes.extend([PROPAGATION, COMPATIBILITY]);
        self.names_with_prefixes(&prefixes)
    }

    /// Parameters that the relation scores depend on.
    pub fn relation_parameters(&self) -> Vec<String> {
        let p = &self.prefixes;
        self.names_with_prefixes(&[p.relation_encoder, p.relation])
    }

    fn relation_tokens(&self, doc: &Document, coref_tokens: &Tensor) -> Result<Tensor> {
        match &self.relation_encoder {
            Some(enc) => enc.encode(doc),
            None => Ok(coref_tokens.clone()),
        }
    }

    /// Encodes `doc`, generates candidates and computes every score the
    /// setting uses.
    pub fn forward(&self, doc: &Document, training: bool) -> Result<Forward> {
        let token_vectors = self.coref_encoder.encode(doc)?;
        let Some(cands) = generate_candidates(
            doc,
            &token_vectors,
            &self.mention,
            &self.config.candidates,
            training,
        )?
        else {
            return Ok(Forward {
                token_vectors,
                candidates: None,
            });
        };
        let relation_scores = if self.setting().mention_level() {
            Some(self.relation.score_tensor(&cands.embeddings)?)
        } else {
            None
        };
        let g = match (&self.propagation, &relation_scores) {
            (Some(layer), Some(scores)) => layer.propagate(&cands.embeddings, scores)?,
            _ => cands.embeddings.clone(),
        };
        let mut coref_scores = self.coref.score_matrix(&g, &cands.mention_scores)?;
        let mut distance = None;
        if let (Some(head), Some(scores)) = (&self.compatibility, &relation_scores) {
            let real = scores.narrow(0, 0, self.schema.len())?;
            let neighbors = self.neighbors(doc, &real)?;
            let comp = head.distances(&real, &neighbors)?;
            coref_scores = interpolate_coref(&coref_scores, &comp.distance, head.lambda)?;
            distance = Some(comp.distance);
        }
        Ok(Forward {
            token_vectors,
            candidates: Some(CandidateScores {
                spans: cands.spans,
                mention_scores: cands.mention_scores,
                coref_scores,
                relation_scores,
                distance,
            }),
        })
    }

    fn neighbors(&self, doc: &Document, real_scores: &Tensor) -> Result<Vec<usize>> {
        let gc = self.config.gc.as_ref().expect("gc model has a gc section");
        Ok(match gc.pruning {
            PruningStrategy::Saliency => prune_neighbors(&score_matrices(&real_scores.detach())?, gc.prune_k),
            PruningStrategy::Random => {
                let mut h = DefaultHasher::new();
                doc.id.hash(&mut h);
                random_neighbors(real_scores.dim(1)?, gc.prune_k, h.finish())
            }
        })
    }

    /// Weighted multi-task loss for one training document.
    pub fn loss(&self, doc: &Document) -> Result<(Tensor, LossBreakdown)> {
        let w = &self.config.loss;
        let dev = self.store.device();
        let forward = self.forward(doc, true)?;
        let mut terms: [Option<Tensor>; 4] = [None, None, None, None];
        if let Some(c) = &forward.candidates {
            let gold = align_to_gold(&c.spans, doc);
            let coref = coref_loss(&c.coref_scores, &c.mention_scores, &gold)?;
            terms[0] = Some(coref.antecedent.affine(w.coref, 0.0)?);
            terms[1] = Some(coref.mention.affine(w.mention, 0.0)?);
            if let Some(scores) = &c.relation_scores {
                let labels = transfer_labels(doc, &gold, self.schema.len());
                terms[2] = Some(relation_loss(scores, &labels)?.affine(w.relation, 0.0)?);
            }
            if let (Some(d), Some(head)) = (&c.distance, &self.compatibility) {
                let pairs = contrastive_pairs(&gold);
                terms[3] = Some(contrastive_loss(d, &pairs, head.margin)?.affine(w.contrastive, 0.0)?);
            }
        }
        if !self.setting().mention_level() {
            if let Some(loss) = self.entity_relation_loss(doc, &forward.token_vectors)? {
                terms[2] = Some(loss.affine(w.relation, 0.0)?);
            }
        }
        let mut total = scalar(0.0, dev)?;
        let mut values = [0.0; 4];
        for (value, term) in values.iter_mut().zip(&terms) {
            if let Some(t) = term {
                *value = to_scalar(t)?;
                total = (total + t)?;
            }
        }
        let breakdown = LossBreakdown {
            antecedent: values[0],
            mention: values[1],
            relation: values[2],
            contrastive: values[3],
            total: to_scalar(&total)?,
        };
        Ok((total, breakdown))
    }

    /// Entity-level relation loss over the gold clusters.
    fn entity_relation_loss(&self, doc: &Document, coref_tokens: &Tensor) -> Result<Option<Tensor>> {
        let tokens = self.relation_tokens(doc, coref_tokens)?;
        let limit = tokens.dim(0)?;
        let mut remap = vec![None; doc.clusters.len()];
        let mut clusters = Vec::new();
        for (i, c) in doc.clusters.iter().enumerate() {
            let spans: Vec<Span> = c.mentions.iter().copied().filter(|s| s.end < limit).collect();
            if !spans.is_empty() {
                remap[i] = Some(clusters.len());
                clusters.push(spans);
            }
        }
        if clusters.len() < 2 {
            return Ok(None);
        }
        let mut labels = PairLabels::empty(clusters.len(), self.schema.len());
        for r in &doc.relations {
            if let (Some(h), Some(t)) = (remap[r.head], remap[r.tail]) {
                labels.set(h, t, r.relation);
            }
        }
        let scores = self.entity_score_tensor(&tokens, &clusters)?;
        Ok(Some(relation_loss(&scores, &labels)?))
    }

    fn entity_score_tensor(&self, tokens: &Tensor, clusters: &[Vec<Span>]) -> Result<Tensor> {
        let spans: Vec<Span> = clusters.iter().flatten().copied().collect();
        let mut groups = Vec::with_capacity(clusters.len());
        let mut next = 0;
        for c in clusters {
            groups.push((next..next + c.len()).collect::<Vec<_>>());
            next += c.len();
        }
        let g = span_embeddings(tokens, &spans)?;
        let entities = pool_entities(&g, &groups)?;
        self.relation.score_tensor(&entities)
    }

    /// Runs the entity-level relation stage on the given clusters, exactly
    /// as passed in. Spans past the encoder's input limit are ignored.
    pub fn relation_stage(&self, doc: &Document, clusters: &[Vec<Span>]) -> Result<Vec<ScoredTriple>> {
        let tokens = match &self.relation_encoder {
            Some(enc) => enc.encode(doc)?,
            None => self.coref_encoder.encode(doc)?,
        };
        self.entity_level_triples(&tokens, clusters)
    }

    fn entity_level_triples(&self, tokens: &Tensor, clusters: &[Vec<Span>]) -> Result<Vec<ScoredTriple>> {
        let limit = tokens.dim(0)?;
        let kept: Vec<usize> = (0..clusters.len())
            .filter(|&i| clusters[i].iter().any(|s| s.end < limit))
            .collect();
        if kept.len() < 2 {
            return Ok(Vec::new());
        }
        let trimmed: Vec<Vec<Span>> = kept
            .iter()
            .map(|&i| clusters[i].iter().copied().filter(|s| s.end < limit).collect())
            .collect();
        let scores = self.entity_score_tensor(tokens, &trimmed)?;
        let table = EntityScoreTable {
            scores: score_matrices(&scores)?,
        };
        Ok(decode_relations(&table)
            .into_iter()
            .map(|t| ScoredTriple {
                head: kept[t.head],
                tail: kept[t.tail],
                ..t
            })
            .collect())
    }

    /// Predicted clusters and triples for one document.
    pub fn predict_document(&self, doc: &Document) -> Result<DocumentPrediction> {
        let forward = self.forward(doc, false)?;
        let Some(c) = forward.candidates else {
            return Ok(DocumentPrediction::empty(&doc.id));
        };
        let scores = Matrix::from_tensor(&c.coref_scores)?;
        let mention_scores = c.mention_scores.to_vec1::<f64>()?;
        let groups = decode_clusters(&scores, &mention_scores);
        let clusters: Vec<Vec<Span>> = groups
            .iter()
            .map(|g| g.iter().map(|&i| c.spans[i]).collect())
            .collect();
        let mut triples = match &c.relation_scores {
            Some(relation_scores) => decode_relations(&aggregate_entity_scores(
                &score_matrices(relation_scores)?,
                &groups,
            )),
            None => {
                let tokens = self.relation_tokens(doc, &forward.token_vectors)?;
                self.entity_level_triples(&tokens, &clusters)?
            }
        };
        triples.sort_by_key(|t| (t.head, t.tail, t.relation));
        let triples = triples
            .into_iter()
            .map(|t| PredictedTriple {
                head_cluster_idx: t.head,
                tail_cluster_idx: t.tail,
                relation_name: self.schema.name(t.relation).unwrap_or_default().to_string(),
                score: t.score,
            })
            .collect();
        Ok(DocumentPrediction {
            doc_id: doc.id.clone(),
            clusters,
            triples,
        })
    }
}
