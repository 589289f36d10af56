//! Generator for small planted corpora used by tests, benches and the toy
//! training configuration.
//!
//! Entities come from a fixed pool with one- or two-token names and a
//! global knowledge graph over the pool. Each document samples a few
//! entities, mentions every one of them one to three times with its exact
//! name, and carries all knowledge-graph facts between the sampled entities.

use std::collections::BTreeMap;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, Document, EntityCluster, RelationSchema, RelationTriple, Span};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticConfig {
    pub documents: usize,
    pub relations: usize,
    pub entity_pool: usize,
    pub min_entities: usize,
    pub max_entities: usize,
    pub max_mentions: usize,
    pub max_tokens: usize,
    pub filler_words: usize,
    /// Probability that an ordered entity pair of the pool is related.
    pub fact_density: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        SyntheticConfig {
            documents: 20,
            relations: 4,
            entity_pool: 30,
            min_entities: 4,
            max_entities: 6,
            max_mentions: 3,
            max_tokens: 60,
            filler_words: 40,
            fact_density: 0.15,
            seed: 7,
        }
    }
}

impl SyntheticConfig {
    /// A variant with a denser knowledge graph and more repeated mentions,
    /// so that each entity's relation profile is distinctive.
    pub fn dense() -> Self {
        SyntheticConfig {
            min_entities: 5,
            max_entities: 6,
            fact_density: 0.4,
            ..SyntheticConfig::default()
        }
    }

    pub fn vocabulary_bound(&self) -> usize {
        self.filler_words + self.entity_pool + SUFFIXES + 1
    }

    fn validate(&self) -> Result<()> {
        let problem = if self.relations == 0 {
            Some("need at least one relation type")
        } else if self.min_entities < 2 || self.min_entities > self.max_entities {
            Some("need 2 <= min_entities <= max_entities")
        } else if self.max_entities > self.entity_pool {
            Some("max_entities exceeds the entity pool")
        } else if self.max_mentions == 0 || self.filler_words == 0 {
            Some("need at least one mention per entity and one filler word")
        } else if self.max_tokens < self.max_entities * 4 {
            Some("max_tokens too small to mention every entity")
        } else if !(0.0..=1.0).contains(&self.fact_density) {
            Some("fact_density must lie in [0, 1]")
        } else {
            None
        };
        match problem {
            Some(p) => Err(Error::Config(p.into())),
            None => Ok(()),
        }
    }
}

const SUFFIXES: usize = 5;

struct Entity {
    name: Vec<String>,
}

/// Generates a corpus according to `config`.
pub fn generate(config: &SyntheticConfig) -> Result<Corpus> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let schema = RelationSchema::new((0..config.relations).map(|r| format!("rel{r}")).collect())?;

    let entities: Vec<Entity> = (0..config.entity_pool)
        .map(|i| {
            let mut name = vec![format!("n{i}")];
            if rng.random_bool(0.5) {
                name.push(format!("s{}", rng.random_range(0..SUFFIXES)));
            }
            Entity { name }
        })
        .collect();
    let mut facts: BTreeMap<(usize, usize), usize> = BTreeMap::new();
    for h in 0..config.entity_pool {
        for t in 0..config.entity_pool {
            if h != t && rng.random_bool(config.fact_density) {
                facts.insert((h, t), rng.random_range(0..config.relations));
            }
        }
    }
    let fillers: Vec<String> = (0..config.filler_words).map(|i| format!("w{i}")).collect();
    let pool: Vec<usize> = (0..config.entity_pool).collect();

    let mut documents = Vec::with_capacity(config.documents);
    for d in 0..config.documents {
        let mut chosen = Vec::new();
        for _ in 0..20 {
            let count = rng.random_range(config.min_entities..=config.max_entities);
            chosen = pool.choose_multiple(&mut rng, count).copied().collect();
            let related = chosen
                .iter()
                .any(|&h| chosen.iter().any(|&t| facts.contains_key(&(h, t))));
            if related {
                break;
            }
        }
        documents.push(build_document(
            format!("synth-{d}"),
            &chosen,
            &entities,
            &facts,
            &fillers,
            config,
            &mut rng,
        ));
    }
    Corpus::new(schema, documents)
}

fn build_document(
    id: String,
    chosen: &[usize],
    entities: &[Entity],
    facts: &BTreeMap<(usize, usize), usize>,
    fillers: &[String],
    config: &SyntheticConfig,
    rng: &mut ChaCha8Rng,
) -> Document {
    let mut counts: Vec<usize> = chosen
        .iter()
        .map(|_| rng.random_range(1..=config.max_mentions))
        .collect();
    // Two mentions per sentence: filler NAME filler NAME "."
    let length = |counts: &[usize]| {
        let mentions: Vec<usize> = chosen
            .iter()
            .zip(counts)
            .flat_map(|(&e, &c)| std::iter::repeat_n(entities[e].name.len(), c))
            .collect();
        mentions.iter().sum::<usize>() + mentions.len() + mentions.len().div_ceil(2)
    };
    while length(&counts) > config.max_tokens {
        let (i, _) = counts
            .iter()
            .enumerate()
            .max_by_key(|&(i, &c)| (c, std::cmp::Reverse(i)))
            .expect("chosen is non-empty");
        if counts[i] == 1 {
            break;
        }
        counts[i] -= 1;
    }

    let mut order: Vec<usize> = counts
        .iter()
        .enumerate()
        .flat_map(|(slot, &c)| std::iter::repeat_n(slot, c))
        .collect();
    order.shuffle(rng);

    let mut sentences: Vec<Vec<String>> = Vec::new();
    let mut mentions: Vec<Vec<Span>> = vec![Vec::new(); chosen.len()];
    let mut offset = 0;
    for pair in order.chunks(2) {
        let mut sentence = Vec::new();
        for &slot in pair {
            sentence.push(fillers.choose(rng).expect("fillers non-empty").clone());
            let name = &entities[chosen[slot]].name;
            let start = offset + sentence.len();
            sentence.extend(name.iter().cloned());
            mentions[slot].push(Span::new(start, start + name.len() - 1));
        }
        sentence.push(".".into());
        offset += sentence.len();
        sentences.push(sentence);
    }

    let clusters = chosen
        .iter()
        .zip(mentions)
        .map(|(&e, spans)| EntityCluster::new(format!("e{e}"), spans))
        .collect();
    let mut relations = Vec::new();
    for (hi, &h) in chosen.iter().enumerate() {
        for (ti, &t) in chosen.iter().enumerate() {
            if let Some(&r) = facts.get(&(h, t)) {
                relations.push(RelationTriple::new(hi, ti, r));
            }
        }
    }
    let mut doc = Document {
        id,
        tokens: Document::tokens_from_sentences(&sentences),
        clusters,
        relations,
        tags: vec!["synthetic".into()],
    };
    doc.normalize();
    doc
}
