use std::collections::HashMap;

use candle_core::{Device, Tensor, Var};
use serde::{Deserialize, Serialize};

use super::Encoder;
use crate::corpus::Document;
use crate::error::Result;
use crate::nn::{index_tensor, Init, Linear, ParamStore, DTYPE};

/// Token vocabulary; id 0 is reserved for unknown tokens.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    words: Vec<String>,
    index: HashMap<String, usize>,
}

impl Vocabulary {
    pub fn build<'a>(docs: impl IntoIterator<Item = &'a Document>) -> Self {
        let mut words: Vec<String> = docs
            .into_iter()
            .flat_map(|d| d.tokens.iter().map(|t| t.text.clone()))
            .collect();
        words.sort();
        words.dedup();
        Vocabulary::from(words)
    }

    /// Size including the unknown slot.
    pub fn len(&self) -> usize {
        self.words.len() + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn id(&self, word: &str) -> usize {
        self.index.get(word).map_or(0, |i| i + 1)
    }
}

impl From<Vec<String>> for Vocabulary {
    fn from(words: Vec<String>) -> Self {
        let index = words.iter().enumerate().map(|(i, w)| (w.clone(), i)).collect();
        Vocabulary { words, index }
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(v: Vocabulary) -> Self {
        v.words
    }
}

/// Shallow contextual encoder for tests and desk-scale runs: token
/// embeddings plus one tanh layer over a ±1 token window, with a residual
/// connection.
#[derive(Debug, Clone)]
pub struct ToyEncoder {
    vocab: Vocabulary,
    dim: usize,
    max_input_length: usize,
    embedding: Var,
    context: Linear,
    device: Device,
}

impl ToyEncoder {
    pub fn new(
        store: &mut ParamStore,
        prefix: &str,
        vocab: Vocabulary,
        dim: usize,
        max_input_length: usize,
    ) -> Result<Self> {
        let embedding = store.var(
            &format!("{prefix}.embedding"),
            &[vocab.len(), dim],
            Init::Uniform(0.5),
        )?;
        let context = Linear::new(store, &format!("{prefix}.context"), 3 * dim, dim)?;
        Ok(ToyEncoder {
            vocab,
            dim,
            max_input_length,
            embedding,
            context,
            device: store.device().clone(),
        })
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocab
    }
}

impl Encoder for ToyEncoder {
    fn dim(&self) -> usize {
        self.dim
    }

    fn max_input_length(&self) -> usize {
        self.max_input_length
    }

    fn encode(&self, doc: &Document) -> Result<Tensor> {
        let len = doc.len().min(self.max_input_length);
        if len == 0 {
            return Ok(Tensor::zeros((0, self.dim), DTYPE, &self.device)?);
        }
        let ids: Vec<usize> = doc.tokens[..len].iter().map(|t| self.vocab.id(&t.text)).collect();
        let e = self
            .embedding
            .as_tensor()
            .index_select(&index_tensor(&ids, &self.device)?, 0)?;
        let pad = Tensor::zeros((1, self.dim), DTYPE, &self.device)?;
        let (left, right) = if len == 1 {
            (pad.clone(), pad)
        } else {
            (
                Tensor::cat(&[&pad, &e.narrow(0, 0, len - 1)?], 0)?,
                Tensor::cat(&[&e.narrow(0, 1, len - 1)?, &pad], 0)?,
            )
        };
        let window = Tensor::cat(&[&left, &e, &right], 1)?;
        Ok((self.context.forward(&window)?.tanh()? + e)?)
    }
}
