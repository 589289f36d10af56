use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::Document;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct CorpusStatistics {
    pub documents: usize,
    pub avg_tokens: f64,
    pub avg_entities: f64,
    /// Percentage in `[0, 100]`, averaged per document.
    pub pct_singletons: f64,
}

/// Per-document averages of token count, cluster count and singleton share.
/// Documents without clusters are left out of the singleton average.
pub fn corpus_statistics<'a, I>(docs: I) -> Result<CorpusStatistics>
where
    I: IntoIterator<Item = &'a Document>,
{
    let mut n = 0usize;
    let mut tokens = 0usize;
    let mut entities = 0usize;
    let mut singleton_sum = 0.0;
    let mut with_clusters = 0usize;
    for doc in docs {
        n += 1;
        tokens += doc.len();
        entities += doc.clusters.len();
        if !doc.clusters.is_empty() {
            let singles = doc.clusters.iter().filter(|c| c.is_singleton()).count();
            singleton_sum += singles as f64 / doc.clusters.len() as f64;
            with_clusters += 1;
        }
    }
    if n == 0 {
        return Err(Error::InvalidArgument(
            "corpus statistics need at least one document".into(),
        ));
    }
    Ok(CorpusStatistics {
        documents: n,
        avg_tokens: tokens as f64 / n as f64,
        avg_entities: entities as f64 / n as f64,
        pct_singletons: if with_clusters == 0 {
            0.0
        } else {
            100.0 * singleton_sum / with_clusters as f64
        },
    })
}

/// Seeded random holdout. The dev side gets `round(fraction * n)` documents,
/// clamped to `[1, n - 1]` when `n >= 2`. Both sides keep input order.
pub fn holdout_split(docs: &[Document], fraction: f64, seed: u64) -> Result<(Vec<Document>, Vec<Document>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "holdout fraction must be in (0, 1), got {fraction}"
        )));
    }
    let n = docs.len();
    let dev_size = holdout_size(n, fraction);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut is_dev = vec![false; n];
    for &i in &order[..dev_size] {
        is_dev[i] = true;
    }
    let (mut train, mut dev) = (Vec::new(), Vec::new());
    for (doc, dev_flag) in docs.iter().zip(is_dev) {
        if dev_flag {
            dev.push(doc.clone());
        } else {
            train.push(doc.clone());
        }
    }
    Ok((train, dev))
}

pub(crate) fn holdout_size(n: usize, fraction: f64) -> usize {
    if n < 2 {
        return 0;
    }
    ((fraction * n as f64).round() as usize).clamp(1, n - 1)
}
