//! End-to-end checks shared by the integration tests and the acceptance
//! runner. Each returns `Ok(detail)` or `Err(reason)`.

use std::collections::BTreeSet;
use std::time::{Duration, Instant};

use jointie_core::corpus::{Document, EntityCluster, RelationTriple, Span, Token};
use jointie_core::encoding::{align_to_gold, Vocabulary};
use jointie_core::harness::{build_model, evaluate, train, train_model, Setting, SettingConfig};
use jointie_core::interaction::contrastive_pairs;
use jointie_core::metrics::{
    b_cubed, ceaf_phi4, coref_avg_f1, map_entity_ids, muc, relation_f1, EntityRef, Prf,
};
use jointie_core::nn::Matrix;
use jointie_core::relation::{aggregate_entity_scores, decode_relations, transfer_labels};
use jointie_core::synthetic::{generate, SyntheticConfig};
use jointie_core::Corpus;

use super::toy_config;

pub type Check = Result<String, String>;

fn tensors_equal(a: &candle_core::Tensor, b: &candle_core::Tensor) -> bool {
    let a: Vec<f64> = a.flatten_all().unwrap().to_vec1().unwrap();
    let b: Vec<f64> = b.flatten_all().unwrap().to_vec1().unwrap();
    a.len() == b.len() && a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits())
}

fn default_corpus() -> Corpus {
    generate(&SyntheticConfig::default()).unwrap()
}

/// `gc` with `λ = 0` and `β` frozen at zero behaves exactly like `joint_m`,
/// before and after a few epochs of identical training.
pub fn gc_reduces_to_joint_m(epochs: usize) -> Check {
    let corpus = default_corpus();
    let vocab = Vocabulary::build(&corpus.documents);
    let mut base = toy_config();
    base.optim.epochs = epochs;
    let joint = base.clone().with_setting(Setting::JointM);
    let mut gc = base.with_setting(Setting::Gc);
    {
        let section = gc.gc.as_mut().unwrap();
        section.lambda = 0.0;
        section.beta_init = Some(0.0);
        section.freeze_beta = true;
    }
    let seed = 5;
    let a = build_model(&joint, &corpus.schema, &vocab, seed).map_err(|e| e.to_string())?;
    let b = build_model(&gc, &corpus.schema, &vocab, seed).map_err(|e| e.to_string())?;
    for doc in &corpus.documents {
        let fa = a.forward(doc, false).unwrap().candidates.unwrap();
        let fb = b.forward(doc, false).unwrap().candidates.unwrap();
        if fa.spans != fb.spans || !tensors_equal(&fa.coref_scores, &fb.coref_scores) {
            return Err(format!("untrained coref scores differ on {}", doc.id));
        }
    }
    let a = train_model(a, &corpus.documents, &[], seed).map_err(|e| e.to_string())?;
    let b = train_model(b, &corpus.documents, &[], seed).map_err(|e| e.to_string())?;
    for doc in &corpus.documents {
        let pa = a.model.predict_document(doc).unwrap();
        let pb = b.model.predict_document(doc).unwrap();
        if pa != pb {
            return Err(format!("predictions differ on {} after {epochs} epochs", doc.id));
        }
    }
    for (name, shape) in a.state.params.iter().map(|p| (&p.name, &p.data)) {
        let other = b.state.params.iter().find(|p| &p.name == name);
        match other {
            Some(p) if p.data.iter().zip(shape).all(|(x, y)| x.to_bits() == y.to_bits()) => {}
            _ => return Err(format!("parameter {name} differs after training")),
        }
    }
    Ok(format!(
        "{} documents identical before and after {epochs} epochs",
        corpus.documents.len()
    ))
}

/// `gp` with a zero-initialised propagation weight reproduces `joint_m`'s
/// coreference and relation scores exactly.
pub fn gp_zero_init_matches_joint_m() -> Check {
    let corpus = default_corpus();
    let vocab = Vocabulary::build(&corpus.documents);
    let joint = toy_config().with_setting(Setting::JointM);
    let mut gp = toy_config().with_setting(Setting::Gp);
    gp.gp.as_mut().unwrap().zero_init = true;
    let a = build_model(&joint, &corpus.schema, &vocab, 3).map_err(|e| e.to_string())?;
    let b = build_model(&gp, &corpus.schema, &vocab, 3).map_err(|e| e.to_string())?;
    for doc in &corpus.documents {
        let fa = a.forward(doc, true).unwrap().candidates.unwrap();
        let fb = b.forward(doc, true).unwrap().candidates.unwrap();
        if !tensors_equal(&fa.coref_scores, &fb.coref_scores) {
            return Err(format!("coref scores differ on {}", doc.id));
        }
        if !tensors_equal(
            fa.relation_scores.as_ref().unwrap(),
            fb.relation_scores.as_ref().unwrap(),
        ) {
            return Err(format!("relation scores differ on {}", doc.id));
        }
    }
    Ok(format!("{} documents identical", corpus.documents.len()))
}

/// Mention-level oracle scores (1 for labelled pairs, 0 otherwise, 0.5 for
/// the threshold) over gold mentions plus noise spans, aggregated over the
/// gold clusters, decode back to exactly the gold triples.
pub fn label_round_trip(documents: usize) -> Check {
    let corpus = generate(&SyntheticConfig {
        documents,
        ..SyntheticConfig::dense()
    })
    .unwrap();
    let r = corpus.schema.len();
    let mut triples = 0;
    for doc in &corpus.documents {
        let gold: BTreeSet<Span> = doc.gold_spans().into_iter().collect();
        let mut spans: Vec<Span> = gold.iter().copied().collect();
        spans.extend(
            (0..doc.len())
                .map(|i| Span::new(i, i))
                .filter(|s| !gold.contains(s))
                .step_by(3),
        );
        spans.sort();
        let alignment = align_to_gold(&spans, doc);
        let labels = transfer_labels(doc, &alignment, r);
        let n = spans.len();
        let mut scores: Vec<Matrix> = (0..r)
            .map(|rel| Matrix::from_fn(n, n, |h, t| if labels.has(h, t, rel) { 1.0 } else { 0.0 }))
            .collect();
        scores.push(Matrix::from_fn(n, n, |_, _| 0.5));
        let clusters: Vec<Vec<usize>> = doc
            .clusters
            .iter()
            .map(|c| (0..n).filter(|&i| c.mentions.contains(&spans[i])).collect())
            .collect();
        let decoded: BTreeSet<(usize, usize, usize)> =
            decode_relations(&aggregate_entity_scores(&scores, &clusters))
                .into_iter()
                .map(|t| (t.head, t.tail, t.relation))
                .collect();
        let expected: BTreeSet<(usize, usize, usize)> =
            doc.relations.iter().map(RelationTriple::key).collect();
        if decoded != expected {
            return Err(format!("{}: decoded {decoded:?}, gold {expected:?}", doc.id));
        }
        triples += expected.len();
    }
    Ok(format!("{documents} documents, {triples} triples recovered"))
}

// ---------------------------------------------------------------------------
// Hand-computed coreference metric fixtures.

fn close(name: &str, got: f64, want: f64) -> Result<(), String> {
    if (got - want).abs() <= 1e-9 {
        Ok(())
    } else {
        Err(format!("{name}: got {got}, expected {want}"))
    }
}

fn check_prf(name: &str, got: Prf, precision: f64, recall: f64, f1: f64) -> Result<(), String> {
    close(&format!("{name} P"), got.precision, precision)?;
    close(&format!("{name} R"), got.recall, recall)?;
    close(&format!("{name} F"), got.f1, f1)
}

type Clusters = Vec<Vec<char>>;

fn clusters(spec: &str) -> Clusters {
    spec.split_whitespace().map(|c| c.chars().collect()).collect()
}

/// `(P, R, F)` for MUC, B³ and CEAFφ4, in that order.
type Expected = [(f64, f64, f64); 3];

fn coref_fixture(pred: &str, gold: &str, expected: Expected) -> Result<(), String> {
    let (p, g) = (clusters(pred), clusters(gold));
    let got = [muc(&p, &g), b_cubed(&p, &g), ceaf_phi4(&p, &g)];
    for ((name, prf), (ep, er, ef)) in ["MUC", "B3", "CEAF"].iter().zip(got).zip(expected) {
        check_prf(name, prf, ep, er, ef)?;
    }
    let mean = (got[0].f1 + got[1].f1 + got[2].f1) / 3.0;
    close("average", coref_avg_f1(&p, &g), mean)
}

pub fn coref_metric_fixtures() -> Vec<(&'static str, Result<(), String>)> {
    let one = (1.0, 1.0, 1.0);
    let zero = (0.0, 0.0, 0.0);
    vec![
        (
            "identical clusters",
            coref_fixture("ab cde f", "ab cde f", [one; 3]),
        ),
        (
            "all singletons on both sides",
            coref_fixture("a b c", "a b c", [zero, one, one]),
        ),
        (
            "one predicted cluster over gold singletons",
            coref_fixture("abcd", "a b c d", [zero, (0.25, 1.0, 0.4), (0.4, 0.1, 0.16)]),
        ),
        (
            "predicted singletons over one gold cluster",
            coref_fixture("a b c d", "abcd", [zero, (1.0, 0.25, 0.4), (0.1, 0.4, 0.16)]),
        ),
        (
            "one cluster on both sides",
            coref_fixture("abcd", "abcd", [one; 3]),
        ),
        (
            "mixed partition",
            coref_fixture(
                "ab cd fghi",
                "abc defg",
                [
                    (0.4, 0.4, 0.4),
                    (0.5, 5.0 / 12.0, 5.0 / 11.0),
                    (13.0 / 30.0, 0.65, 0.52),
                ],
            ),
        ),
        ("disjoint mentions", coref_fixture("xy z", "ab c", [zero; 3])),
        ("empty prediction", coref_fixture("", "ab c", [zero; 3])),
        (
            "split gold cluster",
            coref_fixture(
                "ab cd",
                "abcd",
                [
                    (1.0, 2.0 / 3.0, 0.8),
                    (1.0, 0.5, 2.0 / 3.0),
                    (1.0 / 3.0, 2.0 / 3.0, 4.0 / 9.0),
                ],
            ),
        ),
        (
            "merged gold clusters",
            coref_fixture(
                "abcd",
                "ab cd",
                [
                    (2.0 / 3.0, 1.0, 0.8),
                    (0.5, 1.0, 2.0 / 3.0),
                    (2.0 / 3.0, 1.0 / 3.0, 4.0 / 9.0),
                ],
            ),
        ),
        (
            "spurious predicted singleton",
            coref_fixture("ab x", "ab", [one, (2.0 / 3.0, 1.0, 0.8), (0.5, 1.0, 2.0 / 3.0)]),
        ),
    ]
}

// ---------------------------------------------------------------------------
// Entity mapping and relation scoring fixtures.

fn fixture_document() -> Document {
    let words = ["a", "b", "c", "d", "e", "f", "g", "h"];
    let tokens: Vec<Token> = Document::tokens_from_sentences(&[words.to_vec()]);
    Document {
        id: "fixture".into(),
        tokens,
        clusters: vec![
            EntityCluster::new("A", vec![Span::new(0, 0), Span::new(4, 4)]),
            EntityCluster::new("B", vec![Span::new(1, 1)]),
            EntityCluster::new("C", vec![Span::new(2, 3)]),
        ],
        relations: vec![
            RelationTriple::new(0, 1, 0),
            RelationTriple::new(1, 2, 0),
            RelationTriple::new(0, 2, 1),
        ],
        tags: vec![],
    }
}

fn spans(list: &[(usize, usize)]) -> Vec<Span> {
    list.iter().map(|&(s, e)| Span::new(s, e)).collect()
}

pub fn mapping_fixtures() -> Vec<(&'static str, Result<(), String>)> {
    let doc = fixture_document();
    let gold = doc.gold_span_clusters();
    let mut out = Vec::new();

    let pred = vec![spans(&[(4, 4), (0, 0)]), spans(&[(1, 1)]), spans(&[(2, 3)])];
    let ids = map_entity_ids(&pred, &gold);
    out.push((
        "exact span-set match takes the gold id regardless of order",
        (ids == vec![EntityRef::Gold(0), EntityRef::Gold(1), EntityRef::Gold(2)])
            .then_some(())
            .ok_or(format!("{ids:?}")),
    ));

    let pred = vec![spans(&[(0, 0)]), spans(&[(1, 1), (4, 4)]), spans(&[(2, 2)])];
    let ids = map_entity_ids(&pred, &gold);
    out.push((
        "partial, mixed and boundary-mismatched clusters take dummy ids",
        (ids == vec![EntityRef::Dummy(0), EntityRef::Dummy(1), EntityRef::Dummy(2)])
            .then_some(())
            .ok_or(format!("{ids:?}")),
    ));

    let pred = vec![spans(&[(0, 0), (4, 4)]), spans(&[(1, 1)]), spans(&[(2, 3)])];
    let ids = map_entity_ids(&pred, &gold);
    let triples = [(0, 1, 0), (0, 2, 0)];
    let s = relation_f1([(&doc, &ids[..], &triples[..])], None).relation;
    out.push((
        "one of two predictions correct, three gold",
        check_prf("RE", s, 0.5, 1.0 / 3.0, 0.4),
    ));

    let pred = vec![spans(&[(0, 0)]), spans(&[(1, 1)]), spans(&[(2, 3)])];
    let ids = map_entity_ids(&pred, &gold);
    let triples = [(0, 1, 0), (1, 2, 0)];
    let s = relation_f1([(&doc, &ids[..], &triples[..])], None).relation;
    out.push((
        "a triple on a dummy entity is never correct",
        check_prf("RE", s, 0.5, 1.0 / 3.0, 0.4),
    ));

    let triples = [(1, 2, 0), (1, 2, 0)];
    let s = relation_f1([(&doc, &ids[..], &triples[..])], None).relation;
    out.push((
        "duplicate predictions count once",
        check_prf("RE", s, 1.0, 1.0 / 3.0, 0.5),
    ));

    let s = relation_f1([(&doc, &ids[..], &[][..])], None).relation;
    out.push(("no predictions score zero", check_prf("RE", s, 0.0, 0.0, 0.0)));
    out
}

// ---------------------------------------------------------------------------
// Training checks.

/// Trains `setting` on the default synthetic corpus with the toy
/// configuration, selecting on the training documents themselves.
pub fn toy_overfit(setting: Setting) -> Result<(f64, Duration), String> {
    let corpus = default_corpus();
    let config = toy_config().with_setting(setting);
    let start = Instant::now();
    let out =
        train(&config, &corpus.schema, &corpus.documents, &corpus.documents, 1).map_err(|e| e.to_string())?;
    let f1 = evaluate(&out.model, &corpus.documents, None)
        .map_err(|e| e.to_string())?
        .relation
        .f1;
    Ok((f1, start.elapsed()))
}

/// Mean compatibility distance over same-cluster and different-cluster
/// gold-aligned candidate pairs.
fn distance_means(model: &jointie_core::harness::JointModel, docs: &[Document]) -> (f64, f64) {
    let (mut same, mut n_same, mut diff, mut n_diff) = (0.0, 0usize, 0.0, 0usize);
    for doc in docs {
        let c = model.forward(doc, true).unwrap().candidates.unwrap();
        let gold = align_to_gold(&c.spans, doc);
        let d = c.distance.unwrap().to_vec2::<f64>().unwrap();
        for (x, y, y_same) in contrastive_pairs(&gold) {
            if y_same {
                same += d[x][y];
                n_same += 1;
            } else {
                diff += d[x][y];
                n_diff += 1;
            }
        }
    }
    (same / n_same.max(1) as f64, diff / n_diff.max(1) as f64)
}

pub struct GcProbe {
    pub margin: f64,
    pub untrained: (f64, f64),
    pub trained: (f64, f64),
}

impl GcProbe {
    pub fn gap(&self) -> f64 {
        self.trained.1 - self.trained.0
    }
}

/// Trains `gc` on the dense synthetic corpus and measures how far apart the
/// compatibility distances of coreferent and non-coreferent pairs end up.
pub fn gc_probe() -> GcProbe {
    let corpus = generate(&SyntheticConfig::dense()).unwrap();
    let mut config: SettingConfig = toy_config().with_setting(Setting::Gc);
    config.optim.epochs = 40;
    config.eval.every = 40;
    config.eval.stop_at_dev_f1 = None;
    let margin = config.gc.as_ref().unwrap().margin;
    let vocab = Vocabulary::build(&corpus.documents);
    let model = build_model(&config, &corpus.schema, &vocab, 1).unwrap();
    let untrained = distance_means(&model, &corpus.documents);
    let out = train_model(model, &corpus.documents, &corpus.documents, 1).unwrap();
    GcProbe {
        margin,
        untrained,
        trained: distance_means(&out.model, &corpus.documents),
    }
}
