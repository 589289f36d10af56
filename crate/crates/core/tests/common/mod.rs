//! Plain-loop reference implementations and helpers shared by the
//! integration tests and the acceptance suite.
#![allow(dead_code)]

pub mod checks;

use std::path::PathBuf;

use candle_core::{Device, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use jointie_core::coref::CorefScorer;
use jointie_core::harness::SettingConfig;
use jointie_core::interaction::{compatibility_distance, contrastive_loss, PropagationLayer};
use jointie_core::nn::{FeedForward, ParamStore};
use jointie_core::relation::RelationScorer;

pub type Mat = Vec<Vec<f64>>;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-scale..scale)).collect()
}

pub fn random_mat(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Mat {
    (0..rows).map(|_| random_vec(rng, cols, scale)).collect()
}

pub fn tensor2(m: &Mat) -> Tensor {
    let rows = m.len();
    let cols = m.first().map_or(0, Vec::len);
    Tensor::from_vec(m.concat(), (rows, cols), &Device::Cpu).unwrap()
}

pub fn tensor3(t: &[Mat]) -> Tensor {
    let a = t.len();
    let b = t[0].len();
    let c = t[0].first().map_or(0, Vec::len);
    let flat: Vec<f64> = t.iter().flat_map(|m| m.concat()).collect();
    Tensor::from_vec(flat, (a, b, c), &Device::Cpu).unwrap()
}

pub fn tensor1(v: &[f64]) -> Tensor {
    Tensor::from_vec(v.to_vec(), v.len(), &Device::Cpu).unwrap()
}

pub fn mat_of(t: &Tensor) -> Mat {
    t.to_vec2::<f64>().unwrap()
}

pub fn cube_of(t: &Tensor) -> Vec<Mat> {
    t.to_vec3::<f64>().unwrap()
}

/// Overwrites a parameter with uniform noise.
pub fn randomize(var: &Var, rng: &mut ChaCha8Rng, scale: f64) {
    let n = var.elem_count();
    let t = Tensor::from_vec(random_vec(rng, n, scale), var.dims(), &Device::Cpu).unwrap();
    var.set(&t).unwrap();
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

pub fn flat2(m: &Mat) -> Vec<f64> {
    m.concat()
}

pub fn flat3(t: &[Mat]) -> Vec<f64> {
    t.iter().flat_map(|m| m.concat()).collect()
}

// ---------------------------------------------------------------------------
// Naive oracles

fn vec_mat(x: &[f64], w: &Mat) -> Vec<f64> {
    let cols = w[0].len();
    (0..cols)
        .map(|j| x.iter().enumerate().map(|(i, xi)| xi * w[i][j]).sum())
        .collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `s^c(x, y) = g_x W g_y + s^m(x) + s^m(y)`.
pub fn oracle_coref(w: &Mat, g: &Mat, sm: &[f64]) -> Mat {
    let n = g.len();
    let mut out = vec![vec![0.0; n]; n];
    for x in 0..n {
        let gw = vec_mat(&g[x], w);
        for y in 0..n {
            out[x][y] = dot(&gw, &g[y]) + sm[x] + sm[y];
        }
    }
    out
}

pub struct FfnParams {
    pub w1: Mat,
    pub b1: Vec<f64>,
    pub w2: Mat,
    pub b2: Vec<f64>,
}

impl FfnParams {
    pub fn read(f: &FeedForward) -> Self {
        FfnParams {
            w1: mat_of(f.hidden.weight.as_tensor()),
            b1: f.hidden.bias.as_tensor().to_vec1().unwrap(),
            w2: mat_of(f.output.weight.as_tensor()),
            b2: f.output.bias.as_tensor().to_vec1().unwrap(),
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let h: Vec<f64> = vec_mat(x, &self.w1)
            .iter()
            .zip(&self.b1)
            .map(|(v, b)| (v + b).max(0.0))
            .collect();
        vec_mat(&h, &self.w2)
            .iter()
            .zip(&self.b2)
            .map(|(v, b)| v + b)
            .collect()
    }
}

/// `s^{r_i}(h, t) = g_h W_i g_t + s^{h_i}(g_h) + s^{t_i}(g_t)` for all types.
pub fn oracle_relation(w: &[Mat], head: &FfnParams, tail: &FfnParams, g: &Mat) -> Vec<Mat> {
    let n = g.len();
    let head_scores: Vec<Vec<f64>> = g.iter().map(|x| head.apply(x)).collect();
    let tail_scores: Vec<Vec<f64>> = g.iter().map(|x| tail.apply(x)).collect();
    w.iter()
        .enumerate()
        .map(|(i, wi)| {
            let mut m = vec![vec![0.0; n]; n];
            for h in 0..n {
                let gw = vec_mat(&g[h], wi);
                for t in 0..n {
                    m[h][t] = dot(&gw, &g[t]) + head_scores[h][i] + tail_scores[t][i];
                }
            }
            m
        })
        .collect()
}

/// `ĝ_v = g_v + (1/|R|) Σ_i tanh(Σ_{k≠v} α^i_{vk} g_k W_i)` with
/// `α^i_{v·} = softmax_{k≠v} ReLU(s^i(v, k))`.
pub fn oracle_propagate(g: &Mat, scores: &[Mat], w: &[Mat]) -> Mat {
    let n = g.len();
    let d = g[0].len();
    if n < 2 {
        return g.clone();
    }
    let r = w.len();
    let mut out = g.clone();
    for v in 0..n {
        for i in 0..r {
            let logits: Vec<(usize, f64)> = (0..n)
                .filter(|&k| k != v)
                .map(|k| (k, scores[i][v][k].max(0.0)))
                .collect();
            let max = logits.iter().map(|p| p.1).fold(f64::NEG_INFINITY, f64::max);
            let z: f64 = logits.iter().map(|p| (p.1 - max).exp()).sum();
            let mut pooled = vec![0.0; d];
            for &(k, l) in &logits {
                let a = (l - max).exp() / z;
                let gw = vec_mat(&g[k], &w[i]);
                for j in 0..d {
                    pooled[j] += a * gw[j];
                }
            }
            for j in 0..d {
                out[v][j] += pooled[j].tanh() / r as f64;
            }
        }
    }
    out
}

/// `ŝ^c(x, y) = Σ_i β_i Σ_{k ∈ N∖{x, y}} |s^i(x, k) − s^i(y, k)|`.
pub fn oracle_compatibility(real: &[Mat], neighbors: &[usize], beta: &[f64]) -> Mat {
    let n = real.first().map_or(0, Vec::len);
    let mut out = vec![vec![0.0; n]; n];
    for x in 0..n {
        for y in 0..n {
            let mut total = 0.0;
            for (i, s) in real.iter().enumerate() {
                let mut d = 0.0;
                for &k in neighbors {
                    if k != x && k != y {
                        d += (s[x][k] - s[y][k]).abs();
                    }
                }
                total += beta[i] * d;
            }
            out[x][y] = total;
        }
    }
    out
}

/// Mean of `Y D² + (1 − Y) max(0, m − D)²` with `D` clamped at zero.
pub fn oracle_contrastive(distance: &Mat, pairs: &[(usize, usize, bool)], margin: f64) -> f64 {
    if pairs.is_empty() {
        return 0.0;
    }
    let total: f64 = pairs
        .iter()
        .map(|&(x, y, same)| {
            let d = distance[x][y].max(0.0);
            if same {
                d * d
            } else {
                (margin - d).max(0.0).powi(2)
            }
        })
        .sum();
    total / pairs.len() as f64
}

// ---------------------------------------------------------------------------
// Random instances

pub struct CorefInstance {
    pub scorer: CorefScorer,
    pub g: Mat,
    pub sm: Vec<f64>,
}

pub fn coref_instance(seed: u64) -> CorefInstance {
    let mut r = rng(seed);
    let n = r.random_range(1..=7);
    let d = r.random_range(1..=6);
    let mut store = ParamStore::new(seed);
    let scorer = CorefScorer::new(&mut store, "coref", d).unwrap();
    randomize(&scorer.weight, &mut r, 1.0);
    CorefInstance {
        scorer,
        g: random_mat(&mut r, n, d, 1.0),
        sm: random_vec(&mut r, n, 2.0),
    }
}

pub struct RelationInstance {
    pub scorer: RelationScorer,
    pub g: Mat,
}

pub fn relation_instance(seed: u64) -> RelationInstance {
    let mut r = rng(seed);
    let n = r.random_range(1..=6);
    let d = r.random_range(1..=5);
    let hidden = r.random_range(1..=4);
    let types = r.random_range(1..=4);
    let mut store = ParamStore::new(seed);
    let scorer = RelationScorer::new(&mut store, "relation", d, hidden, types).unwrap();
    for (_, v) in store.iter() {
        randomize(v, &mut r, 1.0);
    }
    RelationInstance {
        scorer,
        g: random_mat(&mut r, n, d, 1.0),
    }
}

pub struct PropagationInstance {
    pub layer: PropagationLayer,
    pub g: Mat,
    /// `T × n × n` with `T = |R| + 1`.
    pub scores: Vec<Mat>,
}

pub fn propagation_instance(seed: u64, n: Option<usize>) -> PropagationInstance {
    let mut r = rng(seed);
    let n = n.unwrap_or_else(|| r.random_range(1..=6));
    let d = r.random_range(1..=5);
    let types = r.random_range(1..=3);
    let mut store = ParamStore::new(seed);
    let layer = PropagationLayer::new(&mut store, "propagation", d, types, false).unwrap();
    randomize(&layer.weight, &mut r, 1.0);
    PropagationInstance {
        layer,
        g: random_mat(&mut r, n, d, 1.0),
        scores: (0..=types).map(|_| random_mat(&mut r, n, n, 2.0)).collect(),
    }
}

pub struct CompatibilityInstance {
    pub real: Vec<Mat>,
    pub neighbors: Vec<usize>,
    pub beta: Vec<f64>,
}

pub fn compatibility_instance(seed: u64, n: Option<usize>) -> CompatibilityInstance {
    let mut r = rng(seed);
    let n = n.unwrap_or_else(|| r.random_range(1..=7));
    let types = r.random_range(1..=4);
    let mut neighbors: Vec<usize> = (0..n).filter(|_| r.random_bool(0.7)).collect();
    if neighbors.is_empty() {
        neighbors.push(r.random_range(0..n));
    }
    CompatibilityInstance {
        real: (0..types).map(|_| random_mat(&mut r, n, n, 2.0)).collect(),
        neighbors,
        beta: (0..types).map(|_| r.random_range(0.0..1.0)).collect(),
    }
}

impl CompatibilityInstance {
    pub fn distance(&self) -> Tensor {
        compatibility_distance(&tensor3(&self.real), &self.neighbors, &tensor1(&self.beta))
            .unwrap()
            .distance
    }
}

pub fn random_pairs(rng: &mut ChaCha8Rng, n: usize) -> Vec<(usize, usize, bool)> {
    let mut pairs = Vec::new();
    for x in 0..n {
        for y in x + 1..n {
            if rng.random_bool(0.8) {
                pairs.push((x, y, rng.random_bool(0.4)));
            }
        }
    }
    pairs
}

pub fn contrastive_value(distance: &Tensor, pairs: &[(usize, usize, bool)], margin: f64) -> f64 {
    contrastive_loss(distance, pairs, margin)
        .unwrap()
        .to_scalar::<f64>()
        .unwrap()
}

// ---------------------------------------------------------------------------
// Finite differences

/// Largest violation of `|a − n| ≤ rtol · max(|a|, |n|) + atol` between the
/// autodiff gradient of `f` and central differences, over every element of
/// every input. Returns `(worst excess ratio, elements checked)`; a ratio
/// at most 1 passes.
pub fn gradient_check(
    inputs: &[Tensor],
    f: &dyn Fn(&[Tensor]) -> Tensor,
    rtol: f64,
    atol: f64,
) -> (f64, usize) {
    let vars: Vec<Var> = inputs.iter().map(|t| Var::from_tensor(t).unwrap()).collect();
    let as_tensors: Vec<Tensor> = vars.iter().map(|v| v.as_tensor().clone()).collect();
    let grads = f(&as_tensors).backward().unwrap();
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    let mut checked = 0;
    for (idx, var) in vars.iter().enumerate() {
        let analytic: Vec<f64> = match grads.get(var.as_tensor()) {
            Some(g) => g.flatten_all().unwrap().to_vec1().unwrap(),
            None => vec![0.0; var.elem_count()],
        };
        let base: Vec<f64> = inputs[idx].flatten_all().unwrap().to_vec1().unwrap();
        for e in 0..base.len() {
            let eval = |delta: f64| {
                let mut data = base.clone();
                data[e] += delta;
                let mut args = inputs.to_vec();
                args[idx] = Tensor::from_vec(data, inputs[idx].dims(), &Device::Cpu).unwrap();
                f(&args).to_scalar::<f64>().unwrap()
            };
            let numeric = (eval(h) - eval(-h)) / (2.0 * h);
            let a = analytic[e];
            let allowed = rtol * a.abs().max(numeric.abs()) + atol;
            worst = worst.max((a - numeric).abs() / allowed);
            checked += 1;
        }
    }
    (worst, checked)
}

// ---------------------------------------------------------------------------
// Configuration

pub fn workspace_root() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

/// The desk-scale configuration shipped in `configs/toy.toml`.
pub fn toy_config() -> SettingConfig {
    SettingConfig::load(workspace_root().join("configs/toy.toml")).unwrap()
}

// ---------------------------------------------------------------------------
// Oracle sweeps: each returns the largest deviation over `count` instances.

pub fn coref_oracle_sweep(count: u64) -> f64 {
    (0..count)
        .map(|seed| {
            let inst = coref_instance(1000 + seed);
            let w = mat_of(inst.scorer.weight.as_tensor());
            let got = inst
                .scorer
                .score_matrix(&tensor2(&inst.g), &tensor1(&inst.sm))
                .unwrap();
            let want = oracle_coref(&w, &inst.g, &inst.sm);
            let mut err = max_abs_diff(&flat2(&mat_of(&got)), &flat2(&want));
            let (x, y) = (0, inst.g.len() - 1);
            let single = inst
                .scorer
                .pair_score(&inst.g[x], &inst.g[y], inst.sm[x], inst.sm[y])
                .unwrap();
            err = err.max((single - want[x][y]).abs());
            err
        })
        .fold(0.0, f64::max)
}

pub fn relation_oracle_sweep(count: u64) -> f64 {
    (0..count)
        .map(|seed| {
            let inst = relation_instance(2000 + seed);
            let s = &inst.scorer;
            let w = cube_of(s.weight.as_tensor());
            let head = FfnParams::read(&s.head_prior);
            let tail = FfnParams::read(&s.tail_prior);
            let got = s.score_tensor(&tensor2(&inst.g)).unwrap();
            let want = oracle_relation(&w, &head, &tail, &inst.g);
            let mut err = max_abs_diff(&flat3(&cube_of(&got)), &flat3(&want));
            let last = inst.g.len() - 1;
            let th = s.threshold_index();
            let single = s.pair_score(&inst.g[0], &inst.g[last], th).unwrap();
            err = err.max((single - want[th][0][last]).abs());
            err
        })
        .fold(0.0, f64::max)
}

pub fn propagation_oracle_sweep(count: u64) -> f64 {
    (0..count)
        .map(|seed| {
            let inst = propagation_instance(3000 + seed, None);
            let w = cube_of(inst.layer.weight.as_tensor());
            let got = inst
                .layer
                .propagate(&tensor2(&inst.g), &tensor3(&inst.scores))
                .unwrap();
            let want = oracle_propagate(&inst.g, &inst.scores, &w);
            max_abs_diff(&flat2(&mat_of(&got)), &flat2(&want))
        })
        .fold(0.0, f64::max)
}

pub fn compatibility_oracle_sweep(count: u64) -> f64 {
    (0..count)
        .map(|seed| {
            let inst = compatibility_instance(4000 + seed, None);
            let got = inst.distance();
            let want = oracle_compatibility(&inst.real, &inst.neighbors, &inst.beta);
            max_abs_diff(&flat2(&mat_of(&got)), &flat2(&want))
        })
        .fold(0.0, f64::max)
}

pub fn contrastive_oracle_sweep(count: u64) -> f64 {
    (0..count)
        .map(|seed| {
            let mut r = rng(5000 + seed);
            let n = r.random_range(1..=7);
            let distance = random_mat(&mut r, n, n, 3.0);
            let pairs = random_pairs(&mut r, n);
            let margin = r.random_range(0.5..3.0);
            let got = contrastive_value(&tensor2(&distance), &pairs, margin);
            (got - oracle_contrastive(&distance, &pairs, margin)).abs()
        })
        .fold(0.0, f64::max)
}

/// Like [`gradient_check`] for a parameter that `f` reads directly.
pub fn var_gradient_check(var: &Var, f: &dyn Fn() -> Tensor, rtol: f64, atol: f64) -> (f64, usize) {
    let grads = f().backward().unwrap();
    let analytic: Vec<f64> = match grads.get(var.as_tensor()) {
        Some(g) => g.flatten_all().unwrap().to_vec1().unwrap(),
        None => vec![0.0; var.elem_count()],
    };
    let original = var.as_tensor().copy().unwrap();
    let base: Vec<f64> = original.flatten_all().unwrap().to_vec1().unwrap();
    let h = 1e-6;
    let mut worst: f64 = 0.0;
    for e in 0..base.len() {
        let eval = |delta: f64| {
            let mut data = base.clone();
            data[e] += delta;
            var.set(&Tensor::from_vec(data, var.dims(), &Device::Cpu).unwrap())
                .unwrap();
            f().to_scalar::<f64>().unwrap()
        };
        let numeric = (eval(h) - eval(-h)) / (2.0 * h);
        let a = analytic[e];
        worst = worst.max((a - numeric).abs() / (rtol * a.abs().max(numeric.abs()) + atol));
    }
    var.set(&original).unwrap();
    (worst, base.len())
}

// ---------------------------------------------------------------------------
// Gradient sweeps on 5-candidate instances. Each returns the worst excess
// ratio (at most 1 passes) and the number of checked elements.

pub const GRAD_RTOL: f64 = 1e-4;
pub const GRAD_ATOL: f64 = 1e-7;
const N: usize = 5;

fn merge(a: (f64, usize), b: (f64, usize)) -> (f64, usize) {
    (a.0.max(b.0), a.1 + b.1)
}

pub fn coref_gradient_sweep(instances: u64) -> (f64, usize) {
    use jointie_core::coref::coref_loss;
    let mut acc = (0.0, 0);
    for seed in 0..instances {
        let mut r = rng(6000 + seed);
        let d = 4;
        let mut store = ParamStore::new(seed);
        let scorer = CorefScorer::new(&mut store, "coref", d).unwrap();
        randomize(&scorer.weight, &mut r, 0.5);
        let gold: Vec<Option<usize>> = (0..N)
            .map(|_| r.random_bool(0.8).then(|| r.random_range(0..2)))
            .collect();
        let g = tensor2(&random_mat(&mut r, N, d, 1.0));
        let sm = tensor1(&random_vec(&mut r, N, 1.0));
        let scores = tensor2(&random_mat(&mut r, N, N, 2.0));
        let direct = |a: &[Tensor]| coref_loss(&a[0], &a[1], &gold).unwrap().total(1.0).unwrap();
        acc = merge(
            acc,
            gradient_check(&[scores, sm.clone()], &direct, GRAD_RTOL, GRAD_ATOL),
        );
        let through = |a: &[Tensor]| {
            let s = scorer.score_matrix(&a[0], &a[1]).unwrap();
            coref_loss(&s, &a[1], &gold).unwrap().total(1.0).unwrap()
        };
        acc = merge(
            acc,
            gradient_check(&[g.clone(), sm.clone()], &through, GRAD_RTOL, GRAD_ATOL),
        );
        let weight = || {
            let s = scorer.score_matrix(&g, &sm).unwrap();
            coref_loss(&s, &sm, &gold).unwrap().total(1.0).unwrap()
        };
        acc = merge(
            acc,
            var_gradient_check(&scorer.weight, &weight, GRAD_RTOL, GRAD_ATOL),
        );
    }
    acc
}

pub fn relation_gradient_sweep(instances: u64) -> (f64, usize) {
    use jointie_core::relation::{relation_loss, PairLabels};
    let mut acc = (0.0, 0);
    for seed in 0..instances {
        let mut r = rng(7000 + seed);
        let (d, types) = (3, 3);
        let mut store = ParamStore::new(seed);
        let scorer = RelationScorer::new(&mut store, "relation", d, 4, types).unwrap();
        for (_, v) in store.iter() {
            randomize(v, &mut r, 0.5);
        }
        let mut labels = PairLabels::empty(N, types);
        for h in 0..N {
            for t in 0..N {
                for rel in 0..types {
                    if r.random_bool(0.2) {
                        labels.set(h, t, rel);
                    }
                }
            }
        }
        let scores = tensor3(
            &(0..=types)
                .map(|_| random_mat(&mut r, N, N, 2.0))
                .collect::<Vec<_>>(),
        );
        let direct = |a: &[Tensor]| relation_loss(&a[0], &labels).unwrap();
        acc = merge(acc, gradient_check(&[scores], &direct, GRAD_RTOL, GRAD_ATOL));
        let g = tensor2(&random_mat(&mut r, N, d, 1.0));
        let through = |a: &[Tensor]| relation_loss(&scorer.score_tensor(&a[0]).unwrap(), &labels).unwrap();
        acc = merge(
            acc,
            gradient_check(std::slice::from_ref(&g), &through, GRAD_RTOL, GRAD_ATOL),
        );
        let weight = || relation_loss(&scorer.score_tensor(&g).unwrap(), &labels).unwrap();
        acc = merge(
            acc,
            var_gradient_check(&scorer.weight, &weight, GRAD_RTOL, GRAD_ATOL),
        );
    }
    acc
}

pub fn contrastive_gradient_sweep(instances: u64) -> (f64, usize) {
    let mut acc = (0.0, 0);
    for seed in 0..instances {
        let inst = compatibility_instance(8000 + seed, Some(N));
        let mut r = rng(8500 + seed);
        let pairs = random_pairs(&mut r, N);
        let distance = oracle_compatibility(&inst.real, &inst.neighbors, &inst.beta);
        let max_d = distance.iter().flatten().fold(0.0f64, |a, &b| a.max(b));
        // A margin between the distances keeps both hinge branches active.
        let margin = 0.5 * max_d + 0.1;
        let neighbors = inst.neighbors.clone();
        let f = |a: &[Tensor]| {
            let d = compatibility_distance(&a[0], &neighbors, &a[1]).unwrap().distance;
            contrastive_loss(&d, &pairs, margin).unwrap()
        };
        let inputs = [tensor3(&inst.real), tensor1(&inst.beta)];
        acc = merge(acc, gradient_check(&inputs, &f, GRAD_RTOL, GRAD_ATOL));
    }
    acc
}

pub fn propagation_gradient_sweep(instances: u64) -> (f64, usize) {
    let mut acc = (0.0, 0);
    for seed in 0..instances {
        let inst = propagation_instance(9000 + seed, Some(N));
        let mut r = rng(9500 + seed);
        let d = inst.g[0].len();
        let probe = tensor2(&random_mat(&mut r, N, d, 1.0));
        let layer = &inst.layer;
        let f = |a: &[Tensor]| {
            (layer.propagate(&a[0], &a[1]).unwrap() * &probe)
                .unwrap()
                .sum_all()
                .unwrap()
        };
        let g = tensor2(&inst.g);
        let scores = tensor3(&inst.scores);
        acc = merge(
            acc,
            gradient_check(&[g.clone(), scores.clone()], &f, GRAD_RTOL, GRAD_ATOL),
        );
        let weight = || {
            (layer.propagate(&g, &scores).unwrap() * &probe)
                .unwrap()
                .sum_all()
                .unwrap()
        };
        acc = merge(
            acc,
            var_gradient_check(&layer.weight, &weight, GRAD_RTOL, GRAD_ATOL),
        );
    }
    acc
}
