//! Small neural-network toolkit on top of candle: a named parameter store
//! with deterministic per-parameter initialisation, dense layers and a few
//! numerically stable reductions.

use std::collections::{BTreeMap, BTreeSet};

use candle_core::{DType, Device, Tensor, Var};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const DTYPE: DType = DType::F64;

/// Additive mask value for excluded entries. Finite so that masked rows
/// never produce `inf - inf`.
pub const MASKED: f64 = -1e9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Init {
    Zeros,
    Constant(f64),
    Uniform(f64),
    /// Glorot uniform with the given fan-in and fan-out.
    Xavier(usize, usize),
}

/// Named parameters. Each parameter draws its initial values from a PRNG
/// seeded by `(seed, name)`, so a parameter's initial value does not depend
/// on which other parameters exist.
#[derive(Debug, Clone)]
pub struct ParamStore {
    seed: u64,
    device: Device,
    vars: BTreeMap<String, Var>,
    frozen: BTreeSet<String>,
}

impl ParamStore {
    pub fn new(seed: u64) -> Self {
        ParamStore {
            seed,
            device: Device::Cpu,
            vars: BTreeMap::new(),
            frozen: BTreeSet::new(),
        }
    }

    pub fn device(&self) -> &Device {
        &self.device
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    fn rng_for(&self, name: &str) -> ChaCha8Rng {
        let mut h = Sha256::new();
        h.update(self.seed.to_le_bytes());
        h.update(name.as_bytes());
        let digest = h.finalize();
        let mut seed = [0u8; 32];
        seed.copy_from_slice(&digest);
        ChaCha8Rng::from_seed(seed)
    }

    /// Returns the parameter `name`, creating it if needed. Re-requesting an
    /// existing name with another shape is an error.
    pub fn var(&mut self, name: &str, shape: &[usize], init: Init) -> Result<Var> {
        if let Some(v) = self.vars.get(name) {
            if v.dims() != shape {
                return Err(Error::InvalidArgument(format!(
                    "parameter {name} exists with shape {:?}, requested {shape:?}",
                    v.dims()
                )));
            }
            return Ok(v.clone());
        }
        let len: usize = shape.iter().product();
        let mut rng = self.rng_for(name);
        let data: Vec<f64> = match init {
            Init::Zeros => vec![0.0; len],
            Init::Constant(c) => vec![c; len],
            Init::Uniform(a) => (0..len).map(|_| rng.random_range(-a..=a)).collect(),
            Init::Xavier(fan_in, fan_out) => {
                let a = (6.0 / (fan_in + fan_out) as f64).sqrt();
                (0..len).map(|_| rng.random_range(-a..=a)).collect()
            }
        };
        let var = Var::from_tensor(&Tensor::from_vec(data, shape, &self.device)?)?;
        self.vars.insert(name.to_string(), var.clone());
        Ok(var)
    }

    pub fn get(&self, name: &str) -> Option<&Var> {
        self.vars.get(name)
    }

    pub fn freeze(&mut self, name: &str) {
        self.frozen.insert(name.to_string());
    }

    pub fn is_frozen(&self, name: &str) -> bool {
        self.frozen.contains(name)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Var)> {
        self.vars.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn trainable(&self) -> impl Iterator<Item = (&str, &Var)> {
        self.iter().filter(|(k, _)| !self.frozen.contains(*k))
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }

    /// Flattened copies of every parameter, in name order.
    pub fn snapshot(&self) -> Result<Vec<NamedTensor>> {
        self.vars
            .iter()
            .map(|(name, v)| NamedTensor::from_tensor(name, v.as_tensor()))
            .collect()
    }

    /// Overwrites parameters from a snapshot; names and shapes must match.
    pub fn restore(&self, snapshot: &[NamedTensor]) -> Result<()> {
        if snapshot.len() != self.vars.len() {
            return Err(Error::Checkpoint(format!(
                "snapshot has {} parameters, model has {}",
                snapshot.len(),
                self.vars.len()
            )));
        }
        for t in snapshot {
            let var = self
                .vars
                .get(&t.name)
                .ok_or_else(|| Error::Checkpoint(format!("unknown parameter {}", t.name)))?;
            if var.dims() != t.shape.as_slice() {
                return Err(Error::Checkpoint(format!(
                    "parameter {} has shape {:?}, snapshot {:?}",
                    t.name,
                    var.dims(),
                    t.shape
                )));
            }
            var.set(&t.to_tensor(&self.device)?)?;
        }
        Ok(())
    }
}

/// A detached, flattened tensor with its name and shape.
#[derive(Debug, Clone, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl NamedTensor {
    pub fn from_tensor(name: &str, t: &Tensor) -> Result<Self> {
        Ok(NamedTensor {
            name: name.to_string(),
            shape: t.dims().to_vec(),
            data: t.flatten_all()?.to_vec1::<f64>()?,
        })
    }

    pub fn to_tensor(&self, device: &Device) -> Result<Tensor> {
        Ok(Tensor::from_vec(
            self.data.clone(),
            self.shape.as_slice(),
            device,
        )?)
    }
}

/// `y = x W + b` with `W: in × out`.
#[derive(Debug, Clone)]
pub struct Linear {
    pub weight: Var,
    pub bias: Var,
}

impl Linear {
    pub fn new(store: &mut ParamStore, prefix: &str, input: usize, output: usize) -> Result<Self> {
        Ok(Linear {
            weight: store.var(
                &format!("{prefix}.weight"),
                &[input, output],
                Init::Xavier(input, output),
            )?,
            bias: store.var(&format!("{prefix}.bias"), &[output], Init::Zeros)?,
        })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        Ok(x.matmul(self.weight.as_tensor())?
            .broadcast_add(self.bias.as_tensor())?)
    }
}

/// Two-layer ReLU feed-forward network.
#[derive(Debug, Clone)]
pub struct FeedForward {
    pub hidden: Linear,
    pub output: Linear,
}

impl FeedForward {
    pub fn new(
        store: &mut ParamStore,
        prefix: &str,
        input: usize,
        hidden: usize,
        output: usize,
    ) -> Result<Self> {
        Ok(FeedForward {
            hidden: Linear::new(store, &format!("{prefix}.hidden"), input, hidden)?,
            output: Linear::new(store, &format!("{prefix}.output"), hidden, output)?,
        })
    }

    pub fn forward(&self, x: &Tensor) -> Result<Tensor> {
        self.output.forward(&self.hidden.forward(x)?.relu()?)
    }
}

/// `log Σ exp(x)` along `dim`, keeping the reduced dimension.
pub fn logsumexp_keepdim(x: &Tensor, dim: usize) -> Result<Tensor> {
    let max = x.max_keepdim(dim)?.detach();
    Ok(x.broadcast_sub(&max)?
        .exp()?
        .sum_keepdim(dim)?
        .log()?
        .broadcast_add(&max)?)
}

pub fn logsumexp(x: &Tensor, dim: usize) -> Result<Tensor> {
    Ok(logsumexp_keepdim(x, dim)?.squeeze(dim)?)
}

pub fn log_softmax(x: &Tensor, dim: usize) -> Result<Tensor> {
    Ok(x.broadcast_sub(&logsumexp_keepdim(x, dim)?)?)
}

pub fn softmax_last(x: &Tensor) -> Result<Tensor> {
    Ok(log_softmax(x, x.rank() - 1)?.exp()?)
}

/// Additive mask: 0 where `keep`, [`MASKED`] elsewhere.
pub fn additive_mask(keep: &[bool], shape: &[usize], device: &Device) -> Result<Tensor> {
    let data: Vec<f64> = keep.iter().map(|&k| if k { 0.0 } else { MASKED }).collect();
    Ok(Tensor::from_vec(data, shape, device)?)
}

/// Summed binary cross-entropy of `sigmoid(logits)` against 0/1 targets,
/// computed as `max(z, 0) - z y + log(1 + exp(-|z|))`.
pub fn bce_with_logits_sum(logits: &Tensor, targets: &Tensor) -> Result<Tensor> {
    let softplus = logits.abs()?.neg()?.exp()?.affine(1.0, 1.0)?.log()?;
    let loss = ((logits.relu()? - (logits * targets)?)? + softplus)?;
    Ok(loss.sum_all()?)
}

pub fn scalar(value: f64, device: &Device) -> Result<Tensor> {
    Ok(Tensor::new(value, device)?)
}

pub fn index_tensor(indices: &[usize], device: &Device) -> Result<Tensor> {
    let idx: Vec<u32> = indices.iter().map(|&i| i as u32).collect();
    Ok(Tensor::from_vec(idx, indices.len(), device)?)
}

/// Row-major dense matrix of plain values, used on the decoding side.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(rows * cols, data.len(), "matrix data length");
        Matrix { rows, cols, data }
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64) -> Self {
        let data = (0..rows * cols).map(|k| f(k / cols, k % cols)).collect();
        Matrix { rows, cols, data }
    }

    pub fn from_tensor(t: &Tensor) -> Result<Self> {
        let (rows, cols) = t.dims2()?;
        Ok(Matrix::new(rows, cols, t.flatten_all()?.to_vec1::<f64>()?))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }
}

/// Value of a rank-0 or single-element tensor.
pub fn to_scalar(t: &Tensor) -> Result<f64> {
    Ok(t.flatten_all()?.to_vec1::<f64>()?[0])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_depends_only_on_seed_and_name() {
        let mut a = ParamStore::new(3);
        let mut b = ParamStore::new(3);
        let _ = b.var("other", &[4], Init::Uniform(1.0)).unwrap();
        let va = a.var("w", &[2, 3], Init::Xavier(2, 3)).unwrap();
        let vb = b.var("w", &[2, 3], Init::Xavier(2, 3)).unwrap();
        assert_eq!(
            va.flatten_all().unwrap().to_vec1::<f64>().unwrap(),
            vb.flatten_all().unwrap().to_vec1::<f64>().unwrap()
        );
        assert!(a.var("w", &[3, 2], Init::Zeros).is_err());
    }

    #[test]
    fn logsumexp_is_stable() {
        let dev = Device::Cpu;
        let x = Tensor::new(&[[1000.0f64, 1000.0], [MASKED, 0.0]], &dev).unwrap();
        let v = logsumexp(&x, 1).unwrap().to_vec1::<f64>().unwrap();
        assert!((v[0] - (1000.0 + 2f64.ln())).abs() < 1e-9);
        assert!(v[1].abs() < 1e-12);
    }

    #[test]
    fn bce_matches_direct_formula() {
        let dev = Device::Cpu;
        let z = Tensor::new(&[0.3f64, -2.0, 5.0], &dev).unwrap();
        let y = Tensor::new(&[1.0f64, 0.0, 0.0], &dev).unwrap();
        let got = to_scalar(&bce_with_logits_sum(&z, &y).unwrap()).unwrap();
        let sig = |v: f64| 1.0 / (1.0 + (-v).exp());
        let want = -(sig(0.3).ln()) - (1.0 - sig(-2.0)).ln() - (1.0 - sig(5.0)).ln();
        assert!((got - want).abs() < 1e-12);
    }

    #[test]
    fn snapshot_restore_round_trip() {
        let mut s = ParamStore::new(1);
        let v = s.var("a", &[3], Init::Uniform(1.0)).unwrap();
        let snap = s.snapshot().unwrap();
        v.set(&Tensor::zeros(3, DTYPE, &Device::Cpu).unwrap()).unwrap();
        s.restore(&snap).unwrap();
        assert_eq!(s.snapshot().unwrap(), snap);
    }
}
