use std::collections::HashMap;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::KernelError;
use crate::scalar::Scalar;

/// Row-major dense matrix; vectors are `n × 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor<S> {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<S>,
}

impl<S: Scalar> Tensor<S> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Tensor {
            rows,
            cols,
            data: vec![S::zero(); rows * cols],
        }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<S>) -> Result<Self, KernelError> {
        if data.len() != rows * cols {
            return Err(KernelError::Shape(format!(
                "{} values for a {rows}x{cols} tensor",
                data.len()
            )));
        }
        Ok(Tensor { rows, cols, data })
    }

    pub fn filled(rows: usize, cols: usize, v: S) -> Self {
        Tensor {
            rows,
            cols,
            data: vec![v; rows * cols],
        }
    }

    /// Uniform in `(−s, s)` with `s = sqrt(6 / (fan_in + fan_out))`.
    pub fn glorot<R: Rng>(rows: usize, cols: usize, rng: &mut R) -> Self {
        let s = (6.0 / (rows + cols) as f64).sqrt();
        let data = (0..rows * cols)
            .map(|_| S::from_f64_lossy(rng.gen_range(-s..s)))
            .collect();
        Tensor { rows, cols, data }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, r: usize, c: usize) -> S {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: S) {
        self.data[r * self.cols + c] = v;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

/// Named trainable tensors.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ParamStore<S> {
    names: Vec<String>,
    tensors: Vec<Tensor<S>>,
    index: HashMap<String, ParamId>,
}

impl<S: Scalar> ParamStore<S> {
    pub fn new() -> Self {
        ParamStore {
            names: Vec::new(),
            tensors: Vec::new(),
            index: HashMap::new(),
        }
    }

    /// Registers a tensor. Names must be unique.
    pub fn add(&mut self, name: impl Into<String>, tensor: Tensor<S>) -> ParamId {
        let name = name.into();
        assert!(!self.index.contains_key(&name), "parameter {name:?} registered twice");
        let id = ParamId(self.tensors.len());
        self.index.insert(name.clone(), id);
        self.names.push(name);
        self.tensors.push(tensor);
        id
    }

    pub fn get(&self, id: ParamId) -> &Tensor<S> {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor<S> {
        &mut self.tensors[id.0]
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied()
    }

    pub fn by_name(&self, name: &str) -> Option<&Tensor<S>> {
        self.id(name).map(|id| self.get(id))
    }

    pub fn by_name_mut(&mut self, name: &str) -> Option<&mut Tensor<S>> {
        self.id(name).map(move |id| self.get_mut(id))
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.tensors.len()).map(ParamId)
    }

    pub fn num_tensors(&self) -> usize {
        self.tensors.len()
    }

    /// Total number of scalar parameters.
    pub fn num_scalars(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(|t| t.data.iter().all(|v| v.is_finite()))
    }

    pub fn zero_grads(&self) -> Gradients<S> {
        Gradients {
            tensors: self.tensors.iter().map(|t| Tensor::zeros(t.rows, t.cols)).collect(),
        }
    }

    /// Sets every scalar to zero.
    pub fn zero_all(&mut self) {
        for t in &mut self.tensors {
            t.data.iter_mut().for_each(|v| *v = S::zero());
        }
    }

    pub fn to_checkpoint(&self) -> Checkpoint {
        Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            scalar: S::NAME.into(),
            tensors: self
                .names
                .iter()
                .zip(&self.tensors)
                .map(|(name, t)| NamedArray {
                    name: name.clone(),
                    shape: [t.rows, t.cols],
                    data: t.data.iter().map(|v| v.to_f64_lossy()).collect(),
                })
                .collect(),
        }
    }

    pub fn from_checkpoint(ck: &Checkpoint) -> Result<Self, KernelError> {
        if ck.format != CHECKPOINT_FORMAT || ck.version != CHECKPOINT_VERSION {
            return Err(KernelError::Checkpoint(format!(
                "unsupported checkpoint {} v{}",
                ck.format, ck.version
            )));
        }
        let mut store = ParamStore::new();
        for a in &ck.tensors {
            let data = a.data.iter().map(|v| S::from_f64_lossy(*v)).collect();
            store.add(a.name.clone(), Tensor::from_vec(a.shape[0], a.shape[1], data)?);
        }
        Ok(store)
    }

    pub fn save(&self, path: &Path) -> Result<(), KernelError> {
        let text = serde_json::to_string(&self.to_checkpoint()).map_err(|e| KernelError::Checkpoint(e.to_string()))?;
        std::fs::write(path, text).map_err(|e| KernelError::Checkpoint(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, KernelError> {
        let text = std::fs::read_to_string(path).map_err(|e| KernelError::Checkpoint(e.to_string()))?;
        let ck: Checkpoint = serde_json::from_str(&text).map_err(|e| KernelError::Checkpoint(e.to_string()))?;
        Self::from_checkpoint(&ck)
    }
}

const CHECKPOINT_FORMAT: &str = "ppmbench-params";
const CHECKPOINT_VERSION: u32 = 1;

/// JSON parameter file. Values are stored as `f64`, which holds every `f32`
/// exactly, so `f32` stores round-trip bit for bit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub scalar: String,
    pub tensors: Vec<NamedArray>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NamedArray {
    pub name: String,
    pub shape: [usize; 2],
    pub data: Vec<f64>,
}

/// Gradient accumulator aligned with a [`ParamStore`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<S> {
    pub(crate) tensors: Vec<Tensor<S>>,
}

impl<S: Scalar> Gradients<S> {
    pub fn get(&self, id: ParamId) -> &Tensor<S> {
        &self.tensors[id.0]
    }

    pub(crate) fn slot(&mut self, id: ParamId) -> &mut [S] {
        &mut self.tensors[id.0].data
    }

    pub fn scale(&mut self, c: S) {
        for t in &mut self.tensors {
            t.data.iter_mut().for_each(|v| *v *= c);
        }
    }

    pub fn add_assign(&mut self, other: &Gradients<S>) {
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            a.data.iter_mut().zip(&b.data).for_each(|(x, y)| *x += *y);
        }
    }

    pub fn l2_norm(&self) -> S {
        self.tensors
            .iter()
            .flat_map(|t| t.data.iter())
            .map(|v| *v * *v)
            .sum::<S>()
            .sqrt()
    }

    pub fn clear(&mut self) {
        for t in &mut self.tensors {
            t.data.iter_mut().for_each(|v| *v = S::zero());
        }
    }

    pub fn flat(&self) -> impl Iterator<Item = S> + '_ {
        self.tensors.iter().flat_map(|t| t.data.iter().copied())
    }
}
