use std::collections::HashSet;
use std::path::Path;
use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::markov::MarkovConfig;
use super::{vocab_hash, ModelError, Prediction, Predictor, TrainReport};
use crate::encoding::{
    encode_prefix_events, ngram_hash_encode, ColumnKind, EventEncoding, FeatureLayout, FeatureMatrix, NormMethod,
    Normalizer, PrefixEncoder, Window,
};
use crate::eventlog::{Event, EventLog, Vocabulary};
use crate::nnkernel::{
    forward_sequence, softmax, Activation, Cell, CellKind, CellState, Dense, Graph, NodeId, NodeState, ParamId,
    ParamStore, Sgd, SgdConfig, Tensor,
};
use crate::scalar::Scalar;
use crate::splitting::make_prefix_samples;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    F32,
    F64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MlpInput {
    /// Flattened left-padded prefix of the training `t_max` rows.
    #[default]
    PrefixesPadded,
    /// The last event only.
    SingleEvent,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Architecture {
    Markov(MarkovConfig),
    Mlp {
        #[serde(default = "default_mlp_hidden")]
        hidden: Vec<usize>,
        #[serde(default)]
        input: MlpInput,
    },
    Recurrent {
        cell: CellKind,
        #[serde(default = "default_hidden")]
        hidden: usize,
        #[serde(default = "default_layers")]
        layers: usize,
        /// Width of the learned embedding used for index-encoded activities.
        #[serde(default = "default_embedding")]
        embedding_dim: usize,
    },
    Autoencoder {
        #[serde(default = "default_ae_hidden")]
        hidden: Vec<usize>,
        #[serde(default = "default_ngram")]
        ngram: usize,
        #[serde(default = "default_hash_dim")]
        dim: usize,
        #[serde(default = "default_pretrain")]
        pretrain_epochs: usize,
        #[serde(default = "default_freeze")]
        freeze_epochs: usize,
        #[serde(default)]
        hash_seed: u64,
    },
}

fn default_mlp_hidden() -> Vec<usize> {
    vec![64]
}
fn default_hidden() -> usize {
    64
}
fn default_layers() -> usize {
    2
}
fn default_embedding() -> usize {
    8
}
fn default_ae_hidden() -> Vec<usize> {
    vec![32, 16]
}
fn default_ngram() -> usize {
    2
}
fn default_hash_dim() -> usize {
    64
}
fn default_pretrain() -> usize {
    20
}
fn default_freeze() -> usize {
    5
}
fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub patience: usize,
    pub seed: u64,
    #[serde(flatten)]
    pub sgd: SgdConfig,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 100,
            batch_size: 32,
            patience: 10,
            seed: 0,
            sgd: SgdConfig::default(),
        }
    }
}

/// Full description of a model: architecture plus training and encoding
/// settings. In config files the architecture is selected by `kind`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    #[serde(flatten)]
    pub arch: Architecture,
    #[serde(flatten)]
    pub training: TrainConfig,
    #[serde(default)]
    pub encoding: EventEncoding,
    /// Train a direct remaining-time head.
    #[serde(default = "yes")]
    pub remaining_head: bool,
    #[serde(default)]
    pub precision: Precision,
}

impl ModelSpec {
    pub fn new(arch: Architecture) -> Self {
        ModelSpec {
            arch,
            training: TrainConfig::default(),
            encoding: EventEncoding::default(),
            remaining_head: true,
            precision: Precision::F32,
        }
    }

    pub fn kind_name(&self) -> &'static str {
        match &self.arch {
            Architecture::Markov(_) => "markov",
            Architecture::Mlp { .. } => "mlp",
            Architecture::Recurrent { cell, .. } => cell.as_str(),
            Architecture::Autoencoder { .. } => "autoencoder",
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let t = &self.training;
        if t.batch_size == 0 {
            return Err(ModelError::Config("batch_size must be >= 1".into()));
        }
        if !(t.sgd.lr > 0.0) || !(t.sgd.momentum >= 0.0 && t.sgd.momentum < 1.0) {
            return Err(ModelError::Config("need lr > 0 and 0 <= momentum < 1".into()));
        }
        match &self.arch {
            Architecture::Markov(_) => Ok(()),
            Architecture::Mlp { hidden, .. } => {
                if hidden.is_empty() || hidden.contains(&0) {
                    return Err(ModelError::Config(
                        "mlp needs at least one non-empty hidden layer".into(),
                    ));
                }
                Ok(())
            }
            Architecture::Recurrent {
                hidden,
                layers,
                embedding_dim,
                ..
            } => {
                if *hidden == 0 || *layers == 0 || *embedding_dim == 0 {
                    return Err(ModelError::Config("recurrent sizes must be >= 1".into()));
                }
                Ok(())
            }
            Architecture::Autoencoder { hidden, ngram, dim, .. } => {
                if hidden.is_empty() || *ngram == 0 || *dim == 0 {
                    return Err(ModelError::Config(
                        "autoencoder needs hidden layers, ngram >= 1, dim >= 1".into(),
                    ));
                }
                let mut input = *dim;
                for (layer, h) in hidden.iter().enumerate() {
                    if *h == 0 || *h >= input {
                        return Err(ModelError::Undercomplete {
                            layer,
                            hidden: *h,
                            input,
                        });
                    }
                    input = *h;
                }
                Ok(())
            }
        }
    }
}

/// Encoded model input.
#[derive(Debug, Clone)]
enum Input {
    Rows(FeatureMatrix),
    Vector(Vec<f64>),
}

#[derive(Debug, Clone)]
struct Sample {
    input: Input,
    class: usize,
    delta: f64,
    remaining: f64,
}

#[derive(Debug, Clone, PartialEq)]
enum Body {
    Mlp(Vec<Dense>),
    Recurrent(Vec<Cell>),
    /// Encoder layers with their pretraining decoders.
    Autoencoder(Vec<(Dense, Dense)>),
}

#[derive(Debug, Clone, PartialEq)]
struct Network {
    /// Embedding per index-encoded column group: `(group index, table)`.
    embeddings: Vec<(usize, ParamId)>,
    body: Body,
    activity: Dense,
    time: Option<Dense>,
    remaining: Option<Dense>,
}

struct Heads {
    logits: NodeId,
    delta: Option<NodeId>,
    remaining: Option<NodeId>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Objective {
    Supervised,
    Reconstruct(usize),
}

/// A trained neural predictor over scalar type `S`.
#[derive(Debug, Clone)]
pub struct NeuralPredictor<S> {
    pub spec: ModelSpec,
    state: Option<Fitted<S>>,
}

#[derive(Debug, Clone)]
struct Fitted<S> {
    vocab: Vocabulary,
    encoder: Option<PrefixEncoder>,
    delta_norm: Normalizer,
    remaining_norm: Normalizer,
    t_max: usize,
    max_trace_len: usize,
    store: ParamStore<S>,
    net: Network,
}

fn row_width(layout: &FeatureLayout, embedding_dim: usize) -> usize {
    layout
        .groups
        .iter()
        .map(|g| match g.kind {
            ColumnKind::Index { .. } => embedding_dim,
            _ => g.width,
        })
        .sum()
}

impl<S: Scalar> Fitted<S> {
    fn encode(&self, spec: &ModelSpec, prefix: &[Event]) -> Result<Input, ModelError> {
        Ok(match &spec.arch {
            Architecture::Autoencoder {
                ngram, dim, hash_seed, ..
            } => {
                let labels: Vec<&str> = prefix.iter().map(|e| e.activity.as_str()).collect();
                Input::Vector(ngram_hash_encode(&labels, *ngram, *dim, *hash_seed))
            }
            Architecture::Mlp {
                input: MlpInput::SingleEvent,
                ..
            } => Input::Rows(encode_prefix_events(prefix, Window::Recent(1), self.encoder(), 1)?),
            _ => Input::Rows(encode_prefix_events(prefix, Window::All, self.encoder(), self.t_max)?),
        })
    }

    fn encoder(&self) -> &PrefixEncoder {
        self.encoder.as_ref().expect("sequence models carry an encoder")
    }
}

/// One row of a feature matrix as a graph vector, with index columns
/// replaced by embedding rows. Padding rows become zeros.
fn row_node<S: Scalar>(
    g: &mut Graph<'_, S>,
    net: &Network,
    m: &FeatureMatrix,
    r: usize,
    embedding_dim: usize,
) -> Result<NodeId, ModelError> {
    let row = m.row(r);
    if net.embeddings.is_empty() {
        return Ok(g.constant(row.iter().map(|v| S::from_f64_lossy(*v)).collect()));
    }
    let real = m.mask[r];
    let mut parts = Vec::with_capacity(m.layout.groups.len());
    for (gi, group) in m.layout.groups.iter().enumerate() {
        let values = &row[group.start..group.start + group.width];
        match group.kind {
            ColumnKind::Index { cardinality } => {
                if !real {
                    parts.push(g.constant(vec![S::zero(); embedding_dim]));
                    continue;
                }
                let table = net
                    .embeddings
                    .iter()
                    .find(|(i, _)| *i == gi)
                    .map(|(_, p)| *p)
                    .ok_or_else(|| ModelError::Config(format!("no embedding for column group {}", group.name)))?;
                let idx = values[0] as usize;
                if idx >= cardinality {
                    return Err(ModelError::Config(format!(
                        "index {idx} out of range in {}",
                        group.name
                    )));
                }
                let t = g.param(table);
                parts.push(g.row(t, idx)?);
            }
            _ => parts.push(g.constant(values.iter().map(|v| S::from_f64_lossy(*v)).collect())),
        }
    }
    Ok(g.concat(&parts))
}

fn embedding_dim(spec: &ModelSpec) -> usize {
    match spec.arch {
        Architecture::Recurrent { embedding_dim, .. } => embedding_dim,
        _ => default_embedding(),
    }
}

fn forward<S: Scalar>(
    g: &mut Graph<'_, S>,
    spec: &ModelSpec,
    net: &Network,
    input: &Input,
) -> Result<(Heads, Vec<NodeId>), ModelError> {
    let edim = embedding_dim(spec);
    let (hidden, layer_outputs) = match (&net.body, input) {
        (Body::Mlp(layers), Input::Rows(m)) => {
            let rows: Vec<NodeId> = (0..m.rows)
                .map(|r| row_node(g, net, m, r, edim))
                .collect::<Result<_, _>>()?;
            let mut h = g.concat(&rows);
            for layer in layers {
                h = layer.forward(g, h)?;
            }
            (h, Vec::new())
        }
        (Body::Recurrent(cells), Input::Rows(m)) => {
            let mut xs: Vec<NodeId> = (0..m.rows)
                .map(|r| row_node(g, net, m, r, edim))
                .collect::<Result<_, _>>()?;
            for cell in cells {
                let init = NodeState::constant(g, &CellState::zeros(cell));
                let states = forward_sequence(g, cell, &xs, &m.mask, init)?;
                xs = states.iter().map(|s| s.h).collect();
            }
            let last = *xs
                .last()
                .ok_or_else(|| ModelError::Config("empty input sequence".into()))?;
            (last, Vec::new())
        }
        (Body::Autoencoder(layers), Input::Vector(v)) => {
            let mut h = g.constant(v.iter().map(|x| S::from_f64_lossy(*x)).collect());
            let mut outs = vec![h];
            for (enc, _) in layers {
                h = enc.forward(g, h)?;
                outs.push(h);
            }
            (h, outs)
        }
        _ => return Err(ModelError::Config("input kind does not match architecture".into())),
    };
    let logits = net.activity.forward(g, hidden)?;
    let delta = net.time.as_ref().map(|d| d.forward(g, hidden)).transpose()?;
    let remaining = net.remaining.as_ref().map(|d| d.forward(g, hidden)).transpose()?;
    Ok((
        Heads {
            logits,
            delta,
            remaining,
        },
        layer_outputs,
    ))
}

fn sample_loss<S: Scalar>(
    g: &mut Graph<'_, S>,
    spec: &ModelSpec,
    net: &Network,
    s: &Sample,
    objective: Objective,
) -> Result<NodeId, ModelError> {
    match objective {
        Objective::Supervised => {
            let (heads, _) = forward(g, spec, net, &s.input)?;
            let mut parts = vec![g.softmax_cross_entropy(heads.logits, s.class)?];
            if let Some(d) = heads.delta {
                parts.push(g.abs_error(d, vec![S::from_f64_lossy(s.delta)])?);
            }
            if let Some(r) = heads.remaining {
                parts.push(g.abs_error(r, vec![S::from_f64_lossy(s.remaining)])?);
            }
            Ok(g.sum(&parts)?)
        }
        Objective::Reconstruct(layer) => {
            let Body::Autoencoder(layers) = &net.body else {
                return Err(ModelError::Config("reconstruction needs an autoencoder".into()));
            };
            let Input::Vector(v) = &s.input else {
                return Err(ModelError::Config("reconstruction needs vector input".into()));
            };
            let mut h = g.constant(v.iter().map(|x| S::from_f64_lossy(*x)).collect());
            for (enc, _) in &layers[..layer] {
                h = enc.forward(g, h)?;
            }
            let target = g.value(h).to_vec();
            let (enc, dec) = &layers[layer];
            let code = enc.forward(g, h)?;
            let recon = dec.forward(g, code)?;
            Ok(g.squared_error(recon, target)?)
        }
    }
}

fn mean_loss<S: Scalar>(
    store: &ParamStore<S>,
    spec: &ModelSpec,
    net: &Network,
    data: &[Sample],
    objective: Objective,
) -> Result<f64, ModelError> {
    let mut total = 0.0;
    for s in data {
        let mut g = Graph::new(store);
        let l = sample_loss(&mut g, spec, net, s, objective)?;
        total += g.scalar(l).to_f64_lossy();
    }
    Ok(total / data.len().max(1) as f64)
}

/// One pass of mini-batch SGD; only `trainable` parameters move when given.
#[allow(clippy::too_many_arguments)]
fn train_epoch<S: Scalar>(
    store: &mut ParamStore<S>,
    opt: &mut Sgd<S>,
    spec: &ModelSpec,
    net: &Network,
    data: &[Sample],
    objective: Objective,
    trainable: Option<&HashSet<ParamId>>,
    rng: &mut ChaCha8Rng,
) -> Result<f64, ModelError> {
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(rng);
    let mut grads = store.zero_grads();
    let mut total = 0.0;
    for batch in order.chunks(spec.training.batch_size) {
        grads.clear();
        for &i in batch {
            let mut g = Graph::new(&*store);
            let l = sample_loss(&mut g, spec, net, &data[i], objective)?;
            total += g.scalar(l).to_f64_lossy();
            g.backward(l, &mut grads)?;
        }
        grads.scale(S::one() / S::from_usize_lossy(batch.len()));
        if let Some(keep) = trainable {
            for id in store.ids() {
                if !keep.contains(&id) {
                    grads.slot(id).iter_mut().for_each(|v| *v = S::zero());
                }
            }
        }
        opt.step(store, &mut grads)?;
    }
    if !store.is_finite() {
        return Err(crate::nnkernel::KernelError::NonFinite("parameters".into()).into());
    }
    Ok(total / data.len() as f64)
}

fn dense_ids(d: &Dense) -> [ParamId; 2] {
    [d.w, d.b]
}

impl<S: Scalar> NeuralPredictor<S> {
    pub fn new(spec: ModelSpec) -> Result<Self, ModelError> {
        spec.validate()?;
        if matches!(spec.arch, Architecture::Markov(_)) {
            return Err(ModelError::Config("markov is not a neural architecture".into()));
        }
        Ok(NeuralPredictor { spec, state: None })
    }

    pub fn params(&self) -> Option<&ParamStore<S>> {
        self.state.as_ref().map(|s| &s.store)
    }

    /// Builds the network for the given input layout, registering fresh
    /// parameters in `store`.
    fn build(
        spec: &ModelSpec,
        store: &mut ParamStore<S>,
        layout: Option<&FeatureLayout>,
        t_max: usize,
        classes: usize,
        rng: &mut ChaCha8Rng,
    ) -> Network {
        let edim = embedding_dim(spec);
        let mut embeddings = Vec::new();
        if let Some(layout) = layout {
            for (gi, group) in layout.groups.iter().enumerate() {
                if let ColumnKind::Index { cardinality } = group.kind {
                    let p = store.add(format!("embed.{}", group.name), Tensor::glorot(cardinality, edim, rng));
                    embeddings.push((gi, p));
                }
            }
        }
        let row = layout.map(|l| row_width(l, edim)).unwrap_or(0);
        let (body, out) = match &spec.arch {
            Architecture::Mlp { hidden, input } => {
                let rows = if *input == MlpInput::SingleEvent { 1 } else { t_max };
                let mut width = rows * row;
                let mut layers = Vec::new();
                for (i, h) in hidden.iter().enumerate() {
                    layers.push(Dense::new(store, &format!("mlp.{i}"), width, *h, Activation::Relu, rng));
                    width = *h;
                }
                (Body::Mlp(layers), width)
            }
            Architecture::Recurrent {
                cell, hidden, layers, ..
            } => {
                let mut width = row;
                let mut cells = Vec::new();
                for i in 0..*layers {
                    cells.push(Cell::new(
                        *cell,
                        store,
                        &format!("{}.{i}", cell.as_str()),
                        width,
                        *hidden,
                        rng,
                    ));
                    width = *hidden;
                }
                (Body::Recurrent(cells), width)
            }
            Architecture::Autoencoder { hidden, dim, .. } => {
                let mut width = *dim;
                let mut layers = Vec::new();
                for (i, h) in hidden.iter().enumerate() {
                    let enc = Dense::new(store, &format!("ae.enc{i}"), width, *h, Activation::Sigmoid, rng);
                    let dec = Dense::new(store, &format!("ae.dec{i}"), *h, width, Activation::Identity, rng);
                    layers.push((enc, dec));
                    width = *h;
                }
                (Body::Autoencoder(layers), width)
            }
            Architecture::Markov(_) => unreachable!("rejected in new"),
        };
        let activity = Dense::new(store, "head.activity", out, classes, Activation::Identity, rng);
        let with_time = !matches!(spec.arch, Architecture::Autoencoder { .. });
        let time = with_time.then(|| Dense::new(store, "head.time", out, 1, Activation::Identity, rng));
        let remaining = (with_time && spec.remaining_head)
            .then(|| Dense::new(store, "head.remaining", out, 1, Activation::Identity, rng));
        Network {
            embeddings,
            body,
            activity,
            time,
            remaining,
        }
    }

    fn samples(&self, fitted: &Fitted<S>, log: &EventLog) -> Result<Vec<Sample>, ModelError> {
        make_prefix_samples(log, 1)
            .iter()
            .map(|s| {
                Ok(Sample {
                    input: fitted.encode(&self.spec, &s.prefix)?,
                    class: fitted
                        .vocab
                        .index_of(&s.next_activity)
                        .ok_or_else(|| crate::encoding::EncodingError::UnknownLabel(s.next_activity.clone()))?,
                    delta: fitted.delta_norm.transform(s.next_time_delta)?,
                    remaining: fitted.remaining_norm.transform(s.remaining_time)?,
                })
            })
            .collect()
    }

    fn init(&self, train: &EventLog) -> Result<Fitted<S>, ModelError> {
        if !train.is_eoc_augmented() {
            return Err(ModelError::NotAugmented);
        }
        let raw = make_prefix_samples(train, 1);
        if raw.is_empty() {
            return Err(ModelError::NoSamples);
        }
        let deltas: Vec<f64> = raw.iter().map(|s| s.next_time_delta).collect();
        let remaining: Vec<f64> = raw.iter().map(|s| s.remaining_time).collect();
        let encoder = match self.spec.arch {
            Architecture::Autoencoder { .. } => None,
            _ => Some(PrefixEncoder::fit(train, self.spec.encoding.clone())?),
        };
        let t_max = train.max_trace_len().saturating_sub(1).max(1);
        let vocab = train.activity_vocab.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(self.spec.training.seed);
        let mut store = ParamStore::new();
        let layout = encoder.as_ref().map(PrefixEncoder::layout);
        let net = Self::build(&self.spec, &mut store, layout.as_ref(), t_max, vocab.len(), &mut rng);
        Ok(Fitted {
            vocab,
            encoder,
            delta_norm: Normalizer::fit(NormMethod::Log, &deltas),
            remaining_norm: Normalizer::fit(NormMethod::Log, &remaining),
            t_max,
            max_trace_len: train.max_trace_len(),
            store,
            net,
        })
    }

    fn run(&mut self, train: &EventLog, validation: &EventLog) -> Result<TrainReport, ModelError> {
        let started = Instant::now();
        let mut fitted = self.init(train)?;
        let train_data = self.samples(&fitted, train)?;
        let mut val_data = self.samples(&fitted, validation)?;
        if val_data.is_empty() {
            val_data = train_data.clone();
        }
        let spec = &self.spec;
        let cfg = &spec.training;
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_0f5a_3d1e);
        let mut report = TrainReport {
            seed: cfg.seed,
            ..Default::default()
        };

        let mut freeze: Option<HashSet<ParamId>> = None;
        let mut freeze_epochs = 0;
        if let (
            Body::Autoencoder(layers),
            Architecture::Autoencoder {
                pretrain_epochs,
                freeze_epochs: fe,
                ..
            },
        ) = (&fitted.net.body, &spec.arch)
        {
            for (l, (enc, dec)) in layers.iter().enumerate() {
                let keep: HashSet<ParamId> = dense_ids(enc).into_iter().chain(dense_ids(dec)).collect();
                let mut opt = Sgd::new(cfg.sgd, &fitted.store);
                let mut last = mean_loss(&fitted.store, spec, &fitted.net, &train_data, Objective::Reconstruct(l))?;
                for _ in 0..*pretrain_epochs {
                    last = train_epoch(
                        &mut fitted.store,
                        &mut opt,
                        spec,
                        &fitted.net,
                        &train_data,
                        Objective::Reconstruct(l),
                        Some(&keep),
                        &mut rng,
                    )?;
                    opt.end_epoch();
                }
                if *pretrain_epochs > 0 {
                    last = mean_loss(&fitted.store, spec, &fitted.net, &train_data, Objective::Reconstruct(l))?;
                }
                report.pretrain_losses.push(last);
            }
            freeze = Some(dense_ids(&fitted.net.activity).into_iter().collect());
            freeze_epochs = *fe;
        }

        let mut opt = Sgd::new(cfg.sgd, &fitted.store);
        let mut best = fitted.store.clone();
        let mut best_loss = f64::INFINITY;
        let mut since_best = 0;
        for epoch in 0..cfg.epochs {
            let trainable = if epoch < freeze_epochs { freeze.as_ref() } else { None };
            let tl = train_epoch(
                &mut fitted.store,
                &mut opt,
                spec,
                &fitted.net,
                &train_data,
                Objective::Supervised,
                trainable,
                &mut rng,
            )?;
            opt.end_epoch();
            let vl = mean_loss(&fitted.store, spec, &fitted.net, &val_data, Objective::Supervised)?;
            report.train_losses.push(tl);
            report.val_losses.push(vl);
            if vl < best_loss {
                best_loss = vl;
                best = fitted.store.clone();
                report.best_epoch = epoch;
                since_best = 0;
            } else {
                since_best += 1;
                if cfg.patience > 0 && since_best >= cfg.patience {
                    break;
                }
            }
        }
        if cfg.epochs > 0 {
            fitted.store = best;
        }
        report.wall_clock_secs = started.elapsed().as_secs_f64();
        self.state = Some(fitted);
        Ok(report)
    }

    /// Mean training objective of `log` under the current parameters.
    pub fn loss_on(&self, log: &EventLog) -> Result<f64, ModelError> {
        let fitted = self.state.as_ref().ok_or(ModelError::NotFitted)?;
        let data = self.samples(fitted, log)?;
        mean_loss(&fitted.store, &self.spec, &fitted.net, &data, Objective::Supervised)
    }

    pub fn save(&self, dir: &Path) -> Result<(), ModelError> {
        let fitted = self.state.as_ref().ok_or(ModelError::NotFitted)?;
        std::fs::create_dir_all(dir)?;
        fitted.store.save(&dir.join(PARAMS_FILE))?;
        let sidecar = Sidecar {
            format: SIDECAR_FORMAT.into(),
            version: SIDECAR_VERSION,
            spec: self.spec.clone(),
            scalar: S::NAME.into(),
            vocab: fitted.vocab.iter().map(str::to_owned).collect(),
            vocab_sha256: vocab_hash(&fitted.vocab),
            encoder: fitted.encoder.clone(),
            delta_norm: fitted.delta_norm.clone(),
            remaining_norm: fitted.remaining_norm.clone(),
            t_max: fitted.t_max,
            max_trace_len: fitted.max_trace_len,
            seed: self.spec.training.seed,
        };
        let text = serde_json::to_string_pretty(&sidecar).map_err(|e| ModelError::Checkpoint(e.to_string()))?;
        std::fs::write(dir.join(SIDECAR_FILE), text)?;
        Ok(())
    }

    pub fn load(dir: &Path) -> Result<Self, ModelError> {
        let sc = read_sidecar(dir)?;
        if sc.scalar != S::NAME {
            return Err(ModelError::Checkpoint(format!(
                "checkpoint holds {} parameters, not {}",
                sc.scalar,
                S::NAME
            )));
        }
        let vocab = Vocabulary::from_labels(sc.vocab.iter().map(String::as_str));
        if vocab_hash(&vocab) != sc.vocab_sha256 {
            return Err(ModelError::Checkpoint("vocabulary hash mismatch".into()));
        }
        let loaded: ParamStore<S> = ParamStore::load(&dir.join(PARAMS_FILE))?;
        let mut store = ParamStore::new();
        let mut rng = ChaCha8Rng::seed_from_u64(sc.seed);
        let layout = sc.encoder.as_ref().map(PrefixEncoder::layout);
        let net = Self::build(&sc.spec, &mut store, layout.as_ref(), sc.t_max, vocab.len(), &mut rng);
        if store.num_tensors() != loaded.num_tensors() {
            return Err(ModelError::Checkpoint(
                "parameter set does not match the architecture".into(),
            ));
        }
        for id in store.ids().collect::<Vec<_>>() {
            let name = store.name(id).to_owned();
            let src = loaded
                .by_name(&name)
                .ok_or_else(|| ModelError::Checkpoint(format!("missing parameter {name}")))?;
            let dst = store.get_mut(id);
            if (src.rows, src.cols) != (dst.rows, dst.cols) {
                return Err(ModelError::Checkpoint(format!("shape mismatch for {name}")));
            }
            dst.data.clone_from(&src.data);
        }
        Ok(NeuralPredictor {
            spec: sc.spec,
            state: Some(Fitted {
                vocab,
                encoder: sc.encoder,
                delta_norm: sc.delta_norm,
                remaining_norm: sc.remaining_norm,
                t_max: sc.t_max,
                max_trace_len: sc.max_trace_len,
                store,
                net,
            }),
        })
    }

    /// Builds a model on `train` with freshly initialised parameters and
    /// returns a loss closure suitable for gradient checking.
    pub fn untrained(spec: ModelSpec, train: &EventLog) -> Result<Self, ModelError> {
        let mut m = NeuralPredictor::new(spec)?;
        m.state = Some(m.init(train)?);
        Ok(m)
    }
}

impl NeuralPredictor<f64> {
    /// Gradient check of the full training objective on up to `limit` samples
    /// of `log`, at the current parameters.
    pub fn gradcheck(&self, log: &EventLog, limit: usize, eps: f64) -> Result<f64, ModelError> {
        let fitted = self.state.as_ref().ok_or(ModelError::NotFitted)?;
        let mut data = self.samples(fitted, log)?;
        data.truncate(limit.max(1));
        let mut objectives = vec![(Objective::Supervised, fitted.store.ids().collect::<Vec<_>>())];
        if let Body::Autoencoder(layers) = &fitted.net.body {
            // Each pretraining stage only moves its own encoder/decoder pair.
            for (l, (enc, dec)) in layers.iter().enumerate() {
                let ids = dense_ids(enc).into_iter().chain(dense_ids(dec)).collect();
                objectives.push((Objective::Reconstruct(l), ids));
            }
        }
        let mut worst: f64 = 0.0;
        for (obj, ids) in objectives {
            let rep = crate::nnkernel::gradcheck_params(&fitted.store, &ids, eps, |g| {
                let parts = data
                    .iter()
                    .map(|s| sample_loss(g, &self.spec, &fitted.net, s, obj))
                    .collect::<Result<Vec<_>, _>>()
                    .map_err(|e| match e {
                        ModelError::Kernel(k) => k,
                        other => crate::nnkernel::KernelError::Shape(other.to_string()),
                    })?;
                g.sum(&parts)
            })?;
            worst = worst.max(rep.max_rel_error);
        }
        Ok(worst)
    }
}

impl<S: Scalar> Predictor for NeuralPredictor<S> {
    fn vocab(&self) -> &Vocabulary {
        static EMPTY: std::sync::OnceLock<Vocabulary> = std::sync::OnceLock::new();
        match &self.state {
            Some(f) => &f.vocab,
            None => EMPTY.get_or_init(Vocabulary::new),
        }
    }

    fn predict(&self, prefix: &[Event]) -> Result<Prediction, ModelError> {
        let fitted = self.state.as_ref().ok_or(ModelError::NotFitted)?;
        let input = fitted.encode(&self.spec, prefix)?;
        let mut g = Graph::new(&fitted.store);
        let (heads, _) = forward(&mut g, &self.spec, &fitted.net, &input)?;
        let logits: Vec<f64> = g.value(heads.logits).iter().map(|v| v.to_f64_lossy()).collect();
        let probs = softmax(&logits);
        let read = |id: Option<NodeId>, norm: &Normalizer| -> Result<Option<f64>, ModelError> {
            match id {
                Some(id) => {
                    let y = g.scalar(id).to_f64_lossy();
                    Ok(Some(norm.inverse(y)?.max(0.0)))
                }
                None => Ok(None),
            }
        };
        let p = Prediction {
            probs,
            next_delta: read(heads.delta, &fitted.delta_norm)?,
            remaining: read(heads.remaining, &fitted.remaining_norm)?,
        };
        p.check_distribution()?;
        Ok(p)
    }

    fn fit(&mut self, train: &EventLog, validation: &EventLog) -> Result<TrainReport, ModelError> {
        self.run(train, validation)
    }

    fn predicts_remaining(&self) -> bool {
        self.state.as_ref().is_some_and(|f| f.net.remaining.is_some())
    }

    fn predicts_time(&self) -> bool {
        self.state.as_ref().is_some_and(|f| f.net.time.is_some())
    }

    fn max_trace_len(&self) -> Option<usize> {
        self.state.as_ref().map(|f| f.max_trace_len)
    }
}

const PARAMS_FILE: &str = "params.json";
const SIDECAR_FILE: &str = "model.json";
const SIDECAR_FORMAT: &str = "ppmbench-model";
const SIDECAR_VERSION: u32 = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Sidecar {
    format: String,
    version: u32,
    spec: ModelSpec,
    scalar: String,
    vocab: Vec<String>,
    vocab_sha256: String,
    encoder: Option<PrefixEncoder>,
    delta_norm: Normalizer,
    remaining_norm: Normalizer,
    t_max: usize,
    max_trace_len: usize,
    seed: u64,
}

fn read_sidecar(dir: &Path) -> Result<Sidecar, ModelError> {
    let text = std::fs::read_to_string(dir.join(SIDECAR_FILE))?;
    let sc: Sidecar = serde_json::from_str(&text).map_err(|e| ModelError::Checkpoint(e.to_string()))?;
    if sc.format != SIDECAR_FORMAT || sc.version != SIDECAR_VERSION {
        return Err(ModelError::Checkpoint(format!(
            "unsupported model file {} v{}",
            sc.format, sc.version
        )));
    }
    Ok(sc)
}

pub(super) fn sidecar_precision(dir: &Path) -> Result<Precision, ModelError> {
    match read_sidecar(dir)?.scalar.as_str() {
        "f32" => Ok(Precision::F32),
        "f64" => Ok(Precision::F64),
        other => Err(ModelError::Checkpoint(format!("unknown scalar {other}"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eventlog::{augment_eoc, Timestamp, Trace};

    fn chain_log(n: usize) -> EventLog {
        let day = 86_400_000;
        let traces = (0..n)
            .map(|i| {
                let case = format!("c{i:03}");
                let start = i as i64 * day;
                let events = ["A", "B", "C"]
                    .iter()
                    .enumerate()
                    .map(|(j, a)| Event::new(*a, case.clone(), Timestamp::from_millis(start + j as i64 * day)))
                    .collect();
                Trace::new(case, events).unwrap()
            })
            .collect();
        augment_eoc(&EventLog::from_traces(traces).unwrap()).unwrap()
    }

    fn tiny(arch: Architecture) -> ModelSpec {
        let mut s = ModelSpec::new(arch);
        s.training.epochs = 3;
        s.training.batch_size = 4;
        s.precision = Precision::F64;
        s
    }

    #[test]
    fn spec_validation() {
        let mlp = ModelSpec::new(Architecture::Mlp {
            hidden: vec![0],
            input: MlpInput::PrefixesPadded,
        });
        assert!(matches!(mlp.validate(), Err(ModelError::Config(_))));
        let ae = ModelSpec::new(Architecture::Autoencoder {
            hidden: vec![8, 8],
            ngram: 2,
            dim: 16,
            pretrain_epochs: 1,
            freeze_epochs: 0,
            hash_seed: 0,
        });
        assert!(matches!(
            ae.validate(),
            Err(ModelError::Undercomplete {
                layer: 1,
                hidden: 8,
                input: 8
            })
        ));
    }

    #[test]
    fn spec_toml_round_trip() {
        let text = r#"
            kind = "recurrent"
            cell = "gru"
            hidden = 16
            epochs = 7
            lr = 0.05
            precision = "f64"
        "#;
        let spec: ModelSpec = toml::from_str(text).unwrap();
        assert_eq!(spec.kind_name(), "gru");
        assert_eq!(spec.training.epochs, 7);
        assert_eq!(spec.training.sgd.lr, 0.05);
        assert_eq!(spec.training.sgd.momentum, 0.9);
        assert!(spec.remaining_head);
        let back: ModelSpec = toml::from_str(&toml::to_string(&spec).unwrap()).unwrap();
        assert_eq!(back, spec);
    }

    #[test]
    fn architectures_train_and_predict() {
        let log = chain_log(12);
        let archs = [
            Architecture::Mlp {
                hidden: vec![6],
                input: MlpInput::PrefixesPadded,
            },
            Architecture::Mlp {
                hidden: vec![6],
                input: MlpInput::SingleEvent,
            },
            Architecture::Recurrent {
                cell: CellKind::Lstm,
                hidden: 5,
                layers: 2,
                embedding_dim: 3,
            },
            Architecture::Autoencoder {
                hidden: vec![8, 4],
                ngram: 2,
                dim: 16,
                pretrain_epochs: 2,
                freeze_epochs: 1,
                hash_seed: 3,
            },
        ];
        for arch in archs {
            let mut spec = tiny(arch);
            if matches!(spec.arch, Architecture::Recurrent { .. }) {
                spec.encoding.activity = crate::encoding::ActivityEncoding::Index;
            }
            let mut m = NeuralPredictor::<f64>::new(spec).unwrap();
            let report = m.fit(&log, &log).unwrap();
            assert_eq!(report.val_losses.len(), 3);
            let best = report.val_losses.iter().cloned().fold(f64::INFINITY, f64::min);
            assert_eq!(report.best_val_loss(), Some(best));
            let p = m.predict(&log.traces[0].events[..2]).unwrap();
            assert_eq!(p.probs.len(), log.activity_vocab.len());
            p.check_distribution().unwrap();
        }
    }

    #[test]
    fn retraining_is_deterministic() {
        let log = chain_log(10);
        let spec = tiny(Architecture::Recurrent {
            cell: CellKind::Gru,
            hidden: 4,
            layers: 1,
            embedding_dim: 2,
        });
        let mut a = NeuralPredictor::<f32>::new(spec.clone()).unwrap();
        let mut b = NeuralPredictor::<f32>::new(spec).unwrap();
        assert_eq!(a.fit(&log, &log).unwrap(), b.fit(&log, &log).unwrap());
        let (pa, pb) = (a.params().unwrap(), b.params().unwrap());
        for id in pa.ids() {
            let x: Vec<u32> = pa.get(id).data.iter().map(|v| v.to_bits()).collect();
            let y: Vec<u32> = pb.get(id).data.iter().map(|v| v.to_bits()).collect();
            assert_eq!(x, y);
        }
    }

    #[test]
    fn checkpoint_reload_predicts_identically() {
        let log = chain_log(8);
        let mut spec = tiny(Architecture::Recurrent {
            cell: CellKind::Lstm,
            hidden: 4,
            layers: 1,
            embedding_dim: 2,
        });
        spec.precision = Precision::F32;
        let mut m = NeuralPredictor::<f32>::new(spec).unwrap();
        m.fit(&log, &log).unwrap();
        let dir = tempfile::tempdir().unwrap();
        m.save(dir.path()).unwrap();
        let back = NeuralPredictor::<f32>::load(dir.path()).unwrap();
        let prefix = &log.traces[1].events[..2];
        assert_eq!(m.predict(prefix).unwrap(), back.predict(prefix).unwrap());
        assert!(NeuralPredictor::<f64>::load(dir.path()).is_err());
    }

    #[test]
    fn unfitted_predict_errors() {
        let m = NeuralPredictor::<f32>::new(ModelSpec::new(Architecture::Mlp {
            hidden: vec![4],
            input: MlpInput::SingleEvent,
        }))
        .unwrap();
        assert!(matches!(m.predict(&[]), Err(ModelError::NotFitted)));
    }
}
