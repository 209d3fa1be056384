//! The graph variational autoencoder.
//!
//! Data flow for one batch of vertices (rows of any table):
//!
//! ```text
//! merged row features ─ input projection ─ k₁ × message passing ─┐
//!   ┌────────────────────────────────────────────────────────────┘
//!   └ per-table encoder → (μ, log σ²) → z = μ + σ·ε → per-table decoder ─┐
//!   ┌────────────────────────────────────────────────────────────────────┘
//!   └ k₂ × message passing (real adjacency) → per-table output head → loss
//! ```
//!
//! Message passing is `m_t = Σ_{s∈N(t)} A·h_s`, `h_t ← GRU(m_t, h_t)`.
//! Relational edges carry no features, so `A` is one learned `d_h × d_h`
//! matrix per layer. The loss is the sum over vertices of the reconstruction
//! term plus the origin table's `β` times the KL divergence of the vertex's
//! code to the standard normal prior. Numeric, date-time and missingness
//! columns are squared errors on a sigmoid output; one-hot spans use
//! softmax cross-entropy.
//!
//! Synthesis keeps the real graph: every vertex draws its code from the
//! prior, is decoded, and the second message-passing stage runs over the
//! real adjacency before the output heads and the inverse encoding.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{build_graph, RelationalGraph};
use crate::matrix::Matrix;
use crate::nn::{
    kl_backward, kl_rows, reparameterize, reparameterize_backward, sigmoid, standard_normal, tanh, Adam,
    GaussianHead, GruCache, GruCell, Linear, ParamId, ParamStore,
};
use crate::preprocess::{
    decode_table, encode_tables, fit_codecs, merge_tables, EncodedTable, MergedTable, Segment, TableCodec,
};
use crate::relational::{schema_fingerprint, Link, RelationalDataset, TableData, Value};
use crate::seed;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    /// Message-passing layers before the encoder.
    pub k1: usize,
    /// Message-passing layers after the decoder.
    pub k2: usize,
    /// Latent dimension per table, dataset order.
    pub latent_dims: Vec<usize>,
    /// KL weight per table, dataset order.
    pub betas: Vec<f64>,
    pub hidden_dim: usize,
    pub epochs: usize,
    /// Connected components (a primary row and its secondary rows) per step.
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Standard deviation of the Gaussian likelihood on scalar columns; the
    /// squared error is weighted by `1 / (2σ²)`.
    pub output_std: f64,
    pub seed: u64,
}

impl TrainConfig {
    pub const DEFAULT_LATENT: usize = 8;
    pub const DEFAULT_BETA: f64 = 1.0;

    pub fn for_tables(tables: usize, seed: u64) -> Self {
        TrainConfig {
            k1: 4,
            k2: 4,
            latent_dims: vec![Self::DEFAULT_LATENT; tables],
            betas: vec![Self::DEFAULT_BETA; tables],
            hidden_dim: 32,
            epochs: 100,
            batch_size: 16,
            learning_rate: 1e-3,
            output_std: 0.1,
            seed,
        }
    }

    pub fn check(&self, tables: usize) -> Result<()> {
        if self.latent_dims.len() != tables {
            return Err(Error::ConfigMismatch(format!(
                "{} latent dimensions given for {tables} tables",
                self.latent_dims.len()
            )));
        }
        if self.betas.len() != tables {
            return Err(Error::ConfigMismatch(format!("{} beta values given for {tables} tables", self.betas.len())));
        }
        if self.latent_dims.contains(&0) {
            return Err(Error::ConfigMismatch("latent dimensions must be at least 1".into()));
        }
        if self.betas.iter().any(|b| !(b.is_finite() && *b >= 0.0)) {
            return Err(Error::ConfigMismatch("beta values must be finite and non-negative".into()));
        }
        if self.hidden_dim == 0 || self.batch_size == 0 {
            return Err(Error::ConfigMismatch("hidden dimension and batch size must be positive".into()));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::ConfigMismatch("learning rate must be positive".into()));
        }
        if !(self.output_std > 0.0 && self.output_std.is_finite()) {
            return Err(Error::ConfigMismatch("output standard deviation must be positive".into()));
        }
        Ok(())
    }
}

/// One message-passing layer: message operator `A` and GRU update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MessagePassingLayer {
    pub message: ParamId,
    pub gru: GruCell,
}

pub struct MessageCache {
    input: Matrix,
    gru: GruCache,
}

impl MessagePassingLayer {
    pub fn new<R: rand::Rng>(store: &mut ParamStore, name: &str, hidden_dim: usize, rng: &mut R) -> Self {
        let message = store.uniform(format!("{name}.message"), hidden_dim, hidden_dim, hidden_dim, rng);
        let gru = GruCell::new(store, &format!("{name}.gru"), hidden_dim, hidden_dim, rng);
        MessagePassingLayer { message, gru }
    }

    pub fn forward(&self, store: &ParamStore, h: &Matrix, adjacency: &[Vec<usize>]) -> Result<(Matrix, MessageCache)> {
        if adjacency.len() != h.rows() {
            return Err(Error::ShapeMismatch(format!(
                "{} adjacency lists for {} hidden states",
                adjacency.len(),
                h.rows()
            )));
        }
        let m = aggregate(&h.matmul_t(store.value(self.message)), adjacency);
        let (out, gru) = self.gru.forward(store, &m, h)?;
        Ok((out, MessageCache { input: h.clone(), gru }))
    }

    pub fn backward(
        &self,
        store: &mut ParamStore,
        cache: &MessageCache,
        adjacency: &[Vec<usize>],
        d_out: &Matrix,
    ) -> Matrix {
        let (dm, mut dh) = self.gru.backward(store, &cache.gru, d_out);
        // The transpose of neighbour summation is neighbour summation.
        let d_messages = aggregate(&dm, adjacency);
        d_messages.t_matmul_into(&cache.input, store.grad_mut(self.message));
        dh.add_assign(&d_messages.matmul(store.value(self.message)));
        dh
    }
}

/// `out_t = Σ_{s ∈ N(t)} x_s`
fn aggregate(x: &Matrix, adjacency: &[Vec<usize>]) -> Matrix {
    let mut out = Matrix::zeros(x.rows(), x.cols());
    for (t, neighbours) in adjacency.iter().enumerate() {
        let o = out.row_mut(t);
        for &s in neighbours {
            for (oj, xj) in o.iter_mut().zip(x.row(s)) {
                *oj += xj;
            }
        }
    }
    out
}

/// Runs `layers` in sequence, each updating all vertices from the previous
/// layer's states.
pub fn message_pass(
    store: &ParamStore,
    layers: &[MessagePassingLayer],
    h: &Matrix,
    adjacency: &[Vec<usize>],
) -> Result<Matrix> {
    let mut state = h.clone();
    for layer in layers {
        state = layer.forward(store, &state, adjacency)?.0;
    }
    Ok(state)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct Encoder {
    hidden: Linear,
    mean: Linear,
    logvar: Linear,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct Decoder {
    hidden: Linear,
    out: Linear,
}

#[derive(Debug, Clone, PartialEq)]
struct Architecture {
    input: Linear,
    pre: Vec<MessagePassingLayer>,
    encoders: Vec<Encoder>,
    decoders: Vec<Decoder>,
    post: Vec<MessagePassingLayer>,
    heads: Vec<Linear>,
}

impl Architecture {
    fn build<R: rand::Rng>(
        store: &mut ParamStore,
        config: &TrainConfig,
        codecs: &[TableCodec],
        rng: &mut R,
    ) -> Architecture {
        let d = config.hidden_dim;
        let width: usize = codecs.iter().map(TableCodec::width).sum();
        let input = Linear::new(store, "input", width, d, rng);
        let pre = (0..config.k1).map(|l| MessagePassingLayer::new(store, &format!("pre{l}"), d, rng)).collect();
        let encoders = codecs
            .iter()
            .zip(&config.latent_dims)
            .enumerate()
            .map(|(t, (_, &n))| Encoder {
                hidden: Linear::new(store, &format!("encoder{t}.hidden"), d, d, rng),
                mean: Linear::new(store, &format!("encoder{t}.mean"), d, n, rng),
                logvar: Linear::new(store, &format!("encoder{t}.logvar"), d, n, rng),
            })
            .collect();
        let decoders = config
            .latent_dims
            .iter()
            .enumerate()
            .map(|(t, &n)| Decoder {
                hidden: Linear::new(store, &format!("decoder{t}.hidden"), n, d, rng),
                out: Linear::new(store, &format!("decoder{t}.out"), d, d, rng),
            })
            .collect();
        let post = (0..config.k2).map(|l| MessagePassingLayer::new(store, &format!("post{l}"), d, rng)).collect();
        let heads =
            codecs.iter().enumerate().map(|(t, c)| Linear::new(store, &format!("head{t}"), d, c.width(), rng)).collect();
        Architecture { input, pre, encoders, decoders, post, heads }
    }
}

/// Encoded view of a dataset under fixed codecs.
#[derive(Debug, Clone)]
pub struct PreparedData {
    pub graph: RelationalGraph,
    pub encoded: Vec<EncodedTable>,
    pub merged: MergedTable,
}

impl PreparedData {
    pub fn new(dataset: &RelationalDataset, codecs: &[TableCodec]) -> Result<PreparedData> {
        let graph = build_graph(dataset)?;
        let encoded = encode_tables(codecs, &dataset.tables)?;
        let merged = merge_tables(&encoded, &graph)?;
        Ok(PreparedData { graph, encoded, merged })
    }
}

/// A set of vertices with its induced adjacency and per-table targets.
#[derive(Debug, Clone)]
pub struct Batch {
    pub vertices: Vec<usize>,
    adjacency: Vec<Vec<usize>>,
    features: Matrix,
    by_table: Vec<Vec<usize>>,
    targets: Vec<Matrix>,
}

impl Batch {
    /// `vertices` must be sorted; the induced subgraph is used.
    pub fn new(data: &PreparedData, vertices: Vec<usize>) -> Batch {
        let adjacency = data.graph.local_adjacency(&vertices);
        let features = data.merged.matrix.gather_rows(&vertices);
        let tables = data.encoded.len();
        let mut by_table = vec![Vec::new(); tables];
        let mut rows = vec![Vec::new(); tables];
        for (local, &v) in vertices.iter().enumerate() {
            let origin = data.merged.origins[v];
            by_table[origin.table].push(local);
            rows[origin.table].push(origin.row);
        }
        let targets = data.encoded.iter().zip(&rows).map(|(e, r)| e.matrix.gather_rows(r)).collect();
        Batch { vertices, adjacency, features, by_table, targets }
    }

    pub fn full(data: &PreparedData) -> Batch {
        Batch::new(data, (0..data.graph.vertex_count()).collect())
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }
}

/// Standard-normal draws for the reparameterization, one matrix per table.
#[derive(Debug, Clone, PartialEq)]
pub struct Noise(pub Vec<Matrix>);

impl Noise {
    pub fn sample<R: rand::Rng>(batch: &Batch, latent_dims: &[usize], rng: &mut R) -> Noise {
        Noise(batch.by_table.iter().zip(latent_dims).map(|(rows, &n)| standard_normal(rows.len(), n, rng)).collect())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossParts {
    pub reconstruction: f64,
    /// Unweighted KL summed over vertices.
    pub kl: f64,
    /// Reconstruction plus β-weighted KL.
    pub total: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub epoch: usize,
    pub total: f64,
    pub reconstruction: f64,
    pub kl: f64,
}

struct TableTrace {
    encoder_input: Matrix,
    encoder_hidden: Matrix,
    head: GaussianHead,
    mask: Matrix,
    z: Matrix,
    decoder_hidden: Matrix,
    decoder_out: Matrix,
    head_input: Matrix,
    d_logits: Matrix,
}

struct Trace {
    pre: Vec<MessageCache>,
    post: Vec<MessageCache>,
    tables: Vec<TableTrace>,
    parts: LossParts,
}

/// Squared error (scaled) and softmax cross-entropy over one table's columns.
/// Returns the loss and its gradient with respect to the logits.
fn reconstruction(segments: &[Segment], logits: &Matrix, target: &Matrix, scalar_weight: f64) -> (f64, Matrix) {
    let mut loss = 0.0;
    let mut grad = Matrix::zeros(logits.rows(), logits.cols());
    for r in 0..logits.rows() {
        let (l, y, g) = (logits.row(r), target.row(r), grad.row_mut(r));
        for seg in segments {
            match *seg {
                Segment::Scalar { column } => {
                    let p = sigmoid(l[column]);
                    let e = p - y[column];
                    loss += scalar_weight * e * e;
                    g[column] = 2.0 * scalar_weight * e * p * (1.0 - p);
                }
                Segment::OneHot { start, len } => {
                    let span = &l[start..start + len];
                    let max = span.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let log_sum = max + libm::log(span.iter().map(|v| libm::exp(v - max)).sum::<f64>());
                    let mass: f64 = y[start..start + len].iter().sum();
                    for k in 0..len {
                        let log_p = span[k] - log_sum;
                        loss -= y[start + k] * log_p;
                        g[start + k] = libm::exp(log_p) * mass - y[start + k];
                    }
                }
            }
        }
    }
    (loss, grad)
}

/// Output activations: sigmoid on scalars, softmax on one-hot spans.
fn activate(segments: &[Segment], logits: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(logits.rows(), logits.cols());
    for r in 0..logits.rows() {
        let (l, o) = (logits.row(r), out.row_mut(r));
        for seg in segments {
            match *seg {
                Segment::Scalar { column } => o[column] = sigmoid(l[column]),
                Segment::OneHot { start, len } => {
                    let span = &l[start..start + len];
                    let max = span.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let sum: f64 = span.iter().map(|v| libm::exp(v - max)).sum();
                    for k in 0..len {
                        o[start + k] = libm::exp(span[k] - max) / sum;
                    }
                }
            }
        }
    }
    out
}

fn tanh_backward(d: &Matrix, activated: &Matrix) -> Matrix {
    let mut out = d.clone();
    for (o, a) in out.as_mut_slice().iter_mut().zip(activated.as_slice()) {
        *o *= 1.0 - a * a;
    }
    out
}

fn scatter_add(target: &mut Matrix, indices: &[usize], src: &Matrix) {
    for (k, &i) in indices.iter().enumerate() {
        for (t, s) in target.row_mut(i).iter_mut().zip(src.row(k)) {
            *t += s;
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GraphVaeModel {
    pub config: TrainConfig,
    pub codecs: Vec<TableCodec>,
    pub links: Vec<Link>,
    pub fingerprint: String,
    store: ParamStore,
    arch: Architecture,
    segments: Vec<Vec<Segment>>,
}

impl GraphVaeModel {
    /// Fresh model with parameters drawn from the seed's init stream.
    pub fn new(config: TrainConfig, codecs: Vec<TableCodec>, links: Vec<Link>, fingerprint: String) -> Result<Self> {
        config.check(codecs.len())?;
        let mut store = ParamStore::new();
        let mut rng = seed::stage_rng(config.seed, "init");
        let arch = Architecture::build(&mut store, &config, &codecs, &mut rng);
        let segments = codecs.iter().map(TableCodec::segments).collect();
        Ok(GraphVaeModel { config, codecs, links, fingerprint, store, arch, segments })
    }

    /// Untrained model whose codecs are fitted on `dataset`.
    pub fn for_dataset(dataset: &RelationalDataset, config: TrainConfig) -> Result<Self> {
        crate::relational::validate(dataset).into_result()?;
        config.check(dataset.tables.len())?;
        let codecs = fit_codecs(&dataset.tables)?;
        Self::new(config, codecs, dataset.links.clone(), schema_fingerprint(dataset))
    }

    /// Rebuilds the architecture and installs saved parameter values, which
    /// must match by name and shape in creation order.
    pub fn from_parts(
        config: TrainConfig,
        codecs: Vec<TableCodec>,
        links: Vec<Link>,
        fingerprint: String,
        params: Vec<(String, Matrix)>,
    ) -> Result<Self> {
        let mut model = Self::new(config, codecs, links, fingerprint)?;
        if params.len() != model.store.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} parameter arrays given, architecture has {}",
                params.len(),
                model.store.len()
            )));
        }
        for (p, (name, value)) in model.store.iter_mut().zip(params) {
            if p.name != name || p.value.shape() != value.shape() {
                return Err(Error::ShapeMismatch(format!(
                    "parameter `{}` {:?} does not match saved `{name}` {:?}",
                    p.name,
                    p.value.shape(),
                    value.shape()
                )));
            }
            p.value = value;
        }
        Ok(model)
    }

    pub fn store(&self) -> &ParamStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut ParamStore {
        &mut self.store
    }

    pub fn table_count(&self) -> usize {
        self.codecs.len()
    }

    pub fn prepare(&self, dataset: &RelationalDataset) -> Result<PreparedData> {
        self.check_fingerprint(dataset)?;
        PreparedData::new(dataset, &self.codecs)
    }

    pub fn check_fingerprint(&self, dataset: &RelationalDataset) -> Result<()> {
        let fp = schema_fingerprint(dataset);
        if fp != self.fingerprint {
            return Err(Error::SchemaFingerprintMismatch { model: self.fingerprint.clone(), dataset: fp });
        }
        Ok(())
    }

    fn forward(&self, batch: &Batch, noise: &Noise) -> Result<Trace> {
        let store = &self.store;
        let arch = &self.arch;
        let scalar_weight = 1.0 / (2.0 * self.config.output_std * self.config.output_std);

        let mut h = arch.input.forward(store, &batch.features)?;
        let mut pre = Vec::with_capacity(arch.pre.len());
        for layer in &arch.pre {
            let (next, cache) = layer.forward(store, &h, &batch.adjacency)?;
            pre.push(cache);
            h = next;
        }

        let mut decoded = Matrix::zeros(batch.len(), self.config.hidden_dim);
        let mut partial = Vec::with_capacity(self.codecs.len());
        for (t, rows) in batch.by_table.iter().enumerate() {
            let enc = &arch.encoders[t];
            let dec = &arch.decoders[t];
            let encoder_input = h.gather_rows(rows);
            let encoder_hidden = enc.hidden.forward(store, &encoder_input)?.map(tanh);
            let mean = enc.mean.forward(store, &encoder_hidden)?;
            let raw_logvar = enc.logvar.forward(store, &encoder_hidden)?;
            let mask = GaussianHead::clamp_mask(&raw_logvar);
            let head = GaussianHead::new(mean, raw_logvar);
            let eps = &noise.0[t];
            if eps.shape() != head.mean.shape() {
                return Err(Error::ShapeMismatch(format!("noise for table {t} has shape {:?}", eps.shape())));
            }
            let z = reparameterize(&head, eps);
            let decoder_hidden = dec.hidden.forward(store, &z)?.map(tanh);
            let decoder_out = dec.out.forward(store, &decoder_hidden)?.map(tanh);
            decoded.scatter_rows(rows, &decoder_out);
            partial.push((encoder_input, encoder_hidden, head, mask, z, decoder_hidden, decoder_out));
        }

        let mut g = decoded;
        let mut post = Vec::with_capacity(arch.post.len());
        for layer in &arch.post {
            let (next, cache) = layer.forward(store, &g, &batch.adjacency)?;
            post.push(cache);
            g = next;
        }

        let mut parts = LossParts::default();
        let mut tables = Vec::with_capacity(partial.len());
        for (t, (encoder_input, encoder_hidden, head, mask, z, decoder_hidden, decoder_out)) in
            partial.into_iter().enumerate()
        {
            let head_input = g.gather_rows(&batch.by_table[t]);
            let logits = arch.heads[t].forward(store, &head_input)?;
            let (rec, d_logits) = reconstruction(&self.segments[t], &logits, &batch.targets[t], scalar_weight);
            let kl: f64 = kl_rows(&head).iter().sum();
            parts.reconstruction += rec;
            parts.kl += kl;
            parts.total += rec + self.config.betas[t] * kl;
            tables.push(TableTrace {
                encoder_input,
                encoder_hidden,
                head,
                mask,
                z,
                decoder_hidden,
                decoder_out,
                head_input,
                d_logits,
            });
        }
        Ok(Trace { pre, post, tables, parts })
    }

    fn backward(&mut self, batch: &Batch, noise: &Noise, trace: &Trace) {
        let d = self.config.hidden_dim;
        let arch = self.arch.clone();
        let store = &mut self.store;

        let mut dg = Matrix::zeros(batch.len(), d);
        for (t, tt) in trace.tables.iter().enumerate() {
            let d_in = arch.heads[t].backward(store, &tt.head_input, &tt.d_logits);
            scatter_add(&mut dg, &batch.by_table[t], &d_in);
        }
        for (layer, cache) in arch.post.iter().zip(&trace.post).rev() {
            dg = layer.backward(store, cache, &batch.adjacency, &dg);
        }

        let mut dh = Matrix::zeros(batch.len(), d);
        for (t, tt) in trace.tables.iter().enumerate() {
            let rows = &batch.by_table[t];
            let (enc, dec) = (&arch.encoders[t], &arch.decoders[t]);
            let d_out = tanh_backward(&dg.gather_rows(rows), &tt.decoder_out);
            let d_hidden = tanh_backward(&dec.out.backward(store, &tt.decoder_hidden, &d_out), &tt.decoder_hidden);
            let dz = dec.hidden.backward(store, &tt.z, &d_hidden);
            let (mut dmean, mut dlogvar) = reparameterize_backward(&tt.head, &noise.0[t], &dz);
            let weights = vec![self.config.betas[t]; rows.len()];
            let (kmean, klogvar) = kl_backward(&tt.head, &weights);
            dmean.add_assign(&kmean);
            dlogvar.add_assign(&klogvar);
            for (g, m) in dlogvar.as_mut_slice().iter_mut().zip(tt.mask.as_slice()) {
                *g *= m;
            }
            let mut d_enc = enc.mean.backward(store, &tt.encoder_hidden, &dmean);
            d_enc.add_assign(&enc.logvar.backward(store, &tt.encoder_hidden, &dlogvar));
            let d_enc = tanh_backward(&d_enc, &tt.encoder_hidden);
            let d_in = enc.hidden.backward(store, &tt.encoder_input, &d_enc);
            scatter_add(&mut dh, rows, &d_in);
        }
        for (layer, cache) in arch.pre.iter().zip(&trace.pre).rev() {
            dh = layer.backward(store, cache, &batch.adjacency, &dh);
        }
        arch.input.backward(store, &batch.features, &dh);
    }

    pub fn loss(&self, batch: &Batch, noise: &Noise) -> Result<LossParts> {
        Ok(self.forward(batch, noise)?.parts)
    }

    /// Zeroes the gradient buffers, then fills them with the gradient of
    /// the batch loss.
    pub fn gradients(&mut self, batch: &Batch, noise: &Noise) -> Result<LossParts> {
        let trace = self.forward(batch, noise)?;
        self.store.zero_grad();
        self.backward(batch, noise, &trace);
        Ok(trace.parts)
    }

    /// Prior samples decoded through the second message-passing stage over
    /// `graph`; one encoded matrix per table.
    pub fn generate_encoded<R: rand::Rng>(&self, graph: &RelationalGraph, rng: &mut R) -> Result<Vec<EncodedTable>> {
        if graph.table_count() != self.table_count() {
            return Err(Error::ShapeMismatch(format!(
                "graph has {} tables, model has {}",
                graph.table_count(),
                self.table_count()
            )));
        }
        let store = &self.store;
        let mut decoded = Matrix::zeros(graph.vertex_count(), self.config.hidden_dim);
        for (t, dec) in self.arch.decoders.iter().enumerate() {
            let range = graph.table_range(t);
            let rows: Vec<usize> = range.clone().collect();
            let z = standard_normal(rows.len(), self.config.latent_dims[t], rng);
            let hidden = dec.hidden.forward(store, &z)?.map(tanh);
            decoded.scatter_rows(&rows, &dec.out.forward(store, &hidden)?.map(tanh));
        }
        let g = message_pass(store, &self.arch.post, &decoded, graph.adjacency())?;
        self.codecs
            .iter()
            .enumerate()
            .map(|(t, codec)| {
                let rows: Vec<usize> = graph.table_range(t).collect();
                let logits = self.arch.heads[t].forward(store, &g.gather_rows(&rows))?;
                Ok(EncodedTable {
                    table: codec.table.clone(),
                    attributes: codec.attributes.clone(),
                    spans: codec.spans(),
                    matrix: activate(&self.segments[t], &logits),
                })
            })
            .collect()
    }
}

/// Trains a fresh model on `dataset`. Returns the model and one loss record
/// per epoch (sums over all vertices).
pub fn train_model(dataset: &RelationalDataset, config: &TrainConfig) -> Result<(GraphVaeModel, Vec<LossRecord>)> {
    let mut model = GraphVaeModel::for_dataset(dataset, config.clone())?;
    let trace = continue_training(&mut model, dataset, config.epochs)?;
    Ok((model, trace))
}

/// Runs `epochs` more epochs on `dataset` with a fresh optimizer.
pub fn continue_training(
    model: &mut GraphVaeModel,
    dataset: &RelationalDataset,
    epochs: usize,
) -> Result<Vec<LossRecord>> {
    let data = model.prepare(dataset)?;
    let mut rng = seed::stage_rng(model.config.seed, seed::STAGE_TRAIN);
    let mut adam = Adam::new(model.config.learning_rate);
    let mut components = data.graph.components();
    let mut trace = Vec::with_capacity(epochs);

    for epoch in 1..=epochs {
        components.shuffle(&mut rng);
        let mut sum = LossParts::default();
        for chunk in components.chunks(model.config.batch_size) {
            let mut vertices: Vec<usize> = chunk.iter().flatten().copied().collect();
            vertices.sort_unstable();
            let batch = Batch::new(&data, vertices);
            let noise = Noise::sample(&batch, &model.config.latent_dims, &mut rng);
            let parts = model.gradients(&batch, &noise)?;
            if !parts.total.is_finite() {
                return Err(Error::NonFiniteLoss { epoch });
            }
            adam.step(&mut model.store)?;
            sum.total += parts.total;
            sum.reconstruction += parts.reconstruction;
            sum.kl += parts.kl;
        }
        trace.push(LossRecord { epoch, total: sum.total, reconstruction: sum.reconstruction, kl: sum.kl });
    }
    Ok(trace)
}

/// Gives every primary row a fresh sequential token (`1`, `2`, …) and every
/// secondary row its parent's token, following the graph's links.
pub fn restore_identifiers(tables: &mut [TableData], links: &[Link], graph: &RelationalGraph) -> Result<()> {
    let index = |tables: &[TableData], name: &str| {
        tables.iter().position(|t| t.name == name).ok_or_else(|| Error::UnknownTable(name.to_string()))
    };
    let column = |table: &TableData, attribute: &str| {
        table.attribute_index(attribute).ok_or_else(|| Error::UnknownAttribute {
            table: table.name.clone(),
            attribute: attribute.to_string(),
        })
    };
    for link in links {
        let p = index(tables, &link.primary)?;
        let pc = column(&tables[p], &link.identifier)?;
        for (r, row) in tables[p].rows.iter_mut().enumerate() {
            row.values[pc] = Value::Id((r + 1).to_string());
        }
    }
    for (l, link) in links.iter().enumerate() {
        let p = index(tables, &link.primary)?;
        let s = index(tables, &link.secondary)?;
        let pc = column(&tables[p], &link.identifier)?;
        let sc = column(&tables[s], &link.identifier)?;
        let parents = graph.parent_table(l, s);
        let offset = graph.table_range(p).start;
        for (r, parent) in parents.into_iter().enumerate() {
            let parent = parent.ok_or_else(|| {
                Error::InvalidArgument(format!("row {r} of `{}` has no parent in the graph", link.secondary))
            })?;
            let token = tables[p].rows[parent - offset].values[pc].clone();
            tables[s].rows[r].values[sc] = token;
        }
    }
    Ok(())
}

/// Synthetic dataset with the real dataset's shape and link topology.
pub fn synthesize(model: &GraphVaeModel, dataset: &RelationalDataset, seed: u64) -> Result<RelationalDataset> {
    model.check_fingerprint(dataset)?;
    let graph = build_graph(dataset)?;
    let mut rng = seed::stage_rng(seed, seed::STAGE_GENERATE);
    let encoded = model.generate_encoded(&graph, &mut rng)?;
    let mut tables = encoded
        .iter()
        .zip(&model.codecs)
        .map(|(e, c)| decode_table(e, c))
        .collect::<Result<Vec<_>>>()?;
    restore_identifiers(&mut tables, &dataset.links, &graph)?;
    Ok(RelationalDataset { tables, links: dataset.links.clone() })
}
