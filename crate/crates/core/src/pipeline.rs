//! Training orchestration: weighted VAE losses, per-partition VAE training,
//! latent diffusion training, checkpointing, and graph augmentation.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::diffusion::{denoise_loss, sample_latents, Denoiser, NoiseSchedule};
use crate::encoder::{encode, EncoderParams};
use crate::error::{ModelError, TensorError};
use crate::generator::{
    condition, decode_features, generate_graph, score_edges, time_regression, type_logits,
    GeneratorParams, TimeScaler,
};
use crate::graph::{negative_sample, partition_graph, Graph, Subgraph};
use crate::optim::AdamState;
use crate::rng::Rng;
use crate::tensor::Tensor;

/// Hyperparameters for both training stages.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr: f64,
    pub epochs: usize,
    pub patience: usize,
    /// Feature-reconstruction weight.
    pub w_feature: f64,
    /// Edge-reconstruction weight.
    pub w_edge: f64,
    /// Time-reconstruction weight.
    pub w_time: f64,
    /// Type-reconstruction weight.
    pub w_type: f64,
    /// KL-divergence weight.
    pub beta: f64,
    pub neg_ratio: usize,
    /// Partition size; 256 suits desk-scale graphs, 2048 suits large graphs.
    pub partition_size: usize,
    pub diffusion_steps: usize,
    pub diffusion_batch: usize,
    /// Largest noise level of the diffusion schedule. The 80.0 default suits
    /// wide-range latents; drop it toward the latent scale (roughly the row
    /// norm) for sharper samples.
    pub sigma_max: f64,
    pub seed: u64,
    /// Edge-scoring block size at generation time; defaults to partition_size.
    pub block_size: Option<usize>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 0.001,
            epochs: 100,
            patience: 50,
            w_feature: 1.0,
            w_edge: 0.5,
            w_time: 1.0,
            w_type: 0.3,
            beta: 0.001,
            neg_ratio: 1,
            partition_size: 256,
            diffusion_steps: 50,
            diffusion_batch: 256,
            sigma_max: 80.0,
            seed: 0,
            block_size: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let weights = [self.w_feature, self.w_edge, self.w_time, self.w_type, self.beta];
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(ModelError::Config("loss weights must be non-negative".into()));
        }
        if self.beta >= 1.0 {
            return Err(ModelError::Config("beta must be < 1".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(ModelError::Config("learning rate must be positive".into()));
        }
        if self.epochs == 0 || self.partition_size == 0 || self.neg_ratio == 0 {
            return Err(ModelError::Config(
                "epochs, partition_size, and neg_ratio must be >= 1".into(),
            ));
        }
        if self.diffusion_steps == 0 || self.diffusion_batch == 0 {
            return Err(ModelError::Config("diffusion_steps and diffusion_batch must be >= 1".into()));
        }
        self.schedule().validate()?;
        Ok(())
    }

    pub fn effective_block_size(&self) -> usize {
        self.block_size.unwrap_or(self.partition_size)
    }

    pub fn schedule(&self) -> NoiseSchedule {
        NoiseSchedule {
            n_steps: self.diffusion_steps,
            sigma_max: self.sigma_max,
            ..NoiseSchedule::default()
        }
    }
}

/// Mean over nodes of the squared reconstruction error ||x_i - x_hat_i||^2.
pub fn loss_feature(x: &Tensor, x_hat: &Tensor) -> Result<Tensor, TensorError> {
    let diff = x.sub(x_hat)?;
    Ok(diff.mul(&diff)?.sum_all().scale(1.0 / x.rows() as f64))
}

/// Binary cross-entropy of edge scores against 0/1 labels.
pub fn loss_edge(labels: &[f64], scores: &Tensor) -> Result<Tensor, TensorError> {
    let y = Tensor::matrix(labels.len(), 1, labels.to_vec());
    let pos = y.mul(&scores.ln_clamped())?;
    let one_minus_y = y.scale(-1.0).add_scalar(1.0);
    let one_minus_s = scores.scale(-1.0).add_scalar(1.0);
    let neg = one_minus_y.mul(&one_minus_s.ln_clamped())?;
    Ok(pos.add(&neg)?.mean_all().scale(-1.0))
}

/// Mean squared error of normalized timestamps over edges.
pub fn loss_time(targets: &[f64], preds: &Tensor) -> Result<Tensor, TensorError> {
    let t = Tensor::matrix(targets.len(), 1, targets.to_vec());
    let diff = preds.sub(&t)?;
    Ok(diff.mul(&diff)?.mean_all())
}

/// Mean negative log-probability of the true edge type. `types` are 1-based
/// ids aligned with the distribution's rows.
pub fn loss_type(types: &[u32], distribution: &Tensor) -> Result<Tensor, TensorError> {
    let cols: Vec<usize> = types.iter().map(|&p| (p - 1) as usize).collect();
    let picked = distribution.select_per_row(&cols)?;
    Ok(picked.ln_clamped().mean_all().scale(-1.0))
}

/// KL divergence of a diagonal Gaussian from the standard normal, averaged
/// over nodes: mean_i 1/2 sum_j (mu^2 + sigma^2 - 1 - 2 log sigma).
pub fn loss_kl(mu: &Tensor, log_sigma: &Tensor) -> Result<Tensor, TensorError> {
    let var = log_sigma.scale(2.0).exp();
    let inner = mu
        .mul(mu)?
        .add(&var)?
        .add_scalar(-1.0)
        .sub(&log_sigma.scale(2.0))?;
    Ok(inner.sum_all().scale(0.5 / mu.rows() as f64))
}

/// Individual loss terms for one partition; absent channels are zero scalars.
pub struct LossComponents {
    pub feature: Tensor,
    pub edge: Tensor,
    pub time: Tensor,
    pub ty: Tensor,
    pub kl: Tensor,
}

/// Weighted total training loss.
pub fn loss_vae(c: &LossComponents, config: &TrainConfig) -> Result<Tensor, TensorError> {
    c.feature
        .scale(config.w_feature)
        .add(&c.edge.scale(config.w_edge))?
        .add(&c.time.scale(config.w_time))?
        .add(&c.ty.scale(config.w_type))?
        .add(&c.kl.scale(config.beta))
}

/// One row of the loss-history CSV.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct LossRow {
    pub epoch: usize,
    pub loss_x: f64,
    pub loss_e: f64,
    pub loss_t: f64,
    pub loss_p: f64,
    pub loss_kl: f64,
    pub total: f64,
}

pub fn write_loss_history(path: &Path, rows: &[LossRow]) -> Result<(), ModelError> {
    let mut out = String::from("epoch,loss_x,loss_e,loss_t,loss_p,loss_kl,total\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.epoch, r.loss_x, r.loss_e, r.loss_t, r.loss_p, r.loss_kl, r.total
        ));
    }
    std::fs::write(path, out).map_err(|e| ModelError::Checkpoint(format!("{}: {e}", path.display())))
}

/// Both halves of the autoencoder.
pub struct VaeParams {
    pub encoder: EncoderParams,
    pub generator: GeneratorParams,
}

impl VaeParams {
    pub fn new(rng: &mut Rng, g: &Graph) -> VaeParams {
        let encoder = EncoderParams::new(rng, g.d, g.num_edge_types, g.has_time());
        let generator = GeneratorParams::new(rng, g.d, encoder.latent_dim, g.num_edge_types, g.has_time());
        VaeParams { encoder, generator }
    }

    pub fn params(&self) -> Vec<(String, Tensor)> {
        let mut out = self.encoder.params();
        out.extend(self.generator.params());
        out
    }
}

pub struct VaeTrainResult {
    pub params: VaeParams,
    /// Final deterministic per-node latent means, n x d_latent.
    pub mu: Tensor,
    pub loss_history: Vec<LossRow>,
    pub time_scaler: Option<TimeScaler>,
}

fn snapshot(params: &[(String, Tensor)]) -> Vec<Vec<f64>> {
    params.iter().map(|(_, t)| t.data()).collect()
}

fn restore(params: &[(String, Tensor)], snap: &[Vec<f64>]) {
    for ((_, t), s) in params.iter().zip(snap) {
        t.set_data(s);
    }
}

/// Loss terms for one partition under the current parameters. Noise for the
/// reparameterization and for negative sampling comes from `rng`; pass `None`
/// to evaluate at the deterministic mean without an edge set (unused here but
/// mirrored by the deterministic encoding pass below).
fn partition_loss(
    g: &Graph,
    sub: &Subgraph,
    vae: &VaeParams,
    config: &TrainConfig,
    scaler: Option<&TimeScaler>,
    rng: &mut Rng,
) -> Result<LossComponents, ModelError> {
    let m = sub.nodes.len();
    let latent = encode(g, sub, &vae.encoder, Some(rng))?;
    let z_c = condition(&latent.z, &latent.y, &vae.generator.class_weight)?;

    let mut x = Vec::with_capacity(m * g.d);
    for &gi in &sub.nodes {
        x.extend_from_slice(g.feature_row(gi));
    }
    let x = Tensor::matrix(m, g.d, x);
    let x_hat = decode_features(&z_c, &vae.generator.feature_map)?;
    let feature = loss_feature(&x, &x_hat)?;

    let zero = || Tensor::scalar(0.0);
    let (edge, time, ty) = if m >= 2 {
        let set = negative_sample(rng, g, sub, config.neg_ratio);
        let edge = if set.pairs.is_empty() {
            zero()
        } else {
            let pairs: Vec<(usize, usize)> = set.pairs.iter().map(|&(i, j, _)| (i, j)).collect();
            let labels: Vec<f64> = set.pairs.iter().map(|&(_, _, l)| l).collect();
            let scores = score_edges(&z_c, &pairs, &vae.generator.edge_scorer)?;
            loss_edge(&labels, &scores)?
        };
        let positives: Vec<(usize, usize)> = sub.edges.iter().map(|&(s, t, _)| (s, t)).collect();
        let time = match (&vae.generator.time_reg, scaler) {
            (Some(tr), Some(scaler)) if !positives.is_empty() => {
                let times = g.edge_time.as_ref().expect("timed generator without edge times");
                let targets: Vec<f64> = sub.edges.iter().map(|&(_, _, ei)| scaler.scale(times[ei])).collect();
                let preds = time_regression(&z_c, &positives, tr)?;
                loss_time(&targets, &preds)?
            }
            _ => zero(),
        };
        let ty = match &vae.generator.type_map {
            Some(tm) if !positives.is_empty() => {
                let types = g.edge_type.as_ref().expect("typed generator without edge types");
                let targets: Vec<u32> = sub.edges.iter().map(|&(_, _, ei)| types[ei]).collect();
                let dist = type_logits(&z_c, &positives, tm)?.softmax_rows();
                loss_type(&targets, &dist)?
            }
            _ => zero(),
        };
        (edge, time, ty)
    } else {
        (zero(), zero(), zero())
    };

    let kl = loss_kl(&latent.mu, &latent.log_sigma)?;
    Ok(LossComponents { feature, edge, time, ty, kl })
}

/// First training stage: fit the variational autoencoder per partition and
/// return the best parameters plus deterministic per-node latent means.
pub fn train_vae(g: &Graph, config: &TrainConfig) -> Result<VaeTrainResult, ModelError> {
    config.validate()?;
    g.validate()?;
    if !g.train_mask.iter().any(|&m| m) {
        return Err(ModelError::Config("graph has no training nodes".into()));
    }

    let root = Rng::new(config.seed);
    let mut init_rng = root.derive(1);
    let vae = VaeParams::new(&mut init_rng, g);
    let all_params = vae.params();
    let mut adam = AdamState::new(config.lr);

    let scaler = g.edge_time.as_ref().map(|t| TimeScaler::fit(t));
    let partitioning = partition_graph(g, config.partition_size);
    let subs: Vec<Subgraph> = (0..partitioning.num_partitions)
        .map(|pid| Subgraph::extract(g, &partitioning.members(pid)))
        .collect();

    let mut history = Vec::new();
    let mut best_total = f64::INFINITY;
    let mut best_snap = snapshot(&all_params);
    let mut since_best = 0usize;

    for epoch in 0..config.epochs {
        let mut epoch_rng = root.derive(1000 + epoch as u64);
        let mut sums = [0.0f64; 6];
        for (pid, sub) in subs.iter().enumerate() {
            let comps = partition_loss(g, sub, &vae, config, scaler.as_ref(), &mut epoch_rng)?;
            let total = loss_vae(&comps, config)?;
            if !total.value().is_finite() {
                return Err(ModelError::Diverged {
                    epoch,
                    partition: pid,
                    message: "non-finite total loss".into(),
                });
            }
            for (slot, t) in sums.iter_mut().zip([
                &comps.feature,
                &comps.edge,
                &comps.time,
                &comps.ty,
                &comps.kl,
                &total,
            ]) {
                *slot += t.value();
            }
            total.backward()?;
            adam.step(&all_params)?;
        }
        let k = subs.len() as f64;
        history.push(LossRow {
            epoch,
            loss_x: sums[0] / k,
            loss_e: sums[1] / k,
            loss_t: sums[2] / k,
            loss_p: sums[3] / k,
            loss_kl: sums[4] / k,
            total: sums[5] / k,
        });
        let total = sums[5] / k;
        if total < best_total {
            best_total = total;
            best_snap = snapshot(&all_params);
            since_best = 0;
        } else {
            since_best += 1;
            if since_best > config.patience {
                break;
            }
        }
    }
    restore(&all_params, &best_snap);

    // deterministic per-node means under the best parameters
    let latent_dim = vae.encoder.latent_dim;
    let mut mu = vec![0.0; g.n * latent_dim];
    for sub in &subs {
        let batch = encode(g, sub, &vae.encoder, None)?;
        let rows = batch.mu.data();
        for (li, &gi) in sub.nodes.iter().enumerate() {
            mu[gi * latent_dim..(gi + 1) * latent_dim]
                .copy_from_slice(&rows[li * latent_dim..(li + 1) * latent_dim]);
        }
    }
    Ok(VaeTrainResult {
        params: vae,
        mu: Tensor::matrix(g.n, latent_dim, mu),
        loss_history: history,
        time_scaler: scaler,
    })
}

pub struct DiffusionTrainResult {
    pub model: Denoiser,
    pub schedule: NoiseSchedule,
    pub loss_history: Vec<f64>,
}

/// Second training stage: denoising score matching on the latent means.
pub fn train_diffusion(mu: &Tensor, y: &[f64], config: &TrainConfig) -> Result<DiffusionTrainResult, ModelError> {
    config.validate()?;
    let (n, d) = mu.shape();
    if n == 0 {
        return Err(ModelError::Config("diffusion training needs at least one latent row".into()));
    }
    assert_eq!(y.len(), n, "label vector must align with latent rows");
    let mu = mu.detach();
    let schedule = config.schedule();
    let root = Rng::new(config.seed.wrapping_add(0x9e3779b97f4a7c15));
    let mut init_rng = root.derive(2);
    let model = Denoiser::new(&mut init_rng, d);
    let params = model.params();
    let mut adam = AdamState::new(config.lr);

    let mut history = Vec::new();
    let mut best_loss = f64::INFINITY;
    let mut best_snap = snapshot(&params);
    let mut since_best = 0usize;

    for epoch in 0..config.epochs {
        let mut epoch_rng = root.derive(2000 + epoch as u64);
        let mut order: Vec<usize> = (0..n).collect();
        epoch_rng.shuffle(&mut order);
        let mut epoch_loss = 0.0;
        let mut batches = 0usize;
        for chunk in order.chunks(config.diffusion_batch) {
            let z0 = mu.gather_rows(chunk)?;
            let yb: Vec<f64> = chunk.iter().map(|&i| y[i]).collect();
            let loss = denoise_loss(&model, &z0, &yb, &schedule, &mut epoch_rng)?;
            let v = loss.value();
            if !v.is_finite() {
                return Err(ModelError::Diverged {
                    epoch,
                    partition: batches,
                    message: "non-finite denoising loss".into(),
                });
            }
            epoch_loss += v;
            batches += 1;
            loss.backward()?;
            adam.step(&params)?;
        }
        let loss = epoch_loss / batches as f64;
        history.push(loss);
        if loss < best_loss {
            best_loss = loss;
            best_snap = snapshot(&params);
            since_best = 0;
        } else {
            since_best += 1;
            if since_best > config.patience {
                break;
            }
        }
    }
    restore(&params, &best_snap);
    Ok(DiffusionTrainResult { model, schedule, loss_history: history })
}

/// Everything needed to augment new data: both model stages plus the data
/// fingerprint they were trained against.
pub struct Checkpoint {
    pub config: TrainConfig,
    pub vae: VaeParams,
    pub denoiser: Denoiser,
    pub schedule: NoiseSchedule,
    pub time_scaler: Option<TimeScaler>,
    pub loss_history: Vec<LossRow>,
    pub feature_dim: usize,
    pub latent_dim: usize,
    pub num_edge_types: u32,
    pub with_time: bool,
}

/// Run both training stages and assemble a checkpoint.
pub fn fit(g: &Graph, config: &TrainConfig) -> Result<Checkpoint, ModelError> {
    let vae_out = train_vae(g, config)?;
    let y: Vec<f64> = g.labels.iter().map(|l| l.as_f64()).collect();
    let diff_out = train_diffusion(&vae_out.mu, &y, config)?;
    Ok(Checkpoint {
        config: config.clone(),
        latent_dim: vae_out.params.encoder.latent_dim,
        vae: vae_out.params,
        denoiser: diff_out.model,
        schedule: diff_out.schedule,
        time_scaler: vae_out.time_scaler,
        loss_history: vae_out.loss_history,
        feature_dim: g.d,
        num_edge_types: g.num_edge_types,
        with_time: g.has_time(),
    })
}

/// Sample `n_hat` synthetic outlier nodes from a trained checkpoint as a
/// standalone graph. `n_hat` defaults to the number of train-mask outliers
/// of `g`.
pub fn synthesize(g: &Graph, ckpt: &Checkpoint, n_hat: Option<usize>, rng: &mut Rng) -> Result<Graph, ModelError> {
    if g.d != ckpt.feature_dim || g.num_edge_types != ckpt.num_edge_types || g.has_time() != ckpt.with_time {
        return Err(ModelError::Checkpoint(format!(
            "checkpoint fingerprint (d={}, P={}, timed={}) does not match graph (d={}, P={}, timed={})",
            ckpt.feature_dim, ckpt.num_edge_types, ckpt.with_time, g.d, g.num_edge_types, g.has_time()
        )));
    }
    let n_hat = match n_hat {
        Some(n) => n,
        None => {
            let k = g.count_outliers(&g.train_mask);
            if k == 0 {
                return Err(ModelError::Config(
                    "no outliers in the training split; pass an explicit synthetic node count".into(),
                ));
            }
            k
        }
    };
    let model = ckpt.denoiser.detached();
    let z0 = sample_latents(&model, n_hat, ckpt.latent_dim, &ckpt.schedule, rng, false)?;
    generate_graph(
        &z0,
        &ckpt.vae.generator,
        ckpt.config.effective_block_size(),
        ckpt.time_scaler.as_ref(),
    )
}

/// Sample synthetic outlier nodes and batch them onto the real graph.
pub fn augment(g: &Graph, ckpt: &Checkpoint, n_hat: Option<usize>, rng: &mut Rng) -> Result<Graph, ModelError> {
    let synth = synthesize(g, ckpt, n_hat, rng)?;
    Ok(crate::graph::batch_graphs(g, &synth)?)
}

const CHECKPOINT_VERSION: u8 = 1;

#[derive(Serialize, Deserialize)]
struct CheckpointMeta {
    config: TrainConfig,
    feature_dim: usize,
    latent_dim: usize,
    num_edge_types: u32,
    with_time: bool,
    time_scaler: Option<TimeScaler>,
    schedule: NoiseSchedule,
    loss_history: Vec<LossRow>,
    /// (name, rows, cols) for every float array, in file order.
    arrays: Vec<(String, usize, usize)>,
}

impl Checkpoint {
    fn all_params(&self) -> Vec<(String, Tensor)> {
        let mut out = self.vae.params();
        out.extend(self.denoiser.params());
        out
    }

    /// Serialize: version byte, little-endian u64 JSON length, meta JSON,
    /// then each float array little-endian in the declared order.
    pub fn save(&self, path: &Path) -> Result<(), ModelError> {
        let params = self.all_params();
        let meta = CheckpointMeta {
            config: self.config.clone(),
            feature_dim: self.feature_dim,
            latent_dim: self.latent_dim,
            num_edge_types: self.num_edge_types,
            with_time: self.with_time,
            time_scaler: self.time_scaler,
            schedule: self.schedule,
            loss_history: self.loss_history.clone(),
            arrays: params.iter().map(|(n, t)| (n.clone(), t.rows(), t.cols())).collect(),
        };
        let meta_json = serde_json::to_vec(&meta).map_err(|e| ModelError::Checkpoint(e.to_string()))?;
        let err = |e: std::io::Error| ModelError::Checkpoint(format!("{}: {e}", path.display()));
        let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(err)?);
        let err = |e: std::io::Error| ModelError::Checkpoint(format!("{}: {e}", path.display()));
        f.write_all(&[CHECKPOINT_VERSION]).map_err(err)?;
        f.write_all(&(meta_json.len() as u64).to_le_bytes()).map_err(err)?;
        f.write_all(&meta_json).map_err(err)?;
        for (_, t) in &params {
            for v in t.data() {
                f.write_all(&v.to_le_bytes()).map_err(err)?;
            }
        }
        f.flush().map_err(err)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Checkpoint, ModelError> {
        let err = |m: String| ModelError::Checkpoint(format!("{}: {m}", path.display()));
        let bytes = std::fs::read(path).map_err(|e| err(e.to_string()))?;
        let mut cursor = std::io::Cursor::new(&bytes);
        let mut version = [0u8; 1];
        cursor.read_exact(&mut version).map_err(|e| err(e.to_string()))?;
        if version[0] != CHECKPOINT_VERSION {
            return Err(err(format!("unsupported checkpoint version {}", version[0])));
        }
        let mut len = [0u8; 8];
        cursor.read_exact(&mut len).map_err(|e| err(e.to_string()))?;
        let meta_len = u64::from_le_bytes(len);
        if meta_len > bytes.len() as u64 {
            return Err(err(format!("declared meta length {meta_len} exceeds file size")));
        }
        let mut meta_json = vec![0u8; meta_len as usize];
        cursor.read_exact(&mut meta_json).map_err(|e| err(e.to_string()))?;
        let meta: CheckpointMeta =
            serde_json::from_slice(&meta_json).map_err(|e| err(e.to_string()))?;

        // rebuild the parameter skeleton, then overwrite every array by name
        let mut rng = Rng::new(0);
        let encoder = EncoderParams::new(&mut rng, meta.feature_dim, meta.num_edge_types, meta.with_time);
        let generator = GeneratorParams::new(&mut rng, meta.feature_dim, meta.latent_dim, meta.num_edge_types, meta.with_time);
        let denoiser = Denoiser::new(&mut rng, meta.latent_dim);
        let ckpt = Checkpoint {
            config: meta.config,
            vae: VaeParams { encoder, generator },
            denoiser,
            schedule: meta.schedule,
            time_scaler: meta.time_scaler,
            loss_history: meta.loss_history,
            feature_dim: meta.feature_dim,
            latent_dim: meta.latent_dim,
            num_edge_types: meta.num_edge_types,
            with_time: meta.with_time,
        };
        let params = ckpt.all_params();
        if params.len() != meta.arrays.len() {
            return Err(err(format!(
                "expected {} float arrays, file declares {}",
                params.len(),
                meta.arrays.len()
            )));
        }
        for ((name, t), (fname, rows, cols)) in params.iter().zip(&meta.arrays) {
            if name != fname || t.rows() != *rows || t.cols() != *cols {
                return Err(err(format!(
                    "array mismatch: expected {name} {}x{}, file has {fname} {rows}x{cols}",
                    t.rows(),
                    t.cols()
                )));
            }
            let n = rows * cols;
            let mut data = Vec::with_capacity(n);
            for _ in 0..n {
                let mut b = [0u8; 8];
                cursor.read_exact(&mut b).map_err(|e| err(e.to_string()))?;
                data.push(f64::from_le_bytes(b));
            }
            t.set_data(&data);
        }
        if cursor.position() != bytes.len() as u64 {
            return Err(err("trailing bytes after declared arrays".into()));
        }
        Ok(ckpt)
    }
}
