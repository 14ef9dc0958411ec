//! Variational encoder: label-conditioned GraphSAGE layers with optional
//! edge-type and edge-time message terms, ending in mu / log-sigma heads.

use crate::error::{ModelError, TensorError};
use crate::graph::{Graph, Subgraph};
use crate::rng::Rng;
use crate::tensor::Tensor;

/// Hidden width rule: largest power of two no greater than d/2, floored at 4.
pub fn hidden_width(feature_dim: usize) -> usize {
    let half = feature_dim / 2;
    if half < 4 {
        return 4;
    }
    let mut w = 4;
    while w * 2 <= half {
        w *= 2;
    }
    w
}

/// Trigonometric temporal embedding: dimension 2k holds
/// sin(t / 10000^(2k/dim)), dimension 2k+1 the matching cosine.
pub fn temporal_embedding(t: u64, dim: usize) -> Result<Vec<f64>, ModelError> {
    if dim % 2 != 0 {
        return Err(ModelError::Config(format!("temporal embedding dim must be even, got {dim}")));
    }
    let mut out = Vec::with_capacity(dim);
    let tf = t as f64;
    for k in 0..dim / 2 {
        let freq = 10000f64.powf(2.0 * k as f64 / dim as f64);
        out.push((tf / freq).sin());
        out.push((tf / freq).cos());
    }
    Ok(out)
}

/// One GraphSAGE layer: out[i] = act(W * cat(h[i], mean of incoming messages)).
/// The message for edge (i, j) is h[j] plus optional type and time terms.
pub struct SageLayer {
    /// d_out x 2 d_in.
    pub weight: Tensor,
    /// P x d_in; row p-1 is the embedding added for edge type p.
    pub type_map: Option<Tensor>,
    /// d_in x d_in applied to the temporal embedding.
    pub time_map: Option<Tensor>,
    pub relu: bool,
}

impl SageLayer {
    pub fn new(rng: &mut Rng, d_in: usize, d_out: usize, num_types: u32, with_time: bool, relu: bool) -> SageLayer {
        let std = (1.0 / (2 * d_in) as f64).sqrt();
        SageLayer {
            weight: rng.gaussian_param(d_out, 2 * d_in, std),
            type_map: (num_types > 0).then(|| rng.gaussian_param(num_types as usize, d_in, std)),
            time_map: with_time.then(|| rng.gaussian_param(d_in, d_in, std)),
            relu,
        }
    }

    pub fn params(&self, prefix: &str) -> Vec<(String, Tensor)> {
        let mut out = vec![(format!("{prefix}.weight"), self.weight.clone())];
        if let Some(t) = &self.type_map {
            out.push((format!("{prefix}.type_map"), t.clone()));
        }
        if let Some(t) = &self.time_map {
            out.push((format!("{prefix}.time_map"), t.clone()));
        }
        out
    }

    /// Edge-wise messages for the subgraph given current embeddings `h` (m x d_in).
    pub fn edge_messages(&self, h: &Tensor, g: &Graph, sub: &Subgraph) -> Result<Tensor, TensorError> {
        // edge (i, j) delivers h_j to node i
        let origin: Vec<usize> = sub.edges.iter().map(|&(_, j, _)| j).collect();
        let mut msg = h.gather_rows(&origin)?;
        if let Some(type_map) = &self.type_map {
            let types = g.edge_type.as_ref().expect("typed layer on untyped graph");
            let p = type_map.rows();
            let mut onehot = vec![0.0; sub.edges.len() * p];
            for (r, &(_, _, ei)) in sub.edges.iter().enumerate() {
                let ty = types[ei] as usize;
                onehot[r * p + (ty - 1)] = 1.0;
            }
            let onehot = Tensor::matrix(sub.edges.len(), p, onehot);
            msg = msg.add(&onehot.matmul(type_map)?)?;
        }
        if let Some(time_map) = &self.time_map {
            let times = g.edge_time.as_ref().expect("timed layer on untimed graph");
            let d_in = h.cols();
            let mut te = Vec::with_capacity(sub.edges.len() * d_in);
            for &(_, _, ei) in &sub.edges {
                te.extend(temporal_embedding(times[ei], d_in).expect("even hidden width"));
            }
            let te = Tensor::matrix(sub.edges.len(), d_in, te);
            msg = msg.add(&te.matmul(time_map)?)?;
        }
        Ok(msg)
    }

    pub fn forward(&self, h: &Tensor, g: &Graph, sub: &Subgraph) -> Result<Tensor, TensorError> {
        let m = sub.nodes.len();
        let agg = if sub.edges.is_empty() {
            Tensor::filled(m, h.cols(), 0.0)
        } else {
            let msg = self.edge_messages(h, g, sub)?;
            let receiver: Vec<usize> = sub.edges.iter().map(|&(i, _, _)| i).collect();
            msg.segment_mean(&receiver, m)?
        };
        let out = h.concat_cols(&agg)?.matmul_nt(&self.weight)?;
        Ok(if self.relu { out.relu() } else { out })
    }
}

/// All encoder parameters: class conditioning row plus shared / mu / log-sigma
/// GraphSAGE heads (one layer each).
pub struct EncoderParams {
    /// 1 x d class-conditioning row added to outlier rows of H^0.
    pub class_weight: Tensor,
    pub shared: SageLayer,
    pub mu_head: SageLayer,
    pub logsig_head: SageLayer,
    pub feature_dim: usize,
    pub latent_dim: usize,
}

impl EncoderParams {
    pub fn new(rng: &mut Rng, feature_dim: usize, num_types: u32, with_time: bool) -> EncoderParams {
        let h = hidden_width(feature_dim);
        EncoderParams {
            class_weight: rng.gaussian_param(1, feature_dim, 0.1),
            shared: SageLayer::new(rng, feature_dim, h, num_types, with_time, true),
            // heads stay linear so latent means can go negative
            mu_head: SageLayer::new(rng, h, h, num_types, with_time, false),
            logsig_head: SageLayer::new(rng, h, h, num_types, with_time, false),
            feature_dim,
            latent_dim: h,
        }
    }

    pub fn params(&self) -> Vec<(String, Tensor)> {
        let mut out = vec![("encoder.class_weight".to_string(), self.class_weight.clone())];
        out.extend(self.shared.params("encoder.shared"));
        out.extend(self.mu_head.params("encoder.mu"));
        out.extend(self.logsig_head.params("encoder.logsig"));
        out
    }
}

/// Latent rows for one partition.
pub struct LatentBatch {
    pub z: Tensor,
    pub mu: Tensor,
    pub log_sigma: Tensor,
    /// Numeric labels aligned with the partition's node order.
    pub y: Vec<f64>,
}

/// H^0 = X + w_C * y, rows with y=1 shifted by the class row.
pub fn init_embedding(x: &Tensor, y: &[f64], class_weight: &Tensor) -> Result<Tensor, TensorError> {
    let y_col = Tensor::matrix(y.len(), 1, y.to_vec());
    x.add(&y_col.matmul(class_weight)?)
}

/// Encode one partition. Noise is drawn from `rng`; pass `None` for the
/// deterministic mean embedding (epsilon = 0, so Z = mu).
pub fn encode(
    g: &Graph,
    sub: &Subgraph,
    params: &EncoderParams,
    rng: Option<&mut Rng>,
) -> Result<LatentBatch, ModelError> {
    let m = sub.nodes.len();
    let d = params.feature_dim;
    let mut x = Vec::with_capacity(m * d);
    let mut y = Vec::with_capacity(m);
    for &gi in &sub.nodes {
        x.extend_from_slice(g.feature_row(gi));
        y.push(g.labels[gi].as_f64());
    }
    let x = Tensor::matrix(m, d, x);
    let h0 = init_embedding(&x, &y, &params.class_weight)?;
    let h1 = params.shared.forward(&h0, g, sub)?;
    let mu = params.mu_head.forward(&h1, g, sub)?;
    let log_sigma = params.logsig_head.forward(&h1, g, sub)?;
    if !mu.all_finite() || !log_sigma.all_finite() {
        return Err(TensorError::NonFinite {
            context: "encoder mu/log-sigma head".into(),
        }
        .into());
    }
    let z = match rng {
        Some(rng) => {
            let eps = rng.gaussian(m, params.latent_dim);
            mu.add(&log_sigma.exp().mul(&eps)?)?
        }
        None => mu.clone(),
    };
    Ok(LatentBatch { z, mu, log_sigma, y })
}
