//! Downstream outlier detector, imbalance-robust ranking metrics,
//! generation-quality histograms, and the baseline-vs-augmented benchmark
//! runner.

use std::path::Path;
use std::time::Instant;

use crate::encoder::{hidden_width, SageLayer};
use crate::error::ModelError;
use crate::graph::{Graph, Label, Subgraph};
use crate::optim::AdamState;
use crate::pipeline::{augment, fit, Checkpoint, TrainConfig};
use crate::rng::Rng;
use crate::tensor::Tensor;

/// Two plain GraphSAGE layers plus a linear scoring head emitting one logit
/// per node. No label conditioning: the detector only sees features and
/// structure.
pub struct DetectorParams {
    pub layer1: SageLayer,
    pub layer2: SageLayer,
    /// 1 x hidden scoring head.
    pub head: Tensor,
}

impl DetectorParams {
    pub fn new(rng: &mut Rng, g: &Graph) -> DetectorParams {
        let h = hidden_width(g.d);
        DetectorParams {
            layer1: SageLayer::new(rng, g.d, h, g.num_edge_types, g.has_time(), true),
            layer2: SageLayer::new(rng, h, h, g.num_edge_types, g.has_time(), true),
            head: rng.gaussian_param(1, h, (1.0 / h as f64).sqrt()),
        }
    }

    pub fn params(&self) -> Vec<(String, Tensor)> {
        let mut out = self.layer1.params("detector.l1");
        out.extend(self.layer2.params("detector.l2"));
        out.push(("detector.head".to_string(), self.head.clone()));
        out
    }

    /// Outlier logits for every node (n x 1).
    pub fn logits(&self, g: &Graph, sub: &Subgraph) -> Result<Tensor, ModelError> {
        let m = sub.nodes.len();
        let mut x = Vec::with_capacity(m * g.d);
        for &gi in &sub.nodes {
            x.extend_from_slice(g.feature_row(gi));
        }
        let h = Tensor::matrix(m, g.d, x);
        let h = self.layer1.forward(&h, g, sub)?;
        let h = self.layer2.forward(&h, g, sub)?;
        Ok(h.matmul_nt(&self.head)?)
    }
}

#[derive(Clone, Copy, Debug, serde::Serialize, serde::Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct DetectorConfig {
    pub lr: f64,
    pub epochs: usize,
    pub seed: u64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        DetectorConfig { lr: 0.01, epochs: 60, seed: 0 }
    }
}

/// Train the detector with binary cross-entropy on the train mask, keeping
/// the parameters from the epoch with the best validation AUC (falling back
/// to the final epoch when the validation split is single-class).
pub fn train_detector(g: &Graph, config: &DetectorConfig) -> Result<DetectorParams, ModelError> {
    g.validate().map_err(ModelError::from)?;
    let train_idx: Vec<usize> = (0..g.n).filter(|&i| g.train_mask[i]).collect();
    let train_y: Vec<f64> = train_idx.iter().map(|&i| g.labels[i].as_f64()).collect();
    if train_y.iter().all(|&y| y == 0.0) || train_y.iter().all(|&y| y == 1.0) {
        return Err(ModelError::Eval("training split contains a single class".into()));
    }
    let val_idx: Vec<usize> = (0..g.n).filter(|&i| g.val_mask[i]).collect();
    let val_y: Vec<f64> = val_idx.iter().map(|&i| g.labels[i].as_f64()).collect();
    let val_usable = val_y.iter().any(|&y| y == 0.0) && val_y.iter().any(|&y| y == 1.0);

    let mut rng = Rng::new(config.seed).derive(3);
    let model = DetectorParams::new(&mut rng, g);
    let params = model.params();
    let mut adam = AdamState::new(config.lr);
    let all: Vec<usize> = (0..g.n).collect();
    let sub = Subgraph::extract(g, &all);

    let mut best_auc = f64::NEG_INFINITY;
    let mut best_snap: Vec<Vec<f64>> = params.iter().map(|(_, t)| t.data()).collect();
    for epoch in 0..config.epochs {
        let logits = model.logits(g, &sub)?;
        let scores = logits.gather_rows(&train_idx)?.sigmoid();
        let loss = crate::pipeline::loss_edge(&train_y, &scores)?;
        if !loss.value().is_finite() {
            return Err(ModelError::Diverged {
                epoch,
                partition: 0,
                message: "non-finite detector loss".into(),
            });
        }
        loss.backward()?;
        adam.step(&params)?;

        let keep = if val_usable {
            let logits = model.logits(g, &sub)?.detach();
            let val_scores: Vec<f64> = val_idx.iter().map(|&i| logits.data()[i]).collect();
            let a = auc(&val_scores, &val_y)?;
            a > best_auc && {
                best_auc = a;
                true
            }
        } else {
            true
        };
        if keep {
            best_snap = params.iter().map(|(_, t)| t.data()).collect();
        }
    }
    for ((_, t), s) in params.iter().zip(&best_snap) {
        t.set_data(s);
    }
    Ok(model)
}

/// Sigmoid outlier scores for every node.
pub fn score_nodes(g: &Graph, model: &DetectorParams) -> Result<Vec<f64>, ModelError> {
    let all: Vec<usize> = (0..g.n).collect();
    let sub = Subgraph::extract(g, &all);
    Ok(model.logits(g, &sub)?.sigmoid().detach().data())
}

fn check_lengths(scores: &[f64], labels: &[f64]) -> Result<(), ModelError> {
    if scores.len() != labels.len() {
        return Err(ModelError::Eval(format!(
            "{} scores vs {} labels",
            scores.len(),
            labels.len()
        )));
    }
    Ok(())
}

/// Area under the ROC curve via the Mann-Whitney statistic; tied
/// positive-negative score pairs count one half.
pub fn auc(scores: &[f64], labels: &[f64]) -> Result<f64, ModelError> {
    check_lengths(scores, labels)?;
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].partial_cmp(&scores[b]).unwrap());
    let num_pos = labels.iter().filter(|&&y| y == 1.0).count();
    let num_neg = labels.len() - num_pos;
    if num_pos == 0 || num_neg == 0 {
        return Err(ModelError::Eval("AUC needs both classes".into()));
    }
    // rank-sum of positives with average ranks across tie groups
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j < order.len() && scores[order[j]] == scores[order[i]] {
            j += 1;
        }
        let avg_rank = (i + 1 + j) as f64 / 2.0; // mean of ranks i+1 ..= j
        for &idx in &order[i..j] {
            if labels[idx] == 1.0 {
                rank_sum += avg_rank;
            }
        }
        i = j;
    }
    let u = rank_sum - (num_pos * (num_pos + 1)) as f64 / 2.0;
    Ok(u / (num_pos * num_neg) as f64)
}

/// Stable score-descending order: ties keep their input order.
fn descending_order(scores: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).unwrap());
    order
}

/// Mean precision at the rank of each positive, score-descending with stable
/// tie order.
pub fn average_precision(scores: &[f64], labels: &[f64]) -> Result<f64, ModelError> {
    check_lengths(scores, labels)?;
    let num_pos = labels.iter().filter(|&&y| y == 1.0).count();
    if num_pos == 0 {
        return Err(ModelError::Eval("average precision needs at least one positive".into()));
    }
    let order = descending_order(scores);
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (rank0, &idx) in order.iter().enumerate() {
        if labels[idx] == 1.0 {
            hits += 1;
            sum += hits as f64 / (rank0 + 1) as f64;
        }
    }
    Ok(sum / num_pos as f64)
}

/// Fraction of positives among the k highest scores (stable tie order).
/// `k` defaults to the number of positives.
pub fn recall_at_k(scores: &[f64], labels: &[f64], k: Option<usize>) -> Result<(f64, usize), ModelError> {
    check_lengths(scores, labels)?;
    let num_pos = labels.iter().filter(|&&y| y == 1.0).count();
    let k = k.unwrap_or(num_pos);
    if k == 0 {
        return Err(ModelError::Eval("recall@k needs k >= 1".into()));
    }
    if num_pos == 0 {
        return Err(ModelError::Eval("recall@k needs at least one positive".into()));
    }
    let order = descending_order(scores);
    let hits = order
        .iter()
        .take(k)
        .filter(|&&idx| labels[idx] == 1.0)
        .count();
    Ok((hits as f64 / num_pos as f64, k))
}

/// Per-bin densities of one feature dimension for real outliers vs synthetic
/// nodes, plus edge-type frequencies when the graphs are typed.
pub struct HistogramReport {
    /// bins+1 boundaries covering both samples.
    pub bin_edges: Vec<f64>,
    pub real_density: Vec<f64>,
    pub synth_density: Vec<f64>,
    /// Relative frequency per 1-based edge type, (real, synthetic).
    pub type_frequency: Option<(Vec<f64>, Vec<f64>)>,
}

impl HistogramReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("bin_lo,bin_hi,real_density,synth_density\n");
        for i in 0..self.real_density.len() {
            out.push_str(&format!(
                "{},{},{},{}\n",
                self.bin_edges[i], self.bin_edges[i + 1], self.real_density[i], self.synth_density[i]
            ));
        }
        if let Some((real, synth)) = &self.type_frequency {
            out.push_str("edge_type,real_frequency,synth_frequency\n");
            for (t, (r, s)) in real.iter().zip(synth).enumerate() {
                out.push_str(&format!("{},{},{}\n", t + 1, r, s));
            }
        }
        out
    }
}

fn density(values: &[f64], edges: &[f64]) -> Vec<f64> {
    let bins = edges.len() - 1;
    let mut counts = vec![0.0; bins];
    for &v in values {
        let mut b = bins - 1;
        for i in 0..bins {
            // upper edges are exclusive except for the last bin
            if v < edges[i + 1] {
                b = i;
                break;
            }
        }
        counts[b] += 1.0;
    }
    let total: f64 = counts.iter().sum();
    if total > 0.0 {
        for c in &mut counts {
            *c /= total;
        }
    }
    counts
}

fn type_frequency(g: &Graph) -> Vec<f64> {
    let p = g.num_edge_types as usize;
    let mut freq = vec![0.0; p];
    if let Some(types) = &g.edge_type {
        for &t in types {
            freq[(t - 1) as usize] += 1.0;
        }
        let total: f64 = freq.iter().sum();
        if total > 0.0 {
            for f in &mut freq {
                *f /= total;
            }
        }
    }
    freq
}

pub fn histogram_report(
    real_g: &Graph,
    synth_g: &Graph,
    dim: usize,
    bins: usize,
) -> Result<HistogramReport, ModelError> {
    if dim >= real_g.d || dim >= synth_g.d {
        return Err(ModelError::Eval(format!("feature dimension {dim} out of range")));
    }
    if bins == 0 {
        return Err(ModelError::Eval("histogram needs at least one bin".into()));
    }
    let real: Vec<f64> = (0..real_g.n)
        .filter(|&i| real_g.labels[i] == Label::Outlier)
        .map(|i| real_g.feature_row(i)[dim])
        .collect();
    // synthetic graphs are all-outlier; the filter only matters when a real
    // graph is passed on both sides
    let synth: Vec<f64> = (0..synth_g.n)
        .filter(|&i| synth_g.labels[i] == Label::Outlier)
        .map(|i| synth_g.feature_row(i)[dim])
        .collect();
    let all = real.iter().chain(synth.iter());
    let lo = all.clone().cloned().fold(f64::INFINITY, f64::min);
    let hi = all.cloned().fold(f64::NEG_INFINITY, f64::max);
    let (lo, hi) = if lo.is_finite() && hi > lo {
        (lo, hi)
    } else if lo.is_finite() {
        (lo - 0.5, lo + 0.5)
    } else {
        (0.0, 1.0)
    };
    let width = (hi - lo) / bins as f64;
    let bin_edges: Vec<f64> = (0..=bins).map(|i| lo + i as f64 * width).collect();
    let typed = real_g.has_type() && synth_g.has_type();
    Ok(HistogramReport {
        real_density: density(&real, &bin_edges),
        synth_density: density(&synth, &bin_edges),
        bin_edges,
        type_frequency: typed.then(|| (type_frequency(real_g), type_frequency(synth_g))),
    })
}

/// One row of results.csv.
#[derive(Clone, Debug, PartialEq)]
pub struct ResultRow {
    pub arm: String,
    pub seed: u64,
    pub auc: f64,
    pub ap: f64,
    pub recall_at_k: f64,
    pub k: usize,
    pub seconds: f64,
    pub peak_bytes: u64,
}

pub fn write_results(path: &Path, rows: &[ResultRow]) -> Result<(), ModelError> {
    let mut out = String::from("arm,seed,auc,ap,recall_at_k,k,seconds,peak_bytes\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.arm, r.seed, r.auc, r.ap, r.recall_at_k, r.k, r.seconds, r.peak_bytes
        ));
    }
    std::fs::write(path, out).map_err(|e| ModelError::Eval(format!("{}: {e}", path.display())))
}

/// Peak resident set size of this process in bytes (VmHWM), 0 if unreadable.
pub fn peak_rss_bytes() -> u64 {
    let Ok(status) = std::fs::read_to_string("/proc/self/status") else {
        return 0;
    };
    for line in status.lines() {
        if let Some(rest) = line.strip_prefix("VmHWM:") {
            let kb: u64 = rest
                .trim()
                .trim_end_matches("kB")
                .trim()
                .parse()
                .unwrap_or(0);
            return kb * 1024;
        }
    }
    0
}

/// Metrics of one trained detector on the real test split.
fn evaluate_detector(real_g: &Graph, train_g: &Graph, config: &DetectorConfig) -> Result<(f64, f64, f64, usize), ModelError> {
    let model = train_detector(train_g, config)?;
    // score on the training graph (synthetic rows are appended, so real node
    // ids line up), evaluate only real test-mask nodes
    let scores_all = score_nodes(train_g, &model)?;
    let test_idx: Vec<usize> = (0..real_g.n).filter(|&i| real_g.test_mask[i]).collect();
    let scores: Vec<f64> = test_idx.iter().map(|&i| scores_all[i]).collect();
    let labels: Vec<f64> = test_idx.iter().map(|&i| real_g.labels[i].as_f64()).collect();
    let a = auc(&scores, &labels)?;
    let ap = average_precision(&scores, &labels)?;
    let (rec, k) = recall_at_k(&scores, &labels, None)?;
    Ok((a, ap, rec, k))
}

/// Train the generative pipeline once, then compare detectors trained on the
/// plain graph (baseline) and the augmented graph across evaluation seeds.
/// Rows come back sorted by (arm, seed).
pub fn run_benchmark(
    g: &Graph,
    config: &TrainConfig,
    seeds: &[u64],
    detector: &DetectorConfig,
    n_hat: Option<usize>,
) -> Result<(Vec<ResultRow>, Checkpoint), ModelError> {
    let ckpt = fit(g, config)?;
    let rows = benchmark_with_checkpoint(g, &ckpt, seeds, detector, n_hat)?;
    Ok((rows, ckpt))
}

/// Baseline-vs-augmented comparison reusing an already-trained checkpoint.
pub fn benchmark_with_checkpoint(
    g: &Graph,
    ckpt: &Checkpoint,
    seeds: &[u64],
    detector: &DetectorConfig,
    n_hat: Option<usize>,
) -> Result<Vec<ResultRow>, ModelError> {
    if seeds.is_empty() {
        return Err(ModelError::Config("benchmark needs at least one seed".into()));
    }
    let config = &ckpt.config;
    let mut rows = Vec::new();
    for &seed in seeds {
        let det = DetectorConfig { seed, ..*detector };

        let start = Instant::now();
        let (a, ap, rec, k) = evaluate_detector(g, g, &det)?;
        rows.push(ResultRow {
            arm: "baseline".to_string(),
            seed,
            auc: a,
            ap,
            recall_at_k: rec,
            k,
            seconds: start.elapsed().as_secs_f64(),
            peak_bytes: peak_rss_bytes(),
        });

        let start = Instant::now();
        let mut aug_rng = Rng::new(config.seed).derive(4).derive(seed);
        let aug = augment(g, ckpt, n_hat, &mut aug_rng)?;
        let (a, ap, rec, k) = evaluate_detector(g, &aug, &det)?;
        rows.push(ResultRow {
            arm: "augmented".to_string(),
            seed,
            auc: a,
            ap,
            recall_at_k: rec,
            k,
            seconds: start.elapsed().as_secs_f64(),
            peak_bytes: peak_rss_bytes(),
        });
    }
    rows.sort_by(|a, b| (a.arm.as_str(), a.seed).cmp(&(b.arm.as_str(), b.seed)));
    Ok(rows)
}
