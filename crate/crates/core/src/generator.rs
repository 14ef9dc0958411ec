//! Graph generator: decodes conditioned latent rows into node features,
//! edges, edge types, and edge timestamps.

use serde::{Deserialize, Serialize};

use crate::error::{ModelError, TensorError};
use crate::graph::{Graph, Label};
use crate::rng::Rng;
use crate::tensor::Tensor;

/// Min-max scaler for edge timestamps; regression happens in [0, 1] units.
#[derive(Clone, Copy, Debug, Serialize, Deserialize, PartialEq)]
pub struct TimeScaler {
    pub t_min: u64,
    pub t_max: u64,
}

impl TimeScaler {
    pub fn fit(times: &[u64]) -> TimeScaler {
        let t_min = times.iter().copied().min().unwrap_or(0);
        let t_max = times.iter().copied().max().unwrap_or(0);
        TimeScaler { t_min, t_max }
    }

    pub fn scale(&self, t: u64) -> f64 {
        if self.t_max == self.t_min {
            0.0
        } else {
            (t.saturating_sub(self.t_min)) as f64 / (self.t_max - self.t_min) as f64
        }
    }

    /// Inverts the scaling, rounds to the nearest integer, clamps at zero.
    pub fn unscale(&self, v: f64) -> u64 {
        let raw = self.t_min as f64 + v * (self.t_max - self.t_min) as f64;
        raw.round().max(0.0) as u64
    }
}

pub struct GeneratorParams {
    /// 1 x d_latent class conditioning row.
    pub class_weight: Tensor,
    /// d x d_latent feature decoder.
    pub feature_map: Tensor,
    /// 1 x 3 d_latent edge scorer over [z_i, z_j, z_i ⊙ z_j]; the product
    /// channel lets the score depend on pair similarity, not just each
    /// endpoint separately.
    pub edge_scorer: Tensor,
    /// P x 2 d_latent type logits.
    pub type_map: Option<Tensor>,
    /// 1 x 2 d_latent time regressor.
    pub time_reg: Option<Tensor>,
    pub latent_dim: usize,
    pub feature_dim: usize,
}

impl GeneratorParams {
    pub fn new(rng: &mut Rng, feature_dim: usize, latent_dim: usize, num_types: u32, with_time: bool) -> GeneratorParams {
        let std = (1.0 / latent_dim as f64).sqrt();
        let std2 = (1.0 / (2 * latent_dim) as f64).sqrt();
        GeneratorParams {
            class_weight: rng.gaussian_param(1, latent_dim, 0.1),
            feature_map: rng.gaussian_param(feature_dim, latent_dim, std),
            edge_scorer: rng.gaussian_param(1, 3 * latent_dim, (1.0 / (3 * latent_dim) as f64).sqrt()),
            type_map: (num_types > 0).then(|| rng.gaussian_param(num_types as usize, 2 * latent_dim, std2)),
            time_reg: with_time.then(|| rng.gaussian_param(1, 2 * latent_dim, std2)),
            latent_dim,
            feature_dim,
        }
    }

    pub fn params(&self) -> Vec<(String, Tensor)> {
        let mut out = vec![
            ("generator.class_weight".to_string(), self.class_weight.clone()),
            ("generator.feature_map".to_string(), self.feature_map.clone()),
            ("generator.edge_scorer".to_string(), self.edge_scorer.clone()),
        ];
        if let Some(t) = &self.type_map {
            out.push(("generator.type_map".to_string(), t.clone()));
        }
        if let Some(t) = &self.time_reg {
            out.push(("generator.time_reg".to_string(), t.clone()));
        }
        out
    }
}

/// z_C = z + w_C * y, per row.
pub fn condition(z: &Tensor, y: &[f64], class_weight: &Tensor) -> Result<Tensor, TensorError> {
    let y_col = Tensor::matrix(y.len(), 1, y.to_vec());
    z.add(&y_col.matmul(class_weight)?)
}

/// X_hat = Z_C * W_F^T; plain linear decoding.
pub fn decode_features(z_c: &Tensor, feature_map: &Tensor) -> Result<Tensor, TensorError> {
    z_c.matmul_nt(feature_map)
}

/// Sigmoid edge scores for ordered index pairs of conditioned latents.
/// The pair representation is [z_i, z_j, z_i ⊙ z_j] so the linear scorer can
/// express endpoint affinity. Returns an m x 1 tensor aligned with `pairs`.
pub fn score_edges(z_c: &Tensor, pairs: &[(usize, usize)], edge_scorer: &Tensor) -> Result<Tensor, TensorError> {
    let is: Vec<usize> = pairs.iter().map(|&(i, _)| i).collect();
    let js: Vec<usize> = pairs.iter().map(|&(_, j)| j).collect();
    let zi = z_c.gather_rows(&is)?;
    let zj = z_c.gather_rows(&js)?;
    let prod = zi.mul(&zj)?;
    Ok(zi.concat_cols(&zj)?.concat_cols(&prod)?.matmul_nt(edge_scorer)?.sigmoid())
}

/// Raw type logits for pairs; softmax gives the distribution.
pub fn type_logits(z_c: &Tensor, pairs: &[(usize, usize)], type_map: &Tensor) -> Result<Tensor, TensorError> {
    let is: Vec<usize> = pairs.iter().map(|&(i, _)| i).collect();
    let js: Vec<usize> = pairs.iter().map(|&(_, j)| j).collect();
    let zi = z_c.gather_rows(&is)?;
    let zj = z_c.gather_rows(&js)?;
    zi.concat_cols(&zj)?.matmul_nt(type_map)
}

/// Normalized-time regression output for pairs (m x 1).
pub fn time_regression(z_c: &Tensor, pairs: &[(usize, usize)], time_reg: &Tensor) -> Result<Tensor, TensorError> {
    let is: Vec<usize> = pairs.iter().map(|&(i, _)| i).collect();
    let js: Vec<usize> = pairs.iter().map(|&(_, j)| j).collect();
    let zi = z_c.gather_rows(&is)?;
    let zj = z_c.gather_rows(&js)?;
    zi.concat_cols(&zj)?.matmul_nt(time_reg)
}

/// Edge decision rule: keep ordered pairs whose score reaches 0.5.
pub fn decide_edges(pairs: &[(usize, usize)], scores: &[f64]) -> Vec<(usize, usize)> {
    pairs
        .iter()
        .zip(scores.iter())
        .filter(|&(_, &s)| s >= 0.5)
        .map(|(&p, _)| p)
        .collect()
}

/// Argmax type per row with smallest-id tie-break; returns 1-based type ids.
pub fn argmax_types(distribution: &Tensor) -> Vec<u32> {
    let (m, p) = distribution.shape();
    let d = distribution.data();
    (0..m)
        .map(|r| {
            let row = &d[r * p..(r + 1) * p];
            let mut best = 0usize;
            for j in 1..p {
                if row[j] > row[best] {
                    best = j;
                }
            }
            (best + 1) as u32
        })
        .collect()
}

/// All ordered, non-self pairs within consecutive blocks of `block_size`.
pub fn block_pairs(n: usize, block_size: usize) -> Vec<(usize, usize)> {
    assert!(block_size >= 1);
    let mut pairs = Vec::new();
    let mut start = 0;
    while start < n {
        let end = (start + block_size).min(n);
        for i in start..end {
            for j in start..end {
                if i != j {
                    pairs.push((i, j));
                }
            }
        }
        start = end;
    }
    pairs
}

/// Decode a full synthetic graph from latent rows. Labels are forced to
/// outlier; edges are scored only within consecutive blocks.
pub fn generate_graph(
    z0: &Tensor,
    params: &GeneratorParams,
    block_size: usize,
    time_scaler: Option<&TimeScaler>,
) -> Result<Graph, ModelError> {
    let n = z0.rows();
    let d = params.feature_dim;
    if n == 0 {
        return Ok(Graph {
            n: 0,
            d,
            features: vec![],
            labels: vec![],
            edges: vec![],
            edge_time: params.time_reg.as_ref().map(|_| vec![]),
            edge_type: params.type_map.as_ref().map(|_| vec![]),
            num_edge_types: params.type_map.as_ref().map_or(0, |t| t.rows() as u32),
            train_mask: vec![],
            val_mask: vec![],
            test_mask: vec![],
        });
    }
    let y = vec![1.0; n];
    let z_c = condition(z0, &y, &params.class_weight)?;
    let features = decode_features(&z_c, &params.feature_map)?.data();

    let pairs = block_pairs(n, block_size.max(1));
    let scores = score_edges(&z_c, &pairs, &params.edge_scorer)?.data();
    let kept = decide_edges(&pairs, &scores);
    let edges: Vec<(u32, u32)> = kept.iter().map(|&(i, j)| (i as u32, j as u32)).collect();

    let edge_type = match &params.type_map {
        Some(tm) if !kept.is_empty() => {
            let dist = type_logits(&z_c, &kept, tm)?.softmax_rows();
            Some(argmax_types(&dist))
        }
        Some(_) => Some(vec![]),
        None => None,
    };
    let edge_time = match &params.time_reg {
        Some(tr) if !kept.is_empty() => {
            let scaler = time_scaler.ok_or_else(|| ModelError::Config("time scaler required for timed generation".into()))?;
            let raw = time_regression(&z_c, &kept, tr)?.data();
            Some(raw.into_iter().map(|v| scaler.unscale(v)).collect())
        }
        Some(_) => Some(vec![]),
        None => None,
    };

    Ok(Graph {
        n,
        d,
        features,
        labels: vec![Label::Outlier; n],
        edges,
        edge_time,
        edge_type,
        num_edge_types: params.type_map.as_ref().map_or(0, |t| t.rows() as u32),
        train_mask: vec![true; n],
        val_mask: vec![false; n],
        test_mask: vec![false; n],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn condition_identity_for_inliers() {
        let mut rng = Rng::new(0);
        let z = rng.gaussian(3, 4);
        let w = rng.gaussian(1, 4);
        let zc = condition(&z, &[0.0, 0.0, 0.0], &w).unwrap();
        assert_eq!(zc.data(), z.data());
    }

    #[test]
    fn condition_outlier_difference_is_class_row() {
        let mut rng = Rng::new(1);
        let z = rng.gaussian(2, 4);
        let w = rng.gaussian(1, 4);
        let zc = condition(&z, &[1.0, 1.0], &w).unwrap();
        let (zd, zcd, wd) = (z.data(), zc.data(), w.data());
        for i in 0..2 {
            for j in 0..4 {
                assert!((zcd[i * 4 + j] - zd[i * 4 + j] - wd[j]).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn condition_batch_matches_row_loop() {
        let mut rng = Rng::new(2);
        let z = rng.gaussian(5, 3);
        let w = rng.gaussian(1, 3);
        let y = [1.0, 0.0, 1.0, 0.0, 1.0];
        let zc = condition(&z, &y, &w).unwrap().data();
        let (zd, wd) = (z.data(), w.data());
        for i in 0..5 {
            for j in 0..3 {
                assert!((zc[i * 3 + j] - (zd[i * 3 + j] + y[i] * wd[j])).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn zero_feature_map_decodes_zero() {
        let z = Tensor::matrix(2, 3, vec![1.0; 6]);
        let w = Tensor::matrix(4, 3, vec![0.0; 12]);
        assert_eq!(decode_features(&z, &w).unwrap().data(), vec![0.0; 8]);
    }

    #[test]
    fn identity_feature_map_is_identity() {
        let z = Tensor::matrix(2, 3, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let eye = Tensor::matrix(3, 3, vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
        assert_eq!(decode_features(&z, &eye).unwrap().data(), z.data());
    }

    #[test]
    fn feature_decode_matches_hand_multiplication() {
        // 3x2 latent, 2x2 map
        let z = Tensor::matrix(3, 2, vec![1.0, 2.0, 0.0, 1.0, -1.0, 3.0]);
        let w = Tensor::matrix(2, 2, vec![1.0, -1.0, 2.0, 0.5]);
        let x = decode_features(&z, &w).unwrap().data();
        // row 0: (1*1 + 2*(-1), 1*2 + 2*0.5) = (-1, 3)
        assert_eq!(x, vec![-1.0, 3.0, -1.0, 0.5, -4.0, -0.5]);
    }

    #[test]
    fn zero_scorer_gives_half_everywhere() {
        let z = Tensor::matrix(3, 2, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let w = Tensor::matrix(1, 6, vec![0.0; 6]);
        let scores = score_edges(&z, &[(0, 1), (1, 2), (2, 0)], &w).unwrap().data();
        assert!(scores.iter().all(|&s| s == 0.5));
    }

    #[test]
    fn edge_score_is_directional() {
        let z = Tensor::matrix(2, 1, vec![1.0, -1.0]);
        let w = Tensor::matrix(1, 3, vec![2.0, 1.0, 0.0]);
        let s = score_edges(&z, &[(0, 1), (1, 0)], &w).unwrap().data();
        // logit(0->1) = 2*1 + 1*(-1) = 1; logit(1->0) = 2*(-1) + 1*1 = -1
        assert!((s[0] - 1.0 / (1.0 + (-1f64).exp())).abs() < 1e-12);
        assert!((s[1] - 1.0 / (1.0 + (1f64).exp())).abs() < 1e-12);
        assert!(s[0] != s[1]);
    }

    #[test]
    fn decide_edges_threshold_is_non_strict() {
        let pairs = [(0usize, 1usize), (1, 0), (0, 2)];
        let kept = decide_edges(&pairs, &[0.5, 0.49, 0.51]);
        assert_eq!(kept, vec![(0, 1), (0, 2)]);
    }

    #[test]
    fn all_low_scores_keep_nothing() {
        let pairs = [(0usize, 1usize), (1, 0)];
        assert!(decide_edges(&pairs, &[0.49, 0.49]).is_empty());
    }

    #[test]
    fn decide_edges_is_monotone_in_scores() {
        let pairs: Vec<(usize, usize)> = block_pairs(4, 4);
        let scores: Vec<f64> = (0..pairs.len()).map(|i| i as f64 / pairs.len() as f64).collect();
        let kept = decide_edges(&pairs, &scores);
        let raised: Vec<f64> = scores.iter().map(|s| s + 0.05).collect();
        let kept_raised = decide_edges(&pairs, &raised);
        for e in &kept {
            assert!(kept_raised.contains(e));
        }
    }

    #[test]
    fn uniform_type_distribution_argmax_is_type_one() {
        let z = Tensor::matrix(2, 2, vec![1.0; 4]);
        let w = Tensor::matrix(3, 4, vec![0.0; 12]);
        let dist = type_logits(&z, &[(0, 1)], &w).unwrap().softmax_rows();
        let d = dist.data();
        assert!(d.iter().all(|&v| (v - 1.0 / 3.0).abs() < 1e-9));
        assert_eq!(argmax_types(&dist), vec![1]);
    }

    #[test]
    fn dominant_logit_takes_probability_one() {
        let dist = Tensor::matrix(1, 3, vec![0.0, 100.0, 0.0]).softmax_rows();
        let d = dist.data();
        assert!(d[1] > 0.999999);
        assert_eq!(argmax_types(&dist), vec![2]);
    }

    #[test]
    fn type_distribution_sums_to_one() {
        let mut rng = Rng::new(4);
        let z = rng.gaussian(4, 3);
        let w = rng.gaussian(3, 6);
        let dist = type_logits(&z, &[(0, 1), (2, 3), (1, 0)], &w).unwrap().softmax_rows();
        let d = dist.data();
        for r in 0..3 {
            let s: f64 = d[r * 3..(r + 1) * 3].iter().sum();
            assert!((s - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_time_regressor_denormalizes_to_min_timestamp() {
        let scaler = TimeScaler { t_min: 120, t_max: 500 };
        assert_eq!(scaler.unscale(0.0), 120);
    }

    #[test]
    fn negative_denormalized_time_clamps_to_zero() {
        let scaler = TimeScaler { t_min: 0, t_max: 100 };
        assert_eq!(scaler.unscale(-0.7), 0);
    }

    #[test]
    fn time_regression_matches_hand_dot_product() {
        let z = Tensor::matrix(2, 2, vec![1.0, 2.0, 3.0, 4.0]);
        let w = Tensor::matrix(1, 4, vec![0.5, -0.5, 1.0, 0.25]);
        let t = time_regression(&z, &[(0, 1)], &w).unwrap().data();
        // 0.5*1 - 0.5*2 + 1*3 + 0.25*4 = 3.5
        assert!((t[0] - 3.5).abs() < 1e-12);
    }

    #[test]
    fn block_pair_counts() {
        assert_eq!(block_pairs(10, 10).len(), 90);
        let pairs = block_pairs(10, 5);
        assert_eq!(pairs.len(), 40);
        // none across blocks
        for (i, j) in pairs {
            assert_eq!(i / 5, j / 5);
        }
    }

    #[test]
    fn generate_empty_latents_yields_empty_graph() {
        let mut rng = Rng::new(0);
        let params = GeneratorParams::new(&mut rng, 3, 2, 0, false);
        let z = Tensor::matrix(0, 2, vec![]);
        let g = generate_graph(&z, &params, 8, None).unwrap();
        assert_eq!(g.n, 0);
        assert!(g.edges.is_empty());
    }

    #[test]
    fn generated_nodes_all_outliers_with_valid_channels() {
        let mut rng = Rng::new(6);
        let params = GeneratorParams::new(&mut rng, 4, 3, 2, true);
        let z = rng.gaussian(12, 3);
        let scaler = TimeScaler { t_min: 5, t_max: 50 };
        let g = generate_graph(&z, &params, 6, Some(&scaler)).unwrap();
        assert_eq!(g.n, 12);
        assert!(g.labels.iter().all(|&l| l == Label::Outlier));
        assert!(g.train_mask.iter().all(|&m| m));
        let types = g.edge_type.as_ref().unwrap();
        assert_eq!(types.len(), g.edges.len());
        assert!(types.iter().all(|&p| (1..=2).contains(&p)));
        let times = g.edge_time.as_ref().unwrap();
        assert_eq!(times.len(), g.edges.len());
        // no self-loops, block-internal only
        for &(s, t) in &g.edges {
            assert_ne!(s, t);
            assert_eq!(s / 6, t / 6);
        }
        g.validate().unwrap();
    }
}
