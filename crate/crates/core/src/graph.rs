//! Graph data model, BFS partitioning, edge negative sampling, synthetic
//! benchmark generation, and disjoint-union batching.

use std::collections::HashSet;

use crate::error::GraphError;
use crate::rng::Rng;

/// Tri-state node label.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Label {
    Inlier,
    Outlier,
    Unknown,
}

impl Label {
    /// Numeric label entering the model equations; unknown counts as 0.
    pub fn as_f64(self) -> f64 {
        match self {
            Label::Outlier => 1.0,
            _ => 0.0,
        }
    }
}

/// Directed attributed graph with optional edge types and timestamps.
///
/// Edges are stored directed as given; undirected datasets list both
/// directions. Edge types live in `1..=num_edge_types`.
#[derive(Clone, Debug)]
pub struct Graph {
    pub n: usize,
    pub d: usize,
    /// n * d row-major feature matrix.
    pub features: Vec<f64>,
    pub labels: Vec<Label>,
    pub edges: Vec<(u32, u32)>,
    pub edge_time: Option<Vec<u64>>,
    pub edge_type: Option<Vec<u32>>,
    /// Number of edge types P; 0 when untyped.
    pub num_edge_types: u32,
    pub train_mask: Vec<bool>,
    pub val_mask: Vec<bool>,
    pub test_mask: Vec<bool>,
}

impl Graph {
    pub fn feature_row(&self, i: usize) -> &[f64] {
        &self.features[i * self.d..(i + 1) * self.d]
    }

    pub fn has_time(&self) -> bool {
        self.edge_time.is_some()
    }

    pub fn has_type(&self) -> bool {
        self.edge_type.is_some()
    }

    /// Structural sanity checks used after load and before training.
    pub fn validate(&self) -> Result<(), GraphError> {
        if self.features.len() != self.n * self.d {
            return Err(GraphError::Invalid(format!(
                "feature matrix has {} values, expected {}",
                self.features.len(),
                self.n * self.d
            )));
        }
        for &(s, t) in &self.edges {
            if s as usize >= self.n || t as usize >= self.n {
                return Err(GraphError::Invalid(format!("edge ({s}, {t}) out of range for n={}", self.n)));
            }
        }
        if let Some(tt) = &self.edge_time {
            if tt.len() != self.edges.len() {
                return Err(GraphError::Invalid("edge_time length != |edges|".into()));
            }
        }
        if let Some(tp) = &self.edge_type {
            if tp.len() != self.edges.len() {
                return Err(GraphError::Invalid("edge_type length != |edges|".into()));
            }
            if self.num_edge_types == 0 {
                return Err(GraphError::Invalid("typed edges present but P=0".into()));
            }
            for &p in tp {
                if p == 0 || p > self.num_edge_types {
                    return Err(GraphError::Invalid(format!(
                        "edge type {p} outside 1..={}",
                        self.num_edge_types
                    )));
                }
            }
        }
        for i in 0..self.n {
            let masked = self.train_mask[i] as u8 + self.val_mask[i] as u8 + self.test_mask[i] as u8;
            if masked > 1 {
                return Err(GraphError::Invalid(format!("node {i} in more than one split")));
            }
            if masked == 1 && self.labels[i] == Label::Unknown {
                return Err(GraphError::Invalid(format!("masked node {i} has unknown label")));
            }
        }
        Ok(())
    }

    pub fn count_outliers(&self, mask: &[bool]) -> usize {
        (0..self.n)
            .filter(|&i| mask[i] && self.labels[i] == Label::Outlier)
            .count()
    }

    /// Undirected adjacency lists (both edge directions merged).
    pub fn undirected_adjacency(&self) -> Vec<Vec<u32>> {
        let mut adj = vec![Vec::new(); self.n];
        for &(s, t) in &self.edges {
            adj[s as usize].push(t);
            adj[t as usize].push(s);
        }
        adj
    }
}

/// Node-disjoint partition assignment covering the whole graph.
#[derive(Clone, Debug)]
pub struct Partitioning {
    pub assignment: Vec<u32>,
    pub num_partitions: usize,
    pub target_size: usize,
}

impl Partitioning {
    pub fn members(&self, pid: usize) -> Vec<usize> {
        self.assignment
            .iter()
            .enumerate()
            .filter(|(_, &a)| a as usize == pid)
            .map(|(i, _)| i)
            .collect()
    }

    /// Edges whose endpoints fall in different partitions.
    pub fn edge_cut(&self, g: &Graph) -> usize {
        g.edges
            .iter()
            .filter(|&&(s, t)| self.assignment[s as usize] != self.assignment[t as usize])
            .count()
    }
}

/// Deterministic BFS-grown partitions: seed at the lowest-index unassigned
/// node, grow breadth-first until the partition reaches `b` nodes or the
/// frontier empties.
pub fn partition_graph(g: &Graph, b: usize) -> Partitioning {
    assert!(b >= 2, "partition size must be at least 2");
    let adj = g.undirected_adjacency();
    let mut assignment = vec![u32::MAX; g.n];
    let mut pid = 0u32;
    for seed in 0..g.n {
        if assignment[seed] != u32::MAX {
            continue;
        }
        let mut size = 0usize;
        let mut queue = std::collections::VecDeque::new();
        assignment[seed] = pid;
        queue.push_back(seed);
        size += 1;
        while size < b {
            let Some(node) = queue.pop_front() else { break };
            let mut neighbors: Vec<u32> = adj[node].clone();
            neighbors.sort_unstable();
            for nb in neighbors {
                let nb = nb as usize;
                if assignment[nb] == u32::MAX {
                    assignment[nb] = pid;
                    queue.push_back(nb);
                    size += 1;
                    if size >= b {
                        break;
                    }
                }
            }
        }
        pid += 1;
    }
    Partitioning {
        assignment,
        num_partitions: pid as usize,
        target_size: b,
    }
}

/// One partition materialized with local indices.
#[derive(Clone, Debug)]
pub struct Subgraph {
    /// Global node ids in local order.
    pub nodes: Vec<usize>,
    /// Intra-partition edges as (local_src, local_dst, global_edge_index).
    pub edges: Vec<(usize, usize, usize)>,
}

impl Subgraph {
    pub fn extract(g: &Graph, members: &[usize]) -> Subgraph {
        let mut local = vec![usize::MAX; g.n];
        for (li, &gi) in members.iter().enumerate() {
            local[gi] = li;
        }
        let mut edges = Vec::new();
        for (ei, &(s, t)) in g.edges.iter().enumerate() {
            let (ls, lt) = (local[s as usize], local[t as usize]);
            if ls != usize::MAX && lt != usize::MAX {
                edges.push((ls, lt, ei));
            }
        }
        Subgraph {
            nodes: members.to_vec(),
            edges,
        }
    }
}

/// Labeled edge training set: all intra-partition positives plus sampled
/// non-edges.
#[derive(Clone, Debug)]
pub struct EdgeTrainSet {
    /// (local_src, local_dst, label) with label 1 for real edges.
    pub pairs: Vec<(usize, usize, f64)>,
    pub num_positives: usize,
    /// Negatives abandoned after the rejection-sampling attempt cap.
    pub num_skipped: usize,
}

const NEGATIVE_ATTEMPT_CAP: usize = 100;

/// Uniform rejection sampling of `ratio` negatives per positive within a
/// partition. Negatives are checked against the full edge set of `g`.
pub fn negative_sample(rng: &mut Rng, g: &Graph, sub: &Subgraph, ratio: usize) -> EdgeTrainSet {
    assert!(ratio >= 1, "negative sampling ratio must be >= 1");
    assert!(sub.nodes.len() >= 2, "partition must have at least 2 nodes");
    let existing: HashSet<(u32, u32)> = g.edges.iter().copied().collect();
    let mut pairs: Vec<(usize, usize, f64)> = sub
        .edges
        .iter()
        .map(|&(s, t, _)| (s, t, 1.0))
        .collect();
    let num_positives = pairs.len();
    let mut seen_negative: HashSet<(usize, usize)> = HashSet::new();
    let mut num_skipped = 0usize;
    let m = sub.nodes.len();
    for _ in 0..num_positives * ratio {
        let mut found = false;
        for _ in 0..NEGATIVE_ATTEMPT_CAP {
            let li = rng.below(m);
            let lj = rng.below(m);
            if li == lj {
                continue;
            }
            let gi = sub.nodes[li] as u32;
            let gj = sub.nodes[lj] as u32;
            if existing.contains(&(gi, gj)) || seen_negative.contains(&(li, lj)) {
                continue;
            }
            seen_negative.insert((li, lj));
            pairs.push((li, lj, 0.0));
            found = true;
            break;
        }
        if !found {
            num_skipped += 1;
        }
    }
    EdgeTrainSet {
        pairs,
        num_positives,
        num_skipped,
    }
}

/// Disjoint union of a real graph and a synthetic graph. Synthetic nodes are
/// appended with offset indices, forced to outlier labels, and added to the
/// train mask. No edges are created between the two parts.
pub fn batch_graphs(g: &Graph, synth: &Graph) -> Result<Graph, GraphError> {
    if synth.n == 0 {
        return Ok(g.clone());
    }
    if synth.d != g.d {
        return Err(GraphError::DimMismatch { lhs: g.d, rhs: synth.d });
    }
    if g.has_time() != synth.has_time() || g.has_type() != synth.has_type() {
        return Err(GraphError::Invalid(
            "optional edge channels of synthetic graph do not match real graph".into(),
        ));
    }
    let mut out = g.clone();
    out.n += synth.n;
    out.features.extend_from_slice(&synth.features);
    out.labels.extend(std::iter::repeat(Label::Outlier).take(synth.n));
    out.train_mask.extend(std::iter::repeat(true).take(synth.n));
    out.val_mask.extend(std::iter::repeat(false).take(synth.n));
    out.test_mask.extend(std::iter::repeat(false).take(synth.n));
    let offset = g.n as u32;
    for &(s, t) in &synth.edges {
        out.edges.push((s + offset, t + offset));
    }
    if let (Some(tt), Some(st)) = (&mut out.edge_time, &synth.edge_time) {
        tt.extend_from_slice(st);
    }
    if let (Some(tp), Some(sp)) = (&mut out.edge_type, &synth.edge_type) {
        tp.extend_from_slice(sp);
    }
    Ok(out)
}

/// Parameters for the planted-partition benchmark generator.
#[derive(Clone, Copy, Debug)]
pub struct BenchmarkSpec {
    pub n: usize,
    pub d: usize,
    pub outlier_frac: f64,
    /// Scales community separation and outlier shift; 1.0 is strongly separable.
    pub cohesion: f64,
    pub num_edge_types: u32,
    pub with_time: bool,
}

const BENCH_COMMUNITIES: usize = 8;
const INLIER_DEGREE: usize = 6;
const OUTLIER_DEGREE: usize = 4;

/// Planted-partition benchmark: inliers form feature/edge communities on a
/// lattice of means, outliers get a shifted feature mean and cross-community
/// edges. Splits are stratified 40/20/40 train/val/test within each class.
pub fn make_benchmark(rng: &mut Rng, spec: BenchmarkSpec) -> Result<Graph, GraphError> {
    if !(spec.outlier_frac > 0.0 && spec.outlier_frac < 0.5) {
        return Err(GraphError::Invalid("outlier_frac must be in (0, 0.5)".into()));
    }
    let n_out = (spec.n as f64 * spec.outlier_frac).round() as usize;
    let n_in = spec.n.saturating_sub(n_out);
    if n_out == 0 || n_in == 0 {
        return Err(GraphError::Invalid("benchmark parameters yield an empty class".into()));
    }
    let n = spec.n;
    let d = spec.d;
    let c = BENCH_COMMUNITIES.min(n_in.max(1));

    // interleave outliers deterministically across the index range
    let mut labels = vec![Label::Inlier; n];
    for k in 0..n_out {
        labels[k * n / n_out] = Label::Outlier;
    }
    let mut community = vec![0usize; n];
    for i in 0..n {
        community[i] = rng.below(c);
    }

    // community means sit on axis-aligned lattice points; outliers are
    // shifted along the all-ones direction
    let sep = 3.0 * spec.cohesion;
    let shift = 2.5 * spec.cohesion / (d as f64).sqrt();
    let mut features = Vec::with_capacity(n * d);
    for i in 0..n {
        let cm = community[i];
        for j in 0..d {
            let mut v = rng.normal();
            if j == cm % d {
                v += sep;
            }
            if labels[i] == Label::Outlier {
                v += shift;
            }
            features.push(v);
        }
    }

    // edges: inliers connect within their community, outliers across
    let mut by_community: Vec<Vec<usize>> = vec![Vec::new(); c];
    for i in 0..n {
        if labels[i] == Label::Inlier {
            by_community[community[i]].push(i);
        }
    }
    let mut undirected: HashSet<(u32, u32)> = HashSet::new();
    let add_undirected = |a: usize, b: usize, set: &mut HashSet<(u32, u32)>| {
        if a == b {
            return;
        }
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        set.insert((lo as u32, hi as u32));
    };
    for i in 0..n {
        match labels[i] {
            Label::Inlier => {
                let peers = &by_community[community[i]];
                if peers.len() > 1 {
                    for _ in 0..INLIER_DEGREE / 2 {
                        let j = peers[rng.below(peers.len())];
                        add_undirected(i, j, &mut undirected);
                    }
                }
            }
            _ => {
                for _ in 0..OUTLIER_DEGREE / 2 {
                    let j = rng.below(n);
                    if community[j] != community[i] {
                        add_undirected(i, j, &mut undirected);
                    }
                }
            }
        }
    }
    let mut pair_list: Vec<(u32, u32)> = undirected.into_iter().collect();
    pair_list.sort_unstable();
    let mut edges = Vec::with_capacity(pair_list.len() * 2);
    let mut edge_time = spec.with_time.then(Vec::new);
    let mut edge_type = (spec.num_edge_types > 0).then(Vec::new);
    for &(a, b) in &pair_list {
        let t = (rng.below(1000)) as u64;
        let p = 1 + rng.below(spec.num_edge_types.max(1) as usize) as u32;
        for (s, dst) in [(a, b), (b, a)] {
            edges.push((s, dst));
            if let Some(tt) = &mut edge_time {
                tt.push(t);
            }
            if let Some(tp) = &mut edge_type {
                tp.push(p);
            }
        }
    }

    // stratified 40/20/40 split per class
    let mut train_mask = vec![false; n];
    let mut val_mask = vec![false; n];
    let mut test_mask = vec![false; n];
    for class in [Label::Inlier, Label::Outlier] {
        let mut members: Vec<usize> = (0..n).filter(|&i| labels[i] == class).collect();
        rng.shuffle(&mut members);
        let n_train = (members.len() as f64 * 0.4).round() as usize;
        let n_val = (members.len() as f64 * 0.2).round() as usize;
        for (rank, &i) in members.iter().enumerate() {
            if rank < n_train {
                train_mask[i] = true;
            } else if rank < n_train + n_val {
                val_mask[i] = true;
            } else {
                test_mask[i] = true;
            }
        }
    }

    let g = Graph {
        n,
        d,
        features,
        labels,
        edges,
        edge_time,
        edge_type,
        num_edge_types: spec.num_edge_types,
        train_mask,
        val_mask,
        test_mask,
    };
    g.validate()?;
    Ok(g)
}
