//! Graph directory format.
//!
//! A graph lives in a directory of four UTF-8, LF-terminated files:
//! - `meta.json`: `{"n": int, "d": int, "P": int, "has_time": bool, "directed": true}`
//! - `features.csv`: n rows of d comma-separated floats, no header
//! - `labels.csv`: header `node_id,label,split`; label in {0,1,-1}; split in
//!   {train,val,test,none}
//! - `edges.csv`: header `src,dst[,time][,type]` per the meta flags
//!
//! Floats are written with the shortest round-trip representation, so
//! save -> load reproduces the graph bit-exactly.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::GraphError;
use crate::graph::{Graph, Label};

#[derive(Serialize, Deserialize)]
struct Meta {
    n: usize,
    d: usize,
    #[serde(rename = "P")]
    p: u32,
    has_time: bool,
    directed: bool,
}

fn io_err(path: &Path, source: std::io::Error) -> GraphError {
    GraphError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn parse_err(path: &Path, row: usize, message: impl Into<String>) -> GraphError {
    GraphError::Parse {
        path: path.display().to_string(),
        row,
        message: message.into(),
    }
}

pub fn save_graph(g: &Graph, dir: &Path) -> Result<(), GraphError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))?;
    let meta = Meta {
        n: g.n,
        d: g.d,
        p: g.num_edge_types,
        has_time: g.has_time(),
        directed: true,
    };
    let meta_path = dir.join("meta.json");
    let mut meta_json = serde_json::to_string_pretty(&meta).expect("meta serializes");
    meta_json.push('\n');
    fs::write(&meta_path, meta_json).map_err(|e| io_err(&meta_path, e))?;

    let mut feats = String::new();
    for i in 0..g.n {
        let row = g.feature_row(i);
        for (j, v) in row.iter().enumerate() {
            if j > 0 {
                feats.push(',');
            }
            write!(feats, "{v}").unwrap();
        }
        feats.push('\n');
    }
    let fpath = dir.join("features.csv");
    fs::write(&fpath, feats).map_err(|e| io_err(&fpath, e))?;

    let mut labels = String::from("node_id,label,split\n");
    for i in 0..g.n {
        let label = match g.labels[i] {
            Label::Inlier => "0",
            Label::Outlier => "1",
            Label::Unknown => "-1",
        };
        let split = if g.train_mask[i] {
            "train"
        } else if g.val_mask[i] {
            "val"
        } else if g.test_mask[i] {
            "test"
        } else {
            "none"
        };
        writeln!(labels, "{i},{label},{split}").unwrap();
    }
    let lpath = dir.join("labels.csv");
    fs::write(&lpath, labels).map_err(|e| io_err(&lpath, e))?;

    let mut header = String::from("src,dst");
    if g.has_time() {
        header.push_str(",time");
    }
    if g.has_type() {
        header.push_str(",type");
    }
    let mut edges = header;
    edges.push('\n');
    for (ei, &(s, t)) in g.edges.iter().enumerate() {
        write!(edges, "{s},{t}").unwrap();
        if let Some(tt) = &g.edge_time {
            write!(edges, ",{}", tt[ei]).unwrap();
        }
        if let Some(tp) = &g.edge_type {
            write!(edges, ",{}", tp[ei]).unwrap();
        }
        edges.push('\n');
    }
    let epath = dir.join("edges.csv");
    fs::write(&epath, edges).map_err(|e| io_err(&epath, e))?;
    Ok(())
}

pub fn load_graph(dir: &Path) -> Result<Graph, GraphError> {
    let meta_path = dir.join("meta.json");
    let meta_raw = fs::read_to_string(&meta_path).map_err(|e| io_err(&meta_path, e))?;
    let meta: Meta = serde_json::from_str(&meta_raw)
        .map_err(|e| parse_err(&meta_path, 0, e.to_string()))?;

    let fpath = dir.join("features.csv");
    let feats_raw = fs::read_to_string(&fpath).map_err(|e| io_err(&fpath, e))?;
    let mut features = Vec::with_capacity(meta.n * meta.d);
    let mut rows = 0usize;
    for (lineno, line) in feats_raw.lines().enumerate() {
        if line.is_empty() {
            continue;
        }
        let values: Vec<&str> = line.split(',').collect();
        if values.len() != meta.d {
            return Err(parse_err(
                &fpath,
                lineno + 1,
                format!("expected {} values, found {}", meta.d, values.len()),
            ));
        }
        for v in values {
            let x: f64 = v
                .trim()
                .parse()
                .map_err(|_| parse_err(&fpath, lineno + 1, format!("bad float `{v}`")))?;
            features.push(x);
        }
        rows += 1;
    }
    if rows != meta.n {
        return Err(parse_err(&fpath, rows, format!("expected {} rows, found {rows}", meta.n)));
    }

    let lpath = dir.join("labels.csv");
    let labels_raw = fs::read_to_string(&lpath).map_err(|e| io_err(&lpath, e))?;
    let mut labels = vec![Label::Unknown; meta.n];
    let mut train_mask = vec![false; meta.n];
    let mut val_mask = vec![false; meta.n];
    let mut test_mask = vec![false; meta.n];
    for (lineno, line) in labels_raw.lines().enumerate() {
        if lineno == 0 {
            if line != "node_id,label,split" {
                return Err(parse_err(&lpath, 1, "expected header `node_id,label,split`"));
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 3 {
            return Err(parse_err(&lpath, lineno + 1, "expected 3 columns"));
        }
        let id: usize = cols[0]
            .parse()
            .map_err(|_| parse_err(&lpath, lineno + 1, format!("bad node id `{}`", cols[0])))?;
        if id >= meta.n {
            return Err(parse_err(&lpath, lineno + 1, format!("node id {id} out of range (n={})", meta.n)));
        }
        labels[id] = match cols[1] {
            "0" => Label::Inlier,
            "1" => Label::Outlier,
            "-1" => Label::Unknown,
            other => return Err(parse_err(&lpath, lineno + 1, format!("bad label `{other}`"))),
        };
        match cols[2] {
            "train" => train_mask[id] = true,
            "val" => val_mask[id] = true,
            "test" => test_mask[id] = true,
            "none" => {}
            other => return Err(parse_err(&lpath, lineno + 1, format!("bad split `{other}`"))),
        }
    }

    let epath = dir.join("edges.csv");
    let edges_raw = fs::read_to_string(&epath).map_err(|e| io_err(&epath, e))?;
    let expected_header = {
        let mut h = String::from("src,dst");
        if meta.has_time {
            h.push_str(",time");
        }
        if meta.p > 0 {
            h.push_str(",type");
        }
        h
    };
    let mut edges = Vec::new();
    let mut edge_time = meta.has_time.then(Vec::new);
    let mut edge_type = (meta.p > 0).then(Vec::new);
    for (lineno, line) in edges_raw.lines().enumerate() {
        if lineno == 0 {
            if line != expected_header {
                return Err(parse_err(
                    &epath,
                    1,
                    format!("expected header `{expected_header}`, found `{line}`"),
                ));
            }
            continue;
        }
        if line.is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        let expected_cols = 2 + meta.has_time as usize + (meta.p > 0) as usize;
        if cols.len() != expected_cols {
            return Err(parse_err(
                &epath,
                lineno + 1,
                format!("expected {expected_cols} columns, found {}", cols.len()),
            ));
        }
        let src: u32 = cols[0]
            .parse()
            .map_err(|_| parse_err(&epath, lineno + 1, format!("bad src `{}`", cols[0])))?;
        let dst: u32 = cols[1]
            .parse()
            .map_err(|_| parse_err(&epath, lineno + 1, format!("bad dst `{}`", cols[1])))?;
        if src as usize >= meta.n || dst as usize >= meta.n {
            return Err(parse_err(
                &epath,
                lineno + 1,
                format!("edge ({src}, {dst}) references node outside 0..{}", meta.n),
            ));
        }
        edges.push((src, dst));
        let mut col = 2;
        if let Some(tt) = &mut edge_time {
            let raw = cols[col];
            if raw.starts_with('-') {
                return Err(parse_err(&epath, lineno + 1, format!("negative timestamp `{raw}`")));
            }
            let t: u64 = raw
                .parse()
                .map_err(|_| parse_err(&epath, lineno + 1, format!("bad timestamp `{raw}`")))?;
            tt.push(t);
            col += 1;
        }
        if let Some(tp) = &mut edge_type {
            let raw = cols[col];
            let p: u32 = raw
                .parse()
                .map_err(|_| parse_err(&epath, lineno + 1, format!("bad edge type `{raw}`")))?;
            if p == 0 || p > meta.p {
                return Err(parse_err(
                    &epath,
                    lineno + 1,
                    format!("edge type {p} outside 1..={}", meta.p),
                ));
            }
            tp.push(p);
        }
    }

    let g = Graph {
        n: meta.n,
        d: meta.d,
        features,
        labels,
        edges,
        edge_time,
        edge_type,
        num_edge_types: meta.p,
        train_mask,
        val_mask,
        test_mask,
    };
    g.validate()?;
    Ok(g)
}
