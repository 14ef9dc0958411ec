//! Dense 2-D tensors with reverse-mode gradient recording.
//!
//! Every tensor is a row-major matrix of f64. Ops on tracked tensors record
//! a backward closure; [`Tensor::backward`] walks the resulting DAG in
//! reverse topological order and deposits gradients on parameter leaves.

use std::cell::{Cell, RefCell};
use std::collections::HashMap;
use std::rc::Rc;

use crate::error::TensorError;

type BackwardFn = Box<dyn Fn(&[f64]) -> Vec<Vec<f64>>>;

struct Inner {
    rows: usize,
    cols: usize,
    data: RefCell<Vec<f64>>,
    grad: RefCell<Option<Vec<f64>>>,
    parents: Vec<Tensor>,
    backward: Option<BackwardFn>,
    is_param: bool,
    tracked: bool,
    // set once backward has consumed this node as a loss root
    spent: Cell<bool>,
}

/// Row-major matrix, cheap to clone (shared storage).
#[derive(Clone)]
pub struct Tensor {
    inner: Rc<Inner>,
}

fn zeros(n: usize) -> Vec<f64> {
    vec![0.0; n]
}

impl Tensor {
    fn from_parts(
        rows: usize,
        cols: usize,
        data: Vec<f64>,
        parents: Vec<Tensor>,
        backward: Option<BackwardFn>,
        is_param: bool,
    ) -> Tensor {
        debug_assert_eq!(rows * cols, data.len());
        let tracked = is_param || parents.iter().any(|p| p.inner.tracked);
        let (parents, backward) = if tracked { (parents, backward) } else { (Vec::new(), None) };
        Tensor {
            inner: Rc::new(Inner {
                rows,
                cols,
                data: RefCell::new(data),
                grad: RefCell::new(None),
                parents,
                backward,
                is_param,
                tracked,
                spent: Cell::new(false),
            }),
        }
    }

    /// Constant matrix (not tracked).
    pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> Tensor {
        assert_eq!(rows * cols, data.len(), "matrix data length mismatch");
        Tensor::from_parts(rows, cols, data, Vec::new(), None, false)
    }

    /// Learnable parameter leaf; receives a gradient on backward.
    pub fn param(rows: usize, cols: usize, data: Vec<f64>) -> Tensor {
        assert_eq!(rows * cols, data.len(), "param data length mismatch");
        Tensor::from_parts(rows, cols, data, Vec::new(), None, true)
    }

    pub fn scalar(v: f64) -> Tensor {
        Tensor::matrix(1, 1, vec![v])
    }

    pub fn filled(rows: usize, cols: usize, v: f64) -> Tensor {
        Tensor::matrix(rows, cols, vec![v; rows * cols])
    }

    pub fn rows(&self) -> usize {
        self.inner.rows
    }

    pub fn cols(&self) -> usize {
        self.inner.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.inner.rows, self.inner.cols)
    }

    pub fn len(&self) -> usize {
        self.inner.rows * self.inner.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn data(&self) -> Vec<f64> {
        self.inner.data.borrow().clone()
    }

    pub fn value(&self) -> f64 {
        assert_eq!(self.len(), 1, "value() on non-scalar");
        self.inner.data.borrow()[0]
    }

    pub fn is_param(&self) -> bool {
        self.inner.is_param
    }

    /// Gradient accumulated by the last backward pass (params only).
    pub fn grad(&self) -> Option<Vec<f64>> {
        self.inner.grad.borrow().clone()
    }

    /// Removes and returns the accumulated gradient.
    pub fn take_grad(&self) -> Option<Vec<f64>> {
        self.inner.grad.borrow_mut().take()
    }

    /// Overwrites the stored values in place. Shape must match.
    pub fn set_data(&self, data: &[f64]) {
        let mut d = self.inner.data.borrow_mut();
        assert_eq!(d.len(), data.len(), "set_data length mismatch");
        d.copy_from_slice(data);
    }

    /// Untracked copy of this tensor's current values.
    pub fn detach(&self) -> Tensor {
        Tensor::matrix(self.inner.rows, self.inner.cols, self.data())
    }

    pub fn all_finite(&self) -> bool {
        self.inner.data.borrow().iter().all(|v| v.is_finite())
    }

    fn shape_err(&self, op: &'static str, other: Option<&Tensor>) -> TensorError {
        TensorError::ShapeMismatch {
            op,
            lhs: self.shape(),
            rhs: other.map(|t| t.shape()),
        }
    }

    // ---- elementwise ----

    fn zip(&self, other: &Tensor, op: &'static str, f: impl Fn(f64, f64) -> f64) -> Result<Vec<f64>, TensorError> {
        if self.shape() != other.shape() {
            return Err(self.shape_err(op, Some(other)));
        }
        let a = self.inner.data.borrow();
        let b = other.inner.data.borrow();
        Ok(a.iter().zip(b.iter()).map(|(&x, &y)| f(x, y)).collect())
    }

    pub fn add(&self, other: &Tensor) -> Result<Tensor, TensorError> {
        let out = self.zip(other, "add", |x, y| x + y)?;
        Ok(Tensor::from_parts(
            self.rows(),
            self.cols(),
            out,
            vec![self.clone(), other.clone()],
            Some(Box::new(|g| vec![g.to_vec(), g.to_vec()])),
            false,
        ))
    }

    pub fn sub(&self, other: &Tensor) -> Result<Tensor, TensorError> {
        let out = self.zip(other, "sub", |x, y| x - y)?;
        Ok(Tensor::from_parts(
            self.rows(),
            self.cols(),
            out,
            vec![self.clone(), other.clone()],
            Some(Box::new(|g| vec![g.to_vec(), g.iter().map(|v| -v).collect()])),
            false,
        ))
    }

    pub fn mul(&self, other: &Tensor) -> Result<Tensor, TensorError> {
        let out = self.zip(other, "mul", |x, y| x * y)?;
        let a = self.data();
        let b = other.data();
        Ok(Tensor::from_parts(
            self.rows(),
            self.cols(),
            out,
            vec![self.clone(), other.clone()],
            Some(Box::new(move |g| {
                vec![
                    g.iter().zip(b.iter()).map(|(gv, bv)| gv * bv).collect(),
                    g.iter().zip(a.iter()).map(|(gv, av)| gv * av).collect(),
                ]
            })),
            false,
        ))
    }

    /// Broadcast-add a 1 x d row vector to every row of an m x d matrix.
    pub fn add_row(&self, row: &Tensor) -> Result<Tensor, TensorError> {
        if row.rows() != 1 || row.cols() != self.cols() {
            return Err(self.shape_err("add_row", Some(row)));
        }
        let (m, d) = self.shape();
        let a = self.inner.data.borrow();
        let r = row.inner.data.borrow();
        let mut out = Vec::with_capacity(m * d);
        for i in 0..m {
            for j in 0..d {
                out.push(a[i * d + j] + r[j]);
            }
        }
        drop(a);
        drop(r);
        Ok(Tensor::from_parts(
            m,
            d,
            out,
            vec![self.clone(), row.clone()],
            Some(Box::new(move |g| {
                let mut gr = zeros(d);
                for i in 0..m {
                    for j in 0..d {
                        gr[j] += g[i * d + j];
                    }
                }
                vec![g.to_vec(), gr]
            })),
            false,
        ))
    }

    pub fn scale(&self, c: f64) -> Tensor {
        let out = self.inner.data.borrow().iter().map(|v| v * c).collect();
        Tensor::from_parts(
            self.rows(),
            self.cols(),
            out,
            vec![self.clone()],
            Some(Box::new(move |g| vec![g.iter().map(|v| v * c).collect()])),
            false,
        )
    }

    pub fn add_scalar(&self, c: f64) -> Tensor {
        let out = self.inner.data.borrow().iter().map(|v| v + c).collect();
        Tensor::from_parts(
            self.rows(),
            self.cols(),
            out,
            vec![self.clone()],
            Some(Box::new(|g| vec![g.to_vec()])),
            false,
        )
    }

    fn unary(&self, f: impl Fn(f64) -> f64, df: impl Fn(f64) -> f64 + 'static) -> Tensor {
        let x = self.data();
        let out: Vec<f64> = x.iter().map(|&v| f(v)).collect();
        Tensor::from_parts(
            self.rows(),
            self.cols(),
            out,
            vec![self.clone()],
            Some(Box::new(move |g| {
                vec![g.iter().zip(x.iter()).map(|(gv, &xv)| gv * df(xv)).collect()]
            })),
            false,
        )
    }

    pub fn relu(&self) -> Tensor {
        self.unary(|v| v.max(0.0), |v| if v > 0.0 { 1.0 } else { 0.0 })
    }

    pub fn sigmoid(&self) -> Tensor {
        self.unary(
            |v| 1.0 / (1.0 + (-v).exp()),
            |v| {
                let s = 1.0 / (1.0 + (-v).exp());
                s * (1.0 - s)
            },
        )
    }

    pub fn exp(&self) -> Tensor {
        self.unary(|v| v.exp(), |v| v.exp())
    }

    /// Natural log of the input clamped to [1e-12, inf).
    pub fn ln_clamped(&self) -> Tensor {
        self.unary(
            |v| v.max(1e-12).ln(),
            |v| if v >= 1e-12 { 1.0 / v } else { 0.0 },
        )
    }

    pub fn sin(&self) -> Tensor {
        self.unary(|v| v.sin(), |v| v.cos())
    }

    pub fn cos(&self) -> Tensor {
        self.unary(|v| v.cos(), |v| -v.sin())
    }

    /// Clamp values to [lo, hi]; gradient passes only in the interior.
    pub fn clamp(&self, lo: f64, hi: f64) -> Tensor {
        self.unary(
            move |v| v.clamp(lo, hi),
            move |v| if v > lo && v < hi { 1.0 } else { 0.0 },
        )
    }

    // ---- linear algebra ----

    /// self (m x k) * other (k x n).
    pub fn matmul(&self, other: &Tensor) -> Result<Tensor, TensorError> {
        if self.cols() != other.rows() {
            return Err(self.shape_err("matmul", Some(other)));
        }
        let (m, k) = self.shape();
        let n = other.cols();
        let a = self.data();
        let b = other.data();
        let mut out = zeros(m * n);
        for i in 0..m {
            for p in 0..k {
                let av = a[i * k + p];
                if av == 0.0 {
                    continue;
                }
                let brow = &b[p * n..(p + 1) * n];
                let orow = &mut out[i * n..(i + 1) * n];
                for j in 0..n {
                    orow[j] += av * brow[j];
                }
            }
        }
        Ok(Tensor::from_parts(
            m,
            n,
            out,
            vec![self.clone(), other.clone()],
            Some(Box::new(move |g| {
                // dA = g * B^T, dB = A^T * g
                let mut ga = zeros(m * k);
                let mut gb = zeros(k * n);
                for i in 0..m {
                    for p in 0..k {
                        let mut s = 0.0;
                        for j in 0..n {
                            s += g[i * n + j] * b[p * n + j];
                        }
                        ga[i * k + p] = s;
                    }
                }
                for p in 0..k {
                    for i in 0..m {
                        let av = a[i * k + p];
                        if av == 0.0 {
                            continue;
                        }
                        for j in 0..n {
                            gb[p * n + j] += av * g[i * n + j];
                        }
                    }
                }
                vec![ga, gb]
            })),
            false,
        ))
    }

    /// self (m x k) * other^T where other is (n x k).
    pub fn matmul_nt(&self, other: &Tensor) -> Result<Tensor, TensorError> {
        if self.cols() != other.cols() {
            return Err(self.shape_err("matmul_nt", Some(other)));
        }
        let (m, k) = self.shape();
        let n = other.rows();
        let a = self.data();
        let b = other.data();
        let mut out = zeros(m * n);
        for i in 0..m {
            let arow = &a[i * k..(i + 1) * k];
            for j in 0..n {
                let brow = &b[j * k..(j + 1) * k];
                let mut s = 0.0;
                for p in 0..k {
                    s += arow[p] * brow[p];
                }
                out[i * n + j] = s;
            }
        }
        Ok(Tensor::from_parts(
            m,
            n,
            out,
            vec![self.clone(), other.clone()],
            Some(Box::new(move |g| {
                // dA = g * B, dB = g^T * A
                let mut ga = zeros(m * k);
                let mut gb = zeros(n * k);
                for i in 0..m {
                    for j in 0..n {
                        let gv = g[i * n + j];
                        if gv == 0.0 {
                            continue;
                        }
                        for p in 0..k {
                            ga[i * k + p] += gv * b[j * k + p];
                            gb[j * k + p] += gv * a[i * k + p];
                        }
                    }
                }
                vec![ga, gb]
            })),
            false,
        ))
    }

    /// Horizontal concatenation of two matrices with equal row counts.
    pub fn concat_cols(&self, other: &Tensor) -> Result<Tensor, TensorError> {
        if self.rows() != other.rows() {
            return Err(self.shape_err("concat_cols", Some(other)));
        }
        let m = self.rows();
        let (da, db) = (self.cols(), other.cols());
        let a = self.inner.data.borrow();
        let b = other.inner.data.borrow();
        let mut out = Vec::with_capacity(m * (da + db));
        for i in 0..m {
            out.extend_from_slice(&a[i * da..(i + 1) * da]);
            out.extend_from_slice(&b[i * db..(i + 1) * db]);
        }
        drop(a);
        drop(b);
        Ok(Tensor::from_parts(
            m,
            da + db,
            out,
            vec![self.clone(), other.clone()],
            Some(Box::new(move |g| {
                let mut ga = zeros(m * da);
                let mut gb = zeros(m * db);
                let w = da + db;
                for i in 0..m {
                    ga[i * da..(i + 1) * da].copy_from_slice(&g[i * w..i * w + da]);
                    gb[i * db..(i + 1) * db].copy_from_slice(&g[i * w + da..(i + 1) * w]);
                }
                vec![ga, gb]
            })),
            false,
        ))
    }

    /// Select rows by index; gradient scatter-adds back.
    pub fn gather_rows(&self, idx: &[usize]) -> Result<Tensor, TensorError> {
        let (m, d) = self.shape();
        if let Some(&bad) = idx.iter().find(|&&i| i >= m) {
            return Err(TensorError::IndexOutOfRange { op: "gather_rows", index: bad, extent: m });
        }
        let a = self.inner.data.borrow();
        let mut out = Vec::with_capacity(idx.len() * d);
        for &i in idx {
            out.extend_from_slice(&a[i * d..(i + 1) * d]);
        }
        drop(a);
        let idx_owned: Vec<usize> = idx.to_vec();
        Ok(Tensor::from_parts(
            idx_owned.len(),
            d,
            out,
            vec![self.clone()],
            Some(Box::new(move |g| {
                let mut ga = zeros(m * d);
                for (r, &i) in idx_owned.iter().enumerate() {
                    for j in 0..d {
                        ga[i * d + j] += g[r * d + j];
                    }
                }
                vec![ga]
            })),
            false,
        ))
    }

    /// Mean of rows grouped by segment id; empty segments yield zero rows.
    pub fn segment_mean(&self, seg: &[usize], num_segments: usize) -> Result<Tensor, TensorError> {
        let (m, d) = self.shape();
        if seg.len() != m {
            return Err(TensorError::ShapeMismatch { op: "segment_mean", lhs: self.shape(), rhs: Some((seg.len(), 1)) });
        }
        if let Some(&bad) = seg.iter().find(|&&s| s >= num_segments) {
            return Err(TensorError::IndexOutOfRange { op: "segment_mean", index: bad, extent: num_segments });
        }
        let mut counts = vec![0usize; num_segments];
        for &s in seg {
            counts[s] += 1;
        }
        let a = self.inner.data.borrow();
        let mut out = zeros(num_segments * d);
        for (r, &s) in seg.iter().enumerate() {
            for j in 0..d {
                out[s * d + j] += a[r * d + j];
            }
        }
        for s in 0..num_segments {
            if counts[s] > 0 {
                let c = counts[s] as f64;
                for j in 0..d {
                    out[s * d + j] /= c;
                }
            }
        }
        drop(a);
        let seg_owned: Vec<usize> = seg.to_vec();
        Ok(Tensor::from_parts(
            num_segments,
            d,
            out,
            vec![self.clone()],
            Some(Box::new(move |g| {
                let mut ga = zeros(m * d);
                for (r, &s) in seg_owned.iter().enumerate() {
                    let c = counts[s] as f64;
                    for j in 0..d {
                        ga[r * d + j] = g[s * d + j] / c;
                    }
                }
                vec![ga]
            })),
            false,
        ))
    }

    /// Per-row column selection: out[r, 0] = self[r, cols[r]].
    pub fn select_per_row(&self, cols: &[usize]) -> Result<Tensor, TensorError> {
        let (m, d) = self.shape();
        if cols.len() != m {
            return Err(TensorError::ShapeMismatch { op: "select_per_row", lhs: self.shape(), rhs: Some((cols.len(), 1)) });
        }
        if let Some(&bad) = cols.iter().find(|&&c| c >= d) {
            return Err(TensorError::IndexOutOfRange { op: "select_per_row", index: bad, extent: d });
        }
        let a = self.inner.data.borrow();
        let out: Vec<f64> = cols.iter().enumerate().map(|(r, &c)| a[r * d + c]).collect();
        drop(a);
        let cols_owned: Vec<usize> = cols.to_vec();
        Ok(Tensor::from_parts(
            m,
            1,
            out,
            vec![self.clone()],
            Some(Box::new(move |g| {
                let mut ga = zeros(m * d);
                for (r, &c) in cols_owned.iter().enumerate() {
                    ga[r * d + c] = g[r];
                }
                vec![ga]
            })),
            false,
        ))
    }

    /// Row-wise softmax.
    pub fn softmax_rows(&self) -> Tensor {
        let (m, d) = self.shape();
        let a = self.data();
        let mut out = zeros(m * d);
        for i in 0..m {
            let row = &a[i * d..(i + 1) * d];
            let mx = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for j in 0..d {
                let e = (row[j] - mx).exp();
                out[i * d + j] = e;
                sum += e;
            }
            for j in 0..d {
                out[i * d + j] /= sum;
            }
        }
        let y = out.clone();
        Tensor::from_parts(
            m,
            d,
            out,
            vec![self.clone()],
            Some(Box::new(move |g| {
                let mut ga = zeros(m * d);
                for i in 0..m {
                    let yr = &y[i * d..(i + 1) * d];
                    let gr = &g[i * d..(i + 1) * d];
                    let dot: f64 = yr.iter().zip(gr.iter()).map(|(a, b)| a * b).sum();
                    for j in 0..d {
                        ga[i * d + j] = yr[j] * (gr[j] - dot);
                    }
                }
                vec![ga]
            })),
            false,
        )
    }

    // ---- reductions ----

    pub fn sum_all(&self) -> Tensor {
        let s: f64 = self.inner.data.borrow().iter().sum();
        let n = self.len();
        let (m, d) = self.shape();
        let _ = (m, d);
        Tensor::from_parts(
            1,
            1,
            vec![s],
            vec![self.clone()],
            Some(Box::new(move |g| vec![vec![g[0]; n]])),
            false,
        )
    }

    pub fn mean_all(&self) -> Tensor {
        let n = self.len().max(1);
        self.sum_all().scale(1.0 / n as f64)
    }

    // ---- backward ----

    /// Reverse-mode sweep from a scalar loss. Deposits gradients on every
    /// parameter leaf reachable from this node, then clears the tape root.
    pub fn backward(&self) -> Result<(), TensorError> {
        if self.len() != 1 {
            return Err(TensorError::NonScalarBackward { shape: self.shape() });
        }
        if self.inner.spent.get() {
            return Err(TensorError::DoubleBackward);
        }
        if !self.inner.tracked {
            // a constant loss has no parameters to differentiate
            self.inner.spent.set(true);
            return Ok(());
        }
        // topological order by DFS on node identity
        let mut order: Vec<Tensor> = Vec::new();
        let mut visited: HashMap<*const Inner, ()> = HashMap::new();
        let mut stack: Vec<(Tensor, usize)> = vec![(self.clone(), 0)];
        visited.insert(Rc::as_ptr(&self.inner), ());
        while let Some((node, child)) = stack.pop() {
            if child < node.inner.parents.len() {
                let next = node.inner.parents[child].clone();
                stack.push((node, child + 1));
                let ptr = Rc::as_ptr(&next.inner);
                if next.inner.tracked && !visited.contains_key(&ptr) {
                    visited.insert(ptr, ());
                    stack.push((next, 0));
                }
            } else {
                order.push(node);
            }
        }
        // order is post-order: parents before children; iterate reversed
        let mut grads: HashMap<*const Inner, Vec<f64>> = HashMap::new();
        grads.insert(Rc::as_ptr(&self.inner), vec![1.0]);
        for node in order.iter().rev() {
            let ptr = Rc::as_ptr(&node.inner);
            let g = match grads.remove(&ptr) {
                Some(g) => g,
                None => continue,
            };
            if node.inner.is_param {
                let mut slot = node.inner.grad.borrow_mut();
                match slot.as_mut() {
                    Some(acc) => {
                        for (a, b) in acc.iter_mut().zip(g.iter()) {
                            *a += b;
                        }
                    }
                    None => *slot = Some(g),
                }
                continue;
            }
            if let Some(back) = &node.inner.backward {
                let parent_grads = back(&g);
                for (p, pg) in node.inner.parents.iter().zip(parent_grads) {
                    if !p.inner.tracked {
                        continue;
                    }
                    let pptr = Rc::as_ptr(&p.inner);
                    match grads.get_mut(&pptr) {
                        Some(acc) => {
                            for (a, b) in acc.iter_mut().zip(pg.iter()) {
                                *a += b;
                            }
                        }
                        None => {
                            grads.insert(pptr, pg);
                        }
                    }
                }
            }
        }
        self.inner.spent.set(true);
        Ok(())
    }
}

impl std::fmt::Debug for Tensor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Tensor")
            .field("shape", &self.shape())
            .field("param", &self.inner.is_param)
            .finish()
    }
}
