//! Reverse-mode autodiff over a flat computation tape.
//!
//! Every forward op appends one node; node index order is the topological
//! order, so the backward pass is a single reverse sweep that visits each
//! node exactly once. Values are immutable once recorded. A tape admits one
//! backward pass; `reset_grads` re-arms it and a second sweep reproduces
//! identical gradients.

use crate::error::TensorError;
use crate::tensor::Tensor;
use crate::{lit, Scalar};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct TensorId(pub(crate) usize);

enum Op<S> {
    Leaf,
    MatMul {
        a: TensorId,
        b: TensorId,
    },
    Add {
        a: TensorId,
        b: TensorId,
    },
    Sub {
        a: TensorId,
        b: TensorId,
    },
    Mul {
        a: TensorId,
        b: TensorId,
    },
    /// Row-broadcast bias add: [n, d] + [d].
    AddBias {
        a: TensorId,
        bias: TensorId,
    },
    Scale {
        a: TensorId,
        c: S,
    },
    Tanh {
        a: TensorId,
    },
    Gelu {
        a: TensorId,
    },
    LayerNorm {
        x: TensorId,
        gain: TensorId,
        bias: TensorId,
        eps: S,
    },
    Softmax {
        a: TensorId,
        axis: usize,
    },
    /// Multi-head causal attention restricted to per-window segments.
    /// `weights` holds the softmax rows saved by the forward pass,
    /// laid out as [head][row][key-within-window].
    Attention {
        q: TensorId,
        k: TensorId,
        v: TensorId,
        heads: usize,
        group: usize,
        key_ok: Vec<bool>,
        weights: Vec<S>,
    },
    /// Interleaves rows of three [w*g, d] inputs into [w*3g, d]:
    /// within each window of g rows, output rows cycle a, b, c.
    Interleave3 {
        a: TensorId,
        b: TensorId,
        c: TensorId,
        group: usize,
    },
    GatherRows {
        a: TensorId,
        indices: Vec<usize>,
    },
    Dropout {
        a: TensorId,
        mask: Vec<bool>,
        keep: S,
    },
    SumAll {
        a: TensorId,
    },
}

impl<S> Op<S> {
    fn inputs(&self) -> Vec<TensorId> {
        match *self {
            Op::Leaf => vec![],
            Op::MatMul { a, b }
            | Op::Add { a, b }
            | Op::Sub { a, b }
            | Op::Mul { a, b }
            | Op::AddBias { a, bias: b } => vec![a, b],
            Op::Scale { a, .. }
            | Op::Tanh { a }
            | Op::Gelu { a }
            | Op::Softmax { a, .. }
            | Op::GatherRows { a, .. }
            | Op::Dropout { a, .. }
            | Op::SumAll { a } => vec![a],
            Op::LayerNorm { x, gain, bias, .. } => vec![x, gain, bias],
            Op::Attention { q, k, v, .. } => vec![q, k, v],
            Op::Interleave3 { a, b, c, .. } => vec![a, b, c],
        }
    }
}

pub struct Tape<S> {
    values: Vec<Tensor<S>>,
    ops: Vec<Op<S>>,
    requires: Vec<bool>,
    grads: Vec<Option<Vec<S>>>,
    consumed: bool,
}

impl<S: Scalar> Default for Tape<S> {
    fn default() -> Self {
        Self::new()
    }
}

impl<S: Scalar> Tape<S> {
    pub fn new() -> Self {
        Self {
            values: Vec::new(),
            ops: Vec::new(),
            requires: Vec::new(),
            grads: Vec::new(),
            consumed: false,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn leaf(&mut self, value: Tensor<S>, requires_grad: bool) -> TensorId {
        self.push_with(value, Op::Leaf, requires_grad)
    }

    /// Leaf that never receives a gradient (masks, targets, lookup tables).
    pub fn constant(&mut self, value: Tensor<S>) -> TensorId {
        self.leaf(value, false)
    }

    pub fn value(&self, id: TensorId) -> &Tensor<S> {
        &self.values[id.0]
    }

    pub fn grad(&self, id: TensorId) -> Option<&[S]> {
        self.grads[id.0].as_deref()
    }

    pub fn requires_grad(&self, id: TensorId) -> bool {
        self.requires[id.0]
    }

    fn push(&mut self, value: Tensor<S>, op: Op<S>) -> TensorId {
        let requires = op.inputs().iter().any(|id| self.requires[id.0]);
        self.push_with(value, op, requires)
    }

    fn push_with(&mut self, value: Tensor<S>, op: Op<S>, requires: bool) -> TensorId {
        let id = TensorId(self.values.len());
        self.values.push(value);
        self.ops.push(op);
        self.requires.push(requires);
        self.grads.push(None);
        id
    }

    fn shape_of(&self, id: TensorId) -> &[usize] {
        self.values[id.0].shape()
    }

    // ── forward ops ─────────────────────────────────────────────────────

    pub fn matmul(&mut self, a: TensorId, b: TensorId) -> Result<TensorId, TensorError> {
        let (ash, bsh) = (self.shape_of(a), self.shape_of(b));
        if ash.len() != 2 {
            return Err(TensorError::RankMismatch {
                op: "matmul",
                expected: 2,
                shape: ash.to_vec(),
            });
        }
        if bsh.len() != 2 || ash[1] != bsh[0] {
            return Err(TensorError::ShapeMismatch {
                op: "matmul",
                lhs: ash.to_vec(),
                rhs: bsh.to_vec(),
            });
        }
        let (m, k, n) = (ash[0], ash[1], bsh[1]);
        let data = matmul_nn(self.values[a.0].data(), self.values[b.0].data(), m, k, n);
        let out = Tensor::new(vec![m, n], data)?;
        Ok(self.push(out, Op::MatMul { a, b }))
    }

    pub fn add(&mut self, a: TensorId, b: TensorId) -> Result<TensorId, TensorError> {
        self.zip_same_shape("add", a, b, |x, y| x + y, Op::Add { a, b })
    }

    pub fn sub(&mut self, a: TensorId, b: TensorId) -> Result<TensorId, TensorError> {
        self.zip_same_shape("sub", a, b, |x, y| x - y, Op::Sub { a, b })
    }

    pub fn mul(&mut self, a: TensorId, b: TensorId) -> Result<TensorId, TensorError> {
        self.zip_same_shape("mul", a, b, |x, y| x * y, Op::Mul { a, b })
    }

    fn zip_same_shape(
        &mut self,
        name: &'static str,
        a: TensorId,
        b: TensorId,
        f: impl Fn(S, S) -> S,
        op: Op<S>,
    ) -> Result<TensorId, TensorError> {
        if self.shape_of(a) != self.shape_of(b) {
            return Err(TensorError::ShapeMismatch {
                op: name,
                lhs: self.shape_of(a).to_vec(),
                rhs: self.shape_of(b).to_vec(),
            });
        }
        let data: Vec<S> = self.values[a.0]
            .data()
            .iter()
            .zip(self.values[b.0].data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        let out = Tensor::new(self.shape_of(a).to_vec(), data)?;
        Ok(self.push(out, op))
    }

    pub fn add_bias(&mut self, a: TensorId, bias: TensorId) -> Result<TensorId, TensorError> {
        let (ash, bsh) = (self.shape_of(a), self.shape_of(bias));
        if ash.len() != 2 || bsh.len() != 1 || bsh[0] != ash[1] {
            return Err(TensorError::ShapeMismatch {
                op: "add_bias",
                lhs: ash.to_vec(),
                rhs: bsh.to_vec(),
            });
        }
        let (n, d) = (ash[0], ash[1]);
        let bdata = self.values[bias.0].data();
        let mut data = Vec::with_capacity(n * d);
        for row in self.values[a.0].data().chunks_exact(d) {
            data.extend(row.iter().zip(bdata).map(|(&x, &b)| x + b));
        }
        let out = Tensor::new(vec![n, d], data)?;
        Ok(self.push(out, Op::AddBias { a, bias }))
    }

    pub fn scale(&mut self, a: TensorId, c: S) -> TensorId {
        let data: Vec<S> = self.values[a.0].data().iter().map(|&x| x * c).collect();
        let out = Tensor::new(self.shape_of(a).to_vec(), data).expect("shape preserved");
        self.push(out, Op::Scale { a, c })
    }

    pub fn tanh(&mut self, a: TensorId) -> TensorId {
        let data: Vec<S> = self.values[a.0].data().iter().map(|x| x.tanh()).collect();
        let out = Tensor::new(self.shape_of(a).to_vec(), data).expect("shape preserved");
        self.push(out, Op::Tanh { a })
    }

    pub fn gelu(&mut self, a: TensorId) -> TensorId {
        let data: Vec<S> = self.values[a.0].data().iter().map(|&x| gelu_fwd(x)).collect();
        let out = Tensor::new(self.shape_of(a).to_vec(), data).expect("shape preserved");
        self.push(out, Op::Gelu { a })
    }

    /// Normalizes each row of the last axis to mean 0 / variance 1, then
    /// applies `gain` and `bias` elementwise.
    pub fn layer_norm(
        &mut self,
        x: TensorId,
        gain: TensorId,
        bias: TensorId,
        eps: S,
    ) -> Result<TensorId, TensorError> {
        let xsh = self.shape_of(x).to_vec();
        let d = *xsh.last().expect("layer_norm input has rank >= 1");
        for (name, id) in [("gain", gain), ("bias", bias)] {
            let s = self.shape_of(id);
            if s != [d] {
                return Err(TensorError::ShapeMismatch {
                    op: if name == "gain" {
                        "layer_norm gain"
                    } else {
                        "layer_norm bias"
                    },
                    lhs: xsh.clone(),
                    rhs: s.to_vec(),
                });
            }
        }
        let gdata = self.values[gain.0].data();
        let bdata = self.values[bias.0].data();
        let xdata = self.values[x.0].data();
        let mut data = Vec::with_capacity(xdata.len());
        let inv_d = S::one() / lit::<S>(d as f64);
        for row in xdata.chunks_exact(d) {
            let mean = row.iter().copied().sum::<S>() * inv_d;
            let var = row
                .iter()
                .map(|&v| (v - mean) * (v - mean))
                .sum::<S>()
                * inv_d;
            let inv_std = S::one() / (var + eps).sqrt();
            for j in 0..d {
                data.push((row[j] - mean) * inv_std * gdata[j] + bdata[j]);
            }
        }
        let out = Tensor::new(xsh, data)?;
        Ok(self.push(out, Op::LayerNorm { x, gain, bias, eps }))
    }

    /// Max-subtracted softmax along `axis`.
    pub fn softmax(&mut self, a: TensorId, axis: usize) -> Result<TensorId, TensorError> {
        let ash = self.shape_of(a).to_vec();
        if axis >= ash.len() {
            return Err(TensorError::AxisOutOfRange {
                op: "softmax",
                axis,
                shape: ash,
            });
        }
        let adata = self.values[a.0].data();
        let axis_n = ash[axis];
        let outer: usize = ash[..axis].iter().product();
        let inner: usize = ash[axis + 1..].iter().product();
        let mut data = vec![S::zero(); adata.len()];
        for o in 0..outer {
            for i in 0..inner {
                let idx = |j: usize| (o * axis_n + j) * inner + i;
                let mut max = S::neg_infinity();
                for j in 0..axis_n {
                    max = max.max(adata[idx(j)]);
                }
                let mut sum = S::zero();
                for j in 0..axis_n {
                    let e = (adata[idx(j)] - max).exp();
                    data[idx(j)] = e;
                    sum = sum + e;
                }
                for j in 0..axis_n {
                    data[idx(j)] = data[idx(j)] / sum;
                }
            }
        }
        let out = Tensor::new(ash, data)?;
        Ok(self.push(out, Op::Softmax { a, axis }))
    }

    /// Causal multi-head attention over per-window segments.
    ///
    /// `q`, `k`, `v` are [t, d] with `t` a multiple of `group`; rows are
    /// consecutive windows of `group` tokens. Query row `i` attends to key
    /// row `j` exactly when both sit in the same window, `j <= i`, and
    /// `key_ok[j]` holds. Scores of disallowed keys are never computed, so
    /// outputs at earlier rows are bit-identical under any change to later
    /// rows. A query with no allowed key yields a zero row.
    pub fn attention(
        &mut self,
        q: TensorId,
        k: TensorId,
        v: TensorId,
        heads: usize,
        group: usize,
        key_ok: Vec<bool>,
    ) -> Result<TensorId, TensorError> {
        let qsh = self.shape_of(q).to_vec();
        for (other, name) in [(k, "attention keys"), (v, "attention values")] {
            if self.shape_of(other) != qsh.as_slice() {
                return Err(TensorError::ShapeMismatch {
                    op: name,
                    lhs: qsh.clone(),
                    rhs: self.shape_of(other).to_vec(),
                });
            }
        }
        if qsh.len() != 2 {
            return Err(TensorError::RankMismatch {
                op: "attention",
                expected: 2,
                shape: qsh,
            });
        }
        let (t, d) = (qsh[0], qsh[1]);
        if heads == 0 || d % heads != 0 || group == 0 || t % group != 0 || key_ok.len() != t {
            return Err(TensorError::Invalid {
                op: "attention",
                detail: format!(
                    "t={t} d={d} heads={heads} group={group} key_ok={}",
                    key_ok.len()
                ),
            });
        }
        let dh = d / heads;
        let scale = lit::<S>(1.0 / (dh as f64).sqrt());
        let qd = self.values[q.0].data();
        let kd = self.values[k.0].data();
        let vd = self.values[v.0].data();
        let mut out = vec![S::zero(); t * d];
        let mut weights = vec![S::zero(); heads * t * group];
        let mut scores = vec![S::zero(); group];
        for h in 0..heads {
            let c0 = h * dh;
            for w in 0..t / group {
                let base = w * group;
                for i in 0..group {
                    let gi = base + i;
                    let qrow = &qd[gi * d + c0..gi * d + c0 + dh];
                    let mut max = S::neg_infinity();
                    let mut any = false;
                    for j in 0..=i {
                        if !key_ok[base + j] {
                            continue;
                        }
                        let krow = &kd[(base + j) * d + c0..(base + j) * d + c0 + dh];
                        let mut dot = S::zero();
                        for c in 0..dh {
                            dot = dot + qrow[c] * krow[c];
                        }
                        let s = dot * scale;
                        scores[j] = s;
                        max = max.max(s);
                        any = true;
                    }
                    if !any {
                        continue; // fully padded query: zero output row
                    }
                    let mut sum = S::zero();
                    for j in 0..=i {
                        if key_ok[base + j] {
                            let e = (scores[j] - max).exp();
                            scores[j] = e;
                            sum = sum + e;
                        }
                    }
                    let wrow = &mut weights[(h * t + gi) * group..(h * t + gi + 1) * group];
                    for j in 0..=i {
                        if key_ok[base + j] {
                            let wt = scores[j] / sum;
                            wrow[j] = wt;
                            let vrow = &vd[(base + j) * d + c0..(base + j) * d + c0 + dh];
                            let orow = &mut out[gi * d + c0..gi * d + c0 + dh];
                            for c in 0..dh {
                                orow[c] = orow[c] + wt * vrow[c];
                            }
                        }
                    }
                }
            }
        }
        let out = Tensor::new(vec![t, d], out)?;
        Ok(self.push(
            out,
            Op::Attention {
                q,
                k,
                v,
                heads,
                group,
                key_ok,
                weights,
            },
        ))
    }

    /// Per-window row interleave of three equally shaped [w*g, d] tensors.
    pub fn interleave3(
        &mut self,
        a: TensorId,
        b: TensorId,
        c: TensorId,
        group: usize,
    ) -> Result<TensorId, TensorError> {
        let ash = self.shape_of(a).to_vec();
        for other in [b, c] {
            if self.shape_of(other) != ash.as_slice() {
                return Err(TensorError::ShapeMismatch {
                    op: "interleave3",
                    lhs: ash.clone(),
                    rhs: self.shape_of(other).to_vec(),
                });
            }
        }
        if ash.len() != 2 || group == 0 || ash[0] % group != 0 {
            return Err(TensorError::Invalid {
                op: "interleave3",
                detail: format!("shape {ash:?} with group {group}"),
            });
        }
        let (n, d) = (ash[0], ash[1]);
        let mut data = vec![S::zero(); 3 * n * d];
        for (slot, src) in [a, b, c].into_iter().enumerate() {
            let sdata = self.values[src.0].data();
            for w in 0..n / group {
                for t in 0..group {
                    let dst_row = w * 3 * group + 3 * t + slot;
                    let src_row = w * group + t;
                    data[dst_row * d..(dst_row + 1) * d]
                        .copy_from_slice(&sdata[src_row * d..(src_row + 1) * d]);
                }
            }
        }
        let out = Tensor::new(vec![3 * n, d], data)?;
        Ok(self.push(out, Op::Interleave3 { a, b, c, group }))
    }

    pub fn gather_rows(
        &mut self,
        a: TensorId,
        indices: Vec<usize>,
    ) -> Result<TensorId, TensorError> {
        let ash = self.shape_of(a);
        if ash.len() != 2 {
            return Err(TensorError::RankMismatch {
                op: "gather_rows",
                expected: 2,
                shape: ash.to_vec(),
            });
        }
        let (rows, d) = (ash[0], ash[1]);
        if let Some(&bad) = indices.iter().find(|&&i| i >= rows) {
            return Err(TensorError::RowOutOfRange {
                op: "gather_rows",
                index: bad,
                rows,
            });
        }
        let adata = self.values[a.0].data();
        let mut data = Vec::with_capacity(indices.len() * d);
        for &i in &indices {
            data.extend_from_slice(&adata[i * d..(i + 1) * d]);
        }
        let out = Tensor::new(vec![indices.len(), d], data)?;
        Ok(self.push(out, Op::GatherRows { a, indices }))
    }

    /// Inverted dropout with a caller-supplied keep mask.
    pub fn dropout(
        &mut self,
        a: TensorId,
        mask: Vec<bool>,
        keep_prob: f64,
    ) -> Result<TensorId, TensorError> {
        let n = self.values[a.0].numel();
        if mask.len() != n || keep_prob <= 0.0 || keep_prob > 1.0 {
            return Err(TensorError::Invalid {
                op: "dropout",
                detail: format!("mask {} vs {} elements, keep {}", mask.len(), n, keep_prob),
            });
        }
        let keep = lit::<S>(keep_prob);
        let inv = S::one() / keep;
        let data: Vec<S> = self.values[a.0]
            .data()
            .iter()
            .zip(&mask)
            .map(|(&x, &m)| if m { x * inv } else { S::zero() })
            .collect();
        let out = Tensor::new(self.shape_of(a).to_vec(), data)?;
        Ok(self.push(out, Op::Dropout { a, mask, keep }))
    }

    pub fn sum_all(&mut self, a: TensorId) -> TensorId {
        let s = self.values[a.0].data().iter().copied().sum::<S>();
        self.push(Tensor::scalar(s), Op::SumAll { a })
    }

    pub fn mean_all(&mut self, a: TensorId) -> TensorId {
        let n = self.values[a.0].numel();
        let s = self.sum_all(a);
        self.scale(s, S::one() / lit::<S>(n as f64))
    }

    // ── backward ────────────────────────────────────────────────────────

    /// Accumulates gradients of `loss` into every upstream node that
    /// requires them. Errors on a non-scalar loss or a tape whose backward
    /// already ran without an intervening `reset_grads`.
    pub fn backward(&mut self, loss: TensorId) -> Result<(), TensorError> {
        if !self.values[loss.0].is_scalar() {
            return Err(TensorError::NonScalarLoss {
                shape: self.values[loss.0].shape().to_vec(),
            });
        }
        if self.consumed {
            return Err(TensorError::BackwardConsumed);
        }
        self.consumed = true;
        self.grads[loss.0] = Some(vec![S::one()]);
        for i in (0..self.values.len()).rev() {
            if self.grads[i].is_none() || !self.requires[i] {
                continue;
            }
            let g = self.grads[i].take().expect("checked above");
            self.propagate(i, &g);
            self.grads[i] = Some(g);
        }
        Ok(())
    }

    /// Clears all gradients and re-arms the tape for another backward pass.
    pub fn reset_grads(&mut self) {
        for g in &mut self.grads {
            *g = None;
        }
        self.consumed = false;
    }

    fn acc(&mut self, id: TensorId, contrib: &[S]) {
        if !self.requires[id.0] {
            return;
        }
        match &mut self.grads[id.0] {
            Some(g) => {
                for (gi, &ci) in g.iter_mut().zip(contrib) {
                    *gi = *gi + ci;
                }
            }
            slot => *slot = Some(contrib.to_vec()),
        }
    }

    fn propagate(&mut self, i: usize, g: &[S]) {
        match &self.ops[i] {
            Op::Leaf => {}
            Op::MatMul { a, b } => {
                let (a, b) = (*a, *b);
                let ash = self.shape_of(a);
                let (m, k) = (ash[0], ash[1]);
                let n = self.shape_of(b)[1];
                let da = matmul_nt(g, self.values[b.0].data(), m, n, k);
                let db = matmul_tn(self.values[a.0].data(), g, m, k, n);
                self.acc(a, &da);
                self.acc(b, &db);
            }
            Op::Add { a, b } => {
                let (a, b) = (*a, *b);
                self.acc(a, g);
                self.acc(b, g);
            }
            Op::Sub { a, b } => {
                let (a, b) = (*a, *b);
                self.acc(a, g);
                let neg: Vec<S> = g.iter().map(|&x| -x).collect();
                self.acc(b, &neg);
            }
            Op::Mul { a, b } => {
                let (a, b) = (*a, *b);
                let da: Vec<S> = g
                    .iter()
                    .zip(self.values[b.0].data())
                    .map(|(&gi, &bi)| gi * bi)
                    .collect();
                let db: Vec<S> = g
                    .iter()
                    .zip(self.values[a.0].data())
                    .map(|(&gi, &ai)| gi * ai)
                    .collect();
                self.acc(a, &da);
                self.acc(b, &db);
            }
            Op::AddBias { a, bias } => {
                let (a, bias) = (*a, *bias);
                let d = self.shape_of(bias)[0];
                let mut db = vec![S::zero(); d];
                for row in g.chunks_exact(d) {
                    for (acc, &gi) in db.iter_mut().zip(row) {
                        *acc = *acc + gi;
                    }
                }
                self.acc(a, g);
                self.acc(bias, &db);
            }
            Op::Scale { a, c } => {
                let (a, c) = (*a, *c);
                let da: Vec<S> = g.iter().map(|&gi| gi * c).collect();
                self.acc(a, &da);
            }
            Op::Tanh { a } => {
                let a = *a;
                let da: Vec<S> = g
                    .iter()
                    .zip(self.values[i].data())
                    .map(|(&gi, &y)| gi * (S::one() - y * y))
                    .collect();
                self.acc(a, &da);
            }
            Op::Gelu { a } => {
                let a = *a;
                let da: Vec<S> = g
                    .iter()
                    .zip(self.values[a.0].data())
                    .map(|(&gi, &x)| gi * gelu_bwd(x))
                    .collect();
                self.acc(a, &da);
            }
            Op::LayerNorm { x, gain, bias, eps } => {
                let (x, gain, bias, eps) = (*x, *gain, *bias, *eps);
                let d = *self.shape_of(x).last().expect("rank >= 1");
                let xdata = self.values[x.0].data();
                let gdata = self.values[gain.0].data();
                let inv_d = S::one() / lit::<S>(d as f64);
                let mut dx = vec![S::zero(); xdata.len()];
                let mut dgain = vec![S::zero(); d];
                let mut dbias = vec![S::zero(); d];
                for (r, row) in xdata.chunks_exact(d).enumerate() {
                    let grow = &g[r * d..(r + 1) * d];
                    let mean = row.iter().copied().sum::<S>() * inv_d;
                    let var = row
                        .iter()
                        .map(|&v| (v - mean) * (v - mean))
                        .sum::<S>()
                        * inv_d;
                    let inv_std = S::one() / (var + eps).sqrt();
                    let mut sum_dxhat = S::zero();
                    let mut sum_dxhat_xhat = S::zero();
                    for j in 0..d {
                        let xhat = (row[j] - mean) * inv_std;
                        let dxhat = grow[j] * gdata[j];
                        dgain[j] = dgain[j] + grow[j] * xhat;
                        dbias[j] = dbias[j] + grow[j];
                        sum_dxhat = sum_dxhat + dxhat;
                        sum_dxhat_xhat = sum_dxhat_xhat + dxhat * xhat;
                    }
                    for j in 0..d {
                        let xhat = (row[j] - mean) * inv_std;
                        let dxhat = grow[j] * gdata[j];
                        dx[r * d + j] =
                            inv_std * (dxhat - inv_d * (sum_dxhat + xhat * sum_dxhat_xhat));
                    }
                }
                self.acc(x, &dx);
                self.acc(gain, &dgain);
                self.acc(bias, &dbias);
            }
            Op::Softmax { a, axis } => {
                let (a, axis) = (*a, *axis);
                let sh = self.values[i].shape().to_vec();
                let axis_n = sh[axis];
                let outer: usize = sh[..axis].iter().product();
                let inner: usize = sh[axis + 1..].iter().product();
                let y = self.values[i].data();
                let mut da = vec![S::zero(); y.len()];
                for o in 0..outer {
                    for ii in 0..inner {
                        let idx = |j: usize| (o * axis_n + j) * inner + ii;
                        let mut dot = S::zero();
                        for j in 0..axis_n {
                            dot = dot + g[idx(j)] * y[idx(j)];
                        }
                        for j in 0..axis_n {
                            da[idx(j)] = y[idx(j)] * (g[idx(j)] - dot);
                        }
                    }
                }
                self.acc(a, &da);
            }
            Op::Attention {
                q,
                k,
                v,
                heads,
                group,
                key_ok,
                weights,
            } => {
                let (q, k, v, heads, group) = (*q, *k, *v, *heads, *group);
                let d = self.shape_of(q)[1];
                let t = self.shape_of(q)[0];
                let dh = d / heads;
                let scale = lit::<S>(1.0 / (dh as f64).sqrt());
                let qd = self.values[q.0].data();
                let kd = self.values[k.0].data();
                let vd = self.values[v.0].data();
                let mut dq = vec![S::zero(); t * d];
                let mut dk = vec![S::zero(); t * d];
                let mut dv = vec![S::zero(); t * d];
                let mut dw = vec![S::zero(); group];
                for h in 0..heads {
                    let c0 = h * dh;
                    for w in 0..t / group {
                        let base = w * group;
                        for ii in 0..group {
                            let gi = base + ii;
                            let grow = &g[gi * d + c0..gi * d + c0 + dh];
                            let wrow = &weights[(h * t + gi) * group..(h * t + gi + 1) * group];
                            let mut dot_w_dw = S::zero();
                            for j in 0..=ii {
                                if !key_ok[base + j] {
                                    continue;
                                }
                                let vrow = &vd[(base + j) * d + c0..(base + j) * d + c0 + dh];
                                let mut dwj = S::zero();
                                for c in 0..dh {
                                    dwj = dwj + grow[c] * vrow[c];
                                }
                                dw[j] = dwj;
                                dot_w_dw = dot_w_dw + wrow[j] * dwj;
                                let dvrow =
                                    &mut dv[(base + j) * d + c0..(base + j) * d + c0 + dh];
                                for c in 0..dh {
                                    dvrow[c] = dvrow[c] + wrow[j] * grow[c];
                                }
                            }
                            for j in 0..=ii {
                                if !key_ok[base + j] {
                                    continue;
                                }
                                let ds = wrow[j] * (dw[j] - dot_w_dw) * scale;
                                let krow = &kd[(base + j) * d + c0..(base + j) * d + c0 + dh];
                                let qrow = &qd[gi * d + c0..gi * d + c0 + dh];
                                let dqrow = &mut dq[gi * d + c0..gi * d + c0 + dh];
                                for c in 0..dh {
                                    dqrow[c] = dqrow[c] + ds * krow[c];
                                }
                                let dkrow =
                                    &mut dk[(base + j) * d + c0..(base + j) * d + c0 + dh];
                                for c in 0..dh {
                                    dkrow[c] = dkrow[c] + ds * qrow[c];
                                }
                            }
                        }
                    }
                }
                self.acc(q, &dq);
                self.acc(k, &dk);
                self.acc(v, &dv);
            }
            Op::Interleave3 { a, b, c, group } => {
                let (a, b, c, group) = (*a, *b, *c, *group);
                let d = self.shape_of(a)[1];
                let n = self.shape_of(a)[0];
                for (slot, dst) in [a, b, c].into_iter().enumerate() {
                    let mut dslot = vec![S::zero(); n * d];
                    for w in 0..n / group {
                        for tt in 0..group {
                            let src_row = w * 3 * group + 3 * tt + slot;
                            let dst_row = w * group + tt;
                            dslot[dst_row * d..(dst_row + 1) * d]
                                .copy_from_slice(&g[src_row * d..(src_row + 1) * d]);
                        }
                    }
                    self.acc(dst, &dslot);
                }
            }
            Op::GatherRows { a, indices } => {
                let a = *a;
                let ash = self.shape_of(a);
                let (rows, d) = (ash[0], ash[1]);
                let mut da = vec![S::zero(); rows * d];
                for (r, &src) in indices.iter().enumerate() {
                    let grow = &g[r * d..(r + 1) * d];
                    let darow = &mut da[src * d..(src + 1) * d];
                    for c in 0..d {
                        darow[c] = darow[c] + grow[c];
                    }
                }
                self.acc(a, &da);
            }
            Op::Dropout { a, mask, keep } => {
                let (a, keep) = (*a, *keep);
                let inv = S::one() / keep;
                let da: Vec<S> = g
                    .iter()
                    .zip(mask)
                    .map(|(&gi, &m)| if m { gi * inv } else { S::zero() })
                    .collect();
                self.acc(a, &da);
            }
            Op::SumAll { a } => {
                let a = *a;
                let n = self.values[a.0].numel();
                let da = vec![g[0]; n];
                self.acc(a, &da);
            }
        }
    }
}

// ── raw kernels ─────────────────────────────────────────────────────────

/// C[m,n] = A[m,k] · B[k,n]; ikj order keeps the inner loop contiguous.
fn matmul_nn<S: Scalar>(a: &[S], b: &[S], m: usize, k: usize, n: usize) -> Vec<S> {
    let mut c = vec![S::zero(); m * n];
    for i in 0..m {
        let crow = &mut c[i * n..(i + 1) * n];
        for l in 0..k {
            let av = a[i * k + l];
            let brow = &b[l * n..(l + 1) * n];
            for j in 0..n {
                crow[j] = crow[j] + av * brow[j];
            }
        }
    }
    c
}

/// C[m,k] = A[m,n] · B[k,n]ᵀ — rows of both operands are contiguous.
fn matmul_nt<S: Scalar>(a: &[S], b: &[S], m: usize, n: usize, k: usize) -> Vec<S> {
    let mut c = vec![S::zero(); m * k];
    for i in 0..m {
        let arow = &a[i * n..(i + 1) * n];
        for l in 0..k {
            let brow = &b[l * n..(l + 1) * n];
            let mut dot = S::zero();
            for j in 0..n {
                dot = dot + arow[j] * brow[j];
            }
            c[i * k + l] = dot;
        }
    }
    c
}

/// C[k,n] = A[m,k]ᵀ · B[m,n].
fn matmul_tn<S: Scalar>(a: &[S], b: &[S], m: usize, k: usize, n: usize) -> Vec<S> {
    let mut c = vec![S::zero(); k * n];
    for i in 0..m {
        let brow = &b[i * n..(i + 1) * n];
        for l in 0..k {
            let av = a[i * k + l];
            let crow = &mut c[l * n..(l + 1) * n];
            for j in 0..n {
                crow[j] = crow[j] + av * brow[j];
            }
        }
    }
    c
}

fn gelu_fwd<S: Scalar>(x: S) -> S {
    let half = lit::<S>(0.5);
    let c = lit::<S>(0.7978845608028654); // sqrt(2/pi)
    let k = lit::<S>(0.044715);
    half * x * (S::one() + (c * (x + k * x * x * x)).tanh())
}

fn gelu_bwd<S: Scalar>(x: S) -> S {
    let half = lit::<S>(0.5);
    let c = lit::<S>(0.7978845608028654);
    let k = lit::<S>(0.044715);
    let inner = c * (x + k * x * x * x);
    let th = inner.tanh();
    let sech2 = S::one() - th * th;
    let dinner = c * (S::one() + lit::<S>(3.0) * k * x * x);
    half * (S::one() + th) + half * x * sech2 * dinner
}
