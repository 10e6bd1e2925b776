//! A small reverse-mode tape over [`Tensor`] values.
//!
//! Nodes are appended in evaluation order, so walking the tape backwards is a
//! valid topological order for the backward pass.

use std::collections::BTreeMap;

use rand::Rng;

use super::params::ParamStore;
use super::tensor::{self, LayerNormCache, Tensor};
use crate::error::{Error, Result};

/// Handle to a node on a [`Graph`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug)]
enum Op {
    Constant,
    Param(String),
    MatMul(Var, Var),
    Transpose(Var),
    Add(Var, Var),
    AddBias(Var, Var),
    Mul(Var, Var),
    Scale(Var, f64),
    Softmax(Var),
    CausalSoftmax(Var),
    LayerNorm {
        x: Var,
        gamma: Var,
        beta: Var,
        cache: LayerNormCache,
    },
    Gelu(Var),
    Embedding {
        table: Var,
        ids: Vec<usize>,
    },
    Dropout {
        x: Var,
        mask: Vec<f64>,
    },
    SliceCols {
        x: Var,
        start: usize,
    },
    ConcatCols(Vec<Var>),
    ConcatRows(Vec<Var>),
    CrossEntropy {
        logits: Var,
        targets: Vec<usize>,
        mask: Vec<bool>,
        probs: Tensor,
    },
}

struct Node {
    value: Tensor,
    op: Op,
}

#[derive(Default)]
pub struct Graph {
    nodes: Vec<Node>,
}

/// Gradients of a scalar output with respect to every node that fed it.
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
}

impl Gradients {
    pub fn get(&self, v: Var) -> Option<&Tensor> {
        self.grads.get(v.0).and_then(Option::as_ref)
    }
}

impl Graph {
    pub fn new() -> Self {
        Graph::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    pub fn value(&self, v: Var) -> &Tensor {
        &self.nodes[v.0].value
    }

    /// Non-trainable input.
    pub fn constant(&mut self, t: Tensor) -> Var {
        self.push(t, Op::Constant)
    }

    /// Trainable leaf bound to a named parameter of `store`.
    pub fn param(&mut self, store: &ParamStore, name: &str) -> Result<Var> {
        let t = store
            .get(name)
            .ok_or_else(|| Error::State(format!("unknown parameter {name}")))?
            .clone();
        Ok(self.push(t, Op::Param(name.to_string())))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = tensor::matmul(self.value(a), self.value(b))?;
        Ok(self.push(v, Op::MatMul(a, b)))
    }

    pub fn transpose(&mut self, a: Var) -> Result<Var> {
        let v = tensor::transpose(self.value(a))?;
        Ok(self.push(v, Op::Transpose(a)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = tensor::add(self.value(a), self.value(b))?;
        Ok(self.push(v, Op::Add(a, b)))
    }

    pub fn add_bias(&mut self, a: Var, bias: Var) -> Result<Var> {
        let v = tensor::add_bias(self.value(a), self.value(bias))?;
        Ok(self.push(v, Op::AddBias(a, bias)))
    }

    /// `x · W + b` for a `[n,in]` input.
    pub fn linear(&mut self, x: Var, w: Var, b: Option<Var>) -> Result<Var> {
        let y = self.matmul(x, w)?;
        match b {
            Some(b) => self.add_bias(y, b),
            None => Ok(y),
        }
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let v = tensor::mul(self.value(a), self.value(b))?;
        Ok(self.push(v, Op::Mul(a, b)))
    }

    pub fn scale(&mut self, a: Var, s: f64) -> Var {
        let v = tensor::scale(self.value(a), s);
        self.push(v, Op::Scale(a, s))
    }

    pub fn softmax(&mut self, a: Var) -> Result<Var> {
        let v = tensor::softmax(self.value(a))?;
        Ok(self.push(v, Op::Softmax(a)))
    }

    pub fn causal_softmax(&mut self, a: Var) -> Result<Var> {
        let v = tensor::causal_softmax(self.value(a))?;
        Ok(self.push(v, Op::CausalSoftmax(a)))
    }

    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var) -> Result<Var> {
        let (v, cache) = tensor::layer_norm(self.value(x), self.value(gamma), self.value(beta))?;
        Ok(self.push(
            v,
            Op::LayerNorm {
                x,
                gamma,
                beta,
                cache,
            },
        ))
    }

    pub fn gelu(&mut self, a: Var) -> Var {
        let v = tensor::gelu(self.value(a));
        self.push(v, Op::Gelu(a))
    }

    pub fn embedding(&mut self, table: Var, ids: &[usize]) -> Result<Var> {
        let v = tensor::embedding(self.value(table), ids)?;
        Ok(self.push(
            v,
            Op::Embedding {
                table,
                ids: ids.to_vec(),
            },
        ))
    }

    /// Inverted dropout: kept units are scaled by `1/(1-rate)`. A `None` rng
    /// (evaluation) or a zero rate returns `x` unchanged.
    pub fn dropout<R: Rng>(&mut self, x: Var, rate: f64, rng: Option<&mut R>) -> Result<Var> {
        let rng = match rng {
            Some(r) if rate > 0.0 => r,
            _ => return Ok(x),
        };
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::Config(format!("dropout rate {rate} outside [0, 1)")));
        }
        let keep = 1.0 / (1.0 - rate);
        let mask: Vec<f64> = (0..self.value(x).len())
            .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep })
            .collect();
        let src = self.value(x);
        let data = src.data().iter().zip(&mask).map(|(a, m)| a * m).collect();
        let v = Tensor::new(src.shape().to_vec(), data)?;
        Ok(self.push(v, Op::Dropout { x, mask }))
    }

    pub fn slice_cols(&mut self, x: Var, start: usize, width: usize) -> Result<Var> {
        let (rows, cols) = self.value(x).dims2()?;
        if start + width > cols {
            return Err(Error::Shape(format!(
                "slice_cols: {start}+{width} exceeds {cols} columns"
            )));
        }
        let src = self.value(x);
        let mut data = Vec::with_capacity(rows * width);
        for r in 0..rows {
            data.extend_from_slice(&src.row(r)[start..start + width]);
        }
        let v = Tensor::new(vec![rows, width], data)?;
        Ok(self.push(v, Op::SliceCols { x, start }))
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let rows = match parts.first() {
            Some(p) => self.value(*p).dims2()?.0,
            None => return Err(Error::Shape("concat_cols: no inputs".into())),
        };
        let mut total = 0;
        for p in parts {
            let (r, c) = self.value(*p).dims2()?;
            if r != rows {
                return Err(Error::Shape(format!(
                    "concat_cols: row counts {r} and {rows} differ"
                )));
            }
            total += c;
        }
        let mut data = Vec::with_capacity(rows * total);
        for r in 0..rows {
            for p in parts {
                data.extend_from_slice(self.value(*p).row(r));
            }
        }
        let v = Tensor::new(vec![rows, total], data)?;
        Ok(self.push(v, Op::ConcatCols(parts.to_vec())))
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let cols = match parts.first() {
            Some(p) => self.value(*p).dims2()?.1,
            None => return Err(Error::Shape("concat_rows: no inputs".into())),
        };
        let mut rows = 0;
        let mut data = Vec::new();
        for p in parts {
            let (r, c) = self.value(*p).dims2()?;
            if c != cols {
                return Err(Error::Shape(format!(
                    "concat_rows: widths {c} and {cols} differ"
                )));
            }
            rows += r;
            data.extend_from_slice(self.value(*p).data());
        }
        let v = Tensor::new(vec![rows, cols], data)?;
        Ok(self.push(v, Op::ConcatRows(parts.to_vec())))
    }

    pub fn cross_entropy_masked(
        &mut self,
        logits: Var,
        targets: &[usize],
        mask: &[bool],
    ) -> Result<Var> {
        let (loss, probs) = tensor::cross_entropy_with_probs(self.value(logits), targets, mask)?;
        Ok(self.push(
            Tensor::scalar(loss),
            Op::CrossEntropy {
                logits,
                targets: targets.to_vec(),
                mask: mask.to_vec(),
                probs,
            },
        ))
    }

    /// Backpropagates from a single-element node.
    pub fn backward(&self, output: Var) -> Result<Gradients> {
        if self.value(output).len() != 1 {
            return Err(Error::Shape(format!(
                "backward needs a scalar output, got shape {:?}",
                self.value(output).shape()
            )));
        }
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[output.0] = Some(Tensor::filled(self.value(output).shape(), 1.0));

        for idx in (0..=output.0).rev() {
            let Some(g) = grads[idx].take() else { continue };
            self.backprop_node(idx, &g, &mut grads)?;
            grads[idx] = Some(g);
        }
        Ok(Gradients { grads })
    }

    /// Adds gradients of `Param` leaves into the store's gradient buffers.
    pub fn accumulate_param_grads(
        &self,
        grads: &Gradients,
        store: &mut ParamStore,
        weight: f64,
    ) -> Result<()> {
        for (i, node) in self.nodes.iter().enumerate() {
            if let (Op::Param(name), Some(g)) = (&node.op, grads.grads[i].as_ref()) {
                store.accumulate_grad(name, g, weight)?;
            }
        }
        Ok(())
    }

    /// Gradients of `Param` leaves keyed by name (summed over repeated use).
    pub fn param_grads(&self, grads: &Gradients) -> BTreeMap<String, Tensor> {
        let mut out: BTreeMap<String, Tensor> = BTreeMap::new();
        for (i, node) in self.nodes.iter().enumerate() {
            if let (Op::Param(name), Some(g)) = (&node.op, grads.grads[i].as_ref()) {
                match out.get_mut(name) {
                    Some(acc) => {
                        for (a, b) in acc.data_mut().iter_mut().zip(g.data()) {
                            *a += b;
                        }
                    }
                    None => {
                        out.insert(name.clone(), g.clone());
                    }
                }
            }
        }
        out
    }

    fn backprop_node(&self, idx: usize, g: &Tensor, grads: &mut [Option<Tensor>]) -> Result<()> {
        let node = &self.nodes[idx];
        match &node.op {
            Op::Constant | Op::Param(_) => {}
            Op::MatMul(a, b) => {
                // dA = G·Bᵀ, dB = Aᵀ·G
                let bt = tensor::transpose(self.value(*b))?;
                accumulate(grads, *a, tensor::matmul(g, &bt)?);
                let at = tensor::transpose(self.value(*a))?;
                accumulate(grads, *b, tensor::matmul(&at, g)?);
            }
            Op::Transpose(a) => accumulate(grads, *a, tensor::transpose(g)?),
            Op::Add(a, b) => {
                accumulate(grads, *a, g.clone());
                accumulate(grads, *b, g.clone());
            }
            Op::AddBias(a, bias) => {
                accumulate(grads, *a, g.clone());
                let cols = g.last_dim();
                let mut db = vec![0.0; cols];
                for row in g.data().chunks(cols.max(1)) {
                    for (d, x) in db.iter_mut().zip(row) {
                        *d += x;
                    }
                }
                let shape = self.value(*bias).shape().to_vec();
                accumulate(grads, *bias, Tensor::new(shape, db)?);
            }
            Op::Mul(a, b) => {
                accumulate(grads, *a, tensor::mul(g, self.value(*b))?);
                accumulate(grads, *b, tensor::mul(g, self.value(*a))?);
            }
            Op::Scale(a, s) => accumulate(grads, *a, tensor::scale(g, *s)),
            Op::Softmax(a) | Op::CausalSoftmax(a) => {
                // dx_j = y_j (g_j - Σ_k g_k y_k) per row; masked entries have y = 0
                let y = &node.value;
                let cols = y.last_dim();
                let mut dx = vec![0.0; y.len()];
                for ((yr, gr), dr) in y
                    .data()
                    .chunks(cols)
                    .zip(g.data().chunks(cols))
                    .zip(dx.chunks_mut(cols))
                {
                    let dot: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                    for ((d, yv), gv) in dr.iter_mut().zip(yr).zip(gr) {
                        *d = yv * (gv - dot);
                    }
                }
                accumulate(grads, *a, Tensor::new(y.shape().to_vec(), dx)?);
            }
            Op::LayerNorm {
                x,
                gamma,
                beta,
                cache,
            } => {
                let gam = self.value(*gamma).data();
                let cols = gam.len();
                let rows = cache.inv_std.len();
                let mut dx = vec![0.0; rows * cols];
                let mut dgamma = vec![0.0; cols];
                let mut dbeta = vec![0.0; cols];
                for r in 0..rows {
                    let gr = &g.data()[r * cols..(r + 1) * cols];
                    let nr = &cache.normalized[r * cols..(r + 1) * cols];
                    let mut sum_dn = 0.0;
                    let mut sum_dn_n = 0.0;
                    for c in 0..cols {
                        dgamma[c] += gr[c] * nr[c];
                        dbeta[c] += gr[c];
                        let dn = gr[c] * gam[c];
                        sum_dn += dn;
                        sum_dn_n += dn * nr[c];
                    }
                    let n = cols as f64;
                    for c in 0..cols {
                        let dn = gr[c] * gam[c];
                        dx[r * cols + c] =
                            cache.inv_std[r] * (dn - sum_dn / n - nr[c] * sum_dn_n / n);
                    }
                }
                accumulate(grads, *x, Tensor::new(node.value.shape().to_vec(), dx)?);
                let gshape = self.value(*gamma).shape().to_vec();
                accumulate(grads, *gamma, Tensor::new(gshape, dgamma)?);
                let bshape = self.value(*beta).shape().to_vec();
                accumulate(grads, *beta, Tensor::new(bshape, dbeta)?);
            }
            Op::Gelu(a) => {
                let x = self.value(*a);
                let dx = x
                    .data()
                    .iter()
                    .zip(g.data())
                    .map(|(&xv, &gv)| gv * tensor::gelu_grad_scalar(xv))
                    .collect();
                accumulate(grads, *a, Tensor::new(x.shape().to_vec(), dx)?);
            }
            Op::Embedding { table, ids } => {
                let t = self.value(*table);
                let d = t.last_dim();
                let mut dt = Tensor::zeros(t.shape());
                for (row, &id) in ids.iter().enumerate() {
                    let src = &g.data()[row * d..(row + 1) * d];
                    for (dst, s) in dt.data_mut()[id * d..(id + 1) * d].iter_mut().zip(src) {
                        *dst += s;
                    }
                }
                accumulate(grads, *table, dt);
            }
            Op::Dropout { x, mask } => {
                let dx = g.data().iter().zip(mask).map(|(a, m)| a * m).collect();
                accumulate(grads, *x, Tensor::new(g.shape().to_vec(), dx)?);
            }
            Op::SliceCols { x, start } => {
                let src = self.value(*x);
                let (rows, cols) = src.dims2()?;
                let width = g.last_dim();
                let mut dx = Tensor::zeros(&[rows, cols]);
                for r in 0..rows {
                    dx.data_mut()[r * cols + start..r * cols + start + width]
                        .copy_from_slice(g.row(r));
                }
                accumulate(grads, *x, dx);
            }
            Op::ConcatCols(parts) => {
                let rows = g.dims2()?.0;
                let mut offset = 0;
                for p in parts {
                    let w = self.value(*p).last_dim();
                    let mut part = Vec::with_capacity(rows * w);
                    for r in 0..rows {
                        part.extend_from_slice(&g.row(r)[offset..offset + w]);
                    }
                    accumulate(grads, *p, Tensor::new(vec![rows, w], part)?);
                    offset += w;
                }
            }
            Op::ConcatRows(parts) => {
                let mut offset = 0;
                for p in parts {
                    let n = self.value(*p).len();
                    let shape = self.value(*p).shape().to_vec();
                    let part = g.data()[offset..offset + n].to_vec();
                    accumulate(grads, *p, Tensor::new(shape, part)?);
                    offset += n;
                }
            }
            Op::CrossEntropy {
                logits,
                targets,
                mask,
                probs,
            } => {
                // d/dz of mean NLL: (softmax - onehot) / count on masked rows
                let count = mask.iter().filter(|m| **m).count() as f64;
                let scale = g.data()[0] / count;
                let v = probs.last_dim();
                let mut dz = vec![0.0; probs.len()];
                for (r, (&t, &on)) in targets.iter().zip(mask).enumerate() {
                    if !on {
                        continue;
                    }
                    for c in 0..v {
                        let onehot = if c == t { 1.0 } else { 0.0 };
                        dz[r * v + c] = scale * (probs.data()[r * v + c] - onehot);
                    }
                }
                accumulate(grads, *logits, Tensor::new(probs.shape().to_vec(), dz)?);
            }
        }
        Ok(())
    }
}

fn accumulate(grads: &mut [Option<Tensor>], v: Var, g: Tensor) {
    match &mut grads[v.0] {
        Some(acc) => {
            for (a, b) in acc.data_mut().iter_mut().zip(g.data()) {
                *a += b;
            }
        }
        slot @ None => *slot = Some(g),
    }
}
