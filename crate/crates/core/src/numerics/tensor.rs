//! Dense row-major `f64` tensors and the forward kernels used by the model.
//!
//! Every kernel here is a pure function. The reverse-mode rules live in
//! [`super::graph`], which calls back into these for its forward values.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn new(shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::Shape(format!(
                "shape {:?} needs {} values, got {}",
                shape,
                expected,
                data.len()
            )));
        }
        Ok(Tensor { shape, data })
    }

    pub fn zeros(shape: &[usize]) -> Self {
        let n = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; n],
        }
    }

    pub fn filled(shape: &[usize], value: f64) -> Self {
        let n = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![value; n],
        }
    }

    pub fn scalar(value: f64) -> Self {
        Tensor {
            shape: vec![1],
            data: vec![value],
        }
    }

    /// Builds a `rows × cols` matrix from row vectors of equal length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * cols);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != cols {
                return Err(Error::Shape(format!(
                    "row {i} has length {}, expected {cols}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Tensor::new(vec![rows.len(), cols], data)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Size of the last axis; rank-0-like tensors count as a single column.
    pub fn last_dim(&self) -> usize {
        self.shape.last().copied().unwrap_or(1)
    }

    /// `(rows, cols)` of a rank-2 tensor.
    pub fn dims2(&self) -> Result<(usize, usize)> {
        match self.shape.as_slice() {
            [r, c] => Ok((*r, *c)),
            other => Err(Error::Shape(format!(
                "expected a matrix, got shape {other:?}"
            ))),
        }
    }

    pub fn row(&self, r: usize) -> &[f64] {
        let c = self.last_dim();
        &self.data[r * c..(r + 1) * c]
    }

    pub fn at2(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.last_dim() + c]
    }
}

impl std::ops::Index<usize> for Tensor {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.data[i]
    }
}

fn require_finite(t: &Tensor, what: &str) -> Result<()> {
    if t.is_finite() {
        Ok(())
    } else {
        Err(Error::NumericInput(format!("{what}: non-finite input")))
    }
}

fn require_same_shape(a: &Tensor, b: &Tensor, what: &str) -> Result<()> {
    if a.shape != b.shape {
        return Err(Error::Shape(format!(
            "{what}: shapes {:?} and {:?} differ",
            a.shape, b.shape
        )));
    }
    Ok(())
}

/// `[m,k] × [k,n] → [m,n]`.
pub fn matmul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    let (m, k) = a.dims2()?;
    let (k2, n) = b.dims2()?;
    if k != k2 {
        return Err(Error::Shape(format!(
            "matmul: inner dimensions {k} and {k2} differ"
        )));
    }
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        let arow = &a.data[i * k..(i + 1) * k];
        let orow = &mut out[i * n..(i + 1) * n];
        for (p, &av) in arow.iter().enumerate() {
            if av == 0.0 {
                continue;
            }
            let brow = &b.data[p * n..(p + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    Tensor::new(vec![m, n], out)
}

pub fn transpose(a: &Tensor) -> Result<Tensor> {
    let (m, n) = a.dims2()?;
    let mut out = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            out[j * m + i] = a.data[i * n + j];
        }
    }
    Tensor::new(vec![n, m], out)
}

pub fn add(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    require_same_shape(a, b, "add")?;
    let data = a.data.iter().zip(&b.data).map(|(x, y)| x + y).collect();
    Tensor::new(a.shape.clone(), data)
}

/// Adds a vector of length `cols` to every row.
pub fn add_bias(a: &Tensor, bias: &Tensor) -> Result<Tensor> {
    let cols = a.last_dim();
    if bias.len() != cols {
        return Err(Error::Shape(format!(
            "add_bias: bias length {} does not match last axis {cols}",
            bias.len()
        )));
    }
    let mut data = a.data.clone();
    for row in data.chunks_mut(cols.max(1)) {
        for (x, b) in row.iter_mut().zip(&bias.data) {
            *x += b;
        }
    }
    Tensor::new(a.shape.clone(), data)
}

pub fn mul(a: &Tensor, b: &Tensor) -> Result<Tensor> {
    require_same_shape(a, b, "mul")?;
    let data = a.data.iter().zip(&b.data).map(|(x, y)| x * y).collect();
    Tensor::new(a.shape.clone(), data)
}

pub fn scale(a: &Tensor, s: f64) -> Tensor {
    Tensor {
        shape: a.shape.clone(),
        data: a.data.iter().map(|x| x * s).collect(),
    }
}

fn softmax_row(row: &[f64], out: &mut [f64]) {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut total = 0.0;
    for (o, &x) in out.iter_mut().zip(row) {
        *o = (x - max).exp();
        total += *o;
    }
    for o in out.iter_mut() {
        *o /= total;
    }
}

/// Softmax over the last axis, computed with max subtraction.
pub fn softmax(logits: &Tensor) -> Result<Tensor> {
    require_finite(logits, "softmax")?;
    let cols = logits.last_dim();
    let mut data = vec![0.0; logits.len()];
    if cols > 0 {
        for (row, out) in logits.data.chunks(cols).zip(data.chunks_mut(cols)) {
            softmax_row(row, out);
        }
    }
    Tensor::new(logits.shape.clone(), data)
}

/// Softmax over each row of a square score matrix where row `i` only sees
/// columns `0..=i`. Masked entries get probability exactly zero.
pub fn causal_softmax(scores: &Tensor) -> Result<Tensor> {
    require_finite(scores, "causal_softmax")?;
    let (t, t2) = scores.dims2()?;
    if t != t2 {
        return Err(Error::Shape(format!(
            "causal_softmax: expected a square matrix, got {t}×{t2}"
        )));
    }
    let mut data = vec![0.0; t * t];
    for i in 0..t {
        let row = &scores.data[i * t..i * t + i + 1];
        softmax_row(row, &mut data[i * t..i * t + i + 1]);
    }
    Tensor::new(vec![t, t], data)
}

pub const LAYER_NORM_EPS: f64 = 1e-5;

/// Per-row statistics kept by layer normalization for its backward pass.
#[derive(Debug, Clone)]
pub struct LayerNormCache {
    pub normalized: Vec<f64>,
    pub inv_std: Vec<f64>,
}

pub fn layer_norm(x: &Tensor, gamma: &Tensor, beta: &Tensor) -> Result<(Tensor, LayerNormCache)> {
    let cols = x.last_dim();
    if gamma.len() != cols || beta.len() != cols {
        return Err(Error::Shape(format!(
            "layer_norm: gain/bias length must equal last axis {cols}"
        )));
    }
    let rows = x.len().checked_div(cols).unwrap_or(0);
    let mut out = vec![0.0; x.len()];
    let mut normalized = vec![0.0; x.len()];
    let mut inv_std = Vec::with_capacity(rows);
    for r in 0..rows {
        let row = &x.data[r * cols..(r + 1) * cols];
        let mean = row.iter().sum::<f64>() / cols as f64;
        let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / cols as f64;
        let istd = 1.0 / (var + LAYER_NORM_EPS).sqrt();
        inv_std.push(istd);
        for c in 0..cols {
            let n = (row[c] - mean) * istd;
            normalized[r * cols + c] = n;
            out[r * cols + c] = n * gamma.data[c] + beta.data[c];
        }
    }
    Ok((
        Tensor::new(x.shape.clone(), out)?,
        LayerNormCache {
            normalized,
            inv_std,
        },
    ))
}

const GELU_K: f64 = 0.797_884_560_802_865_4; // sqrt(2/pi)
const GELU_C: f64 = 0.044_715;

/// Tanh approximation of GELU.
pub fn gelu_scalar(x: f64) -> f64 {
    0.5 * x * (1.0 + (GELU_K * (x + GELU_C * x * x * x)).tanh())
}

pub fn gelu_grad_scalar(x: f64) -> f64 {
    let inner = GELU_K * (x + GELU_C * x * x * x);
    let t = inner.tanh();
    let dinner = GELU_K * (1.0 + 3.0 * GELU_C * x * x);
    0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * dinner
}

pub fn gelu(x: &Tensor) -> Tensor {
    Tensor {
        shape: x.shape.clone(),
        data: x.data.iter().map(|&v| gelu_scalar(v)).collect(),
    }
}

/// Gathers rows of `table` (`[V,d]`) for each id.
pub fn embedding(table: &Tensor, ids: &[usize]) -> Result<Tensor> {
    let (v, d) = table.dims2()?;
    let mut data = Vec::with_capacity(ids.len() * d);
    for &id in ids {
        if id >= v {
            return Err(Error::Index(format!(
                "embedding id {id} out of range 0..{v}"
            )));
        }
        data.extend_from_slice(table.row(id));
    }
    Tensor::new(vec![ids.len(), d], data)
}

/// Mean of `-log softmax(logits)[t, target_t]` over masked positions.
pub fn cross_entropy_masked(logits: &Tensor, targets: &[usize], mask: &[bool]) -> Result<f64> {
    cross_entropy_with_probs(logits, targets, mask).map(|(loss, _)| loss)
}

/// Same as [`cross_entropy_masked`], also returning the row softmax.
pub(crate) fn cross_entropy_with_probs(
    logits: &Tensor,
    targets: &[usize],
    mask: &[bool],
) -> Result<(f64, Tensor)> {
    let (t, v) = logits.dims2()?;
    if targets.len() != t || mask.len() != t {
        return Err(Error::Shape(format!(
            "cross_entropy: {t} rows but {} targets and {} mask entries",
            targets.len(),
            mask.len()
        )));
    }
    let count = mask.iter().filter(|m| **m).count();
    if count == 0 {
        return Err(Error::EmptyLoss);
    }
    let probs = softmax(logits)?;
    let mut total = 0.0;
    for (i, (&target, &on)) in targets.iter().zip(mask).enumerate() {
        if !on {
            continue;
        }
        if target >= v {
            return Err(Error::Index(format!(
                "target {target} at position {i} out of range 0..{v}"
            )));
        }
        // log-softmax directly, so large margins do not underflow to log(0)
        let row = logits.row(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
        total += lse - row[target];
    }
    Ok((total / count as f64, probs))
}
