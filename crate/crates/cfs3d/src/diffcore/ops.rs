//! The operation set: forward builders plus their analytic backward passes.
//!
//! Each public function validates shapes, computes the forward value, and
//! registers a [`TapeOp`] so [`Tape::backward`] can propagate gradients.
//! Backward code accumulates with `+=` throughout — an input used twice
//! (e.g. `mul(x, x)`) collects both contributions.

use super::tape::{Grads, Tape, TapeOp, TensorId};
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Elementwise / row-wise nonlinearities.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Sigmoid,
    Tanh,
    SoftmaxRows,
    Identity,
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

// ---------------------------------------------------------------------------
// linear: Y = X·W + b

struct LinearOp;

impl TapeOp for LinearOp {
    fn backward(
        &self,
        tensors: &[Tensor],
        inputs: &[TensorId],
        _output: TensorId,
        g: &[f64],
        grads: &mut Grads<'_>,
    ) {
        let x = &tensors[inputs[0].0];
        let w = &tensors[inputs[1].0];
        let (n, d_in, d_out) = (x.rows(), x.cols(), w.cols());
        {
            // dX[p,i] = Σ_j g[p,j]·W[i,j]
            let dx = grads.of_mut(inputs[0]);
            for p in 0..n {
                let grow = &g[p * d_out..(p + 1) * d_out];
                for i in 0..d_in {
                    let wrow = w.row(i);
                    let mut s = 0.0;
                    for j in 0..d_out {
                        s += grow[j] * wrow[j];
                    }
                    dx[p * d_in + i] += s;
                }
            }
        }
        {
            // dW[i,j] = Σ_p X[p,i]·g[p,j]
            let dw = grads.of_mut(inputs[1]);
            for p in 0..n {
                let xrow = x.row(p);
                let grow = &g[p * d_out..(p + 1) * d_out];
                for i in 0..d_in {
                    let xi = xrow[i];
                    let drow = &mut dw[i * d_out..(i + 1) * d_out];
                    for j in 0..d_out {
                        drow[j] += xi * grow[j];
                    }
                }
            }
        }
        {
            // db[j] = Σ_p g[p,j]
            let db = grads.of_mut(inputs[2]);
            for p in 0..n {
                for j in 0..d_out {
                    db[j] += g[p * d_out + j];
                }
            }
        }
    }
}

/// Per-row affine map `X·W + b` (a 1×1 convolution over points).
pub fn linear(tape: &mut Tape, x: TensorId, w: TensorId, b: TensorId) -> Result<TensorId> {
    let (xs, ws, bs) = (
        tape.tensor(x).shape().to_vec(),
        tape.tensor(w).shape().to_vec(),
        tape.tensor(b).shape().to_vec(),
    );
    if xs.len() != 2 || ws.len() != 2 || bs.len() != 1 || xs[1] != ws[0] || ws[1] != bs[0] {
        return Err(Error::Dimension(format!(
            "linear: X {xs:?} · W {ws:?} + b {bs:?} do not conform"
        )));
    }
    let (n, d_in, d_out) = (xs[0], xs[1], ws[1]);
    let mut out = vec![0.0; n * d_out];
    {
        let xv = tape.value(x);
        let wv = tape.value(w);
        let bv = tape.value(b);
        for p in 0..n {
            let orow = &mut out[p * d_out..(p + 1) * d_out];
            orow.copy_from_slice(bv);
            let xrow = &xv[p * d_in..(p + 1) * d_in];
            for i in 0..d_in {
                let xi = xrow[i];
                let wrow = &wv[i * d_out..(i + 1) * d_out];
                for j in 0..d_out {
                    orow[j] += xi * wrow[j];
                }
            }
        }
    }
    let out = Tensor::new(vec![n, d_out], out)?;
    Ok(tape.emit(vec![x, w, b], out, Box::new(LinearOp)))
}

// ---------------------------------------------------------------------------
// activation

struct ActivationOp(Activation);

impl TapeOp for ActivationOp {
    fn backward(
        &self,
        tensors: &[Tensor],
        inputs: &[TensorId],
        output: TensorId,
        g: &[f64],
        grads: &mut Grads<'_>,
    ) {
        let x = &tensors[inputs[0].0];
        let y = &tensors[output.0];
        let dx = grads.of_mut(inputs[0]);
        match self.0 {
            Activation::Relu => {
                // Subgradient 0 at the kink x == 0.
                for (i, &xi) in x.values().iter().enumerate() {
                    if xi > 0.0 {
                        dx[i] += g[i];
                    }
                }
            }
            Activation::Sigmoid => {
                for (i, &yi) in y.values().iter().enumerate() {
                    dx[i] += g[i] * yi * (1.0 - yi);
                }
            }
            Activation::Tanh => {
                for (i, &yi) in y.values().iter().enumerate() {
                    dx[i] += g[i] * (1.0 - yi * yi);
                }
            }
            Activation::Identity => {
                for (i, &gi) in g.iter().enumerate() {
                    dx[i] += gi;
                }
            }
            Activation::SoftmaxRows => {
                // dx_i = y_i (g_i − Σ_j g_j y_j), per row.
                let c = y.cols();
                for r in 0..y.rows() {
                    let yrow = y.row(r);
                    let grow = &g[r * c..(r + 1) * c];
                    let dot: f64 = (0..c).map(|j| grow[j] * yrow[j]).sum();
                    let drow = &mut dx[r * c..(r + 1) * c];
                    for j in 0..c {
                        drow[j] += yrow[j] * (grow[j] - dot);
                    }
                }
            }
        }
    }
}

/// Elementwise (or row-wise, for [`Activation::SoftmaxRows`]) nonlinearity.
pub fn activation(tape: &mut Tape, x: TensorId, kind: Activation) -> Result<TensorId> {
    let t = tape.tensor(x);
    let out = match kind {
        Activation::Relu => t.values().iter().map(|&v| v.max(0.0)).collect(),
        Activation::Sigmoid => t.values().iter().map(|&v| sigmoid(v)).collect(),
        Activation::Tanh => t.values().iter().map(|&v| v.tanh()).collect(),
        Activation::Identity => t.values().to_vec(),
        Activation::SoftmaxRows => {
            if t.shape().len() != 2 {
                return Err(Error::Dimension(format!(
                    "softmax_rows needs a matrix, got shape {:?}",
                    t.shape()
                )));
            }
            let (n, c) = (t.rows(), t.cols());
            let mut out = vec![0.0; n * c];
            for r in 0..n {
                let row = t.row(r);
                let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let orow = &mut out[r * c..(r + 1) * c];
                let mut sum = 0.0;
                for j in 0..c {
                    orow[j] = (row[j] - max).exp();
                    sum += orow[j];
                }
                for v in orow.iter_mut() {
                    *v /= sum;
                }
            }
            out
        }
    };
    let out = Tensor::new(t.shape().to_vec(), out)?;
    Ok(tape.emit(vec![x], out, Box::new(ActivationOp(kind))))
}

// ---------------------------------------------------------------------------
// elementwise mul / add

struct MulOp;

impl TapeOp for MulOp {
    fn backward(
        &self,
        tensors: &[Tensor],
        inputs: &[TensorId],
        _output: TensorId,
        g: &[f64],
        grads: &mut Grads<'_>,
    ) {
        let (a, b) = (&tensors[inputs[0].0], &tensors[inputs[1].0]);
        {
            let da = grads.of_mut(inputs[0]);
            for (i, &gi) in g.iter().enumerate() {
                da[i] += gi * b.values()[i];
            }
        }
        let db = grads.of_mut(inputs[1]);
        for (i, &gi) in g.iter().enumerate() {
            db[i] += gi * a.values()[i];
        }
    }
}

struct AddOp;

impl TapeOp for AddOp {
    fn backward(
        &self,
        _tensors: &[Tensor],
        inputs: &[TensorId],
        _output: TensorId,
        g: &[f64],
        grads: &mut Grads<'_>,
    ) {
        for &inp in &inputs[..2] {
            let d = grads.of_mut(inp);
            for (i, &gi) in g.iter().enumerate() {
                d[i] += gi;
            }
        }
    }
}

fn check_same_shape(tape: &Tape, a: TensorId, b: TensorId, what: &str) -> Result<()> {
    let (sa, sb) = (tape.tensor(a).shape(), tape.tensor(b).shape());
    if sa != sb {
        return Err(Error::Dimension(format!(
            "{what}: shapes {sa:?} and {sb:?} differ"
        )));
    }
    Ok(())
}

/// Elementwise product of same-shape tensors.
pub fn mul(tape: &mut Tape, a: TensorId, b: TensorId) -> Result<TensorId> {
    check_same_shape(tape, a, b, "mul")?;
    let out: Vec<f64> = tape
        .value(a)
        .iter()
        .zip(tape.value(b))
        .map(|(x, y)| x * y)
        .collect();
    let out = Tensor::new(tape.tensor(a).shape().to_vec(), out)?;
    Ok(tape.emit(vec![a, b], out, Box::new(MulOp)))
}

/// Elementwise sum of same-shape tensors.
pub fn add(tape: &mut Tape, a: TensorId, b: TensorId) -> Result<TensorId> {
    check_same_shape(tape, a, b, "add")?;
    let out: Vec<f64> = tape
        .value(a)
        .iter()
        .zip(tape.value(b))
        .map(|(x, y)| x + y)
        .collect();
    let out = Tensor::new(tape.tensor(a).shape().to_vec(), out)?;
    Ok(tape.emit(vec![a, b], out, Box::new(AddOp)))
}

// ---------------------------------------------------------------------------
// scale by a constant

struct ScaleOp(f64);

impl TapeOp for ScaleOp {
    fn backward(
        &self,
        _tensors: &[Tensor],
        inputs: &[TensorId],
        _output: TensorId,
        g: &[f64],
        grads: &mut Grads<'_>,
    ) {
        let dx = grads.of_mut(inputs[0]);
        for (i, &gi) in g.iter().enumerate() {
            dx[i] += self.0 * gi;
        }
    }
}

/// Multiply every element by a fixed constant (not a tensor).
pub fn scale(tape: &mut Tape, x: TensorId, c: f64) -> Result<TensorId> {
    let t = tape.tensor(x);
    let out = Tensor::new(t.shape().to_vec(), t.values().iter().map(|&v| c * v).collect())?;
    Ok(tape.emit(vec![x], out, Box::new(ScaleOp(c))))
}

// ---------------------------------------------------------------------------
// global max pool over rows

struct GlobalMaxPoolOp {
    argmax: Vec<usize>,
}

impl TapeOp for GlobalMaxPoolOp {
    fn backward(
        &self,
        tensors: &[Tensor],
        inputs: &[TensorId],
        _output: TensorId,
        g: &[f64],
        grads: &mut Grads<'_>,
    ) {
        let cols = tensors[inputs[0].0].cols();
        let dx = grads.of_mut(inputs[0]);
        for (j, &p) in self.argmax.iter().enumerate() {
            dx[p * cols + j] += g[j];
        }
    }
}

/// Column-wise maximum over all rows: `[n×d] -> [d]`. Gradient flows to the
/// first row attaining each maximum.
pub fn global_max_pool(tape: &mut Tape, x: TensorId) -> Result<TensorId> {
    let t = tape.tensor(x);
    if t.shape().len() != 2 || t.rows() == 0 {
        return Err(Error::Dimension(format!(
            "global_max_pool needs a nonempty matrix, got shape {:?}",
            t.shape()
        )));
    }
    let (n, d) = (t.rows(), t.cols());
    let mut best = t.row(0).to_vec();
    let mut argmax = vec![0usize; d];
    for p in 1..n {
        let row = t.row(p);
        for j in 0..d {
            if row[j] > best[j] {
                best[j] = row[j];
                argmax[j] = p;
            }
        }
    }
    let out = Tensor::vector(best);
    Ok(tape.emit(vec![x], out, Box::new(GlobalMaxPoolOp { argmax })))
}

// ---------------------------------------------------------------------------
// repeat a vector as rows

struct RepeatRowsOp;

impl TapeOp for RepeatRowsOp {
    fn backward(
        &self,
        tensors: &[Tensor],
        inputs: &[TensorId],
        output: TensorId,
        g: &[f64],
        grads: &mut Grads<'_>,
    ) {
        let d = tensors[inputs[0].0].len();
        let n = tensors[output.0].rows();
        let dv = grads.of_mut(inputs[0]);
        for p in 0..n {
            for j in 0..d {
                dv[j] += g[p * d + j];
            }
        }
    }
}

/// Broadcast a length-`d` vector to an `n×d` matrix.
pub fn repeat_rows(tape: &mut Tape, v: TensorId, n: usize) -> Result<TensorId> {
    let t = tape.tensor(v);
    if t.shape().len() != 1 {
        return Err(Error::Dimension(format!(
            "repeat_rows needs a vector, got shape {:?}",
            t.shape()
        )));
    }
    let d = t.len();
    let mut out = Vec::with_capacity(n * d);
    for _ in 0..n {
        out.extend_from_slice(t.values());
    }
    let out = Tensor::new(vec![n, d], out)?;
    Ok(tape.emit(vec![v], out, Box::new(RepeatRowsOp)))
}

// ---------------------------------------------------------------------------
// column concatenation

struct ConcatColsOp;

impl TapeOp for ConcatColsOp {
    fn backward(
        &self,
        tensors: &[Tensor],
        inputs: &[TensorId],
        _output: TensorId,
        g: &[f64],
        grads: &mut Grads<'_>,
    ) {
        let (ca, cb) = (tensors[inputs[0].0].cols(), tensors[inputs[1].0].cols());
        let n = tensors[inputs[0].0].rows();
        let c = ca + cb;
        {
            let da = grads.of_mut(inputs[0]);
            for p in 0..n {
                for j in 0..ca {
                    da[p * ca + j] += g[p * c + j];
                }
            }
        }
        let db = grads.of_mut(inputs[1]);
        for p in 0..n {
            for j in 0..cb {
                db[p * cb + j] += g[p * c + ca + j];
            }
        }
    }
}

/// Concatenate two matrices with equal row counts along columns.
pub fn concat_cols(tape: &mut Tape, a: TensorId, b: TensorId) -> Result<TensorId> {
    let (ta, tb) = (tape.tensor(a), tape.tensor(b));
    if ta.shape().len() != 2 || tb.shape().len() != 2 || ta.rows() != tb.rows() {
        return Err(Error::Dimension(format!(
            "concat_cols: shapes {:?} and {:?} do not share rows",
            ta.shape(),
            tb.shape()
        )));
    }
    let (n, ca, cb) = (ta.rows(), ta.cols(), tb.cols());
    let mut out = Vec::with_capacity(n * (ca + cb));
    for p in 0..n {
        out.extend_from_slice(ta.row(p));
        out.extend_from_slice(tb.row(p));
    }
    let out = Tensor::new(vec![n, ca + cb], out)?;
    Ok(tape.emit(vec![a, b], out, Box::new(ConcatColsOp)))
}

// ---------------------------------------------------------------------------
// sum to scalar

struct SumOp;

impl TapeOp for SumOp {
    fn backward(
        &self,
        _tensors: &[Tensor],
        inputs: &[TensorId],
        _output: TensorId,
        g: &[f64],
        grads: &mut Grads<'_>,
    ) {
        let dx = grads.of_mut(inputs[0]);
        for d in dx.iter_mut() {
            *d += g[0];
        }
    }
}

/// Sum of all elements, as a scalar tensor.
pub fn sum(tape: &mut Tape, x: TensorId) -> Result<TensorId> {
    let total: f64 = tape.value(x).iter().sum();
    Ok(tape.emit(vec![x], Tensor::scalar(total), Box::new(SumOp)))
}
