//! Operation tape: tensor arena plus reverse-order gradient propagation.

use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Handle to a tensor stored on a [`Tape`]. Ids are assigned in creation
/// order, so an operation's output id is always larger than its input ids.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TensorId(pub(crate) usize);

/// Gradient accumulator handed to [`TapeOp::backward`]. Every tensor on the
/// tape has a zero-initialized slot of its own length.
pub struct Grads<'a> {
    slots: &'a mut [Vec<f64>],
}

impl Grads<'_> {
    /// Mutable gradient slot of `id`, for `+=` accumulation.
    pub fn of_mut(&mut self, id: TensorId) -> &mut [f64] {
        &mut self.slots[id.0]
    }
}

/// A differentiable operation recorded on the tape.
///
/// `backward` receives the whole tensor arena (for cached forward values),
/// the op's input/output ids, and the gradient flowing into the output; it
/// must *accumulate* (never overwrite) into the input slots of `grads`.
pub trait TapeOp {
    fn backward(
        &self,
        tensors: &[Tensor],
        inputs: &[TensorId],
        output: TensorId,
        out_grad: &[f64],
        grads: &mut Grads<'_>,
    );
}

struct OpRecord {
    op: Box<dyn TapeOp>,
    inputs: Vec<TensorId>,
    output: TensorId,
}

/// Arena of tensors plus the ordered record of operations that produced them.
#[derive(Default)]
pub struct Tape {
    tensors: Vec<Tensor>,
    requires_grad: Vec<bool>,
    ops: Vec<OpRecord>,
    grads: Vec<Vec<f64>>,
    grads_valid: bool,
}

impl Tape {
    pub fn new() -> Self {
        Tape::default()
    }

    fn store(&mut self, t: Tensor, requires_grad: bool) -> TensorId {
        let id = TensorId(self.tensors.len());
        self.tensors.push(t);
        self.requires_grad.push(requires_grad);
        id
    }

    /// Store a leaf tensor that should receive a gradient (a parameter).
    pub fn param(&mut self, t: Tensor) -> TensorId {
        self.store(t, true)
    }

    /// Store a leaf tensor that never needs a gradient (input data).
    pub fn constant(&mut self, t: Tensor) -> TensorId {
        self.store(t, false)
    }

    /// Record `out = op(inputs)`. The output participates in backward only
    /// if some input does; otherwise the op record is dropped and the output
    /// is stored as a plain value (cheap pure-inference path).
    pub fn emit(&mut self, inputs: Vec<TensorId>, out: Tensor, op: Box<dyn TapeOp>) -> TensorId {
        let needs = inputs.iter().any(|i| self.requires_grad[i.0]);
        let output = self.store(out, needs);
        if needs {
            self.ops.push(OpRecord { op, inputs, output });
        }
        output
    }

    pub fn tensor(&self, id: TensorId) -> &Tensor {
        &self.tensors[id.0]
    }

    pub fn value(&self, id: TensorId) -> &[f64] {
        self.tensors[id.0].values()
    }

    /// Value of a scalar tensor.
    pub fn item(&self, id: TensorId) -> f64 {
        self.tensors[id.0].item()
    }

    pub fn requires_grad(&self, id: TensorId) -> bool {
        self.requires_grad[id.0]
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    /// Propagate gradients from a scalar root back to every tensor.
    ///
    /// Walks the op records in strict reverse creation order — a topological
    /// order of the dataflow graph — accumulating with `+=`, so results are
    /// bitwise deterministic.
    pub fn backward(&mut self, root: TensorId) -> Result<()> {
        let root_t = &self.tensors[root.0];
        if !root_t.is_scalar() {
            return Err(Error::Dimension(format!(
                "backward root must be a scalar, got shape {:?}",
                root_t.shape()
            )));
        }
        self.grads = self.tensors.iter().map(|t| vec![0.0; t.len()]).collect();
        self.grads[root.0][0] = 1.0;
        for rec in self.ops.iter().rev() {
            // Move the output gradient out so the slot array can be borrowed
            // mutably for the inputs; every output is written by exactly one
            // op, so nothing later needs the moved slot before we restore it.
            let out_grad = std::mem::take(&mut self.grads[rec.output.0]);
            if out_grad.iter().any(|&g| g != 0.0) {
                let mut grads = Grads {
                    slots: &mut self.grads,
                };
                rec.op
                    .backward(&self.tensors, &rec.inputs, rec.output, &out_grad, &mut grads);
            }
            self.grads[rec.output.0] = out_grad;
        }
        self.grads_valid = true;
        Ok(())
    }

    /// Gradient of the last `backward` root with respect to `id`.
    pub fn grad(&self, id: TensorId) -> &[f64] {
        assert!(self.grads_valid, "grad() before backward()");
        &self.grads[id.0]
    }
}
