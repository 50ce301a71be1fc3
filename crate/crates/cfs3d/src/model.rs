//! The segmentation network: shared per-point encoder, two decoder branches,
//! coupled feature-selection gates between them, and the two output heads.
//!
//! Data flow for one block of `n` points with `d_in` features:
//!
//! ```text
//! points ─ encoder stack ─┬───────────────────────┐
//!                         └─ max-pool ─ broadcast ─┴─ concat ─ proj → F_share
//! F_share ─ sem decoder → F_sem ─┐
//! F_share ─ ins decoder → F_ins ─┤  gate units (per variant)
//!                                ├─ C_I→S(F_sem ⟵ F_ins) → semantic head → logits
//!                                └─ C_S→I(F_ins ⟵ F_sem) → instance head → embeddings
//! ```
//!
//! A gate unit enhances its own branch (`F_self`) with the other branch's
//! features (`F_other`):
//!
//! ```text
//! O_other = relu(cell(F_other)) ⊙ sigmoid(agate(F_other))
//! O_sel   = sigmoid(sgate(F_self) ⊙ O_other)
//! out     = relu(cell(F_self)) ⊙ sigmoid(agate(F_self)) + O_sel
//! ```
//!
//! The cell and A-gate weights are shared between the `F_self` and `F_other`
//! paths of one unit. When a unit is disabled by the ablation variant, the
//! branch instead passes through `relu(cell(F_self))` — a plain per-point
//! affine+relu layer using the same cell weights, so every variant shares an
//! identical parameter set (and identical seeded initialization).

use rand::Rng;

use crate::diffcore::{
    activation, add, concat_cols, global_max_pool, linear, mul, repeat_rows, Activation, Tape,
    Tensor, TensorId,
};
use crate::error::{Error, Result};
use crate::seeding;

/// Which gate units are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CfsmMode {
    /// Plain parallel branches (both units replaced by affine+relu).
    None,
    /// Only the semantic branch is enhanced with instance features.
    CiSOnly,
    /// Only the instance branch is enhanced with semantic features.
    CsIOnly,
    /// Both directions active.
    Both,
}

impl CfsmMode {
    pub fn semantic_coupled(self) -> bool {
        matches!(self, CfsmMode::CiSOnly | CfsmMode::Both)
    }

    pub fn instance_coupled(self) -> bool {
        matches!(self, CfsmMode::CsIOnly | CfsmMode::Both)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    /// Points per block fed to the network.
    pub l_p: usize,
    /// Input feature width (9 with colors, 3 without).
    pub d_in: usize,
    /// Branch feature width.
    pub l_f: usize,
    /// Semantic class count.
    pub l_c: usize,
    /// Instance embedding length.
    pub l_e: usize,
    /// Widths of the per-point encoder stack.
    pub encoder_widths: Vec<usize>,
    pub cfsm: CfsmMode,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            l_p: 4096,
            d_in: 9,
            l_f: 128,
            l_c: 13,
            l_e: 5,
            encoder_widths: vec![64, 128, 128],
            cfsm: CfsmMode::Both,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.l_p == 0 || self.l_f == 0 || self.d_in == 0 {
            return Err(Error::Config(format!(
                "sizes must be positive: L_P={}, L_F={}, d_in={}",
                self.l_p, self.l_f, self.d_in
            )));
        }
        if self.l_c < 2 {
            return Err(Error::Config(format!("L_C must be ≥ 2, got {}", self.l_c)));
        }
        if self.l_e == 0 {
            return Err(Error::Config("L_E must be ≥ 1".into()));
        }
        if self.encoder_widths.is_empty() || self.encoder_widths.contains(&0) {
            return Err(Error::Config(format!(
                "encoder widths must be nonempty and positive: {:?}",
                self.encoder_widths
            )));
        }
        Ok(())
    }
}

/// One gate unit's parameters: cell, A-gate, S-gate (weight + bias each).
#[derive(Debug, Clone, PartialEq)]
pub struct CfsmBranchParams {
    pub w_cell: Tensor,
    pub b_cell: Tensor,
    pub w_a: Tensor,
    pub b_a: Tensor,
    pub w_s: Tensor,
    pub b_s: Tensor,
}

/// All trainable arrays. The `entries`/`entries_mut` order is the canonical
/// parameter order used by the optimizer, checkpoints, and flattening.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    /// (weight, bias) per encoder layer.
    pub encoder: Vec<(Tensor, Tensor)>,
    /// Projection of [per-point ‖ global] features to L_F.
    pub w_proj: Tensor,
    pub b_proj: Tensor,
    pub w_sem_dec: Tensor,
    pub b_sem_dec: Tensor,
    pub w_ins_dec: Tensor,
    pub b_ins_dec: Tensor,
    /// C_I→S unit (semantic branch enhanced by instance features).
    pub cfsm_sem: CfsmBranchParams,
    /// C_S→I unit (instance branch enhanced by semantic features).
    pub cfsm_ins: CfsmBranchParams,
    pub w_sem_head: Tensor,
    pub b_sem_head: Tensor,
    pub w_ins_head: Tensor,
    pub b_ins_head: Tensor,
}

fn glorot(rng: &mut impl Rng, rows: usize, cols: usize) -> Tensor {
    let bound = (6.0 / (rows + cols) as f64).sqrt();
    let values = (0..rows * cols)
        .map(|_| rng.random_range(-bound..bound))
        .collect();
    Tensor::matrix(rows, cols, values).expect("sized by construction")
}

fn layer(rng: &mut impl Rng, d_in: usize, d_out: usize) -> (Tensor, Tensor) {
    (glorot(rng, d_in, d_out), Tensor::zeros(&[d_out]))
}

fn cfsm_params(rng: &mut impl Rng, l_f: usize) -> CfsmBranchParams {
    let (w_cell, b_cell) = layer(rng, l_f, l_f);
    let (w_a, b_a) = layer(rng, l_f, l_f);
    let (w_s, b_s) = layer(rng, l_f, l_f);
    CfsmBranchParams {
        w_cell,
        b_cell,
        w_a,
        b_a,
        w_s,
        b_s,
    }
}

impl ModelParams {
    /// Seeded Glorot-uniform initialization (biases zero). The draw order is
    /// the canonical parameter order, so every variant of the same seed and
    /// shape starts from identical values.
    pub fn init(cfg: &ModelConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let mut rng = seeding::rng_for(seed, seeding::streams::INIT, 0);
        let mut encoder = Vec::new();
        let mut width = cfg.d_in;
        for &w in &cfg.encoder_widths {
            encoder.push(layer(&mut rng, width, w));
            width = w;
        }
        let (w_proj, b_proj) = layer(&mut rng, 2 * width, cfg.l_f);
        let (w_sem_dec, b_sem_dec) = layer(&mut rng, cfg.l_f, cfg.l_f);
        let (w_ins_dec, b_ins_dec) = layer(&mut rng, cfg.l_f, cfg.l_f);
        let cfsm_sem = cfsm_params(&mut rng, cfg.l_f);
        let cfsm_ins = cfsm_params(&mut rng, cfg.l_f);
        let (w_sem_head, b_sem_head) = layer(&mut rng, cfg.l_f, cfg.l_c);
        let (w_ins_head, b_ins_head) = layer(&mut rng, cfg.l_f, cfg.l_e);
        Ok(ModelParams {
            encoder,
            w_proj,
            b_proj,
            w_sem_dec,
            b_sem_dec,
            w_ins_dec,
            b_ins_dec,
            cfsm_sem,
            cfsm_ins,
            w_sem_head,
            b_sem_head,
            w_ins_head,
            b_ins_head,
        })
    }

    /// `(name, tensor)` pairs in canonical order.
    pub fn entries(&self) -> Vec<(String, &Tensor)> {
        let mut out: Vec<(String, &Tensor)> = Vec::new();
        for (i, (w, b)) in self.encoder.iter().enumerate() {
            out.push((format!("enc{i}.w"), w));
            out.push((format!("enc{i}.b"), b));
        }
        let fixed: [(&str, &Tensor); 18] = [
            ("proj.w", &self.w_proj),
            ("proj.b", &self.b_proj),
            ("sem_dec.w", &self.w_sem_dec),
            ("sem_dec.b", &self.b_sem_dec),
            ("ins_dec.w", &self.w_ins_dec),
            ("ins_dec.b", &self.b_ins_dec),
            ("cfsm_sem.cell.w", &self.cfsm_sem.w_cell),
            ("cfsm_sem.cell.b", &self.cfsm_sem.b_cell),
            ("cfsm_sem.agate.w", &self.cfsm_sem.w_a),
            ("cfsm_sem.agate.b", &self.cfsm_sem.b_a),
            ("cfsm_sem.sgate.w", &self.cfsm_sem.w_s),
            ("cfsm_sem.sgate.b", &self.cfsm_sem.b_s),
            ("cfsm_ins.cell.w", &self.cfsm_ins.w_cell),
            ("cfsm_ins.cell.b", &self.cfsm_ins.b_cell),
            ("cfsm_ins.agate.w", &self.cfsm_ins.w_a),
            ("cfsm_ins.agate.b", &self.cfsm_ins.b_a),
            ("cfsm_ins.sgate.w", &self.cfsm_ins.w_s),
            ("cfsm_ins.sgate.b", &self.cfsm_ins.b_s),
        ];
        for (n, t) in fixed {
            out.push((n.to_string(), t));
        }
        out.push(("sem_head.w".to_string(), &self.w_sem_head));
        out.push(("sem_head.b".to_string(), &self.b_sem_head));
        out.push(("ins_head.w".to_string(), &self.w_ins_head));
        out.push(("ins_head.b".to_string(), &self.b_ins_head));
        out
    }

    /// Same pairs as [`ModelParams::entries`], mutably.
    pub fn entries_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let mut out: Vec<(String, &mut Tensor)> = Vec::new();
        for (i, (w, b)) in self.encoder.iter_mut().enumerate() {
            out.push((format!("enc{i}.w"), w));
            out.push((format!("enc{i}.b"), b));
        }
        let fixed: [(&str, &mut Tensor); 18] = [
            ("proj.w", &mut self.w_proj),
            ("proj.b", &mut self.b_proj),
            ("sem_dec.w", &mut self.w_sem_dec),
            ("sem_dec.b", &mut self.b_sem_dec),
            ("ins_dec.w", &mut self.w_ins_dec),
            ("ins_dec.b", &mut self.b_ins_dec),
            ("cfsm_sem.cell.w", &mut self.cfsm_sem.w_cell),
            ("cfsm_sem.cell.b", &mut self.cfsm_sem.b_cell),
            ("cfsm_sem.agate.w", &mut self.cfsm_sem.w_a),
            ("cfsm_sem.agate.b", &mut self.cfsm_sem.b_a),
            ("cfsm_sem.sgate.w", &mut self.cfsm_sem.w_s),
            ("cfsm_sem.sgate.b", &mut self.cfsm_sem.b_s),
            ("cfsm_ins.cell.w", &mut self.cfsm_ins.w_cell),
            ("cfsm_ins.cell.b", &mut self.cfsm_ins.b_cell),
            ("cfsm_ins.agate.w", &mut self.cfsm_ins.w_a),
            ("cfsm_ins.agate.b", &mut self.cfsm_ins.b_a),
            ("cfsm_ins.sgate.w", &mut self.cfsm_ins.w_s),
            ("cfsm_ins.sgate.b", &mut self.cfsm_ins.b_s),
        ];
        for (n, t) in fixed {
            out.push((n.to_string(), t));
        }
        out.push(("sem_head.w".to_string(), &mut self.w_sem_head));
        out.push(("sem_head.b".to_string(), &mut self.b_sem_head));
        out.push(("ins_head.w".to_string(), &mut self.w_ins_head));
        out.push(("ins_head.b".to_string(), &mut self.b_ins_head));
        out
    }

    /// All parameter values concatenated in canonical order.
    pub fn to_flat(&self) -> Vec<f64> {
        self.entries()
            .iter()
            .flat_map(|(_, t)| t.values().iter().copied())
            .collect()
    }

    /// Rebuild parameters of the same shapes from a flat vector.
    pub fn from_flat(&self, flat: &[f64]) -> Result<Self> {
        let mut clone = self.clone();
        let mut offset = 0;
        for (name, t) in clone.entries_mut() {
            let n = t.len();
            if offset + n > flat.len() {
                return Err(Error::Dimension(format!(
                    "flat vector too short at {name}: need {} more values",
                    offset + n - flat.len()
                )));
            }
            t.values_mut().copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
        if offset != flat.len() {
            return Err(Error::Dimension(format!(
                "flat vector has {} values, parameters hold {offset}",
                flat.len()
            )));
        }
        Ok(clone)
    }

    pub fn value_count(&self) -> usize {
        self.entries().iter().map(|(_, t)| t.len()).sum()
    }

    /// Rebuilds parameters from `(name, tensor)` pairs in canonical order,
    /// as stored in a checkpoint. Order, names, and shapes must all match
    /// the configuration exactly.
    pub fn from_named(cfg: &ModelConfig, named: &[(String, Tensor)]) -> Result<Self> {
        let mut params = ModelParams::init(cfg, 0)?;
        let slots = params.entries_mut();
        if slots.len() != named.len() {
            return Err(Error::Config(format!(
                "checkpoint has {} parameters, configuration needs {}",
                named.len(),
                slots.len()
            )));
        }
        for ((want, slot), (got, tensor)) in slots.into_iter().zip(named) {
            if want != *got {
                return Err(Error::Config(format!(
                    "checkpoint parameter order mismatch: expected {want:?}, found {got:?}"
                )));
            }
            if slot.shape() != tensor.shape() {
                return Err(Error::Config(format!(
                    "parameter {want:?}: checkpoint shape {:?} does not fit configured {:?}",
                    tensor.shape(),
                    slot.shape()
                )));
            }
            *slot = tensor.clone();
        }
        Ok(params)
    }

    /// Push every tensor onto a tape. `trainable` decides whether they are
    /// parameters (tracked by backward) or constants (pure inference).
    pub fn push(&self, tape: &mut Tape, trainable: bool) -> TapeParams {
        let mut push = |t: &Tensor| {
            if trainable {
                tape.param(t.clone())
            } else {
                tape.constant(t.clone())
            }
        };
        let encoder = self
            .encoder
            .iter()
            .map(|(w, b)| (push(w), push(b)))
            .collect();
        let cfsm_sem = CfsmBranchIds {
            cell: (push(&self.cfsm_sem.w_cell), push(&self.cfsm_sem.b_cell)),
            agate: (push(&self.cfsm_sem.w_a), push(&self.cfsm_sem.b_a)),
            sgate: (push(&self.cfsm_sem.w_s), push(&self.cfsm_sem.b_s)),
        };
        let cfsm_ins = CfsmBranchIds {
            cell: (push(&self.cfsm_ins.w_cell), push(&self.cfsm_ins.b_cell)),
            agate: (push(&self.cfsm_ins.w_a), push(&self.cfsm_ins.b_a)),
            sgate: (push(&self.cfsm_ins.w_s), push(&self.cfsm_ins.b_s)),
        };
        TapeParams {
            encoder,
            proj: (push(&self.w_proj), push(&self.b_proj)),
            sem_dec: (push(&self.w_sem_dec), push(&self.b_sem_dec)),
            ins_dec: (push(&self.w_ins_dec), push(&self.b_ins_dec)),
            cfsm_sem,
            cfsm_ins,
            sem_head: (push(&self.w_sem_head), push(&self.b_sem_head)),
            ins_head: (push(&self.w_ins_head), push(&self.b_ins_head)),
        }
    }
}

/// Tape ids of one gate unit's parameters.
#[derive(Debug, Clone, Copy)]
pub struct CfsmBranchIds {
    pub cell: (TensorId, TensorId),
    pub agate: (TensorId, TensorId),
    pub sgate: (TensorId, TensorId),
}

/// Tape ids of all parameters, mirroring [`ModelParams`].
#[derive(Debug, Clone)]
pub struct TapeParams {
    pub encoder: Vec<(TensorId, TensorId)>,
    pub proj: (TensorId, TensorId),
    pub sem_dec: (TensorId, TensorId),
    pub ins_dec: (TensorId, TensorId),
    pub cfsm_sem: CfsmBranchIds,
    pub cfsm_ins: CfsmBranchIds,
    pub sem_head: (TensorId, TensorId),
    pub ins_head: (TensorId, TensorId),
}

impl TapeParams {
    /// `(name, id)` pairs in canonical parameter order.
    pub fn entries(&self) -> Vec<(String, TensorId)> {
        let mut out = Vec::new();
        for (i, (w, b)) in self.encoder.iter().enumerate() {
            out.push((format!("enc{i}.w"), *w));
            out.push((format!("enc{i}.b"), *b));
        }
        let units = [("cfsm_sem", &self.cfsm_sem), ("cfsm_ins", &self.cfsm_ins)];
        out.push(("proj.w".into(), self.proj.0));
        out.push(("proj.b".into(), self.proj.1));
        out.push(("sem_dec.w".into(), self.sem_dec.0));
        out.push(("sem_dec.b".into(), self.sem_dec.1));
        out.push(("ins_dec.w".into(), self.ins_dec.0));
        out.push(("ins_dec.b".into(), self.ins_dec.1));
        for (name, unit) in units {
            out.push((format!("{name}.cell.w"), unit.cell.0));
            out.push((format!("{name}.cell.b"), unit.cell.1));
            out.push((format!("{name}.agate.w"), unit.agate.0));
            out.push((format!("{name}.agate.b"), unit.agate.1));
            out.push((format!("{name}.sgate.w"), unit.sgate.0));
            out.push((format!("{name}.sgate.b"), unit.sgate.1));
        }
        out.push(("sem_head.w".into(), self.sem_head.0));
        out.push(("sem_head.b".into(), self.sem_head.1));
        out.push(("ins_head.w".into(), self.ins_head.0));
        out.push(("ins_head.b".into(), self.ins_head.1));
        out
    }
}

/// Running minimum of distances to non-differentiable points (relu kinks,
/// max-pool argmax ties), collected during a traced forward pass.
struct KinkTrace {
    margin: f64,
}

impl KinkTrace {
    fn shrink(&mut self, candidate: f64) {
        self.margin = self.margin.min(candidate);
    }
}

fn affine_relu_t(
    tape: &mut Tape,
    x: TensorId,
    wb: (TensorId, TensorId),
    trace: &mut Option<&mut KinkTrace>,
) -> Result<TensorId> {
    let y = linear(tape, x, wb.0, wb.1)?;
    if let Some(t) = trace {
        for &v in tape.value(y) {
            t.shrink(v.abs());
        }
    }
    activation(tape, y, Activation::Relu)
}

fn encode_t(
    tape: &mut Tape,
    points: TensorId,
    params: &TapeParams,
    cfg: &ModelConfig,
    trace: &mut Option<&mut KinkTrace>,
) -> Result<TensorId> {
    let shape = tape.tensor(points).shape().to_vec();
    if shape.len() != 2 || shape[1] != cfg.d_in {
        return Err(Error::Dimension(format!(
            "encode: points {shape:?} do not match d_in={}",
            cfg.d_in
        )));
    }
    let mut x = points;
    for &wb in &params.encoder {
        x = affine_relu_t(tape, x, wb, trace)?;
    }
    if let Some(t) = trace {
        // Distance to an argmax flip: the gap between the best and
        // second-best row per pooled column. Ties among dead (all-zero relu)
        // rows are stable under small perturbations, so only positive maxima
        // count.
        let m = tape.tensor(x);
        for j in 0..m.cols() {
            let (mut best, mut second) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
            for p in 0..m.rows() {
                let v = m.at(p, j);
                if v > best {
                    second = best;
                    best = v;
                } else if v > second {
                    second = v;
                }
            }
            if best > 0.0 && second > f64::NEG_INFINITY {
                t.shrink(best - second);
            }
        }
    }
    let global = global_max_pool(tape, x)?;
    let tiled = repeat_rows(tape, global, shape[0])?;
    let both = concat_cols(tape, x, tiled)?;
    affine_relu_t(tape, both, params.proj, trace)
}

/// Shared encoding: per-point stack, global max-pool context, projection.
pub fn encode(
    tape: &mut Tape,
    points: TensorId,
    params: &TapeParams,
    cfg: &ModelConfig,
) -> Result<TensorId> {
    encode_t(tape, points, params, cfg, &mut None)
}

/// Intermediate values of one gate unit (exposed for inspection and tests).
pub struct CfsmOut {
    /// Gated other-branch features, `relu(cell(F_other)) ⊙ sigmoid(agate(F_other))`.
    pub o_other: TensorId,
    /// Selected cross-branch enhancement, `sigmoid(sgate(F_self) ⊙ O_other)`.
    pub o_sel: TensorId,
    /// Own-branch gated path, `relu(cell(F_self)) ⊙ sigmoid(agate(F_self))`.
    pub self_path: TensorId,
    /// `self_path + o_sel`.
    pub out: TensorId,
}

fn cfsm_branch_t(
    tape: &mut Tape,
    f_self: TensorId,
    f_other: TensorId,
    p: &CfsmBranchIds,
    trace: &mut Option<&mut KinkTrace>,
) -> Result<CfsmOut> {
    let gated = |tape: &mut Tape,
                     f: TensorId,
                     trace: &mut Option<&mut KinkTrace>|
     -> Result<TensorId> {
        let cell = affine_relu_t(tape, f, p.cell, trace)?;
        let a = linear(tape, f, p.agate.0, p.agate.1)?;
        let a = activation(tape, a, Activation::Sigmoid)?;
        mul(tape, cell, a)
    };
    let o_other = gated(tape, f_other, trace)?;
    let s = linear(tape, f_self, p.sgate.0, p.sgate.1)?;
    let prod = mul(tape, s, o_other)?;
    let o_sel = activation(tape, prod, Activation::Sigmoid)?;
    let self_path = gated(tape, f_self, trace)?;
    let out = add(tape, self_path, o_sel)?;
    Ok(CfsmOut {
        o_other,
        o_sel,
        self_path,
        out,
    })
}

/// One gate unit: enhance `f_self` with `f_other` (see module docs).
pub fn cfsm_branch(
    tape: &mut Tape,
    f_self: TensorId,
    f_other: TensorId,
    p: &CfsmBranchIds,
) -> Result<CfsmOut> {
    cfsm_branch_t(tape, f_self, f_other, p, &mut None)
}

fn forward_t(
    tape: &mut Tape,
    points: TensorId,
    params: &TapeParams,
    cfg: &ModelConfig,
    mut trace: Option<&mut KinkTrace>,
) -> Result<(TensorId, TensorId)> {
    let f_share = encode_t(tape, points, params, cfg, &mut trace)?;
    let f_sem = affine_relu_t(tape, f_share, params.sem_dec, &mut trace)?;
    let f_ins = affine_relu_t(tape, f_share, params.ins_dec, &mut trace)?;

    let f_sem2 = if cfg.cfsm.semantic_coupled() {
        cfsm_branch_t(tape, f_sem, f_ins, &params.cfsm_sem, &mut trace)?.out
    } else {
        affine_relu_t(tape, f_sem, params.cfsm_sem.cell, &mut trace)?
    };
    let f_ins2 = if cfg.cfsm.instance_coupled() {
        cfsm_branch_t(tape, f_ins, f_sem, &params.cfsm_ins, &mut trace)?.out
    } else {
        affine_relu_t(tape, f_ins, params.cfsm_ins.cell, &mut trace)?
    };

    let logits = linear(tape, f_sem2, params.sem_head.0, params.sem_head.1)?;
    let emb = linear(tape, f_ins2, params.ins_head.0, params.ins_head.1)?;
    Ok((logits, emb))
}

/// Full forward pass: per-point semantic logits and instance embeddings.
pub fn forward(
    tape: &mut Tape,
    points: TensorId,
    params: &TapeParams,
    cfg: &ModelConfig,
) -> Result<(TensorId, TensorId)> {
    forward_t(tape, points, params, cfg, None)
}

/// Smallest distance from any relu pre-activation (or pooled column
/// best-vs-second gap) to a non-differentiable point, over one forward pass.
///
/// Finite-difference verification is only meaningful where the network is
/// differentiable; callers assert this margin is comfortably larger than the
/// probe step before trusting a check.
pub fn fd_safety_margin(
    points: &Tensor,
    params: &ModelParams,
    cfg: &ModelConfig,
) -> Result<f64> {
    let mut tape = Tape::new();
    let pts = tape.constant(points.clone());
    let ids = params.push(&mut tape, false);
    let mut trace = KinkTrace { margin: f64::INFINITY };
    forward_t(&mut tape, pts, &ids, cfg, Some(&mut trace))?;
    Ok(trace.margin)
}

/// Convenience wrapper: run inference with frozen parameters and return the
/// logits and embeddings as plain tensors.
pub fn infer(points: &Tensor, params: &ModelParams, cfg: &ModelConfig) -> Result<(Tensor, Tensor)> {
    let mut tape = Tape::new();
    let pts = tape.constant(points.clone());
    let ids = params.push(&mut tape, false);
    let (logits, emb) = forward(&mut tape, pts, &ids, cfg)?;
    Ok((tape.tensor(logits).clone(), tape.tensor(emb).clone()))
}
