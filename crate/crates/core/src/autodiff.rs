//! Reverse-mode gradient tape over batched tensors.
//!
//! Nodes are appended in evaluation order and may only reference earlier
//! nodes; `backward` walks the tape once in reverse.

use alloc::vec;
use alloc::vec::Vec;

use crate::layers::{self, ConvGeometry, LayerParams, Switches};
use crate::math;
use crate::tensor::Tensor;
use crate::{Error, Result};

/// Handle to a node on a [`GradTape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone)]
enum Op {
    Leaf,
    Conv1d { input: Var, weight: Var, bias: Var, geom: ConvGeometry },
    TransposedConv1d { input: Var, weight: Var, bias: Var, geom: ConvGeometry },
    MaxPool { input: Var, switches: Switches },
    Unpool { input: Var, switches: Switches },
    Elu(Var),
    Sigmoid(Var),
    Dense { input: Var, weight: Var, bias: Var },
    Reshape(Var),
    SoftmaxRows(Var),
    Mul(Var, Var),
    Add(Var, Var),
    Scale(Var, f64),
    SumAll(Var),
    SumSquares(Var),
    Mse { pred: Var, target: Vec<f64> },
    SoftmaxCrossEntropy { logits: Var, labels: Vec<usize>, probs: Vec<f64> },
}

impl Op {
    fn inputs(&self) -> Vec<Var> {
        match self {
            Op::Leaf => vec![],
            Op::Conv1d { input, weight, bias, .. } | Op::TransposedConv1d { input, weight, bias, .. } => {
                vec![*input, *weight, *bias]
            }
            Op::Dense { input, weight, bias } => vec![*input, *weight, *bias],
            Op::MaxPool { input, .. } | Op::Unpool { input, .. } => vec![*input],
            Op::Elu(a) | Op::Sigmoid(a) | Op::Reshape(a) | Op::SoftmaxRows(a) | Op::Scale(a, _) => vec![*a],
            Op::SumAll(a) | Op::SumSquares(a) => vec![*a],
            Op::Mul(a, b) | Op::Add(a, b) => vec![*a, *b],
            Op::Mse { pred, .. } => vec![*pred],
            Op::SoftmaxCrossEntropy { logits, .. } => vec![*logits],
        }
    }
}

#[derive(Debug, Clone)]
struct Node {
    value: Tensor,
    op: Op,
}

/// Records a forward computation for gradient accumulation.
#[derive(Debug, Default, Clone)]
pub struct GradTape {
    nodes: Vec<Node>,
}

/// Gradients produced by [`GradTape::backward`], indexed by node.
#[derive(Debug, Clone)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    pub fn get(&self, var: Var) -> Option<&Tensor> {
        self.grads.get(var.0).and_then(|g| g.as_ref())
    }

    /// Gradient of `var`, zero-filled when the loss does not depend on it.
    pub fn wrt(&self, var: Var) -> Tensor {
        match self.get(var) {
            Some(g) => g.clone(),
            None => Tensor::zeros(&self.shapes[var.0]),
        }
    }
}

/// Clamp applied to the true-class probability inside cross-entropy.
pub const CE_PROB_FLOOR: f64 = 1e-12;

impl GradTape {
    pub fn new() -> Self {
        GradTape { nodes: Vec::new() }
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

    pub fn value(&self, var: Var) -> &Tensor {
        &self.nodes[var.0].value
    }

    pub fn scalar(&self, var: Var) -> f64 {
        self.nodes[var.0].value.values[0]
    }

    /// Switches recorded by a max-pool node.
    pub fn switches(&self, var: Var) -> Option<&Switches> {
        match &self.nodes[var.0].op {
            Op::MaxPool { switches, .. } => Some(switches),
            _ => None,
        }
    }

    /// Input or parameter leaf.
    pub fn leaf(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn conv1d(&mut self, input: Var, weight: Var, bias: Var, stride: usize, padding: usize) -> Result<Var> {
        let x = self.value(input);
        let params = LayerParams::new(self.value(weight).clone(), self.value(bias).clone())?;
        let y = layers::conv1d(x, &params, stride, padding)?;
        let (b, c, l) = layers::batch_dims(&x.shape)?;
        let geom = ConvGeometry::new(b, c, l, params.out_channels(), params.width(), stride, padding)?;
        Ok(self.push(y, Op::Conv1d { input, weight, bias, geom }))
    }

    pub fn transposed_conv1d(
        &mut self,
        input: Var,
        weight: Var,
        bias: Var,
        stride: usize,
        padding: usize,
    ) -> Result<Var> {
        let params = LayerParams::new(self.value(weight).clone(), self.value(bias).clone())?;
        let y = layers::transposed_conv1d(self.value(input), &params, stride, padding)?;
        let (b, c, l) = layers::batch_dims(&y.shape)?;
        let geom = ConvGeometry::new(b, c, l, params.out_channels(), params.width(), stride, padding)?;
        Ok(self.push(y, Op::TransposedConv1d { input, weight, bias, geom }))
    }

    pub fn maxpool(&mut self, input: Var, window: usize) -> Var {
        let (y, switches) = layers::maxpool(self.value(input), window);
        self.push(y, Op::MaxPool { input, switches })
    }

    pub fn unpool(&mut self, input: Var, switches: Switches) -> Result<Var> {
        let y = layers::unpool(self.value(input), &switches, switches.input_len)?;
        Ok(self.push(y, Op::Unpool { input, switches }))
    }

    pub fn elu(&mut self, input: Var) -> Var {
        let y = self.value(input).map(math::elu);
        self.push(y, Op::Elu(input))
    }

    pub fn sigmoid(&mut self, input: Var) -> Var {
        let y = self.value(input).map(math::sigmoid);
        self.push(y, Op::Sigmoid(input))
    }

    /// `y[b, o] = sum_d x[b, d] * w[o, d] + bias[o]` for `x: [B, D]`, `w: [O, D]`.
    pub fn dense(&mut self, input: Var, weight: Var, bias: Var) -> Result<Var> {
        let x = self.value(input);
        let w = self.value(weight);
        let bvec = self.value(bias);
        let (rows, d) = rows_cols(x)?;
        if w.rank() != 2 || w.shape[1] != d {
            return Err(Error::shape(&[0, d], &w.shape));
        }
        let o = w.shape[0];
        if bvec.len() != o {
            return Err(Error::shape(&[o], &bvec.shape));
        }
        let mut y = Vec::with_capacity(rows * o);
        for xr in x.values.chunks(d) {
            for (wr, bv) in w.values.chunks(d).zip(&bvec.values) {
                let mut acc = *bv;
                for (a, b) in xr.iter().zip(wr) {
                    acc += a * b;
                }
                y.push(acc);
            }
        }
        let y = Tensor::new(vec![rows, o], y)?;
        Ok(self.push(y, Op::Dense { input, weight, bias }))
    }

    pub fn reshape(&mut self, input: Var, shape: &[usize]) -> Result<Var> {
        let y = self.value(input).clone().reshape(shape)?;
        Ok(self.push(y, Op::Reshape(input)))
    }

    /// Softmax over the last axis.
    pub fn softmax_rows(&mut self, input: Var) -> Var {
        let x = self.value(input);
        let d = *x.shape.last().unwrap_or(&1);
        let mut y = x.clone();
        for row in y.values.chunks_mut(d.max(1)) {
            math::softmax_in_place(row);
        }
        self.push(y, Op::SoftmaxRows(input))
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (x, y) = (self.value(a), self.value(b));
        if x.shape != y.shape {
            return Err(Error::shape(&x.shape, &y.shape));
        }
        let values = x.values.iter().zip(&y.values).map(|(p, q)| p * q).collect();
        let out = Tensor { shape: x.shape.clone(), values };
        Ok(self.push(out, Op::Mul(a, b)))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (x, y) = (self.value(a), self.value(b));
        if x.shape != y.shape {
            return Err(Error::shape(&x.shape, &y.shape));
        }
        let values = x.values.iter().zip(&y.values).map(|(p, q)| p + q).collect();
        let out = Tensor { shape: x.shape.clone(), values };
        Ok(self.push(out, Op::Add(a, b)))
    }

    pub fn scale(&mut self, input: Var, factor: f64) -> Var {
        let y = self.value(input).map(|v| v * factor);
        self.push(y, Op::Scale(input, factor))
    }

    pub fn sum(&mut self, input: Var) -> Var {
        let s = self.value(input).values.iter().sum();
        self.push(Tensor::from_vec(vec![s]), Op::SumAll(input))
    }

    pub fn sum_squares(&mut self, input: Var) -> Var {
        let s = self.value(input).sum_squares();
        self.push(Tensor::from_vec(vec![s]), Op::SumSquares(input))
    }

    /// Mean over all elements of `(pred - target)^2`.
    pub fn mse(&mut self, pred: Var, target: &[f64]) -> Result<Var> {
        let p = self.value(pred);
        if p.len() != target.len() || target.is_empty() {
            return Err(Error::shape(&p.shape, &[target.len()]));
        }
        let s: f64 = p.values.iter().zip(target).map(|(a, b)| (a - b) * (a - b)).sum();
        let loss = s / target.len() as f64;
        Ok(self.push(
            Tensor::from_vec(vec![loss]),
            Op::Mse { pred, target: target.to_vec() },
        ))
    }

    /// Mean categorical cross-entropy of softmax(`logits`) against `labels`,
    /// natural log, probability floor [`CE_PROB_FLOOR`].
    pub fn softmax_cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let x = self.value(logits);
        let (rows, c) = rows_cols(x)?;
        if rows != labels.len() || rows == 0 {
            return Err(Error::shape(&[rows], &[labels.len()]));
        }
        if let Some(&bad) = labels.iter().find(|&&l| l >= c) {
            return Err(Error::InvalidData(alloc::format!("label {bad} outside {c} classes")));
        }
        let mut probs = x.values.clone();
        let mut loss = 0.0;
        for (row, &label) in probs.chunks_mut(c).zip(labels) {
            math::softmax_in_place(row);
            loss -= math::ln(row[label].max(CE_PROB_FLOOR));
        }
        loss /= rows as f64;
        Ok(self.push(
            Tensor::from_vec(vec![loss]),
            Op::SoftmaxCrossEntropy { logits, labels: labels.to_vec(), probs },
        ))
    }

    /// Gradients of the scalar `loss` with respect to every node.
    pub fn backward(&self, loss: Var) -> Result<Gradients> {
        let v = self.value(loss);
        if v.len() != 1 {
            return Err(Error::shape(&[1], &v.shape));
        }
        self.backward_from(loss, Tensor::filled(&v.shape, 1.0))
    }

    /// Vector-Jacobian product: propagates `seed` (shaped like `output`)
    /// back through the tape.
    pub fn backward_from(&self, output: Var, seed: Tensor) -> Result<Gradients> {
        let n = self.nodes.len();
        if output.0 >= n {
            return Err(Error::GraphCycle { node: n, input: output.0 });
        }
        if seed.shape != self.value(output).shape {
            return Err(Error::shape(&self.value(output).shape, &seed.shape));
        }
        let mut grads: Vec<Option<Tensor>> = vec![None; n];
        grads[output.0] = Some(seed);
        for id in (0..=output.0).rev() {
            let node = &self.nodes[id];
            for input in node.op.inputs() {
                if input.0 >= id {
                    return Err(Error::GraphCycle { node: id, input: input.0 });
                }
            }
            let Some(g) = grads[id].take() else { continue };
            self.propagate(id, &g, &mut grads)?;
            grads[id] = Some(g);
        }
        Ok(Gradients {
            grads,
            shapes: self.nodes.iter().map(|n| n.value.shape.clone()).collect(),
        })
    }

    fn propagate(&self, id: usize, g: &Tensor, grads: &mut [Option<Tensor>]) -> Result<()> {
        let node = &self.nodes[id];
        match &node.op {
            Op::Leaf => {}
            Op::Conv1d { input, weight, bias, geom } => {
                let w = &self.value(*weight).values;
                let mut dx = vec![0.0; self.value(*input).len()];
                geom.input_grad_acc(&g.values, w, &mut dx);
                let mut dw = vec![0.0; w.len()];
                geom.weight_grad_acc(&self.value(*input).values, &g.values, &mut dw);
                let mut db = vec![0.0; geom.c_out];
                for (i, row) in g.values.chunks(geom.len_out).enumerate() {
                    db[i % geom.c_out] += row.iter().sum::<f64>();
                }
                self.accumulate(grads, *input, dx);
                self.accumulate(grads, *weight, dw);
                self.accumulate(grads, *bias, db);
            }
            Op::TransposedConv1d { input, weight, bias, geom } => {
                // forward was out = corr^T(input) + bias over the geometry's c_in axis
                let w = &self.value(*weight).values;
                let mut dx = vec![0.0; self.value(*input).len()];
                geom.forward_acc(&g.values, w, &mut dx);
                let mut dw = vec![0.0; w.len()];
                geom.weight_grad_acc(&g.values, &self.value(*input).values, &mut dw);
                let mut db = vec![0.0; geom.c_in];
                for (i, row) in g.values.chunks(geom.len_in).enumerate() {
                    db[i % geom.c_in] += row.iter().sum::<f64>();
                }
                self.accumulate(grads, *input, dx);
                self.accumulate(grads, *weight, dw);
                self.accumulate(grads, *bias, db);
            }
            Op::MaxPool { input, switches } => {
                let l = switches.input_len;
                let lp = *switches.pooled_shape.last().unwrap_or(&1);
                let mut dx = vec![0.0; self.value(*input).len()];
                for (j, (&gv, &idx)) in g.values.iter().zip(&switches.indices).enumerate() {
                    dx[(j / lp) * l + idx] += gv;
                }
                self.accumulate(grads, *input, dx);
            }
            Op::Unpool { input, switches } => {
                let l = switches.input_len;
                let lp = *switches.pooled_shape.last().unwrap_or(&1);
                let dx = switches
                    .indices
                    .iter()
                    .enumerate()
                    .map(|(j, &idx)| g.values[(j / lp) * l + idx])
                    .collect();
                self.accumulate(grads, *input, dx);
            }
            Op::Elu(a) => {
                let x = self.value(*a);
                let dx = x.values.iter().zip(&g.values).map(|(&xv, gv)| gv * math::elu_grad(xv)).collect();
                self.accumulate(grads, *a, dx);
            }
            Op::Sigmoid(a) => {
                let dx = node
                    .value
                    .values
                    .iter()
                    .zip(&g.values)
                    .map(|(y, gv)| gv * y * (1.0 - y))
                    .collect();
                self.accumulate(grads, *a, dx);
            }
            Op::Dense { input, weight, bias } => {
                let x = self.value(*input);
                let w = self.value(*weight);
                let (o, d) = (w.shape[0], w.shape[1]);
                let mut dx = vec![0.0; x.len()];
                let mut dw = vec![0.0; w.len()];
                let mut db = vec![0.0; o];
                for ((gr, xr), dxr) in g.values.chunks(o).zip(x.values.chunks(d)).zip(dx.chunks_mut(d)) {
                    for (oi, &gv) in gr.iter().enumerate() {
                        if gv == 0.0 {
                            continue;
                        }
                        db[oi] += gv;
                        let wr = &w.values[oi * d..(oi + 1) * d];
                        for (dxv, wv) in dxr.iter_mut().zip(wr) {
                            *dxv += gv * wv;
                        }
                        for (dwv, xv) in dw[oi * d..(oi + 1) * d].iter_mut().zip(xr) {
                            *dwv += gv * xv;
                        }
                    }
                }
                self.accumulate(grads, *input, dx);
                self.accumulate(grads, *weight, dw);
                self.accumulate(grads, *bias, db);
            }
            Op::Reshape(a) => self.accumulate(grads, *a, g.values.clone()),
            Op::SoftmaxRows(a) => {
                let y = &node.value;
                let d = *y.shape.last().unwrap_or(&1);
                let mut dx = vec![0.0; y.len()];
                for ((yr, gr), dxr) in y.values.chunks(d).zip(g.values.chunks(d)).zip(dx.chunks_mut(d)) {
                    let dotp: f64 = yr.iter().zip(gr).map(|(p, q)| p * q).sum();
                    for ((dxv, yv), gv) in dxr.iter_mut().zip(yr).zip(gr) {
                        *dxv = yv * (gv - dotp);
                    }
                }
                self.accumulate(grads, *a, dx);
            }
            Op::Mul(a, b) => {
                let (x, y) = (self.value(*a), self.value(*b));
                let da = g.values.iter().zip(&y.values).map(|(p, q)| p * q).collect();
                let db = g.values.iter().zip(&x.values).map(|(p, q)| p * q).collect();
                self.accumulate(grads, *a, da);
                self.accumulate(grads, *b, db);
            }
            Op::Add(a, b) => {
                self.accumulate(grads, *a, g.values.clone());
                self.accumulate(grads, *b, g.values.clone());
            }
            Op::Scale(a, f) => {
                let dx = g.values.iter().map(|v| v * f).collect();
                self.accumulate(grads, *a, dx);
            }
            Op::SumAll(a) => {
                let n = self.value(*a).len();
                self.accumulate(grads, *a, vec![g.values[0]; n]);
            }
            Op::SumSquares(a) => {
                let s = g.values[0];
                let dx = self.value(*a).values.iter().map(|v| 2.0 * v * s).collect();
                self.accumulate(grads, *a, dx);
            }
            Op::Mse { pred, target } => {
                let s = 2.0 * g.values[0] / target.len() as f64;
                let dx = self
                    .value(*pred)
                    .values
                    .iter()
                    .zip(target)
                    .map(|(p, t)| s * (p - t))
                    .collect();
                self.accumulate(grads, *pred, dx);
            }
            Op::SoftmaxCrossEntropy { logits, labels, probs } => {
                let c = probs.len() / labels.len();
                let s = g.values[0] / labels.len() as f64;
                let mut dx = vec![0.0; probs.len()];
                for ((pr, dxr), &label) in probs.chunks(c).zip(dx.chunks_mut(c)).zip(labels) {
                    if pr[label] < CE_PROB_FLOOR {
                        continue;
                    }
                    for (k, (dxv, p)) in dxr.iter_mut().zip(pr).enumerate() {
                        *dxv = s * (p - if k == label { 1.0 } else { 0.0 });
                    }
                }
                self.accumulate(grads, *logits, dx);
            }
        }
        Ok(())
    }

    fn accumulate(&self, grads: &mut [Option<Tensor>], var: Var, delta: Vec<f64>) {
        match &mut grads[var.0] {
            Some(existing) => {
                for (e, d) in existing.values.iter_mut().zip(delta) {
                    *e += d;
                }
            }
            slot @ None => {
                *slot = Some(Tensor {
                    shape: self.nodes[var.0].value.shape.clone(),
                    values: delta,
                })
            }
        }
    }
}

fn rows_cols(x: &Tensor) -> Result<(usize, usize)> {
    match *x.shape {
        [r, c] => Ok((r, c)),
        _ => Err(Error::shape(&[0, 0], &x.shape)),
    }
}
