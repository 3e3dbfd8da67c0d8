//! The black-box classifier: a 1-D convolutional autoencoder over the feature
//! axis whose embedding feeds a softmax head, trained on the weighted sum of
//! reconstruction and cross-entropy losses.
//!
//! Encoder: `[conv -> ELU -> maxpool] x stages -> flatten -> dense -> ELU = Z`.
//! Decoder: `dense -> ELU -> [unpool -> transposed conv] x stages (mirrored)`,
//! ELU between stages and a sigmoid on the output. Unpooling reuses the
//! switches of the paired forward pass; decoding a bare embedding places
//! values at window centres instead.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::autodiff::{GradTape, Var};
use crate::data::{Dataset, Matrix, ScalerParams};
use crate::layers::{self, Switches};
use crate::math;
use crate::model::Classifier;
use crate::optim::{adam_step, glorot_init, AdamConfig, AdamState};
use crate::rng::{derive_seed, seeded};
use crate::tensor::Tensor;
use crate::{Error, Result};

/// One encoder convolution; the decoder mirrors it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConvStage {
    pub channels: usize,
    pub width: usize,
    pub stride: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaeConfig {
    pub stages: Vec<ConvStage>,
    pub pool: usize,
    /// Embedding size K.
    pub embedding_dim: usize,
    /// Weight of the (regularised) reconstruction loss.
    pub alpha_r: f64,
    /// Weight of the cross-entropy loss.
    pub alpha_ce: f64,
    /// Squared-norm penalty on encoder and decoder weights.
    pub lambda: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for CaeConfig {
    fn default() -> Self {
        CaeConfig {
            stages: vec![
                ConvStage { channels: 8, width: 5, stride: 1 },
                ConvStage { channels: 16, width: 5, stride: 1 },
            ],
            pool: 2,
            embedding_dim: 16,
            alpha_r: 0.5,
            alpha_ce: 0.5,
            lambda: 1e-4,
            epochs: 50,
            batch_size: 64,
            lr: 1e-3,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct StageGeometry {
    c_in: usize,
    c_out: usize,
    width: usize,
    stride: usize,
    padding: usize,
    len_in: usize,
    len_conv: usize,
    len_pool: usize,
}

impl CaeConfig {
    pub fn validate(&self, n_features: usize) -> Result<()> {
        if self.embedding_dim == 0 || self.embedding_dim >= n_features {
            return Err(Error::InvalidConfig(format!(
                "embedding size {} must satisfy 1 <= K < M = {n_features}",
                self.embedding_dim
            )));
        }
        if !(self.alpha_r >= 0.0 && self.alpha_ce >= 0.0) || (self.alpha_r == 0.0 && self.alpha_ce == 0.0) {
            return Err(Error::InvalidConfig("loss weights must be >= 0 and not both 0".into()));
        }
        if self.lambda < 0.0 || self.lr <= 0.0 || self.batch_size == 0 || self.pool == 0 {
            return Err(Error::InvalidConfig(
                "lambda >= 0, lr > 0, batch size >= 1 and pool >= 1 required".into(),
            ));
        }
        if self.stages.iter().any(|s| s.channels == 0 || s.width == 0 || s.stride == 0) {
            return Err(Error::InvalidConfig("conv stages need positive channels, width and stride".into()));
        }
        self.geometry(n_features).map(|_| ())
    }

    fn geometry(&self, n_features: usize) -> Result<Vec<StageGeometry>> {
        let mut out = Vec::with_capacity(self.stages.len());
        let (mut c, mut len) = (1, n_features);
        for (i, s) in self.stages.iter().enumerate() {
            let padding = s.width / 2;
            let len_conv = layers::conv_out_len(len, s.width, s.stride, padding).ok_or_else(|| {
                Error::InvalidConfig(format!("stage {i}: width {} too wide for length {len}", s.width))
            })?;
            if layers::transposed_out_len(len_conv, s.width, s.stride, padding) != Some(len) {
                return Err(Error::InvalidConfig(format!(
                    "stage {i}: stride {} does not invert to length {len}",
                    s.stride
                )));
            }
            let len_pool = layers::pooled_len(len_conv, self.pool);
            out.push(StageGeometry {
                c_in: c,
                c_out: s.channels,
                width: s.width,
                stride: s.stride,
                padding,
                len_in: len,
                len_conv,
                len_pool,
            });
            c = s.channels;
            len = len_pool;
        }
        Ok(out)
    }
}

/// Per-epoch training record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub loss: f64,
    pub loss_r: f64,
    pub loss_ce: f64,
}

/// Value of the joint objective on a batch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossComponents {
    pub total: f64,
    /// Mean squared reconstruction error.
    pub mse: f64,
    /// Squared norm of the penalised weights (before multiplying by lambda).
    pub weight_norm: f64,
    /// Regularised reconstruction loss `mse + lambda * weight_norm`.
    pub reconstruction: f64,
    pub cross_entropy: f64,
}

/// Trained (or freshly initialised) autoencoder classifier.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaeClassifier {
    pub config: CaeConfig,
    pub n_features: usize,
    pub n_classes: usize,
    pub scaler: ScalerParams,
    /// Per-feature min and max of the training stream, used to map the
    /// reconstruction target into [0, 1].
    pub recon_min: Vec<f64>,
    pub recon_max: Vec<f64>,
    pub params: BTreeMap<String, Tensor>,
    pub history: Vec<EpochRecord>,
}

struct Forward {
    z: Var,
    logits: Var,
    recon: Option<Var>,
    vars: BTreeMap<String, Var>,
    input: Var,
}

const INFERENCE_CHUNK: usize = 256;

fn conv_w(i: usize) -> String {
    format!("enc.conv{i}.w")
}
fn conv_b(i: usize) -> String {
    format!("enc.conv{i}.b")
}
fn tconv_w(i: usize) -> String {
    format!("dec.tconv{i}.w")
}
fn tconv_b(i: usize) -> String {
    format!("dec.tconv{i}.b")
}

impl CaeClassifier {
    /// Glorot-uniform weights and zero biases, seeded from `config.seed`.
    pub fn init(
        config: &CaeConfig,
        n_features: usize,
        n_classes: usize,
        scaler: ScalerParams,
        recon_min: Vec<f64>,
        recon_max: Vec<f64>,
    ) -> Result<Self> {
        config.validate(n_features)?;
        if n_classes < 2 {
            return Err(Error::InvalidConfig("need at least 2 classes".into()));
        }
        let geom = config.geometry(n_features)?;
        let flat = geom.last().map_or(n_features, |g| g.c_out * g.len_pool);
        let k = config.embedding_dim;
        let mut shapes: Vec<(String, Vec<usize>, bool)> = Vec::new();
        for (i, g) in geom.iter().enumerate() {
            shapes.push((conv_w(i), vec![g.c_out, g.c_in, g.width], true));
            shapes.push((conv_b(i), vec![g.c_out], false));
            shapes.push((tconv_w(i), vec![g.c_out, g.c_in, g.width], true));
            shapes.push((tconv_b(i), vec![g.c_in], false));
        }
        shapes.push(("enc.dense.w".into(), vec![k, flat], true));
        shapes.push(("enc.dense.b".into(), vec![k], false));
        shapes.push(("dec.dense.w".into(), vec![flat, k], true));
        shapes.push(("dec.dense.b".into(), vec![flat], false));
        shapes.push(("head.w".into(), vec![n_classes, k], true));
        shapes.push(("head.b".into(), vec![n_classes], false));
        let mut params = BTreeMap::new();
        for (idx, (name, shape, weight)) in shapes.into_iter().enumerate() {
            let t = if weight {
                glorot_init(&shape, derive_seed(config.seed, idx as u64))
            } else {
                Tensor::zeros(&shape)
            };
            params.insert(name, t);
        }
        Ok(CaeClassifier {
            config: config.clone(),
            n_features,
            n_classes,
            scaler,
            recon_min,
            recon_max,
            params,
            history: Vec::new(),
        })
    }

    pub fn embedding_dim(&self) -> usize {
        self.config.embedding_dim
    }

    pub fn param(&self, name: &str) -> &Tensor {
        &self.params[name]
    }

    pub fn param_mut(&mut self, name: &str) -> &mut Tensor {
        self.params.get_mut(name).expect("unknown parameter")
    }

    /// Names of the weights under the squared-norm penalty.
    pub fn penalised(&self) -> impl Iterator<Item = &String> {
        self.params
            .keys()
            .filter(|n| (n.starts_with("enc.") || n.starts_with("dec.")) && n.ends_with(".w"))
    }

    /// FNV-1a digest of every parameter bit pattern.
    pub fn fingerprint(&self) -> u64 {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325;
        for (name, t) in &self.params {
            for b in name.bytes() {
                h = (h ^ b as u64).wrapping_mul(0x0100_0000_01b3);
            }
            for v in &t.values {
                for b in v.to_bits().to_le_bytes() {
                    h = (h ^ b as u64).wrapping_mul(0x0100_0000_01b3);
                }
            }
        }
        h
    }

    /// Reconstruction target: min-max map of the standardised row into [0, 1].
    pub fn recon_target(&self, x: &Matrix) -> Vec<f64> {
        let mut out = Vec::with_capacity(x.values.len());
        for row in x.iter_rows() {
            for (j, &v) in row.iter().enumerate() {
                let range = self.recon_max[j] - self.recon_min[j];
                out.push(if range > 0.0 { (v - self.recon_min[j]) / range } else { 0.5 });
            }
        }
        out
    }

    fn check_width(&self, x: &Matrix) -> Result<()> {
        if x.cols != self.n_features {
            return Err(Error::shape(&[self.n_features], &[x.cols]));
        }
        Ok(())
    }

    fn forward(&self, tape: &mut GradTape, x: &Matrix, decode: bool) -> Result<Forward> {
        self.check_width(x)?;
        let geom = self.config.geometry(self.n_features)?;
        let b = x.rows;
        let mut vars = BTreeMap::new();
        for (name, t) in &self.params {
            vars.insert(name.clone(), tape.leaf(t.clone()));
        }
        let input = tape.leaf(Tensor::new(vec![b, 1, self.n_features], x.values.clone())?);
        let mut h = input;
        let mut pools = Vec::with_capacity(geom.len());
        for (i, g) in geom.iter().enumerate() {
            let c = tape.conv1d(h, vars[&conv_w(i)], vars[&conv_b(i)], g.stride, g.padding)?;
            let a = tape.elu(c);
            h = tape.maxpool(a, self.config.pool);
            pools.push(h);
        }
        let flat = geom.last().map_or(self.n_features, |g| g.c_out * g.len_pool);
        let hf = tape.reshape(h, &[b, flat])?;
        let pre_z = tape.dense(hf, vars["enc.dense.w"], vars["enc.dense.b"])?;
        let z = tape.elu(pre_z);
        let logits = tape.dense(z, vars["head.w"], vars["head.b"])?;
        let recon = if decode {
            let switches: Vec<Switches> = pools.iter().map(|&p| tape.switches(p).cloned().unwrap()).collect();
            Some(self.decoder(tape, z, &vars, &geom, |i| switches[i].clone())?)
        } else {
            None
        };
        Ok(Forward { z, logits, recon, vars, input })
    }

    fn decoder(
        &self,
        tape: &mut GradTape,
        z: Var,
        vars: &BTreeMap<String, Var>,
        geom: &[StageGeometry],
        switches: impl Fn(usize) -> Switches,
    ) -> Result<Var> {
        let b = tape.value(z).shape[0];
        let d = tape.dense(z, vars["dec.dense.w"], vars["dec.dense.b"])?;
        let mut h = tape.elu(d);
        match geom.last() {
            Some(g) => h = tape.reshape(h, &[b, g.c_out, g.len_pool])?,
            None => h = tape.reshape(h, &[b, 1, self.n_features])?,
        }
        for (i, g) in geom.iter().enumerate().rev() {
            let u = tape.unpool(h, switches(i))?;
            let t = tape.transposed_conv1d(u, vars[&tconv_w(i)], vars[&tconv_b(i)], g.stride, g.padding)?;
            h = if i == 0 { t } else { tape.elu(t) };
        }
        let out = tape.sigmoid(h);
        tape.reshape(out, &[b, self.n_features])
    }

    fn loss_on_tape(&self, tape: &mut GradTape, fwd: &Forward, x: &Matrix, labels: &[usize]) -> Result<(Var, LossComponents)> {
        let target = self.recon_target(x);
        let recon = fwd.recon.expect("decoder required for the joint loss");
        let mse = tape.mse(recon, &target)?;
        let mut norm: Option<Var> = None;
        let names: Vec<String> = self.penalised().cloned().collect();
        for name in &names {
            let s = tape.sum_squares(fwd.vars[name]);
            norm = Some(match norm {
                None => s,
                Some(acc) => tape.add(acc, s)?,
            });
        }
        let norm = norm.unwrap_or_else(|| tape.leaf(Tensor::from_vec(vec![0.0])));
        let penalty = tape.scale(norm, self.config.lambda);
        let rec = tape.add(mse, penalty)?;
        let ce = tape.softmax_cross_entropy(fwd.logits, labels)?;
        let wr = tape.scale(rec, self.config.alpha_r);
        let wc = tape.scale(ce, self.config.alpha_ce);
        let total = tape.add(wr, wc)?;
        let comps = LossComponents {
            total: tape.scalar(total),
            mse: tape.scalar(mse),
            weight_norm: tape.scalar(norm),
            reconstruction: tape.scalar(rec),
            cross_entropy: tape.scalar(ce),
        };
        Ok((total, comps))
    }

    /// Joint objective `alpha_r * (MSE + lambda * |W|^2) + alpha_ce * CE` on a batch.
    pub fn joint_loss(&self, x: &Matrix, labels: &[usize]) -> Result<LossComponents> {
        if x.rows == 0 {
            return Err(Error::EmptySample);
        }
        let mut tape = GradTape::new();
        let fwd = self.forward(&mut tape, x, true)?;
        Ok(self.loss_on_tape(&mut tape, &fwd, x, labels)?.1)
    }

    /// Joint loss and its gradient with respect to every parameter.
    pub fn joint_loss_grad(
        &self,
        x: &Matrix,
        labels: &[usize],
    ) -> Result<(LossComponents, BTreeMap<String, Tensor>)> {
        if x.rows == 0 {
            return Err(Error::EmptySample);
        }
        let mut tape = GradTape::new();
        let fwd = self.forward(&mut tape, x, true)?;
        let (total, comps) = self.loss_on_tape(&mut tape, &fwd, x, labels)?;
        let g = tape.backward(total)?;
        let grads = fwd.vars.iter().map(|(n, &v)| (n.clone(), g.wrt(v))).collect();
        Ok((comps, grads))
    }

    fn chunked(&self, x: &Matrix, mut f: impl FnMut(&Matrix) -> Result<Vec<f64>>) -> Result<Vec<f64>> {
        self.check_width(x)?;
        let mut out = Vec::new();
        let mut start = 0;
        while start < x.rows {
            let end = (start + INFERENCE_CHUNK).min(x.rows);
            let rows: Vec<usize> = (start..end).collect();
            out.extend(f(&x.select_rows(&rows))?);
            start = end;
        }
        Ok(out)
    }

    /// Embeddings `Z` (N x K) of standardised rows.
    pub fn encode(&self, x: &Matrix) -> Result<Matrix> {
        let values = self.chunked(x, |chunk| {
            let mut tape = GradTape::new();
            let f = self.forward(&mut tape, chunk, false)?;
            Ok(tape.value(f.z).values.clone())
        })?;
        Matrix::new(x.rows, self.embedding_dim(), values)
    }

    /// Decodes bare embeddings, unpooling at window centres.
    pub fn decode(&self, z: &Matrix) -> Result<Matrix> {
        if z.cols != self.embedding_dim() {
            return Err(Error::shape(&[self.embedding_dim()], &[z.cols]));
        }
        let geom = self.config.geometry(self.n_features)?;
        let mut tape = GradTape::new();
        let mut vars = BTreeMap::new();
        for (name, t) in &self.params {
            vars.insert(name.clone(), tape.leaf(t.clone()));
        }
        let zv = tape.leaf(Tensor::new(vec![z.rows, z.cols], z.values.clone())?);
        let pool = self.config.pool;
        let b = z.rows;
        let out = self.decoder(&mut tape, zv, &vars, &geom, |i| {
            let g = geom[i];
            Switches::centered(&[b, g.c_out, g.len_pool], g.len_conv, pool)
        })?;
        Matrix::new(z.rows, self.n_features, tape.value(out).values.clone())
    }

    /// Encode followed by decode within one pass, unpooling through the
    /// recorded switches.
    pub fn reconstruct(&self, x: &Matrix) -> Result<Matrix> {
        let values = self.chunked(x, |chunk| {
            let mut tape = GradTape::new();
            let f = self.forward(&mut tape, chunk, true)?;
            Ok(tape.value(f.recon.unwrap()).values.clone())
        })?;
        Matrix::new(x.rows, self.n_features, values)
    }

    /// Per-row mean squared error between the reconstruction target and the
    /// reconstruction.
    pub fn reconstruct_error(&self, x: &Matrix) -> Result<Vec<f64>> {
        let recon = self.reconstruct(x)?;
        let target = Matrix::new(x.rows, x.cols, self.recon_target(x))?;
        Ok(row_mse(&target, &recon))
    }

    pub fn logits(&self, x: &Matrix) -> Result<Matrix> {
        let values = self.chunked(x, |chunk| {
            let mut tape = GradTape::new();
            let f = self.forward(&mut tape, chunk, false)?;
            Ok(tape.value(f.logits).values.clone())
        })?;
        Matrix::new(x.rows, self.n_classes, values)
    }

    /// Class probabilities (N x C) of standardised rows.
    pub fn try_predict_proba(&self, x: &Matrix) -> Result<Matrix> {
        let mut l = self.logits(x)?;
        for i in 0..l.rows {
            math::softmax_in_place(l.row_mut(i));
        }
        Ok(l)
    }

    /// Mean over `x` of `|dz_j / dx_i|`, as a K x M matrix.
    pub fn mean_abs_jacobian(&self, x: &Matrix) -> Result<Matrix> {
        if x.rows == 0 {
            return Err(Error::EmptySample);
        }
        self.check_width(x)?;
        let (k, m) = (self.embedding_dim(), self.n_features);
        let mut acc = vec![0.0; k * m];
        let mut start = 0;
        while start < x.rows {
            let end = (start + INFERENCE_CHUNK).min(x.rows);
            let rows: Vec<usize> = (start..end).collect();
            let chunk = x.select_rows(&rows);
            let mut tape = GradTape::new();
            let f = self.forward(&mut tape, &chunk, false)?;
            for j in 0..k {
                let mut seed = Tensor::zeros(&[chunk.rows, k]);
                for r in 0..chunk.rows {
                    seed.values[r * k + j] = 1.0;
                }
                let g = tape.backward_from(f.z, seed)?;
                let gx = g.wrt(f.input);
                // per-row sums in a fixed order keep results independent of chunking
                for r in 0..chunk.rows {
                    for i in 0..m {
                        acc[j * m + i] += gx.values[r * m + i].abs();
                    }
                }
            }
            start = end;
        }
        let n = x.rows as f64;
        for v in &mut acc {
            *v /= n;
        }
        Matrix::new(k, m, acc)
    }
}

impl Classifier for CaeClassifier {
    fn n_features(&self) -> usize {
        self.n_features
    }
    fn n_classes(&self) -> usize {
        self.n_classes
    }
    fn predict_proba_row(&self, x: &[f64]) -> Vec<f64> {
        let m = Matrix {
            rows: 1,
            cols: x.len(),
            values: x.to_vec(),
        };
        self.try_predict_proba(&m).expect("row width matches the model").values
    }
    fn predict_proba(&self, x: &Matrix) -> Matrix {
        self.try_predict_proba(x).expect("row width matches the model")
    }
}

/// Mean over columns of squared differences, per row.
pub fn row_mse(a: &Matrix, b: &Matrix) -> Vec<f64> {
    a.iter_rows()
        .zip(b.iter_rows())
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| (p - q) * (p - q)).sum::<f64>() / x.len() as f64)
        .collect()
}

/// Per-feature range of a training matrix.
pub fn column_ranges(x: &Matrix) -> (Vec<f64>, Vec<f64>) {
    let mut lo = vec![f64::INFINITY; x.cols];
    let mut hi = vec![f64::NEG_INFINITY; x.cols];
    for row in x.iter_rows() {
        for (j, &v) in row.iter().enumerate() {
            lo[j] = lo[j].min(v);
            hi[j] = hi[j].max(v);
        }
    }
    (lo, hi)
}

/// Trains the autoencoder classifier with Adam on a standardised dataset.
pub fn train(dataset: &Dataset, scaler: ScalerParams, config: &CaeConfig) -> Result<CaeClassifier> {
    let (lo, hi) = column_ranges(&dataset.features);
    let mut model = CaeClassifier::init(config, dataset.n_features(), dataset.n_classes(), scaler, lo, hi)?;
    let adam = AdamConfig {
        lr: config.lr,
        ..AdamConfig::default()
    };
    let mut states: BTreeMap<String, AdamState> = model
        .params
        .iter()
        .map(|(n, t)| (n.clone(), AdamState::zeros(t.len())))
        .collect();
    let mut rng = seeded(derive_seed(config.seed, 0x5348_5546));
    let mut order: Vec<usize> = (0..dataset.n_rows()).collect();
    for epoch in 0..config.epochs {
        order.shuffle(&mut rng);
        let (mut sum, mut sum_r, mut sum_ce) = (0.0, 0.0, 0.0);
        for batch in order.chunks(config.batch_size) {
            let x = dataset.features.select_rows(batch);
            let labels: Vec<usize> = batch.iter().map(|&i| dataset.labels[i]).collect();
            let (comps, grads) = model.joint_loss_grad(&x, &labels)?;
            if !comps.total.is_finite() {
                return Err(Error::NonFiniteLoss(epoch));
            }
            let w = batch.len() as f64;
            sum += comps.total * w;
            sum_r += comps.reconstruction * w;
            sum_ce += comps.cross_entropy * w;
            for (name, g) in &grads {
                let p = model.params.get_mut(name).unwrap();
                adam_step(&mut p.values, &g.values, states.get_mut(name).unwrap(), &adam);
            }
        }
        let n = dataset.n_rows() as f64;
        model.history.push(EpochRecord {
            epoch,
            loss: sum / n,
            loss_r: sum_r / n,
            loss_ce: sum_ce / n,
        });
    }
    Ok(model)
}
