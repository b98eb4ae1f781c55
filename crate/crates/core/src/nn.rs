//! Dense feedforward classifier trained with binary cross-entropy and Adam.
//!
//! Weights are stored per layer as `out_dim × in_dim` row-major matrices.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::codec::ByteReader;
use crate::error::{Error, Result};
use crate::rng::SeededRng;

/// Lower and upper clamp applied to sigmoid outputs before they reach the
/// loss or the classifier threshold.
pub const PREDICTION_CLAMP: f64 = 1e-7;

pub const DECISION_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Activation {
    ReLU,
    Sigmoid,
    Identity,
}

impl Activation {
    fn apply(self, z: f64) -> f64 {
        match self {
            Activation::ReLU => z.max(0.0),
            Activation::Sigmoid => sigmoid(z),
            Activation::Identity => z,
        }
    }

    /// Derivative expressed through the pre-activation `z` and output `a`.
    fn derivative(self, z: f64, a: f64) -> f64 {
        match self {
            Activation::ReLU => {
                if z > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            Activation::Sigmoid => a * (1.0 - a),
            Activation::Identity => 1.0,
        }
    }

    fn code(self) -> u32 {
        match self {
            Activation::ReLU => 0,
            Activation::Sigmoid => 1,
            Activation::Identity => 2,
        }
    }

    fn from_code(code: u32) -> Option<Self> {
        match code {
            0 => Some(Activation::ReLU),
            1 => Some(Activation::Sigmoid),
            2 => Some(Activation::Identity),
            _ => None,
        }
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

pub fn clamp_prediction(p: f64) -> f64 {
    p.clamp(PREDICTION_CLAMP, 1.0 - PREDICTION_CLAMP)
}

/// Label 1 iff `p >= 0.5`; ties go to the positive class.
pub fn classify(p: f64) -> u8 {
    u8::from(p >= DECISION_THRESHOLD)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LayerSpec {
    pub in_dim: usize,
    pub out_dim: usize,
    pub activation: Activation,
}

impl LayerSpec {
    pub fn new(in_dim: usize, out_dim: usize, activation: Activation) -> Self {
        Self {
            in_dim,
            out_dim,
            activation,
        }
    }
}

/// `input → Dense(hidden, ReLU) → Dense(1, Sigmoid)`, the head shared by the
/// quanvolutional model and the raw-pixel baseline.
pub fn classifier_head(input_dim: usize, hidden: usize) -> Vec<LayerSpec> {
    vec![
        LayerSpec::new(input_dim, hidden, Activation::ReLU),
        LayerSpec::new(hidden, 1, Activation::Sigmoid),
    ]
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 0.001,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate > 0.0
            && self.learning_rate.is_finite()
            && (0.0..1.0).contains(&self.beta1)
            && self.beta1 > 0.0
            && (0.0..1.0).contains(&self.beta2)
            && self.beta2 > 0.0
            && self.epsilon > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "invalid Adam configuration {self:?}"
            )))
        }
    }
}

/// Parameters (or gradients, or optimizer moments) of one layer.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerParams {
    pub weights: Vec<f64>,
    pub biases: Vec<f64>,
}

impl LayerParams {
    fn zeros(spec: &LayerSpec) -> Self {
        Self {
            weights: vec![0.0; spec.in_dim * spec.out_dim],
            biases: vec![0.0; spec.out_dim],
        }
    }

    fn iter(&self) -> impl Iterator<Item = &f64> {
        self.weights.iter().chain(&self.biases)
    }

    fn iter_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.weights.iter_mut().chain(self.biases.iter_mut())
    }
}

pub type Gradients = Vec<LayerParams>;

#[derive(Debug, Clone, PartialEq)]
pub struct DenseModel {
    pub layers: Vec<LayerSpec>,
    pub params: Vec<LayerParams>,
    pub adam_m: Vec<LayerParams>,
    pub adam_v: Vec<LayerParams>,
    pub step: u64,
}

/// Values kept from a forward pass for backpropagation. `activations[0]` is
/// the input; `activations[k + 1]` and `pre_activations[k]` belong to layer k.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    pub activations: Vec<Vec<f64>>,
    pub pre_activations: Vec<Vec<f64>>,
}

impl ForwardPass {
    pub fn output(&self) -> &[f64] {
        self.activations.last().map(Vec::as_slice).unwrap_or(&[])
    }

    /// First output unit, clamped into `[1e-7, 1 - 1e-7]`.
    pub fn prediction(&self) -> f64 {
        clamp_prediction(self.output()[0])
    }
}

fn check_chain(specs: &[LayerSpec]) -> Result<()> {
    if specs.is_empty() {
        return Err(Error::Config("model needs at least one layer".into()));
    }
    for (k, s) in specs.iter().enumerate() {
        if s.in_dim == 0 || s.out_dim == 0 {
            return Err(Error::Config(format!("layer {k} has a zero dimension")));
        }
    }
    for (k, pair) in specs.windows(2).enumerate() {
        if pair[0].out_dim != pair[1].in_dim {
            return Err(Error::Config(format!(
                "layer {k} outputs {} values but layer {} expects {}",
                pair[0].out_dim,
                k + 1,
                pair[1].in_dim
            )));
        }
    }
    Ok(())
}

impl DenseModel {
    /// Glorot-uniform weights (`±sqrt(6 / (in + out))`, drawn row-major,
    /// layer by layer), zero biases, zero Adam state.
    pub fn init(specs: &[LayerSpec], seed: u64) -> Result<Self> {
        check_chain(specs)?;
        let mut rng = SeededRng::new(seed);
        let params = specs
            .iter()
            .map(|s| {
                let limit = (6.0 / (s.in_dim + s.out_dim) as f64).sqrt();
                let mut p = LayerParams::zeros(s);
                for w in &mut p.weights {
                    *w = rng.uniform(-limit, limit);
                }
                p
            })
            .collect();
        Ok(Self {
            layers: specs.to_vec(),
            params,
            adam_m: specs.iter().map(LayerParams::zeros).collect(),
            adam_v: specs.iter().map(LayerParams::zeros).collect(),
            step: 0,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn parameter_count(&self) -> usize {
        self.layers
            .iter()
            .map(|s| s.in_dim * s.out_dim + s.out_dim)
            .sum()
    }

    pub fn forward(&self, input: &[f64]) -> Result<ForwardPass> {
        if input.len() != self.input_dim() {
            return Err(Error::Shape(format!(
                "input has {} values, model expects {}",
                input.len(),
                self.input_dim()
            )));
        }
        let mut activations = Vec::with_capacity(self.layers.len() + 1);
        let mut pre_activations = Vec::with_capacity(self.layers.len());
        activations.push(input.to_vec());
        for (spec, p) in self.layers.iter().zip(&self.params) {
            let x = activations.last().expect("input pushed above");
            let z: Vec<f64> = p
                .weights
                .chunks_exact(spec.in_dim)
                .zip(&p.biases)
                .map(|(row, b)| row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>() + b)
                .collect();
            let a = z.iter().map(|&v| spec.activation.apply(v)).collect();
            pre_activations.push(z);
            activations.push(a);
        }
        Ok(ForwardPass {
            activations,
            pre_activations,
        })
    }

    pub fn is_binary_classifier(&self) -> bool {
        self.layers
            .last()
            .is_some_and(|s| s.out_dim == 1 && s.activation == Activation::Sigmoid)
    }

    /// Gradients of the single-sample BCE loss. With a sigmoid output the
    /// output delta is `p - y`.
    ///
    /// `pass` must come from `self.forward` on the sample being
    /// differentiated; mismatched shapes are rejected, but a pass from a
    /// different input of the right shape silently yields that input's
    /// gradients.
    pub fn backward(&self, pass: &ForwardPass, label: u8) -> Result<Gradients> {
        if !self.is_binary_classifier() {
            return Err(Error::Config(
                "backpropagation needs a single sigmoid output unit".into(),
            ));
        }
        let shapes_ok = pass.activations.len() == self.layers.len() + 1
            && pass.pre_activations.len() == self.layers.len()
            && pass.activations[0].len() == self.input_dim()
            && self
                .layers
                .iter()
                .zip(&pass.pre_activations)
                .all(|(s, z)| z.len() == s.out_dim);
        if !shapes_ok {
            return Err(Error::Shape(
                "forward pass does not match model layout".into(),
            ));
        }
        debug_assert!(pass.activations.iter().flatten().all(|v| v.is_finite()));

        let y = f64::from(label);
        let mut grads: Gradients = self.layers.iter().map(LayerParams::zeros).collect();
        let mut delta = vec![pass.output()[0] - y];
        for k in (0..self.layers.len()).rev() {
            let spec = &self.layers[k];
            let x = &pass.activations[k];
            let g = &mut grads[k];
            for (o, d) in delta.iter().enumerate() {
                g.biases[o] = *d;
                for (gw, xi) in g.weights[o * spec.in_dim..(o + 1) * spec.in_dim]
                    .iter_mut()
                    .zip(x)
                {
                    *gw = d * xi;
                }
            }
            if k == 0 {
                break;
            }
            let prev = &self.layers[k - 1];
            let w = &self.params[k].weights;
            delta = (0..spec.in_dim)
                .map(|i| {
                    let back: f64 = delta
                        .iter()
                        .enumerate()
                        .map(|(o, d)| d * w[o * spec.in_dim + i])
                        .sum();
                    back * prev
                        .activation
                        .derivative(pass.pre_activations[k - 1][i], pass.activations[k][i])
                })
                .collect();
        }
        Ok(grads)
    }

    /// Mean BCE loss and mean gradients over a batch.
    pub fn batch_gradients(&self, inputs: &[&[f64]], labels: &[u8]) -> Result<(f64, Gradients)> {
        if inputs.len() != labels.len() || inputs.is_empty() {
            return Err(Error::Shape(format!(
                "batch has {} inputs and {} labels",
                inputs.len(),
                labels.len()
            )));
        }
        let mut total: Gradients = self.layers.iter().map(LayerParams::zeros).collect();
        let mut loss = 0.0;
        for (x, &y) in inputs.iter().zip(labels) {
            let pass = self.forward(x)?;
            loss += bce_loss(pass.prediction(), y);
            for (t, g) in total.iter_mut().zip(self.backward(&pass, y)?) {
                for (a, b) in t.iter_mut().zip(g.iter()) {
                    *a += b;
                }
            }
        }
        let scale = 1.0 / inputs.len() as f64;
        for t in &mut total {
            for a in t.iter_mut() {
                *a *= scale;
            }
        }
        Ok((loss * scale, total))
    }

    /// One bias-corrected Adam update; increments `step`.
    pub fn adam_step(&mut self, grads: &Gradients, config: &AdamConfig) -> Result<()> {
        let shapes_ok = grads.len() == self.params.len()
            && grads.iter().zip(&self.params).all(|(g, p)| {
                g.weights.len() == p.weights.len() && g.biases.len() == p.biases.len()
            });
        if !shapes_ok {
            return Err(Error::Shape("gradient layout does not match model".into()));
        }
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - config.beta1.powi(t);
        let bc2 = 1.0 - config.beta2.powi(t);
        for (((p, g), m), v) in self
            .params
            .iter_mut()
            .zip(grads)
            .zip(&mut self.adam_m)
            .zip(&mut self.adam_v)
        {
            for (((theta, &g), m), v) in p
                .iter_mut()
                .zip(g.iter())
                .zip(m.iter_mut())
                .zip(v.iter_mut())
            {
                *m = config.beta1 * *m + (1.0 - config.beta1) * g;
                *v = config.beta2 * *v + (1.0 - config.beta2) * g * g;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                *theta -= config.learning_rate * m_hat / (v_hat.sqrt() + config.epsilon);
            }
        }
        Ok(())
    }

    /// Clamped sigmoid outputs for every input.
    pub fn predict_batch<I: AsRef<[f64]>>(&self, inputs: &[I]) -> Result<Vec<f64>> {
        inputs
            .iter()
            .map(|x| self.forward(x.as_ref()).map(|p| p.prediction()))
            .collect()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = self.to_bytes();
        let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&bytes).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes, path)
    }

    /// Checkpoint layout, all integers and floats little-endian:
    /// `"QNVM"`, version u32, layer count u32, then per layer `in_dim u32,
    /// out_dim u32, activation u32`, then step u64, then parameters, first
    /// Adam moments and second Adam moments, each as f64 in layer order
    /// with weights row-major before biases.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + 24 * self.parameter_count());
        out.extend_from_slice(CHECKPOINT_MAGIC);
        out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.layers.len() as u32).to_le_bytes());
        for s in &self.layers {
            out.extend_from_slice(&(s.in_dim as u32).to_le_bytes());
            out.extend_from_slice(&(s.out_dim as u32).to_le_bytes());
            out.extend_from_slice(&s.activation.code().to_le_bytes());
        }
        out.extend_from_slice(&self.step.to_le_bytes());
        for block in [&self.params, &self.adam_m, &self.adam_v] {
            for p in block {
                for v in p.iter() {
                    out.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
        out
    }

    pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<Self> {
        let mut r = ByteReader::new(bytes, path);
        if r.take(4)? != CHECKPOINT_MAGIC {
            return Err(Error::format_at_byte(path, 0, "missing QNVM magic"));
        }
        let version = r.u32()?;
        if version != CHECKPOINT_VERSION {
            return Err(Error::format_at_byte(
                path,
                4,
                format!("unsupported checkpoint version {version}"),
            ));
        }
        let n_layers = r.u32()? as usize;
        let mut layers = Vec::with_capacity(n_layers.min(1024));
        for _ in 0..n_layers {
            let in_dim = r.u32()? as usize;
            let out_dim = r.u32()? as usize;
            let at = r.pos;
            let code = r.u32()?;
            let activation = Activation::from_code(code).ok_or_else(|| {
                Error::format_at_byte(path, at, format!("unknown activation code {code}"))
            })?;
            layers.push(LayerSpec::new(in_dim, out_dim, activation));
        }
        check_chain(&layers)?;
        let step = r.u64()?;
        let read_block = |r: &mut ByteReader| -> Result<Vec<LayerParams>> {
            layers
                .iter()
                .map(|s| {
                    let mut p = LayerParams::zeros(s);
                    for v in p.iter_mut() {
                        *v = r.f64()?;
                    }
                    Ok(p)
                })
                .collect()
        };
        let params = read_block(&mut r)?;
        let adam_m = read_block(&mut r)?;
        let adam_v = read_block(&mut r)?;
        if r.pos != bytes.len() {
            return Err(Error::format_at_byte(
                path,
                r.pos,
                format!("{} trailing bytes", bytes.len() - r.pos),
            ));
        }
        Ok(Self {
            layers,
            params,
            adam_m,
            adam_v,
            step,
        })
    }
}

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"QNVM";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Binary cross-entropy of one prediction; `p` is clamped first.
pub fn bce_loss(p: f64, label: u8) -> f64 {
    let p = clamp_prediction(p);
    if label == 1 {
        -p.ln()
    } else {
        -(1.0 - p).ln()
    }
}

pub fn mean_bce_loss(predictions: &[f64], labels: &[u8]) -> f64 {
    if predictions.is_empty() {
        return 0.0;
    }
    predictions
        .iter()
        .zip(labels)
        .map(|(&p, &y)| bce_loss(p, y))
        .sum::<f64>()
        / predictions.len() as f64
}

#[cfg(test)]
mod tests {
    use std::f64::consts::LN_2;

    use super::*;

    fn single_unit(w: f64, b: f64, activation: Activation) -> DenseModel {
        let mut m = DenseModel::init(&[LayerSpec::new(1, 1, activation)], 0).unwrap();
        m.params[0].weights[0] = w;
        m.params[0].biases[0] = b;
        m
    }

    #[test]
    fn baseline_parameter_count() {
        let m = DenseModel::init(&classifier_head(784, 128), 1).unwrap();
        assert_eq!(m.parameter_count(), 100_609);
        assert!(m.params.iter().all(|p| p.biases.iter().all(|&b| b == 0.0)));
        assert_eq!(m.step, 0);
        assert_eq!(m, DenseModel::init(&classifier_head(784, 128), 1).unwrap());
    }

    #[test]
    fn glorot_limits_respected() {
        let m = DenseModel::init(&classifier_head(784, 128), 9).unwrap();
        let limit = (6.0f64 / (784.0 + 128.0)).sqrt();
        assert!(m.params[0].weights.iter().all(|w| w.abs() <= limit));
    }

    #[test]
    fn init_rejects_broken_chain() {
        let specs = [
            LayerSpec::new(4, 3, Activation::ReLU),
            LayerSpec::new(2, 1, Activation::Sigmoid),
        ];
        assert!(matches!(DenseModel::init(&specs, 0), Err(Error::Config(_))));
    }

    #[test]
    fn forward_examples() {
        let mut m = DenseModel::init(&classifier_head(3, 2), 0).unwrap();
        for p in &mut m.params {
            p.weights.fill(0.0);
        }
        assert_eq!(m.forward(&[0.3, -1.0, 2.0]).unwrap().prediction(), 0.5);

        let m = single_unit(2.0, 1.0, Activation::Identity);
        assert_eq!(m.forward(&[3.0]).unwrap().pre_activations[0][0], 7.0);

        let m = single_unit(1.0, -5.0, Activation::ReLU);
        assert_eq!(m.forward(&[3.0]).unwrap().output(), &[0.0]);

        assert!(matches!(m.forward(&[1.0, 2.0]), Err(Error::Shape(_))));
    }

    #[test]
    fn bce_examples() {
        assert!((bce_loss(0.5, 1) - LN_2).abs() < 1e-15);
        assert!((bce_loss(1.0 - 1e-7, 1) - 1e-7).abs() < 1e-12);
        assert!((mean_bce_loss(&[0.5, 0.5], &[1, 0]) - LN_2).abs() < 1e-15);
        assert!(bce_loss(0.0, 1).is_finite());
        assert!(bce_loss(1.0, 0).is_finite());
    }

    #[test]
    fn backward_examples() {
        let m = single_unit(0.0, 0.0, Activation::Sigmoid);
        let g = m.backward(&m.forward(&[1.0]).unwrap(), 1).unwrap();
        assert_eq!(g[0].weights[0], -0.5);
        assert_eq!(g[0].biases[0], -0.5);

        // p == y exactly: choose a pass whose output equals the label.
        let mut pass = m.forward(&[1.0]).unwrap();
        pass.activations[1][0] = 1.0;
        let g = m.backward(&pass, 1).unwrap();
        assert!(g.iter().all(|p| p.iter().all(|&v| v == 0.0)));
    }

    #[test]
    fn backward_rejects_non_classifier_and_stale_pass() {
        let m = single_unit(1.0, 0.0, Activation::Identity);
        let pass = m.forward(&[1.0]).unwrap();
        assert!(matches!(m.backward(&pass, 1), Err(Error::Config(_))));

        let a = DenseModel::init(&classifier_head(4, 3), 0).unwrap();
        let b = DenseModel::init(&classifier_head(5, 3), 0).unwrap();
        let pass = b.forward(&[0.0; 5]).unwrap();
        assert!(matches!(a.backward(&pass, 1), Err(Error::Shape(_))));
    }

    #[test]
    fn adam_examples() {
        let cfg = AdamConfig::default();
        let mut m = single_unit(0.0, 0.0, Activation::Sigmoid);
        let before = m.params.clone();
        let zero = vec![LayerParams {
            weights: vec![0.0],
            biases: vec![0.0],
        }];
        m.adam_step(&zero, &cfg).unwrap();
        assert_eq!(m.params, before);
        assert_eq!(m.step, 1);

        let mut m = single_unit(0.0, 0.0, Activation::Sigmoid);
        let g = vec![LayerParams {
            weights: vec![1.0],
            biases: vec![-1.0],
        }];
        m.adam_step(&g, &cfg).unwrap();
        let expected = 0.001 * (1.0 / (1.0 + 1e-8));
        assert!((m.params[0].weights[0] + expected).abs() < 1e-18);
        assert!((m.params[0].biases[0] - expected).abs() < 1e-18);

        let bad = vec![LayerParams {
            weights: vec![1.0, 2.0],
            biases: vec![0.0],
        }];
        assert!(matches!(m.adam_step(&bad, &cfg), Err(Error::Shape(_))));
    }

    #[test]
    fn prediction_threshold() {
        assert_eq!(classify(0.7), 1);
        assert_eq!(classify(0.5), 1);
        assert_eq!(classify(0.4999), 0);
        let m = DenseModel::init(&classifier_head(2, 2), 0).unwrap();
        assert!(m.predict_batch::<Vec<f64>>(&[]).unwrap().is_empty());
    }

    #[test]
    fn single_sample_loss_drops() {
        let mut m = DenseModel::init(&classifier_head(784, 128), 3).unwrap();
        let mut rng = SeededRng::new(4);
        let x: Vec<f64> = (0..784).map(|_| rng.next_f64()).collect();
        let cfg = AdamConfig::default();
        let mut loss = f64::INFINITY;
        let mut steps = 0;
        for _ in 0..500 {
            let (l, g) = m.batch_gradients(&[&x], &[1]).unwrap();
            loss = l;
            if loss < 1e-3 {
                break;
            }
            m.adam_step(&g, &cfg).unwrap();
            steps += 1;
        }
        assert!(loss < 1e-3, "loss {loss} after {steps} steps");
    }

    #[test]
    fn checkpoint_round_trip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.qnvm");
        let mut m = DenseModel::init(&classifier_head(6, 4), 5).unwrap();
        let x = [0.1, 0.2, 0.3, 0.4, 0.5, 0.6];
        let (_, g) = m.batch_gradients(&[&x], &[0]).unwrap();
        m.adam_step(&g, &AdamConfig::default()).unwrap();
        m.save(&path).unwrap();
        let back = DenseModel::load(&path).unwrap();
        assert_eq!(back, m);

        let bytes = std::fs::read(&path).unwrap();
        let err = DenseModel::from_bytes(&bytes[..bytes.len() - 3], &path).unwrap_err();
        assert!(matches!(err, Error::Format { .. }));
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(DenseModel::from_bytes(&bad, &path).is_err());
    }
}
