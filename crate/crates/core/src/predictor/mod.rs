//! Learned intention maps for agents that do not communicate: a second
//! fully convolutional network predicts the ramp-path map from the rest of
//! the state.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gridcore::ScalarMap;
use crate::learner::network::{pack, FcnNet, NetworkSpec, Scale};
use crate::learner::nn::Act;
use crate::learner::{sgd_step, TrainConfig};
use crate::perception::StateTensor;
use crate::scalar::Scalar;

/// Probabilities are clipped to `[EPS, 1 - EPS]` before taking logs.
pub const BCE_EPS: f64 = 1e-7;

/// Where the intention slot of the state tensor comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntentionSource {
    Communicated,
    Predicted,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RunMode {
    Train,
    Execute,
}

/// Communicated maps for the first 9/10 of training, predicted maps after
/// that and always at execution time.
pub fn intention_source(step: u64, total: u64, mode: RunMode) -> IntentionSource {
    match mode {
        RunMode::Execute => IntentionSource::Predicted,
        RunMode::Train if step * 10 < total * 9 => IntentionSource::Communicated,
        RunMode::Train => IntentionSource::Predicted,
    }
}

pub fn predictor_spec(scale: Scale, input_channels: usize) -> NetworkSpec {
    NetworkSpec::for_scale(scale, input_channels, 1)
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Predicted intention map in (0, 1).
pub fn predict_intention<T: Scalar>(net: &FcnNet<T>, input: &StateTensor<T>) -> Result<ScalarMap<T>> {
    if net.spec().output_channels != 1 {
        return Err(Error::input("predictor must have one output channel"));
    }
    let logits = net.forward(&[input])?.remove(0);
    Ok(logits.channel(0).map(|z| T::lit(sigmoid(z.as_f64()))))
}

/// Mean per-cell binary cross entropy with soft labels.
pub fn predictor_loss<T: Scalar>(predicted: &ScalarMap<T>, target: &ScalarMap<T>) -> Result<f64> {
    if predicted.width() != target.width() || predicted.height() != target.height() {
        return Err(Error::shape(
            format!("{}x{}", target.width(), target.height()),
            format!("{}x{}", predicted.width(), predicted.height()),
        ));
    }
    let n = predicted.values().len().max(1) as f64;
    let total: f64 = predicted
        .values()
        .iter()
        .zip(target.values())
        .map(|(&p, &t)| {
            let (p, t) = (p.as_f64().clamp(BCE_EPS, 1.0 - BCE_EPS), t.as_f64());
            -(t * p.ln() + (1.0 - t) * (1.0 - p).ln())
        })
        .sum();
    Ok(total / n)
}

/// Training-mode forward and backward of the BCE loss computed from
/// logits; leaves gradients in `net` and returns the loss.
pub fn predictor_loss_and_gradients<T: Scalar>(
    net: &mut FcnNet<T>,
    inputs: &[&StateTensor<T>],
    targets: &[&ScalarMap<T>],
) -> Result<f64> {
    if inputs.len() != targets.len() {
        return Err(Error::input("inputs and targets differ in length"));
    }
    let x = pack(inputs)?;
    net.zero_grad();
    let z = net.train_batch(&x)?;
    let p = z.h * z.w;
    let count = (z.n * p) as f64;
    let mut loss = 0.0;
    let mut dz = Act::zeros(1, z.n, z.h, z.w);
    for (b, t) in targets.iter().enumerate() {
        if t.values().len() != p {
            return Err(Error::shape(format!("{}x{}", z.h, z.w), format!("{}x{}", t.width(), t.height())));
        }
        for (i, &tv) in t.values().iter().enumerate() {
            let (zi, tv) = (z.data[b * p + i].as_f64(), tv.as_f64());
            // softplus(z) - t z, written to stay finite for large |z|.
            loss += zi.max(0.0) - tv * zi + (-zi.abs()).exp().ln_1p();
            dz.data[b * p + i] = T::lit((sigmoid(zi) - tv) / count);
        }
    }
    net.backward(&dz);
    Ok(loss / count)
}

pub fn train_predictor_on_batch<T: Scalar>(
    net: &mut FcnNet<T>,
    inputs: &[&StateTensor<T>],
    targets: &[&ScalarMap<T>],
    cfg: &TrainConfig,
) -> Result<f64> {
    let loss = predictor_loss_and_gradients(net, inputs, targets)?;
    sgd_step(net, cfg);
    Ok(loss)
}
