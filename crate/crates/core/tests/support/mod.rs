//! Reference computations shared by the integration and acceptance tests.
//! Each one is deliberately independent of the code path it checks.

#![allow(dead_code)]

use quanv_core::nn::{bce_loss, DenseModel};

/// Mean-free single-sample loss, recomputed from a fresh forward pass.
pub fn loss_at(model: &DenseModel, x: &[f64], y: u8) -> f64 {
    bce_loss(model.forward(x).unwrap().prediction(), y)
}

fn param_mut(model: &mut DenseModel, layer: usize, index: usize) -> &mut f64 {
    let p = &mut model.params[layer];
    let n_w = p.weights.len();
    if index < n_w {
        &mut p.weights[index]
    } else {
        &mut p.biases[index - n_w]
    }
}

/// Central difference of the loss with respect to parameter `index` of
/// layer `layer` (weights first, then biases). The parameter is restored
/// before returning.
pub fn central_difference(
    model: &mut DenseModel,
    layer: usize,
    index: usize,
    x: &[f64],
    y: u8,
    h: f64,
) -> f64 {
    let original = *param_mut(model, layer, index);
    *param_mut(model, layer, index) = original + h;
    let up = loss_at(model, x, y);
    *param_mut(model, layer, index) = original - h;
    let down = loss_at(model, x, y);
    *param_mut(model, layer, index) = original;
    (up - down) / (2.0 * h)
}

/// `|a - b| / max(|a|, |b|, floor)`.
pub fn relative_error(a: f64, b: f64, floor: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(floor)
}

/// Mann-Whitney statistic over every positive/negative pair, ties count 1/2.
pub fn pairwise_auc(scores: &[f64], labels: &[u8]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &si) in scores.iter().enumerate() {
        for (j, &sj) in scores.iter().enumerate() {
            if labels[i] == 1 && labels[j] == 0 {
                pairs += 1.0;
                if si > sj {
                    wins += 1.0;
                } else if si == sj {
                    wins += 0.5;
                }
            }
        }
    }
    wins / pairs
}
