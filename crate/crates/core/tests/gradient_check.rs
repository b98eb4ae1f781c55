mod support;

use quanv_core::nn::{Activation, DenseModel, LayerSpec};
use quanv_core::rng::SeededRng;
use support::{central_difference, relative_error};

const H: f64 = 1e-5;

fn architectures() -> Vec<Vec<LayerSpec>> {
    vec![
        vec![LayerSpec::new(4, 1, Activation::Sigmoid)],
        vec![
            LayerSpec::new(16, 8, Activation::ReLU),
            LayerSpec::new(8, 1, Activation::Sigmoid),
        ],
        vec![
            LayerSpec::new(784, 128, Activation::ReLU),
            LayerSpec::new(128, 1, Activation::Sigmoid),
        ],
    ]
}

/// Worst relative error over the checked parameters of one random case.
/// Large layers are checked on a seeded sample of parameters.
fn worst_case(specs: &[LayerSpec], seed: u64) -> (f64, usize) {
    let mut model = DenseModel::init(specs, seed).unwrap();
    let mut rng = SeededRng::new(seed ^ 0xABCD);
    let x: Vec<f64> = (0..specs[0].in_dim)
        .map(|_| rng.uniform(-1.0, 1.0))
        .collect();
    let y = (rng.below(2)) as u8;
    let grads = model.backward(&model.forward(&x).unwrap(), y).unwrap();

    let mut worst = 0.0f64;
    let mut checked = 0;
    for (layer, g) in grads.iter().enumerate() {
        let n = g.weights.len() + g.biases.len();
        let picks: Vec<usize> = if n <= 256 {
            (0..n).collect()
        } else {
            (0..256).map(|_| rng.below(n as u64) as usize).collect()
        };
        for i in picks {
            let analytic = if i < g.weights.len() {
                g.weights[i]
            } else {
                g.biases[i - g.weights.len()]
            };
            let numeric = central_difference(&mut model, layer, i, &x, y, H);
            worst = worst.max(relative_error(analytic, numeric, 1e-6));
            checked += 1;
        }
    }
    (worst, checked)
}

#[test]
fn hand_computed_single_unit() {
    let mut m = DenseModel::init(&[LayerSpec::new(1, 1, Activation::Sigmoid)], 0).unwrap();
    m.params[0].weights[0] = 0.0;
    let g = m.backward(&m.forward(&[1.0]).unwrap(), 1).unwrap();
    assert_eq!(g[0].weights[0], -0.5);
    let fd = central_difference(&mut m, 0, 0, &[1.0], 1, H);
    assert!((fd + 0.5).abs() < 1e-9, "{fd}");
}

#[test]
fn analytic_matches_finite_differences() {
    let archs = architectures();
    for case in 0..25u64 {
        let specs = &archs[case as usize % archs.len()];
        let (worst, checked) = worst_case(specs, 100 + case);
        assert!(checked > 0);
        assert!(worst < 1e-5, "case {case}: relative error {worst:e}");
    }
}
