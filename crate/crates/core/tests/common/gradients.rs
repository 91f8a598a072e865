use telemetry_anomaly::nn::{
    conv1d, depthwise_conv1d, ActivationFn, Head, LayerSpec, Loss, Model, ModelSpec, Tensor,
};
use telemetry_anomaly::rng::{seeded, uniform, Generator};

pub const H: f64 = 1e-5;
pub const TOLERANCE: f64 = 1e-4;
pub const SEEDS: [u64; 5] = [1, 2, 3, 4, 5];
pub const BATCH: usize = 3;

pub fn symmetric(g: &mut Generator) -> f64 {
    2.0 * uniform(g) - 1.0
}

pub fn random_tensor(shape: Vec<usize>, g: &mut Generator) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape, (0..n).map(|_| symmetric(g)).collect()).unwrap()
}

/// Model with every parameter, biases included, drawn from U(-1, 1).
pub fn random_model(spec: ModelSpec, g: &mut Generator) -> Model {
    let params = spec
        .layers
        .iter()
        .map(|l| {
            l.param_shapes()
                .into_iter()
                .map(|(_, shape, _)| random_tensor(shape, g))
                .collect()
        })
        .collect();
    Model::from_params(spec, params).unwrap()
}

pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let diff = a
        .iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt();
    let scale =
        a.iter().map(|x| x * x).sum::<f64>().sqrt() + b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if scale < 1e-12 {
        diff
    } else {
        diff / scale
    }
}

/// Worst per-tensor relative error between analytic and numeric gradients.
pub fn max_gradient_error(spec: ModelSpec, loss: Loss, seed: u64) -> f64 {
    let mut g = seeded(seed);
    let mut model = random_model(spec.clone(), &mut g);
    let mut in_shape = vec![BATCH];
    in_shape.extend(&spec.input_shape);
    let x = random_tensor(in_shape, &mut g);
    let k = spec.head.n_outputs();
    let y = match loss {
        Loss::Mse => random_tensor(vec![BATCH, k], &mut g),
        Loss::WeightedBce => Tensor::new(vec![BATCH, 1], vec![1.0, 0.0, 1.0]).unwrap(),
    };
    let weights: Vec<f64> = (0..BATCH).map(|i| 0.5 + i as f64).collect();
    model.backward(&x, &y, loss, &weights).unwrap();

    let mut worst: f64 = 0.0;
    for li in 0..model.params().len() {
        for ti in 0..model.params()[li].len() {
            let analytic = model.params()[li][ti].grad().unwrap().to_vec();
            let mut numeric = vec![0.0; analytic.len()];
            for (j, slot) in numeric.iter_mut().enumerate() {
                let orig = model.params()[li][ti].data()[j];
                model.params_mut()[li][ti].data_mut()[j] = orig + H;
                let up = model.loss(&x, &y, loss, &weights).unwrap();
                model.params_mut()[li][ti].data_mut()[j] = orig - H;
                let down = model.loss(&x, &y, loss, &weights).unwrap();
                model.params_mut()[li][ti].data_mut()[j] = orig;
                *slot = (up - down) / (2.0 * H);
            }
            worst = worst.max(relative_error(&analytic, &numeric));
        }
    }
    worst
}

pub fn regression(input_shape: Vec<usize>, layers: Vec<LayerSpec>, n_outputs: usize) -> ModelSpec {
    ModelSpec {
        input_shape,
        layers,
        head: Head::Regression { n_outputs },
    }
}

pub fn dense(inputs: usize, outputs: usize) -> LayerSpec {
    LayerSpec::Dense { inputs, outputs }
}

pub fn act(function: ActivationFn) -> LayerSpec {
    LayerSpec::Activation { function }
}

/// One small model per layer kind, each ending in a regression head.
pub fn cases() -> Vec<(&'static str, ModelSpec)> {
    let conv1d = |cin, cout, k, s, p| LayerSpec::Conv1d {
        in_channels: cin,
        out_channels: cout,
        kernel_size: k,
        stride: s,
        padding: p,
    };
    vec![
        ("dense", regression(vec![4], vec![dense(4, 3)], 3)),
        (
            "conv1d",
            regression(
                vec![10, 2],
                vec![conv1d(2, 3, 3, 2, 1), LayerSpec::Flatten, dense(15, 2)],
                2,
            ),
        ),
        (
            "depthwise_separable_conv1d",
            regression(
                vec![9, 3],
                vec![
                    LayerSpec::DepthwiseSeparableConv1d {
                        in_channels: 3,
                        out_channels: 4,
                        kernel_size: 4,
                        stride: 2,
                        padding: 2,
                    },
                    LayerSpec::Flatten,
                    dense(20, 2),
                ],
                2,
            ),
        ),
        (
            "conv2d",
            regression(
                vec![6, 5, 2],
                vec![
                    LayerSpec::Conv2d {
                        in_channels: 2,
                        out_channels: 3,
                        kernel_size: 3,
                        stride: 2,
                        padding: 1,
                    },
                    LayerSpec::Flatten,
                    dense(27, 2),
                ],
                2,
            ),
        ),
        (
            "maxpool1d",
            regression(
                vec![10, 2],
                vec![
                    conv1d(2, 2, 2, 1, 0),
                    LayerSpec::Maxpool1d {
                        kernel_size: 3,
                        stride: 2,
                    },
                    LayerSpec::Flatten,
                    dense(8, 1),
                ],
                1,
            ),
        ),
        (
            "global_avg_pool",
            regression(
                vec![8, 2],
                vec![conv1d(2, 3, 3, 1, 1), LayerSpec::GlobalAvgPool, dense(3, 1)],
                1,
            ),
        ),
        (
            "global_avg_pool_2d",
            regression(
                vec![5, 4, 2],
                vec![
                    LayerSpec::Conv2d {
                        in_channels: 2,
                        out_channels: 3,
                        kernel_size: 2,
                        stride: 1,
                        padding: 0,
                    },
                    LayerSpec::GlobalAvgPool,
                    dense(3, 2),
                ],
                2,
            ),
        ),
        (
            "relu",
            regression(
                vec![4],
                vec![dense(4, 6), act(ActivationFn::Relu), dense(6, 2)],
                2,
            ),
        ),
        (
            "sigmoid",
            regression(
                vec![4],
                vec![dense(4, 6), act(ActivationFn::Sigmoid), dense(6, 2)],
                2,
            ),
        ),
        (
            "tanh",
            regression(
                vec![4],
                vec![dense(4, 6), act(ActivationFn::Tanh), dense(6, 2)],
                2,
            ),
        ),
    ]
}

/// Binary-classifier head trained with weighted cross-entropy.
pub fn bce_case() -> ModelSpec {
    ModelSpec {
        input_shape: vec![6, 2],
        layers: vec![
            LayerSpec::DepthwiseSeparableConv1d {
                in_channels: 2,
                out_channels: 3,
                kernel_size: 3,
                stride: 1,
                padding: 1,
            },
            act(ActivationFn::Tanh),
            LayerSpec::GlobalAvgPool,
            dense(3, 1),
        ],
        head: Head::BinaryClassifier,
    }
}

/// Largest gap between the fused separable layer and an explicit depthwise
/// pass followed by a 1x1 convolution.
pub fn separable_deviation(seed: u64) -> f64 {
    let (len, cin, cout, k, s, p) = (11, 3, 5, 4, 2, 2);
    let spec = ModelSpec {
        input_shape: vec![len, cin],
        layers: vec![
            LayerSpec::DepthwiseSeparableConv1d {
                in_channels: cin,
                out_channels: cout,
                kernel_size: k,
                stride: s,
                padding: p,
            },
            LayerSpec::Flatten,
        ],
        head: Head::Regression {
            n_outputs: 6 * cout,
        },
    };
    let mut g = seeded(seed);
    let model = random_model(spec, &mut g);
    let x = random_tensor(vec![BATCH, len, cin], &mut g);
    let fused = model.forward(&x).unwrap();

    let params = &model.params()[0];
    let (dw, pw, bias) = (params[0].data(), params[1].data(), params[2].data());
    let len_out = (len + 2 * p - k) / s + 1;
    let z = depthwise_conv1d(x.data(), BATCH, len, cin, dw, k, s, p, len_out);
    let composed = conv1d(&z, BATCH, len_out, cin, pw, bias, cout, 1, 1, 0, len_out);
    assert_eq!(fused.len(), composed.len());
    fused
        .data()
        .iter()
        .zip(&composed)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max)
}
