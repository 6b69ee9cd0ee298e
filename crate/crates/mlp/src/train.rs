//! Full-batch MSE training with Adam.
//!
//! Boundary datasets in the workflows are a few hundred points, so there is
//! no minibatching; every epoch sees the whole batch, which keeps repeated
//! runs bit-identical. `train_step` warm-starts from the current weights and
//! stops at the target MSE or the epoch budget.

use simorch_linalg::Matrix;

use crate::{MlpError, MlpModel};

#[derive(Debug, Clone)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub max_epochs: usize,
    pub target_mse: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            max_epochs: 2000,
            target_mse: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    /// Epochs actually run (may be zero when the model already meets the
    /// target).
    pub epochs: usize,
    /// MSE before training followed by the MSE after each epoch.
    pub loss_history: Vec<f64>,
}

impl TrainReport {
    pub fn final_mse(&self) -> f64 {
        *self.loss_history.last().unwrap()
    }
}

/// Gradient of the mean-squared error for one layer.
#[derive(Debug, Clone)]
pub struct LayerGrads {
    pub weights: Matrix,
    pub bias: Vec<f64>,
}

/// MSE over all entries plus per-layer gradients.
pub fn gradients(
    model: &MlpModel,
    x: &Matrix,
    y: &Matrix,
) -> Result<(f64, Vec<LayerGrads>), MlpError> {
    let outputs = model.forward_trace(x)?;
    let pred = outputs.last().unwrap();
    if pred.rows() != y.rows() || pred.cols() != y.cols() {
        return Err(MlpError::ShapeMismatch(format!(
            "targets {}x{} do not match predictions {}x{}",
            y.rows(),
            y.cols(),
            pred.rows(),
            pred.cols()
        )));
    }

    let n_entries = (y.rows() * y.cols()) as f64;
    let mut loss = 0.0;
    // dL/da for the output layer, L = mean((pred - y)^2).
    let mut delta = Matrix::zeros(y.rows(), y.cols());
    for i in 0..y.rows() {
        for j in 0..y.cols() {
            let diff = pred[(i, j)] - y[(i, j)];
            loss += diff * diff;
            delta[(i, j)] = 2.0 * diff / n_entries;
        }
    }
    loss /= n_entries;

    let mut grads: Vec<LayerGrads> = Vec::with_capacity(model.layers().len());
    for (l, layer) in model.layers().iter().enumerate().rev() {
        let a = &outputs[l]; // activation output of this layer
        let input: &Matrix = if l == 0 { x } else { &outputs[l - 1] };

        // dz = da ⊙ act'(z), with the derivative expressed via the output.
        let mut dz = delta;
        for i in 0..dz.rows() {
            for j in 0..dz.cols() {
                dz[(i, j)] *= layer.activation.derivative_from_output(a[(i, j)]);
            }
        }

        // dW = dz^T input, db = column sums of dz.
        let dw = dz.transpose().matmul(input).expect("grad shapes chain");
        let mut db = vec![0.0; layer.output_dim()];
        for i in 0..dz.rows() {
            for (j, b) in db.iter_mut().enumerate() {
                *b += dz[(i, j)];
            }
        }
        grads.push(LayerGrads {
            weights: dw,
            bias: db,
        });

        // Propagate to the previous layer.
        delta = dz.matmul(&layer.weights).expect("grad shapes chain");
    }
    grads.reverse();
    Ok((loss, grads))
}

struct AdamState {
    m_w: Vec<Matrix>,
    v_w: Vec<Matrix>,
    m_b: Vec<Vec<f64>>,
    v_b: Vec<Vec<f64>>,
    step: usize,
}

impl AdamState {
    fn new(model: &MlpModel) -> Self {
        let m_w = model
            .layers()
            .iter()
            .map(|l| Matrix::zeros(l.output_dim(), l.input_dim()))
            .collect::<Vec<_>>();
        let m_b = model
            .layers()
            .iter()
            .map(|l| vec![0.0; l.output_dim()])
            .collect::<Vec<_>>();
        Self {
            v_w: m_w.clone(),
            m_w,
            v_b: m_b.clone(),
            m_b,
            step: 0,
        }
    }
}

/// Run full-batch Adam until `target_mse` or `max_epochs`. Frozen layers are
/// left untouched.
pub fn train_step(
    model: &mut MlpModel,
    x: &Matrix,
    y: &Matrix,
    config: &TrainConfig,
) -> Result<TrainReport, MlpError> {
    if x.rows() != y.rows() || x.rows() == 0 {
        return Err(MlpError::ShapeMismatch(format!(
            "{} inputs vs {} targets",
            x.rows(),
            y.rows()
        )));
    }
    if config.max_epochs == 0 {
        return Err(MlpError::InvalidModel("max_epochs must be >= 1".into()));
    }

    let mut adam = AdamState::new(model);
    let mut history = Vec::new();

    let (initial, _) = gradients(model, x, y)?;
    history.push(initial);
    if initial <= config.target_mse {
        return Ok(TrainReport {
            epochs: 0,
            loss_history: history,
        });
    }

    for epoch in 1..=config.max_epochs {
        let (loss, grads) = gradients(model, x, y)?;
        if !loss.is_finite() {
            return Err(MlpError::NonFiniteLoss { epoch });
        }

        adam.step += 1;
        let t = adam.step as i32;
        let bc1 = 1.0 - config.beta1.powi(t);
        let bc2 = 1.0 - config.beta2.powi(t);

        for (l, layer) in model.layers_mut().iter_mut().enumerate() {
            if layer.frozen {
                continue;
            }
            let g = &grads[l];
            let mw = &mut adam.m_w[l];
            let vw = &mut adam.v_w[l];
            for (i, (m, v)) in mw
                .data_mut()
                .iter_mut()
                .zip(vw.data_mut().iter_mut())
                .enumerate()
            {
                let grad = g.weights.data()[i];
                *m = config.beta1 * *m + (1.0 - config.beta1) * grad;
                *v = config.beta2 * *v + (1.0 - config.beta2) * grad * grad;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                layer.weights.data_mut()[i] -=
                    config.learning_rate * m_hat / (v_hat.sqrt() + config.epsilon);
            }
            for (i, (m, v)) in adam.m_b[l].iter_mut().zip(adam.v_b[l].iter_mut()).enumerate() {
                let grad = g.bias[i];
                *m = config.beta1 * *m + (1.0 - config.beta1) * grad;
                *v = config.beta2 * *v + (1.0 - config.beta2) * grad * grad;
                let m_hat = *m / bc1;
                let v_hat = *v / bc2;
                layer.bias[i] -= config.learning_rate * m_hat / (v_hat.sqrt() + config.epsilon);
            }
        }

        let (post, _) = gradients(model, x, y)?;
        history.push(post);
        if post <= config.target_mse {
            return Ok(TrainReport {
                epochs: epoch,
                loss_history: history,
            });
        }
    }

    Ok(TrainReport {
        epochs: config.max_epochs,
        loss_history: history,
    })
}

/// Current loss of a model on a batch without touching the weights.
pub fn mse(model: &MlpModel, x: &Matrix, y: &Matrix) -> Result<f64, MlpError> {
    Ok(gradients(model, x, y)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{Activation, Layer};

    fn affine_net(seed: u64) -> MlpModel {
        MlpModel::random(&[2, 3, 2], Activation::Identity, seed).unwrap()
    }

    #[test]
    fn zero_target_zero_output_layer_is_converged() {
        let l1 = Layer::new(Matrix::identity(2), vec![0.0; 2], Activation::Tanh).unwrap();
        let l2 = Layer::new(Matrix::zeros(1, 2), vec![0.0], Activation::Identity).unwrap();
        let mut model = MlpModel::new(vec![l1, l2]).unwrap();
        let x = Matrix::new(3, 2, vec![1.0, 2.0, -1.0, 0.5, 0.0, 0.0]).unwrap();
        let y = Matrix::zeros(3, 1);
        let report = train_step(&mut model, &x, &y, &TrainConfig::default()).unwrap();
        assert_eq!(report.epochs, 0);
        assert_eq!(report.final_mse(), 0.0);
    }

    #[test]
    fn fits_linear_map_to_least_squares_floor() {
        // y = A x + c is exactly representable by a pure-affine net, so the
        // least-squares optimum is zero MSE.
        let mut model = affine_net(3);
        let a = [[0.5, -1.0], [2.0, 0.25]];
        let c = [0.1, -0.3];
        let mut xs = Vec::new();
        let mut ys = Vec::new();
        for i in 0..4 {
            for j in 0..4 {
                let p = [i as f64 / 3.0 - 0.5, j as f64 / 3.0 - 0.5];
                xs.extend_from_slice(&p);
                ys.push(a[0][0] * p[0] + a[0][1] * p[1] + c[0]);
                ys.push(a[1][0] * p[0] + a[1][1] * p[1] + c[1]);
            }
        }
        let x = Matrix::new(16, 2, xs).unwrap();
        let y = Matrix::new(16, 2, ys).unwrap();
        let config = TrainConfig {
            learning_rate: 0.01,
            max_epochs: 30000,
            target_mse: 1e-12,
            ..TrainConfig::default()
        };
        let report = train_step(&mut model, &x, &y, &config).unwrap();
        assert!(
            report.final_mse() <= 1e-10,
            "final mse {}",
            report.final_mse()
        );
    }

    #[test]
    fn training_is_deterministic() {
        let x = Matrix::new(4, 2, vec![0.1, 0.2, -0.3, 0.4, 0.5, -0.6, 0.7, 0.8]).unwrap();
        let y = Matrix::new(4, 2, vec![1.0, 0.0, 0.0, 1.0, 0.5, 0.5, -0.5, 0.25]).unwrap();
        let config = TrainConfig {
            max_epochs: 50,
            target_mse: 0.0,
            ..TrainConfig::default()
        };
        let mut m1 = MlpModel::random(&[2, 4, 2], Activation::Tanh, 9).unwrap();
        let mut m2 = MlpModel::random(&[2, 4, 2], Activation::Tanh, 9).unwrap();
        train_step(&mut m1, &x, &y, &config).unwrap();
        train_step(&mut m2, &x, &y, &config).unwrap();
        assert_eq!(m1, m2);
    }

    #[test]
    fn convex_loss_decreases_over_windows() {
        let mut model = affine_net(17);
        let x = Matrix::from_fn(8, 2, |i, j| (i * 2 + j) as f64 / 10.0 - 0.6);
        let y = Matrix::from_fn(8, 2, |i, j| x[(i, j)] * 1.5 - 0.2);
        let config = TrainConfig {
            max_epochs: 400,
            target_mse: 0.0,
            ..TrainConfig::default()
        };
        let report = train_step(&mut model, &x, &y, &config).unwrap();
        let h = &report.loss_history;
        for i in 0..h.len().saturating_sub(50) {
            assert!(
                h[i + 50] <= h[i] + 1e-15,
                "loss rose over window at {i}: {} -> {}",
                h[i],
                h[i + 50]
            );
        }
    }

    #[test]
    fn frozen_layers_do_not_move() {
        let mut model = MlpModel::random(&[2, 3, 1], Activation::Tanh, 5)
            .unwrap()
            .with_input_normalization(&[2.0, 2.0], &[-1.0, -1.0])
            .unwrap();
        let before = model.layers()[0].clone();
        let x = Matrix::new(3, 2, vec![0.1, 0.9, 0.4, 0.2, 0.7, 0.6]).unwrap();
        let y = Matrix::new(3, 1, vec![0.3, -0.1, 0.2]).unwrap();
        let config = TrainConfig {
            max_epochs: 20,
            target_mse: 0.0,
            ..TrainConfig::default()
        };
        train_step(&mut model, &x, &y, &config).unwrap();
        assert_eq!(model.layers()[0], before);
    }
}
