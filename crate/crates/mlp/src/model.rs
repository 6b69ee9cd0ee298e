use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use simorch_linalg::Matrix;

use crate::MlpError;

/// Per-layer nonlinearity. The discriminants are the codec bytes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Activation {
    Identity = 0,
    Tanh = 1,
    Relu = 2,
}

impl Activation {
    pub fn from_byte(b: u8) -> Option<Self> {
        match b {
            0 => Some(Activation::Identity),
            1 => Some(Activation::Tanh),
            2 => Some(Activation::Relu),
            _ => None,
        }
    }

    pub fn apply(&self, z: f64) -> f64 {
        match self {
            Activation::Identity => z,
            Activation::Tanh => z.tanh(),
            Activation::Relu => z.max(0.0),
        }
    }

    /// Derivative expressed through the activation output.
    pub fn derivative_from_output(&self, a: f64) -> f64 {
        match self {
            Activation::Identity => 1.0,
            Activation::Tanh => 1.0 - a * a,
            Activation::Relu => {
                if a > 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
        }
    }
}

/// One affine layer `a = act(x W^T + b)` with `W` stored `[out, in]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: Matrix,
    pub bias: Vec<f64>,
    pub activation: Activation,
    /// Frozen layers are skipped by the optimizer. Used for the baked input
    /// normalization layer; not part of the serialized format.
    pub frozen: bool,
}

impl Layer {
    pub fn new(weights: Matrix, bias: Vec<f64>, activation: Activation) -> Result<Self, MlpError> {
        if bias.len() != weights.rows() {
            return Err(MlpError::InvalidModel(format!(
                "bias length {} does not match {} outputs",
                bias.len(),
                weights.rows()
            )));
        }
        Ok(Self {
            weights,
            bias,
            activation,
            frozen: false,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.weights.cols()
    }

    pub fn output_dim(&self) -> usize {
        self.weights.rows()
    }
}

/// Feed-forward network: a non-empty stack of chained layers ending in an
/// identity activation (regression output).
#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    layers: Vec<Layer>,
}

impl MlpModel {
    pub fn new(layers: Vec<Layer>) -> Result<Self, MlpError> {
        if layers.is_empty() {
            return Err(MlpError::InvalidModel("model has no layers".into()));
        }
        for pair in layers.windows(2) {
            if pair[0].output_dim() != pair[1].input_dim() {
                return Err(MlpError::InvalidModel(format!(
                    "layer output {} does not chain into input {}",
                    pair[0].output_dim(),
                    pair[1].input_dim()
                )));
            }
        }
        if layers.last().unwrap().activation != Activation::Identity {
            return Err(MlpError::InvalidModel(
                "final activation must be identity".into(),
            ));
        }
        Ok(Self { layers })
    }

    /// Random network over `dims = [in, hidden.., out]` with the given hidden
    /// activation. Glorot-uniform weights, zero biases, seeded.
    pub fn random(dims: &[usize], hidden: Activation, seed: u64) -> Result<Self, MlpError> {
        if dims.len() < 2 {
            return Err(MlpError::InvalidModel(
                "need at least input and output dims".into(),
            ));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::new();
        for (l, pair) in dims.windows(2).enumerate() {
            let (n_in, n_out) = (pair[0], pair[1]);
            let last = l + 2 == dims.len();
            let bound = (6.0 / (n_in + n_out) as f64).sqrt();
            let weights = Matrix::from_fn(n_out, n_in, |_, _| rng.gen_range(-bound..bound));
            let activation = if last { Activation::Identity } else { hidden };
            layers.push(Layer::new(weights, vec![0.0; n_out], activation)?);
        }
        Self::new(layers)
    }

    /// Prepend a frozen identity layer computing `scale * x + shift`
    /// elementwise, baking input normalization into the model itself.
    pub fn with_input_normalization(mut self, scale: &[f64], shift: &[f64]) -> Result<Self, MlpError> {
        let dim = self.input_dim();
        if scale.len() != dim || shift.len() != dim {
            return Err(MlpError::InvalidModel(format!(
                "normalization length {} does not match input dim {dim}",
                scale.len()
            )));
        }
        let mut w = Matrix::zeros(dim, dim);
        for i in 0..dim {
            w[(i, i)] = scale[i];
        }
        let mut layer = Layer::new(w, shift.to_vec(), Activation::Identity)?;
        layer.frozen = true;
        self.layers.insert(0, layer);
        Ok(self)
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    pub fn input_dim(&self) -> usize {
        self.layers[0].input_dim()
    }

    pub fn output_dim(&self) -> usize {
        self.layers.last().unwrap().output_dim()
    }

    /// Evaluate the network on a batch `[n, in] -> [n, out]`.
    pub fn forward(&self, x: &Matrix) -> Result<Matrix, MlpError> {
        Ok(self.forward_trace(x)?.pop().unwrap())
    }

    /// Forward pass keeping every layer output; the last entry is the
    /// prediction. Used by backprop.
    pub(crate) fn forward_trace(&self, x: &Matrix) -> Result<Vec<Matrix>, MlpError> {
        if x.cols() != self.input_dim() {
            return Err(MlpError::ShapeMismatch(format!(
                "input width {} does not match model input dim {}",
                x.cols(),
                self.input_dim()
            )));
        }
        let mut outputs: Vec<Matrix> = Vec::with_capacity(self.layers.len());
        let mut current = x;
        for layer in &self.layers {
            let n = current.rows();
            let n_out = layer.output_dim();
            let mut out = Matrix::zeros(n, n_out);
            for i in 0..n {
                let row = current.row(i);
                for o in 0..n_out
                {
                    let wrow = layer.weights.row(o);
                    let z: f64 =
                        wrow.iter().zip(row).map(|(w, v)| w * v).sum::<f64>() + layer.bias[o];
                    out[(i, o)] = layer.activation.apply(z);
                }
            }
            outputs.push(out);
            current = outputs.last().unwrap();
        }
        Ok(outputs)
    }
}
