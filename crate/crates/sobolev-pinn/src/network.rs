//! Fully-connected tanh networks: architecture, initialization, evaluation
//! and input-derivative jets.
//!
//! The network is a scalar field `u(x) = A_L ∘ tanh ∘ A_{L-1} ∘ … ∘ tanh ∘ A_1`
//! with affine layers `A_ℓ` and no activation on the output layer. tanh keeps
//! the field infinitely differentiable, so jets of any tracked order exist at
//! every finite input.

use std::path::Path;
use std::sync::Arc;

use ndarray::{Array1, Array2};
use rand::rngs::SmallRng;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::jet::{DerivRequest, Jet, JetSpec, JetValue};

pub(crate) mod kernel;

/// Layer widths of a fully-connected network: input dimension, hidden widths,
/// and a scalar output.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Architecture {
    widths: Vec<usize>,
}

impl Architecture {
    /// Builds `input → hidden… → 1`.
    pub fn new(input_dim: usize, hidden: &[usize]) -> Result<Architecture> {
        let mut widths = Vec::with_capacity(hidden.len() + 2);
        widths.push(input_dim);
        widths.extend_from_slice(hidden);
        widths.push(1);
        Self::from_widths(widths)
    }

    /// Builds from the full width list (must end in 1 and have a hidden layer).
    pub fn from_widths(widths: Vec<usize>) -> Result<Architecture> {
        if widths.len() < 3 {
            return Err(Error::InvalidArchitecture(
                "need at least one hidden layer".into(),
            ));
        }
        if *widths.last().unwrap() != 1 {
            return Err(Error::InvalidArchitecture("output width must be 1".into()));
        }
        if widths.iter().any(|&w| w == 0) {
            return Err(Error::InvalidArchitecture("zero-width layer".into()));
        }
        Ok(Architecture { widths })
    }

    /// Input dimension.
    pub fn input_dim(&self) -> usize {
        self.widths[0]
    }

    /// All layer widths, input first.
    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    /// Number of affine layers.
    pub fn n_layers(&self) -> usize {
        self.widths.len() - 1
    }

    /// Total number of trainable parameters.
    pub fn n_params(&self) -> usize {
        self.widths
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum()
    }
}

/// One affine layer: `z = W·a + b` with `W` of shape `(out, in)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

/// The trainable state of the network.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpParams {
    arch: Architecture,
    layers: Vec<Layer>,
}

impl MlpParams {
    /// Scaled-uniform initialization: entries i.i.d. on
    /// `[−1/√fan_in, +1/√fan_in)` per layer, reproducible per seed.
    ///
    /// Sampling order is fixed (per layer: weights row-major, then biases), so
    /// identical `(arch, seed)` gives bitwise-identical parameters.
    pub fn init_uniform(arch: &Architecture, seed: u64) -> MlpParams {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut layers = Vec::with_capacity(arch.n_layers());
        for w in arch.widths.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let bound = 1.0 / (fan_in as f64).sqrt();
            let weights = Array2::from_shape_fn((fan_out, fan_in), |_| {
                rng.random_range(-bound..bound)
            });
            let bias = Array1::from_shape_fn(fan_out, |_| rng.random_range(-bound..bound));
            layers.push(Layer { weights, bias });
        }
        MlpParams { arch: arch.clone(), layers }
    }

    /// All-zero parameters (useful in tests).
    pub fn zeros(arch: &Architecture) -> MlpParams {
        let layers = arch
            .widths
            .windows(2)
            .map(|w| Layer {
                weights: Array2::zeros((w[1], w[0])),
                bias: Array1::zeros(w[1]),
            })
            .collect();
        MlpParams { arch: arch.clone(), layers }
    }

    /// The architecture.
    pub fn arch(&self) -> &Architecture {
        &self.arch
    }

    /// The affine layers, input side first.
    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    /// Mutable layer access (used by tests to construct specific networks).
    pub fn layers_mut(&mut self) -> &mut [Layer] {
        &mut self.layers
    }

    /// Total number of parameters.
    pub fn n_params(&self) -> usize {
        self.arch.n_params()
    }

    /// Flattens to a single vector: per layer, weights row-major, then bias.
    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_params());
        for layer in &self.layers {
            out.extend(layer.weights.iter());
            out.extend(layer.bias.iter());
        }
        out
    }

    /// Rebuilds parameters from a flat vector in [`flatten`](Self::flatten)
    /// order.
    pub fn from_flat(arch: &Architecture, flat: &[f64]) -> Result<MlpParams> {
        if flat.len() != arch.n_params() {
            return Err(Error::DimensionMismatch {
                expected: arch.n_params(),
                got: flat.len(),
            });
        }
        let mut layers = Vec::with_capacity(arch.n_layers());
        let mut off = 0;
        for w in arch.widths.windows(2) {
            let (fan_in, fan_out) = (w[0], w[1]);
            let weights =
                Array2::from_shape_vec((fan_out, fan_in), flat[off..off + fan_in * fan_out].to_vec())
                    .expect("shape checked");
            off += fan_in * fan_out;
            let bias = Array1::from_vec(flat[off..off + fan_out].to_vec());
            off += fan_out;
            layers.push(Layer { weights, bias });
        }
        Ok(MlpParams { arch: arch.clone(), layers })
    }

    /// Checks that every entry is finite.
    pub fn all_finite(&self) -> bool {
        self.layers
            .iter()
            .all(|l| l.weights.iter().all(|v| v.is_finite()) && l.bias.iter().all(|v| v.is_finite()))
    }

    /// Plain forward evaluation at a single input point.
    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.arch.input_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.arch.input_dim(),
                got: x.len(),
            });
        }
        let mut act: Vec<f64> = x.to_vec();
        let last = self.layers.len() - 1;
        for (ell, layer) in self.layers.iter().enumerate() {
            let mut next = Vec::with_capacity(layer.bias.len());
            for k in 0..layer.bias.len() {
                let mut acc = layer.bias[k];
                for (j, &a) in act.iter().enumerate() {
                    acc += layer.weights[[k, j]] * a;
                }
                next.push(if ell < last { acc.tanh() } else { acc });
            }
            act = next;
        }
        Ok(act[0])
    }

    /// Batched plain evaluation; `points` is row-major `n × input_dim`.
    pub fn eval_batch(&self, points: &[f64]) -> Result<Vec<f64>> {
        kernel::eval_batch(self, points)
    }

    /// Value and requested input partials at `x`. Delegates to
    /// [`forward_jet`].
    pub fn eval_derivs(&self, x: &[f64], request: &DerivRequest) -> Result<JetValue> {
        forward_jet(self, x, request)
    }

    /// Saves a JSON checkpoint (architecture, optional seed, layers). The
    /// round trip is bitwise exact for finite parameters.
    pub fn save_checkpoint(&self, path: &Path, seed: Option<u64>) -> Result<()> {
        let file = CheckpointFile {
            architecture: self.arch.widths.clone(),
            seed,
            layers: self
                .layers
                .iter()
                .map(|l| CheckpointLayer {
                    weights: l
                        .weights
                        .rows()
                        .into_iter()
                        .map(|r| r.to_vec())
                        .collect(),
                    bias: l.bias.to_vec(),
                })
                .collect(),
        };
        std::fs::write(path, serde_json::to_string(&file)?)?;
        Ok(())
    }

    /// Loads a JSON checkpoint written by
    /// [`save_checkpoint`](Self::save_checkpoint).
    pub fn load_checkpoint(path: &Path) -> Result<(MlpParams, Option<u64>)> {
        let text = std::fs::read_to_string(path)?;
        let file: CheckpointFile = serde_json::from_str(&text)?;
        let arch = Architecture::from_widths(file.architecture)?;
        let mut layers = Vec::with_capacity(file.layers.len());
        for (i, l) in file.layers.iter().enumerate() {
            let (fan_in, fan_out) = (arch.widths[i], arch.widths[i + 1]);
            if l.weights.len() != fan_out || l.weights.iter().any(|r| r.len() != fan_in) {
                return Err(Error::MalformedFile {
                    path: path.display().to_string(),
                    reason: format!("layer {i} weight shape mismatch"),
                });
            }
            let flat: Vec<f64> = l.weights.iter().flatten().copied().collect();
            layers.push(Layer {
                weights: Array2::from_shape_vec((fan_out, fan_in), flat).expect("shape checked"),
                bias: Array1::from_vec(l.bias.clone()),
            });
        }
        Ok((MlpParams { arch, layers }, file.seed))
    }
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    architecture: Vec<usize>,
    seed: Option<u64>,
    layers: Vec<CheckpointLayer>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointLayer {
    weights: Vec<Vec<f64>>,
    bias: Vec<f64>,
}

/// Exact value and mixed input partials of the network at one point.
///
/// Propagates a truncated Taylor jet through every layer; the zero-index entry
/// reproduces [`MlpParams::eval`] bitwise (same accumulation order).
pub fn forward_jet(params: &MlpParams, x: &[f64], request: &DerivRequest) -> Result<JetValue> {
    let dim = params.arch.input_dim();
    if x.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: x.len(),
        });
    }
    if request.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: request.dim(),
        });
    }
    let spec = JetSpec::closure(request);
    let jet = mlp_jet(params, x, &spec);
    jet.to_jet_value(request)
}

/// The full jet of the network output on `spec` at one point.
pub(crate) fn mlp_jet(params: &MlpParams, x: &[f64], spec: &Arc<JetSpec>) -> Jet {
    let mut act: Vec<Jet> = (0..x.len()).map(|i| Jet::variable(spec, i, x[i])).collect();
    let last = params.layers.len() - 1;
    for (ell, layer) in params.layers.iter().enumerate() {
        let mut next = Vec::with_capacity(layer.bias.len());
        for k in 0..layer.bias.len() {
            let mut acc = Jet::constant(spec, layer.bias[k]);
            for (j, a) in act.iter().enumerate() {
                acc = acc.add(&a.scale(layer.weights[[k, j]]));
            }
            next.push(if ell < last { acc.tanh() } else { acc });
        }
        act = next;
    }
    act.pop().expect("output layer has width 1")
}

/// Draws a random architecture and parameter set for tests: widths ≤
/// `max_width`, 1–3 hidden layers.
pub fn random_test_net(input_dim: usize, max_width: usize, seed: u64) -> MlpParams {
    let mut rng = SmallRng::seed_from_u64(seed);
    let n_hidden = rng.random_range(1..=3usize);
    let hidden: Vec<usize> = (0..n_hidden)
        .map(|_| rng.random_range(2..=max_width))
        .collect();
    let arch = Architecture::new(input_dim, &hidden).expect("valid");
    MlpParams::init_uniform(&arch, seed)
}
