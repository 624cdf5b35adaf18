//! Minimal feed-forward scorer with explicit backpropagation and momentum
//! SGD. Hidden layers are rectified, the single output is a raw logit.

use std::fs;
use std::io::Write;
use std::path::Path;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::{config, invalid, Error, Result};

#[derive(Debug, Clone, PartialEq)]
struct Layer {
    /// Row-major `out x in`.
    weights: Vec<f64>,
    biases: Vec<f64>,
}

/// Feed-forward scorer `f: R^d -> R`.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    dims: Vec<usize>,
    layers: Vec<Layer>,
    /// Bumped on every parameter update; invalidates outstanding caches.
    version: u64,
}

/// Activations recorded by [`Mlp::forward`] for the backward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    version: u64,
    batch: usize,
    /// `activations[0]` is the input batch; `activations[l]` the
    /// (post-rectifier) output of layer `l-1`. Row-major `batch x width`.
    activations: Vec<Vec<f64>>,
}

/// Per-layer parameter gradients, shapes mirroring [`Mlp`].
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    weights: Vec<Vec<f64>>,
    biases: Vec<Vec<f64>>,
}

impl Gradients {
    fn zeros_like(mlp: &Mlp) -> Gradients {
        Gradients {
            weights: mlp.layers.iter().map(|l| vec![0.0; l.weights.len()]).collect(),
            biases: mlp.layers.iter().map(|l| vec![0.0; l.biases.len()]).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.weights
            .iter()
            .chain(self.biases.iter())
            .all(|v| v.iter().all(|x| x.is_finite()))
    }

    /// All gradient values in [`Mlp::flat_params`] order: per layer,
    /// row-major weights then biases.
    pub fn iter_values(&self) -> impl Iterator<Item = f64> + '_ {
        self.weights
            .iter()
            .zip(&self.biases)
            .flat_map(|(w, b)| w.iter().chain(b.iter()).copied())
    }
}

fn validate_dims(dims: &[usize]) -> Result<()> {
    if dims.len() < 2 {
        return Err(config("layer_dims needs at least input and output sizes"));
    }
    if dims.contains(&0) {
        return Err(config("layer dimensions must be positive"));
    }
    if *dims.last().unwrap() != 1 {
        return Err(config("output dimension must be 1 (scalar score)"));
    }
    Ok(())
}

/// Deterministic fan-in-scaled initialization: weights uniform in
/// `[-1/sqrt(fan_in), 1/sqrt(fan_in)]`, biases zero.
pub fn init_mlp(layer_dims: &[usize], seed: u64) -> Result<Mlp> {
    validate_dims(layer_dims)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layers = Vec::with_capacity(layer_dims.len() - 1);
    for w in layer_dims.windows(2) {
        let (fan_in, fan_out) = (w[0], w[1]);
        let bound = 1.0 / (fan_in as f64).sqrt();
        let weights = (0..fan_in * fan_out)
            .map(|_| rng.random_range(-bound..=bound))
            .collect();
        layers.push(Layer {
            weights,
            biases: vec![0.0; fan_out],
        });
    }
    Ok(Mlp {
        dims: layer_dims.to_vec(),
        layers,
        version: 0,
    })
}

impl Mlp {
    /// All-zero parameters; the model scores every input 0.
    pub fn zero(layer_dims: &[usize]) -> Result<Mlp> {
        validate_dims(layer_dims)?;
        let layers = layer_dims
            .windows(2)
            .map(|w| Layer {
                weights: vec![0.0; w[0] * w[1]],
                biases: vec![0.0; w[1]],
            })
            .collect();
        Ok(Mlp {
            dims: layer_dims.to_vec(),
            layers,
            version: 0,
        })
    }

    /// Build from flat parameters: per layer, row-major weights then biases.
    pub fn from_flat(layer_dims: &[usize], flat: &[f64]) -> Result<Mlp> {
        validate_dims(layer_dims)?;
        let mut layers = Vec::new();
        let mut cursor = 0;
        for w in layer_dims.windows(2) {
            let (nw, nb) = (w[0] * w[1], w[1]);
            if cursor + nw + nb > flat.len() {
                return Err(invalid("from_flat: too few parameter values"));
            }
            layers.push(Layer {
                weights: flat[cursor..cursor + nw].to_vec(),
                biases: flat[cursor + nw..cursor + nw + nb].to_vec(),
            });
            cursor += nw + nb;
        }
        if cursor != flat.len() {
            return Err(invalid("from_flat: too many parameter values"));
        }
        Ok(Mlp {
            dims: layer_dims.to_vec(),
            layers,
            version: 0,
        })
    }

    pub fn layer_dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn input_dim(&self) -> usize {
        self.dims[0]
    }

    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum()
    }

    /// Parameters flattened in the [`Mlp::from_flat`] order.
    pub fn flat_params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.num_params());
        for l in &self.layers {
            out.extend_from_slice(&l.weights);
            out.extend_from_slice(&l.biases);
        }
        out
    }

    /// Raw logits for a batch of rows plus the activation cache.
    pub fn forward(&self, inputs: &[Vec<f64>]) -> Result<(Vec<f64>, ForwardCache)> {
        let batch = inputs.len();
        for (i, row) in inputs.iter().enumerate() {
            if row.len() != self.input_dim() {
                return Err(invalid(format!(
                    "forward: row {i} has {} features, model expects {}",
                    row.len(),
                    self.input_dim()
                )));
            }
        }
        let mut activations: Vec<Vec<f64>> = Vec::with_capacity(self.layers.len() + 1);
        let mut current: Vec<f64> = Vec::with_capacity(batch * self.input_dim());
        for row in inputs {
            current.extend_from_slice(row);
        }
        activations.push(current.clone());

        for (l, layer) in self.layers.iter().enumerate() {
            let (n_in, n_out) = (self.dims[l], self.dims[l + 1]);
            let is_output = l + 1 == self.layers.len();
            let mut next = vec![0.0; batch * n_out];
            for b in 0..batch {
                let row = &current[b * n_in..(b + 1) * n_in];
                for j in 0..n_out {
                    let w = &layer.weights[j * n_in..(j + 1) * n_in];
                    let mut z = layer.biases[j];
                    for (wi, xi) in w.iter().zip(row) {
                        z += wi * xi;
                    }
                    next[b * n_out + j] = if is_output { z } else { z.max(0.0) };
                }
            }
            activations.push(next.clone());
            current = next;
        }
        let scores = current;
        Ok((
            scores.clone(),
            ForwardCache {
                version: self.version,
                batch,
                activations,
            },
        ))
    }

    /// Score a single row, discarding the cache.
    pub fn score_one(&self, features: &[f64]) -> Result<f64> {
        let (scores, _) = self.forward(std::slice::from_ref(&features.to_vec()))?;
        Ok(scores[0])
    }

    /// Gradients of `sum_i dscore[i] * score[i]` with respect to all
    /// parameters, via the chain rule through the cached activations.
    pub fn backward(&self, cache: &ForwardCache, dscore: &[f64]) -> Result<Gradients> {
        if cache.version != self.version {
            return Err(invalid(
                "backward: stale cache (parameters changed since forward)",
            ));
        }
        if dscore.len() != cache.batch {
            return Err(invalid(format!(
                "backward: {} gradients for batch of {}",
                dscore.len(),
                cache.batch
            )));
        }
        let batch = cache.batch;
        let mut grads = Gradients::zeros_like(self);
        let mut delta: Vec<f64> = dscore.to_vec(); // batch x 1 at the output

        for l in (0..self.layers.len()).rev() {
            let (n_in, n_out) = (self.dims[l], self.dims[l + 1]);
            let input = &cache.activations[l];
            let layer = &self.layers[l];

            for b in 0..batch {
                let row = &input[b * n_in..(b + 1) * n_in];
                for j in 0..n_out {
                    let d = delta[b * n_out + j];
                    if d == 0.0 {
                        continue;
                    }
                    grads.biases[l][j] += d;
                    let wrow = &mut grads.weights[l][j * n_in..(j + 1) * n_in];
                    for (g, xi) in wrow.iter_mut().zip(row) {
                        *g += d * xi;
                    }
                }
            }

            if l > 0 {
                // Propagate through the previous layer's rectifier: its
                // output `input` is positive exactly where the unit fired.
                let mut prev = vec![0.0; batch * n_in];
                for b in 0..batch {
                    for j in 0..n_out {
                        let d = delta[b * n_out + j];
                        if d == 0.0 {
                            continue;
                        }
                        let w = &layer.weights[j * n_in..(j + 1) * n_in];
                        for i in 0..n_in {
                            if input[b * n_in + i] > 0.0 {
                                prev[b * n_in + i] += w[i] * d;
                            }
                        }
                    }
                }
                delta = prev;
            }
        }
        Ok(grads)
    }

    /// Momentum SGD: `v <- momentum * v + g; p <- p - lr * v`. Non-finite
    /// gradients abort the step without touching the parameters.
    pub fn sgd_step(&mut self, grads: &Gradients, opt: &mut OptimizerState) -> Result<()> {
        if grads.weights.len() != self.layers.len() {
            return Err(invalid("sgd_step: gradient shape mismatch"));
        }
        for (l, layer) in self.layers.iter().enumerate() {
            if grads.weights[l].len() != layer.weights.len()
                || grads.biases[l].len() != layer.biases.len()
            {
                return Err(invalid("sgd_step: gradient shape mismatch"));
            }
        }
        if !grads.is_finite() {
            return Err(Error::Numeric("non-finite gradient, step aborted".into()));
        }
        opt.ensure_velocity(self);
        let velocity = opt.velocity.as_mut().expect("just ensured");
        for (l, layer) in self.layers.iter_mut().enumerate() {
            for (i, w) in layer.weights.iter_mut().enumerate() {
                let v = &mut velocity.weights[l][i];
                *v = opt.momentum * *v + grads.weights[l][i];
                *w -= opt.learning_rate * *v;
            }
            for (j, b) in layer.biases.iter_mut().enumerate() {
                let v = &mut velocity.biases[l][j];
                *v = opt.momentum * *v + grads.biases[l][j];
                *b -= opt.learning_rate * *v;
            }
        }
        self.version += 1;
        if self.flat_params().iter().any(|p| !p.is_finite()) {
            return Err(Error::Numeric("parameters became non-finite".into()));
        }
        Ok(())
    }

    /// Write parameters as a versioned text file: a magic line, the layer
    /// dimensions, then row-major values per layer. Values round-trip
    /// exactly.
    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut out = String::from("rankreg-mlp/v1\n");
        out.push_str("dims");
        for d in &self.dims {
            out.push_str(&format!(" {d}"));
        }
        out.push('\n');
        for (l, layer) in self.layers.iter().enumerate() {
            out.push_str(&format!("layer {l} weights"));
            for v in &layer.weights {
                out.push_str(&format!(" {v}"));
            }
            out.push('\n');
            out.push_str(&format!("layer {l} biases"));
            for v in &layer.biases {
                out.push_str(&format!(" {v}"));
            }
            out.push('\n');
        }
        let mut f = fs::File::create(path)?;
        f.write_all(out.as_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Mlp> {
        let text = fs::read_to_string(path)?;
        let mut lines = text.lines().enumerate();
        let parse_err = |line: usize, msg: &str| Error::Parse {
            line: line + 1,
            msg: msg.into(),
        };

        let (i, magic) = lines.next().ok_or_else(|| parse_err(0, "empty file"))?;
        if magic.trim() != "rankreg-mlp/v1" {
            return Err(parse_err(i, "expected magic line rankreg-mlp/v1"));
        }
        let (i, dims_line) = lines.next().ok_or_else(|| parse_err(1, "missing dims"))?;
        let mut tokens = dims_line.split_whitespace();
        if tokens.next() != Some("dims") {
            return Err(parse_err(i, "expected dims line"));
        }
        let dims: Vec<usize> = tokens
            .map(|t| t.parse().map_err(|_| parse_err(i, "bad dimension")))
            .collect::<Result<_>>()?;
        validate_dims(&dims)?;

        let mut flat = Vec::new();
        for (l, w) in dims.windows(2).enumerate() {
            for (kind, count) in [("weights", w[0] * w[1]), ("biases", w[1])] {
                let (i, line) = lines
                    .next()
                    .ok_or_else(|| parse_err(2 + 2 * l, "missing layer line"))?;
                let mut t = line.split_whitespace();
                if t.next() != Some("layer")
                    || t.next() != Some(&l.to_string())
                    || t.next() != Some(kind)
                {
                    return Err(parse_err(i, &format!("expected 'layer {l} {kind} ...'")));
                }
                let values: Vec<f64> = t
                    .map(|v| v.parse().map_err(|_| parse_err(i, "bad parameter value")))
                    .collect::<Result<_>>()?;
                if values.len() != count {
                    return Err(parse_err(
                        i,
                        &format!("expected {count} values, found {}", values.len()),
                    ));
                }
                flat.extend(values);
            }
        }
        Mlp::from_flat(&dims, &flat)
    }
}

/// Momentum-SGD state; velocity tensors mirror the model parameters.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub learning_rate: f64,
    pub momentum: f64,
    velocity: Option<Gradients>,
}

impl OptimizerState {
    pub fn new(learning_rate: f64, momentum: f64) -> Result<OptimizerState> {
        if !learning_rate.is_finite() || learning_rate <= 0.0 {
            return Err(config(format!("learning_rate must be > 0, got {learning_rate}")));
        }
        if !momentum.is_finite() || !(0.0..1.0).contains(&momentum) {
            return Err(config(format!("momentum must be in [0, 1), got {momentum}")));
        }
        Ok(OptimizerState {
            learning_rate,
            momentum,
            velocity: None,
        })
    }

    fn ensure_velocity(&mut self, mlp: &Mlp) {
        if self.velocity.is_none() {
            self.velocity = Some(Gradients::zeros_like(mlp));
        }
    }
}
