//! Fully connected network with two sigmoid hidden layers and a sigmoid
//! output, trained by full-batch gradient descent on mean squared error.
//!
//! Steps follow Adam. The returned weights are the best iterate seen, so the
//! recorded loss never increases; a step that more than doubles the best loss
//! sends training back to the best iterate with half the step size.
//!
//! Inputs are min-max scaled to [0, 1] and targets to [0.1, 0.9] using the
//! ranges seen in training. Predictions are mapped back to target units and
//! clamped to the training target range.

use std::fmt::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result};

const TARGET_LO: f64 = 0.1;
const TARGET_HI: f64 = 0.9;
const HEADER: &str = "roadcast-mlp 1";
const BETA1: f64 = 0.9;
const BETA2: f64 = 0.999;
const ADAM_EPS: f64 = 1e-8;
/// Loss ratio over the best iterate that counts as divergence.
const DIVERGENCE: f64 = 2.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlpParams {
    pub hidden: [usize; 2],
    pub epochs: usize,
    /// Initial Adam step size; halved whenever training diverges.
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for MlpParams {
    fn default() -> Self {
        MlpParams {
            hidden: [32, 16],
            epochs: 2000,
            learning_rate: 0.1,
            seed: 0,
        }
    }
}

impl MlpParams {
    pub fn validate(&self) -> Result<()> {
        if self.hidden.contains(&0) {
            return Err(Error::invalid("hidden layer widths must be positive"));
        }
        if self.epochs == 0 {
            return Err(Error::invalid("epochs must be positive"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::invalid(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
struct Layer {
    n_in: usize,
    n_out: usize,
    /// Row-major `n_out x n_in`.
    weights: Vec<f64>,
    biases: Vec<f64>,
}

impl Layer {
    fn forward(&self, input: &[f64], out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            let row = &self.weights[j * self.n_in..(j + 1) * self.n_in];
            let z = self.biases[j] + row.iter().zip(input).map(|(w, x)| w * x).sum::<f64>();
            *o = sigmoid(z);
        }
    }
}

fn sigmoid(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// Gradient of the scaled loss, laid out like the model's parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: [Vec<f64>; 3],
    pub biases: [Vec<f64>; 3],
}

impl Gradients {
    /// Weights then biases of each layer, input layer first; matches
    /// [`MlpModel::params_flat`].
    pub fn flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for l in 0..3 {
            out.extend_from_slice(&self.weights[l]);
            out.extend_from_slice(&self.biases[l]);
        }
        out
    }

    pub fn output_bias(&self) -> f64 {
        self.biases[2][0]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpModel {
    layers: Vec<Layer>,
    feature_min: Vec<f64>,
    feature_max: Vec<f64>,
    target_min: f64,
    target_max: f64,
    /// Best scaled training loss before the first epoch and after each epoch.
    pub loss_history: Vec<f64>,
}

struct Scratch {
    acts: [Vec<f64>; 3],
    deltas: [Vec<f64>; 3],
    scaled: Vec<f64>,
}

impl MlpModel {
    /// Untrained network with Xavier-uniform weights, zero biases and scaling
    /// fitted to `rows` and `targets`.
    pub fn init(rows: &[Vec<f64>], targets: &[f64], params: &MlpParams) -> Result<Self> {
        params.validate()?;
        if rows.is_empty() {
            return Err(Error::EmptyDataset("no training samples".into()));
        }
        if rows.len() != targets.len() {
            return Err(Error::DimensionMismatch {
                expected: rows.len(),
                got: targets.len(),
            });
        }
        let n_in = rows[0].len();
        if n_in == 0 {
            return Err(Error::invalid("samples have no features"));
        }
        if let Some(bad) = rows.iter().find(|r| r.len() != n_in) {
            return Err(Error::DimensionMismatch {
                expected: n_in,
                got: bad.len(),
            });
        }
        if rows.iter().flatten().chain(targets).any(|v| !v.is_finite()) {
            return Err(Error::invalid("training data contains non-finite values"));
        }

        let mut feature_min = vec![f64::INFINITY; n_in];
        let mut feature_max = vec![f64::NEG_INFINITY; n_in];
        for row in rows {
            for (f, &v) in row.iter().enumerate() {
                feature_min[f] = feature_min[f].min(v);
                feature_max[f] = feature_max[f].max(v);
            }
        }
        for f in 0..n_in {
            if feature_min[f] == feature_max[f] {
                log::warn!("feature {f} is constant in training data; pinned to 0.5");
            }
        }
        let target_min = targets.iter().cloned().fold(f64::INFINITY, f64::min);
        let target_max = targets.iter().cloned().fold(f64::NEG_INFINITY, f64::max);

        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let sizes = [n_in, params.hidden[0], params.hidden[1], 1];
        let layers = sizes
            .windows(2)
            .map(|w| {
                let (n_in, n_out) = (w[0], w[1]);
                let limit = (6.0 / (n_in + n_out) as f64).sqrt();
                Layer {
                    n_in,
                    n_out,
                    weights: (0..n_in * n_out)
                        .map(|_| rng.random_range(-limit..limit))
                        .collect(),
                    biases: vec![0.0; n_out],
                }
            })
            .collect();
        Ok(MlpModel {
            layers,
            feature_min,
            feature_max,
            target_min,
            target_max,
            loss_history: Vec::new(),
        })
    }

    pub fn n_inputs(&self) -> usize {
        self.layers[0].n_in
    }

    pub fn topology(&self) -> [usize; 4] {
        [
            self.layers[0].n_in,
            self.layers[1].n_in,
            self.layers[2].n_in,
            1,
        ]
    }

    pub fn target_range(&self) -> (f64, f64) {
        (self.target_min, self.target_max)
    }

    /// Target units per unit of scaled output.
    pub fn target_scale(&self) -> f64 {
        (self.target_max - self.target_min) / (TARGET_HI - TARGET_LO)
    }

    pub fn scale_features(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; x.len()];
        self.scale_into(x, &mut out);
        out
    }

    fn scale_into(&self, x: &[f64], out: &mut [f64]) {
        for f in 0..x.len() {
            let (lo, hi) = (self.feature_min[f], self.feature_max[f]);
            out[f] = if hi > lo {
                (x[f] - lo) / (hi - lo)
            } else {
                0.5
            };
        }
    }

    pub fn scale_target(&self, y: f64) -> f64 {
        if self.target_max > self.target_min {
            TARGET_LO
                + (y - self.target_min) / (self.target_max - self.target_min)
                    * (TARGET_HI - TARGET_LO)
        } else {
            0.5
        }
    }

    fn unscale_target(&self, o: f64) -> f64 {
        let y = self.target_min + (o - TARGET_LO) * self.target_scale();
        y.clamp(self.target_min, self.target_max)
    }

    fn scratch(&self) -> Scratch {
        let widths = [self.layers[0].n_out, self.layers[1].n_out, 1];
        Scratch {
            acts: widths.map(|w| vec![0.0; w]),
            deltas: widths.map(|w| vec![0.0; w]),
            scaled: vec![0.0; self.n_inputs()],
        }
    }

    fn forward(&self, scaled: &[f64], s: &mut Scratch) -> f64 {
        let [a0, a1, a2] = &mut s.acts;
        self.layers[0].forward(scaled, a0);
        self.layers[1].forward(a0, a1);
        self.layers[2].forward(a1, a2);
        a2[0]
    }

    /// Network output for already-scaled inputs, in (0, 1).
    pub fn predict_scaled(&self, scaled: &[f64]) -> f64 {
        let mut s = self.scratch();
        self.forward(scaled, &mut s)
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_inputs() {
            return Err(Error::DimensionMismatch {
                expected: self.n_inputs(),
                got: x.len(),
            });
        }
        let mut s = self.scratch();
        let mut scaled = std::mem::take(&mut s.scaled);
        self.scale_into(x, &mut scaled);
        Ok(self.unscale_target(self.forward(&scaled, &mut s)))
    }

    fn check_batch(&self, rows: &[Vec<f64>], targets: &[f64]) -> Result<()> {
        if rows.is_empty() {
            return Err(Error::EmptyDataset("empty batch".into()));
        }
        if rows.len() != targets.len() {
            return Err(Error::DimensionMismatch {
                expected: rows.len(),
                got: targets.len(),
            });
        }
        if let Some(bad) = rows.iter().find(|r| r.len() != self.n_inputs()) {
            return Err(Error::DimensionMismatch {
                expected: self.n_inputs(),
                got: bad.len(),
            });
        }
        Ok(())
    }

    /// Mean squared error in scaled units.
    pub fn loss(&self, rows: &[Vec<f64>], targets: &[f64]) -> Result<f64> {
        self.check_batch(rows, targets)?;
        let scaled: Vec<Vec<f64>> = rows.iter().map(|r| self.scale_features(r)).collect();
        let ys: Vec<f64> = targets.iter().map(|&y| self.scale_target(y)).collect();
        Ok(self.scaled_loss(&scaled, &ys))
    }

    fn scaled_loss(&self, rows: &[Vec<f64>], ys: &[f64]) -> f64 {
        let mut s = self.scratch();
        let sse: f64 = rows
            .iter()
            .zip(ys)
            .map(|(x, y)| (self.forward(x, &mut s) - y).powi(2))
            .sum();
        sse / rows.len() as f64
    }

    fn scaled_gradients(&self, rows: &[Vec<f64>], ys: &[f64]) -> Gradients {
        let mut g = Gradients {
            weights: [0, 1, 2].map(|l| vec![0.0; self.layers[l].weights.len()]),
            biases: [0, 1, 2].map(|l| vec![0.0; self.layers[l].n_out]),
        };
        let mut s = self.scratch();
        let n = rows.len() as f64;
        for (x, &y) in rows.iter().zip(ys) {
            let o = self.forward(x, &mut s);
            s.deltas[2][0] = 2.0 * (o - y) / n * o * (1.0 - o);
            for l in (0..3).rev() {
                let layer = &self.layers[l];
                let input: &[f64] = if l == 0 { x } else { &s.acts[l - 1] };
                for j in 0..layer.n_out {
                    let d = s.deltas[l][j];
                    g.biases[l][j] += d;
                    let gw = &mut g.weights[l][j * layer.n_in..(j + 1) * layer.n_in];
                    for (w, &a) in gw.iter_mut().zip(input) {
                        *w += d * a;
                    }
                }
                if l > 0 {
                    let (lower, upper) = s.deltas.split_at_mut(l);
                    let below = &mut lower[l - 1];
                    for (k, b) in below.iter_mut().enumerate() {
                        let back: f64 = (0..layer.n_out)
                            .map(|j| layer.weights[j * layer.n_in + k] * upper[0][j])
                            .sum();
                        let a = s.acts[l - 1][k];
                        *b = back * a * (1.0 - a);
                    }
                }
            }
        }
        g
    }

    /// Gradients of [`loss`](Self::loss) with respect to every weight and bias.
    pub fn gradients(&self, rows: &[Vec<f64>], targets: &[f64]) -> Result<Gradients> {
        self.check_batch(rows, targets)?;
        let scaled: Vec<Vec<f64>> = rows.iter().map(|r| self.scale_features(r)).collect();
        let ys: Vec<f64> = targets.iter().map(|&y| self.scale_target(y)).collect();
        Ok(self.scaled_gradients(&scaled, &ys))
    }

    pub fn params_flat(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for layer in &self.layers {
            out.extend_from_slice(&layer.weights);
            out.extend_from_slice(&layer.biases);
        }
        out
    }

    pub fn set_params_flat(&mut self, params: &[f64]) -> Result<()> {
        let total: usize = self
            .layers
            .iter()
            .map(|l| l.weights.len() + l.biases.len())
            .sum();
        if params.len() != total {
            return Err(Error::DimensionMismatch {
                expected: total,
                got: params.len(),
            });
        }
        let mut at = 0;
        for layer in &mut self.layers {
            let nw = layer.weights.len();
            layer.weights.copy_from_slice(&params[at..at + nw]);
            at += nw;
            let nb = layer.biases.len();
            layer.biases.copy_from_slice(&params[at..at + nb]);
            at += nb;
        }
        Ok(())
    }

    /// Trains on raw features and targets.
    pub fn train(rows: &[Vec<f64>], targets: &[f64], params: &MlpParams) -> Result<Self> {
        let mut model = Self::init(rows, targets, params)?;
        let scaled: Vec<Vec<f64>> = rows.iter().map(|r| model.scale_features(r)).collect();
        let ys: Vec<f64> = targets.iter().map(|&y| model.scale_target(y)).collect();
        let loss = model.scaled_loss(&scaled, &ys);
        let mut lr = params.learning_rate;
        let mut history = Vec::with_capacity(params.epochs + 1);
        history.push(loss);
        let n_params = model.params_flat().len();
        let (mut m1, mut m2) = (vec![0.0; n_params], vec![0.0; n_params]);
        let mut best = model.params_flat();
        let mut best_loss = loss;
        let mut t = 0;
        for _ in 0..params.epochs {
            t += 1;
            let g = model.scaled_gradients(&scaled, &ys).flat();
            let (c1, c2) = (1.0 - BETA1.powi(t), 1.0 - BETA2.powi(t));
            let mut p = model.params_flat();
            for i in 0..n_params {
                m1[i] = BETA1 * m1[i] + (1.0 - BETA1) * g[i];
                m2[i] = BETA2 * m2[i] + (1.0 - BETA2) * g[i] * g[i];
                p[i] -= lr * (m1[i] / c1) / ((m2[i] / c2).sqrt() + ADAM_EPS);
            }
            model.set_params_flat(&p)?;
            let loss = model.scaled_loss(&scaled, &ys);
            if loss < best_loss {
                best_loss = loss;
                best = p;
            } else if !(loss <= DIVERGENCE * best_loss) {
                model.set_params_flat(&best)?;
                m1.iter_mut().chain(m2.iter_mut()).for_each(|v| *v = 0.0);
                t = 0;
                lr *= 0.5;
            }
            history.push(best_loss);
        }
        model.set_params_flat(&best)?;
        model.loss_history = history;
        Ok(model)
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let join = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(" ");
        let t = self.topology();
        let _ = writeln!(s, "{HEADER}");
        let _ = writeln!(s, "topology {} {} {} {}", t[0], t[1], t[2], t[3]);
        let _ = writeln!(s, "feature_min {}", join(&self.feature_min));
        let _ = writeln!(s, "feature_max {}", join(&self.feature_max));
        let _ = writeln!(s, "target_range {} {}", self.target_min, self.target_max);
        for layer in &self.layers {
            let _ = writeln!(s, "weights {}", join(&layer.weights));
            let _ = writeln!(s, "biases {}", join(&layer.biases));
        }
        let _ = writeln!(s, "loss_history {}", join(&self.loss_history));
        s.push_str("end\n");
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate();
        let mut line_no = 0;
        let mut next = |key: &str| -> Result<(usize, Vec<String>)> {
            let (i, l) = lines.next().ok_or(Error::ModelFormat {
                line: line_no + 1,
                msg: format!("expected `{key}`, found end of input"),
            })?;
            line_no = i + 1;
            let mut parts = l.split_whitespace();
            if parts.next() != Some(key) {
                return Err(Error::ModelFormat {
                    line: line_no,
                    msg: format!("expected `{key}`"),
                });
            }
            Ok((line_no, parts.map(str::to_owned).collect()))
        };
        fn nums<T: std::str::FromStr>(
            line: usize,
            parts: &[String],
            n: Option<usize>,
        ) -> Result<Vec<T>> {
            if n.is_some_and(|n| n != parts.len()) {
                return Err(Error::ModelFormat {
                    line,
                    msg: format!("expected {} value(s), found {}", n.unwrap(), parts.len()),
                });
            }
            parts
                .iter()
                .map(|p| {
                    p.parse().map_err(|_| Error::ModelFormat {
                        line,
                        msg: format!("bad value {p:?}"),
                    })
                })
                .collect()
        }

        let (line, version) = next("roadcast-mlp")?;
        if version != ["1"] {
            return Err(Error::ModelFormat {
                line,
                msg: format!("expected header {HEADER:?}"),
            });
        }
        let (line, parts) = next("topology")?;
        let t: Vec<usize> = nums(line, &parts, Some(4))?;
        if t[3] != 1 || t[..3].contains(&0) {
            return Err(Error::ModelFormat {
                line,
                msg: "invalid topology".into(),
            });
        }
        let (line, parts) = next("feature_min")?;
        let feature_min = nums(line, &parts, Some(t[0]))?;
        let (line, parts) = next("feature_max")?;
        let feature_max = nums(line, &parts, Some(t[0]))?;
        let (line, parts) = next("target_range")?;
        let range: Vec<f64> = nums(line, &parts, Some(2))?;
        let mut layers = Vec::with_capacity(3);
        for w in t.windows(2) {
            let (n_in, n_out) = (w[0], w[1]);
            let (line, parts) = next("weights")?;
            let weights = nums(line, &parts, Some(n_in * n_out))?;
            let (line, parts) = next("biases")?;
            let biases = nums(line, &parts, Some(n_out))?;
            layers.push(Layer {
                n_in,
                n_out,
                weights,
                biases,
            });
        }
        let (line, parts) = next("loss_history")?;
        let loss_history = nums(line, &parts, None)?;
        next("end")?;
        Ok(MlpModel {
            layers,
            feature_min,
            feature_max,
            target_min: range[0],
            target_max: range[1],
            loss_history,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn xor() -> (Vec<Vec<f64>>, Vec<f64>) {
        let rows = vec![
            vec![0.0, 0.0],
            vec![0.0, 1.0],
            vec![1.0, 0.0],
            vec![1.0, 1.0],
        ];
        (rows, vec![0.0, 1.0, 1.0, 0.0])
    }

    #[test]
    fn learns_xor() {
        let (rows, ys) = xor();
        let params = MlpParams {
            epochs: 5000,
            seed: 3,
            ..MlpParams::default()
        };
        let m = MlpModel::train(&rows, &ys, &params).unwrap();
        let preds: Vec<f64> = rows.iter().map(|r| m.predict(r).unwrap()).collect();
        let mse = preds
            .iter()
            .zip(&ys)
            .map(|(p, y)| (p - y).powi(2))
            .sum::<f64>()
            / 4.0;
        assert!(mse < 0.01, "mse {mse}, preds {preds:?}");
    }

    #[test]
    fn loss_never_increases() {
        let (rows, ys) = xor();
        let params = MlpParams {
            epochs: 300,
            learning_rate: 50.0,
            ..MlpParams::default()
        };
        let m = MlpModel::train(&rows, &ys, &params).unwrap();
        assert_eq!(m.loss_history.len(), 301);
        for w in m.loss_history.windows(2) {
            assert!(w[1] <= w[0]);
        }
    }

    #[test]
    fn zero_weights_output_the_bias() {
        let (rows, ys) = xor();
        let mut m = MlpModel::init(&rows, &ys, &MlpParams::default()).unwrap();
        let mut p = vec![0.0; m.params_flat().len()];
        *p.last_mut().unwrap() = 0.7;
        m.set_params_flat(&p).unwrap();
        assert!((m.predict_scaled(&[0.3, 0.9]) - sigmoid(0.7)).abs() < 1e-15);
    }

    #[test]
    fn zero_error_gives_zero_gradient() {
        let (rows, _) = xor();
        let mut m = MlpModel::init(&rows, &[0.0, 1.0, 0.5, 0.25], &MlpParams::default()).unwrap();
        m.set_params_flat(&vec![0.0; m.params_flat().len()])
            .unwrap();
        // every output is sigmoid(0) = 0.5, and 0.5 scales to 0.5 on a [0, 1] range
        assert_eq!(m.scale_target(0.5), 0.5);
        let g = m.gradients(&rows, &[0.5; 4]).unwrap();
        assert!(g.flat().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn constant_feature_is_pinned() {
        let rows = vec![vec![1.0, 5.0], vec![2.0, 5.0], vec![3.0, 5.0]];
        let m = MlpModel::init(&rows, &[1.0, 2.0, 3.0], &MlpParams::default()).unwrap();
        assert_eq!(m.scale_features(&[2.0, 5.0]), vec![0.5, 0.5]);
        assert_eq!(m.scale_features(&[3.0, 100.0]), vec![1.0, 0.5]);
    }

    #[test]
    fn predictions_stay_inside_target_range() {
        let (rows, _) = xor();
        let ys = [10.0, 20.0, 30.0, 40.0];
        let params = MlpParams {
            epochs: 50,
            ..MlpParams::default()
        };
        let m = MlpModel::train(&rows, &ys, &params).unwrap();
        for x in [[-100.0, 100.0], [0.5, 0.5], [1e6, -1e6]] {
            let p = m.predict(&x).unwrap();
            assert!((10.0..=40.0).contains(&p));
        }
    }

    #[test]
    fn text_round_trip_is_exact() {
        let (rows, ys) = xor();
        let params = MlpParams {
            epochs: 20,
            hidden: [5, 3],
            ..MlpParams::default()
        };
        let m = MlpModel::train(&rows, &ys, &params).unwrap();
        let text = m.to_text();
        let back = MlpModel::from_text(&text).unwrap();
        assert_eq!(back, m);
        assert_eq!(back.to_text(), text);
        assert!(MlpModel::from_text(&text.replace("topology", "topo")).is_err());
        assert!(MlpModel::from_text("").is_err());
    }

    #[test]
    fn same_seed_same_bytes() {
        let (rows, ys) = xor();
        let params = MlpParams {
            epochs: 30,
            seed: 11,
            ..MlpParams::default()
        };
        let a = MlpModel::train(&rows, &ys, &params).unwrap();
        let b = MlpModel::train(&rows, &ys, &params).unwrap();
        assert_eq!(a.to_text(), b.to_text());
    }
}
