//! Single-hidden-layer MLP regression: tanh hidden activations, linear
//! output, trained by full-batch gradient descent on mean squared error.
//!
//! Inputs are z-scored with statistics from the training data; a feature
//! with zero spread is passed through as 0. Raw kbps-scale features would
//! otherwise make the fixed learning rate diverge.

use super::ModelError;
use crate::dataset::Dataset;
use crate::rng::rng_for;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// MLP training configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpConfig {
    /// Hidden layer width; `None` matches the input dimension.
    pub hidden_units: Option<usize>,
    pub learning_rate: f64,
    /// Gradient descent steps over the full batch.
    pub iterations: usize,
    pub seed: u64,
    /// Parameters initialize uniformly in [-init_scale, init_scale].
    pub init_scale: f64,
}

impl Default for MlpConfig {
    fn default() -> Self {
        MlpConfig {
            hidden_units: None,
            learning_rate: 0.02,
            iterations: 100,
            seed: 0,
            init_scale: 0.1,
        }
    }
}

impl MlpConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn validate(&self) -> Result<(), ModelError> {
        if self.hidden_units == Some(0) {
            return Err(ModelError::InvalidConfig("hidden_units must be >= 1".into()));
        }
        if !(self.learning_rate > 0.0) {
            return Err(ModelError::InvalidConfig(
                "learning_rate must be > 0".into(),
            ));
        }
        if self.iterations == 0 {
            return Err(ModelError::InvalidConfig("iterations must be >= 1".into()));
        }
        Ok(())
    }
}

/// A trained MLP. `w1` is input-major: `w1[i][j]` connects input i to
/// hidden unit j.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpModel {
    config: MlpConfig,
    feature_names: Vec<String>,
    w1: Vec<Vec<f64>>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: f64,
    feature_means: Vec<f64>,
    feature_stds: Vec<f64>,
}

/// Train an MLP on the dataset: standardize inputs, initialize all
/// parameters uniformly from the seed (w1 row-major, then b1, w2, b2), and
/// run `iterations` full-batch gradient steps at the fixed learning rate.
/// No early stopping; a non-finite loss aborts with `NonFiniteLoss`.
pub fn train_mlp(dataset: &Dataset, config: &MlpConfig) -> Result<MlpModel, ModelError> {
    if dataset.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    config.validate()?;

    let dim = dataset.dim();
    let hidden = config.hidden_units.unwrap_or(dim);
    let n = dataset.len();

    let mut means = vec![0.0; dim];
    for row in dataset.rows() {
        for (m, v) in means.iter_mut().zip(&row.features) {
            *m += v;
        }
    }
    for m in means.iter_mut() {
        *m /= n as f64;
    }
    let mut stds = vec![0.0; dim];
    for row in dataset.rows() {
        for ((s, v), m) in stds.iter_mut().zip(&row.features).zip(&means) {
            *s += (v - m) * (v - m);
        }
    }
    for s in stds.iter_mut() {
        *s = (*s / n as f64).sqrt();
    }

    let mut rng = rng_for(config.seed, 0);
    let mut draw = |scale: f64| rng.random_range(-scale..scale);
    let w1: Vec<Vec<f64>> = (0..dim)
        .map(|_| (0..hidden).map(|_| draw(config.init_scale)).collect())
        .collect();
    let b1: Vec<f64> = (0..hidden).map(|_| draw(config.init_scale)).collect();
    let w2: Vec<f64> = (0..hidden).map(|_| draw(config.init_scale)).collect();
    let b2 = draw(config.init_scale);

    let mut model = MlpModel {
        config: config.clone(),
        feature_names: dataset.feature_names().to_vec(),
        w1,
        b1,
        w2,
        b2,
        feature_means: means,
        feature_stds: stds,
    };

    let inputs: Vec<Vec<f64>> = dataset
        .rows()
        .iter()
        .map(|r| model.standardize(&r.features))
        .collect();
    let targets = dataset.targets();

    for iteration in 0..config.iterations {
        let (loss, gradients) = model.loss_and_gradients(&inputs, &targets);
        if !loss.is_finite() {
            return Err(ModelError::NonFiniteLoss { iteration });
        }
        for (p, g) in (0..model.param_count()).zip(gradients) {
            model.set_param(p, model.param(p) - config.learning_rate * g);
        }
    }
    let final_loss = model.loss_standardized(&inputs, &targets);
    if !final_loss.is_finite() {
        return Err(ModelError::NonFiniteLoss {
            iteration: config.iterations,
        });
    }
    Ok(model)
}

impl MlpModel {
    /// b2 + w2 . tanh(W1' x~ + b1) on the standardized input. The output is
    /// never clamped here; clamping to the MOS range is a reporting choice.
    pub fn predict(&self, x: &[f64]) -> Result<f64, ModelError> {
        if x.len() != self.feature_names.len() {
            return Err(ModelError::DimensionalityMismatch {
                expected: self.feature_names.len(),
                got: x.len(),
            });
        }
        Ok(self.forward(&self.standardize(x)))
    }

    fn standardize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.feature_means)
            .zip(&self.feature_stds)
            .map(|((v, m), s)| if *s == 0.0 { 0.0 } else { (v - m) / s })
            .collect()
    }

    fn hidden_activations(&self, z: &[f64]) -> Vec<f64> {
        (0..self.b1.len())
            .map(|j| {
                let mut pre = self.b1[j];
                for (zi, row) in z.iter().zip(&self.w1) {
                    pre += zi * row[j];
                }
                pre.tanh()
            })
            .collect()
    }

    fn forward(&self, z: &[f64]) -> f64 {
        let h = self.hidden_activations(z);
        self.b2 + self.w2.iter().zip(&h).map(|(w, h)| w * h).sum::<f64>()
    }

    /// Mean squared error over the dataset.
    pub fn loss(&self, dataset: &Dataset) -> f64 {
        let inputs: Vec<Vec<f64>> = dataset
            .rows()
            .iter()
            .map(|r| self.standardize(&r.features))
            .collect();
        self.loss_standardized(&inputs, &dataset.targets())
    }

    fn loss_standardized(&self, inputs: &[Vec<f64>], targets: &[f64]) -> f64 {
        let n = targets.len() as f64;
        inputs
            .iter()
            .zip(targets)
            .map(|(z, t)| {
                let e = self.forward(z) - t;
                e * e
            })
            .sum::<f64>()
            / n
    }

    /// Analytic gradient of the MSE loss with respect to every parameter,
    /// flattened in [`param`] order. Exposed so gradients can be checked
    /// against finite differences.
    pub fn gradients(&self, dataset: &Dataset) -> Vec<f64> {
        let inputs: Vec<Vec<f64>> = dataset
            .rows()
            .iter()
            .map(|r| self.standardize(&r.features))
            .collect();
        self.loss_and_gradients(&inputs, &dataset.targets()).1
    }

    fn loss_and_gradients(&self, inputs: &[Vec<f64>], targets: &[f64]) -> (f64, Vec<f64>) {
        let dim = self.w1.len();
        let hidden = self.b1.len();
        let n = targets.len() as f64;

        let mut g_w1 = vec![vec![0.0; hidden]; dim];
        let mut g_b1 = vec![0.0; hidden];
        let mut g_w2 = vec![0.0; hidden];
        let mut g_b2 = 0.0;
        let mut loss = 0.0;

        for (z, t) in inputs.iter().zip(targets) {
            let h = self.hidden_activations(z);
            let y = self.b2 + self.w2.iter().zip(&h).map(|(w, h)| w * h).sum::<f64>();
            let err = y - t;
            loss += err * err;
            let dy = 2.0 * err / n;
            g_b2 += dy;
            for j in 0..hidden {
                g_w2[j] += dy * h[j];
                let dpre = dy * self.w2[j] * (1.0 - h[j] * h[j]);
                g_b1[j] += dpre;
                for i in 0..dim {
                    g_w1[i][j] += dpre * z[i];
                }
            }
        }
        loss /= n;

        let mut flat = Vec::with_capacity(self.param_count());
        for row in g_w1 {
            flat.extend(row);
        }
        flat.extend(g_b1);
        flat.extend(g_w2);
        flat.push(g_b2);
        (loss, flat)
    }

    /// Total number of trainable parameters.
    pub fn param_count(&self) -> usize {
        let dim = self.w1.len();
        let hidden = self.b1.len();
        dim * hidden + hidden + hidden + 1
    }

    /// Flat parameter view: w1 row-major, then b1, w2, b2.
    pub fn param(&self, index: usize) -> f64 {
        let dim = self.w1.len();
        let hidden = self.b1.len();
        let w1_len = dim * hidden;
        if index < w1_len {
            self.w1[index / hidden][index % hidden]
        } else if index < w1_len + hidden {
            self.b1[index - w1_len]
        } else if index < w1_len + 2 * hidden {
            self.w2[index - w1_len - hidden]
        } else {
            self.b2
        }
    }

    /// Set one parameter in the flat layout.
    pub fn set_param(&mut self, index: usize, value: f64) {
        let dim = self.w1.len();
        let hidden = self.b1.len();
        let w1_len = dim * hidden;
        if index < w1_len {
            self.w1[index / hidden][index % hidden] = value;
        } else if index < w1_len + hidden {
            self.b1[index - w1_len] = value;
        } else if index < w1_len + 2 * hidden {
            self.w2[index - w1_len - hidden] = value;
        } else {
            self.b2 = value;
        }
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn config(&self) -> &MlpConfig {
        &self.config
    }

    pub fn hidden_units(&self) -> usize {
        self.b1.len()
    }

    #[cfg(test)]
    pub(crate) fn hand_built(
        w1: Vec<Vec<f64>>,
        b1: Vec<f64>,
        w2: Vec<f64>,
        b2: f64,
        feature_names: Vec<String>,
    ) -> Self {
        let dim = w1.len();
        MlpModel {
            config: MlpConfig::default(),
            feature_names,
            w1,
            b1,
            w2,
            b2,
            feature_means: vec![0.0; dim],
            feature_stds: vec![1.0; dim],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::DatasetRow;
    use rand::Rng;

    fn dataset_from(features: Vec<Vec<f64>>, targets: Vec<f64>, dim: usize) -> Dataset {
        let names = (0..dim).map(|i| format!("f{i}")).collect();
        let rows = features
            .into_iter()
            .zip(targets)
            .enumerate()
            .map(|(i, (features, target_mos))| DatasetRow {
                condition_id: format!("c{i}"),
                features,
                target_mos,
                ci95_halfwidth: None,
            })
            .collect();
        Dataset::new(names, rows).unwrap()
    }

    fn random_dataset(seed: u64, n: usize, dim: usize) -> Dataset {
        let mut rng = crate::rng::rng_for(seed, 50);
        let features = (0..n)
            .map(|_| (0..dim).map(|_| rng.random_range(-2.0..2.0)).collect())
            .collect();
        let targets = (0..n).map(|_| rng.random_range(1.0..5.0)).collect();
        dataset_from(features, targets, dim)
    }

    #[test]
    fn zero_iterations_is_rejected() {
        let ds = random_dataset(1, 5, 2);
        let config = MlpConfig {
            iterations: 0,
            ..MlpConfig::default()
        };
        assert!(matches!(
            train_mlp(&ds, &config),
            Err(ModelError::InvalidConfig(_))
        ));
    }

    #[test]
    fn constant_target_training_converges_toward_it() {
        let ds = dataset_from(
            (0..12).map(|i| vec![(i as f64) / 6.0 - 1.0]).collect(),
            vec![4.0; 12],
            1,
        );
        // loss strictly decreases over the first iteration
        let one_step = train_mlp(
            &ds,
            &MlpConfig {
                iterations: 1,
                ..MlpConfig::default()
            },
        )
        .unwrap();
        let init_like = MlpModel {
            config: one_step.config.clone(),
            ..train_mlp(
                &ds,
                &MlpConfig {
                    iterations: 1,
                    learning_rate: 1e-12,
                    ..MlpConfig::default()
                },
            )
            .unwrap()
        };
        assert!(one_step.loss(&ds) < init_like.loss(&ds));

        let trained = train_mlp(
            &ds,
            &MlpConfig {
                iterations: 2000,
                ..MlpConfig::default()
            },
        )
        .unwrap();
        for row in ds.rows() {
            let pred = trained.predict(&row.features).unwrap();
            assert!((pred - 4.0).abs() < 0.05, "prediction {pred} far from 4.0");
        }
    }

    #[test]
    fn gradients_match_central_finite_differences() {
        for seed in [3_u64, 17, 91] {
            let ds = random_dataset(seed, 5, 3);
            let model = train_mlp(
                &ds,
                &MlpConfig {
                    iterations: 1,
                    learning_rate: 1e-9,
                    seed,
                    ..MlpConfig::default()
                },
            )
            .unwrap();
            let analytic = model.gradients(&ds);
            let eps = 1e-5;
            for p in 0..model.param_count() {
                let mut probe = model.clone();
                let original = probe.param(p);
                probe.set_param(p, original + eps);
                let plus = probe.loss(&ds);
                probe.set_param(p, original - eps);
                let minus = probe.loss(&ds);
                let numeric = (plus - minus) / (2.0 * eps);
                let denom = analytic[p].abs().max(numeric.abs()).max(1e-8);
                let rel = (analytic[p] - numeric).abs() / denom;
                assert!(
                    rel < 1e-4,
                    "seed {seed} param {p}: analytic {} vs numeric {numeric} (rel {rel})",
                    analytic[p]
                );
            }
        }
    }

    #[test]
    fn zero_weights_predict_the_output_bias() {
        let model = MlpModel::hand_built(
            vec![vec![0.0, 0.0]],
            vec![0.0, 0.0],
            vec![0.0, 0.0],
            3.2,
            vec!["x".into()],
        );
        assert_eq!(model.predict(&[0.7]).unwrap(), 3.2);
        assert_eq!(model.predict(&[-51.0]).unwrap(), 3.2);
    }

    #[test]
    fn odd_symmetry_without_biases() {
        let model = MlpModel::hand_built(
            vec![vec![0.8, -0.3]],
            vec![0.0, 0.0],
            vec![1.1, 0.4]
            ,
            0.0,
            vec!["x".into()],
        );
        let y = model.predict(&[0.9]).unwrap();
        let y_neg = model.predict(&[-0.9]).unwrap();
        assert!((y + y_neg).abs() < 1e-12);
    }

    #[test]
    fn hand_built_single_unit_net_matches_tanh_arithmetic() {
        let model = MlpModel::hand_built(
            vec![vec![1.0]],
            vec![0.0],
            vec![2.0],
            1.0,
            vec!["x".into()],
        );
        let y = model.predict(&[0.5]).unwrap();
        assert!((y - 1.9242).abs() < 1e-4, "got {y}");
    }

    #[test]
    fn huge_learning_rate_diverges_with_nonfinite_loss() {
        let ds = random_dataset(5, 20, 2);
        let config = MlpConfig {
            learning_rate: 1e4,
            iterations: 200,
            ..MlpConfig::default()
        };
        assert!(matches!(
            train_mlp(&ds, &config),
            Err(ModelError::NonFiniteLoss { .. })
        ));
    }

    #[test]
    fn constant_feature_is_passed_as_zero() {
        let ds = dataset_from(
            (0..10).map(|i| vec![i as f64, 42.0]).collect(),
            (0..10).map(|i| 1.0 + (i as f64) / 3.0).collect(),
            2,
        );
        let model = train_mlp(&ds, &MlpConfig::default()).unwrap();
        // the constant column's value must not matter at all
        let a = model.predict(&[4.0, 42.0]).unwrap();
        let b = model.predict(&[4.0, -999.0]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn training_is_deterministic_for_a_seed() {
        let ds = random_dataset(8, 30, 4);
        let a = train_mlp(&ds, &MlpConfig::default().with_seed(2)).unwrap();
        let b = train_mlp(&ds, &MlpConfig::default().with_seed(2)).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn default_hidden_width_matches_input_dimension() {
        let ds = random_dataset(4, 15, 6);
        let model = train_mlp(&ds, &MlpConfig::default()).unwrap();
        assert_eq!(model.hidden_units(), 6);
        let narrow = train_mlp(
            &ds,
            &MlpConfig {
                hidden_units: Some(2),
                ..MlpConfig::default()
            },
        )
        .unwrap();
        assert_eq!(narrow.hidden_units(), 2);
    }
}
