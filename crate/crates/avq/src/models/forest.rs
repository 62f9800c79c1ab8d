//! Random Forest regression: bootstrap-resampled CART trees whose
//! predictions are averaged, plus mean-decrease-in-impurity feature
//! importance.

use super::tree::RegressionTree;
use super::ModelError;
use crate::dataset::Dataset;
use crate::rng::rng_for;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Forest training configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestConfig {
    /// Number of trees.
    pub n_trees: usize,
    /// Depth limit; `None` grows trees until purity.
    pub max_depth: Option<usize>,
    /// Features considered at each split; `None` uses all of them.
    pub features_per_split: Option<usize>,
    /// Resample the training set (size n, with replacement) per tree.
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            n_trees: 100,
            max_depth: None,
            features_per_split: None,
            bootstrap: true,
            seed: 0,
        }
    }
}

impl ForestConfig {
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    fn validate(&self, dim: usize) -> Result<(), ModelError> {
        if self.n_trees == 0 {
            return Err(ModelError::InvalidConfig("n_trees must be >= 1".into()));
        }
        if let Some(m) = self.features_per_split {
            if m == 0 || m > dim {
                return Err(ModelError::InvalidConfig(format!(
                    "features_per_split must be in 1..={dim}, got {m}"
                )));
            }
        }
        Ok(())
    }
}

/// One feature's share of the forest's impurity decrease.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureImportance {
    pub feature: String,
    pub importance: f64,
}

/// A trained forest. Immutable and safe to share across threads.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestModel {
    config: ForestConfig,
    feature_names: Vec<String>,
    trees: Vec<RegressionTree>,
    target_min: f64,
    target_max: f64,
}

/// Train a forest on the dataset. Each tree grows on its own bootstrap
/// resample drawn from a per-tree RNG seeded by `(config.seed, tree_index)`,
/// so trees can be built in any order (or concurrently) with identical
/// results.
pub fn train_forest(dataset: &Dataset, config: &ForestConfig) -> Result<ForestModel, ModelError> {
    if dataset.is_empty() {
        return Err(ModelError::EmptyDataset);
    }
    let dim = dataset.dim();
    config.validate(dim)?;

    let features: Vec<Vec<f64>> = dataset.rows().iter().map(|r| r.features.clone()).collect();
    let targets = dataset.targets();
    let n = targets.len();
    let features_per_split = config.features_per_split.unwrap_or(dim);

    let trees: Vec<RegressionTree> = (0..config.n_trees)
        .map(|tree_index| {
            let mut rng = rng_for(config.seed, tree_index as u64);
            let indices: Vec<usize> = if config.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            RegressionTree::fit(
                &features,
                &targets,
                &indices,
                dim,
                config.max_depth,
                features_per_split,
                &mut rng,
            )
        })
        .collect();

    let (target_min, target_max) = dataset.target_range();
    Ok(ForestModel {
        config: config.clone(),
        feature_names: dataset.feature_names().to_vec(),
        trees,
        target_min,
        target_max,
    })
}

impl ForestModel {
    /// Mean of the per-tree predictions. Always lies within the training
    /// target range, since every leaf value is a mean of training targets.
    pub fn predict(&self, x: &[f64]) -> Result<f64, ModelError> {
        if x.len() != self.feature_names.len() {
            return Err(ModelError::DimensionalityMismatch {
                expected: self.feature_names.len(),
                got: x.len(),
            });
        }
        let sum: f64 = self.trees.iter().map(|t| t.predict(x)).sum();
        Ok(sum / self.trees.len() as f64)
    }

    /// Mean decrease in impurity per feature: per-tree sums of weighted
    /// variance reductions, averaged across trees and normalized to sum
    /// to 1. All zeros when no tree ever split (constant targets).
    pub fn feature_importance(&self) -> Vec<FeatureImportance> {
        let dim = self.feature_names.len();
        let mut mean = vec![0.0; dim];
        for tree in &self.trees {
            for (m, s) in mean.iter_mut().zip(tree.importance_sums(dim)) {
                *m += s;
            }
        }
        for m in mean.iter_mut() {
            *m /= self.trees.len() as f64;
        }
        let total: f64 = mean.iter().sum();
        if total > 0.0 {
            for m in mean.iter_mut() {
                *m /= total;
            }
        }
        self.feature_names
            .iter()
            .zip(mean)
            .map(|(feature, importance)| FeatureImportance {
                feature: feature.clone(),
                importance,
            })
            .collect()
    }

    /// Importances sorted descending, ties by feature order.
    pub fn ranked_importance(&self) -> Vec<FeatureImportance> {
        let mut ranked = self.feature_importance();
        ranked.sort_by(|a, b| b.importance.total_cmp(&a.importance));
        ranked
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn config(&self) -> &ForestConfig {
        &self.config
    }

    pub fn trees(&self) -> &[RegressionTree] {
        &self.trees
    }

    /// (min, max) of the training targets.
    pub fn target_range(&self) -> (f64, f64) {
        (self.target_min, self.target_max)
    }

    #[cfg(test)]
    pub(crate) fn from_trees(trees: Vec<RegressionTree>, feature_names: Vec<String>) -> Self {
        ForestModel {
            config: ForestConfig::default(),
            feature_names,
            trees,
            target_min: f64::NAN,
            target_max: f64::NAN,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::DatasetRow;
    use crate::rng::rng_for;
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
        let mut rng = rng_for(seed, 99);
        let features = (0..n)
            .map(|_| (0..dim).map(|_| rng.random_range(0.0..10.0)).collect())
            .collect();
        let targets = (0..n).map(|_| rng.random_range(1.0..5.0)).collect();
        dataset_from(features, targets, dim)
    }

    #[test]
    fn constant_target_forest_predicts_the_constant_exactly() {
        let ds = dataset_from(
            (0..20).map(|i| vec![i as f64, (i * i) as f64]).collect(),
            vec![3.0; 20],
            2,
        );
        let model = train_forest(&ds, &ForestConfig::default()).unwrap();
        for row in ds.rows() {
            assert_eq!(model.predict(&row.features).unwrap(), 3.0);
        }
        assert_eq!(model.predict(&[123.0, -4.0]).unwrap(), 3.0);
    }

    #[test]
    fn single_tree_without_bootstrap_memorizes_training_data() {
        let targets = vec![1.0, 2.0, 3.0, 4.0, 5.0, 1.5, 2.5];
        let ds = dataset_from(
            (0..targets.len()).map(|i| vec![i as f64]).collect(),
            targets.clone(),
            1,
        );
        let config = ForestConfig {
            n_trees: 1,
            bootstrap: false,
            ..ForestConfig::default()
        };
        let model = train_forest(&ds, &config).unwrap();
        for row in ds.rows() {
            assert_eq!(model.predict(&row.features).unwrap(), row.target_mos);
        }
    }

    #[test]
    fn prediction_is_mean_of_tree_outputs() {
        // two stub trees that always answer 2.0 and 4.0
        let leaf = |value| {
            let ds = dataset_from(vec![vec![0.0]], vec![value], 1);
            train_forest(
                &ds,
                &ForestConfig {
                    n_trees: 1,
                    ..ForestConfig::default()
                },
            )
            .unwrap()
            .trees()[0]
                .clone()
        };
        let model = ForestModel::from_trees(vec![leaf(2.0), leaf(4.0)], vec!["f0".into()]);
        assert_eq!(model.predict(&[0.0]).unwrap(), 3.0);
    }

    #[test]
    fn predictions_bounded_by_training_target_range() {
        let ds = random_dataset(7, 60, 4);
        let model = train_forest(&ds, &ForestConfig::default().with_seed(3)).unwrap();
        let (lo, hi) = ds.target_range();
        let mut rng = rng_for(1, 1);
        for _ in 0..500 {
            let x: Vec<f64> = (0..4).map(|_| rng.random_range(-100.0..100.0)).collect();
            let pred = model.predict(&x).unwrap();
            assert!(pred >= lo && pred <= hi, "{pred} outside [{lo}, {hi}]");
        }
    }

    #[test]
    fn single_informative_feature_takes_all_importance() {
        let ds = dataset_from(
            (0..30).map(|i| vec![i as f64]).collect(),
            (0..30).map(|i| 1.0 + (i as f64) / 10.0).collect(),
            1,
        );
        let model = train_forest(&ds, &ForestConfig::default()).unwrap();
        let imp = model.feature_importance();
        assert_eq!(imp.len(), 1);
        assert!((imp[0].importance - 1.0).abs() < 1e-12);
    }

    #[test]
    fn importances_are_nonnegative_and_sum_to_one() {
        let ds = random_dataset(11, 80, 5);
        let model = train_forest(&ds, &ForestConfig::default().with_seed(5)).unwrap();
        let imp = model.feature_importance();
        assert!(imp.iter().all(|f| f.importance >= 0.0));
        let total: f64 = imp.iter().map(|f| f.importance).sum();
        assert!((total - 1.0).abs() < 1e-9, "sum = {total}");
    }

    #[test]
    fn training_is_deterministic_for_a_seed() {
        let ds = random_dataset(2, 40, 3);
        let a = train_forest(&ds, &ForestConfig::default().with_seed(9)).unwrap();
        let b = train_forest(&ds, &ForestConfig::default().with_seed(9)).unwrap();
        assert_eq!(
            serde_json::to_string(&a).unwrap(),
            serde_json::to_string(&b).unwrap()
        );
    }

    #[test]
    fn duplicated_feature_does_not_change_predictions() {
        // appending a copy of feature 0 (and a constant) leaves every split
        // tie-broken back to the original columns
        let base = random_dataset(21, 50, 2);
        let augmented_rows: Vec<DatasetRow> = base
            .rows()
            .iter()
            .map(|r| {
                let mut features = r.features.clone();
                features.push(r.features[0]);
                features.push(7.0);
                DatasetRow {
                    condition_id: r.condition_id.clone(),
                    features,
                    target_mos: r.target_mos,
                    ci95_halfwidth: None,
                }
            })
            .collect();
        let augmented = Dataset::new(
            vec!["f0".into(), "f1".into(), "f0_copy".into(), "const".into()],
            augmented_rows,
        )
        .unwrap();

        let config = ForestConfig::default().with_seed(4);
        let model_base = train_forest(&base, &config).unwrap();
        let model_aug = train_forest(&augmented, &config).unwrap();
        for row in base.rows() {
            let mut x = row.features.clone();
            x.push(row.features[0]);
            x.push(7.0);
            assert_eq!(
                model_base.predict(&row.features).unwrap(),
                model_aug.predict(&x).unwrap()
            );
        }
        let imp = model_aug.feature_importance();
        assert_eq!(imp[2].importance, 0.0, "copy must lose every tie");
        assert_eq!(imp[3].importance, 0.0, "constant never splits");
    }

    #[test]
    fn empty_dataset_is_rejected() {
        let ds = Dataset::new(vec!["x".into()], vec![]).unwrap();
        assert!(matches!(
            train_forest(&ds, &ForestConfig::default()),
            Err(ModelError::EmptyDataset)
        ));
    }

    #[test]
    fn dimensionality_mismatch_is_rejected() {
        let ds = random_dataset(1, 10, 2);
        let model = train_forest(&ds, &ForestConfig::default()).unwrap();
        assert!(matches!(
            model.predict(&[1.0]),
            Err(ModelError::DimensionalityMismatch { expected: 2, got: 1 })
        ));
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let ds = random_dataset(1, 10, 2);
        let zero_trees = ForestConfig {
            n_trees: 0,
            ..ForestConfig::default()
        };
        assert!(matches!(
            train_forest(&ds, &zero_trees),
            Err(ModelError::InvalidConfig(_))
        ));
        let too_many_features = ForestConfig {
            features_per_split: Some(3),
            ..ForestConfig::default()
        };
        assert!(matches!(
            train_forest(&ds, &too_many_features),
            Err(ModelError::InvalidConfig(_))
        ));
    }

    #[test]
    fn feature_subsetting_still_trains() {
        let ds = random_dataset(13, 40, 5);
        let config = ForestConfig {
            features_per_split: Some(2),
            seed: 8,
            ..ForestConfig::default()
        };
        let model = train_forest(&ds, &config).unwrap();
        let (lo, hi) = ds.target_range();
        for row in ds.rows() {
            let pred = model.predict(&row.features).unwrap();
            assert!(pred >= lo && pred <= hi);
        }
    }
}
