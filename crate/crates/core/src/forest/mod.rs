//! Random-forest regression, an OLS baseline and permutation importance.
//!
//! A forest prediction is the plain mean of its trees' predictions. Trees are
//! grown on bootstrap resamples with squared-error splits over a random
//! feature subset at every node. Each tree draws from its own ChaCha stream
//! keyed by the tree index, so training order (serial or parallel) does not
//! change the result.

mod importance;
mod linear;
mod tree;

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use importance::{permutation_importance, write_importance_csv, FeatureImportance};
pub use linear::{fit_linear, LinearModel};
pub use tree::{Node, RegressionTree};

use tree::TreeParams;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    features: Vec<Vec<f64>>,
    target: Vec<f64>,
    feature_names: Vec<String>,
}

impl Dataset {
    /// `features` is row-major: one inner vector per sample.
    pub fn new(features: Vec<Vec<f64>>, target: Vec<f64>, feature_names: Vec<String>) -> Result<Self> {
        if features.len() != target.len() {
            return Err(Error::validation(format!(
                "{} feature rows but {} targets",
                features.len(),
                target.len()
            )));
        }
        if target.len() < 2 {
            return Err(Error::validation(format!(
                "dataset needs at least 2 samples, got {}",
                target.len()
            )));
        }
        let width = feature_names.len();
        if width == 0 {
            return Err(Error::validation("dataset needs at least one feature"));
        }
        for (i, row) in features.iter().enumerate() {
            if row.len() != width {
                return Err(Error::validation(format!(
                    "row {i} has {} features, expected {width}",
                    row.len()
                )));
            }
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::validation(format!("row {i} has a non-finite feature")));
            }
        }
        if let Some(i) = target.iter().position(|v| !v.is_finite()) {
            return Err(Error::validation(format!("target {i} is not finite")));
        }
        Ok(Self {
            features,
            target,
            feature_names,
        })
    }

    pub fn features(&self) -> &[Vec<f64>] {
        &self.features
    }

    pub fn target(&self) -> &[f64] {
        &self.target
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn n_samples(&self) -> usize {
        self.target.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn is_target_constant(&self) -> bool {
        self.target.iter().all(|v| *v == self.target[0])
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<&str> = self.feature_names.iter().map(String::as_str).collect();
        header.push("target");
        w.write_record(&header)?;
        for (row, y) in self.features.iter().zip(&self.target) {
            let mut record: Vec<String> = row.iter().map(f64::to_string).collect();
            record.push(y.to_string());
            w.write_record(&record)?;
        }
        w.flush().map_err(|e| Error::Csv(e.into()))?;
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    /// `None` means ceil(n_features / 3).
    pub features_per_split: Option<usize>,
    pub bootstrap: bool,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            n_trees: 100,
            max_depth: 8,
            min_samples_leaf: 2,
            features_per_split: None,
            bootstrap: true,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn resolved_features_per_split(&self, n_features: usize) -> usize {
        self.features_per_split
            .unwrap_or_else(|| n_features.div_ceil(3))
    }

    fn validate(&self, n_features: usize) -> Result<()> {
        if self.n_trees == 0 {
            return Err(Error::Training("n_trees must be at least 1".into()));
        }
        if self.max_depth == 0 {
            return Err(Error::Training("max_depth must be at least 1".into()));
        }
        if self.min_samples_leaf == 0 {
            return Err(Error::Training("min_samples_leaf must be at least 1".into()));
        }
        let k = self.resolved_features_per_split(n_features);
        if k == 0 || k > n_features {
            return Err(Error::Training(format!(
                "features_per_split must lie in [1, {n_features}], got {k}"
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    trees: Vec<RegressionTree>,
    seed: u64,
    config: TrainConfig,
    n_features: usize,
}

impl Forest {
    pub fn trees(&self) -> &[RegressionTree] {
        &self.trees
    }

    pub fn config(&self) -> &TrainConfig {
        &self.config
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    /// Mean of the tree predictions.
    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.n_features {
            return Err(Error::invalid(format!(
                "feature vector has length {}, forest expects {}",
                x.len(),
                self.n_features
            )));
        }
        Ok(self.predict_unchecked(x))
    }

    pub(crate) fn predict_unchecked(&self, x: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.predict(x)).sum::<f64>() / self.trees.len() as f64
    }

    /// Assembles a forest from already-grown trees sharing one feature width.
    pub fn from_trees(trees: Vec<RegressionTree>, config: TrainConfig) -> Result<Self> {
        let n_features = trees
            .first()
            .ok_or_else(|| Error::invalid("a forest needs at least one tree"))?
            .n_features();
        if trees.iter().any(|t| t.n_features() != n_features) {
            return Err(Error::invalid("trees disagree on feature count"));
        }
        Ok(Self {
            seed: config.seed,
            config: TrainConfig {
                n_trees: trees.len(),
                ..config
            },
            trees,
            n_features,
        })
    }
}

/// RNG for tree `index` of a forest seeded with `seed`.
fn tree_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

pub fn fit_forest(data: &Dataset, config: &TrainConfig) -> Result<Forest> {
    if data.n_samples() < 2 {
        return Err(Error::Training(format!(
            "need at least 2 samples, got {}",
            data.n_samples()
        )));
    }
    config.validate(data.n_features())?;
    let params = TreeParams {
        max_depth: config.max_depth,
        min_samples_leaf: config.min_samples_leaf,
        features_per_split: config.resolved_features_per_split(data.n_features()),
    };
    let n = data.n_samples();
    let trees: Vec<RegressionTree> = (0..config.n_trees)
        .into_par_iter()
        .map(|i| {
            let mut rng = tree_rng(config.seed, i);
            let sample: Vec<usize> = if config.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            RegressionTree::fit(data.features(), data.target(), sample, params, &mut rng)
        })
        .collect();
    Ok(Forest {
        trees,
        seed: config.seed,
        config: *config,
        n_features: data.n_features(),
    })
}

/// Mean squared error of the forest over a feature matrix.
pub fn mean_squared_error(forest: &Forest, features: &[Vec<f64>], target: &[f64]) -> f64 {
    features
        .iter()
        .zip(target)
        .map(|(x, y)| (forest.predict_unchecked(x) - y).powi(2))
        .sum::<f64>()
        / target.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp(n: usize) -> Dataset {
        let x: Vec<Vec<f64>> = (0..n).map(|i| vec![i as f64, ((i * 13) % 7) as f64]).collect();
        let y: Vec<f64> = (0..n).map(|i| (i as f64).sqrt()).collect();
        Dataset::new(x, y, vec!["a".into(), "b".into()]).unwrap()
    }

    #[test]
    fn dataset_validation() {
        assert!(Dataset::new(vec![vec![1.0]], vec![1.0], vec!["a".into()]).is_err());
        assert!(Dataset::new(vec![vec![1.0]; 2], vec![1.0; 3], vec!["a".into()]).is_err());
        assert!(Dataset::new(vec![vec![1.0], vec![f64::NAN]], vec![1.0; 2], vec!["a".into()]).is_err());
        assert!(Dataset::new(vec![vec![1.0], vec![1.0, 2.0]], vec![1.0; 2], vec!["a".into()]).is_err());
    }

    #[test]
    fn constant_target_predicts_constant() {
        let x: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64]).collect();
        let data = Dataset::new(x, vec![7.0; 20], vec!["a".into()]).unwrap();
        let forest = fit_forest(&data, &TrainConfig { n_trees: 10, ..Default::default() }).unwrap();
        for tree in forest.trees() {
            assert_eq!(tree.n_leaves(), 1);
        }
        for x in [-3.0, 0.0, 5.5, 100.0] {
            assert_eq!(forest.predict(&[x]).unwrap(), 7.0);
        }
    }

    #[test]
    fn memorizing_tree() {
        let data = ramp(30);
        let cfg = TrainConfig {
            n_trees: 1,
            bootstrap: false,
            min_samples_leaf: 1,
            max_depth: 64,
            features_per_split: Some(2),
            seed: 1,
        };
        let forest = fit_forest(&data, &cfg).unwrap();
        for (x, y) in data.features().iter().zip(data.target()) {
            assert_eq!(forest.predict(x).unwrap(), *y);
        }
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let data = ramp(40);
        let cfg = TrainConfig { n_trees: 16, seed: 9, ..Default::default() };
        assert_eq!(fit_forest(&data, &cfg).unwrap(), fit_forest(&data, &cfg).unwrap());
        let other = fit_forest(&data, &TrainConfig { seed: 10, ..cfg }).unwrap();
        assert_ne!(fit_forest(&data, &cfg).unwrap().trees(), other.trees());
    }

    #[test]
    fn predict_averages_trees() {
        let x: Vec<Vec<f64>> = vec![vec![0.0], vec![1.0]];
        let four = Dataset::new(x.clone(), vec![4.0, 4.0], vec!["a".into()]).unwrap();
        let six = Dataset::new(x, vec![6.0, 6.0], vec!["a".into()]).unwrap();
        let cfg = TrainConfig { n_trees: 1, bootstrap: false, ..Default::default() };
        let t4 = fit_forest(&four, &cfg).unwrap().trees()[0].clone();
        let t6 = fit_forest(&six, &cfg).unwrap().trees()[0].clone();
        let pair = Forest::from_trees(vec![t4.clone(), t6], cfg).unwrap();
        assert_eq!(pair.predict(&[0.3]).unwrap(), 5.0);
        let same = Forest::from_trees(vec![t4.clone(), t4.clone(), t4.clone()], cfg).unwrap();
        assert_eq!(same.predict(&[0.3]).unwrap(), t4.predict(&[0.3]));
    }

    #[test]
    fn dimension_mismatch() {
        let forest = fit_forest(&ramp(10), &TrainConfig { n_trees: 2, ..Default::default() }).unwrap();
        assert!(forest.predict(&[1.0]).is_err());
    }

    #[test]
    fn config_errors() {
        let data = ramp(10);
        for cfg in [
            TrainConfig { n_trees: 0, ..Default::default() },
            TrainConfig { max_depth: 0, ..Default::default() },
            TrainConfig { min_samples_leaf: 0, ..Default::default() },
            TrainConfig { features_per_split: Some(3), ..Default::default() },
            TrainConfig { features_per_split: Some(0), ..Default::default() },
        ] {
            assert!(matches!(fit_forest(&data, &cfg), Err(Error::Training(_))), "{cfg:?}");
        }
        assert_eq!(TrainConfig::default().resolved_features_per_split(3), 1);
        assert_eq!(TrainConfig::default().resolved_features_per_split(4), 2);
    }
}
