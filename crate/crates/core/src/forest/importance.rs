//! Permutation feature importance.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{mean_squared_error, Dataset, Forest};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureImportance {
    pub feature: String,
    /// Mean increase in MSE when the column is shuffled.
    pub importance: f64,
}

/// Increase in forest MSE when each column is shuffled, averaged over
/// `repeats` shuffles. Sorted by importance, highest first; equal scores keep
/// column order.
pub fn permutation_importance(
    forest: &Forest,
    data: &Dataset,
    repeats: usize,
    seed: u64,
) -> Result<Vec<FeatureImportance>> {
    if repeats == 0 {
        return Err(Error::invalid("repeats must be at least 1"));
    }
    if data.n_features() != forest.n_features() {
        return Err(Error::invalid(format!(
            "dataset has {} features, forest expects {}",
            data.n_features(),
            forest.n_features()
        )));
    }
    let baseline = mean_squared_error(forest, data.features(), data.target());

    let mut result = Vec::with_capacity(data.n_features());
    let mut shuffled: Vec<Vec<f64>> = data.features().to_vec();
    for k in 0..data.n_features() {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(k as u64);
        let original: Vec<f64> = data.features().iter().map(|row| row[k]).collect();
        let mut column = original.clone();
        let mut total = 0.0;
        for _ in 0..repeats {
            column.copy_from_slice(&original);
            column.shuffle(&mut rng);
            for (row, v) in shuffled.iter_mut().zip(&column) {
                row[k] = *v;
            }
            total += mean_squared_error(forest, &shuffled, data.target()) - baseline;
        }
        for (row, v) in shuffled.iter_mut().zip(&original) {
            row[k] = *v;
        }
        result.push(FeatureImportance {
            feature: data.feature_names()[k].clone(),
            importance: total / repeats as f64,
        });
    }
    result.sort_by(|a, b| b.importance.total_cmp(&a.importance));
    Ok(result)
}

/// `feature,importance` CSV, in the order given.
pub fn write_importance_csv<W: Write>(writer: W, importances: &[FeatureImportance]) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["feature", "importance"])?;
    for fi in importances {
        w.write_record([fi.feature.clone(), fi.importance.to_string()])?;
    }
    w.flush().map_err(|e| Error::Csv(e.into()))?;
    Ok(())
}
