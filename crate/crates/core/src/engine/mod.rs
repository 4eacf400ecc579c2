//! Fitting, generation and imputation.
//!
//! A model holds one boosted classifier per feature. Each classifier predicts
//! its feature's class (bin or category) from any subset of the other
//! features. Generation fills a blank row one feature at a time in a random
//! order; imputation does the same over a row's missing cells only, with the
//! observed cells as fixed context.

mod format;
mod sampling;

pub use format::{load_model, save_model, FORMAT_VERSION, MAGIC};
pub use sampling::{nucleus, nucleus_sample};

use rayon::prelude::*;

use crate::coding::FeatureCoding;
use crate::dataset::{Schema, TabularDataset};
use crate::error::{Error, Result};
use crate::gbdt::{BoostedClassifier, GbdtParams};
use crate::masker;
use crate::rng::{self, Domain};

#[derive(Debug, Clone, PartialEq)]
pub struct EngineConfig {
    pub n_bins: usize,
    pub top_p: f64,
    pub k_dup: usize,
    pub alpha: f64,
    pub tree: GbdtParams,
    /// Seeds the training-set orders. Generation and imputation take their
    /// own seeds.
    pub seed: u64,
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig {
            n_bins: 20,
            top_p: 0.9,
            k_dup: 50,
            alpha: 1.0,
            tree: GbdtParams::default(),
            seed: 0,
        }
    }
}

impl EngineConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(Error::Argument(format!("top_p must be in (0, 1], got {}", self.top_p)));
        }
        if self.n_bins == 0 {
            return Err(Error::Argument("n_bins must be at least 1".into()));
        }
        if self.k_dup == 0 {
            return Err(Error::Argument("k_dup must be at least 1".into()));
        }
        if !(self.alpha >= 0.0 && self.alpha.is_finite()) {
            return Err(Error::Argument(format!("alpha must be >= 0, got {}", self.alpha)));
        }
        self.tree.validate()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UnmaskingModel {
    schema: Schema,
    codings: Vec<FeatureCoding>,
    classifiers: Vec<BoostedClassifier>,
    marginals: Vec<Vec<f64>>,
    config: EngineConfig,
    train_ranges: Vec<(f64, f64)>,
}

impl UnmaskingModel {
    /// Assembles a model from its parts, checking they agree.
    pub fn from_parts(
        schema: Schema,
        codings: Vec<FeatureCoding>,
        classifiers: Vec<BoostedClassifier>,
        marginals: Vec<Vec<f64>>,
        config: EngineConfig,
        train_ranges: Vec<(f64, f64)>,
    ) -> Result<Self> {
        let d = schema.len();
        if codings.len() != d || classifiers.len() != d || marginals.len() != d || train_ranges.len() != d {
            return Err(Error::Malformed(format!("model parts do not all cover {d} features")));
        }
        for j in 0..d {
            let c = codings[j].n_classes();
            if classifiers[j].n_classes() != c || marginals[j].len() != c {
                return Err(Error::Malformed(format!("feature {j}: class counts disagree")));
            }
            if classifiers[j].n_features() != d {
                return Err(Error::Malformed(format!("feature {j}: classifier input width")));
            }
            let total: f64 = marginals[j].iter().sum();
            if (total - 1.0).abs() > 1e-9 || marginals[j].iter().any(|p| p.is_nan() || *p < 0.0) {
                return Err(Error::Malformed(format!("feature {j}: marginal is not a distribution")));
            }
            let kind_ok = match (&codings[j], schema.field(j).kind.is_categorical()) {
                (FeatureCoding::Categorical { cardinality }, true) => {
                    Some(*cardinality) == schema.field(j).kind.cardinality()
                }
                (FeatureCoding::Binned(_) | FeatureCoding::Constant(_), false) => true,
                _ => false,
            };
            if !kind_ok {
                return Err(Error::Malformed(format!("feature {j}: coding does not match its kind")));
            }
        }
        config.validate().map_err(|e| Error::Malformed(e.to_string()))?;
        Ok(UnmaskingModel {
            schema,
            codings,
            classifiers,
            marginals,
            config,
            train_ranges,
        })
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn n_features(&self) -> usize {
        self.schema.len()
    }

    pub fn codings(&self) -> &[FeatureCoding] {
        &self.codings
    }

    pub fn classifiers(&self) -> &[BoostedClassifier] {
        &self.classifiers
    }

    /// Training class frequencies per feature.
    pub fn marginals(&self) -> &[Vec<f64>] {
        &self.marginals
    }

    pub fn config(&self) -> &EngineConfig {
        &self.config
    }

    /// Observed (min, max) per feature in the training data.
    pub fn train_ranges(&self) -> &[(f64, f64)] {
        &self.train_ranges
    }

    /// Class probabilities for feature `j` given a partial row.
    pub fn class_probs(&self, j: usize, row: &[Option<f64>]) -> Result<Vec<f64>> {
        let clf = &self.classifiers[j];
        if clf.constant_class().is_some() {
            Ok(self.marginals[j].clone())
        } else {
            clf.predict_proba(row)
        }
    }

    /// Fills `row[j]` for each `j` in `order`, in that order, drawing feature
    /// `j`'s randomness from `draw_stream(j)`.
    fn fill(
        &self,
        row: &mut [Option<f64>],
        order: &[usize],
        draw_stream: impl Fn(usize) -> rand_chacha::ChaCha8Rng,
    ) -> Result<()> {
        for &j in order {
            let probs = self.class_probs(j, row)?;
            let mut r = draw_stream(j);
            let class = nucleus_sample(&probs, self.config.top_p, &mut r)?;
            row[j] = Some(self.codings[j].decode(class as u32, &mut r)?);
        }
        Ok(())
    }
}

pub fn fit(data: &TabularDataset, config: &EngineConfig) -> Result<UnmaskingModel> {
    config.validate()?;
    if data.n_rows() < 2 {
        return Err(Error::Argument(format!("need at least 2 rows to fit, got {}", data.n_rows())));
    }
    let d = data.n_features();
    let codings = (0..d)
        .map(|j| FeatureCoding::fit(data, j, config.n_bins, config.alpha))
        .collect::<Result<Vec<_>>>()?;

    let mut marginals = Vec::with_capacity(d);
    let mut train_ranges = Vec::with_capacity(d);
    for (j, coding) in codings.iter().enumerate() {
        let values = data.observed_values(j);
        let mut counts = vec![0usize; coding.n_classes()];
        for &v in &values {
            counts[coding.encode(v) as usize] += 1;
        }
        marginals.push(counts.iter().map(|&c| c as f64 / values.len() as f64).collect());
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        train_ranges.push((lo, hi));
    }

    let sets = masker::build_training_sets(data, &codings, config.k_dup, config.seed)?;
    let classifiers = sets
        .into_par_iter()
        .zip(codings.par_iter())
        .map(|(set, coding)| BoostedClassifier::fit(&set.x, &set.y, coding.n_classes(), &config.tree))
        .collect::<Result<Vec<_>>>()?;

    UnmaskingModel::from_parts(
        data.schema().clone(),
        codings,
        classifiers,
        marginals,
        config.clone(),
        train_ranges,
    )
}

/// Draws `n` fully observed rows.
pub fn generate(model: &UnmaskingModel, n: usize, seed: u64) -> Result<TabularDataset> {
    let d = model.n_features();
    let rows = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut r = rng::stream(seed, Domain::GenerateOrder, &[i as u64]);
            let order = rng::permutation(&mut r, d);
            let mut row = vec![None; d];
            model.fill(&mut row, &order, |j| {
                rng::stream(seed, Domain::GenerateDraw, &[i as u64, j as u64])
            })?;
            Ok(row)
        })
        .collect::<Result<Vec<_>>>()?;
    TabularDataset::from_rows(model.schema.clone(), &rows)
}

/// Produces `m` completions of `data`. Observed cells are copied unchanged;
/// each missing cell is sampled conditionally on the observed cells and on
/// the missing cells already filled, in a random order per row.
pub fn impute(model: &UnmaskingModel, data: &TabularDataset, m: usize, seed: u64) -> Result<Vec<TabularDataset>> {
    if m == 0 {
        return Err(Error::Argument("number of imputations must be at least 1".into()));
    }
    if !model.schema.is_compatible(data.schema()) {
        return Err(Error::Argument("data schema does not match the model schema".into()));
    }
    (0..m)
        .map(|rep| {
            let rows = (0..data.n_rows())
                .into_par_iter()
                .map(|i| {
                    let mut row = data.row(i);
                    let mut missing: Vec<usize> = (0..row.len()).filter(|&j| row[j].is_none()).collect();
                    if missing.is_empty() {
                        return Ok(row);
                    }
                    let mut r = rng::stream(seed, Domain::ImputeOrder, &[rep as u64, i as u64]);
                    rng::shuffle(&mut r, &mut missing);
                    model.fill(&mut row, &missing, |j| {
                        rng::stream(seed, Domain::ImputeDraw, &[rep as u64, i as u64, j as u64])
                    })?;
                    Ok(row)
                })
                .collect::<Result<Vec<_>>>()?;
            TabularDataset::from_rows(data.schema().clone(), &rows)
        })
        .collect()
}
