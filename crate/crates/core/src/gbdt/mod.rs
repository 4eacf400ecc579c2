//! Histogram-based gradient-boosted trees for multiclass classification.
//!
//! Each boosting round fits one regression tree per class to the softmax
//! gradients using second-order (Newton) leaf values. Missing inputs are
//! first-class: every split learns a default direction by trying the missing
//! rows on both sides, so a fully missing input row still reaches a leaf in
//! every tree. Categorical inputs are consumed as ordinal integer codes.

mod builder;
mod matrix;
mod objective;
mod tree;

pub use matrix::FeatureMatrix;
pub use objective::{log_loss, softmax, softmax_grad_hess, HESSIAN_FLOOR};
pub use tree::{Tree, TreeNode};

use rayon::prelude::*;

use crate::error::{Error, Result};
use builder::TreeBuilder;
use matrix::BinnedMatrix;

// Pseudo-count for classes absent from the training labels.
const PRIOR_EPS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GbdtParams {
    pub rounds: usize,
    pub learning_rate: f64,
    pub max_depth: usize,
    pub min_child_weight: f64,
    pub lambda: f64,
    pub n_hist_bins: usize,
    /// Use every midpoint between distinct values as a split candidate.
    /// Slow; meant for checking the histogram path on small inputs.
    pub exact: bool,
}

impl Default for GbdtParams {
    fn default() -> Self {
        GbdtParams {
            rounds: 100,
            learning_rate: 0.3,
            max_depth: 6,
            min_child_weight: 1.0,
            lambda: 1.0,
            n_hist_bins: 256,
            exact: false,
        }
    }
}

impl GbdtParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Argument(format!("learning_rate must be positive, got {}", self.learning_rate)));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Argument(format!("lambda must be >= 0, got {}", self.lambda)));
        }
        if !(self.min_child_weight >= 0.0 && self.min_child_weight.is_finite()) {
            return Err(Error::Argument(format!(
                "min_child_weight must be >= 0, got {}",
                self.min_child_weight
            )));
        }
        if self.n_hist_bins < 2 {
            return Err(Error::Argument("n_hist_bins must be at least 2".into()));
        }
        Ok(())
    }
}

/// Multiclass boosted tree ensemble. Trees are stored round-major:
/// `trees[r * n_classes + c]` is round `r`'s tree for class `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoostedClassifier {
    n_classes: usize,
    n_features: usize,
    params: GbdtParams,
    base_score: Vec<f64>,
    trees: Vec<Tree>,
    /// Set when training saw a single class; that class is then certain.
    constant_class: Option<u32>,
}

impl BoostedClassifier {
    /// Fits the ensemble to `labels`, each in `0..n_classes`.
    pub fn fit(x: &FeatureMatrix, labels: &[u32], n_classes: usize, params: &GbdtParams) -> Result<Self> {
        Self::fit_inner(x, labels, n_classes, params, false).map(|(m, _)| m)
    }

    /// Like [`fit`](Self::fit), also returning the mean training log-loss
    /// before the first round and after every round.
    pub fn fit_with_history(
        x: &FeatureMatrix,
        labels: &[u32],
        n_classes: usize,
        params: &GbdtParams,
    ) -> Result<(Self, Vec<f64>)> {
        Self::fit_inner(x, labels, n_classes, params, true)
    }

    fn fit_inner(
        x: &FeatureMatrix,
        labels: &[u32],
        n_classes: usize,
        params: &GbdtParams,
        track: bool,
    ) -> Result<(Self, Vec<f64>)> {
        params.validate()?;
        let n = x.n_rows();
        if n == 0 {
            return Err(Error::Argument("cannot fit a classifier on zero rows".into()));
        }
        if labels.len() != n {
            return Err(Error::Argument(format!("{} labels for {n} rows", labels.len())));
        }
        if n_classes == 0 {
            return Err(Error::Argument("n_classes must be positive".into()));
        }
        if let Some(&bad) = labels.iter().find(|&&y| y as usize >= n_classes) {
            return Err(Error::Argument(format!("label {bad} out of range for {n_classes} classes")));
        }

        let mut counts = vec![0usize; n_classes];
        for &y in labels {
            counts[y as usize] += 1;
        }
        let base_score: Vec<f64> = counts
            .iter()
            .map(|&c| ((c as f64 + PRIOR_EPS) / (n as f64 + n_classes as f64 * PRIOR_EPS)).ln())
            .collect();
        let mut model = BoostedClassifier {
            n_classes,
            n_features: x.n_cols(),
            params: params.clone(),
            base_score,
            trees: Vec::with_capacity(params.rounds * n_classes),
            constant_class: None,
        };
        let seen = counts.iter().filter(|&&c| c > 0).count();
        if seen == 1 {
            model.constant_class = Some(labels[0]);
            return Ok((model, Vec::new()));
        }

        let binned = BinnedMatrix::new(x, params.n_hist_bins, params.exact);
        let mut scores: Vec<f64> = (0..n).flat_map(|_| model.base_score.iter().copied()).collect();
        let mut history = Vec::new();
        if track {
            history.push(mean_log_loss(&scores, labels, n_classes));
        }
        let mut grad = vec![vec![0.0; n]; n_classes];
        let mut hess = vec![vec![0.0; n]; n_classes];
        let mut probs = vec![0.0; n_classes];
        for _ in 0..params.rounds {
            for i in 0..n {
                probs.copy_from_slice(&scores[i * n_classes..(i + 1) * n_classes]);
                objective::softmax_in_place(&mut probs);
                let y = labels[i] as usize;
                for c in 0..n_classes {
                    let p = probs[c];
                    grad[c][i] = if c == y { p - 1.0 } else { p };
                    hess[c][i] = (p * (1.0 - p)).max(HESSIAN_FLOOR);
                }
            }
            let round: Vec<(Tree, Vec<f64>)> = (0..n_classes)
                .into_par_iter()
                .map(|c| {
                    let mut delta = vec![0.0; n];
                    let tree = TreeBuilder::new(&binned, &grad[c], &hess[c], params).build(&mut delta);
                    (tree, delta)
                })
                .collect();
            for (c, (tree, delta)) in round.into_iter().enumerate() {
                for (i, d) in delta.into_iter().enumerate() {
                    scores[i * n_classes + c] += d;
                }
                model.trees.push(tree);
            }
            if track {
                history.push(mean_log_loss(&scores, labels, n_classes));
            }
        }
        Ok((model, history))
    }

    /// Reassembles a fitted model, e.g. from a model file.
    pub fn from_parts(
        n_classes: usize,
        n_features: usize,
        params: GbdtParams,
        base_score: Vec<f64>,
        trees: Vec<Tree>,
        constant_class: Option<u32>,
    ) -> Result<Self> {
        if n_classes == 0 || base_score.len() != n_classes {
            return Err(Error::Malformed("base score length does not match class count".into()));
        }
        if trees.len() % n_classes != 0 {
            return Err(Error::Malformed("tree count is not a multiple of the class count".into()));
        }
        if let Some(f) = trees.iter().filter_map(Tree::max_feature).max() {
            if f as usize >= n_features {
                return Err(Error::Malformed(format!("tree splits on feature {f} of {n_features}")));
            }
        }
        if constant_class.is_some_and(|c| c as usize >= n_classes) {
            return Err(Error::Malformed("constant class out of range".into()));
        }
        if base_score.iter().any(|b| !b.is_finite()) {
            return Err(Error::Malformed("base score is not finite".into()));
        }
        Ok(BoostedClassifier {
            n_classes,
            n_features,
            params,
            base_score,
            trees,
            constant_class,
        })
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn params(&self) -> &GbdtParams {
        &self.params
    }

    pub fn base_score(&self) -> &[f64] {
        &self.base_score
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    /// Number of completed boosting rounds.
    pub fn rounds(&self) -> usize {
        self.trees.len() / self.n_classes
    }

    pub fn constant_class(&self) -> Option<u32> {
        self.constant_class
    }

    /// Raw per-class scores: base score plus every tree's contribution.
    pub fn predict_scores(&self, x: &[Option<f64>]) -> Result<Vec<f64>> {
        if x.len() != self.n_features {
            return Err(Error::Argument(format!(
                "input has {} features, model expects {}",
                x.len(),
                self.n_features
            )));
        }
        let mut scores = self.base_score.clone();
        for round in self.trees.chunks(self.n_classes) {
            for (s, tree) in scores.iter_mut().zip(round) {
                *s += tree.predict(x);
            }
        }
        Ok(scores)
    }

    /// Class probabilities for one input row; `None` cells are missing.
    pub fn predict_proba(&self, x: &[Option<f64>]) -> Result<Vec<f64>> {
        if let Some(c) = self.constant_class {
            if x.len() != self.n_features {
                return Err(Error::Argument(format!(
                    "input has {} features, model expects {}",
                    x.len(),
                    self.n_features
                )));
            }
            let mut p = vec![0.0; self.n_classes];
            p[c as usize] = 1.0;
            return Ok(p);
        }
        let mut scores = self.predict_scores(x)?;
        objective::softmax_in_place(&mut scores);
        Ok(scores)
    }
}

fn mean_log_loss(scores: &[f64], labels: &[u32], n_classes: usize) -> f64 {
    let total: f64 = labels
        .iter()
        .enumerate()
        .map(|(i, &y)| log_loss(&scores[i * n_classes..(i + 1) * n_classes], y as usize))
        .sum();
    total / labels.len() as f64
}
