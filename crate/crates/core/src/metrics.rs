//! Imputation and generation quality metrics.
//!
//! The "masked" dataset passed to the imputation metrics is the one given
//! to the imputer: its unobserved cells are the cells being scored.

use std::f64::consts::PI;
use std::fmt::Write as _;

use crate::dataset::{FeatureKind, TabularDataset};
use crate::error::{Error, Result};

fn check_shapes(truth: &TabularDataset, masked: &TabularDataset, imputations: &[TabularDataset]) -> Result<()> {
    if imputations.is_empty() {
        return Err(Error::Argument("need at least one imputation".into()));
    }
    let shape = (masked.n_rows(), masked.n_features());
    if (truth.n_rows(), truth.n_features()) != shape {
        return Err(Error::Argument("truth and masked data differ in shape".into()));
    }
    for imp in imputations {
        if (imp.n_rows(), imp.n_features()) != shape {
            return Err(Error::Argument("an imputation differs in shape from the masked data".into()));
        }
    }
    Ok(())
}

fn masked_cells(truth: &TabularDataset, masked: &TabularDataset, features: &[usize]) -> Vec<(usize, usize)> {
    let mut cells = Vec::new();
    for i in 0..masked.n_rows() {
        for &j in features {
            if !masked.is_observed(i, j) && truth.is_observed(i, j) {
                cells.push((i, j));
            }
        }
    }
    cells
}

fn cell_error(data: &TabularDataset, j: usize, imputed: f64, truth: f64) -> f64 {
    if data.schema().field(j).kind.is_categorical() {
        if imputed == truth {
            0.0
        } else {
            1.0
        }
    } else {
        (imputed - truth).abs()
    }
}

/// Mean absolute error of each imputation over the masked cells of
/// `features`. Categorical cells score 0 when right and 1 when wrong.
pub fn per_imputation_mae(
    truth: &TabularDataset,
    masked: &TabularDataset,
    imputations: &[TabularDataset],
    features: &[usize],
) -> Result<Vec<f64>> {
    check_shapes(truth, masked, imputations)?;
    let cells = masked_cells(truth, masked, features);
    if cells.is_empty() {
        return Err(Error::UndefinedMetric("no masked cells to score".into()));
    }
    imputations
        .iter()
        .map(|imp| {
            let mut total = 0.0;
            for &(i, j) in &cells {
                let v = imp
                    .value(i, j)
                    .ok_or_else(|| Error::Argument(format!("imputation leaves cell ({i}, {j}) missing")))?;
                total += cell_error(truth, j, v, truth.value(i, j).expect("truth observed"));
            }
            Ok(total / cells.len() as f64)
        })
        .collect()
}

/// `(min, mean)` over imputations of the per-imputation MAE on all masked
/// cells.
pub fn mae_scores(
    truth: &TabularDataset,
    masked: &TabularDataset,
    imputations: &[TabularDataset],
) -> Result<(f64, f64)> {
    let all: Vec<usize> = (0..truth.n_features()).collect();
    feature_mae_scores(truth, masked, imputations, &all)
}

/// Like [`mae_scores`] but restricted to the masked cells of `features`.
pub fn feature_mae_scores(
    truth: &TabularDataset,
    masked: &TabularDataset,
    imputations: &[TabularDataset],
    features: &[usize],
) -> Result<(f64, f64)> {
    let maes = per_imputation_mae(truth, masked, imputations, features)?;
    let min = maes.iter().copied().fold(f64::INFINITY, f64::min);
    let avg = maes.iter().sum::<f64>() / maes.len() as f64;
    Ok((min, avg))
}

/// Exact 1-Wasserstein distance between the empirical distributions of `a`
/// and `b`: the integral of the absolute difference of their quantile
/// functions, evaluated piecewise over the merged breakpoints.
pub fn wasserstein_1d(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::Argument("wasserstein distance needs two nonempty samples".into()));
    }
    if a.iter().chain(b).any(|x| !x.is_finite()) {
        return Err(Error::Argument("wasserstein distance needs finite values".into()));
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (n, m) = (a.len() as u64, b.len() as u64);
    // walk quantile levels as integer multiples of 1 / (n * m)
    let (mut i, mut k) = (0u64, 0u64);
    let mut level = 0u64;
    let total = n * m;
    let mut dist = 0.0;
    while level < total {
        let next = ((i + 1) * m).min((k + 1) * n);
        dist += (next - level) as f64 * (a[i as usize] - b[k as usize]).abs();
        level = next;
        if level == (i + 1) * m {
            i += 1;
        }
        if level == (k + 1) * n {
            k += 1;
        }
    }
    Ok(dist / total as f64)
}

/// Total variation distance between the code frequencies of two samples.
fn total_variation(a: &[f64], b: &[f64], cardinality: u32) -> f64 {
    let freq = |s: &[f64]| {
        let mut f = vec![0.0; cardinality as usize];
        for &x in s {
            f[x as usize] += 1.0 / s.len() as f64;
        }
        f
    };
    let (fa, fb) = (freq(a), freq(b));
    0.5 * fa.iter().zip(&fb).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// Per-feature distance between the observed values of `data` and
/// `reference`. Continuous features are min-max scaled by the reference
/// range before taking W1; categorical features use total variation, which
/// is W1 under the 0/1 ground metric.
pub fn feature_wasserstein(data: &TabularDataset, reference: &TabularDataset) -> Result<Vec<f64>> {
    if !data.schema().is_compatible(reference.schema()) {
        return Err(Error::Argument("datasets have different schemas".into()));
    }
    (0..data.n_features())
        .map(|j| {
            let a = data.observed_values(j);
            let b = reference.observed_values(j);
            if a.is_empty() || b.is_empty() {
                return Err(Error::UndefinedMetric(format!(
                    "feature {} has no observed values",
                    data.schema().field(j).name
                )));
            }
            match data.schema().field(j).kind {
                FeatureKind::Categorical { cardinality } => Ok(total_variation(&a, &b, cardinality)),
                FeatureKind::Continuous => {
                    let lo = b.iter().copied().fold(f64::INFINITY, f64::min);
                    let hi = b.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                    let scale = if hi > lo { hi - lo } else { 1.0 };
                    Ok(wasserstein_1d(&a, &b)? / scale)
                }
            }
        })
        .collect()
}

/// Mean over features of [`feature_wasserstein`].
pub fn dataset_wasserstein(data: &TabularDataset, reference: &TabularDataset) -> Result<f64> {
    let per = feature_wasserstein(data, reference)?;
    Ok(per.iter().sum::<f64>() / per.len() as f64)
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Spread across imputations: for every masked cell, the mean absolute
/// deviation of its imputed values around their median (continuous) or the
/// fraction disagreeing with the most common value, lowest code on ties
/// (categorical), averaged over cells.
pub fn mad_diversity(masked: &TabularDataset, imputations: &[TabularDataset]) -> Result<f64> {
    if imputations.len() < 2 {
        return Err(Error::Argument(format!(
            "diversity needs at least 2 imputations, got {}",
            imputations.len()
        )));
    }
    check_shapes(masked, masked, imputations)?;
    let mut total = 0.0;
    let mut n_cells = 0usize;
    let mut values = Vec::with_capacity(imputations.len());
    for i in 0..masked.n_rows() {
        for j in 0..masked.n_features() {
            if masked.is_observed(i, j) {
                continue;
            }
            values.clear();
            for imp in imputations {
                values.push(
                    imp.value(i, j)
                        .ok_or_else(|| Error::Argument(format!("imputation leaves cell ({i}, {j}) missing")))?,
                );
            }
            values.sort_by(f64::total_cmp);
            let m = values.len() as f64;
            total += if masked.schema().field(j).kind.is_categorical() {
                let mut best = (0usize, values[0]);
                let mut run = 0usize;
                for (k, &v) in values.iter().enumerate() {
                    run = if k > 0 && values[k - 1] == v { run + 1 } else { 1 };
                    if run > best.0 {
                        best = (run, v);
                    }
                }
                (m - best.0 as f64) / m
            } else {
                let med = median(&values);
                values.iter().map(|v| (v - med).abs()).sum::<f64>() / m
            };
            n_cells += 1;
        }
    }
    if n_cells == 0 {
        return Err(Error::UndefinedMetric("no masked cells to score".into()));
    }
    Ok(total / n_cells as f64)
}

/// Distance from `(px, py)` to the arc of the unit circle centred at
/// `(cx, cy)` spanning angles `[a0, a0 + PI]`.
fn arc_distance(px: f64, py: f64, cx: f64, cy: f64, a0: f64) -> f64 {
    let (dx, dy) = (px - cx, py - cy);
    let r = dx.hypot(dy);
    let mut theta = dy.atan2(dx) - a0;
    if theta < 0.0 {
        theta += 2.0 * PI;
    }
    if r > 0.0 && theta <= PI {
        return (r - 1.0).abs();
    }
    let end = |a: f64| (px - cx - a.cos()).hypot(py - cy - a.sin());
    end(a0).min(end(a0 + PI))
}

/// Distance from each point to the nearer of the two noise-free moons: the
/// upper half of the unit circle at the origin and the lower half of the
/// unit circle centred at `(1, 0.5)`.
pub fn moons_manifold_distance(points: &[(f64, f64)]) -> Vec<f64> {
    points
        .iter()
        .map(|&(x, y)| {
            let upper = arc_distance(x, y, 0.0, 0.0, 0.0);
            let lower = arc_distance(x, y, 1.0, 0.5, PI);
            upper.min(lower)
        })
        .collect()
}

/// Which moon each point is nearer to: 0 for the upper, 1 for the lower.
pub fn nearest_moon(points: &[(f64, f64)]) -> Vec<u8> {
    points
        .iter()
        .map(|&(x, y)| {
            let upper = arc_distance(x, y, 0.0, 0.0, 0.0);
            let lower = arc_distance(x, y, 1.0, 0.5, PI);
            u8::from(lower < upper)
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureReport {
    pub name: String,
    /// `None` when the feature had no masked cells.
    pub min_mae: Option<f64>,
    pub avg_mae: Option<f64>,
    pub w_train: f64,
    pub w_test: Option<f64>,
}

/// Summary of a multiple-imputation run. Distances are averaged over the
/// imputations; `w_test` is present when held-out data was supplied.
#[derive(Debug, Clone, PartialEq)]
pub struct ImputationReport {
    pub min_mae: f64,
    pub avg_mae: f64,
    pub w_train: f64,
    pub w_test: Option<f64>,
    pub mad: f64,
    pub features: Vec<FeatureReport>,
    /// Extra named statistics added by the caller.
    pub extras: Vec<(String, f64)>,
}

impl ImputationReport {
    pub fn build(
        truth: &TabularDataset,
        masked: &TabularDataset,
        imputations: &[TabularDataset],
        train: &TabularDataset,
        test: Option<&TabularDataset>,
    ) -> Result<Self> {
        let (min_mae, avg_mae) = mae_scores(truth, masked, imputations)?;
        let mad = mad_diversity(masked, imputations)?;
        let d = truth.n_features();
        let mean_over = |reference: &TabularDataset| -> Result<Vec<f64>> {
            let mut acc = vec![0.0; d];
            for imp in imputations {
                for (a, w) in acc.iter_mut().zip(feature_wasserstein(imp, reference)?) {
                    *a += w / imputations.len() as f64;
                }
            }
            Ok(acc)
        };
        let w_train_f = mean_over(train)?;
        let w_test_f = test.map(mean_over).transpose()?;
        let features = (0..d)
            .map(|j| {
                let scores = feature_mae_scores(truth, masked, imputations, &[j]).ok();
                FeatureReport {
                    name: truth.schema().field(j).name.clone(),
                    min_mae: scores.map(|s| s.0),
                    avg_mae: scores.map(|s| s.1),
                    w_train: w_train_f[j],
                    w_test: w_test_f.as_ref().map(|w| w[j]),
                }
            })
            .collect();
        Ok(ImputationReport {
            min_mae,
            avg_mae,
            w_train: w_train_f.iter().sum::<f64>() / d as f64,
            w_test: w_test_f.map(|w| w.iter().sum::<f64>() / d as f64),
            mad,
            features,
            extras: Vec::new(),
        })
    }

    /// Flattened `(key, value)` pairs; per-feature keys are prefixed with
    /// the feature name.
    pub fn entries(&self) -> Vec<(String, f64)> {
        let mut out = vec![
            ("min_mae".to_string(), self.min_mae),
            ("avg_mae".to_string(), self.avg_mae),
            ("w_train".to_string(), self.w_train),
        ];
        if let Some(w) = self.w_test {
            out.push(("w_test".into(), w));
        }
        out.push(("mad".into(), self.mad));
        for f in &self.features {
            if let (Some(lo), Some(avg)) = (f.min_mae, f.avg_mae) {
                out.push((format!("{}.min_mae", f.name), lo));
                out.push((format!("{}.avg_mae", f.name), avg));
            }
            out.push((format!("{}.w_train", f.name), f.w_train));
            if let Some(w) = f.w_test {
                out.push((format!("{}.w_test", f.name), w));
            }
        }
        out.extend(self.extras.iter().cloned());
        out
    }

    /// `key = value` lines.
    pub fn to_key_value(&self) -> String {
        let mut s = String::new();
        for (k, v) in self.entries() {
            writeln!(s, "{k} = {v}").expect("writing to a String");
        }
        s
    }

    /// Two-column CSV with a `metric,value` header.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("metric,value\n");
        for (k, v) in self.entries() {
            writeln!(s, "{k},{v}").expect("writing to a String");
        }
        s
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{Field, Schema};

    fn column(values: &[Option<f64>]) -> TabularDataset {
        let schema = Schema::new(vec![Field::continuous("v")]).unwrap();
        TabularDataset::from_columns(schema, vec![values.to_vec()]).unwrap()
    }

    #[test]
    fn mae_by_hand() {
        let truth = column(&[Some(1.0), Some(2.0), Some(3.0)]);
        let masked = column(&[Some(1.0), None, None]);
        let a = column(&[Some(1.0), Some(2.2), Some(3.2)]);
        let b = column(&[Some(1.0), Some(2.4), Some(2.6)]);
        let (lo, avg) = mae_scores(&truth, &masked, &[a, b]).unwrap();
        assert!((lo - 0.2).abs() < 1e-12);
        assert!((avg - 0.3).abs() < 1e-12);
        assert_eq!(mae_scores(&truth, &masked, std::slice::from_ref(&truth)).unwrap(), (0.0, 0.0));
        assert!(matches!(
            mae_scores(&truth, &truth, std::slice::from_ref(&truth)),
            Err(Error::UndefinedMetric(_))
        ));
    }

    #[test]
    fn categorical_mae_is_zero_one() {
        let schema = Schema::new(vec![Field::categorical("c", 3)]).unwrap();
        let mk = |v: Vec<Option<f64>>| TabularDataset::from_columns(schema.clone(), vec![v]).unwrap();
        let truth = mk(vec![Some(0.0), Some(2.0)]);
        let masked = mk(vec![None, None]);
        let imp = mk(vec![Some(0.0), Some(1.0)]);
        assert_eq!(mae_scores(&truth, &masked, &[imp]).unwrap(), (0.5, 0.5));
    }

    #[test]
    fn wasserstein_by_hand() {
        assert_eq!(wasserstein_1d(&[0.0, 1.0], &[1.0, 2.0]).unwrap(), 1.0);
        assert_eq!(wasserstein_1d(&[3.0, 1.0, 2.0], &[2.0, 3.0, 1.0]).unwrap(), 0.0);
        // point mass at 0 against {0, 1}: half the mass moves by 1
        assert!((wasserstein_1d(&[0.0], &[0.0, 1.0]).unwrap() - 0.5).abs() < 1e-15);
        // {0, 3} against {0, 1, 2}: quantile gaps 0, 1, 2, 1 on
        // [0, 1/3), [1/3, 1/2), [1/2, 2/3), [2/3, 1)
        assert!((wasserstein_1d(&[0.0, 3.0], &[0.0, 1.0, 2.0]).unwrap() - (1.0 / 6.0 * 1.0 + 1.0 / 6.0 * 2.0 + 1.0 / 3.0 * 1.0)).abs() < 1e-12);
        assert!(wasserstein_1d(&[], &[1.0]).is_err());
    }

    #[test]
    fn diversity_by_hand() {
        let masked = column(&[None, Some(5.0)]);
        let a = column(&[Some(0.0), Some(5.0)]);
        let b = column(&[Some(2.0), Some(5.0)]);
        assert_eq!(mad_diversity(&masked, &[a.clone(), b]).unwrap(), 1.0);
        assert_eq!(mad_diversity(&masked, &[a.clone(), a.clone()]).unwrap(), 0.0);
        assert!(mad_diversity(&masked, &[a]).is_err());
    }

    #[test]
    fn categorical_diversity_counts_mode_disagreement() {
        let schema = Schema::new(vec![Field::categorical("c", 3)]).unwrap();
        let mk = |v: f64| TabularDataset::from_columns(schema.clone(), vec![vec![Some(v)]]).unwrap();
        let masked = TabularDataset::from_columns(schema.clone(), vec![vec![None]]).unwrap();
        let imps = [mk(1.0), mk(2.0), mk(1.0), mk(0.0)];
        assert_eq!(mad_diversity(&masked, &imps).unwrap(), 0.5);
    }

    #[test]
    fn manifold_distance_by_hand() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let d = moons_manifold_distance(&[(s, s), (1.3 * s, 1.3 * s), (0.0, 0.0), (1.0, 0.5), (-1.0, -0.3)]);
        assert!(d[0] < 1e-12);
        assert!((d[1] - 0.3).abs() < 1e-12);
        // origin sits inside the lower moon's circle
        assert!((d[2] - (0.5f64.hypot(1.0) - 1.0)).abs() < 1e-12);
        // lower moon centre: radius 1 from every point of its arc, but the
        // upper moon passes closer
        assert!((d[3] - (1.0 - 0.5f64.hypot(1.0)).abs()).abs() < 1e-12);
        // below the left tip of the upper moon
        assert!((d[4] - 0.3).abs() < 1e-12);
        assert_eq!(nearest_moon(&[(0.0, 1.0), (1.0, -0.5)]), vec![0, 1]);
    }

    #[test]
    fn report_formats() {
        let truth = column(&[Some(1.0), Some(2.0), Some(3.0)]);
        let masked = column(&[Some(1.0), None, None]);
        let imps = [truth.clone(), column(&[Some(1.0), Some(2.5), Some(3.0)])];
        let r = ImputationReport::build(&truth, &masked, &imps, &truth, None).unwrap();
        assert!(r.min_mae <= r.avg_mae);
        assert!(r.w_test.is_none());
        assert!(r.to_key_value().contains("v.avg_mae = "));
        assert!(r.to_csv().starts_with("metric,value\nmin_mae,0\n"));
    }
}
