//! The two bundled case studies: Two Moons with one coordinate hidden, and
//! Iris under random masking. Each runs data preparation, masking, fitting,
//! imputation, generation and scoring, and returns the report together with
//! plot-ready point tables.

use std::fmt;
use std::str::FromStr;

use rand::RngCore;

use crate::dataset::{apply_mcar, iris, two_moons, TabularDataset};
use crate::engine::{self, EngineConfig, UnmaskingModel};
use crate::error::Error;
use crate::metrics::{self, ImputationReport};
use crate::rng::{self, Domain};

pub const MOONS_TRAIN_SIZE: usize = 200;
pub const MOONS_NOISE: f64 = 0.1;
/// Manifold distance counted as "on the moons": 2.5 noise deviations.
pub const MOONS_ON_MANIFOLD: f64 = 0.25;
pub const IRIS_ROW_PROB: f64 = 0.5;
pub const IRIS_CELL_PROB: f64 = 0.5;
pub const N_IMPUTATIONS: usize = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Moons,
    Iris,
}

impl FromStr for Suite {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "moons" => Ok(Suite::Moons),
            "iris" => Ok(Suite::Iris),
            other => Err(format!("unknown suite {other:?}; expected moons or iris")),
        }
    }
}

impl fmt::Display for Suite {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Suite::Moons => "moons",
            Suite::Iris => "iris",
        })
    }
}

/// A failed protocol step.
#[derive(Debug)]
pub struct StageError {
    pub stage: &'static str,
    pub source: Error,
}

impl fmt::Display for StageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "stage {}: {}", self.stage, self.source)
    }
}

impl std::error::Error for StageError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        Some(&self.source)
    }
}

trait Stage<T> {
    fn stage(self, stage: &'static str) -> Result<T, StageError>;
}

impl<T> Stage<T> for crate::Result<T> {
    fn stage(self, stage: &'static str) -> Result<T, StageError> {
        self.map_err(|source| StageError { stage, source })
    }
}

/// Everything a case study produced.
#[derive(Debug, Clone)]
pub struct BenchRun {
    pub suite: Suite,
    pub truth: TabularDataset,
    pub masked: TabularDataset,
    pub imputations: Vec<TabularDataset>,
    pub generated: TabularDataset,
    pub model: UnmaskingModel,
    pub report: ImputationReport,
}

impl BenchRun {
    /// Plot-ready tables as `(file name, dataset)`. Imputed tables hold the
    /// rows that had a missing cell, one block per imputation.
    pub fn point_tables(&self) -> Vec<(String, TabularDataset)> {
        let mut out = vec![
            ("truth.csv".to_string(), self.truth.clone()),
            ("masked.csv".to_string(), self.masked.clone()),
            ("generated.csv".to_string(), self.generated.clone()),
        ];
        let rows: Vec<usize> = (0..self.masked.n_rows())
            .filter(|&i| (0..self.masked.n_features()).any(|j| !self.masked.is_observed(i, j)))
            .collect();
        for (k, imp) in self.imputations.iter().enumerate() {
            let picked: Vec<_> = rows.iter().map(|&i| imp.row(i)).collect();
            let table = TabularDataset::from_rows(imp.schema().clone(), &picked).expect("rows come from imp");
            out.push((format!("imputed_points_{k:03}.csv"), table));
        }
        out
    }
}

/// Independent seed for sub-step `k` of a run.
fn sub_seed(seed: u64, k: u64) -> u64 {
    rng::stream(seed, Domain::Bench, &[k]).next_u64()
}

pub fn run(suite: Suite, seed: u64, config: &EngineConfig) -> Result<BenchRun, StageError> {
    match suite {
        Suite::Moons => run_moons(seed, config),
        Suite::Iris => run_iris(seed, config),
    }
}

/// Default engine settings with the given seed.
pub fn default_config(seed: u64) -> EngineConfig {
    EngineConfig {
        seed: sub_seed(seed, 2),
        ..EngineConfig::default()
    }
}

/// Training moons plus a copy of them with `y` hidden; the model is fit on
/// both and imputes the hidden `y`.
pub fn run_moons(seed: u64, config: &EngineConfig) -> Result<BenchRun, StageError> {
    let train = two_moons(MOONS_TRAIN_SIZE, MOONS_NOISE, sub_seed(seed, 0)).stage("data")?;
    let test = two_moons(MOONS_TRAIN_SIZE, MOONS_NOISE, sub_seed(seed, 1)).stage("data")?;
    let hidden = train
        .with_cells_masked(1, 0..train.n_rows())
        .and_then(|h| train.concat(&h))
        .stage("mask")?;
    let truth = train.concat(&train).stage("mask")?;

    let model = engine::fit(&hidden, config).stage("fit")?;
    let imputations = engine::impute(&model, &hidden, N_IMPUTATIONS, sub_seed(seed, 3)).stage("impute")?;
    let generated = engine::generate(&model, MOONS_TRAIN_SIZE, sub_seed(seed, 4)).stage("generate")?;

    let mut report = ImputationReport::build(&truth, &hidden, &imputations, &train, Some(&test)).stage("metrics")?;
    let stats = moons_stats(&hidden, &imputations, &generated);
    report.extras.extend(stats);
    Ok(BenchRun {
        suite: Suite::Moons,
        truth,
        masked: hidden,
        imputations,
        generated,
        model,
        report,
    })
}

/// Manifold statistics for the Two Moons run:
/// the on-manifold fraction of imputed and generated points, and the share
/// of imputed points in the overlap band `0 <= x <= 1` nearer each moon.
pub fn moons_stats(
    masked: &TabularDataset,
    imputations: &[TabularDataset],
    generated: &TabularDataset,
) -> Vec<(String, f64)> {
    let mut imputed = Vec::new();
    for imp in imputations {
        for i in 0..masked.n_rows() {
            if !masked.is_observed(i, 1) {
                imputed.push((imp.column(0)[i], imp.column(1)[i]));
            }
        }
    }
    let gen: Vec<(f64, f64)> = (0..generated.n_rows())
        .map(|i| (generated.column(0)[i], generated.column(1)[i]))
        .collect();
    let on_manifold = |pts: &[(f64, f64)]| {
        let d = metrics::moons_manifold_distance(pts);
        d.iter().filter(|&&x| x <= MOONS_ON_MANIFOLD).count() as f64 / d.len().max(1) as f64
    };
    let band: Vec<(f64, f64)> = imputed.iter().copied().filter(|p| (0.0..=1.0).contains(&p.0)).collect();
    let lower = metrics::nearest_moon(&band).iter().filter(|&&m| m == 1).count() as f64;
    let n_band = band.len().max(1) as f64;
    vec![
        ("moons.imputed_on_manifold".into(), on_manifold(&imputed)),
        ("moons.generated_on_manifold".into(), on_manifold(&gen)),
        ("moons.band_points".into(), band.len() as f64),
        ("moons.band_upper_share".into(), (band.len() as f64 - lower) / n_band),
        ("moons.band_lower_share".into(), lower / n_band),
    ]
}

/// Iris with half the rows selected and half of their measurements hidden;
/// species is never hidden.
pub fn run_iris(seed: u64, config: &EngineConfig) -> Result<BenchRun, StageError> {
    let truth = iris();
    let species = truth
        .schema()
        .index_of("species")
        .ok_or_else(|| Error::Schema("bundled iris has no species column".into()))
        .stage("data")?;
    let masked = apply_mcar(&truth, IRIS_ROW_PROB, IRIS_CELL_PROB, &[species], sub_seed(seed, 0)).stage("mask")?;

    let model = engine::fit(&masked, config).stage("fit")?;
    let imputations = engine::impute(&model, &masked, N_IMPUTATIONS, sub_seed(seed, 3)).stage("impute")?;
    let generated = engine::generate(&model, truth.n_rows(), sub_seed(seed, 4)).stage("generate")?;

    let mut report = ImputationReport::build(&truth, &masked, &imputations, &truth, None).stage("metrics")?;
    let stats = iris_stats(&truth, &masked, &imputations, species).stage("metrics")?;
    report.extras.extend(stats);
    Ok(BenchRun {
        suite: Suite::Iris,
        truth,
        masked,
        imputations,
        generated,
        model,
        report,
    })
}

/// For each species: W1 between the imputed petal lengths (pooled over
/// imputations) and that species' true petal lengths, alongside the same
/// distance for imputing every hidden cell with the species mean.
pub fn iris_stats(
    truth: &TabularDataset,
    masked: &TabularDataset,
    imputations: &[TabularDataset],
    species: usize,
) -> crate::Result<Vec<(String, f64)>> {
    let petal = truth
        .schema()
        .index_of("petal_length")
        .ok_or_else(|| Error::Schema("no petal_length column".into()))?;
    let field = truth.schema().field(species).clone();
    let n_species = field.kind.cardinality().unwrap_or(0);
    let mut out = Vec::new();
    for s in 0..n_species {
        let rows: Vec<usize> = (0..truth.n_rows())
            .filter(|&i| truth.value(i, species) == Some(s as f64))
            .collect();
        let reference: Vec<f64> = rows.iter().filter_map(|&i| truth.value(i, petal)).collect();
        let hidden: Vec<usize> = rows.iter().copied().filter(|&i| !masked.is_observed(i, petal)).collect();
        if hidden.is_empty() || reference.is_empty() {
            continue;
        }
        let imputed: Vec<f64> = imputations
            .iter()
            .flat_map(|imp| hidden.iter().map(move |&i| imp.column(petal)[i]))
            .collect();
        let mean = reference.iter().sum::<f64>() / reference.len() as f64;
        let label = field.label(s);
        out.push((format!("iris.{label}.hidden_petal_length"), hidden.len() as f64));
        out.push((format!("iris.{label}.petal_length_w1"), metrics::wasserstein_1d(&imputed, &reference)?));
        out.push((
            format!("iris.{label}.mean_oracle_w1"),
            metrics::wasserstein_1d(&vec![mean; hidden.len()], &reference)?,
        ));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn suite_names_parse() {
        assert_eq!("moons".parse::<Suite>().unwrap(), Suite::Moons);
        assert_eq!("iris".parse::<Suite>().unwrap(), Suite::Iris);
        assert!("mnist".parse::<Suite>().is_err());
        assert_eq!(Suite::Iris.to_string(), "iris");
    }
}
