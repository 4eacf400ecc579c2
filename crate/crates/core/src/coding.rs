//! Per-feature mapping between cell values and classifier classes.

use rand::Rng;

use crate::dataset::{FeatureKind, TabularDataset};
use crate::discretizer::BinSpec;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum FeatureCoding {
    /// Continuous column quantized into bins.
    Binned(BinSpec),
    /// Continuous column with a single observed value; one class.
    Constant(f64),
    /// Categorical codes used directly as classes.
    Categorical { cardinality: u32 },
}

impl FeatureCoding {
    /// Fits the coding for column `j` from its observed cells.
    pub fn fit(data: &TabularDataset, j: usize, n_bins: usize, alpha: f64) -> Result<Self> {
        let field = data.schema().field(j);
        match field.kind {
            FeatureKind::Categorical { cardinality } => Ok(FeatureCoding::Categorical { cardinality }),
            FeatureKind::Continuous => {
                let values = data.observed_values(j);
                if values.is_empty() {
                    return Err(Error::NoObservedValues(field.name.clone()));
                }
                match BinSpec::fit(&values, n_bins, alpha) {
                    Ok(spec) => Ok(FeatureCoding::Binned(spec)),
                    Err(Error::DegenerateColumn) => Ok(FeatureCoding::Constant(values[0])),
                    Err(e) => Err(e),
                }
            }
        }
    }

    pub fn n_classes(&self) -> usize {
        match self {
            FeatureCoding::Binned(spec) => spec.n_bins(),
            FeatureCoding::Constant(_) => 1,
            FeatureCoding::Categorical { cardinality } => *cardinality as usize,
        }
    }

    /// Class of an observed value.
    pub fn encode(&self, x: f64) -> u32 {
        match self {
            FeatureCoding::Binned(spec) => spec.transform(x) as u32,
            FeatureCoding::Constant(_) => 0,
            FeatureCoding::Categorical { .. } => x as u32,
        }
    }

    /// Realizes a value for `class`: a uniform draw inside the bin for
    /// binned features, the code itself for categorical ones.
    pub fn decode<R: Rng + ?Sized>(&self, class: u32, rng: &mut R) -> Result<f64> {
        match self {
            FeatureCoding::Binned(spec) => spec.sample_within_bin(class as usize, rng),
            FeatureCoding::Constant(v) => Ok(*v),
            FeatureCoding::Categorical { cardinality } => {
                if class < *cardinality {
                    Ok(class as f64)
                } else {
                    Err(Error::BinIndex {
                        index: class as usize,
                        n_bins: *cardinality as usize,
                    })
                }
            }
        }
    }
}
