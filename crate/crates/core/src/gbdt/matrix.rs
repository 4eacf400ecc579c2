use crate::error::{Error, Result};

/// Dense column-major matrix with an explicit observed flag per cell.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureMatrix {
    n_rows: usize,
    n_cols: usize,
    values: Vec<Vec<f64>>,
    observed: Vec<Vec<bool>>,
}

impl FeatureMatrix {
    pub fn new(n_cols: usize) -> Self {
        FeatureMatrix {
            n_rows: 0,
            n_cols,
            values: vec![Vec::new(); n_cols],
            observed: vec![Vec::new(); n_cols],
        }
    }

    pub fn with_capacity(n_cols: usize, rows: usize) -> Self {
        FeatureMatrix {
            n_rows: 0,
            n_cols,
            values: vec![Vec::with_capacity(rows); n_cols],
            observed: vec![Vec::with_capacity(rows); n_cols],
        }
    }

    pub fn from_rows(n_cols: usize, rows: &[Vec<Option<f64>>]) -> Result<Self> {
        let mut m = Self::with_capacity(n_cols, rows.len());
        for r in rows {
            m.push_row(r)?;
        }
        Ok(m)
    }

    /// Appends a row. Non-finite observed values are rejected.
    pub fn push_row(&mut self, row: &[Option<f64>]) -> Result<()> {
        if row.len() != self.n_cols {
            return Err(Error::Argument(format!(
                "row has {} cells, matrix has {} columns",
                row.len(),
                self.n_cols
            )));
        }
        if row.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::Argument("observed matrix cells must be finite".into()));
        }
        for (j, cell) in row.iter().enumerate() {
            self.values[j].push(cell.unwrap_or(0.0));
            self.observed[j].push(cell.is_some());
        }
        self.n_rows += 1;
        Ok(())
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn get(&self, i: usize, j: usize) -> Option<f64> {
        self.observed[j][i].then(|| self.values[j][i])
    }

    pub fn row(&self, i: usize) -> Vec<Option<f64>> {
        (0..self.n_cols).map(|j| self.get(i, j)).collect()
    }

    pub(crate) fn observed_in_column(&self, j: usize) -> impl Iterator<Item = f64> + '_ {
        self.values[j]
            .iter()
            .zip(&self.observed[j])
            .filter(|(_, &o)| o)
            .map(|(&v, _)| v)
    }
}

/// Split candidates for one feature. A value `x` falls in bin
/// `#{cuts < x}`, so "bin <= b" is the same test as `x <= cuts[b]`.
#[derive(Debug, Clone)]
pub(crate) struct FeatureCuts {
    pub cuts: Vec<f64>,
}

impl FeatureCuts {
    /// Midpoints between adjacent distinct values when there are at most
    /// `max_bins` of them (or always, in exact mode); otherwise quantile
    /// cut points of the sorted values.
    pub fn from_values(mut values: Vec<f64>, max_bins: usize, exact: bool) -> Self {
        values.sort_by(f64::total_cmp);
        let mut distinct = values.clone();
        distinct.dedup();
        let cuts = if exact || distinct.len() <= max_bins {
            distinct
                .windows(2)
                .map(|w| {
                    let mid = 0.5 * (w[0] + w[1]);
                    if mid < w[1] {
                        mid
                    } else {
                        w[0]
                    }
                })
                .collect()
        } else {
            let n = values.len();
            let max = values[n - 1];
            let mut cuts: Vec<f64> = (1..max_bins).map(|k| values[k * n / max_bins]).collect();
            cuts.dedup();
            cuts.retain(|&c| c < max);
            cuts
        };
        FeatureCuts { cuts }
    }

    pub fn n_bins(&self) -> usize {
        self.cuts.len() + 1
    }

    pub fn bin(&self, x: f64) -> u32 {
        self.cuts.partition_point(|&c| c < x) as u32
    }
}

/// Pre-binned copy of a matrix used during training.
pub(crate) struct BinnedMatrix {
    pub cuts: Vec<FeatureCuts>,
    /// Per-feature bin of every row; missing cells hold `cuts[j].n_bins()`.
    pub bins: Vec<Vec<u32>>,
    /// Start of each feature's block in a flattened histogram. Each block has
    /// `n_bins + 1` slots, the last one for missing values.
    pub offsets: Vec<usize>,
    pub hist_len: usize,
}

impl BinnedMatrix {
    pub fn new(x: &FeatureMatrix, max_bins: usize, exact: bool) -> Self {
        use rayon::prelude::*;
        let per_feature: Vec<(FeatureCuts, Vec<u32>)> = (0..x.n_cols())
            .into_par_iter()
            .map(|j| {
                let cuts = FeatureCuts::from_values(x.observed_in_column(j).collect(), max_bins, exact);
                let bins = x.values[j]
                    .iter()
                    .zip(&x.observed[j])
                    .map(|(&v, &o)| if o { cuts.bin(v) } else { cuts.n_bins() as u32 })
                    .collect();
                (cuts, bins)
            })
            .collect();
        let mut offsets = Vec::with_capacity(per_feature.len());
        let mut hist_len = 0;
        for (c, _) in &per_feature {
            offsets.push(hist_len);
            hist_len += c.n_bins() + 1;
        }
        let (cuts, bins) = per_feature.into_iter().unzip();
        BinnedMatrix {
            cuts,
            bins,
            offsets,
            hist_len,
        }
    }
}
