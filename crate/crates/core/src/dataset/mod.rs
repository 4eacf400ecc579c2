//! Typed tabular data with an explicit per-cell missingness mask.
//!
//! Values are stored column-major. Unobserved cells hold `NaN` in the value
//! buffer, but callers should always go through the mask (`value` returns
//! `None` for them) rather than testing for `NaN`.

mod csv_io;
mod synth;

pub use csv_io::{load_csv, load_schema, read_csv, save_csv, write_csv, NA_TOKENS};
pub use synth::{apply_mcar, iris, two_moons};

use crate::error::{Error, Result};

/// Maximum number of distinct integer values for a column to be inferred as
/// categorical. Matches the default bin count.
pub const CATEGORICAL_INFERENCE_LIMIT: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FeatureKind {
    Continuous,
    Categorical { cardinality: u32 },
}

impl FeatureKind {
    pub fn is_categorical(&self) -> bool {
        matches!(self, FeatureKind::Categorical { .. })
    }

    pub fn cardinality(&self) -> Option<u32> {
        match self {
            FeatureKind::Categorical { cardinality } => Some(*cardinality),
            FeatureKind::Continuous => None,
        }
    }
}

/// One column of a schema. `labels` maps categorical codes to their text
/// form and is empty for continuous columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    pub name: String,
    pub kind: FeatureKind,
    pub labels: Vec<String>,
}

impl Field {
    pub fn continuous(name: impl Into<String>) -> Self {
        Field {
            name: name.into(),
            kind: FeatureKind::Continuous,
            labels: Vec::new(),
        }
    }

    /// Categorical field whose labels are the code numbers themselves.
    pub fn categorical(name: impl Into<String>, cardinality: u32) -> Self {
        Field {
            name: name.into(),
            kind: FeatureKind::Categorical { cardinality },
            labels: (0..cardinality).map(|c| c.to_string()).collect(),
        }
    }

    pub fn with_labels(name: impl Into<String>, labels: Vec<String>) -> Self {
        Field {
            name: name.into(),
            kind: FeatureKind::Categorical {
                cardinality: labels.len() as u32,
            },
            labels,
        }
    }

    /// Text form of a categorical code, falling back to the number itself.
    pub fn label(&self, code: u32) -> String {
        self.labels
            .get(code as usize)
            .cloned()
            .unwrap_or_else(|| code.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Schema {
    fields: Vec<Field>,
}

impl Schema {
    pub fn new(fields: Vec<Field>) -> Result<Self> {
        for f in &fields {
            if let FeatureKind::Categorical { cardinality } = f.kind {
                if cardinality < 2 {
                    return Err(Error::Schema(format!(
                        "categorical column {:?} needs cardinality >= 2, got {cardinality}",
                        f.name
                    )));
                }
                if f.labels.len() > cardinality as usize {
                    return Err(Error::Schema(format!(
                        "categorical column {:?} has {} labels but cardinality {cardinality}",
                        f.name,
                        f.labels.len()
                    )));
                }
            }
        }
        Ok(Schema { fields })
    }

    pub fn len(&self) -> usize {
        self.fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fields.is_empty()
    }

    pub fn fields(&self) -> &[Field] {
        &self.fields
    }

    pub fn field(&self, j: usize) -> &Field {
        &self.fields[j]
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.fields.iter().position(|f| f.name == name)
    }

    /// Same column names and kinds, in the same order. Labels are not compared.
    pub fn is_compatible(&self, other: &Schema) -> bool {
        self.fields.len() == other.fields.len()
            && self
                .fields
                .iter()
                .zip(&other.fields)
                .all(|(a, b)| a.name == b.name && a.kind == b.kind)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TabularDataset {
    schema: Schema,
    n_rows: usize,
    columns: Vec<Vec<f64>>,
    mask: Vec<Vec<bool>>,
}

impl TabularDataset {
    /// Builds a dataset from columns of optional cells, validating every
    /// observed cell against its column kind.
    pub fn from_columns(schema: Schema, columns: Vec<Vec<Option<f64>>>) -> Result<Self> {
        if columns.len() != schema.len() {
            return Err(Error::Schema(format!(
                "schema has {} columns but {} were supplied",
                schema.len(),
                columns.len()
            )));
        }
        let n_rows = columns.first().map_or(0, Vec::len);
        let mut values = Vec::with_capacity(columns.len());
        let mut mask = Vec::with_capacity(columns.len());
        for (j, col) in columns.into_iter().enumerate() {
            if col.len() != n_rows {
                return Err(Error::Schema(format!(
                    "column {j} has {} rows, expected {n_rows}",
                    col.len()
                )));
            }
            let field = schema.field(j);
            let mut v = Vec::with_capacity(n_rows);
            let mut m = Vec::with_capacity(n_rows);
            for (i, cell) in col.into_iter().enumerate() {
                match cell {
                    Some(x) => {
                        check_cell(field, x).map_err(|msg| {
                            Error::Schema(format!("row {i}, column {:?}: {msg}", field.name))
                        })?;
                        v.push(x);
                        m.push(true);
                    }
                    None => {
                        v.push(f64::NAN);
                        m.push(false);
                    }
                }
            }
            values.push(v);
            mask.push(m);
        }
        Ok(TabularDataset {
            schema,
            n_rows,
            columns: values,
            mask,
        })
    }

    /// Builds a dataset from rows of optional cells.
    pub fn from_rows(schema: Schema, rows: &[Vec<Option<f64>>]) -> Result<Self> {
        let d = schema.len();
        let mut columns = vec![Vec::with_capacity(rows.len()); d];
        for (i, row) in rows.iter().enumerate() {
            if row.len() != d {
                return Err(Error::Schema(format!(
                    "row {i} has {} cells, expected {d}",
                    row.len()
                )));
            }
            for (col, &cell) in columns.iter_mut().zip(row) {
                col.push(cell);
            }
        }
        if rows.is_empty() {
            return Ok(TabularDataset {
                columns: vec![Vec::new(); d],
                mask: vec![Vec::new(); d],
                schema,
                n_rows: 0,
            });
        }
        Self::from_columns(schema, columns)
    }

    pub fn schema(&self) -> &Schema {
        &self.schema
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_features(&self) -> usize {
        self.schema.len()
    }

    pub fn value(&self, i: usize, j: usize) -> Option<f64> {
        if self.mask[j][i] {
            Some(self.columns[j][i])
        } else {
            None
        }
    }

    pub fn is_observed(&self, i: usize, j: usize) -> bool {
        self.mask[j][i]
    }

    /// Raw column buffer; unobserved cells are `NaN`.
    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }

    pub fn column_mask(&self, j: usize) -> &[bool] {
        &self.mask[j]
    }

    pub fn observed_values(&self, j: usize) -> Vec<f64> {
        self.columns[j]
            .iter()
            .zip(&self.mask[j])
            .filter(|(_, &m)| m)
            .map(|(&v, _)| v)
            .collect()
    }

    pub fn row(&self, i: usize) -> Vec<Option<f64>> {
        (0..self.n_features()).map(|j| self.value(i, j)).collect()
    }

    pub fn n_observed(&self) -> usize {
        self.mask
            .iter()
            .map(|m| m.iter().filter(|&&b| b).count())
            .sum()
    }

    pub fn n_missing(&self) -> usize {
        self.n_rows * self.n_features() - self.n_observed()
    }

    pub fn is_fully_observed(&self) -> bool {
        self.mask.iter().all(|m| m.iter().all(|&b| b))
    }

    /// Copy with every cell of column `j` in `rows` marked unobserved.
    pub fn with_cells_masked(&self, j: usize, rows: impl IntoIterator<Item = usize>) -> Result<Self> {
        if j >= self.n_features() {
            return Err(Error::ColumnIndex {
                index: j,
                n_cols: self.n_features(),
            });
        }
        let mut out = self.clone();
        for i in rows {
            if i >= self.n_rows {
                return Err(Error::Argument(format!(
                    "row {i} out of range for {} rows",
                    self.n_rows
                )));
            }
            out.mask[j][i] = false;
            out.columns[j][i] = f64::NAN;
        }
        Ok(out)
    }

    /// Rows of `self` followed by rows of `other`.
    pub fn concat(&self, other: &TabularDataset) -> Result<Self> {
        if !self.schema.is_compatible(&other.schema) {
            return Err(Error::Schema("cannot concatenate datasets with different schemas".into()));
        }
        let columns = self
            .columns
            .iter()
            .zip(&other.columns)
            .map(|(a, b)| a.iter().chain(b).copied().collect())
            .collect();
        let mask = self
            .mask
            .iter()
            .zip(&other.mask)
            .map(|(a, b)| a.iter().chain(b).copied().collect())
            .collect();
        Ok(TabularDataset {
            schema: self.schema.clone(),
            n_rows: self.n_rows + other.n_rows,
            columns,
            mask,
        })
    }

    /// Overall missingness as an `n_rows x n_features` row-major table
    /// (`true` = observed).
    pub fn mask_rows(&self) -> Vec<Vec<bool>> {
        (0..self.n_rows)
            .map(|i| (0..self.n_features()).map(|j| self.mask[j][i]).collect())
            .collect()
    }

    pub(crate) fn set_mask_cell(&mut self, i: usize, j: usize) {
        self.mask[j][i] = false;
        self.columns[j][i] = f64::NAN;
    }
}

fn check_cell(field: &Field, x: f64) -> std::result::Result<(), String> {
    if !x.is_finite() {
        return Err(format!("observed value {x} is not finite"));
    }
    if let FeatureKind::Categorical { cardinality } = field.kind {
        if x.fract() != 0.0 || x < 0.0 || x >= cardinality as f64 {
            return Err(format!("{x} is not a code in [0, {cardinality})"));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema2() -> Schema {
        Schema::new(vec![Field::continuous("x"), Field::categorical("c", 3)]).unwrap()
    }

    #[test]
    fn categorical_cardinality_must_be_at_least_two() {
        assert!(Schema::new(vec![Field::categorical("c", 1)]).is_err());
    }

    #[test]
    fn rejects_out_of_range_codes_and_nonfinite_values() {
        let s = schema2();
        assert!(TabularDataset::from_columns(s.clone(), vec![vec![Some(1.0)], vec![Some(3.0)]]).is_err());
        assert!(TabularDataset::from_columns(s.clone(), vec![vec![Some(1.0)], vec![Some(0.5)]]).is_err());
        assert!(TabularDataset::from_columns(s, vec![vec![Some(f64::INFINITY)], vec![None]]).is_err());
    }

    #[test]
    fn rows_and_columns_agree() {
        let rows = vec![vec![Some(1.5), None], vec![None, Some(2.0)]];
        let d = TabularDataset::from_rows(schema2(), &rows).unwrap();
        assert_eq!(d.n_rows(), 2);
        assert_eq!(d.row(0), rows[0]);
        assert_eq!(d.row(1), rows[1]);
        assert_eq!(d.n_observed(), 2);
        assert_eq!(d.observed_values(0), vec![1.5]);
        assert!(d.column(0)[1].is_nan());
    }

    #[test]
    fn concat_and_mask() {
        let d = TabularDataset::from_rows(schema2(), &[vec![Some(1.0), Some(0.0)]]).unwrap();
        let masked = d.with_cells_masked(0, [0]).unwrap();
        let both = d.concat(&masked).unwrap();
        assert_eq!(both.n_rows(), 2);
        assert_eq!(both.value(0, 0), Some(1.0));
        assert_eq!(both.value(1, 0), None);
        assert_eq!(both.value(1, 1), Some(0.0));
        assert!(d.with_cells_masked(5, [0]).is_err());
    }
}
