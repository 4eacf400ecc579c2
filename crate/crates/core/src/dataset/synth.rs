use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;

use super::{Field, Schema, TabularDataset};
use crate::error::{Error, Result};
use crate::rng::{self, Domain};

const IRIS_CSV: &str = include_str!("../../data/iris.csv");

/// Two interleaved half-circles in the usual layout: the upper moon is the
/// unit half-circle `(cos t, sin t)`, the lower moon is its reflection
/// `(1 - cos t, 1 - sin t - 0.5)`, both for `t` in `[0, pi]`. Angles are
/// evenly spaced, `n / 2` points on the upper moon and the rest on the lower
/// one, then isotropic Gaussian noise is added and rows are shuffled.
pub fn two_moons(n: usize, noise: f64, seed: u64) -> Result<TabularDataset> {
    if n < 2 {
        return Err(Error::Argument(format!("two_moons needs n >= 2, got {n}")));
    }
    if !(noise >= 0.0 && noise.is_finite()) {
        return Err(Error::Argument(format!("noise must be a finite non-negative number, got {noise}")));
    }
    let n_upper = n / 2;
    let n_lower = n - n_upper;
    let angles = |m: usize| -> Vec<f64> {
        if m == 1 {
            vec![0.0]
        } else {
            (0..m).map(|k| PI * k as f64 / (m - 1) as f64).collect()
        }
    };
    let mut points: Vec<(f64, f64)> = angles(n_upper)
        .into_iter()
        .map(|t| (t.cos(), t.sin()))
        .chain(angles(n_lower).into_iter().map(|t| (1.0 - t.cos(), 1.0 - t.sin() - 0.5)))
        .collect();

    let mut rng = rng::stream(seed, Domain::TwoMoons, &[]);
    rng::shuffle(&mut rng, &mut points);
    if noise > 0.0 {
        for p in &mut points {
            let dx: f64 = rng.sample(StandardNormal);
            let dy: f64 = rng.sample(StandardNormal);
            p.0 += noise * dx;
            p.1 += noise * dy;
        }
    }
    let schema = Schema::new(vec![Field::continuous("x"), Field::continuous("y")])?;
    TabularDataset::from_columns(
        schema,
        vec![
            points.iter().map(|p| Some(p.0)).collect(),
            points.iter().map(|p| Some(p.1)).collect(),
        ],
    )
}

/// The classic 150-row Iris table: four continuous measurements in cm plus
/// `species` as a three-level categorical column.
pub fn iris() -> TabularDataset {
    super::read_csv(IRIS_CSV.as_bytes(), None).expect("bundled iris.csv is valid")
}

/// Missing-completely-at-random masking. Each row is selected with
/// probability `row_prob`; in a selected row every observed cell outside
/// `protected_cols` is masked with probability `cell_prob`. Draws come from
/// a per-row stream, so the outcome for a row does not depend on the others.
pub fn apply_mcar(
    data: &TabularDataset,
    row_prob: f64,
    cell_prob: f64,
    protected_cols: &[usize],
    seed: u64,
) -> Result<TabularDataset> {
    for (name, p) in [("row_prob", row_prob), ("cell_prob", cell_prob)] {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::Argument(format!("{name} must lie in [0, 1], got {p}")));
        }
    }
    let d = data.n_features();
    if let Some(&bad) = protected_cols.iter().find(|&&c| c >= d) {
        return Err(Error::ColumnIndex { index: bad, n_cols: d });
    }
    let mut out = data.clone();
    for i in 0..data.n_rows() {
        let mut rng = rng::stream(seed, Domain::Mcar, &[i as u64]);
        let selected = rng.random::<f64>() < row_prob;
        for j in 0..d {
            let u = rng.random::<f64>();
            if selected && u < cell_prob && !protected_cols.contains(&j) && data.is_observed(i, j) {
                out.set_mask_cell(i, j);
            }
        }
    }
    Ok(out)
}
