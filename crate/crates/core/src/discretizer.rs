//! Adaptive quantization of a continuous column into ordered bins.
//!
//! Bin edges are equally spaced in a kernel-smoothed empirical CDF. With a
//! Gaussian kernel of bandwidth `h = alpha * silverman(column)`, small
//! `alpha` reproduces quantile (equal-count) binning and large `alpha`
//! reproduces uniform (equal-width) binning. Kernel mass is reflected at the
//! observed minimum and maximum and the CDF is renormalized over
//! `[min, max]`, so the boundaries do not pull edges inward.

use rand::Rng;

use crate::error::{Error, Result};

pub const DEFAULT_ALPHA: f64 = 1.0;

const BISECTION_REL_TOL: f64 = 1e-10;
const BISECTION_MAX_ITER: usize = 200;
// Phi(z) is 0 or 1 to double precision beyond this many bandwidths.
const KERNEL_CUTOFF: f64 = 9.0;

#[derive(Debug, Clone, PartialEq)]
pub struct BinSpec {
    edges: Vec<f64>,
    alpha: f64,
}

/// Fits bins to `column`. See [`BinSpec::fit`].
pub fn fit_bins(column: &[f64], n_bins: usize, alpha: f64) -> Result<BinSpec> {
    BinSpec::fit(column, n_bins, alpha)
}

impl BinSpec {
    /// Fits up to `n_bins` bins. The effective count is at most the number
    /// of distinct values, and shrinks further where ties would otherwise
    /// leave a bin with no training values.
    pub fn fit(column: &[f64], n_bins: usize, alpha: f64) -> Result<Self> {
        if n_bins == 0 {
            return Err(Error::Argument("n_bins must be at least 1".into()));
        }
        if !(alpha >= 0.0 && alpha.is_finite()) {
            return Err(Error::Argument(format!("alpha must be finite and >= 0, got {alpha}")));
        }
        if column.iter().any(|x| !x.is_finite()) {
            return Err(Error::Argument("column contains non-finite values".into()));
        }
        if column.is_empty() {
            return Err(Error::DegenerateColumn);
        }
        let mut sorted = column.to_vec();
        sorted.sort_by(f64::total_cmp);
        let (lo, hi) = (sorted[0], sorted[sorted.len() - 1]);
        if lo == hi {
            return Err(Error::DegenerateColumn);
        }
        let mut distinct = 1;
        for w in sorted.windows(2) {
            if w[1] != w[0] {
                distinct += 1;
            }
        }
        let n_bins = n_bins.min(distinct);

        let cdf = SmoothedCdf::new(&sorted, alpha * silverman_bandwidth(&sorted));
        let (g_lo, g_hi) = (cdf.eval(lo), cdf.eval(hi));
        let tol = BISECTION_REL_TOL * (hi - lo);

        let mut edges = Vec::with_capacity(n_bins + 1);
        edges.push(lo);
        for k in 1..n_bins {
            let target = g_lo + (g_hi - g_lo) * k as f64 / n_bins as f64;
            let (mut a, mut b) = (lo, hi);
            for _ in 0..BISECTION_MAX_ITER {
                if b - a <= tol {
                    break;
                }
                let mid = 0.5 * (a + b);
                if cdf.eval(mid) >= target {
                    b = mid;
                } else {
                    a = mid;
                }
            }
            // an edge must leave at least one training value in the bin it closes
            let last = *edges.last().unwrap();
            let occupied = sorted.partition_point(|&x| x < b) > sorted.partition_point(|&x| x < last);
            if b > last && b < hi && occupied {
                edges.push(b);
            }
        }
        edges.push(hi);
        Ok(BinSpec { edges, alpha })
    }

    /// Rebuilds a spec from stored edges, checking strict monotonicity.
    pub fn from_edges(edges: Vec<f64>, alpha: f64) -> Result<Self> {
        if edges.len() < 2 {
            return Err(Error::Argument("a bin spec needs at least two edges".into()));
        }
        if edges.iter().any(|e| !e.is_finite()) || edges.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Argument("bin edges must be finite and strictly increasing".into()));
        }
        Ok(BinSpec { edges, alpha })
    }

    pub fn n_bins(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn min(&self) -> f64 {
        self.edges[0]
    }

    pub fn max(&self) -> f64 {
        self.edges[self.edges.len() - 1]
    }

    /// Bin index `k` with `edges[k] <= x < edges[k + 1]`, clamped to
    /// `[0, n_bins)` for values outside the fitted range.
    pub fn transform(&self, x: f64) -> usize {
        let interior = &self.edges[1..self.edges.len() - 1];
        interior.partition_point(|&e| e <= x)
    }

    /// Uniform draw from `[edges[k], edges[k + 1])`.
    pub fn sample_within_bin<R: Rng + ?Sized>(&self, k: usize, rng: &mut R) -> Result<f64> {
        if k >= self.n_bins() {
            return Err(Error::BinIndex {
                index: k,
                n_bins: self.n_bins(),
            });
        }
        let (lo, hi) = (self.edges[k], self.edges[k + 1]);
        let u: f64 = rng.random();
        let x = lo + u * (hi - lo);
        // rounding can land exactly on the open end
        Ok(if x < hi { x } else { lo })
    }
}

/// Silverman's rule of thumb, `0.9 * min(sd, IQR / 1.34) * n^(-1/5)`, on
/// sorted data. Falls back to the standard deviation when the IQR is zero.
pub fn silverman_bandwidth(sorted: &[f64]) -> f64 {
    let n = sorted.len() as f64;
    let mean = sorted.iter().sum::<f64>() / n;
    let var = sorted.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0);
    let sd = var.sqrt();
    let iqr = quantile_sorted(sorted, 0.75) - quantile_sorted(sorted, 0.25);
    let spread = if iqr > 0.0 { sd.min(iqr / 1.34) } else { sd };
    0.9 * spread * n.powf(-0.2)
}

fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let i = pos.floor() as usize;
    let frac = pos - i as f64;
    if i + 1 < sorted.len() {
        sorted[i] + frac * (sorted[i + 1] - sorted[i])
    } else {
        sorted[i]
    }
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z / std::f64::consts::SQRT_2)
}

/// Unnormalized smoothed CDF: the sum of Gaussian CDFs centered at every
/// data point and at its mirror images about the minimum and maximum.
struct SmoothedCdf {
    centers: Vec<f64>,
    h: f64,
}

impl SmoothedCdf {
    fn new(sorted: &[f64], h: f64) -> Self {
        let (lo, hi) = (sorted[0], sorted[sorted.len() - 1]);
        let mut centers = Vec::with_capacity(3 * sorted.len());
        centers.extend(sorted.iter().rev().map(|&x| 2.0 * lo - x));
        centers.extend_from_slice(sorted);
        centers.extend(sorted.iter().rev().map(|&x| 2.0 * hi - x));
        SmoothedCdf { centers, h }
    }

    fn eval(&self, t: f64) -> f64 {
        if self.h <= 0.0 {
            let below = self.centers.partition_point(|&c| c < t);
            let at = self.centers[below..].partition_point(|&c| c <= t);
            return below as f64 + 0.5 * at as f64;
        }
        let reach = KERNEL_CUTOFF * self.h;
        let first = self.centers.partition_point(|&c| c < t - reach);
        let last = self.centers.partition_point(|&c| c <= t + reach);
        let partial: f64 = self.centers[first..last]
            .iter()
            .map(|&c| std_normal_cdf((t - c) / self.h))
            .sum();
        first as f64 + partial
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{self, Domain};
    use rand::Rng;

    fn uniform_column(n: usize, seed: u64) -> Vec<f64> {
        let mut r = rng::stream(seed, Domain::Bench, &[n as u64]);
        (0..n).map(|_| r.random::<f64>()).collect()
    }

    fn counts(spec: &BinSpec, column: &[f64]) -> Vec<usize> {
        let mut c = vec![0; spec.n_bins()];
        for &x in column {
            c[spec.transform(x)] += 1;
        }
        c
    }

    #[test]
    fn uniform_data_gets_near_uniform_bins() {
        let col = uniform_column(10_000, 1);
        let spec = fit_bins(&col, 20, 1.0).unwrap();
        assert_eq!(spec.n_bins(), 20);
        let se = (10_000.0 * 0.05 * 0.95f64).sqrt();
        for (k, &c) in counts(&spec, &col).iter().enumerate() {
            assert!((c as f64 - 500.0).abs() < 3.0 * se, "bin {k} holds {c}");
        }
        for k in 1..20 {
            let e = spec.edges()[k];
            assert!((e - k as f64 / 20.0).abs() < 0.02, "edge {k} at {e}");
        }
    }

    #[test]
    fn tiny_alpha_gives_quantile_bins() {
        let col: Vec<f64> = uniform_column(997, 2).iter().map(|u| u.powi(3) * 50.0).collect();
        let spec = fit_bins(&col, 20, 1e-6).unwrap();
        // oracle: sort-and-slice equal-count binning
        let c = counts(&spec, &col);
        let (lo, hi) = (c.iter().min().unwrap(), c.iter().max().unwrap());
        assert!(hi - lo <= 1, "{c:?}");
    }

    #[test]
    fn huge_alpha_gives_equal_width_bins() {
        let col: Vec<f64> = uniform_column(2000, 3).iter().map(|u| u.powi(2) * 10.0 - 4.0).collect();
        let spec = fit_bins(&col, 20, 1e6).unwrap();
        let (lo, hi) = (spec.min(), spec.max());
        for k in 1..20 {
            let want = lo + (hi - lo) * k as f64 / 20.0;
            assert!((spec.edges()[k] - want).abs() < 0.01 * (hi - lo));
        }
    }

    #[test]
    fn single_bin_spans_range() {
        let col = vec![0.0, 0.3, 1.0, 0.5];
        let spec = fit_bins(&col, 1, 1.0).unwrap();
        assert_eq!(spec.edges(), &[0.0, 1.0]);
        assert!(col.iter().all(|&x| spec.transform(x) == 0));
        let mut r = rng::stream(0, Domain::Bench, &[]);
        for _ in 0..100 {
            let v = spec.sample_within_bin(0, &mut r).unwrap();
            assert!((0.0..1.0).contains(&v));
        }
    }

    #[test]
    fn constant_column_is_degenerate() {
        assert!(matches!(fit_bins(&[2.0, 2.0, 2.0], 5, 1.0), Err(Error::DegenerateColumn)));
    }

    #[test]
    fn bin_count_capped_by_distinct_values() {
        let col = vec![1.0, 2.0, 3.0, 1.0, 2.0, 3.0, 3.0];
        let spec = fit_bins(&col, 20, 1.0).unwrap();
        assert!(spec.n_bins() <= 3);
        assert!(spec.edges().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn heavy_ties_collapse_edges() {
        let mut col = vec![0.0; 900];
        col.extend((0..100).map(|i| 1.0 + i as f64 / 100.0));
        let spec = fit_bins(&col, 20, 1e-6).unwrap();
        assert!(spec.n_bins() < 20);
        assert!(spec.edges().windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn transform_boundaries_and_clamping() {
        let spec = BinSpec::from_edges(vec![0.0, 1.0, 2.0, 4.0], 1.0).unwrap();
        assert_eq!(spec.transform(0.0), 0);
        assert_eq!(spec.transform(-3.0), 0);
        assert_eq!(spec.transform(1.0), 1);
        assert_eq!(spec.transform(3.999), 2);
        assert_eq!(spec.transform(4.0), 2);
        assert_eq!(spec.transform(100.0), 2);
    }

    #[test]
    fn transform_matches_linear_scan() {
        let col = uniform_column(500, 4);
        let spec = fit_bins(&col, 13, 1.0).unwrap();
        let e = spec.edges();
        let mut r = rng::stream(9, Domain::Bench, &[]);
        for _ in 0..5000 {
            let x: f64 = r.random_range(-0.2..1.2);
            let mut k = 0;
            while k + 1 < spec.n_bins() && e[k + 1] <= x {
                k += 1;
            }
            assert_eq!(spec.transform(x), k);
        }
    }

    #[test]
    fn within_bin_draws_are_uniform() {
        let spec = BinSpec::from_edges(vec![0.0, 0.25, 0.75, 1.0], 1.0).unwrap();
        let mut r = rng::stream(5, Domain::Bench, &[]);
        let mut draws: Vec<f64> = (0..10_000).map(|_| spec.sample_within_bin(1, &mut r).unwrap()).collect();
        draws.sort_by(f64::total_cmp);
        let n = draws.len() as f64;
        let ks = draws
            .iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = (x - 0.25) / 0.5;
                (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
            })
            .fold(0.0, f64::max);
        assert!(ks < 0.02, "KS statistic {ks}");
        assert!(matches!(spec.sample_within_bin(3, &mut r), Err(Error::BinIndex { .. })));
    }

    #[test]
    fn from_edges_rejects_bad_input() {
        assert!(BinSpec::from_edges(vec![1.0], 1.0).is_err());
        assert!(BinSpec::from_edges(vec![0.0, 1.0, 1.0], 1.0).is_err());
        assert!(BinSpec::from_edges(vec![0.0, f64::NAN], 1.0).is_err());
    }
}
