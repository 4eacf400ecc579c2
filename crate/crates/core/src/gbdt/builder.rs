//! Greedy depth-limited growth of one second-order regression tree over
//! pre-binned features.

use super::matrix::BinnedMatrix;
use super::tree::{Tree, TreeNode};
use super::GbdtParams;

// splits must improve the objective by more than this
const MIN_SPLIT_GAIN: f64 = 1e-9;

#[derive(Debug, Clone, Copy, Default)]
struct Bucket {
    g: f64,
    h: f64,
    n: u32,
}

impl Bucket {
    fn add(&mut self, g: f64, h: f64) {
        self.g += g;
        self.h += h;
        self.n += 1;
    }

    fn merged(self, o: Bucket) -> Bucket {
        Bucket {
            g: self.g + o.g,
            h: self.h + o.h,
            n: self.n + o.n,
        }
    }

    fn minus(self, o: Bucket) -> Bucket {
        Bucket {
            g: self.g - o.g,
            h: self.h - o.h,
            n: self.n - o.n,
        }
    }
}

#[derive(Debug, Clone, Copy)]
struct Split {
    feature: usize,
    bin: u32,
    threshold: f64,
    default_left: bool,
    gain: f64,
}

pub(crate) struct TreeBuilder<'a> {
    data: &'a BinnedMatrix,
    grad: &'a [f64],
    hess: &'a [f64],
    params: &'a GbdtParams,
}

impl<'a> TreeBuilder<'a> {
    pub fn new(data: &'a BinnedMatrix, grad: &'a [f64], hess: &'a [f64], params: &'a GbdtParams) -> Self {
        TreeBuilder {
            data,
            grad,
            hess,
            params,
        }
    }

    /// Grows a tree over all rows. `delta[i]` receives the leaf value row `i`
    /// lands in.
    pub fn build(&self, delta: &mut [f64]) -> Tree {
        let mut rows: Vec<u32> = (0..self.grad.len() as u32).collect();
        let mut nodes = Vec::new();
        self.grow(&mut rows, None, 0, &mut nodes, delta);
        Tree::from_preorder(nodes).expect("builder emits well-formed trees")
    }

    fn grow(
        &self,
        rows: &mut [u32],
        hist: Option<Vec<Bucket>>,
        depth: usize,
        nodes: &mut Vec<TreeNode>,
        delta: &mut [f64],
    ) {
        let total = rows.iter().fold(Bucket::default(), |mut acc, &r| {
            acc.add(self.grad[r as usize], self.hess[r as usize]);
            acc
        });
        let can_split = depth < self.params.max_depth
            && rows.len() >= 2
            && total.h >= 2.0 * self.params.min_child_weight;
        let split = if can_split {
            let hist = hist.unwrap_or_else(|| self.histogram(rows));
            self.best_split(&hist, total).map(|s| (s, hist))
        } else {
            None
        };

        let Some((split, hist)) = split else {
            let value = -total.g / (total.h + self.params.lambda) * self.params.learning_rate;
            for &r in rows.iter() {
                delta[r as usize] = value;
            }
            nodes.push(TreeNode::leaf(value));
            return;
        };

        nodes.push(TreeNode::split(split.feature as u32, split.threshold, split.default_left));
        let bins = &self.data.bins[split.feature];
        let missing = self.data.cuts[split.feature].n_bins() as u32;
        let goes_left = |r: u32| {
            let b = bins[r as usize];
            if b == missing {
                split.default_left
            } else {
                b <= split.bin
            }
        };
        let n_left = stable_partition(rows, goes_left);
        let (left, right) = rows.split_at_mut(n_left);

        let children_split = depth + 1 < self.params.max_depth;
        let (hl, hr) = if !children_split {
            (None, None)
        } else if left.len() <= right.len() {
            let hl = self.histogram(left);
            let hr = subtract(&hist, &hl);
            (Some(hl), Some(hr))
        } else {
            let hr = self.histogram(right);
            let hl = subtract(&hist, &hr);
            (Some(hl), Some(hr))
        };
        drop(hist);
        self.grow(left, hl, depth + 1, nodes, delta);
        self.grow(right, hr, depth + 1, nodes, delta);
    }

    fn histogram(&self, rows: &[u32]) -> Vec<Bucket> {
        let mut hist = vec![Bucket::default(); self.data.hist_len];
        for (f, bins) in self.data.bins.iter().enumerate() {
            let block = &mut hist[self.data.offsets[f]..];
            for &r in rows {
                let r = r as usize;
                block[bins[r] as usize].add(self.grad[r], self.hess[r]);
            }
        }
        hist
    }

    fn gain(&self, left: Bucket, right: Bucket, total: Bucket) -> f64 {
        let lambda = self.params.lambda;
        let score = |b: Bucket| b.g * b.g / (b.h + lambda);
        0.5 * (score(left) + score(right) - score(total))
    }

    fn admissible(&self, b: Bucket) -> bool {
        b.n > 0 && b.h >= self.params.min_child_weight
    }

    /// Best split by regularized gain. Features and bins are scanned in
    /// ascending order and only a strictly larger gain replaces the
    /// incumbent, so ties go to the lowest feature, then lowest threshold.
    fn best_split(&self, hist: &[Bucket], total: Bucket) -> Option<Split> {
        let mut best: Option<Split> = None;
        let mut best_gain = MIN_SPLIT_GAIN;
        for (f, cuts) in self.data.cuts.iter().enumerate() {
            let nb = cuts.n_bins();
            if nb < 2 {
                continue;
            }
            let block = &hist[self.data.offsets[f]..self.data.offsets[f] + nb + 1];
            let missing = block[nb];
            let mut finite_left = Bucket::default();
            for b in 0..nb - 1 {
                finite_left = finite_left.merged(block[b]);
                let mut options = [None, None];
                if missing.n == 0 {
                    let right = total.minus(finite_left);
                    options[0] = Some((finite_left, right, finite_left.h >= right.h));
                } else {
                    options[0] = Some((finite_left, total.minus(finite_left), false));
                    let with_missing = finite_left.merged(missing);
                    options[1] = Some((with_missing, total.minus(with_missing), true));
                }
                for (left, right, default_left) in options.into_iter().flatten() {
                    if !self.admissible(left) || !self.admissible(right) {
                        continue;
                    }
                    let gain = self.gain(left, right, total);
                    if gain > best_gain {
                        best_gain = gain;
                        best = Some(Split {
                            feature: f,
                            bin: b as u32,
                            threshold: cuts.cuts[b],
                            default_left,
                            gain,
                        });
                    }
                }
            }
        }
        best.filter(|s| s.gain > MIN_SPLIT_GAIN)
    }
}

fn subtract(parent: &[Bucket], child: &[Bucket]) -> Vec<Bucket> {
    parent.iter().zip(child).map(|(p, c)| p.minus(*c)).collect()
}

/// Moves rows satisfying `pred` to the front, preserving relative order on
/// both sides. Returns the size of the front part.
fn stable_partition(rows: &mut [u32], pred: impl Fn(u32) -> bool) -> usize {
    let mut right = Vec::new();
    let mut w = 0;
    for i in 0..rows.len() {
        let r = rows[i];
        if pred(r) {
            rows[w] = r;
            w += 1;
        } else {
            right.push(r);
        }
    }
    rows[w..].copy_from_slice(&right);
    w
}
