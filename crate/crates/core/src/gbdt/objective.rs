//! Multiclass softmax cross-entropy.

pub const HESSIAN_FLOOR: f64 = 1e-16;

/// Numerically stable softmax.
pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let mut out = scores.to_vec();
    softmax_in_place(&mut out);
    out
}

pub fn softmax_in_place(scores: &mut [f64]) {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for s in scores.iter_mut() {
        *s = (*s - max).exp();
        sum += *s;
    }
    for s in scores.iter_mut() {
        *s /= sum;
    }
}

/// Gradient and diagonal Hessian of `-log softmax(scores)[label]` with
/// respect to the scores: `p - onehot(label)` and `p (1 - p)`, the latter
/// floored at [`HESSIAN_FLOOR`].
pub fn softmax_grad_hess(scores: &[f64], label: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(label < scores.len(), "label {label} out of range for {} classes", scores.len());
    let p = softmax(scores);
    let grad = p
        .iter()
        .enumerate()
        .map(|(c, &pc)| if c == label { pc - 1.0 } else { pc })
        .collect();
    let hess = p.iter().map(|&pc| (pc * (1.0 - pc)).max(HESSIAN_FLOOR)).collect();
    (grad, hess)
}

/// `-log softmax(scores)[label]`, computed via log-sum-exp.
pub fn log_loss(scores: &[f64], label: usize) -> f64 {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + scores.iter().map(|s| (s - max).exp()).sum::<f64>().ln();
    lse - scores[label]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn symmetric_binary_case() {
        let (g, h) = softmax_grad_hess(&[0.3, 0.3], 0);
        assert_eq!(g, vec![-0.5, 0.5]);
        assert_eq!(h, vec![0.25, 0.25]);
    }

    #[test]
    fn three_class_matches_central_differences() {
        let scores = [1.0, 0.0, -1.0];
        let (g, _) = softmax_grad_hess(&scores, 1);
        let step = 1e-5;
        for c in 0..3 {
            let mut up = scores;
            let mut down = scores;
            up[c] += step;
            down[c] -= step;
            let fd = (log_loss(&up, 1) - log_loss(&down, 1)) / (2.0 * step);
            assert!(((g[c] - fd) / fd).abs() < 1e-6, "class {c}: {} vs {fd}", g[c]);
        }
    }

    #[test]
    fn gradient_signs() {
        let (g, _) = softmax_grad_hess(&[2.0, -1.0, 0.5, 0.0], 2);
        for (c, &gc) in g.iter().enumerate() {
            if c == 2 {
                assert!(gc > -1.0 && gc < 0.0);
            } else {
                assert!(gc > 0.0 && gc < 1.0);
            }
        }
    }

    #[test]
    fn hessian_is_floored() {
        let (_, h) = softmax_grad_hess(&[1000.0, -1000.0], 0);
        assert!(h.iter().all(|&x| x >= HESSIAN_FLOOR));
    }

    #[test]
    fn softmax_survives_large_scores() {
        let p = softmax(&[1e300, 0.0, -1e300]);
        assert_eq!(p, vec![1.0, 0.0, 0.0]);
    }
}
