//! Top-p (nucleus) sampling over class probabilities.

use rand::Rng;

use crate::error::{Error, Result};

// slack for floating-point cumulative sums reaching top_p
const CUMULATIVE_SLACK: f64 = 1e-12;
const SUM_TOLERANCE: f64 = 1e-6;

fn check_probs(probs: &[f64], top_p: f64) -> Result<()> {
    if !(top_p > 0.0 && top_p <= 1.0) {
        return Err(Error::Argument(format!("top_p must be in (0, 1], got {top_p}")));
    }
    if probs.is_empty() {
        return Err(Error::Argument("empty probability vector".into()));
    }
    if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
        return Err(Error::Argument("probabilities must be finite and non-negative".into()));
    }
    let total: f64 = probs.iter().sum();
    if (total - 1.0).abs() > SUM_TOLERANCE {
        return Err(Error::Argument(format!("probabilities sum to {total}, not 1")));
    }
    Ok(())
}

/// The nucleus of `probs`: classes by descending probability (ties by
/// ascending index), cut after the shortest prefix whose mass reaches
/// `top_p`, with probabilities renormalized over the prefix.
pub fn nucleus(probs: &[f64], top_p: f64) -> Result<Vec<(usize, f64)>> {
    check_probs(probs, top_p)?;
    let mut ranked: Vec<usize> = (0..probs.len()).collect();
    // stable sort keeps ascending index order among equal probabilities
    ranked.sort_by(|&a, &b| probs[b].total_cmp(&probs[a]));
    let mut mass = 0.0;
    let mut keep = ranked.len();
    for (n, &c) in ranked.iter().enumerate() {
        mass += probs[c];
        if mass >= top_p - CUMULATIVE_SLACK {
            keep = n + 1;
            break;
        }
    }
    ranked.truncate(keep);
    let mass: f64 = ranked.iter().map(|&c| probs[c]).sum();
    Ok(ranked.into_iter().map(|c| (c, probs[c] / mass)).collect())
}

/// Draws one class from the nucleus of `probs`.
pub fn nucleus_sample<R: Rng + ?Sized>(probs: &[f64], top_p: f64, rng: &mut R) -> Result<usize> {
    let kept = nucleus(probs, top_p)?;
    let u: f64 = rng.random();
    let mut cum = 0.0;
    for &(c, p) in &kept {
        cum += p;
        if u < cum {
            return Ok(c);
        }
    }
    Ok(kept.last().expect("nucleus is never empty").0)
}
