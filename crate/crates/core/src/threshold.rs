//! Hard thresholding of first-order inclusion probabilities.
//!
//! Every probability at or below a threshold `a` is raised to `a`; the rest
//! are kept. The threshold is either supplied directly or taken as the
//! `K`-th smallest probability, with `K` the length of the initial run of
//! sorted probabilities satisfying `π_(j) ≤ 1/(j+1)`.

use crate::designs::InclusionProbs;
use crate::error::{Error, Result};

/// Original and thresholded probabilities with the induced partition.
///
/// `u2` holds the units with `π_k ≤ a` (the modified block); `u1` is its
/// complement. With ties at the threshold `|U₂|` can exceed `K`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdedProbs {
    pi: Vec<f64>,
    pi_star: Vec<f64>,
    k: usize,
    a: Option<f64>,
    u2: Vec<usize>,
}

impl ThresholdedProbs {
    fn build(pi: &[f64], k: usize, a: Option<f64>) -> Self {
        let (pi_star, u2) = match a {
            Some(a) => {
                let u2: Vec<usize> = (0..pi.len()).filter(|&i| pi[i] <= a).collect();
                let star = pi.iter().map(|&p| if p <= a { a } else { p }).collect();
                (star, u2)
            }
            None => (pi.to_vec(), Vec::new()),
        };
        Self {
            pi: pi.to_vec(),
            pi_star,
            k,
            a,
            u2,
        }
    }

    /// No modification: `π* = π`, `K = 0`.
    pub fn identity(p: &InclusionProbs) -> Self {
        Self::build(p.pi(), 0, None)
    }

    /// Reassemble from an original and a thresholded vector, checking that
    /// every raised unit was raised to one common value and no unit was lowered.
    pub fn from_parts(pi: Vec<f64>, pi_star: Vec<f64>) -> Result<Self> {
        if pi.len() != pi_star.len() {
            return Err(Error::invalid("pi and pi_star have different lengths"));
        }
        let mut a: Option<f64> = None;
        for (k, (&p, &s)) in pi.iter().zip(&pi_star).enumerate() {
            if !(0.0..=1.0).contains(&s) || s < p {
                return Err(Error::invalid(format!(
                    "unit {}: pi_star {s} must lie in [pi, 1] with pi = {p}",
                    k + 1
                )));
            }
            if s > p {
                match a {
                    None => a = Some(s),
                    Some(prev) if prev == s => {}
                    Some(prev) => {
                        return Err(Error::invalid(format!(
                            "thresholded units disagree on the threshold ({prev} vs {s})"
                        )))
                    }
                }
            }
        }
        if let Some(a) = a {
            if let Some(k) = pi.iter().zip(&pi_star).position(|(&p, &s)| p < a && s != a) {
                return Err(Error::invalid(format!(
                    "unit {} lies below the threshold {a} but was not raised",
                    k + 1
                )));
            }
        }
        let k = a.map_or(0, |a| pi.iter().filter(|&&p| p <= a).count());
        let out = Self::build(&pi, k, a);
        debug_assert_eq!(out.pi_star, pi_star);
        Ok(out)
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    pub fn pi_star(&self) -> &[f64] {
        &self.pi_star
    }

    /// Rank of the threshold among the sorted probabilities (0 when unmodified).
    pub fn k(&self) -> usize {
        self.k
    }

    pub fn threshold(&self) -> Option<f64> {
        self.a
    }

    pub fn u2(&self) -> &[usize] {
        &self.u2
    }

    pub fn u1(&self) -> Vec<usize> {
        let mut in_u2 = vec![false; self.pi.len()];
        for &k in &self.u2 {
            in_u2[k] = true;
        }
        (0..self.pi.len()).filter(|&k| !in_u2[k]).collect()
    }

    pub fn in_u2(&self, k: usize) -> bool {
        self.a.is_some_and(|a| self.pi[k] <= a)
    }

    /// Units whose probability actually changed.
    pub fn n_modified(&self) -> usize {
        self.pi
            .iter()
            .zip(&self.pi_star)
            .filter(|(p, s)| p != s)
            .count()
    }

    pub fn len(&self) -> usize {
        self.pi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pi.is_empty()
    }
}

/// Choose `K` and threshold at `π_(K)`.
///
/// Scans the ascending probabilities and stops at the first `j` with
/// `π_(j) > 1/(j+1)`; `K` is the number of successful steps. `K = 0` leaves
/// the probabilities untouched.
pub fn choose_k(p: &InclusionProbs) -> ThresholdedProbs {
    let mut sorted = p.pi().to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut k = 0;
    for (idx, &pj) in sorted.iter().enumerate() {
        let j = idx + 1;
        if pj <= 1.0 / (j as f64 + 1.0) {
            // ascending order means the previous step passed too
            debug_assert!(j == 1 || sorted[idx - 1] <= 1.0 / j as f64);
            k = j;
        } else {
            break;
        }
    }
    let a = (k > 0).then(|| sorted[k - 1]);
    ThresholdedProbs::build(p.pi(), k, a)
}

/// Threshold at an externally supplied `a ∈ (0, 1]`; `K = #{k : π_k ≤ a}`.
pub fn apply_threshold(p: &InclusionProbs, a: f64) -> Result<ThresholdedProbs> {
    if !(a > 0.0 && a <= 1.0) {
        return Err(Error::invalid(format!(
            "threshold must lie in (0, 1], got {a}"
        )));
    }
    let k = p.pi().iter().filter(|&&v| v <= a).count();
    Ok(ThresholdedProbs::build(p.pi(), k, (k > 0).then_some(a)))
}
