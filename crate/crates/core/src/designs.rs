//! Unequal-probability sampling designs.
//!
//! Four designs are supported: Poisson, simple random sampling without
//! replacement (SRSWOR), randomized-order systematic πPS, and
//! with-replacement PPS estimated on the distinct units. Joint inclusion
//! probabilities are exposed through [`SecondOrder`] where they are known
//! exactly.

use rand::seq::SliceRandom;
use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::open_unit;
use crate::sum::ksum;

/// Tolerance on `Σπ` being an integer for fixed-size designs.
pub const SIZE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DesignKind {
    Poisson,
    Srswor,
    Pips,
    Ppswr,
}

impl DesignKind {
    pub fn name(self) -> &'static str {
        match self {
            DesignKind::Poisson => "poisson",
            DesignKind::Srswor => "srswor",
            DesignKind::Pips => "pips",
            DesignKind::Ppswr => "ppswr",
        }
    }
}

impl std::str::FromStr for DesignKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "poisson" => Ok(DesignKind::Poisson),
            "srswor" => Ok(DesignKind::Srswor),
            "pips" => Ok(DesignKind::Pips),
            "ppswr" => Ok(DesignKind::Ppswr),
            _ => Err(Error::invalid(format!(
                "unknown design `{s}` (expected poisson, srswor, pips or ppswr)"
            ))),
        }
    }
}

/// Serialized design descriptor, `{"design": "pips", "n": 60}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DesignSpec {
    pub design: DesignKind,
    pub n: usize,
}

/// First-order inclusion probabilities.
///
/// Values lie in `[0, 1]`. Zero is admitted so that degenerate designs can be
/// expressed; estimators reject a sampled unit with `π_k = 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct InclusionProbs {
    pi: Vec<f64>,
    target_n: f64,
}

impl InclusionProbs {
    pub fn new(pi: Vec<f64>) -> Result<Self> {
        if pi.is_empty() {
            return Err(Error::invalid("inclusion probabilities must be non-empty"));
        }
        if let Some(k) = pi.iter().position(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::invalid(format!(
                "inclusion probability of unit {} is {}, outside [0, 1]",
                k + 1,
                pi[k]
            )));
        }
        let target_n = ksum(pi.iter().copied());
        Ok(Self { pi, target_n })
    }

    /// `π_k = n / N` for every unit.
    pub fn equal(n_pop: usize, n: usize) -> Result<Self> {
        if n_pop == 0 || n > n_pop {
            return Err(Error::invalid(format!(
                "sample size {n} must not exceed population size {n_pop}"
            )));
        }
        Self::new(vec![n as f64 / n_pop as f64; n_pop])
    }

    pub fn pi(&self) -> &[f64] {
        &self.pi
    }

    pub fn len(&self) -> usize {
        self.pi.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pi.is_empty()
    }

    /// `Σ π_k`: the fixed size for fixed-size designs, the expected size otherwise.
    pub fn target_n(&self) -> f64 {
        self.target_n
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.pi
    }
}

/// A drawn sample as a sorted set of zero-based unit indices.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Sample {
    units: Vec<usize>,
}

impl Sample {
    /// Validates range and uniqueness; the input order does not matter.
    pub fn from_units(mut units: Vec<usize>, n_pop: usize) -> Result<Self> {
        units.sort_unstable();
        if let Some(&last) = units.last() {
            if last >= n_pop {
                return Err(Error::invalid(format!(
                    "unit index {last} out of range for population of {n_pop}"
                )));
            }
        }
        if units.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("sample contains duplicate units"));
        }
        Ok(Self { units })
    }

    /// Distinct units of a with-replacement draw list.
    pub fn from_draws(draws: &[usize]) -> Self {
        let mut units = draws.to_vec();
        units.sort_unstable();
        units.dedup();
        Self { units }
    }

    pub fn census(n_pop: usize) -> Self {
        Self {
            units: (0..n_pop).collect(),
        }
    }

    pub(crate) fn from_sorted_unchecked(units: Vec<usize>) -> Self {
        debug_assert!(units.windows(2).all(|w| w[0] < w[1]));
        Self { units }
    }

    pub fn units(&self) -> &[usize] {
        &self.units
    }

    pub fn len(&self) -> usize {
        self.units.len()
    }

    pub fn is_empty(&self) -> bool {
        self.units.is_empty()
    }

    pub fn contains(&self, k: usize) -> bool {
        self.units.binary_search(&k).is_ok()
    }
}

/// `π_k ∝ x_k` with `Σπ = n`. Units whose share would exceed one are fixed at
/// one and the rest rescaled, repeated until no value exceeds one.
pub fn pi_from_sizes(x: &[f64], n: usize) -> Result<InclusionProbs> {
    let n_pop = x.len();
    if n_pop == 0 || n == 0 || n > n_pop {
        return Err(Error::invalid(format!(
            "sample size {n} must be in 1..={n_pop}"
        )));
    }
    if let Some(k) = x.iter().position(|&v| v <= 0.0 || !v.is_finite()) {
        return Err(Error::invalid(format!(
            "size of unit {} is {}, sizes must be positive",
            k + 1,
            x[k]
        )));
    }
    let mut capped = vec![false; n_pop];
    let mut pi = vec![0.0; n_pop];
    // each pass caps at least one more unit, so N passes suffice
    for _ in 0..=n_pop {
        let n_capped = capped.iter().filter(|&&c| c).count();
        let rest = (n - n_capped) as f64;
        let free_total = ksum(x.iter().zip(&capped).filter(|(_, &c)| !c).map(|(&v, _)| v));
        let mut changed = false;
        for k in 0..n_pop {
            if capped[k] {
                pi[k] = 1.0;
                continue;
            }
            pi[k] = rest * x[k] / free_total;
            if pi[k] >= 1.0 {
                capped[k] = true;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    for p in pi.iter_mut() {
        *p = p.min(1.0);
    }
    InclusionProbs::new(pi)
}

/// Distinct-unit inclusion probabilities of `m` PPS draws with replacement,
/// `π_k = 1 − (1 − p_k)^m` with `p_k = x_k / Σx`.
pub fn ppswr_probs(x: &[f64], m: usize) -> Result<InclusionProbs> {
    let p = draw_probs(x)?;
    InclusionProbs::new(
        p.iter()
            .map(|&pk| 1.0 - (1.0 - pk).powi(m as i32))
            .collect(),
    )
}

fn draw_probs(x: &[f64]) -> Result<Vec<f64>> {
    if x.is_empty() {
        return Err(Error::invalid("size vector must be non-empty"));
    }
    if let Some(k) = x.iter().position(|&v| v <= 0.0 || !v.is_finite()) {
        return Err(Error::invalid(format!(
            "size of unit {} is {}, sizes must be positive",
            k + 1,
            x[k]
        )));
    }
    let total = ksum(x.iter().copied());
    Ok(x.iter().map(|v| v / total).collect())
}

/// Poisson sampling: unit `k` enters independently with probability `π_k`.
pub fn draw_poisson<R: RngCore + ?Sized>(p: &InclusionProbs, rng: &mut R) -> Sample {
    let units = p
        .pi()
        .iter()
        .enumerate()
        .filter_map(|(k, &pk)| (open_unit(rng) < pk).then_some(k))
        .collect();
    Sample::from_sorted_unchecked(units)
}

/// Uniformly random `n`-subset of `0..n_pop` by partial Fisher-Yates.
pub fn draw_srswor<R: RngCore + ?Sized>(n_pop: usize, n: usize, rng: &mut R) -> Result<Sample> {
    if n > n_pop {
        return Err(Error::invalid(format!(
            "sample size {n} exceeds population size {n_pop}"
        )));
    }
    let mut idx: Vec<usize> = (0..n_pop).collect();
    let (chosen, _) = idx.partial_shuffle(rng, n);
    let mut units = chosen.to_vec();
    units.sort_unstable();
    Ok(Sample::from_sorted_unchecked(units))
}

/// Randomized-order systematic πPS sampling.
///
/// Units are put in uniformly random order, laid end to end on `[0, n)` with
/// interval lengths `π_k`, and hit by the points `u, u + 1, …, u + n − 1`.
pub fn draw_pips_systematic<R: RngCore + ?Sized>(
    p: &InclusionProbs,
    rng: &mut R,
) -> Result<Sample> {
    let n = fixed_size(p)?;
    let mut order: Vec<usize> = (0..p.len()).collect();
    order.shuffle(rng);
    let u = open_unit(rng);

    let scale = n as f64 / p.target_n();
    let mut units = Vec::with_capacity(n);
    let mut cum = 0.0;
    let mut j = 0usize;
    for (pos, &k) in order.iter().enumerate() {
        cum += p.pi()[k] * scale;
        if pos + 1 == order.len() {
            cum = n as f64;
        }
        let mut hit = false;
        while j < n && u + (j as f64) < cum {
            j += 1;
            hit = true;
        }
        if hit {
            units.push(k);
        }
    }
    units.sort_unstable();
    debug_assert_eq!(units.len(), n);
    Ok(Sample::from_sorted_unchecked(units))
}

fn fixed_size(p: &InclusionProbs) -> Result<usize> {
    let t = p.target_n();
    let n = t.round();
    if (t - n).abs() > SIZE_TOL {
        return Err(Error::invalid(format!(
            "fixed-size design needs integer Σπ, got {t}"
        )));
    }
    Ok(n as usize)
}

/// `m` independent draws with probability proportional to `x`. Returns the
/// draw list with multiplicity.
pub fn draw_pps_wr<R: RngCore + ?Sized>(x: &[f64], m: usize, rng: &mut R) -> Result<Vec<usize>> {
    if m == 0 {
        return Err(Error::invalid("number of PPS draws must be at least 1"));
    }
    let p = draw_probs(x)?;
    let mut cum = Vec::with_capacity(p.len());
    let mut acc = 0.0;
    for pk in &p {
        acc += pk;
        cum.push(acc);
    }
    let last = p.len() - 1;
    Ok((0..m)
        .map(|_| {
            let u = open_unit(rng) * acc;
            cum.partition_point(|&c| c <= u).min(last)
        })
        .collect())
}

/// A design bound to its inclusion probabilities, ready to draw samples.
#[derive(Debug, Clone)]
pub struct Design {
    kind: DesignKind,
    probs: InclusionProbs,
    /// PPS draw probabilities source (with-replacement only).
    sizes: Option<Vec<f64>>,
    draws: usize,
}

impl Design {
    /// Build a design of nominal size `n`. Poisson and πPS use `π ∝ sizes`
    /// (equal probabilities when `sizes` is `None`); PPS-WR makes `n` draws.
    pub fn new(kind: DesignKind, n: usize, n_pop: usize, sizes: Option<&[f64]>) -> Result<Self> {
        if let Some(s) = sizes {
            if s.len() != n_pop {
                return Err(Error::invalid(
                    "size vector length differs from population size",
                ));
            }
        }
        let probs = match (kind, sizes) {
            (DesignKind::Srswor, _) | (DesignKind::Poisson | DesignKind::Pips, None) => {
                InclusionProbs::equal(n_pop, n)?
            }
            (DesignKind::Poisson | DesignKind::Pips, Some(x)) => pi_from_sizes(x, n)?,
            (DesignKind::Ppswr, Some(x)) => ppswr_probs(x, n)?,
            (DesignKind::Ppswr, None) => {
                return Err(Error::invalid("PPS sampling needs a size variable"))
            }
        };
        if kind == DesignKind::Ppswr && n == 0 {
            return Err(Error::invalid("number of PPS draws must be at least 1"));
        }
        Ok(Self {
            kind,
            probs,
            sizes: (kind == DesignKind::Ppswr).then(|| sizes.unwrap().to_vec()),
            draws: n,
        })
    }

    /// Poisson sampling with the given probabilities.
    pub fn poisson(probs: InclusionProbs) -> Self {
        let draws = probs.target_n().round() as usize;
        Self {
            kind: DesignKind::Poisson,
            probs,
            sizes: None,
            draws,
        }
    }

    pub fn kind(&self) -> DesignKind {
        self.kind
    }

    pub fn probs(&self) -> &InclusionProbs {
        &self.probs
    }

    pub fn draw<R: RngCore + ?Sized>(&self, rng: &mut R) -> Sample {
        match self.kind {
            DesignKind::Poisson => draw_poisson(&self.probs, rng),
            DesignKind::Srswor => draw_srswor(self.probs.len(), self.draws, rng)
                .expect("size validated at construction"),
            DesignKind::Pips => {
                draw_pips_systematic(&self.probs, rng).expect("Σπ is an integer by construction")
            }
            DesignKind::Ppswr => {
                let draws = draw_pps_wr(self.sizes.as_deref().unwrap(), self.draws, rng)
                    .expect("sizes validated at construction");
                Sample::from_draws(&draws)
            }
        }
    }

    pub fn second_order(&self) -> SecondOrder {
        second_order(self.kind, &self.probs)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SecondOrderKind {
    Poisson,
    Srswor,
    Enumerated,
    Unavailable,
}

/// Joint inclusion probabilities `π_kl`; the diagonal holds `π_k`.
#[derive(Debug, Clone, PartialEq)]
pub enum SecondOrder {
    Poisson {
        pi: Vec<f64>,
    },
    Srswor {
        n_pop: usize,
        n: usize,
    },
    /// Dense `N × N` matrix accumulated from an exhaustive outcome list.
    Enumerated {
        n_pop: usize,
        joint: Vec<f64>,
    },
    Unavailable,
}

/// Exact joint probabilities for Poisson and SRSWOR; anything else is
/// declared unavailable.
pub fn second_order(kind: DesignKind, p: &InclusionProbs) -> SecondOrder {
    match kind {
        DesignKind::Poisson => SecondOrder::Poisson {
            pi: p.pi().to_vec(),
        },
        DesignKind::Srswor => SecondOrder::Srswor {
            n_pop: p.len(),
            n: p.target_n().round() as usize,
        },
        DesignKind::Pips | DesignKind::Ppswr => SecondOrder::Unavailable,
    }
}

impl SecondOrder {
    /// Accumulate joint probabilities from `(units, probability)` outcomes.
    pub fn from_outcomes<'a, I>(n_pop: usize, outcomes: I) -> Self
    where
        I: IntoIterator<Item = (&'a [usize], f64)>,
    {
        let mut joint = vec![0.0; n_pop * n_pop];
        for (units, prob) in outcomes {
            for &k in units {
                for &l in units {
                    joint[k * n_pop + l] += prob;
                }
            }
        }
        SecondOrder::Enumerated { n_pop, joint }
    }

    pub fn kind(&self) -> SecondOrderKind {
        match self {
            SecondOrder::Poisson { .. } => SecondOrderKind::Poisson,
            SecondOrder::Srswor { .. } => SecondOrderKind::Srswor,
            SecondOrder::Enumerated { .. } => SecondOrderKind::Enumerated,
            SecondOrder::Unavailable => SecondOrderKind::Unavailable,
        }
    }

    pub fn is_available(&self) -> bool {
        !matches!(self, SecondOrder::Unavailable)
    }

    /// Independent inclusions, so every `Δ_kl` with `k ≠ l` vanishes.
    pub fn is_independent(&self) -> bool {
        matches!(self, SecondOrder::Poisson { .. })
    }

    /// `π_kl`, or `π_k` when `k == l`.
    pub fn joint(&self, k: usize, l: usize) -> Result<f64> {
        match self {
            SecondOrder::Poisson { pi } => Ok(if k == l { pi[k] } else { pi[k] * pi[l] }),
            SecondOrder::Srswor { n_pop, n } => {
                let (big, small) = (*n_pop as f64, *n as f64);
                Ok(if k == l {
                    small / big
                } else if *n_pop < 2 {
                    0.0
                } else {
                    small * (small - 1.0) / (big * (big - 1.0))
                })
            }
            SecondOrder::Enumerated { n_pop, joint } => Ok(joint[k * n_pop + l]),
            SecondOrder::Unavailable => Err(Error::SecondOrderUnavailable),
        }
    }

    /// `Δ_kl = π_kl − π_k π_l`, with `Δ_kk = π_k (1 − π_k)`.
    pub fn delta(&self, k: usize, l: usize) -> Result<f64> {
        let pk = self.joint(k, k)?;
        if k == l {
            return Ok(pk * (1.0 - pk));
        }
        Ok(self.joint(k, l)? - pk * self.joint(l, l)?)
    }
}
