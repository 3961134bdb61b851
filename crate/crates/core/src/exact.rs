//! Exact design moments and exhaustive enumeration oracles.
//!
//! [`exact_moments_ht`] and [`exact_moments_iht`] evaluate the closed-form
//! bias, variance and MSE from first- and second-order inclusion
//! probabilities. The enumeration functions walk every possible sample of a
//! small Poisson or SRSWOR design and are the independent check on those
//! formulas.

use itertools::Itertools;
use serde::Serialize;

use crate::designs::{InclusionProbs, Sample, SecondOrder};
use crate::error::{Error, Result};
use crate::estimators::{iht_total, mse_hat_iht, weighted_total, EstimatorKind};
use crate::rng::{open_unit, Seed};
use crate::sum::KahanSum;
use crate::threshold::{choose_k, ThresholdedProbs};

/// Largest Poisson population enumerated (2^20 outcomes).
pub const POISSON_MAX_N: usize = 20;
/// Largest number of SRSWOR subsets enumerated.
pub const SRSWOR_MAX_SUBSETS: u128 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ExactMoments {
    pub estimator: EstimatorKind,
    pub bias: f64,
    pub variance: f64,
    pub mse: f64,
}

/// `Σ Δ_kk y_k²/w_k² + ΣΣ_{k≠l} Δ_kl y_k y_l/(w_k w_l)` with `Δ` from the
/// original probabilities and weights `w`.
fn design_variance(y: &[f64], pi: &[f64], w: &[f64], so: &SecondOrder) -> Result<f64> {
    if !so.is_available() {
        return Err(Error::SecondOrderUnavailable);
    }
    if y.len() != pi.len() {
        return Err(Error::invalid("values and probabilities differ in length"));
    }
    if let Some(k) = w.iter().position(|&v| v <= 0.0) {
        return Err(Error::ZeroProbability { unit: k + 1 });
    }
    let mut acc = KahanSum::new();
    for k in 0..y.len() {
        acc.add(pi[k] * (1.0 - pi[k]) * y[k] * y[k] / (w[k] * w[k]));
    }
    if !so.is_independent() {
        for k in 0..y.len() {
            let gk = y[k] / w[k];
            for l in (k + 1)..y.len() {
                let delta = so.joint(k, l)? - pi[k] * pi[l];
                acc.add(2.0 * delta * gk * y[l] / w[l]);
            }
        }
    }
    Ok(acc.value())
}

/// HT moments: zero bias and the design variance.
pub fn exact_moments_ht(y: &[f64], p: &InclusionProbs, so: &SecondOrder) -> Result<ExactMoments> {
    let variance = design_variance(y, p.pi(), p.pi(), so)?;
    Ok(ExactMoments {
        estimator: EstimatorKind::Ht,
        bias: 0.0,
        variance,
        mse: variance,
    })
}

/// Thresholded-estimator moments: bias `Σ_{U₂} (π_k/a − 1) y_k`, the design
/// variance with `π*` weights, and `MSE = bias² + variance`.
pub fn exact_moments_iht(
    y: &[f64],
    tp: &ThresholdedProbs,
    so: &SecondOrder,
) -> Result<ExactMoments> {
    let pi = tp.pi();
    let bias = match tp.threshold() {
        Some(a) => tp
            .u2()
            .iter()
            .map(|&k| (pi[k] / a - 1.0) * y[k])
            .collect::<KahanSum>()
            .value(),
        None => 0.0,
    };
    let variance = design_variance(y, pi, tp.pi_star(), so)?;
    Ok(ExactMoments {
        estimator: EstimatorKind::Iht,
        bias,
        variance,
        mse: bias * bias + variance,
    })
}

/// A design small enough to enumerate.
#[derive(Debug, Clone, Copy)]
pub enum EnumDesign<'a> {
    Poisson(&'a InclusionProbs),
    Srswor { n_pop: usize, n: usize },
}

impl EnumDesign<'_> {
    pub fn population_size(&self) -> usize {
        match self {
            EnumDesign::Poisson(p) => p.len(),
            EnumDesign::Srswor { n_pop, .. } => *n_pop,
        }
    }

    pub fn probs(&self) -> Result<InclusionProbs> {
        match self {
            EnumDesign::Poisson(p) => Ok((*p).clone()),
            EnumDesign::Srswor { n_pop, n } => InclusionProbs::equal(*n_pop, *n),
        }
    }

    pub fn second_order(&self) -> SecondOrder {
        match self {
            EnumDesign::Poisson(p) => SecondOrder::Poisson {
                pi: p.pi().to_vec(),
            },
            EnumDesign::Srswor { n_pop, n } => SecondOrder::Srswor {
                n_pop: *n_pop,
                n: *n,
            },
        }
    }

    fn check_cap(&self) -> Result<()> {
        match self {
            EnumDesign::Poisson(p) => {
                if p.len() > POISSON_MAX_N {
                    return Err(Error::CapExceeded {
                        outcomes: 1u128 << p.len().min(127),
                        cap: 1 << POISSON_MAX_N,
                    });
                }
            }
            EnumDesign::Srswor { n_pop, n } => {
                if n > n_pop {
                    return Err(Error::invalid(format!(
                        "sample size {n} exceeds population size {n_pop}"
                    )));
                }
                let count = binomial(*n_pop, *n);
                if count > SRSWOR_MAX_SUBSETS {
                    return Err(Error::CapExceeded {
                        outcomes: count,
                        cap: SRSWOR_MAX_SUBSETS,
                    });
                }
            }
        }
        Ok(())
    }

    /// Every sample with positive probability, in a fixed order.
    pub fn outcomes(&self) -> Result<Vec<(Vec<usize>, f64)>> {
        self.check_cap()?;
        Ok(match self {
            EnumDesign::Poisson(p) => {
                let pi = p.pi();
                (0u64..1 << pi.len())
                    .filter_map(|mask| {
                        let mut prob = 1.0;
                        let mut units = Vec::new();
                        for (k, &pk) in pi.iter().enumerate() {
                            if mask >> k & 1 == 1 {
                                prob *= pk;
                                units.push(k);
                            } else {
                                prob *= 1.0 - pk;
                            }
                        }
                        (prob > 0.0).then_some((units, prob))
                    })
                    .collect()
            }
            EnumDesign::Srswor { n_pop, n } => {
                let prob = 1.0 / binomial(*n_pop, *n) as f64;
                (0..*n_pop).combinations(*n).map(|s| (s, prob)).collect()
            }
        })
    }
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        c = c * (n - i) as u128 / (i + 1) as u128;
    }
    c
}

/// One sample of an enumerated design with the estimators evaluated on it.
#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub units: Vec<usize>,
    pub prob: f64,
    pub ht: f64,
    pub iht: Option<f64>,
    pub mse_hat: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct OutcomeDistribution {
    pub outcomes: Vec<Outcome>,
    pub total: f64,
}

impl OutcomeDistribution {
    pub fn total_prob(&self) -> f64 {
        self.expect(|_| 1.0)
    }

    /// `Σ P(s) f(s)` with compensated summation.
    pub fn expect(&self, f: impl Fn(&Outcome) -> f64) -> f64 {
        self.outcomes
            .iter()
            .map(|o| o.prob * f(o))
            .collect::<KahanSum>()
            .value()
    }

    /// Bias, variance and MSE of `estimator` by direct summation.
    pub fn moments(&self, estimator: EstimatorKind) -> Result<ExactMoments> {
        let pick = |o: &Outcome| match estimator {
            EstimatorKind::Ht => Some(o.ht),
            EstimatorKind::Iht => o.iht,
            _ => None,
        };
        if self.outcomes.iter().any(|o| pick(o).is_none()) {
            return Err(Error::invalid(format!(
                "estimator {} was not evaluated on this enumeration",
                estimator.name()
            )));
        }
        let value = |o: &Outcome| pick(o).unwrap();
        let mean = self.expect(value);
        let variance = self.expect(|o| (value(o) - mean).powi(2));
        let mse = self.expect(|o| (value(o) - self.total).powi(2));
        Ok(ExactMoments {
            estimator,
            bias: mean - self.total,
            variance,
            mse,
        })
    }
}

/// Every outcome of a small design with HT (and, given `tp`, the thresholded
/// total and its MSE estimate) evaluated on it.
pub fn enumerate_design(
    design: EnumDesign<'_>,
    y: &[f64],
    tp: Option<&ThresholdedProbs>,
) -> Result<OutcomeDistribution> {
    let n_pop = design.population_size();
    if y.len() != n_pop {
        return Err(Error::invalid(
            "values and design differ in population size",
        ));
    }
    let p = design.probs()?;
    if let Some(tp) = tp {
        if tp.pi() != p.pi() {
            return Err(Error::invalid(
                "thresholded probabilities do not match the design",
            ));
        }
    }
    let so = design.second_order();
    let outcomes = design
        .outcomes()?
        .into_iter()
        .map(|(units, prob)| {
            let s = Sample::from_units(units, n_pop)?;
            let ht = weighted_total(&s, y, &p)?;
            let (iht, mse_hat) = match tp {
                Some(tp) => (
                    Some(iht_total(&s, y, tp)?),
                    Some(mse_hat_iht(&s, y, tp, &so)?),
                ),
                None => (None, None),
            };
            Ok(Outcome {
                units: s.units().to_vec(),
                prob,
                ht,
                iht,
                mse_hat,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(OutcomeDistribution {
        outcomes,
        total: y.iter().copied().collect::<KahanSum>().value(),
    })
}

/// Joint inclusion probabilities of orders `1..=up_to`, by enumeration.
#[derive(Debug, Clone)]
pub struct InclusionOrders {
    n_pop: usize,
    /// `tables[r - 1]` indexed by the combinatorial rank of a sorted r-set.
    tables: Vec<Vec<f64>>,
    binom: Vec<Vec<usize>>,
}

impl InclusionOrders {
    pub fn population_size(&self) -> usize {
        self.n_pop
    }

    pub fn max_order(&self) -> usize {
        self.tables.len()
    }

    fn rank(&self, sorted: &[usize]) -> usize {
        sorted
            .iter()
            .enumerate()
            .map(|(i, &c)| self.binom[c][i + 1])
            .sum()
    }

    /// Probability that all of `units` are sampled together. Order of the
    /// indices is irrelevant; they must be distinct.
    pub fn get(&self, units: &[usize]) -> f64 {
        let mut s = units.to_vec();
        s.sort_unstable();
        assert!(
            s.windows(2).all(|w| w[0] < w[1]),
            "indices must be distinct"
        );
        assert!(
            !s.is_empty() && s.len() <= self.max_order(),
            "order out of range"
        );
        self.tables[s.len() - 1][self.rank(&s)]
    }
}

/// Enumerate joint inclusion probabilities up to order `up_to` (1 to 4).
pub fn inclusion_orders(design: EnumDesign<'_>, up_to: usize) -> Result<InclusionOrders> {
    if !(1..=4).contains(&up_to) {
        return Err(Error::invalid(format!("order must be 1..=4, got {up_to}")));
    }
    let n_pop = design.population_size();
    let binom: Vec<Vec<usize>> = (0..=n_pop)
        .map(|n| (0..=up_to).map(|k| binomial(n, k) as usize).collect())
        .collect();
    let mut orders = InclusionOrders {
        n_pop,
        tables: (1..=up_to)
            .map(|r| vec![0.0; binomial(n_pop, r) as usize])
            .collect(),
        binom,
    };
    for (units, prob) in design.outcomes()? {
        for r in 1..=up_to.min(units.len()) {
            for subset in units.iter().copied().combinations(r) {
                let idx = orders.rank(&subset);
                orders.tables[r - 1][idx] += prob;
            }
        }
    }
    Ok(orders)
}

/// Closed-form joint probability of the listed units.
///
/// Poisson multiplies the first-order probabilities left to right in the
/// order given; SRSWOR uses `n(n−1)…(n−r+1) / (N(N−1)…(N−r+1))`.
pub fn analytic_joint(design: EnumDesign<'_>, units: &[usize]) -> f64 {
    match design {
        EnumDesign::Poisson(p) => units.iter().fold(1.0, |acc, &k| acc * p.pi()[k]),
        EnumDesign::Srswor { n_pop, n } => (0..units.len())
            .map(|i| (n as f64 - i as f64) / (n_pop as f64 - i as f64))
            .product(),
    }
}

/// `π_ijk − π_ij π_k`.
fn third_gap(joint: &impl Fn(&[usize]) -> f64, t: &[usize]) -> f64 {
    joint(t) - joint(&t[..2]) * joint(&t[2..])
}

/// `π_ijkl − 4π_ijk π_l + 6π_ij π_k π_l − 3π_i π_j π_k π_l`, evaluated in the
/// telescoped form `(π_ijkl − π_ijk π_l) − 3(π_ijk π_l − π_ij π_k π_l)
/// + 3(π_ij π_k π_l − π_i π_j π_k π_l)`.
fn fourth_combination(joint: &impl Fn(&[usize]) -> f64, t: &[usize]) -> f64 {
    let one = |i: usize| joint(&t[i..=i]);
    let p4 = joint(t);
    let p3_1 = joint(&t[..3]) * one(3);
    let p2_1_1 = joint(&t[..2]) * one(2) * one(3);
    let p1111 = one(0) * one(1) * one(2) * one(3);
    (p4 - p3_1) - 3.0 * (p3_1 - p2_1_1) + 3.0 * (p2_1_1 - p1111)
}

/// SRSWOR closed form of `π_ijk − π_ij π_k`.
pub fn srswor_third_gap(n_pop: usize, n: usize) -> f64 {
    let (big, n) = (n_pop as f64, n as f64);
    -2.0 * n * (n - 1.0) * (big - n) / (big * big * (big - 1.0) * (big - 2.0))
}

/// SRSWOR closed form of the fourth-order combination, as the sum of its
/// three telescoped terms.
pub fn srswor_fourth_combination(n_pop: usize, n: usize) -> f64 {
    let (big, n) = (n_pop as f64, n as f64);
    3.0 * n * (n - 1.0) * (n - 2.0) * (n - big)
        / (big.powi(2) * (big - 1.0) * (big - 2.0) * (big - 3.0))
        - 6.0 * n * n * (n - 1.0) * (n - big) / (big.powi(3) * (big - 1.0) * (big - 2.0))
        + 3.0 * n.powi(3) * (n - big) / (big.powi(4) * (big - 1.0))
}

/// Maxima of the third- and fourth-order dependence measures, computed from
/// enumerated and from closed-form joint probabilities.
#[derive(Debug, Clone, Serialize)]
pub struct C4Report {
    pub design: &'static str,
    pub population_size: usize,
    /// Max over ordered distinct triples, from enumeration.
    pub third_order_gap: Option<f64>,
    /// Max over ordered distinct quadruples, from enumeration.
    pub fourth_order_combination: Option<f64>,
    pub analytic_third_order_gap: Option<f64>,
    pub analytic_fourth_order_combination: Option<f64>,
    /// Design-level closed forms (SRSWOR only).
    pub closed_form_third: Option<f64>,
    pub closed_form_fourth: Option<f64>,
    /// Largest disagreement between the routes above.
    pub max_deviation: f64,
    pub pass: bool,
}

/// Agreement tolerance between enumerated and closed-form quantities.
pub const C4_TOL: f64 = 1e-13;

pub fn check_condition_c4(design: EnumDesign<'_>) -> Result<C4Report> {
    let n_pop = design.population_size();
    let orders = inclusion_orders(design, 4.min(n_pop).max(1))?;
    let enumerated = |t: &[usize]| orders.get(t);
    let analytic = |t: &[usize]| analytic_joint(design, t);

    let max_over = |r: usize, f: &dyn Fn(&[usize]) -> f64| -> Option<f64> {
        if n_pop < r {
            return None;
        }
        (0..n_pop)
            .permutations(r)
            .map(|t| f(&t))
            .fold(None, |m: Option<f64>, v| Some(m.map_or(v, |m| m.max(v))))
    };
    let mut max_dev: f64 = 0.0;
    let mut track = |a: Option<f64>, b: Option<f64>| {
        if let (Some(a), Some(b)) = (a, b) {
            max_dev = max_dev.max((a - b).abs());
        }
    };
    // per-tuple agreement between the two routes
    let third_dev = max_over(3, &|t| {
        (third_gap(&enumerated, t) - third_gap(&analytic, t)).abs()
    });
    let fourth_dev = max_over(4, &|t| {
        (fourth_combination(&enumerated, t) - fourth_combination(&analytic, t)).abs()
    });

    let third = max_over(3, &|t| third_gap(&enumerated, t));
    let fourth = max_over(4, &|t| fourth_combination(&enumerated, t));
    let a_third = max_over(3, &|t| third_gap(&analytic, t));
    let a_fourth = max_over(4, &|t| fourth_combination(&analytic, t));
    let (closed_third, closed_fourth, name) = match design {
        EnumDesign::Poisson(_) => (None, None, "poisson"),
        EnumDesign::Srswor { n_pop, n } => (
            (n_pop >= 3).then(|| srswor_third_gap(n_pop, n)),
            (n_pop >= 4).then(|| srswor_fourth_combination(n_pop, n)),
            "srswor",
        ),
    };
    track(third_dev, Some(0.0));
    track(fourth_dev, Some(0.0));
    track(a_third, closed_third);
    track(a_fourth, closed_fourth);
    let poisson_exact = match design {
        EnumDesign::Poisson(_) => {
            a_third.is_none_or(|v| v == 0.0) && a_fourth.is_none_or(|v| v == 0.0)
        }
        EnumDesign::Srswor { .. } => true,
    };
    Ok(C4Report {
        design: name,
        population_size: n_pop,
        third_order_gap: third,
        fourth_order_combination: fourth,
        analytic_third_order_gap: a_third,
        analytic_fourth_order_combination: a_fourth,
        closed_form_third: closed_third,
        closed_form_fourth: closed_fourth,
        max_deviation: max_dev,
        pass: poisson_exact && max_dev <= C4_TOL,
    })
}

/// Result of one of the built-in self-checks.
#[derive(Debug, Clone, Serialize)]
pub struct OracleReport {
    pub check: &'static str,
    /// `relative` or `absolute`.
    pub measure: &'static str,
    pub population_size: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sample_size: Option<usize>,
    pub instances: usize,
    pub max_deviation: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// A random Poisson instance: `y ∈ (0, 1]`, `π ∈ [0.05, 0.95]`.
pub fn random_instance<R: rand::RngCore + ?Sized>(
    n_pop: usize,
    rng: &mut R,
) -> (Vec<f64>, InclusionProbs) {
    let y = (0..n_pop).map(|_| 1.0 - open_unit(rng)).collect();
    let pi = (0..n_pop).map(|_| 0.05 + 0.9 * open_unit(rng)).collect();
    (y, InclusionProbs::new(pi).expect("probabilities in range"))
}

fn rel_dev(got: f64, want: f64, floor: f64) -> f64 {
    (got - want).abs() / want.abs().max(floor).max(f64::MIN_POSITIVE)
}

/// Closed-form moments against enumeration on random Poisson instances
/// thresholded by Algorithm 1. Bias is measured relative to `√MSE` when it
/// is smaller, since it is often exactly zero.
pub fn oracle_poisson_exact(n_pop: usize, instances: usize, seed: Seed) -> Result<OracleReport> {
    let mut worst: f64 = 0.0;
    for i in 0..instances {
        let (y, p) = random_instance(n_pop, &mut seed.child(i as u64).rng());
        let tp = choose_k(&p);
        let so = SecondOrder::Poisson {
            pi: p.pi().to_vec(),
        };
        let dist = enumerate_design(EnumDesign::Poisson(&p), &y, Some(&tp))?;
        let ht = exact_moments_ht(&y, &p, &so)?;
        let ht_enum = dist.moments(EstimatorKind::Ht)?;
        let iht = exact_moments_iht(&y, &tp, &so)?;
        let iht_enum = dist.moments(EstimatorKind::Iht)?;
        worst = worst
            .max(rel_dev(ht_enum.variance, ht.variance, 0.0))
            .max(rel_dev(ht_enum.bias, ht.bias, ht.mse.sqrt()))
            .max(rel_dev(iht_enum.bias, iht.bias, iht.mse.sqrt()))
            .max(rel_dev(iht_enum.variance, iht.variance, 0.0))
            .max(rel_dev(iht_enum.mse, iht.mse, 0.0));
    }
    Ok(OracleReport {
        check: "poisson-exact",
        measure: "relative",
        population_size: n_pop,
        sample_size: None,
        instances,
        max_deviation: worst,
        tolerance: 1e-12,
        pass: worst <= 1e-12,
    })
}

/// Expectation of the MSE estimator against the exact MSE.
pub fn oracle_mse_unbiased(n_pop: usize, instances: usize, seed: Seed) -> Result<OracleReport> {
    let mut worst: f64 = 0.0;
    for i in 0..instances {
        let (y, p) = random_instance(n_pop, &mut seed.child(i as u64).rng());
        let tp = choose_k(&p);
        let so = SecondOrder::Poisson {
            pi: p.pi().to_vec(),
        };
        let dist = enumerate_design(EnumDesign::Poisson(&p), &y, Some(&tp))?;
        let expected = dist.expect(|o| o.mse_hat.expect("evaluated"));
        let exact = exact_moments_iht(&y, &tp, &so)?;
        worst = worst.max(rel_dev(expected, exact.mse, 0.0));
    }
    Ok(OracleReport {
        check: "mse-unbiased",
        measure: "relative",
        population_size: n_pop,
        sample_size: None,
        instances,
        max_deviation: worst,
        tolerance: 1e-10,
        pass: worst <= 1e-10,
    })
}

/// Enumerated SRSWOR joint probabilities of orders 1 to 4 against
/// falling-factorial ratios, over every tuple.
pub fn oracle_srswor_orders(n_pop: usize, n: usize) -> Result<OracleReport> {
    let design = EnumDesign::Srswor { n_pop, n };
    let up_to = 4.min(n_pop).max(1);
    let orders = inclusion_orders(design, up_to)?;
    let mut worst: f64 = 0.0;
    for r in 1..=up_to {
        for t in (0..n_pop).combinations(r) {
            worst = worst.max((orders.get(&t) - analytic_joint(design, &t)).abs());
        }
    }
    Ok(OracleReport {
        check: "srswor-orders",
        measure: "absolute",
        population_size: n_pop,
        sample_size: Some(n),
        instances: 1,
        max_deviation: worst,
        tolerance: C4_TOL,
        pass: worst <= C4_TOL,
    })
}

/// Condition C.4 quantities for SRSWOR `(n_pop, n)` and for random Poisson
/// instances of the same size.
pub fn oracle_c4(n_pop: usize, n: usize, instances: usize, seed: Seed) -> Result<OracleReport> {
    let mut reports = vec![check_condition_c4(EnumDesign::Srswor { n_pop, n })?];
    for i in 0..instances {
        let (_, p) = random_instance(n_pop, &mut seed.child(i as u64).rng());
        reports.push(check_condition_c4(EnumDesign::Poisson(&p))?);
    }
    Ok(OracleReport {
        check: "c4",
        measure: "absolute",
        population_size: n_pop,
        sample_size: Some(n),
        instances: reports.len(),
        max_deviation: reports.iter().map(|r| r.max_deviation).fold(0.0, f64::max),
        tolerance: C4_TOL,
        pass: reports.iter().all(|r| r.pass),
    })
}
