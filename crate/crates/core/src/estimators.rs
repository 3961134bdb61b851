//! Point estimators and the sample-based MSE estimators.

use serde::{Deserialize, Serialize};

use crate::designs::{InclusionProbs, Sample, SecondOrder};
use crate::error::{Error, Result};
use crate::sum::KahanSum;
use crate::threshold::ThresholdedProbs;

/// A set of per-unit inclusion probabilities used as inverse weights.
pub trait InclusionWeights {
    fn weights(&self) -> &[f64];
}

impl InclusionWeights for InclusionProbs {
    fn weights(&self) -> &[f64] {
        self.pi()
    }
}

/// Thresholded probabilities weight by `π*`.
impl InclusionWeights for ThresholdedProbs {
    fn weights(&self) -> &[f64] {
        self.pi_star()
    }
}

impl InclusionWeights for [f64] {
    fn weights(&self) -> &[f64] {
        self
    }
}

fn check_lengths(sample: &Sample, y: &[f64], w: &[f64]) -> Result<()> {
    if y.len() != w.len() {
        return Err(Error::invalid(format!(
            "{} values but {} inclusion probabilities",
            y.len(),
            w.len()
        )));
    }
    if let Some(&last) = sample.units().last() {
        if last >= y.len() {
            return Err(Error::invalid(format!(
                "sampled unit {last} outside population of {}",
                y.len()
            )));
        }
    }
    Ok(())
}

/// `Σ_{k∈s} y_k / w_k`. Empty samples give zero.
pub fn weighted_total<W: InclusionWeights + ?Sized>(
    sample: &Sample,
    y: &[f64],
    w: &W,
) -> Result<f64> {
    let w = w.weights();
    check_lengths(sample, y, w)?;
    let mut acc = KahanSum::new();
    for &k in sample.units() {
        if w[k] <= 0.0 {
            return Err(Error::ZeroProbability { unit: k + 1 });
        }
        acc.add(y[k] / w[k]);
    }
    Ok(acc.value())
}

/// Horvitz-Thompson total `Σ_{k∈s} y_k / π_k`.
pub fn ht_total(sample: &Sample, y: &[f64], p: &InclusionProbs) -> Result<f64> {
    weighted_total(sample, y, p)
}

/// Thresholded total `Σ_{k∈s} y_k / π*_k`.
pub fn iht_total(sample: &Sample, y: &[f64], tp: &ThresholdedProbs) -> Result<f64> {
    weighted_total(sample, y, tp)
}

fn joint_positive(so: &SecondOrder, k: usize, l: usize) -> Result<f64> {
    let pkl = so.joint(k, l)?;
    if pkl <= 0.0 {
        return Err(Error::ZeroJointProbability { k: k + 1, l: l + 1 });
    }
    Ok(pkl)
}

/// Unbiased variance estimator of the HT total,
/// `Σ_s (1 − π_k) y_k²/π_k² + ΣΣ_{s, k≠l} (Δ_kl/π_kl) y_k y_l/(π_k π_l)`.
pub fn mse_hat_ht(sample: &Sample, y: &[f64], p: &InclusionProbs, so: &SecondOrder) -> Result<f64> {
    mse_hat_iht(sample, y, &ThresholdedProbs::identity(p), so)
}

/// Unbiased estimator of the MSE of the thresholded total.
///
/// Four terms: the squared-bias part over `s₂ = s ∩ U₂` (diagonal and
/// cross products) and the variance part over `s` with `Δ̌_kk = Δ_kk/π_k`,
/// `Δ̌_kl = Δ_kl/π_kl`. Needs exact joint probabilities, all positive on
/// sampled pairs.
pub fn mse_hat_iht(
    sample: &Sample,
    y: &[f64],
    tp: &ThresholdedProbs,
    so: &SecondOrder,
) -> Result<f64> {
    if !so.is_available() {
        return Err(Error::SecondOrderUnavailable);
    }
    let (pi, star) = (tp.pi(), tp.pi_star());
    check_lengths(sample, y, pi)?;
    let units = sample.units();
    for &k in units {
        if pi[k] <= 0.0 {
            return Err(Error::ZeroProbability { unit: k + 1 });
        }
    }
    let a = tp.threshold();
    // (π_k − a) y_k for k ∈ s₂, zero elsewhere
    let shift: Vec<f64> = units
        .iter()
        .map(|&k| match a {
            Some(a) if pi[k] <= a => (pi[k] - a) * y[k],
            _ => 0.0,
        })
        .collect();
    let a2 = a.map_or(1.0, |a| a * a);

    let mut bias_diag = KahanSum::new();
    let mut bias_cross = KahanSum::new();
    let mut var_diag = KahanSum::new();
    let mut var_cross = KahanSum::new();
    for (i, &k) in units.iter().enumerate() {
        bias_diag.add(shift[i] * shift[i] / (a2 * pi[k]));
        var_diag.add((1.0 - pi[k]) * y[k] * y[k] / (star[k] * star[k]));
        for (j, &l) in units.iter().enumerate().skip(i + 1) {
            let pkl = joint_positive(so, k, l)?;
            if shift[i] != 0.0 && shift[j] != 0.0 {
                bias_cross.add(2.0 * shift[i] * shift[j] / (a2 * pkl));
            }
            let delta = pkl - pi[k] * pi[l];
            if delta != 0.0 {
                var_cross.add(2.0 * (delta / pkl) * y[k] * y[l] / (star[k] * star[l]));
            }
        }
    }
    Ok(bias_diag.value() + bias_cross.value() + var_diag.value() + var_cross.value())
}

/// Ratio of weighted totals `Σ_s y_k/w_k ÷ Σ_s z_k/w_k`. The common `N⁻¹`
/// of the two means cancels.
pub fn ratio_estimate<W: InclusionWeights + ?Sized>(
    sample: &Sample,
    y: &[f64],
    z: &[f64],
    w: &W,
) -> Result<f64> {
    if y.len() != z.len() {
        return Err(Error::invalid("y and z have different lengths"));
    }
    let num = weighted_total(sample, y, w)?;
    let den = weighted_total(sample, z, w)?;
    if den == 0.0 || !den.is_finite() {
        return Err(Error::UndefinedRatio);
    }
    Ok(num / den)
}

/// `R̂` with HT weights.
pub fn ratio_hat(sample: &Sample, y: &[f64], z: &[f64], p: &InclusionProbs) -> Result<f64> {
    ratio_estimate(sample, y, z, p)
}

/// `R̂*` with thresholded weights.
pub fn ratio_iht_hat(sample: &Sample, y: &[f64], z: &[f64], tp: &ThresholdedProbs) -> Result<f64> {
    ratio_estimate(sample, y, z, tp)
}

/// Ratio estimator of `t_y` given the known total `t_z`.
pub fn ratio_total<W: InclusionWeights + ?Sized>(
    sample: &Sample,
    y: &[f64],
    z: &[f64],
    t_z: f64,
    w: &W,
) -> Result<f64> {
    Ok(t_z * ratio_estimate(sample, y, z, w)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EstimatorKind {
    Ht,
    Iht,
    Ratio,
    RatioIht,
    RatioTotal,
    RatioTotalIht,
}

impl EstimatorKind {
    pub fn name(self) -> &'static str {
        match self {
            EstimatorKind::Ht => "ht",
            EstimatorKind::Iht => "iht",
            EstimatorKind::Ratio => "ratio",
            EstimatorKind::RatioIht => "ratio_iht",
            EstimatorKind::RatioTotal => "ratio_total",
            EstimatorKind::RatioTotalIht => "ratio_total_iht",
        }
    }

    pub fn thresholded(self) -> bool {
        matches!(
            self,
            EstimatorKind::Iht | EstimatorKind::RatioIht | EstimatorKind::RatioTotalIht
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    #[default]
    Total,
    Mean,
}

/// Point estimate with both scales spelled out.
///
/// For totals, `total` is the estimated population total and `mean` that
/// total divided by `N`; `estimate` repeats whichever `scale` asked for.
/// Ratios are scale-free and carry the ratio in all three fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub estimator: EstimatorKind,
    pub scale: Scale,
    pub estimate: f64,
    pub total: f64,
    pub mean: f64,
    /// Estimated MSE on the requested scale.
    pub mse_hat: Option<f64>,
    pub mse_hat_total: Option<f64>,
    pub population_size: usize,
    pub sample_size: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// Inputs shared by every estimator in [`estimate`].
#[derive(Debug, Clone, Copy)]
pub struct EstimationInput<'a> {
    pub sample: &'a Sample,
    pub y: &'a [f64],
    pub z: Option<&'a [f64]>,
    /// Known `t_z`, turning a ratio into a ratio estimator of `t_y`.
    pub t_z: Option<f64>,
    pub thresholded: &'a ThresholdedProbs,
    pub second_order: &'a SecondOrder,
    /// Population size used for the mean scale.
    pub population_size: usize,
}

/// Run one estimator and package the result.
pub fn estimate(
    kind: EstimatorKind,
    scale: Scale,
    input: EstimationInput<'_>,
) -> Result<EstimateReport> {
    let tp = input.thresholded;
    let plain = InclusionProbs::new(tp.pi().to_vec())?;
    let n = input.population_size as f64;
    let mut warnings = Vec::new();
    let need_z = || {
        input
            .z
            .ok_or_else(|| Error::invalid(format!("estimator {} needs a z column", kind.name())))
    };
    if let Some(z) = input.z {
        if z.iter().any(|&v| v <= 0.0) {
            warnings.push("z has non-positive values; ratio estimates may be unstable".to_string());
        }
    }
    let (total, mse_total) = match kind {
        EstimatorKind::Ht | EstimatorKind::Iht => {
            let t = if kind == EstimatorKind::Ht {
                ht_total(input.sample, input.y, &plain)?
            } else {
                iht_total(input.sample, input.y, tp)?
            };
            let mse = if input.second_order.is_available() {
                let m = if kind == EstimatorKind::Ht {
                    mse_hat_ht(input.sample, input.y, &plain, input.second_order)
                } else {
                    mse_hat_iht(input.sample, input.y, tp, input.second_order)
                };
                match m {
                    Ok(v) => Some(v),
                    Err(Error::ZeroJointProbability { k, l }) => {
                        warnings.push(format!(
                            "MSE estimate skipped: units {k} and {l} have zero joint probability"
                        ));
                        None
                    }
                    Err(e) => return Err(e),
                }
            } else {
                None
            };
            (t, mse)
        }
        EstimatorKind::Ratio | EstimatorKind::RatioIht => {
            let z = need_z()?;
            let r = if kind == EstimatorKind::Ratio {
                ratio_hat(input.sample, input.y, z, &plain)?
            } else {
                ratio_iht_hat(input.sample, input.y, z, tp)?
            };
            return Ok(EstimateReport {
                estimator: kind,
                scale,
                estimate: r,
                total: r,
                mean: r,
                mse_hat: None,
                mse_hat_total: None,
                population_size: input.population_size,
                sample_size: input.sample.len(),
                warnings,
            });
        }
        EstimatorKind::RatioTotal | EstimatorKind::RatioTotalIht => {
            let z = need_z()?;
            let t_z = input
                .t_z
                .ok_or_else(|| Error::invalid("ratio total needs the known z total"))?;
            let t = if kind == EstimatorKind::RatioTotal {
                ratio_total(input.sample, input.y, z, t_z, &plain)?
            } else {
                ratio_total(input.sample, input.y, z, t_z, tp)?
            };
            (t, None)
        }
    };
    let (estimate, mse_hat) = match scale {
        Scale::Total => (total, mse_total),
        Scale::Mean => (total / n, mse_total.map(|m| m / (n * n))),
    };
    Ok(EstimateReport {
        estimator: kind,
        scale,
        estimate,
        total,
        mean: total / n,
        mse_hat,
        mse_hat_total: mse_total,
        population_size: input.population_size,
        sample_size: input.sample.len(),
        warnings,
    })
}
