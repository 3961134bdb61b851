//! Replicated-sampling experiments comparing HT with its thresholded variant.
//!
//! A run builds one population from the master seed, fixes the design and
//! the threshold, then draws `reps` independent samples. Replicate `r` draws
//! from `seed.child(1).child(r)`, so results do not depend on how replicates
//! are scheduled across worker threads; they are reduced in index order.

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::designs::{Design, DesignKind, InclusionProbs, Sample};
use crate::error::{Error, Result};
use crate::estimators::{ratio_estimate, weighted_total, EstimatorKind, Scale};
use crate::population::{
    csv_writer, fmt_f64, gen_example1, gen_example2, gen_example3_sizes, gen_example4, Population,
};
use crate::rng::Seed;
use crate::sum::KahanSum;
use crate::threshold::{apply_threshold, choose_k, ThresholdedProbs};

/// Where the population comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PopulationSpec {
    Example1,
    Example2 {
        rho: f64,
    },
    /// Example 2 values with sizes `|N(50, σ²)|` in place of `x`. With
    /// `sigma2_as_sd` the value is used as the standard deviation instead.
    Example3 {
        rho: f64,
        sigma2: f64,
        #[serde(default)]
        sigma2_as_sd: bool,
    },
    Example4 {
        rho1: f64,
        rho2: f64,
    },
    Csv {
        path: PathBuf,
        y_col: String,
        #[serde(default)]
        z_col: Option<String>,
        #[serde(default)]
        x_col: Option<String>,
    },
}

impl PopulationSpec {
    pub fn name(&self) -> &'static str {
        match self {
            PopulationSpec::Example1 => "example1",
            PopulationSpec::Example2 { .. } => "example2",
            PopulationSpec::Example3 { .. } => "example3",
            PopulationSpec::Example4 { .. } => "example4",
            PopulationSpec::Csv { .. } => "csv",
        }
    }

    /// Build the population and the size variable the design uses.
    pub fn build(&self, seed: Seed) -> Result<(Population, Option<Vec<f64>>)> {
        let pop = match self {
            PopulationSpec::Example1 => gen_example1(seed),
            PopulationSpec::Example2 { rho } => gen_example2(*rho, seed)?,
            PopulationSpec::Example3 {
                rho,
                sigma2,
                sigma2_as_sd,
            } => {
                let variance = if *sigma2_as_sd {
                    sigma2 * sigma2
                } else {
                    *sigma2
                };
                let sizes = gen_example3_sizes(variance, seed.child(2))?;
                gen_example2(*rho, seed)?.with_sizes(sizes)?
            }
            PopulationSpec::Example4 { rho1, rho2 } => gen_example4(*rho1, *rho2, seed)?,
            PopulationSpec::Csv {
                path,
                y_col,
                z_col,
                x_col,
            } => Population::load_csv(path, y_col, z_col.as_deref(), x_col.as_deref())?,
        };
        let sizes = pop.x().map(<[f64]>::to_vec);
        Ok((pop, sizes))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum ThresholdMode {
    Algorithm1,
    Manual { a: f64 },
    None,
}

impl ThresholdMode {
    pub fn apply(self, p: &InclusionProbs) -> Result<ThresholdedProbs> {
        match self {
            ThresholdMode::Algorithm1 => Ok(choose_k(p)),
            ThresholdMode::Manual { a } => apply_threshold(p, a),
            ThresholdMode::None => Ok(ThresholdedProbs::identity(p)),
        }
    }
}

/// What is being estimated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    /// `t_y` (or `ȳ` on the mean scale) by HT and IHT.
    #[default]
    Total,
    /// `R = t_y / t_z` by `R̂` and `R̂*`.
    Ratio,
    /// `t_y` by `t_z·R̂` and `t_z·R̂*`.
    RatioTotal,
}

impl Target {
    pub fn estimators(self) -> [EstimatorKind; 2] {
        match self {
            Target::Total => [EstimatorKind::Ht, EstimatorKind::Iht],
            Target::Ratio => [EstimatorKind::Ratio, EstimatorKind::RatioIht],
            Target::RatioTotal => [EstimatorKind::RatioTotal, EstimatorKind::RatioTotalIht],
        }
    }
}

/// Everything a run depends on apart from the master seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McSettings {
    pub population: PopulationSpec,
    pub design: DesignKind,
    /// Sampling fraction `n/N`; exclusive with `n`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    pub reps: usize,
    #[serde(default)]
    pub target: Target,
    pub threshold: ThresholdMode,
    #[serde(default)]
    pub scale: Scale,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    #[serde(flatten)]
    pub settings: McSettings,
    pub seed: Seed,
}

/// Fixed probabilities of Example 1: blocks of 1000 units at 0.2, 0.001, 0.08.
pub fn example1_probs() -> InclusionProbs {
    let pi = [0.2, 0.001, 0.08]
        .iter()
        .flat_map(|&p| std::iter::repeat_n(p, 1000))
        .collect();
    InclusionProbs::new(pi).expect("valid probabilities")
}

impl McSettings {
    /// Defaults used for the built-in examples: Example 1 is Poisson with
    /// the fixed block probabilities and `a = 0.08`; the others use πPS with
    /// Algorithm 1 at `f = 0.05`. All estimate means.
    pub fn example(population: PopulationSpec, reps: usize) -> Self {
        let example1 = population == PopulationSpec::Example1;
        let target = match population {
            PopulationSpec::Example4 { .. } => Target::Ratio,
            _ => Target::Total,
        };
        Self {
            population,
            design: if example1 {
                DesignKind::Poisson
            } else {
                DesignKind::Pips
            },
            f: (!example1).then_some(0.05),
            n: None,
            reps,
            target,
            threshold: if example1 {
                ThresholdMode::Manual { a: 0.08 }
            } else {
                ThresholdMode::Algorithm1
            },
            scale: Scale::Mean,
        }
    }

    pub fn with_seed(self, seed: Seed) -> McConfig {
        McConfig {
            settings: self,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.reps < 2 {
            return Err(Error::invalid(format!(
                "reps must be at least 2, got {}",
                self.reps
            )));
        }
        if self.f.is_some() && self.n.is_some() {
            return Err(Error::invalid("give either f or n, not both"));
        }
        if let Some(f) = self.f {
            if !(f > 0.0 && f <= 1.0) {
                return Err(Error::invalid(format!("f must lie in (0, 1], got {f}")));
            }
        }
        if self.population == PopulationSpec::Example1 {
            if self.design != DesignKind::Poisson {
                return Err(Error::invalid(
                    "example 1 is defined for Poisson sampling only",
                ));
            }
            if self.f.is_some() || self.n.is_some() {
                return Err(Error::invalid(
                    "example 1 has fixed probabilities; drop f/n",
                ));
            }
        } else if self.f.is_none() && self.n.is_none() {
            return Err(Error::invalid("a sample size is required: give f or n"));
        }
        if self.target != Target::Total
            && matches!(
                self.population,
                PopulationSpec::Example1
                    | PopulationSpec::Example2 { .. }
                    | PopulationSpec::Example3 { .. }
            )
        {
            return Err(Error::invalid(
                "ratio targets need a z column (example 4 or csv)",
            ));
        }
        Ok(())
    }

    fn sample_size(&self, n_pop: usize) -> Result<usize> {
        let n = match (self.n, self.f) {
            (Some(n), _) => n,
            (None, Some(f)) => (f * n_pop as f64).round() as usize,
            (None, None) => unreachable!("validated"),
        };
        if n == 0 || n > n_pop {
            return Err(Error::invalid(format!(
                "sample size {n} must lie in 1..={n_pop}"
            )));
        }
        Ok(n)
    }
}

/// Empirical moments of one estimator over the valid replicates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McRow {
    pub estimator: EstimatorKind,
    pub mean: f64,
    /// `|mean − truth|`.
    pub bias: f64,
    pub bias_sq: f64,
    /// Central moment with denominator M, so `mse = bias_sq + variance`.
    pub variance: f64,
    pub mse: f64,
    /// Standard error of `mse` as a mean of squared errors.
    pub mse_std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McReport {
    pub config_echo: McConfig,
    pub truth: f64,
    pub population_size: usize,
    pub sample_size: f64,
    #[serde(rename = "K")]
    pub k: usize,
    pub a: Option<f64>,
    pub n_modified: usize,
    pub reps: usize,
    pub excluded_replicates: usize,
    pub rows: Vec<McRow>,
    pub re_percent: f64,
}

impl McReport {
    pub fn row(&self, kind: EstimatorKind) -> Option<&McRow> {
        self.rows.iter().find(|r| r.estimator == kind)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes") + "\n"
    }
}

/// `|MSE_HT − MSE_IHT| / MSE_HT × 100`, zero when both vanish.
pub fn relative_efficiency(mse_ht: f64, mse_iht: f64) -> f64 {
    if mse_ht == 0.0 && mse_iht == 0.0 {
        0.0
    } else {
        (mse_ht - mse_iht).abs() / mse_ht * 100.0
    }
}

fn moments(kind: EstimatorKind, values: &[f64], truth: f64) -> McRow {
    let m = values.len() as f64;
    let mean = values.iter().copied().collect::<KahanSum>().value() / m;
    let variance = values
        .iter()
        .map(|v| (v - mean).powi(2))
        .collect::<KahanSum>()
        .value()
        / m;
    let sq: Vec<f64> = values.iter().map(|v| (v - truth).powi(2)).collect();
    let mse = sq.iter().copied().collect::<KahanSum>().value() / m;
    let sq_var = sq
        .iter()
        .map(|s| (s - mse).powi(2))
        .collect::<KahanSum>()
        .value()
        / (m - 1.0);
    let bias = mean - truth;
    McRow {
        estimator: kind,
        mean,
        bias: bias.abs(),
        bias_sq: bias * bias,
        variance,
        mse,
        mse_std_error: (sq_var / m).sqrt(),
    }
}

/// Largest share of replicates that may be excluded, as `excluded·100 ≤ reps`.
pub const MAX_EXCLUDED_PERCENT: usize = 1;

struct Prepared {
    pop: Population,
    design: Design,
    tp: ThresholdedProbs,
    truth: f64,
    divisor: f64,
}

fn prepare(cfg: &McConfig) -> Result<Prepared> {
    let s = &cfg.settings;
    s.validate()?;
    let (pop, sizes) = s.population.build(cfg.seed.child(0))?;
    let n_pop = pop.size();
    let design = if s.population == PopulationSpec::Example1 {
        Design::poisson(example1_probs())
    } else {
        let n = s.sample_size(n_pop)?;
        Design::new(s.design, n, n_pop, sizes.as_deref())?
    };
    let tp = s.threshold.apply(design.probs())?;
    let divisor = match (s.scale, s.target) {
        (_, Target::Ratio) | (Scale::Total, _) => 1.0,
        (Scale::Mean, _) => n_pop as f64,
    };
    let truth = match s.target {
        Target::Total | Target::RatioTotal => pop.total_y() / divisor,
        Target::Ratio => pop
            .ratio()
            .ok_or_else(|| Error::invalid("ratio target needs a z column"))?,
    };
    if s.target != Target::Total && pop.z().is_none() {
        return Err(Error::invalid("ratio target needs a z column"));
    }
    Ok(Prepared {
        pop,
        design,
        tp,
        truth,
        divisor,
    })
}

impl Prepared {
    /// Both estimators on one sample; `None` when either is undefined.
    fn evaluate(&self, target: Target, s: &Sample) -> Result<Option<(f64, f64)>> {
        let y = self.pop.y();
        let p = self.design.probs();
        let pair = match target {
            Target::Total => (
                weighted_total(s, y, p)? / self.divisor,
                weighted_total(s, y, &self.tp)? / self.divisor,
            ),
            Target::Ratio | Target::RatioTotal => {
                let z = self.pop.z().expect("checked in prepare");
                let scale = match target {
                    Target::Ratio => 1.0,
                    _ => self.pop.total_z().expect("z present") / self.divisor,
                };
                match (
                    ratio_estimate(s, y, z, p),
                    ratio_estimate(s, y, z, &self.tp),
                ) {
                    (Ok(a), Ok(b)) => (scale * a, scale * b),
                    (Err(Error::UndefinedRatio), _) | (_, Err(Error::UndefinedRatio)) => {
                        return Ok(None)
                    }
                    (Err(e), _) | (_, Err(e)) => return Err(e),
                }
            }
        };
        Ok(Some(pair))
    }
}

/// Run one experiment on `workers` threads (`None` uses rayon's default).
pub fn run_mc(cfg: &McConfig, workers: Option<usize>) -> Result<McReport> {
    let prep = prepare(cfg)?;
    let s = &cfg.settings;
    let stream = cfg.seed.child(1);
    let job = || -> Result<Vec<Option<(f64, f64)>>> {
        (0..s.reps as u64)
            .into_par_iter()
            .map(|r| {
                let mut rng = stream.child(r).rng();
                let sample = prep.design.draw(&mut rng);
                prep.evaluate(s.target, &sample)
            })
            .collect()
    };
    let results = match workers {
        Some(w) => rayon::ThreadPoolBuilder::new()
            .num_threads(w.max(1))
            .build()
            .map_err(|e| Error::invalid(format!("cannot start {w} workers: {e}")))?
            .install(job)?,
        None => job()?,
    };

    let valid: Vec<(f64, f64)> = results.iter().flatten().copied().collect();
    let excluded = s.reps - valid.len();
    if excluded * 100 > s.reps * MAX_EXCLUDED_PERCENT || valid.len() < 2 {
        return Err(Error::TooManyInvalid {
            excluded,
            reps: s.reps,
            limit: s.reps * MAX_EXCLUDED_PERCENT / 100,
        });
    }
    let [k_plain, k_thresh] = s.target.estimators();
    let plain: Vec<f64> = valid.iter().map(|v| v.0).collect();
    let thresh: Vec<f64> = valid.iter().map(|v| v.1).collect();
    let rows = vec![
        moments(k_plain, &plain, prep.truth),
        moments(k_thresh, &thresh, prep.truth),
    ];
    Ok(McReport {
        config_echo: cfg.clone(),
        truth: prep.truth,
        population_size: prep.pop.size(),
        sample_size: prep.design.probs().target_n(),
        k: prep.tp.k(),
        a: prep.tp.threshold(),
        n_modified: prep.tp.n_modified(),
        reps: s.reps,
        excluded_replicates: excluded,
        re_percent: relative_efficiency(rows[0].mse, rows[1].mse),
        rows,
    })
}

/// A grid of experiments: either explicit configs or a base varied over
/// the listed axes (outer to inner: `rho`, `sigma2`, `f`, `n`).
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    #[serde(default)]
    pub configs: Vec<McSettings>,
    #[serde(default)]
    pub base: Option<McSettings>,
    #[serde(default)]
    pub rho: Vec<f64>,
    #[serde(default)]
    pub sigma2: Vec<f64>,
    #[serde(default)]
    pub f: Vec<f64>,
    #[serde(default)]
    pub n: Vec<usize>,
}

impl GridSpec {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        serde_json::from_str(&text)
            .map_err(|e| Error::invalid(format!("{}: bad grid spec: {e}", path.display())))
    }

    /// Expand into the list of cell settings.
    pub fn cells(&self) -> Result<Vec<McSettings>> {
        let mut cells = self.configs.clone();
        if let Some(base) = &self.base {
            let opt = |v: &[f64]| -> Vec<Option<f64>> {
                if v.is_empty() {
                    vec![None]
                } else {
                    v.iter().copied().map(Some).collect()
                }
            };
            let ns: Vec<Option<usize>> = if self.n.is_empty() {
                vec![None]
            } else {
                self.n.iter().copied().map(Some).collect()
            };
            if !self.f.is_empty() && !self.n.is_empty() {
                return Err(Error::invalid("grid varies both f and n"));
            }
            for rho in opt(&self.rho) {
                for sigma2 in opt(&self.sigma2) {
                    for f in opt(&self.f) {
                        for &n in &ns {
                            let mut cell = base.clone();
                            set_axes(&mut cell.population, rho, sigma2)?;
                            if let Some(f) = f {
                                cell.f = Some(f);
                                cell.n = None;
                            }
                            if let Some(n) = n {
                                cell.n = Some(n);
                                cell.f = None;
                            }
                            cells.push(cell);
                        }
                    }
                }
            }
        } else if !(self.rho.is_empty()
            && self.sigma2.is_empty()
            && self.f.is_empty()
            && self.n.is_empty())
        {
            return Err(Error::invalid("grid axes given without a base config"));
        }
        if cells.is_empty() {
            return Err(Error::invalid("grid is empty"));
        }
        Ok(cells)
    }
}

fn set_axes(pop: &mut PopulationSpec, rho_v: Option<f64>, sigma2_v: Option<f64>) -> Result<()> {
    if let Some(v) = rho_v {
        match pop {
            PopulationSpec::Example2 { rho } | PopulationSpec::Example3 { rho, .. } => *rho = v,
            other => {
                return Err(Error::invalid(format!(
                    "rho axis does not apply to {}",
                    other.name()
                )))
            }
        }
    }
    if let Some(v) = sigma2_v {
        match pop {
            PopulationSpec::Example3 { sigma2, .. } => *sigma2 = v,
            other => {
                return Err(Error::invalid(format!(
                    "sigma2 axis does not apply to {}",
                    other.name()
                )))
            }
        }
    }
    Ok(())
}

/// Outcome of one grid cell.
#[derive(Debug)]
pub struct SweepCell {
    pub config: McConfig,
    pub result: Result<McReport>,
}

/// Run every cell with the same master seed. Failures are kept per cell.
pub fn run_sweep(grid: &GridSpec, seed: Seed, workers: Option<usize>) -> Result<Vec<SweepCell>> {
    Ok(grid
        .cells()?
        .into_iter()
        .map(|settings| {
            let config = settings.with_seed(seed);
            let result = run_mc(&config, workers);
            SweepCell { config, result }
        })
        .collect())
}

const SWEEP_HEADER: [&str; 24] = [
    "cell",
    "population",
    "design",
    "f",
    "n",
    "rho",
    "sigma2",
    "rho1",
    "rho2",
    "threshold",
    "target",
    "scale",
    "seed",
    "K",
    "a",
    "estimator",
    "truth",
    "bias",
    "bias_sq",
    "variance",
    "mse",
    "re_percent",
    "excluded_replicates",
    "error",
];

fn opt_num(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

/// Long-format table: one row per estimator per cell, one row per failed cell.
pub fn write_sweep_csv(path: impl AsRef<Path>, cells: &[SweepCell]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv_writer(path)?;
    let csv_err = |e: csv::Error| Error::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    w.write_record(SWEEP_HEADER).map_err(csv_err)?;
    for (i, cell) in cells.iter().enumerate() {
        let s = &cell.config.settings;
        let (rho, sigma2, rho1, rho2) = match &s.population {
            PopulationSpec::Example2 { rho } => (Some(*rho), None, None, None),
            PopulationSpec::Example3 { rho, sigma2, .. } => (Some(*rho), Some(*sigma2), None, None),
            PopulationSpec::Example4 { rho1, rho2 } => (None, None, Some(*rho1), Some(*rho2)),
            _ => (None, None, None, None),
        };
        let threshold = match s.threshold {
            ThresholdMode::Algorithm1 => "algorithm1".to_string(),
            ThresholdMode::Manual { a } => format!("manual:{}", fmt_f64(a)),
            ThresholdMode::None => "none".to_string(),
        };
        let target = serde_json::to_value(s.target).expect("serializes");
        let scale = serde_json::to_value(s.scale).expect("serializes");
        let mut fixed = vec![
            i.to_string(),
            s.population.name().to_string(),
            s.design.name().to_string(),
            opt_num(s.f),
            s.n.map(|n| n.to_string()).unwrap_or_default(),
            opt_num(rho),
            opt_num(sigma2),
            opt_num(rho1),
            opt_num(rho2),
            threshold,
            target.as_str().unwrap_or_default().to_string(),
            scale.as_str().unwrap_or_default().to_string(),
            cell.config.seed.0.to_string(),
        ];
        match &cell.result {
            Ok(rep) => {
                fixed.push(rep.k.to_string());
                fixed.push(opt_num(rep.a));
                for row in &rep.rows {
                    let mut rec = fixed.clone();
                    rec.extend([
                        row.estimator.name().to_string(),
                        fmt_f64(rep.truth),
                        fmt_f64(row.bias),
                        fmt_f64(row.bias_sq),
                        fmt_f64(row.variance),
                        fmt_f64(row.mse),
                        fmt_f64(rep.re_percent),
                        rep.excluded_replicates.to_string(),
                        String::new(),
                    ]);
                    w.write_record(&rec).map_err(csv_err)?;
                }
            }
            Err(e) => {
                fixed.extend(std::iter::repeat_n(String::new(), 10));
                fixed.push(e.to_string());
                w.write_record(&fixed).map_err(csv_err)?;
            }
        }
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::designs::second_order;
    use crate::exact::exact_moments_ht;
    use std::io::Write;

    fn small_csv(dir: &Path) -> PathBuf {
        let path = dir.join("pop.csv");
        let mut f = std::fs::File::create(&path).unwrap();
        writeln!(f, "y,z,x").unwrap();
        for k in 0..60 {
            let x = 0.05 + (k % 13) as f64 * 0.7 + if k % 17 == 0 { 20.0 } else { 0.0 };
            writeln!(
                f,
                "{},{},{}",
                1.0 + 0.3 * x + (k % 5) as f64,
                2.0 + (k % 3) as f64,
                x
            )
            .unwrap();
        }
        path
    }

    fn csv_settings(path: PathBuf, design: DesignKind, reps: usize) -> McSettings {
        McSettings {
            population: PopulationSpec::Csv {
                path,
                y_col: "y".into(),
                z_col: Some("z".into()),
                x_col: Some("x".into()),
            },
            design,
            f: None,
            n: Some(12),
            reps,
            target: Target::Total,
            threshold: ThresholdMode::Algorithm1,
            scale: Scale::Total,
        }
    }

    #[test]
    fn example1_probs_layout() {
        let p = example1_probs();
        assert_eq!(p.len(), 3000);
        assert_eq!((p.pi()[0], p.pi()[1000], p.pi()[2999]), (0.2, 0.001, 0.08));
    }

    #[test]
    fn no_threshold_gives_identical_columns() {
        let mut s = McSettings::example(PopulationSpec::Example2 { rho: 0.5 }, 50);
        s.threshold = ThresholdMode::None;
        let rep = run_mc(&s.with_seed(Seed(3)), Some(2)).unwrap();
        let (a, b) = (&rep.rows[0], &rep.rows[1]);
        assert_eq!((a.mean, a.variance, a.mse), (b.mean, b.variance, b.mse));
        assert_eq!(rep.re_percent, 0.0);
        assert_eq!(rep.k, 0);
    }

    #[test]
    fn mse_decomposes() {
        let s = McSettings::example(PopulationSpec::Example2 { rho: 0.8 }, 200);
        let rep = run_mc(&s.with_seed(Seed(9)), None).unwrap();
        for row in &rep.rows {
            assert!((row.mse - (row.bias_sq + row.variance)).abs() <= 1e-12 * row.mse);
        }
        let re = relative_efficiency(rep.rows[0].mse, rep.rows[1].mse);
        assert_eq!(re, rep.re_percent);
    }

    #[test]
    fn poisson_mse_near_exact() {
        let dir = tempfile::tempdir().unwrap();
        let s = csv_settings(small_csv(dir.path()), DesignKind::Poisson, 4000);
        let cfg = s.with_seed(Seed(11));
        let rep = run_mc(&cfg, None).unwrap();
        let (pop, sizes) = cfg.settings.population.build(Seed(0)).unwrap();
        let design = Design::new(DesignKind::Poisson, 12, pop.size(), sizes.as_deref()).unwrap();
        let so = second_order(DesignKind::Poisson, design.probs());
        let exact = exact_moments_ht(pop.y(), design.probs(), &so).unwrap();
        let ht = rep.row(EstimatorKind::Ht).unwrap();
        assert!(
            (ht.mse - exact.mse).abs() <= 5.0 * ht.mse_std_error,
            "{} vs {}",
            ht.mse,
            exact.mse
        );
    }

    #[test]
    fn worker_count_does_not_change_report() {
        let s = McSettings::example(
            PopulationSpec::Example4 {
                rho1: 0.7,
                rho2: 0.8,
            },
            120,
        );
        let cfg = s.with_seed(Seed(5));
        let one = run_mc(&cfg, Some(1)).unwrap().to_json();
        let four = run_mc(&cfg, Some(4)).unwrap().to_json();
        assert_eq!(one, four);
    }

    #[test]
    fn config_round_trips_through_json() {
        let cfg = McSettings::example(
            PopulationSpec::Example3 {
                rho: 0.8,
                sigma2: 15.0,
                sigma2_as_sd: false,
            },
            10,
        )
        .with_seed(Seed(2));
        let text = serde_json::to_string(&cfg).unwrap();
        let back: McConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, cfg);
    }

    #[test]
    fn invalid_configs() {
        let base = McSettings::example(PopulationSpec::Example2 { rho: 0.5 }, 10);
        let mut s = base.clone();
        s.reps = 1;
        assert!(run_mc(&s.with_seed(Seed(1)), None)
            .unwrap_err()
            .is_validation());
        let mut s = base.clone();
        s.n = Some(10);
        assert!(run_mc(&s.with_seed(Seed(1)), None).is_err());
        let mut s = base.clone();
        s.f = Some(1.5);
        assert!(run_mc(&s.with_seed(Seed(1)), None).is_err());
        let mut s = base.clone();
        s.target = Target::Ratio;
        assert!(run_mc(&s.with_seed(Seed(1)), None).is_err());
        let mut s = McSettings::example(PopulationSpec::Example1, 10);
        s.design = DesignKind::Srswor;
        assert!(run_mc(&s.with_seed(Seed(1)), None).is_err());
    }

    #[test]
    fn empty_poisson_samples_are_excluded_with_cap() {
        let dir = tempfile::tempdir().unwrap();
        let mut s = csv_settings(small_csv(dir.path()), DesignKind::Poisson, 200);
        s.target = Target::Ratio;
        s.n = Some(1);
        // Expected size 1 leaves about a third of the samples empty.
        let err = run_mc(&s.clone().with_seed(Seed(4)), None).unwrap_err();
        assert!(matches!(err, Error::TooManyInvalid { .. }), "{err}");
        s.n = Some(8);
        let rep = run_mc(&s.with_seed(Seed(4)), None).unwrap();
        assert!(rep.excluded_replicates <= 2);
    }

    #[test]
    fn single_cell_sweep_matches_run() {
        let base = McSettings::example(PopulationSpec::Example2 { rho: 0.5 }, 40);
        let grid = GridSpec {
            configs: vec![base.clone()],
            ..Default::default()
        };
        let cells = run_sweep(&grid, Seed(8), Some(1)).unwrap();
        assert_eq!(cells.len(), 1);
        let direct = run_mc(&base.with_seed(Seed(8)), Some(1)).unwrap();
        assert_eq!(cells[0].result.as_ref().unwrap(), &direct);
    }

    #[test]
    fn grid_expansion_and_failed_cells() {
        let grid: GridSpec = serde_json::from_str(
            r#"{"base": {"population": {"kind": "example3", "rho": 0.8, "sigma2": 5},
                         "design": "pips", "f": 0.05, "reps": 20,
                         "threshold": {"mode": "algorithm1"}, "scale": "mean"},
                "sigma2": [5, -1, 25], "f": [0.02, 0.04]}"#,
        )
        .unwrap();
        let cells = run_sweep(&grid, Seed(1), Some(2)).unwrap();
        assert_eq!(cells.len(), 6);
        assert!(cells[2].result.is_err() && cells[3].result.is_err());
        assert!(cells[5].result.is_ok());
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("sweep.csv");
        write_sweep_csv(&out, &cells).unwrap();
        let text = std::fs::read_to_string(out).unwrap();
        assert_eq!(text.lines().count(), 1 + 4 * 2 + 2);
        assert!(text.lines().next().unwrap().starts_with("cell,population"));
    }

    #[test]
    fn bad_grids() {
        assert!(GridSpec::default().cells().is_err());
        let grid: GridSpec = serde_json::from_str(
            r#"{"base": {"population": {"kind": "example1"}, "design": "poisson", "reps": 5,
                         "threshold": {"mode": "none"}}, "rho": [0.1]}"#,
        )
        .unwrap();
        assert!(grid.cells().is_err());
    }

    #[test]
    fn poisson_ht_bias_within_five_standard_errors() {
        let dir = tempfile::tempdir().unwrap();
        let s = csv_settings(small_csv(dir.path()), DesignKind::Poisson, 300);
        let hits = (0..100u64)
            .filter(|&seed| {
                let rep = run_mc(&s.clone().with_seed(Seed(seed)), Some(1)).unwrap();
                let ht = rep.row(EstimatorKind::Ht).unwrap();
                ht.bias <= 5.0 * (ht.variance / 300.0).sqrt()
            })
            .count();
        assert!(hits >= 99, "{hits}");
    }

    #[test]
    fn example2_rho_grid_improves_everywhere() {
        let grid = GridSpec {
            base: Some(McSettings::example(
                PopulationSpec::Example2 { rho: 0.8 },
                300,
            )),
            rho: vec![0.0, 0.5, 0.9],
            ..Default::default()
        };
        for cell in run_sweep(&grid, Seed(12), None).unwrap() {
            let rep = cell.result.unwrap();
            assert!(rep.re_percent > 0.0);
            assert!(rep.rows[1].mse < rep.rows[0].mse);
        }
    }
}
