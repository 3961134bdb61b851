//! The `survht` command-line front end.
//!
//! Exit codes: 0 on success, 2 for invalid arguments or input data, 1 for
//! runtime failures and for `oracle` checks that do not pass.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::json;

use crate::designs::{second_order, Design, DesignKind, InclusionProbs, Sample, SecondOrder};
use crate::error::{Error, Result};
use crate::estimators::{estimate, EstimationInput, EstimatorKind, Scale};
use crate::exact::{oracle_c4, oracle_mse_unbiased, oracle_poisson_exact, oracle_srswor_orders};
use crate::montecarlo::{
    run_mc, run_sweep, write_sweep_csv, GridSpec, McSettings, PopulationSpec, Target, ThresholdMode,
};
use crate::population::{csv_headers, csv_writer, fmt_f64, read_columns, Population};
use crate::rng::Seed;
use crate::threshold::ThresholdedProbs;

fn parse_enum<T: DeserializeOwned>(s: &str) -> std::result::Result<T, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| format!("unknown value `{s}`"))
}

#[derive(Debug, Parser)]
#[command(
    name = "survht",
    version,
    about = "HT and thresholded-HT estimation for survey samples"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Compute inclusion probabilities and optionally draw a sample.
    Design(DesignArgs),
    /// Choose the threshold rank K and write thresholded probabilities.
    ChooseK(ChooseKArgs),
    /// Estimate a total, mean or ratio from a drawn sample.
    Estimate(EstimateArgs),
    /// Run a Monte Carlo experiment.
    Simulate(SimulateArgs),
    /// Run a grid of Monte Carlo experiments.
    Sweep(SweepArgs),
    /// Run a built-in exactness check.
    Oracle(OracleArgs),
}

#[derive(Debug, Args)]
struct DesignArgs {
    /// Population CSV holding the size column.
    #[arg(long, requires = "x_col")]
    pop: Option<PathBuf>,
    #[arg(long)]
    x_col: Option<String>,
    /// Population size when no size column is used.
    #[arg(long, conflicts_with = "pop")]
    n_pop: Option<usize>,
    #[arg(long, value_parser = parse_enum::<DesignKind>)]
    design: DesignKind,
    /// Sample size (number of draws for ppswr).
    #[arg(long)]
    n: usize,
    /// Draw one sample and add a `sampled` column.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct ChooseKArgs {
    /// CSV with a probability column.
    #[arg(long)]
    pi: PathBuf,
    #[arg(long, default_value = "pi")]
    pi_col: String,
    /// Use this threshold instead of Algorithm 1.
    #[arg(long)]
    a: Option<f64>,
    /// Write unit, pi, pi_star (and any sampled column) here.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Deserialize, Serialize)]
#[serde(rename_all = "lowercase")]
enum ThresholdArg {
    Algorithm1,
    Manual,
    None,
}

#[derive(Debug, Args)]
struct EstimateArgs {
    #[arg(long)]
    pop: PathBuf,
    #[arg(long, default_value = "y")]
    y_col: String,
    #[arg(long)]
    z_col: Option<String>,
    #[arg(long)]
    x_col: Option<String>,
    /// Known z total for the ratio estimators of t_y (defaults to the
    /// population's z total).
    #[arg(long)]
    t_z: Option<f64>,
    /// CSV with a 1-based `unit` column, optionally `sampled`, `pi`, `pi_star`.
    #[arg(long)]
    sample: PathBuf,
    #[arg(long, value_parser = parse_enum::<DesignKind>)]
    design: Option<DesignKind>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, value_parser = parse_enum::<ThresholdArg>)]
    threshold: Option<ThresholdArg>,
    #[arg(long)]
    a: Option<f64>,
    #[arg(long, default_value = "iht", value_parser = parse_enum::<EstimatorKind>)]
    estimator: EstimatorKind,
    #[arg(long, default_value = "total", value_parser = parse_enum::<Scale>)]
    scale: Scale,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[arg(long, value_parser = clap::value_parser!(u8).range(1..=4), conflicts_with = "pop")]
    example: Option<u8>,
    /// Population CSV instead of a built-in example.
    #[arg(long, required_unless_present = "example")]
    pop: Option<PathBuf>,
    #[arg(long, default_value = "y")]
    y_col: String,
    #[arg(long)]
    z_col: Option<String>,
    #[arg(long)]
    x_col: Option<String>,
    #[arg(long)]
    rho: Option<f64>,
    #[arg(long)]
    rho1: Option<f64>,
    #[arg(long)]
    rho2: Option<f64>,
    #[arg(long)]
    sigma2: Option<f64>,
    /// Example 3: treat --sigma2 as the standard deviation of the sizes.
    #[arg(long)]
    sigma2_as_sd: bool,
    #[arg(long, value_parser = parse_enum::<DesignKind>)]
    design: Option<DesignKind>,
    #[arg(long, conflicts_with = "n")]
    f: Option<f64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, value_parser = parse_enum::<Target>)]
    target: Option<Target>,
    #[arg(long, value_parser = parse_enum::<ThresholdArg>)]
    threshold: Option<ThresholdArg>,
    #[arg(long)]
    a: Option<f64>,
    #[arg(long, value_parser = parse_enum::<Scale>)]
    scale: Option<Scale>,
    #[arg(long, default_value_t = 2000)]
    reps: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long, env = "SURVHT_WORKERS")]
    workers: Option<usize>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    /// JSON grid: `{"configs": [...]}` or `{"base": {...}, "f": [...], ...}`.
    #[arg(long)]
    grid: PathBuf,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, env = "SURVHT_WORKERS")]
    workers: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Deserialize, Serialize)]
#[serde(rename_all = "kebab-case")]
enum OracleCheck {
    PoissonExact,
    SrsworOrders,
    MseUnbiased,
    C4,
}

#[derive(Debug, Args)]
struct OracleArgs {
    #[arg(long, value_parser = parse_enum::<OracleCheck>)]
    check: OracleCheck,
    #[arg(long, default_value_t = 8)]
    n_pop: usize,
    /// SRSWOR sample size (default half the population).
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long, default_value_t = 100)]
    instances: usize,
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Run the CLI on `args` (including the program name) and return the exit code.
pub fn main<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                return 0;
            }
            let text = e.to_string();
            let first = text.lines().next().unwrap_or("invalid arguments");
            eprintln!("{first} (see --help)");
            return 2;
        }
    };
    let outcome = match cli.command {
        Command::Design(a) => cmd_design(a),
        Command::ChooseK(a) => cmd_choose_k(a),
        Command::Estimate(a) => cmd_estimate(a),
        Command::Simulate(a) => cmd_simulate(a),
        Command::Sweep(a) => cmd_sweep(a),
        Command::Oracle(a) => cmd_oracle(a),
    };
    match outcome {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_validation() {
                2
            } else {
                1
            }
        }
    }
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable") + "\n"
}

/// CSV outputs carry their configuration in `<out>.json`.
fn write_sidecar(out: &Path, config: &serde_json::Value) -> Result<PathBuf> {
    let mut name = out.as_os_str().to_owned();
    name.push(".json");
    let path = PathBuf::from(name);
    write_text(&path, &to_json(config))?;
    Ok(path)
}

fn csv_err(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| Error::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

fn write_rows(path: &Path, header: &[&str], rows: impl Iterator<Item = Vec<String>>) -> Result<()> {
    let mut w = csv_writer(path)?;
    w.write_record(header).map_err(csv_err(path))?;
    for r in rows {
        w.write_record(&r).map_err(csv_err(path))?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn read_sizes(path: &Path, col: &str) -> Result<Vec<f64>> {
    let x = read_columns(path, &[Some(col)])?
        .remove(0)
        .expect("requested");
    if let Some(row) = x.iter().position(|&v| v <= 0.0) {
        return Err(Error::BadCell {
            path: path.to_path_buf(),
            row: row + 1,
            column: col.to_string(),
            message: format!("size must be positive, got {}", x[row]),
        });
    }
    Ok(x)
}

fn cmd_design(a: DesignArgs) -> Result<i32> {
    let sizes = match (&a.pop, &a.x_col) {
        (Some(p), Some(c)) => Some(read_sizes(p, c)?),
        _ => None,
    };
    let n_pop = match (&sizes, a.n_pop) {
        (Some(x), _) => x.len(),
        (None, Some(n)) => n,
        (None, None) => return Err(Error::invalid("give --pop with --x-col, or --n-pop")),
    };
    let design = Design::new(a.design, a.n, n_pop, sizes.as_deref())?;
    let sample = a.seed.map(|s| design.draw(&mut Seed(s).rng()));
    let pi = design.probs().pi();
    let mut header = vec!["unit", "pi"];
    if sample.is_some() {
        header.push("sampled");
    }
    write_rows(
        &a.out,
        &header,
        (0..n_pop).map(|k| {
            let mut r = vec![(k + 1).to_string(), fmt_f64(pi[k])];
            if let Some(s) = &sample {
                r.push(u8::from(s.contains(k)).to_string());
            }
            r
        }),
    )?;
    let config = json!({
        "command": "design",
        "pop": a.pop,
        "x_col": a.x_col,
        "n_pop": n_pop,
        "design": a.design,
        "n": a.n,
        "seed": a.seed,
        "out": a.out,
    });
    write_sidecar(&a.out, &config)?;
    print!(
        "{} design, N = {n_pop}, expected sample size {:.4}",
        a.design.name(),
        design.probs().target_n()
    );
    match &sample {
        Some(s) => println!(", drew {} units", s.len()),
        None => println!(),
    }
    Ok(0)
}

fn cmd_choose_k(a: ChooseKArgs) -> Result<i32> {
    let headers = csv_headers(&a.pi)?;
    let has = |c: &str| headers.iter().any(|h| h == c);
    let cols = read_columns(
        &a.pi,
        &[
            Some(&a.pi_col),
            has("unit").then_some("unit"),
            has("sampled").then_some("sampled"),
        ],
    )?;
    let mut cols = cols.into_iter();
    let pi = cols.next().flatten().expect("requested");
    let units = cols.next().flatten();
    let sampled = cols.next().flatten();
    let p = InclusionProbs::new(pi)?;
    let tp = match a.a {
        Some(v) => crate::threshold::apply_threshold(&p, v)?,
        None => crate::threshold::choose_k(&p),
    };
    let config = json!({
        "command": "choose-k",
        "pi": a.pi,
        "pi_col": a.pi_col,
        "a": a.a,
        "mode": if a.a.is_some() { "manual" } else { "algorithm1" },
        "out": a.out,
    });
    if let Some(out) = &a.out {
        let mut header = vec!["unit", "pi", "pi_star"];
        if sampled.is_some() {
            header.push("sampled");
        }
        write_rows(
            out,
            &header,
            (0..tp.len()).map(|k| {
                let unit = units.as_ref().map_or((k + 1) as f64, |u| u[k]);
                let mut r = vec![
                    format!("{unit}"),
                    fmt_f64(tp.pi()[k]),
                    fmt_f64(tp.pi_star()[k]),
                ];
                if let Some(s) = &sampled {
                    r.push(format!("{}", s[k]));
                }
                r
            }),
        )?;
        write_sidecar(out, &config)?;
    }
    let report = json!({
        "K": tp.k(),
        "a": tp.threshold(),
        "n_modified": tp.n_modified(),
        "u2_size": tp.u2().len(),
        "config": config,
    });
    print!("{}", to_json(&report));
    Ok(0)
}

/// Units (0-based) listed in the sample file and the optional per-row columns.
struct SampleFile {
    units: Vec<usize>,
    sampled: Option<Vec<bool>>,
    pi: Option<Vec<f64>>,
    pi_star: Option<Vec<f64>>,
}

fn read_sample_file(path: &Path, n_pop: usize) -> Result<SampleFile> {
    let headers = csv_headers(path)?;
    let has = |c: &'static str| headers.iter().any(|h| h == c).then_some(c);
    let mut cols = read_columns(
        path,
        &[Some("unit"), has("sampled"), has("pi"), has("pi_star")],
    )?
    .into_iter();
    let raw_units = cols.next().flatten().expect("requested");
    let bad = |row: usize, column: &str, message: String| Error::BadCell {
        path: path.to_path_buf(),
        row: row + 1,
        column: column.to_string(),
        message,
    };
    let units = raw_units
        .iter()
        .enumerate()
        .map(|(row, &u)| {
            if u.fract() == 0.0 && u >= 1.0 && u <= n_pop as f64 {
                Ok(u as usize - 1)
            } else {
                Err(bad(
                    row,
                    "unit",
                    format!("unit must be an integer in 1..={n_pop}, got {u}"),
                ))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    let sampled = cols
        .next()
        .flatten()
        .map(|v| {
            v.iter()
                .enumerate()
                .map(|(row, &s)| match s {
                    0.0 => Ok(false),
                    1.0 => Ok(true),
                    _ => Err(bad(row, "sampled", format!("expected 0 or 1, got {s}"))),
                })
                .collect::<Result<Vec<_>>>()
        })
        .transpose()?;
    Ok(SampleFile {
        units,
        sampled,
        pi: cols.next().flatten(),
        pi_star: cols.next().flatten(),
    })
}

/// Reorder a per-row column into unit order when the rows cover every unit once.
fn by_unit(units: &[usize], values: &[f64], n_pop: usize) -> Option<Vec<f64>> {
    if units.len() != n_pop {
        return None;
    }
    let mut out = vec![f64::NAN; n_pop];
    for (&u, &v) in units.iter().zip(values) {
        if !out[u].is_nan() {
            return None;
        }
        out[u] = v;
    }
    Some(out)
}

fn threshold_mode(mode: Option<ThresholdArg>, a: Option<f64>) -> Result<ThresholdMode> {
    match (mode, a) {
        (Some(ThresholdArg::Manual) | None, Some(a)) => Ok(ThresholdMode::Manual { a }),
        (Some(ThresholdArg::Manual), None) => Err(Error::invalid("--threshold manual needs --a")),
        (Some(_), Some(_)) => Err(Error::invalid("--a only applies to --threshold manual")),
        (Some(ThresholdArg::None), None) => Ok(ThresholdMode::None),
        (Some(ThresholdArg::Algorithm1) | None, None) => Ok(ThresholdMode::Algorithm1),
    }
}

fn cmd_estimate(a: EstimateArgs) -> Result<i32> {
    let pop = Population::load_csv(&a.pop, &a.y_col, a.z_col.as_deref(), a.x_col.as_deref())?;
    let n_pop = pop.size();
    let file = read_sample_file(&a.sample, n_pop)?;
    let mut warnings = Vec::new();

    let pi_from_file = file
        .pi
        .as_ref()
        .and_then(|v| by_unit(&file.units, v, n_pop));
    let probs = match (pi_from_file, a.design, a.n) {
        (Some(pi), _, _) => InclusionProbs::new(pi)?,
        (None, Some(kind), Some(n)) => Design::new(kind, n, n_pop, pop.x())?.probs().clone(),
        _ => {
            return Err(Error::invalid(
                "no inclusion probabilities: give --design and --n, or a sample file with a pi value for every unit",
            ))
        }
    };
    let star_from_file = file
        .pi_star
        .as_ref()
        .and_then(|v| by_unit(&file.units, v, n_pop));
    let (tp, threshold) = match star_from_file {
        Some(star) if a.threshold.is_none() && a.a.is_none() => (
            ThresholdedProbs::from_parts(probs.pi().to_vec(), star)?,
            json!({"mode": "file"}),
        ),
        _ => {
            let mode = threshold_mode(a.threshold, a.a)?;
            (
                mode.apply(&probs)?,
                serde_json::to_value(mode).expect("serializable"),
            )
        }
    };
    let so = match a.design {
        Some(kind) => second_order(kind, &probs),
        None => SecondOrder::Unavailable,
    };
    if !so.is_available() && matches!(a.estimator, EstimatorKind::Ht | EstimatorKind::Iht) {
        warnings.push("no MSE estimate: joint probabilities unknown for this design (pass --design poisson or srswor)".to_string());
    }
    let units: Vec<usize> = match &file.sampled {
        Some(flags) => file
            .units
            .iter()
            .zip(flags)
            .filter(|(_, &s)| s)
            .map(|(&u, _)| u)
            .collect(),
        None => file.units.clone(),
    };
    let sample = Sample::from_units(units, n_pop)?;
    let t_z = a.t_z.or_else(|| pop.total_z());
    let mut report = estimate(
        a.estimator,
        a.scale,
        EstimationInput {
            sample: &sample,
            y: pop.y(),
            z: pop.z(),
            t_z,
            thresholded: &tp,
            second_order: &so,
            population_size: n_pop,
        },
    )?;
    report.warnings.extend(warnings);
    let out = json!({
        "config": {
            "command": "estimate",
            "pop": a.pop,
            "y_col": a.y_col,
            "z_col": a.z_col,
            "x_col": a.x_col,
            "t_z": t_z,
            "sample": a.sample,
            "design": a.design,
            "n": a.n,
            "threshold": threshold,
            "estimator": a.estimator,
            "scale": a.scale,
        },
        "K": tp.k(),
        "a": tp.threshold(),
        "report": report,
    });
    match &a.out {
        Some(path) => {
            write_text(path, &to_json(&out))?;
            println!(
                "{} = {} (n = {}, K = {}){}",
                a.estimator.name(),
                report.estimate,
                report.sample_size,
                tp.k(),
                report
                    .mse_hat
                    .map(|m| format!(", estimated MSE {m}"))
                    .unwrap_or_default()
            );
        }
        None => print!("{}", to_json(&out)),
    }
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    Ok(0)
}

fn simulate_settings(a: &SimulateArgs) -> Result<McSettings> {
    let reject = |flag: &str, given: bool, what: &str| {
        if given {
            Err(Error::invalid(format!("{flag} does not apply to {what}")))
        } else {
            Ok(())
        }
    };
    if a.sigma2_as_sd && a.example != Some(3) {
        return Err(Error::invalid("--sigma2-as-sd only applies to example 3"));
    }
    let population = match (a.example, &a.pop) {
        (Some(1), _) => {
            reject(
                "--rho/--rho1/--rho2/--sigma2",
                a.rho.or(a.rho1).or(a.rho2).or(a.sigma2).is_some(),
                "example 1",
            )?;
            PopulationSpec::Example1
        }
        (Some(2), _) => {
            reject(
                "--rho1/--rho2/--sigma2",
                a.rho1.or(a.rho2).or(a.sigma2).is_some(),
                "example 2",
            )?;
            PopulationSpec::Example2 {
                rho: a.rho.unwrap_or(0.8),
            }
        }
        (Some(3), _) => {
            reject("--rho1/--rho2", a.rho1.or(a.rho2).is_some(), "example 3")?;
            PopulationSpec::Example3 {
                rho: a.rho.unwrap_or(0.8),
                sigma2: a.sigma2.unwrap_or(25.0),
                sigma2_as_sd: a.sigma2_as_sd,
            }
        }
        (Some(4), _) => {
            reject("--rho/--sigma2", a.rho.or(a.sigma2).is_some(), "example 4")?;
            PopulationSpec::Example4 {
                rho1: a.rho1.unwrap_or(0.7),
                rho2: a.rho2.unwrap_or(0.8),
            }
        }
        (None, Some(path)) => {
            reject(
                "--rho/--rho1/--rho2/--sigma2",
                a.rho.or(a.rho1).or(a.rho2).or(a.sigma2).is_some(),
                "a CSV population",
            )?;
            PopulationSpec::Csv {
                path: path.clone(),
                y_col: a.y_col.clone(),
                z_col: a.z_col.clone(),
                x_col: a.x_col.clone(),
            }
        }
        _ => return Err(Error::invalid("give --example or --pop")),
    };
    let mut s = McSettings::example(population, a.reps);
    if matches!(s.population, PopulationSpec::Csv { .. }) {
        s.scale = Scale::Total;
        if a.z_col.is_some() && a.target.is_none() {
            s.target = Target::Total;
        }
    }
    if let Some(d) = a.design {
        s.design = d;
    }
    if a.f.is_some() || a.n.is_some() {
        s.f = a.f;
        s.n = a.n;
    }
    if let Some(t) = a.target {
        s.target = t;
    }
    if a.threshold.is_some() || a.a.is_some() {
        s.threshold = threshold_mode(a.threshold, a.a)?;
    }
    if let Some(sc) = a.scale {
        s.scale = sc;
    }
    Ok(s)
}

fn cmd_simulate(a: SimulateArgs) -> Result<i32> {
    let cfg = simulate_settings(&a)?.with_seed(Seed(a.seed));
    let report = run_mc(&cfg, a.workers)?;
    let text = report.to_json();
    match &a.out {
        Some(path) => {
            write_text(path, &text)?;
            println!(
                "truth {:.6e}; K = {}, a = {}; excluded {} of {}",
                report.truth,
                report.k,
                report.a.map_or("none".to_string(), |v| v.to_string()),
                report.excluded_replicates,
                report.reps
            );
            for r in &report.rows {
                println!(
                    "{:<16} bias {:.4e}  var {:.4e}  mse {:.4e}",
                    r.estimator.name(),
                    r.bias,
                    r.variance,
                    r.mse
                );
            }
            println!("Re = {:.2}%", report.re_percent);
        }
        None => print!("{text}"),
    }
    Ok(0)
}

fn cmd_sweep(a: SweepArgs) -> Result<i32> {
    let grid = GridSpec::load(&a.grid)?;
    let cells = run_sweep(&grid, Seed(a.seed), a.workers)?;
    write_sweep_csv(&a.out, &cells)?;
    let failed: Vec<usize> = cells
        .iter()
        .enumerate()
        .filter(|(_, c)| c.result.is_err())
        .map(|(i, _)| i)
        .collect();
    println!("{} cells, {} failed", cells.len(), failed.len());
    for i in failed {
        if let Err(e) = &cells[i].result {
            eprintln!("cell {i}: {e}");
        }
    }
    Ok(0)
}

fn cmd_oracle(a: OracleArgs) -> Result<i32> {
    let seed = Seed(a.seed);
    let n = a.n.unwrap_or(a.n_pop / 2);
    if n > a.n_pop {
        return Err(Error::invalid(format!(
            "--n {n} exceeds --n-pop {}",
            a.n_pop
        )));
    }
    let report = match a.check {
        OracleCheck::PoissonExact => oracle_poisson_exact(a.n_pop, a.instances, seed)?,
        OracleCheck::MseUnbiased => oracle_mse_unbiased(a.n_pop, a.instances, seed)?,
        OracleCheck::SrsworOrders => oracle_srswor_orders(a.n_pop, n)?,
        OracleCheck::C4 => oracle_c4(a.n_pop, n, a.instances, seed)?,
    };
    let out = json!({
        "config": {
            "command": "oracle",
            "check": a.check,
            "n_pop": a.n_pop,
            "n": n,
            "seed": a.seed,
            "instances": a.instances,
        },
        "result": report,
    });
    if let Some(path) = &a.out {
        write_text(path, &to_json(&out))?;
    }
    print!("{}", to_json(&out));
    Ok(if report.pass { 0 } else { 1 })
}
