//! Finite populations: unit values, CSV I/O and the synthetic generators used
//! by the simulation studies.

use std::path::Path;

use crate::error::{Error, Result};
use crate::rng::{open_unit, std_normal, Seed};
use crate::sum::ksum;

/// Size of every synthetic population.
pub const SYNTHETIC_N: usize = 3000;

/// Unit values of a finite population.
///
/// `y` is the study variable, `z` an optional second characteristic used
/// as the ratio denominator, and `x` an optional strictly positive size
/// variable.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    y: Vec<f64>,
    z: Option<Vec<f64>>,
    x: Option<Vec<f64>>,
}

impl Population {
    pub fn new(y: Vec<f64>, z: Option<Vec<f64>>, x: Option<Vec<f64>>) -> Result<Self> {
        if y.is_empty() {
            return Err(Error::invalid("population must contain at least one unit"));
        }
        let n = y.len();
        for (name, col) in [("z", &z), ("x", &x)] {
            if let Some(v) = col {
                if v.len() != n {
                    return Err(Error::invalid(format!(
                        "column {name} has {} values, expected {n}",
                        v.len()
                    )));
                }
            }
        }
        if let Some(x) = &x {
            if let Some(k) = x.iter().position(|&v| v <= 0.0 || !v.is_finite()) {
                return Err(Error::invalid(format!(
                    "size variable must be positive, unit {} has {}",
                    k + 1,
                    x[k]
                )));
            }
        }
        let finite = |v: &[f64]| v.iter().all(|a| a.is_finite());
        if !finite(&y) || !z.as_deref().is_none_or(finite) {
            return Err(Error::invalid("population values must be finite"));
        }
        Ok(Self { y, z, x })
    }

    pub fn size(&self) -> usize {
        self.y.len()
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn z(&self) -> Option<&[f64]> {
        self.z.as_deref()
    }

    pub fn x(&self) -> Option<&[f64]> {
        self.x.as_deref()
    }

    pub fn total_y(&self) -> f64 {
        ksum(self.y.iter().copied())
    }

    pub fn total_z(&self) -> Option<f64> {
        self.z.as_ref().map(|z| ksum(z.iter().copied()))
    }

    /// `t_y / t_z`, when `z` is present.
    pub fn ratio(&self) -> Option<f64> {
        self.total_z().map(|tz| self.total_y() / tz)
    }

    /// Replace the size variable.
    pub fn with_sizes(mut self, x: Vec<f64>) -> Result<Self> {
        self.x = Some(x);
        Self::new(self.y, self.z, self.x)
    }

    /// Read a population from a headed CSV file, binding columns by name.
    pub fn load_csv(
        path: impl AsRef<Path>,
        y_col: &str,
        z_col: Option<&str>,
        x_col: Option<&str>,
    ) -> Result<Self> {
        let path = path.as_ref();
        let mut columns = read_columns(path, &[Some(y_col), z_col, x_col])?;
        let x = columns.pop().unwrap();
        let z = columns.pop().unwrap();
        let y = columns.pop().unwrap().unwrap();
        if let (Some(x), Some(name)) = (&x, x_col) {
            if let Some(k) = x.iter().position(|&v| v.is_nan() || v <= 0.0) {
                return Err(Error::BadCell {
                    path: path.to_path_buf(),
                    row: k + 1,
                    column: name.to_string(),
                    message: format!("size must be positive, got {}", x[k]),
                });
            }
        }
        Self::new(y, z, x)
    }

    /// Write columns `y`, then `z` and `x` when present, at 17 significant digits.
    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut names = vec!["y"];
        let mut cols = vec![&self.y];
        if let Some(z) = &self.z {
            names.push("z");
            cols.push(z);
        }
        if let Some(x) = &self.x {
            names.push("x");
            cols.push(x);
        }
        let mut w = csv_writer(path)?;
        let csv_err = |e: csv::Error| Error::Csv {
            path: path.to_path_buf(),
            message: e.to_string(),
        };
        w.write_record(&names).map_err(csv_err)?;
        for k in 0..self.size() {
            w.write_record(cols.iter().map(|c| fmt_f64(c[k])))
                .map_err(csv_err)?;
        }
        w.flush().map_err(|e| Error::Io {
            path: path.to_path_buf(),
            source: e,
        })
    }
}

/// Lossless decimal rendering (17 significant digits).
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub(crate) fn csv_writer(path: &Path) -> Result<csv::Writer<std::fs::File>> {
    let file = std::fs::File::create(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    Ok(csv::Writer::from_writer(file))
}

/// Header names of a CSV file.
pub(crate) fn csv_headers(path: &Path) -> Result<Vec<String>> {
    let file = std::fs::File::open(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(file);
    let headers = rdr.headers().map_err(|e| Error::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    Ok(headers.iter().map(str::to_string).collect())
}

/// Read named numeric columns from a headed CSV. `None` entries are skipped
/// and come back as `None`.
pub(crate) fn read_columns(path: &Path, names: &[Option<&str>]) -> Result<Vec<Option<Vec<f64>>>> {
    let file = std::fs::File::open(path).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })?;
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(file);
    let csv_err = |e: csv::Error| Error::Csv {
        path: path.to_path_buf(),
        message: e.to_string(),
    };
    let headers = rdr.headers().map_err(csv_err)?.clone();
    let idx: Vec<Option<usize>> = names
        .iter()
        .map(|name| {
            name.map(|n| {
                headers
                    .iter()
                    .position(|h| h == n)
                    .ok_or_else(|| Error::MissingColumn {
                        path: path.to_path_buf(),
                        column: n.to_string(),
                    })
            })
            .transpose()
        })
        .collect::<Result<_>>()?;
    let mut out: Vec<Option<Vec<f64>>> = idx.iter().map(|i| i.map(|_| Vec::new())).collect();
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(csv_err)?;
        for (slot, (col, name)) in out.iter_mut().zip(idx.iter().zip(names)) {
            let (Some(vals), Some(c), Some(name)) = (slot, col, name) else {
                continue;
            };
            let cell = rec.get(*c).unwrap_or("");
            let v: f64 = cell
                .parse()
                .ok()
                .filter(|v: &f64| v.is_finite())
                .ok_or_else(|| Error::BadCell {
                    path: path.to_path_buf(),
                    row: row + 1,
                    column: name.to_string(),
                    message: format!("`{cell}` is not a finite number"),
                })?;
            vals.push(v);
        }
    }
    Ok(out)
}

fn check_unit_interval(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "{name} must lie in [0, 1], got {v}"
        )))
    }
}

/// Example 1: `y_k = |y0_k|`, `y0_k ~ N(0, 1)`, N = 3000.
pub fn gen_example1(seed: Seed) -> Population {
    let mut rng = seed.child(0).rng();
    let y = (0..SYNTHETIC_N)
        .map(|_| std_normal(&mut rng).abs())
        .collect();
    Population::new(y, None, None).expect("generated population is valid")
}

/// Example 2: `x_k ~ U(0, 2)`, `y_k = √3·ρ·x_k + √(3 − 3ρ²)·|e_k|`.
pub fn gen_example2(rho: f64, seed: Seed) -> Result<Population> {
    check_unit_interval("rho", rho)?;
    let x = uniform_sizes(2.0, seed.child(0));
    let mut noise = seed.child(1).rng();
    let signal = 3f64.sqrt() * rho;
    let spread = (3.0 - 3.0 * rho * rho).sqrt();
    let y = x
        .iter()
        .map(|&xk| signal * xk + spread * std_normal(&mut noise).abs())
        .collect();
    Population::new(y, None, Some(x))
}

/// Example 3 size variable: `c_i = |N(50, σ²)|`, exact zeros redrawn.
pub fn gen_example3_sizes(sigma2: f64, seed: Seed) -> Result<Vec<f64>> {
    if sigma2.is_nan() || sigma2 <= 0.0 || !sigma2.is_finite() {
        return Err(Error::invalid(format!(
            "sigma2 must be positive, got {sigma2}"
        )));
    }
    let sd = sigma2.sqrt();
    let mut rng = seed.child(0).rng();
    Ok((0..SYNTHETIC_N)
        .map(|_| loop {
            let c = (50.0 + sd * std_normal(&mut rng)).abs();
            if c > 0.0 {
                break c;
            }
        })
        .collect())
}

/// Example 4: `x_k ~ U(0, 1)`; `y` and `z` use `√12·ρ·x_k + √(3 − 3ρ²)·|e|`
/// with independent noises.
pub fn gen_example4(rho1: f64, rho2: f64, seed: Seed) -> Result<Population> {
    check_unit_interval("rho1", rho1)?;
    check_unit_interval("rho2", rho2)?;
    let x = uniform_sizes(1.0, seed.child(0));
    let draw = |s: Seed| {
        let mut rng = s.rng();
        (0..SYNTHETIC_N)
            .map(|_| std_normal(&mut rng))
            .collect::<Vec<_>>()
    };
    let (e1, e2) = (draw(seed.child(1)), draw(seed.child(2)));
    let y = example4_column(&x, &e1, rho1);
    let z = example4_column(&x, &e2, rho2);
    Population::new(y, Some(z), Some(x))
}

fn example4_column(x: &[f64], noise: &[f64], rho: f64) -> Vec<f64> {
    let signal = 12f64.sqrt() * rho;
    let spread = (3.0 - 3.0 * rho * rho).sqrt();
    x.iter()
        .zip(noise)
        .map(|(&xk, &e)| signal * xk + spread * e.abs())
        .collect()
}

fn uniform_sizes(upper: f64, seed: Seed) -> Vec<f64> {
    let mut rng = seed.rng();
    (0..SYNTHETIC_N)
        .map(|_| upper * open_unit(&mut rng))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn mean(v: &[f64]) -> f64 {
        v.iter().sum::<f64>() / v.len() as f64
    }

    fn write_tmp(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn load_three_rows() {
        let f = write_tmp("id,y,x\n1,1,2\n2,2,3\n3,3,4\n");
        let p = Population::load_csv(f.path(), "y", None, None).unwrap();
        assert_eq!(p.size(), 3);
        assert_eq!(p.y(), &[1.0, 2.0, 3.0]);
        assert!(p.z().is_none());
        assert!(p.x().is_none());
        let p = Population::load_csv(f.path(), "y", None, Some("x")).unwrap();
        assert_eq!(p.x().unwrap(), &[2.0, 3.0, 4.0]);
    }

    #[test]
    fn load_errors() {
        let missing = Population::load_csv("/nonexistent/pop.csv", "y", None, None);
        assert!(matches!(missing, Err(Error::Io { .. })));

        let f = write_tmp("y,x\n1,2\n");
        let err = Population::load_csv(f.path(), "w", None, None).unwrap_err();
        assert!(matches!(err, Error::MissingColumn { ref column, .. } if column == "w"));

        let f = write_tmp("y,x\n1,2\nabc,3\n");
        let err = Population::load_csv(f.path(), "y", None, None).unwrap_err();
        assert!(matches!(err, Error::BadCell { row: 2, .. }), "{err}");

        let f = write_tmp("y,x\n1,2\n2,0\n");
        let err = Population::load_csv(f.path(), "y", None, Some("x")).unwrap_err();
        assert!(matches!(err, Error::BadCell { row: 2, .. }), "{err}");
    }

    #[test]
    fn load_many_rows() {
        let mut s = String::from("income,employees\n");
        for k in 0..2300 {
            s.push_str(&format!("{},{}\n", 100 + k, k % 17));
        }
        let f = write_tmp(&s);
        let p = Population::load_csv(f.path(), "employees", None, Some("income")).unwrap();
        assert_eq!(p.size(), 2300);
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let p = gen_example4(0.7, 0.8, Seed(5)).unwrap();
        let f = tempfile::NamedTempFile::new().unwrap();
        p.save_csv(f.path()).unwrap();
        let q = Population::load_csv(f.path(), "y", Some("z"), Some("x")).unwrap();
        assert_eq!(p, q);
    }

    #[test]
    fn example1_half_normal() {
        let p = gen_example1(Seed(17));
        assert_eq!(p.size(), 3000);
        assert!(p.y().iter().all(|&v| v >= 0.0));
        assert_eq!(p, gen_example1(Seed(17)));
        // half-normal: mean √(2/π), sd √(1 − 2/π)
        let mu = (2.0 / std::f64::consts::PI).sqrt();
        let sd = (1.0 - 2.0 / std::f64::consts::PI).sqrt();
        assert!((mean(p.y()) - mu).abs() < 4.0 * sd / 3000f64.sqrt());
    }

    #[test]
    fn example2_limits() {
        let p = gen_example2(1.0, Seed(3)).unwrap();
        for (y, x) in p.y().iter().zip(p.x().unwrap()) {
            assert_eq!(*y, 3f64.sqrt() * x);
        }
        // ρ = 0 uses the same noise stream as any other ρ, with the signal removed.
        let p0 = gen_example2(0.0, Seed(3)).unwrap();
        let p5 = gen_example2(0.5, Seed(3)).unwrap();
        for k in 0..p0.size() {
            let noise = p0.y()[k] / 3f64.sqrt();
            let expect = 3f64.sqrt() * 0.5 * p5.x().unwrap()[k] + (3.0 - 0.75f64).sqrt() * noise;
            assert!((p5.y()[k] - expect).abs() < 1e-12);
        }
        assert!(gen_example2(1.5, Seed(3)).is_err());
        assert!(gen_example2(-0.1, Seed(3)).is_err());
    }

    #[test]
    fn example2_correlation_matches_moments() {
        let rho: f64 = 0.8;
        let p = gen_example2(rho, Seed(21)).unwrap();
        let (x, y) = (p.x().unwrap(), p.y());
        let (mx, my) = (mean(x), mean(y));
        let cov = x
            .iter()
            .zip(y)
            .map(|(a, b)| (a - mx) * (b - my))
            .sum::<f64>();
        let vx = x.iter().map(|a| (a - mx).powi(2)).sum::<f64>();
        let vy = y.iter().map(|b| (b - my).powi(2)).sum::<f64>();
        let corr = cov / (vx * vy).sqrt();
        // Uniform(0,2): var 1/3; |N(0,1)|: var 1 − 2/π
        let sx = (1.0f64 / 3.0).sqrt();
        let var_y =
            3.0 * rho * rho / 3.0 + (3.0 - 3.0 * rho * rho) * (1.0 - 2.0 / std::f64::consts::PI);
        let analytic = rho * sx * 3f64.sqrt() / var_y.sqrt();
        assert!((corr - analytic).abs() < 0.05, "{corr} vs {analytic}");
    }

    #[test]
    fn example3_sizes() {
        let tight = gen_example3_sizes(1e-12, Seed(4)).unwrap();
        assert!(tight.iter().all(|c| ((c - 50.0) / 50.0).abs() < 1e-6));

        let cv = |v: &[f64]| {
            let m = mean(v);
            (v.iter().map(|a| (a - m).powi(2)).sum::<f64>() / v.len() as f64).sqrt() / m
        };
        let c5 = gen_example3_sizes(5.0, Seed(4)).unwrap();
        let c25 = gen_example3_sizes(25.0, Seed(4)).unwrap();
        assert!(cv(&c25) > cv(&c5));
        assert!((mean(&c25) - 50.0).abs() < 4.0 * 5.0 / 3000f64.sqrt());
        assert!(c25.iter().all(|&c| c > 0.0));
        assert!(gen_example3_sizes(0.0, Seed(4)).is_err());
    }

    #[test]
    fn example4_shapes() {
        let p = gen_example4(0.7, 0.8, Seed(8)).unwrap();
        assert_eq!(p.size(), 3000);
        let r = p.ratio().unwrap();
        assert!(r.is_finite() && r > 0.0);
        assert!(p.y().iter().chain(p.z().unwrap()).all(|&v| v >= 0.0));
        assert!(gen_example4(0.7, 1.2, Seed(8)).is_err());
    }

    #[test]
    fn example4_equal_rho_shared_noise_gives_equal_columns() {
        let x = uniform_sizes(1.0, Seed(1));
        let mut rng = Seed(2).rng();
        let e: Vec<f64> = x.iter().map(|_| std_normal(&mut rng)).collect();
        assert_eq!(example4_column(&x, &e, 0.6), example4_column(&x, &e, 0.6));
        // ρ = 0: no dependence on x
        let y0 = example4_column(&x, &e, 0.0);
        let shifted: Vec<f64> = x.iter().map(|v| v * 0.5).collect();
        assert_eq!(y0, example4_column(&shifted, &e, 0.0));
    }

    #[test]
    fn population_invariants() {
        assert!(Population::new(vec![], None, None).is_err());
        assert!(Population::new(vec![1.0], Some(vec![1.0, 2.0]), None).is_err());
        assert!(Population::new(vec![1.0], None, Some(vec![0.0])).is_err());
        assert!(Population::new(vec![f64::NAN], None, None).is_err());
    }
}
