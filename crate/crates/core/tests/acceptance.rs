//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero if any criterion fails.

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use itertools::Itertools;
use survht::designs::{
    pi_from_sizes, second_order, DesignKind, InclusionProbs, Sample, SecondOrder,
};
use survht::estimators::{mse_hat_iht, EstimatorKind};
use survht::exact::{check_condition_c4, exact_moments_ht, exact_moments_iht, EnumDesign};
use survht::montecarlo::{example1_probs, run_mc, McSettings, PopulationSpec};
use survht::population::gen_example1;
use survht::rng::{open_unit, std_normal, Seed};
use survht::threshold::{choose_k, ThresholdedProbs};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn rel(got: f64, want: f64, floor: f64) -> f64 {
    (got - want).abs() / want.abs().max(floor).max(f64::MIN_POSITIVE)
}

fn random_instance(n_pop: usize, seed: Seed) -> (Vec<f64>, InclusionProbs) {
    let mut rng = seed.rng();
    let y = (0..n_pop).map(|_| 1.0 - open_unit(&mut rng)).collect();
    let pi = (0..n_pop)
        .map(|_| 0.05 + 0.9 * open_unit(&mut rng))
        .collect();
    (y, InclusionProbs::new(pi).unwrap())
}

/// Brute-force Poisson moments: returns `(E t̂, E (t̂ − t)², Var t̂)` for
/// weights `w`, plus `Σ P(s) g(s)` for an arbitrary per-sample function.
struct PoissonEnum {
    probs: Vec<f64>,
    masks: Vec<Vec<usize>>,
}

impl PoissonEnum {
    fn new(pi: &[f64]) -> Self {
        let n = pi.len();
        let mut probs = Vec::new();
        let mut masks = Vec::new();
        for mask in 0u32..(1 << n) {
            let units: Vec<usize> = (0..n).filter(|k| mask >> k & 1 == 1).collect();
            let p: f64 = (0..n)
                .map(|k| {
                    if mask >> k & 1 == 1 {
                        pi[k]
                    } else {
                        1.0 - pi[k]
                    }
                })
                .product();
            probs.push(p);
            masks.push(units);
        }
        Self { probs, masks }
    }

    fn expect(&self, f: impl Fn(&[usize]) -> f64) -> f64 {
        // pairwise sum keeps the 2^N-term accumulation accurate
        let terms: Vec<f64> = self
            .probs
            .iter()
            .zip(&self.masks)
            .map(|(p, s)| p * f(s))
            .collect();
        pairwise(&terms)
    }

    fn moments(&self, y: &[f64], w: &[f64]) -> (f64, f64, f64) {
        let t: f64 = pairwise(y);
        let est = |s: &[usize]| s.iter().map(|&k| y[k] / w[k]).sum::<f64>();
        let mean = self.expect(est);
        let mse = self.expect(|s| (est(s) - t).powi(2));
        let var = self.expect(|s| (est(s) - mean).powi(2));
        (mean - t, var, mse)
    }
}

fn pairwise(v: &[f64]) -> f64 {
    if v.len() <= 8 {
        v.iter().sum()
    } else {
        let (a, b) = v.split_at(v.len() / 2);
        pairwise(a) + pairwise(b)
    }
}

fn criterion_1() -> Outcome {
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let (y, p) = random_instance(8, Seed(1000 + i));
        let tp = choose_k(&p);
        let so = second_order(DesignKind::Poisson, &p);
        let exact = exact_moments_iht(&y, &tp, &so).unwrap();
        let (bias, var, mse) = PoissonEnum::new(p.pi()).moments(&y, tp.pi_star());
        worst = worst
            .max(rel(exact.bias, bias, mse.sqrt()))
            .max(rel(exact.variance, var, 0.0))
            .max(rel(exact.mse, mse, 0.0));
    }
    outcome(
        worst <= 1e-12,
        format!("max relative deviation {worst:.2e} (tol 1e-12)"),
    )
}

fn criterion_2() -> Outcome {
    let mut worst: f64 = 0.0;
    for i in 0..100 {
        let (y, p) = random_instance(8, Seed(1000 + i));
        let tp = choose_k(&p);
        let so = second_order(DesignKind::Poisson, &p);
        let en = PoissonEnum::new(p.pi());
        let expected = en.expect(|s| {
            let s = Sample::from_units(s.to_vec(), 8).unwrap();
            mse_hat_iht(&s, &y, &tp, &so).unwrap()
        });
        let (_, _, mse) = en.moments(&y, tp.pi_star());
        worst = worst.max(rel(expected, mse, 0.0));
    }
    outcome(
        worst <= 1e-10,
        format!("max relative deviation {worst:.2e} (tol 1e-10)"),
    )
}

fn strict_condition(y: &[f64], tp: &ThresholdedProbs) -> bool {
    let Some(a) = tp.threshold() else {
        return false;
    };
    let v: Vec<f64> = tp.u2().iter().map(|&k| (tp.pi()[k] - a) * y[k]).collect();
    v.iter().any(|&x| x != v[0])
}

fn criterion_3() -> Outcome {
    let (mut violations, mut strict_violations, mut strict_cases) = (0, 0, 0);
    for i in 0..1000u64 {
        let n_pop = 2 + (i % 11) as usize;
        let (y, p) = random_instance(n_pop, Seed(5000 + i));
        let tp = choose_k(&p);
        let so = second_order(DesignKind::Poisson, &p);
        let ht = exact_moments_ht(&y, &p, &so).unwrap().mse;
        let iht = exact_moments_iht(&y, &tp, &so).unwrap().mse;
        if iht > ht {
            violations += 1;
        }
        if strict_condition(&y, &tp) {
            strict_cases += 1;
            if iht >= ht {
                strict_violations += 1;
            }
        }
    }
    outcome(
        violations == 0 && strict_violations == 0,
        format!(
            "{violations} violations of MSE_IHT <= MSE_HT; {strict_violations} of {strict_cases} strict cases not strictly smaller"
        ),
    )
}

fn subsets(n_pop: usize, n: usize) -> Vec<Vec<usize>> {
    (0u32..(1 << n_pop))
        .filter(|m| m.count_ones() as usize == n)
        .map(|m| (0..n_pop).filter(|k| m >> k & 1 == 1).collect())
        .collect()
}

fn criterion_4() -> Outcome {
    let y = [3.2, 0.7, 5.1, 2.2, 9.4, 1.3];
    let all = subsets(6, 3);
    let t: f64 = y.iter().sum();
    let est: Vec<f64> = all
        .iter()
        .map(|s| s.iter().map(|&k| y[k] / 0.5).sum())
        .collect();
    let mean = est.iter().sum::<f64>() / all.len() as f64;
    let var = est.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / all.len() as f64;
    let p = InclusionProbs::equal(6, 3).unwrap();
    let so = SecondOrder::Srswor { n_pop: 6, n: 3 };
    let exact = exact_moments_ht(&y, &p, &so).unwrap();
    let bias_dev = rel(mean, t, 0.0);
    let var_dev = rel(exact.variance, var, 0.0);
    outcome(
        all.len() == 20 && bias_dev <= 1e-13 && var_dev <= 1e-12,
        format!("{} subsets; mean vs t_y {bias_dev:.1e} (tol 1e-13); variance {var_dev:.1e} (tol 1e-12)", all.len()),
    )
}

fn criterion_5() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut reports_pass = true;
    for (big, n) in [(6usize, 3usize), (8, 4), (10, 3)] {
        let all = subsets(big, n);
        let total = all.len() as f64;
        let joint = |t: &[usize]| {
            all.iter()
                .filter(|s| t.iter().all(|k| s.contains(k)))
                .count() as f64
                / total
        };
        let (nf, bf) = (n as f64, big as f64);
        let ff = |r: usize| {
            (0..r)
                .map(|i| (nf - i as f64) / (bf - i as f64))
                .product::<f64>()
        };
        let gap = -2.0 * nf * (nf - 1.0) * (bf - nf) / (bf * bf * (bf - 1.0) * (bf - 2.0));
        let fourth = 3.0 * nf * (nf - 1.0) * (nf - 2.0) * (nf - bf)
            / (bf.powi(2) * (bf - 1.0) * (bf - 2.0) * (bf - 3.0))
            - 6.0 * nf * nf * (nf - 1.0) * (nf - bf) / (bf.powi(3) * (bf - 1.0) * (bf - 2.0))
            + 3.0 * nf.powi(3) * (nf - bf) / (bf.powi(4) * (bf - 1.0));
        for r in 1..=4 {
            for t in (0..big).combinations(r) {
                worst = worst.max((joint(&t) - ff(r)).abs());
            }
        }
        let p1 = |u: usize| joint(&[u]);
        for t in (0..big).permutations(3) {
            let g = joint(&t) - joint(&t[..2]) * p1(t[2]);
            worst = worst.max((g - gap).abs());
        }
        for t in (0..big).permutations(4) {
            let c = joint(&t) - 4.0 * joint(&t[..3]) * p1(t[3])
                + 6.0 * joint(&t[..2]) * p1(t[2]) * p1(t[3])
                - 3.0 * p1(t[0]) * p1(t[1]) * p1(t[2]) * p1(t[3]);
            worst = worst.max((c - fourth).abs());
        }
        let lib = check_condition_c4(EnumDesign::Srswor { n_pop: big, n }).unwrap();
        reports_pass &= lib.pass;
        worst = worst
            .max((lib.third_order_gap.unwrap() - gap).abs())
            .max((lib.fourth_order_combination.unwrap() - fourth).abs());
    }
    let mut poisson_zero = true;
    for s in 0..5 {
        let (_, p) = random_instance(7, Seed(700 + s));
        let r = check_condition_c4(EnumDesign::Poisson(&p)).unwrap();
        poisson_zero &= r.analytic_third_order_gap == Some(0.0)
            && r.analytic_fourth_order_combination == Some(0.0)
            && r.pass;
    }
    outcome(
        worst <= 1e-13 && reports_pass && poisson_zero,
        format!("max SRSWOR deviation {worst:.1e} (tol 1e-13); Poisson quantities exactly zero: {poisson_zero}"),
    )
}

fn criterion_6() -> Outcome {
    let mut in_band = 0;
    let mut mse_ok = 0;
    let mut var_ok = 0;
    let mut res = Vec::new();
    let mut slowest = Duration::ZERO;
    for seed in 1..=10u64 {
        let started = Instant::now();
        let cfg = McSettings::example(PopulationSpec::Example1, 2000).with_seed(Seed(seed));
        let rep = run_mc(&cfg, None).unwrap();
        slowest = slowest.max(started.elapsed());
        // the same population the run used
        let pop = gen_example1(Seed(seed).child(0));
        let p = example1_probs();
        let n = pop.size() as f64;
        let exact = exact_moments_ht(pop.y(), &p, &second_order(DesignKind::Poisson, &p))
            .unwrap()
            .mse
            / (n * n);
        let ht = rep.row(EstimatorKind::Ht).unwrap();
        let iht = rep.row(EstimatorKind::Iht).unwrap();
        in_band += usize::from((20.0..=55.0).contains(&rep.re_percent));
        mse_ok += usize::from(rel(ht.mse, exact, 0.0) <= 0.10);
        var_ok += usize::from(iht.variance < ht.variance);
        res.push(format!("{:.1}", rep.re_percent));
    }
    outcome(
        in_band >= 9 && mse_ok == 10 && var_ok == 10 && slowest < Duration::from_secs(30),
        format!(
            "Re in band {in_band}/10 [{}]; MSE_HT within 10% of exact {mse_ok}/10; Var_IHT < Var_HT {var_ok}/10",
            res.join(", ")
        ),
    )
}

fn example3_increasing(sigma2_as_sd: bool) -> (usize, Vec<String>) {
    let mut ok = 0;
    let mut rows = Vec::new();
    for seed in 1..=10u64 {
        let re: Vec<f64> = [5.0, 15.0, 25.0]
            .iter()
            .map(|&sigma2| {
                let mut s = McSettings::example(
                    PopulationSpec::Example3 {
                        rho: 0.8,
                        sigma2,
                        sigma2_as_sd,
                    },
                    1000,
                );
                s.f = Some(0.05);
                run_mc(&s.with_seed(Seed(seed)), None).unwrap().re_percent
            })
            .collect();
        ok += usize::from(re[0] < re[1] && re[1] < re[2]);
        rows.push(format!("{:.2}/{:.2}/{:.2}", re[0], re[1], re[2]));
    }
    (ok, rows)
}

fn criterion_7() -> Outcome {
    let (ok, rows) = example3_increasing(false);
    let (ok_sd, _) = example3_increasing(true);
    outcome(
        ok >= 8,
        format!(
            "Re increasing in sigma^2 in {ok}/10 seeds (need 8) [{}]; with sigma^2 read as a standard deviation: {ok_sd}/10",
            rows.join(" ")
        ),
    )
}

fn criterion_8() -> Outcome {
    let mut detail = Vec::new();
    let mut pass = true;
    for f in [0.05, 0.1] {
        let mut hits = 0;
        for seed in 1..=10u64 {
            let mut s = McSettings::example(
                PopulationSpec::Example4 {
                    rho1: 0.7,
                    rho2: 0.8,
                },
                1000,
            );
            s.f = Some(f);
            let rep = run_mc(&s.with_seed(Seed(seed)), None).unwrap();
            hits += usize::from(rep.re_percent >= 10.0);
        }
        pass &= hits >= 9;
        detail.push(format!("f={f}: Re >= 10% in {hits}/10"));
    }
    outcome(pass, detail.join("; "))
}

fn criterion_9() -> Outcome {
    let mut rng = Seed(2300).rng();
    let x: Vec<f64> = (0..2300)
        .map(|_| (1.5 * std_normal(&mut rng)).exp())
        .collect();
    let ks: Vec<usize> = [46, 92, 138, 184, 230, 345, 460, 690]
        .iter()
        .map(|&n| choose_k(&pi_from_sizes(&x, n).unwrap()).k())
        .collect();
    let pass = ks.windows(2).all(|w| w[1] <= w[0]);
    outcome(pass, format!("K = {ks:?}"))
}

fn criterion_10() -> Outcome {
    let bin = env!("CARGO_BIN_EXE_survht");
    let dir = tempfile::tempdir().unwrap();
    let runs: [&[&str]; 3] = [
        &["--example", "1", "--reps", "300"],
        &[
            "--example",
            "2",
            "--design",
            "ppswr",
            "--f",
            "0.1",
            "--reps",
            "300",
        ],
        &["--example", "4", "--f", "0.05", "--reps", "300"],
    ];
    let mut identical = 0;
    for (i, args) in runs.iter().enumerate() {
        let mut outputs = Vec::new();
        for w in ["1", "4"] {
            let out = dir.path().join(format!("run{i}_w{w}.json"));
            let status = Command::new(bin)
                .arg("simulate")
                .args(*args)
                .args(["--seed", "42", "--workers", w, "--out"])
                .arg(&out)
                .output()
                .unwrap();
            assert!(
                status.status.success(),
                "{}",
                String::from_utf8_lossy(&status.stderr)
            );
            outputs.push(std::fs::read(Path::new(&out)).unwrap());
        }
        identical += usize::from(outputs[0] == outputs[1]);
    }
    outcome(
        identical == runs.len(),
        format!(
            "{identical}/{} configs byte-identical across --workers 1 and 4",
            runs.len()
        ),
    )
}

/// Name, check, and runtime limit in seconds.
type Criterion = (&'static str, fn() -> Outcome, Option<u64>);

fn main() {
    let criteria: [Criterion; 10] = [
        (
            "1 exact moments vs enumeration (Poisson, N=8)",
            criterion_1,
            Some(5),
        ),
        ("2 MSE estimator unbiased", criterion_2, Some(10)),
        (
            "3 thresholded MSE never exceeds HT (Poisson)",
            criterion_3,
            Some(30),
        ),
        (
            "4 HT unbiased by exhaustion (SRSWOR 6/3)",
            criterion_4,
            None,
        ),
        (
            "5 SRSWOR joint-probability identities",
            criterion_5,
            Some(10),
        ),
        ("6 Example 1 replication band", criterion_6, None),
        ("7 Example 3 Re increases with sigma^2", criterion_7, None),
        ("8 Example 4 ratio band", criterion_8, None),
        (
            "9 K non-increasing in n (lognormal sizes)",
            criterion_9,
            None,
        ),
        ("10 determinism across worker counts", criterion_10, None),
    ];
    let mut failed = 0;
    for (name, run, limit) in criteria {
        let started = Instant::now();
        let mut out = run();
        let secs = started.elapsed().as_secs_f64();
        if let Some(limit) = limit {
            if secs >= limit as f64 {
                out.pass = false;
                out.detail
                    .push_str(&format!("; runtime {secs:.1}s over {limit}s"));
            }
        }
        failed += usize::from(!out.pass);
        println!(
            "criterion {name}: {} ({}; {secs:.2}s)",
            if out.pass { "PASS" } else { "FAIL" },
            out.detail
        );
    }
    println!("acceptance: {} passed, {failed} failed", 10 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
