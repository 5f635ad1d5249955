//! Acceptance criteria, one pass/fail line each. Exits nonzero if any fails.

use std::fs;
use std::path::Path;
use std::process::{Command, ExitCode};
use std::sync::Arc;
use std::time::{Duration, Instant};

use htl_cli::config::ExperimentConfig;
use htl_cli::report::ExperimentReport;
use htl_cli::run_experiment;
use htl_core::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Value};

type Criterion = (&'static str, fn() -> Outcome);

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn timed(limit: Option<Duration>, f: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let mut o = f();
    let took = start.elapsed();
    match limit {
        Some(l) => {
            o.pass &= took < l;
            o.detail = format!("{}; runtime {:.1} s (limit {} s)", o.detail, took.as_secs_f64(), l.as_secs());
        }
        None => o.detail = format!("{}; runtime {:.1} s", o.detail, took.as_secs_f64()),
    }
    o
}

fn geometric(lo: f64, hi: f64, k: usize) -> Vec<f64> {
    (0..k).map(|i| lo * (hi / lo).powf(i as f64 / (k - 1) as f64)).collect()
}

fn config(v: Value) -> ExperimentConfig {
    ExperimentConfig::from_json(&v.to_string(), Path::new("acceptance.json")).expect("valid acceptance config")
}

fn seeds(n: u64) -> Vec<u64> {
    (1..=n).collect()
}

fn ks_grid() -> Value {
    json!({"method": "ks", "kernel": "truncated_gaussian", "bandwidth": {"grid": geometric(0.001, 0.5, 19)}})
}

fn mean_mse(report: &ExperimentReport, method: &str, n_ta: usize) -> f64 {
    report.aggregate(method, n_ta).and_then(|a| a.mse).map_or(f64::NAN, |s| s.mean)
}

fn doppler_transfer(kind: &str, family: Value, threshold: f64) -> Outcome {
    let cfg = config(json!({
        "experiment_kind": kind,
        "sizes": {"n_so": 5000, "n_ta": 100, "n_test": 1000},
        "source_stage": ks_grid(),
        "target_stage": ks_grid(),
        "methods": [{"kind": "only_target"}, {"kind": "htl", "transformation": family, "label": "htl"}],
        "cv_folds": 10,
        "n_mc": 2000,
        "seeds": seeds(20),
        "output_dir": "unused",
    }));
    let report = match run_experiment(&cfg) {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("run failed: {e}")),
    };
    let (only, htl) = (mean_mse(&report, "only_target", 100), mean_mse(&report, "htl", 100));
    let ratio = htl / only;
    outcome(
        report.failures == 0 && ratio < threshold,
        format!("HTL mean MSE {htl:.5} / only-target {only:.5} = {ratio:.3} (< {threshold}), failures {}", report.failures),
    )
}

fn c1() -> Outcome {
    timed(Some(Duration::from_secs(60)), || {
        doppler_transfer("synthetic_offset", json!({"family": "offset", "alpha": 1.0}), 0.8)
    })
}

fn c2() -> Outcome {
    timed(Some(Duration::from_secs(60)), || {
        doppler_transfer("synthetic_scale", json!({"family": "scale", "alpha": 0.0}), 0.9)
    })
}

/// Source bandwidth by cross-validation; target-side bandwidths follow the
/// rate rule `n^{-1/(2α+1)}` with α = 0.5 for the rough target and α = 1 for
/// the linear auxiliary function.
fn c3() -> Outcome {
    timed(None, || {
        let cfg = config(json!({
            "experiment_kind": "rate_sweep",
            "sizes": {"n_so": 10000, "n_ta_values": [25, 50, 100, 200, 400, 800], "n_test": 200},
            "source_stage": ks_grid(),
            "target_stage": {"method": "ks", "bandwidth": {"rule": {"alpha": 0.5}}},
            "methods": [
                {"kind": "only_target"},
                {"kind": "htl", "label": "htl", "transformation": {"family": "offset", "alpha": 1.0},
                 "stage": {"method": "ks", "bandwidth": {"rule": {"alpha": 1.0}}}}
            ],
            "n_mc": 5000,
            "seeds": seeds(20),
            "output_dir": "unused",
        }));
        let report = match run_experiment(&cfg) {
            Ok(r) => r,
            Err(e) => return outcome(false, format!("run failed: {e}")),
        };
        match (report.rate("only_target"), report.rate("htl")) {
            (Some(o), Some(h)) => outcome(
                h.slope <= o.slope - 0.1,
                format!("slope HTL {:.3} vs only-target {:.3} (gap {:.3}, need ≥ 0.1)", h.slope, o.slope, o.slope - h.slope),
            ),
            _ => outcome(false, "rate fits missing".into()),
        }
    })
}

fn random_dataset(rng: &mut ChaCha8Rng, n: usize, d: usize) -> Dataset {
    let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random_range(0.0..1.0)).collect()).collect();
    let ys: Vec<f64> = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    Dataset::from_rows(&rows, ys, DomainTag::Target).unwrap()
}

const KERNELS: [SmoothingKernel; 4] = [
    SmoothingKernel::Boxcar,
    SmoothingKernel::Epanechnikov,
    SmoothingKernel::TruncatedGaussian,
    SmoothingKernel::Gaussian,
];

fn c4() -> Outcome {
    timed(Some(Duration::from_secs(10)), || {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let mut held = [0usize; 2];
        for case in 0..100 {
            let (n, d) = (rng.random_range(2..60), rng.random_range(1..4));
            let base = random_dataset(&mut rng, n, d);
            let perturbed: Vec<f64> = match case % 2 {
                // Single-label perturbation, the convex-combination case.
                0 => {
                    let j = rng.random_range(0..n);
                    (0..n).map(|i| base.label(i) + if i == j { rng.random_range(-2.0..2.0) } else { 0.0 }).collect()
                }
                _ => (0..n).map(|i| base.label(i) + rng.random_range(-0.5..0.5)).collect(),
            };
            let queries = query_grid(d, 0.0, 1.0, 200, case);

            let kernel = KERNELS[rng.random_range(0..4)];
            let h = rng.random_range(0.02..0.8);
            let ks = |data: &Dataset| -> Result<SharedPredictor> { Ok(Arc::new(KsPredictor::new(data.clone(), kernel, h)?)) };
            if stability_probe(&ks, &base, &perturbed, &Coefficients::FromPredictor, &queries).is_ok_and(|o| o.holds) {
                held[0] += 1;
            }

            let lambda = rng.random_range(0.01..1.0);
            let lengthscale = rng.random_range(0.05..1.0);
            let krr = |data: &Dataset| -> Result<SharedPredictor> {
                Ok(Arc::new(KrrPredictor::fit(data, RkhsKernel::Rbf { lengthscale }, lambda)?))
            };
            if stability_probe(&krr, &base, &perturbed, &Coefficients::FromPredictor, &queries).is_ok_and(|o| o.holds) {
                held[1] += 1;
            }
        }
        outcome(held == [100, 100], format!("bound held KS {}/100, KRR {}/100", held[0], held[1]))
    })
}

fn c5() -> Outcome {
    timed(Some(Duration::from_secs(5)), || {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let half_width = 0.3f64;
        let draws = 100_000;
        let mut worst: f64 = 0.0;
        let mut all = true;
        let source = Truth {
            function: FunctionSpec::Doppler,
            dim: 1,
        };
        let cases = [
            (AuxiliaryEstimator::direct(TransformationFunction::offset(1.0)).unwrap(), SyntheticSpec::doppler_offset(0.0)),
            (AuxiliaryEstimator::direct(TransformationFunction::scale(0.0)).unwrap(), SyntheticSpec::doppler_scale(0.0)),
        ];
        for (est, spec) in &cases {
            let target = Truth {
                function: spec.target_fn.clone(),
                dim: 1,
            };
            let mut anchors = 0;
            while anchors < 10 {
                let x = [rng.random_range(0.0..1.0)];
                let a = source.predict(&x);
                // Anchors stay in the admissible region of the scale guard.
                if let Family::Scale { alpha } = est.transformation().family() {
                    if (a + alpha).abs() < SCALE_GUARD {
                        continue;
                    }
                }
                anchors += 1;
                let truth = est.transformation().auxiliary_truth(&source, &target, &x).unwrap();
                let fy = target.predict(&x);
                let (mut s, mut s2) = (0.0, 0.0);
                for _ in 0..draws {
                    let h = est.apply(a, fy + rng.random_range(-half_width..half_width)).unwrap();
                    s += h;
                    s2 += h * h;
                }
                let m = draws as f64;
                let mean = s / m;
                let se = ((s2 - m * mean * mean) / (m - 1.0) / m).sqrt();
                let z = (mean - truth).abs() / se;
                worst = worst.max(z);
                all &= z <= 4.0;
            }
        }
        outcome(all, format!("20 anchors, largest deviation {worst:.2} standard errors (≤ 4)"))
    })
}

fn c6() -> Outcome {
    timed(None, || {
        let cfg = config(json!({
            "experiment_kind": "selection",
            "sizes": {"n_so": 2000, "n_ta": 100, "n_val": 50, "n_test": 200},
            "source_stage": ks_grid(),
            "target_stage": {"method": "ks", "bandwidth": {"rule": {"alpha": 1.0}}},
            "methods": [{"kind": "only_target"}],
            "candidates": {"quantized_offset": {"l_alpha": 4.0, "l_a": 1.0, "k": 4}},
            "n_mc": 100,
            "seeds": seeds(20),
            "output_dir": "unused",
        }));
        let report = match run_experiment(&cfg) {
            Ok(r) => r,
            Err(e) => return outcome(false, format!("run failed: {e}")),
        };
        let family = quantize_offset_family(4.0, 1.0, 4).unwrap();
        let alphas = family.alphas();
        let nearest = alphas
            .iter()
            .enumerate()
            .min_by(|a, b| (a.1 - 1.0).abs().total_cmp(&(b.1 - 1.0).abs()))
            .map(|(i, _)| i)
            .unwrap();
        let hits = report.selections.iter().filter(|s| s.chosen_index == nearest).count();
        let dominant = report
            .selections
            .iter()
            .filter(|s| {
                let chosen = s.candidates.iter().find(|c| c.index == s.chosen_index).unwrap().validation_mse;
                s.candidates.len() == alphas.len() && s.candidates.iter().all(|c| chosen <= c.validation_mse)
            })
            .count();
        outcome(
            report.selections.len() == 20 && hits >= 18 && dominant == 20,
            format!(
                "nearest grid point α = {} chosen {hits}/20 (≥ 18), argmin dominance {dominant}/20",
                alphas[nearest]
            ),
        )
    })
}

/// Kernel profile written out independently of the library.
fn oracle_profile(kernel: SmoothingKernel, u: f64) -> f64 {
    match kernel {
        SmoothingKernel::Boxcar => f64::from(u8::from(u <= 1.0)),
        SmoothingKernel::Epanechnikov => (1.0 - u * u).max(0.0),
        SmoothingKernel::TruncatedGaussian if u <= 1.0 => (-u * u / 2.0).exp(),
        SmoothingKernel::TruncatedGaussian => 0.0,
        SmoothingKernel::Gaussian => (-u * u / 2.0).exp(),
    }
}

fn oracle_ks(data: &Dataset, kernel: SmoothingKernel, h: f64, x: &[f64]) -> f64 {
    let dist = |i: usize| data.row(i).iter().zip(x).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    let w: Vec<f64> = (0..data.n()).map(|i| oracle_profile(kernel, dist(i) / h)).collect();
    let total: f64 = w.iter().sum();
    if total > 0.0 {
        (0..data.n()).map(|i| w[i] * data.label(i)).sum::<f64>() / total
    } else {
        let mut best = 0;
        for i in 1..data.n() {
            if dist(i) < dist(best) {
                best = i;
            }
        }
        data.label(best)
    }
}

/// Gaussian elimination with partial pivoting.
fn oracle_solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            let (upper, lower) = a.split_at_mut(row);
            for (t, p) in lower[0][col..].iter_mut().zip(&upper[col][col..]) {
                *t -= f * p;
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

fn oracle_rbf(a: &[f64], b: &[f64], l: f64) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(p, q)| (p - q).powi(2)).sum();
    (-d2 / (2.0 * l * l)).exp()
}

fn c7() -> Outcome {
    timed(None, || {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (mut ks_worst, mut krr_worst): (f64, f64) = (0.0, 0.0);
        for case in 0..100u64 {
            let (n, d) = (rng.random_range(1..50), rng.random_range(1..5));
            let data = random_dataset(&mut rng, n, d);
            let kernel = KERNELS[(case % 4) as usize];
            let h = rng.random_range(0.01..1.0);
            let p = KsPredictor::new(data.clone(), kernel, h).unwrap();
            for x in query_grid(d, -0.1, 1.1, 20, case) {
                ks_worst = ks_worst.max((p.predict(&x) - oracle_ks(&data, kernel, h, &x)).abs());
            }

            let n = rng.random_range(1..=8);
            let data = random_dataset(&mut rng, n, d);
            let (l, lambda) = (rng.random_range(0.1..1.0), rng.random_range(0.001..1.0));
            let p = KrrPredictor::fit(&data, RkhsKernel::Rbf { lengthscale: l }, lambda).unwrap();
            let a: Vec<Vec<f64>> = (0..n)
                .map(|i| {
                    (0..n)
                        .map(|j| oracle_rbf(data.row(i), data.row(j), l) + if i == j { n as f64 * lambda } else { 0.0 })
                        .collect()
                })
                .collect();
            let c = oracle_solve(a, data.labels().to_vec());
            for x in query_grid(d, 0.0, 1.0, 20, case + 1000) {
                let o: f64 = (0..n).map(|i| c[i] * oracle_rbf(&x, data.row(i), l)).sum();
                krr_worst = krr_worst.max((p.predict(&x) - o).abs());
            }
        }
        outcome(
            ks_worst <= 1e-12 && krr_worst <= 1e-9,
            format!("max |Δ| KS {ks_worst:.1e} (≤ 1e-12), KRR {krr_worst:.1e} (≤ 1e-9) over 100 cases each"),
        )
    })
}

fn separated_points(rng: &mut ChaCha8Rng, n: usize, d: usize, min_dist: f64) -> Dataset {
    let mut rows: Vec<Vec<f64>> = Vec::new();
    while rows.len() < n {
        let x: Vec<f64> = (0..d).map(|_| rng.random_range(0.0..1.0)).collect();
        if rows.iter().all(|r| r.iter().zip(&x).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() >= min_dist) {
            rows.push(x);
        }
    }
    let ys = (0..n).map(|_| rng.random_range(-1.0..1.0)).collect();
    Dataset::from_rows(&rows, ys, DomainTag::Target).unwrap()
}

fn c8() -> Outcome {
    timed(None, || {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let mut parity: f64 = 0.0;
        let mut interp: f64 = 0.0;
        let est = AuxiliaryEstimator::direct(TransformationFunction::non_transfer()).unwrap();
        for case in 0..20u64 {
            let d = rng.random_range(1..4);
            let source = random_dataset(&mut rng, 80, d).with_domain(DomainTag::Source);
            let target = random_dataset(&mut rng, 30, d);
            let stages = [
                SubroutineSpec::ks(KERNELS[(case % 4) as usize], rng.random_range(0.05..0.6)),
                SubroutineSpec::krr(KernelChoice::Rbf { lengthscale: None }, rng.random_range(0.001..0.5)),
            ];
            for w in &stages {
                let htl = htl_fit(&source, &target, &est, &stages[0], w).unwrap();
                let direct = w.fit(&target).unwrap();
                for x in query_grid(d, 0.0, 1.0, 50, case) {
                    parity = parity.max((htl.predict(&x) - direct.predict(&x)).abs());
                }
            }
            // Separated points keep the Gram matrix's smallest eigenvalue far above
            // the 1e-10·trace/n jitter that a zero ridge receives.
            let n = rng.random_range(3..=8);
            let small = separated_points(&mut rng, n, d, 0.5 / n as f64);
            let lengthscale = rng.random_range(0.2..0.5) / n as f64;
            let p = KrrPredictor::fit(&small, RkhsKernel::Rbf { lengthscale }, 0.0).unwrap();
            for i in 0..small.n() {
                interp = interp.max((p.predict(small.row(i)) - small.label(i)).abs());
            }
        }
        outcome(
            parity <= 1e-12 && interp <= 1e-6,
            format!("non-transfer vs direct max |Δ| {parity:.1e} (≤ 1e-12); λ = 0 interpolation error {interp:.1e} (≤ 1e-6)"),
        )
    })
}

fn c9() -> Outcome {
    timed(None, || {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let mut worst: f64 = 0.0;
        for _ in 0..1000 {
            let beta = rng.random_range(0.5..2.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let a = rng.random_range(0.5..2.0) * if rng.random_bool(0.5) { 1.0 } else { -1.0 };
            let y = rng.random_range(-1.0..1.0);
            let sigma2 = rng.random_range(0.0..0.5);
            let est = AuxiliaryEstimator::calibrated(TransformationFunction::loglinear(beta).unwrap(), sigma2).unwrap();
            let oracle = (y / (beta * a) + sigma2 * a.powi(2)).exp();
            let got = est.apply(a, y).unwrap();
            worst = worst.max((got - oracle).abs() / oracle.abs().max(1.0));
        }
        let pooled = estimate_sigma2(&[vec![1.0, 3.0], vec![2.0, 4.0]]).unwrap();
        outcome(
            worst <= 1e-12 && pooled == 2.0,
            format!("calibrated H max deviation {worst:.1e} (≤ 1e-12) on 1000 inputs; pooled σ² = {pooled} (= 2)"),
        )
    })
}

fn c10() -> Outcome {
    timed(None, || {
        let dir = match tempfile::tempdir() {
            Ok(d) => d,
            Err(e) => return outcome(false, e.to_string()),
        };
        let smooth = json!({"sum": [
            {"sine": {"frequency": 1.0, "direction": [1, 0.5, 0, 0, 0.3, 0, 0, 0], "phase": 0.0}},
            {"linear": {"weights": [0.2, 0, 0.2, 0, 0, 0.2, 0, 0.2], "intercept": 0.0}}
        ]});
        let rough = json!({"sine": {"frequency": 6.0, "direction": [0, 1, 0, 1, 0, 0, 1, 0], "phase": 0.5, "amplitude": 0.3}});
        let synth_cfg = json!({
            "experiment_kind": "synthetic_offset",
            "data": {
                "source_fn": smooth,
                "target_fn": {"sum": [smooth, rough]},
                "sampler": {"dim": 8, "low": -1.0, "high": 1.0},
                "noise_variance_source": 0.01,
                "noise_variance_target": 0.01,
            },
            "sizes": {"n_so": 400, "n_ta": 600, "n_test": 10},
            "source_stage": {"method": "ks", "bandwidth": {"fixed": 0.5}},
            "target_stage": {"method": "ks", "bandwidth": {"fixed": 0.5}},
            "methods": [{"kind": "only_target"}],
            "seeds": [10],
            "output_dir": dir.path().join("kin"),
        });
        let csv_cfg = json!({
            "experiment_kind": "csv_transfer",
            "files": {"source": dir.path().join("kin/source.csv"), "target": dir.path().join("kin/target.csv")},
            "sizes": {"n_ta_values": [50, 100, 200], "n_test": 300},
            "source_stage": {"method": "krr", "lambda": {"fixed": 0.001}},
            "target_stage": {"method": "krr", "lambda": {"grid": [0.1, 0.01, 0.001]}},
            "methods": [
                {"kind": "only_target"},
                {"kind": "only_source"},
                {"kind": "combined", "stage": {"method": "krr", "lambda": {"fixed": 0.001}}},
                {"kind": "htl", "label": "offset", "transformation": {"family": "offset", "alpha": 1.0}},
                {"kind": "htl", "label": "scale", "transformation": {"family": "scale", "alpha": 1.0}}
            ],
            "seeds": [1, 2, 3, 4, 5],
            "output_dir": dir.path().join("report"),
        });
        let (synth_path, csv_path) = (dir.path().join("synth.json"), dir.path().join("csv.json"));
        fs::write(&synth_path, synth_cfg.to_string()).unwrap();
        fs::write(&csv_path, csv_cfg.to_string()).unwrap();
        let bin = env!("CARGO_BIN_EXE_htl");
        let synth = Command::new(bin).args(["synth", "--config"]).arg(&synth_path).output();
        let run = Command::new(bin).args(["run", "--config"]).arg(&csv_path).output();
        let (Ok(synth), Ok(run)) = (synth, run) else {
            return outcome(false, "could not launch the htl binary".into());
        };
        if !synth.status.success() || !run.status.success() {
            return outcome(
                false,
                format!("exit codes synth {:?}, run {:?}: {}", synth.status.code(), run.status.code(), String::from_utf8_lossy(&run.stderr)),
            );
        }
        let report: Value = match fs::read(dir.path().join("report/report.json")).map(|b| serde_json::from_slice(&b)) {
            Ok(Ok(v)) => v,
            _ => return outcome(false, "report.json missing or unreadable".into()),
        };
        let table = &report["table"];
        let complete = table["rows"].as_array().is_some_and(|rows| {
            rows.len() == 5
                && rows.iter().all(|r| {
                    r["cells"].as_array().is_some_and(|c| c.len() == 3 && c.iter().all(|s| s["mean"].is_number() && s["sd"].is_number()))
                })
        });
        let failures = report["failures"].as_u64();
        let cells = table["rows"]
            .as_array()
            .map(|rows| {
                rows.iter()
                    .map(|r| format!("{} {:.3}", r["method"].as_str().unwrap_or("?"), r["cells"][2]["mean"].as_f64().unwrap_or(f64::NAN)))
                    .collect::<Vec<_>>()
                    .join(", ")
            })
            .unwrap_or_default();
        let rows_ok = report["rows"].as_array().is_some_and(|r| r.iter().all(|r| r["status"] == json!("ok")));
        outcome(
            complete && failures == Some(0) && rows_ok,
            format!("8-dim CSV pair, 5 methods × 3 sizes × 5 seeds, every table cell filled; MSE at n_ta = 200: {cells}"),
        )
    })
}

fn main() -> ExitCode {
    let criteria: [Criterion; 10] = [
        ("C1 offset Doppler transfer beats target-only", c1),
        ("C2 scale Doppler transfer beats target-only", c2),
        ("C3 transfer improves the risk slope", c3),
        ("C4 stability bound holds", c4),
        ("C5 auxiliary labels are unbiased", c5),
        ("C6 validation selection finds the true offset", c6),
        ("C7 estimators match independent oracles", c7),
        ("C8 identity reductions", c8),
        ("C9 calibration formula and pooled variance", c9),
        ("C10 CSV transfer runs end to end", c10),
    ];
    // Optional arguments restrict the run to criteria whose id matches, e.g. `C8`.
    let only: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let criteria: Vec<_> = criteria
        .into_iter()
        .filter(|(name, _)| only.is_empty() || only.iter().any(|o| name.split(' ').next() == Some(o.as_str())))
        .collect();
    let mut failed = 0;
    for &(name, f) in &criteria {
        let o = f();
        println!("[{}] {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
        failed += usize::from(!o.pass);
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
