//! Acceptance suite. Runs every criterion at its stated tolerance and prints
//! one PASS/FAIL line each; exits nonzero if any fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use oracles::{central_difference, jacobi_eigen, svm_dual_qp};
use qkbench::config::RunConfig;
use qkbench::runner::{self, RunOptions, RunReport};
use qkernel::datapipe::{run_pipeline, Dataset, PipelineSpec};
use qkernel::featuremap::{encode_amplitude, encode_coherent, resource_count, AnsatzParams, EncoderSpec, Scaling};
use qkernel::kernels::{gram_linear, gram_rbf, KernelMatrix, QuantumKernel};
use qkernel::kta::{self, kta_gradient, kta_of, TrainConfig};
use qkernel::search::{read_trial_log, two_stage_random_search, HyperParams, QuantumKind, SearchSpace, Trial};
use qkernel::statevec::StateVector;
use qkernel::svm::{decision_function, solve, SvcConfig};
use qkernel::{Matrix, Result};

type Outcome = std::result::Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> std::result::Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, limit_s: f64) -> std::result::Result<(), String> {
    ensure(elapsed.as_secs_f64() < limit_s, || {
        format!("took {:.1} s, limit {limit_s} s", elapsed.as_secs_f64())
    })
}

// ---------------------------------------------------------------- 1

type Dense = Vec<Vec<Complex64>>;

fn kron(a: &Dense, b: &Dense) -> Dense {
    let (n, m) = (a.len(), b.len());
    let mut out = vec![vec![Complex64::new(0.0, 0.0); n * m]; n * m];
    for i in 0..n {
        for j in 0..n {
            for k in 0..m {
                for l in 0..m {
                    out[i * m + k][j * m + l] = a[i][j] * b[k][l];
                }
            }
        }
    }
    out
}

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

/// `op` on `qubit`, identity elsewhere; qubit 0 is the leftmost factor.
fn embed(n: usize, qubit: usize, op: &Dense) -> Dense {
    let id = vec![vec![c(1.0, 0.0), c(0.0, 0.0)], vec![c(0.0, 0.0), c(1.0, 0.0)]];
    let mut u = vec![vec![c(1.0, 0.0)]];
    for q in 0..n {
        u = kron(&u, if q == qubit { op } else { &id });
    }
    u
}

fn dense_cnot(n: usize, control: usize, target: usize) -> Dense {
    let p0 = vec![vec![c(1.0, 0.0), c(0.0, 0.0)], vec![c(0.0, 0.0), c(0.0, 0.0)]];
    let p1 = vec![vec![c(0.0, 0.0), c(0.0, 0.0)], vec![c(0.0, 0.0), c(1.0, 0.0)]];
    let x = vec![vec![c(0.0, 0.0), c(1.0, 0.0)], vec![c(1.0, 0.0), c(0.0, 0.0)]];
    let id = vec![vec![c(1.0, 0.0), c(0.0, 0.0)], vec![c(0.0, 0.0), c(1.0, 0.0)]];
    let (mut a, mut b) = (vec![vec![c(1.0, 0.0)]], vec![vec![c(1.0, 0.0)]]);
    for q in 0..n {
        a = kron(&a, if q == control { &p0 } else { &id });
        b = kron(
            &b,
            if q == control {
                &p1
            } else if q == target {
                &x
            } else {
                &id
            },
        );
    }
    a.iter()
        .zip(&b)
        .map(|(ra, rb)| ra.iter().zip(rb).map(|(u, v)| u + v).collect())
        .collect()
}

fn matvec(u: &Dense, v: &[Complex64]) -> Vec<Complex64> {
    u.iter().map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum()).collect()
}

fn max_diff(a: &[Complex64], b: &[Complex64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n = rng.random_range(1..=4usize);
        let dim = 1 << n;
        let rand_state = |rng: &mut ChaCha8Rng| {
            let amps = (0..dim)
                .map(|_| c(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect();
            StateVector::prepare(amps).unwrap()
        };
        let (a0, b0) = (rand_state(&mut rng), rand_state(&mut rng));
        let before = a0.overlap(&b0).unwrap();
        let direct: Complex64 = a0.amplitudes().iter().zip(b0.amplitudes()).map(|(x, y)| x.conj() * y).sum();
        worst = worst.max((before - direct).norm());

        let (mut a, mut b) = (a0.clone(), b0.clone());
        let mut reference = a0.amplitudes().to_vec();
        let mut gates = Vec::new();
        for _ in 0..20 {
            let q = rng.random_range(0..n);
            let angle = rng.random_range(-10.0..10.0);
            let kind = if n > 1 { rng.random_range(0..3) } else { rng.random_range(0..2) };
            let (s, co) = (angle / 2.0f64).sin_cos();
            let mut target = q;
            let u = match kind {
                0 => {
                    a = a.apply_ry(q, angle).unwrap();
                    b = b.apply_ry(q, angle).unwrap();
                    embed(n, q, &vec![vec![c(co, 0.0), c(-s, 0.0)], vec![c(s, 0.0), c(co, 0.0)]])
                }
                1 => {
                    a = a.apply_rz(q, angle).unwrap();
                    b = b.apply_rz(q, angle).unwrap();
                    embed(n, q, &vec![vec![c(co, -s), c(0.0, 0.0)], vec![c(0.0, 0.0), c(co, s)]])
                }
                _ => {
                    target = (q + rng.random_range(1..n)) % n;
                    a = a.apply_cnot(q, target).unwrap();
                    b = b.apply_cnot(q, target).unwrap();
                    dense_cnot(n, q, target)
                }
            };
            reference = matvec(&u, &reference);
            gates.push((kind, q, target, angle));
        }
        worst = worst.max(max_diff(a.amplitudes(), &reference));
        worst = worst.max((a.norm_sqr() - 1.0).abs());
        worst = worst.max((a.overlap(&b).unwrap() - before).norm());

        // replaying the adjoint circuit returns the input state
        let mut back = a.clone();
        for &(kind, q, t, angle) in gates.iter().rev() {
            back = match kind {
                0 => back.apply_ry(q, -angle).unwrap(),
                1 => back.apply_rz(q, -angle).unwrap(),
                _ => back.apply_cnot(q, t).unwrap(),
            };
        }
        worst = worst.max(max_diff(back.amplitudes(), a0.amplitudes()));
    }
    let elapsed = start.elapsed();
    ensure(worst < 1e-12, || format!("max deviation {worst:.2e}"))?;
    within(elapsed, 5.0)?;
    Ok(format!("1000 cases, max deviation {worst:.1e} ({:.2} s)", elapsed.as_secs_f64()))
}

// ---------------------------------------------------------------- 2

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let r15 = 15f64.sqrt();
    let cases: [(&[f64], usize, Vec<f64>); 4] = [
        (&[3.0, 4.0], 1, vec![0.6, 0.8]),
        (&[1.0, 2.0, 3.0], 2, vec![1.0 / r15, 2.0 / r15, 3.0 / r15, 1.0 / r15]),
        (&[2.0], 2, vec![0.5; 4]),
        (&[1.0, -1.0], 3, [1.0, -1.0].repeat(4).iter().map(|v| v / 8f64.sqrt()).collect()),
    ];
    let mut worst_amp = 0.0f64;
    for (x, n, want) in &cases {
        let got = encode_amplitude(x, *n).map_err(|e| e.to_string())?;
        ensure(got.dim() == want.len(), || format!("{x:?}: dimension {}", got.dim()))?;
        for (a, w) in got.amplitudes().iter().zip(want) {
            worst_amp = worst_amp.max((a - c(*w, 0.0)).norm());
        }
    }
    ensure(worst_amp < 1e-15, || format!("amplitude hand cases off by {worst_amp:.2e}"))?;

    let grid: Vec<f64> = (0..=20).map(|i| i as f64 / 20.0).collect();
    let max_error = |dim: usize| -> Result<f64> {
        let states = grid
            .iter()
            .map(|&x| encode_coherent(x, 1.0, dim))
            .collect::<Result<Vec<_>>>()?;
        let mut worst = 0.0f64;
        for (i, a) in states.iter().enumerate() {
            for (j, b) in states.iter().enumerate() {
                let exact = (-(grid[i] - grid[j]).powi(2) / 2.0).exp();
                worst = worst.max((a.overlap(b)?.norm_sqr() - exact).abs());
            }
        }
        Ok(worst)
    };
    let errors = [4, 8, 16, 32, 64]
        .iter()
        .map(|&d| max_error(d))
        .collect::<Result<Vec<_>>>()
        .map_err(|e| e.to_string())?;
    ensure(errors[4] < 1e-6, || format!("D = 64 error {:.2e}", errors[4]))?;
    // from D = 16 on the truncation error sits at the rounding floor, so
    // monotone means non-increasing there
    ensure(errors.windows(2).all(|w| w[1] <= w[0]) && errors[0] > errors[4], || {
        format!("errors not decreasing: {errors:?}")
    })?;
    let elapsed = start.elapsed();
    within(elapsed, 10.0)?;
    Ok(format!(
        "4 amplitude cases exact; coherent max error D=4..64: {} ({:.2} s)",
        errors.iter().map(|e| format!("{e:.1e}")).collect::<Vec<_>>().join(", "),
        elapsed.as_secs_f64()
    ))
}

// ---------------------------------------------------------------- 3

fn criterion_3() -> Outcome {
    for spec in [EncoderSpec::qamp(5), EncoderSpec::qrbf(1.0, 5)] {
        let r = resource_count(&spec.map_err(|e| e.to_string())?, 5).map_err(|e| e.to_string())?;
        ensure((r.cnots, r.single_qubit_gates, r.depth) == (25, 50, 35), || format!("{r:?}"))?;
    }
    Ok("L=5, N=5: 25 CNOTs, 50 single-qubit gates, depth 35".into())
}

// ---------------------------------------------------------------- 4

fn min_eigenvalue(k: &KernelMatrix) -> f64 {
    let n = k.nrows();
    let flat: Vec<f64> = (0..n).flat_map(|i| (0..n).map(move |j| (i, j))).map(|(i, j)| k.get(i, j)).collect();
    let (values, _) = jacobi_eigen(&flat, n);
    values[n - 1]
}

fn criterion_4() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let x = Matrix::from_fn(30, 4, |_, _| rng.random_range(-1.0..1.0));
    let random_params = |rng: &mut ChaCha8Rng, n: usize| {
        let flat: Vec<f64> = (0..2 * 5 * n).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect();
        AnsatzParams::from_flat(5, n, &flat).unwrap()
    };
    let qamp = QuantumKernel::new(EncoderSpec::qamp(2).unwrap(), random_params(&mut rng, 2), Scaling::new(0.7).unwrap())
        .and_then(|k| k.gram(&x, None));
    let qrbf = QuantumKernel::new(EncoderSpec::qrbf(1.0, 2).unwrap(), random_params(&mut rng, 2), Scaling::new(0.7).unwrap())
        .and_then(|k| k.gram(&x, None));
    let grams = [
        ("linear", gram_linear(&x, None), false),
        ("rbf", gram_rbf(&x, None, 0.5), true),
        ("qamp", qamp, true),
        ("qrbf", qrbf, true),
    ];
    let mut parts = Vec::new();
    for (name, g, unit_diag) in grams {
        let g = g.map_err(|e| format!("{name}: {e}"))?;
        let asym = g.asymmetry();
        let diag = if unit_diag {
            (0..30).map(|i| (g.get(i, i) - 1.0).abs()).fold(0.0, f64::max)
        } else {
            0.0
        };
        let lmin = min_eigenvalue(&g);
        ensure(asym < 1e-10, || format!("{name}: asymmetry {asym:.2e}"))?;
        ensure(diag < 1e-10, || format!("{name}: diagonal off by {diag:.2e}"))?;
        ensure(lmin >= -1e-8, || format!("{name}: min eigenvalue {lmin:.2e}"))?;
        parts.push(format!("{name} λmin {lmin:.1e}"));
    }
    let elapsed = start.elapsed();
    within(elapsed, 60.0)?;
    Ok(format!("{} ({:.2} s)", parts.join(", "), elapsed.as_secs_f64()))
}

// ---------------------------------------------------------------- 5

fn criterion_5() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(500 + seed);
        let n = rng.random_range(1..=4usize);
        let layers = rng.random_range(1..=3usize);
        let (spec, d) = if seed % 2 == 1 {
            (EncoderSpec::qrbf(rng.random_range(0.5..2.0), n).unwrap(), rng.random_range(1..=3usize))
        } else {
            (EncoderSpec::qamp(n).unwrap(), rng.random_range(1..=(1usize << n)))
        };
        let x = Matrix::from_fn(4, d, |_, _| rng.random_range(-1.0..1.0));
        let labels = [0, 1, 1, 0];
        let flat: Vec<f64> = (0..2 * layers * n).map(|_| rng.random_range(0.0..std::f64::consts::TAU)).collect();
        let scaling = Scaling::new(rng.random_range(0.1..2.0)).unwrap();
        let p = AnsatzParams::from_flat(layers, n, &flat).unwrap();
        let g = kta_gradient(&p, &x, &labels, &spec, scaling, false)
            .map_err(|e| e.to_string())?
            .flat();
        let fd = central_difference(&flat, 1e-5, |q| {
            let p = AnsatzParams::from_flat(layers, n, q).unwrap();
            kta_of(&p, &x, &labels, &spec, scaling, false).unwrap()
        });
        for (a, b) in g.iter().zip(&fd) {
            if a.abs() >= 1e-8 {
                worst = worst.max((a - b).abs() / a.abs());
            }
        }
    }
    let elapsed = start.elapsed();
    ensure(worst < 1e-6, || format!("max relative error {worst:.2e}"))?;
    within(elapsed, 120.0)?;
    Ok(format!(
        "20 cases (N <= 4, L <= 3), max relative error {worst:.1e} ({:.2} s)",
        elapsed.as_secs_f64()
    ))
}

// ---------------------------------------------------------------- 6

fn row_major(k: &KernelMatrix) -> Vec<f64> {
    (0..k.nrows()).flat_map(|i| (0..k.ncols()).map(move |j| k.get(i, j))).collect()
}

fn criterion_6() -> Outcome {
    let start = Instant::now();
    let cfg = SvcConfig {
        tol: 1e-6,
        ..Default::default()
    };
    let (mut worst, mut worst_default) = (0.0f64, 0.0f64);
    for seed in 0..50u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(600 + seed);
        let m = rng.random_range(4..=12usize);
        let mut y: Vec<f64> = (0..m).map(|_| if rng.random_bool(0.5) { 1.0 } else { -1.0 }).collect();
        y[0] = 1.0;
        y[1] = -1.0;
        let d = rng.random_range(1..=3usize);
        let x = Matrix::from_fn(m, d, |i, _| y[i] * 0.5 + rng.random_range(-1.0..1.0));
        let xt = Matrix::from_fn(20, d, |_, _| rng.random_range(-1.5..1.5));
        let gamma = 10f64.powf(rng.random_range(-1.0..1.0));
        let cost = 10f64.powf(rng.random_range(-1.0..2.0));
        let k = gram_rbf(&x, None, gamma).unwrap();
        let kt = gram_rbf(&xt, Some(&x), gamma).unwrap();

        let oracle = svm_dual_qp(&row_major(&k), &y, cost, 20_000);
        let sol = solve(&k, &y, cost, &cfg, false).map_err(|e| e.to_string())?;
        let gap = (sol.model.objective - oracle.objective).abs();
        worst = worst.max(gap);
        ensure(gap < 1e-6, || format!("problem {seed}: objective gap {gap:.2e}"))?;
        let f = decision_function(&sol.model, &kt).map_err(|e| e.to_string())?;
        for (r, fr) in f.iter().enumerate() {
            let fo: f64 = (0..m).map(|j| oracle.alpha[j] * y[j] * kt.get(r, j)).sum::<f64>() + oracle.bias;
            ensure(fr.signum() == fo.signum(), || format!("problem {seed}: prediction {r} differs"))?;
        }
        let loose = solve(&k, &y, cost, &SvcConfig::default(), false).map_err(|e| e.to_string())?;
        worst_default = worst_default.max((loose.model.objective - oracle.objective).abs());
    }
    let elapsed = start.elapsed();
    within(elapsed, 30.0)?;
    Ok(format!(
        "50 problems, max objective gap {worst:.1e} at tol 1e-6 ({worst_default:.1e} at the default 1e-3), predictions identical ({:.2} s)",
        elapsed.as_secs_f64()
    ))
}

// ---------------------------------------------------------------- 7, 9, 10

const TWO_MOONS: &str = r#"
[dataset.synthetic]
generator = "two_moons"
m = 200
noise = 0.1
seed = 42

[ansatz]
n_layers = 5

[[kernels]]
kind = "linear"

[[kernels]]
kind = "rbf"

[[kernels]]
kind = "qamp"
n_qubits = 2
"#;

struct BenchRun {
    dir: tempfile::TempDir,
    report: RunReport,
    elapsed: Duration,
}

fn bench_run() -> std::result::Result<BenchRun, String> {
    let mut cfg = RunConfig::from_toml(TWO_MOONS).map_err(|e| e.to_string())?;
    cfg.validate().map_err(|e| e.to_string())?;
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let start = Instant::now();
    let out = runner::run(
        &cfg,
        &RunOptions {
            out_dir: dir.path().to_path_buf(),
            resume: false,
        },
    )
    .map_err(|e| e.to_string())?;
    if let Some((name, e)) = out.failures.first() {
        return Err(format!("kernel {name} failed: {e}"));
    }
    Ok(BenchRun {
        dir,
        report: out.report,
        elapsed: start.elapsed(),
    })
}

static FIRST_RUN: std::sync::OnceLock<std::result::Result<BenchRun, String>> = std::sync::OnceLock::new();

fn first_run() -> std::result::Result<&'static BenchRun, String> {
    FIRST_RUN.get_or_init(bench_run).as_ref().map_err(|e| e.clone())
}

/// Test accuracy of an RBF-SVC whose dual is solved by the QP oracle.
fn oracle_rbf_accuracy(gamma: f64, cost: f64) -> std::result::Result<f64, String> {
    let mut cfg = RunConfig::from_toml(TWO_MOONS).map_err(|e| e.to_string())?;
    cfg.validate().map_err(|e| e.to_string())?;
    let prep = runner::prepare(&cfg).map_err(|e| e.to_string())?;
    let (tr, te) = (&prep.train, &prep.test);
    let y: Vec<f64> = tr.y.iter().map(|&l| if l == 1 { 1.0 } else { -1.0 }).collect();
    let k = gram_rbf(&tr.x, None, gamma).map_err(|e| e.to_string())?;
    let kt = gram_rbf(&te.x, Some(&tr.x), gamma).map_err(|e| e.to_string())?;
    let sol = svm_dual_qp(&row_major(&k), &y, cost, 20_000);
    let correct = (0..te.len())
        .filter(|&r| {
            let f: f64 = (0..tr.len()).map(|j| sol.alpha[j] * y[j] * kt.get(r, j)).sum::<f64>() + sol.bias;
            (if f > 0.0 { 1 } else { 0 }) == te.y[r]
        })
        .count();
    Ok(correct as f64 / te.len() as f64)
}

fn criterion_7() -> Outcome {
    let run = first_run()?;
    let rbf = run.report.kernel("rbf").ok_or("no rbf row")?;
    let qamp = run.report.kernel("qamp").ok_or("no qamp row")?;
    let (a_rbf, a_q) = (rbf.test_accuracy.ok_or("rbf failed")?, qamp.test_accuracy.ok_or("qamp failed")?);
    let hp = rbf.hyperparameters.ok_or("rbf has no hyperparameters")?;
    let oracle = oracle_rbf_accuracy(hp.gamma.ok_or("rbf has no gamma")?, hp.c)?;
    ensure(a_rbf >= 0.90, || format!("RBF accuracy {a_rbf}"))?;
    ensure(oracle >= 0.90 && (oracle - a_rbf).abs() <= 0.02, || {
        format!("QP oracle at the same (C, gamma) scores {oracle}, SMO {a_rbf}")
    })?;
    ensure((a_q - a_rbf).abs() <= 0.05, || format!("QAmp {a_q} vs RBF {a_rbf}"))?;
    ensure(qamp.n_qubits == Some(2) && run.report.n_layers == 5, || "QAmp not at N = 2, L = 5".into())?;
    within(run.elapsed, 600.0)?;
    let q = qamp.hyperparameters.unwrap_or_default();
    Ok(format!(
        "RBF {a_rbf:.3} (QP oracle {oracle:.3}), QAmp {a_q:.3} at s = {}, C = {}; |diff| {:.3} ({:.1} s)",
        q.s.unwrap_or(f64::NAN),
        q.c,
        (a_q - a_rbf).abs(),
        run.elapsed.as_secs_f64()
    ))
}

// ---------------------------------------------------------------- 8

fn criterion_8() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let y: Vec<i64> = (0..80).map(|i| i % 2).collect();
    let x = Matrix::from_fn(80, 1, |i, _| {
        if y[i] == 0 {
            rng.random_range(0.0..0.4)
        } else {
            rng.random_range(0.6..1.0)
        }
    });
    let data = Dataset::new(x, y, "separated-1d").map_err(|e| e.to_string())?;
    let prep = run_pipeline(&data, &PipelineSpec::default()).map_err(|e| e.to_string())?;
    let spec = EncoderSpec::qrbf(0.707, 2).map_err(|e| e.to_string())?;
    let scaling = Scaling::new(0.5).map_err(|e| e.to_string())?;
    let report = kta::train(&prep.train.x, &prep.train.y, &spec, scaling, 5, &TrainConfig::default())
        .map_err(|e| e.to_string())?;
    let (k0, kb) = (report.initial_validation_kta(), report.best_validation_kta);
    ensure(kb >= k0, || format!("best validation KTA {kb} below step-0 {k0}"))?;

    let accuracy_of = |params: &AnsatzParams| -> std::result::Result<f64, String> {
        let mut best = (0.0, f64::NEG_INFINITY);
        for cost in qkernel::search::default_c_values() {
            let a = runner::fold_accuracy(&prep, &report, &spec, params, scaling, cost).map_err(|e| e.to_string())?;
            if a > best.1 {
                best = (cost, a);
            }
        }
        let qk = QuantumKernel::new(spec, params.clone(), scaling).map_err(|e| e.to_string())?;
        runner::test_accuracy(&prep, &qk, best.0).map_err(|e| e.to_string())
    };
    let (a0, ab) = (accuracy_of(&report.initial_params)?, accuracy_of(&report.best_params)?);
    ensure(ab >= a0 - 0.02, || format!("trained accuracy {ab} vs untrained {a0}"))?;
    Ok(format!(
        "validation KTA {k0:.4} -> {kb:.4} (best step {}); test accuracy untrained {a0:.3}, trained {ab:.3} ({:.1} s)",
        report.best_step,
        start.elapsed().as_secs_f64()
    ))
}

// ---------------------------------------------------------------- 9

fn criterion_9() -> Outcome {
    let first = first_run()?;
    let second = bench_run()?;
    let mut same = Vec::new();
    for f in ["results.json", "results.csv", "search_qamp.jsonl", "checkpoints/qamp.json"] {
        let a = std::fs::read(first.dir.path().join(f)).map_err(|e| format!("{f}: {e}"))?;
        let b = std::fs::read(second.dir.path().join(f)).map_err(|e| format!("{f}: {e}"))?;
        ensure(a == b, || format!("{f} differs between runs"))?;
        same.push(f);
    }
    Ok(format!("byte-identical across two runs: {}", same.join(", ")))
}

// ---------------------------------------------------------------- 10

/// Checks one trial log against the budget, stage split and sampling sets.
fn check_log(trials: &[Trial], space: &SearchSpace) -> std::result::Result<(), String> {
    let n1 = space.stage1_iterations();
    ensure(trials.len() <= space.total_iterations, || format!("{} trials over budget", trials.len()))?;
    for (i, t) in trials.iter().enumerate() {
        ensure(t.iteration == i, || format!("trial {i} logged as {}", t.iteration))?;
        ensure(t.stage == if i < n1 { 1 } else { 2 }, || format!("trial {i} in stage {}", t.stage))?;
        let p = t.params;
        if space.kind == QuantumKind::Qrbf {
            ensure(p.length_scale.is_some_and(|c| space.length_scales.contains(&c)), || {
                format!("trial {i}: length scale {:?} not in the set", p.length_scale)
            })?;
        }
        if i < n1 {
            ensure(space.s_values.contains(&p.s.unwrap_or(f64::NAN)) && space.c_values.contains(&p.c), || {
                format!("stage-1 trial {i} off the discrete sets")
            })?;
        }
    }
    if trials.len() > n1 {
        let center: &HyperParams = &trials[..n1]
            .iter()
            .filter(|t| t.score.is_some())
            .fold(None::<&Trial>, |b, t| match b {
                Some(b) if b.score >= t.score => Some(b),
                _ => Some(t),
            })
            .ok_or("stage 1 produced no score")?
            .params;
        let w = space.window_decades + 1e-12;
        for t in &trials[n1..] {
            let ds = (t.params.s.unwrap().log10() - center.s.unwrap().log10()).abs();
            let dc = (t.params.c.log10() - center.c.log10()).abs();
            ensure(ds <= w && dc <= w, || {
                format!("stage-2 trial {} outside the window ({ds:.3}, {dc:.3} decades)", t.iteration)
            })?;
        }
    }
    Ok(())
}

fn criterion_10() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let score = |p: &HyperParams| -> Result<f64> {
        let s = p.s.unwrap().log10();
        Ok(0.6 + 0.3 * (-(s + 1.5).powi(2)).exp() / (1.0 + (p.c.log10() - 1.0).abs()))
    };
    let mut notes = Vec::new();
    for (kind, budget) in [(QuantumKind::Qamp, 14), (QuantumKind::Qrbf, 20)] {
        let space = SearchSpace::new(kind, 1.1, 10);
        ensure(space.total_iterations == budget, || format!("{kind:?} default budget {}", space.total_iterations))?;
        let log = dir.path().join(format!("{kind:?}.jsonl"));
        two_stage_random_search(&space, Some(&log), score).map_err(|e| e.to_string())?;
        let trials = read_trial_log(&log).map_err(|e| e.to_string())?;
        ensure(trials.len() == budget, || format!("{kind:?}: {} trials logged", trials.len()))?;
        check_log(&trials, &space)?;

        let stop = SearchSpace::new(kind, 0.0, 10);
        let log = dir.path().join(format!("{kind:?}-stop.jsonl"));
        let r = two_stage_random_search(&stop, Some(&log), score).map_err(|e| e.to_string())?;
        let logged = read_trial_log(&log).map_err(|e| e.to_string())?.len();
        ensure(r.early_stopped && logged == 1, || format!("{kind:?}: baseline 0 logged {logged} trials"))?;
        notes.push(format!("{kind:?} {budget}/{budget}"));
    }

    // the real QAmp search of the benchmark run obeys the same contract
    let run = first_run()?;
    let search = run.report.kernel("qamp").and_then(|k| k.search.clone()).ok_or("no qamp search")?;
    let mut space = SearchSpace::new(QuantumKind::Qamp, search.baseline.unwrap_or(1.1), 42);
    space.total_iterations = search.budget;
    let trials = read_trial_log(&run.dir.path().join("search_qamp.jsonl")).map_err(|e| e.to_string())?;
    ensure(trials == search.trials, || "benchmark log and report disagree".into())?;
    check_log(&trials, &space)?;
    Ok(format!(
        "budgets {}; baseline 0 stops after 1 trial; stage-2 samples inside ±0.5 decades; benchmark log {} trials valid",
        notes.join(", "),
        trials.len()
    ))
}

fn main() {
    let criteria: Vec<Criterion> = vec![
        ("simulator invariants", criterion_1),
        ("encodings", criterion_2),
        ("resource accounting", criterion_3),
        ("Gram properties", criterion_4),
        ("gradient fidelity", criterion_5),
        ("SVM oracle equivalence", criterion_6),
        ("two_moons benchmark", criterion_7),
        ("KTA training sanity", criterion_8),
        ("determinism", criterion_9),
        ("search contract", criterion_10),
    ];
    let mut failed = 0;
    for (i, (name, f)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
            Err(p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panicked".into()))
        });
        match outcome {
            Ok(detail) => println!("PASS criterion {} {name}: {detail}", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL criterion {} {name}: {why}", i + 1)
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}
