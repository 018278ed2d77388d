//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

mod common;

use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sic_core::channel::{add_awgn, scenario, Nonlinearity};
use sic_core::dnn::{build_dataset, Component, FeatureMode};
use sic_core::harness::{self, ExperimentConfig};
use sic_core::modem::{demodulate_bytes, modulate_bytes, PskScheme};
use sic_core::pulse::{PulseConfig, RrcFilter};
use sic_core::sync::Preamble;
use sic_core::ComplexSample;

type Outcome = Result<String, String>;
type Criterion = (&'static str, Duration, fn() -> Outcome);

fn c(re: f64, im: f64) -> ComplexSample {
    ComplexSample::new(re, im)
}

fn check(cond: bool, detail: String) -> Outcome {
    if cond {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn dataset_matrix() -> Outcome {
    let x: Vec<ComplexSample> = (1..=9).map(|i| c(i as f64, -(i as f64))).collect();
    let ds = build_dataset(&x, &x, 3, FeatureMode::PerComponent, Component::I).map_err(|e| e.to_string())?;
    let expected: [[f64; 3]; 7] = [
        [1.0, 2.0, 3.0],
        [2.0, 3.0, 4.0],
        [3.0, 4.0, 5.0],
        [4.0, 5.0, 6.0],
        [5.0, 6.0, 7.0],
        [6.0, 7.0, 8.0],
        [7.0, 8.0, 9.0],
    ];
    let rows_ok = ds.inputs.rows == 7 && (0..7).all(|r| ds.inputs.row(r) == expected[r]);
    let targets_ok = ds.targets == [3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0];
    let joint = build_dataset(&x, &x, 3, FeatureMode::JointIq, Component::Q).map_err(|e| e.to_string())?;
    let joint_ok = joint.inputs.row(0) == [1.0, -1.0, 2.0, -2.0, 3.0, -3.0] && joint.targets[0] == -3.0;
    check(
        rows_ok && targets_ok && joint_ok,
        format!("{} rows, windows and targets match", ds.inputs.rows),
    )
}

fn gradient_oracle() -> Outcome {
    let worst = common::worst_gradient_error(100, 2024);
    check(worst < 1e-5, format!("worst relative error {worst:.2e} over 100 draws"))
}

fn qpsk_worked_example() -> Outcome {
    let frame = modulate_bytes(&[57], PskScheme::Qpsk);
    let expected = vec![c(1.0, 0.0), c(0.0, -1.0), c(0.0, 1.0), c(-1.0, 0.0)];
    let back = demodulate_bytes(&frame.symbols, PskScheme::Qpsk, 1);
    check(
        frame.symbols == expected && back == [57],
        format!("byte 57 maps to 1, -j, j, -1 and decodes to {:?}", back),
    )
}

fn ncc(a: &[ComplexSample], b: &[ComplexSample]) -> f64 {
    let n = a.len().min(b.len());
    let dot: ComplexSample = (0..n).map(|i| a[i] * b[i].conj()).sum();
    let ea: f64 = a[..n].iter().map(|v| v.norm_sqr()).sum();
    let eb: f64 = b[..n].iter().map(|v| v.norm_sqr()).sum();
    dot.norm() / (ea * eb).sqrt()
}

fn validation_replay() -> Outcome {
    let cfg = ExperimentConfig::default();
    let report = harness::validation_replay(&cfg).map_err(|e| e.to_string())?;
    let lib = report.value("validation", "qpsk", Some(2), "ncc_samples").unwrap_or(f64::NAN);
    let sym = report.value("validation", "qpsk", Some(2), "ncc_symbols").unwrap_or(f64::NAN);

    // Same replay computed directly.
    let pulse: RrcFilter = PulseConfig::default().design().map_err(|e| e.to_string())?;
    let pre = Preamble::new(&pulse);
    let frame = |bytes: Vec<u8>| pre.attach(&pulse.shape(&modulate_bytes(&bytes, PskScheme::Qpsk).symbols));
    let x = frame((1..=20).collect());
    let u = frame((101..=120).collect());
    let at = |v: &[ComplexSample], i: isize| if i >= 0 && (i as usize) < v.len() { v[i as usize] } else { c(0.0, 0.0) };
    let n = x.len() + 1;
    let m_hat: Vec<ComplexSample> = (0..n as isize)
        .map(|i| {
            let y = at(&x, i) + at(&x, i - 1) + at(&u, i);
            y - (at(&x, i) * 1.1 + at(&x, i - 1) * 0.9)
        })
        .collect();
    let direct = ncc(&m_hat, &u);
    check(
        direct >= 0.9 && sym >= 0.9 && (direct - lib).abs() < 1e-9,
        format!("NCC samples {direct:.4} (harness {lib:.4}), symbols {sym:.4}"),
    )
}

fn cancellation_depth() -> Outcome {
    let cfg = ExperimentConfig::default();
    let r = harness::eval_cancellation(&cfg, 100).map_err(|e| e.to_string())?;
    let dnn = r.value("validation", "qpsk", Some(100), "joint-iq.cancellation_db").unwrap_or(f64::NAN);
    let ls = r.value("validation", "qpsk", Some(100), "ls.cancellation_db").unwrap_or(f64::NAN);
    check(dnn >= 15.0 && ls >= 60.0, format!("network {dnn:.1} dB, least squares {ls:.1} dB"))
}

fn k_sweep() -> Outcome {
    let cfg = ExperimentConfig {
        scenario: scenario("multipath").map_err(|e| e.to_string())?,
        ..ExperimentConfig::default()
    };
    let r = harness::sweep_k(&cfg, &[2, 20, 50, 100]).map_err(|e| e.to_string())?;
    let get = |k, m| r.value("multipath", "qpsk", Some(k), m).unwrap_or(f64::NAN);
    let red2 = get(2, "loss_reduction");
    let (l20, l100) = (get(20, "final_loss"), get(100, "final_loss"));
    check(
        red2 < 0.2 && l100 <= 0.1 * l20 && get(2, "non_learning") == 1.0,
        format!("K=2 reduction {:.1}%, final loss K=20 {l20:.3e}, K=100 {l100:.3e}", 100.0 * red2),
    )
}

fn nonlinear_advantage() -> Outcome {
    let mut sc = scenario("validation").map_err(|e| e.to_string())?;
    sc.nl_coeffs = Nonlinearity { a1: 1.0, a3: 0.05 };
    let cfg = ExperimentConfig {
        scenario: sc,
        ..ExperimentConfig::default()
    };
    let r = harness::eval_cancellation(&cfg, 20).map_err(|e| e.to_string())?;
    let dnn = r.value("validation", "qpsk", Some(20), "joint-iq.residual_power").unwrap_or(f64::NAN);
    let ls = r.value("validation", "qpsk", Some(20), "ls.residual_power").unwrap_or(f64::NAN);
    check(dnn < ls, format!("held-out residual power: network {dnn:.3e}, least squares {ls:.3e}"))
}

fn ber_orderings() -> Outcome {
    let cfg = ExperimentConfig::default();
    let names = ["room1", "room2", "outdoor", "hallway"];
    let scenarios: Vec<_> = names.iter().map(|n| scenario(n).unwrap()).collect();
    let r = harness::ber_table(&cfg, &scenarios, &PskScheme::ALL, 32).map_err(|e| e.to_string())?;
    if !r.errors.is_empty() {
        return Err(format!("cell errors: {:?}", r.errors));
    }
    let ber = |n: &str, s: PskScheme| r.value(n, s.name(), Some(32), "ber").unwrap_or(f64::NAN);
    let bits_ok = r.rows.iter().filter(|row| row.metric == "bits").all(|row| row.value >= 1e5);
    let mut bad = Vec::new();
    for n in names {
        let [q, p16, p64] = PskScheme::ALL.map(|s| ber(n, s));
        if !(q <= p16 && p16 <= p64) {
            bad.push(format!("{n}: {q} {p16} {p64}"));
        }
    }
    for s in PskScheme::ALL {
        let (out, hall) = (ber("outdoor", s), ber("hallway", s));
        if out.partial_cmp(&hall) == Some(std::cmp::Ordering::Greater) || out.is_nan() || hall.is_nan() {
            bad.push(format!("{s}: outdoor {out} hallway {hall}"));
        }
    }
    let table: Vec<String> = names
        .iter()
        .map(|n| {
            let v = PskScheme::ALL.map(|s| format!("{:.4}", ber(n, s)));
            format!("{n} {}", v.join("/"))
        })
        .collect();
    check(bad.is_empty() && bits_ok, format!("{}; violations {bad:?}", table.join(", ")))
}

fn sync_exactness() -> Outcome {
    let pulse = PulseConfig::default().design().map_err(|e| e.to_string())?;
    let pre = Preamble::new(&pulse);
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let data: Vec<u8> = (0..40).map(|_| rng.random()).collect();
    let frame = pre.attach(&pulse.shape(&modulate_bytes(&data, PskScheme::Qpsk).symbols));
    let build = |d: usize| {
        let mut rx = vec![c(0.0, 0.0); d];
        rx.extend_from_slice(&frame);
        rx.extend(std::iter::repeat_n(c(0.0, 0.0), 50));
        rx
    };
    let mut misses = Vec::new();
    for d in 0..=1000 {
        if pre.locate(&build(d)).ok() != Some(d) {
            misses.push(d);
        }
    }
    let mut noisy_hits = 0;
    for _ in 0..100 {
        let d = rng.random_range(0..=1000);
        let mut rx = build(d);
        add_awgn(&mut rx, 10.0, &mut rng);
        if pre.locate(&rx).ok() == Some(d) {
            noisy_hits += 1;
        }
    }
    check(
        misses.is_empty() && noisy_hits >= 99,
        format!("noiseless misses {misses:?}, 10 dB exact {noisy_hits}/100"),
    )
}

fn run_cli(dir: &Path, tag: &str, args: &[&str]) -> Result<Vec<u8>, String> {
    let out = dir.join(format!("{tag}.csv"));
    let o = Command::new(env!("CARGO_BIN_EXE_sic"))
        .args(args)
        .args(["--format", "csv", "--out", out.to_str().unwrap()])
        .output()
        .map_err(|e| e.to_string())?;
    if !o.status.success() {
        return Err(format!("{args:?} failed: {}", String::from_utf8_lossy(&o.stderr)));
    }
    std::fs::read(out).map_err(|e| e.to_string())
}

fn cli_determinism() -> Outcome {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let model = dir.path().join("model.bin");
    let m = model.to_str().unwrap().to_string();
    let runs: Vec<(&str, Vec<&str>)> = vec![
        ("sweep-k", vec!["sweep-k", "--k", "2,20", "--epochs", "3", "--probe-bytes", "300", "--seed", "7"]),
        ("cancel-eval", vec!["cancel-eval", "--k", "16", "--epochs", "3", "--probe-bytes", "300", "--seed", "7"]),
        ("ber", vec!["ber", "--scenario", "outdoor", "--scheme", "qpsk", "--seed", "7"]),
        ("power-demo", vec!["power-demo", "--seed", "7"]),
        ("train", vec!["train", "--k", "8", "--epochs", "3", "--probe-bytes", "300", "--seed", "7", "--model", &m]),
        ("run", vec!["run", "--model", &m, "--payload-bytes", "300", "--seed", "7"]),
    ];
    let mut differing = Vec::new();
    for (name, args) in &runs {
        let first = run_cli(dir.path(), &format!("{name}-1"), args)?;
        let model_first = if *name == "train" { std::fs::read(&model).ok() } else { None };
        let second = run_cli(dir.path(), &format!("{name}-2"), args)?;
        let model_second = if *name == "train" { std::fs::read(&model).ok() } else { None };
        if first != second || model_first != model_second || first.is_empty() {
            differing.push(*name);
        }
    }
    check(
        differing.is_empty(),
        format!("{} subcommands run twice; differing {differing:?}", runs.len()),
    )
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("dataset matrix fidelity", Duration::from_secs(1), dataset_matrix),
        ("gradient oracle", Duration::from_secs(30), gradient_oracle),
        ("QPSK worked example", Duration::from_secs(1), qpsk_worked_example),
        ("validation replay", Duration::from_secs(5), validation_replay),
        ("cancellation depth", Duration::from_secs(300), cancellation_depth),
        ("K-sweep loss convergence", Duration::from_secs(600), k_sweep),
        ("nonlinear advantage", Duration::from_secs(300), nonlinear_advantage),
        ("BER orderings", Duration::from_secs(600), ber_orderings),
        ("sync exactness", Duration::from_secs(60), sync_exactness),
        ("CLI determinism", Duration::MAX, cli_determinism),
    ];
    let mut failed = 0;
    for (i, (name, limit, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let outcome = run();
        let elapsed = start.elapsed();
        let (ok, detail) = match outcome {
            Ok(d) if elapsed <= *limit => (true, d),
            Ok(d) => (false, format!("{d}; exceeded {:?}", limit)),
            Err(d) => (false, d),
        };
        if !ok {
            failed += 1;
        }
        println!(
            "{} {:>2}. {name} ({:.2} s): {detail}",
            if ok { "PASS" } else { "FAIL" },
            i + 1,
            elapsed.as_secs_f64()
        );
    }
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
