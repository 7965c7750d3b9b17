use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use damp_core::generate_instance;
use tempfile::TempDir;

fn damp(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_damp"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env_remove("DAMP_OUT_DIR")
        .output()
        .expect("spawn damp")
}

fn ok(args: &[&str], out: &Path) -> Output {
    let o = damp(args, out);
    assert!(
        o.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&o.stderr)
    );
    o
}

fn column(csv: &str, name: &str) -> Vec<String> {
    let mut lines = csv.lines();
    let idx = lines
        .next()
        .unwrap()
        .split(',')
        .position(|h| h == name)
        .unwrap();
    lines
        .map(|l| l.split(',').nth(idx).unwrap().to_string())
        .collect()
}

fn x_star(dir: &Path) -> Vec<f64> {
    let text = fs::read_to_string(dir.join("x_star.csv")).unwrap();
    column(&text, "value")
        .iter()
        .map(|v| v.parse().unwrap())
        .collect()
}

#[test]
fn sweep_and_cdf_are_byte_identical_across_runs() {
    let (a, b) = (TempDir::new().unwrap(), TempDir::new().unwrap());
    let args = [
        "sweep", "--n", "200", "--runs", "2", "--kappa", "0.2,0.3", "--p", "2,4", "--seed", "9",
    ];
    ok(&args, a.path());
    ok(&args, b.path());
    let first = fs::read(a.path().join("sweep.csv")).unwrap();
    assert_eq!(first, fs::read(b.path().join("sweep.csv")).unwrap());
    let text = String::from_utf8(first).unwrap();
    assert_eq!(
        text.lines().next().unwrap(),
        "n,kappa,rho,noise_sigma,p,protocol,runs,samples,mean_nmn"
    );
    assert_eq!(text.lines().count(), 1 + 2 * 2 * 2);

    let args = ["cdf", "--n", "200", "--runs", "1", "--scenarios", "2,4"];
    ok(&args, a.path());
    ok(&args, b.path());
    let first = fs::read_to_string(a.path().join("cdf.csv")).unwrap();
    assert_eq!(first, fs::read_to_string(b.path().join("cdf.csv")).unwrap());
    let scenarios = column(&first, "scenario");
    assert!(scenarios.iter().all(|s| s == "2" || s == "4"));
    assert!(scenarios.iter().any(|s| s == "4"));
}

#[test]
fn zero_signal_recovers_zero() {
    let seed = (0..1000u64)
        .find(|&s| {
            generate_instance(40, 0.5, 0.01, 0.0, s)
                .unwrap()
                .s0
                .iter()
                .all(|v| *v == 0.0)
        })
        .expect("a seed with an all-zero signal");
    let dir = TempDir::new().unwrap();
    let seed = seed.to_string();
    let args = [
        "solve",
        "--n",
        "40",
        "--kappa",
        "0.5",
        "--rho",
        "0.01",
        "--noise-sigma",
        "0",
        "--p",
        "4",
    ];
    let mut args = args.to_vec();
    args.extend(["--seed", &seed]);
    ok(&args, dir.path());
    assert!(x_star(dir.path()).iter().all(|v| *v == 0.0));
    let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(column(&summary, "converged"), vec!["true"]);
}

#[test]
fn naive_protocol_costs_exactly_the_naive_budget() {
    let dir = TempDir::new().unwrap();
    ok(
        &[
            "solve",
            "--n",
            "300",
            "--p",
            "5",
            "--protocol",
            "naive",
            "--seed",
            "4",
        ],
        dir.path(),
    );
    let iterations = fs::read_to_string(dir.path().join("iterations.csv")).unwrap();
    let mu = column(&iterations, "mu_m");
    assert!(!mu.is_empty());
    assert!(
        mu.iter().all(|m| m.parse::<f64>().unwrap() == 1.0),
        "{mu:?}"
    );
    assert!(column(&iterations, "protocol").iter().all(|p| p == "naive"));
}

#[test]
fn generated_file_solves_like_inline_generation() {
    let dir = TempDir::new().unwrap();
    let flags = ["--n", "300", "--kappa", "0.3", "--seed", "12", "--p", "6"];
    let mut args = vec!["generate"];
    args.extend(flags);
    ok(&args, dir.path());
    let file = dir.path().join("instance.bin");
    assert!(file.exists());

    let loaded = dir.path().join("loaded");
    ok(&["solve", "--instance", file.to_str().unwrap()], &loaded);
    let inline = dir.path().join("inline");
    let mut args = vec!["solve"];
    args.extend(flags);
    ok(&args, &inline);
    for name in ["x_star.csv", "iterations.csv", "summary.csv", "trace.csv"] {
        assert_eq!(
            fs::read(loaded.join(name)).unwrap(),
            fs::read(inline.join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn sensor_count_only_perturbs_rounding() {
    let dir = TempDir::new().unwrap();
    let (one, ten) = (dir.path().join("p1"), dir.path().join("p10"));
    ok(&["solve", "--n", "500", "--seed", "5", "--p", "1"], &one);
    ok(&["solve", "--n", "500", "--seed", "5", "--p", "10"], &ten);
    let (a, b) = (x_star(&one), x_star(&ten));
    let scale = a.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    for (u, v) in a.iter().zip(&b) {
        assert!((u - v).abs() <= 1e-9 * scale.max(1.0), "{u} vs {v}");
    }
    let tau = |d: &Path| {
        column(
            &fs::read_to_string(d.join("summary.csv")).unwrap(),
            "tau_star",
        )
    };
    assert_eq!(tau(&one), tau(&ten));
}

#[test]
fn non_convergence_has_its_own_exit_code() {
    let dir = TempDir::new().unwrap();
    let o = damp(&["solve", "--n", "200", "--maxiter", "1"], dir.path());
    assert_eq!(o.status.code(), Some(2));
    assert!(dir.path().join("x_star.csv").exists());
}

#[test]
fn flags_override_config_file() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# small run\nn = 100\nkappa = 0.3\nprotocol = ta\n").unwrap();
    ok(
        &[
            "solve",
            "--config",
            cfg.to_str().unwrap(),
            "--n",
            "120",
            "--p",
            "3",
        ],
        dir.path(),
    );
    let summary = fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(column(&summary, "n"), vec!["120"]);
    assert_eq!(column(&summary, "m"), vec!["36"]);
    assert_eq!(column(&summary, "protocol"), vec!["ta"]);
}

#[test]
fn errors_name_their_source() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "n = 100\nsensors = 4\n").unwrap();
    let o = damp(&["sweep", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(1));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("bad.cfg:2: unknown key `sensors`"), "{err}");

    let o = damp(&["sweep", "--n", "100", "--theta", "1.2"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("theta"));

    let o = damp(
        &[
            "solve",
            "--instance",
            dir.path().join("missing.bin").to_str().unwrap(),
        ],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing.bin"));
}

#[test]
fn output_directory_defaults_to_environment() {
    let dir = TempDir::new().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_damp"))
        .args(["generate", "--n", "50"])
        .env("DAMP_OUT_DIR", dir.path())
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(dir.path().join("instance.bin").exists());
}
