use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use damp_core::experiment::{run_cdf, run_sweep, write_cdf_csv, write_sweep_csv, SweepConfig};
use damp_core::problem::{read_instance, write_instance};
use damp_core::{
    generate_instance, run_damp, DampOptions, DampRunReport, Partition, ProtocolKind,
    TuningSchedule,
};

mod settings;

use settings::Settings;

/// Exit status of `solve` when the selected τ candidate hit the iteration cap.
const EXIT_NOT_CONVERGED: u8 = 2;

#[derive(Parser)]
#[command(
    name = "damp",
    version,
    about = "Distributed AMP with message-efficient global thresholding"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a problem instance and write it to <out>/instance.bin.
    Generate(Opts),
    /// Recover one instance (generated or loaded) and write x*, iteration and summary CSVs.
    Solve(Opts),
    /// Mean normalized message number over a parameter grid, written to <out>/sweep.csv.
    Sweep(Opts),
    /// Every per-iteration normalized message number of the CDF scenarios, written to <out>/cdf.csv.
    Cdf(Opts),
}

/// Every value may also come from `--config`; flags win. Lists are comma-separated.
#[derive(Args, Debug, Default)]
struct Opts {
    /// Plain-text file of `key = value` lines using the flag names.
    #[arg(long, value_name = "FILE")]
    config: Option<PathBuf>,
    /// Signal length N [default: 5000].
    #[arg(long)]
    n: Option<String>,
    /// Undersampling ratio M/N; a grid for sweep [default: 0.2].
    #[arg(long)]
    kappa: Option<String>,
    /// Sparsity ratio K/M; a grid for sweep [default: 0.1].
    #[arg(long)]
    rho: Option<String>,
    /// Measurement noise standard deviation; a grid for sweep [default: 0.02].
    #[arg(long = "noise-sigma")]
    noise_sigma: Option<String>,
    /// Number of sensors P; a grid for sweep [default: 10].
    #[arg(long)]
    p: Option<String>,
    /// gcamp, ta or naive; a list for sweep and cdf [default: gcamp, or gcamp,ta].
    #[arg(long)]
    protocol: Option<String>,
    /// GCAMP threshold fraction θ in (0, 1) [default: 0.8].
    #[arg(long)]
    theta: Option<String>,
    /// Monte-Carlo runs per grid cell [default: 100].
    #[arg(long)]
    runs: Option<String>,
    /// Instance seed (generate, solve) or base seed (sweep, cdf) [default: 0].
    #[arg(long)]
    seed: Option<String>,
    /// Largest τ candidate [default: 3.0].
    #[arg(long = "tau-max")]
    tau_max: Option<String>,
    /// Spacing of the τ candidates [default: 0.2].
    #[arg(long = "tau-step")]
    tau_step: Option<String>,
    /// Number of τ candidates [default: 11].
    #[arg(long = "tau-count")]
    tau_count: Option<String>,
    /// Relative σ change that ends an inner loop [default: 0.01].
    #[arg(long)]
    eps: Option<String>,
    /// Inner iteration cap per τ candidate [default: 30].
    #[arg(long)]
    maxiter: Option<String>,
    /// Output directory [default: $DAMP_OUT_DIR, else the current directory].
    #[arg(long, value_name = "DIR")]
    out: Option<String>,
    /// Instance file to solve instead of generating one.
    #[arg(long, value_name = "FILE")]
    instance: Option<String>,
    /// CDF scenarios to run, from 1..=4 [default: 1,2,3,4].
    #[arg(long)]
    scenarios: Option<String>,
}

impl Opts {
    fn into_settings(self) -> Result<Settings> {
        let pairs = [
            ("n", self.n),
            ("kappa", self.kappa),
            ("rho", self.rho),
            ("noise-sigma", self.noise_sigma),
            ("p", self.p),
            ("protocol", self.protocol),
            ("theta", self.theta),
            ("runs", self.runs),
            ("seed", self.seed),
            ("tau-max", self.tau_max),
            ("tau-step", self.tau_step),
            ("tau-count", self.tau_count),
            ("eps", self.eps),
            ("maxiter", self.maxiter),
            ("out", self.out),
            ("instance", self.instance),
            ("scenarios", self.scenarios),
        ];
        let flags: BTreeMap<String, String> = pairs
            .into_iter()
            .filter_map(|(k, v)| v.map(|v| (k.to_string(), v)))
            .collect();
        Settings::new(flags, self.config.as_deref())
    }
}

fn schedule(s: &Settings) -> Result<TuningSchedule> {
    let d = TuningSchedule::default();
    let schedule = TuningSchedule {
        tau_max: s.get_or("tau-max", d.tau_max)?,
        delta_tau: s.get_or("tau-step", d.delta_tau)?,
        length: s.get_or("tau-count", d.length)?,
        max_inner_iters: s.get_or("maxiter", d.max_inner_iters)?,
        rel_tol: s.get_or("eps", d.rel_tol)?,
    };
    schedule.validate()?;
    Ok(schedule)
}

fn sweep_config(s: &Settings) -> Result<SweepConfig> {
    let d = SweepConfig::default();
    let config = SweepConfig {
        n: s.get_or("n", d.n)?,
        kappas: s.list_or("kappa", &d.kappas)?,
        rhos: s.list_or("rho", &d.rhos)?,
        noise_sigmas: s.list_or("noise-sigma", &d.noise_sigmas)?,
        sensors: s.list_or("p", &d.sensors)?,
        protocols: s.list_or("protocol", &d.protocols)?,
        runs: s.get_or("runs", d.runs)?,
        base_seed: s.get_or("seed", d.base_seed)?,
        schedule: schedule(s)?,
        theta: s.get_or("theta", d.theta)?,
    };
    Ok(config)
}

fn create(dir: &Path, name: &str) -> Result<(PathBuf, BufWriter<File>)> {
    fs::create_dir_all(dir)
        .with_context(|| format!("creating output directory {}", dir.display()))?;
    let path = dir.join(name);
    let file = File::create(&path).with_context(|| format!("creating {}", path.display()))?;
    Ok((path, BufWriter::new(file)))
}

fn finish(path: &Path, mut out: BufWriter<File>) -> Result<()> {
    out.flush()
        .with_context(|| format!("writing {}", path.display()))
}

fn cmd_generate(s: &Settings) -> Result<()> {
    let instance = generate_instance(
        s.get_or("n", 5000)?,
        s.get_or("kappa", 0.2)?,
        s.get_or("rho", 0.1)?,
        s.get_or("noise-sigma", 0.02)?,
        s.get_or("seed", 0)?,
    )?;
    let partition = Partition::balanced(instance.m(), s.get_or("p", 10)?)?;
    let (path, mut out) = create(&s.out_dir()?, "instance.bin")?;
    write_instance(&mut out, &instance, &partition)
        .with_context(|| format!("writing {}", path.display()))?;
    finish(&path, out)?;
    println!(
        "wrote {} (N={}, M={}, P={}, nonzeros={}, seed={})",
        path.display(),
        instance.n(),
        instance.m(),
        partition.sensors(),
        instance.s0.iter().filter(|v| **v != 0.0).count(),
        instance.seed
    );
    Ok(())
}

const SUMMARY_HEADER: &str =
    "protocol,seed,n,m,p,tau_star,sigma_star,converged,iterations,mean_nmn";

fn write_summary<W: Write>(mut out: W, report: &DampRunReport, n: usize, m: usize) -> Result<()> {
    writeln!(out, "{SUMMARY_HEADER}")?;
    writeln!(
        out,
        "{},{},{},{},{},{},{},{},{},{}",
        report.protocol,
        report.seed,
        n,
        m,
        report.sensors,
        report.tuned.tau_star,
        report.tuned.sigma_star,
        report.converged,
        report.iterations.len(),
        report.mean_nmn().map(|v| v.to_string()).unwrap_or_default()
    )?;
    Ok(())
}

fn cmd_solve(s: &Settings) -> Result<bool> {
    let (instance, stored) = match s.get::<PathBuf>("instance")? {
        Some(path) => {
            let file = File::open(&path)
                .with_context(|| format!("opening instance {}", path.display()))?;
            let (instance, partition) = read_instance(BufReader::new(file))
                .with_context(|| format!("reading instance {}", path.display()))?;
            (instance, Some(partition))
        }
        None => {
            let instance = generate_instance(
                s.get_or("n", 5000)?,
                s.get_or("kappa", 0.2)?,
                s.get_or("rho", 0.1)?,
                s.get_or("noise-sigma", 0.02)?,
                s.get_or("seed", 0)?,
            )?;
            (instance, None)
        }
    };
    let partition = match stored {
        Some(p) if !s.is_set("p") => p,
        _ => Partition::balanced(instance.m(), s.get_or("p", 10)?)?,
    };
    let options = DampOptions {
        schedule: schedule(s)?,
        protocol: s.get_or("protocol", ProtocolKind::Gcamp)?,
        theta: s.get_or("theta", 0.8)?,
        audit: false,
    };
    let report = run_damp(&instance, &partition, &options)?;

    let dir = s.out_dir()?;
    let (path, mut out) = create(&dir, "x_star.csv")?;
    writeln!(out, "index,value")?;
    for (i, v) in report.tuned.x_star.iter().enumerate() {
        writeln!(out, "{i},{v}")?;
    }
    finish(&path, out)?;
    let (path, mut out) = create(&dir, "iterations.csv")?;
    report.write_csv(&mut out)?;
    finish(&path, out)?;
    let (path, mut out) = create(&dir, "trace.csv")?;
    report.write_trace_csv(&mut out)?;
    finish(&path, out)?;
    let (path, mut out) = create(&dir, "summary.csv")?;
    write_summary(&mut out, &report, instance.n(), instance.m())?;
    finish(&path, out)?;

    println!(
        "{} P={}: tau*={} sigma*={} {} after {} iterations, mean NMN {}; wrote {}",
        report.protocol,
        report.sensors,
        report.tuned.tau_star,
        report.tuned.sigma_star,
        if report.converged {
            "converged"
        } else {
            "did not converge"
        },
        report.iterations.len(),
        report
            .mean_nmn()
            .map_or_else(|| "n/a".to_string(), |v| format!("{v:.4}")),
        dir.display()
    );
    Ok(report.converged)
}

fn cmd_sweep(s: &Settings) -> Result<()> {
    let config = sweep_config(s)?;
    config.validate()?;
    let rows = run_sweep(&config)?;
    let (path, mut out) = create(&s.out_dir()?, "sweep.csv")?;
    write_sweep_csv(&mut out, &rows)?;
    finish(&path, out)?;
    println!("wrote {} ({} rows)", path.display(), rows.len());
    Ok(())
}

fn cmd_cdf(s: &Settings) -> Result<()> {
    let config = sweep_config(s)?;
    let scenarios: Vec<usize> = s.list_or("scenarios", &[1, 2, 3, 4])?;
    let samples = run_cdf(&config, &scenarios)?;
    let (path, mut out) = create(&s.out_dir()?, "cdf.csv")?;
    write_cdf_csv(&mut out, &samples)?;
    finish(&path, out)?;
    println!("wrote {} ({} samples)", path.display(), samples.len());
    Ok(())
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Generate(opts) => cmd_generate(&opts.into_settings()?)?,
        Command::Solve(opts) => {
            if !cmd_solve(&opts.into_settings()?)? {
                return Ok(ExitCode::from(EXIT_NOT_CONVERGED));
            }
        }
        Command::Sweep(opts) => cmd_sweep(&opts.into_settings()?)?,
        Command::Cdf(opts) => cmd_cdf(&opts.into_settings()?)?,
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
