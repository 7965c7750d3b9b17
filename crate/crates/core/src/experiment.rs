//! Monte-Carlo sweeps of the normalized message number.
//!
//! Every `(grid cell, run)` pair gets its own seed, `base_seed ⊕ mix(cell, run)`,
//! so any cell can be reproduced on its own. Within a run every protocol sees
//! the same instance. A fresh `A`, `s0` and noise vector are drawn per run.

use std::io::Write;

use rayon::prelude::*;

use crate::amp::TuningSchedule;
use crate::damp::{run_damp, DampOptions};
use crate::error::{invalid, Result};
use crate::problem::{generate_instance, measurement_count, Partition};
use crate::protocols::ProtocolKind;

/// One point of the parameter grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub n: usize,
    pub kappa: f64,
    pub rho: f64,
    pub noise_sigma: f64,
    pub sensors: usize,
}

/// The four κ/ρ/σ/P scenarios whose per-iteration distributions are compared.
pub const CDF_SCENARIOS: [(f64, f64, f64, usize); 4] = [
    (0.2, 0.1, 0.02, 5),
    (0.2, 0.1, 0.02, 10),
    (0.2, 0.1, 0.01, 10),
    (0.3, 0.1, 0.02, 10),
];

#[derive(Debug, Clone, PartialEq)]
pub struct SweepConfig {
    pub n: usize,
    pub kappas: Vec<f64>,
    pub rhos: Vec<f64>,
    pub noise_sigmas: Vec<f64>,
    pub sensors: Vec<usize>,
    pub protocols: Vec<ProtocolKind>,
    pub runs: usize,
    pub base_seed: u64,
    pub schedule: TuningSchedule,
    pub theta: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            n: 5000,
            kappas: vec![0.2],
            rhos: vec![0.1],
            noise_sigmas: vec![0.02],
            sensors: vec![10],
            protocols: vec![ProtocolKind::Gcamp, ProtocolKind::ModifiedTa],
            runs: 100,
            base_seed: 0,
            schedule: TuningSchedule::default(),
            theta: 0.8,
        }
    }
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(invalid("n", "must be at least 1"));
        }
        if self.runs == 0 {
            return Err(invalid("runs", "must be at least 1"));
        }
        let nonempty = |name: &'static str, len: usize| {
            if len == 0 {
                Err(invalid(name, "grid is empty"))
            } else {
                Ok(())
            }
        };
        nonempty("kappa", self.kappas.len())?;
        nonempty("rho", self.rhos.len())?;
        nonempty("noise-sigma", self.noise_sigmas.len())?;
        nonempty("p", self.sensors.len())?;
        nonempty("protocol", self.protocols.len())?;
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err(invalid(
                "theta",
                format!("{} is outside (0, 1)", self.theta),
            ));
        }
        for &k in &self.kappas {
            if !(k > 0.0 && k <= 1.0) {
                return Err(invalid("kappa", format!("{k} is outside (0, 1]")));
            }
        }
        for &r in &self.rhos {
            if !(r > 0.0 && r <= 1.0) {
                return Err(invalid("rho", format!("{r} is outside (0, 1]")));
            }
        }
        for &s in &self.noise_sigmas {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(invalid(
                    "noise-sigma",
                    format!("{s} is not a finite nonnegative value"),
                ));
            }
        }
        let min_m = self
            .kappas
            .iter()
            .map(|&k| measurement_count(self.n, k))
            .min()
            .unwrap_or(0);
        for &p in &self.sensors {
            if p < 2 {
                return Err(invalid("p", "sweeps need at least 2 sensors"));
            }
            if p > min_m {
                return Err(invalid(
                    "p",
                    format!("{p} sensors exceed the {min_m} available measurement rows"),
                ));
            }
        }
        self.schedule.validate()
    }

    /// Grid cells in output order: κ, then ρ, then σ, then P.
    pub fn cells(&self) -> Vec<Cell> {
        let mut cells = Vec::new();
        for &kappa in &self.kappas {
            for &rho in &self.rhos {
                for &noise_sigma in &self.noise_sigmas {
                    for &sensors in &self.sensors {
                        cells.push(Cell {
                            n: self.n,
                            kappa,
                            rho,
                            noise_sigma,
                            sensors,
                        });
                    }
                }
            }
        }
        cells
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of run `run` in `cell`.
pub fn cell_seed(base_seed: u64, cell: &Cell, run: usize) -> u64 {
    let words = [
        cell.n as u64,
        cell.kappa.to_bits(),
        cell.rho.to_bits(),
        cell.noise_sigma.to_bits(),
        cell.sensors as u64,
        run as u64,
    ];
    base_seed ^ words.iter().fold(0u64, |h, &w| splitmix64(h ^ w))
}

/// Per-iteration normalized message number.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NmnSample {
    pub tau: f64,
    pub t: usize,
    pub mu_m: f64,
}

/// Samples of one protocol on one run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSamples {
    pub protocol: ProtocolKind,
    pub run: usize,
    pub seed: u64,
    pub samples: Vec<NmnSample>,
}

/// Run every protocol of `config` on `config.runs` instances of `cell`.
/// Output order is run-major, then protocol order.
pub fn run_cell(config: &SweepConfig, cell: &Cell) -> Result<Vec<RunSamples>> {
    let per_run: Vec<Vec<RunSamples>> = (0..config.runs)
        .into_par_iter()
        .map(|run| {
            let seed = cell_seed(config.base_seed, cell, run);
            let instance = generate_instance(cell.n, cell.kappa, cell.rho, cell.noise_sigma, seed)?;
            let partition = Partition::balanced(instance.m(), cell.sensors)?;
            config
                .protocols
                .iter()
                .map(|&protocol| {
                    let options = DampOptions {
                        schedule: config.schedule,
                        protocol,
                        theta: config.theta,
                        audit: false,
                    };
                    let report = run_damp(&instance, &partition, &options)?;
                    let samples = report
                        .iterations
                        .iter()
                        .filter_map(|r| {
                            r.mu_m.map(|mu_m| NmnSample {
                                tau: r.tau,
                                t: r.t,
                                mu_m,
                            })
                        })
                        .collect();
                    Ok(RunSamples {
                        protocol,
                        run,
                        seed,
                        samples,
                    })
                })
                .collect()
        })
        .collect::<Result<_>>()?;
    Ok(per_run.into_iter().flatten().collect())
}

/// Mean over all samples of all runs of `protocol`, uniformly weighted.
pub fn mean_nmn(runs: &[RunSamples], protocol: ProtocolKind) -> Option<f64> {
    let (sum, count) = runs
        .iter()
        .filter(|r| r.protocol == protocol)
        .flat_map(|r| &r.samples)
        .fold((0.0, 0usize), |(s, c), x| (s + x.mu_m, c + 1));
    (count > 0).then(|| sum / count as f64)
}

/// One line of the sweep table.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub cell: Cell,
    pub protocol: ProtocolKind,
    pub runs: usize,
    pub samples: usize,
    pub mean_nmn: f64,
}

pub fn run_sweep(config: &SweepConfig) -> Result<Vec<SweepRow>> {
    config.validate()?;
    let mut rows = Vec::new();
    for cell in config.cells() {
        let runs = run_cell(config, &cell)?;
        for &protocol in &config.protocols {
            let samples = runs
                .iter()
                .filter(|r| r.protocol == protocol)
                .map(|r| r.samples.len())
                .sum();
            rows.push(SweepRow {
                cell,
                protocol,
                runs: config.runs,
                samples,
                mean_nmn: mean_nmn(&runs, protocol).unwrap_or(f64::NAN),
            });
        }
    }
    Ok(rows)
}

pub const SWEEP_CSV_HEADER: &str = "n,kappa,rho,noise_sigma,p,protocol,runs,samples,mean_nmn";

pub fn write_sweep_csv<W: Write>(mut out: W, rows: &[SweepRow]) -> Result<()> {
    writeln!(out, "{SWEEP_CSV_HEADER}")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{:.6}",
            r.cell.n,
            r.cell.kappa,
            r.cell.rho,
            r.cell.noise_sigma,
            r.cell.sensors,
            r.protocol,
            r.runs,
            r.samples,
            r.mean_nmn
        )?;
    }
    Ok(())
}

/// Per-iteration sample tagged with its scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct CdfSample {
    /// 1-based index into [`CDF_SCENARIOS`].
    pub scenario: usize,
    pub cell: Cell,
    pub protocol: ProtocolKind,
    pub run: usize,
    pub sample: NmnSample,
}

/// Collect every per-iteration sample for the chosen scenarios (1-based).
/// Uses `n`, `runs`, `base_seed`, `schedule`, `theta` and `protocols` from
/// `config`; the grids are replaced by the scenario settings.
pub fn run_cdf(config: &SweepConfig, scenarios: &[usize]) -> Result<Vec<CdfSample>> {
    if scenarios.is_empty() {
        return Err(invalid("scenarios", "no scenario selected"));
    }
    let mut out = Vec::new();
    for &id in scenarios {
        let &(kappa, rho, noise_sigma, sensors) = id
            .checked_sub(1)
            .and_then(|i| CDF_SCENARIOS.get(i))
            .ok_or_else(|| invalid("scenarios", format!("{id} is not in 1..=4")))?;
        let scenario_config = SweepConfig {
            kappas: vec![kappa],
            rhos: vec![rho],
            noise_sigmas: vec![noise_sigma],
            sensors: vec![sensors],
            ..config.clone()
        };
        scenario_config.validate()?;
        let cell = scenario_config.cells()[0];
        for run in run_cell(&scenario_config, &cell)? {
            for sample in run.samples {
                out.push(CdfSample {
                    scenario: id,
                    cell,
                    protocol: run.protocol,
                    run: run.run,
                    sample,
                });
            }
        }
    }
    Ok(out)
}

pub const CDF_CSV_HEADER: &str = "scenario,kappa,rho,noise_sigma,p,protocol,run,tau,t,mu_m";

pub fn write_cdf_csv<W: Write>(mut out: W, samples: &[CdfSample]) -> Result<()> {
    writeln!(out, "{CDF_CSV_HEADER}")?;
    for s in samples {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            s.scenario,
            s.cell.kappa,
            s.cell.rho,
            s.cell.noise_sigma,
            s.cell.sensors,
            s.protocol,
            s.run,
            s.sample.tau,
            s.sample.t,
            s.sample.mu_m
        )?;
    }
    Ok(())
}
