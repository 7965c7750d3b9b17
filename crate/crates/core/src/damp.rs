//! Distributed AMP over the simulated sensor network.
//!
//! Sensor `p` owns rows `A^p`, `y^p` and its residual `z^p`. Each iteration:
//!
//! 1. every sensor forms its contribution `w^p` (sensor 1 adds `x_t`);
//! 2. a global-computation protocol produces `x_{t+1} = η(Σ_p w^p; τσ_t)`;
//! 3. the aggregator broadcasts the nonzero entries of `x_{t+1}`;
//! 4. every sensor updates `z^p` locally;
//! 5. sensors report `‖z^p‖²`, the aggregator forms `σ_{t+1}` and broadcasts it.
//!
//! Only step 2 counts toward the normalized message number; the rest is
//! ledgered under separate phases.

use std::io::Write;
use std::ops::Range;

use crate::amp::{
    amp_step_blocked, combine_block_sigma, soft_threshold, tune, AmpIteration, AmpState,
    CandidateSummary, CentralizedAmp, TunedSolution, TuningSchedule,
};
use crate::error::{check_len, invalid, Result};
use crate::linalg::{l0_norm, sum_squares, support, MatrixView};
use crate::problem::{Partition, ProblemInstance};
use crate::protocols::{nmn, GlobalComputation, ProtocolKind, TraceSummary};
use crate::simnet::{MessageLedger, Network, NodeId, Payload, Phase, PhaseFilter};

/// Local data and state of one sensor.
#[derive(Debug, Clone)]
pub struct SensorState<'a> {
    pub node: NodeId,
    pub rows: Range<usize>,
    pub a: MatrixView<'a>,
    pub y: &'a [f64],
    pub z: Vec<f64>,
    pub w: Vec<f64>,
    /// `‖z^p‖²`, the quantity reported for σ aggregation.
    pub sq_norm: f64,
}

impl<'a> SensorState<'a> {
    /// Sensor `node` holding `rows` of the instance, with `z^p_0 = y^p`.
    pub fn new(node: NodeId, instance: &'a ProblemInstance, rows: Range<usize>) -> Self {
        let y = &instance.y[rows.clone()];
        Self {
            node,
            a: instance.a.row_block(rows.clone()),
            rows,
            y,
            z: y.to_vec(),
            w: vec![0.0; instance.n()],
            sq_norm: sum_squares(y),
        }
    }

    pub fn is_aggregator(&self) -> bool {
        self.node == NodeId::AGGREGATOR
    }
}

/// One sensor per block of `partition`.
pub fn build_sensors<'a>(
    instance: &'a ProblemInstance,
    partition: &Partition,
) -> Result<Vec<SensorState<'a>>> {
    check_len("partition rows", instance.m(), partition.rows())?;
    Ok(partition
        .ranges()
        .iter()
        .enumerate()
        .map(|(i, r)| SensorState::new(NodeId::new(i + 1), instance, r.clone()))
        .collect())
}

/// `w¹ = x_t + A¹ᵀz¹`, `w^p = A^pᵀz^p` for `p ≥ 2`.
pub fn local_compute_w(sensor: &mut SensorState<'_>, x: &[f64]) -> Result<()> {
    check_len("estimate length", sensor.a.cols(), x.len())?;
    sensor.a.transpose_mul_into(&sensor.z, &mut sensor.w)?;
    if sensor.is_aggregator() {
        for (w, xn) in sensor.w.iter_mut().zip(x) {
            *w += xn;
        }
    }
    Ok(())
}

/// `z^p ← y^p − A^p x_{t+1} + (‖x_{t+1}‖₀/M)·z^p`.
pub fn local_update_z(
    sensor: &mut SensorState<'_>,
    x_next: &[f64],
    x_next_l0: usize,
    m: usize,
) -> Result<()> {
    check_len("estimate length", sensor.a.cols(), x_next.len())?;
    if m == 0 {
        return Err(invalid("m", "must be at least 1"));
    }
    let onsager = x_next_l0 as f64 / m as f64;
    let ax = sensor.a.mul_sparse(&support(x_next));
    for ((z, y), axi) in sensor.z.iter_mut().zip(sensor.y).zip(&ax) {
        *z = y - axi + onsager * *z;
    }
    sensor.sq_norm = sum_squares(&sensor.z);
    Ok(())
}

/// Sensors `2..=P` send `‖z^p‖²` to the aggregator, which forms
/// `σ = sqrt(Σ_p ‖z^p‖² / M)` and broadcasts it back.
pub fn aggregate_sigma(sensors: &[SensorState<'_>], m: usize, net: &mut Network) -> Result<f64> {
    check_len("network size", sensors.len(), net.nodes())?;
    if m == 0 {
        return Err(invalid("m", "must be at least 1"));
    }
    let agg = NodeId::AGGREGATOR;
    net.set_phase(Phase::SigmaReport);
    for s in sensors.iter().filter(|s| !s.is_aggregator()) {
        net.send(s.node, agg, Payload::Scalar(s.sq_norm))?;
    }
    let mut blocks = vec![0.0; sensors.len()];
    blocks[0] = sensors[0].sq_norm;
    while let Some(env) = net.next_message(agg) {
        if let Payload::Scalar(v) = env.payload {
            blocks[env.from.index()] = v;
        }
    }
    let sigma = combine_block_sigma(&blocks, m);
    net.set_phase(Phase::ThresholdBroadcast);
    net.broadcast(agg, Payload::Scalar(sigma))?;
    for s in sensors.iter().filter(|s| !s.is_aggregator()) {
        while net.next_message(s.node).is_some() {}
    }
    Ok(sigma)
}

/// Run options for [`run_damp`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DampOptions {
    pub schedule: TuningSchedule,
    pub protocol: ProtocolKind,
    /// GCAMP's θ.
    pub theta: f64,
    /// Advance the centralized solver in lockstep and compare every iterate.
    pub audit: bool,
}

impl Default for DampOptions {
    fn default() -> Self {
        Self {
            schedule: TuningSchedule::default(),
            protocol: ProtocolKind::Gcamp,
            theta: 0.8,
            audit: false,
        }
    }
}

/// One inner iteration of the distributed solver.
#[derive(Debug, Clone)]
pub struct IterationRecord {
    pub tau: f64,
    /// Inner iteration index within the current τ candidate, from 1.
    pub t: usize,
    /// Global iteration count.
    pub iter: usize,
    /// Normalized message number; `None` for a single sensor.
    pub mu_m: Option<f64>,
    pub sigma: f64,
    pub l0: usize,
    pub ledger: MessageLedger,
    pub trace: TraceSummary,
}

#[derive(Debug, Clone)]
pub struct DampRunReport {
    pub protocol: ProtocolKind,
    pub seed: u64,
    pub sensors: usize,
    pub tuned: TunedSolution,
    pub candidates: Vec<CandidateSummary>,
    /// Whether the selected candidate's inner loop met the σ criterion.
    pub converged: bool,
    pub iterations: Vec<IterationRecord>,
    /// Messages spent computing σ_0 before the first iteration.
    pub setup_ledger: MessageLedger,
    /// `Some(all iterates bit-identical)` when audited, `None` otherwise.
    pub equivalence_ok: Option<bool>,
}

impl DampRunReport {
    pub fn nmn_samples(&self) -> impl Iterator<Item = f64> + '_ {
        self.iterations.iter().filter_map(|r| r.mu_m)
    }

    /// Mean of the per-iteration normalized message numbers.
    pub fn mean_nmn(&self) -> Option<f64> {
        let (sum, count) = self
            .nmn_samples()
            .fold((0.0, 0usize), |(s, c), v| (s + v, c + 1));
        (count > 0).then(|| sum / count as f64)
    }

    pub const CSV_HEADER: &'static str = "tau,t,mu_m,sigma_t,l0,protocol,seed";

    /// One row per inner iteration.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "{}", Self::CSV_HEADER)?;
        for r in &self.iterations {
            let mu = r.mu_m.map(|v| v.to_string()).unwrap_or_default();
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.tau, r.t, mu, r.sigma, r.l0, self.protocol, self.seed
            )?;
        }
        Ok(())
    }

    /// Protocol diagnostics, one row per inner iteration.
    pub fn write_trace_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "tau,t,{}", TraceSummary::CSV_HEADER)?;
        for r in &self.iterations {
            writeln!(out, "{},{},{}", r.tau, r.t, r.trace.csv_fields())?;
        }
        Ok(())
    }
}

/// Iterate state of the distributed solver.
#[derive(Debug, Clone)]
pub struct DampState<'a> {
    pub x: Vec<f64>,
    pub sensors: Vec<SensorState<'a>>,
    pub sigma: f64,
    pub iter: usize,
}

impl DampState<'_> {
    /// Residuals of all sensors concatenated in partition order.
    pub fn residual(&self) -> Vec<f64> {
        self.sensors
            .iter()
            .flat_map(|s| s.z.iter().copied())
            .collect()
    }
}

fn bit_equal(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
}

struct Lockstep<'a> {
    oracle: CentralizedAmp<'a>,
    state: AmpState,
    ok: bool,
}

struct DistributedAmp<'a> {
    m: usize,
    protocol: Box<dyn GlobalComputation + Send + Sync>,
    net: Network,
    records: Vec<IterationRecord>,
    lockstep: Option<Lockstep<'a>>,
    last_tau: Option<f64>,
    inner_t: usize,
}

impl<'a> AmpIteration for DistributedAmp<'a> {
    type State = DampState<'a>;

    fn step(&mut self, state: &DampState<'a>, tau: f64) -> Result<DampState<'a>> {
        let sensors_count = state.sensors.len();
        let n = state.x.len();
        let mut next = state.clone();

        for sensor in &mut next.sensors {
            local_compute_w(sensor, &state.x)?;
        }
        let beta = tau * state.sigma;
        let w: Vec<&[f64]> = next.sensors.iter().map(|s| s.w.as_slice()).collect();
        let out = self.protocol.compute(&w, beta, &mut self.net)?;
        let x_next = out.x_next;

        let agg = NodeId::AGGREGATOR;
        self.net.set_phase(Phase::NonzeroBroadcast);
        for (index, value) in support(&x_next) {
            self.net.broadcast(agg, Payload::Nonzero { index, value })?;
        }
        let l0 = l0_norm(&x_next);
        for sensor in &mut next.sensors {
            if sensor.is_aggregator() {
                local_update_z(sensor, &x_next, l0, self.m)?;
            } else {
                let mut local_x = vec![0.0; n];
                let mut local_l0 = 0;
                while let Some(env) = self.net.next_message(sensor.node) {
                    if let Payload::Nonzero { index, value } = env.payload {
                        local_x[index] = value;
                        local_l0 += 1;
                    }
                }
                local_update_z(sensor, &local_x, local_l0, self.m)?;
            }
        }
        let sigma = aggregate_sigma(&next.sensors, self.m, &mut self.net)?;

        next.x = x_next;
        next.sigma = sigma;
        next.iter = state.iter + 1;

        if self.last_tau != Some(tau) {
            self.last_tau = Some(tau);
            self.inner_t = 0;
        }
        self.inner_t += 1;
        let ledger = self.net.take_ledger();
        let mu_m = if sensors_count >= 2 {
            Some(nmn(&ledger, n, sensors_count)?)
        } else {
            None
        };
        self.records.push(IterationRecord {
            tau,
            t: self.inner_t,
            iter: next.iter,
            mu_m,
            sigma,
            l0,
            ledger,
            trace: out.trace.summary(),
        });

        if let Some(lock) = &mut self.lockstep {
            let expected = amp_step_blocked(
                &lock.state,
                lock.oracle.a,
                lock.oracle.y,
                tau,
                lock.oracle.partition,
            )?;
            let same = bit_equal(&expected.x, &next.x)
                && expected.sigma.to_bits() == next.sigma.to_bits()
                && bit_equal(&expected.z, &next.residual());
            lock.ok &= same;
            lock.state = expected;
        }
        Ok(next)
    }

    fn sigma(state: &DampState<'a>) -> f64 {
        state.sigma
    }

    fn estimate<'s>(state: &'s DampState<'a>) -> &'s [f64] {
        &state.x
    }
}

/// Run the full τ-tuning loop with distributed inner iterations.
///
/// With a single sensor every protocol degenerates to local thresholding and
/// no messages are sent.
pub fn run_damp(
    instance: &ProblemInstance,
    partition: &Partition,
    options: &DampOptions,
) -> Result<DampRunReport> {
    options.schedule.validate()?;
    let sensors_count = partition.sensors();
    let protocol = if sensors_count < 2 {
        ProtocolKind::Naive
    } else {
        options.protocol
    };
    if protocol == ProtocolKind::Gcamp && !(options.theta > 0.0 && options.theta < 1.0) {
        return Err(invalid(
            "theta",
            format!("{} is outside (0, 1)", options.theta),
        ));
    }

    let m = instance.m();
    let mut net = Network::new(sensors_count);
    let sensors = build_sensors(instance, partition)?;
    let sigma0 = aggregate_sigma(&sensors, m, &mut net)?;
    let setup_ledger = net.take_ledger();
    let init = DampState {
        x: vec![0.0; instance.n()],
        sensors,
        sigma: sigma0,
        iter: 0,
    };

    let lockstep = if options.audit {
        let oracle = CentralizedAmp::new(&instance.a, &instance.y, partition)?;
        let state = oracle.initial_state()?;
        let ok = state.sigma.to_bits() == sigma0.to_bits();
        Some(Lockstep { oracle, state, ok })
    } else {
        None
    };

    let mut runner = DistributedAmp {
        m,
        protocol: protocol.build(options.theta),
        net,
        records: Vec::new(),
        lockstep,
        last_tau: None,
        inner_t: 0,
    };
    let tuning = tune(&mut runner, &options.schedule, init)?;
    let converged = tuning.converged();

    Ok(DampRunReport {
        protocol: options.protocol,
        seed: instance.seed,
        sensors: sensors_count,
        tuned: tuning.tuned,
        candidates: tuning.candidates,
        converged,
        iterations: runner.records,
        setup_ledger,
        equivalence_ok: runner.lockstep.map(|l| l.ok),
    })
}

/// Threshold the ascending-sensor column sums directly: the centralized
/// reference every protocol must match.
pub fn centralized_threshold<W: AsRef<[f64]>>(w: &[W], beta: f64) -> Vec<f64> {
    let n = w.first().map_or(0, |w| w.as_ref().len());
    (0..n)
        .map(|i| {
            let sum = w[1..]
                .iter()
                .fold(w[0].as_ref()[i], |acc, wp| acc + wp.as_ref()[i]);
            soft_threshold(sum, beta)
        })
        .collect()
}

/// Total of the estimate-phase messages across all iterations.
pub fn estimate_messages(report: &DampRunReport) -> u64 {
    report
        .iterations
        .iter()
        .map(|r| r.ledger.total(PhaseFilter::Estimate))
        .sum()
}
