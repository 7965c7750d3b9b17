//! Centralized approximate message passing.
//!
//! One step maps `(x_t, z_t, σ_t)` to
//!
//! ```text
//! x_{t+1} = η(x_t + Aᵀ z_t; τ·σ_t)
//! z_{t+1} = y − A x_{t+1} + (‖x_{t+1}‖₀ / M)·z_t
//! σ_{t+1} = ‖z_{t+1}‖₂ / √M
//! ```
//!
//! where `η` is the soft threshold. τ is chosen by walking a descending
//! candidate list, warm-starting each candidate from the previous one, and
//! stopping once the converged σ increases.
//!
//! The cross-row sums (`Aᵀz`, `‖z‖²`) are evaluated block by block along a
//! [`Partition`]: rows ascending inside a block, blocks ascending. With a single
//! block this is plain left-to-right summation; with a sensor partition it is
//! the exact floating-point evaluation order of the distributed solver, which
//! is what makes lockstep comparison bit-exact.

use crate::error::{check_len, invalid, Error, Result};
use crate::linalg::{l0_norm, sum_squares, support, Matrix};
use crate::problem::Partition;
use crate::quantile::normal_quantile;

/// Soft threshold `η(x; β) = (|x| − β)·sgn(x)` for `|x| > β`, otherwise 0.
#[inline]
pub fn soft_threshold(x: f64, beta: f64) -> f64 {
    let mag = x.abs();
    if mag > beta {
        (mag - beta) * x.signum()
    } else {
        0.0
    }
}

/// Noise level estimate `sqrt(‖z‖² / M)`.
pub fn sigma_estimate(z: &[f64], m: usize) -> Result<f64> {
    if m == 0 {
        return Err(invalid("m", "must be at least 1"));
    }
    check_len("sigma estimate", m, z.len())?;
    Ok((sum_squares(z) / m as f64).sqrt())
}

/// Noise level from per-block squared norms, combined in block order.
pub fn combine_block_sigma(block_sq_norms: &[f64], m: usize) -> f64 {
    let mut iter = block_sq_norms.iter();
    let first = iter.next().copied().unwrap_or(0.0);
    let total = iter.fold(first, |acc, s| acc + s);
    (total / m as f64).sqrt()
}

/// `sqrt(Σ_p ‖z^p‖² / M)` with the blocks of `partition`.
pub fn blocked_sigma(z: &[f64], partition: &Partition) -> Result<f64> {
    check_len("blocked sigma", partition.rows(), z.len())?;
    if partition.rows() == 0 {
        return Err(invalid("m", "must be at least 1"));
    }
    let blocks: Vec<f64> = partition
        .ranges()
        .iter()
        .map(|r| sum_squares(&z[r.clone()]))
        .collect();
    Ok(combine_block_sigma(&blocks, partition.rows()))
}

/// Iterate of the AMP recursion.
#[derive(Debug, Clone, PartialEq)]
pub struct AmpState {
    pub x: Vec<f64>,
    pub z: Vec<f64>,
    pub sigma: f64,
    pub iter: usize,
}

impl AmpState {
    /// `x_0 = 0`, `z_0 = y`.
    pub fn initial(n: usize, y: &[f64]) -> Result<Self> {
        Ok(Self {
            x: vec![0.0; n],
            z: y.to_vec(),
            sigma: sigma_estimate(y, y.len())?,
            iter: 0,
        })
    }
}

/// Per-component effective observation `x + Aᵀz`, with the transpose product
/// accumulated block by block.
fn effective_observation(
    x: &[f64],
    a: &Matrix,
    z: &[f64],
    partition: &Partition,
) -> Result<Vec<f64>> {
    let mut pseudo = x.to_vec();
    let mut block = vec![0.0; a.cols()];
    for range in partition.ranges() {
        a.row_block(range.clone())
            .transpose_mul_into(&z[range.clone()], &mut block)?;
        for (p, b) in pseudo.iter_mut().zip(&block) {
            *p += b;
        }
    }
    Ok(pseudo)
}

fn check_dims(state: &AmpState, a: &Matrix, y: &[f64], partition: &Partition) -> Result<()> {
    check_len("estimate length", a.cols(), state.x.len())?;
    check_len("residual length", a.rows(), state.z.len())?;
    check_len("measurement length", a.rows(), y.len())?;
    check_len("partition rows", a.rows(), partition.rows())
}

/// One AMP step, summing across the blocks of `partition`.
pub fn amp_step_blocked(
    state: &AmpState,
    a: &Matrix,
    y: &[f64],
    tau: f64,
    partition: &Partition,
) -> Result<AmpState> {
    check_dims(state, a, y, partition)?;
    let beta = tau * state.sigma;
    let x: Vec<f64> = effective_observation(&state.x, a, &state.z, partition)?
        .into_iter()
        .map(|v| soft_threshold(v, beta))
        .collect();
    let onsager = l0_norm(&x) as f64 / a.rows() as f64;
    let ax = a.view().mul_sparse(&support(&x));
    let z: Vec<f64> = y
        .iter()
        .zip(&ax)
        .zip(&state.z)
        .map(|((yi, axi), zi)| yi - axi + onsager * zi)
        .collect();
    let sigma = blocked_sigma(&z, partition)?;
    Ok(AmpState {
        x,
        z,
        sigma,
        iter: state.iter + 1,
    })
}

/// One AMP step with plain left-to-right sums.
pub fn amp_step(state: &AmpState, a: &Matrix, y: &[f64], tau: f64) -> Result<AmpState> {
    amp_step_blocked(state, a, y, tau, &Partition::single(a.rows()))
}

/// Something that can advance an AMP-style iterate for a given τ.
///
/// Implemented by the centralized solver and by the distributed runner so both
/// share the same convergence test and τ tuning loop.
pub trait AmpIteration {
    type State: Clone;

    fn step(&mut self, state: &Self::State, tau: f64) -> Result<Self::State>;

    fn sigma(state: &Self::State) -> f64;

    fn estimate(state: &Self::State) -> &[f64];
}

/// Centralized AMP over a fixed summation layout.
#[derive(Debug, Clone, Copy)]
pub struct CentralizedAmp<'a> {
    pub a: &'a Matrix,
    pub y: &'a [f64],
    pub partition: &'a Partition,
}

impl<'a> CentralizedAmp<'a> {
    pub fn new(a: &'a Matrix, y: &'a [f64], partition: &'a Partition) -> Result<Self> {
        check_len("measurement length", a.rows(), y.len())?;
        check_len("partition rows", a.rows(), partition.rows())?;
        Ok(Self { a, y, partition })
    }

    /// `x_0 = 0`, `z_0 = y`, σ_0 summed over the partition blocks.
    pub fn initial_state(&self) -> Result<AmpState> {
        Ok(AmpState {
            x: vec![0.0; self.a.cols()],
            z: self.y.to_vec(),
            sigma: blocked_sigma(self.y, self.partition)?,
            iter: 0,
        })
    }
}

impl AmpIteration for CentralizedAmp<'_> {
    type State = AmpState;

    fn step(&mut self, state: &AmpState, tau: f64) -> Result<AmpState> {
        amp_step_blocked(state, self.a, self.y, tau, self.partition)
    }

    fn sigma(state: &AmpState) -> f64 {
        state.sigma
    }

    fn estimate(state: &AmpState) -> &[f64] {
        &state.x
    }
}

/// `|σ_t − σ_{t−1}| < ε·σ_{t−1}`, with two exact zeros counted as converged.
pub fn sigma_converged(previous: f64, current: f64, rel_tol: f64) -> bool {
    (previous == 0.0 && current == 0.0) || (current - previous).abs() < rel_tol * previous
}

/// Result of iterating at one τ.
#[derive(Debug, Clone, PartialEq)]
pub struct FixedTauOutcome<S> {
    pub state: S,
    pub converged: bool,
    pub iterations: usize,
}

/// Step until σ settles or `max_iters` steps have run.
pub fn iterate_fixed_tau<I: AmpIteration>(
    iteration: &mut I,
    init: I::State,
    tau: f64,
    max_iters: usize,
    rel_tol: f64,
) -> Result<FixedTauOutcome<I::State>> {
    let mut state = init;
    for k in 1..=max_iters {
        let next = iteration.step(&state, tau)?;
        let done = sigma_converged(I::sigma(&state), I::sigma(&next), rel_tol);
        state = next;
        if done {
            return Ok(FixedTauOutcome {
                state,
                converged: true,
                iterations: k,
            });
        }
    }
    Ok(FixedTauOutcome {
        state,
        converged: false,
        iterations: max_iters,
    })
}

/// Centralized fixed-τ iteration with plain summation.
pub fn run_fixed_tau(
    state: AmpState,
    a: &Matrix,
    y: &[f64],
    tau: f64,
    max_iters: usize,
    rel_tol: f64,
) -> Result<FixedTauOutcome<AmpState>> {
    if rel_tol.is_nan() || rel_tol <= 0.0 {
        return Err(invalid("eps", "must be positive"));
    }
    let partition = Partition::single(a.rows());
    let mut amp = CentralizedAmp::new(a, y, &partition)?;
    iterate_fixed_tau(&mut amp, state, tau, max_iters, rel_tol)
}

/// Descending list of τ candidates plus the inner-loop stopping rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TuningSchedule {
    pub tau_max: f64,
    pub delta_tau: f64,
    pub length: usize,
    pub max_inner_iters: usize,
    pub rel_tol: f64,
}

impl Default for TuningSchedule {
    /// τ from 3.0 down to 1.0 in steps of 0.2, 30 inner iterations, ε = 0.01.
    fn default() -> Self {
        Self {
            tau_max: 3.0,
            delta_tau: 0.2,
            length: 11,
            max_inner_iters: 30,
            rel_tol: 0.01,
        }
    }
}

impl TuningSchedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau_max > 0.0 && self.tau_max.is_finite()) {
            return Err(invalid("tau-max", "must be positive"));
        }
        if !(self.delta_tau > 0.0 && self.delta_tau.is_finite()) {
            return Err(invalid("tau-step", "must be positive"));
        }
        if self.length == 0 {
            return Err(invalid("tau-count", "must be at least 1"));
        }
        if self.max_inner_iters == 0 {
            return Err(invalid("maxiter", "must be at least 1"));
        }
        if self.rel_tol.is_nan() || self.rel_tol <= 0.0 {
            return Err(invalid("eps", "must be positive"));
        }
        if self.candidate(self.length - 1) <= 0.0 {
            return Err(invalid(
                "tau-count",
                format!(
                    "smallest candidate {} is not positive",
                    self.candidate(self.length - 1)
                ),
            ));
        }
        Ok(())
    }

    /// Candidate with zero-based index `i`: `τ_max − i·Δτ`.
    pub fn candidate(&self, i: usize) -> f64 {
        self.tau_max - i as f64 * self.delta_tau
    }

    pub fn candidates(&self) -> Vec<f64> {
        (0..self.length).map(|i| self.candidate(i)).collect()
    }
}

/// Selected τ with its converged noise level and estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct TunedSolution {
    pub tau_star: f64,
    pub sigma_star: f64,
    pub x_star: Vec<f64>,
}

/// How one τ candidate ended.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CandidateSummary {
    pub tau: f64,
    pub sigma: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Full record of a tuning run.
#[derive(Debug, Clone)]
pub struct Tuning<S> {
    pub tuned: TunedSolution,
    /// Zero-based index of the selected candidate.
    pub selected: usize,
    pub candidates: Vec<CandidateSummary>,
    pub selected_state: S,
}

impl<S> Tuning<S> {
    /// Whether the inner loop of the selected candidate met the σ criterion.
    pub fn converged(&self) -> bool {
        self.candidates[self.selected].converged
    }
}

/// Walk the candidates in descending order, warm-starting each from the
/// previous result, and stop at the first σ increase (returning the candidate
/// before it). σ of the virtual candidate before the first is +∞.
pub fn tune<I: AmpIteration>(
    iteration: &mut I,
    schedule: &TuningSchedule,
    init: I::State,
) -> Result<Tuning<I::State>> {
    schedule.validate()?;
    let mut state = init;
    let mut best: Option<(usize, I::State)> = None;
    let mut previous_sigma = f64::INFINITY;
    let mut candidates = Vec::with_capacity(schedule.length);

    for (i, tau) in schedule.candidates().into_iter().enumerate() {
        let outcome = iterate_fixed_tau(
            iteration,
            state,
            tau,
            schedule.max_inner_iters,
            schedule.rel_tol,
        )?;
        let sigma = I::sigma(&outcome.state);
        candidates.push(CandidateSummary {
            tau,
            sigma,
            iterations: outcome.iterations,
            converged: outcome.converged,
        });
        if sigma > previous_sigma {
            break;
        }
        previous_sigma = sigma;
        best = Some((i, outcome.state.clone()));
        state = outcome.state;
    }

    let (selected, selected_state) = best.ok_or_else(|| {
        // The first candidate always compares against +∞.
        invalid("schedule", "first candidate produced a NaN noise level")
    })?;
    let tuned = TunedSolution {
        tau_star: schedule.candidate(selected),
        sigma_star: I::sigma(&selected_state),
        x_star: I::estimate(&selected_state).to_vec(),
    };
    Ok(Tuning {
        tuned,
        selected,
        candidates,
        selected_state,
    })
}

/// Centralized τ tuning starting from `x_0 = 0, z_0 = y`.
pub fn tune_tau(schedule: &TuningSchedule, a: &Matrix, y: &[f64]) -> Result<TunedSolution> {
    let partition = Partition::single(a.rows());
    let mut amp = CentralizedAmp::new(a, y, &partition)?;
    let init = amp.initial_state()?;
    Ok(tune(&mut amp, schedule, init)?.tuned)
}

/// Upper `α/2` standard normal quantile `z_{α/2}`, the largest useful τ for a
/// two-sided `1 − α` confidence interval.
pub fn tau_max_from_alpha(alpha: f64) -> Result<f64> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::InvalidParameter {
            name: "alpha",
            reason: format!("{alpha} is outside (0, 1)"),
        });
    }
    Ok(-normal_quantile(0.5 * alpha))
}
