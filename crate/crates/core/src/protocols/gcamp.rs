//! GCAMP: prune transmissions with a per-sensor threshold and an upper bound
//! on each column sum.
//!
//! 1. Every sensor `p ≥ 2` reports the entries with `|w^p(n)| > T`, where
//!    `T = βθ/(P−1)`.
//! 2. The aggregator bounds each column sum by
//!    `U(n) = |w¹(n) + Σ_{p∈S_n} w^p(n)| + (P−1−m_n)·T` and requests the
//!    indices with `U(n) > β` that still have unreported entries.
//! 3. Sensors send the requested entries they did not report in step 1.
//! 4. The aggregator thresholds the full column sums for `U(n) > β`; every
//!    other index is provably zero.

use crate::amp::soft_threshold;
use crate::error::{invalid, Result};
use crate::simnet::{Network, NodeId, Payload, Phase};

use super::{validate_inputs, ProtocolOutput};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GcampParams {
    pub theta: f64,
    pub beta: f64,
}

impl GcampParams {
    pub fn new(theta: f64, beta: f64) -> Result<Self> {
        if !(theta > 0.0 && theta < 1.0) {
            return Err(invalid("theta", format!("{theta} is outside (0, 1)")));
        }
        if !(beta >= 0.0 && beta.is_finite()) {
            return Err(invalid(
                "beta",
                format!("{beta} is not a finite nonnegative threshold"),
            ));
        }
        Ok(Self { theta, beta })
    }

    /// Per-sensor reporting threshold `T = βθ/(P−1)`.
    pub fn threshold(&self, sensors: usize) -> f64 {
        self.beta * self.theta / (sensors - 1) as f64
    }
}

/// Sets computed during one GCAMP round.
#[derive(Debug, Clone, PartialEq)]
pub struct GcampTrace {
    pub sensors: usize,
    pub threshold: f64,
    pub beta: f64,
    /// `R_p` in ascending index order, indexed by `p − 1`; `r_sets[0]` is
    /// always empty because the aggregator reports nothing.
    pub r_sets: Vec<Vec<usize>>,
    pub upper_bounds: Vec<f64>,
    /// Requested indices: `U(n) > β` and `m_n < P − 1`.
    pub f: Vec<usize>,
    /// Indices whose sum is evaluated: `U(n) > β`.
    pub v: Vec<usize>,
    /// `m_n = |S_n|`.
    pub m: Vec<usize>,
}

impl GcampTrace {
    /// Sensors `p ≥ 2` with `n ∈ R_p`.
    pub fn s_n(&self, n: usize) -> Vec<NodeId> {
        self.r_sets
            .iter()
            .enumerate()
            .skip(1)
            .filter(|(_, r)| r.binary_search(&n).is_ok())
            .map(|(p, _)| NodeId::new(p + 1))
            .collect()
    }

    /// `Σ_p |R_p| + |F| + Σ_p |F \ R_p|`.
    pub fn message_formula(&self) -> u64 {
        let reported: usize = self.r_sets.iter().map(Vec::len).sum();
        let filled: usize = self
            .r_sets
            .iter()
            .skip(1)
            .map(|r| {
                self.f
                    .iter()
                    .filter(|n| r.binary_search(n).is_err())
                    .count()
            })
            .sum();
        (reported + self.f.len() + filled) as u64
    }
}

/// Run GCAMP over `net`. Needs at least two sensors.
pub fn gcamp<W: AsRef<[f64]>>(
    w: &[W],
    params: &GcampParams,
    net: &mut Network,
) -> Result<ProtocolOutput<GcampTrace>> {
    let n_len = validate_inputs(w, params.beta, net, 2)?;
    let sensors = w.len();
    let beta = params.beta;
    let t = params.threshold(sensors);
    let agg = NodeId::AGGREGATOR;
    let mark = net.ledger().clone();

    // Step I
    net.set_phase(Phase::GcampReport);
    let mut r_sets = vec![Vec::new(); sensors];
    for p in 1..sensors {
        let wp = w[p].as_ref();
        for (n, &value) in wp.iter().enumerate() {
            if value.abs() > t {
                r_sets[p].push(n);
                net.send_pair(NodeId::new(p + 1), agg, n, value)?;
            }
        }
    }

    // Aggregator's view of remote entries, row `p − 2` for sensor `p`.
    let mut table: Vec<Option<f64>> = vec![None; (sensors - 1) * n_len];
    let absorb = |net: &mut Network, table: &mut [Option<f64>]| {
        while let Some(env) = net.next_message(agg) {
            if let Payload::Pair { index, value } = env.payload {
                table[(env.from.index() - 1) * n_len + index] = Some(value);
            }
        }
    };
    absorb(net, &mut table);

    // Step II
    net.set_phase(Phase::GcampRequest);
    let w1 = w[0].as_ref();
    let mut upper_bounds = Vec::with_capacity(n_len);
    let mut m = Vec::with_capacity(n_len);
    let mut f = Vec::new();
    let mut v = Vec::new();
    for n in 0..n_len {
        let mut partial = w1[n];
        let mut m_n = 0;
        for p in 0..sensors - 1 {
            if let Some(value) = table[p * n_len + n] {
                partial += value;
                m_n += 1;
            }
        }
        let u = partial.abs() + (sensors - 1 - m_n) as f64 * t;
        if u > beta {
            v.push(n);
            if m_n < sensors - 1 {
                f.push(n);
                net.broadcast_index(agg, n)?;
            }
        }
        upper_bounds.push(u);
        m.push(m_n);
    }

    // Step III
    net.set_phase(Phase::GcampFill);
    for (p, wp) in w.iter().enumerate().skip(1) {
        let me = NodeId::new(p + 1);
        let wp = wp.as_ref();
        while let Some(env) = net.next_message(me) {
            if let Payload::Index(n) = env.payload {
                if wp[n].abs() <= t {
                    net.send_pair(me, agg, n, wp[n])?;
                }
            }
        }
    }
    absorb(net, &mut table);

    // Step IV
    let mut x_next = vec![0.0; n_len];
    for &n in &v {
        let mut sum = w1[n];
        for p in 0..sensors - 1 {
            sum += table[p * n_len + n].expect("every entry of a bounded index has been reported");
        }
        x_next[n] = soft_threshold(sum, beta);
    }

    let ledger = net.ledger().since(&mark);
    Ok(ProtocolOutput {
        x_next,
        ledger,
        trace: GcampTrace {
            sensors,
            threshold: t,
            beta,
            r_sets,
            upper_bounds,
            f,
            v,
            m,
        },
    })
}

/// Recompute `U(n)` from the sensors' own data and the reporting sets in
/// `trace`.
pub fn gcamp_upper_bound<W: AsRef<[f64]>>(n: usize, w: &[W], trace: &GcampTrace) -> f64 {
    let senders = trace.s_n(n);
    let partial = senders
        .iter()
        .fold(w[0].as_ref()[n], |acc, p| acc + w[p.index()].as_ref()[n]);
    partial.abs() + (trace.sensors - 1 - senders.len()) as f64 * trace.threshold
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::simnet::PhaseFilter;

    #[test]
    fn per_sensor_threshold() {
        let params = GcampParams::new(0.8, 20.0).unwrap();
        assert_eq!(params.threshold(3), 8.0);
        assert!(GcampParams::new(1.0, 1.0).is_err());
        assert!(GcampParams::new(0.5, -1.0).is_err());
    }

    #[test]
    fn all_zero_contributions_cost_nothing() {
        let w = vec![vec![0.0; 6]; 4];
        let mut net = Network::new(4);
        let out = gcamp(&w, &GcampParams::new(0.8, 1.0).unwrap(), &mut net).unwrap();
        assert_eq!(out.x_next, vec![0.0; 6]);
        assert_eq!(out.ledger.total(PhaseFilter::All), 0);
        assert!(out.trace.v.is_empty());
    }

    #[test]
    fn single_sensor_is_rejected() {
        let w = vec![vec![1.0; 3]];
        let mut net = Network::new(1);
        assert!(matches!(
            gcamp(&w, &GcampParams::new(0.8, 1.0).unwrap(), &mut net),
            Err(Error::TooFewSensors(1))
        ));
    }

    #[test]
    fn bound_is_tight_when_everyone_reported() {
        let w = vec![vec![1.0, 0.1], vec![5.0, 0.1], vec![-7.0, 0.2]];
        let mut net = Network::new(3);
        let params = GcampParams::new(0.5, 4.0).unwrap();
        let out = gcamp(&w, &params, &mut net).unwrap();
        // T = 1; index 0 reported by both remote sensors.
        assert_eq!(out.trace.m[0], 2);
        assert_eq!(out.trace.upper_bounds[0], (1.0f64 + 5.0 - 7.0).abs());
        // Index 1 reported by nobody: |w¹| + 2T.
        assert_eq!(out.trace.m[1], 0);
        assert_eq!(out.trace.upper_bounds[1], 0.1 + 2.0);
        for n in 0..2 {
            assert_eq!(
                gcamp_upper_bound(n, &w, &out.trace),
                out.trace.upper_bounds[n]
            );
        }
    }

    #[test]
    fn ties_at_threshold_stay_unreported() {
        let w = vec![vec![0.0], vec![8.0], vec![8.0]];
        let mut net = Network::new(3);
        let out = gcamp(&w, &GcampParams::new(0.8, 20.0).unwrap(), &mut net).unwrap();
        assert!(out.trace.r_sets.iter().all(Vec::is_empty));
        // U = 0 + 2·8 = 16 ≤ 20, so nothing is requested.
        assert_eq!(out.trace.upper_bounds[0], 16.0);
        assert_eq!(out.ledger.total(PhaseFilter::All), 0);
    }
}
