use crate::amp::soft_threshold;
use crate::error::Result;
use crate::simnet::{Network, NodeId, Payload, Phase};

use super::{validate_inputs, ProtocolOutput};

/// Every sensor `p ≥ 2` ships its whole contribution to the aggregator.
pub fn naive_gather<W: AsRef<[f64]>>(
    w: &[W],
    beta: f64,
    net: &mut Network,
) -> Result<ProtocolOutput<()>> {
    let n_len = validate_inputs(w, beta, net, 1)?;
    let sensors = w.len();
    let agg = NodeId::AGGREGATOR;
    let mark = net.ledger().clone();
    net.set_phase(Phase::NaiveGather);

    for (p, wp) in w.iter().enumerate().skip(1) {
        for (n, &value) in wp.as_ref().iter().enumerate() {
            net.send_pair(NodeId::new(p + 1), agg, n, value)?;
        }
    }
    let mut sums = w[0].as_ref().to_vec();
    let mut remote = vec![0.0; (sensors - 1) * n_len];
    while let Some(env) = net.next_message(agg) {
        if let Payload::Pair { index, value } = env.payload {
            remote[(env.from.index() - 1) * n_len + index] = value;
        }
    }
    for row in remote.chunks_exact(n_len) {
        for (s, v) in sums.iter_mut().zip(row) {
            *s += v;
        }
    }
    let x_next = sums.into_iter().map(|s| soft_threshold(s, beta)).collect();
    Ok(ProtocolOutput {
        x_next,
        ledger: net.ledger().since(&mark),
        trace: (),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simnet::PhaseFilter;

    #[test]
    fn costs_n_times_p_minus_one() {
        let w = vec![vec![0.25; 50]; 10];
        let mut net = Network::new(10);
        let out = naive_gather(&w, 1.0, &mut net).unwrap();
        assert_eq!(out.ledger.total(PhaseFilter::All), 450);
        assert!(out.x_next.iter().all(|v| (*v - 1.5).abs() < 1e-12));
    }

    #[test]
    fn single_sensor_thresholds_locally() {
        let w = vec![vec![3.0, -0.5]];
        let mut net = Network::new(1);
        let out = naive_gather(&w, 1.0, &mut net).unwrap();
        assert_eq!(out.ledger.total(PhaseFilter::All), 0);
        assert_eq!(out.x_next, vec![2.0, 0.0]);
    }
}
