//! Modified threshold algorithm.
//!
//! Sensors take turns (1, 2, …, P, 1, …). On its turn a sensor announces its
//! largest-magnitude entry not yet summed, every other sensor replies with its
//! value at that index, and the full column sum is thresholded. After each
//! summation the protocol stops once every sensor has had a turn and the sum
//! of the latest announced magnitudes is at most β, since that sum bounds every
//! column not yet visited.

use crate::amp::soft_threshold;
use crate::error::Result;
use crate::simnet::{Network, NodeId, Payload, Phase};

use super::{validate_inputs, ProtocolOutput};

#[derive(Debug, Clone, PartialEq)]
pub struct TaTrace {
    /// Per sensor, indices by descending `|w^p(n)|`, ties by ascending index.
    pub sorted_views: Vec<Vec<usize>>,
    /// Latest announced value `u_p` of each sensor.
    pub frontier: Vec<f64>,
    /// Number of global summations `N_s`.
    pub summations: usize,
    /// Indices whose column sum was evaluated.
    pub sent: Vec<bool>,
    /// Visited indices in summation order.
    pub visit_order: Vec<usize>,
}

fn descending_magnitude(w: &[f64]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..w.len()).collect();
    order.sort_unstable_by(|&a, &b| w[b].abs().total_cmp(&w[a].abs()).then(a.cmp(&b)));
    order
}

/// Run Modified TA over `net`. Needs at least two sensors.
pub fn modified_ta<W: AsRef<[f64]>>(
    w: &[W],
    beta: f64,
    net: &mut Network,
) -> Result<ProtocolOutput<TaTrace>> {
    let n_len = validate_inputs(w, beta, net, 2)?;
    let sensors = w.len();
    let mark = net.ledger().clone();
    net.set_phase(Phase::TaSummation);

    let sorted_views: Vec<Vec<usize>> = w
        .iter()
        .map(|wp| descending_magnitude(wp.as_ref()))
        .collect();
    // Each sensor's own "sent" marks, updated only from what it hears.
    let mut marks = vec![vec![false; n_len]; sensors];
    let mut cursor = vec![0usize; sensors];
    let mut frontier = vec![f64::INFINITY; sensors];
    let mut column = vec![0.0; sensors];
    let mut x_next = vec![0.0; n_len];
    let mut visit_order = Vec::new();
    let mut summations = 0;

    'rounds: loop {
        for p in 0..sensors {
            let me = NodeId::new(p + 1);
            let view = &sorted_views[p];
            while marks[p][view[cursor[p]]] {
                cursor[p] += 1;
            }
            let n = view[cursor[p]];
            let u = w[p].as_ref()[n];
            frontier[p] = u;
            marks[p][n] = true;
            net.broadcast(me, Payload::Query { index: n, value: u })?;

            for q in (0..sensors).filter(|&q| q != p) {
                let peer = NodeId::new(q + 1);
                while let Some(env) = net.next_message(peer) {
                    if let Payload::Query { index, .. } = env.payload {
                        marks[q][index] = true;
                        net.send_pair(peer, env.from, index, w[q].as_ref()[index])?;
                    }
                }
            }

            column[p] = u;
            while let Some(env) = net.next_message(me) {
                if let Payload::Pair { value, .. } = env.payload {
                    column[env.from.index()] = value;
                }
            }
            let sum = column[1..].iter().fold(column[0], |acc, v| acc + v);
            x_next[n] = soft_threshold(sum, beta);
            visit_order.push(n);
            summations += 1;

            let bound = frontier.iter().fold(0.0, |acc, u| acc + u.abs());
            if (summations >= sensors && bound <= beta) || summations >= n_len {
                break 'rounds;
            }
        }
    }

    let mut sent = vec![false; n_len];
    for &n in &visit_order {
        sent[n] = true;
    }
    let ledger = net.ledger().since(&mark);
    Ok(ProtocolOutput {
        x_next,
        ledger,
        trace: TaTrace {
            sorted_views,
            frontier,
            summations,
            sent,
            visit_order,
        },
    })
}
