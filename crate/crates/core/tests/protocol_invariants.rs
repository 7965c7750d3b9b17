//! Exactness and message-count properties of the global computation
//! protocols, checked against direct recomputation.

use damp_core::damp::centralized_threshold;
use damp_core::protocols::gcamp_upper_bound;
use damp_core::simnet::Kind;
use damp_core::{gcamp, modified_ta, naive_gather, GcampParams, Network, Phase, PhaseFilter};
use proptest::prelude::*;

mod common;
use common::{bits, column_sum, gcamp_oracle, oracle_estimate, worked_example};

fn contributions() -> impl Strategy<Value = (Vec<Vec<f64>>, f64, f64)> {
    (2usize..=8, 1usize..=100).prop_flat_map(|(p, n)| {
        // Values on a coarse grid half the time so ties and exact threshold
        // hits actually occur.
        let value = prop_oneof![-10.0f64..10.0, (-40i32..=40).prop_map(|k| k as f64 * 0.25)];
        (
            prop::collection::vec(prop::collection::vec(value, n), p),
            prop_oneof![0.05f64..25.0, (1i32..=40).prop_map(|k| k as f64 * 0.5)],
            prop_oneof![Just(0.8f64), 0.05f64..0.99],
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn gcamp_matches_centralized((w, beta, theta) in contributions()) {
        let p = w.len();
        let mut net = Network::new(p);
        let out = gcamp(&w, &GcampParams::new(theta, beta).unwrap(), &mut net).unwrap();
        let expected = oracle_estimate(&w, beta);
        prop_assert_eq!(bits(&out.x_next), bits(&expected));
        prop_assert_eq!(bits(&out.x_next), bits(&centralized_threshold(&w, beta)));

        let oracle = gcamp_oracle(&w, theta, beta);
        prop_assert_eq!(&out.trace.r_sets, &oracle.r_sets);
        prop_assert_eq!(&out.trace.f, &oracle.f);
        prop_assert_eq!(&out.trace.v, &oracle.v);
        prop_assert_eq!(bits(&out.trace.upper_bounds), bits(&oracle.upper));
        prop_assert_eq!(out.ledger.total(PhaseFilter::All), oracle.messages);
        prop_assert_eq!(out.trace.message_formula(), oracle.messages);
        prop_assert_eq!(out.ledger.count(Phase::GcampRequest, Kind::IndexBroadcast), oracle.f.len() as u64);

        for n in 0..w[0].len() {
            let exact = column_sum(&w, n).abs();
            prop_assert!(oracle.upper[n] >= exact, "U({}) = {} < {}", n, oracle.upper[n], exact);
            prop_assert_eq!(gcamp_upper_bound(n, &w, &out.trace).to_bits(), oracle.upper[n].to_bits());
            if exact > beta {
                prop_assert!(oracle.v.contains(&n));
            }
        }
    }

    #[test]
    fn modified_ta_matches_centralized((w, beta, _theta) in contributions()) {
        let p = w.len();
        let n_len = w[0].len();
        let mut net = Network::new(p);
        let out = modified_ta(&w, beta, &mut net).unwrap();
        prop_assert_eq!(bits(&out.x_next), bits(&oracle_estimate(&w, beta)));

        let n_s = out.trace.summations;
        prop_assert_eq!(out.ledger.total(PhaseFilter::All), (p * n_s) as u64);
        prop_assert_eq!(out.ledger.count_kind(Kind::IndexBroadcast), n_s as u64);
        prop_assert!(n_s <= n_len);
        prop_assert!(n_s >= p.min(n_len));
        let mut seen = out.trace.visit_order.clone();
        seen.sort_unstable();
        seen.dedup();
        prop_assert_eq!(seen.len(), n_s);

        for n in 0..n_len {
            if column_sum(&w, n).abs() > beta {
                prop_assert!(out.trace.sent[n], "index {} with |sum| > beta never visited", n);
            }
        }
        if n_s < n_len {
            let bound: f64 = out.trace.frontier.iter().map(|u| u.abs()).sum();
            prop_assert!(bound <= beta);
            for n in (0..n_len).filter(|&n| !out.trace.sent[n]) {
                let total: f64 = w.iter().map(|wp| wp[n].abs()).sum();
                prop_assert!(total <= bound + 1e-12 * bound.max(1.0));
            }
        }
    }

    #[test]
    fn naive_matches_gcamp((w, beta, theta) in contributions()) {
        let p = w.len();
        let n_len = w[0].len();
        let mut net = Network::new(p);
        let naive = naive_gather(&w, beta, &mut net).unwrap();
        prop_assert_eq!(naive.ledger.total(PhaseFilter::All), (n_len * (p - 1)) as u64);
        let mut net = Network::new(p);
        let g = gcamp(&w, &GcampParams::new(theta, beta).unwrap(), &mut net).unwrap();
        prop_assert_eq!(bits(&naive.x_next), bits(&g.x_next));
    }
}

#[test]
fn naive_cost_at_full_scale() {
    let w = vec![vec![0.1; 5000]; 10];
    let mut net = Network::new(10);
    let out = naive_gather(&w, 1.0, &mut net).unwrap();
    assert_eq!(out.ledger.total(PhaseFilter::All), 45_000);
}

#[test]
fn worked_example_gcamp_beats_ta() {
    let w = worked_example();
    let params = GcampParams::new(0.8, 20.0).unwrap();
    assert_eq!(params.threshold(3), 8.0);

    let mut net = Network::new(3);
    let g = gcamp(&w, &params, &mut net).unwrap();
    assert_eq!(g.trace.r_sets, vec![vec![], vec![0, 2, 5], vec![1, 6]]);
    assert_eq!(g.trace.f, vec![3, 5, 6]);
    assert_eq!(g.trace.v, vec![3, 5, 6]);
    assert_eq!(g.ledger.total(PhaseFilter::All), 12);
    assert_eq!(g.ledger.count(Phase::GcampFill, Kind::Pair), 4);

    let mut net = Network::new(3);
    let t = modified_ta(&w, 20.0, &mut net).unwrap();
    assert_eq!(t.trace.summations, 9);
    assert_eq!(t.ledger.total(PhaseFilter::All), 27);

    let mut expected = vec![0.0; 10];
    expected[3] = 6.0;
    expected[6] = 6.0;
    assert_eq!(g.x_next, expected);
    assert_eq!(t.x_next, expected);
}
