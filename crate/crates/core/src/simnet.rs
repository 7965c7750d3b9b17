//! In-process sensor network with synchronous, loss-free, in-order delivery.
//!
//! Every transmission is counted in a [`MessageLedger`] under the protocol
//! phase that produced it. A broadcast is one message no matter how many
//! nodes receive it.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::io::Write;

use crate::error::{Error, Result};

/// 1-based sensor identifier. Node 1 is the aggregator in every protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct NodeId(usize);

impl NodeId {
    pub const AGGREGATOR: NodeId = NodeId(1);

    pub const fn new(id: usize) -> Self {
        Self(id)
    }

    pub const fn get(self) -> usize {
        self.0
    }

    /// Zero-based position, handy for indexing per-sensor vectors.
    pub const fn index(self) -> usize {
        self.0 - 1
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Protocol phase a message belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Phase {
    /// GCAMP step I: sensors report entries above the per-sensor threshold.
    GcampReport,
    /// GCAMP step II: aggregator requests indices whose bound exceeds β.
    GcampRequest,
    /// GCAMP step III: sensors fill in the requested entries.
    GcampFill,
    /// Modified TA global summations.
    TaSummation,
    /// Naive baseline: everything goes to the aggregator.
    NaiveGather,
    /// Aggregator shares the nonzero entries of the new estimate.
    NonzeroBroadcast,
    /// Sensors report their residual energy.
    SigmaReport,
    /// Aggregator shares the updated noise level.
    ThresholdBroadcast,
}

impl Phase {
    pub const ALL: [Phase; 8] = [
        Phase::GcampReport,
        Phase::GcampRequest,
        Phase::GcampFill,
        Phase::TaSummation,
        Phase::NaiveGather,
        Phase::NonzeroBroadcast,
        Phase::SigmaReport,
        Phase::ThresholdBroadcast,
    ];

    /// Whether the phase is part of computing the next estimate (and so
    /// counts toward the normalized message number).
    pub fn computes_estimate(self) -> bool {
        matches!(
            self,
            Phase::GcampReport
                | Phase::GcampRequest
                | Phase::GcampFill
                | Phase::TaSummation
                | Phase::NaiveGather
        )
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Phase::GcampReport => "gcamp_report",
            Phase::GcampRequest => "gcamp_request",
            Phase::GcampFill => "gcamp_fill",
            Phase::TaSummation => "ta_summation",
            Phase::NaiveGather => "naive_gather",
            Phase::NonzeroBroadcast => "nonzero_broadcast",
            Phase::SigmaReport => "sigma_report",
            Phase::ThresholdBroadcast => "threshold_broadcast",
        }
    }
}

/// What a message carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Kind {
    Pair,
    IndexBroadcast,
    Scalar,
    NonzeroBroadcast,
}

impl Kind {
    pub fn as_str(self) -> &'static str {
        match self {
            Kind::Pair => "pair",
            Kind::IndexBroadcast => "index_broadcast",
            Kind::Scalar => "scalar",
            Kind::NonzeroBroadcast => "nonzero_broadcast",
        }
    }
}

/// Message contents.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Payload {
    /// `(n, w(n))`.
    Pair {
        index: usize,
        value: f64,
    },
    /// A bare index request.
    Index(usize),
    /// An index announced together with the sender's value there.
    Query {
        index: usize,
        value: f64,
    },
    Scalar(f64),
    /// One nonzero entry of the estimate.
    Nonzero {
        index: usize,
        value: f64,
    },
}

impl Payload {
    pub fn kind(&self) -> Kind {
        match self {
            Payload::Pair { .. } => Kind::Pair,
            Payload::Index(_) | Payload::Query { .. } => Kind::IndexBroadcast,
            Payload::Scalar(_) => Kind::Scalar,
            Payload::Nonzero { .. } => Kind::NonzeroBroadcast,
        }
    }

    /// Wire size: 8 bytes per index and per value.
    pub fn bytes(&self) -> u64 {
        match self {
            Payload::Index(_) | Payload::Scalar(_) => 8,
            _ => 16,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Envelope {
    pub from: NodeId,
    pub payload: Payload,
}

/// Which phases to include in a ledger total.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhaseFilter {
    All,
    /// Phases that compute the next estimate.
    Estimate,
    /// Everything else (nonzero broadcast, σ aggregation).
    Coordination,
    Only(Phase),
}

impl PhaseFilter {
    fn admits(self, phase: Phase) -> bool {
        match self {
            PhaseFilter::All => true,
            PhaseFilter::Estimate => phase.computes_estimate(),
            PhaseFilter::Coordination => !phase.computes_estimate(),
            PhaseFilter::Only(p) => p == phase,
        }
    }
}

/// Message and byte counts keyed by `(phase, kind)`.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct MessageLedger {
    counts: BTreeMap<(Phase, Kind), u64>,
    bytes: BTreeMap<(Phase, Kind), u64>,
}

impl MessageLedger {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, phase: Phase, payload: &Payload) {
        let key = (phase, payload.kind());
        *self.counts.entry(key).or_default() += 1;
        *self.bytes.entry(key).or_default() += payload.bytes();
    }

    pub fn count(&self, phase: Phase, kind: Kind) -> u64 {
        self.counts.get(&(phase, kind)).copied().unwrap_or(0)
    }

    /// Messages of `kind` across all phases.
    pub fn count_kind(&self, kind: Kind) -> u64 {
        self.counts
            .iter()
            .filter(|((_, k), _)| *k == kind)
            .map(|(_, c)| c)
            .sum()
    }

    pub fn total(&self, filter: PhaseFilter) -> u64 {
        self.counts
            .iter()
            .filter(|((phase, _), _)| filter.admits(*phase))
            .map(|(_, c)| c)
            .sum()
    }

    pub fn total_bytes(&self, filter: PhaseFilter) -> u64 {
        self.bytes
            .iter()
            .filter(|((phase, _), _)| filter.admits(*phase))
            .map(|(_, c)| c)
            .sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Phase, Kind, u64)> + '_ {
        self.counts.iter().map(|(&(p, k), &c)| (p, k, c))
    }

    /// Counts accumulated since `earlier`, a snapshot of this ledger.
    pub fn since(&self, earlier: &MessageLedger) -> MessageLedger {
        let diff = |now: &BTreeMap<(Phase, Kind), u64>, then: &BTreeMap<(Phase, Kind), u64>| {
            now.iter()
                .filter_map(|(k, c)| {
                    let d = c - then.get(k).copied().unwrap_or(0);
                    (d > 0).then_some((*k, d))
                })
                .collect()
        };
        MessageLedger {
            counts: diff(&self.counts, &earlier.counts),
            bytes: diff(&self.bytes, &earlier.bytes),
        }
    }

    pub fn merge(&mut self, other: &MessageLedger) {
        for (k, c) in &other.counts {
            *self.counts.entry(*k).or_default() += c;
        }
        for (k, c) in &other.bytes {
            *self.bytes.entry(*k).or_default() += c;
        }
    }

    /// CSV rows `phase,kind,count` with a header.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "phase,kind,count")?;
        for (phase, kind, count) in self.iter() {
            writeln!(out, "{},{},{}", phase.as_str(), kind.as_str(), count)?;
        }
        Ok(())
    }
}

/// Sum of the counters matching `filter`.
pub fn ledger_total(ledger: &MessageLedger, filter: PhaseFilter) -> u64 {
    ledger.total(filter)
}

/// A star/broadcast network of `P` nodes with per-node inboxes.
#[derive(Debug, Clone)]
pub struct Network {
    inboxes: Vec<VecDeque<Envelope>>,
    phase: Phase,
    ledger: MessageLedger,
}

impl Network {
    pub fn new(nodes: usize) -> Self {
        Self {
            inboxes: vec![VecDeque::new(); nodes],
            phase: Phase::NaiveGather,
            ledger: MessageLedger::new(),
        }
    }

    pub fn nodes(&self) -> usize {
        self.inboxes.len()
    }

    pub fn node_ids(&self) -> impl Iterator<Item = NodeId> {
        (1..=self.nodes()).map(NodeId::new)
    }

    /// Tag subsequent traffic with `phase`.
    pub fn set_phase(&mut self, phase: Phase) {
        self.phase = phase;
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn ledger(&self) -> &MessageLedger {
        &self.ledger
    }

    pub fn take_ledger(&mut self) -> MessageLedger {
        std::mem::take(&mut self.ledger)
    }

    fn check(&self, id: NodeId) -> Result<()> {
        if id.0 == 0 || id.0 > self.nodes() {
            Err(Error::UnknownNode {
                id: id.0,
                nodes: self.nodes(),
            })
        } else {
            Ok(())
        }
    }

    /// Point-to-point send.
    pub fn send(&mut self, from: NodeId, to: NodeId, payload: Payload) -> Result<()> {
        self.check(from)?;
        self.check(to)?;
        if from == to {
            return Err(Error::SelfSend(from.0));
        }
        self.ledger.record(self.phase, &payload);
        self.inboxes[to.index()].push_back(Envelope { from, payload });
        Ok(())
    }

    /// Deliver `payload` to every other node; ledgered as one message.
    pub fn broadcast(&mut self, from: NodeId, payload: Payload) -> Result<()> {
        self.check(from)?;
        if self.nodes() < 2 {
            return Ok(());
        }
        self.ledger.record(self.phase, &payload);
        for (i, inbox) in self.inboxes.iter_mut().enumerate() {
            if i != from.index() {
                inbox.push_back(Envelope { from, payload });
            }
        }
        Ok(())
    }

    pub fn send_pair(&mut self, from: NodeId, to: NodeId, index: usize, value: f64) -> Result<()> {
        self.send(from, to, Payload::Pair { index, value })
    }

    pub fn broadcast_index(&mut self, from: NodeId, index: usize) -> Result<()> {
        self.broadcast(from, Payload::Index(index))
    }

    /// Drain everything delivered to `node`, in arrival order.
    pub fn receive(&mut self, node: NodeId) -> Result<Vec<Envelope>> {
        self.check(node)?;
        Ok(self.inboxes[node.index()].drain(..).collect())
    }

    /// Pop the oldest message delivered to `node`.
    pub fn next_message(&mut self, node: NodeId) -> Option<Envelope> {
        self.inboxes.get_mut(node.index())?.pop_front()
    }

    pub fn pending(&self, node: NodeId) -> usize {
        self.inboxes.get(node.index()).map_or(0, VecDeque::len)
    }
}
