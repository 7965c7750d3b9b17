//! Global computation of `x_{t+1} = η(Σ_p w^p; β)` over the simulated network.
//!
//! All three protocols produce the same estimate as thresholding the column
//! sums directly; they differ only in how many messages they spend. Column
//! sums are always taken over sensors in ascending order, so "the same" means
//! bit-identical.

mod gcamp;
mod naive;
mod ta;

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use crate::error::{check_len, invalid, Error, Result};
use crate::simnet::{MessageLedger, Network, PhaseFilter};

pub use gcamp::{gcamp, gcamp_upper_bound, GcampParams, GcampTrace};
pub use naive::naive_gather;
pub use ta::{modified_ta, TaTrace};

/// Estimate produced by a protocol, the messages it used, and its internal
/// bookkeeping for auditing.
#[derive(Debug, Clone)]
pub struct ProtocolOutput<T> {
    pub x_next: Vec<f64>,
    pub ledger: MessageLedger,
    pub trace: T,
}

#[derive(Debug, Clone)]
pub enum Trace {
    Gcamp(GcampTrace),
    ModifiedTa(TaTrace),
    Naive,
}

/// Compact per-run diagnostics.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TraceSummary {
    /// `|R_p|` for sensors `2..=P` (GCAMP only).
    pub r_sizes: Vec<usize>,
    pub f: Option<usize>,
    pub v: Option<usize>,
    pub n_s: Option<usize>,
}

impl Trace {
    pub fn summary(&self) -> TraceSummary {
        match self {
            Trace::Gcamp(t) => TraceSummary {
                r_sizes: t.r_sets.iter().skip(1).map(Vec::len).collect(),
                f: Some(t.f.len()),
                v: Some(t.v.len()),
                n_s: None,
            },
            Trace::ModifiedTa(t) => TraceSummary {
                n_s: Some(t.summations),
                ..TraceSummary::default()
            },
            Trace::Naive => TraceSummary::default(),
        }
    }
}

impl TraceSummary {
    /// One CSV line matching [`TraceSummary::CSV_HEADER`], `r_sizes` joined by `;`.
    pub fn csv_fields(&self) -> String {
        let opt = |v: Option<usize>| v.map(|v| v.to_string()).unwrap_or_default();
        let r: Vec<String> = self.r_sizes.iter().map(usize::to_string).collect();
        format!(
            "{},{},{},{}",
            r.join(";"),
            opt(self.f),
            opt(self.v),
            opt(self.n_s)
        )
    }

    pub const CSV_HEADER: &'static str = "r_sizes,f,v,n_s";

    pub fn write_csv<'a, W: Write>(
        mut out: W,
        rows: impl IntoIterator<Item = &'a TraceSummary>,
    ) -> Result<()> {
        writeln!(out, "{}", Self::CSV_HEADER)?;
        for row in rows {
            writeln!(out, "{}", row.csv_fields())?;
        }
        Ok(())
    }
}

/// Which global computation to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum ProtocolKind {
    Gcamp,
    ModifiedTa,
    Naive,
}

impl ProtocolKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ProtocolKind::Gcamp => "gcamp",
            ProtocolKind::ModifiedTa => "ta",
            ProtocolKind::Naive => "naive",
        }
    }

    /// Instantiate the protocol; `theta` only matters for GCAMP.
    pub fn build(self, theta: f64) -> Box<dyn GlobalComputation + Send + Sync> {
        match self {
            ProtocolKind::Gcamp => Box::new(Gcamp { theta }),
            ProtocolKind::ModifiedTa => Box::new(ModifiedTa),
            ProtocolKind::Naive => Box::new(NaiveGather),
        }
    }
}

impl fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ProtocolKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "gcamp" => Ok(ProtocolKind::Gcamp),
            "ta" | "modified-ta" | "modified_ta" => Ok(ProtocolKind::ModifiedTa),
            "naive" => Ok(ProtocolKind::Naive),
            other => Err(invalid("protocol", format!("unknown protocol `{other}`"))),
        }
    }
}

/// Common interface over the three protocols.
pub trait GlobalComputation {
    fn kind(&self) -> ProtocolKind;

    /// Compute the next estimate from per-sensor contributions `w` (sensor 1
    /// first) and threshold `beta`, sending messages over `net`.
    fn compute(&self, w: &[&[f64]], beta: f64, net: &mut Network) -> Result<ProtocolOutput<Trace>>;
}

#[derive(Debug, Clone, Copy)]
pub struct Gcamp {
    pub theta: f64,
}

impl GlobalComputation for Gcamp {
    fn kind(&self) -> ProtocolKind {
        ProtocolKind::Gcamp
    }

    fn compute(&self, w: &[&[f64]], beta: f64, net: &mut Network) -> Result<ProtocolOutput<Trace>> {
        let params = GcampParams::new(self.theta, beta)?;
        let out = gcamp(w, &params, net)?;
        Ok(ProtocolOutput {
            x_next: out.x_next,
            ledger: out.ledger,
            trace: Trace::Gcamp(out.trace),
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ModifiedTa;

impl GlobalComputation for ModifiedTa {
    fn kind(&self) -> ProtocolKind {
        ProtocolKind::ModifiedTa
    }

    fn compute(&self, w: &[&[f64]], beta: f64, net: &mut Network) -> Result<ProtocolOutput<Trace>> {
        let out = modified_ta(w, beta, net)?;
        Ok(ProtocolOutput {
            x_next: out.x_next,
            ledger: out.ledger,
            trace: Trace::ModifiedTa(out.trace),
        })
    }
}

#[derive(Debug, Clone, Copy)]
pub struct NaiveGather;

impl GlobalComputation for NaiveGather {
    fn kind(&self) -> ProtocolKind {
        ProtocolKind::Naive
    }

    fn compute(&self, w: &[&[f64]], beta: f64, net: &mut Network) -> Result<ProtocolOutput<Trace>> {
        let out = naive_gather(w, beta, net)?;
        Ok(ProtocolOutput {
            x_next: out.x_next,
            ledger: out.ledger,
            trace: Trace::Naive,
        })
    }
}

/// Normalized message number: estimate-phase messages over the naive cost `N·(P−1)`.
pub fn nmn(ledger: &MessageLedger, n: usize, sensors: usize) -> Result<f64> {
    if sensors < 2 {
        return Err(Error::TooFewSensors(sensors));
    }
    if n == 0 {
        return Err(invalid("n", "must be at least 1"));
    }
    Ok(ledger.total(PhaseFilter::Estimate) as f64 / (n * (sensors - 1)) as f64)
}

/// Checks shared by all protocols; returns `N`.
fn validate_inputs<W: AsRef<[f64]>>(
    w: &[W],
    beta: f64,
    net: &Network,
    min_sensors: usize,
) -> Result<usize> {
    if w.len() < min_sensors {
        return Err(Error::TooFewSensors(w.len()));
    }
    check_len("network size", w.len(), net.nodes())?;
    let n = w[0].as_ref().len();
    for wp in w {
        check_len("contribution length", n, wp.as_ref().len())?;
    }
    if !(beta >= 0.0 && beta.is_finite()) {
        return Err(invalid(
            "beta",
            format!("{beta} is not a finite nonnegative threshold"),
        ));
    }
    Ok(n)
}
