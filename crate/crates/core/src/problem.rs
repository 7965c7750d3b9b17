//! Synthetic compressed-sensing instances and their row partition across sensors.
//!
//! Randomness comes from ChaCha8 seeded with the instance seed; each quantity
//! (signal, sensing matrix, noise) draws from its own ChaCha stream so the
//! three are independent and can be regenerated separately.

use std::io::{Read, Write};
use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{check_len, invalid, Error, Result};
use crate::linalg::{support, Matrix};

const STREAM_SIGNAL: u64 = 1;
const STREAM_MATRIX: u64 = 2;
const STREAM_NOISE: u64 = 3;

/// One measurement problem `y = A·s0 + n`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    pub s0: Vec<f64>,
    pub a: Matrix,
    pub y: Vec<f64>,
    pub noise_sigma: f64,
    pub kappa: f64,
    pub rho: f64,
    pub seed: u64,
}

impl ProblemInstance {
    /// Signal length N.
    pub fn n(&self) -> usize {
        self.a.cols()
    }

    /// Measurement count M.
    pub fn m(&self) -> usize {
        self.a.rows()
    }
}

fn stream(seed: u64, tag: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tag);
    rng
}

/// Number of measurements for undersampling ratio `kappa`.
pub fn measurement_count(n: usize, kappa: f64) -> usize {
    (kappa * n as f64).round() as usize
}

/// Draw an instance: `s0(n)` is standard normal with probability `kappa·rho`
/// and exactly zero otherwise, `A` has i.i.d. `N(0, 1/M)` entries and the
/// noise is i.i.d. `N(0, noise_sigma²)`.
pub fn generate_instance(
    n: usize,
    kappa: f64,
    rho: f64,
    noise_sigma: f64,
    seed: u64,
) -> Result<ProblemInstance> {
    if n == 0 {
        return Err(invalid("n", "must be at least 1"));
    }
    if !(kappa > 0.0 && kappa <= 1.0) {
        return Err(invalid("kappa", format!("{kappa} is outside (0, 1]")));
    }
    if !(rho > 0.0 && rho <= 1.0) {
        return Err(invalid("rho", format!("{rho} is outside (0, 1]")));
    }
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(invalid(
            "noise_sigma",
            format!("{noise_sigma} is not a finite nonnegative value"),
        ));
    }
    let m = measurement_count(n, kappa);
    if m == 0 {
        return Err(invalid(
            "kappa",
            format!("kappa·N = {} rounds to zero measurements", kappa * n as f64),
        ));
    }

    let density = kappa * rho;
    let mut rng = stream(seed, STREAM_SIGNAL);
    let s0: Vec<f64> = (0..n)
        .map(|_| {
            let active = rng.random::<f64>() < density;
            let value: f64 = rng.sample(StandardNormal);
            if active {
                value
            } else {
                0.0
            }
        })
        .collect();

    let scale = 1.0 / (m as f64).sqrt();
    let mut rng = stream(seed, STREAM_MATRIX);
    let data: Vec<f64> = (0..m * n)
        .map(|_| rng.sample::<f64, _>(StandardNormal) * scale)
        .collect();
    let a = Matrix::from_row_major(m, n, data)?;

    let mut rng = stream(seed, STREAM_NOISE);
    let y = a
        .view()
        .mul_sparse(&support(&s0))
        .into_iter()
        .map(|v| v + noise_sigma * rng.sample::<f64, _>(StandardNormal))
        .collect();

    Ok(ProblemInstance {
        s0,
        a,
        y,
        noise_sigma,
        kappa,
        rho,
        seed,
    })
}

/// Contiguous, balanced split of the measurement rows across `P` sensors.
/// Sensor `p` (1-based) owns `row_ranges[p - 1]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    row_ranges: Vec<Range<usize>>,
}

impl Partition {
    /// Balanced split of `rows` into `sensors` blocks; the first `rows % sensors`
    /// blocks get one extra row.
    pub fn balanced(rows: usize, sensors: usize) -> Result<Self> {
        if sensors == 0 {
            return Err(invalid("p", "must be at least 1"));
        }
        if sensors > rows {
            return Err(Error::PartitionTooLarge { rows, sensors });
        }
        let base = rows / sensors;
        let extra = rows % sensors;
        let mut start = 0;
        let row_ranges = (0..sensors)
            .map(|p| {
                let len = base + usize::from(p < extra);
                let range = start..start + len;
                start += len;
                range
            })
            .collect();
        Ok(Self { row_ranges })
    }

    /// All rows in one block.
    #[allow(clippy::single_range_in_vec_init)]
    pub fn single(rows: usize) -> Self {
        Self {
            row_ranges: vec![0..rows],
        }
    }

    pub fn sensors(&self) -> usize {
        self.row_ranges.len()
    }

    pub fn rows(&self) -> usize {
        self.row_ranges.last().map_or(0, |r| r.end)
    }

    pub fn ranges(&self) -> &[Range<usize>] {
        &self.row_ranges
    }

    pub fn range(&self, sensor: usize) -> Range<usize> {
        self.row_ranges[sensor].clone()
    }
}

/// Split `instance`'s rows across `sensors` nodes.
pub fn partition_rows(instance: &ProblemInstance, sensors: usize) -> Result<Partition> {
    Partition::balanced(instance.m(), sensors)
}

const MAGIC: &[u8; 8] = b"DAMPINS1";

/// Write an instance in the little-endian binary container:
///
/// ```text
/// magic  "DAMPINS1"
/// u64    N, M, P
/// f64    kappa, rho, noise_sigma
/// u64    seed
/// f64    s0[N], A[M*N] (row-major), y[M]
/// ```
pub fn write_instance<W: Write>(
    mut out: W,
    instance: &ProblemInstance,
    partition: &Partition,
) -> Result<()> {
    check_len("partition rows", instance.m(), partition.rows())?;
    out.write_all(MAGIC)?;
    for v in [instance.n(), instance.m(), partition.sensors()] {
        out.write_all(&(v as u64).to_le_bytes())?;
    }
    for v in [instance.kappa, instance.rho, instance.noise_sigma] {
        out.write_all(&v.to_le_bytes())?;
    }
    out.write_all(&instance.seed.to_le_bytes())?;
    let body = instance
        .s0
        .iter()
        .chain(instance.a.as_slice())
        .chain(&instance.y);
    let mut buf = Vec::with_capacity(8 * (instance.n() + instance.m() * (instance.n() + 1)));
    for v in body {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

/// Read an instance written by [`write_instance`]; the partition is rebuilt
/// from the stored sensor count.
pub fn read_instance<R: Read>(mut input: R) -> Result<(ProblemInstance, Partition)> {
    let mut magic = [0u8; 8];
    input
        .read_exact(&mut magic)
        .map_err(|_| Error::Format("truncated header".into()))?;
    if &magic != MAGIC {
        return Err(Error::Format("bad magic bytes".into()));
    }
    let mut word = |what: &str| -> Result<[u8; 8]> {
        let mut b = [0u8; 8];
        input
            .read_exact(&mut b)
            .map_err(|_| Error::Format(format!("truncated header at `{what}`")))?;
        Ok(b)
    };
    let n = u64::from_le_bytes(word("N")?) as usize;
    let m = u64::from_le_bytes(word("M")?) as usize;
    let p = u64::from_le_bytes(word("P")?) as usize;
    let kappa = f64::from_le_bytes(word("kappa")?);
    let rho = f64::from_le_bytes(word("rho")?);
    let noise_sigma = f64::from_le_bytes(word("noise_sigma")?);
    let seed = u64::from_le_bytes(word("seed")?);

    let count = n
        .checked_mul(m)
        .and_then(|nm| nm.checked_add(n + m))
        .ok_or_else(|| Error::Format(format!("dimensions {m}x{n} overflow")))?;
    let mut bytes = Vec::new();
    input.read_to_end(&mut bytes)?;
    if bytes.len() != count * 8 {
        return Err(Error::Format(format!(
            "body holds {} bytes, header implies {}",
            bytes.len(),
            count * 8
        )));
    }
    let mut values = bytes
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")));
    let s0: Vec<f64> = values.by_ref().take(n).collect();
    let a = Matrix::from_row_major(m, n, values.by_ref().take(m * n).collect())?;
    let y: Vec<f64> = values.collect();
    let partition = Partition::balanced(m, p)?;
    Ok((
        ProblemInstance {
            s0,
            a,
            y,
            noise_sigma,
            kappa,
            rho,
            seed,
        },
        partition,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_scale_dimensions() {
        let inst = generate_instance(5000, 0.2, 0.1, 0.02, 7).unwrap();
        assert_eq!(inst.m(), 1000);
        assert_eq!(inst.n(), 5000);
        // E[K] = N·κρ = 100, sd ≈ 9.9
        let k = inst.s0.iter().filter(|v| **v != 0.0).count();
        assert!((60..=140).contains(&k), "nonzeros {k}");
    }

    #[test]
    fn same_seed_same_instance() {
        let a = generate_instance(64, 0.5, 0.2, 0.05, 99).unwrap();
        let b = generate_instance(64, 0.5, 0.2, 0.05, 99).unwrap();
        assert_eq!(a, b);
        let c = generate_instance(64, 0.5, 0.2, 0.05, 100).unwrap();
        assert_ne!(a.a, c.a);
    }

    #[test]
    fn vanishing_density_without_noise_is_all_zero() {
        let inst = generate_instance(200, 0.2, 1e-15, 0.0, 3).unwrap();
        assert!(inst.s0.iter().all(|v| *v == 0.0));
        assert!(inst.y.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn noiseless_measurement_is_exact_product() {
        let inst = generate_instance(50, 0.4, 0.3, 0.0, 5).unwrap();
        assert_eq!(inst.y, inst.a.view().mul_sparse(&support(&inst.s0)));
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(generate_instance(0, 0.2, 0.1, 0.0, 0).is_err());
        assert!(generate_instance(10, 0.0, 0.1, 0.0, 0).is_err());
        assert!(generate_instance(10, 1.5, 0.1, 0.0, 0).is_err());
        assert!(generate_instance(10, 0.2, 0.0, 0.0, 0).is_err());
        assert!(generate_instance(10, 0.2, 0.1, -1.0, 0).is_err());
        assert!(generate_instance(10, 0.01, 0.1, 0.0, 0).is_err());
    }

    #[test]
    fn partition_shapes() {
        let p = Partition::balanced(1000, 10).unwrap();
        assert!(p.ranges().iter().all(|r| r.len() == 100));
        let p = Partition::balanced(10, 3).unwrap();
        let sizes: Vec<usize> = p.ranges().iter().map(Range::len).collect();
        assert_eq!(sizes, vec![4, 3, 3]);
        let whole = Partition::balanced(7, 1).unwrap();
        assert_eq!((whole.sensors(), whole.range(0)), (1, 0..7));
        assert!(matches!(
            Partition::balanced(3, 4),
            Err(Error::PartitionTooLarge {
                rows: 3,
                sensors: 4
            })
        ));
        assert!(Partition::balanced(3, 0).is_err());
    }

    #[test]
    fn instance_file_round_trip() {
        let inst = generate_instance(30, 0.4, 0.2, 0.01, 11).unwrap();
        let part = partition_rows(&inst, 4).unwrap();
        let mut buf = Vec::new();
        write_instance(&mut buf, &inst, &part).unwrap();
        assert_eq!(buf.len(), 8 + 7 * 8 + 8 * (30 + 12 * 30 + 12));
        let (back, back_part) = read_instance(buf.as_slice()).unwrap();
        assert_eq!(back, inst);
        assert_eq!(back_part, part);
    }

    #[test]
    fn instance_file_rejects_corruption() {
        let inst = generate_instance(10, 0.5, 0.2, 0.0, 1).unwrap();
        let part = Partition::single(inst.m());
        let mut buf = Vec::new();
        write_instance(&mut buf, &inst, &part).unwrap();
        assert!(matches!(
            read_instance(&buf[..buf.len() - 1]),
            Err(Error::Format(_))
        ));
        buf[0] = b'X';
        assert!(matches!(
            read_instance(buf.as_slice()),
            Err(Error::Format(_))
        ));
    }
}
