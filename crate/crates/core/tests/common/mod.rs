//! Direct recomputations shared by the integration tests.
#![allow(dead_code, clippy::needless_range_loop)]

/// Column sums in sensor order, thresholded.
pub fn oracle_estimate(w: &[Vec<f64>], beta: f64) -> Vec<f64> {
    (0..w[0].len())
        .map(|n| {
            let mut s = w[0][n];
            for wp in &w[1..] {
                s += wp[n];
            }
            if s.abs() > beta {
                s.signum() * (s.abs() - beta)
            } else {
                0.0
            }
        })
        .collect()
}

pub fn column_sum(w: &[Vec<f64>], n: usize) -> f64 {
    w[1..].iter().fold(w[0][n], |acc, wp| acc + wp[n])
}

pub struct GcampOracle {
    pub r_sets: Vec<Vec<usize>>,
    pub upper: Vec<f64>,
    pub f: Vec<usize>,
    pub v: Vec<usize>,
    pub messages: u64,
}

pub fn gcamp_oracle(w: &[Vec<f64>], theta: f64, beta: f64) -> GcampOracle {
    let p = w.len();
    let n_len = w[0].len();
    let t = beta * theta / (p - 1) as f64;
    let mut r_sets = vec![Vec::new(); p];
    for (q, wq) in w.iter().enumerate().skip(1) {
        r_sets[q] = (0..n_len).filter(|&n| wq[n].abs() > t).collect();
    }
    let mut upper = Vec::with_capacity(n_len);
    let (mut f, mut v) = (Vec::new(), Vec::new());
    for n in 0..n_len {
        let senders: Vec<usize> = (1..p).filter(|&q| r_sets[q].contains(&n)).collect();
        let mut s = w[0][n];
        for &q in &senders {
            s += w[q][n];
        }
        let u = s.abs() + (p - 1 - senders.len()) as f64 * t;
        upper.push(u);
        if u > beta {
            v.push(n);
            if senders.len() < p - 1 {
                f.push(n);
            }
        }
    }
    let reported: usize = r_sets.iter().map(Vec::len).sum();
    let filled: usize = (1..p)
        .map(|q| f.iter().filter(|n| !r_sets[q].contains(n)).count())
        .sum();
    GcampOracle {
        messages: (reported + f.len() + filled) as u64,
        r_sets,
        upper,
        f,
        v,
    }
}

/// Three sensors, N = 10, tuned for β = 20 and θ = 0.8 (T = 8).
pub fn worked_example() -> Vec<Vec<f64>> {
    vec![
        vec![-16.0, 14.0, 13.0, 15.0, 3.5, 10.0, 12.0, 3.5, 3.5, 3.5],
        vec![9.6, 7.9, -9.3, 5.0, 7.9, 9.0, 4.0, 7.9, 7.9, 7.9],
        vec![7.8, -9.0, 7.5, 6.0, 7.5, -3.0, 10.0, 7.5, 7.5, 7.5],
    ]
}

/// Bit patterns with signed zeros folded together.
pub fn bits(v: &[f64]) -> Vec<u64> {
    v.iter()
        .map(|x| if *x == 0.0 { 0 } else { x.to_bits() })
        .collect()
}
