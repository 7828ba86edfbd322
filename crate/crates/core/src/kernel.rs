//! Two-row jump kernels for the walker.
//!
//! A kernel assigns a finite family of jump rates alpha(i, z) to each
//! environment state i in {0, 1} (vacant, occupied). The uniformization rate
//!
//! ```text
//! gamma = max_i ( alpha(i, o) + sum_z |z|_1 alpha(i, z) )
//! ```
//!
//! is computed on the user-supplied rates; since |z|_1 >= 1 away from the
//! origin it dominates both plain row sums, and each row is padded with an
//! extra origin atom so that both rows sum to exactly gamma. The walk then
//! jumps at the arrivals of a rate-gamma Poisson clock and draws its
//! displacement by inverting the row CDF at a uniform variate, so a single
//! uniform decides the jump in either state.
//!
//! Displacements are enumerated sorted by (|z|_1, lexicographic) with the
//! padded origin atom appended last; the CDFs are built over this shared
//! enumeration and their final breakpoint is snapped to exactly 1.

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum KernelError {
    #[error("rate for state {state} at {z:?} is negative ({rate})")]
    NegativeRate { state: u8, z: Vec<i64>, rate: f64 },
    #[error("state {0} row has no strictly positive rate")]
    EmptyRow(u8),
    #[error("displacement {z:?} has arity {got}, kernel dimension is {dim}")]
    DimensionMismatch { z: Vec<i64>, got: usize, dim: usize },
    #[error("row {state} CDF accumulated to {sum}, more than 8 ulp away from 1")]
    CdfAccumulation { state: u8, sum: f64 },
}

/// One user-supplied rate entry: state row, displacement, rate.
pub type RateEntry = (u8, Vec<i64>, f64);

#[derive(Debug, Clone, Serialize)]
pub struct KernelReport {
    pub gamma: f64,
    pub drift_vacant: Vec<f64>,
    pub drift_occupied: Vec<f64>,
    pub elliptic: bool,
    pub max_range: i64,
}

/// A validated, padded, sampling-ready kernel.
#[derive(Debug, Clone)]
pub struct KernelSpec {
    dim: usize,
    gamma: f64,
    /// Shared displacement enumeration, flattened with stride `dim`.
    support: Vec<i64>,
    n_atoms: usize,
    /// Per-row padded rates over the enumeration, `[vacant, occupied]`.
    rates: [Vec<f64>; 2],
    /// Per-row cumulative breakpoints p(1)..p(n), ending exactly at 1.
    cdf: [Vec<f64>; 2],
    drift: [Vec<f64>; 2],
    max_range: i64,
    elliptic: bool,
}

pub fn build_kernel(dim: usize, entries: &[RateEntry]) -> Result<KernelSpec, KernelError> {
    for (state, z, rate) in entries {
        if z.len() != dim {
            return Err(KernelError::DimensionMismatch { z: z.clone(), got: z.len(), dim });
        }
        if !(*rate >= 0.0) || !rate.is_finite() {
            return Err(KernelError::NegativeRate { state: *state, z: z.clone(), rate: *rate });
        }
        debug_assert!(*state <= 1, "state rows are 0 (vacant) and 1 (occupied)");
    }

    // Collapse duplicate entries, drop zero rates, and collect the union of
    // the two supports.
    let mut atoms: Vec<Vec<i64>> = Vec::new();
    let mut atom_rates: Vec<[f64; 2]> = Vec::new();
    for (state, z, rate) in entries {
        if *rate == 0.0 {
            continue;
        }
        match atoms.iter().position(|a| a == z) {
            Some(i) => atom_rates[i][*state as usize] += rate,
            None => {
                atoms.push(z.clone());
                atom_rates.push(if *state == 0 { [*rate, 0.0] } else { [0.0, *rate] });
            }
        }
    }

    let mut order: Vec<usize> = (0..atoms.len()).collect();
    order.sort_by(|&a, &b| {
        let na: i64 = atoms[a].iter().map(|c| c.abs()).sum();
        let nb: i64 = atoms[b].iter().map(|c| c.abs()).sum();
        na.cmp(&nb).then_with(|| atoms[a].cmp(&atoms[b]))
    });

    let mut gamma = 0.0f64;
    let mut row_sum = [0.0f64; 2];
    for state in 0..2 {
        let mut weighted = 0.0;
        for i in 0..atoms.len() {
            let norm: i64 = atoms[i].iter().map(|c| c.abs()).sum();
            let r = atom_rates[i][state];
            row_sum[state] += r;
            if norm == 0 {
                weighted += r;
            } else {
                weighted += norm as f64 * r;
            }
        }
        if row_sum[state] == 0.0 {
            return Err(KernelError::EmptyRow(state as u8));
        }
        gamma = gamma.max(weighted);
    }

    let pad = [gamma - row_sum[0], gamma - row_sum[1]];
    let needs_pad = pad[0] > 0.0 || pad[1] > 0.0;

    let mut support = Vec::with_capacity((order.len() + 1) * dim);
    let mut rates = [
        Vec::with_capacity(order.len() + 1),
        Vec::with_capacity(order.len() + 1),
    ];
    for &i in &order {
        support.extend_from_slice(&atoms[i]);
        rates[0].push(atom_rates[i][0]);
        rates[1].push(atom_rates[i][1]);
    }
    if needs_pad {
        support.extend(std::iter::repeat_n(0i64, dim));
        rates[0].push(pad[0]);
        rates[1].push(pad[1]);
    }
    let n_atoms = rates[0].len();

    let mut cdf = [Vec::with_capacity(n_atoms), Vec::with_capacity(n_atoms)];
    for state in 0..2 {
        let mut acc = 0.0f64;
        for r in &rates[state] {
            acc += r / gamma;
            cdf[state].push(acc);
        }
        let last = *cdf[state].last().unwrap();
        if ulp_distance(last, 1.0) > 8 {
            return Err(KernelError::CdfAccumulation { state: state as u8, sum: last });
        }
        *cdf[state].last_mut().unwrap() = 1.0;
    }

    let mut drift = [vec![0.0f64; dim], vec![0.0f64; dim]];
    for state in 0..2 {
        for (i, &o) in order.iter().enumerate() {
            let r = atom_rates[o][state];
            for j in 0..dim {
                drift[state][j] += r * support[i * dim + j] as f64;
            }
        }
    }

    let max_range = order
        .iter()
        .map(|&i| atoms[i].iter().map(|c| c.abs()).sum::<i64>())
        .max()
        .unwrap_or(0);

    // Elliptic: every unit displacement has positive rate in both rows.
    let mut elliptic = true;
    'outer: for state in 0..2 {
        for axis in 0..dim {
            for sign in [-1i64, 1] {
                let found = order.iter().enumerate().any(|(i, &o)| {
                    let z = &support[i * dim..(i + 1) * dim];
                    atom_rates[o][state] > 0.0
                        && z[axis] == sign
                        && z.iter().enumerate().all(|(k, &c)| k == axis || c == 0)
                });
                if !found {
                    elliptic = false;
                    break 'outer;
                }
            }
        }
    }

    Ok(KernelSpec { dim, gamma, support, n_atoms, rates, cdf, drift, max_range, elliptic })
}

fn ulp_distance(a: f64, b: f64) -> u64 {
    let to_ordered = |x: f64| {
        let bits = x.to_bits() as i64;
        if bits < 0 {
            i64::MIN - bits
        } else {
            bits
        }
    };
    to_ordered(a).abs_diff(to_ordered(b))
}

impl KernelSpec {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn n_atoms(&self) -> usize {
        self.n_atoms
    }

    pub fn atom(&self, n: usize) -> &[i64] {
        &self.support[n * self.dim..(n + 1) * self.dim]
    }

    pub fn rate(&self, state: usize, n: usize) -> f64 {
        self.rates[state][n]
    }

    pub fn cdf(&self, state: usize) -> &[f64] {
        &self.cdf[state]
    }

    /// Mean displacement per unit time in a frozen environment of the given
    /// state (u_0 or u_1).
    pub fn drift(&self, state: usize) -> &[f64] {
        &self.drift[state]
    }

    pub fn max_range(&self) -> i64 {
        self.max_range
    }

    /// Inverts the row CDF at u in [0,1): returns the displacement z_n for
    /// the unique n with p(n-1) <= u < p(n).
    #[inline]
    pub fn sample_jump(&self, occupied: bool, u: f64) -> &[i64] {
        debug_assert!((0.0..1.0).contains(&u));
        let cdf = &self.cdf[occupied as usize];
        let n = cdf.partition_point(|&p| p <= u);
        debug_assert!(n < self.n_atoms);
        self.atom(n)
    }

    pub fn check_properties(&self) -> KernelReport {
        KernelReport {
            gamma: self.gamma,
            drift_vacant: self.drift[0].clone(),
            drift_occupied: self.drift[1].clone(),
            elliptic: self.elliptic,
            max_range: self.max_range,
        }
    }
}
