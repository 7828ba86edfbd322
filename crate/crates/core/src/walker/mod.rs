//! The random walk and its coupling to the environment.
//!
//! The walk is uniformized: it attempts jumps at the arrival times of a
//! rate-gamma Poisson process and draws each displacement from the kernel
//! row matching the occupancy it sees, using one uniform per decision. The
//! uniforms come from two dedicated sequences: decision k consumes the next
//! unread entry of O when the site is occupied and of V when it is vacant.
//! Under this bookkeeping the position after k decisions depends on the
//! environment only through the number of occupied decisions, which is what
//! makes ordered environments produce ordered occupation counts on a shared
//! driver, path by path.

mod observers;

pub use observers::{taus_from_steps, RightmostObserver, SlabObserver};

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use thiserror::Error;

use crate::graphical::{Env, GraphError};
use crate::kernel::KernelSpec;

#[derive(Debug, Error)]
pub enum WalkError {
    #[error("walker left the guaranteed-exact region at t={time}: {position:?}")]
    LeftSafeRegion { time: f64, position: Vec<i64> },
    #[error("driver stream {role} exhausted (needed index {needed}, have {have})")]
    DriverExhausted { role: &'static str, needed: usize, have: usize },
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Occupancy of the environment at a space-time point. Implementations may
/// advance internal state; queries come with nondecreasing times within a
/// run. Environment events at exactly the query time count as already
/// applied.
pub trait Environment {
    fn occupied(&mut self, t: f64, x: &[i64]) -> Result<bool, WalkError>;
}

/// Environment frozen at all-occupied.
pub struct FrozenOnes;

impl Environment for FrozenOnes {
    fn occupied(&mut self, _t: f64, _x: &[i64]) -> Result<bool, WalkError> {
        Ok(true)
    }
}

/// Environment frozen at all-vacant.
pub struct FrozenZeros;

impl Environment for FrozenZeros {
    fn occupied(&mut self, _t: f64, _x: &[i64]) -> Result<bool, WalkError> {
        Ok(false)
    }
}

/// Deterministic environment given by a closure, mainly for desk traces.
pub struct FnEnv<F: FnMut(f64, &[i64]) -> bool>(pub F);

impl<F: FnMut(f64, &[i64]) -> bool> Environment for FnEnv<F> {
    fn occupied(&mut self, t: f64, x: &[i64]) -> Result<bool, WalkError> {
        Ok(self.0(t, x))
    }
}

/// A contact-process environment backed by a graphical sweep, with an
/// enforced safe radius: any read outside it aborts the replica rather than
/// silently truncating.
pub struct ContactEnv {
    pub env: Env,
    pub view: usize,
    pub safe_radius: i64,
}

impl ContactEnv {
    pub fn new(env: Env, safe_radius: i64) -> ContactEnv {
        ContactEnv { env, view: 0, safe_radius }
    }
}

impl Environment for ContactEnv {
    fn occupied(&mut self, t: f64, x: &[i64]) -> Result<bool, WalkError> {
        if x.iter().any(|&c| c.abs() > self.safe_radius) {
            return Err(WalkError::LeftSafeRegion { time: t, position: x.to_vec() });
        }
        self.env.advance_to(t)?;
        let site = self
            .env
            .lattice()
            .site_index(x)
            .ok_or_else(|| WalkError::LeftSafeRegion { time: t, position: x.to_vec() })?;
        Ok(self.env.occupied_index(self.view, site))
    }
}

/// The randomness driving one walk: Poisson jump times at rate gamma and
/// three uniform sequences (occupied draws O, vacant draws V, and the shared
/// sequence U for the single-stream variant), each long enough to cover
/// every jump.
#[derive(Debug, Clone)]
pub struct WalkDriver {
    pub gamma: f64,
    pub horizon: f64,
    pub jump_times: Vec<f64>,
    pub o: Vec<f64>,
    pub v: Vec<f64>,
    pub u: Vec<f64>,
}

/// Independent streams for the driver's components. Keeping them separate
/// means a change in how many O-draws a walk consumes cannot shift the jump
/// times of anything else.
pub struct DriverStreams {
    pub jumps: ChaCha8Rng,
    pub occupied: ChaCha8Rng,
    pub vacant: ChaCha8Rng,
    pub shared: ChaCha8Rng,
}

pub fn sample_driver(gamma: f64, horizon: f64, streams: DriverStreams) -> WalkDriver {
    assert!(gamma > 0.0 && gamma.is_finite());
    assert!(horizon > 0.0 && horizon.is_finite());
    let DriverStreams { mut jumps, mut occupied, mut vacant, mut shared } = streams;
    let exp = Exp::new(gamma).expect("positive rate");
    let mut jump_times = Vec::with_capacity((gamma * horizon * 1.1) as usize + 8);
    let mut t = 0.0;
    loop {
        t += exp.sample(&mut jumps);
        if t > horizon {
            break;
        }
        jump_times.push(t);
    }
    let n = jump_times.len();
    let fill =
        |rng: &mut ChaCha8Rng| -> Vec<f64> { (0..n).map(|_| rng.random::<f64>()).collect() };
    WalkDriver {
        gamma,
        horizon,
        jump_times,
        o: fill(&mut occupied),
        v: fill(&mut vacant),
        u: fill(&mut shared),
    }
}

impl WalkDriver {
    /// Number of jump times in `(0, t]`.
    pub fn n_at(&self, t: f64) -> usize {
        self.jump_times.partition_point(|&jt| jt <= t)
    }

    pub fn full(&self) -> DriverSlice<'_> {
        DriverSlice { driver: self, o_offset: 0, v_offset: 0 }
    }

    /// The unread remainder of the driver after a walk that, by time `t`,
    /// has made `occupied_count` occupied decisions: its continuation reads
    /// O from index `occupied_count` and V from index `n_at(t) -
    /// occupied_count`, exactly where the parent walk stopped reading.
    pub fn tail_at(&self, t: f64, occupied_count: u32) -> DriverSlice<'_> {
        let n = self.n_at(t);
        DriverSlice {
            driver: self,
            o_offset: occupied_count as usize,
            v_offset: n - occupied_count as usize,
        }
    }
}

#[derive(Clone, Copy)]
pub struct DriverSlice<'d> {
    pub driver: &'d WalkDriver,
    pub o_offset: usize,
    pub v_offset: usize,
}

/// One finished walk over a time window.
#[derive(Debug, Clone, PartialEq)]
pub struct WalkResult {
    pub dim: usize,
    pub gamma: f64,
    pub t0: f64,
    pub t1: f64,
    pub start: Vec<i64>,
    /// Times of the decisions taken, ascending, all in `(t0, t1]`.
    pub jump_times: Vec<f64>,
    /// Row-major positions: entry k is the position after k decisions, so
    /// there are `jump_times.len() + 1` rows and row 0 is `start`.
    positions: Vec<i64>,
    /// Occupied-decision counts: `rho[k]` after k decisions, `rho[0] = 0`.
    pub rho: Vec<u32>,
    pub o_used: usize,
    pub v_used: usize,
}

impl WalkResult {
    pub fn n_jumps(&self) -> usize {
        self.jump_times.len()
    }

    pub fn position(&self, k: usize) -> &[i64] {
        &self.positions[k * self.dim..(k + 1) * self.dim]
    }

    pub fn final_position(&self) -> &[i64] {
        self.position(self.n_jumps())
    }

    /// W_t: the position after every decision at time <= t.
    pub fn position_at(&self, t: f64) -> &[i64] {
        debug_assert!(self.t0 <= t && t <= self.t1);
        self.position(self.jump_times.partition_point(|&jt| jt <= t))
    }

    pub fn rho_count_at(&self, t: f64) -> u32 {
        debug_assert!(self.t0 <= t && t <= self.t1);
        self.rho[self.jump_times.partition_point(|&jt| jt <= t)]
    }

    /// The rescaled occupation functional over `(t0, t]`.
    pub fn rho_at(&self, t: f64) -> f64 {
        self.rho_count_at(t) as f64 / self.gamma
    }

    pub fn rho_end_count(&self) -> u32 {
        *self.rho.last().expect("rho[0] always present")
    }

    pub fn rho_end(&self) -> f64 {
        self.rho_end_count() as f64 / self.gamma
    }
}

enum Draws<'d> {
    /// Occupied decisions read O, vacant decisions read V.
    Split { o: &'d [f64], v: &'d [f64], o_offset: usize, v_offset: usize },
    /// Both kinds of decision read the same sequence by global jump index.
    Shared { u: &'d [f64] },
}

impl Draws<'_> {
    fn uniform(
        &self,
        global_jump: usize,
        occupied_so_far: usize,
        vacant_so_far: usize,
        bit: bool,
    ) -> Result<f64, WalkError> {
        let pick = |seq: &[f64], idx: usize, role: &'static str| {
            seq.get(idx).copied().ok_or(WalkError::DriverExhausted {
                role,
                needed: idx,
                have: seq.len(),
            })
        };
        match self {
            Draws::Split { o, v, o_offset, v_offset } => {
                if bit {
                    pick(o, o_offset + occupied_so_far, "O")
                } else {
                    pick(v, v_offset + vacant_so_far, "V")
                }
            }
            Draws::Shared { u } => pick(u, global_jump, "U"),
        }
    }
}

fn drive_walk(
    kernel: &KernelSpec,
    slice: DriverSlice<'_>,
    draws: Draws<'_>,
    mut bit_at: impl FnMut(usize, f64, &[i64]) -> Result<bool, WalkError>,
    start: &[i64],
    t0: f64,
    t1: f64,
) -> Result<WalkResult, WalkError> {
    let dim = kernel.dim();
    assert_eq!(start.len(), dim);
    assert!(0.0 <= t0 && t0 <= t1 && t1 <= slice.driver.horizon);

    let jumps = &slice.driver.jump_times;
    let first = jumps.partition_point(|&jt| jt <= t0);
    let mut pos = start.to_vec();
    let mut positions = pos.clone();
    let mut jump_times = Vec::new();
    let mut rho = vec![0u32];
    let mut occ = 0usize;
    let mut vac = 0usize;

    for (j, &t) in jumps.iter().enumerate().skip(first) {
        if t > t1 {
            break;
        }
        let bit = bit_at(jump_times.len(), t, &pos)?;
        let u = draws.uniform(j, occ, vac, bit)?;
        let step = kernel.sample_jump(bit, u);
        for (p, dz) in pos.iter_mut().zip(step) {
            *p += dz;
        }
        if bit {
            occ += 1;
        } else {
            vac += 1;
        }
        jump_times.push(t);
        positions.extend_from_slice(&pos);
        rho.push(occ as u32);
    }

    Ok(WalkResult {
        dim,
        gamma: slice.driver.gamma,
        t0,
        t1,
        start: start.to_vec(),
        jump_times,
        positions,
        rho,
        o_used: occ,
        v_used: vac,
    })
}

/// Runs the walk over `(t0, t1]` reading occupancy from `env`, consuming O
/// on occupied decisions and V on vacant ones.
pub fn run_walk_from(
    kernel: &KernelSpec,
    slice: DriverSlice<'_>,
    env: &mut impl Environment,
    start: &[i64],
    t0: f64,
    t1: f64,
) -> Result<WalkResult, WalkError> {
    let draws = Draws::Split {
        o: &slice.driver.o,
        v: &slice.driver.v,
        o_offset: slice.o_offset,
        v_offset: slice.v_offset,
    };
    drive_walk(kernel, slice, draws, |_, t, x| env.occupied(t, x), start, t0, t1)
}

/// Runs the walk from the origin over the driver's whole horizon.
pub fn run_walk(
    kernel: &KernelSpec,
    driver: &WalkDriver,
    env: &mut impl Environment,
) -> Result<WalkResult, WalkError> {
    let origin = vec![0i64; kernel.dim()];
    run_walk_from(kernel, driver.full(), env, &origin, 0.0, driver.horizon)
}

/// Single-stream variant: decision k reads U_k whatever the occupancy. Same
/// law as `run_walk`, but not the same path for the same driver.
pub fn run_walk_single_u(
    kernel: &KernelSpec,
    driver: &WalkDriver,
    env: &mut impl Environment,
) -> Result<WalkResult, WalkError> {
    let origin = vec![0i64; kernel.dim()];
    drive_walk(
        kernel,
        driver.full(),
        Draws::Shared { u: &driver.u },
        |_, t, x| env.occupied(t, x),
        &origin,
        0.0,
        driver.horizon,
    )
}

/// A Boolean functional the walk reads instead of raw occupancy: decision k
/// uses `observe(k, J_k, S_k)` for the kernel row, the O/V split, and the
/// counter. Observers that never report 1 on a genuinely vacant site yield
/// occupation counts dominated by the plain walk's on a shared driver.
pub trait Observer {
    fn observe(&mut self, k: usize, t: f64, x: &[i64]) -> Result<bool, WalkError>;
}

/// Reads the environment as-is; `run_walk_general` with this observer is
/// bit-identical to `run_walk`.
pub struct IdentityObserver<E: Environment>(pub E);

impl<E: Environment> Observer for IdentityObserver<E> {
    fn observe(&mut self, _k: usize, t: f64, x: &[i64]) -> Result<bool, WalkError> {
        self.0.occupied(t, x)
    }
}

/// Constant-0 observer: the walk never sees an occupied site.
pub struct BlindObserver;

impl Observer for BlindObserver {
    fn observe(&mut self, _k: usize, _t: f64, _x: &[i64]) -> Result<bool, WalkError> {
        Ok(false)
    }
}

/// Runs the walk with the observer's bits in place of raw occupancy.
pub fn run_walk_general(
    kernel: &KernelSpec,
    driver: &WalkDriver,
    observer: &mut impl Observer,
) -> Result<WalkResult, WalkError> {
    let origin = vec![0i64; kernel.dim()];
    let draws = Draws::Split { o: &driver.o, v: &driver.v, o_offset: 0, v_offset: 0 };
    drive_walk(
        kernel,
        driver.full(),
        draws,
        |k, t, x| observer.observe(k, t, x),
        &origin,
        0.0,
        driver.horizon,
    )
}

#[cfg(test)]
mod tests;
