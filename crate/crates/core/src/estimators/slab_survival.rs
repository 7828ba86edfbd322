//! Survival of the single-seed process confined to a moving slab.
//!
//! The slab `|x1 - L t| <= K` is unbounded in the remaining coordinates, so
//! instead of a boxed lattice the simulation keeps just the occupied sites:
//! deaths at rate 1 per site, infection attempts at rate lambda per directed
//! neighbour edge, attempts landing outside the slab at their event time
//! discarded. For a positive tilt each occupied site also has a
//! deterministic exit time, the moment the slab's trailing edge passes it;
//! exits are processed in time order against the stochastic events and the
//! exponential clock is redrawn afterwards, which memorylessness permits.
//!
//! Survival means the occupied set stays nonempty through `t_end`. Starting
//! from the single seed, emptiness of the in-slab set is absorbing, so this
//! equals the truncated process being nonempty at `t_end`.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use rand_chacha::ChaCha8Rng;
use rand_distr::Exp1;
use serde::{Deserialize, Serialize};

use rand::Rng;

use crate::graphical::SlabSpec;
use crate::harness::{RngPolicy, StreamRole};

use super::{run_replicas, EstimateReport, EstimatorError, EstimatorOutput};

#[derive(Debug, Clone)]
pub struct SlabParams {
    pub dim: usize,
    pub lambda: f64,
    /// Slab half-width K.
    pub half_width: i64,
    /// Slab speed L, nonnegative.
    pub tilt: f64,
    pub t_end: f64,
    pub replicas: usize,
    pub level: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlabReport {
    pub dim: usize,
    pub lambda: f64,
    pub half_width: i64,
    pub tilt: f64,
    pub t_end: f64,
    pub replicas: usize,
    pub survived: usize,
    pub survival: EstimateReport,
    /// Mean extinction time over the replicas that died.
    pub extinction_time: Option<EstimateReport>,
}

/// Occupied sites, packed 16 bits per coordinate, with O(1) membership and
/// uniform member selection.
struct ActiveSet {
    sites: Vec<u64>,
    index: HashMap<u64, u32>,
}

const COORD_OFFSET: i64 = 1 << 15;

fn pack(x: &[i64]) -> u64 {
    let mut key = 0u64;
    for (j, &c) in x.iter().enumerate() {
        debug_assert!(c.abs() < COORD_OFFSET, "coordinate {c} out of packing range");
        key |= (((c + COORD_OFFSET) as u64) & 0xFFFF) << (16 * j);
    }
    key
}

fn unpack(key: u64, dim: usize, out: &mut [i64]) {
    for (j, slot) in out.iter_mut().enumerate().take(dim) {
        *slot = ((key >> (16 * j)) & 0xFFFF) as i64 - COORD_OFFSET;
    }
}

fn x1_of(key: u64) -> i64 {
    (key & 0xFFFF) as i64 - COORD_OFFSET
}

impl ActiveSet {
    fn new() -> ActiveSet {
        ActiveSet { sites: Vec::new(), index: HashMap::new() }
    }

    fn len(&self) -> usize {
        self.sites.len()
    }

    fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    fn contains(&self, key: u64) -> bool {
        self.index.contains_key(&key)
    }

    fn insert(&mut self, key: u64) {
        debug_assert!(!self.contains(key));
        self.index.insert(key, self.sites.len() as u32);
        self.sites.push(key);
    }

    fn swap_remove(&mut self, pos: usize) {
        let key = self.sites.swap_remove(pos);
        self.index.remove(&key);
        if pos < self.sites.len() {
            self.index.insert(self.sites[pos], pos as u32);
        }
    }

    fn remove_key(&mut self, key: u64) {
        let pos = self.index[&key] as usize;
        self.swap_remove(pos);
    }
}

/// Heap key ordered by time ascending (through `Reverse`), ties by site key
/// so the pop order is deterministic.
#[derive(PartialEq)]
struct ExitEntry(f64, u64);

impl Eq for ExitEntry {}

impl PartialOrd for ExitEntry {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for ExitEntry {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0).then(self.1.cmp(&other.1))
    }
}

fn run_one(params: &SlabParams, mut rng: ChaCha8Rng) -> (bool, f64) {
    let dim = params.dim;
    let slab = SlabSpec::new(params.half_width, 0, params.tilt);
    let per_site_rate = 1.0 + 2.0 * dim as f64 * params.lambda;
    let exit_time = |key: u64| (x1_of(key) + params.half_width) as f64 / params.tilt;

    let mut set = ActiveSet::new();
    set.insert(pack(&vec![0; dim]));
    let mut exits: BinaryHeap<Reverse<ExitEntry>> = BinaryHeap::new();
    if params.tilt > 0.0 {
        exits.push(Reverse(ExitEntry(exit_time(set.sites[0]), set.sites[0])));
    }

    let mut t = 0.0;
    let mut coord = vec![0i64; dim];
    loop {
        let total = set.len() as f64 * per_site_rate;
        let t_next = t + rng.sample::<f64, _>(Exp1) / total;

        // Earliest pending exit of a current member; stale entries (sites
        // that have died since) are discarded on the way.
        let next_exit = loop {
            match exits.peek() {
                Some(Reverse(entry)) if !set.contains(entry.1) => {
                    exits.pop();
                }
                Some(Reverse(entry)) => break Some((entry.0, entry.1)),
                None => break None,
            }
        };
        // Membership is closed at the exit instant, so a site departing
        // exactly at t_end still counts toward survival; strict comparisons
        // keep that convention.
        if let Some((tau, key)) = next_exit {
            if tau < t_next && tau < params.t_end {
                t = tau;
                exits.pop();
                set.remove_key(key);
                if set.is_empty() {
                    return (false, tau);
                }
                continue;
            }
        }
        if t_next > params.t_end {
            return (true, params.t_end);
        }
        t = t_next;

        let member = rng.random_range(0..set.len());
        let u: f64 = rng.random::<f64>() * per_site_rate;
        if u < 1.0 {
            set.swap_remove(member);
            if set.is_empty() {
                return (false, t);
            }
        } else {
            let dir = (((u - 1.0) / params.lambda) as usize).min(2 * dim - 1);
            unpack(set.sites[member], dim, &mut coord);
            coord[dir / 2] += if dir % 2 == 0 { 1 } else { -1 };
            if slab.contains(coord[0], t) {
                let key = pack(&coord);
                if !set.contains(key) {
                    set.insert(key);
                    if params.tilt > 0.0 {
                        exits.push(Reverse(ExitEntry(exit_time(key), key)));
                    }
                }
            }
        }
    }
}

pub fn estimate_slab_survival(
    params: &SlabParams,
    policy: &RngPolicy,
    threads: usize,
) -> Result<EstimatorOutput<SlabReport>, EstimatorError> {
    assert!(params.dim >= 1 && params.dim <= 4, "packing supports up to four dimensions");
    assert!(params.tilt >= 0.0, "the slab moves in the positive direction");
    assert!(params.half_width >= 1);

    let batch = run_replicas(params.replicas, threads, |i| {
        Ok(run_one(params, policy.stream(i, StreamRole::Rep)))
    });

    let survived = batch.values().filter(|(alive, _)| *alive).count();
    let deaths: Vec<f64> = batch
        .values()
        .filter(|(alive, _)| !alive)
        .map(|&(_, t)| t)
        .collect();
    let extinction_time = if deaths.is_empty() {
        None
    } else {
        Some(EstimateReport::from_sample("extinction_time", &deaths, params.level))
    };

    let csv_rows = batch
        .ok
        .iter()
        .map(|(i, (alive, t))| format!("{i},{},{t}", *alive as u8))
        .collect();

    Ok(EstimatorOutput {
        report: SlabReport {
            dim: params.dim,
            lambda: params.lambda,
            half_width: params.half_width,
            tilt: params.tilt,
            t_end: params.t_end,
            replicas: params.replicas,
            survived,
            survival: EstimateReport::from_binomial(
                "survival",
                survived,
                batch.ok.len(),
                params.level,
            ),
            extinction_time,
        },
        csv_header: "replica,survived,end_time",
        csv_rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graphical::{sample_rep, truncated_evolve};
    use crate::lattice::{Boundary, Configuration, Lattice};
    

    fn survival_via_graphical(
        radius: i64,
        lambda: f64,
        slab: SlabSpec,
        t_end: f64,
        replicas: usize,
        policy: &RngPolicy,
    ) -> EstimateReport {
        let lattice = Lattice::new(1, radius, Boundary::Truncate).unwrap();
        let origin = lattice.site_index(&[0]).unwrap();
        let mut survived = 0;
        for i in 0..replicas {
            let rep = sample_rep(
                &lattice,
                lambda,
                t_end,
                policy.stream(i as u64, StreamRole::Rep),
            )
            .unwrap();
            let mut initial = Configuration::empty(lattice.n_sites());
            initial.set(origin, true);
            let out = truncated_evolve(&rep, &slab, &initial, 0.0, t_end).unwrap();
            if !out.is_empty() {
                survived += 1;
            }
        }
        EstimateReport::from_binomial("survival", survived, replicas, 0.95)
    }

    #[test]
    fn matches_the_event_sweep_on_a_static_slab() {
        let params = SlabParams {
            dim: 1,
            lambda: 1.5,
            half_width: 3,
            tilt: 0.0,
            t_end: 2.0,
            replicas: 1500,
            level: 0.95,
        };
        let policy = RngPolicy::new(31, "slab-law-check");
        let ours = estimate_slab_survival(&params, &policy, 2).unwrap().report.survival;
        let reference = survival_via_graphical(
            5,
            1.5,
            SlabSpec::new(3, 0, 0.0),
            2.0,
            1500,
            &policy.scoped("sweep"),
        );
        let gap = (ours.estimate - reference.estimate).abs();
        assert!(
            gap < 4.0 * f64::hypot(ours.se, reference.se),
            "ctmc {ours:?} vs sweep {reference:?}"
        );
    }

    #[test]
    fn matches_the_event_sweep_on_a_tilted_slab() {
        let params = SlabParams {
            dim: 1,
            lambda: 2.0,
            half_width: 3,
            tilt: 0.5,
            t_end: 4.0,
            replicas: 1200,
            level: 0.95,
        };
        let policy = RngPolicy::new(57, "slab-tilt-check");
        let ours = estimate_slab_survival(&params, &policy, 2).unwrap().report.survival;
        let reference = survival_via_graphical(
            8,
            2.0,
            SlabSpec::new(3, 0, 0.5),
            4.0,
            1200,
            &policy.scoped("sweep"),
        );
        let gap = (ours.estimate - reference.estimate).abs();
        assert!(
            gap < 4.0 * f64::hypot(ours.se, reference.se),
            "ctmc {ours:?} vs sweep {reference:?}"
        );
    }

    #[test]
    fn deep_subcritical_seed_dies() {
        let params = SlabParams {
            dim: 2,
            lambda: 0.05,
            half_width: 5,
            tilt: 0.0,
            t_end: 30.0,
            replicas: 300,
            level: 0.95,
        };
        let policy = RngPolicy::new(4, "slab-subcritical");
        let report = estimate_slab_survival(&params, &policy, 2).unwrap().report;
        assert_eq!(report.survived, 0);
        assert!(report.extinction_time.unwrap().estimate < 5.0);
    }

    #[test]
    fn supercritical_two_dimensional_slab_survives_often() {
        let params = SlabParams {
            dim: 2,
            lambda: 1.0,
            half_width: 4,
            tilt: 0.0,
            t_end: 10.0,
            replicas: 200,
            level: 0.95,
        };
        let policy = RngPolicy::new(4, "slab-supercritical");
        let report = estimate_slab_survival(&params, &policy, 2).unwrap().report;
        assert!(report.survival.ci.0 > 0.1, "{:?}", report.survival);
    }

    #[test]
    fn report_is_thread_independent() {
        let params = SlabParams {
            dim: 2,
            lambda: 0.8,
            half_width: 3,
            tilt: 0.5,
            t_end: 5.0,
            replicas: 80,
            level: 0.95,
        };
        let policy = RngPolicy::new(12, "slab-threads");
        let a = estimate_slab_survival(&params, &policy, 1).unwrap();
        let b = estimate_slab_survival(&params, &policy, 4).unwrap();
        assert_eq!(a.report, b.report);
        assert_eq!(a.csv_rows, b.csv_rows);
    }
}
