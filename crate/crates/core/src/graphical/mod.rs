//! Graphical representation of the contact process on a finite box.
//!
//! A realization consists of death marks (rate 1 per site) and infection
//! arrows (rate lambda per directed nearest-neighbor edge) on a time window
//! `[0, horizon]`. Everything downstream is a deterministic function of one
//! realization: forward evolution of any initial set, backward (dual)
//! evolution of any target set, couplings of several initial sets, and
//! arrow-thinned copies at smaller infection rates. Keeping those operations
//! on a shared realization is what turns distributional statements
//! (monotonicity in the initial set or in lambda, duality) into exact
//! per-realization assertions that tests can check with no tolerance.

mod gen;
pub mod oracle;
mod sample;
mod slab;
mod sweep;

pub use sample::{sample_bernoulli, sample_upper_invariant};
pub use slab::SlabSpec;
pub use sweep::{
    coupled_evolve, dual_evolve, evolve, rightmost, truncated_evolve, ArrowRule, Env,
    MergedEvents,
};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::{Boundary, Lattice};
use gen::EventGen;
pub(crate) use gen::directed_edges;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("infection rate must be finite and nonnegative, got {0}")]
    InvalidLambda(f64),
    #[error("horizon must be finite and positive, got {0}")]
    InvalidHorizon(f64),
    #[error("time window [{t0}, {t1}] outside the realization's [0, {horizon}]")]
    TimeOutOfRange { t0: f64, t1: f64, horizon: f64 },
    #[error("expected about {expected:.3e} events, over the budget of {budget:.3e}")]
    ResourceLimit { expected: f64, budget: f64 },
    #[error("thinning target {target} exceeds the realization's rate {current}")]
    ThinningUpward { target: f64, current: f64 },
    #[error("event references a directed edge that does not exist: {0}")]
    NoSuchEdge(String),
    #[error("shifting a realization requires periodic boundaries")]
    ShiftNeedsPeriodic,
}

/// Default cap on the expected event count of one realization; at roughly
/// 12 bytes an event this keeps a single realization under ~2 GiB even with
/// the transient sort buffer.
pub const DEFAULT_EVENT_BUDGET: f64 = 1.6e8;

/// An explicit event, used to build hand-crafted realizations in tests and
/// to inspect sampled ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Event {
    Cross { site: Vec<i64> },
    Arrow { from: Vec<i64>, to: Vec<i64> },
}

/// One realization of the percolation structure: per-site death-mark times
/// and per-directed-edge arrow times, each list ascending.
#[derive(Debug, Clone)]
pub struct GraphicalRep {
    lattice: Lattice,
    lambda: f64,
    horizon: f64,
    edges: Vec<(u32, u32)>,
    cross_offsets: Vec<u32>,
    cross_times: Vec<f64>,
    arrow_offsets: Vec<u32>,
    arrow_times: Vec<f64>,
    /// Seed of the thinning-mark stream. Thinning replays this stream over
    /// the arrow list, so repeated `thin` calls on the same realization see
    /// the same marks and nested rates give nested arrow sets.
    mark_seed: u64,
}

/// Samples a realization on `lattice` over `[0, horizon]`, consuming `rng`.
pub fn sample_rep(
    lattice: &Lattice,
    lambda: f64,
    horizon: f64,
    rng: ChaCha8Rng,
) -> Result<GraphicalRep, GraphError> {
    sample_rep_with_budget(lattice, lambda, horizon, rng, DEFAULT_EVENT_BUDGET)
}

pub fn sample_rep_with_budget(
    lattice: &Lattice,
    lambda: f64,
    horizon: f64,
    rng: ChaCha8Rng,
    budget: f64,
) -> Result<GraphicalRep, GraphError> {
    check_params(lambda, horizon)?;
    let n_sites = lattice.n_sites();
    let edges = directed_edges(lattice);
    let expected = (n_sites as f64 + lambda * edges.len() as f64) * horizon;
    if expected > budget {
        return Err(GraphError::ResourceLimit { expected, budget });
    }

    let (mark_seed, mut gen) = EventGen::new(lattice, lambda, horizon, rng);
    let mut raw: Vec<(f64, u32)> = Vec::with_capacity((expected * 1.05) as usize + 64);
    while let Some(ev) = gen.next() {
        raw.push(ev);
    }

    // Counting sort by lane; the stream is already time-ordered, so each
    // lane's list comes out ascending.
    let n_lanes = n_sites + edges.len();
    let mut counts = vec![0u32; n_lanes + 1];
    for &(_, lane) in &raw {
        counts[lane as usize + 1] += 1;
    }
    for i in 0..n_lanes {
        counts[i + 1] += counts[i];
    }
    let n_cross = counts[n_sites] as usize;
    let mut cross_times = vec![0.0; n_cross];
    let mut arrow_times = vec![0.0; raw.len() - n_cross];
    let mut cursor = counts.clone();
    for &(t, lane) in &raw {
        let pos = cursor[lane as usize] as usize;
        cursor[lane as usize] += 1;
        if (lane as usize) < n_sites {
            cross_times[pos] = t;
        } else {
            arrow_times[pos - n_cross] = t;
        }
    }
    let cross_offsets = counts[..=n_sites].to_vec();
    let arrow_offsets: Vec<u32> =
        counts[n_sites..].iter().map(|&c| c - n_cross as u32).collect();

    Ok(GraphicalRep {
        lattice: lattice.clone(),
        lambda,
        horizon,
        edges,
        cross_offsets,
        cross_times,
        arrow_offsets,
        arrow_times,
        mark_seed,
    })
}

pub(crate) fn check_params(lambda: f64, horizon: f64) -> Result<(), GraphError> {
    if !lambda.is_finite() || lambda < 0.0 {
        return Err(GraphError::InvalidLambda(lambda));
    }
    if !horizon.is_finite() || horizon <= 0.0 {
        return Err(GraphError::InvalidHorizon(horizon));
    }
    Ok(())
}

/// Truncation pad in the default safety rule: the infection front travels
/// linearly, so a pad of `DEFAULT_PAD * lambda * horizon` sites makes the
/// probability that truncation affects the observation window decay
/// exponentially in the pad.
pub const DEFAULT_PAD: f64 = 4.0;

/// Box radius needed to read data in a window of radius `window` over
/// `[0, horizon]` without feeling the truncated boundary:
/// `window + ceil(pad * lambda * horizon)`.
pub fn safe_radius(window: i64, lambda: f64, horizon: f64, pad: f64) -> i64 {
    window + (pad * lambda * horizon).ceil() as i64
}

impl GraphicalRep {
    /// Builds a realization from an explicit event list (any order).
    /// Arrows must follow existing directed edges of the lattice.
    pub fn from_events(
        lattice: &Lattice,
        lambda: f64,
        horizon: f64,
        events: &[(f64, Event)],
    ) -> Result<Self, GraphError> {
        check_params(lambda, horizon)?;
        let edges = directed_edges(lattice);
        let mut edge_lane = std::collections::HashMap::new();
        for (j, &(s, d)) in edges.iter().enumerate() {
            edge_lane.insert((s, d), j);
        }
        let mut per_cross: Vec<Vec<f64>> = vec![Vec::new(); lattice.n_sites()];
        let mut per_arrow: Vec<Vec<f64>> = vec![Vec::new(); edges.len()];
        for (t, ev) in events {
            match ev {
                Event::Cross { site } => {
                    let idx = lattice
                        .site_index(site)
                        .ok_or_else(|| GraphError::NoSuchEdge(format!("site {site:?}")))?;
                    per_cross[idx].push(*t);
                }
                Event::Arrow { from, to } => {
                    let s = lattice
                        .site_index(from)
                        .ok_or_else(|| GraphError::NoSuchEdge(format!("{from:?} -> {to:?}")))?
                        as u32;
                    let d = lattice
                        .site_index(to)
                        .ok_or_else(|| GraphError::NoSuchEdge(format!("{from:?} -> {to:?}")))?
                        as u32;
                    let lane = *edge_lane
                        .get(&(s, d))
                        .ok_or_else(|| GraphError::NoSuchEdge(format!("{from:?} -> {to:?}")))?;
                    per_arrow[lane].push(*t);
                }
            }
        }
        for list in per_cross.iter_mut().chain(per_arrow.iter_mut()) {
            list.sort_by(f64::total_cmp);
        }
        Ok(Self::from_lane_lists(lattice, lambda, horizon, edges, per_cross, per_arrow, 0))
    }

    fn from_lane_lists(
        lattice: &Lattice,
        lambda: f64,
        horizon: f64,
        edges: Vec<(u32, u32)>,
        per_cross: Vec<Vec<f64>>,
        per_arrow: Vec<Vec<f64>>,
        mark_seed: u64,
    ) -> Self {
        let mut cross_offsets = Vec::with_capacity(per_cross.len() + 1);
        let mut cross_times = Vec::new();
        cross_offsets.push(0u32);
        for list in &per_cross {
            cross_times.extend_from_slice(list);
            cross_offsets.push(cross_times.len() as u32);
        }
        let mut arrow_offsets = Vec::with_capacity(per_arrow.len() + 1);
        let mut arrow_times = Vec::new();
        arrow_offsets.push(0u32);
        for list in &per_arrow {
            arrow_times.extend_from_slice(list);
            arrow_offsets.push(arrow_times.len() as u32);
        }
        GraphicalRep {
            lattice: lattice.clone(),
            lambda,
            horizon,
            edges,
            cross_offsets,
            cross_times,
            arrow_offsets,
            arrow_times,
            mark_seed,
        }
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn edges(&self) -> &[(u32, u32)] {
        &self.edges
    }

    pub fn n_events(&self) -> usize {
        self.cross_times.len() + self.arrow_times.len()
    }

    pub fn crosses_of(&self, site: usize) -> &[f64] {
        let lo = self.cross_offsets[site] as usize;
        let hi = self.cross_offsets[site + 1] as usize;
        &self.cross_times[lo..hi]
    }

    pub fn arrows_of(&self, edge_lane: usize) -> &[f64] {
        let lo = self.arrow_offsets[edge_lane] as usize;
        let hi = self.arrow_offsets[edge_lane + 1] as usize;
        &self.arrow_times[lo..hi]
    }

    /// All events as (time, event) pairs sorted by time (ties by lane, the
    /// same order every sweep uses).
    pub fn events(&self) -> Vec<(f64, Event)> {
        let merged = self.merged_window(0.0, self.horizon).expect("full window");
        let mut coord = vec![0i64; self.lattice.dim()];
        let n_sites = self.lattice.n_sites() as u32;
        merged
            .iter()
            .map(|(t, lane)| {
                let ev = if lane < n_sites {
                    self.lattice.coord_of(lane as usize, &mut coord);
                    Event::Cross { site: coord.clone() }
                } else {
                    let (s, d) = self.edges[(lane - n_sites) as usize];
                    let mut from = vec![0i64; self.lattice.dim()];
                    let mut to = vec![0i64; self.lattice.dim()];
                    self.lattice.coord_of(s as usize, &mut from);
                    self.lattice.coord_of(d as usize, &mut to);
                    Event::Arrow { from, to }
                };
                (t, ev)
            })
            .collect()
    }

    /// Keeps every arrow whose thinning mark falls below `target / lambda`,
    /// producing a realization at the smaller rate. Marks are replayed from
    /// the stored seed, so for `a <= b` the arrows kept at rate `a` are a
    /// subset of those kept at rate `b`, realization by realization.
    pub fn thin(&self, target: f64) -> Result<GraphicalRep, GraphError> {
        if !target.is_finite() || target < 0.0 {
            return Err(GraphError::InvalidLambda(target));
        }
        if target > self.lambda {
            return Err(GraphError::ThinningUpward { target, current: self.lambda });
        }
        let keep_p = if self.lambda == 0.0 { 1.0 } else { target / self.lambda };
        let mut marks = ChaCha8Rng::seed_from_u64(self.mark_seed);
        let mut arrow_offsets = Vec::with_capacity(self.arrow_offsets.len());
        let mut arrow_times = Vec::new();
        arrow_offsets.push(0u32);
        for lane in 0..self.edges.len() {
            for &t in self.arrows_of(lane) {
                if marks.random::<f64>() < keep_p {
                    arrow_times.push(t);
                }
            }
            arrow_offsets.push(arrow_times.len() as u32);
        }
        Ok(GraphicalRep {
            lattice: self.lattice.clone(),
            lambda: target,
            horizon: self.horizon,
            edges: self.edges.clone(),
            cross_offsets: self.cross_offsets.clone(),
            cross_times: self.cross_times.clone(),
            arrow_offsets,
            arrow_times,
            mark_seed: self.mark_seed,
        })
    }

    /// Relabels every lane by a lattice translation (periodic boxes only).
    /// Event times are untouched, so evolving a shifted initial set on the
    /// shifted realization must give exactly the shifted result.
    pub fn shifted(&self, shift: &[i64]) -> Result<GraphicalRep, GraphError> {
        if self.lattice.boundary() != Boundary::Periodic {
            return Err(GraphError::ShiftNeedsPeriodic);
        }
        let n_sites = self.lattice.n_sites();
        let two_d = 2 * self.lattice.dim();
        let mut coord = vec![0i64; self.lattice.dim()];
        let mut sigma = vec![0u32; n_sites];
        for site in 0..n_sites {
            self.lattice.coord_of(site, &mut coord);
            for (c, s) in coord.iter_mut().zip(shift) {
                *c += s;
            }
            sigma[site] = self.lattice.site_index(&coord).expect("periodic") as u32;
        }
        // Under periodic boundaries every (site, dir) slot is a real edge and
        // lanes are site-major, so the lane of the shifted edge is direct.
        let mut per_cross = vec![Vec::new(); n_sites];
        let mut per_arrow = vec![Vec::new(); self.edges.len()];
        for site in 0..n_sites {
            per_cross[sigma[site] as usize] = self.crosses_of(site).to_vec();
            for dir in 0..two_d {
                let lane = site * two_d + dir;
                let new_lane = sigma[site] as usize * two_d + dir;
                per_arrow[new_lane] = self.arrows_of(lane).to_vec();
            }
        }
        Ok(Self::from_lane_lists(
            &self.lattice,
            self.lambda,
            self.horizon,
            self.edges.clone(),
            per_cross,
            per_arrow,
            self.mark_seed,
        ))
    }
}
