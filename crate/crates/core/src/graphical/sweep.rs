//! Forward and backward sweeps over a realization's events.
//!
//! Every sweep visits events in the same total order: ascending time, ties
//! broken by lane id. The backward (dual) sweep visits the exact reverse of
//! that order, which is what makes the duality identity hold event by event
//! and not just in distribution.

use rand_chacha::ChaCha8Rng;

use super::gen::{directed_edges, EventGen};
use super::slab::SlabSpec;
use super::{check_params, GraphError, GraphicalRep};
use crate::lattice::{Configuration, Lattice};

/// All events of a time window, ascending (ties by lane id).
#[derive(Debug, Clone)]
pub struct MergedEvents {
    times: Vec<f64>,
    lanes: Vec<u32>,
}

impl MergedEvents {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn get(&self, i: usize) -> (f64, u32) {
        (self.times[i], self.lanes[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, u32)> + '_ {
        self.times.iter().copied().zip(self.lanes.iter().copied())
    }
}

impl GraphicalRep {
    /// Merges all events with time in `(t0, t1]` into one ascending list.
    ///
    /// Per-lane lists are already sorted, so this is a bucket merge: count
    /// events per time bucket, scatter, then sort only within buckets.
    pub fn merged_window(&self, t0: f64, t1: f64) -> Result<MergedEvents, GraphError> {
        if !(0.0 <= t0 && t0 <= t1 && t1 <= self.horizon()) {
            return Err(GraphError::TimeOutOfRange { t0, t1, horizon: self.horizon() });
        }
        let n_sites = self.lattice().n_sites();
        let n_lanes = n_sites + self.edges().len();
        let lane_slice = |lane: usize| -> &[f64] {
            if lane < n_sites {
                self.crosses_of(lane)
            } else {
                self.arrows_of(lane - n_sites)
            }
        };

        let mut ranges = vec![(0u32, 0u32); n_lanes];
        let mut total = 0usize;
        for (lane, range) in ranges.iter_mut().enumerate() {
            let list = lane_slice(lane);
            let lo = list.partition_point(|&t| t <= t0);
            let hi = list.partition_point(|&t| t <= t1);
            *range = (lo as u32, hi as u32);
            total += hi - lo;
        }
        if total == 0 {
            return Ok(MergedEvents { times: Vec::new(), lanes: Vec::new() });
        }

        let n_buckets = (total / 32).max(1);
        let inv = n_buckets as f64 / (t1 - t0);
        let bucket_of = |t: f64| (((t - t0) * inv) as usize).min(n_buckets - 1);

        let mut bounds = vec![0u32; n_buckets + 1];
        for (lane, &(lo, hi)) in ranges.iter().enumerate() {
            for &t in &lane_slice(lane)[lo as usize..hi as usize] {
                bounds[bucket_of(t) + 1] += 1;
            }
        }
        for b in 0..n_buckets {
            bounds[b + 1] += bounds[b];
        }

        let mut times = vec![0.0f64; total];
        let mut lanes = vec![0u32; total];
        let mut cursor: Vec<u32> = bounds[..n_buckets].to_vec();
        for (lane, &(lo, hi)) in ranges.iter().enumerate() {
            for &t in &lane_slice(lane)[lo as usize..hi as usize] {
                let b = bucket_of(t);
                let pos = cursor[b] as usize;
                cursor[b] += 1;
                times[pos] = t;
                lanes[pos] = lane as u32;
            }
        }

        let mut scratch: Vec<(f64, u32)> = Vec::new();
        for b in 0..n_buckets {
            let (lo, hi) = (bounds[b] as usize, bounds[b + 1] as usize);
            if hi - lo > 1 {
                scratch.clear();
                scratch.extend(times[lo..hi].iter().copied().zip(lanes[lo..hi].iter().copied()));
                scratch.sort_unstable_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
                for (k, &(t, lane)) in scratch.iter().enumerate() {
                    times[lo + k] = t;
                    lanes[lo + k] = lane;
                }
            }
        }

        Ok(MergedEvents { times, lanes })
    }
}

/// Which arrows a tracked set may use.
#[derive(Debug, Clone)]
pub enum ArrowRule {
    /// Ordinary dynamics: every arrow applies.
    All,
    /// Dynamics truncated to a moving band: an arrow applies only when both
    /// endpoints lie in the band at the arrow's time, and occupancy reads as
    /// vacant outside the band.
    Slab(SlabSpec),
}

impl ArrowRule {
    #[inline]
    fn allows(&self, lattice: &Lattice, src: u32, dst: u32, t: f64) -> bool {
        match self {
            ArrowRule::All => true,
            ArrowRule::Slab(s) => {
                s.contains(lattice.x1_of_index(src as usize), t)
                    && s.contains(lattice.x1_of_index(dst as usize), t)
            }
        }
    }
}

enum Source {
    Stored { events: MergedEvents, pos: usize },
    Live { gen: EventGen, pending: Option<(f64, u32)> },
}

impl Source {
    #[inline]
    fn peek(&self) -> Option<f64> {
        match self {
            Source::Stored { events, pos } => {
                if *pos < events.len() {
                    Some(events.times[*pos])
                } else {
                    None
                }
            }
            Source::Live { pending, .. } => pending.map(|(t, _)| t),
        }
    }

    #[inline]
    fn pop(&mut self) -> (f64, u32) {
        match self {
            Source::Stored { events, pos } => {
                let ev = events.get(*pos);
                *pos += 1;
                ev
            }
            Source::Live { gen, pending } => {
                let ev = pending.take().expect("peeked");
                *pending = gen.next();
                ev
            }
        }
    }
}

/// A realization being swept forward in time, carrying one or more tracked
/// configurations. The event source is either a stored realization or a
/// live stream generated on the fly (same distribution, same draws for the
/// same generator state, nothing kept in memory).
pub struct Env {
    lattice: Lattice,
    edges: Vec<(u32, u32)>,
    source: Source,
    time: f64,
    horizon: f64,
    configs: Vec<Configuration>,
    rules: Vec<ArrowRule>,
}

impl Env {
    /// Sweeps a stored realization starting at `t0`. Initial configurations
    /// are masked to their band (if any) at `t0`.
    pub fn from_rep(
        rep: &GraphicalRep,
        t0: f64,
        configs: Vec<Configuration>,
        rules: Vec<ArrowRule>,
    ) -> Result<Env, GraphError> {
        let events = rep.merged_window(t0, rep.horizon())?;
        let mut env = Env {
            lattice: rep.lattice().clone(),
            edges: rep.edges().to_vec(),
            source: Source::Stored { events, pos: 0 },
            time: t0,
            horizon: rep.horizon(),
            configs,
            rules,
        };
        env.mask_initial();
        Ok(env)
    }

    /// Sweeps a freshly generated realization over `[0, horizon]` without
    /// storing it. With the same `rng` state, the events seen here are
    /// bit-identical to sampling a stored realization and sweeping that.
    pub fn live(
        lattice: &Lattice,
        lambda: f64,
        horizon: f64,
        rng: ChaCha8Rng,
        configs: Vec<Configuration>,
        rules: Vec<ArrowRule>,
    ) -> Result<Env, GraphError> {
        check_params(lambda, horizon)?;
        let edges = directed_edges(lattice);
        let (_, mut gen) = EventGen::new(lattice, lambda, horizon, rng);
        let pending = gen.next();
        let mut env = Env {
            lattice: lattice.clone(),
            edges,
            source: Source::Live { gen, pending },
            time: 0.0,
            horizon,
            configs,
            rules,
        };
        env.mask_initial();
        Ok(env)
    }

    fn mask_initial(&mut self) {
        assert_eq!(self.configs.len(), self.rules.len());
        let t0 = self.time;
        for (config, rule) in self.configs.iter_mut().zip(&self.rules) {
            if let ArrowRule::Slab(s) = rule {
                let lattice = &self.lattice;
                for site in 0..lattice.n_sites() {
                    if config.get(site) && !s.contains(lattice.x1_of_index(site), t0) {
                        config.set(site, false);
                    }
                }
            }
        }
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn n_configs(&self) -> usize {
        self.configs.len()
    }

    pub fn config(&self, i: usize) -> &Configuration {
        &self.configs[i]
    }

    pub fn config_mut(&mut self, i: usize) -> &mut Configuration {
        &mut self.configs[i]
    }

    /// Applies every event with time in `(current, t]`.
    pub fn advance_to(&mut self, t: f64) -> Result<(), GraphError> {
        if t < self.time || t > self.horizon {
            return Err(GraphError::TimeOutOfRange { t0: self.time, t1: t, horizon: self.horizon });
        }
        while let Some(et) = self.source.peek() {
            if et > t {
                break;
            }
            let (et, lane) = self.source.pop();
            self.apply(et, lane);
        }
        self.time = t;
        Ok(())
    }

    #[inline]
    fn apply(&mut self, t: f64, lane: u32) {
        let n_sites = self.lattice.n_sites() as u32;
        if lane < n_sites {
            for config in &mut self.configs {
                config.set(lane as usize, false);
            }
        } else {
            let (src, dst) = self.edges[(lane - n_sites) as usize];
            for (config, rule) in self.configs.iter_mut().zip(&self.rules) {
                if config.get(src as usize) && rule.allows(&self.lattice, src, dst, t) {
                    config.set(dst as usize, true);
                }
            }
        }
    }

    /// Occupancy of a site in configuration `i` at the current time, with
    /// band masking applied for slab rules.
    pub fn occupied_index(&self, i: usize, site: usize) -> bool {
        if !self.configs[i].get(site) {
            return false;
        }
        match &self.rules[i] {
            ArrowRule::All => true,
            ArrowRule::Slab(s) => s.contains(self.lattice.x1_of_index(site), self.time),
        }
    }

    /// Number of occupied sites in configuration `i`, band mask applied.
    pub fn masked_count(&self, i: usize) -> usize {
        match &self.rules[i] {
            ArrowRule::All => self.configs[i].count(),
            ArrowRule::Slab(s) => {
                let lattice = &self.lattice;
                let t = self.time;
                self.configs[i]
                    .iter_occupied()
                    .filter(|&site| s.contains(lattice.x1_of_index(site), t))
                    .count()
            }
        }
    }
}

/// Evolves several initial sets through the same events of `(t0, t1]`.
/// Shared events preserve pointwise ordering: if one initial set dominates
/// another, the outputs are ordered the same way at every site.
pub fn coupled_evolve(
    rep: &GraphicalRep,
    initials: &[Configuration],
    t0: f64,
    t1: f64,
) -> Result<Vec<Configuration>, GraphError> {
    let events = rep.merged_window(t0, t1)?;
    let mut configs = initials.to_vec();
    let n_sites = rep.lattice().n_sites() as u32;
    for (_, lane) in events.iter() {
        if lane < n_sites {
            for config in &mut configs {
                config.set(lane as usize, false);
            }
        } else {
            let (src, dst) = rep.edges()[(lane - n_sites) as usize];
            for config in &mut configs {
                if config.get(src as usize) {
                    config.set(dst as usize, true);
                }
            }
        }
    }
    Ok(configs)
}

/// Evolves one initial set through the events of `(t0, t1]`.
pub fn evolve(
    rep: &GraphicalRep,
    initial: &Configuration,
    t0: f64,
    t1: f64,
) -> Result<Configuration, GraphError> {
    let mut out = coupled_evolve(rep, std::slice::from_ref(initial), t0, t1)?;
    Ok(out.pop().expect("one configuration"))
}

/// Runs the dual process: starting from `targets` at time `t`, walks the
/// events of `(t - s, t]` in reverse and returns the set of sites at time
/// `t - s` from which some target is reachable. A death mark removes its
/// site; an arrow `x -> y` adds `x` whenever `y` is present (a path may sit
/// on `x` and jump). For any sets A, B this gives, realization by
/// realization, that the forward process from A at time `t - s` meets B at
/// time `t` exactly when A meets the dual set.
pub fn dual_evolve(
    rep: &GraphicalRep,
    targets: &Configuration,
    t: f64,
    s: f64,
) -> Result<Configuration, GraphError> {
    if !(0.0 <= s && s <= t) {
        return Err(GraphError::TimeOutOfRange { t0: t - s, t1: t, horizon: rep.horizon() });
    }
    let events = rep.merged_window(t - s, t)?;
    let mut dual = targets.clone();
    let n_sites = rep.lattice().n_sites() as u32;
    for i in (0..events.len()).rev() {
        let (_, lane) = events.get(i);
        if lane < n_sites {
            dual.set(lane as usize, false);
        } else {
            let (src, dst) = rep.edges()[(lane - n_sites) as usize];
            if dual.get(dst as usize) {
                dual.set(src as usize, true);
            }
        }
    }
    Ok(dual)
}

/// Evolves an initial set under dynamics truncated to a band: arrows apply
/// only when both endpoints are inside, and the result is masked to the band
/// at `t1`.
pub fn truncated_evolve(
    rep: &GraphicalRep,
    slab: &SlabSpec,
    initial: &Configuration,
    t0: f64,
    t1: f64,
) -> Result<Configuration, GraphError> {
    let events = rep.merged_window(t0, t1)?;
    let mut config = initial.clone();
    let lattice = rep.lattice();
    config.retain_sites(lattice, |x| slab.contains(x[0], t0));
    let n_sites = lattice.n_sites() as u32;
    for (t, lane) in events.iter() {
        if lane < n_sites {
            config.set(lane as usize, false);
        } else {
            let (src, dst) = rep.edges()[(lane - n_sites) as usize];
            if config.get(src as usize)
                && slab.contains(lattice.x1_of_index(src as usize), t)
                && slab.contains(lattice.x1_of_index(dst as usize), t)
            {
                config.set(dst as usize, true);
            }
        }
    }
    config.retain_sites(lattice, |x| slab.contains(x[0], t1));
    Ok(config)
}

/// Rightmost occupied site at time `t` of the process started at time `s`
/// from the given set restricted to `(-inf, z]`. One-dimensional lattices
/// only. Returns None when that process has died out by time `t`.
pub fn rightmost(
    rep: &GraphicalRep,
    from: &Configuration,
    z: i64,
    s: f64,
    t: f64,
) -> Result<Option<i64>, GraphError> {
    debug_assert_eq!(rep.lattice().dim(), 1);
    let mut start = from.clone();
    start.retain_sites(rep.lattice(), |x| x[0] <= z);
    let out = evolve(rep, &start, s, t)?;
    Ok(out.max_occupied_index().map(|i| rep.lattice().x_of_index(i)))
}
