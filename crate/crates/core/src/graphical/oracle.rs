//! Brute-force reference answers by explicit path search.
//!
//! An infection path sits on a site until an outgoing arrow fires, may take
//! that arrow or stay, and dies if a death mark hits the site it is sitting
//! on. The functions here enumerate such paths directly over the event list
//! (depth-first, memoizing failed states) and share no traversal logic with
//! the sweep implementations; they are for cross-checking small
//! realizations, with cost growing quickly in the event count.
//!
//! Both routes order events by time with ties broken by lane id, which fixes
//! the precedence of simultaneous events; agreement is exact, not
//! approximate.

use std::collections::HashSet;

use super::GraphicalRep;
use crate::lattice::Configuration;

enum OracleEvent {
    Cross(u32),
    Arrow(u32, u32),
}

pub struct PathOracle {
    events: Vec<(f64, OracleEvent)>,
}

impl PathOracle {
    pub fn new(rep: &GraphicalRep) -> PathOracle {
        let n_sites = rep.lattice().n_sites();
        let mut keyed: Vec<(f64, u32)> = Vec::with_capacity(rep.n_events());
        for site in 0..n_sites {
            keyed.extend(rep.crosses_of(site).iter().map(|&t| (t, site as u32)));
        }
        for lane in 0..rep.edges().len() {
            keyed.extend(rep.arrows_of(lane).iter().map(|&t| (t, (n_sites + lane) as u32)));
        }
        keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let events = keyed
            .into_iter()
            .map(|(t, lane)| {
                let ev = if (lane as usize) < n_sites {
                    OracleEvent::Cross(lane)
                } else {
                    let (s, d) = rep.edges()[lane as usize - n_sites];
                    OracleEvent::Arrow(s, d)
                };
                (t, ev)
            })
            .collect();
        PathOracle { events }
    }

    /// Whether an infection path runs from `src` at time `t0` to `dst` at
    /// time `t1`. Events at exactly `t0` are already in the past; events at
    /// exactly `t1` still count.
    pub fn path_exists(&self, src: usize, t0: f64, dst: usize, t1: f64) -> bool {
        let start = self.events.partition_point(|&(t, _)| t <= t0);
        let mut failed = HashSet::new();
        self.search(src as u32, start, dst as u32, t1, &mut failed)
    }

    fn search(
        &self,
        site: u32,
        from: usize,
        dst: u32,
        t1: f64,
        failed: &mut HashSet<(u32, u32)>,
    ) -> bool {
        if !failed.insert((site, from as u32)) {
            return false;
        }
        for (j, (t, ev)) in self.events.iter().enumerate().skip(from) {
            if *t > t1 {
                break;
            }
            match *ev {
                OracleEvent::Cross(s) if s == site => return false,
                OracleEvent::Arrow(s, d) if s == site => {
                    if self.search(d, j + 1, dst, t1, failed) {
                        return true;
                    }
                }
                _ => {}
            }
        }
        site == dst
    }

    /// Forward evolution by path search: a site is occupied at `t1` exactly
    /// when some initially occupied site reaches it.
    pub fn evolve(&self, initial: &Configuration, t0: f64, t1: f64) -> Configuration {
        let n = initial.n_sites();
        let mut out = Configuration::empty(n);
        for dst in 0..n {
            let hit = initial.iter_occupied().any(|src| self.path_exists(src, t0, dst, t1));
            if hit {
                out.set(dst, true);
            }
        }
        out
    }

    /// Dual evolution by path search: the set of sites at time `t - s` from
    /// which some target at time `t` is reachable.
    pub fn dual(&self, targets: &Configuration, t: f64, s: f64) -> Configuration {
        let n = targets.n_sites();
        let mut out = Configuration::empty(n);
        for src in 0..n {
            let hit = targets.iter_occupied().any(|dst| self.path_exists(src, t - s, dst, t));
            if hit {
                out.set(src, true);
            }
        }
        out
    }
}
