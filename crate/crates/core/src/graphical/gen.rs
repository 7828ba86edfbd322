//! Time-ordered generation of graphical events.
//!
//! All per-site death clocks (rate 1) and per-edge arrow clocks (rate
//! lambda) are superposed into one Poisson stream of total rate
//! n_sites + lambda * n_edges; each arrival is assigned a lane uniformly
//! within its class. This yields the events already in global time order,
//! so a single pass can both populate the per-lane lists of a stored
//! representation and drive a fused evolve without any merge step, with
//! bit-identical results between the two routes.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};

use crate::lattice::{Lattice, NO_SITE};

/// Unified lane numbering: lanes `0..n_sites` are death marks on that site,
/// lanes `n_sites..n_sites+n_edges` are arrows along the directed edge list.
pub(crate) struct EventGen {
    rng: ChaCha8Rng,
    exp: Exp<f64>,
    t: f64,
    horizon: f64,
    n_sites: u32,
    n_edges: u32,
    p_cross: f64,
}

impl EventGen {
    /// Draws the representation's mark seed (used later for arrow thinning)
    /// and sets up the superposed clock. `n_edges` may be zero only if
    /// lambda is zero.
    pub fn new(
        lattice: &Lattice,
        lambda: f64,
        horizon: f64,
        mut rng: ChaCha8Rng,
    ) -> (u64, EventGen) {
        let mark_seed = rng.random::<u64>();
        let n_sites = lattice.n_sites() as u32;
        let n_edges = lattice.n_edges() as u32;
        let total = n_sites as f64 + lambda * n_edges as f64;
        let gen = EventGen {
            rng,
            exp: Exp::new(total).expect("positive total rate"),
            t: 0.0,
            horizon,
            n_sites,
            n_edges,
            p_cross: n_sites as f64 / total,
        };
        (mark_seed, gen)
    }

    #[inline]
    pub fn next(&mut self) -> Option<(f64, u32)> {
        self.t += self.exp.sample(&mut self.rng);
        if self.t > self.horizon {
            return None;
        }
        let lane = if self.rng.random::<f64>() < self.p_cross {
            self.rng.random_range(0..self.n_sites)
        } else {
            self.n_sites + self.rng.random_range(0..self.n_edges)
        };
        Some((self.t, lane))
    }
}

/// Directed edges that exist on the lattice, in canonical order (site-major,
/// then direction). The arrow lane `n_sites + j` refers to `edges[j]`.
pub(crate) fn directed_edges(lattice: &Lattice) -> Vec<(u32, u32)> {
    let two_d = 2 * lattice.dim();
    let mut edges = Vec::with_capacity(lattice.n_sites() * two_d);
    for site in 0..lattice.n_sites() {
        for dir in 0..two_d {
            let nbr = lattice.neighbor(site, dir);
            if nbr != NO_SITE {
                edges.push((site as u32, nbr));
            }
        }
    }
    edges
}
