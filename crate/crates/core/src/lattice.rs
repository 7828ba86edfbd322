//! Finite simulation boxes on Z^d and occupancy configurations.
//!
//! All processes live on the box { x : |x_j| <= R } with one of two boundary
//! conventions: `Truncate` simply has no edges leaving the box (the truncated
//! process is stochastically below the infinite-volume one, which is the safe
//! direction for lower bounds), while `Periodic` wraps coordinates mod 2R+1.
//! Sites are addressed both by coordinate vectors and by a linear index used
//! in the hot loops; configurations are plain bit sets over the linear index.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LatticeError {
    #[error("dimension must be at least 1")]
    ZeroDimension,
    #[error("radius must be at least 1, got {0}")]
    BadRadius(i64),
    #[error("box has {sites} sites, exceeding the limit of {limit}")]
    TooManySites { sites: u128, limit: u128 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Boundary {
    Truncate,
    Periodic,
}

/// Largest usable site count; keeps index arithmetic in u32 and memory sane.
pub const MAX_SITES: u128 = 1 << 28;

/// The box { x in Z^d : max_j |x_j| <= radius } with a boundary convention.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Lattice {
    dim: usize,
    radius: i64,
    boundary: Boundary,
    side: i64,
    n_sites: usize,
    /// Directed neighbor table, `2*dim` entries per site in direction order
    /// (-e_1, +e_1, -e_2, +e_2, ...); `u32::MAX` marks a missing edge under
    /// truncation.
    neighbors: Vec<u32>,
}

pub const NO_SITE: u32 = u32::MAX;

impl Lattice {
    pub fn new(dim: usize, radius: i64, boundary: Boundary) -> Result<Self, LatticeError> {
        if dim == 0 {
            return Err(LatticeError::ZeroDimension);
        }
        if radius < 1 {
            return Err(LatticeError::BadRadius(radius));
        }
        let side = 2 * radius + 1;
        let mut sites: u128 = 1;
        for _ in 0..dim {
            sites = sites.saturating_mul(side as u128);
        }
        if sites > MAX_SITES {
            return Err(LatticeError::TooManySites { sites, limit: MAX_SITES });
        }
        let n_sites = sites as usize;
        let mut lat = Lattice { dim, radius, boundary, side, n_sites, neighbors: Vec::new() };
        lat.neighbors = lat.build_neighbors();
        Ok(lat)
    }

    fn build_neighbors(&self) -> Vec<u32> {
        let mut table = vec![NO_SITE; self.n_sites * 2 * self.dim];
        let mut coord = vec![0i64; self.dim];
        for idx in 0..self.n_sites {
            self.coord_of(idx, &mut coord);
            for axis in 0..self.dim {
                for (slot, step) in [(0usize, -1i64), (1, 1)] {
                    let old = coord[axis];
                    coord[axis] = old + step;
                    if let Some(n) = self.site_index(&coord) {
                        table[idx * 2 * self.dim + 2 * axis + slot] = n as u32;
                    }
                    coord[axis] = old;
                }
            }
        }
        table
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn radius(&self) -> i64 {
        self.radius
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    /// Directed edges that actually exist (both endpoints in the box under
    /// truncation; all `n_sites * 2 * dim` under periodic wrapping).
    pub fn n_edges(&self) -> usize {
        self.neighbors.iter().filter(|&&n| n != NO_SITE).count()
    }

    /// Linear index of a coordinate, or None when it falls outside a
    /// truncated box. Periodic boxes wrap, so every coordinate resolves.
    pub fn site_index(&self, x: &[i64]) -> Option<usize> {
        debug_assert_eq!(x.len(), self.dim);
        let mut idx = 0usize;
        let mut stride = 1usize;
        for &c in x {
            let offset = match self.boundary {
                Boundary::Truncate => {
                    if c.abs() > self.radius {
                        return None;
                    }
                    c + self.radius
                }
                Boundary::Periodic => (c + self.radius).rem_euclid(self.side),
            };
            idx += offset as usize * stride;
            stride *= self.side as usize;
        }
        Some(idx)
    }

    /// Writes the coordinate of a linear index into `out`.
    pub fn coord_of(&self, idx: usize, out: &mut [i64]) {
        debug_assert!(idx < self.n_sites);
        let mut rest = idx;
        for slot in out.iter_mut().take(self.dim) {
            *slot = (rest % self.side as usize) as i64 - self.radius;
            rest /= self.side as usize;
        }
    }

    pub fn neighbor(&self, site: usize, dir: usize) -> u32 {
        self.neighbors[site * 2 * self.dim + dir]
    }

    pub fn neighbor_table(&self) -> &[u32] {
        &self.neighbors
    }

    /// In d=1 the linear index is x + R, so coordinates and indices order the
    /// same way; the estimators for rightmost sites lean on this.
    pub fn x_of_index(&self, idx: usize) -> i64 {
        debug_assert_eq!(self.dim, 1);
        idx as i64 - self.radius
    }

    /// First coordinate of a linear index, valid in any dimension (axis 1 is
    /// the fastest-varying one). Slab geometry is measured along this axis.
    pub fn x1_of_index(&self, idx: usize) -> i64 {
        (idx % self.side as usize) as i64 - self.radius
    }
}

/// Occupancy over a lattice: one bit per linear site index.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Configuration {
    n_sites: usize,
    words: Vec<u64>,
}

impl Configuration {
    pub fn empty(n_sites: usize) -> Self {
        Configuration { n_sites, words: vec![0; n_sites.div_ceil(64)] }
    }

    pub fn full(n_sites: usize) -> Self {
        let mut c = Self::empty(n_sites);
        for w in &mut c.words {
            *w = u64::MAX;
        }
        c.clear_tail();
        c
    }

    fn clear_tail(&mut self) {
        let tail = self.n_sites % 64;
        if tail != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << tail) - 1;
            }
        }
    }

    pub fn n_sites(&self) -> usize {
        self.n_sites
    }

    #[inline]
    pub fn get(&self, site: usize) -> bool {
        debug_assert!(site < self.n_sites);
        self.words[site >> 6] >> (site & 63) & 1 != 0
    }

    #[inline]
    pub fn set(&mut self, site: usize, value: bool) {
        debug_assert!(site < self.n_sites);
        let mask = 1u64 << (site & 63);
        if value {
            self.words[site >> 6] |= mask;
        } else {
            self.words[site >> 6] &= !mask;
        }
    }

    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    /// Pointwise `<=`: every occupied site of `self` is occupied in `other`.
    pub fn dominated_by(&self, other: &Configuration) -> bool {
        debug_assert_eq!(self.n_sites, other.n_sites);
        self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }

    pub fn intersects(&self, other: &Configuration) -> bool {
        debug_assert_eq!(self.n_sites, other.n_sites);
        self.words.iter().zip(&other.words).any(|(a, b)| a & b != 0)
    }

    pub fn intersect_with(&mut self, other: &Configuration) {
        debug_assert_eq!(self.n_sites, other.n_sites);
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a &= b;
        }
    }

    pub fn max_occupied_index(&self) -> Option<usize> {
        for (w_idx, &w) in self.words.iter().enumerate().rev() {
            if w != 0 {
                return Some((w_idx << 6) + 63 - w.leading_zeros() as usize);
            }
        }
        None
    }

    pub fn iter_occupied(&self) -> impl Iterator<Item = usize> + '_ {
        self.words.iter().enumerate().flat_map(|(w_idx, &w)| {
            let mut rest = w;
            std::iter::from_fn(move || {
                if rest == 0 {
                    None
                } else {
                    let bit = rest.trailing_zeros() as usize;
                    rest &= rest - 1;
                    Some((w_idx << 6) + bit)
                }
            })
        })
    }

    /// Keeps only sites whose coordinate satisfies the predicate.
    pub fn retain_sites(&mut self, lattice: &Lattice, mut keep: impl FnMut(&[i64]) -> bool) {
        let mut coord = vec![0i64; lattice.dim()];
        for site in 0..self.n_sites {
            if self.get(site) {
                lattice.coord_of(site, &mut coord);
                if !keep(&coord) {
                    self.set(site, false);
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_degenerate_boxes() {
        assert_eq!(Lattice::new(0, 3, Boundary::Truncate), Err(LatticeError::ZeroDimension));
        assert_eq!(Lattice::new(1, 0, Boundary::Truncate), Err(LatticeError::BadRadius(0)));
        assert!(matches!(
            Lattice::new(4, 200, Boundary::Truncate),
            Err(LatticeError::TooManySites { .. })
        ));
    }

    #[test]
    fn index_coord_roundtrip() {
        let lat = Lattice::new(2, 3, Boundary::Truncate).unwrap();
        assert_eq!(lat.n_sites(), 49);
        let mut coord = vec![0i64; 2];
        for idx in 0..lat.n_sites() {
            lat.coord_of(idx, &mut coord);
            assert_eq!(lat.site_index(&coord), Some(idx));
        }
        assert_eq!(lat.site_index(&[4, 0]), None);
        assert_eq!(lat.site_index(&[-4, 2]), None);
    }

    #[test]
    fn periodic_wraps_and_truncate_drops_edges() {
        let per = Lattice::new(1, 2, Boundary::Periodic).unwrap();
        assert_eq!(per.site_index(&[3]), per.site_index(&[-2]));
        assert_eq!(per.n_edges(), 5 * 2);

        let tru = Lattice::new(1, 2, Boundary::Truncate).unwrap();
        assert_eq!(tru.n_edges(), 4 * 2);
        let leftmost = tru.site_index(&[-2]).unwrap();
        assert_eq!(tru.neighbor(leftmost, 0), NO_SITE);
        assert_eq!(tru.neighbor(leftmost, 1), tru.site_index(&[-1]).unwrap() as u32);
    }

    #[test]
    fn d1_index_is_monotone_in_x() {
        let lat = Lattice::new(1, 5, Boundary::Truncate).unwrap();
        for x in -5..=5i64 {
            assert_eq!(lat.site_index(&[x]), Some((x + 5) as usize));
            assert_eq!(lat.x_of_index((x + 5) as usize), x);
        }
    }

    #[test]
    fn configuration_bit_ops() {
        let mut c = Configuration::empty(130);
        assert!(c.is_empty());
        c.set(0, true);
        c.set(64, true);
        c.set(129, true);
        assert_eq!(c.count(), 3);
        assert_eq!(c.max_occupied_index(), Some(129));
        assert_eq!(c.iter_occupied().collect::<Vec<_>>(), vec![0, 64, 129]);
        c.set(129, false);
        assert_eq!(c.max_occupied_index(), Some(64));

        let full = Configuration::full(130);
        assert_eq!(full.count(), 130);
        assert!(c.dominated_by(&full));
        assert!(!full.dominated_by(&c));
        assert!(c.intersects(&full));
    }

    #[test]
    fn retain_masks_by_coordinate() {
        let lat = Lattice::new(1, 4, Boundary::Truncate).unwrap();
        let mut c = Configuration::full(lat.n_sites());
        c.retain_sites(&lat, |x| x[0] < 0);
        assert_eq!(c.count(), 4);
        assert!(c.get(lat.site_index(&[-1]).unwrap()));
        assert!(!c.get(lat.site_index(&[0]).unwrap()));
    }
}
