//! Moving bands of first-coordinate values.
//!
//! The band with index `i`, half-width `K` and tilt `l` covers, at time `t`,
//! all sites whose first coordinate lies in `[2Ki - K + lt, 2Ki + K + lt]`.
//! Consecutive indices tile the axis; shared edge points belong to the
//! lower-indexed band when a unique owner is needed.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlabSpec {
    pub half_width: i64,
    pub index: i64,
    pub tilt: f64,
}

impl SlabSpec {
    pub fn new(half_width: i64, index: i64, tilt: f64) -> SlabSpec {
        assert!(half_width >= 1, "band half-width must be at least 1");
        assert!(tilt.is_finite());
        SlabSpec { half_width, index, tilt }
    }

    pub fn center(&self, t: f64) -> f64 {
        (2 * self.half_width * self.index) as f64 + self.tilt * t
    }

    /// Closed-interval membership at time `t`.
    pub fn contains(&self, x1: i64, t: f64) -> bool {
        (x1 as f64 - self.center(t)).abs() <= self.half_width as f64
    }

    /// Index of the band owning `x1` at time `t`, under the tie-to-lower
    /// convention for points on a shared edge.
    pub fn band_index(half_width: i64, tilt: f64, x1: i64, t: f64) -> i64 {
        let k = half_width as f64;
        let u = x1 as f64 - tilt * t;
        let q = (u + k) / (2.0 * k);
        let f = q.floor();
        let i = if q == f { f - 1.0 } else { f };
        i as i64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn static_band_membership() {
        let s = SlabSpec::new(10, 0, 0.0);
        assert!(s.contains(0, 5.0));
        assert!(s.contains(10, 5.0));
        assert!(s.contains(-10, 5.0));
        assert!(!s.contains(11, 5.0));

        let s1 = SlabSpec::new(10, 1, 0.0);
        assert!(s1.contains(10, 0.0));
        assert!(s1.contains(30, 0.0));
        assert!(!s1.contains(31, 0.0));
    }

    #[test]
    fn tilted_band_moves() {
        let s = SlabSpec::new(10, 0, 0.5);
        assert!(s.contains(10, 0.0));
        assert!(!s.contains(11, 0.0));
        assert!(s.contains(11, 2.0));
        assert!(!s.contains(-10, 2.0));
        assert!(s.contains(-9, 2.0));
    }

    #[test]
    fn partition_assigns_every_point_once() {
        for x1 in -35..=35 {
            let i = SlabSpec::band_index(10, 0.0, x1, 0.0);
            assert!(
                SlabSpec::new(10, i, 0.0).contains(x1, 0.0),
                "x1={x1} claims band {i} but is not inside"
            );
        }
        // Shared edges go to the lower band.
        assert_eq!(SlabSpec::band_index(10, 0.0, 10, 0.0), 0);
        assert_eq!(SlabSpec::band_index(10, 0.0, -10, 0.0), -1);
        assert_eq!(SlabSpec::band_index(10, 0.0, 30, 0.0), 1);
        assert_eq!(SlabSpec::band_index(10, 0.0, 11, 0.0), 1);
        assert_eq!(SlabSpec::band_index(10, 0.0, 0, 0.0), 0);
        assert_eq!(SlabSpec::band_index(10, 0.0, -11, 0.0), -1);
    }

    #[test]
    fn tilted_partition_tracks_center() {
        // At t=4 with tilt 0.5 the bands have moved right by 2.
        assert_eq!(SlabSpec::band_index(10, 0.5, 12, 4.0), 0);
        assert_eq!(SlabSpec::band_index(10, 0.5, 13, 4.0), 1);
        assert_eq!(SlabSpec::band_index(10, 0.5, 12, 0.0), 1);
    }
}
