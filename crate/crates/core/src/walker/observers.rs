//! Observer schemes that let the walk certify occupation it has "earned".
//!
//! Both observers report 1 only at sites genuinely occupied by a process
//! dominated by the environment, so on a shared driver the observed walk's
//! occupation count never exceeds the plain walk's. They also expose the
//! indices of their observation steps; the gaps between those indices are
//! the tau statistics whose finite mean drives the density lower bound.

use rand_chacha::ChaCha8Rng;

use crate::graphical::{ArrowRule, Env, GraphicalRep, SlabSpec};
use crate::lattice::{Configuration, Lattice};
use crate::walker::{Observer, WalkError};

/// Gaps between observation steps: with observation indices k_1 < k_2 < ...
/// (0-based decision indices) the first gap counts from the start of the
/// walk, so tau_1 = k_1 + 1 and tau_j = k_j - k_{j-1} after that.
pub fn taus_from_steps(steps: &[usize]) -> Vec<usize> {
    let mut taus = Vec::with_capacity(steps.len());
    let mut prev = 0usize;
    for (j, &k) in steps.iter().enumerate() {
        if j == 0 {
            taus.push(k + 1);
        } else {
            taus.push(k - prev);
        }
        prev = k;
    }
    taus
}

/// One-dimensional rightmost-front observer.
///
/// It tracks R_k, the rightmost site connected to the region the walk has
/// already certified: a scratch copy of the environment is re-masked to
/// `(-inf, anchor]` at every jump and evolved through the same events as the
/// environment itself. The walk observes (reads the true bit) exactly when
/// it sits at or left of R_k; the anchor then moves to the walk's position,
/// otherwise it stays at R_k.
pub struct RightmostObserver {
    env: Env,
    safe_radius: i64,
    /// R_k at each decision; None once the scratch process has died.
    pub r_path: Vec<Option<i64>>,
    /// Decision indices k with S_k <= R_k.
    pub observation_steps: Vec<usize>,
}

const MAIN: usize = 0;
const SCRATCH: usize = 1;

impl RightmostObserver {
    /// `initial` is the environment's starting configuration; the scratch
    /// process starts from it masked to the non-positive half-line.
    pub fn new(
        rep: &GraphicalRep,
        initial: &Configuration,
        safe_radius: i64,
    ) -> Result<RightmostObserver, WalkError> {
        assert_eq!(rep.lattice().dim(), 1);
        let mut scratch = initial.clone();
        scratch.retain_sites(rep.lattice(), |x| x[0] <= 0);
        let env = Env::from_rep(
            rep,
            0.0,
            vec![initial.clone(), scratch],
            vec![ArrowRule::All, ArrowRule::All],
        )?;
        Ok(RightmostObserver {
            env,
            safe_radius,
            r_path: Vec::new(),
            observation_steps: Vec::new(),
        })
    }

    pub fn taus(&self) -> Vec<usize> {
        taus_from_steps(&self.observation_steps)
    }
}

impl Observer for RightmostObserver {
    fn observe(&mut self, k: usize, t: f64, x: &[i64]) -> Result<bool, WalkError> {
        if x[0].abs() > self.safe_radius {
            return Err(WalkError::LeftSafeRegion { time: t, position: x.to_vec() });
        }
        self.env.advance_to(t)?;
        let r_k = self
            .env
            .config(SCRATCH)
            .max_occupied_index()
            .map(|i| self.env.lattice().x_of_index(i));
        let s_k = x[0];
        let slot = r_k.is_some_and(|r| s_k <= r);
        let site = self
            .env
            .lattice()
            .site_index(x)
            .ok_or_else(|| WalkError::LeftSafeRegion { time: t, position: x.to_vec() })?;
        let f = slot && self.env.config(MAIN).get(site);

        let anchor = if slot { Some(s_k) } else { r_k };
        let mut scratch = self.env.config(MAIN).clone();
        match anchor {
            Some(a) => scratch.retain_sites(self.env.lattice(), |xx| xx[0] <= a),
            None => scratch = Configuration::empty(scratch.n_sites()),
        }
        *self.env.config_mut(SCRATCH) = scratch;

        if slot {
            self.observation_steps.push(k);
        }
        self.r_path.push(r_k);
        Ok(f)
    }
}

/// Slab observer for d >= 2.
///
/// Space is tiled into bands of width 2K along the first axis (optionally
/// tilted: the tiling moves at a constant speed). Each band carries its own
/// truncated process started from the band fully occupied. The walk keeps
/// the label of the leftmost band it has observed; entering a band strictly
/// left of that label is an observation step, at which the walk reads the
/// band's process (for tilted bands only if the walk has been inside the
/// band for the trailing `delta` time units). The label updates whether or
/// not the read happened.
pub struct SlabObserver {
    half_width: i64,
    tilt: f64,
    delta: f64,
    safe_radius: i64,
    r_label: i64,
    aux: AuxState,
    pub observation_steps: Vec<usize>,
}

enum AuxState {
    /// Band processes on the walker's own realization, truncated per band.
    /// They are then dominated by the environment site by site, which is
    /// what the pathwise count comparison tests rely on.
    Shared { env: Env, i_min: i64 },
    /// Independent realizations, one dedicated stream per band index,
    /// generated at the single moment the band is read.
    Independent { lattice: Lattice, lambda: f64, stream_for_band: BandStreams },
}

type BandStreams = Box<dyn FnMut(i64) -> ChaCha8Rng>;

impl SlabObserver {
    /// Auxiliary processes carved out of `rep` itself.
    pub fn shared(
        rep: &GraphicalRep,
        half_width: i64,
        tilt: f64,
        delta: f64,
        safe_radius: i64,
    ) -> Result<SlabObserver, WalkError> {
        assert!(half_width >= 1);
        assert!(delta >= 0.0);
        let (i_min, i_max) = band_range(half_width, tilt, safe_radius, rep.horizon());
        let n_bands = (i_max - i_min + 1) as usize;
        let full = Configuration::full(rep.lattice().n_sites());
        let configs = vec![full; n_bands];
        let rules = (i_min..=i_max)
            .map(|i| ArrowRule::Slab(SlabSpec::new(half_width, i, tilt)))
            .collect();
        let env = Env::from_rep(rep, 0.0, configs, rules)?;
        Ok(SlabObserver::with_aux(half_width, tilt, delta, safe_radius, AuxState::Shared {
            env,
            i_min,
        }))
    }

    /// Auxiliary processes on independent realizations; a band that gets
    /// read is generated from its own stream up to the read time only.
    pub fn independent(
        lattice: &Lattice,
        lambda: f64,
        half_width: i64,
        tilt: f64,
        delta: f64,
        safe_radius: i64,
        stream_for_band: BandStreams,
    ) -> SlabObserver {
        assert!(half_width >= 1);
        assert!(delta >= 0.0);
        SlabObserver::with_aux(half_width, tilt, delta, safe_radius, AuxState::Independent {
            lattice: lattice.clone(),
            lambda,
            stream_for_band,
        })
    }

    fn with_aux(
        half_width: i64,
        tilt: f64,
        delta: f64,
        safe_radius: i64,
        aux: AuxState,
    ) -> SlabObserver {
        SlabObserver {
            half_width,
            tilt,
            delta,
            safe_radius,
            r_label: 1,
            aux,
            observation_steps: Vec::new(),
        }
    }

    pub fn taus(&self) -> Vec<usize> {
        taus_from_steps(&self.observation_steps)
    }

    fn read_band(&mut self, band: i64, t: f64, x: &[i64]) -> Result<bool, WalkError> {
        match &mut self.aux {
            AuxState::Shared { env, i_min } => {
                env.advance_to(t)?;
                let view = (band - *i_min) as usize;
                let site = env
                    .lattice()
                    .site_index(x)
                    .ok_or_else(|| WalkError::LeftSafeRegion { time: t, position: x.to_vec() })?;
                Ok(env.occupied_index(view, site))
            }
            AuxState::Independent { lattice, lambda, stream_for_band } => {
                let spec = SlabSpec::new(self.half_width, band, self.tilt);
                let full = Configuration::full(lattice.n_sites());
                let mut env = Env::live(
                    lattice,
                    *lambda,
                    t,
                    stream_for_band(band),
                    vec![full],
                    vec![ArrowRule::Slab(spec)],
                )?;
                env.advance_to(t)?;
                let site = env
                    .lattice()
                    .site_index(x)
                    .ok_or_else(|| WalkError::LeftSafeRegion { time: t, position: x.to_vec() })?;
                Ok(env.occupied_index(0, site))
            }
        }
    }
}

/// Band indices reachable by a walk confined to `|x1| <= safe_radius` over
/// `[0, horizon]`, with one band of margin on each side.
fn band_range(half_width: i64, tilt: f64, safe_radius: i64, horizon: f64) -> (i64, i64) {
    let lo = SlabSpec::band_index(
        half_width,
        tilt,
        -safe_radius - (tilt.abs() * horizon).ceil() as i64 - 1,
        0.0,
    ) - 1;
    let hi = SlabSpec::band_index(
        half_width,
        tilt,
        safe_radius + (tilt.abs() * horizon).ceil() as i64 + 1,
        0.0,
    ) + 1;
    (lo, hi)
}

impl Observer for SlabObserver {
    fn observe(&mut self, k: usize, t: f64, x: &[i64]) -> Result<bool, WalkError> {
        if x.iter().any(|&c| c.abs() > self.safe_radius) {
            return Err(WalkError::LeftSafeRegion { time: t, position: x.to_vec() });
        }
        let band = SlabSpec::band_index(self.half_width, self.tilt, x[0], t);
        if band >= self.r_label {
            return Ok(false);
        }
        self.observation_steps.push(k);
        self.r_label = band;

        let spec = SlabSpec::new(self.half_width, band, self.tilt);
        let segment_ok = if self.delta > 0.0 {
            t - self.delta >= 0.0
                && spec.contains(x[0], t - self.delta)
                && spec.contains(x[0], t)
        } else {
            true
        };
        if !segment_ok {
            return Ok(false);
        }
        self.read_band(band, t, x)
    }
}
