//! Initial-configuration samplers.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::{ArrowRule, Env, GraphError};
use crate::lattice::{Configuration, Lattice};

/// Independent occupancy with the given density at every site.
pub fn sample_bernoulli(lattice: &Lattice, density: f64, rng: &mut ChaCha8Rng) -> Configuration {
    assert!((0.0..=1.0).contains(&density), "density must lie in [0, 1]");
    let mut config = Configuration::empty(lattice.n_sites());
    for site in 0..lattice.n_sites() {
        if rng.random::<f64>() < density {
            config.set(site, true);
        }
    }
    config
}

/// Approximate sample of the stationary law seen from the fully occupied
/// configuration: run the process from all-occupied for `burn_in` time
/// units on a fresh realization. The realization is streamed, not stored.
pub fn sample_upper_invariant(
    lattice: &Lattice,
    lambda: f64,
    burn_in: f64,
    rng: ChaCha8Rng,
) -> Result<Configuration, GraphError> {
    let full = Configuration::full(lattice.n_sites());
    let mut env = Env::live(lattice, lambda, burn_in, rng, vec![full], vec![ArrowRule::All])?;
    env.advance_to(burn_in)?;
    Ok(env.config(0).clone())
}
