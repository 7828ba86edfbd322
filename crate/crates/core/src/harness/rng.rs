//! Labeled random-number streams.
//!
//! Every random draw in an experiment comes from a stream addressed by
//! (master seed, experiment name, replica index, role). The seed of each
//! stream is a SHA-256 hash of that address, so streams are reproducible
//! from the config alone, independent replicas never share a stream, and
//! adding replicas or roles never perturbs existing ones.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

use crate::walker::DriverStreams;

/// The independent randomness sources a replica can request.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StreamRole {
    /// Graphical representation of the environment.
    Rep,
    /// Walker jump times.
    Jumps,
    /// Jump decisions at occupied sites.
    Occupied,
    /// Jump decisions at vacant sites.
    Vacant,
    /// Shared decision sequence for the single-uniform walk variant.
    Shared,
    /// Auxiliary environment copy attached to slab `i` of an observer.
    ObserverAux(i64),
    /// Arrow thinning marks (only used when a rep is built without one).
    Thin,
    /// Equilibration sweep for upper-invariant initial conditions.
    BurnIn,
    /// Initial configuration sampling.
    Initial,
}

impl StreamRole {
    fn label(&self) -> String {
        match self {
            StreamRole::Rep => "rep".into(),
            StreamRole::Jumps => "jumps".into(),
            StreamRole::Occupied => "O".into(),
            StreamRole::Vacant => "V".into(),
            StreamRole::Shared => "U".into(),
            StreamRole::ObserverAux(i) => format!("observer-aux-{i}"),
            StreamRole::Thin => "thin".into(),
            StreamRole::BurnIn => "burn-in".into(),
            StreamRole::Initial => "initial".into(),
        }
    }
}

/// Pure derivation of per-replica, per-role RNG streams from a master seed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RngPolicy {
    master_seed: u64,
    experiment: String,
}

impl RngPolicy {
    pub fn new(master_seed: u64, experiment: &str) -> RngPolicy {
        RngPolicy { master_seed, experiment: experiment.to_string() }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn experiment(&self) -> &str {
        &self.experiment
    }

    /// A fresh generator for the given replica and role. The address parts
    /// are hashed with separators so that no two distinct addresses can
    /// collide by concatenation.
    pub fn stream(&self, replica: u64, role: StreamRole) -> ChaCha8Rng {
        let mut hasher = Sha256::new();
        hasher.update(self.master_seed.to_le_bytes());
        hasher.update([0u8]);
        hasher.update(self.experiment.as_bytes());
        hasher.update([0u8]);
        hasher.update(replica.to_le_bytes());
        hasher.update([0u8]);
        hasher.update(role.label().as_bytes());
        ChaCha8Rng::from_seed(hasher.finalize().into())
    }

    /// The four walker-driver streams of one replica.
    pub fn driver_streams(&self, replica: u64) -> DriverStreams {
        DriverStreams {
            jumps: self.stream(replica, StreamRole::Jumps),
            occupied: self.stream(replica, StreamRole::Occupied),
            vacant: self.stream(replica, StreamRole::Vacant),
            shared: self.stream(replica, StreamRole::Shared),
        }
    }

    /// Policy for a named sub-experiment (e.g. a pilot or a grid point that
    /// needs its own replica numbering).
    pub fn scoped(&self, suffix: &str) -> RngPolicy {
        RngPolicy {
            master_seed: self.master_seed,
            experiment: format!("{}/{}", self.experiment, suffix),
        }
    }
}
