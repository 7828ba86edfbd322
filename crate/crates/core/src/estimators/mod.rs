//! Monte Carlo experiments over replica ensembles.
//!
//! Each estimator runs independent replicas (fanned out over a thread pool,
//! aggregated in replica order so results do not depend on scheduling),
//! checks its pathwise invariants on every replica, and reports point
//! estimates with confidence intervals plus per-replica CSV rows.

pub mod conemix;
pub mod coupling;
pub mod density_lb;
pub mod edge;
pub mod oracle_check;
pub mod rho_curve;
pub mod slab_survival;
pub mod speed;
pub mod subadd;
pub mod tails;

use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::graphical::{
    safe_radius, sample_bernoulli, sample_upper_invariant, ArrowRule, Env, GraphError,
};
use crate::harness::{InitialLaw, RngPolicy, StreamRole};
use crate::kernel::KernelSpec;
use crate::lattice::{Boundary, Configuration, Lattice, LatticeError};
use crate::stats::SampleStats;
use crate::walker::{run_walk, sample_driver, ContactEnv, WalkError, WalkResult};

#[derive(Debug, Error)]
pub enum EstimatorError {
    #[error("{aborted} of {total} replicas aborted, over the budget of {budget}")]
    AbortBudget { aborted: usize, total: usize, budget: f64 },
    #[error("inconclusive tail fit: {0}")]
    InconclusiveFit(String),
    #[error("replica aborted: {0}")]
    Abort(String),
    #[error(transparent)]
    Walk(#[from] WalkError),
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
}

/// A scalar Monte Carlo estimate with its uncertainty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub quantity: String,
    pub estimate: f64,
    pub se: f64,
    pub n: usize,
    pub level: f64,
    pub ci: (f64, f64),
}

impl EstimateReport {
    /// Normal-theory estimate from a sample of replica values.
    pub fn from_sample(quantity: impl Into<String>, xs: &[f64], level: f64) -> EstimateReport {
        let stats = SampleStats::from_sample(xs);
        EstimateReport {
            quantity: quantity.into(),
            estimate: stats.mean,
            se: stats.se,
            n: stats.n,
            level,
            ci: stats.ci(level),
        }
    }

    /// Wilson-interval estimate for a binomial proportion.
    pub fn from_binomial(
        quantity: impl Into<String>,
        successes: usize,
        trials: usize,
        level: f64,
    ) -> EstimateReport {
        let p = successes as f64 / trials as f64;
        EstimateReport {
            quantity: quantity.into(),
            estimate: p,
            se: (p * (1.0 - p) / trials as f64).sqrt(),
            n: trials,
            level,
            ci: crate::stats::wilson_interval(successes, trials, level),
        }
    }
}

/// Report body plus the per-replica CSV that backs it.
#[derive(Debug, Clone)]
pub struct EstimatorOutput<R> {
    pub report: R,
    pub csv_header: &'static str,
    pub csv_rows: Vec<String>,
}

/// Outcome of a replica fan-out: successes in replica order, aborts with
/// their reasons.
#[derive(Debug)]
pub struct ReplicaBatch<T> {
    pub ok: Vec<(u64, T)>,
    pub aborted: Vec<(u64, String)>,
}

impl<T> ReplicaBatch<T> {
    /// Fails the run when aborts exceed the budget fraction.
    pub fn enforce_budget(&self, budget: f64) -> Result<(), EstimatorError> {
        let total = self.ok.len() + self.aborted.len();
        if self.aborted.len() as f64 > budget * total as f64 {
            return Err(EstimatorError::AbortBudget {
                aborted: self.aborted.len(),
                total,
                budget,
            });
        }
        Ok(())
    }

    pub fn values(&self) -> impl Iterator<Item = &T> {
        self.ok.iter().map(|(_, v)| v)
    }
}

/// Runs `f` over replica indices `0..n` on a pool of `threads` workers.
/// Results come back sorted by replica index, so aggregates are independent
/// of worker count and scheduling.
pub fn run_replicas<T, F>(n: usize, threads: usize, f: F) -> ReplicaBatch<T>
where
    T: Send,
    F: Fn(u64) -> Result<T, EstimatorError> + Sync,
{
    use rayon::prelude::*;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .expect("thread pool construction cannot fail with positive size");
    let results: Vec<(u64, Result<T, EstimatorError>)> =
        pool.install(|| (0..n as u64).into_par_iter().map(|i| (i, f(i))).collect());

    let mut ok = Vec::with_capacity(n);
    let mut aborted = Vec::new();
    for (i, r) in results {
        match r {
            Ok(v) => ok.push((i, v)),
            Err(e) => aborted.push((i, e.to_string())),
        }
    }
    ReplicaBatch { ok, aborted }
}

/// Radius of the region a rate-`gamma` walk can plausibly reach by `horizon`:
/// the mean displacement bound plus six standard deviations and slack. Walks
/// that leave it abort and count against the abort budget.
pub fn walker_window(gamma: f64, horizon: f64, max_range: i64) -> i64 {
    let mean = gamma * horizon;
    (max_range as f64 * (mean + 6.0 * mean.sqrt())).ceil() as i64 + 10
}

/// Draws an initial environment configuration for one replica.
pub fn initial_config(
    lattice: &Lattice,
    law: InitialLaw,
    lambda: f64,
    burn_in: f64,
    policy: &RngPolicy,
    replica: u64,
) -> Result<Configuration, EstimatorError> {
    Ok(match law {
        InitialLaw::Zeros => Configuration::empty(lattice.n_sites()),
        InitialLaw::Ones => Configuration::full(lattice.n_sites()),
        InitialLaw::Bernoulli(p) => {
            sample_bernoulli(lattice, p, &mut policy.stream(replica, StreamRole::Initial))
        }
        InitialLaw::UpperInvariant => sample_upper_invariant(
            lattice,
            lambda,
            burn_in,
            policy.stream(replica, StreamRole::BurnIn),
        )?,
    })
}

pub(crate) fn rep_stream(policy: &RngPolicy, replica: u64) -> ChaCha8Rng {
    policy.stream(replica, StreamRole::Rep)
}

/// Everything needed to run walk replicas in a contact environment: the
/// kernel, the environment law, and the box-sizing policy.
#[derive(Debug, Clone)]
pub struct EnsembleSpec {
    pub kernel: KernelSpec,
    pub lambda: f64,
    pub boundary: Boundary,
    pub initial: InitialLaw,
    pub burn_in: f64,
    pub gamma: f64,
    pub pad: f64,
    /// Explicit box radius; `None` applies the safety rule to the walker's
    /// reachable window.
    pub radius: Option<i64>,
}

impl EnsembleSpec {
    /// The box for a run of length `horizon`, together with the walker
    /// fence radius inside it.
    pub fn lattice(&self, horizon: f64) -> Result<(Lattice, i64), EstimatorError> {
        let window = walker_window(self.gamma, horizon, self.kernel.max_range());
        let radius =
            self.radius.unwrap_or_else(|| safe_radius(window, self.lambda, horizon, self.pad));
        let lattice = Lattice::new(self.kernel.dim(), radius, self.boundary)?;
        Ok((lattice, window.min(radius)))
    }

    /// One replica: initial configuration, driver, streamed environment,
    /// and the walk over `[0, horizon]`.
    pub fn walk_replica(
        &self,
        lattice: &Lattice,
        window: i64,
        horizon: f64,
        policy: &RngPolicy,
        replica: u64,
    ) -> Result<WalkResult, EstimatorError> {
        let initial =
            initial_config(lattice, self.initial, self.lambda, self.burn_in, policy, replica)?;
        let driver = sample_driver(self.gamma, horizon, policy.driver_streams(replica));
        let env = Env::live(
            lattice,
            self.lambda,
            horizon,
            rep_stream(policy, replica),
            vec![initial],
            vec![ArrowRule::All],
        )?;
        Ok(run_walk(&self.kernel, &driver, &mut ContactEnv::new(env, window))?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn replica_fanout_is_order_stable_across_thread_counts() {
        let f = |i: u64| -> Result<u64, EstimatorError> {
            if i % 7 == 3 {
                Err(EstimatorError::InconclusiveFit(format!("replica {i}")))
            } else {
                Ok(i * i)
            }
        };
        let one = run_replicas(40, 1, f);
        let four = run_replicas(40, 4, f);
        assert_eq!(one.ok, four.ok);
        assert_eq!(one.aborted, four.aborted);
        assert!(one.ok.windows(2).all(|w| w[0].0 < w[1].0));
    }

    #[test]
    fn abort_budget_is_enforced() {
        let batch = run_replicas(100, 2, |i| -> Result<(), EstimatorError> {
            if i < 3 {
                Err(EstimatorError::InconclusiveFit("x".into()))
            } else {
                Ok(())
            }
        });
        assert!(batch.enforce_budget(0.05).is_ok());
        assert!(matches!(
            batch.enforce_budget(0.01),
            Err(EstimatorError::AbortBudget { aborted: 3, total: 100, .. })
        ));
    }

    #[test]
    fn estimate_report_invariants() {
        let r = EstimateReport::from_sample("demo", &[1.0, 2.0, 3.0, 4.0, 5.0], 0.95);
        assert!(r.ci.0 <= r.estimate && r.estimate <= r.ci.1);
        assert_eq!(r.n, 5);

        let b = EstimateReport::from_binomial("frac", 30, 100, 0.95);
        assert!(b.ci.0 <= b.estimate && b.estimate <= b.ci.1);
        assert!(b.ci.0 > 0.0 && b.ci.1 < 1.0);
    }

    #[test]
    fn window_formula_tracks_mean_plus_spread() {
        assert_eq!(walker_window(2.0, 100.0, 1), (200.0f64 + 6.0 * 200.0f64.sqrt()).ceil() as i64 + 10);
        assert!(walker_window(2.0, 100.0, 3) > 3 * walker_window(2.0, 100.0, 1) - 40);
    }
}
