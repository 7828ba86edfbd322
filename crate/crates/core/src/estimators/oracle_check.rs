//! Cross-checks the event sweep against the exhaustive path oracle.
//!
//! Instances are tiny random realizations (a handful of events on a box of
//! radius at most a few sites) where reachability can be decided by brute
//! force over event subsequences. On each instance the sweep's forward
//! evolution, backward evolution, and rightmost-site reading must match the
//! oracle exactly; any disagreement is a bug in one of the two, so the
//! report is only useful when every instance passes.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::graphical::oracle::PathOracle;
use crate::graphical::{dual_evolve, evolve, rightmost, sample_rep};
use crate::harness::RngPolicy;
use crate::lattice::{Boundary, Configuration, Lattice};

use super::{rep_stream, run_replicas, EstimatorError, EstimatorOutput, ReplicaBatch};

#[derive(Debug, Clone)]
pub struct OracleCheckParams {
    pub instances: usize,
    /// Largest realization (event count) the oracle is asked to handle.
    pub max_events: usize,
    /// Box radii are drawn from `1..=max_radius`.
    pub max_radius: i64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct OracleCheckReport {
    pub instances: usize,
    pub total_events: u64,
    pub evolve_failures: usize,
    pub mid_span_failures: usize,
    pub dual_failures: usize,
    pub rightmost_checked: usize,
    pub rightmost_failures: usize,
    pub all_ok: bool,
}

struct Row {
    dim: usize,
    radius: i64,
    n_events: usize,
    evolve_ok: bool,
    mid_ok: bool,
    dual_ok: bool,
    rightmost_ok: Option<bool>,
}

fn random_config(rng: &mut ChaCha8Rng, n_sites: usize) -> Configuration {
    let mut config = Configuration::empty(n_sites);
    for site in 0..n_sites {
        if rng.random::<f64>() < 0.5 {
            config.set(site, true);
        }
    }
    config
}

pub fn run_oracle_check(
    params: &OracleCheckParams,
    policy: &RngPolicy,
    threads: usize,
) -> Result<EstimatorOutput<OracleCheckReport>, EstimatorError> {
    assert!(params.max_radius >= 1);
    assert!(params.max_events >= 1);

    let batch: ReplicaBatch<Row> = run_replicas(params.instances, threads, |i| {
        let mut meta = rep_stream(policy, i);
        let dim = if meta.random::<bool>() { 2 } else { 1 };
        let radius = meta.random_range(1..=params.max_radius);
        let lambda = meta.random_range(0.5..3.0);
        let target = meta.random_range(1..=params.max_events) as f64;
        let lattice = Lattice::new(dim, radius, Boundary::Truncate)?;

        // Pick the horizon so the expected event count hits the target, then
        // redraw until the realized count is within the oracle's reach.
        let rate = lattice.n_sites() as f64 * (1.0 + 2.0 * dim as f64 * lambda);
        let horizon = target / rate;
        let mut rep = None;
        for _ in 0..500 {
            let seed = meta.random::<u64>();
            let candidate =
                sample_rep(&lattice, lambda, horizon, ChaCha8Rng::seed_from_u64(seed))?;
            if candidate.n_events() <= params.max_events {
                rep = Some(candidate);
                break;
            }
        }
        let rep = rep.ok_or_else(|| {
            EstimatorError::Abort("no realization small enough for the oracle".into())
        })?;
        let oracle = PathOracle::new(&rep);

        let initial = random_config(&mut meta, lattice.n_sites());
        let targets = random_config(&mut meta, lattice.n_sites());

        let evolve_ok =
            evolve(&rep, &initial, 0.0, horizon)? == oracle.evolve(&initial, 0.0, horizon);
        let (t0, t1) = (0.3 * horizon, 0.9 * horizon);
        let mid_ok = evolve(&rep, &initial, t0, t1)? == oracle.evolve(&initial, t0, t1);
        let s = meta.random_range(0.0..horizon);
        let dual_ok = dual_evolve(&rep, &targets, horizon, s)? == oracle.dual(&targets, horizon, s);

        let rightmost_ok = if dim == 1 {
            let z = meta.random_range(-radius..=radius);
            let u = meta.random_range(0.0..horizon);
            let sweep = rightmost(&rep, &initial, z, u, horizon)?;
            let mut masked = initial.clone();
            masked.retain_sites(&lattice, |x| x[0] <= z);
            let expected = oracle
                .evolve(&masked, u, horizon)
                .max_occupied_index()
                .map(|idx| lattice.x_of_index(idx));
            Some(sweep == expected)
        } else {
            None
        };

        Ok(Row {
            dim,
            radius,
            n_events: rep.n_events(),
            evolve_ok,
            mid_ok,
            dual_ok,
            rightmost_ok,
        })
    });
    batch.enforce_budget(0.0)?;

    let rows: Vec<&Row> = batch.values().collect();
    let evolve_failures = rows.iter().filter(|r| !r.evolve_ok).count();
    let mid_span_failures = rows.iter().filter(|r| !r.mid_ok).count();
    let dual_failures = rows.iter().filter(|r| !r.dual_ok).count();
    let rightmost_checked = rows.iter().filter(|r| r.rightmost_ok.is_some()).count();
    let rightmost_failures =
        rows.iter().filter(|r| r.rightmost_ok == Some(false)).count();
    let total_events = rows.iter().map(|r| r.n_events as u64).sum();

    let csv_rows = batch
        .ok
        .iter()
        .map(|(i, row)| {
            let rm = match row.rightmost_ok {
                Some(true) => 1,
                Some(false) => 0,
                None => -1,
            };
            format!(
                "{i},{},{},{},{},{},{},{rm}",
                row.dim,
                row.radius,
                row.n_events,
                u8::from(row.evolve_ok),
                u8::from(row.mid_ok),
                u8::from(row.dual_ok),
            )
        })
        .collect();

    Ok(EstimatorOutput {
        report: OracleCheckReport {
            instances: params.instances,
            total_events,
            evolve_failures,
            mid_span_failures,
            dual_failures,
            rightmost_checked,
            rightmost_failures,
            all_ok: evolve_failures + mid_span_failures + dual_failures + rightmost_failures == 0,
        },
        csv_header: "instance,dim,radius,n_events,evolve_ok,mid_ok,dual_ok,rightmost_ok",
        csv_rows,
    })
}
