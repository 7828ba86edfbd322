//! Lower bound on the walker's observed occupation density.
//!
//! Each replica runs the walk twice on one realization and one driver: once
//! with an observer (rightmost-particle label in d = 1, moving slabs in any
//! dimension) and once reading the environment directly. The observer only
//! reports occupied when its own dominated process is occupied, so the
//! observed count must stay below the plain count decision by decision; the
//! report tallies violations of that ordering along with the density
//! estimate and the statistics of the gaps between observations.

use serde::{Deserialize, Serialize};

use crate::graphical::{sample_rep, ArrowRule, Env};
use crate::harness::{ObserverKind, RngPolicy, StreamRole};
use crate::walker::{
    run_walk, run_walk_general, sample_driver, ContactEnv, RightmostObserver, SlabObserver,
};

use super::{
    initial_config, rep_stream, run_replicas, EstimateReport, EstimatorError, EstimatorOutput,
    EnsembleSpec, ReplicaBatch,
};

/// Gap values above this land in the histogram's overflow bucket.
const TAU_HISTOGRAM_MAX: usize = 32;

#[derive(Debug, Clone)]
pub struct DensityLbParams {
    pub ensemble: EnsembleSpec,
    pub observer: ObserverKind,
    pub horizon: f64,
    /// Slab half-width; ignored by the rightmost observer.
    pub half_width: i64,
    /// Slab drift per unit time; ignored by the rightmost observer.
    pub tilt: f64,
    /// Extra clearance subtracted from the slab membership test.
    pub delta: f64,
    /// Carve the slab processes out of the walker's own realization instead
    /// of sampling them independently per band.
    pub shared_bands: bool,
    pub replicas: usize,
    pub abort_budget: f64,
    pub level: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DensityLbReport {
    pub lambda: f64,
    pub radius: i64,
    pub observer: ObserverKind,
    pub shared_bands: bool,
    pub horizon: f64,
    pub replicas: usize,
    pub aborted: usize,
    /// Replicas where some prefix of the observed count exceeded the plain
    /// count on the shared driver.
    pub domination_violations: usize,
    /// Mean observed count over decisions, `rho_obs(n) / n`.
    pub density: EstimateReport,
    /// Same ratio for the direct environment read.
    pub plain_density: EstimateReport,
    /// Per-replica mean gap between consecutive observations.
    pub mean_tau: EstimateReport,
    /// Pooled gap counts: entry `j < 32` counts gaps equal to `j + 1`, the
    /// last entry counts everything larger.
    pub tau_histogram: Vec<u64>,
}

struct Row {
    n_jumps: usize,
    rho_obs: u32,
    rho_plain: u32,
    dominated: bool,
    taus: Vec<usize>,
}

pub fn estimate_density_lb(
    params: &DensityLbParams,
    policy: &RngPolicy,
    threads: usize,
) -> Result<EstimatorOutput<DensityLbReport>, EstimatorError> {
    let spec = &params.ensemble;
    if params.observer == ObserverKind::Rightmost {
        assert_eq!(spec.kernel.dim(), 1, "the rightmost observer needs d = 1");
    }
    let (lattice, window) = spec.lattice(params.horizon)?;
    let radius = lattice.radius();

    let batch: ReplicaBatch<Row> = run_replicas(params.replicas, threads, |i| {
        let initial =
            initial_config(&lattice, spec.initial, spec.lambda, spec.burn_in, policy, i)?;
        let rep = sample_rep(&lattice, spec.lambda, params.horizon, rep_stream(policy, i))?;
        let driver = sample_driver(spec.gamma, params.horizon, policy.driver_streams(i));

        let (observed, taus) = match params.observer {
            ObserverKind::Rightmost => {
                let mut obs = RightmostObserver::new(&rep, &initial, window)?;
                let walk = run_walk_general(&spec.kernel, &driver, &mut obs)?;
                (walk, obs.taus())
            }
            ObserverKind::Slab => {
                let mut obs = if params.shared_bands {
                    SlabObserver::shared(
                        &rep,
                        params.half_width,
                        params.tilt,
                        params.delta,
                        window,
                    )?
                } else {
                    let band_policy = policy.clone();
                    SlabObserver::independent(
                        &lattice,
                        spec.lambda,
                        params.half_width,
                        params.tilt,
                        params.delta,
                        window,
                        Box::new(move |band| {
                            band_policy.stream(i, StreamRole::ObserverAux(band))
                        }),
                    )
                };
                let walk = run_walk_general(&spec.kernel, &driver, &mut obs)?;
                (walk, obs.taus())
            }
        };

        let env = Env::from_rep(&rep, 0.0, vec![initial], vec![ArrowRule::All])?;
        let plain = run_walk(&spec.kernel, &driver, &mut ContactEnv::new(env, window))?;

        let dominated = observed
            .rho
            .iter()
            .zip(plain.rho.iter())
            .all(|(obs, plain)| obs <= plain);
        Ok(Row {
            n_jumps: plain.n_jumps(),
            rho_obs: observed.rho_end_count(),
            rho_plain: plain.rho_end_count(),
            dominated,
            taus,
        })
    });
    batch.enforce_budget(params.abort_budget)?;

    let aborted = batch.aborted.len();
    let rows: Vec<&Row> = batch.values().collect();
    let domination_violations = rows.iter().filter(|row| !row.dominated).count();

    let density_of = |count: u32, n: usize| f64::from(count) / n as f64;
    let densities: Vec<f64> = rows
        .iter()
        .filter(|row| row.n_jumps > 0)
        .map(|row| density_of(row.rho_obs, row.n_jumps))
        .collect();
    let plain_densities: Vec<f64> = rows
        .iter()
        .filter(|row| row.n_jumps > 0)
        .map(|row| density_of(row.rho_plain, row.n_jumps))
        .collect();
    let mean_taus: Vec<f64> = rows
        .iter()
        .filter(|row| !row.taus.is_empty())
        .map(|row| row.taus.iter().sum::<usize>() as f64 / row.taus.len() as f64)
        .collect();

    let mut tau_histogram = vec![0u64; TAU_HISTOGRAM_MAX + 1];
    for row in &rows {
        for &tau in &row.taus {
            let bucket = if tau <= TAU_HISTOGRAM_MAX { tau - 1 } else { TAU_HISTOGRAM_MAX };
            tau_histogram[bucket] += 1;
        }
    }

    let csv_rows = batch
        .ok
        .iter()
        .map(|(i, row)| {
            let mean_tau = if row.taus.is_empty() {
                f64::NAN
            } else {
                row.taus.iter().sum::<usize>() as f64 / row.taus.len() as f64
            };
            format!(
                "{i},{},{},{},{},{mean_tau}",
                row.n_jumps,
                row.rho_plain,
                row.rho_obs,
                row.taus.len(),
            )
        })
        .collect();

    Ok(EstimatorOutput {
        report: DensityLbReport {
            lambda: spec.lambda,
            radius,
            observer: params.observer,
            shared_bands: params.shared_bands,
            horizon: params.horizon,
            replicas: params.replicas,
            aborted,
            domination_violations,
            density: EstimateReport::from_sample("density_lb", &densities, params.level),
            plain_density: EstimateReport::from_sample(
                "plain_density",
                &plain_densities,
                params.level,
            ),
            mean_tau: EstimateReport::from_sample("mean_tau", &mean_taus, params.level),
            tau_histogram,
        },
        csv_header: "replica,n_jumps,rho_plain,rho_observed,n_observations,mean_tau",
        csv_rows,
    })
}
