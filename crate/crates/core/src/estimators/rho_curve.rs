//! Occupied-fraction curve across a grid of infection rates.
//!
//! Every replica samples one environment realization at the largest rate on
//! the grid and derives the others from it by thinning arrows, so the
//! configurations are nested pathwise and the fraction of jump decisions
//! taken at occupied sites is non-decreasing along the grid, realization by
//! realization. The report counts violations of that ordering (there should
//! be none) next to the per-rate estimates.

use serde::{Deserialize, Serialize};

use crate::graphical::{sample_rep, ArrowRule, Env};
use crate::harness::RngPolicy;
use crate::walker::{run_walk, sample_driver, ContactEnv};

use super::{
    initial_config, rep_stream, run_replicas, EstimateReport, EstimatorError, EstimatorOutput,
    EnsembleSpec, ReplicaBatch,
};

#[derive(Debug, Clone)]
pub struct RhoCurveParams {
    /// Ensemble template; its `lambda` is replaced by the largest grid rate
    /// when sizing the box and sampling the parent realization.
    pub ensemble: EnsembleSpec,
    /// Infection rates, strictly increasing.
    pub lambda_grid: Vec<f64>,
    /// Observation time for every rate.
    pub t: f64,
    pub replicas: usize,
    pub abort_budget: f64,
    pub level: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RhoCurvePoint {
    pub lambda: f64,
    /// Fraction of jump decisions read from occupied sites, averaged over
    /// replicas with at least one jump.
    pub rho_fraction: EstimateReport,
    /// Occupied-decision count divided by the observation time.
    pub rho_rate: EstimateReport,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RhoCurveReport {
    pub t: f64,
    pub radius: i64,
    pub replicas: usize,
    pub aborted: usize,
    /// Replicas where some pair of adjacent rates had decreasing counts.
    pub monotonicity_violations: usize,
    pub points: Vec<RhoCurvePoint>,
}

struct Row {
    counts: Vec<u32>,
    n_jumps: usize,
}

pub fn estimate_rho_curve(
    params: &RhoCurveParams,
    policy: &RngPolicy,
    threads: usize,
) -> Result<EstimatorOutput<RhoCurveReport>, EstimatorError> {
    assert!(!params.lambda_grid.is_empty(), "empty rate grid");
    assert!(
        params.lambda_grid.windows(2).all(|w| w[0] < w[1]),
        "rate grid must be strictly increasing"
    );

    let lambda_max = *params.lambda_grid.last().unwrap();
    let mut spec = params.ensemble.clone();
    spec.lambda = lambda_max;

    let (lattice, window) = spec.lattice(params.t)?;
    let radius = lattice.radius();
    let grid = params.lambda_grid.clone();

    let batch: ReplicaBatch<Row> = run_replicas(params.replicas, threads, |i| {
        let initial = initial_config(&lattice, spec.initial, lambda_max, spec.burn_in, policy, i)?;
        let parent = sample_rep(&lattice, lambda_max, params.t, rep_stream(policy, i))?;
        let driver = sample_driver(spec.gamma, params.t, policy.driver_streams(i));

        let mut counts = Vec::with_capacity(grid.len());
        let mut n_jumps = 0;
        for &lambda in &grid {
            let child = parent.thin(lambda)?;
            let env = Env::from_rep(&child, 0.0, vec![initial.clone()], vec![ArrowRule::All])?;
            let walk = run_walk(
                &spec.kernel,
                &driver,
                &mut ContactEnv::new(env, window),
            )?;
            counts.push(walk.rho_end_count());
            n_jumps = walk.n_jumps();
        }
        Ok(Row { counts, n_jumps })
    });
    batch.enforce_budget(params.abort_budget)?;

    let aborted = batch.aborted.len();
    let rows: Vec<&Row> = batch.values().collect();

    let monotonicity_violations = rows
        .iter()
        .filter(|row| row.counts.windows(2).any(|w| w[0] > w[1]))
        .count();

    let points = grid
        .iter()
        .enumerate()
        .map(|(j, &lambda)| {
            let fractions: Vec<f64> = rows
                .iter()
                .filter(|row| row.n_jumps > 0)
                .map(|row| f64::from(row.counts[j]) / row.n_jumps as f64)
                .collect();
            let rates: Vec<f64> = rows
                .iter()
                .map(|row| f64::from(row.counts[j]) / params.t)
                .collect();
            RhoCurvePoint {
                lambda,
                rho_fraction: EstimateReport::from_sample(
                    format!("rho_fraction(lambda={lambda})"),
                    &fractions,
                    params.level,
                ),
                rho_rate: EstimateReport::from_sample(
                    format!("rho_rate(lambda={lambda})"),
                    &rates,
                    params.level,
                ),
            }
        })
        .collect();

    let mut csv_rows = Vec::new();
    for (i, row) in &batch.ok {
        for (j, &lambda) in grid.iter().enumerate() {
            csv_rows.push(format!(
                "{i},{lambda},{},{}",
                row.counts[j], row.n_jumps
            ));
        }
    }

    Ok(EstimatorOutput {
        report: RhoCurveReport {
            t: params.t,
            radius,
            replicas: params.replicas,
            aborted,
            monotonicity_violations,
            points,
        },
        csv_header: "replica,lambda,rho,n_jumps",
        csv_rows,
    })
}
