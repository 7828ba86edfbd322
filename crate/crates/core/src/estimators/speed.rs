//! Law-of-large-numbers estimates: walk speed, the occupied-read rate, and
//! their consistency identity.
//!
//! Per replica one walk runs to the largest grid time; every grid point
//! reads the same trajectory. The identity `v = rho u1 + (1 - rho) u0`
//! is checked through the per-replica gap
//! `w_t/t - (rho_t/n_t) u1 - (1 - rho_t/n_t) u0`, whose confidence interval
//! should cover zero at every grid point.

use serde::{Deserialize, Serialize};

use super::{run_replicas, EnsembleSpec, EstimateReport, EstimatorError, EstimatorOutput};
use crate::harness::RngPolicy;

#[derive(Debug, Clone)]
pub struct SpeedParams {
    pub ensemble: EnsembleSpec,
    /// Ascending observation times; the walk horizon is the last one.
    pub t_grid: Vec<f64>,
    pub replicas: usize,
    pub abort_budget: f64,
    pub level: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedReport {
    pub lambda: f64,
    pub radius: i64,
    pub replicas: usize,
    pub aborted: usize,
    /// Kernel drifts (first coordinate) entering the consistency identity.
    pub u1: f64,
    pub u0: f64,
    pub points: Vec<SpeedPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpeedPoint {
    pub t: f64,
    /// First coordinate of W_t / t.
    pub v_hat: EstimateReport,
    /// rho_t / t.
    pub rho_rate: EstimateReport,
    /// rho_t / N_t, the fraction of jump decisions made on occupied sites.
    pub rho_fraction: EstimateReport,
    /// Per-replica identity gap; consistent when its CI covers zero.
    pub lln_gap: EstimateReport,
    pub lln_consistent: bool,
}

struct Row {
    w1: i64,
    n_jumps: usize,
    rho: u32,
}

pub fn estimate_speed(
    params: &SpeedParams,
    policy: &RngPolicy,
    threads: usize,
) -> Result<EstimatorOutput<SpeedReport>, EstimatorError> {
    assert!(!params.t_grid.is_empty(), "speed needs a t grid");
    let horizon = *params.t_grid.last().unwrap();
    let spec = &params.ensemble;
    let (lattice, window) = spec.lattice(horizon)?;

    let batch = run_replicas(params.replicas, threads, |i| {
        let walk = spec.walk_replica(&lattice, window, horizon, policy, i)?;
        let rows: Vec<Row> = params
            .t_grid
            .iter()
            .map(|&t| Row {
                w1: walk.position_at(t)[0],
                n_jumps: walk.jump_times.partition_point(|&s| s <= t),
                rho: walk.rho_count_at(t),
            })
            .collect();
        Ok(rows)
    });
    batch.enforce_budget(params.abort_budget)?;

    let u1 = spec.kernel.drift(1)[0];
    let u0 = spec.kernel.drift(0)[0];
    let mut points = Vec::with_capacity(params.t_grid.len());
    for (j, &t) in params.t_grid.iter().enumerate() {
        let v: Vec<f64> = batch.values().map(|rows| rows[j].w1 as f64 / t).collect();
        let rho_rate: Vec<f64> = batch.values().map(|rows| rows[j].rho as f64 / t).collect();
        // Replicas with no jumps by time t carry no occupation fraction;
        // they are excluded from the fraction and gap samples.
        let fraction: Vec<f64> = batch
            .values()
            .filter(|rows| rows[j].n_jumps > 0)
            .map(|rows| rows[j].rho as f64 / rows[j].n_jumps as f64)
            .collect();
        let gap: Vec<f64> = batch
            .values()
            .filter(|rows| rows[j].n_jumps > 0)
            .map(|rows| {
                let f = rows[j].rho as f64 / rows[j].n_jumps as f64;
                rows[j].w1 as f64 / t - (f * u1 + (1.0 - f) * u0)
            })
            .collect();
        let lln_gap = EstimateReport::from_sample(format!("lln_gap[t={t}]"), &gap, params.level);
        let lln_consistent = lln_gap.ci.0 <= 0.0 && 0.0 <= lln_gap.ci.1;
        points.push(SpeedPoint {
            t,
            v_hat: EstimateReport::from_sample(format!("v_hat[t={t}]"), &v, params.level),
            rho_rate: EstimateReport::from_sample(
                format!("rho_rate[t={t}]"),
                &rho_rate,
                params.level,
            ),
            rho_fraction: EstimateReport::from_sample(
                format!("rho_fraction[t={t}]"),
                &fraction,
                params.level,
            ),
            lln_gap,
            lln_consistent,
        });
    }

    let csv_rows = batch
        .ok
        .iter()
        .flat_map(|(i, rows)| {
            params.t_grid.iter().zip(rows).map(move |(&t, row)| {
                format!("{i},{t},{},{},{}", row.w1, row.n_jumps, row.rho)
            })
        })
        .collect();

    Ok(EstimatorOutput {
        report: SpeedReport {
            lambda: spec.lambda,
            radius: lattice.radius(),
            replicas: params.replicas,
            aborted: batch.aborted.len(),
            u1,
            u0,
            points,
        },
        csv_header: "replica,t,w1,n_jumps,rho",
        csv_rows,
    })
}
