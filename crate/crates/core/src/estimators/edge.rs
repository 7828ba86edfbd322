//! Speed of the rightmost occupied site started from a half-line initial
//! condition (one dimension only).
//!
//! The initial law is sampled and then cut to `x <= 0`, so the front starts
//! at the origin. Each grid time reads `r_t`, the largest occupied
//! coordinate, from the same streamed realization; the per-time speed
//! estimate is `r_t / t`.

use serde::{Deserialize, Serialize};

use super::{
    initial_config, rep_stream, run_replicas, EnsembleSpec, EstimateReport, EstimatorError,
    EstimatorOutput,
};
use crate::graphical::{safe_radius, ArrowRule, Env};
use crate::harness::RngPolicy;
use crate::lattice::Lattice;

#[derive(Debug, Clone)]
pub struct EdgeParams {
    pub ensemble: EnsembleSpec,
    /// Ascending observation times.
    pub t_grid: Vec<f64>,
    pub replicas: usize,
    pub abort_budget: f64,
    pub level: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeReport {
    pub lambda: f64,
    pub radius: i64,
    pub replicas: usize,
    pub aborted: usize,
    pub points: Vec<EdgePoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgePoint {
    pub t: f64,
    /// Mean of r_t over replicas.
    pub r_mean: EstimateReport,
    /// r_t / t.
    pub alpha_hat: EstimateReport,
}

pub fn estimate_edge(
    params: &EdgeParams,
    policy: &RngPolicy,
    threads: usize,
) -> Result<EstimatorOutput<EdgeReport>, EstimatorError> {
    assert!(!params.t_grid.is_empty(), "edge needs a t grid");
    let spec = &params.ensemble;
    assert_eq!(spec.kernel.dim(), 1, "the edge process is one-dimensional");
    let horizon = *params.t_grid.last().unwrap();
    let radius = spec
        .radius
        .unwrap_or_else(|| safe_radius(0, spec.lambda, horizon, spec.pad));
    let lattice = Lattice::new(1, radius, spec.boundary)?;

    let batch = run_replicas(params.replicas, threads, |i| {
        let mut initial =
            initial_config(&lattice, spec.initial, spec.lambda, spec.burn_in, policy, i)?;
        initial.retain_sites(&lattice, |x| x[0] <= 0);
        let mut env = Env::live(
            &lattice,
            spec.lambda,
            horizon,
            rep_stream(policy, i),
            vec![initial],
            vec![ArrowRule::All],
        )?;
        let mut fronts = Vec::with_capacity(params.t_grid.len());
        for &t in &params.t_grid {
            env.advance_to(t)?;
            match env.config(0).max_occupied_index() {
                Some(idx) => fronts.push(lattice.x_of_index(idx)),
                None => return Err(EstimatorError::Abort(format!("process died by t = {t}"))),
            }
        }
        Ok(fronts)
    });
    batch.enforce_budget(params.abort_budget)?;

    let points = params
        .t_grid
        .iter()
        .enumerate()
        .map(|(j, &t)| {
            let r: Vec<f64> = batch.values().map(|fronts| fronts[j] as f64).collect();
            let alpha: Vec<f64> = r.iter().map(|&x| x / t).collect();
            EdgePoint {
                t,
                r_mean: EstimateReport::from_sample(format!("r[t={t}]"), &r, params.level),
                alpha_hat: EstimateReport::from_sample(
                    format!("alpha_hat[t={t}]"),
                    &alpha,
                    params.level,
                ),
            }
        })
        .collect();

    let csv_rows = batch
        .ok
        .iter()
        .flat_map(|(i, fronts)| {
            params
                .t_grid
                .iter()
                .zip(fronts)
                .map(move |(&t, &r)| format!("{i},{t},{r}"))
        })
        .collect();

    Ok(EstimatorOutput {
        report: EdgeReport {
            lambda: spec.lambda,
            radius,
            replicas: params.replicas,
            aborted: batch.aborted.len(),
            points,
        },
        csv_header: "replica,t,r",
        csv_rows,
    })
}
