//! Exponential tail fits for the occupied-read counter and the walk
//! displacement.
//!
//! One ensemble of walks supplies, at every grid time, both the counter
//! `rho_t` and the position `W_t`. Deviation probabilities are centered at
//! the ensemble's own long-run estimates (the rate of `rho_t / t` and the
//! velocity `W_t / t` at the last grid time) and fitted on the log scale
//! across the grid; exponential decay shows up as a negative slope.
//!
//! A second, smaller ensemble runs from the all-zeros configuration. For
//! this environment the empty state is absorbing, so its counter is
//! identically zero: the from-zeros lower tail is degenerate (flagged, not
//! fitted around a positive rate) and the two ensembles' rates disagree,
//! which `rho_mismatch` reports without failing the run.

use serde::{Deserialize, Serialize};

use super::{
    run_replicas, EnsembleSpec, EstimateReport, EstimatorError, EstimatorOutput,
};
use crate::harness::{InitialLaw, RngPolicy};
use crate::stats::TailFit;

#[derive(Debug, Clone)]
pub struct TailParams {
    pub ensemble: EnsembleSpec,
    pub epsilon_rho: f64,
    pub epsilon_walker: f64,
    /// Ascending observation times; the last one also sets the centering.
    pub t_grid: Vec<f64>,
    pub replicas: usize,
    /// Size of the all-zeros reference ensemble.
    pub zeros_replicas: usize,
    pub abort_budget: f64,
    pub level: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TailReport {
    pub lambda: f64,
    pub radius: i64,
    pub replicas: usize,
    pub zeros_replicas: usize,
    pub aborted: usize,
    pub epsilon_rho: f64,
    pub epsilon_walker: f64,
    /// Centering rate for the counter tails.
    pub rho_rate_hat: f64,
    /// Centering velocity for the displacement tail.
    pub v_hat: Vec<f64>,
    /// Mean of rho_t / t per grid point. The limit is an infimum over t, so
    /// this sequence is expected to drift down toward it.
    pub rho_rate_by_t: Vec<EstimateReport>,
    /// P(rho_t >= t (rho_rate_hat + epsilon_rho)), configured initial.
    pub rho_upper: TailFit,
    /// P(rho_t <= t (rho_rate_hat - epsilon_rho)), all-zeros initial.
    pub rho_lower_from_zeros: TailFit,
    /// Every from-zeros counter was exactly zero.
    pub rho_lower_degenerate: bool,
    /// P(l1(W_t - t v_hat) >= epsilon_walker t), configured initial.
    pub walker: TailFit,
    pub rho_rate_zeros: EstimateReport,
    /// The two ensembles' rates differ beyond three joint standard errors.
    /// Reported, not fatal: the displacement tail is centered per ensemble.
    pub rho_mismatch: bool,
}

struct Row {
    rho: Vec<u32>,
    w: Vec<Vec<i64>>,
}

fn collect_rows(
    spec: &EnsembleSpec,
    t_grid: &[f64],
    replicas: usize,
    threads: usize,
    policy: &RngPolicy,
) -> Result<super::ReplicaBatch<Row>, EstimatorError> {
    let horizon = *t_grid.last().unwrap();
    let (lattice, window) = spec.lattice(horizon)?;
    Ok(run_replicas(replicas, threads, |i| {
        let walk = spec.walk_replica(&lattice, window, horizon, policy, i)?;
        Ok(Row {
            rho: t_grid.iter().map(|&t| walk.rho_count_at(t)).collect(),
            w: t_grid.iter().map(|&t| walk.position_at(t).to_vec()).collect(),
        })
    }))
}

fn l1_deviation(w: &[i64], t: f64, v: &[f64]) -> f64 {
    w.iter().zip(v).map(|(&wi, &vi)| (wi as f64 - t * vi).abs()).sum()
}

pub fn estimate_tails(
    params: &TailParams,
    policy: &RngPolicy,
    threads: usize,
) -> Result<EstimatorOutput<TailReport>, EstimatorError> {
    assert!(!params.t_grid.is_empty(), "tail fits need a t grid");
    let spec = &params.ensemble;
    let dim = spec.kernel.dim();
    let t_max = *params.t_grid.last().unwrap();
    let (lattice, _) = spec.lattice(t_max)?;

    let main = collect_rows(spec, &params.t_grid, params.replicas, threads, policy)?;
    main.enforce_budget(params.abort_budget)?;

    let zeros_spec = EnsembleSpec { initial: InitialLaw::Zeros, ..spec.clone() };
    let zeros_policy = policy.scoped("zeros");
    let zeros =
        collect_rows(&zeros_spec, &params.t_grid, params.zeros_replicas, threads, &zeros_policy)?;
    zeros.enforce_budget(params.abort_budget)?;

    let last = params.t_grid.len() - 1;
    let rates_main: Vec<f64> =
        main.values().map(|row| row.rho[last] as f64 / t_max).collect();
    let rates_zeros: Vec<f64> =
        zeros.values().map(|row| row.rho[last] as f64 / t_max).collect();
    let rho_rate_hat =
        rates_main.iter().sum::<f64>() / rates_main.len() as f64;
    let v_hat: Vec<f64> = (0..dim)
        .map(|c| {
            main.values().map(|row| row.w[last][c] as f64 / t_max).sum::<f64>()
                / main.ok.len() as f64
        })
        .collect();

    let rho_rate_by_t: Vec<EstimateReport> = params
        .t_grid
        .iter()
        .enumerate()
        .map(|(j, &t)| {
            let xs: Vec<f64> = main.values().map(|row| row.rho[j] as f64 / t).collect();
            EstimateReport::from_sample(format!("rho_rate[t={t}]"), &xs, params.level)
        })
        .collect();

    let count_over = |batch: &super::ReplicaBatch<Row>, pred: &dyn Fn(&Row, usize, f64) -> bool| {
        let counts: Vec<u64> = params
            .t_grid
            .iter()
            .enumerate()
            .map(|(j, &t)| batch.values().filter(|row| pred(row, j, t)).count() as u64)
            .collect();
        let totals = vec![batch.ok.len() as u64; params.t_grid.len()];
        (counts, totals)
    };

    let (upper_counts, upper_totals) = count_over(&main, &|row, j, t| {
        row.rho[j] as f64 >= t * (rho_rate_hat + params.epsilon_rho)
    });
    let (lower_counts, lower_totals) = count_over(&zeros, &|row, j, t| {
        row.rho[j] as f64 <= t * (rho_rate_hat - params.epsilon_rho)
    });
    let (walker_counts, walker_totals) = count_over(&main, &|row, j, t| {
        l1_deviation(&row.w[j], t, &v_hat) >= params.epsilon_walker * t
    });

    let rho_rate_zeros =
        EstimateReport::from_sample("rho_rate_zeros", &rates_zeros, params.level);
    let main_rate_stats = &rho_rate_by_t[last];
    let rho_mismatch = (main_rate_stats.estimate - rho_rate_zeros.estimate).abs()
        > 3.0 * f64::hypot(main_rate_stats.se, rho_rate_zeros.se);
    let rho_lower_degenerate = zeros.values().all(|row| row.rho[last] == 0);

    let mut csv_rows: Vec<String> = Vec::new();
    for (series, batch) in [("main", &main), ("zeros", &zeros)] {
        for (i, row) in &batch.ok {
            for (j, &t) in params.t_grid.iter().enumerate() {
                csv_rows.push(format!(
                    "{i},{series},{t},{},{},{}",
                    row.rho[j],
                    row.w[j][0],
                    l1_deviation(&row.w[j], t, &v_hat)
                ));
            }
        }
    }

    Ok(EstimatorOutput {
        report: TailReport {
            lambda: spec.lambda,
            radius: lattice.radius(),
            replicas: params.replicas,
            zeros_replicas: params.zeros_replicas,
            aborted: main.aborted.len() + zeros.aborted.len(),
            epsilon_rho: params.epsilon_rho,
            epsilon_walker: params.epsilon_walker,
            rho_rate_hat,
            v_hat,
            rho_rate_by_t,
            rho_upper: TailFit::from_counts(&params.t_grid, &upper_counts, &upper_totals),
            rho_lower_from_zeros: TailFit::from_counts(
                &params.t_grid,
                &lower_counts,
                &lower_totals,
            ),
            rho_lower_degenerate,
            walker: TailFit::from_counts(&params.t_grid, &walker_counts, &walker_totals),
            rho_rate_zeros,
            rho_mismatch,
        },
        csv_header: "replica,series,t,rho,w1,l1_dev",
        csv_rows,
    })
}
