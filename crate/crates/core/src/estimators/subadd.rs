//! Subadditivity of the occupied-read counter under environment restarts.
//!
//! Write `X(a, b)` for the number of occupied reads the walk makes in
//! `(a, b]`. Restarting the environment from the all-ones configuration at
//! time `t`, while the walk keeps its position and its driver keeps its
//! stream offsets, can only enrich every later read. So replica by replica
//!
//! ```text
//! X(0, t + s) <= X(0, t) + X*(t, t + s)
//! ```
//!
//! where `X*` counts reads of the restarted walk. Started from all ones the
//! restarted counter also has the same law as a counter started at time
//! zero, which an independent baseline ensemble checks per lag with
//! two-sample Kolmogorov-Smirnov tests (Bonferroni-adjusted).

use serde::{Deserialize, Serialize};

use super::{
    initial_config, rep_stream, run_replicas, EnsembleSpec, EstimateReport, EstimatorError,
    EstimatorOutput,
};
use crate::graphical::{sample_rep, ArrowRule, Env};
use crate::harness::RngPolicy;
use crate::lattice::Configuration;
use crate::stats::ks_two_sample;
use crate::walker::{run_walk, run_walk_from, sample_driver, ContactEnv};

#[derive(Debug, Clone)]
pub struct SubaddParams {
    pub ensemble: EnsembleSpec,
    /// Restart time.
    pub t: f64,
    /// Length of the restarted window.
    pub s: f64,
    pub replicas: usize,
    /// Restart in the same realization (the pathwise inequality applies)
    /// or in a fresh one (distributional checks only).
    pub shared_rep: bool,
    /// Compare restarted counts at lags `1..=ks_max_k` against the baseline.
    pub ks_max_k: usize,
    /// Family-wise level for the KS battery.
    pub ks_alpha: f64,
    pub abort_budget: f64,
    pub level: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SubaddReport {
    pub lambda: f64,
    pub radius: i64,
    pub replicas: usize,
    pub aborted: usize,
    pub t: f64,
    pub s: f64,
    pub shared_rep: bool,
    /// Replicas where `X(0, t+s) > X(0, t) + X*(t, t+s)`. Zero whenever
    /// `shared_rep` is set.
    pub pathwise_violations: usize,
    pub x_first: EstimateReport,
    pub x_restart: EstimateReport,
    pub x_whole: EstimateReport,
    /// Per-replica slack `X(0,t) + X*(t,t+s) - X(0,t+s)`, nonnegative under
    /// a shared realization.
    pub slack: EstimateReport,
    pub ks_alpha: f64,
    pub ks: Vec<KsPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KsPoint {
    pub k: usize,
    pub statistic: f64,
    pub p_value: f64,
    /// Not rejected at the Bonferroni-adjusted level.
    pub pass: bool,
}

struct Row {
    x_first: u32,
    x_whole: u32,
    /// X*(t, t+k) for k = 1..=ks_max_k, then X*(t, t+s) as the last entry.
    restarts: Vec<u32>,
}

pub fn estimate_subadd(
    params: &SubaddParams,
    policy: &RngPolicy,
    threads: usize,
) -> Result<EstimatorOutput<SubaddReport>, EstimatorError> {
    assert!(params.ks_max_k as f64 <= params.s, "KS lags must fit inside the restart window");
    let spec = &params.ensemble;
    let horizon = params.t + params.s;
    let (lattice, window) = spec.lattice(horizon)?;
    let restart_policy = policy.scoped("restart");

    let batch = run_replicas(params.replicas, threads, |i| {
        let initial =
            initial_config(&lattice, spec.initial, spec.lambda, spec.burn_in, policy, i)?;
        let rep = sample_rep(&lattice, spec.lambda, horizon, rep_stream(policy, i))?;
        let driver = sample_driver(spec.gamma, horizon, policy.driver_streams(i));
        let env = Env::from_rep(&rep, 0.0, vec![initial], vec![ArrowRule::All])?;
        let walk = run_walk(&spec.kernel, &driver, &mut ContactEnv::new(env, window))?;

        let rho_t = walk.rho_count_at(params.t);
        let slice = driver.tail_at(params.t, rho_t);
        let full = Configuration::full(lattice.n_sites());
        let restart_env = if params.shared_rep {
            Env::from_rep(&rep, params.t, vec![full], vec![ArrowRule::All])?
        } else {
            let fresh =
                sample_rep(&lattice, spec.lambda, horizon, rep_stream(&restart_policy, i))?;
            Env::from_rep(&fresh, params.t, vec![full], vec![ArrowRule::All])?
        };
        let restarted = run_walk_from(
            &spec.kernel,
            slice,
            &mut ContactEnv::new(restart_env, window),
            walk.position_at(params.t),
            params.t,
            horizon,
        )?;

        let mut restarts: Vec<u32> = (1..=params.ks_max_k)
            .map(|k| restarted.rho_count_at(params.t + k as f64))
            .collect();
        restarts.push(restarted.rho_end_count());
        Ok(Row { x_first: rho_t, x_whole: walk.rho_end_count(), restarts })
    });
    batch.enforce_budget(params.abort_budget)?;

    // Baseline counters over [0, s] from all ones, independent of the main
    // ensemble, giving the KS reference sample for each lag.
    let baseline_policy = policy.scoped("baseline");
    let baseline_spec =
        EnsembleSpec { initial: crate::harness::InitialLaw::Ones, ..spec.clone() };
    let (base_lattice, base_window) = baseline_spec.lattice(params.s)?;
    let baseline = run_replicas(params.replicas, threads, |i| {
        let walk =
            baseline_spec.walk_replica(&base_lattice, base_window, params.s, &baseline_policy, i)?;
        let counts: Vec<u32> =
            (1..=params.ks_max_k).map(|k| walk.rho_count_at(k as f64)).collect();
        Ok(counts)
    });
    baseline.enforce_budget(params.abort_budget)?;

    let mut pathwise_violations = 0usize;
    let mut x_first = Vec::new();
    let mut x_restart = Vec::new();
    let mut x_whole = Vec::new();
    let mut slack = Vec::new();
    for row in batch.values() {
        let restart_end = *row.restarts.last().unwrap();
        if row.x_whole > row.x_first + restart_end {
            pathwise_violations += 1;
        }
        x_first.push(row.x_first as f64);
        x_restart.push(restart_end as f64);
        x_whole.push(row.x_whole as f64);
        slack.push((row.x_first + restart_end) as f64 - row.x_whole as f64);
    }

    let per_test_alpha = params.ks_alpha / params.ks_max_k as f64;
    let ks = (1..=params.ks_max_k)
        .map(|k| {
            let a: Vec<f64> =
                batch.values().map(|row| row.restarts[k - 1] as f64).collect();
            let b: Vec<f64> = baseline.values().map(|counts| counts[k - 1] as f64).collect();
            let test = ks_two_sample(&a, &b);
            KsPoint {
                k,
                statistic: test.statistic,
                p_value: test.p_value,
                pass: test.p_value >= per_test_alpha,
            }
        })
        .collect();

    let mut csv_rows: Vec<String> = batch
        .ok
        .iter()
        .flat_map(|(i, row)| {
            let mut lines = vec![
                format!("{i},x0,{},{}", params.t, row.x_first),
                format!("{i},x0,{horizon},{}", row.x_whole),
            ];
            for (k, &c) in row.restarts[..params.ks_max_k].iter().enumerate() {
                lines.push(format!("{i},restart,{},{c}", params.t + (k + 1) as f64));
            }
            lines.push(format!("{i},restart,{horizon},{}", row.restarts.last().unwrap()));
            lines
        })
        .collect();
    csv_rows.extend(baseline.ok.iter().flat_map(|(i, counts)| {
        counts
            .iter()
            .enumerate()
            .map(move |(k, &c)| format!("{i},baseline,{},{c}", (k + 1) as f64))
    }));

    Ok(EstimatorOutput {
        report: SubaddReport {
            lambda: spec.lambda,
            radius: lattice.radius(),
            replicas: params.replicas,
            aborted: batch.aborted.len() + baseline.aborted.len(),
            t: params.t,
            s: params.s,
            shared_rep: params.shared_rep,
            pathwise_violations,
            x_first: EstimateReport::from_sample("x(0,t)", &x_first, params.level),
            x_restart: EstimateReport::from_sample("x*(t,t+s)", &x_restart, params.level),
            x_whole: EstimateReport::from_sample("x(0,t+s)", &x_whole, params.level),
            slack: EstimateReport::from_sample("slack", &slack, params.level),
            ks_alpha: params.ks_alpha,
            ks,
        },
        csv_header: "replica,series,time,count",
        csv_rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::InitialLaw;
    use crate::kernel::build_kernel;
    use crate::lattice::Boundary;

    fn params(shared: bool, replicas: usize) -> SubaddParams {
        let kernel =
            build_kernel(1, &[(1, vec![1], 2.0), (0, vec![-1], 1.0)]).unwrap();
        SubaddParams {
            ensemble: EnsembleSpec {
                gamma: kernel.gamma(),
                kernel,
                lambda: 2.0,
                boundary: Boundary::Truncate,
                initial: InitialLaw::Ones,
                burn_in: 5.0,
                pad: 4.0,
                radius: None,
            },
            t: 3.0,
            s: 3.0,
            replicas,
            shared_rep: shared,
            ks_max_k: 3,
            ks_alpha: 0.01,
            abort_budget: 0.02,
            level: 0.95,
        }
    }

    #[test]
    fn shared_realization_never_violates_the_inequality() {
        let policy = RngPolicy::new(101, "subadd-shared");
        let out = estimate_subadd(&params(true, 120), &policy, 2).unwrap();
        assert_eq!(out.report.pathwise_violations, 0);
        assert!(out.report.slack.estimate >= 0.0);
        assert_eq!(out.report.ks.len(), 3);
        // Restarting from all ones cannot shrink the mean count.
        assert!(
            out.report.x_restart.estimate + 4.0 * out.report.x_restart.se
                >= out.report.x_whole.estimate - out.report.x_first.estimate
        );
    }

    #[test]
    fn fresh_realization_matches_the_baseline_law() {
        let policy = RngPolicy::new(55, "subadd-fresh");
        let out = estimate_subadd(&params(false, 150), &policy, 2).unwrap();
        for point in &out.report.ks {
            assert!(point.pass, "lag {} rejected: {point:?}", point.k);
        }
    }

    #[test]
    fn report_is_thread_independent() {
        let policy = RngPolicy::new(9, "subadd-threads");
        let a = estimate_subadd(&params(true, 40), &policy, 1).unwrap();
        let b = estimate_subadd(&params(true, 40), &policy, 3).unwrap();
        assert_eq!(a.report, b.report);
        assert_eq!(a.csv_rows, b.csv_rows);
    }
}
