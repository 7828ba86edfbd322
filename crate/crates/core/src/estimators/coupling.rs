//! Decay of the coupling discrepancy at the origin.
//!
//! Two copies of the environment run on the same realization, one from a
//! product-Bernoulli initial and one from all ones. For each grid time `T`
//! the replica reports whether the two disagree at the origin at any moment
//! of `[T, T+1)`; the origin's pair can only change at origin-touching
//! events, so the window is checked at its start and right after each such
//! event. Attractiveness keeps the Bernoulli copy below the all-ones copy
//! site by site, which is asserted on every replica.

use serde::{Deserialize, Serialize};

use super::{initial_config, rep_stream, run_replicas, EstimatorError, EstimatorOutput};
use crate::graphical::{safe_radius, sample_rep, ArrowRule, Env};
use crate::harness::{InitialLaw, RngPolicy};
use crate::lattice::{Boundary, Configuration, Lattice};
use crate::stats::TailFit;

#[derive(Debug, Clone)]
pub struct CouplingParams {
    pub dim: usize,
    pub lambda: f64,
    pub boundary: Boundary,
    /// Density of the Bernoulli initial.
    pub density: f64,
    /// Ascending window starts; windows are `[T, T+1)`.
    pub t_grid: Vec<f64>,
    pub pad: f64,
    pub radius: Option<i64>,
    pub replicas: usize,
    pub abort_budget: f64,
    pub level: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingReport {
    pub lambda: f64,
    pub density: f64,
    pub radius: i64,
    pub replicas: usize,
    pub aborted: usize,
    /// Grid times where the Bernoulli copy failed to be dominated by the
    /// all-ones copy. Always zero: the copies share every event.
    pub domination_violations: usize,
    /// Window-discrepancy probability per T with its log-linear fit.
    pub fit: TailFit,
}

const BERNOULLI: usize = 0;
const ONES: usize = 1;

pub fn estimate_coupling(
    params: &CouplingParams,
    policy: &RngPolicy,
    threads: usize,
) -> Result<EstimatorOutput<CouplingReport>, EstimatorError> {
    assert!(!params.t_grid.is_empty(), "coupling needs a T grid");
    assert!(
        params.t_grid.windows(2).all(|w| w[1] - w[0] >= 1.0),
        "windows are one unit long and must not overlap"
    );
    assert!((0.0..=1.0).contains(&params.density));
    let horizon = params.t_grid.last().unwrap() + 1.0;
    let radius = params
        .radius
        .unwrap_or_else(|| safe_radius(0, params.lambda, horizon, params.pad));
    let lattice = Lattice::new(params.dim, radius, params.boundary)?;
    let origin = lattice
        .site_index(&vec![0; params.dim])
        .expect("origin is inside every box");

    let batch = run_replicas(params.replicas, threads, |i| {
        let rep = sample_rep(&lattice, params.lambda, horizon, rep_stream(policy, i))?;
        // Event times that can change the origin's occupancy: deaths at the
        // origin and arrows pointing into it.
        let mut origin_events: Vec<f64> = rep.crosses_of(origin).to_vec();
        for (lane, &(_, dst)) in rep.edges().iter().enumerate() {
            if dst as usize == origin {
                origin_events.extend_from_slice(rep.arrows_of(lane));
            }
        }
        origin_events.sort_by(f64::total_cmp);

        let mu = initial_config(
            &lattice,
            InitialLaw::Bernoulli(params.density),
            params.lambda,
            0.0,
            policy,
            i,
        )?;
        let ones = Configuration::full(lattice.n_sites());
        let mut env =
            Env::from_rep(&rep, 0.0, vec![mu, ones], vec![ArrowRule::All, ArrowRule::All])?;

        let mut discrepant = Vec::with_capacity(params.t_grid.len());
        let mut dominated = true;
        for &t_start in &params.t_grid {
            env.advance_to(t_start)?;
            dominated &= env.config(BERNOULLI).dominated_by(env.config(ONES));
            let mut differ =
                env.config(BERNOULLI).get(origin) != env.config(ONES).get(origin);
            let lo = origin_events.partition_point(|&t| t <= t_start);
            for &t in &origin_events[lo..] {
                if differ || t >= t_start + 1.0 {
                    break;
                }
                env.advance_to(t)?;
                differ = env.config(BERNOULLI).get(origin) != env.config(ONES).get(origin);
            }
            discrepant.push(differ);
        }
        Ok((discrepant, dominated))
    });
    batch.enforce_budget(params.abort_budget)?;

    let domination_violations = batch.values().filter(|(_, dominated)| !dominated).count();
    let counts: Vec<u64> = (0..params.t_grid.len())
        .map(|j| batch.values().filter(|(d, _)| d[j]).count() as u64)
        .collect();
    let totals = vec![batch.ok.len() as u64; params.t_grid.len()];

    let csv_rows = batch
        .ok
        .iter()
        .flat_map(|(i, (discrepant, _))| {
            params
                .t_grid
                .iter()
                .zip(discrepant)
                .map(move |(&t, &d)| format!("{i},{t},{}", d as u8))
        })
        .collect();

    Ok(EstimatorOutput {
        report: CouplingReport {
            lambda: params.lambda,
            density: params.density,
            radius,
            replicas: params.replicas,
            aborted: batch.aborted.len(),
            domination_violations,
            fit: TailFit::from_counts(&params.t_grid, &counts, &totals),
        },
        csv_header: "replica,t,discrepant",
        csv_rows,
    })
}
