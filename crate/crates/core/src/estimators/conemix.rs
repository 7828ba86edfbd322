//! The cone-dependence functional: how long the environment remembers its
//! initial state inside an opening space-time cone.
//!
//! Two copies evolve on one realization, one from the configured initial and
//! one from the all-`i` reference. A replica's statistic is the latest time
//! at which the copies disagree at a site `x` with `l1(x) < m t`; the
//! per-`T` estimate is the fraction of replicas whose latest disagreement is
//! at `T` or later.
//!
//! The default mode samples the cone at multiples of `grid_step` (plus the
//! grid times themselves), which can only miss disagreements, so the
//! estimate is a lower bound on the functional; `exact` mode tracks the
//! disagreement set through every event and closes the gap at the price of
//! sweeping stored realizations.

use serde::{Deserialize, Serialize};

use super::{initial_config, rep_stream, run_replicas, EstimatorError, EstimatorOutput};
use crate::graphical::{safe_radius, sample_rep, ArrowRule, Env};
use crate::harness::{InitialLaw, RngPolicy};
use crate::lattice::{Boundary, Configuration, Lattice};

#[derive(Debug, Clone)]
pub struct ConemixParams {
    pub dim: usize,
    pub lambda: f64,
    pub boundary: Boundary,
    /// The initial law under test.
    pub initial: InitialLaw,
    pub burn_in: f64,
    /// Reference state: compare against the all-zeros (0) or all-ones (1)
    /// start.
    pub reference: u8,
    /// Cone inclination: (x, t) is inside when l1(x) < m t.
    pub m: f64,
    /// Ascending cutoff times T.
    pub t_grid: Vec<f64>,
    /// Simulation end; disagreements after it are invisible, so it should
    /// comfortably exceed the last T.
    pub horizon: f64,
    pub exact: bool,
    pub grid_step: f64,
    pub pad: f64,
    pub radius: Option<i64>,
    pub replicas: usize,
    pub abort_budget: f64,
    pub level: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConemixReport {
    pub lambda: f64,
    pub m: f64,
    pub initial: InitialLaw,
    pub reference: u8,
    pub exact: bool,
    pub horizon: f64,
    pub radius: i64,
    pub replicas: usize,
    pub aborted: usize,
    pub points: Vec<ConemixPoint>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConemixPoint {
    pub t: f64,
    /// Fraction of replicas still disagreeing inside the cone at or after t.
    pub phi: super::EstimateReport,
}

fn reference_config(lattice: &Lattice, reference: u8) -> Configuration {
    match reference {
        0 => Configuration::empty(lattice.n_sites()),
        1 => Configuration::full(lattice.n_sites()),
        other => panic!("reference state must be 0 or 1, got {other}"),
    }
}

/// Latest cone disagreement found by sampling at the given check times.
fn latest_by_sampling(
    mut env: Env,
    m: f64,
    norms: &[i64],
    checks: &[f64],
) -> Result<f64, EstimatorError> {
    let mut latest = -1.0;
    for &s in checks {
        env.advance_to(s)?;
        let a = env.config(0);
        let b = env.config(1);
        let inside =
            (0..norms.len()).any(|site| (norms[site] as f64) < m * s && a.get(site) != b.get(site));
        if inside {
            latest = s;
        }
    }
    Ok(latest)
}

/// Latest cone disagreement tracked event by event. A disagreement at site
/// `x` that disappears at event time `tau` was live just before `tau`, so it
/// contributes `tau` whenever `tau > l1(x) / m`; sites still disagreeing at
/// the horizon contribute the horizon itself.
fn latest_exact(
    rep: &crate::graphical::GraphicalRep,
    mut a: Configuration,
    mut b: Configuration,
    m: f64,
    norms: &[i64],
) -> Result<f64, EstimatorError> {
    let horizon = rep.horizon();
    let events = rep.merged_window(0.0, horizon)?;
    let n_sites = norms.len() as u32;
    let mut latest = -1.0;
    let close = |site: usize, t: f64, latest: &mut f64| {
        if m * t > norms[site] as f64 && t > *latest {
            *latest = t;
        }
    };
    for (t, lane) in events.iter() {
        if lane < n_sites {
            let site = lane as usize;
            if a.get(site) != b.get(site) {
                close(site, t, &mut latest);
            }
            a.set(site, false);
            b.set(site, false);
        } else {
            let (src, dst) = rep.edges()[(lane - n_sites) as usize];
            let (src, dst) = (src as usize, dst as usize);
            let before = a.get(dst) != b.get(dst);
            if a.get(src) {
                a.set(dst, true);
            }
            if b.get(src) {
                b.set(dst, true);
            }
            if before && a.get(dst) == b.get(dst) {
                close(dst, t, &mut latest);
            }
        }
    }
    for site in 0..norms.len() {
        if a.get(site) != b.get(site) {
            close(site, horizon, &mut latest);
        }
    }
    Ok(latest)
}

pub fn estimate_conemix(
    params: &ConemixParams,
    policy: &RngPolicy,
    threads: usize,
) -> Result<EstimatorOutput<ConemixReport>, EstimatorError> {
    assert!(!params.t_grid.is_empty(), "conemix needs a T grid");
    assert!(params.m > 0.0 && params.grid_step > 0.0);
    assert!(
        params.horizon >= *params.t_grid.last().unwrap(),
        "the horizon must cover the last cutoff"
    );
    let window = (params.m * params.horizon).ceil() as i64;
    let radius = params
        .radius
        .unwrap_or_else(|| safe_radius(window, params.lambda, params.horizon, params.pad));
    let lattice = Lattice::new(params.dim, radius, params.boundary)?;
    let norms: Vec<i64> = {
        let mut coord = vec![0i64; params.dim];
        (0..lattice.n_sites())
            .map(|site| {
                lattice.coord_of(site, &mut coord);
                coord.iter().map(|c| c.abs()).sum()
            })
            .collect()
    };
    let checks: Vec<f64> = {
        let mut c: Vec<f64> = (1..)
            .map(|k| k as f64 * params.grid_step)
            .take_while(|&s| s <= params.horizon)
            .chain(params.t_grid.iter().copied())
            .collect();
        c.sort_by(f64::total_cmp);
        c.dedup();
        c
    };

    let batch = run_replicas(params.replicas, threads, |i| {
        let eta = initial_config(
            &lattice,
            params.initial,
            params.lambda,
            params.burn_in,
            policy,
            i,
        )?;
        let reference = reference_config(&lattice, params.reference);
        if params.exact {
            let rep =
                sample_rep(&lattice, params.lambda, params.horizon, rep_stream(policy, i))?;
            latest_exact(&rep, eta, reference, params.m, &norms)
        } else {
            let env = Env::live(
                &lattice,
                params.lambda,
                params.horizon,
                rep_stream(policy, i),
                vec![eta, reference],
                vec![ArrowRule::All, ArrowRule::All],
            )?;
            latest_by_sampling(env, params.m, &norms, &checks)
        }
    });
    batch.enforce_budget(params.abort_budget)?;

    let points = params
        .t_grid
        .iter()
        .map(|&t| {
            let hits = batch.values().filter(|&&latest| latest >= t).count();
            ConemixPoint {
                t,
                phi: super::EstimateReport::from_binomial(
                    format!("phi[T={t}]"),
                    hits,
                    batch.ok.len(),
                    params.level,
                ),
            }
        })
        .collect();

    let csv_rows =
        batch.ok.iter().map(|(i, latest)| format!("{i},{latest}")).collect();

    Ok(EstimatorOutput {
        report: ConemixReport {
            lambda: params.lambda,
            m: params.m,
            initial: params.initial,
            reference: params.reference,
            exact: params.exact,
            horizon: params.horizon,
            radius,
            replicas: params.replicas,
            aborted: batch.aborted.len(),
            points,
        },
        csv_header: "replica,latest_disagreement",
        csv_rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(initial: InitialLaw, reference: u8, exact: bool) -> ConemixParams {
        ConemixParams {
            dim: 1,
            lambda: 2.0,
            boundary: Boundary::Truncate,
            initial,
            burn_in: 5.0,
            reference,
            m: 1.0,
            t_grid: vec![2.0, 5.0],
            horizon: 8.0,
            exact,
            grid_step: 1.0,
            pad: 4.0,
            radius: None,
            replicas: 60,
            abort_budget: 0.01,
            level: 0.95,
        }
    }

    #[test]
    fn matching_initial_and_reference_never_disagree() {
        let policy = RngPolicy::new(1, "conemix-id");
        let out =
            estimate_conemix(&params(InitialLaw::Ones, 1, false), &policy, 2).unwrap();
        assert!(out.report.points.iter().all(|p| p.phi.estimate == 0.0));
        assert!(out.csv_rows.iter().all(|row| row.ends_with(",-1")));
    }

    #[test]
    fn empty_versus_ones_stays_separated() {
        let policy = RngPolicy::new(2, "conemix-zeros");
        let out =
            estimate_conemix(&params(InitialLaw::Zeros, 1, false), &policy, 2).unwrap();
        for p in &out.report.points {
            assert!(p.phi.estimate > 0.5, "phi at {}: {:?}", p.t, p.phi);
        }
    }

    #[test]
    fn exact_mode_dominates_grid_mode_pathwise() {
        let policy = RngPolicy::new(14, "conemix-exact");
        let grid =
            estimate_conemix(&params(InitialLaw::Bernoulli(0.5), 1, false), &policy, 2)
                .unwrap();
        let exact =
            estimate_conemix(&params(InitialLaw::Bernoulli(0.5), 1, true), &policy, 2)
                .unwrap();
        // Same streams feed both modes, so replicas pair up one to one.
        for (g, e) in grid.csv_rows.iter().zip(&exact.csv_rows) {
            let gl: f64 = g.split(',').nth(1).unwrap().parse().unwrap();
            let el: f64 = e.split(',').nth(1).unwrap().parse().unwrap();
            assert!(el >= gl, "exact {el} < grid {gl}");
        }
        for (g, e) in grid.report.points.iter().zip(&exact.report.points) {
            assert!(e.phi.estimate >= g.phi.estimate);
        }
    }

    #[test]
    fn report_is_thread_independent() {
        let policy = RngPolicy::new(6, "conemix-threads");
        let p = params(InitialLaw::Bernoulli(0.5), 1, false);
        let a = estimate_conemix(&p, &policy, 1).unwrap();
        let b = estimate_conemix(&p, &policy, 4).unwrap();
        assert_eq!(a.report, b.report);
        assert_eq!(a.csv_rows, b.csv_rows);
    }
}
