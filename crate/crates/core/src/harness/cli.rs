//! Command-line entry points.
//!
//! Every subcommand reads one TOML config, runs one estimator, and writes
//! `manifest.json`, `report.json`, and `replicas.csv` into the output
//! directory. Exit codes: 0 on success, 2 for usage and config errors, 3
//! when a fit the verdict depends on is degenerate, 4 when too many
//! replicas aborted, 1 for anything else.

use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde_json::json;
use thiserror::Error;

use crate::estimators::conemix::{estimate_conemix, ConemixParams};
use crate::estimators::coupling::{estimate_coupling, CouplingParams};
use crate::estimators::density_lb::{estimate_density_lb, DensityLbParams};
use crate::estimators::edge::{estimate_edge, EdgeParams};
use crate::estimators::oracle_check::{run_oracle_check, OracleCheckParams};
use crate::estimators::rho_curve::{estimate_rho_curve, RhoCurveParams};
use crate::estimators::slab_survival::{estimate_slab_survival, SlabParams};
use crate::estimators::speed::{estimate_speed, SpeedParams};
use crate::estimators::subadd::{estimate_subadd, SubaddParams};
use crate::estimators::tails::{estimate_tails, TailParams};
use crate::estimators::{EnsembleSpec, EstimatorError, EstimatorOutput};

use super::output::{default_out_dir, write_run, RunArtifacts};
use super::{ExperimentConfig, HarnessError, RadiusSpec, RngPolicy};

/// Confidence level used by every report.
const LEVEL: f64 = 0.95;
/// Probe spacing for the grid-mode cone functional.
const CONE_GRID_STEP: f64 = 0.25;
/// Family-wise level for the subadditivity distribution battery.
const KS_ALPHA: f64 = 0.01;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Harness(#[from] HarnessError),
    #[error(transparent)]
    Estimator(#[from] EstimatorError),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Harness(_) => 2,
            CliError::Estimator(EstimatorError::InconclusiveFit(_)) => 3,
            CliError::Estimator(EstimatorError::AbortBudget { .. }) => 4,
            CliError::Estimator(_) => 1,
        }
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "rwdre",
    version,
    about = "Random walks in a contact-process environment: simulation and estimation"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// TOML experiment configuration.
    #[arg(long, value_name = "FILE")]
    pub config: PathBuf,
    /// Master seed override.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Replica count override.
    #[arg(long)]
    pub replicas: Option<usize>,
    /// Output directory; defaults to the config's out_dir, then to
    /// runs/<name>/<command>.
    #[arg(long, value_name = "DIR")]
    pub out: Option<PathBuf>,
    /// Worker threads; defaults to $RWDRE_THREADS, then to 1.
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Walker speed and occupation rate on a time grid.
    Speed(CommonArgs),
    /// Occupied-count subadditivity across a restart, with a distribution
    /// check of the restarted increments.
    Subadd {
        #[command(flatten)]
        common: CommonArgs,
        /// Restart on the first leg's realization (pathwise inequality)
        /// instead of a fresh one.
        #[arg(long)]
        shared_rep: bool,
    },
    /// Decay of the occupation counter's deviation probabilities.
    LdpRho(CommonArgs),
    /// Decay of the walker displacement's deviation probabilities.
    LdpWalk(CommonArgs),
    /// Decay of the origin disagreement between coupled environments.
    Coupling(CommonArgs),
    /// Cone-restricted disagreement functional between two starts.
    Conemix {
        #[command(flatten)]
        common: CommonArgs,
        /// Record event-exact disagreement times instead of grid probes.
        #[arg(long)]
        exact_cone: bool,
    },
    /// Survival of the contact process confined to a moving slab.
    Slab(CommonArgs),
    /// Speed of the rightmost occupied site.
    Edge(CommonArgs),
    /// Occupied fraction across a grid of infection rates, coupled by
    /// arrow thinning.
    RhoCurve(CommonArgs),
    /// Observed-density lower bound from observer-gated walks.
    DensityLb {
        #[command(flatten)]
        common: CommonArgs,
        /// Carve the slab processes out of the walker's own realization.
        #[arg(long)]
        shared_rep: bool,
    },
    /// Sweep-versus-oracle agreement on tiny instances.
    OracleCheck(CommonArgs),
}

struct Prepared {
    command: &'static str,
    config: ExperimentConfig,
    policy: RngPolicy,
    threads: usize,
    out_dir: PathBuf,
    replicas: usize,
    started: Instant,
}

fn prepare(common: &CommonArgs, command: &'static str) -> Result<Prepared, CliError> {
    let mut config = ExperimentConfig::load(&common.config)?;
    if let Some(seed) = common.seed {
        config.master_seed = seed;
    }
    if let Some(replicas) = common.replicas {
        config.replicas = replicas;
        config.validate()?;
    }
    let threads = common
        .threads
        .or_else(|| std::env::var("RWDRE_THREADS").ok().and_then(|s| s.parse().ok()))
        .unwrap_or(1);
    let out_dir = common.out.clone().unwrap_or_else(|| default_out_dir(&config, command));
    let policy = RngPolicy::new(config.master_seed, &format!("{}/{command}", config.name));
    Ok(Prepared {
        command,
        replicas: config.replicas,
        policy,
        threads,
        out_dir,
        config,
        started: Instant::now(),
    })
}

fn ensemble(config: &ExperimentConfig) -> Result<EnsembleSpec, CliError> {
    let kernel = config.build_kernel()?;
    let gamma = config.gamma(&kernel);
    let env = &config.environment;
    Ok(EnsembleSpec {
        kernel,
        lambda: env.lambda,
        boundary: env.boundary,
        initial: env.initial,
        burn_in: env.burn_in,
        gamma,
        pad: env.pad,
        radius: fixed_radius(config),
    })
}

fn fixed_radius(config: &ExperimentConfig) -> Option<i64> {
    match config.environment.radius {
        RadiusSpec::Fixed(r) => Some(r),
        RadiusSpec::Auto(_) => None,
    }
}

fn ascending_grid(
    values: &[f64],
    command: &'static str,
    field: &'static str,
) -> Result<Vec<f64>, HarnessError> {
    if values.is_empty() {
        return Err(HarnessError::MissingField { command, field });
    }
    if !values.windows(2).all(|w| w[0] < w[1]) {
        return Err(HarnessError::Validation {
            field,
            message: "must be strictly increasing".into(),
        });
    }
    Ok(values.to_vec())
}

fn write_report(
    prep: &Prepared,
    report: serde_json::Value,
    csv_header: &'static str,
    csv_rows: Vec<String>,
) -> Result<(), CliError> {
    let artifacts = RunArtifacts { report, csv_header, csv_rows };
    write_run(
        &prep.out_dir,
        prep.command,
        &prep.config,
        prep.threads,
        prep.started.elapsed().as_secs_f64(),
        &artifacts,
    )?;
    println!("{}: wrote {}", prep.command, prep.out_dir.display());
    Ok(())
}

fn finish<R: serde::Serialize>(
    prep: &Prepared,
    out: EstimatorOutput<R>,
) -> Result<(), CliError> {
    let report = serde_json::to_value(&out.report).expect("report serializes");
    write_report(prep, report, out.csv_header, out.csv_rows)
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Speed(common) => {
            let prep = prepare(&common, "speed")?;
            let params = SpeedParams {
                ensemble: ensemble(&prep.config)?,
                t_grid: ascending_grid(&prep.config.grids.t, "speed", "grids.t")?,
                replicas: prep.replicas,
                abort_budget: prep.config.abort_budget,
                level: LEVEL,
            };
            finish(&prep, estimate_speed(&params, &prep.policy, prep.threads)?)
        }
        Command::Subadd { common, shared_rep } => {
            let prep = prepare(&common, "subadd")?;
            let p = &prep.config.params;
            let t = ExperimentConfig::require(p.t, "subadd", "params.t")?;
            let s = ExperimentConfig::require(p.s, "subadd", "params.s")?;
            let params = SubaddParams {
                ensemble: ensemble(&prep.config)?,
                t,
                s,
                replicas: prep.replicas,
                shared_rep,
                ks_max_k: p.ks_max_k.unwrap_or(5).min(s as usize),
                ks_alpha: KS_ALPHA,
                abort_budget: prep.config.abort_budget,
                level: LEVEL,
            };
            finish(&prep, estimate_subadd(&params, &prep.policy, prep.threads)?)
        }
        Command::LdpRho(common) => {
            let prep = prepare(&common, "ldp-rho")?;
            let epsilon =
                ExperimentConfig::require(prep.config.params.epsilon, "ldp-rho", "params.epsilon")?;
            let out = run_tails(&prep, epsilon, "ldp-rho")?;
            let r = &out.report;
            let report = json!({
                "lambda": r.lambda,
                "radius": r.radius,
                "replicas": r.replicas,
                "zeros_replicas": r.zeros_replicas,
                "aborted": r.aborted,
                "epsilon": r.epsilon_rho,
                "rho_rate_hat": r.rho_rate_hat,
                "rho_rate_by_t": r.rho_rate_by_t,
                "upper": r.rho_upper,
                "lower_from_zeros": r.rho_lower_from_zeros,
                "lower_degenerate": r.rho_lower_degenerate,
                "rho_rate_zeros": r.rho_rate_zeros,
            });
            write_report(&prep, report, out.csv_header, out.csv_rows)?;
            if !out.report.rho_upper.is_conclusive() {
                return Err(EstimatorError::InconclusiveFit(
                    "upper occupation tail kept too few nonzero cells".into(),
                )
                .into());
            }
            Ok(())
        }
        Command::LdpWalk(common) => {
            let prep = prepare(&common, "ldp-walk")?;
            let epsilon = ExperimentConfig::require(
                prep.config.params.epsilon,
                "ldp-walk",
                "params.epsilon",
            )?;
            let out = run_tails(&prep, epsilon, "ldp-walk")?;
            let r = &out.report;
            let report = json!({
                "lambda": r.lambda,
                "radius": r.radius,
                "replicas": r.replicas,
                "aborted": r.aborted,
                "epsilon": r.epsilon_walker,
                "v_hat": r.v_hat,
                "rho_rate_hat": r.rho_rate_hat,
                "walker": r.walker,
                "rho_mismatch": r.rho_mismatch,
            });
            write_report(&prep, report, out.csv_header, out.csv_rows)?;
            if !out.report.walker.is_conclusive() {
                return Err(EstimatorError::InconclusiveFit(
                    "displacement tail kept too few nonzero cells".into(),
                )
                .into());
            }
            Ok(())
        }
        Command::Coupling(common) => {
            let prep = prepare(&common, "coupling")?;
            let config = &prep.config;
            let density = ExperimentConfig::require(
                config.params.density,
                "coupling",
                "params.density",
            )?;
            let params = CouplingParams {
                dim: config.kernel.dim as usize,
                lambda: config.environment.lambda,
                boundary: config.environment.boundary,
                density,
                t_grid: ascending_grid(&config.grids.window_t, "coupling", "grids.window_t")?,
                pad: config.environment.pad,
                radius: fixed_radius(config),
                replicas: prep.replicas,
                abort_budget: config.abort_budget,
                level: LEVEL,
            };
            let out = estimate_coupling(&params, &prep.policy, prep.threads)?;
            let conclusive = out.report.fit.is_conclusive();
            finish(&prep, out)?;
            if !conclusive {
                return Err(EstimatorError::InconclusiveFit(
                    "discrepancy probabilities kept too few nonzero cells".into(),
                )
                .into());
            }
            Ok(())
        }
        Command::Conemix { common, exact_cone } => {
            let prep = prepare(&common, "conemix")?;
            let config = &prep.config;
            let m = ExperimentConfig::require(config.params.cone_m, "conemix", "params.cone_m")?;
            let horizon =
                ExperimentConfig::require(config.params.horizon, "conemix", "params.horizon")?;
            let params = ConemixParams {
                dim: config.kernel.dim as usize,
                lambda: config.environment.lambda,
                boundary: config.environment.boundary,
                initial: config.environment.initial,
                burn_in: config.environment.burn_in,
                reference: config.params.reference.unwrap_or(1),
                m,
                t_grid: ascending_grid(&config.grids.t, "conemix", "grids.t")?,
                horizon,
                exact: exact_cone,
                grid_step: CONE_GRID_STEP,
                pad: config.environment.pad,
                radius: fixed_radius(config),
                replicas: prep.replicas,
                abort_budget: config.abort_budget,
                level: LEVEL,
            };
            finish(&prep, estimate_conemix(&params, &prep.policy, prep.threads)?)
        }
        Command::Slab(common) => {
            let prep = prepare(&common, "slab")?;
            let config = &prep.config;
            let params = SlabParams {
                dim: config.kernel.dim as usize,
                lambda: config.environment.lambda,
                half_width: ExperimentConfig::require(
                    config.params.slab_k,
                    "slab",
                    "params.slab_k",
                )?,
                tilt: config.params.tilt.unwrap_or(0.0),
                t_end: ExperimentConfig::require(config.params.t_end, "slab", "params.t_end")?,
                replicas: prep.replicas,
                level: LEVEL,
            };
            finish(&prep, estimate_slab_survival(&params, &prep.policy, prep.threads)?)
        }
        Command::Edge(common) => {
            let prep = prepare(&common, "edge")?;
            let params = EdgeParams {
                ensemble: ensemble(&prep.config)?,
                t_grid: ascending_grid(&prep.config.grids.t, "edge", "grids.t")?,
                replicas: prep.replicas,
                abort_budget: prep.config.abort_budget,
                level: LEVEL,
            };
            finish(&prep, estimate_edge(&params, &prep.policy, prep.threads)?)
        }
        Command::RhoCurve(common) => {
            let prep = prepare(&common, "rho-curve")?;
            let params = RhoCurveParams {
                ensemble: ensemble(&prep.config)?,
                lambda_grid: ascending_grid(
                    &prep.config.grids.lambda,
                    "rho-curve",
                    "grids.lambda",
                )?,
                t: ExperimentConfig::require(prep.config.params.t, "rho-curve", "params.t")?,
                replicas: prep.replicas,
                abort_budget: prep.config.abort_budget,
                level: LEVEL,
            };
            finish(&prep, estimate_rho_curve(&params, &prep.policy, prep.threads)?)
        }
        Command::DensityLb { common, shared_rep } => {
            let prep = prepare(&common, "density-lb")?;
            let config = &prep.config;
            let params = DensityLbParams {
                ensemble: ensemble(config)?,
                observer: ExperimentConfig::require(
                    config.params.observer,
                    "density-lb",
                    "params.observer",
                )?,
                horizon: ExperimentConfig::require(
                    config.params.horizon,
                    "density-lb",
                    "params.horizon",
                )?,
                half_width: config.params.slab_k.unwrap_or(2),
                tilt: config.params.tilt.unwrap_or(0.0),
                delta: config.params.delta.unwrap_or(0.0),
                shared_bands: shared_rep,
                replicas: prep.replicas,
                abort_budget: config.abort_budget,
                level: LEVEL,
            };
            finish(&prep, estimate_density_lb(&params, &prep.policy, prep.threads)?)
        }
        Command::OracleCheck(common) => {
            let prep = prepare(&common, "oracle-check")?;
            let params = OracleCheckParams {
                instances: prep.replicas,
                max_events: 12,
                max_radius: 3,
            };
            let out = run_oracle_check(&params, &prep.policy, prep.threads)?;
            let all_ok = out.report.all_ok;
            finish(&prep, out)?;
            if !all_ok {
                return Err(EstimatorError::Abort(
                    "sweep and oracle disagreed on some instance".into(),
                )
                .into());
            }
            Ok(())
        }
    }
}

fn run_tails(
    prep: &Prepared,
    epsilon: f64,
    command: &'static str,
) -> Result<EstimatorOutput<crate::estimators::tails::TailReport>, CliError> {
    let params = TailParams {
        ensemble: ensemble(&prep.config)?,
        epsilon_rho: epsilon,
        epsilon_walker: epsilon,
        t_grid: ascending_grid(&prep.config.grids.t, command, "grids.t")?,
        replicas: prep.replicas,
        zeros_replicas: (prep.replicas / 10).max(1),
        abort_budget: prep.config.abort_budget,
        level: LEVEL,
    };
    Ok(estimate_tails(&params, &prep.policy, prep.threads)?)
}
