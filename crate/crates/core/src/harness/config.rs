//! TOML experiment configuration.
//!
//! A config file fully determines a run: kernel rates, environment law,
//! grids, replica count and the master seed. Estimator-specific scalars
//! live in `[params]`; a subcommand rejects a config that is missing a
//! field it needs, naming the field.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::graphical::safe_radius;
use crate::kernel::{build_kernel, KernelSpec};
use crate::lattice::Boundary;

use super::HarnessError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub replicas: usize,
    pub master_seed: u64,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    /// Largest tolerated fraction of aborted replicas before the whole run
    /// fails (aborts come from walks that leave their safety margin).
    #[serde(default = "default_abort_budget")]
    pub abort_budget: f64,
    pub kernel: KernelConfig,
    pub environment: EnvironmentConfig,
    #[serde(default)]
    pub driver: DriverConfig,
    #[serde(default)]
    pub grids: Grids,
    #[serde(default)]
    pub params: Params,
}

fn default_abort_budget() -> f64 {
    0.01
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelConfig {
    pub dim: u8,
    pub rates: Vec<RateEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RateEntry {
    pub state: u8,
    pub jump: Vec<i64>,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnvironmentConfig {
    pub lambda: f64,
    #[serde(default)]
    pub radius: RadiusSpec,
    #[serde(default = "default_boundary")]
    pub boundary: Boundary,
    #[serde(default)]
    pub initial: InitialLaw,
    /// Truncation pad factor in the safety rule R >= window + pad*lambda*T.
    #[serde(default = "default_pad")]
    pub pad: f64,
    /// Equilibration time for upper-invariant initial configurations.
    #[serde(default = "default_burn_in")]
    pub burn_in: f64,
}

fn default_boundary() -> Boundary {
    Boundary::Truncate
}

fn default_pad() -> f64 {
    crate::graphical::DEFAULT_PAD
}

fn default_burn_in() -> f64 {
    15.0
}

/// Box radius: a literal value, or `"auto"` to apply the safety rule to the
/// experiment's own reading window and horizon.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RadiusSpec {
    Fixed(i64),
    Auto(AutoTag),
}

impl Default for RadiusSpec {
    fn default() -> Self {
        RadiusSpec::Auto(AutoTag::Auto)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AutoTag {
    Auto,
}

/// Law of the initial environment configuration.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitialLaw {
    Zeros,
    Ones,
    UpperInvariant,
    Bernoulli(f64),
}

impl Default for InitialLaw {
    fn default() -> Self {
        InitialLaw::Ones
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DriverConfig {
    /// Uniformization rate override; defaults to the kernel's own gamma.
    pub gamma: Option<f64>,
}

/// Grids swept by the estimators. Only the grids a subcommand uses need to
/// be present.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Grids {
    /// Observation times.
    pub t: Vec<f64>,
    /// Infection rates (rho-curve, slab sweeps).
    pub lambda: Vec<f64>,
    /// Window start times (coupling decay, cone functional).
    pub window_t: Vec<f64>,
}

/// Scalar knobs for individual estimators.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Params {
    /// Single observation time (subadditivity base point, rho-curve).
    pub t: Option<f64>,
    /// Increment length for the subadditive functional.
    pub s: Option<f64>,
    /// Bernoulli density (coupling initial, walker-tail initial).
    pub density: Option<f64>,
    /// Survival horizon for slab experiments.
    pub t_end: Option<f64>,
    /// Slab half-width K.
    pub slab_k: Option<i64>,
    /// Slab tilt L.
    pub tilt: Option<f64>,
    /// Look-back window for tilted slab observers.
    pub delta: Option<f64>,
    /// Deviation size for tail estimates.
    pub epsilon: Option<f64>,
    /// Cone inclination m.
    pub cone_m: Option<f64>,
    /// Reference configuration index (0 or 1) for the cone functional.
    pub reference: Option<u8>,
    /// Observer scheme for density lower bounds.
    pub observer: Option<ObserverKind>,
    /// Walk horizon for observer experiments.
    pub horizon: Option<f64>,
    /// Largest lag checked by the subadditivity distribution test.
    pub ks_max_k: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ObserverKind {
    Rightmost,
    Slab,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<ExperimentConfig, HarnessError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| HarnessError::Io { path: path.to_path_buf(), source })?;
        let config: ExperimentConfig = toml::from_str(&text)
            .map_err(|e| HarnessError::Parse { path: path.to_path_buf(), message: e.to_string() })?;
        config.validate()?;
        Ok(config)
    }

    pub fn from_toml(text: &str) -> Result<ExperimentConfig, HarnessError> {
        let config: ExperimentConfig = toml::from_str(text).map_err(|e| HarnessError::Parse {
            path: PathBuf::from("<inline>"),
            message: e.to_string(),
        })?;
        config.validate()?;
        Ok(config)
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        fn reject(field: &'static str, message: String) -> Result<(), HarnessError> {
            Err(HarnessError::Validation { field, message })
        }
        if self.name.is_empty() {
            return reject("name", "must be non-empty".into());
        }
        if self.replicas == 0 {
            return reject("replicas", "must be at least 1".into());
        }
        if !(0.0..=1.0).contains(&self.abort_budget) {
            return reject("abort_budget", format!("{} is not in [0, 1]", self.abort_budget));
        }
        self.build_kernel()?;
        let env = &self.environment;
        if !env.lambda.is_finite() || env.lambda < 0.0 {
            return reject("environment.lambda", format!("{} is not a rate", env.lambda));
        }
        if let RadiusSpec::Fixed(r) = env.radius {
            if r < 1 {
                return reject("environment.radius", format!("{r} is below 1"));
            }
        }
        if !env.pad.is_finite() || env.pad <= 0.0 {
            return reject("environment.pad", format!("{} is not positive", env.pad));
        }
        if env.burn_in < 0.0 {
            return reject("environment.burn_in", "must be nonnegative".into());
        }
        if let InitialLaw::Bernoulli(p) = env.initial {
            if !(0.0..=1.0).contains(&p) {
                return reject("environment.initial", format!("bernoulli({p}) is not in [0, 1]"));
            }
        }
        if let Some(g) = self.driver.gamma {
            if !g.is_finite() || g <= 0.0 {
                return reject("driver.gamma", format!("{g} is not a positive rate"));
            }
        }
        if let Some(e) = self.params.epsilon {
            if !e.is_finite() || e <= 0.0 {
                return reject("params.epsilon", format!("{e} is not positive"));
            }
        }
        if let Some(d) = self.params.density {
            if !(0.0..=1.0).contains(&d) {
                return reject("params.density", format!("{d} is not in [0, 1]"));
            }
        }
        if let Some(i) = self.params.reference {
            if i > 1 {
                return reject("params.reference", format!("{i} is not 0 or 1"));
            }
        }
        Ok(())
    }

    pub fn build_kernel(&self) -> Result<KernelSpec, HarnessError> {
        let entries: Vec<(u8, Vec<i64>, f64)> =
            self.kernel.rates.iter().map(|e| (e.state, e.jump.clone(), e.rate)).collect();
        build_kernel(self.kernel.dim.into(), &entries)
            .map_err(|e| HarnessError::Validation { field: "kernel.rates", message: e.to_string() })
    }

    /// Uniformization rate: the explicit override or the kernel's gamma.
    pub fn gamma(&self, kernel: &KernelSpec) -> f64 {
        self.driver.gamma.unwrap_or_else(|| kernel.gamma())
    }

    /// Box radius for an experiment that reads a window of radius `window`
    /// at rate `lambda` over `[0, horizon]`.
    pub fn resolve_radius(&self, window: i64, lambda: f64, horizon: f64) -> i64 {
        match self.environment.radius {
            RadiusSpec::Fixed(r) => r,
            RadiusSpec::Auto(_) => safe_radius(window, lambda, horizon, self.environment.pad),
        }
    }

    /// A required scalar parameter, with the subcommand named in the error.
    pub fn require<T: Copy>(
        value: Option<T>,
        command: &'static str,
        field: &'static str,
    ) -> Result<T, HarnessError> {
        value.ok_or(HarnessError::MissingField { command, field })
    }
}
