//! Event-driven simulation of a random walk in a dynamic random environment.
//!
//! The environment is the contact process on a finite box of Z^d, simulated
//! through its graphical representation (death marks at rate 1 per site,
//! infection arrows at rate lambda per directed edge). The walker jumps at
//! the arrivals of an independent rate-gamma Poisson clock, choosing between
//! two jump laws according to whether its current site is occupied, with the
//! two laws fed by separate uniform sequences so that walks in ordered
//! environments can be coupled pathwise.
//!
//! Modules:
//! - [`kernel`]: two-row jump kernels, uniformization, CDF sampling.
//! - [`lattice`]: finite boxes and bit-set configurations.
//! - [`graphical`]: event fields, forward/backward/coupled evolutions.
//! - [`walker`]: the coupled walk, generalized (observer-gated) walks.
//! - [`estimators`]: Monte Carlo experiments with reporting.
//! - [`harness`]: configuration, labeled RNG streams, CLI.

pub mod estimators;
pub mod graphical;
pub mod harness;
pub mod kernel;
pub mod lattice;
pub mod stats;
pub mod walker;

#[cfg(doctest)]
mod book {
    //! The guide chapters double as doc-tests so the book stays in sync
    //! with the API.
    macro_rules! chapter {
        ($name:ident, $path:literal) => {
            #[doc = include_str!($path)]
            mod $name {}
        };
    }
    chapter!(introduction, "../../../book/src/introduction.md");
    chapter!(kernels, "../../../book/src/kernels.md");
    chapter!(graphical, "../../../book/src/graphical.md");
    chapter!(walker, "../../../book/src/walker.md");
    chapter!(observers, "../../../book/src/observers.md");
    chapter!(estimators, "../../../book/src/estimators.md");
    chapter!(cli, "../../../book/src/cli.md");
}
