//! Multiple structural break detection in multivariate regressions with
//! integrated and stationary regressors.
//!
//! The two-step estimator runs a group LASSO path over time-indexed
//! coefficient changes to collect break candidates ([`glasso`]), then prunes
//! them with an information criterion ([`selection`]). [`dp`] holds the
//! exact least-squares segmentation used as a baseline, [`sim`] and
//! [`montecarlo`] the simulation design, and [`post`] the per-regime
//! estimation that follows break detection.

pub mod design;
pub mod dp;
pub mod error;
pub mod estimator;
pub mod glasso;
mod linalg;
pub mod model;
pub mod montecarlo;
pub mod post;
pub mod selection;
pub mod sim;

pub use dp::{dp_segment, runtime_compare, DPConfig};
pub use error::{Error, Result};
pub use estimator::{two_step, SelectionMethod, TwoStepConfig, TwoStepResult};
pub use glasso::{group_lars_path, kkt_verify, FirstStepResult, PathConfig};
pub use model::{build_scaled_regressors, BreakSet, SegmentedFit, SelectionMask, TimeSeriesPanel};
pub use montecarlo::{hausdorff_distance, run_scenario, MCReport, ScenarioConfig};
pub use post::{dynamic_ols_augment, post_lasso_fit, sieve_bootstrap_se, BootstrapConfig};
pub use selection::{backward_eliminate, exhaustive_select, information_criterion, segment_ssr, IcConfig};
pub use sim::{scenario_preset, simulate_dgp, DgpConfig, Scenario, Variant};
