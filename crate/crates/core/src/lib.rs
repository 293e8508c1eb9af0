//! Simulation and structural estimation of a voluntary resource-sharing game
//! played on endogenous directed networks.
//!
//! Players choose whom to share with and how much of their endowment to
//! contribute; shared tokens are multiplied and split between the sharer
//! and its recipients. Behavior follows logit responses to a potential that
//! weighs private cost against generalized and direct reciprocity.

mod choice;
pub mod dynamics;
pub mod error;
pub mod estimation;
pub mod game;
pub mod io;
pub mod metrics;
pub mod model;
pub mod scaling;
pub mod stability;
pub mod uncertainty;

pub use dynamics::{
    choice_distribution, simulate_panel, step_exact, step_mh, ChoiceTable, GroupPanel, SimConfig,
};
pub use error::{Error, Result};
pub use game::{
    behavioral_beta, externality, mpcr, payoff, potential, ContributionProfile, CrossSection, Grid,
    InfoSet, LinkSet, MpcrSpec, MpcrTable, NetworkState, PlayerCovariates, Regime, ThetaParams,
};
pub use io::{pca_covariates, read_panel, write_panel, PanelSchema, RunConfig};
pub use metrics::{did_regression, outcome_row, OutcomeRow};
pub use model::{BoundaryRule, Model};
pub use stability::{
    classify_motif, is_behaviorally_stable, is_efficient_structure, is_topologically_stable,
    stability_census, Motif, StabilitySetting,
};
pub use uncertainty::{
    bootstrap_mc, bootstrap_np, se_asymptotic, BootstrapOptions, BootstrapReport,
};
