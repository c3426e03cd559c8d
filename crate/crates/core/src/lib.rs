//! A numerical laboratory for incentive dynamics on finite normal-form
//! games: evaluate incentive functions, integrate the incentive ODE on the
//! product of simplices, locate Nash and incentive equilibria, collect
//! stability evidence, and render ternary phase portraits.

pub mod analysis;
pub mod dynamics;
pub mod equilibrium;
pub mod error;
pub mod game;
pub mod incentive;
pub mod portrait;
pub mod verify;

pub use analysis::{
    classify_long_run, iss_margin, iss_margins_per_player, jacobian_eigenvalues,
    jacobian_eigenvalues_single_population, kl_decay_check, kl_divergence, lyapunov_f,
    reduced_iss_margin, stability_report, LongRunClass, StabilityConfig, StabilityReport,
    StabilityVerdict,
};
pub use dynamics::{
    integrate, single_population_field, speed_grid, vector_field, GridNode, IntegratorKind,
    SpeedGrid, TerminalStatus, Trajectory, TrajectoryConfig, TrajectorySample,
};
pub use equilibrium::{
    default_seeds, find_incentive_equilibria, incentive_residual, nash_residual,
    proposition1_check, uniform_nash_iff_equal_row_sums, EquilibriumReport, LemmaOutcome,
};
pub use error::{Error, Result};
pub use game::{Game, MixedProfile, RowStats};
pub use incentive::{dash_zero_set_check, incentive_vector, Incentive, IncentiveVector};
pub use portrait::{render_portrait, PortraitSpec};
