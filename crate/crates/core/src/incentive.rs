//! The six incentive functions mapping a mixed profile to per-player
//! incentive vectors. Each is chosen so that the incentive dynamics
//! `dx = phi - x * sum(phi)` reduce to the named classical dynamic on the
//! interior of the simplex.
//!
//! `(.)_+` is exact `max(., 0)` throughout; the resulting fields are
//! continuous but only piecewise smooth.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::game::{Game, MixedProfile};

/// Which incentive function to use, with parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Incentive {
    /// phi_a = x_a * u_a; generates the replicator dynamics.
    Replicator,
    /// phi_a = (u_a - u)_+; Nash's excess-payoff incentive (BNN dynamics).
    Bnn,
    /// phi_a = softmax(u_a / eta); generates the logit dynamics.
    Logit { eta: f64 },
    /// phi_a = sum_b x_b (u_a - u_b)_+; pairwise-comparison incentive.
    /// This is the incentive-form variant: the outflow term of the
    /// generated dynamic differs from the textbook Smith dynamic.
    Smith,
    /// phi_a = u_a - mean_b u_b; matches the projection dynamics on the
    /// interior (no boundary tangent-cone handling).
    Projection,
    /// phi_a = sum_g (a_{ag} - u)_+ over the player's reduced matrix:
    /// payoff entries exceeding the current mixed payoff, summed.
    Dash,
}

impl Incentive {
    pub fn logit(eta: f64) -> Result<Self> {
        if !(eta > 0.0) {
            return Err(Error::InvalidInput(format!(
                "logit noise must be positive, got {eta}"
            )));
        }
        Ok(Incentive::Logit { eta })
    }

    /// Nonnegative-by-construction kinds (bnn, dash, smith, logit).
    pub fn is_sign_definite(&self) -> bool {
        !matches!(self, Incentive::Replicator | Incentive::Projection)
    }
}

impl FromStr for Incentive {
    type Err = Error;

    /// CLI string forms: `replicator|bnn|logit:<eta>|smith|projection|dash`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "replicator" => Ok(Incentive::Replicator),
            "bnn" => Ok(Incentive::Bnn),
            "smith" => Ok(Incentive::Smith),
            "projection" => Ok(Incentive::Projection),
            "dash" => Ok(Incentive::Dash),
            other => {
                if let Some(eta) = other.strip_prefix("logit:") {
                    let eta: f64 = eta.parse().map_err(|_| {
                        Error::InvalidInput(format!("bad logit noise in '{other}'"))
                    })?;
                    Incentive::logit(eta)
                } else {
                    Err(Error::InvalidInput(format!(
                        "unknown incentive '{other}' (expected replicator|bnn|logit:<eta>|smith|projection|dash)"
                    )))
                }
            }
        }
    }
}

impl fmt::Display for Incentive {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Incentive::Replicator => write!(f, "replicator"),
            Incentive::Bnn => write!(f, "bnn"),
            Incentive::Logit { eta } => write!(f, "logit:{eta}"),
            Incentive::Smith => write!(f, "smith"),
            Incentive::Projection => write!(f, "projection"),
            Incentive::Dash => write!(f, "dash"),
        }
    }
}

/// Per-player incentive vectors phi_i.
#[derive(Debug, Clone, PartialEq)]
pub struct IncentiveVector {
    per_player: Vec<Vec<f64>>,
}

impl IncentiveVector {
    pub fn per_player(&self) -> &[Vec<f64>] {
        &self.per_player
    }

    pub fn player(&self, i: usize) -> &[f64] {
        &self.per_player[i]
    }

    pub fn into_inner(self) -> Vec<Vec<f64>> {
        self.per_player
    }
}

/// Evaluate the incentive function at a validated profile.
pub fn incentive_vector(spec: Incentive, game: &Game, x: &MixedProfile) -> Result<IncentiveVector> {
    if x.shape() != game.strategy_counts() {
        return Err(Error::InvalidInput(format!(
            "profile shape {:?} does not match game shape {:?}",
            x.shape(),
            game.strategy_counts()
        )));
    }
    if let Incentive::Logit { eta } = spec {
        if !(eta > 0.0) {
            return Err(Error::InvalidInput(format!(
                "logit noise must be positive, got {eta}"
            )));
        }
    }
    Ok(IncentiveVector {
        per_player: incentive_raw(spec, game, x.points()),
    })
}

/// Core evaluation on raw per-player points; integrator stages call this on
/// slightly off-simplex states, so no profile validation here.
pub(crate) fn incentive_raw(spec: Incentive, game: &Game, points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    (0..game.players())
        .map(|i| {
            let s = game.strategy_count(i);
            let pure: Vec<f64> = (0..s)
                .map(|alpha| game.utility_pure_vs_rest_unchecked(i, alpha, points))
                .collect();
            match spec {
                Incentive::Replicator => (0..s).map(|a| points[i][a] * pure[a]).collect(),
                Incentive::Bnn => {
                    let u = game.utility_unchecked(points, i);
                    pure.iter().map(|&ua| (ua - u).max(0.0)).collect()
                }
                Incentive::Logit { eta } => {
                    let m = pure.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                    let exps: Vec<f64> = pure.iter().map(|&ua| ((ua - m) / eta).exp()).collect();
                    let z: f64 = exps.iter().sum();
                    exps.iter().map(|e| e / z).collect()
                }
                Incentive::Smith => (0..s)
                    .map(|a| {
                        (0..s)
                            .map(|b| points[i][b] * (pure[a] - pure[b]).max(0.0))
                            .sum()
                    })
                    .collect(),
                Incentive::Projection => {
                    let mean = pure.iter().sum::<f64>() / s as f64;
                    pure.iter().map(|&ua| ua - mean).collect()
                }
                Incentive::Dash => {
                    let u = game.utility_unchecked(points, i);
                    game.reduced_matrix(i)
                        .iter()
                        .map(|row| row.iter().map(|&a| (a - u).max(0.0)).sum())
                        .collect()
                }
            }
        })
        .collect()
}

/// True iff the dash incentive vector of every player is identically zero,
/// which happens exactly when each player's mixed payoff is at least the
/// maximum entry of every row of its reduced matrix.
pub fn dash_zero_set_check(game: &Game, x: &MixedProfile) -> Result<bool> {
    let phi = incentive_vector(Incentive::Dash, game, x)?;
    let direct = phi.per_player().iter().all(|p| p.iter().all(|&v| v == 0.0));
    let characterized = (0..game.players()).all(|i| {
        let u = game.utility_unchecked(x.points(), i);
        game.reduced_matrix(i)
            .iter()
            .all(|row| row.iter().cloned().fold(f64::NEG_INFINITY, f64::max) <= u)
    });
    debug_assert_eq!(direct, characterized);
    Ok(direct)
}
