//! Locating and classifying Nash equilibria and incentive equilibria.
//!
//! An incentive equilibrium is a rest point of the incentive dynamics,
//! characterized by `phi_ia(x) = x_ia * sum_b phi_ib(x)`. The solver runs a
//! damped fixed-point iteration on the normalized incentive map and falls
//! back to integrating the dynamics when the iteration stalls.

use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::dynamics::{field_raw, field_sup_norm, integrate, TrajectoryConfig};
use crate::error::{Error, Result};
use crate::game::{Game, MixedProfile, INTERIOR_EPS};
use crate::incentive::{incentive_raw, Incentive};

/// Solver contract: reported points have incentive residual below this.
pub const RESIDUAL_TOL: f64 = 1e-9;
/// Reports closer than this (Euclidean) are considered the same point.
pub const DEDUP_RADIUS: f64 = 1e-6;
/// Damping for the fixed-point iteration; undamped iteration can oscillate
/// across `(.)_+` kinks.
pub const DAMPING: f64 = 0.2;
const MAX_FP_ITERS: usize = 2000;
const FALLBACK_HORIZON: f64 = 100.0;

/// Max positive gain any player gets from a unilateral pure deviation;
/// zero exactly at Nash equilibria.
pub fn nash_residual(game: &Game, x: &MixedProfile) -> Result<f64> {
    let mut worst = 0.0_f64;
    for i in 0..game.players() {
        let u = game.utility(x, i)?;
        for alpha in 0..game.strategy_count(i) {
            let gain = game.utility_pure_vs_rest(i, alpha, x)? - u;
            worst = worst.max(gain);
        }
    }
    Ok(worst.max(0.0))
}

/// Max-norm of the incentive vector field; zero exactly at incentive
/// equilibria of the given incentive.
pub fn incentive_residual(spec: Incentive, game: &Game, x: &MixedProfile) -> Result<f64> {
    if x.shape() != game.strategy_counts() {
        return Err(Error::InvalidInput(format!(
            "profile shape {:?} does not match game shape {:?}",
            x.shape(),
            game.strategy_counts()
        )));
    }
    Ok(field_sup_norm(&field_raw(spec, game, x.points())))
}

/// A located equilibrium candidate with residuals and classification flags.
#[derive(Debug, Clone)]
pub struct EquilibriumReport {
    pub point: MixedProfile,
    pub nash_residual: f64,
    pub incentive_residual: f64,
    pub is_nash: bool,
    pub is_incentive_eq: bool,
    pub is_uniform: bool,
    pub is_interior: bool,
    /// Which seed produced the point.
    pub provenance: String,
}

impl Serialize for EquilibriumReport {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let mut s = serializer.serialize_struct("EquilibriumReport", 8)?;
        s.serialize_field("point", self.point.points())?;
        s.serialize_field("nash_residual", &self.nash_residual)?;
        s.serialize_field("incentive_residual", &self.incentive_residual)?;
        s.serialize_field("is_nash", &self.is_nash)?;
        s.serialize_field("is_incentive_eq", &self.is_incentive_eq)?;
        s.serialize_field("is_uniform", &self.is_uniform)?;
        s.serialize_field("is_interior", &self.is_interior)?;
        s.serialize_field("provenance", &self.provenance)?;
        s.end()
    }
}

impl EquilibriumReport {
    fn build(
        spec: Incentive,
        game: &Game,
        point: MixedProfile,
        provenance: String,
    ) -> Result<Self> {
        let nash = nash_residual(game, &point)?;
        let inc = incentive_residual(spec, game, &point)?;
        Ok(EquilibriumReport {
            is_nash: nash <= game.tolerance(),
            is_incentive_eq: inc < RESIDUAL_TOL,
            is_uniform: point.uniform_deviation() < 1e-6,
            is_interior: point.is_interior(INTERIOR_EPS),
            point,
            nash_residual: nash,
            incentive_residual: inc,
            provenance,
        })
    }
}

/// Default solver seeds: the uniform profile, every pure profile pulled 10%
/// toward uniform, and `random_count` seeded Dirichlet interior points.
pub fn default_seeds(game: &Game, random_count: usize, seed: u64) -> Vec<MixedProfile> {
    let mut seeds = vec![game.uniform_profile()];
    let counts = game.strategy_counts().to_vec();
    let total: usize = counts.iter().product();
    let pull = 0.1;
    for idx in 0..total {
        let mut rem = idx;
        let mut points = Vec::with_capacity(counts.len());
        for &s in counts.iter().rev() {
            let j = rem % s;
            rem /= s;
            let mut p = vec![pull / s as f64; s];
            p[j] += 1.0 - pull;
            points.push(p);
        }
        points.reverse();
        seeds.push(MixedProfile::new(points).expect("pulled corner is a valid profile"));
    }
    for k in 0..random_count {
        seeds.push(game.random_interior_profile(seed.wrapping_add(k as u64)));
    }
    seeds
}

/// Normalized incentive map `x_i <- phi_i / sum(phi_i)`; players whose
/// incentive sums to ~zero keep their current point (any point is fixed for
/// them). Blended output is clamped back onto the simplex.
fn damped_step(spec: Incentive, game: &Game, points: &[Vec<f64>]) -> Option<Vec<Vec<f64>>> {
    let phi = incentive_raw(spec, game, points);
    let zero_tol = 1e-14 * (1.0 + game.payoff_scale());
    let raw: Vec<Vec<f64>> = phi
        .iter()
        .zip(points)
        .map(|(phi_i, x_i)| {
            let total: f64 = phi_i.iter().sum();
            if total.abs() <= zero_tol {
                x_i.clone()
            } else {
                phi_i
                    .iter()
                    .zip(x_i)
                    .map(|(p, x)| (1.0 - DAMPING) * x + DAMPING * p / total)
                    .collect()
            }
        })
        .collect();
    MixedProfile::from_raw_normalized(raw).map(|p| p.points().to_vec())
}

fn fixed_point_from(spec: Incentive, game: &Game, start: &MixedProfile) -> Option<MixedProfile> {
    let mut points = start.points().to_vec();
    for _ in 0..MAX_FP_ITERS {
        let residual = field_sup_norm(&field_raw(spec, game, &points));
        if residual < RESIDUAL_TOL {
            return MixedProfile::from_raw_normalized(points);
        }
        points = damped_step(spec, game, &points)?;
    }
    None
}

/// Locate incentive equilibria from the given seeds. Each seed runs the
/// damped fixed-point iteration; stalled seeds fall back to integrating the
/// dynamics and polishing again. Results are deduplicated within
/// `DEDUP_RADIUS`; seeds that never reach `RESIDUAL_TOL` are dropped, so an
/// empty list is a possible (non-error) outcome.
pub fn find_incentive_equilibria(
    spec: Incentive,
    game: &Game,
    seeds: &[MixedProfile],
) -> Result<Vec<EquilibriumReport>> {
    if seeds.is_empty() {
        return Err(Error::InvalidInput("solver needs at least one seed".into()));
    }
    let mut reports: Vec<EquilibriumReport> = Vec::new();
    for (k, seed) in seeds.iter().enumerate() {
        if seed.shape() != game.strategy_counts() {
            return Err(Error::InvalidInput(format!(
                "seed {k} shape {:?} does not match game shape {:?}",
                seed.shape(),
                game.strategy_counts()
            )));
        }
        let mut found = fixed_point_from(spec, game, seed);
        if found.is_none() && seed.is_interior(INTERIOR_EPS) {
            let config = TrajectoryConfig {
                time_horizon: FALLBACK_HORIZON,
                record_stride: usize::MAX,
                field_tol: RESIDUAL_TOL * 0.1,
                ..Default::default()
            };
            if let Ok(traj) = integrate(spec, game, seed, &config) {
                found = fixed_point_from(spec, game, &traj.terminal().profile);
            }
        }
        if let Some(point) = found {
            if reports
                .iter()
                .all(|r: &EquilibriumReport| r.point.distance(&point) > DEDUP_RADIUS)
            {
                reports.push(EquilibriumReport::build(
                    spec,
                    game,
                    point,
                    format!("seed:{k}"),
                )?);
            }
        }
    }
    Ok(reports)
}

/// Executable form of the uniform-Nash lemma.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct LemmaOutcome {
    /// Nash residual of the uniform profile is zero within tolerance.
    pub uniform_is_nash: bool,
    /// Every player's reduced matrix has equal row sums within tolerance.
    pub equal_row_sums: bool,
    /// The two predicates coincide (the lemma says they always do).
    pub agreement: bool,
}

/// Check "uniform is Nash" and "equal row sums" independently and report
/// whether they agree.
pub fn uniform_nash_iff_equal_row_sums(game: &Game) -> Result<LemmaOutcome> {
    let uniform_is_nash = nash_residual(game, &game.uniform_profile())? <= game.tolerance();
    let equal_row_sums = game.equal_row_sums();
    Ok(LemmaOutcome {
        uniform_is_nash,
        equal_row_sums,
        agreement: uniform_is_nash == equal_row_sums,
    })
}

/// True iff every player's rows have equal above-average excesses. Requires
/// the uniform profile to be Nash (the proposition's hypothesis); when true,
/// the uniform profile is a dash incentive equilibrium.
pub fn proposition1_check(game: &Game) -> Result<bool> {
    for i in 0..game.players() {
        let stats = game.row_stats(i);
        let first = stats[0].row_sum;
        if stats
            .iter()
            .any(|s| (s.row_sum - first).abs() > game.tolerance())
        {
            return Err(Error::Precondition(format!(
                "uniform is not a Nash equilibrium: player {i} has unequal row sums"
            )));
        }
    }
    Ok((0..game.players()).all(|i| {
        let stats = game.row_stats(i);
        let first = stats[0].above_average_excess;
        stats
            .iter()
            .all(|s| (s.above_average_excess - first).abs() <= game.tolerance())
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn counterexample_one() -> Game {
        Game::symmetric_two_player(vec![
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, -3.0, 1.0],
        ])
        .unwrap()
    }

    fn counterexample_two() -> Game {
        Game::symmetric_two_player(vec![vec![1.0, 2.0], vec![3.0, 0.0]]).unwrap()
    }

    /// Independent oracle: bisection root of 4p^3 - 7p^2 + 5p - 1 on (0, 1),
    /// the symmetric dash equilibrium weight of counterexample two.
    fn cubic_root_oracle() -> f64 {
        let f = |p: f64| 4.0 * p.powi(3) - 7.0 * p.powi(2) + 5.0 * p - 1.0;
        let (mut lo, mut hi) = (0.25, 0.45);
        assert!(f(lo) < 0.0 && f(hi) > 0.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if f(mid) < 0.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    #[test]
    fn nash_residual_examples() {
        let std = Game::rps(1.0, 1.0).unwrap();
        assert!(nash_residual(&std, &std.uniform_profile()).unwrap() < 1e-15);

        let g = counterexample_one();
        let p = vec![1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0];
        let interior = MixedProfile::new(vec![p.clone(), p]).unwrap();
        assert!(nash_residual(&g, &interior).unwrap() < 1e-12);
        // at uniform the best deviation gains 1/3
        assert_abs_diff_eq!(
            nash_residual(&g, &g.uniform_profile()).unwrap(),
            1.0 / 3.0,
            epsilon = 1e-12
        );
    }

    #[test]
    fn incentive_residual_examples() {
        let bad = Game::rps(1.0, 2.0).unwrap();
        assert!(incentive_residual(Incentive::Dash, &bad, &bad.uniform_profile()).unwrap() < 1e-14);

        let g = counterexample_two();
        assert_abs_diff_eq!(
            incentive_residual(Incentive::Dash, &g, &g.uniform_profile()).unwrap(),
            0.5,
            epsilon = 1e-12
        );
    }

    #[test]
    fn solver_finds_uniform_on_bad_rps() {
        let g = Game::rps(1.0, 2.0).unwrap();
        let seeds = default_seeds(&g, 20, 11);
        let reports = find_incentive_equilibria(Incentive::Dash, &g, &seeds).unwrap();
        let interior: Vec<_> = reports.iter().filter(|r| r.is_interior).collect();
        assert_eq!(interior.len(), 1);
        assert!(interior[0].is_uniform);
        assert!(interior[0].incentive_residual < RESIDUAL_TOL);
        assert!(interior[0].is_nash);
    }

    #[test]
    fn solver_matches_cubic_oracle_on_counterexample_two() {
        let g = counterexample_two();
        let seeds = default_seeds(&g, 20, 3);
        let reports = find_incentive_equilibria(Incentive::Dash, &g, &seeds).unwrap();
        let interior: Vec<_> = reports.iter().filter(|r| r.is_interior).collect();
        assert!(!interior.is_empty());
        let root = cubic_root_oracle();
        for r in &interior {
            for i in 0..2 {
                assert_abs_diff_eq!(r.point.point(i)[0], root, epsilon = 1e-6);
            }
            // regime check: mixed payoff sits strictly between the two
            // active branches of the dash sum
            let u = g.utility(&r.point, 0).unwrap();
            assert!(u > 1.0 && u < 2.0);
            assert!((r.point.point(0)[0] - 0.31).abs() < 0.005);
            assert!(!r.is_nash, "dash equilibrium here is not Nash");
        }
    }

    #[test]
    fn solver_finds_uniform_on_counterexample_one() {
        let g = counterexample_one();
        let seeds = default_seeds(&g, 20, 5);
        let reports = find_incentive_equilibria(Incentive::Dash, &g, &seeds).unwrap();
        let interior: Vec<_> = reports.iter().filter(|r| r.is_interior).collect();
        assert_eq!(interior.len(), 1);
        assert!(interior[0].is_uniform);
    }

    #[test]
    fn solver_outputs_are_rest_points() {
        let g = Game::rps(1.0, 2.0).unwrap();
        let seeds = default_seeds(&g, 5, 2);
        for spec in [Incentive::Dash, Incentive::Bnn] {
            for r in find_incentive_equilibria(spec, &g, &seeds).unwrap() {
                if !r.point.is_interior(INTERIOR_EPS) {
                    continue;
                }
                let config = TrajectoryConfig {
                    time_horizon: 10.0,
                    ..Default::default()
                };
                let traj = integrate(spec, &g, &r.point, &config).unwrap();
                assert!(traj.terminal().profile.distance(&r.point) < 1e-6);
            }
        }
    }

    #[test]
    fn lemma_outcome_on_named_games() {
        let bad = Game::rps(1.0, 2.0).unwrap();
        let o = uniform_nash_iff_equal_row_sums(&bad).unwrap();
        assert_eq!(
            (o.uniform_is_nash, o.equal_row_sums, o.agreement),
            (true, true, true)
        );

        let c1 = counterexample_one();
        let o = uniform_nash_iff_equal_row_sums(&c1).unwrap();
        assert_eq!(
            (o.uniform_is_nash, o.equal_row_sums, o.agreement),
            (false, false, true)
        );

        let c2 = counterexample_two();
        let o = uniform_nash_iff_equal_row_sums(&c2).unwrap();
        assert_eq!(
            (o.uniform_is_nash, o.equal_row_sums, o.agreement),
            (true, true, true)
        );
    }

    #[test]
    fn proposition1_on_named_games() {
        let bad = Game::rps(1.0, 2.0).unwrap();
        assert!(proposition1_check(&bad).unwrap());
        // equal excesses imply the uniform profile is a dash equilibrium
        assert!(incentive_residual(Incentive::Dash, &bad, &bad.uniform_profile()).unwrap() < 1e-9);

        let c2 = counterexample_two();
        assert!(!proposition1_check(&c2).unwrap());

        let constant = Game::symmetric_two_player(vec![vec![4.0; 2]; 2]).unwrap();
        assert!(proposition1_check(&constant).unwrap());
    }

    #[test]
    fn proposition1_precondition_names_the_player() {
        let c1 = counterexample_one();
        match proposition1_check(&c1) {
            Err(Error::Precondition(msg)) => assert!(msg.contains("player 0")),
            other => panic!("expected precondition error, got {other:?}"),
        }
    }

    #[test]
    fn report_serializes_to_json() {
        let g = Game::rps(1.0, 2.0).unwrap();
        let seeds = vec![g.uniform_profile()];
        let reports = find_incentive_equilibria(Incentive::Dash, &g, &seeds).unwrap();
        let text = serde_json::to_string_pretty(&reports).unwrap();
        assert!(text.contains("incentive_residual"));
        let parsed: serde_json::Value = serde_json::from_str(&text).unwrap();
        assert!(parsed[0]["is_uniform"].as_bool().unwrap());
    }

    #[test]
    fn empty_seed_list_is_an_error() {
        let g = Game::rps(1.0, 2.0).unwrap();
        assert!(find_incentive_equilibria(Incentive::Dash, &g, &[]).is_err());
    }
}
