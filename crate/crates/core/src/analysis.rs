//! Stability diagnostics for incentive equilibria: the incentive-stability
//! margin, the reciprocal-sum Lyapunov function and its KL companion,
//! long-run trajectory classification, and finite-difference Jacobian
//! spectra on the simplex tangent space.

use nalgebra::{Complex, DMatrix};
use serde::ser::SerializeStruct;
use serde::{Serialize, Serializer};

use crate::dynamics::{field_raw, integrate, Trajectory, TrajectoryConfig};
use crate::equilibrium::incentive_residual;
use crate::error::{Error, Result};
use crate::game::{Game, MixedProfile, INTERIOR_EPS};
use crate::incentive::Incentive;

pub use crate::dynamics::single_population_field;

/// Finite-difference step for Jacobians and directional derivatives.
const FD_STEP: f64 = 1e-6;
/// Slack allowed on "nonincreasing" checks along integrated trajectories.
const MONOTONE_SLACK: f64 = 1e-6;
/// Relative tolerance for the KL-rate / ISS-margin identity.
const KL_IDENTITY_RTOL: f64 = 1e-4;
/// Margins below this floor are skipped in the relative identity check.
const KL_IDENTITY_FLOOR: f64 = 1e-8;

/// Per-player incentive-stability margins at `x` relative to `x_hat`:
/// `sum_a xhat_ia phi_ia / x_ia - sum_a phi_ia`. A positive margin is the
/// incentive-stability inequality at `x`; along the dynamics, KL(xhat||x)
/// decays at exactly the sum of these margins.
pub fn iss_margins_per_player(
    spec: Incentive,
    game: &Game,
    x_hat: &MixedProfile,
    x: &MixedProfile,
) -> Result<Vec<f64>> {
    if x.shape() != game.strategy_counts() || x_hat.shape() != game.strategy_counts() {
        return Err(Error::InvalidInput(
            "profile shapes must match the game".into(),
        ));
    }
    if !x.is_interior(INTERIOR_EPS) {
        return Err(Error::Boundary(
            "incentive-stability margin needs an interior point (1/x quotients)".into(),
        ));
    }
    let phi = crate::incentive::incentive_raw(spec, game, x.points());
    Ok((0..game.players())
        .map(|i| {
            let weighted: f64 = (0..game.strategy_count(i))
                .map(|a| x_hat.point(i)[a] * phi[i][a] / x.point(i)[a])
                .sum();
            let total: f64 = phi[i].iter().sum();
            weighted - total
        })
        .collect())
}

/// Min over players of the per-player margins.
pub fn iss_margin(
    spec: Incentive,
    game: &Game,
    x_hat: &MixedProfile,
    x: &MixedProfile,
) -> Result<f64> {
    Ok(iss_margins_per_player(spec, game, x_hat, x)?
        .into_iter()
        .fold(f64::INFINITY, f64::min))
}

/// For a player whose incentive components all coincide (permuted-rows
/// games), the margin collapses to `(phi_1 / s) * (sum_a 1/x_a - s^2)`.
pub fn reduced_iss_margin(
    spec: Incentive,
    game: &Game,
    player: usize,
    x: &MixedProfile,
) -> Result<f64> {
    if !x.is_interior(INTERIOR_EPS) {
        return Err(Error::Boundary(
            "reduced margin needs an interior point".into(),
        ));
    }
    let phi = crate::incentive::incentive_raw(spec, game, x.points());
    let s = game.strategy_count(player) as f64;
    let inv_sum: f64 = x.point(player).iter().map(|v| 1.0 / v).sum();
    Ok(phi[player][0] / s * (inv_sum - s * s))
}

/// `sum_a 1 / x_a`; global minimum `s^2` at the uniform point.
pub fn lyapunov_f(point: &[f64]) -> Result<f64> {
    if point.iter().any(|&v| v < INTERIOR_EPS) {
        return Err(Error::Boundary(
            "reciprocal-sum Lyapunov function needs an interior point".into(),
        ));
    }
    Ok(point.iter().map(|&v| 1.0 / v).sum())
}

/// KL divergence summed over players; `q` must be interior.
pub fn kl_divergence(p: &MixedProfile, q: &MixedProfile) -> Result<f64> {
    if p.shape() != q.shape() {
        return Err(Error::InvalidInput("profiles must share a shape".into()));
    }
    if !q.is_interior(INTERIOR_EPS) {
        return Err(Error::Boundary("KL divergence needs interior q".into()));
    }
    let mut total = 0.0;
    for (pi, qi) in p.points().iter().zip(q.points()) {
        for (&pa, &qa) in pi.iter().zip(qi) {
            if pa > 0.0 {
                total += pa * (pa / qa).ln();
            }
        }
    }
    Ok(total)
}

/// Time derivative of `t -> KL(x_hat || x + t * field)` at `t = 0`, by a
/// central difference along the field direction. The step scales with the
/// smallest coordinate: a fixed step drowns tiny rates in log cancellation
/// near the equilibrium and overshoots the boundary at extreme points.
fn kl_rate_along_field(
    spec: Incentive,
    game: &Game,
    x_hat: &MixedProfile,
    x: &MixedProfile,
) -> Result<f64> {
    let field = field_raw(spec, game, x.points());
    let min_coord = x
        .points()
        .iter()
        .flat_map(|p| p.iter())
        .fold(f64::INFINITY, |m, &v| m.min(v));
    let step = (1e-3 * min_coord).max(1e-10);
    let shifted = |sign: f64| -> Result<f64> {
        let pts: Vec<Vec<f64>> = x
            .points()
            .iter()
            .zip(&field)
            .map(|(p, f)| {
                p.iter()
                    .zip(f)
                    .map(|(&v, &d)| v + sign * step * d)
                    .collect()
            })
            .collect();
        let mut total = 0.0;
        for (pi, qi) in x_hat.points().iter().zip(&pts) {
            for (&pa, &qa) in pi.iter().zip(qi) {
                if pa > 0.0 {
                    if qa <= 0.0 {
                        return Err(Error::Boundary("field step crossed the boundary".into()));
                    }
                    total += pa * (pa / qa).ln();
                }
            }
        }
        Ok(total)
    };
    Ok((shifted(1.0)? - shifted(-1.0)?) / (2.0 * step))
}

/// Check that `KL(x_hat || x(t))` is nonincreasing along the trajectory
/// (within integrator slack) and that its rate matches the negated sum of
/// per-player margins pointwise. Returns false on either failure.
pub fn kl_decay_check(
    spec: Incentive,
    game: &Game,
    x_hat: &MixedProfile,
    trajectory: &Trajectory,
) -> Result<bool> {
    let mut prev: Option<f64> = None;
    for sample in &trajectory.samples {
        let kl = kl_divergence(x_hat, &sample.profile)?;
        if let Some(p) = prev {
            if kl > p + MONOTONE_SLACK {
                return Ok(false);
            }
        }
        prev = Some(kl);
        let margins = iss_margins_per_player(spec, game, x_hat, &sample.profile)?;
        let margin_sum: f64 = margins.iter().sum();
        if margin_sum.abs() > KL_IDENTITY_FLOOR {
            let rate = kl_rate_along_field(spec, game, x_hat, &sample.profile)?;
            if (rate + margin_sum).abs() > KL_IDENTITY_RTOL * margin_sum.abs() + 1e-10 {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Long-run classification of a trajectory against a list of equilibria.
#[derive(Debug, Clone, PartialEq)]
pub enum LongRunClass {
    /// Terminal state parked at the listed equilibrium.
    Converged {
        equilibrium: usize,
    },
    /// The orbit stays far from every listed equilibrium and revisits an
    /// earlier state with a consistent period.
    Cycling,
    Undetermined,
}

const CONVERGED_DIST: f64 = 1e-6;
const CONVERGED_FIELD: f64 = 1e-9;
const CYCLE_SEPARATION_FRACTION: f64 = 0.05;
const REENTRY_BALL: f64 = 1e-3;
const REENTRY_EXIT: f64 = 5e-3;

/// Classify per the documented rules: converged when the terminal sample
/// sits at a listed equilibrium (either the integrator stopped on its
/// distance rule or the terminal field norm is below `1e-9`); cycling when
/// the last half of the run keeps its distance from every listed
/// equilibrium above `0.05 * diam` and re-enters a `1e-3` ball around the
/// start of the window with two consistent period estimates.
pub fn classify_long_run(
    trajectory: &Trajectory,
    equilibria: &[MixedProfile],
) -> Result<LongRunClass> {
    if trajectory.samples.len() < 100 {
        return Err(Error::InvalidInput(format!(
            "classification needs at least 100 recorded samples, got {}",
            trajectory.samples.len()
        )));
    }
    let terminal = trajectory.terminal();
    let stopped_early = trajectory.converged();
    for (idx, eq) in equilibria.iter().enumerate() {
        if terminal.profile.distance(eq) < CONVERGED_DIST
            && (stopped_early || terminal.speed < CONVERGED_FIELD)
        {
            return Ok(LongRunClass::Converged { equilibrium: idx });
        }
    }

    // diameter of the product of simplices: sqrt(2) per player
    let diam = (2.0 * terminal.profile.players() as f64).sqrt();
    let half_start = trajectory.samples.len() / 2;
    let window = &trajectory.samples[half_start..];
    let separated = window.iter().all(|s| {
        equilibria
            .iter()
            .all(|eq| s.profile.distance(eq) > CYCLE_SEPARATION_FRACTION * diam)
    });
    if separated && has_consistent_recurrence(window) {
        return Ok(LongRunClass::Cycling);
    }
    Ok(LongRunClass::Undetermined)
}

fn flat(profile: &MixedProfile) -> Vec<f64> {
    profile.points().iter().flatten().copied().collect()
}

/// Distance from `z` to the segment `a + s (b - a)`, `s` in [0, 1], plus the
/// interpolation parameter of the closest approach.
fn point_segment_distance(z: &[f64], a: &[f64], b: &[f64]) -> (f64, f64) {
    let mut dot = 0.0;
    let mut len_sq = 0.0;
    for k in 0..z.len() {
        let d = b[k] - a[k];
        dot += (z[k] - a[k]) * d;
        len_sq += d * d;
    }
    let s = if len_sq > 0.0 {
        (dot / len_sq).clamp(0.0, 1.0)
    } else {
        0.0
    };
    let mut dist_sq = 0.0;
    for k in 0..z.len() {
        let c = a[k] + s * (b[k] - a[k]);
        dist_sq += (z[k] - c) * (z[k] - c);
    }
    (dist_sq.sqrt(), s)
}

/// Re-entry detection: visits to the ball around the window's first state,
/// separated by genuine exits, must yield at least two period estimates
/// that agree within 10% (plus a couple of sample intervals of slack).
fn has_consistent_recurrence(window: &[crate::dynamics::TrajectorySample]) -> bool {
    if window.len() < 4 {
        return false;
    }
    let z_ref = flat(&window[0].profile);
    let dt_avg = (window.last().unwrap().t - window[0].t) / (window.len() - 1) as f64;

    let mut visit_times: Vec<f64> = Vec::new();
    let mut inside = true; // the first segment starts at z_ref itself
    let mut best_d = 0.0_f64;
    let mut best_t = window[0].t;
    for w in window.windows(2) {
        let a = flat(&w[0].profile);
        let b = flat(&w[1].profile);
        let (d, s) = point_segment_distance(&z_ref, &a, &b);
        let t_closest = w[0].t + s * (w[1].t - w[0].t);
        if inside {
            if d < best_d {
                best_d = d;
                best_t = t_closest;
            }
            if d > REENTRY_EXIT {
                visit_times.push(best_t);
                inside = false;
            }
        } else if d < REENTRY_BALL {
            inside = true;
            best_d = d;
            best_t = t_closest;
        }
    }
    if inside {
        visit_times.push(best_t);
    }
    if visit_times.len() < 3 {
        return false;
    }
    let g1 = visit_times[1] - visit_times[0];
    let g2 = visit_times[2] - visit_times[1];
    let slack = 0.1 * g1.max(g2) + 2.0 * dt_avg;
    g1 > 0.0 && g2 > 0.0 && (g1 - g2).abs() <= slack
}

/// Eigenvalues of the central finite-difference Jacobian of the incentive
/// field at an interior equilibrium, restricted to the tangent space of the
/// simplex product (basis: `e_k - e_last` per player). Requires
/// `incentive_residual(x_hat) < 1e-9`.
pub fn jacobian_eigenvalues(
    spec: Incentive,
    game: &Game,
    x_hat: &MixedProfile,
) -> Result<Vec<Complex<f64>>> {
    let residual = incentive_residual(spec, game, x_hat)?;
    if residual >= 1e-9 {
        return Err(Error::Precondition(format!(
            "jacobian spectrum needs an incentive equilibrium; residual is {residual:.3e}"
        )));
    }
    if !x_hat.is_interior(INTERIOR_EPS) {
        return Err(Error::Precondition(
            "jacobian spectrum needs an interior equilibrium".into(),
        ));
    }
    let counts = game.strategy_counts().to_vec();
    let dim: usize = counts.iter().map(|&s| s - 1).sum();
    if dim == 0 {
        return Ok(Vec::new());
    }
    let base = x_hat.points().to_vec();
    let eval = |points: &[Vec<f64>]| -> Vec<f64> {
        let f = field_raw(spec, game, points);
        let mut coords = Vec::with_capacity(dim);
        for (i, &s) in counts.iter().enumerate() {
            coords.extend_from_slice(&f[i][..s - 1]);
        }
        coords
    };
    let mut jac = DMatrix::<f64>::zeros(dim, dim);
    let mut col = 0;
    for (i, &s) in counts.iter().enumerate() {
        for k in 0..s - 1 {
            let mut plus = base.clone();
            plus[i][k] += FD_STEP;
            plus[i][s - 1] -= FD_STEP;
            let mut minus = base.clone();
            minus[i][k] -= FD_STEP;
            minus[i][s - 1] += FD_STEP;
            let fp = eval(&plus);
            let fm = eval(&minus);
            for row in 0..dim {
                jac[(row, col)] = (fp[row] - fm[row]) / (2.0 * FD_STEP);
            }
            col += 1;
        }
    }
    let mut eigs: Vec<Complex<f64>> = jac.complex_eigenvalues().iter().cloned().collect();
    eigs.sort_by(|a, b| {
        a.re.partial_cmp(&b.re)
            .unwrap()
            .then(a.im.partial_cmp(&b.im).unwrap())
    });
    Ok(eigs)
}

/// Single-population variant for mirrored 2-player games: the Jacobian of
/// the diagonal (one simplex point) field.
pub fn jacobian_eigenvalues_single_population(
    spec: Incentive,
    game: &Game,
    point: &[f64],
) -> Result<Vec<Complex<f64>>> {
    let diag = MixedProfile::diagonal(point, 2)
        .map_err(|_| Error::InvalidInput("point is not a simplex point".into()))?;
    let residual = incentive_residual(spec, game, &diag)?;
    if residual >= 1e-9 {
        return Err(Error::Precondition(format!(
            "jacobian spectrum needs an incentive equilibrium; residual is {residual:.3e}"
        )));
    }
    let s = point.len();
    let dim = s - 1;
    let eval = |p: &[f64]| -> Result<Vec<f64>> {
        Ok(single_population_field(spec, game, p)?[..dim].to_vec())
    };
    let mut jac = DMatrix::<f64>::zeros(dim, dim);
    for k in 0..dim {
        let mut plus = point.to_vec();
        plus[k] += FD_STEP;
        plus[s - 1] -= FD_STEP;
        let mut minus = point.to_vec();
        minus[k] -= FD_STEP;
        minus[s - 1] += FD_STEP;
        let fp = eval(&plus)?;
        let fm = eval(&minus)?;
        for row in 0..dim {
            jac[(row, k)] = (fp[row] - fm[row]) / (2.0 * FD_STEP);
        }
    }
    let mut eigs: Vec<Complex<f64>> = jac.complex_eigenvalues().iter().cloned().collect();
    eigs.sort_by(|a, b| {
        a.re.partial_cmp(&b.re)
            .unwrap()
            .then(a.im.partial_cmp(&b.im).unwrap())
    });
    Ok(eigs)
}

/// Evidence-based stability verdict.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StabilityVerdict {
    AsymptoticallyStableEvidence,
    UnstableEvidence,
    Inconclusive,
}

impl StabilityVerdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            StabilityVerdict::AsymptoticallyStableEvidence => "asymptotically_stable_evidence",
            StabilityVerdict::UnstableEvidence => "unstable_evidence",
            StabilityVerdict::Inconclusive => "inconclusive",
        }
    }
}

/// Sampling counts and horizons for `stability_report`.
#[derive(Debug, Clone)]
pub struct StabilityConfig {
    pub margin_samples: usize,
    pub sample_seed: u64,
    pub lyapunov_trajectories: usize,
    pub lyapunov_horizon: f64,
}

impl Default for StabilityConfig {
    fn default() -> Self {
        StabilityConfig {
            margin_samples: 1000,
            sample_seed: 0,
            lyapunov_trajectories: 3,
            lyapunov_horizon: 50.0,
        }
    }
}

/// Collected stability evidence for one equilibrium.
#[derive(Debug, Clone)]
pub struct StabilityReport {
    pub equilibrium: MixedProfile,
    /// Min per-player margin over the sampled interior points.
    pub iss_min_margin: f64,
    /// KL(eq || x(t)) nonincreasing along every test trajectory.
    pub lyapunov_monotone: bool,
    pub eigenvalues: Vec<Complex<f64>>,
    pub verdict: StabilityVerdict,
}

impl Serialize for StabilityReport {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        let eig: Vec<[f64; 2]> = self.eigenvalues.iter().map(|c| [c.re, c.im]).collect();
        let mut s = serializer.serialize_struct("StabilityReport", 5)?;
        s.serialize_field("equilibrium", self.equilibrium.points())?;
        s.serialize_field("iss_min_margin", &self.iss_min_margin)?;
        s.serialize_field("lyapunov_monotone", &self.lyapunov_monotone)?;
        s.serialize_field("eigenvalues", &eig)?;
        s.serialize_field("verdict", self.verdict.as_str())?;
        s.end()
    }
}

/// Decision rule: spectrum strictly in the left half-plane (below -1e-6)
/// plus nonnegative sampled margins plus monotone KL means stable evidence;
/// an eigenvalue with real part above 1e-6 means unstable evidence;
/// anything else is inconclusive.
pub fn stability_report(
    spec: Incentive,
    game: &Game,
    equilibrium: &MixedProfile,
    config: &StabilityConfig,
) -> Result<StabilityReport> {
    let eigenvalues = jacobian_eigenvalues(spec, game, equilibrium)?;
    let max_re = eigenvalues
        .iter()
        .map(|c| c.re)
        .fold(f64::NEG_INFINITY, f64::max);

    let mut min_margin = f64::INFINITY;
    for k in 0..config.margin_samples {
        let x = game.random_interior_profile(config.sample_seed.wrapping_add(k as u64));
        if x.distance(equilibrium) < 1e-8 {
            continue;
        }
        min_margin = min_margin.min(iss_margin(spec, game, equilibrium, &x)?);
    }

    let mut monotone = true;
    for k in 0..config.lyapunov_trajectories {
        let x0 = game.random_interior_profile(config.sample_seed.wrapping_add(10_000 + k as u64));
        let traj_config = TrajectoryConfig {
            time_horizon: config.lyapunov_horizon,
            record_stride: 10,
            known_equilibria: vec![equilibrium.clone()],
            ..Default::default()
        };
        let traj = integrate(spec, game, &x0, &traj_config)?;
        let mut prev = f64::INFINITY;
        for s in &traj.samples {
            let kl = kl_divergence(equilibrium, &s.profile)?;
            if kl > prev + MONOTONE_SLACK {
                monotone = false;
            }
            prev = kl;
        }
    }

    let verdict = if max_re > 1e-6 {
        StabilityVerdict::UnstableEvidence
    } else if max_re < -1e-6 && min_margin >= -1e-10 && monotone {
        StabilityVerdict::AsymptoticallyStableEvidence
    } else {
        StabilityVerdict::Inconclusive
    };
    Ok(StabilityReport {
        equilibrium: equilibrium.clone(),
        iss_min_margin: min_margin,
        lyapunov_monotone: monotone,
        eigenvalues,
        verdict,
    })
}
