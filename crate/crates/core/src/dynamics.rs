//! The incentive ODE `dx_ia = phi_ia(x) - x_ia * sum_b phi_ib(x)` and
//! trajectory integration constrained to the product of simplices.
//!
//! The default integrator is fixed-step RK4 with per-step drift correction
//! (clamp negatives, renormalize each simplex). An embedded Dormand-Prince
//! 5(4) pair is available because the `(.)_+` kinks in most incentives make
//! the field only piecewise smooth.

use std::io::Write;

use crate::error::{Error, Result};
use crate::game::{Game, MixedProfile, INTERIOR_EPS};
use crate::incentive::{incentive_raw, Incentive};

/// Evaluate the incentive vector field at a validated profile. Each
/// returned per-player vector sums to zero (up to roundoff in `x`).
pub fn vector_field(spec: Incentive, game: &Game, x: &MixedProfile) -> Result<Vec<Vec<f64>>> {
    if x.shape() != game.strategy_counts() {
        return Err(Error::InvalidInput(format!(
            "profile shape {:?} does not match game shape {:?}",
            x.shape(),
            game.strategy_counts()
        )));
    }
    Ok(field_raw(spec, game, x.points()))
}

pub(crate) fn field_raw(spec: Incentive, game: &Game, points: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let phi = incentive_raw(spec, game, points);
    phi.into_iter()
        .zip(points)
        .map(|(phi_i, x_i)| {
            let total: f64 = phi_i.iter().sum();
            phi_i.iter().zip(x_i).map(|(p, x)| p - x * total).collect()
        })
        .collect()
}

/// Euclidean norm over the concatenated per-player vectors ("speed").
pub fn field_norm(field: &[Vec<f64>]) -> f64 {
    field
        .iter()
        .flat_map(|f| f.iter())
        .map(|v| v * v)
        .sum::<f64>()
        .sqrt()
}

/// Max-norm over the concatenated per-player vectors.
pub fn field_sup_norm(field: &[Vec<f64>]) -> f64 {
    field
        .iter()
        .flat_map(|f| f.iter())
        .fold(0.0_f64, |m, v| m.max(v.abs()))
}

/// Seat-0 field of a mirrored 2-player game with both seats at `point`:
/// the single-population dynamic drawn in ternary portraits.
pub fn single_population_field(spec: Incentive, game: &Game, point: &[f64]) -> Result<Vec<f64>> {
    if !game.is_single_population_compatible() {
        return Err(Error::UnsupportedShape(
            "single-population field needs a 2-player game with mirrored payoffs".into(),
        ));
    }
    if point.len() != game.strategy_count(0) {
        return Err(Error::InvalidInput(format!(
            "point has {} coordinates, game has {} strategies",
            point.len(),
            game.strategy_count(0)
        )));
    }
    let points = vec![point.to_vec(), point.to_vec()];
    Ok(field_raw(spec, game, &points).swap_remove(0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IntegratorKind {
    Rk4Fixed,
    Rk45Adaptive,
}

/// Integration settings. `step_size` is the fixed RK4 step, or the initial
/// (and maximum) step of the adaptive integrator.
#[derive(Debug, Clone)]
pub struct TrajectoryConfig {
    pub time_horizon: f64,
    pub step_size: f64,
    pub integrator: IntegratorKind,
    pub renormalize_each_step: bool,
    pub record_stride: usize,
    /// Stop when the field norm drops below this.
    pub field_tol: f64,
    /// Stop when within this distance of a known equilibrium.
    pub target_tol: f64,
    /// Distance-based stopping targets; empty disables the distance rule.
    pub known_equilibria: Vec<MixedProfile>,
}

impl Default for TrajectoryConfig {
    fn default() -> Self {
        TrajectoryConfig {
            time_horizon: 100.0,
            step_size: 0.01,
            integrator: IntegratorKind::Rk4Fixed,
            renormalize_each_step: true,
            record_stride: 1,
            field_tol: 1e-9,
            target_tol: 1e-6,
            known_equilibria: Vec::new(),
        }
    }
}

impl TrajectoryConfig {
    pub fn with_horizon(time_horizon: f64) -> Self {
        TrajectoryConfig {
            time_horizon,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.time_horizon > 0.0) {
            return Err(Error::InvalidInput("time horizon must be positive".into()));
        }
        if !(self.step_size > 0.0) {
            return Err(Error::InvalidInput("step size must be positive".into()));
        }
        if self.record_stride == 0 {
            return Err(Error::InvalidInput(
                "record stride must be at least 1".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum TerminalStatus {
    HorizonReached,
    /// Stopped early: either the field norm fell below `tol` (target is the
    /// terminal state) or the state came within `tol` of a known equilibrium
    /// (target is that equilibrium).
    Converged {
        target: MixedProfile,
        tol: f64,
    },
    /// The state became non-finite or collapsed; the trajectory holds the
    /// samples recorded up to that point.
    BlowUp,
}

#[derive(Debug, Clone)]
pub struct TrajectorySample {
    pub t: f64,
    pub profile: MixedProfile,
    /// Euclidean norm of the field at the sample.
    pub speed: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    pub samples: Vec<TrajectorySample>,
    pub status: TerminalStatus,
    /// Smallest coordinate seen across raw integrator outputs, before the
    /// per-step clamp; diagnoses how hard the scheme pushes against the
    /// simplex boundary.
    pub min_coordinate_before_correction: f64,
    /// Largest field norm evaluated along the run.
    pub max_field_norm: f64,
}

impl Trajectory {
    pub fn terminal(&self) -> &TrajectorySample {
        self.samples
            .last()
            .expect("trajectory has at least one sample")
    }

    pub fn converged(&self) -> bool {
        matches!(self.status, TerminalStatus::Converged { .. })
    }

    /// CSV export: `t, x1_1.., (x2_1.. for multi-population), speed`.
    /// With `single_population` set only seat 0 is written, with columns
    /// named `x_1..x_s`.
    pub fn write_csv<W: Write>(&self, out: &mut W, single_population: bool) -> std::io::Result<()> {
        let shape = self.samples[0].profile.shape();
        let mut header = String::from("t");
        if single_population {
            for a in 1..=shape[0] {
                header.push_str(&format!(",x_{a}"));
            }
        } else {
            for (i, &s) in shape.iter().enumerate() {
                for a in 1..=s {
                    header.push_str(&format!(",x{}_{a}", i + 1));
                }
            }
        }
        header.push_str(",speed");
        writeln!(out, "{header}")?;
        for sample in &self.samples {
            let mut line = format!("{}", sample.t);
            let players = if single_population {
                1
            } else {
                sample.profile.players()
            };
            for i in 0..players {
                for &v in sample.profile.point(i) {
                    line.push_str(&format!(",{v}"));
                }
            }
            line.push_str(&format!(",{}", sample.speed));
            writeln!(out, "{line}")?;
        }
        Ok(())
    }
}

/// Integrate the incentive dynamics from `x0` until the horizon, early
/// convergence, or numerical blow-up (returned as a status, never a panic).
pub fn integrate(
    spec: Incentive,
    game: &Game,
    x0: &MixedProfile,
    config: &TrajectoryConfig,
) -> Result<Trajectory> {
    config.validate()?;
    if x0.shape() != game.strategy_counts() {
        return Err(Error::InvalidInput(format!(
            "initial profile shape {:?} does not match game shape {:?}",
            x0.shape(),
            game.strategy_counts()
        )));
    }
    if !x0.is_interior(INTERIOR_EPS) {
        return Err(Error::InvalidInput(
            "initial profile must be interior".into(),
        ));
    }
    match config.integrator {
        IntegratorKind::Rk4Fixed => integrate_rk4(spec, game, x0, config),
        IntegratorKind::Rk45Adaptive => integrate_rk45(spec, game, x0, config),
    }
}

struct Recorder<'a> {
    config: &'a TrajectoryConfig,
    samples: Vec<TrajectorySample>,
    min_coord: f64,
    max_norm: f64,
}

impl<'a> Recorder<'a> {
    fn new(config: &'a TrajectoryConfig, x0: &MixedProfile, f0_norm: f64) -> Self {
        let min_coord = x0
            .points()
            .iter()
            .flat_map(|p| p.iter())
            .fold(f64::INFINITY, |m, &v| m.min(v));
        Recorder {
            config,
            samples: vec![TrajectorySample {
                t: 0.0,
                profile: x0.clone(),
                speed: f0_norm,
            }],
            min_coord,
            max_norm: f0_norm,
        }
    }

    fn observe_raw(&mut self, raw: &[Vec<f64>]) {
        for p in raw {
            for &v in p {
                if v < self.min_coord {
                    self.min_coord = v;
                }
            }
        }
    }

    fn push(&mut self, t: f64, profile: &MixedProfile, speed: f64) {
        self.max_norm = self.max_norm.max(speed);
        self.samples.push(TrajectorySample {
            t,
            profile: profile.clone(),
            speed,
        });
    }

    /// Convergence rules: field norm below `field_tol`, else distance to a
    /// known equilibrium below `target_tol`, whichever fires first.
    fn check_convergence(&self, profile: &MixedProfile, speed: f64) -> Option<TerminalStatus> {
        if speed < self.config.field_tol {
            return Some(TerminalStatus::Converged {
                target: profile.clone(),
                tol: self.config.field_tol,
            });
        }
        for eq in &self.config.known_equilibria {
            if profile.distance(eq) < self.config.target_tol {
                return Some(TerminalStatus::Converged {
                    target: eq.clone(),
                    tol: self.config.target_tol,
                });
            }
        }
        None
    }

    fn finish(self, status: TerminalStatus) -> Trajectory {
        Trajectory {
            samples: self.samples,
            status,
            min_coordinate_before_correction: self.min_coord,
            max_field_norm: self.max_norm,
        }
    }
}

fn add_scaled(state: &[Vec<f64>], h: f64, stages: &[(f64, &Vec<Vec<f64>>)]) -> Vec<Vec<f64>> {
    state
        .iter()
        .enumerate()
        .map(|(i, p)| {
            p.iter()
                .enumerate()
                .map(|(a, &v)| {
                    let mut acc = v;
                    for (c, k) in stages {
                        acc += h * c * k[i][a];
                    }
                    acc
                })
                .collect()
        })
        .collect()
}

/// Apply the per-step drift correction (or just normalize for recording
/// when `renormalize` is off). Returns None on non-finite/collapsed states.
fn correct(raw: Vec<Vec<f64>>, renormalize: bool) -> Option<(Vec<Vec<f64>>, MixedProfile)> {
    let profile = MixedProfile::from_raw_normalized(raw.clone())?;
    if renormalize {
        let pts = profile.points().to_vec();
        Some((pts, profile))
    } else {
        if raw.iter().flat_map(|p| p.iter()).any(|v| !v.is_finite()) {
            return None;
        }
        Some((raw, profile))
    }
}

fn integrate_rk4(
    spec: Incentive,
    game: &Game,
    x0: &MixedProfile,
    config: &TrajectoryConfig,
) -> Result<Trajectory> {
    let h = config.step_size;
    let total = config.time_horizon;
    let nsteps = (total / h).ceil().max(1.0) as usize;

    let mut state = x0.points().to_vec();
    let mut f = field_raw(spec, game, &state);
    let mut rec = Recorder::new(config, x0, field_norm(&f));
    if let Some(status) = rec.check_convergence(x0, field_norm(&f)) {
        return Ok(rec.finish(status));
    }

    for step in 1..=nsteps {
        let t_prev = (step - 1) as f64 * h;
        let hs = if step == nsteps { total - t_prev } else { h };
        let k1 = f;
        let k2 = field_raw(spec, game, &add_scaled(&state, hs, &[(0.5, &k1)]));
        let k3 = field_raw(spec, game, &add_scaled(&state, hs, &[(0.5, &k2)]));
        let k4 = field_raw(spec, game, &add_scaled(&state, hs, &[(1.0, &k3)]));
        let raw = add_scaled(
            &state,
            hs / 6.0,
            &[(1.0, &k1), (2.0, &k2), (2.0, &k3), (1.0, &k4)],
        );
        rec.observe_raw(&raw);
        let Some((next, profile)) = correct(raw, config.renormalize_each_step) else {
            return Ok(rec.finish(TerminalStatus::BlowUp));
        };
        state = next;
        f = field_raw(spec, game, &state);
        let speed = field_norm(&f);
        rec.max_norm = rec.max_norm.max(speed);
        let t = if step == nsteps {
            total
        } else {
            step as f64 * h
        };
        let due = step.is_multiple_of(config.record_stride) || step == nsteps;
        if due {
            rec.push(t, &profile, speed);
        }
        if let Some(status) = rec.check_convergence(&profile, speed) {
            if !due {
                rec.push(t, &profile, speed);
            }
            return Ok(rec.finish(status));
        }
    }
    Ok(rec.finish(TerminalStatus::HorizonReached))
}

// Dormand-Prince 5(4) coefficients.
const DP_C: [f64; 6] = [1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const DP_A: [[f64; 6]; 6] = [
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [
        19372.0 / 6561.0,
        -25360.0 / 2187.0,
        64448.0 / 6561.0,
        -212.0 / 729.0,
        0.0,
        0.0,
    ],
    [
        9017.0 / 3168.0,
        -355.0 / 33.0,
        46732.0 / 5247.0,
        49.0 / 176.0,
        -5103.0 / 18656.0,
        0.0,
    ],
    [
        35.0 / 384.0,
        0.0,
        500.0 / 1113.0,
        125.0 / 192.0,
        -2187.0 / 6784.0,
        11.0 / 84.0,
    ],
];
const DP_B5: [f64; 7] = [
    35.0 / 384.0,
    0.0,
    500.0 / 1113.0,
    125.0 / 192.0,
    -2187.0 / 6784.0,
    11.0 / 84.0,
    0.0,
];
const DP_B4: [f64; 7] = [
    5179.0 / 57600.0,
    0.0,
    7571.0 / 16695.0,
    393.0 / 640.0,
    -92097.0 / 339200.0,
    187.0 / 2100.0,
    1.0 / 40.0,
];
const DP_ATOL: f64 = 1e-10;
const DP_RTOL: f64 = 1e-8;

fn integrate_rk45(
    spec: Incentive,
    game: &Game,
    x0: &MixedProfile,
    config: &TrajectoryConfig,
) -> Result<Trajectory> {
    let total = config.time_horizon;
    let h_max = config.step_size;
    let h_min = 1e-10;

    let mut state = x0.points().to_vec();
    let mut f = field_raw(spec, game, &state);
    let mut rec = Recorder::new(config, x0, field_norm(&f));
    if let Some(status) = rec.check_convergence(x0, field_norm(&f)) {
        return Ok(rec.finish(status));
    }

    let mut t = 0.0;
    let mut h = h_max;
    let mut accepted: usize = 0;
    // hard cap so pathological inputs terminate
    let max_attempts = ((total / h_min) as usize).min(50_000_000);
    let mut attempts = 0;
    while t < total {
        attempts += 1;
        if attempts > max_attempts {
            return Ok(rec.finish(TerminalStatus::HorizonReached));
        }
        let hs = h.min(total - t);
        let mut stages: Vec<Vec<Vec<f64>>> = Vec::with_capacity(7);
        stages.push(f.clone());
        for s in 0..6 {
            let coeffs: Vec<(f64, &Vec<Vec<f64>>)> = DP_A[s]
                .iter()
                .take(s + 1)
                .zip(&stages)
                .map(|(&c, k)| (c, k))
                .collect();
            let y = add_scaled(&state, hs, &coeffs);
            stages.push(field_raw(spec, game, &y));
            let _ = DP_C;
        }
        let y5 = add_scaled(
            &state,
            hs,
            &DP_B5
                .iter()
                .zip(&stages)
                .map(|(&c, k)| (c, k))
                .collect::<Vec<_>>(),
        );
        let y4 = add_scaled(
            &state,
            hs,
            &DP_B4
                .iter()
                .zip(&stages)
                .map(|(&c, k)| (c, k))
                .collect::<Vec<_>>(),
        );
        if y5.iter().flat_map(|p| p.iter()).any(|v| !v.is_finite()) {
            return Ok(rec.finish(TerminalStatus::BlowUp));
        }
        let mut err_sq = 0.0;
        let mut count = 0usize;
        for (p5, p4) in y5.iter().zip(&y4) {
            for (&a, &b) in p5.iter().zip(p4) {
                let tol = DP_ATOL + DP_RTOL * a.abs().max(b.abs());
                let e = (a - b) / tol;
                err_sq += e * e;
                count += 1;
            }
        }
        let err = (err_sq / count as f64).sqrt();
        if err <= 1.0 || hs <= h_min {
            rec.observe_raw(&y5);
            let Some((next, profile)) = correct(y5, config.renormalize_each_step) else {
                return Ok(rec.finish(TerminalStatus::BlowUp));
            };
            state = next;
            t += hs;
            f = field_raw(spec, game, &state);
            let speed = field_norm(&f);
            rec.max_norm = rec.max_norm.max(speed);
            accepted += 1;
            let due = accepted.is_multiple_of(config.record_stride) || t >= total;
            if due {
                rec.push(t, &profile, speed);
            }
            if let Some(status) = rec.check_convergence(&profile, speed) {
                if !due {
                    rec.push(t, &profile, speed);
                }
                return Ok(rec.finish(status));
            }
        }
        let factor = if err > 0.0 {
            (0.9 * err.powf(-0.2)).clamp(0.2, 5.0)
        } else {
            5.0
        };
        h = (h * factor).clamp(h_min, h_max);
    }
    Ok(rec.finish(TerminalStatus::HorizonReached))
}

/// One node of the barycentric speed grid.
#[derive(Debug, Clone, Copy)]
pub struct GridNode {
    pub point: [f64; 3],
    pub speed: f64,
}

/// Barycentric grid over the single-population 2-simplex with the
/// single-population field speed at each node.
#[derive(Debug, Clone)]
pub struct SpeedGrid {
    pub resolution: usize,
    pub nodes: Vec<GridNode>,
}

impl SpeedGrid {
    /// Node count is C(resolution + 2, 2).
    pub fn expected_len(resolution: usize) -> usize {
        (resolution + 1) * (resolution + 2) / 2
    }

    /// CSV export with full-precision coordinates: `x_1,x_2,x_3,speed`.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> std::io::Result<()> {
        writeln!(out, "x_1,x_2,x_3,speed")?;
        for node in &self.nodes {
            writeln!(
                out,
                "{},{},{},{}",
                node.point[0], node.point[1], node.point[2], node.speed
            )?;
        }
        Ok(())
    }
}

/// Evaluate field speed on the barycentric grid `{(i,j,k)/r : i+j+k = r}`
/// of a portrait-mode game (2-player mirrored, 3 strategies). Nodes are
/// ordered lexicographically in (i, j). Boundary nodes evaluate the field
/// directly; every incentive here is defined on the closed simplex.
pub fn speed_grid(spec: Incentive, game: &Game, resolution: usize) -> Result<SpeedGrid> {
    if !game.is_portrait_compatible() {
        return Err(Error::UnsupportedShape(
            "speed grid needs a 2-player mirrored game with 3 strategies".into(),
        ));
    }
    if resolution < 2 {
        return Err(Error::InvalidInput(
            "grid resolution must be at least 2".into(),
        ));
    }
    let r = resolution as f64;
    let mut nodes = Vec::with_capacity(SpeedGrid::expected_len(resolution));
    for i in 0..=resolution {
        for j in 0..=(resolution - i) {
            let k = resolution - i - j;
            let point = [i as f64 / r, j as f64 / r, k as f64 / r];
            let field = single_population_field(spec, game, &point)?;
            let speed = field.iter().map(|v| v * v).sum::<f64>().sqrt();
            nodes.push(GridNode { point, speed });
        }
    }
    Ok(SpeedGrid { resolution, nodes })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn bad_rps() -> Game {
        Game::rps(1.0, 2.0).unwrap()
    }

    fn diagonal(p: &[f64]) -> MixedProfile {
        MixedProfile::diagonal(p, 2).unwrap()
    }

    #[test]
    fn dash_field_vanishes_at_uniform() {
        let g = bad_rps();
        let f = vector_field(Incentive::Dash, &g, &g.uniform_profile()).unwrap();
        assert!(field_norm(&f) < 1e-14);
    }

    #[test]
    fn dash_field_at_skewed_point() {
        let g = bad_rps();
        let x = diagonal(&[0.5, 0.3, 0.2]);
        let f = vector_field(Incentive::Dash, &g, &x).unwrap();
        for i in 0..2 {
            assert_abs_diff_eq!(f[i][0], -0.81, epsilon = 1e-12);
            assert_abs_diff_eq!(f[i][1], 0.162, epsilon = 1e-12);
            assert_abs_diff_eq!(f[i][2], 0.648, epsilon = 1e-12);
        }
    }

    #[test]
    fn field_components_sum_to_zero() {
        let g = bad_rps();
        let specs = [
            Incentive::Replicator,
            Incentive::Bnn,
            Incentive::logit(0.2).unwrap(),
            Incentive::Smith,
            Incentive::Projection,
            Incentive::Dash,
        ];
        for seed in 0..30 {
            let x = g.random_interior_profile(seed);
            for spec in specs {
                let f = vector_field(spec, &g, &x).unwrap();
                for fi in &f {
                    assert_abs_diff_eq!(fi.iter().sum::<f64>(), 0.0, epsilon = 1e-12);
                }
            }
        }
    }

    #[test]
    fn replicator_field_is_invariant_under_payoff_shifts() {
        // adding a constant to one player's payoffs cancels out of
        // u_a - u, so the generated field is unchanged
        let counts = vec![3, 3];
        let base: Vec<Vec<f64>> = (0..2)
            .map(|i| (0..9).map(|k| ((i + 2 * k) % 7) as f64 - 3.0).collect())
            .collect();
        let mut shifted = base.clone();
        for v in &mut shifted[0] {
            *v += 17.5;
        }
        let g0 = Game::new(counts.clone(), base).unwrap();
        let g1 = Game::new(counts, shifted).unwrap();
        for seed in 0..30 {
            let x = g0.random_interior_profile(seed);
            let f0 = vector_field(Incentive::Replicator, &g0, &x).unwrap();
            let f1 = vector_field(Incentive::Replicator, &g1, &x).unwrap();
            for (a, b) in f0.iter().flatten().zip(f1.iter().flatten()) {
                assert_abs_diff_eq!(a, b, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn constant_game_projection_stays_put() {
        let g = Game::symmetric_two_player(vec![vec![1.0; 3]; 3]).unwrap();
        let x0 = diagonal(&[0.5, 0.3, 0.2]);
        let config = TrajectoryConfig {
            time_horizon: 5.0,
            ..Default::default()
        };
        let traj = integrate(Incentive::Projection, &g, &x0, &config).unwrap();
        // zero field everywhere: converges immediately at the start
        assert!(traj.converged());
        assert!(traj.terminal().profile.distance(&x0) < 1e-14);
    }

    #[test]
    fn dash_converges_to_uniform_on_bad_rps() {
        let g = bad_rps();
        let config = TrajectoryConfig {
            time_horizon: 200.0,
            record_stride: 10,
            known_equilibria: vec![g.uniform_profile()],
            ..Default::default()
        };
        for seed in 0..10 {
            let x0 = g.random_interior_profile(seed);
            let traj = integrate(Incentive::Dash, &g, &x0, &config).unwrap();
            assert!(traj.converged(), "seed {seed} did not converge");
            assert!(traj.terminal().profile.distance(&g.uniform_profile()) < 1e-6);
        }
    }

    #[test]
    fn bnn_does_not_converge_on_bad_rps() {
        let g = bad_rps();
        let config = TrajectoryConfig {
            time_horizon: 500.0,
            record_stride: 20,
            known_equilibria: vec![g.uniform_profile()],
            ..Default::default()
        };
        let x0 = diagonal(&[0.8, 0.1, 0.1]);
        let traj = integrate(Incentive::Bnn, &g, &x0, &config).unwrap();
        assert_eq!(traj.status, TerminalStatus::HorizonReached);
        assert!(traj.terminal().profile.distance(&g.uniform_profile()) > 0.05);
    }

    #[test]
    fn trajectory_times_strictly_increase_and_minimum_coordinate_is_tracked() {
        let g = bad_rps();
        let config = TrajectoryConfig {
            time_horizon: 3.0,
            record_stride: 7,
            ..Default::default()
        };
        let traj = integrate(Incentive::Smith, &g, &diagonal(&[0.8, 0.1, 0.1]), &config).unwrap();
        for w in traj.samples.windows(2) {
            assert!(w[1].t > w[0].t);
        }
        // forward invariance: the scheme never dives far below the boundary
        let lipschitz_scale = traj.max_field_norm;
        assert!(traj.min_coordinate_before_correction >= -10.0 * 0.01 * lipschitz_scale);
    }

    #[test]
    fn halving_step_barely_moves_converged_terminal_state() {
        let g = bad_rps();
        let x0 = diagonal(&[0.7, 0.2, 0.1]);
        let run = |h: f64| {
            let config = TrajectoryConfig {
                time_horizon: 50.0,
                step_size: h,
                ..Default::default()
            };
            integrate(Incentive::Dash, &g, &x0, &config).unwrap()
        };
        let a = run(0.01);
        let b = run(0.005);
        assert!(a.converged() && b.converged());
        assert!(a.terminal().profile.distance(&b.terminal().profile) < 1e-6);
    }

    #[test]
    fn rk45_agrees_with_rk4() {
        let g = bad_rps();
        let x0 = diagonal(&[0.6, 0.25, 0.15]);
        let mut config = TrajectoryConfig {
            time_horizon: 10.0,
            ..Default::default()
        };
        let fixed = integrate(Incentive::Smith, &g, &x0, &config).unwrap();
        config.integrator = IntegratorKind::Rk45Adaptive;
        let adaptive = integrate(Incentive::Smith, &g, &x0, &config).unwrap();
        assert!(
            fixed
                .terminal()
                .profile
                .distance(&adaptive.terminal().profile)
                < 1e-5
        );
    }

    #[test]
    fn blow_up_is_a_status_not_a_panic() {
        let g = bad_rps();
        let config = TrajectoryConfig {
            time_horizon: 1e6,
            step_size: 50.0,
            renormalize_each_step: false,
            ..Default::default()
        };
        let traj = integrate(
            Incentive::Replicator,
            &g,
            &diagonal(&[0.5, 0.3, 0.2]),
            &config,
        )
        .unwrap();
        assert_eq!(traj.status, TerminalStatus::BlowUp);
    }

    #[test]
    fn interior_start_required() {
        let g = bad_rps();
        let x0 = MixedProfile::new(vec![vec![1.0, 0.0, 0.0], vec![0.5, 0.25, 0.25]]).unwrap();
        let config = TrajectoryConfig::with_horizon(1.0);
        assert!(matches!(
            integrate(Incentive::Dash, &g, &x0, &config),
            Err(Error::InvalidInput(_))
        ));
    }

    #[test]
    fn replicator_conserves_log_barrier_on_standard_rps() {
        let g = Game::rps(1.0, 1.0).unwrap();
        let x0 = diagonal(&[0.5, 0.3, 0.2]);
        let config = TrajectoryConfig {
            time_horizon: 10.0,
            record_stride: 10,
            ..Default::default()
        };
        let traj = integrate(Incentive::Replicator, &g, &x0, &config).unwrap();
        let v = |p: &MixedProfile| -> f64 { p.point(0).iter().map(|&x| x.ln()).sum::<f64>() / 3.0 };
        let v0 = v(&traj.samples[0].profile);
        for s in &traj.samples {
            assert_abs_diff_eq!(v(&s.profile), v0, epsilon = 1e-7);
        }
    }

    #[test]
    fn speed_grid_counts_and_values() {
        let g = bad_rps();
        let grid2 = speed_grid(Incentive::Dash, &g, 2).unwrap();
        assert_eq!(grid2.nodes.len(), 6);
        let grid3 = speed_grid(Incentive::Dash, &g, 3).unwrap();
        assert_eq!(grid3.nodes.len(), 10);
        // the center node of an odd grid divisible by 3 is the uniform point
        let center = grid3
            .nodes
            .iter()
            .find(|n| n.point.iter().all(|&c| (c - 1.0 / 3.0).abs() < 1e-12))
            .expect("resolution 3 contains the barycenter");
        assert!(center.speed < 1e-14);

        let std = Game::rps(1.0, 1.0).unwrap();
        let grid = speed_grid(Incentive::Replicator, &std, 4).unwrap();
        for node in &grid.nodes {
            if node.point.contains(&1.0) {
                assert!(node.speed < 1e-14, "corner {:?} should rest", node.point);
            }
        }
    }

    #[test]
    fn speed_grid_rejects_unsupported_shapes() {
        let g = Game::new(vec![2, 2], vec![vec![1.0, 0.0, 0.0, 1.0]; 2]).unwrap();
        assert!(matches!(
            speed_grid(Incentive::Dash, &g, 8),
            Err(Error::UnsupportedShape(_))
        ));
    }

    #[test]
    fn csv_export_shapes() {
        let g = bad_rps();
        let config = TrajectoryConfig {
            time_horizon: 1.0,
            record_stride: 25,
            ..Default::default()
        };
        let traj = integrate(Incentive::Dash, &g, &diagonal(&[0.5, 0.3, 0.2]), &config).unwrap();
        let mut single = Vec::new();
        traj.write_csv(&mut single, true).unwrap();
        let text = String::from_utf8(single).unwrap();
        assert!(text.starts_with("t,x_1,x_2,x_3,speed\n"));
        let mut multi = Vec::new();
        traj.write_csv(&mut multi, false).unwrap();
        let text = String::from_utf8(multi).unwrap();
        assert!(text.starts_with("t,x1_1,x1_2,x1_3,x2_1,x2_2,x2_3,speed\n"));
    }
}
