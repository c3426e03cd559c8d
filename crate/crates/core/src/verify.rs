//! The verification battery: every headline claim about these dynamics,
//! runnable as a unit. Each claim pins its own tolerances and sample
//! counts; the CLI `verify` subcommand and the acceptance test suite both
//! run exactly these functions.

use std::time::Instant;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::analysis::{
    classify_long_run, iss_margins_per_player, kl_divergence, lyapunov_f, reduced_iss_margin,
    LongRunClass,
};
use crate::dynamics::{integrate, TrajectoryConfig};
use crate::equilibrium::{
    default_seeds, find_incentive_equilibria, incentive_residual, nash_residual,
    uniform_nash_iff_equal_row_sums,
};
use crate::error::Result;
use crate::game::{sample_interior_point, Game, MixedProfile};
use crate::incentive::Incentive;

/// Result of one verification claim.
#[derive(Debug, Clone)]
pub struct ClaimOutcome {
    pub id: &'static str,
    pub criterion: usize,
    pub passed: bool,
    pub details: String,
    pub seconds: f64,
}

pub fn format_outcome(o: &ClaimOutcome) -> String {
    format!(
        "{} {:>2} {:<16} {} ({:.2}s)",
        if o.passed { "PASS" } else { "FAIL" },
        o.criterion,
        o.id,
        o.details,
        o.seconds
    )
}

/// A named, runnable claim.
pub struct Claim {
    pub id: &'static str,
    pub criterion: usize,
    pub run: fn() -> ClaimOutcome,
}

pub fn all_claims() -> Vec<Claim> {
    vec![
        Claim {
            id: "lemma1",
            criterion: 1,
            run: claim_lemma1,
        },
        Claim {
            id: "prop1",
            criterion: 2,
            run: claim_prop1,
        },
        Claim {
            id: "prop2",
            criterion: 3,
            run: claim_prop2,
        },
        Claim {
            id: "theorem",
            criterion: 4,
            run: claim_theorem,
        },
        Claim {
            id: "nonconvergence",
            criterion: 5,
            run: claim_nonconvergence,
        },
        Claim {
            id: "counterexample1",
            criterion: 6,
            run: claim_counterexample1,
        },
        Claim {
            id: "counterexample2",
            criterion: 7,
            run: claim_counterexample2,
        },
        Claim {
            id: "iss",
            criterion: 8,
            run: claim_iss,
        },
        Claim {
            id: "fmin",
            criterion: 9,
            run: claim_fmin,
        },
        Claim {
            id: "integrator",
            criterion: 10,
            run: claim_integrator,
        },
    ]
}

/// Select claims by name; `counterexamples` expands to both counterexample
/// claims, `all` (or nothing) selects everything.
pub fn select_claims(filter: Option<&str>) -> Result<Vec<Claim>> {
    let claims = all_claims();
    let selected: Vec<Claim> = match filter {
        None => claims,
        Some("all") => claims,
        Some("counterexamples") => claims
            .into_iter()
            .filter(|c| c.id.starts_with("counterexample"))
            .collect(),
        Some(name) => claims.into_iter().filter(|c| c.id == name).collect(),
    };
    if selected.is_empty() {
        return Err(crate::error::Error::InvalidInput(format!(
            "unknown claim '{}'; available: {}, counterexamples, all",
            filter.unwrap_or(""),
            all_claims()
                .iter()
                .map(|c| c.id)
                .collect::<Vec<_>>()
                .join(", ")
        )));
    }
    Ok(selected)
}

// ---- random game corpora ---------------------------------------------------

fn random_payoffs(counts: &[usize], rng: &mut impl Rng) -> Vec<Vec<f64>> {
    let total: usize = counts.iter().product();
    (0..counts.len())
        .map(|_| (0..total).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect()
}

/// Shift each row of every player's reduced matrix so all row sums match
/// the player's mean row sum exactly (up to roundoff).
fn condition_equal_row_sums(counts: &[usize], payoffs: &mut [Vec<f64>]) {
    let total: usize = counts.iter().product();
    for i in 0..counts.len() {
        let s_i = counts[i];
        let cols = total / s_i;
        let stride: usize = counts[i + 1..].iter().product();
        let mut sums = vec![0.0; s_i];
        for (idx, &v) in payoffs[i].iter().enumerate() {
            sums[(idx / stride) % s_i] += v;
        }
        let target = sums.iter().sum::<f64>() / s_i as f64;
        let adjust: Vec<f64> = sums.iter().map(|&s| (s - target) / cols as f64).collect();
        for (idx, v) in payoffs[i].iter_mut().enumerate() {
            *v -= adjust[(idx / stride) % s_i];
        }
    }
}

/// Knock one row sum of one player off by at least 0.3.
fn perturb_one_row_sum(payoffs: &mut [Vec<f64>], rng: &mut impl Rng) {
    let i = rng.random_range(0..payoffs.len());
    let idx = rng.random_range(0..payoffs[i].len());
    let delta = rng.random_range(0.3..1.0);
    let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
    payoffs[i][idx] += sign * delta;
}

/// 2-player symmetric game whose shared matrix has every row a random
/// permutation of a random first row.
fn random_permuted_rows_game(s: usize, rng: &mut impl Rng) -> Game {
    let row0: Vec<f64> = (0..s).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut matrix = vec![row0.clone()];
    for _ in 1..s {
        let mut row = row0.clone();
        // Fisher-Yates
        for k in (1..s).rev() {
            let j = rng.random_range(0..=k);
            row.swap(k, j);
        }
        matrix.push(row);
    }
    Game::symmetric_two_player(matrix).expect("permuted matrix is square")
}

fn permuted_rows_corpus(rng: &mut impl Rng) -> Vec<Game> {
    let mut corpus = vec![
        Game::rps(1.0, 2.0).unwrap(),
        Game::rps(1.0, 1.0).unwrap(),
        Game::rps(2.0, 1.0).unwrap(),
    ];
    for _ in 0..10 {
        corpus.push(random_permuted_rows_game(3, rng));
    }
    for _ in 0..10 {
        corpus.push(random_permuted_rows_game(4, rng));
    }
    corpus
}

// ---- criterion 1: the uniform-Nash lemma ------------------------------------

fn claim_lemma1() -> ClaimOutcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let shapes: [(&[usize], usize); 4] = [
        (&[3, 3], 1000),
        (&[2, 2], 1000),
        (&[4, 4], 1000),
        (&[2, 2, 2], 200),
    ];
    let mut total = 0usize;
    let mut agreed = 0usize;
    let mut directional_failures = Vec::new();
    for (counts, n) in shapes {
        for k in 0..n {
            let mut payoffs = random_payoffs(counts, &mut rng);
            // one third conditioned, one third conditioned then perturbed,
            // one third raw
            let variant = k % 3;
            if variant == 0 || variant == 1 {
                condition_equal_row_sums(counts, &mut payoffs);
            }
            if variant == 1 {
                perturb_one_row_sum(&mut payoffs, &mut rng);
            }
            let game = Game::new(counts.to_vec(), payoffs).expect("random game is valid");
            let outcome = uniform_nash_iff_equal_row_sums(&game).expect("lemma check runs");
            total += 1;
            if outcome.agreement {
                agreed += 1;
            }
            match variant {
                0 if !outcome.uniform_is_nash => {
                    directional_failures.push(format!("{counts:?}#{k}: conditioned but not Nash"))
                }
                1 if outcome.uniform_is_nash => {
                    directional_failures.push(format!("{counts:?}#{k}: perturbed but still Nash"))
                }
                _ => {}
            }
        }
    }
    let seconds = start.elapsed().as_secs_f64();
    let passed = agreed == total && directional_failures.is_empty() && seconds < 10.0;
    ClaimOutcome {
        id: "lemma1",
        criterion: 1,
        passed,
        details: format!(
            "agreement {agreed}/{total}, directional failures {}, runtime {:.2}s (< 10s)",
            directional_failures.len(),
            seconds
        ),
        seconds,
    }
}

// ---- criterion 2: equal above-average excesses at uniform --------------------

fn claim_prop1() -> ClaimOutcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(201);
    let mut worst = 0.0_f64;
    let mut count = 0usize;
    for k in 0..200 {
        let s = if k % 2 == 0 { 3 } else { 4 };
        let game = random_permuted_rows_game(s, &mut rng);
        let residual = incentive_residual(Incentive::Dash, &game, &game.uniform_profile())
            .expect("residual evaluates");
        worst = worst.max(residual);
        count += 1;
    }
    let passed = worst < 1e-9;
    ClaimOutcome {
        id: "prop1",
        criterion: 2,
        passed,
        details: format!(
            "{count} permuted-rows games, worst dash residual at uniform {worst:.2e} (< 1e-9)"
        ),
        seconds: start.elapsed().as_secs_f64(),
    }
}

// ---- criterion 3: component equality and the uniform dichotomy ---------------

fn claim_prop2() -> ClaimOutcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(301);
    let mut worst_spread = 0.0_f64;
    let mut nonuniform_interior = 0usize;
    let mut games = 0usize;
    for k in 0..200 {
        let s = if k % 2 == 0 { 3 } else { 4 };
        let game = random_permuted_rows_game(s, &mut rng);
        games += 1;
        for _ in 0..1000 {
            let x = game.random_interior_profile_with(&mut rng);
            let phi = crate::incentive::incentive_vector(Incentive::Dash, &game, &x)
                .expect("dash evaluates");
            for i in 0..2 {
                let row = phi.player(i);
                let spread = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
                    - row.iter().cloned().fold(f64::INFINITY, f64::min);
                worst_spread = worst_spread.max(spread);
            }
        }
        // solver-found interior equilibria must be the uniform profile
        let seeds = default_seeds(&game, 5, 301 + k as u64);
        for report in
            find_incentive_equilibria(Incentive::Dash, &game, &seeds).expect("solver runs")
        {
            if report.is_interior && report.point.uniform_deviation() >= 1e-6 {
                nonuniform_interior += 1;
            }
        }
    }
    let passed = worst_spread <= 1e-12 && nonuniform_interior == 0;
    ClaimOutcome {
        id: "prop2",
        criterion: 3,
        passed,
        details: format!(
            "{games} games x 1000 profiles: worst within-player spread {worst_spread:.2e} (<= 1e-12); \
             non-uniform interior equilibria found: {nonuniform_interior}"
        ),
        seconds: start.elapsed().as_secs_f64(),
    }
}

// ---- criterion 4: global convergence of the dash dynamics --------------------

fn claim_theorem() -> ClaimOutcome {
    let start = Instant::now();
    let mut failures = Vec::new();
    let mut worst_dist = 0.0_f64;
    let mut runs = 0usize;
    for (a, b) in [(1.0, 2.0), (1.0, 1.0), (2.0, 1.0)] {
        let game = Game::rps(a, b).unwrap();
        let uniform = game.uniform_profile();
        for seed in 0..100 {
            let x0 = game.random_interior_profile(seed);
            let config = TrajectoryConfig {
                time_horizon: 200.0,
                step_size: 0.01,
                record_stride: 5,
                known_equilibria: vec![uniform.clone()],
                ..Default::default()
            };
            let traj = integrate(Incentive::Dash, &game, &x0, &config).expect("run integrates");
            runs += 1;
            let dist = traj.terminal().profile.distance(&uniform);
            worst_dist = worst_dist.max(dist);
            if dist >= 1e-6 {
                failures.push(format!(
                    "rps({a},{b}) seed {seed}: terminal distance {dist:.2e}"
                ));
                continue;
            }
            // KL(uniform || x(t)) nonincreasing within 1e-6 slack
            let mut prev = f64::INFINITY;
            for s in &traj.samples {
                let kl = kl_divergence(&uniform, &s.profile).expect("interior trajectory");
                if kl > prev + 1e-6 {
                    failures.push(format!(
                        "rps({a},{b}) seed {seed}: KL rose by {:.2e} at t={}",
                        kl - prev,
                        s.t
                    ));
                    break;
                }
                prev = kl;
            }
        }
    }
    let passed = failures.is_empty();
    ClaimOutcome {
        id: "theorem",
        criterion: 4,
        passed,
        details: if passed {
            format!("{runs}/300 runs reached uniform (worst terminal distance {worst_dist:e} < 1e-6) with monotone KL")
        } else {
            format!("{} failures, first: {}", failures.len(), failures[0])
        },
        seconds: start.elapsed().as_secs_f64(),
    }
}

// ---- criterion 5: canonical dynamics do not converge on bad RPS --------------

fn claim_nonconvergence() -> ClaimOutcome {
    let start = Instant::now();
    let game = Game::rps(1.0, 2.0).unwrap();
    let uniform = game.uniform_profile();
    let x0 = MixedProfile::diagonal(&[0.8, 0.1, 0.1], 2).unwrap();
    let mut lines = Vec::new();
    let mut all_passed = true;
    for name in ["bnn", "logit:0.2", "smith", "replicator", "projection"] {
        let spec: Incentive = name.parse().unwrap();
        let config = TrajectoryConfig {
            time_horizon: 500.0,
            step_size: 0.01,
            record_stride: 5,
            ..Default::default()
        };
        let traj = integrate(spec, &game, &x0, &config).expect("run integrates");
        let class =
            classify_long_run(&traj, std::slice::from_ref(&uniform)).expect("classification runs");
        let dist = traj.terminal().profile.distance(&uniform);
        let converged_to_uniform = matches!(class, LongRunClass::Converged { .. });
        let ok = dist > 0.05 && !converged_to_uniform;
        all_passed &= ok;
        lines.push(format!(
            "{name}: {} dist={dist:.3} [{}]",
            match class {
                LongRunClass::Converged { .. } => "converged",
                LongRunClass::Cycling => "cycling",
                LongRunClass::Undetermined => "non-recurrent",
            },
            if ok { "ok" } else { "FAIL" }
        ));
    }
    ClaimOutcome {
        id: "nonconvergence",
        criterion: 5,
        passed: all_passed,
        details: lines.join("; "),
        seconds: start.elapsed().as_secs_f64(),
    }
}

// ---- criterion 6: the unequal-row-sums counterexample -------------------------

fn claim_counterexample1() -> ClaimOutcome {
    let start = Instant::now();
    let game = Game::symmetric_two_player(vec![
        vec![1.0, 0.0, 0.0],
        vec![0.0, 1.0, 0.0],
        vec![0.0, -3.0, 1.0],
    ])
    .unwrap();
    let interior_nash = MixedProfile::new(vec![
        vec![1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0],
        vec![1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0],
    ])
    .unwrap();
    let nash_at_interior = nash_residual(&game, &interior_nash).unwrap();
    let uniform = game.uniform_profile();
    let nash_at_uniform = nash_residual(&game, &uniform).unwrap();
    let dash_at_uniform = incentive_residual(Incentive::Dash, &game, &uniform).unwrap();
    let reports =
        find_incentive_equilibria(Incentive::Dash, &game, &default_seeds(&game, 20, 6)).unwrap();
    let interior: Vec<_> = reports.iter().filter(|r| r.is_interior).collect();
    let solver_found_uniform = interior.len() == 1 && interior[0].is_uniform;

    let checks = [
        nash_at_interior <= 1e-12,
        dash_at_uniform < 1e-9,
        solver_found_uniform,
        (nash_at_uniform - 1.0 / 3.0).abs() <= 1e-12,
    ];
    ClaimOutcome {
        id: "counterexample1",
        criterion: 6,
        passed: checks.iter().all(|&c| c),
        details: format!(
            "nash@(1/6,1/6,2/3)={nash_at_interior:.1e}, dash residual@uniform={dash_at_uniform:.1e}, \
             solver->uniform={solver_found_uniform}, nash@uniform={nash_at_uniform:.12} (=1/3)"
        ),
        seconds: start.elapsed().as_secs_f64(),
    }
}

// ---- criterion 7: the equal-row-sums counterexample ---------------------------

fn claim_counterexample2() -> ClaimOutcome {
    let start = Instant::now();
    let game = Game::symmetric_two_player(vec![vec![1.0, 2.0], vec![3.0, 0.0]]).unwrap();
    let uniform_nash = nash_residual(&game, &game.uniform_profile()).unwrap() <= game.tolerance();

    // oracle: bisection on 4p^3 - 7p^2 + 5p - 1 over (0, 1)
    let f = |p: f64| 4.0 * p * p * p - 7.0 * p * p + 5.0 * p - 1.0;
    let (mut lo, mut hi) = (0.25, 0.45);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let root = 0.5 * (lo + hi);

    let reports =
        find_incentive_equilibria(Incentive::Dash, &game, &default_seeds(&game, 20, 7)).unwrap();
    let interior: Vec<_> = reports.iter().filter(|r| r.is_interior).collect();
    let mut p_found = f64::NAN;
    let mut symmetric = false;
    if let Some(r) = interior.first() {
        p_found = r.point.point(0)[0];
        symmetric = (r.point.point(0)[0] - r.point.point(1)[0]).abs() < 1e-9;
    }
    let checks = [
        uniform_nash,
        interior.len() == 1,
        symmetric,
        (p_found - 0.3120).abs() <= 0.001,
        (p_found - root).abs() <= 1e-6,
        (p_found - 0.31).abs() <= 0.005,
    ];
    ClaimOutcome {
        id: "counterexample2",
        criterion: 7,
        passed: checks.iter().all(|&c| c),
        details: format!(
            "uniform Nash={uniform_nash}, solver p={p_found:.6} vs cubic root {root:.6}, \
             |p-0.3120|={:.1e} (<= 0.001)",
            (p_found - 0.3120).abs()
        ),
        seconds: start.elapsed().as_secs_f64(),
    }
}

// ---- criterion 8: incentive-stability margin sampling -------------------------

fn claim_iss() -> ClaimOutcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(801);
    let corpus = permuted_rows_corpus(&mut rng);
    let mut worst_margin = f64::INFINITY;
    let mut worst_mismatch = 0.0_f64;
    let mut violations = 0usize;
    let mut samples = 0usize;
    for game in &corpus {
        let uniform = game.uniform_profile();
        for _ in 0..10_000 {
            let x = game.random_interior_profile_with(&mut rng);
            if x.distance(&uniform) < 1e-8 {
                continue;
            }
            samples += 1;
            let margins =
                iss_margins_per_player(Incentive::Dash, game, &uniform, &x).expect("interior");
            let min_margin = margins.iter().cloned().fold(f64::INFINITY, f64::min);
            worst_margin = worst_margin.min(min_margin);
            if min_margin <= 0.0 {
                violations += 1;
            }
            for (i, &general) in margins.iter().enumerate() {
                let reduced = reduced_iss_margin(Incentive::Dash, game, i, &x).expect("interior");
                let mismatch = (general - reduced).abs() / (1.0 + general.abs());
                worst_mismatch = worst_mismatch.max(mismatch);
            }
        }
    }
    let passed = violations == 0 && worst_mismatch <= 1e-12;
    ClaimOutcome {
        id: "iss",
        criterion: 8,
        passed,
        details: format!(
            "{} games x 10k points ({samples} total): margin violations {violations}, \
             min margin {worst_margin:.2e}, worst reduced-form mismatch {worst_mismatch:.2e} (<= 1e-12)",
            corpus.len()
        ),
        seconds: start.elapsed().as_secs_f64(),
    }
}

// ---- criterion 9: the reciprocal-sum minimum ----------------------------------

fn claim_fmin() -> ClaimOutcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(901);
    let mut failures = 0usize;
    let mut grad_norms = Vec::new();
    for s in [2usize, 3, 4, 6] {
        let s_sq = (s * s) as f64;
        let uniform = vec![1.0 / s as f64; s];
        for _ in 0..10_000 {
            let x = sample_interior_point(s, &mut rng);
            let f = lyapunov_f(&x).expect("interior sample");
            let dist: f64 = x
                .iter()
                .zip(&uniform)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            let ok = if dist > 1e-6 {
                f > s_sq
            } else {
                f >= s_sq - 1e-9
            };
            if !ok {
                failures += 1;
            }
        }
        // tangent-basis central-difference gradient at uniform
        let mut grad_sq = 0.0;
        let delta = 1e-5;
        for k in 0..s - 1 {
            let mut plus = uniform.clone();
            plus[k] += delta;
            plus[s - 1] -= delta;
            let mut minus = uniform.clone();
            minus[k] -= delta;
            minus[s - 1] += delta;
            let d = (lyapunov_f(&plus).unwrap() - lyapunov_f(&minus).unwrap()) / (2.0 * delta);
            grad_sq += d * d;
        }
        grad_norms.push(grad_sq.sqrt());
    }
    let worst_grad = grad_norms.iter().cloned().fold(0.0, f64::max);
    let passed = failures == 0 && worst_grad < 1e-6;
    ClaimOutcome {
        id: "fmin",
        criterion: 9,
        passed,
        details: format!(
            "4 sizes x 10k points: bound failures {failures}; worst gradient norm at uniform \
             {worst_grad:.2e} (< 1e-6)"
        ),
        seconds: start.elapsed().as_secs_f64(),
    }
}

// ---- criterion 10: integrator sanity on the conserved log barrier -------------

fn replicator_drift(h: f64) -> f64 {
    let game = Game::rps(1.0, 1.0).unwrap();
    let x0 = MixedProfile::diagonal(&[0.5, 0.3, 0.2], 2).unwrap();
    let config = TrajectoryConfig {
        time_horizon: 100.0,
        step_size: h,
        record_stride: 1,
        ..Default::default()
    };
    let traj = integrate(Incentive::Replicator, &game, &x0, &config).expect("run integrates");
    let v = |p: &MixedProfile| p.point(0).iter().map(|&x| x.ln()).sum::<f64>() / 3.0;
    let v0 = v(&traj.samples[0].profile);
    traj.samples
        .iter()
        .map(|s| (v(&s.profile) - v0).abs())
        .fold(0.0, f64::max)
}

fn claim_integrator() -> ClaimOutcome {
    let start = Instant::now();
    let drift_h = replicator_drift(0.01);
    let drift_half = replicator_drift(0.005);
    // the halving bound gets an absolute floor at roundoff accumulation
    let passed = drift_h < 1e-5 && drift_half <= (drift_h / 2.0).max(1e-12);
    ClaimOutcome {
        id: "integrator",
        criterion: 10,
        passed,
        details: format!(
            "log-barrier drift {drift_h:.2e} at h=0.01 (< 1e-5), {drift_half:.2e} at h=0.005 \
             (halved or better)"
        ),
        seconds: start.elapsed().as_secs_f64(),
    }
}
