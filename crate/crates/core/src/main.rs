//! Command-line surface: simulate trajectories, render ternary portraits,
//! locate equilibria, and run the verification battery.
//!
//! Exit codes: 0 success, 1 verification failure or runtime error,
//! 2 usage error (bad flags or malformed game/incentive specs),
//! 3 numerical blow-up during integration.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use incentive_dynamics::dynamics::IntegratorKind;
use incentive_dynamics::{
    classify_long_run, default_seeds, find_incentive_equilibria, integrate, render_portrait,
    verify, Error, Game, Incentive, LongRunClass, MixedProfile, PortraitSpec, TerminalStatus,
    TrajectoryConfig,
};

#[derive(Parser)]
#[command(
    name = "incentive-lab",
    version,
    about = "Incentive dynamics on finite games"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Integrate the incentive dynamics and classify the long-run outcome
    Simulate(SimulateArgs),
    /// Render a ternary phase portrait (SVG plus grid CSV)
    Portrait(PortraitArgs),
    /// Locate incentive equilibria and report them as JSON
    Solve(SolveArgs),
    /// Run the verification battery and report per-claim pass/fail
    Verify(VerifyArgs),
}

#[derive(Args)]
struct GameArg {
    /// Game source: a JSON file path, `rps:a,b`, or `matrix:r11,r12;r21,r22`
    /// (2-player symmetric rows)
    #[arg(long)]
    game: String,
}

#[derive(Args)]
struct SimulateArgs {
    #[command(flatten)]
    game: GameArg,
    /// Incentive: replicator|bnn|logit:<eta>|smith|projection|dash
    #[arg(long)]
    incentive: String,
    /// Initial profile, comma-separated; one group for all players or
    /// semicolon-separated per-player groups. Random interior when omitted.
    #[arg(long)]
    x0: Option<String>,
    /// Time horizon
    #[arg(long = "T", default_value_t = 200.0)]
    t: f64,
    /// Step size
    #[arg(long, default_value_t = 0.01)]
    h: f64,
    /// Integrator: rk4 or rk45
    #[arg(long, default_value = "rk4")]
    integrator: String,
    /// RNG seed for the random start (when --x0 is omitted)
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Trajectory CSV output path
    #[arg(long, default_value = "trajectory.csv")]
    out: PathBuf,
}

#[derive(Args)]
struct PortraitArgs {
    #[command(flatten)]
    game: GameArg,
    #[arg(long)]
    incentive: String,
    /// Barycentric heat-grid resolution (at least 10)
    #[arg(long, default_value_t = 60)]
    resolution: usize,
    /// Number of streamline starts
    #[arg(long, default_value_t = 12)]
    seeds: usize,
    /// RNG seed for streamline starts
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Streamline time horizon
    #[arg(long = "T", default_value_t = 300.0)]
    t: f64,
    /// Streamline step size
    #[arg(long, default_value_t = 0.01)]
    h: f64,
    /// SVG output path; the grid CSV lands next to it as <stem>.grid.csv
    #[arg(long, default_value = "portrait.svg")]
    out: PathBuf,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    game: GameArg,
    #[arg(long)]
    incentive: String,
    /// Number of random interior seeds on top of uniform + pulled corners
    #[arg(long, default_value_t = 20)]
    seeds: usize,
    /// RNG seed for the random solver seeds
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// JSON output path (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    /// Run a single claim (or the `counterexamples` pair); all by default
    #[arg(long)]
    only: Option<String>,
}

fn parse_game(text: &str) -> Result<Game, Error> {
    if let Some(params) = text.strip_prefix("rps:") {
        let parts: Vec<&str> = params.split(',').collect();
        if parts.len() != 2 {
            return Err(Error::InvalidInput(format!(
                "expected rps:a,b, got '{text}'"
            )));
        }
        let a: f64 = parts[0]
            .parse()
            .map_err(|_| Error::InvalidInput(format!("bad rps win payoff '{}'", parts[0])))?;
        let b: f64 = parts[1]
            .parse()
            .map_err(|_| Error::InvalidInput(format!("bad rps loss payoff '{}'", parts[1])))?;
        return Game::rps(a, b);
    }
    if let Some(rows) = text.strip_prefix("matrix:") {
        let matrix: Vec<Vec<f64>> = rows
            .split(';')
            .map(|row| {
                row.split(',')
                    .map(|v| {
                        v.trim()
                            .parse()
                            .map_err(|_| Error::InvalidInput(format!("bad matrix entry '{v}'")))
                    })
                    .collect()
            })
            .collect::<Result<_, _>>()?;
        return Game::symmetric_two_player(matrix);
    }
    Game::read_file(Path::new(text))
}

fn parse_x0(game: &Game, text: &str) -> Result<MixedProfile, Error> {
    let groups: Vec<Vec<f64>> = text
        .split(';')
        .map(|group| {
            group
                .split(',')
                .map(|v| {
                    v.trim()
                        .parse()
                        .map_err(|_| Error::InvalidInput(format!("bad x0 entry '{v}'")))
                })
                .collect()
        })
        .collect::<Result<_, _>>()?;
    let points: Vec<Vec<f64>> = if groups.len() == 1 && game.players() > 1 {
        if game.strategy_counts().iter().any(|&s| s != groups[0].len()) {
            return Err(Error::InvalidInput(format!(
                "single x0 group of {} entries cannot seed every player of shape {:?}",
                groups[0].len(),
                game.strategy_counts()
            )));
        }
        vec![groups[0].clone(); game.players()]
    } else {
        groups
    };
    // accept slightly-off sums and renormalize exactly
    let normalized: Vec<Vec<f64>> = points
        .into_iter()
        .enumerate()
        .map(|(i, p)| {
            let sum: f64 = p.iter().sum();
            if (sum - 1.0).abs() > 1e-9 || p.iter().any(|&v| v < 0.0) {
                return Err(Error::InvalidInput(format!(
                    "x0 group {i} must be nonnegative and sum to 1 (sum is {sum})"
                )));
            }
            Ok(p.into_iter().map(|v| v / sum).collect())
        })
        .collect::<Result<_, _>>()?;
    MixedProfile::new(normalized)
}

fn cmd_simulate(args: &SimulateArgs) -> Result<u8, Error> {
    let game = parse_game(&args.game.game)?;
    let spec: Incentive = args.incentive.parse()?;
    let x0 = match &args.x0 {
        Some(text) => parse_x0(&game, text)?,
        None => game.random_interior_profile(args.seed),
    };
    let integrator = match args.integrator.as_str() {
        "rk4" => IntegratorKind::Rk4Fixed,
        "rk45" => IntegratorKind::Rk45Adaptive,
        other => {
            return Err(Error::InvalidInput(format!(
                "unknown integrator '{other}' (expected rk4 or rk45)"
            )))
        }
    };

    let equilibria = find_incentive_equilibria(spec, &game, &default_seeds(&game, 10, args.seed))?;
    let targets: Vec<MixedProfile> = equilibria
        .iter()
        .filter(|r| r.is_interior)
        .map(|r| r.point.clone())
        .collect();

    let steps = (args.t / args.h).ceil() as usize;
    let config = TrajectoryConfig {
        time_horizon: args.t,
        step_size: args.h,
        integrator,
        record_stride: (steps / 5000).max(1),
        known_equilibria: targets.clone(),
        ..Default::default()
    };
    let traj = integrate(spec, &game, &x0, &config)?;

    let single =
        game.is_single_population_compatible() && x0.points().windows(2).all(|w| w[0] == w[1]);
    let mut file = std::fs::File::create(&args.out)?;
    traj.write_csv(&mut file, single)?;

    if traj.status == TerminalStatus::BlowUp {
        println!(
            "blow_up at t={} after {} samples; partial trajectory written to {}",
            traj.terminal().t,
            traj.samples.len(),
            args.out.display()
        );
        return Ok(3);
    }

    let summary = match (&traj.status, traj.samples.len()) {
        (TerminalStatus::Converged { target, .. }, _) => {
            if target.uniform_deviation() < 1e-6 {
                "converged uniform".to_string()
            } else {
                format!("converged {:?}", target.points())
            }
        }
        (_, n) if n >= 100 => match classify_long_run(&traj, &targets)? {
            LongRunClass::Converged { equilibrium } => {
                if targets[equilibrium].uniform_deviation() < 1e-6 {
                    "converged uniform".to_string()
                } else {
                    format!("converged {:?}", targets[equilibrium].points())
                }
            }
            LongRunClass::Cycling => "cycling".to_string(),
            LongRunClass::Undetermined => "undetermined".to_string(),
        },
        _ => "undetermined".to_string(),
    };
    println!("{summary}");
    println!(
        "terminal t={:.4}, speed={:.3e}, distance to uniform={:.3e}, samples={} -> {}",
        traj.terminal().t,
        traj.terminal().speed,
        traj.terminal().profile.distance(&game.uniform_profile()),
        traj.samples.len(),
        args.out.display()
    );
    Ok(0)
}

fn cmd_portrait(args: &PortraitArgs) -> Result<u8, Error> {
    let game = parse_game(&args.game.game)?;
    let spec = PortraitSpec {
        incentive: args.incentive.parse()?,
        resolution: args.resolution,
        trajectory_seeds: args.seeds,
        rng_seed: args.seed,
        time_horizon: args.t,
        step_size: args.h,
    };
    let portrait = render_portrait(&game, &spec)?;
    std::fs::write(&args.out, &portrait.svg)?;
    let grid_path = args.out.with_extension("grid.csv");
    let mut grid_file = std::fs::File::create(&grid_path)?;
    portrait.grid.write_csv(&mut grid_file)?;
    println!(
        "portrait: {} nodes, {} streamlines, {} equilibria -> {} + {}",
        portrait.grid.nodes.len(),
        portrait.streamlines.len(),
        portrait.equilibria.len(),
        args.out.display(),
        grid_path.display()
    );
    Ok(0)
}

fn cmd_solve(args: &SolveArgs) -> Result<u8, Error> {
    let game = parse_game(&args.game.game)?;
    let spec: Incentive = args.incentive.parse()?;
    let seeds = default_seeds(&game, args.seeds, args.seed);
    let reports = find_incentive_equilibria(spec, &game, &seeds)?;
    let json = serde_json::to_string_pretty(&reports)?;
    match &args.out {
        Some(path) => {
            std::fs::write(path, &json)?;
            println!("{} equilibria -> {}", reports.len(), path.display());
        }
        None => println!("{json}"),
    }
    Ok(0)
}

fn cmd_verify(args: &VerifyArgs) -> Result<u8, Error> {
    let claims = verify::select_claims(args.only.as_deref())?;
    let mut all_passed = true;
    for claim in claims {
        let outcome = (claim.run)();
        println!("{}", verify::format_outcome(&outcome));
        all_passed &= outcome.passed;
    }
    Ok(if all_passed { 0 } else { 1 })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Simulate(args) => cmd_simulate(args),
        Command::Portrait(args) => cmd_portrait(args),
        Command::Solve(args) => cmd_solve(args),
        Command::Verify(args) => cmd_verify(args),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(err) => {
            eprintln!("error: {err}");
            match err {
                // malformed specs behave like usage errors
                Error::InvalidInput(_) | Error::UnsupportedShape(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
