//! End-to-end tests of the `incentive-lab` binary: summary lines, output
//! files, determinism, and exit codes.

use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_incentive-lab"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn simulate_dash_reports_convergence_to_uniform() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("traj.csv");
    let out = run(&[
        "simulate",
        "--game",
        "rps:1,2",
        "--incentive",
        "dash",
        "--x0",
        "0.8,0.1,0.1",
        "--T",
        "200",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = stdout(&out);
    assert!(
        text.lines()
            .next()
            .unwrap()
            .starts_with("converged uniform"),
        "summary was: {text}"
    );
    let csv_text = std::fs::read_to_string(&csv).unwrap();
    assert!(csv_text.starts_with("t,x_1,x_2,x_3,speed\n"));
    assert!(csv_text.lines().count() > 2);
}

#[test]
fn simulate_replicator_on_standard_rps_reports_cycling() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("traj.csv");
    let out = run(&[
        "simulate",
        "--game",
        "rps:1,1",
        "--incentive",
        "replicator",
        "--x0",
        "0.5,0.3,0.2",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(stdout(&out).lines().next().unwrap().starts_with("cycling"));
}

#[test]
fn simulate_loads_games_from_json_files() {
    let dir = tempfile::tempdir().unwrap();
    let game_path = dir.path().join("bad_rps.json");
    incentive_dynamics::Game::rps(1.0, 2.0)
        .unwrap()
        .write_file(&game_path)
        .unwrap();
    let csv = dir.path().join("traj.csv");
    let out = run(&[
        "simulate",
        "--game",
        game_path.to_str().unwrap(),
        "--incentive",
        "dash",
        "--x0",
        "0.6,0.2,0.2",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    assert!(stdout(&out).starts_with("converged uniform"));
}

#[test]
fn portrait_outputs_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let render = |name: &str| -> (Vec<u8>, Vec<u8>) {
        let svg = dir.path().join(name);
        let out = run(&[
            "portrait",
            "--game",
            "rps:1,2",
            "--incentive",
            "dash",
            "--resolution",
            "16",
            "--seeds",
            "3",
            "--T",
            "30",
            "--out",
            svg.to_str().unwrap(),
        ]);
        assert!(
            out.status.success(),
            "stderr: {}",
            String::from_utf8_lossy(&out.stderr)
        );
        let grid = svg.with_extension("grid.csv");
        (std::fs::read(&svg).unwrap(), std::fs::read(&grid).unwrap())
    };
    let (svg_a, grid_a) = render("a.svg");
    let (svg_b, grid_b) = render("b.svg");
    assert_eq!(svg_a, svg_b);
    assert_eq!(grid_a, grid_b);
    assert!(svg_a.starts_with(b"<svg"));
}

#[test]
fn solve_reports_the_asymmetric_dash_equilibrium() {
    let out = run(&["solve", "--game", "matrix:1,2;3,0", "--incentive", "dash"]);
    assert!(out.status.success());
    let text = stdout(&out);
    let reports: serde_json::Value = serde_json::from_str(
        text.lines()
            .skip_while(|l| !l.starts_with('['))
            .collect::<Vec<_>>()
            .join("\n")
            .as_str(),
    )
    .expect("solve prints JSON");
    let interior: Vec<&serde_json::Value> = reports
        .as_array()
        .unwrap()
        .iter()
        .filter(|r| r["is_interior"].as_bool().unwrap())
        .collect();
    assert_eq!(interior.len(), 1);
    let p = interior[0]["point"][0][0].as_f64().unwrap();
    assert!((p - 0.3120).abs() < 0.001, "p = {p}");
}

#[test]
fn verify_only_lemma1_passes() {
    let out = run(&["verify", "--only", "lemma1"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("PASS") && text.contains("lemma1"));
}

#[test]
fn verify_counterexamples_group_runs_both() {
    let out = run(&["verify", "--only", "counterexamples"]);
    assert!(out.status.success());
    let text = stdout(&out);
    assert!(text.contains("counterexample1"));
    assert!(text.contains("counterexample2"));
    assert_eq!(text.lines().count(), 2);
}

#[test]
fn usage_errors_exit_with_code_two() {
    let out = run(&["simulate", "--game", "rps:1,2", "--incentive", "bestreply"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["simulate", "--game", "rps:1", "--incentive", "dash"]);
    assert_eq!(out.status.code(), Some(2));
    let out = run(&[
        "portrait",
        "--game",
        "matrix:1,2;3,0",
        "--incentive",
        "dash",
    ]);
    assert_eq!(out.status.code(), Some(2), "portrait needs 3 strategies");
    let out = run(&["verify", "--only", "nonsense"]);
    assert_eq!(out.status.code(), Some(2));
    // clap's own usage failure
    let out = run(&["simulate"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn numerical_blow_up_exits_with_code_three() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("traj.csv");
    // payoff magnitudes near f64::MAX overflow the dash incentive sums
    let out = run(&[
        "simulate",
        "--game",
        "matrix:1.5e308,1.5e308,0;0,0,0;0,0,0",
        "--incentive",
        "dash",
        "--x0",
        "0.4,0.3,0.3",
        "--T",
        "1",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3), "stdout: {}", stdout(&out));
    assert!(stdout(&out).starts_with("blow_up"));
}

#[test]
fn grid_csv_matches_library_speed_grid_exactly() {
    let dir = tempfile::tempdir().unwrap();
    let svg = dir.path().join("p.svg");
    let out = run(&[
        "portrait",
        "--game",
        "rps:1,2",
        "--incentive",
        "smith",
        "--resolution",
        "12",
        "--seeds",
        "0",
        "--out",
        svg.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let grid_text = std::fs::read_to_string(svg.with_extension("grid.csv")).unwrap();
    let game = incentive_dynamics::Game::rps(1.0, 2.0).unwrap();
    let grid = incentive_dynamics::speed_grid("smith".parse().unwrap(), &game, 12).unwrap();
    let lines: Vec<&str> = grid_text.lines().skip(1).collect();
    assert_eq!(lines.len(), grid.nodes.len());
    for (line, node) in lines.iter().zip(&grid.nodes) {
        let fields: Vec<f64> = line.split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(fields[0].to_bits(), node.point[0].to_bits());
        assert_eq!(fields[3].to_bits(), node.speed.to_bits());
    }
}
