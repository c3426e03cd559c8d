//! Ternary phase portraits for single-population games: a speed heat layer
//! over the 2-simplex, streamline trajectories from seeded starts, and
//! equilibrium markers, rendered as deterministic SVG.
//!
//! Orientation: strategy 1 at the top vertex, strategy 2 lower-left,
//! strategy 3 lower-right. Colors run blue (slowest) to red (fastest),
//! linearly in hue over the grid's observed speed range.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dynamics::{integrate, speed_grid, SpeedGrid, TrajectoryConfig};
use crate::equilibrium::{default_seeds, find_incentive_equilibria, EquilibriumReport};
use crate::error::{Error, Result};
use crate::game::{sample_interior_point, Game, MixedProfile};
use crate::incentive::Incentive;

const WIDTH: f64 = 640.0;
const MARGIN: f64 = 40.0;

/// What to draw: incentive, heat-grid resolution, streamline seeding, and
/// the streamline integration window.
#[derive(Debug, Clone)]
pub struct PortraitSpec {
    pub incentive: Incentive,
    /// Barycentric grid resolution; at least 10 for SVG output.
    pub resolution: usize,
    /// Number of seeded streamline starts.
    pub trajectory_seeds: usize,
    pub rng_seed: u64,
    pub time_horizon: f64,
    pub step_size: f64,
}

impl PortraitSpec {
    pub fn new(incentive: Incentive) -> Self {
        PortraitSpec {
            incentive,
            resolution: 60,
            trajectory_seeds: 12,
            rng_seed: 42,
            time_horizon: 300.0,
            step_size: 0.01,
        }
    }
}

/// Rendered portrait: the raw grid (for CSV export), the seat-0 streamline
/// polylines, the located equilibria, and the SVG document.
#[derive(Debug, Clone)]
pub struct Portrait {
    pub grid: SpeedGrid,
    pub streamlines: Vec<Vec<[f64; 3]>>,
    pub equilibria: Vec<EquilibriumReport>,
    pub svg: String,
}

/// Ternary projection of a barycentric point into page coordinates.
fn project(p: &[f64; 3]) -> (f64, f64) {
    let side = WIDTH - 2.0 * MARGIN;
    let height = side * 3.0_f64.sqrt() / 2.0;
    let top = (MARGIN + side / 2.0, MARGIN);
    let left = (MARGIN, MARGIN + height);
    let right = (MARGIN + side, MARGIN + height);
    (
        p[0] * top.0 + p[1] * left.0 + p[2] * right.0,
        p[0] * top.1 + p[1] * left.1 + p[2] * right.1,
    )
}

fn canvas_height() -> f64 {
    (WIDTH - 2.0 * MARGIN) * 3.0_f64.sqrt() / 2.0 + 2.0 * MARGIN
}

/// Blue-to-red linear hue ramp over [0, 1].
fn speed_color(t: f64) -> String {
    let hue = 240.0 * (1.0 - t.clamp(0.0, 1.0));
    let (r, g, b) = hsl_to_rgb(hue, 0.85, 0.5);
    format!("#{r:02x}{g:02x}{b:02x}")
}

fn hsl_to_rgb(h: f64, s: f64, l: f64) -> (u8, u8, u8) {
    let c = (1.0 - (2.0 * l - 1.0).abs()) * s;
    let hp = h / 60.0;
    let x = c * (1.0 - (hp % 2.0 - 1.0).abs());
    let (r1, g1, b1) = match hp as u32 {
        0 => (c, x, 0.0),
        1 => (x, c, 0.0),
        2 => (0.0, c, x),
        3 => (0.0, x, c),
        4 => (x, 0.0, c),
        _ => (c, 0.0, x),
    };
    let m = l - c / 2.0;
    (
        ((r1 + m) * 255.0).round() as u8,
        ((g1 + m) * 255.0).round() as u8,
        ((b1 + m) * 255.0).round() as u8,
    )
}

/// Compute the grid, streamlines, and equilibria, and render the SVG.
pub fn render_portrait(game: &Game, spec: &PortraitSpec) -> Result<Portrait> {
    if !game.is_portrait_compatible() {
        return Err(Error::UnsupportedShape(
            "portraits need a 2-player mirrored game with 3 strategies".into(),
        ));
    }
    if spec.resolution < 10 {
        return Err(Error::InvalidInput(
            "portrait grid resolution must be at least 10".into(),
        ));
    }
    let grid = speed_grid(spec.incentive, game, spec.resolution)?;

    let equilibria =
        find_incentive_equilibria(spec.incentive, game, &default_seeds(game, 8, spec.rng_seed))?;

    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let record_stride = ((0.05 / spec.step_size).round() as usize).max(1);
    let mut streamlines = Vec::with_capacity(spec.trajectory_seeds);
    for _ in 0..spec.trajectory_seeds {
        let start = sample_interior_point(3, &mut rng);
        let x0 = MixedProfile::diagonal(&start, 2)?;
        let config = TrajectoryConfig {
            time_horizon: spec.time_horizon,
            step_size: spec.step_size,
            record_stride,
            known_equilibria: equilibria
                .iter()
                .filter(|r| r.is_interior)
                .map(|r| r.point.clone())
                .collect(),
            ..Default::default()
        };
        let traj = integrate(spec.incentive, game, &x0, &config)?;
        let line: Vec<[f64; 3]> = traj
            .samples
            .iter()
            .map(|s| {
                let p = s.profile.point(0);
                [p[0], p[1], p[2]]
            })
            .collect();
        streamlines.push(line);
    }

    let svg = build_svg(&grid, &streamlines, &equilibria, spec);
    Ok(Portrait {
        grid,
        streamlines,
        equilibria,
        svg,
    })
}

fn build_svg(
    grid: &SpeedGrid,
    streamlines: &[Vec<[f64; 3]>],
    equilibria: &[EquilibriumReport],
    spec: &PortraitSpec,
) -> String {
    let r = grid.resolution;
    let height = canvas_height();
    let mut svg = String::new();
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{WIDTH:.0}\" height=\"{height:.0}\" \
         viewBox=\"0 0 {WIDTH:.0} {height:.0}\">\n"
    ));
    svg.push_str(&format!(
        "<title>{} phase portrait</title>\n",
        spec.incentive
    ));
    svg.push_str("<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n");

    // speed heat layer: color each sub-triangle by its corner mean,
    // normalized over the grid's observed speed range
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for n in &grid.nodes {
        lo = lo.min(n.speed);
        hi = hi.max(n.speed);
    }
    let span = if hi > lo { hi - lo } else { 1.0 };
    // nodes are ordered lexicographically in (i, j); row i starts at offset
    // i*(r+1) - i*(i-1)/2 and holds r+1-i entries
    let idx = |i: usize, j: usize| -> usize { i * (r + 1) - (i * i - i) / 2 + j };
    let node = |i: usize, j: usize| &grid.nodes[idx(i, j)];
    svg.push_str("<g stroke=\"none\">\n");
    let cell = |a: &crate::dynamics::GridNode,
                b: &crate::dynamics::GridNode,
                c: &crate::dynamics::GridNode,
                svg: &mut String| {
        let mean = (a.speed + b.speed + c.speed) / 3.0;
        let color = speed_color((mean - lo) / span);
        let (ax, ay) = project(&a.point);
        let (bx, by) = project(&b.point);
        let (cx, cy) = project(&c.point);
        svg.push_str(&format!(
            "<polygon points=\"{ax:.4},{ay:.4} {bx:.4},{by:.4} {cx:.4},{cy:.4}\" fill=\"{color}\"/>\n"
        ));
    };
    for i in 0..r {
        for j in 0..(r - i) {
            // upward triangle (i,j), (i+1,j), (i,j+1)
            cell(node(i, j), node(i + 1, j), node(i, j + 1), &mut svg);
            // downward triangle (i+1,j), (i+1,j+1), (i,j+1)
            if j < r - i - 1 {
                cell(node(i + 1, j), node(i + 1, j + 1), node(i, j + 1), &mut svg);
            }
        }
    }
    svg.push_str("</g>\n");

    // simplex outline
    let (tx, ty) = project(&[1.0, 0.0, 0.0]);
    let (lx, ly) = project(&[0.0, 1.0, 0.0]);
    let (rx, ry) = project(&[0.0, 0.0, 1.0]);
    svg.push_str(&format!(
        "<polygon points=\"{tx:.4},{ty:.4} {lx:.4},{ly:.4} {rx:.4},{ry:.4}\" fill=\"none\" \
         stroke=\"black\" stroke-width=\"1.5\"/>\n"
    ));

    // streamlines
    svg.push_str(
        "<g fill=\"none\" stroke=\"#222222\" stroke-width=\"1.1\" stroke-opacity=\"0.85\">\n",
    );
    for line in streamlines {
        if line.len() < 2 {
            continue;
        }
        let pts: Vec<String> = line
            .iter()
            .map(|p| {
                let (x, y) = project(p);
                format!("{x:.4},{y:.4}")
            })
            .collect();
        svg.push_str(&format!("<polyline points=\"{}\"/>\n", pts.join(" ")));
    }
    svg.push_str("</g>\n");

    // equilibrium markers: filled when interior, open when on the boundary
    for report in equilibria {
        let p = report.point.point(0);
        let (x, y) = project(&[p[0], p[1], p[2]]);
        let fill = if report.is_interior { "black" } else { "white" };
        svg.push_str(&format!(
            "<circle cx=\"{x:.4}\" cy=\"{y:.4}\" r=\"5\" fill=\"{fill}\" stroke=\"black\" \
             stroke-width=\"1.5\"/>\n"
        ));
    }

    svg.push_str("</svg>\n");
    svg
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn portrait_is_deterministic() {
        let g = Game::rps(1.0, 2.0).unwrap();
        let mut spec = PortraitSpec::new(Incentive::Dash);
        spec.resolution = 12;
        spec.trajectory_seeds = 3;
        spec.time_horizon = 20.0;
        let a = render_portrait(&g, &spec).unwrap();
        let b = render_portrait(&g, &spec).unwrap();
        assert_eq!(a.svg, b.svg);
        assert!(a.svg.starts_with("<svg"));
        assert!(a.svg.contains("<polyline"));
        assert!(a.svg.contains("<circle"));
    }

    #[test]
    fn portrait_rejects_bad_inputs() {
        let g = Game::rps(1.0, 2.0).unwrap();
        let mut spec = PortraitSpec::new(Incentive::Dash);
        spec.resolution = 5;
        assert!(matches!(
            render_portrait(&g, &spec),
            Err(Error::InvalidInput(_))
        ));
        let two = Game::symmetric_two_player(vec![vec![1.0, 2.0], vec![3.0, 0.0]]).unwrap();
        assert!(matches!(
            render_portrait(&two, &PortraitSpec::new(Incentive::Dash)),
            Err(Error::UnsupportedShape(_))
        ));
    }

    #[test]
    fn dash_portrait_marks_the_center() {
        let g = Game::rps(1.0, 2.0).unwrap();
        let mut spec = PortraitSpec::new(Incentive::Dash);
        spec.resolution = 12;
        spec.trajectory_seeds = 2;
        spec.time_horizon = 30.0;
        let portrait = render_portrait(&g, &spec).unwrap();
        assert!(portrait.equilibria.iter().any(|r| r.is_uniform));
        // streamlines spiral in: every streamline ends near the center
        let uniform = [1.0 / 3.0; 3];
        for line in &portrait.streamlines {
            let last = line.last().unwrap();
            let d: f64 = last
                .iter()
                .zip(&uniform)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt();
            assert!(d < 1e-3, "streamline terminal {last:?}");
        }
    }

    #[test]
    fn grid_csv_matches_grid_values() {
        let g = Game::rps(1.0, 2.0).unwrap();
        let grid = crate::dynamics::speed_grid(Incentive::Dash, &g, 10).unwrap();
        let mut buf = Vec::new();
        grid.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), grid.nodes.len() + 1);
        // full-precision round trip of a sample row
        let fields: Vec<f64> = lines[1].split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(fields[0], grid.nodes[0].point[0]);
        assert_eq!(fields[3], grid.nodes[0].speed);
    }
}
