//! Finite normal-form games, mixed profiles, and the row-structure
//! predicates (equal row sums, permuted rows) that drive the equilibrium
//! characterizations.
//!
//! Pure-strategy profiles are enumerated lexicographically by ascending
//! player index, each player's strategies in index order. Player 0 is the
//! most significant digit of the flat tensor index. Opponent profiles (for
//! reduced matrices) use the same order with the focal player skipped.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use crate::error::{Error, Result};

/// Per-player simplex sums must match 1 within this tolerance.
pub const SUM_TOL: f64 = 1e-12;
/// Default interior predicate: every coordinate at least this large.
pub const INTERIOR_EPS: f64 = 1e-10;
/// Relative tolerance for payoff-scaled comparisons (row sums, residual-zero).
pub const REL_TOL: f64 = 1e-9;
/// Absolute floor for payoff-scaled tolerances (degenerate all-zero games).
pub const ABS_TOL_FLOOR: f64 = 1e-12;

/// A finite normal-form game: per-player payoff tensors over pure profiles.
#[derive(Debug, Clone, PartialEq)]
pub struct Game {
    strategy_counts: Vec<usize>,
    /// payoffs[i][flat profile index] = payoff to player i.
    payoffs: Vec<Vec<f64>>,
    /// Set for 2-player games built from a shared matrix read from each seat.
    symmetric: bool,
    /// Cached reduced matrices, rows = own strategies, cols = opponent profiles.
    reduced: Vec<Vec<Vec<f64>>>,
    /// max |entry| over all tensors.
    scale: f64,
}

/// Row summary of a player's reduced matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RowStats {
    pub row_sum: f64,
    /// Sum of (entry - mean of all entries)_+ over the row.
    pub above_average_excess: f64,
}

impl Game {
    /// Build a game from strategy counts and flat payoff tensors
    /// (one tensor per player, length = product of all counts).
    pub fn new(strategy_counts: Vec<usize>, payoffs: Vec<Vec<f64>>) -> Result<Self> {
        Self::build(strategy_counts, payoffs, false)
    }

    /// 2-player symmetric game from a shared square matrix. The row player
    /// gets `m[a][b]`, the column player `m[b][a]`.
    pub fn symmetric_two_player(matrix: Vec<Vec<f64>>) -> Result<Self> {
        let s = matrix.len();
        if s == 0 || matrix.iter().any(|row| row.len() != s) {
            return Err(Error::InvalidInput(
                "symmetric matrix must be square and nonempty".into(),
            ));
        }
        let mut p0 = Vec::with_capacity(s * s);
        let mut p1 = Vec::with_capacity(s * s);
        for a in 0..s {
            for b in 0..s {
                p0.push(matrix[a][b]);
                p1.push(matrix[b][a]);
            }
        }
        Self::build(vec![s, s], vec![p0, p1], true)
    }

    /// Generalized rock-paper-scissors with win payoff `a` and loss payoff
    /// `-b`; bad when `b > a`, good when `a > b`, standard at `a = b = 1`.
    pub fn rps(a: f64, b: f64) -> Result<Self> {
        if !(a > 0.0) || !(b > 0.0) {
            return Err(Error::InvalidInput(format!(
                "rps requires a > 0 and b > 0, got a={a}, b={b}"
            )));
        }
        Self::symmetric_two_player(vec![vec![0.0, -b, a], vec![a, 0.0, -b], vec![-b, a, 0.0]])
    }

    fn build(strategy_counts: Vec<usize>, payoffs: Vec<Vec<f64>>, symmetric: bool) -> Result<Self> {
        let n = strategy_counts.len();
        if n == 0 {
            return Err(Error::InvalidInput("game needs at least one player".into()));
        }
        if strategy_counts.contains(&0) {
            return Err(Error::InvalidInput(
                "every player needs at least one strategy".into(),
            ));
        }
        let total: usize = strategy_counts.iter().product();
        if payoffs.len() != n {
            return Err(Error::InvalidInput(format!(
                "expected {n} payoff tensors, got {}",
                payoffs.len()
            )));
        }
        for (i, t) in payoffs.iter().enumerate() {
            if t.len() != total {
                return Err(Error::InvalidInput(format!(
                    "player {i} tensor has {} entries, expected {total}",
                    t.len()
                )));
            }
            if t.iter().any(|v| !v.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "player {i} tensor contains a non-finite entry"
                )));
            }
        }
        let scale = payoffs
            .iter()
            .flat_map(|t| t.iter())
            .fold(0.0_f64, |m, v| m.max(v.abs()));
        let mut game = Game {
            strategy_counts,
            payoffs,
            symmetric,
            reduced: Vec::new(),
            scale,
        };
        game.reduced = (0..n).map(|i| game.compute_reduced(i)).collect();
        Ok(game)
    }

    pub fn players(&self) -> usize {
        self.strategy_counts.len()
    }

    pub fn strategy_counts(&self) -> &[usize] {
        &self.strategy_counts
    }

    pub fn strategy_count(&self, player: usize) -> usize {
        self.strategy_counts[player]
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    /// max |payoff entry|; 0 for the all-zero game.
    pub fn payoff_scale(&self) -> f64 {
        self.scale
    }

    /// Payoff-scaled comparison tolerance with an absolute floor.
    pub fn tolerance(&self) -> f64 {
        (REL_TOL * self.scale).max(ABS_TOL_FLOOR)
    }

    /// Payoff to `player` at the pure profile.
    pub fn payoff(&self, player: usize, profile: &[usize]) -> f64 {
        self.payoffs[player][self.profile_index(profile)]
    }

    fn profile_index(&self, profile: &[usize]) -> usize {
        debug_assert_eq!(profile.len(), self.players());
        profile
            .iter()
            .zip(&self.strategy_counts)
            .fold(0, |acc, (&j, &s)| acc * s + j)
    }

    fn check_profile(&self, x: &MixedProfile) -> Result<()> {
        if x.shape() != self.strategy_counts {
            return Err(Error::InvalidInput(format!(
                "profile shape {:?} does not match game shape {:?}",
                x.shape(),
                self.strategy_counts
            )));
        }
        Ok(())
    }

    /// Expected payoff to `player` at the mixed profile: the exact
    /// multilinear expansion over all pure profiles.
    pub fn utility(&self, x: &MixedProfile, player: usize) -> Result<f64> {
        self.check_profile(x)?;
        self.check_player(player)?;
        Ok(self.utility_unchecked(x.points(), player))
    }

    pub(crate) fn utility_unchecked(&self, points: &[Vec<f64>], player: usize) -> f64 {
        let n = self.players();
        let mut profile = vec![0usize; n];
        let tensor = &self.payoffs[player];
        let mut acc = 0.0;
        for (idx, &payoff) in tensor.iter().enumerate() {
            let mut prob = 1.0;
            for (j, &pj) in profile.iter().enumerate() {
                prob *= points[j][pj];
            }
            acc += prob * payoff;
            let _ = idx;
            Self::advance(&mut profile, &self.strategy_counts);
        }
        acc
    }

    /// Payoff to `player` playing pure `strategy` against the others' mixtures.
    pub fn utility_pure_vs_rest(
        &self,
        player: usize,
        strategy: usize,
        x: &MixedProfile,
    ) -> Result<f64> {
        self.check_profile(x)?;
        self.check_player(player)?;
        if strategy >= self.strategy_counts[player] {
            return Err(Error::InvalidInput(format!(
                "strategy {strategy} out of range for player {player}"
            )));
        }
        Ok(self.utility_pure_vs_rest_unchecked(player, strategy, x.points()))
    }

    pub(crate) fn utility_pure_vs_rest_unchecked(
        &self,
        player: usize,
        strategy: usize,
        points: &[Vec<f64>],
    ) -> f64 {
        let n = self.players();
        let opp_counts: Vec<usize> = (0..n)
            .filter(|&j| j != player)
            .map(|j| self.strategy_counts[j])
            .collect();
        let mut opp = vec![0usize; opp_counts.len()];
        let mut full = vec![0usize; n];
        full[player] = strategy;
        let opp_total: usize = opp_counts.iter().product();
        let mut acc = 0.0;
        for _ in 0..opp_total {
            let mut prob = 1.0;
            let mut k = 0;
            for j in 0..n {
                if j == player {
                    continue;
                }
                full[j] = opp[k];
                prob *= points[j][opp[k]];
                k += 1;
            }
            acc += prob * self.payoffs[player][self.profile_index(&full)];
            Self::advance(&mut opp, &opp_counts);
        }
        acc
    }

    fn advance(profile: &mut [usize], counts: &[usize]) {
        for pos in (0..profile.len()).rev() {
            profile[pos] += 1;
            if profile[pos] < counts[pos] {
                return;
            }
            profile[pos] = 0;
        }
    }

    fn compute_reduced(&self, player: usize) -> Vec<Vec<f64>> {
        let n = self.players();
        let opp_counts: Vec<usize> = (0..n)
            .filter(|&j| j != player)
            .map(|j| self.strategy_counts[j])
            .collect();
        let opp_total: usize = opp_counts.iter().product();
        let mut rows = Vec::with_capacity(self.strategy_counts[player]);
        for alpha in 0..self.strategy_counts[player] {
            let mut row = Vec::with_capacity(opp_total);
            let mut opp = vec![0usize; opp_counts.len()];
            let mut full = vec![0usize; n];
            full[player] = alpha;
            for _ in 0..opp_total {
                let mut k = 0;
                for j in 0..n {
                    if j == player {
                        continue;
                    }
                    full[j] = opp[k];
                    k += 1;
                }
                row.push(self.payoffs[player][self.profile_index(&full)]);
                Self::advance(&mut opp, &opp_counts);
            }
            rows.push(row);
        }
        rows
    }

    /// Player's payoffs as rows = own strategies, columns = opponents' pure
    /// profiles in the documented lexicographic order.
    pub fn reduced_matrix(&self, player: usize) -> &[Vec<f64>] {
        &self.reduced[player]
    }

    fn check_player(&self, player: usize) -> Result<()> {
        if player >= self.players() {
            return Err(Error::InvalidInput(format!(
                "player {player} out of range (game has {})",
                self.players()
            )));
        }
        Ok(())
    }

    /// Row sums and above-average excesses of the player's reduced matrix.
    pub fn row_stats(&self, player: usize) -> Vec<RowStats> {
        let rows = &self.reduced[player];
        let total: f64 = rows.iter().flat_map(|r| r.iter()).sum();
        let count = rows.iter().map(|r| r.len()).sum::<usize>();
        let mean = total / count as f64;
        rows.iter()
            .map(|row| RowStats {
                row_sum: row.iter().sum(),
                above_average_excess: row.iter().map(|&v| (v - mean).max(0.0)).sum(),
            })
            .collect()
    }

    /// True iff every player's reduced matrix has equal row sums within the
    /// payoff-scaled tolerance.
    pub fn equal_row_sums(&self) -> bool {
        (0..self.players()).all(|i| {
            let stats = self.row_stats(i);
            let first = stats[0].row_sum;
            stats
                .iter()
                .all(|s| (s.row_sum - first).abs() <= self.tolerance())
        })
    }

    /// True iff every row of the player's reduced matrix is a multiset
    /// permutation of row 0 (sorted-row comparison with tolerance).
    pub fn rows_are_permutations(&self, player: usize) -> bool {
        let rows = &self.reduced[player];
        let sorted = |row: &[f64]| {
            let mut v = row.to_vec();
            v.sort_by(|a, b| a.partial_cmp(b).unwrap());
            v
        };
        let base = sorted(&rows[0]);
        rows.iter().all(|row| {
            let r = sorted(row);
            r.iter()
                .zip(&base)
                .all(|(a, b)| (a - b).abs() <= self.tolerance())
        })
    }

    /// True iff every player's rows are permutations of each other.
    pub fn all_rows_are_permutations(&self) -> bool {
        (0..self.players()).all(|i| self.rows_are_permutations(i))
    }

    /// The uniform mixed profile over this game's shape.
    pub fn uniform_profile(&self) -> MixedProfile {
        MixedProfile::uniform(&self.strategy_counts)
    }

    /// Deterministic Dirichlet(1,...,1) sample per player. Draws with a
    /// coordinate below 1e-6 are rejected and redrawn so downstream 1/x
    /// quotients stay well-conditioned.
    pub fn random_interior_profile(&self, seed: u64) -> MixedProfile {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        self.random_interior_profile_with(&mut rng)
    }

    /// Same as `random_interior_profile` but advancing a caller-owned RNG.
    pub fn random_interior_profile_with(&self, rng: &mut impl Rng) -> MixedProfile {
        let points = self
            .strategy_counts
            .iter()
            .map(|&s| sample_interior_point(s, rng))
            .collect();
        MixedProfile::new(points).expect("dirichlet sample is a valid profile")
    }

    /// True when the two seats see the same reduced matrix, so one simplex
    /// point can stand for both populations.
    pub fn is_single_population_compatible(&self) -> bool {
        if self.players() != 2 || self.strategy_counts[0] != self.strategy_counts[1] {
            return false;
        }
        self.symmetric || self.reduced[0] == self.reduced[1]
    }

    /// True when the game can be drawn as a single-population ternary
    /// portrait: 2 players, 3 strategies each, payoffs mirror each other.
    pub fn is_portrait_compatible(&self) -> bool {
        self.strategy_counts == [3, 3] && self.is_single_population_compatible()
    }

    // ---- JSON file format -------------------------------------------------

    /// Parse the JSON game document. Either `payoffs` (per-player nested
    /// arrays in the documented profile order) or the 2-player
    /// `symmetric_matrix` shortcut must be present.
    pub fn from_json(text: &str) -> Result<Self> {
        let doc: Value = serde_json::from_str(text)?;
        let obj = doc
            .as_object()
            .ok_or_else(|| Error::InvalidInput("game document must be a JSON object".into()))?;
        if let Some(m) = obj.get("symmetric_matrix") {
            let matrix = parse_matrix(m)?;
            return Self::symmetric_two_player(matrix);
        }
        let counts: Vec<usize> = obj
            .get("strategy_counts")
            .and_then(|v| v.as_array())
            .ok_or_else(|| Error::InvalidInput("missing strategy_counts".into()))?
            .iter()
            .map(|v| {
                v.as_u64()
                    .map(|u| u as usize)
                    .ok_or_else(|| Error::InvalidInput("strategy_counts must be integers".into()))
            })
            .collect::<Result<_>>()?;
        if let Some(p) = obj.get("players").and_then(|v| v.as_u64()) {
            if p as usize != counts.len() {
                return Err(Error::InvalidInput(format!(
                    "players field {p} disagrees with strategy_counts length {}",
                    counts.len()
                )));
            }
        }
        let payoff_vals = obj
            .get("payoffs")
            .and_then(|v| v.as_array())
            .ok_or_else(|| Error::InvalidInput("missing payoffs".into()))?;
        if payoff_vals.len() != counts.len() {
            return Err(Error::InvalidInput(format!(
                "expected {} payoff tensors, got {}",
                counts.len(),
                payoff_vals.len()
            )));
        }
        let payoffs = payoff_vals
            .iter()
            .map(|v| {
                let mut flat = Vec::new();
                flatten_nested(v, &counts, 0, &mut flat)?;
                Ok(flat)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(counts, payoffs)
    }

    /// Serialize to the JSON game document. Symmetric games round-trip
    /// through the `symmetric_matrix` shortcut.
    pub fn to_json(&self) -> String {
        let mut obj = serde_json::Map::new();
        obj.insert("players".into(), Value::from(self.players() as u64));
        obj.insert(
            "strategy_counts".into(),
            Value::from(
                self.strategy_counts
                    .iter()
                    .map(|&s| s as u64)
                    .collect::<Vec<_>>(),
            ),
        );
        if self.symmetric {
            let s = self.strategy_counts[0];
            let matrix: Vec<Value> = (0..s)
                .map(|a| {
                    Value::from(
                        (0..s)
                            .map(|b| self.payoffs[0][a * s + b])
                            .collect::<Vec<f64>>(),
                    )
                })
                .collect();
            obj.insert("symmetric_matrix".into(), Value::from(matrix));
        } else {
            let tensors: Vec<Value> = (0..self.players())
                .map(|i| nest_tensor(&self.payoffs[i], &self.strategy_counts, 0, &mut 0))
                .collect();
            obj.insert("payoffs".into(), Value::from(tensors));
        }
        serde_json::to_string_pretty(&Value::Object(obj)).expect("game document serializes")
    }

    pub fn read_file(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn write_file(&self, path: &std::path::Path) -> Result<()> {
        Ok(std::fs::write(path, self.to_json())?)
    }
}

fn parse_matrix(v: &Value) -> Result<Vec<Vec<f64>>> {
    let rows = v
        .as_array()
        .ok_or_else(|| Error::InvalidInput("symmetric_matrix must be an array".into()))?;
    rows.iter()
        .map(|row| {
            row.as_array()
                .ok_or_else(|| Error::InvalidInput("matrix rows must be arrays".into()))?
                .iter()
                .map(|x| {
                    x.as_f64()
                        .ok_or_else(|| Error::InvalidInput("matrix entries must be numbers".into()))
                })
                .collect()
        })
        .collect()
}

fn flatten_nested(v: &Value, counts: &[usize], depth: usize, out: &mut Vec<f64>) -> Result<()> {
    if depth == counts.len() {
        let x = v
            .as_f64()
            .ok_or_else(|| Error::InvalidInput("payoff entries must be numbers".into()))?;
        out.push(x);
        return Ok(());
    }
    let arr = v.as_array().ok_or_else(|| {
        Error::InvalidInput(format!("payoff nesting at depth {depth} must be an array"))
    })?;
    if arr.len() != counts[depth] {
        return Err(Error::InvalidInput(format!(
            "payoff array at depth {depth} has {} entries, expected {}",
            arr.len(),
            counts[depth]
        )));
    }
    for child in arr {
        flatten_nested(child, counts, depth + 1, out)?;
    }
    Ok(())
}

fn nest_tensor(flat: &[f64], counts: &[usize], depth: usize, pos: &mut usize) -> Value {
    if depth == counts.len() {
        let v = flat[*pos];
        *pos += 1;
        return Value::from(v);
    }
    Value::from(
        (0..counts[depth])
            .map(|_| nest_tensor(flat, counts, depth + 1, pos))
            .collect::<Vec<Value>>(),
    )
}

/// Dirichlet(1,...,1) draw on the `s`-simplex via normalized exponentials,
/// redrawn until every coordinate is at least 1e-6.
pub fn sample_interior_point(s: usize, rng: &mut impl Rng) -> Vec<f64> {
    loop {
        let mut v: Vec<f64> = (0..s)
            .map(|_| -f64::ln(1.0 - rng.random::<f64>()))
            .collect();
        let sum: f64 = v.iter().sum();
        if sum <= 0.0 {
            continue;
        }
        v.iter_mut().for_each(|x| *x /= sum);
        if v.iter().all(|&x| x >= 1e-6) {
            return v;
        }
    }
}

/// One simplex point per player.
#[derive(Debug, Clone, PartialEq)]
pub struct MixedProfile {
    points: Vec<Vec<f64>>,
}

impl MixedProfile {
    /// Validate nonnegativity and per-player sums (within `SUM_TOL`).
    pub fn new(points: Vec<Vec<f64>>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidInput(
                "profile needs at least one player".into(),
            ));
        }
        for (i, p) in points.iter().enumerate() {
            if p.is_empty() {
                return Err(Error::InvalidInput(format!("player {i} point is empty")));
            }
            if p.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::InvalidInput(format!(
                    "player {i} point has a negative or non-finite coordinate"
                )));
            }
            let sum: f64 = p.iter().sum();
            if (sum - 1.0).abs() > SUM_TOL {
                return Err(Error::InvalidInput(format!(
                    "player {i} point sums to {sum}, expected 1 within {SUM_TOL:e}"
                )));
            }
        }
        Ok(MixedProfile { points })
    }

    /// Uniform distribution for each player.
    pub fn uniform(counts: &[usize]) -> Self {
        MixedProfile {
            points: counts.iter().map(|&s| vec![1.0 / s as f64; s]).collect(),
        }
    }

    /// Clamp negatives to zero and renormalize each player's point.
    /// Used by the integrator's per-step drift correction.
    pub(crate) fn from_raw_normalized(mut raw: Vec<Vec<f64>>) -> Option<Self> {
        for p in &mut raw {
            let mut sum = 0.0;
            for v in p.iter_mut() {
                if !v.is_finite() {
                    return None;
                }
                if *v < 0.0 {
                    *v = 0.0;
                }
                sum += *v;
            }
            if sum <= 0.0 {
                return None;
            }
            for v in p.iter_mut() {
                *v /= sum;
            }
        }
        Some(MixedProfile { points: raw })
    }

    pub fn points(&self) -> &[Vec<f64>] {
        &self.points
    }

    pub fn point(&self, player: usize) -> &[f64] {
        &self.points[player]
    }

    pub fn players(&self) -> usize {
        self.points.len()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.points.iter().map(|p| p.len()).collect()
    }

    /// All coordinates at least `eps`.
    pub fn is_interior(&self, eps: f64) -> bool {
        self.points.iter().flat_map(|p| p.iter()).all(|&v| v >= eps)
    }

    /// Euclidean distance over the concatenated coordinates.
    pub fn distance(&self, other: &MixedProfile) -> f64 {
        self.points
            .iter()
            .zip(&other.points)
            .flat_map(|(a, b)| a.iter().zip(b.iter()))
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            .sqrt()
    }

    /// Max deviation from the exact uniform distribution.
    pub fn uniform_deviation(&self) -> f64 {
        self.points
            .iter()
            .map(|p| {
                let u = 1.0 / p.len() as f64;
                p.iter().map(|v| (v - u).abs()).fold(0.0, f64::max)
            })
            .fold(0.0, f64::max)
    }

    /// The same simplex point replicated for every player; counts must all
    /// equal the point's length.
    pub fn diagonal(point: &[f64], players: usize) -> Result<Self> {
        Self::new(vec![point.to_vec(); players])
    }
}
