//! Pure-strategy Nash and Stackelberg solutions of the lane-change game.
//!
//! The ego car (leader in the Stackelberg form) picks a lane-change behaviour and an
//! acceleration; each adjacent car picks an acceleration only. Games are solved on
//! finite grids by enumeration of a cost bimatrix whose rows are ego actions and whose
//! columns are adjacent-car accelerations.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use crate::costs::{CostBreakdown, DecisionAction, DecisionScene, Sigma};
use crate::error::GameError;
use crate::style::CostWeights;

/// Relative tolerance used for best-response set membership.
pub const BEST_RESPONSE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EquilibriumKind {
    Nash,
    Stackelberg,
}

impl EquilibriumKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Nash => "nash",
            Self::Stackelberg => "stackelberg",
        }
    }
}

impl std::str::FromStr for EquilibriumKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "nash" => Ok(Self::Nash),
            "stackelberg" => Ok(Self::Stackelberg),
            _ => Err(format!("unknown strategy `{s}` (expected nash or stackelberg)")),
        }
    }
}

impl std::fmt::Display for EquilibriumKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Discretized action sets and velocity bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ActionGrid {
    pub accelerations: Vec<f64>,
    pub sigmas: Vec<Sigma>,
    pub v_min: f64,
    pub v_max: f64,
}

impl Default for ActionGrid {
    fn default() -> Self {
        Self::uniform(-4.0, 3.0, 0.5, 0.0, 25.0)
    }
}

impl ActionGrid {
    /// Evenly spaced accelerations from `a_min` to `a_max` inclusive.
    pub fn uniform(a_min: f64, a_max: f64, step: f64, v_min: f64, v_max: f64) -> Self {
        let n = ((a_max - a_min) / step + 1e-9).floor() as usize + 1;
        Self {
            accelerations: (0..n).map(|i| a_min + i as f64 * step).collect(),
            sigmas: Sigma::ALL.to_vec(),
            v_min,
            v_max,
        }
    }

    pub fn validate(&self) -> Result<(), GameError> {
        if self.accelerations.is_empty() {
            return Err(GameError::EmptyGrid("accelerations"));
        }
        if self.sigmas.is_empty() {
            return Err(GameError::EmptyGrid("sigmas"));
        }
        if !self.accelerations.windows(2).all(|w| w[0] < w[1]) || !self.accelerations.iter().all(|a| a.is_finite()) {
            return Err(GameError::Shape("accelerations must be finite and strictly ascending".into()));
        }
        if !(self.v_min <= self.v_max) {
            return Err(GameError::Shape(format!("v_min {} exceeds v_max {}", self.v_min, self.v_max)));
        }
        Ok(())
    }

    /// Accelerations that keep the speed within bounds after `horizon`; when none do,
    /// the one landing closest to the band.
    pub fn admissible_accels(&self, speed: f64, horizon: f64) -> Vec<f64> {
        let miss = |a: f64| {
            let v = speed + a * horizon;
            (self.v_min - v).max(v - self.v_max).max(0.0)
        };
        let ok: Vec<f64> = self.accelerations.iter().copied().filter(|&a| miss(a) == 0.0).collect();
        if !ok.is_empty() {
            return ok;
        }
        let best = self
            .accelerations
            .iter()
            .copied()
            .min_by(|a, b| miss(*a).total_cmp(&miss(*b)).then(a.abs().total_cmp(&b.abs())))
            .expect("non-empty grid");
        vec![best]
    }
}

/// Cost bimatrix: `ego[r][c]` and `ac[r][c]` for ego row `r` and adjacent-car column `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct Bimatrix {
    pub rows: usize,
    pub cols: usize,
    pub ego: Vec<f64>,
    pub ac: Vec<f64>,
}

impl Bimatrix {
    pub fn new(rows: usize, cols: usize, ego: Vec<f64>, ac: Vec<f64>) -> Result<Self, GameError> {
        if rows == 0 || cols == 0 {
            return Err(GameError::EmptyGrid("bimatrix"));
        }
        if ego.len() != rows * cols || ac.len() != rows * cols {
            return Err(GameError::Shape(format!(
                "expected {} entries, got ego {} and ac {}",
                rows * cols,
                ego.len(),
                ac.len()
            )));
        }
        Ok(Self { rows, cols, ego, ac })
    }

    pub fn ego_at(&self, r: usize, c: usize) -> f64 {
        self.ego[r * self.cols + c]
    }

    pub fn ac_at(&self, r: usize, c: usize) -> f64 {
        self.ac[r * self.cols + c]
    }

    /// A row is feasible when the ego cost is finite for some column.
    pub fn row_feasible(&self, r: usize) -> bool {
        (0..self.cols).any(|c| self.ego_at(r, c).is_finite())
    }

    /// Columns minimizing the adjacent-car cost on row `r`, within the tie tolerance.
    pub fn follower_best_responses(&self, r: usize) -> Vec<usize> {
        let best = (0..self.cols).map(|c| self.ac_at(r, c)).fold(f64::INFINITY, f64::min);
        (0..self.cols).filter(|&c| within(self.ac_at(r, c), best)).collect()
    }

    fn ego_best(&self, c: usize, feasible: &[usize]) -> f64 {
        feasible.iter().map(|&r| self.ego_at(r, c)).fold(f64::INFINITY, f64::min)
    }
}

fn within(v: f64, best: f64) -> bool {
    if v == best {
        return true;
    }
    v.is_finite() && best.is_finite() && v - best <= BEST_RESPONSE_TOL * best.abs().max(1.0)
}

/// Outcome of a bimatrix game.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatrixSolution {
    pub row: usize,
    pub col: usize,
    /// Number of pure equilibria (Nash) or optimal leader rows (Stackelberg); 0 on fallback.
    pub multiplicity: usize,
    pub fallback: bool,
}

/// Deterministic ordering keys: ego actions by `|a|` then σ preference, columns by `|a|`.
fn row_order(rows: &[DecisionAction], a: usize, b: usize) -> Ordering {
    let (x, y) = (&rows[a], &rows[b]);
    x.accel
        .abs()
        .total_cmp(&y.accel.abs())
        .then(x.sigma.tie_rank().cmp(&y.sigma.tie_rank()))
        .then(x.accel.total_cmp(&y.accel))
        .then(a.cmp(&b))
}

fn col_order(cols: &[f64], a: usize, b: usize) -> Ordering {
    cols[a].abs().total_cmp(&cols[b].abs()).then(cols[a].total_cmp(&cols[b])).then(a.cmp(&b))
}

fn check_labels(m: &Bimatrix, rows: &[DecisionAction], cols: &[f64]) -> Result<Vec<usize>, GameError> {
    if rows.len() != m.rows || cols.len() != m.cols {
        return Err(GameError::Shape(format!(
            "labels {}x{} do not match bimatrix {}x{}",
            rows.len(),
            cols.len(),
            m.rows,
            m.cols
        )));
    }
    let feasible: Vec<usize> = (0..m.rows).filter(|&r| m.row_feasible(r)).collect();
    if feasible.is_empty() {
        return Err(GameError::NoFeasibleAction);
    }
    Ok(feasible)
}

/// Ego security strategy: minimize the worst ego cost over all columns.
fn security(m: &Bimatrix, rows: &[DecisionAction], cols: &[f64], feasible: &[usize], reply: impl Fn(usize) -> Vec<usize>) -> (usize, usize, f64) {
    let mut best: Option<(usize, usize, f64)> = None;
    for &r in feasible {
        let candidates = reply(r);
        let c = *candidates
            .iter()
            .max_by(|&&a, &&b| m.ego_at(r, a).total_cmp(&m.ego_at(r, b)).then(col_order(cols, b, a)))
            .expect("non-empty reply set");
        let value = m.ego_at(r, c);
        let better = match best {
            None => true,
            Some((br, _, bv)) => value.total_cmp(&bv).then(row_order(rows, r, br)) == Ordering::Less,
        };
        if better {
            best = Some((r, c, value));
        }
    }
    best.expect("feasible rows")
}

/// Pure-strategy Nash equilibrium by exhaustive mutual best-response check.
///
/// Among several equilibria the one with the lowest ego cost wins, then the smaller
/// `|a|` and σ preference (keep, left, right). Without a pure equilibrium the ego
/// security strategy is returned with `multiplicity == 0`.
pub fn solve_nash(m: &Bimatrix, rows: &[DecisionAction], cols: &[f64]) -> Result<MatrixSolution, GameError> {
    let feasible = check_labels(m, rows, cols)?;
    let col_best: Vec<f64> = (0..m.cols).map(|c| m.ego_best(c, &feasible)).collect();
    let mut count = 0;
    let mut best: Option<(usize, usize)> = None;
    for &r in &feasible {
        let replies = m.follower_best_responses(r);
        for c in replies {
            if !m.ego_at(r, c).is_finite() || !within(m.ego_at(r, c), col_best[c]) {
                continue;
            }
            count += 1;
            let better = match best {
                None => true,
                Some((br, bc)) => m
                    .ego_at(r, c)
                    .total_cmp(&m.ego_at(br, bc))
                    .then(row_order(rows, r, br))
                    .then(col_order(cols, c, bc))
                    == Ordering::Less,
            };
            if better {
                best = Some((r, c));
            }
        }
    }
    Ok(match best {
        Some((row, col)) => MatrixSolution { row, col, multiplicity: count, fallback: false },
        None => {
            let all: Vec<usize> = (0..m.cols).collect();
            let (row, col, _) = security(m, rows, cols, &feasible, |_| all.clone());
            MatrixSolution { row, col, multiplicity: 0, fallback: true }
        }
    })
}

/// Stackelberg solution with the ego as leader.
///
/// Each ego row is valued at the worst ego cost over the follower's best-response set;
/// the row with the smallest value wins and the reported column is the best response
/// that realizes it.
pub fn solve_stackelberg(m: &Bimatrix, rows: &[DecisionAction], cols: &[f64]) -> Result<MatrixSolution, GameError> {
    let feasible = check_labels(m, rows, cols)?;
    let (row, col, value) = security(m, rows, cols, &feasible, |r| m.follower_best_responses(r));
    let multiplicity = feasible
        .iter()
        .filter(|&&r| {
            let v = m
                .follower_best_responses(r)
                .iter()
                .map(|&c| m.ego_at(r, c))
                .fold(f64::NEG_INFINITY, f64::max);
            v == value
        })
        .count();
    Ok(MatrixSolution { row, col, multiplicity, fallback: false })
}

pub fn solve_matrix(kind: EquilibriumKind, m: &Bimatrix, rows: &[DecisionAction], cols: &[f64]) -> Result<MatrixSolution, GameError> {
    match kind {
        EquilibriumKind::Nash => solve_nash(m, rows, cols),
        EquilibriumKind::Stackelberg => solve_stackelberg(m, rows, cols),
    }
}

/// Picks between the left (σ ∈ {−1, 0}) and right (σ ∈ {0, +1}) subgame values; an
/// exact tie goes left. Sides given as `None` are unavailable.
pub fn select_side(left: Option<f64>, right: Option<f64>) -> Option<Side> {
    match (left, right) {
        (Some(l), Some(r)) => Some(if r < l { Side::Right } else { Side::Left }),
        (Some(_), None) => Some(Side::Left),
        (None, Some(_)) => Some(Side::Right),
        (None, None) => None,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

impl Side {
    pub fn sigmas(&self) -> [Sigma; 2] {
        match self {
            Side::Left => [Sigma::Left, Sigma::Keep],
            Side::Right => [Sigma::Keep, Sigma::Right],
        }
    }
}

/// Solution of a decision game in terms of actions and cost breakdowns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GameSolution {
    pub ego_action: DecisionAction,
    /// `(index into the scene's other vehicles, acceleration)` for every player.
    pub ac_actions: Vec<(usize, f64)>,
    pub ego_cost: CostBreakdown,
    pub ac_costs: Vec<CostBreakdown>,
    pub equilibrium_kind: EquilibriumKind,
    pub multiplicity: usize,
    /// Set when no pure Nash equilibrium existed and the security strategy was used.
    pub fallback: bool,
    /// Subgame that produced the solution in the two-car form.
    pub side: Option<Side>,
    /// Equilibrium accelerations of the adjacent cars of the subgame that was not selected.
    pub bystander_actions: Vec<(usize, f64)>,
}

/// Weights and grid shared by the scene-level solvers.
#[derive(Debug, Clone, Copy)]
pub struct GameInputs<'a> {
    pub grid: &'a ActionGrid,
    pub ego_weights: &'a CostWeights,
    /// Weights of every other vehicle of the scene, by index.
    pub ac_weights: &'a [CostWeights],
}

struct SceneGame {
    rows: Vec<DecisionAction>,
    cols: Vec<f64>,
    ego: Vec<CostBreakdown>,
    ac: Vec<CostBreakdown>,
    matrix: Bimatrix,
}

fn build_game(scene: &DecisionScene, ac: Option<usize>, sigmas: &[Sigma], inputs: &GameInputs) -> Result<SceneGame, GameError> {
    inputs.grid.validate()?;
    let horizon = scene.config.horizon;
    let ego_accels = inputs.grid.admissible_accels(scene.ego.speed, horizon);
    let rows: Vec<DecisionAction> = sigmas
        .iter()
        .filter(|s| inputs.grid.sigmas.contains(s))
        .flat_map(|&sigma| ego_accels.iter().map(move |&accel| DecisionAction { sigma, accel }))
        .collect();
    if rows.is_empty() {
        return Err(GameError::NoFeasibleAction);
    }
    let cols = match ac {
        Some(i) => inputs.grid.admissible_accels(scene.others[i].speed, horizon),
        None => vec![0.0],
    };
    let mut ego = Vec::with_capacity(rows.len() * cols.len());
    let mut acc = Vec::with_capacity(rows.len() * cols.len());
    for action in &rows {
        for &a in &cols {
            match ac {
                Some(i) => {
                    let players = [(i, a)];
                    ego.push(scene.ego_cost(action, &players, inputs.ego_weights));
                    acc.push(scene.ac_cost(i, a, action, &players, &inputs.ac_weights[i]));
                }
                None => {
                    ego.push(scene.ego_cost(action, &[], inputs.ego_weights));
                    acc.push(CostBreakdown::zero());
                }
            }
        }
    }
    let matrix = Bimatrix::new(
        rows.len(),
        cols.len(),
        ego.iter().map(|c| c.total).collect(),
        acc.iter().map(|c| c.total).collect(),
    )?;
    Ok(SceneGame { rows, cols, ego, ac: acc, matrix })
}

fn solve_scene(
    kind: EquilibriumKind,
    scene: &DecisionScene,
    ac: Option<usize>,
    sigmas: &[Sigma],
    inputs: &GameInputs,
    side: Option<Side>,
) -> Result<GameSolution, GameError> {
    let g = build_game(scene, ac, sigmas, inputs)?;
    let sol = solve_matrix(kind, &g.matrix, &g.rows, &g.cols)?;
    let k = sol.row * g.cols.len() + sol.col;
    Ok(GameSolution {
        ego_action: g.rows[sol.row],
        ac_actions: ac.map(|i| vec![(i, g.cols[sol.col])]).unwrap_or_default(),
        ego_cost: g.ego[k],
        ac_costs: ac.map(|_| vec![g.ac[k]]).unwrap_or_default(),
        equilibrium_kind: kind,
        multiplicity: sol.multiplicity,
        fallback: sol.fallback,
        side,
        bystander_actions: Vec::new(),
    })
}

/// Two-player game between the ego and adjacent car `ac` (or the ego alone when `None`).
pub fn solve_2p(kind: EquilibriumKind, scene: &DecisionScene, ac: Option<usize>, inputs: &GameInputs) -> Result<GameSolution, GameError> {
    solve_scene(kind, scene, ac, &Sigma::ALL, inputs, None)
}

pub fn solve_nash_2p(scene: &DecisionScene, ac: Option<usize>, inputs: &GameInputs) -> Result<GameSolution, GameError> {
    solve_2p(EquilibriumKind::Nash, scene, ac, inputs)
}

pub fn solve_stackelberg_2p(scene: &DecisionScene, ac: Option<usize>, inputs: &GameInputs) -> Result<GameSolution, GameError> {
    solve_2p(EquilibriumKind::Stackelberg, scene, ac, inputs)
}

/// Game against one adjacent car on each side, solved as a left subgame with
/// σ ∈ {−1, 0} against `left_ac` and a right subgame with σ ∈ {0, +1} against
/// `right_ac`; the side with the lower ego cost wins.
pub fn solve_two_ac(
    kind: EquilibriumKind,
    scene: &DecisionScene,
    left_ac: Option<usize>,
    right_ac: Option<usize>,
    inputs: &GameInputs,
) -> Result<GameSolution, GameError> {
    let side_solution = |side: Side, ac: Option<usize>| match solve_scene(kind, scene, ac, &side.sigmas(), inputs, Some(side)) {
        Ok(s) => Ok(Some(s)),
        Err(GameError::NoFeasibleAction) => Ok(None),
        Err(e) => Err(e),
    };
    let left = side_solution(Side::Left, left_ac)?;
    let right = side_solution(Side::Right, right_ac)?;
    let (chosen, other) = match select_side(left.as_ref().map(|s| s.ego_cost.total), right.as_ref().map(|s| s.ego_cost.total)) {
        Some(Side::Left) => (left.expect("left side"), right),
        Some(Side::Right) => (right.expect("right side"), left),
        None => return Err(GameError::NoFeasibleAction),
    };
    Ok(GameSolution {
        bystander_actions: other.map(|o| o.ac_actions).unwrap_or_default(),
        ..chosen
    })
}

pub fn solve_nash_two_ac(scene: &DecisionScene, left_ac: Option<usize>, right_ac: Option<usize>, inputs: &GameInputs) -> Result<GameSolution, GameError> {
    solve_two_ac(EquilibriumKind::Nash, scene, left_ac, right_ac, inputs)
}

pub fn solve_stackelberg_two_ac(
    scene: &DecisionScene,
    left_ac: Option<usize>,
    right_ac: Option<usize>,
    inputs: &GameInputs,
) -> Result<GameSolution, GameError> {
    solve_two_ac(EquilibriumKind::Stackelberg, scene, left_ac, right_ac, inputs)
}
