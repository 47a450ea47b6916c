//! Stochastic bimatrix games, the two-level game and the payoff algebra.
//!
//! Entries are stored as unit-gain probabilities `d[k][i][j]`: the chance that
//! player `k` gains one unit when the row player picks action `i` and the
//! column player picks action `j`. With the complementary probability the
//! player loses one unit.

use std::fmt;
use std::path::Path;

use crate::error::{Error, Result};

/// One of the two agents (row and column player of a bimatrix).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Agent {
    One,
    Two,
}

impl Agent {
    pub const ALL: [Agent; 2] = [Agent::One, Agent::Two];

    pub fn index(self) -> usize {
        match self {
            Agent::One => 0,
            Agent::Two => 1,
        }
    }

    pub fn other(self) -> Agent {
        match self {
            Agent::One => Agent::Two,
            Agent::Two => Agent::One,
        }
    }
}

/// Strategy index of a two-strategy automaton. For action automata `First`
/// is action 1; for group automata it means "prefers the coalition game".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Strategy {
    First,
    Second,
}

impl Strategy {
    pub const BOTH: [Strategy; 2] = [Strategy::First, Strategy::Second];

    /// Pure-strategy probability of choosing strategy 1.
    pub fn as_probability(self) -> f64 {
        match self {
            Strategy::First => 1.0,
            Strategy::Second => 0.0,
        }
    }

    pub fn index(self) -> usize {
        match self {
            Strategy::First => 0,
            Strategy::Second => 1,
        }
    }
}

/// The four automata of the two-level game, in state-vector order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Automaton {
    Action1,
    Action2,
    Group1,
    Group2,
}

impl Automaton {
    pub const ALL: [Automaton; 4] = [
        Automaton::Action1,
        Automaton::Action2,
        Automaton::Group1,
        Automaton::Group2,
    ];

    pub fn index(self) -> usize {
        match self {
            Automaton::Action1 => 0,
            Automaton::Action2 => 1,
            Automaton::Group1 => 2,
            Automaton::Group2 => 3,
        }
    }

    /// Agent owning this automaton; its payoff matrix is that agent's.
    pub fn agent(self) -> Agent {
        match self {
            Automaton::Action1 | Automaton::Group1 => Agent::One,
            Automaton::Action2 | Automaton::Group2 => Agent::Two,
        }
    }

    pub fn from_number(k: usize) -> Option<Automaton> {
        Automaton::ALL.get(k.checked_sub(1)?).copied()
    }
}

fn check_probability(x: f64, what: &str) -> Result<()> {
    if (0.0..=1.0).contains(&x) {
        Ok(())
    } else {
        Err(Error::domain(format!("{what} = {x} is outside [0, 1]")))
    }
}

/// Per-player 2x2 matrices of unit-gain probabilities.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StochasticBimatrix {
    d: [[[f64; 2]; 2]; 2],
}

impl StochasticBimatrix {
    pub fn new(d1: [[f64; 2]; 2], d2: [[f64; 2]; 2]) -> Result<Self> {
        for (k, m) in [d1, d2].iter().enumerate() {
            for (i, row) in m.iter().enumerate() {
                for (j, &x) in row.iter().enumerate() {
                    check_probability(x, &format!("d[{}][{}][{}]", k + 1, i + 1, j + 1))?;
                }
            }
        }
        Ok(Self { d: [d1, d2] })
    }

    /// Builds from `(d1, d2)` cell pairs laid out as `cells[i][j]`.
    pub fn from_cells(cells: [[(f64, f64); 2]; 2]) -> Result<Self> {
        let pick = |f: fn((f64, f64)) -> f64| {
            [
                [f(cells[0][0]), f(cells[0][1])],
                [f(cells[1][0]), f(cells[1][1])],
            ]
        };
        Self::new(pick(|c| c.0), pick(|c| c.1))
    }

    pub fn matrix(&self, agent: Agent) -> [[f64; 2]; 2] {
        self.d[agent.index()]
    }

    pub fn prob(&self, agent: Agent, i: Strategy, j: Strategy) -> f64 {
        self.d[agent.index()][i.index()][j.index()]
    }

    /// Expected difference of gain and loss, `2d - 1`, in `[-1, 1]`.
    pub fn scaled_payoff(&self, agent: Agent, i: Strategy, j: Strategy) -> f64 {
        2.0 * self.prob(agent, i, j) - 1.0
    }

    /// `x·D^k·yᵀ` where `x`, `y` are the probabilities of action 1 for the row
    /// and column player. No validation.
    pub(crate) fn value(&self, agent: Agent, x: f64, y: f64) -> f64 {
        let m = &self.d[agent.index()];
        let xb = 1.0 - x;
        let yb = 1.0 - y;
        x * (y * m[0][0] + yb * m[0][1]) + xb * (y * m[1][0] + yb * m[1][1])
    }

    fn map2(&self, other: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        let mut d = self.d;
        for (k, m) in d.iter_mut().enumerate() {
            for (i, row) in m.iter_mut().enumerate() {
                for (j, x) in row.iter_mut().enumerate() {
                    *x = f(self.d[k][i][j], other.d[k][i][j]);
                }
            }
        }
        Self { d }
    }
}

/// Two-level game: the coalition game `A` is played only when both agents
/// prefer it, otherwise the default game `B`.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiLevelGame {
    pub coalition: StochasticBimatrix,
    pub default: StochasticBimatrix,
    pub id: Option<u32>,
}

impl MultiLevelGame {
    pub fn new(coalition: StochasticBimatrix, default: StochasticBimatrix) -> Self {
        Self {
            coalition,
            default,
            id: None,
        }
    }

    /// Parses the plain-text matrix format.
    ///
    /// Eight data lines `i j d1 d2`: the first four give the cells of the
    /// coalition game, the next four the cells of the default game. Each
    /// block must list every `(i, j)` in `{1,2}²` exactly once. Blank lines
    /// and text after `#` are ignored.
    pub fn parse(text: &str) -> Result<Self> {
        let mut cells = [[[None::<(f64, f64)>; 2]; 2]; 2];
        let mut count = 0usize;
        let mut last_line = 0usize;
        for (n, raw) in text.lines().enumerate() {
            let line_no = n + 1;
            last_line = line_no;
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            if count == 8 {
                return Err(Error::parse(line_no, "more than eight data lines"));
            }
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 4 {
                return Err(Error::parse(
                    line_no,
                    format!("expected `i j d1 d2`, found {} fields", fields.len()),
                ));
            }
            let index = |s: &str| -> Result<usize> {
                match s {
                    "1" => Ok(0),
                    "2" => Ok(1),
                    _ => Err(Error::parse(line_no, format!("action index `{s}` must be 1 or 2"))),
                }
            };
            let prob = |s: &str| -> Result<f64> {
                let x: f64 = s
                    .parse()
                    .map_err(|_| Error::parse(line_no, format!("`{s}` is not a number")))?;
                if (0.0..=1.0).contains(&x) {
                    Ok(x)
                } else {
                    Err(Error::parse(line_no, format!("probability {s} is outside [0, 1]")))
                }
            };
            let (i, j) = (index(fields[0])?, index(fields[1])?);
            let block = count / 4;
            let slot = &mut cells[block][i][j];
            if slot.is_some() {
                return Err(Error::parse(
                    line_no,
                    format!("cell ({}, {}) repeated", i + 1, j + 1),
                ));
            }
            *slot = Some((prob(fields[2])?, prob(fields[3])?));
            count += 1;
        }
        if count != 8 {
            return Err(Error::parse(
                last_line,
                format!("expected eight data lines, found {count}"),
            ));
        }
        let block = |b: usize| {
            let c = |i: usize, j: usize| cells[b][i][j].expect("all cells present");
            StochasticBimatrix::from_cells([[c(0, 0), c(0, 1)], [c(1, 0), c(1, 1)]])
        };
        Ok(Self::new(block(0)?, block(1)?))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    /// Serializes in the format accepted by [`MultiLevelGame::parse`].
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (name, m) in [("coalition game", &self.coalition), ("default game", &self.default)] {
            out.push_str(&format!("# {name}\n"));
            for i in Strategy::BOTH {
                for j in Strategy::BOTH {
                    out.push_str(&format!(
                        "{} {} {} {}\n",
                        i.index() + 1,
                        j.index() + 1,
                        m.prob(Agent::One, i, j),
                        m.prob(Agent::Two, i, j)
                    ));
                }
            }
        }
        out
    }

    /// The average game `c·A + (1 - c)·B`.
    pub fn average_game(&self, c: f64) -> Result<StochasticBimatrix> {
        check_probability(c, "clustering parameter")?;
        Ok(self.average_unchecked(c))
    }

    pub(crate) fn average_unchecked(&self, c: f64) -> StochasticBimatrix {
        self.coalition.map2(&self.default, |a, b| c * a + (1.0 - c) * b)
    }

    /// Value `x·D^k(c)·yᵀ` of the average game without building it.
    pub(crate) fn average_value(&self, agent: Agent, c: f64, x: f64, y: f64) -> f64 {
        c * self.coalition.value(agent, x, y) + (1.0 - c) * self.default.value(agent, x, y)
    }
}

impl fmt::Display for MultiLevelGame {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.id {
            Some(id) => write!(f, "game {id}"),
            None => write!(f, "custom game"),
        }
    }
}

/// Strategy probabilities `(p1, p2, p3, p4)`: action-1 probabilities of the
/// two action automata followed by the coalition-preference probabilities of
/// the two group automata.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StateVector(pub(crate) [f64; 4]);

impl StateVector {
    pub fn new(p1: f64, p2: f64, p3: f64, p4: f64) -> Result<Self> {
        Self::from_array([p1, p2, p3, p4])
    }

    pub fn from_array(p: [f64; 4]) -> Result<Self> {
        for (k, &x) in p.iter().enumerate() {
            check_probability(x, &format!("p{}", k + 1))?;
        }
        Ok(Self(p))
    }

    /// Projects each component onto `[0, 1]`; NaN maps to 0.
    pub fn clamped(p: [f64; 4]) -> Self {
        Self(p.map(|x| if x.is_nan() { 0.0 } else { x.clamp(0.0, 1.0) }))
    }

    pub fn uniform() -> Self {
        Self([0.5; 4])
    }

    pub fn as_array(&self) -> [f64; 4] {
        self.0
    }

    pub fn get(&self, k: Automaton) -> f64 {
        self.0[k.index()]
    }

    pub fn with(mut self, k: Automaton, x: f64) -> Self {
        self.0[k.index()] = x;
        self
    }

    /// Probability that a coalition forms, `p3·p4`.
    pub fn clustering(&self) -> f64 {
        self.0[2] * self.0[3]
    }

    pub fn max_abs_diff(&self, other: &StateVector) -> f64 {
        self.0
            .iter()
            .zip(other.0.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl Default for StateVector {
    fn default() -> Self {
        Self::uniform()
    }
}

fn check_distribution(v: [f64; 2], what: &str) -> Result<()> {
    if v.iter().any(|x| !(*x >= 0.0)) || (v[0] + v[1] - 1.0).abs() > 1e-12 {
        return Err(Error::domain(format!(
            "{what} = ({}, {}) is not a probability distribution",
            v[0], v[1]
        )));
    }
    Ok(())
}

/// Expected payoff `p1vec·D^k·p2vecᵀ` of player `agent`.
pub fn expected_payoff(
    d: &StochasticBimatrix,
    p1vec: [f64; 2],
    p2vec: [f64; 2],
    agent: Agent,
) -> Result<f64> {
    check_distribution(p1vec, "row distribution")?;
    check_distribution(p2vec, "column distribution")?;
    let m = d.matrix(agent);
    let mut v = 0.0;
    for i in 0..2 {
        for j in 0..2 {
            v += p1vec[i] * m[i][j] * p2vec[j];
        }
    }
    Ok(v)
}

/// Probability that automaton `k` is rewarded for playing pure strategy `i`
/// when everybody else plays the mixed strategies in `p`.
///
/// Component `k` of `p` is replaced by the pure choice, the clustering
/// parameter is recomputed from the result and the owning agent's payoff is
/// evaluated on the induced average game.
pub fn reward_probability(p: &StateVector, game: &MultiLevelGame, k: Automaton, i: Strategy) -> f64 {
    let q = p.with(k, i.as_probability());
    game.average_value(k.agent(), q.clustering(), q.0[0], q.0[1])
}

/// The example games 1, 2 and 3.
pub fn builtin_game(id: u32) -> Result<MultiLevelGame> {
    let bm = |cells| StochasticBimatrix::from_cells(cells).expect("builtin entries are probabilities");
    let game2_default = bm([[(0.4, 0.6), (0.8, 0.2)], [(0.65, 0.35), (0.1, 0.9)]]);
    let (coalition, default) = match id {
        1 => (
            bm([[(1.0, 1.0), (0.0, 0.0)], [(0.0, 0.0), (0.0, 0.0)]]),
            bm([[(0.0, 0.0), (0.0, 0.0)], [(0.0, 0.0), (1.0, 1.0)]]),
        ),
        2 => (
            bm([[(0.6, 0.4), (0.2, 0.8)], [(0.35, 0.65), (0.9, 0.1)]]),
            game2_default,
        ),
        3 => (
            bm([[(0.75, 1.0), (0.5, 0.25)], [(1.0, 0.5), (0.25, 0.75)]]),
            game2_default,
        ),
        other => return Err(Error::UnknownGame(other)),
    };
    Ok(MultiLevelGame {
        coalition,
        default,
        id: Some(id),
    })
}
