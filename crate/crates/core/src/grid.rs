//! The tabular pegs-on-disks world: an `m`-per-side 3D grid holding `n` pegs
//! and `n` disks, a gripper that grasps and places pegs, and a fixed horizon
//! of `t_max` overt stages. Placing a peg on a free disk earns +1, removing a
//! placed peg costs -1.

use num_bigint::BigUint;
use num_integer::binomial;
use rand::Rng;
use rand_chacha::{rand_core::SeedableRng, ChaCha12Rng};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GridError {
    #[error("grid side m = {0} must be a power of two, at least 2")]
    BadSide(u32),
    #[error("need at least one peg")]
    NoPegs,
    #[error("horizon t_max = {0} must be at least 1")]
    BadHorizon(u32),
    #[error("cannot place {objects} objects on {cells} distinct cells")]
    PlacementInfeasible { objects: u64, cells: u64 },
    #[error("location ({x}, {y}, {z}) outside the 1..={m} grid")]
    OutOfBounds { x: u32, y: u32, z: u32, m: u32 },
    #[error("transition applied to a terminal state")]
    TerminalState,
}

/// Static parameters of a pegs-on-disks instance.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridConfig {
    /// Grid side length in cells; a power of two, at least 2.
    pub m: u32,
    /// Number of pegs, which equals the number of disks.
    pub n: usize,
    /// Number of overt stages per episode.
    pub t_max: u32,
}

impl GridConfig {
    pub fn new(m: u32, n: usize, t_max: u32) -> Result<Self, GridError> {
        if m < 2 || !m.is_power_of_two() {
            return Err(GridError::BadSide(m));
        }
        if n == 0 {
            return Err(GridError::NoPegs);
        }
        if t_max == 0 {
            return Err(GridError::BadHorizon(t_max));
        }
        let cfg = GridConfig { m, n, t_max };
        if 2 * n as u64 > cfg.cells() {
            return Err(GridError::PlacementInfeasible {
                objects: 2 * n as u64,
                cells: cfg.cells(),
            });
        }
        Ok(cfg)
    }

    /// Config with the default horizon `t_max = 2n`: enough stages to grasp
    /// and place every peg once.
    pub fn with_default_horizon(m: u32, n: usize) -> Result<Self, GridError> {
        Self::new(m, n, 2 * n as u32)
    }

    pub fn cells(&self) -> u64 {
        (self.m as u64).pow(3)
    }

    /// Attention levels needed to resolve a single cell: log2(m).
    pub fn levels(&self) -> u32 {
        self.m.trailing_zeros()
    }
}

/// A 1-indexed cell of the grid; each coordinate lies in 1..=m.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Loc {
    pub x: u32,
    pub y: u32,
    pub z: u32,
}

impl Loc {
    pub fn new(x: u32, y: u32, z: u32) -> Self {
        Loc { x, y, z }
    }

    pub fn in_grid(&self, m: u32) -> bool {
        let ok = |v: u32| (1..=m).contains(&v);
        ok(self.x) && ok(self.y) && ok(self.z)
    }

    /// Row-major cell index in 0..m^3.
    pub fn index(&self, m: u32) -> u64 {
        let m = m as u64;
        (self.x as u64 - 1) + m * (self.y as u64 - 1) + m * m * (self.z as u64 - 1)
    }

    pub fn from_index(idx: u64, m: u32) -> Self {
        let m64 = m as u64;
        Loc {
            x: (idx % m64) as u32 + 1,
            y: ((idx / m64) % m64) as u32 + 1,
            z: (idx / (m64 * m64)) as u32 + 1,
        }
    }
}

/// Where one peg is: on a grid cell or held by the gripper.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum PegPos {
    InHand,
    At(Loc),
}

/// Full world state: peg positions (possibly one in hand), disk positions,
/// the overt-stage clock, and the terminal flag. Pegs and disks are sets;
/// the representation keeps them sorted so equal states compare equal.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct GroundState {
    pegs: Vec<PegPos>,
    disks: Vec<Loc>,
    pub t: u32,
    pub terminal: bool,
}

impl GroundState {
    /// Builds a state from raw peg/disk sets, normalizing order and checking
    /// the set invariants: distinct peg positions, distinct disk positions,
    /// at most one peg in hand.
    pub fn new(pegs: Vec<PegPos>, disks: Vec<Loc>, t: u32) -> Self {
        let mut s = GroundState { pegs, disks, t, terminal: false };
        s.normalize();
        debug_assert!(s.pegs.windows(2).all(|w| w[0] != w[1]), "pegs must be distinct");
        debug_assert!(s.disks.windows(2).all(|w| w[0] != w[1]), "disks must be distinct");
        s
    }

    fn normalize(&mut self) {
        self.pegs.sort_unstable();
        self.disks.sort_unstable();
    }

    pub fn pegs(&self) -> &[PegPos] {
        &self.pegs
    }

    pub fn disks(&self) -> &[Loc] {
        &self.disks
    }

    pub fn holding(&self) -> bool {
        self.pegs.iter().any(|p| *p == PegPos::InHand)
    }

    pub fn peg_at(&self, loc: Loc) -> bool {
        self.pegs.iter().any(|p| *p == PegPos::At(loc))
    }

    pub fn disk_at(&self, loc: Loc) -> bool {
        self.disks.binary_search(&loc).is_ok()
    }

    /// A peg is placed when it sits on a disk's cell.
    pub fn placed(&self, loc: Loc) -> bool {
        self.peg_at(loc) && self.disk_at(loc)
    }

    pub fn placed_count(&self) -> usize {
        self.pegs
            .iter()
            .filter(|p| matches!(p, PegPos::At(l) if self.disk_at(*l)))
            .count()
    }
}

/// Samples an initial state: 2n distinct cells chosen uniformly, the first n
/// holding pegs and the rest disks. No peg starts placed and the hand is
/// empty; the clock starts at stage 1.
pub fn init_episode<R: Rng + ?Sized>(cfg: &GridConfig, rng: &mut R) -> Result<GroundState, GridError> {
    let cells = cfg.cells();
    let want = 2 * cfg.n;
    if want as u64 > cells {
        return Err(GridError::PlacementInfeasible { objects: want as u64, cells });
    }
    let picks = rand::seq::index::sample(rng, cells as usize, want);
    let pegs = (0..cfg.n)
        .map(|i| PegPos::At(Loc::from_index(picks.index(i) as u64, cfg.m)))
        .collect();
    let disks = (cfg.n..want)
        .map(|i| Loc::from_index(picks.index(i) as u64, cfg.m))
        .collect();
    Ok(GroundState::new(pegs, disks, 1))
}

/// Seeded convenience wrapper around [`init_episode`].
pub fn init_episode_seeded(cfg: &GridConfig, seed: u64) -> Result<GroundState, GridError> {
    init_episode(cfg, &mut ChaCha12Rng::seed_from_u64(seed))
}

/// One overt action: move the gripper to `a` and open or close it.
///
/// Empty hand: a peg at `a` is grasped (reward -1 if it was placed, else 0).
/// Holding: the peg is set down at `a` unless another peg occupies it
/// (reward +1 when set down on a disk, which is necessarily free). In every
/// other case only the clock advances. The state turns terminal once the
/// clock passes `t_max`.
pub fn transition(cfg: &GridConfig, s: &GroundState, a: Loc) -> Result<(GroundState, f64), GridError> {
    if s.terminal {
        return Err(GridError::TerminalState);
    }
    if !a.in_grid(cfg.m) {
        return Err(GridError::OutOfBounds { x: a.x, y: a.y, z: a.z, m: cfg.m });
    }
    let mut next = s.clone();
    let mut reward = 0.0;
    if let Some(held) = next.pegs.iter().position(|p| *p == PegPos::InHand) {
        if !s.peg_at(a) {
            next.pegs[held] = PegPos::At(a);
            if s.disk_at(a) {
                reward = 1.0;
            }
        }
    } else if let Some(idx) = next.pegs.iter().position(|p| *p == PegPos::At(a)) {
        next.pegs[idx] = PegPos::InHand;
        if s.disk_at(a) {
            reward = -1.0;
        }
    }
    next.normalize();
    next.t = s.t + 1;
    next.terminal = next.t > cfg.t_max;
    Ok((next, reward))
}

/// Counts all (pegs, disks, clock) combinations of the world:
/// C(m^3 + 1, n) * C(m^3, n) * t_max, exactly. Free-standing so degenerate
/// inputs (n = 0) stay expressible.
pub fn count_ground_states(m: u64, n: u64, t_max: u64) -> BigUint {
    let cells = BigUint::from(m.pow(3));
    let peg_positions = binomial(&cells + 1u32, BigUint::from(n));
    let disk_positions = binomial(cells, BigUint::from(n));
    peg_positions * disk_positions * t_max
}

impl GridConfig {
    pub fn count_ground_states(&self) -> BigUint {
        count_ground_states(self.m as u64, self.n as u64, self.t_max as u64)
    }
}

/// Best achievable episode return: every peg placed exactly once, nothing
/// negative along the way. Needs `t_max >= 2n` so each grasp-place pair fits.
pub fn optimal_return(cfg: &GridConfig) -> f64 {
    debug_assert!(cfg.t_max >= 2 * cfg.n as u32);
    cfg.n as f64
}

/// The cube of cells currently attended: its low corner and side length.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Focus {
    pub origin: Loc,
    pub side: u32,
}

impl Focus {
    pub fn whole_grid(m: u32) -> Self {
        Focus { origin: Loc::new(1, 1, 1), side: m }
    }

    pub fn contains(&self, loc: Loc) -> bool {
        let inside = |lo: u32, v: u32| v >= lo && v < lo + self.side;
        inside(self.origin.x, loc.x) && inside(self.origin.y, loc.y) && inside(self.origin.z, loc.z)
    }
}

/// Ground state augmented with the attention position (level and focus cube),
/// which makes the level-by-level selection process Markov.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ExtendedGroundState {
    pub base: GroundState,
    /// Attention level in 1..=log2(m); the focus side is m / 2^(level-1).
    pub level: u32,
    pub focus: Focus,
}

impl ExtendedGroundState {
    /// Wraps a base state at level 1 with the whole grid in focus.
    pub fn initial(cfg: &GridConfig, base: GroundState) -> Self {
        ExtendedGroundState { base, level: 1, focus: Focus::whole_grid(cfg.m) }
    }
}
