//! The sense layer over the grid: each observation summarizes the focus cube
//! as 8 octant-occupancy grids, descending into an octant halves the cube,
//! and a full descent path resolves to one cell. Also the standard,
//! lookahead, and deictic encodings of the per-level choice.

use crate::grid::{ExtendedGroundState, Focus, GroundState, Loc};
use num_bigint::BigUint;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AttentionError {
    #[error("octant index {0} outside 1..=8")]
    BadOctant(u8),
    #[error("cannot descend below the final level (focus already {side} cells per side)", side = 2)]
    DescendAtFinalLevel,
    #[error("path has {got} octants but a {m}-cell side needs {expected}")]
    WrongPathLength { got: usize, expected: u32, m: u32 },
}

/// One of the 8 sub-cubes of the focus, indexed 1..=8. Index bits select the
/// high half along x, y, z respectively: index = 1 + hx + 2*hy + 4*hz.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Octant(u8);

impl Octant {
    pub fn new(index: u8) -> Result<Self, AttentionError> {
        if (1..=8).contains(&index) {
            Ok(Octant(index))
        } else {
            Err(AttentionError::BadOctant(index))
        }
    }

    pub fn index(&self) -> u8 {
        self.0
    }

    pub fn all() -> [Octant; 8] {
        [1, 2, 3, 4, 5, 6, 7, 8].map(Octant)
    }

    pub fn from_high_bits(hx: bool, hy: bool, hz: bool) -> Self {
        Octant(1 + hx as u8 + 2 * (hy as u8) + 4 * (hz as u8))
    }

    fn high_bits(&self) -> (bool, bool, bool) {
        let b = self.0 - 1;
        (b & 1 != 0, b & 2 != 0, b & 4 != 0)
    }

    /// The octant of `loc` within `focus`; `loc` must lie inside.
    pub fn containing(focus: &Focus, loc: Loc) -> Self {
        debug_assert!(focus.contains(loc));
        let half = focus.side / 2;
        Octant::from_high_bits(
            loc.x >= focus.origin.x + half,
            loc.y >= focus.origin.y + half,
            loc.z >= focus.origin.z + half,
        )
    }

    /// The sub-cube this octant denotes within `focus`.
    pub fn sub_focus(&self, focus: &Focus) -> Focus {
        let half = focus.side / 2;
        let (hx, hy, hz) = self.high_bits();
        Focus {
            origin: Loc::new(
                focus.origin.x + if hx { half } else { 0 },
                focus.origin.y + if hy { half } else { 0 },
                focus.origin.z + if hz { half } else { 0 },
            ),
            side: half,
        }
    }
}

/// Which occupancy grids the sensor reports. The pair (pegs, disks) is the
/// working default; the full set adds placed pegs and empty space.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GridMask {
    pub pegs: bool,
    pub disks: bool,
    pub placed: bool,
    pub empty: bool,
}

impl GridMask {
    pub const TWO: GridMask = GridMask { pegs: true, disks: true, placed: false, empty: false };
    pub const FOUR: GridMask = GridMask { pegs: true, disks: true, placed: true, empty: true };

    fn bits(&self) -> u64 {
        self.pegs as u64 | (self.disks as u64) << 1 | (self.placed as u64) << 2 | (self.empty as u64) << 3
    }
}

/// Sensor condition: `Faulty` shows pegs and disks regardless of whether they
/// are placed or occupied, losing exactly that distinction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SensorMode {
    Normal,
    Faulty,
}

/// Packed observation identity used as a value-table key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ObsKey(pub u64);

/// Packed action identity used as a value-table key.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ActionKey(pub u64);

/// The octant-summary observation: level, clock, hand bit, and one 8-bit
/// occupancy vector per grid (bit k-1 set when octant k qualifies).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AbstractObs {
    pub level: u32,
    pub t: u32,
    pub hand: bool,
    /// Octants holding at least one unplaced peg (faulty: any peg).
    pub g_pegs: u8,
    /// Octants holding at least one free disk (faulty: any disk).
    pub g_disks: u8,
    /// Octants holding at least one placed peg.
    pub g_placed: u8,
    /// Octants with at least one cell holding neither peg nor disk.
    pub g_empty: u8,
    pub mask: GridMask,
}

impl AbstractObs {
    /// Key identity: grids outside the mask are erased so observations that
    /// differ only there collide.
    pub fn key(&self) -> ObsKey {
        let g = |on: bool, v: u8| if on { v as u64 } else { 0 };
        let grids = g(self.mask.pegs, self.g_pegs)
            | g(self.mask.disks, self.g_disks) << 8
            | g(self.mask.placed, self.g_placed) << 16
            | g(self.mask.empty, self.g_empty) << 24;
        ObsKey(
            grids
                | (self.hand as u64) << 32
                | (self.level as u64 & 0xff) << 33
                | (self.t as u64 & 0xffff) << 41
                | self.mask.bits() << 57,
        )
    }
}

/// Summarizes the focus cube of `s` into per-octant occupancy bits.
///
/// A held peg occupies no cell and so contributes to no grid. In faulty mode
/// the peg grid shows placed and unplaced pegs alike, and the disk grid shows
/// occupied and free disks alike.
pub fn observe(s: &ExtendedGroundState, mode: SensorMode, mask: GridMask) -> AbstractObs {
    let focus = &s.focus;
    let half = focus.side / 2;
    let octant_cells = (half as u64).pow(3);

    let mut g_pegs = 0u8;
    let mut g_disks = 0u8;
    let mut g_placed = 0u8;
    // Distinct occupied cells per octant, to detect empty space.
    let mut occupied: [Vec<Loc>; 8] = Default::default();

    let mark = |bits: &mut u8, oct: Octant| *bits |= 1 << (oct.index() - 1);

    for peg in s.base.pegs() {
        let crate::grid::PegPos::At(loc) = peg else { continue };
        if !focus.contains(*loc) {
            continue;
        }
        let oct = Octant::containing(focus, *loc);
        let placed = s.base.disk_at(*loc);
        match mode {
            SensorMode::Normal => {
                if placed {
                    mark(&mut g_placed, oct);
                } else {
                    mark(&mut g_pegs, oct);
                }
            }
            SensorMode::Faulty => {
                mark(&mut g_pegs, oct);
                if placed {
                    mark(&mut g_placed, oct);
                }
            }
        }
        occupied[oct.index() as usize - 1].push(*loc);
    }
    for disk in s.base.disks() {
        if !focus.contains(*disk) {
            continue;
        }
        let oct = Octant::containing(focus, *disk);
        let occupied_disk = s.base.peg_at(*disk);
        match mode {
            SensorMode::Normal => {
                if !occupied_disk {
                    mark(&mut g_disks, oct);
                }
            }
            SensorMode::Faulty => mark(&mut g_disks, oct),
        }
        occupied[oct.index() as usize - 1].push(*disk);
    }

    let mut g_empty = 0u8;
    for (i, cells) in occupied.iter_mut().enumerate() {
        cells.sort_unstable();
        cells.dedup();
        if (cells.len() as u64) < octant_cells {
            g_empty |= 1 << i;
        }
    }

    AbstractObs {
        level: s.level,
        t: s.base.t,
        hand: s.base.holding(),
        g_pegs,
        g_disks,
        g_placed,
        g_empty,
        mask,
    }
}

/// Narrows the focus to the chosen octant and advances one level. The final
/// level (a 2-cell-per-side focus) admits no further descent: its octants are
/// single cells that the overt action consumes instead.
pub fn descend(s: &ExtendedGroundState, a: Octant) -> Result<ExtendedGroundState, AttentionError> {
    if s.focus.side <= 2 {
        return Err(AttentionError::DescendAtFinalLevel);
    }
    Ok(ExtendedGroundState {
        base: s.base.clone(),
        level: s.level + 1,
        focus: a.sub_focus(&s.focus),
    })
}

/// The single cell named by an octant of a final-level (side 2) focus.
pub fn cell_of(focus: &Focus, a: Octant) -> Loc {
    debug_assert_eq!(focus.side, 2);
    a.sub_focus(focus).origin
}

/// Folds a complete octant path (one choice per level) down to its cell.
/// Paths are in bijection with cells of the grid.
pub fn resolve(path: &[Octant], m: u32) -> Result<Loc, AttentionError> {
    let expected = m.trailing_zeros();
    if path.len() != expected as usize || !m.is_power_of_two() || m < 2 {
        return Err(AttentionError::WrongPathLength { got: path.len(), expected, m });
    }
    let mut focus = Focus::whole_grid(m);
    for oct in path {
        focus = oct.sub_focus(&focus);
    }
    debug_assert_eq!(focus.side, 1);
    Ok(focus.origin)
}

/// The octant path that resolves to `loc` (greedy containment per level).
pub fn path_of_cell(loc: Loc, m: u32) -> Vec<Octant> {
    let mut focus = Focus::whole_grid(m);
    let mut path = Vec::with_capacity(m.trailing_zeros() as usize);
    while focus.side >= 2 {
        let oct = Octant::containing(&focus, loc);
        path.push(oct);
        focus = oct.sub_focus(&focus);
    }
    path
}

/// Contents class of a single cell: in normal mode exactly one of the four
/// bits is set (unplaced peg / free disk / placed peg / nothing).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CellSummary {
    pub peg: bool,
    pub disk: bool,
    pub placed: bool,
    pub empty: bool,
}

impl CellSummary {
    pub fn of(base: &GroundState, cell: Loc, mode: SensorMode) -> Self {
        let peg = base.peg_at(cell);
        let disk = base.disk_at(cell);
        match mode {
            SensorMode::Normal => CellSummary {
                peg: peg && !disk,
                disk: disk && !peg,
                placed: peg && disk,
                empty: !peg && !disk,
            },
            // The faulty sensor cannot tell placed from unplaced, so the raw
            // presence bits are reported and the placed bit stays dark.
            SensorMode::Faulty => {
                CellSummary { peg, disk, placed: false, empty: !peg && !disk }
            }
        }
    }

    fn bits(&self) -> u64 {
        self.peg as u64 | (self.disk as u64) << 1 | (self.placed as u64) << 2 | (self.empty as u64) << 3
    }
}

/// How a per-level choice is named for value lookup.
///
/// `Octant` carries the raw index (standard). `View` carries the observation
/// the sensor would produce after descending into the choice (lookahead at
/// non-final levels). `Cell` carries the contents class of the one cell the
/// choice denotes (lookahead at the final level, and the whole encoding for
/// the single-level deictic agent).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ActionDescriptor {
    Octant(Octant),
    View { g_pegs: u8, g_disks: u8, g_placed: u8, g_empty: u8, mask: GridMask },
    Cell(CellSummary),
}

impl ActionDescriptor {
    pub fn key(&self) -> ActionKey {
        match self {
            ActionDescriptor::Octant(o) => ActionKey(o.index() as u64),
            ActionDescriptor::View { g_pegs, g_disks, g_placed, g_empty, mask } => {
                let g = |on: bool, v: u8| if on { v as u64 } else { 0 };
                let grids = g(mask.pegs, *g_pegs)
                    | g(mask.disks, *g_disks) << 8
                    | g(mask.placed, *g_placed) << 16
                    | g(mask.empty, *g_empty) << 24;
                ActionKey(1 << 62 | mask.bits() << 40 | grids)
            }
            ActionDescriptor::Cell(c) => ActionKey(2 << 62 | c.bits()),
        }
    }
}

/// Standard encoding: the octant index passes through untouched.
pub fn standard_descriptor(a: Octant) -> ActionDescriptor {
    ActionDescriptor::Octant(a)
}

/// Lookahead encoding: the observation that descending into `a` would yield.
/// At the final level the choice denotes one cell, so the encoding collapses
/// to that cell's contents class.
pub fn lookahead_descriptor(
    s: &ExtendedGroundState,
    a: Octant,
    mode: SensorMode,
    mask: GridMask,
) -> ActionDescriptor {
    if s.focus.side > 2 {
        let below = descend(s, a).expect("side > 2 admits descent");
        let obs = observe(&below, mode, mask);
        ActionDescriptor::View {
            g_pegs: obs.g_pegs,
            g_disks: obs.g_disks,
            g_placed: obs.g_placed,
            g_empty: obs.g_empty,
            mask,
        }
    } else {
        ActionDescriptor::Cell(CellSummary::of(&s.base, cell_of(&s.focus, a), mode))
    }
}

/// Deictic encoding: one candidate per grid cell, named by its contents.
pub fn deictic_descriptor(base: &GroundState, cell: Loc, mode: SensorMode) -> ActionDescriptor {
    ActionDescriptor::Cell(CellSummary::of(base, cell, mode))
}

/// Upper bound on distinct observations: 2^33 * log2(m) * t_max
/// (hand bit and four 8-bit grids, times level and clock).
pub fn count_abstract_state_bound(m: u32, t_max: u32) -> BigUint {
    BigUint::from(2u64.pow(33)) * (m.trailing_zeros() as u64) * (t_max as u64)
}
