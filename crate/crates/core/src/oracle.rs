//! Exhaustive finite-horizon solver for the extended (attention-augmented)
//! world, with exact integer values, plus the mechanical check that states
//! sharing an observation share optimal action values.

use crate::attention::{cell_of, descend, observe, GridMask, ObsKey, Octant, SensorMode};
use crate::grid::{init_episode, transition, ExtendedGroundState, GridConfig, GroundState};
use rand_chacha::{rand_core::SeedableRng, ChaCha12Rng};
use std::collections::HashMap;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum OracleError {
    #[error(
        "{found} extended states exceed the {limit} cap; shrink the instance \
         (guideline: m <= 4, n <= 2) or restrict the initial states"
    )]
    TooManyStates { found: usize, limit: usize },
    #[error("initial-state list is empty")]
    NoInitialStates,
}

/// Which starting scenes seed the reachability sweep.
#[derive(Debug, Clone)]
pub enum InitialStates {
    /// Every placement of n pegs and n disks on 2n distinct cells.
    AllPlacements,
    /// A fixed number of seeded random placements.
    Seeded { count: usize, seed: u64 },
    /// Caller-provided scenes (clocks reset to stage 1).
    Explicit(Vec<GroundState>),
}

#[derive(Debug, Clone)]
pub struct OracleOptions {
    pub initial: InitialStates,
    /// Cap on enumerated extended states.
    pub max_states: usize,
}

impl Default for OracleOptions {
    fn default() -> Self {
        OracleOptions { initial: InitialStates::AllPlacements, max_states: 2_000_000 }
    }
}

/// Exact optimal action values over every extended state reachable from the
/// chosen initial scenes. Rewards are integers and the horizon is finite and
/// undiscounted, so values are exact integers and comparisons are equalities.
pub struct ExactQ {
    cfg: GridConfig,
    states: Vec<ExtendedGroundState>,
    index: HashMap<ExtendedGroundState, usize>,
    q: Vec<[i64; 8]>,
    v: Vec<i64>,
    /// Distinct terminal scenes reached (kept for reachability counting).
    terminal_bases: Vec<GroundState>,
}

fn initial_bases(
    cfg: &GridConfig,
    initial: &InitialStates,
    cap: usize,
) -> Result<Vec<GroundState>, OracleError> {
    use crate::grid::{Loc, PegPos};
    let bases = match initial {
        InitialStates::AllPlacements => {
            let cells: Vec<Loc> = (0..cfg.cells()).map(|i| Loc::from_index(i, cfg.m)).collect();
            let mut out = Vec::new();
            let peg_sets = combinations(&cells, cfg.n);
            for pegs in &peg_sets {
                let rest: Vec<Loc> =
                    cells.iter().copied().filter(|c| !pegs.contains(c)).collect();
                for disks in combinations(&rest, cfg.n) {
                    if out.len() >= cap {
                        return Err(OracleError::TooManyStates { found: out.len() + 1, limit: cap });
                    }
                    out.push(GroundState::new(
                        pegs.iter().map(|l| PegPos::At(*l)).collect(),
                        disks,
                        1,
                    ));
                }
            }
            out
        }
        InitialStates::Seeded { count, seed } => {
            let mut rng = ChaCha12Rng::seed_from_u64(*seed);
            let mut seen = std::collections::HashSet::new();
            let mut out = Vec::with_capacity(*count);
            for _ in 0..*count {
                let s = init_episode(cfg, &mut rng).expect("config was validated");
                if seen.insert(s.clone()) {
                    out.push(s);
                }
            }
            out
        }
        InitialStates::Explicit(list) => {
            let mut out = list.clone();
            for s in &mut out {
                s.t = 1;
                s.terminal = false;
            }
            out
        }
    };
    if bases.is_empty() {
        return Err(OracleError::NoInitialStates);
    }
    Ok(bases)
}

fn combinations<T: Copy>(items: &[T], k: usize) -> Vec<Vec<T>> {
    let mut out = Vec::new();
    let mut pick = Vec::with_capacity(k);
    fn rec<T: Copy>(items: &[T], k: usize, start: usize, pick: &mut Vec<T>, out: &mut Vec<Vec<T>>) {
        if pick.len() == k {
            out.push(pick.clone());
            return;
        }
        for i in start..items.len() {
            pick.push(items[i]);
            rec(items, k, i + 1, pick, out);
            pick.pop();
        }
    }
    rec(items, k, 0, &mut pick, &mut out);
    out
}

/// Enumerates every acting extended state reachable from the initial scenes
/// and solves for exact optimal values by sweeping stages and levels in
/// reverse.
pub fn solve_exact(cfg: &GridConfig, opts: &OracleOptions) -> Result<ExactQ, OracleError> {
    let levels = cfg.levels();
    let mut states: Vec<ExtendedGroundState> = Vec::new();
    let mut index: HashMap<ExtendedGroundState, usize> = HashMap::new();
    let mut terminal_bases: HashMap<GroundState, ()> = HashMap::new();

    for base in initial_bases(cfg, &opts.initial, opts.max_states)? {
        let s = ExtendedGroundState::initial(cfg, base);
        if !index.contains_key(&s) {
            index.insert(s.clone(), states.len());
            states.push(s);
        }
    }

    // Forward reachability.
    let mut cursor = 0usize;
    while cursor < states.len() {
        if states.len() > opts.max_states {
            return Err(OracleError::TooManyStates { found: states.len(), limit: opts.max_states });
        }
        let s = states[cursor].clone();
        cursor += 1;
        for oct in Octant::all() {
            if s.level < levels {
                let next = descend(&s, oct).expect("below final level");
                if !index.contains_key(&next) {
                    index.insert(next.clone(), states.len());
                    states.push(next);
                }
            } else {
                let cell = cell_of(&s.focus, oct);
                let (next_base, _r) = transition(cfg, &s.base, cell).expect("acting state");
                if next_base.terminal {
                    terminal_bases.entry(next_base).or_insert(());
                } else {
                    let next = ExtendedGroundState::initial(cfg, next_base);
                    if !index.contains_key(&next) {
                        index.insert(next.clone(), states.len());
                        states.push(next);
                    }
                }
            }
        }
    }

    // Backward value sweep: later stages first, deeper levels first within a
    // stage, so every successor is already solved.
    let mut order: Vec<usize> = (0..states.len()).collect();
    order.sort_unstable_by_key(|&i| {
        let s = &states[i];
        (std::cmp::Reverse(s.base.t), std::cmp::Reverse(s.level))
    });

    let mut q = vec![[0i64; 8]; states.len()];
    let mut v = vec![0i64; states.len()];
    for &i in &order {
        let s = states[i].clone();
        let mut best = i64::MIN;
        for oct in Octant::all() {
            let value = if s.level < levels {
                let next = descend(&s, oct).expect("below final level");
                v[index[&next]]
            } else {
                let cell = cell_of(&s.focus, oct);
                let (next_base, r) = transition(cfg, &s.base, cell).expect("acting state");
                debug_assert_eq!(r.fract(), 0.0);
                let future = if next_base.terminal {
                    0
                } else {
                    v[index[&ExtendedGroundState::initial(cfg, next_base)]]
                };
                r as i64 + future
            };
            q[i][oct.index() as usize - 1] = value;
            best = best.max(value);
        }
        v[i] = best;
    }

    Ok(ExactQ {
        cfg: *cfg,
        states,
        index,
        q,
        v,
        terminal_bases: terminal_bases.into_keys().collect(),
    })
}

impl ExactQ {
    pub fn cfg(&self) -> &GridConfig {
        &self.cfg
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[ExtendedGroundState] {
        &self.states
    }

    pub fn terminal_bases(&self) -> &[GroundState] {
        &self.terminal_bases
    }

    pub fn q_row(&self, idx: usize) -> &[i64; 8] {
        &self.q[idx]
    }

    pub fn q(&self, s: &ExtendedGroundState, a: Octant) -> Option<i64> {
        self.index.get(s).map(|&i| self.q[i][a.index() as usize - 1])
    }

    pub fn v(&self, s: &ExtendedGroundState) -> Option<i64> {
        self.index.get(s).map(|&i| self.v[i])
    }

    /// Plays the greedy policy from a starting scene and returns the episode
    /// return. Ties resolve to the lowest octant index.
    pub fn greedy_rollout(&self, base: GroundState) -> f64 {
        let mut ext = ExtendedGroundState::initial(&self.cfg, base);
        let levels = self.cfg.levels();
        let mut total = 0.0;
        while !ext.base.terminal {
            let row = &self.q[self.index[&ext]];
            let best = *row.iter().max().expect("eight actions");
            let oct = Octant::all()[row.iter().position(|&v| v == best).expect("max exists")];
            if ext.level < levels {
                ext = descend(&ext, oct).expect("below final level");
            } else {
                let cell = cell_of(&ext.focus, oct);
                let (next, r) = transition(&self.cfg, &ext.base, cell).expect("acting state");
                total += r;
                ext = ExtendedGroundState::initial(&self.cfg, next);
            }
        }
        total
    }
}

/// Two states that share an observation but disagree on some action value.
#[derive(Debug, Clone)]
pub struct Witness {
    pub obs: ObsKey,
    pub action: Octant,
    pub q_first: i64,
    pub q_second: i64,
    pub first: ExtendedGroundState,
    pub second: ExtendedGroundState,
}

/// Outcome of grouping optimal values by observation key.
#[derive(Debug)]
pub struct IrrelevanceReport {
    pub mode: SensorMode,
    pub mask: GridMask,
    pub states_checked: usize,
    pub groups: usize,
    /// Largest |Q(s1,a) - Q(s2,a)| within any group; zero means the
    /// abstraction preserved optimal values exactly.
    pub max_discrepancy: i64,
    pub witnesses: Vec<Witness>,
}

const WITNESS_CAP: usize = 16;

/// Groups every enumerated state by its observation key and compares exact
/// action values within each group, pairwise against the group's first
/// member. Equality everywhere is the executable form of value-preserving
/// abstraction; any witness demonstrates information loss.
pub fn check_irrelevance_on(q: &ExactQ, mode: SensorMode, mask: GridMask) -> IrrelevanceReport {
    let mut groups: HashMap<ObsKey, usize> = HashMap::new();
    let mut report = IrrelevanceReport {
        mode,
        mask,
        states_checked: q.len(),
        groups: 0,
        max_discrepancy: 0,
        witnesses: Vec::new(),
    };
    for (i, s) in q.states().iter().enumerate() {
        let key = observe(s, mode, mask).key();
        match groups.entry(key) {
            std::collections::hash_map::Entry::Vacant(e) => {
                e.insert(i);
            }
            std::collections::hash_map::Entry::Occupied(e) => {
                let first = *e.get();
                for oct in Octant::all() {
                    let qa = q.q_row(first)[oct.index() as usize - 1];
                    let qb = q.q_row(i)[oct.index() as usize - 1];
                    if qa != qb {
                        report.max_discrepancy = report.max_discrepancy.max((qa - qb).abs());
                        if report.witnesses.len() < WITNESS_CAP {
                            report.witnesses.push(Witness {
                                obs: key,
                                action: oct,
                                q_first: qa,
                                q_second: qb,
                                first: q.states()[first].clone(),
                                second: s.clone(),
                            });
                        }
                    }
                }
            }
        }
    }
    report.groups = groups.len();
    report
}

/// Solve-then-check convenience over one configuration.
pub fn check_q_star_irrelevance(
    cfg: &GridConfig,
    opts: &OracleOptions,
    mode: SensorMode,
    mask: GridMask,
) -> Result<IrrelevanceReport, OracleError> {
    let q = solve_exact(cfg, opts)?;
    Ok(check_irrelevance_on(&q, mode, mask))
}

/// Reachability tallies: distinct scenes, distinct extended states, and
/// distinct observation keys, split into acting (clock still running) and
/// totals that include terminal scenes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ReachReport {
    pub ground_acting: u64,
    pub ground_total: u64,
    pub extended_acting: u64,
    pub extended_total: u64,
    pub obs_keys_acting: u64,
    pub obs_keys_total: u64,
}

/// Counts what forward reachability visits, observing with the given sensor
/// mode and mask.
pub fn count_reachable(
    cfg: &GridConfig,
    opts: &OracleOptions,
    mode: SensorMode,
    mask: GridMask,
) -> Result<ReachReport, OracleError> {
    let q = solve_exact(cfg, opts)?;
    let mut bases: HashMap<&GroundState, ()> = HashMap::new();
    let mut obs_keys: HashMap<ObsKey, ()> = HashMap::new();
    for s in q.states() {
        bases.entry(&s.base).or_insert(());
        obs_keys.entry(observe(s, mode, mask).key()).or_insert(());
    }
    let ground_acting = bases.len() as u64;
    let extended_acting = q.len() as u64;
    let obs_keys_acting = obs_keys.len() as u64;
    for base in q.terminal_bases() {
        let ext = ExtendedGroundState::initial(cfg, base.clone());
        obs_keys.entry(observe(&ext, mode, mask).key()).or_insert(());
    }
    Ok(ReachReport {
        ground_acting,
        ground_total: ground_acting + q.terminal_bases().len() as u64,
        extended_acting,
        // Terminal scenes wrap into exactly one extended state each.
        extended_total: extended_acting + q.terminal_bases().len() as u64,
        obs_keys_acting,
        obs_keys_total: obs_keys.len() as u64,
    })
}
