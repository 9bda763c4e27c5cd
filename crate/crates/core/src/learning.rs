//! Tabular value learning over the attention process: an optimistic value
//! table, epsilon-greedy selection with uniform tie-breaking, Sarsa /
//! Q-learning / stage-return update rules, and the episode loop that runs
//! the per-stage sense decisions followed by one overt action.

use crate::attention::{
    cell_of, deictic_descriptor, descend, lookahead_descriptor, observe, standard_descriptor,
    ActionKey, GridMask, ObsKey, Octant, SensorMode,
};
use crate::grid::{init_episode, transition, ExtendedGroundState, GridConfig, GridError, Loc};
use rand::Rng;
use std::collections::{HashMap, VecDeque};
use thiserror::Error;

/// The undiscounted setting used throughout: episodes are finite-horizon.
pub const GAMMA: f64 = 1.0;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LearningError {
    #[error("agent runs {agent} sense levels but a {m}-cell side needs {env}")]
    LevelMismatch { agent: u32, env: u32, m: u32 },
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Action-value store keyed by (observation, action). Unseen pairs read as
/// the optimistic default `q0`; entries exist only once written.
#[derive(Debug, Clone, Default)]
pub struct ValueTable {
    values: HashMap<(u64, u64), f64>,
    visits: HashMap<(u64, u64), u32>,
    pub q0: f64,
}

impl ValueTable {
    pub fn new(q0: f64) -> Self {
        ValueTable { values: HashMap::new(), visits: HashMap::new(), q0 }
    }

    pub fn get(&self, obs: ObsKey, action: ActionKey) -> f64 {
        self.values.get(&(obs.0, action.0)).copied().unwrap_or(self.q0)
    }

    pub fn set(&mut self, obs: ObsKey, action: ActionKey, value: f64) {
        self.values.insert((obs.0, action.0), value);
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn values(&self) -> impl Iterator<Item = ((ObsKey, ActionKey), f64)> + '_ {
        self.values.iter().map(|(&(o, a), &v)| ((ObsKey(o), ActionKey(a)), v))
    }

    fn visit(&mut self, obs: ObsKey, action: ActionKey) -> u32 {
        let n = self.visits.entry((obs.0, action.0)).or_insert(0);
        *n += 1;
        *n
    }
}

/// Temporal-difference target rule.
///
/// `StageReturn` regresses every decision of an overt stage onto the reward
/// observed at that stage's end, with no bootstrapping past it; `Sarsa` and
/// `QLearning` bootstrap through the next decision as usual.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum UpdateRule {
    Sarsa,
    QLearning,
    StageReturn,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StepSize {
    Constant(f64),
    /// 1 / N(obs, action): the decaying schedule that satisfies the usual
    /// convergence conditions.
    VisitCount,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum EpsilonSchedule {
    Constant(f64),
    /// epsilon = min(1, c / max(1, count)), nonincreasing in the experience
    /// count.
    InverseCount { c: f64 },
}

/// epsilon for a given cumulative experience count.
pub fn epsilon_value(schedule: &EpsilonSchedule, count: u64) -> f64 {
    match schedule {
        EpsilonSchedule::Constant(v) => *v,
        EpsilonSchedule::InverseCount { c } => (c / (count.max(1) as f64)).min(1.0),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReplayConfig {
    /// Episodes between replay sweeps.
    pub train_every: u64,
    /// Buffer cap; the oldest experiences are dropped first.
    pub max_experiences: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnerConfig {
    pub rule: UpdateRule,
    pub alpha: StepSize,
    pub epsilon: EpsilonSchedule,
    pub q0: f64,
    /// When set, updates happen in periodic sweeps over the stored buffer
    /// instead of online.
    pub replay: Option<ReplayConfig>,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig {
            rule: UpdateRule::StageReturn,
            alpha: StepSize::Constant(0.1),
            epsilon: EpsilonSchedule::Constant(0.0),
            q0: 1.0,
            replay: None,
        }
    }
}

/// One transition of the decision process, as stored for replay and logs.
///
/// `reward` is the immediate reward (zero at all but the last level of a
/// stage); `stage_reward` is the reward observed at the end of the overt
/// stage the decision belongs to, which is the `StageReturn` target.
#[derive(Debug, Clone, PartialEq)]
pub struct Experience {
    pub obs: ObsKey,
    pub action: ActionKey,
    pub reward: f64,
    pub stage_reward: f64,
    pub next: Option<NextStep>,
}

/// The successor decision point: what was observed, what was taken, and what
/// was available (for max-style targets).
#[derive(Debug, Clone, PartialEq)]
pub struct NextStep {
    pub obs: ObsKey,
    pub action: ActionKey,
    pub candidates: Vec<ActionKey>,
}

/// Q(o,a) += alpha * (target - Q(o,a)).
pub fn apply_target(table: &mut ValueTable, obs: ObsKey, action: ActionKey, target: f64, alpha: &StepSize) {
    let n = table.visit(obs, action);
    let a = match alpha {
        StepSize::Constant(v) => *v,
        StepSize::VisitCount => 1.0 / n as f64,
    };
    let q = table.get(obs, action);
    table.set(obs, action, q + a * (target - q));
}

/// Applies one experience under the given rule. A missing successor
/// bootstraps zero.
pub fn td_update(table: &mut ValueTable, exp: &Experience, rule: UpdateRule, alpha: &StepSize) {
    let target = match rule {
        UpdateRule::Sarsa => {
            exp.reward
                + GAMMA
                    * exp.next.as_ref().map_or(0.0, |n| table.get(n.obs, n.action))
        }
        UpdateRule::QLearning => {
            exp.reward
                + GAMMA
                    * exp.next.as_ref().map_or(0.0, |n| {
                        n.candidates
                            .iter()
                            .map(|a| table.get(n.obs, *a))
                            .fold(f64::NEG_INFINITY, f64::max)
                    })
        }
        UpdateRule::StageReturn => exp.stage_reward,
    };
    apply_target(table, exp.obs, exp.action, target, alpha);
}

/// Epsilon-greedy choice over candidate actions: with probability epsilon a
/// uniform candidate, otherwise the argmax with uniform tie-breaking among
/// maximal values. Returns the chosen index and the number of action values
/// actually evaluated.
pub fn select_action<R: Rng + ?Sized>(
    table: &ValueTable,
    obs: ObsKey,
    candidates: &[ActionKey],
    epsilon: f64,
    rng: &mut R,
) -> (usize, u64) {
    debug_assert!(!candidates.is_empty());
    if epsilon > 0.0 && rng.gen::<f64>() < epsilon {
        return (rng.gen_range(0..candidates.len()), 0);
    }
    let mut best = f64::NEG_INFINITY;
    let mut chosen = 0usize;
    let mut ties = 0u32;
    for (i, a) in candidates.iter().enumerate() {
        let q = table.get(obs, *a);
        if q > best {
            best = q;
            chosen = i;
            ties = 1;
        } else if q == best {
            // Reservoir step: the k-th tie survives with probability 1/k.
            ties += 1;
            if rng.gen_range(0..ties) == 0 {
                chosen = i;
            }
        }
    }
    (chosen, candidates.len() as u64)
}

/// Which action encoding the agent runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variant {
    /// Octant-indexed actions, observation = the octant summary.
    Standard,
    /// Actions named by the view they would reveal; observation = hand,
    /// clock, and the previously chosen encoding.
    Lookahead,
    /// Single-level special case: one candidate per grid cell, named by the
    /// cell's contents.
    Deictic,
}

/// Agent-side configuration for episode runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AgentConfig {
    pub variant: Variant,
    pub sensor: SensorMode,
    pub mask: GridMask,
    /// Sense decisions per overt stage.
    pub levels: u32,
}

impl AgentConfig {
    pub fn new(cfg: &GridConfig, variant: Variant, sensor: SensorMode, mask: GridMask) -> Self {
        let levels = match variant {
            Variant::Standard | Variant::Lookahead => cfg.levels(),
            Variant::Deictic => 1,
        };
        AgentConfig { variant, sensor, mask, levels }
    }

    fn check(&self, cfg: &GridConfig) -> Result<(), LearningError> {
        let env = match self.variant {
            Variant::Standard | Variant::Lookahead => cfg.levels(),
            Variant::Deictic => 1,
        };
        if self.levels != env {
            return Err(LearningError::LevelMismatch { agent: self.levels, env, m: cfg.m });
        }
        Ok(())
    }
}

/// Mutable learner state carried across episodes.
#[derive(Debug, Clone)]
pub struct Learner {
    pub table: ValueTable,
    pub cfg: LearnerConfig,
    pub buffer: VecDeque<Experience>,
    /// Cumulative recorded experiences; drives the epsilon schedule.
    pub experiences_seen: u64,
    pub episodes_seen: u64,
    /// Set false to act greedily on a fixed table without updating it.
    pub learn: bool,
}

impl Learner {
    pub fn new(cfg: LearnerConfig) -> Self {
        Learner {
            table: ValueTable::new(cfg.q0),
            cfg,
            buffer: VecDeque::new(),
            experiences_seen: 0,
            episodes_seen: 0,
            learn: true,
        }
    }

    /// Greedy evaluator over a fixed table.
    pub fn frozen(table: ValueTable) -> Self {
        let mut l = Learner::new(LearnerConfig {
            epsilon: EpsilonSchedule::Constant(0.0),
            ..LearnerConfig::default()
        });
        l.table = table;
        l.learn = false;
        l
    }

    pub fn epsilon(&self) -> f64 {
        epsilon_value(&self.cfg.epsilon, self.experiences_seen)
    }

    fn record(&mut self, exp: Experience) {
        if self.learn {
            if self.cfg.replay.is_some() {
                self.buffer.push_back(exp.clone());
            } else {
                match self.cfg.rule {
                    // Stage-return updates run at stage end instead, once the
                    // stage reward is known.
                    UpdateRule::StageReturn => {}
                    rule => td_update(&mut self.table, &exp, rule, &self.cfg.alpha.clone()),
                }
            }
        }
        self.experiences_seen += 1;
    }

    fn end_episode(&mut self) {
        self.episodes_seen += 1;
        if !self.learn {
            return;
        }
        if let Some(replay) = self.cfg.replay {
            if self.episodes_seen % replay.train_every == 0 {
                while self.buffer.len() > replay.max_experiences {
                    self.buffer.pop_front();
                }
                let batch: Vec<Experience> = self.buffer.iter().cloned().collect();
                for exp in &batch {
                    td_update(&mut self.table, exp, self.cfg.rule, &self.cfg.alpha.clone());
                }
            }
        }
    }
}

/// What one episode produced.
#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeLog {
    pub stage_rewards: Vec<f64>,
    pub episode_return: f64,
    /// Pegs sitting on disks when the clock ran out.
    pub placed: u32,
    /// Epsilon in effect after the episode (per the cumulative count).
    pub epsilon_end: f64,
    /// Action values evaluated per overt stage (greedy lookups only).
    pub evaluations_per_stage: Vec<u64>,
    pub experiences: Vec<Experience>,
}

/// A decision awaiting its successor, so the closing experience can carry
/// the next observation and action.
struct OpenStep {
    obs: ObsKey,
    action: ActionKey,
    reward: f64,
    stage: usize,
}

/// Runs one episode: `t_max` overt stages of `levels` sense decisions each,
/// sampling the starting scene from `rng`. Rewards surface at stage ends and
/// attach to the stage's final decision; intermediate decisions earn zero.
pub fn run_episode<R: Rng + ?Sized>(
    cfg: &GridConfig,
    agent: &AgentConfig,
    learner: &mut Learner,
    rng: &mut R,
) -> Result<EpisodeLog, LearningError> {
    agent.check(cfg)?;
    let base = init_episode(cfg, rng)?;
    let mut ext = ExtendedGroundState::initial(cfg, base);
    let epsilon = learner.epsilon();

    let mut stage_rewards: Vec<f64> = Vec::with_capacity(cfg.t_max as usize);
    let mut evaluations_per_stage: Vec<u64> = Vec::with_capacity(cfg.t_max as usize);
    let mut experiences: Vec<Experience> = Vec::new();
    let mut stage_of: Vec<usize> = Vec::new();

    let mut open: Option<OpenStep> = None;
    // Last chosen encoding, the relational state of lookahead/deictic agents.
    let mut prev_encoding: Option<ActionKey> = None;

    // Scratch buffers reused across decisions.
    let mut keys: Vec<ActionKey> = Vec::new();
    let mut cells: Vec<Loc> = Vec::new();

    for stage in 0..cfg.t_max as usize {
        let mut evals_this_stage = 0u64;
        for level in 1..=agent.levels {
            let obs_key = match agent.variant {
                Variant::Standard => observe(&ext, agent.sensor, agent.mask).key(),
                Variant::Lookahead | Variant::Deictic => {
                    relational_obs_key(ext.base.holding(), ext.base.t, prev_encoding)
                }
            };

            keys.clear();
            cells.clear();
            match agent.variant {
                Variant::Standard => {
                    for oct in Octant::all() {
                        keys.push(standard_descriptor(oct).key());
                    }
                }
                Variant::Lookahead => {
                    for oct in Octant::all() {
                        keys.push(lookahead_descriptor(&ext, oct, agent.sensor, agent.mask).key());
                    }
                }
                Variant::Deictic => {
                    for idx in 0..cfg.cells() {
                        let cell = Loc::from_index(idx, cfg.m);
                        cells.push(cell);
                        keys.push(deictic_descriptor(&ext.base, cell, agent.sensor).key());
                    }
                }
            }

            let (chosen, evals) = select_action(&learner.table, obs_key, &keys, epsilon, rng);
            evals_this_stage += evals;
            let action_key = keys[chosen];

            // Close the previous decision now that its successor is known.
            if let Some(prev) = open.take() {
                let exp = Experience {
                    obs: prev.obs,
                    action: prev.action,
                    reward: prev.reward,
                    stage_reward: f64::NAN,
                    next: Some(NextStep {
                        obs: obs_key,
                        action: action_key,
                        candidates: dedup_keys(&keys),
                    }),
                };
                stage_of.push(prev.stage);
                experiences.push(exp);
            }
            open = Some(OpenStep { obs: obs_key, action: action_key, reward: 0.0, stage });
            prev_encoding = Some(action_key);

            // Apply the decision to the world.
            let final_level = level == agent.levels;
            if !final_level {
                let oct = Octant::new(chosen as u8 + 1).expect("index in 1..=8");
                ext = descend(&ext, oct).expect("descend below final level");
            } else {
                let cell = match agent.variant {
                    Variant::Standard | Variant::Lookahead => {
                        let oct = Octant::new(chosen as u8 + 1).expect("index in 1..=8");
                        cell_of(&ext.focus, oct)
                    }
                    Variant::Deictic => cells[chosen],
                };
                let (next_base, reward) = transition(cfg, &ext.base, cell)?;
                stage_rewards.push(reward);
                if let Some(step) = open.as_mut() {
                    step.reward = reward;
                }
                ext = ExtendedGroundState::initial(cfg, next_base);
            }
        }
        evaluations_per_stage.push(evals_this_stage);
    }

    // The episode's last decision has no successor.
    if let Some(prev) = open.take() {
        stage_of.push(prev.stage);
        experiences.push(Experience {
            obs: prev.obs,
            action: prev.action,
            reward: prev.reward,
            stage_reward: f64::NAN,
            next: None,
        });
    }

    // Attach stage rewards; they were unknown while decisions were open.
    for (exp, stage) in experiences.iter_mut().zip(&stage_of) {
        exp.stage_reward = stage_rewards[*stage];
    }

    for exp in &experiences {
        learner.record(exp.clone());
    }
    if learner.learn && learner.cfg.replay.is_none() && learner.cfg.rule == UpdateRule::StageReturn {
        let alpha = learner.cfg.alpha;
        for exp in &experiences {
            td_update(&mut learner.table, exp, UpdateRule::StageReturn, &alpha);
        }
    }
    learner.end_episode();

    let episode_return: f64 = stage_rewards.iter().sum();
    Ok(EpisodeLog {
        stage_rewards,
        episode_return,
        placed: ext.base.placed_count() as u32,
        epsilon_end: learner.epsilon(),
        evaluations_per_stage,
        experiences,
    })
}

/// Observation identity for encoding-relative agents: hand bit, clock, and
/// the previously chosen action encoding (none at the episode start).
pub fn relational_obs_key(hand: bool, t: u32, prev: Option<ActionKey>) -> ObsKey {
    let prev_bits = match prev {
        // Action keys use at most 63 bits with the top two as a tag; fold the
        // tag down so the whole thing fits beside hand and clock.
        Some(ActionKey(k)) => (k & 0xffff_ffff_ff) | ((k >> 62) << 40),
        None => 1 << 42,
    };
    ObsKey(1 << 63 | (hand as u64) << 43 | (t as u64 & 0xffff) << 44 | prev_bits)
}

fn dedup_keys(keys: &[ActionKey]) -> Vec<ActionKey> {
    let mut out: Vec<ActionKey> = keys.to_vec();
    out.sort_unstable();
    out.dedup();
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha12Rng;

    fn obs(k: u64) -> ObsKey {
        ObsKey(k)
    }

    fn act(k: u64) -> ActionKey {
        ActionKey(k)
    }

    #[test]
    fn full_step_terminal_update_overwrites() {
        let mut t = ValueTable::new(5.0);
        let exp = Experience {
            obs: obs(1),
            action: act(1),
            reward: 1.0,
            stage_reward: 1.0,
            next: None,
        };
        apply_target(&mut t, exp.obs, exp.action, exp.reward, &StepSize::Constant(1.0));
        assert_eq!(t.get(obs(1), act(1)), 1.0);
    }

    #[test]
    fn sarsa_fixed_point_on_two_state_chain() {
        // o1 --a--> o2 --b--> end, rewards 0.5 then 1.0 under a fixed policy.
        // The policy-evaluation fixed point solves by hand to
        // Q(o2,b) = 1 and Q(o1,a) = 0.5 + Q(o2,b) = 1.5.
        let mut t = ValueTable::new(0.0);
        let first = Experience {
            obs: obs(1),
            action: act(10),
            reward: 0.5,
            stage_reward: 0.5,
            next: Some(NextStep { obs: obs(2), action: act(11), candidates: vec![act(11)] }),
        };
        let second = Experience {
            obs: obs(2),
            action: act(11),
            reward: 1.0,
            stage_reward: 1.0,
            next: None,
        };
        for _ in 0..2_000 {
            td_update(&mut t, &first, UpdateRule::Sarsa, &StepSize::Constant(0.3));
            td_update(&mut t, &second, UpdateRule::Sarsa, &StepSize::Constant(0.3));
        }
        assert!((t.get(obs(2), act(11)) - 1.0).abs() < 1e-9);
        assert!((t.get(obs(1), act(10)) - 1.5).abs() < 1e-9);
    }

    #[test]
    fn q_learning_bootstraps_with_the_best_candidate() {
        let mut t = ValueTable::new(0.0);
        t.set(obs(2), act(20), 0.25);
        t.set(obs(2), act(21), 0.75);
        let exp = Experience {
            obs: obs(1),
            action: act(10),
            reward: 0.0,
            stage_reward: 0.0,
            next: Some(NextStep {
                obs: obs(2),
                action: act(20), // taken action is the worse one
                candidates: vec![act(20), act(21)],
            }),
        };
        td_update(&mut t, &exp, UpdateRule::QLearning, &StepSize::Constant(1.0));
        assert_eq!(t.get(obs(1), act(10)), 0.75);
    }

    #[test]
    fn stage_return_ignores_bootstrap() {
        let mut t = ValueTable::new(0.0);
        t.set(obs(2), act(20), 100.0);
        let exp = Experience {
            obs: obs(1),
            action: act(10),
            reward: 0.0,
            stage_reward: 1.0,
            next: Some(NextStep { obs: obs(2), action: act(20), candidates: vec![act(20)] }),
        };
        td_update(&mut t, &exp, UpdateRule::StageReturn, &StepSize::Constant(1.0));
        assert_eq!(t.get(obs(1), act(10)), 1.0);
    }

    #[test]
    fn epsilon_schedule_cases() {
        let inv = EpsilonSchedule::InverseCount { c: 1000.0 };
        assert_eq!(epsilon_value(&inv, 0), 1.0);
        assert_eq!(epsilon_value(&inv, 1_000_000), 0.001);
        let cst = EpsilonSchedule::Constant(0.04);
        assert_eq!(epsilon_value(&cst, 0), 0.04);
        assert_eq!(epsilon_value(&cst, 10_000_000), 0.04);
        // Nonincreasing in count.
        let mut last = f64::INFINITY;
        for count in [0u64, 1, 10, 100, 1_000, 100_000] {
            let e = epsilon_value(&inv, count);
            assert!(e <= last);
            last = e;
        }
    }

    #[test]
    fn greedy_takes_the_unique_max() {
        let mut t = ValueTable::new(0.0);
        let cands = [act(1), act(2), act(3)];
        t.set(obs(9), act(2), 1.0);
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        for _ in 0..100 {
            let (i, evals) = select_action(&t, obs(9), &cands, 0.0, &mut rng);
            assert_eq!(i, 1);
            assert_eq!(evals, 3);
        }
    }

    #[test]
    fn ties_and_full_exploration_are_uniform() {
        let t = ValueTable::new(0.5);
        let cands = [act(1), act(2), act(3), act(4)];
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        for epsilon in [0.0, 1.0] {
            let mut counts = [0u32; 4];
            let draws = 10_000;
            for _ in 0..draws {
                let (i, _) = select_action(&t, obs(3), &cands, epsilon, &mut rng);
                counts[i] += 1;
            }
            // Loose chi-squared-style sanity bound: each arm within 5 sigma
            // of the uniform expectation.
            let expect = draws as f64 / 4.0;
            let sigma = (draws as f64 * 0.25 * 0.75).sqrt();
            for c in counts {
                assert!((c as f64 - expect).abs() < 5.0 * sigma, "counts {counts:?}");
            }
        }
    }

    #[test]
    fn unseen_pairs_read_the_optimistic_default() {
        let t = ValueTable::new(2.5);
        assert_eq!(t.get(obs(1), act(1)), 2.5);
        assert_eq!(t.len(), 0);
    }

    #[test]
    fn episode_emits_levels_times_stages_experiences() {
        let cfg = GridConfig::with_default_horizon(4, 1).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        for (variant, per_stage) in [
            (Variant::Standard, 2u32),
            (Variant::Lookahead, 2),
            (Variant::Deictic, 1),
        ] {
            let agent = AgentConfig::new(&cfg, variant, SensorMode::Normal, GridMask::TWO);
            let mut learner = Learner::new(LearnerConfig::default());
            let log = run_episode(&cfg, &agent, &mut learner, &mut rng).unwrap();
            assert_eq!(log.experiences.len(), (cfg.t_max * per_stage) as usize);
            assert_eq!(log.stage_rewards.len(), cfg.t_max as usize);
            // All but the final experience carry a successor.
            assert!(log.experiences[..log.experiences.len() - 1].iter().all(|e| e.next.is_some()));
            assert!(log.experiences.last().unwrap().next.is_none());
            // Stage rewards land on the stored stage_reward fields.
            assert!(log.experiences.iter().all(|e| e.stage_reward.is_finite()));
        }
    }

    #[test]
    fn level_mismatch_is_rejected() {
        let cfg = GridConfig::with_default_horizon(4, 1).unwrap();
        let mut agent = AgentConfig::new(&cfg, Variant::Standard, SensorMode::Normal, GridMask::TWO);
        agent.levels = 3;
        let mut learner = Learner::new(LearnerConfig::default());
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        assert!(matches!(
            run_episode(&cfg, &agent, &mut learner, &mut rng),
            Err(LearningError::LevelMismatch { agent: 3, env: 2, m: 4 })
        ));
    }

    #[test]
    fn full_exploration_visits_every_reachable_pair_eventually() {
        // Smoke property for the exploration contract: under epsilon = 1 the
        // tiny instance's observation/action pairs all get visited.
        let cfg = GridConfig::with_default_horizon(2, 1).unwrap();
        let agent = AgentConfig::new(&cfg, Variant::Standard, SensorMode::Normal, GridMask::TWO);
        let mut learner = Learner::new(LearnerConfig {
            epsilon: EpsilonSchedule::Constant(1.0),
            rule: UpdateRule::Sarsa,
            ..LearnerConfig::default()
        });
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        let mut seen = std::collections::HashSet::new();
        for _ in 0..30_000 {
            let log = run_episode(&cfg, &agent, &mut learner, &mut rng).unwrap();
            for e in &log.experiences {
                seen.insert((e.obs, e.action));
            }
        }
        // 56 + 56 + 8 distinct observations, 8 actions each.
        assert_eq!(seen.len(), 120 * 8);
    }

    #[test]
    fn fixed_seed_reproduces_the_episode_stream() {
        let cfg = GridConfig::with_default_horizon(4, 2).unwrap();
        let agent = AgentConfig::new(&cfg, Variant::Standard, SensorMode::Normal, GridMask::TWO);
        let run = |seed: u64| {
            let mut learner = Learner::new(LearnerConfig {
                rule: UpdateRule::Sarsa,
                ..LearnerConfig::default()
            });
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            (0..50)
                .map(|_| run_episode(&cfg, &agent, &mut learner, &mut rng).unwrap())
                .collect::<Vec<_>>()
        };
        assert_eq!(run(21), run(21));
    }

    #[test]
    fn replay_buffer_prunes_oldest_first() {
        let cfg = GridConfig::with_default_horizon(2, 1).unwrap();
        let agent = AgentConfig::new(&cfg, Variant::Standard, SensorMode::Normal, GridMask::TWO);
        let mut learner = Learner::new(LearnerConfig {
            rule: UpdateRule::QLearning,
            replay: Some(ReplayConfig { train_every: 1, max_experiences: 3 }),
            ..LearnerConfig::default()
        });
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        let mut tail: Vec<Experience> = Vec::new();
        for _ in 0..5 {
            let log = run_episode(&cfg, &agent, &mut learner, &mut rng).unwrap();
            tail.extend(log.experiences);
        }
        let kept: Vec<Experience> = learner.buffer.iter().cloned().collect();
        assert_eq!(kept, tail[tail.len() - 3..].to_vec());
    }

    #[test]
    fn stored_values_stay_inside_reward_bounds() {
        let cfg = GridConfig::with_default_horizon(4, 2).unwrap();
        let agent = AgentConfig::new(&cfg, Variant::Standard, SensorMode::Normal, GridMask::TWO);
        let mut learner = Learner::new(LearnerConfig {
            rule: UpdateRule::Sarsa,
            epsilon: EpsilonSchedule::Constant(0.2),
            ..LearnerConfig::default()
        });
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        for _ in 0..3_000 {
            run_episode(&cfg, &agent, &mut learner, &mut rng).unwrap();
        }
        let lo = -(cfg.t_max as f64);
        let hi = cfg.n as f64 + learner.cfg.q0;
        for (_, v) in learner.table.values() {
            assert!(v >= lo && v <= hi, "value {v} escaped [{lo}, {hi}]");
        }
    }
}
