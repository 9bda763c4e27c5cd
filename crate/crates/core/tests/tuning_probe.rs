//! Scratch probe for picking experiment defaults; run with --ignored.

use hsa_core::experiment::{run_experiment, ExperimentConfig};

fn cfg(variant: &str, sensor: &str, alpha: f64, q0: f64, episodes: u32, realizations: u32) -> ExperimentConfig {
    let text = format!(
        "m = 16\nn = 3\nvariant = {variant}\nsensor = {sensor}\nrule = sarsa\nalpha = {alpha}\n\
         epsilon = constant 0.0\nq0 = {q0}\nrealizations = {realizations}\nepisodes = {episodes}\nseed = 7\n"
    );
    ExperimentConfig::parse(&text).unwrap()
}

#[test]
#[ignore]
fn probe_alpha_sweep() {
    for alpha in [0.1, 0.25, 0.5] {
        for q0 in [1.0] {
            let c = cfg("standard", "normal", alpha, q0, 50_000, 2);
            let start = std::time::Instant::now();
            let r = run_experiment(&c, 4).unwrap();
            let finals = r.final_window_mean(1000);
            let reach = r.episodes_to_reach(1000, 2.5);
            println!(
                "alpha={alpha} q0={q0} finals={finals:?} reach2.5={reach:?} elapsed={:?}",
                start.elapsed()
            );
        }
    }
}

#[test]
#[ignore]
fn probe_variants() {
    let alpha = 0.25;
    for (variant, sensor) in [
        ("standard", "normal"),
        ("standard", "faulty"),
        ("lookahead", "normal"),
        ("deictic", "normal"),
    ] {
        let c = cfg(variant, sensor, alpha, 1.0, 50_000, 2);
        let start = std::time::Instant::now();
        let r = run_experiment(&c, 4).unwrap();
        let finals = r.final_window_mean(1000);
        let reach = r.episodes_to_reach(1000, 2.5);
        println!(
            "{variant}/{sensor} finals={finals:?} reach2.5={reach:?} elapsed={:?}",
            start.elapsed()
        );
    }
}

#[test]
#[ignore]
fn probe_small_instances() {
    for (m, n, alpha, episodes) in [(4u32, 1usize, 0.25f64, 5_000u32), (8, 2, 0.25, 20_000), (16, 1, 0.25, 50_000), (16, 3, 0.25, 50_000)] {
        let text = format!(
            "m = {m}\nn = {n}\nvariant = standard\nrule = sarsa\nalpha = {alpha}\n\
             epsilon = constant 0.0\nq0 = 1.0\nrealizations = 2\nepisodes = {episodes}\nseed = 5\n"
        );
        let c = ExperimentConfig::parse(&text).unwrap();
        let r = run_experiment(&c, 4).unwrap();
        println!("m={m} n={n} a={alpha} eps={episodes} finals={:?}", r.final_window_mean(1000.min(episodes/5)));
    }
}

#[test]
#[ignore]
fn probe_long_run() {
    for (alpha_label, alpha_line, episodes) in [
        ("0.25", "alpha = 0.25", 200_000u32),
        ("0.25", "alpha = 0.25", 500_000),
        ("visit", "alpha = visit-count", 200_000),
    ] {
        let text = format!(
            "m = 16\nn = 3\nvariant = standard\nrule = sarsa\n{alpha_line}\n\
             epsilon = constant 0.0\nq0 = 1.0\nrealizations = 1\nepisodes = {episodes}\nseed = 5\n"
        );
        let c = ExperimentConfig::parse(&text).unwrap();
        let start = std::time::Instant::now();
        let r = run_experiment(&c, 1).unwrap();
        let reach = r.episodes_to_reach(1000, 2.5);
        println!(
            "alpha={alpha_label} episodes={episodes} finals={:?} reach={reach:?} elapsed={:?}",
            r.final_window_mean(1000),
            start.elapsed()
        );
    }
}

#[test]
#[ignore]
fn probe_diagnose() {
    use hsa_core::learning::{run_episode, Learner, LearnerConfig, StepSize, UpdateRule, EpsilonSchedule, AgentConfig};
    use hsa_core::{GridConfig, Variant, SensorMode, GridMask};
    use rand_chacha::rand_core::SeedableRng;
    let cfg = GridConfig::with_default_horizon(16, 3).unwrap();
    let agent = AgentConfig::new(&cfg, Variant::Standard, SensorMode::Normal, GridMask::TWO);
    let mut learner = Learner::new(LearnerConfig {
        rule: UpdateRule::Sarsa,
        alpha: StepSize::Constant(0.25),
        epsilon: EpsilonSchedule::Constant(0.0),
        q0: 1.0,
        replay: None,
    });
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(5);
    let mut hist = [0u32; 4];
    let mut neg = 0u32;
    for ep in 0..300_000u32 {
        let log = run_episode(&cfg, &agent, &mut learner, &mut rng).unwrap();
        if ep >= 299_000 {
            hist[log.placed as usize] += 1;
            neg += log.stage_rewards.iter().filter(|r| **r < 0.0).count() as u32;
        }
        if ep % 50_000 == 0 {
            println!("ep {ep}: table {} entries", learner.table.len());
        }
    }
    println!("placed histogram over last 1000 episodes: {hist:?}, negative rewards {neg}");
    // How often each placement count appears and where values sit.
    let mut above1 = 0usize;
    for (_, v) in learner.table.values() {
        if v > 1.0 + 1e-9 { above1 += 1; }
    }
    println!("table entries {} of which above q0 {}", learner.table.len(), above1);
}

#[test]
#[ignore]
fn probe_trace_episode() {
    use hsa_core::learning::{run_episode, select_action, Learner, LearnerConfig, StepSize, UpdateRule, EpsilonSchedule, AgentConfig};
    use hsa_core::{GridConfig, Variant, SensorMode, GridMask};
    use rand_chacha::rand_core::SeedableRng;
    let cfg = GridConfig::with_default_horizon(16, 3).unwrap();
    let agent = AgentConfig::new(&cfg, Variant::Standard, SensorMode::Normal, GridMask::TWO);
    let mut learner = Learner::new(LearnerConfig {
        rule: UpdateRule::Sarsa,
        alpha: StepSize::Constant(0.25),
        epsilon: EpsilonSchedule::Constant(0.0),
        q0: 1.0,
        replay: None,
    });
    let mut rng = rand_chacha::ChaCha12Rng::seed_from_u64(5);
    for _ in 0..150_000u32 {
        run_episode(&cfg, &agent, &mut learner, &mut rng).unwrap();
    }
    // Trace: replay episodes without learning, print the decisions.
    learner.learn = false;
    for _ in 0..3 {
        let log = run_episode(&cfg, &agent, &mut learner, &mut rng).unwrap();
        println!("== episode return {} placed {}", log.episode_return, log.placed);
        for (i, e) in log.experiences.iter().enumerate() {
            let q = learner.table.get(e.obs, e.action);
            println!("  step {i:2} t={} l={} obs={:#018x} a={:2} q={q:7.3} r={} stage_r={}",
                1 + i / 4, 1 + i % 4, e.obs.0, e.action.0, e.reward, e.stage_reward);
        }
    }
    let _ = std::io::Write::flush(&mut std::io::stdout());
}

#[test]
#[ignore]
fn probe_q0_and_length() {
    for (q0, alpha, episodes) in [
        (3.0f64, 0.25f64, 200_000u32),
        (3.0, 0.25, 500_000),
        (3.0, 0.1, 500_000),
        (3.0, 0.5, 500_000),
        (4.0, 0.25, 500_000),
    ] {
        let text = format!(
            "m = 16\nn = 3\nvariant = standard\nrule = sarsa\nalpha = {alpha}\n\
             epsilon = constant 0.0\nq0 = {q0}\nrealizations = 1\nepisodes = {episodes}\nseed = 5\n"
        );
        let c = ExperimentConfig::parse(&text).unwrap();
        let start = std::time::Instant::now();
        let r = run_experiment(&c, 1).unwrap();
        println!(
            "q0={q0} alpha={alpha} episodes={episodes} finals={:?} reach={:?} elapsed={:?}",
            r.final_window_mean(1000),
            r.episodes_to_reach(1000, 2.5),
            start.elapsed()
        );
    }
}

#[test]
#[ignore]
fn probe_aggressive_alpha() {
    for (q0, alpha_line, label, episodes) in [
        (3.0f64, "alpha = 0.5".to_string(), "0.5", 1_000_000u32),
        (3.0, "alpha = 0.7".to_string(), "0.7", 500_000),
        (3.0, "alpha = 0.9".to_string(), "0.9", 500_000),
        (3.0, "alpha = 1.0".to_string(), "1.0", 500_000),
        (3.0, "alpha = visit-count".to_string(), "1/N", 500_000),
    ] {
        let text = format!(
            "m = 16\nn = 3\nvariant = standard\nrule = sarsa\n{alpha_line}\n\
             epsilon = constant 0.0\nq0 = {q0}\nrealizations = 1\nepisodes = {episodes}\nseed = 5\n"
        );
        let c = ExperimentConfig::parse(&text).unwrap();
        let start = std::time::Instant::now();
        let r = run_experiment(&c, 1).unwrap();
        println!(
            "q0={q0} alpha={label} episodes={episodes} finals={:?} reach={:?} elapsed={:?}",
            r.final_window_mean(1000),
            r.episodes_to_reach(1000, 2.5),
            start.elapsed()
        );
    }
}

#[test]
#[ignore]
fn probe_final_bundle() {
    for (variant, sensor) in [("standard", "normal"), ("standard", "faulty"), ("lookahead", "normal"), ("deictic", "normal")] {
        let text = format!(
            "m = 16\nn = 3\nvariant = {variant}\nsensor = {sensor}\nrule = sarsa\nalpha = 0.7\n\
             epsilon = constant 0.0\nq0 = 3.0\nrealizations = 5\nepisodes = 600000\nseed = 7\n"
        );
        let c = ExperimentConfig::parse(&text).unwrap();
        let start = std::time::Instant::now();
        let r = run_experiment(&c, 5).unwrap();
        let finals = r.final_window_mean(1000);
        let mean = finals.iter().sum::<f64>() / finals.len() as f64;
        println!(
            "{variant}/{sensor}: finals={finals:?} mean={mean:.3} reach={:?} elapsed={:?}",
            r.episodes_to_reach(1000, 2.5),
            start.elapsed()
        );
    }
}

#[test]
#[ignore]
fn probe_variant_budgets() {
    for (variant, sensor, episodes) in [
        ("deictic", "normal", 20_000u32),
        ("lookahead", "normal", 100_000),
        ("standard", "faulty", 600_000),
    ] {
        let text = format!(
            "m = 16\nn = 3\nvariant = {variant}\nsensor = {sensor}\nrule = sarsa\nalpha = 0.7\n\
             epsilon = constant 0.0\nq0 = 3.0\nrealizations = 5\nepisodes = {episodes}\nseed = 7\n"
        );
        let c = ExperimentConfig::parse(&text).unwrap();
        let start = std::time::Instant::now();
        let r = run_experiment(&c, 5).unwrap();
        let finals = r.final_window_mean(1000);
        let mean = finals.iter().sum::<f64>() / finals.len() as f64;
        println!(
            "{variant}/{sensor}/{episodes}: finals={finals:?} mean={mean:.3} reach={:?} elapsed={:?}",
            r.episodes_to_reach(1000, 2.5),
            start.elapsed()
        );
    }
}
