//! Command-line front end: run configured training experiments, verify the
//! pinned correctness checks, and print the counting calculators.

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use hsa_core::attention::{count_abstract_state_bound, GridMask, SensorMode};
use hsa_core::experiment::{count_evaluations, run_experiment, ExperimentConfig};
use hsa_core::grid::{count_ground_states, GridConfig, GroundState, Loc, PegPos};
use hsa_core::learning::Variant;
use hsa_core::oracle::{
    check_irrelevance_on, count_reachable, solve_exact, InitialStates, OracleOptions,
};
use hsa_core::schedule::{flat_action_count, hierarchical_sample_count, naive_sample_count};
use hsa_core::sensor::{
    crop, proj, reference, sense, DistanceReference, PointCloud, Pose, ProjectionSpec, ViewAxis,
    Volume,
};
use nalgebra::Vector3;
use num_bigint::BigUint;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

const EXIT_CHECK_FAILED: u8 = 1;
const EXIT_CONFIG: u8 = 2;

#[derive(Parser)]
#[command(name = "hsa", about = "Attention-laboratory experiment runner and verifier")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a training experiment from a config file; writes curves.csv and
    /// summary.txt under the config's output directory.
    Run {
        config: PathBuf,
        /// Worker threads for realizations (default: HSA_THREADS, else all cores).
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Run a pinned correctness check; exits 1 on failure.
    Verify {
        #[command(subcommand)]
        check: VerifyCheck,
    },
    /// Action values evaluated per overt stage, per encoding.
    CountEvals {
        #[arg(long, default_value_t = 16)]
        m: u32,
    },
    /// Exact world-state counts and the observation-space bound.
    Counts {
        #[arg(long, default_value_t = 16)]
        m: u32,
        #[arg(long, default_value_t = 3)]
        n: u64,
        #[arg(long)]
        t_max: Option<u64>,
    },
    /// Hierarchical versus flat sampling budgets and the single-shot
    /// pose-action count.
    Complexity {
        /// Workspace volume, cubic meters.
        #[arg(long, default_value_t = 1.0)]
        v0: f64,
        /// Largest volume allowed per sample, cubic meters.
        #[arg(long, default_value_t = 1e-9)]
        alpha: f64,
        /// Position precision for the flat count, meters.
        #[arg(long, default_value_t = 1e-3)]
        position_precision: f64,
        /// Angular precision for the flat count, degrees per Euler angle.
        #[arg(long, default_value_t = 1.0)]
        angular_precision_deg: f64,
    },
    /// Randomized self-test of the virtual-sensor geometry.
    SenseSelftest {
        #[arg(long, default_value_t = 1000)]
        trials: u32,
        #[arg(long, default_value_t = 7)]
        seed: u64,
    },
}

#[derive(Subcommand)]
enum VerifyCheck {
    /// Exact-value abstraction check: full observations preserve optimal
    /// values, and the faulty sensor provably loses them.
    Theorem,
    /// Counting formulas against enumeration and order-of-magnitude marks.
    Counts,
    /// Hierarchical-versus-flat sampling budgets.
    Complexity,
    /// Randomized geometry trials: equivariance plus brute-force oracles.
    Geometry,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(EXIT_CHECK_FAILED),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_CONFIG)
        }
    }
}

fn dispatch(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run { config, threads } => {
            cmd_run(&config, threads)?;
            Ok(true)
        }
        Command::Verify { check } => match check {
            VerifyCheck::Theorem => verify_theorem(),
            VerifyCheck::Counts => verify_counts(),
            VerifyCheck::Complexity => verify_complexity(),
            VerifyCheck::Geometry => verify_geometry(1000, 7),
        },
        Command::CountEvals { m } => {
            cmd_count_evals(m)?;
            Ok(true)
        }
        Command::Counts { m, n, t_max } => {
            cmd_counts(m, n, t_max)?;
            Ok(true)
        }
        Command::Complexity { v0, alpha, position_precision, angular_precision_deg } => {
            cmd_complexity(v0, alpha, position_precision, angular_precision_deg)?;
            Ok(true)
        }
        Command::SenseSelftest { trials, seed } => verify_geometry(trials, seed),
    }
}

fn thread_count(flag: Option<usize>) -> usize {
    flag.or_else(|| std::env::var("HSA_THREADS").ok().and_then(|v| v.parse().ok()))
        .unwrap_or_else(|| std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1))
}

fn cmd_run(config_path: &Path, threads: Option<usize>) -> Result<()> {
    let text = std::fs::read_to_string(config_path)
        .with_context(|| format!("reading {}", config_path.display()))?;
    let cfg = ExperimentConfig::parse(&text)?;
    let threads = thread_count(threads);
    eprintln!(
        "running {} realizations x {} episodes on {} thread(s)",
        cfg.realizations, cfg.episodes, threads
    );
    let start = Instant::now();
    let result = run_experiment(&cfg, threads)?;
    let out_dir = PathBuf::from(&cfg.output);
    std::fs::create_dir_all(&out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
    std::fs::write(out_dir.join("curves.csv"), result.to_csv())?;
    std::fs::write(out_dir.join("summary.txt"), result.summary(1000))?;
    eprintln!("done in {:?}; wrote {}/curves.csv and summary.txt", start.elapsed(), out_dir.display());
    Ok(())
}

fn report(name: &str, pass: bool, detail: impl AsRef<str>) -> bool {
    println!("[{}] {name}: {}", if pass { "PASS" } else { "FAIL" }, detail.as_ref());
    pass
}

/// The pinned scene set for the checker-power run: placed pegs only appear
/// mid-episode with two objects and a four-stage horizon.
pub fn witness_scenes(cfg: &GridConfig) -> Vec<GroundState> {
    let pinned = GroundState::new(
        vec![PegPos::At(Loc::new(1, 1, 1)), PegPos::At(Loc::new(3, 3, 3))],
        vec![Loc::new(2, 2, 2), Loc::new(4, 4, 4)],
        1,
    );
    let mut scenes = vec![pinned];
    let mut rng = ChaCha12Rng::seed_from_u64(23);
    for _ in 0..7 {
        scenes.push(hsa_core::grid::init_episode(cfg, &mut rng).expect("valid config"));
    }
    scenes
}

fn verify_theorem() -> Result<bool> {
    let mut ok = true;

    for (m, n, t_max) in [(2u32, 1usize, 2u32), (4, 1, 2)] {
        let cfg = GridConfig::new(m, n, t_max)?;
        let start = Instant::now();
        let q = solve_exact(&cfg, &OracleOptions::default())?;
        let full = check_irrelevance_on(&q, SensorMode::Normal, GridMask::FOUR);
        let elapsed = start.elapsed();
        ok &= report(
            &format!("theorem m={m} n={n}"),
            full.max_discrepancy == 0 && elapsed.as_secs() < 60,
            format!(
                "{} states, {} groups, max discrepancy {} ({elapsed:?})",
                full.states_checked, full.groups, full.max_discrepancy
            ),
        );
    }

    let cfg = GridConfig::new(4, 2, 4)?;
    let start = Instant::now();
    let q = solve_exact(
        &cfg,
        &OracleOptions { initial: InitialStates::Explicit(witness_scenes(&cfg)), max_states: 2_000_000 },
    )?;
    let faulty = check_irrelevance_on(&q, SensorMode::Faulty, GridMask::TWO);
    let full = check_irrelevance_on(&q, SensorMode::Normal, GridMask::FOUR);
    let elapsed = start.elapsed();
    ok &= report(
        "faulty-sensor witnesses m=4 n=2",
        !faulty.witnesses.is_empty() && elapsed.as_secs() < 60,
        format!(
            "{} states, max discrepancy {}, {} witnesses ({elapsed:?})",
            faulty.states_checked,
            faulty.max_discrepancy,
            faulty.witnesses.len()
        ),
    );
    ok &= report(
        "full observation on the same scene set",
        full.max_discrepancy == 0,
        format!("max discrepancy {}", full.max_discrepancy),
    );
    if let Some(w) = faulty.witnesses.first() {
        println!(
            "  example witness: action {} valued {} in one state, {} in another",
            w.action.index(),
            w.q_first,
            w.q_second
        );
    }
    Ok(ok)
}

fn decimal_exponent(v: &BigUint) -> usize {
    v.to_string().len() - 1
}

fn verify_counts() -> Result<bool> {
    let mut ok = true;

    // Hand-evaluated small case: C(9,1) * C(8,1) * 2.
    let small = count_ground_states(2, 1, 2);
    ok &= report("state count m=2 n=1", small == BigUint::from(144u32), format!("{small}"));

    let product = count_ground_states(16, 3, 6) * BigUint::from(16u64.pow(3));
    ok &= report(
        "state-action product m=16 n=3",
        decimal_exponent(&product) == 24,
        format!("{product} (exponent {})", decimal_exponent(&product)),
    );

    let bound = count_abstract_state_bound(16, 6);
    ok &= report(
        "observation bound m=16 t_max=6",
        bound == BigUint::from(206_158_430_208u64) && decimal_exponent(&bound) == 11,
        format!("{bound} (exponent {})", decimal_exponent(&bound)),
    );

    let cfg = GridConfig::with_default_horizon(4, 1)?;
    let reach = count_reachable(&cfg, &OracleOptions::default(), SensorMode::Normal, GridMask::TWO)?;
    ok &= report(
        "reachability m=4 n=1",
        BigUint::from(reach.ground_acting) <= cfg.count_ground_states()
            && BigUint::from(reach.obs_keys_acting) <= count_abstract_state_bound(4, 2),
        format!(
            "{} scenes, {} extended states, {} observation keys",
            reach.ground_acting, reach.extended_acting, reach.obs_keys_acting
        ),
    );

    let tiny = GridConfig::with_default_horizon(2, 1)?;
    let reach = count_reachable(&tiny, &OracleOptions::default(), SensorMode::Normal, GridMask::TWO)?;
    ok &= report(
        "abstraction many-to-one m=2 n=1",
        reach.obs_keys_total < reach.ground_total,
        format!("{} observation keys < {} scenes", reach.obs_keys_total, reach.ground_total),
    );
    Ok(ok)
}

fn verify_complexity() -> Result<bool> {
    let mut ok = true;
    for (ratio, levels) in [(1e3, 4u32), (1e6, 7), (1e9, 10)] {
        let (l, total) = hierarchical_sample_count(ratio, 1.0)?;
        let naive = naive_sample_count(ratio, 1.0)?;
        ok &= report(
            &format!("sampling at ratio 1e{}", ratio.log10() as u32),
            l == levels && total == 8 * levels as u64 && naive == ratio as u64,
            format!("hierarchical {total} vs flat {naive}"),
        );
    }
    let count = flat_action_count(&Volume::cubic(1.0)?, 1e-3, 1.0f64.to_radians());
    let exp = decimal_exponent(&count);
    ok &= report(
        "single-shot pose actions (1 m^3, 1 mm, 1 deg)",
        (16..=17).contains(&exp),
        format!("{count} (exponent {exp})"),
    );
    Ok(ok)
}

fn random_pose<R: Rng>(rng: &mut R) -> Pose {
    let axis = Vector3::new(
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
        rng.gen_range(-1.0..1.0),
    );
    let axis = if axis.norm() < 1e-6 { Vector3::new(1.0, 0.0, 0.0) } else { axis };
    Pose::from_axis_angle(
        axis,
        rng.gen_range(-3.0..3.0),
        Vector3::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)),
    )
}

fn random_cloud<R: Rng>(rng: &mut R, n: usize, scale: f64) -> PointCloud {
    PointCloud::new(
        (0..n)
            .map(|_| {
                Vector3::new(
                    rng.gen_range(-scale..scale),
                    rng.gen_range(-scale..scale),
                    rng.gen_range(-scale..scale),
                )
            })
            .collect(),
    )
}

fn verify_geometry(trials: u32, seed: u64) -> Result<bool> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let volume = Volume::new(1.0, 0.9, 1.1)?;
    let spec = ProjectionSpec::new(
        8,
        6,
        vec![ViewAxis::ZNeg, ViewAxis::XPos],
        DistanceReference::NearFace,
    )?;
    let start = Instant::now();
    let mut worst = 0.0f64;
    for trial in 0..trials {
        let cloud = random_cloud(&mut rng, 200, 1.0);

        // (a) Moving world and sensor together leaves the image unchanged.
        let sensor = random_pose(&mut rng);
        let g = random_pose(&mut rng);
        let moved = PointCloud::new(cloud.points.iter().map(|p| g.apply(p)).collect());
        let a = sense(&cloud, &sensor, &volume, &spec);
        let b = sense(&moved, &sensor.then(&g), &volume, &spec);
        for (ca, cb) in a.channels.iter().zip(&b.channels) {
            for (x, y) in ca.data.iter().zip(&cb.data) {
                worst = worst.max((x - y).abs());
            }
        }
        if worst > 1e-9 {
            return Ok(report("geometry", false, format!("equivariance residual {worst:.2e} at trial {trial}")));
        }

        // (b) Projection equals the per-pixel brute force exactly.
        let cropped = crop(&cloud, &volume);
        if proj(&cropped, &volume, &spec) != reference::proj_by_pixel_scan(&cropped, &volume, &spec) {
            return Ok(report("geometry", false, format!("projection mismatch at trial {trial}")));
        }

        // (c) Crop equals the predicate filter exactly.
        if cropped != reference::crop_by_predicate(&cloud, &volume) {
            return Ok(report("geometry", false, format!("crop mismatch at trial {trial}")));
        }
    }
    let elapsed = start.elapsed();
    Ok(report(
        "geometry",
        elapsed.as_secs() < 60,
        format!("{trials} trials, worst equivariance residual {worst:.2e} ({elapsed:?})"),
    ))
}

fn cmd_count_evals(m: u32) -> Result<()> {
    if !m.is_power_of_two() || m < 2 {
        bail!("m must be a power of two, at least 2");
    }
    println!("grid side m = {m}, sense levels = {}", m.trailing_zeros());
    for (name, variant) in [
        ("standard", Variant::Standard),
        ("lookahead", Variant::Lookahead),
        ("deictic", Variant::Deictic),
    ] {
        println!("{name:9} -> {} action values per overt stage", count_evaluations(variant, m));
    }
    Ok(())
}

fn cmd_counts(m: u32, n: u64, t_max: Option<u64>) -> Result<()> {
    let t_max = t_max.unwrap_or(2 * n);
    let states = count_ground_states(m as u64, n, t_max);
    let actions = BigUint::from((m as u64).pow(3));
    let product = &states * &actions;
    println!("grid m = {m}, objects n = {n}, horizon t_max = {t_max}");
    println!("world states:         {states}");
    println!("actions:              {actions}");
    println!("state-action product: {product} (~1e{})", decimal_exponent(&product));
    if m.is_power_of_two() && m >= 2 {
        let bound = count_abstract_state_bound(m, t_max as u32);
        println!("observation bound:    {bound} (~1e{})", decimal_exponent(&bound));
    }
    Ok(())
}

fn cmd_complexity(v0: f64, alpha: f64, position_precision: f64, angular_deg: f64) -> Result<()> {
    let (levels, total) = hierarchical_sample_count(v0, alpha)?;
    let naive = naive_sample_count(v0, alpha)?;
    println!("workspace {v0} m^3, target {alpha} m^3 per sample");
    println!("hierarchical: {levels} levels x 8 = {total} samples");
    println!("flat:         {naive} samples");
    let count =
        flat_action_count(&Volume::cubic(v0.cbrt())?, position_precision, angular_deg.to_radians());
    println!(
        "single-shot pose actions at {position_precision} m and {angular_deg} deg: {count} (~1e{})",
        decimal_exponent(&count)
    );
    Ok(())
}
