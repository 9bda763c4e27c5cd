//! Attention-schedule machinery for continuous pose selection: derive the
//! level count, per-level zoom and offset bounds from workspace geometry,
//! generate candidate offset grids, compare hierarchical against flat
//! sampling budgets, and rank candidate chains by the product of normalized
//! per-level value estimates.

use crate::sensor::{Pose, Volume};
use nalgebra::Vector3;
use num_bigint::BigUint;
use std::f64::consts::PI;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScheduleError {
    #[error("precision {p} exceeds workspace {w} on axis {axis}")]
    PrecisionExceedsWorkspace { axis: usize, p: f64, w: f64 },
    #[error("per-axis sample count must be at least 2, got {0}")]
    BadSampleCount(u32),
    #[error("target volume {alpha} must be positive and at most the workspace volume {v0}")]
    BadVolumeRatio { v0: f64, alpha: f64 },
    #[error("value bounds must satisfy q_max > q_min, got [{q_min}, {q_max}]")]
    DegenerateValueRange { q_min: f64, q_max: f64 },
    #[error("chain {index} has length {got}, expected {expected}")]
    RaggedChains { index: usize, got: usize, expected: usize },
    #[error("chain {index} level {level} value {value} escapes [{q_min}, {q_max}]")]
    ValueOutOfRange { index: usize, level: usize, value: f64, q_min: f64, q_max: f64 },
    #[error("schedule text is malformed: {0}")]
    BadText(String),
}

/// Offset bounds for one level: total position range per axis (meters) and
/// total rotation range per Euler angle (radians). Candidates sit within
/// plus or minus half the range.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OffsetBounds {
    pub position: Vector3<f64>,
    pub rotation: Vector3<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleLevel {
    /// Sensed volume at this level.
    pub zoom: Volume,
    pub offsets: OffsetBounds,
}

/// A full attention schedule: the first sensor pose and the per-level
/// (zoom, offset) pairs, positions first, orientation levels appended after.
#[derive(Debug, Clone, PartialEq)]
pub struct HsaSchedule {
    pub initial_pose: Pose,
    pub levels: Vec<ScheduleLevel>,
}

impl HsaSchedule {
    pub fn level_count(&self) -> usize {
        self.levels.len()
    }

    /// Flat `key = value` text, one line per field, matching the experiment
    /// config dialect.
    pub fn to_config_text(&self) -> String {
        let mut out = String::new();
        let t = self.initial_pose.translation();
        out.push_str(&format!("initial_position = {} {} {}\n", t.x, t.y, t.z));
        out.push_str(&format!("levels = {}\n", self.levels.len()));
        for (i, level) in self.levels.iter().enumerate() {
            let z = level.zoom.extents;
            let p = level.offsets.position;
            let r = level.offsets.rotation;
            out.push_str(&format!("level{}.zoom = {} {} {}\n", i + 1, z.x, z.y, z.z));
            out.push_str(&format!(
                "level{}.offset = {} {} {} {} {} {}\n",
                i + 1,
                p.x,
                p.y,
                p.z,
                r.x,
                r.y,
                r.z
            ));
        }
        out
    }

    pub fn from_config_text(text: &str) -> Result<Self, ScheduleError> {
        let mut fields = std::collections::HashMap::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| ScheduleError::BadText(format!("missing '=' in {line:?}")))?;
            fields.insert(key.trim().to_string(), value.trim().to_string());
        }
        let nums = |s: &str| -> Result<Vec<f64>, ScheduleError> {
            s.split_whitespace()
                .map(|w| w.parse::<f64>().map_err(|_| ScheduleError::BadText(format!("bad number {w:?}"))))
                .collect()
        };
        let pos = nums(
            fields
                .get("initial_position")
                .ok_or_else(|| ScheduleError::BadText("initial_position missing".into()))?,
        )?;
        let count: usize = fields
            .get("levels")
            .and_then(|v| v.parse().ok())
            .ok_or_else(|| ScheduleError::BadText("levels missing".into()))?;
        let mut levels = Vec::with_capacity(count);
        for i in 1..=count {
            let z = nums(
                fields
                    .get(&format!("level{i}.zoom"))
                    .ok_or_else(|| ScheduleError::BadText(format!("level{i}.zoom missing")))?,
            )?;
            let d = nums(
                fields
                    .get(&format!("level{i}.offset"))
                    .ok_or_else(|| ScheduleError::BadText(format!("level{i}.offset missing")))?,
            )?;
            if z.len() != 3 || d.len() != 6 {
                return Err(ScheduleError::BadText(format!("level{i} has wrong arity")));
            }
            levels.push(ScheduleLevel {
                zoom: Volume::new(z[0], z[1], z[2])
                    .map_err(|e| ScheduleError::BadText(e.to_string()))?,
                offsets: OffsetBounds {
                    position: Vector3::new(d[0], d[1], d[2]),
                    rotation: Vector3::new(d[3], d[4], d[5]),
                },
            });
        }
        if pos.len() != 3 {
            return Err(ScheduleError::BadText("initial_position has wrong arity".into()));
        }
        Ok(HsaSchedule {
            initial_pose: Pose::from_translation(Vector3::new(pos[0], pos[1], pos[2])),
            levels,
        })
    }
}

/// Smallest level count whose n-fold divisions shrink every axis of `w` to
/// within `p`, with a tiny relative slack so exact ratios do not round up.
fn levels_needed(w: &Vector3<f64>, p: &Vector3<f64>, n: u32) -> u32 {
    let mut levels = 0u32;
    for axis in 0..3 {
        let mut size = w[axis];
        let mut l = 0u32;
        while size > p[axis] * (1.0 + 1e-9) {
            size /= n as f64;
            l += 1;
        }
        levels = levels.max(l);
    }
    levels
}

/// Derives a position-selecting schedule from workspace size, target
/// precision, per-axis sample count, and largest-object size.
///
/// Level offsets shrink as w / n^(i-1) so that patches centered on one
/// level's samples tile the previous level's box; zooms match the offsets
/// unless the object is bigger (it must stay fully visible). The workspace
/// is taken as centered on the origin, so the initial pose is the identity.
/// A degenerate geometry still yields one level: some selection is always
/// required.
pub fn build_schedule(
    workspace: &Volume,
    precision: &Volume,
    n_per_axis: u32,
    object: &Volume,
) -> Result<HsaSchedule, ScheduleError> {
    if n_per_axis < 2 {
        return Err(ScheduleError::BadSampleCount(n_per_axis));
    }
    let w = workspace.extents;
    let p = precision.extents;
    for axis in 0..3 {
        if p[axis] > w[axis] {
            return Err(ScheduleError::PrecisionExceedsWorkspace { axis, p: p[axis], w: w[axis] });
        }
    }
    let levels = levels_needed(&w, &p, n_per_axis).max(1);
    let mut out = Vec::with_capacity(levels as usize);
    for i in 0..levels {
        let d = w / (n_per_axis as f64).powi(i as i32);
        let zoom = Vector3::new(
            d.x.max(object.extents.x),
            d.y.max(object.extents.y),
            d.z.max(object.extents.z),
        );
        out.push(ScheduleLevel {
            zoom: Volume::new(zoom.x, zoom.y, zoom.z).expect("positive extents"),
            offsets: OffsetBounds { position: d, rotation: Vector3::zeros() },
        });
    }
    Ok(HsaSchedule { initial_pose: Pose::identity(), levels: out })
}

impl HsaSchedule {
    /// Appends one orientation-selecting level per listed Euler-angle range
    /// (radians). Orientation levels keep the final zoom and add no further
    /// position offset.
    pub fn append_orientation_levels(&mut self, angle_ranges: &[f64]) {
        let zoom = self
            .levels
            .last()
            .map(|l| l.zoom)
            .unwrap_or_else(|| Volume::cubic(1.0).expect("positive"));
        for (i, range) in angle_ranges.iter().enumerate() {
            let mut rotation = Vector3::zeros();
            rotation[i.min(2)] = *range;
            self.levels.push(ScheduleLevel {
                zoom,
                offsets: OffsetBounds { position: Vector3::zeros(), rotation },
            });
        }
    }
}

/// Cell-centered candidate offsets within an offset range: n samples per
/// axis at the centers of n equal slices of [-d/2, d/2].
pub fn position_offsets(range: &Vector3<f64>, n_per_axis: u32) -> Vec<Vector3<f64>> {
    let n = n_per_axis as usize;
    let center = |d: f64, k: usize| -d / 2.0 + (k as f64 + 0.5) * d / n as f64;
    let mut out = Vec::with_capacity(n * n * n);
    for kz in 0..n {
        for ky in 0..n {
            for kx in 0..n {
                out.push(Vector3::new(
                    center(range.x, kx),
                    center(range.y, ky),
                    center(range.z, kz),
                ));
            }
        }
    }
    out
}

/// Cell-centered angle offsets within [-range/2, range/2].
pub fn angle_offsets(range: f64, count: u32) -> Vec<f64> {
    (0..count)
        .map(|k| -range / 2.0 + (k as f64 + 0.5) * range / count as f64)
        .collect()
}

/// Hierarchical position-sampling budget with eightfold branching: the level
/// count is the smallest L with v0 / 8^L <= alpha (at least 1; a selection
/// step is always needed), and the total is 8 samples per level.
pub fn hierarchical_sample_count(v0: f64, alpha: f64) -> Result<(u32, u64), ScheduleError> {
    if !(alpha > 0.0) || alpha > v0 {
        return Err(ScheduleError::BadVolumeRatio { v0, alpha });
    }
    let mut levels = 0u32;
    let mut volume = v0;
    while volume > alpha * (1.0 + 1e-12) {
        volume /= 8.0;
        levels += 1;
    }
    let levels = levels.max(1);
    Ok((levels, 8 * levels as u64))
}

/// Flat sampling budget for the same job: one sample per alpha-sized chunk.
pub fn naive_sample_count(v0: f64, alpha: f64) -> Result<u64, ScheduleError> {
    if !(alpha > 0.0) || alpha > v0 {
        return Err(ScheduleError::BadVolumeRatio { v0, alpha });
    }
    Ok((v0 / alpha).ceil() as u64)
}

/// Number of single-shot pose actions needed to cover a workspace at the
/// given position precision (meters) and angular precision (radians) per
/// Euler angle: the product of per-axis position counts and three per-angle
/// orientation counts.
pub fn flat_action_count(workspace: &Volume, position_precision: f64, angular_precision: f64) -> BigUint {
    let mut total = BigUint::from(1u32);
    for axis in 0..3 {
        let count = (workspace.extents[axis] / position_precision).ceil().max(1.0) as u64;
        total *= count;
    }
    let per_angle = (2.0 * PI / angular_precision).ceil().max(1.0) as u64;
    total * per_angle * per_angle * per_angle
}

/// One ranked candidate chain: its original index, the per-level products
/// p_1..p_L, and the final score p_L.
#[derive(Debug, Clone, PartialEq)]
pub struct RankedChain {
    pub index: usize,
    pub levels: Vec<f64>,
    pub score: f64,
}

/// Scores each candidate chain by the running product of normalized
/// per-level values, p_l = p_(l-1) * (Q_l - q_min) / (q_max - q_min) with
/// p_0 = 1, and returns the top n by final score. Ties keep input order.
pub fn top_n_scores(
    chains: &[Vec<f64>],
    q_min: f64,
    q_max: f64,
    n: usize,
) -> Result<Vec<RankedChain>, ScheduleError> {
    if !(q_max > q_min) {
        return Err(ScheduleError::DegenerateValueRange { q_min, q_max });
    }
    let expected = chains.first().map_or(0, |c| c.len());
    let mut ranked = Vec::with_capacity(chains.len());
    for (index, chain) in chains.iter().enumerate() {
        if chain.len() != expected {
            return Err(ScheduleError::RaggedChains { index, got: chain.len(), expected });
        }
        let mut p = 1.0;
        let mut levels = Vec::with_capacity(chain.len());
        for (level, q) in chain.iter().enumerate() {
            if *q < q_min || *q > q_max {
                return Err(ScheduleError::ValueOutOfRange {
                    index,
                    level: level + 1,
                    value: *q,
                    q_min,
                    q_max,
                });
            }
            p *= (q - q_min) / (q_max - q_min);
            levels.push(p);
        }
        ranked.push(RankedChain { index, levels, score: p });
    }
    ranked.sort_by(|a, b| b.score.partial_cmp(&a.score).expect("scores are finite"));
    ranked.truncate(n);
    Ok(ranked)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn three_divisions_reach_millimeter_precision() {
        // 36 cm workspace, 5.625 mm target, 4 samples per axis: 36/4^3 lands
        // exactly on target, so three levels suffice.
        let w = Volume::cubic(0.36).unwrap();
        let p = Volume::cubic(0.005625).unwrap();
        let obj = Volume::cubic(0.001).unwrap();
        let s = build_schedule(&w, &p, 4, &obj).unwrap();
        assert_eq!(s.level_count(), 3);
        assert_eq!(s.levels[0].offsets.position.x, 0.36);
        assert!((s.levels[1].offsets.position.x - 0.09).abs() < 1e-12);
        assert!((s.levels[2].offsets.position.x - 0.0225).abs() < 1e-12);
        // Identity initial pose: the workspace is origin-centered.
        assert_eq!(*s.initial_pose.translation(), Vector3::zeros());
    }

    #[test]
    fn zoom_never_shrinks_below_the_object() {
        let w = Volume::cubic(0.36).unwrap();
        let p = Volume::cubic(0.005625).unwrap();
        let obj = Volume::new(0.12, 0.12, 0.3).unwrap();
        let s = build_schedule(&w, &p, 4, &obj).unwrap();
        let last = s.levels.last().unwrap();
        assert_eq!(last.zoom.extents, Vector3::new(0.12, 0.12, 0.3));
        assert!(last.offsets.position.x < 0.12);
    }

    #[test]
    fn degenerate_geometry_still_yields_one_level() {
        let w = Volume::cubic(0.2).unwrap();
        let s = build_schedule(&w, &w, 4, &Volume::cubic(0.01).unwrap()).unwrap();
        assert_eq!(s.level_count(), 1);
    }

    #[test]
    fn excessive_precision_is_rejected() {
        let w = Volume::cubic(0.2).unwrap();
        let p = Volume::new(0.1, 0.3, 0.1).unwrap();
        assert!(matches!(
            build_schedule(&w, &p, 4, &Volume::cubic(0.01).unwrap()),
            Err(ScheduleError::PrecisionExceedsWorkspace { axis: 1, .. })
        ));
    }

    #[test]
    fn centered_patches_tile_the_parent_box() {
        // Patches of the next level's size centered on this level's offsets
        // must cover the current box edge to edge on every axis.
        let w = Volume::new(0.36, 0.30, 0.42).unwrap();
        let p = Volume::cubic(0.002).unwrap();
        let obj = Volume::cubic(0.001).unwrap();
        for n in [2u32, 4, 6] {
            let s = build_schedule(&w, &p, n, &obj).unwrap();
            for i in 0..s.level_count() - 1 {
                let parent = s.levels[i].offsets.position;
                let child = s.levels[i + 1].offsets.position;
                for axis in 0..3 {
                    let centers: Vec<f64> = (0..n)
                        .map(|k| -parent[axis] / 2.0 + (k as f64 + 0.5) * parent[axis] / n as f64)
                        .collect();
                    let half = child[axis] / 2.0;
                    // Continuous cover from -parent/2 to +parent/2.
                    assert!((centers[0] - half) <= -parent[axis] / 2.0 + 1e-12);
                    assert!((centers[n as usize - 1] + half) >= parent[axis] / 2.0 - 1e-12);
                    for pair in centers.windows(2) {
                        assert!(pair[0] + half >= pair[1] - half - 1e-12, "gap in the tiling");
                    }
                }
            }
        }
    }

    #[test]
    fn candidate_offsets_stay_inside_their_bounds() {
        let d = Vector3::new(0.36, 0.30, 0.42);
        let offsets = position_offsets(&d, 4);
        assert_eq!(offsets.len(), 64);
        for o in &offsets {
            for axis in 0..3 {
                assert!(o[axis].abs() <= d[axis] / 2.0);
            }
        }
        let angles = angle_offsets(PI, 60);
        assert_eq!(angles.len(), 60);
        assert!(angles.iter().all(|a| a.abs() <= PI / 2.0));
    }

    #[test]
    fn orientation_levels_append_after_positions() {
        let w = Volume::cubic(0.36).unwrap();
        let p = Volume::cubic(0.005625).unwrap();
        let mut s = build_schedule(&w, &p, 4, &Volume::cubic(0.09).unwrap()).unwrap();
        s.append_orientation_levels(&[PI]);
        assert_eq!(s.level_count(), 4);
        let last = s.levels.last().unwrap();
        assert_eq!(last.offsets.rotation, Vector3::new(PI, 0.0, 0.0));
        assert_eq!(last.offsets.position, Vector3::zeros());
    }

    #[test]
    fn schedule_round_trips_through_config_text() {
        let w = Volume::cubic(0.36).unwrap();
        let p = Volume::cubic(0.005625).unwrap();
        let mut s = build_schedule(&w, &p, 4, &Volume::cubic(0.09).unwrap()).unwrap();
        s.append_orientation_levels(&[PI, PI / 3.0]);
        let text = s.to_config_text();
        let back = HsaSchedule::from_config_text(&text).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn cubic_meter_to_cubic_millimeter_needs_ten_levels() {
        let (levels, total) = hierarchical_sample_count(1.0, 1e-9).unwrap();
        assert_eq!((levels, total), (10, 80));
        assert_eq!(naive_sample_count(1.0, 1e-9).unwrap(), 1_000_000_000);
    }

    #[test]
    fn equal_volumes_clamp_to_one_level() {
        assert_eq!(hierarchical_sample_count(1.0, 1.0).unwrap(), (1, 8));
        assert!(hierarchical_sample_count(1.0, 2.0).is_err());
        assert!(hierarchical_sample_count(1.0, 0.0).is_err());
    }

    #[test]
    fn sample_budgets_grow_log_versus_linear() {
        let alpha = 1.0;
        let mut last_total = 0u64;
        for (ratio, expect_levels) in [(1e3, 4u32), (1e6, 7), (1e9, 10)] {
            let v0 = ratio;
            let (levels, total) = hierarchical_sample_count(v0, alpha).unwrap();
            assert_eq!(levels, expect_levels);
            assert_eq!(total, 8 * expect_levels as u64);
            assert_eq!(naive_sample_count(v0, alpha).unwrap(), ratio as u64);
            // Constant additive growth against thousandfold volume steps.
            if last_total > 0 {
                assert_eq!(total - last_total, 24);
            }
            last_total = total;
        }
    }

    #[test]
    fn flat_count_for_meter_millimeter_degree() {
        let count = flat_action_count(&Volume::cubic(1.0).unwrap(), 1e-3, PI / 180.0);
        // 1000^3 positions times 360^3 orientations.
        assert_eq!(count, BigUint::from(1_000_000_000u64) * BigUint::from(46_656_000u64));
        let digits = count.to_string().len();
        assert!((17..=18).contains(&digits), "expected order 1e16..1e17, got {count}");
    }

    #[test]
    fn flat_count_degenerate_and_scaling() {
        // One position sample, one orientation sample.
        let one = flat_action_count(&Volume::cubic(1.0).unwrap(), 1.0, 2.0 * PI);
        assert_eq!(one, BigUint::from(1u32));
        // Halving the linear precision multiplies the count by 8.
        let base = flat_action_count(&Volume::cubic(1.0).unwrap(), 1e-2, 2.0 * PI);
        let fine = flat_action_count(&Volume::cubic(1.0).unwrap(), 5e-3, 2.0 * PI);
        assert_eq!(fine, base * 8u32);
    }

    #[test]
    fn chain_scores_match_hand_evaluation() {
        let max = top_n_scores(&[vec![1.0, 1.0, 1.0]], 0.0, 1.0, 1).unwrap();
        assert_eq!(max[0].score, 1.0);
        let mid = top_n_scores(&[vec![0.5, 0.5]], 0.0, 1.0, 1).unwrap();
        assert!((mid[0].score - 0.25).abs() < 1e-15);
        assert_eq!(mid[0].levels, vec![0.5, 0.25]);
        let zero = top_n_scores(&[vec![0.7, 0.0, 0.9]], 0.0, 1.0, 1).unwrap();
        assert_eq!(zero[0].score, 0.0);
    }

    #[test]
    fn product_ranking_differs_from_final_level_ranking() {
        // Chain A carries a strong early level; chain B has the better final
        // level. The product prefers A, the final value alone prefers B.
        let chains = vec![vec![1.0, 0.5], vec![0.4, 0.6]];
        let by_product = top_n_scores(&chains, 0.0, 1.0, 2).unwrap();
        assert_eq!(by_product[0].index, 0);
        let by_final: usize = (0..2).max_by(|&a, &b| chains[a][1].partial_cmp(&chains[b][1]).unwrap()).unwrap();
        assert_eq!(by_final, 1);
    }

    #[test]
    fn degenerate_range_and_escaped_values_are_rejected() {
        assert!(matches!(
            top_n_scores(&[vec![0.5]], 1.0, 1.0, 1),
            Err(ScheduleError::DegenerateValueRange { .. })
        ));
        assert!(matches!(
            top_n_scores(&[vec![1.5]], 0.0, 1.0, 1),
            Err(ScheduleError::ValueOutOfRange { .. })
        ));
        assert!(matches!(
            top_n_scores(&[vec![0.5, 0.5], vec![0.5]], 0.0, 1.0, 2),
            Err(ScheduleError::RaggedChains { .. })
        ));
    }

    #[test]
    fn ties_rank_in_input_order() {
        let chains = vec![vec![0.5], vec![0.5], vec![0.9]];
        let ranked = top_n_scores(&chains, 0.0, 1.0, 3).unwrap();
        assert_eq!(ranked.iter().map(|r| r.index).collect::<Vec<_>>(), vec![2, 0, 1]);
    }

    proptest! {
        // Scores live in [0,1], never increase along a chain, and rise
        // strictly when any one level's value rises (others fixed, provided
        // no level sits at the minimum).
        #[test]
        fn score_properties(
            base in proptest::collection::vec(0.05f64..1.0, 1..6),
            bump_at in 0usize..6,
            bump in 0.01f64..0.5,
        ) {
            let ranked = top_n_scores(&[base.clone()], 0.0, 1.0, 1).unwrap();
            let levels = &ranked[0].levels;
            for (i, p) in levels.iter().enumerate() {
                prop_assert!(*p >= 0.0 && *p <= 1.0);
                if i > 0 {
                    prop_assert!(*p <= levels[i - 1] + 1e-15);
                }
            }
            let at = bump_at % base.len();
            if base[at] + bump <= 1.0 {
                let mut better = base.clone();
                better[at] += bump;
                let improved = top_n_scores(&[better], 0.0, 1.0, 1).unwrap();
                prop_assert!(improved[0].score > ranked[0].score);
            }
        }
    }
}
