//! Scenario evaluation protocols and metric aggregation.
//!
//! Stability reports frame-to-frame jitter of the estimates; occlusion and
//! interaction report per-frame error against ground truth with scheduled
//! ground-truth resets; free-hard interaction replaces scheduled resets with
//! the failure rule (error above threshold for more than `fail_window`
//! consecutive frames).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::Sequence;
use crate::mesh::Mesh;
use crate::se3::{delta_r, delta_t, Pose};
use crate::tracking::{self, TrackError, Tracker};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("sequence has {len} frames; need at least 2")]
    SequenceTooShort { len: usize },
    #[error("scenario mismatch: expected {expected}, sequence is {actual}")]
    ScenarioMismatch { expected: String, actual: String },
    #[error(transparent)]
    Track(#[from] TrackError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StabilityPlacement {
    Near,
    Far,
    Occluded,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OccluderOrientation {
    Horizontal,
    Vertical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InteractionVariant {
    TranslationOnly,
    RotationOnly,
    FreeSlow,
    FreeHard,
}

pub const OCCLUSION_PERCENTS: [u8; 6] = [0, 15, 30, 45, 60, 75];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "scenario", rename_all = "snake_case")]
pub enum ScenarioKind {
    Stability {
        placement: StabilityPlacement,
    },
    Occlusion {
        percent: u8,
        occluder: OccluderOrientation,
    },
    Interaction {
        variant: InteractionVariant,
    },
}

impl ScenarioKind {
    pub fn validate(&self) -> Result<(), String> {
        match self {
            ScenarioKind::Occlusion { percent, .. } if !OCCLUSION_PERCENTS.contains(percent) => {
                Err(format!(
                    "occlusion percent {percent} not in {OCCLUSION_PERCENTS:?}"
                ))
            }
            _ => Ok(()),
        }
    }

    pub fn family(&self) -> &'static str {
        match self {
            ScenarioKind::Stability { .. } => "stability",
            ScenarioKind::Occlusion { .. } => "occlusion",
            ScenarioKind::Interaction { .. } => "interaction",
        }
    }

    /// Stable grouping key, e.g. `occlusion/30/horizontal`.
    pub fn label(&self) -> String {
        match self {
            ScenarioKind::Stability { placement } => {
                format!("stability/{}", to_snake(&format!("{placement:?}")))
            }
            ScenarioKind::Occlusion { percent, occluder } => {
                format!("occlusion/{percent}/{}", to_snake(&format!("{occluder:?}")))
            }
            ScenarioKind::Interaction { variant } => {
                format!("interaction/{}", to_snake(&format!("{variant:?}")))
            }
        }
    }
}

fn to_snake(s: &str) -> String {
    let mut out = String::new();
    for (i, c) in s.chars().enumerate() {
        if c.is_uppercase() {
            if i > 0 {
                out.push('_');
            }
            out.extend(c.to_lowercase());
        } else {
            out.push(c);
        }
    }
    out
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EvalConfig {
    /// Ground-truth reset period in frames for the scheduled-reset protocols.
    pub reset_interval: usize,
    /// Failure thresholds and window for free-hard interaction.
    pub fail_t_mm: f64,
    pub fail_r_deg: f64,
    pub fail_window: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig {
            reset_interval: 15,
            fail_t_mm: 30.0,
            fail_r_deg: 20.0,
            fail_window: 7,
        }
    }
}

/// Failure rule as a scalar state machine: a failure fires when the error
/// exceeds a threshold for strictly more than `window` consecutive frames
/// (on the window+1-th frame); the counter clears after a failure.
#[derive(Debug, Clone)]
pub struct FailureCounter {
    t_threshold: f64,
    r_threshold: f64,
    window: usize,
    consecutive: usize,
    failures: usize,
}

impl FailureCounter {
    pub fn new(cfg: &EvalConfig) -> Self {
        FailureCounter {
            t_threshold: cfg.fail_t_mm,
            r_threshold: cfg.fail_r_deg,
            window: cfg.fail_window,
            consecutive: 0,
            failures: 0,
        }
    }

    /// Feeds one frame's errors; returns true when this frame triggers a
    /// failure (the caller must reset the tracker to ground truth).
    pub fn observe(&mut self, err_t_mm: f64, err_r_deg: f64) -> bool {
        if err_t_mm > self.t_threshold || err_r_deg > self.r_threshold {
            self.consecutive += 1;
            if self.consecutive > self.window {
                self.failures += 1;
                self.consecutive = 0;
                return true;
            }
        } else {
            self.consecutive = 0;
        }
        false
    }

    pub fn failures(&self) -> usize {
        self.failures
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct FrameRecord {
    pub frame_index: usize,
    /// Pose held by the tracker after this frame (ground truth on reset
    /// frames); the per-frame trace for offline replay.
    pub est_pose: Pose,
    pub err_t_mm: f64,
    pub err_r_deg: f64,
    /// Ground-truth inter-frame displacement at this frame.
    pub gt_speed_t_mm: f64,
    pub gt_speed_r_deg: f64,
    /// Tracker pose was overwritten with ground truth at this frame;
    /// excluded from error aggregates.
    pub was_reset: bool,
    pub low_overlap: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub object_id: String,
    pub scenario: ScenarioKind,
    pub tracker: String,
    /// One record per frame after the initialization frame.
    pub per_frame: Vec<FrameRecord>,
    pub failures: usize,
}

/// What the harness drives. Real trackers see ground-truth-stripped frames;
/// `Echo` is the harness-side oracle that replays ground truth, used to
/// validate protocols end to end.
pub enum TrackerDriver {
    Boxed(Box<dyn Tracker>),
    Echo,
}

impl TrackerDriver {
    pub fn by_name(name: &str) -> Option<TrackerDriver> {
        if name == "echo" {
            return Some(TrackerDriver::Echo);
        }
        tracking::by_name(name).map(TrackerDriver::Boxed)
    }

    pub fn name(&self) -> String {
        match self {
            TrackerDriver::Boxed(t) => t.name().to_string(),
            TrackerDriver::Echo => "echo".to_string(),
        }
    }

    fn init(&mut self, mesh: &Mesh, pose0: Pose) -> Result<(), TrackError> {
        match self {
            TrackerDriver::Boxed(t) => t.init(mesh, pose0),
            TrackerDriver::Echo => Ok(()),
        }
    }

    fn reset(&mut self, pose: Pose) {
        if let TrackerDriver::Boxed(t) = self {
            t.reset(pose);
        }
    }

    /// (estimate, low_overlap) for one frame.
    fn step(&mut self, seq: &Sequence, frame_index: usize) -> (Pose, bool) {
        match self {
            TrackerDriver::Boxed(t) => {
                let frame = &seq.frames[frame_index];
                let report = t.update(&frame.observed(&seq.intrinsics));
                (report.pose, report.low_overlap)
            }
            TrackerDriver::Echo => (seq.frames[frame_index].gt_pose, false),
        }
    }
}

fn gt_speed(seq: &Sequence, i: usize) -> (f64, f64) {
    let prev = &seq.frames[i - 1].gt_pose;
    let cur = &seq.frames[i].gt_pose;
    (
        delta_t(&prev.translation, &cur.translation),
        delta_r(&prev.rotation, &cur.rotation),
    )
}

/// Jitter protocol: distance between consecutive *estimated* poses; no
/// resets, no failure counting.
pub fn eval_stability(
    seq: &Sequence,
    mesh: &Mesh,
    driver: &mut TrackerDriver,
) -> Result<EvalReport, HarnessError> {
    if seq.len() < 2 {
        return Err(HarnessError::SequenceTooShort { len: seq.len() });
    }
    driver.init(mesh, seq.frames[0].gt_pose)?;
    let mut prev_estimate = seq.frames[0].gt_pose;
    let mut per_frame = Vec::with_capacity(seq.len() - 1);
    for i in 1..seq.len() {
        let (estimate, low_overlap) = driver.step(seq, i);
        let (gt_speed_t_mm, gt_speed_r_deg) = gt_speed(seq, i);
        per_frame.push(FrameRecord {
            frame_index: i,
            est_pose: estimate,
            err_t_mm: delta_t(&prev_estimate.translation, &estimate.translation),
            err_r_deg: delta_r(&prev_estimate.rotation, &estimate.rotation),
            gt_speed_t_mm,
            gt_speed_r_deg,
            was_reset: false,
            low_overlap,
        });
        prev_estimate = estimate;
    }
    Ok(EvalReport {
        object_id: seq.object_id.clone(),
        scenario: seq.scenario.clone(),
        tracker: driver.name(),
        per_frame,
        failures: 0,
    })
}

/// Error-to-ground-truth protocol with scheduled resets every
/// `cfg.reset_interval` frames. Used for occlusion and for interaction
/// variants other than free-hard.
fn eval_with_scheduled_resets(
    seq: &Sequence,
    mesh: &Mesh,
    driver: &mut TrackerDriver,
    cfg: &EvalConfig,
) -> Result<EvalReport, HarnessError> {
    if seq.len() < 2 {
        return Err(HarnessError::SequenceTooShort { len: seq.len() });
    }
    driver.init(mesh, seq.frames[0].gt_pose)?;
    let mut per_frame = Vec::with_capacity(seq.len() - 1);
    for i in 1..seq.len() {
        let gt = seq.frames[i].gt_pose;
        let (gt_speed_t_mm, gt_speed_r_deg) = gt_speed(seq, i);
        if cfg.reset_interval > 0 && i % cfg.reset_interval == 0 {
            driver.reset(gt);
            per_frame.push(FrameRecord {
                frame_index: i,
                est_pose: gt,
                err_t_mm: 0.0,
                err_r_deg: 0.0,
                gt_speed_t_mm,
                gt_speed_r_deg,
                was_reset: true,
                low_overlap: false,
            });
            continue;
        }
        let (estimate, low_overlap) = driver.step(seq, i);
        per_frame.push(FrameRecord {
            frame_index: i,
            est_pose: estimate,
            err_t_mm: delta_t(&gt.translation, &estimate.translation),
            err_r_deg: delta_r(&gt.rotation, &estimate.rotation),
            gt_speed_t_mm,
            gt_speed_r_deg,
            was_reset: false,
            low_overlap,
        });
    }
    Ok(EvalReport {
        object_id: seq.object_id.clone(),
        scenario: seq.scenario.clone(),
        tracker: driver.name(),
        per_frame,
        failures: 0,
    })
}

pub fn eval_occlusion(
    seq: &Sequence,
    mesh: &Mesh,
    driver: &mut TrackerDriver,
    cfg: &EvalConfig,
) -> Result<EvalReport, HarnessError> {
    eval_with_scheduled_resets(seq, mesh, driver, cfg)
}

pub fn eval_interaction(
    seq: &Sequence,
    mesh: &Mesh,
    driver: &mut TrackerDriver,
    cfg: &EvalConfig,
) -> Result<EvalReport, HarnessError> {
    let free_hard = matches!(
        seq.scenario,
        ScenarioKind::Interaction {
            variant: InteractionVariant::FreeHard
        }
    );
    if !free_hard {
        return eval_with_scheduled_resets(seq, mesh, driver, cfg);
    }

    if seq.len() < 2 {
        return Err(HarnessError::SequenceTooShort { len: seq.len() });
    }
    driver.init(mesh, seq.frames[0].gt_pose)?;
    let mut counter = FailureCounter::new(cfg);
    let mut per_frame = Vec::with_capacity(seq.len() - 1);
    for i in 1..seq.len() {
        let gt = seq.frames[i].gt_pose;
        let (gt_speed_t_mm, gt_speed_r_deg) = gt_speed(seq, i);
        let (estimate, low_overlap) = driver.step(seq, i);
        let err_t_mm = delta_t(&gt.translation, &estimate.translation);
        let err_r_deg = delta_r(&gt.rotation, &estimate.rotation);
        let failed = counter.observe(err_t_mm, err_r_deg);
        if failed {
            driver.reset(gt);
        }
        per_frame.push(FrameRecord {
            frame_index: i,
            est_pose: if failed { gt } else { estimate },
            err_t_mm,
            err_r_deg,
            gt_speed_t_mm,
            gt_speed_r_deg,
            was_reset: failed,
            low_overlap,
        });
    }
    Ok(EvalReport {
        object_id: seq.object_id.clone(),
        scenario: seq.scenario.clone(),
        tracker: driver.name(),
        per_frame,
        failures: counter.failures(),
    })
}

/// Dispatches on the sequence's scenario annotation.
pub fn evaluate(
    seq: &Sequence,
    mesh: &Mesh,
    driver: &mut TrackerDriver,
    cfg: &EvalConfig,
) -> Result<EvalReport, HarnessError> {
    match seq.scenario {
        ScenarioKind::Stability { .. } => eval_stability(seq, mesh, driver),
        ScenarioKind::Occlusion { .. } => eval_occlusion(seq, mesh, driver, cfg),
        ScenarioKind::Interaction { .. } => eval_interaction(seq, mesh, driver, cfg),
    }
}

/// Evaluates many sequences in parallel (one fresh driver per sequence),
/// results in input order.
pub fn evaluate_all<F>(
    jobs: &[(&Sequence, &Mesh)],
    make_driver: F,
    cfg: &EvalConfig,
) -> Vec<Result<EvalReport, HarnessError>>
where
    F: Fn() -> TrackerDriver + Sync,
{
    jobs.par_iter()
        .map(|(seq, mesh)| {
            let mut driver = make_driver();
            evaluate(seq, mesh, &mut driver, cfg)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Aggregation

/// Speed-bin edges for the per-speed error tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BinScheme {
    /// (0,10..40] mm, (0,4..16] deg.
    Methodology,
    /// (0,12.5..50] mm, (0,19..75] deg.
    Comparison,
}

impl BinScheme {
    pub fn translation_edges(&self) -> &'static [f64] {
        match self {
            BinScheme::Methodology => &[0.0, 10.0, 20.0, 30.0, 40.0],
            BinScheme::Comparison => &[0.0, 12.5, 25.0, 37.5, 50.0],
        }
    }

    pub fn rotation_edges(&self) -> &'static [f64] {
        match self {
            BinScheme::Methodology => &[0.0, 4.0, 8.0, 12.0, 16.0],
            BinScheme::Comparison => &[0.0, 19.0, 37.0, 56.0, 75.0],
        }
    }
}

/// Index of the bin for speed `s` over `edges`; `edges.len() - 1` is the
/// overflow bin. The first bin is closed at zero so every speed lands
/// somewhere.
fn bin_index(edges: &[f64], s: f64) -> usize {
    edges[1..]
        .iter()
        .position(|&hi| s <= hi)
        .unwrap_or(edges.len() - 1)
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SummaryStats {
    pub count: usize,
    pub mean: f64,
    pub median: f64,
    pub p95: f64,
}

impl SummaryStats {
    pub fn from_values(mut values: Vec<f64>) -> Option<SummaryStats> {
        if values.is_empty() {
            return None;
        }
        values.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let count = values.len();
        let mean = values.iter().sum::<f64>() / count as f64;
        Some(SummaryStats {
            count,
            mean,
            median: percentile(&values, 0.5),
            p95: percentile(&values, 0.95),
        })
    }
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    let idx = ((sorted.len() as f64 - 1.0) * q).round() as usize;
    sorted[idx.min(sorted.len() - 1)]
}

/// Stats for one speed bin; `hi = None` marks the overflow bin.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BinnedStats {
    pub lo: f64,
    pub hi: Option<f64>,
    pub stats: SummaryStats,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioAggregate {
    pub label: String,
    /// Frames contributing to the error stats (reset frames excluded).
    pub frames: usize,
    pub translation: Option<SummaryStats>,
    pub rotation: Option<SummaryStats>,
    /// Errors binned by ground-truth speed; empty bins are absent.
    pub translation_bins: Vec<BinnedStats>,
    pub rotation_bins: Vec<BinnedStats>,
    pub failures: usize,
    pub resets: usize,
    pub low_overlap_frames: usize,
}

/// Pools per-frame records across reports, grouped by scenario label.
/// Reset-flagged frames are excluded from all error statistics.
pub fn aggregate(reports: &[EvalReport], scheme: BinScheme) -> Vec<ScenarioAggregate> {
    let mut labels: Vec<String> = reports.iter().map(|r| r.scenario.label()).collect();
    labels.sort();
    labels.dedup();

    let t_edges = scheme.translation_edges();
    let r_edges = scheme.rotation_edges();

    labels
        .into_iter()
        .map(|label| {
            let group: Vec<&EvalReport> = reports
                .iter()
                .filter(|r| r.scenario.label() == label)
                .collect();
            let mut t_errors = Vec::new();
            let mut r_errors = Vec::new();
            let mut t_binned: Vec<Vec<f64>> = vec![Vec::new(); t_edges.len()];
            let mut r_binned: Vec<Vec<f64>> = vec![Vec::new(); r_edges.len()];
            let mut resets = 0usize;
            let mut low_overlap_frames = 0usize;
            for report in &group {
                for rec in &report.per_frame {
                    if rec.low_overlap {
                        low_overlap_frames += 1;
                    }
                    if rec.was_reset {
                        resets += 1;
                        continue;
                    }
                    t_errors.push(rec.err_t_mm);
                    r_errors.push(rec.err_r_deg);
                    t_binned[bin_index(t_edges, rec.gt_speed_t_mm)].push(rec.err_t_mm);
                    r_binned[bin_index(r_edges, rec.gt_speed_r_deg)].push(rec.err_r_deg);
                }
            }
            let to_bins = |edges: &[f64], binned: Vec<Vec<f64>>| -> Vec<BinnedStats> {
                binned
                    .into_iter()
                    .enumerate()
                    .filter_map(|(i, values)| {
                        SummaryStats::from_values(values).map(|stats| BinnedStats {
                            lo: edges[i],
                            hi: edges.get(i + 1).copied(),
                            stats,
                        })
                    })
                    .collect()
            };
            ScenarioAggregate {
                label,
                frames: t_errors.len(),
                translation: SummaryStats::from_values(t_errors.clone()),
                rotation: SummaryStats::from_values(r_errors.clone()),
                translation_bins: to_bins(t_edges, t_binned),
                rotation_bins: to_bins(r_edges, r_binned),
                failures: group.iter().map(|r| r.failures).sum(),
                resets,
                low_overlap_frames,
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::Intrinsics;
    use crate::dataset::Frame;
    use crate::depth::DepthImage;
    use crate::se3::Rotation;
    use nalgebra::Vector3;

    fn k() -> Intrinsics {
        Intrinsics::new(500.0, 500.0, 4.0, 4.0, 8, 8).unwrap()
    }

    /// Sequence with scripted GT poses and trivially tiny depth frames.
    fn scripted(scenario: ScenarioKind, poses: Vec<Pose>) -> Sequence {
        let k = k();
        let frames = poses
            .into_iter()
            .enumerate()
            .map(|(i, gt_pose)| {
                let mut depth = DepthImage::new(k.width, k.height);
                depth.set(4, 4, 1000.0);
                Frame {
                    depth,
                    rgb: None,
                    timestamp_ms: i as f64 * 33.0,
                    gt_pose,
                }
            })
            .collect();
        Sequence::new("obj".into(), scenario, k, frames, None).unwrap()
    }

    /// Scripted tracker for protocol tests: plays back a fixed pose list.
    struct Playback {
        poses: Vec<Pose>,
        cursor: usize,
        current: Pose,
    }

    impl Playback {
        fn driver(poses: Vec<Pose>) -> TrackerDriver {
            TrackerDriver::Boxed(Box::new(Playback {
                poses,
                cursor: 0,
                current: Pose::identity(),
            }))
        }
    }

    impl Tracker for Playback {
        fn name(&self) -> &'static str {
            "playback"
        }
        fn init(&mut self, _mesh: &Mesh, pose0: Pose) -> Result<(), TrackError> {
            self.current = pose0;
            Ok(())
        }
        fn update(&mut self, _frame: &crate::dataset::ObservedFrame) -> crate::tracking::UpdateReport {
            self.current = self.poses[self.cursor % self.poses.len()];
            self.cursor += 1;
            crate::tracking::UpdateReport {
                pose: self.current,
                low_overlap: false,
                iterations: 0,
                mean_residual_mm: 0.0,
            }
        }
        fn reset(&mut self, pose: Pose) {
            self.current = pose;
        }
        fn current_pose(&self) -> Pose {
            self.current
        }
    }

    fn static_scenario() -> ScenarioKind {
        ScenarioKind::Stability {
            placement: StabilityPlacement::Near,
        }
    }

    #[test]
    fn echo_on_static_gt_has_zero_jitter() {
        let pose = Pose::from_translation(0.0, 0.0, 800.0);
        let seq = scripted(static_scenario(), vec![pose; 10]);
        let mesh = Mesh::cuboid(10.0, 10.0, 10.0);
        let mut driver = TrackerDriver::Echo;
        let report = eval_stability(&seq, &mesh, &mut driver).unwrap();
        assert_eq!(report.per_frame.len(), 9);
        for rec in &report.per_frame {
            assert_eq!(rec.err_t_mm, 0.0);
            assert_eq!(rec.err_r_deg, 0.0);
        }
    }

    #[test]
    fn alternating_half_mm_gives_one_mm_jitter() {
        let seq = scripted(static_scenario(), vec![Pose::identity(); 11]);
        let mesh = Mesh::cuboid(10.0, 10.0, 10.0);
        // Estimates alternate +/- 0.5 mm on x; every consecutive delta is 1 mm.
        let estimates: Vec<Pose> = (1..11)
            .map(|i| Pose::from_translation(if i % 2 == 0 { -0.5 } else { 0.5 }, 0.0, 0.0))
            .collect();
        let mut driver = Playback::driver(estimates);
        let report = eval_stability(&seq, &mesh, &mut driver).unwrap();
        // First step: from init (identity) to +0.5 -> 0.5 mm; afterwards 1.0.
        assert!((report.per_frame[0].err_t_mm - 0.5).abs() < 1e-12);
        for rec in &report.per_frame[1..] {
            assert!((rec.err_t_mm - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn stability_jitter_matches_pairwise_oracle() {
        let seq = scripted(static_scenario(), vec![Pose::identity(); 8]);
        let mesh = Mesh::cuboid(10.0, 10.0, 10.0);
        let estimates: Vec<Pose> = (0..7)
            .map(|i| {
                Pose::new(
                    Rotation::rot_z((i as f64 * 0.3).to_radians()),
                    Vector3::new(i as f64, -(i as f64) * 0.5, 2.0),
                )
            })
            .collect();
        let mut driver = Playback::driver(estimates.clone());
        let report = eval_stability(&seq, &mesh, &mut driver).unwrap();

        // Brute-force pairwise oracle over the same estimate stream.
        let mut stream = vec![seq.frames[0].gt_pose];
        stream.extend(estimates);
        for (rec, pair) in report.per_frame.iter().zip(stream.windows(2)) {
            assert!((rec.err_t_mm - delta_t(&pair[0].translation, &pair[1].translation)).abs() < 1e-12);
            assert!((rec.err_r_deg - delta_r(&pair[0].rotation, &pair[1].rotation)).abs() < 1e-12);
        }
    }

    fn occlusion_scenario() -> ScenarioKind {
        ScenarioKind::Occlusion {
            percent: 0,
            occluder: OccluderOrientation::Horizontal,
        }
    }

    #[test]
    fn scheduled_resets_flag_multiples_of_interval() {
        let poses: Vec<Pose> = (0..40)
            .map(|i| Pose::from_translation(i as f64, 0.0, 800.0))
            .collect();
        let seq = scripted(occlusion_scenario(), poses);
        let mesh = Mesh::cuboid(10.0, 10.0, 10.0);
        let mut driver = TrackerDriver::Boxed(Box::new(crate::tracking::FrozenTracker::new()));
        let report = eval_occlusion(&seq, &mesh, &mut driver, &EvalConfig::default()).unwrap();
        for rec in &report.per_frame {
            assert_eq!(rec.was_reset, rec.frame_index % 15 == 0, "frame {}", rec.frame_index);
            if rec.was_reset {
                assert_eq!(rec.err_t_mm, 0.0);
            }
        }
        let reset_frames: Vec<usize> = report
            .per_frame
            .iter()
            .filter(|r| r.was_reset)
            .map(|r| r.frame_index)
            .collect();
        assert_eq!(reset_frames, vec![15, 30]);
    }

    #[test]
    fn frozen_tracker_errors_match_replay_oracle() {
        // Turntable-like GT; frozen tracker holds the last reset anchor.
        let poses: Vec<Pose> = (0..35)
            .map(|i| {
                Pose::new(
                    Rotation::rot_y((2.0 * i as f64).to_radians()),
                    Vector3::new(0.0, 0.0, 1200.0),
                )
            })
            .collect();
        let seq = scripted(occlusion_scenario(), poses.clone());
        let mesh = Mesh::cuboid(10.0, 10.0, 10.0);
        let mut driver = TrackerDriver::Boxed(Box::new(crate::tracking::FrozenTracker::new()));
        let cfg = EvalConfig::default();
        let report = eval_occlusion(&seq, &mesh, &mut driver, &cfg).unwrap();

        // Offline replay: anchor = last reset or init pose.
        for rec in &report.per_frame {
            let i = rec.frame_index;
            let anchor = poses[(i / 15) * 15];
            if rec.was_reset {
                continue;
            }
            let expect_r = delta_r(&anchor.rotation, &poses[i].rotation);
            assert!((rec.err_r_deg - expect_r).abs() < 1e-9, "frame {i}");
        }
    }

    #[test]
    fn reset_interval_one_resets_every_frame() {
        let poses: Vec<Pose> = (0..6)
            .map(|i| Pose::from_translation(i as f64 * 5.0, 0.0, 800.0))
            .collect();
        let seq = scripted(occlusion_scenario(), poses);
        let mesh = Mesh::cuboid(10.0, 10.0, 10.0);
        let mut driver = TrackerDriver::Boxed(Box::new(crate::tracking::FrozenTracker::new()));
        let cfg = EvalConfig {
            reset_interval: 1,
            ..Default::default()
        };
        let report = eval_occlusion(&seq, &mesh, &mut driver, &cfg).unwrap();
        assert!(report.per_frame.iter().all(|r| r.was_reset));
    }

    fn free_hard() -> ScenarioKind {
        ScenarioKind::Interaction {
            variant: InteractionVariant::FreeHard,
        }
    }

    /// Constructs an error stream by playing back estimates displaced from a
    /// static GT by the requested per-frame translation error.
    fn run_failure_stream(errors_mm: &[f64]) -> EvalReport {
        let gt = Pose::from_translation(0.0, 0.0, 800.0);
        let seq = scripted(free_hard(), vec![gt; errors_mm.len() + 1]);
        let mesh = Mesh::cuboid(10.0, 10.0, 10.0);
        let estimates: Vec<Pose> = errors_mm
            .iter()
            .map(|e| Pose::from_translation(0.0, 0.0, 800.0 + e))
            .collect();
        let mut driver = Playback::driver(estimates);
        eval_interaction(&seq, &mesh, &mut driver, &EvalConfig::default()).unwrap()
    }

    #[test]
    fn eight_consecutive_violations_is_one_failure() {
        let mut errors = vec![0.0; 4];
        errors.extend(vec![35.0; 8]);
        errors.extend(vec![0.0; 4]);
        let report = run_failure_stream(&errors);
        assert_eq!(report.failures, 1);
        // The failure fires on the 8th violating frame (frame index 12).
        let reset: Vec<usize> = report
            .per_frame
            .iter()
            .filter(|r| r.was_reset)
            .map(|r| r.frame_index)
            .collect();
        assert_eq!(reset, vec![12]);
    }

    #[test]
    fn seven_consecutive_violations_is_no_failure() {
        let mut errors = vec![35.0; 7];
        errors.extend(vec![0.0; 5]);
        let report = run_failure_stream(&errors);
        assert_eq!(report.failures, 0);
    }

    #[test]
    fn failure_counter_matches_independent_state_machine() {
        use rand::Rng;
        let mut rng = crate::rng::seeded_rng(42);
        let cfg = EvalConfig::default();
        for _ in 0..50 {
            let errors: Vec<f64> = (0..200)
                .map(|_| {
                    if rng.random_bool(0.3) {
                        rng.random_range(30.1..100.0)
                    } else {
                        rng.random_range(0.0..30.0)
                    }
                })
                .collect();
            let report = run_failure_stream(&errors);

            // Independent scalar replay.
            let mut consecutive = 0usize;
            let mut failures = 0usize;
            for &e in &errors {
                if e > cfg.fail_t_mm {
                    consecutive += 1;
                    if consecutive > cfg.fail_window {
                        failures += 1;
                        consecutive = 0;
                    }
                } else {
                    consecutive = 0;
                }
            }
            assert_eq!(report.failures, failures);
        }
    }

    #[test]
    fn echo_on_interaction_zero_errors_zero_failures() {
        let poses: Vec<Pose> = (0..50)
            .map(|i| Pose::from_translation((i * 7) as f64, 0.0, 900.0))
            .collect();
        let seq = scripted(free_hard(), poses);
        let mesh = Mesh::cuboid(10.0, 10.0, 10.0);
        let mut driver = TrackerDriver::Echo;
        let report = eval_interaction(&seq, &mesh, &mut driver, &EvalConfig::default()).unwrap();
        assert_eq!(report.failures, 0);
        assert!(report.per_frame.iter().all(|r| r.err_t_mm == 0.0 && r.err_r_deg == 0.0));
    }

    #[test]
    fn too_short_sequence_rejected() {
        let seq = scripted(static_scenario(), vec![Pose::identity()]);
        let mesh = Mesh::cuboid(10.0, 10.0, 10.0);
        assert!(matches!(
            eval_stability(&seq, &mesh, &mut TrackerDriver::Echo),
            Err(HarnessError::SequenceTooShort { len: 1 })
        ));
    }

    #[test]
    fn bins_partition_all_speeds() {
        let edges = BinScheme::Methodology.translation_edges();
        for s in [0.0, 0.5, 10.0, 10.1, 39.9, 40.0, 40.1, 1000.0] {
            let idx = bin_index(edges, s);
            assert!(idx < edges.len());
        }
        assert_eq!(bin_index(edges, 0.0), 0);
        assert_eq!(bin_index(edges, 10.0), 0);
        assert_eq!(bin_index(edges, 10.01), 1);
        assert_eq!(bin_index(edges, 40.0), 3);
        assert_eq!(bin_index(edges, 41.0), 4); // overflow
    }

    #[test]
    fn aggregate_single_report_equals_own_means() {
        let errors = vec![1.0, 2.0, 3.0, 4.0];
        let report = run_failure_stream(&errors);
        let agg = aggregate(std::slice::from_ref(&report), BinScheme::Methodology);
        assert_eq!(agg.len(), 1);
        let t = agg[0].translation.as_ref().unwrap();
        assert!((t.mean - 2.5).abs() < 1e-12);
        assert_eq!(t.count, 4);
    }

    #[test]
    fn aggregate_weighted_mean_matches_hand_computation() {
        let a = run_failure_stream(&[2.0, 2.0]);
        let b = run_failure_stream(&[8.0, 8.0, 8.0, 8.0]);
        let agg = aggregate(&[a, b], BinScheme::Methodology);
        assert_eq!(agg.len(), 1);
        let t = agg[0].translation.as_ref().unwrap();
        // Pooled mean: (2*2 + 8*4) / 6 = 6.0.
        assert!((t.mean - 6.0).abs() < 1e-12);
    }

    #[test]
    fn empty_bins_are_absent() {
        // All speeds are zero (static GT), so only the first bin can appear.
        let report = run_failure_stream(&[1.0, 2.0]);
        let agg = aggregate(std::slice::from_ref(&report), BinScheme::Methodology);
        assert_eq!(agg[0].translation_bins.len(), 1);
        assert_eq!(agg[0].translation_bins[0].lo, 0.0);
    }

    #[test]
    fn scenario_labels_are_stable() {
        assert_eq!(
            ScenarioKind::Occlusion {
                percent: 30,
                occluder: OccluderOrientation::Horizontal
            }
            .label(),
            "occlusion/30/horizontal"
        );
        assert_eq!(
            ScenarioKind::Interaction {
                variant: InteractionVariant::FreeHard
            }
            .label(),
            "interaction/free_hard"
        );
        assert_eq!(
            ScenarioKind::Stability {
                placement: StabilityPlacement::Near
            }
            .label(),
            "stability/near"
        );
    }

    #[test]
    fn scenario_validation_rejects_bad_percent() {
        assert!(ScenarioKind::Occlusion {
            percent: 33,
            occluder: OccluderOrientation::Vertical
        }
        .validate()
        .is_err());
    }
}
