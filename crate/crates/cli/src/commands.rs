use std::collections::HashMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use sixdof_core::calib::{
    estimate_time_offset, fit_sphere, read_correspondences_csv, read_detections_csv,
    read_track_csv, solve_pnp, SyncConfig,
};
use sixdof_core::dataset::{
    load_mesh, load_sequence, save_sequence, validate_manifest, DatasetManifest, Sequence,
};
use sixdof_core::harness::{
    aggregate, BinScheme, EvalConfig, EvalReport, ScenarioAggregate, ScenarioKind, TrackerDriver,
};
use sixdof_core::repair::{repair_frame, MarkerSet, RepairReport};
use sixdof_core::rng::derive_stream_seed;
use sixdof_core::sampler::{
    generate_pairs, render_pair_crops, PerturbationConfig, PerturbationMode, DEFAULT_CROP_SCALE,
};
use sixdof_core::synth::{generate_sequence, OccluderSpec, TrajectoryKind, TrajectorySpec};
use sixdof_core::tracking::{IcpConfig, IcpTracker};
use sixdof_core::{Intrinsics, Mesh, Pose};

use crate::{
    BinsArg, CalibratePnpArgs, CalibrateSphereArgs, EvalArgs, FormatArg, GenPairsArgs,
    GenSequenceArgs, InpaintArgs, ModeArg, OccluderArg, ReportArgs, ScenarioArg, SyncArgs,
    TrajArg, ValidateArgs,
};

/// Reproducibility stanza embedded in every JSON output.
#[derive(Debug, Clone, Serialize)]
pub struct RunInfo {
    pub version: &'static str,
    pub seed: u64,
    pub config_hash: String,
}

impl RunInfo {
    pub fn new(seed: u64, config_debug: &str) -> RunInfo {
        let mut hasher = Sha256::new();
        hasher.update(config_debug.as_bytes());
        hasher.update(seed.to_le_bytes());
        RunInfo {
            version: env!("CARGO_PKG_VERSION"),
            seed,
            config_hash: hex_string(&hasher.finalize()),
        }
    }
}

fn hex_string(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Serialize)]
struct Output<'a, T: Serialize> {
    run: &'a RunInfo,
    #[serde(flatten)]
    body: T,
}

fn write_json<T: Serialize>(path: &Path, run: &RunInfo, body: T) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let out = Output { run, body };
    fs::write(path, serde_json::to_vec_pretty(&out)?)
        .with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn load_intrinsics(path: &Path) -> Result<Intrinsics> {
    let k: Intrinsics = serde_json::from_slice(&fs::read(path)?)
        .with_context(|| format!("parsing intrinsics {}", path.display()))?;
    Ok(k)
}

fn load_pose(path: &Path) -> Result<Pose> {
    let p: Pose = serde_json::from_slice(&fs::read(path)?)
        .with_context(|| format!("parsing pose {}", path.display()))?;
    Ok(p)
}

pub fn calibrate_sphere(args: &CalibrateSphereArgs, run: &RunInfo) -> Result<()> {
    let track = read_track_csv(&args.points)?;
    let points: Vec<_> = track.iter().map(|m| m.position).collect();
    let fit = fit_sphere(&points)?;
    #[derive(Serialize)]
    struct Body {
        sphere: sixdof_core::calib::SphereFit,
        points_used: usize,
    }
    write_json(
        &args.out,
        run,
        Body {
            sphere: fit,
            points_used: points.len(),
        },
    )?;
    println!(
        "sphere: centre ({:.3}, {:.3}, {:.3}) mm, radius {:.3} mm, rms {:.4} mm",
        fit.center.x, fit.center.y, fit.center.z, fit.radius, fit.rms_residual
    );
    Ok(())
}

pub fn calibrate_pnp(args: &CalibratePnpArgs, run: &RunInfo) -> Result<()> {
    let correspondences = read_correspondences_csv(&args.correspondences)?;
    let k = load_intrinsics(&args.intrinsics)?;
    let solution = solve_pnp(&correspondences, &k)?;
    write_json(&args.out, run, solution)?;
    println!(
        "pnp: {} points, mean reprojection {:.4} px, {} iterations",
        correspondences.len(),
        solution.mean_reprojection_px,
        solution.iterations
    );
    Ok(())
}

pub fn sync(args: &SyncArgs, run: &RunInfo) -> Result<()> {
    let mocap = read_track_csv(&args.mocap)?;
    let detections = read_detections_csv(&args.detections)?;
    let k = load_intrinsics(&args.intrinsics)?;
    let extrinsics = load_pose(&args.extrinsics)?;
    let config = SyncConfig {
        window_ms: args.window_ms,
        step_ms: args.step_ms,
    };
    let result = estimate_time_offset(&mocap, &detections, &k, &extrinsics, &config)?;
    write_json(&args.out, run, result)?;
    println!(
        "sync: delta_t = {:.3} ms, residual {:.4} px",
        result.delta_t_ms, result.residual_px
    );
    Ok(())
}

fn read_markers_csv(path: &Path) -> Result<MarkerSet> {
    let mut reader = csv::Reader::from_path(path)?;
    let mut positions = Vec::new();
    for record in reader.deserialize() {
        let (x, y, z): (f64, f64, f64) = record?;
        positions.push(nalgebra::Vector3::new(x, y, z));
    }
    Ok(MarkerSet::with_default_diameter(positions)?)
}

pub fn inpaint(args: &InpaintArgs, run: &RunInfo) -> Result<()> {
    use rayon::prelude::*;

    let seq = load_sequence(&args.sequence)?;
    let mesh = load_mesh(&args.mesh)?;
    let markers = read_markers_csv(&args.markers)?;
    let out_dir = args.out.clone().unwrap_or_else(|| {
        let mut name = args.sequence.file_name().unwrap_or_default().to_os_string();
        name.push("_inpainted");
        args.sequence.with_file_name(name)
    });

    let results: Vec<(sixdof_core::DepthImage, RepairReport)> = seq
        .frames
        .par_iter()
        .enumerate()
        .map(|(i, frame)| {
            repair_frame(
                &frame.depth,
                &frame.gt_pose,
                &mesh,
                &markers,
                &seq.intrinsics,
                args.sigma,
                derive_stream_seed(run.seed, i as u64),
                None,
            )
            .map_err(|e| anyhow!("frame {i}: {e}"))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut repaired = seq.clone();
    let mut frame_reports = Vec::with_capacity(results.len());
    for (frame, (depth, report)) in repaired.frames.iter_mut().zip(results) {
        frame.depth = depth;
        frame_reports.push(report);
    }
    save_sequence(&repaired, &out_dir)?;

    #[derive(Serialize)]
    struct Body {
        sigma_mm: f64,
        frames: Vec<RepairReport>,
        total_pixels_patched: usize,
        mean_fraction_object_pixels_patched: f64,
    }
    let total: usize = frame_reports.iter().map(|r| r.pixels_patched).sum();
    let mean_fraction = frame_reports
        .iter()
        .map(|r| r.fraction_object_pixels_patched)
        .sum::<f64>()
        / frame_reports.len().max(1) as f64;
    write_json(
        &out_dir.join("repair_report.json"),
        run,
        Body {
            sigma_mm: args.sigma,
            total_pixels_patched: total,
            mean_fraction_object_pixels_patched: mean_fraction,
            frames: frame_reports,
        },
    )?;
    println!(
        "inpainted {} frames into {} ({} pixels patched, mean object fraction {:.4})",
        repaired.frames.len(),
        out_dir.display(),
        total,
        mean_fraction
    );
    Ok(())
}

pub fn gen_pairs(args: &GenPairsArgs, run: &RunInfo) -> Result<()> {
    let config = PerturbationConfig {
        delta_t_mm: args.delta_t,
        delta_r_deg: args.delta_r,
        mode: match args.mode {
            ModeArg::Spherical => PerturbationMode::Spherical,
            ModeArg::UniformComponent => PerturbationMode::UniformComponent,
        },
    };
    let base = vec![Pose::from_translation(0.0, 0.0, args.distance)];

    let mesh = if args.render {
        let path = args
            .mesh
            .as_ref()
            .ok_or_else(|| anyhow!("--render requires --mesh"))?;
        Some(load_mesh(path)?)
    } else {
        None
    };
    let crops_dir = args
        .crops
        .clone()
        .unwrap_or_else(|| args.out.with_extension("crops"));
    if mesh.is_some() {
        fs::create_dir_all(&crops_dir)?;
    }

    if let Some(parent) = args.out.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let mut out = std::io::BufWriter::new(fs::File::create(&args.out)?);
    for (i, pair) in generate_pairs(&base, &config, args.n, run.seed).enumerate() {
        serde_json::to_writer(&mut out, &pair)?;
        out.write_all(b"\n")?;
        if let Some(mesh) = &mesh {
            let (pred, obs) = render_pair_crops(mesh, &pair, args.crop_px, DEFAULT_CROP_SCALE);
            pred.save_png16(&crops_dir.join(format!("{i:06}_pred.png")))?;
            obs.save_png16(&crops_dir.join(format!("{i:06}_obs.png")))?;
        }
    }
    out.flush()?;

    #[derive(Serialize)]
    struct Body {
        config: PerturbationConfig,
        count: usize,
        base_distance_mm: f64,
        rendered_crops: bool,
    }
    let manifest_path = args.out.with_extension("manifest.json");
    write_json(
        &manifest_path,
        run,
        Body {
            config,
            count: args.n,
            base_distance_mm: args.distance,
            rendered_crops: mesh.is_some(),
        },
    )?;
    println!(
        "wrote {} pairs to {} (manifest {})",
        args.n,
        args.out.display(),
        manifest_path.display()
    );
    Ok(())
}

pub fn gen_sequence(args: &GenSequenceArgs, run: &RunInfo) -> Result<()> {
    let mesh = load_mesh(&args.mesh)?;
    let kind = match args.traj {
        TrajArg::Static => TrajectoryKind::Static,
        TrajArg::Turntable => TrajectoryKind::Turntable {
            deg_per_frame: args.deg_per_frame,
        },
        TrajArg::Smooth => TrajectoryKind::SmoothRandom {
            speed_t_mm_per_frame: args.speed_t,
            speed_r_deg_per_frame: args.speed_r,
        },
    };
    let spec = TrajectorySpec {
        kind,
        length: args.frames,
        camera_distance_mm: args.distance,
    };
    let occluder = if args.occlusion > 0.0 {
        let occ = OccluderSpec {
            fraction: args.occlusion,
            orientation: match args.occluder {
                OccluderArg::Horizontal => {
                    sixdof_core::harness::OccluderOrientation::Horizontal
                }
                OccluderArg::Vertical => sixdof_core::harness::OccluderOrientation::Vertical,
            },
        };
        occ.validate().map_err(|e| anyhow!(e))?;
        Some(occ)
    } else {
        None
    };

    let k = Intrinsics::vga_default();
    let seq = generate_sequence(
        &mesh,
        &args.object,
        &spec,
        occluder,
        args.noise,
        &k,
        run.seed,
    );
    save_sequence(&seq, &args.out)?;

    #[derive(Serialize)]
    struct Body {
        object: String,
        spec: TrajectorySpec,
        occluder: Option<OccluderSpec>,
        noise_sigma_mm: f64,
        intrinsics: Intrinsics,
    }
    write_json(
        &args.out.join("spec.json"),
        run,
        Body {
            object: args.object.clone(),
            spec,
            occluder,
            noise_sigma_mm: args.noise,
            intrinsics: k,
        },
    )?;
    println!(
        "generated {} frames ({}) into {}",
        seq.frames.len(),
        seq.scenario.label(),
        args.out.display()
    );
    Ok(())
}

fn make_driver(name: &str, seed: u64) -> Result<TrackerDriver> {
    if name == "icp" {
        return Ok(TrackerDriver::Boxed(Box::new(IcpTracker::new(IcpConfig {
            seed,
            ..IcpConfig::default()
        }))));
    }
    TrackerDriver::by_name(name).ok_or_else(|| anyhow!("unknown tracker '{name}'"))
}

fn scenario_selected(scenario: &ScenarioKind, filter: ScenarioArg) -> bool {
    match filter {
        ScenarioArg::All => true,
        ScenarioArg::Stability => scenario.family() == "stability",
        ScenarioArg::Occlusion => scenario.family() == "occlusion",
        ScenarioArg::Interaction => scenario.family() == "interaction",
    }
}

pub fn eval(args: &EvalArgs, run: &RunInfo) -> Result<()> {
    // Gather (sequence, mesh) jobs.
    let mut sequences: Vec<(Sequence, String)> = Vec::new(); // (seq, mesh key)
    let mut meshes: HashMap<String, Mesh> = HashMap::new();

    if let Some(root) = &args.dataset {
        let manifest = DatasetManifest::load(&root.join("manifest.json"))?;
        for obj in &manifest.objects {
            meshes.insert(obj.name.clone(), load_mesh(&root.join(&obj.mesh))?);
        }
        for entry in &manifest.sequences {
            if !scenario_selected(&entry.scenario, args.scenario) {
                continue;
            }
            let seq = load_sequence(&root.join(&entry.path))
                .with_context(|| format!("loading {}", entry.path.display()))?;
            if !meshes.contains_key(&seq.object_id) {
                bail!("sequence {} references unknown object", entry.path.display());
            }
            sequences.push((seq, entry.object.clone()));
        }
    } else if let Some(seq_dir) = &args.sequence {
        let mesh_path = args.mesh.as_ref().expect("clap enforces --mesh");
        let seq = load_sequence(seq_dir)?;
        if !scenario_selected(&seq.scenario, args.scenario) {
            bail!(
                "sequence scenario {} does not match --scenario filter",
                seq.scenario.label()
            );
        }
        meshes.insert(seq.object_id.clone(), load_mesh(mesh_path)?);
        sequences.push((seq.clone(), seq.object_id.clone()));
    } else {
        bail!("either --dataset or --sequence is required");
    }
    if sequences.is_empty() {
        bail!("no sequences matched the scenario filter");
    }

    // Fail fast on an unknown tracker name before spawning workers.
    make_driver(&args.tracker, run.seed)?;

    let cfg = EvalConfig {
        reset_interval: args.reset_interval,
        ..EvalConfig::default()
    };
    let jobs: Vec<(&Sequence, &Mesh)> = sequences
        .iter()
        .map(|(seq, key)| (seq, &meshes[key]))
        .collect();
    let results = sixdof_core::harness::evaluate_all(
        &jobs,
        || make_driver(&args.tracker, run.seed).expect("tracker name validated above"),
        &cfg,
    );

    let mut reports: Vec<EvalReport> = Vec::with_capacity(results.len());
    for (result, (seq, _)) in results.into_iter().zip(&sequences) {
        reports.push(result.with_context(|| format!("evaluating {}", seq.scenario.label()))?);
    }
    let scheme = bin_scheme(args.bins);
    let aggregates = aggregate(&reports, scheme);

    #[derive(Serialize)]
    struct Body<'a> {
        tracker: &'a str,
        config: &'a EvalConfig,
        bin_scheme: BinScheme,
        aggregates: &'a [ScenarioAggregate],
        reports: &'a [EvalReport],
    }
    write_json(
        &args.out,
        run,
        Body {
            tracker: &args.tracker,
            config: &cfg,
            bin_scheme: scheme,
            aggregates: &aggregates,
            reports: &reports,
        },
    )?;
    write_frames_csv(&frames_csv_path(&args.out), &reports)?;
    write_pose_trace(&args.out.with_extension("poses.jsonl"), &reports)?;
    write_bin_tables(&args.out, &aggregates)?;

    for agg in &aggregates {
        let t = agg
            .translation
            .as_ref()
            .map(|s| format!("{:.2} mm", s.mean))
            .unwrap_or_else(|| "-".into());
        let r = agg
            .rotation
            .as_ref()
            .map(|s| format!("{:.2} deg", s.mean))
            .unwrap_or_else(|| "-".into());
        println!(
            "{:<32} frames {:>6}  mean dt {:>10}  mean dR {:>10}  failures {}",
            agg.label, agg.frames, t, r, agg.failures
        );
    }
    Ok(())
}

fn bin_scheme(arg: BinsArg) -> BinScheme {
    match arg {
        BinsArg::Methodology => BinScheme::Methodology,
        BinsArg::Comparison => BinScheme::Comparison,
    }
}

fn frames_csv_path(out: &Path) -> PathBuf {
    out.with_extension("frames.csv")
}

fn write_frames_csv(path: &Path, reports: &[EvalReport]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record([
        "object",
        "scenario",
        "tracker",
        "frame_index",
        "err_t_mm",
        "err_r_deg",
        "gt_speed_t_mm",
        "gt_speed_r_deg",
        "was_reset",
        "low_overlap",
    ])?;
    for report in reports {
        let label = report.scenario.label();
        for rec in &report.per_frame {
            writer.write_record([
                report.object_id.as_str(),
                label.as_str(),
                report.tracker.as_str(),
                &rec.frame_index.to_string(),
                &format!("{:.6}", rec.err_t_mm),
                &format!("{:.6}", rec.err_r_deg),
                &format!("{:.6}", rec.gt_speed_t_mm),
                &format!("{:.6}", rec.gt_speed_r_deg),
                &(rec.was_reset as u8).to_string(),
                &(rec.low_overlap as u8).to_string(),
            ])?;
        }
    }
    writer.flush()?;
    Ok(())
}

/// Per-frame tracker pose trace for offline replay, one JSON record per
/// line.
fn write_pose_trace(path: &Path, reports: &[EvalReport]) -> Result<()> {
    #[derive(Serialize)]
    struct TraceLine<'a> {
        object: &'a str,
        scenario: String,
        tracker: &'a str,
        frame_index: usize,
        pose: Pose,
        was_reset: bool,
    }
    let mut out = std::io::BufWriter::new(fs::File::create(path)?);
    for report in reports {
        let scenario = report.scenario.label();
        for rec in &report.per_frame {
            serde_json::to_writer(
                &mut out,
                &TraceLine {
                    object: &report.object_id,
                    scenario: scenario.clone(),
                    tracker: &report.tracker,
                    frame_index: rec.frame_index,
                    pose: rec.est_pose,
                    was_reset: rec.was_reset,
                },
            )?;
            out.write_all(b"\n")?;
        }
    }
    out.flush()?;
    Ok(())
}

/// Gnuplot-ready bin tables: one `.dat` per scenario label and metric.
fn write_bin_tables(out: &Path, aggregates: &[ScenarioAggregate]) -> Result<()> {
    let stem = out.file_stem().and_then(|s| s.to_str()).unwrap_or("report");
    let dir = out
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .join(format!("{stem}_bins"));
    fs::create_dir_all(&dir)?;
    for agg in aggregates {
        let safe = agg.label.replace('/', "_");
        for (metric, bins) in [
            ("translation", &agg.translation_bins),
            ("rotation", &agg.rotation_bins),
        ] {
            if bins.is_empty() {
                continue;
            }
            let mut body = String::from("# bin_lo bin_hi count mean median p95\n");
            for bin in bins {
                body.push_str(&format!(
                    "{} {} {} {:.6} {:.6} {:.6}\n",
                    bin.lo,
                    bin.hi.map(|h| h.to_string()).unwrap_or_else(|| "inf".into()),
                    bin.stats.count,
                    bin.stats.mean,
                    bin.stats.median,
                    bin.stats.p95
                ));
            }
            fs::write(dir.join(format!("{safe}_{metric}.dat")), body)?;
        }
    }
    Ok(())
}

pub fn report(args: &ReportArgs, run: &RunInfo) -> Result<()> {
    #[derive(serde::Deserialize)]
    struct EvalFile {
        reports: Vec<EvalReport>,
    }
    let mut reports = Vec::new();
    for input in &args.inputs {
        let file: EvalFile = serde_json::from_slice(&fs::read(input)?)
            .with_context(|| format!("parsing {}", input.display()))?;
        reports.extend(file.reports);
    }
    if reports.is_empty() {
        bail!("no reports found in inputs");
    }
    let scheme = bin_scheme(args.bins);
    let aggregates = aggregate(&reports, scheme);

    match args.format {
        FormatArg::Json => {
            #[derive(Serialize)]
            struct Body<'a> {
                bin_scheme: BinScheme,
                aggregates: &'a [ScenarioAggregate],
            }
            let body = Body {
                bin_scheme: scheme,
                aggregates: &aggregates,
            };
            match &args.out {
                Some(path) => write_json(path, run, body)?,
                None => println!(
                    "{}",
                    serde_json::to_string_pretty(&Output { run, body })?
                ),
            }
        }
        FormatArg::Csv => {
            let mut rows = String::from("label,metric,bin,count,mean,median,p95\n");
            for agg in &aggregates {
                for (metric, overall, bins) in [
                    ("translation_mm", &agg.translation, &agg.translation_bins),
                    ("rotation_deg", &agg.rotation, &agg.rotation_bins),
                ] {
                    if let Some(stats) = overall {
                        rows.push_str(&format!(
                            "{},{},overall,{},{:.6},{:.6},{:.6}\n",
                            agg.label, metric, stats.count, stats.mean, stats.median, stats.p95
                        ));
                    }
                    for bin in bins.iter() {
                        let hi = bin.hi.map(|h| h.to_string()).unwrap_or_else(|| "inf".into());
                        rows.push_str(&format!(
                            "{},{},({}..{}],{},{:.6},{:.6},{:.6}\n",
                            agg.label,
                            metric,
                            bin.lo,
                            hi,
                            bin.stats.count,
                            bin.stats.mean,
                            bin.stats.median,
                            bin.stats.p95
                        ));
                    }
                }
                rows.push_str(&format!(
                    "{},failures,total,{},,,\n",
                    agg.label, agg.failures
                ));
            }
            match &args.out {
                Some(path) => fs::write(path, rows)?,
                None => print!("{rows}"),
            }
        }
    }
    Ok(())
}

pub fn validate(args: &ValidateArgs) -> Result<()> {
    let manifest = DatasetManifest::load(&args.dataset.join("manifest.json"))?;
    let violations = validate_manifest(&manifest, &args.dataset);
    if violations.is_empty() {
        println!(
            "ok: {} objects, {} sequences",
            manifest.objects.len(),
            manifest.sequences.len()
        );
        return Ok(());
    }
    for v in &violations {
        println!("violation: {v}");
    }
    bail!("{} manifest violation(s)", violations.len());
}
