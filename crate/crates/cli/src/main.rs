//! `sixdof` — CLI for the 6-DOF tracking evaluation toolkit.
//!
//! Exit codes: 0 success, 1 domain error, 2 usage error. Every JSON output
//! embeds a reproducibility stanza (tool version, seed, config hash);
//! identical invocations produce byte-identical outputs.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser, Debug)]
#[command(name = "sixdof", version, about = "6-DOF object tracking evaluation toolkit")]
struct Cli {
    /// RNG seed; falls back to $SIXDOF_SEED, then 0.
    #[arg(long, global = true, env = "SIXDOF_SEED", default_value_t = 0)]
    seed: u64,

    /// Worker threads for parallel stages (default: available cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Fit a sphere to probe-tip marker positions (least squares + refine).
    CalibrateSphere(CalibrateSphereArgs),
    /// Recover a camera pose from 2D-3D correspondences (DLT + LM).
    CalibratePnp(CalibratePnpArgs),
    /// Estimate the mocap/camera time offset from a moving marker.
    Sync(SyncArgs),
    /// Remove marker artifacts from a sequence's depth frames.
    Inpaint(InpaintArgs),
    /// Generate pose-perturbation training pairs.
    GenPairs(GenPairsArgs),
    /// Generate a synthetic RGBD sequence with exact ground truth.
    GenSequence(GenSequenceArgs),
    /// Run a tracker through dataset sequences under the scenario protocols.
    Eval(EvalArgs),
    /// Merge evaluation reports into summary tables.
    Report(ReportArgs),
    /// Check a dataset manifest against the files on disk.
    Validate(ValidateArgs),
}

#[derive(Args, Debug)]
struct CalibrateSphereArgs {
    /// CSV of probe positions: timestamp_ms,x_mm,y_mm,z_mm.
    #[arg(long)]
    points: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct CalibratePnpArgs {
    /// CSV of correspondences: u_px,v_px,x_mm,y_mm,z_mm.
    #[arg(long)]
    correspondences: PathBuf,
    /// Intrinsics JSON (fx, fy, cx, cy, width, height).
    #[arg(long)]
    intrinsics: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct SyncArgs {
    /// Mocap track CSV: timestamp_ms,x_mm,y_mm,z_mm.
    #[arg(long)]
    mocap: PathBuf,
    /// Detection CSV: timestamp_ms,u_px,v_px.
    #[arg(long)]
    detections: PathBuf,
    #[arg(long)]
    intrinsics: PathBuf,
    /// World-to-camera pose JSON (16-number row-major matrix).
    #[arg(long)]
    extrinsics: PathBuf,
    /// Search window half-width in ms.
    #[arg(long, default_value_t = 500.0)]
    window_ms: f64,
    #[arg(long, default_value_t = 1.0)]
    step_ms: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct InpaintArgs {
    /// Sequence directory (depth/, poses.jsonl, meta.json).
    #[arg(long)]
    sequence: PathBuf,
    /// Object mesh (PLY or OBJ, mm).
    #[arg(long)]
    mesh: PathBuf,
    /// Marker positions CSV: x_mm,y_mm,z_mm (object frame).
    #[arg(long)]
    markers: PathBuf,
    /// Sigma of the Gaussian noise added to patched pixels (mm).
    #[arg(long, default_value_t = 2.0)]
    sigma: f64,
    /// Output directory; defaults to `<sequence>_inpainted`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Spherical,
    UniformComponent,
}

#[derive(Args, Debug)]
struct GenPairsArgs {
    /// Number of pairs.
    #[arg(long)]
    n: usize,
    /// Translation scale Delta-t in mm.
    #[arg(long, default_value_t = 30.0)]
    delta_t: f64,
    /// Rotation scale Delta-r in degrees.
    #[arg(long, default_value_t = 15.0)]
    delta_r: f64,
    #[arg(long, value_enum, default_value_t = ModeArg::Spherical)]
    mode: ModeArg,
    /// Object distance used for the base pose (mm).
    #[arg(long, default_value_t = 1000.0)]
    distance: f64,
    /// Output JSONL of {pose_gt, pose_pred, label} records.
    #[arg(long)]
    out: PathBuf,
    /// Also render depth crops (needs --mesh); writes PNG pairs here.
    #[arg(long)]
    render: bool,
    #[arg(long, required_if_eq("render", "true"))]
    mesh: Option<PathBuf>,
    #[arg(long)]
    crops: Option<PathBuf>,
    /// Crop side length in px.
    #[arg(long, default_value_t = 150)]
    crop_px: u32,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum TrajArg {
    Static,
    Turntable,
    Smooth,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum OccluderArg {
    Horizontal,
    Vertical,
}

#[derive(Args, Debug)]
struct GenSequenceArgs {
    #[arg(long)]
    mesh: PathBuf,
    #[arg(long, default_value = "object")]
    object: String,
    #[arg(long, value_enum)]
    traj: TrajArg,
    #[arg(long, default_value_t = 60)]
    frames: usize,
    /// Camera distance in mm.
    #[arg(long, default_value_t = 1000.0)]
    distance: f64,
    /// Turntable rotation per frame (degrees).
    #[arg(long, default_value_t = 2.0)]
    deg_per_frame: f64,
    /// Smooth-random translational speed (mm/frame).
    #[arg(long, default_value_t = 15.0)]
    speed_t: f64,
    /// Smooth-random rotational speed (deg/frame).
    #[arg(long, default_value_t = 6.0)]
    speed_r: f64,
    /// Occluded fraction, one of 0, 0.15, 0.30, 0.45, 0.60, 0.75.
    #[arg(long, default_value_t = 0.0)]
    occlusion: f64,
    #[arg(long, value_enum, default_value_t = OccluderArg::Horizontal)]
    occluder: OccluderArg,
    /// Depth noise sigma in mm.
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum ScenarioArg {
    Stability,
    Occlusion,
    Interaction,
    All,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum BinsArg {
    Methodology,
    Comparison,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[arg(long, value_enum, default_value_t = ScenarioArg::All)]
    scenario: ScenarioArg,
    /// Tracker: icp, echo (ground-truth oracle) or frozen.
    #[arg(long, default_value = "icp")]
    tracker: String,
    /// Dataset root containing manifest.json.
    #[arg(long, conflicts_with = "sequence")]
    dataset: Option<PathBuf>,
    /// Single sequence directory (requires --mesh).
    #[arg(long, requires = "mesh")]
    sequence: Option<PathBuf>,
    #[arg(long)]
    mesh: Option<PathBuf>,
    /// Ground-truth reset interval in frames.
    #[arg(long, default_value_t = 15)]
    reset_interval: usize,
    #[arg(long, value_enum, default_value_t = BinsArg::Methodology)]
    bins: BinsArg,
    /// Report JSON path; per-frame CSV and .dat tables go next to it.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Copy, Clone, Debug, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

#[derive(Args, Debug)]
struct ReportArgs {
    /// Evaluation report JSONs to merge.
    #[arg(long = "in", required = true, num_args = 1..)]
    inputs: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = FormatArg::Json)]
    format: FormatArg,
    #[arg(long, value_enum, default_value_t = BinsArg::Methodology)]
    bins: BinsArg,
    /// Output path; stdout when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ValidateArgs {
    /// Dataset root containing manifest.json.
    #[arg(long)]
    dataset: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(jobs) = cli.jobs {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(jobs.max(1))
            .build_global()
        {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    }
    let run = commands::RunInfo::new(cli.seed, &format!("{:?}", cli.command));
    let result = match cli.command {
        Command::CalibrateSphere(args) => commands::calibrate_sphere(&args, &run),
        Command::CalibratePnp(args) => commands::calibrate_pnp(&args, &run),
        Command::Sync(args) => commands::sync(&args, &run),
        Command::Inpaint(args) => commands::inpaint(&args, &run),
        Command::GenPairs(args) => commands::gen_pairs(&args, &run),
        Command::GenSequence(args) => commands::gen_sequence(&args, &run),
        Command::Eval(args) => commands::eval(&args, &run),
        Command::Report(args) => commands::report(&args, &run),
        Command::Validate(args) => commands::validate(&args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
