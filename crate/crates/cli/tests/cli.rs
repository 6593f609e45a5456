//! End-to-end runs of the `sixdof` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use sixdof_core::dataset::{save_ply_ascii, DatasetManifest, ManifestObject, ManifestSequence, ScenarioCounts};
use sixdof_core::harness::{ScenarioKind, StabilityPlacement};
use sixdof_core::Mesh;

fn sixdof(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sixdof"))
        .args(args)
        .current_dir(cwd)
        .env_remove("SIXDOF_SEED")
        .output()
        .expect("binary runs")
}

fn assert_success(out: &Output) {
    assert!(
        out.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn write_cuboid(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("cuboid.ply");
    save_ply_ascii(&Mesh::cuboid(180.0, 120.0, 70.0), &path).unwrap();
    path
}

#[test]
fn unknown_flag_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = sixdof(&["eval", "--definitely-not-a-flag"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_subcommand_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = sixdof(&[], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn gen_sequence_then_eval_echo_is_all_zero() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = write_cuboid(dir.path());
    let out = sixdof(
        &[
            "gen-sequence",
            "--mesh",
            mesh.to_str().unwrap(),
            "--object",
            "cuboid",
            "--traj",
            "static",
            "--frames",
            "8",
            "--out",
            "seq0",
            "--seed",
            "5",
        ],
        dir.path(),
    );
    assert_success(&out);
    assert!(dir.path().join("seq0/meta.json").exists());
    assert!(dir.path().join("seq0/spec.json").exists());
    assert!(dir.path().join("seq0/depth/000007.png").exists());

    let out = sixdof(
        &[
            "eval",
            "--scenario",
            "stability",
            "--tracker",
            "echo",
            "--sequence",
            "seq0",
            "--mesh",
            mesh.to_str().unwrap(),
            "--out",
            "report.json",
        ],
        dir.path(),
    );
    assert_success(&out);

    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["run"]["seed"], 0);
    let frames = report["reports"][0]["per_frame"].as_array().unwrap();
    assert_eq!(frames.len(), 7);
    for frame in frames {
        assert_eq!(frame["err_t_mm"].as_f64().unwrap(), 0.0);
        assert_eq!(frame["err_r_deg"].as_f64().unwrap(), 0.0);
    }
    assert!(dir.path().join("report.frames.csv").exists());

    // Pose trace for offline replay: one JSON line per evaluated frame.
    let trace = fs::read_to_string(dir.path().join("report.poses.jsonl")).unwrap();
    assert_eq!(trace.lines().count(), 7);
    let first: serde_json::Value = serde_json::from_str(trace.lines().next().unwrap()).unwrap();
    assert_eq!(first["pose"].as_array().unwrap().len(), 16);
}

#[test]
fn gen_pairs_is_byte_identical_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["a.jsonl", "b.jsonl"] {
        let out = sixdof(
            &[
                "gen-pairs", "--n", "200", "--delta-t", "30", "--delta-r", "15", "--seed", "17",
                "--out", name,
            ],
            dir.path(),
        );
        assert_success(&out);
    }
    let a = fs::read(dir.path().join("a.jsonl")).unwrap();
    let b = fs::read(dir.path().join("b.jsonl")).unwrap();
    assert_eq!(a, b);
    let ma = fs::read(dir.path().join("a.manifest.json")).unwrap();
    assert!(!ma.is_empty());

    let out = sixdof(
        &[
            "gen-pairs", "--n", "50", "--seed", "18", "--out", "c.jsonl",
        ],
        dir.path(),
    );
    assert_success(&out);
    let c = fs::read(dir.path().join("c.jsonl")).unwrap();
    assert_ne!(&a[..c.len().min(a.len())], &c[..]);
}

#[test]
fn calibrate_sphere_from_csv() {
    let dir = tempfile::tempdir().unwrap();
    let mut csv = String::from("timestamp_ms,x_mm,y_mm,z_mm\n");
    // Points of a radius-75 sphere at (100, -50, 900).
    let (cx, cy, cz, r) = (100.0f64, -50.0, 900.0, 75.0);
    for i in 0..64 {
        let theta = i as f64 * 0.41;
        let phi = (i as f64 * 0.13).cos().acos();
        csv.push_str(&format!(
            "{},{},{},{}\n",
            i as f64 * 10.0,
            cx + r * phi.sin() * theta.cos(),
            cy + r * phi.sin() * theta.sin(),
            cz + r * phi.cos()
        ));
    }
    fs::write(dir.path().join("probe.csv"), csv).unwrap();
    let out = sixdof(
        &[
            "calibrate-sphere",
            "--points",
            "probe.csv",
            "--out",
            "sphere.json",
        ],
        dir.path(),
    );
    assert_success(&out);
    let result: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("sphere.json")).unwrap()).unwrap();
    assert!((result["sphere"]["radius"].as_f64().unwrap() - 75.0).abs() < 1e-6);
}

#[test]
fn validate_detects_count_violation() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = write_cuboid(dir.path());

    let out = sixdof(
        &[
            "gen-sequence",
            "--mesh",
            mesh.to_str().unwrap(),
            "--object",
            "cuboid",
            "--traj",
            "static",
            "--frames",
            "3",
            "--out",
            "seqs/s0",
        ],
        dir.path(),
    );
    assert_success(&out);

    let manifest = DatasetManifest {
        objects: vec![ManifestObject {
            name: "cuboid".into(),
            mesh: "cuboid.ply".into(),
            max_dimension_mm: 227.0,
        }],
        sequences: vec![ManifestSequence {
            path: "seqs/s0".into(),
            scenario: ScenarioKind::Stability {
                placement: StabilityPlacement::Near,
            },
            object: "cuboid".into(),
        }],
        expected_per_object: ScenarioCounts {
            stability: 1,
            occlusion: 0,
            interaction: 0,
        },
    };
    manifest.save(&dir.path().join("manifest.json")).unwrap();
    let out = sixdof(&["validate", "--dataset", "."], dir.path());
    assert_success(&out);

    // Declare 26 expected sequences: violation, exit 1.
    let mut broken = manifest.clone();
    broken.expected_per_object.stability = 26;
    broken.save(&dir.path().join("manifest.json")).unwrap();
    let out = sixdof(&["validate", "--dataset", "."], dir.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("violation"));
}

#[test]
fn report_merges_eval_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = write_cuboid(dir.path());
    for (seq_name, report_name) in [("s0", "r0.json"), ("s1", "r1.json")] {
        assert_success(&sixdof(
            &[
                "gen-sequence",
                "--mesh",
                mesh.to_str().unwrap(),
                "--traj",
                "turntable",
                "--deg-per-frame",
                "1.0",
                "--frames",
                "6",
                "--out",
                seq_name,
            ],
            dir.path(),
        ));
        assert_success(&sixdof(
            &[
                "eval",
                "--tracker",
                "echo",
                "--sequence",
                seq_name,
                "--mesh",
                mesh.to_str().unwrap(),
                "--out",
                report_name,
            ],
            dir.path(),
        ));
    }
    let out = sixdof(
        &[
            "report", "--in", "r0.json", "r1.json", "--format", "csv",
        ],
        dir.path(),
    );
    assert_success(&out);
    let csv = String::from_utf8_lossy(&out.stdout);
    assert!(csv.contains("label,metric,bin,count,mean,median,p95"));
    // Two 6-frame echo runs pooled: 10 non-reset frames, zero mean error.
    let overall: Vec<&str> = csv
        .lines()
        .filter(|l| l.contains("translation_mm,overall"))
        .collect();
    assert_eq!(overall.len(), 1);
    assert!(overall[0].contains(",10,0.000000,"));
}

#[test]
fn inpaint_sequence_end_to_end() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = write_cuboid(dir.path());
    assert_success(&sixdof(
        &[
            "gen-sequence",
            "--mesh",
            mesh.to_str().unwrap(),
            "--traj",
            "static",
            "--frames",
            "2",
            "--out",
            "seq",
        ],
        dir.path(),
    ));
    // Markers on the cuboid's front face.
    fs::write(
        dir.path().join("markers.csv"),
        "x_mm,y_mm,z_mm\n-40.0,-20.0,-35.0\n30.0,25.0,-35.0\n",
    )
    .unwrap();
    let out = sixdof(
        &[
            "inpaint",
            "--sequence",
            "seq",
            "--mesh",
            mesh.to_str().unwrap(),
            "--markers",
            "markers.csv",
            "--sigma",
            "0.0",
            "--seed",
            "7",
            "--out",
            "seq_fixed",
        ],
        dir.path(),
    );
    assert_success(&out);
    let report: serde_json::Value =
        serde_json::from_slice(&fs::read(dir.path().join("seq_fixed/repair_report.json")).unwrap())
            .unwrap();
    assert_eq!(report["frames"].as_array().unwrap().len(), 2);
    assert_eq!(report["run"]["seed"], 7);
    assert!(dir.path().join("seq_fixed/depth/000001.png").exists());
}
