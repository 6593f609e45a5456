//! On-disk dataset formats: meshes (PLY/OBJ), sequence directories and the
//! dataset manifest.
//!
//! A sequence directory holds `depth/%06d.png` (16-bit mm), optional
//! `rgb/%06d.png`, `poses.jsonl` (one 4x4 row-major matrix per line) and
//! `meta.json` (object, scenario, intrinsics, timestamps, optional markers).

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use image::RgbImage;
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::camera::Intrinsics;
use crate::depth::DepthImage;
use crate::harness::ScenarioKind;
use crate::mesh::Mesh;
use crate::repair::MarkerSet;
use crate::se3::Pose;

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("parse error in {path}: {message}")]
    ParseError { path: PathBuf, message: String },
    #[error("mesh has no triangles: {0}")]
    EmptyMesh(PathBuf),
    #[error("missing frame data: {0}")]
    MissingFrame(String),
    #[error("{poses} poses for {frames} depth frames")]
    PoseCountMismatch { poses: usize, frames: usize },
    #[error("invalid sequence: {0}")]
    InvalidSequence(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

fn parse_err(path: &Path, message: impl Into<String>) -> DatasetError {
    DatasetError::ParseError {
        path: path.to_path_buf(),
        message: message.into(),
    }
}

/// One RGBD observation with its ground-truth pose. Trackers never see this
/// directly; the harness hands them [`ObservedFrame`].
#[derive(Debug, Clone)]
pub struct Frame {
    pub depth: DepthImage,
    pub rgb: Option<RgbImage>,
    pub timestamp_ms: f64,
    pub gt_pose: Pose,
}

impl Frame {
    /// Ground-truth-stripped view for trackers.
    pub fn observed<'a>(&'a self, intrinsics: &'a Intrinsics) -> ObservedFrame<'a> {
        ObservedFrame {
            depth: &self.depth,
            rgb: self.rgb.as_ref(),
            timestamp_ms: self.timestamp_ms,
            intrinsics,
        }
    }
}

/// What a tracker is allowed to read: no ground truth.
#[derive(Debug, Clone, Copy)]
pub struct ObservedFrame<'a> {
    pub depth: &'a DepthImage,
    pub rgb: Option<&'a RgbImage>,
    pub timestamp_ms: f64,
    pub intrinsics: &'a Intrinsics,
}

#[derive(Debug, Clone)]
pub struct Sequence {
    pub object_id: String,
    pub scenario: ScenarioKind,
    pub intrinsics: Intrinsics,
    pub frames: Vec<Frame>,
    pub markers: Option<MarkerSet>,
}

impl Sequence {
    pub fn new(
        object_id: String,
        scenario: ScenarioKind,
        intrinsics: Intrinsics,
        frames: Vec<Frame>,
        markers: Option<MarkerSet>,
    ) -> Result<Self, DatasetError> {
        if frames.is_empty() {
            return Err(DatasetError::InvalidSequence("no frames".into()));
        }
        for (i, pair) in frames.windows(2).enumerate() {
            if pair[1].timestamp_ms <= pair[0].timestamp_ms {
                return Err(DatasetError::InvalidSequence(format!(
                    "timestamps not monotone at frame {}",
                    i + 1
                )));
            }
        }
        for (i, f) in frames.iter().enumerate() {
            if f.depth.width() != intrinsics.width || f.depth.height() != intrinsics.height {
                return Err(DatasetError::InvalidSequence(format!(
                    "frame {i} depth is {}x{}, intrinsics say {}x{}",
                    f.depth.width(),
                    f.depth.height(),
                    intrinsics.width,
                    intrinsics.height
                )));
            }
        }
        Ok(Sequence {
            object_id,
            scenario,
            intrinsics,
            frames,
            markers,
        })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct SequenceMeta {
    object_id: String,
    scenario: ScenarioKind,
    intrinsics: Intrinsics,
    timestamps_ms: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    markers: Option<MarkerSet>,
}

pub fn save_sequence(seq: &Sequence, dir: &Path) -> Result<(), DatasetError> {
    fs::create_dir_all(dir.join("depth"))?;
    let has_rgb = seq.frames.iter().any(|f| f.rgb.is_some());
    if has_rgb {
        fs::create_dir_all(dir.join("rgb"))?;
    }
    let meta = SequenceMeta {
        object_id: seq.object_id.clone(),
        scenario: seq.scenario.clone(),
        intrinsics: seq.intrinsics,
        timestamps_ms: seq.frames.iter().map(|f| f.timestamp_ms).collect(),
        markers: seq.markers.clone(),
    };
    fs::write(dir.join("meta.json"), serde_json::to_vec_pretty(&meta).unwrap())?;

    let mut poses = fs::File::create(dir.join("poses.jsonl"))?;
    for frame in &seq.frames {
        serde_json::to_writer(&mut poses, &frame.gt_pose).unwrap();
        poses.write_all(b"\n")?;
    }
    for (i, frame) in seq.frames.iter().enumerate() {
        frame
            .depth
            .save_png16(&dir.join(format!("depth/{i:06}.png")))
            .map_err(|e| parse_err(dir, e.to_string()))?;
        if let Some(rgb) = &frame.rgb {
            rgb.save(dir.join(format!("rgb/{i:06}.png")))
                .map_err(|e| parse_err(dir, e.to_string()))?;
        }
    }
    Ok(())
}

pub fn load_sequence(dir: &Path) -> Result<Sequence, DatasetError> {
    let meta_path = dir.join("meta.json");
    if !meta_path.exists() {
        return Err(DatasetError::MissingFrame(format!(
            "{} has no meta.json",
            dir.display()
        )));
    }
    let meta: SequenceMeta = serde_json::from_slice(&fs::read(&meta_path)?)
        .map_err(|e| parse_err(&meta_path, e.to_string()))?;

    let poses_path = dir.join("poses.jsonl");
    if !poses_path.exists() {
        return Err(DatasetError::PoseCountMismatch {
            poses: 0,
            frames: meta.timestamps_ms.len(),
        });
    }
    let mut poses = Vec::new();
    for line in BufReader::new(fs::File::open(&poses_path)?).lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        poses.push(
            serde_json::from_str::<Pose>(&line).map_err(|e| parse_err(&poses_path, e.to_string()))?,
        );
    }
    let n = meta.timestamps_ms.len();
    if poses.len() != n {
        return Err(DatasetError::PoseCountMismatch {
            poses: poses.len(),
            frames: n,
        });
    }

    let mut frames = Vec::with_capacity(n);
    for (i, (&timestamp_ms, gt_pose)) in meta.timestamps_ms.iter().zip(poses).enumerate() {
        let depth_path = dir.join(format!("depth/{i:06}.png"));
        if !depth_path.exists() {
            return Err(DatasetError::MissingFrame(depth_path.display().to_string()));
        }
        let depth = DepthImage::load_png16(&depth_path)
            .map_err(|e| parse_err(&depth_path, e.to_string()))?;
        let rgb_path = dir.join(format!("rgb/{i:06}.png"));
        let rgb = if rgb_path.exists() {
            Some(
                image::open(&rgb_path)
                    .map_err(|e| parse_err(&rgb_path, e.to_string()))?
                    .to_rgb8(),
            )
        } else {
            None
        };
        frames.push(Frame {
            depth,
            rgb,
            timestamp_ms,
            gt_pose,
        });
    }
    Sequence::new(
        meta.object_id,
        meta.scenario,
        meta.intrinsics,
        frames,
        meta.markers,
    )
}

/// Loads an ASCII/binary-little-endian PLY or an OBJ, by extension.
pub fn load_mesh(path: &Path) -> Result<Mesh, DatasetError> {
    let ext = path
        .extension()
        .and_then(|e| e.to_str())
        .map(|e| e.to_ascii_lowercase())
        .unwrap_or_default();
    match ext.as_str() {
        "ply" => load_ply(path),
        "obj" => load_obj(path),
        other => Err(parse_err(path, format!("unsupported mesh format '{other}'"))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum PlyType {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl PlyType {
    fn parse(s: &str) -> Option<PlyType> {
        Some(match s {
            "char" | "int8" => PlyType::I8,
            "uchar" | "uint8" => PlyType::U8,
            "short" | "int16" => PlyType::I16,
            "ushort" | "uint16" => PlyType::U16,
            "int" | "int32" => PlyType::I32,
            "uint" | "uint32" => PlyType::U32,
            "float" | "float32" => PlyType::F32,
            "double" | "float64" => PlyType::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            PlyType::I8 | PlyType::U8 => 1,
            PlyType::I16 | PlyType::U16 => 2,
            PlyType::I32 | PlyType::U32 | PlyType::F32 => 4,
            PlyType::F64 => 8,
        }
    }

    fn read_le(self, bytes: &[u8]) -> f64 {
        match self {
            PlyType::I8 => bytes[0] as i8 as f64,
            PlyType::U8 => bytes[0] as f64,
            PlyType::I16 => i16::from_le_bytes([bytes[0], bytes[1]]) as f64,
            PlyType::U16 => u16::from_le_bytes([bytes[0], bytes[1]]) as f64,
            PlyType::I32 => i32::from_le_bytes(bytes[..4].try_into().unwrap()) as f64,
            PlyType::U32 => u32::from_le_bytes(bytes[..4].try_into().unwrap()) as f64,
            PlyType::F32 => f32::from_le_bytes(bytes[..4].try_into().unwrap()) as f64,
            PlyType::F64 => f64::from_le_bytes(bytes[..8].try_into().unwrap()),
        }
    }
}

#[derive(Debug)]
enum PlyProperty {
    Scalar { name: String, ty: PlyType },
    List { name: String, count: PlyType, item: PlyType },
}

#[derive(Debug)]
struct PlyElement {
    name: String,
    count: usize,
    properties: Vec<PlyProperty>,
}

fn load_ply(path: &Path) -> Result<Mesh, DatasetError> {
    let bytes = fs::read(path)?;
    let header_end = find_header_end(&bytes).ok_or_else(|| parse_err(path, "no end_header"))?;
    let header = std::str::from_utf8(&bytes[..header_end])
        .map_err(|_| parse_err(path, "header is not UTF-8"))?;

    let mut lines = header.lines();
    if lines.next().map(str::trim) != Some("ply") {
        return Err(parse_err(path, "missing 'ply' magic"));
    }
    let mut binary = false;
    let mut elements: Vec<PlyElement> = Vec::new();
    for line in lines {
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("format") => match tok.next() {
                Some("ascii") => binary = false,
                Some("binary_little_endian") => binary = true,
                other => {
                    return Err(parse_err(path, format!("unsupported format {other:?}")));
                }
            },
            Some("comment") | Some("obj_info") | None => {}
            Some("element") => {
                let name = tok.next().ok_or_else(|| parse_err(path, "element name"))?;
                let count: usize = tok
                    .next()
                    .and_then(|c| c.parse().ok())
                    .ok_or_else(|| parse_err(path, "element count"))?;
                elements.push(PlyElement {
                    name: name.to_string(),
                    count,
                    properties: Vec::new(),
                });
            }
            Some("property") => {
                let element = elements
                    .last_mut()
                    .ok_or_else(|| parse_err(path, "property before element"))?;
                let first = tok.next().ok_or_else(|| parse_err(path, "property type"))?;
                if first == "list" {
                    let count = PlyType::parse(tok.next().unwrap_or(""))
                        .ok_or_else(|| parse_err(path, "list count type"))?;
                    let item = PlyType::parse(tok.next().unwrap_or(""))
                        .ok_or_else(|| parse_err(path, "list item type"))?;
                    let name = tok.next().ok_or_else(|| parse_err(path, "list name"))?;
                    element.properties.push(PlyProperty::List {
                        name: name.to_string(),
                        count,
                        item,
                    });
                } else {
                    let ty = PlyType::parse(first)
                        .ok_or_else(|| parse_err(path, format!("property type '{first}'")))?;
                    let name = tok.next().ok_or_else(|| parse_err(path, "property name"))?;
                    element.properties.push(PlyProperty::Scalar {
                        name: name.to_string(),
                        ty,
                    });
                }
            }
            Some("end_header") => break,
            Some(other) => {
                return Err(parse_err(path, format!("unknown header keyword '{other}'")));
            }
        }
    }

    let body = &bytes[header_end..];
    let mut vertices: Vec<Vector3<f64>> = Vec::new();
    let mut colors: Vec<[u8; 3]> = Vec::new();
    let mut triangles: Vec<[u32; 3]> = Vec::new();

    if binary {
        let mut cursor = 0usize;
        for element in &elements {
            for _ in 0..element.count {
                let mut values: Vec<(String, f64)> = Vec::new();
                let mut list: Vec<f64> = Vec::new();
                for prop in &element.properties {
                    match prop {
                        PlyProperty::Scalar { name, ty } => {
                            let size = ty.size();
                            if cursor + size > body.len() {
                                return Err(parse_err(path, "truncated binary body"));
                            }
                            values.push((name.clone(), ty.read_le(&body[cursor..])));
                            cursor += size;
                        }
                        PlyProperty::List { count, item, .. } => {
                            if cursor + count.size() > body.len() {
                                return Err(parse_err(path, "truncated list count"));
                            }
                            let n = count.read_le(&body[cursor..]) as usize;
                            cursor += count.size();
                            for _ in 0..n {
                                if cursor + item.size() > body.len() {
                                    return Err(parse_err(path, "truncated list items"));
                                }
                                list.push(item.read_le(&body[cursor..]));
                                cursor += item.size();
                            }
                        }
                    }
                }
                consume_ply_element(path, element, &values, &list, &mut vertices, &mut colors, &mut triangles)?;
            }
        }
    } else {
        let text = std::str::from_utf8(body).map_err(|_| parse_err(path, "body is not UTF-8"))?;
        let mut tokens = text.split_whitespace().map(|t| {
            t.parse::<f64>()
                .map_err(|_| parse_err(path, format!("bad numeric token '{t}'")))
        });
        let mut next = |what: &str| -> Result<f64, DatasetError> {
            tokens
                .next()
                .ok_or_else(|| parse_err(path, format!("unexpected end of file reading {what}")))?
        };
        for element in &elements {
            for _ in 0..element.count {
                let mut values: Vec<(String, f64)> = Vec::new();
                let mut list: Vec<f64> = Vec::new();
                for prop in &element.properties {
                    match prop {
                        PlyProperty::Scalar { name, .. } => {
                            values.push((name.clone(), next(name)?));
                        }
                        PlyProperty::List { name, .. } => {
                            let n = next(name)? as usize;
                            for _ in 0..n {
                                list.push(next(name)?);
                            }
                        }
                    }
                }
                consume_ply_element(path, element, &values, &list, &mut vertices, &mut colors, &mut triangles)?;
            }
        }
    }

    let colors = if colors.len() == vertices.len() && !colors.is_empty() {
        Some(colors)
    } else {
        None
    };
    Mesh::new(vertices, triangles, colors).map_err(|e| match e {
        crate::mesh::MeshError::EmptyMesh => DatasetError::EmptyMesh(path.to_path_buf()),
        other => parse_err(path, other.to_string()),
    })
}

fn consume_ply_element(
    path: &Path,
    element: &PlyElement,
    values: &[(String, f64)],
    list: &[f64],
    vertices: &mut Vec<Vector3<f64>>,
    colors: &mut Vec<[u8; 3]>,
    triangles: &mut Vec<[u32; 3]>,
) -> Result<(), DatasetError> {
    let get = |name: &str| values.iter().find(|(n, _)| n == name).map(|(_, v)| *v);
    match element.name.as_str() {
        "vertex" => {
            let (x, y, z) = match (get("x"), get("y"), get("z")) {
                (Some(x), Some(y), Some(z)) => (x, y, z),
                _ => return Err(parse_err(path, "vertex missing x/y/z")),
            };
            vertices.push(Vector3::new(x, y, z));
            if let (Some(r), Some(g), Some(b)) = (get("red"), get("green"), get("blue")) {
                colors.push([r as u8, g as u8, b as u8]);
            }
        }
        "face" => {
            if list.len() < 3 {
                return Err(parse_err(path, format!("face with {} indices", list.len())));
            }
            for i in 1..list.len() - 1 {
                triangles.push([list[0] as u32, list[i] as u32, list[i + 1] as u32]);
            }
        }
        _ => {} // ignore other elements (edges, materials)
    }
    Ok(())
}

fn find_header_end(bytes: &[u8]) -> Option<usize> {
    let needle = b"end_header";
    let pos = bytes.windows(needle.len()).position(|w| w == needle)?;
    let mut end = pos + needle.len();
    // Skip to past the newline (handles \r\n as well).
    while end < bytes.len() && bytes[end] != b'\n' {
        end += 1;
    }
    Some((end + 1).min(bytes.len()))
}

fn load_obj(path: &Path) -> Result<Mesh, DatasetError> {
    let file = fs::File::open(path)?;
    let mut vertices: Vec<Vector3<f64>> = Vec::new();
    let mut colors: Vec<[u8; 3]> = Vec::new();
    let mut triangles: Vec<[u32; 3]> = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line?;
        let mut tok = line.split_whitespace();
        match tok.next() {
            Some("v") => {
                let mut coord = |what: &str| -> Result<f64, DatasetError> {
                    tok.next()
                        .and_then(|t| t.parse().ok())
                        .ok_or_else(|| parse_err(path, format!("vertex missing {what}")))
                };
                let (x, y, z) = (coord("x")?, coord("y")?, coord("z")?);
                vertices.push(Vector3::new(x, y, z));
                // Optional vertex color extension: v x y z r g b in [0,1].
                let rest: Vec<f64> = tok.filter_map(|t| t.parse().ok()).collect();
                if rest.len() >= 3 {
                    colors.push([
                        (rest[0] * 255.0) as u8,
                        (rest[1] * 255.0) as u8,
                        (rest[2] * 255.0) as u8,
                    ]);
                }
            }
            Some("f") => {
                let mut indices = Vec::new();
                for field in tok {
                    let first = field.split('/').next().unwrap_or("");
                    let idx: i64 = first
                        .parse()
                        .map_err(|_| parse_err(path, format!("bad face index '{field}'")))?;
                    let resolved = if idx < 0 {
                        vertices.len() as i64 + idx
                    } else {
                        idx - 1
                    };
                    if resolved < 0 || resolved as usize >= vertices.len() {
                        return Err(parse_err(path, format!("face index {idx} out of range")));
                    }
                    indices.push(resolved as u32);
                }
                if indices.len() < 3 {
                    return Err(parse_err(path, "face with fewer than 3 vertices"));
                }
                for i in 1..indices.len() - 1 {
                    triangles.push([indices[0], indices[i], indices[i + 1]]);
                }
            }
            _ => {}
        }
    }
    let colors = if colors.len() == vertices.len() && !colors.is_empty() {
        Some(colors)
    } else {
        None
    };
    Mesh::new(vertices, triangles, colors).map_err(|e| match e {
        crate::mesh::MeshError::EmptyMesh => DatasetError::EmptyMesh(path.to_path_buf()),
        other => parse_err(path, other.to_string()),
    })
}

/// Writes an ASCII PLY; used by the sequence generator and tests.
pub fn save_ply_ascii(mesh: &Mesh, path: &Path) -> Result<(), DatasetError> {
    let mut out = String::new();
    out.push_str("ply\nformat ascii 1.0\n");
    out.push_str(&format!("element vertex {}\n", mesh.vertices.len()));
    out.push_str("property double x\nproperty double y\nproperty double z\n");
    if mesh.colors.is_some() {
        out.push_str("property uchar red\nproperty uchar green\nproperty uchar blue\n");
    }
    out.push_str(&format!("element face {}\n", mesh.triangles.len()));
    out.push_str("property list uchar int vertex_indices\nend_header\n");
    for (i, v) in mesh.vertices.iter().enumerate() {
        out.push_str(&format!("{} {} {}", v.x, v.y, v.z));
        if let Some(c) = &mesh.colors {
            out.push_str(&format!(" {} {} {}", c[i][0], c[i][1], c[i][2]));
        }
        out.push('\n');
    }
    for t in &mesh.triangles {
        out.push_str(&format!("3 {} {} {}\n", t[0], t[1], t[2]));
    }
    fs::write(path, out)?;
    Ok(())
}

/// Expected number of sequences per object for each scenario family.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
pub struct ScenarioCounts {
    pub stability: usize,
    pub occlusion: usize,
    pub interaction: usize,
}

impl Default for ScenarioCounts {
    /// The full-dataset breakdown: 12 stability, 11 occlusion, 4 interaction
    /// sequences per object (27 total).
    fn default() -> Self {
        ScenarioCounts {
            stability: 12,
            occlusion: 11,
            interaction: 4,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestObject {
    pub name: String,
    pub mesh: PathBuf,
    pub max_dimension_mm: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestSequence {
    pub path: PathBuf,
    pub scenario: ScenarioKind,
    pub object: String,
}

/// `manifest.json` at the dataset root.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub objects: Vec<ManifestObject>,
    pub sequences: Vec<ManifestSequence>,
    /// Per-object scenario counts to enforce; defaults to the full-dataset
    /// breakdown when absent.
    #[serde(default)]
    pub expected_per_object: ScenarioCounts,
}

impl DatasetManifest {
    pub fn load(path: &Path) -> Result<Self, DatasetError> {
        serde_json::from_slice(&fs::read(path)?).map_err(|e| parse_err(path, e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<(), DatasetError> {
        fs::write(path, serde_json::to_vec_pretty(self).unwrap())?;
        Ok(())
    }
}

/// Checks manifest consistency against the files under `root`. Returns the
/// list of violations; empty means the dataset is well-formed.
pub fn validate_manifest(manifest: &DatasetManifest, root: &Path) -> Vec<String> {
    let mut violations = Vec::new();
    for obj in &manifest.objects {
        let mesh_path = root.join(&obj.mesh);
        if !mesh_path.exists() {
            violations.push(format!(
                "object '{}': mesh path {} does not exist",
                obj.name,
                mesh_path.display()
            ));
        }
        if obj.max_dimension_mm <= 0.0 {
            violations.push(format!(
                "object '{}': non-positive max dimension",
                obj.name
            ));
        }
    }

    for seq in &manifest.sequences {
        if !manifest.objects.iter().any(|o| o.name == seq.object) {
            violations.push(format!(
                "sequence {}: references undeclared object '{}'",
                seq.path.display(),
                seq.object
            ));
        }
        if let Err(msg) = seq.scenario.validate() {
            violations.push(format!("sequence {}: {msg}", seq.path.display()));
        }
        let seq_dir = root.join(&seq.path);
        if !seq_dir.join("meta.json").exists() {
            violations.push(format!(
                "sequence {}: directory has no meta.json",
                seq.path.display()
            ));
        }
    }

    let expected = manifest.expected_per_object;
    for obj in &manifest.objects {
        let mut counts = ScenarioCounts {
            stability: 0,
            occlusion: 0,
            interaction: 0,
        };
        for seq in manifest.sequences.iter().filter(|s| s.object == obj.name) {
            match seq.scenario {
                ScenarioKind::Stability { .. } => counts.stability += 1,
                ScenarioKind::Occlusion { .. } => counts.occlusion += 1,
                ScenarioKind::Interaction { .. } => counts.interaction += 1,
            }
        }
        if counts != expected {
            violations.push(format!(
                "object '{}': {}/{}/{} stability/occlusion/interaction sequences, expected {}/{}/{}",
                obj.name,
                counts.stability,
                counts.occlusion,
                counts.interaction,
                expected.stability,
                expected.occlusion,
                expected.interaction
            ));
        }
    }
    violations
}
