//! Software depth rasterizer: pinhole projection plus a z-buffer.
//!
//! Pixel (x, y) is sampled at its centre (x + 0.5, y + 0.5). Only depth is
//! interpolated (1/z linearly in screen space, which is exact for planar
//! triangles); there is no shading, texturing or anti-aliasing.

use nalgebra::Vector3;
use rayon::prelude::*;

use crate::camera::Intrinsics;
use crate::depth::{DepthImage, Mask};
use crate::mesh::Mesh;
use crate::se3::Pose;

pub use crate::camera::{back_project, project, CameraError};

/// Geometry closer than this to the camera plane is clipped (mm).
const NEAR_MM: f64 = 0.1;

/// Screen-space triangle ready for rasterization: per-vertex pixel
/// coordinates and inverse depth.
struct ScreenTriangle {
    u: [f64; 3],
    v: [f64; 3],
    inv_z: [f64; 3],
    min_y: u32,
    max_y: u32, // inclusive
}

/// Renders per-pixel depth (mm) of the nearest surface of `mesh` posed by
/// `pose` (object -> camera); background pixels are 0.
pub fn render_depth(mesh: &Mesh, pose: &Pose, k: &Intrinsics) -> DepthImage {
    let cam_vertices: Vec<Vector3<f64>> = mesh.vertices.iter().map(|p| pose.apply(p)).collect();

    let mut screen_tris = Vec::with_capacity(mesh.triangles.len());
    for tri in &mesh.triangles {
        let corners = [
            cam_vertices[tri[0] as usize],
            cam_vertices[tri[1] as usize],
            cam_vertices[tri[2] as usize],
        ];
        clip_and_project(&corners, k, &mut screen_tris);
    }

    let mut depth = DepthImage::new(k.width, k.height);
    if screen_tris.is_empty() {
        return depth;
    }

    // Scanline bands with private z-buffer slices; min-merge is implicit
    // because bands are disjoint.
    let width = k.width as usize;
    let band_rows = (k.height as usize / rayon::current_num_threads().max(1)).max(16);
    depth
        .data_mut()
        .par_chunks_mut(band_rows * width)
        .enumerate()
        .for_each(|(band, rows)| {
            let y0 = (band * band_rows) as u32;
            let y1 = y0 + (rows.len() / width) as u32; // exclusive
            for st in &screen_tris {
                if st.max_y < y0 || st.min_y >= y1 {
                    continue;
                }
                rasterize_band(st, k, y0, y1, rows);
            }
        });
    depth
}

/// True exactly where [`render_depth`] is nonzero.
pub fn render_mask(mesh: &Mesh, pose: &Pose, k: &Intrinsics) -> Mask {
    let depth = render_depth(mesh, pose, k);
    let mut mask = Mask::new(k.width, k.height);
    for y in 0..k.height {
        for x in 0..k.width {
            mask.set(x, y, depth.is_valid(x, y));
        }
    }
    mask
}

/// Clips a camera-frame triangle against z = NEAR_MM, projects the result
/// and appends the fan triangulation to `out`.
fn clip_and_project(corners: &[Vector3<f64>; 3], k: &Intrinsics, out: &mut Vec<ScreenTriangle>) {
    let mut polygon: Vec<Vector3<f64>> = Vec::with_capacity(4);
    for i in 0..3 {
        let a = corners[i];
        let b = corners[(i + 1) % 3];
        let a_in = a.z >= NEAR_MM;
        let b_in = b.z >= NEAR_MM;
        if a_in {
            polygon.push(a);
        }
        if a_in != b_in {
            let t = (NEAR_MM - a.z) / (b.z - a.z);
            polygon.push(a + (b - a) * t);
        }
    }
    if polygon.len() < 3 {
        return;
    }
    let projected: Vec<(f64, f64, f64)> = polygon
        .iter()
        .map(|p| (k.fx * p.x / p.z + k.cx, k.fy * p.y / p.z + k.cy, 1.0 / p.z))
        .collect();
    for i in 1..projected.len() - 1 {
        push_screen_triangle(projected[0], projected[i], projected[i + 1], k, out);
    }
}

fn push_screen_triangle(
    a: (f64, f64, f64),
    b: (f64, f64, f64),
    c: (f64, f64, f64),
    k: &Intrinsics,
    out: &mut Vec<ScreenTriangle>,
) {
    let min_v = a.1.min(b.1).min(c.1);
    let max_v = a.1.max(b.1).max(c.1);
    let min_u = a.0.min(b.0).min(c.0);
    let max_u = a.0.max(b.0).max(c.0);
    if max_v < 0.0 || min_v >= k.height as f64 || max_u < 0.0 || min_u >= k.width as f64 {
        return;
    }
    // Rows whose centres can fall inside [min_v, max_v].
    let min_y = (min_v - 0.5).ceil().max(0.0) as u32;
    let max_y = ((max_v - 0.5).floor().min(k.height as f64 - 1.0)).max(0.0) as u32;
    if min_y > max_y {
        return;
    }
    out.push(ScreenTriangle {
        u: [a.0, b.0, c.0],
        v: [a.1, b.1, c.1],
        inv_z: [a.2, b.2, c.2],
        min_y,
        max_y,
    });
}

fn rasterize_band(st: &ScreenTriangle, k: &Intrinsics, band_y0: u32, band_y1: u32, rows: &mut [f32]) {
    let area = edge(st.u[0], st.v[0], st.u[1], st.v[1], st.u[2], st.v[2]);
    if area.abs() < 1e-12 {
        return;
    }
    let min_u = st.u[0].min(st.u[1]).min(st.u[2]);
    let max_u = st.u[0].max(st.u[1]).max(st.u[2]);
    let min_x = (min_u - 0.5).ceil().max(0.0) as u32;
    let max_x = ((max_u - 0.5).floor().min(k.width as f64 - 1.0)).max(0.0) as u32;
    if min_x > max_x {
        return;
    }
    let y_start = st.min_y.max(band_y0);
    let y_end = st.max_y.min(band_y1 - 1);
    let width = k.width as usize;
    for y in y_start..=y_end {
        let py = y as f64 + 0.5;
        let row = &mut rows[(y - band_y0) as usize * width..][..width];
        for x in min_x..=max_x {
            let px = x as f64 + 0.5;
            let w0 = edge(st.u[1], st.v[1], st.u[2], st.v[2], px, py);
            let w1 = edge(st.u[2], st.v[2], st.u[0], st.v[0], px, py);
            let w2 = edge(st.u[0], st.v[0], st.u[1], st.v[1], px, py);
            // Accept either winding so mesh orientation does not matter.
            let inside = (w0 >= 0.0 && w1 >= 0.0 && w2 >= 0.0 && area > 0.0)
                || (w0 <= 0.0 && w1 <= 0.0 && w2 <= 0.0 && area < 0.0);
            if !inside {
                continue;
            }
            let inv_z =
                (w0 * st.inv_z[0] + w1 * st.inv_z[1] + w2 * st.inv_z[2]) / area;
            if inv_z <= 0.0 {
                continue;
            }
            let z = (1.0 / inv_z) as f32;
            let cell = &mut row[x as usize];
            if *cell == 0.0 || z < *cell {
                *cell = z;
            }
        }
    }
}

#[inline]
fn edge(ax: f64, ay: f64, bx: f64, by: f64, px: f64, py: f64) -> f64 {
    (bx - ax) * (py - ay) - (by - ay) * (px - ax)
}
