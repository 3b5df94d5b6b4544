//! Software renderer demo: a unit sphere textured straight from the network,
//! one directional light, Lambert shading.
//!
//! Per pixel: pinhole ray, analytic sphere intersection, spherical UV at the
//! hit (`u = 0.5 + atan2(d_z, d_x) / 2pi`, `v = 0.5 - asin(d_y) / pi`), INR
//! lookup for the albedo, then `albedo * max(0, n . l)`. Mipmap models pick
//! the nearest discrete level from a screen-space footprint estimate.

use std::f64::consts::PI;

use crate::error::Result;
use crate::image::Image;
use crate::network::InrModel;
use crate::tensor::Matrix;

#[derive(Debug, Clone, Copy)]
pub struct Vec3 {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Vec3 {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Vec3 { x, y, z }
    }

    pub fn dot(self, o: Vec3) -> f64 {
        self.x * o.x + self.y * o.y + self.z * o.z
    }

    pub fn cross(self, o: Vec3) -> Vec3 {
        Vec3::new(
            self.y * o.z - self.z * o.y,
            self.z * o.x - self.x * o.z,
            self.x * o.y - self.y * o.x,
        )
    }

    pub fn scale(self, s: f64) -> Vec3 {
        Vec3::new(self.x * s, self.y * s, self.z * s)
    }

    pub fn add(self, o: Vec3) -> Vec3 {
        Vec3::new(self.x + o.x, self.y + o.y, self.z + o.z)
    }

    pub fn sub(self, o: Vec3) -> Vec3 {
        self.add(o.scale(-1.0))
    }

    pub fn normalized(self) -> Vec3 {
        self.scale(1.0 / self.dot(self).sqrt())
    }
}

#[derive(Debug, Clone)]
pub struct Camera {
    pub eye: Vec3,
    pub look_at: Vec3,
    pub up: Vec3,
    pub fov_deg: f64,
    pub width: usize,
    pub height: usize,
}

impl Default for Camera {
    fn default() -> Self {
        Camera {
            eye: Vec3::new(0.0, 0.0, 3.0),
            look_at: Vec3::new(0.0, 0.0, 0.0),
            up: Vec3::new(0.0, 1.0, 0.0),
            fov_deg: 45.0,
            width: 256,
            height: 256,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RenderParams {
    pub camera: Camera,
    /// Direction toward the light; normalized internally.
    pub light_dir: Vec3,
    pub background: [f64; 3],
    /// Assumed base-texture resolution for mip LOD selection.
    pub mip_base_resolution: usize,
    /// Level count the mipmap model was trained with.
    pub mip_levels: usize,
}

impl Default for RenderParams {
    fn default() -> Self {
        RenderParams {
            camera: Camera::default(),
            light_dir: Vec3::new(1.0, 1.0, 1.0),
            background: [0.05, 0.05, 0.08],
            mip_base_resolution: 256,
            mip_levels: crate::image::DEFAULT_MIP_LEVELS,
        }
    }
}

/// Primary camera ray through the center of pixel `(x, y)`.
pub fn primary_ray(cam: &Camera, x: usize, y: usize) -> (Vec3, Vec3) {
    let forward = cam.look_at.sub(cam.eye).normalized();
    let right = forward.cross(cam.up).normalized();
    let up = right.cross(forward);
    let tan_half = (cam.fov_deg.to_radians() / 2.0).tan();
    let aspect = cam.width as f64 / cam.height as f64;
    let px = (2.0 * (x as f64 + 0.5) / cam.width as f64 - 1.0) * tan_half * aspect;
    let py = (1.0 - 2.0 * (y as f64 + 0.5) / cam.height as f64) * tan_half;
    let dir = forward.add(right.scale(px)).add(up.scale(py)).normalized();
    (cam.eye, dir)
}

/// Nearest positive intersection of a ray with the unit sphere at the origin.
pub fn hit_unit_sphere(origin: Vec3, dir: Vec3) -> Option<f64> {
    let b = origin.dot(dir);
    let c = origin.dot(origin) - 1.0;
    let disc = b * b - c;
    if disc < 0.0 {
        return None;
    }
    let t = -b - disc.sqrt();
    (t > 0.0).then_some(t)
}

/// Spherical UV of a unit direction.
pub fn sphere_uv(n: Vec3) -> (f64, f64) {
    let u = 0.5 + n.z.atan2(n.x) / (2.0 * PI);
    let v = 0.5 - n.y.clamp(-1.0, 1.0).asin() / PI;
    (u, v)
}

struct HitInfo {
    pixel: usize,
    u: f64,
    v: f64,
    t_level: Option<f64>,
    lambert: f64,
}

/// Nearest discrete mip `t` from the screen-space footprint: the pixel's
/// world-space extent at the hit, stretched by grazing angle, converted to UV
/// units (one unit of arc spans `1/pi` in v) and then to level-0 texels.
fn select_lod(
    dist: f64,
    cos_view: f64,
    cam: &Camera,
    base_resolution: usize,
    levels: usize,
) -> f64 {
    if levels <= 1 {
        return 0.0;
    }
    let tan_half = (cam.fov_deg.to_radians() / 2.0).tan();
    let pixel_world = 2.0 * tan_half * dist / cam.height as f64;
    let footprint_uv = pixel_world / (PI * cos_view.max(0.05));
    let texels = footprint_uv * base_resolution as f64;
    let level = texels.max(1e-12).log2().round().clamp(0.0, (levels - 1) as f64);
    level / (levels - 1) as f64
}

/// Renders the sphere; deterministic for fixed inputs.
pub fn render_sphere(model: &InrModel, params: &RenderParams) -> Result<Image> {
    let cam = &params.camera;
    let light = params.light_dir.normalized();
    let needs_t = model.spec.input_dim == 3;

    let mut img = Image::new(cam.width, cam.height);
    for p in img.pixels_mut().chunks_exact_mut(3) {
        p.copy_from_slice(&params.background);
    }

    // Collect hits, then batch the network lookups row by row.
    for y in 0..cam.height {
        let mut hits: Vec<HitInfo> = Vec::with_capacity(cam.width);
        for x in 0..cam.width {
            let (origin, dir) = primary_ray(cam, x, y);
            let Some(t) = hit_unit_sphere(origin, dir) else {
                continue;
            };
            let normal = origin.add(dir.scale(t)).normalized();
            let (u, v) = sphere_uv(normal);
            let lambert = normal.dot(light).max(0.0);
            let t_level = needs_t.then(|| {
                let cos_view = (-normal.dot(dir)).abs();
                select_lod(t, cos_view, cam, params.mip_base_resolution, params.mip_levels)
            });
            hits.push(HitInfo {
                pixel: x,
                u,
                v,
                t_level,
                lambert,
            });
        }
        if hits.is_empty() {
            continue;
        }
        let dim = if needs_t { 3 } else { 2 };
        let mut coords = Vec::with_capacity(hits.len() * dim);
        for h in &hits {
            coords.push(h.u);
            coords.push(h.v);
            if let Some(t) = h.t_level {
                coords.push(t);
            }
        }
        let albedo = model.forward(&Matrix::from_vec(hits.len(), dim, coords)?)?;
        for (i, h) in hits.iter().enumerate() {
            let row = albedo.row(i);
            img.set(
                h.pixel,
                y,
                [
                    row[0].clamp(0.0, 1.0) * h.lambert,
                    row[1].clamp(0.0, 1.0) * h.lambert,
                    row[2].clamp(0.0, 1.0) * h.lambert,
                ],
            );
        }
    }
    Ok(img)
}
