//! Synthetic room generator: a floor, four walls, and a handful of boxes and
//! cylinders standing on the floor, sampled as noisy surface points.

use super::PointCloud;
use crate::error::{Error, Result};
use crate::seeding::{rng_for, streams};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use std::f64::consts::PI;

/// Recipe for one synthetic scene. Semantic classes are fixed by the shape
/// catalog: 0 floor, 1 wall, 2 box, 3 cylinder.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneSpec {
    /// Room size in meters (x, y, z).
    pub extent: [f64; 3],
    /// Inclusive range for the number of free-standing objects.
    pub object_count: (usize, usize),
    /// Inclusive range for object edge lengths / diameters, meters.
    pub object_size: (f64, f64),
    /// Inclusive range for surface points per object; the floor draws 4x
    /// and each wall 2x this range to roughly track surface area.
    pub points_per_object: (usize, usize),
    /// Gaussian coordinate noise, truncated at three sigmas.
    pub noise_sigma: f64,
    /// Paint boxes and cylinders with one shared base color so their class
    /// is carried by shape alone; floor and walls keep distinct colors.
    /// Geometry and labels are unaffected by the flag.
    pub shared_object_color: bool,
    pub seed: u64,
}

impl Default for SceneSpec {
    fn default() -> Self {
        SceneSpec {
            extent: [2.0, 2.0, 1.0],
            object_count: (2, 4),
            object_size: (0.25, 0.45),
            points_per_object: (300, 600),
            noise_sigma: 0.005,
            shared_object_color: false,
            seed: 0,
        }
    }
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.extent.iter().any(|&e| !(e > 0.0)) {
            return Err(Error::Config(format!("room extent must be positive, got {:?}", self.extent)));
        }
        if self.object_count.0 < 1 || self.object_count.0 > self.object_count.1 {
            return Err(Error::Config(format!(
                "object count range {:?} invalid (need 1 ≤ lo ≤ hi)",
                self.object_count
            )));
        }
        if self.points_per_object.0 < 1 || self.points_per_object.0 > self.points_per_object.1 {
            return Err(Error::Config(format!(
                "points-per-object range {:?} invalid",
                self.points_per_object
            )));
        }
        if !(self.object_size.0 > 0.0) || self.object_size.0 > self.object_size.1 {
            return Err(Error::Config(format!(
                "object size range {:?} invalid",
                self.object_size
            )));
        }
        if self.noise_sigma < 0.0 {
            return Err(Error::Config(format!("noise sigma {} negative", self.noise_sigma)));
        }
        // Objects need floor room for their circumscribed footprint (half
        // the box diagonal) plus a placement margin on each side.
        let needed = std::f64::consts::SQRT_2 * self.object_size.1 + 2.0 * PLACEMENT_MARGIN;
        if needed > self.extent[0] || needed > self.extent[1] || self.object_size.1 > self.extent[2] {
            return Err(Error::Config(format!(
                "objects up to {} m do not fit a {:?} m room",
                self.object_size.1, self.extent
            )));
        }
        Ok(())
    }
}

const PLACEMENT_MARGIN: f64 = 0.05;
const PLACEMENT_TRIES: usize = 1000;

const CLASS_FLOOR: usize = 0;
const CLASS_WALL: usize = 1;
const CLASS_BOX: usize = 2;
const CLASS_CYLINDER: usize = 3;

const BASE_COLORS: [[f64; 3]; 4] = [
    [0.45, 0.45, 0.45], // floor
    [0.85, 0.85, 0.80], // wall
    [0.80, 0.15, 0.15], // box
    [0.15, 0.25, 0.85], // cylinder
];

/// Base color for boxes *and* cylinders under `shared_object_color`.
const SHARED_OBJECT_COLOR: [f64; 3] = [0.55, 0.35, 0.25];

struct Noise {
    dist: Option<Normal<f64>>,
    sigma: f64,
}

impl Noise {
    fn new(sigma: f64) -> Result<Self> {
        let dist = if sigma > 0.0 {
            Some(Normal::new(0.0, sigma).map_err(|e| Error::Config(format!("noise sigma: {e}")))?)
        } else {
            None
        };
        Ok(Noise { dist, sigma })
    }

    /// Truncating at three sigmas keeps every point within a known band of
    /// its surface, so room-bound checks have an exact tolerance.
    fn jitter(&self, rng: &mut ChaCha8Rng, p: [f64; 3]) -> [f64; 3] {
        match &self.dist {
            None => p,
            Some(dist) => {
                let mut out = p;
                for v in out.iter_mut() {
                    let n = dist.sample(rng).clamp(-3.0 * self.sigma, 3.0 * self.sigma);
                    *v += n;
                }
                out
            }
        }
    }
}

fn push_points(
    cloud: &mut PointCloudBuilder,
    rng: &mut ChaCha8Rng,
    noise: &Noise,
    count: usize,
    class: usize,
    inst: usize,
    base: [f64; 3],
    inst_tint: [f64; 3],
    mut surface: impl FnMut(&mut ChaCha8Rng) -> [f64; 3],
) {
    for _ in 0..count {
        let on_surface = surface(rng);
        let p = noise.jitter(rng, on_surface);
        let color: [f64; 3] = std::array::from_fn(|c| {
            (base[c] + inst_tint[c] + rng.random_range(-0.02..0.02)).clamp(0.0, 1.0)
        });
        cloud.push(p, color, class, inst);
    }
}

struct PointCloudBuilder {
    xyz: Vec<[f64; 3]>,
    rgb: Vec<[f64; 3]>,
    sem: Vec<usize>,
    inst: Vec<usize>,
}

impl PointCloudBuilder {
    fn push(&mut self, p: [f64; 3], c: [f64; 3], sem: usize, inst: usize) {
        self.xyz.push(p);
        self.rgb.push(c);
        self.sem.push(sem);
        self.inst.push(inst);
    }
}

/// Generates one scene, fully determined by `spec.seed`.
///
/// Instance ids are dense and ordered: 0 is the floor, 1-4 the walls, and
/// 5 onward the objects in placement order.
pub fn generate_scene(spec: &SceneSpec) -> Result<PointCloud> {
    spec.validate()?;
    let mut rng = rng_for(spec.seed, streams::SCENE, 0);
    let noise = Noise::new(spec.noise_sigma)?;
    let [ex, ey, ez] = spec.extent;
    let (lo, hi) = spec.points_per_object;
    let mut cloud = PointCloudBuilder {
        xyz: Vec::new(),
        rgb: Vec::new(),
        sem: Vec::new(),
        inst: Vec::new(),
    };
    let tint = |rng: &mut ChaCha8Rng| -> [f64; 3] {
        std::array::from_fn(|_| rng.random_range(-0.06..0.06))
    };

    // Floor: instance 0.
    let n_floor = rng.random_range(lo..=hi) * 4;
    let t = tint(&mut rng);
    push_points(&mut cloud, &mut rng, &noise, n_floor, CLASS_FLOOR, 0, BASE_COLORS[CLASS_FLOOR], t, |r| {
        [r.random_range(0.0..ex), r.random_range(0.0..ey), 0.0]
    });

    // Walls: instances 1-4 on the four room sides.
    for wall in 0..4 {
        let n = rng.random_range(lo..=hi) * 2;
        let t = tint(&mut rng);
        push_points(&mut cloud, &mut rng, &noise, n, CLASS_WALL, 1 + wall, BASE_COLORS[CLASS_WALL], t, |r| {
            let z = r.random_range(0.0..ez);
            match wall {
                0 => [r.random_range(0.0..ex), 0.0, z],
                1 => [r.random_range(0.0..ex), ey, z],
                2 => [0.0, r.random_range(0.0..ey), z],
                _ => [ex, r.random_range(0.0..ey), z],
            }
        });
    }

    // Free-standing objects: boxes and cylinders on the floor.
    let n_objects = rng.random_range(spec.object_count.0..=spec.object_count.1);
    let mut placed: Vec<(f64, f64, f64)> = Vec::new(); // (cx, cy, footprint radius)
    for obj in 0..n_objects {
        let is_box = rng.random_range(0..2u32) == 0;
        let (sx, sy, sz);
        let footprint;
        if is_box {
            sx = rng.random_range(spec.object_size.0..=spec.object_size.1);
            sy = rng.random_range(spec.object_size.0..=spec.object_size.1);
            sz = rng.random_range(spec.object_size.0..=spec.object_size.1);
            footprint = 0.5 * (sx * sx + sy * sy).sqrt();
        } else {
            let d = rng.random_range(spec.object_size.0..=spec.object_size.1);
            sx = d;
            sy = d;
            sz = rng.random_range(spec.object_size.0..=spec.object_size.1);
            footprint = 0.5 * d;
        }

        // Rejection placement; after the try budget, keep the candidate
        // farthest from its nearest neighbor so generation never fails.
        let margin = footprint + PLACEMENT_MARGIN;
        let mut best: Option<(f64, f64, f64)> = None; // (cx, cy, nearest gap)
        for _ in 0..PLACEMENT_TRIES {
            let cx = rng.random_range(margin..=(ex - margin));
            let cy = rng.random_range(margin..=(ey - margin));
            let gap = placed
                .iter()
                .map(|&(px, py, pf)| ((cx - px).powi(2) + (cy - py).powi(2)).sqrt() - footprint - pf)
                .fold(f64::INFINITY, f64::min);
            if gap > PLACEMENT_MARGIN {
                best = Some((cx, cy, gap));
                break;
            }
            if best.map_or(true, |(_, _, g)| gap > g) {
                best = Some((cx, cy, gap));
            }
        }
        let (cx, cy, _) = best.expect("at least one placement try");
        placed.push((cx, cy, footprint));

        let n = rng.random_range(lo..=hi);
        let t = tint(&mut rng);
        let inst = 5 + obj;
        let base = |class: usize| {
            if spec.shared_object_color {
                SHARED_OBJECT_COLOR
            } else {
                BASE_COLORS[class]
            }
        };
        if is_box {
            // Five visible faces, chosen by area (the bottom sits on the floor).
            let areas = [sx * sy, sy * sz, sy * sz, sx * sz, sx * sz];
            let total: f64 = areas.iter().sum();
            push_points(&mut cloud, &mut rng, &noise, n, CLASS_BOX, inst, base(CLASS_BOX), t, |r| {
                let mut pick = r.random_range(0.0..total);
                let mut face = 0;
                for (f, &a) in areas.iter().enumerate() {
                    if pick < a {
                        face = f;
                        break;
                    }
                    pick -= a;
                }
                let (u, v) = (r.random_range(0.0..1.0), r.random_range(0.0..1.0));
                match face {
                    0 => [cx + (u - 0.5) * sx, cy + (v - 0.5) * sy, sz],
                    1 => [cx - 0.5 * sx, cy + (u - 0.5) * sy, v * sz],
                    2 => [cx + 0.5 * sx, cy + (u - 0.5) * sy, v * sz],
                    3 => [cx + (u - 0.5) * sx, cy - 0.5 * sy, v * sz],
                    _ => [cx + (u - 0.5) * sx, cy + 0.5 * sy, v * sz],
                }
            });
        } else {
            let r_cyl = 0.5 * sx;
            let lateral = 2.0 * PI * r_cyl * sz;
            let top = PI * r_cyl * r_cyl;
            let total = lateral + top;
            push_points(&mut cloud, &mut rng, &noise, n, CLASS_CYLINDER, inst, base(CLASS_CYLINDER), t, |r| {
                let theta = r.random_range(0.0..(2.0 * PI));
                if r.random_range(0.0..total) < lateral {
                    [cx + r_cyl * theta.cos(), cy + r_cyl * theta.sin(), r.random_range(0.0..sz)]
                } else {
                    let rr = r_cyl * r.random_range(0.0..1.0f64).sqrt();
                    [cx + rr * theta.cos(), cy + rr * theta.sin(), sz]
                }
            });
        }
    }

    Ok(PointCloud {
        xyz: cloud.xyz,
        rgb: Some(cloud.rgb),
        sem: Some(cloud.sem),
        inst: Some(cloud.inst),
    })
}
