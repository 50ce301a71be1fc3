//! Data plumbing: synthetic room scenes, the text point-cloud format, and
//! binary checkpoints.

mod checkpoint;
mod points_file;
mod scene;

pub use checkpoint::{load_checkpoint, save_checkpoint, Checkpoint, CHECKPOINT_VERSION};
pub use points_file::{load_points, save_points};
pub use scene::{generate_scene, SceneSpec};

use crate::error::{Error, Result};

/// A labeled (or partially labeled) point cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    pub xyz: Vec<[f64; 3]>,
    /// Per-point color in `[0,1]`, if the source carried colors.
    pub rgb: Option<Vec<[f64; 3]>>,
    pub sem: Option<Vec<usize>>,
    pub inst: Option<Vec<usize>>,
}

impl PointCloud {
    pub fn len(&self) -> usize {
        self.xyz.len()
    }

    pub fn is_empty(&self) -> bool {
        self.xyz.is_empty()
    }

    /// Checks internal consistency: matching array lengths, semantic labels
    /// below `l_c`, and instance ids forming a dense `[0, max]` range.
    pub fn validate(&self, l_c: usize) -> Result<()> {
        let n = self.len();
        if n == 0 {
            return Err(Error::Data("point cloud is empty".into()));
        }
        if let Some(rgb) = &self.rgb {
            if rgb.len() != n {
                return Err(Error::Dimension(format!(
                    "{} colors for {} points",
                    rgb.len(),
                    n
                )));
            }
        }
        if let Some(sem) = &self.sem {
            if sem.len() != n {
                return Err(Error::Dimension(format!(
                    "{} semantic labels for {} points",
                    sem.len(),
                    n
                )));
            }
            if let Some((i, &c)) = sem.iter().enumerate().find(|(_, &c)| c >= l_c) {
                return Err(Error::Data(format!(
                    "semantic label {c} at point {i} out of range (L_C = {l_c})"
                )));
            }
        }
        if let Some(inst) = &self.inst {
            if inst.len() != n {
                return Err(Error::Dimension(format!(
                    "{} instance labels for {} points",
                    inst.len(),
                    n
                )));
            }
            let max = *inst.iter().max().expect("nonempty");
            let mut seen = vec![false; max + 1];
            for &id in inst {
                seen[id] = true;
            }
            if let Some(gap) = seen.iter().position(|&s| !s) {
                return Err(Error::Data(format!(
                    "instance ids not dense: id {gap} unused but max id is {max}"
                )));
            }
        }
        Ok(())
    }

    pub fn sem(&self) -> Result<&[usize]> {
        self.sem
            .as_deref()
            .ok_or_else(|| Error::Data("point cloud has no semantic labels".into()))
    }

    pub fn inst(&self) -> Result<&[usize]> {
        self.inst
            .as_deref()
            .ok_or_else(|| Error::Data("point cloud has no instance labels".into()))
    }

    /// Axis-aligned bounding box as (min, max) corners.
    pub fn bounds(&self) -> ([f64; 3], [f64; 3]) {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for p in &self.xyz {
            for a in 0..3 {
                lo[a] = lo[a].min(p[a]);
                hi[a] = hi[a].max(p[a]);
            }
        }
        (lo, hi)
    }
}

/// Display names for the generator's semantic classes; classes beyond the
/// built-in catalog fall back to `class<k>`.
pub fn class_names(l_c: usize) -> Vec<String> {
    const CATALOG: [&str; 4] = ["floor", "wall", "box", "cylinder"];
    (0..l_c)
        .map(|c| {
            CATALOG
                .get(c)
                .map(|s| s.to_string())
                .unwrap_or_else(|| format!("class{c}"))
        })
        .collect()
}
