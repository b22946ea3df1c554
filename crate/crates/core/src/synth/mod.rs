//! Synthetic anisotropic hollow-vessel phantoms with ground-truth masks and
//! centerline skeletons.
//!
//! Generation runs: grow centerlines as biased random walks, dilate them to
//! tubes in physical coordinates, derive foreground/background distance maps,
//! shade the wall with a double-exponential profile, then corrupt with the
//! noise of real two-photon stacks (Gaussian, salt-and-pepper, Poisson, slice
//! jitter).

mod dataset;
mod distance;
mod grow;
mod phantom;

pub use dataset::{generate_dataset, load_triplets, DatasetLayout, GeneratedDataset, Triplet};
pub use distance::distance_maps;
pub use grow::grow_centerlines;
pub use phantom::{corrupt, dilate_to_mask, endothelium, make_phantom, Phantom};

use crate::{Error, Result};

/// Default voxel spacing in µm: in-plane 0.83, axial 5.
pub const DEFAULT_SPACING_UM: (f64, f64, f64) = (0.83, 0.83, 5.0);

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VolumeKind {
    Intensity,
    Mask,
    Skeleton,
}

/// A 3D scalar grid with anisotropic physical voxel spacing in µm.
///
/// Storage is z-major: slice by slice, rows (`y`) within a slice, `x`
/// fastest. Masks and skeletons hold strictly 0/1 values.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    pub dims: (usize, usize, usize),
    pub spacing_um: (f64, f64, f64),
    pub data: Vec<f64>,
    pub kind: VolumeKind,
}

impl Volume {
    pub fn zeros(dims: (usize, usize, usize), spacing_um: (f64, f64, f64), kind: VolumeKind) -> Self {
        Volume {
            dims,
            spacing_um,
            data: vec![0.0; dims.0 * dims.1 * dims.2],
            kind,
        }
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        (z * self.dims.1 + y) * self.dims.0 + x
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize, z: usize) -> f64 {
        self.data[self.index(x, y, z)]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, z: usize, v: f64) {
        let i = self.index(x, y, z);
        self.data[i] = v;
    }

    /// Voxel center in µm.
    #[inline]
    pub fn position_um(&self, x: usize, y: usize, z: usize) -> [f64; 3] {
        [
            x as f64 * self.spacing_um.0,
            y as f64 * self.spacing_um.1,
            z as f64 * self.spacing_um.2,
        ]
    }

    pub fn is_binary(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0 || v == 1.0)
    }

    pub fn count_foreground(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0.0).count()
    }

    /// Check `self ⊆ other` for binary volumes.
    pub fn subset_of(&self, other: &Volume) -> bool {
        self.data
            .iter()
            .zip(&other.data)
            .all(|(a, b)| *a == 0.0 || *b != 0.0)
    }

    pub fn require_same_dims(&self, other: &Volume, what: &str) -> Result<()> {
        if self.dims != other.dims {
            return Err(Error::Validation(format!(
                "{what}: volume dims {:?} vs {:?}",
                self.dims, other.dims
            )));
        }
        Ok(())
    }
}

/// Parameters of one synthetic phantom.
#[derive(Debug, Clone)]
pub struct PhantomParams {
    pub n_vessels: usize,
    /// Per-vessel radius drawn uniformly from this range (µm).
    pub radius_range_um: (f64, f64),
    /// Wall shading decay inside the vessel (µm).
    pub sigma1_um: f64,
    /// Wall shading decay outside the vessel (µm).
    pub sigma2_um: f64,
    /// Zero-mean Gaussian noise standard deviation (fraction of range).
    pub gaussian_sd: f64,
    /// Fraction of voxels replaced with min/max.
    pub snp_fraction: f64,
    /// Poisson counts at full intensity; 0 disables.
    pub poisson_scale: f64,
    /// Per-slice lateral jitter bound in voxels (x-y only).
    pub jitter_max_vox: usize,
    /// Per-step branching probability of the centerline walk.
    pub branch_prob: f64,
    /// Walk step in µm.
    pub step_um: f64,
}

impl Default for PhantomParams {
    fn default() -> Self {
        PhantomParams {
            n_vessels: 6,
            radius_range_um: (3.0, 12.0),
            sigma1_um: 2.0,
            sigma2_um: 4.0,
            gaussian_sd: 0.05,
            snp_fraction: 0.002,
            poisson_scale: 50.0,
            jitter_max_vox: 2,
            branch_prob: 0.01,
            step_um: 2.0,
        }
    }
}

impl PhantomParams {
    pub fn validate(&self) -> Result<()> {
        if self.n_vessels == 0 {
            return Err(Error::Validation("n_vessels must be at least 1".into()));
        }
        if self.radius_range_um.0 <= 0.0 || self.radius_range_um.1 < self.radius_range_um.0 {
            return Err(Error::Validation(format!(
                "bad radius range {:?}",
                self.radius_range_um
            )));
        }
        if self.sigma1_um <= 0.0 || self.sigma2_um <= 0.0 {
            return Err(Error::Validation("sigma1/sigma2 must be positive".into()));
        }
        if self.gaussian_sd < 0.0 || self.snp_fraction < 0.0 || self.poisson_scale < 0.0 {
            return Err(Error::Validation("noise parameters must be >= 0".into()));
        }
        if !(0.0..=1.0).contains(&self.branch_prob) {
            return Err(Error::Validation("branch_prob must be in [0,1]".into()));
        }
        if self.step_um <= 0.0 {
            return Err(Error::Validation("step_um must be positive".into()));
        }
        Ok(())
    }
}
