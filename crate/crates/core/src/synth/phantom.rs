//! From centerlines to corrupted intensity volumes.

use super::distance::distance_maps;
use super::grow::{grow_centerlines, Centerlines};
use super::{PhantomParams, Volume, VolumeKind};
use crate::rng;
use crate::skeleton::SkeletonGraph;
use crate::{Error, Result};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};

/// One complete synthetic volume with its ground truth.
pub struct Phantom {
    pub image: Volume,
    pub mask: Volume,
    pub skeleton: Volume,
    pub graph: SkeletonGraph,
    pub warnings: Vec<String>,
}

fn point_segment_distance_sq(p: [f64; 3], a: [f64; 3], b: [f64; 3]) -> f64 {
    let ab = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
    let ap = [p[0] - a[0], p[1] - a[1], p[2] - a[2]];
    let ab2 = ab[0] * ab[0] + ab[1] * ab[1] + ab[2] * ab[2];
    let t = if ab2 == 0.0 {
        0.0
    } else {
        ((ap[0] * ab[0] + ap[1] * ab[1] + ap[2] * ab[2]) / ab2).clamp(0.0, 1.0)
    };
    let q = [a[0] + ab[0] * t, a[1] + ab[1] * t, a[2] + ab[2] * t];
    let d = [p[0] - q[0], p[1] - q[1], p[2] - q[2]];
    d[0] * d[0] + d[1] * d[1] + d[2] * d[2]
}

/// Dilate grown centerlines to a solid tube mask.
///
/// A voxel is foreground iff its physical distance to some vessel's
/// centerline is at most that vessel's radius; the rasterized skeleton is
/// always included so `skeleton ⊆ mask` holds even for degenerate radii.
pub fn dilate_to_mask(centerlines: &Centerlines, radii_um: &[f64]) -> Result<Phantom> {
    let skeleton = &centerlines.skeleton;
    let (nx, ny, nz) = skeleton.dims;
    let (sx, sy, sz) = skeleton.spacing_um;
    let mut warnings = Vec::new();
    let min_spacing = sx.min(sy).min(sz);
    for (vessel, &r) in radii_um.iter().enumerate() {
        if r < min_spacing {
            warnings.push(format!(
                "vessel {vessel}: radius {r} um is below the voxel spacing (sub-voxel vessel)"
            ));
        }
    }

    let mut mask = Volume::zeros(skeleton.dims, skeleton.spacing_um, VolumeKind::Mask);
    for (edge, &vessel) in centerlines.graph.edges.iter().zip(&centerlines.edge_vessel) {
        let radius = *radii_um.get(vessel).ok_or_else(|| {
            Error::Validation(format!("no radius for vessel {vessel}"))
        })?;
        let r2 = radius * radius;
        for seg in edge.polyline_um.windows(2) {
            let (a, b) = (seg[0], seg[1]);
            let lo = [a[0].min(b[0]) - radius, a[1].min(b[1]) - radius, a[2].min(b[2]) - radius];
            let hi = [a[0].max(b[0]) + radius, a[1].max(b[1]) + radius, a[2].max(b[2]) + radius];
            let x0 = (lo[0] / sx).floor().max(0.0) as usize;
            let y0 = (lo[1] / sy).floor().max(0.0) as usize;
            let z0 = (lo[2] / sz).floor().max(0.0) as usize;
            let x1 = (hi[0] / sx).ceil().min((nx - 1) as f64) as usize;
            let y1 = (hi[1] / sy).ceil().min((ny - 1) as f64) as usize;
            let z1 = (hi[2] / sz).ceil().min((nz - 1) as f64) as usize;
            for z in z0..=z1 {
                for y in y0..=y1 {
                    for x in x0..=x1 {
                        if mask.at(x, y, z) != 0.0 {
                            continue;
                        }
                        let p = [x as f64 * sx, y as f64 * sy, z as f64 * sz];
                        if point_segment_distance_sq(p, a, b) <= r2 {
                            mask.set(x, y, z, 1.0);
                        }
                    }
                }
            }
        }
    }
    for (m, s) in mask.data.iter_mut().zip(&skeleton.data) {
        if *s != 0.0 {
            *m = 1.0;
        }
    }
    Ok(Phantom {
        image: Volume::zeros(skeleton.dims, skeleton.spacing_um, VolumeKind::Intensity),
        mask,
        skeleton: skeleton.clone(),
        graph: centerlines.graph.clone(),
        warnings,
    })
}

/// Wall shading `E = exp(-d1/σ1) · exp(-d2/σ2)` from the two distance maps.
pub fn endothelium(d1: &Volume, d2: &Volume, sigma1_um: f64, sigma2_um: f64) -> Result<Volume> {
    if sigma1_um <= 0.0 || sigma2_um <= 0.0 {
        return Err(Error::Validation("sigmas must be positive".into()));
    }
    d1.require_same_dims(d2, "endothelium")?;
    let mut out = d1.clone();
    out.kind = VolumeKind::Intensity;
    for (o, (a, b)) in out.data.iter_mut().zip(d1.data.iter().zip(&d2.data)) {
        *o = (-a / sigma1_um).exp() * (-b / sigma2_um).exp();
    }
    Ok(out)
}

/// Detector and motion corruption: zero-mean Gaussian noise, salt-and-pepper
/// replacement, signal-dependent Poisson counts, then per-slice lateral
/// jitter. All-zero parameters return the input unchanged.
pub fn corrupt(e: &Volume, params: &PhantomParams, rng: &mut ChaCha8Rng) -> Volume {
    let mut out = e.clone();

    if params.gaussian_sd > 0.0 {
        let normal = Normal::new(0.0, params.gaussian_sd).expect("valid sd");
        for v in out.data.iter_mut() {
            *v += normal.sample(rng);
        }
    }

    if params.snp_fraction > 0.0 {
        for v in out.data.iter_mut() {
            if rng.gen_bool(params.snp_fraction) {
                *v = if rng.gen_bool(0.5) { 1.0 } else { 0.0 };
            }
        }
    }

    if params.poisson_scale > 0.0 {
        for v in out.data.iter_mut() {
            let lambda = v.max(0.0) * params.poisson_scale;
            if lambda > 0.0 {
                let counts = Poisson::new(lambda).expect("positive lambda").sample(rng);
                *v = counts / params.poisson_scale;
            } else {
                *v = 0.0;
            }
        }
    }

    if params.jitter_max_vox > 0 {
        let (nx, ny, nz) = out.dims;
        let j = params.jitter_max_vox as i64;
        let mut jittered = vec![0.0; out.len()];
        for z in 0..nz {
            let dx = rng.gen_range(-j..=j);
            let dy = rng.gen_range(-j..=j);
            for y in 0..ny {
                let sy = y as i64 - dy;
                if sy < 0 || sy >= ny as i64 {
                    continue;
                }
                for x in 0..nx {
                    let sx = x as i64 - dx;
                    if sx < 0 || sx >= nx as i64 {
                        continue;
                    }
                    jittered[out.index(x, y, z)] = out.at(sx as usize, sy as usize, z);
                }
            }
        }
        out.data = jittered;
    }

    out
}

/// Generate one complete phantom from a per-volume seed.
pub fn make_phantom(
    params: &PhantomParams,
    dims: (usize, usize, usize),
    spacing: (f64, f64, f64),
    seed: u64,
    label: &str,
) -> Result<Phantom> {
    let mut grow_rng = rng::derive(seed, &format!("{label}/grow"));
    let centerlines = grow_centerlines(params, dims, spacing, &mut grow_rng)?;

    let mut radius_rng = rng::derive(seed, &format!("{label}/radii"));
    let radii: Vec<f64> = (0..params.n_vessels)
        .map(|_| radius_rng.gen_range(params.radius_range_um.0..=params.radius_range_um.1))
        .collect();

    let mut phantom = dilate_to_mask(&centerlines, &radii)?;
    let (d1, d2) = distance_maps(&phantom.mask, spacing)?;
    let shaded = endothelium(&d1, &d2, params.sigma1_um, params.sigma2_um)?;
    let mut noise_rng = rng::derive(seed, &format!("{label}/noise"));
    phantom.image = corrupt(&shaded, params, &mut noise_rng);
    Ok(phantom)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::synth::DEFAULT_SPACING_UM;

    #[test]
    fn degenerate_radius_keeps_mask_equal_to_skeleton() {
        let params = PhantomParams {
            n_vessels: 1,
            branch_prob: 0.0,
            ..PhantomParams::default()
        };
        let mut grow_rng = rng::derive(2, "dil");
        let grown = grow_centerlines(&params, (40, 40, 8), DEFAULT_SPACING_UM, &mut grow_rng).unwrap();
        let phantom = dilate_to_mask(&grown, &[1e-9]).unwrap();
        assert_eq!(phantom.mask.data, grown.skeleton.data);
        assert!(!phantom.warnings.is_empty());
    }

    #[test]
    fn straight_vessel_cross_section_is_six_voxel_disc() {
        // A straight axis-aligned centerline at 5 um radius: in-plane voxels
        // within 5/0.83 ≈ 6.02 voxel spacings.
        let dims = (31, 31, 5);
        let mut skeleton = Volume::zeros(dims, DEFAULT_SPACING_UM, VolumeKind::Skeleton);
        let y_line: Vec<[f64; 3]> = (0..31)
            .map(|x| [x as f64 * 0.83, 15.0 * 0.83, 2.0 * 5.0])
            .collect();
        super::super::grow::rasterize_polyline(&y_line, &mut skeleton);
        let mut graph = SkeletonGraph::default();
        let a = graph.add_node(y_line[0]);
        let b = graph.add_node(*y_line.last().unwrap());
        graph.add_edge(a, b, y_line);
        graph.relabel_components();
        let centerlines = Centerlines {
            skeleton,
            graph,
            edge_vessel: vec![0],
        };
        let phantom = dilate_to_mask(&centerlines, &[5.0]).unwrap();

        // Brute-force distance check at mid-length.
        for dy in 0..15usize {
            let inside = phantom.mask.at(15, 15 + dy, 2) != 0.0;
            let dist = dy as f64 * 0.83;
            assert_eq!(inside, dist <= 5.0, "dy {dy}");
        }
        // 6 voxels out is inside (4.98 um), 7 is not (5.81 um).
        assert_eq!(phantom.mask.at(15, 21, 2), 1.0);
        assert_eq!(phantom.mask.at(15, 22, 2), 0.0);
        // z neighbors at 5 um spacing are exactly at the radius.
        assert_eq!(phantom.mask.at(15, 15, 3), 1.0);
    }

    #[test]
    fn mask_always_contains_skeleton() {
        let params = PhantomParams::default();
        let phantom = make_phantom(&params, (48, 48, 10), DEFAULT_SPACING_UM, 5, "t").unwrap();
        assert!(phantom.skeleton.subset_of(&phantom.mask));
        assert!(phantom.mask.is_binary());
        assert!(phantom.skeleton.is_binary());
    }

    #[test]
    fn endothelium_formula_anchors() {
        let dims = (3, 1, 1);
        let mut d1 = Volume::zeros(dims, DEFAULT_SPACING_UM, VolumeKind::Intensity);
        let mut d2 = d1.clone();
        // voxel 0: boundary sheet (d1 = d2 = 0) -> exactly 1.
        // voxel 1: deep lumen d1 = 0, d2 = sigma2 -> e^-1.
        d1.data = vec![0.0, 0.0, 3.0];
        d2.data = vec![0.0, 4.0, 0.0];
        let e = endothelium(&d1, &d2, 2.0, 4.0).unwrap();
        assert_eq!(e.data[0], 1.0);
        assert!((e.data[1] - (-1.0f64).exp()).abs() < 1e-15);
        assert!(e.data[2] < 1.0);
    }

    #[test]
    fn endothelium_decreases_along_ray_leaving_the_wall() {
        let params = PhantomParams {
            n_vessels: 1,
            branch_prob: 0.0,
            ..PhantomParams::default()
        };
        let mut grow_rng = rng::derive(8, "ray");
        let grown =
            grow_centerlines(&params, (40, 40, 8), DEFAULT_SPACING_UM, &mut grow_rng).unwrap();
        let phantom = dilate_to_mask(&grown, &[6.0]).unwrap();
        let (d1, d2) = distance_maps(&phantom.mask, DEFAULT_SPACING_UM).unwrap();
        let e = endothelium(&d1, &d2, 2.0, 4.0).unwrap();

        // March along +x from a boundary-adjacent background voxel; E must be
        // non-increasing once outside (d1 grows, d2 stays 0).
        let mut checked = 0;
        'outer: for z in 0..8 {
            for y in 0..40 {
                for x in 0..30 {
                    if phantom.mask.at(x, y, z) != 0.0 && phantom.mask.at(x + 1, y, z) == 0.0 {
                        let ray: Vec<f64> =
                            (1..8).map(|dx| e.at(x + dx, y, z)).collect();
                        for w in ray.windows(2) {
                            assert!(w[1] <= w[0] + 1e-12);
                        }
                        checked += 1;
                        if checked > 5 {
                            break 'outer;
                        }
                    }
                }
            }
        }
        assert!(checked > 0);
    }

    #[test]
    fn corrupt_with_zero_params_is_identity() {
        let params = PhantomParams {
            gaussian_sd: 0.0,
            snp_fraction: 0.0,
            poisson_scale: 0.0,
            jitter_max_vox: 0,
            ..PhantomParams::default()
        };
        let mut v = Volume::zeros((10, 10, 3), DEFAULT_SPACING_UM, VolumeKind::Intensity);
        for (i, x) in v.data.iter_mut().enumerate() {
            *x = (i % 7) as f64 / 7.0;
        }
        let mut rng = rng::derive(0, "noise");
        let out = corrupt(&v, &params, &mut rng);
        assert_eq!(out.data, v.data);
    }

    #[test]
    fn salt_and_pepper_hits_about_the_expected_count() {
        let params = PhantomParams {
            gaussian_sd: 0.0,
            snp_fraction: 0.01,
            poisson_scale: 0.0,
            jitter_max_vox: 0,
            ..PhantomParams::default()
        };
        let v = Volume {
            dims: (100, 100, 10),
            spacing_um: DEFAULT_SPACING_UM,
            data: vec![0.5; 100 * 100 * 10],
            kind: VolumeKind::Intensity,
        };
        let mut rng = rng::derive(4, "snp");
        let out = corrupt(&v, &params, &mut rng);
        let changed = out.data.iter().filter(|&&v| v != 0.5).count();
        // Binomial(1e5, 0.01): mean 1000, sd ~31.5; allow 4 sigma.
        let expected = 1000.0;
        let sd = (1e5f64 * 0.01 * 0.99).sqrt();
        assert!(
            (changed as f64 - expected).abs() < 4.0 * sd,
            "changed {changed}"
        );
    }

    #[test]
    fn corrupt_is_reproducible_for_fixed_seed() {
        let params = PhantomParams::default();
        let v = Volume {
            dims: (20, 20, 4),
            spacing_um: DEFAULT_SPACING_UM,
            data: (0..1600).map(|i| (i % 11) as f64 / 11.0).collect(),
            kind: VolumeKind::Intensity,
        };
        let a = corrupt(&v, &params, &mut rng::derive(9, "rep"));
        let b = corrupt(&v, &params, &mut rng::derive(9, "rep"));
        assert_eq!(a.data, b.data);
    }
}
