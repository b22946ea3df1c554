//! Exact anisotropic Euclidean distance transform.
//!
//! Per-axis lower-envelope propagation (parabola method) with the winning
//! site tracked through every pass. The final distance is re-evaluated from
//! the integer voxel deltas in a fixed expression order, so values match a
//! brute-force scan bit-for-bit.

use super::Volume;
use crate::{Error, Result};

/// Squared distance in the canonical evaluation order shared with oracles:
/// `(wx²·dx² + wy²·dy²) + wz²·dz²`.
#[inline]
fn canonical_sq(dx: f64, dy: f64, dz: f64) -> f64 {
    (dx * dx + dy * dy) + dz * dz
}

struct AxisPass<'a> {
    /// Squared best value per cell so far.
    dist_sq: &'a mut [f64],
    /// Winning site coordinate per cell, one entry per completed axis.
    site: &'a mut [[i32; 3]],
}

/// 1D lower envelope over one line of `n` samples with spacing `w`.
///
/// `f` holds the incoming values at each grid position; `sites` the source
/// voxel recorded so far for each position.
fn envelope_1d(
    f: &[f64],
    sites: &[[i32; 3]],
    w: f64,
    axis: usize,
    out: &mut [f64],
    out_sites: &mut [[i32; 3]],
) {
    let n = f.len();
    // Hull of parabolas y(q) = f[q] + w^2 (x-q)^2.
    let mut v = vec![0usize; n]; // positions of parabolas in the hull
    let mut z = vec![0.0f64; n + 1]; // boundaries between hull parabolas
    let mut k = 0usize;
    let w2 = w * w;

    let mut started = false;
    for q in 0..n {
        if !f[q].is_finite() {
            continue;
        }
        if !started {
            v[0] = q;
            z[0] = f64::NEG_INFINITY;
            z[1] = f64::INFINITY;
            k = 0;
            started = true;
            continue;
        }
        loop {
            let p = v[k];
            // Intersection of parabolas rooted at p and q.
            let s = ((f[q] - f[p]) / w2 + (q * q - p * p) as f64) / (2.0 * (q - p) as f64);
            if s <= z[k] {
                if k == 0 {
                    v[0] = q;
                    z[0] = f64::NEG_INFINITY;
                    z[1] = f64::INFINITY;
                    break;
                }
                k -= 1;
                continue;
            }
            k += 1;
            v[k] = q;
            z[k] = s;
            z[k + 1] = f64::INFINITY;
            break;
        }
    }

    if !started {
        for (o, s) in out.iter_mut().zip(out_sites.iter_mut()) {
            *o = f64::INFINITY;
            *s = [-1, -1, -1];
        }
        return;
    }

    let mut k_read = 0usize;
    for x in 0..n {
        while z[k_read + 1] < x as f64 {
            k_read += 1;
        }
        let q = v[k_read];
        let d = x as f64 - q as f64;
        out[x] = f[q] + w2 * d * d;
        let mut site = sites[q];
        site[axis] = q as i32;
        out_sites[x] = site;
    }
}

fn axis_pass(pass: &mut AxisPass<'_>, dims: (usize, usize, usize), axis: usize, w: f64) {
    let (nx, ny, nz) = dims;
    let index = |x: usize, y: usize, z: usize| (z * ny + y) * nx + x;
    let n = match axis {
        0 => nx,
        1 => ny,
        _ => nz,
    };
    let mut f = vec![0.0f64; n];
    let mut sites = vec![[-1i32; 3]; n];
    let mut out = vec![0.0f64; n];
    let mut out_sites = vec![[-1i32; 3]; n];

    let lines: Vec<(usize, usize)> = match axis {
        0 => (0..nz)
            .flat_map(|z| (0..ny).map(move |y| (y, z)))
            .collect(),
        1 => (0..nz)
            .flat_map(|z| (0..nx).map(move |x| (x, z)))
            .collect(),
        _ => (0..ny)
            .flat_map(|y| (0..nx).map(move |x| (x, y)))
            .collect(),
    };
    for (a, b) in lines {
        for i in 0..n {
            let idx = match axis {
                0 => index(i, a, b),
                1 => index(a, i, b),
                _ => index(a, b, i),
            };
            f[i] = pass.dist_sq[idx];
            sites[i] = pass.site[idx];
        }
        envelope_1d(&f, &sites, w, axis, &mut out, &mut out_sites);
        for i in 0..n {
            let idx = match axis {
                0 => index(i, a, b),
                1 => index(a, i, b),
                _ => index(a, b, i),
            };
            pass.dist_sq[idx] = out[i];
            pass.site[idx] = out_sites[i];
        }
    }
}

/// Distance in µm from every voxel to the nearest site voxel.
fn edt(sites_mask: impl Fn(usize) -> bool, dims: (usize, usize, usize), spacing: (f64, f64, f64), len: usize) -> Vec<f64> {
    let mut dist_sq = vec![f64::INFINITY; len];
    let mut site = vec![[-1i32; 3]; len];
    for i in 0..len {
        if sites_mask(i) {
            dist_sq[i] = 0.0;
        }
    }
    {
        let mut pass = AxisPass {
            dist_sq: &mut dist_sq,
            site: &mut site,
        };
        axis_pass(&mut pass, dims, 0, spacing.0);
        axis_pass(&mut pass, dims, 1, spacing.1);
        axis_pass(&mut pass, dims, 2, spacing.2);
    }

    // Re-evaluate from the winning site in canonical order for exactness.
    let (nx, ny, _) = dims;
    let mut out = vec![0.0f64; len];
    for i in 0..len {
        let s = site[i];
        debug_assert!(s[0] >= 0, "no site reached voxel {i}");
        let x = (i % nx) as i32;
        let y = ((i / nx) % ny) as i32;
        let z = (i / (nx * ny)) as i32;
        let dx = (x - s[0]) as f64 * spacing.0;
        let dy = (y - s[1]) as f64 * spacing.1;
        let dz = (z - s[2]) as f64 * spacing.2;
        out[i] = canonical_sq(dx, dy, dz).sqrt();
    }
    out
}

/// Distance maps `(d1, d2)`: exact anisotropic Euclidean distance in µm to
/// the nearest foreground voxel and to the nearest background voxel.
///
/// `d1` is zero on foreground, `d2` zero on background.
pub fn distance_maps(mask: &Volume, spacing: (f64, f64, f64)) -> Result<(Volume, Volume)> {
    let fg = mask.count_foreground();
    if fg == 0 || fg == mask.len() {
        return Err(Error::SingleClassMask);
    }
    let len = mask.len();
    let d1 = edt(|i| mask.data[i] != 0.0, mask.dims, spacing, len);
    let d2 = edt(|i| mask.data[i] == 0.0, mask.dims, spacing, len);
    let mut v1 = mask.clone();
    v1.kind = super::VolumeKind::Intensity;
    v1.data = d1;
    let mut v2 = v1.clone();
    v2.data = d2;
    Ok((v1, v2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::synth::{VolumeKind, DEFAULT_SPACING_UM};
    use rand::Rng;

    /// O(n^2) all-pairs oracle using the same canonical expression order.
    fn brute_force(mask: &Volume, spacing: (f64, f64, f64), to_foreground: bool) -> Vec<f64> {
        let (nx, ny, nz) = mask.dims;
        let mut sites = Vec::new();
        for z in 0..nz {
            for y in 0..ny {
                for x in 0..nx {
                    let is_fg = mask.at(x, y, z) != 0.0;
                    if is_fg == to_foreground {
                        sites.push((x as f64, y as f64, z as f64));
                    }
                }
            }
        }
        let mut out = vec![0.0; mask.len()];
        for z in 0..nz {
            for y in 0..ny {
                for x in 0..nx {
                    let mut best = f64::INFINITY;
                    for &(sx, sy, sz) in &sites {
                        let dx = (x as f64 - sx) * spacing.0;
                        let dy = (y as f64 - sy) * spacing.1;
                        let dz = (z as f64 - sz) * spacing.2;
                        let d = canonical_sq(dx, dy, dz);
                        if d < best {
                            best = d;
                        }
                    }
                    out[mask.index(x, y, z)] = best.sqrt();
                }
            }
        }
        out
    }

    fn random_mask(seed: u64, dims: (usize, usize, usize), p: f64) -> Volume {
        let mut rng = rng::derive(seed, "edt-mask");
        let mut v = Volume::zeros(dims, DEFAULT_SPACING_UM, VolumeKind::Mask);
        for val in v.data.iter_mut() {
            *val = f64::from(rng.gen_bool(p));
        }
        // Guarantee both classes.
        v.data[0] = 0.0;
        let last = v.len() - 1;
        v.data[last] = 1.0;
        v
    }

    #[test]
    fn foreground_voxels_have_zero_d1() {
        let mask = random_mask(0, (8, 8, 4), 0.2);
        let (d1, d2) = distance_maps(&mask, mask.spacing_um).unwrap();
        for i in 0..mask.len() {
            if mask.data[i] != 0.0 {
                assert_eq!(d1.data[i], 0.0);
                assert!(d2.data[i] > 0.0);
            } else {
                assert_eq!(d2.data[i], 0.0);
                assert!(d1.data[i] > 0.0);
            }
        }
    }

    #[test]
    fn inplane_neighbor_distance_is_one_spacing() {
        let mut mask = Volume::zeros((5, 5, 3), DEFAULT_SPACING_UM, VolumeKind::Mask);
        mask.set(2, 2, 1, 1.0);
        let (d1, _) = distance_maps(&mask, mask.spacing_um).unwrap();
        assert_eq!(d1.at(3, 2, 1), 0.83);
        assert_eq!(d1.at(2, 3, 1), 0.83);
        assert_eq!(d1.at(2, 2, 0), 5.0);
    }

    #[test]
    fn matches_brute_force_exactly_on_random_16_cubed() {
        for seed in 0..6 {
            let mask = random_mask(seed, (16, 16, 16), 0.08);
            let (d1, d2) = distance_maps(&mask, mask.spacing_um).unwrap();
            let b1 = brute_force(&mask, mask.spacing_um, true);
            let b2 = brute_force(&mask, mask.spacing_um, false);
            for i in 0..mask.len() {
                assert_eq!(d1.data[i].to_bits(), b1[i].to_bits(), "seed {seed} d1 @ {i}");
                assert_eq!(d2.data[i].to_bits(), b2[i].to_bits(), "seed {seed} d2 @ {i}");
            }
        }
    }

    #[test]
    fn triangle_inequality_on_subcrops() {
        // d(a) <= d(b) + |a-b| for neighboring voxels a, b.
        let mask = random_mask(11, (16, 16, 8), 0.05);
        let (d1, _) = distance_maps(&mask, mask.spacing_um).unwrap();
        let (nx, ny, nz) = mask.dims;
        let sp = mask.spacing_um;
        for z in 0..nz {
            for y in 0..ny {
                for x in 1..nx {
                    let lhs = d1.at(x, y, z);
                    let rhs = d1.at(x - 1, y, z) + sp.0;
                    assert!(lhs <= rhs + 1e-9);
                }
            }
        }
    }

    #[test]
    fn single_class_mask_rejected() {
        let empty = Volume::zeros((4, 4, 2), DEFAULT_SPACING_UM, VolumeKind::Mask);
        assert!(matches!(
            distance_maps(&empty, empty.spacing_um),
            Err(Error::SingleClassMask)
        ));
    }
}
