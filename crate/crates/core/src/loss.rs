//! Training losses: binary cross-entropy, a Dice-coefficient loss, and
//! pixel-weighted BCE with a Gaussian-spread class-imbalance weight map.

use crate::synth::Volume;
use crate::tensor::{Graph, NdArray, Tensor};
use crate::{Error, Result};

/// Binary cross-entropy, summed over all elements:
/// `-Σ_i [y_i log(x_i) + (1-y_i) log(1-x_i)]`.
///
/// `log` clamps its input at 1e-12, which keeps saturated predictions finite.
pub fn bce_loss(g: &mut Graph, x: Tensor, y: Tensor) -> Result<Tensor> {
    weighted_bce_impl(g, x, y, None)
}

/// Pixel-weighted binary cross-entropy:
/// `-Σ_i W_i [y_i log(x_i) + (1-y_i) log(1-x_i)]`.
///
/// With `w ≡ 1` this equals [`bce_loss`] bit-for-bit.
pub fn weighted_bce_loss(g: &mut Graph, x: Tensor, y: Tensor, w: Tensor) -> Result<Tensor> {
    if g.shape(x) != g.shape(w) {
        return Err(Error::ShapeMismatch {
            op: "weighted_bce_loss",
            left: g.shape(x).to_vec(),
            right: g.shape(w).to_vec(),
        });
    }
    weighted_bce_impl(g, x, y, Some(w))
}

fn weighted_bce_impl(g: &mut Graph, x: Tensor, y: Tensor, w: Option<Tensor>) -> Result<Tensor> {
    if g.shape(x) != g.shape(y) {
        return Err(Error::ShapeMismatch {
            op: "bce_loss",
            left: g.shape(x).to_vec(),
            right: g.shape(y).to_vec(),
        });
    }
    let log_x = g.log(x);
    let pos = g.mul(y, log_x)?;
    let one_minus_y = g.one_minus(y);
    let one_minus_x = g.one_minus(x);
    let log_one_minus_x = g.log(one_minus_x);
    let neg_term = g.mul(one_minus_y, log_one_minus_x)?;
    let mut per_element = g.add(pos, neg_term)?;
    if let Some(w) = w {
        per_element = g.mul(w, per_element)?;
    }
    let total = g.sum(per_element);
    Ok(g.neg(total))
}

/// Dice-coefficient loss: `1 - 2 (x·y + δ) / (|x| + |y| + δ)` with `|·|` the
/// element sum.
///
/// Implemented literally; for `x = y = 0` and δ > 0 the value is the
/// degenerate `1 - 2 = -1` the formula dictates, not a patched 0.
pub fn dice_loss(g: &mut Graph, x: Tensor, y: Tensor, delta: f64) -> Result<Tensor> {
    if g.shape(x) != g.shape(y) {
        return Err(Error::ShapeMismatch {
            op: "dice_loss",
            left: g.shape(x).to_vec(),
            right: g.shape(y).to_vec(),
        });
    }
    let xy = g.mul(x, y)?;
    let dot = g.sum(xy);
    let numer = g.add_scalar(dot, delta);
    let numer = g.mul_scalar(numer, 2.0);
    let sx = g.sum(x);
    let sy = g.sum(y);
    let denom = g.add(sx, sy)?;
    let denom = g.add_scalar(denom, delta);
    let frac = g.div(numer, denom)?;
    let neg = g.neg(frac);
    Ok(g.add_scalar(neg, 1.0))
}

/// Per-voxel loss weights `W = (1-β) (y * g_σ) + β`.
#[derive(Debug, Clone)]
pub struct WeightMap {
    pub w: Volume,
    pub beta: f64,
    pub sigma_um: f64,
}

/// Build the pixel-weight map for a binary skeleton volume.
///
/// The Gaussian kernel works in physical µm coordinates (anisotropy-aware)
/// and is peak-normalized to 1; the blurred skeleton is clamped at 1 before
/// the affine map so `W` stays within `[β, 1]`.
pub fn weight_map(y: &Volume, beta: f64, sigma_um: f64) -> Result<WeightMap> {
    if beta <= 0.0 || beta >= 1.0 {
        return Err(Error::Validation(format!(
            "beta must lie strictly inside (0,1), got {beta}"
        )));
    }
    if sigma_um <= 0.0 {
        return Err(Error::Validation("sigma_um must be positive".into()));
    }
    let (nx, ny, nz) = y.dims;
    let (sx, sy, sz) = y.spacing_um;
    // Truncate the kernel at 3.5 sigma.
    let reach = 3.5 * sigma_um;
    let (rx, ry, rz) = (
        (reach / sx).floor() as isize,
        (reach / sy).floor() as isize,
        (reach / sz).floor() as isize,
    );
    let denom = 2.0 * sigma_um * sigma_um;

    let mut blurred = vec![0.0f64; y.len()];
    for z in 0..nz {
        for yy in 0..ny {
            for x in 0..nx {
                if y.at(x, yy, z) == 0.0 {
                    continue;
                }
                for dz in -rz..=rz {
                    let cz = z as isize + dz;
                    if cz < 0 || cz >= nz as isize {
                        continue;
                    }
                    for dy in -ry..=ry {
                        let cy = yy as isize + dy;
                        if cy < 0 || cy >= ny as isize {
                            continue;
                        }
                        for dx in -rx..=rx {
                            let cx = x as isize + dx;
                            if cx < 0 || cx >= nx as isize {
                                continue;
                            }
                            let d2 = (dx as f64 * sx).powi(2)
                                + (dy as f64 * sy).powi(2)
                                + (dz as f64 * sz).powi(2);
                            if d2 > reach * reach {
                                continue;
                            }
                            let idx = y.index(cx as usize, cy as usize, cz as usize);
                            blurred[idx] += (-d2 / denom).exp();
                        }
                    }
                }
            }
        }
    }

    let mut w = y.clone();
    w.kind = crate::synth::VolumeKind::Intensity;
    for (out, b) in w.data.iter_mut().zip(&blurred) {
        *out = (1.0 - beta) * b.min(1.0) + beta;
    }
    Ok(WeightMap { w, beta, sigma_um })
}

/// Class-imbalance ratio β: foreground voxels over total voxels across the
/// training targets, clamped to `[1e-4, 0.5]`.
pub fn class_imbalance_beta(targets: &[&Volume]) -> f64 {
    let mut fg = 0usize;
    let mut total = 0usize;
    for v in targets {
        fg += v.count_foreground();
        total += v.len();
    }
    if total == 0 {
        return 1e-4;
    }
    (fg as f64 / total as f64).clamp(1e-4, 0.5)
}

/// Lift a volume's values into a constant graph leaf (flat shape; the losses
/// reduce over all elements, so only the element order matters).
pub fn volume_leaf(g: &mut Graph, v: &Volume) -> Tensor {
    g.leaf(NdArray::from_vec(v.data.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use crate::synth::{Volume, VolumeKind, DEFAULT_SPACING_UM};
    use crate::tensor::{Graph, NdArray};
    use rand::Rng;

    fn leaf(g: &mut Graph, v: Vec<f64>) -> Tensor {
        g.leaf(NdArray::from_vec(v))
    }

    #[test]
    fn bce_half_predictions() {
        let mut g = Graph::new();
        let x = leaf(&mut g, vec![0.5, 0.5]);
        let y = leaf(&mut g, vec![0.0, 1.0]);
        let l = bce_loss(&mut g, x, y).unwrap();
        assert!((g.data(l).item() - 2.0 * std::f64::consts::LN_2).abs() < 1e-12);
    }

    #[test]
    fn bce_perfect_prediction_is_near_zero() {
        let mut g = Graph::new();
        let x = leaf(&mut g, vec![0.0, 1.0, 1.0, 0.0]);
        let y = leaf(&mut g, vec![0.0, 1.0, 1.0, 0.0]);
        let l = bce_loss(&mut g, x, y).unwrap();
        assert!(g.data(l).item().abs() < 1e-9);
    }

    #[test]
    fn bce_matches_hand_summed_oracle() {
        let mut rng = rng::derive(1, "bce-oracle");
        let x: Vec<f64> = (0..32).map(|_| rng.gen_range(0.01..0.99)).collect();
        let y: Vec<f64> = (0..32).map(|_| f64::from(rng.gen_bool(0.4))).collect();
        let oracle: f64 = -x
            .iter()
            .zip(&y)
            .map(|(x, y)| y * x.max(1e-12).ln() + (1.0 - y) * (1.0 - x).max(1e-12).ln())
            .sum::<f64>();
        let mut g = Graph::new();
        let xt = leaf(&mut g, x);
        let yt = leaf(&mut g, y);
        let l = bce_loss(&mut g, xt, yt).unwrap();
        assert!((g.data(l).item() - oracle).abs() < 1e-12);
    }

    #[test]
    fn dice_literal_values() {
        let mut g = Graph::new();
        // x = y = [1,1,1,1], delta 1: 1 - 2*5/9 = -1/9.
        let x = leaf(&mut g, vec![1.0; 4]);
        let y = leaf(&mut g, vec![1.0; 4]);
        let l = dice_loss(&mut g, x, y, 1.0).unwrap();
        assert!((g.data(l).item() + 1.0 / 9.0).abs() < 1e-12);

        // All zeros: documented degenerate value -1.
        let x0 = leaf(&mut g, vec![0.0; 4]);
        let y0 = leaf(&mut g, vec![0.0; 4]);
        let l0 = dice_loss(&mut g, x0, y0, 1.0).unwrap();
        assert!((g.data(l0).item() + 1.0).abs() < 1e-12);

        // Disjoint supports with |x| = |y| = 10: 1 - 2/21.
        let mut xv = vec![0.0; 20];
        let mut yv = vec![0.0; 20];
        for i in 0..10 {
            xv[i] = 1.0;
            yv[10 + i] = 1.0;
        }
        let xd = leaf(&mut g, xv);
        let yd = leaf(&mut g, yv);
        let ld = dice_loss(&mut g, xd, yd, 1.0).unwrap();
        assert!((g.data(ld).item() - (1.0 - 2.0 / 21.0)).abs() < 1e-12);
    }

    #[test]
    fn weighted_bce_with_unit_weights_is_bce_bit_exact() {
        let mut rng = rng::derive(2, "wbce-ones");
        let x: Vec<f64> = (0..64).map(|_| rng.gen_range(0.001..0.999)).collect();
        let y: Vec<f64> = (0..64).map(|_| f64::from(rng.gen_bool(0.2))).collect();

        let mut g1 = Graph::new();
        let xt = leaf(&mut g1, x.clone());
        let yt = leaf(&mut g1, y.clone());
        let plain = bce_loss(&mut g1, xt, yt).unwrap();

        let mut g2 = Graph::new();
        let xt2 = leaf(&mut g2, x);
        let yt2 = leaf(&mut g2, y);
        let w = leaf(&mut g2, vec![1.0; 64]);
        let weighted = weighted_bce_loss(&mut g2, xt2, yt2, w).unwrap();

        assert_eq!(
            g1.data(plain).item().to_bits(),
            g2.data(weighted).item().to_bits()
        );
    }

    #[test]
    fn weighted_bce_constant_beta_scales_bce() {
        let mut rng = rng::derive(3, "wbce-beta");
        let x: Vec<f64> = (0..32).map(|_| rng.gen_range(0.01..0.99)).collect();
        let y = vec![0.0; 32];
        let beta = 0.125;

        let mut g1 = Graph::new();
        let xt = leaf(&mut g1, x.clone());
        let yt = leaf(&mut g1, y.clone());
        let plain = bce_loss(&mut g1, xt, yt).unwrap();

        let mut g2 = Graph::new();
        let xt2 = leaf(&mut g2, x);
        let yt2 = leaf(&mut g2, y);
        let w = leaf(&mut g2, vec![beta; 32]);
        let weighted = weighted_bce_loss(&mut g2, xt2, yt2, w).unwrap();

        let a = g2.data(weighted).item();
        let b = beta * g1.data(plain).item();
        assert!((a - b).abs() <= 1e-12 * b.abs());
    }

    #[test]
    fn weighted_bce_matches_direct_summation_oracle() {
        let mut rng = rng::derive(4, "wbce-oracle");
        let x: Vec<f64> = (0..48).map(|_| rng.gen_range(0.01..0.99)).collect();
        let y: Vec<f64> = (0..48).map(|_| f64::from(rng.gen_bool(0.3))).collect();
        let w: Vec<f64> = (0..48).map(|_| rng.gen_range(0.1..1.0)).collect();
        let oracle: f64 = -x
            .iter()
            .zip(y.iter().zip(&w))
            .map(|(x, (y, w))| {
                w * (y * x.max(1e-12).ln() + (1.0 - y) * (1.0 - x).max(1e-12).ln())
            })
            .sum::<f64>();
        let mut g = Graph::new();
        let xt = leaf(&mut g, x);
        let yt = leaf(&mut g, y);
        let wt = leaf(&mut g, w);
        let l = weighted_bce_loss(&mut g, xt, yt, wt).unwrap();
        assert!((g.data(l).item() - oracle).abs() < 1e-12 * oracle.abs().max(1.0));
    }

    fn skeleton_volume(dims: (usize, usize, usize), points: &[(usize, usize, usize)]) -> Volume {
        let mut v = Volume::zeros(dims, DEFAULT_SPACING_UM, VolumeKind::Skeleton);
        for &(x, y, z) in points {
            v.set(x, y, z, 1.0);
        }
        v
    }

    #[test]
    fn weight_map_of_empty_skeleton_is_beta() {
        let v = skeleton_volume((8, 8, 4), &[]);
        let wm = weight_map(&v, 0.05, 6.0).unwrap();
        assert!(wm.w.data.iter().all(|&w| w == 0.05));
    }

    #[test]
    fn weight_map_peaks_at_one_on_isolated_voxel() {
        let v = skeleton_volume((17, 17, 9), &[(8, 8, 4)]);
        let beta = 0.05;
        let wm = weight_map(&v, beta, 6.0).unwrap();
        let center = wm.w.at(8, 8, 4);
        assert!((center - 1.0).abs() < 1e-12, "{center}");
        assert!(wm.w.data.iter().all(|&w| (beta..=1.0 + 1e-12).contains(&w)));
    }

    #[test]
    fn weight_map_tail_at_three_sigma_vs_brute_force() {
        let sigma = 4.0;
        let beta = 0.1;
        let dims = (41, 21, 9);
        let v = skeleton_volume(dims, &[(5, 10, 4)]);
        let wm = weight_map(&v, beta, sigma).unwrap();

        // Brute-force oracle: direct kernel sum over the single source voxel.
        let (sx, _, _) = v.spacing_um;
        let dx_vox = (3.0 * sigma / sx).ceil() as usize;
        let probe = (5 + dx_vox, 10, 4);
        let d_um = dx_vox as f64 * sx;
        let oracle = (1.0 - beta) * (-(d_um * d_um) / (2.0 * sigma * sigma)).exp() + beta;
        let got = wm.w.at(probe.0, probe.1, probe.2);
        assert!((got - oracle).abs() < 1e-12);
        assert!(got <= beta + (1.0 - beta) * 0.012, "{got}");
    }

    #[test]
    fn weight_map_translation_invariance_away_from_borders() {
        let dims = (31, 31, 11);
        let a = skeleton_volume(dims, &[(12, 15, 5)]);
        let b = skeleton_volume(dims, &[(17, 15, 5)]);
        let wa = weight_map(&a, 0.08, 4.0).unwrap();
        let wb = weight_map(&b, 0.08, 4.0).unwrap();
        for off in 0..4usize {
            let va = wa.w.at(12 + off, 15, 5);
            let vb = wb.w.at(17 + off, 15, 5);
            assert!((va - vb).abs() < 1e-12);
        }
    }

    #[test]
    fn weight_map_rejects_bad_beta() {
        let v = skeleton_volume((4, 4, 2), &[]);
        assert!(weight_map(&v, 0.0, 2.0).is_err());
        assert!(weight_map(&v, 1.0, 2.0).is_err());
    }

    #[test]
    fn beta_is_clamped_class_ratio() {
        let mut v = Volume::zeros((10, 10, 1), DEFAULT_SPACING_UM, VolumeKind::Skeleton);
        for i in 0..10 {
            v.data[i] = 1.0;
        }
        let beta = class_imbalance_beta(&[&v]);
        assert!((beta - 0.1).abs() < 1e-12);

        let empty = Volume::zeros((10, 10, 1), DEFAULT_SPACING_UM, VolumeKind::Skeleton);
        assert_eq!(class_imbalance_beta(&[&empty]), 1e-4);
    }
}
