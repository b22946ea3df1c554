//! Dataset generation: phantom triplets plus tile index, written to disk.

use super::phantom::make_phantom;
use super::{PhantomParams, Volume};
use crate::io::{write_vvol, VvolDtype};
use crate::train::tiling::tile_volumes;
use crate::{Error, Result};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

/// On-disk layout of one generated dataset.
#[derive(Debug, Clone)]
pub struct DatasetLayout {
    pub n_volumes: usize,
    pub vol_dims: (usize, usize, usize),
    pub tile_dims: (usize, usize, usize),
    pub overlap: f64,
    pub spacing_um: (f64, f64, f64),
    pub seed: u64,
}

/// Paths of a generated triplet.
#[derive(Debug, Clone)]
pub struct Triplet {
    pub image: PathBuf,
    pub mask: PathBuf,
    pub skeleton: PathBuf,
}

#[derive(Debug, Clone)]
pub struct GeneratedDataset {
    pub dir: PathBuf,
    pub triplets: Vec<Triplet>,
    pub index_path: PathBuf,
    pub warnings: Vec<String>,
}

/// Generate `layout.n_volumes` phantoms and write them under `dir`.
///
/// Volumes derive their seeds from `(layout.seed, volume index)`, so the
/// per-volume bytes do not depend on generation order.
pub fn generate_dataset(
    params: &PhantomParams,
    layout: &DatasetLayout,
    dir: &Path,
    label: &str,
) -> Result<GeneratedDataset> {
    if layout.tile_dims.0 > layout.vol_dims.0
        || layout.tile_dims.1 > layout.vol_dims.1
        || layout.tile_dims.2 > layout.vol_dims.2
    {
        return Err(Error::Validation(format!(
            "tile dims {:?} exceed volume dims {:?}",
            layout.tile_dims, layout.vol_dims
        )));
    }
    params.validate()?;
    fs::create_dir_all(dir).map_err(|e| Error::io(dir.display().to_string(), e))?;

    let mut triplets = Vec::new();
    let mut warnings = Vec::new();
    for vol in 0..layout.n_volumes {
        let phantom = make_phantom(
            params,
            layout.vol_dims,
            layout.spacing_um,
            layout.seed,
            &format!("{label}/vol/{vol}"),
        )?;
        warnings.extend(phantom.warnings.iter().cloned());
        let triplet = Triplet {
            image: dir.join(format!("vol_{vol:03}.image.vvol")),
            mask: dir.join(format!("vol_{vol:03}.mask.vvol")),
            skeleton: dir.join(format!("vol_{vol:03}.skel.vvol")),
        };
        write_vvol(&triplet.image, &phantom.image, VvolDtype::F32)?;
        write_vvol(&triplet.mask, &phantom.mask, VvolDtype::U8)?;
        write_vvol(&triplet.skeleton, &phantom.skeleton, VvolDtype::U8)?;
        triplets.push(triplet);
    }

    // Tile index over the uniform grid.
    let dims = vec![layout.vol_dims; layout.n_volumes];
    let index = tile_volumes(&dims, layout.tile_dims, layout.overlap)?;
    let mut text = String::new();
    let _ = writeln!(text, "# vesselnet dataset index");
    let _ = writeln!(text, "version=1");
    let _ = writeln!(text, "seed={}", layout.seed);
    let _ = writeln!(text, "n_volumes={}", layout.n_volumes);
    let _ = writeln!(
        text,
        "vol_dims={}x{}x{}",
        layout.vol_dims.0, layout.vol_dims.1, layout.vol_dims.2
    );
    let _ = writeln!(
        text,
        "tile_dims={}x{}x{}",
        layout.tile_dims.0, layout.tile_dims.1, layout.tile_dims.2
    );
    let _ = writeln!(text, "overlap={}", layout.overlap);
    let _ = writeln!(
        text,
        "spacing_um={},{},{}",
        layout.spacing_um.0, layout.spacing_um.1, layout.spacing_um.2
    );
    let _ = writeln!(text, "[volumes]");
    for (i, t) in triplets.iter().enumerate() {
        let _ = writeln!(
            text,
            "{i} {} {} {}",
            file_name(&t.image),
            file_name(&t.mask),
            file_name(&t.skeleton)
        );
    }
    let _ = writeln!(text, "[tiles]");
    for t in &index.tiles {
        let _ = writeln!(
            text,
            "{} {} {} {} {} {} {}",
            t.volume, t.origin.0, t.origin.1, t.origin.2, t.dims.0, t.dims.1, t.dims.2
        );
    }
    let index_path = dir.join("dataset.txt");
    fs::write(&index_path, text).map_err(|e| Error::io(index_path.display().to_string(), e))?;

    Ok(GeneratedDataset {
        dir: dir.to_path_buf(),
        triplets,
        index_path,
        warnings,
    })
}

fn file_name(p: &Path) -> String {
    p.file_name().unwrap().to_string_lossy().into_owned()
}

/// Load every triplet of a generated dataset back into memory.
pub fn load_triplets(dataset: &GeneratedDataset) -> Result<Vec<(Volume, Volume, Volume)>> {
    dataset
        .triplets
        .iter()
        .map(|t| {
            let (mut image, _) = crate::io::read_vvol(&t.image)?;
            let (mut mask, _) = crate::io::read_vvol(&t.mask)?;
            let (mut skeleton, _) = crate::io::read_vvol(&t.skeleton)?;
            image.kind = super::VolumeKind::Intensity;
            mask.kind = super::VolumeKind::Mask;
            skeleton.kind = super::VolumeKind::Skeleton;
            Ok((image, mask, skeleton))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth::DEFAULT_SPACING_UM;
    use sha2::{Digest, Sha256};
    use tempfile::tempdir;

    fn small_layout(seed: u64) -> DatasetLayout {
        DatasetLayout {
            n_volumes: 2,
            vol_dims: (32, 32, 8),
            tile_dims: (16, 16, 8),
            overlap: 0.0,
            spacing_um: DEFAULT_SPACING_UM,
            seed,
        }
    }

    fn dir_hash(dir: &Path) -> Vec<(String, [u8; 32])> {
        let mut entries: Vec<_> = fs::read_dir(dir)
            .unwrap()
            .map(|e| e.unwrap().path())
            .collect();
        entries.sort();
        entries
            .into_iter()
            .map(|p| {
                let mut h = Sha256::new();
                h.update(fs::read(&p).unwrap());
                (
                    p.file_name().unwrap().to_string_lossy().into_owned(),
                    h.finalize().into(),
                )
            })
            .collect()
    }

    #[test]
    fn regeneration_is_byte_identical() {
        let params = PhantomParams {
            n_vessels: 2,
            ..PhantomParams::default()
        };
        let d1 = tempdir().unwrap();
        let d2 = tempdir().unwrap();
        generate_dataset(&params, &small_layout(9), d1.path(), "ds").unwrap();
        generate_dataset(&params, &small_layout(9), d2.path(), "ds").unwrap();
        assert_eq!(dir_hash(d1.path()), dir_hash(d2.path()));

        let d3 = tempdir().unwrap();
        generate_dataset(&params, &small_layout(10), d3.path(), "ds").unwrap();
        assert_ne!(dir_hash(d1.path()), dir_hash(d3.path()));
    }

    #[test]
    fn every_tile_skeleton_is_subset_of_mask() {
        let params = PhantomParams {
            n_vessels: 2,
            ..PhantomParams::default()
        };
        let dir = tempdir().unwrap();
        let ds = generate_dataset(&params, &small_layout(4), dir.path(), "ds").unwrap();
        for (_, mask, skeleton) in load_triplets(&ds).unwrap() {
            assert!(skeleton.subset_of(&mask));
        }
    }

    #[test]
    fn index_lists_volumes_and_tiles() {
        let params = PhantomParams::default();
        let dir = tempdir().unwrap();
        let ds = generate_dataset(&params, &small_layout(1), dir.path(), "ds").unwrap();
        let text = fs::read_to_string(&ds.index_path).unwrap();
        assert!(text.contains("[volumes]"));
        assert!(text.contains("[tiles]"));
        // 32x32x8 with 16x16x8 tiles, no overlap: 4 tiles per volume.
        let tile_lines = text
            .lines()
            .skip_while(|l| *l != "[tiles]")
            .skip(1)
            .count();
        assert_eq!(tile_lines, 8);
    }
}
