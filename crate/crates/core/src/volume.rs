//! Lattice data model: masked 3D voxel grids, the latent label field, the
//! first-order neighborhood structure, binary volume I/O and synthetic data
//! generation.
//!
//! A volume is a dense `nx × ny × nz` lattice of `d`-channel voxel vectors
//! together with a binary analysis mask. Sites outside the mask carry no
//! labels and are never visited as neighbors; boundary voxels simply have
//! fewer than six neighbors.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::estimate::MixtureModel;
use crate::mrf::{self, LikelihoodTable};

const VOLM_MAGIC: &[u8; 4] = b"VOLM";
const VOLM_VERSION: u16 = 1;

/// Label value marking out-of-mask sites.
pub const LABEL_SENTINEL: u8 = u8::MAX;

/// A masked 3D lattice of `d`-channel voxel vectors.
///
/// Data is stored channel-major within voxel and row-major over sites with
/// `x` fastest and `z` slowest, matching the on-disk layout. Values are kept
/// as `f32` so that a save/load round trip is the identity.
#[derive(Debug, Clone, PartialEq)]
pub struct VolumeGrid {
    dims: (usize, usize, usize),
    channels: usize,
    voxel_size_mm: [f32; 3],
    data: Vec<f32>,
    mask: Vec<bool>,
}

impl VolumeGrid {
    pub fn new(
        dims: (usize, usize, usize),
        channels: usize,
        voxel_size_mm: [f32; 3],
        data: Vec<f32>,
        mask: Vec<bool>,
    ) -> Result<Self> {
        let n = dims.0 * dims.1 * dims.2;
        if dims.0 == 0 || dims.1 == 0 || dims.2 == 0 {
            return Err(Error::Usage("volume dimensions must be positive".into()));
        }
        if channels == 0 {
            return Err(Error::Usage("channel count must be at least 1".into()));
        }
        if voxel_size_mm.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::Usage("voxel size must be positive".into()));
        }
        if data.len() != n * channels {
            return Err(Error::Usage(format!(
                "data length {} does not match {} sites x {} channels",
                data.len(),
                n,
                channels
            )));
        }
        if mask.len() != n {
            return Err(Error::Usage(format!(
                "mask length {} does not match {} sites",
                mask.len(),
                n
            )));
        }
        let grid = Self {
            dims,
            channels,
            voxel_size_mm,
            data,
            mask,
        };
        grid.check_finite()?;
        Ok(grid)
    }

    /// All-true mask, zero-filled data.
    pub fn zeros(dims: (usize, usize, usize), channels: usize, voxel_size_mm: [f32; 3]) -> Self {
        let n = dims.0 * dims.1 * dims.2;
        Self {
            dims,
            channels,
            voxel_size_mm,
            data: vec![0.0; n * channels],
            mask: vec![true; n],
        }
    }

    fn check_finite(&self) -> Result<()> {
        for site in 0..self.n_sites() {
            if self.mask[site] {
                let off = site * self.channels;
                if self.data[off..off + self.channels].iter().any(|v| !v.is_finite()) {
                    return Err(Error::Data(format!(
                        "non-finite value at in-mask site {site}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        self.dims
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn voxel_size_mm(&self) -> [f32; 3] {
        self.voxel_size_mm
    }

    pub fn n_sites(&self) -> usize {
        self.dims.0 * self.dims.1 * self.dims.2
    }

    pub fn n_in_mask(&self) -> usize {
        self.mask.iter().filter(|&&m| m).count()
    }

    #[inline]
    pub fn site_index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims.0 * (y + self.dims.1 * z)
    }

    #[inline]
    pub fn site_coords(&self, site: usize) -> (usize, usize, usize) {
        let x = site % self.dims.0;
        let y = (site / self.dims.0) % self.dims.1;
        let z = site / (self.dims.0 * self.dims.1);
        (x, y, z)
    }

    pub fn mask(&self) -> &[bool] {
        &self.mask
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    /// Voxel vector at a site, widened to f64.
    pub fn voxel(&self, site: usize) -> DVector<f64> {
        let off = site * self.channels;
        DVector::from_iterator(
            self.channels,
            self.data[off..off + self.channels].iter().map(|&v| v as f64),
        )
    }

    /// Selected channels of a voxel, widened to f64.
    pub fn voxel_channels(&self, site: usize, chans: &[usize]) -> DVector<f64> {
        let off = site * self.channels;
        DVector::from_iterator(chans.len(), chans.iter().map(|&c| self.data[off + c] as f64))
    }

    pub fn set_voxel(&mut self, site: usize, values: &[f32]) {
        let off = site * self.channels;
        self.data[off..off + self.channels].copy_from_slice(values);
    }

    /// Restrict the mask to an inclusive z-slice range.
    pub fn restrict_slices(&mut self, z_min: usize, z_max: usize) {
        for site in 0..self.n_sites() {
            let (_, _, z) = self.site_coords(site);
            if z < z_min || z > z_max {
                self.mask[site] = false;
            }
        }
    }
}

/// Class label per in-mask site, `LABEL_SENTINEL` elsewhere.
///
/// Labels are 0-based internally (class `k` of `0..K`).
#[derive(Debug, Clone, PartialEq)]
pub struct LabelField {
    labels: Vec<u8>,
    k: usize,
}

impl LabelField {
    pub fn new(labels: Vec<u8>, k: usize) -> Result<Self> {
        if k == 0 || k > 64 {
            return Err(Error::Parameter(format!("class count {k} out of range")));
        }
        for &l in &labels {
            if l != LABEL_SENTINEL && l as usize >= k {
                return Err(Error::Parameter(format!("label {l} exceeds K = {k}")));
            }
        }
        Ok(Self { labels, k })
    }

    /// Sentinel-filled field over `n` lattice sites.
    pub fn sentinel(n: usize, k: usize) -> Self {
        Self {
            labels: vec![LABEL_SENTINEL; n],
            k,
        }
    }

    pub fn k(&self) -> usize {
        self.k
    }

    #[inline]
    pub fn get(&self, site: usize) -> u8 {
        self.labels[site]
    }

    #[inline]
    pub fn set(&mut self, site: usize, label: u8) {
        self.labels[site] = label;
    }

    pub fn labels(&self) -> &[u8] {
        &self.labels
    }
}

/// First-order (6-neighbor) in-mask neighborhood structure with the
/// checkerboard coloring used for blocked Gibbs updates.
///
/// In-mask sites are enumerated by *rank* (position in `sites`); most
/// per-voxel arrays elsewhere in the crate are indexed by rank.
#[derive(Debug, Clone)]
pub struct Neighborhood {
    sites: Vec<u32>,
    rank_of: Vec<u32>,
    nbrs: Vec<[u32; 6]>,
    deg: Vec<u8>,
    color: Vec<u8>,
    black: Vec<u32>,
    white: Vec<u32>,
}

pub const NO_RANK: u32 = u32::MAX;

impl Neighborhood {
    pub fn from_mask(dims: (usize, usize, usize), mask: &[bool]) -> Self {
        let (nx, ny, nz) = dims;
        let n = nx * ny * nz;
        assert_eq!(mask.len(), n);
        let mut sites = Vec::new();
        let mut rank_of = vec![NO_RANK; n];
        for site in 0..n {
            if mask[site] {
                rank_of[site] = sites.len() as u32;
                sites.push(site as u32);
            }
        }
        let mut nbrs = vec![[0u32; 6]; sites.len()];
        let mut deg = vec![0u8; sites.len()];
        let mut color = vec![0u8; sites.len()];
        let mut black = Vec::new();
        let mut white = Vec::new();
        for (rank, &site) in sites.iter().enumerate() {
            let site = site as usize;
            let x = site % nx;
            let y = (site / nx) % ny;
            let z = site / (nx * ny);
            color[rank] = ((x + y + z) % 2) as u8;
            if color[rank] == 0 {
                black.push(rank as u32);
            } else {
                white.push(rank as u32);
            }
            let mut push = |s: usize| {
                if mask[s] {
                    nbrs[rank][deg[rank] as usize] = s as u32;
                    deg[rank] += 1;
                }
            };
            if x > 0 {
                push(site - 1);
            }
            if x + 1 < nx {
                push(site + 1);
            }
            if y > 0 {
                push(site - nx);
            }
            if y + 1 < ny {
                push(site + nx);
            }
            if z > 0 {
                push(site - nx * ny);
            }
            if z + 1 < nz {
                push(site + nx * ny);
            }
        }
        Self {
            sites,
            rank_of,
            nbrs,
            deg,
            color,
            black,
            white,
        }
    }

    pub fn len(&self) -> usize {
        self.sites.len()
    }

    /// Total lattice size (in-mask and out-of-mask sites).
    pub fn n_lattice(&self) -> usize {
        self.rank_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }

    /// Flat lattice indices of in-mask sites, ascending.
    pub fn sites(&self) -> &[u32] {
        &self.sites
    }

    #[inline]
    pub fn site(&self, rank: usize) -> usize {
        self.sites[rank] as usize
    }

    #[inline]
    pub fn rank_of(&self, site: usize) -> u32 {
        self.rank_of[site]
    }

    /// In-mask neighbor sites (flat indices) of the in-mask site at `rank`.
    #[inline]
    pub fn neighbors(&self, rank: usize) -> &[u32] {
        &self.nbrs[rank][..self.deg[rank] as usize]
    }

    #[inline]
    pub fn color(&self, rank: usize) -> u8 {
        self.color[rank]
    }

    pub fn black_ranks(&self) -> &[u32] {
        &self.black
    }

    pub fn white_ranks(&self) -> &[u32] {
        &self.white
    }
}

fn read_exact_or_format(r: &mut impl Read, buf: &mut [u8], what: &str) -> Result<()> {
    r.read_exact(buf)
        .map_err(|_| Error::Format(format!("truncated file while reading {what}")))
}

/// Load a volume from the VOLM binary format.
pub fn load_volume(path: impl AsRef<Path>) -> Result<VolumeGrid> {
    let mut r = BufReader::new(File::open(path.as_ref())?);
    let mut magic = [0u8; 4];
    read_exact_or_format(&mut r, &mut magic, "magic")?;
    if &magic != VOLM_MAGIC {
        return Err(Error::Format(format!(
            "bad magic {:?}, expected \"VOLM\"",
            String::from_utf8_lossy(&magic)
        )));
    }
    let mut b2 = [0u8; 2];
    let mut b4 = [0u8; 4];
    read_exact_or_format(&mut r, &mut b2, "version")?;
    let version = u16::from_le_bytes(b2);
    if version != VOLM_VERSION {
        return Err(Error::Format(format!("unsupported VOLM version {version}")));
    }
    let mut dims = [0usize; 3];
    for d in &mut dims {
        read_exact_or_format(&mut r, &mut b4, "dims")?;
        *d = u32::from_le_bytes(b4) as usize;
    }
    read_exact_or_format(&mut r, &mut b2, "channels")?;
    let channels = u16::from_le_bytes(b2) as usize;
    let mut voxel_size = [0f32; 3];
    for v in &mut voxel_size {
        read_exact_or_format(&mut r, &mut b4, "voxel size")?;
        *v = f32::from_le_bytes(b4);
    }
    let n = dims[0] * dims[1] * dims[2];
    let mut mask_bytes = vec![0u8; n];
    read_exact_or_format(&mut r, &mut mask_bytes, "mask")?;
    let mut mask = Vec::with_capacity(n);
    for (i, &b) in mask_bytes.iter().enumerate() {
        match b {
            0 => mask.push(false),
            1 => mask.push(true),
            other => {
                return Err(Error::Format(format!("mask byte {other} at site {i}")));
            }
        }
    }
    let mut payload = vec![0u8; n * channels * 4];
    read_exact_or_format(&mut r, &mut payload, "voxel data")?;
    let mut extra = [0u8; 1];
    if r.read(&mut extra)? != 0 {
        return Err(Error::Format("trailing bytes after voxel data".into()));
    }
    let data: Vec<f32> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect();
    VolumeGrid::new((dims[0], dims[1], dims[2]), channels, voxel_size, data, mask)
}

/// Save a volume in the VOLM binary format. Deterministic byte stream.
pub fn save_volume(grid: &VolumeGrid, path: impl AsRef<Path>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path.as_ref())?);
    w.write_all(VOLM_MAGIC)?;
    w.write_all(&VOLM_VERSION.to_le_bytes())?;
    let (nx, ny, nz) = grid.dims;
    for d in [nx, ny, nz] {
        w.write_all(&(d as u32).to_le_bytes())?;
    }
    w.write_all(&(grid.channels as u16).to_le_bytes())?;
    for v in grid.voxel_size_mm {
        w.write_all(&v.to_le_bytes())?;
    }
    let mask_bytes: Vec<u8> = grid.mask.iter().map(|&m| m as u8).collect();
    w.write_all(&mask_bytes)?;
    let mut payload = Vec::with_capacity(grid.data.len() * 4);
    for &v in &grid.data {
        payload.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&payload)?;
    w.flush()?;
    Ok(())
}

/// Draw a synthetic volume and its generating label field from a model.
///
/// Labels come from the Potts prior alone (blocked Gibbs, `burnin` sweeps,
/// no data term); voxel values are then drawn independently per site from
/// the labeled class distribution. Reproducible for a fixed seed.
pub fn synth_generate(
    model: &MixtureModel,
    dims: (usize, usize, usize),
    voxel_size_mm: [f32; 3],
    mask: &[bool],
    seed: u64,
    burnin: usize,
) -> Result<(VolumeGrid, LabelField)> {
    model.validate()?;
    let k = model.k();
    let d = model.channels();
    let n = dims.0 * dims.1 * dims.2;
    if mask.len() != n {
        return Err(Error::Usage("mask length does not match dims".into()));
    }
    let nb = Neighborhood::from_mask(dims, mask);

    // Initial labels from the class potentials alone.
    let pi = model.mrf().class_prior();
    let mut labels = LabelField::sentinel(n, k);
    for rank in 0..nb.len() {
        let mut rng = crate::mrf::stream_rng(seed, 0, rank as u64);
        let u: f64 = rand::Rng::gen(&mut rng);
        labels.set(nb.site(rank), sample_categorical(&pi, u));
    }
    let flat = LikelihoodTable::zeros(nb.len(), k);
    for sweep in 0..burnin {
        mrf::gibbs_sweep(&mut labels, &nb, &flat, model.mrf(), seed, (sweep + 1) as u64);
    }

    let mut grid = VolumeGrid::zeros(dims, d, voxel_size_mm);
    for site in 0..n {
        grid.mask_mut()[site] = mask[site];
    }
    let mut buf = vec![0f32; d];
    for rank in 0..nb.len() {
        let site = nb.site(rank);
        let class = labels.get(site) as usize;
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed, 0x76616c73, rank as u64));
        let x = model.class(class).sample(&mut rng)?;
        for c in 0..d {
            buf[c] = x[c] as f32;
        }
        grid.set_voxel(site, &buf);
    }
    Ok((grid, labels))
}

impl VolumeGrid {
    pub fn mask_mut(&mut self) -> &mut [bool] {
        &mut self.mask
    }
}

pub(crate) fn sample_categorical(probs: &[f64], u: f64) -> u8 {
    let mut acc = 0.0;
    for (k, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return k as u8;
        }
    }
    (probs.len() - 1) as u8
}

pub(crate) fn mix_seed(seed: u64, tag: u64, idx: u64) -> u64 {
    // SplitMix64-style finalizer over the combined key.
    let mut z = seed
        .wrapping_mul(0x9e3779b97f4a7c15)
        .wrapping_add(tag)
        .wrapping_mul(0xbf58476d1ce4e5b9)
        .wrapping_add(idx);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn demo_grid(dims: (usize, usize, usize), channels: usize) -> VolumeGrid {
        let n = dims.0 * dims.1 * dims.2;
        let data: Vec<f32> = (0..n * channels).map(|i| (i as f32) * 0.25 - 3.0).collect();
        let mask: Vec<bool> = (0..n).map(|i| i % 7 != 0).collect();
        VolumeGrid::new(dims, channels, [1.0, 1.0, 1.33], data, mask).unwrap()
    }

    #[test]
    fn round_trip_identity() {
        let grid = demo_grid((4, 4, 4), 5);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.volm");
        save_volume(&grid, &path).unwrap();
        let back = load_volume(&path).unwrap();
        assert_eq!(grid, back);
    }

    #[test]
    fn save_is_deterministic() {
        let grid = demo_grid((3, 2, 5), 2);
        let dir = tempfile::tempdir().unwrap();
        let p1 = dir.path().join("a.volm");
        let p2 = dir.path().join("b.volm");
        save_volume(&grid, &p1).unwrap();
        save_volume(&grid, &p2).unwrap();
        assert_eq!(std::fs::read(p1).unwrap(), std::fs::read(p2).unwrap());
    }

    #[test]
    fn all_false_mask_round_trips() {
        let mut grid = demo_grid((2, 2, 2), 3);
        grid.mask_mut().fill(false);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("empty.volm");
        save_volume(&grid, &path).unwrap();
        let back = load_volume(&path).unwrap();
        assert_eq!(back.n_in_mask(), 0);
        assert_eq!(grid, back);
    }

    #[test]
    fn file_size_matches_format_arithmetic() {
        let grid = demo_grid((2, 2, 2), 5);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.volm");
        save_volume(&grid, &path).unwrap();
        let header = 4 + 2 + 12 + 2 + 12;
        let expected = header + 8 + 4 * 5 * 8;
        assert_eq!(std::fs::metadata(&path).unwrap().len(), expected as u64);
    }

    #[test]
    fn bad_magic_is_format_error() {
        let grid = demo_grid((2, 2, 2), 1);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.volm");
        save_volume(&grid, &path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes[..4].copy_from_slice(b"XXXX");
        std::fs::write(&path, bytes).unwrap();
        match load_volume(&path) {
            Err(Error::Format(_)) => {}
            other => panic!("expected format error, got {other:?}"),
        }
    }

    #[test]
    fn truncated_file_is_format_error() {
        let grid = demo_grid((3, 3, 3), 2);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.volm");
        save_volume(&grid, &path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        std::fs::write(&path, &bytes[..bytes.len() - 5]).unwrap();
        assert!(matches!(load_volume(&path), Err(Error::Format(_))));
    }

    #[test]
    fn large_volume_mask_popcount() {
        let dims = (192, 192, 192);
        let n = dims.0 * dims.1 * dims.2;
        let mask: Vec<bool> = (0..n).map(|i| (i * 2654435761) % 5 != 0).collect();
        let expected_in_mask = mask.iter().filter(|&&m| m).count();
        let grid = VolumeGrid::new(dims, 5, [1.33; 3], vec![0.0; n * 5], mask).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("big.volm");
        save_volume(&grid, &path).unwrap();

        // Count mask bytes straight from the file, independent of the loader.
        let bytes = std::fs::read(&path).unwrap();
        let header = 32;
        let popcount = bytes[header..header + n].iter().filter(|&&b| b == 1).count();
        assert_eq!(popcount, expected_in_mask);

        let back = load_volume(&path).unwrap();
        assert_eq!(back.n_in_mask(), popcount);
    }

    #[test]
    fn neighborhood_symmetry_and_bipartiteness() {
        let dims = (5, 4, 3);
        let n = dims.0 * dims.1 * dims.2;
        // Mask with a hole in the middle.
        let mask: Vec<bool> = (0..n).map(|i| i % 11 != 3).collect();
        let nb = Neighborhood::from_mask(dims, &mask);
        for rank in 0..nb.len() {
            let site = nb.site(rank);
            for &nbr in nb.neighbors(rank) {
                let nbr_rank = nb.rank_of(nbr as usize);
                assert_ne!(nbr_rank, NO_RANK);
                assert!(nb
                    .neighbors(nbr_rank as usize)
                    .contains(&(site as u32)));
                assert_ne!(nb.color(rank), nb.color(nbr_rank as usize));
            }
        }
        assert_eq!(nb.black_ranks().len() + nb.white_ranks().len(), nb.len());
    }

    #[test]
    fn non_finite_in_mask_rejected() {
        let n = 8;
        let mut data = vec![0.0f32; n * 2];
        data[3] = f32::NAN;
        let res = VolumeGrid::new((2, 2, 2), 2, [1.0; 3], data, vec![true; n]);
        assert!(matches!(res, Err(Error::Data(_))));
    }
}
