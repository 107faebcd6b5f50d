//! Monte Carlo photon-pair detection and synthetic intensified-camera frames.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::Poisson;

use crate::error::{Error, Result};
use crate::grid::SpatialGrid;
use crate::patterns::JointPattern2D;

/// Largest analog value a pixel can hold.
pub const FULL_SCALE: u16 = u16::MAX;

fn fraction_of_full_scale(f: f64) -> u16 {
    libm::round(f * FULL_SCALE as f64).clamp(0.0, FULL_SCALE as f64) as u16
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PeakDistribution {
    Constant(u16),
    /// Uniform on `[lo, hi]`.
    Uniform {
        lo: u16,
        hi: u16,
    },
}

impl PeakDistribution {
    fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> u16 {
        match *self {
            PeakDistribution::Constant(v) => v,
            PeakDistribution::Uniform { lo, hi } => rng.random_range(lo..=hi),
        }
    }

    fn min(&self) -> u16 {
        match *self {
            PeakDistribution::Constant(v) => v,
            PeakDistribution::Uniform { lo, .. } => lo,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CameraModel {
    pub width: usize,
    pub height: usize,
    /// Pixel pitch in metres.
    pub pitch: f64,
    /// Probability that a photon reaching the sensor is registered.
    pub efficiency: f64,
    /// Edge length of the square patch a photon lights up; odd.
    pub patch_size: usize,
    pub peak: PeakDistribution,
    /// Patch neighbors are drawn uniformly in this range of fractions of the peak.
    pub neighbor_fraction: (f64, f64),
    pub threshold: u16,
    /// Mean number of single-pixel dark events per frame.
    pub dark_rate: f64,
    /// Dark events take analog values uniformly in this range.
    pub dark_level: (u16, u16),
    /// First and last row (inclusive) of the readout strip.
    pub strip: (usize, usize),
    pub seed: u64,
}

impl Default for CameraModel {
    fn default() -> Self {
        Self {
            width: 512,
            height: 512,
            pitch: 24e-6,
            efficiency: 0.5,
            patch_size: 3,
            peak: PeakDistribution::Uniform {
                lo: fraction_of_full_scale(0.6),
                hi: FULL_SCALE,
            },
            neighbor_fraction: (0.4, 0.8),
            threshold: fraction_of_full_scale(0.2),
            dark_rate: 0.02,
            dark_level: (fraction_of_full_scale(0.25), fraction_of_full_scale(0.55)),
            strip: (240, 271),
            seed: 1,
        }
    }
}

impl CameraModel {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0
            || self.height == 0
            || self.width > u16::MAX as usize
            || self.height > u16::MAX as usize
        {
            return Err(Error::InvalidCamera(
                "width and height must lie in 1..=65535",
            ));
        }
        if !(self.pitch > 0.0 && self.pitch.is_finite()) {
            return Err(Error::InvalidCamera("pixel pitch must be positive"));
        }
        if !(0.0..=1.0).contains(&self.efficiency) {
            return Err(Error::InvalidCamera(
                "quantum efficiency must lie in [0, 1]",
            ));
        }
        if self.patch_size.is_multiple_of(2) {
            return Err(Error::InvalidCamera("patch size must be odd"));
        }
        if self.strip.0 > self.strip.1 || self.strip.1 >= self.height {
            return Err(Error::InvalidCamera(
                "strip rows must be ordered and inside the frame",
            ));
        }
        let (lo, hi) = self.neighbor_fraction;
        if !(0.0 < lo && lo <= hi && hi < 1.0) {
            return Err(Error::InvalidCamera(
                "neighbor fractions must satisfy 0 < lo <= hi < 1",
            ));
        }
        if let PeakDistribution::Uniform { lo, hi } = self.peak {
            if lo > hi {
                return Err(Error::InvalidCamera("peak range is empty"));
            }
        }
        if self.dark_level.0 > self.dark_level.1 {
            return Err(Error::InvalidCamera("dark level range is empty"));
        }
        if !(self.dark_rate >= 0.0 && self.dark_rate.is_finite()) {
            return Err(Error::InvalidCamera("dark rate must be non-negative"));
        }
        let weakest = lo * self.peak.min() as f64;
        if self.patch_size > 1 && weakest <= self.threshold as f64 {
            log::warn!("patch neighbors can fall below the threshold; some photons will be lost to the size cut");
        }
        Ok(())
    }

    pub fn strip_rows(&self) -> usize {
        self.strip.1 - self.strip.0 + 1
    }

    /// Horizontal pixel centers in metres, symmetric about the optical axis.
    pub fn column_grid(&self) -> SpatialGrid {
        SpatialGrid::centered(self.pitch, self.width)
            .expect("validated camera has a valid column grid")
    }

    /// Column whose cell holds `x`, if any.
    pub fn column_of(&self, x: f64) -> Option<usize> {
        let c = libm::floor(x / self.pitch + 0.5 * self.width as f64);
        (c >= 0.0 && c < self.width as f64).then_some(c as usize)
    }
}

/// A detected photon: pixel and analog peak value.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct PhotonEvent {
    pub row: usize,
    pub col: usize,
    pub peak: u16,
}

/// A photon that survived detection, before rendering.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct PhotonHit {
    pub row: usize,
    pub col: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    width: usize,
    height: usize,
    data: Vec<u16>,
}

impl Frame {
    pub fn zeros(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            data: alloc::vec![0; width * height],
        }
    }

    pub fn from_data(width: usize, height: usize, data: Vec<u16>) -> Result<Self> {
        if data.len() != width * height {
            return Err(Error::ShapeMismatch(
                "frame data length differs from width x height",
            ));
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    /// Row-major pixel values.
    pub fn data(&self) -> &[u16] {
        &self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> u16 {
        self.data[row * self.width + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: u16) {
        self.data[row * self.width + col] = value;
    }

    /// Nonzero pixels in row-major order.
    pub fn to_sparse(&self) -> SparseFrame {
        let lit = self
            .data
            .iter()
            .enumerate()
            .filter(|(_, &v)| v > 0)
            .map(|(i, &v)| Deposit {
                row: i / self.width,
                col: i % self.width,
                value: v,
            })
            .collect();
        SparseFrame {
            width: self.width,
            height: self.height,
            lit,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub struct Deposit {
    pub row: usize,
    pub col: usize,
    pub value: u16,
}

/// A frame stored as its nonzero pixels, sorted by `(row, col)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparseFrame {
    pub width: usize,
    pub height: usize,
    pub lit: Vec<Deposit>,
}

impl SparseFrame {
    pub fn to_dense(&self) -> Frame {
        let mut f = Frame::zeros(self.width, self.height);
        for d in &self.lit {
            f.set(d.row, d.col, d.value);
        }
        f
    }
}

/// Draws `(x', x'')` position pairs from a discrete joint density by inverse CDF,
/// with uniform jitter inside the chosen cell.
#[derive(Debug, Clone)]
pub struct PairSampler {
    grid: SpatialGrid,
    index: WeightedIndex<f64>,
}

impl PairSampler {
    pub fn new(pdf: &JointPattern2D) -> Result<Self> {
        let values = pdf.values();
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidPdf("entries must be finite and non-negative"));
        }
        if (pdf.integral() - 1.0).abs() > 1e-6 {
            return Err(Error::InvalidPdf("density must integrate to one"));
        }
        // nalgebra stores column-major: flat index k is (k % n, k / n)
        let index = WeightedIndex::new(values.iter().copied())
            .map_err(|_| Error::InvalidPdf("no positive weight"))?;
        Ok(Self {
            grid: *pdf.grid(),
            index,
        })
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (f64, f64) {
        let n = self.grid.len();
        let k = self.index.sample(rng);
        let (i, j) = (k % n, k / n);
        let dx = self.grid.spacing();
        let x1 = self.grid.x(i) + (rng.random::<f64>() - 0.5) * dx;
        let x2 = self.grid.x(j) + (rng.random::<f64>() - 0.5) * dx;
        (x1, x2)
    }
}

pub fn sample_pairs<R: Rng + ?Sized>(
    pdf: &JointPattern2D,
    n_pairs: usize,
    rng: &mut R,
) -> Result<Vec<(f64, f64)>> {
    let sampler = PairSampler::new(pdf)?;
    Ok((0..n_pairs).map(|_| sampler.sample(rng)).collect())
}

/// Keeps each photon with probability `efficiency` and places survivors on
/// the sensor: column from the horizontal position, row uniform in the strip.
/// Photons that miss the sensor horizontally are lost.
pub fn apply_detection<R: Rng + ?Sized>(
    pairs: &[(f64, f64)],
    camera: &CameraModel,
    rng: &mut R,
) -> Vec<PhotonHit> {
    let mut hits = Vec::new();
    for &(x1, x2) in pairs {
        for x in [x1, x2] {
            if rng.random::<f64>() < camera.efficiency {
                let row = rng.random_range(camera.strip.0..=camera.strip.1);
                if let Some(col) = camera.column_of(x) {
                    hits.push(PhotonHit { row, col });
                }
            }
        }
    }
    hits
}

/// Renders photon patches and dark events into a sparse frame. Overlapping
/// deposits keep the larger value per pixel.
pub fn render_sparse<R: Rng + ?Sized>(
    hits: &[PhotonHit],
    camera: &CameraModel,
    rng: &mut R,
) -> SparseFrame {
    let mut pixels: BTreeMap<(usize, usize), u16> = BTreeMap::new();
    let mut deposit = |row: usize, col: usize, value: u16| {
        let slot = pixels.entry((row, col)).or_insert(0);
        *slot = (*slot).max(value);
    };
    let r = (camera.patch_size / 2) as isize;
    let (flo, fhi) = camera.neighbor_fraction;
    for hit in hits {
        let peak = camera.peak.sample(rng).max(1);
        deposit(hit.row, hit.col, peak);
        for dr in -r..=r {
            for dc in -r..=r {
                if dr == 0 && dc == 0 {
                    continue;
                }
                let (row, col) = (hit.row as isize + dr, hit.col as isize + dc);
                if row < 0
                    || col < 0
                    || row >= camera.height as isize
                    || col >= camera.width as isize
                {
                    continue;
                }
                let frac = rng.random_range(flo..=fhi);
                let value = (libm::round(frac * peak as f64) as u16).min(peak - 1);
                deposit(row as usize, col as usize, value);
            }
        }
    }
    if camera.dark_rate > 0.0 {
        let n = Poisson::new(camera.dark_rate)
            .expect("positive finite rate")
            .sample(rng) as usize;
        for _ in 0..n {
            let row = rng.random_range(0..camera.height);
            let col = rng.random_range(0..camera.width);
            let value = rng.random_range(camera.dark_level.0..=camera.dark_level.1);
            deposit(row, col, value);
        }
    }
    let lit = pixels
        .into_iter()
        .filter(|&(_, v)| v > 0)
        .map(|((row, col), value)| Deposit { row, col, value })
        .collect();
    SparseFrame {
        width: camera.width,
        height: camera.height,
        lit,
    }
}

pub fn render_frame<R: Rng + ?Sized>(
    hits: &[PhotonHit],
    camera: &CameraModel,
    rng: &mut R,
) -> Frame {
    render_sparse(hits, camera, rng).to_dense()
}

/// One simulated frame together with the photons that produced it.
#[derive(Debug, Clone, PartialEq)]
pub struct SimulatedFrame {
    pub index: u64,
    pub pairs: usize,
    pub hits: Vec<PhotonHit>,
    pub frame: SparseFrame,
}

/// Deterministic frame generator: frame `k` depends only on the sampler, the
/// camera, the mean pair rate and `(seed, k)`, so any subset of frames can be
/// produced in any order.
#[derive(Debug, Clone)]
pub struct FrameSimulator {
    sampler: PairSampler,
    camera: CameraModel,
    pairs: Option<Poisson<f64>>,
}

impl FrameSimulator {
    pub fn new(
        pdf: &JointPattern2D,
        camera: CameraModel,
        mean_pairs_per_frame: f64,
    ) -> Result<Self> {
        camera.validate()?;
        if !(mean_pairs_per_frame >= 0.0 && mean_pairs_per_frame.is_finite()) {
            return Err(Error::InvalidParameter {
                name: "mean pairs per frame",
                reason: "must be non-negative",
            });
        }
        let grid = pdf.grid();
        let per_period = pdf.period().map(|l| l / grid.spacing());
        if let Some(p) = per_period {
            if p < crate::patterns::MIN_SAMPLES_PER_PERIOD {
                log::warn!("sampling density has {p:.2} cells per fringe period");
            }
        }
        let pairs = (mean_pairs_per_frame > 0.0)
            .then(|| Poisson::new(mean_pairs_per_frame).expect("positive finite mean"));
        Ok(Self {
            sampler: PairSampler::new(pdf)?,
            camera,
            pairs,
        })
    }

    pub fn camera(&self) -> &CameraModel {
        &self.camera
    }

    pub fn rng_for(&self, index: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.camera.seed);
        rng.set_stream(index);
        rng
    }

    pub fn frame(&self, index: u64) -> SimulatedFrame {
        let mut rng = self.rng_for(index);
        let n = self
            .pairs
            .as_ref()
            .map_or(0, |p| p.sample(&mut rng) as usize);
        let positions: Vec<(f64, f64)> = (0..n).map(|_| self.sampler.sample(&mut rng)).collect();
        let hits = apply_detection(&positions, &self.camera, &mut rng);
        let frame = render_sparse(&hits, &self.camera, &mut rng);
        SimulatedFrame {
            index,
            pairs: n,
            hits,
            frame,
        }
    }
}
