//! Frame reduction: threshold, locate photons, select coincidence pairs in the
//! readout strip and accumulate the two-photon correlation estimate.

use alloc::vec::Vec;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::grid::SpatialGrid;
use crate::patterns::{marginal_pattern, FringePattern1D, JointKind, JointPattern2D};
use crate::sensor::{Deposit, Frame, PhotonEvent, SparseFrame};

/// Components smaller than this many pixels are treated as noise.
pub const DEFAULT_MIN_PATCH: usize = 4;

/// Pixels on each side of the diagonal used to fill it in.
pub const DIAGONAL_NEIGHBORS: usize = 3;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryFrame {
    width: usize,
    height: usize,
    bits: Vec<bool>,
}

impl BinaryFrame {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.width + col]
    }

    pub fn count_ones(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

/// Marks pixels strictly above `level`.
pub fn threshold_frame(frame: &Frame, level: u16) -> BinaryFrame {
    BinaryFrame {
        width: frame.width(),
        height: frame.height(),
        bits: frame.data().iter().map(|&v| v > level).collect(),
    }
}

/// Groups lit pixels (sorted by row, then column) into 8-connected components
/// and reports one event per component of at least `min_patch` pixels, at the
/// component's analog maximum. Ties go to the smallest `(row, col)`.
fn detect_in_lit(lit: &[Deposit], min_patch: usize) -> Vec<PhotonEvent> {
    let find = |row: usize, col: usize| {
        lit.binary_search_by(|d| (d.row, d.col).cmp(&(row, col)))
            .ok()
    };
    let mut seen = alloc::vec![false; lit.len()];
    let mut stack = Vec::new();
    let mut events = Vec::new();
    for start in 0..lit.len() {
        if seen[start] {
            continue;
        }
        seen[start] = true;
        stack.push(start);
        let mut size = 0;
        let mut best = lit[start];
        while let Some(k) = stack.pop() {
            let d = lit[k];
            size += 1;
            if d.value > best.value
                || (d.value == best.value && (d.row, d.col) < (best.row, best.col))
            {
                best = d;
            }
            for dr in -1isize..=1 {
                for dc in -1isize..=1 {
                    let (r, c) = (d.row as isize + dr, d.col as isize + dc);
                    if (dr == 0 && dc == 0) || r < 0 || c < 0 {
                        continue;
                    }
                    if let Some(n) = find(r as usize, c as usize) {
                        if !seen[n] {
                            seen[n] = true;
                            stack.push(n);
                        }
                    }
                }
            }
        }
        if size >= min_patch {
            events.push(PhotonEvent {
                row: best.row,
                col: best.col,
                peak: best.value,
            });
        }
    }
    events.sort_unstable();
    events
}

/// Photon events in a thresholded frame, sorted by `(row, col)`.
pub fn detect_photons(
    binary: &BinaryFrame,
    analog: &Frame,
    min_patch: usize,
) -> Result<Vec<PhotonEvent>> {
    if binary.width != analog.width() || binary.height != analog.height() {
        return Err(Error::ShapeMismatch(
            "binary and analog frames differ in shape",
        ));
    }
    let lit: Vec<Deposit> = binary
        .bits
        .iter()
        .zip(analog.data())
        .enumerate()
        .filter(|(_, (&b, _))| b)
        .map(|(i, (_, &value))| Deposit {
            row: i / binary.width,
            col: i % binary.width,
            value,
        })
        .collect();
    Ok(detect_in_lit(&lit, min_patch))
}

/// Same result as thresholding the dense frame and calling [`detect_photons`].
pub fn detect_photons_sparse(
    frame: &SparseFrame,
    level: u16,
    min_patch: usize,
) -> Vec<PhotonEvent> {
    let lit: Vec<Deposit> = frame
        .lit
        .iter()
        .copied()
        .filter(|d| d.value > level)
        .collect();
    detect_in_lit(&lit, min_patch)
}

/// Accepts a pair when `|Δrow| < num/den · |Δcol|` (strict).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairFilter {
    pub num: u32,
    pub den: u32,
}

impl Default for PairFilter {
    fn default() -> Self {
        Self { num: 1, den: 3 }
    }
}

impl PairFilter {
    pub fn new(num: u32, den: u32) -> Result<Self> {
        if den == 0 {
            return Err(Error::InvalidParameter {
                name: "pair filter",
                reason: "denominator must be nonzero",
            });
        }
        Ok(Self { num, den })
    }

    pub fn accepts(&self, drow: usize, dcol: usize) -> bool {
        (self.den as u64) * (drow as u64) < (self.num as u64) * (dcol as u64)
    }
}

/// Two photon events ordered by column (then row).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PairRecord {
    first: PhotonEvent,
    second: PhotonEvent,
}

impl PairRecord {
    pub fn new(a: PhotonEvent, b: PhotonEvent) -> Result<Self> {
        if (a.row, a.col) == (b.row, b.col) {
            return Err(Error::InvalidParameter {
                name: "pair",
                reason: "events must be on distinct pixels",
            });
        }
        let (first, second) = if (a.col, a.row) <= (b.col, b.row) {
            (a, b)
        } else {
            (b, a)
        };
        Ok(Self { first, second })
    }

    pub fn first(&self) -> PhotonEvent {
        self.first
    }

    pub fn second(&self) -> PhotonEvent {
        self.second
    }

    pub fn row_separation(&self) -> usize {
        self.first.row.abs_diff(self.second.row)
    }

    pub fn col_separation(&self) -> usize {
        self.first.col.abs_diff(self.second.col)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrameClass {
    Empty,
    Single(PhotonEvent),
    Pair(PairRecord),
    /// Two in-strip events failing the geometry filter.
    RejectedPair(PairRecord),
    /// Three or more in-strip events.
    Multi(usize),
}

/// Keeps events inside the strip rows and classifies what remains.
pub fn classify_and_filter(
    events: &[PhotonEvent],
    strip: (usize, usize),
    filter: &PairFilter,
) -> FrameClass {
    let mut inside = events
        .iter()
        .copied()
        .filter(|e| (strip.0..=strip.1).contains(&e.row));
    match (inside.next(), inside.next(), inside.next()) {
        (None, _, _) => FrameClass::Empty,
        (Some(e), None, _) => FrameClass::Single(e),
        (Some(a), Some(b), None) => match PairRecord::new(a, b) {
            Ok(p) if filter.accepts(p.row_separation(), p.col_separation()) => FrameClass::Pair(p),
            Ok(p) => FrameClass::RejectedPair(p),
            // detection never yields two events on one pixel
            Err(_) => FrameClass::Single(a),
        },
        (Some(_), Some(_), Some(_)) => FrameClass::Multi(3 + inside.count()),
    }
}

/// Frame tallies. `total` is the sum of the five class counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct FrameCounters {
    pub total: u64,
    pub empty: u64,
    pub single: u64,
    pub pair: u64,
    pub multi: u64,
    pub rejected: u64,
}

impl FrameCounters {
    fn merge(&mut self, o: &FrameCounters) {
        self.total += o.total;
        self.empty += o.empty;
        self.single += o.single;
        self.pair += o.pair;
        self.multi += o.multi;
        self.rejected += o.rejected;
    }
}

/// Running sum of `XᵀX` over accepted pair frames, where `X` marks the two
/// photon columns, plus a column histogram of single-photon frames.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoincidenceAccumulator {
    width: usize,
    sums: Vec<u64>,
    singles: Vec<u64>,
    counters: FrameCounters,
}

impl CoincidenceAccumulator {
    pub fn new(width: usize) -> Self {
        Self {
            width,
            sums: alloc::vec![0; width * width],
            singles: alloc::vec![0; width],
            counters: FrameCounters::default(),
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn counters(&self) -> FrameCounters {
        self.counters
    }

    pub fn pair_count(&self, i: usize, j: usize) -> u64 {
        self.sums[i * self.width + j]
    }

    /// Column histogram of single-photon frames.
    pub fn singles(&self) -> &[u64] {
        &self.singles
    }

    /// Adds the outer product of one pair's indicator vector.
    pub fn accumulate_pair(&mut self, pair: &PairRecord) -> Result<()> {
        let (i, j) = (pair.first.col, pair.second.col);
        if i >= self.width || j >= self.width {
            return Err(Error::ShapeMismatch("pair column outside the accumulator"));
        }
        let w = self.width;
        self.sums[i * w + j] += 1;
        self.sums[j * w + i] += 1;
        self.sums[i * w + i] += 1;
        self.sums[j * w + j] += 1;
        Ok(())
    }

    pub fn add_frame(&mut self, class: &FrameClass) -> Result<()> {
        match class {
            FrameClass::Empty => self.counters.empty += 1,
            FrameClass::Single(e) => {
                if e.col >= self.width {
                    return Err(Error::ShapeMismatch("event column outside the accumulator"));
                }
                self.singles[e.col] += 1;
                self.counters.single += 1;
            }
            FrameClass::Pair(p) => {
                self.accumulate_pair(p)?;
                self.counters.pair += 1;
            }
            FrameClass::RejectedPair(_) => self.counters.rejected += 1,
            FrameClass::Multi(_) => self.counters.multi += 1,
        }
        self.counters.total += 1;
        Ok(())
    }

    pub fn merge(&mut self, other: &CoincidenceAccumulator) -> Result<()> {
        if other.width != self.width {
            return Err(Error::ShapeMismatch("accumulators differ in width"));
        }
        self.sums
            .iter_mut()
            .zip(&other.sums)
            .for_each(|(a, b)| *a += b);
        self.singles
            .iter_mut()
            .zip(&other.singles)
            .for_each(|(a, b)| *a += b);
        self.counters.merge(&other.counters);
        Ok(())
    }

    /// Averages over frames, fills the diagonal from nearby off-diagonal
    /// entries, symmetrizes and normalizes to unit integral on the pixel grid.
    pub fn finalize(&self, pitch: f64) -> Result<JointPattern2D> {
        if self.counters.pair == 0 {
            return Err(Error::EmptyEstimate);
        }
        let n = self.width;
        let frames = self.counters.total as f64;
        let mut m = DMatrix::from_fn(n, n, |i, j| self.sums[i * n + j] as f64 / frames);
        for i in 0..n {
            let (mut sum, mut count) = (0.0, 0);
            for k in 1..=DIAGONAL_NEIGHBORS {
                if i >= k {
                    sum += m[(i, i - k)];
                    count += 1;
                }
                if i + k < n {
                    sum += m[(i, i + k)];
                    count += 1;
                }
            }
            m[(i, i)] = if count > 0 { sum / count as f64 } else { 0.0 };
        }
        let sym = (&m + m.transpose()) * 0.5;
        let grid = SpatialGrid::centered(pitch, n)?;
        JointPattern2D::new(grid, sym, JointKind::Coincidence, None)?.normalized()
    }
}

/// Block-sums `factor x factor` cells. Trailing rows and columns that do not
/// fill a block are padded with zeros.
pub fn superpixel_bin(m: &DMatrix<f64>, factor: usize) -> Result<DMatrix<f64>> {
    if factor == 0 {
        return Err(Error::InvalidParameter {
            name: "factor",
            reason: "must be at least 1",
        });
    }
    let (r, c) = (m.nrows().div_ceil(factor), m.ncols().div_ceil(factor));
    let mut out = DMatrix::zeros(r, c);
    for ((i, j), v) in m
        .iter()
        .enumerate()
        .map(|(k, v)| ((k % m.nrows(), k / m.nrows()), v))
    {
        out[(i / factor, j / factor)] += v;
    }
    Ok(out)
}

/// One-dimensional counterpart of [`superpixel_bin`].
pub fn superpixel_bin_1d(v: &[f64], factor: usize) -> Result<Vec<f64>> {
    if factor == 0 {
        return Err(Error::InvalidParameter {
            name: "factor",
            reason: "must be at least 1",
        });
    }
    Ok(v.chunks(factor).map(|c| c.iter().sum()).collect())
}

/// Bins a joint pattern into superpixels on a coarser grid covering the same
/// cells, renormalized to unit integral.
pub fn superpixel_pattern(p: &JointPattern2D, factor: usize) -> Result<JointPattern2D> {
    let binned = superpixel_bin(p.values(), factor)?;
    let g = p.grid();
    let dx = g.spacing();
    let lo = g.x_min() - 0.5 * dx;
    let n = binned.nrows();
    let grid = SpatialGrid::cell_centered(lo, lo + (n * factor) as f64 * dx, n)?;
    JointPattern2D::new(grid, binned, p.kind(), p.period())?.normalized()
}

/// Row sums of a finalized estimate: the single-photon marginal.
pub fn estimate_marginal(estimate: &JointPattern2D) -> Result<FringePattern1D> {
    marginal_pattern(estimate)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensor::{render_frame, render_sparse, CameraModel, PhotonHit};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn ev(row: usize, col: usize) -> PhotonEvent {
        PhotonEvent {
            row,
            col,
            peak: 50_000,
        }
    }

    fn patch(frame: &mut Frame, row: usize, col: usize, peak: u16) {
        for dr in 0..3 {
            for dc in 0..3 {
                frame.set(row + dr - 1, col + dc - 1, peak / 2);
            }
        }
        frame.set(row, col, peak);
    }

    #[test]
    fn threshold_examples() {
        let f = Frame::zeros(8, 8);
        assert_eq!(threshold_frame(&f, 10).count_ones(), 0);
        let mut f = Frame::zeros(8, 8);
        patch(&mut f, 3, 3, 40_000);
        assert_eq!(threshold_frame(&f, 40_000).count_ones(), 0);
        assert_eq!(threshold_frame(&f, 10_000).count_ones(), 9);
    }

    #[test]
    fn detection_examples() {
        let mut f = Frame::zeros(20, 20);
        patch(&mut f, 5, 5, 40_000);
        patch(&mut f, 12, 15, 50_000);
        f.set(18, 2, 30_000);
        let b = threshold_frame(&f, 10_000);
        let events = detect_photons(&b, &f, DEFAULT_MIN_PATCH).unwrap();
        assert_eq!(
            events,
            [
                PhotonEvent {
                    row: 5,
                    col: 5,
                    peak: 40_000
                },
                PhotonEvent {
                    row: 12,
                    col: 15,
                    peak: 50_000
                }
            ]
        );
        // the lone pixel survives only without the size cut
        assert_eq!(detect_photons(&b, &f, 1).unwrap().len(), 3);
    }

    #[test]
    fn detection_tie_break() {
        let mut f = Frame::zeros(6, 6);
        for r in 1..3 {
            for c in 1..3 {
                f.set(r, c, 100);
            }
        }
        let e = detect_photons(&threshold_frame(&f, 0), &f, 4).unwrap();
        assert_eq!(
            e,
            [PhotonEvent {
                row: 1,
                col: 1,
                peak: 100
            }]
        );
    }

    #[test]
    fn diagonal_touching_pixels_connect() {
        let mut f = Frame::zeros(6, 6);
        for k in 0..4 {
            f.set(k, k, 100 + k as u16);
        }
        let e = detect_photons(&threshold_frame(&f, 0), &f, 4).unwrap();
        assert_eq!(
            e,
            [PhotonEvent {
                row: 3,
                col: 3,
                peak: 103
            }]
        );
    }

    #[test]
    fn render_round_trip() {
        let cam = CameraModel {
            dark_rate: 0.0,
            ..CameraModel::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let f = render_frame(&[PhotonHit { row: 100, col: 200 }], &cam, &mut rng);
        let e = detect_photons(&threshold_frame(&f, cam.threshold), &f, DEFAULT_MIN_PATCH).unwrap();
        assert_eq!(e.len(), 1);
        assert_eq!((e[0].row, e[0].col), (100, 200));
        assert_eq!(threshold_frame(&f, cam.threshold).count_ones(), 9);
        // patches one pixel apart merge
        let f = render_frame(
            &[
                PhotonHit { row: 100, col: 200 },
                PhotonHit { row: 100, col: 201 },
            ],
            &cam,
            &mut rng,
        );
        let e = detect_photons(&threshold_frame(&f, cam.threshold), &f, DEFAULT_MIN_PATCH).unwrap();
        assert_eq!(e.len(), 1);
    }

    #[test]
    fn sparse_and_dense_detection_agree() {
        let cam = CameraModel {
            dark_rate: 3.0,
            ..CameraModel::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for k in 0..30 {
            let hits: Vec<PhotonHit> = (0..k % 5)
                .map(|i| PhotonHit {
                    row: 240 + 3 * i,
                    col: (37 * k + 90 * i) % 512,
                })
                .collect();
            let s = render_sparse(&hits, &cam, &mut rng);
            let d = s.to_dense();
            let dense =
                detect_photons(&threshold_frame(&d, cam.threshold), &d, DEFAULT_MIN_PATCH).unwrap();
            assert_eq!(
                detect_photons_sparse(&s, cam.threshold, DEFAULT_MIN_PATCH),
                dense
            );
        }
    }

    #[test]
    fn classification_examples() {
        let f = PairFilter::default();
        let strip = (0, 100);
        assert!(matches!(
            classify_and_filter(&[ev(10, 10), ev(15, 40)], strip, &f),
            FrameClass::Pair(_)
        ));
        assert!(matches!(
            classify_and_filter(&[ev(10, 10), ev(22, 40)], strip, &f),
            FrameClass::RejectedPair(_)
        ));
        // boundary is rejected
        assert!(matches!(
            classify_and_filter(&[ev(10, 10), ev(20, 40)], strip, &f),
            FrameClass::RejectedPair(_)
        ));
        assert_eq!(
            classify_and_filter(&[ev(1, 1), ev(2, 50), ev(3, 90)], strip, &f),
            FrameClass::Multi(3)
        );
        assert_eq!(classify_and_filter(&[], strip, &f), FrameClass::Empty);
        // an out-of-strip partner leaves a single
        assert_eq!(
            classify_and_filter(&[ev(10, 10), ev(200, 40)], strip, &f),
            FrameClass::Single(ev(10, 10))
        );
    }

    #[test]
    fn accumulate_examples() {
        let mut acc = CoincidenceAccumulator::new(64);
        let p = PairRecord::new(ev(5, 40), ev(6, 10)).unwrap();
        assert_eq!(p.first().col, 10);
        acc.accumulate_pair(&p).unwrap();
        assert_eq!((acc.pair_count(10, 40), acc.pair_count(40, 10)), (1, 1));
        assert_eq!((acc.pair_count(10, 10), acc.pair_count(40, 40)), (1, 1));
        for _ in 0..9 {
            acc.accumulate_pair(&p).unwrap();
        }
        assert_eq!(acc.pair_count(10, 40), 10);
        assert!(PairRecord::new(ev(1, 1), ev(1, 1)).is_err());
    }

    #[test]
    fn counters_add_up() {
        let mut acc = CoincidenceAccumulator::new(64);
        let f = PairFilter::default();
        let frames: [&[PhotonEvent]; 5] = [
            &[],
            &[ev(3, 4)],
            &[ev(3, 4), ev(4, 30)],
            &[ev(3, 4), ev(20, 30)],
            &[ev(1, 1), ev(2, 20), ev(3, 40)],
        ];
        for e in frames {
            acc.add_frame(&classify_and_filter(e, (0, 63), &f)).unwrap();
        }
        let c = acc.counters();
        assert_eq!(
            (c.empty, c.single, c.pair, c.rejected, c.multi),
            (1, 1, 1, 1, 1)
        );
        assert_eq!(c.total, 5);
        assert_eq!(acc.singles()[4], 1);
    }

    #[test]
    fn finalize_single_pair() {
        let mut acc = CoincidenceAccumulator::new(16);
        assert_eq!(acc.finalize(24e-6), Err(Error::EmptyEstimate));
        acc.add_frame(&FrameClass::Pair(
            PairRecord::new(ev(0, 3), ev(0, 9)).unwrap(),
        ))
        .unwrap();
        let est = acc.finalize(24e-6).unwrap();
        assert!((est.integral() - 1.0).abs() < 1e-12);
        let v = est.values();
        assert!(v[(3, 9)] > 0.0 && v[(3, 9)] == v[(9, 3)]);
        // diagonal entries 3 and 9 are far from the spikes and come out zero
        assert_eq!(v[(3, 3)], 0.0);
        assert_eq!(v[(6, 6)], 0.0);
        for i in 0..16 {
            for j in 0..16 {
                assert_eq!(v[(i, j)], v[(j, i)]);
            }
        }
    }

    #[test]
    fn finalize_interpolates_diagonal() {
        let mut acc = CoincidenceAccumulator::new(8);
        for i in 0..8 {
            for j in 0..8 {
                if i < j {
                    acc.accumulate_pair(&PairRecord::new(ev(0, i), ev(0, j)).unwrap())
                        .unwrap();
                }
            }
        }
        acc.counters.pair = 1;
        acc.counters.total = 1;
        let est = acc.finalize(1.0).unwrap();
        let off = est.at(0, 1);
        for i in 0..8 {
            assert!((est.at(i, i) - off).abs() < 1e-15);
        }
    }

    #[test]
    fn superpixel_examples() {
        let ones = DMatrix::from_element(8, 8, 1.0);
        let b = superpixel_bin(&ones, 4).unwrap();
        assert_eq!(b, DMatrix::from_element(2, 2, 16.0));
        let m = DMatrix::from_fn(6, 6, |i, j| (i * 7 + j) as f64);
        assert_eq!(superpixel_bin(&m, 1).unwrap(), m);
        let b = superpixel_bin(&m, 4).unwrap();
        assert_eq!(b.shape(), (2, 2));
        assert_eq!(b.sum(), m.sum());
        assert_eq!(
            superpixel_bin_1d(&[1.0, 2.0, 3.0, 4.0, 5.0], 2).unwrap(),
            [3.0, 7.0, 5.0]
        );
        assert!(superpixel_bin(&m, 0).is_err());
    }

    #[test]
    fn superpixel_pattern_keeps_extent() {
        let g = SpatialGrid::centered(1.0, 8).unwrap();
        let p = JointPattern2D::new(
            g,
            DMatrix::from_element(8, 8, 1.0),
            JointKind::Coincidence,
            None,
        )
        .unwrap()
        .normalized()
        .unwrap();
        let s = superpixel_pattern(&p, 4).unwrap();
        assert_eq!(s.grid().len(), 2);
        assert!((s.grid().x(0) + 2.0).abs() < 1e-12 && (s.grid().x(1) - 2.0).abs() < 1e-12);
        assert!((s.integral() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn marginal_of_flat_estimate_is_flat() {
        let g = SpatialGrid::centered(1.0, 6).unwrap();
        let p = JointPattern2D::new(
            g,
            DMatrix::from_element(6, 6, 2.0),
            JointKind::Coincidence,
            None,
        )
        .unwrap()
        .normalized()
        .unwrap();
        let m = estimate_marginal(&p).unwrap();
        assert!(m
            .values()
            .iter()
            .all(|&v| (v - m.values()[0]).abs() < 1e-15));
    }
}
