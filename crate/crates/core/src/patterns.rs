//! Detector-plane patterns: one-photon intensity, two-photon coincidence
//! density, its marginal and the excess (background-subtracted) coincidence.

use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::DMatrix;

use crate::biphoton::ApertureCorrelations;
use crate::error::{Error, Result};
use crate::grid::SpatialGrid;
use crate::math::sinc;
use crate::optics::{slit_columns, LinearKernel, SlitPair};
use crate::C64;

/// Fewer nodes than this per fringe period triggers an aliasing warning.
pub const MIN_SAMPLES_PER_PERIOD: f64 = 8.0;

/// Real 1-D pattern on detector positions.
#[derive(Debug, Clone, PartialEq)]
pub struct FringePattern1D {
    grid: SpatialGrid,
    values: Vec<f64>,
    period: Option<f64>,
}

impl FringePattern1D {
    pub fn new(grid: SpatialGrid, values: Vec<f64>, period: Option<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::ShapeMismatch("pattern length differs from its grid"));
        }
        Ok(Self {
            grid,
            values,
            period,
        })
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn period(&self) -> Option<f64> {
        self.period
    }

    pub fn mean(&self) -> f64 {
        self.values.iter().sum::<f64>() / self.values.len() as f64
    }

    /// Multiplies by a per-node envelope and rescales back to the previous mean.
    pub fn with_envelope(&self, envelope: &[f64]) -> Result<Self> {
        if envelope.len() != self.values.len() {
            return Err(Error::ShapeMismatch(
                "envelope length differs from the pattern",
            ));
        }
        let before = self.mean();
        let mut values: Vec<f64> = self
            .values
            .iter()
            .zip(envelope)
            .map(|(v, e)| v * e)
            .collect();
        let after = values.iter().sum::<f64>() / values.len() as f64;
        if after > 0.0 {
            values.iter_mut().for_each(|v| *v *= before / after);
        }
        Self::new(self.grid, values, self.period)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JointKind {
    Coincidence,
    Excess,
}

/// Real pattern over `(x', x'')`, both coordinates on the same grid.
/// Row index is `x'`, column index `x''`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointPattern2D {
    grid: SpatialGrid,
    values: DMatrix<f64>,
    kind: JointKind,
    unit_sum: bool,
    period: Option<f64>,
}

impl JointPattern2D {
    pub fn new(
        grid: SpatialGrid,
        values: DMatrix<f64>,
        kind: JointKind,
        period: Option<f64>,
    ) -> Result<Self> {
        if values.nrows() != grid.len() || values.ncols() != grid.len() {
            return Err(Error::ShapeMismatch(
                "joint pattern must be n x n on its grid",
            ));
        }
        Ok(Self {
            grid,
            values,
            kind,
            unit_sum: false,
            period,
        })
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn kind(&self) -> JointKind {
        self.kind
    }

    pub fn is_unit_sum(&self) -> bool {
        self.unit_sum
    }

    pub fn period(&self) -> Option<f64> {
        self.period
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[(i, j)]
    }

    /// `Σ values · dx²`.
    pub fn integral(&self) -> f64 {
        let dx = self.grid.spacing();
        self.values.sum() * dx * dx
    }

    /// Rescales so the integral over the grid is one.
    pub fn normalized(mut self) -> Result<Self> {
        let total = self.integral();
        if !(total.is_finite() && total != 0.0) {
            return Err(Error::Normalization("pattern integral"));
        }
        self.values /= total;
        self.unit_sum = true;
        Ok(self)
    }

    /// Multiplies by `envelope(x') envelope(x'')` and renormalizes.
    pub fn with_envelope(&self, envelope: &[f64]) -> Result<Self> {
        if envelope.len() != self.grid.len() {
            return Err(Error::ShapeMismatch(
                "envelope length differs from the pattern",
            ));
        }
        let values = DMatrix::from_fn(self.grid.len(), self.grid.len(), |i, j| {
            self.values[(i, j)] * envelope[i] * envelope[j]
        });
        let p = Self::new(self.grid, values, self.kind, self.period)?;
        if self.unit_sum {
            p.normalized()
        } else {
            Ok(p)
        }
    }
}

fn check_period(period: f64) -> Result<()> {
    if period > 0.0 && period.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: "period",
            reason: "must be positive and finite",
        })
    }
}

fn warn_if_undersampled(grid: &SpatialGrid, period: f64) {
    let per_period = period / grid.spacing();
    if per_period < MIN_SAMPLES_PER_PERIOD {
        log::warn!(
            "detector grid has {per_period:.2} samples per fringe period (< {MIN_SAMPLES_PER_PERIOD}); patterns are aliased"
        );
    }
}

/// One-photon intensity from slit-plane coherence through an arbitrary `h2`,
/// evaluated on `h2`'s output grid and scaled to unit mean.
pub fn intensity_general(
    h2: &LinearKernel,
    ac: &ApertureCorrelations,
    slits: &SlitPair,
) -> Result<FringePattern1D> {
    let [c1, c2] = slit_columns(h2, slits)?;
    let g = &ac.coherence;
    let values: Vec<f64> = c1
        .iter()
        .zip(&c2)
        .map(|(&a, &b)| {
            a.norm_sqr() * g.g11 + b.norm_sqr() * g.g22 + 2.0 * (a.conj() * b * g.g12).re
        })
        .collect();
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    if !(mean > 0.0) {
        return Err(Error::Normalization("intensity mean"));
    }
    FringePattern1D::new(
        *h2.grid_out(),
        values.into_iter().map(|v| v / mean).collect(),
        None,
    )
}

/// `1 + g1 cos(2 pi x / period)`, scaled to unit mean.
pub fn single_photon_pattern(g1: f64, period: f64, grid: SpatialGrid) -> Result<FringePattern1D> {
    if !(g1.abs() <= 1.0) {
        return Err(Error::InvalidCoherence(g1));
    }
    check_period(period)?;
    warn_if_undersampled(&grid, period);
    let k = 2.0 * PI / period;
    let values: Vec<f64> = grid.iter().map(|x| 1.0 + g1 * libm::cos(k * x)).collect();
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    FringePattern1D::new(
        grid,
        values.into_iter().map(|v| v / mean).collect(),
        Some(period),
    )
}

/// `|Ψ(x', x'')|²` with `Ψ` built from the slit-plane pair amplitude through `h2`,
/// normalized to unit integral.
pub fn coincidence_general(
    h2: &LinearKernel,
    ac: &ApertureCorrelations,
    slits: &SlitPair,
) -> Result<JointPattern2D> {
    let [c1, c2] = slit_columns(h2, slits)?;
    let p = &ac.biphoton;
    let n = c1.len();
    let values = DMatrix::from_fn(n, n, |i, j| {
        let amp: C64 =
            c1[i] * c1[j] * p.p11 + c2[i] * c2[j] * p.p22 + (c1[i] * c2[j] + c2[i] * c1[j]) * p.p12;
        amp.norm_sqr()
    });
    JointPattern2D::new(*h2.grid_out(), values, JointKind::Coincidence, None)?.normalized()
}

/// `|cos(pi (x'+x'')/L) + psi cos(pi (x'-x'')/L)|²`, unnormalized.
pub fn coincidence_modulus_form(psi: f64, period: f64, x1: f64, x2: f64) -> f64 {
    let s = PI * (x1 + x2) / period;
    let d = PI * (x1 - x2) / period;
    let amp = libm::cos(s) + psi * libm::cos(d);
    amp * amp
}

/// Four-term expansion of the same density, scaled to unit mean over whole periods.
pub fn coincidence_expanded_form(psi: f64, period: f64, x1: f64, x2: f64) -> f64 {
    let k = 2.0 * PI / period;
    let q = 1.0 + psi * psi;
    1.0 + libm::cos(k * (x1 + x2)) / q
        + psi * psi / q * libm::cos(k * (x1 - x2))
        + 2.0 * psi / q * (libm::cos(k * x1) + libm::cos(k * x2))
}

/// Closed-form coincidence density for a 2f detection lens, unit integral.
///
/// `psi` in `[-1, 1]` is the usual regime; values outside it are accepted and
/// describe the exchanged orientation (`1/psi` with sum and difference swapped).
pub fn coincidence_pattern(psi: f64, period: f64, grid: SpatialGrid) -> Result<JointPattern2D> {
    if !psi.is_finite() {
        return Err(Error::InvalidParameter {
            name: "psi",
            reason: "must be finite",
        });
    }
    check_period(period)?;
    warn_if_undersampled(&grid, period);
    let xs: Vec<f64> = grid.iter().collect();
    let values = DMatrix::from_fn(xs.len(), xs.len(), |i, j| {
        coincidence_expanded_form(psi, period, xs[i], xs[j])
    });
    JointPattern2D::new(grid, values, JointKind::Coincidence, Some(period))?.normalized()
}

/// Single-photon marginal `I_m(x') = Σ_x'' G(x', x'') dx`.
pub fn marginal_pattern(g2: &JointPattern2D) -> Result<FringePattern1D> {
    if g2.kind != JointKind::Coincidence {
        return Err(Error::InvalidParameter {
            name: "g2",
            reason: "marginal needs a coincidence pattern",
        });
    }
    let dx = g2.grid.spacing();
    let values = g2.values.row_iter().map(|r| r.sum() * dx).collect();
    FringePattern1D::new(g2.grid, values, g2.period)
}

/// Window over which the excess pattern is normalized.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RegionOfInterest {
    /// The whole grid.
    Full,
    /// Nodes whose cells fit inside the largest whole number of periods
    /// centered on the axis.
    IntegerPeriods(f64),
}

impl RegionOfInterest {
    /// First node and node count of the region on `grid`.
    pub fn window(&self, grid: &SpatialGrid) -> Result<(usize, usize)> {
        match *self {
            RegionOfInterest::Full => Ok((0, grid.len())),
            RegionOfInterest::IntegerPeriods(period) => {
                check_period(period)?;
                let dx = grid.spacing();
                let covered = grid.extent() + dx;
                let periods = libm::floor(covered / period);
                if periods < 1.0 {
                    return Ok((0, grid.len()));
                }
                let half = 0.5 * periods * period - 0.5 * dx + 1e-9 * dx;
                let nodes: Vec<usize> = (0..grid.len())
                    .filter(|&i| grid.x(i).abs() <= half)
                    .collect();
                match (nodes.first(), nodes.len()) {
                    (Some(&start), n) if n >= 2 => Ok((start, n)),
                    _ => Ok((0, grid.len())),
                }
            }
        }
    }
}

/// `ΔG = G - I_m(x') I_m(x'') + A` on the region of interest, returned
/// cropped to that region and scaled to unit integral there.
///
/// `A` is the mean of `I_m(x') I_m(x'')` over the region, so `ΔG` and `G`
/// carry the same mass on it. Both are measured in units of that mass, which
/// keeps the fringe amplitudes relative to `A` independent of how much of `G`
/// falls outside the region.
pub fn excess_pattern(
    g2: &JointPattern2D,
    marginal: &FringePattern1D,
    roi: RegionOfInterest,
) -> Result<JointPattern2D> {
    if g2.grid != marginal.grid {
        return Err(Error::Composition(
            "marginal grid differs from the coincidence grid",
        ));
    }
    if g2.kind != JointKind::Coincidence {
        return Err(Error::InvalidParameter {
            name: "g2",
            reason: "excess needs a coincidence pattern",
        });
    }
    let (start, n) = roi.window(&g2.grid)?;
    let grid = g2.grid.slice(start, n)?;
    let dx = grid.spacing();
    let m = &marginal.values[start..start + n];
    let g = g2.values.view((start, start), (n, n));
    let mass = g.sum() * dx * dx;
    if !(mass > 0.0 && mass.is_finite()) {
        return Err(Error::Normalization(
            "coincidence mass in the region of interest",
        ));
    }
    let m_sum: f64 = m.iter().sum();
    let a = m_sum * m_sum / (n * n) as f64;
    let values = DMatrix::from_fn(n, n, |i, j| (g[(i, j)] - m[i] * m[j] + a) / mass);
    let mut out = JointPattern2D::new(grid, values, JointKind::Excess, g2.period)?;
    out.unit_sum = true;
    Ok(out)
}

/// `1 - V sin(kx') sin(kx'') + V² cos(kx') cos(kx'')`: excess density in units of its mean.
pub fn excess_product_form(v12: f64, period: f64, x1: f64, x2: f64) -> f64 {
    let k = 2.0 * PI / period;
    1.0 - v12 * libm::sin(k * x1) * libm::sin(k * x2)
        + v12 * v12 * libm::cos(k * x1) * libm::cos(k * x2)
}

/// The same density written with sum and difference fringes:
/// `1 + V(1+V)/2 cos(k(x'+x'')) - V(1-V)/2 cos(k(x'-x''))`.
pub fn excess_sum_difference_form(v12: f64, period: f64, x1: f64, x2: f64) -> f64 {
    let k = 2.0 * PI / period;
    1.0 + 0.5 * v12 * (1.0 + v12) * libm::cos(k * (x1 + x2))
        - 0.5 * v12 * (1.0 - v12) * libm::cos(k * (x1 - x2))
}

/// Single-slit diffraction envelope `sinc²(w x / (lambda f))`; all ones for `w = 0`.
pub fn slit_envelope(
    width: f64,
    wavelength: f64,
    focal_length: f64,
    grid: &SpatialGrid,
) -> Result<Vec<f64>> {
    if !(width >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "slit width",
            reason: "must be non-negative",
        });
    }
    if !(wavelength > 0.0 && focal_length > 0.0) {
        return Err(Error::InvalidParameter {
            name: "wavelength/focal length",
            reason: "must be positive",
        });
    }
    Ok(grid
        .iter()
        .map(|x| {
            let s = sinc(width * x / (wavelength * focal_length));
            s * s
        })
        .collect())
}
