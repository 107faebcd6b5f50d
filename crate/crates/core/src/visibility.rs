//! One- and two-photon visibilities: closed forms, the complementarity
//! relation, and least-squares estimators for measured patterns.

use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};
use crate::patterns::{FringePattern1D, JointPattern2D};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VisibilitySet {
    /// One-photon visibility without a partner measurement.
    pub v1: f64,
    /// Visibility of the single-photon marginal of the coincidence pattern.
    pub v1m: f64,
    /// Two-photon visibility.
    pub v12: f64,
}

pub fn visibilities_from_psi(psi: f64) -> Result<VisibilitySet> {
    if !(psi.abs() <= 1.0) {
        return Err(Error::OutOfUnitRange(psi));
    }
    let q = 1.0 + psi * psi;
    Ok(VisibilitySet {
        v1: psi,
        v1m: 2.0 * psi / q,
        v12: (1.0 - psi * psi) / q,
    })
}

/// Two-photon visibility as a function of the one-photon visibility.
pub fn v12_from_v1(v1: f64) -> Result<f64> {
    if !(v1.abs() <= 1.0) {
        return Err(Error::OutOfUnitRange(v1));
    }
    Ok((1.0 - v1 * v1) / (1.0 + v1 * v1))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Complementarity {
    pub residual: f64,
    pub pass: bool,
}

/// `|V1m² + V12² - 1|` checked against `tol`.
pub fn check_complementarity(v: &VisibilitySet, tol: f64) -> Complementarity {
    let residual = (v.v1m * v.v1m + v.v12 * v.v12 - 1.0).abs();
    Complementarity {
        residual,
        pass: residual <= tol,
    }
}

/// Result of fitting `offset (1 + V cos(2 pi x / L + phase))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FringeFit {
    /// Non-negative visibility; a fringe inversion shows up in `phase`.
    pub visibility: f64,
    pub phase: f64,
    pub offset: f64,
    /// Euclidean norm of the fit residuals.
    pub residual: f64,
    pub samples: usize,
}

impl FringeFit {
    /// Visibility with the sign of `cos(phase)`, for comparison with a signed
    /// coherence value when the pattern is centered on the axis.
    pub fn signed_visibility(&self) -> f64 {
        if libm::cos(self.phase) < 0.0 {
            -self.visibility
        } else {
            self.visibility
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FitOptions<'a> {
    /// Divide the samples by this per-node envelope before fitting.
    pub envelope: Option<&'a [f64]>,
    /// Nodes with envelope below this fraction of its peak are dropped.
    pub envelope_floor: f64,
}

impl Default for FitOptions<'_> {
    fn default() -> Self {
        Self {
            envelope: None,
            envelope_floor: 0.05,
        }
    }
}

/// Solves a 3x3 normal system, refusing rank-deficient ones.
fn solve_normal(
    normal: Matrix3<f64>,
    rhs: Vector3<f64>,
    what: &'static str,
) -> Result<Vector3<f64>> {
    let svd = normal.svd(true, true);
    let largest = svd.singular_values.max();
    let eps = largest * 1e-12;
    if !(largest > 0.0) || svd.rank(eps) < 3 {
        return Err(Error::UnderDetermined(what));
    }
    svd.solve(&rhs, eps)
        .map_err(|_| Error::UnderDetermined(what))
}

/// Fits raw `(x, y)` samples with the period known.
pub fn fit_fringe_samples(xs: &[f64], ys: &[f64], period: f64) -> Result<FringeFit> {
    if xs.len() != ys.len() {
        return Err(Error::ShapeMismatch("x and y sample counts differ"));
    }
    if !(period > 0.0 && period.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "period",
            reason: "must be positive and finite",
        });
    }
    if xs.len() < 3 {
        return Err(Error::UnderDetermined("fewer than 3 samples"));
    }
    let k = 2.0 * PI / period;
    let mut normal = Matrix3::zeros();
    let mut rhs = Vector3::zeros();
    for (&x, &y) in xs.iter().zip(ys) {
        let row = Vector3::new(1.0, libm::cos(k * x), libm::sin(k * x));
        normal += row * row.transpose();
        rhs += row * y;
    }
    let c = solve_normal(
        normal,
        rhs,
        "fringe basis is rank deficient on these samples",
    )?;
    if !(c[0] > 0.0) {
        return Err(Error::Normalization("fitted offset"));
    }
    let residual = libm::sqrt(
        xs.iter()
            .zip(ys)
            .map(|(&x, &y)| {
                let r = y - (c[0] + c[1] * libm::cos(k * x) + c[2] * libm::sin(k * x));
                r * r
            })
            .sum(),
    );
    let mut amplitude = libm::hypot(c[1], c[2]);
    // round-off level amplitudes carry no phase
    if amplitude <= 1e-12 * c[0] {
        amplitude = 0.0;
    }
    let phase = if amplitude == 0.0 {
        0.0
    } else {
        libm::atan2(-c[2], c[1])
    };
    Ok(FringeFit {
        visibility: amplitude / c[0],
        phase,
        offset: c[0],
        residual,
        samples: xs.len(),
    })
}

/// Fits a 1-D pattern; the pattern must span at least two periods.
pub fn fit_fringe_visibility(
    pattern: &FringePattern1D,
    period: f64,
    options: &FitOptions,
) -> Result<FringeFit> {
    let grid = pattern.grid();
    if grid.extent() + grid.spacing() < 2.0 * period * (1.0 - 1e-9) {
        return Err(Error::UnderDetermined(
            "pattern covers fewer than two fringe periods",
        ));
    }
    let mut xs = Vec::with_capacity(grid.len());
    let mut ys = Vec::with_capacity(grid.len());
    match options.envelope {
        None => {
            xs.extend(grid.iter());
            ys.extend_from_slice(pattern.values());
        }
        Some(env) => {
            if env.len() != grid.len() {
                return Err(Error::ShapeMismatch(
                    "envelope length differs from the pattern",
                ));
            }
            let floor = options.envelope_floor * env.iter().cloned().fold(0.0, f64::max);
            for ((x, &y), &e) in grid.iter().zip(pattern.values()).zip(env) {
                if e > floor && e > 0.0 {
                    xs.push(x);
                    ys.push(y / e);
                }
            }
        }
    }
    fit_fringe_samples(&xs, &ys, period)
}

/// Result of fitting `A + B cos(k(x'+x'')) + C cos(k(x'-x''))` to an excess pattern.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JointFit {
    pub v12: f64,
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub residual: f64,
    pub samples: usize,
}

/// Options for [`fit_joint_visibility`].
#[derive(Debug, Clone, Copy, Default)]
pub struct JointFitOptions {
    /// Entries with `|i - j| <= diagonal_band` are left out of the fit. Measured
    /// estimates have an interpolated diagonal, so the pipeline masks a band.
    pub diagonal_band: Option<usize>,
}

/// Minimizes `(V(1+V)/2 - b)² + (V(1-V)/2 + c)²` over `[0, 1]`.
pub fn solve_v12(b: f64, c: f64) -> f64 {
    let cost = |v: f64| {
        let p = 0.5 * v * (1.0 + v) - b;
        let q = 0.5 * v * (1.0 - v) + c;
        p * p + q * q
    };
    let slope = |v: f64| 2.0 * v * v * v + (1.0 - 2.0 * (b + c)) * v - (b - c);
    let mut best = if cost(0.0) <= cost(1.0) { 0.0 } else { 1.0 };
    const STEPS: usize = 256;
    for s in 0..STEPS {
        let (mut lo, mut hi) = (s as f64 / STEPS as f64, (s + 1) as f64 / STEPS as f64);
        let (flo, fhi) = (slope(lo), slope(hi));
        if flo == 0.0 {
            if cost(lo) < cost(best) {
                best = lo;
            }
            continue;
        }
        if flo.signum() == fhi.signum() {
            continue;
        }
        for _ in 0..80 {
            let mid = 0.5 * (lo + hi);
            if slope(mid).signum() == flo.signum() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let root = 0.5 * (lo + hi);
        if cost(root) < cost(best) {
            best = root;
        }
    }
    best.clamp(0.0, 1.0)
}

/// Fits the sum/difference fringe model at known period and extracts `V12`.
pub fn fit_joint_visibility(
    excess: &JointPattern2D,
    period: f64,
    options: &JointFitOptions,
) -> Result<JointFit> {
    if !(period > 0.0 && period.is_finite()) {
        return Err(Error::InvalidParameter {
            name: "period",
            reason: "must be positive and finite",
        });
    }
    let grid = excess.grid();
    if grid.extent() + grid.spacing() < 2.0 * period * (1.0 - 1e-9) {
        return Err(Error::UnderDetermined(
            "pattern covers fewer than two fringe periods",
        ));
    }
    let k = 2.0 * PI / period;
    let xs: Vec<f64> = grid.iter().collect();
    let keep = |i: usize, j: usize| {
        options
            .diagonal_band
            .is_none_or(|band| i.abs_diff(j) > band)
    };
    let mut normal = Matrix3::zeros();
    let mut rhs = Vector3::zeros();
    let mut samples = 0;
    for (i, &x1) in xs.iter().enumerate() {
        for (j, &x2) in xs.iter().enumerate() {
            if !keep(i, j) {
                continue;
            }
            let row = Vector3::new(1.0, libm::cos(k * (x1 + x2)), libm::cos(k * (x1 - x2)));
            normal += row * row.transpose();
            rhs += row * excess.at(i, j);
            samples += 1;
        }
    }
    let coef = solve_normal(
        normal,
        rhs,
        "joint fringe basis is rank deficient on this grid",
    )?;
    let (a, b, c) = (coef[0], coef[1], coef[2]);
    if !(a > 0.0) {
        return Err(Error::Normalization("fitted offset"));
    }
    let mut sq = 0.0;
    for (i, &x1) in xs.iter().enumerate() {
        for (j, &x2) in xs.iter().enumerate() {
            if keep(i, j) {
                let r = excess.at(i, j)
                    - (a + b * libm::cos(k * (x1 + x2)) + c * libm::cos(k * (x1 - x2)));
                sq += r * r;
            }
        }
    }
    Ok(JointFit {
        v12: solve_v12(b / a, c / a),
        a,
        b,
        c,
        residual: libm::sqrt(sq),
        samples,
    })
}
