//! Slit-plane second-order coherence and two-photon amplitude of a thin
//! down-conversion source, and their normalized cross values.
//!
//! For a source emitting pairs independently from each point the one-photon
//! coherence at the slits is `G(x_i, x_j) = ∫ I_p(x) h1*(x_i, x) h1(x_j, x) dx` and the
//! pair amplitude is `Ψ(x_i, x_j) = ∫ E_p(x) h1(x_i, x) h1(x_j, x) dx`. Both integrals
//! use the rectangle rule on the pump grid.

use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::grid::SpatialGrid;
use crate::math::sinc;
use crate::optics::{slit_rows, LinearKernel, SlitPair};
use crate::C64;

/// Imaginary parts below this are treated as rounding noise.
pub const REAL_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PumpShape {
    Uniform,
    Gaussian,
    Custom,
}

/// Transverse pump field `E_p(x)` on a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PumpProfile {
    shape: PumpShape,
    width: f64,
    grid: SpatialGrid,
    field: Vec<C64>,
}

impl PumpProfile {
    /// Uniform beam of full width `width`, sampled at `n` cell midpoints spanning the beam.
    pub fn uniform(width: f64, n: usize) -> Result<Self> {
        check_width(width)?;
        let grid = SpatialGrid::cell_centered(-0.5 * width, 0.5 * width, n)?;
        Ok(Self {
            shape: PumpShape::Uniform,
            width,
            grid,
            field: alloc::vec![C64::new(1.0, 0.0); n],
        })
    }

    /// Uniform beam of full width `width` sampled on an arbitrary grid.
    pub fn uniform_on(width: f64, grid: SpatialGrid) -> Result<Self> {
        check_width(width)?;
        let half = 0.5 * width * (1.0 + 1e-12);
        let field = grid
            .iter()
            .map(|x| {
                if x.abs() <= half {
                    C64::new(1.0, 0.0)
                } else {
                    C64::new(0.0, 0.0)
                }
            })
            .collect();
        Self::validated(PumpShape::Uniform, width, grid, field)
    }

    /// Gaussian beam whose intensity falls to `1/e^2` at a diameter of `width`.
    pub fn gaussian(width: f64, grid: SpatialGrid) -> Result<Self> {
        check_width(width)?;
        let w0 = 0.5 * width;
        let field = grid
            .iter()
            .map(|x| C64::new(libm::exp(-(x * x) / (w0 * w0)), 0.0))
            .collect();
        Self::validated(PumpShape::Gaussian, width, grid, field)
    }

    pub fn from_field(grid: SpatialGrid, field: Vec<C64>) -> Result<Self> {
        if field.len() != grid.len() {
            return Err(Error::ShapeMismatch(
                "pump field length differs from its grid",
            ));
        }
        Self::validated(PumpShape::Custom, grid.extent(), grid, field)
    }

    fn validated(shape: PumpShape, width: f64, grid: SpatialGrid, field: Vec<C64>) -> Result<Self> {
        if field
            .iter()
            .any(|v| !(v.re.is_finite() && v.im.is_finite()))
        {
            return Err(Error::InvalidParameter {
                name: "pump",
                reason: "field samples must be finite",
            });
        }
        if field.iter().all(|v| v.norm_sqr() == 0.0) {
            return Err(Error::DegenerateSource);
        }
        Ok(Self {
            shape,
            width,
            grid,
            field,
        })
    }

    pub fn shape(&self) -> PumpShape {
        self.shape
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn field(&self) -> &[C64] {
        &self.field
    }

    pub fn intensity(&self) -> Vec<f64> {
        self.field.iter().map(|e| e.norm_sqr()).collect()
    }

    pub fn map_field(&self, f: impl Fn(C64) -> C64) -> Result<Self> {
        let field = self.field.iter().map(|&e| f(e)).collect();
        Self::validated(self.shape, self.width, self.grid, field)
    }
}

fn check_width(width: f64) -> Result<()> {
    if width > 0.0 && width.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name: "pump width",
            reason: "must be positive and finite",
        })
    }
}

/// `G(x_i, x_j)` at the two slits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlitCoherence {
    pub g11: f64,
    pub g22: f64,
    pub g12: C64,
}

/// `Ψ(x_i, x_j)` at the two slits.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlitBiphoton {
    pub p11: C64,
    pub p22: C64,
    pub p12: C64,
}

/// Degree of coherence and normalized pair amplitude.
///
/// `psi` is the cross-to-self ratio `Ψ12 / Ψ11` when `|Ψ12| <= |Ψ11|`. When the cross
/// term dominates (a 2f illumination lens sends the partners of a pair to
/// opposite slits), the ratio is inverted to `Ψ11 / Ψ12` and `exchanged` is set:
/// the coincidence fringes then run along `x' - x''` instead of `x' + x''`.
/// Either way `|psi| <= 1`, which is the regime the visibility formulas assume.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Normalized {
    pub g1: C64,
    pub psi: C64,
    pub exchanged: bool,
}

fn check_inputs(pump: &PumpProfile, h1: &LinearKernel) -> Result<()> {
    if *h1.grid_in() != pump.grid {
        return Err(Error::Composition(
            "pump grid differs from the illumination kernel input grid",
        ));
    }
    Ok(())
}

fn weighted_sum(
    weights: impl Iterator<Item = C64>,
    a: &[C64],
    b: &[C64],
    conj_a: bool,
    dx: f64,
) -> C64 {
    weights
        .zip(a.iter().zip(b))
        .map(|(w, (&ra, &rb))| w * if conj_a { ra.conj() } else { ra } * rb)
        .sum::<C64>()
        * dx
}

/// One-photon coherence at the slits from the pump intensity.
pub fn coherence_at_slits(
    pump: &PumpProfile,
    h1: &LinearKernel,
    slits: &SlitPair,
) -> Result<SlitCoherence> {
    check_inputs(pump, h1)?;
    let [r1, r2] = slit_rows(h1, slits)?;
    let dx = pump.grid.spacing();
    let intensity = || pump.field.iter().map(|e| C64::new(e.norm_sqr(), 0.0));
    Ok(SlitCoherence {
        g11: weighted_sum(intensity(), &r1, &r1, true, dx).re,
        g22: weighted_sum(intensity(), &r2, &r2, true, dx).re,
        g12: weighted_sum(intensity(), &r1, &r2, true, dx),
    })
}

/// Two-photon amplitude at the slits from the pump field.
pub fn biphoton_at_slits(
    pump: &PumpProfile,
    h1: &LinearKernel,
    slits: &SlitPair,
) -> Result<SlitBiphoton> {
    check_inputs(pump, h1)?;
    let [r1, r2] = slit_rows(h1, slits)?;
    let dx = pump.grid.spacing();
    let field = || pump.field.iter().copied();
    Ok(SlitBiphoton {
        p11: weighted_sum(field(), &r1, &r1, false, dx),
        p22: weighted_sum(field(), &r2, &r2, false, dx),
        p12: weighted_sum(field(), &r1, &r2, false, dx),
    })
}

/// `g1 = G12 / sqrt(G11 G22)` and the oriented pair ratio (see [`Normalized`]).
pub fn normalized_values(g: &SlitCoherence, p: &SlitBiphoton) -> Result<Normalized> {
    let gg = g.g11 * g.g22;
    if !(gg > 0.0) {
        return Err(Error::Normalization(if g.g11 > 0.0 {
            "G22"
        } else {
            "G11"
        }));
    }
    let g1 = g.g12 / libm::sqrt(gg);
    let (self_term, cross) = (p.p11.norm_sqr(), p.p12.norm_sqr());
    if self_term == 0.0 && cross == 0.0 {
        return Err(Error::Normalization("Psi11 and Psi12"));
    }
    let (psi, exchanged) = if cross <= self_term {
        (p.p12 / p.p11, false)
    } else {
        (p.p11 / p.p12, true)
    };
    Ok(Normalized { g1, psi, exchanged })
}

/// `sinc(b a / (lambda f))`: pair ratio of a uniform pump of width `b` seen
/// through 2f illumination optics.
pub fn psi_sinc_closed_form(
    pump_width: f64,
    separation: f64,
    wavelength: f64,
    focal_length: f64,
) -> Result<f64> {
    for (name, v) in [
        ("pump width", pump_width),
        ("separation", separation),
        ("wavelength", wavelength),
        ("focal length", focal_length),
    ] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::InvalidParameter {
                name,
                reason: "must be positive and finite",
            });
        }
    }
    Ok(sinc(pump_width * separation / (wavelength * focal_length)))
}

/// All slit-plane quantities that feed the detector patterns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ApertureCorrelations {
    pub coherence: SlitCoherence,
    pub biphoton: SlitBiphoton,
    pub g1: C64,
    pub psi: C64,
    pub exchanged: bool,
}

impl ApertureCorrelations {
    pub fn new(coherence: SlitCoherence, biphoton: SlitBiphoton) -> Result<Self> {
        let n = normalized_values(&coherence, &biphoton)?;
        Ok(Self {
            coherence,
            biphoton,
            g1: n.g1,
            psi: n.psi,
            exchanged: n.exchanged,
        })
    }

    /// Computes both slit-plane functions from a pump and illumination kernel.
    pub fn compute(pump: &PumpProfile, h1: &LinearKernel, slits: &SlitPair) -> Result<Self> {
        Self::new(
            coherence_at_slits(pump, h1, slits)?,
            biphoton_at_slits(pump, h1, slits)?,
        )
    }

    /// Thin-source model for a real rectangular pump: the pair amplitude has
    /// the same slit-plane structure as the coherence function, so `Ψij = Gij`
    /// and `psi = g1`.
    pub fn from_duality(coherence: SlitCoherence) -> Result<Self> {
        let biphoton = SlitBiphoton {
            p11: C64::new(coherence.g11, 0.0),
            p22: C64::new(coherence.g22, 0.0),
            p12: coherence.g12,
        };
        Self::new(coherence, biphoton)
    }

    /// Builds symmetric slit values directly from a degree of coherence and pair ratio.
    pub fn symmetric(g1: f64, psi: f64) -> Result<Self> {
        let coherence = SlitCoherence {
            g11: 1.0,
            g22: 1.0,
            g12: C64::new(g1, 0.0),
        };
        let biphoton = SlitBiphoton {
            p11: C64::new(1.0, 0.0),
            p22: C64::new(1.0, 0.0),
            p12: C64::new(psi, 0.0),
        };
        Self::new(coherence, biphoton)
    }

    pub fn real_g1(&self) -> Result<f64> {
        real_part(self.g1)
    }

    pub fn real_psi(&self) -> Result<f64> {
        real_part(self.psi)
    }
}

fn real_part(v: C64) -> Result<f64> {
    if v.im.abs() < REAL_TOLERANCE {
        Ok(v.re)
    } else {
        Err(Error::NotReal { imag: v.im })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::math::cabs;
    use crate::optics::{fourier_2f_kernel, fresnel_kernel};
    use core::f64::consts::PI;

    const LAMBDA: f64 = 812e-9;
    const F: f64 = 50e-3;
    const A: f64 = 0.7e-3;

    fn plane() -> SpatialGrid {
        SpatialGrid::new(-A, A, 5).unwrap()
    }

    fn width_for(u: f64) -> f64 {
        u * LAMBDA * F / A
    }

    #[test]
    fn flat_kernel_is_fully_coherent_and_separable() {
        let pump =
            PumpProfile::gaussian(1e-3, SpatialGrid::new(-1e-3, 1e-3, 201).unwrap()).unwrap();
        let h1 = LinearKernel::from_fn(*pump.grid(), plane(), |_, _| C64::new(1.0, 0.0)).unwrap();
        let slits = SlitPair::point(A).unwrap();
        let g = coherence_at_slits(&pump, &h1, &slits).unwrap();
        let total: f64 = pump.intensity().iter().sum::<f64>() * pump.grid().spacing();
        assert!((g.g11 - total).abs() < 1e-15);
        assert!((g.g22 - total).abs() < 1e-15);
        assert!(cabs(g.g12 - C64::new(total, 0.0)) < 1e-15);
        let p = biphoton_at_slits(&pump, &h1, &slits).unwrap();
        let field_total: C64 = pump.field().iter().sum::<C64>() * pump.grid().spacing();
        for v in [p.p11, p.p22, p.p12] {
            assert!(cabs(v - field_total) < 1e-15);
        }
        let n = normalized_values(&g, &p).unwrap();
        assert!(cabs(n.g1 - C64::new(1.0, 0.0)) < 1e-14);
        assert!(cabs(n.psi - C64::new(1.0, 0.0)) < 1e-14);
    }

    #[test]
    fn uniform_pump_2f_coherence_is_sinc() {
        let slits = SlitPair::point(A).unwrap();
        for u in [0.25, 0.5, 1.5] {
            let pump = PumpProfile::uniform(width_for(u), 4096).unwrap();
            let h1 = fourier_2f_kernel(*pump.grid(), plane(), LAMBDA, F).unwrap();
            let g = coherence_at_slits(&pump, &h1, &slits).unwrap();
            let ratio = g.g12 / g.g11;
            assert!((ratio.re - sinc(u)).abs() < 1e-6, "u={u}");
            assert!(ratio.im.abs() < 1e-12);
        }
    }

    #[test]
    fn scaling_intensity_scales_coherence() {
        let pump =
            PumpProfile::gaussian(0.2e-3, SpatialGrid::new(-0.3e-3, 0.3e-3, 301).unwrap()).unwrap();
        let h1 = fresnel_kernel(*pump.grid(), plane(), LAMBDA, 0.3).unwrap();
        let slits = SlitPair::point(A).unwrap();
        let g = coherence_at_slits(&pump, &h1, &slits).unwrap();
        let c = 3.5_f64;
        let scaled = pump.map_field(|e| e * libm::sqrt(c)).unwrap();
        let gs = coherence_at_slits(&scaled, &h1, &slits).unwrap();
        assert!((gs.g11 - c * g.g11).abs() < 1e-12 * gs.g11);
        assert!(cabs(gs.g12 - g.g12 * c) < 1e-12 * gs.g11);
        let n = normalized_values(&g, &biphoton_at_slits(&pump, &h1, &slits).unwrap()).unwrap();
        let ns = normalized_values(&gs, &biphoton_at_slits(&scaled, &h1, &slits).unwrap()).unwrap();
        assert!(cabs(n.g1 - ns.g1) < 1e-12);
    }

    #[test]
    fn rectangular_pump_2f_duality() {
        // Through 2f illumination the cross amplitude dominates, so the ratio is
        // oriented as Psi11 / Psi12; it then equals sinc and the degree of coherence.
        let slits = SlitPair::point(A).unwrap();
        let pump = PumpProfile::uniform(width_for(0.5), 4096).unwrap();
        let h1 = fourier_2f_kernel(*pump.grid(), plane(), LAMBDA, F).unwrap();
        let ac = ApertureCorrelations::compute(&pump, &h1, &slits).unwrap();
        assert!(ac.exchanged);
        assert!((ac.real_psi().unwrap() - 2.0 / PI).abs() < 1e-6);
        assert!(cabs(ac.psi - ac.g1) < 1e-9);
    }

    #[test]
    fn conjugate_pump_conjugates_amplitudes_for_real_kernel() {
        let grid = SpatialGrid::new(-0.2e-3, 0.2e-3, 101).unwrap();
        let field = grid
            .iter()
            .map(|x| C64::new(1.0 + x * 1e3, libm::sin(x * 2e4)))
            .collect();
        let pump = PumpProfile::from_field(grid, field).unwrap();
        let h1 = LinearKernel::from_fn(grid, plane(), |xo, xi| {
            C64::new(libm::cos(3e6 * xo * xi), 0.0)
        })
        .unwrap();
        let slits = SlitPair::point(A).unwrap();
        let p = biphoton_at_slits(&pump, &h1, &slits).unwrap();
        let pc = biphoton_at_slits(&pump.map_field(|e| e.conj()).unwrap(), &h1, &slits).unwrap();
        assert!(cabs(pc.p11 - p.p11.conj()) < 1e-18);
        assert!(cabs(pc.p22 - p.p22.conj()) < 1e-18);
        assert!(cabs(pc.p12 - p.p12.conj()) < 1e-18);
    }

    #[test]
    fn normalized_value_examples() {
        let g = SlitCoherence {
            g11: 2.0,
            g22: 2.0,
            g12: C64::new(2.0, 0.0),
        };
        let p = SlitBiphoton {
            p11: C64::new(3.0, 0.0),
            p22: C64::new(3.0, 0.0),
            p12: C64::new(0.0, 0.0),
        };
        let n = normalized_values(&g, &p).unwrap();
        assert_eq!(n.g1, C64::new(1.0, 0.0));
        assert_eq!(n.psi, C64::new(0.0, 0.0));
        assert!(!n.exchanged);

        // uniform pump with b a / (lambda f) = 0.5 -> 2 / pi
        let slits = SlitPair::point(A).unwrap();
        let pump = PumpProfile::uniform(width_for(0.5), 4096).unwrap();
        let h1 = fourier_2f_kernel(*pump.grid(), plane(), LAMBDA, F).unwrap();
        let n = normalized_values(
            &coherence_at_slits(&pump, &h1, &slits).unwrap(),
            &biphoton_at_slits(&pump, &h1, &slits).unwrap(),
        )
        .unwrap();
        assert!((n.psi.re - 0.636_619_772_367_581_3).abs() < 1e-6);
    }

    #[test]
    fn normalization_errors_name_the_denominator() {
        let p = SlitBiphoton {
            p11: C64::new(1.0, 0.0),
            p22: C64::new(1.0, 0.0),
            p12: C64::new(0.5, 0.0),
        };
        let g = SlitCoherence {
            g11: 0.0,
            g22: 1.0,
            g12: C64::new(0.0, 0.0),
        };
        assert_eq!(normalized_values(&g, &p), Err(Error::Normalization("G11")));
        let g = SlitCoherence {
            g11: 1.0,
            g22: 0.0,
            g12: C64::new(0.0, 0.0),
        };
        assert_eq!(normalized_values(&g, &p), Err(Error::Normalization("G22")));
        let g = SlitCoherence {
            g11: 1.0,
            g22: 1.0,
            g12: C64::new(0.0, 0.0),
        };
        let zero = SlitBiphoton {
            p11: C64::new(0.0, 0.0),
            p22: C64::new(0.0, 0.0),
            p12: C64::new(0.0, 0.0),
        };
        assert_eq!(
            normalized_values(&g, &zero),
            Err(Error::Normalization("Psi11 and Psi12"))
        );
    }

    #[test]
    fn degenerate_pump_rejected() {
        let grid = SpatialGrid::new(-1e-3, 1e-3, 11).unwrap();
        assert_eq!(
            PumpProfile::from_field(grid, alloc::vec![C64::new(0.0, 0.0); 11]),
            Err(Error::DegenerateSource)
        );
    }

    #[test]
    fn sinc_closed_form_values() {
        let b = |u: f64| width_for(u);
        assert!((psi_sinc_closed_form(b(1e-9), A, LAMBDA, F).unwrap() - 1.0).abs() < 1e-15);
        assert!(psi_sinc_closed_form(b(1.0), A, LAMBDA, F).unwrap().abs() < 1e-12);
        let v = psi_sinc_closed_form(b(1.5), A, LAMBDA, F).unwrap();
        assert!((v + 0.212_206_590_789_193_8).abs() < 1e-9);
        assert!(psi_sinc_closed_form(0.0, A, LAMBDA, F).is_err());
    }

    #[test]
    fn grid_mismatch_rejected() {
        let pump = PumpProfile::uniform(1e-4, 64).unwrap();
        let other = SpatialGrid::new(-1e-4, 1e-4, 64).unwrap();
        let h1 = fourier_2f_kernel(other, plane(), LAMBDA, F).unwrap();
        let slits = SlitPair::point(A).unwrap();
        assert!(matches!(
            coherence_at_slits(&pump, &h1, &slits),
            Err(Error::Composition(_))
        ));
    }

    #[test]
    fn real_part_guard() {
        let ac = ApertureCorrelations::new(
            SlitCoherence {
                g11: 1.0,
                g22: 1.0,
                g12: C64::new(0.5, 0.1),
            },
            SlitBiphoton {
                p11: C64::new(1.0, 0.0),
                p22: C64::new(1.0, 0.0),
                p12: C64::new(0.5, 0.0),
            },
        )
        .unwrap();
        assert!(matches!(ac.real_g1(), Err(Error::NotReal { .. })));
        assert_eq!(ac.real_psi().unwrap(), 0.5);
    }
}
