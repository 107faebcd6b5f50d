//! Geometry to slit-plane correlations and detector patterns.

use twophoton_core::biphoton::{
    biphoton_at_slits, coherence_at_slits, normalized_values, ApertureCorrelations, PumpProfile,
};
use twophoton_core::optics::{fourier_2f_kernel, fresnel_kernel, LinearKernel, SlitPair};
use twophoton_core::patterns::{
    coincidence_general, excess_pattern, intensity_general, marginal_pattern, slit_envelope,
    FringePattern1D, JointPattern2D, RegionOfInterest,
};
use twophoton_core::visibility::{visibilities_from_psi, VisibilitySet};
use twophoton_core::{SpatialGrid, C64};

use crate::config::{ExperimentConfig, Illumination, PumpKind};
use crate::error::Result;

/// Slit-plane quantities for one source distance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelPoint {
    pub distance: f64,
    /// Degree of coherence between the slits.
    pub g1: f64,
    /// Pair ratio driving the two-photon patterns.
    pub psi: f64,
    /// Oriented cross-to-self ratio of the pair amplitude evaluated directly.
    pub direct_psi: C64,
    pub exchanged: bool,
    pub correlations: ApertureCorrelations,
    pub visibilities: VisibilitySet,
}

pub fn pump(config: &ExperimentConfig) -> Result<PumpProfile> {
    let b = config.pump_width;
    Ok(match config.pump_shape {
        PumpKind::Uniform => PumpProfile::uniform(b, config.source_nodes)?,
        PumpKind::Gaussian => PumpProfile::gaussian(
            b,
            SpatialGrid::cell_centered(-1.5 * b, 1.5 * b, config.source_nodes)?,
        )?,
    })
}

/// Slits as the analytic model sees them, with a slit-plane grid that holds them.
pub fn slit_plane(config: &ExperimentConfig) -> Result<(SlitPair, SpatialGrid)> {
    let slits = SlitPair::new(config.slit_separation, config.slit_width)?;
    let half = 0.5 * config.slit_separation;
    if config.slit_averaging {
        let edge = half + 0.5 * config.slit_width;
        Ok((slits, SpatialGrid::new(-edge, edge, 1025)?))
    } else {
        Ok((slits.as_point(), SpatialGrid::new(-half, half, 3)?))
    }
}

pub fn illumination_kernel(
    config: &ExperimentConfig,
    source: SpatialGrid,
    slit_grid: SpatialGrid,
    distance: f64,
) -> Result<LinearKernel> {
    Ok(match config.illumination {
        Illumination::Fresnel => fresnel_kernel(source, slit_grid, config.wavelength, distance)?,
        Illumination::Fourier2f => {
            fourier_2f_kernel(source, slit_grid, config.wavelength, config.focal_length)?
        }
    })
}

/// Evaluates the thin-source model at `distance`. The pair ratio follows the
/// coherence (`psi = g1`) unless the configuration pins it.
pub fn evaluate(config: &ExperimentConfig, distance: f64) -> Result<ModelPoint> {
    let pump = pump(config)?;
    let (slits, slit_grid) = slit_plane(config)?;
    let h1 = illumination_kernel(config, *pump.grid(), slit_grid, distance)?;
    let coherence = coherence_at_slits(&pump, &h1, &slits)?;
    let direct = normalized_values(&coherence, &biphoton_at_slits(&pump, &h1, &slits)?)?;
    let dual = ApertureCorrelations::from_duality(coherence)?;
    let g1 = dual.real_g1()?;
    let (psi, correlations) = match config.psi {
        Some(p) => (p, ApertureCorrelations::symmetric(p, p)?),
        None => (g1, dual),
    };
    Ok(ModelPoint {
        distance,
        g1,
        psi,
        direct_psi: direct.psi,
        exchanged: direct.exchanged,
        correlations,
        visibilities: visibilities_from_psi(psi)?,
    })
}

/// Detector patterns for one model point on the camera's column grid.
#[derive(Debug, Clone)]
pub struct PatternSet {
    pub intensity: FringePattern1D,
    pub coincidence: JointPattern2D,
    pub marginal: FringePattern1D,
    pub excess: JointPattern2D,
}

pub fn detector_grid(config: &ExperimentConfig) -> SpatialGrid {
    config.camera.column_grid()
}

pub fn envelope(config: &ExperimentConfig) -> Result<Vec<f64>> {
    Ok(slit_envelope(
        config.slit_width,
        config.wavelength,
        config.focal_length,
        &detector_grid(config),
    )?)
}

pub fn patterns(config: &ExperimentConfig, point: &ModelPoint) -> Result<PatternSet> {
    let (slits, slit_grid) = slit_plane(config)?;
    let h2 = fourier_2f_kernel(
        slit_grid,
        detector_grid(config),
        config.wavelength,
        config.focal_length,
    )?;
    let mut intensity = intensity_general(&h2, &point.correlations, &slits)?;
    let mut coincidence = coincidence_general(&h2, &point.correlations, &slits)?;
    if config.envelope {
        let env = envelope(config)?;
        intensity = intensity.with_envelope(&env)?;
        coincidence = coincidence.with_envelope(&env)?;
    }
    let marginal = marginal_pattern(&coincidence)?;
    let excess = excess_pattern(
        &coincidence,
        &marginal,
        RegionOfInterest::IntegerPeriods(config.period()),
    )?;
    Ok(PatternSet {
        intensity,
        coincidence,
        marginal,
        excess,
    })
}
