//! Discretized linear-optical impulse responses: free space, a lens in a 2f
//! configuration, and the two-path composition through a double slit.

use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::grid::SpatialGrid;
use crate::math::cis;
use crate::C64;

/// Complex impulse response `h(x_out, x_in)` sampled on two grids.
///
/// `values` has one row per output node and one column per input node.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearKernel {
    grid_in: SpatialGrid,
    grid_out: SpatialGrid,
    values: DMatrix<C64>,
}

impl LinearKernel {
    pub fn from_fn(
        grid_in: SpatialGrid,
        grid_out: SpatialGrid,
        mut f: impl FnMut(f64, f64) -> C64,
    ) -> Result<Self> {
        let xs_in: Vec<f64> = grid_in.iter().collect();
        let xs_out: Vec<f64> = grid_out.iter().collect();
        let values = DMatrix::from_fn(xs_out.len(), xs_in.len(), |j, i| f(xs_out[j], xs_in[i]));
        Self::from_matrix(grid_in, grid_out, values)
    }

    pub fn from_matrix(
        grid_in: SpatialGrid,
        grid_out: SpatialGrid,
        values: DMatrix<C64>,
    ) -> Result<Self> {
        if values.nrows() != grid_out.len() || values.ncols() != grid_in.len() {
            return Err(Error::ShapeMismatch(
                "kernel matrix does not match its grids",
            ));
        }
        if values
            .iter()
            .any(|v| !(v.re.is_finite() && v.im.is_finite()))
        {
            return Err(Error::InvalidParameter {
                name: "kernel",
                reason: "entries must be finite",
            });
        }
        Ok(Self {
            grid_in,
            grid_out,
            values,
        })
    }

    pub fn grid_in(&self) -> &SpatialGrid {
        &self.grid_in
    }

    pub fn grid_out(&self) -> &SpatialGrid {
        &self.grid_out
    }

    pub fn values(&self) -> &DMatrix<C64> {
        &self.values
    }

    #[inline]
    pub fn at(&self, out: usize, inp: usize) -> C64 {
        self.values[(out, inp)]
    }

    /// Multiplies every entry by `alpha`.
    pub fn scaled(&self, alpha: C64) -> Self {
        Self {
            grid_in: self.grid_in,
            grid_out: self.grid_out,
            values: self.values.map(|v| v * alpha),
        }
    }
}

fn positive(name: &'static str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            reason: "must be positive and finite",
        })
    }
}

/// Lens in a 2f arrangement: `exp(-i 2 pi x_out x_in / (lambda f))`.
pub fn fourier_2f_kernel(
    grid_in: SpatialGrid,
    grid_out: SpatialGrid,
    wavelength: f64,
    focal_length: f64,
) -> Result<LinearKernel> {
    positive("wavelength", wavelength)?;
    positive("focal_length", focal_length)?;
    let k = 2.0 * PI / (wavelength * focal_length);
    LinearKernel::from_fn(grid_in, grid_out, |xo, xi| cis(-k * xo * xi))
}

/// Paraxial free-space propagation over `distance`, constant prefactor dropped:
/// `exp(i pi (x_out - x_in)^2 / (lambda d))`.
pub fn fresnel_kernel(
    grid_in: SpatialGrid,
    grid_out: SpatialGrid,
    wavelength: f64,
    distance: f64,
) -> Result<LinearKernel> {
    positive("wavelength", wavelength)?;
    positive("distance", distance)?;
    let k = PI / (wavelength * distance);
    LinearKernel::from_fn(grid_in, grid_out, |xo, xi| {
        let dx = xo - xi;
        cis(k * dx * dx)
    })
}

/// Two slits placed symmetrically about the axis at `-a/2` and `+a/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlitPair {
    separation: f64,
    width: f64,
}

impl SlitPair {
    pub fn new(separation: f64, width: f64) -> Result<Self> {
        positive("separation", separation)?;
        if !(width >= 0.0 && width < separation) {
            return Err(Error::InvalidParameter {
                name: "width",
                reason: "slit width must satisfy 0 <= w < a",
            });
        }
        Ok(Self { separation, width })
    }

    /// Point slits.
    pub fn point(separation: f64) -> Result<Self> {
        Self::new(separation, 0.0)
    }

    pub fn separation(&self) -> f64 {
        self.separation
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn x1(&self) -> f64 {
        -0.5 * self.separation
    }

    pub fn x2(&self) -> f64 {
        0.5 * self.separation
    }

    pub fn positions(&self) -> [f64; 2] {
        [self.x1(), self.x2()]
    }

    pub fn as_point(&self) -> Self {
        Self {
            separation: self.separation,
            width: 0.0,
        }
    }
}

/// Grid nodes covered by one slit. A point slit (or one narrower than a grid
/// cell) snaps to the nearest node; a finite slit takes every node within
/// `w/2` of its center, which is `ceil(w/dx)` nodes up to edge rounding.
fn slit_nodes(grid: &SpatialGrid, center: f64, width: f64) -> Result<Vec<usize>> {
    let nearest = grid.nearest(center)?;
    if width <= 0.0 {
        return Ok(alloc::vec![nearest]);
    }
    let lo = center - 0.5 * width;
    let hi = center + 0.5 * width;
    if !grid.contains(lo) {
        return Err(grid.out_of_range(lo));
    }
    if !grid.contains(hi) {
        return Err(grid.out_of_range(hi));
    }
    let tol = 1e-9 * grid.spacing();
    let nodes: Vec<usize> = (0..grid.len())
        .filter(|&i| {
            let x = grid.x(i);
            x >= lo - tol && x <= hi + tol
        })
        .collect();
    if nodes.is_empty() {
        Ok(alloc::vec![nearest])
    } else {
        Ok(nodes)
    }
}

fn average(nodes: &[usize], len: usize, at: impl Fn(usize, usize) -> C64) -> Vec<C64> {
    let inv = 1.0 / nodes.len() as f64;
    (0..len)
        .map(|i| nodes.iter().map(|&k| at(k, i)).sum::<C64>() * inv)
        .collect()
}

/// Rows `h(x_1, ·)` and `h(x_2, ·)` of a kernel whose output plane holds the slits.
pub fn slit_rows(kernel: &LinearKernel, slits: &SlitPair) -> Result<[Vec<C64>; 2]> {
    let row = |center: f64| -> Result<Vec<C64>> {
        let nodes = slit_nodes(&kernel.grid_out, center, slits.width)?;
        Ok(average(&nodes, kernel.grid_in.len(), |k, i| {
            kernel.values[(k, i)]
        }))
    };
    Ok([row(slits.x1())?, row(slits.x2())?])
}

/// Columns `h(·, x_1)` and `h(·, x_2)` of a kernel whose input plane holds the slits.
pub fn slit_columns(kernel: &LinearKernel, slits: &SlitPair) -> Result<[Vec<C64>; 2]> {
    let col = |center: f64| -> Result<Vec<C64>> {
        let nodes = slit_nodes(&kernel.grid_in, center, slits.width)?;
        Ok(average(&nodes, kernel.grid_out.len(), |k, j| {
            kernel.values[(j, k)]
        }))
    };
    Ok([col(slits.x1())?, col(slits.x2())?])
}

/// Overall response of source -> slits -> detector:
/// `h(x', x) = h2(x', x1) h1(x1, x) + h2(x', x2) h1(x2, x)`.
pub fn compose_two_path(
    h1: &LinearKernel,
    h2: &LinearKernel,
    slits: &SlitPair,
) -> Result<LinearKernel> {
    if h1.grid_out != h2.grid_in {
        return Err(Error::Composition(
            "h1 output grid differs from h2 input grid",
        ));
    }
    let [r1, r2] = slit_rows(h1, slits)?;
    let [c1, c2] = slit_columns(h2, slits)?;
    let values = DMatrix::from_fn(c1.len(), r1.len(), |j, i| c1[j] * r1[i] + c2[j] * r2[i]);
    LinearKernel::from_matrix(h1.grid_in, h2.grid_out, values)
}
