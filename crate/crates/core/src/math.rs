use core::f64::consts::PI;

/// Normalized sinc, `sin(pi x) / (pi x)`, with the removable singularity filled.
pub fn sinc(x: f64) -> f64 {
    let px = PI * x;
    if px.abs() < 1e-4 {
        // Taylor series; error below 1e-20 in this range.
        let p2 = px * px;
        1.0 - p2 / 6.0 + p2 * p2 / 120.0
    } else {
        libm::sin(px) / px
    }
}

#[inline]
pub(crate) fn cis(phase: f64) -> crate::C64 {
    crate::C64::new(libm::cos(phase), libm::sin(phase))
}

/// Modulus of a complex number.
#[inline]
pub fn cabs(z: crate::C64) -> f64 {
    libm::hypot(z.re, z.im)
}
