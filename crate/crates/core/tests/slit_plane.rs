use proptest::prelude::*;
use twophoton_core::biphoton::{
    biphoton_at_slits, coherence_at_slits, normalized_values, psi_sinc_closed_form,
    ApertureCorrelations, PumpProfile,
};
use twophoton_core::optics::{fourier_2f_kernel, fresnel_kernel, LinearKernel, SlitPair};
use twophoton_core::patterns::{coincidence_general, coincidence_pattern, marginal_pattern};
use twophoton_core::visibility::{check_complementarity, v12_from_v1, visibilities_from_psi};
use twophoton_core::{cabs, sinc, Complex, SpatialGrid};

const LAMBDA: f64 = 812e-9;
const F: f64 = 50e-3;
const A: f64 = 0.7e-3;

fn slit_grid() -> SpatialGrid {
    SpatialGrid::new(-0.5 * A, 0.5 * A, 3).unwrap()
}

fn two_f_psi(u: f64, n: usize) -> f64 {
    let pump = PumpProfile::uniform(u * LAMBDA * F / A, n).unwrap();
    let h1 = fourier_2f_kernel(*pump.grid(), slit_grid(), LAMBDA, F).unwrap();
    let slits = SlitPair::point(A).unwrap();
    ApertureCorrelations::compute(&pump, &h1, &slits)
        .unwrap()
        .real_psi()
        .unwrap()
}

#[test]
fn quadrature_error_shrinks_as_nodes_double() {
    let want = sinc(0.5);
    let errs: Vec<f64> = [256, 512, 1024, 2048]
        .iter()
        .map(|&n| (two_f_psi(0.5, n) - want).abs())
        .collect();
    for w in errs.windows(2) {
        // midpoint rule: second order
        assert!(w[1] < w[0] / 3.0, "errors {errs:?}");
    }
}

#[test]
fn rectangular_pump_duality_over_ten_widths() {
    let slits = SlitPair::point(A).unwrap();
    for k in 0..10 {
        let u = 0.1 + 0.2 * k as f64;
        let b = u * LAMBDA * F / A;
        let pump = PumpProfile::uniform(b, 4096).unwrap();
        let h1 = fourier_2f_kernel(*pump.grid(), slit_grid(), LAMBDA, F).unwrap();
        let ac = ApertureCorrelations::compute(&pump, &h1, &slits).unwrap();
        assert!(cabs(ac.g1 - ac.psi) < 1e-9, "u = {u}");
        let closed = psi_sinc_closed_form(b, A, LAMBDA, F).unwrap();
        assert!((ac.real_g1().unwrap() - closed).abs() < 1e-6, "u = {u}");
    }
}

#[test]
fn fresnel_illumination_coherence_matches_sinc() {
    let slits = SlitPair::point(A).unwrap();
    for d in [0.055, 0.063, 0.3, 0.54, 0.87] {
        let b = 60e-6;
        let pump = PumpProfile::uniform(b, 4096).unwrap();
        let h1 = fresnel_kernel(*pump.grid(), slit_grid(), LAMBDA, d).unwrap();
        let g = coherence_at_slits(&pump, &h1, &slits).unwrap();
        let ac = ApertureCorrelations::from_duality(g).unwrap();
        let g1 = ac.real_g1().unwrap();
        assert!(
            (g1 - sinc(A * b / (LAMBDA * d))).abs() < 1e-6,
            "d = {d}: {g1}"
        );
        assert!(cabs(ac.psi - ac.g1) < 1e-15);
    }
}

#[test]
fn real_kernel_biphoton_equals_coherence_with_field_for_intensity() {
    let grid = SpatialGrid::new(-1e-3, 1e-3, 201).unwrap();
    let out = slit_grid();
    let h1 = LinearKernel::from_fn(grid, out, |xo, xi| {
        Complex::new((3.0e3 * xo * xi * 1e3).cos() + 0.2, 0.0)
    })
    .unwrap();
    let slits = SlitPair::point(A).unwrap();
    let intensity: Vec<f64> = grid.iter().map(|x| (-(x * x) / 4e-7).exp()).collect();
    let by_amplitude = PumpProfile::from_field(
        grid,
        intensity
            .iter()
            .map(|i| Complex::new(i.sqrt(), 0.0))
            .collect(),
    )
    .unwrap();
    let by_intensity = PumpProfile::from_field(
        grid,
        intensity.iter().map(|&i| Complex::new(i, 0.0)).collect(),
    )
    .unwrap();
    let g = coherence_at_slits(&by_amplitude, &h1, &slits).unwrap();
    let p = biphoton_at_slits(&by_intensity, &h1, &slits).unwrap();
    assert!((p.p11.re - g.g11).abs() < 1e-12 * g.g11);
    assert!((p.p22.re - g.g22).abs() < 1e-12 * g.g22);
    assert!(cabs(p.p12 - g.g12) < 1e-12 * g.g11);
}

#[test]
fn fully_coherent_pairs_separate_into_marginals() {
    let period = LAMBDA * F / A;
    let grid = SpatialGrid::cell_centered(-4.0 * period, 4.0 * period, 128).unwrap();
    let g2 = coincidence_pattern(1.0, period, grid).unwrap();
    let m = marginal_pattern(&g2).unwrap();
    let scale = g2.values().max();
    for i in 0..grid.len() {
        for j in 0..grid.len() {
            let product = m.values()[i] * m.values()[j];
            assert!((g2.at(i, j) - product).abs() < 1e-12 * scale);
        }
    }
}

#[test]
fn general_coincidence_integrates_to_one() {
    let period = LAMBDA * F / A;
    let det = SpatialGrid::cell_centered(-6.0 * period, 6.0 * period, 96).unwrap();
    let h2 = fourier_2f_kernel(slit_grid(), det, LAMBDA, F).unwrap();
    let ac = ApertureCorrelations::symmetric(0.4, 0.4).unwrap();
    let g2 = coincidence_general(&h2, &ac, &SlitPair::point(A).unwrap()).unwrap();
    assert!((g2.integral() - 1.0).abs() < 1e-12);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn coherence_magnitude_never_exceeds_one(
        width in 5e-6f64..3e-3,
        d in 0.02f64..1.5,
        gaussian in any::<bool>(),
    ) {
        let grid = SpatialGrid::new(-2.0 * width, 2.0 * width, 257).unwrap();
        let pump = if gaussian {
            PumpProfile::gaussian(width, grid).unwrap()
        } else {
            PumpProfile::uniform_on(width, grid).unwrap()
        };
        let h1 = fresnel_kernel(grid, slit_grid(), LAMBDA, d).unwrap();
        let slits = SlitPair::point(A).unwrap();
        let n = normalized_values(
            &coherence_at_slits(&pump, &h1, &slits).unwrap(),
            &biphoton_at_slits(&pump, &h1, &slits).unwrap(),
        ).unwrap();
        prop_assert!(cabs(n.g1) <= 1.0 + 1e-12);
        prop_assert!(cabs(n.psi) <= 1.0 + 1e-12);
    }

    #[test]
    fn visibilities_lie_on_the_unit_circle(psi in -1.0f64..=1.0) {
        let v = visibilities_from_psi(psi).unwrap();
        prop_assert!(check_complementarity(&v, 1e-12).pass);
        prop_assert!((v12_from_v1(v.v1).unwrap() - v.v12).abs() < 1e-12);
        prop_assert!(v.v12 >= 0.0);
        prop_assert!(v.v1m * psi >= 0.0);
    }

    #[test]
    fn psi_outside_unit_range_is_rejected(psi in 1.0f64 + 1e-9..10.0) {
        prop_assert!(visibilities_from_psi(psi).is_err());
        prop_assert!(visibilities_from_psi(-psi).is_err());
    }
}
