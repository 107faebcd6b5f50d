use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{AppError, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChiSquareTest {
    pub statistic: f64,
    pub dof: usize,
    pub p_value: f64,
}

/// Two-sample chi-square test that two binned count vectors come from the
/// same distribution; totals may differ. Bins empty in both are skipped.
pub fn two_sample_chi_square(a: &[f64], b: &[f64]) -> Result<ChiSquareTest> {
    if a.len() != b.len() {
        return Err(AppError::Config("histograms differ in length".into()));
    }
    let (ta, tb): (f64, f64) = (a.iter().sum(), b.iter().sum());
    if !(ta > 0.0 && tb > 0.0) {
        return Err(AppError::Model(twophoton_core::Error::EmptyEstimate));
    }
    let (ka, kb) = ((tb / ta).sqrt(), (ta / tb).sqrt());
    let mut statistic = 0.0;
    let mut bins = 0usize;
    for (&x, &y) in a.iter().zip(b) {
        if x + y > 0.0 {
            let d = ka * x - kb * y;
            statistic += d * d / (x + y);
            bins += 1;
        }
    }
    let dof = bins.saturating_sub(1).max(1);
    let dist = ChiSquared::new(dof as f64).expect("positive degrees of freedom");
    Ok(ChiSquareTest {
        statistic,
        dof,
        p_value: dist.sf(statistic),
    })
}
