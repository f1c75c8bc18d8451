use super::ViewFactorError;

/// View factor from a disk of radius `r1` to a coaxial parallel disk of
/// radius `r2` at separation `h`.
///
/// With `R_i = r_i / h` and `S = 1 + (1 + R2^2) / R1^2`,
/// `F = (S - sqrt(S^2 - 4 (R2/R1)^2)) / 2`, evaluated in the rationalised
/// form `2 (R2/R1)^2 / (S + sqrt(...))` to avoid cancellation when F is small.
pub fn analytic_disk_viewfactor(r1: f64, r2: f64, h: f64) -> Result<f64, ViewFactorError> {
    if !(r1 > 0.0 && r2 > 0.0 && h > 0.0) || !(r1.is_finite() && r2.is_finite() && h.is_finite()) {
        return Err(ViewFactorError::NonPositive { r1, r2, h });
    }
    let big1 = r1 / h;
    let big2 = r2 / h;
    let s = 1.0 + (1.0 + big2 * big2) / (big1 * big1);
    let ratio2 = (big2 / big1) * (big2 / big1);
    let root = (s * s - 4.0 * ratio2).max(0.0).sqrt();
    Ok((2.0 * ratio2 / (s + root)).min(1.0))
}
