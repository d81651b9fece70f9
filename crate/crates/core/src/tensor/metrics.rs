use super::grid::Grid;
use crate::error::Result;

/// PSNR is capped at this value; reached exactly when the MSE is zero.
pub const PSNR_CAP_DB: f64 = 300.0;

/// Reconstruction quality summary attached to experiment reports.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    pub psnr_db: f64,
    pub rel_iter_error: f64,
    pub rel_recon_error: f64,
}

/// Peak signal-to-noise ratio 10*log10(peak^2 / MSE) in dB, clamped to
/// [`PSNR_CAP_DB`]. `peak` defaults to 1.0 for unit-range data at call
/// sites; it must be positive.
pub fn psnr(a: &Grid, b: &Grid, peak: f64) -> Result<f64> {
    a.same_shape(b)?;
    assert!(peak > 0.0, "peak must be positive");
    let n = a.len() as f64;
    let mse = a.sub(b)?.norm_sq() / n;
    if mse == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((10.0 * (peak * peak / mse).log10()).min(PSNR_CAP_DB))
}

/// Relative error ||a - reference|| / ||reference|| together with a flag
/// set when the reference norm is zero; in that case the absolute error
/// is returned instead.
pub fn rel_error_flagged(a: &Grid, reference: &Grid) -> Result<(f64, bool)> {
    a.same_shape(reference)?;
    let diff = a.sub(reference)?.norm();
    let denom = reference.norm();
    if denom == 0.0 {
        Ok((diff, true))
    } else {
        Ok((diff / denom, false))
    }
}

/// Relative error in the Euclidean norm; falls back to the absolute
/// error when the reference is the zero grid.
pub fn rel_error(a: &Grid, reference: &Grid) -> Result<f64> {
    Ok(rel_error_flagged(a, reference)?.0)
}
