use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft;
use crate::optics::SpeckleResponse;

/// Default peak score below which registration is declared failed.
pub const RHO_MIN: f64 = 0.1;

#[derive(Debug, Clone, PartialEq)]
pub struct Registration {
    /// Estimated displacement of `moving` relative to `reference`.
    pub dx: i64,
    pub dy: i64,
    /// Height of the phase-correlation peak, 1 for identical images.
    pub score: f64,
    /// `moving` shifted back by `(-dx, -dy)`, or unmodified on failure.
    pub aligned: SpeckleResponse,
    pub success: bool,
}

fn spectrum(r: &SpeckleResponse) -> Vec<Complex64> {
    let mean = r.mean();
    let mut a: Vec<Complex64> = r.data.iter().map(|&v| Complex64::new(v - mean, 0.0)).collect();
    fft::fft2(&mut a, r.width, false);
    a
}

/// Integer-pixel phase correlation with threshold [`RHO_MIN`].
pub fn register(reference: &SpeckleResponse, moving: &SpeckleResponse) -> Result<Registration> {
    register_with(reference, moving, RHO_MIN)
}

pub fn register_with(reference: &SpeckleResponse, moving: &SpeckleResponse, rho_min: f64) -> Result<Registration> {
    let w = reference.width;
    if moving.width != w || moving.data.len() != reference.data.len() {
        return Err(Error::DimensionMismatch {
            expected: w,
            got: moving.width,
        });
    }
    let fr = spectrum(reference);
    let mut cross = spectrum(moving);
    for (c, r) in cross.iter_mut().zip(&fr) {
        let p = *c * r.conj();
        let mag = p.norm();
        *c = if mag > 1e-300 { p / mag } else { Complex64::default() };
    }
    fft::fft2(&mut cross, w, true);
    let norm = 1.0 / (w * w) as f64;
    let (mut best, mut score) = (0usize, f64::NEG_INFINITY);
    for (i, v) in cross.iter().enumerate() {
        // strict comparison keeps the first maximum in row-major order
        if v.re * norm > score {
            score = v.re * norm;
            best = i;
        }
    }
    let dx = fft::signed_index(best % w, w);
    let dy = fft::signed_index(best / w, w);
    let success = score >= rho_min;
    let aligned = if success { moving.rolled(-dx, -dy) } else { moving.clone() };
    Ok(Registration {
        dx,
        dy,
        score,
        aligned,
        success,
    })
}
