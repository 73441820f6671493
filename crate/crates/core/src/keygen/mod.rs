//! Speckle images to binary keys.

mod key;
mod register;

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::digest::Digest64;
use crate::error::{Error, Result};
use crate::fft;
use crate::optics::SpeckleResponse;

pub use key::{read_keys, write_keys, BinaryKey};
pub use register::{register, register_with, Registration, RHO_MIN};

/// Single-orientation Gabor filter and sampling lattice. Lengths in detector pixels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GaborConfig {
    pub wavelength_px: f64,
    pub theta: f64,
    pub sigma_px: f64,
    pub stride: usize,
}

impl Default for GaborConfig {
    fn default() -> Self {
        Self {
            wavelength_px: 6.0,
            theta: 0.0,
            sigma_px: 6.0,
            stride: 5,
        }
    }
}

impl GaborConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.wavelength_px.is_finite() && self.wavelength_px >= 2.0) {
            return Err(Error::InvalidParameter(format!(
                "gabor wavelength {} px must be >= 2",
                self.wavelength_px
            )));
        }
        if !(self.sigma_px.is_finite() && self.sigma_px > 0.0) {
            return Err(Error::InvalidParameter(format!("gabor sigma {} px must be > 0", self.sigma_px)));
        }
        if !self.theta.is_finite() {
            return Err(Error::InvalidParameter("gabor orientation must be finite".into()));
        }
        if self.stride == 0 {
            return Err(Error::InvalidParameter("stride must be >= 1".into()));
        }
        Ok(())
    }

    /// Key length for a `width`-pixel response, or an error if the stride
    /// does not divide the width.
    pub fn key_len(&self, width: usize) -> Result<usize> {
        if self.stride == 0 || width % self.stride != 0 {
            return Err(Error::InvalidParameter(format!(
                "stride {} does not divide window {width}",
                self.stride
            )));
        }
        let k = width / self.stride;
        Ok(k * k)
    }

    pub fn fingerprint(&self) -> u64 {
        let mut d = Digest64::new();
        d.update(b"gabor v1");
        for v in [self.wavelength_px, self.theta, self.sigma_px] {
            d.update(&v.to_bits().to_le_bytes());
        }
        d.update(&(self.stride as u64).to_le_bytes());
        d.finish()
    }

    /// Spectrum of the wrapped complex kernel on a `w×w` grid.
    fn kernel_spectrum(&self, w: usize) -> Vec<Complex64> {
        let (c, s) = (self.theta.cos(), self.theta.sin());
        let inv2s2 = 1.0 / (2.0 * self.sigma_px * self.sigma_px);
        let k = 2.0 * PI / self.wavelength_px;
        let mut g = Vec::with_capacity(w * w);
        for y in 0..w {
            let yy = fft::signed_index(y, w) as f64;
            for x in 0..w {
                let xx = fft::signed_index(x, w) as f64;
                let env = (-(xx * xx + yy * yy) * inv2s2).exp();
                g.push(Complex64::from_polar(env, k * (xx * c + yy * s)));
            }
        }
        fft::fft2(&mut g, w, false);
        g
    }
}

/// Zero-mean, unit-variance copy of the image; all zeros for a constant image.
fn normalized(r: &SpeckleResponse) -> Vec<f64> {
    let n = r.data.len() as f64;
    let mean = r.data.iter().sum::<f64>() / n;
    let var = r.data.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let sd = var.sqrt();
    r.data
        .iter()
        .map(|v| if sd > 0.0 { (v - mean) / sd } else { 0.0 })
        .collect()
}

/// Sign of the real Gabor response sampled every `stride` pixels, row-major.
pub fn hash_response(r: &SpeckleResponse, g: &GaborConfig) -> Result<BinaryKey> {
    g.validate()?;
    let w = r.width;
    if r.data.len() != w * w {
        return Err(Error::DimensionMismatch {
            expected: w * w,
            got: r.data.len(),
        });
    }
    if w % g.stride != 0 {
        return Err(Error::DimensionMismatch {
            expected: w / g.stride * g.stride,
            got: w,
        });
    }
    let mut a: Vec<Complex64> = normalized(r).into_iter().map(|v| Complex64::new(v, 0.0)).collect();
    fft::fft2(&mut a, w, false);
    for (v, k) in a.iter_mut().zip(g.kernel_spectrum(w)) {
        *v *= k;
    }
    fft::fft2(&mut a, w, true);
    let mut bits = Vec::with_capacity((w / g.stride).pow(2));
    for y in (0..w).step_by(g.stride) {
        for x in (0..w).step_by(g.stride) {
            bits.push(a[y * w + x].re > 0.0);
        }
    }
    Ok(BinaryKey::from_bits(&bits, r.meta))
}

/// Radially averaged autocorrelation of the zero-mean images, normalized to 1 at lag 0.
pub fn radial_autocorrelation(responses: &[SpeckleResponse]) -> Result<Vec<f64>> {
    let w = responses.first().map(|r| r.width).unwrap_or(0);
    let mut acc = vec![0.0; w * w];
    for r in responses {
        if r.width != w || r.data.len() != w * w {
            return Err(Error::DimensionMismatch {
                expected: w,
                got: r.width,
            });
        }
        let mut a: Vec<Complex64> = normalized(r).into_iter().map(|v| Complex64::new(v, 0.0)).collect();
        fft::fft2(&mut a, w, false);
        for v in &mut a {
            *v = Complex64::new(v.norm_sqr(), 0.0);
        }
        fft::fft2(&mut a, w, true);
        for (s, v) in acc.iter_mut().zip(&a) {
            *s += v.re;
        }
    }
    let rmax = w / 2;
    let mut sum = vec![0.0; rmax + 1];
    let mut cnt = vec![0usize; rmax + 1];
    for y in 0..w {
        let dy = fft::signed_index(y, w) as f64;
        for x in 0..w {
            let dx = fft::signed_index(x, w) as f64;
            let rb = (dx * dx + dy * dy).sqrt().round() as usize;
            if rb <= rmax {
                sum[rb] += acc[y * w + x];
                cnt[rb] += 1;
            }
        }
    }
    let zero = sum[0];
    if zero <= 0.0 {
        return Err(Error::InvalidParameter("responses carry no contrast".into()));
    }
    Ok(sum.iter().zip(&cnt).map(|(s, &c)| s / c as f64 / zero).collect())
}

/// Sets `λ_g = σ_g =` mean speckle grain size, measured as the FWHM of the
/// radially averaged intensity autocorrelation; `θ` and stride keep their defaults.
pub fn tune_gabor(responses: &[SpeckleResponse]) -> Result<GaborConfig> {
    if responses.len() < 10 {
        return Err(Error::InsufficientSample {
            required: 10,
            got: responses.len(),
        });
    }
    let prof = radial_autocorrelation(responses)?;
    let half = prof
        .windows(2)
        .enumerate()
        .find(|(_, p)| p[1] <= 0.5)
        .map(|(r, p)| r as f64 + (p[0] - 0.5) / (p[0] - p[1]))
        .ok_or_else(|| Error::InvalidParameter("autocorrelation never falls to half maximum".into()))?;
    let grain = (2.0 * half).max(2.0);
    Ok(GaborConfig {
        wavelength_px: grain,
        sigma_px: grain,
        ..GaborConfig::default()
    })
}
