//! Scalar diffraction from the illuminated mask to the detector window.

mod challenge;
mod fast;
mod image;
mod raster;

use std::f64::consts::PI;

use num_complex::Complex64;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::digest::Digest64;
use crate::error::{Error, Result};
use crate::fft;
use crate::packing::PufMask;
use crate::rng::{domain, stream};

pub use challenge::{flip_pixels, generate_challenge, read_challenges, write_challenges, Challenge};
pub use image::read_raw;
pub use raster::{illuminate, rasterize, Transmission};

/// Optical setup. Lengths carry their unit in the field name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OpticsConfig {
    pub wavelength_nm: f64,
    pub z_mm: f64,
    pub pitch_nm: f64,
    /// Grid cells per side.
    pub grid: usize,
    /// Plane-wave amplitude.
    pub amplitude: f64,
    /// Detector pixels per side.
    pub window: usize,
    /// Window center relative to the grid center, in grid cells.
    /// `None` means `(W·B, W·B)`.
    pub offset: Option<(i64, i64)>,
    /// Grid cells per detector pixel along each axis.
    pub binning: usize,
}

impl Default for OpticsConfig {
    fn default() -> Self {
        Self {
            wavelength_nm: 633.0,
            z_mm: 5.0,
            pitch_nm: 50.0,
            grid: 2048,
            amplitude: 1.0,
            window: 250,
            offset: None,
            binning: 2,
        }
    }
}

impl OpticsConfig {
    /// Desk-scale preset: 102.4 µm sample on a 2048² grid, with the
    /// propagation distance scaled to keep the Fresnel number of a 750 µm
    /// sample observed at 5 mm.
    pub fn desk() -> Self {
        let side_um = 102.4;
        let fresnel = 750.0f64.powi(2) / (0.633 * 5000.0);
        Self {
            z_mm: side_um * side_um / (0.633 * fresnel) * 1e-3,
            ..Self::default()
        }
    }

    pub fn side_um(&self) -> f64 {
        self.pitch_nm * self.grid as f64 * 1e-3
    }

    pub fn offset(&self) -> (i64, i64) {
        self.offset.unwrap_or_else(|| {
            let d = (self.window * self.binning) as i64;
            (d, d)
        })
    }

    /// Checks the parameter ranges and the window invariant
    /// `W·B + max(|dx|,|dy|) ≤ n_g/2`.
    pub fn validate(&self) -> Result<()> {
        let positive = |v: f64, name: &str| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} = {v} must be positive")))
            }
        };
        positive(self.wavelength_nm, "wavelength_nm")?;
        positive(self.pitch_nm, "pitch_nm")?;
        if !(self.z_mm.is_finite() && self.z_mm >= 0.0) {
            return Err(Error::InvalidParameter(format!("z_mm = {} must be >= 0", self.z_mm)));
        }
        if !self.amplitude.is_finite() {
            return Err(Error::InvalidParameter("amplitude must be finite".into()));
        }
        if self.grid == 0 || self.window == 0 || self.binning == 0 {
            return Err(Error::InvalidParameter("grid, window and binning must be >= 1".into()));
        }
        let (dx, dy) = self.offset();
        let reach = (self.window * self.binning) as i64 + dx.abs().max(dy.abs());
        if reach > (self.grid / 2) as i64 {
            return Err(Error::WindowOutOfBounds(format!(
                "W·B + max(|dx|,|dy|) = {reach} exceeds n_g/2 = {}",
                self.grid / 2
            )));
        }
        Ok(())
    }

    /// Grid must cover the mask exactly and resolve the holes (pitch ≤ r/2).
    pub fn check_mask(&self, mask: &PufMask) -> Result<()> {
        let side = self.side_um();
        if (side - mask.side_um).abs() > 1e-9 * mask.side_um.max(1.0) {
            return Err(Error::PitchMismatch {
                pitch_nm: self.pitch_nm,
                grid: self.grid,
                side_um: mask.side_um,
            });
        }
        if self.pitch_nm > mask.radius_nm / 2.0 {
            return Err(Error::InvalidParameter(format!(
                "pitch {} nm exceeds half the hole radius {} nm",
                self.pitch_nm, mask.radius_nm
            )));
        }
        Ok(())
    }

    pub fn check_challenge(&self, c: &Challenge) -> Result<()> {
        if c.m == 0 || self.grid % c.m != 0 {
            return Err(Error::DivisibilityError { grid: self.grid, m: c.m });
        }
        Ok(())
    }

    /// Stable fingerprint of every field that affects a response.
    pub fn fingerprint(&self) -> u64 {
        let (dx, dy) = self.offset();
        let mut d = Digest64::new();
        d.update(b"optics v1");
        for v in [self.wavelength_nm, self.z_mm, self.pitch_nm, self.amplitude] {
            d.update(&v.to_bits().to_le_bytes());
        }
        for v in [self.grid as u64, self.window as u64, self.binning as u64] {
            d.update(&v.to_le_bytes());
        }
        d.update(&dx.to_le_bytes()).update(&dy.to_le_bytes());
        d.finish()
    }

    /// Band limit `1/(λ·sqrt(1+(2z/(n_g·pitch))²))` in µm⁻¹ for an `n`-cell grid.
    pub fn band_limit(&self, n: usize, pitch_nm: f64) -> f64 {
        let lambda = self.wavelength_nm * 1e-3;
        let extent = n as f64 * pitch_nm * 1e-3;
        let ratio = 2.0 * self.z_mm * 1e3 / extent;
        1.0 / (lambda * (1.0 + ratio * ratio).sqrt())
    }
}

/// Complex amplitudes on an `n×n` grid, row-major (`y` major).
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexField {
    pub n: usize,
    pub pitch_nm: f64,
    pub data: Vec<Complex64>,
}

impl ComplexField {
    pub fn zeros(n: usize, pitch_nm: f64) -> Self {
        Self {
            n,
            pitch_nm,
            data: vec![Complex64::default(); n * n],
        }
    }

    pub fn from_fn(n: usize, pitch_nm: f64, f: impl Fn(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for y in 0..n {
            for x in 0..n {
                data.push(f(x, y));
            }
        }
        Self { n, pitch_nm, data }
    }

    pub fn energy(&self) -> f64 {
        self.data.iter().map(|c| c.norm_sqr()).sum()
    }

    pub fn intensity(&self) -> Vec<f64> {
        self.data.iter().map(|c| c.norm_sqr()).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|c| c.re.is_finite() && c.im.is_finite())
    }
}

/// Provenance carried from the response into derived keys.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct ResponseMeta {
    pub mask_id: u64,
    pub challenge_seed: u64,
    pub config_hash: u64,
}

impl ResponseMeta {
    pub fn fingerprint(&self) -> u64 {
        let mut d = Digest64::new();
        d.update(&self.mask_id.to_le_bytes())
            .update(&self.challenge_seed.to_le_bytes())
            .update(&self.config_hash.to_le_bytes());
        d.finish()
    }
}

/// `W×W` detector intensities, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct SpeckleResponse {
    pub width: usize,
    pub data: Vec<f64>,
    pub meta: ResponseMeta,
}

impl SpeckleResponse {
    pub fn new(width: usize, data: Vec<f64>, meta: ResponseMeta) -> Result<Self> {
        if data.len() != width * width {
            return Err(Error::DimensionMismatch {
                expected: width * width,
                got: data.len(),
            });
        }
        if data.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidParameter("intensities must be finite and >= 0".into()));
        }
        Ok(Self { width, data, meta })
    }

    pub fn total(&self) -> f64 {
        self.data.iter().sum()
    }

    pub fn mean(&self) -> f64 {
        if self.data.is_empty() {
            0.0
        } else {
            self.total() / self.data.len() as f64
        }
    }

    /// Multiplies every intensity by `alpha`.
    pub fn scaled(&self, alpha: f64) -> Self {
        Self {
            data: self.data.iter().map(|v| v * alpha).collect(),
            ..self.clone()
        }
    }

    /// Circular shift: output pixel `(x, y)` takes input `(x - dx, y - dy)`.
    pub fn rolled(&self, dx: i64, dy: i64) -> Self {
        let w = self.width as i64;
        let mut data = vec![0.0; self.data.len()];
        for y in 0..w {
            let sy = (y - dy).rem_euclid(w);
            for x in 0..w {
                let sx = (x - dx).rem_euclid(w);
                data[(y * w + x) as usize] = self.data[(sy * w + sx) as usize];
            }
        }
        Self { data, ..self.clone() }
    }
}

impl PufMask {
    /// Content fingerprint of the full mask record.
    pub fn fingerprint(&self) -> u64 {
        let mut d = Digest64::new();
        d.update(b"mask v1")
            .update(&self.side_um.to_bits().to_le_bytes())
            .update(&self.radius_nm.to_bits().to_le_bytes())
            .update(&[u8::from(self.periodic)])
            .update(&self.seed.to_le_bytes())
            .update(self.tag.to_string().as_bytes());
        for p in &self.centers {
            d.update(&p.x.to_bits().to_le_bytes()).update(&p.y.to_bits().to_le_bytes());
        }
        d.finish()
    }
}

/// Signed spatial frequencies (µm⁻¹) of an `n`-point transform at `pitch_um`.
fn frequencies(n: usize, pitch_um: f64) -> Vec<f64> {
    let df = 1.0 / (n as f64 * pitch_um);
    (0..n).map(|k| fft::signed_index(k, n) as f64 * df).collect()
}

/// Transfer function on the `(fx, fy)` pair, zero outside the band or when evanescent.
pub(crate) struct Transfer {
    lambda_um: f64,
    z_um: f64,
    pub(crate) freqs: Vec<f64>,
    pub(crate) in_band: Vec<bool>,
}

impl Transfer {
    pub(crate) fn new(cfg: &OpticsConfig, n: usize, pitch_nm: f64) -> Self {
        let freqs = frequencies(n, pitch_nm * 1e-3);
        let fmax = cfg.band_limit(n, pitch_nm);
        let in_band = freqs.iter().map(|f| f.abs() <= fmax).collect();
        Self {
            lambda_um: cfg.wavelength_nm * 1e-3,
            z_um: cfg.z_mm * 1e3,
            freqs,
            in_band,
        }
    }

    pub(crate) fn at(&self, kx: usize, ky: usize) -> Complex64 {
        if !(self.in_band[kx] && self.in_band[ky]) {
            return Complex64::default();
        }
        let inv = 1.0 / self.lambda_um;
        let arg = inv * inv - self.freqs[kx].powi(2) - self.freqs[ky].powi(2);
        if arg <= 0.0 {
            return Complex64::default();
        }
        Complex64::from_polar(1.0, 2.0 * PI * self.z_um * arg.sqrt())
    }

    pub(crate) fn band(&self) -> Vec<usize> {
        (0..self.in_band.len()).filter(|&k| self.in_band[k]).collect()
    }
}

/// Band-limited angular-spectrum propagation over `cfg.z_mm`.
///
/// The field is treated as one period of a periodic field. `z = 0` returns
/// the input unchanged.
pub fn propagate(f: &ComplexField, cfg: &OpticsConfig) -> ComplexField {
    if cfg.z_mm == 0.0 || f.n == 0 {
        return f.clone();
    }
    let n = f.n;
    let h = Transfer::new(cfg, n, f.pitch_nm);
    let mut a = f.data.clone();
    let mut t = vec![Complex64::default(); n * n];
    fft::rows(&mut a, n, false);
    fft::transpose(&a, &mut t, n);
    fft::rows(&mut t, n, false);
    // t is indexed [kx][ky]
    use rayon::prelude::*;
    t.par_chunks_mut(n).enumerate().for_each(|(kx, row)| {
        for (ky, v) in row.iter_mut().enumerate() {
            *v *= h.at(kx, ky);
        }
    });
    fft::rows(&mut t, n, true);
    fft::transpose(&t, &mut a, n);
    fft::rows(&mut a, n, true);
    let norm = 1.0 / (n * n) as f64;
    for v in &mut a {
        *v *= norm;
    }
    ComplexField {
        n,
        pitch_nm: f.pitch_nm,
        data: a,
    }
}

/// Top-left corner of the detector window in grid cells.
pub(crate) fn window_origin(cfg: &OpticsConfig, n: usize) -> Result<(usize, usize)> {
    let span = (cfg.window * cfg.binning) as i64;
    let (dx, dy) = cfg.offset();
    let half = (n / 2) as i64;
    let x0 = half + dx - span / 2;
    let y0 = half + dy - span / 2;
    for (o, axis) in [(x0, "x"), (y0, "y")] {
        if o < 0 || o + span > n as i64 {
            return Err(Error::WindowOutOfBounds(format!(
                "{axis} range [{o}, {}) outside grid of {n}",
                o + span
            )));
        }
    }
    Ok((x0 as usize, y0 as usize))
}

/// Integrates `|amplitude|²` over `B×B` blocks of a window centered at
/// grid center + offset.
pub fn record(f: &ComplexField, cfg: &OpticsConfig) -> Result<SpeckleResponse> {
    let (x0, y0) = window_origin(cfg, f.n)?;
    let (w, b) = (cfg.window, cfg.binning);
    let mut data = vec![0.0; w * w];
    for py in 0..w {
        for sy in 0..b {
            let row = &f.data[(y0 + py * b + sy) * f.n + x0..][..w * b];
            for (px, block) in row.chunks_exact(b).enumerate() {
                data[py * w + px] += block.iter().map(|c| c.norm_sqr()).sum::<f64>();
            }
        }
    }
    Ok(SpeckleResponse {
        width: w,
        data,
        meta: ResponseMeta {
            config_hash: cfg.fingerprint(),
            ..Default::default()
        },
    })
}

/// `record(propagate(illuminate(challenge, rasterize(mask))))`.
///
/// Uses a pruned transform that only evaluates the in-band spectrum and the
/// window rows; results agree with the composed reference to rounding.
pub fn simulate_response(mask: &PufMask, challenge: &Challenge, cfg: &OpticsConfig) -> Result<SpeckleResponse> {
    let t = rasterize(mask, cfg)?;
    simulate_with_transmission(&t, challenge, cfg, mask.fingerprint())
}

/// As [`simulate_response`] with a precomputed transmission grid, so a batch
/// of challenges can share one rasterization.
pub fn simulate_with_transmission(
    t: &Transmission,
    challenge: &Challenge,
    cfg: &OpticsConfig,
    mask_id: u64,
) -> Result<SpeckleResponse> {
    cfg.validate()?;
    let field = illuminate(challenge, t, cfg)?;
    let mut r = if cfg.z_mm == 0.0 {
        record(&field, cfg)?
    } else {
        fast::propagate_and_record(&field, cfg)?
    };
    r.meta = ResponseMeta {
        mask_id,
        challenge_seed: challenge.seed,
        config_hash: cfg.fingerprint(),
    };
    Ok(r)
}

/// Reference composition through the full propagator.
pub fn simulate_response_reference(
    mask: &PufMask,
    challenge: &Challenge,
    cfg: &OpticsConfig,
) -> Result<SpeckleResponse> {
    cfg.validate()?;
    let t = rasterize(mask, cfg)?;
    let field = illuminate(challenge, &t, cfg)?;
    let mut r = record(&propagate(&field, cfg), cfg)?;
    r.meta = ResponseMeta {
        mask_id: mask.fingerprint(),
        challenge_seed: challenge.seed,
        config_hash: cfg.fingerprint(),
    };
    Ok(r)
}

/// Additive Gaussian detector noise with standard deviation
/// `rel_sigma × mean intensity`, clamped at zero.
pub fn add_detector_noise(r: &SpeckleResponse, rel_sigma: f64, seed: u64) -> Result<SpeckleResponse> {
    if !(rel_sigma.is_finite() && rel_sigma >= 0.0) {
        return Err(Error::InvalidParameter(format!("noise sigma {rel_sigma} must be >= 0")));
    }
    if rel_sigma == 0.0 {
        return Ok(r.clone());
    }
    let sigma = rel_sigma * r.mean();
    if sigma == 0.0 {
        return Ok(r.clone());
    }
    let normal = Normal::new(0.0, sigma).expect("finite sigma");
    let mut rng = stream(seed, domain::NOISE, 0);
    let data = r.data.iter().map(|v| (v + normal.sample(&mut rng)).max(0.0)).collect();
    Ok(SpeckleResponse { data, ..r.clone() })
}

#[cfg(test)]
mod tests;
