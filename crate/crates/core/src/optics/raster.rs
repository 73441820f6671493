use num_complex::Complex64;

use super::{Challenge, ComplexField, OpticsConfig};
use crate::error::Result;
use crate::packing::PufMask;

/// Binary transmission grid: 1 inside a hole, 0 on the opaque membrane.
#[derive(Debug, Clone, PartialEq)]
pub struct Transmission {
    pub n: usize,
    pub pitch_nm: f64,
    pub cells: Vec<u8>,
}

impl Transmission {
    pub fn open_fraction(&self) -> f64 {
        if self.cells.is_empty() {
            return 0.0;
        }
        self.cells.iter().map(|&c| c as usize).sum::<usize>() as f64 / self.cells.len() as f64
    }
}

/// A cell is open iff its center lies in at least one disc.
pub fn rasterize(mask: &PufMask, cfg: &OpticsConfig) -> Result<Transmission> {
    cfg.check_mask(mask)?;
    let n = cfg.grid;
    let p = mask.side_um / n as f64;
    let r = mask.radius_um();
    let r2 = r * r;
    let mut cells = vec![0u8; n * n];
    let ni = n as i64;
    for c in &mask.centers {
        // cell i has center (i + 0.5)·p
        let lo_x = ((c.x - r) / p - 0.5).ceil() as i64;
        let hi_x = ((c.x + r) / p - 0.5).floor() as i64;
        let lo_y = ((c.y - r) / p - 0.5).ceil() as i64;
        let hi_y = ((c.y + r) / p - 0.5).floor() as i64;
        for iy in lo_y..=hi_y {
            let dy = (iy as f64 + 0.5) * p - c.y;
            let row = if mask.periodic {
                iy.rem_euclid(ni)
            } else if (0..ni).contains(&iy) {
                iy
            } else {
                continue;
            };
            for ix in lo_x..=hi_x {
                let dx = (ix as f64 + 0.5) * p - c.x;
                if dx * dx + dy * dy > r2 {
                    continue;
                }
                let col = if mask.periodic {
                    ix.rem_euclid(ni)
                } else if (0..ni).contains(&ix) {
                    ix
                } else {
                    continue;
                };
                cells[(row * ni + col) as usize] = 1;
            }
        }
    }
    Ok(Transmission {
        n,
        pitch_nm: cfg.pitch_nm,
        cells,
    })
}

/// `U · challenge(x) · t(x)` with the challenge upsampled by block replication.
pub fn illuminate(c: &Challenge, t: &Transmission, cfg: &OpticsConfig) -> Result<ComplexField> {
    let n = t.n;
    let probe = OpticsConfig { grid: n, ..cfg.clone() };
    probe.check_challenge(c)?;
    let block = n / c.m;
    let u = Complex64::new(cfg.amplitude, 0.0);
    let mut data = vec![Complex64::default(); n * n];
    for y in 0..n {
        let crow = y / block;
        let src = &t.cells[y * n..(y + 1) * n];
        let dst = &mut data[y * n..(y + 1) * n];
        for (x, (d, &s)) in dst.iter_mut().zip(src).enumerate() {
            if s != 0 && c.get(crow, x / block) {
                *d = u;
            }
        }
    }
    Ok(ComplexField {
        n,
        pitch_nm: t.pitch_nm,
        data,
    })
}
