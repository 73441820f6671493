//! Propagation restricted to what the detector window can see.
//!
//! After the band limit only a narrow set of frequency columns `kx` and rows
//! `ky` carry energy, and only the `W·B` window rows of the output are
//! integrated. The forward row pass is full; everything after it touches the
//! in-band columns and the window rows only.

use num_complex::Complex64;
use rayon::prelude::*;

use super::{window_origin, ComplexField, OpticsConfig, ResponseMeta, SpeckleResponse, Transfer};
use crate::error::Result;
use crate::fft;

pub(super) fn propagate_and_record(f: &ComplexField, cfg: &OpticsConfig) -> Result<SpeckleResponse> {
    let n = f.n;
    let (x0, y0) = window_origin(cfg, n)?;
    let (w, b) = (cfg.window, cfg.binning);
    let span = w * b;
    let h = Transfer::new(cfg, n, f.pitch_nm);
    let band = h.band();
    let nb = band.len();

    let mut a = f.data.clone();
    fft::rows(&mut a, n, false);

    // g[j] holds column band[j] as a length-n row along y
    let mut g = vec![Complex64::default(); nb * n];
    g.par_chunks_mut(n).zip(band.par_iter()).for_each(|(col, &kx)| {
        for (y, v) in col.iter_mut().enumerate() {
            *v = a[y * n + kx];
        }
    });
    drop(a);

    fft::rows(&mut g, n, false);
    g.par_chunks_mut(n).zip(band.par_iter()).for_each(|(col, &kx)| {
        for (ky, v) in col.iter_mut().enumerate() {
            *v *= h.at(kx, ky);
        }
    });
    fft::rows(&mut g, n, true);

    // assemble the window rows in (y, kx) layout, zero outside the band
    let mut rows = vec![Complex64::default(); span * n];
    rows.par_chunks_mut(n).enumerate().for_each(|(r, row)| {
        let y = y0 + r;
        for (j, &kx) in band.iter().enumerate() {
            row[kx] = g[j * n + y];
        }
    });
    drop(g);
    fft::rows(&mut rows, n, true);

    let norm = 1.0 / ((n * n) as f64 * (n * n) as f64);
    let mut data = vec![0.0; w * w];
    data.par_chunks_mut(w).enumerate().for_each(|(py, out)| {
        for sy in 0..b {
            let row = &rows[(py * b + sy) * n + x0..][..span];
            for (px, block) in row.chunks_exact(b).enumerate() {
                out[px] += block.iter().map(|c| c.norm_sqr()).sum::<f64>() * norm;
            }
        }
    });
    Ok(SpeckleResponse {
        width: w,
        data,
        meta: ResponseMeta {
            config_hash: cfg.fingerprint(),
            ..Default::default()
        },
    })
}
