//! Square 2D FFTs on row-major buffers, built from rustfft row transforms.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rayon::prelude::*;
use rustfft::{Fft, FftPlanner};

type Plan = Arc<dyn Fft<f64>>;

fn planner() -> &'static Mutex<(FftPlanner<f64>, HashMap<(usize, bool), Plan>)> {
    static P: OnceLock<Mutex<(FftPlanner<f64>, HashMap<(usize, bool), Plan>)>> = OnceLock::new();
    P.get_or_init(|| Mutex::new((FftPlanner::new(), HashMap::new())))
}

pub(crate) fn plan(n: usize, inverse: bool) -> Plan {
    let mut guard = planner().lock().expect("fft planner poisoned");
    let (planner, cache) = &mut *guard;
    cache
        .entry((n, inverse))
        .or_insert_with(|| {
            if inverse {
                planner.plan_fft_inverse(n)
            } else {
                planner.plan_fft_forward(n)
            }
        })
        .clone()
}

/// Transforms every length-`n` row of `data` in place (unnormalized).
pub(crate) fn rows(data: &mut [Complex64], n: usize, inverse: bool) {
    if data.is_empty() {
        return;
    }
    let fft = plan(n, inverse);
    let scratch_len = fft.get_inplace_scratch_len();
    // batches of rows keep per-task overhead low without affecting results
    let batch = (16384 / n).max(1) * n;
    data.par_chunks_mut(batch).for_each_init(
        || vec![Complex64::default(); scratch_len],
        |scratch, chunk| fft.process_with_scratch(chunk, scratch),
    );
}

/// Out-of-place transpose of an `n×n` matrix, tiled for cache reuse.
pub(crate) fn transpose(src: &[Complex64], dst: &mut [Complex64], n: usize) {
    const T: usize = 32;
    dst.par_chunks_mut(T * n).enumerate().for_each(|(bj, band)| {
        let j0 = bj * T;
        let jn = band.len() / n;
        for i0 in (0..n).step_by(T) {
            for j in 0..jn {
                let row = &mut band[j * n..(j + 1) * n];
                for i in i0..(i0 + T).min(n) {
                    row[i] = src[i * n + j0 + j];
                }
            }
        }
    });
}

/// Unnormalized 2D transform of an `n×n` row-major buffer.
pub fn fft2(data: &mut [Complex64], n: usize, inverse: bool) {
    assert_eq!(data.len(), n * n, "buffer is not n×n");
    let mut tmp = vec![Complex64::default(); n * n];
    rows(data, n, inverse);
    transpose(data, &mut tmp, n);
    rows(&mut tmp, n, inverse);
    transpose(&tmp, data, n);
}

/// Signed frequency index of bin `k` for an `n`-point transform.
pub(crate) fn signed_index(k: usize, n: usize) -> i64 {
    if k < n.div_ceil(2) {
        k as i64
    } else {
        k as i64 - n as i64
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn naive_dft2(a: &[Complex64], n: usize) -> Vec<Complex64> {
        let mut out = vec![Complex64::default(); n * n];
        for ky in 0..n {
            for kx in 0..n {
                let mut acc = Complex64::default();
                for y in 0..n {
                    for x in 0..n {
                        let ph = -2.0 * PI * ((kx * x + ky * y) % n) as f64 / n as f64;
                        acc += a[y * n + x] * Complex64::from_polar(1.0, ph);
                    }
                }
                out[ky * n + kx] = acc;
            }
        }
        out
    }

    #[test]
    fn matches_naive_dft() {
        for n in [1usize, 2, 5, 8, 12] {
            let x: Vec<Complex64> = (0..n * n)
                .map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos()))
                .collect();
            let mut y = x.clone();
            fft2(&mut y, n, false);
            let want = naive_dft2(&x, n);
            for (a, b) in y.iter().zip(&want) {
                assert!((a - b).norm() < 1e-9 * (n * n) as f64);
            }
        }
    }

    #[test]
    fn round_trip_scales_by_n_squared() {
        let n = 16;
        let x: Vec<Complex64> = (0..n * n).map(|i| Complex64::new(i as f64, -(i as f64) / 3.0)).collect();
        let mut y = x.clone();
        fft2(&mut y, n, false);
        fft2(&mut y, n, true);
        for (a, b) in y.iter().zip(&x) {
            assert!((a / (n * n) as f64 - b).norm() < 1e-10);
        }
    }

    #[test]
    fn transpose_is_involution() {
        let n = 70;
        let x: Vec<Complex64> = (0..n * n).map(|i| Complex64::new(i as f64, 0.0)).collect();
        let mut t = vec![Complex64::default(); n * n];
        transpose(&x, &mut t, n);
        assert_eq!(t[3 * n + 5], x[5 * n + 3]);
        let mut back = vec![Complex64::default(); n * n];
        transpose(&t, &mut back, n);
        assert_eq!(back, x);
    }

    #[test]
    fn signed_indices() {
        let got: Vec<i64> = (0..5).map(|k| signed_index(k, 5)).collect();
        assert_eq!(got, vec![0, 1, 2, -2, -1]);
        let got: Vec<i64> = (0..4).map(|k| signed_index(k, 4)).collect();
        assert_eq!(got, vec![0, 1, -2, -1]);
    }
}
