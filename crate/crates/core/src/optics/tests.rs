use super::*;
use crate::packing::{generate_rsa, GeneratorTag, Point};
use proptest::prelude::*;

fn small_cfg(n: usize) -> OpticsConfig {
    OpticsConfig {
        grid: n,
        pitch_nm: 50.0,
        window: n / 8,
        binning: 2,
        z_mm: 0.02,
        ..OpticsConfig::default()
    }
}

fn single_disc(side: f64, x: f64, y: f64) -> PufMask {
    PufMask {
        side_um: side,
        radius_nm: 200.0,
        centers: vec![Point::new(x, y)],
        periodic: true,
        seed: 0,
        tag: GeneratorTag::Derived,
    }
}

// coarse grid with a wide propagating band for the field-level properties
fn prop_cfg() -> OpticsConfig {
    OpticsConfig {
        grid: 32,
        pitch_nm: 200.0,
        window: 4,
        binning: 2,
        z_mm: 0.002,
        ..OpticsConfig::default()
    }
}

fn random_field(n: usize, seed: u64) -> ComplexField {
    use rand::Rng;
    let mut rng = stream(seed, 0xfeed, 0);
    ComplexField {
        n,
        pitch_nm: 200.0,
        data: (0..n * n)
            .map(|_| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5))
            .collect(),
    }
}

#[test]
fn empty_mask_rasterizes_dark() {
    let cfg = small_cfg(128);
    let m = PufMask {
        centers: vec![],
        ..single_disc(6.4, 0.0, 0.0)
    };
    assert_eq!(rasterize(&m, &cfg).unwrap().open_fraction(), 0.0);
}

#[test]
fn centered_disc_cell_count() {
    let cfg = small_cfg(128);
    let m = single_disc(6.4, 3.2, 3.2);
    let t = rasterize(&m, &cfg).unwrap();
    let got: usize = t.cells.iter().map(|&c| c as usize).sum();
    // exhaustive point-in-circle count over every cell center
    let mut want = 0;
    for iy in 0..128 {
        for ix in 0..128 {
            let (x, y) = ((ix as f64 + 0.5) * 0.05, (iy as f64 + 0.5) * 0.05);
            if (x - 3.2).powi(2) + (y - 3.2).powi(2) <= 0.04 {
                want += 1;
            }
        }
    }
    assert_eq!(got, want);
    let ideal = PI * 16.0;
    assert!((got as f64 - ideal).abs() <= 0.15 * ideal, "{got} cells");
}

#[test]
fn disc_on_corner_wraps_when_periodic() {
    let cfg = small_cfg(128);
    let m = single_disc(6.4, 0.0, 0.0);
    let t = rasterize(&m, &cfg).unwrap();
    let open: usize = t.cells.iter().map(|&c| c as usize).sum();
    let interior = rasterize(&single_disc(6.4, 3.2, 3.2), &cfg).unwrap();
    assert_eq!(open, interior.cells.iter().map(|&c| c as usize).sum::<usize>());
    assert_eq!(t.cells[0], 1);
    assert_eq!(t.cells[127 * 128 + 127], 1);
    let open_mask = PufMask {
        periodic: false,
        ..m
    };
    let clipped = rasterize(&open_mask, &cfg).unwrap();
    assert_eq!(clipped.cells[127 * 128 + 127], 0);
    assert!(clipped.cells[0] == 1);
}

#[test]
fn half_packed_mask_opens_half_the_cells() {
    let cfg = small_cfg(512);
    let m = generate_rsa(25.6, 200.0, 0.5, 2, true).unwrap();
    let frac = rasterize(&m, &cfg).unwrap().open_fraction();
    assert!((frac - 0.5).abs() <= 0.02, "{frac}");
}

#[test]
fn pitch_must_match_side() {
    let cfg = small_cfg(128);
    let m = single_disc(10.0, 1.0, 1.0);
    assert!(matches!(rasterize(&m, &cfg), Err(Error::PitchMismatch { .. })));
    let coarse = OpticsConfig {
        pitch_nm: 200.0,
        grid: 32,
        ..cfg
    };
    assert!(rasterize(&single_disc(6.4, 1.0, 1.0), &coarse).is_err());
}

#[test]
fn illumination_extremes() {
    let cfg = small_cfg(128);
    let m = generate_rsa(6.4, 200.0, 0.3, 1, true).unwrap();
    let t = rasterize(&m, &cfg).unwrap();
    let off = Challenge::from_bits(4, vec![false; 16], 0).unwrap();
    assert_eq!(illuminate(&off, &t, &cfg).unwrap().energy(), 0.0);
    let cfg2 = OpticsConfig { amplitude: 2.0, ..cfg.clone() };
    let on = Challenge::from_bits(4, vec![true; 16], 0).unwrap();
    let f = illuminate(&on, &t, &cfg2).unwrap();
    for (a, &b) in f.data.iter().zip(&t.cells) {
        assert_eq!(*a, Complex64::new(2.0 * b as f64, 0.0));
    }
    let odd = Challenge::from_bits(3, vec![true; 9], 0).unwrap();
    assert!(matches!(illuminate(&odd, &t, &cfg), Err(Error::DivisibilityError { .. })));
}

#[test]
fn balanced_illumination_covers_half_the_holes() {
    let cfg = small_cfg(512);
    let m = generate_rsa(25.6, 200.0, 0.4, 3, true).unwrap();
    let t = rasterize(&m, &cfg).unwrap();
    let fp = t.open_fraction();
    for seed in 0..5 {
        let c = generate_challenge(16, seed).unwrap();
        let f = illuminate(&c, &t, &cfg).unwrap();
        let lit = f.data.iter().filter(|v| v.re != 0.0).count() as f64 / (512.0 * 512.0);
        assert!((lit - 0.5 * fp).abs() <= 0.03, "{lit} vs {fp}");
    }
}

#[test]
fn zero_distance_is_identity() {
    let f = random_field(32, 1);
    let cfg = OpticsConfig { z_mm: 0.0, ..prop_cfg() };
    assert_eq!(propagate(&f, &cfg), f);
}

#[test]
fn band_interior_field_keeps_its_energy() {
    // a single in-band plane-wave component
    let cfg = prop_cfg();
    let n = 32;
    let f = ComplexField::from_fn(n, 200.0, |x, y| {
        Complex64::from_polar(1.0, 2.0 * PI * (3.0 * x as f64 - 2.0 * y as f64) / n as f64)
    });
    let out = propagate(&f, &cfg);
    assert!((out.energy() - f.energy()).abs() <= 1e-9 * f.energy());
}

#[test]
fn plane_wave_stays_uniform() {
    let n = 64;
    let f = ComplexField::from_fn(n, 50.0, |_, _| Complex64::new(1.0, 0.0));
    let out = propagate(&f, &small_cfg(n));
    for v in &out.data {
        assert!((v.norm_sqr() - 1.0).abs() < 1e-12);
    }
}

#[test]
fn gaussian_beam_radius_follows_analytic_law() {
    // w0 = 5 µm, z = 5 mm, 1024 cells of 1.5625 µm
    let n = 1024;
    let pitch_nm = 1562.5;
    let w0 = 5.0;
    let c = n as f64 / 2.0;
    let f = ComplexField::from_fn(n, pitch_nm, |x, y| {
        let dx = (x as f64 - c) * pitch_nm * 1e-3;
        let dy = (y as f64 - c) * pitch_nm * 1e-3;
        Complex64::new((-(dx * dx + dy * dy) / (w0 * w0)).exp(), 0.0)
    });
    let cfg = OpticsConfig {
        z_mm: 5.0,
        pitch_nm,
        grid: n,
        ..OpticsConfig::default()
    };
    let out = propagate(&f, &cfg);
    // second moment of the intensity gives w²/4 per axis
    let mut m2 = 0.0;
    let mut tot = 0.0;
    for y in 0..n {
        for x in 0..n {
            let i = out.data[y * n + x].norm_sqr();
            let dx = (x as f64 - c) * pitch_nm * 1e-3;
            m2 += i * dx * dx;
            tot += i;
        }
    }
    let w = 2.0 * (m2 / tot).sqrt();
    let zr = PI * w0 * w0 / 0.633;
    let want = w0 * (1.0 + (5000.0 / zr).powi(2)).sqrt();
    assert!((w - want).abs() <= 0.02 * want, "w = {w}, expected {want}");
}

#[test]
fn record_zero_and_full_window() {
    let n = 32;
    let cfg = OpticsConfig {
        grid: n,
        window: n,
        binning: 1,
        offset: Some((0, 0)),
        ..small_cfg(n)
    };
    let zero = ComplexField::zeros(n, 50.0);
    assert!(record(&zero, &cfg).unwrap().data.iter().all(|&v| v == 0.0));
    let f = random_field(n, 2);
    let r = record(&f, &cfg).unwrap();
    assert_eq!(r.data, f.intensity());
}

#[test]
fn window_energy_bounded_by_field_energy() {
    let f = random_field(64, 3);
    let cfg = OpticsConfig { grid: 64, ..prop_cfg() };
    let r = record(&f, &cfg).unwrap();
    assert!(r.total() <= f.energy());
    assert!(r.total() > 0.0);
}

#[test]
fn window_must_fit() {
    let cfg = OpticsConfig {
        window: 40,
        offset: Some((20, 0)),
        ..OpticsConfig { grid: 64, ..prop_cfg() }
    };
    assert!(matches!(record(&random_field(64, 1), &cfg), Err(Error::WindowOutOfBounds(_))));
    assert!(matches!(cfg.validate(), Err(Error::WindowOutOfBounds(_))));
    assert!(small_cfg(64).validate().is_ok());
    assert!(OpticsConfig::default().validate().is_ok());
}

#[test]
fn desk_preset_matches_fresnel_scaling() {
    let d = OpticsConfig::desk();
    assert!((d.z_mm * 1e3 - 93.2).abs() < 0.1, "{}", d.z_mm);
    assert!((d.side_um() - 102.4).abs() < 1e-9);
    assert_eq!(d.offset(), (500, 500));
    assert!(d.validate().is_ok());
}

#[test]
fn config_from_toml() {
    let cfg: OpticsConfig = toml::from_str("z_mm = 0.1\noffset = [10, -4]\n").unwrap();
    assert_eq!(cfg.offset(), (10, -4));
    assert_eq!(cfg.grid, 2048);
    assert!(toml::from_str::<OpticsConfig>("bogus = 1").is_err());
    assert_ne!(cfg.fingerprint(), OpticsConfig::default().fingerprint());
}

fn test_mask(n: usize) -> (PufMask, OpticsConfig) {
    let cfg = small_cfg(n);
    let m = generate_rsa(cfg.side_um(), 200.0, 0.4, 11, true).unwrap();
    (m, cfg)
}

#[test]
fn fast_path_matches_reference() {
    let (m, cfg) = test_mask(256);
    for (seed, z) in [(1, 0.02), (2, 0.005), (3, 0.05)] {
        let cfg = OpticsConfig { z_mm: z, ..cfg.clone() };
        let c = generate_challenge(8, seed).unwrap();
        let fast = simulate_response(&m, &c, &cfg).unwrap();
        let slow = simulate_response_reference(&m, &c, &cfg).unwrap();
        assert_eq!(fast.meta, slow.meta);
        let scale = slow.data.iter().cloned().fold(0.0, f64::max);
        for (a, b) in fast.data.iter().zip(&slow.data) {
            assert!((a - b).abs() <= 1e-10 * scale, "{a} vs {b}");
        }
    }
}

#[test]
fn simulation_is_deterministic() {
    let (m, cfg) = test_mask(256);
    let c = generate_challenge(16, 4).unwrap();
    let a = simulate_response(&m, &c, &cfg).unwrap();
    let b = simulate_response(&m, &c, &cfg).unwrap();
    assert_eq!(a, b);
    assert!(a.data.iter().all(|&v| v >= 0.0));
    assert_eq!(a.meta.challenge_seed, 4);
}

#[test]
fn different_challenges_give_different_speckle() {
    let (m, cfg) = test_mask(256);
    let a = simulate_response(&m, &generate_challenge(16, 1).unwrap(), &cfg).unwrap();
    let b = simulate_response(&m, &generate_challenge(16, 2).unwrap(), &cfg).unwrap();
    assert_ne!(a.data, b.data);
}

#[test]
fn noise_is_seeded_and_nonnegative() {
    let (m, cfg) = test_mask(256);
    let r = simulate_response(&m, &generate_challenge(16, 1).unwrap(), &cfg).unwrap();
    assert_eq!(add_detector_noise(&r, 0.0, 1).unwrap(), r);
    let a = add_detector_noise(&r, 0.3, 1).unwrap();
    assert_eq!(a, add_detector_noise(&r, 0.3, 1).unwrap());
    assert_ne!(a.data, add_detector_noise(&r, 0.3, 2).unwrap().data);
    assert!(a.data.iter().all(|&v| v >= 0.0));
    assert!(add_detector_noise(&r, -1.0, 1).is_err());
}

#[test]
fn raw_dump_round_trips_bit_exactly() {
    let (m, cfg) = test_mask(256);
    let r = simulate_response(&m, &generate_challenge(16, 1).unwrap(), &cfg).unwrap();
    let mut buf = Vec::new();
    r.write_raw(&mut buf).unwrap();
    let back = read_raw(buf.as_slice()).unwrap();
    assert_eq!(back, r);
}

#[test]
fn pgm_layout() {
    let r = SpeckleResponse::new(2, vec![0.0, 1.0, 2.0, 4.0], ResponseMeta::default()).unwrap();
    let mut buf = Vec::new();
    r.write_pgm(&mut buf).unwrap();
    let head = b"P5\n# scale=1.638375e4\n2 2\n65535\n";
    assert_eq!(&buf[..head.len()], head);
    let px: Vec<u16> = buf[head.len()..]
        .chunks(2)
        .map(|b| u16::from_be_bytes([b[0], b[1]]))
        .collect();
    assert_eq!(px, vec![0, 16384, 32768, 65535]);
}

#[test]
fn response_rejects_bad_data() {
    assert!(SpeckleResponse::new(2, vec![0.0; 3], ResponseMeta::default()).is_err());
    assert!(SpeckleResponse::new(1, vec![-1.0], ResponseMeta::default()).is_err());
}

#[test]
fn rolled_moves_pixels() {
    let r = SpeckleResponse::new(3, (0..9).map(f64::from).collect(), ResponseMeta::default()).unwrap();
    let s = r.rolled(1, 0);
    assert_eq!(s.data[1], r.data[0]);
    assert_eq!(s.data[0], r.data[2]);
    assert_eq!(s.rolled(-1, 0), r);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn propagation_never_gains_energy(seed in any::<u64>(), z_um in 0.0f64..200.0) {
        let f = random_field(32, seed);
        let cfg = OpticsConfig { z_mm: z_um * 1e-3, ..prop_cfg() };
        let e_in = f.energy();
        prop_assert!(propagate(&f, &cfg).energy() <= e_in * (1.0 + 1e-12));
    }

    #[test]
    fn propagation_is_linear(s1 in any::<u64>(), s2 in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let cfg = prop_cfg();
        let f1 = random_field(32, s1);
        let f2 = random_field(32, s2);
        let ca = Complex64::new(a, 0.5);
        let cb = Complex64::new(0.25, b);
        let mix = ComplexField {
            data: f1.data.iter().zip(&f2.data).map(|(x, y)| ca * x + cb * y).collect(),
            ..f1.clone()
        };
        let lhs = propagate(&mix, &cfg);
        let p1 = propagate(&f1, &cfg);
        let p2 = propagate(&f2, &cfg);
        let mut err = 0.0;
        let mut norm = 0.0;
        for ((l, x), y) in lhs.data.iter().zip(&p1.data).zip(&p2.data) {
            let r = ca * x + cb * y;
            err += (l - r).norm_sqr();
            norm += r.norm_sqr();
        }
        prop_assert!((err / norm).sqrt() <= 1e-10);
    }

    #[test]
    fn circular_shift_commutes_with_propagation(seed in any::<u64>(), kx in 0usize..32, ky in 0usize..32) {
        let n = 32;
        let cfg = prop_cfg();
        let f = random_field(n, seed);
        let shifted = ComplexField::from_fn(n, 200.0, |x, y| f.data[((y + n - ky) % n) * n + (x + n - kx) % n]);
        let a = propagate(&f, &cfg).intensity();
        let b = propagate(&shifted, &cfg).intensity();
        let scale = a.iter().cloned().fold(0.0, f64::max);
        for y in 0..n {
            for x in 0..n {
                let want = a[((y + n - ky) % n) * n + (x + n - kx) % n];
                prop_assert!((b[y * n + x] - want).abs() <= 1e-10 * scale);
            }
        }
    }
}
