use rand::Rng;

use super::cells::CellGrid;
use super::{check_geometry, target_count, GeneratorTag, Point, PufMask};
use crate::error::{Error, Result};
use crate::rng::{domain, stream};

/// Saturation coverage of random sequential adsorption of equal discs.
pub const RSA_JAMMING_FRACTION: f64 = 0.547;

#[derive(Debug, Clone, Copy)]
pub struct RsaOptions {
    /// Consecutive rejected insertions tolerated before giving up.
    pub max_consecutive_failures: u64,
}

impl Default for RsaOptions {
    fn default() -> Self {
        Self {
            max_consecutive_failures: 1_000_000,
        }
    }
}

/// Random sequential adsorption of `round(fp·L²/πr²)` equal discs.
pub fn generate_rsa(side_um: f64, radius_nm: f64, fp: f64, seed: u64, periodic: bool) -> Result<PufMask> {
    generate_rsa_with(side_um, radius_nm, fp, seed, periodic, RsaOptions::default())
}

pub fn generate_rsa_with(
    side_um: f64,
    radius_nm: f64,
    fp: f64,
    seed: u64,
    periodic: bool,
    opts: RsaOptions,
) -> Result<PufMask> {
    check_geometry(side_um, radius_nm, fp)?;
    let target = target_count(side_um, radius_nm, fp);
    if fp > RSA_JAMMING_FRACTION {
        return Err(Error::SaturationUnreachable {
            placed: 0,
            target,
            attempts: 0,
        });
    }

    let diameter = 2.0 * radius_nm * 1e-3;
    let d2 = diameter * diameter;
    let mut mask = PufMask {
        side_um,
        radius_nm,
        centers: Vec::with_capacity(target),
        periodic,
        seed,
        tag: GeneratorTag::Rsa,
    };
    let mut grid = CellGrid::new(side_um, diameter, periodic);

    while mask.centers.len() < target {
        // one stream per disc slot keeps each placement addressable by index
        let mut rng = stream(seed, domain::RSA, mask.centers.len() as u64);
        let mut failures = 0u64;
        loop {
            let p = Point::new(rng.gen::<f64>() * side_um, rng.gen::<f64>() * side_um);
            let (cx, cy) = grid.cell_of(p);
            let clear = grid.neighborhood(cx, cy).all(|cell| {
                grid.bucket(cell)
                    .iter()
                    .all(|&j| mask.distance_sq(p, mask.centers[j as usize]) >= d2)
            });
            if clear {
                grid.insert(p, mask.centers.len() as u32);
                mask.centers.push(p);
                break;
            }
            failures += 1;
            if failures >= opts.max_consecutive_failures {
                return Err(Error::SaturationUnreachable {
                    placed: mask.centers.len(),
                    target,
                    attempts: failures,
                });
            }
        }
    }
    Ok(mask)
}
