//! Random disc layouts for the perforated membrane and their perturbations.
//!
//! Lengths follow the lab convention used throughout the toolkit: sample side
//! and disc centers in micrometers, disc radius in nanometers.

mod cells;
mod io;
mod ls;
mod perturb;
mod rsa;

use std::f64::consts::PI;
use std::fmt;

use crate::error::{Error, Result};

pub use cells::{min_pair_distance, overlapping_pairs};
pub use ls::{generate_ls, generate_ls_with, LsOptions};
pub use perturb::{perturb, PerturbationKind, PerturbationSpec};
pub use rsa::{generate_rsa, generate_rsa_with, RsaOptions, RSA_JAMMING_FRACTION};

/// Largest packing fraction accepted by the LS generator.
pub const LS_MAX_FRACTION: f64 = 0.80;

/// Above this fraction `regenerate_radius` switches from RSA to LS.
pub const RSA_LS_SPLIT: f64 = 0.5;

/// Disc center in micrometers.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GeneratorTag {
    Rsa,
    Ls,
    Derived,
}

impl fmt::Display for GeneratorTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GeneratorTag::Rsa => "RSA",
            GeneratorTag::Ls => "LS",
            GeneratorTag::Derived => "derived",
        })
    }
}

impl std::str::FromStr for GeneratorTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "RSA" => Ok(GeneratorTag::Rsa),
            "LS" => Ok(GeneratorTag::Ls),
            "derived" => Ok(GeneratorTag::Derived),
            other => Err(Error::InvalidParameter(format!("unknown generator tag {other:?}"))),
        }
    }
}

/// The physical token: equal discs (holes) on a square sample.
#[derive(Debug, Clone, PartialEq)]
pub struct PufMask {
    /// Sample side L in micrometers.
    pub side_um: f64,
    /// Hole radius in nanometers.
    pub radius_nm: f64,
    /// Disc centers in micrometers, each in `[0, L)`.
    pub centers: Vec<Point>,
    pub periodic: bool,
    pub seed: u64,
    pub tag: GeneratorTag,
}

impl PufMask {
    pub fn radius_um(&self) -> f64 {
        self.radius_nm * 1e-3
    }

    pub fn len(&self) -> usize {
        self.centers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.centers.is_empty()
    }

    /// `|centers|·πr²/L²`; overlaps in derived masks are counted twice.
    pub fn packing_fraction(&self) -> f64 {
        packing_fraction(self)
    }

    /// Squared distance under the mask's metric (minimum image when periodic).
    pub fn distance_sq(&self, a: Point, b: Point) -> f64 {
        let (dx, dy) = self.delta(a, b);
        dx * dx + dy * dy
    }

    pub(crate) fn delta(&self, a: Point, b: Point) -> (f64, f64) {
        let mut dx = b.x - a.x;
        let mut dy = b.y - a.y;
        if self.periodic {
            let l = self.side_um;
            dx -= l * (dx / l).round();
            dy -= l * (dy / l).round();
        }
        (dx, dy)
    }

    /// True when no two discs are closer than `2r - tol_um`.
    pub fn is_non_overlapping(&self, tol_um: f64) -> bool {
        overlapping_pairs(self, tol_um) == 0
    }

    /// Every center lies in `[0, L)²`.
    pub fn centers_in_bounds(&self) -> bool {
        let l = self.side_um;
        self.centers
            .iter()
            .all(|p| (0.0..l).contains(&p.x) && (0.0..l).contains(&p.y))
    }
}

/// `|centers|·πr²/L²`.
pub fn packing_fraction(mask: &PufMask) -> f64 {
    let r = mask.radius_um();
    mask.centers.len() as f64 * PI * r * r / (mask.side_um * mask.side_um)
}

/// Number of discs of radius `radius_nm` needed for fraction `fp` on side `side_um`.
pub fn target_count(side_um: f64, radius_nm: f64, fp: f64) -> usize {
    let r = radius_nm * 1e-3;
    (fp * side_um * side_um / (PI * r * r)).round() as usize
}

/// Fresh packing at a new radius and the same target fraction.
///
/// Uses LS above [`RSA_LS_SPLIT`] and RSA otherwise; the result is periodic.
pub fn regenerate_radius(side_um: f64, fp: f64, radius_nm: f64, seed: u64) -> Result<PufMask> {
    if fp > RSA_LS_SPLIT {
        generate_ls(side_um, radius_nm, fp, seed)
    } else {
        generate_rsa(side_um, radius_nm, fp, seed, true)
    }
}

pub(crate) fn wrap(v: f64, l: f64) -> f64 {
    let w = v.rem_euclid(l);
    // rem_euclid can round up to exactly l for tiny negative inputs
    if w >= l {
        0.0
    } else {
        w
    }
}

pub(crate) fn check_geometry(side_um: f64, radius_nm: f64, fp: f64) -> Result<()> {
    if !(side_um.is_finite() && side_um > 0.0) {
        return Err(Error::InvalidParameter(format!("side {side_um} um must be positive")));
    }
    if !(radius_nm.is_finite() && radius_nm > 0.0) {
        return Err(Error::InvalidParameter(format!("radius {radius_nm} nm must be positive")));
    }
    if side_um <= 4.0 * radius_nm * 1e-3 {
        return Err(Error::InvalidParameter(format!(
            "side {side_um} um must exceed four radii ({radius_nm} nm)"
        )));
    }
    if !(fp.is_finite() && fp >= 0.0) {
        return Err(Error::InvalidParameter(format!("packing fraction {fp} must be >= 0")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mask(centers: Vec<Point>) -> PufMask {
        PufMask {
            side_um: 10.0,
            radius_nm: 200.0,
            centers,
            periodic: true,
            seed: 0,
            tag: GeneratorTag::Derived,
        }
    }

    #[test]
    fn empty_mask_has_zero_fraction() {
        assert_eq!(packing_fraction(&mask(vec![])), 0.0);
    }

    #[test]
    fn eighty_discs_fraction() {
        let m = mask(vec![Point::new(1.0, 1.0); 80]);
        assert!((packing_fraction(&m) - 0.100531).abs() < 1e-6);
    }

    #[test]
    fn regenerate_radius_counts_and_generator() {
        let l = 20.0;
        let small = regenerate_radius(l, 0.5, 150.0, 3).unwrap();
        assert_eq!(small.len(), (0.5 * l * l / (PI * 0.15 * 0.15)).round() as usize);
        assert_eq!(small.tag, GeneratorTag::Rsa);
        let large = regenerate_radius(l, 0.5, 400.0, 3).unwrap();
        assert!(large.len() < small.len());
        assert_eq!(cells::overlapping_pairs(&large, 1e-6), 0);
        assert_eq!(regenerate_radius(l, 0.6, 200.0, 3).unwrap().tag, GeneratorTag::Ls);
        let same = regenerate_radius(l, 0.4, 200.0, 3).unwrap();
        assert_eq!(same.len(), generate_rsa(l, 200.0, 0.4, 3, true).unwrap().len());
        assert!(small.periodic && large.periodic);
    }

    #[test]
    fn target_counts() {
        assert_eq!(target_count(10.0, 200.0, 0.1), 80);
        assert_eq!(target_count(10.0, 200.0, 0.6), 477);
        assert_eq!(target_count(10.0, 150.0, 0.5), 707);
        assert_eq!(target_count(10.0, 200.0, 0.0), 0);
    }

    #[test]
    fn periodic_metric_wraps() {
        let m = mask(vec![]);
        let d = m.distance_sq(Point::new(0.1, 5.0), Point::new(9.9, 5.0));
        assert!((d - 0.04).abs() < 1e-12);
        let open = PufMask { periodic: false, ..m };
        assert!((open.distance_sq(Point::new(0.1, 5.0), Point::new(9.9, 5.0)) - 96.04).abs() < 1e-9);
    }

    #[test]
    fn wrap_stays_in_range() {
        assert_eq!(wrap(-1e-18, 10.0), 0.0);
        assert_eq!(wrap(10.0, 10.0), 0.0);
        assert!((wrap(-0.5, 10.0) - 9.5).abs() < 1e-12);
    }

    #[test]
    fn tag_round_trip() {
        for t in [GeneratorTag::Rsa, GeneratorTag::Ls, GeneratorTag::Derived] {
            assert_eq!(t.to_string().parse::<GeneratorTag>().unwrap(), t);
        }
        assert!("rsa".parse::<GeneratorTag>().is_err());
    }
}
