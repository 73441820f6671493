use std::fmt;

use rand::seq::index;
use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{wrap, GeneratorTag, Point, PufMask};
use crate::error::{Error, Result};
use crate::rng::{domain, stream};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PerturbationKind {
    /// Per-axis Gaussian displacement, magnitude = standard deviation in nm.
    Jitter,
    /// Delete a fraction of the discs.
    Remove,
    /// Delete a fraction, then re-insert as many at random positions.
    RemoveAdd,
    /// Rigid translation along x by `magnitude·L` (periodic masks only).
    Shift,
    /// Radius change in nm; see [`super::regenerate_radius`].
    Radius,
}

impl fmt::Display for PerturbationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PerturbationKind::Jitter => "jitter",
            PerturbationKind::Remove => "remove",
            PerturbationKind::RemoveAdd => "remove_add",
            PerturbationKind::Shift => "shift",
            PerturbationKind::Radius => "radius",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PerturbationSpec {
    pub kind: PerturbationKind,
    pub magnitude: f64,
    pub seed: u64,
}

impl PerturbationSpec {
    pub fn new(kind: PerturbationKind, magnitude: f64, seed: u64) -> Self {
        Self { kind, magnitude, seed }
    }

    fn validate(&self) -> Result<()> {
        if !(self.magnitude.is_finite() && self.magnitude >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "perturbation magnitude {} must be finite and >= 0",
                self.magnitude
            )));
        }
        if matches!(self.kind, PerturbationKind::Remove | PerturbationKind::RemoveAdd) && self.magnitude > 1.0 {
            return Err(Error::InvalidParameter(format!(
                "removal fraction {} exceeds 1",
                self.magnitude
            )));
        }
        Ok(())
    }
}

/// Applies a structural perturbation, returning a new mask tagged `derived`.
///
/// Removal draws the same victims for `remove` and `remove_add` at equal
/// seed, so the two modes differ only by the re-inserted discs. Re-inserted
/// discs may overlap survivors.
pub fn perturb(mask: &PufMask, spec: &PerturbationSpec) -> Result<PufMask> {
    spec.validate()?;
    let l = mask.side_um;
    let centers = match spec.kind {
        PerturbationKind::Radius => return Err(Error::UnsupportedPerturbation("radius")),
        PerturbationKind::Jitter => {
            let sigma_um = spec.magnitude * 1e-3;
            if sigma_um == 0.0 {
                mask.centers.clone()
            } else {
                let normal = Normal::new(0.0, sigma_um).expect("finite sigma");
                mask.centers
                    .iter()
                    .enumerate()
                    .map(|(i, p)| {
                        let mut rng = stream(spec.seed, domain::JITTER, i as u64);
                        let dx = normal.sample(&mut rng);
                        let dy = normal.sample(&mut rng);
                        Point::new(wrap(p.x + dx, l), wrap(p.y + dy, l))
                    })
                    .collect()
            }
        }
        PerturbationKind::Remove | PerturbationKind::RemoveAdd => {
            if mask.is_empty() {
                return Err(Error::InvalidParameter("cannot remove discs from an empty mask".into()));
            }
            let n = mask.len();
            let k = ((spec.magnitude * n as f64).round() as usize).min(n);
            let mut rng = stream(spec.seed, domain::REMOVE, 0);
            let mut doomed = vec![false; n];
            for i in index::sample(&mut rng, n, k) {
                doomed[i] = true;
            }
            let mut out: Vec<Point> = mask
                .centers
                .iter()
                .zip(&doomed)
                .filter(|(_, &d)| !d)
                .map(|(p, _)| *p)
                .collect();
            if spec.kind == PerturbationKind::RemoveAdd {
                let mut rng = stream(spec.seed, domain::READD, 0);
                out.extend((0..k).map(|_| Point::new(rng.gen::<f64>() * l, rng.gen::<f64>() * l)));
            }
            out
        }
        PerturbationKind::Shift => {
            if !mask.periodic {
                return Err(Error::NonPeriodicShift);
            }
            let frac = spec.magnitude - spec.magnitude.floor();
            if frac == 0.0 {
                mask.centers.clone()
            } else {
                let dx = frac * l;
                mask.centers
                    .iter()
                    .map(|p| {
                        let x = p.x + dx;
                        Point::new(if x >= l { wrap(x - l, l) } else { x }, p.y)
                    })
                    .collect()
            }
        }
    };
    Ok(PufMask {
        side_um: l,
        radius_nm: mask.radius_nm,
        centers,
        periodic: mask.periodic,
        seed: spec.seed,
        tag: GeneratorTag::Derived,
    })
}
