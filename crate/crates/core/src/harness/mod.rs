//! Perturbation sweeps over one mask and a fixed challenge set.

mod config;

use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::{challenge_entropy, inter_sample, like_sample, unlike_sample, FhdKind, FhdStats};
use crate::error::{Error, Result};
use crate::keygen::{hash_response, register, BinaryKey};
use crate::optics::{
    add_detector_noise, flip_pixels, generate_challenge, rasterize, simulate_with_transmission,
    Challenge, SpeckleResponse,
};
use crate::packing::{perturb, PerturbationKind, PerturbationSpec, PufMask};
use crate::rng::{derive_seed, domain};

pub use config::{Generator, Grids, HarnessConfig, RunConfig, SampleConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioKind {
    PixelFlip,
    Jitter,
    Remove,
    RemoveAdd,
    Shift,
    Radius,
    EntropyVsFp,
    ChallengeSize,
}

impl ScenarioKind {
    pub const ALL: [ScenarioKind; 8] = [
        ScenarioKind::PixelFlip,
        ScenarioKind::Jitter,
        ScenarioKind::Remove,
        ScenarioKind::RemoveAdd,
        ScenarioKind::Shift,
        ScenarioKind::Radius,
        ScenarioKind::EntropyVsFp,
        ScenarioKind::ChallengeSize,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ScenarioKind::PixelFlip => "pixel_flip",
            ScenarioKind::Jitter => "jitter",
            ScenarioKind::Remove => "remove",
            ScenarioKind::RemoveAdd => "remove_add",
            ScenarioKind::Shift => "shift",
            ScenarioKind::Radius => "radius",
            ScenarioKind::EntropyVsFp => "entropy_vs_fp",
            ScenarioKind::ChallengeSize => "challenge_size",
        }
    }

    fn id(self) -> u64 {
        self as u64
    }

    pub fn default_grid(self, g: &Grids) -> Vec<f64> {
        match self {
            ScenarioKind::PixelFlip => g.pixel_flip.clone(),
            ScenarioKind::Jitter => g.jitter.clone(),
            ScenarioKind::Remove => g.remove.clone(),
            ScenarioKind::RemoveAdd => g.remove_add.clone(),
            ScenarioKind::Shift => g.shift.clone(),
            ScenarioKind::Radius => g.radius.clone(),
            ScenarioKind::EntropyVsFp => g.entropy_vs_fp.clone(),
            ScenarioKind::ChallengeSize => g.challenge_size.clone(),
        }
    }
}

impl fmt::Display for ScenarioKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ScenarioKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown scenario '{s}'")))
    }
}

/// One scenario run: a kind, its parameter grid, and the full configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    pub grid: Vec<f64>,
    pub config: HarnessConfig,
}

impl ScenarioSpec {
    pub fn new(kind: ScenarioKind, config: HarnessConfig) -> Self {
        let grid = kind.default_grid(&config.grids);
        Self { kind, grid, config }
    }

    pub fn with_grid(mut self, grid: Vec<f64>) -> Self {
        self.grid = grid;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.config.validate()?;
        if self.grid.is_empty() {
            return Err(Error::Config(format!("{} grid is empty", self.kind)));
        }
        if let Some(v) = self.grid.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::Config(format!("{} grid value {v} must be finite and >= 0", self.kind)));
        }
        Ok(())
    }
}

/// A summarized FHD sample at one grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    /// Free-form qualifier such as `baseline`, `r=150` or `rep=2`.
    pub tag: String,
    pub kind: FhdKind,
    pub param: f64,
    pub stats: FhdStats,
    pub values: Vec<f64>,
}

impl ResultRow {
    fn new(tag: impl Into<String>, kind: FhdKind, param: f64, values: Vec<f64>) -> Result<Self> {
        Ok(Self {
            tag: tag.into(),
            kind,
            param,
            stats: FhdStats::moments(&values)?,
            values,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioResult {
    pub kind: ScenarioKind,
    pub rows: Vec<ResultRow>,
    /// Extra `# key = value` lines for the CSV header.
    pub notes: Vec<String>,
}

impl ScenarioResult {
    pub fn find(&self, tag: &str, kind: FhdKind, param: f64) -> Option<&ResultRow> {
        self.rows
            .iter()
            .find(|r| r.tag == tag && r.kind == kind && r.param == param)
    }

    /// Rows whose tag starts with `prefix` and that match `kind`.
    pub fn select<'a>(&'a self, prefix: &'a str, kind: FhdKind) -> impl Iterator<Item = &'a ResultRow> + 'a {
        self.rows
            .iter()
            .filter(move |r| r.kind == kind && r.tag.starts_with(prefix))
    }

    pub fn write_csv<W: Write>(&self, config: &HarnessConfig, mut w: W) -> Result<()> {
        writeln!(w, "# scenario = {}", self.kind)?;
        w.write_all(config.comment_header().as_bytes())?;
        for n in &self.notes {
            writeln!(w, "# {n}")?;
        }
        writeln!(w, "scenario,tag,kind,param,mean,sigma,dof,n_pairs")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{:.6},{:.6},{},{}",
                self.kind,
                r.tag,
                r.kind,
                r.param,
                r.stats.mean,
                r.stats.sigma,
                r.stats.dof.map_or_else(|| "NaN".to_string(), |v| format!("{v:.6}")),
                r.stats.n
            )?;
        }
        Ok(())
    }

    pub fn to_csv(&self, config: &HarnessConfig) -> String {
        let mut buf = Vec::new();
        self.write_csv(config, &mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("csv is ascii")
    }
}

pub fn run_scenario(spec: &ScenarioSpec) -> Result<ScenarioResult> {
    spec.validate()?;
    match spec.kind {
        ScenarioKind::PixelFlip => run_pixel_flip(spec),
        ScenarioKind::Jitter => run_structural(spec, PerturbationKind::Jitter),
        ScenarioKind::Remove => run_structural(spec, PerturbationKind::Remove),
        ScenarioKind::RemoveAdd => run_structural(spec, PerturbationKind::RemoveAdd),
        ScenarioKind::Shift => run_shift(spec),
        ScenarioKind::Radius => run_radius(spec),
        ScenarioKind::EntropyVsFp => run_entropy_sweep(spec),
        ScenarioKind::ChallengeSize => run_challenge_size(spec),
    }
}

/// Seed for one grid point, keyed by value so that extending a grid
/// leaves the existing points untouched.
fn perturb_seed(master: u64, kind: ScenarioKind, param: f64) -> u64 {
    derive_seed(
        derive_seed(master, domain::SCENARIO_PERTURB, kind.id()),
        domain::SCENARIO_PERTURB,
        param.to_bits(),
    )
}

pub fn mask_seed(master: u64, replicate: u64) -> u64 {
    derive_seed(master, domain::SCENARIO_MASK, replicate)
}

pub fn challenge_seed(master: u64, index: u64) -> u64 {
    derive_seed(master, domain::SCENARIO_CHALLENGE, index)
}

pub fn scenario_challenges(cfg: &HarnessConfig, m: usize) -> Result<Vec<Challenge>> {
    (0..cfg.run.n_challenges as u64)
        .map(|i| generate_challenge(m, challenge_seed(cfg.seed, i)))
        .collect()
}

/// One mask under illumination by every challenge.
pub struct Bench<'a> {
    pub cfg: &'a HarnessConfig,
    pub mask: &'a PufMask,
    transmission: crate::optics::Transmission,
}

impl<'a> Bench<'a> {
    pub fn new(cfg: &'a HarnessConfig, mask: &'a PufMask) -> Result<Self> {
        cfg.optics.check_mask(mask)?;
        let transmission = rasterize(mask, &cfg.optics)?;
        Ok(Self { cfg, mask, transmission })
    }

    pub fn responses(&self, challenges: &[Challenge]) -> Result<Vec<SpeckleResponse>> {
        let id = self.mask.fingerprint();
        challenges
            .par_iter()
            .map(|c| simulate_with_transmission(&self.transmission, c, &self.cfg.optics, id))
            .collect()
    }

    pub fn keys(&self, challenges: &[Challenge]) -> Result<Vec<BinaryKey>> {
        let id = self.mask.fingerprint();
        challenges
            .par_iter()
            .map(|c| {
                let r = simulate_with_transmission(&self.transmission, c, &self.cfg.optics, id)?;
                hash_response(&r, &self.cfg.gabor)
            })
            .collect()
    }
}

pub fn hash_all(responses: &[SpeckleResponse], cfg: &HarnessConfig) -> Result<Vec<BinaryKey>> {
    responses.par_iter().map(|r| hash_response(r, &cfg.gabor)).collect()
}

/// Repeated noisy readouts of each response, grouped per challenge.
fn like_groups(responses: &[SpeckleResponse], cfg: &HarnessConfig) -> Result<Vec<Vec<BinaryKey>>> {
    let reps = cfg.run.like_repeats as u64;
    responses
        .par_iter()
        .enumerate()
        .map(|(i, r)| {
            (0..reps)
                .map(|k| {
                    let seed = derive_seed(cfg.seed, domain::NOISE, i as u64 * reps + k);
                    let noisy = add_detector_noise(r, cfg.run.like_noise, seed)?;
                    hash_response(&noisy, &cfg.gabor)
                })
                .collect()
        })
        .collect()
}

fn singletons(keys: &[BinaryKey]) -> Vec<Vec<BinaryKey>> {
    keys.iter().map(|k| vec![k.clone()]).collect()
}

fn baseline_rows(
    tag: &str,
    param: f64,
    responses: &[SpeckleResponse],
    keys: &[BinaryKey],
    cfg: &HarnessConfig,
    subsample_index: u64,
) -> Result<Vec<ResultRow>> {
    let like = like_sample(&like_groups(responses, cfg)?)?;
    let unlike = unlike_sample(
        &singletons(keys),
        cfg.run.pair_cap,
        derive_seed(cfg.seed, domain::SUBSAMPLE, subsample_index),
    )?;
    Ok(vec![
        ResultRow::new(tag, FhdKind::Like, param, like.values)?,
        ResultRow::new(tag, FhdKind::Unlike, param, unlike.values)?,
    ])
}

fn base_mask(cfg: &HarnessConfig) -> Result<PufMask> {
    cfg.sample.generate(mask_seed(cfg.seed, 0))
}

pub fn run_pixel_flip(spec: &ScenarioSpec) -> Result<ScenarioResult> {
    let cfg = &spec.config;
    let mask = base_mask(cfg)?;
    let bench = Bench::new(cfg, &mask)?;
    let challenges = scenario_challenges(cfg, cfg.run.challenge_m)?;
    let responses = bench.responses(&challenges)?;
    let keys = hash_all(&responses, cfg)?;
    let mut rows = baseline_rows("baseline", 0.0, &responses, &keys, cfg, 0)?;
    rows.extend(flip_rows("", &bench, &challenges, &keys, &spec.grid, cfg.seed)?);
    Ok(ScenarioResult {
        kind: spec.kind,
        rows,
        notes: vec![],
    })
}

fn flip_rows(
    tag: &str,
    bench: &Bench<'_>,
    challenges: &[Challenge],
    base: &[BinaryKey],
    grid: &[f64],
    master: u64,
) -> Result<Vec<ResultRow>> {
    let mut rows = Vec::with_capacity(grid.len());
    for &n in grid {
        if n.fract() != 0.0 {
            return Err(Error::Config(format!("pixel flip count {n} is not an integer")));
        }
        let seed = perturb_seed(master, ScenarioKind::PixelFlip, n);
        let flipped = challenges
            .iter()
            .enumerate()
            .map(|(i, c)| flip_pixels(c, n as usize, derive_seed(seed, domain::FLIP, i as u64)))
            .collect::<Result<Vec<_>>>()?;
        let keys = bench.keys(&flipped)?;
        rows.push(ResultRow::new(tag, FhdKind::Inter, n, inter_sample(base, &keys)?.values)?);
    }
    Ok(rows)
}

fn structural_rows(
    tag: &str,
    bench: &Bench<'_>,
    challenges: &[Challenge],
    base: &[BinaryKey],
    kind: PerturbationKind,
    grid: &[f64],
    master: u64,
) -> Result<Vec<ResultRow>> {
    let sk = match kind {
        PerturbationKind::Jitter => ScenarioKind::Jitter,
        PerturbationKind::Remove => ScenarioKind::Remove,
        PerturbationKind::RemoveAdd => ScenarioKind::RemoveAdd,
        _ => return Err(Error::UnsupportedPerturbation("structural sweep")),
    };
    let mut rows = Vec::with_capacity(grid.len());
    for &p in grid {
        let clone = perturb(bench.mask, &PerturbationSpec::new(kind, p, perturb_seed(master, sk, p)))?;
        let cb = Bench::new(bench.cfg, &clone)?;
        let keys = cb.keys(challenges)?;
        rows.push(ResultRow::new(tag, FhdKind::Inter, p, inter_sample(base, &keys)?.values)?);
    }
    Ok(rows)
}

fn run_structural(spec: &ScenarioSpec, kind: PerturbationKind) -> Result<ScenarioResult> {
    let cfg = &spec.config;
    let mask = base_mask(cfg)?;
    let bench = Bench::new(cfg, &mask)?;
    let challenges = scenario_challenges(cfg, cfg.run.challenge_m)?;
    let responses = bench.responses(&challenges)?;
    let keys = hash_all(&responses, cfg)?;
    let mut rows = baseline_rows("baseline", 0.0, &responses, &keys, cfg, 0)?;
    drop(responses);
    rows.extend(structural_rows("", &bench, &challenges, &keys, kind, &spec.grid, cfg.seed)?);
    Ok(ScenarioResult {
        kind: spec.kind,
        rows,
        notes: vec![],
    })
}

pub fn run_jitter(spec: &ScenarioSpec) -> Result<ScenarioResult> {
    run_structural(spec, PerturbationKind::Jitter)
}

/// Removal without (`readd = false`) or with re-insertion.
pub fn run_remove(spec: &ScenarioSpec, readd: bool) -> Result<ScenarioResult> {
    let kind = if readd {
        PerturbationKind::RemoveAdd
    } else {
        PerturbationKind::Remove
    };
    run_structural(spec, kind)
}

fn shift_rows(
    tag: &str,
    bench: &Bench<'_>,
    challenges: &[Challenge],
    base: &[SpeckleResponse],
    grid: &[f64],
) -> Result<Vec<ResultRow>> {
    let cfg = bench.cfg;
    let mut rows = Vec::with_capacity(grid.len());
    for &d in grid {
        let moved = perturb(bench.mask, &PerturbationSpec::new(PerturbationKind::Shift, d, 0))?;
        let mb = Bench::new(cfg, &moved)?;
        let responses = mb.responses(challenges)?;
        let pairs = base
            .par_iter()
            .zip(responses.par_iter())
            .map(|(r0, r1)| {
                let k0 = hash_response(r0, &cfg.gabor)?;
                let k1 = if cfg.run.register_shift {
                    hash_response(&register(r0, r1)?.aligned, &cfg.gabor)?
                } else {
                    hash_response(r1, &cfg.gabor)?
                };
                k0.distance(&k1).map(|d| d as f64 / k0.len() as f64)
            })
            .collect::<Result<Vec<f64>>>()?;
        rows.push(ResultRow::new(tag, FhdKind::Inter, d, pairs)?);
    }
    Ok(rows)
}

/// Rigid translations by a fraction of the side; responses are registered
/// against the unshifted ones before hashing unless disabled.
pub fn run_shift(spec: &ScenarioSpec) -> Result<ScenarioResult> {
    let cfg = &spec.config;
    let mask = base_mask(cfg)?;
    let bench = Bench::new(cfg, &mask)?;
    let challenges = scenario_challenges(cfg, cfg.run.challenge_m)?;
    let responses = bench.responses(&challenges)?;
    let keys = hash_all(&responses, cfg)?;
    let mut rows = baseline_rows("baseline", 0.0, &responses, &keys, cfg, 0)?;
    rows.extend(shift_rows("", &bench, &challenges, &responses, &spec.grid)?);
    Ok(ScenarioResult {
        kind: spec.kind,
        rows,
        notes: vec![],
    })
}

/// Regenerates the mask at each radius (same fraction) and repeats the
/// flip, jitter and shift sweeps. Tags are `r=<nm>/<sweep>[/rep=<k>]`.
pub fn run_radius(spec: &ScenarioSpec) -> Result<ScenarioResult> {
    let cfg = &spec.config;
    let g = &cfg.grids;
    let challenges = scenario_challenges(cfg, cfg.run.challenge_m)?;
    let mut rows = Vec::new();
    for (ri, &r) in spec.grid.iter().enumerate() {
        for rep in 0..cfg.run.replicates as u64 {
            let suffix = if cfg.run.replicates > 1 {
                format!("/rep={rep}")
            } else {
                String::new()
            };
            let mask = crate::packing::regenerate_radius(
                cfg.sample.side_um,
                cfg.sample.packing_fraction,
                r,
                mask_seed(cfg.seed, rep),
            )?;
            let bench = Bench::new(cfg, &mask)?;
            let responses = bench.responses(&challenges)?;
            let keys = hash_all(&responses, cfg)?;
            let master = derive_seed(cfg.seed, domain::SCENARIO_MASK, rep);
            rows.extend(baseline_rows(
                &format!("r={r}/baseline{suffix}"),
                r,
                &responses,
                &keys,
                cfg,
                (ri as u64) << 32 | rep,
            )?);
            rows.extend(flip_rows(&format!("r={r}/flip{suffix}"), &bench, &challenges, &keys, &g.radius_flips, master)?);
            rows.extend(structural_rows(
                &format!("r={r}/jitter{suffix}"),
                &bench,
                &challenges,
                &keys,
                PerturbationKind::Jitter,
                &g.radius_jitter,
                master,
            )?);
            rows.extend(shift_rows(&format!("r={r}/shift{suffix}"), &bench, &challenges, &responses, &g.radius_shift)?);
        }
    }
    Ok(ScenarioResult {
        kind: spec.kind,
        rows,
        notes: vec![],
    })
}

/// Unlike statistics and `N` against packing fraction, one row per replicate mask.
pub fn run_entropy_sweep(spec: &ScenarioSpec) -> Result<ScenarioResult> {
    let cfg = &spec.config;
    let challenges = scenario_challenges(cfg, cfg.run.challenge_m)?;
    let mut rows = Vec::new();
    for (fi, &fp) in spec.grid.iter().enumerate() {
        for rep in 0..cfg.run.replicates as u64 {
            let mask = cfg.sample.generate_at(fp, cfg.sample.radius_nm, mask_seed(cfg.seed, rep))?;
            let keys = Bench::new(cfg, &mask)?.keys(&challenges)?;
            let unlike = unlike_sample(
                &singletons(&keys),
                cfg.run.pair_cap,
                derive_seed(cfg.seed, domain::SUBSAMPLE, (fi as u64) << 32 | rep),
            )?;
            rows.push(ResultRow::new(format!("rep={rep}"), FhdKind::Unlike, fp, unlike.values)?);
        }
    }
    let e = challenge_entropy(cfg.run.challenge_m);
    Ok(ScenarioResult {
        kind: spec.kind,
        rows,
        notes: vec![
            format!("challenge_entropy_per_pixel_bits = {}", e.per_pixel_bits),
            format!("challenge_entropy_balanced_bits = {}", e.balanced_bits),
        ],
    })
}

/// Like and unlike statistics against the challenge size `M`.
pub fn run_challenge_size(spec: &ScenarioSpec) -> Result<ScenarioResult> {
    let cfg = &spec.config;
    let mask = base_mask(cfg)?;
    let bench = Bench::new(cfg, &mask)?;
    let mut rows = Vec::new();
    let mut notes = Vec::new();
    for (mi, &m) in spec.grid.iter().enumerate() {
        if m.fract() != 0.0 {
            return Err(Error::Config(format!("challenge size {m} is not an integer")));
        }
        let challenges = scenario_challenges(cfg, m as usize)?;
        let responses = bench.responses(&challenges)?;
        let keys = hash_all(&responses, cfg)?;
        rows.extend(baseline_rows("", m, &responses, &keys, cfg, mi as u64)?);
        let e = challenge_entropy(m as usize);
        notes.push(format!(
            "M = {m}: per_pixel_bits = {}, balanced_bits = {}",
            e.per_pixel_bits, e.balanced_bits
        ));
    }
    Ok(ScenarioResult {
        kind: spec.kind,
        rows,
        notes,
    })
}
