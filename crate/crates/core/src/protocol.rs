//! Enrollment of a challenge-response database and one-time-use authentication.

use std::io::{BufRead, Write};

use rand::Rng;
use rayon::prelude::*;

use crate::analysis::{decide, fhd, Decision, DEFAULT_THRESHOLD};
use crate::error::{parse_err, Error, Result};
use crate::keygen::{hash_response, BinaryKey, GaborConfig};
use crate::optics::{generate_challenge, rasterize, simulate_with_transmission, Challenge, OpticsConfig, ResponseMeta};
use crate::packing::PufMask;
use crate::rng::{derive_seed, domain, stream};

#[derive(Debug, Clone, PartialEq)]
pub struct CrpRecord {
    pub seed: u64,
    pub key: BinaryKey,
    pub used: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrpDatabase {
    pub device: String,
    pub threshold: f64,
    /// Challenge size shared by every record.
    pub m: usize,
    pub key_len: usize,
    pub optics_hash: u64,
    pub gabor_hash: u64,
    /// Seeds the selection of records during authentication.
    pub auth_seed: u64,
    pub records: Vec<CrpRecord>,
}

impl CrpDatabase {
    pub fn unused(&self) -> usize {
        self.records.iter().filter(|r| !r.used).count()
    }

    pub fn challenge(&self, index: usize) -> Result<Challenge> {
        generate_challenge(self.m, self.records[index].seed)
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "PUFCRPDB v1 device={} threshold={} n={} M={} K={} optics={:016x} gabor={:016x} auth_seed={}",
            self.device,
            self.threshold,
            self.records.len(),
            self.m,
            self.key_len,
            self.optics_hash,
            self.gabor_hash,
            self.auth_seed
        )?;
        for r in &self.records {
            writeln!(w, "seed={} used={} key={}", r.seed, u8::from(r.used), r.key.to_hex())?;
        }
        Ok(())
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines.next().ok_or_else(|| parse_err(1, "empty database file"))??;
        let mut f = header.split_whitespace();
        if f.next() != Some("PUFCRPDB") || f.next() != Some("v1") {
            return Err(parse_err(1, "expected `PUFCRPDB v1` header"));
        }
        let mut kv = std::collections::HashMap::new();
        for field in f {
            let (k, v) = field
                .split_once('=')
                .ok_or_else(|| parse_err(1, format!("bad field {field:?}")))?;
            kv.insert(k.to_string(), v.to_string());
        }
        let get = |k: &str| kv.get(k).ok_or_else(|| parse_err(1, format!("header lacks {k}")));
        let num = |k: &str| -> Result<u64> { get(k)?.parse().map_err(|_| parse_err(1, format!("bad {k}"))) };
        let hex = |k: &str| -> Result<u64> {
            u64::from_str_radix(get(k)?, 16).map_err(|_| parse_err(1, format!("bad {k}")))
        };
        let n = num("n")? as usize;
        let mut db = CrpDatabase {
            device: get("device")?.clone(),
            threshold: get("threshold")?
                .parse()
                .map_err(|_| parse_err(1, "bad threshold"))?,
            m: num("M")? as usize,
            key_len: num("K")? as usize,
            optics_hash: hex("optics")?,
            gabor_hash: hex("gabor")?,
            auth_seed: num("auth_seed")?,
            records: Vec::with_capacity(n),
        };
        for (i, line) in lines.enumerate() {
            let line = line?;
            let lineno = i + 2;
            if line.trim().is_empty() {
                continue;
            }
            let mut seed = None;
            let mut used = None;
            let mut key = None;
            for field in line.split_whitespace() {
                match field.split_once('=') {
                    Some(("seed", v)) => seed = v.parse::<u64>().ok(),
                    Some(("used", "0")) => used = Some(false),
                    Some(("used", "1")) => used = Some(true),
                    Some(("key", v)) => {
                        key = Some(
                            BinaryKey::from_hex(v, db.key_len, ResponseMeta::default())
                                .map_err(|e| parse_err(lineno, e.to_string()))?,
                        )
                    }
                    _ => return Err(parse_err(lineno, format!("bad record field {field:?}"))),
                }
            }
            match (seed, used, key) {
                (Some(seed), Some(used), Some(key)) => db.records.push(CrpRecord { seed, key, used }),
                _ => return Err(parse_err(lineno, "record needs seed=, used= and key=")),
            }
        }
        if db.records.len() != n {
            return Err(parse_err(1, format!("header says n={n}, found {} records", db.records.len())));
        }
        Ok(db)
    }
}

/// Simulates and hashes `n_crps` distinct challenges on `mask`.
///
/// Challenge `i` uses seed `derive_seed(master_seed, ENROLL, i)`; the rare
/// duplicate seed is skipped so seeds stay unique.
pub fn enroll(
    mask: &PufMask,
    n_crps: usize,
    m: usize,
    optics: &OpticsConfig,
    gabor: &GaborConfig,
    master_seed: u64,
) -> Result<CrpDatabase> {
    if n_crps == 0 {
        return Err(Error::InvalidParameter("n_crps must be >= 1".into()));
    }
    optics.validate()?;
    gabor.validate()?;
    let key_len = gabor.key_len(optics.window)?;
    let mut seeds = Vec::with_capacity(n_crps);
    let mut seen = std::collections::HashSet::new();
    let mut i = 0u64;
    while seeds.len() < n_crps {
        let s = derive_seed(master_seed, domain::ENROLL, i);
        if seen.insert(s) {
            seeds.push(s);
        }
        i += 1;
    }
    let t = rasterize(mask, optics)?;
    let mask_id = mask.fingerprint();
    let records = seeds
        .par_iter()
        .map(|&seed| {
            let c = generate_challenge(m, seed)?;
            let r = simulate_with_transmission(&t, &c, optics, mask_id)?;
            Ok(CrpRecord {
                seed,
                key: hash_response(&r, gabor)?,
                used: false,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CrpDatabase {
        device: format!("{mask_id:016x}"),
        threshold: DEFAULT_THRESHOLD,
        m,
        key_len,
        optics_hash: optics.fingerprint(),
        gabor_hash: gabor.fingerprint(),
        auth_seed: derive_seed(master_seed, domain::AUTH, 0),
        records,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuthOutcome {
    pub decision: Decision,
    pub record: usize,
    pub seed: u64,
}

/// Issues one uniformly chosen unused challenge and compares the reply.
///
/// The record is consumed before the responder runs, so it stays used even
/// when the responder fails or the reply is rejected. The `t`-th call draws
/// from stream `t` of the database seed, where `t` is the number of records
/// already used.
pub fn authenticate<F>(db: &mut CrpDatabase, mut responder: F) -> Result<AuthOutcome>
where
    F: FnMut(&Challenge) -> Result<BinaryKey>,
{
    let unused: Vec<usize> = (0..db.records.len()).filter(|&i| !db.records[i].used).collect();
    if unused.is_empty() {
        return Err(Error::DatabaseExhausted);
    }
    let t = (db.records.len() - unused.len()) as u64;
    let mut rng = stream(db.auth_seed, domain::AUTH, t);
    let idx = unused[rng.gen_range(0..unused.len())];
    db.records[idx].used = true;
    let challenge = db.challenge(idx)?;
    let reply = responder(&challenge)?;
    let d = fhd(&db.records[idx].key, &reply)?;
    Ok(AuthOutcome {
        decision: decide(d, db.threshold),
        record: idx,
        seed: db.records[idx].seed,
    })
}

/// Responder backed by a simulated device.
pub fn simulated_responder<'a>(
    mask: &'a PufMask,
    optics: &'a OpticsConfig,
    gabor: &'a GaborConfig,
) -> Result<impl FnMut(&Challenge) -> Result<BinaryKey> + 'a> {
    let t = rasterize(mask, optics)?;
    let id = mask.fingerprint();
    Ok(move |c: &Challenge| hash_response(&simulate_with_transmission(&t, c, optics, id)?, gabor))
}
