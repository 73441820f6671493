use std::io::{BufRead, Write};

use rand::seq::index;

use crate::error::{parse_err, Error, Result};
use crate::rng::{domain, stream};

/// M×M binary macro-pixel illumination pattern, row-major.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Challenge {
    pub m: usize,
    pub bits: Vec<bool>,
    pub seed: u64,
    /// Exactly half the pixels are on.
    pub balanced: bool,
}

impl Challenge {
    pub fn from_bits(m: usize, bits: Vec<bool>, seed: u64) -> Result<Self> {
        if bits.len() != m * m {
            return Err(Error::DimensionMismatch {
                expected: m * m,
                got: bits.len(),
            });
        }
        let balanced = is_balanced(m, &bits);
        Ok(Self { m, bits, seed, balanced })
    }

    pub fn get(&self, row: usize, col: usize) -> bool {
        self.bits[row * self.m + col]
    }

    pub fn on_count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    /// Number of differing macro-pixels.
    pub fn hamming(&self, other: &Challenge) -> usize {
        self.bits.iter().zip(&other.bits).filter(|(a, b)| a != b).count()
    }

    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "PUFCHAL v1 M={} seed={}", self.m, self.seed)?;
        let mut line = String::with_capacity(self.m);
        for row in self.bits.chunks(self.m.max(1)) {
            line.clear();
            line.extend(row.iter().map(|&b| if b { '1' } else { '0' }));
            writeln!(w, "{line}")?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("ascii output")
    }

    /// Reads one challenge; trailing content after the M rows is left unread.
    pub fn read_from<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines.next().ok_or_else(|| parse_err(1, "empty challenge file"))??;
        let mut f = header.split_whitespace();
        if f.next() != Some("PUFCHAL") || f.next() != Some("v1") {
            return Err(parse_err(1, "expected `PUFCHAL v1` header"));
        }
        let m = header_value(f.next(), "M")?
            .parse::<usize>()
            .map_err(|e| parse_err(1, format!("bad M: {e}")))?;
        let seed = header_value(f.next(), "seed")?
            .parse::<u64>()
            .map_err(|e| parse_err(1, format!("bad seed: {e}")))?;
        let mut bits = Vec::with_capacity(m * m);
        for row in 0..m {
            let lineno = row + 2;
            let line = lines.next().ok_or_else(|| parse_err(lineno, "missing challenge row"))??;
            let line = line.trim_end();
            if line.len() != m {
                return Err(parse_err(lineno, format!("row has {} characters, expected {m}", line.len())));
            }
            for ch in line.chars() {
                bits.push(match ch {
                    '0' => false,
                    '1' => true,
                    _ => return Err(parse_err(lineno, format!("unexpected character {ch:?}"))),
                });
            }
        }
        Self::from_bits(m, bits, seed)
    }

    pub fn from_text(s: &str) -> Result<Self> {
        Self::read_from(s.as_bytes())
    }
}

fn header_value<'a>(field: Option<&'a str>, key: &str) -> Result<&'a str> {
    field
        .and_then(|f| f.strip_prefix(key))
        .and_then(|f| f.strip_prefix('='))
        .ok_or_else(|| parse_err(1, format!("header lacks {key}=")))
}

fn is_balanced(m: usize, bits: &[bool]) -> bool {
    m % 2 == 0 && bits.iter().filter(|&&b| b).count() * 2 == m * m
}

/// Balanced random pattern with exactly M²/2 pixels on.
pub fn generate_challenge(m: usize, seed: u64) -> Result<Challenge> {
    if m < 2 || m % 2 != 0 {
        return Err(Error::OddM(m));
    }
    let total = m * m;
    let mut bits = vec![false; total];
    let mut rng = stream(seed, domain::CHALLENGE, 0);
    for i in index::sample(&mut rng, total, total / 2) {
        bits[i] = true;
    }
    Ok(Challenge {
        m,
        bits,
        seed,
        balanced: true,
    })
}

/// Inverts exactly `n_flips` distinct macro-pixels.
///
/// The result keeps the parent's seed, so a flipped variant is identified by
/// `(parent seed, flip seed)` at the caller.
pub fn flip_pixels(c: &Challenge, n_flips: usize, seed: u64) -> Result<Challenge> {
    let total = c.m * c.m;
    if n_flips > total {
        return Err(Error::TooManyFlips {
            requested: n_flips,
            available: total,
        });
    }
    let mut bits = c.bits.clone();
    let mut rng = stream(seed, domain::FLIP, 0);
    for i in index::sample(&mut rng, total, n_flips) {
        bits[i] = !bits[i];
    }
    let balanced = is_balanced(c.m, &bits);
    Ok(Challenge {
        m: c.m,
        bits,
        seed: c.seed,
        balanced,
    })
}

/// Writes several challenges back to back.
pub fn write_challenges<W: Write>(challenges: &[Challenge], mut w: W) -> Result<()> {
    for c in challenges {
        c.write_to(&mut w)?;
    }
    Ok(())
}

/// Reads back-to-back challenges until end of input.
pub fn read_challenges(text: &str) -> Result<Vec<Challenge>> {
    let lines: Vec<&str> = text.lines().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < lines.len() {
        if lines[i].trim().is_empty() {
            i += 1;
            continue;
        }
        let m = lines[i]
            .split_whitespace()
            .find_map(|f| f.strip_prefix("M="))
            .and_then(|v| v.parse::<usize>().ok())
            .ok_or_else(|| parse_err(i + 1, "expected challenge header"))?;
        let end = (i + 1 + m).min(lines.len());
        let block = lines[i..end].join("\n");
        let c = Challenge::from_text(&block).map_err(|e| match e {
            Error::Parse { line, msg } => parse_err(line + i, msg),
            other => other,
        })?;
        out.push(c);
        i = end;
    }
    Ok(out)
}
