use std::fmt::Write as _;
use std::io::{BufRead, Write};

use crate::error::{parse_err, Error, Result};
use crate::optics::ResponseMeta;

/// Fixed-length bit string, bit 0 first.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryKey {
    len: usize,
    words: Vec<u64>,
    pub meta: ResponseMeta,
}

impl BinaryKey {
    pub fn from_bits(bits: &[bool], meta: ResponseMeta) -> Self {
        let mut words = vec![0u64; bits.len().div_ceil(64)];
        for (i, &b) in bits.iter().enumerate() {
            if b {
                words[i / 64] |= 1 << (i % 64);
            }
        }
        Self {
            len: bits.len(),
            words,
            meta,
        }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn bit(&self, i: usize) -> bool {
        assert!(i < self.len, "bit {i} out of range {}", self.len);
        self.words[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn bits(&self) -> Vec<bool> {
        (0..self.len).map(|i| self.bit(i)).collect()
    }

    pub fn count_ones(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// Number of differing bits.
    pub fn distance(&self, other: &BinaryKey) -> Result<usize> {
        if self.len != other.len {
            return Err(Error::LengthMismatch(self.len, other.len));
        }
        Ok(self
            .words
            .iter()
            .zip(&other.words)
            .map(|(a, b)| (a ^ b).count_ones() as usize)
            .sum())
    }

    /// Lowercase hex, most significant bit first; the last digit is padded
    /// with zero bits when the length is not a multiple of 4.
    pub fn to_hex(&self) -> String {
        let mut s = String::with_capacity(self.len.div_ceil(4));
        for nib in 0..self.len.div_ceil(4) {
            let mut v = 0u32;
            for j in 0..4 {
                let i = nib * 4 + j;
                v = (v << 1) | u32::from(i < self.len && self.bit(i));
            }
            write!(s, "{v:x}").expect("writing to a String cannot fail");
        }
        s
    }

    /// Inverse of [`to_hex`](Self::to_hex) for a known bit length.
    pub fn from_hex(hex: &str, len: usize, meta: ResponseMeta) -> Result<Self> {
        if hex.len() != len.div_ceil(4) {
            return Err(Error::LengthMismatch(hex.len() * 4, len));
        }
        let mut bits = Vec::with_capacity(hex.len() * 4);
        for ch in hex.chars() {
            let v = ch
                .to_digit(16)
                .filter(|_| !ch.is_ascii_uppercase())
                .ok_or_else(|| Error::InvalidParameter(format!("bad hex digit {ch:?}")))?;
            for j in (0..4).rev() {
                bits.push(v >> j & 1 == 1);
            }
        }
        if bits[len..].iter().any(|&b| b) {
            return Err(Error::InvalidParameter("nonzero padding bits".into()));
        }
        bits.truncate(len);
        Ok(Self::from_bits(&bits, meta))
    }
}

/// One key per line: `<metadata hash, 16 hex> <key hex>`.
pub fn write_keys<W: Write>(keys: &[BinaryKey], mut w: W) -> Result<()> {
    for k in keys {
        writeln!(w, "{:016x} {}", k.meta.fingerprint(), k.to_hex())?;
    }
    Ok(())
}

/// Reads a key file for keys of `len` bits. The metadata hash is returned
/// alongside each key; the full metadata is not recoverable from it.
pub fn read_keys<R: BufRead>(r: R, len: usize) -> Result<Vec<(u64, BinaryKey)>> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let (h, hex) = line
            .split_once(' ')
            .ok_or_else(|| parse_err(i + 1, "expected `<hash> <hex>`"))?;
        let h = u64::from_str_radix(h, 16).map_err(|e| parse_err(i + 1, e.to_string()))?;
        let key = BinaryKey::from_hex(hex.trim(), len, ResponseMeta::default())
            .map_err(|e| parse_err(i + 1, e.to_string()))?;
        out.push((h, key));
    }
    Ok(out)
}
