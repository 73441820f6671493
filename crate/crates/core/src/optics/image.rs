//! Response images: 16-bit graymap for viewing, text dump for archival.

use std::io::{BufRead, Write};

use super::{ResponseMeta, SpeckleResponse};
use crate::error::{parse_err, Result};

impl SpeckleResponse {
    /// Binary 16-bit PGM (big-endian samples). Pixel value = round(I·scale)
    /// with `scale = 65535 / max I`, recorded in a `# scale=` comment.
    pub fn write_pgm<W: Write>(&self, mut w: W) -> Result<()> {
        let max = self.data.iter().cloned().fold(0.0, f64::max);
        let scale = if max > 0.0 { 65535.0 / max } else { 1.0 };
        write!(w, "P5\n# scale={scale:e}\n{0} {0}\n65535\n", self.width)?;
        let mut buf = Vec::with_capacity(self.data.len() * 2);
        for v in &self.data {
            let q = (v * scale).round().clamp(0.0, 65535.0) as u16;
            buf.extend_from_slice(&q.to_be_bytes());
        }
        w.write_all(&buf)?;
        Ok(())
    }

    /// Row-major text dump; values use shortest round-trip notation, so a
    /// dump read back with [`read_raw`] is bit-identical.
    pub fn write_raw<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "PUFRESP v1 W={} mask={:016x} challenge={} config={:016x}",
            self.width, self.meta.mask_id, self.meta.challenge_seed, self.meta.config_hash
        )?;
        let mut line = String::new();
        for row in self.data.chunks(self.width.max(1)) {
            line.clear();
            for (i, v) in row.iter().enumerate() {
                if i > 0 {
                    line.push(' ');
                }
                line.push_str(&format!("{v:e}"));
            }
            writeln!(w, "{line}")?;
        }
        Ok(())
    }
}

/// Parses a dump written by [`SpeckleResponse::write_raw`].
pub fn read_raw<R: BufRead>(r: R) -> Result<SpeckleResponse> {
    let mut lines = r.lines();
    let header = lines.next().ok_or_else(|| parse_err(1, "empty response dump"))??;
    let mut f = header.split_whitespace();
    if f.next() != Some("PUFRESP") || f.next() != Some("v1") {
        return Err(parse_err(1, "expected `PUFRESP v1` header"));
    }
    let mut width = None;
    let mut meta = ResponseMeta::default();
    for field in f {
        let (k, v) = field.split_once('=').ok_or_else(|| parse_err(1, format!("bad field {field:?}")))?;
        let bad = |_| parse_err(1, format!("bad value in {field:?}"));
        match k {
            "W" => width = Some(v.parse::<usize>().map_err(|_| parse_err(1, "bad W"))?),
            "mask" => meta.mask_id = u64::from_str_radix(v, 16).map_err(bad)?,
            "challenge" => meta.challenge_seed = v.parse().map_err(bad)?,
            "config" => meta.config_hash = u64::from_str_radix(v, 16).map_err(bad)?,
            other => return Err(parse_err(1, format!("unknown header field {other:?}"))),
        }
    }
    let width = width.ok_or_else(|| parse_err(1, "header lacks W"))?;
    let mut data = Vec::with_capacity(width * width);
    for (i, line) in lines.enumerate() {
        let line = line?;
        for tok in line.split_whitespace() {
            data.push(tok.parse::<f64>().map_err(|e| parse_err(i + 2, e.to_string()))?);
        }
    }
    SpeckleResponse::new(width, data, meta)
}
