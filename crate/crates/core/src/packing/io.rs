//! Line-oriented mask files.
//!
//! ```text
//! PUFMASK v1 L=102.4 r=200 periodic=1 seed=7 tag=RSA
//! 1.23456789e1 4.56789012e0
//! ```
//! Coordinates are micrometers with 9 significant digits.

use std::io::{BufRead, Write};

use super::{GeneratorTag, Point, PufMask};
use crate::error::{parse_err, Result};

const MAGIC: &str = "PUFMASK";

impl PufMask {
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(
            w,
            "{MAGIC} v1 L={} r={} periodic={} seed={} tag={}",
            self.side_um,
            self.radius_nm,
            u8::from(self.periodic),
            self.seed,
            self.tag
        )?;
        for p in &self.centers {
            writeln!(w, "{:.8e} {:.8e}", p.x, p.y)?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("ascii output")
    }

    pub fn read_from<R: BufRead>(r: R) -> Result<Self> {
        let mut lines = r.lines();
        let header = lines.next().ok_or_else(|| parse_err(1, "empty mask file"))??;
        let mut fields = header.split_whitespace();
        if fields.next() != Some(MAGIC) || fields.next() != Some("v1") {
            return Err(parse_err(1, "expected `PUFMASK v1` header"));
        }
        let mut side = None;
        let mut radius = None;
        let mut periodic = None;
        let mut seed = None;
        let mut tag = None;
        for f in fields {
            let (k, v) = f.split_once('=').ok_or_else(|| parse_err(1, format!("bad field {f:?}")))?;
            let bad = |_| parse_err(1, format!("bad value in {f:?}"));
            match k {
                "L" => side = Some(v.parse::<f64>().map_err(bad)?),
                "r" => radius = Some(v.parse::<f64>().map_err(bad)?),
                "periodic" => {
                    periodic = Some(match v {
                        "0" => false,
                        "1" => true,
                        _ => return Err(parse_err(1, "periodic must be 0 or 1")),
                    })
                }
                "seed" => seed = Some(v.parse::<u64>().map_err(|_| parse_err(1, "bad seed"))?),
                "tag" => tag = Some(v.parse::<GeneratorTag>().map_err(|e| parse_err(1, e.to_string()))?),
                other => return Err(parse_err(1, format!("unknown header field {other:?}"))),
            }
        }
        let missing = |name: &str| parse_err(1, format!("header lacks {name}"));
        let mut mask = PufMask {
            side_um: side.ok_or_else(|| missing("L"))?,
            radius_nm: radius.ok_or_else(|| missing("r"))?,
            centers: Vec::new(),
            periodic: periodic.ok_or_else(|| missing("periodic"))?,
            seed: seed.ok_or_else(|| missing("seed"))?,
            tag: tag.ok_or_else(|| missing("tag"))?,
        };
        for (n, line) in lines.enumerate() {
            let line = line?;
            let lineno = n + 2;
            if line.trim().is_empty() {
                continue;
            }
            let mut it = line.split_whitespace();
            let mut coord = || -> Result<f64> {
                it.next()
                    .ok_or_else(|| parse_err(lineno, "expected `x y`"))?
                    .parse::<f64>()
                    .map_err(|e| parse_err(lineno, e.to_string()))
            };
            let x = coord()?;
            let y = coord()?;
            mask.centers.push(Point::new(x, y));
        }
        Ok(mask)
    }

    pub fn from_text(s: &str) -> Result<Self> {
        Self::read_from(s.as_bytes())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::packing::generate_rsa;
    use proptest::prelude::*;

    #[test]
    fn header_format() {
        let m = PufMask {
            side_um: 102.4,
            radius_nm: 200.0,
            centers: vec![Point::new(1.5, 0.25)],
            periodic: true,
            seed: 7,
            tag: GeneratorTag::Ls,
        };
        assert_eq!(
            m.to_text(),
            "PUFMASK v1 L=102.4 r=200 periodic=1 seed=7 tag=LS\n1.50000000e0 2.50000000e-1\n"
        );
    }

    #[test]
    fn generated_mask_text_round_trips() {
        let m = generate_rsa(10.0, 200.0, 0.3, 4, false).unwrap();
        let text = m.to_text();
        let back = PufMask::from_text(&text).unwrap();
        assert_eq!(back.to_text(), text);
        assert_eq!(back.len(), m.len());
        assert!(!back.periodic);
    }

    #[test]
    fn rejects_garbage() {
        assert!(PufMask::from_text("").is_err());
        assert!(PufMask::from_text("PUFMASK v2 L=1 r=1 periodic=1 seed=1 tag=RSA\n").is_err());
        assert!(PufMask::from_text("PUFMASK v1 L=1 r=1 periodic=2 seed=1 tag=RSA\n").is_err());
        assert!(PufMask::from_text("PUFMASK v1 L=1 r=1 periodic=1 seed=1\n").is_err());
        assert!(PufMask::from_text("PUFMASK v1 L=1 r=1 periodic=1 seed=1 tag=RSA\n0.5\n").is_err());
    }

    proptest! {
        #[test]
        fn text_round_trip_is_bit_exact(
            xs in proptest::collection::vec((0.0f64..750.0, 0.0f64..750.0), 0..50),
            seed in any::<u64>(),
            periodic in any::<bool>(),
        ) {
            let m = PufMask {
                side_um: 750.0,
                radius_nm: 200.0,
                centers: xs.into_iter().map(|(x, y)| Point::new(x, y)).collect(),
                periodic,
                seed,
                tag: GeneratorTag::Derived,
            };
            let text = m.to_text();
            let back = PufMask::from_text(&text).unwrap();
            prop_assert_eq!(back.to_text(), text.clone());
            let again = PufMask::from_text(&back.to_text()).unwrap();
            prop_assert_eq!(again, back);
        }
    }
}
