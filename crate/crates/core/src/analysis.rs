//! Fractional Hamming distance statistics and the acceptance decision.

use std::fmt;
use std::io::Write;

use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::keygen::BinaryKey;
use crate::rng::{domain, stream};

pub const DEFAULT_THRESHOLD: f64 = 0.2;
pub const DEFAULT_PAIR_CAP: usize = 1_000_000;

/// `popcount(k1 ^ k2) / K`.
pub fn fhd(k1: &BinaryKey, k2: &BinaryKey) -> Result<f64> {
    let d = k1.distance(k2)?;
    if k1.is_empty() {
        return Ok(0.0);
    }
    Ok(d as f64 / k1.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FhdKind {
    /// Repeated measurements of one challenge.
    Like,
    /// Different challenges on one device.
    Unlike,
    /// Same challenge on an original and a perturbed device or challenge.
    Inter,
}

impl fmt::Display for FhdKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FhdKind::Like => "like",
            FhdKind::Unlike => "unlike",
            FhdKind::Inter => "inter",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FhdSample {
    pub kind: FhdKind,
    pub values: Vec<f64>,
}

impl FhdSample {
    pub fn pair_count(&self) -> usize {
        self.values.len()
    }
}

fn check_lengths(keys: &[&BinaryKey]) -> Result<()> {
    if let Some(first) = keys.first() {
        if let Some(bad) = keys.iter().find(|k| k.len() != first.len()) {
            return Err(Error::LengthMismatch(first.len(), bad.len()));
        }
    }
    Ok(())
}

fn pair_values(keys: &[&BinaryKey], pairs: &[(usize, usize)]) -> Vec<f64> {
    pairs
        .par_iter()
        .map(|&(i, j)| fhd(keys[i], keys[j]).expect("lengths checked"))
        .collect()
}

/// All pairs of repeated measurements within each challenge group.
pub fn like_sample(groups: &[Vec<BinaryKey>]) -> Result<FhdSample> {
    let keys: Vec<&BinaryKey> = groups.iter().flatten().collect();
    check_lengths(&keys)?;
    let mut pairs = Vec::new();
    let mut base = 0;
    for g in groups {
        for i in 0..g.len() {
            for j in i + 1..g.len() {
                pairs.push((base + i, base + j));
            }
        }
        base += g.len();
    }
    if pairs.is_empty() {
        return Err(Error::InsufficientKeys {
            required: 2,
            got: groups.iter().map(Vec::len).max().unwrap_or(0),
        });
    }
    Ok(FhdSample {
        kind: FhdKind::Like,
        values: pair_values(&keys, &pairs),
    })
}

/// Maps a triangular index to the pair `(i, j)`, `i < j`, enumerated row by row.
fn tri_pair(t: usize, n: usize) -> (usize, usize) {
    // row i holds n-1-i pairs; invert the cumulative count
    let nf = n as f64;
    let tf = t as f64;
    let mut i = ((2.0 * nf - 1.0 - ((2.0 * nf - 1.0).powi(2) - 8.0 * tf).max(0.0).sqrt()) / 2.0).floor() as usize;
    let start = |i: usize| i * (2 * n - i - 1) / 2;
    while i > 0 && start(i) > t {
        i -= 1;
    }
    while start(i + 1) <= t {
        i += 1;
    }
    (i, i + 1 + (t - start(i)))
}

/// All unordered pairs of keys from distinct challenge groups.
///
/// When more than `cap` candidate pairs exist, `cap` of them are drawn
/// uniformly without replacement (pairs within one group are then dropped),
/// in ascending pair order.
pub fn unlike_sample(groups: &[Vec<BinaryKey>], cap: usize, seed: u64) -> Result<FhdSample> {
    let mut keys = Vec::new();
    let mut owner = Vec::new();
    for (g, ks) in groups.iter().enumerate() {
        for k in ks {
            keys.push(k);
            owner.push(g);
        }
    }
    check_lengths(&keys)?;
    let n = keys.len();
    if n < 2 || groups.iter().filter(|g| !g.is_empty()).count() < 2 {
        return Err(Error::InsufficientKeys { required: 2, got: n });
    }
    let total = n * (n - 1) / 2;
    let pairs: Vec<(usize, usize)> = if total <= cap {
        (0..total).map(|t| tri_pair(t, n)).filter(|&(i, j)| owner[i] != owner[j]).collect()
    } else {
        let mut rng = stream(seed, domain::SUBSAMPLE, 0);
        let mut picks = index::sample(&mut rng, total, cap).into_vec();
        picks.sort_unstable();
        picks
            .into_iter()
            .map(|t| tri_pair(t, n))
            .filter(|&(i, j)| owner[i] != owner[j])
            .collect()
    };
    Ok(FhdSample {
        kind: FhdKind::Unlike,
        values: pair_values(&keys, &pairs),
    })
}

/// Positionwise pairs `(a[i], b[i])`.
pub fn inter_sample(a: &[BinaryKey], b: &[BinaryKey]) -> Result<FhdSample> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch(a.len(), b.len()));
    }
    if a.is_empty() {
        return Err(Error::InsufficientKeys { required: 1, got: 0 });
    }
    let values = a
        .par_iter()
        .zip(b.par_iter())
        .map(|(x, y)| fhd(x, y))
        .collect::<Result<Vec<_>>>()?;
    Ok(FhdSample {
        kind: FhdKind::Inter,
        values,
    })
}

/// Keys to compare, by sample kind.
pub enum SampleInput<'a> {
    /// Repeated measurements grouped by challenge.
    Grouped(&'a [Vec<BinaryKey>]),
    /// Two aligned lists.
    Aligned(&'a [BinaryKey], &'a [BinaryKey]),
}

/// Dispatches to [`like_sample`], [`unlike_sample`] (default cap, seed 0) or [`inter_sample`].
pub fn collect_sample(input: SampleInput<'_>, kind: FhdKind) -> Result<FhdSample> {
    match (kind, input) {
        (FhdKind::Like, SampleInput::Grouped(g)) => like_sample(g),
        (FhdKind::Unlike, SampleInput::Grouped(g)) => unlike_sample(g, DEFAULT_PAIR_CAP, 0),
        (FhdKind::Inter, SampleInput::Aligned(a, b)) => inter_sample(a, b),
        (kind, _) => Err(Error::InvalidParameter(format!("wrong key layout for a {kind} sample"))),
    }
}

/// Gaussian summary of an FHD sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FhdStats {
    pub mean: f64,
    /// Population standard deviation.
    pub sigma: f64,
    /// `mean(1-mean)/sigma²`; `None` when `sigma = 0`.
    pub dof: Option<f64>,
    pub n: usize,
}

impl FhdStats {
    /// Sample moments; never fails on a non-empty sample.
    pub fn moments(values: &[f64]) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::InsufficientSample { required: 1, got: 0 });
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let sigma = var.sqrt();
        let dof = (sigma > 0.0).then(|| mean * (1.0 - mean) / var);
        Ok(Self {
            mean,
            sigma,
            dof,
            n: values.len(),
        })
    }
}

/// Moment fit with degrees of freedom `N = ⟨p⟩(1-⟨p⟩)/σ²`.
pub fn fit_stats(s: &FhdSample) -> Result<FhdStats> {
    if s.values.len() < 2 {
        return Err(Error::InsufficientSample {
            required: 2,
            got: s.values.len(),
        });
    }
    let st = FhdStats::moments(&s.values)?;
    if st.dof.is_none() {
        return Err(Error::DegenerateSample);
    }
    Ok(st)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Decision {
    pub accept: bool,
    pub fhd: f64,
    pub threshold: f64,
}

/// Accepts iff `fhd < threshold`.
pub fn decide(fhd: f64, threshold: f64) -> Decision {
    Decision {
        accept: fhd < threshold,
        fhd,
        threshold,
    }
}

/// Counts per bin of width 0.01 over [0, 1]; 1.0 falls in the last bin.
pub fn histogram(values: &[f64]) -> Vec<(f64, usize)> {
    let mut counts = [0usize; 100];
    for &v in values {
        let b = ((v * 100.0).floor().max(0.0) as usize).min(99);
        counts[b] += 1;
    }
    counts.iter().enumerate().map(|(i, &c)| (i as f64 / 100.0, c)).collect()
}

pub fn write_histogram_csv<W: Write>(values: &[f64], mut w: W) -> Result<()> {
    writeln!(w, "bin_left,count")?;
    for (left, c) in histogram(values) {
        writeln!(w, "{left:.2},{c}")?;
    }
    Ok(())
}

/// One line of a stats table.
#[derive(Debug, Clone, PartialEq)]
pub struct StatsRow {
    pub kind: String,
    pub param: f64,
    pub stats: FhdStats,
}

fn fmt_dof(d: Option<f64>) -> String {
    d.map_or_else(|| "NaN".to_string(), |v| format!("{v:.6}"))
}

pub fn write_stats_csv<W: Write>(rows: &[StatsRow], mut w: W) -> Result<()> {
    writeln!(w, "kind,param,mean,sigma,dof,n_pairs")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{:.6},{:.6},{},{}",
            r.kind,
            r.param,
            r.stats.mean,
            r.stats.sigma,
            fmt_dof(r.stats.dof),
            r.stats.n
        )?;
    }
    Ok(())
}

/// The two readings of the challenge-entropy reference line for an M×M challenge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChallengeEntropy {
    /// One bit per macro-pixel: `M²`.
    pub per_pixel_bits: f64,
    /// `log2 C(M², M²/2)`: the number of balanced patterns.
    pub balanced_bits: f64,
}

pub fn challenge_entropy(m: usize) -> ChallengeEntropy {
    let n = m * m;
    let k = n / 2;
    let balanced_bits = (1..=k).map(|i| (((n - k + i) as f64) / i as f64).log2()).sum();
    ChallengeEntropy {
        per_pixel_bits: n as f64,
        balanced_bits,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::optics::ResponseMeta;
    use proptest::prelude::*;
    use rand::Rng;

    fn key(bits: &[bool]) -> BinaryKey {
        BinaryKey::from_bits(bits, ResponseMeta::default())
    }

    fn random_key(len: usize, seed: u64) -> BinaryKey {
        let mut rng = stream(seed, 0xabc, 0);
        key(&(0..len).map(|_| rng.gen::<bool>()).collect::<Vec<_>>())
    }

    #[test]
    fn fhd_examples() {
        let a = random_key(2500, 1);
        assert_eq!(fhd(&a, &a).unwrap(), 0.0);
        let comp = key(&a.bits().iter().map(|b| !b).collect::<Vec<_>>());
        assert_eq!(fhd(&a, &comp).unwrap(), 1.0);
        let mut bits = a.bits();
        bits[17] = !bits[17];
        assert!((fhd(&a, &key(&bits)).unwrap() - 0.0004).abs() < 1e-15);
        assert!(matches!(fhd(&a, &random_key(2499, 1)), Err(Error::LengthMismatch(..))));
    }

    #[test]
    fn triangular_indexing_enumerates_pairs() {
        for n in [2usize, 3, 7, 50] {
            let mut want = Vec::new();
            for i in 0..n {
                for j in i + 1..n {
                    want.push((i, j));
                }
            }
            let got: Vec<_> = (0..n * (n - 1) / 2).map(|t| tri_pair(t, n)).collect();
            assert_eq!(got, want);
        }
    }

    #[test]
    fn sample_sizes() {
        let singles: Vec<Vec<BinaryKey>> = (0..3).map(|s| vec![random_key(64, s)]).collect();
        assert_eq!(unlike_sample(&singles, DEFAULT_PAIR_CAP, 0).unwrap().pair_count(), 3);
        let a: Vec<_> = (0..2000).map(|s| random_key(64, s)).collect();
        let b: Vec<_> = (0..2000).map(|s| random_key(64, s + 7)).collect();
        assert_eq!(inter_sample(&a, &b).unwrap().pair_count(), 2000);
        let groups = vec![vec![random_key(64, 1), random_key(64, 2)], vec![random_key(64, 3)]];
        assert_eq!(unlike_sample(&groups, DEFAULT_PAIR_CAP, 0).unwrap().pair_count(), 2);
        assert_eq!(like_sample(&groups).unwrap().pair_count(), 1);
    }

    #[test]
    fn noiseless_like_sample_is_all_zero() {
        let k = random_key(2500, 4);
        let groups = vec![vec![k.clone(), k.clone(), k.clone()], vec![k.clone(), k]];
        let s = collect_sample(SampleInput::Grouped(&groups), FhdKind::Like).unwrap();
        assert_eq!(s.pair_count(), 4);
        assert!(s.values.iter().all(|&v| v == 0.0));
        assert!(matches!(fit_stats(&s), Err(Error::DegenerateSample)));
        let m = FhdStats::moments(&s.values).unwrap();
        assert_eq!((m.mean, m.sigma, m.dof), (0.0, 0.0, None));
    }

    #[test]
    fn too_few_keys() {
        let one = vec![vec![random_key(8, 1)]];
        assert!(matches!(unlike_sample(&one, 10, 0), Err(Error::InsufficientKeys { .. })));
        assert!(matches!(like_sample(&one), Err(Error::InsufficientKeys { .. })));
        assert!(inter_sample(&[random_key(8, 1)], &[]).is_err());
        let flat = [random_key(8, 1)];
        assert!(collect_sample(SampleInput::Aligned(&flat, &flat), FhdKind::Like).is_err());
    }

    #[test]
    fn subsampling_respects_cap_and_seed() {
        let groups: Vec<Vec<BinaryKey>> = (0..100).map(|s| vec![random_key(128, s)]).collect();
        let a = unlike_sample(&groups, 500, 1).unwrap();
        assert_eq!(a.pair_count(), 500);
        assert_eq!(a, unlike_sample(&groups, 500, 1).unwrap());
        assert_ne!(a, unlike_sample(&groups, 500, 2).unwrap());
        let full = unlike_sample(&groups, DEFAULT_PAIR_CAP, 1).unwrap();
        assert_eq!(full.pair_count(), 4950);
        let (ma, mf) = (fit_stats(&a).unwrap().mean, fit_stats(&full).unwrap().mean);
        assert!((ma - mf).abs() < 0.01);
    }

    #[test]
    fn fit_examples() {
        let s = FhdSample {
            kind: FhdKind::Unlike,
            values: vec![0.5 - 0.02362, 0.5 + 0.02362],
        };
        let st = fit_stats(&s).unwrap();
        assert!((st.dof.unwrap() - 448.0).abs() < 0.5, "{:?}", st.dof);
        let s = FhdSample {
            kind: FhdKind::Unlike,
            values: vec![0.0, 1.0],
        };
        assert!((fit_stats(&s).unwrap().dof.unwrap() - 1.0).abs() < 1e-12);
        let one = FhdSample {
            kind: FhdKind::Like,
            values: vec![0.3],
        };
        assert!(matches!(fit_stats(&one), Err(Error::InsufficientSample { .. })));
    }

    #[test]
    fn random_keys_center_on_half() {
        let groups: Vec<Vec<BinaryKey>> = (0..50).map(|s| vec![random_key(2500, s)]).collect();
        let s = unlike_sample(&groups, DEFAULT_PAIR_CAP, 0).unwrap();
        assert!(s.pair_count() >= 1000);
        let st = fit_stats(&s).unwrap();
        assert!((0.48..=0.52).contains(&st.mean), "{}", st.mean);
    }

    #[test]
    fn dof_recovers_replicated_bit_count() {
        // N* independent bits, each repeated K/N* times
        for n_star in [50usize, 100, 500] {
            let rep = 2500 / n_star;
            let groups: Vec<Vec<BinaryKey>> = (0..80)
                .map(|s| {
                    let mut rng = stream(s, 0x77, n_star as u64);
                    let base: Vec<bool> = (0..n_star).map(|_| rng.gen()).collect();
                    let bits: Vec<bool> = base.iter().flat_map(|&b| std::iter::repeat(b).take(rep)).collect();
                    vec![key(&bits)]
                })
                .collect();
            let st = fit_stats(&unlike_sample(&groups, DEFAULT_PAIR_CAP, 0).unwrap()).unwrap();
            let n = st.dof.unwrap();
            assert!((n - n_star as f64).abs() <= 0.1 * n_star as f64, "N*={n_star} N={n}");
        }
    }

    #[test]
    fn decisions() {
        assert!(decide(0.1, DEFAULT_THRESHOLD).accept);
        assert!(!decide(0.5, DEFAULT_THRESHOLD).accept);
        assert!(!decide(0.2, 0.2).accept);
        assert_eq!(decide(0.1, 0.2).threshold, 0.2);
    }

    #[test]
    fn histogram_bins() {
        let h = histogram(&[0.0, 0.005, 0.01, 0.5, 1.0]);
        assert_eq!(h.len(), 100);
        assert_eq!(h[0], (0.0, 2));
        assert_eq!(h[1].1, 1);
        assert_eq!(h[50].1, 1);
        assert_eq!(h[99], (0.99, 1));
        let mut buf = Vec::new();
        write_histogram_csv(&[0.5], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("bin_left,count\n0.00,0\n"));
        assert!(text.contains("\n0.50,1\n"));
    }

    #[test]
    fn stats_csv_layout() {
        let rows = vec![
            StatsRow {
                kind: "unlike".into(),
                param: 0.0,
                stats: FhdStats::moments(&[0.4, 0.6]).unwrap(),
            },
            StatsRow {
                kind: "like".into(),
                param: 0.0,
                stats: FhdStats::moments(&[0.0, 0.0]).unwrap(),
            },
        ];
        let mut buf = Vec::new();
        write_stats_csv(&rows, &mut buf).unwrap();
        assert_eq!(
            String::from_utf8(buf).unwrap(),
            "kind,param,mean,sigma,dof,n_pairs\nunlike,0,0.500000,0.100000,25.000000,2\nlike,0,0.000000,0.000000,NaN,2\n"
        );
    }

    #[test]
    fn challenge_entropy_readings() {
        let e = challenge_entropy(16);
        assert_eq!(e.per_pixel_bits, 256.0);
        // log2(comb(256, 128)) from exact integer arithmetic
        assert!((e.balanced_bits - 251.672_843_056_970_9).abs() < 1e-9, "{}", e.balanced_bits);
        assert!((challenge_entropy(2).balanced_bits - 6f64.log2()).abs() < 1e-12);
    }

    proptest! {
        #[test]
        fn fhd_is_a_metric(s1 in any::<u64>(), s2 in any::<u64>(), s3 in any::<u64>(), len in 1usize..300) {
            let (a, b, c) = (random_key(len, s1), random_key(len, s2), random_key(len, s3));
            let ab = fhd(&a, &b).unwrap();
            prop_assert_eq!(ab, fhd(&b, &a).unwrap());
            prop_assert_eq!(fhd(&a, &a).unwrap(), 0.0);
            prop_assert_eq!(ab == 0.0, a.bits() == b.bits());
            prop_assert!(fhd(&a, &c).unwrap() <= ab + fhd(&b, &c).unwrap() + 1e-12);
        }

        #[test]
        fn fit_ignores_order(mut v in proptest::collection::vec(0.0f64..1.0, 2..60), seed in any::<u64>()) {
            let st = FhdStats::moments(&v).unwrap();
            let mut rng = stream(seed, 1, 1);
            for i in (1..v.len()).rev() {
                v.swap(i, rng.gen_range(0..=i));
            }
            let st2 = FhdStats::moments(&v).unwrap();
            prop_assert!((st.mean - st2.mean).abs() < 1e-12);
            prop_assert!((st.sigma - st2.sigma).abs() < 1e-12);
        }
    }
}
