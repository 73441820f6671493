use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use optpuf::analysis::{
    inter_sample, like_sample, unlike_sample, write_histogram_csv, write_stats_csv, FhdKind, FhdStats, StatsRow,
};
use optpuf::harness::{
    challenge_seed, mask_seed, run_scenario, Generator, HarnessConfig, ScenarioKind, ScenarioSpec,
};
use optpuf::keygen::{hash_response, read_keys, write_keys, BinaryKey};
use optpuf::optics::{generate_challenge, read_challenges, read_raw, simulate_response, write_challenges};
use optpuf::packing::PufMask;
use optpuf::protocol::{authenticate, enroll, simulated_responder, CrpDatabase};

#[derive(Parser)]
#[command(name = "optpuf", version, about = "Simulate and analyse 2D diffraction-based optical PUFs")]
struct Cli {
    /// TOML configuration; defaults to the desk-scale preset.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed, overriding the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum Kind {
    Like,
    Unlike,
    Inter,
}

#[derive(Subcommand)]
enum Cmd {
    /// Write a hole layout to mask.txt.
    GenerateMask {
        #[arg(long)]
        fp: Option<f64>,
        #[arg(long)]
        radius_nm: Option<f64>,
        #[arg(long, value_parser = parse_generator)]
        generator: Option<Generator>,
        /// Replicate index folded into the mask seed.
        #[arg(long, default_value_t = 0)]
        replicate: u64,
    },
    /// Write balanced random challenges to challenges.txt.
    GenerateChallenges {
        #[arg(short, long)]
        n: Option<usize>,
        #[arg(short, long)]
        m: Option<usize>,
    },
    /// Simulate every challenge on a mask; writes responses/NNNNN.raw.
    Simulate {
        #[arg(long)]
        mask: PathBuf,
        #[arg(long)]
        challenges: PathBuf,
        /// Also write 16-bit graymaps.
        #[arg(long)]
        pgm: bool,
    },
    /// Hash raw responses into keys.txt.
    Hash {
        #[arg(required = true)]
        responses: Vec<PathBuf>,
    },
    /// FHD statistics of key files into stats.csv and hist.csv.
    ///
    /// `like` groups keys with equal fingerprints, `unlike` compares
    /// distinct groups, `inter` pairs two files line by line.
    Stats {
        #[arg(long, value_enum)]
        kind: Kind,
        #[arg(long, required = true)]
        keys: Vec<PathBuf>,
    },
    /// Run a perturbation sweep; writes <name>.csv.
    Scenario {
        name: String,
        /// Comma-separated grid overriding the configured one.
        #[arg(long, value_delimiter = ',')]
        grid: Option<Vec<f64>>,
        /// Also write one histogram per row to <name>_hist/.
        #[arg(long)]
        hist: bool,
    },
    /// Enroll CRPs of a mask into crpdb.txt.
    Enroll {
        #[arg(long)]
        mask: PathBuf,
        #[arg(short, long, default_value_t = 200)]
        n: usize,
    },
    /// Authenticate a device against a database, consuming one CRP per session.
    Authenticate {
        #[arg(long)]
        db: PathBuf,
        /// Mask of the device under test.
        #[arg(long)]
        mask: PathBuf,
        #[arg(long, default_value_t = 1)]
        sessions: usize,
    },
}

fn parse_generator(s: &str) -> std::result::Result<Generator, String> {
    match s {
        "auto" => Ok(Generator::Auto),
        "rsa" => Ok(Generator::Rsa),
        "ls" => Ok(Generator::Ls),
        _ => Err(format!("unknown generator '{s}' (auto, rsa, ls)")),
    }
}

fn load_config(cli: &Cli) -> Result<HarnessConfig> {
    let mut cfg = match &cli.config {
        Some(p) => HarnessConfig::from_toml(&fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?)?,
        None => HarnessConfig::default(),
    };
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    Ok(BufReader::new(File::open(path).with_context(|| format!("opening {}", path.display()))?))
}

fn read_mask(path: &Path) -> Result<PufMask> {
    PufMask::read_from(open(path)?).with_context(|| format!("parsing {}", path.display()))
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global()?;
    }
    let mut cfg = load_config(&cli)?;
    fs::create_dir_all(&cli.out)?;
    let out = cli.out.as_path();

    match cli.cmd {
        Cmd::GenerateMask {
            fp,
            radius_nm,
            generator,
            replicate,
        } => {
            if let Some(v) = fp {
                cfg.sample.packing_fraction = v;
            }
            if let Some(v) = radius_nm {
                cfg.sample.radius_nm = v;
            }
            if let Some(g) = generator {
                cfg.sample.generator = g;
            }
            let mask = cfg.sample.generate(mask_seed(cfg.seed, replicate))?;
            let path = out.join("mask.txt");
            let mut w = create(&path)?;
            mask.write_to(&mut w)?;
            w.flush()?;
            println!("{} discs, f_p = {:.5} -> {}", mask.len(), mask.packing_fraction(), path.display());
        }
        Cmd::GenerateChallenges { n, m } => {
            let n = n.unwrap_or(cfg.run.n_challenges);
            let m = m.unwrap_or(cfg.run.challenge_m);
            let cs = (0..n as u64)
                .map(|i| generate_challenge(m, challenge_seed(cfg.seed, i)))
                .collect::<optpuf::Result<Vec<_>>>()?;
            let path = out.join("challenges.txt");
            let mut w = create(&path)?;
            write_challenges(&cs, &mut w)?;
            w.flush()?;
            println!("{n} challenges of {m}x{m} -> {}", path.display());
        }
        Cmd::Simulate { mask, challenges, pgm } => {
            use rayon::prelude::*;
            let mask = read_mask(&mask)?;
            let cs = read_challenges(&fs::read_to_string(&challenges)?)?;
            let dir = out.join("responses");
            fs::create_dir_all(&dir)?;
            let optics = &cfg.optics;
            cs.par_iter().enumerate().try_for_each(|(i, c)| -> Result<()> {
                let r = simulate_response(&mask, c, optics)?;
                let mut w = create(&dir.join(format!("{i:05}.raw")))?;
                r.write_raw(&mut w)?;
                w.flush()?;
                if pgm {
                    let mut w = create(&dir.join(format!("{i:05}.pgm")))?;
                    r.write_pgm(&mut w)?;
                    w.flush()?;
                }
                Ok(())
            })?;
            println!("{} responses -> {}", cs.len(), dir.display());
        }
        Cmd::Hash { responses } => {
            let keys = responses
                .iter()
                .map(|p| {
                    let r = read_raw(open(p)?).with_context(|| format!("parsing {}", p.display()))?;
                    Ok(hash_response(&r, &cfg.gabor)?)
                })
                .collect::<Result<Vec<BinaryKey>>>()?;
            let path = out.join("keys.txt");
            let mut w = create(&path)?;
            write_keys(&keys, &mut w)?;
            w.flush()?;
            println!("{} keys of {} bits -> {}", keys.len(), keys[0].len(), path.display());
        }
        Cmd::Stats { kind, keys } => {
            let len = cfg.gabor.key_len(cfg.optics.window)?;
            let files = keys
                .iter()
                .map(|p| read_keys(open(p)?, len).with_context(|| format!("parsing {}", p.display())))
                .collect::<Result<Vec<_>>>()?;
            let (fk, sample) = match kind {
                Kind::Inter => {
                    if files.len() != 2 {
                        bail!("inter statistics need exactly two key files");
                    }
                    let a: Vec<BinaryKey> = files[0].iter().map(|(_, k)| k.clone()).collect();
                    let b: Vec<BinaryKey> = files[1].iter().map(|(_, k)| k.clone()).collect();
                    (FhdKind::Inter, inter_sample(&a, &b)?)
                }
                Kind::Like | Kind::Unlike => {
                    let mut groups: Vec<(u64, Vec<BinaryKey>)> = Vec::new();
                    for (fp, k) in files.into_iter().flatten() {
                        match groups.iter_mut().find(|(g, _)| *g == fp) {
                            Some((_, v)) => v.push(k),
                            None => groups.push((fp, vec![k])),
                        }
                    }
                    let groups: Vec<Vec<BinaryKey>> = groups.into_iter().map(|(_, v)| v).collect();
                    if matches!(kind, Kind::Like) {
                        (FhdKind::Like, like_sample(&groups)?)
                    } else {
                        (FhdKind::Unlike, unlike_sample(&groups, cfg.run.pair_cap, cfg.seed)?)
                    }
                }
            };
            let stats = FhdStats::moments(&sample.values)?;
            let path = out.join("stats.csv");
            let mut w = create(&path)?;
            w.write_all(cfg.comment_header().as_bytes())?;
            write_stats_csv(
                &[StatsRow {
                    kind: fk.to_string(),
                    param: 0.0,
                    stats,
                }],
                &mut w,
            )?;
            w.flush()?;
            let mut h = create(&out.join("hist.csv"))?;
            write_histogram_csv(&sample.values, &mut h)?;
            h.flush()?;
            println!(
                "{fk}: <p> = {:.6}, sigma = {:.6}, N = {}, pairs = {}",
                stats.mean,
                stats.sigma,
                stats.dof.map_or_else(|| "NaN".into(), |v| format!("{v:.1}")),
                stats.n
            );
        }
        Cmd::Scenario { name, grid, hist } => {
            let kind: ScenarioKind = name.parse()?;
            let mut spec = ScenarioSpec::new(kind, cfg);
            if let Some(g) = grid {
                spec = spec.with_grid(g);
            }
            let res = run_scenario(&spec)?;
            let path = out.join(format!("{kind}.csv"));
            let mut w = create(&path)?;
            res.write_csv(&spec.config, &mut w)?;
            w.flush()?;
            if hist {
                let dir = out.join(format!("{kind}_hist"));
                fs::create_dir_all(&dir)?;
                for (i, row) in res.rows.iter().enumerate() {
                    let mut h = create(&dir.join(format!("{i:03}_{}_{}.csv", row.kind, row.param)))?;
                    writeln!(h, "# tag = {:?}", row.tag)?;
                    write_histogram_csv(&row.values, &mut h)?;
                    h.flush()?;
                }
            }
            for r in &res.rows {
                println!("{:<24} {:<7} {:>10} <p> = {:.4} sigma = {:.4}", r.tag, r.kind, r.param, r.stats.mean, r.stats.sigma);
            }
            println!("-> {}", path.display());
        }
        Cmd::Enroll { mask, n } => {
            let mask = read_mask(&mask)?;
            let mut db = enroll(&mask, n, cfg.run.challenge_m, &cfg.optics, &cfg.gabor, cfg.seed)?;
            db.threshold = cfg.run.threshold;
            let path = out.join("crpdb.txt");
            let mut w = create(&path)?;
            db.write_to(&mut w)?;
            w.flush()?;
            println!("{n} CRPs for device {} -> {}", db.device, path.display());
        }
        Cmd::Authenticate { db: db_path, mask, sessions } => {
            let mut db = CrpDatabase::read_from(open(&db_path)?)?;
            if db.optics_hash != cfg.optics.fingerprint() || db.gabor_hash != cfg.gabor.fingerprint() {
                bail!("database was enrolled under a different optics or gabor configuration");
            }
            let mask = read_mask(&mask)?;
            let mut responder = simulated_responder(&mask, &cfg.optics, &cfg.gabor)?;
            let mut result = Ok(());
            for _ in 0..sessions {
                match authenticate(&mut db, &mut responder) {
                    Ok(o) => println!(
                        "record {} seed {} fhd {:.4} {}",
                        o.record,
                        o.seed,
                        o.decision.fhd,
                        if o.decision.accept { "ACCEPT" } else { "REJECT" }
                    ),
                    Err(e) => {
                        result = Err(e);
                        break;
                    }
                }
            }
            // used records are persisted even when a session fails
            let mut w = create(&db_path)?;
            db.write_to(&mut w)?;
            w.flush()?;
            result?;
        }
    }
    Ok(())
}
