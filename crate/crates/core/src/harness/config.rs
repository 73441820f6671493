use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::keygen::GaborConfig;
use crate::optics::OpticsConfig;
use crate::packing::{generate_ls, generate_rsa, PufMask, RSA_LS_SPLIT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Generator {
    /// LS above the RSA/LS split fraction, RSA otherwise.
    Auto,
    Rsa,
    Ls,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleConfig {
    pub side_um: f64,
    pub radius_nm: f64,
    pub packing_fraction: f64,
    pub generator: Generator,
    /// Ignored by LS, which is always periodic.
    pub periodic: bool,
}

impl Default for SampleConfig {
    fn default() -> Self {
        Self {
            side_um: 102.4,
            radius_nm: 200.0,
            packing_fraction: 0.5,
            generator: Generator::Auto,
            periodic: true,
        }
    }
}

impl SampleConfig {
    pub fn generate(&self, seed: u64) -> Result<PufMask> {
        self.generate_at(self.packing_fraction, self.radius_nm, seed)
    }

    pub fn generate_at(&self, fp: f64, radius_nm: f64, seed: u64) -> Result<PufMask> {
        let use_ls = match self.generator {
            Generator::Auto => fp > RSA_LS_SPLIT,
            Generator::Rsa => false,
            Generator::Ls => true,
        };
        if use_ls {
            generate_ls(self.side_um, radius_nm, fp, seed)
        } else {
            generate_rsa(self.side_um, radius_nm, fp, seed, self.periodic)
        }
    }
}

/// Parameter grids per scenario; each is the list of magnitudes swept.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Grids {
    pub pixel_flip: Vec<f64>,
    pub jitter: Vec<f64>,
    pub remove: Vec<f64>,
    pub remove_add: Vec<f64>,
    pub shift: Vec<f64>,
    pub radius: Vec<f64>,
    pub entropy_vs_fp: Vec<f64>,
    pub challenge_size: Vec<f64>,
    /// Sub-grids repeated at every radius.
    pub radius_flips: Vec<f64>,
    pub radius_jitter: Vec<f64>,
    pub radius_shift: Vec<f64>,
}

impl Default for Grids {
    fn default() -> Self {
        Self {
            pixel_flip: vec![1.0, 32.0, 256.0],
            jitter: vec![0.0, 5.0, 10.0, 20.0, 30.0, 35.0],
            remove: vec![0.0, 0.05, 0.1, 0.2, 0.3],
            remove_add: vec![0.0, 0.05, 0.1, 0.2, 0.3],
            shift: vec![0.0, 0.0001, 0.001, 0.01, 0.025, 0.13],
            radius: vec![150.0, 200.0, 400.0],
            entropy_vs_fp: vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7],
            challenge_size: vec![2.0, 4.0, 8.0, 16.0],
            radius_flips: vec![1.0],
            radius_jitter: vec![5.0, 10.0, 20.0],
            radius_shift: vec![0.001, 0.01],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub n_challenges: usize,
    /// Macro-pixels per challenge side.
    pub challenge_m: usize,
    /// Relative detector noise for repeated ("like") measurements.
    pub like_noise: f64,
    /// Repeated measurements per challenge in like samples.
    pub like_repeats: usize,
    pub pair_cap: usize,
    pub threshold: f64,
    /// Independent masks per grid point in the entropy and radius sweeps.
    pub replicates: usize,
    pub register_shift: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            n_challenges: 200,
            challenge_m: 16,
            like_noise: 0.0,
            like_repeats: 2,
            pair_cap: crate::analysis::DEFAULT_PAIR_CAP,
            threshold: crate::analysis::DEFAULT_THRESHOLD,
            replicates: 1,
            register_shift: true,
        }
    }
}

/// Everything a CLI run or scenario depends on, loaded from TOML.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HarnessConfig {
    pub seed: u64,
    pub sample: SampleConfig,
    pub optics: OpticsConfig,
    pub gabor: GaborConfig,
    pub run: RunConfig,
    pub grids: Grids,
}

impl Default for HarnessConfig {
    fn default() -> Self {
        Self {
            seed: 1,
            sample: SampleConfig::default(),
            optics: OpticsConfig::desk(),
            gabor: GaborConfig::default(),
            run: RunConfig::default(),
            grids: Grids::default(),
        }
    }
}

impl HarnessConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    /// Resolved config as `# `-prefixed comment lines.
    pub fn comment_header(&self) -> String {
        let mut out = String::new();
        for line in self.to_toml().lines() {
            out.push_str("# ");
            out.push_str(line);
            out.push('\n');
        }
        out
    }

    pub fn validate(&self) -> Result<()> {
        self.optics.validate()?;
        self.gabor.validate()?;
        self.gabor.key_len(self.optics.window)?;
        if (self.optics.side_um() - self.sample.side_um).abs() > 1e-9 * self.sample.side_um {
            return Err(Error::Config(format!(
                "optics grid covers {} um but the sample side is {} um",
                self.optics.side_um(),
                self.sample.side_um
            )));
        }
        if self.run.n_challenges < 2 {
            return Err(Error::Config("n_challenges must be >= 2".into()));
        }
        if self.run.like_repeats < 2 {
            return Err(Error::Config("like_repeats must be >= 2".into()));
        }
        if self.run.replicates == 0 {
            return Err(Error::Config("replicates must be >= 1".into()));
        }
        Ok(())
    }
}
