//! Experiment configuration: one flat TOML file per experiment.
//!
//! ```toml
//! model = "adsorption"        # or "diffusion"
//! c1 = 1.0                    # adsorption constants, all optional
//! c2 = 1.0
//! beta = 2.0
//! j0 = 0.3
//! h = 0.9
//! n1 = 8
//! n2 = 8
//! decompositions = ["blocks", "stripes"]
//! width = 2
//! schemes = ["lie", "strang"]
//! dt = [0.02, 0.04, 0.08, 0.16]
//! n_steps = 20000
//! seed = 7
//! mode = "sample"             # sample | oracle | both
//! ```

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::lattice::{Decomposition, DecompositionKind, Lattice, SpinConfiguration};
use crate::models::{AdsorptionDesorptionParams, DiffusionParams, RateModel};
use crate::oracle::DENSE_CAP;
use crate::splitting::{default_burn_in, SchemeKind, SchemeSpec};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Mode {
    Sample,
    Oracle,
    Both,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Sample => "sample",
            Mode::Oracle => "oracle",
            Mode::Both => "both",
        }
    }

    pub fn samples(self) -> bool {
        matches!(self, Mode::Sample | Mode::Both)
    }

    pub fn oracle(self) -> bool {
        matches!(self, Mode::Oracle | Mode::Both)
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "sample" => Ok(Mode::Sample),
            "oracle" => Ok(Mode::Oracle),
            "both" => Ok(Mode::Both),
            other => Err(Error::Config(format!("unknown mode `{other}`"))),
        }
    }
}

/// Starting configuration of every sampled chain.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Initial {
    Full,
    Empty,
    /// The first `n/2` sites occupied.
    Half,
}

impl FromStr for Initial {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "full" => Ok(Initial::Full),
            "empty" => Ok(Initial::Empty),
            "half" => Ok(Initial::Half),
            other => Err(Error::Config(format!("unknown initial state `{other}`"))),
        }
    }
}

impl Initial {
    pub fn build(self, n_sites: usize) -> SpinConfiguration {
        match self {
            Initial::Full => SpinConfiguration::full(n_sites),
            Initial::Empty => SpinConfiguration::empty(n_sites),
            Initial::Half => SpinConfiguration::from_spins((0..n_sites).map(|i| u8::from(i < n_sites / 2)).collect()),
        }
    }
}

#[derive(Clone, Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    model: String,
    c1: Option<f64>,
    c2: Option<f64>,
    beta: Option<f64>,
    j0: Option<f64>,
    h: Option<f64>,
    hop: Option<f64>,
    n1: usize,
    n2: usize,
    range: Option<usize>,
    decompositions: Vec<String>,
    width: usize,
    schemes: Vec<String>,
    dt: Vec<f64>,
    n_steps: Option<usize>,
    burn_in: Option<usize>,
    seed: Option<u64>,
    mode: Option<String>,
    output: Option<PathBuf>,
    batches: Option<usize>,
    initial: Option<String>,
    swap_groups: Option<bool>,
}

/// A validated experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub model: RateModel,
    pub n1: usize,
    pub n2: usize,
    pub range: usize,
    pub decompositions: Vec<DecompositionKind>,
    pub width: usize,
    pub schemes: Vec<SchemeKind>,
    pub dt: Vec<f64>,
    pub n_steps: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub mode: Mode,
    pub output: PathBuf,
    pub batches: usize,
    pub initial: Initial,
    pub swap_groups: bool,
}

fn parse_list<T: FromStr<Err = Error>>(items: &[String], what: &str) -> Result<Vec<T>> {
    if items.is_empty() {
        return Err(Error::Config(format!("`{what}` must not be empty")));
    }
    items.iter().map(|s| s.parse()).collect()
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let raw: RawConfig = toml::from_str(text).map_err(|e| Error::Config(e.message().to_string()))?;
        Self::from_raw(raw)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    fn from_raw(raw: RawConfig) -> Result<Self> {
        let model = match raw.model.trim().to_ascii_lowercase().as_str() {
            "adsorption" | "adsorption-desorption" | "adsorption_desorption" => {
                let d = AdsorptionDesorptionParams::default();
                RateModel::adsorption(AdsorptionDesorptionParams {
                    c1: raw.c1.unwrap_or(d.c1),
                    c2: raw.c2.unwrap_or(d.c2),
                    beta: raw.beta.unwrap_or(d.beta),
                    j0: raw.j0.unwrap_or(d.j0),
                    h: raw.h.unwrap_or(d.h),
                })?
            }
            "diffusion" => RateModel::diffusion(DiffusionParams {
                hop: raw.hop.unwrap_or(DiffusionParams::default().hop),
            })?,
            other => return Err(Error::Config(format!("unknown model `{other}`"))),
        };
        let schemes: Vec<SchemeKind> = parse_list(&raw.schemes, "schemes")?;
        if schemes.contains(&SchemeKind::Exact) {
            return Err(Error::Config("the exact skeleton has no leading coefficients; list lie or strang".into()));
        }
        let decompositions = parse_list(&raw.decompositions, "decompositions")?;
        if raw.dt.is_empty() {
            return Err(Error::Config("`dt` must not be empty".into()));
        }
        for &dt in &raw.dt {
            SchemeSpec::new(SchemeKind::Lie, dt)?;
        }
        let mode = match raw.mode {
            Some(m) => m.parse()?,
            None => Mode::Sample,
        };
        let n_steps = raw.n_steps.unwrap_or(0);
        let burn_in = raw.burn_in.unwrap_or_else(|| default_burn_in(n_steps));
        let initial = match raw.initial {
            Some(s) => s.parse()?,
            None if model.conserves_particles() => Initial::Half,
            None => Initial::Full,
        };
        let batches = raw.batches.unwrap_or(crate::estimators::DEFAULT_BATCHES);
        if batches < 2 {
            return Err(Error::Config("`batches` must be at least 2".into()));
        }
        let cfg = Self {
            model,
            n1: raw.n1,
            n2: raw.n2,
            range: raw.range.unwrap_or(1),
            decompositions,
            width: raw.width,
            schemes,
            dt: raw.dt,
            n_steps,
            burn_in,
            seed: raw.seed.unwrap_or(0),
            mode,
            output: raw.output.unwrap_or_else(|| PathBuf::from("results")),
            batches,
            initial,
            swap_groups: raw.swap_groups.unwrap_or(false),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Checks that depend on the mode; rerun after overriding it.
    pub fn revalidated(self) -> Result<Self> {
        self.validate()?;
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        let cfg = self;
        if cfg.mode.samples() && cfg.n_steps <= cfg.burn_in {
            return Err(Error::Config(format!(
                "n_steps ({}) must exceed burn_in ({})",
                cfg.n_steps, cfg.burn_in
            )));
        }
        for &kind in &cfg.decompositions {
            cfg.decomposition(kind)?;
        }
        if cfg.mode.oracle() {
            let n = cfg.n1 * cfg.n2;
            let size = if cfg.model.conserves_particles() {
                let k = n / 2;
                (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i as u128 + 1))
            } else if n < 64 {
                1u128 << n
            } else {
                u128::MAX
            };
            if size > DENSE_CAP as u128 {
                return Err(Error::Config(format!(
                    "oracle mode needs at most {DENSE_CAP} states; {}x{} is too large",
                    cfg.n1, cfg.n2
                )));
            }
        }
        Ok(())
    }

    pub fn lattice(&self) -> Result<Lattice> {
        Lattice::new(self.n1, self.n2, self.range)
    }

    pub fn decomposition(&self, kind: DecompositionKind) -> Result<Decomposition> {
        Decomposition::build(&self.lattice()?, kind, self.width)
    }

    pub fn scheme(&self, kind: SchemeKind, dt: f64) -> Result<SchemeSpec> {
        let s = SchemeSpec::new(kind, dt)?;
        Ok(if self.swap_groups { s.with_swapped_groups() } else { s })
    }

    pub fn initial_state(&self) -> SpinConfiguration {
        self.initial.build(self.n1 * self.n2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
model = "adsorption"
n1 = 4
n2 = 4
decompositions = ["blocks", "stripes"]
width = 2
schemes = ["lie", "strang"]
dt = [0.05, 0.1]
n_steps = 100
seed = 3
"#;

    #[test]
    fn parses_defaults() {
        let c = ExperimentConfig::from_toml(BASE).unwrap();
        assert_eq!(c.model, RateModel::adsorption(AdsorptionDesorptionParams::default()).unwrap());
        assert_eq!(c.burn_in, 10);
        assert_eq!(c.mode, Mode::Sample);
        assert_eq!(c.batches, 32);
        assert_eq!(c.initial_state(), SpinConfiguration::full(16));
        assert_eq!(c.schemes, vec![SchemeKind::Lie, SchemeKind::Strang]);
    }

    #[test]
    fn rejects_empty_dt_and_bad_keys() {
        let empty = BASE.replace("dt = [0.05, 0.1]", "dt = []");
        assert!(matches!(ExperimentConfig::from_toml(&empty), Err(Error::Config(_))));
        let neg = BASE.replace("dt = [0.05, 0.1]", "dt = [-0.1]");
        assert!(ExperimentConfig::from_toml(&neg).is_err());
        let typo = format!("{BASE}\nseeds = 4\n");
        assert!(ExperimentConfig::from_toml(&typo).is_err());
        let short = BASE.replace("n_steps = 100", "n_steps = 10\nburn_in = 10");
        assert!(ExperimentConfig::from_toml(&short).is_err());
        let exact = BASE.replace(r#"["lie", "strang"]"#, r#"["exact"]"#);
        assert!(ExperimentConfig::from_toml(&exact).is_err());
    }

    #[test]
    fn oracle_mode_respects_state_cap() {
        let big = format!("{BASE}\nmode = \"oracle\"\n");
        assert!(ExperimentConfig::from_toml(&big).is_err());
        let small = big.replace("n1 = 4", "n1 = 2").replace("n2 = 4", "n2 = 2");
        let small = small.replace("width = 2", "width = 1");
        assert_eq!(ExperimentConfig::from_toml(&small).unwrap().mode, Mode::Oracle);
    }

    #[test]
    fn diffusion_defaults_to_half_filling() {
        let d = BASE.replace(r#"model = "adsorption""#, r#"model = "diffusion""#);
        let c = ExperimentConfig::from_toml(&d).unwrap();
        assert_eq!(c.initial_state().occupancy(), 8);
    }
}
