//! Run configuration: built-in defaults, then a TOML file, then flags.

use std::path::{Path, PathBuf};

use anyhow::Context;
use clap::Args;
use serde::{Deserialize, Serialize};

/// Every tunable of every subcommand. Unused fields are ignored by a given
/// subcommand but still recorded in the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Mutual-cooperation reward `B`.
    #[serde(rename = "B")]
    pub big_b: f64,
    /// Temptation excess `L`.
    #[serde(rename = "L")]
    pub l: f64,
    /// Coordination potential of the signal device.
    pub b: f64,
    /// Mutual-go mass of the signal device.
    pub g: f64,
    pub beta: f64,
    #[serde(rename = "N")]
    pub n_agents: usize,
    pub seed: u64,
    pub grid: usize,
    pub dt: f64,
    pub t_end: f64,
    pub samples: usize,
    pub rounds: usize,
    /// Norm ids (`4·prescription + description`) taking part in the ABM.
    pub norms: Vec<usize>,
    /// Initial ABM frequencies; empty means uniform.
    pub initial: Vec<f64>,
    /// Store every k-th state of the sample trajectory.
    pub record_every: usize,
    pub dim: usize,
    pub polarization: f64,
    /// `full`, `partial-non-overlapping` or `partial-uninformative`.
    pub inference: String,
    pub out: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            big_b: 3.0,
            l: 0.5,
            b: 0.4,
            g: 0.0,
            beta: 1.0,
            n_agents: 1000,
            seed: 0,
            grid: 200,
            dt: 0.01,
            t_end: 500.0,
            samples: 30,
            rounds: 500,
            norms: vec![0, 5, 10, 15],
            initial: Vec::new(),
            record_every: 100,
            dim: 16,
            polarization: 1.0,
            inference: "full".into(),
            out: PathBuf::from("out"),
        }
    }
}

/// A manifest is a config plus a `[meta]` table; both load as configs.
#[derive(Debug, Clone)]
pub struct Manifest {
    pub config: RunConfig,
    pub meta: Meta,
}

impl Manifest {
    pub fn to_toml(&self) -> anyhow::Result<String> {
        let mut table = toml::Table::try_from(&self.config)?;
        table.insert("meta".into(), toml::Value::try_from(&self.meta)?);
        Ok(toml::to_string(&table)?)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Meta {
    pub command: String,
    pub version: String,
    pub outputs: Vec<String>,
}

impl RunConfig {
    /// Parses a config, ignoring a `[meta]` table.
    pub fn parse(text: &str) -> anyhow::Result<Self> {
        let mut table: toml::Table = toml::from_str(text)?;
        table.remove("meta");
        Ok(table.try_into()?)
    }

    pub fn load(path: &Path) -> anyhow::Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn apply(&mut self, o: &Overrides) {
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = &o.$field {
                    self.$field = v.clone();
                }
            )*};
        }
        set!(big_b, l, b, g, beta, n_agents, seed, grid, dt, t_end, samples, rounds, out);
        set!(record_every, dim, polarization, inference);
        if let Some(v) = &o.norms {
            self.norms = v.clone();
        }
        if let Some(v) = &o.initial {
            self.initial = v.clone();
        }
    }
}

/// Flags shared by every subcommand; each overrides the config file.
#[derive(Debug, Clone, Default, Args)]
pub struct Overrides {
    /// Config file (TOML); a previous run's manifest works too.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long = "B", global = true)]
    pub big_b: Option<f64>,
    #[arg(long = "L", global = true)]
    pub l: Option<f64>,
    #[arg(long, global = true)]
    pub b: Option<f64>,
    #[arg(long, global = true)]
    pub g: Option<f64>,
    /// Selection strength; `inf` for deterministic imitation.
    #[arg(long, global = true)]
    pub beta: Option<f64>,
    /// Number of agents.
    #[arg(long = "N", global = true)]
    pub n_agents: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Grid resolution per axis.
    #[arg(long, global = true)]
    pub grid: Option<usize>,
    #[arg(long, global = true)]
    pub dt: Option<f64>,
    #[arg(long = "t-end", global = true)]
    pub t_end: Option<f64>,
    #[arg(long, global = true)]
    pub samples: Option<usize>,
    #[arg(long, global = true)]
    pub rounds: Option<usize>,
    #[arg(long, global = true, value_delimiter = ',')]
    pub norms: Option<Vec<usize>>,
    #[arg(long, global = true, value_delimiter = ',')]
    pub initial: Option<Vec<f64>>,
    #[arg(long = "record-every", global = true)]
    pub record_every: Option<usize>,
    #[arg(long, global = true)]
    pub dim: Option<usize>,
    #[arg(long, global = true)]
    pub polarization: Option<f64>,
    #[arg(long, global = true)]
    pub inference: Option<String>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}
