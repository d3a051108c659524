//! Experiment configuration: one declarative TOML file plus flag
//! overrides (flags win), resolved into an explicit cell grid.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use ceol_core::{SamplingStrategy, DEFAULT_MAX_LAG};
use clap::Args;
use serde::Deserialize;

/// On-disk schema. Every field is optional here so flags can fill gaps;
/// [`ExperimentConfig::resolve`] enforces what must end up present.
#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConfigFile {
    pub corpus: Option<Vec<PathBuf>>,
    pub split_seed: Option<u64>,
    pub generation_seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub samples_per_cell: Option<usize>,
    pub max_len: Option<usize>,
    pub max_lag: Option<usize>,
    pub degradations: Option<Vec<String>>,
    pub strategies: Option<Vec<String>>,
    pub taus: Option<Vec<f64>>,
    pub topk_ks: Option<Vec<usize>>,
    pub model: Option<ModelSection>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub order: Option<usize>,
    pub alpha: Option<f64>,
}

/// Flag overrides shared by `run` and `sweep`. List-valued flags replace
/// the whole list, they do not append.
#[derive(Debug, Default, Args)]
pub struct Overrides {
    /// Score files (JSON lines), comma separated.
    #[arg(long, value_delimiter = ',')]
    pub corpus: Option<Vec<PathBuf>>,
    #[arg(long)]
    pub split_seed: Option<u64>,
    #[arg(long)]
    pub generation_seed: Option<u64>,
    #[arg(long)]
    pub output_dir: Option<PathBuf>,
    #[arg(long)]
    pub samples_per_cell: Option<usize>,
    /// Generation length cap; defaults to the 80th-percentile training length.
    #[arg(long)]
    pub max_len: Option<usize>,
    #[arg(long)]
    pub max_lag: Option<usize>,
    /// Degradation descriptors (none | temperature:R | noise:K:SEED), comma separated.
    #[arg(long, value_delimiter = ',')]
    pub degradations: Option<Vec<String>>,
    /// Strategy families (conventional | nucleus | typical | topk), comma separated.
    #[arg(long, value_delimiter = ',')]
    pub strategies: Option<Vec<String>>,
    #[arg(long, value_delimiter = ',')]
    pub taus: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    pub topk_ks: Option<Vec<usize>>,
    #[arg(long)]
    pub order: Option<usize>,
    #[arg(long)]
    pub alpha: Option<f64>,
}

/// A model corruption to materialize before sampling.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Degradation {
    None,
    Temperature { r: f64 },
    Noise { k: f64, seed: u64 },
}

impl fmt::Display for Degradation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Degradation::None => write!(f, "none"),
            Degradation::Temperature { r } => write!(f, "temperature:{r}"),
            Degradation::Noise { k, seed } => write!(f, "noise:{k}:{seed}"),
        }
    }
}

impl FromStr for Degradation {
    type Err = anyhow::Error;

    fn from_str(descriptor: &str) -> Result<Self> {
        let bad = || {
            anyhow::anyhow!(
                "bad degradation descriptor {descriptor:?} \
                 (expected none, temperature:R or noise:K:SEED)"
            )
        };
        if descriptor == "none" {
            return Ok(Degradation::None);
        }
        match descriptor.split_once(':') {
            Some(("temperature", r)) => Ok(Degradation::Temperature {
                r: r.parse().map_err(|_| bad())?,
            }),
            Some(("noise", rest)) => {
                let (k, seed) = rest.split_once(':').ok_or_else(bad)?;
                Ok(Degradation::Noise {
                    k: k.parse().map_err(|_| bad())?,
                    seed: seed.parse().map_err(|_| bad())?,
                })
            }
            _ => Err(bad()),
        }
    }
}

impl Degradation {
    /// Descriptor with `:` flattened out, safe as a file stem.
    pub fn file_stem(&self) -> String {
        self.to_string().replace(':', "-")
    }
}

/// One strategy column of the grid. `family` and `tau_index` feed the
/// per-cell seed derivation, so adding a tau to the grid never changes
/// the seeds of existing cells.
#[derive(Debug, Clone)]
pub struct StrategyCell {
    pub strategy: SamplingStrategy,
    pub family: &'static str,
    pub tau_index: u64,
}

impl StrategyCell {
    pub fn descriptor(&self) -> String {
        self.strategy.to_string()
    }

    pub fn file_stem(&self) -> String {
        self.descriptor().replace(':', "-")
    }
}

/// Fully resolved experiment: every seed explicit, grid expanded.
#[derive(Debug)]
pub struct ExperimentConfig {
    pub corpus: Vec<PathBuf>,
    pub split_seed: u64,
    pub generation_seed: u64,
    pub output_dir: PathBuf,
    pub samples_per_cell: usize,
    /// `None` means derive from the training partition after splitting.
    pub max_len: Option<usize>,
    pub max_lag: usize,
    pub order: usize,
    pub alpha: f64,
    pub degradations: Vec<Degradation>,
    pub strategy_cells: Vec<StrategyCell>,
}

impl ExperimentConfig {
    pub fn load(config_path: Option<&PathBuf>, overrides: &Overrides) -> Result<Self> {
        let file = match config_path {
            Some(path) => {
                let text = std::fs::read_to_string(path)
                    .with_context(|| format!("config: reading {}", path.display()))?;
                toml::from_str(&text)
                    .with_context(|| format!("config: parsing {}", path.display()))?
            }
            None => ConfigFile::default(),
        };
        Self::resolve(file, overrides)
    }

    pub fn resolve(file: ConfigFile, flags: &Overrides) -> Result<Self> {
        let model = file.model.unwrap_or_default();
        let corpus = flags
            .corpus
            .clone()
            .or(file.corpus)
            .context("config: no corpus files given")?;
        let split_seed = flags
            .split_seed
            .or(file.split_seed)
            .context("config: split_seed must be explicit")?;
        let generation_seed = flags
            .generation_seed
            .or(file.generation_seed)
            .context("config: generation_seed must be explicit")?;
        let output_dir = flags
            .output_dir
            .clone()
            .or(file.output_dir)
            .context("config: no output_dir given")?;
        let samples_per_cell = flags
            .samples_per_cell
            .or(file.samples_per_cell)
            .unwrap_or(200);
        let max_len = flags.max_len.or(file.max_len);
        let max_lag = flags.max_lag.or(file.max_lag).unwrap_or(DEFAULT_MAX_LAG);
        let order = flags.order.or(model.order).unwrap_or(4);
        let alpha = flags.alpha.or(model.alpha).unwrap_or(0.01);

        let degradation_names = flags
            .degradations
            .clone()
            .or(file.degradations)
            .unwrap_or_else(|| vec!["none".to_string()]);
        let degradations = degradation_names
            .iter()
            .map(|d| d.parse())
            .collect::<Result<Vec<Degradation>>>()
            .context("config")?;

        let families = flags
            .strategies
            .clone()
            .or(file.strategies)
            .context("config: no strategies given")?;
        let taus = flags.taus.clone().or(file.taus).unwrap_or_default();
        let topk_ks = flags.topk_ks.clone().or(file.topk_ks).unwrap_or_default();
        let strategy_cells =
            expand_strategies(&families, &taus, &topk_ks).context("config")?;

        if corpus.is_empty() {
            bail!("config: corpus list is empty");
        }
        if samples_per_cell < 1 {
            bail!("config: samples_per_cell must be at least 1");
        }
        if degradations.is_empty() {
            bail!("config: degradation list is empty");
        }
        if strategy_cells.is_empty() {
            bail!("config: the strategy grid is empty");
        }

        Ok(ExperimentConfig {
            corpus,
            split_seed,
            generation_seed,
            output_dir,
            samples_per_cell,
            max_len,
            max_lag,
            order,
            alpha,
            degradations,
            strategy_cells,
        })
    }
}

/// Cross each tau-taking family with the tau list; conventional is a
/// single cell and topk crosses with `topk_ks` instead.
fn expand_strategies(
    families: &[String],
    taus: &[f64],
    topk_ks: &[usize],
) -> Result<Vec<StrategyCell>> {
    let mut cells = Vec::new();
    for family in families {
        match family.as_str() {
            "conventional" => cells.push(StrategyCell {
                strategy: SamplingStrategy::Conventional,
                family: "conventional",
                tau_index: 0,
            }),
            "nucleus" | "typical" => {
                if taus.is_empty() {
                    bail!("strategy family {family} needs a non-empty taus list");
                }
                for (i, &tau) in taus.iter().enumerate() {
                    let strategy = if family == "nucleus" {
                        SamplingStrategy::nucleus(tau)?
                    } else {
                        SamplingStrategy::typical(tau)?
                    };
                    cells.push(StrategyCell {
                        strategy,
                        family: if family == "nucleus" { "nucleus" } else { "typical" },
                        tau_index: i as u64,
                    });
                }
            }
            "topk" => {
                if topk_ks.is_empty() {
                    bail!("strategy family topk needs a non-empty topk_ks list");
                }
                for (i, &k) in topk_ks.iter().enumerate() {
                    cells.push(StrategyCell {
                        strategy: SamplingStrategy::top_k(k)?,
                        family: "topk",
                        tau_index: i as u64,
                    });
                }
            }
            other => bail!(
                "unknown strategy family {other:?} \
                 (expected conventional, nucleus, typical or topk)"
            ),
        }
    }
    Ok(cells)
}
