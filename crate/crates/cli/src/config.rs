//! Flat `key=value` configuration files. Command-line flags take precedence.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use clap::Args;
use weakcls_core::alignment::ClusterMethod;
use weakcls_core::doc_rep::AttentionMode;
use weakcls_core::pipeline::PipelineConfig;
use weakcls_core::selection::SelectionMode;

const KEYS: &[&str] = &[
    "corpus",
    "class_names",
    "tree",
    "output",
    "t_keywords",
    "min_count",
    "drop_singletons",
    "attention",
    "pca_dim",
    "cluster_method",
    "gmm_max_iters",
    "gmm_tol",
    "delta",
    "selection",
    "seed",
    "threads",
];

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConfigFile {
    values: BTreeMap<String, String>,
}

impl ConfigFile {
    pub fn parse(text: &str) -> Result<Self> {
        let mut values = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("config line {}: expected key=value", i + 1))?;
            let k = k.trim();
            if !KEYS.contains(&k) {
                bail!("config line {}: unknown key '{k}'", i + 1);
            }
            values.insert(k.to_string(), v.trim().to_string());
        }
        Ok(Self { values })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::parse(&text)
    }

    pub fn get<T: FromStr>(&self, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.values
            .get(key)
            .map(|v| {
                v.parse::<T>()
                    .map_err(|e| anyhow!("config key '{key}': {e}"))
            })
            .transpose()
    }

    pub fn path(&self, key: &str) -> Option<PathBuf> {
        self.values.get(key).map(PathBuf::from)
    }
}

/// Pipeline knobs shared by several subcommands.
#[derive(Debug, Clone, Default, Args)]
pub struct PipelineArgs {
    /// Flat key=value config file; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Maximum keywords per class, class name included.
    #[arg(long)]
    pub t_keywords: Option<usize>,
    /// Minimum occurrences for a word to become a keyword.
    #[arg(long)]
    pub min_count: Option<u64>,
    /// Drop words seen only once from the static representation table.
    #[arg(long)]
    pub drop_singletons: bool,
    /// mixture, sig-ctx, sig-static, rel-ctx, rel-static or none.
    #[arg(long)]
    pub attention: Option<String>,
    /// PCA dimension before clustering; 0 disables PCA.
    #[arg(long)]
    pub pca_dim: Option<usize>,
    /// gmm, kmeans or none.
    #[arg(long)]
    pub cluster_method: Option<String>,
    #[arg(long)]
    pub gmm_max_iters: Option<usize>,
    #[arg(long)]
    pub gmm_tol: Option<f64>,
    /// Fraction of most confident documents kept as pseudo-labels.
    #[arg(long)]
    pub delta: Option<f64>,
    /// per-class or global.
    #[arg(long)]
    pub selection: Option<String>,
    #[arg(long)]
    pub seed: Option<u64>,
}

fn pick<T: FromStr>(flag: Option<T>, file: &ConfigFile, key: &str, default: T) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    Ok(match flag {
        Some(v) => v,
        None => file.get(key)?.unwrap_or(default),
    })
}

fn parse_flag<T: FromStr>(flag: &Option<String>) -> Result<Option<T>>
where
    T::Err: std::fmt::Display,
{
    flag.as_deref()
        .map(|s| s.parse::<T>().map_err(|e| anyhow!("{e}")))
        .transpose()
}

impl PipelineArgs {
    pub fn config_file(&self) -> Result<ConfigFile> {
        match &self.config {
            Some(p) => ConfigFile::load(p),
            None => Ok(ConfigFile::default()),
        }
    }

    pub fn resolve(&self, file: &ConfigFile) -> Result<PipelineConfig> {
        let mut c = PipelineConfig::default();
        c.expansion.max_keywords = pick(
            self.t_keywords,
            file,
            "t_keywords",
            c.expansion.max_keywords,
        )?;
        c.expansion.min_count = pick(self.min_count, file, "min_count", c.expansion.min_count)?;
        c.static_reps.drop_singletons =
            self.drop_singletons || file.get("drop_singletons")?.unwrap_or(false);
        c.attention = pick(
            parse_flag::<AttentionMode>(&self.attention)?,
            file,
            "attention",
            c.attention,
        )?;
        c.pca_dim = pick(self.pca_dim, file, "pca_dim", c.pca_dim)?;
        c.cluster_method = pick(
            parse_flag::<ClusterMethod>(&self.cluster_method)?,
            file,
            "cluster_method",
            c.cluster_method,
        )?;
        c.gmm.max_iters = pick(self.gmm_max_iters, file, "gmm_max_iters", c.gmm.max_iters)?;
        c.gmm.tol = pick(self.gmm_tol, file, "gmm_tol", c.gmm.tol)?;
        c.delta = pick(self.delta, file, "delta", c.delta)?;
        c.selection = pick(
            parse_flag::<SelectionMode>(&self.selection)?,
            file,
            "selection",
            c.selection,
        )?;
        c.seed = pick(self.seed, file, "seed", c.seed)?;
        if c.expansion.max_keywords == 0 {
            bail!("t_keywords must be at least 1");
        }
        if !(c.delta > 0.0 && c.delta <= 1.0) {
            bail!("delta must be in (0, 1], got {}", c.delta);
        }
        Ok(c)
    }
}
