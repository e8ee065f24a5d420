//! Run configuration: a TOML file plus command-line overrides.
//!
//! ```toml
//! profile = "desk"            # gossipcop | coaid | desk
//! mode = "N+C+E"
//! out = "runs/desk"
//!
//! [data]
//! dataset = "data.jsonl"      # single file, split 70/10/20 by split_seed
//! # train = "train.jsonl"     # ...or explicit splits
//! # val = "val.jsonl"
//! # test = "test.jsonl"
//! split_seed = 42
//! embeddings = "embeddings.txt"
//! entities = "entities.jsonl" # optional description snapshot
//! lenient = false
//!
//! [model]                     # any hyperparameter, overriding the profile
//! hidden_dim = 8
//! ```
//! Relative paths resolve against the config file's directory.

use std::path::{Path, PathBuf};

use dualcan_core::model::Mode;
use dualcan_core::{HyperParams, Profile};
use serde::Deserialize;

use crate::error::{CliError, CliResult};

pub const DEFAULT_SPLIT_SEED: u64 = 42;

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FileConfig {
    profile: Option<String>,
    mode: Option<String>,
    out: Option<PathBuf>,
    #[serde(default)]
    data: DataSection,
    #[serde(default)]
    model: toml::Table,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct DataSection {
    dataset: Option<PathBuf>,
    train: Option<PathBuf>,
    val: Option<PathBuf>,
    test: Option<PathBuf>,
    split_seed: Option<u64>,
    embeddings: Option<PathBuf>,
    entities: Option<PathBuf>,
    #[serde(default)]
    lenient: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum DataSources {
    Single { path: PathBuf, split_seed: u64 },
    Split { train: PathBuf, val: PathBuf, test: PathBuf },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub profile: Profile,
    pub hp: HyperParams,
    pub mode: Mode,
    pub sources: DataSources,
    pub embeddings: PathBuf,
    pub entities: Option<PathBuf>,
    pub lenient: bool,
    pub out: PathBuf,
}

/// Flag values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub profile: Option<Profile>,
    pub mode: Option<Mode>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

fn config_err(path: &Path, detail: impl Into<String>) -> CliError {
    CliError::Config {
        path: path.display().to_string(),
        detail: detail.into(),
    }
}

fn resolve(base: &Path, p: PathBuf) -> PathBuf {
    if p.is_absolute() {
        p
    } else {
        base.join(p)
    }
}

fn existing(cfg_path: &Path, base: &Path, p: PathBuf, what: &str) -> CliResult<PathBuf> {
    let p = resolve(base, p);
    if !p.is_file() {
        return Err(config_err(cfg_path, format!("{what} file {} does not exist", p.display())));
    }
    Ok(p)
}

/// Profile defaults with `[model]` keys layered on top.
fn merge_hparams(cfg_path: &Path, profile: Profile, table: &toml::Table) -> CliResult<HyperParams> {
    let base = HyperParams::profile(profile);
    let mut merged = match toml::Value::try_from(&base) {
        Ok(toml::Value::Table(t)) => t,
        _ => return Err(config_err(cfg_path, "hyperparameters do not serialise to a table")),
    };
    for (k, v) in table {
        merged.insert(k.clone(), v.clone());
    }
    let hp: HyperParams = toml::Value::Table(merged)
        .try_into()
        .map_err(|e: toml::de::Error| config_err(cfg_path, format!("[model]: {}", e.message())))?;
    hp.validate().map_err(|e| config_err(cfg_path, e.to_string()))?;
    Ok(hp)
}

impl RunConfig {
    pub fn load(path: &Path, overrides: &Overrides) -> CliResult<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| config_err(path, e.to_string()))?;
        Self::parse(&text, path, overrides)
    }

    pub fn parse(text: &str, path: &Path, overrides: &Overrides) -> CliResult<Self> {
        let file: FileConfig = toml::from_str(text).map_err(|e| config_err(path, e.message()))?;
        let base = path.parent().unwrap_or(Path::new("."));

        let profile = match (overrides.profile, &file.profile) {
            (Some(p), _) => p,
            (None, Some(s)) => s.parse().map_err(|e: dualcan_core::Error| config_err(path, e.to_string()))?,
            (None, None) => Profile::GossipCop,
        };
        let mode = match (overrides.mode, &file.mode) {
            (Some(m), _) => m,
            (None, Some(s)) => s.parse().map_err(|e: dualcan_core::Error| config_err(path, e.to_string()))?,
            (None, None) => Mode::Full,
        };
        let mut hp = merge_hparams(path, profile, &file.model)?;
        if let Some(seed) = overrides.seed {
            hp.seed = seed;
        }

        let data = file.data;
        let sources = match (data.dataset, data.train, data.val, data.test) {
            (Some(d), None, None, None) => DataSources::Single {
                path: existing(path, base, d, "dataset")?,
                split_seed: data.split_seed.unwrap_or(DEFAULT_SPLIT_SEED),
            },
            (None, Some(tr), Some(va), Some(te)) => DataSources::Split {
                train: existing(path, base, tr, "train")?,
                val: existing(path, base, va, "val")?,
                test: existing(path, base, te, "test")?,
            },
            _ => {
                return Err(config_err(
                    path,
                    "[data] needs either `dataset` or all of `train`, `val`, `test`",
                ))
            }
        };
        let embeddings = data
            .embeddings
            .ok_or_else(|| config_err(path, "[data] embeddings is required"))?;
        let embeddings = existing(path, base, embeddings, "embeddings")?;
        let entities = data
            .entities
            .map(|e| existing(path, base, e, "entities"))
            .transpose()?;
        let out = match (&overrides.out, file.out) {
            (Some(o), _) => o.clone(),
            (None, Some(o)) => resolve(base, o),
            (None, None) => base.join("runs").join(mode_dir(mode)),
        };
        Ok(Self {
            profile,
            hp,
            mode,
            sources,
            embeddings,
            entities,
            lenient: data.lenient,
            out,
        })
    }
}

/// Filesystem-friendly mode name, e.g. `n-c-e`.
pub fn mode_dir(mode: Mode) -> String {
    mode.to_string().to_lowercase().replace('+', "-")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dir_with(files: &[&str]) -> tempfile::TempDir {
        let d = tempfile::tempdir().unwrap();
        for f in files {
            std::fs::write(d.path().join(f), "").unwrap();
        }
        d
    }

    #[test]
    fn profile_defaults_and_overrides() {
        let d = dir_with(&["data.jsonl", "emb.txt"]);
        let text = r#"
            profile = "coaid"
            [data]
            dataset = "data.jsonl"
            embeddings = "emb.txt"
            [model]
            hidden_dim = 7
        "#;
        let path = d.path().join("c.toml");
        let cfg = RunConfig::parse(text, &path, &Overrides::default()).unwrap();
        assert_eq!(cfg.hp.max_news_sentences, 4);
        assert_eq!(cfg.hp.hidden_dim, 7);
        assert_eq!(cfg.mode, Mode::Full);
        assert_eq!(
            cfg.sources,
            DataSources::Single {
                path: d.path().join("data.jsonl"),
                split_seed: 42
            }
        );

        let o = Overrides {
            profile: Some(Profile::GossipCop),
            mode: Some(Mode::NewsComments),
            seed: Some(5),
            out: Some("/tmp/x".into()),
        };
        let cfg = RunConfig::parse(text, &path, &o).unwrap();
        assert_eq!(cfg.hp.max_news_sentences, 40);
        assert_eq!(cfg.hp.seed, 5);
        assert_eq!(cfg.mode, Mode::NewsComments);
        assert_eq!(cfg.out, PathBuf::from("/tmp/x"));
    }

    #[test]
    fn bad_configs_are_usage_errors() {
        let d = dir_with(&["data.jsonl", "emb.txt"]);
        let path = d.path().join("c.toml");
        for text in [
            "[data]\ndataset = \"missing.jsonl\"\nembeddings = \"emb.txt\"",
            "[data]\ndataset = \"data.jsonl\"",
            "[data]\ndataset = \"data.jsonl\"\nembeddings = \"emb.txt\"\n[model]\nwat = 1",
            "[data]\ndataset = \"data.jsonl\"\nembeddings = \"emb.txt\"\n[model]\nbatch_size = 0",
            "mode = \"X\"\n[data]\ndataset = \"data.jsonl\"\nembeddings = \"emb.txt\"",
            "[data]\ndataset = \"data.jsonl\"\ntrain = \"data.jsonl\"\nembeddings = \"emb.txt\"",
        ] {
            let err = RunConfig::parse(text, &path, &Overrides::default()).unwrap_err();
            assert_eq!(err.exit_code(), 1, "{text}");
        }
    }
}
