use std::fs;
use std::path::{Path, PathBuf};

use dualcan_core::data::synth::{gen_synthetic, SynthSpec};
use dualcan_core::data::{Document, EmbeddingTable, EncodedDocument};
use dualcan_core::layers::ParamTree;
use dualcan_core::metrics::MetricsReport;
use dualcan_core::model::{evaluate, train, Checkpoint, EpochLog, ModelParams};
use dualcan_core::{Error, HyperParams};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{CliError, CliResult};
use crate::heatmap::{self, Column};
use crate::pipeline::{apply_mode, encode_all, load_resolver, prepare, read_splits};

pub const INIT_CHECKPOINT: &str = "init.ckpt";
pub const BEST_CHECKPOINT: &str = "model.ckpt";
pub const EPOCH_LOG: &str = "epochs.csv";
pub const METRICS_FILE: &str = "metrics.json";
pub const ATTENTION_FILE: &str = "attention.json";
pub const SYNTH_CONFIG: &str = "dualcan.toml";

fn io_error(path: &Path, source: std::io::Error) -> CliError {
    CliError::Core(Error::Io {
        path: path.display().to_string(),
        source,
    })
}

fn create_dir(dir: &Path) -> CliResult<()> {
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))
}

fn write_file(path: &Path, contents: impl AsRef<[u8]>) -> CliResult<()> {
    fs::write(path, contents).map_err(|e| io_error(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value).expect("report types serialise");
    write_file(path, text + "\n")
}

#[derive(Debug, Clone)]
pub struct TrainSummary {
    pub out: PathBuf,
    pub best_epoch: usize,
    pub epochs: Vec<EpochLog>,
    pub test_metrics: Option<MetricsReport>,
}

pub fn cmd_train(cfg: &RunConfig) -> CliResult<TrainSummary> {
    let prepared = prepare(cfg)?;
    for w in &prepared.warnings {
        eprintln!("warning: {w}");
    }
    let train_set = apply_mode(&prepared.encoded.train, cfg.mode);
    let val_set = apply_mode(&prepared.encoded.val, cfg.mode);
    let test_set = apply_mode(&prepared.encoded.test, cfg.mode);
    eprintln!(
        "train {} / val {} / test {} samples, vocab {}, {} parameters, mode {}",
        train_set.len(),
        val_set.len(),
        test_set.len(),
        prepared.vocab.len(),
        parameter_count(&cfg.hp),
        cfg.mode
    );

    create_dir(&cfg.out)?;
    let init = ModelParams::init(&cfg.hp, cfg.hp.seed);
    checkpoint(cfg, init.clone()).save(cfg.out.join(INIT_CHECKPOINT))?;

    let outcome = train(init, &train_set, &val_set, &prepared.embeddings, &cfg.hp, |e| {
        eprintln!(
            "epoch {:>3}  train loss {:.6}  val loss {:.6}  val acc {:.4}  val macro-F1 {:.4}{}",
            e.epoch,
            e.train_loss,
            e.val_loss,
            e.val_accuracy,
            e.val_f1_macro,
            if e.improved { "  *" } else { "" }
        );
    })?;

    let log_path = cfg.out.join(EPOCH_LOG);
    let csv_error = |e: csv::Error| io_error(&log_path, std::io::Error::other(e.to_string()));
    let mut csv = csv::Writer::from_path(&log_path).map_err(csv_error)?;
    for e in &outcome.log {
        csv.serialize(e).map_err(csv_error)?;
    }
    csv.flush().map_err(|e| io_error(&log_path, e))?;

    checkpoint(cfg, outcome.best.clone()).save(cfg.out.join(BEST_CHECKPOINT))?;

    let test_metrics = if test_set.is_empty() {
        eprintln!("warning: empty test split, no metrics written");
        None
    } else {
        let ev = evaluate(&outcome.best, &test_set, &prepared.embeddings)?;
        write_json(&cfg.out.join(METRICS_FILE), &ev.metrics)?;
        println!("{}", serde_json::to_string(&ev.metrics).expect("metrics serialise"));
        Some(ev.metrics)
    };
    Ok(TrainSummary {
        out: cfg.out.clone(),
        best_epoch: outcome.best_epoch,
        epochs: outcome.log,
        test_metrics,
    })
}

fn checkpoint(cfg: &RunConfig, params: ModelParams<dualcan_core::Tensor>) -> Checkpoint {
    let mut ck = Checkpoint::new(cfg.hp.clone(), params);
    ck.meta.insert("mode".into(), cfg.mode.to_string());
    ck.meta.insert("profile".into(), cfg.profile.to_string());
    ck
}

/// Which samples `eval` and `explain` read.
#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    /// One split of the configured data: `train`, `val` or `test`.
    Split(String),
    /// A separate dataset file, evaluated whole.
    File(PathBuf),
}

struct Loaded {
    checkpoint: Checkpoint,
    documents: Vec<Document>,
    samples: Vec<EncodedDocument>,
    embeddings: EmbeddingTable,
}

fn check_compatible(ck: &HyperParams, cfg: &HyperParams) -> CliResult<()> {
    for ((name, a), (_, b)) in ck.structural().iter().zip(cfg.structural().iter()) {
        if a != b {
            return Err(CliError::Core(Error::Contract(format!(
                "checkpoint has {name} = {a} but the configuration encodes with {b}"
            ))));
        }
    }
    Ok(())
}

fn load_target(cfg: &RunConfig, ckpt: &Path, target: &Target) -> CliResult<Loaded> {
    let checkpoint = Checkpoint::load(ckpt)?;
    check_compatible(&checkpoint.hp, &cfg.hp)?;
    let mut warnings = Vec::new();
    let documents = match target {
        Target::Split(name) => {
            let splits = read_splits(cfg, &mut warnings)?;
            splits
                .get(name)
                .ok_or_else(|| CliError::Usage(format!("unknown split `{name}`")))?
                .to_vec()
        }
        Target::File(path) => {
            let mode = if cfg.lenient {
                dualcan_core::data::ReadMode::Lenient
            } else {
                dualcan_core::data::ReadMode::Strict
            };
            let out = dualcan_core::data::read_dataset(path, mode)?;
            warnings.extend(out.warnings);
            out.documents
        }
    };
    for w in &warnings {
        eprintln!("warning: {w}");
    }
    if documents.is_empty() {
        return Err(CliError::Core(Error::Contract("no samples to evaluate".into())));
    }
    let resolver = load_resolver(cfg)?;
    let refs: Vec<&Document> = documents.iter().collect();
    let (_, embeddings, encoded) = encode_all(&refs, cfg, resolver.as_ref())?;
    Ok(Loaded {
        checkpoint,
        samples: apply_mode(&encoded, cfg.mode),
        documents,
        embeddings,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    pub mode: String,
    pub samples: usize,
    pub metrics: MetricsReport,
}

/// Writes `eval-<mode>.json` (the metrics object) into the output directory.
pub fn cmd_eval(cfg: &RunConfig, ckpt: &Path, target: &Target) -> CliResult<EvalSummary> {
    let loaded = load_target(cfg, ckpt, target)?;
    let ev = evaluate(&loaded.checkpoint.params, &loaded.samples, &loaded.embeddings)?;
    create_dir(&cfg.out)?;
    let name = format!("eval-{}.json", crate::config::mode_dir(cfg.mode));
    write_json(&cfg.out.join(name), &ev.metrics)?;
    println!("{}", serde_json::to_string(&ev.metrics).expect("metrics serialise"));
    Ok(EvalSummary {
        mode: cfg.mode.to_string(),
        samples: loaded.samples.len(),
        metrics: ev.metrics,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleAttention {
    pub id: String,
    pub label: u8,
    pub prediction: u8,
    pub probabilities: [f64; 2],
    pub a_s1: Vec<f64>,
    pub a_d: Vec<f64>,
    pub a_s2: Vec<f64>,
    pub a_c: Vec<f64>,
    pub news_mask: Vec<bool>,
    pub entity_mask: Vec<bool>,
    pub comment_mask: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttentionReportFile {
    pub mode: String,
    pub samples: Vec<SampleAttention>,
    pub skipped: Vec<String>,
}

pub const HEATMAP_FAMILIES: [&str; 4] = ["a_s1", "a_d", "a_s2", "a_c"];

/// Attention report and heatmaps for `ids` (every sample of the target
/// when `None`). Unknown ids are listed as skipped.
pub fn cmd_explain(
    cfg: &RunConfig,
    ckpt: &Path,
    target: &Target,
    ids: Option<&[String]>,
) -> CliResult<AttentionReportFile> {
    let loaded = load_target(cfg, ckpt, target)?;
    let wanted: Vec<String> = match ids {
        Some(ids) => ids.to_vec(),
        None => loaded.documents.iter().map(|d| d.id.clone()).collect(),
    };
    let mut samples = Vec::new();
    let mut skipped = Vec::new();
    for id in &wanted {
        let Some(sample) = loaded.samples.iter().find(|s| &s.id == id) else {
            skipped.push(id.clone());
            continue;
        };
        let p = dualcan_core::model::predict(&loaded.checkpoint.params, sample, &loaded.embeddings)?;
        let a = p.attention;
        samples.push(SampleAttention {
            id: p.id,
            label: p.label,
            prediction: p.pred,
            probabilities: p.probs,
            a_s1: a.a_s1,
            a_d: a.a_d,
            a_s2: a.a_s2,
            a_c: a.a_c,
            news_mask: a.news_mask,
            entity_mask: a.entity_mask,
            comment_mask: a.comment_mask,
        });
    }
    for id in &skipped {
        eprintln!("warning: no sample with id `{id}`");
    }
    if samples.is_empty() {
        return Err(CliError::Core(Error::Contract("none of the requested ids exist".into())));
    }
    let report = AttentionReportFile {
        mode: cfg.mode.to_string(),
        samples,
        skipped,
    };
    create_dir(&cfg.out)?;
    write_json(&cfg.out.join(ATTENTION_FILE), &report)?;
    for family in HEATMAP_FAMILIES {
        let columns: Vec<Column<'_>> = report
            .samples
            .iter()
            .map(|s| {
                let (weights, mask) = match family {
                    "a_s1" => (&s.a_s1, &s.news_mask),
                    "a_d" => (&s.a_d, &s.entity_mask),
                    "a_s2" => (&s.a_s2, &s.news_mask),
                    _ => (&s.a_c, &s.comment_mask),
                };
                Column {
                    label: &s.id,
                    weights,
                    mask,
                }
            })
            .collect();
        write_file(
            &cfg.out.join(format!("{family}.svg")),
            heatmap::render(family, &columns),
        )?;
    }
    eprintln!(
        "explained {} samples ({} skipped) into {}",
        report.samples.len(),
        report.skipped.len(),
        cfg.out.display()
    );
    Ok(report)
}

/// Writes a synthetic corpus plus a ready-to-use config file.
pub fn cmd_synth(spec: &SynthSpec, out: &Path) -> CliResult<()> {
    let corpus = gen_synthetic(spec)?;
    corpus.write_to(out)?;
    let mut config = String::from(
        "profile = \"desk\"\n\n[data]\ndataset = \"data.jsonl\"\nembeddings = \"embeddings.txt\"\nentities = \"entities.jsonl\"\n",
    );
    if spec.embedding_dim != HyperParams::profile(dualcan_core::Profile::Desk).embedding_dim {
        config.push_str(&format!("\n[model]\nembedding_dim = {}\n", spec.embedding_dim));
    }
    write_file(&out.join(SYNTH_CONFIG), config)?;
    eprintln!("wrote {} documents to {}", corpus.records.len(), out.display());
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreprocessSummary {
    pub train: usize,
    pub val: usize,
    pub test: usize,
    pub vocab_size: usize,
    /// Vocabulary tokens (excluding reserved ids) with an embedding row.
    pub embedded_tokens: usize,
    pub warnings: Vec<String>,
}

#[derive(Serialize)]
struct SplitIds<'a> {
    train: Vec<&'a str>,
    val: Vec<&'a str>,
    test: Vec<&'a str>,
}

/// Validates and encodes the configured data; writes the vocabulary, the
/// split assignment and a summary.
pub fn cmd_preprocess(cfg: &RunConfig) -> CliResult<PreprocessSummary> {
    let prepared = prepare(cfg)?;
    create_dir(&cfg.out)?;
    let mut vocab_text = String::new();
    for (id, tok) in prepared.vocab.iter() {
        vocab_text.push_str(&format!("{id}\t{tok}\n"));
    }
    write_file(&cfg.out.join("vocab.txt"), vocab_text)?;
    fn ids(docs: &[Document]) -> Vec<&str> {
        docs.iter().map(|d| d.id.as_str()).collect()
    }
    let d = &prepared.documents;
    write_json(
        &cfg.out.join("splits.json"),
        &SplitIds {
            train: ids(&d.train),
            val: ids(&d.val),
            test: ids(&d.test),
        },
    )?;
    let embedded_tokens = prepared
        .vocab
        .iter()
        .filter(|&(id, _)| id > 1 && prepared.embeddings.row(id).iter().any(|&x| x != 0.0))
        .count();
    let summary = PreprocessSummary {
        train: d.train.len(),
        val: d.val.len(),
        test: d.test.len(),
        vocab_size: prepared.vocab.len(),
        embedded_tokens,
        warnings: prepared.warnings,
    };
    write_json(&cfg.out.join("summary.json"), &summary)?;
    println!("{}", serde_json::to_string(&summary).expect("summary serialises"));
    Ok(summary)
}

/// Number of learnable scalars for a configuration.
pub fn parameter_count(hp: &HyperParams) -> usize {
    ModelParams::init(hp, 0).leaves().iter().map(|t| t.numel()).sum()
}
