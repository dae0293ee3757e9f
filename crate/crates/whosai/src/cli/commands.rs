//! Implementations behind the CLI subcommands.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::Deserialize;

use super::config_file;
use super::{
    ClassifyArgs, CorruptionArg, DistanceArg, EvalArgs, GradCheckArgs, MarginModeArg, OnOff,
    PresetArg, ProjectArgs, RegisterArgs, SubsetArg, SynthArgs, TaskArg, TrainArgs,
};
use crate::classify::{self, CentroidIndex};
use crate::contrastive::{DistanceKind, MarginMode, MarginSchedule, MinerConfig, TripletMode};
use crate::corpus::{self, Corpus, SynthSpec};
use crate::encoder::{self, Embedding, EncoderConfig, EncoderParams};
use crate::error::{Error, Result};
use crate::eval::{self, CentroidSimilarity, EvalReport};
use crate::textproc::tokenize;
use crate::trainer::{self, Corruption, CorruptionKind, TrainConfig};

/// Fallback human seed text for synthetic corpora.
const BUILTIN_SEED_TEXT: &str = include_str!("seed_text.txt");

pub fn run_synth(args: &SynthArgs) -> Result<()> {
    let parse_list = |raw: &Option<String>, what: &str| -> Result<Option<Vec<String>>> {
        match raw {
            None => Ok(None),
            Some(s) => {
                let parts: Vec<String> = s.split(',').map(|p| p.trim().to_string()).collect();
                if parts.len() != args.generators {
                    return Err(Error::Config(format!(
                        "--{what} needs {} comma-separated values, got {}",
                        args.generators,
                        parts.len()
                    )));
                }
                Ok(Some(parts))
            }
        }
    };

    let (default_orders, default_temps) = SynthSpec::default_generator_params(args.generators);
    let orders = match parse_list(&args.orders, "orders")? {
        Some(parts) => parts
            .iter()
            .map(|p| {
                p.parse::<usize>()
                    .map_err(|_| Error::Config(format!("invalid order: {p}")))
            })
            .collect::<Result<Vec<_>>>()?,
        None => default_orders,
    };
    let temperatures = match parse_list(&args.temperatures, "temperatures")? {
        Some(parts) => parts
            .iter()
            .map(|p| {
                p.parse::<f64>()
                    .map_err(|_| Error::Config(format!("invalid temperature: {p}")))
            })
            .collect::<Result<Vec<_>>>()?,
        None => default_temps,
    };

    let spec = SynthSpec {
        n_generators: args.generators,
        docs_per_class: args.per_class,
        human_source: args
            .human_source
            .clone()
            .unwrap_or_else(|| PathBuf::from("<builtin>")),
        generator_orders: orders,
        generator_temperatures: temperatures,
        doc_length: args.doc_length,
    };
    let corpus = match &args.human_source {
        Some(_) => corpus::synth_corpus(&spec, args.seed)?,
        None => corpus::synth_corpus_from_text(&spec, BUILTIN_SEED_TEXT, args.seed)?,
    };
    corpus::write_jsonl(&corpus, &args.out)?;

    println!("wrote {} ({} documents)", args.out.display(), corpus.len());
    for (label, count) in corpus.category_counts() {
        println!("  {label}: {count}");
    }
    Ok(())
}

/// Resolved settings for `train`: preset defaults, overridden by the config
/// file, overridden by flags.
struct TrainSettings {
    corpus: PathBuf,
    out: PathBuf,
    task: TaskArg,
    human_label: String,
    subset: SubsetArg,
    train_frac: f64,
    val_frac: f64,
    embeddings: Option<PathBuf>,
    encoder: EncoderConfig,
    train: TrainConfig,
}

fn resolve_train(args: &TrainArgs) -> Result<TrainSettings> {
    let file = match &args.config {
        Some(path) => config_file::parse_config_file(path)?,
        None => BTreeMap::new(),
    };

    // Generic flag > file > default resolution.
    macro_rules! pick {
        ($flag:expr, $key:literal, $default:expr) => {
            match $flag {
                Some(v) => v,
                None => config_file::get(&file, $key)?.unwrap_or($default),
            }
        };
    }

    let preset = match args.preset {
        Some(p) => p,
        None => match file.get("preset").map(String::as_str) {
            None => PresetArg::Desk,
            Some("desk") => PresetArg::Desk,
            Some("paper") => PresetArg::Paper,
            Some(other) => {
                return Err(Error::Config(format!("unknown preset: {other}")));
            }
        },
    };
    let base = match preset {
        PresetArg::Desk => TrainConfig::desk(),
        PresetArg::Paper => TrainConfig::paper(),
    };

    let corpus: PathBuf = match &args.corpus {
        Some(p) => p.clone(),
        None => config_file::get::<PathBuf>(&file, "corpus")?
            .ok_or_else(|| Error::Config("corpus path is required (flag or config)".into()))?,
    };
    let out: PathBuf = match &args.out {
        Some(p) => p.clone(),
        None => config_file::get::<PathBuf>(&file, "out")?
            .ok_or_else(|| Error::Config("out directory is required (flag or config)".into()))?,
    };
    let embeddings: Option<PathBuf> = match &args.embeddings {
        Some(p) => Some(p.clone()),
        None => config_file::get::<PathBuf>(&file, "embeddings")?,
    };

    let task = match args.task {
        Some(t) => t,
        None => match file.get("task").map(String::as_str) {
            None => TaskArg::Aa,
            Some("aa") => TaskArg::Aa,
            Some("tt") => TaskArg::Tt,
            Some(other) => return Err(Error::Config(format!("unknown task: {other}"))),
        },
    };
    let subset = match args.generator_subset {
        Some(s) => s,
        None => match file.get("generator_subset").map(String::as_str) {
            None | Some("all") => SubsetArg::All,
            Some("largest") => SubsetArg::Largest,
            Some("smallest") => SubsetArg::Smallest,
            Some(other) => {
                return Err(Error::Config(format!("unknown generator_subset: {other}")))
            }
        },
    };
    let margin_mode = match args.margin_mode {
        Some(MarginModeArg::StepIncrease) => MarginMode::StepIncrease,
        Some(MarginModeArg::PaperMod) => MarginMode::PaperMod,
        None => match file.get("margin_mode").map(String::as_str) {
            None | Some("step-increase") => MarginMode::StepIncrease,
            Some("paper-mod") => MarginMode::PaperMod,
            Some(other) => return Err(Error::Config(format!("unknown margin_mode: {other}"))),
        },
    };
    let dynamic_margin = match args.dynamic_margin {
        Some(v) => v == OnOff::On,
        None => match file.get("dynamic_margin").map(String::as_str) {
            None | Some("on") => true,
            Some("off") => false,
            Some(other) => {
                return Err(Error::Config(format!("unknown dynamic_margin: {other}")))
            }
        },
    };
    let miner_on = match args.miner {
        Some(v) => v == OnOff::On,
        None => match file.get("miner").map(String::as_str) {
            None | Some("on") => true,
            Some("off") => false,
            Some(other) => return Err(Error::Config(format!("unknown miner: {other}"))),
        },
    };
    let corruption_kind = match args.corruption {
        Some(CorruptionArg::Off) => CorruptionKind::Off,
        Some(CorruptionArg::Td) => CorruptionKind::TokenDeletion,
        Some(CorruptionArg::Sc) => CorruptionKind::SpanCropping,
        None => match file.get("corruption").map(String::as_str) {
            None | Some("off") => CorruptionKind::Off,
            Some("td") => CorruptionKind::TokenDeletion,
            Some("sc") => CorruptionKind::SpanCropping,
            Some(other) => return Err(Error::Config(format!("unknown corruption: {other}"))),
        },
    };
    let distance = match args.distance {
        Some(DistanceArg::Cosine) => DistanceKind::Cosine,
        Some(DistanceArg::SqEuclidean) => DistanceKind::SquaredEuclidean,
        None => match file.get("distance").map(String::as_str) {
            None | Some("cosine") => DistanceKind::Cosine,
            Some("sq-euclidean") | Some("squared_euclidean") => DistanceKind::SquaredEuclidean,
            Some(other) => return Err(Error::Config(format!("unknown distance: {other}"))),
        },
    };

    let lambda_min = pick!(args.lambda_min, "lambda_min", base.margin.lambda_min);
    let margin = if dynamic_margin {
        MarginSchedule {
            lambda_min,
            lambda_delta: pick!(args.lambda_delta, "lambda_delta", base.margin.lambda_delta),
            step_size: pick!(args.delta, "delta", base.margin.step_size),
            mode: margin_mode,
        }
    } else {
        MarginSchedule::fixed(lambda_min)
    };

    let miner = if miner_on {
        Some(MinerConfig {
            epsilon: pick!(args.epsilon, "epsilon", MinerConfig::default().epsilon),
        })
    } else {
        None
    };
    let triplet_mode = if miner_on {
        TripletMode::Online
    } else {
        TripletMode::Offline
    };

    let corruption = Corruption {
        kind: corruption_kind,
        config: crate::textproc::CorruptionConfig {
            p: pick!(args.p, "p", base.corruption.config.p),
            p_s: pick!(args.p_s, "p_s", base.corruption.config.p_s),
            p_span: pick!(args.p_span, "p_span", base.corruption.config.p_span),
        },
    };

    let grad_clip = match args.grad_clip {
        Some(v) => Some(v),
        None => config_file::get::<f64>(&file, "grad_clip")?,
    };

    let defaults = EncoderConfig::default();
    let encoder = EncoderConfig {
        ngram_n: pick!(args.ngram_n, "ngram_n", defaults.ngram_n),
        vocab_size: pick!(args.vocab_size, "vocab_size", defaults.vocab_size),
        embed_dim: pick!(args.embed_dim, "embed_dim", defaults.embed_dim),
        hidden_dim: pick!(args.hidden_dim, "hidden_dim", defaults.hidden_dim),
        out_dim: pick!(args.out_dim, "out_dim", defaults.out_dim),
    };

    let train = TrainConfig {
        steps: pick!(args.steps, "steps", base.steps),
        batch_size: pick!(args.batch_size, "batch_size", base.batch_size),
        lr: pick!(args.lr, "lr", base.lr),
        betas: (
            pick!(args.beta1, "beta1", base.betas.0),
            pick!(args.beta2, "beta2", base.betas.1),
        ),
        weight_decay: pick!(args.weight_decay, "weight_decay", base.weight_decay),
        warmup_steps: pick!(args.warmup_steps, "warmup_steps", base.warmup_steps),
        margin,
        miner,
        corruption,
        triplet_mode,
        distance,
        grad_clip,
        eval_every: pick!(args.eval_every, "eval_every", base.eval_every),
        seed: pick!(args.seed, "seed", base.seed),
    };

    Ok(TrainSettings {
        corpus,
        out,
        task,
        human_label: pick!(args.human_label.clone(), "human_label", "human".to_string()),
        subset,
        train_frac: pick!(args.train_frac, "train_frac", 0.8),
        val_frac: pick!(args.val_frac, "val_frac", 0.1),
        embeddings,
        encoder,
        train,
    })
}

fn load_corpus_any(path: &Path, text_column: &str, label_column: &str) -> Result<Corpus> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("csv") => corpus::load_csv(path, text_column, label_column),
        _ => corpus::load_jsonl(path),
    }
}

/// Generator-subset filtering: labels of the form `family-N` (integer N)
/// are size variants of one family; keep the largest or smallest variant
/// per family. Labels without the pattern are always kept.
fn apply_subset(input: &Corpus, subset: SubsetArg) -> Result<Corpus> {
    if subset == SubsetArg::All {
        return Ok(input.clone());
    }
    let variant = |label: &str| -> Option<(String, u64)> {
        let (family, suffix) = label.rsplit_once('-')?;
        suffix.parse::<u64>().ok().map(|v| (family.to_string(), v))
    };
    let mut keep_of_family: BTreeMap<String, u64> = BTreeMap::new();
    for label in input.categories() {
        if let Some((family, v)) = variant(label) {
            let entry = keep_of_family.entry(family).or_insert(v);
            *entry = match subset {
                SubsetArg::Largest => (*entry).max(v),
                SubsetArg::Smallest => (*entry).min(v),
                SubsetArg::All => unreachable!(),
            };
        }
    }
    input.filter_labels(|label| match variant(label) {
        Some((family, v)) => keep_of_family.get(&family) == Some(&v),
        None => true,
    })
}

fn encode_corpus(params: &EncoderParams, corpus: &Corpus) -> Result<(Vec<Embedding>, Vec<String>)> {
    let mut embeddings = Vec::with_capacity(corpus.len());
    let mut labels = Vec::with_capacity(corpus.len());
    for doc in corpus.docs() {
        embeddings.push(encoder::encode(params, &tokenize(&doc.text))?);
        labels.push(doc.label.clone());
    }
    Ok((embeddings, labels))
}

fn encode_corpus_external(
    params: &EncoderParams,
    corpus: &Corpus,
    store: &encoder::EmbeddingStore,
) -> Result<(Vec<Embedding>, Vec<String>)> {
    let mut embeddings = Vec::with_capacity(corpus.len());
    let mut labels = Vec::with_capacity(corpus.len());
    for doc in corpus.docs() {
        let vector = store
            .get(&doc.id)
            .ok_or_else(|| Error::invalid(format!("no external embedding for id {}", doc.id)))?;
        embeddings.push(encoder::encode_external(params, vector.values())?.0);
        labels.push(doc.label.clone());
    }
    Ok((embeddings, labels))
}

pub fn run_train(args: &TrainArgs) -> Result<()> {
    let settings = resolve_train(args)?;
    let loaded = load_corpus_any(&settings.corpus, &args.csv_text_column, &args.csv_label_column)?;
    let filtered = apply_subset(&loaded, settings.subset)?;
    let task_corpus = match settings.task {
        TaskArg::Aa => filtered,
        TaskArg::Tt => corpus::relabel_binary(&filtered, &settings.human_label)?,
    };
    let (train_split, val_split, test_split) = corpus::split(
        &task_corpus,
        settings.train_frac,
        settings.val_frac,
        settings.train.seed,
    )?;

    std::fs::create_dir_all(&settings.out).map_err(|e| Error::io(&settings.out, e))?;
    corpus::write_jsonl(&train_split, settings.out.join("train.jsonl"))?;
    corpus::write_jsonl(&val_split, settings.out.join("val.jsonl"))?;
    corpus::write_jsonl(&test_split, settings.out.join("test.jsonl"))?;

    let store = settings
        .embeddings
        .as_ref()
        .map(encoder::load_external_embeddings)
        .transpose()?;
    let (params, log) = match &store {
        Some(store) => trainer::train_with_embeddings(
            &train_split,
            store,
            Some(&val_split),
            &settings.encoder,
            &settings.train,
        )?,
        None => trainer::train_with_validation(
            &train_split,
            Some(&val_split),
            &settings.encoder,
            &settings.train,
        )?,
    };

    let checkpoint_path = settings.out.join("model.wai1");
    trainer::save_checkpoint(&params, &settings.train, settings.train.steps, &checkpoint_path)?;
    let hash = trainer::file_sha256(&checkpoint_path)?;

    // Centroids come from clean training texts under the final parameters.
    let (train_embeddings, train_labels) = match &store {
        Some(store) => encode_corpus_external(&params, &train_split, store)?,
        None => encode_corpus(&params, &train_split)?,
    };
    let index =
        classify::compute_centroids(&train_embeddings, &train_labels)?.with_encoder_hash(hash);
    classify::save_index(&index, settings.out.join("centroids.json"))?;

    log.write_jsonl(settings.out.join("log.jsonl"))?;

    println!(
        "trained {} steps on {} docs ({} categories)",
        settings.train.steps,
        train_split.len(),
        train_split.categories().len()
    );
    if let Some(snapshot) = log.snapshots.last() {
        println!(
            "final validation: f1 {:.4}, intra {:.4}, inter {:.4}",
            snapshot.val_f1, snapshot.intra, snapshot.inter
        );
    }
    println!("wrote {}", settings.out.display());
    Ok(())
}

/// Loads a checkpoint and centroid store, enforcing the dimension contract
/// and warning when the store was built by a different encoder.
fn load_model(
    checkpoint: &Path,
    centroids: &Path,
) -> Result<(EncoderParams, CentroidIndex)> {
    let loaded = trainer::load_checkpoint(checkpoint)?;
    let index = classify::load_index(centroids)?;
    if index.dim() != loaded.params.config.out_dim {
        return Err(Error::ShapeMismatch(format!(
            "centroid store dim {} does not match checkpoint out_dim {}",
            index.dim(),
            loaded.params.config.out_dim
        )));
    }
    if !index.encoder_hash().is_empty() {
        let hash = trainer::file_sha256(checkpoint)?;
        if hash != index.encoder_hash() {
            eprintln!(
                "warning: centroid store was built from a different checkpoint \
                 (store {}..., checkpoint {}...)",
                &index.encoder_hash()[..12.min(index.encoder_hash().len())],
                &hash[..12]
            );
        }
    }
    Ok((loaded.params, index))
}

pub fn run_eval(args: &EvalArgs) -> Result<()> {
    let (params, index) = load_model(&args.checkpoint, &args.centroids)?;
    let loaded = corpus::load_jsonl(&args.corpus)?;
    let eval_corpus = match args.task {
        Some(TaskArg::Tt) => corpus::relabel_binary(&loaded, &args.human_label)?,
        _ => loaded,
    };

    let (embeddings, truth) = match &args.embeddings {
        Some(path) => {
            let store = encoder::load_external_embeddings(path)?;
            encode_corpus_external(&params, &eval_corpus, &store)?
        }
        None => encode_corpus(&params, &eval_corpus)?,
    };
    let mut preds = Vec::with_capacity(embeddings.len());
    for e in &embeddings {
        preds.push(classify::predict(&index, e)?.0);
    }
    let categories: Vec<String> = index.labels().map(str::to_string).collect();
    let matrix = eval::confusion(&truth, &preds, &categories)?;
    let prf = eval::weighted_prf(&matrix)?;
    let report = EvalReport {
        precision: prf.precision,
        recall: prf.recall,
        f1: prf.f1,
        per_class: prf.per_class,
        intra: eval::intra_similarity(&embeddings, &truth)?,
        inter: eval::inter_similarity(&embeddings, &truth)?,
        centroid_similarity: Some(CentroidSimilarity {
            labels: categories,
            matrix: eval::centroid_similarity_matrix(&index),
        }),
    };

    let json = serde_json::to_string_pretty(&report).expect("report serialization cannot fail");
    match &args.out {
        Some(path) => {
            std::fs::write(path, json + "\n").map_err(|e| Error::io(path, e))?;
            println!(
                "eval: weighted P {:.4} R {:.4} F1 {:.4} on {} docs",
                report.precision,
                report.recall,
                report.f1,
                eval_corpus.len()
            );
            println!("wrote {}", path.display());
        }
        None => println!("{json}"),
    }
    if let Some(path) = &args.confusion {
        matrix.write_csv(path)?;
    }
    Ok(())
}

/// Input record for `classify`: labels are not needed.
#[derive(Deserialize)]
struct LooseDoc {
    id: String,
    text: String,
}

pub fn run_classify(args: &ClassifyArgs) -> Result<()> {
    let (params, index) = load_model(&args.checkpoint, &args.centroids)?;

    let docs: Vec<LooseDoc> = match &args.input {
        Some(path) => {
            let raw = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
            let mut docs = Vec::new();
            for (i, line) in raw.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                docs.push(
                    serde_json::from_str(line)
                        .map_err(|e| Error::parse(path, i + 1, e.to_string()))?,
                );
            }
            docs
        }
        None => {
            let stdin = std::io::stdin();
            let mut docs = Vec::new();
            for (i, line) in stdin.lock().lines().enumerate() {
                let line = line.map_err(|e| Error::io("<stdin>", e))?;
                if line.trim().is_empty() {
                    continue;
                }
                docs.push(LooseDoc {
                    id: format!("line-{}", i + 1),
                    text: line,
                });
            }
            docs
        }
    };

    let mut out: Box<dyn Write> = match &args.out {
        Some(path) => Box::new(
            std::fs::File::create(path).map_err(|e| Error::io(path, e))?,
        ),
        None => Box::new(std::io::stdout()),
    };
    for doc in &docs {
        // Per-document failures (e.g. a zero embedding) are reported inline;
        // processing continues.
        let line = match encoder::encode(&params, &tokenize(&doc.text))
            .and_then(|e| classify::predict(&index, &e))
        {
            Ok((label, distances)) => {
                let named: BTreeMap<&str, f64> = index
                    .labels()
                    .zip(distances.iter().copied())
                    .collect();
                serde_json::json!({
                    "id": doc.id,
                    "predicted_label": label,
                    "distances": named,
                })
            }
            Err(e) => serde_json::json!({ "id": doc.id, "error": e.to_string() }),
        };
        writeln!(out, "{line}").map_err(|e| Error::io("<output>", e))?;
    }
    Ok(())
}

pub fn run_register(args: &RegisterArgs) -> Result<()> {
    let (params, index) = load_model(&args.checkpoint, &args.store)?;
    let raw = std::fs::read_to_string(&args.docs).map_err(|e| Error::io(&args.docs, e))?;
    let mut embeddings = Vec::new();
    for (i, line) in raw.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let doc: LooseDoc = serde_json::from_str(line)
            .map_err(|e| Error::parse(&args.docs, i + 1, e.to_string()))?;
        embeddings.push(encoder::encode(&params, &tokenize(&doc.text))?);
    }
    let updated = classify::register_category(&index, &embeddings, &args.label)?;
    classify::save_index(&updated, &args.out)?;
    println!(
        "registered {} from {} docs; store now holds {} categories",
        args.label,
        embeddings.len(),
        updated.len()
    );
    println!("wrote {}", args.out.display());
    Ok(())
}

pub fn run_project(args: &ProjectArgs) -> Result<()> {
    let loaded = trainer::load_checkpoint(&args.checkpoint)?;
    let eval_corpus = corpus::load_jsonl(&args.corpus)?;
    let (embeddings, labels) = encode_corpus(&loaded.params, &eval_corpus)?;
    let coords = eval::pca_project(&embeddings, 2)?;

    let mut writer = csv::Writer::from_path(&args.out)
        .map_err(|e| Error::invalid(format!("cannot write {}: {e}", args.out.display())))?;
    writer
        .write_record(["id", "label", "x", "y"])
        .map_err(|e| Error::invalid(e.to_string()))?;
    for (doc, xy) in eval_corpus.docs().iter().zip(&coords) {
        writer
            .write_record([
                doc.id.as_str(),
                doc.label.as_str(),
                &format!("{}", xy[0]),
                &format!("{}", xy[1]),
            ])
            .map_err(|e| Error::invalid(e.to_string()))?;
    }
    writer.flush().map_err(|e| Error::io(&args.out, e))?;
    println!("wrote {} ({} points)", args.out.display(), coords.len());

    // Reported separation diagnostic: a trained space should place same-label
    // points closer together in 2D than cross-label points.
    let (mut within, mut within_n, mut between, mut between_n) = (0.0, 0usize, 0.0, 0usize);
    for i in 0..coords.len() {
        for j in (i + 1)..coords.len() {
            let dx = coords[i][0] - coords[j][0];
            let dy = coords[i][1] - coords[j][1];
            let d = (dx * dx + dy * dy).sqrt();
            if labels[i] == labels[j] {
                within += d;
                within_n += 1;
            } else {
                between += d;
                between_n += 1;
            }
        }
    }
    if within_n > 0 && between_n > 0 {
        println!(
            "mean pairwise 2D distance: within-class {:.4}, between-class {:.4}",
            within / within_n as f64,
            between / between_n as f64
        );
    }
    Ok(())
}

/// Builds a seeded random instance and checks analytic gradients of the
/// full pipeline against central finite differences.
pub fn run_grad_check(args: &GradCheckArgs) -> Result<bool> {
    let config = EncoderConfig {
        vocab_size: 4096,
        ..EncoderConfig::default()
    };
    let params = encoder::random_params(&config, args.seed, 0.8)?;
    let mut rng = StdRng::seed_from_u64(args.seed ^ 0x6b43);
    let batch: Vec<crate::textproc::TokenSequence> = (0..8)
        .map(|_| {
            let words: Vec<String> = (0..rng.gen_range(6..14))
                .map(|_| {
                    (0..rng.gen_range(2..8))
                        .map(|_| (b'a' + rng.gen_range(0..26u8)) as char)
                        .collect()
                })
                .collect();
            crate::textproc::TokenSequence::new(words).expect("generated words are non-empty")
        })
        .collect();

    let report = encoder::grad_check(&params, &batch, args.fd_step)?;
    println!(
        "grad check: max relative error {:.3e} at {} ({} params checked, {} kink probes skipped)",
        report.max_rel_error, report.worst_param, report.params_checked, report.skipped_kinks
    );
    let passed = report.max_rel_error < args.threshold;
    println!(
        "{} (threshold {:.1e})",
        if passed { "PASS" } else { "FAIL" },
        args.threshold
    );
    Ok(passed)
}
