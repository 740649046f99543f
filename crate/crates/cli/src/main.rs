//! `relnet`: training, evaluation, prediction, topic models, synthetic data,
//! ablations and sweeps from the command line.
//!
//! Exit codes: 0 on success, 2 for configuration or usage errors, 3 for data
//! errors, 1 for anything else.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use relnet::corpus::{gen_synthetic, load_jsonl, write_jsonl, SyntheticSpec};
use relnet::harness::{
    ablation_seeds, ablation_tsv, attention_records, checkpoint_precision, documents, evaluate, evaluate_predictions,
    read_predictions, sweep, train, write_file, write_predictions, Checkpoint, Corpus, EvalReport, Features,
    PredictionRecord, Precision, TrainConfig,
};
use relnet::indicators::{lexicon_files, LdaModel, Lexicon};
use relnet::model::Variant;
use relnet::{Error, ErrorKind, Result, Scalar};
use serde_json::json;

#[derive(Parser)]
#[command(name = "relnet", version, about = "Attentive relation networks for risk classification of short texts")]
struct Cli {
    /// More log output (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model; writes model.json, run_log.csv, metrics.json and config.cfg.
    Train(TrainArgs),
    /// Score a checkpoint, or saved predictions, against labeled data.
    Eval(EvalArgs),
    /// Classify documents; writes prediction JSONL and optionally attention weights.
    Predict(PredictArgs),
    /// Fit or inspect a topic model.
    #[command(subcommand)]
    Lda(LdaCommand),
    /// Generate the synthetic interaction corpus, its lexicon and a matching config.
    Synth(SynthArgs),
    /// Train several variants on the same data and tabulate their test metrics.
    Ablate(AblateArgs),
    /// Train one model per lexicon and topic count; report validation F1.
    Sweep(SweepArgs),
}

/// A config file plus overrides. Flags win over the file, `--set` wins over flags.
#[derive(Args)]
struct ConfigArgs {
    /// Flat `key = value` config file.
    #[arg(short, long)]
    config: Option<PathBuf>,
    /// Override any config key (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
    #[arg(long)]
    train: Option<PathBuf>,
    #[arg(long)]
    valid: Option<PathBuf>,
    #[arg(long)]
    test: Option<PathBuf>,
    /// Comma-separated label list.
    #[arg(long)]
    labels: Option<String>,
    /// bilstm_only, concat, rn_sentiment, rn_topic or full.
    #[arg(long)]
    variant: Option<String>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    lexicon: Option<PathBuf>,
    #[arg(long)]
    embeddings: Option<PathBuf>,
    #[arg(long)]
    num_topics: Option<usize>,
    /// f32 or f64.
    #[arg(long)]
    precision: Option<String>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<TrainConfig> {
        let mut cfg = match &self.config {
            Some(p) => TrainConfig::from_file(p)?,
            None => TrainConfig::default(),
        };
        for (slot, value) in [
            (&mut cfg.train, &self.train),
            (&mut cfg.valid, &self.valid),
            (&mut cfg.test, &self.test),
            (&mut cfg.lexicon, &self.lexicon),
            (&mut cfg.embeddings, &self.embeddings),
        ] {
            if value.is_some() {
                *slot = value.clone();
            }
        }
        let flags = [
            ("labels", self.labels.clone()),
            ("variant", self.variant.clone()),
            ("epochs", self.epochs.map(|v| v.to_string())),
            ("seed", self.seed.map(|v| v.to_string())),
            ("num_topics", self.num_topics.map(|v| v.to_string())),
            ("precision", self.precision.clone()),
        ];
        for (key, value) in flags {
            if let Some(v) = value {
                cfg.set(key, &v)?;
            }
        }
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("--set expects KEY=VALUE, got `{kv}`")))?;
            cfg.set(k.trim(), v.trim())?;
        }
        Ok(cfg)
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    /// Output directory.
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    /// Checkpoint written by `train`.
    #[arg(long, conflicts_with = "predictions", required_unless_present = "predictions")]
    model: Option<PathBuf>,
    /// Prediction JSONL written by `predict`, scored without a model.
    #[arg(long)]
    predictions: Option<PathBuf>,
    /// Labeled JSONL documents.
    #[arg(long)]
    data: PathBuf,
    /// Comma-separated label list (with `--predictions`).
    #[arg(long)]
    labels: Option<String>,
    /// post or user (with `--predictions`).
    #[arg(long, default_value = "post")]
    level: String,
    /// Also write the report as JSON.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PredictArgs {
    /// Checkpoint written by `train`.
    #[arg(long)]
    model: PathBuf,
    /// JSONL documents; labels are optional.
    #[arg(long)]
    input: PathBuf,
    /// Prediction JSONL: one `{id, label, P, alpha_s, alpha_v}` per document.
    #[arg(short, long)]
    out: PathBuf,
    /// Attention weights next to the document tokens, as JSON.
    #[arg(long)]
    attention: Option<PathBuf>,
}

#[derive(Subcommand)]
enum LdaCommand {
    /// Fit on the training split, save the model and print its top words.
    Fit {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(short, long)]
        out: PathBuf,
        #[arg(long, default_value_t = 10)]
        top: usize,
    },
    /// Print the top words of a saved topic model.
    Inspect {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, default_value_t = 10)]
        top: usize,
    },
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory.
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(Args)]
struct AblateArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    /// Comma-separated variants.
    #[arg(long, default_value = "bilstm_only,concat,rn_sentiment,rn_topic,full")]
    variants: String,
    /// Comma-separated training seeds; defaults to the config seed.
    #[arg(long)]
    seeds: Option<String>,
    /// Write the TSV here as well as to stdout.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    cfg: ConfigArgs,
    /// Directory of lexicon files (overrides `sweep_lexicons`).
    #[arg(long)]
    lexicons: Option<PathBuf>,
    /// Topic counts such as `5..=20` or `5,10` (overrides `sweep_topics`).
    #[arg(long)]
    topics: Option<String>,
    /// Write the TSV here as well as to stdout.
    #[arg(short, long)]
    out: Option<PathBuf>,
}

fn parse_list<T: std::str::FromStr>(what: &str, s: &str) -> Result<Vec<T>> {
    s.split(',')
        .map(str::trim)
        .filter(|x| !x.is_empty())
        .map(|x| x.parse().map_err(|_| Error::Config(format!("invalid {what} `{x}`"))))
        .collect()
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    write_file(path, &serde_json::to_vec_pretty(value)?)
}

fn precision_of(path: &Path) -> Result<Precision> {
    match checkpoint_precision(path)?.as_str() {
        "f32" => Ok(Precision::F32),
        "f64" => Ok(Precision::F64),
        other => Err(Error::Data(format!("{}: unknown precision `{other}`", path.display()))),
    }
}

fn cmd_train(a: &TrainArgs) -> Result<()> {
    let cfg = a.cfg.resolve()?;
    cfg.validate()?;
    let corpus = Corpus::load(&cfg)?;
    match cfg.precision {
        Precision::F32 => train_and_save::<f32>(&cfg, &corpus, &a.out),
        Precision::F64 => train_and_save::<f64>(&cfg, &corpus, &a.out),
    }
}

fn train_and_save<T: Scalar>(cfg: &TrainConfig, corpus: &Corpus, out: &Path) -> Result<()> {
    let run = train::<T>(cfg, corpus)?;
    fs::create_dir_all(out).map_err(|e| Error::Io {
        path: out.to_path_buf(),
        source: e,
    })?;
    run.checkpoint.save(&out.join("model.json"))?;
    run.log.write_csv(&out.join("run_log.csv"))?;
    write_file(&out.join("config.cfg"), cfg.to_file_string().as_bytes())?;
    let (split, examples) = if !run.data.test.is_empty() {
        ("test", &run.data.test)
    } else if !run.data.valid.is_empty() {
        ("valid", &run.data.valid)
    } else {
        ("train", &run.data.train)
    };
    let report = evaluate(&run.checkpoint.model, examples, &run.data.labels, cfg.batch_size())?;
    write_json(
        &out.join("metrics.json"),
        &json!({ "split": split, "best_epoch": run.log.best_epoch, "report": report }),
    )?;
    println!("best epoch {} ({split} split)\n{}", run.log.best_epoch, report.render());
    Ok(())
}

fn eval_checkpoint<T: Scalar>(model: &Path, data: &Path) -> Result<EvalReport> {
    let ck = Checkpoint::<T>::load(model)?;
    let posts = load_jsonl(data, &ck.labels)?;
    let docs = documents(&posts, ck.config.level)?;
    let examples = ck.features()?.examples(&docs);
    evaluate(&ck.model, &examples, &ck.labels, ck.config.batch_size())
}

fn cmd_eval(a: &EvalArgs) -> Result<()> {
    let report = match (&a.model, &a.predictions) {
        (Some(model), _) => match precision_of(model)? {
            Precision::F32 => eval_checkpoint::<f32>(model, &a.data)?,
            Precision::F64 => eval_checkpoint::<f64>(model, &a.data)?,
        },
        (None, Some(preds)) => {
            let mut cfg = TrainConfig::default();
            cfg.set("level", &a.level)?;
            let labels_arg = a
                .labels
                .as_deref()
                .ok_or_else(|| Error::Config("--labels is required with --predictions".into()))?;
            let labels: Vec<String> = parse_list("label", labels_arg)?;
            let gold = documents(&load_jsonl(&a.data, &labels)?, cfg.level)?;
            evaluate_predictions(&gold, &read_predictions(preds)?, &labels)?
        }
        (None, None) => return Err(Error::Config("give --model or --predictions".into())),
    };
    print!("{}", report.render());
    if let Some(out) = &a.out {
        write_json(out, &report)?;
    }
    Ok(())
}

fn predict_with<T: Scalar>(a: &PredictArgs) -> Result<()> {
    let ck = Checkpoint::<T>::load(&a.model)?;
    let posts = load_jsonl(&a.input, &ck.labels)?;
    let docs = documents(&posts, ck.config.level)?;
    let examples = ck.features()?.examples(&docs);
    let predictions = ck.model.predict_all(&examples, ck.config.batch_size())?;
    let records: Vec<PredictionRecord> = examples
        .iter()
        .zip(&predictions)
        .map(|(e, p)| PredictionRecord::new(e, p, &ck.labels))
        .collect();
    write_predictions(&a.out, &records)?;
    if let Some(path) = &a.attention {
        write_json(path, &attention_records(&examples, &predictions, &ck.vocab))?;
    }
    log::info!("{} predictions written to {}", records.len(), a.out.display());
    Ok(())
}

fn cmd_predict(a: &PredictArgs) -> Result<()> {
    match precision_of(&a.model)? {
        Precision::F32 => predict_with::<f32>(a),
        Precision::F64 => predict_with::<f64>(a),
    }
}

fn print_topics(lda: &LdaModel, top: usize) {
    for k in 0..lda.num_topics {
        let words: Vec<String> = lda.top_words(k, top).into_iter().map(|(w, _)| w).collect();
        println!("topic {k}: {}", words.join(" "));
    }
}

fn cmd_lda(c: &LdaCommand) -> Result<()> {
    match c {
        LdaCommand::Fit { cfg, out, top } => {
            let cfg = cfg.resolve()?;
            let corpus = Corpus::load(&cfg)?;
            let train = documents(&corpus.train, cfg.level)?;
            let features = Features::fit(&train, Lexicon::new("none"), &cfg)?;
            features.lda.save(out)?;
            print_topics(&features.lda, *top);
        }
        LdaCommand::Inspect { model, top } => print_topics(&LdaModel::load(model)?, *top),
    }
    Ok(())
}

fn cmd_synth(a: &SynthArgs) -> Result<()> {
    let spec = SyntheticSpec::interaction();
    let corpus = gen_synthetic(&spec, a.seed)?;
    fs::create_dir_all(&a.out).map_err(|e| Error::Io {
        path: a.out.clone(),
        source: e,
    })?;
    for (name, posts) in [("train", &corpus.train), ("valid", &corpus.valid), ("test", &corpus.test)] {
        write_jsonl(&a.out.join(format!("{name}.jsonl")), posts, &corpus.labels)?;
    }
    corpus.lexicon.write_tsv(&a.out.join("lexicon.tsv"))?;
    write_json(&a.out.join("topics.json"), &corpus.topics)?;
    let cfg = TrainConfig {
        train: Some("train.jsonl".into()),
        valid: Some("valid.jsonl".into()),
        test: Some("test.jsonl".into()),
        lexicon: Some("lexicon.tsv".into()),
        seed: a.seed,
        ..TrainConfig::synthetic(corpus.labels.clone())
    };
    write_file(&a.out.join("relnet.cfg"), cfg.to_file_string().as_bytes())?;
    println!(
        "{} train / {} valid / {} test documents written to {}",
        corpus.train.len(),
        corpus.valid.len(),
        corpus.test.len(),
        a.out.display()
    );
    Ok(())
}

fn cmd_ablate(a: &AblateArgs) -> Result<()> {
    let cfg = a.cfg.resolve()?;
    cfg.validate()?;
    let variants: Vec<Variant> = parse_list("variant", &a.variants)?;
    let seeds: Vec<u64> = match &a.seeds {
        Some(s) => parse_list("seed", s)?,
        None => vec![cfg.seed],
    };
    let corpus = Corpus::load(&cfg)?;
    let tables = match cfg.precision {
        Precision::F32 => ablation_seeds::<f32>(&cfg, &corpus, &variants, &seeds)?,
        Precision::F64 => ablation_seeds::<f64>(&cfg, &corpus, &variants, &seeds)?,
    };
    let tsv = ablation_tsv(&seeds, &tables);
    print!("{tsv}");
    if let Some(out) = &a.out {
        write_file(out, tsv.as_bytes())?;
    }
    Ok(())
}

fn cmd_sweep(a: &SweepArgs) -> Result<()> {
    let mut cfg = a.cfg.resolve()?;
    if let Some(t) = &a.topics {
        cfg.set("sweep_topics", t)?;
    }
    if let Some(d) = &a.lexicons {
        cfg.sweep_lexicons = Some(d.clone());
    }
    cfg.validate()?;
    let lexicons = match &cfg.sweep_lexicons {
        Some(dir) => lexicon_files(dir)?,
        None => Vec::new(),
    };
    let corpus = Corpus::load(&cfg)?;
    let result = match cfg.precision {
        Precision::F32 => sweep::<f32>(&cfg, &corpus, &lexicons, &cfg.sweep_topics)?,
        Precision::F64 => sweep::<f64>(&cfg, &corpus, &lexicons, &cfg.sweep_topics)?,
    };
    let tsv = result.to_tsv();
    print!("{tsv}");
    let best = result.best_row();
    println!(
        "best: lexicon `{}`, {} topics, valid f1 {:.4}",
        best.lexicon, best.num_topics, best.valid_f1
    );
    if let Some(out) = &a.out {
        write_file(out, tsv.as_bytes())?;
    }
    Ok(())
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Predict(a) => cmd_predict(a),
        Command::Lda(c) => cmd_lda(c),
        Command::Synth(a) => cmd_synth(a),
        Command::Ablate(a) => cmd_ablate(a),
        Command::Sweep(a) => cmd_sweep(a),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new().filter_level(level).parse_default_env().init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.kind() {
                ErrorKind::Config => 2,
                ErrorKind::Data => 3,
                ErrorKind::Internal => 1,
            })
        }
    }
}
