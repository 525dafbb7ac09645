use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use domain_bridge::baseline::{fit_noad, SolverOptions};
use domain_bridge::blse::{load_model, save_model, train, tune, Predictions, TrainConfig, TrainReport};
use domain_bridge::corpus::{load_corpus, parse_label_token, Label, LabeledCorpus};
use domain_bridge::embeddings::load_text_embeddings;
use domain_bridge::eval::{divergence_matrix, evaluate, DivergenceMode, DivergenceVariant};
use domain_bridge::lexicon::{build_frequency_identity, build_sentiment_subset, score_mi_pivots, ProjectionLexicon};
use domain_bridge::synth::{generate_synthetic, SyntheticSpec};
use log::{info, warn};
use serde::Serialize;

use crate::args::*;
use crate::manifest::{checksum_inputs, write_manifest, Manifest};
use crate::report::{plot_rows, EvalDocument};
use crate::UsageError;

fn usage(message: impl Into<String>) -> anyhow::Error {
    UsageError(message.into()).into()
}

fn write_file(out: &Path, name: &str, contents: impl AsRef<[u8]>) -> Result<()> {
    let path = out.join(name);
    fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))
}

fn write_json<T: Serialize>(out: &Path, name: &str, value: &T) -> Result<()> {
    write_file(out, name, serde_json::to_string_pretty(value)? + "\n")
}

fn domain_name(path: &Path) -> String {
    path.file_stem().map_or_else(|| "corpus".to_string(), |s| s.to_string_lossy().into_owned())
}

fn load_named(path: &Path) -> Result<LabeledCorpus> {
    Ok(load_corpus(path, &domain_name(path))?)
}

/// Validates inputs, creates the output directory and records the manifest.
fn start<A: Serialize>(command: &'static str, args: &A, seed: Option<u64>, out: &Path, inputs: &[&Path]) -> Result<()> {
    let inputs = checksum_inputs(inputs)?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let manifest = Manifest {
        command,
        version: env!("CARGO_PKG_VERSION"),
        seed,
        config: serde_json::to_value(args)?,
        inputs,
    };
    write_manifest(out, &manifest)
}

fn predictions_text(labels: &[Option<Label>]) -> String {
    labels
        .iter()
        .map(|l| l.map_or("unlabeled", Label::as_str).to_string() + "\n")
        .collect()
}

/// Scores aligned predictions and writes `eval.json` and `eval.txt`.
fn write_evaluation(
    out: &Path,
    system: &str,
    source: &str,
    target: &str,
    predictions: &[Option<Label>],
    gold: &LabeledCorpus,
) -> Result<EvalDocument> {
    let (pred, truth): (Vec<Label>, Vec<Label>) = predictions
        .iter()
        .zip(&gold.documents)
        .filter_map(|(p, d)| Some((*p)?).zip(d.label))
        .unzip();
    let skipped = predictions.len() - pred.len();
    if skipped > 0 {
        warn!("{skipped} documents without a prediction or gold label are not scored");
    }
    let report = evaluate(&pred, &truth).context("no scorable documents")?;
    let doc = EvalDocument {
        system: system.to_string(),
        source: source.to_string(),
        target: target.to_string(),
        evaluated: pred.len(),
        skipped,
        report,
    };
    write_json(out, "eval.json", &doc)?;
    write_file(
        out,
        "eval.txt",
        format!("system {system}  source {source}  target {target}\n{}", doc.report.to_text()),
    )?;
    Ok(doc)
}

fn train_report_text(report: &TrainReport) -> String {
    let mut out = String::new();
    writeln!(out, "{:>5} {:>12} {:>12} {:>12} {:>8}", "epoch", "joint", "sentiment", "projection", "dev_f1").unwrap();
    let i = &report.initial;
    writeln!(out, "{:>5} {:>12.6} {:>12.6} {:>12.6} {:>8}", 0, i.joint, i.sentiment, i.projection, "-").unwrap();
    for e in 0..report.epochs_run() {
        let dev = report.dev_macro_f1.get(e).map_or("-".to_string(), |f| format!("{f:.4}"));
        writeln!(
            out,
            "{:>5} {:>12.6} {:>12.6} {:>12.6} {:>8}",
            e + 1,
            report.joint_loss[e],
            report.sentiment_loss[e],
            report.projection_loss[e],
            dev
        )
        .unwrap();
    }
    writeln!(out, "best epoch {}", report.best_epoch).unwrap();
    out
}

pub fn run_train(args: &TrainArgs) -> Result<()> {
    let mut inputs = vec![args.source_emb.as_path(), args.target_emb.as_path(), args.train.as_path(), args.dev.as_path(), args.lexicon.as_path()];
    inputs.extend(args.test.as_deref());
    let h = &args.hyper;
    let config = TrainConfig {
        alpha: h.alpha,
        epochs: h.epochs,
        batch_size: h.batch_size,
        learning_rate: h.lr,
        seed: args.seed.seed,
        init: h.init,
        optimizer: h.optimizer,
        ablate_target_matrix: h.ablate_mprime,
        joint_dim: h.joint_dim,
    };
    config.validate().map_err(|e| usage(e.to_string()))?;
    start("train", args, Some(args.seed.seed), &args.out, &inputs)?;

    let source = load_text_embeddings(&args.source_emb)?;
    let target = load_text_embeddings(&args.target_emb)?;
    let train_corpus = load_named(&args.train)?;
    let dev = load_named(&args.dev)?;
    let lexicon = ProjectionLexicon::load(&args.lexicon)?;
    info!(
        "source {}x{}, target {}x{}, {} train / {} dev documents, {} lexicon pairs",
        source.vocab_size(),
        source.dimension(),
        target.vocab_size(),
        target.dimension(),
        train_corpus.len(),
        dev.len(),
        lexicon.len()
    );

    let (model, report) = if args.alpha_grid.is_empty() && args.batch_grid.is_empty() {
        train(&source, &target, &lexicon, &train_corpus, &dev, &config)?
    } else {
        let alphas = if args.alpha_grid.is_empty() { vec![h.alpha] } else { args.alpha_grid.clone() };
        let batches = if args.batch_grid.is_empty() { vec![h.batch_size] } else { args.batch_grid.clone() };
        let result = tune(&source, &target, &lexicon, &train_corpus, &dev, &config, &alphas, &batches)?;
        let mut csv = String::from("alpha,batch_size,best_epoch,dev_macro_f1\n");
        for t in &result.trials {
            writeln!(csv, "{},{},{},{}", t.alpha, t.batch_size, t.best_epoch, t.dev_macro_f1).unwrap();
        }
        write_file(&args.out, "trials.csv", csv)?;
        (result.model, result.report)
    };
    save_model(&model, args.out.join("model.json"))?;
    write_json(&args.out, "train_report.json", &report)?;
    write_file(&args.out, "train_report.txt", train_report_text(&report))?;
    println!(
        "best epoch {} of {}, dev macro F1 {}",
        report.best_epoch,
        report.epochs_run(),
        report.best_dev_macro_f1().map_or("n/a".into(), |f| format!("{f:.4}"))
    );

    if let Some(test_path) = &args.test {
        let test = load_named(test_path)?;
        let preds = model.classify_target(&target, &test, args.seed.seed)?;
        write_file(&args.out, "predictions.txt", predictions_text(&preds.labels))?;
        let system = if h.ablate_mprime { "blse_ablated" } else { "blse" };
        let doc = write_evaluation(&args.out, system, &args.source_name, &args.target_name, &preds.labels, &test)?;
        println!("target accuracy {:.4}, macro F1 {:.4}", doc.report.accuracy, doc.report.macro_f1);
    }
    Ok(())
}

pub fn run_predict(args: &PredictArgs) -> Result<()> {
    start(
        "predict",
        args,
        Some(args.seed.seed),
        &args.out,
        &[&args.model, &args.target_emb, &args.test],
    )?;
    let model = load_model(&args.model)?;
    let space = load_text_embeddings(&args.target_emb)?;
    let corpus = load_named(&args.test)?;
    let preds: Predictions = if args.source_side {
        model.classify_source(&space, &corpus, args.seed.seed)?
    } else {
        model.classify_target(&space, &corpus, args.seed.seed)?
    };
    write_file(&args.out, "predictions.txt", predictions_text(&preds.labels))?;
    println!("{} documents labeled, {} skipped", preds.labels.len() - preds.skipped, preds.skipped);
    Ok(())
}

fn read_predictions(path: &Path) -> Result<Vec<Option<Label>>> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    text.lines()
        .enumerate()
        .map(|(i, line)| {
            parse_label_token(line.trim()).map_err(|m| anyhow!("{}:{}: {m}", path.display(), i + 1))
        })
        .collect()
}

pub fn run_eval(args: &EvalArgs) -> Result<()> {
    start("eval", args, None, &args.out, &[&args.predictions, &args.test])?;
    let predictions = read_predictions(&args.predictions)?;
    let gold = load_named(&args.test)?;
    if predictions.len() != gold.len() {
        return Err(anyhow!(
            "{} has {} predictions but {} has {} documents",
            args.predictions.display(),
            predictions.len(),
            args.test.display(),
            gold.len()
        ));
    }
    let doc = write_evaluation(&args.out, &args.system, &args.source_name, &args.target_name, &predictions, &gold)?;
    print!("{}", doc.report.to_text());
    Ok(())
}

fn parse_corpus_spec(spec: &str) -> (String, PathBuf) {
    match spec.split_once('=') {
        Some((name, path)) if !name.is_empty() => (name.to_string(), PathBuf::from(path)),
        _ => {
            let path = PathBuf::from(spec);
            (domain_name(&path), path)
        }
    }
}

pub fn run_divergence(args: &DivergenceArgs) -> Result<()> {
    if args.corpora.len() < 2 {
        return Err(usage("divergence needs at least two --corpus arguments"));
    }
    if args.mode == DivergenceMode::Similarity && args.variant != DivergenceVariant::JensenShannon {
        return Err(usage("--mode similarity requires --variant jensen_shannon"));
    }
    let specs: Vec<(String, PathBuf)> = args.corpora.iter().map(|s| parse_corpus_spec(s)).collect();
    let paths: Vec<&Path> = specs.iter().map(|(_, p)| p.as_path()).collect();
    start("divergence", args, None, &args.out, &paths)?;
    let corpora = specs
        .iter()
        .map(|(name, path)| Ok(load_corpus(path, name)?))
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&LabeledCorpus> = corpora.iter().collect();
    let matrix = divergence_matrix(&refs, args.k, args.smoothing, args.variant, args.mode)?;
    write_file(&args.out, "divergence.csv", matrix.to_csv())?;
    write_file(&args.out, "divergence.txt", matrix.to_text())?;
    write_json(&args.out, "divergence.json", &matrix)?;
    print!("{}", matrix.to_text());
    Ok(())
}

fn require<'a>(value: &'a Option<PathBuf>, flag: &str, strategy: &str) -> Result<&'a Path> {
    value
        .as_deref()
        .ok_or_else(|| usage(format!("--strategy {strategy} needs {flag}")))
}

pub fn run_lexicon(args: &LexiconArgs) -> Result<()> {
    let mut inputs: Vec<&Path> = Vec::new();
    match args.strategy {
        Strategy::Frequency | Strategy::Sentiment => {
            if args.corpora.is_empty() {
                return Err(usage("this strategy needs at least one --corpus"));
            }
            inputs.extend(args.corpora.iter().map(PathBuf::as_path));
            if let Strategy::Sentiment = args.strategy {
                inputs.push(require(&args.sentiment_words, "--sentiment-words", "sentiment")?);
            }
        }
        Strategy::Mi => {
            inputs.push(require(&args.train, "--train", "mi")?);
            inputs.push(require(&args.source_unlabeled, "--source-unlabeled", "mi")?);
            inputs.push(require(&args.target_unlabeled, "--target-unlabeled", "mi")?);
        }
    }
    inputs.extend(args.source_emb.as_deref());
    inputs.extend(args.target_emb.as_deref());
    start("lexicon", args, None, &args.out, &inputs)?;

    let lexicon = match args.strategy {
        Strategy::Frequency | Strategy::Sentiment => {
            let corpora = args.corpora.iter().map(|p| load_named(p)).collect::<Result<Vec<_>>>()?;
            let refs: Vec<&LabeledCorpus> = corpora.iter().collect();
            match &args.sentiment_words {
                Some(words_path) if matches!(args.strategy, Strategy::Sentiment) => {
                    let text = fs::read_to_string(words_path).with_context(|| format!("reading {}", words_path.display()))?;
                    let words: Vec<&str> = text.lines().map(str::trim).filter(|w| !w.is_empty()).collect();
                    build_sentiment_subset(&words, &refs)?
                }
                _ => build_frequency_identity(&refs, args.k),
            }
        }
        Strategy::Mi => {
            let labeled = load_named(args.train.as_deref().expect("checked"))?;
            let source = load_named(args.source_unlabeled.as_deref().expect("checked"))?;
            let target = load_named(args.target_unlabeled.as_deref().expect("checked"))?;
            let scores = score_mi_pivots(&labeled, &source, &target, args.min_count, args.mi_target)?;
            let top: Vec<_> = scores.into_iter().take(args.top_m).collect();
            let mut tsv = String::from("feature\tmutual_information\n");
            for s in &top {
                writeln!(tsv, "{}\t{}", s.feature, s.score).unwrap();
            }
            write_file(&args.out, "pivots.tsv", tsv)?;
            ProjectionLexicon::identity(top.into_iter().map(|s| s.feature))
        }
    };
    let lexicon = match (&args.source_emb, &args.target_emb) {
        (Some(s), Some(t)) => {
            let (kept, dropped) = lexicon.filter_resolvable(&load_text_embeddings(s)?, &load_text_embeddings(t)?);
            info!("dropped {dropped} pairs missing from the embedding spaces");
            kept
        }
        _ => lexicon,
    };
    lexicon.save(args.out.join("lexicon.txt"))?;
    println!("{} lexicon pairs", lexicon.len());
    Ok(())
}

#[derive(Serialize)]
struct SynthRecord<'a> {
    spec: &'a SyntheticSpec,
    rotation: Vec<Vec<f64>>,
    direction: Vec<f64>,
}

pub fn run_synth(args: &SynthArgs) -> Result<()> {
    let spec = SyntheticSpec {
        dimension: args.dimension,
        vocab_size: args.vocab_size,
        sentiment_fraction: args.sentiment_fraction,
        separation: args.separation,
        rotation: args.rotation,
        noise: args.noise,
        sentence_length: args.sentence_length,
        train_size: args.train_size,
        dev_size: args.dev_size,
        test_size: args.test_size,
        target_sentiment: args.target_sentiment,
        seed: args.seed,
    };
    spec.validate().map_err(|e| usage(e.to_string()))?;
    start("synth", args, Some(args.seed), &args.out, &[])?;
    let data = generate_synthetic(&spec)?;
    let out = &args.out;
    data.source_embeddings.save(out.join("source.emb"))?;
    data.target_embeddings.save(out.join("target.emb"))?;
    data.source.train.save(out.join("train.txt"))?;
    data.source.dev.save(out.join("dev.txt"))?;
    data.source.test.save(out.join("test.txt"))?;
    data.target_test.save(out.join("target_test.txt"))?;
    data.lexicon.save(out.join("lexicon.txt"))?;
    let record = SynthRecord {
        spec: &spec,
        rotation: data.rotation.rows().into_iter().map(|r| r.to_vec()).collect(),
        direction: data.direction.to_vec(),
    };
    write_json(out, "synth.json", &record)?;
    println!(
        "wrote {}-dimensional spaces over {} words and {}/{}/{} source + {} target documents to {}",
        spec.dimension,
        spec.vocab_size,
        spec.train_size,
        spec.dev_size,
        spec.test_size,
        spec.test_size,
        out.display()
    );
    Ok(())
}

pub fn run_baseline(args: &BaselineArgs) -> Result<()> {
    start(
        "baseline",
        args,
        Some(args.seed.seed),
        &args.out,
        &[&args.train, &args.dev, &args.test],
    )?;
    let train_corpus = load_named(&args.train)?;
    let dev = load_named(&args.dev)?;
    let test = load_named(&args.test)?;
    let options = SolverOptions {
        epochs: args.epochs,
        seed: args.seed.seed,
        ..SolverOptions::default()
    };
    let model = fit_noad(&train_corpus, &dev, &args.c_grid, args.max_n, args.min_df, args.weighting, &options)?;
    model.save(args.out.join("noad_model.json"))?;
    let mut grid = String::from("c,dev_accuracy\n");
    for (c, acc) in &model.grid {
        writeln!(grid, "{c},{acc}").unwrap();
    }
    write_file(&args.out, "grid.csv", grid)?;
    let labels: Vec<Option<Label>> = model.predict_corpus(&test).into_iter().map(Some).collect();
    write_file(&args.out, "predictions.txt", predictions_text(&labels))?;
    let doc = write_evaluation(&args.out, &args.system, &args.source_name, &args.target_name, &labels, &test)?;
    println!("C = {}, test accuracy {:.4}, macro F1 {:.4}", model.model.c, doc.report.accuracy, doc.report.macro_f1);
    Ok(())
}

pub fn run_plot_data(args: &PlotDataArgs) -> Result<()> {
    let paths: Vec<&Path> = args.reports.iter().map(PathBuf::as_path).collect();
    start("plot-data", args, None, &args.out, &paths)?;
    let docs = args
        .reports
        .iter()
        .map(|p| {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            serde_json::from_str::<EvalDocument>(&text)
                .with_context(|| format!("{} is not an evaluation report", p.display()))
        })
        .collect::<Result<Vec<_>>>()?;
    let csv = plot_rows(&docs, args.group_by);
    write_file(&args.out, "plot_data.csv", &csv)?;
    println!("{} rows", csv.lines().count() - 1);
    Ok(())
}
