use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use scbow_core::analysis;
use scbow_core::corpus::{Corpus, CorpusIndex, Vocabulary};
use scbow_core::embedio::{self, Checkpoint, EmbeddingTable};
use scbow_core::eval;
use scbow_core::model::{Progress, TrainConfig, Trainer};
use scbow_core::Error;

use crate::manifest::{corpus_digest, Manifest};
use crate::{AnalyzeArgs, BenchArgs, CompareArgs, ConvertArgs, EvalArgs, Failure, ReportFormat, TrainArgs};

type CmdResult = Result<(), Failure>;

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = OsString::from(path.as_os_str());
    s.push(suffix);
    PathBuf::from(s)
}

pub fn checkpoint_path(output: &Path) -> PathBuf {
    with_suffix(output, ".ckpt")
}

pub fn manifest_path(output: &Path) -> PathBuf {
    with_suffix(output, ".manifest")
}

fn unix_now() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

pub fn train(args: &TrainArgs) -> CmdResult {
    if args.dim.is_empty() || args.negatives.is_empty() {
        return Err(Failure::Usage("--dim and --negatives need at least one value".into()));
    }
    let sweep = args.dim.len() * args.negatives.len() > 1;
    if sweep && args.resume.is_some() {
        return Err(Failure::Usage("--resume cannot be combined with a sweep".into()));
    }
    let configs: Vec<TrainConfig> = args
        .dim
        .iter()
        .flat_map(|&dim| {
            args.negatives.iter().map(move |&n_negatives| TrainConfig {
                dim,
                n_negatives,
                batch_size: args.batch_size,
                initial_lr: args.lr,
                epochs: args.epochs,
                seed: args.seed,
                min_count: args.min_count,
                lr_floor_fraction: args.lr_floor,
            })
        })
        .collect();
    for config in &configs {
        config.validate()?;
    }

    let corpus = Corpus::from_path(&args.corpus)?;
    let digest = corpus_digest(&args.corpus)?;
    for config in configs {
        let output = if sweep {
            let dir = args.output.join(format!("dim{}-neg{}", config.dim, config.n_negatives));
            fs::create_dir_all(&dir)?;
            dir.join("vectors.txt")
        } else {
            args.output.clone()
        };
        eprintln!("run dim={} negatives={} -> {}", config.dim, config.n_negatives, output.display());
        train_one(args, &corpus, &digest, config, &output)?;
    }
    Ok(())
}

fn train_one(args: &TrainArgs, corpus: &Corpus, digest: &str, config: TrainConfig, output: &Path) -> CmdResult {
    let started = unix_now();
    let (vocab, resume) = match &args.resume {
        Some(path) => {
            let ckpt = embedio::load_checkpoint(path)?;
            let state = ckpt
                .state
                .ok_or_else(|| Failure::Usage(format!("{} holds no training state", path.display())))?;
            (ckpt.table.vocab, Some((ckpt.table.matrix, state)))
        }
        None => (Vocabulary::build(corpus.sentences(), config.min_count)?, None),
    };
    let index = CorpusIndex::build(&vocab, corpus);
    let mut trainer = match resume {
        Some((matrix, state)) => Trainer::resume(&index, config.clone(), matrix, state)?,
        None => Trainer::new(&index, vocab.len(), config.clone())?,
    }
    .with_progress_every(args.progress_every);
    eprintln!(
        "vocab={} sentences={} documents={} windows={}",
        vocab.len(),
        index.len(),
        index.num_documents(),
        trainer.num_windows()
    );

    let mut sink = |p: &Progress| {
        eprintln!(
            "progress epoch={} batches={} examples={} loss={:.6} examples_per_sec={:.0} skipped={} lr={:.3e}",
            p.epoch, p.batches_done, p.examples_seen, p.mean_loss, p.examples_per_sec, p.skipped, p.lr
        );
    };
    let ckpt_path = checkpoint_path(output);
    let save = |trainer: &Trainer<'_>| -> CmdResult {
        let checkpoint = Checkpoint {
            table: EmbeddingTable::new(vocab.clone(), trainer.matrix().clone())?,
            state: Some(trainer.state()),
        };
        embedio::save_checkpoint(&checkpoint, &ckpt_path)?;
        Ok(())
    };
    let mut saved = false;
    let mut budget = args.stop_after.unwrap_or(usize::MAX);
    while !trainer.is_finished() && budget > 0 {
        budget -= 1;
        trainer.run_epoch(&mut sink)?;
        save(&trainer)?;
        saved = true;
    }
    if !saved {
        save(&trainer)?;
    }
    let state = trainer.state();
    let (matrix, metrics, _) = trainer.into_parts();
    let table = EmbeddingTable::new(vocab, matrix)?;
    embedio::export_text(&table, output)?;

    let finished = unix_now();
    let mut m = Manifest::default();
    m.push("tool", env!("CARGO_PKG_NAME"))
        .push("version", env!("CARGO_PKG_VERSION"))
        .push("corpus", args.corpus.display())
        .push("corpus_sha256", digest)
        .push("dim", config.dim)
        .push("negatives", config.n_negatives)
        .push("batch_size", config.batch_size)
        .push("lr", config.initial_lr)
        .push("lr_floor", config.lr_floor_fraction)
        .push("epochs", config.epochs)
        .push("seed", config.seed)
        .push("min_count", table.vocab.min_count())
        .push("resumed_from", args.resume.as_ref().map_or("-".into(), |p| p.display().to_string()))
        .push("vocab_size", table.vocab.len())
        .push("batches", state.batches_done)
        .push("examples", metrics.examples)
        .push("skipped_examples", metrics.skipped_examples)
        .push(
            "final_loss",
            metrics.progress.last().map_or("-".into(), |p| format!("{:.6}", p.mean_loss)),
        )
        .push("embeddings", output.display())
        .push("checkpoint", ckpt_path.display())
        .push("started_unix", format!("{started:.3}"))
        .push("finished_unix", format!("{finished:.3}"))
        .push("wall_seconds", format!("{:.3}", finished - started));
    m.write(&manifest_path(output))?;
    println!("{}", output.display());
    Ok(())
}

pub fn eval(args: &EvalArgs) -> CmdResult {
    let table = embedio::load_table(&args.embeddings)?;
    if let Some(dir) = &args.scores_dir {
        fs::create_dir_all(dir)?;
    }
    let mut rows = Vec::new();
    for path in &args.dataset {
        let pairs = eval::load_pairs(path)?;
        let report = eval::evaluate(&table.matrix, &table.vocab, &pairs)?;
        if let Some(dir) = &args.scores_dir {
            let stem = path.file_stem().unwrap_or_default().to_string_lossy();
            let mut out = String::new();
            for (score, pair) in report.system_scores.iter().zip(&pairs) {
                let fmt = |v: Option<f64>| v.map_or_else(|| "nan".to_string(), |v| v.to_string());
                out.push_str(&format!("{}\t{}\n", fmt(*score), fmt(pair.gold)));
            }
            fs::write(dir.join(format!("{stem}.scores.tsv")), out)?;
        }
        rows.push((path.display().to_string(), report));
    }
    match args.report {
        ReportFormat::Tsv => {
            println!("dataset\tpearson\tspearman\tn_scored\tn_skipped");
            for (name, r) in &rows {
                println!("{name}\t{}\t{}\t{}\t{}", r.pearson, r.spearman, r.n_scored, r.n_skipped);
            }
        }
        ReportFormat::Table => {
            let width = rows.iter().map(|(n, _)| n.len()).max().unwrap_or(7).max(7);
            println!("{:<width$}  {:>8}  {:>8}  {:>7}  {:>7}", "dataset", "pearson", "spearman", "scored", "skipped");
            for (name, r) in &rows {
                println!(
                    "{name:<width$}  {:>8.4}  {:>8.4}  {:>7}  {:>7}",
                    r.pearson, r.spearman, r.n_scored, r.n_skipped
                );
            }
        }
    }
    Ok(())
}

/// `(system, gold)` per line; `nan` marks a missing value.
pub fn read_scores(path: &Path) -> Result<Vec<(f64, f64)>, Failure> {
    let text = fs::read_to_string(path)?;
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |msg: String| Failure::Core(Error::Parse { line: i + 1, message: msg });
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 2 {
            return Err(parse_err(format!("expected `score TAB gold`, got `{line}`")));
        }
        let num = |s: &str| s.trim().parse::<f64>().map_err(|_| parse_err(format!("invalid number `{s}`")));
        out.push((num(fields[0])?, num(fields[1])?));
    }
    Ok(out)
}

pub fn compare(args: &CompareArgs) -> CmdResult {
    let a = read_scores(&args.run_a)?;
    let b = read_scores(&args.run_b)?;
    if a.len() != b.len() {
        return Err(Failure::Core(Error::Parse {
            line: a.len().min(b.len()) + 1,
            message: format!("score files differ in length ({} vs {})", a.len(), b.len()),
        }));
    }
    if let Some(i) = a
        .iter()
        .zip(&b)
        .position(|((_, ga), (_, gb))| !(ga == gb || ga.is_nan() && gb.is_nan()))
    {
        return Err(Failure::Core(Error::Parse {
            line: i + 1,
            message: "gold scores disagree; files do not describe the same dataset".into(),
        }));
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = a
        .iter()
        .zip(&b)
        .filter(|((sa, _), (sb, _))| sa.is_finite() && sb.is_finite())
        .map(|((sa, _), (sb, _))| (*sa, *sb))
        .unzip();
    let r = eval::wilcoxon_signed_rank(&xs, &ys)?;
    println!("pairs\t{}", xs.len());
    println!("statistic\t{}", r.statistic);
    println!("n_effective\t{}", r.n_effective);
    println!("p_value\t{:e}", r.p_value);
    println!("exact\t{}", r.exact);
    println!("significant\t{}", r.significant);
    Ok(())
}

pub fn analyze(args: &AnalyzeArgs) -> CmdResult {
    if args.norms.is_none() && args.neighbors.is_none() {
        return Err(Failure::Usage("give --norms K and/or --neighbors TOKEN".into()));
    }
    let table = embedio::load_table(&args.embeddings)?;
    if let Some(k) = args.norms {
        let (low, high) = analysis::norm_ranking(&table.matrix, &table.vocab, k)?;
        println!("# lowest norm");
        for (t, n) in &low.entries {
            println!("{t}\t{n:.6}");
        }
        println!("# highest norm");
        for (t, n) in &high.entries {
            println!("{t}\t{n:.6}");
        }
    }
    if let Some(query) = &args.neighbors {
        let hits = analysis::nearest_neighbors(&table.matrix, &table.vocab, query, args.min_cos)?;
        println!("# neighbours of {query} with cosine >= {}", args.min_cos);
        for (t, c) in &hits {
            println!("{t}\t{c:.6}");
        }
    }
    Ok(())
}

pub fn bench(args: &BenchArgs) -> CmdResult {
    let table = embedio::load_table(&args.embeddings)?;
    let pairs = eval::load_pairs(&args.pairs)?;
    let r = analysis::benchmark_pairs(&table.matrix, &table.vocab, &pairs);
    println!("pairs\t{}", r.pairs);
    println!("scored\t{}", r.scored);
    println!("total_seconds\t{:.6e}", r.total_seconds);
    println!("seconds_per_pair\t{:.6e}", r.seconds_per_pair);
    Ok(())
}

pub fn export(args: &ConvertArgs) -> CmdResult {
    let ckpt = embedio::load_checkpoint(&args.input)?;
    embedio::export_text(&ckpt.table, &args.output)?;
    Ok(())
}

pub fn import(args: &ConvertArgs) -> CmdResult {
    let table = embedio::import_text(&args.input)?;
    embedio::save_checkpoint(&Checkpoint { table, state: None }, &args.output)?;
    Ok(())
}
