use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use wikicheck::datasets::{
    build_pair_dataset, filter_pipeline, load_fever, load_pairs_tsv, sample_nei_train, save_pairs_tsv, WikiDumpIndex,
};
use wikicheck::evalkit::{evaluate, read_eval_records, LatencyReport};
use wikicheck::nli::TrainConfig;

use crate::config::PipelineConfig;
use crate::pipeline::Pipeline;
use crate::training::train_on_pairs;

#[derive(Debug, Parser)]
#[command(name = "wikicheck", version, about = "Fact-check claims against a wiki")]
pub struct Cli {
    /// TOML configuration file; WIKICHECK_* variables override it.
    #[arg(long, global = true, env = "WIKICHECK_CONFIG")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Verify one claim and print the verdict as JSON.
    Check { claim: String },
    /// Run the HTTP service.
    Serve,
    /// Build NLI training pairs from a FEVER file and the wiki-pages dump.
    PrepareData {
        fever: PathBuf,
        dump_dir: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Strip link columns and bracket tokens from hypotheses.
        #[arg(long)]
        clean: bool,
        /// Apply dedup, hypothesis balancing and NEI undersampling.
        #[arg(long)]
        filter: bool,
        #[arg(long, short, default_value = "pairs.tsv")]
        out: PathBuf,
    },
    /// Fit a classification head on a pair TSV file.
    TrainHead {
        pairs: PathBuf,
        #[arg(long, short, default_value = "head.json")]
        out: PathBuf,
        #[arg(long, default_value_t = 10)]
        epochs: usize,
        #[arg(long, default_value_t = 1e-3)]
        learning_rate: f64,
        #[arg(long, default_value_t = 32)]
        batch_size: usize,
        #[arg(long, default_value_t = 128)]
        hidden: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Score prediction records (JSONL) and print the metric report.
    Evaluate {
        records: PathBuf,
        #[arg(long, default_value_t = 5)]
        k: usize,
        /// Also write per-record outcomes as TSV.
        #[arg(long)]
        outcomes: Option<PathBuf>,
    },
    /// Check every claim of a file (one per line) and report stage latencies.
    Profile {
        claims: PathBuf,
        #[arg(long)]
        json: bool,
    },
    /// Print the query plan and merged candidates for a claim.
    Search { claim: String },
}

fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn print_json<T: serde::Serialize>(value: &T) -> anyhow::Result<()> {
    let mut out = std::io::stdout().lock();
    serde_json::to_writer_pretty(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

fn load_config(cli: &Cli) -> anyhow::Result<PipelineConfig> {
    Ok(PipelineConfig::load(cli.config.as_deref())?)
}

pub async fn run(cli: Cli) -> anyhow::Result<()> {
    match &cli.command {
        Command::Check { claim } => {
            let pipeline = Pipeline::from_config(&load_config(&cli)?)?;
            print_json(&pipeline.check(claim).await?)
        }
        Command::Serve => {
            let cfg = load_config(&cli)?;
            let pipeline = Arc::new(Pipeline::from_config(&cfg)?);
            if pipeline.predictor().is_none() {
                log::warn!("no nli.head_path configured; /api/v1/check will answer 503");
            }
            crate::server::serve(pipeline, &cfg.http.host, cfg.http.port).await
        }
        Command::Search { claim } => {
            let pipeline = Pipeline::from_config(&load_config(&cli)?)?;
            print_json(&pipeline.search(claim).await?)
        }
        Command::PrepareData {
            fever,
            dump_dir,
            seed,
            clean,
            filter,
            out,
        } => prepare_data(fever, dump_dir, *seed, *clean, *filter, out),
        Command::TrainHead {
            pairs,
            out,
            epochs,
            learning_rate,
            batch_size,
            hidden,
            seed,
        } => {
            let cfg = load_config(&cli)?;
            let train = TrainConfig {
                learning_rate: *learning_rate,
                epochs: *epochs,
                batch_size: *batch_size,
                seed: *seed,
                hidden: *hidden,
                ..Default::default()
            };
            train_head_cmd(&cfg, pairs, out, &train)
        }
        Command::Evaluate { records, k, outcomes } => {
            let (records, errors) =
                read_eval_records(records).with_context(|| format!("reading {}", records.display()))?;
            for e in &errors {
                log::warn!("skipped record, {e}");
            }
            let mut report = evaluate(&records, *k)?;
            report.warnings.extend(errors);
            if let Some(path) = outcomes {
                std::fs::write(path, report.outcomes_tsv())?;
            }
            print_json(&report)
        }
        Command::Profile { claims, json } => {
            let pipeline = Pipeline::from_config(&load_config(&cli)?)?;
            let file = std::fs::File::open(claims).with_context(|| format!("reading {}", claims.display()))?;
            let mut report = LatencyReport::new();
            for line in std::io::BufReader::new(file).lines() {
                let line = line?;
                if line.trim().is_empty() {
                    continue;
                }
                report.add(pipeline.check(&line).await?.timings);
            }
            if report.is_empty() {
                bail!("no claims in {}", claims.display());
            }
            if *json {
                print_json(&report.to_json())
            } else {
                print!("{report}");
                Ok(())
            }
        }
    }
}

fn prepare_data(fever: &Path, dump_dir: &Path, seed: u64, clean: bool, filter: bool, out: &Path) -> anyhow::Result<()> {
    let (records, errors) = load_fever(fever).with_context(|| format!("reading {}", fever.display()))?;
    for e in &errors {
        log::warn!("{}: {e}", fever.display());
    }
    let (dump, dump_errors) =
        WikiDumpIndex::load(dump_dir).with_context(|| format!("reading {}", dump_dir.display()))?;
    for e in &dump_errors {
        log::warn!("{e}");
    }
    let built = build_pair_dataset(&records, &dump, clean);
    for (id, why) in &built.skipped {
        log::warn!("record {id}: {why}");
    }
    let mut pairs = built.pairs;
    pairs.extend(sample_nei_train(&records, &dump, seed, clean));
    if filter {
        let (kept, report) = filter_pipeline(pairs, seed);
        pairs = kept;
        std::fs::write(sibling(out, ".report.json"), serde_json::to_string_pretty(&report)?)?;
        eprintln!(
            "filter: {} -> {} pairs ({:.1}% dropped)",
            report.n_input,
            report.n_after_undersample,
            100.0 * report.fraction_dropped_total
        );
    }
    save_pairs_tsv(out, &pairs)?;
    eprintln!(
        "wrote {} pairs to {} ({} malformed records, {} unresolved refs)",
        pairs.len(),
        out.display(),
        errors.len(),
        built.skipped.len()
    );
    Ok(())
}

fn train_head_cmd(cfg: &PipelineConfig, pairs_path: &Path, out: &Path, train: &TrainConfig) -> anyhow::Result<()> {
    let (pairs, errors) = load_pairs_tsv(pairs_path).with_context(|| format!("reading {}", pairs_path.display()))?;
    for e in &errors {
        log::warn!("{}: {e}", pairs_path.display());
    }
    let encoder = cfg.nli.encoder.load()?;
    let trained = train_on_pairs(&pairs, encoder.as_ref(), train)?;
    for w in &trained.warnings {
        log::warn!("{w}");
    }
    trained.head.save(out)?;
    let mut history = String::from("epoch\tloss\n");
    for (i, l) in trained.loss_history.iter().enumerate() {
        history.push_str(&format!("{}\t{l:.6}\n", i + 1));
    }
    std::fs::write(sibling(out, ".loss.tsv"), &history)?;
    eprintln!(
        "trained on {} pairs with {}; head written to {}",
        pairs.len(),
        encoder.name(),
        out.display()
    );
    print!("{history}");
    Ok(())
}
