use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde::Serialize;
use serde_json::json;
use structkv::canonical::to_canonical_pretty;
use structkv::config::{InputConfig, PipelineConfig};
use structkv::cpg::export_cpg_json;
use structkv::lexer::{LanguageTag, SourceFile};
use structkv::pipeline::{self, chunk_cpg, load_corpus, text_tokens, ChunkedCorpus};
use structkv::plan::CompressionPlan;
use structkv::scoring::{select_topk, MockScorer};
use structkv::{metrics, Error, Result};

#[derive(Parser)]
#[command(name = "structkv", version, about = "Structure-aware KV-cache compression planner for code")]
struct Cli {
    /// Pipeline configuration (JSON). Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory the JSON artifacts are written to.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads for scoring and per-chunk work.
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Partition every *.py file under a directory into chunks.
    Chunk { dir: PathBuf },
    /// Build the graph of every chunk of one file.
    Cpg { file: PathBuf },
    /// Score all chunks against a query and report the top-k selection.
    Score {
        #[arg(long)]
        query: Option<String>,
        #[arg(long)]
        corpus: Option<PathBuf>,
    },
    /// Produce a compression plan at a given capacity ratio and k.
    Compress {
        #[arg(long)]
        cap: f64,
        #[arg(long)]
        k: usize,
        #[arg(long)]
        corpus: Option<PathBuf>,
        #[arg(long)]
        query: Option<String>,
        #[arg(long)]
        prefix: Option<String>,
    },
    /// Compute retention metrics for an existing plan.
    Evaluate {
        #[arg(long)]
        plan: PathBuf,
    },
    /// Run the whole pipeline from `--config`, which must name its inputs.
    Pipeline,
}

fn load_config(path: Option<&Path>) -> Result<PipelineConfig> {
    match path {
        Some(p) => PipelineConfig::load(p),
        None => Ok(PipelineConfig::default()),
    }
}

fn write(out: &Path, name: &str, value: &impl Serialize) -> Result<PathBuf> {
    let io = |e| Error::Io {
        path: out.display().to_string(),
        source: e,
    };
    fs::create_dir_all(out).map_err(io)?;
    let path = out.join(name);
    let mut text = to_canonical_pretty(value)?;
    text.push('\n');
    fs::write(&path, text).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })?;
    Ok(path)
}

/// Fill in corpus/query/prefix from flags, then from the config's input.
fn input(cfg: &PipelineConfig, corpus: Option<PathBuf>, query: Option<String>, prefix: Option<String>) -> Result<InputConfig> {
    let from_cfg = cfg.input.clone();
    let corpus = corpus
        .or_else(|| from_cfg.as_ref().map(|i| i.corpus.clone()))
        .ok_or_else(|| Error::Config("no corpus given (--corpus or input.corpus)".into()))?;
    let query = query
        .or_else(|| from_cfg.as_ref().map(|i| i.query.clone()))
        .ok_or_else(|| Error::Config("no query given (--query or input.query)".into()))?;
    let prefix = prefix.or_else(|| from_cfg.map(|i| i.prefix)).unwrap_or_default();
    Ok(InputConfig { corpus, query, prefix })
}

fn run_plan(cfg: &PipelineConfig, input: &InputConfig, out: &Path, workers: usize) -> Result<serde_json::Value> {
    let files = load_corpus(&input.corpus)?;
    let (plan, report) = pipeline::run_pipeline(files, &input.query, &input.prefix, cfg, workers)?;
    let plan_path = out.join("plan.json");
    fs::create_dir_all(out).map_err(|e| Error::Io {
        path: out.display().to_string(),
        source: e,
    })?;
    fs::write(&plan_path, plan.to_json()? + "\n").map_err(|e| Error::Io {
        path: plan_path.display().to_string(),
        source: e,
    })?;
    let report_path = write(
        out,
        "report.json",
        &json!({"config_fingerprint": plan.config_fingerprint, "retention": report}),
    )?;
    Ok(json!({"plan": plan_path, "report": report_path, "chunks": plan.chunks.len()}))
}

fn run(cli: Cli) -> Result<serde_json::Value> {
    let out = cli.out.as_path();
    match cli.cmd {
        Cmd::Chunk { dir } => {
            let cfg = load_config(cli.config.as_deref())?;
            let corpus = ChunkedCorpus::new(load_corpus(&dir)?, &cfg.chunking)?;
            let chunks: Vec<_> = corpus.chunks.iter().map(|(_, c)| c).collect();
            let path = write(out, "chunks.json", &chunks)?;
            Ok(json!({"chunks": path, "count": chunks.len()}))
        }
        Cmd::Cpg { file } => {
            let cfg = load_config(cli.config.as_deref())?;
            let bytes = fs::read(&file).map_err(|e| Error::Io {
                path: file.display().to_string(),
                source: e,
            })?;
            let src = SourceFile::from_bytes(file.display().to_string(), &bytes, LanguageTag::SubsetPy)?;
            let corpus = ChunkedCorpus::new(vec![src], &cfg.chunking)?;
            let graphs: Vec<serde_json::Value> = (0..corpus.chunks.len())
                .map(|id| {
                    let text = export_cpg_json(&chunk_cpg(corpus.chunk_tokens(id), id));
                    serde_json::from_str(&text).map_err(Error::from)
                })
                .collect::<Result<_>>()?;
            let path = write(out, "cpg.json", &graphs)?;
            Ok(json!({"cpg": path, "chunks": graphs.len()}))
        }
        Cmd::Score { query, corpus } => {
            let cfg = load_config(cli.config.as_deref())?;
            let input = input(&cfg, corpus, query, None)?;
            let corpus = ChunkedCorpus::new(load_corpus(&input.corpus)?, &cfg.chunking)?;
            let q = text_tokens(&input.query);
            if q.is_empty() {
                return Err(Error::Parameter("query has no tokens".into()));
            }
            let prefix = text_tokens(&input.prefix);
            let scores = match cfg.backend {
                structkv::config::BackendKind::Mock => pipeline::score_all(&corpus, &MockScorer, &prefix, &q, cli.workers)?,
                structkv::config::BackendKind::Http => {
                    let h = &cfg.http;
                    let scorer = structkv::backend::HttpScorer::new(&h.url, h.timeout_ms, h.retries);
                    pipeline::score_all(&corpus, &scorer, &prefix, &q, cli.workers)?
                }
            };
            let selected = if scores.is_empty() {
                Vec::new()
            } else {
                select_topk(&scores, cfg.selection.top_k)?
            };
            let rows: Vec<_> = scores
                .iter()
                .map(|&(id, s)| json!({"chunk_id": id, "file": corpus.chunks[id].1.file, "nll_mean": s}))
                .collect();
            let path = write(out, "scores.json", &json!({"scores": rows, "selected": selected}))?;
            Ok(json!({"scores": path, "selected": selected}))
        }
        Cmd::Compress {
            cap,
            k,
            corpus,
            query,
            prefix,
        } => {
            let mut cfg = load_config(cli.config.as_deref())?;
            cfg.allocation.r = cap;
            if cfg.allocation.r_max < cap {
                cfg.allocation.r_max = cap.min(1.0);
            }
            cfg.selection.top_k = k;
            let input = input(&cfg, corpus, query, prefix)?;
            cfg.validate()?;
            run_plan(&cfg, &input, out, cli.workers)
        }
        Cmd::Evaluate { plan } => {
            let text = fs::read_to_string(&plan).map_err(|e| Error::Io {
                path: plan.display().to_string(),
                source: e,
            })?;
            let plan = CompressionPlan::from_json(&text)?;
            let report = metrics::retention_report(&plan);
            let violations = plan.violations();
            let path = write(
                out,
                "evaluation.json",
                &json!({
                    "config_fingerprint": plan.config_fingerprint,
                    "retention": report,
                    "violations": violations,
                }),
            )?;
            Ok(json!({"evaluation": path, "structure_score": report.structure_score}))
        }
        Cmd::Pipeline => {
            let config = cli
                .config
                .ok_or_else(|| Error::Config("pipeline needs --config".into()))?;
            let cfg = PipelineConfig::load(&config)?;
            let input = input(&cfg, None, None, None)?;
            // relative corpus paths are taken from the config's directory
            let input = if input.corpus.is_relative() {
                let base = config.parent().unwrap_or(Path::new("."));
                InputConfig {
                    corpus: base.join(&input.corpus),
                    ..input
                }
            } else {
                input
            };
            run_plan(&cfg, &input, out, cli.workers)
        }
    }
}

fn fail(kind: &str, message: &str, code: u8) -> ExitCode {
    eprintln!("{}", json!({"error": {"kind": kind, "message": message}}));
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion) => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail("usage", e.to_string().trim(), 2),
    };
    match run(cli) {
        Ok(summary) => {
            println!("{summary}");
            ExitCode::SUCCESS
        }
        Err(e) => fail(e.kind(), &e.to_string(), 1),
    }
}
