//! End-to-end orchestration.
//!
//! tokenize, partition, score, select top-k, then per selected chunk: CPG,
//! structural score, budget, spans, protected tokens and per-layer attention
//! selection. Chunk-level work fans out on a rayon pool; every reduction is
//! done in chunk order so the plan does not depend on the worker count.

use std::collections::BTreeSet;
use std::path::Path;

use rayon::prelude::*;
use walkdir::WalkDir;

use crate::attention::{importance_heads, pool, select_tokens};
use crate::backend::{AttentionBackend, HttpAttention, HttpScorer, MockAttention};
use crate::budget::{budget, multiplier, normalize_scores};
use crate::chunker::{partition_chunks, Chunk};
use crate::config::{BackendKind, PipelineConfig};
use crate::cpg::{build_cpg, Cpg};
use crate::error::{Error, Result};
use crate::lexer::{tokenize, LanguageTag, SourceFile, Token, TokenKind};
use crate::metrics::{retention_report, RetentionReport};
use crate::parser::parse_subset;
use crate::plan::{query_position, ChunkPlan, CompressionPlan, LayerPlan, SpanRecord};
use crate::scoring::{extract_features, score_chunk, select_topk, structural_score, ChunkScorer, MockScorer};
use crate::span::{build_spans, protect_tokens, query_protection, score_span, select_spans, span_budget};

/// All `*.py` files under `dir`, in path order.
pub fn load_corpus(dir: &Path) -> Result<Vec<SourceFile>> {
    let mut files = Vec::new();
    for entry in WalkDir::new(dir).sort_by_file_name() {
        let entry = entry.map_err(|e| {
            let path = e.path().unwrap_or(dir).display().to_string();
            Error::io(path, e.into())
        })?;
        if !entry.file_type().is_file() || entry.path().extension().is_none_or(|x| x != "py") {
            continue;
        }
        let bytes = std::fs::read(entry.path()).map_err(|e| Error::io(entry.path().display().to_string(), e))?;
        let rel = entry.path().strip_prefix(dir).unwrap_or(entry.path());
        files.push(SourceFile::from_bytes(
            rel.to_string_lossy().replace('\\', "/"),
            &bytes,
            LanguageTag::SubsetPy,
        )?);
    }
    Ok(files)
}

/// Tokens of a free-text query or prefix, without line breaks and comments.
pub fn text_tokens(text: &str) -> Vec<Token> {
    crate::lexer::tokenize_str(text)
        .into_iter()
        .filter(|t| !t.is_trivia())
        .collect()
}

/// A tokenized corpus partitioned into chunks with corpus-wide ids.
pub struct ChunkedCorpus {
    pub files: Vec<SourceFile>,
    pub tokens: Vec<Vec<Token>>,
    /// `(file index, chunk)`, ids dense in file then position order.
    pub chunks: Vec<(usize, Chunk)>,
}

impl ChunkedCorpus {
    pub fn new(files: Vec<SourceFile>, cfg: &crate::chunker::ChunkConfig) -> Result<Self> {
        let mut paths = BTreeSet::new();
        for f in &files {
            if !paths.insert(f.path.as_str()) {
                return Err(Error::Parameter(format!("duplicate path {} in corpus", f.path)));
            }
        }
        let tokens: Vec<Vec<Token>> = files.iter().map(tokenize).collect();
        let mut chunks = Vec::new();
        for (fi, (f, toks)) in files.iter().zip(&tokens).enumerate() {
            for mut c in partition_chunks(&f.path, toks, cfg)? {
                c.id = chunks.len();
                chunks.push((fi, c));
            }
        }
        Ok(Self { files, tokens, chunks })
    }

    pub fn chunk_tokens(&self, id: usize) -> &[Token] {
        let (fi, c) = &self.chunks[id];
        &self.tokens[*fi][c.token_range.clone()]
    }
}

/// Parse a chunk and build its graph.
pub fn chunk_cpg(tokens: &[Token], chunk_id: usize) -> Cpg {
    build_cpg(&parse_subset(tokens), tokens, chunk_id)
}

/// Run with the backends named by the config.
pub fn run_pipeline(
    files: Vec<SourceFile>,
    query: &str,
    prefix: &str,
    cfg: &PipelineConfig,
    workers: usize,
) -> Result<(CompressionPlan, RetentionReport)> {
    match cfg.backend {
        BackendKind::Mock => {
            let attention = mock_attention(cfg);
            run_with(files, query, prefix, cfg, &MockScorer, &attention, workers)
        }
        BackendKind::Http => {
            let h = &cfg.http;
            let scorer = HttpScorer::new(&h.url, h.timeout_ms, h.retries);
            let attention = HttpAttention::new(&h.url, h.timeout_ms, h.retries);
            run_with(files, query, prefix, cfg, &scorer, &attention, workers)
        }
    }
}

pub fn mock_attention(cfg: &PipelineConfig) -> MockAttention {
    MockAttention {
        seed: cfg.seed,
        window: cfg.attention.window,
        head_dim: cfg.attention.head_dim,
        heads: cfg.attention.heads,
    }
}

fn thread_pool(workers: usize) -> Result<rayon::ThreadPool> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| Error::Parameter(format!("cannot start worker pool: {e}")))
}

/// Query-conditioned score of every chunk, in id order.
pub fn score_all(
    corpus: &ChunkedCorpus,
    scorer: &dyn ChunkScorer,
    prefix: &[Token],
    query: &[Token],
    workers: usize,
) -> Result<Vec<(usize, f64)>> {
    thread_pool(workers)?.install(|| {
        (0..corpus.chunks.len())
            .into_par_iter()
            .map(|id| Ok((id, score_chunk(scorer, id, prefix, corpus.chunk_tokens(id), query)?)))
            .collect()
    })
}

pub fn run_with(
    files: Vec<SourceFile>,
    query: &str,
    prefix: &str,
    cfg: &PipelineConfig,
    scorer: &dyn ChunkScorer,
    attention: &dyn AttentionBackend,
    workers: usize,
) -> Result<(CompressionPlan, RetentionReport)> {
    cfg.validate()?;
    if files.is_empty() {
        return Err(Error::Parameter("corpus is empty".into()));
    }
    let query_tokens = text_tokens(query);
    if query_tokens.is_empty() {
        return Err(Error::Parameter("query has no tokens".into()));
    }
    let prefix_tokens = text_tokens(prefix);
    let prefix_len = prefix_tokens.len();
    let corpus = ChunkedCorpus::new(files, &cfg.chunking)?;
    let pool_ = thread_pool(workers)?;

    let scores = score_all(&corpus, scorer, &prefix_tokens, &query_tokens, workers)?;
    let selected = if scores.is_empty() {
        Vec::new()
    } else {
        select_topk(&scores, cfg.selection.top_k)?
    };

    let analysed: Vec<(Cpg, crate::scoring::StructuralFeatures, f64)> = pool_.install(|| {
        selected
            .par_iter()
            .map(|&id| {
                let cpg = chunk_cpg(corpus.chunk_tokens(id), id);
                let f = extract_features(&cpg);
                let sigma = structural_score(&f, &cfg.scoring.weights, &cfg.scoring.tau)?;
                Ok((cpg, f, sigma))
            })
            .collect::<Result<_>>()
    })?;
    let sigmas: Vec<f64> = analysed.iter().map(|a| a.2).collect();
    let normalized = if sigmas.is_empty() {
        Vec::new()
    } else {
        normalize_scores(&sigmas, &cfg.allocation)?
    };

    let query_symbols: BTreeSet<String> = query_tokens
        .iter()
        .filter(|t| t.kind == TokenKind::Identifier)
        .map(|t| t.text.clone())
        .collect();

    let chunks: Vec<ChunkPlan> = pool_.install(|| {
        selected
            .par_iter()
            .zip(analysed.into_par_iter())
            .zip(normalized.par_iter())
            .map(|((&id, (cpg, features, sigma)), &s)| {
                let tokens = corpus.chunk_tokens(id);
                let (_, chunk) = &corpus.chunks[id];
                let m = multiplier(s, &cfg.allocation);
                let b = budget(chunk.length, m, &cfg.allocation);
                let (b_span, spans, protected) = if cfg.span.enabled {
                    protect(tokens, &cpg, b, &query_symbols, cfg)
                } else {
                    (0, Vec::new(), Vec::new())
                };
                let layers = (0..cfg.selection.layers)
                    .map(|layer| {
                        let heads = attention.heads(id, layer, chunk.length)?;
                        let u = importance_heads(&heads).map_err(|e| Error::Attention {
                            chunk_id: id,
                            layer,
                            message: e.to_string(),
                        })?;
                        let pooled = pool(&u, cfg.attention.pool_window)?;
                        let kept = select_tokens(&pooled, &protected, b);
                        let positions = kept.iter().map(|&i| prefix_len + i).collect();
                        Ok(LayerPlan { layer, kept, positions })
                    })
                    .collect::<Result<Vec<_>>>()?;
                Ok(ChunkPlan {
                    chunk_id: id,
                    file: chunk.file.clone(),
                    token_range: chunk.token_range.clone(),
                    line_range: chunk.line_range,
                    original_length: chunk.length,
                    ppl_score: scores[id].1,
                    features,
                    structural_score: sigma,
                    normalized_score: s,
                    multiplier: m,
                    budget: b,
                    span_budget: b_span,
                    spans,
                    protected,
                    layers,
                    cpg,
                })
            })
            .collect::<Result<_>>()
    })?;

    let lengths: Vec<usize> = chunks.iter().map(|c| c.original_length).collect();
    let plan = CompressionPlan {
        config_fingerprint: cfg.fingerprint(),
        prefix_len,
        query_len: query_tokens.len(),
        query_start_position: query_position(prefix_len, &lengths),
        chunks,
    };
    let report = retention_report(&plan);
    Ok((plan, report))
}

/// Span stage for one chunk: span budget, selected span records and the
/// protected token set.
pub fn protect(
    tokens: &[Token],
    cpg: &Cpg,
    b: usize,
    query: &BTreeSet<String>,
    cfg: &PipelineConfig,
) -> (usize, Vec<SpanRecord>, Vec<usize>) {
    let spans = build_spans(tokens, cpg, &cfg.span);
    let matched: Vec<bool> = spans.iter().map(|z| query_protection(z, query)).collect();
    let scores: Vec<f64> = spans.iter().zip(&matched).map(|(z, &q)| score_span(z, q, &cfg.span)).collect();
    let b_span = span_budget(b, &cfg.span);
    let selection = select_spans(&spans, &scores, &matched, b_span);
    let ranges: Vec<_> = selection.iter().map(|s| spans[s.index].token_range.clone()).collect();
    let protected = protect_tokens(&ranges, b, tokens.len());
    let records = selection
        .iter()
        .map(|s| {
            let z = &spans[s.index];
            SpanRecord {
                anchor_node: z.anchor_node(),
                anchors: z.anchors.clone(),
                token_range: z.token_range.clone(),
                indicators: z.indicators,
                query_matched: matched[s.index],
                score: scores[s.index],
                stage: s.stage,
            }
        })
        .collect();
    (b_span, records, protected)
}
