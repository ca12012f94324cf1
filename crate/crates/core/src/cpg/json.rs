//! CPG interchange format.

use std::collections::BTreeSet;

use serde::Deserialize;

use super::{Cpg, CpgEdge, CpgNode, EdgeKind, NodeKind};
use crate::chunker::Chunk;
use crate::error::{Error, Result};

/// Canonical JSON: nodes by id, edges by (src, dst, kind), sorted keys.
pub fn export_cpg_json(cpg: &Cpg) -> String {
    let mut g = cpg.clone();
    g.canonicalize();
    crate::canonical::to_canonical_string(&g).expect("CPG is always serializable")
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCpg {
    chunk_id: usize,
    nodes: Vec<RawNode>,
    edges: Vec<RawEdge>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNode {
    id: usize,
    kind: String,
    token_range: [usize; 2],
    line: usize,
    symbols: Vec<String>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEdge {
    src: usize,
    dst: usize,
    kind: String,
}

/// Parse and validate an externally produced CPG for `chunk`.
pub fn import_cpg_json(document: &[u8], chunk: &Chunk) -> Result<Cpg> {
    let raw: RawCpg = serde_json::from_slice(document).map_err(|e| Error::CpgSchema(e.to_string()))?;
    if raw.chunk_id != chunk.id {
        return Err(Error::CpgSchema(format!(
            "document is for chunk {} but was imported for chunk {}",
            raw.chunk_id, chunk.id
        )));
    }
    let mut nodes = Vec::with_capacity(raw.nodes.len());
    for n in raw.nodes {
        let kind = NodeKind::parse(&n.kind).ok_or_else(|| Error::UnsupportedKind {
            what: "node",
            kind: n.kind.clone(),
        })?;
        let [start, end] = n.token_range;
        if start >= end || end > chunk.length {
            return Err(Error::Range {
                node: n.id,
                start,
                end,
                len: chunk.length,
            });
        }
        nodes.push(CpgNode {
            id: n.id,
            kind,
            token_range: start..end,
            line: n.line,
            symbols: n.symbols.into_iter().collect(),
        });
    }
    nodes.sort_by_key(|n| n.id);
    if let Some((i, n)) = nodes.iter().enumerate().find(|(i, n)| n.id != *i) {
        return Err(Error::CpgSchema(format!(
            "node ids must be dense and unique: expected {i}, found {}",
            n.id
        )));
    }
    let mut edges = Vec::with_capacity(raw.edges.len());
    for e in raw.edges {
        let kind = EdgeKind::parse(&e.kind).ok_or_else(|| Error::UnsupportedKind {
            what: "edge",
            kind: e.kind.clone(),
        })?;
        if e.src >= nodes.len() || e.dst >= nodes.len() {
            return Err(Error::CpgSchema(format!("edge {}->{} has a missing endpoint", e.src, e.dst)));
        }
        if kind == EdgeKind::Pdg && e.src == e.dst {
            return Err(Error::CpgSchema(format!("pdg self-edge on node {}", e.src)));
        }
        edges.push(CpgEdge {
            src: e.src,
            dst: e.dst,
            kind,
        });
    }
    let edges: BTreeSet<CpgEdge> = edges.into_iter().collect();
    Ok(Cpg {
        chunk_id: raw.chunk_id,
        nodes,
        edges: edges.into_iter().collect(),
    })
}
