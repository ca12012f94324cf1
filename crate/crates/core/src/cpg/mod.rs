//! Code Property Graph over a chunk: typed structural nodes plus control-flow
//! and def-use edges.

mod builder;
mod json;

use std::collections::BTreeSet;
use std::ops::Range;

use serde::{Deserialize, Serialize};

pub use builder::build_cpg;
pub use json::{export_cpg_json, import_cpg_json};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Call,
    Control,
    Return,
    Assign,
    Signature,
}

impl NodeKind {
    pub const ALL: [NodeKind; 5] = [
        NodeKind::Call,
        NodeKind::Control,
        NodeKind::Return,
        NodeKind::Assign,
        NodeKind::Signature,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::Call => "call",
            NodeKind::Control => "control",
            NodeKind::Return => "return",
            NodeKind::Assign => "assign",
            NodeKind::Signature => "signature",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == s)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    Cfg,
    Pdg,
}

impl EdgeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EdgeKind::Cfg => "cfg",
            EdgeKind::Pdg => "pdg",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "cfg" => Some(EdgeKind::Cfg),
            "pdg" => Some(EdgeKind::Pdg),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CpgNode {
    pub id: usize,
    pub kind: NodeKind,
    /// Chunk-local token indices.
    #[serde(with = "crate::range_serde")]
    pub token_range: Range<usize>,
    pub line: usize,
    pub symbols: BTreeSet<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CpgEdge {
    pub src: usize,
    pub dst: usize,
    pub kind: EdgeKind,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cpg {
    pub chunk_id: usize,
    pub nodes: Vec<CpgNode>,
    pub edges: Vec<CpgEdge>,
}

impl Cpg {
    pub fn empty(chunk_id: usize) -> Self {
        Self {
            chunk_id,
            ..Self::default()
        }
    }

    pub fn count_nodes(&self, kind: NodeKind) -> usize {
        self.nodes.iter().filter(|n| n.kind == kind).count()
    }

    pub fn count_edges(&self, kind: EdgeKind) -> usize {
        self.edges.iter().filter(|e| e.kind == kind).count()
    }

    /// Node ids that are an endpoint of at least one def-use edge.
    pub fn pdg_participants(&self) -> BTreeSet<usize> {
        self.edges
            .iter()
            .filter(|e| e.kind == EdgeKind::Pdg)
            .flat_map(|e| [e.src, e.dst])
            .collect()
    }

    /// Sort edges canonically and drop duplicates.
    pub fn canonicalize(&mut self) {
        self.nodes.sort_by_key(|n| n.id);
        self.edges.sort();
        self.edges.dedup();
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kind_strings_round_trip() {
        for k in NodeKind::ALL {
            assert_eq!(NodeKind::parse(k.as_str()), Some(k));
        }
        assert_eq!(NodeKind::parse("lambda"), None);
        assert_eq!(EdgeKind::parse("ast"), None);
    }
}
