//! CPG construction from the statement-level AST.
//!
//! Each function body (and the chunk's top-level code) is lowered to a
//! statement-level control-flow graph. Vertices that own a structural node
//! (assignments, returns, predicates, expression statements with calls) are
//! projected onto `cfg` edges; vertices without one are transparent.
//! Def-use (`pdg`) edges come from a gen/kill reaching-definitions fixpoint
//! over the same graph. Parameters are defined by the signature node.

use std::cmp::Reverse;
use std::collections::{BTreeSet, HashMap};
use std::ops::Range;

use super::{Cpg, CpgEdge, CpgNode, EdgeKind, NodeKind};
use crate::ast::{Ast, Expr, NameRef, Stmt, StmtKind};
use crate::lexer::{Token, TokenKind};

/// Build the CPG of a chunk. `tokens` are the chunk's tokens, the slice the
/// AST was parsed from.
pub fn build_cpg(ast: &Ast, tokens: &[Token], chunk_id: usize) -> Cpg {
    let mut b = Builder {
        nodes: Vec::new(),
        edges: BTreeSet::new(),
    };
    let mut pending = Vec::new();
    b.procedure(&ast.body, None, &mut pending);
    while let Some((sig, params, body)) = pending.pop() {
        b.procedure(body, Some((sig, params)), &mut pending);
    }
    b.finish(tokens, chunk_id)
}

struct RawNode {
    kind: NodeKind,
    range: Range<usize>,
}

#[derive(Default)]
struct Vertex {
    succ: Vec<usize>,
    primary: Option<usize>,
    /// False for the parameter-binding entry vertex.
    in_cfg: bool,
    defs: Vec<String>,
    uses: Vec<NameRef>,
    /// Nodes owned by the statement, for locating the node a use sits in.
    nodes: Vec<usize>,
}

struct LoopCtx {
    header: usize,
    breaks: Vec<usize>,
}

type Pending<'a> = Vec<(usize, &'a [NameRef], &'a [Stmt])>;

struct Builder {
    nodes: Vec<RawNode>,
    edges: BTreeSet<(usize, usize, EdgeKind)>,
}

impl Builder {
    fn node(&mut self, kind: NodeKind, range: Range<usize>) -> usize {
        self.nodes.push(RawNode { kind, range });
        self.nodes.len() - 1
    }

    fn calls(&mut self, expr: &Expr, owned: &mut Vec<usize>) {
        for call in &expr.calls {
            if !call.range.is_empty() {
                let id = self.node(NodeKind::Call, call.range.clone());
                owned.push(id);
            }
        }
    }

    fn procedure<'a>(
        &mut self,
        body: &'a [Stmt],
        entry: Option<(usize, &'a [NameRef])>,
        pending: &mut Pending<'a>,
    ) {
        let mut vertices: Vec<Vertex> = Vec::new();
        let mut preds = Vec::new();
        if let Some((sig, params)) = entry {
            vertices.push(Vertex {
                primary: Some(sig),
                defs: params.iter().map(|p| p.name.clone()).collect(),
                nodes: vec![sig],
                ..Vertex::default()
            });
            preds.push(0);
        }
        let mut loops = Vec::new();
        self.lower(&mut vertices, body, preds, &mut loops, pending);
        self.project_cfg(&vertices);
        self.def_use(&vertices);
    }

    fn lower<'a>(
        &mut self,
        vs: &mut Vec<Vertex>,
        stmts: &'a [Stmt],
        mut preds: Vec<usize>,
        loops: &mut Vec<LoopCtx>,
        pending: &mut Pending<'a>,
    ) -> Vec<usize> {
        for stmt in stmts {
            preds = self.lower_stmt(vs, stmt, preds, loops, pending);
        }
        preds
    }

    fn add(vs: &mut Vec<Vertex>, preds: &[usize], v: Vertex) -> usize {
        let id = vs.len();
        vs.push(Vertex { in_cfg: true, ..v });
        for &p in preds {
            vs[p].succ.push(id);
        }
        id
    }

    fn lower_stmt<'a>(
        &mut self,
        vs: &mut Vec<Vertex>,
        stmt: &'a Stmt,
        preds: Vec<usize>,
        loops: &mut Vec<LoopCtx>,
        pending: &mut Pending<'a>,
    ) -> Vec<usize> {
        let mut owned = Vec::new();
        match &stmt.kind {
            StmtKind::FunctionDef {
                params, header, body, ..
            } => {
                let sig = self.node(NodeKind::Signature, stmt.range.clone());
                self.calls(header, &mut owned);
                pending.push((sig, params, body));
                let v = Self::add(vs, &preds, Vertex { nodes: owned, ..Vertex::default() });
                vec![v]
            }
            StmtKind::ClassDef { bases, body, .. } => {
                self.calls(bases, &mut owned);
                let v = Self::add(
                    vs,
                    &preds,
                    Vertex {
                        uses: bases.names.clone(),
                        nodes: owned,
                        ..Vertex::default()
                    },
                );
                self.lower(vs, body, vec![v], loops, pending)
            }
            StmtKind::Block { header, body } => {
                self.calls(header, &mut owned);
                let v = Self::add(
                    vs,
                    &preds,
                    Vertex {
                        uses: header.names.clone(),
                        nodes: owned,
                        ..Vertex::default()
                    },
                );
                self.lower(vs, body, vec![v], loops, pending)
            }
            StmtKind::If { branches, orelse } => {
                let mut exits = Vec::new();
                let mut entry = preds;
                for branch in branches {
                    let control = self.node(NodeKind::Control, branch.header.clone());
                    let mut owned = vec![control];
                    self.calls(&branch.cond, &mut owned);
                    let pv = Self::add(
                        vs,
                        &entry,
                        Vertex {
                            primary: Some(control),
                            uses: branch.cond.names.clone(),
                            nodes: owned,
                            ..Vertex::default()
                        },
                    );
                    exits.extend(self.lower(vs, &branch.body, vec![pv], loops, pending));
                    entry = vec![pv];
                }
                if orelse.is_empty() {
                    exits.extend(entry);
                } else {
                    exits.extend(self.lower(vs, orelse, entry, loops, pending));
                }
                exits
            }
            StmtKind::While { cond, body, orelse } => {
                let control = self.node(NodeKind::Control, stmt.range.clone());
                owned.push(control);
                self.calls(cond, &mut owned);
                let header = Vertex {
                    primary: Some(control),
                    uses: cond.names.clone(),
                    nodes: owned,
                    ..Vertex::default()
                };
                self.lower_loop(vs, preds, header, body, orelse, loops, pending)
            }
            StmtKind::For {
                target,
                defs,
                iter,
                body,
                orelse,
            } => {
                let control = self.node(NodeKind::Control, stmt.range.clone());
                owned.push(control);
                self.calls(target, &mut owned);
                self.calls(iter, &mut owned);
                let mut uses = reads_excluding(target, defs);
                uses.extend(iter.names.iter().cloned());
                let header = Vertex {
                    primary: Some(control),
                    defs: defs.iter().map(|d| d.name.clone()).collect(),
                    uses,
                    nodes: owned,
                    ..Vertex::default()
                };
                self.lower_loop(vs, preds, header, body, orelse, loops, pending)
            }
            StmtKind::Return { value } => {
                let ret = self.node(NodeKind::Return, stmt.range.clone());
                owned.push(ret);
                if let Some(value) = value {
                    self.calls(value, &mut owned);
                }
                Self::add(
                    vs,
                    &preds,
                    Vertex {
                        primary: Some(ret),
                        uses: value.iter().flat_map(|v| v.names.iter().cloned()).collect(),
                        nodes: owned,
                        ..Vertex::default()
                    },
                );
                Vec::new()
            }
            StmtKind::Assign {
                targets,
                defs,
                value,
                augmented,
            } => {
                let assign = self.node(NodeKind::Assign, stmt.range.clone());
                owned.push(assign);
                for t in targets {
                    self.calls(t, &mut owned);
                }
                self.calls(value, &mut owned);
                let mut uses: Vec<NameRef> = targets.iter().flat_map(|t| reads_excluding(t, defs)).collect();
                if *augmented {
                    uses.extend(defs.iter().cloned());
                }
                uses.extend(value.names.iter().cloned());
                let v = Self::add(
                    vs,
                    &preds,
                    Vertex {
                        primary: Some(assign),
                        defs: defs.iter().map(|d| d.name.clone()).collect(),
                        uses,
                        nodes: owned,
                        ..Vertex::default()
                    },
                );
                vec![v]
            }
            StmtKind::Expr(e) | StmtKind::Opaque(e) => {
                self.calls(e, &mut owned);
                // the outermost call stands for the statement
                let primary = owned
                    .iter()
                    .copied()
                    .max_by_key(|&n| (self.nodes[n].range.len(), Reverse(self.nodes[n].range.start)));
                let v = Self::add(
                    vs,
                    &preds,
                    Vertex {
                        primary,
                        uses: e.names.clone(),
                        nodes: owned,
                        ..Vertex::default()
                    },
                );
                vec![v]
            }
            StmtKind::Pass => vec![Self::add(vs, &preds, Vertex::default())],
            StmtKind::Break => {
                let v = Self::add(vs, &preds, Vertex::default());
                match loops.last_mut() {
                    Some(ctx) => {
                        ctx.breaks.push(v);
                        Vec::new()
                    }
                    None => vec![v],
                }
            }
            StmtKind::Continue => {
                let v = Self::add(vs, &preds, Vertex::default());
                match loops.last() {
                    Some(ctx) => {
                        vs[v].succ.push(ctx.header);
                        Vec::new()
                    }
                    None => vec![v],
                }
            }
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn lower_loop<'a>(
        &mut self,
        vs: &mut Vec<Vertex>,
        preds: Vec<usize>,
        header: Vertex,
        body: &'a [Stmt],
        orelse: &'a [Stmt],
        loops: &mut Vec<LoopCtx>,
        pending: &mut Pending<'a>,
    ) -> Vec<usize> {
        let h = Self::add(vs, &preds, header);
        loops.push(LoopCtx {
            header: h,
            breaks: Vec::new(),
        });
        let body_exits = self.lower(vs, body, vec![h], loops, pending);
        for e in body_exits {
            vs[e].succ.push(h);
        }
        let ctx = loops.pop().expect("pushed above");
        let mut exits = if orelse.is_empty() {
            vec![h]
        } else {
            self.lower(vs, orelse, vec![h], loops, pending)
        };
        exits.extend(ctx.breaks);
        exits
    }

    /// `cfg` edges between node-owning vertices, looking through vertices
    /// that own no node.
    fn project_cfg(&mut self, vs: &[Vertex]) {
        for u in vs.iter().filter(|v| v.in_cfg) {
            let Some(pu) = u.primary else { continue };
            let mut seen = vec![false; vs.len()];
            let mut stack: Vec<usize> = u.succ.clone();
            while let Some(w) = stack.pop() {
                if std::mem::replace(&mut seen[w], true) {
                    continue;
                }
                match vs[w].primary.filter(|_| vs[w].in_cfg) {
                    Some(pw) => {
                        self.edges.insert((pu, pw, EdgeKind::Cfg));
                    }
                    None => stack.extend(vs[w].succ.iter().copied()),
                }
            }
        }
    }

    /// Reaching definitions by iterating IN/OUT bitsets to a fixpoint, then
    /// one `pdg` edge per (defining node, using node) pair.
    fn def_use(&mut self, vs: &[Vertex]) {
        let defs: Vec<(usize, &str)> = vs
            .iter()
            .enumerate()
            .flat_map(|(v, vx)| vx.defs.iter().map(move |d| (v, d.as_str())))
            .collect();
        if defs.is_empty() {
            return;
        }
        let words = defs.len().div_ceil(64);
        let mut by_name: HashMap<&str, Vec<usize>> = HashMap::new();
        for (d, &(_, name)) in defs.iter().enumerate() {
            by_name.entry(name).or_default().push(d);
        }
        let mut gen = vec![vec![0u64; words]; vs.len()];
        let mut kill = vec![vec![0u64; words]; vs.len()];
        for (d, &(v, name)) in defs.iter().enumerate() {
            gen[v][d / 64] |= 1 << (d % 64);
            for &other in &by_name[name] {
                kill[v][other / 64] |= 1 << (other % 64);
            }
        }
        let mut preds = vec![Vec::new(); vs.len()];
        for (u, vx) in vs.iter().enumerate() {
            for &w in &vx.succ {
                preds[w].push(u);
            }
        }
        let mut ins = vec![vec![0u64; words]; vs.len()];
        let mut outs = gen.clone();
        let mut changed = true;
        while changed {
            changed = false;
            for v in 0..vs.len() {
                let mut inv = vec![0u64; words];
                for &p in &preds[v] {
                    for (a, b) in inv.iter_mut().zip(&outs[p]) {
                        *a |= b;
                    }
                }
                let out: Vec<u64> = (0..words).map(|k| gen[v][k] | (inv[k] & !kill[v][k])).collect();
                if out != outs[v] {
                    outs[v] = out;
                    changed = true;
                }
                ins[v] = inv;
            }
        }
        for (v, vx) in vs.iter().enumerate() {
            for u in &vx.uses {
                let Some(dst) = self.use_site(vx, u.token) else { continue };
                for &d in by_name.get(u.name.as_str()).into_iter().flatten() {
                    if ins[v][d / 64] & (1 << (d % 64)) == 0 {
                        continue;
                    }
                    if let Some(src) = vs[defs[d].0].primary {
                        if src != dst {
                            self.edges.insert((src, dst, EdgeKind::Pdg));
                        }
                    }
                }
            }
        }
    }

    /// Smallest node of the statement whose range holds `token`.
    fn use_site(&self, vx: &Vertex, token: usize) -> Option<usize> {
        vx.nodes
            .iter()
            .copied()
            .filter(|&n| self.nodes[n].range.contains(&token))
            .min_by_key(|&n| (self.nodes[n].range.len(), Reverse(self.nodes[n].range.start)))
            .or(vx.primary)
    }

    fn finish(self, tokens: &[Token], chunk_id: usize) -> Cpg {
        let mut order: Vec<usize> = (0..self.nodes.len()).collect();
        order.sort_by_key(|&n| {
            let r = &self.nodes[n].range;
            (r.start, Reverse(r.end), self.nodes[n].kind)
        });
        let mut remap = vec![0; self.nodes.len()];
        for (new, &old) in order.iter().enumerate() {
            remap[old] = new;
        }
        let nodes = order
            .iter()
            .enumerate()
            .map(|(id, &old)| {
                let raw = &self.nodes[old];
                let symbols = tokens[raw.range.clone()]
                    .iter()
                    .filter(|t| t.kind == TokenKind::Identifier)
                    .map(|t| t.text.clone())
                    .collect();
                CpgNode {
                    id,
                    kind: raw.kind,
                    line: tokens.get(raw.range.start).map_or(0, |t| t.line),
                    token_range: raw.range.clone(),
                    symbols,
                }
            })
            .collect();
        let mut cpg = Cpg {
            chunk_id,
            nodes,
            edges: self
                .edges
                .iter()
                .map(|&(s, d, kind)| CpgEdge {
                    src: remap[s],
                    dst: remap[d],
                    kind,
                })
                .collect(),
        };
        cpg.canonicalize();
        cpg
    }
}

/// Names read in a target expression: everything except the bound names.
fn reads_excluding(target: &Expr, defs: &[NameRef]) -> Vec<NameRef> {
    target
        .names
        .iter()
        .filter(|n| !defs.iter().any(|d| d.token == n.token))
        .cloned()
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lexer::tokenize_str;
    use crate::parser::parse_subset;

    fn cpg(src: &str) -> Cpg {
        let toks = tokenize_str(src);
        build_cpg(&parse_subset(&toks), &toks, 0)
    }

    fn describe(g: &Cpg, kind: EdgeKind) -> Vec<String> {
        g.edges
            .iter()
            .filter(|e| e.kind == kind)
            .map(|e| {
                let s = &g.nodes[e.src];
                let d = &g.nodes[e.dst];
                format!("{}@{}->{}@{}", s.kind.as_str(), s.line, d.kind.as_str(), d.line)
            })
            .collect()
    }

    #[test]
    fn straight_line_body() {
        let g = cpg("def f():\n    x = 1\n    y = x\n    return y\n");
        assert_eq!(g.count_nodes(NodeKind::Signature), 1);
        assert_eq!(g.count_nodes(NodeKind::Assign), 2);
        assert_eq!(g.count_nodes(NodeKind::Return), 1);
        assert_eq!(describe(&g, EdgeKind::Pdg), ["assign@2->assign@3", "assign@3->return@4"]);
        assert_eq!(describe(&g, EdgeKind::Cfg), ["assign@2->assign@3", "assign@3->return@4"]);
    }

    #[test]
    fn branch_with_call() {
        let g = cpg("def f(a):\n    if a:\n        g()\n    return 0\n");
        let kinds: BTreeSet<NodeKind> = g.nodes.iter().map(|n| n.kind).collect();
        assert_eq!(
            kinds,
            BTreeSet::from([NodeKind::Signature, NodeKind::Control, NodeKind::Call, NodeKind::Return])
        );
        assert_eq!(g.count_nodes(NodeKind::Assign), 0);
        assert_eq!(
            describe(&g, EdgeKind::Cfg),
            ["control@2->call@3", "control@2->return@4", "call@3->return@4"]
        );
        assert_eq!(describe(&g, EdgeKind::Pdg), ["signature@1->control@2"]);
    }

    #[test]
    fn empty_body() {
        let g = cpg("def f():\n    pass\n");
        assert_eq!(g.nodes.len(), 1);
        assert!(g.edges.is_empty());
    }

    #[test]
    fn loop_carried_definitions() {
        let g = cpg("def f(n):\n    i = 0\n    while i < n:\n        i += 1\n    return i\n");
        assert_eq!(
            describe(&g, EdgeKind::Pdg),
            [
                "signature@1->control@3",
                "assign@2->control@3",
                "assign@2->assign@4",
                "assign@2->return@5",
                "assign@4->control@3",
                "assign@4->return@5",
            ]
        );
    }

    #[test]
    fn use_inside_call_targets_call_node() {
        let g = cpg("x = 1\nprint(x)\n");
        assert_eq!(describe(&g, EdgeKind::Pdg), ["assign@1->call@2"]);
        for e in &g.edges {
            if e.kind == EdgeKind::Pdg {
                let shared = g.nodes[e.src].symbols.intersection(&g.nodes[e.dst].symbols).count();
                assert!(shared > 0);
            }
        }
    }

    #[test]
    fn redefinition_kills() {
        let g = cpg("x = 1\nx = 2\ny = x\n");
        assert_eq!(describe(&g, EdgeKind::Pdg), ["assign@2->assign@3"]);
    }

    #[test]
    fn deterministic() {
        let src = "def f(a):\n    for i in range(a):\n        if i:\n            break\n        a = g(i)\n    return a\n";
        assert_eq!(cpg(src), cpg(src));
    }
}
