//! Line-level control-flow graphs.
//!
//! A node is a source line holding the first token of at least one
//! statement. Function units start at the declaration header; whole-file
//! units get a synthetic entry node (line 0, all padding) linked to the
//! top-level code and to every function and method header.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt::Write as _;

use thiserror::Error;

use crate::frontend::lexer::{lex, lex_fragment, LexError, RawToken};
use crate::frontend::normalize::{normalize, AbstractionBudget, Granularity, KeepList, NormalizedToken};
use crate::frontend::parser::{parse, FunctionDecl, ParseError, SimpleKind, Stmt};
use crate::frontend::vocab::{encode_ids, Vocabulary};

/// Tokens kept per node.
pub const NODE_LEN: usize = 20;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CfgError {
    #[error(transparent)]
    Lex(#[from] LexError),
    #[error(transparent)]
    Parse(#[from] ParseError),
    #[error("unit has no executable lines")]
    EmptyUnit,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CfgNode {
    pub index: usize,
    /// 1-based source line; 0 for the synthetic file entry.
    pub line: usize,
    pub ids: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cfg {
    pub nodes: Vec<CfgNode>,
    /// Directed, sorted, no duplicates or self-loops.
    pub edges: Vec<(usize, usize)>,
    pub entry: usize,
    pub exits: BTreeSet<usize>,
    /// Nodes not reachable from `entry`.
    pub dead: Vec<bool>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CfgStats {
    pub nodes: usize,
    pub edges: usize,
    pub max_out_degree: usize,
}

impl Cfg {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Single isolated node built from the last tokens of the unit.
    pub fn single_node(tokens: &[NormalizedToken], vocab: &Vocabulary) -> Cfg {
        let surfaces: Vec<&str> = tokens.iter().map(|t| t.surface.as_str()).collect();
        let (ids, _) = encode_ids(&surfaces, vocab, NODE_LEN);
        let line = tokens.last().map_or(1, |t| t.origin_line);
        Cfg {
            nodes: vec![CfgNode { index: 0, line, ids }],
            edges: Vec::new(),
            entry: 0,
            exits: BTreeSet::from([0]),
            dead: vec![false],
        }
    }

    /// Row-major N×20 id matrix.
    pub fn node_matrix(&self) -> Vec<u32> {
        self.nodes.iter().flat_map(|n| n.ids.iter().copied()).collect()
    }

    pub fn lines(&self) -> Vec<usize> {
        self.nodes.iter().map(|n| n.line).collect()
    }

    /// Plain-text dump: `N <count>` then one `i -> j` line per edge.
    pub fn dump(&self) -> String {
        let mut out = format!("N {}\n", self.nodes.len());
        for (i, j) in &self.edges {
            let _ = writeln!(out, "{i} -> {j}");
        }
        out
    }
}

pub fn cfg_stats(g: &Cfg) -> CfgStats {
    let mut out = vec![0usize; g.nodes.len()];
    for &(i, _) in &g.edges {
        out[i] += 1;
    }
    CfgStats { nodes: g.nodes.len(), edges: g.edges.len(), max_out_degree: out.into_iter().max().unwrap_or(0) }
}

/// Build the graph of a unit: a function declaration (or bare statement
/// list) at function granularity, a whole file at file granularity.
pub fn build_cfg(source: &str, granularity: Granularity, keep: &KeepList, vocab: &Vocabulary) -> Result<Cfg, CfgError> {
    let tokens = lex_unit(source, granularity)?;
    let stmts = parse(&tokens)?;
    let shape = shape(&stmts, granularity).ok_or(CfgError::EmptyUnit)?;
    let normalized = normalize(&tokens, keep, AbstractionBudget::for_granularity(granularity));
    Ok(shape.encode(&normalized, vocab))
}

/// As [`build_cfg`], replacing an empty unit with a single-node graph.
pub fn build_cfg_or_fallback(
    source: &str,
    granularity: Granularity,
    keep: &KeepList,
    vocab: &Vocabulary,
) -> Result<Cfg, CfgError> {
    match build_cfg(source, granularity, keep, vocab) {
        Err(CfgError::EmptyUnit) => {
            let tokens = lex_unit(source, granularity)?;
            let normalized = normalize(&tokens, keep, AbstractionBudget::for_granularity(granularity));
            Ok(Cfg::single_node(&normalized, vocab))
        }
        other => other,
    }
}

/// Files start in HTML mode; function bodies are bare PHP.
pub fn lex_unit(source: &str, granularity: Granularity) -> Result<Vec<RawToken>, LexError> {
    match granularity {
        Granularity::File => lex(source),
        Granularity::Function => lex_fragment(source),
    }
}

/// Graph over source lines before token encoding.
#[derive(Debug, Clone, PartialEq, Eq)]
struct Shape {
    lines: Vec<usize>,
    edges: Vec<(usize, usize)>,
    entry: usize,
    exits: BTreeSet<usize>,
    dead: Vec<bool>,
}

impl Shape {
    fn encode(self, tokens: &[NormalizedToken], vocab: &Vocabulary) -> Cfg {
        let mut by_line: HashMap<usize, Vec<&str>> = HashMap::new();
        for t in tokens {
            by_line.entry(t.origin_line).or_default().push(&t.surface);
        }
        let nodes = self
            .lines
            .iter()
            .enumerate()
            .map(|(index, &line)| {
                let surfaces = if line == 0 { &[][..] } else { by_line.get(&line).map_or(&[][..], Vec::as_slice) };
                CfgNode { index, line, ids: encode_ids(surfaces, vocab, NODE_LEN).0 }
            })
            .collect();
        Cfg { nodes, edges: self.edges, entry: self.entry, exits: self.exits, dead: self.dead }
    }
}

struct LoopCtx {
    /// `None` for switch, where `continue` behaves like `break`.
    head: Option<usize>,
    breaks: Vec<usize>,
}

#[derive(Default)]
struct Builder {
    lines: BTreeSet<usize>,
    edges: BTreeSet<(usize, usize)>,
    exits: BTreeSet<usize>,
    loops: Vec<LoopCtx>,
    /// Every node touched, in visiting order (used for try bodies).
    visited: Vec<usize>,
    file_level: bool,
    functions: Vec<usize>,
    pending: Vec<FunctionDecl>,
}

impl Builder {
    fn node(&mut self, line: usize, preds: &[usize]) {
        self.lines.insert(line);
        self.visited.push(line);
        for &p in preds {
            if p != line {
                self.edges.insert((p, line));
            }
        }
    }

    fn block(&mut self, stmts: &[Stmt], mut preds: Vec<usize>) -> Vec<usize> {
        for s in stmts {
            preds = self.stmt(s, preds);
        }
        preds
    }

    fn stmt(&mut self, s: &Stmt, preds: Vec<usize>) -> Vec<usize> {
        match s {
            Stmt::Simple { line, kind } => {
                let line = *line;
                self.node(line, &preds);
                match *kind {
                    SimpleKind::Expr | SimpleKind::Opaque => vec![line],
                    SimpleKind::Return | SimpleKind::Exit | SimpleKind::Throw => {
                        self.exits.insert(line);
                        vec![]
                    }
                    SimpleKind::Break(n) => {
                        match self.loop_at(n) {
                            Some(i) => self.loops[i].breaks.push(line),
                            None => {
                                self.exits.insert(line);
                            }
                        }
                        vec![]
                    }
                    SimpleKind::Continue(n) => {
                        match self.loop_at(n) {
                            Some(i) => match self.loops[i].head {
                                Some(h) if h != line => {
                                    self.edges.insert((line, h));
                                }
                                Some(_) => {}
                                None => self.loops[i].breaks.push(line),
                            },
                            None => {
                                self.exits.insert(line);
                            }
                        }
                        vec![]
                    }
                }
            }
            Stmt::Block(b) => self.block(b, preds),
            Stmt::InlineHtml { .. } => preds,
            Stmt::If { branches, otherwise } => {
                let mut outs = Vec::new();
                let mut cond_preds = preds;
                for b in branches {
                    self.node(b.line, &cond_preds);
                    outs.extend(self.block(&b.body, vec![b.line]));
                    cond_preds = vec![b.line];
                }
                match otherwise {
                    Some(o) => outs.extend(self.block(&o.body, cond_preds)),
                    None => outs.extend(cond_preds),
                }
                dedup(outs)
            }
            Stmt::Loop { line, body } => {
                let head = *line;
                self.node(head, &preds);
                self.loops.push(LoopCtx { head: Some(head), breaks: vec![] });
                let outs = self.block(body, vec![head]);
                for o in outs {
                    if o != head {
                        self.edges.insert((o, head));
                    }
                }
                let ctx = self.loops.pop().expect("pushed above");
                let mut exits = vec![head];
                exits.extend(ctx.breaks);
                dedup(exits)
            }
            Stmt::DoWhile { line, body, cond_line } => {
                let (head, cond) = (*line, *cond_line);
                self.node(head, &preds);
                self.loops.push(LoopCtx { head: Some(cond), breaks: vec![] });
                let outs = self.block(body, vec![head]);
                self.node(cond, &outs);
                if cond != head {
                    self.edges.insert((cond, head));
                }
                let ctx = self.loops.pop().expect("pushed above");
                let mut exits = vec![cond];
                exits.extend(ctx.breaks);
                dedup(exits)
            }
            Stmt::Switch { line, cases, has_default } => {
                let head = *line;
                self.node(head, &preds);
                self.loops.push(LoopCtx { head: None, breaks: vec![] });
                let mut fall: Vec<usize> = Vec::new();
                for c in cases {
                    let mut p = fall;
                    p.push(head);
                    self.node(c.line, &p);
                    fall = self.block(&c.body, vec![c.line]);
                }
                let ctx = self.loops.pop().expect("pushed above");
                let mut exits = fall;
                exits.extend(ctx.breaks);
                if !has_default || cases.is_empty() {
                    exits.push(head);
                }
                dedup(exits)
            }
            Stmt::Try { body, catches, finally } => {
                let mark = self.visited.len();
                let mut outs = self.block(body, preds.clone());
                let mut in_try: Vec<usize> = self.visited[mark..].to_vec();
                if in_try.is_empty() {
                    in_try = preds;
                }
                in_try = dedup(in_try);
                for c in catches {
                    self.node(c.line, &in_try);
                    outs.extend(self.block(&c.body, vec![c.line]));
                }
                let outs = dedup(outs);
                match finally {
                    Some(f) => self.block(&f.body, outs),
                    None => outs,
                }
            }
            Stmt::Function(d) => {
                if self.file_level {
                    self.pending.push(d.clone());
                    preds
                } else {
                    self.node(d.start_line, &preds);
                    vec![d.start_line]
                }
            }
            Stmt::Class { line, methods, .. } => {
                if self.file_level {
                    self.pending.extend(methods.iter().cloned());
                    preds
                } else {
                    self.node(*line, &preds);
                    vec![*line]
                }
            }
        }
    }

    /// Index of the loop context `n` levels out.
    fn loop_at(&self, n: usize) -> Option<usize> {
        self.loops.len().checked_sub(n.max(1))
    }

    fn function(&mut self, d: &FunctionDecl, preds: &[usize]) {
        let saved = std::mem::take(&mut self.loops);
        self.node(d.header_line, preds);
        self.functions.push(d.header_line);
        let outs = self.block(&d.body, vec![d.header_line]);
        self.exits.extend(outs);
        self.loops = saved;
    }
}

fn dedup(mut v: Vec<usize>) -> Vec<usize> {
    v.sort_unstable();
    v.dedup();
    v
}

fn shape(stmts: &[Stmt], granularity: Granularity) -> Option<Shape> {
    let mut b = Builder { file_level: granularity == Granularity::File, ..Builder::default() };
    let entry_line;
    match granularity {
        Granularity::Function => {
            let executable: Vec<&Stmt> = stmts.iter().filter(|s| !matches!(s, Stmt::InlineHtml { .. })).collect();
            if let [Stmt::Function(d)] = executable.as_slice() {
                b.function(d, &[]);
                entry_line = d.header_line;
            } else if let [Stmt::Class { methods, .. }] = executable.as_slice() {
                let d = methods.first()?;
                b.function(d, &[]);
                entry_line = d.header_line;
            } else {
                let outs = b.block(stmts, vec![]);
                b.exits.extend(outs);
                entry_line = *b.visited.first()?;
            }
        }
        Granularity::File => {
            b.lines.insert(0);
            b.visited.push(0);
            let outs = b.block(stmts, vec![0]);
            b.exits.extend(outs.into_iter().filter(|&l| l != 0));
            // declarations nested in functions are queued while walking
            while !b.pending.is_empty() {
                let pending = std::mem::take(&mut b.pending);
                for d in &pending {
                    b.function(d, &[0]);
                }
            }
            if b.lines.len() == 1 {
                return None;
            }
            entry_line = 0;
        }
    }

    let lines: Vec<usize> = b.lines.iter().copied().collect();
    let index: BTreeMap<usize, usize> = lines.iter().enumerate().map(|(i, &l)| (l, i)).collect();
    let edges: Vec<(usize, usize)> = b.edges.iter().map(|(a, c)| (index[a], index[c])).collect();
    let entry = index[&entry_line];
    let exits = b.exits.iter().filter_map(|l| index.get(l).copied()).collect();

    let mut adj = vec![Vec::new(); lines.len()];
    for &(i, j) in &edges {
        adj[i].push(j);
    }
    let mut reached = vec![false; lines.len()];
    let mut stack = vec![entry];
    reached[entry] = true;
    while let Some(i) = stack.pop() {
        for &j in &adj[i] {
            if !reached[j] {
                reached[j] = true;
                stack.push(j);
            }
        }
    }
    let dead = reached.into_iter().map(|r| !r).collect();
    Some(Shape { lines, edges, entry, exits, dead })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line_graph(src: &str, g: Granularity) -> (Vec<usize>, BTreeSet<(usize, usize)>) {
        let stmts = parse(&lex_fragment(src).unwrap()).unwrap();
        let s = shape(&stmts, g).unwrap();
        let edges = s.edges.iter().map(|&(i, j)| (s.lines[i], s.lines[j])).collect();
        (s.lines, edges)
    }

    fn set(e: &[(usize, usize)]) -> BTreeSet<(usize, usize)> {
        e.iter().copied().collect()
    }

    #[test]
    fn straight_line() {
        let (lines, edges) = line_graph("$a = 1;\n$b = $a;\necho $b;", Granularity::Function);
        assert_eq!(lines, [1, 2, 3]);
        assert_eq!(edges, set(&[(1, 2), (2, 3)]));
    }

    #[test]
    fn if_else_diamond() {
        let (lines, edges) = line_graph("if ($c) {\n$a = 1; } else {\n$b = 2; }\necho 1;", Granularity::Function);
        assert_eq!(lines, [1, 2, 3, 4]);
        assert_eq!(edges, set(&[(1, 2), (1, 3), (2, 4), (3, 4)]));
    }

    #[test]
    fn while_loop() {
        let (_, edges) = line_graph("while ($c) {\n$a++;\n}\necho 1;", Granularity::Function);
        assert_eq!(edges, set(&[(1, 2), (2, 1), (1, 4)]));
    }

    #[test]
    fn same_line_statements_merge() {
        let (lines, edges) = line_graph("$a = 1; $b = 2;\necho $a;", Granularity::Function);
        assert_eq!(lines, [1, 2]);
        assert_eq!(edges, set(&[(1, 2)]));
    }

    #[test]
    fn function_header_is_entry() {
        let src = "function f($x) {\n  if ($x) {\n    return 1;\n  }\n  return 2;\n}";
        let (lines, edges) = line_graph(src, Granularity::Function);
        assert_eq!(lines, [1, 2, 3, 5]);
        assert_eq!(edges, set(&[(1, 2), (2, 3), (2, 5)]));
    }

    #[test]
    fn loop_break_continue() {
        let src = "for ($i = 0; $i < 3; $i++) {\n if ($i) {\n  break;\n }\n continue;\n}\necho 1;";
        let (_, edges) = line_graph(src, Granularity::Function);
        assert_eq!(edges, set(&[(1, 2), (2, 3), (2, 5), (5, 1), (1, 7), (3, 7)]));
    }

    #[test]
    fn switch_fans_out_with_fallthrough() {
        let src = "switch ($x) {\ncase 1:\n a();\ncase 2:\n b();\n break;\ndefault:\n c();\n}\nd();";
        let (_, edges) = line_graph(src, Granularity::Function);
        let want = set(&[(1, 2), (1, 4), (1, 7), (2, 3), (3, 4), (4, 5), (5, 6), (7, 8), (6, 10), (8, 10)]);
        assert_eq!(edges, want);
    }

    #[test]
    fn try_catch_edges_from_every_try_line() {
        let src = "try {\n a();\n b();\n} catch (E $e) {\n c();\n}\nd();";
        let (_, edges) = line_graph(src, Granularity::Function);
        assert_eq!(edges, set(&[(2, 3), (2, 4), (3, 4), (4, 5), (3, 7), (5, 7)]));
    }

    #[test]
    fn dead_code_is_flagged() {
        let stmts = parse(&lex_fragment("return 1;\necho 2;").unwrap()).unwrap();
        let s = shape(&stmts, Granularity::Function).unwrap();
        assert_eq!(s.dead, [false, true]);
    }

    #[test]
    fn file_level_synthetic_entry() {
        let src =
            "<?php\n$a = 1;\nfunction f() {\n  echo 2;\n}\nclass C {\n  function m() {\n    return 3;\n  }\n}\nf();\n";
        let (lines, edges) = line_graph(src, Granularity::File);
        assert_eq!(lines, [0, 2, 3, 4, 7, 8, 11]);
        assert_eq!(edges, set(&[(0, 2), (2, 11), (0, 3), (3, 4), (0, 7), (7, 8)]));
    }

    #[test]
    fn empty_unit() {
        let stmts = parse(&lex_fragment("<?php ?>\n<b>hi</b>").unwrap()).unwrap();
        assert!(shape(&stmts, Granularity::File).is_none());
    }

    #[test]
    fn encoding_and_dump() {
        let keep = KeepList::default();
        let src = "$a = $_GET['x'];\necho $a;";
        let toks = normalize(&lex_fragment(src).unwrap(), &keep, AbstractionBudget::uniform(10));
        let vocab = Vocabulary::build([toks]).unwrap();
        let g = build_cfg(src, Granularity::Function, &keep, &vocab).unwrap();
        assert!(g.nodes.iter().all(|n| n.ids.len() == NODE_LEN));
        assert_eq!(g.nodes[1].ids[..3], [vocab.id("echo"), vocab.id("VAR0"), vocab.id(";")]);
        assert_eq!(g.dump(), "N 2\n0 -> 1\n");
        let s = cfg_stats(&g);
        assert_eq!((s.nodes, s.edges, s.max_out_degree), (2, 1, 1));
    }

    #[test]
    fn fallback_single_node() {
        let keep = KeepList::default();
        let vocab = Vocabulary::build_from_surfaces([["x"]]).unwrap();
        let g = build_cfg_or_fallback("<p>static</p>", Granularity::File, &keep, &vocab).unwrap();
        let s = cfg_stats(&g);
        assert_eq!((s.nodes, s.edges, s.max_out_degree), (1, 0, 0));
    }
}
