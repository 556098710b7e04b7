//! Game boards: layered enumeration of every polynomial reachable from the
//! seed nodes within a gate budget.
//!
//! Two layerings are supported:
//!
//! * [`Layering::Gates`] explores circuit states (sets of computed
//!   polynomials) breadth-first, so a node's layer is the minimum number of
//!   gates of any circuit computing it. Minimal circuits found on the way are
//!   kept as witnesses.
//! * [`Layering::Depth`] combines every pair of existing nodes once per
//!   layer. A node's layer is then its minimum circuit depth, which is how
//!   the published depth tables were produced.
//!
//! Nodes are numbered in creation order, so every derivation references
//! strictly smaller ids.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::circuit::{Action, Op};
use crate::error::{config_err, Error, Result};
use crate::field::Modulus;
use crate::poly::FieldPolynomial;

/// Saturation value for path counts.
pub const COUNT_CAP: u64 = u32::MAX as u64;

const FORMAT_HEADER: &str = "polycircuit-board v1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DedupPolicy {
    /// Each polynomial appears once, at its first layer.
    Global,
    /// Duplicates are merged only within a layer.
    LayerLocal,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Layering {
    Gates,
    Depth,
}

impl fmt::Display for DedupPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DedupPolicy::Global => "global",
            DedupPolicy::LayerLocal => "layer-local",
        })
    }
}

impl std::str::FromStr for DedupPolicy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "global" => Ok(DedupPolicy::Global),
            "layer-local" => Ok(DedupPolicy::LayerLocal),
            _ => Err(Error::Parse(format!("unknown dedup policy {s:?}"))),
        }
    }
}

impl fmt::Display for Layering {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Layering::Gates => "gates",
            Layering::Depth => "depth",
        })
    }
}

impl std::str::FromStr for Layering {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gates" => Ok(Layering::Gates),
            "depth" => Ok(Layering::Depth),
            _ => Err(Error::Parse(format!("unknown layering {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct BoardConfig {
    pub n_vars: usize,
    pub modulus: u32,
    pub max_complexity: usize,
    pub node_cap: usize,
    pub dedup: DedupPolicy,
    pub layering: Layering,
    /// Whether the constant `1` is a seed node.
    pub include_constant: bool,
    /// Minimal circuits kept per node (gates layering only).
    pub witness_cap: usize,
    /// Upper bound on explored circuit states per layer (gates layering only).
    pub state_cap: usize,
}

impl Default for BoardConfig {
    fn default() -> Self {
        BoardConfig {
            n_vars: 2,
            modulus: 5,
            max_complexity: 4,
            node_cap: 20_000,
            dedup: DedupPolicy::Global,
            layering: Layering::Gates,
            include_constant: true,
            witness_cap: 8,
            state_cap: 5_000_000,
        }
    }
}

impl BoardConfig {
    pub fn seed_count(&self) -> usize {
        self.n_vars + usize::from(self.include_constant)
    }

    fn validate(&self) -> Result<Modulus> {
        let modulus = Modulus::new(self.modulus)?;
        if self.n_vars == 0 {
            return config_err("board needs at least one variable");
        }
        if self.max_complexity == 0 {
            return config_err("max_complexity must be at least 1");
        }
        if self.node_cap < self.seed_count() {
            return config_err(format!(
                "node_cap {} is smaller than the {} seed nodes",
                self.node_cap,
                self.seed_count()
            ));
        }
        if self.layering == Layering::Gates && self.dedup == DedupPolicy::LayerLocal {
            return config_err("layer-local dedup is only defined for depth layering");
        }
        Ok(modulus)
    }
}

/// A gate `(op, left, right)` over board node ids.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Derivation {
    pub op: Op,
    pub left: usize,
    pub right: usize,
}

#[derive(Clone, Debug)]
pub struct BoardNode {
    pub polynomial: FieldPolynomial,
    pub min_depth: usize,
    pub derivations: Vec<Derivation>,
    /// Shortest root-to-node paths in the edge DAG.
    pub optimal_circuit_count: u64,
    /// All root-to-node paths in the edge DAG, saturating at [`COUNT_CAP`].
    pub total_circuit_count: u64,
    /// Minimal action sequences over circuit node ids (gates layering).
    pub witnesses: Vec<Vec<Action>>,
}

#[derive(Clone, Debug)]
pub struct GameBoard {
    config: BoardConfig,
    modulus: Modulus,
    nodes: Vec<BoardNode>,
    index: HashMap<FieldPolynomial, usize>,
    edges: BTreeSet<(usize, usize)>,
    truncated: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BoardStats {
    pub nodes: usize,
    pub edges: usize,
    pub roots: usize,
    pub multi_optimal: usize,
    pub multi_optimal_pct: f64,
    pub max_optimal: u64,
    pub max_total: u64,
    pub truncated: bool,
    pub depth_histogram: BTreeMap<usize, usize>,
}

impl fmt::Display for BoardStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "nodes={}", self.nodes)?;
        writeln!(f, "edges={}", self.edges)?;
        writeln!(f, "roots={}", self.roots)?;
        writeln!(f, "multi_optimal={}", self.multi_optimal)?;
        writeln!(f, "multi_optimal_pct={:.2}", self.multi_optimal_pct)?;
        writeln!(f, "max_optimal={}", self.max_optimal)?;
        writeln!(f, "max_total={}", self.max_total)?;
        writeln!(f, "truncated={}", self.truncated)?;
        for (d, c) in &self.depth_histogram {
            writeln!(f, "depth_{d}={c}")?;
        }
        Ok(())
    }
}

struct Builder {
    config: BoardConfig,
    modulus: Modulus,
    nodes: Vec<BoardNode>,
    index: HashMap<FieldPolynomial, usize>,
    truncated: bool,
}

enum Insert {
    Existing(usize),
    Created(usize),
    Full,
}

impl Builder {
    fn new(config: BoardConfig) -> Result<Self> {
        let modulus = config.validate()?;
        let mut b = Builder {
            config,
            modulus,
            nodes: Vec::new(),
            index: HashMap::new(),
            truncated: false,
        };
        let n = b.config.n_vars;
        for i in 0..n {
            let f = FieldPolynomial::variable(n, modulus, i)?;
            b.push_node(f, 0);
        }
        if b.config.include_constant {
            b.push_node(FieldPolynomial::one(n, modulus), 0);
        }
        Ok(b)
    }

    fn push_node(&mut self, polynomial: FieldPolynomial, layer: usize) -> usize {
        let id = self.nodes.len();
        self.index.entry(polynomial.clone()).or_insert(id);
        self.nodes.push(BoardNode {
            polynomial,
            min_depth: layer,
            derivations: Vec::new(),
            optimal_circuit_count: 0,
            total_circuit_count: 0,
            witnesses: Vec::new(),
        });
        id
    }

    fn insert_global(&mut self, f: FieldPolynomial, layer: usize) -> Insert {
        if let Some(&id) = self.index.get(&f) {
            return Insert::Existing(id);
        }
        if self.nodes.len() >= self.config.node_cap {
            self.truncated = true;
            return Insert::Full;
        }
        Insert::Created(self.push_node(f, layer))
    }

    fn build_depth(&mut self) -> Result<()> {
        let global = self.config.dedup == DedupPolicy::Global;
        'layers: for k in 1..=self.config.max_complexity {
            let existing = self.nodes.len();
            let mut layer_index: HashMap<FieldPolynomial, usize> = HashMap::new();
            for i in 0..existing {
                for j in i..existing {
                    for op in Op::ALL {
                        let f = op.apply(&self.nodes[i].polynomial, &self.nodes[j].polynomial)?;
                        let id = if global {
                            match self.insert_global(f, k) {
                                Insert::Existing(id) if self.nodes[id].min_depth < k => continue,
                                Insert::Existing(id) | Insert::Created(id) => id,
                                Insert::Full => break 'layers,
                            }
                        } else if let Some(&id) = layer_index.get(&f) {
                            id
                        } else {
                            if self.nodes.len() >= self.config.node_cap {
                                self.truncated = true;
                                break 'layers;
                            }
                            let id = self.push_node(f.clone(), k);
                            layer_index.insert(f, id);
                            id
                        };
                        self.nodes[id].derivations.push(Derivation {
                            op,
                            left: i,
                            right: j,
                        });
                    }
                }
            }
        }
        Ok(())
    }

    fn build_gates(&mut self) -> Result<()> {
        struct State {
            members: Vec<usize>,
            parent: usize,
            last: Option<(Derivation, usize)>,
        }
        let c_max = self.config.max_complexity;
        let seeds: Vec<usize> = (0..self.nodes.len()).collect();
        let mut levels: Vec<Vec<State>> = vec![vec![State {
            members: seeds,
            parent: usize::MAX,
            last: None,
        }]];
        let mut memo: HashMap<(Op, usize, usize), usize> = HashMap::new();
        let mut recorded: HashSet<(usize, Derivation)> = HashSet::new();

        'layers: for k in 1..=c_max {
            let keep_states = k < c_max;
            let mut next: Vec<State> = Vec::new();
            let mut seen: HashSet<Vec<usize>> = HashSet::new();
            for si in 0..levels[k - 1].len() {
                let members = levels[k - 1][si].members.clone();
                let mut witnessed_here: Vec<usize> = Vec::new();
                for ai in 0..members.len() {
                    for bi in ai..members.len() {
                        for op in Op::ALL {
                            let (a, b) = (members[ai], members[bi]);
                            let r = match memo.get(&(op, a, b)) {
                                Some(&r) => r,
                                None => {
                                    let f = op.apply(
                                        &self.nodes[a].polynomial,
                                        &self.nodes[b].polynomial,
                                    )?;
                                    let r = match self.insert_global(f, k) {
                                        Insert::Existing(id) | Insert::Created(id) => id,
                                        Insert::Full => break 'layers,
                                    };
                                    memo.insert((op, a, b), r);
                                    r
                                }
                            };
                            if members.binary_search(&r).is_ok() {
                                continue;
                            }
                            let d = Derivation {
                                op,
                                left: a,
                                right: b,
                            };
                            if self.nodes[r].min_depth == k {
                                if recorded.insert((r, d)) {
                                    self.nodes[r].derivations.push(d);
                                }
                                if self.nodes[r].witnesses.len() < self.config.witness_cap
                                    && !witnessed_here.contains(&r)
                                {
                                    witnessed_here.push(r);
                                    let w = self
                                        .witness(&levels, k - 1, si, d, r, |s| (s.parent, s.last));
                                    self.nodes[r].witnesses.push(w);
                                }
                            }
                            if keep_states {
                                let mut m = members.clone();
                                let pos = m.binary_search(&r).unwrap_err();
                                m.insert(pos, r);
                                if seen.insert(m.clone()) {
                                    next.push(State {
                                        members: m,
                                        parent: si,
                                        last: Some((d, r)),
                                    });
                                    if next.len() > self.config.state_cap {
                                        return Err(Error::Capacity(format!(
                                            "more than {} circuit states at layer {k}",
                                            self.config.state_cap
                                        )));
                                    }
                                }
                            }
                        }
                    }
                }
            }
            if keep_states {
                levels.push(next);
            }
        }
        Ok(())
    }

    /// Rebuilds the action sequence ending in `last`, in circuit node ids.
    fn witness<S>(
        &self,
        levels: &[Vec<S>],
        level: usize,
        state: usize,
        last: Derivation,
        out: usize,
        link: impl Fn(&S) -> (usize, Option<(Derivation, usize)>),
    ) -> Vec<Action> {
        let mut chain = vec![(last, out)];
        let (mut lvl, mut idx) = (level, state);
        while lvl > 0 {
            let (parent, step) = link(&levels[lvl][idx]);
            chain.push(step.expect("non-root state has a last gate"));
            idx = parent;
            lvl -= 1;
        }
        chain.reverse();
        let seed_count = self.config.n_vars + 1;
        let mut circuit_id: HashMap<usize, usize> =
            (0..self.config.seed_count()).map(|s| (s, s)).collect();
        let mut actions = Vec::with_capacity(chain.len());
        for (t, (d, r)) in chain.into_iter().enumerate() {
            actions.push(Action::new(d.op, circuit_id[&d.left], circuit_id[&d.right]));
            circuit_id.insert(r, seed_count + t);
        }
        actions
    }

    fn finish(self) -> GameBoard {
        let mut board = GameBoard {
            config: self.config,
            modulus: self.modulus,
            nodes: self.nodes,
            index: self.index,
            edges: BTreeSet::new(),
            truncated: self.truncated,
        };
        board.compute_structure();
        board
    }
}

impl GameBoard {
    pub fn build(config: &BoardConfig) -> Result<GameBoard> {
        let mut b = Builder::new(config.clone())?;
        match config.layering {
            Layering::Depth => b.build_depth()?,
            Layering::Gates => b.build_gates()?,
        }
        Ok(b.finish())
    }

    /// Edges and path counts, derived from the derivation lists.
    fn compute_structure(&mut self) {
        self.edges.clear();
        for (child, node) in self.nodes.iter().enumerate() {
            for d in &node.derivations {
                self.edges.insert((d.left, child));
                self.edges.insert((d.right, child));
            }
        }
        let mut preds: Vec<Vec<usize>> = vec![Vec::new(); self.nodes.len()];
        for &(u, v) in &self.edges {
            preds[v].push(u);
        }
        let mut dist = vec![0usize; self.nodes.len()];
        for v in 0..self.nodes.len() {
            let (opt, total) = if self.nodes[v].min_depth == 0 || preds[v].is_empty() {
                (1, 1)
            } else {
                let d = preds[v].iter().map(|&u| dist[u]).min().unwrap() + 1;
                dist[v] = d;
                let opt = preds[v]
                    .iter()
                    .filter(|&&u| dist[u] + 1 == d)
                    .fold(0u64, |acc, &u| {
                        (acc + self.nodes[u].optimal_circuit_count).min(COUNT_CAP)
                    });
                let total = preds[v].iter().fold(0u64, |acc, &u| {
                    (acc + self.nodes[u].total_circuit_count).min(COUNT_CAP)
                });
                (opt, total)
            };
            self.nodes[v].optimal_circuit_count = opt;
            self.nodes[v].total_circuit_count = total;
        }
    }

    pub fn config(&self) -> &BoardConfig {
        &self.config
    }

    pub fn modulus(&self) -> Modulus {
        self.modulus
    }

    pub fn nodes(&self) -> &[BoardNode] {
        &self.nodes
    }

    pub fn node(&self, id: usize) -> Result<&BoardNode> {
        self.nodes
            .get(id)
            .ok_or_else(|| Error::Reference(format!("board node {id} does not exist")))
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn edges(&self) -> &BTreeSet<(usize, usize)> {
        &self.edges
    }

    pub fn truncated(&self) -> bool {
        self.truncated
    }

    /// First (minimal-layer) node carrying `f`.
    pub fn find(&self, f: &FieldPolynomial) -> Option<usize> {
        self.index.get(f).copied()
    }

    pub fn depth_histogram(&self) -> BTreeMap<usize, usize> {
        let mut h = BTreeMap::new();
        for n in &self.nodes {
            *h.entry(n.min_depth).or_insert(0) += 1;
        }
        h
    }

    pub fn stats(&self) -> BoardStats {
        let multi = self
            .nodes
            .iter()
            .filter(|n| n.optimal_circuit_count > 1)
            .count();
        BoardStats {
            nodes: self.nodes.len(),
            edges: self.edges.len(),
            roots: self.nodes.iter().filter(|n| n.min_depth == 0).count(),
            multi_optimal: multi,
            multi_optimal_pct: 100.0 * multi as f64 / self.nodes.len().max(1) as f64,
            max_optimal: self
                .nodes
                .iter()
                .map(|n| n.optimal_circuit_count)
                .max()
                .unwrap_or(0),
            max_total: self
                .nodes
                .iter()
                .map(|n| n.total_circuit_count)
                .max()
                .unwrap_or(0),
            truncated: self.truncated,
            depth_histogram: self.depth_histogram(),
        }
    }

    pub fn count_optimal_circuits(&self, node: usize) -> Result<u64> {
        Ok(self.node(node)?.optimal_circuit_count)
    }

    /// Ids of nodes at `depth`, in id order.
    pub fn nodes_at_depth(&self, depth: usize) -> Vec<usize> {
        (0..self.nodes.len())
            .filter(|&i| self.nodes[i].min_depth == depth)
            .collect()
    }

    /// Uniform sample over interesting nodes (more than one optimal circuit) at `complexity`.
    pub fn sample_interesting<R: Rng + ?Sized>(
        &self,
        complexity: usize,
        rng: &mut R,
    ) -> Result<usize> {
        self.sample_interesting_where(complexity, |_| true, rng)
    }

    pub fn sample_interesting_where<R: Rng + ?Sized>(
        &self,
        complexity: usize,
        allow: impl Fn(usize) -> bool,
        rng: &mut R,
    ) -> Result<usize> {
        let candidates: Vec<usize> = (0..self.nodes.len())
            .filter(|&i| {
                let n = &self.nodes[i];
                n.min_depth == complexity && n.optimal_circuit_count > 1 && allow(i)
            })
            .collect();
        if candidates.is_empty() {
            return Err(Error::Sampling(format!(
                "no interesting nodes at complexity {complexity}"
            )));
        }
        Ok(candidates[rng.random_range(0..candidates.len())])
    }

    /// Up to `limit` distinct action sequences (circuit node ids) that build
    /// the node's polynomial from the seeds.
    ///
    /// Under gates layering these are minimal circuits of exactly
    /// `min_depth` gates. Under depth layering they come from backtracking
    /// derivations and may use more gates than the node's layer.
    pub fn extract_optimal_action_sequences(
        &self,
        node: usize,
        limit: usize,
    ) -> Result<Vec<Vec<Action>>> {
        let n = self.node(node)?;
        if limit == 0 {
            return Ok(Vec::new());
        }
        if n.min_depth == 0 {
            return Ok(vec![Vec::new()]);
        }
        match self.config.layering {
            Layering::Gates => Ok(n.witnesses.iter().take(limit).cloned().collect()),
            Layering::Depth => {
                let start = Partial {
                    built: (0..self.config.seed_count()).map(|s| (s, s)).collect(),
                    actions: Vec::new(),
                };
                let mut seen = HashSet::new();
                let mut out = Vec::new();
                for p in self.backtrack(node, start, limit) {
                    if seen.insert(p.actions.clone()) {
                        out.push(p.actions);
                    }
                }
                Ok(out)
            }
        }
    }

    fn backtrack(&self, v: usize, partial: Partial, limit: usize) -> Vec<Partial> {
        if partial.built.contains_key(&v) {
            return vec![partial];
        }
        let seed_count = self.config.n_vars + 1;
        let mut out = Vec::new();
        for d in &self.nodes[v].derivations {
            for p1 in self.backtrack(d.left, partial.clone(), limit) {
                for mut p2 in self.backtrack(d.right, p1, limit) {
                    let a = Action::new(d.op, p2.built[&d.left], p2.built[&d.right]);
                    let id = seed_count + p2.actions.len();
                    p2.actions.push(a);
                    p2.built.insert(v, id);
                    out.push(p2);
                    if out.len() >= limit {
                        return out;
                    }
                }
            }
        }
        out
    }

    /// Versioned line-oriented text: header lines, then one tab-separated line per node.
    pub fn to_text(&self) -> String {
        let c = &self.config;
        let mut s = String::new();
        s.push_str(FORMAT_HEADER);
        s.push('\n');
        s.push_str(&format!("n_vars {}\n", c.n_vars));
        s.push_str(&format!("modulus {}\n", c.modulus));
        s.push_str(&format!("max_complexity {}\n", c.max_complexity));
        s.push_str(&format!("node_cap {}\n", c.node_cap));
        s.push_str(&format!("dedup {}\n", c.dedup));
        s.push_str(&format!("layering {}\n", c.layering));
        s.push_str(&format!("include_constant {}\n", c.include_constant));
        s.push_str(&format!("witness_cap {}\n", c.witness_cap));
        s.push_str(&format!("truncated {}\n", self.truncated));
        s.push_str(&format!("nodes {}\n", self.nodes.len()));
        for n in &self.nodes {
            let derivs = if n.derivations.is_empty() {
                "-".to_string()
            } else {
                n.derivations
                    .iter()
                    .map(|d| format!("{}:{}:{}", d.op, d.left, d.right))
                    .collect::<Vec<_>>()
                    .join(" ")
            };
            let witnesses = if n.witnesses.is_empty() {
                "-".to_string()
            } else {
                n.witnesses
                    .iter()
                    .map(|w| {
                        w.iter()
                            .map(|a| format!("{}:{}:{}", a.op, a.left, a.right))
                            .collect::<Vec<_>>()
                            .join(",")
                    })
                    .collect::<Vec<_>>()
                    .join(" | ")
            };
            s.push_str(&format!(
                "{}\t{}\t{}\t{}\n",
                n.polynomial, n.min_depth, derivs, witnesses
            ));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<GameBoard> {
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some(FORMAT_HEADER) {
            return Err(Error::Parse(format!("missing {FORMAT_HEADER:?} header")));
        }
        let mut header = |key: &str| -> Result<String> {
            let line = lines
                .next()
                .ok_or_else(|| Error::Parse(format!("missing header {key}")))?;
            line.strip_prefix(key)
                .map(|v| v.trim().to_string())
                .ok_or_else(|| Error::Parse(format!("expected {key}, got {line:?}")))
        };
        fn num<T: std::str::FromStr>(s: String) -> Result<T> {
            s.parse()
                .map_err(|_| Error::Parse(format!("bad header value {s:?}")))
        }
        let config = BoardConfig {
            n_vars: num(header("n_vars")?)?,
            modulus: num(header("modulus")?)?,
            max_complexity: num(header("max_complexity")?)?,
            node_cap: num(header("node_cap")?)?,
            dedup: header("dedup")?.parse()?,
            layering: header("layering")?.parse()?,
            include_constant: num(header("include_constant")?)?,
            witness_cap: num(header("witness_cap")?)?,
            ..BoardConfig::default()
        };
        let truncated: bool = num(header("truncated")?)?;
        let count: usize = num(header("nodes")?)?;
        let modulus = config.validate()?;

        let parse_triple = |s: &str| -> Result<(Op, usize, usize)> {
            let mut it = s.split(':');
            let (Some(op), Some(l), Some(r), None) = (it.next(), it.next(), it.next(), it.next())
            else {
                return Err(Error::Parse(format!("bad gate {s:?}")));
            };
            let idx = |x: &str| {
                x.parse::<usize>()
                    .map_err(|_| Error::Parse(format!("bad id in {s:?}")))
            };
            Ok((op.parse()?, idx(l)?, idx(r)?))
        };

        let mut nodes = Vec::with_capacity(count);
        let mut index = HashMap::new();
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let cols: Vec<&str> = line.split('\t').collect();
            if cols.len() != 4 {
                return Err(Error::Parse(format!("bad node line {line:?}")));
            }
            let polynomial = FieldPolynomial::parse(cols[0], config.n_vars, modulus)?;
            let min_depth: usize = num(cols[1].to_string())?;
            let id = nodes.len();
            let mut derivations = Vec::new();
            if cols[2] != "-" {
                for t in cols[2].split(' ') {
                    let (op, left, right) = parse_triple(t)?;
                    if left >= id || right >= id {
                        return Err(Error::Parse(format!(
                            "node {id} derivation references a later node"
                        )));
                    }
                    derivations.push(Derivation { op, left, right });
                }
            }
            let mut witnesses = Vec::new();
            if cols[3] != "-" {
                for w in cols[3].split(" | ") {
                    let mut seq = Vec::new();
                    for t in w.split(',') {
                        let (op, l, r) = parse_triple(t)?;
                        seq.push(Action::new(op, l, r));
                    }
                    witnesses.push(seq);
                }
            }
            index.entry(polynomial.clone()).or_insert(id);
            nodes.push(BoardNode {
                polynomial,
                min_depth,
                derivations,
                optimal_circuit_count: 0,
                total_circuit_count: 0,
                witnesses,
            });
        }
        if nodes.len() != count {
            return Err(Error::Parse(format!(
                "header announces {count} nodes, found {}",
                nodes.len()
            )));
        }
        let mut board = GameBoard {
            config,
            modulus,
            nodes,
            index,
            edges: BTreeSet::new(),
            truncated,
        };
        board.compute_structure();
        Ok(board)
    }
}

#[derive(Clone)]
struct Partial {
    built: HashMap<usize, usize>,
    actions: Vec<Action>,
}
