//! Append-only arithmetic circuits.
//!
//! Node layout is fixed: `x0..x{n-1}`, then the constant `1`, then one node
//! per appended gate. Every node caches the polynomial it computes.

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Modulus;
use crate::poly::FieldPolynomial;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Op {
    Add,
    Mul,
}

impl Op {
    pub const ALL: [Op; 2] = [Op::Add, Op::Mul];

    pub fn index(self) -> usize {
        match self {
            Op::Add => 0,
            Op::Mul => 1,
        }
    }

    pub fn apply(self, a: &FieldPolynomial, b: &FieldPolynomial) -> Result<FieldPolynomial> {
        match self {
            Op::Add => a.add(b),
            Op::Mul => a.mul(b),
        }
    }
}

impl fmt::Display for Op {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Op::Add => "add",
            Op::Mul => "mul",
        })
    }
}

impl FromStr for Op {
    type Err = Error;
    fn from_str(s: &str) -> Result<Op> {
        match s.to_ascii_lowercase().as_str() {
            "add" | "+" => Ok(Op::Add),
            "mul" | "*" | "x" => Ok(Op::Mul),
            _ => Err(Error::Parse(format!("unknown operation {s:?}"))),
        }
    }
}

/// One gate choice `(op, left, right)` over circuit node ids, with `left <= right`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Action {
    pub op: Op,
    pub left: usize,
    pub right: usize,
}

impl Action {
    pub fn new(op: Op, i: usize, j: usize) -> Self {
        Action {
            op,
            left: i.min(j),
            right: i.max(j),
        }
    }
}

/// Renders as `(Add,0,1)`.
impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let op = match self.op {
            Op::Add => "Add",
            Op::Mul => "Mul",
        };
        write!(f, "({op},{},{})", self.left, self.right)
    }
}

pub fn format_actions(actions: &[Action]) -> String {
    actions
        .iter()
        .map(|a| a.to_string())
        .collect::<Vec<_>>()
        .join(",")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Gate {
    Input(usize),
    ConstantOne,
    Operation { op: Op, left: usize, right: usize },
}

#[derive(Clone, Debug)]
pub struct Circuit {
    n_vars: usize,
    modulus: Modulus,
    gates: Vec<Gate>,
    polys: Vec<Arc<FieldPolynomial>>,
}

impl Circuit {
    pub fn new(n_vars: usize, modulus: Modulus) -> Result<Self> {
        if n_vars == 0 {
            return Err(Error::Config(
                "a circuit needs at least one variable".into(),
            ));
        }
        let mut gates = Vec::with_capacity(n_vars + 1);
        let mut polys = Vec::with_capacity(n_vars + 1);
        for i in 0..n_vars {
            gates.push(Gate::Input(i));
            polys.push(Arc::new(FieldPolynomial::variable(n_vars, modulus, i)?));
        }
        gates.push(Gate::ConstantOne);
        polys.push(Arc::new(FieldPolynomial::one(n_vars, modulus)));
        Ok(Circuit {
            n_vars,
            modulus,
            gates,
            polys,
        })
    }

    pub fn n_vars(&self) -> usize {
        self.n_vars
    }

    pub fn modulus(&self) -> Modulus {
        self.modulus
    }

    /// Number of seed nodes (variables plus the constant).
    pub fn seed_count(&self) -> usize {
        self.n_vars + 1
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn gate(&self, id: usize) -> Result<Gate> {
        self.gates.get(id).copied().ok_or_else(|| self.bad_id(id))
    }

    pub fn poly(&self, id: usize) -> Result<&FieldPolynomial> {
        self.polys
            .get(id)
            .map(|p| p.as_ref())
            .ok_or_else(|| self.bad_id(id))
    }

    pub fn polys(&self) -> impl Iterator<Item = &FieldPolynomial> {
        self.polys.iter().map(|p| p.as_ref())
    }

    /// The implicit output: the most recently appended node.
    pub fn output(&self) -> usize {
        self.gates.len() - 1
    }

    pub fn find(&self, f: &FieldPolynomial) -> Option<usize> {
        self.polys.iter().position(|p| p.as_ref() == f)
    }

    fn bad_id(&self, id: usize) -> Error {
        Error::Reference(format!("node {id} does not exist ({} nodes)", self.len()))
    }

    pub fn append_gate(&mut self, op: Op, i: usize, j: usize) -> Result<usize> {
        let (left, right) = (i.min(j), i.max(j));
        if right >= self.len() {
            return Err(self.bad_id(right));
        }
        let poly = op.apply(&self.polys[left], &self.polys[right])?;
        self.gates.push(Gate::Operation { op, left, right });
        self.polys.push(Arc::new(poly));
        Ok(self.gates.len() - 1)
    }

    pub fn apply(&mut self, action: Action) -> Result<usize> {
        self.append_gate(action.op, action.left, action.right)
    }

    /// Number of operation gates.
    pub fn complexity(&self) -> usize {
        self.gates.len() - self.seed_count()
    }

    /// Longest input-to-output path, taking the last node as the output.
    pub fn depth(&self) -> usize {
        let depths = self.node_depths();
        depths[self.output()]
    }

    fn node_depths(&self) -> Vec<usize> {
        let mut depths = vec![0usize; self.len()];
        for (id, g) in self.gates.iter().enumerate() {
            if let Gate::Operation { left, right, .. } = *g {
                depths[id] = 1 + depths[left].max(depths[right]);
            }
        }
        depths
    }

    pub fn syntactic_degree(&self, node: usize) -> Result<u64> {
        if node >= self.len() {
            return Err(self.bad_id(node));
        }
        let mut deg = vec![0u64; node + 1];
        for id in 0..=node {
            deg[id] = match self.gates[id] {
                Gate::Input(_) => 1,
                Gate::ConstantOne => 0,
                Gate::Operation {
                    op: Op::Add,
                    left,
                    right,
                } => deg[left].max(deg[right]),
                Gate::Operation {
                    op: Op::Mul,
                    left,
                    right,
                } => deg[left] + deg[right],
            };
        }
        Ok(deg[node])
    }

    /// Recomputes every node polynomial from its gate, ignoring the cache.
    pub fn recompute_polys(&self) -> Result<Vec<FieldPolynomial>> {
        let mut out: Vec<FieldPolynomial> = Vec::with_capacity(self.len());
        for g in &self.gates {
            let f = match *g {
                Gate::Input(i) => FieldPolynomial::variable(self.n_vars, self.modulus, i)?,
                Gate::ConstantOne => FieldPolynomial::one(self.n_vars, self.modulus),
                Gate::Operation { op, left, right } => op.apply(&out[left], &out[right])?,
            };
            out.push(f);
        }
        Ok(out)
    }

    /// Appended gates as action triples, in order.
    pub fn actions(&self) -> Vec<Action> {
        self.gates
            .iter()
            .filter_map(|g| match *g {
                Gate::Operation { op, left, right } => Some(Action { op, left, right }),
                _ => None,
            })
            .collect()
    }

    pub fn replay(n_vars: usize, modulus: Modulus, actions: &[Action]) -> Result<Self> {
        let mut c = Circuit::new(n_vars, modulus)?;
        for a in actions {
            c.apply(*a)?;
        }
        Ok(c)
    }

    /// Line-oriented text: a header, then one `op left right` line per gate.
    pub fn to_text(&self) -> String {
        let mut s = format!(
            "circuit v1\nn_vars {}\nmodulus {}\n",
            self.n_vars, self.modulus
        );
        for a in self.actions() {
            s.push_str(&format!("{} {} {}\n", a.op, a.left, a.right));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines().map(str::trim).filter(|l| !l.is_empty());
        if lines.next() != Some("circuit v1") {
            return Err(Error::Parse("missing `circuit v1` header".into()));
        }
        let mut header = |key: &str| -> Result<u64> {
            let line = lines
                .next()
                .ok_or_else(|| Error::Parse(format!("missing {key}")))?;
            line.strip_prefix(key)
                .and_then(|v| v.trim().parse().ok())
                .ok_or_else(|| Error::Parse(format!("bad header line {line:?}")))
        };
        let n_vars = header("n_vars")? as usize;
        let modulus = Modulus::new(header("modulus")? as u32)?;
        let mut c = Circuit::new(n_vars, modulus)?;
        for line in lines {
            let parts: Vec<&str> = line.split_whitespace().collect();
            if parts.len() != 3 {
                return Err(Error::Parse(format!("bad gate line {line:?}")));
            }
            let op: Op = parts[0].parse()?;
            let idx = |s: &str| {
                s.parse::<usize>()
                    .map_err(|_| Error::Parse(format!("bad node id {s:?}")))
            };
            c.append_gate(op, idx(parts[1])?, idx(parts[2])?)?;
        }
        Ok(c)
    }
}
