//! Read-once formulas over AND/OR/NOT and their compilation to programs.
//!
//! Text form is an s-expression with 1-based variables:
//! `and(x1, or(not(x2), x3))`.

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use rand::Rng;

use super::{random_permutation, BranchingProgram, Layer};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ReadOnceFormula {
    /// 0-based variable index.
    Var(usize),
    Not(Box<ReadOnceFormula>),
    And(Box<ReadOnceFormula>, Box<ReadOnceFormula>),
    Or(Box<ReadOnceFormula>, Box<ReadOnceFormula>),
}

use ReadOnceFormula::{And, Not, Or, Var};

impl ReadOnceFormula {
    pub fn var(i: usize) -> Self {
        Var(i)
    }

    pub fn not(f: ReadOnceFormula) -> Self {
        Not(Box::new(f))
    }

    pub fn and(a: ReadOnceFormula, b: ReadOnceFormula) -> Self {
        And(Box::new(a), Box::new(b))
    }

    pub fn or(a: ReadOnceFormula, b: ReadOnceFormula) -> Self {
        Or(Box::new(a), Box::new(b))
    }

    /// Variables in left-to-right leaf order.
    pub fn variables(&self) -> Vec<usize> {
        fn walk(f: &ReadOnceFormula, out: &mut Vec<usize>) {
            match f {
                Var(i) => out.push(*i),
                Not(a) => walk(a, out),
                And(a, b) | Or(a, b) => {
                    walk(a, out);
                    walk(b, out);
                }
            }
        }
        let mut out = Vec::new();
        walk(self, &mut out);
        out
    }

    /// One more than the largest variable index.
    pub fn num_vars(&self) -> usize {
        self.variables().into_iter().max().map_or(0, |m| m + 1)
    }

    /// Gate depth; a bare variable has depth 0.
    pub fn depth(&self) -> usize {
        match self {
            Var(_) => 0,
            Not(a) => 1 + a.depth(),
            And(a, b) | Or(a, b) => 1 + a.depth().max(b.depth()),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let vars = self.variables();
        let mut seen = vec![false; self.num_vars()];
        for v in vars {
            if std::mem::replace(&mut seen[v], true) {
                return Err(Error::invalid("formula", format!("variable x{} is read twice", v + 1)));
            }
        }
        Ok(())
    }

    /// Truth value on `x` (bit `i` is `x_{i+1}`).
    pub fn eval(&self, x: u64) -> bool {
        match self {
            Var(i) => (x >> i) & 1 == 1,
            Not(a) => !a.eval(x),
            And(a, b) => a.eval(x) && b.eval(x),
            Or(a, b) => a.eval(x) || b.eval(x),
        }
    }
}

impl fmt::Display for ReadOnceFormula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var(i) => write!(f, "x{}", i + 1),
            Not(a) => write!(f, "not({a})"),
            And(a, b) => write!(f, "and({a}, {b})"),
            Or(a, b) => write!(f, "or({a}, {b})"),
        }
    }
}

struct Parser<'a> {
    s: &'a str,
    pos: usize,
}

impl Parser<'_> {
    fn skip_ws(&mut self) {
        while self.s[self.pos..].starts_with(char::is_whitespace) {
            self.pos += self.s[self.pos..].chars().next().map_or(1, char::len_utf8);
        }
    }

    fn expect(&mut self, c: char) -> Result<()> {
        self.skip_ws();
        if self.s[self.pos..].starts_with(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(Error::Parse(format!("expected `{c}` at offset {} in {:?}", self.pos, self.s)))
        }
    }

    fn ident(&mut self) -> &str {
        self.skip_ws();
        let start = self.pos;
        let len = self.s[start..]
            .find(|c: char| !c.is_ascii_alphanumeric())
            .unwrap_or(self.s.len() - start);
        self.pos += len;
        &self.s[start..start + len]
    }

    fn formula(&mut self) -> Result<ReadOnceFormula> {
        let name = self.ident().to_ascii_lowercase();
        match name.as_str() {
            "not" => {
                self.expect('(')?;
                let a = self.formula()?;
                self.expect(')')?;
                Ok(ReadOnceFormula::not(a))
            }
            "and" | "or" => {
                self.expect('(')?;
                let a = self.formula()?;
                self.expect(',')?;
                let b = self.formula()?;
                self.expect(')')?;
                Ok(if name == "and" {
                    ReadOnceFormula::and(a, b)
                } else {
                    ReadOnceFormula::or(a, b)
                })
            }
            v if v.starts_with('x') => match v[1..].parse::<usize>() {
                Ok(i) if i >= 1 => Ok(Var(i - 1)),
                _ => Err(Error::Parse(format!("bad variable {v:?}"))),
            },
            other => Err(Error::Parse(format!("unknown gate {other:?}"))),
        }
    }
}

impl FromStr for ReadOnceFormula {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let mut p = Parser { s, pos: 0 };
        let f = p.formula()?;
        p.skip_ws();
        if p.pos != s.len() {
            return Err(Error::Parse(format!("trailing input after formula: {:?}", &s[p.pos..])));
        }
        f.validate()?;
        Ok(f)
    }
}

/// Random read-once formula using every variable in `0..num_vars` once, with
/// depth at most `max_depth`. Negations sit on leaves.
pub fn random_formula(num_vars: usize, max_depth: usize, rng: &mut impl Rng) -> Result<ReadOnceFormula> {
    if num_vars == 0 || (max_depth < usize::BITS as usize && num_vars > 1 << max_depth) {
        return Err(Error::invalid(
            "formula shape",
            format!("{num_vars} variables do not fit in depth {max_depth}"),
        ));
    }
    fn build(vars: &[usize], budget: usize, rng: &mut impl Rng) -> ReadOnceFormula {
        if vars.len() == 1 {
            return if budget >= 1 && rng.random_bool(0.5) {
                ReadOnceFormula::not(Var(vars[0]))
            } else {
                Var(vars[0])
            };
        }
        let cap = 1usize << (budget - 1).min(usize::BITS as usize - 2);
        let lo = vars.len().saturating_sub(cap).max(1);
        let hi = (vars.len() - 1).min(cap);
        let split = rng.random_range(lo..=hi);
        let a = build(&vars[..split], budget - 1, rng);
        let b = build(&vars[split..], budget - 1, rng);
        if rng.random_bool(0.5) {
            ReadOnceFormula::and(a, b)
        } else {
            ReadOnceFormula::or(a, b)
        }
    }
    let vars = random_permutation(num_vars, rng);
    Ok(build(&vars, max_depth, rng))
}

/// Layered graph under construction. Nodes live on boundaries between
/// layers; merged nodes are tracked with a union-find.
struct Builder {
    boundary: Vec<usize>,
    parent: Vec<usize>,
    /// `edges[node] = [succ on 0, succ on 1]`, set once a node is expanded.
    edges: Vec<Option<[usize; 2]>>,
}

impl Builder {
    fn node(&mut self, boundary: usize) -> usize {
        self.boundary.push(boundary);
        self.parent.push(self.parent.len());
        self.edges.push(None);
        self.parent.len() - 1
    }

    fn find(&mut self, mut v: usize) -> usize {
        while self.parent[v] != v {
            self.parent[v] = self.parent[self.parent[v]];
            v = self.parent[v];
        }
        v
    }

    /// Carries `v` forward to boundary `target` through idle layers.
    fn extend(&mut self, v: usize, target: usize) -> usize {
        let mut v = self.find(v);
        while self.boundary[v] < target {
            let next = self.node(self.boundary[v] + 1);
            self.edges[v] = Some([next, next]);
            v = next;
        }
        v
    }

    fn merge(&mut self, a: usize, b: usize) -> usize {
        let (a, b) = (self.find(a), self.find(b));
        debug_assert_eq!(self.boundary[a], self.boundary[b]);
        self.parent[b] = a;
        a
    }

    /// Returns the (true, false) exits of `f` entered at `entry`.
    fn build(&mut self, f: &ReadOnceFormula, entry: usize) -> (usize, usize) {
        match f {
            Var(_) => {
                let entry = self.find(entry);
                let at = self.boundary[entry];
                let (t, fl) = (self.node(at + 1), self.node(at + 1));
                self.edges[entry] = Some([fl, t]);
                (t, fl)
            }
            Not(a) => {
                let (t, fl) = self.build(a, entry);
                (fl, t)
            }
            And(a, b) => {
                let (lt, lf) = self.build(a, entry);
                let (rt, rf) = self.build(b, lt);
                let root = self.find(rf);
                let end = self.boundary[root];
                let lf = self.extend(lf, end);
                (rt, self.merge(rf, lf))
            }
            Or(a, b) => {
                let (lt, lf) = self.build(a, entry);
                let (rt, rf) = self.build(b, lf);
                let root = self.find(rt);
                let end = self.boundary[root];
                let lt = self.extend(lt, end);
                (self.merge(rt, lt), rf)
            }
        }
    }
}

/// Compiles a read-once formula into a program that reads its variables in
/// left-to-right leaf order. Variables below `num_vars()` that the formula
/// does not mention get identity layers at the end. Width is at most
/// `depth + 2`.
pub fn compile_formula(phi: &ReadOnceFormula) -> Result<BranchingProgram> {
    phi.validate()?;
    let leaf_order = phi.variables();
    let n = phi.num_vars();
    let m = leaf_order.len();

    let mut b = Builder {
        boundary: Vec::new(),
        parent: Vec::new(),
        edges: Vec::new(),
    };
    let entry = b.node(0);
    let (t, f) = b.build(phi, entry);
    let (t, f) = (b.find(t), b.find(f));

    // Label the live nodes of every boundary; accept and start are state 0.
    let mut labels: HashMap<usize, usize> = HashMap::new();
    let mut per_boundary = vec![0usize; m + 1];
    labels.insert(t, 0);
    labels.insert(f, 1);
    per_boundary[m] = 2;
    for v in 0..b.parent.len() {
        let r = b.find(v);
        if labels.contains_key(&r) {
            continue;
        }
        let at = b.boundary[r];
        labels.insert(r, per_boundary[at]);
        per_boundary[at] += 1;
    }
    let w = per_boundary.iter().copied().max().unwrap_or(1).max(2);

    let mut layers: Vec<Layer> = (0..m)
        .map(|_| [(0..w).collect(), (0..w).collect()])
        .collect();
    for v in 0..b.parent.len() {
        let r = b.find(v);
        if let Some(targets) = b.edges[v] {
            let at = b.boundary[r];
            let s = labels[&r];
            for bit in 0..2 {
                let tgt = b.find(targets[bit]);
                layers[at][bit][s] = labels[&tgt];
            }
        }
    }

    let mut order = leaf_order.clone();
    let mut used = vec![false; n];
    for &v in &leaf_order {
        used[v] = true;
    }
    for (v, _) in used.iter().enumerate().filter(|(_, u)| !**u) {
        order.push(v);
        layers.push([(0..w).collect(), (0..w).collect()]);
    }
    BranchingProgram::new(w, layers, order)
}
