//! Two-state stochastic PERT networks: exact expected project duration by
//! enumeration, and the two constructions turning a network into an acyclic
//! free-choice TPWN with the same expected time.
//!
//! Generated ids: places `i`, `o`, `[u,e]`, `[e,v]`, `q[e,k]`; transitions
//! `t[v]`, `t[e,0]`, `t[e,1]`, `a[e,k]`, `b[e,k]`.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt;

use num_traits::{One, Zero};
use rand::Rng;
use serde::Serialize;
use thiserror::Error;

use crate::net::{NetBuilder, WorkflowNet};
use crate::scalar::is_dyadic;
use crate::Rational;

/// Largest edge count accepted by [`expected_project_duration`].
pub const DEFAULT_EDGE_CAP: usize = 24;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PertEdge {
    pub id: String,
    pub from: String,
    pub to: String,
    /// Probability that the edge takes one time unit instead of zero.
    pub p: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PertNetwork {
    pub vertices: Vec<String>,
    pub source: String,
    pub sink: String,
    pub edges: Vec<PertEdge>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PertViolation {
    DuplicateId { id: String },
    UnknownVertex { edge: String, vertex: String },
    ProbabilityOutOfRange { edge: String },
    NoEdges,
    SourceHasInput { edge: String },
    SinkHasOutput { edge: String },
    Cycle { vertex: String },
    OffPath { vertex: String },
}

impl fmt::Display for PertViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PertViolation::DuplicateId { id } => write!(f, "duplicate id `{id}`"),
            PertViolation::UnknownVertex { edge, vertex } => {
                write!(f, "edge `{edge}` refers to unknown vertex `{vertex}`")
            }
            PertViolation::ProbabilityOutOfRange { edge } => {
                write!(f, "edge `{edge}` has a probability outside [0, 1]")
            }
            PertViolation::NoEdges => write!(f, "the network has no edges"),
            PertViolation::SourceHasInput { edge } => write!(f, "edge `{edge}` enters the source"),
            PertViolation::SinkHasOutput { edge } => write!(f, "edge `{edge}` leaves the sink"),
            PertViolation::Cycle { vertex } => write!(f, "vertex `{vertex}` lies on a cycle"),
            PertViolation::OffPath { vertex } => {
                write!(f, "vertex `{vertex}` is not on any source-to-sink path")
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PertError {
    #[error("invalid PERT network: {}", list(.0))]
    Invalid(Vec<PertViolation>),
    #[error("{edges} edges exceed the enumeration cap of {cap}")]
    TooManyEdges { edges: usize, cap: usize },
    #[error("edge `{edge}` has probability {p} without a finite binary expansion")]
    NonDyadic { edge: String, p: String },
}

fn list(v: &[PertViolation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

impl PertNetwork {
    /// Every structural violation, or the vertices in topological order.
    pub fn validate(&self) -> Result<Vec<usize>, Vec<PertViolation>> {
        let mut problems = Vec::new();
        let mut seen = HashSet::new();
        for id in self.vertices.iter().chain(self.edges.iter().map(|e| &e.id)) {
            if !seen.insert(id.as_str()) {
                problems.push(PertViolation::DuplicateId { id: id.clone() });
            }
        }
        let index: HashMap<&str, usize> =
            self.vertices.iter().enumerate().map(|(i, v)| (v.as_str(), i)).collect();
        for name in [&self.source, &self.sink] {
            if !index.contains_key(name.as_str()) {
                problems.push(PertViolation::UnknownVertex { edge: String::new(), vertex: name.clone() });
            }
        }
        if self.edges.is_empty() {
            problems.push(PertViolation::NoEdges);
        }
        for e in &self.edges {
            for v in [&e.from, &e.to] {
                if !index.contains_key(v.as_str()) {
                    problems.push(PertViolation::UnknownVertex { edge: e.id.clone(), vertex: v.clone() });
                }
            }
            if e.p < Rational::zero() || e.p > Rational::one() {
                problems.push(PertViolation::ProbabilityOutOfRange { edge: e.id.clone() });
            }
            if e.to == self.source {
                problems.push(PertViolation::SourceHasInput { edge: e.id.clone() });
            }
            if e.from == self.sink {
                problems.push(PertViolation::SinkHasOutput { edge: e.id.clone() });
            }
        }
        if !problems.is_empty() {
            return Err(problems);
        }

        let n = self.vertices.len();
        let mut succ = vec![Vec::new(); n];
        let mut pred = vec![Vec::new(); n];
        let mut indegree = vec![0usize; n];
        for e in &self.edges {
            let (u, v) = (index[e.from.as_str()], index[e.to.as_str()]);
            succ[u].push(v);
            pred[v].push(u);
            indegree[v] += 1;
        }
        // Kahn's algorithm; leftovers lie on or behind a cycle.
        let mut order = Vec::with_capacity(n);
        let mut ready: VecDeque<usize> = (0..n).filter(|&v| indegree[v] == 0).collect();
        while let Some(u) = ready.pop_front() {
            order.push(u);
            for &v in &succ[u] {
                indegree[v] -= 1;
                if indegree[v] == 0 {
                    ready.push_back(v);
                }
            }
        }
        if order.len() < n {
            for v in (0..n).filter(|&v| indegree[v] > 0) {
                if succ[v].iter().any(|&w| reach(&succ, w)[v]) {
                    problems.push(PertViolation::Cycle { vertex: self.vertices[v].clone() });
                }
            }
            return Err(problems);
        }
        let forward = reach(&succ, index[self.source.as_str()]);
        let backward = reach(&pred, index[self.sink.as_str()]);
        for v in 0..n {
            if !forward[v] || !backward[v] {
                problems.push(PertViolation::OffPath { vertex: self.vertices[v].clone() });
            }
        }
        if problems.is_empty() {
            Ok(order)
        } else {
            Err(problems)
        }
    }
}

fn reach(adj: &[Vec<usize>], from: usize) -> Vec<bool> {
    let mut seen = vec![false; adj.len()];
    let mut stack = vec![from];
    seen[from] = true;
    while let Some(u) = stack.pop() {
        for &v in &adj[u] {
            if !seen[v] {
                seen[v] = true;
                stack.push(v);
            }
        }
    }
    seen
}

/// `E[PD]`: the probability-weighted longest source-to-sink path over all
/// `2^|E|` edge valuations.
pub fn expected_project_duration(pn: &PertNetwork, edge_cap: usize) -> Result<Rational, PertError> {
    let order = pn.validate().map_err(PertError::Invalid)?;
    if pn.edges.len() > edge_cap {
        return Err(PertError::TooManyEdges { edges: pn.edges.len(), cap: edge_cap });
    }
    let mut rank = vec![0; pn.vertices.len()];
    for (r, &v) in order.iter().enumerate() {
        rank[v] = r;
    }
    let index: HashMap<&str, usize> =
        pn.vertices.iter().enumerate().map(|(i, v)| (v.as_str(), i)).collect();
    // Edges by topological rank of their tail, as (tail rank, head rank).
    let mut edges: Vec<(usize, usize, &Rational)> = pn
        .edges
        .iter()
        .map(|e| (rank[index[e.from.as_str()]], rank[index[e.to.as_str()]], &e.p))
        .collect();
    edges.sort_by_key(|e| e.0);
    let (s, t) = (rank[index[pn.source.as_str()]], rank[index[pn.sink.as_str()]]);

    // Probability mass per project duration.
    let mut mass = vec![Rational::zero(); edges.len() + 1];
    let mut x = vec![0u8; edges.len()];
    valuations(&edges, 0, &Rational::one(), &mut x, &mut |x, p| {
        let mut y = vec![i64::MIN; order.len()];
        y[s] = 0;
        for (k, &(u, v, _)) in edges.iter().enumerate() {
            if y[u] != i64::MIN {
                y[v] = y[v].max(y[u] + x[k] as i64);
            }
        }
        mass[y[t] as usize] += p;
    });
    Ok(mass
        .into_iter()
        .enumerate()
        .fold(Rational::zero(), |acc, (d, m)| acc + m * Rational::from_integer(d.into())))
}

fn valuations(
    edges: &[(usize, usize, &Rational)],
    k: usize,
    p: &Rational,
    x: &mut Vec<u8>,
    leaf: &mut impl FnMut(&[u8], &Rational),
) {
    if k == edges.len() {
        leaf(x, p);
        return;
    }
    let pe = edges[k].2;
    let q = Rational::one() - pe;
    if !q.is_zero() {
        x[k] = 0;
        valuations(edges, k + 1, &(p * &q), x, leaf);
    }
    if !pe.is_zero() {
        x[k] = 1;
        valuations(edges, k + 1, &(p * pe), x, leaf);
    }
}

fn edge_in(u: &str, e: &str) -> String {
    format!("[{u},{e}]")
}

fn edge_out(e: &str, v: &str) -> String {
    format!("[{e},{v}]")
}

/// Builds `i`, `o`, the vertex transitions and, through `gadget`, the edge
/// transitions between `[u,e]` and `[e,v]`.
fn reduce_with(
    pn: &PertNetwork,
    mut gadget: impl FnMut(&mut NetBuilder, &PertEdge, &str, &str),
) -> Result<WorkflowNet, PertError> {
    pn.validate().map_err(PertError::Invalid)?;
    let mut b = NetBuilder::new("i", "o");
    for e in &pn.edges {
        let (pre, post) = (edge_in(&e.from, &e.id), edge_out(&e.id, &e.to));
        b = b.place(&pre).place(&post);
        gadget(&mut b, e, &pre, &post);
    }
    for v in &pn.vertices {
        let mut pre: Vec<String> =
            pn.edges.iter().filter(|e| &e.to == v).map(|e| edge_out(&e.id, v)).collect();
        let mut post: Vec<String> =
            pn.edges.iter().filter(|e| &e.from == v).map(|e| edge_in(v, &e.id)).collect();
        if *v == pn.source {
            pre.push("i".into());
        }
        if *v == pn.sink {
            post.push("o".into());
        }
        let pre: Vec<&str> = pre.iter().map(String::as_str).collect();
        let post: Vec<&str> = post.iter().map(String::as_str).collect();
        b.add_transition(&format!("t[{v}]"), &pre, &post, Rational::one(), 0);
    }
    Ok(b.build().expect("reduction output is well formed"))
}

/// Each edge becomes a choice between `t[e,0]` (weight `1 - p`, time 0) and
/// `t[e,1]` (weight `p`, time 1). A branch of probability zero is omitted.
pub fn reduce_rational(pn: &PertNetwork) -> Result<WorkflowNet, PertError> {
    reduce_with(pn, |b, e, pre, post| {
        let q = Rational::one() - &e.p;
        if !q.is_zero() {
            b.add_transition(&format!("t[{},0]", e.id), &[pre], &[post], q, 0);
        }
        if !e.p.is_zero() {
            b.add_transition(&format!("t[{},1]", e.id), &[pre], &[post], e.p.clone(), 1);
        }
    })
}

/// Binary digits `p_0 . p_1 p_2 ... p_k` of a dyadic `p` in `[0, 1]`, with
/// `k` minimal.
pub fn binary_digits(p: &Rational) -> Option<Vec<u64>> {
    if !is_dyadic(p) || *p < Rational::zero() || *p > Rational::one() {
        return None;
    }
    let mut digits = Vec::new();
    let mut rest = p.clone();
    let two = Rational::from_integer(2.into());
    loop {
        let bit = if rest >= Rational::one() { 1 } else { 0 };
        digits.push(bit);
        rest -= Rational::from_integer(bit.into());
        if rest.is_zero() {
            return Some(digits);
        }
        rest *= &two;
    }
}

/// Replaces every rational choice by a ladder of fair binary choices: `a[e,0]`
/// (time `p_0`) leads to `q[e,1]`; at `q[e,k]` either `a[e,k]` (time `p_k`)
/// exits to `[e,v]` or `b[e,k]` moves on. All weights are 1.
pub fn reduce_unit_weights(pn: &PertNetwork) -> Result<WorkflowNet, PertError> {
    let mut digits = HashMap::new();
    for e in &pn.edges {
        match binary_digits(&e.p) {
            Some(d) => {
                digits.insert(e.id.clone(), d);
            }
            None if e.p < Rational::zero() || e.p > Rational::one() => {}
            None => {
                return Err(PertError::NonDyadic {
                    edge: e.id.clone(),
                    p: crate::scalar::format_rational(&e.p),
                })
            }
        }
    }
    reduce_with(pn, |b, e, pre, post| {
        let d = &digits[&e.id];
        let k = d.len() - 1;
        let q = |i: usize| format!("q[{},{i}]", e.id);
        let first = if k == 0 { post.to_string() } else { q(1) };
        b.add_transition(&format!("a[{},0]", e.id), &[pre], &[&first], Rational::one(), d[0]);
        for i in 1..=k {
            let next = if i < k { q(i + 1) } else { post.to_string() };
            b.add_transition(&format!("a[{},{i}]", e.id), &[&q(i)], &[post], Rational::one(), d[i]);
            b.add_transition(&format!("b[{},{i}]", e.id), &[&q(i)], &[&next], Rational::one(), 0);
        }
    })
}

/// A random valid network on `vertices` vertices (at least 2) with at most
/// `max_edges` edges and probabilities `m / denominator`.
pub fn random_network(
    rng: &mut impl Rng,
    vertices: usize,
    max_edges: usize,
    denominator: i64,
) -> PertNetwork {
    let n = vertices.max(2);
    let names: Vec<String> = (0..n)
        .map(|v| match v {
            0 => "s".to_string(),
            v if v == n - 1 => "t".to_string(),
            v => format!("v{v}"),
        })
        .collect();
    let mut pairs: Vec<(usize, usize)> = Vec::new();
    // Every vertex gets an edge from an earlier one and one to a later one.
    for v in 1..n {
        pairs.push((rng.gen_range(0..v), v));
    }
    for u in 1..n - 1 {
        if !pairs.iter().any(|&(a, _)| a == u) {
            pairs.push((u, rng.gen_range(u + 1..n)));
        }
    }
    while pairs.len() < max_edges && rng.gen_bool(0.5) {
        let u = rng.gen_range(0..n - 1);
        pairs.push((u, rng.gen_range(u + 1..n)));
    }
    let edges = pairs
        .into_iter()
        .enumerate()
        .map(|(k, (u, v))| PertEdge {
            id: format!("e{}", k + 1),
            from: names[u].clone(),
            to: names[v].clone(),
            p: Rational::new(rng.gen_range(0..=denominator).into(), denominator.into()),
        })
        .collect();
    PertNetwork { source: "s".into(), sink: "t".into(), vertices: names, edges }
}
