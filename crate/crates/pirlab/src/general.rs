//! Universal probabilistic scheme for any (multi)graph.
//!
//! Two random bit vectors drive the queries: `mu` picks which files enter the
//! combinations and `lambda` picks the sign pattern. Each non-desired file
//! either enters at both of its servers with opposite signs or at neither, so
//! it cancels in the sum of all answers.

use std::collections::{BTreeMap, HashMap};

use num_traits::Zero;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::exec::Exec;
use crate::graph::{FileId, Graph};
use crate::rational::{pow2, Q};
use crate::transform::Combination;

/// Largest file count for exhaustive enumeration of the randomness.
pub const ENUMERATION_CAP: usize = 12;

/// Integers modulo `q`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SymbolGroup {
    pub q: u64,
}

impl SymbolGroup {
    pub fn new(q: u64) -> Result<Self> {
        if q < 2 {
            return param("symbol group needs q >= 2");
        }
        Ok(SymbolGroup { q })
    }

    pub fn binary() -> Self {
        SymbolGroup { q: 2 }
    }

    pub fn add(self, a: u64, b: u64) -> u64 {
        ((a as u128 + b as u128) % self.q as u128) as u64
    }

    pub fn scale(self, sign: i8, a: u64) -> u64 {
        if sign >= 0 || a == 0 {
            a % self.q
        } else {
            self.q - a % self.q
        }
    }

    /// Signs are invisible modulo 2.
    pub fn normalize(self, mut c: Combination) -> Combination {
        if self.q == 2 {
            for t in c.iter_mut() {
                t.1 = 1;
            }
        }
        c
    }

    /// Value of a combination on one-symbol-per-file contents.
    pub fn evaluate(self, c: &[(FileId, i8)], contents: &[u64]) -> u64 {
        c.iter().fold(0, |acc, &(f, s)| self.add(acc, self.scale(s, contents[f])))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Randomness {
    pub mu: Vec<bool>,
    pub lambda: Vec<bool>,
}

impl Randomness {
    pub fn zeros(k: usize) -> Self {
        Randomness { mu: vec![false; k], lambda: vec![false; k] }
    }

    /// Bits `0..k` of `index` give `mu`, bits `k..2k` give `lambda`.
    pub fn from_index(k: usize, index: u64) -> Self {
        Randomness {
            mu: (0..k).map(|b| index >> b & 1 == 1).collect(),
            lambda: (0..k).map(|b| index >> (k + b) & 1 == 1).collect(),
        }
    }

    pub fn sample<R: Rng>(k: usize, rng: &mut R) -> Self {
        Randomness { mu: (0..k).map(|_| rng.random()).collect(), lambda: (0..k).map(|_| rng.random()).collect() }
    }

    pub fn from_bits(mu: &[u8], lambda: &[u8]) -> Self {
        Randomness { mu: mu.iter().map(|&b| b == 1).collect(), lambda: lambda.iter().map(|&b| b == 1).collect() }
    }
}

/// `eps(i1, j) = (-1)^{lambda_j}` at the lower endpoint, the negation at the
/// upper one.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignTable<'g> {
    graph: &'g Graph,
    lower: Vec<i8>,
}

impl<'g> SignTable<'g> {
    pub fn new(graph: &'g Graph, lambda: &[bool]) -> Self {
        SignTable { graph, lower: lambda.iter().map(|&l| if l { -1 } else { 1 }).collect() }
    }

    pub fn eps(&self, server: usize, file: FileId) -> i8 {
        let (u, _) = self.graph.endpoints(file);
        if server == u {
            self.lower[file]
        } else {
            -self.lower[file]
        }
    }
}

fn check_inputs(g: &Graph, theta: FileId, r: &Randomness) -> Result<()> {
    if theta >= g.file_count() {
        return param(format!("theta {theta} is not a file of the graph"));
    }
    if r.mu.len() != g.file_count() || r.lambda.len() != g.file_count() {
        return param("randomness length must equal the file count");
    }
    Ok(())
}

fn query_at(
    g: &Graph,
    incident: &[FileId],
    theta: FileId,
    r: &Randomness,
    signs: &SignTable,
    server: usize,
) -> Combination {
    let (t1, _) = g.endpoints(theta);
    incident
        .iter()
        .filter(|&&f| if f == theta { r.mu[f] == (server == t1) } else { r.mu[f] })
        .map(|&f| (f, signs.eps(server, f)))
        .collect()
}

/// Query for every server `1..=n` (index `server - 1`).
pub fn build_general_query(g: &Graph, theta: FileId, r: &Randomness) -> Result<Vec<Combination>> {
    check_inputs(g, theta, r)?;
    let signs = SignTable::new(g, &r.lambda);
    Ok((1..=g.n()).map(|v| query_at(g, &g.incident(v), theta, r, &signs, v)).collect())
}

/// `(1 - 2 mu_theta) * eps(theta_2, theta)`, the coefficient of the desired
/// file in the sum of all answers.
pub fn desired_factor(g: &Graph, theta: FileId, r: &Randomness) -> i8 {
    let (_, t2) = g.endpoints(theta);
    let signs = SignTable::new(g, &r.lambda);
    let m = if r.mu[theta] { -1 } else { 1 };
    m * signs.eps(t2, theta)
}

/// Recovers the desired symbol from all answers.
pub fn reconstruct(answers: &[u64], g: &Graph, theta: FileId, r: &Randomness, group: SymbolGroup) -> Result<u64> {
    check_inputs(g, theta, r)?;
    if answers.len() != g.n() {
        return param("one answer per server expected");
    }
    let sum = answers.iter().fold(0, |acc, &a| group.add(acc, a));
    Ok(group.scale(desired_factor(g, theta, r), sum))
}

/// `1 / Σ_i (1 - 2^{-d(i)})`.
pub fn general_rate(g: &Graph) -> Result<Q> {
    let mut sum = Q::zero();
    for d in g.degrees() {
        sum += Q::from_integer(1.into()) - Q::new(1.into(), pow2(d as u32));
    }
    if sum.is_zero() {
        return param("graph has no files");
    }
    Ok(Q::from_integer(1.into()) / sum)
}

/// Exact distribution of one server's query over all `2^{2K}` randomness values.
pub fn answer_distribution(
    g: &Graph,
    theta: FileId,
    server: usize,
    group: SymbolGroup,
    exec: Exec,
) -> Result<BTreeMap<Combination, Q>> {
    let k = g.file_count();
    if k > ENUMERATION_CAP {
        return Err(Error::UnsupportedSize(format!(
            "enumeration covers at most {ENUMERATION_CAP} files, graph has {k}"
        )));
    }
    if theta >= k {
        return param(format!("theta {theta} is not a file of the graph"));
    }
    g.degree(server)?;
    let incident = g.incident(server);
    let total = 1u64 << (2 * k);
    let counts = exec.fold(
        total,
        HashMap::<Combination, u64>::new,
        |mut acc, idx| {
            let r = Randomness::from_index(k, idx);
            let signs = SignTable::new(g, &r.lambda);
            let c = group.normalize(query_at(g, &incident, theta, &r, &signs, server));
            *acc.entry(c).or_insert(0) += 1;
            acc
        },
        |mut a, b| {
            for (c, n) in b {
                *a.entry(c).or_insert(0) += n;
            }
            a
        },
    );
    Ok(counts.into_iter().map(|(c, n)| (c, Q::new(n.into(), total.into()))).collect())
}
