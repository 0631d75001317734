//! Probabilistic schemes with subpacketization 1, and the conversion from a
//! deterministic scheme with a recovery-pattern partition.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::graph::{FileId, Graph};
use crate::patterns::ExtractionResult;
use crate::rational::{qi, serde_fraction, Q};
use crate::scheme::{DeterministicScheme, Summation};

/// Signed full-file combination, sorted by file; empty means "not queried".
pub type Combination = Vec<(FileId, i8)>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbRow {
    #[serde(with = "serde_fraction")]
    pub p: Q,
    /// Query per server; `None` for servers left unqueried.
    pub q: BTreeMap<usize, Option<Combination>>,
    /// Servers whose answers the client sums; the rest is padding.
    pub pattern_servers: Vec<usize>,
}

impl ProbRow {
    pub fn query(&self, server: usize) -> &[(FileId, i8)] {
        self.q.get(&server).and_then(Option::as_deref).unwrap_or(&[])
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbabilisticScheme {
    pub graph: Graph,
    pub theta: FileId,
    pub rows: Vec<ProbRow>,
}

fn combination(s: &Summation) -> Combination {
    let mut c: Combination = s.terms.iter().map(|t| (t.file, t.sign)).collect();
    c.sort_unstable();
    c
}

/// Rows at probability `1/L`, one per recovery pattern, with every
/// side-information summation placed in the lowest row where its server is
/// still empty.
pub fn transform(s: &DeterministicScheme, ex: &ExtractionResult) -> Result<ProbabilisticScheme> {
    s.validate_shape()?;
    if ex.patterns.len() != s.l {
        return param(format!("{} patterns for L = {}", ex.patterns.len(), s.l));
    }
    for (server, &h) in (1..).zip(&s.answer_counts()) {
        if h > s.l {
            return Err(Error::Infeasible { server, answers: h, l: s.l });
        }
    }
    let n = s.graph.n();
    let p = Q::new(1.into(), s.l.into());
    let mut rows: Vec<ProbRow> = ex
        .patterns
        .iter()
        .map(|pat| {
            let mut q: BTreeMap<usize, Option<Combination>> = (1..=n).map(|v| (v, None)).collect();
            for r in pat.refs() {
                let sum = s
                    .get(r)
                    .ok_or_else(|| Error::Precondition(format!("pattern refers to missing summation {r:?}")))?;
                q.insert(r.server, Some(combination(sum)));
            }
            Ok(ProbRow { p: p.clone(), q, pattern_servers: pat.selections.keys().copied().collect() })
        })
        .collect::<Result<_>>()?;
    let mut next_free = vec![0usize; n + 1];
    for r in &ex.side_info {
        let sum = s
            .get(*r)
            .ok_or_else(|| Error::Precondition(format!("side information refers to missing summation {r:?}")))?;
        let slot = &mut next_free[r.server];
        while *slot < rows.len() && rows[*slot].q[&r.server].is_some() {
            *slot += 1;
        }
        // H(A_i) <= L guarantees a free row.
        let row = rows.get_mut(*slot).ok_or_else(|| Error::Internal(format!("no free row for server {}", r.server)))?;
        row.q.insert(r.server, Some(combination(sum)));
    }
    Ok(ProbabilisticScheme { graph: s.graph.clone(), theta: s.theta, rows })
}

/// `1 / Σ_i Pr(server i is queried)`.
pub fn prob_rate(p: &ProbabilisticScheme) -> Q {
    let mut expected = Q::zero();
    for row in &p.rows {
        let busy = row.q.values().filter(|c| c.as_ref().is_some_and(|c| !c.is_empty())).count();
        expected += &row.p * qi(busy as i64);
    }
    if expected.is_zero() {
        return Q::zero();
    }
    Q::one() / expected
}

/// Row-level checks: probabilities sum to one, queries use stored and
/// distinct files, and the pattern servers' queries add up to the desired
/// file (with unit coefficient) over `Z_modulus`.
pub fn check_rows(p: &ProbabilisticScheme, modulus: u64) -> Vec<String> {
    let mut v = Vec::new();
    let total: Q = p.rows.iter().map(|r| r.p.clone()).sum();
    if total != Q::one() {
        v.push(format!("probabilities sum to {total}"));
    }
    let m = modulus as i64;
    for (j, row) in p.rows.iter().enumerate() {
        for (&server, c) in &row.q {
            let c = c.as_deref().unwrap_or(&[]);
            let files: BTreeSet<_> = c.iter().map(|x| x.0).collect();
            if files.len() != c.len() {
                v.push(format!("row {j}: server {server} repeats a file"));
            }
            if c.iter().any(|&(f, _)| f >= p.graph.file_count() || !p.graph.stores(server, f)) {
                v.push(format!("row {j}: server {server} queried for a file it does not store"));
            }
        }
        let mut coeff: BTreeMap<FileId, i64> = BTreeMap::new();
        for &server in &row.pattern_servers {
            for &(f, sign) in row.query(server) {
                *coeff.entry(f).or_insert(0) += sign as i64;
            }
        }
        let ok = coeff.iter().all(|(&f, &c)| {
            let c = c.rem_euclid(m);
            if f == p.theta {
                c == 1 || c == m - 1
            } else {
                c == 0
            }
        }) && coeff.get(&p.theta).is_some_and(|c| c.rem_euclid(m) != 0);
        if !ok {
            v.push(format!("row {j}: pattern servers do not sum to the desired file"));
        }
    }
    v
}

/// Per-server `(summations, GF(2) rank)` of the answers as formal symbol sets.
/// Equal values mean the summation count is a faithful proxy for the answer
/// entropy under uniform, independent sub-files.
pub fn entropy_proxy(s: &DeterministicScheme) -> BTreeMap<usize, (usize, usize)> {
    (1..=s.graph.n())
        .map(|server| {
            let list = s.list(server);
            let mut basis: BTreeMap<(FileId, usize), BTreeSet<(FileId, usize)>> = BTreeMap::new();
            for sum in list {
                let mut vec: BTreeSet<_> = sum.terms.iter().map(|t| (t.file, t.subfile)).collect();
                while let Some(&lead) = vec.iter().next_back() {
                    match basis.get(&lead) {
                        Some(b) => {
                            vec = vec.symmetric_difference(b).copied().collect();
                        }
                        None => {
                            basis.insert(lead, vec);
                            break;
                        }
                    }
                }
            }
            (server, (list.len(), basis.len()))
        })
        .collect()
}
