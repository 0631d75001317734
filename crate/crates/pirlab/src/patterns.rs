//! Recovery-pattern analysis of arbitrary deterministic schemes.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scheme::{DeterministicScheme, RecoveryPattern, SumRef};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractionResult {
    pub patterns: Vec<RecoveryPattern>,
    pub side_info: Vec<SumRef>,
}

/// Breach of one of the four independence conditions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct IndependenceViolation {
    pub condition: u8,
    pub detail: String,
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, mut x: usize) -> usize {
        while self.0[x] != x {
            self.0[x] = self.0[self.0[x]];
            x = self.0[x];
        }
        x
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Conditions (1)-(3): they only look at individual summations and servers.
fn local_conditions(s: &DeterministicScheme) -> Vec<IndependenceViolation> {
    let mut v = Vec::new();
    if let Err(e) = s.validate_shape() {
        v.push(IndependenceViolation { condition: 0, detail: e.to_string() });
        return v;
    }
    let mut desired = vec![0usize; s.l + 1];
    for (&server, list) in &s.queries {
        let mut seen = HashMap::new();
        for (index, sum) in list.iter().enumerate() {
            let mut files = sum.files();
            files.dedup();
            if files.len() != sum.len() {
                v.push(IndependenceViolation {
                    condition: 1,
                    detail: format!("summation {index} at server {server} repeats a file"),
                });
            }
            for t in &sum.terms {
                if let Some(prev) = seen.insert((t.file, t.subfile), index) {
                    v.push(IndependenceViolation {
                        condition: 2,
                        detail: format!(
                            "server {server} uses sub-file ({}, {}) in summations {prev} and {index}",
                            t.file, t.subfile
                        ),
                    });
                }
                if t.file == s.theta {
                    desired[t.subfile] += 1;
                }
            }
        }
    }
    for (j, &c) in desired.iter().enumerate().skip(1) {
        if c != 1 {
            v.push(IndependenceViolation { condition: 3, detail: format!("desired sub-file {j} appears {c} times") });
        }
    }
    v
}

/// Groups summations that share a sub-file; returns components in order of
/// their smallest member.
fn components(s: &DeterministicScheme) -> Vec<Vec<SumRef>> {
    let refs = s.all_refs();
    let mut uf = UnionFind((0..refs.len()).collect());
    let mut owner: HashMap<(usize, usize), usize> = HashMap::new();
    for (i, &r) in refs.iter().enumerate() {
        for t in &s.get(r).unwrap().terms {
            match owner.get(&(t.file, t.subfile)) {
                Some(&j) => uf.union(i, j),
                None => {
                    owner.insert((t.file, t.subfile), i);
                }
            }
        }
    }
    let mut groups: BTreeMap<usize, Vec<SumRef>> = BTreeMap::new();
    for (i, &r) in refs.iter().enumerate() {
        groups.entry(uf.find(i)).or_default().push(r);
    }
    groups.into_values().collect()
}

/// Turns a component into a pattern, or explains why it is not one.
fn to_pattern(s: &DeterministicScheme, comp: &[SumRef]) -> Result<Option<RecoveryPattern>> {
    let targets: Vec<usize> = comp
        .iter()
        .flat_map(|&r| s.get(r).unwrap().terms.iter())
        .filter(|t| t.file == s.theta)
        .map(|t| t.subfile)
        .collect();
    let target = match targets.as_slice() {
        [] => return Ok(None),
        [t] => *t,
        many => {
            return Err(Error::Unrecoverable {
                target: many[0],
                detail: format!("its closure also contains desired sub-files {:?}", &many[1..]),
            })
        }
    };
    let mut selections = BTreeMap::new();
    for r in comp {
        if let Some(prev) = selections.insert(r.server, r.index) {
            return Err(Error::Unrecoverable {
                target,
                detail: format!("closure needs summations {prev} and {} from server {}", r.index, r.server),
            });
        }
    }
    let pattern = RecoveryPattern { target, selections, class: None, step: None };
    let expect = [(s.theta, target)].into_iter().collect();
    if s.xor(pattern.refs()) != expect {
        return Err(Error::Unrecoverable { target, detail: "closure does not cancel to the desired sub-file".into() });
    }
    Ok(Some(pattern))
}

/// Checks all four independence conditions; an empty list means the scheme
/// has the property.
pub fn check_independence(s: &DeterministicScheme) -> Vec<IndependenceViolation> {
    let mut v = local_conditions(s);
    if !v.is_empty() {
        return v;
    }
    for comp in components(s) {
        if let Err(e) = to_pattern(s, &comp) {
            v.push(IndependenceViolation { condition: 4, detail: e.to_string() });
        }
    }
    v
}

/// Splits a scheme's queries into one recovery pattern per desired sub-file
/// and leftover side information.
pub fn extract_patterns(s: &DeterministicScheme) -> Result<ExtractionResult> {
    let local = local_conditions(s);
    if let Some(first) = local.first() {
        return Err(Error::Precondition(format!(
            "independence condition ({}) fails: {}",
            first.condition, first.detail
        )));
    }
    let mut patterns = Vec::new();
    let mut side_info = Vec::new();
    for comp in components(s) {
        match to_pattern(s, &comp)? {
            Some(p) => patterns.push(p),
            None => side_info.extend(comp),
        }
    }
    patterns.sort_by_key(|p| p.target);
    side_info.sort();
    if patterns.len() != s.l {
        return Err(Error::Internal(format!("{} patterns for L = {}", patterns.len(), s.l)));
    }
    Ok(ExtractionResult { patterns, side_info })
}

impl ExtractionResult {
    /// Copies the partition into the scheme.
    pub fn apply_to(&self, s: &mut DeterministicScheme) {
        s.patterns = self.patterns.clone();
        s.side_info = self.side_info.clone();
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SrpReport {
    pub passed: bool,
    /// Desired sub-files retrieved through each server storing the desired file.
    pub counts: BTreeMap<usize, usize>,
}

/// Symmetric retrieval: both servers storing the desired file serve the
/// desired-file term of equally many patterns.
pub fn check_srp(s: &DeterministicScheme, ex: &ExtractionResult) -> SrpReport {
    let (u, v) = s.graph.endpoints(s.theta);
    let mut counts: BTreeMap<usize, usize> = [(u, 0), (v, 0)].into();
    for p in &ex.patterns {
        if let Some(server) = s.desired_server(p) {
            *counts.entry(server).or_insert(0) += 1;
        }
    }
    SrpReport { passed: counts[&u] == counts[&v], counts }
}
