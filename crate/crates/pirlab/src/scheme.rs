//! Deterministic schemes: per-server summation lists plus the recovery
//! patterns and side information that partition them.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{param, Result};
use crate::graph::{FileId, Graph};
pub use crate::sequences::PatternClass;

/// One signed sub-file `(file, subfile)`; sub-files are numbered from 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(from = "(FileId, usize, i8)", into = "(FileId, usize, i8)")]
pub struct Term {
    pub file: FileId,
    pub subfile: usize,
    pub sign: i8,
}

impl From<(FileId, usize, i8)> for Term {
    fn from((file, subfile, sign): (FileId, usize, i8)) -> Self {
        Term { file, subfile, sign }
    }
}

impl From<Term> for (FileId, usize, i8) {
    fn from(t: Term) -> Self {
        (t.file, t.subfile, t.sign)
    }
}

impl Term {
    pub fn plus(file: FileId, subfile: usize) -> Self {
        Term { file, subfile, sign: 1 }
    }
}

/// A requested linear combination; the server is implied by its query list.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Summation {
    pub terms: Vec<Term>,
}

impl Summation {
    pub fn new(mut terms: Vec<Term>) -> Self {
        terms.sort();
        Summation { terms }
    }

    /// Sorted file set, i.e. the summation type.
    pub fn files(&self) -> Vec<FileId> {
        let mut f: Vec<_> = self.terms.iter().map(|t| t.file).collect();
        f.sort_unstable();
        f
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }
}

/// Address of a summation: server and position in its query list.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SumRef {
    pub server: usize,
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecoveryPattern {
    pub target: usize,
    /// Server → index into that server's query list.
    pub selections: BTreeMap<usize, usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub class: Option<PatternClass>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub step: Option<usize>,
}

impl RecoveryPattern {
    pub fn refs(&self) -> impl Iterator<Item = SumRef> + '_ {
        self.selections.iter().map(|(&server, &index)| SumRef { server, index })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DeterministicScheme {
    pub graph: Graph,
    pub theta: FileId,
    #[serde(rename = "L")]
    pub l: usize,
    pub queries: BTreeMap<usize, Vec<Summation>>,
    #[serde(default)]
    pub patterns: Vec<RecoveryPattern>,
    #[serde(default)]
    pub side_info: Vec<SumRef>,
}

impl DeterministicScheme {
    /// Checks the shape only: server keys, theta and sub-file ranges.
    pub fn validate_shape(&self) -> Result<()> {
        if self.theta >= self.graph.file_count() {
            return param(format!("theta {} is not a file of the graph", self.theta));
        }
        if self.l == 0 {
            return param("L must be positive");
        }
        for (&server, list) in &self.queries {
            if server == 0 || server > self.graph.n() {
                return param(format!("query list for unknown server {server}"));
            }
            for s in list {
                for t in &s.terms {
                    if t.file >= self.graph.file_count() || t.subfile == 0 || t.subfile > self.l {
                        return param(format!("term {t:?} at server {server} out of range"));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn list(&self, server: usize) -> &[Summation] {
        self.queries.get(&server).map(Vec::as_slice).unwrap_or(&[])
    }

    pub fn get(&self, r: SumRef) -> Option<&Summation> {
        self.list(r.server).get(r.index)
    }

    /// Summations answered by each server `1..=n`.
    pub fn answer_counts(&self) -> Vec<usize> {
        (1..=self.graph.n()).map(|s| self.list(s).len()).collect()
    }

    pub fn total_answers(&self) -> usize {
        self.answer_counts().iter().sum()
    }

    pub fn all_refs(&self) -> Vec<SumRef> {
        self.queries
            .iter()
            .flat_map(|(&server, list)| (0..list.len()).map(move |index| SumRef { server, index }))
            .collect()
    }

    /// Per-server multiset of summation types, ignoring sub-file indices.
    pub fn type_profile(&self) -> BTreeMap<usize, BTreeMap<Vec<FileId>, usize>> {
        (1..=self.graph.n())
            .map(|s| {
                let mut m = BTreeMap::new();
                for sum in self.list(s) {
                    *m.entry(sum.files()).or_insert(0) += 1;
                }
                (s, m)
            })
            .collect()
    }

    /// Terms of `(file, subfile)` surviving XOR over the given summations.
    pub fn xor(&self, refs: impl IntoIterator<Item = SumRef>) -> BTreeSet<(FileId, usize)> {
        let mut acc = BTreeSet::new();
        for r in refs {
            if let Some(s) = self.get(r) {
                for t in &s.terms {
                    let key = (t.file, t.subfile);
                    if !acc.remove(&key) {
                        acc.insert(key);
                    }
                }
            }
        }
        acc
    }

    /// Server holding the desired-file term of a pattern, if exactly one does.
    pub fn desired_server(&self, p: &RecoveryPattern) -> Option<usize> {
        let mut hits = p
            .refs()
            .filter(|&r| self.get(r).is_some_and(|s| s.terms.iter().any(|t| t.file == self.theta)))
            .map(|r| r.server);
        let first = hits.next();
        if hits.next().is_some() {
            None
        } else {
            first
        }
    }
}

/// Letter name of a file for small graphs: `a`, `b`, ...
pub fn file_letter(f: FileId) -> String {
    if f < 26 {
        ((b'a' + f as u8) as char).to_string()
    } else {
        format!("w{f}")
    }
}

/// Renders a summation as e.g. `a9+b1`.
pub fn render(s: &Summation) -> String {
    s.terms
        .iter()
        .map(|t| {
            let sign = if t.sign < 0 { "-" } else { "" };
            format!("{sign}{}{}", file_letter(t.file), t.subfile)
        })
        .collect::<Vec<_>>()
        .join("+")
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    Shape {
        detail: String,
    },
    NotIncident {
        at: SumRef,
        file: FileId,
    },
    RepeatedFile {
        at: SumRef,
        file: FileId,
    },
    NonBinarySign {
        at: SumRef,
    },
    BadSelection {
        pattern: usize,
        server: usize,
        index: usize,
    },
    /// A summation is used by zero or several parts of the partition.
    Partition {
        at: SumRef,
        uses: usize,
    },
    PatternXor {
        pattern: usize,
        target: usize,
    },
    DesiredCount {
        pattern: usize,
        count: usize,
    },
    TargetCoverage {
        subfile: usize,
        count: usize,
    },
    SubscriptClash {
        server: usize,
        file: FileId,
        subfile: usize,
    },
    Multiplicity {
        server: usize,
        size: usize,
        detail: String,
    },
    AnswerCount {
        counts: Vec<usize>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct VerificationReport {
    pub violations: Vec<Violation>,
}

impl VerificationReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

fn k_subsets(items: &[FileId], k: usize) -> Vec<Vec<FileId>> {
    fn rec(items: &[FileId], k: usize, start: usize, cur: &mut Vec<FileId>, out: &mut Vec<Vec<FileId>>) {
        if cur.len() == k {
            out.push(cur.clone());
            return;
        }
        for i in start..items.len() {
            cur.push(items[i]);
            rec(items, k, i + 1, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(items, k, 0, &mut Vec::new(), &mut out);
    out
}

/// Checks a scheme's structural invariants and reports every violation.
pub fn verify_scheme(s: &DeterministicScheme) -> VerificationReport {
    let mut v = Vec::new();
    if let Err(e) = s.validate_shape() {
        v.push(Violation::Shape { detail: e.to_string() });
        return VerificationReport { violations: v };
    }
    let g = &s.graph;

    // Summation well-formedness and per-server sub-file uniqueness.
    for (&server, list) in &s.queries {
        let mut seen = BTreeSet::new();
        for (index, sum) in list.iter().enumerate() {
            let at = SumRef { server, index };
            let mut files = BTreeSet::new();
            for t in &sum.terms {
                if !g.stores(server, t.file) {
                    v.push(Violation::NotIncident { at, file: t.file });
                }
                if !files.insert(t.file) {
                    v.push(Violation::RepeatedFile { at, file: t.file });
                }
                if t.sign != 1 {
                    v.push(Violation::NonBinarySign { at });
                }
                if !seen.insert((t.file, t.subfile)) {
                    v.push(Violation::SubscriptClash { server, file: t.file, subfile: t.subfile });
                }
            }
        }
    }

    // Partition of the query lists into patterns and side information.
    let mut uses: BTreeMap<SumRef, usize> = s.all_refs().into_iter().map(|r| (r, 0)).collect();
    for (pi, p) in s.patterns.iter().enumerate() {
        for r in p.refs() {
            match uses.get_mut(&r) {
                Some(u) => *u += 1,
                None => v.push(Violation::BadSelection { pattern: pi, server: r.server, index: r.index }),
            }
        }
    }
    for r in &s.side_info {
        match uses.get_mut(r) {
            Some(u) => *u += 1,
            None => v.push(Violation::BadSelection { pattern: usize::MAX, server: r.server, index: r.index }),
        }
    }
    for (&at, &u) in &uses {
        if u != 1 {
            v.push(Violation::Partition { at, uses: u });
        }
    }

    // Each pattern cancels to its target; targets cover 1..=L once.
    let mut cover = vec![0usize; s.l + 1];
    for (pi, p) in s.patterns.iter().enumerate() {
        let desired = p.refs().filter(|&r| s.get(r).is_some_and(|x| x.terms.iter().any(|t| t.file == s.theta))).count();
        if desired != 1 {
            v.push(Violation::DesiredCount { pattern: pi, count: desired });
        }
        let expect: BTreeSet<_> = [(s.theta, p.target)].into();
        if s.xor(p.refs()) != expect {
            v.push(Violation::PatternXor { pattern: pi, target: p.target });
        }
        if (1..=s.l).contains(&p.target) {
            cover[p.target] += 1;
        }
    }
    for (subfile, &count) in cover.iter().enumerate().skip(1) {
        if count != 1 {
            v.push(Violation::TargetCoverage { subfile, count });
        }
    }

    // Every k-subset of a server's files is requested equally often, and
    // servers of equal degree agree on those multiplicities.
    let profile = s.type_profile();
    let mut by_degree: BTreeMap<usize, (usize, Vec<usize>)> = BTreeMap::new();
    for server in 1..=g.n() {
        let files = g.incident(server);
        let mut mult = Vec::new();
        for k in 1..=files.len() {
            let counts: BTreeSet<usize> =
                k_subsets(&files, k).iter().map(|t| profile[&server].get(t).copied().unwrap_or(0)).collect();
            if counts.len() > 1 {
                v.push(Violation::Multiplicity {
                    server,
                    size: k,
                    detail: format!("{k}-sum types requested {counts:?} times"),
                });
            }
            mult.push(counts.into_iter().next().unwrap_or(0));
        }
        match by_degree.get(&files.len()) {
            Some((first, m)) if *m != mult => v.push(Violation::Multiplicity {
                server,
                size: files.len(),
                detail: format!("multiplicities {mult:?} differ from server {first}'s {m:?}"),
            }),
            Some(_) => {}
            None => {
                by_degree.insert(files.len(), (server, mult));
            }
        }
    }
    let counts = s.answer_counts();
    let degrees = g.degrees();
    let uniform =
        (0..counts.len()).all(|i| (0..counts.len()).all(|j| degrees[i] != degrees[j] || counts[i] == counts[j]));
    if !uniform {
        v.push(Violation::AnswerCount { counts });
    }
    VerificationReport { violations: v }
}
