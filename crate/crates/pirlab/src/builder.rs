//! Deterministic scheme over `K_n` for one desired file.
//!
//! Servers are handled through roles: roles 1 and 2 are the two servers
//! storing the desired file and roles `3..=n` the remaining servers in
//! ascending order. Patterns are first drafted as per-role file sets, then
//! sub-file indices are assigned in pattern order.

use std::collections::{BTreeMap, HashMap, HashSet};

use num_bigint::BigInt;
use num_traits::{ToPrimitive, Zero};

use crate::error::{param, Error, Result};
use crate::graph::{FileId, Graph};
use crate::scheme::{DeterministicScheme, PatternClass, RecoveryPattern, SumRef, Summation, Term};
use crate::sequences::{build_sequences, distinct_realizations, SequenceLedger};

/// Largest `n` whose scheme is materialized.
pub const MAX_MATERIALIZED_N: usize = 8;

type Draft = Vec<(usize, Vec<FileId>)>;

struct Roles {
    vertex: Vec<usize>,
    file: HashMap<(usize, usize), FileId>,
    theta: FileId,
}

impl Roles {
    fn new(g: &Graph, theta: FileId) -> Self {
        let (u, v) = g.endpoints(theta);
        let mut vertex = vec![0, u, v];
        vertex.extend((1..=g.n()).filter(|&w| w != u && w != v));
        let mut file = HashMap::new();
        for (f, &(a, b)) in g.edges().iter().enumerate() {
            file.insert((a, b), f);
            file.insert((b, a), f);
        }
        Roles { vertex, file, theta }
    }

    /// File between two roles.
    fn f(&self, a: usize, b: usize) -> FileId {
        self.file[&(self.vertex[a], self.vertex[b])]
    }
}

/// Selection sets of one realization, keyed by role.
#[allow(clippy::needless_range_loop)]
fn draft(r: &Roles, class: PatternClass, k: usize, i: usize, js: &[usize], j0: Option<usize>) -> Draft {
    let ip = 3 - i;
    let m = js.len();
    let mut parts: Draft = Vec::new();
    let mut a_part = vec![r.theta];
    a_part.extend(js.iter().map(|&j| r.f(i, j)));
    parts.push((i, a_part));
    let reds = |l: usize, skip: &[usize]| -> Vec<FileId> {
        (0..m).filter(|s| *s != l && !skip.contains(s)).map(|s| r.f(js[l], js[s])).collect()
    };
    match class {
        PatternClass::Direct => {}
        PatternClass::Alpha => {
            for l in 0..m {
                let mut f = vec![r.f(i, js[l])];
                f.extend(reds(l, &[]));
                parts.push((js[l], f));
            }
        }
        PatternClass::Beta => {
            // Positions are 1-based in the pairing rule; `l` here is 0-based.
            for l in 0..m {
                let pos = l + 1;
                let mut f = vec![r.f(i, js[l]), r.f(ip, js[l])];
                if k % 2 == 1 {
                    f.extend(reds(l, &[k - pos - 1]));
                } else if pos == 1 {
                    f.extend(reds(l, &[]));
                } else {
                    f.extend(reds(l, &[k - pos]));
                }
                parts.push((js[l], f));
            }
            parts.push((ip, js.iter().map(|&j| r.f(ip, j)).collect()));
        }
        PatternClass::Gamma => {
            for l in 0..m {
                let mut f = vec![r.f(i, js[l]), r.f(ip, js[l])];
                f.extend(reds(l, &[]));
                parts.push((js[l], f));
            }
            parts.push((ip, js.iter().map(|&j| r.f(ip, j)).collect()));
        }
        PatternClass::Zeta => {
            let j0 = j0.expect("zeta needs j0");
            for l in 0..m {
                let mut f = vec![r.f(i, js[l])];
                f.extend(reds(l, &[]));
                f.push(r.f(js[l], j0));
                parts.push((js[l], f));
            }
            parts.push((j0, js.iter().map(|&j| r.f(j0, j)).collect()));
        }
    }
    for p in parts.iter_mut() {
        p.1.sort_unstable();
    }
    parts.sort();
    parts
}

/// Ordered `len`-tuples of distinct items, lexicographic.
fn ordered_tuples(items: &[usize], len: usize) -> Vec<Vec<usize>> {
    fn rec(items: &[usize], len: usize, used: &mut Vec<bool>, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() == len {
            out.push(cur.clone());
            return;
        }
        for (idx, &it) in items.iter().enumerate() {
            if !used[idx] {
                used[idx] = true;
                cur.push(it);
                rec(items, len, used, cur, out);
                cur.pop();
                used[idx] = false;
            }
        }
    }
    let mut out = Vec::new();
    rec(items, len, &mut vec![false; items.len()], &mut Vec::new(), &mut out);
    out
}

/// Distinct realizations of a class at step `k`, first occurrence kept.
fn realizations(r: &Roles, n: usize, k: usize, class: PatternClass) -> Vec<Draft> {
    let others: Vec<usize> = (3..=n).collect();
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for i in [1, 2] {
        if class == PatternClass::Direct {
            out.push(draft(r, class, k, i, &[], None));
            continue;
        }
        for js in ordered_tuples(&others, k - 1) {
            let j0s: Vec<Option<usize>> = if class == PatternClass::Zeta {
                others.iter().filter(|o| !js.contains(o)).map(|&o| Some(o)).collect()
            } else {
                vec![None]
            };
            for j0 in j0s {
                let d = draft(r, class, k, i, &js, j0);
                if seen.insert(d.clone()) {
                    out.push(d);
                }
            }
        }
    }
    out
}

/// Pattern applications per class and step, scaled by `M`.
pub fn pattern_class_counts(n: usize) -> Result<BTreeMap<usize, BTreeMap<PatternClass, BigInt>>> {
    let l = build_sequences(n)?;
    Ok(l.steps
        .iter()
        .map(|s| {
            let m = s.classes.iter().map(|c| (c.class, l.class_count(s.k, c.class))).collect();
            (s.k, m)
        })
        .collect())
}

fn to_usize(x: &BigInt, what: &str) -> Result<usize> {
    x.to_usize().ok_or_else(|| Error::UnsupportedSize(format!("{what} = {x} does not fit in memory")))
}

/// Resolves `theta` given as an endpoint pair of `K_n`.
pub fn theta_from_pair(n: usize, u: usize, v: usize) -> Result<FileId> {
    let g = Graph::complete(n)?;
    g.files_between(u, v).first().copied().ok_or_else(|| Error::Parameter(format!("({u},{v}) is not an edge of K_{n}")))
}

pub fn build_scheme(n: usize, theta: FileId) -> Result<DeterministicScheme> {
    let ledger = build_sequences(n)?;
    build_with_ledger(&ledger, theta)
}

pub fn build_with_ledger(ledger: &SequenceLedger, theta: FileId) -> Result<DeterministicScheme> {
    let n = ledger.n;
    if n > MAX_MATERIALIZED_N {
        return param(format!("schemes are materialized only for n <= {MAX_MATERIALIZED_N}"));
    }
    let g = Graph::complete(n)?;
    if theta >= g.file_count() {
        return param(format!("theta {theta} is not a file of K_{n}"));
    }
    let roles = Roles::new(&g, theta);
    let l_total = to_usize(&ledger.subpacketization, "L")?;

    // Draft every pattern application in order.
    let mut drafts: Vec<(PatternClass, usize, Draft)> = Vec::new();
    for step in &ledger.steps {
        for c in &step.classes {
            let count = ledger.class_count(step.k, c.class);
            if count.is_zero() {
                continue;
            }
            let reals = realizations(&roles, n, step.k, c.class);
            if BigInt::from(reals.len()) != distinct_realizations(n, step.k, c.class) {
                return Err(Error::Internal(format!(
                    "step {}: {:?} has {} realizations, expected {}",
                    step.k,
                    c.class,
                    reals.len(),
                    distinct_realizations(n, step.k, c.class)
                )));
            }
            let per = &count / BigInt::from(reals.len());
            if &per * BigInt::from(reals.len()) != count {
                return Err(Error::Internal(format!("step {}: {:?} count not divisible", step.k, c.class)));
            }
            let per = to_usize(&per, "applications per realization")?;
            for d in reals {
                for _ in 0..per {
                    drafts.push((c.class, step.k, d.clone()));
                }
            }
        }
    }
    if drafts.len() != l_total {
        return Err(Error::Internal(format!("{} patterns drafted, L = {l_total}", drafts.len())));
    }

    // Per-type usage must stay within the multiplicity x_k·M.
    let m = ledger.m_scale.clone();
    let mult: Vec<usize> = (0..n)
        .map(|k| match ledger.x(k) {
            Some(x) => to_usize(&(x * num_rational::BigRational::from_integer(m.clone())).to_integer(), "x_k·M"),
            None => Ok(0),
        })
        .collect::<Result<_>>()?;
    let mut uses: HashMap<(usize, Vec<FileId>), usize> = HashMap::new();
    for (_, _, d) in &drafts {
        for (role, files) in d {
            *uses.entry((*role, files.clone())).or_insert(0) += 1;
        }
    }

    let mut counter = vec![0usize; g.file_count()];
    let mut queries: BTreeMap<usize, Vec<Summation>> = (1..=n).map(|v| (v, Vec::new())).collect();
    let mut patterns = Vec::with_capacity(drafts.len());
    for (p, (class, k, d)) in drafts.iter().enumerate() {
        let target = p + 1;
        let mut sub = HashMap::new();
        for (_, files) in d {
            for &f in files {
                if f != theta && !sub.contains_key(&f) {
                    counter[f] += 1;
                    sub.insert(f, counter[f]);
                }
            }
        }
        let mut selections = BTreeMap::new();
        for (role, files) in d {
            let terms = files.iter().map(|&f| Term::plus(f, if f == theta { target } else { sub[&f] })).collect();
            let list = queries.get_mut(&roles.vertex[*role]).unwrap();
            selections.insert(roles.vertex[*role], list.len());
            list.push(Summation::new(terms));
        }
        patterns.push(RecoveryPattern { target, selections, class: Some(*class), step: Some(*k) });
    }

    // Residual multiplicity becomes side information.
    let mut side_info = Vec::new();
    for role in 1..=n {
        let v = roles.vertex[role];
        let files = g.incident(v);
        for (k, &mk) in mult.iter().enumerate().skip(1) {
            for t in subsets(&files, k) {
                let used = uses.get(&(role, t.clone())).copied().unwrap_or(0);
                if used > mk {
                    return Err(Error::Internal(format!("server {v}: type {t:?} used {used} > {mk} times")));
                }
                if t.contains(&theta) && used != mk {
                    return Err(Error::Internal(format!("server {v}: desired-file type {t:?} left over")));
                }
                for _ in used..mk {
                    let terms = t
                        .iter()
                        .map(|&f| {
                            counter[f] += 1;
                            Term::plus(f, counter[f])
                        })
                        .collect();
                    let list = queries.get_mut(&v).unwrap();
                    side_info.push(SumRef { server: v, index: list.len() });
                    list.push(Summation::new(terms));
                }
            }
        }
    }
    if let Some(f) = (0..counter.len()).find(|&f| counter[f] > l_total) {
        return Err(Error::Internal(format!("file {f} needs {} sub-files > L", counter[f])));
    }

    let mut scheme = DeterministicScheme { graph: g, theta, l: l_total, queries, patterns, side_info };
    canonicalize(&mut scheme);
    Ok(scheme)
}

fn subsets(items: &[FileId], k: usize) -> Vec<Vec<FileId>> {
    let mut out = Vec::new();
    let mut cur = Vec::new();
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
    rec(items, k, 0, &mut cur, &mut out);
    out
}

/// Orders each server's list by (size, files, sub-files) so the list order
/// carries no trace of the pattern order.
pub fn canonicalize(s: &mut DeterministicScheme) {
    let mut remap: HashMap<usize, Vec<usize>> = HashMap::new();
    for (&server, list) in s.queries.iter_mut() {
        let mut order: Vec<usize> = (0..list.len()).collect();
        order.sort_by_key(|&i| (list[i].len(), list[i].files(), list[i].terms.clone()));
        let mut new_index = vec![0; list.len()];
        for (new, &old) in order.iter().enumerate() {
            new_index[old] = new;
        }
        let sorted = order.iter().map(|&i| list[i].clone()).collect();
        *list = sorted;
        remap.insert(server, new_index);
    }
    for p in &mut s.patterns {
        for (server, idx) in p.selections.iter_mut() {
            *idx = remap[server][*idx];
        }
    }
    for r in &mut s.side_info {
        r.index = remap[&r.server][r.index];
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scheme::verify_scheme;

    #[test]
    fn k3_shape() {
        let s = build_scheme(3, 0).unwrap();
        assert_eq!(s.l, 6);
        assert_eq!(s.answer_counts(), vec![4, 4, 4]);
        assert!(s.side_info.is_empty());
        assert!(verify_scheme(&s).passed(), "{:?}", verify_scheme(&s));
    }

    #[test]
    fn k4_shape() {
        let s = build_scheme(4, 0).unwrap();
        assert_eq!(s.l, 84);
        assert_eq!(s.answer_counts(), vec![60; 4]);
        assert!(s.side_info.is_empty());
        let r = verify_scheme(&s);
        assert!(r.passed(), "{r:?}");
    }

    #[test]
    fn theta_pairs() {
        assert_eq!(theta_from_pair(4, 1, 2).unwrap(), 0);
        assert_eq!(theta_from_pair(4, 4, 3).unwrap(), 5);
        assert!(theta_from_pair(4, 1, 1).is_err());
        assert!(build_scheme(4, 6).is_err());
        assert!(build_scheme(9, 0).is_err());
    }
}
