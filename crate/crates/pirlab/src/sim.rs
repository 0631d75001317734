//! In-process client/server simulation and privacy audits.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{ToPrimitive, Zero};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::Serialize;

use crate::error::{param, Error, Result};
use crate::exec::{block_rng, blocks, Exec};
use crate::general::{self, answer_distribution, build_general_query, Randomness, SymbolGroup};
use crate::graph::{FileId, Graph};
use crate::rational::{serde_fraction, Q};
use crate::scheme::DeterministicScheme;
use crate::transform::{prob_rate, Combination, ProbabilisticScheme};

/// File contents: `l` symbols in `[0, q)` per file.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Storage {
    pub graph: Graph,
    pub group: SymbolGroup,
    pub l: usize,
    pub contents: Vec<Vec<u64>>,
}

impl Storage {
    pub fn random<R: Rng>(graph: &Graph, group: SymbolGroup, l: usize, rng: &mut R) -> Self {
        let contents =
            (0..graph.file_count()).map(|_| (0..l).map(|_| rng.random_range(0..group.q)).collect()).collect();
        Storage { graph: graph.clone(), group, l, contents }
    }

    /// Symbol 0 of every file, for subpacketization-1 schemes.
    fn column(&self) -> Vec<u64> {
        self.contents.iter().map(|c| c[0]).collect()
    }
}

/// One independent uniform permutation of `0..l` per file.
pub fn random_permutations<R: Rng>(files: usize, l: usize, rng: &mut R) -> Vec<Vec<usize>> {
    (0..files)
        .map(|_| {
            let mut p: Vec<usize> = (0..l).collect();
            p.shuffle(rng);
            p
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct TrialReport {
    pub reconstructed_ok: bool,
    pub trials: u64,
    pub failures: u64,
    pub downloaded_symbols: u64,
    #[serde(with = "serde_fraction")]
    pub theoretical_rate: Q,
    #[serde(with = "serde_fraction")]
    pub measured_rate: Q,
    pub seed: Option<u64>,
}

/// Evaluates every query of a deterministic scheme and recovers the whole
/// desired file through its recovery patterns. Logical sub-file `s` of file
/// `f` is stored at position `perms[f][s - 1]`.
pub fn run_deterministic_trial(
    s: &DeterministicScheme,
    st: &Storage,
    perms: Option<&[Vec<usize>]>,
) -> Result<TrialReport> {
    if st.graph != s.graph {
        return param("storage graph differs from the scheme graph");
    }
    if st.l != s.l {
        return param(format!("storage has L = {}, scheme needs {}", st.l, s.l));
    }
    if st.group.q != 2 {
        return param("deterministic schemes run over the binary group");
    }
    if let Some(p) = perms {
        let ok = p.len() == s.graph.file_count()
            && p.iter().all(|x| {
                let set: BTreeSet<_> = x.iter().copied().collect();
                x.len() == s.l && set.len() == s.l && set.iter().all(|&i| i < s.l)
            });
        if !ok {
            return param("permutations must be one bijection of 0..L per file");
        }
    }
    s.validate_shape()?;
    let phys = |f: FileId, sub: usize| perms.map_or(sub - 1, |p| p[f][sub - 1]);
    let answers: BTreeMap<usize, Vec<u64>> = s
        .queries
        .iter()
        .map(|(&server, list)| {
            let a = list
                .iter()
                .map(|sum| sum.terms.iter().fold(0, |acc, t| acc ^ st.contents[t.file][phys(t.file, t.subfile)]))
                .collect();
            (server, a)
        })
        .collect();
    let downloaded = s.total_answers() as u64;
    let mut recovered: Vec<Option<u64>> = vec![None; s.l];
    for p in &s.patterns {
        let value = p.refs().fold(0, |acc, r| acc ^ answers[&r.server][r.index]);
        if (1..=s.l).contains(&p.target) {
            recovered[phys(s.theta, p.target)] = Some(value);
        }
    }
    let ok = recovered.iter().zip(&st.contents[s.theta]).all(|(r, &w)| *r == Some(w));
    let rate = Q::new(s.l.into(), downloaded.into());
    Ok(TrialReport {
        reconstructed_ok: ok,
        trials: 1,
        failures: u64::from(!ok),
        downloaded_symbols: downloaded,
        theoretical_rate: rate.clone(),
        measured_rate: rate,
        seed: None,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TrialMode {
    /// Weighs every row by its probability.
    Exact,
    Sampled {
        trials: u64,
        seed: u64,
    },
}

/// Answers of one row and whether the pattern servers recover the desired file.
fn run_row(p: &ProbabilisticScheme, row: usize, contents: &[u64], group: SymbolGroup) -> (bool, u64) {
    let r = &p.rows[row];
    let mut sum = 0;
    let mut coeff: i64 = 0;
    let mut busy = 0;
    for server in 1..=p.graph.n() {
        let c = r.query(server);
        if c.is_empty() {
            continue;
        }
        busy += 1;
        if r.pattern_servers.contains(&server) {
            sum = group.add(sum, group.evaluate(c, contents));
            coeff += c.iter().filter(|t| t.0 == p.theta).map(|t| t.1 as i64).sum::<i64>();
        }
    }
    let coeff = coeff.rem_euclid(group.q as i64) as u64;
    let value = if coeff == 1 {
        Some(sum)
    } else if coeff == group.q - 1 {
        Some(group.scale(-1, sum))
    } else {
        None
    };
    (value == Some(contents[p.theta]), busy)
}

/// Integer row weights over a common denominator, for exact sampling.
fn row_weights(p: &ProbabilisticScheme) -> Result<(Vec<u64>, u64)> {
    let denom = p.rows.iter().fold(BigInt::from(1), |acc, r| acc.lcm(r.p.denom()));
    let weights: Option<Vec<u64>> =
        p.rows.iter().map(|r| (&r.p * Q::from_integer(denom.clone())).to_integer().to_u64()).collect();
    match (weights, denom.to_u64()) {
        (Some(w), Some(d)) if w.iter().sum::<u64>() == d => Ok((w, d)),
        _ => param("row probabilities must sum to 1 over a 64-bit denominator"),
    }
}

fn pick_row<R: Rng>(weights: &[u64], total: u64, rng: &mut R) -> usize {
    let mut x = rng.random_range(0..total);
    for (i, &w) in weights.iter().enumerate() {
        if x < w {
            return i;
        }
        x -= w;
    }
    weights.len() - 1
}

pub fn run_probabilistic_trials(
    p: &ProbabilisticScheme,
    st: &Storage,
    mode: TrialMode,
    exec: Exec,
) -> Result<TrialReport> {
    if st.l != 1 {
        return param("probabilistic schemes use storage with L = 1");
    }
    if st.graph != p.graph {
        return param("storage graph differs from the scheme graph");
    }
    let contents = st.column();
    let theoretical = prob_rate(p);
    match mode {
        TrialMode::Exact => {
            let mut failures = 0;
            let mut expected = Q::zero();
            let mut downloaded = 0;
            for (j, row) in p.rows.iter().enumerate() {
                let (ok, busy) = run_row(p, j, &contents, st.group);
                failures += u64::from(!ok);
                downloaded += busy;
                expected += &row.p * Q::from_integer(busy.into());
            }
            Ok(TrialReport {
                reconstructed_ok: failures == 0,
                trials: p.rows.len() as u64,
                failures,
                downloaded_symbols: downloaded,
                theoretical_rate: theoretical,
                measured_rate: Q::from_integer(1.into()) / expected,
                seed: None,
            })
        }
        TrialMode::Sampled { trials, seed } => {
            if trials == 0 {
                return param("trials must be positive");
            }
            let (weights, total) = row_weights(p)?;
            let parts = blocks(trials);
            let tallies = exec.map(parts.len() as u64, |b| {
                let (block, len) = parts[b as usize];
                let mut rng = block_rng(seed, block);
                let (mut fail, mut down) = (0u64, 0u64);
                for _ in 0..len {
                    let row = pick_row(&weights, total, &mut rng);
                    let (ok, busy) = run_row(p, row, &contents, st.group);
                    fail += u64::from(!ok);
                    down += busy;
                }
                (fail, down)
            });
            let failures = tallies.iter().map(|t| t.0).sum::<u64>();
            let downloaded = tallies.iter().map(|t| t.1).sum::<u64>();
            Ok(TrialReport {
                reconstructed_ok: failures == 0,
                trials,
                failures,
                downloaded_symbols: downloaded,
                theoretical_rate: theoretical,
                measured_rate: Q::new(trials.into(), downloaded.max(1).into()),
                seed: Some(seed),
            })
        }
    }
}

/// Runs the universal scheme with fresh randomness and fresh contents per trial.
pub fn run_general_trials(
    g: &Graph,
    theta: FileId,
    group: SymbolGroup,
    trials: u64,
    seed: u64,
    exec: Exec,
) -> Result<TrialReport> {
    if trials == 0 {
        return param("trials must be positive");
    }
    if theta >= g.file_count() {
        return param(format!("theta {theta} is not a file of the graph"));
    }
    let k = g.file_count();
    let parts = blocks(trials);
    let tallies = exec.map(parts.len() as u64, |b| {
        let (block, len) = parts[b as usize];
        let mut rng = block_rng(seed, block);
        let (mut fail, mut down) = (0u64, 0u64);
        for _ in 0..len {
            let r = Randomness::sample(k, &mut rng);
            let w: Vec<u64> = (0..k).map(|_| rng.random_range(0..group.q)).collect();
            let queries = build_general_query(g, theta, &r).expect("inputs checked");
            let answers: Vec<u64> = queries.iter().map(|c| group.evaluate(c, &w)).collect();
            down += queries.iter().filter(|c| !c.is_empty()).count() as u64;
            let got = general::reconstruct(&answers, g, theta, &r, group).expect("inputs checked");
            fail += u64::from(got != w[theta]);
        }
        (fail, down)
    });
    let failures = tallies.iter().map(|t| t.0).sum::<u64>();
    let downloaded = tallies.iter().map(|t| t.1).sum::<u64>();
    Ok(TrialReport {
        reconstructed_ok: failures == 0,
        trials,
        failures,
        downloaded_symbols: downloaded,
        theoretical_rate: general::general_rate(g)?,
        measured_rate: Q::new(trials.into(), downloaded.max(1).into()),
        seed: Some(seed),
    })
}

/// Schemes indexed by the desired file.
#[derive(Debug, Clone)]
pub enum AuditFamily {
    Deterministic(Vec<DeterministicScheme>),
    Probabilistic(Vec<ProbabilisticScheme>),
    /// The universal scheme for every file of the graph.
    General {
        graph: Graph,
        group: SymbolGroup,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum AuditMode {
    Structural,
    Distributional,
    Statistical { trials: u64, seed: u64, epsilon: Option<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ServerAudit {
    pub server: usize,
    pub passed: bool,
    /// Largest total-variation distance between two desired files.
    pub distance: Option<f64>,
    pub epsilon: Option<f64>,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AuditReport {
    pub mode: &'static str,
    pub passed: bool,
    pub thetas: Vec<FileId>,
    pub servers: Vec<ServerAudit>,
    pub seed: Option<u64>,
}

/// `3 sqrt(ln(2 |support|) / trials)`.
pub fn default_epsilon(support: usize, trials: u64) -> f64 {
    3.0 * ((2.0 * support.max(1) as f64).ln() / trials as f64).sqrt()
}

pub fn total_variation<K: Ord>(a: &BTreeMap<K, f64>, b: &BTreeMap<K, f64>) -> f64 {
    let keys: BTreeSet<&K> = a.keys().chain(b.keys()).collect();
    0.5 * keys.into_iter().map(|k| (a.get(k).unwrap_or(&0.0) - b.get(k).unwrap_or(&0.0)).abs()).sum::<f64>()
}

fn same_graph<'a>(mut graphs: impl Iterator<Item = &'a Graph>) -> Result<Graph> {
    let first = graphs.next().ok_or_else(|| Error::Parameter("empty scheme family".into()))?;
    if graphs.any(|g| g != first) {
        return param("all schemes of a family must share one graph");
    }
    Ok(first.clone())
}

fn compare_exact<T: PartialEq + std::fmt::Debug>(n: usize, per_theta: &[Vec<T>]) -> Vec<ServerAudit> {
    (1..=n)
        .map(|server| {
            let base = &per_theta[0][server - 1];
            let bad: Vec<usize> = (1..per_theta.len()).filter(|&t| &per_theta[t][server - 1] != base).collect();
            ServerAudit {
                server,
                passed: bad.is_empty(),
                distance: None,
                epsilon: None,
                detail: if bad.is_empty() {
                    "identical across desired files".into()
                } else {
                    format!("differs for family members {bad:?}")
                },
            }
        })
        .collect()
}

fn prob_distribution(p: &ProbabilisticScheme, server: usize) -> BTreeMap<Combination, Q> {
    let mut m: BTreeMap<Combination, Q> = BTreeMap::new();
    for row in &p.rows {
        *m.entry(row.query(server).to_vec()).or_insert_with(Q::zero) += &row.p;
    }
    m.retain(|_, v| !v.is_zero());
    m
}

/// Empirical per-server query frequencies for one desired file.
fn sample_queries<F>(
    n: usize,
    trials: u64,
    seed: u64,
    stream: u64,
    exec: Exec,
    draw: F,
) -> Vec<BTreeMap<Combination, f64>>
where
    F: Fn(&mut rand_chacha::ChaCha8Rng) -> Vec<Combination> + Sync + Send,
{
    let parts = blocks(trials);
    let counts = exec.map(parts.len() as u64, |b| {
        let (block, len) = parts[b as usize];
        let mut rng = block_rng(seed, stream << 32 | block);
        let mut c: Vec<HashMap<Combination, u64>> = vec![HashMap::new(); n];
        for _ in 0..len {
            for (i, q) in draw(&mut rng).into_iter().enumerate() {
                *c[i].entry(q).or_insert(0) += 1;
            }
        }
        c
    });
    let mut merged: Vec<BTreeMap<Combination, u64>> = vec![BTreeMap::new(); n];
    for part in counts {
        for (i, m) in part.into_iter().enumerate() {
            for (q, k) in m {
                *merged[i].entry(q).or_insert(0) += k;
            }
        }
    }
    merged.into_iter().map(|m| m.into_iter().map(|(q, k)| (q, k as f64 / trials as f64)).collect()).collect()
}

fn compare_sampled(
    n: usize,
    per_theta: &[Vec<BTreeMap<Combination, f64>>],
    trials: u64,
    epsilon: Option<f64>,
) -> Vec<ServerAudit> {
    (1..=n)
        .map(|server| {
            let support: BTreeSet<&Combination> = per_theta.iter().flat_map(|d| d[server - 1].keys()).collect();
            let eps = epsilon.unwrap_or_else(|| default_epsilon(support.len(), trials));
            let mut worst: f64 = 0.0;
            for a in 0..per_theta.len() {
                for b in a + 1..per_theta.len() {
                    worst = worst.max(total_variation(&per_theta[a][server - 1], &per_theta[b][server - 1]));
                }
            }
            ServerAudit {
                server,
                passed: worst < eps,
                distance: Some(worst),
                epsilon: Some(eps),
                detail: format!("support size {}", support.len()),
            }
        })
        .collect()
}

pub fn privacy_audit(family: &AuditFamily, mode: AuditMode, exec: Exec) -> Result<AuditReport> {
    let (name, thetas, servers, seed) = match (family, mode) {
        (AuditFamily::Deterministic(schemes), AuditMode::Structural) => {
            let g = same_graph(schemes.iter().map(|s| &s.graph))?;
            let per: Vec<Vec<_>> = schemes.iter().map(|s| s.type_profile().into_values().collect()).collect();
            let thetas = schemes.iter().map(|s| s.theta).collect();
            ("structural", thetas, compare_exact(g.n(), &per), None)
        }
        (AuditFamily::Probabilistic(schemes), AuditMode::Distributional) => {
            let g = same_graph(schemes.iter().map(|s| &s.graph))?;
            let per: Vec<Vec<_>> =
                schemes.iter().map(|p| (1..=g.n()).map(|v| prob_distribution(p, v)).collect()).collect();
            let thetas = schemes.iter().map(|s| s.theta).collect();
            ("distributional", thetas, compare_exact(g.n(), &per), None)
        }
        (AuditFamily::General { graph, group }, AuditMode::Distributional) => {
            let thetas: Vec<FileId> = (0..graph.file_count()).collect();
            let per: Vec<Vec<_>> = thetas
                .iter()
                .map(|&t| {
                    (1..=graph.n()).map(|v| answer_distribution(graph, t, v, *group, exec)).collect::<Result<Vec<_>>>()
                })
                .collect::<Result<_>>()?;
            ("distributional", thetas, compare_exact(graph.n(), &per), None)
        }
        (AuditFamily::Probabilistic(schemes), AuditMode::Statistical { trials, seed, epsilon }) => {
            let g = same_graph(schemes.iter().map(|s| &s.graph))?;
            if trials == 0 {
                return param("trials must be positive");
            }
            let per: Vec<_> = schemes
                .iter()
                .enumerate()
                .map(|(t, p)| {
                    let (weights, total) = row_weights(p)?;
                    Ok(sample_queries(g.n(), trials, seed, t as u64, exec, |rng| {
                        let row = &p.rows[pick_row(&weights, total, rng)];
                        (1..=g.n()).map(|v| row.query(v).to_vec()).collect()
                    }))
                })
                .collect::<Result<_>>()?;
            let thetas = schemes.iter().map(|s| s.theta).collect();
            ("statistical", thetas, compare_sampled(g.n(), &per, trials, epsilon), Some(seed))
        }
        (AuditFamily::General { graph, group }, AuditMode::Statistical { trials, seed, epsilon }) => {
            if trials == 0 {
                return param("trials must be positive");
            }
            let k = graph.file_count();
            let thetas: Vec<FileId> = (0..k).collect();
            let per: Vec<_> = thetas
                .iter()
                .map(|&t| {
                    sample_queries(graph.n(), trials, seed, t as u64, exec, |rng| {
                        let r = Randomness::sample(k, rng);
                        build_general_query(graph, t, &r)
                            .expect("inputs checked")
                            .into_iter()
                            .map(|c| group.normalize(c))
                            .collect()
                    })
                })
                .collect();
            ("statistical", thetas, compare_sampled(graph.n(), &per, trials, epsilon), Some(seed))
        }
        (f, m) => {
            let kind = match f {
                AuditFamily::Deterministic(_) => "deterministic",
                AuditFamily::Probabilistic(_) => "probabilistic",
                AuditFamily::General { .. } => "general",
            };
            return param(format!("{m:?} audit does not apply to a {kind} family"));
        }
    };
    Ok(AuditReport { mode: name, passed: servers.iter().all(|s| s.passed), thetas, servers, seed })
}
