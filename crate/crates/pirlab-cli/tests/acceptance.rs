//! End-to-end acceptance run. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any criterion fails. Runs without the libtest harness so
//! the lines show up in plain `cargo test` output.

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use pirlab::bounds::{multigraph_lower_bound, upper_bound_balanced_bipartite, upper_bound_complete};
use pirlab::builder::{build_scheme, theta_from_pair};
use pirlab::exec::{block_rng, Exec};
use pirlab::general::{answer_distribution, build_general_query, general_rate, reconstruct, Randomness, SymbolGroup};
use pirlab::patterns::{check_independence, extract_patterns};
use pirlab::rational::{q, qi, to_f64, Q};
use pirlab::scheme::{file_letter, render, verify_scheme, DeterministicScheme, PatternClass, RecoveryPattern, SumRef};
use pirlab::sequences::{build_sequences, closed_form_x, rate};
use pirlab::sim::{
    privacy_audit, random_permutations, run_deterministic_trial, run_probabilistic_trials, AuditFamily, AuditMode,
    Storage, TrialMode,
};
use pirlab::transform::{prob_rate, transform, ProbabilisticScheme};
use pirlab::Graph;

type Outcome = Result<String, String>;
type Criterion = (&'static str, fn() -> Outcome);

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        let ok: bool = $cond;
        if !ok {
            return Err(format!($($msg)+));
        }
    };
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../pirlab/tests/data").join(name)
}

fn fixture(name: &str) -> DeterministicScheme {
    serde_json::from_str(&std::fs::read_to_string(data(name)).unwrap()).unwrap()
}

fn pattern_rows(s: &DeterministicScheme) -> Vec<String> {
    s.patterns
        .iter()
        .map(|p| {
            (1..=s.graph.n())
                .map(|v| p.selections.get(&v).map_or("-".to_string(), |&i| render(&s.list(v)[i])))
                .collect::<Vec<_>>()
                .join(" | ")
        })
        .collect()
}

fn signed(c: &[(usize, i8)]) -> String {
    if c.is_empty() {
        return "0".into();
    }
    let mut s = String::new();
    for (i, &(f, sign)) in c.iter().enumerate() {
        if sign < 0 {
            s.push('-');
        } else if i > 0 {
            s.push('+');
        }
        s.push_str(&file_letter(f).to_uppercase());
    }
    s
}

fn prob_rows(p: &ProbabilisticScheme) -> Vec<String> {
    p.rows
        .iter()
        .map(|r| {
            let cells: Vec<String> = (1..=p.graph.n()).map(|v| signed(r.query(v))).collect();
            format!("{} | {}", r.p, cells.join(" | "))
        })
        .collect()
}

type Partition = (BTreeSet<(usize, BTreeSet<SumRef>)>, BTreeSet<SumRef>);

fn partition(patterns: &[RecoveryPattern], side: &[SumRef]) -> Partition {
    (patterns.iter().map(|p| (p.target, p.refs().collect())).collect(), side.iter().copied().collect())
}

fn cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_pirlab")).args(args).env_remove("PIRLAB_PRECISION").output().unwrap()
}

fn criterion_1() -> Outcome {
    const UPPER: [&str; 8] = ["0.50000", "0.35294", "0.27907", "0.23211", "0.19890", "0.17403", "0.15469", "0.13922"];
    const LOWER: [&str; 8] = ["0.50000", "0.35000", "0.27541", "0.22868", "0.19583", "0.17111", "0.15198", "0.13657"];
    let start = Instant::now();
    let o = cli(&["bounds", "--n-min", "3", "--n-max", "10", "--format", "csv"]);
    let elapsed = start.elapsed();
    ensure!(o.status.success(), "exit {:?}", o.status.code());
    let text = String::from_utf8(o.stdout).unwrap();
    let rows: Vec<Vec<&str>> =
        text.lines().filter(|l| !l.starts_with('#')).skip(1).map(|l| l.split(',').collect()).collect();
    ensure!(rows.len() == 8, "{} rows", rows.len());
    for (i, r) in rows.iter().enumerate() {
        ensure!(r[0] == (i + 3).to_string(), "row {i} is n = {}", r[0]);
        ensure!(r[1] == UPPER[i] && r[2] == LOWER[i], "n = {}: {} / {}", i + 3, r[1], r[2]);
    }
    ensure!(elapsed < Duration::from_secs(1), "took {elapsed:?}");
    Ok(format!("8 rows match, {elapsed:.2?}"))
}

fn criterion_2() -> Outcome {
    let start = Instant::now();
    let e = std::f64::consts::E;
    let c = to_f64(&(upper_bound_complete(60).unwrap() * qi(60)));
    ensure!((c - 1.0 / (e - 2.0)).abs() < 1e-3, "complete coefficient {c}");
    let b = to_f64(&(upper_bound_balanced_bipartite(60).unwrap() * qi(60)));
    ensure!((b - 1.5415).abs() < 1e-3, "bipartite coefficient {b}");
    let mut worst = f64::INFINITY;
    for n in 3..=40 {
        let nr = to_f64(&(rate(n).unwrap() * qi(n as i64)));
        ensure!(nr >= 1.30, "n = {n}: n*rate = {nr}");
        worst = worst.min(nr);
    }
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(30), "took {elapsed:?}");
    Ok(format!("{c:.5} / {b:.5}, min n*rate {worst:.5}, {elapsed:.2?}"))
}

fn criterion_3() -> Outcome {
    let golden = std::fs::read_to_string(data("k4_theta12_rows.txt")).unwrap();
    let golden: Vec<&str> = golden.lines().filter(|l| !l.trim().is_empty()).collect();
    let s = build_scheme(4, theta_from_pair(4, 1, 2).unwrap()).unwrap();
    ensure!(pattern_rows(&s) == golden, "golden rows differ");
    ensure!(s.l == 84 && s.answer_counts() == vec![60; 4], "L = {}, counts {:?}", s.l, s.answer_counts());
    ensure!(q(s.l as i64, s.total_answers() as i64) == q(7, 20), "rate");
    let mut steps: BTreeMap<usize, usize> = BTreeMap::new();
    let mut step3: BTreeMap<PatternClass, usize> = BTreeMap::new();
    for p in &s.patterns {
        *steps.entry(p.step.unwrap()).or_default() += 1;
        if p.step == Some(3) {
            *step3.entry(p.class.unwrap()).or_default() += 1;
        }
    }
    ensure!(steps.values().copied().collect::<Vec<_>>() == vec![8, 40, 36], "steps {steps:?}");
    ensure!(
        (step3[&PatternClass::Alpha], step3[&PatternClass::Beta], step3[&PatternClass::Gamma]) == (16, 2, 18),
        "step 3 classes {step3:?}"
    );
    for theta in 0..6 {
        let s = build_scheme(4, theta).unwrap();
        ensure!(verify_scheme(&s).passed(), "verify fails at theta {theta}");
        for draw in 0..100 {
            let mut rng = block_rng(theta as u64, draw);
            let st = Storage::random(&s.graph, SymbolGroup::binary(), s.l, &mut rng);
            let perms = random_permutations(s.graph.file_count(), s.l, &mut rng);
            let r = run_deterministic_trial(&s, &st, Some(&perms)).unwrap();
            ensure!(r.reconstructed_ok && r.downloaded_symbols == 240, "theta {theta} draw {draw}");
        }
    }
    Ok("84 golden rows, 8/40/36, 16/2/18, 600 draws reconstruct".into())
}

fn criterion_4() -> Outcome {
    let mut checked = 0;
    for n in 3..=12 {
        let l = build_sequences(n).unwrap();
        for k in 1..n {
            ensure!(closed_form_x(n, k).unwrap() == *l.x(k).unwrap(), "n = {n}, k = {k}");
            checked += 1;
        }
    }
    Ok(format!("{checked} values equal"))
}

fn criterion_5() -> Outcome {
    let mut k3 = fixture("k3_table.json");
    ensure!(check_independence(&k3).is_empty(), "K3 fixture violates independence");
    let ex = extract_patterns(&k3).unwrap();
    ensure!(ex.patterns.len() == 6 && ex.side_info.is_empty(), "K3 extraction");
    ex.apply_to(&mut k3);
    let want =
        ["a1 | - | -", "- | a2 | -", "a3+b1 | - | b1", "- | a4+c1 | c1", "a5+b2 | c2 | b2+c2", "b3 | a6+c3 | b3+c3"];
    ensure!(pattern_rows(&k3) == want, "K3 grouping {:?}", pattern_rows(&k3));

    let star = fixture("star4.json");
    ensure!(check_independence(&star).is_empty(), "star fixture violates independence");
    let ex = extract_patterns(&star).unwrap();
    let side: Vec<String> =
        ex.side_info.iter().map(|&r| format!("S{} {}", r.server, render(star.get(r).unwrap()))).collect();
    ensure!(ex.patterns.len() == 5 && side == ["S1 b3+c3+d3"], "star extraction {side:?}");

    let base = fixture("k3_table.json");
    let find =
        |s: &DeterministicScheme, v: usize, text: &str| s.list(v).iter().position(|x| render(x) == text).unwrap();
    let set = |s: &mut DeterministicScheme, v: usize, i: usize, terms: &[(usize, usize)]| {
        s.queries.get_mut(&v).unwrap()[i] =
            pirlab::scheme::Summation::new(terms.iter().map(|&(f, sub)| pirlab::scheme::Term::plus(f, sub)).collect());
    };
    let mut m2 = base.clone();
    let i = find(&m2, 3, "b2+c2");
    set(&mut m2, 3, i, &[(1, 1), (2, 2)]);
    let mut m3 = base.clone();
    let i = find(&m3, 2, "a2");
    set(&mut m3, 2, i, &[(0, 1)]);
    let mut m4 = base.clone();
    let (b1, c1) = (find(&m4, 3, "b1"), find(&m4, 3, "c1"));
    set(&mut m4, 3, b1, &[(1, 1), (2, 1)]);
    set(&mut m4, 3, c1, &[(2, 4)]);
    for (condition, m) in [(2, &m2), (3, &m3), (4, &m4)] {
        let v = check_independence(m);
        ensure!(v.iter().any(|x| x.condition == condition), "mutation {condition}: {v:?}");
        ensure!(extract_patterns(m).is_err(), "mutation {condition} still extracts");
    }
    Ok("K3 6 patterns, star 5 + {b3+c3+d3}, mutations 2/3/4 caught".into())
}

fn criterion_6() -> Outcome {
    let k3 = fixture("k3_table.json");
    let p = transform(&k3, &extract_patterns(&k3).unwrap()).unwrap();
    let mut rows = prob_rows(&p);
    rows.sort();
    let mut want = vec![
        "1/6 | A | 0 | 0",
        "1/6 | 0 | A | 0",
        "1/6 | A+B | 0 | B",
        "1/6 | 0 | A+C | C",
        "1/6 | A+B | C | B+C",
        "1/6 | B | A+C | B+C",
    ];
    want.sort();
    ensure!(rows == want, "K3 rows {rows:?}");
    ensure!(prob_rate(&p) == q(1, 2), "K3 rate");

    let star = fixture("star4.json");
    let p = transform(&star, &extract_patterns(&star).unwrap()).unwrap();
    let want = [
        "1/5 | A+B+C | 0 | B | C | 0",
        "1/5 | A+B+D | 0 | B | 0 | D",
        "1/5 | A+C+D | 0 | 0 | C | D",
        "1/5 | B+C+D | A | 0 | 0 | 0",
        "1/5 | 0 | A | 0 | 0 | 0",
    ];
    ensure!(prob_rows(&p) == want, "star rows {:?}", prob_rows(&p));
    ensure!(prob_rate(&p) == q(5, 12), "star rate {}", prob_rate(&p));

    let o = cli(&["transform", "--scheme", data("infeasible.json").to_str().unwrap()]);
    ensure!(o.status.code() == Some(3), "infeasible exit {:?}", o.status.code());

    for n in 3..=5 {
        for theta in 0..n * (n - 1) / 2 {
            let s = build_scheme(n, theta).unwrap();
            let p = transform(&s, &extract_patterns(&s).unwrap()).unwrap();
            ensure!(prob_rate(&p) == rate(n).unwrap(), "n = {n}, theta = {theta}");
        }
    }
    Ok("fixture rows match, infeasible exits 3, rates preserved for n = 3..5".into())
}

fn criterion_7() -> Outcome {
    let k3 = Graph::complete(3).unwrap();
    let group = SymbolGroup::new(257).unwrap();
    let w = [123, 45, 250];
    for theta in 0..3 {
        for idx in 0..64 {
            let r = Randomness::from_index(3, idx);
            let answers: Vec<u64> =
                build_general_query(&k3, theta, &r).unwrap().iter().map(|c| group.evaluate(c, &w)).collect();
            ensure!(
                reconstruct(&answers, &k3, theta, &r, group).unwrap() == w[theta],
                "theta {theta}, randomness {idx}"
            );
        }
    }
    for v in 1..=3 {
        let d0 = answer_distribution(&k3, 0, v, group, Exec::default()).unwrap();
        for theta in 1..3 {
            ensure!(
                answer_distribution(&k3, theta, v, group, Exec::default()).unwrap() == d0,
                "server {v}, theta {theta}"
            );
        }
    }
    ensure!(general_rate(&k3).unwrap() == q(4, 9), "K3 rate");

    let paw = Graph::paw();
    let show = |theta: usize, r: &Randomness| {
        let qs = build_general_query(&paw, theta, r).unwrap();
        format!("({})", qs.iter().map(|c| signed(c)).collect::<Vec<_>>().join(","))
    };
    let worked = [
        show(0, &Randomness::from_bits(&[1, 0, 1, 0], &[0, 1, 0, 1])),
        show(2, &Randomness::from_bits(&[1, 1, 0, 1], &[0, 0, 0, 1])),
    ];
    ensure!(worked == ["(A,C,-C,0)", "(A+B-D,-A,-B-C,D)"], "worked vectors {worked:?}");
    let table: [([u8; 4], &str); 16] = [
        ([0, 0, 0, 0], "(0,-A,0,0)"),
        ([1, 0, 0, 0], "(A,0,0,0)"),
        ([0, 1, 0, 0], "(B,-A,-B,0)"),
        ([0, 0, 1, 0], "(0,-A+C,-C,0)"),
        ([0, 0, 0, 1], "(D,-A,0,-D)"),
        ([1, 1, 0, 0], "(A+B,0,-B,0)"),
        ([1, 0, 1, 0], "(A,C,-C,0)"),
        ([1, 0, 0, 1], "(A+D,0,0,-D)"),
        ([0, 1, 1, 0], "(B,-A+C,-B-C,0)"),
        ([0, 1, 0, 1], "(B+D,-A,-B,-D)"),
        ([0, 0, 1, 1], "(D,-A+C,-C,-D)"),
        ([1, 1, 1, 0], "(A+B,C,-B-C,0)"),
        ([1, 1, 0, 1], "(A+B+D,0,-B,-D)"),
        ([1, 0, 1, 1], "(A+D,C,-C,-D)"),
        ([0, 1, 1, 1], "(B+D,-A+C,-B-C,-D)"),
        ([1, 1, 1, 1], "(A+B+D,C,-B-C,-D)"),
    ];
    for (mu, want) in table {
        let got = show(0, &Randomness::from_bits(&mu, &[0, 0, 0, 0]));
        ensure!(got == want, "mu {mu:?}: {got} != {want}");
    }
    Ok("192 retrievals over Z_257, distributions equal, rate 4/9, 16 lambda = 0 query vectors".into())
}

fn criterion_8() -> Outcome {
    let k32 = Graph::complete(3).unwrap().multigraph_extension(2).unwrap();
    let g = general_rate(&k32).unwrap();
    let lb = multigraph_lower_bound(&q(1, 2), 2).unwrap();
    ensure!(g == q(16, 45) && lb == q(1, 3) && g > lb, "K3^(2): {g} vs {lb}");
    let mut cases = 0;
    for n in 3..=8 {
        let inv_n = q(1, n as i64);
        for r in 1..=3 {
            let gr = general_rate(&Graph::complete(n).unwrap().multigraph_extension(r).unwrap()).unwrap();
            ensure!(q(8, 9) * &inv_n <= inv_n && inv_n <= gr, "n = {n}, r = {r}: general rate {gr}");
            if r >= 2 {
                let first = Q::from_integer(1.into()) / (qi(2) - q(1, 1 << (r - 1))) * q(4, 3) * &inv_n;
                ensure!(first <= q(8, 9) * &inv_n, "n = {n}, r = {r}: leading term {first}");
                let via_complete = multigraph_lower_bound(&rate(n).unwrap(), r).unwrap();
                ensure!(gr > via_complete, "n = {n}, r = {r}: {gr} <= {via_complete}");
            }
            cases += 1;
        }
    }
    Ok(format!("16/45 > 1/3, chain holds in {cases} cases"))
}

fn criterion_9() -> Outcome {
    let start = Instant::now();
    for n in 3..=5 {
        let schemes: Vec<DeterministicScheme> = (0..n * (n - 1) / 2).map(|t| build_scheme(n, t).unwrap()).collect();
        let want = rate(n).unwrap();
        for s in &schemes {
            let ex = extract_patterns(s).unwrap();
            ensure!(
                partition(&ex.patterns, &ex.side_info) == partition(&s.patterns, &s.side_info),
                "n = {n}, theta = {}: partition differs",
                s.theta
            );
            let p = transform(s, &ex).unwrap();
            let st = Storage::random(&p.graph, SymbolGroup::binary(), 1, &mut block_rng(n as u64, s.theta as u64));
            let r = run_probabilistic_trials(&p, &st, TrialMode::Exact, Exec::default()).unwrap();
            ensure!(r.reconstructed_ok && r.measured_rate == want, "n = {n}, theta = {}: {r:?}", s.theta);
        }
        let audit =
            privacy_audit(&AuditFamily::Deterministic(schemes), AuditMode::Structural, Exec::default()).unwrap();
        ensure!(audit.passed, "structural audit fails at n = {n}");
    }
    let elapsed = start.elapsed();
    ensure!(elapsed < Duration::from_secs(120), "took {elapsed:?}");
    Ok(format!("19 schemes round-trip, {elapsed:.2?}"))
}

fn criterion_10() -> Outcome {
    let family = AuditFamily::General { graph: Graph::paw(), group: SymbolGroup::binary() };
    let mode = AuditMode::Statistical { trials: 100_000, seed: 2024, epsilon: Some(0.02) };
    let report = privacy_audit(&family, mode, Exec::default()).unwrap();
    ensure!(report.thetas.len() == 4, "thetas {:?}", report.thetas);
    let worst = report.servers.iter().map(|s| s.distance.unwrap()).fold(0.0, f64::max);
    ensure!(report.passed && worst < 0.02, "max TV {worst}");
    Ok(format!("max TV {worst:.5} over 4 servers"))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("bounds table", criterion_1),
        ("asymptotic coefficients", criterion_2),
        ("K4 golden scheme", criterion_3),
        ("closed form vs recurrence", criterion_4),
        ("extraction fixtures", criterion_5),
        ("transformation", criterion_6),
        ("general scheme on K3", criterion_7),
        ("multigraph comparison", criterion_8),
        ("round trip n = 3..5", criterion_9),
        ("statistical audit on the paw graph", criterion_10),
    ];
    let mut failed = Vec::new();
    for (i, (name, run)) in criteria.iter().enumerate() {
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            Err(e
                .downcast_ref::<String>()
                .cloned()
                .or(e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default())
        });
        match outcome {
            Ok(detail) => println!("PASS criterion {}: {name} ({detail})", i + 1),
            Err(why) => {
                println!("FAIL criterion {}: {name} ({why})", i + 1);
                failed.push(i + 1);
            }
        }
    }
    if !failed.is_empty() {
        eprintln!("failed criteria: {failed:?}");
        std::process::exit(1);
    }
}
