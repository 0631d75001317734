//! Subcommand implementations.

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};

use pirlab::bounds::{bounds_table, render_csv, render_markdown, BoundReport};
use pirlab::builder::{build_scheme, theta_from_pair};
use pirlab::exec::{block_rng, Exec};
use pirlab::general::{answer_distribution, general_rate, SymbolGroup};
use pirlab::patterns::{check_independence, check_srp, extract_patterns, ExtractionResult};
use pirlab::rational::{to_decimal, to_fraction, Q};
use pirlab::scheme::{file_letter, verify_scheme, DeterministicScheme};
use pirlab::sequences::build_sequences;
use pirlab::sim::{
    privacy_audit, random_permutations, run_deterministic_trial, run_general_trials, run_probabilistic_trials,
    AuditFamily, AuditMode, Storage, TrialMode, TrialReport,
};
use pirlab::transform::{entropy_proxy, prob_rate, transform, ProbabilisticScheme};
use serde::Serialize;
use serde_json::{json, Value};

use crate::output::{csv_header, emit, json_text, precision, with_header, Header, Inputs};
use crate::{parse, Command, Format, ModeArg};

#[derive(Debug)]
pub enum CliError {
    Lib(pirlab::Error),
    Io(String),
    /// A check ran and reported a failure.
    Failed(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Lib(pirlab::Error::Parameter(_) | pirlab::Error::UnsupportedSize(_)) => 2,
            CliError::Lib(pirlab::Error::Infeasible { .. }) => 3,
            _ => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Lib(e) => write!(f, "{e}"),
            CliError::Io(e) => write!(f, "{e}"),
            CliError::Failed(e) => write!(f, "check failed: {e}"),
        }
    }
}

impl From<pirlab::Error> for CliError {
    fn from(e: pirlab::Error) -> Self {
        CliError::Lib(e)
    }
}

type Result<T> = std::result::Result<T, CliError>;

fn param<T>(msg: impl Into<String>) -> Result<T> {
    Err(CliError::Lib(pirlab::Error::Parameter(msg.into())))
}

fn write(text: &str, out: Option<&Path>) -> Result<()> {
    emit(text, out).map_err(|e| CliError::Io(format!("cannot write output: {e}")))
}

fn write_json<T: Serialize>(header: &Header, body: &T, out: Option<&Path>) -> Result<()> {
    write(&json_text(&with_header(header, body)), out)
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| CliError::Lib(pirlab::Error::Parameter(format!("{}: {e}", path.display()))))
}

enum AnyScheme {
    Deterministic(DeterministicScheme),
    Probabilistic(ProbabilisticScheme),
}

fn load_scheme(path: &Path) -> Result<(AnyScheme, Vec<u8>)> {
    let bytes = read(path)?;
    let v: Value = serde_json::from_slice(&bytes)
        .map_err(|e| CliError::Lib(pirlab::Error::Parameter(format!("{}: {e}", path.display()))))?;
    let bad = |e: serde_json::Error| CliError::Lib(pirlab::Error::Parameter(format!("{}: {e}", path.display())));
    let s = if v.get("rows").is_some() {
        AnyScheme::Probabilistic(serde_json::from_value(v).map_err(bad)?)
    } else {
        AnyScheme::Deterministic(serde_json::from_value(v).map_err(bad)?)
    };
    Ok((s, bytes))
}

fn load_deterministic(path: &Path) -> Result<(DeterministicScheme, Vec<u8>)> {
    match load_scheme(path)? {
        (AnyScheme::Deterministic(s), b) => Ok((s, b)),
        _ => param(format!("{} is not a deterministic scheme", path.display())),
    }
}

/// Stored partition if present, else extraction.
fn partition_of(s: &DeterministicScheme) -> Result<ExtractionResult> {
    if s.patterns.is_empty() {
        Ok(extract_patterns(s)?)
    } else {
        Ok(ExtractionResult { patterns: s.patterns.clone(), side_info: s.side_info.clone() })
    }
}

fn combination_text(c: &[(usize, i8)]) -> String {
    if c.is_empty() {
        return "0".into();
    }
    let mut s = String::new();
    for (i, &(f, sign)) in c.iter().enumerate() {
        match (i, sign < 0) {
            (_, true) => s.push('-'),
            (0, false) => {}
            (_, false) => s.push('+'),
        }
        s.push_str(&file_letter(f).to_uppercase());
    }
    s
}

pub fn run(cmd: Command, exec: Exec) -> Result<()> {
    match cmd {
        Command::Bounds { n_min, n_max, format, out } => bounds(n_min, n_max, format, out),
        Command::Sequences { n, format, out } => sequences(n, format, out),
        Command::Build { n, theta, out, verify } => build(n, &theta, out, verify),
        Command::Extract { scheme, out } => extract(&scheme, out),
        Command::Transform { scheme, out } => transform_cmd(&scheme, out),
        Command::General { graph, q, theta, enumerate, trials, seed, out } => {
            general(&graph, q, &theta, enumerate, trials, seed, out, exec)
        }
        Command::Simulate { scheme, contents, seed, trials, exact, report } => {
            simulate(&scheme, &contents, seed, trials, exact, report, exec)
        }
        Command::Audit { family, graph, mode, q, trials, seed, epsilon, out } => {
            audit(family, graph, mode, q, trials, seed, epsilon, out, exec)
        }
    }
}

fn bound_json(r: &BoundReport, places: usize) -> Value {
    let sources: BTreeMap<&str, String> = r.sources.iter().map(|(k, v)| (*k, to_fraction(v))).collect();
    json!({
        "n": r.n,
        "upper": to_fraction(&r.upper),
        "lower": to_fraction(&r.lower),
        "upper_coeff": to_fraction(&r.coefficient_upper),
        "lower_coeff": to_fraction(&r.coefficient_lower),
        "upper_decimal": to_decimal(&r.upper, places),
        "lower_decimal": to_decimal(&r.lower, places),
        "sources": sources,
    })
}

fn bounds(n_min: usize, n_max: usize, format: Format, out: Option<PathBuf>) -> Result<()> {
    let places = precision(5).map_err(|e| CliError::Lib(pirlab::Error::Parameter(e)))?;
    let rows = bounds_table(n_min, n_max)?;
    let header = Inputs::new("bounds")
        .param("n_min", n_min)
        .param("n_max", n_max)
        .param("places", places)
        .header("bounds", None);
    let text = match format {
        Format::Csv => csv_header(&header) + &render_csv(&rows, places),
        Format::Markdown => {
            format!("<!-- {} -->\n", csv_header(&header).trim_start_matches("# ").trim_end())
                + &render_markdown(&rows, places)
        }
        Format::Json => {
            let body = json!({ "rows": rows.iter().map(|r| bound_json(r, places)).collect::<Vec<_>>() });
            json_text(&with_header(&header, &body))
        }
    };
    write(&text, out.as_deref())
}

fn sequences(n: usize, format: Format, out: Option<PathBuf>) -> Result<()> {
    let places = precision(5).map_err(|e| CliError::Lib(pirlab::Error::Parameter(e)))?;
    let l = build_sequences(n)?;
    let header = Inputs::new("sequences").param("n", n).header("sequences", None);
    let x: Vec<Option<String>> = (1..n).map(|k| l.x(k).map(to_fraction)).collect();
    let y: Vec<Option<String>> = (1..n).map(|k| l.y(k).map(to_fraction)).collect();
    let z: Vec<Option<String>> = (1..n).map(|k| l.z(k).map(to_fraction)).collect();
    match format {
        Format::Json => {
            let body = json!({
                "n": n,
                "k0": l.k0,
                "x": x,
                "y": y,
                "z": z,
                "M": l.m_scale.to_string(),
                "L": l.subpacketization.to_string(),
                "answer_count": l.answer_count.to_string(),
                "rate": to_fraction(&l.rate),
                "rate_decimal": to_decimal(&l.rate, places),
            });
            write_json(&header, &body, out.as_deref())
        }
        Format::Csv | Format::Markdown => {
            let cell = |c: &Option<String>| c.clone().unwrap_or_default();
            let mut text = csv_header(&header) + "k,x,y,z\n";
            for k in 0..n - 1 {
                text += &format!("{},{},{},{}\n", k + 1, cell(&x[k]), cell(&y[k]), cell(&z[k]));
            }
            text += &format!("# M={} L={} rate={}\n", l.m_scale, l.subpacketization, to_fraction(&l.rate));
            write(&text, out.as_deref())
        }
    }
}

fn build(n: usize, theta: &str, out: Option<PathBuf>, verify: bool) -> Result<()> {
    let (u, v) = parse::pair(theta)?;
    let theta = theta_from_pair(n, u, v)?;
    let s = build_scheme(n, theta)?;
    if verify {
        let r = verify_scheme(&s);
        if !r.passed() {
            return Err(CliError::Failed(format!("{} violations, first: {:?}", r.violations.len(), r.violations[0])));
        }
    }
    let header = Inputs::new("build").param("n", n).param("theta", format!("{u},{v}")).header("build", None);
    eprintln!(
        "built K_{n} scheme for file ({u},{v}): L = {}, {} summations per server, rate {}",
        s.l,
        s.answer_counts()[0],
        to_fraction(&Q::new(s.l.into(), s.total_answers().into()))
    );
    write_json(&header, &s, out.as_deref())
}

fn extract(path: &Path, out: Option<PathBuf>) -> Result<()> {
    let (s, bytes) = load_deterministic(path)?;
    let header = Inputs::new("extract").bytes("scheme", &bytes).header("extract", None);
    let violations = check_independence(&s);
    if !violations.is_empty() {
        write_json(&header, &json!({ "independence": { "passed": false, "violations": violations } }), out.as_deref())?;
        return Err(CliError::Failed(format!("independence property fails ({} violations)", violations.len())));
    }
    let ex = extract_patterns(&s)?;
    let srp = check_srp(&s, &ex);
    let proxy: BTreeMap<usize, Value> = entropy_proxy(&s)
        .into_iter()
        .map(|(v, (count, rank))| (v, json!({ "summations": count, "rank": rank })))
        .collect();
    let body = json!({
        "independence": { "passed": true, "violations": [] },
        "L": s.l,
        "patterns": ex.patterns,
        "side_info": ex.side_info,
        "srp": srp,
        "entropy_proxy": proxy,
    });
    write_json(&header, &body, out.as_deref())
}

fn row_table(p: &ProbabilisticScheme) -> Vec<String> {
    p.rows
        .iter()
        .map(|r| {
            let cells: Vec<String> = (1..=p.graph.n()).map(|v| combination_text(r.query(v))).collect();
            format!("{} | {}", to_fraction(&r.p), cells.join(" | "))
        })
        .collect()
}

fn transform_cmd(path: &Path, out: Option<PathBuf>) -> Result<()> {
    let (s, bytes) = load_deterministic(path)?;
    let ex = partition_of(&s)?;
    let p = transform(&s, &ex)?;
    let header = Inputs::new("transform").bytes("scheme", &bytes).header("transform", None);
    let mut body = serde_json::to_value(&p).expect("scheme serializes");
    body["rate"] = json!(to_fraction(&prob_rate(&p)));
    body["table"] = json!(row_table(&p));
    write_json(&header, &body, out.as_deref())
}

fn group(q: u64) -> Result<SymbolGroup> {
    Ok(SymbolGroup::new(q)?)
}

#[allow(clippy::too_many_arguments)]
fn general(
    graph: &str,
    q: u64,
    theta: &str,
    enumerate: bool,
    trials: Option<u64>,
    seed: u64,
    out: Option<PathBuf>,
    exec: Exec,
) -> Result<()> {
    let (g, bytes) = parse::graph(graph)?;
    let theta = parse::file(&g, theta)?;
    let group = group(q)?;
    let mut inputs = Inputs::new("general").param("graph", graph).param("q", q).param("theta", theta);
    if let Some(b) = &bytes {
        inputs = inputs.bytes("graph_file", b);
    }
    inputs = inputs.param("enumerate", enumerate).param("trials", trials.unwrap_or(0));
    let header = inputs.header("general", trials.map(|_| seed));
    let rate = general_rate(&g)?;
    let mut body = json!({
        "graph": g,
        "q": q,
        "theta": theta,
        "rate": to_fraction(&rate),
    });
    if enumerate {
        let mut dist = BTreeMap::new();
        for v in 1..=g.n() {
            let d = answer_distribution(&g, theta, v, group, exec)?;
            let rows: Vec<Value> =
                d.iter().map(|(c, p)| json!({ "query": combination_text(c), "p": to_fraction(p) })).collect();
            dist.insert(v, rows);
        }
        body["distribution"] = json!(dist);
    }
    if let Some(t) = trials {
        let r = run_general_trials(&g, theta, group, t, seed, exec)?;
        body["trials"] = serde_json::to_value(&r).expect("report serializes");
    }
    write_json(&header, &body, out.as_deref())
}

fn simulate(
    path: &Path,
    contents: &str,
    seed: u64,
    trials: u64,
    exact: bool,
    report: Option<PathBuf>,
    exec: Exec,
) -> Result<()> {
    if contents != "random" {
        return param(format!("unsupported contents source {contents:?}; use random"));
    }
    if trials == 0 {
        return param("trials must be positive");
    }
    let (scheme, bytes) = load_scheme(path)?;
    let header = Inputs::new("simulate")
        .bytes("scheme", &bytes)
        .param("trials", trials)
        .param("exact", exact)
        .header("simulate", Some(seed));
    let result: TrialReport = match scheme {
        AnyScheme::Deterministic(mut s) => {
            if s.patterns.is_empty() {
                partition_of(&s)?.apply_to(&mut s);
            }
            let reports = exec.map(trials, |t| {
                let mut rng = block_rng(seed, t);
                let st = Storage::random(&s.graph, SymbolGroup::binary(), s.l, &mut rng);
                let perms = random_permutations(s.graph.file_count(), s.l, &mut rng);
                run_deterministic_trial(&s, &st, Some(&perms))
            });
            let reports = reports.into_iter().collect::<pirlab::Result<Vec<_>>>()?;
            let failures = reports.iter().map(|r| r.failures).sum::<u64>();
            let downloaded = reports.iter().map(|r| r.downloaded_symbols).sum::<u64>();
            TrialReport {
                reconstructed_ok: failures == 0,
                trials,
                failures,
                downloaded_symbols: downloaded,
                theoretical_rate: reports[0].theoretical_rate.clone(),
                measured_rate: Q::new((s.l as u64 * trials).into(), downloaded.into()),
                seed: Some(seed),
            }
        }
        AnyScheme::Probabilistic(p) => {
            let st = Storage::random(&p.graph, SymbolGroup::binary(), 1, &mut block_rng(seed, u64::MAX));
            let mode = if exact { TrialMode::Exact } else { TrialMode::Sampled { trials, seed } };
            let mut r = run_probabilistic_trials(&p, &st, mode, exec)?;
            r.seed = Some(seed);
            r
        }
    };
    let ok = result.reconstructed_ok;
    write_json(&header, &result, report.as_deref())?;
    if ok {
        Ok(())
    } else {
        Err(CliError::Failed(format!("{} of {} retrievals failed", result.failures, result.trials)))
    }
}

fn complete_family(spec: &str) -> Result<usize> {
    spec.strip_prefix(['k', 'K'])
        .and_then(|n| n.parse::<usize>().ok())
        .ok_or_else(|| CliError::Lib(pirlab::Error::Parameter(format!("family must look like k4, got {spec:?}"))))
}

#[allow(clippy::too_many_arguments)]
fn audit(
    family: Option<String>,
    graph: Option<String>,
    mode: ModeArg,
    q: u64,
    trials: u64,
    seed: u64,
    epsilon: Option<f64>,
    out: Option<PathBuf>,
    exec: Exec,
) -> Result<()> {
    let audit_mode = match mode {
        ModeArg::Structural => AuditMode::Structural,
        ModeArg::Distributional => AuditMode::Distributional,
        ModeArg::Statistical => AuditMode::Statistical { trials, seed, epsilon },
    };
    let mut inputs = Inputs::new("audit").param("mode", format!("{mode:?}"));
    let fam = match (family, graph) {
        (Some(f), None) => {
            let n = complete_family(&f)?;
            inputs = inputs.param("family", format!("k{n}"));
            let k = n * n.saturating_sub(1) / 2;
            let schemes = (0..k).map(|t| build_scheme(n, t)).collect::<pirlab::Result<Vec<_>>>()?;
            match mode {
                ModeArg::Structural => AuditFamily::Deterministic(schemes),
                _ => AuditFamily::Probabilistic(
                    schemes
                        .iter()
                        .map(|s| transform(s, &partition_of(s)?).map_err(CliError::from))
                        .collect::<Result<Vec<_>>>()?,
                ),
            }
        }
        (None, Some(spec)) => {
            let (g, bytes) = parse::graph(&spec)?;
            inputs = inputs.param("graph", &spec).param("q", q);
            if let Some(b) = &bytes {
                inputs = inputs.bytes("graph_file", b);
            }
            AuditFamily::General { graph: g, group: group(q)? }
        }
        _ => return param("audit needs exactly one of --family or --graph"),
    };
    let seed_used = matches!(mode, ModeArg::Statistical).then_some(seed);
    if seed_used.is_some() {
        inputs = inputs.param("trials", trials).param("epsilon", format!("{epsilon:?}"));
    }
    let report = privacy_audit(&fam, audit_mode, exec)?;
    let header = inputs.header("audit", seed_used);
    write_json(&header, &report, out.as_deref())?;
    if report.passed {
        Ok(())
    } else {
        let bad: Vec<usize> = report.servers.iter().filter(|s| !s.passed).map(|s| s.server).collect();
        Err(CliError::Failed(format!("privacy audit fails at servers {bad:?}")))
    }
}
