//! Exact capacity bounds for replicated-storage PIR.

use std::collections::BTreeMap;

use num_traits::Zero;

use crate::error::{param, Error, Result};
use crate::graph::Graph;
use crate::rational::{factorial, pow2, q, qi, to_decimal, Q};
use crate::sequences;

/// Upper bound on the capacity of `K_n`: `1 / (n Σ_{i=2}^n 1/i!)`.
pub fn upper_bound_complete(n: usize) -> Result<Q> {
    if n < 3 {
        return param("complete-graph upper bound needs n >= 3");
    }
    let sum = (2..=n).fold(Q::zero(), |acc, i| acc + Q::new(1.into(), factorial(i as u64)));
    Ok(qi(1) / (qi(n as i64) * sum))
}

/// Upper bound on the capacity of `K_{n/2,n/2}`: `1 / (n Σ_{i=1}^{n/2} 1/(i! 2^i))`.
pub fn upper_bound_balanced_bipartite(n: usize) -> Result<Q> {
    if n < 4 || n % 2 == 1 {
        return param("balanced bipartite bound needs even n >= 4");
    }
    let sum = (1..=n / 2).fold(Q::zero(), |acc, i| acc + Q::new(1.into(), factorial(i as u64) * pow2(i as u32)));
    Ok(qi(1) / (qi(n as i64) * sum))
}

/// `min{Δ/|E|, 1/ν}` for a simple graph.
pub fn general_upper_bound(g: &Graph) -> Result<Q> {
    if g.is_multigraph() {
        return param("general upper bound is stated for simple graphs");
    }
    if g.file_count() == 0 {
        return param("graph has no files");
    }
    let by_degree = q(g.max_degree() as i64, g.file_count() as i64);
    let by_matching = q(1, g.matching_number()? as i64);
    Ok(by_degree.min(by_matching))
}

/// Earlier bounds for `K_n`, keyed by name.
pub fn prior_bounds_complete(n: usize) -> Result<BTreeMap<&'static str, Q>> {
    if n < 3 {
        return param("prior bounds need n >= 3");
    }
    let ni = n as i64;
    let half = Q::from_integer(pow2(n as u32 - 1));
    let mut m = BTreeMap::new();
    m.insert("sadeh_upper", q(2, ni + 1));
    m.insert("sadeh_lower", &half / ((&half - qi(1)) * qi(ni)));
    let tail = Q::new(1.into(), pow2(n as u32 - 3));
    m.insert("kong_lower", qi(6) / ((qi(5) - tail) * qi(ni)));
    Ok(m)
}

/// Lower bound for the `r`-multigraph extension from an SRP scheme of rate `rate`.
pub fn multigraph_lower_bound(rate: &Q, r: usize) -> Result<Q> {
    if r == 0 {
        return param("multiplicity r must be positive");
    }
    if *rate <= Q::zero() || *rate > qi(1) {
        return param("rate must lie in (0, 1]");
    }
    let denom = qi(2) - Q::new(1.into(), pow2(r as u32 - 1));
    Ok(rate / denom)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    pub n: usize,
    pub upper: Q,
    pub lower: Q,
    pub coefficient_upper: Q,
    pub coefficient_lower: Q,
    pub sources: BTreeMap<&'static str, Q>,
}

pub fn bound_report(n: usize) -> Result<BoundReport> {
    let upper = upper_bound_complete(n)?;
    let lower = sequences::rate_only(n)?;
    if lower > upper {
        return Err(Error::Internal(format!("lower bound exceeds upper bound at n = {n}")));
    }
    let ni = qi(n as i64);
    let mut sources = prior_bounds_complete(n)?;
    sources.insert("upper_complete", upper.clone());
    sources.insert("construction_rate", lower.clone());
    Ok(BoundReport { n, coefficient_upper: &upper * &ni, coefficient_lower: &lower * &ni, upper, lower, sources })
}

pub fn bounds_table(n_min: usize, n_max: usize) -> Result<Vec<BoundReport>> {
    if n_min < 3 || n_min > n_max {
        return param("bounds table needs 3 <= n_min <= n_max");
    }
    (n_min..=n_max).map(bound_report).collect()
}

pub fn render_csv(rows: &[BoundReport], places: usize) -> String {
    let mut out = String::from("n,upper,lower,upper_coeff,lower_coeff\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.n,
            to_decimal(&r.upper, places),
            to_decimal(&r.lower, places),
            to_decimal(&r.coefficient_upper, places),
            to_decimal(&r.coefficient_lower, places)
        ));
    }
    out
}

pub fn render_markdown(rows: &[BoundReport], places: usize) -> String {
    let mut out = String::from("| n | upper | lower | n·upper | n·lower |\n|---|---|---|---|---|\n");
    for r in rows {
        out.push_str(&format!(
            "| {} | {} | {} | {} | {} |\n",
            r.n,
            to_decimal(&r.upper, places),
            to_decimal(&r.lower, places),
            to_decimal(&r.coefficient_upper, places),
            to_decimal(&r.coefficient_lower, places)
        ));
    }
    out
}
