#![allow(dead_code)]

use std::path::PathBuf;

use pirlab::scheme::{render, DeterministicScheme};

pub fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

pub fn load_scheme(name: &str) -> DeterministicScheme {
    let text = std::fs::read_to_string(data(name)).expect("fixture readable");
    serde_json::from_str(&text).expect("fixture parses")
}

/// One line per pattern: each server's selection or `-`, joined by ` | `.
pub fn pattern_rows(s: &DeterministicScheme) -> Vec<String> {
    s.patterns
        .iter()
        .map(|p| {
            (1..=s.graph.n())
                .map(|v| match p.selections.get(&v) {
                    Some(&i) => render(&s.list(v)[i]),
                    None => "-".to_string(),
                })
                .collect::<Vec<_>>()
                .join(" | ")
        })
        .collect()
}
