//! Graph and file addressing on the command line.

use std::path::Path;

use pirlab::graph::{Family, Graph};
use pirlab::{Error, FileId, Result};

/// `complete:N`, `bipartite:M,N`, `star:L`, `cycle:N`, `path:N`, `paw`, or a
/// JSON graph file. A trailing `xR` (e.g. `complete:3x2`) takes the
/// `R`-multigraph extension. Returns the graph and the file bytes if any.
pub fn graph(spec: &str) -> Result<(Graph, Option<Vec<u8>>)> {
    if Path::new(spec).is_file() {
        let bytes = std::fs::read(spec).map_err(|e| Error::Parameter(format!("{spec}: {e}")))?;
        let g: Graph = serde_json::from_slice(&bytes).map_err(|e| Error::Parameter(format!("{spec}: {e}")))?;
        return Ok((g, Some(bytes)));
    }
    let (base, r) = match spec.rsplit_once('x') {
        Some((b, r)) if !b.is_empty() && r.chars().all(|c| c.is_ascii_digit()) && !r.is_empty() => {
            (b, r.parse::<usize>().ok())
        }
        _ => (spec, None),
    };
    let g = if base == "paw" {
        Graph::paw()
    } else {
        let (name, args) = base.split_once(':').ok_or_else(|| Error::Parameter(format!("unknown graph {spec:?}")))?;
        let params = args
            .split(',')
            .map(|p| p.trim().parse::<usize>())
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|_| Error::Parameter(format!("bad graph parameters in {spec:?}")))?;
        let family = match name {
            "complete" => Family::Complete,
            "bipartite" => Family::CompleteBipartite,
            "star" => Family::Star,
            "cycle" => Family::Cycle,
            "path" => Family::Path,
            _ => return Err(Error::Parameter(format!("unknown graph family {name:?}"))),
        };
        Graph::family(family, &params)?
    };
    match r {
        Some(r) => Ok((g.multigraph_extension(r)?, None)),
        None => Ok((g, None)),
    }
}

/// A file id, or `u,v` / `u,v,k` naming the `k`-th parallel edge between
/// `u` and `v` (1-based, default 1).
pub fn file(g: &Graph, spec: &str) -> Result<FileId> {
    let parts: Vec<&str> = spec.split(',').map(str::trim).collect();
    let nums = parts
        .iter()
        .map(|p| p.parse::<usize>())
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|_| Error::Parameter(format!("bad file reference {spec:?}")))?;
    let id = match nums[..] {
        [f] => Some(f).filter(|&f| f < g.file_count()),
        [u, v] => g.files_between(u.min(v), u.max(v)).first().copied(),
        [u, v, k] if k >= 1 => g.files_between(u.min(v), u.max(v)).get(k - 1).copied(),
        _ => None,
    };
    id.ok_or_else(|| Error::Parameter(format!("{spec:?} is not a file of the graph")))
}

/// `u,v` endpoint pair.
pub fn pair(spec: &str) -> Result<(usize, usize)> {
    let (u, v) = spec.split_once(',').ok_or_else(|| Error::Parameter(format!("expected u,v, got {spec:?}")))?;
    let p = |s: &str| s.trim().parse::<usize>().map_err(|_| Error::Parameter(format!("expected u,v, got {spec:?}")));
    let (u, v) = (p(u)?, p(v)?);
    Ok((u.min(v), u.max(v)))
}
