//! Replication topologies: servers are vertices `1..=n`, files are edges.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};

/// 0-based position of a file in [`Graph::edges`].
pub type FileId = usize;

/// Largest edge count accepted by [`Graph::matching_number`].
pub const MATCHING_EDGE_CAP: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Family {
    Complete,
    CompleteBipartite,
    Star,
    Cycle,
    Path,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "GraphJson", into = "GraphJson")]
pub struct Graph {
    n: usize,
    edges: Vec<(usize, usize)>,
    multigraph: bool,
}

#[derive(Serialize, Deserialize)]
struct GraphJson {
    n: usize,
    multigraph: bool,
    edges: Vec<[usize; 2]>,
}

impl TryFrom<GraphJson> for Graph {
    type Error = Error;
    fn try_from(g: GraphJson) -> Result<Self> {
        let edges = g.edges.into_iter().map(|[u, v]| (u, v)).collect();
        Graph::new(g.n, edges, g.multigraph)
    }
}

impl From<Graph> for GraphJson {
    fn from(g: Graph) -> Self {
        GraphJson { n: g.n, multigraph: g.multigraph, edges: g.edges.into_iter().map(|(u, v)| [u, v]).collect() }
    }
}

impl Graph {
    pub fn new(n: usize, edges: Vec<(usize, usize)>, multigraph: bool) -> Result<Self> {
        if n == 0 {
            return param("graph needs at least one vertex");
        }
        for &(u, v) in &edges {
            if !(1 <= u && u < v && v <= n) {
                return param(format!("edge ({u},{v}) must satisfy 1 <= u < v <= {n}"));
            }
        }
        if !multigraph {
            let mut seen = std::collections::HashSet::new();
            for e in &edges {
                if !seen.insert(*e) {
                    return param(format!("repeated edge {e:?} in a simple graph"));
                }
            }
        }
        Ok(Graph { n, edges, multigraph })
    }

    pub fn family(family: Family, params: &[usize]) -> Result<Self> {
        let need = |count: usize| {
            if params.len() == count {
                Ok(())
            } else {
                param(format!("{family:?} takes {count} parameter(s), got {}", params.len()))
            }
        };
        match family {
            Family::Complete => {
                need(1)?;
                Self::complete(params[0])
            }
            Family::CompleteBipartite => {
                need(2)?;
                Self::complete_bipartite(params[0], params[1])
            }
            Family::Star => {
                need(1)?;
                Self::star(params[0])
            }
            Family::Cycle => {
                need(1)?;
                Self::cycle(params[0])
            }
            Family::Path => {
                need(1)?;
                Self::path(params[0])
            }
        }
    }

    /// `K_n` with edges in lexicographic order.
    pub fn complete(n: usize) -> Result<Self> {
        if n < 2 {
            return param("complete graph needs n >= 2");
        }
        let edges = (1..=n).flat_map(|u| (u + 1..=n).map(move |v| (u, v))).collect();
        Graph::new(n, edges, false)
    }

    /// `K_{m,n}` with parts `{1..m}` and `{m+1..m+n}`.
    pub fn complete_bipartite(m: usize, n: usize) -> Result<Self> {
        if m == 0 || n == 0 {
            return param("complete bipartite graph needs both parts non-empty");
        }
        let edges = (1..=m).flat_map(|u| (m + 1..=m + n).map(move |v| (u, v))).collect();
        Graph::new(m + n, edges, false)
    }

    /// Center `1` joined to leaves `2..=leaves+1`.
    pub fn star(leaves: usize) -> Result<Self> {
        if leaves == 0 {
            return param("star needs at least one leaf");
        }
        Graph::new(leaves + 1, (2..=leaves + 1).map(|v| (1, v)).collect(), false)
    }

    pub fn cycle(n: usize) -> Result<Self> {
        if n < 3 {
            return param("cycle needs n >= 3");
        }
        let mut edges: Vec<_> = (1..n).map(|u| (u, u + 1)).collect();
        edges.push((1, n));
        Graph::new(n, edges, false)
    }

    pub fn path(n: usize) -> Result<Self> {
        if n < 2 {
            return param("path needs n >= 2");
        }
        Graph::new(n, (1..n).map(|u| (u, u + 1)).collect(), false)
    }

    /// Triangle on `1, 2, 3` with a pendant vertex `4` at `1`; files
    /// `(1,2), (1,3), (2,3), (1,4)`.
    pub fn paw() -> Self {
        Graph::new(4, vec![(1, 2), (1, 3), (2, 3), (1, 4)], false).expect("valid graph")
    }

    /// Replaces every edge by `r` consecutive parallel copies.
    pub fn multigraph_extension(&self, r: usize) -> Result<Self> {
        if r == 0 {
            return param("multiplicity r must be positive");
        }
        if self.multigraph {
            return param("multigraph extension expects a simple graph");
        }
        let edges = self.edges.iter().flat_map(|&e| std::iter::repeat_n(e, r)).collect();
        Graph::new(self.n, edges, r > 1)
    }

    /// Renumbers `K_{m,m}` so that the first part sits on odd vertices and the
    /// second on even ones.
    pub fn interleave_bipartite(&self, m: usize) -> Result<Self> {
        if self.n != 2 * m {
            return param("interleaving needs two parts of equal size m");
        }
        let relabel = |v: usize| if v <= m { 2 * v - 1 } else { 2 * (v - m) };
        let edges = self
            .edges
            .iter()
            .map(|&(u, v)| {
                let (a, b) = (relabel(u), relabel(v));
                (a.min(b), a.max(b))
            })
            .collect();
        Graph::new(self.n, edges, self.multigraph)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn file_count(&self) -> usize {
        self.edges.len()
    }

    pub fn is_multigraph(&self) -> bool {
        self.multigraph
    }

    pub fn endpoints(&self, f: FileId) -> (usize, usize) {
        self.edges[f]
    }

    pub fn stores(&self, server: usize, f: FileId) -> bool {
        let (u, v) = self.edges[f];
        u == server || v == server
    }

    /// Files stored at `server`, in FileId order.
    pub fn incident(&self, server: usize) -> Vec<FileId> {
        (0..self.edges.len()).filter(|&f| self.stores(server, f)).collect()
    }

    pub fn degree(&self, v: usize) -> Result<usize> {
        if v == 0 || v > self.n {
            return param(format!("vertex {v} outside 1..={}", self.n));
        }
        Ok(self.incident(v).len())
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut d = vec![0; self.n];
        for &(u, v) in &self.edges {
            d[u - 1] += 1;
            d[v - 1] += 1;
        }
        d
    }

    pub fn max_degree(&self) -> usize {
        self.degrees().into_iter().max().unwrap_or(0)
    }

    /// FileIds of all edges joining `u` and `v`, ascending.
    pub fn files_between(&self, u: usize, v: usize) -> Vec<FileId> {
        let key = (u.min(v), u.max(v));
        (0..self.edges.len()).filter(|&f| self.edges[f] == key).collect()
    }

    /// Maximum matching size by exhaustive search over vertex subsets.
    pub fn matching_number(&self) -> Result<usize> {
        if self.edges.len() > MATCHING_EDGE_CAP {
            return Err(Error::UnsupportedSize(format!(
                "matching search is exact only up to {MATCHING_EDGE_CAP} edges, got {}",
                self.edges.len()
            )));
        }
        // Vertices touching an edge, compacted so the state fits in a u128.
        let mut index = HashMap::new();
        for &(u, v) in &self.edges {
            for w in [u, v] {
                let next = index.len();
                index.entry(w).or_insert(next);
            }
        }
        let mut adj = vec![0u128; index.len()];
        for &(u, v) in &self.edges {
            let (a, b) = (index[&u], index[&v]);
            adj[a] |= 1 << b;
            adj[b] |= 1 << a;
        }
        let full = if index.len() == 128 { u128::MAX } else { (1u128 << index.len()) - 1 };
        let mut memo = HashMap::new();
        Ok(best_matching(full, &adj, &mut memo))
    }
}

fn best_matching(free: u128, adj: &[u128], memo: &mut HashMap<u128, usize>) -> usize {
    if free == 0 {
        return 0;
    }
    if let Some(&m) = memo.get(&free) {
        return m;
    }
    let v = free.trailing_zeros() as usize;
    let rest = free & !(1 << v);
    let mut best = best_matching(rest, adj, memo);
    // Upper bound: every matched edge consumes two free vertices.
    let cap = free.count_ones() as usize / 2;
    let mut partners = adj[v] & rest;
    while partners != 0 && best < cap {
        let u = partners.trailing_zeros() as usize;
        partners &= !(1 << u);
        best = best.max(1 + best_matching(rest & !(1 << u), adj, memo));
    }
    memo.insert(free, best);
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn families() {
        let k4 = Graph::family(Family::Complete, &[4]).unwrap();
        assert_eq!((k4.n(), k4.file_count()), (4, 6));
        let b = Graph::family(Family::CompleteBipartite, &[2, 2]).unwrap();
        assert_eq!(b.file_count(), 4);
        assert!(b.degrees().iter().all(|&d| d == 2));
        let s = Graph::family(Family::Star, &[4]).unwrap();
        assert_eq!((s.n(), s.degree(1).unwrap()), (5, 4));
        assert!(Graph::family(Family::Cycle, &[2]).is_err());
        assert!(Graph::family(Family::Path, &[1]).is_err());
        assert!(Graph::family(Family::Complete, &[1]).is_err());
        assert!(Graph::family(Family::Star, &[1, 2]).is_err());
    }

    #[test]
    fn validation() {
        assert!(Graph::new(3, vec![(2, 1)], false).is_err());
        assert!(Graph::new(3, vec![(1, 4)], false).is_err());
        assert!(Graph::new(3, vec![(1, 2), (1, 2)], false).is_err());
        assert!(Graph::new(3, vec![(1, 2), (1, 2)], true).is_ok());
    }

    #[test]
    fn extension() {
        let k3 = Graph::complete(3).unwrap();
        assert_eq!(k3.multigraph_extension(1).unwrap(), k3);
        let k3x2 = k3.multigraph_extension(2).unwrap();
        assert_eq!(k3x2.file_count(), 6);
        assert!(k3x2.degrees().iter().all(|&d| d == 4));
        let p = Graph::path(3).unwrap().multigraph_extension(3).unwrap();
        assert_eq!((p.file_count(), p.degrees()), (6, vec![3, 6, 3]));
        assert!(k3.multigraph_extension(0).is_err());
        assert!(k3x2.multigraph_extension(2).is_err());
        assert_eq!(k3x2.files_between(2, 1), vec![0, 1]);
    }

    #[test]
    fn matchings() {
        assert_eq!(Graph::complete(4).unwrap().matching_number().unwrap(), 2);
        assert_eq!(Graph::star(4).unwrap().matching_number().unwrap(), 1);
        assert_eq!(Graph::cycle(5).unwrap().matching_number().unwrap(), 2);
        assert_eq!(Graph::complete(11).unwrap().matching_number().unwrap(), 5);
        assert!(matches!(Graph::complete(13).unwrap().matching_number(), Err(Error::UnsupportedSize(_))));
    }

    #[test]
    fn interleaving() {
        let g = Graph::complete_bipartite(2, 2).unwrap().interleave_bipartite(2).unwrap();
        assert_eq!(g.edges(), &[(1, 2), (1, 4), (2, 3), (3, 4)]);
    }

    #[test]
    fn json_keeps_order() {
        let g = Graph::cycle(5).unwrap();
        let s = serde_json::to_string(&g).unwrap();
        assert!(s.starts_with(r#"{"n":5,"multigraph":false,"edges":[[1,2]"#));
        let back: Graph = serde_json::from_str(&s).unwrap();
        assert_eq!(back, g);
        assert!(serde_json::from_str::<Graph>(r#"{"n":2,"multigraph":false,"edges":[[2,1]]}"#).is_err());
    }
}
