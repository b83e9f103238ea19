//! Network topology, simple-path enumeration, and the path-resource
//! incidence matrix consumed by the pricer.
//!
//! Resources are routers (nodes), and a path consumes one share of every
//! node on it, endpoints included. Entries of the incidence matrix are
//! real-valued amounts; enumeration emits 1.0 but hand-authored matrices
//! may carry fractional shares.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("duplicate node `{0}`")]
    DuplicateNode(String),
    #[error("self-loop on node `{0}`")]
    SelfLoop(String),
    #[error("invalid query: {0}")]
    InvalidQuery(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

/// An undirected graph of named routers.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Topology {
    nodes: Vec<String>,
    links: Vec<(usize, usize)>,
}

impl Topology {
    pub fn new(nodes: Vec<String>, links: &[(String, String)]) -> Result<Self, NetworkError> {
        for (i, name) in nodes.iter().enumerate() {
            if nodes[..i].contains(name) {
                return Err(NetworkError::DuplicateNode(name.clone()));
            }
        }
        let index = |name: &String| {
            nodes
                .iter()
                .position(|n| n == name)
                .ok_or_else(|| NetworkError::UnknownNode(name.clone()))
        };
        let mut resolved = Vec::with_capacity(links.len());
        for (a, b) in links {
            let (ia, ib) = (index(a)?, index(b)?);
            if ia == ib {
                return Err(NetworkError::SelfLoop(a.clone()));
            }
            resolved.push((ia, ib));
        }
        Ok(Self { nodes, links: resolved })
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn node_names(&self) -> &[String] {
        &self.nodes
    }

    pub fn node_index(&self, name: &str) -> Option<usize> {
        self.nodes.iter().position(|n| n == name)
    }

    fn neighbors(&self, i: usize) -> Vec<usize> {
        let mut out: Vec<usize> = self
            .links
            .iter()
            .filter_map(|&(a, b)| {
                if a == i {
                    Some(b)
                } else if b == i {
                    Some(a)
                } else {
                    None
                }
            })
            .collect();
        out.sort_unstable();
        out.dedup();
        out
    }
}

/// Path query between two routers with a hop (edge) budget.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RouteQuery {
    pub src: String,
    pub dst: String,
    #[serde(default = "default_max_hops")]
    pub max_hops: usize,
}

pub fn default_max_hops() -> usize {
    8
}

/// M x N matrix of share amounts: v[i][m] is the amount of resource m
/// consumed by candidate path i.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IncidenceMatrix {
    pub v: Vec<Vec<f64>>,
    pub path_labels: Vec<Vec<String>>,
}

impl IncidenceMatrix {
    pub fn from_rows(v: Vec<Vec<f64>>, path_labels: Vec<Vec<String>>) -> Result<Self, NetworkError> {
        let n = v.first().map(|r| r.len()).unwrap_or(0);
        for (i, row) in v.iter().enumerate() {
            if row.len() != n {
                return Err(NetworkError::DimensionMismatch(format!(
                    "row {i} has {} entries, expected {n}",
                    row.len()
                )));
            }
            if row.iter().any(|&x| x < 0.0) {
                return Err(NetworkError::DimensionMismatch(format!(
                    "row {i} has a negative share amount"
                )));
            }
            if !row.iter().any(|&x| x > 0.0) {
                return Err(NetworkError::DimensionMismatch(format!(
                    "row {i} has no positive entry"
                )));
            }
        }
        if path_labels.len() != v.len() {
            return Err(NetworkError::DimensionMismatch(format!(
                "{} labels for {} rows",
                path_labels.len(),
                v.len()
            )));
        }
        Ok(Self { v, path_labels })
    }

    /// Path count M.
    pub fn paths(&self) -> usize {
        self.v.len()
    }

    /// Resource count N.
    pub fn resources(&self) -> usize {
        self.v.first().map(|r| r.len()).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.v.is_empty()
    }
}

/// Enumerates all simple paths from src to dst with at most `max_hops`
/// edges. Each path contributes a row with amount 1 for every node on
/// the path, endpoints included. Rows are sorted by (length,
/// lexicographic node sequence). A disconnected query yields M = 0;
/// src = dst yields the single one-node path.
pub fn enumerate_paths(t: &Topology, q: &RouteQuery) -> Result<IncidenceMatrix, NetworkError> {
    let src = t
        .node_index(&q.src)
        .ok_or_else(|| NetworkError::UnknownNode(q.src.clone()))?;
    let dst = t
        .node_index(&q.dst)
        .ok_or_else(|| NetworkError::UnknownNode(q.dst.clone()))?;
    if q.max_hops < 1 {
        return Err(NetworkError::InvalidQuery("max_hops must be >= 1".into()));
    }

    let mut found: Vec<Vec<usize>> = Vec::new();
    if src == dst {
        found.push(vec![src]);
    } else {
        let mut stack = vec![src];
        let mut on_path = vec![false; t.node_count()];
        on_path[src] = true;
        dfs(t, dst, q.max_hops, &mut stack, &mut on_path, &mut found);
    }

    found.sort_by(|a, b| {
        a.len().cmp(&b.len()).then_with(|| {
            let na: Vec<&String> = a.iter().map(|&i| &t.nodes[i]).collect();
            let nb: Vec<&String> = b.iter().map(|&i| &t.nodes[i]).collect();
            na.cmp(&nb)
        })
    });

    let n = t.node_count();
    let mut v = Vec::with_capacity(found.len());
    let mut labels = Vec::with_capacity(found.len());
    for path in &found {
        let mut row = vec![0.0; n];
        for &i in path {
            row[i] = 1.0;
        }
        v.push(row);
        labels.push(path.iter().map(|&i| t.nodes[i].clone()).collect());
    }
    Ok(IncidenceMatrix { v, path_labels: labels })
}

fn dfs(
    t: &Topology,
    dst: usize,
    max_hops: usize,
    stack: &mut Vec<usize>,
    on_path: &mut [bool],
    found: &mut Vec<Vec<usize>>,
) {
    let current = *stack.last().unwrap();
    if stack.len() > max_hops {
        return;
    }
    for next in t.neighbors(current) {
        if next == dst {
            let mut path = stack.clone();
            path.push(dst);
            found.push(path);
            continue;
        }
        if on_path[next] {
            continue;
        }
        stack.push(next);
        on_path[next] = true;
        dfs(t, dst, max_hops, stack, on_path, found);
        on_path[next] = false;
        stack.pop();
    }
}

/// C_i = sum_m v[i][m] * prices[m].
pub fn path_costs(v: &IncidenceMatrix, prices: &[f64]) -> Result<Vec<f64>, NetworkError> {
    if prices.len() != v.resources() {
        return Err(NetworkError::DimensionMismatch(format!(
            "{} prices for {} resources",
            prices.len(),
            v.resources()
        )));
    }
    Ok(v.v
        .iter()
        .map(|row| row.iter().zip(prices).map(|(a, p)| a * p).sum())
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn diamond() -> Topology {
        Topology::new(
            vec!["A".into(), "B".into(), "C".into(), "D".into()],
            &[
                ("B".into(), "A".into()),
                ("A".into(), "C".into()),
                ("B".into(), "D".into()),
                ("D".into(), "C".into()),
            ],
        )
        .unwrap()
    }

    #[test]
    fn diamond_two_paths() {
        let q = RouteQuery { src: "B".into(), dst: "C".into(), max_hops: 8 };
        let m = enumerate_paths(&diamond(), &q).unwrap();
        assert_eq!(m.paths(), 2);
        assert_eq!(m.path_labels[0], vec!["B", "A", "C"]);
        assert_eq!(m.path_labels[1], vec!["B", "D", "C"]);
        // node order is A, B, C, D
        assert_eq!(m.v[0], vec![1.0, 1.0, 1.0, 0.0]);
        assert_eq!(m.v[1], vec![0.0, 1.0, 1.0, 1.0]);
    }

    #[test]
    fn src_equals_dst() {
        let q = RouteQuery { src: "A".into(), dst: "A".into(), max_hops: 8 };
        let m = enumerate_paths(&diamond(), &q).unwrap();
        assert_eq!(m.paths(), 1);
        assert_eq!(m.path_labels[0], vec!["A"]);
        assert_eq!(m.v[0], vec![1.0, 0.0, 0.0, 0.0]);
    }

    #[test]
    fn disconnected_yields_no_path() {
        let t = Topology::new(vec!["A".into(), "B".into()], &[]).unwrap();
        let q = RouteQuery { src: "A".into(), dst: "B".into(), max_hops: 8 };
        let m = enumerate_paths(&t, &q).unwrap();
        assert!(m.is_empty());
    }

    #[test]
    fn max_hops_limits_length() {
        // line A - B - C: the only path A->C has 2 hops
        let t = Topology::new(
            vec!["A".into(), "B".into(), "C".into()],
            &[("A".into(), "B".into()), ("B".into(), "C".into())],
        )
        .unwrap();
        let q = RouteQuery { src: "A".into(), dst: "C".into(), max_hops: 1 };
        assert!(enumerate_paths(&t, &q).unwrap().is_empty());
        let q = RouteQuery { src: "A".into(), dst: "C".into(), max_hops: 2 };
        assert_eq!(enumerate_paths(&t, &q).unwrap().paths(), 1);
    }

    #[test]
    fn rejects_self_loop_and_unknown_nodes() {
        assert!(Topology::new(vec!["A".into()], &[("A".into(), "A".into())]).is_err());
        assert!(Topology::new(vec!["A".into()], &[("A".into(), "B".into())]).is_err());
        assert!(Topology::new(vec!["A".into(), "A".into()], &[]).is_err());
    }

    #[test]
    fn path_costs_hand_values() {
        let m = IncidenceMatrix::from_rows(
            vec![vec![1.0, 1.0, 0.0]],
            vec![vec!["a".into(), "b".into()]],
        )
        .unwrap();
        assert_eq!(path_costs(&m, &[2.0, 3.0, 5.0]).unwrap(), vec![5.0]);
        assert!(path_costs(&m, &[1.0]).is_err());
    }

    #[test]
    fn diamond_equal_prices_symmetric_costs() {
        let q = RouteQuery { src: "B".into(), dst: "C".into(), max_hops: 8 };
        let m = enumerate_paths(&diamond(), &q).unwrap();
        let c = path_costs(&m, &[2.0, 2.0, 2.0, 2.0]).unwrap();
        assert_eq!(c[0], c[1]);
    }

    proptest! {
        #[test]
        fn path_costs_is_linear(
            p in proptest::collection::vec(0.0..10.0f64, 3),
            q in proptest::collection::vec(0.0..10.0f64, 3),
            a in 0.0..5.0f64,
            b in 0.0..5.0f64,
        ) {
            let m = IncidenceMatrix::from_rows(
                vec![vec![1.0, 0.5, 2.0], vec![0.0, 1.0, 1.0]],
                vec![vec!["x".into()], vec!["y".into()]],
            ).unwrap();
            let combo: Vec<f64> = p.iter().zip(&q).map(|(x, y)| a * x + b * y).collect();
            let lhs = path_costs(&m, &combo).unwrap();
            let cp = path_costs(&m, &p).unwrap();
            let cq = path_costs(&m, &q).unwrap();
            for i in 0..lhs.len() {
                prop_assert!((lhs[i] - (a * cp[i] + b * cq[i])).abs() < 1e-9);
            }
        }
    }
}
