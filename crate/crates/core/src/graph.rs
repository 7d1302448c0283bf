//! Directed acyclic graph over named variables: validation, traversal and
//! DOT export for the causal skeleton.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GraphError {
    #[error("edge list is empty")]
    EmptyEdgeList,
    #[error("node name is empty")]
    EmptyNodeName,
    #[error("self-loop on node {0:?}")]
    SelfLoop(String),
    #[error("duplicate edge {0:?} -> {1:?}")]
    DuplicateEdge(String, String),
    #[error("directed cycle: {}", .0.join(" -> "))]
    CycleDetected(Vec<String>),
    #[error("unknown node {0:?}")]
    UnknownNode(String),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

/// Immutable DAG. Parent and child lists are kept sorted so every
/// traversal is deterministic.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Dag {
    nodes: Vec<String>,
    parents: BTreeMap<String, Vec<String>>,
    children: BTreeMap<String, Vec<String>>,
}

/// JSON edge-list file: `{"edges": [["PRICEEACH","SALES"], ...]}`.
#[derive(Debug, Serialize, Deserialize)]
pub struct EdgeListFile {
    pub edges: Vec<(String, String)>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub nodes: Vec<String>,
}

impl Dag {
    /// Validates and builds a DAG from directed `(parent, child)` edges.
    pub fn from_edges<S: AsRef<str>>(edges: &[(S, S)]) -> Result<Self, GraphError> {
        Self::from_parts(edges, &[] as &[&str])
    }

    /// Like [`Dag::from_edges`] with additional isolated nodes.
    pub fn from_parts<S: AsRef<str>, T: AsRef<str>>(
        edges: &[(S, S)],
        isolated: &[T],
    ) -> Result<Self, GraphError> {
        if edges.is_empty() && isolated.is_empty() {
            return Err(GraphError::EmptyEdgeList);
        }
        let mut nodes: BTreeSet<String> = BTreeSet::new();
        let mut seen: BTreeSet<(String, String)> = BTreeSet::new();
        let mut parents: BTreeMap<String, Vec<String>> = BTreeMap::new();
        let mut children: BTreeMap<String, Vec<String>> = BTreeMap::new();

        for (a, b) in edges {
            let (a, b) = (a.as_ref(), b.as_ref());
            if a.is_empty() || b.is_empty() {
                return Err(GraphError::EmptyNodeName);
            }
            if a == b {
                return Err(GraphError::SelfLoop(a.to_string()));
            }
            if !seen.insert((a.to_string(), b.to_string())) {
                return Err(GraphError::DuplicateEdge(a.to_string(), b.to_string()));
            }
            nodes.insert(a.to_string());
            nodes.insert(b.to_string());
            parents.entry(b.to_string()).or_default().push(a.to_string());
            children.entry(a.to_string()).or_default().push(b.to_string());
        }
        for n in isolated {
            let n = n.as_ref();
            if n.is_empty() {
                return Err(GraphError::EmptyNodeName);
            }
            nodes.insert(n.to_string());
        }
        for n in &nodes {
            parents.entry(n.clone()).or_default().sort();
            children.entry(n.clone()).or_default().sort();
        }

        let dag = Dag {
            nodes: nodes.into_iter().collect(),
            parents,
            children,
        };
        if let Some(cycle) = dag.find_cycle() {
            return Err(GraphError::CycleDetected(cycle));
        }
        Ok(dag)
    }

    /// Node names in lexicographic order.
    pub fn nodes(&self) -> &[String] {
        &self.nodes
    }

    pub fn contains(&self, node: &str) -> bool {
        self.parents.contains_key(node)
    }

    pub fn edges(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        for (p, cs) in &self.children {
            for c in cs {
                out.push((p.clone(), c.clone()));
            }
        }
        out
    }

    pub fn edge_count(&self) -> usize {
        self.children.values().map(|v| v.len()).sum()
    }

    /// Parents of `node` in lexicographic order.
    pub fn parents(&self, node: &str) -> Result<&[String], GraphError> {
        self.parents
            .get(node)
            .map(|v| v.as_slice())
            .ok_or_else(|| GraphError::UnknownNode(node.to_string()))
    }

    pub fn children(&self, node: &str) -> Result<&[String], GraphError> {
        self.children
            .get(node)
            .map(|v| v.as_slice())
            .ok_or_else(|| GraphError::UnknownNode(node.to_string()))
    }

    pub fn is_root(&self, node: &str) -> Result<bool, GraphError> {
        Ok(self.parents(node)?.is_empty())
    }

    /// Every parent precedes each of its children; ties broken
    /// lexicographically (Kahn's algorithm over a sorted frontier).
    pub fn topological_order(&self) -> Vec<String> {
        let mut indeg: BTreeMap<&str, usize> = self
            .nodes
            .iter()
            .map(|n| (n.as_str(), self.parents[n].len()))
            .collect();
        let mut ready: BTreeSet<&str> = indeg
            .iter()
            .filter(|(_, d)| **d == 0)
            .map(|(n, _)| *n)
            .collect();
        let mut order = Vec::with_capacity(self.nodes.len());
        while let Some(&n) = ready.iter().next() {
            ready.remove(n);
            order.push(n.to_string());
            for c in &self.children[n] {
                let d = indeg.get_mut(c.as_str()).unwrap();
                *d -= 1;
                if *d == 0 {
                    ready.insert(c);
                }
            }
        }
        debug_assert_eq!(order.len(), self.nodes.len());
        order
    }

    /// All strict ancestors of `node`, lexicographically sorted.
    pub fn ancestors(&self, node: &str) -> Result<Vec<String>, GraphError> {
        let mut seen: BTreeSet<String> = BTreeSet::new();
        let mut stack: Vec<&str> = self.parents(node)?.iter().map(|s| s.as_str()).collect();
        while let Some(u) = stack.pop() {
            if seen.insert(u.to_string()) {
                stack.extend(self.parents[u].iter().map(|s| s.as_str()));
            }
        }
        Ok(seen.into_iter().collect())
    }

    fn find_cycle(&self) -> Option<Vec<String>> {
        // Iterative DFS with colors; reconstructs one cycle for the error.
        #[derive(Clone, Copy, PartialEq)]
        enum Color {
            White,
            Gray,
            Black,
        }
        let mut color: BTreeMap<&str, Color> =
            self.nodes.iter().map(|n| (n.as_str(), Color::White)).collect();
        let mut pred: BTreeMap<&str, &str> = BTreeMap::new();

        for start in &self.nodes {
            if color[start.as_str()] != Color::White {
                continue;
            }
            let mut stack: Vec<(&str, usize)> = vec![(start.as_str(), 0)];
            *color.get_mut(start.as_str()).unwrap() = Color::Gray;
            while let Some(&(u, i)) = stack.last() {
                let cs = &self.children[u];
                if i < cs.len() {
                    stack.last_mut().unwrap().1 += 1;
                    let v = cs[i].as_str();
                    match color[v] {
                        Color::White => {
                            pred.insert(v, u);
                            *color.get_mut(v).unwrap() = Color::Gray;
                            stack.push((v, 0));
                        }
                        Color::Gray => {
                            // Found a cycle v -> ... -> u -> v.
                            let mut cyc = vec![v.to_string()];
                            let mut cur = u;
                            while cur != v {
                                cyc.push(cur.to_string());
                                cur = pred[cur];
                            }
                            cyc.push(v.to_string());
                            cyc.reverse();
                            return Some(cyc);
                        }
                        Color::Black => {}
                    }
                } else {
                    *color.get_mut(u).unwrap() = Color::Black;
                    stack.pop();
                }
            }
        }
        None
    }

    /// DOT digraph text; nodes and edges sorted lexicographically.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph {\n");
        for n in &self.nodes {
            out.push_str(&format!("  {n};\n"));
        }
        for (p, c) in self.edges() {
            out.push_str(&format!("  {p} -> {c};\n"));
        }
        out.push_str("}\n");
        out
    }

    pub fn to_edge_list_json(&self) -> String {
        let file = EdgeListFile {
            edges: self.edges(),
            nodes: self
                .nodes
                .iter()
                .filter(|n| self.parents[*n].is_empty() && self.children[*n].is_empty())
                .cloned()
                .collect(),
        };
        serde_json::to_string_pretty(&file).expect("edge list serializes")
    }

    pub fn from_edge_list_json(text: &str) -> Result<Self, GraphError> {
        let file: EdgeListFile = serde_json::from_str(text)?;
        Self::from_parts(&file.edges, &file.nodes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datagen::canonical_dag;
    use proptest::prelude::*;

    #[test]
    fn chain_builds_with_topo_order() {
        let dag = Dag::from_edges(&[("A", "B"), ("B", "C")]).unwrap();
        assert_eq!(dag.nodes(), &["A", "B", "C"]);
        assert_eq!(dag.topological_order(), vec!["A", "B", "C"]);
        assert_eq!(dag.parents("C").unwrap(), &["B"]);
        assert_eq!(dag.parents("A").unwrap(), &[] as &[&str]);
    }

    #[test]
    fn two_cycle_rejected() {
        let err = Dag::from_edges(&[("A", "B"), ("B", "A")]).unwrap_err();
        match err {
            GraphError::CycleDetected(cyc) => {
                assert_eq!(cyc.first(), cyc.last());
                assert!(cyc.len() >= 3);
            }
            other => panic!("expected cycle, got {other:?}"),
        }
    }

    #[test]
    fn self_loop_and_duplicate_rejected() {
        assert!(matches!(
            Dag::from_edges(&[("A", "A")]),
            Err(GraphError::SelfLoop(_))
        ));
        assert!(matches!(
            Dag::from_edges(&[("A", "B"), ("A", "B")]),
            Err(GraphError::DuplicateEdge(_, _))
        ));
    }

    #[test]
    fn diamond_topo_breaks_ties_lexicographically() {
        let dag = Dag::from_edges(&[("A", "B"), ("A", "C"), ("B", "D"), ("C", "D")]).unwrap();
        assert_eq!(dag.topological_order(), vec!["A", "B", "C", "D"]);
    }

    #[test]
    fn retail_dag_parents() {
        let dag = canonical_dag();
        assert_eq!(
            dag.parents("PROFIT_MARGIN").unwrap(),
            &["NET_SALES", "PROFIT"]
        );
        assert_eq!(
            dag.parents("PROFIT").unwrap(),
            &[
                "COST_OF_GOODS_SOLD",
                "FULFILLMENT_COST",
                "MARKETING_COST",
                "NET_SALES",
                "RETURN_COST",
                "SHIPPING_REVENUE",
            ]
        );
    }

    #[test]
    fn retail_dag_edge_count_matches_definition() {
        // Count derived from the canonical edge enumeration in datagen.
        let dag = canonical_dag();
        assert_eq!(dag.edge_count(), 15);
        let dot = dag.to_dot();
        assert_eq!(dot.matches(" -> ").count(), 15);
    }

    #[test]
    fn dot_shape_for_isolated_node_and_chain() {
        let single = Dag::from_parts(&[] as &[(&str, &str)], &["A"]).unwrap();
        assert_eq!(single.to_dot(), "digraph {\n  A;\n}\n");
        let chain = Dag::from_edges(&[("A", "B"), ("B", "C")]).unwrap();
        let dot = chain.to_dot();
        let edge_lines: Vec<&str> = dot.lines().filter(|l| l.contains("->")).collect();
        assert_eq!(edge_lines, vec!["  A -> B;", "  B -> C;"]);
    }

    #[test]
    fn edge_list_json_round_trip() {
        let dag = canonical_dag();
        let json = dag.to_edge_list_json();
        let back = Dag::from_edge_list_json(&json).unwrap();
        assert_eq!(dag, back);
    }

    /// Parse edge pairs back out of DOT text (test-only mini parser).
    fn parse_dot_edges(dot: &str) -> Vec<(String, String)> {
        dot.lines()
            .filter_map(|l| {
                let l = l.trim().trim_end_matches(';');
                let (a, b) = l.split_once("->")?;
                Some((a.trim().to_string(), b.trim().to_string()))
            })
            .collect()
    }

    fn arbitrary_dag(max_nodes: usize) -> impl Strategy<Value = Dag> {
        (2..=max_nodes)
            .prop_flat_map(|n| {
                let pairs: Vec<(usize, usize)> = (0..n)
                    .flat_map(|i| ((i + 1)..n).map(move |j| (i, j)))
                    .collect();
                proptest::collection::vec(proptest::bool::ANY, pairs.len())
                    .prop_map(move |mask| (n, pairs.clone(), mask))
            })
            .prop_filter_map("needs at least one edge", |(_, pairs, mask)| {
                let names: Vec<String> = (0..26).map(|i| format!("N{i:02}")).collect();
                let edges: Vec<(String, String)> = pairs
                    .iter()
                    .zip(mask.iter())
                    .filter(|(_, keep)| **keep)
                    .map(|((i, j), _)| (names[*i].clone(), names[*j].clone()))
                    .collect();
                if edges.is_empty() {
                    None
                } else {
                    Some(Dag::from_edges(&edges).unwrap())
                }
            })
    }

    proptest! {
        #[test]
        fn topo_order_is_permutation_respecting_edges(dag in arbitrary_dag(8)) {
            let order = dag.topological_order();
            let mut sorted = order.clone();
            sorted.sort();
            prop_assert_eq!(&sorted, &dag.nodes().to_vec());
            let pos: BTreeMap<&str, usize> =
                order.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
            for (p, c) in dag.edges() {
                prop_assert!(pos[p.as_str()] < pos[c.as_str()]);
            }
        }

        #[test]
        fn no_node_is_its_own_ancestor(dag in arbitrary_dag(12)) {
            for n in dag.nodes() {
                prop_assert!(!dag.ancestors(n).unwrap().contains(n));
            }
        }

        #[test]
        fn dot_round_trips_edge_set(dag in arbitrary_dag(8)) {
            let mut parsed = parse_dot_edges(&dag.to_dot());
            parsed.sort();
            let mut edges = dag.edges();
            edges.sort();
            prop_assert_eq!(parsed, edges);
        }
    }
}
