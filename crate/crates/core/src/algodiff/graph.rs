//! Export of reverse-mode computation graphs as Graphviz DOT.

use std::collections::HashSet;
use std::fmt::Write as _;

use super::AdValue;

#[derive(Debug, Clone, PartialEq)]
pub struct GraphNode {
    pub id: u64,
    pub op: &'static str,
    pub shape: Vec<usize>,
}

/// The reverse nodes reachable from an output, with data-flow edges
/// `(parent id, child id)`.
#[derive(Debug, Clone, Default)]
pub struct AdGraph {
    pub nodes: Vec<GraphNode>,
    pub edges: Vec<(u64, u64)>,
}

impl AdGraph {
    pub fn from_output(out: &AdValue) -> AdGraph {
        let mut g = AdGraph::default();
        let mut seen = HashSet::new();
        let mut stack = vec![out.clone()];
        while let Some(v) = stack.pop() {
            let AdValue::Reverse(n) = &v else { continue };
            if !seen.insert(n.id) {
                continue;
            }
            g.nodes.push(GraphNode {
                id: n.id,
                op: n.op_name(),
                shape: n.primal.shape(),
            });
            for p in n.parents() {
                if let Some(pid) = p.node_id() {
                    g.edges.push((pid, n.id));
                }
                stack.push(p.clone());
            }
        }
        g.nodes.sort_by_key(|n| n.id);
        g.edges.sort_unstable();
        g
    }

    pub fn ops(&self) -> HashSet<&'static str> {
        self.nodes.iter().map(|n| n.op).collect()
    }

    pub fn to_dot(&self) -> String {
        let mut s = String::from("digraph algodiff {\n  node [shape=box];\n");
        for n in &self.nodes {
            let shape = if n.shape.is_empty() {
                "scalar".to_string()
            } else {
                format!("{:?}", n.shape)
            };
            let _ = writeln!(
                s,
                "  n{} [label=\"#{} {}\\nf64 {}\"];",
                n.id, n.id, n.op, shape
            );
        }
        for (a, b) in &self.edges {
            let _ = writeln!(s, "  n{a} -> n{b};");
        }
        s.push_str("}\n");
        s
    }
}
