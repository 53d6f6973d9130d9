use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A category tree (possibly cyclic) rooted at `root`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CategoryGraph {
    pub root: String,
    #[serde(default)]
    pub edges: BTreeMap<String, Vec<String>>,
}

impl CategoryGraph {
    pub fn new(root: impl Into<String>, edges: BTreeMap<String, Vec<String>>) -> Result<Self> {
        let g = CategoryGraph {
            root: root.into(),
            edges,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let g: CategoryGraph = serde_json::from_str(&text)?;
        g.validate()?;
        Ok(g)
    }

    /// Every category named in the graph, as a parent or a child.
    pub fn nodes(&self) -> BTreeSet<&str> {
        let mut nodes = BTreeSet::new();
        for (k, children) in &self.edges {
            nodes.insert(k.as_str());
            nodes.extend(children.iter().map(String::as_str));
        }
        nodes
    }

    fn validate(&self) -> Result<()> {
        if !self.nodes().contains(self.root.as_str()) {
            return Err(Error::invalid(format!(
                "root category {:?} is not in the graph",
                self.root
            )));
        }
        Ok(())
    }

    pub fn children(&self, node: &str) -> &[String] {
        self.edges.get(node).map(Vec::as_slice).unwrap_or(&[])
    }
}

/// Breadth-first expansion from the root. A node's children are explored
/// only when `predicate` accepts the node; the accepted nodes are returned.
pub fn expand_categories<F>(graph: &CategoryGraph, mut predicate: F) -> Result<BTreeSet<String>>
where
    F: FnMut(&str) -> bool,
{
    graph.validate()?;
    let mut accepted = BTreeSet::new();
    let mut visited: HashSet<&str> = HashSet::new();
    let mut queue = VecDeque::new();
    visited.insert(graph.root.as_str());
    queue.push_back(graph.root.as_str());
    while let Some(node) = queue.pop_front() {
        if !predicate(node) {
            continue;
        }
        accepted.insert(node.to_string());
        for child in graph.children(node) {
            if visited.insert(child.as_str()) {
                queue.push_back(child.as_str());
            }
        }
    }
    Ok(accepted)
}
