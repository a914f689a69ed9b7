//! Typed-graph data model: ingestion, validation and typed adjacency
//! used by all samplers.
//!
//! The graph is a directed multigraph. Nodes and edges carry small
//! integer type ids; parallel edges are kept as distinct adjacency
//! entries, so edge multiplicity acts as the sampling weight.

use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use crate::error::{Error, Result};

pub const DEFAULT_NODE_TYPE: &str = "untyped";

/// Dense node index, contiguous `0..|V|`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub u32);

impl NodeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Node type id, contiguous `0..|Γ|`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct NodeTypeId(pub u16);

/// Edge type id, contiguous `0..|Ω|`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EdgeTypeId(pub u16);

impl EdgeTypeId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// An ordered relation pattern, optionally constrained by node types.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MetaPathPattern {
    pub relations: Vec<EdgeTypeId>,
    pub node_types: Option<Vec<NodeTypeId>>,
}

impl MetaPathPattern {
    pub fn new(relations: Vec<EdgeTypeId>) -> Self {
        assert!(!relations.is_empty(), "pattern must have length >= 1");
        MetaPathPattern {
            relations,
            node_types: None,
        }
    }

    pub fn with_node_types(mut self, types: Vec<NodeTypeId>) -> Self {
        assert_eq!(types.len(), self.relations.len() + 1);
        self.node_types = Some(types);
        self
    }
}

/// Immutable typed directed multigraph.
///
/// Construction is single-threaded; once built the graph is read-only
/// and safe to share across worker threads.
#[derive(Debug, Clone)]
pub struct HinGraph {
    node_names: Vec<String>,
    name_to_id: HashMap<String, NodeId>,
    node_types: Vec<NodeTypeId>,
    node_type_names: Vec<String>,
    edge_type_names: Vec<String>,
    edge_type_by_name: HashMap<String, EdgeTypeId>,
    // insertion-ordered typed out-adjacency, one list per node
    adjacency: Vec<Vec<(EdgeTypeId, NodeId)>>,
    edge_count: usize,
}

impl HinGraph {
    pub fn node_count(&self) -> usize {
        self.node_names.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    pub fn edge_type_count(&self) -> usize {
        self.edge_type_names.len()
    }

    pub fn node_type_count(&self) -> usize {
        self.node_type_names.len()
    }

    pub fn node_name(&self, v: NodeId) -> &str {
        &self.node_names[v.index()]
    }

    pub fn node_names(&self) -> &[String] {
        &self.node_names
    }

    pub fn node_id(&self, name: &str) -> Option<NodeId> {
        self.name_to_id.get(name).copied()
    }

    pub fn node_type_of(&self, v: NodeId) -> NodeTypeId {
        self.node_types[v.index()]
    }

    pub fn node_type_name(&self, t: NodeTypeId) -> &str {
        &self.node_type_names[t.0 as usize]
    }

    pub fn edge_type_name(&self, e: EdgeTypeId) -> &str {
        &self.edge_type_names[e.index()]
    }

    pub fn edge_type_id(&self, name: &str) -> Option<EdgeTypeId> {
        self.edge_type_by_name.get(name).copied()
    }

    /// All edge types present, in first-appearance order.
    pub fn edge_types(&self) -> impl Iterator<Item = EdgeTypeId> + '_ {
        (0..self.edge_type_names.len()).map(|i| EdgeTypeId(i as u16))
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeId> + '_ {
        (0..self.node_count() as u32).map(NodeId)
    }

    fn check_node(&self, v: NodeId) -> Result<()> {
        if v.index() < self.node_count() {
            Ok(())
        } else {
            Err(Error::InvalidNodeId(v.0, self.node_count()))
        }
    }

    fn check_edge_type(&self, e: EdgeTypeId) -> Result<()> {
        if e.index() < self.edge_type_count() {
            Ok(())
        } else {
            Err(Error::InvalidEdgeTypeId(e.0, self.edge_type_count()))
        }
    }

    /// Typed out-edges of `v`, filtered by `e` when given. Order is the
    /// edge-file insertion order, so results are deterministic.
    pub fn out_neighbors(
        &self,
        v: NodeId,
        e: Option<EdgeTypeId>,
    ) -> Result<Vec<(EdgeTypeId, NodeId)>> {
        self.check_node(v)?;
        if let Some(e) = e {
            self.check_edge_type(e)?;
        }
        let list = &self.adjacency[v.index()];
        Ok(match e {
            None => list.clone(),
            Some(e) => list.iter().copied().filter(|(t, _)| *t == e).collect(),
        })
    }

    /// Borrowing variant used on sampling hot paths (all edge types).
    pub fn out_edges(&self, v: NodeId) -> &[(EdgeTypeId, NodeId)] {
        &self.adjacency[v.index()]
    }

    pub fn out_degree(&self, v: NodeId) -> usize {
        self.adjacency[v.index()].len()
    }

    /// True iff the graph has at least two node types among its nodes or
    /// at least two edge types among its edges.
    pub fn validate_heterogeneous(&self) -> bool {
        let mut node_types_seen = std::collections::HashSet::new();
        for t in &self.node_types {
            node_types_seen.insert(*t);
            if node_types_seen.len() >= 2 {
                return true;
            }
        }
        let mut edge_types_seen = std::collections::HashSet::new();
        for list in &self.adjacency {
            for (t, _) in list {
                edge_types_seen.insert(*t);
                if edge_types_seen.len() >= 2 {
                    return true;
                }
            }
        }
        false
    }

    /// Flat edge list in insertion order (src-major).
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, EdgeTypeId, NodeId)> + '_ {
        self.adjacency.iter().enumerate().flat_map(|(src, list)| {
            list.iter()
                .map(move |(t, dst)| (NodeId(src as u32), *t, *dst))
        })
    }

    /// Writes the graph back in the edge-file format. Reloading the
    /// result reproduces |V|, |E| and adjacency.
    pub fn export_edges<W: Write>(&self, out: &mut W) -> Result<()> {
        for (src, e, dst) in self.edges() {
            writeln!(
                out,
                "{}\t{}\t{}",
                self.node_name(src),
                self.edge_type_name(e),
                self.node_name(dst)
            )?;
        }
        Ok(())
    }
}

/// Incrementally builds a graph; ids are assigned by first appearance.
#[derive(Debug, Default)]
pub struct GraphBuilder {
    node_names: Vec<String>,
    name_to_id: HashMap<String, NodeId>,
    declared_types: HashMap<String, String>,
    edge_type_names: Vec<String>,
    edge_type_by_name: HashMap<String, EdgeTypeId>,
    adjacency: Vec<Vec<(EdgeTypeId, NodeId)>>,
    edge_count: usize,
}

impl GraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    fn intern_node(&mut self, name: &str) -> NodeId {
        if let Some(&id) = self.name_to_id.get(name) {
            return id;
        }
        let id = NodeId(self.node_names.len() as u32);
        self.node_names.push(name.to_string());
        self.name_to_id.insert(name.to_string(), id);
        self.adjacency.push(Vec::new());
        id
    }

    fn intern_edge_type(&mut self, name: &str) -> EdgeTypeId {
        if let Some(&id) = self.edge_type_by_name.get(name) {
            return id;
        }
        let id = EdgeTypeId(self.edge_type_names.len() as u16);
        self.edge_type_names.push(name.to_string());
        self.edge_type_by_name.insert(name.to_string(), id);
        id
    }

    pub fn add_edge(&mut self, src: &str, edge_type: &str, dst: &str) {
        let s = self.intern_node(src);
        let e = self.intern_edge_type(edge_type);
        let d = self.intern_node(dst);
        self.adjacency[s.index()].push((e, d));
        self.edge_count += 1;
    }

    pub fn set_node_type(&mut self, node: &str, node_type: &str) {
        self.declared_types
            .insert(node.to_string(), node_type.to_string());
    }

    pub fn build(self) -> HinGraph {
        let mut node_type_names: Vec<String> = Vec::new();
        let mut type_index: HashMap<String, NodeTypeId> = HashMap::new();
        let intern_type = |name: &str,
                               names: &mut Vec<String>,
                               index: &mut HashMap<String, NodeTypeId>| {
            if let Some(&id) = index.get(name) {
                return id;
            }
            let id = NodeTypeId(names.len() as u16);
            names.push(name.to_string());
            index.insert(name.to_string(), id);
            id
        };
        let node_types = self
            .node_names
            .iter()
            .map(|n| {
                let t = self
                    .declared_types
                    .get(n)
                    .map(String::as_str)
                    .unwrap_or(DEFAULT_NODE_TYPE);
                intern_type(t, &mut node_type_names, &mut type_index)
            })
            .collect();
        HinGraph {
            node_names: self.node_names,
            name_to_id: self.name_to_id,
            node_types,
            node_type_names,
            edge_type_names: self.edge_type_names,
            edge_type_by_name: self.edge_type_by_name,
            adjacency: self.adjacency,
            edge_count: self.edge_count,
        }
    }
}

fn split_row<'a>(line: &'a str, path: &str, lineno: usize, cols: usize) -> Result<Vec<&'a str>> {
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != cols {
        return Err(Error::MalformedRow {
            path: path.to_string(),
            line: lineno,
            expected: cols,
            got: fields.len(),
        });
    }
    Ok(fields)
}

/// Loads a graph from a tab-separated edge file (`src  edge_type  dst`,
/// `#`-prefixed lines ignored) plus an optional node-type file
/// (`node  node_type`). Nodes without a declared type get
/// [`DEFAULT_NODE_TYPE`].
pub fn load_graph(edge_file: &Path, node_type_file: Option<&Path>) -> Result<HinGraph> {
    let mut builder = GraphBuilder::new();
    let path_str = edge_file.display().to_string();
    let reader = BufReader::new(std::fs::File::open(edge_file)?);
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let f = split_row(&line, &path_str, i + 1, 3)?;
        builder.add_edge(f[0], f[1], f[2]);
    }
    if builder.edge_count == 0 {
        return Err(Error::EmptyGraph { path: path_str });
    }
    if let Some(tf) = node_type_file {
        let tpath = tf.display().to_string();
        let reader = BufReader::new(std::fs::File::open(tf)?);
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let f = split_row(&line, &tpath, i + 1, 2)?;
            builder.set_node_type(f[0], f[1]);
        }
    }
    Ok(builder.build())
}
