//! Training-record generation: uniform edge triples, typed random
//! walks, chain samples extracted from walk subsequences, meta-path
//! instances and endpoint-frequency filtering.
//!
//! All samplers are pure functions of (graph, config, seed); the same
//! seed always reproduces the same stream.

use std::collections::HashMap;
use std::io::{BufRead, Write};

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::graph::{EdgeTypeId, HinGraph, MetaPathPattern, NodeId};

/// One training record: first node, the relation chain, last node.
/// Length-1 chains are the edge-level (single relation) case.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ChainSample {
    pub first: NodeId,
    pub relations: Vec<EdgeTypeId>,
    pub last: NodeId,
}

impl ChainSample {
    pub fn new(first: NodeId, relations: Vec<EdgeTypeId>, last: NodeId) -> Self {
        debug_assert!(!relations.is_empty());
        ChainSample {
            first,
            relations,
            last,
        }
    }

    pub fn len(&self) -> usize {
        self.relations.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

/// A node sequence with the relation taken at each step.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypedWalk {
    pub nodes: Vec<NodeId>,
    pub relations: Vec<EdgeTypeId>,
}

impl TypedWalk {
    pub fn new(nodes: Vec<NodeId>, relations: Vec<EdgeTypeId>) -> Self {
        assert!(!nodes.is_empty());
        assert_eq!(nodes.len(), relations.len() + 1);
        TypedWalk { nodes, relations }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }
}

#[derive(Debug, Clone)]
pub struct SamplerConfig {
    /// walks started per node
    pub walks_per_node: usize,
    /// maximum nodes per walk
    pub max_walk_length: usize,
    /// maximum relation-chain length for extracted samples
    pub max_chain_length: usize,
    /// endpoint-frequency lower bound
    pub min_count: usize,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            walks_per_node: 100,
            max_walk_length: 50,
            max_chain_length: 3,
            min_count: 5,
            seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.walks_per_node < 1 || self.max_walk_length < 2 || self.max_chain_length < 1 {
            return Err(Error::Parse {
                path: "sampler config".into(),
                line: 0,
                msg: format!(
                    "require walks_per_node >= 1, max_walk_length >= 2, max_chain_length >= 1; \
                     got {}, {}, {}",
                    self.walks_per_node, self.max_walk_length, self.max_chain_length
                ),
            });
        }
        Ok(())
    }
}

/// Draws `count` edges uniformly over the edge multiset, as length-1
/// chain samples.
pub fn sample_edge_triples(g: &HinGraph, count: usize, seed: u64) -> Result<Vec<ChainSample>> {
    if g.edge_count() == 0 {
        return Err(Error::EmptySample);
    }
    let edges: Vec<(NodeId, EdgeTypeId, NodeId)> = g.edges().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count)
        .map(|_| {
            let (s, e, d) = edges[rng.gen_range(0..edges.len())];
            ChainSample::new(s, vec![e], d)
        })
        .collect())
}

/// Starts `walks_per_node` walks at every node. Each step picks
/// uniformly among the node's typed out-edges (parallel edges weight
/// the choice); the walk ends at `max_walk_length` nodes or at a sink.
pub fn random_walks(g: &HinGraph, cfg: &SamplerConfig) -> Vec<TypedWalk> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut walks = Vec::with_capacity(g.node_count() * cfg.walks_per_node);
    for start in g.nodes() {
        for _ in 0..cfg.walks_per_node {
            walks.push(single_walk(g, start, cfg.max_walk_length, &mut rng));
        }
    }
    walks
}

fn single_walk(g: &HinGraph, start: NodeId, max_len: usize, rng: &mut ChaCha8Rng) -> TypedWalk {
    let mut nodes = vec![start];
    let mut relations = Vec::new();
    let mut cur = start;
    while nodes.len() < max_len {
        let out = g.out_edges(cur);
        if out.is_empty() {
            break;
        }
        let (e, next) = out[rng.gen_range(0..out.len())];
        relations.push(e);
        nodes.push(next);
        cur = next;
    }
    TypedWalk::new(nodes, relations)
}

/// Extracts every contiguous subsequence of up to `c` relations and
/// keeps only its endpoints: a walk of n nodes yields max(0, n-m)
/// samples of chain length m for each m in 1..=c.
pub fn walk_to_chain_samples(walk: &TypedWalk, c: usize) -> Vec<ChainSample> {
    assert!(c >= 1);
    let n = walk.nodes.len();
    let mut out = Vec::new();
    for m in 1..=c {
        if n < m + 1 {
            break;
        }
        for i in 0..n - m {
            out.push(ChainSample::new(
                walk.nodes[i],
                walk.relations[i..i + m].to_vec(),
                walk.nodes[i + m],
            ));
        }
    }
    out
}

/// Samples `count` random instances of a relation pattern, keeping
/// only the endpoint nodes. Returns an empty vector when the graph
/// contains no instance of the pattern.
pub fn metapath_instances(
    g: &HinGraph,
    pattern: &MetaPathPattern,
    count: usize,
    seed: u64,
) -> Result<Vec<ChainSample>> {
    for e in &pattern.relations {
        if e.index() >= g.edge_type_count() {
            return Err(Error::InvalidEdgeTypeId(e.0, g.edge_type_count()));
        }
    }
    let m = pattern.relations.len();
    let n = g.node_count();
    // viable[k][v]: a pattern suffix starting at relation k can be
    // completed from v (k == m means only the node-type constraint).
    let mut viable = vec![vec![false; n]; m + 1];
    for v in g.nodes() {
        viable[m][v.index()] = type_ok(g, pattern, m, v);
    }
    for k in (0..m).rev() {
        for v in g.nodes() {
            if !type_ok(g, pattern, k, v) {
                continue;
            }
            viable[k][v.index()] = g
                .out_edges(v)
                .iter()
                .any(|(e, u)| *e == pattern.relations[k] && viable[k + 1][u.index()]);
        }
    }
    let starts: Vec<NodeId> = g.nodes().filter(|v| viable[0][v.index()]).collect();
    if starts.is_empty() {
        return Ok(Vec::new());
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let first = starts[rng.gen_range(0..starts.len())];
        let mut cur = first;
        for (k, rel) in pattern.relations.iter().enumerate() {
            let choices: Vec<NodeId> = g
                .out_edges(cur)
                .iter()
                .filter(|(e, u)| e == rel && viable[k + 1][u.index()])
                .map(|(_, u)| *u)
                .collect();
            cur = choices[rng.gen_range(0..choices.len())];
        }
        out.push(ChainSample::new(first, pattern.relations.clone(), cur));
    }
    Ok(out)
}

fn type_ok(g: &HinGraph, pattern: &MetaPathPattern, position: usize, v: NodeId) -> bool {
    match &pattern.node_types {
        None => true,
        Some(types) => g.node_type_of(v) == types[position],
    }
}

/// Drops samples whose first or last node appears fewer than
/// `min_count` times among all sample endpoints.
pub fn apply_min_count(samples: Vec<ChainSample>, min_count: usize) -> Vec<ChainSample> {
    if min_count == 0 {
        return samples;
    }
    let mut freq: HashMap<NodeId, usize> = HashMap::new();
    for s in &samples {
        *freq.entry(s.first).or_insert(0) += 1;
        *freq.entry(s.last).or_insert(0) += 1;
    }
    samples
        .into_iter()
        .filter(|s| freq[&s.first] >= min_count && freq[&s.last] >= min_count)
        .collect()
}

/// Writes samples as `first<TAB>e_1,...,e_m<TAB>last` with external
/// names.
pub fn write_samples<W: Write>(g: &HinGraph, samples: &[ChainSample], out: &mut W) -> Result<()> {
    for s in samples {
        let rels: Vec<&str> = s.relations.iter().map(|e| g.edge_type_name(*e)).collect();
        writeln!(
            out,
            "{}\t{}\t{}",
            g.node_name(s.first),
            rels.join(","),
            g.node_name(s.last)
        )?;
    }
    Ok(())
}

pub fn read_samples<R: BufRead>(g: &HinGraph, reader: R, path: &str) -> Result<Vec<ChainSample>> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 {
            return Err(Error::MalformedRow {
                path: path.to_string(),
                line: i + 1,
                expected: 3,
                got: fields.len(),
            });
        }
        let first = g
            .node_id(fields[0])
            .ok_or_else(|| Error::UnknownNode(fields[0].to_string(), vec![]))?;
        let last = g
            .node_id(fields[2])
            .ok_or_else(|| Error::UnknownNode(fields[2].to_string(), vec![]))?;
        let relations = fields[1]
            .split(',')
            .map(|name| {
                g.edge_type_id(name)
                    .ok_or_else(|| Error::UnknownEdgeType(name.to_string()))
            })
            .collect::<Result<Vec<_>>>()?;
        if relations.is_empty() {
            return Err(Error::Parse {
                path: path.to_string(),
                line: i + 1,
                msg: "empty relation list".into(),
            });
        }
        out.push(ChainSample::new(first, relations, last));
    }
    Ok(out)
}
