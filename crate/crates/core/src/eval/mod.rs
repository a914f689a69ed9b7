//! Downstream metric suite over any embedding file: k-means + NMI,
//! softmax-regression classification with Micro/Macro-F1, MAP@K
//! similarity ranking and top-k neighbor queries.

mod classify;
mod kmeans;
mod metrics;

pub use classify::{stratified_split, SoftmaxRegression};
pub use kmeans::{kmeans, KmeansResult};
pub use metrics::{
    f1_scores, map_at_k, nmi, top_k_neighbors, MapResult, Similarity,
};

use std::collections::HashMap;
use std::io::BufRead;

use crate::error::{Error, Result};
use crate::io::NamedEmbeddings;

/// Class labels keyed by node name.
#[derive(Debug, Clone)]
pub struct LabelSet {
    pub class_names: Vec<String>,
    by_node: HashMap<String, usize>,
}

impl LabelSet {
    pub fn class_count(&self) -> usize {
        self.class_names.len()
    }

    pub fn label_of(&self, node: &str) -> Option<usize> {
        self.by_node.get(node).copied()
    }

    pub fn len(&self) -> usize {
        self.by_node.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_node.is_empty()
    }

    /// Reads `node<TAB>class_name` rows; class ids follow first
    /// appearance.
    pub fn load<R: BufRead>(reader: R, path: &str) -> Result<LabelSet> {
        let mut class_names: Vec<String> = Vec::new();
        let mut class_index: HashMap<String, usize> = HashMap::new();
        let mut by_node = HashMap::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 2 {
                return Err(Error::MalformedRow {
                    path: path.to_string(),
                    line: i + 1,
                    expected: 2,
                    got: fields.len(),
                });
            }
            let class = *class_index.entry(fields[1].to_string()).or_insert_with(|| {
                class_names.push(fields[1].to_string());
                class_names.len() - 1
            });
            by_node.insert(fields[0].to_string(), class);
        }
        Ok(LabelSet {
            class_names,
            by_node,
        })
    }

    /// Aligns labels to embedding order; errors if a labeled node is
    /// missing from the embeddings. Returns (embedding index, label)
    /// pairs in embedding order.
    pub fn align(&self, emb: &NamedEmbeddings) -> Result<Vec<(usize, usize)>> {
        let mut missing: Vec<&String> = self
            .by_node
            .keys()
            .filter(|n| emb.position(n).is_none())
            .collect();
        if !missing.is_empty() {
            missing.sort();
            return Err(Error::UnknownNode(
                missing[0].clone(),
                vec!["node is labeled but absent from the embedding file".into()],
            ));
        }
        let mut out: Vec<(usize, usize)> = self
            .by_node
            .iter()
            .map(|(n, &c)| (emb.position(n).unwrap(), c))
            .collect();
        out.sort_unstable();
        Ok(out)
    }
}

/// Metric results in [0, 1].
#[derive(Debug, Clone, Default)]
pub struct EvalReport {
    pub nmi: Option<f64>,
    pub macro_f1: Option<f64>,
    pub micro_f1: Option<f64>,
    pub map_at_k: Option<f64>,
    pub map_at_k_dot: Option<f64>,
    pub per_class: Vec<(String, f64, f64)>, // (class, precision, recall)
}
